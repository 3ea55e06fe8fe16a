//! Free-field baffled-piston transfer functions.
//!
//! Time convention is `e^{+iωt}`, so an outgoing wave carries `e^{-ikr}`.

use rayon::prelude::*;

use crate::error::{PszError, Result};
use crate::linalg::CMatrix;
use crate::scalar::{cx, Cx, Real};
use crate::scene::{Scene, Vec3};

/// Complex `K×L` matrix of pressures at control points per unit loudspeaker input.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix<T> {
    pub frequency: T,
    pub entries: CMatrix<T>,
}

impl<T: Real> TransferMatrix<T> {
    pub fn new(frequency: T, entries: CMatrix<T>) -> Self {
        Self { frequency, entries }
    }

    pub fn points(&self) -> usize {
        self.entries.rows()
    }

    pub fn speakers(&self) -> usize {
        self.entries.cols()
    }
}

/// Below this argument the directivity uses its Taylor expansion.
const SMALL_ARG: f64 = 1e-4;
/// Crossover between the power series and the Hankel asymptotic expansion.
const ASYMPTOTIC_ARG: f64 = 15.0;

/// Bessel function of the first kind, order one.
pub fn bessel_j1<T: Real>(x: T) -> T {
    if x < T::zero() {
        return -bessel_j1(-x);
    }
    if x <= T::lit(ASYMPTOTIC_ARG) {
        j1_series(x)
    } else {
        j1_asymptotic(x)
    }
}

fn j1_series<T: Real>(x: T) -> T {
    let half = x * T::lit(0.5);
    let q = half * half;
    let mut term = half;
    let mut sum = term;
    for m in 1..200 {
        let mf = T::lit(m as f64);
        term = -term * q / (mf * (mf + T::one()));
        sum = sum + term;
        if term.abs() <= T::epsilon() * sum.abs() * T::lit(0.1) {
            break;
        }
    }
    sum
}

fn j1_asymptotic<T: Real>(x: T) -> T {
    // Hankel expansion with mu = 4 nu^2 = 4
    let mu = T::lit(4.0);
    let eight_x = T::lit(8.0) * x;
    let mut p = T::one();
    let mut q = T::zero();
    let mut a = T::one();
    let mut last = T::infinity();
    for k in 1..60 {
        let odd = T::lit((2 * k - 1) as f64);
        a = a * (mu - odd * odd) / (T::lit(k as f64) * eight_x);
        if a.abs() >= last {
            break;
        }
        last = a.abs();
        // k odd -> Q, k even -> P; signs alternate in pairs
        let sign = if (k / 2) % 2 == 0 { T::one() } else { -T::one() };
        if k % 2 == 1 {
            q = q + sign * a;
        } else {
            p = p + sign * a;
        }
        if a.abs() < T::epsilon() * T::lit(1e-2) {
            break;
        }
    }
    let chi = x - T::lit(0.75) * T::PI();
    (T::lit(2.0) / (T::PI() * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// Far-field piston directivity `2 J1(x) / x`, equal to 1 at `x = 0`.
pub fn piston_directivity<T: Real>(x: T) -> T {
    if x.abs() < T::lit(SMALL_ARG) {
        let x2 = x * x;
        T::one() - x2 / T::lit(8.0) + x2 * x2 / T::lit(192.0)
    } else {
        T::lit(2.0) * bessel_j1(x) / x
    }
}

/// Pressure at `field` due to a baffled piston at `source` facing `axis`:
/// `D(ka sinθ) e^{-ikr} / r`.
pub fn piston_response<T: Real>(
    source: Vec3<T>,
    axis: Vec3<T>,
    field: Vec3<T>,
    frequency: T,
    piston_radius: T,
    sound_speed: T,
) -> Result<Cx<T>> {
    if !(frequency > T::zero()) {
        return Err(PszError::NonPositiveFrequency(frequency.to_f64_lossy()));
    }
    let d = field - source;
    let r = d.norm();
    if !(r > T::zero()) {
        return Err(PszError::CoincidentPoints { point: 0, speaker: 0 });
    }
    let axis_len = axis.norm();
    let sin_theta =
        if axis_len > T::zero() { (d.cross(axis).norm() / (r * axis_len)).min(T::one()) } else { T::zero() };
    let k = T::TAU() * frequency / sound_speed;
    let directivity = piston_directivity(k * piston_radius * sin_theta);
    let phase = -k * r;
    Ok(cx(phase.cos(), phase.sin()) * (directivity / r))
}

/// Transfer row from every loudspeaker of `scene` to one field point.
pub fn transfer_row<T: Real>(scene: &Scene<T>, point: Vec3<T>, frequency: T) -> Result<Vec<Cx<T>>> {
    scene
        .speakers
        .iter()
        .enumerate()
        .map(|(l, &s)| {
            piston_response(s, scene.speaker_axis, point, frequency, scene.piston_radius, scene.sound_speed).map_err(
                |e| match e {
                    PszError::CoincidentPoints { .. } => PszError::CoincidentPoints { point: 0, speaker: l },
                    other => other,
                },
            )
        })
        .collect()
}

/// `H` with rows in the order of `points` and one column per loudspeaker.
pub fn transfer_matrix<T: Real>(scene: &Scene<T>, points: &[Vec3<T>], frequency: T) -> Result<TransferMatrix<T>> {
    if points.is_empty() {
        return Err(PszError::InvalidArgument("no field points given".into()));
    }
    let rows = points
        .par_iter()
        .enumerate()
        .map(|(k, &p)| {
            transfer_row(scene, p, frequency).map_err(|e| match e {
                PszError::CoincidentPoints { speaker, .. } => PszError::CoincidentPoints { point: k, speaker },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let data = rows.into_iter().flatten().collect();
    Ok(TransferMatrix::new(frequency, CMatrix::from_row_major(points.len(), scene.speakers.len(), data)))
}

/// `H` evaluated at the scene's own control points.
pub fn scene_transfer_matrix<T: Real>(scene: &Scene<T>, frequency: T) -> Result<TransferMatrix<T>> {
    transfer_matrix(scene, &scene.control_points, frequency)
}
