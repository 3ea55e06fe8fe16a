//! Rendering-mode targets and regularized multichannel pressure matching.
//!
//! Filters minimise `‖HC − M_T‖_F² + β‖C‖_F²`, whose minimiser satisfies
//! the normal equations `(HᴴH + βI) C = Hᴴ M_T`. The Hermitian normal
//! matrix is Cholesky-factored once per frequency and shared across all
//! target columns.

use std::fmt;
use std::str::FromStr;

use num_traits::Zero;

use crate::acoustics::TransferMatrix;
use crate::error::{PszError, Result};
use crate::linalg::{CMatrix, Cholesky};
use crate::scalar::{Cx, Real};
use crate::scene::{Scene, Zone};

/// How each zone's program is mapped onto target pressures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RenderingMode {
    /// One channel per zone, target is the mean of the program's virtual sources.
    Mono,
    /// One channel per virtual source, heard at both ears.
    Stereo,
    /// One channel per ear, cancelled at the contralateral ear.
    Xtc,
}

impl RenderingMode {
    pub const ALL: [RenderingMode; 3] = [RenderingMode::Mono, RenderingMode::Stereo, RenderingMode::Xtc];

    pub fn name(self) -> &'static str {
        match self {
            RenderingMode::Mono => "mono",
            RenderingMode::Stereo => "stereo",
            RenderingMode::Xtc => "xtc",
        }
    }

    /// Input-channel (column) indices of each zone's program under this mode.
    pub fn program_channels<T: Real>(self, scene: &Scene<T>, zone: Zone) -> Vec<usize> {
        match self {
            RenderingMode::Mono => match zone {
                Zone::A => vec![0],
                Zone::B => vec![1],
            },
            RenderingMode::Stereo | RenderingMode::Xtc => scene.program_channels(zone).to_vec(),
        }
    }

    pub fn channel_count<T: Real>(self, scene: &Scene<T>) -> usize {
        match self {
            RenderingMode::Mono => 2,
            RenderingMode::Stereo | RenderingMode::Xtc => scene.channel_count(),
        }
    }
}

impl fmt::Display for RenderingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RenderingMode {
    type Err = PszError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mono" => Ok(RenderingMode::Mono),
            "stereo" => Ok(RenderingMode::Stereo),
            "xtc" => Ok(RenderingMode::Xtc),
            other => Err(PszError::InvalidArgument(format!("unknown rendering mode `{other}`"))),
        }
    }
}

macro_rules! frequency_matrix {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name<T> {
            pub frequency: T,
            pub entries: CMatrix<T>,
        }

        impl<T: Real> $name<T> {
            pub fn new(frequency: T, entries: CMatrix<T>) -> Self {
                Self { frequency, entries }
            }
        }
    };
}

frequency_matrix!(
    /// Desired `K×I` channel-to-pressure matrix for one rendering mode.
    TargetMatrix
);
frequency_matrix!(
    /// `L×I` loudspeaker filters, one column per input channel.
    FilterMatrix
);
frequency_matrix!(
    /// `K×I` channel-to-pressure matrix `M = HC`.
    SystemMatrix
);

/// Target matrix for `mode`, built from the transfer functions of the
/// scene's virtual-source loudspeakers. Dark-zone rows are zero.
pub fn build_target_matrix<T: Real>(
    scene: &Scene<T>,
    h: &TransferMatrix<T>,
    mode: RenderingMode,
) -> Result<TargetMatrix<T>> {
    let k_total = scene.control_points.len();
    if h.points() != k_total || h.speakers() != scene.speakers.len() {
        return Err(PszError::DimensionMismatch(format!(
            "transfer matrix is {}x{}, scene has {} points and {} speakers",
            h.points(),
            h.speakers(),
            k_total,
            scene.speakers.len()
        )));
    }
    for (channel, &speaker) in scene.virtual_sources.iter().enumerate() {
        if speaker >= scene.speakers.len() {
            return Err(PszError::ModeMismatch {
                mode: mode.name(),
                reason: format!("channel {} maps to missing speaker {}", channel + 1, speaker + 1),
            });
        }
    }
    let e = &h.entries;
    let mut target = CMatrix::zeros(k_total, mode.channel_count(scene));

    match mode {
        RenderingMode::Mono => {
            for (col, zone) in [Zone::A, Zone::B].into_iter().enumerate() {
                let channels = scene.program_channels(zone);
                if channels.is_empty() {
                    return Err(PszError::ModeMismatch {
                        mode: mode.name(),
                        reason: format!("program {zone} is empty"),
                    });
                }
                let inv = T::one() / T::from_usize(channels.len()).unwrap();
                for &k in scene.zone_points(zone) {
                    let sum = channels.iter().fold(Cx::zero(), |acc, &i| acc + e[(k, scene.virtual_sources[i])]);
                    target[(k, col)] = sum * inv;
                }
            }
        }
        RenderingMode::Stereo => {
            for zone in [Zone::A, Zone::B] {
                for &i in scene.program_channels(zone) {
                    for &k in scene.zone_points(zone) {
                        target[(k, i)] = e[(k, scene.virtual_sources[i])];
                    }
                }
            }
        }
        RenderingMode::Xtc => {
            for zone in [Zone::A, Zone::B] {
                let channels = scene.program_channels(zone);
                let points = scene.zone_points(zone);
                if channels.len() != points.len() {
                    return Err(PszError::ModeMismatch {
                        mode: mode.name(),
                        reason: format!(
                            "zone {zone} has {} channels but {} control points",
                            channels.len(),
                            points.len()
                        ),
                    });
                }
                for (&i, &k) in channels.iter().zip(points) {
                    target[(k, i)] = e[(k, scene.virtual_sources[i])];
                }
            }
        }
    }
    Ok(TargetMatrix::new(h.frequency, target))
}

/// `β = K σ²`.
pub fn default_beta<T: Real>(points: usize, sigma_sq: T) -> T {
    T::from_usize(points).unwrap() * sigma_sq
}

fn check_same_frequency<T: Real>(a: T, b: T) -> Result<()> {
    let tol = T::lit(1e-9) * a.abs().max(b.abs());
    if (a - b).abs() > tol {
        return Err(PszError::FrequencyMismatch { left: a.to_f64_lossy(), right: b.to_f64_lossy() });
    }
    Ok(())
}

/// Regularized least-squares filters `C* = (HᴴH + βI)⁻¹ Hᴴ M_T`.
pub fn pressure_matching<T: Real>(h: &TransferMatrix<T>, target: &TargetMatrix<T>, beta: T) -> Result<FilterMatrix<T>> {
    check_same_frequency(h.frequency, target.frequency)?;
    if !(beta >= T::zero()) {
        return Err(PszError::InvalidArgument(format!("beta must be nonnegative, got {beta}")));
    }
    if target.entries.rows() != h.points() {
        return Err(PszError::DimensionMismatch(format!(
            "target has {} rows, transfer matrix has {}",
            target.entries.rows(),
            h.points()
        )));
    }
    let hh = h.entries.adjoint();
    let mut normal = hh.matmul(&h.entries).expect("conformable");
    for l in 0..normal.rows() {
        normal[(l, l)].re = normal[(l, l)].re + beta;
    }
    let rhs = hh.matmul(&target.entries).expect("conformable");
    let chol = Cholesky::factor(&normal)
        .ok_or(PszError::IllConditioned { frequency: h.frequency.to_f64_lossy(), beta: beta.to_f64_lossy() })?;
    let c = chol.solve(&rhs);
    if !c.is_finite() {
        return Err(PszError::IllConditioned { frequency: h.frequency.to_f64_lossy(), beta: beta.to_f64_lossy() });
    }
    Ok(FilterMatrix::new(h.frequency, c))
}

/// `‖HC − M_T‖_F² + β‖C‖_F²`.
pub fn cost<T: Real>(h: &CMatrix<T>, c: &CMatrix<T>, target: &CMatrix<T>, beta: T) -> Result<T> {
    let hc = h
        .matmul(c)
        .ok_or_else(|| PszError::DimensionMismatch(format!("H is {:?}, C is {:?}", h.shape(), c.shape())))?;
    let err = hc
        .sub(target)
        .ok_or_else(|| PszError::DimensionMismatch(format!("HC is {:?}, M_T is {:?}", hc.shape(), target.shape())))?;
    Ok(err.frobenius_sq() + beta * c.frobenius_sq())
}

/// `M = H_eval C`. The evaluation transfer matrix may differ from the one
/// used for design (moved listener, independent perturbation draw).
pub fn system_matrix<T: Real>(h_eval: &TransferMatrix<T>, c: &FilterMatrix<T>) -> Result<SystemMatrix<T>> {
    check_same_frequency(h_eval.frequency, c.frequency)?;
    let m = h_eval.entries.matmul(&c.entries).ok_or_else(|| {
        PszError::DimensionMismatch(format!("H is {:?}, C is {:?}", h_eval.entries.shape(), c.entries.shape()))
    })?;
    Ok(SystemMatrix::new(h_eval.frequency, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acoustics::scene_transfer_matrix;

    fn default_scene() -> (Scene<f64>, TransferMatrix<f64>) {
        let s = Scene::paper_default();
        let h = scene_transfer_matrix(&s, 1000.0).unwrap();
        (s, h)
    }

    #[test]
    fn mono_target_layout() {
        let (s, h) = default_scene();
        let t = build_target_matrix(&s, &h, RenderingMode::Mono).unwrap().entries;
        let e = &h.entries;
        assert_eq!(t.shape(), (4, 2));
        assert_eq!(t[(0, 0)], (e[(0, 0)] + e[(0, 3)]) * 0.5);
        assert_eq!(t[(1, 0)], (e[(1, 0)] + e[(1, 3)]) * 0.5);
        assert_eq!(t[(2, 1)], (e[(2, 4)] + e[(2, 7)]) * 0.5);
        assert_eq!(t[(3, 1)], (e[(3, 4)] + e[(3, 7)]) * 0.5);
        for (k, c) in [(0, 1), (1, 1), (2, 0), (3, 0)] {
            assert!(t[(k, c)].is_zero());
        }
    }

    #[test]
    fn stereo_target_layout() {
        let (s, h) = default_scene();
        let t = build_target_matrix(&s, &h, RenderingMode::Stereo).unwrap().entries;
        let e = &h.entries;
        assert_eq!(t.shape(), (4, 4));
        assert_eq!(t.column(1), vec![e[(0, 3)], e[(1, 3)], Cx::zero(), Cx::zero()]);
        assert_eq!(t.column(0), vec![e[(0, 0)], e[(1, 0)], Cx::zero(), Cx::zero()]);
        assert_eq!(t.column(3), vec![Cx::zero(), Cx::zero(), e[(2, 7)], e[(3, 7)]]);
    }

    #[test]
    fn xtc_target_is_diagonal() {
        let (s, h) = default_scene();
        let t = build_target_matrix(&s, &h, RenderingMode::Xtc).unwrap().entries;
        let e = &h.entries;
        let diag = [e[(0, 0)], e[(1, 3)], e[(2, 4)], e[(3, 7)]];
        for r in 0..4 {
            for c in 0..4 {
                if r == c {
                    assert_eq!(t[(r, c)], diag[r]);
                } else {
                    assert!(t[(r, c)].is_zero());
                }
            }
        }
    }

    #[test]
    fn xtc_needs_one_channel_per_ear() {
        let (mut s, h) = default_scene();
        s.program_a = vec![0];
        assert!(matches!(build_target_matrix(&s, &h, RenderingMode::Xtc), Err(PszError::ModeMismatch { .. })));
    }

    #[test]
    fn identity_exact_solve() {
        let h = TransferMatrix::new(1.0, CMatrix::<f64>::identity(2));
        let t = TargetMatrix::new(1.0, CMatrix::identity(2));
        let c = pressure_matching(&h, &t, 0.0).unwrap();
        assert!(c.entries.sub(&CMatrix::identity(2)).unwrap().frobenius() < 1e-15);
    }

    #[test]
    fn identity_shrinkage() {
        let beta = 4e-4;
        let h = TransferMatrix::new(1.0, CMatrix::<f64>::identity(2));
        let t = TargetMatrix::new(1.0, CMatrix::identity(2));
        let c = pressure_matching(&h, &t, beta).unwrap();
        let d = 1.0 / (1.0 + beta);
        assert!((d - 0.999_600_16).abs() < 1e-8);
        assert!((c.entries[(0, 0)].re - d).abs() < 1e-15);
        assert!((c.entries[(1, 1)].re - d).abs() < 1e-15);
        assert!(c.entries[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn singular_at_zero_beta() {
        let (s, h) = default_scene();
        let t = build_target_matrix(&s, &h, RenderingMode::Mono).unwrap();
        match pressure_matching(&h, &t, 0.0) {
            Err(PszError::IllConditioned { frequency, .. }) => assert_eq!(frequency, 1000.0),
            other => panic!("expected ill-conditioning error, got {other:?}"),
        }
        assert!(pressure_matching(&h, &t, -1.0).is_err());
    }

    #[test]
    fn cost_edge_cases() {
        let (s, h) = default_scene();
        let t = build_target_matrix(&s, &h, RenderingMode::Stereo).unwrap();
        let zero = CMatrix::zeros(8, 4);
        let j = cost(&h.entries, &zero, &t.entries, 0.3).unwrap();
        assert!((j - t.entries.frobenius_sq()).abs() < 1e-15);

        let id = CMatrix::<f64>::identity(3);
        assert_eq!(cost(&id, &id, &id, 0.0).unwrap(), 0.0);
        assert!(cost(&id, &zero, &id, 0.0).is_err());
    }

    #[test]
    fn system_matrix_checks() {
        let (s, h) = default_scene();
        let t = build_target_matrix(&s, &h, RenderingMode::Mono).unwrap();
        let c = pressure_matching(&h, &t, 4e-4).unwrap();
        let m = system_matrix(&h, &c).unwrap();
        assert_eq!(m.entries.shape(), (4, 2));

        let h2 = scene_transfer_matrix(&s, 2000.0).unwrap();
        assert!(matches!(system_matrix(&h2, &c), Err(PszError::FrequencyMismatch { .. })));

        // identity filters pass H straight through
        let id = FilterMatrix::new(1000.0, CMatrix::identity(8));
        let m = system_matrix(&h, &id).unwrap();
        assert_eq!(m.entries.column(5), h.entries.column(5));
        let bad = FilterMatrix::new(1000.0, CMatrix::identity(4));
        assert!(matches!(system_matrix(&h, &bad), Err(PszError::DimensionMismatch(_))));
    }

    #[test]
    fn beta_rule() {
        assert!((default_beta(4, 1e-4f64) - 4e-4).abs() < 1e-18);
        assert_eq!(default_beta(4, 0.0f64), 0.0);
        assert!((default_beta(2, 1e-4f64) - 2e-4).abs() < 1e-18);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("XTC".parse::<RenderingMode>().unwrap(), RenderingMode::Xtc);
        assert!("surround".parse::<RenderingMode>().is_err());
    }
}
