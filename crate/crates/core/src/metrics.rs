//! Inter-zone isolation (IZI), inter-program isolation (IPI), acoustic
//! contrast, and fractional-octave smoothing of metric spectra.
//!
//! Both isolation metrics are computed twice, once assuming all channels of
//! a program are fully correlated (complex sum before `|·|²`) and once
//! assuming they are uncorrelated (sum of `|·|²`). The reported value is the
//! smaller of the two.

use num_complex::Complex;
use num_traits::Zero;

use crate::error::{PszError, Result};
use crate::filter_design::SystemMatrix;
use crate::linalg::CMatrix;
use crate::scalar::{Cx, Real};

/// One isolation figure at one frequency, all ratios linear power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricValue<T> {
    pub frequency: T,
    pub corr: T,
    pub uncorr: T,
    /// `min(corr, uncorr)`
    pub value: T,
    /// `10 log10(value)`; `+inf` when the interfering energy is exactly zero.
    pub db: T,
}

impl<T: Real> MetricValue<T> {
    pub fn from_ratios(frequency: T, corr: T, uncorr: T) -> Self {
        let value = corr.min(uncorr);
        Self { frequency, corr, uncorr, value, db: to_db(value) }
    }

    /// Perfect cancellation: the denominator energy was exactly zero.
    pub fn is_unbounded(&self) -> bool {
        self.value.is_infinite()
    }
}

/// `10 log10(x)` for power ratios.
pub fn to_db<T: Real>(x: T) -> T {
    T::lit(10.0) * x.log10()
}

pub fn from_db<T: Real>(db: T) -> T {
    T::lit(10.0).powf(db / T::lit(10.0))
}

/// Ratio with the zero-denominator sentinel.
fn ratio<T: Real>(num: T, den: T) -> T {
    if den.is_zero() {
        T::infinity()
    } else {
        num / den
    }
}

fn count<T: Real>(n: usize) -> T {
    T::from_usize(n).unwrap()
}

fn check_set(name: &str, set: &[usize], bound: usize) -> Result<()> {
    if set.is_empty() {
        return Err(PszError::InvalidArgument(format!("{name} is empty")));
    }
    if let Some(&bad) = set.iter().find(|&&i| i >= bound) {
        return Err(PszError::InvalidArgument(format!("{name} index {bad} out of range (< {bound})")));
    }
    Ok(())
}

fn check_disjoint(name: &str, a: &[usize], b: &[usize]) -> Result<()> {
    if a.iter().any(|i| b.contains(i)) {
        return Err(PszError::InvalidArgument(format!("{name} sets overlap")));
    }
    Ok(())
}

/// `Σ_k |Σ_i M_ki|²` (coherent) and `Σ_k Σ_i |M_ki|²` (incoherent).
fn energies<T: Real>(m: &CMatrix<T>, points: &[usize], channels: &[usize]) -> (T, T) {
    let mut coherent = T::zero();
    let mut incoherent = T::zero();
    for &k in points {
        let mut sum: Cx<T> = Complex::zero();
        for &i in channels {
            let z = m[(k, i)];
            sum = sum + z;
            incoherent = incoherent + z.norm_sqr();
        }
        coherent = coherent + sum.norm_sqr();
    }
    (coherent, incoherent)
}

/// Inter-zone isolation of one program: mean power per control point in the
/// bright zone over that in the dark zone.
pub fn izi<T: Real>(
    m: &SystemMatrix<T>,
    bright: &[usize],
    dark: &[usize],
    program: &[usize],
) -> Result<MetricValue<T>> {
    let e = &m.entries;
    check_set("bright-zone points", bright, e.rows())?;
    check_set("dark-zone points", dark, e.rows())?;
    check_set("program channels", program, e.cols())?;
    check_disjoint("zone point", bright, dark)?;

    let (bc, bu) = energies(e, bright, program);
    let (dc, du) = energies(e, dark, program);
    let nb = count::<T>(bright.len());
    let nd = count::<T>(dark.len());
    Ok(MetricValue::from_ratios(m.frequency, ratio(bc / nb, dc / nd), ratio(bu / nb, du / nd)))
}

/// Inter-program isolation within one zone: mean power per channel of the
/// target program over that of the interfering program.
pub fn ipi<T: Real>(
    m: &SystemMatrix<T>,
    zone: &[usize],
    target: &[usize],
    interferer: &[usize],
) -> Result<MetricValue<T>> {
    let e = &m.entries;
    check_set("zone points", zone, e.rows())?;
    check_set("target channels", target, e.cols())?;
    check_set("interfering channels", interferer, e.cols())?;
    check_disjoint("channel", target, interferer)?;

    let (tc, tu) = energies(e, zone, target);
    let (ic, iu) = energies(e, zone, interferer);
    let nt = count::<T>(target.len());
    let ni = count::<T>(interferer.len());
    Ok(MetricValue::from_ratios(m.frequency, ratio(tc / nt, ic / ni), ratio(tu / nt, iu / ni)))
}

/// [`ipi`] restricted to the single control point `k`.
pub fn single_point_ipi<T: Real>(
    m: &SystemMatrix<T>,
    k: usize,
    target: &[usize],
    interferer: &[usize],
) -> Result<MetricValue<T>> {
    ipi(m, &[k], target, interferer)
}

/// Classic acoustic contrast for a single gain vector `q`:
/// `(‖H_A q‖² / K_A) / (‖H_B q‖² / K_B)`.
pub fn acoustic_contrast<T: Real>(h_bright: &CMatrix<T>, h_dark: &CMatrix<T>, q: &[Cx<T>]) -> Result<T> {
    if h_bright.cols() != q.len() || h_dark.cols() != q.len() {
        return Err(PszError::DimensionMismatch(format!(
            "zone blocks have {} and {} columns, gain vector has {}",
            h_bright.cols(),
            h_dark.cols(),
            q.len()
        )));
    }
    if h_bright.rows() == 0 || h_dark.rows() == 0 {
        return Err(PszError::InvalidArgument("empty zone block".into()));
    }
    let q = CMatrix::from_row_major(q.len(), 1, q.to_vec());
    let pb = h_bright.matmul(&q).expect("conformable").frobenius_sq() / count::<T>(h_bright.rows());
    let pd = h_dark.matmul(&q).expect("conformable").frobenius_sq() / count::<T>(h_dark.rows());
    Ok(ratio(pb, pd))
}

/// A metric over frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpectrum<T> {
    pub label: String,
    pub values: Vec<MetricValue<T>>,
}

impl<T: Real> MetricSpectrum<T> {
    pub fn new(label: impl Into<String>, values: Vec<MetricValue<T>>) -> Result<Self> {
        if values.windows(2).any(|w| !(w[1].frequency > w[0].frequency)) {
            return Err(PszError::InvalidArgument("spectrum frequencies must be strictly increasing".into()));
        }
        Ok(Self { label: label.into(), values })
    }

    pub fn frequencies(&self) -> impl Iterator<Item = T> + '_ {
        self.values.iter().map(|v| v.frequency)
    }

    pub fn db(&self) -> impl Iterator<Item = T> + '_ {
        self.values.iter().map(|v| v.db)
    }

    /// Mean of the dB values with `lo <= f <= hi`, or `None` if no bin falls there.
    pub fn mean_db_between(&self, lo: T, hi: T) -> Option<T> {
        let sel: Vec<T> = self.values.iter().filter(|v| v.frequency >= lo && v.frequency <= hi).map(|v| v.db).collect();
        (!sel.is_empty()).then(|| sel.iter().copied().sum::<T>() / count::<T>(sel.len()))
    }
}

/// Fractional-octave smoothing: each bin becomes the mean linear power of
/// all bins within `[f·2^(-1/2n), f·2^(1/2n)]`, truncated at the ends.
/// Bins are treated as evenly weighted regardless of grid spacing.
///
/// `corr`, `uncorr` and `value` are smoothed independently, so a smoothed
/// `value` is bounded by, but not always equal to, the smaller component.
pub fn fractional_octave_smooth<T: Real>(spectrum: &MetricSpectrum<T>, fraction: u32) -> MetricSpectrum<T> {
    let half_width = T::lit(2.0).powf(T::one() / T::lit(2.0 * f64::from(fraction.max(1))));
    // band edges are inclusive; the slack keeps grid points that sit exactly
    // on an edge from flipping in or out on rounding
    let slack = T::one() + T::epsilon() * T::lit(64.0);
    let vals = &spectrum.values;
    let mut lo = 0usize;
    let mut hi = 0usize;
    let mut out = Vec::with_capacity(vals.len());
    for v in vals {
        let f_lo = v.frequency / half_width / slack;
        let f_hi = v.frequency * half_width * slack;
        while vals[lo].frequency < f_lo {
            lo += 1;
        }
        while hi < vals.len() && vals[hi].frequency <= f_hi {
            hi += 1;
        }
        let window = &vals[lo..hi];
        let n = count::<T>(window.len());
        let corr = window.iter().map(|w| w.corr).sum::<T>() / n;
        let uncorr = window.iter().map(|w| w.uncorr).sum::<T>() / n;
        let value = window.iter().map(|w| w.value).sum::<T>() / n;
        out.push(MetricValue { frequency: v.frequency, corr, uncorr, value, db: to_db(value) });
    }
    MetricSpectrum { label: spectrum.label.clone(), values: out }
}

/// 1/3-octave smoothing.
pub fn third_octave_smooth<T: Real>(spectrum: &MetricSpectrum<T>) -> MetricSpectrum<T> {
    fractional_octave_smooth(spectrum, 3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cx;

    fn sys(rows: usize, cols: usize, data: &[f64]) -> SystemMatrix<f64> {
        SystemMatrix::new(1000.0, CMatrix::from_row_major(rows, cols, data.iter().map(|&x| cx(x, 0.0)).collect()))
    }

    #[test]
    fn izi_single_channel_ratio() {
        let m = sys(2, 1, &[1.0, 0.1]);
        let v = izi(&m, &[0], &[1], &[0]).unwrap();
        assert!((v.corr - 100.0).abs() < 1e-12);
        assert!((v.uncorr - 100.0).abs() < 1e-12);
        assert!((v.db - 20.0).abs() < 1e-12);
    }

    #[test]
    fn izi_equal_field_is_zero_db() {
        let m = SystemMatrix::new(1.0, CMatrix::from_fn(4, 2, |r, c| Cx::from_polar(0.7, (r * 3 + c) as f64)));
        let v = izi(&m, &[0, 1], &[2, 3], &[0, 1]).unwrap();
        assert!((v.uncorr - 1.0).abs() < 1e-12);
        assert!(v.value <= 1.0 + 1e-12);
        let flat = sys(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        let v = izi(&flat, &[0], &[1], &[0, 1]).unwrap();
        assert!((v.value - 1.0).abs() < 1e-15 && v.db.abs() < 1e-12);
    }

    #[test]
    fn izi_correlated_vs_uncorrelated() {
        let m = sys(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let v = izi(&m, &[0], &[1], &[0, 1]).unwrap();
        assert!((v.corr - 4.0).abs() < 1e-15);
        assert!((v.uncorr - 2.0).abs() < 1e-15);
        assert_eq!(v.value, v.uncorr);
    }

    #[test]
    fn ipi_hand_values() {
        let m = sys(1, 2, &[1.0, 0.1]);
        let v = ipi(&m, &[0], &[0], &[1]).unwrap();
        assert!((v.value - 100.0).abs() < 1e-12 && (v.db - 20.0).abs() < 1e-12);

        let same = sys(1, 2, &[0.3, 0.3]);
        assert!(ipi(&same, &[0], &[0], &[1]).unwrap().db.abs() < 1e-12);

        let m = sys(1, 4, &[1.0, 1.0, 0.1, 0.3]);
        let v = ipi(&m, &[0], &[0, 1], &[2, 3]).unwrap();
        assert!((v.corr - 25.0).abs() < 1e-12);
        assert!((v.uncorr - 20.0).abs() < 1e-12);
        assert!((v.value - 20.0).abs() < 1e-12);
    }

    #[test]
    fn zero_interference_is_unbounded() {
        let m = sys(2, 2, &[1.0, 0.0, 0.5, 0.0]);
        let v = single_point_ipi(&m, 0, &[0], &[1]).unwrap();
        assert!(v.is_unbounded());
        assert_eq!(v.db, f64::INFINITY);
        let v = izi(&sys(2, 1, &[1.0, 0.0]), &[0], &[1], &[0]).unwrap();
        assert!(v.is_unbounded());
    }

    #[test]
    fn single_point_matches_singleton_zone() {
        let m = SystemMatrix::new(1.0, CMatrix::from_fn(3, 2, |r, c| cx(r as f64 + 0.5, c as f64 - 0.2)));
        assert_eq!(single_point_ipi(&m, 2, &[0], &[1]).unwrap(), ipi(&m, &[2], &[0], &[1]).unwrap());
    }

    #[test]
    fn bad_index_sets_rejected() {
        let m = sys(2, 2, &[1.0, 0.0, 0.5, 0.0]);
        assert!(izi(&m, &[], &[1], &[0]).is_err());
        assert!(izi(&m, &[0], &[0], &[0]).is_err());
        assert!(izi(&m, &[0], &[5], &[0]).is_err());
        assert!(ipi(&m, &[0], &[0], &[0]).is_err());
        assert!(ipi(&m, &[0], &[0], &[]).is_err());
    }

    #[test]
    fn contrast_of_identical_zones_is_one() {
        let h = CMatrix::from_fn(2, 3, |r, c| cx(r as f64 + c as f64, 1.0));
        let q = vec![cx(0.3, -0.1), cx(1.0, 0.0), cx(-0.5, 0.25)];
        assert!((acoustic_contrast(&h, &h, &q).unwrap() - 1.0).abs() < 1e-14);
        assert!(acoustic_contrast(&h, &h, &q[..2]).is_err());
    }

    fn spectrum(freqs: &[f64], vals: &[f64]) -> MetricSpectrum<f64> {
        MetricSpectrum::new("t", freqs.iter().zip(vals).map(|(&f, &v)| MetricValue::from_ratios(f, v, v)).collect())
            .unwrap()
    }

    #[test]
    fn smoothing_constant_is_fixed_point() {
        let freqs: Vec<f64> = (0..50).map(|n| 100.0 * 2f64.powf(n as f64 / 12.0)).collect();
        let s = spectrum(&freqs, &vec![42.0; 50]);
        let sm = third_octave_smooth(&s);
        for v in &sm.values {
            assert!((v.value - 42.0).abs() < 1e-12);
        }
    }

    #[test]
    fn smoothing_spreads_a_spike() {
        let freqs: Vec<f64> = (0..49).map(|n| 100.0 * 2f64.powf(n as f64 / 24.0)).collect();
        let mut vals = vec![1.0; 49];
        vals[24] = 1001.0;
        let sm = third_octave_smooth(&spectrum(&freqs, &vals));
        assert!(sm.values[24].value < 1001.0);
        // 1/3 octave on a 24/octave grid: ±4 bins
        assert!(sm.values[20].value > 1.0 && sm.values[28].value > 1.0);
        assert_eq!(sm.values[19].value, 1.0);
        assert_eq!(sm.values[29].value, 1.0);
        assert!((sm.values[24].value - (1000.0 / 9.0 + 1.0)).abs() < 1e-9);
    }

    #[test]
    fn non_increasing_frequencies_rejected() {
        let v = MetricValue::from_ratios(10.0, 1.0, 1.0);
        assert!(MetricSpectrum::new("x", vec![v, v]).is_err());
    }
}
