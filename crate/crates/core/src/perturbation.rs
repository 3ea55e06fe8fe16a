//! Random amplitude/phase perturbation of transfer functions.
//!
//! Each entry is redrawn as `A e^{iφ}` with `A ~ N(|Ĥ|, σ_A²)` and
//! `φ ~ N(arg Ĥ, σ_φ²)`. The amplitude perturbation is absolute, not
//! relative to `|Ĥ|`.
//!
//! Draws are counter-based: every `(seed, stream, frequency, k, l, trial)`
//! tuple is hashed into its own ChaCha key, so results do not depend on
//! evaluation order or thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use crate::acoustics::TransferMatrix;
use crate::error::{PszError, Result};
use crate::linalg::CMatrix;
use crate::scalar::{Cx, Real};

/// Stream label for the transfer functions used to design filters.
pub const DESIGN_STREAM: &str = "design";
/// Stream label for the independent set used to evaluate them.
pub const EVALUATION_STREAM: &str = "evaluation";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintyModel<T> {
    /// Amplitude variance, linear units squared.
    pub sigma_amp_sq: T,
    /// Phase variance, rad².
    pub sigma_phase_sq: T,
    pub trials: usize,
    pub seed: u64,
}

impl<T: Real> UncertaintyModel<T> {
    pub fn new(sigma_amp_sq: T, sigma_phase_sq: T, trials: usize, seed: u64) -> Result<Self> {
        let m = Self { sigma_amp_sq, sigma_phase_sq, trials, seed };
        m.check()?;
        Ok(m)
    }

    /// Equal amplitude and phase variance.
    pub fn isotropic(sigma_sq: T, trials: usize, seed: u64) -> Result<Self> {
        Self::new(sigma_sq, sigma_sq, trials, seed)
    }

    /// No perturbation at all.
    pub fn none() -> Self {
        Self { sigma_amp_sq: T::zero(), sigma_phase_sq: T::zero(), trials: 1, seed: 0 }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.sigma_amp_sq >= T::zero()) || !(self.sigma_phase_sq >= T::zero()) {
            return Err(PszError::InvalidArgument("variances must be nonnegative".into()));
        }
        if self.trials == 0 {
            return Err(PszError::InvalidArgument("trial count must be at least 1".into()));
        }
        Ok(())
    }

    pub fn is_degenerate(&self) -> bool {
        self.sigma_amp_sq.is_zero() && self.sigma_phase_sq.is_zero()
    }
}

/// Key of one independent random draw.
#[derive(Debug, Clone, Copy)]
pub struct DrawKey<'a> {
    pub seed: u64,
    pub stream: &'a str,
    pub frequency: f64,
    pub point: usize,
    pub speaker: usize,
    pub trial: usize,
}

impl DrawKey<'_> {
    /// Deterministic generator for this key.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(b"psz-perturbation-v1");
        h.update(self.seed.to_le_bytes());
        h.update((self.stream.len() as u64).to_le_bytes());
        h.update(self.stream.as_bytes());
        h.update(self.frequency.to_bits().to_le_bytes());
        h.update((self.point as u64).to_le_bytes());
        h.update((self.speaker as u64).to_le_bytes());
        h.update((self.trial as u64).to_le_bytes());
        let digest = h.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest[..32]);
        ChaCha8Rng::from_seed(seed)
    }
}

/// One perturbed sample of a nominal entry.
pub fn perturb_entry<T: Real>(nominal: Cx<T>, model: &UncertaintyModel<T>, key: &DrawKey<'_>) -> Cx<T> {
    let mut rng = key.rng();
    let za: f64 = rng.sample(StandardNormal);
    let zp: f64 = rng.sample(StandardNormal);
    let amp = nominal.norm() + model.sigma_amp_sq.sqrt() * T::lit(za);
    let phase = nominal.arg() + model.sigma_phase_sq.sqrt() * T::lit(zp);
    Cx::from_polar(amp.max(T::zero()), phase)
}

fn draw<T: Real>(h: &TransferMatrix<T>, model: &UncertaintyModel<T>, stream: &str, trial: usize) -> CMatrix<T> {
    let frequency = h.frequency.to_f64_lossy();
    let e = &h.entries;
    CMatrix::from_fn(e.rows(), e.cols(), |k, l| {
        let key = DrawKey { seed: model.seed, stream, frequency, point: k, speaker: l, trial };
        perturb_entry(e[(k, l)], model, &key)
    })
}

/// Single perturbed realisation of `h` (trial 0 of `stream`).
pub fn perturb<T: Real>(h: &TransferMatrix<T>, model: &UncertaintyModel<T>, stream: &str) -> TransferMatrix<T> {
    if model.is_degenerate() {
        return h.clone();
    }
    TransferMatrix::new(h.frequency, draw(h, model, stream, 0))
}

/// Entrywise complex mean of `model.trials` independent realisations.
pub fn averaged_perturbed<T: Real>(
    h: &TransferMatrix<T>,
    model: &UncertaintyModel<T>,
    stream: &str,
) -> TransferMatrix<T> {
    if model.is_degenerate() {
        return h.clone();
    }
    let trials = model.trials.max(1);
    let mut acc = draw(h, model, stream, 0);
    for t in 1..trials {
        acc = acc.add(&draw(h, model, stream, t)).expect("same shape");
    }
    let inv = T::one() / T::from_usize(trials).unwrap();
    let mean = if trials == 1 { acc } else { acc.map(|z| z * inv) };
    TransferMatrix::new(h.frequency, mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acoustics::scene_transfer_matrix;
    use crate::scene::Scene;

    fn nominal() -> TransferMatrix<f64> {
        scene_transfer_matrix(&Scene::paper_default(), 1000.0).unwrap()
    }

    #[test]
    fn zero_variance_is_identity() {
        let h = nominal();
        let m = UncertaintyModel::isotropic(0.0, 10, 7).unwrap();
        assert_eq!(perturb(&h, &m, DESIGN_STREAM), h);
        assert_eq!(averaged_perturbed(&h, &m, DESIGN_STREAM), h);
    }

    #[test]
    fn same_key_same_output() {
        let h = nominal();
        let m = UncertaintyModel::isotropic(1e-4, 10, 42).unwrap();
        assert_eq!(perturb(&h, &m, DESIGN_STREAM), perturb(&h, &m, DESIGN_STREAM));
        assert_eq!(averaged_perturbed(&h, &m, "x"), averaged_perturbed(&h, &m, "x"));
        assert_ne!(perturb(&h, &m, DESIGN_STREAM), perturb(&h, &m, EVALUATION_STREAM));
        let other_seed = UncertaintyModel { seed: 43, ..m };
        assert_ne!(perturb(&h, &m, DESIGN_STREAM), perturb(&h, &other_seed, DESIGN_STREAM));
    }

    #[test]
    fn one_trial_equals_single_draw() {
        let h = nominal();
        let m = UncertaintyModel::isotropic(1e-4, 1, 3).unwrap();
        assert_eq!(averaged_perturbed(&h, &m, "s"), perturb(&h, &m, "s"));
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(UncertaintyModel::isotropic(-1e-4, 10, 0).is_err());
        assert!(UncertaintyModel::isotropic(1e-4, 0, 0).is_err());
    }

    #[test]
    fn negative_amplitude_clamped() {
        let m = UncertaintyModel::new(100.0, 0.0, 1, 9).unwrap();
        let mut clamped = 0;
        for trial in 0..200 {
            let key = DrawKey { seed: 9, stream: "c", frequency: 1.0, point: 0, speaker: 0, trial };
            let z = perturb_entry(Cx::new(1e-3, 0.0), &m, &key);
            assert!(z.re >= 0.0);
            if z.norm() == 0.0 {
                clamped += 1;
            }
        }
        assert!(clamped > 50);
    }
}
