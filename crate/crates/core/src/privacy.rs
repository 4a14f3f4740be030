//! Calibration of the Gaussian and Laplace output-privatization mechanisms.
//!
//! Two state trajectories are adjacent when their stacked ℓ₁ distance is at
//! most `gamma`. The stacked output map is `diag(C, …, C)`, whose induced
//! norms equal those of `C`, so calibration only needs `‖C‖₁` and `‖C‖₂`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg;
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mechanism {
    Gaussian,
    Laplace,
}

/// Privacy budget `(epsilon, delta)` and adjacency radius `gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacySpec {
    pub budget: PrivacyBudget,
    pub mechanism: Mechanism,
}

impl PrivacySpec {
    pub fn new(epsilon: f64, delta: f64, gamma: f64, mechanism: Mechanism) -> Result<Self> {
        let spec = Self {
            budget: PrivacyBudget {
                epsilon,
                delta,
                gamma,
            },
            mechanism,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let PrivacyBudget {
            epsilon,
            delta,
            gamma,
        } = self.budget;
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidBudget(format!(
                "epsilon = {epsilon} must be > 0"
            )));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::InvalidBudget(format!(
                "delta = {delta} must lie in [0, 1)"
            )));
        }
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidBudget(format!("gamma = {gamma} must be > 0")));
        }
        if self.mechanism == Mechanism::Gaussian {
            check_gaussian_budget(&self.budget)?;
        }
        Ok(())
    }

    /// Noise distribution at the calibration lower bound.
    pub fn calibrate(&self, c: &Matrix, len: usize) -> Result<NoiseDistribution> {
        self.validate()?;
        match self.mechanism {
            Mechanism::Gaussian => {
                NoiseDistribution::gaussian(gaussian_sigma_lower(&self.budget, c)?, len)
            }
            Mechanism::Laplace => {
                NoiseDistribution::laplace(laplace_b_lower(&self.budget, c)?, len)
            }
        }
    }
}

fn check_gaussian_budget(b: &PrivacyBudget) -> Result<()> {
    // The Gaussian bound only holds for epsilon in (0, 1); no extrapolation.
    if !(b.epsilon > 0.0 && b.epsilon < 1.0) {
        return Err(Error::InvalidBudget(format!(
            "Gaussian mechanism needs epsilon in (0, 1), got {}",
            b.epsilon
        )));
    }
    if !(b.delta > 0.0 && b.delta < 1.0) {
        return Err(Error::InvalidBudget(format!(
            "Gaussian mechanism needs delta in (0, 1), got {}",
            b.delta
        )));
    }
    Ok(())
}

/// Induced 1-norm (max column sum) and spectral norm of `C`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InducedNorms {
    pub norm1: f64,
    pub norm2: f64,
}

pub fn induced_norms(c: &Matrix) -> Result<InducedNorms> {
    if c.nrows() == 0 || c.ncols() == 0 {
        return Err(Error::DimensionMismatch(
            "C must have nonzero dimensions".into(),
        ));
    }
    Ok(InducedNorms {
        norm1: linalg::induced_norm_1(c),
        norm2: linalg::spectral_norm(c),
    })
}

/// Smallest Gaussian variance giving `(epsilon, delta)`-DP:
/// `2 ln(1.25/delta) ‖C‖₂² gamma² / epsilon²`.
pub fn gaussian_sigma_lower(budget: &PrivacyBudget, c: &Matrix) -> Result<f64> {
    check_gaussian_budget(budget)?;
    let norm2 = induced_norms(c)?.norm2;
    let PrivacyBudget {
        epsilon,
        delta,
        gamma,
    } = *budget;
    Ok(2.0 * libm::log(1.25 / delta) * norm2 * norm2 * gamma * gamma / (epsilon * epsilon))
}

/// Smallest Laplace scale giving `epsilon`-DP: `‖C‖₁ gamma / epsilon`.
pub fn laplace_b_lower(budget: &PrivacyBudget, c: &Matrix) -> Result<f64> {
    if !(budget.epsilon > 0.0) {
        return Err(Error::InvalidBudget(format!(
            "Laplace mechanism needs epsilon > 0, got {}",
            budget.epsilon
        )));
    }
    Ok(induced_norms(c)?.norm1 * budget.gamma / budget.epsilon)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    /// i.i.d. `N(0, sigma2)` entries.
    Gaussian { sigma2: f64 },
    /// i.i.d. zero-mean Laplace entries with density `exp(-|x|/b) / 2b`.
    Laplace { b: f64 },
}

/// Distribution of the stacked measurement noise `v_{0:N}` of length `len`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseDistribution {
    kind: NoiseKind,
    len: usize,
}

impl NoiseDistribution {
    pub fn new(kind: NoiseKind, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::InvalidParameter(
                "noise dimension must be >= 1".into(),
            ));
        }
        let ok = match kind {
            NoiseKind::Gaussian { sigma2 } => sigma2 > 0.0 && sigma2.is_finite(),
            NoiseKind::Laplace { b } => b > 0.0 && b.is_finite(),
        };
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "noise parameter must be positive and finite: {kind:?}"
            )));
        }
        Ok(Self { kind, len })
    }

    pub fn gaussian(sigma2: f64, len: usize) -> Result<Self> {
        Self::new(NoiseKind::Gaussian { sigma2 }, len)
    }

    pub fn laplace(b: f64, len: usize) -> Result<Self> {
        Self::new(NoiseKind::Laplace { b }, len)
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.len
    }

    /// Always false; construction rejects `len == 0`.
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn mechanism(&self) -> Mechanism {
        match self.kind {
            NoiseKind::Gaussian { .. } => Mechanism::Gaussian,
            NoiseKind::Laplace { .. } => Mechanism::Laplace,
        }
    }

    /// `sigma2` or `b`.
    pub fn parameter(&self) -> f64 {
        match self.kind {
            NoiseKind::Gaussian { sigma2 } => sigma2,
            NoiseKind::Laplace { b } => b,
        }
    }

    pub fn variance(&self) -> f64 {
        match self.kind {
            NoiseKind::Gaussian { sigma2 } => sigma2,
            NoiseKind::Laplace { b } => 2.0 * b * b,
        }
    }

    /// Draws one scalar entry.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            NoiseKind::Gaussian { sigma2 } => {
                let z: f64 = rng.sample(StandardNormal);
                libm::sqrt(sigma2) * z
            }
            NoiseKind::Laplace { b } => {
                // inverse CDF with u uniform on the open interval (-1/2, 1/2)
                let u: f64 = rng.sample::<f64, _>(Open01) - 0.5;
                -b * u.signum() * libm::log(1.0 - 2.0 * u.abs())
            }
        }
    }

    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for x in out {
            *x = self.draw(rng);
        }
    }
}

/// Stacked noise vector of length `dist.len()`; bit-identical for equal seeds.
pub fn sample_noise(dist: &NoiseDistribution, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0.0; dist.len()];
    dist.fill(&mut rng, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use core::f64::consts::LN_2;

    fn c_example() -> Matrix {
        Matrix::from_row_slice(1, 2, &[1.0, 0.5])
    }

    fn budget(epsilon: f64, delta: f64, gamma: f64) -> PrivacyBudget {
        PrivacyBudget {
            epsilon,
            delta,
            gamma,
        }
    }

    #[test]
    fn norms_of_example_output_matrix() {
        let n = induced_norms(&c_example()).unwrap();
        assert_abs_diff_eq!(n.norm1, 1.0);
        assert_abs_diff_eq!(n.norm2, 1.118034, epsilon = 1e-6);
        let i = induced_norms(&Matrix::identity(2, 2)).unwrap();
        assert_abs_diff_eq!(i.norm1, 1.0);
        assert_abs_diff_eq!(i.norm2, 1.0, epsilon = 1e-14);
        let z = induced_norms(&Matrix::zeros(2, 3)).unwrap();
        assert_eq!((z.norm1, z.norm2), (0.0, 0.0));
        assert!(induced_norms(&Matrix::zeros(0, 2)).is_err());
    }

    #[test]
    fn gaussian_bound() {
        let s = gaussian_sigma_lower(&budget(LN_2, 0.5, 0.5), &c_example()).unwrap();
        assert_abs_diff_eq!(s, 1.1920, epsilon = 1e-3);
        let z = gaussian_sigma_lower(&budget(LN_2, 0.5, 0.5), &Matrix::zeros(1, 2)).unwrap();
        assert_eq!(z, 0.0);
        let s = gaussian_sigma_lower(&budget(0.5, 0.1, 1.0), &Matrix::identity(2, 2)).unwrap();
        assert_abs_diff_eq!(s, 2.0 * 12.5f64.ln() / 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(s, 20.2058, epsilon = 1e-4);
    }

    #[test]
    fn gaussian_budget_errors() {
        let c = c_example();
        for (e, d) in [(1.0, 0.5), (1.5, 0.5), (0.0, 0.5), (0.5, 0.0), (0.5, 1.0)] {
            assert!(matches!(
                gaussian_sigma_lower(&budget(e, d, 1.0), &c),
                Err(Error::InvalidBudget(_))
            ));
        }
    }

    #[test]
    fn laplace_bound() {
        let b = laplace_b_lower(&budget(LN_2, 0.5, 0.5), &c_example()).unwrap();
        assert_abs_diff_eq!(b, 0.7213, epsilon = 1e-3);
        assert_eq!(
            laplace_b_lower(&budget(LN_2, 0.0, 0.0), &c_example()).unwrap(),
            0.0
        );
        let c3 = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 1.0]);
        assert_abs_diff_eq!(laplace_b_lower(&budget(1.0, 0.0, 2.0), &c3).unwrap(), 6.0);
        assert!(matches!(
            laplace_b_lower(&budget(0.0, 0.0, 1.0), &c3),
            Err(Error::InvalidBudget(_))
        ));
    }

    #[test]
    fn spec_validation() {
        assert!(PrivacySpec::new(LN_2, 0.5, 0.5, Mechanism::Gaussian).is_ok());
        assert!(PrivacySpec::new(2.0, 0.0, 0.5, Mechanism::Laplace).is_ok());
        assert!(PrivacySpec::new(2.0, 0.5, 0.5, Mechanism::Gaussian).is_err());
        assert!(PrivacySpec::new(0.5, 0.0, 0.5, Mechanism::Gaussian).is_err());
        assert!(PrivacySpec::new(0.5, 0.5, 0.0, Mechanism::Laplace).is_err());
        let d = PrivacySpec::new(LN_2, 0.5, 0.5, Mechanism::Laplace)
            .unwrap()
            .calibrate(&c_example(), 21)
            .unwrap();
        assert_eq!(d.mechanism(), Mechanism::Laplace);
        assert_eq!(d.len(), 21);
    }

    #[test]
    fn distribution_construction() {
        assert!(NoiseDistribution::gaussian(1.0, 0).is_err());
        assert!(NoiseDistribution::gaussian(0.0, 3).is_err());
        assert!(NoiseDistribution::laplace(-1.0, 3).is_err());
        assert!(NoiseDistribution::laplace(f64::NAN, 3).is_err());
    }

    fn sample_variance(xs: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    }

    #[test]
    fn gaussian_moments() {
        let d = NoiseDistribution::gaussian(4.0, 100_000).unwrap();
        let v = sample_variance(&sample_noise(&d, 7));
        assert!((3.9..=4.1).contains(&v), "variance {v}");
    }

    #[test]
    fn laplace_moments() {
        let d = NoiseDistribution::laplace(1.0, 100_000).unwrap();
        let xs = sample_noise(&d, 11);
        let v = sample_variance(&xs);
        assert!((1.93..=2.07).contains(&v), "variance {v}");
        let mean_abs = xs.iter().map(|x| x.abs()).sum::<f64>() / xs.len() as f64;
        assert_abs_diff_eq!(mean_abs, 1.0, epsilon = 0.02);
    }

    #[test]
    fn sampling_is_deterministic() {
        let d = NoiseDistribution::laplace(0.7, 64).unwrap();
        assert_eq!(sample_noise(&d, 3), sample_noise(&d, 3));
        assert_ne!(sample_noise(&d, 3), sample_noise(&d, 4));
    }
}
