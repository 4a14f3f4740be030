//! KL divergences of the admissible noise distributions from the nominal
//! Gaussian `N(0, sigma2_lo I)` and the radius of the KL ball containing them.
//!
//! All logarithms are natural.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::{Error, Result};

/// `log π − 1`: the smallest possible Laplace-branch value.
pub const LAPLACE_BRANCH_FLOOR: f64 = 0.144_729_885_849_400_2;

/// Parameter intervals of the ambiguity set and the stacked noise length `L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmbiguityBounds {
    pub sigma2_lo: f64,
    pub sigma2_hi: f64,
    pub b_lo: f64,
    pub b_hi: f64,
    pub len: usize,
}

impl AmbiguityBounds {
    pub fn new(sigma2_lo: f64, sigma2_hi: f64, b_lo: f64, b_hi: f64, len: usize) -> Result<Self> {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(sigma2_lo) || !positive(b_lo) {
            return Err(Error::InvalidParameter(format!(
                "lower bounds must be positive (sigma2_lo = {sigma2_lo}, b_lo = {b_lo})"
            )));
        }
        if !(sigma2_hi >= sigma2_lo) || !sigma2_hi.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sigma2_hi = {sigma2_hi} must be >= sigma2_lo = {sigma2_lo}"
            )));
        }
        if !(b_hi >= b_lo) || !b_hi.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "b_hi = {b_hi} must be >= b_lo = {b_lo}"
            )));
        }
        if len == 0 {
            return Err(Error::InvalidParameter(
                "stacked dimension L must be >= 1".into(),
            ));
        }
        Ok(Self {
            sigma2_lo,
            sigma2_hi,
            b_lo,
            b_hi,
            len,
        })
    }

    /// Upper bounds at a fixed ratio of the lower bounds.
    pub fn with_ratio(sigma2_lo: f64, b_lo: f64, ratio: f64, len: usize) -> Result<Self> {
        Self::new(sigma2_lo, ratio * sigma2_lo, b_lo, ratio * b_lo, len)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Gaussian,
    Laplace,
}

/// `eta = (L/2) max(eta1, eta2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlRadius {
    pub eta: f64,
    pub eta1: f64,
    pub eta2: f64,
}

impl KlRadius {
    /// Which family attains the maximum (Laplace on ties).
    pub fn active_branch(&self) -> Branch {
        if self.eta1 > self.eta2 {
            Branch::Gaussian
        } else {
            Branch::Laplace
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            eta: self.eta * factor,
            ..*self
        }
    }
}

fn require_positive(what: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain { what, value })
    }
}

/// `g(x) = log(sigma2_lo / x) + x / sigma2_lo`, minimized at `x = sigma2_lo` with `g = 1`.
pub fn g(x: f64, sigma2_lo: f64) -> Result<f64> {
    require_positive("g: x", x)?;
    require_positive("g: sigma2_lo", sigma2_lo)?;
    Ok(libm::log(sigma2_lo / x) + x / sigma2_lo)
}

/// `D_KL(N(0, sigma2 I_L) ‖ N(0, sigma2_lo I_L)) = (L/2)(g(sigma2) − 1)`.
pub fn kl_gaussian_gaussian(sigma2: f64, sigma2_lo: f64, len: usize) -> Result<f64> {
    Ok(0.5 * len as f64 * (g(sigma2, sigma2_lo)? - 1.0))
}

/// `D_KL(Lap(b, L) ‖ N(0, sigma2_lo I_L)) = (L/2)(g(2b²) − 2 + log π)`.
pub fn kl_laplace_gaussian(b: f64, sigma2_lo: f64, len: usize) -> Result<f64> {
    require_positive("kl_laplace_gaussian: b", b)?;
    Ok(0.5 * len as f64 * (g(2.0 * b * b, sigma2_lo)? - 2.0 + libm::log(PI)))
}

/// Radius of the KL ball around the nominal Gaussian containing the whole
/// ambiguity set. Computed from the branch formulas, never by sampling.
pub fn radius_eta(bounds: &AmbiguityBounds) -> KlRadius {
    let s = bounds.sigma2_lo;
    // g is convex with its minimum at sigma2_lo, so the maxima sit on interval ends.
    let g_of = |x: f64| libm::log(s / x) + x / s;
    let eta1 = g_of(bounds.sigma2_hi) - 1.0;
    let eta2 = g_of(2.0 * bounds.b_lo * bounds.b_lo).max(g_of(2.0 * bounds.b_hi * bounds.b_hi))
        - 2.0
        + libm::log(PI);
    debug_assert!(eta2 >= LAPLACE_BRANCH_FLOOR - 1e-12);
    let eta = 0.5 * bounds.len as f64 * eta1.max(eta2);
    KlRadius { eta, eta1, eta2 }
}

/// Absolute error target of [`kl_quadrature_oracle`].
pub const QUADRATURE_TARGET: f64 = 1e-9;

/// One-dimensional `D_KL(Lap(b) ‖ N(0, sigma2))` by adaptive Gauss–Kronrod
/// quadrature over `[-40b, 40b]`. Independent of the closed form; used to check it.
pub fn kl_quadrature_oracle(b: f64, sigma2: f64) -> Result<f64> {
    require_positive("kl_quadrature_oracle: b", b)?;
    require_positive("kl_quadrature_oracle: sigma2", sigma2)?;
    let log_norm_gauss = 0.5 * libm::log(2.0 * PI * sigma2);
    let log_norm_lap = libm::log(2.0 * b);
    let integrand = |x: f64| {
        let log_lap = -x.abs() / b - log_norm_lap;
        let log_gauss = -x * x / (2.0 * sigma2) - log_norm_gauss;
        libm::exp(log_lap) * (log_lap - log_gauss)
    };
    // split at the kink of the Laplace density
    let left = adaptive_gauss_kronrod(&integrand, -40.0 * b, 0.0, 0.5 * QUADRATURE_TARGET)?;
    let right = adaptive_gauss_kronrod(&integrand, 0.0, 40.0 * b, 0.5 * QUADRATURE_TARGET)?;
    Ok(left + right)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// (Kronrod 15-point estimate, |K15 − G7|) on `[a, b]`.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

const MAX_SUBINTERVALS: usize = 4096;

/// Globally adaptive bisection: always splits the interval with the largest
/// error estimate until the summed estimate meets `target`.
pub fn adaptive_gauss_kronrod<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    target: f64,
) -> Result<f64> {
    let (v, e) = gk15(f, a, b);
    let mut parts: Vec<(f64, f64, f64, f64)> = alloc::vec![(a, b, v, e)];
    loop {
        let total_err: f64 = parts.iter().map(|p| p.3).sum();
        if total_err <= target {
            return Ok(parts.iter().map(|p| p.2).sum());
        }
        if parts.len() >= MAX_SUBINTERVALS {
            return Err(Error::QuadratureFailure {
                estimate: total_err,
                target,
            });
        }
        let worst = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let (lo, hi, _, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(f, lo, mid);
        let (v2, e2) = gk15(f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
}

/// Finite-support pieces of the variational (Donsker–Varadhan) identity
/// `sup_p E_p[f] − D_KL(p ‖ q) = log E_q[e^f]`.
pub mod finite {
    use alloc::vec::Vec;

    /// `Σ p log(p/q)`, with `0 log 0 = 0`; infinite when `p` puts mass where `q` has none.
    pub fn kl(p: &[f64], q: &[f64]) -> f64 {
        p.iter()
            .zip(q)
            .map(|(&pi, &qi)| {
                if pi == 0.0 {
                    0.0
                } else if qi == 0.0 {
                    f64::INFINITY
                } else {
                    pi * libm::log(pi / qi)
                }
            })
            .sum()
    }

    /// `log Σ q e^f`, shifted for stability.
    pub fn log_mgf(q: &[f64], f: &[f64]) -> f64 {
        let m = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = q.iter().zip(f).map(|(qi, fi)| qi * libm::exp(fi - m)).sum();
        m + libm::log(s)
    }

    /// The maximizer `p* ∝ q e^f`.
    pub fn tilted(q: &[f64], f: &[f64]) -> Vec<f64> {
        let m = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = q
            .iter()
            .zip(f)
            .map(|(qi, fi)| qi * libm::exp(fi - m))
            .collect();
        let z: f64 = w.iter().sum();
        w.into_iter().map(|x| x / z).collect()
    }

    /// `E_p[f] − D_KL(p ‖ q)`.
    pub fn variational_objective(p: &[f64], q: &[f64], f: &[f64]) -> f64 {
        let ef: f64 = p.iter().zip(f).map(|(a, b)| a * b).sum();
        ef - kl(p, q)
    }
}
