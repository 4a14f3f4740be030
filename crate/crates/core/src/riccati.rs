//! Coupled risk-sensitive Riccati recursions for a fixed `tau > 0`.
//!
//! Forward (estimator), from `Σ_0 = Σ_ini`:
//! `P_k = Σ_k⁻¹ + CᵀC/σ² − Q/τ`, `Σ_{k+1} = Σ_w + A P_k⁻¹ Aᵀ`, `K_k = A P_k⁻¹ Cᵀ/σ²`.
//!
//! Backward (feedback), from `Π_N = Q_N`:
//! `L_{k+1} = Π_{k+1}⁻¹ + B R⁻¹ Bᵀ − Σ_w/τ`, `Π_k = Q + Aᵀ L_{k+1}⁻¹ A`,
//! `F_k = R⁻¹ Bᵀ L_{k+1}⁻¹ A (I − Σ_k Π_k/τ)⁻¹`.
//!
//! Conditions of the form `Π⁻¹ − S/τ ≻ 0` (with `S = G Gᵀ ≻ 0`, `Π ⪰ 0`) are
//! tested as `τ I − Gᵀ Π G ≻ 0`, which needs no inverse of `Π` and therefore
//! also covers a singular terminal weight.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::ambiguity::KlRadius;
use crate::linalg::{self, Cholesky, RICCATI_PIVOT_TOLERANCE};
use crate::model::Problem;
use crate::{Error, Matrix, Result};

/// Positive-definiteness requirement that can fail for small `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    /// `Σ_k ≻ 0`
    SigmaPositive,
    /// `P_k ≻ 0`
    PPositive,
    /// `Π_{k+1}⁻¹ − Σ_w/τ ≻ 0`
    PiInvMinusSigmaW,
    /// `Π_k⁻¹ − Σ_k/τ ≻ 0`
    PiInvMinusSigma,
    /// `L_{k+1}` invertible (only reachable through round-off)
    LSingular,
    /// `P_k − CᵀC/σ² = Σ_k⁻¹ − Q/τ ≻ 0`, needed by the value's log-det terms
    EstimatorInformation,
    /// `Σ_N⁻¹ − Q_N/τ ≻ 0`
    Terminal,
    /// The K-coupled log-det argument of the value is not positive definite
    Coupling,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Condition::SigmaPositive => "Sigma_k > 0",
            Condition::PPositive => "P_k > 0",
            Condition::PiInvMinusSigmaW => "Pi_{k+1}^-1 - Sigma_w/tau > 0",
            Condition::PiInvMinusSigma => "Pi_k^-1 - Sigma_k/tau > 0",
            Condition::LSingular => "L_{k+1} invertible",
            Condition::EstimatorInformation => "P_k - C'C/sigma2 > 0",
            Condition::Terminal => "Sigma_N^-1 - Q_N/tau > 0",
            Condition::Coupling => "coupling log-det argument > 0",
        };
        f.write_str(s)
    }
}

/// Earliest violated condition and the step index where it happened.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Failure {
    pub step: usize,
    pub condition: Condition,
}

#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// `Σ_0 ..= Σ_N` (truncated at the failing step).
    pub sigma: Vec<Matrix>,
    /// `P_0 .. P_{N-1}`.
    pub p: Vec<Matrix>,
    pub p_inv: Vec<Matrix>,
    /// Estimator gains `K_0 .. K_{N-1}`.
    pub k: Vec<Matrix>,
    pub first_failure: Option<Failure>,
}

impl ForwardPass {
    pub fn feasible(&self) -> bool {
        self.first_failure.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct BackwardPass {
    /// `Π_0 ..= Π_N`; entries below a failing step stay zero.
    pub pi: Vec<Matrix>,
    /// `l_inv[k] = L_{k+1}⁻¹`, `k = 0 .. N-1`. Stored inverted because `L_N` is
    /// unbounded when `Q_N` is singular.
    pub l_inv: Vec<Matrix>,
    /// Feedback gains `F_0 .. F_{N-1}`.
    pub f: Vec<Matrix>,
    pub first_failure: Option<Failure>,
}

impl BackwardPass {
    pub fn feasible(&self) -> bool {
        self.first_failure.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub tau: f64,
    pub forward: ForwardPass,
    pub backward: Option<BackwardPass>,
    /// Present iff every feasibility condition holds.
    pub w_tau: Option<f64>,
    pub first_failure: Option<Failure>,
}

impl RiccatiSolution {
    pub fn feasible(&self) -> bool {
        self.w_tau.is_some()
    }
}

fn chol(m: &Matrix) -> Option<Cholesky> {
    Cholesky::with_trace_tolerance(m, RICCATI_PIVOT_TOLERANCE)
}

/// `τ I − Gᵀ Π G ≻ 0` with `G` the Cholesky factor of `S`, i.e. `Π⁻¹ − S/τ ≻ 0`.
fn inverse_gap_positive(pi: &Matrix, s_factor: &Matrix, tau: f64) -> bool {
    let n = pi.nrows();
    let inner = linalg::symmetrize(&(s_factor.transpose() * pi * s_factor));
    chol(&(Matrix::identity(n, n) * tau - inner)).is_some()
}

/// `(Π⁻¹ − S/τ)⁻¹ = Π (I − S Π/τ)⁻¹`, valid for singular `Π`.
fn inverse_gap(pi: &Matrix, s: &Matrix, tau: f64) -> Option<Matrix> {
    let n = pi.nrows();
    let m = Matrix::identity(n, n) - s * pi / tau;
    let inv = linalg::lu_inverse(&m)?;
    Some(linalg::symmetrize(&(pi * inv)))
}

pub fn forward_riccati(problem: &Problem, sigma2_lo: f64, tau: f64) -> ForwardPass {
    let plant = &problem.plant;
    let q = &problem.weights.q;
    let n_steps = plant.horizon;
    let info = plant.c.transpose() * &plant.c / sigma2_lo;
    let mut out = ForwardPass {
        sigma: Vec::with_capacity(n_steps + 1),
        p: Vec::with_capacity(n_steps),
        p_inv: Vec::with_capacity(n_steps),
        k: Vec::with_capacity(n_steps),
        first_failure: None,
    };
    let mut sigma = linalg::symmetrize(&plant.sigma_ini);
    for step in 0..n_steps {
        let Some(sigma_chol) = chol(&sigma) else {
            out.sigma.push(sigma);
            out.first_failure = Some(Failure {
                step,
                condition: Condition::SigmaPositive,
            });
            return out;
        };
        let p = linalg::symmetrize(&(sigma_chol.inverse() + &info - q / tau));
        out.sigma.push(sigma);
        let Some(p_chol) = chol(&p) else {
            out.p.push(p);
            out.first_failure = Some(Failure {
                step,
                condition: Condition::PPositive,
            });
            return out;
        };
        let p_inv = p_chol.inverse();
        let a_p_inv = &plant.a * &p_inv;
        out.k.push(&a_p_inv * plant.c.transpose() / sigma2_lo);
        sigma = linalg::symmetrize(&(&plant.sigma_w + &a_p_inv * plant.a.transpose()));
        out.p.push(p);
        out.p_inv.push(p_inv);
    }
    out.sigma.push(sigma);
    out
}

pub fn backward_riccati(
    problem: &Problem,
    tau: f64,
    forward: &ForwardPass,
) -> Result<BackwardPass> {
    if !forward.feasible() {
        return Err(Error::InvalidParameter(
            "backward pass needs a feasible forward pass".into(),
        ));
    }
    let plant = &problem.plant;
    let w = &problem.weights;
    let n = plant.state_dim();
    let n_steps = plant.horizon;
    let eye = Matrix::identity(n, n);
    let r_inv = Cholesky::with_trace_tolerance(&w.r, RICCATI_PIVOT_TOLERANCE)
        .map(|c| c.inverse())
        .ok_or_else(|| Error::InvalidParameter("R is not positive definite".into()))?;
    let sw_factor = Cholesky::with_trace_tolerance(&plant.sigma_w, RICCATI_PIVOT_TOLERANCE)
        .ok_or_else(|| Error::InvalidParameter("Sigma_w is not positive definite".into()))?
        .factor()
        .clone();
    let control_minus_noise = &plant.b * &r_inv * plant.b.transpose() - &plant.sigma_w / tau;

    let mut out = BackwardPass {
        pi: vec![Matrix::zeros(n, n); n_steps + 1],
        l_inv: vec![Matrix::zeros(n, n); n_steps],
        f: vec![Matrix::zeros(plant.input_dim(), n); n_steps],
        first_failure: None,
    };
    out.pi[n_steps] = linalg::symmetrize(&w.q_n);

    for step in (0..n_steps).rev() {
        let fail = |condition| Failure { step, condition };
        let pi_next = &out.pi[step + 1];
        if !inverse_gap_positive(pi_next, &sw_factor, tau) {
            out.first_failure = Some(fail(Condition::PiInvMinusSigmaW));
            return Ok(out);
        }
        let l_inv = match chol(pi_next) {
            Some(pi_chol) => {
                let l = linalg::symmetrize(&(pi_chol.inverse() + &control_minus_noise));
                chol(&l).map(|c| c.inverse())
            }
            // singular Π_{k+1}: L⁻¹ = Π (I + M Π)⁻¹
            None => linalg::lu_inverse(&(&eye + &control_minus_noise * pi_next))
                .map(|inv| linalg::symmetrize(&(pi_next * inv))),
        };
        let Some(l_inv) = l_inv else {
            out.first_failure = Some(fail(Condition::LSingular));
            return Ok(out);
        };
        let pi = linalg::symmetrize(&(&w.q + plant.a.transpose() * &l_inv * &plant.a));

        let sigma = &forward.sigma[step];
        let sigma_factor = chol(sigma)
            .expect("forward pass checked Sigma_k")
            .factor()
            .clone();
        if !inverse_gap_positive(&pi, &sigma_factor, tau) {
            out.pi[step] = pi;
            out.l_inv[step] = l_inv;
            out.first_failure = Some(fail(Condition::PiInvMinusSigma));
            return Ok(out);
        }
        let coupling = linalg::lu_inverse(&(&eye - sigma * &pi / tau)).ok_or(
            Error::InvalidParameter("I - Sigma_k Pi_k / tau is singular".into()),
        )?;
        out.f[step] = &r_inv * plant.b.transpose() * &l_inv * &plant.a * coupling;
        out.pi[step] = pi;
        out.l_inv[step] = l_inv;
    }
    Ok(out)
}

/// Evaluates the closed-form optimal risk-sensitive value from both passes.
fn value(
    problem: &Problem,
    sigma2_lo: f64,
    tau: f64,
    fw: &ForwardPass,
    bw: &BackwardPass,
) -> core::result::Result<f64, Failure> {
    let plant = &problem.plant;
    let n_steps = plant.horizon;
    let p_dim = plant.output_dim();
    let info = plant.c.transpose() * &plant.c / sigma2_lo;
    let eye_p = Matrix::identity(p_dim, p_dim);

    let sigma0 = &fw.sigma[0];
    let gap0 = inverse_gap(&bw.pi[0], sigma0, tau).ok_or(Failure {
        step: 0,
        condition: Condition::PiInvMinusSigma,
    })?;
    let x = &plant.x_ini;
    let quadratic = (x.transpose() * gap0 * x)[(0, 0)] / (2.0 * tau);
    let init_logdet = chol(sigma0)
        .ok_or(Failure {
            step: 0,
            condition: Condition::SigmaPositive,
        })?
        .log_det();

    let mut info_sum = 0.0;
    let mut coupling_sum = 0.0;
    for k in 0..n_steps {
        let fail = |condition| Failure { step: k, condition };
        let info_k = linalg::symmetrize(&(&fw.p[k] - &info));
        let info_chol = chol(&info_k).ok_or(fail(Condition::EstimatorInformation))?;
        let sigma_next = &fw.sigma[k + 1];
        let sigma_next_logdet = chol(sigma_next)
            .ok_or(fail(Condition::SigmaPositive))?
            .log_det();
        info_sum += sigma_next_logdet + info_chol.log_det();

        let v = linalg::symmetrize(
            &(&eye_p * sigma2_lo + &plant.c * info_chol.solve(&plant.c.transpose())),
        );
        let v_factor = chol(&v).ok_or(fail(Condition::Coupling))?.factor().clone();
        let gap = inverse_gap(&bw.pi[k + 1], sigma_next, tau).ok_or(fail(Condition::Terminal))?;
        let kk = &fw.k[k];
        let inner =
            linalg::symmetrize(&(v_factor.transpose() * kk.transpose() * gap * kk * &v_factor));
        let arg = linalg::symmetrize(&(&eye_p - inner / tau));
        coupling_sum += chol(&arg).ok_or(fail(Condition::Coupling))?.log_det();
    }

    let sigma_n = &fw.sigma[n_steps];
    let terminal = chol(sigma_n)
        .map(|c| linalg::symmetrize(&(c.inverse() - &problem.weights.q_n / tau)))
        .and_then(|m| chol(&m))
        .ok_or(Failure {
            step: n_steps,
            condition: Condition::Terminal,
        })?
        .log_det();

    Ok(quadratic - 0.5 * init_logdet - 0.5 * info_sum - 0.5 * coupling_sum - 0.5 * terminal)
}

/// Runs both passes and evaluates `W_tau` when every condition holds.
pub fn solve(problem: &Problem, sigma2_lo: f64, tau: f64) -> RiccatiSolution {
    let forward = forward_riccati(problem, sigma2_lo, tau);
    if let Some(f) = forward.first_failure {
        return RiccatiSolution {
            tau,
            forward,
            backward: None,
            w_tau: None,
            first_failure: Some(f),
        };
    }
    let backward = match backward_riccati(problem, tau, &forward) {
        Ok(b) => b,
        Err(_) => {
            return RiccatiSolution {
                tau,
                forward,
                backward: None,
                w_tau: None,
                first_failure: Some(Failure {
                    step: problem.plant.horizon,
                    condition: Condition::PiInvMinusSigma,
                }),
            }
        }
    };
    if let Some(f) = backward.first_failure {
        return RiccatiSolution {
            tau,
            forward,
            backward: Some(backward),
            w_tau: None,
            first_failure: Some(f),
        };
    }
    let (w_tau, first_failure) = match value(problem, sigma2_lo, tau, &forward, &backward) {
        Ok(w) if w.is_finite() => (Some(w), None),
        Ok(_) => (
            None,
            Some(Failure {
                step: problem.plant.horizon,
                condition: Condition::Coupling,
            }),
        ),
        Err(f) => (None, Some(f)),
    };
    RiccatiSolution {
        tau,
        forward,
        backward: Some(backward),
        w_tau,
        first_failure,
    }
}

/// Optimal value of `log E[exp(J/τ)]` under the nominal noise, or `None` when `τ` is infeasible.
pub fn w_tau(problem: &Problem, sigma2_lo: f64, tau: f64) -> Option<f64> {
    if !(tau > 0.0) || !tau.is_finite() {
        return None;
    }
    solve(problem, sigma2_lo, tau).w_tau
}

/// The outer objective `τ (η + W_τ)`.
pub fn objective(eta: &KlRadius, problem: &Problem, sigma2_lo: f64, tau: f64) -> Option<f64> {
    w_tau(problem, sigma2_lo, tau).map(|w| tau * (eta.eta + w))
}
