//! Outer search over `tau`, the distributionally robust controller and the
//! LQG baseline.

use alloc::format;
use alloc::vec::Vec;

use crate::ambiguity::KlRadius;
use crate::linalg::{self, Cholesky, RICCATI_PIVOT_TOLERANCE};
use crate::model::{PlantModel, Problem};
use crate::riccati::{self, RiccatiSolution};
use crate::{Error, Matrix, Result, Vector};

/// Start of the upward doubling scan for a feasible `tau`.
pub const TAU_SCAN_START: f64 = 1e-3;
/// Give up when no feasible `tau` exists below this.
pub const TAU_SCAN_CAP: f64 = 1e12;
/// Relative width at which the feasibility bisection stops.
pub const TAU_BOUNDARY_PRECISION: f64 = 1e-3;
pub const DEFAULT_GRID_SIZE: usize = 64;
pub const DEFAULT_REFINE_ITERS: usize = 60;
/// The search grid spans `[tau_min, GRID_SPAN * tau_min]`.
pub const GRID_SPAN: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerKind {
    DistributionallyRobust,
    LqgBaseline,
}

impl ControllerKind {
    pub fn label(&self) -> &'static str {
        match self {
            ControllerKind::DistributionallyRobust => "proposed",
            ControllerKind::LqgBaseline => "lqg",
        }
    }
}

/// Output-feedback policy with an internal estimate `x̂`:
///
/// `u(k) = −F_k x̂(k)`,
/// `x̂(k+1) = A x̂(k) + B u(k) + K_k (ỹ(k) − C x̂(k)) + (A P_k⁻¹ Q/τ) x̂(k)`.
///
/// The baseline uses the same update with no correction term, predictor-form
/// Kalman gains and LQR gains.
#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    pub kind: ControllerKind,
    pub tau: Option<f64>,
    pub estimator_gains: Vec<Matrix>,
    pub feedback_gains: Vec<Matrix>,
    /// `A P_k⁻¹ Q / τ`; empty for the baseline.
    pub correction: Vec<Matrix>,
    pub plant: PlantModel,
    pub sigma2_nom: f64,
    pub xhat0: Vector,
}

impl Controller {
    pub fn horizon(&self) -> usize {
        self.feedback_gains.len()
    }

    pub fn initial_state(&self) -> Vector {
        self.xhat0.clone()
    }

    /// Input at step `k` and the next estimate.
    pub fn control_step(
        &self,
        k: usize,
        y_tilde: &Vector,
        state: &Vector,
    ) -> Result<(Vector, Vector)> {
        if k >= self.horizon() {
            return Err(Error::IndexOutOfRange {
                index: k,
                horizon: self.horizon(),
            });
        }
        if y_tilde.len() != self.plant.output_dim() || state.len() != self.plant.state_dim() {
            return Err(Error::DimensionMismatch(format!(
                "control_step expects y of length {} and state of length {}",
                self.plant.output_dim(),
                self.plant.state_dim()
            )));
        }
        let u = -(&self.feedback_gains[k] * state);
        let innovation = y_tilde - &self.plant.c * state;
        let mut next =
            &self.plant.a * state + &self.plant.b * &u + &self.estimator_gains[k] * innovation;
        if let Some(corr) = self.correction.get(k) {
            next += corr * state;
        }
        Ok((u, next))
    }

    pub fn is_finite(&self) -> bool {
        let all = |ms: &[Matrix]| ms.iter().all(|m| m.iter().all(|x| x.is_finite()));
        all(&self.estimator_gains) && all(&self.feedback_gains) && all(&self.correction)
    }
}

/// One evaluation of the outer objective; `None` marks an infeasible `tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauEvaluation {
    pub tau: f64,
    pub objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TauSearchReport {
    pub tau_star: f64,
    pub objective_star: f64,
    /// (smallest feasible tau found, largest tau scanned)
    pub feasible_interval: (f64, f64),
    pub evaluations: Vec<TauEvaluation>,
}

fn feasible(problem: &Problem, sigma2_lo: f64, tau: f64) -> bool {
    riccati::w_tau(problem, sigma2_lo, tau).is_some()
}

/// Smallest feasible `tau` to relative precision [`TAU_BOUNDARY_PRECISION`]:
/// doubling from [`TAU_SCAN_START`], then bisection. Returns the feasible side.
pub fn find_feasible_tau(problem: &Problem, sigma2_lo: f64) -> Result<f64> {
    let mut hi = TAU_SCAN_START;
    while !feasible(problem, sigma2_lo, hi) {
        hi *= 2.0;
        if hi > TAU_SCAN_CAP {
            return Err(Error::NoFeasibleTau { cap: TAU_SCAN_CAP });
        }
    }
    if hi == TAU_SCAN_START {
        return Ok(hi);
    }
    let mut lo = hi / 2.0;
    while (hi - lo) / hi > TAU_BOUNDARY_PRECISION {
        let mid = 0.5 * (lo + hi);
        if feasible(problem, sigma2_lo, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

pub fn log_grid(lo: f64, hi: f64, size: usize) -> Vec<f64> {
    if size <= 1 {
        return alloc::vec![lo];
    }
    let (a, b) = (libm::log(lo), libm::log(hi));
    (0..size)
        .map(|i| {
            if i + 1 == size {
                hi
            } else {
                libm::exp(a + (b - a) * i as f64 / (size - 1) as f64)
            }
        })
        .collect()
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section minimization of `f` on `[a, b]` for a fixed number of
/// iterations. Returns every evaluated point.
pub fn golden_section<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    iters: usize,
) -> Vec<(f64, f64)> {
    let mut evals = Vec::with_capacity(iters + 2);
    let (mut a, mut b) = (a.min(b), a.max(b));
    if b - a <= 0.0 {
        evals.push((a, f(a)));
        return evals;
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    evals.push((c, fc));
    evals.push((d, fd));
    for _ in 0..iters {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
            evals.push((c, fc));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
            evals.push((d, fd));
        }
    }
    evals
}

/// Grid evaluation followed by golden-section refinement of every local basin.
/// Unimodality is not assumed.
pub fn optimize_tau_on_grid(
    eta: &KlRadius,
    problem: &Problem,
    sigma2_lo: f64,
    grid: &[f64],
    refine_iters: usize,
) -> Result<TauSearchReport> {
    let eval = |tau: f64| riccati::objective(eta, problem, sigma2_lo, tau);
    let mut evaluations: Vec<TauEvaluation> = grid
        .iter()
        .map(|&tau| TauEvaluation {
            tau,
            objective: eval(tau),
        })
        .collect();
    let values: Vec<f64> = evaluations
        .iter()
        .map(|e| e.objective.unwrap_or(f64::INFINITY))
        .collect();
    if values.iter().all(|v| !v.is_finite()) {
        return Err(Error::NoFeasibleTau {
            cap: grid.last().copied().unwrap_or(0.0),
        });
    }

    let n = grid.len();
    for i in 0..n {
        let left = if i > 0 { values[i - 1] } else { f64::INFINITY };
        let right = if i + 1 < n {
            values[i + 1]
        } else {
            f64::INFINITY
        };
        let is_basin = values[i].is_finite() && values[i] <= left && values[i] < right;
        if !is_basin || n == 1 {
            continue;
        }
        let a = grid[i.saturating_sub(1)];
        let b = grid[(i + 1).min(n - 1)];
        let refined = golden_section(|t| eval(t).unwrap_or(f64::INFINITY), a, b, refine_iters);
        evaluations.extend(refined.into_iter().map(|(tau, v)| TauEvaluation {
            tau,
            objective: v.is_finite().then_some(v),
        }));
    }

    let best = evaluations
        .iter()
        .filter_map(|e| e.objective.map(|v| (e.tau, v)))
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .expect("at least one feasible grid point");
    let tau_min = evaluations
        .iter()
        .filter(|e| e.objective.is_some())
        .map(|e| e.tau)
        .fold(f64::INFINITY, f64::min);
    let tau_max = evaluations.iter().map(|e| e.tau).fold(0.0, f64::max);
    Ok(TauSearchReport {
        tau_star: best.0,
        objective_star: best.1,
        feasible_interval: (tau_min, tau_max),
        evaluations,
    })
}

/// Minimizes `τ (η + W_τ)` over feasible `τ`.
pub fn optimize_tau(
    eta: &KlRadius,
    problem: &Problem,
    sigma2_lo: f64,
    grid_size: usize,
    refine_iters: usize,
) -> Result<TauSearchReport> {
    if grid_size < 16 {
        return Err(Error::InvalidParameter(format!(
            "grid_size must be >= 16, got {grid_size}"
        )));
    }
    let tau_min = find_feasible_tau(problem, sigma2_lo)?;
    let mut hi = GRID_SPAN * tau_min;
    let mut report = optimize_tau_on_grid(
        eta,
        problem,
        sigma2_lo,
        &log_grid(tau_min, hi, grid_size),
        refine_iters,
    )?;
    // keep widening while the best point sits on the right edge of the grid
    while report.tau_star >= hi * (1.0 - 1e-12) && hi < TAU_SCAN_CAP {
        let lo = hi;
        hi *= GRID_SPAN;
        let more = optimize_tau_on_grid(
            eta,
            problem,
            sigma2_lo,
            &log_grid(lo, hi, grid_size),
            refine_iters,
        )?;
        let mut evaluations = report.evaluations;
        evaluations.extend(more.evaluations);
        report = TauSearchReport {
            tau_star: if more.objective_star < report.objective_star {
                more.tau_star
            } else {
                report.tau_star
            },
            objective_star: more.objective_star.min(report.objective_star),
            feasible_interval: (report.feasible_interval.0, more.feasible_interval.1),
            evaluations,
        };
    }
    Ok(report)
}

/// Robust controller at a fixed `tau`.
pub fn dr_controller_at(problem: &Problem, sigma2_lo: f64, tau: f64) -> Result<Controller> {
    let sol = riccati::solve(problem, sigma2_lo, tau);
    controller_from_solution(problem, sigma2_lo, &sol)
}

pub fn controller_from_solution(
    problem: &Problem,
    sigma2_lo: f64,
    sol: &RiccatiSolution,
) -> Result<Controller> {
    let (Some(_), Some(bw)) = (sol.w_tau, sol.backward.as_ref()) else {
        return Err(Error::NoFeasibleTau { cap: sol.tau });
    };
    let plant = &problem.plant;
    let correction = sol
        .forward
        .p_inv
        .iter()
        .map(|p_inv| &plant.a * p_inv * &problem.weights.q / sol.tau)
        .collect();
    Ok(Controller {
        kind: ControllerKind::DistributionallyRobust,
        tau: Some(sol.tau),
        estimator_gains: sol.forward.k.clone(),
        feedback_gains: bw.f.clone(),
        correction,
        plant: plant.clone(),
        sigma2_nom: sigma2_lo,
        xhat0: plant.x_ini.clone(),
    })
}

/// Runs the `tau` search with default settings and builds the robust controller at `tau*`.
pub fn synthesize_dr(
    eta: &KlRadius,
    problem: &Problem,
    sigma2_lo: f64,
) -> Result<(Controller, TauSearchReport)> {
    let report = optimize_tau(
        eta,
        problem,
        sigma2_lo,
        DEFAULT_GRID_SIZE,
        DEFAULT_REFINE_ITERS,
    )?;
    let ctrl = dr_controller_at(problem, sigma2_lo, report.tau_star)?;
    Ok((ctrl, report))
}

/// Finite-horizon LQR gains `F_k = (R + Bᵀ S_{k+1} B)⁻¹ Bᵀ S_{k+1} A`, `S_N = Q_N`.
pub fn lqr_gains(problem: &Problem) -> Vec<Matrix> {
    let plant = &problem.plant;
    let w = &problem.weights;
    let n_steps = plant.horizon;
    let mut s = linalg::symmetrize(&w.q_n);
    let mut gains = alloc::vec![Matrix::zeros(plant.input_dim(), plant.state_dim()); n_steps];
    for k in (0..n_steps).rev() {
        let bt_s = plant.b.transpose() * &s;
        let gram = linalg::symmetrize(&(&w.r + &bt_s * &plant.b));
        let f = Cholesky::with_trace_tolerance(&gram, RICCATI_PIVOT_TOLERANCE)
            .expect("R + B'SB is positive definite for R > 0")
            .solve(&(&bt_s * &plant.a));
        s = linalg::symmetrize(&(&w.q + plant.a.transpose() * &s * (&plant.a - &plant.b * &f)));
        gains[k] = f;
    }
    gains
}

/// Predictor-form Kalman gains `A Σ⁻_k Cᵀ (C Σ⁻_k Cᵀ + σ² I)⁻¹` for measurement variance `sigma2`.
pub fn kalman_predictor_gains(plant: &PlantModel, sigma2: f64) -> Vec<Matrix> {
    let n = plant.state_dim();
    let p = plant.output_dim();
    let mut prior = linalg::symmetrize(&plant.sigma_ini);
    let mut gains = Vec::with_capacity(plant.horizon);
    for _ in 0..plant.horizon {
        let s = linalg::symmetrize(
            &(&plant.c * &prior * plant.c.transpose() + Matrix::identity(p, p) * sigma2),
        );
        let pct = &prior * plant.c.transpose();
        let kf = Cholesky::with_trace_tolerance(&s, RICCATI_PIVOT_TOLERANCE)
            .expect("innovation covariance is positive definite for sigma2 > 0")
            .solve(&pct.transpose())
            .transpose();
        let post = linalg::symmetrize(&((Matrix::identity(n, n) - &kf * &plant.c) * &prior));
        gains.push(&plant.a * kf);
        prior = linalg::symmetrize(&(&plant.a * post * plant.a.transpose() + &plant.sigma_w));
    }
    gains
}

/// Certainty-equivalent LQG designed for measurement noise `N(0, sigma2_nom I)`.
pub fn synthesize_lqg(problem: &Problem, sigma2_nom: f64) -> Result<Controller> {
    if !(sigma2_nom > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "measurement variance must be positive, got {sigma2_nom}"
        )));
    }
    Ok(Controller {
        kind: ControllerKind::LqgBaseline,
        tau: None,
        estimator_gains: kalman_predictor_gains(&problem.plant, sigma2_nom),
        feedback_gains: lqr_gains(problem),
        correction: Vec::new(),
        plant: problem.plant.clone(),
        sigma2_nom,
        xhat0: problem.plant.x_ini.clone(),
    })
}
