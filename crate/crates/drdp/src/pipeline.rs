//! End-to-end computations behind each subcommand. Nothing here touches the
//! file system.

use drdp_core::ambiguity::{radius_eta, AmbiguityBounds, Branch, KlRadius};
use drdp_core::model::Problem;
use drdp_core::privacy::{gaussian_sigma_lower, laplace_b_lower, Mechanism};
use drdp_core::riccati;
use drdp_core::simulate::{
    distribution_grid, monte_carlo, privacy_sweep, ExperimentSpec, TrialExecutor,
};
use drdp_core::synthesis::log_grid;
use drdp_core::synthesis::{
    dr_controller_at, optimize_tau, synthesize_lqg, Controller, TauSearchReport,
};
use serde::{Deserialize, Serialize};

use crate::config::{rows, Config};
use crate::error::Result;
use crate::format::sig6;

pub fn mechanism_label(m: Mechanism) -> &'static str {
    match m {
        Mechanism::Gaussian => "gaussian",
        Mechanism::Laplace => "laplace",
    }
}

pub fn branch_label(b: Branch) -> &'static str {
    match b {
        Branch::Gaussian => "gaussian",
        Branch::Laplace => "laplace",
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Calibration {
    pub sigma2_lo: f64,
    pub b_lo: f64,
    pub bounds: AmbiguityBounds,
    pub eta: KlRadius,
}

pub fn calibrate(cfg: &Config, problem: &Problem) -> Result<Calibration> {
    let budget = cfg.budget();
    let sigma2_lo = gaussian_sigma_lower(&budget, &problem.plant.c)?;
    let b_lo = laplace_b_lower(&budget, &problem.plant.c)?;
    let bounds = AmbiguityBounds::with_ratio(
        sigma2_lo,
        b_lo,
        cfg.ambiguity.ratio,
        problem.plant.stacked_noise_len(),
    )?;
    Ok(Calibration {
        sigma2_lo,
        b_lo,
        bounds,
        eta: radius_eta(&bounds),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub tau: f64,
    pub objective: f64,
}

/// Objective on the configured log grid; infeasible points are dropped.
pub fn tau_curve<E: TrialExecutor + ?Sized>(
    cfg: &Config,
    problem: &Problem,
    cal: &Calibration,
    exec: &E,
) -> Vec<CurvePoint> {
    let e = &cfg.experiment;
    let grid = log_grid(e.curve_lo, e.curve_hi, e.curve_points);
    let eval = |i: usize| {
        riccati::objective(&cal.eta, problem, cal.sigma2_lo, grid[i]).unwrap_or(f64::NAN)
    };
    let values = exec.run(grid.len(), &eval);
    grid.iter()
        .zip(values)
        .filter(|(_, v)| v.is_finite())
        .map(|(&tau, objective)| CurvePoint { tau, objective })
        .collect()
}

pub fn synthesize(
    cfg: &Config,
    problem: &Problem,
    cal: &Calibration,
) -> Result<(Controller, TauSearchReport)> {
    let e = &cfg.experiment;
    let report = optimize_tau(&cal.eta, problem, cal.sigma2_lo, e.tau_grid, e.refine_iters)?;
    let ctrl = dr_controller_at(problem, cal.sigma2_lo, report.tau_star)?;
    Ok((ctrl, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRow {
    pub mechanism: String,
    pub param: f64,
    pub controller: String,
    pub mean: f64,
    pub p95: f64,
    pub worst: f64,
    pub trials: usize,
    pub seed: u64,
}

/// Both controllers on the Gaussian grid `[σ̲², ratio σ̲²]` followed by the
/// Laplace grid `[b̲, ratio b̲]`.
pub fn simulate<E: TrialExecutor + ?Sized>(
    cfg: &Config,
    problem: &Problem,
    cal: &Calibration,
    dr: &Controller,
    exec: &E,
) -> Result<Vec<SimRow>> {
    let e = &cfg.experiment;
    let len = problem.plant.stacked_noise_len();
    let b = &cal.bounds;
    let mut distributions = distribution_grid(
        Mechanism::Gaussian,
        b.sigma2_lo,
        b.sigma2_hi,
        e.grid_points,
        len,
    )?;
    distributions.extend(distribution_grid(
        Mechanism::Laplace,
        b.b_lo,
        b.b_hi,
        e.grid_points,
        len,
    )?);
    let lqg = synthesize_lqg(problem, cal.sigma2_lo)?;
    let spec = ExperimentSpec {
        problem: problem.clone(),
        controllers: vec![dr.clone(), lqg],
        distributions,
        trials: e.trials,
        master_seed: e.seed,
    };
    Ok(monte_carlo(&spec, exec)?
        .into_iter()
        .map(|r| SimRow {
            mechanism: mechanism_label(r.mechanism).into(),
            param: r.parameter,
            controller: spec.controllers[r.controller].kind.label().into(),
            mean: r.stats.mean,
            p95: r.stats.p95,
            worst: r.stats.worst,
            trials: r.stats.trials,
            seed: e.seed,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCsvRow {
    pub mechanism: String,
    pub epsilon: f64,
    pub delta: f64,
    pub mean_cost: f64,
}

pub fn sweep<E: TrialExecutor + ?Sized>(
    cfg: &Config,
    problem: &Problem,
    exec: &E,
) -> Result<Vec<SweepCsvRow>> {
    let e = &cfg.experiment;
    let rows = privacy_sweep(
        problem,
        cfg.privacy.gamma,
        &e.sweep_epsilons,
        &e.sweep_deltas,
        cfg.ambiguity.ratio,
        e.trials,
        e.seed,
        exec,
    )?;
    Ok(rows
        .into_iter()
        .map(|r| SweepCsvRow {
            mechanism: mechanism_label(r.mechanism).into(),
            epsilon: r.epsilon,
            delta: r.delta,
            mean_cost: r.mean_cost,
        })
        .collect())
}

/// Serialized form of a synthesized controller; matrices are row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerFile {
    pub kind: String,
    pub tau: Option<f64>,
    pub objective: Option<f64>,
    pub sigma2_nom: f64,
    pub xhat0: Vec<f64>,
    pub estimator_gains: Vec<Vec<Vec<f64>>>,
    pub feedback_gains: Vec<Vec<Vec<f64>>>,
    pub correction: Vec<Vec<Vec<f64>>>,
}

impl ControllerFile {
    pub fn new(ctrl: &Controller, objective: Option<f64>) -> Self {
        Self {
            kind: ctrl.kind.label().into(),
            tau: ctrl.tau,
            objective,
            sigma2_nom: ctrl.sigma2_nom,
            xhat0: ctrl.xhat0.iter().copied().collect(),
            estimator_gains: ctrl.estimator_gains.iter().map(rows).collect(),
            feedback_gains: ctrl.feedback_gains.iter().map(rows).collect(),
            correction: ctrl.correction.iter().map(rows).collect(),
        }
    }
}

/// Count of grid points where the robust controller's p95 and worst cost are
/// strictly below the baseline's, out of the number of points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dominance {
    pub p95: usize,
    pub worst: usize,
    pub points: usize,
}

pub fn dominance(rows: &[SimRow], mechanism: &str) -> Dominance {
    let pick = |label: &str| -> Vec<&SimRow> {
        rows.iter()
            .filter(|r| r.mechanism == mechanism && r.controller == label)
            .collect()
    };
    let (dr, lqg) = (pick("proposed"), pick("lqg"));
    let pairs = || dr.iter().zip(&lqg).filter(|(a, b)| a.param == b.param);
    Dominance {
        p95: pairs().filter(|(a, b)| a.p95 < b.p95).count(),
        worst: pairs().filter(|(a, b)| a.worst < b.worst).count(),
        points: pairs().count(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub sigma2_lo: f64,
    pub b_lo: f64,
    pub eta: f64,
    pub tau_star: f64,
    pub objective_star: f64,
    pub gaussian: Dominance,
    pub laplace: Dominance,
}

impl Summary {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            out.push_str(k);
            out.push(' ');
            out.push_str(&v);
            out.push('\n');
        };
        line("sigma2_lo", sig6(self.sigma2_lo));
        line("b_lo", sig6(self.b_lo));
        line("eta", sig6(self.eta));
        line("tau_star", sig6(self.tau_star));
        line("objective_star", sig6(self.objective_star));
        for (name, d) in [("gaussian", self.gaussian), ("laplace", self.laplace)] {
            line(
                &format!("{name}_p95_dominance"),
                format!("{}/{}", d.p95, d.points),
            );
            line(
                &format!("{name}_worst_dominance"),
                format!("{}/{}", d.worst, d.points),
            );
        }
        out
    }
}

/// Everything `reproduce-paper` writes, as `(file name, contents)`.
pub struct Reproduction {
    pub files: Vec<(&'static str, Vec<u8>)>,
    pub summary: Summary,
}

pub fn reproduce<E: TrialExecutor + ?Sized>(cfg: &Config, exec: &E) -> Result<Reproduction> {
    use crate::format::csv_bytes;
    cfg.validate_experiment()?;
    let problem = cfg.problem()?;
    let cal = calibrate(cfg, &problem)?;
    let (dr, report) = synthesize(cfg, &problem, &cal)?;
    let mut curve = tau_curve(cfg, &problem, &cal, exec);
    curve.push(CurvePoint {
        tau: report.tau_star,
        objective: report.objective_star,
    });
    curve.sort_by(|a, b| a.tau.total_cmp(&b.tau));
    curve.dedup_by(|a, b| a.tau == b.tau);

    let sim = simulate(cfg, &problem, &cal, &dr, exec)?;
    let (gauss, lap): (Vec<SimRow>, Vec<SimRow>) =
        sim.iter().cloned().partition(|r| r.mechanism == "gaussian");
    let fig3 = sweep(cfg, &problem, exec)?;
    let summary = Summary {
        sigma2_lo: cal.sigma2_lo,
        b_lo: cal.b_lo,
        eta: cal.eta.eta,
        tau_star: report.tau_star,
        objective_star: report.objective_star,
        gaussian: dominance(&sim, "gaussian"),
        laplace: dominance(&sim, "laplace"),
    };
    let sim_header = [
        "mechanism",
        "param",
        "controller",
        "mean",
        "p95",
        "worst",
        "trials",
        "seed",
    ];
    let files = vec![
        ("fig1.csv", csv_bytes(&curve, &["tau", "objective"])?),
        ("fig2_gaussian.csv", csv_bytes(&gauss, &sim_header)?),
        ("fig2_laplace.csv", csv_bytes(&lap, &sim_header)?),
        (
            "fig3.csv",
            csv_bytes(&fig3, &["mechanism", "epsilon", "delta", "mean_cost"])?,
        ),
        ("summary.txt", summary.render().into_bytes()),
    ];
    Ok(Reproduction { files, summary })
}
