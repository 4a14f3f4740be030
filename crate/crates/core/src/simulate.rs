//! Seeded Monte-Carlo evaluation of closed-loop costs.
//!
//! Every trial draws its randomness from its own generator seeded with
//! [`derive_seed`], so results do not depend on execution order. Aggregation
//! always reduces costs in trial-index order.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::ambiguity::{radius_eta, AmbiguityBounds};
use crate::model::{CostWeights, PlantModel, Problem, Trajectory};
use crate::privacy::{
    gaussian_sigma_lower, laplace_b_lower, Mechanism, NoiseDistribution, PrivacyBudget,
};
use crate::synthesis::{synthesize_dr, Controller};
use crate::{Error, Matrix, Result, Vector};

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counter-based seed for trial `trial` of (`controller`, `distribution`).
pub fn derive_seed(master: u64, controller: u64, distribution: u64, trial: u64) -> u64 {
    let mut h = mix64(master);
    for word in [controller, distribution, trial] {
        h = mix64(h ^ word);
    }
    h
}

/// Runs `trials` independent evaluations of `f(trial_index)` and returns the
/// results indexed by trial.
pub trait TrialExecutor {
    fn run(&self, trials: usize, f: &(dyn Fn(usize) -> f64 + Sync)) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl TrialExecutor for Sequential {
    fn run(&self, trials: usize, f: &(dyn Fn(usize) -> f64 + Sync)) -> Vec<f64> {
        (0..trials).map(f).collect()
    }
}

/// `G Gᵀ = M` for symmetric PSD `M`; zero matrices give a zero factor.
fn psd_factor(m: &Matrix) -> Matrix {
    let eig = SymmetricEigen::new(crate::linalg::symmetrize(m));
    let roots = eig.eigenvalues.map(|l| libm::sqrt(l.max(0.0)));
    &eig.eigenvectors * Matrix::from_diagonal(&roots)
}

/// Precomputed noise factors for repeated trials on one plant.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    plant: &'a PlantModel,
    weights: &'a CostWeights,
    init_factor: Matrix,
    process_factor: Matrix,
}

impl<'a> Simulator<'a> {
    pub fn new(plant: &'a PlantModel, weights: &'a CostWeights) -> Self {
        Self {
            plant,
            weights,
            init_factor: psd_factor(&plant.sigma_ini),
            process_factor: psd_factor(&plant.sigma_w),
        }
    }

    fn check(&self, ctrl: &Controller) -> Result<()> {
        if ctrl.horizon() != self.plant.horizon {
            return Err(Error::DimensionMismatch(format!(
                "controller horizon {} does not match plant horizon {}",
                ctrl.horizon(),
                self.plant.horizon
            )));
        }
        Ok(())
    }

    /// Closed loop for given noise realizations: `w.len() == N`, `v.len() == N + 1`.
    pub fn rollout(
        &self,
        ctrl: &Controller,
        x0: &Vector,
        w: &[Vector],
        v: &[Vector],
    ) -> Result<Trajectory> {
        self.check(ctrl)?;
        let n_steps = self.plant.horizon;
        if w.len() != n_steps || v.len() != n_steps + 1 {
            return Err(Error::DimensionMismatch(format!(
                "rollout needs {} process and {} measurement noise vectors",
                n_steps,
                n_steps + 1
            )));
        }
        let mut traj = Trajectory::default();
        let mut x = x0.clone();
        let mut xhat = ctrl.initial_state();
        for k in 0..n_steps {
            let y = &self.plant.c * &x + &v[k];
            let (u, next) = ctrl.control_step(k, &y, &xhat)?;
            let x_next = &self.plant.a * &x + &self.plant.b * &u + &w[k];
            traj.states.push(x);
            traj.inputs.push(u);
            traj.outputs.push(y);
            x = x_next;
            xhat = next;
        }
        traj.outputs.push(&self.plant.c * &x + &v[n_steps]);
        traj.states.push(x);
        Ok(traj)
    }

    /// Cost of one closed-loop realization with `x(0) ~ N(x_ini, Σ_ini)`,
    /// `w(k) ~ N(0, Σ_w)` and stacked `v ~ dist`.
    pub fn run_trial(
        &self,
        ctrl: &Controller,
        dist: &NoiseDistribution,
        trial_seed: u64,
    ) -> Result<f64> {
        self.check(ctrl)?;
        let plant = self.plant;
        let n = plant.state_dim();
        let p = plant.output_dim();
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
        let normal = |len: usize, rng: &mut ChaCha8Rng| {
            Vector::from_iterator(len, (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)))
        };
        let mut x = &plant.x_ini + &self.init_factor * normal(n, &mut rng);
        let mut xhat = ctrl.initial_state();
        let mut v = Vector::zeros(p);
        let mut running = 0.0;
        for k in 0..plant.horizon {
            dist.fill(&mut rng, v.as_mut_slice());
            let y = &plant.c * &x + &v;
            let (u, next) = ctrl.control_step(k, &y, &xhat)?;
            running += x.dot(&(&self.weights.q * &x)) + u.dot(&(&self.weights.r * &u));
            let w = &self.process_factor * normal(n, &mut rng);
            x = &plant.a * &x + &plant.b * &u + w;
            xhat = next;
        }
        // v(N) belongs to the stacked noise even though it cannot affect the cost
        dist.fill(&mut rng, v.as_mut_slice());
        let terminal = x.dot(&(&self.weights.q_n * &x));
        Ok(0.5 * terminal + 0.5 * running)
    }
}

pub fn run_trial(
    plant: &PlantModel,
    weights: &CostWeights,
    ctrl: &Controller,
    dist: &NoiseDistribution,
    trial_seed: u64,
) -> Result<f64> {
    Simulator::new(plant, weights).run_trial(ctrl, dist, trial_seed)
}

/// Mean, nearest-rank 95th percentile and maximum of a cost sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostStats {
    pub mean: f64,
    pub p95: f64,
    pub worst: f64,
    pub min: f64,
    pub trials: usize,
}

/// `ceil(q n)`-th order statistic (1-based).
pub fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let rank = (libm::ceil(q * n as f64) as usize).clamp(1, n);
    sorted[rank - 1]
}

impl CostStats {
    /// `costs` must be in trial order; the mean is summed in that order.
    pub fn from_costs(costs: &[f64]) -> Option<Self> {
        if costs.is_empty() {
            return None;
        }
        let mean = costs.iter().sum::<f64>() / costs.len() as f64;
        let mut sorted = costs.to_vec();
        sorted.sort_by(f64::total_cmp);
        Some(Self {
            mean,
            p95: nearest_rank(&sorted, 0.95),
            worst: sorted[sorted.len() - 1],
            min: sorted[0],
            trials: costs.len(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub problem: Problem,
    pub controllers: Vec<Controller>,
    pub distributions: Vec<NoiseDistribution>,
    pub trials: usize,
    pub master_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostRow {
    pub controller: usize,
    pub distribution: usize,
    pub mechanism: Mechanism,
    pub parameter: f64,
    pub stats: CostStats,
}

/// Runs every (controller, distribution) pair; rows are ordered by
/// distribution, then controller.
pub fn monte_carlo<E: TrialExecutor + ?Sized>(
    spec: &ExperimentSpec,
    exec: &E,
) -> Result<Vec<CostRow>> {
    if spec.trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    let sim = Simulator::new(&spec.problem.plant, &spec.problem.weights);
    for ctrl in &spec.controllers {
        sim.check(ctrl)?;
    }
    let mut rows = Vec::with_capacity(spec.controllers.len() * spec.distributions.len());
    for (di, dist) in spec.distributions.iter().enumerate() {
        for (ci, ctrl) in spec.controllers.iter().enumerate() {
            let trial = |t: usize| {
                let seed = derive_seed(spec.master_seed, ci as u64, di as u64, t as u64);
                sim.run_trial(ctrl, dist, seed)
                    .expect("horizon checked above")
            };
            let costs = exec.run(spec.trials, &trial);
            rows.push(CostRow {
                controller: ci,
                distribution: di,
                mechanism: dist.mechanism(),
                parameter: dist.parameter(),
                stats: CostStats::from_costs(&costs).expect("trials >= 1"),
            });
        }
    }
    Ok(rows)
}

/// `count` evenly spaced points from `lo` to `hi` inclusive.
pub fn uniform_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => alloc::vec![lo],
        _ => (0..count)
            .map(|i| {
                if i + 1 == count {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (count - 1) as f64
                }
            })
            .collect(),
    }
}

/// Noise distributions on a uniform grid over `[lo, hi]` of one mechanism.
pub fn distribution_grid(
    mechanism: Mechanism,
    lo: f64,
    hi: f64,
    count: usize,
    len: usize,
) -> Result<Vec<NoiseDistribution>> {
    uniform_grid(lo, hi, count)
        .into_iter()
        .map(|x| match mechanism {
            Mechanism::Gaussian => NoiseDistribution::gaussian(x, len),
            Mechanism::Laplace => NoiseDistribution::laplace(x, len),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub mechanism: Mechanism,
    pub epsilon: f64,
    pub delta: f64,
    pub sigma2_lo: f64,
    pub b_lo: f64,
    pub tau_star: f64,
    pub mean_cost: f64,
}

/// For each `(epsilon, delta)`: recalibrate both lower bounds, set the upper
/// bounds at `ratio` times the lower ones, recompute the radius, re-synthesize
/// the robust controller and record its mean cost with the true noise at the
/// calibrated lower bound of each mechanism.
#[allow(clippy::too_many_arguments)]
pub fn privacy_sweep<E: TrialExecutor + ?Sized>(
    problem: &Problem,
    gamma: f64,
    epsilons: &[f64],
    deltas: &[f64],
    ratio: f64,
    trials: usize,
    master_seed: u64,
    exec: &E,
) -> Result<Vec<SweepRow>> {
    let len = problem.plant.stacked_noise_len();
    let mut rows = Vec::new();
    let mut point = 0u64;
    for &epsilon in epsilons {
        for &delta in deltas {
            let budget = PrivacyBudget {
                epsilon,
                delta,
                gamma,
            };
            let sigma2_lo = gaussian_sigma_lower(&budget, &problem.plant.c)?;
            let b_lo = laplace_b_lower(&budget, &problem.plant.c)?;
            let bounds = AmbiguityBounds::with_ratio(sigma2_lo, b_lo, ratio, len)?;
            let eta = radius_eta(&bounds);
            let (ctrl, report) = synthesize_dr(&eta, problem, sigma2_lo)?;
            let spec = ExperimentSpec {
                problem: problem.clone(),
                controllers: alloc::vec![ctrl],
                distributions: alloc::vec![
                    NoiseDistribution::gaussian(sigma2_lo, len)?,
                    NoiseDistribution::laplace(b_lo, len)?,
                ],
                trials,
                master_seed: derive_seed(master_seed, u64::MAX, point, 0),
            };
            for row in monte_carlo(&spec, exec)? {
                rows.push(SweepRow {
                    mechanism: row.mechanism,
                    epsilon,
                    delta,
                    sigma2_lo,
                    b_lo,
                    tau_star: report.tau_star,
                    mean_cost: row.stats.mean,
                });
            }
            point += 1;
        }
    }
    Ok(rows)
}
