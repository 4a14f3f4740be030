use drdp_core::ambiguity::{radius_eta, AmbiguityBounds, KlRadius};
use drdp_core::model::{example_plant, example_weights, stage_cost, validate_model, Problem};
use drdp_core::privacy::{sample_noise, NoiseDistribution};
use drdp_core::riccati;
use drdp_core::simulate::Simulator;
use drdp_core::synthesis::{
    dr_controller_at, find_feasible_tau, lqr_gains, optimize_tau, optimize_tau_on_grid,
    synthesize_dr, synthesize_lqg, ControllerKind,
};
use drdp_core::{Matrix, Vector};

const S2: f64 = 1.1920;

fn example() -> Problem {
    validate_model(example_plant(), example_weights()).unwrap()
}

fn example_eta() -> KlRadius {
    radius_eta(&AmbiguityBounds::with_ratio(S2, 0.7213, 1.2, 21).unwrap())
}

#[test]
fn boundary_lies_below_reported_tau() {
    let tau_min = find_feasible_tau(&example(), S2).unwrap();
    assert!(tau_min < 28.1392);
    assert!(riccati::w_tau(&example(), S2, tau_min).is_some());
    assert!(riccati::w_tau(&example(), S2, tau_min * (1.0 - 2e-3)).is_none());
}

#[test]
fn tau_search_lands_near_reported_minimizer() {
    let report = optimize_tau(&example_eta(), &example(), S2, 64, 60).unwrap();
    assert!(
        (report.tau_star - 28.1392).abs() <= 0.1 * 28.1392,
        "tau* = {}",
        report.tau_star
    );
    for e in &report.evaluations {
        if let Some(v) = e.objective {
            assert!(report.objective_star <= v);
        }
    }
}

#[test]
fn larger_radius_costs_more() {
    let problem = example();
    let eta = example_eta();
    let base = optimize_tau(&eta, &problem, S2, 32, 40).unwrap();
    let doubled = optimize_tau(&eta.scaled(2.0), &problem, S2, 32, 40).unwrap();
    assert!(doubled.objective_star > base.objective_star);
}

#[test]
fn single_point_grid_returns_that_point() {
    let report = optimize_tau_on_grid(&example_eta(), &example(), S2, &[33.3], 60).unwrap();
    assert_eq!(report.tau_star, 33.3);
}

#[test]
fn synthesis_is_bit_identical() {
    let (a, ra) = synthesize_dr(&example_eta(), &example(), S2).unwrap();
    let (b, rb) = synthesize_dr(&example_eta(), &example(), S2).unwrap();
    assert_eq!(a, b);
    assert_eq!(ra, rb);
    assert_eq!(a.horizon(), 20);
    assert!(a.is_finite());
    assert_eq!(a.kind, ControllerKind::DistributionallyRobust);
}

#[test]
fn dr_gains_approach_lqg_gains() {
    let problem = example();
    let dr = dr_controller_at(&problem, S2, 1e9).unwrap();
    let lqg = synthesize_lqg(&problem, S2).unwrap();
    for k in 0..20 {
        assert!((&dr.estimator_gains[k] - &lqg.estimator_gains[k]).amax() < 1e-6);
        assert!((&dr.feedback_gains[k] - &lqg.feedback_gains[k]).amax() < 1e-6);
        assert!(dr.correction[k].amax() < 1e-6);
    }
}

#[test]
fn origin_is_an_equilibrium() {
    let mut plant = example_plant();
    plant.x_ini = Vector::zeros(2);
    let problem = validate_model(plant, example_weights()).unwrap();
    let (ctrl, _) = synthesize_dr(&example_eta(), &problem, S2).unwrap();
    let sim = Simulator::new(&problem.plant, &problem.weights);
    let traj = sim
        .rollout(
            &ctrl,
            &Vector::zeros(2),
            &vec![Vector::zeros(2); 20],
            &vec![Vector::zeros(1); 21],
        )
        .unwrap();
    assert!(traj.states.iter().all(|x| x.amax() == 0.0));
    assert!(traj.inputs.iter().all(|u| u.amax() == 0.0));
}

/// Noise-free LQG from an exactly known state has the deterministic LQR cost `x'S_0x/2`.
#[test]
fn noiseless_lqg_attains_lqr_cost() {
    let problem = example();
    let plant = &problem.plant;
    let w = &problem.weights;
    let ctrl = synthesize_lqg(&problem, S2).unwrap();
    let sim = Simulator::new(plant, w);
    let traj = sim
        .rollout(
            &ctrl,
            &plant.x_ini,
            &vec![Vector::zeros(2); 20],
            &vec![Vector::zeros(1); 21],
        )
        .unwrap();
    let mut s = w.q_n.clone();
    for f in lqr_gains(&problem).iter().rev() {
        let closed = &plant.a - &plant.b * f;
        s = &w.q + f.transpose() * &w.r * f + closed.transpose() * &s * &closed;
    }
    let expected = 0.5 * plant.x_ini.dot(&(&s * &plant.x_ini));
    let cost = stage_cost(&traj, w).unwrap();
    assert!(
        (cost - expected).abs() < 1e-9 * expected,
        "{cost} vs {expected}"
    );
}

#[test]
fn estimator_without_state_weight_has_no_correction() {
    let mut weights = example_weights();
    weights.q = Matrix::zeros(2, 2);
    let problem = validate_model(example_plant(), weights).unwrap();
    let ctrl = dr_controller_at(&problem, S2, 50.0).unwrap();
    assert!(ctrl.correction.iter().all(|c| c.amax() == 0.0));
}

#[test]
fn control_step_golden_value() {
    let (ctrl, _) = synthesize_dr(&example_eta(), &example(), S2).unwrap();
    let v = sample_noise(&NoiseDistribution::gaussian(S2, 1).unwrap(), 7);
    let y = &example_plant().c * &example_plant().x_ini + Vector::from_vec(v);
    let (u, next) = ctrl.control_step(0, &y, &ctrl.initial_state()).unwrap();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs();
    assert!(close(y[0], -0.34654140401265043));
    assert!(close(u[0], -2.481808633788532), "u = {}", u[0]);
    assert!(close(next[0], -1.566630731846472), "next = {next}");
    assert!(close(next[1], -2.360672454676222), "next = {next}");
}
