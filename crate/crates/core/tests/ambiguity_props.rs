use drdp_core::ambiguity::{
    finite, kl_gaussian_gaussian, kl_laplace_gaussian, kl_quadrature_oracle, radius_eta,
    AmbiguityBounds,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn example_bounds() -> AmbiguityBounds {
    AmbiguityBounds::with_ratio(1.1920, 0.7213, 1.2, 21).unwrap()
}

#[test]
fn example_radius() {
    let r = radius_eta(&example_bounds());
    assert!((r.eta - 1.8170).abs() < 1e-3, "eta = {}", r.eta);
}

#[test]
fn kl_ball_contains_the_family() {
    let bounds = example_bounds();
    let eta = radius_eta(&bounds).eta;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let s2 = rng.random_range(bounds.sigma2_lo..=bounds.sigma2_hi);
        let b = rng.random_range(bounds.b_lo..=bounds.b_hi);
        assert!(kl_gaussian_gaussian(s2, bounds.sigma2_lo, bounds.len).unwrap() <= eta + 1e-12);
        assert!(kl_laplace_gaussian(b, bounds.sigma2_lo, bounds.len).unwrap() <= eta + 1e-12);
    }
}

#[test]
fn quadrature_matches_closed_form_on_grid() {
    let pts: Vec<f64> = (0..10).map(|i| 0.25 * 16f64.powf(i as f64 / 9.0)).collect();
    let mut worst = 0.0f64;
    for &b in &pts {
        for &s2 in &pts {
            let q = kl_quadrature_oracle(b, s2).unwrap();
            let c = kl_laplace_gaussian(b, s2, 1).unwrap();
            worst = worst.max((q - c).abs());
        }
    }
    assert!(worst < 1e-6, "max deviation {worst:e}");
}

#[test]
fn quadrature_examples() {
    assert!((kl_quadrature_oracle(1.0, 1.0).unwrap() - 0.225791).abs() < 1e-6);
    assert!((kl_quadrature_oracle(0.5f64.sqrt(), 1.0).unwrap() - 0.072365).abs() < 1e-6);
    let closed = 0.5 * ((1.0f64 / 8.0).ln() + 8.0 - 2.0 + PI.ln());
    assert!((kl_quadrature_oracle(2.0, 1.0).unwrap() - closed).abs() < 1e-6);
}

proptest! {
    #[test]
    fn laplace_kl_floor(b in 0.01..10.0f64, s2 in 0.01..10.0f64) {
        let floor = 0.5 * (PI.ln() - 1.0);
        let kl = kl_laplace_gaussian(b, s2, 1).unwrap();
        prop_assert!(kl >= floor - 1e-15);
        let at_min = kl_laplace_gaussian((s2 / 2.0).sqrt(), s2, 1).unwrap();
        prop_assert!((at_min - floor).abs() < 1e-14);
        if (2.0 * b * b - s2).abs() > 1e-3 * s2 {
            prop_assert!(kl > floor);
        }
    }

    #[test]
    fn radius_is_positive(s2 in 0.01..10.0f64, b in 0.01..10.0f64, ratio in 1.0..3.0f64, len in 1usize..100) {
        let r = radius_eta(&AmbiguityBounds::with_ratio(s2, b, ratio, len).unwrap());
        prop_assert!(r.eta > 0.0);
        prop_assert!(r.eta2 >= PI.ln() - 1.0 - 1e-15);
    }
}

fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cumulative += ui;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Projected gradient ascent on `E_p[f] − KL(p ‖ q)` with backtracking steps.
fn ascend(q: &[f64], f: &[f64]) -> f64 {
    let objective = |p: &[f64]| finite::variational_objective(p, q, f);
    let mut p = q.to_vec();
    let mut value = objective(&p);
    let mut step = 1.0;
    for _ in 0..5000 {
        let grad: Vec<f64> = p
            .iter()
            .zip(q)
            .zip(f)
            .map(|((pi, qi), fi)| fi - (pi.max(1e-300) / qi).ln() - 1.0)
            .collect();
        loop {
            let moved: Vec<f64> = p.iter().zip(&grad).map(|(pi, g)| pi + step * g).collect();
            let candidate = project_simplex(&moved);
            let v = objective(&candidate);
            let on_simplex = (candidate.iter().sum::<f64>() - 1.0).abs() < 1e-12;
            if on_simplex && v >= value {
                p = candidate;
                value = v;
                step = (step * 1.5).min(1e3);
                break;
            }
            step *= 0.5;
            if step < 1e-18 {
                return value;
            }
        }
    }
    value
}

#[test]
fn donsker_varadhan_on_random_supports() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let atoms = rng.random_range(1..=8);
        let raw: Vec<f64> = (0..atoms).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let q: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let f: Vec<f64> = (0..atoms).map(|_| rng.random_range(-3.0..3.0)).collect();
        let target = finite::log_mgf(&q, &f);
        let p_star = finite::tilted(&q, &f);
        let closed = finite::variational_objective(&p_star, &q, &f);
        assert!((closed - target).abs() < 1e-6, "{closed} vs {target}");
        let climbed = ascend(&q, &f);
        assert!(climbed <= target + 1e-9, "{climbed} > {target}");
        assert!(
            target - climbed < 1e-6,
            "ascent reached {climbed}, supremum {target}"
        );
    }
}
