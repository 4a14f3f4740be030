use std::path::Path;
use std::process::{Command, Output};

use drdp::format::sig6;
use drdp::pipeline::{dominance, CurvePoint, SimRow};

fn drdp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drdp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Vec<T> {
    csv::Reader::from_path(path)
        .unwrap()
        .deserialize()
        .map(Result::unwrap)
        .collect()
}

#[test]
fn calibrate_prints_six_digits() {
    let dir = tempfile::tempdir().unwrap();
    let out = drdp(&["calibrate", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "sigma2_lo 1.19196\nb_lo 0.721348\n");
    let manifest = std::fs::read_to_string(dir.path().join("manifest.toml")).unwrap();
    assert!(manifest.contains("command = \"calibrate\""));
    assert!(manifest.contains("[config.plant]"));
}

#[test]
fn eta_reports_branches() {
    let dir = tempfile::tempdir().unwrap();
    let out = drdp(&["eta", "--out", dir.path().to_str().unwrap()]);
    let text = stdout(&out);
    let eta: f64 = text
        .lines()
        .next()
        .unwrap()
        .strip_prefix("eta ")
        .unwrap()
        .parse()
        .unwrap();
    assert!((eta - 1.8170).abs() < 1e-3);
    assert!(text.contains("branch laplace"));
}

#[test]
fn missing_config_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    let out = drdp(&[
        "calibrate",
        "--config",
        missing.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.toml"));
}

#[test]
fn bad_input_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(
        drdp(&["calibrate", "--out", d, "--set", "privacy.epsilon=1.5"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        drdp(&["calibrate", "--out", d, "--set", "privacy.zeta=1"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        drdp(&[
            "calibrate",
            "--out",
            d,
            "--set",
            "plant.sigma_ini=[[0.0, 0.0], [0.0, 0.0]]"
        ])
        .status
        .code(),
        Some(1)
    );

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[plant]\nwhatever = 1\n").unwrap();
    assert_eq!(
        drdp(&["eta", "--out", d, "--config", bad.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn config_file_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    let text = drdp::config::EXAMPLE_CONFIG.replace("gamma = 0.5", "gamma = 1.0");
    std::fs::write(&path, text).unwrap();
    let out = drdp(&[
        "calibrate",
        "--config",
        path.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(stdout(&out), "sigma2_lo 4.76785\nb_lo 1.44270\n");
}

#[test]
fn no_feasible_tau_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = drdp(&[
        "synthesize",
        "--out",
        dir.path().to_str().unwrap(),
        "--set",
        "plant.a=[[10.0, 0.0], [0.0, 10.0]]",
        "--set",
        "plant.b=[[0.0], [0.0]]",
    ]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn synthesize_and_tau_curve_write_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = drdp(&["synthesize", "--out", d]);
    assert!(stdout(&out).starts_with("tau_star 28.1"));
    let file: drdp::pipeline::ControllerFile =
        serde_json::from_slice(&std::fs::read(dir.path().join("controller.json")).unwrap())
            .unwrap();
    assert_eq!(file.feedback_gains.len(), 20);
    assert_eq!(file.correction.len(), 20);

    assert!(drdp(&["tau-curve", "--out", d, "--grid", "50"])
        .status
        .success());
    let curve: Vec<CurvePoint> = read_csv(&dir.path().join("tau_curve.csv"));
    assert!(!curve.is_empty() && curve.len() < 50);
    assert!(curve
        .iter()
        .all(|p| p.tau > 20.0 && p.objective.is_finite()));
}

#[test]
fn simulate_and_sweep_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert!(
        drdp(&["simulate", "--out", d, "--trials", "20", "--grid", "3", "--seed", "5"])
            .status
            .success()
    );
    let rows: Vec<SimRow> = read_csv(&dir.path().join("simulate.csv"));
    assert_eq!(rows.len(), 12);
    assert!(rows.iter().all(|r| r.trials == 20 && r.seed == 5));

    let out = drdp(&[
        "sweep-privacy",
        "--out",
        d,
        "--trials",
        "10",
        "--set",
        "experiment.sweep_epsilons=[0.5]",
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("sweep_privacy.csv")).unwrap();
    assert!(text.starts_with("mechanism,epsilon,delta,mean_cost\n"));
    assert_eq!(text.lines().count(), 5);

    let rejected = drdp(&[
        "sweep-privacy",
        "--out",
        d,
        "--trials",
        "10",
        "--set",
        "experiment.sweep_epsilons=[1.0986]",
    ]);
    assert_eq!(rejected.status.code(), Some(1));
}

fn summary_value<'a>(summary: &'a str, key: &str) -> &'a str {
    summary
        .lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(' ')))
        .unwrap()
}

#[test]
fn reproduction_outputs_agree_with_summary() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let run = |dir: &Path, seed: &str| {
        let out = drdp(&[
            "reproduce-paper",
            "--out",
            dir.to_str().unwrap(),
            "--trials",
            "40",
            "--seed",
            seed,
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    };
    run(a.path(), "1");
    run(b.path(), "2");
    let bytes = |dir: &Path, f: &str| std::fs::read(dir.join(f)).unwrap();
    assert_eq!(bytes(a.path(), "fig1.csv"), bytes(b.path(), "fig1.csv"));
    assert_ne!(
        bytes(a.path(), "fig2_gaussian.csv"),
        bytes(b.path(), "fig2_gaussian.csv")
    );
    assert_ne!(
        bytes(a.path(), "fig2_laplace.csv"),
        bytes(b.path(), "fig2_laplace.csv")
    );

    let summary = std::fs::read_to_string(a.path().join("summary.txt")).unwrap();
    let curve: Vec<CurvePoint> = read_csv(&a.path().join("fig1.csv"));
    let best = curve
        .iter()
        .min_by(|x, y| x.objective.total_cmp(&y.objective))
        .unwrap();
    assert_eq!(summary_value(&summary, "tau_star"), sig6(best.tau));
    assert_eq!(
        summary_value(&summary, "objective_star"),
        sig6(best.objective)
    );

    let mut rows: Vec<SimRow> = read_csv(&a.path().join("fig2_gaussian.csv"));
    rows.extend(read_csv::<SimRow>(&a.path().join("fig2_laplace.csv")));
    for mech in ["gaussian", "laplace"] {
        let d = dominance(&rows, mech);
        assert_eq!(d.points, 12);
        assert_eq!(
            summary_value(&summary, &format!("{mech}_p95_dominance")),
            format!("{}/{}", d.p95, d.points)
        );
        assert_eq!(
            summary_value(&summary, &format!("{mech}_worst_dominance")),
            format!("{}/{}", d.worst, d.points)
        );
    }
}
