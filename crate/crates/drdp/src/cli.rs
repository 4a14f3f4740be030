use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::Config;
use crate::error::{CliError, Result};
use crate::exec::executor;
use crate::format::{csv_bytes, sig6};
use crate::pipeline::{self, branch_label, ControllerFile};

#[derive(Debug, Parser)]
#[command(
    name = "drdp",
    version,
    about = "Distributionally robust control under differentially private outputs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML config; defaults to the embedded two-state example.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory for CSVs, controller files and the manifest.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Master seed (overrides `experiment.seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// `key=value` override of an existing config key, e.g. `experiment.trials=500`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Monte-Carlo trials per point (overrides `experiment.trials`).
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Grid size of the subcommand: curve points for `tau-curve`, search grid
    /// for `synthesize`, true-noise points per mechanism for `simulate`.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Worker threads for Monte-Carlo and curve sweeps; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Print the minimal Gaussian variance and Laplace scale.
    Calibrate,
    /// Print the KL radius and its two branches.
    Eta,
    /// Write the objective over a log-spaced `tau` grid.
    TauCurve,
    /// Search `tau` and write the robust controller.
    Synthesize,
    /// Monte-Carlo costs of the robust and LQG controllers over both noise grids.
    Simulate,
    /// Mean robust cost over the configured privacy-parameter grid.
    SweepPrivacy,
    /// Run every experiment on the embedded example.
    ReproducePaper,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Calibrate => "calibrate",
            Command::Eta => "eta",
            Command::TauCurve => "tau-curve",
            Command::Synthesize => "synthesize",
            Command::Simulate => "simulate",
            Command::SweepPrivacy => "sweep-privacy",
            Command::ReproducePaper => "reproduce-paper",
        }
    }
}

impl Cli {
    /// Config after file, `--set`, and the dedicated flags, in that order.
    pub fn resolve_config(&self) -> Result<Config> {
        let base = match (&self.config, self.command) {
            (_, Command::ReproducePaper) | (None, _) => Config::example(),
            (Some(path), _) => Config::load(path)?,
        };
        let mut cfg = base.with_overrides(&self.overrides)?;
        let e = &mut cfg.experiment;
        if let Some(seed) = self.seed {
            e.seed = seed;
        }
        if let Some(trials) = self.trials {
            e.trials = trials;
        }
        if let Some(grid) = self.grid {
            match self.command {
                Command::TauCurve => e.curve_points = grid,
                Command::Synthesize => e.tau_grid = grid,
                Command::Simulate => e.grid_points = grid,
                _ => {}
            }
        }
        cfg.validate_experiment()?;
        Ok(cfg)
    }
}

fn manifest(command: Command, cfg: &Config) -> Result<Vec<u8>> {
    let mut table = toml::Table::new();
    table.insert("command".into(), command.name().into());
    table.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    table.insert(
        "seed".into(),
        toml::Value::Integer(cfg.experiment.seed as i64),
    );
    table.insert("config".into(), toml::Value::Table(cfg.to_table()?));
    let text = toml::to_string(&table).map_err(|e| CliError::Config {
        origin: "manifest".into(),
        message: e.to_string(),
    })?;
    Ok(text.into_bytes())
}

fn write_all(dir: &Path, files: &[(&str, Vec<u8>)]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    for (name, bytes) in files {
        let path = dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::io(path, e))?;
    }
    Ok(())
}

/// Runs the command and returns what it prints on standard output.
pub fn run(cli: &Cli) -> Result<String> {
    let cfg = cli.resolve_config()?;
    let exec = executor(cli.workers);
    let mut stdout = String::new();
    let mut files: Vec<(&str, Vec<u8>)> = Vec::new();
    let mut say = |line: String| {
        stdout.push_str(&line);
        stdout.push('\n');
    };

    if cli.command == Command::ReproducePaper {
        let rep = pipeline::reproduce(&cfg, exec.as_ref())?;
        stdout.push_str(&rep.summary.render());
        files = rep.files;
    } else {
        let problem = cfg.problem()?;
        let cal = pipeline::calibrate(&cfg, &problem)?;
        match cli.command {
            Command::Calibrate => {
                say(format!("sigma2_lo {}", sig6(cal.sigma2_lo)));
                say(format!("b_lo {}", sig6(cal.b_lo)));
            }
            Command::Eta => {
                say(format!("eta {}", sig6(cal.eta.eta)));
                say(format!("eta1 {}", sig6(cal.eta.eta1)));
                say(format!("eta2 {}", sig6(cal.eta.eta2)));
                say(format!("branch {}", branch_label(cal.eta.active_branch())));
            }
            Command::TauCurve => {
                let curve = pipeline::tau_curve(&cfg, &problem, &cal, exec.as_ref());
                say(format!("feasible_points {}", curve.len()));
                if let Some(best) = curve
                    .iter()
                    .min_by(|a, b| a.objective.total_cmp(&b.objective))
                {
                    say(format!("grid_min_tau {}", sig6(best.tau)));
                    say(format!("grid_min_objective {}", sig6(best.objective)));
                }
                files.push(("tau_curve.csv", csv_bytes(&curve, &["tau", "objective"])?));
            }
            Command::Synthesize => {
                let (ctrl, report) = pipeline::synthesize(&cfg, &problem, &cal)?;
                say(format!("tau_star {}", sig6(report.tau_star)));
                say(format!("objective_star {}", sig6(report.objective_star)));
                let file = ControllerFile::new(&ctrl, Some(report.objective_star));
                let mut json = serde_json::to_vec_pretty(&file).expect("controller serializes");
                json.push(b'\n');
                files.push(("controller.json", json));
            }
            Command::Simulate => {
                let (dr, _) = pipeline::synthesize(&cfg, &problem, &cal)?;
                let rows = pipeline::simulate(&cfg, &problem, &cal, &dr, exec.as_ref())?;
                say(format!("rows {}", rows.len()));
                let header = [
                    "mechanism",
                    "param",
                    "controller",
                    "mean",
                    "p95",
                    "worst",
                    "trials",
                    "seed",
                ];
                files.push(("simulate.csv", csv_bytes(&rows, &header)?));
            }
            Command::SweepPrivacy => {
                let rows = pipeline::sweep(&cfg, &problem, exec.as_ref())?;
                say(format!("rows {}", rows.len()));
                files.push((
                    "sweep_privacy.csv",
                    csv_bytes(&rows, &["mechanism", "epsilon", "delta", "mean_cost"])?,
                ));
            }
            Command::ReproducePaper => unreachable!(),
        }
    }
    files.push(("manifest.toml", manifest(cli.command, &cfg)?));
    write_all(&cli.out, &files)?;
    Ok(stdout)
}
