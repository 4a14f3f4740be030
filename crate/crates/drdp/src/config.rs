//! TOML run configuration. Matrices are written row-major as nested arrays.

use std::path::Path;

use drdp_core::model::{validate_model, CostWeights, PlantModel, Problem};
use drdp_core::privacy::PrivacyBudget;
use drdp_core::{Error, Matrix, Vector};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// The two-state example used throughout the documentation and by `reproduce-paper`.
pub const EXAMPLE_CONFIG: &str = include_str!("../config/example.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub plant: PlantSection,
    pub cost: CostSection,
    pub privacy: PrivacySection,
    #[serde(default)]
    pub ambiguity: AmbiguitySection,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub sigma_w: Vec<Vec<f64>>,
    pub x_ini: Vec<f64>,
    pub sigma_ini: Vec<Vec<f64>>,
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSection {
    pub q: Vec<Vec<f64>>,
    pub q_n: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivacySection {
    pub epsilon: f64,
    pub delta: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AmbiguitySection {
    /// `sigma2_hi / sigma2_lo = b_hi / b_lo`.
    pub ratio: f64,
}

impl Default for AmbiguitySection {
    fn default() -> Self {
        Self { ratio: 1.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub seed: u64,
    pub trials: usize,
    /// Points per mechanism on the true-noise grid.
    pub grid_points: usize,
    /// Log-spaced grid size of the `tau` search.
    pub tau_grid: usize,
    pub refine_iters: usize,
    pub curve_lo: f64,
    pub curve_hi: f64,
    pub curve_points: usize,
    pub sweep_epsilons: Vec<f64>,
    pub sweep_deltas: Vec<f64>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            seed: 2024,
            trials: 10_000,
            grid_points: 12,
            tau_grid: drdp_core::synthesis::DEFAULT_GRID_SIZE,
            refine_iters: drdp_core::synthesis::DEFAULT_REFINE_ITERS,
            curve_lo: 0.1,
            curve_hi: 100.0,
            curve_points: 800,
            sweep_epsilons: vec![1.5f64.ln(), 2f64.ln(), 2.5f64.ln()],
            sweep_deltas: vec![0.3, 0.5],
        }
    }
}

fn config_error(origin: &str, message: impl ToString) -> CliError {
    CliError::Config {
        origin: origin.to_string(),
        message: message.to_string(),
    }
}

fn parse_override(entry: &str) -> Result<(Vec<&str>, toml::Value)> {
    let bad = |reason: &str| CliError::Override {
        entry: entry.to_string(),
        reason: reason.to_string(),
    };
    let (key, raw) = entry
        .split_once('=')
        .ok_or_else(|| bad("expected key=value"))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(bad("empty key segment"));
    }
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    Ok((path, value))
}

fn apply_override(table: &mut toml::Table, entry: &str) -> Result<()> {
    let (path, value) = parse_override(entry)?;
    let missing = || CliError::Override {
        entry: entry.to_string(),
        reason: format!("unknown key `{}`", path.join(".")),
    };
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut current = table;
    for segment in parents {
        current = current
            .get_mut(*segment)
            .and_then(toml::Value::as_table_mut)
            .ok_or_else(missing)?;
    }
    match current.get_mut(*last) {
        Some(slot) if !slot.is_table() => {
            *slot = value;
            Ok(())
        }
        _ => Err(missing()),
    }
}

impl Config {
    pub fn example() -> Self {
        Self::parse(EXAMPLE_CONFIG, "embedded example").expect("embedded config is valid")
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| config_error(origin, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Applies `key=value` overrides; keys must already exist in the resolved config.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut table = self.to_table()?;
        for entry in overrides {
            apply_override(&mut table, entry.as_ref())?;
        }
        Config::deserialize(toml::Value::Table(table)).map_err(|e| config_error("overrides", e))
    }

    pub fn to_table(&self) -> Result<toml::Table> {
        toml::Table::try_from(self).map_err(|e| config_error("resolved config", e))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_error("resolved config", e))
    }

    pub fn problem(&self) -> Result<Problem> {
        let p = &self.plant;
        let plant = PlantModel {
            a: matrix("plant.a", &p.a)?,
            b: matrix("plant.b", &p.b)?,
            c: matrix("plant.c", &p.c)?,
            sigma_w: matrix("plant.sigma_w", &p.sigma_w)?,
            x_ini: Vector::from_vec(p.x_ini.clone()),
            sigma_ini: matrix("plant.sigma_ini", &p.sigma_ini)?,
            horizon: p.horizon,
        };
        let weights = CostWeights {
            q: matrix("cost.q", &self.cost.q)?,
            q_n: matrix("cost.q_n", &self.cost.q_n)?,
            r: matrix("cost.r", &self.cost.r)?,
        };
        Ok(validate_model(plant, weights)?)
    }

    pub fn budget(&self) -> PrivacyBudget {
        PrivacyBudget {
            epsilon: self.privacy.epsilon,
            delta: self.privacy.delta,
            gamma: self.privacy.gamma,
        }
    }

    /// Checks the experiment knobs that the core library does not see.
    pub fn validate_experiment(&self) -> Result<()> {
        let e = &self.experiment;
        let fail = |m: String| Err(CliError::Core(Error::InvalidParameter(m)));
        if e.seed > i64::MAX as u64 {
            return fail(format!("seed {} does not fit a TOML integer", e.seed));
        }
        if e.trials == 0 {
            return fail("experiment.trials must be >= 1".into());
        }
        if e.grid_points == 0 {
            return fail("experiment.grid_points must be >= 1".into());
        }
        if !(e.curve_lo > 0.0 && e.curve_hi > e.curve_lo) || e.curve_points < 2 {
            return fail("tau curve needs 0 < curve_lo < curve_hi and curve_points >= 2".into());
        }
        if self.ambiguity.ratio.is_nan() || self.ambiguity.ratio < 1.0 {
            return fail(format!(
                "ambiguity.ratio must be >= 1, got {}",
                self.ambiguity.ratio
            ));
        }
        Ok(())
    }
}

fn matrix(name: &str, rows: &[Vec<f64>]) -> Result<Matrix> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(CliError::Core(Error::DimensionMismatch(format!(
            "`{name}` has ragged rows"
        ))));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(Matrix::from_row_slice(rows.len(), cols, &flat))
}

/// Row-major nested arrays for serialization.
pub fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}
