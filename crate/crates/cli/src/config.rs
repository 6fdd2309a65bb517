//! Experiment configuration. Intervals are whole days here and hours inside
//! the library.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Result;
use serde::{Deserialize, Serialize};

use pdm_core::econ::CostModel;
use pdm_core::simfleet::SimConfig;
use pdm_core::tuner::{cutoff_range, GridConfig, Objective};
use pdm_core::windowing::WindowSpec;
use pdm_core::HOURS_PER_DAY;

/// Bad configuration or command-line input; maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowDays {
    pub observation_days: u64,
    pub gap_days: u64,
    pub prediction_days: u64,
    pub step_days: u64,
    pub k_periods: u64,
    /// End of the training period; the test window predicts right after it.
    pub horizon_days: u64,
}

impl WindowDays {
    pub fn spec(&self) -> pdm_core::Result<WindowSpec> {
        WindowSpec::from_days(
            self.observation_days,
            self.gap_days,
            self.prediction_days,
            self.step_days,
            self.k_periods,
        )
    }

    pub fn horizon_hours(&self) -> u64 {
        self.horizon_days * HOURS_PER_DAY
    }

    pub fn gap_hours(&self) -> f64 {
        (self.gap_days * HOURS_PER_DAY) as f64
    }

    pub fn prediction_hours(&self) -> f64 {
        (self.prediction_days * HOURS_PER_DAY) as f64
    }
}

fn default_sweep_values() -> Vec<u64> {
    vec![4, 7, 10]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepDays {
    #[serde(default = "default_sweep_values")]
    pub gap_days: Vec<u64>,
    #[serde(default = "default_sweep_values")]
    pub prediction_days: Vec<u64>,
    /// Defaults to `window.horizon_days`.
    #[serde(default)]
    pub horizon_days: Option<u64>,
}

impl Default for SweepDays {
    fn default() -> Self {
        SweepDays {
            gap_days: default_sweep_values(),
            prediction_days: default_sweep_values(),
            horizon_days: None,
        }
    }
}

fn default_stride() -> u64 {
    100
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceStrides {
    #[serde(default = "default_stride")]
    pub tp_stride: u64,
    #[serde(default = "default_stride")]
    pub fp_stride: u64,
}

impl Default for SurfaceStrides {
    fn default() -> Self {
        SurfaceStrides {
            tp_stride: default_stride(),
            fp_stride: default_stride(),
        }
    }
}

fn default_objective() -> Objective {
    Objective::Savings
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for forest training; the fleet has its own `sim.seed`.
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default = "default_objective")]
    pub objective: Objective,
    pub sim: SimConfig,
    pub window: WindowDays,
    #[serde(default)]
    pub cost: CostModel,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub sweep: SweepDays,
    #[serde(default)]
    pub surface: SurfaceStrides,
}

impl RunConfig {
    pub fn validate(&self) -> pdm_core::Result<()> {
        use pdm_core::Error::Config;
        self.sim.validate()?;
        self.cost.validate()?;
        self.window.spec()?;
        if self.window.horizon_days == 0 {
            return Err(Config("window.horizon_days must be >= 1".into()));
        }
        cutoff_range(self.grid.cutoff_start, self.grid.cutoff_end, self.grid.cutoff_step)?;
        if self.grid.ntree.is_empty() || self.grid.mtry_exponents.is_empty() {
            return Err(Config("grid needs at least one ntree and one mtry exponent".into()));
        }
        if let Some(h) = self.grid.holdout_fraction {
            if !(h > 0.0 && h < 1.0) {
                return Err(Config(format!("grid.holdout_fraction must lie in (0, 1), got {h}")));
            }
        }
        if self.sweep.gap_days.is_empty() || self.sweep.prediction_days.is_empty() {
            return Err(Config("sweep needs at least one gap and one prediction interval".into()));
        }
        if self.surface.tp_stride == 0 || self.surface.fp_stride == 0 {
            return Err(Config("surface strides must be >= 1".into()));
        }
        Ok(())
    }
}

/// Reads and validates a config. Returns the parsed config and the raw
/// bytes, which the manifest hashes.
pub fn load(path: &Path) -> Result<(RunConfig, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    let config: RunConfig = serde_json::from_slice(&bytes).map_err(|e| {
        usage(format!(
            "invalid config {}:{}:{}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })?;
    config
        .validate()
        .map_err(|e| usage(format!("invalid config {}: {e}", path.display())))?;
    Ok((config, bytes))
}

/// `--output-dir` wins over the config.
pub fn output_dir(config: &RunConfig, flag: Option<&PathBuf>) -> PathBuf {
    flag.cloned().unwrap_or_else(|| config.output_dir.clone())
}
