//! Grid search over forest hyperparameters and the classification cutoff.
//!
//! One forest is trained per `(ntree, mtry, samp)` cell; its scores on the
//! training rows are cached and every cutoff is evaluated on them. By default
//! a row is scored out of bag, only by trees that did not see it, since fully
//! grown trees reproduce their own training labels almost perfectly. The
//! objective is either the F1-score or the savings of an [`AffineCost`].

use std::cmp::Ordering;
use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::econ::{savings, AffineCost};
use crate::forest::{self, ForestModel, ForestParams};
use crate::metrics::{confusion_at, f1, ConfusionCounts};
use crate::windowing::WindowedDataset;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    F1,
    Savings,
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Objective::F1 => "f1",
            Objective::Savings => "savings",
        })
    }
}

fn default_ntree() -> Vec<usize> {
    vec![200, 400, 600, 800]
}
fn default_exponents() -> Vec<f64> {
    vec![0.3, 0.4, 0.5, 0.6, 0.7, 0.8]
}
fn default_mult_start() -> f64 {
    1.0
}
fn default_mult_step() -> f64 {
    0.5
}
fn default_cutoff_start() -> f64 {
    0.05
}
fn default_cutoff_end() -> f64 {
    0.95
}
fn default_cutoff_step() -> f64 {
    0.01
}
fn default_min_leaf() -> usize {
    5
}

/// How the training rows are scored when the objective is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingScores {
    /// Each row is scored only by trees whose bootstrap left it out.
    #[default]
    OutOfBag,
    /// Each row is scored by the whole forest, including trees fitted on it.
    InSample,
}

/// Grid definition before it is resolved against a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_ntree")]
    pub ntree: Vec<usize>,
    /// `mtry = floor(n_features ^ e)` for each exponent.
    #[serde(default = "default_exponents")]
    pub mtry_exponents: Vec<f64>,
    /// `samp = floor(p * k)` for `k = start, start + step, ...` while `<= n`,
    /// plus `n` itself.
    #[serde(default = "default_mult_start")]
    pub samp_multiplier_start: f64,
    #[serde(default = "default_mult_step")]
    pub samp_multiplier_step: f64,
    #[serde(default = "default_cutoff_start")]
    pub cutoff_start: f64,
    #[serde(default = "default_cutoff_end")]
    pub cutoff_end: f64,
    #[serde(default = "default_cutoff_step")]
    pub cutoff_step: f64,
    #[serde(default)]
    pub max_depth: Option<usize>,
    #[serde(default = "default_min_leaf")]
    pub min_leaf: usize,
    /// When set, this fraction of training rows is held out and the
    /// objective is measured on it instead of on the fitted rows.
    #[serde(default)]
    pub holdout_fraction: Option<f64>,
    #[serde(default)]
    pub training_scores: TrainingScores,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            ntree: default_ntree(),
            mtry_exponents: default_exponents(),
            samp_multiplier_start: default_mult_start(),
            samp_multiplier_step: default_mult_step(),
            cutoff_start: default_cutoff_start(),
            cutoff_end: default_cutoff_end(),
            cutoff_step: default_cutoff_step(),
            max_depth: None,
            min_leaf: default_min_leaf(),
            holdout_fraction: None,
            training_scores: TrainingScores::OutOfBag,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunerGrid {
    pub ntree_values: Vec<usize>,
    pub mtry_values: Vec<usize>,
    pub samp_values: Vec<usize>,
    pub cutoff_values: Vec<f64>,
    pub objective: Objective,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub holdout_fraction: Option<f64>,
    pub training_scores: TrainingScores,
}

impl TunerGrid {
    pub fn cells(&self) -> usize {
        self.ntree_values.len() * self.mtry_values.len() * self.samp_values.len()
    }
}

/// Evenly spaced cutoffs from `start` to `end` inclusive, rounded to 1e-9.
pub fn cutoff_range(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(end >= start) {
        return Err(Error::EmptyGrid(format!(
            "cutoff range {start}..={end} step {step}"
        )));
    }
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    let values: Vec<f64> = (0..count)
        .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
        .collect();
    if values.iter().any(|&c| !(c > 0.0 && c < 1.0)) {
        return Err(Error::Config(format!(
            "cutoffs must lie in (0, 1), got range {start}..={end}"
        )));
    }
    Ok(values)
}

/// Resolves `config` for a dataset with `n_features` features, `p`
/// positives and `n` negatives.
pub fn expand_grid(
    n_features: usize,
    p: usize,
    n: usize,
    config: &GridConfig,
    objective: Objective,
) -> Result<TunerGrid> {
    if n_features == 0 || p == 0 || n == 0 {
        return Err(Error::EmptyGrid(format!(
            "need n_features, p, n >= 1 (got {n_features}, {p}, {n})"
        )));
    }
    if config.ntree.is_empty() || config.ntree.contains(&0) {
        return Err(Error::EmptyGrid("ntree values must be non-empty and >= 1".into()));
    }
    let mut ntree_values = config.ntree.clone();
    ntree_values.sort_unstable();
    ntree_values.dedup();

    let mut mtry_values: Vec<usize> = config
        .mtry_exponents
        .iter()
        .map(|&e| ((n_features as f64).powf(e).floor() as usize).clamp(1, n_features))
        .collect();
    mtry_values.sort_unstable();
    mtry_values.dedup();
    if mtry_values.is_empty() {
        return Err(Error::EmptyGrid("no mtry exponents".into()));
    }

    if !(config.samp_multiplier_start > 0.0) || !(config.samp_multiplier_step > 0.0) {
        return Err(Error::EmptyGrid("samp multipliers must be positive".into()));
    }
    let mut samp_values = Vec::new();
    let mut k = config.samp_multiplier_start;
    loop {
        let s = (p as f64 * k).floor() as usize;
        if s > n {
            break;
        }
        if s >= 1 {
            samp_values.push(s);
        }
        k += config.samp_multiplier_step;
    }
    samp_values.push(n);
    samp_values.sort_unstable();
    samp_values.dedup();

    let cutoff_values = cutoff_range(config.cutoff_start, config.cutoff_end, config.cutoff_step)?;
    if let Some(h) = config.holdout_fraction {
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::Config(format!("holdout_fraction must lie in (0, 1), got {h}")));
        }
    }

    Ok(TunerGrid {
        ntree_values,
        mtry_values,
        samp_values,
        cutoff_values,
        objective,
        max_depth: config.max_depth,
        min_leaf: config.min_leaf,
        holdout_fraction: config.holdout_fraction,
        training_scores: config.training_scores,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub ntree: usize,
    pub mtry: usize,
    pub samp: usize,
    pub cutoff: f64,
    pub counts: ConfusionCounts,
    pub f1: f64,
    pub savings: f64,
}

impl TraceEntry {
    pub fn objective(&self, objective: Objective) -> f64 {
        match objective {
            Objective::F1 => self.f1,
            Objective::Savings => self.savings,
        }
    }
}

/// Total order used to pick the best cell: higher objective, then higher
/// cutoff, then smaller ntree, mtry and samp. `Greater` means `a` wins.
pub fn compare_entries(a: &TraceEntry, b: &TraceEntry, objective: Objective) -> Ordering {
    a.objective(objective)
        .total_cmp(&b.objective(objective))
        .then(a.cutoff.total_cmp(&b.cutoff))
        .then(b.ntree.cmp(&a.ntree))
        .then(b.mtry.cmp(&a.mtry))
        .then(b.samp.cmp(&a.samp))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best_params: ForestParams,
    pub best_cutoff: f64,
    pub objective: Objective,
    pub objective_value: f64,
    pub best_index: usize,
    #[serde(default)]
    pub holdout_fraction: Option<f64>,
    /// Every evaluated cell in grid order: ntree, mtry, samp, then cutoff.
    pub trace: Vec<TraceEntry>,
}

impl TuneResult {
    pub fn best(&self) -> &TraceEntry {
        &self.trace[self.best_index]
    }

    /// Retrains the selected forest on `train`; identical to the forest that
    /// was evaluated during the search.
    pub fn fit_best(&self, train: &WindowedDataset) -> Result<ForestModel> {
        forest::train(&self.fit_rows(train), &self.best_params)
    }

    fn fit_rows(&self, train: &WindowedDataset) -> WindowedDataset {
        match self.holdout_fraction {
            Some(fraction) => {
                let (fit, _) = holdout_split(train, fraction, self.best_params.seed);
                subset(train, &fit)
            }
            None => train.clone(),
        }
    }
}

/// Deterministic split of row indices into (fit, holdout). Whole devices
/// are held out, since windows of one device share most of their features.
fn holdout_split(ds: &WindowedDataset, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut devices: Vec<u32> = ds.rows.iter().map(|r| r.device_id).collect();
    devices.sort_unstable();
    devices.dedup();
    devices.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x0068_6f6c_646f_7574));
    let cut = ((devices.len() as f64) * fraction).round() as usize;
    let held: HashSet<u32> = devices[..cut].iter().copied().collect();
    (0..ds.len()).partition(|&i| !held.contains(&ds.rows[i].device_id))
}

fn subset(ds: &WindowedDataset, idx: &[usize]) -> WindowedDataset {
    WindowedDataset {
        schema: ds.schema.clone(),
        rows: idx.iter().map(|&i| ds.rows[i].clone()).collect(),
    }
}

/// Evaluates the whole grid on `train` and returns the best cell under
/// `grid.objective`.
pub fn tune(train: &WindowedDataset, grid: &TunerGrid, cost: &AffineCost, seed: u64) -> Result<TuneResult> {
    let (fit, eval) = match grid.holdout_fraction {
        Some(fraction) => {
            let (f, h) = holdout_split(train, fraction, seed);
            (subset(train, &f), subset(train, &h))
        }
        None => (train.clone(), train.clone()),
    };
    if fit.positives() == 0 || fit.negatives() == 0 {
        return Err(Error::SingleClass {
            positives: fit.positives(),
            negatives: fit.negatives(),
        });
    }
    let eval_labels = eval.labels();
    let eval_rows = eval.feature_rows();

    let mut cells = Vec::with_capacity(grid.cells());
    for &ntree in &grid.ntree_values {
        for &mtry in &grid.mtry_values {
            for &samp in &grid.samp_values {
                cells.push((ntree, mtry, samp));
            }
        }
    }

    let per_cell: Vec<Vec<TraceEntry>> = cells
        .par_iter()
        .map(|&(ntree, mtry, samp)| -> Result<Vec<TraceEntry>> {
            let params = cell_params(grid, ntree, mtry, samp, seed);
            let wrap = |e: Error| Error::Cell {
                ntree,
                mtry,
                samp,
                source: Box::new(e),
            };
            let scores = if grid.holdout_fraction.is_none() && grid.training_scores == TrainingScores::OutOfBag {
                forest::train_with_oob(&fit, &params).map_err(wrap)?.1
            } else {
                let model = forest::train(&fit, &params).map_err(wrap)?;
                model.vote_scores(&eval_rows).map_err(wrap)?
            };
            grid.cutoff_values
                .iter()
                .map(|&cutoff| {
                    let counts = confusion_at(&scores, &eval_labels, cutoff).map_err(wrap)?;
                    Ok(TraceEntry {
                        ntree,
                        mtry,
                        samp,
                        cutoff,
                        counts,
                        f1: f1(&counts).value,
                        savings: savings(&counts, cost),
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let trace: Vec<TraceEntry> = per_cell.into_iter().flatten().collect();

    let best_index = (0..trace.len())
        .max_by(|&a, &b| compare_entries(&trace[a], &trace[b], grid.objective))
        .ok_or_else(|| Error::EmptyGrid("grid has no cells".into()))?;
    let best = &trace[best_index];
    Ok(TuneResult {
        best_params: cell_params(grid, best.ntree, best.mtry, best.samp, seed),
        best_cutoff: best.cutoff,
        objective: grid.objective,
        objective_value: best.objective(grid.objective),
        best_index,
        holdout_fraction: grid.holdout_fraction,
        trace,
    })
}

fn cell_params(grid: &TunerGrid, ntree: usize, mtry: usize, samp: usize, seed: u64) -> ForestParams {
    let mut params = ForestParams::new(ntree, mtry, samp, seed);
    params.max_depth = grid.max_depth;
    params.min_leaf = grid.min_leaf;
    params
}

/// Line of constant savings in ROC space: `tpr = slope * fpr + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsoLine {
    pub savings: f64,
    pub slope: f64,
    pub intercept: f64,
}

impl IsoLine {
    pub fn tpr_at(&self, fpr: f64) -> f64 {
        self.slope * fpr + self.intercept
    }

    /// `samples` evenly spaced points of the line inside the unit square.
    pub fn points(&self, samples: usize) -> Vec<(f64, f64)> {
        // fpr range where 0 <= tpr <= 1
        let mut lo: f64 = 0.0;
        let mut hi: f64 = 1.0;
        if self.slope > 0.0 {
            lo = lo.max(-self.intercept / self.slope);
            hi = hi.min((1.0 - self.intercept) / self.slope);
        } else if !(0.0..=1.0).contains(&self.intercept) {
            return Vec::new();
        }
        if hi < lo || samples == 0 {
            return Vec::new();
        }
        if samples == 1 {
            return vec![(lo, self.tpr_at(lo))];
        }
        (0..samples)
            .map(|i| {
                let fpr = if i == samples - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (samples - 1) as f64
                };
                (fpr, self.tpr_at(fpr))
            })
            .collect()
    }
}

/// From `S0 = a * TPR * P - b * FPR * N`:
/// `TPR = (b N / (a P)) FPR + (S0 - c) / (a P)`.
pub fn iso_savings_line(s0: f64, ac: &AffineCost, p: u64, n: u64) -> Result<IsoLine> {
    if !(ac.a > 0.0) {
        return Err(Error::Invalid(format!("iso-savings line needs a > 0, got {}", ac.a)));
    }
    if p == 0 {
        return Err(Error::Invalid("iso-savings line needs P > 0".into()));
    }
    let ap = ac.a * p as f64;
    Ok(IsoLine {
        savings: s0,
        slope: ac.b * n as f64 / ap,
        intercept: (s0 - ac.c) / ap,
    })
}
