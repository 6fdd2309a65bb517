//! Cost surfaces over the (TP, FP) lattice, gap/prediction-interval sweeps
//! and savings projections.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::econ::{affine_coefficients, cost_pct, pdm_cost, reactive_cost, savings, AffineCost, CostModel};
use crate::metrics::{confusion_at, f1, ConfusionCounts};
use crate::simfleet::{DeviceProfile, EventLog};
use crate::tuner::{expand_grid, tune, GridConfig, Objective};
use crate::windowing::{test_dataset, training_dataset, WindowSpec};
use crate::{Error, Result, HOURS_PER_DAY};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceCell {
    pub tp: u64,
    pub fp: u64,
    pub f1: f64,
    pub s: f64,
    /// `s` mapped linearly from `[min, max]` over the grid onto `[0, 1]`.
    pub s_normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceGrid {
    pub p: u64,
    pub n: u64,
    pub cost: AffineCost,
    pub tp_levels: Vec<u64>,
    pub fp_levels: Vec<u64>,
    /// Row-major: `cells[i * fp_levels.len() + j]` is `(tp_levels[i], fp_levels[j])`.
    pub cells: Vec<SurfaceCell>,
}

impl SurfaceGrid {
    pub fn cell(&self, tp_index: usize, fp_index: usize) -> &SurfaceCell {
        &self.cells[tp_index * self.fp_levels.len() + fp_index]
    }

    pub fn max_savings(&self) -> &SurfaceCell {
        self.cells
            .iter()
            .max_by(|a, b| a.s.total_cmp(&b.s))
            .expect("surface always has corner cells")
    }
}

/// `{0, stride, 2 stride, ...}` up to `limit`, always ending at `limit`.
pub fn lattice(limit: u64, stride: u64) -> Vec<u64> {
    let mut levels: Vec<u64> = (0..=limit).step_by(stride.max(1) as usize).collect();
    if levels.last() != Some(&limit) {
        levels.push(limit);
    }
    levels
}

pub fn surface(p: u64, n: u64, strides: (u64, u64), ac: &AffineCost) -> Result<SurfaceGrid> {
    if strides.0 == 0 || strides.1 == 0 {
        return Err(Error::Invalid("surface strides must be >= 1".into()));
    }
    let tp_levels = lattice(p, strides.0);
    let fp_levels = lattice(n, strides.1);
    let mut cells: Vec<SurfaceCell> = tp_levels
        .par_iter()
        .flat_map_iter(|&tp| {
            fp_levels.iter().map(move |&fp| {
                let counts = ConfusionCounts::from_tp_fp(tp, fp, p, n);
                SurfaceCell {
                    tp,
                    fp,
                    f1: f1(&counts).value,
                    s: savings(&counts, ac),
                    s_normalized: 0.0,
                }
            })
        })
        .collect();
    let min = cells.iter().map(|c| c.s).fold(f64::INFINITY, f64::min);
    let max = cells.iter().map(|c| c.s).fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    for c in &mut cells {
        c.s_normalized = if span > 0.0 { (c.s - min) / span } else { 0.0 };
    }
    Ok(SurfaceGrid {
        p,
        n,
        cost: *ac,
        tp_levels,
        fp_levels,
        cells,
    })
}

/// One `(gap, pred)` row of a sweep; intervals in days, money in $.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gap_days: u64,
    pub pred_days: u64,
    pub reactive: f64,
    pub pdm_f1: f64,
    pub pdm_s: f64,
    pub f1_pct: f64,
    pub s_pct: f64,
    pub delta_pct: f64,
}

impl SweepRow {
    pub fn from_costs(gap_days: u64, pred_days: u64, reactive: f64, pdm_f1: f64, pdm_s: f64) -> Self {
        let f1_pct = cost_pct(pdm_f1, reactive);
        let s_pct = cost_pct(pdm_s, reactive);
        SweepRow {
            gap_days,
            pred_days,
            reactive,
            pdm_f1,
            pdm_s,
            f1_pct,
            s_pct,
            delta_pct: f1_pct - s_pct,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub gap_days: u64,
    pub pred_days: u64,
    pub row: std::result::Result<SweepRow, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSetup<'a> {
    pub logs: &'a [EventLog],
    pub profiles: &'a [DeviceProfile],
    pub observation_days: u64,
    pub step_days: u64,
    pub k_periods: u64,
    pub horizon: u64,
    pub grid: &'a GridConfig,
    pub cost: &'a CostModel,
    pub seed: u64,
}

/// Tunes by F1 and by savings for one geometry and evaluates both on the
/// test window.
pub fn sweep_row(setup: &SweepSetup<'_>, gap_days: u64, pred_days: u64) -> Result<SweepRow> {
    let spec = WindowSpec::from_days(
        setup.observation_days,
        gap_days,
        pred_days,
        setup.step_days,
        setup.k_periods,
    )?;
    let train = training_dataset(setup.logs, setup.profiles, &spec, setup.horizon)?;
    let test = test_dataset(setup.logs, setup.profiles, &spec, setup.horizon)?;
    let gap = (gap_days * HOURS_PER_DAY) as f64;
    let pred = (pred_days * HOURS_PER_DAY) as f64;
    let ac = affine_coefficients(setup.cost, gap, pred);
    let test_labels = test.labels();
    let reactive = reactive_cost(test.positives() as u64, setup.cost);

    let mut pdm = [0.0; 2];
    for (slot, objective) in [Objective::F1, Objective::Savings].into_iter().enumerate() {
        let grid = expand_grid(
            train.schema.len(),
            train.positives(),
            train.negatives(),
            setup.grid,
            objective,
        )?;
        let result = tune(&train, &grid, &ac, setup.seed)?;
        let model = result.fit_best(&train)?;
        let scores = model.score_dataset(&test)?;
        let counts = confusion_at(&scores, &test_labels, result.best_cutoff)?;
        pdm[slot] = pdm_cost(&counts, setup.cost, gap, pred);
    }
    Ok(SweepRow::from_costs(gap_days, pred_days, reactive, pdm[0], pdm[1]))
}

/// Runs [`sweep_row`] for every `(gap, pred)` pair. A failing row is
/// reported in its outcome and does not stop the others.
pub fn sweep(setup: &SweepSetup<'_>, geometries: &[(u64, u64)]) -> Vec<SweepOutcome> {
    geometries
        .iter()
        .map(|&(gap_days, pred_days)| SweepOutcome {
            gap_days,
            pred_days,
            row: sweep_row(setup, gap_days, pred_days).map_err(|e| e.to_string()),
        })
        .collect()
}

/// Savings scale linearly with the number of weeks and of devices.
pub fn project_savings(weekly_savings: f64, n_weeks: f64, device_scale: f64) -> Result<f64> {
    if !(n_weeks >= 0.0) || !(device_scale >= 0.0) {
        return Err(Error::Invalid(
            "weeks and device scale must be non-negative".into(),
        ));
    }
    Ok(weekly_savings * n_weeks * device_scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_includes_corners() {
        assert_eq!(lattice(250, 100), vec![0, 100, 200, 250]);
        assert_eq!(lattice(200, 100), vec![0, 100, 200]);
        assert_eq!(lattice(0, 7), vec![0]);
    }

    #[test]
    fn surface_shape_and_extrema() {
        let ac = AffineCost::new(44.0, 55.0, 0.0);
        let g = surface(5445, 10479, (100, 100), &ac).unwrap();
        assert_eq!(g.tp_levels.len(), 56);
        assert_eq!(g.fp_levels.len(), 106);
        let best = g.max_savings();
        assert_eq!((best.tp, best.fp), (5445, 0));
        assert_eq!(best.s_normalized, 1.0);
        let worst = g.cell(0, g.fp_levels.len() - 1);
        assert_eq!((worst.tp, worst.fp, worst.s_normalized), (0, 10479, 0.0));
        assert!(surface(10, 10, (0, 1), &ac).is_err());
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_savings(21_483.0, 53.0, 1.0).unwrap(), 1_138_599.0);
        assert_eq!(project_savings(21_483.0, 1.0, 2.0).unwrap(), 42_966.0);
        assert_eq!(project_savings(0.0, 53.0, 7.0).unwrap(), 0.0);
        assert!(project_savings(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn sweep_row_identity() {
        let row = SweepRow::from_costs(7, 7, 539_055.0, 648_749.0, 517_985.0);
        assert_eq!(row.delta_pct, row.f1_pct - row.s_pct);
        assert!((row.f1_pct - 120.35).abs() < 0.005);
    }
}
