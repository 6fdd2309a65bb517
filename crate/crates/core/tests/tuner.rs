use std::cmp::Ordering;

use pdm_core::econ::AffineCost;
use pdm_core::forest::{self, ForestParams};
use pdm_core::metrics::{roc, ConfusionCounts};
use pdm_core::tuner::{
    compare_entries, expand_grid, iso_savings_line, tune, GridConfig, Objective, TrainingScores, TunerGrid,
};
use pdm_core::windowing::{DatasetRow, FeatureSchema, WindowedDataset};
use pdm_core::Error;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const AC: AffineCost = AffineCost {
    a: 44.0,
    b: 55.0,
    c: 0.0,
    gap: 168.0,
    pred: 168.0,
};

fn dataset(rows: usize, seed: u64) -> WindowedDataset {
    let schema = FeatureSchema::from_names(&["attr_a", "x1", "x2", "x3", "x4"]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..rows)
        .map(|i| {
            let label = (rng.random::<f64>() < 0.35) as u8;
            let x1 = rng.random::<f64>() + 0.8 * label as f64;
            DatasetRow {
                device_id: i as u32,
                window_start: 0,
                features: vec![
                    rng.random_range(0..4) as f64,
                    x1,
                    rng.random::<f64>(),
                    rng.random_range(0..10) as f64,
                    rng.random::<f64>() * 3.0,
                ],
                label,
            }
        })
        .collect();
    WindowedDataset { schema, rows }
}

fn small_grid(ds: &WindowedDataset, objective: Objective, scores: TrainingScores) -> TunerGrid {
    let config = GridConfig {
        ntree: vec![4, 9],
        mtry_exponents: vec![0.2, 0.9],
        samp_multiplier_start: 50.0,
        cutoff_start: 0.35,
        cutoff_end: 0.65,
        cutoff_step: 0.15,
        training_scores: scores,
        ..GridConfig::default()
    };
    expand_grid(ds.schema.len(), ds.positives(), ds.negatives(), &config, objective).unwrap()
}

/// Trains each cell again from scratch and scans every cutoff.
fn brute_force(ds: &WindowedDataset, grid: &TunerGrid, seed: u64) -> (usize, usize, usize, f64, f64) {
    let labels = ds.labels();
    let rows = ds.feature_rows();
    let p = ds.positives() as f64;
    let mut best: Option<(usize, usize, usize, f64, f64)> = None;
    for &ntree in &grid.ntree_values {
        for &mtry in &grid.mtry_values {
            for &samp in &grid.samp_values {
                let params = ForestParams::new(ntree, mtry, samp, seed);
                let scores = match grid.training_scores {
                    TrainingScores::OutOfBag => forest::train_with_oob(ds, &params).unwrap().1,
                    TrainingScores::InSample => forest::train(ds, &params).unwrap().vote_scores(&rows).unwrap(),
                };
                for &cutoff in &grid.cutoff_values {
                    let mut tp = 0.0;
                    let mut fp = 0.0;
                    for (s, y) in scores.iter().zip(&labels) {
                        if *s >= cutoff {
                            if *y == 1 {
                                tp += 1.0
                            } else {
                                fp += 1.0
                            }
                        }
                    }
                    let value = match grid.objective {
                        Objective::F1 => 2.0 * tp / (tp + fp + p),
                        Objective::Savings => 44.0 * tp - 55.0 * fp,
                    };
                    let wins = match best {
                        None => true,
                        Some((_, _, _, c, v)) => value > v || (value == v && cutoff > c),
                    };
                    if wins {
                        best = Some((ntree, mtry, samp, cutoff, value));
                    }
                }
            }
        }
    }
    best.unwrap()
}

#[test]
fn best_cell_matches_an_exhaustive_rerun() {
    let ds = dataset(300, 1);
    for scores in [TrainingScores::OutOfBag, TrainingScores::InSample] {
        for objective in [Objective::F1, Objective::Savings] {
            let grid = small_grid(&ds, objective, scores);
            assert_eq!(
                (grid.ntree_values.len(), grid.mtry_values.len(), grid.samp_values.len(), grid.cutoff_values.len()),
                (2, 2, 1, 3)
            );
            let result = tune(&ds, &grid, &AC, 21).unwrap();
            let best = result.best();
            let oracle = brute_force(&ds, &grid, 21);
            assert_eq!((best.ntree, best.mtry, best.samp, best.cutoff), (oracle.0, oracle.1, oracle.2, oracle.3));
            assert!((best.objective(objective) - oracle.4).abs() < 1e-12);
        }
    }
}

#[test]
fn trace_is_exhaustive_and_best_dominates() {
    let ds = dataset(200, 2);
    let grid = small_grid(&ds, Objective::Savings, TrainingScores::OutOfBag);
    let result = tune(&ds, &grid, &AC, 3).unwrap();
    assert_eq!(result.trace.len(), grid.cells() * grid.cutoff_values.len());
    let best = result.best();
    for e in &result.trace {
        assert!(best.savings >= e.savings);
        assert_ne!(compare_entries(e, best, Objective::Savings), Ordering::Greater);
    }
    assert_eq!(result.objective_value, best.savings);
    assert_eq!(result, tune(&ds, &grid, &AC, 3).unwrap());
}

#[test]
fn single_cell_single_cutoff() {
    let ds = dataset(80, 3);
    let config = GridConfig {
        ntree: vec![5],
        mtry_exponents: vec![0.5],
        samp_multiplier_start: 50.0,
        cutoff_start: 0.5,
        cutoff_end: 0.5,
        ..GridConfig::default()
    };
    let grid = expand_grid(ds.schema.len(), ds.positives(), ds.negatives(), &config, Objective::F1).unwrap();
    let result = tune(&ds, &grid, &AC, 1).unwrap();
    assert_eq!(result.trace.len(), 1);
    assert_eq!(result.best_index, 0);
    assert_eq!((result.best_params.ntree, result.best_cutoff), (5, 0.5));
}

#[test]
fn refit_reproduces_the_tuned_forest() {
    let ds = dataset(150, 4);
    let grid = small_grid(&ds, Objective::F1, TrainingScores::InSample);
    let result = tune(&ds, &grid, &AC, 8).unwrap();
    let model = result.fit_best(&ds).unwrap();
    let scores = model.score_dataset(&ds).unwrap();
    let tp = scores
        .iter()
        .zip(ds.labels())
        .filter(|(s, y)| **s >= result.best_cutoff && *y == 1)
        .count() as u64;
    assert_eq!(tp, result.best().counts.tp);
}

#[test]
fn holdout_scores_only_the_held_out_rows() {
    let ds = dataset(200, 5);
    let config = GridConfig {
        ntree: vec![5],
        mtry_exponents: vec![0.5],
        holdout_fraction: Some(0.25),
        ..GridConfig::default()
    };
    let grid = expand_grid(ds.schema.len(), ds.positives(), ds.negatives(), &config, Objective::F1).unwrap();
    let result = tune(&ds, &grid, &AC, 2).unwrap();
    assert!(result.trace.iter().all(|e| e.counts.total() == 50));
    assert!(result.fit_best(&ds).is_ok());
}

#[test]
fn cell_errors_name_the_cell() {
    let mut ds = dataset(60, 6);
    ds.rows[7].features.pop();
    let grid = small_grid(&dataset(60, 6), Objective::F1, TrainingScores::OutOfBag);
    match tune(&ds, &grid, &AC, 1) {
        Err(Error::Cell { ntree, mtry, .. }) => {
            assert!(grid.ntree_values.contains(&ntree));
            assert!(grid.mtry_values.contains(&mtry));
        }
        other => panic!("expected a cell error, got {other:?}"),
    }
}

#[test]
fn out_of_bag_scores_do_not_flatter_noise() {
    let mut ds = dataset(400, 7);
    let mut labels = ds.labels();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
    ds = ds.with_labels(&labels).unwrap();
    let params = ForestParams::new(40, 2, ds.positives(), 3);
    let (model, oob) = forest::train_with_oob(&ds, &params).unwrap();
    let in_sample = model.score_dataset(&ds).unwrap();
    let auc_in = roc(&in_sample, &labels).unwrap().auc;
    let auc_oob = roc(&oob, &labels).unwrap().auc;
    assert!(auc_in > 0.9, "in-sample auc {auc_in}");
    assert!((auc_oob - 0.5).abs() < 0.1, "out-of-bag auc {auc_oob}");
}

#[test]
fn savings_tuning_stays_passive_on_noise() {
    let mut ds = dataset(300, 8);
    let mut labels = ds.labels();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(2));
    ds = ds.with_labels(&labels).unwrap();
    let config = GridConfig {
        ntree: vec![20],
        ..GridConfig::default()
    };
    let grid = expand_grid(ds.schema.len(), ds.positives(), ds.negatives(), &config, Objective::Savings).unwrap();
    let result = tune(&ds, &grid, &AC, 4).unwrap();
    if result.trace.iter().any(|e| e.counts.predicted_positive() == 0) {
        assert!(result.best().savings >= 0.0);
    }
}

proptest! {
    #[test]
    fn iso_line_points_have_the_requested_savings(
        s0 in -100_000.0f64..100_000.0,
        a in 1.0f64..100.0,
        b in 1.0f64..100.0,
        p in 1u64..20_000,
        n in 1u64..20_000,
    ) {
        let ac = AffineCost::new(a, b, 0.0);
        let line = iso_savings_line(s0, &ac, p, n).unwrap();
        prop_assert!((line.slope - b * n as f64 / (a * p as f64)).abs() <= 1e-9 * line.slope);
        for (fpr, tpr) in line.points(25) {
            prop_assert!((0.0..=1.0).contains(&fpr));
            let s = ac.evaluate(tpr * p as f64, fpr * n as f64);
            prop_assert!((s - s0).abs() <= 1e-6 * s0.abs().max(1.0));
        }
    }

    #[test]
    fn rounded_counts_stay_within_one_step(fpr in 0.0f64..=1.0, p in 1u64..5000, n in 1u64..5000) {
        let ac = AffineCost::new(44.0, 55.0, 0.0);
        let line = iso_savings_line(0.0, &ac, p, n).unwrap();
        let tpr = line.tpr_at(fpr);
        prop_assume!((0.0..=1.0).contains(&tpr));
        let c = ConfusionCounts::from_tp_fp((tpr * p as f64).round() as u64, (fpr * n as f64).round() as u64, p, n);
        let s = pdm_core::econ::savings(&c, &ac);
        prop_assert!(s.abs() <= 0.5 * (44.0 + 55.0));
    }
}
