use pdm_core::io::write_events;
use pdm_core::simfleet::{
    calibrate_hazard, generate_fleet, pilot_positive_rate, EventLog, RecordKind, SimConfig,
    PRECURSOR_WINDOW_H,
};
use pdm_core::HOURS_PER_WEEK;
use proptest::prelude::*;

fn events_csv(logs: &[EventLog]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_events(&mut buf, logs).unwrap();
    buf
}

#[test]
fn same_seed_gives_identical_bytes() {
    let cfg = SimConfig {
        n_devices: 50,
        n_weeks: 8,
        seed: 9,
        ..SimConfig::default()
    };
    let (p1, l1) = generate_fleet(&cfg).unwrap();
    let (p2, l2) = generate_fleet(&cfg).unwrap();
    assert_eq!(p1, p2);
    assert_eq!(events_csv(&l1), events_csv(&l2));

    let other = SimConfig { seed: 10, ..cfg };
    let (_, l3) = generate_fleet(&other).unwrap();
    assert_ne!(events_csv(&l1), events_csv(&l3));
}

#[test]
fn failure_count_matches_binomial_moments() {
    let h = 0.33;
    let cfg = SimConfig {
        n_devices: 2000,
        n_weeks: 24,
        seed: 42,
        hazard_range: (h, h),
        precursor_strength: 0.0,
        ..SimConfig::default()
    };
    let (_, logs) = generate_fleet(&cfg).unwrap();
    let failures: usize = logs.iter().map(|l| l.failures().count()).sum();

    // one Bernoulli(h) trial per device-week
    let trials = 2000.0 * 24.0;
    let mean = trials * h;
    let sd = (trials * h * (1.0 - h)).sqrt();
    let z = (failures as f64 - mean) / sd;
    assert!(z.abs() <= 3.0, "failures {failures}, mean {mean}, sd {sd}, z {z}");
}

#[test]
fn events_rise_before_failures() {
    let cfg = SimConfig {
        n_devices: 400,
        n_weeks: 24,
        seed: 3,
        hazard_range: (0.05, 0.15),
        precursor_strength: 1.0,
        ..SimConfig::default()
    };
    let (_, logs) = generate_fleet(&cfg).unwrap();
    let horizon = cfg.n_weeks as u64 * HOURS_PER_WEEK;

    let mut before: Vec<f64> = Vec::new();
    let mut quiet: Vec<f64> = Vec::new();
    for log in &logs {
        let failures: Vec<u64> = log.failures().collect();
        let events: Vec<u64> = log
            .records
            .iter()
            .filter(|r| r.kind == RecordKind::Event)
            .map(|r| r.timestamp_h)
            .collect();
        let count = |a: u64, b: u64| events.iter().filter(|&&t| t >= a && t < b).count() as f64;
        for &f in &failures {
            if f >= PRECURSOR_WINDOW_H {
                before.push(count(f - PRECURSOR_WINDOW_H, f));
            }
        }
        // two-week blocks that no failure's precursor window touches
        let mut start = 0;
        while start + PRECURSOR_WINDOW_H <= horizon {
            let end = start + PRECURSOR_WINDOW_H;
            let touched = failures
                .iter()
                .any(|&f| f + 1 > start && f.saturating_sub(PRECURSOR_WINDOW_H) < end + 24);
            if !touched {
                quiet.push(count(start, end));
            }
            start = end;
        }
    }
    assert!(before.len() >= 500, "only {} failures", before.len());

    let stats = |v: &[f64]| {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, var / n)
    };
    let (m1, se1) = stats(&before);
    let (m0, se0) = stats(&quiet);
    let z = (m1 - m0) / (se1 + se0).sqrt();
    assert!(z > 3.0, "precursor mean {m1} vs quiet mean {m0}, z {z}");
}

#[test]
fn higher_hazard_never_lowers_failure_rate() {
    let base = SimConfig {
        n_devices: 500,
        n_weeks: 12,
        seed: 5,
        ..SimConfig::default()
    };
    let rates: Vec<f64> = [(0.05, 0.15), (0.2, 0.3), (0.4, 0.5)]
        .into_iter()
        .map(|r| {
            pilot_positive_rate(&SimConfig {
                hazard_range: r,
                ..base.clone()
            })
            .unwrap()
        })
        .collect();
    assert!(rates.windows(2).all(|w| w[0] <= w[1]), "{rates:?}");
}

#[test]
fn calibrates_to_one_third() {
    let cfg = SimConfig {
        target_positive_rate: Some(1.0 / 3.0),
        ..SimConfig::default()
    };
    let tuned = calibrate_hazard(&cfg).unwrap();
    let rate = pilot_positive_rate(&tuned).unwrap();
    assert!((0.283..=0.383).contains(&rate), "rate {rate}");
}

#[test]
fn calibration_agrees_with_a_hazard_sweep() {
    let cfg = SimConfig {
        n_devices: 600,
        n_weeks: 12,
        seed: 17,
        hazard_range: (0.1, 0.3),
        target_positive_rate: Some(0.5),
        ..SimConfig::default()
    };
    let tuned = calibrate_hazard(&cfg).unwrap();
    let rate = pilot_positive_rate(&tuned).unwrap();
    assert!((rate - 0.5).abs() <= 0.05, "rate {rate}");

    // Brute force: 20 mean hazards with the same relative spread.
    let spread = (0.3 - 0.1) / (0.3 + 0.1);
    let sweep: Vec<(f64, f64)> = (1..=20)
        .map(|i| {
            let m = 0.03 * i as f64;
            let c = SimConfig {
                hazard_range: (m * (1.0 - spread), m * (1.0 + spread)),
                ..cfg.clone()
            };
            (m, pilot_positive_rate(&c).unwrap())
        })
        .collect();
    let closest = sweep
        .iter()
        .min_by(|a, b| (a.1 - 0.5).abs().total_cmp(&(b.1 - 0.5).abs()))
        .unwrap();
    assert!((closest.1 - 0.5).abs() <= 0.05, "sweep best {closest:?}");
    let mean = tuned.hazard_mean();
    assert!(
        (mean - closest.0).abs() <= 0.03,
        "bisection mean {mean} vs sweep mean {}",
        closest.0
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn logs_are_sorted_and_within_range(
        n_devices in 0usize..20,
        n_weeks in 1u32..10,
        seed in any::<u64>(),
        lo in 0.01f64..0.5,
        width in 0.0f64..0.4,
        strength in 0.0f64..5.0,
    ) {
        let cfg = SimConfig {
            n_devices,
            n_weeks,
            seed,
            hazard_range: (lo, lo + width),
            precursor_strength: strength,
            ..SimConfig::default()
        };
        let (profiles, logs) = generate_fleet(&cfg).unwrap();
        prop_assert_eq!(profiles.len(), n_devices);
        prop_assert_eq!(logs.len(), n_devices);
        let end = n_weeks as u64 * HOURS_PER_WEEK;
        for log in &logs {
            prop_assert!(log.records.windows(2).all(|w| w[0].timestamp_h <= w[1].timestamp_h));
            prop_assert!(log.records.iter().all(|r| r.timestamp_h < end));
        }
    }
}
