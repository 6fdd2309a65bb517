use pdm_core::econ::{
    affine_coefficients, expected_downtime, itemize, pdm_cost, reactive_cost, savings, AffineCost, CostModel,
};
use pdm_core::metrics::ConfusionCounts;
use proptest::prelude::*;

/// Per-incident accounting: what each reactive incident would have cost,
/// minus what the predictive outcome costs, row by row.
fn ledger(c: &ConfusionCounts, cm: &CostModel, gap: f64, pred: f64) -> f64 {
    let full = cm.travel_time + cm.repair_time;
    let planned = (cm.travel_time - gap - pred / 2.0).max(0.0) + cm.repair_time;
    let per_reactive = cm.ticket_cost + cm.service_cost + cm.downtime_rate * full;
    let per_planned = cm.service_cost + cm.downtime_rate * planned;
    let lost_value = cm.component_cost / cm.expected_life * pred / 2.0;
    let mut saved = 0.0;
    for _ in 0..c.tp {
        saved += per_reactive - per_planned;
    }
    for _ in 0..c.fp {
        saved -= per_planned + lost_value;
    }
    saved
}

#[test]
fn savings_agree_with_the_ledger_on_a_grid() {
    let cm = CostModel::default();
    for (gap, pred) in [(168.0, 168.0), (96.0, 96.0), (0.0, 0.0), (240.0, 96.0), (1.0, 3.0)] {
        let ac = affine_coefficients(&cm, gap, pred);
        for tp in 0..10u64 {
            for fp in 0..10u64 {
                let c = ConfusionCounts::from_tp_fp(tp * 7, fp * 11, 70, 110);
                let want = ledger(&c, &cm, gap, pred);
                assert!((savings(&c, &ac) - want).abs() < 1e-9);
                assert!((reactive_cost(70, &cm) - pdm_cost(&c, &cm, gap, pred) - want).abs() < 1e-9);
                let total = itemize(&c, &cm, gap, pred).pop().unwrap();
                assert!((total.delta - want).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn component_value_loss_applies_to_false_positives_only() {
    let cm = CostModel::default();
    let c = ConfusionCounts::from_tp_fp(5, 3, 10, 10);
    let lines = itemize(&c, &cm, 168.0, 168.0);
    let loss = lines.iter().find(|l| l.component == "component_value_loss").unwrap();
    assert!((loss.future - 3.0 * 0.12 * 84.0).abs() < 1e-9);
    assert_eq!(loss.current, 0.0);
}

fn arb_cost() -> impl Strategy<Value = CostModel> {
    (0.0f64..100.0, 0.0f64..100.0, 0.0f64..10.0, 0.0f64..48.0, 0.0f64..24.0, 0.0f64..5000.0, 1.0f64..50_000.0)
        .prop_map(|(t, s, r, tt, tr, c, l)| CostModel {
            ticket_cost: t,
            service_cost: s,
            downtime_rate: r,
            travel_time: tt,
            repair_time: tr,
            component_cost: c,
            expected_life: l,
        })
}

proptest! {
    #[test]
    fn downtime_falls_with_longer_intervals(cm in arb_cost(), g in 0.0f64..300.0, p in 0.0f64..300.0, dg in 0.0f64..50.0, dp in 0.0f64..50.0) {
        let base = expected_downtime(g, p, &cm);
        prop_assert!(expected_downtime(g + dg, p, &cm) <= base);
        prop_assert!(expected_downtime(g, p + dp, &cm) <= base);
        prop_assert!(base >= cm.repair_time);
    }

    #[test]
    fn coefficient_components_move_as_expected(cm in arb_cost(), g in 0.0f64..300.0, p in 0.0f64..300.0, dg in 0.0f64..50.0, dp in 0.0f64..50.0) {
        let ac = affine_coefficients(&cm, g, p);
        let eps = 1e-9;
        prop_assert!(ac.a >= cm.ticket_cost - eps);
        prop_assert!(ac.a <= cm.ticket_cost + cm.downtime_rate * cm.travel_time + eps);
        prop_assert!(affine_coefficients(&cm, g + dg, p).a >= ac.a - eps);
        prop_assert!(affine_coefficients(&cm, g, p + dp).a >= ac.a - eps);

        let downtime_term = |g: f64, p: f64| cm.downtime_rate * expected_downtime(g, p, &cm);
        let value_term = |p: f64| cm.value_rate() * p / 2.0;
        prop_assert!(downtime_term(g, p + dp) <= downtime_term(g, p) + eps);
        prop_assert!(value_term(p + dp) >= value_term(p));
        prop_assert!((ac.b - cm.service_cost - downtime_term(g, p) - value_term(p)).abs() <= eps);
    }

    #[test]
    fn savings_peak_at_all_positives_and_no_false_alarms(a in 0.01f64..100.0, b in 0.01f64..100.0, p in 0u64..60, n in 0u64..60) {
        let ac = AffineCost::new(a, b, 0.0);
        let best = savings(&ConfusionCounts::from_tp_fp(p, 0, p, n), &ac);
        for tp in 0..=p {
            for fp in 0..=n {
                prop_assert!(savings(&ConfusionCounts::from_tp_fp(tp, fp, p, n), &ac) <= best);
            }
        }
    }

    #[test]
    fn pdm_cost_matches_ledger(cm in arb_cost(), p in 0u64..300, n in 0u64..300, a in 0.0f64..=1.0, b in 0.0f64..=1.0, g in 0.0f64..300.0, pr in 0.0f64..300.0) {
        let c = ConfusionCounts::from_tp_fp((p as f64 * a) as u64, (n as f64 * b) as u64, p, n);
        let want = reactive_cost(p, &cm) - ledger(&c, &cm, g, pr);
        let got = pdm_cost(&c, &cm, g, pr);
        prop_assert!((got - want).abs() <= 1e-6 * want.abs().max(1.0));
    }
}
