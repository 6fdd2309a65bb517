//! Maintenance cost model.
//!
//! Per incident, reactive maintenance pays a ticket, a service visit and the
//! downtime `T_T + T_R`. A true positive avoids the ticket and part of the
//! downtime. A false positive pays a needless service visit, its repair
//! downtime and the component value lost by replacing it early. Savings
//! are therefore affine in `(TP, FP)`:
//!
//! ```text
//! T_D(g, p) = max(0, T_T - g - p/2) + T_R
//! a = ticket + rate * (T_D(0, 0) - T_D(g, p))
//! b = service + rate * T_D(g, p) + (C / T_L) * p / 2
//! S = a * TP - b * FP + c
//! ```
//!
//! All times are hours.

use serde::{Deserialize, Serialize};

use crate::metrics::ConfusionCounts;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostModel {
    /// $ per incident.
    pub ticket_cost: f64,
    /// $ per incident.
    pub service_cost: f64,
    /// $ per hour of downtime.
    pub downtime_rate: f64,
    /// Preparation and travel time `T_T`, hours.
    pub travel_time: f64,
    /// Repair time `T_R`, hours.
    pub repair_time: f64,
    /// Component procurement cost `C`, $.
    pub component_cost: f64,
    /// Expected component life `T_L`, hours.
    pub expected_life: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            ticket_cost: 32.0,
            service_cost: 51.0,
            downtime_rate: 2.0,
            travel_time: 6.0,
            repair_time: 2.0,
            component_cost: 1200.0,
            expected_life: 10_000.0,
        }
    }
}

impl CostModel {
    /// Default costs without the component value loss (`C = 0`), which gives
    /// `S = 44 TP - 55 FP` for one-week gap and prediction intervals.
    pub fn without_component_loss() -> Self {
        CostModel {
            component_cost: 0.0,
            ..CostModel::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("ticket_cost", self.ticket_cost),
            ("service_cost", self.service_cost),
            ("downtime_rate", self.downtime_rate),
            ("travel_time", self.travel_time),
            ("repair_time", self.repair_time),
            ("component_cost", self.component_cost),
            ("expected_life", self.expected_life),
        ];
        for (name, v) in fields {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.component_cost > 0.0 && self.expected_life == 0.0 {
            return Err(Error::Config(
                "expected_life must be > 0 when component_cost > 0".into(),
            ));
        }
        Ok(())
    }

    /// Component value per operating hour, `C / T_L`.
    pub fn value_rate(&self) -> f64 {
        if self.component_cost == 0.0 {
            0.0
        } else {
            self.component_cost / self.expected_life
        }
    }

    /// Cost of one reactively handled incident.
    pub fn reactive_incident_cost(&self) -> f64 {
        self.ticket_cost + self.service_cost + self.downtime_rate * expected_downtime(0.0, 0.0, self)
    }
}

/// `max(0, T_T - gap - pred/2) + T_R`, in hours.
pub fn expected_downtime(gap: f64, pred: f64, cm: &CostModel) -> f64 {
    (cm.travel_time - gap - pred / 2.0).max(0.0) + cm.repair_time
}

/// `pi(TP, FP) = a TP - b FP + c`. `b` is stored as a positive penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineCost {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// `(gap, pred)` in hours this was derived for.
    pub gap: f64,
    pub pred: f64,
}

impl AffineCost {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        AffineCost {
            a,
            b,
            c,
            gap: f64::NAN,
            pred: f64::NAN,
        }
    }

    /// Savings for possibly fractional counts.
    pub fn evaluate(&self, tp: f64, fp: f64) -> f64 {
        self.a * tp - self.b * fp + self.c
    }
}

pub fn affine_coefficients(cm: &CostModel, gap: f64, pred: f64) -> AffineCost {
    let downtime = expected_downtime(gap, pred, cm);
    let baseline = expected_downtime(0.0, 0.0, cm);
    AffineCost {
        a: cm.ticket_cost + cm.downtime_rate * (baseline - downtime),
        b: cm.service_cost + cm.downtime_rate * downtime + cm.value_rate() * pred / 2.0,
        c: 0.0,
        gap,
        pred,
    }
}

pub fn savings(counts: &ConfusionCounts, ac: &AffineCost) -> f64 {
    ac.evaluate(counts.tp as f64, counts.fp as f64)
}

/// Reactive maintenance cost for `p` incidents.
pub fn reactive_cost(p: u64, cm: &CostModel) -> f64 {
    p as f64 * cm.reactive_incident_cost()
}

/// Predictive maintenance cost: the reactive baseline minus savings. False
/// negatives keep their full reactive cost.
pub fn pdm_cost(counts: &ConfusionCounts, cm: &CostModel, gap: f64, pred: f64) -> f64 {
    reactive_cost(counts.p(), cm) - savings(counts, &affine_coefficients(cm, gap, pred))
}

/// `pdm / reactive * 100`.
pub fn cost_pct(pdm: f64, reactive: f64) -> f64 {
    pdm / reactive * 100.0
}

/// One cost component, current (reactive) versus future (predictive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostLine {
    pub component: String,
    pub current: f64,
    pub future: f64,
    pub delta: f64,
}

/// Itemised costs for a confusion outcome, one line per component plus a
/// total; `delta = current - future` so the total delta equals the savings.
pub fn itemize(counts: &ConfusionCounts, cm: &CostModel, gap: f64, pred: f64) -> Vec<CostLine> {
    let p = counts.p() as f64;
    let (tp, fp, fn_) = (counts.tp as f64, counts.fp as f64, counts.fn_ as f64);
    let baseline = expected_downtime(0.0, 0.0, cm);
    let planned = expected_downtime(gap, pred, cm);
    let rows = [
        ("ticket", p * cm.ticket_cost, fn_ * cm.ticket_cost),
        (
            "service",
            p * cm.service_cost,
            (tp + fp + fn_) * cm.service_cost,
        ),
        (
            "downtime",
            p * cm.downtime_rate * baseline,
            (fn_ * baseline + (tp + fp) * planned) * cm.downtime_rate,
        ),
        (
            "component_value_loss",
            0.0,
            fp * cm.value_rate() * pred / 2.0,
        ),
    ];
    let mut lines: Vec<CostLine> = rows
        .iter()
        .map(|&(name, current, future)| CostLine {
            component: name.to_string(),
            current,
            future,
            delta: current - future,
        })
        .collect();
    let current: f64 = lines.iter().map(|l| l.current).sum();
    let future: f64 = lines.iter().map(|l| l.future).sum();
    lines.push(CostLine {
        component: "total".to_string(),
        current,
        future,
        delta: current - future,
    });
    lines
}
