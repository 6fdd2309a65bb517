//! Horizon split, sliding windows and binned feature extraction.
//!
//! A window starting at `s` covers the observation interval
//! `[s, s + t_obs)`, the gap `[s + t_obs, s + t_obs + t_gap)` and the
//! prediction interval `[s + t_obs + t_gap, s + t_obs + t_gap + t_pred)`.
//! Features only read the observation interval; the label is 1 iff a failure
//! falls in the prediction interval.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::simfleet::{DeviceProfile, EventLog, RecordKind, N_CATEGORICAL};
use crate::{Error, Result, HOURS_PER_DAY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub t_obs: u64,
    pub t_gap: u64,
    pub t_pred: u64,
    pub step: u64,
    pub k_periods: u64,
}

impl WindowSpec {
    /// Builds a spec from whole days.
    pub fn from_days(obs: u64, gap: u64, pred: u64, step: u64, k_periods: u64) -> Result<Self> {
        let spec = WindowSpec {
            t_obs: obs * HOURS_PER_DAY,
            t_gap: gap * HOURS_PER_DAY,
            t_pred: pred * HOURS_PER_DAY,
            step: step * HOURS_PER_DAY,
            k_periods,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_obs == 0 || self.t_pred == 0 || self.step == 0 || self.k_periods == 0 {
            return Err(Error::Config(format!(
                "window lengths, step and k_periods must be positive: {self:?}"
            )));
        }
        if !self.t_obs.is_multiple_of(self.k_periods) {
            return Err(Error::Config(format!(
                "observation length {}h is not divisible by k_periods {}",
                self.t_obs, self.k_periods
            )));
        }
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.t_obs + self.t_gap + self.t_pred
    }

    pub fn bin_len(&self) -> u64 {
        self.t_obs / self.k_periods
    }

    pub fn prediction_interval(&self, window_start: u64) -> (u64, u64) {
        let begin = window_start + self.t_obs + self.t_gap;
        (begin, begin + self.t_pred)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    pub kind: FeatureKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub features: Vec<Feature>,
}

/// Prefix marking categorical columns in `dataset.csv`.
pub const CATEGORICAL_PREFIX: &str = "attr_";

/// Names of the per-bin features, in column order within one bin.
pub const BIN_FEATURES: [&str; 4] = ["event_count", "failure_count", "sensor_mean", "sensor_present"];

/// Window-level numeric features.
pub const WINDOW_FEATURES: [&str; 7] = [
    "total_incidents",
    "days_since_last_failure",
    "mtbf_days",
    "sensor_min",
    "sensor_max",
    "total_events",
    "event_slope",
];

impl FeatureSchema {
    /// The schema produced by [`extract_features`] for `k_periods` bins:
    /// 23 categorical attributes, 4 features per bin, then 7 window-level
    /// numericals.
    pub fn for_periods(k_periods: u64) -> Self {
        let mut features: Vec<Feature> = (1..=N_CATEGORICAL)
            .map(|i| Feature {
                name: format!("{CATEGORICAL_PREFIX}{i}"),
                kind: FeatureKind::Categorical,
            })
            .collect();
        for bin in 1..=k_periods {
            for name in BIN_FEATURES {
                features.push(Feature {
                    name: format!("{name}_{bin}"),
                    kind: FeatureKind::Numeric,
                });
            }
        }
        for name in WINDOW_FEATURES {
            features.push(Feature {
                name: name.to_string(),
                kind: FeatureKind::Numeric,
            });
        }
        FeatureSchema { features }
    }

    /// Infers kinds from column names.
    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Self {
        FeatureSchema {
            features: names
                .iter()
                .map(|n| Feature {
                    name: n.as_ref().to_string(),
                    kind: if n.as_ref().starts_with(CATEGORICAL_PREFIX) {
                        FeatureKind::Categorical
                    } else {
                        FeatureKind::Numeric
                    },
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn kinds(&self) -> Vec<FeatureKind> {
        self.features.iter().map(|f| f.kind).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub device_id: u32,
    pub window_start: u64,
    pub features: Vec<f64>,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WindowedDataset {
    pub schema: FeatureSchema,
    pub rows: Vec<DatasetRow>,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.rows.iter().filter(|r| r.label == 1).count()
    }

    pub fn negatives(&self) -> usize {
        self.len() - self.positives()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.rows.iter().map(|r| r.label).collect()
    }

    pub fn feature_rows(&self) -> Vec<&[f64]> {
        self.rows.iter().map(|r| r.features.as_slice()).collect()
    }

    /// Copy with labels replaced.
    pub fn with_labels(&self, labels: &[u8]) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::LengthMismatch {
                left: self.len(),
                right: labels.len(),
            });
        }
        let mut out = self.clone();
        for (row, &l) in out.rows.iter_mut().zip(labels) {
            row.label = l;
        }
        Ok(out)
    }
}

fn max_timestamp(logs: &[EventLog]) -> Option<u64> {
    logs.iter()
        .filter_map(|l| l.records.last().map(|r| r.timestamp_h))
        .max()
}

/// Splits logs at `horizon`. Training logs keep records strictly before the
/// horizon; test logs keep everything, since a test window may observe data
/// from before the horizon.
pub fn split_horizon(logs: &[EventLog], horizon: u64) -> Result<(Vec<EventLog>, Vec<EventLog>)> {
    let max = max_timestamp(logs).unwrap_or(0);
    if horizon == 0 || horizon >= max {
        return Err(Error::Horizon { horizon, max });
    }
    let train = logs
        .iter()
        .map(|log| EventLog {
            device_id: log.device_id,
            records: log.records[..log.records.partition_point(|r| r.timestamp_h < horizon)].to_vec(),
        })
        .collect();
    Ok((train, logs.to_vec()))
}

/// Window starts `start, start + step, ...` whose full extent fits in
/// `[start, end)`.
pub fn slide_windows(spec: &WindowSpec, range: (u64, u64)) -> Vec<u64> {
    let (start, end) = range;
    let total = spec.total();
    if end < start || end - start < total || spec.step == 0 {
        return Vec::new();
    }
    let count = (end - start - total) / spec.step + 1;
    (0..count).map(|i| start + i * spec.step).collect()
}

/// Start of the single test window whose prediction interval begins at
/// `horizon`.
pub fn test_window_start(spec: &WindowSpec, horizon: u64) -> Result<u64> {
    horizon
        .checked_sub(spec.t_obs + spec.t_gap)
        .ok_or_else(|| {
            Error::Invalid(format!(
                "horizon {horizon}h leaves no room for a {}h observation and {}h gap",
                spec.t_obs, spec.t_gap
            ))
        })
}

fn days(hours: u64) -> f64 {
    hours as f64 / HOURS_PER_DAY as f64
}

fn slope(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.len() < 2 {
        return 0.0;
    }
    let x_mean = (n + 1.0) / 2.0;
    let y_mean = values.iter().sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for (i, y) in values.iter().enumerate() {
        let dx = (i + 1) as f64 - x_mean;
        num += dx * (y - y_mean);
        den += dx * dx;
    }
    num / den
}

/// Features and label for one device in one window.
pub fn extract_row(
    log: &EventLog,
    profile: &DeviceProfile,
    window_start: u64,
    spec: &WindowSpec,
) -> DatasetRow {
    let k = spec.k_periods as usize;
    let bin_len = spec.bin_len();
    let obs_end = window_start + spec.t_obs;
    let (pred_begin, pred_end) = spec.prediction_interval(window_start);

    let mut events = vec![0.0; k];
    let mut failures = vec![0.0; k];
    let mut sensor_sum = vec![0.0; k];
    let mut sensor_n = vec![0usize; k];
    let mut failure_times = Vec::new();
    let mut sensor_min = f64::INFINITY;
    let mut sensor_max = f64::NEG_INFINITY;
    let mut label = 0u8;

    let first = log.records.partition_point(|r| r.timestamp_h < window_start);
    for r in &log.records[first..] {
        let t = r.timestamp_h;
        if t >= pred_end {
            break;
        }
        if t < obs_end {
            let bin = ((t - window_start) / bin_len) as usize;
            match r.kind {
                RecordKind::Event => events[bin] += 1.0,
                RecordKind::Failure => {
                    failures[bin] += 1.0;
                    failure_times.push(t);
                }
                RecordKind::Sensor => {
                    let v = r.value.unwrap_or(0.0);
                    sensor_sum[bin] += v;
                    sensor_n[bin] += 1;
                    sensor_min = sensor_min.min(v);
                    sensor_max = sensor_max.max(v);
                }
            }
        } else if t >= pred_begin && r.kind == RecordKind::Failure {
            label = 1;
        }
    }

    let mut features = Vec::with_capacity(N_CATEGORICAL + 4 * k + 7);
    features.extend(profile.categorical_attrs.iter().map(|(_, c)| *c as f64));
    for bin in 0..k {
        let present = sensor_n[bin] > 0;
        features.push(events[bin]);
        features.push(failures[bin]);
        features.push(if present {
            sensor_sum[bin] / sensor_n[bin] as f64
        } else {
            0.0
        });
        features.push(if present { 1.0 } else { 0.0 });
    }

    // Sentinel strictly larger than any observable day count.
    let sentinel = days(spec.t_obs + 1);
    let total_incidents = failure_times.len() as f64;
    let days_since = failure_times
        .last()
        .map_or(sentinel, |&t| days(obs_end - t));
    let mtbf = if failure_times.len() >= 2 {
        let span = failure_times[failure_times.len() - 1] - failure_times[0];
        days(span) / (failure_times.len() - 1) as f64
    } else {
        sentinel
    };
    let has_sensor = sensor_min.is_finite();
    features.push(total_incidents);
    features.push(days_since);
    features.push(mtbf);
    features.push(if has_sensor { sensor_min } else { 0.0 });
    features.push(if has_sensor { sensor_max } else { 0.0 });
    features.push(events.iter().sum());
    features.push(slope(&events));

    DatasetRow {
        device_id: profile.device_id,
        window_start,
        features,
        label,
    }
}

fn index_logs(logs: &[EventLog]) -> HashMap<u32, &EventLog> {
    logs.iter().map(|l| (l.device_id, l)).collect()
}

/// One row per device for the window at `window_start`. Devices without a
/// log are treated as having no records.
pub fn extract_features(
    logs: &[EventLog],
    profiles: &[DeviceProfile],
    window_start: u64,
    spec: &WindowSpec,
) -> Result<Vec<DatasetRow>> {
    build_dataset(logs, profiles, spec, &[window_start]).map(|d| d.rows)
}

/// Rows for every device and window start, ordered by
/// `(device_id, window_start)`.
pub fn build_dataset(
    logs: &[EventLog],
    profiles: &[DeviceProfile],
    spec: &WindowSpec,
    window_starts: &[u64],
) -> Result<WindowedDataset> {
    spec.validate()?;
    let by_id = index_logs(logs);
    let empty = EventLog::default();
    let mut ordered: Vec<&DeviceProfile> = profiles.iter().collect();
    ordered.sort_by_key(|p| p.device_id);
    let mut starts = window_starts.to_vec();
    starts.sort_unstable();

    let rows: Vec<DatasetRow> = ordered
        .par_iter()
        .flat_map_iter(|p| {
            let log = by_id.get(&p.device_id).copied().unwrap_or(&empty);
            starts
                .iter()
                .map(move |&s| extract_row(log, p, s, spec))
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(WindowedDataset {
        schema: FeatureSchema::for_periods(spec.k_periods),
        rows,
    })
}

/// Training rows from every window that fits before `horizon`.
pub fn training_dataset(
    logs: &[EventLog],
    profiles: &[DeviceProfile],
    spec: &WindowSpec,
    horizon: u64,
) -> Result<WindowedDataset> {
    let (train, _) = split_horizon(logs, horizon)?;
    let starts = slide_windows(spec, (0, horizon));
    if starts.is_empty() {
        return Err(Error::Invalid(format!(
            "no {}h window fits before the {horizon}h horizon",
            spec.total()
        )));
    }
    build_dataset(&train, profiles, spec, &starts)
}

/// Test rows from the one window whose prediction interval starts at
/// `horizon`.
pub fn test_dataset(
    logs: &[EventLog],
    profiles: &[DeviceProfile],
    spec: &WindowSpec,
    horizon: u64,
) -> Result<WindowedDataset> {
    let (_, test) = split_horizon(logs, horizon)?;
    let start = test_window_start(spec, horizon)?;
    build_dataset(&test, profiles, spec, &[start])
}
