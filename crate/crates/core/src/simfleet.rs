//! Synthetic device fleet generator.
//!
//! Every device carries 23 categorical attributes and a weekly failure
//! hazard inside `hazard_range`. Vendor and software version account for
//! most of the hazard, and the convex mapping leaves a small group of
//! failure-prone devices near the top of the range. Failures are weekly Bernoulli draws; events follow a daily Poisson
//! process and sensor readings a per-device Gaussian. In the two weeks before
//! each failure the event intensity is multiplied by `1 + precursor_strength`
//! and the sensor mean shifts by `precursor_strength * sensor_sigma`.
//!
//! Each device draws from three independent ChaCha streams derived from
//! `(seed, device_id)` (profile, failures, behaviour), so output does not
//! depend on generation order and the failure set is monotone in the hazard
//! for a fixed seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, HOURS_PER_DAY, HOURS_PER_WEEK};

/// Number of categorical attributes per device.
pub const N_CATEGORICAL: usize = 23;

/// Length of the pre-failure window with elevated activity, in hours.
pub const PRECURSOR_WINDOW_H: u64 = 2 * HOURS_PER_WEEK;

/// Mean and spread of the per-device sensor baseline.
const SENSOR_BASELINE: (f64, f64) = (50.0, 2.0);

/// Named attributes and their cardinalities; the rest are fillers.
const NAMED_ATTRS: [(&str, u32); 7] = [
    ("vendor", 4),
    ("model", 8),
    ("configuration", 5),
    ("install_method", 3),
    ("sw_version", 6),
    ("location", 10),
    ("working_hours", 3),
];

const VENDOR: usize = 0;
const SW_VERSION: usize = 4;

/// Names of the 23 categorical attributes in column order.
pub fn attribute_names() -> Vec<String> {
    let mut names: Vec<String> = NAMED_ATTRS.iter().map(|(n, _)| n.to_string()).collect();
    for i in 1..=N_CATEGORICAL - NAMED_ATTRS.len() {
        names.push(format!("filler_{i}"));
    }
    names
}

fn attribute_cardinality(index: usize) -> u32 {
    match NAMED_ATTRS.get(index) {
        Some((_, card)) => *card,
        None => 2 + (index as u32 % 6),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub device_id: u32,
    pub categorical_attrs: Vec<(String, u32)>,
    /// Probability of failure per week.
    pub base_hazard: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum RecordKind {
    Event,
    Failure,
    Sensor,
}

impl RecordKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordKind::Event => "EVENT",
            RecordKind::Failure => "FAILURE",
            RecordKind::Sensor => "SENSOR",
        }
    }
}

impl std::str::FromStr for RecordKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "EVENT" => Ok(RecordKind::Event),
            "FAILURE" => Ok(RecordKind::Failure),
            "SENSOR" => Ok(RecordKind::Sensor),
            other => Err(Error::Format(format!("unknown record kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub timestamp_h: u64,
    pub kind: RecordKind,
    /// Only set for [`RecordKind::Sensor`].
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EventLog {
    pub device_id: u32,
    /// Sorted by timestamp.
    pub records: Vec<Record>,
}

impl EventLog {
    pub fn failures(&self) -> impl Iterator<Item = u64> + '_ {
        self.records
            .iter()
            .filter(|r| r.kind == RecordKind::Failure)
            .map(|r| r.timestamp_h)
    }
}

fn default_event_rate() -> f64 {
    4.0
}
fn default_sensor_sigma() -> f64 {
    1.0
}
fn default_sensor_prob() -> f64 {
    0.8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_devices: usize,
    pub n_weeks: u32,
    pub seed: u64,
    /// Range of per-device weekly failure probabilities.
    pub hazard_range: (f64, f64),
    pub precursor_strength: f64,
    /// When set, [`calibrate_hazard`] moves `hazard_range` so that the weekly
    /// positive rate matches this value.
    #[serde(default)]
    pub target_positive_rate: Option<f64>,
    /// Mean baseline events per week.
    #[serde(default = "default_event_rate")]
    pub event_rate: f64,
    #[serde(default = "default_sensor_sigma")]
    pub sensor_sigma: f64,
    /// Probability of a sensor reading on any given day.
    #[serde(default = "default_sensor_prob")]
    pub sensor_prob: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_devices: 2000,
            n_weeks: 24,
            seed: 42,
            hazard_range: (0.02, 0.9),
            precursor_strength: 4.0,
            target_positive_rate: None,
            event_rate: default_event_rate(),
            sensor_sigma: default_sensor_sigma(),
            sensor_prob: default_sensor_prob(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.hazard_range;
        if !(lo > 0.0 && lo <= hi && hi < 1.0) {
            return Err(Error::Config(format!(
                "hazard_range must satisfy 0 < min <= max < 1, got ({lo}, {hi})"
            )));
        }
        if !(self.precursor_strength >= 0.0) || !self.precursor_strength.is_finite() {
            return Err(Error::Config("precursor_strength must be >= 0".into()));
        }
        if let Some(t) = self.target_positive_rate {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::Config(format!(
                    "target_positive_rate must lie in (0, 1), got {t}"
                )));
            }
        }
        if !(self.event_rate >= 0.0) || !self.event_rate.is_finite() {
            return Err(Error::Config("event_rate must be >= 0".into()));
        }
        if !(self.sensor_sigma > 0.0) || !self.sensor_sigma.is_finite() {
            return Err(Error::Config("sensor_sigma must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.sensor_prob) {
            return Err(Error::Config("sensor_prob must lie in [0, 1]".into()));
        }
        if u32::try_from(self.n_devices).is_err() {
            return Err(Error::Config("n_devices exceeds u32 range".into()));
        }
        Ok(())
    }

    /// Last representable timestamp (exclusive upper bound is `horizon_end + 1`).
    pub fn horizon_end(&self) -> u64 {
        self.n_weeks as u64 * HOURS_PER_WEEK
    }

    /// Mean of the hazard range, the quantity bisected by [`calibrate_hazard`].
    pub fn hazard_mean(&self) -> f64 {
        (self.hazard_range.0 + self.hazard_range.1) / 2.0
    }
}

#[derive(Clone, Copy)]
enum Stream {
    Profile = 0,
    Failures = 1,
    Behaviour = 2,
}

fn stream_rng(seed: u64, device_id: u32, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(device_id as u64 * 3 + stream as u64);
    rng
}

fn make_profile(config: &SimConfig, device_id: u32) -> DeviceProfile {
    let mut rng = stream_rng(config.seed, device_id, Stream::Profile);
    let names = attribute_names();
    let categorical_attrs: Vec<(String, u32)> = names
        .into_iter()
        .enumerate()
        .map(|(i, name)| (name, rng.random_range(0..attribute_cardinality(i))))
        .collect();
    // Vendor and software version set most of the hazard; the rest is noise.
    let vendor = categorical_attrs[VENDOR].1 as f64 / (attribute_cardinality(VENDOR) - 1) as f64;
    let sw = categorical_attrs[SW_VERSION].1 as f64 / (attribute_cardinality(SW_VERSION) - 1) as f64;
    let noise: f64 = rng.random();
    let u = 0.4 * vendor + 0.4 * sw + 0.2 * noise;
    let (lo, hi) = config.hazard_range;
    DeviceProfile {
        device_id,
        categorical_attrs,
        base_hazard: (lo + (hi - lo) * u.powf(1.5)).clamp(lo, hi),
    }
}

/// Failure timestamps for one device. Always consumes two draws per week so
/// that the draw sequence is independent of the hazard.
fn draw_failures(config: &SimConfig, profile: &DeviceProfile) -> Vec<u64> {
    let mut rng = stream_rng(config.seed, profile.device_id, Stream::Failures);
    let mut failures = Vec::new();
    for week in 0..config.n_weeks as u64 {
        let u: f64 = rng.random();
        let offset = rng.random_range(0..HOURS_PER_WEEK);
        if u < profile.base_hazard {
            failures.push(week * HOURS_PER_WEEK + offset);
        }
    }
    failures
}

fn in_precursor(failures: &[u64], t: u64) -> bool {
    // first failure strictly after t
    let idx = failures.partition_point(|&f| f <= t);
    failures
        .get(idx)
        .is_some_and(|&f| f - t <= PRECURSOR_WINDOW_H)
}

fn generate_device(config: &SimConfig, device_id: u32) -> (DeviceProfile, EventLog) {
    let profile = make_profile(config, device_id);
    let failures = draw_failures(config, &profile);

    let mut rng = stream_rng(config.seed, device_id, Stream::Behaviour);
    let sigma = config.sensor_sigma;
    let device_mean = Normal::new(SENSOR_BASELINE.0, SENSOR_BASELINE.1).unwrap().sample(&mut rng);
    let noise = Normal::new(0.0, sigma).unwrap();
    let shift = config.precursor_strength * sigma;
    let daily_rate = config.event_rate / 7.0;

    let mut records: Vec<Record> = failures
        .iter()
        .map(|&t| Record {
            timestamp_h: t,
            kind: RecordKind::Failure,
            value: None,
        })
        .collect();

    let n_days = config.n_weeks as u64 * 7;
    for day in 0..n_days {
        let day_start = day * HOURS_PER_DAY;
        let elevated = in_precursor(&failures, day_start + HOURS_PER_DAY / 2);
        let rate = if elevated {
            daily_rate * (1.0 + config.precursor_strength)
        } else {
            daily_rate
        };
        let count = if rate > 0.0 {
            Poisson::new(rate).unwrap().sample(&mut rng) as u64
        } else {
            0
        };
        for _ in 0..count {
            records.push(Record {
                timestamp_h: day_start + rng.random_range(0..HOURS_PER_DAY),
                kind: RecordKind::Event,
                value: None,
            });
        }
        if rng.random::<f64>() < config.sensor_prob {
            let t = day_start + rng.random_range(0..HOURS_PER_DAY);
            let mean = if in_precursor(&failures, t) {
                device_mean + shift
            } else {
                device_mean
            };
            records.push(Record {
                timestamp_h: t,
                kind: RecordKind::Sensor,
                value: Some(mean + noise.sample(&mut rng)),
            });
        }
    }
    records.sort_by_key(|r| r.timestamp_h);
    (profile, EventLog { device_id, records })
}

/// Generates the fleet profiles and event logs for `config`.
pub fn generate_fleet(config: &SimConfig) -> Result<(Vec<DeviceProfile>, Vec<EventLog>)> {
    config.validate()?;
    let (profiles, logs) = (0..config.n_devices as u32)
        .into_par_iter()
        .map(|id| generate_device(config, id))
        .unzip();
    Ok((profiles, logs))
}

/// Fraction of device-weeks containing a failure, from a failures-only pilot
/// run of `config`.
pub fn pilot_positive_rate(config: &SimConfig) -> Result<f64> {
    config.validate()?;
    if config.n_devices == 0 || config.n_weeks == 0 {
        return Err(Error::Config(
            "pilot simulation needs at least one device and one week".into(),
        ));
    }
    let failures: usize = (0..config.n_devices as u32)
        .into_par_iter()
        .map(|id| draw_failures(config, &make_profile(config, id)).len())
        .sum();
    Ok(failures as f64 / (config.n_devices as f64 * config.n_weeks as f64))
}

/// Tolerance at which bisection stops.
pub const CALIBRATION_TOLERANCE: f64 = 0.005;
/// Bisection step budget.
pub const CALIBRATION_STEPS: usize = 50;

/// Re-centres `config.hazard_range` on a mean hazard found by bisection, so
/// that the pilot weekly positive rate is within [`CALIBRATION_TOLERANCE`] of
/// `target_positive_rate`. The relative spread of the range is kept.
pub fn calibrate_hazard(config: &SimConfig) -> Result<SimConfig> {
    let target = config
        .target_positive_rate
        .ok_or_else(|| Error::Config("target_positive_rate is not set".into()))?;
    let current = pilot_positive_rate(config)?;
    if (current - target).abs() <= CALIBRATION_TOLERANCE {
        return Ok(config.clone());
    }

    let (lo, hi) = config.hazard_range;
    let spread = (hi - lo) / (hi + lo);
    let recentre = |mean: f64| {
        let mut c = config.clone();
        c.hazard_range = (mean * (1.0 - spread), mean * (1.0 + spread));
        c
    };

    let mut low = 1e-6;
    let mut high = (1.0 - 1e-6) / (1.0 + spread);
    let mut last_rate = current;
    for _ in 0..CALIBRATION_STEPS {
        let mid = 0.5 * (low + high);
        let candidate = recentre(mid);
        last_rate = pilot_positive_rate(&candidate)?;
        if (last_rate - target).abs() <= CALIBRATION_TOLERANCE {
            return Ok(candidate);
        }
        if last_rate < target {
            low = mid;
        } else {
            high = mid;
        }
    }
    Err(Error::Calibration {
        steps: CALIBRATION_STEPS,
        last_rate,
        target,
    })
}
