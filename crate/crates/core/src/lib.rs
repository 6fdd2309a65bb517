//! Cost-sensitive model selection for predictive maintenance.
//!
//! The pipeline runs from a synthetic device fleet ([`simfleet`]) through
//! sliding-window feature extraction ([`windowing`]) and a random-forest
//! failure classifier ([`forest`]) to hyperparameter and cutoff tuning
//! ([`tuner`]) against either the F1-score or an economic savings function
//! ([`econ`]). [`analysis`] holds the cost-surface, interval-sweep and
//! projection utilities, and [`io`] the CSV/JSON file formats.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod econ;
pub mod error;
pub mod forest;
pub mod io;
pub mod metrics;
pub mod simfleet;
pub mod tuner;
pub mod windowing;

pub use error::{Error, Result};

/// Hours in a day; all internal times are integer hours.
pub const HOURS_PER_DAY: u64 = 24;
/// Hours in a week.
pub const HOURS_PER_WEEK: u64 = 7 * HOURS_PER_DAY;
