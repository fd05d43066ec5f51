//! Monitoring large numbers of heterogeneous categorical data streams.
//!
//! Each stream, nominal or ordinal, contributes an exponentially weighted
//! likelihood-ratio statistic. These are mapped to approximately uniform
//! scores through their limiting chi-square law and fused into one chart
//! statistic (Zhang's goodness-of-fit statistic, or the max / sum
//! competitors). Control limits are set by Monte Carlo calibration.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod engine;
pub mod error;
pub mod global;
pub mod local;
pub mod math;
pub mod report;
pub mod sampling;
pub mod simulate;
pub mod streams;

pub use calibration::{
    calibrate_limit, estimate_arl, simulate_run_length, CalibrationOptions, CalibrationResult,
    RunLengthSummary,
};
pub use engine::Engine;
pub use error::{Error, Result};
pub use global::{chart_step, Chart, ChartConfig, ChartPoint, Statistic};
pub use local::{EwmaState, SampleCounts};
pub use math::Probability;
pub use sampling::RngSeed;
pub use simulate::{ResultTable, Scenario};
pub use streams::{
    LatentFamily, NominalSpec, OrdinalSpec, ShiftSpec, StreamDef, StreamKind, StreamSpec,
};
