//! Driving volatility: the sample standard deviation of percent log speed
//! returns `r_i = 100 * ln(x_i / x_{i-1})` over a trip.
//!
//! Log returns are undefined when either speed is zero, and real trips stop.
//! [`ZeroSpeedPolicy`] makes the handling explicit; the default drops any
//! pair touching a zero and counts it.

use crate::ingest::DrivingCycle;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Trips with fewer returns than this are excluded by default.
pub const DEFAULT_MIN_RETURNS: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum VolatilityError {
    #[error("need at least 2 speeds, got {len}")]
    InsufficientData { len: usize },
    #[error("speed at index {index} is {speed}; speeds must be finite and >= 0")]
    InvalidSpeed { index: usize, speed: f64 },
    #[error("zero speed at index {index}")]
    ZeroSpeed { index: usize },
    #[error("{have} returns, need at least {need}")]
    TooFewReturns { have: usize, need: usize },
    #[error("min_returns must be >= 2, got {0}")]
    InvalidMinReturns(usize),
    #[error("epsilon_mph must be finite and > 0, got {0}")]
    InvalidEpsilon(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroSpeedMode {
    /// Skip every consecutive pair with a member <= 0.
    #[default]
    DropPair,
    /// Raise speeds below `epsilon_mph` to `epsilon_mph` first.
    FloorEpsilon,
    /// Fail on the first speed <= 0.
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZeroSpeedPolicy {
    pub mode: ZeroSpeedMode,
    pub epsilon_mph: f64,
}

impl Default for ZeroSpeedPolicy {
    fn default() -> Self {
        Self {
            mode: ZeroSpeedMode::DropPair,
            epsilon_mph: 0.1,
        }
    }
}

impl ZeroSpeedPolicy {
    pub fn new(mode: ZeroSpeedMode, epsilon_mph: f64) -> Result<Self, VolatilityError> {
        let p = Self { mode, epsilon_mph };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), VolatilityError> {
        if self.epsilon_mph.is_finite() && self.epsilon_mph > 0.0 {
            Ok(())
        } else {
            Err(VolatilityError::InvalidEpsilon(self.epsilon_mph))
        }
    }
}

/// Percent log returns of a speed trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogReturnSeries {
    pub returns: Vec<f64>,
    /// Consecutive pairs skipped under [`ZeroSpeedMode::DropPair`].
    pub n_dropped_zero: usize,
}

pub fn log_returns(speeds: &[f64], policy: &ZeroSpeedPolicy) -> Result<LogReturnSeries, VolatilityError> {
    if speeds.len() < 2 {
        return Err(VolatilityError::InsufficientData { len: speeds.len() });
    }
    policy.validate()?;
    if let Some((index, &speed)) = speeds
        .iter()
        .enumerate()
        .find(|(_, s)| !(s.is_finite() && **s >= 0.0))
    {
        return Err(VolatilityError::InvalidSpeed { index, speed });
    }

    let mut returns = Vec::with_capacity(speeds.len() - 1);
    let mut n_dropped_zero = 0;
    match policy.mode {
        ZeroSpeedMode::DropPair => {
            for w in speeds.windows(2) {
                if w[0] <= 0.0 || w[1] <= 0.0 {
                    n_dropped_zero += 1;
                } else {
                    returns.push((w[1] / w[0]).ln() * 100.0);
                }
            }
        }
        ZeroSpeedMode::FloorEpsilon => {
            let eps = policy.epsilon_mph;
            returns.extend(
                speeds
                    .windows(2)
                    .map(|w| (w[1].max(eps) / w[0].max(eps)).ln() * 100.0),
            );
        }
        ZeroSpeedMode::Error => {
            if let Some(index) = speeds.iter().position(|&s| s <= 0.0) {
                return Err(VolatilityError::ZeroSpeed { index });
            }
            returns.extend(speeds.windows(2).map(|w| (w[1] / w[0]).ln() * 100.0));
        }
    }
    Ok(LogReturnSeries {
        returns,
        n_dropped_zero,
    })
}

/// Sample standard deviation (n - 1 divisor), two-pass. `0` for fewer than
/// two values.
pub fn sample_std(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Single-pass (Welford) sample standard deviation; for streaming callers.
pub fn sample_std_streaming(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut n, mut mean, mut m2) = (0u64, 0.0f64, 0.0f64);
    for x in values {
        n += 1;
        let delta = x - mean;
        mean += delta / n as f64;
        m2 += delta * (x - mean);
    }
    if n < 2 {
        0.0
    } else {
        (m2 / (n - 1) as f64).sqrt()
    }
}

/// Volatility in percent: the sample standard deviation of the returns.
pub fn volatility(series: &LogReturnSeries, min_returns: usize) -> Result<f64, VolatilityError> {
    if min_returns < 2 {
        return Err(VolatilityError::InvalidMinReturns(min_returns));
    }
    let have = series.returns.len();
    if have < min_returns {
        return Err(VolatilityError::TooFewReturns {
            have,
            need: min_returns,
        });
    }
    Ok(sample_std(&series.returns))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripVolatility {
    pub volatility_pct: f64,
    pub n_returns: usize,
    pub n_dropped_zero: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExclusionReason {
    TooShort,
    AllZeroDropped,
    ZeroSpeed,
    InvalidSpeed,
}

impl fmt::Display for ExclusionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExclusionReason::TooShort => "too-short",
            ExclusionReason::AllZeroDropped => "all-zero-dropped",
            ExclusionReason::ZeroSpeed => "zero-speed",
            ExclusionReason::InvalidSpeed => "invalid-speed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub trip_id: String,
    pub reason: ExclusionReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionReport {
    /// Sorted by trip id.
    pub excluded: Vec<Exclusion>,
}

fn trip_volatility(
    cycle: &DrivingCycle,
    policy: &ZeroSpeedPolicy,
    min_returns: usize,
) -> Result<TripVolatility, ExclusionReason> {
    let speeds = cycle.speeds();
    let series = match log_returns(&speeds, policy) {
        Ok(s) => s,
        Err(VolatilityError::InsufficientData { .. }) => return Err(ExclusionReason::TooShort),
        Err(VolatilityError::ZeroSpeed { .. }) => return Err(ExclusionReason::ZeroSpeed),
        Err(_) => return Err(ExclusionReason::InvalidSpeed),
    };
    match volatility(&series, min_returns) {
        Ok(v) => Ok(TripVolatility {
            volatility_pct: v,
            n_returns: series.returns.len(),
            n_dropped_zero: series.n_dropped_zero,
        }),
        Err(_) if series.returns.is_empty() && series.n_dropped_zero > 0 => {
            Err(ExclusionReason::AllZeroDropped)
        }
        Err(_) => Err(ExclusionReason::TooShort),
    }
}

/// Volatility for every cycle, computed in parallel. Trips that cannot yield
/// `min_returns` returns are listed in the exclusion report instead.
pub fn trip_volatilities(
    cycles: &[DrivingCycle],
    policy: &ZeroSpeedPolicy,
    min_returns: usize,
) -> Result<(BTreeMap<String, TripVolatility>, ExclusionReport), VolatilityError> {
    if min_returns < 2 {
        return Err(VolatilityError::InvalidMinReturns(min_returns));
    }
    policy.validate()?;
    let results: Vec<(String, Result<TripVolatility, ExclusionReason>)> = cycles
        .par_iter()
        .map(|c| (c.trip_id.clone(), trip_volatility(c, policy, min_returns)))
        .collect();

    let mut map = BTreeMap::new();
    let mut report = ExclusionReport::default();
    for (trip_id, r) in results {
        match r {
            Ok(v) => {
                map.insert(trip_id, v);
            }
            Err(reason) => report.excluded.push(Exclusion { trip_id, reason }),
        }
    }
    report.excluded.sort_by(|a, b| a.trip_id.cmp(&b.trip_id));
    Ok((map, report))
}

/// `trip_id, volatility_pct, n_returns, n_dropped_zero`, full precision.
pub fn volatility_csv(map: &BTreeMap<String, TripVolatility>) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["trip_id", "volatility_pct", "n_returns", "n_dropped_zero"])?;
    for (id, v) in map {
        w.write_record([
            id.as_str(),
            &v.volatility_pct.to_string(),
            &v.n_returns.to_string(),
            &v.n_dropped_zero.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?)
        .expect("utf-8"))
}

pub fn exclusions_csv(report: &ExclusionReport) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["trip_id", "reason"])?;
    for e in &report.excluded {
        w.write_record([e.trip_id.as_str(), &e.reason.to_string()])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?)
        .expect("utf-8"))
}
