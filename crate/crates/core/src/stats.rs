//! Descriptive statistics, histograms and collinearity diagnostics.

use crate::ingest::{AnalysisRow, Field, FieldKind, Level, Value};
use crate::model::{fit_ols, DesignMatrix, ModelError};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

/// `R²` at or above `1 - VIF_TOLERANCE` counts as perfect collinearity.
pub const VIF_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("no values")]
    Empty,
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("inputs differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("correlation needs at least two points")]
    TooFewPoints,
    #[error("correlation undefined: zero variance in `{0}`")]
    ZeroVariance(&'static str),
    #[error("invalid binning: {0}")]
    InvalidBinning(String),
    #[error("column index {0} is not a predictor of the design")]
    InvalidColumn(usize),
    #[error("VIF needs at least two predictors besides the intercept")]
    TooFewPredictors,
    #[error("column `{0}` has zero variance")]
    ConstantColumn(String),
    #[error("column `{0}` is perfectly collinear with the other predictors (infinite VIF)")]
    InfiniteVif(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (divisor `n - 1`); 0 for a single value.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

fn check_finite(values: &[f64]) -> Result<(), StatsError> {
    if values.is_empty() {
        return Err(StatsError::Empty);
    }
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(StatsError::NonFinite(i)),
        None => Ok(()),
    }
}

pub fn describe(values: &[f64]) -> Result<SummaryStats, StatsError> {
    check_finite(values)?;
    let n = values.len();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // rounding can push the mean of near-equal values just outside [min, max]
    let mean = (values.iter().sum::<f64>() / n as f64).clamp(min, max);
    let std = if n < 2 || min == max {
        0.0
    } else {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n - 1) as f64).sqrt()
    };
    Ok(SummaryStats {
        n,
        mean,
        std,
        min,
        max,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Binning {
    /// Width `2 IQR n^(-1/3)`.
    FreedmanDiaconis,
    FixedCount { bins: usize },
    FixedWidth { width: f64 },
}

impl Default for Binning {
    fn default() -> Self {
        Binning::FreedmanDiaconis
    }
}

/// Bins are `[edge_i, edge_{i+1})` except the last, which is closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Linearly interpolated sample quantile of sorted data (`(n - 1) p` rule).
pub(crate) fn interpolated_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Number of Freedman-Diaconis bins for `values` spanning a positive range.
/// Falls back to Sturges' rule when the interquartile range is zero.
pub fn freedman_diaconis_bins(values: &[f64]) -> usize {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let range = sorted[n - 1] - sorted[0];
    if range <= 0.0 {
        return 1;
    }
    let iqr = interpolated_quantile(&sorted, 0.75) - interpolated_quantile(&sorted, 0.25);
    let width = 2.0 * iqr * (n as f64).powf(-1.0 / 3.0);
    if width > 0.0 {
        ((range / width).ceil() as usize).max(1)
    } else {
        (n as f64).log2().ceil() as usize + 1
    }
}

pub fn histogram(values: &[f64], binning: Binning) -> Result<Histogram, StatsError> {
    check_finite(values)?;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;

    match binning {
        Binning::FixedCount { bins: 0 } => {
            return Err(StatsError::InvalidBinning("bin count must be at least 1".into()))
        }
        Binning::FixedWidth { width } if !(width > 0.0 && width.is_finite()) => {
            return Err(StatsError::InvalidBinning(format!("bin width {width} must be positive")))
        }
        _ => {}
    }

    if range == 0.0 {
        return Ok(Histogram {
            bin_edges: vec![min - 0.5, min + 0.5],
            counts: vec![values.len() as u64],
        });
    }

    let bin_edges: Vec<f64> = match binning {
        Binning::FreedmanDiaconis | Binning::FixedCount { .. } => {
            let k = match binning {
                Binning::FixedCount { bins } => bins,
                _ => freedman_diaconis_bins(values),
            };
            let mut edges: Vec<f64> = (0..=k).map(|i| min + range * (i as f64 / k as f64)).collect();
            edges[k] = max;
            edges
        }
        Binning::FixedWidth { width } => {
            let k = ((range / width).ceil() as usize).max(1);
            let mut edges: Vec<f64> = (0..=k).map(|i| min + width * i as f64).collect();
            if edges[k] < max {
                edges[k] = max;
            }
            edges
        }
    };
    if bin_edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(StatsError::InvalidBinning("bins too narrow for the data's precision".into()));
    }

    let k = bin_edges.len() - 1;
    let mut counts = vec![0u64; k];
    let interior = &bin_edges[1..k];
    for &v in values {
        let i = interior.partition_point(|&e| e <= v);
        counts[i.min(k - 1)] += 1;
    }
    Ok(Histogram { bin_edges, counts })
}

/// Product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(StatsError::TooFewPoints);
    }
    check_finite(x)?;
    check_finite(y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 {
        return Err(StatsError::ZeroVariance("x"));
    }
    if syy == 0.0 {
        return Err(StatsError::ZeroVariance("y"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Variance inflation factor `1 / (1 - R²)` of predictor `column`, from the
/// OLS regression of that column on the intercept and every other predictor.
pub fn vif(design: &DesignMatrix, column: usize) -> Result<f64, StatsError> {
    let p = design.n_cols();
    if column == 0 || column >= p {
        return Err(StatsError::InvalidColumn(column));
    }
    if p < 3 {
        return Err(StatsError::TooFewPredictors);
    }
    let name = &design.column_names[column];
    let target: DVector<f64> = design.x.column(column).into_owned();
    if target.iter().all(|&v| v == target[0]) {
        return Err(StatsError::ConstantColumn(name.clone()));
    }
    let others: Vec<usize> = (0..p).filter(|&j| j != column).collect();
    let aux = DesignMatrix::new(
        others.iter().map(|&j| design.column_names[j].clone()).collect(),
        design.x.select_columns(&others),
        target,
        design.row_keys.clone(),
    )?;
    let r2 = fit_ols(&aux)?.fit_measure;
    if r2 >= 1.0 - VIF_TOLERANCE {
        return Err(StatsError::InfiniteVif(name.clone()));
    }
    Ok(1.0 / (1.0 - r2))
}

/// VIF of every predictor, in design order.
pub fn vif_all(design: &DesignMatrix) -> Result<Vec<(String, f64)>, StatsError> {
    (1..design.n_cols())
        .map(|j| Ok((design.column_names[j].clone(), vif(design, j)?)))
        .collect()
}

/// One row of a Table 1 style summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveRow {
    /// Display label; category rows carry the category label.
    pub variable: String,
    /// Group heading for category rows.
    pub group: Option<String>,
    /// Unit the statistics run over.
    pub level: Level,
    pub stats: SummaryStats,
}

/// Label of the dependent variable in descriptive tables.
pub const VOLATILITY_LABEL: &str = "Driving Volatility";

/// Summaries of volatility and every covariate. Trip fields run over trips;
/// vehicle and person fields over the distinct vehicles and persons present
/// in `rows` (first occurrence wins). Categorical fields become one 0/1
/// indicator row per category. Missing cells are skipped, and a field with no
/// observed values is left out.
pub fn describe_table(rows: &[AnalysisRow]) -> Result<Vec<DescriptiveRow>, StatsError> {
    if rows.is_empty() {
        return Err(StatsError::Empty);
    }
    let units = |level: Level| -> Vec<&AnalysisRow> {
        let mut seen = BTreeSet::new();
        rows.iter()
            .filter(|r| match level {
                Level::Trip => true,
                Level::Vehicle => seen.insert(r.vehicle_id.clone()),
                Level::Person => seen.insert(format!("{}/{}", r.household_id, r.person_id)),
            })
            .collect()
    };
    let trip_rows = units(Level::Trip);
    let vehicle_rows = units(Level::Vehicle);
    let person_rows = units(Level::Person);

    let vol: Vec<f64> = rows.iter().map(|r| r.volatility_pct).collect();
    let mut out = vec![DescriptiveRow {
        variable: VOLATILITY_LABEL.to_owned(),
        group: None,
        level: Level::Trip,
        stats: describe(&vol)?,
    }];

    for field in Field::ALL {
        let pool = match field.level() {
            Level::Trip => &trip_rows,
            Level::Vehicle => &vehicle_rows,
            Level::Person => &person_rows,
        };
        if field.kind() == FieldKind::Categorical {
            let observed: Vec<&str> = pool
                .iter()
                .filter_map(|r| match r.get(field) {
                    Some(Value::Category(c)) => Some(c),
                    _ => None,
                })
                .collect();
            if observed.is_empty() {
                continue;
            }
            for code in field.categories().unwrap_or_default() {
                let ind: Vec<f64> = observed.iter().map(|&c| if c == code { 1.0 } else { 0.0 }).collect();
                out.push(DescriptiveRow {
                    variable: field.category_label(code).unwrap_or(code).to_owned(),
                    group: Some(field.label().to_owned()),
                    level: field.level(),
                    stats: describe(&ind)?,
                });
            }
        } else {
            let values: Vec<f64> = pool.iter().filter_map(|r| r.numeric(field)).collect();
            if values.is_empty() {
                continue;
            }
            out.push(DescriptiveRow {
                variable: field.label().to_owned(),
                group: None,
                level: field.level(),
                stats: describe(&values)?,
            });
        }
    }
    Ok(out)
}
