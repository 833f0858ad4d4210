//! Regression models for trip volatility.
//!
//! [`build_design`] dummy-codes an analysis table against a [`ModelSpec`].
//! [`fit_ols`] solves least squares through a rank-revealing Householder QR.
//! [`fit_quantile`] minimises the check loss `sum rho_q(y - X b)` with a
//! primal-dual interior-point method on the bounded dual LP
//!
//! ```text
//! max y'a   s.t.  X'a = (1 - q) X'1,  0 <= a <= 1
//! ```
//!
//! whose multipliers are the regression coefficients. Standard errors for
//! quantile fits come from a seeded pairs bootstrap.

mod bootstrap;
mod design;
mod linalg;
mod ols;
mod profile;
mod quantile;

pub use bootstrap::{bootstrap_se, BootstrapSe};
pub use design::{build_design, dummy_column_name, CategoricalSpec, DesignMatrix, ModelSpec, INTERCEPT};
pub use ols::fit_ols;
pub use profile::{quantile_profile, ProfileColumn, ProfilePoint, QuantileProfile};
pub use quantile::{
    check_loss, fit_quantile, pseudo_r2, raw_deviation, solve_quantile, QuantileConfig,
    QuantileSolution, SolverConfig,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance, against the largest singular value of the design, below
/// which a column is treated as collinear with the columns before it.
pub const ALIAS_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("no rows to model")]
    EmptyRows,
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("row `{row}`: missing value in column `{column}`")]
    MissingValue { row: String, column: String },
    #[error("row `{row}`: category `{value}` of column `{column}` is not in the model specification")]
    UnknownCategory {
        row: String,
        column: String,
        value: String,
    },
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),
    #[error("invalid design matrix: {0}")]
    InvalidDesign(String),
    #[error("under-determined fit: {n} rows for {p} estimable columns")]
    Underdetermined { n: usize, p: usize },
    #[error("quantile {0} outside (0, 1)")]
    InvalidQuantile(f64),
    #[error("interior point did not converge at q = {q} after {iterations} iterations (gap {gap:.3e})")]
    NoConvergence { q: f64, iterations: usize, gap: f64 },
    #[error("raw deviation is zero (all responses identical)")]
    ZeroRawDeviation,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("bootstrap needed {redraws} redraws for {reps} resamples")]
    TooManyRedraws { redraws: usize, reps: usize },
    #[error("quantile {q}: {source}")]
    AtQuantile {
        q: f64,
        #[source]
        source: Box<ModelError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FitKind {
    Ols,
    Quantile { q: f64 },
}

impl FitKind {
    pub fn quantile(&self) -> Option<f64> {
        match self {
            FitKind::Ols => None,
            FitKind::Quantile { q } => Some(*q),
        }
    }
}

/// Estimates and fit statistics for one model. Per-column vectors follow
/// `column_names`; aliased columns hold `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub kind: FitKind,
    pub column_names: Vec<String>,
    pub coefficients: Vec<Option<f64>>,
    pub std_errors: Vec<Option<f64>>,
    pub t_values: Vec<Option<f64>>,
    /// SSE for OLS, minimised check loss for quantile fits.
    pub objective: f64,
    /// R² for OLS, pseudo-R² for quantile fits.
    pub fit_measure: f64,
    /// Check loss of the best intercept-only model (quantile fits only).
    pub raw_deviation: Option<f64>,
    pub aliased: Vec<String>,
    pub iterations: usize,
    pub n_obs: usize,
    pub warnings: Vec<String>,
}

impl FitResult {
    pub(crate) fn t_values_for(coefficients: &[Option<f64>], std_errors: &[Option<f64>]) -> Vec<Option<f64>> {
        coefficients
            .iter()
            .zip(std_errors)
            .map(|(c, s)| match (c, s) {
                (Some(c), Some(s)) if *s > 0.0 => Some(c / s),
                _ => None,
            })
            .collect()
    }

    /// `X b` with aliased coefficients taken as zero.
    pub fn fitted_values(&self, design: &DesignMatrix) -> Vec<f64> {
        let b: Vec<f64> = self.coefficients.iter().map(|c| c.unwrap_or(0.0)).collect();
        (0..design.n_rows())
            .map(|i| (0..b.len()).map(|j| design.x[(i, j)] * b[j]).sum())
            .collect()
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        let j = self.column_names.iter().position(|c| c == name)?;
        self.coefficients[j]
    }

    pub fn to_record(&self) -> FitRecord {
        FitRecord {
            kind: match self.kind {
                FitKind::Ols => "ols",
                FitKind::Quantile { .. } => "quantile",
            }
            .to_owned(),
            q: self.kind.quantile(),
            columns: self
                .column_names
                .iter()
                .enumerate()
                .map(|(j, name)| CoefficientRecord {
                    name: name.clone(),
                    coefficient: self.coefficients[j],
                    std_error: self.std_errors[j],
                    t_value: self.t_values[j],
                })
                .collect(),
            objective: self.objective,
            raw_deviation: self.raw_deviation,
            fit_measure: self.fit_measure,
            aliased: self.aliased.clone(),
            iterations: self.iterations,
            n_obs: self.n_obs,
            warnings: self.warnings.clone(),
        }
    }
}

/// JSON shape of a [`FitResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub kind: String,
    pub q: Option<f64>,
    pub columns: Vec<CoefficientRecord>,
    pub objective: f64,
    pub raw_deviation: Option<f64>,
    pub fit_measure: f64,
    pub aliased: Vec<String>,
    pub iterations: usize,
    pub n_obs: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRecord {
    pub name: String,
    pub coefficient: Option<f64>,
    pub std_error: Option<f64>,
    pub t_value: Option<f64>,
}
