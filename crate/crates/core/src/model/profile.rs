use super::design::validate_quantile_grid;
use super::quantile::{fit_quantile, QuantileConfig, SolverConfig};
use super::{fit_ols, DesignMatrix, FitResult, ModelError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Normal critical value for two-sided 95% bounds.
const Z_95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub q: f64,
    /// `None` when the column is aliased.
    pub coefficient: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileColumn {
    pub name: String,
    pub ols_reference: Option<f64>,
    pub points: Vec<ProfilePoint>,
}

/// Coefficient trajectories across a grid of quantiles.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileProfile {
    pub quantiles: Vec<f64>,
    pub columns: Vec<ProfileColumn>,
    pub ols: FitResult,
    /// One fit per grid point, in grid order.
    pub fits: Vec<FitResult>,
}

/// Fits OLS plus one quantile regression per grid point. Bounds are
/// `coefficient ± 1.96 se` with bootstrap standard errors; every quantile
/// uses the same bootstrap seed. With `reps == 0` the bounds collapse onto
/// the coefficient.
pub fn quantile_profile(
    design: &DesignMatrix,
    quantiles: &[f64],
    reps: usize,
    seed: u64,
    solver: &SolverConfig,
) -> Result<QuantileProfile, ModelError> {
    validate_quantile_grid(quantiles)?;
    let ols = fit_ols(design)?;
    let config = QuantileConfig {
        solver: *solver,
        bootstrap_reps: reps,
        seed,
    };
    let fits: Vec<FitResult> = quantiles
        .par_iter()
        .map(|&q| {
            fit_quantile(design, q, &config).map_err(|e| ModelError::AtQuantile { q, source: Box::new(e) })
        })
        .collect::<Result<_, _>>()?;

    let columns = design
        .column_names
        .iter()
        .enumerate()
        .map(|(j, name)| ProfileColumn {
            name: name.clone(),
            ols_reference: ols.coefficients[j],
            points: fits
                .iter()
                .zip(quantiles)
                .map(|(fit, &q)| {
                    let coefficient = fit.coefficients[j];
                    let half = fit.std_errors[j].unwrap_or(0.0) * Z_95;
                    ProfilePoint {
                        q,
                        coefficient,
                        lower: coefficient.map(|c| c - half),
                        upper: coefficient.map(|c| c + half),
                    }
                })
                .collect(),
        })
        .collect();

    Ok(QuantileProfile {
        quantiles: quantiles.to_vec(),
        columns,
        ols,
        fits,
    })
}
