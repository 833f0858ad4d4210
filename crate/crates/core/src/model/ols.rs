use super::linalg::RankRevealingQr;
use super::{DesignMatrix, FitKind, FitResult, ModelError, ALIAS_TOLERANCE};

/// Ordinary least squares with classical standard errors
/// `sqrt(sigma^2 (X'X)^{-1}_jj)`, `sigma^2 = SSE / (n - p)`.
///
/// Collinear columns are aliased (reported, coefficient `None`). R² is taken
/// about the mean; a constant response gives R² = 0 with a warning.
pub fn fit_ols(design: &DesignMatrix) -> Result<FitResult, ModelError> {
    let (n, p) = design.x.shape();
    let qr = RankRevealingQr::new(&design.x, ALIAS_TOLERANCE);
    let k = qr.rank();
    if n <= k {
        return Err(ModelError::Underdetermined { n, p: k });
    }
    let beta = qr.solve(&design.y);
    let x_kept = design.x.select_columns(&qr.kept);
    let resid = &design.y - &x_kept * &beta;
    let sse = resid.norm_squared();
    let sigma2 = sse / (n - k) as f64;
    let cov = qr.unscaled_covariance();

    let mut coefficients = vec![None; p];
    let mut std_errors = vec![None; p];
    for (slot, &j) in qr.kept.iter().enumerate() {
        coefficients[j] = Some(beta[slot]);
        std_errors[j] = Some((sigma2 * cov[(slot, slot)]).max(0.0).sqrt());
    }

    let mean = design.y.mean();
    let tss: f64 = design.y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let mut warnings = Vec::new();
    let r2 = if tss > 0.0 {
        (1.0 - sse / tss).clamp(0.0, 1.0)
    } else {
        warnings.push("total sum of squares is zero; R² reported as 0".to_owned());
        0.0
    };

    let t_values = FitResult::t_values_for(&coefficients, &std_errors);
    Ok(FitResult {
        kind: FitKind::Ols,
        column_names: design.column_names.clone(),
        coefficients,
        std_errors,
        t_values,
        objective: sse,
        fit_measure: r2,
        raw_deviation: None,
        aliased: qr.aliased.iter().map(|&j| design.column_names[j].clone()).collect(),
        iterations: 0,
        n_obs: n,
        warnings,
    })
}
