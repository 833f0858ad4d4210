//! Quantile regression by a Mehrotra predictor-corrector interior-point
//! method on the bounded dual
//!
//! ```text
//! max y'a   s.t.  X'a = (1 - q) X'1,  0 <= a <= 1.
//! ```
//!
//! With `s = 1 - a`, multipliers `b` (free) for the equality and `z, w >= 0`
//! for the two bounds, optimality reads `y - X b = w - z`, `a z = 0`,
//! `s w = 0`. The equality multipliers `b` are the regression coefficients and
//! the duality gap is exactly `a'z + s'w`. Each Newton step reduces to a
//! `p x p` system `X' D^{-1} X` with `D = z/a + w/s`.
//!
//! Interior iterates approach the optimal face from inside, so a converged
//! solution is finally snapped to the basic solution through the `p`
//! observations with the smallest residuals whenever that vertex is at least
//! as good.

use super::bootstrap::bootstrap_se;
use super::linalg::RankRevealingQr;
use super::{DesignMatrix, FitKind, FitResult, ModelError, ALIAS_TOLERANCE};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Fraction of the distance to the boundary taken per step.
const STEP_FRACTION: f64 = 0.99995;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Stop when the duality gap falls below `tolerance * (1 + |objective|)`.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileConfig {
    pub solver: SolverConfig,
    /// Pairs-bootstrap resamples for standard errors; 0 skips them.
    pub bootstrap_reps: usize,
    pub seed: u64,
}

impl Default for QuantileConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            bootstrap_reps: 200,
            seed: 0,
        }
    }
}

/// Point estimate of one quantile fit.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileSolution {
    /// Per design column; `None` for aliased columns.
    pub coefficients: Vec<Option<f64>>,
    pub aliased: Vec<usize>,
    pub objective: f64,
    pub iterations: usize,
    pub gap: f64,
}

fn check_q(q: f64) -> Result<(), ModelError> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidQuantile(q))
    }
}

#[inline]
fn rho(q: f64, r: f64) -> f64 {
    if r >= 0.0 {
        q * r
    } else {
        (q - 1.0) * r
    }
}

/// Asymmetric absolute loss: `q * e` for `e >= 0`, `(1 - q) * (-e)` otherwise.
pub fn check_loss(q: f64, residuals: &[f64]) -> Result<f64, ModelError> {
    check_q(q)?;
    if residuals.iter().any(|r| !r.is_finite()) {
        return Err(ModelError::InvalidParameter("non-finite residual".into()));
    }
    Ok(residuals.iter().map(|&r| rho(q, r)).sum())
}

/// Lower empirical `q`-quantile (the `ceil(n q)`-th order statistic).
pub(crate) fn lower_quantile(y: &[f64], q: f64) -> f64 {
    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // guard against n*q landing a rounding error above an integer
    let k = ((n as f64 * q) - 1e-12 * n as f64).ceil().max(1.0) as usize;
    sorted[k.min(n) - 1]
}

/// Check loss of the best intercept-only model at `q`.
pub fn raw_deviation(y: &[f64], q: f64) -> Result<f64, ModelError> {
    check_q(q)?;
    if y.is_empty() {
        return Err(ModelError::EmptyRows);
    }
    let m = lower_quantile(y, q);
    Ok(y.iter().map(|&v| rho(q, v - m)).sum())
}

/// `1 - min_deviation / raw_deviation`.
pub fn pseudo_r2(min_deviation: f64, raw_deviation: f64) -> Result<f64, ModelError> {
    if !(min_deviation >= 0.0 && min_deviation.is_finite()) {
        return Err(ModelError::InvalidParameter(format!(
            "minimised deviation {min_deviation} must be finite and >= 0"
        )));
    }
    if raw_deviation == 0.0 {
        return Err(ModelError::ZeroRawDeviation);
    }
    if !(raw_deviation > 0.0 && raw_deviation.is_finite()) {
        return Err(ModelError::InvalidParameter(format!(
            "raw deviation {raw_deviation} must be finite and > 0"
        )));
    }
    Ok(1.0 - min_deviation / raw_deviation)
}

fn residual_loss(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>, q: f64) -> f64 {
    (y - x * beta).iter().map(|&r| rho(q, r)).sum()
}

/// Largest step in `[0, 1]` keeping `v + t dv >= 0`, shrunk by `STEP_FRACTION`.
fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    let mut t = f64::INFINITY;
    for (vi, di) in v.iter().zip(dv.iter()) {
        if *di < 0.0 {
            t = t.min(-vi / di);
        }
    }
    (STEP_FRACTION * t).min(1.0)
}

struct Direction {
    da: DVector<f64>,
    db: DVector<f64>,
    dz: DVector<f64>,
    dw: DVector<f64>,
}

/// Solves the reduced `p x p` system via Cholesky, with a small ridge if the
/// normal matrix has lost positive definiteness to rounding.
fn factor(m: DMatrix<f64>) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    if let Some(c) = m.clone().cholesky() {
        return Some(c);
    }
    let scale = m.diagonal().max().max(1.0);
    let mut ridge = 1e-14 * scale;
    for _ in 0..8 {
        let mut reg = m.clone();
        for i in 0..reg.nrows() {
            reg[(i, i)] += ridge;
        }
        if let Some(c) = reg.cholesky() {
            return Some(c);
        }
        ridge *= 100.0;
    }
    None
}

/// Interior-point solve on a full-column-rank `x`. Returns coefficients,
/// iterations and the final gap.
fn interior_point(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    q: f64,
    cfg: &SolverConfig,
    start: DVector<f64>,
) -> Result<(DVector<f64>, usize, f64), ModelError> {
    let n = x.nrows();
    let ones = DVector::from_element(n, 1.0);
    let rhs_b = x.tr_mul(&ones) * (1.0 - q);

    let mut a = DVector::from_element(n, 1.0 - q);
    let mut s = DVector::from_element(n, q);
    let mut beta = start;
    let r0 = y - x * &beta;
    let mean_abs_r = r0.iter().map(|v| v.abs()).sum::<f64>() / n as f64;
    let mean_abs_y = y.iter().map(|v| v.abs()).sum::<f64>() / n as f64;
    let delta = mean_abs_r.max(1e-3 * (1.0 + mean_abs_y));
    let mut z = r0.map(|r| (-r).max(0.0) + delta);
    let mut w = r0.map(|r| r.max(0.0) + delta);

    let y_sum = y.sum();
    let feas_tol = 1e-8 * (1.0 + rhs_b.amax());
    // Once X'a = (1 - q) X'1 holds, y'a - (1 - q) 1'y is a lower bound on
    // the check loss, and the distance to it certifies optimality of beta.
    let certificate = |a: &DVector<f64>, beta: &DVector<f64>| {
        let objective = residual_loss(x, y, beta, q);
        let feasible = (&rhs_b - x.tr_mul(a)).amax() <= feas_tol;
        let gap = (objective - (y.dot(a) - (1.0 - q) * y_sum)).max(0.0);
        (feasible && gap <= cfg.tolerance * (1.0 + objective.abs()), gap)
    };

    for iter in 0..cfg.max_iterations {
        let (done, gap) = certificate(&a, &beta);
        if done {
            return Ok((beta, iter, gap));
        }
        let comp = a.dot(&z) + s.dot(&w);
        let mu = comp / (2 * n) as f64;
        let rp = &rhs_b - x.tr_mul(&a);
        let rd = y - x * &beta + &z - &w;

        let dinv = DVector::from_fn(n, |i, _| 1.0 / (z[i] / a[i] + w[i] / s[i]));
        let mut xd = x.clone();
        for (i, mut row) in xd.row_iter_mut().enumerate() {
            row *= dinv[i];
        }
        let chol = factor(x.tr_mul(&xd)).ok_or(ModelError::NoConvergence {
            q,
            iterations: iter,
            gap,
        })?;

        let solve = |rhs1: &DVector<f64>, rhs2: &DVector<f64>| {
            let g = DVector::from_fn(n, |i, _| rhs1[i] / a[i] - rhs2[i] / s[i]);
            let rg = &rd + &g;
            let t = rg.component_mul(&dinv);
            let db = chol.solve(&(x.tr_mul(&t) - &rp));
            let da = (&rg - x * &db).component_mul(&dinv);
            let dz = DVector::from_fn(n, |i, _| (rhs1[i] - z[i] * da[i]) / a[i]);
            let dw = DVector::from_fn(n, |i, _| (rhs2[i] + w[i] * da[i]) / s[i]);
            Direction { da, db, dz, dw }
        };

        // predictor
        let aff = solve(&(-a.component_mul(&z)), &(-s.component_mul(&w)));
        let ds_aff = -&aff.da;
        let tp = max_step(&a, &aff.da).min(max_step(&s, &ds_aff));
        let td = max_step(&z, &aff.dz).min(max_step(&w, &aff.dw));
        let gap_aff = (&a + &aff.da * tp).dot(&(&z + &aff.dz * td))
            + (&s + &ds_aff * tp).dot(&(&w + &aff.dw * td));
        let sigma = (gap_aff / comp).powi(3).min(1.0);

        // corrector
        let target = sigma * mu;
        let rhs1 = DVector::from_fn(n, |i, _| target - a[i] * z[i] - aff.da[i] * aff.dz[i]);
        let rhs2 = DVector::from_fn(n, |i, _| target - s[i] * w[i] - ds_aff[i] * aff.dw[i]);
        let dir = solve(&rhs1, &rhs2);
        let ds = -&dir.da;
        let tp = max_step(&a, &dir.da).min(max_step(&s, &ds));
        let td = max_step(&z, &dir.dz).min(max_step(&w, &dir.dw));

        a.axpy(tp, &dir.da, 1.0);
        s.axpy(tp, &ds, 1.0);
        beta.axpy(td, &dir.db, 1.0);
        z.axpy(td, &dir.dz, 1.0);
        w.axpy(td, &dir.dw, 1.0);
    }
    let (done, gap) = certificate(&a, &beta);
    if done {
        return Ok((beta, cfg.max_iterations, gap));
    }
    Err(ModelError::NoConvergence {
        q,
        iterations: cfg.max_iterations,
        gap,
    })
}

/// Basic solution through the `p` independent observations with the smallest
/// absolute residuals at `beta`.
fn nearest_vertex(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>) -> Option<DVector<f64>> {
    let (n, p) = x.shape();
    let r = y - x * beta;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| r[i].abs().total_cmp(&r[j].abs()).then(i.cmp(&j)));

    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(p);
    let mut rows = Vec::with_capacity(p);
    for i in order {
        let xi: DVector<f64> = x.row(i).transpose();
        let norm = xi.norm();
        if norm == 0.0 {
            continue;
        }
        let mut v = xi.clone();
        for b in &basis {
            let c = b.dot(&v);
            v.axpy(-c, b, 1.0);
        }
        let vn = v.norm();
        if vn > 1e-8 * norm {
            basis.push(v / vn);
            rows.push(i);
            if rows.len() == p {
                break;
            }
        }
    }
    if rows.len() < p {
        return None;
    }
    let xb = x.select_rows(&rows);
    let yb = y.select_rows(&rows);
    xb.lu().solve(&yb)
}

pub(crate) struct CoreFit {
    pub solution: QuantileSolution,
    pub kept: Vec<usize>,
}

pub(crate) fn solve_core(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    q: f64,
    cfg: &SolverConfig,
) -> Result<CoreFit, ModelError> {
    check_q(q)?;
    let (n, p) = x.shape();
    if n == 0 {
        return Err(ModelError::EmptyRows);
    }
    let qr = RankRevealingQr::new(x, ALIAS_TOLERANCE);
    let k = qr.rank();
    if n <= k {
        return Err(ModelError::Underdetermined { n, p: k });
    }
    let xk = x.select_columns(&qr.kept);
    let start = qr.solve(y);
    let (mut beta, iterations, gap) = interior_point(&xk, y, q, cfg, start)?;
    let mut objective = residual_loss(&xk, y, &beta, q);
    if let Some(v) = nearest_vertex(&xk, y, &beta) {
        let vloss = residual_loss(&xk, y, &v, q);
        if vloss.is_finite() && vloss <= objective + 1e-12 * (1.0 + objective) {
            beta = v;
            objective = vloss;
        }
    }
    let mut coefficients = vec![None; p];
    for (slot, &j) in qr.kept.iter().enumerate() {
        coefficients[j] = Some(beta[slot]);
    }
    Ok(CoreFit {
        solution: QuantileSolution {
            coefficients,
            aliased: qr.aliased.clone(),
            objective: objective.max(0.0),
            iterations,
            gap,
        },
        kept: qr.kept,
    })
}

/// Quantile-regression point estimate without standard errors.
pub fn solve_quantile(
    design: &DesignMatrix,
    q: f64,
    cfg: &SolverConfig,
) -> Result<QuantileSolution, ModelError> {
    solve_core(&design.x, &design.y, q, cfg).map(|c| c.solution)
}

/// Full quantile fit: coefficients, bootstrap standard errors, check loss,
/// intercept-only check loss and pseudo-R².
pub fn fit_quantile(design: &DesignMatrix, q: f64, config: &QuantileConfig) -> Result<FitResult, ModelError> {
    let sol = solve_quantile(design, q, &config.solver)?;
    let y: Vec<f64> = design.y.iter().copied().collect();
    let raw = raw_deviation(&y, q)?;
    let mut warnings = Vec::new();
    let fit_measure = if raw > 0.0 {
        let r2 = pseudo_r2(sol.objective, raw)?;
        // the intercept-only model is feasible, so only rounding can push this below 0
        if r2 < 0.0 && r2 > -1e-9 {
            0.0
        } else {
            r2
        }
    } else {
        warnings.push("raw deviation is zero; pseudo-R² reported as 0".to_owned());
        0.0
    };
    let std_errors = if config.bootstrap_reps > 0 {
        bootstrap_se(design, q, config.bootstrap_reps, config.seed, &config.solver)?.std_errors
    } else {
        vec![None; design.n_cols()]
    };
    let t_values = FitResult::t_values_for(&sol.coefficients, &std_errors);
    Ok(FitResult {
        kind: FitKind::Quantile { q },
        column_names: design.column_names.clone(),
        coefficients: sol.coefficients,
        std_errors,
        t_values,
        objective: sol.objective,
        fit_measure,
        raw_deviation: Some(raw),
        aliased: sol.aliased.iter().map(|&j| design.column_names[j].clone()).collect(),
        iterations: sol.iterations,
        n_obs: design.n_rows(),
        warnings,
    })
}
