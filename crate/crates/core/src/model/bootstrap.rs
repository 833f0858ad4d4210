use super::quantile::{solve_core, SolverConfig};
use super::{DesignMatrix, ModelError, ALIAS_TOLERANCE};
use crate::rng::{stream_rng, uniform_index};
use rayon::prelude::*;

/// Pairs-bootstrap standard errors for one quantile fit.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapSe {
    /// Per design column; `None` for columns aliased in the full sample.
    pub std_errors: Vec<Option<f64>>,
    /// Resamples discarded because they were under-determined or aliased a
    /// different set of columns than the full sample.
    pub redraws: usize,
}

/// Resamples rows with replacement `reps` times, refits the `q`-quantile
/// regression on each and returns the sample standard deviation of every
/// coefficient across resamples.
///
/// Resample `b` draws from its own stream derived from `(seed, b)`, so the
/// result does not depend on how resamples are scheduled across threads.
pub fn bootstrap_se(
    design: &DesignMatrix,
    q: f64,
    reps: usize,
    seed: u64,
    solver: &SolverConfig,
) -> Result<BootstrapSe, ModelError> {
    if reps == 0 {
        return Err(ModelError::InvalidParameter("bootstrap needs at least one resample".into()));
    }
    let full = super::linalg::RankRevealingQr::new(&design.x, ALIAS_TOLERANCE);
    let n = design.n_rows();
    if n <= full.rank() {
        return Err(ModelError::Underdetermined { n, p: full.rank() });
    }
    let max_redraws = 10 * reps;

    let draws: Vec<(Vec<f64>, usize)> = (0..reps)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b as u64);
            let mut redraws = 0;
            loop {
                let idx: Vec<usize> = (0..n).map(|_| uniform_index(&mut rng, n)).collect();
                let sample = design.select_rows(&idx);
                match solve_core(&sample.x, &sample.y, q, solver) {
                    Ok(fit) if fit.kept == full.kept => {
                        let beta = full
                            .kept
                            .iter()
                            .map(|&j| fit.solution.coefficients[j].expect("kept column"))
                            .collect();
                        return Ok((beta, redraws));
                    }
                    Ok(_) | Err(ModelError::Underdetermined { .. }) => {
                        redraws += 1;
                        if redraws > max_redraws {
                            return Err(ModelError::TooManyRedraws { redraws, reps });
                        }
                    }
                    Err(e) => return Err(e),
                }
            }
        })
        .collect::<Result<_, _>>()?;

    let redraws: usize = draws.iter().map(|(_, r)| r).sum();
    if redraws > max_redraws {
        return Err(ModelError::TooManyRedraws { redraws, reps });
    }

    let mut std_errors = vec![None; design.n_cols()];
    for (slot, &j) in full.kept.iter().enumerate() {
        let values: Vec<f64> = draws.iter().map(|(beta, _)| beta[slot]).collect();
        std_errors[j] = Some(sample_sd(&values));
    }
    Ok(BootstrapSe { std_errors, redraws })
}

/// Standard deviation with divisor `m - 1`; a single resample gives 0.
fn sample_sd(values: &[f64]) -> f64 {
    let m = values.len();
    if m < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / m as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (m - 1) as f64).sqrt()
}
