//! Householder QR that keeps column order and defers collinear columns.
//!
//! Columns are processed left to right. A column whose component orthogonal
//! to the already accepted columns has norm at most `tol * sigma_max(X)` is
//! marked aliased and skipped, so the earliest of a collinear group survives.

use nalgebra::{DMatrix, DVector};

pub(crate) struct RankRevealingQr {
    /// Accepted column indices, in original order.
    pub kept: Vec<usize>,
    pub aliased: Vec<usize>,
    /// Upper-triangular factor over the kept columns.
    pub r: DMatrix<f64>,
    /// Householder vectors (one per kept column) acting on rows `k..n`.
    reflectors: Vec<DVector<f64>>,
}

/// Largest singular value of `x`, from the top eigenvalue of `X'X`.
pub(crate) fn largest_singular_value(x: &DMatrix<f64>) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let gram = x.tr_mul(x);
    let eig = gram.symmetric_eigenvalues();
    eig.iter().copied().fold(0.0, f64::max).sqrt()
}

impl RankRevealingQr {
    pub fn new(x: &DMatrix<f64>, rel_tol: f64) -> Self {
        let (n, p) = x.shape();
        let tol = rel_tol * largest_singular_value(x);
        let mut a = x.clone();
        let mut kept = Vec::new();
        let mut aliased = Vec::new();
        let mut reflectors = Vec::new();

        for j in 0..p {
            let k = kept.len();
            if k == n {
                aliased.push(j);
                continue;
            }
            let tail = a.view((k, j), (n - k, 1));
            let norm = tail.norm();
            if norm <= tol || norm == 0.0 {
                aliased.push(j);
                continue;
            }
            let alpha = if tail[0] > 0.0 { -norm } else { norm };
            let mut v: DVector<f64> = tail.column(0).into_owned();
            v[0] -= alpha;
            let vv = v.norm_squared();
            if vv > 0.0 {
                for c in j..p {
                    let mut col = a.column_mut(c);
                    let mut col = col.rows_mut(k, n - k);
                    let proj = 2.0 * v.dot(&col) / vv;
                    col.axpy(-proj, &v, 1.0);
                }
            }
            a[(k, j)] = alpha;
            reflectors.push(v);
            kept.push(j);
        }

        let rank = kept.len();
        let r = DMatrix::from_fn(rank, rank, |row, col| {
            if row <= col {
                a[(row, kept[col])]
            } else {
                0.0
            }
        });
        Self {
            kept,
            aliased,
            r,
            reflectors,
        }
    }

    pub fn rank(&self) -> usize {
        self.kept.len()
    }

    /// `Q' y`.
    pub fn qt_mul(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut out = y.clone();
        let n = out.len();
        for (k, v) in self.reflectors.iter().enumerate() {
            let vv = v.norm_squared();
            if vv == 0.0 {
                continue;
            }
            let mut tail = out.rows_mut(k, n - k);
            let proj = 2.0 * v.dot(&tail) / vv;
            tail.axpy(-proj, v, 1.0);
        }
        out
    }

    /// Least-squares coefficients for the kept columns.
    pub fn solve(&self, y: &DVector<f64>) -> DVector<f64> {
        let qty = self.qt_mul(y);
        let k = self.rank();
        let rhs = qty.rows(0, k).into_owned();
        self.r
            .solve_upper_triangular(&rhs)
            .expect("non-zero diagonal by construction")
    }

    /// `(R'R)^{-1} = (X_kept' X_kept)^{-1}`.
    pub fn unscaled_covariance(&self) -> DMatrix<f64> {
        let k = self.rank();
        let rinv = self
            .r
            .solve_upper_triangular(&DMatrix::identity(k, k))
            .expect("non-zero diagonal by construction");
        &rinv * rinv.transpose()
    }
}
