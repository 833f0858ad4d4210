//! Reference implementations written directly from the textbook formulas,
//! sharing no code with the library. Integration and acceptance tests compare
//! the library against these.

#![allow(dead_code)]

/// Sample standard deviation of `100 (ln x_i - ln x_{i-1})`; `None` when
/// there are fewer than two returns.
pub fn naive_volatility(speeds: &[f64]) -> Option<f64> {
    let logs: Vec<f64> = speeds.iter().map(|s| s.ln()).collect();
    let mut r = Vec::new();
    for i in 1..logs.len() {
        r.push(100.0 * (logs[i] - logs[i - 1]));
    }
    if r.len() < 2 {
        return None;
    }
    let m = r.len() as f64;
    let mut mean = 0.0;
    for v in &r {
        mean += v;
    }
    mean /= m;
    let mut ss = 0.0;
    for v in &r {
        ss += (v - mean).powi(2);
    }
    Some((ss / (m - 1.0)).sqrt())
}

/// Solves `A z = b` by Gauss-Jordan elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        let d = a[col][col];
        assert!(d.abs() > 1e-300, "singular system");
        for row in 0..n {
            if row != col {
                let f = a[row][col] / d;
                if f != 0.0 {
                    for k in col..n {
                        a[row][k] -= f * a[col][k];
                    }
                    b[row] -= f * b[col];
                }
            }
        }
    }
    (0..n).map(|i| b[i] / a[i][i]).collect()
}

/// `(X'X)^{-1} X'y` for row-major `x` (intercept column included by caller).
pub fn normal_equations(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = x[0].len();
    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for (row, &yi) in x.iter().zip(y) {
        for a in 0..p {
            xty[a] += row[a] * yi;
            for b in 0..p {
                xtx[a][b] += row[a] * row[b];
            }
        }
    }
    gauss_solve(xtx, xty)
}

/// Inverse of a small symmetric positive-definite matrix, column by column.
pub fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let e: Vec<f64> = (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect();
            gauss_solve(a.to_vec(), e)
        })
        .collect();
    (0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect()
}

pub fn check_loss_line(xs: &[f64], ys: &[f64], q: f64, b0: f64, b1: f64) -> f64 {
    let mut total = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let e = y - b0 - b1 * x;
        total += if e >= 0.0 { q * e } else { (1.0 - q) * -e };
    }
    total
}

/// Best check loss of `y = b0 + b1 x` over a lattice: a 201 x 201 grid on a
/// box that contains every line through two data points, then four rounds of
/// 41 x 41 grids zooming tenfold around the incumbent.
pub fn lattice_min(xs: &[f64], ys: &[f64], q: f64) -> f64 {
    let mut lo1 = f64::INFINITY;
    let mut hi1 = f64::NEG_INFINITY;
    let mut lo0 = f64::INFINITY;
    let mut hi0 = f64::NEG_INFINITY;
    for i in 0..xs.len() {
        for j in 0..xs.len() {
            if xs[i] != xs[j] {
                let b1 = (ys[j] - ys[i]) / (xs[j] - xs[i]);
                let b0 = ys[i] - b1 * xs[i];
                lo1 = lo1.min(b1);
                hi1 = hi1.max(b1);
                lo0 = lo0.min(b0);
                hi0 = hi0.max(b0);
            }
        }
    }
    let mut best = (f64::INFINITY, 0.0, 0.0);
    let scan = |c0: f64, h0: f64, c1: f64, h1: f64, k: i32, best: &mut (f64, f64, f64)| {
        for a in -k..=k {
            for b in -k..=k {
                let b0 = c0 + h0 * a as f64;
                let b1 = c1 + h1 * b as f64;
                let l = check_loss_line(xs, ys, q, b0, b1);
                if l < best.0 {
                    *best = (l, b0, b1);
                }
            }
        }
    };
    let (c0, c1) = ((lo0 + hi0) / 2.0, (lo1 + hi1) / 2.0);
    let (mut h0, mut h1) = ((hi0 - lo0) / 200.0 + 1e-12, (hi1 - lo1) / 200.0 + 1e-12);
    scan(c0, h0, c1, h1, 100, &mut best);
    for _ in 0..4 {
        let (_, b0, b1) = best;
        h0 /= 10.0;
        h1 /= 10.0;
        scan(b0, h0, b1, h1, 20, &mut best);
    }
    best.0
}

/// Exact minimum check loss of a one-regressor line, by enumerating every
/// line through two observations (an optimum always passes through two).
pub fn vertex_min(xs: &[f64], ys: &[f64], q: f64) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..xs.len() {
        for j in (i + 1)..xs.len() {
            if xs[i] != xs[j] {
                let b1 = (ys[j] - ys[i]) / (xs[j] - xs[i]);
                let b0 = ys[i] - b1 * xs[i];
                best = best.min(check_loss_line(xs, ys, q, b0, b1));
            }
        }
    }
    best
}

/// Type-7 (linear interpolation) sample quantile of sorted data.
pub fn type7_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() as f64 - 1.0) * p;
    let i = h.floor() as usize;
    if i + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[i] + (h - i as f64) * (sorted[i + 1] - sorted[i])
}

/// Freedman-Diaconis bin count `ceil(range / (2 IQR n^(-1/3)))`.
pub fn fd_bin_count(values: &[f64]) -> usize {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len() as f64;
    let iqr = type7_quantile(&v, 0.75) - type7_quantile(&v, 0.25);
    let h = 2.0 * iqr / n.cbrt();
    ((v[v.len() - 1] - v[0]) / h).ceil() as usize
}

/// Product-moment correlation in the raw-sums form.
pub fn pearson_sums(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sx += a;
        sy += b;
        sxx += a * a;
        syy += b * b;
        sxy += a * b;
    }
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

/// Standard normal quantile from an external implementation.
pub fn z_quantile(p: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(p)
}
