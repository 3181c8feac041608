//! Reference solvers written with plain loops, independent of nalgebra's
//! factorizations.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Minimizes `(1/t0)||y - X^T f||^2 + (lambda/(2 t0))||f||^2` by conjugate
/// gradient descent on the loss, never forming `X X^T`.
pub fn ridge_by_descent(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Vec<f64> {
    let (n, t0) = (x.nrows(), x.ncols());
    let t0f = t0 as f64;
    let xv: Vec<Vec<f64>> = (0..n).map(|i| (0..t0).map(|t| x[(i, t)]).collect()).collect();
    let hess = |v: &[f64]| -> Vec<f64> {
        let xt_v: Vec<f64> = (0..t0).map(|t| (0..n).map(|i| xv[i][t] * v[i]).sum()).collect();
        (0..n)
            .map(|i| 2.0 / t0f * (0..t0).map(|t| xv[i][t] * xt_v[t]).sum::<f64>() + lambda / t0f * v[i])
            .collect()
    };
    let grad = |f: &[f64]| -> Vec<f64> {
        let resid: Vec<f64> = (0..t0).map(|t| (0..n).map(|i| xv[i][t] * f[i]).sum::<f64>() - y[t]).collect();
        (0..n)
            .map(|i| 2.0 / t0f * (0..t0).map(|t| xv[i][t] * resid[t]).sum::<f64>() + lambda / t0f * f[i])
            .collect()
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let mut f = vec![0.0; n];
    for _restart in 0..50 {
        let mut r: Vec<f64> = grad(&f).iter().map(|g| -g).collect();
        let mut p = r.clone();
        let mut rr = dot(&r, &r);
        if rr.sqrt() < 1e-15 {
            break;
        }
        for _ in 0..2 * n {
            let hp = hess(&p);
            let alpha = rr / dot(&p, &hp);
            for i in 0..n {
                f[i] += alpha * p[i];
                r[i] -= alpha * hp[i];
            }
            let rr_new = dot(&r, &r);
            if rr_new.sqrt() < 1e-15 {
                break;
            }
            let beta = rr_new / rr;
            for i in 0..n {
                p[i] = r[i] + beta * p[i];
            }
            rr = rr_new;
        }
    }
    f
}

/// Solves `A z = b` by Gaussian elimination with partial pivoting.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let m = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= m * a[col][k];
            }
            b[row] -= m * b[col];
        }
    }
    let mut z = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * z[k]).sum();
        z[row] = (b[row] - s) / a[row][row];
    }
    z
}

/// Ridge coefficients with effective regularizer `rho` by elimination on
/// `(X X^T + rho I) f = X y`.
pub fn ridge_by_elimination(x: &DMatrix<f64>, y: &DVector<f64>, rho: f64) -> Vec<f64> {
    let (n, t0) = (x.nrows(), x.ncols());
    let a = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..t0).map(|t| x[(i, t)] * x[(j, t)]).sum::<f64>() + if i == j { rho } else { 0.0 })
                .collect()
        })
        .collect();
    let b = (0..n).map(|i| (0..t0).map(|t| x[(i, t)] * y[t]).sum()).collect();
    solve_dense(a, b)
}

/// Composite Simpson rule on `[a, b]` with `m` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for k in 1..m {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}
