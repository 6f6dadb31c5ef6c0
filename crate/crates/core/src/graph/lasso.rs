//! Lasso by cyclic coordinate descent on sufficient statistics.
//!
//! Minimizes `0.5 * b' G b - r' b + lambda * |b|_1` for a Gram matrix `G`
//! with positive diagonal. For a design `X` and response `y` this is the
//! usual `(1 / 2n) |y - X b|^2 + lambda |b|_1` with `G = X'X / n`, `r = X'y / n`.

use ndarray::{Array1, ArrayView1, ArrayView2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoSettings {
    /// Stop when the largest coefficient change in a sweep is below this.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoSettings {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_sweeps: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LassoOutcome {
    pub sweeps: usize,
    pub converged: bool,
}

pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Solves in place, starting from the coefficients already in `beta`.
pub fn lasso_gram(
    gram: ArrayView2<f64>,
    rhs: ArrayView1<f64>,
    lambda: f64,
    beta: &mut Array1<f64>,
    settings: LassoSettings,
) -> LassoOutcome {
    let k = rhs.len();
    let mut fitted = gram.dot(beta);
    for sweep in 1..=settings.max_sweeps {
        let mut max_delta: f64 = 0.0;
        for j in 0..k {
            let gjj = gram[[j, j]];
            if gjj <= 0.0 {
                continue;
            }
            let old = beta[j];
            let partial = rhs[j] - (fitted[j] - gjj * old);
            let new = soft_threshold(partial, lambda) / gjj;
            let delta = new - old;
            if delta != 0.0 {
                beta[j] = new;
                fitted.scaled_add(delta, &gram.column(j));
                max_delta = max_delta.max(delta.abs());
            }
        }
        if max_delta < settings.tol {
            return LassoOutcome {
                sweeps: sweep,
                converged: true,
            };
        }
    }
    LassoOutcome {
        sweeps: settings.max_sweeps,
        converged: false,
    }
}

/// Data-matrix form: `(1 / 2n) |y - X b|^2 + lambda |b|_1`, no intercept.
pub fn lasso(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    lambda: f64,
    settings: LassoSettings,
) -> (Array1<f64>, LassoOutcome) {
    let n = x.nrows() as f64;
    let gram = x.t().dot(&x) / n;
    let rhs = x.t().dot(&y) / n;
    let mut beta = Array1::zeros(x.ncols());
    let out = lasso_gram(gram.view(), rhs.view(), lambda, &mut beta, settings);
    (beta, out)
}
