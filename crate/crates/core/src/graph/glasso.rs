//! Graphical lasso by blockwise coordinate descent on the working covariance.
//!
//! Maximizes `log det(Omega) - tr(S Omega) - lambda * sum_{i,j} |Omega_ij|`.
//! The diagonal is penalized as well, so the working covariance keeps
//! `W_ii = S_ii + lambda`; this keeps the problem well posed when `S` is
//! singular, as CLR covariances always are.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::lasso::{lasso_gram, LassoSettings};
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlassoSettings {
    /// Convergence threshold on the largest elementwise change of `W` per sweep.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GlassoSettings {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionEstimate {
    pub omega: Array2<f64>,
    pub lambda: f64,
    /// Penalized log-likelihood at `omega`.
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl PrecisionEstimate {
    /// Off-diagonal support of the precision matrix.
    pub fn support(&self) -> Array2<u8> {
        let om = &self.omega;
        super::network::adjacency_from(om.nrows(), |i, j| om[[i, j]] != 0.0)
    }
}

/// Solver state that can seed the next fit along a decreasing penalty path.
#[derive(Debug, Clone)]
pub struct GlassoState {
    w: Array2<f64>,
    /// Column `j` holds the regression coefficients of node `j` on the others.
    beta: Array2<f64>,
}

pub fn graphical_lasso(
    s: ArrayView2<f64>,
    lambda: f64,
    settings: GlassoSettings,
) -> Result<PrecisionEstimate> {
    fit(s, lambda, settings, None, None).map(|(est, _)| est)
}

/// Fit along `lambdas` (expected decreasing), warm-starting each from the previous.
pub fn graphical_lasso_path(
    s: ArrayView2<f64>,
    lambdas: &[f64],
    settings: GlassoSettings,
) -> Result<Vec<PrecisionEstimate>> {
    let mut state: Option<GlassoState> = None;
    let mut out = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let (est, next) = fit(s, lambda, settings, state.as_ref(), None)?;
        state = Some(next);
        out.push(est);
    }
    Ok(out)
}

/// Path fit that records a failure at one penalty and carries on from the last
/// good state. Tiny penalties on singular covariances can lose positive
/// definiteness numerically; callers decide how to treat those entries.
pub(crate) fn graphical_lasso_path_lenient(
    s: ArrayView2<f64>,
    lambdas: &[f64],
    settings: GlassoSettings,
) -> Vec<Result<PrecisionEstimate>> {
    let mut state: Option<GlassoState> = None;
    lambdas
        .iter()
        .map(|&lambda| {
            let (est, next) = fit(s, lambda, settings, state.as_ref(), None)?;
            state = Some(next);
            Ok(est)
        })
        .collect()
}

/// Like [`graphical_lasso`], additionally recording the objective after every sweep.
pub fn graphical_lasso_traced(
    s: ArrayView2<f64>,
    lambda: f64,
    settings: GlassoSettings,
) -> Result<(PrecisionEstimate, Vec<f64>)> {
    let mut trace = Vec::new();
    let (est, _) = fit(s, lambda, settings, None, Some(&mut trace))?;
    Ok((est, trace))
}

fn fit(
    s: ArrayView2<f64>,
    lambda: f64,
    settings: GlassoSettings,
    warm: Option<&GlassoState>,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<(PrecisionEstimate, GlassoState)> {
    let p = s.nrows();
    if s.ncols() != p {
        return Err(Error::Solver("covariance matrix must be square".into()));
    }
    if !(lambda >= 0.0) {
        return Err(Error::Solver(format!("penalty must be nonnegative, got {lambda}")));
    }
    for i in 0..p {
        if !(s[[i, i]] > 0.0) {
            return Err(Error::Solver(format!("nonpositive diagonal entry at {i}")));
        }
    }
    if p == 1 {
        let omega = Array2::from_elem((1, 1), 1.0 / (s[[0, 0]] + lambda));
        let objective = objective(s, omega.view(), lambda)?;
        let state = GlassoState {
            w: s.to_owned() + lambda,
            beta: Array2::zeros((0, 1)),
        };
        return Ok((
            PrecisionEstimate {
                omega,
                lambda,
                objective,
                converged: true,
                iterations: 0,
            },
            state,
        ));
    }

    let (mut w, mut beta) = match warm {
        Some(st) if st.w.nrows() == p => (st.w.clone(), st.beta.clone()),
        _ => (s.to_owned(), Array2::zeros((p - 1, p))),
    };
    for i in 0..p {
        w[[i, i]] = s[[i, i]] + lambda;
    }
    let inner = LassoSettings {
        tol: (settings.tol * 1e-3).min(1e-8),
        max_sweeps: 1000,
    };

    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=settings.max_iter {
        iterations = it;
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            let others: Vec<usize> = (0..p).filter(|&k| k != j).collect();
            let w11 = w.select(Axis(0), &others).select(Axis(1), &others);
            let s12: Array1<f64> = others.iter().map(|&k| s[[k, j]]).collect();
            let mut b = beta.column(j).to_owned();
            lasso_gram(w11.view(), s12.view(), lambda, &mut b, inner);
            let w12 = w11.dot(&b);
            for (idx, &k) in others.iter().enumerate() {
                max_change = max_change.max((w[[k, j]] - w12[idx]).abs());
                w[[k, j]] = w12[idx];
                w[[j, k]] = w12[idx];
            }
            beta.column_mut(j).assign(&b);
        }
        if let Some(tr) = trace.as_deref_mut() {
            let om = precision_from_state(&w, &beta)?;
            tr.push(objective(s, om.view(), lambda)?);
        }
        if max_change < settings.tol {
            converged = true;
            break;
        }
    }

    let omega = precision_from_state(&w, &beta)?;
    let objective = objective(s, omega.view(), lambda)?;
    Ok((
        PrecisionEstimate {
            omega,
            lambda,
            objective,
            converged,
            iterations,
        },
        GlassoState { w, beta },
    ))
}

fn precision_from_state(w: &Array2<f64>, beta: &Array2<f64>) -> Result<Array2<f64>> {
    let p = w.nrows();
    let mut omega = Array2::zeros((p, p));
    for j in 0..p {
        let others: Vec<usize> = (0..p).filter(|&k| k != j).collect();
        let b = beta.column(j);
        let w12: f64 = others.iter().zip(b.iter()).map(|(&k, bk)| w[[k, j]] * bk).sum();
        let schur = w[[j, j]] - w12;
        if !(schur > 0.0) || !schur.is_finite() {
            return Err(Error::Solver(format!(
                "working covariance is not positive definite at column {j}"
            )));
        }
        let theta = 1.0 / schur;
        omega[[j, j]] = theta;
        for (idx, &k) in others.iter().enumerate() {
            omega[[k, j]] = -b[idx] * theta;
        }
    }
    // average the two column estimates; exact zeros stay zero when both agree
    let raw = omega.clone();
    for i in 0..p {
        for j in (i + 1)..p {
            let v = 0.5 * (raw[[i, j]] + raw[[j, i]]);
            omega[[i, j]] = v;
            omega[[j, i]] = v;
        }
    }
    Ok(omega)
}

/// `log det(Omega) - tr(S Omega) - lambda * sum_{i,j} |Omega_ij|`.
pub fn objective(s: ArrayView2<f64>, omega: ArrayView2<f64>, lambda: f64) -> Result<f64> {
    let logdet = linalg::log_det_spd(omega)
        .ok_or_else(|| Error::Solver("precision estimate is not positive definite".into()))?;
    Ok(logdet - trace_product(s, omega) - lambda * omega.iter().map(|v| v.abs()).sum::<f64>())
}

pub(crate) fn trace_product(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    a.iter().zip(b.t().iter()).map(|(x, y)| x * y).sum()
}
