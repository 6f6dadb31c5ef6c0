//! CCLasso: a sparse latent covariance fitted to the CLR covariance through
//! the centering projection, with a cross-validated penalty and bootstrap
//! sign-stability p-values.

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corr::CorrelationMatrix;
use crate::data::{clr_transform, composition_for, CountTable};
use crate::error::{Error, Result};
use crate::linalg;
use crate::method::{to_record, Method, MethodResult, SelectionInfo};
use crate::stats;

const INNER_TOL: f64 = 1e-5;
const INNER_STEPS: usize = 200;
const MAX_EVALS: usize = 20;
const MIN_FOLD: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CclassoParams {
    /// Input holds raw counts, so the pseudo-count is always added.
    pub counts: bool,
    pub pseudo: f64,
    pub k_cv: usize,
    /// Search interval for the penalty.
    pub lam_int: (f64, f64),
    /// Outer iteration cap of the solver.
    pub k_max: usize,
    pub n_boot: usize,
}

impl Default for CclassoParams {
    fn default() -> Self {
        Self {
            counts: false,
            pseudo: 0.5,
            k_cv: 3,
            lam_int: (1e-4, 1.0),
            k_max: 20,
            n_boot: 20,
        }
    }
}

impl CclassoParams {
    fn validate(&self, n: usize) -> Result<()> {
        let (lo, hi) = self.lam_int;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::Estimator(format!("invalid penalty interval ({lo}, {hi})")));
        }
        if self.k_cv < 2 {
            return Err(Error::Estimator(format!("k_cv must be at least 2, got {}", self.k_cv)));
        }
        if self.k_max == 0 || self.n_boot == 0 {
            return Err(Error::Estimator("k_max and n_boot must be positive".into()));
        }
        if n / self.k_cv < MIN_FOLD {
            return Err(Error::Estimator(format!(
                "{n} samples leave cross-validation folds under {MIN_FOLD} samples with k_cv = {}",
                self.k_cv
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CclassoResult {
    pub correlation: CorrelationMatrix,
    pub pvalues: Array2<f64>,
    pub selected_lambda: f64,
    /// Sparse latent covariance at the selected penalty.
    pub covariance: Array2<f64>,
    /// `(lambda, cv loss)` for every evaluated penalty, in evaluation order.
    pub cv_trace: Vec<(f64, f64)>,
    pub converged: bool,
}

/// `G M G` with `G = I - 11'/p`: subtract row and column means, add back the grand mean.
fn double_center(m: &Array2<f64>) -> Array2<f64> {
    let rows = m.mean_axis(Axis(1)).expect("nonempty");
    let cols = m.mean_axis(Axis(0)).expect("nonempty");
    let grand = rows.mean().unwrap_or(0.0);
    let mut out = m.clone();
    for ((i, j), v) in out.indexed_iter_mut() {
        *v += grand - rows[i] - cols[j];
    }
    out
}

fn soft_off_diagonal(m: &Array2<f64>, t: f64) -> Array2<f64> {
    let mut out = m.clone();
    for ((i, j), v) in out.indexed_iter_mut() {
        if i != j {
            *v = v.signum() * (v.abs() - t).max(0.0);
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct SolverOutcome {
    pub sigma: Array2<f64>,
    pub converged: bool,
    pub outer: usize,
}

/// Minimizes `1/2 ||S - G Sigma G||_F^2 + lambda * sum_{i != j} |Sigma_ij|`
/// by ADMM on the split `Sigma = Z`. Each outer iteration runs up to a fixed
/// number of steps at one penalty parameter `rho`, then rebalances `rho`.
pub fn cclasso_solve(s: ArrayView2<f64>, lambda: f64, k_max: usize) -> SolverOutcome {
    let s = s.to_owned();
    let p = s.nrows();
    let scale = s.diag().iter().map(|v| v.abs()).sum::<f64>().max(1e-12) / p as f64;
    let mut z = Array2::from_diag(&s.diag().mapv(|v| v.max(1e-12 * scale)));
    let mut u = Array2::<f64>::zeros((p, p));
    let mut rho = 1.0;
    let tol = INNER_TOL * scale * p as f64;
    for outer in 1..=k_max {
        let (mut primal, mut dual) = (f64::INFINITY, f64::INFINITY);
        for _ in 0..INNER_STEPS {
            let v = &z - &u;
            let sigma = &v + &(double_center(&(&s - &v)) / (1.0 + rho));
            let z_prev = z;
            z = soft_off_diagonal(&(&sigma + &u), lambda / rho);
            let r = &sigma - &z;
            u += &r;
            primal = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            dual = rho * (&z - &z_prev).iter().map(|x| x * x).sum::<f64>().sqrt();
            if primal < tol && dual < tol {
                return SolverOutcome {
                    sigma: z,
                    converged: true,
                    outer,
                };
            }
        }
        // residual balancing; U is the scaled dual and rescales with rho
        if primal > 10.0 * dual {
            rho *= 2.0;
            u /= 2.0;
        } else if dual > 10.0 * primal {
            rho /= 2.0;
            u *= 2.0;
        }
    }
    SolverOutcome {
        sigma: z,
        converged: false,
        outer: k_max,
    }
}

fn clr_data(t: &CountTable, params: &CclassoParams) -> Result<Array2<f64>> {
    Ok(clr_transform(&composition_for(t, params.counts, params.pseudo)?)?.values)
}

fn cv_loss(x: ArrayView2<f64>, folds: &[Vec<usize>], lambda: f64, k_max: usize) -> f64 {
    let n = x.nrows();
    folds
        .par_iter()
        .map(|test| {
            let mut in_test = vec![false; n];
            for &i in test {
                in_test[i] = true;
            }
            let train: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
            let s_train = stats::covariance(x.select(Axis(0), &train).view());
            let s_test = stats::covariance(x.select(Axis(0), test).view());
            let fit = cclasso_solve(s_train.view(), lambda, k_max);
            let resid = s_test - double_center(&fit.sigma);
            resid.iter().map(|v| v * v).sum::<f64>()
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .sum()
}

/// Golden-section search over `log10(lambda)`, at most `MAX_EVALS` loss evaluations.
fn select_lambda(
    x: ArrayView2<f64>,
    params: &CclassoParams,
    seed: u64,
) -> (f64, Vec<(f64, f64)>) {
    let n = x.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(stats::derive_seed(seed, 0)));
    let folds: Vec<Vec<usize>> = (0..params.k_cv)
        .map(|k| order.iter().copied().skip(k).step_by(params.k_cv).collect())
        .collect();

    let mut trace: Vec<(f64, f64)> = Vec::new();
    let eval = |log_lam: f64, trace: &mut Vec<(f64, f64)>| {
        let lam = 10f64.powf(log_lam);
        let loss = cv_loss(x, &folds, lam, params.k_max);
        trace.push((lam, loss));
        loss
    };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (params.lam_int.0.log10(), params.lam_int.1.log10());
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = eval(c, &mut trace);
    let mut fd = eval(d, &mut trace);
    while trace.len() < MAX_EVALS {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = eval(c, &mut trace);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = eval(d, &mut trace);
        }
    }
    // best evaluated point; ties go to the larger penalty
    let best = trace
        .iter()
        .copied()
        .reduce(|best, cur| {
            if cur.1 < best.1 || (cur.1 == best.1 && cur.0 > best.0) {
                cur
            } else {
                best
            }
        })
        .expect("at least two evaluations");
    (best.0, trace)
}

fn correlation_of(sigma: &Array2<f64>) -> Result<Array2<f64>> {
    if sigma.diag().iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Estimator(
            "latent covariance estimate has a nonpositive variance".into(),
        ));
    }
    let mut r = linalg::cov_to_cor(sigma.view());
    for v in r.iter_mut() {
        *v = v.clamp(-1.0, 1.0);
    }
    Ok(r)
}

/// `(1 + 2d) / (B + 1)` capped at 1, where `d` counts bootstrap estimates that
/// are zero or whose sign disagrees with the full-data estimate.
pub fn sign_stability_pvalue(estimate: f64, boot: &[f64]) -> f64 {
    if estimate == 0.0 {
        return 1.0;
    }
    let d = boot.iter().filter(|&&b| b * estimate.signum() <= 0.0).count();
    ((1 + 2 * d) as f64 / (boot.len() + 1) as f64).min(1.0)
}

pub fn cclasso_fit(t: &CountTable, params: &CclassoParams, seed: u64) -> Result<CclassoResult> {
    let (n, p) = (t.n_samples(), t.n_taxa());
    params.validate(n)?;
    if p < 3 {
        return Err(Error::Estimator(format!("CCLasso needs at least 3 taxa, got {p}")));
    }
    let x = clr_data(t, params)?;
    let (lambda, cv_trace) = select_lambda(x.view(), params, seed);
    let s = stats::covariance(x.view());
    let fit = cclasso_solve(s.view(), lambda, params.k_max);
    if !fit.converged {
        log::warn!("CCLasso solver hit k_max = {} at lambda {lambda:.4e}", params.k_max);
    }
    let raw = correlation_of(&fit.sigma)?;

    let boots: Vec<Array2<f64>> = (0..params.n_boot)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(stats::derive_seed(seed, 1 + b as u64));
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let sb = stats::covariance(x.select(Axis(0), &rows).view());
            let fb = cclasso_solve(sb.view(), lambda, params.k_max);
            // a degenerate resample counts as sign-unstable everywhere
            correlation_of(&fb.sigma).unwrap_or_else(|_| Array2::zeros((p, p)))
        })
        .collect();
    let mut pvalues = Array2::<f64>::zeros((p, p));
    for i in 0..p {
        for j in (i + 1)..p {
            let draws: Vec<f64> = boots.iter().map(|m| m[[i, j]]).collect();
            let pv = sign_stability_pvalue(raw[[i, j]], &draws);
            pvalues[[i, j]] = pv;
            pvalues[[j, i]] = pv;
        }
    }

    let values = if linalg::min_eigenvalue(raw.view())? < -1e-8 {
        linalg::project_psd_correlation(raw.view(), 1e-8)?
    } else {
        raw
    };
    Ok(CclassoResult {
        correlation: CorrelationMatrix {
            values,
            method: Method::Cclasso.as_str().into(),
            taxa: t.taxa().to_vec(),
        },
        pvalues,
        selected_lambda: lambda,
        covariance: fit.sigma,
        cv_trace,
        converged: fit.converged,
    })
}

/// [`cclasso_fit`] packaged as a weighted result carrying p-values.
pub fn cclasso_method(t: &CountTable, params: &CclassoParams, seed: u64) -> Result<MethodResult> {
    let fit = cclasso_fit(t, params, seed)?;
    let mut out = MethodResult::weighted(Method::Cclasso, to_record(params), fit.correlation);
    out.pvalues = Some(fit.pvalues);
    out.selection = SelectionInfo {
        lambda: Some(fit.selected_lambda),
        path: fit.cv_trace.iter().map(|e| e.0).collect(),
        flagged: !fit.converged,
        note: (!fit.converged).then(|| format!("solver reached k_max = {}", params.k_max)),
        ..SelectionInfo::default()
    };
    Ok(out)
}
