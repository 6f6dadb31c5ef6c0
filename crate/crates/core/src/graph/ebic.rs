//! Extended BIC selection over a graphical-lasso path.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::glasso::{graphical_lasso_path_lenient, trace_product, GlassoSettings, PrecisionEstimate};
use super::path::LambdaPath;
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EbicSelection {
    #[serde(skip)]
    pub adjacency: Array2<u8>,
    pub lambda: f64,
    pub index: usize,
    /// EBIC per path entry; `None` where the fit did not converge.
    pub scores: Vec<Option<f64>>,
    pub edge_counts: Vec<usize>,
}

/// Gaussian log-likelihood `(n / 2) (log det Omega - tr(S Omega))`.
pub fn log_likelihood(s: ArrayView2<f64>, omega: ArrayView2<f64>, n: usize) -> Option<f64> {
    let logdet = linalg::log_det_spd(omega)?;
    Some(0.5 * n as f64 * (logdet - trace_product(s, omega)))
}

/// Log-likelihood of data confined to the hyperplane orthogonal to the unit
/// vector `w`, the null direction of a singular `S` (CLR data sum to zero).
/// Uses the precision restricted to that hyperplane,
/// `Omega - Omega w w' Omega / (w' Omega w)`, and its pseudo-determinant.
pub fn projected_log_likelihood(
    s: ArrayView2<f64>,
    omega: ArrayView2<f64>,
    w: ArrayView1<f64>,
    n: usize,
) -> Option<f64> {
    let logdet = linalg::log_det_spd(omega)?;
    let ow = omega.dot(&w);
    let wow = w.dot(&ow);
    if !(wow > 0.0) {
        return None;
    }
    let quad = ow.dot(&s.dot(&ow)) / wow;
    Some(0.5 * n as f64 * (logdet - wow.ln() - trace_product(s, omega) + quad))
}

/// Unit null vector of `s` when its smallest eigenvalue is negligible.
fn null_direction(s: ArrayView2<f64>) -> Result<Option<Array1<f64>>> {
    let (vals, vecs) = linalg::symmetric_eigen(s)?;
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let (k, min) = vals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, v)| (k, *v))
        .expect("nonempty spectrum");
    Ok((min.abs() < 1e-9 * scale).then(|| vecs.column(k).to_owned()))
}

/// `-2 loglik + E ln n + 4 E gamma ln p`.
pub fn ebic(loglik: f64, edges: usize, n: usize, p: usize, gamma: f64) -> f64 {
    let e = edges as f64;
    -2.0 * loglik + e * (n as f64).ln() + 4.0 * e * gamma * (p as f64).ln()
}

fn edge_count(est: &PrecisionEstimate) -> usize {
    let p = est.omega.nrows();
    (0..p)
        .flat_map(|i| ((i + 1)..p).map(move |j| (i, j)))
        .filter(|&(i, j)| est.omega[[i, j]] != 0.0)
        .count()
}

pub fn ebic_select(
    s: ArrayView2<f64>,
    n: usize,
    path: &LambdaPath,
    gamma: f64,
) -> Result<EbicSelection> {
    ebic_select_with(s, n, path, gamma, GlassoSettings::default())
}

pub fn ebic_select_with(
    s: ArrayView2<f64>,
    n: usize,
    path: &LambdaPath,
    gamma: f64,
    settings: GlassoSettings,
) -> Result<EbicSelection> {
    if path.is_empty() {
        return Err(Error::Selection("empty penalty path".into()));
    }
    if gamma < 0.0 {
        return Err(Error::Selection(format!("gamma must be nonnegative, got {gamma}")));
    }
    let p = s.nrows();
    // a rank-deficient S (e.g. from CLR data) leaves the plain likelihood
    // unbounded as the penalty shrinks; score it on the data's hyperplane instead
    let null = null_direction(s)?;
    let fits = graphical_lasso_path_lenient(s, &path.values, settings);
    for (fit, lambda) in fits.iter().zip(&path.values) {
        if let Err(e) = fit {
            log::debug!("graphical lasso failed at lambda {lambda:.6}: {e}");
        }
    }
    let edge_counts: Vec<usize> = fits
        .iter()
        .map(|f| f.as_ref().map_or(0, edge_count))
        .collect();
    let scores: Vec<Option<f64>> = fits
        .iter()
        .zip(&edge_counts)
        .map(|(est, &e)| {
            let est = est.as_ref().ok().filter(|est| est.converged)?;
            let ll = match &null {
                Some(w) => projected_log_likelihood(s, est.omega.view(), w.view(), n),
                None => log_likelihood(s, est.omega.view(), n),
            };
            ll.map(|ll| ebic(ll, e, n, p, gamma))
        })
        .collect();

    // minimum score; ties go to fewer edges, then to the larger penalty (earlier index)
    let mut best: Option<(usize, f64)> = None;
    for (k, score) in scores.iter().enumerate() {
        let Some(sc) = *score else { continue };
        best = match best {
            None => Some((k, sc)),
            Some((bk, bs)) => {
                let better = sc < bs || (sc == bs && edge_counts[k] < edge_counts[bk]);
                if better {
                    Some((k, sc))
                } else {
                    Some((bk, bs))
                }
            }
        };
    }
    let (index, _) = best.ok_or_else(|| {
        Error::Selection("no graphical lasso fit along the path converged".into())
    })?;
    Ok(EbicSelection {
        adjacency: fits[index].as_ref().map(|f| f.support()).unwrap_or_default(),
        lambda: path.values[index],
        index,
        scores,
        edge_counts,
    })
}
