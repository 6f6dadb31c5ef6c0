//! SparCC: basis correlations from log-ratio variances of compositional data.

use ndarray::{Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corr::CorrelationMatrix;
use crate::data::CountTable;
use crate::error::{Error, Result};
use crate::linalg;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SparccParams {
    /// Dirichlet resampling iterations whose estimates are median-aggregated.
    pub imax: usize,
    /// Rounds of strongly-correlated-pair exclusion.
    pub kmax: usize,
    /// |correlation| above which a pair is a candidate for exclusion.
    pub alpha: f64,
    /// Floor for basis variances.
    pub vmin: f64,
}

impl Default for SparccParams {
    fn default() -> Self {
        Self {
            imax: 20,
            kmax: 10,
            alpha: 0.1,
            vmin: 1e-4,
        }
    }
}

/// Variance over samples of `ln(x_i / x_j)` for every taxon pair. Rows of
/// `x` must be strictly positive (counts or fractions).
pub fn variation_matrix(x: ArrayView2<f64>) -> Array2<f64> {
    log_ratio_variance(x.mapv(f64::ln).view())
}

fn log_ratio_variance(logs: ArrayView2<f64>) -> Array2<f64> {
    let n = logs.nrows() as f64;
    let means = logs.mean_axis(Axis(0)).expect("nonempty");
    let centered = &logs - &means;
    let cov = centered.t().dot(&centered) / n;
    let p = cov.nrows();
    Array2::from_shape_fn((p, p), |(i, j)| {
        if i == j {
            0.0
        } else {
            (cov[[i, i]] + cov[[j, j]] - 2.0 * cov[[i, j]]).max(0.0)
        }
    })
}

pub fn sparcc_fit(t: &CountTable, params: &SparccParams, seed: u64) -> Result<CorrelationMatrix> {
    let (n, p) = (t.n_samples(), t.n_taxa());
    if p < 4 {
        return Err(Error::Estimator(format!(
            "SparCC needs at least 4 taxa, got {p}"
        )));
    }
    if n < 4 {
        return Err(Error::Estimator(format!(
            "SparCC needs at least 4 samples, got {n}"
        )));
    }
    if params.imax == 0 || !(params.alpha > 0.0 && params.alpha < 1.0) || params.vmin <= 0.0 {
        return Err(Error::Estimator(format!("invalid SparCC parameters {params:?}")));
    }
    for (j, col) in t.values().axis_iter(Axis(1)).enumerate() {
        if col.iter().all(|&v| v == 0.0) {
            return Err(Error::Estimator(format!(
                "taxon {} has no counts; filter it before SparCC",
                t.taxa()[j]
            )));
        }
    }

    let counts = t.values();
    let draws: Vec<Array2<f64>> = (0..params.imax)
        .into_par_iter()
        .map(|it| {
            let mut rng = ChaCha8Rng::seed_from_u64(stats::derive_seed(seed, it as u64));
            let logs = dirichlet_log_fractions(counts, &mut rng);
            let variation = log_ratio_variance(logs.view());
            basis_correlation(&variation, params)
        })
        .collect();

    let mut out = Array2::eye(p);
    let mut buf = vec![0.0; draws.len()];
    for i in 0..p {
        for j in (i + 1)..p {
            for (b, d) in buf.iter_mut().zip(&draws) {
                *b = d[[i, j]];
            }
            let m = stats::median(&buf).clamp(-1.0, 1.0);
            out[[i, j]] = m;
            out[[j, i]] = m;
        }
    }
    linalg::symmetrize_unit_diagonal(&mut out);
    Ok(CorrelationMatrix {
        values: out,
        method: "sparcc".into(),
        taxa: t.taxa().to_vec(),
    })
}

/// One posterior draw of per-sample fractions, Dirichlet(counts + 1), on the log scale.
fn dirichlet_log_fractions(counts: ArrayView2<f64>, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut out = Array2::zeros(counts.raw_dim());
    for (i, row) in counts.axis_iter(Axis(0)).enumerate() {
        let mut total = 0.0;
        for (j, &c) in row.iter().enumerate() {
            let g: f64 = Gamma::new(c + 1.0, 1.0).expect("shape > 0").sample(rng);
            let g = g.max(f64::MIN_POSITIVE);
            out[[i, j]] = g;
            total += g;
        }
        let lt = total.ln();
        for j in 0..row.len() {
            out[[i, j]] = out[[i, j]].ln() - lt;
        }
    }
    out
}

/// Basis variances and correlations from a log-ratio variance matrix, with
/// iterative exclusion of strongly correlated pairs.
pub(crate) fn basis_correlation(variation: &Array2<f64>, params: &SparccParams) -> Array2<f64> {
    let p = variation.nrows();
    let mut system = Array2::from_elem((p, p), 1.0);
    for i in 0..p {
        system[[i, i]] += p as f64 - 2.0;
    }
    let mut working = variation.clone();
    let mut omega = solve_basis_variances(&system, &working, params.vmin, None);
    let mut rho = correlations_from_variances(&omega, variation);

    let mut excluded = vec![vec![false; p]; p];
    let mut excluded_count = vec![0usize; p];
    let mut dropped = vec![false; p];

    for _ in 0..params.kmax {
        let Some((i, j)) = strongest_pair(&rho, &excluded, &dropped, params.alpha) else {
            break;
        };
        excluded[i][j] = true;
        excluded[j][i] = true;
        system[[i, j]] -= 1.0;
        system[[j, i]] -= 1.0;
        system[[i, i]] -= 1.0;
        system[[j, j]] -= 1.0;
        working[[i, j]] = 0.0;
        working[[j, i]] = 0.0;
        excluded_count[i] += 1;
        excluded_count[j] += 1;

        let newly: Vec<usize> = (0..p)
            .filter(|&c| !dropped[c] && excluded_count[c] + 3 >= p)
            .collect();
        if !newly.is_empty() {
            let total_dropped = dropped.iter().filter(|&&d| d).count() + newly.len();
            if total_dropped + 4 > p {
                break;
            }
            for &c in &newly {
                dropped[c] = true;
                for k in 0..p {
                    working[[c, k]] = 0.0;
                    working[[k, c]] = 0.0;
                    system[[c, k]] = 0.0;
                    system[[k, c]] = 0.0;
                }
                system[[c, c]] = 1.0;
            }
        }
        omega = solve_basis_variances(&system, &working, params.vmin, Some((&omega, &dropped)));
        rho = correlations_from_variances(&omega, variation);
    }
    rho
}

/// Solves `system * omega = rowsums(working)`; components marked in `frozen`
/// keep their previous value.
fn solve_basis_variances(
    system: &Array2<f64>,
    working: &Array2<f64>,
    vmin: f64,
    frozen: Option<(&Vec<f64>, &Vec<bool>)>,
) -> Vec<f64> {
    let rhs: Vec<f64> = working.sum_axis(Axis(1)).to_vec();
    let solved = linalg::solve(system.view(), &rhs).unwrap_or_else(|| closed_form(&rhs));
    solved
        .into_iter()
        .enumerate()
        .map(|(i, w)| match frozen {
            Some((prev, dropped)) if dropped[i] => prev[i],
            _ => {
                if w.is_finite() {
                    w.max(vmin)
                } else {
                    vmin
                }
            }
        })
        .collect()
}

/// Unexcluded system: `omega_i = (t_i - sum(t) / (2(p-1))) / (p-2)`.
fn closed_form(rowsums: &[f64]) -> Vec<f64> {
    let p = rowsums.len() as f64;
    let total: f64 = rowsums.iter().sum();
    let w = total / (2.0 * (p - 1.0));
    rowsums.iter().map(|t| (t - w) / (p - 2.0)).collect()
}

fn correlations_from_variances(omega: &[f64], variation: &Array2<f64>) -> Array2<f64> {
    let p = omega.len();
    Array2::from_shape_fn((p, p), |(i, j)| {
        if i == j {
            1.0
        } else {
            let r = (omega[i] + omega[j] - variation[[i, j]]) / (2.0 * (omega[i] * omega[j]).sqrt());
            r.clamp(-1.0, 1.0)
        }
    })
}

/// Largest |rho| above `alpha` among pairs not yet excluded; ties go to the
/// lexicographically smallest (i, j).
fn strongest_pair(
    rho: &Array2<f64>,
    excluded: &[Vec<bool>],
    dropped: &[bool],
    alpha: f64,
) -> Option<(usize, usize)> {
    let p = rho.nrows();
    let mut best: Option<((usize, usize), f64)> = None;
    for i in 0..p {
        if dropped[i] {
            continue;
        }
        for j in (i + 1)..p {
            if dropped[j] || excluded[i][j] {
                continue;
            }
            let a = rho[[i, j]].abs();
            if a > alpha && best.is_none_or(|(_, b)| a > b) {
                best = Some(((i, j), a));
            }
        }
    }
    best.map(|(pair, _)| pair)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn defaults_are_table_values() {
        let d = SparccParams::default();
        assert_eq!((d.imax, d.kmax, d.alpha, d.vmin), (20, 10, 0.1, 1e-4));
    }

    #[test]
    fn closed_form_matches_linear_system() {
        let rows = [3.0, 2.5, 4.0, 1.0, 2.0];
        let p = rows.len();
        let mut m = Array2::from_elem((p, p), 1.0);
        for i in 0..p {
            m[[i, i]] += p as f64 - 2.0;
        }
        let direct = linalg::solve(m.view(), &rows).unwrap();
        for (a, b) in direct.iter().zip(closed_form(&rows)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn exclusion_removes_one_pair_per_round() {
        // basis variances all 1; pair (0, 1) strongly correlated, others independent
        let p = 6;
        let mut v = Array2::from_elem((p, p), 2.0);
        for i in 0..p {
            v[[i, i]] = 0.0;
        }
        v[[0, 1]] = 0.2;
        v[[1, 0]] = 0.2;
        let params = SparccParams {
            kmax: 1,
            ..SparccParams::default()
        };
        let rho = basis_correlation(&v, &params);
        let strongest = strongest_pair(
            &correlations_from_variances(&vec![1.0; p], &v),
            &vec![vec![false; p]; p],
            &[false; 6],
            0.1,
        );
        assert_eq!(strongest, Some((0, 1)));
        assert!(rho[[0, 1]] > 0.85);
        // after excluding (0, 1) the remaining pairs are close to independent
        assert!(rho[[2, 3]].abs() < 0.05);
    }

    #[test]
    fn rejects_small_or_empty_inputs() {
        let t = CountTable::from_matrix(Array2::from_elem((5, 3), 1.0)).unwrap();
        assert!(sparcc_fit(&t, &SparccParams::default(), 1).is_err());
        let mut m = Array2::from_elem((5, 4), 3.0);
        m.column_mut(2).fill(0.0);
        let t = CountTable::from_matrix(m).unwrap();
        let err = sparcc_fit(&t, &SparccParams::default(), 1).unwrap_err();
        assert!(err.to_string().contains("T3"));
    }
}
