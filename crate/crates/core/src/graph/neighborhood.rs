//! Neighborhood selection: one lasso regression per node, supports combined
//! into an undirected graph.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::lasso::{lasso_gram, LassoSettings};
use super::network::{adjacency_from, BinaryNetwork, Provenance};
use crate::error::{Error, Result};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombineRule {
    /// Edge if either regression selects the other node.
    #[default]
    Or,
    /// Edge only if both regressions agree.
    And,
}

/// Coefficient matrices for every node regression along a penalty path.
/// `coefs[k][[i, j]]` is the coefficient of node `i` in the regression of node `j`.
#[derive(Debug, Clone)]
pub struct NeighborhoodPath {
    pub lambdas: Vec<f64>,
    pub coefs: Vec<Array2<f64>>,
}

impl NeighborhoodPath {
    pub fn network(&self, k: usize, rule: CombineRule) -> Array2<u8> {
        combine(&self.coefs[k], rule)
    }
}

fn combine(coef: &Array2<f64>, rule: CombineRule) -> Array2<u8> {
    adjacency_from(coef.nrows(), |i, j| {
        let (a, b) = (coef[[i, j]] != 0.0, coef[[j, i]] != 0.0);
        match rule {
            CombineRule::Or => a || b,
            CombineRule::And => a && b,
        }
    })
}

/// Node regressions driven entirely by a correlation (Gram) matrix. Each
/// penalty warm-starts from the previous one, so `lambdas` should decrease.
pub fn neighborhood_path_from_correlation(r: ArrayView2<f64>, lambdas: &[f64]) -> NeighborhoodPath {
    let p = r.nrows();
    let settings = LassoSettings::default();
    let mut current = Array2::<f64>::zeros((p, p));
    let mut coefs = Vec::with_capacity(lambdas.len());
    let grams: Vec<(Vec<usize>, Array2<f64>, Array1<f64>)> = (0..p)
        .map(|j| {
            let others: Vec<usize> = (0..p).filter(|&k| k != j).collect();
            let gram = r.select(Axis(0), &others).select(Axis(1), &others);
            let rhs = others.iter().map(|&k| r[[k, j]]).collect();
            (others, gram, rhs)
        })
        .collect();
    for &lambda in lambdas {
        for (j, (others, gram, rhs)) in grams.iter().enumerate() {
            let mut beta: Array1<f64> = others.iter().map(|&k| current[[k, j]]).collect();
            lasso_gram(gram.view(), rhs.view(), lambda, &mut beta, settings);
            for (idx, &k) in others.iter().enumerate() {
                current[[k, j]] = beta[idx];
            }
        }
        coefs.push(current.clone());
    }
    NeighborhoodPath {
        lambdas: lambdas.to_vec(),
        coefs,
    }
}

/// Correlation of internally standardized data columns (mean 0, variance 1).
/// A zero-variance column gets unit diagonal and no correlation with the rest.
pub(crate) fn standardized_gram(x: ArrayView2<f64>) -> Array2<f64> {
    let z = stats::standardize_columns(x);
    let mut r = z.t().dot(&z) / x.nrows() as f64;
    for i in 0..r.nrows() {
        r[[i, i]] = 1.0;
    }
    r
}

/// Neighborhood selection on a data matrix at a single penalty.
pub fn mb_neighborhood(
    x: ArrayView2<f64>,
    taxa: &[String],
    lambda: f64,
    rule: CombineRule,
) -> Result<BinaryNetwork> {
    if x.nrows() < 2 {
        return Err(Error::Estimator(format!(
            "neighborhood selection needs at least 2 samples, got {}",
            x.nrows()
        )));
    }
    if x.ncols() != taxa.len() {
        return Err(Error::Estimator("label count does not match columns".into()));
    }
    let r = standardized_gram(x);
    let path = neighborhood_path_from_correlation(r.view(), &[lambda]);
    BinaryNetwork::new(
        path.network(0, rule),
        taxa.to_vec(),
        Provenance {
            method: "mb".into(),
            lambda: Some(lambda),
            detail: Some(format!("{rule:?} rule")),
        },
    )
}
