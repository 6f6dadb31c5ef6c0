#![allow(dead_code)]

use cminet::data::CountTable;
use cminet::graph::BinaryNetwork;
use cminet::linalg;
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Tridiagonal precision with unit diagonal and `-partial` on the first off-diagonals,
/// so adjacent nodes have partial correlation `partial`.
pub fn chain_precision(p: usize, partial: f64) -> Array2<f64> {
    let mut om = Array2::eye(p);
    for i in 0..p - 1 {
        om[[i, i + 1]] = -partial;
        om[[i + 1, i]] = -partial;
    }
    om
}

pub fn chain_edges(p: usize) -> Vec<(usize, usize)> {
    (0..p - 1).map(|i| (i, i + 1)).collect()
}

/// `n` draws from N(0, cov) as rows.
pub fn mvn<R: Rng>(cov: &Array2<f64>, n: usize, rng: &mut R) -> Array2<f64> {
    let p = cov.nrows();
    let chol = cholesky_lower(cov);
    let mut out = Array2::zeros((n, p));
    for i in 0..n {
        let z: Array1<f64> = (0..p).map(|_| StandardNormal.sample(rng)).collect();
        let x = chol.dot(&z);
        out.row_mut(i).assign(&x);
    }
    out
}

fn cholesky_lower(cov: &Array2<f64>) -> Array2<f64> {
    // lower-triangular factor by the textbook recurrence
    let p = cov.nrows();
    let mut l = Array2::<f64>::zeros((p, p));
    for i in 0..p {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[[i, k]] * l[[j, k]]).sum();
            if i == j {
                l[[i, i]] = (cov[[i, i]] - s).sqrt();
            } else {
                l[[i, j]] = (cov[[i, j]] - s) / l[[j, j]];
            }
        }
    }
    l
}

pub fn covariance_from_precision(om: &Array2<f64>) -> Array2<f64> {
    linalg::inverse(om.view()).expect("invertible precision")
}

/// Absolute abundances `exp(z + offset)` used directly as a count table.
pub fn abundance_table(log_abundance: &Array2<f64>, offset: f64) -> CountTable {
    CountTable::from_matrix(log_abundance.mapv(|v| (v + offset).exp())).unwrap()
}

/// Rounded counts from log-abundances, keeping zeros where they occur.
pub fn count_table(log_abundance: &Array2<f64>, offset: f64) -> CountTable {
    CountTable::from_matrix(log_abundance.mapv(|v| (v + offset).exp().round())).unwrap()
}

pub fn f1(net: &BinaryNetwork, truth: &[(usize, usize)]) -> f64 {
    let found: Vec<(usize, usize)> = net.edges().collect();
    let tp = truth.iter().filter(|&&(i, j)| net.has_edge(i, j)).count() as f64;
    let fp = found.len() as f64 - tp;
    let fneg = truth.len() as f64 - tp;
    if tp == 0.0 {
        return 0.0;
    }
    2.0 * tp / (2.0 * tp + fp + fneg)
}

pub fn jaccard(a: &BinaryNetwork, b: &BinaryNetwork) -> f64 {
    let inter = a.edges().filter(|&(i, j)| b.has_edge(i, j)).count() as f64;
    let union = (a.edge_count() + b.edge_count()) as f64 - inter;
    if union == 0.0 {
        1.0
    } else {
        inter / union
    }
}
