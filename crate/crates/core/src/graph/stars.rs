//! StARS: pick the densest penalty whose edge set is stable under subsampling.

use ndarray::Array2;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::path::LambdaPath;
use crate::error::{Error, Result};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarsParams {
    pub rep_num: usize,
    /// Fraction of samples per subsample; `None` uses `10 * sqrt(n) / n` when
    /// `n > 144`, else 0.8.
    pub subsample_ratio: Option<f64>,
    pub beta_threshold: f64,
    pub seed: u64,
}

impl Default for StarsParams {
    fn default() -> Self {
        Self {
            rep_num: 20,
            subsample_ratio: None,
            beta_threshold: 0.1,
            seed: 42,
        }
    }
}

impl StarsParams {
    pub fn ratio_for(&self, n: usize) -> f64 {
        self.subsample_ratio.unwrap_or_else(|| default_subsample_ratio(n))
    }
}

pub fn default_subsample_ratio(n: usize) -> f64 {
    if n > 144 {
        10.0 * (n as f64).sqrt() / n as f64
    } else {
        0.8
    }
}

/// Estimates one adjacency per path penalty from a subset of the sample rows.
pub trait PathFitter: Sync {
    fn n_samples(&self) -> usize;
    fn n_nodes(&self) -> usize;
    fn fit_path(&self, rows: &[usize], lambdas: &[f64]) -> Result<Vec<Array2<u8>>>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarsSelection {
    #[serde(skip)]
    pub adjacency: Array2<u8>,
    pub lambda: f64,
    pub index: usize,
    /// Raw instability `D(lambda)` per path entry.
    pub instability: Vec<f64>,
    /// Running maximum of the instability from the sparse end of the path.
    pub monotone_instability: Vec<f64>,
    /// True when no penalty met the threshold and the most stable one was used.
    pub flagged: bool,
}

/// Mean over node pairs of `2 * theta * (1 - theta)`, `theta` the selection frequency.
pub fn edge_instability(frequencies: &Array2<f64>) -> f64 {
    let p = frequencies.nrows();
    if p < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..p {
        for j in (i + 1)..p {
            let th = frequencies[[i, j]];
            total += 2.0 * th * (1.0 - th);
        }
    }
    total / (p * (p - 1) / 2) as f64
}

pub fn stars_select<F: PathFitter + ?Sized>(
    fitter: &F,
    path: &LambdaPath,
    params: &StarsParams,
) -> Result<StarsSelection> {
    if path.is_empty() {
        return Err(Error::Selection("empty penalty path".into()));
    }
    if params.rep_num == 0 {
        return Err(Error::Selection("rep_num must be positive".into()));
    }
    let n = fitter.n_samples();
    let p = fitter.n_nodes();
    let ratio = params.ratio_for(n);
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Selection(format!("subsample ratio {ratio} outside (0, 1)")));
    }
    let b = ((ratio * n as f64).floor() as usize).max(2).min(n);

    let fits: Vec<Vec<Array2<u8>>> = (0..params.rep_num)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(stats::derive_seed(params.seed, rep as u64));
            let mut rows = sample(&mut rng, n, b).into_vec();
            rows.sort_unstable();
            fitter.fit_path(&rows, &path.values)
        })
        .collect::<Result<_>>()?;

    let reps = params.rep_num as f64;
    let instability: Vec<f64> = (0..path.len())
        .map(|k| {
            let mut freq = Array2::<f64>::zeros((p, p));
            for fit in &fits {
                freq += &fit[k].mapv(f64::from);
            }
            freq /= reps;
            edge_instability(&freq)
        })
        .collect();
    let monotone = monotonize(&instability);

    let (index, flagged) = match monotone.iter().rposition(|&d| d <= params.beta_threshold) {
        Some(k) => (k, false),
        None => {
            let k = instability
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(k, _)| k)
                .unwrap_or(0);
            (k, true)
        }
    };

    let all: Vec<usize> = (0..n).collect();
    let full = fitter.fit_path(&all, &path.values[..=index])?;
    let adjacency = full.into_iter().last().expect("nonempty path prefix");
    Ok(StarsSelection {
        adjacency,
        lambda: path.values[index],
        index,
        instability,
        monotone_instability: monotone,
        flagged,
    })
}

/// `out[k] = max(d[0..=k])`: the path runs from the sparse end (largest penalty) first.
fn monotonize(d: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(d.len());
    let mut running = f64::NEG_INFINITY;
    for &v in d {
        running = running.max(v);
        out.push(running);
    }
    out
}
