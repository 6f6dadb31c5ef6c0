//! Pairwise correlation estimators and the rank-based latent correlation.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{clr_transform, mclr_transform, to_composition, CountTable, ShiftPolicy, TransformedTable};
use crate::error::{Error, Result};
use crate::linalg;
use crate::method::{to_record, Method, MethodResult};
use crate::stats;

/// Tuning constant of the biweight midcorrelation, in units of MAD.
pub const BICOR_TUNING: f64 = 9.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationKind {
    Pearson,
    Spearman,
    Bicor,
    Kendall,
}

impl fmt::Display for CorrelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CorrelationKind::Pearson => "pearson",
            CorrelationKind::Spearman => "spearman",
            CorrelationKind::Bicor => "bicor",
            CorrelationKind::Kendall => "kendall",
        };
        f.write_str(s)
    }
}

/// Symmetric p × p association matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub values: Array2<f64>,
    pub method: String,
    pub taxa: Vec<String>,
}

impl CorrelationMatrix {
    pub fn dim(&self) -> usize {
        self.values.nrows()
    }
}

/// Anything that can be viewed as a samples × taxa data matrix.
pub trait DataMatrix {
    fn matrix(&self) -> ArrayView2<'_, f64>;
    fn labels(&self) -> &[String];
}

impl DataMatrix for CountTable {
    fn matrix(&self) -> ArrayView2<'_, f64> {
        self.values()
    }
    fn labels(&self) -> &[String] {
        self.taxa()
    }
}

impl DataMatrix for TransformedTable {
    fn matrix(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }
    fn labels(&self) -> &[String] {
        &self.taxa
    }
}

pub fn correlation_matrix<D: DataMatrix + ?Sized>(
    data: &D,
    kind: CorrelationKind,
) -> Result<CorrelationMatrix> {
    let values = correlation_values(data.matrix(), data.labels(), kind)?;
    Ok(CorrelationMatrix {
        values,
        method: kind.to_string(),
        taxa: data.labels().to_vec(),
    })
}

pub(crate) fn correlation_values(
    x: ArrayView2<f64>,
    taxa: &[String],
    kind: CorrelationKind,
) -> Result<Array2<f64>> {
    let (n, p) = x.dim();
    if n < 4 {
        return Err(Error::Estimator(format!(
            "{kind} correlation needs at least 4 samples, got {n}"
        )));
    }
    for (j, col) in x.axis_iter(Axis(1)).enumerate() {
        let first = col[0];
        if col.iter().all(|&v| v == first) {
            return Err(Error::Estimator(format!(
                "taxon {} is constant; {kind} correlation undefined",
                taxa[j]
            )));
        }
    }
    let out = match kind {
        CorrelationKind::Pearson => unit_scaled_product(&center_scale_columns(x)),
        CorrelationKind::Spearman => {
            let mut ranked = Array2::zeros((n, p));
            for (j, col) in x.axis_iter(Axis(1)).enumerate() {
                ranked
                    .column_mut(j)
                    .assign(&Array1::from(stats::average_ranks(col)));
            }
            unit_scaled_product(&center_scale_columns(ranked.view()))
        }
        CorrelationKind::Bicor => {
            let mut cols = Array2::zeros((n, p));
            for (j, col) in x.axis_iter(Axis(1)).enumerate() {
                cols.column_mut(j).assign(&biweight_column(col));
            }
            unit_scaled_product(&cols)
        }
        CorrelationKind::Kendall => kendall_values(x, false),
    };
    Ok(out)
}

/// Columns centered and scaled to unit Euclidean norm.
fn center_scale_columns(x: ArrayView2<f64>) -> Array2<f64> {
    let mut out = x.to_owned();
    for mut col in out.axis_iter_mut(Axis(1)) {
        let m = stats::mean(col.view());
        col.mapv_inplace(|v| v - m);
        let norm = col.dot(&col).sqrt();
        col.mapv_inplace(|v| v / norm);
    }
    out
}

/// Biweight-transformed column with unit norm; falls back to the Pearson
/// column when the MAD is zero.
fn biweight_column(col: ArrayView1<f64>) -> Array1<f64> {
    let v = col.to_vec();
    let med = stats::median(&v);
    let abs_dev: Vec<f64> = v.iter().map(|x| (x - med).abs()).collect();
    let mad = stats::median(&abs_dev);
    if mad == 0.0 {
        let m = stats::mean(col);
        let c = col.mapv(|x| x - m);
        let norm = c.dot(&c).sqrt();
        return c / norm;
    }
    let weighted = col.mapv(|x| {
        let u = (x - med) / (BICOR_TUNING * mad);
        if u.abs() < 1.0 {
            (x - med) * (1.0 - u * u).powi(2)
        } else {
            0.0
        }
    });
    let norm = weighted.dot(&weighted).sqrt();
    weighted / norm
}

fn unit_scaled_product(cols: &Array2<f64>) -> Array2<f64> {
    let mut out = cols.t().dot(cols);
    linalg::symmetrize_unit_diagonal(&mut out);
    out
}

fn column_pairs(p: usize) -> Vec<(usize, usize)> {
    (0..p).flat_map(|i| ((i + 1)..p).map(move |j| (i, j))).collect()
}

/// Kendall tau-b for every column pair. With `tied_as_zero`, a pair whose
/// tau-b is undefined (a fully tied column) gets 0.
fn kendall_values(x: ArrayView2<f64>, tied_as_zero: bool) -> Array2<f64> {
    let p = x.ncols();
    let cols: Vec<Vec<f64>> = x.axis_iter(Axis(1)).map(|c| c.to_vec()).collect();
    let taus: Vec<((usize, usize), f64)> = column_pairs(p)
        .into_par_iter()
        .map(|(i, j)| {
            let t = kendall_tau_b(&cols[i], &cols[j]);
            ((i, j), if tied_as_zero { t.unwrap_or(0.0) } else { t.unwrap_or(f64::NAN) })
        })
        .collect();
    let mut out = Array2::eye(p);
    for ((i, j), t) in taus {
        out[[i, j]] = t;
        out[[j, i]] = t;
    }
    out
}

/// Kendall tau-b in O(n log n) (Knight's merge-sort algorithm). `None` when
/// either input is fully tied.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    assert_eq!(n, y.len());
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let n0 = (n * (n - 1) / 2) as f64;
    let mut x_ties = 0.0;
    let mut joint_ties = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && pairs[j].0 == pairs[i].0 {
            j += 1;
        }
        let t = (j - i) as f64;
        x_ties += t * (t - 1.0) / 2.0;
        let mut k = i;
        while k < j {
            let mut l = k + 1;
            while l < j && pairs[l].1 == pairs[k].1 {
                l += 1;
            }
            let u = (l - k) as f64;
            joint_ties += u * (u - 1.0) / 2.0;
            k = l;
        }
        i = j;
    }

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; n];
    let swaps = merge_count(&mut ys, &mut buf) as f64;

    let mut y_ties = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && ys[j] == ys[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        y_ties += t * (t - 1.0) / 2.0;
        i = j;
    }

    let denom = ((n0 - x_ties) * (n0 - y_ties)).sqrt();
    if denom == 0.0 {
        return None;
    }
    let s = n0 - x_ties - y_ties + joint_ties - 2.0 * swaps;
    Some((s / denom).clamp(-1.0, 1.0))
}

/// Sorts `v` ascending and returns the number of strict inversions.
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (left, right) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_count(left, bl) + merge_count(right, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + (mid - i)].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + (n - j)].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Gaussian-copula bridge from Kendall's tau to the latent Pearson correlation.
pub fn tau_to_latent(tau: f64) -> f64 {
    (FRAC_PI_2 * tau).sin()
}

/// Rank-based latent correlation of a zero-inflated count table: tau-b on
/// the modified-CLR data, bridged through `sin(pi * tau / 2)` and projected to
/// the nearest positive semidefinite correlation matrix.
pub fn latent_correlation(t: &CountTable) -> Result<CorrelationMatrix> {
    if t.n_samples() < 4 {
        return Err(Error::Estimator(format!(
            "latent correlation needs at least 4 samples, got {}",
            t.n_samples()
        )));
    }
    let z = mclr_transform(t, ShiftPolicy::Auto)?;
    let values = latent_from_transformed(z.values.view())?;
    Ok(CorrelationMatrix {
        values,
        method: "latent_kendall".into(),
        taxa: t.taxa().to_vec(),
    })
}

pub(crate) fn latent_from_transformed(z: ArrayView2<f64>) -> Result<Array2<f64>> {
    let mut r = kendall_values(z, true).mapv(tau_to_latent);
    linalg::symmetrize_unit_diagonal(&mut r);
    if linalg::min_eigenvalue(r.view())? >= 1e-8 {
        return Ok(r);
    }
    linalg::project_psd_correlation(r.view(), 1e-8)
}

/// What the plain correlation estimators are computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrInput {
    /// CLR of the pseudo-counted composition.
    Clr,
    /// The counts as given.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrParams {
    pub input: CorrInput,
    pub pseudo: f64,
}

impl Default for CorrParams {
    fn default() -> Self {
        Self {
            input: CorrInput::Clr,
            pseudo: 0.5,
        }
    }
}

/// Pearson, Spearman or bicor as a pipeline method.
pub fn correlation_fit(t: &CountTable, method: Method, params: &CorrParams) -> Result<MethodResult> {
    let kind = match method {
        Method::Pearson => CorrelationKind::Pearson,
        Method::Spearman => CorrelationKind::Spearman,
        Method::Bicor => CorrelationKind::Bicor,
        other => {
            return Err(Error::Estimator(format!("{other} is not a plain correlation method")))
        }
    };
    let corr = match params.input {
        CorrInput::Clr => correlation_matrix(&clr_transform(&to_composition(t, params.pseudo)?)?, kind)?,
        CorrInput::Raw => correlation_matrix(t, kind)?,
    };
    Ok(MethodResult::weighted(method, to_record(params), corr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn labels(p: usize) -> Vec<String> {
        (0..p).map(|j| format!("t{j}")).collect()
    }

    fn kendall_brute(x: &[f64], y: &[f64]) -> Option<f64> {
        let n = x.len();
        let (mut c, mut d, mut tx, mut ty) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for i in 0..n {
            for j in (i + 1)..n {
                let a = (x[i] - x[j]).signum() * if x[i] == x[j] { 0.0 } else { 1.0 };
                let b = (y[i] - y[j]).signum() * if y[i] == y[j] { 0.0 } else { 1.0 };
                if a == 0.0 && b == 0.0 {
                    continue;
                } else if a == 0.0 {
                    tx += 1.0;
                } else if b == 0.0 {
                    ty += 1.0;
                } else if a * b > 0.0 {
                    c += 1.0;
                } else {
                    d += 1.0;
                }
            }
        }
        let denom = ((c + d + tx) * (c + d + ty)).sqrt();
        (denom > 0.0).then(|| (c - d) / denom)
    }

    #[test]
    fn kendall_matches_brute_force_with_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = 30;
            let x: Vec<f64> = (0..n)
                .map(|_| (rand::Rng::random_range(&mut rng, 0..6)) as f64)
                .collect();
            let y: Vec<f64> = (0..n)
                .map(|_| (rand::Rng::random_range(&mut rng, 0..4)) as f64)
                .collect();
            let fast = kendall_tau_b(&x, &y).unwrap();
            let slow = kendall_brute(&x, &y).unwrap();
            assert!((fast - slow).abs() < 1e-12, "{fast} vs {slow}");
        }
        assert!(kendall_tau_b(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_none());
    }

    #[test]
    fn perfect_linear_pearson() {
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 0.7 - 1.0).collect();
        let m = Array2::from_shape_fn((10, 2), |(i, j)| if j == 0 { x[i] } else { 2.0 * x[i] + 3.0 });
        let r = correlation_values(m.view(), &labels(2), CorrelationKind::Pearson).unwrap();
        assert!((r[[0, 1]] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn monotone_spearman_vs_pearson() {
        let m = Array2::from_shape_fn((12, 2), |(i, j)| {
            let x = i as f64 * 0.5;
            if j == 0 {
                x
            } else {
                x.exp()
            }
        });
        let s = correlation_values(m.view(), &labels(2), CorrelationKind::Spearman).unwrap();
        let p = correlation_values(m.view(), &labels(2), CorrelationKind::Pearson).unwrap();
        assert_eq!(s[[0, 1]], 1.0);
        assert!(p[[0, 1]] < 1.0);
    }

    #[test]
    fn constant_column_error_names_taxon() {
        let m = array![[1.0, 2.0], [1.0, 3.0], [1.0, 4.0], [1.0, 5.0]];
        let err = correlation_values(m.view(), &labels(2), CorrelationKind::Pearson).unwrap_err();
        assert!(err.to_string().contains("t0"));
    }

    #[test]
    fn pearson_monte_carlo_recovers_generating_correlation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rho: f64 = 0.6;
        let mut sum = 0.0;
        for _ in 0..200 {
            let m = Array2::from_shape_fn((30, 2), |_| StandardNormal.sample(&mut rng));
            let mut xy = m.clone();
            for i in 0..30 {
                xy[[i, 1]] = rho * m[[i, 0]] + (1.0 - rho * rho).sqrt() * m[[i, 1]];
            }
            sum += correlation_values(xy.view(), &labels(2), CorrelationKind::Pearson).unwrap()[[0, 1]];
        }
        assert!((sum / 200.0 - rho).abs() < 0.1);
    }

    #[test]
    fn bicor_equals_pearson_when_mad_is_zero() {
        // more than half the entries sit at the median, so both columns take the Pearson path
        let m = array![
            [0.0, 5.0],
            [0.0, 5.0],
            [0.0, 5.0],
            [0.0, 5.0],
            [0.0, 5.0],
            [1.0, 6.0],
            [3.0, 9.0],
            [2.0, 5.0]
        ];
        let b = correlation_values(m.view(), &labels(2), CorrelationKind::Bicor).unwrap();
        let p = correlation_values(m.view(), &labels(2), CorrelationKind::Pearson).unwrap();
        assert!((b[[0, 1]] - p[[0, 1]]).abs() < 1e-15);
    }

    #[test]
    fn bicor_downweights_outlier() {
        let mut rows: Vec<[f64; 2]> = (0..20).map(|i| [i as f64, i as f64 + ((i * 7) % 3) as f64]).collect();
        rows.push([200.0, -200.0]);
        let m = Array2::from_shape_fn((rows.len(), 2), |(i, j)| rows[i][j]);
        let b = correlation_values(m.view(), &labels(2), CorrelationKind::Bicor).unwrap();
        let p = correlation_values(m.view(), &labels(2), CorrelationKind::Pearson).unwrap();
        assert!(b[[0, 1]] > 0.9);
        assert!(p[[0, 1]] < 0.0);
    }

    #[test]
    fn bridge_endpoints() {
        assert_eq!(tau_to_latent(0.0), 0.0);
        assert_eq!(tau_to_latent(1.0), 1.0);
        assert_eq!(tau_to_latent(-1.0), -1.0);
    }
}
