//! CMIMN: mutual-information screening followed by first-order
//! conditional-mutual-information pruning, both under a Gaussian estimator.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{clr_transform, mclr_transform, to_composition, CountTable, ShiftPolicy};
use crate::error::{Error, Result};
use crate::graph::{BinaryNetwork, Provenance};
use crate::method::{to_record, Method, MethodResult, SelectionInfo};
use crate::stats;

/// |r| is clipped to this before taking logs, bounding MI at about 13.47 nats.
const R_CLIP: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CmimnParams {
    /// CLR-transform the counts when true, modified CLR otherwise.
    pub quantitative: bool,
    /// Quantile of pairwise MI an edge must reach in the screening stage.
    pub q1: f64,
    /// Quantile of computed CMI values an edge must reach in the pruning stage.
    pub q2: f64,
    /// Pseudo-count for the CLR route.
    pub pseudo: f64,
}

impl Default for CmimnParams {
    fn default() -> Self {
        Self {
            quantitative: true,
            q1: 0.7,
            q2: 0.95,
            pseudo: 0.5,
        }
    }
}

impl CmimnParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.q1 > 0.0 && self.q1 <= self.q2 && self.q2 < 1.0) {
            return Err(Error::Estimator(format!(
                "CMIMN quantiles must satisfy 0 < q1 <= q2 < 1 (q1={}, q2={})",
                self.q1, self.q2
            )));
        }
        Ok(())
    }
}

fn mi_from_r(r: f64) -> f64 {
    let r = r.clamp(-R_CLIP, R_CLIP);
    (-0.5 * (1.0 - r * r).ln()).max(0.0)
}

/// Gaussian mutual information `-ln(1 - r^2) / 2` from the Pearson correlation.
pub fn gaussian_mi(x: ArrayView1<f64>, y: ArrayView1<f64>) -> Result<f64> {
    if x.len() != y.len() || x.len() < 4 {
        return Err(Error::Estimator(
            "mutual information needs equal-length vectors of at least 4 values".into(),
        ));
    }
    let r = stats::pearson(x, y)
        .ok_or_else(|| Error::Estimator("mutual information of a constant vector".into()))?;
    Ok(mi_from_r(r))
}

/// Partial correlation of x and y given z from a 3 × 3 correlation matrix.
fn partial_correlation(rxy: f64, rxz: f64, ryz: f64) -> Option<f64> {
    let denom = ((1.0 - rxz * rxz) * (1.0 - ryz * ryz)).sqrt();
    if !(denom > 1e-12) {
        return None;
    }
    Some((rxy - rxz * ryz) / denom)
}

/// Gaussian conditional mutual information `I(X; Y | Z)`.
pub fn conditional_mi(x: ArrayView1<f64>, y: ArrayView1<f64>, z: ArrayView1<f64>) -> Result<f64> {
    let n = x.len();
    if y.len() != n || z.len() != n || n < 5 {
        return Err(Error::Estimator(
            "conditional mutual information needs equal-length vectors of at least 5 values".into(),
        ));
    }
    let singular = || Error::Estimator("singular 3x3 correlation matrix".into());
    let rxy = stats::pearson(x, y).ok_or_else(singular)?;
    let rxz = stats::pearson(x, z).ok_or_else(singular)?;
    let ryz = stats::pearson(y, z).ok_or_else(singular)?;
    let rho = partial_correlation(rxy, rxz, ryz).ok_or_else(singular)?;
    Ok(mi_from_r(rho))
}

/// Both stages of the construction, kept for inspection.
#[derive(Debug, Clone)]
pub struct CmimnStages {
    pub mi: Array2<f64>,
    pub stage1: Array2<u8>,
    pub mi_threshold: f64,
    pub stage2: Array2<u8>,
    pub cmi_threshold: Option<f64>,
    /// Minimum CMI over common neighbors for each screened edge that had any.
    pub min_cmi: Vec<((usize, usize), f64)>,
}

pub fn cmimn_stages(x: ArrayView2<f64>, params: &CmimnParams) -> Result<CmimnStages> {
    params.validate()?;
    let (n, p) = x.dim();
    if n < 5 {
        return Err(Error::Estimator(format!("CMIMN needs at least 5 samples, got {n}")));
    }
    if p < 2 {
        return Err(Error::Estimator("CMIMN needs at least 2 taxa".into()));
    }
    let cols: Vec<ArrayView1<f64>> = x.axis_iter(Axis(1)).collect();
    let mut r = Array2::<f64>::eye(p);
    for i in 0..p {
        for j in (i + 1)..p {
            let v = stats::pearson(cols[i], cols[j]).ok_or_else(|| {
                Error::Estimator(format!("column {i} or {j} is constant; MI undefined"))
            })?;
            r[[i, j]] = v;
            r[[j, i]] = v;
        }
    }
    let mi = r.mapv(mi_from_r);

    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|i| ((i + 1)..p).map(move |j| (i, j))).collect();
    let mi_values: Vec<f64> = pairs.iter().map(|&(i, j)| mi[[i, j]]).collect();
    let mi_threshold = stats::quantile(&mi_values, params.q1);
    let mut stage1 = Array2::<u8>::zeros((p, p));
    for &(i, j) in &pairs {
        if mi[[i, j]] >= mi_threshold {
            stage1[[i, j]] = 1;
            stage1[[j, i]] = 1;
        }
    }

    let screened: Vec<(usize, usize)> = pairs.iter().copied().filter(|&(i, j)| stage1[[i, j]] == 1).collect();
    let per_edge: Vec<((usize, usize), Vec<f64>)> = screened
        .par_iter()
        .map(|&(i, j)| {
            let cmis = (0..p)
                .filter(|&k| k != i && k != j && stage1[[i, k]] == 1 && stage1[[j, k]] == 1)
                .filter_map(|k| {
                    partial_correlation(r[[i, j]], r[[i, k]], r[[j, k]]).map(mi_from_r)
                })
                .collect();
            ((i, j), cmis)
        })
        .collect();

    let all_cmi: Vec<f64> = per_edge.iter().flat_map(|(_, v)| v.iter().copied()).collect();
    let cmi_threshold = (!all_cmi.is_empty()).then(|| stats::quantile(&all_cmi, params.q2));
    let mut stage2 = stage1.clone();
    let mut min_cmi = Vec::new();
    for ((i, j), cmis) in &per_edge {
        let Some(m) = cmis.iter().copied().reduce(f64::min) else {
            continue;
        };
        min_cmi.push(((*i, *j), m));
        if let Some(th) = cmi_threshold {
            if m < th {
                stage2[[*i, *j]] = 0;
                stage2[[*j, *i]] = 0;
            }
        }
    }
    Ok(CmimnStages {
        mi,
        stage1,
        mi_threshold,
        stage2,
        cmi_threshold,
        min_cmi,
    })
}

pub fn cmimn_fit(t: &CountTable, params: &CmimnParams) -> Result<MethodResult> {
    let x = if params.quantitative {
        clr_transform(&to_composition(t, params.pseudo)?)?.values
    } else {
        mclr_transform(t, ShiftPolicy::Auto)?.values
    };
    let stages = cmimn_stages(x.view(), params)?;
    let net = BinaryNetwork::new(
        stages.stage2,
        t.taxa().to_vec(),
        Provenance {
            method: Method::Cmimn.as_str().into(),
            lambda: None,
            detail: Some(format!(
                "mi >= {:.6}, cmi >= {}",
                stages.mi_threshold,
                stages
                    .cmi_threshold
                    .map_or_else(|| "n/a".to_string(), |c| format!("{c:.6}"))
            )),
        },
    )?;
    Ok(MethodResult::sparse(
        Method::Cmimn,
        to_record(params),
        net,
        SelectionInfo::default(),
    ))
}
