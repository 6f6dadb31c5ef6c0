//! Binarization of per-method results, the weighted consensus network, its
//! threshold filtration, and Hamming comparisons between networks.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::network::{adjacency_from, check_roster};
use crate::graph::{BinaryNetwork, Provenance};
use crate::method::{Method, MethodResult};
use crate::stats;

/// How a method's output becomes an edge set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BinarizationRule {
    /// Edge iff `|value| >= value`.
    AbsThreshold { value: f64 },
    /// Edge iff `|value|` reaches the `q` quantile of off-diagonal magnitudes.
    TopQuantile { q: f64 },
    /// Edge iff `p <= alpha`, and `|value| >= abs_threshold` when given.
    Pvalue {
        alpha: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        abs_threshold: Option<f64>,
    },
    /// The method already produced a network.
    NativeSparse,
}

impl BinarizationRule {
    pub fn default_for(method: Method) -> Self {
        match method {
            Method::Pearson | Method::Spearman | Method::Bicor | Method::Sparcc => {
                BinarizationRule::AbsThreshold { value: 0.3 }
            }
            Method::Cclasso => BinarizationRule::Pvalue {
                alpha: 0.05,
                abs_threshold: Some(0.3),
            },
            _ => BinarizationRule::NativeSparse,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::Rule(what));
        match *self {
            BinarizationRule::AbsThreshold { value } if !(value > 0.0 && value <= 1.0) => {
                bad(format!("absolute threshold {value} outside (0, 1]"))
            }
            BinarizationRule::TopQuantile { q } if !(q > 0.0 && q < 1.0) => {
                bad(format!("quantile {q} outside (0, 1)"))
            }
            BinarizationRule::Pvalue { alpha, .. } if !(alpha > 0.0 && alpha <= 1.0) => {
                bad(format!("alpha {alpha} outside (0, 1]"))
            }
            BinarizationRule::Pvalue {
                abs_threshold: Some(v),
                ..
            } if !(v > 0.0 && v <= 1.0) => bad(format!("absolute threshold {v} outside (0, 1]")),
            _ => Ok(()),
        }
    }
}

fn off_diagonal_abs(m: &Array2<f64>) -> Vec<f64> {
    let p = m.nrows();
    (0..p)
        .flat_map(|i| ((i + 1)..p).map(move |j| (i, j)))
        .map(|(i, j)| m[[i, j]].abs())
        .collect()
}

pub fn binarize(r: &MethodResult, rule: &BinarizationRule) -> Result<BinaryNetwork> {
    rule.validate()?;
    let name = r.method.as_str();
    if let BinarizationRule::NativeSparse = rule {
        return r.network.clone().ok_or_else(|| {
            Error::Rule(format!("{name} produced a weighted matrix; native_sparse does not apply"))
        });
    }
    let w = r.weighted.as_ref().ok_or_else(|| {
        Error::Rule(format!("{name} produced a network directly; only native_sparse applies"))
    })?;
    let p = w.nrows();
    let adj = match *rule {
        BinarizationRule::AbsThreshold { value } => adjacency_from(p, |i, j| w[[i, j]].abs() >= value),
        BinarizationRule::TopQuantile { q } => {
            let mags = off_diagonal_abs(w);
            if mags.is_empty() {
                Array2::zeros((p, p))
            } else {
                let cut = stats::quantile(&mags, q);
                adjacency_from(p, |i, j| w[[i, j]].abs() >= cut)
            }
        }
        BinarizationRule::Pvalue {
            alpha,
            abs_threshold,
        } => {
            let pv = r.pvalues.as_ref().ok_or_else(|| {
                Error::Rule(format!("{name} has no p-values; the pvalue rule does not apply"))
            })?;
            let floor = abs_threshold.unwrap_or(0.0);
            adjacency_from(p, |i, j| pv[[i, j]] <= alpha && w[[i, j]].abs() >= floor)
        }
        BinarizationRule::NativeSparse => unreachable!("handled above"),
    };
    BinaryNetwork::new(
        adj,
        r.taxa.clone(),
        Provenance {
            method: name.into(),
            lambda: r.selection.lambda,
            detail: Some(serde_json::to_string(rule).unwrap_or_default()),
        },
    )
}

/// Per-pair vote counts over M method networks sharing one roster.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedConsensus {
    weights: Array2<u32>,
    taxa: Vec<String>,
    methods: Vec<String>,
    networks: Vec<BinaryNetwork>,
}

impl WeightedConsensus {
    pub fn weights(&self) -> &Array2<u32> {
        &self.weights
    }

    pub fn taxa(&self) -> &[String] {
        &self.taxa
    }

    pub fn methods(&self) -> &[String] {
        &self.methods
    }

    pub fn networks(&self) -> &[BinaryNetwork] {
        &self.networks
    }

    /// Number of contributing methods.
    pub fn m(&self) -> usize {
        self.methods.len()
    }

    pub fn dim(&self) -> usize {
        self.taxa.len()
    }

    /// Every pair with weight ≥ 1, heaviest first, then by labels.
    pub fn edge_list(&self) -> Vec<EdgeRecord> {
        let p = self.dim();
        let mut out = Vec::new();
        for i in 0..p {
            for j in (i + 1)..p {
                let weight = self.weights[[i, j]];
                if weight == 0 {
                    continue;
                }
                let (a, b) = if self.taxa[i] <= self.taxa[j] { (i, j) } else { (j, i) };
                let supporting_methods = self
                    .networks
                    .iter()
                    .zip(&self.methods)
                    .filter(|(n, _)| n.has_edge(i, j))
                    .map(|(_, m)| m.clone())
                    .collect();
                out.push(EdgeRecord {
                    taxon_a: self.taxa[a].clone(),
                    taxon_b: self.taxa[b].clone(),
                    weight,
                    supporting_methods,
                });
            }
        }
        out.sort_by(|x, y| {
            y.weight
                .cmp(&x.weight)
                .then_with(|| x.taxon_a.cmp(&y.taxon_a))
                .then_with(|| x.taxon_b.cmp(&y.taxon_b))
        });
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub taxon_a: String,
    pub taxon_b: String,
    pub weight: u32,
    pub supporting_methods: Vec<String>,
}

pub fn build_consensus(nets: &[BinaryNetwork]) -> Result<WeightedConsensus> {
    if nets.len() < 2 {
        return Err(Error::Consensus(format!(
            "a consensus needs at least 2 networks, got {}",
            nets.len()
        )));
    }
    let taxa = nets[0].taxa().to_vec();
    for n in &nets[1..] {
        check_roster(&taxa, n.taxa())?;
    }
    let p = taxa.len();
    let mut weights = Array2::<u32>::zeros((p, p));
    for n in nets {
        weights += &n.adjacency().mapv(u32::from);
    }
    Ok(WeightedConsensus {
        weights,
        taxa,
        methods: nets.iter().map(|n| n.provenance.method.clone()).collect(),
        networks: nets.to_vec(),
    })
}

/// Edges whose weight strictly exceeds `t`.
pub fn threshold_network(c: &WeightedConsensus, t: usize) -> Result<BinaryNetwork> {
    if t > c.m() {
        return Err(Error::Threshold(format!(
            "threshold {t} exceeds the number of methods {}",
            c.m()
        )));
    }
    let w = &c.weights;
    BinaryNetwork::new(
        adjacency_from(c.dim(), |i, j| w[[i, j]] as usize > t),
        c.taxa.clone(),
        Provenance {
            method: "consensus".into(),
            lambda: None,
            detail: Some(format!("weight > {t}")),
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepRow {
    pub t: usize,
    pub nodes: usize,
    pub edges: usize,
}

/// One row per threshold `t = 0..M-1`.
pub fn threshold_sweep(c: &WeightedConsensus) -> Vec<SweepRow> {
    (0..c.m())
        .map(|t| {
            let net = threshold_network(c, t).expect("t < M");
            SweepRow {
                t,
                nodes: net.connected_node_count(),
                edges: net.edge_count(),
            }
        })
        .collect()
}

/// Number of node pairs on which the two networks disagree.
pub fn hamming_distance(a: &BinaryNetwork, b: &BinaryNetwork) -> Result<usize> {
    a.check_same_roster(b)?;
    let p = a.dim();
    Ok((0..p)
        .flat_map(|i| ((i + 1)..p).map(move |j| (i, j)))
        .filter(|&(i, j)| a.has_edge(i, j) != b.has_edge(i, j))
        .count())
}

pub fn hamming_matrix(nets: &[BinaryNetwork]) -> Result<Array2<usize>> {
    let m = nets.len();
    let mut out = Array2::zeros((m, m));
    for a in 0..m {
        for b in (a + 1)..m {
            let d = hamming_distance(&nets[a], &nets[b])?;
            out[[a, b]] = d;
            out[[b, a]] = d;
        }
    }
    Ok(out)
}
