use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where a network came from: the producing method and, when a penalty was
/// selected, its value.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub method: String,
    pub lambda: Option<f64>,
    pub detail: Option<String>,
}

impl Provenance {
    pub fn method(name: impl Into<String>) -> Self {
        Self {
            method: name.into(),
            ..Self::default()
        }
    }
}

/// Undirected simple graph over a labeled taxa roster.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryNetwork {
    adj: Array2<u8>,
    taxa: Vec<String>,
    pub provenance: Provenance,
}

impl BinaryNetwork {
    pub fn new(adj: Array2<u8>, taxa: Vec<String>, provenance: Provenance) -> Result<Self> {
        let p = taxa.len();
        if adj.dim() != (p, p) {
            return Err(Error::Consensus(format!(
                "adjacency shape {:?} does not match {p} taxa",
                adj.dim()
            )));
        }
        for i in 0..p {
            if adj[[i, i]] != 0 {
                return Err(Error::Consensus(format!(
                    "self loop on taxon {}",
                    taxa[i]
                )));
            }
            for j in (i + 1)..p {
                let (a, b) = (adj[[i, j]], adj[[j, i]]);
                if a > 1 || a != b {
                    return Err(Error::Consensus(format!(
                        "adjacency not symmetric 0/1 at ({}, {})",
                        taxa[i], taxa[j]
                    )));
                }
            }
        }
        Ok(Self {
            adj,
            taxa,
            provenance,
        })
    }

    pub fn empty(taxa: Vec<String>, provenance: Provenance) -> Self {
        let p = taxa.len();
        Self {
            adj: Array2::zeros((p, p)),
            taxa,
            provenance,
        }
    }

    pub fn from_edges(
        taxa: Vec<String>,
        edges: impl IntoIterator<Item = (usize, usize)>,
        provenance: Provenance,
    ) -> Result<Self> {
        let mut net = Self::empty(taxa, provenance);
        for (i, j) in edges {
            if i == j || i >= net.dim() || j >= net.dim() {
                return Err(Error::Consensus(format!("invalid edge ({i}, {j})")));
            }
            net.adj[[i, j]] = 1;
            net.adj[[j, i]] = 1;
        }
        Ok(net)
    }

    pub fn dim(&self) -> usize {
        self.taxa.len()
    }

    pub fn taxa(&self) -> &[String] {
        &self.taxa
    }

    pub fn adjacency(&self) -> &Array2<u8> {
        &self.adj
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[[i, j]] == 1
    }

    /// Edges as `(i, j)` with `i < j`, row-major.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let p = self.dim();
        (0..p).flat_map(move |i| ((i + 1)..p).filter(move |&j| self.adj[[i, j]] == 1).map(move |j| (i, j)))
    }

    pub fn edge_count(&self) -> usize {
        self.edges().count()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj.row(i).iter().map(|&v| v as usize).sum()
    }

    /// Nodes with at least one incident edge.
    pub fn connected_node_count(&self) -> usize {
        (0..self.dim()).filter(|&i| self.degree(i) > 0).count()
    }

    pub fn density(&self) -> f64 {
        let p = self.dim();
        if p < 2 {
            return 0.0;
        }
        self.edge_count() as f64 / (p * (p - 1) / 2) as f64
    }

    pub fn is_subgraph_of(&self, other: &BinaryNetwork) -> bool {
        self.edges().all(|(i, j)| other.has_edge(i, j))
    }

    /// Error naming the first taxon where the two rosters disagree.
    pub fn check_same_roster(&self, other: &BinaryNetwork) -> Result<()> {
        check_roster(&self.taxa, &other.taxa)
    }
}

pub(crate) fn check_roster(a: &[String], b: &[String]) -> Result<()> {
    if let Some((k, (x, y))) = a.iter().zip(b).enumerate().find(|(_, (x, y))| x != y) {
        return Err(Error::Consensus(format!(
            "taxa rosters differ at position {k}: {x:?} vs {y:?}"
        )));
    }
    if a.len() != b.len() {
        let k = a.len().min(b.len());
        let name = a.get(k).or_else(|| b.get(k)).cloned().unwrap_or_default();
        return Err(Error::Consensus(format!(
            "taxa rosters differ in length ({} vs {}); first unmatched taxon {name:?}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Symmetric 0/1 adjacency from a support predicate on off-diagonal entries.
pub(crate) fn adjacency_from<F: Fn(usize, usize) -> bool>(p: usize, present: F) -> Array2<u8> {
    let mut adj = Array2::zeros((p, p));
    for i in 0..p {
        for j in (i + 1)..p {
            if present(i, j) {
                adj[[i, j]] = 1;
                adj[[j, i]] = 1;
            }
        }
    }
    adj
}
