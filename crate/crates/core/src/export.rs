//! Text serializations of networks and matrices: GraphML, DOT, edge-list TSV
//! and labeled matrix TSVs.

use std::fmt::Write as _;
use std::str::FromStr;

use ndarray::Array2;

use crate::consensus::{threshold_network, WeightedConsensus};
use crate::error::{Error, Result};
use crate::graph::{BinaryNetwork, Provenance};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Graphml,
    Dot,
    EdgelistTsv,
}

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Graphml => "graphml",
            ExportFormat::Dot => "dot",
            ExportFormat::EdgelistTsv => "tsv",
        }
    }
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "graphml" => Ok(ExportFormat::Graphml),
            "dot" => Ok(ExportFormat::Dot),
            "edgelist_tsv" | "tsv" => Ok(ExportFormat::EdgelistTsv),
            other => Err(Error::Export(format!(
                "unknown format {other:?}; expected graphml, dot or edgelist_tsv"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportEdge {
    pub a: usize,
    pub b: usize,
    pub weight: u32,
    pub methods: Vec<String>,
}

/// A labeled, weighted edge set ready for serialization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportGraph {
    pub name: String,
    pub taxa: Vec<String>,
    pub edges: Vec<ExportEdge>,
}

impl ExportGraph {
    /// Consensus edges with weight above `t` (all nonzero weights when `t` is `None`).
    pub fn from_consensus(c: &WeightedConsensus, t: Option<usize>) -> Result<Self> {
        let floor = match t {
            Some(t) => {
                threshold_network(c, t)?;
                t as u32
            }
            None => 0,
        };
        let index = |name: &str| c.taxa().iter().position(|x| x == name).unwrap_or(0);
        let edges = c
            .edge_list()
            .into_iter()
            .filter(|e| e.weight > floor)
            .map(|e| ExportEdge {
                a: index(&e.taxon_a),
                b: index(&e.taxon_b),
                weight: e.weight,
                methods: e.supporting_methods,
            })
            .collect();
        Ok(Self {
            name: match t {
                Some(t) => format!("consensus_t{t}"),
                None => "consensus".into(),
            },
            taxa: c.taxa().to_vec(),
            edges,
        })
    }

    pub fn from_network(n: &BinaryNetwork) -> Self {
        let name = if n.provenance.method.is_empty() {
            "network".to_string()
        } else {
            n.provenance.method.clone()
        };
        let edges = n
            .edges()
            .map(|(a, b)| ExportEdge {
                a,
                b,
                weight: 1,
                methods: vec![name.clone()],
            })
            .collect();
        Self {
            name,
            taxa: n.taxa().to_vec(),
            edges,
        }
    }

    pub fn to_network(&self) -> Result<BinaryNetwork> {
        let p = self.taxa.len();
        let mut adj = Array2::<u8>::zeros((p, p));
        for e in &self.edges {
            adj[[e.a, e.b]] = 1;
            adj[[e.b, e.a]] = 1;
        }
        BinaryNetwork::new(adj, self.taxa.clone(), Provenance::method(self.name.clone()))
    }

    /// Indices of taxa touched by at least one edge.
    pub fn connected_nodes(&self) -> Vec<usize> {
        let mut seen = vec![false; self.taxa.len()];
        for e in &self.edges {
            seen[e.a] = true;
            seen[e.b] = true;
        }
        (0..self.taxa.len()).filter(|&i| seen[i]).collect()
    }
}

pub(crate) fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn dot_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

pub fn to_graphml(g: &ExportGraph) -> String {
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
    s.push_str("  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"int\"/>\n");
    s.push_str("  <key id=\"methods\" for=\"edge\" attr.name=\"methods\" attr.type=\"string\"/>\n");
    let _ = writeln!(
        s,
        "  <graph id=\"{}\" edgedefault=\"undirected\">",
        xml_escape(&g.name)
    );
    for t in &g.taxa {
        let _ = writeln!(s, "    <node id=\"{}\"/>", xml_escape(t));
    }
    for e in &g.edges {
        let _ = writeln!(
            s,
            "    <edge source=\"{}\" target=\"{}\"><data key=\"weight\">{}</data><data key=\"methods\">{}</data></edge>",
            xml_escape(&g.taxa[e.a]),
            xml_escape(&g.taxa[e.b]),
            e.weight,
            xml_escape(&e.methods.join(","))
        );
    }
    s.push_str("  </graph>\n</graphml>\n");
    s
}

/// Undirected DOT; pen width follows edge weight.
pub fn to_dot(g: &ExportGraph) -> String {
    let mut s = format!("graph {} {{\n", dot_quote(&g.name));
    for t in &g.taxa {
        let _ = writeln!(s, "  {};", dot_quote(t));
    }
    for e in &g.edges {
        let _ = writeln!(
            s,
            "  {} -- {} [weight={}, penwidth={}];",
            dot_quote(&g.taxa[e.a]),
            dot_quote(&g.taxa[e.b]),
            e.weight,
            e.weight
        );
    }
    s.push_str("}\n");
    s
}

pub const EDGELIST_HEADER: &str = "taxon_a\ttaxon_b\tweight\tsupporting_methods";

pub fn to_edgelist_tsv(g: &ExportGraph) -> String {
    let mut s = String::from(EDGELIST_HEADER);
    s.push('\n');
    for e in &g.edges {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}",
            g.taxa[e.a],
            g.taxa[e.b],
            e.weight,
            e.methods.join(",")
        );
    }
    s
}

pub fn export(g: &ExportGraph, format: ExportFormat) -> String {
    match format {
        ExportFormat::Graphml => to_graphml(g),
        ExportFormat::Dot => to_dot(g),
        ExportFormat::EdgelistTsv => to_edgelist_tsv(g),
    }
}

/// Read an edge-list TSV back against a known roster (isolated taxa are not
/// recorded in the file).
pub fn parse_edgelist_tsv(text: &str, roster: &[String], name: &str) -> Result<ExportGraph> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == EDGELIST_HEADER => {}
        other => {
            return Err(Error::Export(format!(
                "edge list header {:?} is not {EDGELIST_HEADER:?}",
                other.unwrap_or("")
            )))
        }
    }
    let index = |name: &str| {
        roster
            .iter()
            .position(|t| t == name)
            .ok_or_else(|| Error::Export(format!("edge list names unknown taxon {name:?}")))
    };
    let mut edges = Vec::new();
    for (k, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::Export(format!(
                "edge list line {} has {} fields, expected 4",
                k + 2,
                fields.len()
            )));
        }
        let weight = fields[2]
            .parse::<u32>()
            .map_err(|_| Error::Export(format!("bad weight {:?} on line {}", fields[2], k + 2)))?;
        let (a, b) = (index(fields[0])?, index(fields[1])?);
        if a == b {
            return Err(Error::Export(format!("self loop on {:?}", fields[0])));
        }
        let methods = fields[3]
            .split(',')
            .filter(|m| !m.is_empty())
            .map(str::to_string)
            .collect();
        edges.push(ExportEdge { a, b, weight, methods });
    }
    Ok(ExportGraph {
        name: name.into(),
        taxa: roster.to_vec(),
        edges,
    })
}

/// Six significant digits, trailing zeros trimmed; scientific notation for
/// very large or very small magnitudes.
pub fn fmt_sig(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "NaN".into()
        } else if v > 0.0 {
            "Inf".into()
        } else {
            "-Inf".into()
        };
    }
    let sci = format!("{v:.5e}");
    let (mant, exp) = sci.split_once('e').unwrap_or((&sci, "0"));
    let exp: i32 = exp.parse().unwrap_or(0);
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-5..15).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let rounded: f64 = sci.parse().unwrap_or(v);
        trim(&format!("{rounded:.decimals$}"))
    } else {
        format!("{}e{exp}", trim(mant))
    }
}

/// Square matrix with a header row and a leading label column.
pub fn matrix_tsv<T>(labels: &[String], m: &Array2<T>, cell: impl Fn(&T) -> String) -> String {
    let mut s = String::from("taxon");
    for l in labels {
        s.push('\t');
        s.push_str(l);
    }
    s.push('\n');
    for (i, l) in labels.iter().enumerate() {
        s.push_str(l);
        for j in 0..labels.len() {
            s.push('\t');
            s.push_str(&cell(&m[[i, j]]));
        }
        s.push('\n');
    }
    s
}

/// Inverse of [`matrix_tsv`] for any cell type that parses from text.
pub fn parse_matrix_tsv<T: FromStr>(text: &str) -> Result<(Vec<String>, Array2<T>)>
where
    T: Clone + Default,
{
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Export("empty matrix file".into()))?;
    let labels: Vec<String> = header.split('\t').skip(1).map(str::to_string).collect();
    let p = labels.len();
    let mut m = Array2::<T>::default((p, p));
    let mut rows = 0;
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split('\t').collect();
        if i >= p || fields.len() != p + 1 || fields[0] != labels[i] {
            return Err(Error::Export(format!("matrix row {} does not match the header", i + 1)));
        }
        for j in 0..p {
            m[[i, j]] = fields[j + 1]
                .parse()
                .map_err(|_| Error::Export(format!("bad cell {:?} in row {}", fields[j + 1], i + 1)))?;
        }
        rows += 1;
    }
    if rows != p {
        return Err(Error::Export(format!("matrix has {rows} rows for {p} columns")));
    }
    Ok((labels, m))
}
