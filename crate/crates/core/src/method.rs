//! Method identifiers and the common result record every algorithm returns.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::corr::CorrelationMatrix;
use crate::error::Error;
use crate::graph::BinaryNetwork;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Pearson,
    Spearman,
    Bicor,
    Sparcc,
    SeMb,
    SeGlasso,
    Spring,
    Gcoda,
    Cmimn,
    Cclasso,
}

impl Method {
    pub const ALL: [Method; 10] = [
        Method::Pearson,
        Method::Spearman,
        Method::Bicor,
        Method::Sparcc,
        Method::SeMb,
        Method::SeGlasso,
        Method::Spring,
        Method::Gcoda,
        Method::Cmimn,
        Method::Cclasso,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Pearson => "pearson",
            Method::Spearman => "spearman",
            Method::Bicor => "bicor",
            Method::Sparcc => "sparcc",
            Method::SeMb => "se_mb",
            Method::SeGlasso => "se_glasso",
            Method::Spring => "spring",
            Method::Gcoda => "gcoda",
            Method::Cmimn => "cmimn",
            Method::Cclasso => "cclasso",
        }
    }

    /// Whether the method emits a sparse graph directly rather than a weighted matrix.
    pub fn is_natively_sparse(self) -> bool {
        matches!(
            self,
            Method::SeMb | Method::SeGlasso | Method::Spring | Method::Gcoda | Method::Cmimn
        )
    }

    /// Suitable for quantitative (absolute-abundance) input, the "Q" column.
    pub fn supports_quantitative(self) -> bool {
        matches!(
            self,
            Method::Sparcc | Method::Spring | Method::Gcoda | Method::Cmimn | Method::Cclasso
        )
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace(['-', '.'], "_");
        let m = match key.as_str() {
            "pearson" => Method::Pearson,
            "spearman" => Method::Spearman,
            "bicor" => Method::Bicor,
            "sparcc" => Method::Sparcc,
            "se_mb" | "spieceasi_mb" => Method::SeMb,
            "se_glasso" | "spieceasi_glasso" => Method::SeGlasso,
            "spring" => Method::Spring,
            "gcoda" => Method::Gcoda,
            "cmimn" => Method::Cmimn,
            "cclasso" => Method::Cclasso,
            _ => return Err(Error::Config(format!("unknown method {s:?}"))),
        };
        Ok(m)
    }
}

/// Penalty-selection metadata attached to a result.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionInfo {
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub path: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub instability: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub ebic: Vec<Option<f64>>,
    pub flagged: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

/// One algorithm's output: a weighted matrix (and possibly p-values) to be
/// binarized, or a network it selected itself.
#[derive(Debug, Clone)]
pub struct MethodResult {
    pub method: Method,
    pub taxa: Vec<String>,
    pub params: serde_json::Value,
    pub weighted: Option<Array2<f64>>,
    pub pvalues: Option<Array2<f64>>,
    pub network: Option<BinaryNetwork>,
    pub selection: SelectionInfo,
}

impl MethodResult {
    pub fn weighted(method: Method, params: serde_json::Value, corr: CorrelationMatrix) -> Self {
        Self {
            method,
            taxa: corr.taxa,
            params,
            weighted: Some(corr.values),
            pvalues: None,
            network: None,
            selection: SelectionInfo::default(),
        }
    }

    pub fn sparse(
        method: Method,
        params: serde_json::Value,
        network: BinaryNetwork,
        selection: SelectionInfo,
    ) -> Self {
        Self {
            method,
            taxa: network.taxa().to_vec(),
            params,
            weighted: None,
            pvalues: None,
            network: Some(network),
            selection,
        }
    }
}

pub(crate) fn to_record<T: Serialize>(params: &T) -> serde_json::Value {
    serde_json::to_value(params).unwrap_or(serde_json::Value::Null)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("nope".parse::<Method>().is_err());
    }

    #[test]
    fn quantitative_column() {
        let q: Vec<_> = Method::ALL
            .iter()
            .filter(|m| m.supports_quantitative())
            .map(|m| m.as_str())
            .collect();
        assert_eq!(q, ["sparcc", "spring", "gcoda", "cmimn", "cclasso"]);
    }
}
