//! Pipeline configuration: a TOML document overlaid on the built-in defaults.
//!
//! Every section is optional; `sparcc.alpha = 0.1` and a `[sparcc]` table are
//! equivalent. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cclasso::CclassoParams;
use crate::cmimn::CmimnParams;
use crate::consensus::BinarizationRule;
use crate::corr::CorrParams;
use crate::data::Orientation;
use crate::error::{Error, Result};
use crate::graph::{GcodaParams, SpiecEasiParams, SpringParams};
use crate::method::Method;
use crate::sparcc::SparccParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub path: PathBuf,
    pub orientation: Orientation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    /// Minimum fraction of samples in which a taxon is nonzero.
    pub min_prevalence: f64,
    /// Minimum total count of a taxon across samples.
    pub min_total: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            min_prevalence: 0.0,
            min_total: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderConfig {
    pub layout_seed: u64,
    pub width: u32,
    pub height: u32,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            layout_seed: 42,
            width: 800,
            height: 800,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Worker threads; 0 uses one per available core.
    pub jobs: usize,
    pub out: PathBuf,
    pub methods: Vec<Method>,
    pub input: InputConfig,
    pub filter: FilterConfig,
    pub pearson: CorrParams,
    pub spearman: CorrParams,
    pub bicor: CorrParams,
    pub sparcc: SparccParams,
    pub se_mb: SpiecEasiParams,
    pub se_glasso: SpiecEasiParams,
    pub spring: SpringParams,
    pub gcoda: GcodaParams,
    pub cmimn: CmimnParams,
    pub cclasso: CclassoParams,
    pub binarize: BTreeMap<Method, BinarizationRule>,
    pub render: RenderConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            jobs: 0,
            out: PathBuf::from("cminet_out"),
            methods: Method::ALL.to_vec(),
            input: InputConfig {
                path: PathBuf::new(),
                orientation: Orientation::SamplesInRows,
            },
            filter: FilterConfig::default(),
            pearson: CorrParams::default(),
            spearman: CorrParams::default(),
            bicor: CorrParams::default(),
            sparcc: SparccParams::default(),
            se_mb: SpiecEasiParams::mb(),
            se_glasso: SpiecEasiParams::glasso(),
            spring: SpringParams::default(),
            gcoda: GcodaParams::default(),
            cmimn: CmimnParams::default(),
            cclasso: CclassoParams::default(),
            binarize: Method::ALL
                .iter()
                .map(|&m| (m, BinarizationRule::default_for(m)))
                .collect(),
            render: RenderConfig::default(),
        }
    }
}

/// Recursively lay `user` over `base`. Binarization rules are replaced whole,
/// since fields of one rule kind mean nothing to another.
fn overlay(base: &mut toml::Table, user: toml::Table, path: &str) {
    for (key, value) in user {
        let here = if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
        let replace_whole = path == "binarize";
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u)) if !replace_whole => overlay(b, u, &here),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let user: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut base = toml::Table::try_from(PipelineConfig::default())
            .map_err(|e| Error::Config(format!("serializing defaults: {e}")))?;
        overlay(&mut base, user, "");
        let cfg: PipelineConfig = toml::Value::Table(base)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        // a relative input path is read relative to the config file
        if cfg.input.path.is_relative() && !cfg.input.path.as_os_str().is_empty() {
            let dir = path.parent().unwrap_or(Path::new(""));
            let joined = dir.join(&cfg.input.path);
            cfg.input.path = std::path::absolute(&joined).unwrap_or(joined);
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.len() < 2 {
            return Err(Error::Config(format!(
                "at least 2 methods must be enabled for a consensus, got {}",
                self.methods.len()
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for m in &self.methods {
            if !seen.insert(m) {
                return Err(Error::Config(format!("method {m} listed twice")));
            }
        }
        for (m, rule) in &self.binarize {
            rule.validate()
                .map_err(|e| Error::Config(format!("binarize.{m}: {e}")))?;
            let native = matches!(rule, BinarizationRule::NativeSparse);
            if native != m.is_natively_sparse() {
                return Err(Error::Config(format!(
                    "binarize.{m}: {} outputs need {}",
                    if m.is_natively_sparse() { "network" } else { "weighted" },
                    if m.is_natively_sparse() { "native_sparse" } else { "a threshold or p-value rule" }
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.filter.min_prevalence) || self.filter.min_total < 0.0 {
            return Err(Error::Config("filter thresholds out of range".into()));
        }
        self.cmimn.validate().map_err(|e| Error::Config(format!("cmimn: {e}")))?;
        Ok(())
    }

    /// Parameter record of one method as configured.
    pub fn params_record(&self, m: Method) -> serde_json::Value {
        let v = match m {
            Method::Pearson => serde_json::to_value(&self.pearson),
            Method::Spearman => serde_json::to_value(&self.spearman),
            Method::Bicor => serde_json::to_value(&self.bicor),
            Method::Sparcc => serde_json::to_value(&self.sparcc),
            Method::SeMb => serde_json::to_value(&self.se_mb),
            Method::SeGlasso => serde_json::to_value(&self.se_glasso),
            Method::Spring => serde_json::to_value(&self.spring),
            Method::Gcoda => serde_json::to_value(&self.gcoda),
            Method::Cmimn => serde_json::to_value(self.cmimn),
            Method::Cclasso => serde_json::to_value(&self.cclasso),
        };
        v.unwrap_or(serde_json::Value::Null)
    }

    pub fn rule_for(&self, m: Method) -> BinarizationRule {
        self.binarize
            .get(&m)
            .copied()
            .unwrap_or_else(|| BinarizationRule::default_for(m))
    }
}
