//! End-to-end run: load → filter → every enabled method → binarize →
//! consensus → tables, figures and a manifest in one output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cclasso::cclasso_method;
use crate::cmimn::cmimn_fit;
use crate::config::PipelineConfig;
use crate::consensus::{
    binarize, build_consensus, hamming_matrix, threshold_sweep, BinarizationRule, SweepRow, WeightedConsensus,
};
use crate::corr::correlation_fit;
use crate::data::{filter_taxa, load_count_table, CountTable};
use crate::error::{Error, Result};
use crate::export::{fmt_sig, matrix_tsv, parse_matrix_tsv, to_edgelist_tsv, ExportGraph};
use crate::graph::{gcoda_fit, spieceasi_fit, spring_fit, BinaryNetwork, Provenance, SpiecEasiMode};
use crate::method::{to_record, Method, MethodResult, SelectionInfo};
use crate::render::{render_hamming_svg, render_network_svg, render_threshold_panel, RenderOptions};
use crate::sparcc::sparcc_fit;
use crate::stats::derive_seed;

pub const MANIFEST: &str = "manifest.json";
pub const EFFECTIVE_CONFIG: &str = "config.toml";

/// Seed handed to a method: a fixed stream of the master seed, so enabling or
/// disabling other methods does not change it.
pub fn method_seed(master: u64, m: Method) -> u64 {
    let stream = Method::ALL.iter().position(|&x| x == m).unwrap_or(0) as u64;
    derive_seed(master, stream)
}

/// Run one method on a prepared table.
pub fn run_method(t: &CountTable, m: Method, cfg: &PipelineConfig) -> Result<MethodResult> {
    let seed = method_seed(cfg.seed, m);
    match m {
        Method::Pearson => correlation_fit(t, m, &cfg.pearson),
        Method::Spearman => correlation_fit(t, m, &cfg.spearman),
        Method::Bicor => correlation_fit(t, m, &cfg.bicor),
        Method::Sparcc => {
            let corr = sparcc_fit(t, &cfg.sparcc, seed)?;
            Ok(MethodResult::weighted(m, to_record(&cfg.sparcc), corr))
        }
        Method::SeMb => spieceasi_fit(t, SpiecEasiMode::Mb, &cfg.se_mb, seed),
        Method::SeGlasso => spieceasi_fit(t, SpiecEasiMode::Glasso, &cfg.se_glasso, seed),
        Method::Spring => spring_fit(t, &cfg.spring, seed),
        Method::Gcoda => gcoda_fit(t, &cfg.gcoda),
        Method::Cmimn => cmimn_fit(t, &cfg.cmimn),
        Method::Cclasso => cclasso_method(t, &cfg.cclasso, seed),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSummary {
    pub path: PathBuf,
    pub n_samples: usize,
    pub n_taxa_loaded: usize,
    pub n_taxa_used: usize,
    pub filtered_out: Vec<String>,
    pub dropped_constant: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRecord {
    pub method: Method,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    pub seed: u64,
    pub seconds: f64,
    pub params: serde_json::Value,
    pub rule: BinarizationRule,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub selection: Option<SelectionInfo>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub edges: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusSummary {
    pub methods: Vec<String>,
    pub m: usize,
    pub sweep: Vec<SweepRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub jobs: usize,
    pub config: serde_json::Value,
    pub input: InputSummary,
    pub methods: Vec<MethodRecord>,
    pub consensus: Option<ConsensusSummary>,
    pub total_seconds: f64,
}

#[derive(Debug)]
pub struct RunSummary {
    pub out: PathBuf,
    pub manifest: Manifest,
    pub consensus: Option<WeightedConsensus>,
    pub failed: Vec<(Method, String)>,
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn mkdir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub fn render_options(cfg: &PipelineConfig) -> RenderOptions {
    RenderOptions {
        seed: cfg.render.layout_seed,
        width: cfg.render.width,
        height: cfg.render.height,
        ..RenderOptions::default()
    }
}

/// Load and filter the configured input, dropping constant taxa.
pub fn prepare_input(cfg: &PipelineConfig) -> Result<(CountTable, InputSummary)> {
    if cfg.input.path.as_os_str().is_empty() {
        return Err(Error::Config("input.path is not set".into()));
    }
    let raw = load_count_table(&cfg.input.path, cfg.input.orientation)?;
    let filtered = filter_taxa(&raw, cfg.filter.min_prevalence, cfg.filter.min_total)?;
    let filtered_out: Vec<String> = raw
        .taxa()
        .iter()
        .filter(|t| !filtered.taxa().contains(t))
        .cloned()
        .collect();
    let (table, dropped_constant) = filtered.drop_constant_taxa();
    if table.n_taxa() < 2 {
        return Err(Error::Filter(format!(
            "{} taxa remain after filtering; at least 2 are needed",
            table.n_taxa()
        )));
    }
    let summary = InputSummary {
        path: cfg.input.path.clone(),
        n_samples: table.n_samples(),
        n_taxa_loaded: raw.n_taxa(),
        n_taxa_used: table.n_taxa(),
        filtered_out,
        dropped_constant,
    };
    Ok((table, summary))
}

struct Outcome {
    method: Method,
    seconds: f64,
    result: Result<(MethodResult, BinaryNetwork)>,
}

fn write_method_outputs(out: &Path, r: &MethodResult, net: &BinaryNetwork) -> Result<()> {
    let name = r.method.as_str();
    write(
        &out.join("networks").join(format!("{name}.tsv")),
        &matrix_tsv(net.taxa(), net.adjacency(), |v| v.to_string()),
    )?;
    if let Some(w) = &r.weighted {
        mkdir(&out.join("weighted"))?;
        write(
            &out.join("weighted").join(format!("{name}.tsv")),
            &matrix_tsv(&r.taxa, w, |v| fmt_sig(*v)),
        )?;
    }
    if let Some(p) = &r.pvalues {
        mkdir(&out.join("pvalues"))?;
        write(
            &out.join("pvalues").join(format!("{name}.tsv")),
            &matrix_tsv(&r.taxa, p, |v| fmt_sig(*v)),
        )?;
    }
    Ok(())
}

pub fn sweep_tsv(rows: &[SweepRow]) -> String {
    let mut s = String::from("t\tnodes\tedges\n");
    for r in rows {
        s.push_str(&format!("{}\t{}\t{}\n", r.t, r.nodes, r.edges));
    }
    s
}

/// Consensus tables and figures. Overwrites earlier copies.
pub fn write_consensus_outputs(out: &Path, c: &WeightedConsensus, opts: &RenderOptions) -> Result<()> {
    write(
        &out.join("consensus_matrix.tsv"),
        &matrix_tsv(c.taxa(), c.weights(), |v| v.to_string()),
    )?;
    write(
        &out.join("edge_list.tsv"),
        &to_edgelist_tsv(&ExportGraph::from_consensus(c, None)?),
    )?;
    write(&out.join("threshold_sweep.tsv"), &sweep_tsv(&threshold_sweep(c)))?;
    write_hamming_outputs(out, c)?;
    write_figures(out, c, opts, None)
}

pub fn write_hamming_outputs(out: &Path, c: &WeightedConsensus) -> Result<()> {
    let d = hamming_matrix(c.networks())?;
    let labels = c.methods().to_vec();
    write(&out.join("hamming_matrix.tsv"), &matrix_tsv(&labels, &d, |v| v.to_string()))?;
    let figures = out.join("figures");
    mkdir(&figures)?;
    write(&figures.join("hamming.svg"), &render_hamming_svg(&labels, &d)?)
}

/// Threshold panels (all of `0..M` or just `only`) and one drawing per method.
pub fn write_figures(out: &Path, c: &WeightedConsensus, opts: &RenderOptions, only: Option<usize>) -> Result<()> {
    let figures = out.join("figures");
    mkdir(&figures)?;
    let ts: Vec<usize> = match only {
        Some(t) => vec![t],
        None => (0..c.m()).collect(),
    };
    for t in ts {
        write(
            &figures.join(format!("consensus_t{t}.svg")),
            &render_threshold_panel(c, t, opts)?,
        )?;
    }
    if only.is_none() {
        for (net, name) in c.networks().iter().zip(c.methods()) {
            let g = ExportGraph::from_network(net);
            let note = format!("{} nodes, {} edges", net.connected_node_count(), net.edge_count());
            write(
                &figures.join(format!("network_{name}.svg")),
                &render_network_svg(&g, name, Some(&note), opts),
            )?;
        }
    }
    Ok(())
}

/// Execute a full run. Method failures do not abort the run: the failing
/// method is recorded and left out of the consensus. The caller decides how
/// to report `failed`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let start = Instant::now();
    // echo the input by absolute path so the written config reruns from anywhere
    let mut cfg = cfg.clone();
    if let Ok(abs) = std::path::absolute(&cfg.input.path) {
        cfg.input.path = abs;
    }
    let cfg = &cfg;
    let out = cfg.out.clone();
    mkdir(&out)?;
    mkdir(&out.join("networks"))?;
    let (table, input) = prepare_input(cfg)?;
    info!(
        "{} samples x {} taxa after filtering",
        input.n_samples, input.n_taxa_used
    );

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<Outcome> = pool.install(|| {
        cfg.methods
            .par_iter()
            .map(|&m| {
                let t0 = Instant::now();
                let result = run_method(&table, m, cfg).and_then(|r| {
                    let net = binarize(&r, &cfg.rule_for(m))?;
                    Ok((r, net))
                });
                Outcome {
                    method: m,
                    seconds: t0.elapsed().as_secs_f64(),
                    result,
                }
            })
            .collect()
    });

    let mut records = Vec::new();
    let mut nets = Vec::new();
    let mut failed = Vec::new();
    for o in outcomes {
        let m = o.method;
        let mut rec = MethodRecord {
            method: m,
            status: "ok".into(),
            error: None,
            seed: method_seed(cfg.seed, m),
            seconds: o.seconds,
            params: cfg.params_record(m),
            rule: cfg.rule_for(m),
            selection: None,
            edges: None,
        };
        match o.result {
            Ok((r, net)) => {
                write_method_outputs(&out, &r, &net)?;
                if r.selection != SelectionInfo::default() {
                    rec.selection = Some(r.selection.clone());
                }
                rec.edges = Some(net.edge_count());
                nets.push(net);
            }
            Err(e) => {
                warn!("method {m} failed: {e}");
                rec.status = "failed".into();
                rec.error = Some(e.to_string());
                failed.push((m, e.to_string()));
            }
        }
        records.push(rec);
    }

    let consensus = if nets.len() >= 2 {
        let c = build_consensus(&nets)?;
        write_consensus_outputs(&out, &c, &render_options(cfg))?;
        Some(c)
    } else {
        warn!("only {} method(s) succeeded; no consensus was built", nets.len());
        None
    };

    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.seed,
        jobs: cfg.jobs,
        config: serde_json::to_value(cfg).map_err(|e| Error::Config(e.to_string()))?,
        input,
        methods: records,
        consensus: consensus.as_ref().map(|c| ConsensusSummary {
            methods: c.methods().to_vec(),
            m: c.m(),
            sweep: threshold_sweep(c),
        }),
        total_seconds: start.elapsed().as_secs_f64(),
    };
    write(&out.join(EFFECTIVE_CONFIG), &cfg.to_toml_string()?)?;
    write(
        &out.join(MANIFEST),
        &serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?,
    )?;
    Ok(RunSummary {
        out,
        manifest,
        consensus,
        failed,
    })
}

/// A finished run reloaded from its output directory.
#[derive(Debug)]
pub struct LoadedRun {
    pub config: PipelineConfig,
    pub manifest: Manifest,
    pub consensus: WeightedConsensus,
}

pub fn load_run(out: impl AsRef<Path>) -> Result<LoadedRun> {
    let out = out.as_ref();
    let path = out.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let config: PipelineConfig = serde_json::from_value(manifest.config.clone())
        .map_err(|e| Error::Config(format!("config echoed in manifest: {e}")))?;
    let summary = manifest
        .consensus
        .as_ref()
        .ok_or_else(|| Error::Consensus(format!("run in {} has no consensus", out.display())))?;
    let mut nets = Vec::new();
    for name in &summary.methods {
        let p = out.join("networks").join(format!("{name}.tsv"));
        let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        let (taxa, adj) = parse_matrix_tsv::<u8>(&text)?;
        nets.push(BinaryNetwork::new(adj, taxa, Provenance::method(name.clone()))?);
    }
    let consensus = build_consensus(&nets)?;
    Ok(LoadedRun {
        config,
        manifest,
        consensus,
    })
}
