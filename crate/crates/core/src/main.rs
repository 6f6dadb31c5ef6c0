use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cminet::config::PipelineConfig;
use cminet::consensus::{hamming_matrix, threshold_network, threshold_sweep};
use cminet::export::{export, matrix_tsv, to_edgelist_tsv, ExportFormat, ExportGraph};
use cminet::pipeline::{self, load_run, render_options, sweep_tsv};
use cminet::{Error, Result};

/// Exit status when some methods failed but the remaining outputs were written.
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(name = "cminet", version, about = "Consensus microbial association networks from count tables")]
struct Cli {
    /// TOML configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master random seed (overrides the config)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads, 0 for all cores (overrides the config)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory (overrides the config)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every enabled method and build the consensus
    Run {
        /// Count table (overrides input.path)
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Write the consensus edges with weight above T
    Threshold {
        #[arg(long = "t")]
        t: usize,
    },
    /// Serialize the consensus (or its thresholded form) for other tools
    Export {
        #[arg(long, value_parser = parse_format)]
        format: ExportFormat,
        #[arg(long = "t")]
        t: Option<usize>,
        /// Destination file; defaults to a name inside the output directory
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Node and edge counts for every consensus threshold
    Sweep,
    /// Pairwise Hamming distances between the method networks
    Hamming,
    /// Redraw the figures
    Render {
        #[arg(long = "t")]
        t: Option<usize>,
    },
}

fn parse_format(s: &str) -> std::result::Result<ExportFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn write(path: &PathBuf, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.clone(),
        source: e,
    })
}

fn out_dir(cli: &Cli) -> Result<PathBuf> {
    if let Some(o) = &cli.out {
        return Ok(o.clone());
    }
    match &cli.config {
        Some(c) => Ok(PipelineConfig::load(c)?.out),
        None => Ok(PipelineConfig::default().out),
    }
}

fn run(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Run { input } => {
            let mut cfg = match &cli.config {
                Some(path) => PipelineConfig::load(path)?,
                None => PipelineConfig::default(),
            };
            if let Some(i) = input {
                cfg.input.path = i.clone();
            }
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if let Some(j) = cli.jobs {
                cfg.jobs = j;
            }
            if let Some(o) = &cli.out {
                cfg.out = o.clone();
            }
            let summary = pipeline::run_pipeline(&cfg)?;
            if !summary.failed.is_empty() {
                let names: Vec<&str> = summary.failed.iter().map(|(m, _)| m.as_str()).collect();
                eprintln!("failed methods (left out of the consensus): {}", names.join(", "));
            }
            let Some(c) = &summary.consensus else {
                return Err(Error::Consensus(format!(
                    "fewer than 2 methods succeeded; per-method outputs are in {}",
                    summary.out.display()
                )));
            };
            println!(
                "{} methods, {} taxa, {} consensus edges; outputs in {}",
                c.m(),
                c.dim(),
                c.edge_list().len(),
                summary.out.display()
            );
            Ok(if summary.failed.is_empty() { 0 } else { EXIT_PARTIAL })
        }
        Command::Threshold { t } => {
            let out = out_dir(cli)?;
            let run = load_run(&out)?;
            let net = threshold_network(&run.consensus, *t)?;
            let g = ExportGraph::from_consensus(&run.consensus, Some(*t))?;
            let path = out.join(format!("consensus_t{t}_edges.tsv"));
            write(&path, &to_edgelist_tsv(&g))?;
            println!(
                "t = {t}: {} nodes, {} edges -> {}",
                net.connected_node_count(),
                net.edge_count(),
                path.display()
            );
            Ok(0)
        }
        Command::Export { format, t, output } => {
            let out = out_dir(cli)?;
            let run = load_run(&out)?;
            let g = ExportGraph::from_consensus(&run.consensus, *t)?;
            let path = output
                .clone()
                .unwrap_or_else(|| out.join(format!("{}.{}", g.name, format.extension())));
            write(&path, &export(&g, *format))?;
            println!("{} edges -> {}", g.edges.len(), path.display());
            Ok(0)
        }
        Command::Sweep => {
            let out = out_dir(cli)?;
            let run = load_run(&out)?;
            let text = sweep_tsv(&threshold_sweep(&run.consensus));
            write(&out.join("threshold_sweep.tsv"), &text)?;
            print!("{text}");
            Ok(0)
        }
        Command::Hamming => {
            let out = out_dir(cli)?;
            let run = load_run(&out)?;
            pipeline::write_hamming_outputs(&out, &run.consensus)?;
            let d = hamming_matrix(run.consensus.networks())?;
            print!("{}", matrix_tsv(run.consensus.methods(), &d, |v| v.to_string()));
            Ok(0)
        }
        Command::Render { t } => {
            let out = out_dir(cli)?;
            let run = load_run(&out)?;
            let mut opts = render_options(&run.config);
            if let Some(s) = cli.seed {
                opts.seed = s;
            }
            pipeline::write_figures(&out, &run.consensus, &opts, *t)?;
            if t.is_none() {
                pipeline::write_hamming_outputs(&out, &run.consensus)?;
            }
            println!("figures written to {}", out.join("figures").display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
