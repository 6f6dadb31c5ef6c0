//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use cminet::cmimn::{cmimn_fit, conditional_mi, gaussian_mi, CmimnParams};
use cminet::config::PipelineConfig;
use cminet::consensus::{build_consensus, hamming_matrix, threshold_network, threshold_sweep};
use cminet::corr::{correlation_matrix, tau_to_latent, CorrelationKind};
use cminet::data::{clr_transform, format_count_table, to_composition, CountTable};
use cminet::export::{parse_edgelist_tsv, to_edgelist_tsv, to_graphml, ExportGraph};
use cminet::graph::{
    gcoda_fit, graphical_lasso, lambda_path, spieceasi_fit, BinaryNetwork, GcodaParams, GlassoSettings,
    Provenance, SpiecEasiMode, SpiecEasiParams,
};
use cminet::linalg;
use cminet::method::Method;
use cminet::pipeline::run_pipeline;
use cminet::render::{render_threshold_panel, RenderOptions};
use cminet::sparcc::{sparcc_fit, SparccParams};
use cminet::stats;
use ndarray::{Array1, Array2, Axis};
use proptest::prelude::*;
use proptest::test_runner::{Config as RunnerConfig, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

// pinned tolerances and budgets
const ORACLE_TOL: f64 = 1e-5;
const ORACLE_BUDGET: Duration = Duration::from_secs(5);
const MB_F1_FLOOR: f64 = 0.8;
const GCODA_F1_FLOOR: f64 = 0.7;
const RECOVERY_BUDGET: Duration = Duration::from_secs(60);
const SPARCC_NULL_MEDIAN: f64 = 0.15;
const SPARCC_BUDGET: Duration = Duration::from_secs(30);
const CMI_TOL: f64 = 0.02;
const CMI_BUDGET: Duration = Duration::from_secs(20);
const CONSENSUS_CASES: u32 = 256;
const DETERMINISM_BUDGET: Duration = Duration::from_secs(180);
const CLR_ROW_SUM_TOL: f64 = 1e-8;
const MI_AT_06: f64 = 0.22314;
const MI_TOL: f64 = 1e-5;

type Outcome = std::result::Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn within(start: Instant, budget: Duration) -> Outcome {
    let e = start.elapsed();
    ensure!(e < budget, "took {:.1}s, budget {}s", e.as_secs_f64(), budget.as_secs());
    Ok(format!("{:.2}s", e.as_secs_f64()))
}

fn normals(n: usize, rng: &mut ChaCha8Rng) -> Array1<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn off_diagonal(m: &Array2<f64>) -> Vec<((usize, usize), f64)> {
    let p = m.nrows();
    (0..p)
        .flat_map(|i| ((i + 1)..p).map(move |j| (i, j)))
        .map(|(i, j)| ((i, j), m[[i, j]]))
        .collect()
}

fn solver_oracle() -> Outcome {
    let start = Instant::now();
    let settings = GlassoSettings {
        tol: 1e-10,
        max_iter: 1000,
    };
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Array2::from_shape_fn((5, 5), |_| StandardNormal.sample(&mut rng));
        let s = linalg::cov_to_cor((a.dot(&a.t()) + Array2::<f64>::eye(5) * 5.0).view());
        let est = graphical_lasso(s.view(), 0.0, settings).map_err(|e| e.to_string())?;
        let inv = linalg::inverse(s.view()).ok_or("singular test matrix")?;
        for (x, y) in est.omega.iter().zip(inv.iter()) {
            worst = worst.max((x - y).abs());
        }
        let lambda = lambda_path(s.view(), 2, 0.1).unwrap().lambda_max() * 1.05;
        let big = graphical_lasso(s.view(), lambda, settings).map_err(|e| e.to_string())?;
        let off = big.omega.indexed_iter().filter(|((i, j), v)| i != j && **v != 0.0).count();
        ensure!(off == 0, "seed {seed}: {off} nonzero off-diagonal entries above lambda_max");
    }
    ensure!(worst < ORACLE_TOL, "max |Omega - S^-1| = {worst:.2e}");
    let t = within(start, ORACLE_BUDGET)?;
    Ok(format!("max error {worst:.1e}, diagonal above lambda_max, {t}"))
}

fn structure_recovery() -> Outcome {
    let start = Instant::now();
    let (p, n) = (10, 500);
    let cov = common::covariance_from_precision(&common::chain_precision(p, -0.3));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t = common::abundance_table(&common::mvn(&cov, n, &mut rng), 5.0);
    let truth = common::chain_edges(p);
    let params = SpiecEasiParams::mb();
    ensure!(params.rep_num == 20, "mb rep_num {}", params.rep_num);
    let mb = spieceasi_fit(&t, SpiecEasiMode::Mb, &params, 1).map_err(|e| e.to_string())?;
    let gc = gcoda_fit(&t, &GcodaParams::default()).map_err(|e| e.to_string())?;
    let f_mb = common::f1(mb.network.as_ref().unwrap(), &truth);
    let f_gc = common::f1(gc.network.as_ref().unwrap(), &truth);
    ensure!(f_mb >= MB_F1_FLOOR, "mb F1 {f_mb:.3} < {MB_F1_FLOOR}");
    ensure!(f_gc >= GCODA_F1_FLOOR, "gcoda F1 {f_gc:.3} < {GCODA_F1_FLOOR}");
    let tm = within(start, RECOVERY_BUDGET)?;
    Ok(format!("mb F1 {f_mb:.3}, gcoda F1 {f_gc:.3}, {tm}"))
}

fn sparcc_null_and_signal() -> Outcome {
    let start = Instant::now();
    let planted = |rho: f64, seed: u64| {
        let mut cov = Array2::<f64>::eye(10);
        cov[[0, 1]] = rho;
        cov[[1, 0]] = rho;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        common::abundance_table(&common::mvn(&cov, 500, &mut rng), 5.0)
    };
    let null = sparcc_fit(&planted(0.0, 31), &SparccParams::default(), 42).map_err(|e| e.to_string())?;
    let abs: Vec<f64> = off_diagonal(&null.values).iter().map(|e| e.1.abs()).collect();
    let med = stats::median(&abs);
    ensure!(med < SPARCC_NULL_MEDIAN, "null median |rho| {med:.4}");
    let sig = sparcc_fit(&planted(0.9, 32), &SparccParams::default(), 42).map_err(|e| e.to_string())?;
    let off = off_diagonal(&sig.values);
    let top = off.iter().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs())).unwrap();
    ensure!(top.0 == (0, 1), "largest estimate at {:?} ({:.3})", top.0, top.1);
    let tm = within(start, SPARCC_BUDGET)?;
    Ok(format!("null median {med:.4}, planted pair {:.3} is largest, {tm}", top.1))
}

fn cmi_correctness() -> Outcome {
    let start = Instant::now();
    let n = 2000;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let z = normals(n, &mut rng);
    let x = &z + &normals(n, &mut rng);
    let y = &z + &normals(n, &mut rng);
    let ci = conditional_mi(x.view(), y.view(), z.view()).map_err(|e| e.to_string())?;
    ensure!(ci < CMI_TOL, "CMI under conditional independence {ci:.4}");

    let x = normals(n, &mut rng);
    let y = &x * 0.8 + &normals(n, &mut rng);
    let z = normals(n, &mut rng);
    let mi = gaussian_mi(x.view(), y.view()).map_err(|e| e.to_string())?;
    let cmi = conditional_mi(x.view(), y.view(), z.view()).map_err(|e| e.to_string())?;
    ensure!((mi - cmi).abs() < CMI_TOL, "irrelevant conditioner: MI {mi:.4} vs CMI {cmi:.4}");

    // X -> Y -> Z among seven independent bystanders, through counts and CLR
    let x = normals(1000, &mut rng);
    let y = &x * 0.9 + &normals(1000, &mut rng);
    let z = &y * 0.9 + &normals(1000, &mut rng);
    let mut cols = vec![x, y, z];
    cols.extend((0..7).map(|_| normals(1000, &mut rng)));
    let views: Vec<_> = cols.iter().map(|c| c.view()).collect();
    let t = common::abundance_table(&ndarray::stack(Axis(1), &views).unwrap(), 5.0);
    let params = CmimnParams {
        q2: 0.7,
        ..CmimnParams::default()
    };
    let net = cmimn_fit(&t, &params).map_err(|e| e.to_string())?.network.unwrap();
    ensure!(net.has_edge(0, 1) && net.has_edge(1, 2), "direct chain edges missing");
    ensure!(!net.has_edge(0, 2), "transitive edge kept");
    let tm = within(start, CMI_BUDGET)?;
    Ok(format!("CI {ci:.4}, |MI - CMI| {:.4}, transitive edge pruned, {tm}", (mi - cmi).abs()))
}

fn random_networks() -> impl Strategy<Value = Vec<BinaryNetwork>> {
    (2usize..12, 2usize..11).prop_flat_map(|(p, m)| {
        let pairs = p * (p - 1) / 2;
        prop::collection::vec(prop::collection::vec(any::<bool>(), pairs), m).prop_map(move |masks| {
            masks
                .iter()
                .enumerate()
                .map(|(k, mask)| {
                    let roster: Vec<String> = (0..p).map(|i| format!("t{i}")).collect();
                    let all = (0..p).flat_map(|i| ((i + 1)..p).map(move |j| (i, j)));
                    let edges = all.zip(mask).filter(|(_, &on)| on).map(|(e, _)| e);
                    BinaryNetwork::from_edges(roster, edges, Provenance::method(format!("m{k}"))).unwrap()
                })
                .collect()
        })
    })
}

fn consensus_algebra() -> Outcome {
    let mut runner = TestRunner::new(RunnerConfig {
        cases: CONSENSUS_CASES,
        failure_persistence: None,
        ..RunnerConfig::default()
    });
    runner
        .run(&random_networks(), |nets| {
            let c = build_consensus(&nets).unwrap();
            let m = c.m();
            let w = c.weights();
            prop_assert!(w.iter().all(|&v| v as usize <= m));
            let levels: Vec<BinaryNetwork> = (0..=m).map(|t| threshold_network(&c, t).unwrap()).collect();
            for t in 0..m {
                prop_assert!(levels[t + 1].is_subgraph_of(&levels[t]));
                let exact = w.indexed_iter().filter(|((i, j), &v)| i < j && v as usize == t + 1).count();
                prop_assert_eq!(levels[t].edge_count() - levels[t + 1].edge_count(), exact);
            }
            prop_assert_eq!(levels[m].edge_count(), 0);
            let h = hamming_matrix(&nets).unwrap();
            for a in 0..m {
                prop_assert_eq!(h[[a, a]], 0);
                for b in 0..m {
                    prop_assert_eq!(h[[a, b]], h[[b, a]]);
                    prop_assert_eq!(h[[a, b]] == 0, nets[a].adjacency() == nets[b].adjacency());
                    for k in 0..m {
                        prop_assert!(h[[a, k]] <= h[[a, b]] + h[[b, k]]);
                    }
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("{CONSENSUS_CASES} random cases"))
}

fn recorded_defaults() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = synthetic_run_config(dir.path(), "run", 40, 12)?;
    run_pipeline(&cfg).map_err(|e| e.to_string())?;
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(cfg.out.join("manifest.json")).unwrap()).unwrap();
    let params = |m: &str| -> serde_json::Value {
        manifest["methods"]
            .as_array()
            .unwrap()
            .iter()
            .find(|r| r["method"] == m)
            .map(|r| r["params"].clone())
            .unwrap_or(serde_json::Value::Null)
    };
    let expected: &[(&str, &str, serde_json::Value)] = &[
        ("sparcc", "imax", 20.into()),
        ("sparcc", "kmax", 10.into()),
        ("sparcc", "alpha", 0.1.into()),
        ("sparcc", "vmin", 1e-4.into()),
        ("se_mb", "lambda_min_ratio", 1e-2.into()),
        ("se_mb", "nlambda", 15.into()),
        ("se_mb", "rep_num", 20.into()),
        ("se_glasso", "nlambda", 15.into()),
        ("se_glasso", "rep_num", 50.into()),
        ("spring", "rmethod", "original".into()),
        ("spring", "quantitative", true.into()),
        ("spring", "nlambda", 15.into()),
        ("spring", "rep_num", 20.into()),
        ("gcoda", "counts", false.into()),
        ("gcoda", "pseudo", 0.5.into()),
        ("gcoda", "lambda_min_ratio", 1e-4.into()),
        ("gcoda", "nlambda", 15.into()),
        ("gcoda", "ebic_gamma", 0.5.into()),
        ("cmimn", "q1", 0.7.into()),
        ("cmimn", "q2", 0.95.into()),
        ("cclasso", "counts", false.into()),
        ("cclasso", "pseudo", 0.5.into()),
        ("cclasso", "k_cv", 3.into()),
        ("cclasso", "lam_int", serde_json::json!([1e-4, 1.0])),
        ("cclasso", "k_max", 20.into()),
        ("cclasso", "n_boot", 20.into()),
    ];
    for (m, key, want) in expected {
        let got = &params(m)[key];
        ensure!(got == want, "{m}.{key} = {got}, expected {want}");
    }
    Ok(format!("{} recorded defaults checked", expected.len()))
}

fn synthetic_run_config(dir: &Path, out: &str, n: usize, p: usize) -> std::result::Result<PipelineConfig, String> {
    let cov = common::covariance_from_precision(&common::chain_precision(p, -0.3));
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let table = common::count_table(&common::mvn(&cov, n, &mut rng), 4.0);
    let input = dir.join("counts.tsv");
    fs::write(&input, format_count_table(&table, '\t')).map_err(|e| e.to_string())?;
    let text = format!(
        "seed = 42\nout = {:?}\n[input]\npath = {:?}\n",
        dir.join(out).display().to_string(),
        input.display().to_string()
    );
    PipelineConfig::from_toml_str(&text).map_err(|e| e.to_string())
}

fn determinism() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let a = synthetic_run_config(dir.path(), "a", 80, 20)?;
    ensure!(a.methods == Method::ALL, "not all methods enabled");
    let mut b = a.clone();
    b.out = dir.path().join("b");
    let ra = run_pipeline(&a).map_err(|e| e.to_string())?;
    run_pipeline(&b).map_err(|e| e.to_string())?;
    ensure!(ra.failed.is_empty(), "failed methods: {:?}", ra.failed);
    let mut files = vec!["consensus_matrix.tsv".to_string(), "edge_list.tsv".to_string()];
    for e in fs::read_dir(a.out.join("figures")).map_err(|e| e.to_string())? {
        files.push(format!("figures/{}", e.unwrap().file_name().to_string_lossy()));
    }
    let svgs = files.iter().filter(|f| f.ends_with(".svg")).count();
    ensure!(svgs > 0, "no SVG outputs");
    for f in &files {
        let x = fs::read(a.out.join(f)).map_err(|e| e.to_string())?;
        let y = fs::read(b.out.join(f)).map_err(|e| e.to_string())?;
        ensure!(x == y, "{f} differs between runs");
    }
    let tm = within(start, DETERMINISM_BUDGET)?;
    Ok(format!("{} files byte-identical ({svgs} SVG), {tm}", files.len()))
}

fn estimator_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let z = common::mvn(&Array2::eye(6), 60, &mut rng);
    let t = common::count_table(&z, 3.0);
    let warped = CountTable::new(t.values().mapv(|v| v.sqrt() * 3.0 + v.powi(3)), t.taxa().to_vec(), t.samples().to_vec())
        .map_err(|e| e.to_string())?;
    let a = correlation_matrix(&t, CorrelationKind::Spearman).map_err(|e| e.to_string())?.values;
    let b = correlation_matrix(&warped, CorrelationKind::Spearman).map_err(|e| e.to_string())?.values;
    let dev = a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    ensure!(dev < 1e-12, "spearman changed by {dev:.2e} under a monotone map");

    let clr = clr_transform(&to_composition(&t, 0.5).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let worst = clr.values.axis_iter(Axis(0)).map(|r| r.sum().abs()).fold(0.0, f64::max);
    ensure!(worst < CLR_ROW_SUM_TOL, "CLR row sum {worst:.2e}");

    ensure!(tau_to_latent(0.0) == 0.0, "bridge(0) = {}", tau_to_latent(0.0));
    ensure!((tau_to_latent(1.0) - 1.0).abs() < 1e-15, "bridge(1) = {}", tau_to_latent(1.0));

    // x and y with sample correlation exactly 0.6
    let center = |v: Array1<f64>| {
        let m = v.mean().unwrap();
        v - m
    };
    let x = center(normals(200, &mut rng));
    let e = center(normals(200, &mut rng));
    let x = &x / x.dot(&x).sqrt();
    let e = &e - &(&x * x.dot(&e));
    let e = &e / e.dot(&e).sqrt();
    let y = &x * 0.6 + &e * 0.8;
    let mi = gaussian_mi(x.view(), y.view()).map_err(|e| e.to_string())?;
    ensure!((mi - MI_AT_06).abs() < MI_TOL, "gaussian_mi(0.6) = {mi:.6}");
    Ok(format!("spearman dev {dev:.0e}, CLR row sum {worst:.0e}, MI(0.6) = {mi:.5}"))
}

fn exports() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let p = 12;
    let roster: Vec<String> = (0..p).map(|i| format!("OTU_{i}")).collect();
    let nets: Vec<BinaryNetwork> = (0..5)
        .map(|k| {
            let edges: Vec<(usize, usize)> = (0..p)
                .flat_map(|i| ((i + 1)..p).map(move |j| (i, j)))
                .filter(|_| rand::Rng::random_bool(&mut rng, 0.25))
                .collect();
            BinaryNetwork::from_edges(roster.clone(), edges, Provenance::method(format!("m{k}"))).unwrap()
        })
        .collect();
    let c = build_consensus(&nets).map_err(|e| e.to_string())?;
    let g = ExportGraph::from_consensus(&c, None).map_err(|e| e.to_string())?;
    let xml = to_graphml(&g);
    let doc = roxmltree::Document::parse(&xml).map_err(|e| e.to_string())?;
    let n_nodes = doc.descendants().filter(|n| n.has_tag_name("node")).count();
    let n_edges = doc.descendants().filter(|n| n.has_tag_name("edge")).count();
    ensure!(n_nodes == p && n_edges == g.edges.len(), "GraphML has {n_nodes} nodes, {n_edges} edges");

    let reader = networkx_check(&xml, p, g.edges.len())?;

    for net in nets.iter().chain(std::iter::once(&threshold_network(&c, 1).unwrap())) {
        let back = parse_edgelist_tsv(&to_edgelist_tsv(&ExportGraph::from_network(net)), &roster, "x")
            .and_then(|g| g.to_network())
            .map_err(|e| e.to_string())?;
        ensure!(back.adjacency() == net.adjacency(), "edge-list round trip changed the adjacency");
    }

    let opts = RenderOptions::default();
    for row in threshold_sweep(&c) {
        let svg = render_threshold_panel(&c, row.t, &opts).map_err(|e| e.to_string())?;
        let note = format!("t = {}: {} nodes, {} edges", row.t, row.nodes, row.edges);
        ensure!(svg.contains(&note), "panel t = {} lacks '{note}'", row.t);
        let circles = svg.matches("<circle class=\"node\"").count();
        let paths = svg.matches("<path class=\"edge\"").count();
        ensure!(circles == row.nodes && paths == row.edges, "panel t = {} draws {circles} nodes, {paths} edges", row.t);
    }
    Ok(format!("GraphML read by roxmltree{reader}, round trips exact, {} panels match", c.m()))
}

/// Reads the GraphML with networkx when python3 has it; absent is not a failure.
fn networkx_check(xml: &str, nodes: usize, edges: usize) -> Outcome {
    let script = "import sys, networkx as nx\ng = nx.read_graphml(sys.argv[1])\nprint(g.number_of_nodes(), g.number_of_edges())";
    let file = tempfile::NamedTempFile::new().map_err(|e| e.to_string())?;
    fs::write(file.path(), xml).map_err(|e| e.to_string())?;
    let Ok(out) = Command::new("python3").arg("-c").arg(script).arg(file.path()).output() else {
        return Ok(String::new());
    };
    if !out.status.success() {
        let err = String::from_utf8_lossy(&out.stderr);
        if err.contains("No module named") {
            return Ok(String::new());
        }
        return Err(format!("networkx rejected the GraphML: {}", err.trim()));
    }
    let got = String::from_utf8_lossy(&out.stdout).trim().to_string();
    ensure!(got == format!("{nodes} {edges}"), "networkx read {got}, expected {nodes} {edges}");
    Ok(" and networkx".to_string())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("solver oracle", solver_oracle),
        ("structure recovery", structure_recovery),
        ("sparcc null and signal", sparcc_null_and_signal),
        ("cmi correctness", cmi_correctness),
        ("consensus algebra", consensus_algebra),
        ("default parameters", recorded_defaults),
        ("determinism", determinism),
        ("estimator identities", estimator_identities),
        ("exports", exports),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".to_string()));
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", k + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
