//! C ABI over the consensus-network library.
//!
//! Handles are opaque and owned by the caller once returned; release each
//! with its `_free` function. Every fallible call returns a [`CminetStatus`]
//! and leaves a message retrievable with [`cminet_last_error`] on the same
//! thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cminet::config::PipelineConfig;
use cminet::consensus::{binarize, build_consensus, threshold_network, BinarizationRule, WeightedConsensus};
use cminet::data::{load_count_table, CountTable, Orientation};
use cminet::export::{export, ExportFormat, ExportGraph};
use cminet::graph::BinaryNetwork;
use cminet::method::Method;
use cminet::pipeline::{method_seed, run_method, run_pipeline};
use cminet::Error;
use ndarray::Array2;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CminetStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Load = 3,
    Estimator = 4,
    Consensus = 5,
    Export = 6,
    Config = 7,
    Io = 8,
    /// A pipeline run finished but some methods failed.
    Partial = 9,
    Panic = 10,
}

/// Samples × taxa count table.
pub struct CminetTable {
    inner: CountTable,
}

/// Undirected network over a taxa roster.
pub struct CminetNetwork {
    inner: BinaryNetwork,
}

/// Vote-count consensus of several networks.
pub struct CminetConsensus {
    inner: WeightedConsensus,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> CminetStatus {
    match e {
        Error::Load(_) | Error::Filter(_) => CminetStatus::Load,
        Error::Transform(_)
        | Error::Estimator(_)
        | Error::Path(_)
        | Error::Solver(_)
        | Error::Selection(_) => CminetStatus::Estimator,
        Error::Rule(_) | Error::Consensus(_) | Error::Threshold(_) => CminetStatus::Consensus,
        Error::Export(_) | Error::Render(_) => CminetStatus::Export,
        Error::Config(_) => CminetStatus::Config,
        Error::Io { .. } => CminetStatus::Io,
    }
}

/// Run `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), (CminetStatus, String)>) -> CminetStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CminetStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CminetStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (CminetStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (CminetStatus, String) {
    (CminetStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (CminetStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (CminetStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut *mut T, what: &str) -> Result<&'a mut *mut T, (CminetStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    *p = ptr::null_mut();
    Ok(&mut *p)
}

/// Message for the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next `cminet_` call on the same thread.
#[no_mangle]
pub extern "C" fn cminet_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Build a table from a row-major `n_samples * n_taxa` buffer. `taxa` may be
/// NULL, in which case taxa are named `T1 ...`.
///
/// # Safety
/// `values` must point to `n_samples * n_taxa` doubles; `taxa`, when not
/// NULL, to `n_taxa` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn cminet_table_new(
    values: *const f64,
    n_samples: usize,
    n_taxa: usize,
    taxa: *const *const c_char,
    out: *mut *mut CminetTable,
) -> CminetStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if values.is_null() {
            return Err(null("values"));
        }
        let len = n_samples
            .checked_mul(n_taxa)
            .ok_or((CminetStatus::InvalidArgument, "table size overflows".to_string()))?;
        let data = std::slice::from_raw_parts(values, len).to_vec();
        let m = Array2::from_shape_vec((n_samples, n_taxa), data)
            .map_err(|e| (CminetStatus::InvalidArgument, e.to_string()))?;
        let table = if taxa.is_null() {
            CountTable::from_matrix(m).map_err(lib_err)?
        } else {
            let names = (0..n_taxa)
                .map(|j| str_arg(*taxa.add(j), "taxon label").map(str::to_string))
                .collect::<Result<Vec<_>, _>>()?;
            let samples = (1..=n_samples).map(|i| format!("S{i}")).collect();
            CountTable::new(m, names, samples).map_err(lib_err)?
        };
        *out = Box::into_raw(Box::new(CminetTable { inner: table }));
        Ok(())
    })
}

/// Read a delimited count table; `taxa_in_rows` nonzero means taxa are rows.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cminet_table_load(
    path: *const c_char,
    taxa_in_rows: i32,
    out: *mut *mut CminetTable,
) -> CminetStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let path = str_arg(path, "path")?;
        let orientation = if taxa_in_rows != 0 {
            Orientation::TaxaInRows
        } else {
            Orientation::SamplesInRows
        };
        let t = load_count_table(path, orientation).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(CminetTable { inner: t }));
        Ok(())
    })
}

/// # Safety
/// `t` must be NULL or a table handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cminet_table_free(t: *mut CminetTable) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// # Safety
/// `t` must be a live table handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn cminet_table_n_taxa(t: *const CminetTable) -> usize {
    t.as_ref().map_or(0, |t| t.inner.n_taxa())
}

/// # Safety
/// `t` must be a live table handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn cminet_table_n_samples(t: *const CminetTable) -> usize {
    t.as_ref().map_or(0, |t| t.inner.n_samples())
}

/// Run one method (`"pearson"`, `"se_mb"`, ...) with default parameters and
/// its default binarization rule. `seed` is treated as a pipeline master seed.
///
/// # Safety
/// `t` must be a live table handle, `method` a NUL-terminated string and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cminet_run_method(
    t: *const CminetTable,
    method: *const c_char,
    seed: u64,
    out: *mut *mut CminetNetwork,
) -> CminetStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let t = t.as_ref().ok_or_else(|| null("table"))?;
        let m: Method = str_arg(method, "method")?
            .parse()
            .map_err(|e: Error| (CminetStatus::InvalidArgument, e.to_string()))?;
        let cfg = PipelineConfig {
            seed,
            ..PipelineConfig::default()
        };
        let r = run_method(&t.inner, m, &cfg).map_err(lib_err)?;
        let net = binarize(&r, &BinarizationRule::default_for(m)).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(CminetNetwork { inner: net }));
        Ok(())
    })
}

/// Seed a method receives in a pipeline run with master seed `master`;
/// `master` itself for an unknown method name.
///
/// # Safety
/// `method` must be NULL or a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cminet_method_seed(master: u64, method: *const c_char) -> u64 {
    let m = str_arg(method, "method")
        .ok()
        .and_then(|s| s.parse::<Method>().ok());
    m.map_or(master, |m| method_seed(master, m))
}

/// Build a network from a row-major `p * p` 0/1 adjacency buffer.
///
/// # Safety
/// `adjacency` must hold `p * p` bytes and `taxa` `p` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn cminet_network_new(
    adjacency: *const u8,
    p: usize,
    taxa: *const *const c_char,
    name: *const c_char,
    out: *mut *mut CminetNetwork,
) -> CminetStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if adjacency.is_null() || taxa.is_null() {
            return Err(null("adjacency or taxa"));
        }
        let adj = Array2::from_shape_vec((p, p), std::slice::from_raw_parts(adjacency, p * p).to_vec())
            .map_err(|e| (CminetStatus::InvalidArgument, e.to_string()))?;
        let names = (0..p)
            .map(|j| str_arg(*taxa.add(j), "taxon label").map(str::to_string))
            .collect::<Result<Vec<_>, _>>()?;
        let name = if name.is_null() { "network" } else { str_arg(name, "name")? };
        let net = BinaryNetwork::new(adj, names, cminet::graph::Provenance::method(name)).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(CminetNetwork { inner: net }));
        Ok(())
    })
}

/// # Safety
/// `n` must be NULL or a network handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cminet_network_free(n: *mut CminetNetwork) {
    if !n.is_null() {
        drop(Box::from_raw(n));
    }
}

/// # Safety
/// `n` must be a live network handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn cminet_network_dim(n: *const CminetNetwork) -> usize {
    n.as_ref().map_or(0, |n| n.inner.dim())
}

/// # Safety
/// `n` must be a live network handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn cminet_network_edge_count(n: *const CminetNetwork) -> usize {
    n.as_ref().map_or(0, |n| n.inner.edge_count())
}

/// Copy the row-major adjacency into `buf`, which must hold `dim * dim` bytes.
///
/// # Safety
/// `buf` must be writable for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn cminet_network_adjacency(n: *const CminetNetwork, buf: *mut u8, len: usize) -> CminetStatus {
    guard(|| {
        let n = n.as_ref().ok_or_else(|| null("network"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let adj = n.inner.adjacency();
        if len != adj.len() {
            return Err((
                CminetStatus::InvalidArgument,
                format!("buffer holds {len} bytes, adjacency has {}", adj.len()),
            ));
        }
        let dst = std::slice::from_raw_parts_mut(buf, len);
        for (d, s) in dst.iter_mut().zip(adj.iter()) {
            *d = *s;
        }
        Ok(())
    })
}

/// # Safety
/// `nets` must point to `m` live network handles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cminet_consensus_new(
    nets: *const *const CminetNetwork,
    m: usize,
    out: *mut *mut CminetConsensus,
) -> CminetStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if nets.is_null() {
            return Err(null("nets"));
        }
        let list = (0..m)
            .map(|k| {
                (*nets.add(k))
                    .as_ref()
                    .map(|n| n.inner.clone())
                    .ok_or_else(|| null("network"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let c = build_consensus(&list).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(CminetConsensus { inner: c }));
        Ok(())
    })
}

/// # Safety
/// `c` must be NULL or a consensus handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cminet_consensus_free(c: *mut CminetConsensus) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Copy the row-major vote counts into `buf` of `dim * dim` entries.
///
/// # Safety
/// `buf` must be writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn cminet_consensus_weights(c: *const CminetConsensus, buf: *mut u32, len: usize) -> CminetStatus {
    guard(|| {
        let c = c.as_ref().ok_or_else(|| null("consensus"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let w = c.inner.weights();
        if len != w.len() {
            return Err((
                CminetStatus::InvalidArgument,
                format!("buffer holds {len} values, weights have {}", w.len()),
            ));
        }
        let dst = std::slice::from_raw_parts_mut(buf, len);
        for (d, s) in dst.iter_mut().zip(w.iter()) {
            *d = *s;
        }
        Ok(())
    })
}

/// Edges supported by more than `t` networks.
///
/// # Safety
/// `c` must be a live consensus handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cminet_consensus_threshold(
    c: *const CminetConsensus,
    t: usize,
    out: *mut *mut CminetNetwork,
) -> CminetStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let c = c.as_ref().ok_or_else(|| null("consensus"))?;
        let net = threshold_network(&c.inner, t).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(CminetNetwork { inner: net }));
        Ok(())
    })
}

fn parse_format(s: &str) -> Result<ExportFormat, (CminetStatus, String)> {
    s.parse().map_err(|e: Error| (CminetStatus::InvalidArgument, e.to_string()))
}

fn emit(text: String, out: &mut *mut c_char) -> Result<(), (CminetStatus, String)> {
    let s = CString::new(text).map_err(|_| (CminetStatus::Export, "output contains NUL".to_string()))?;
    *out = s.into_raw();
    Ok(())
}

/// Serialize a network as `"graphml"`, `"dot"` or `"edgelist_tsv"`. Free the
/// string with [`cminet_string_free`].
///
/// # Safety
/// `n` must be a live network handle, `format` a C string, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn cminet_network_export(
    n: *const CminetNetwork,
    format: *const c_char,
    out: *mut *mut c_char,
) -> CminetStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let n = n.as_ref().ok_or_else(|| null("network"))?;
        let f = parse_format(str_arg(format, "format")?)?;
        emit(export(&ExportGraph::from_network(&n.inner), f), out)
    })
}

/// Serialize the consensus, all edges when `t < 0`, else those above `t`.
///
/// # Safety
/// `c` must be a live consensus handle, `format` a C string, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn cminet_consensus_export(
    c: *const CminetConsensus,
    t: i64,
    format: *const c_char,
    out: *mut *mut c_char,
) -> CminetStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let c = c.as_ref().ok_or_else(|| null("consensus"))?;
        let f = parse_format(str_arg(format, "format")?)?;
        let t = usize::try_from(t).ok();
        let g = ExportGraph::from_consensus(&c.inner, t).map_err(lib_err)?;
        emit(export(&g, f), out)
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cminet_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Run the full pipeline from a TOML config file. Returns `Partial` when some
/// methods failed but outputs were written.
///
/// # Safety
/// `config_path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cminet_pipeline_run(config_path: *const c_char) -> CminetStatus {
    let mut partial = None;
    let status = guard(|| {
        let path = str_arg(config_path, "config_path")?;
        let cfg = PipelineConfig::load(path).map_err(lib_err)?;
        let summary = run_pipeline(&cfg).map_err(lib_err)?;
        if summary.consensus.is_none() {
            return Err((CminetStatus::Consensus, "fewer than 2 methods succeeded".into()));
        }
        if !summary.failed.is_empty() {
            let names: Vec<&str> = summary.failed.iter().map(|(m, _)| m.as_str()).collect();
            partial = Some(format!("failed methods: {}", names.join(", ")));
        }
        Ok(())
    });
    match (status, partial) {
        (CminetStatus::Ok, Some(msg)) => {
            set_error(msg);
            CminetStatus::Partial
        }
        (s, _) => s,
    }
}
