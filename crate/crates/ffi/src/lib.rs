//! C ABI for the label auditing library.
//!
//! Objects cross the boundary as opaque handles that the caller frees with
//! the matching `*_free` function. Every fallible call returns an
//! [`LaStatus`]; on failure, [`la_last_error`] describes what went wrong on
//! the calling thread. Strings are UTF-8 and NUL-terminated.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use labelaudit::audit::{run_audit, AuditOptions, AuditReport, ThresholdPolicy};
use labelaudit::base::{load_softmax, train_base, BaseConfig, SoftmaxMatrix};
use labelaudit::conformal::{fn_threshold, fp_threshold};
use labelaudit::graph::{load_graph, Graph};
use labelaudit::pipeline::PipelineConfig;
use labelaudit::{Error, ErrorKind};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// Bad parameter value, including non-UTF-8 strings.
    InvalidArgument = 2,
    /// Unreadable or malformed input data.
    DataError = 3,
    /// A conformal guarantee cannot be met at this sample size.
    Unattainable = 4,
    /// Internal inconsistency or a caught panic.
    Internal = 5,
}

/// Which conformal guarantee to select a threshold for.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaGuarantee {
    FalsePositive = 0,
    FalseNegative = 1,
}

/// A loaded graph dataset.
pub struct LaGraph {
    inner: Graph,
}

/// Base-classifier probabilities, one row per node.
pub struct LaSoftmax {
    inner: SoftmaxMatrix,
}

/// A ranked audit report.
pub struct LaReport {
    inner: AuditReport,
}

/// One ranked node of a report.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LaRecord {
    pub node_id: usize,
    pub given_label: usize,
    pub score: f64,
    pub flagged: bool,
    /// Suggested label, or -1 when the node is not flagged.
    pub suggested_label: i64,
}

/// A selected conformal threshold.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LaConformal {
    pub n_total: usize,
    /// 1-based order-statistic index.
    pub b_index: usize,
    pub lambda: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Fail {
    Null(&'static str),
    Arg(String),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn status_of(e: &Error) -> LaStatus {
    match e {
        Error::GuaranteeUnattainable { .. } => LaStatus::Unattainable,
        Error::Module { source, .. } => status_of(source),
        e => match e.kind() {
            ErrorKind::Usage => LaStatus::InvalidArgument,
            ErrorKind::Data => LaStatus::DataError,
            ErrorKind::Internal => LaStatus::Internal,
        },
    }
}

/// Runs `f`, converting errors and panics into a status plus message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> LaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LaStatus::Ok,
        Ok(Err(Fail::Null(name))) => {
            set_error(format!("argument `{name}` is null"));
            LaStatus::NullArgument
        }
        Ok(Err(Fail::Arg(msg))) => {
            set_error(msg);
            LaStatus::InvalidArgument
        }
        Ok(Err(Fail::Lib(e))) => {
            let status = status_of(&e);
            set_error(e.to_string());
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            LaStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Arg(format!("argument `{name}` is not valid UTF-8")))
}

unsafe fn path_arg(p: *const c_char, name: &'static str) -> Result<PathBuf, Fail> {
    str_arg(p, name).map(PathBuf::from)
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(name))
}

fn out_arg<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    // SAFETY: checked non-null; the caller provides writable storage.
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn la_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn la_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a graph. `features` may be null; `num_classes == 0` infers the
/// class count from the labels.
///
/// # Safety
/// String arguments must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn la_graph_load(
    edges: *const c_char,
    labels: *const c_char,
    splits: *const c_char,
    features: *const c_char,
    num_classes: usize,
    out: *mut *mut LaGraph,
) -> LaStatus {
    guard(|| {
        let edges = path_arg(edges, "edges")?;
        let labels = path_arg(labels, "labels")?;
        let splits = path_arg(splits, "splits")?;
        let features = if features.is_null() {
            None
        } else {
            Some(path_arg(features, "features")?)
        };
        let c = (num_classes > 0).then_some(num_classes);
        let (g, _) = load_graph(&edges, &labels, &splits, features.as_deref(), c)?;
        out_arg(out, LaGraph { inner: g })
    })
}

/// # Safety
/// `g` must be null or a live handle from [`la_graph_load`].
#[no_mangle]
pub unsafe extern "C" fn la_graph_num_nodes(g: *const LaGraph) -> usize {
    g.as_ref().map_or(0, |g| g.inner.num_nodes())
}

/// # Safety
/// `g` must be null or a live handle from [`la_graph_load`].
#[no_mangle]
pub unsafe extern "C" fn la_graph_num_classes(g: *const LaGraph) -> usize {
    g.as_ref().map_or(0, |g| g.inner.num_classes())
}

/// # Safety
/// `g` must be null or a live handle from [`la_graph_load`].
#[no_mangle]
pub unsafe extern "C" fn la_graph_num_edges(g: *const LaGraph) -> usize {
    g.as_ref().map_or(0, |g| g.inner.num_edges())
}

/// # Safety
/// `g` must be null or a handle from [`la_graph_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn la_graph_free(g: *mut LaGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Reads probabilities shaped to match `g`.
///
/// # Safety
/// `path` must be NUL-terminated, `g` a live handle, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn la_softmax_load(
    path: *const c_char,
    g: *const LaGraph,
    out: *mut *mut LaSoftmax,
) -> LaStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        let g = ref_arg(g, "g")?;
        let p = load_softmax(&path, g.inner.num_nodes(), g.inner.num_classes())?;
        out_arg(out, LaSoftmax { inner: p })
    })
}

/// Trains the built-in classifier on the graph's training split.
///
/// # Safety
/// `g` must be a live handle with features; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn la_softmax_train(g: *const LaGraph, seed: u64, out: *mut *mut LaSoftmax) -> LaStatus {
    guard(|| {
        let g = ref_arg(g, "g")?;
        let trained = train_base(
            &g.inner,
            BaseConfig {
                seed,
                ..BaseConfig::default()
            },
        )?;
        out_arg(
            out,
            LaSoftmax {
                inner: trained.probabilities,
            },
        )
    })
}

/// Probability of `class` at `node`, or NaN when out of range.
///
/// # Safety
/// `p` must be null or a live softmax handle.
#[no_mangle]
pub unsafe extern "C" fn la_softmax_get(p: *const LaSoftmax, node: usize, class: usize) -> f64 {
    match p.as_ref() {
        Some(p) if node < p.inner.num_nodes() && class < p.inner.num_classes() => p.inner.row(node)[class],
        _ => f64::NAN,
    }
}

/// # Safety
/// `p` must be null or a softmax handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn la_softmax_free(p: *mut LaSoftmax) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Runs a full audit. `threshold` uses the CLI syntax (`fixed:0.97`,
/// `bayes:0.05`, `conformal-fp:0.1,0.05`, `conformal-fn:0.1,0.05`); null
/// selects the default.
///
/// # Safety
/// `g` and `p` must be live handles, `threshold` null or NUL-terminated,
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn la_audit_run(
    g: *const LaGraph,
    p: *const LaSoftmax,
    k_hops: usize,
    threshold: *const c_char,
    seed: u64,
    out: *mut *mut LaReport,
) -> LaStatus {
    guard(|| {
        let g = ref_arg(g, "g")?;
        let p = ref_arg(p, "p")?;
        let policy: ThresholdPolicy = if threshold.is_null() {
            ThresholdPolicy::default()
        } else {
            str_arg(threshold, "threshold")?.parse()?
        };
        let opts = AuditOptions {
            dataset: "ffi".into(),
            pipeline: PipelineConfig {
                k_hops,
                seed,
                ..PipelineConfig::default()
            },
            threshold: policy,
            softmax_source: "caller".into(),
        };
        let audit = run_audit(&g.inner, &p.inner, &opts)?;
        out_arg(out, LaReport { inner: audit.report })
    })
}

/// Reads a report written by the CLI or [`la_report_write_json`].
///
/// # Safety
/// `path` must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn la_report_load(path: *const c_char, out: *mut *mut LaReport) -> LaStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        out_arg(
            out,
            LaReport {
                inner: AuditReport::load(&path)?,
            },
        )
    })
}

/// Number of ranked records.
///
/// # Safety
/// `r` must be null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn la_report_len(r: *const LaReport) -> usize {
    r.as_ref().map_or(0, |r| r.inner.records.len())
}

/// # Safety
/// `r` must be null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn la_report_num_flagged(r: *const LaReport) -> usize {
    r.as_ref().map_or(0, |r| r.inner.num_flagged())
}

/// Cutoff the report's threshold policy resolved to, or NaN for null.
///
/// # Safety
/// `r` must be null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn la_report_cutoff(r: *const LaReport) -> f64 {
    r.as_ref().map_or(f64::NAN, |r| r.inner.config.threshold.cutoff)
}

/// Record at rank `index` (0 = highest score).
///
/// # Safety
/// `r` must be a live report handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn la_report_record(r: *const LaReport, index: usize, out: *mut LaRecord) -> LaStatus {
    guard(|| {
        let r = ref_arg(r, "r")?;
        let rec = r.inner.records.get(index).ok_or_else(|| {
            Fail::Arg(format!("index {index} out of range for {} records", r.inner.records.len()))
        })?;
        let out = out.as_mut().ok_or(Fail::Null("out"))?;
        *out = LaRecord {
            node_id: rec.node_id,
            given_label: rec.given_label,
            score: rec.mislabel_score,
            flagged: rec.flagged,
            suggested_label: rec.suggested_label.map_or(-1, |l| l as i64),
        };
        Ok(())
    })
}

/// Writes the report as JSON.
///
/// # Safety
/// `r` must be a live report handle and `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn la_report_write_json(r: *const LaReport, path: *const c_char) -> LaStatus {
    guard(|| {
        let r = ref_arg(r, "r")?;
        let path = path_arg(path, "path")?;
        r.inner.save(&path)?;
        Ok(())
    })
}

/// # Safety
/// `r` must be null or a report handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn la_report_free(r: *mut LaReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Selects a conformal threshold over `n` scores where a fraction `p` is
/// expected to be mislabelled.
///
/// # Safety
/// `scores` must point to `n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn la_conformal_threshold(
    scores: *const f64,
    n: usize,
    p: f64,
    alpha: f64,
    mode: LaGuarantee,
    out: *mut LaConformal,
) -> LaStatus {
    guard(|| {
        if scores.is_null() && n > 0 {
            return Err(Fail::Null("scores"));
        }
        let s: &[f64] = if n == 0 { &[] } else { std::slice::from_raw_parts(scores, n) };
        let t = match mode {
            LaGuarantee::FalsePositive => fp_threshold(s, p, alpha)?,
            LaGuarantee::FalseNegative => fn_threshold(s, p, alpha)?,
        };
        let out = out.as_mut().ok_or(Fail::Null("out"))?;
        *out = LaConformal {
            n_total: t.n_total,
            b_index: t.b_index,
            lambda: t.lambda,
        };
        Ok(())
    })
}
