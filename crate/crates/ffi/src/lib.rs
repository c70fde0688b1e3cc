//! C ABI for the simulator and scoring pipeline.
//!
//! Every object crosses the boundary as an opaque handle created by an
//! `ecq_*_new`/`ecq_*_from_*` function and released with the matching
//! `ecq_*_free`. Fallible calls return an [`EcqStatus`]; on failure the
//! message is available from [`ecq_last_error`] on the same thread. Strings
//! handed out by the library are released with [`ecq_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ecq::ecq::{score_runs, summarize, EcqResult as Summary, ScoreMatrix};
use ecq::engine::{self, SimConfig};
use ecq::report;
use ecq::{Policy, RunProtocol, ValueModel};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EcqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Config = 4,
    Simulation = 5,
    Protocol = 6,
    ValueModel = 7,
    Scoring = 8,
    Io = 9,
    Panic = 10,
}

/// A validated simulation configuration.
pub struct EcqConfig {
    inner: SimConfig,
}

/// The event log of one run.
pub struct EcqProtocol {
    inner: RunProtocol,
}

/// A list of protocols produced by a batch.
pub struct EcqBatch {
    inner: Vec<RunProtocol>,
}

pub struct EcqValueModel {
    inner: ValueModel,
}

/// Per-run scores plus per-policy summary statistics.
pub struct EcqScores {
    matrix: ScoreMatrix,
    summary: Summary,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

struct Failure(EcqStatus, String);

fn fail<T>(status: EcqStatus, msg: impl ToString) -> Result<T, Failure> {
    Err(Failure(status, msg.to_string()))
}

/// Run `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> EcqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            EcqStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            EcqStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return fail(EcqStatus::NullPointer, format!("{name} is NULL"));
    }
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(EcqStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure(EcqStatus::NullPointer, format!("{name} is NULL")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return fail(EcqStatus::NullPointer, "output pointer is NULL");
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    if out.is_null() {
        return fail(EcqStatus::NullPointer, "output pointer is NULL");
    }
    let c = CString::new(s).or_else(|_| fail(EcqStatus::InvalidArgument, "string contains NUL"))?;
    *out = c.into_raw();
    Ok(())
}

unsafe fn check_out<T>(out: *mut *mut T) -> Result<(), Failure> {
    if out.is_null() {
        return fail(EcqStatus::NullPointer, "output pointer is NULL");
    }
    *out = ptr::null_mut();
    Ok(())
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn ecq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn ecq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ecq_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parse a JSON configuration. A relative plan path is resolved against
/// `base_dir` (may be NULL for the current directory).
///
/// # Safety
/// Strings must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ecq_config_from_json(
    json: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut EcqConfig,
) -> EcqStatus {
    guard(|| {
        check_out(out)?;
        let json = str_arg(json, "json")?;
        let base = if base_dir.is_null() { "." } else { str_arg(base_dir, "base_dir")? };
        let inner = SimConfig::from_json(json, Path::new(base)).or_else(|e| fail(EcqStatus::Config, e))?;
        put(out, EcqConfig { inner })
    })
}

/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ecq_config_from_file(path: *const c_char, out: *mut *mut EcqConfig) -> EcqStatus {
    guard(|| {
        check_out(out)?;
        let path = str_arg(path, "path")?;
        let inner = SimConfig::from_path(Path::new(path)).or_else(|e| fail(EcqStatus::Config, e))?;
        put(out, EcqConfig { inner })
    })
}

/// Self-contained JSON form of the configuration (plan inlined).
///
/// # Safety
/// `config` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ecq_config_to_json(config: *const EcqConfig, out: *mut *mut c_char) -> EcqStatus {
    guard(|| {
        check_out(out)?;
        let config = handle(config, "config")?;
        put_string(out, config.inner.to_json())
    })
}

/// # Safety
/// `config` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ecq_config_free(config: *mut EcqConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Simulate one run. `policy` overrides the configured policy when not
/// NULL (e.g. `"Watch(2)"`).
///
/// # Safety
/// `config` must be a live handle; `policy` NULL or NUL-terminated; `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ecq_run(
    config: *const EcqConfig,
    policy: *const c_char,
    seed: u64,
    out: *mut *mut EcqProtocol,
) -> EcqStatus {
    guard(|| {
        check_out(out)?;
        let config = handle(config, "config")?;
        let inner = if policy.is_null() {
            engine::run(&config.inner, seed)
        } else {
            let p: Policy = str_arg(policy, "policy")?.parse().or_else(|e| fail(EcqStatus::InvalidArgument, e))?;
            engine::run(&config.inner.with_policy(p), seed)
        }
        .or_else(|e| fail(EcqStatus::Simulation, e))?;
        put(out, EcqProtocol { inner })
    })
}

/// Parse a protocol log.
///
/// # Safety
/// `log` must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ecq_protocol_from_log(log: *const c_char, out: *mut *mut EcqProtocol) -> EcqStatus {
    guard(|| {
        check_out(out)?;
        let inner = RunProtocol::from_log(str_arg(log, "log")?).or_else(|e| fail(EcqStatus::Protocol, e))?;
        put(out, EcqProtocol { inner })
    })
}

/// Serialize a protocol to its line-delimited JSON log.
///
/// # Safety
/// `protocol` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ecq_protocol_to_log(protocol: *const EcqProtocol, out: *mut *mut c_char) -> EcqStatus {
    guard(|| {
        check_out(out)?;
        put_string(out, handle(protocol, "protocol")?.inner.to_log())
    })
}

/// Tick of the terminal event, or 0 for a NULL handle.
///
/// # Safety
/// `protocol` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ecq_protocol_terminal_tick(protocol: *const EcqProtocol) -> u32 {
    protocol.as_ref().map_or(0, |p| p.inner.terminal_tick())
}

/// Number of events, or 0 for a NULL handle.
///
/// # Safety
/// `protocol` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ecq_protocol_event_count(protocol: *const EcqProtocol) -> usize {
    protocol.as_ref().map_or(0, |p| p.inner.events.len())
}

/// Check the protocol against the event grammar.
///
/// # Safety
/// `protocol` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ecq_protocol_validate(protocol: *const EcqProtocol) -> EcqStatus {
    guard(|| {
        handle(protocol, "protocol")?
            .inner
            .validate()
            .or_else(|e| fail(EcqStatus::Protocol, e))
    })
}

/// Trajectory figure as an SVG document.
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ecq_protocol_trajectory_svg(
    protocol: *const EcqProtocol,
    config: *const EcqConfig,
    out: *mut *mut c_char,
) -> EcqStatus {
    guard(|| {
        check_out(out)?;
        let p = handle(protocol, "protocol")?;
        let c = handle(config, "config")?;
        let svg = report::emit_trajectory_plot(&p.inner, &c.inner.plan).or_else(|e| fail(EcqStatus::Protocol, e))?;
        put_string(out, svg)
    })
}

/// # Safety
/// `protocol` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ecq_protocol_free(protocol: *mut EcqProtocol) {
    if !protocol.is_null() {
        drop(Box::from_raw(protocol));
    }
}

/// Seeded batch over a policy list such as `"NoHelp,NurseOnly,Watch(0..5)"`.
/// `jobs` = 0 uses every core.
///
/// # Safety
/// `config` must be a live handle; `policies` NUL-terminated; `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ecq_batch_run(
    config: *const EcqConfig,
    policies: *const c_char,
    runs_per_policy: usize,
    master_seed: u64,
    jobs: usize,
    out: *mut *mut EcqBatch,
) -> EcqStatus {
    guard(|| {
        check_out(out)?;
        let config = handle(config, "config")?;
        let list = Policy::parse_list(str_arg(policies, "policies")?).or_else(|e| fail(EcqStatus::InvalidArgument, e))?;
        let jobs = (jobs > 0).then_some(jobs);
        let inner = engine::batch(&config.inner, &list, runs_per_policy, master_seed, jobs)
            .or_else(|e| fail(EcqStatus::Simulation, e))?;
        put(out, EcqBatch { inner })
    })
}

/// # Safety
/// `batch` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ecq_batch_len(batch: *const EcqBatch) -> usize {
    batch.as_ref().map_or(0, |b| b.inner.len())
}

/// Copy out the protocol at `index`.
///
/// # Safety
/// `batch` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ecq_batch_get(batch: *const EcqBatch, index: usize, out: *mut *mut EcqProtocol) -> EcqStatus {
    guard(|| {
        check_out(out)?;
        let b = handle(batch, "batch")?;
        let p = b.inner.get(index).ok_or_else(|| {
            Failure(EcqStatus::InvalidArgument, format!("index {index} out of range 0..{}", b.inner.len()))
        })?;
        put(out, EcqProtocol { inner: p.clone() })
    })
}

/// # Safety
/// `batch` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ecq_batch_free(batch: *mut EcqBatch) {
    if !batch.is_null() {
        drop(Box::from_raw(batch));
    }
}

/// The shipped default value model.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ecq_value_model_default(out: *mut *mut EcqValueModel) -> EcqStatus {
    guard(|| {
        check_out(out)?;
        put(out, EcqValueModel { inner: ValueModel::default_model() })
    })
}

/// Parse a value-model file body.
///
/// # Safety
/// `text` must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ecq_value_model_parse(text: *const c_char, out: *mut *mut EcqValueModel) -> EcqStatus {
    guard(|| {
        check_out(out)?;
        let inner = ValueModel::parse(str_arg(text, "text")?).or_else(|e| fail(EcqStatus::ValueModel, e))?;
        put(out, EcqValueModel { inner })
    })
}

/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ecq_value_model_free(model: *mut EcqValueModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Score every protocol of a batch and summarize per policy.
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ecq_score(
    batch: *const EcqBatch,
    config: *const EcqConfig,
    model: *const EcqValueModel,
    out: *mut *mut EcqScores,
) -> EcqStatus {
    guard(|| {
        check_out(out)?;
        let b = handle(batch, "batch")?;
        let c = handle(config, "config")?;
        let m = handle(model, "model")?;
        let matrix = score_runs(&b.inner, &c.inner.plan, &m.inner).or_else(|e| fail(EcqStatus::Scoring, e))?;
        let summary = summarize(&matrix).or_else(|e| fail(EcqStatus::Scoring, e))?;
        put(out, EcqScores { matrix, summary })
    })
}

/// Summary table (`policy,dimension,n,mean,...`).
///
/// # Safety
/// `scores` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ecq_scores_summary_csv(scores: *const EcqScores, out: *mut *mut c_char) -> EcqStatus {
    guard(|| {
        check_out(out)?;
        put_string(out, report::emit_csv(&handle(scores, "scores")?.summary))
    })
}

/// Per-run score table (`policy,run_id,<dimensions>`).
///
/// # Safety
/// `scores` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ecq_scores_runs_csv(scores: *const EcqScores, out: *mut *mut c_char) -> EcqStatus {
    guard(|| {
        check_out(out)?;
        put_string(out, handle(scores, "scores")?.matrix.to_csv())
    })
}

/// Mean violation of one policy on one dimension.
///
/// # Safety
/// `scores` must be a live handle; strings NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ecq_scores_mean(
    scores: *const EcqScores,
    policy: *const c_char,
    dimension: *const c_char,
    out: *mut f64,
) -> EcqStatus {
    guard(|| {
        if out.is_null() {
            return fail(EcqStatus::NullPointer, "output pointer is NULL");
        }
        let s = handle(scores, "scores")?;
        let p: Policy = str_arg(policy, "policy")?.parse().or_else(|e| fail(EcqStatus::InvalidArgument, e))?;
        let d = str_arg(dimension, "dimension")?;
        let stats = s
            .summary
            .stats_for(p, d)
            .ok_or_else(|| Failure(EcqStatus::InvalidArgument, format!("no scores for {p} on {d:?}")))?;
        *out = stats.mean;
        Ok(())
    })
}

/// Box plot of one dimension as an SVG document.
///
/// # Safety
/// `scores` must be a live handle; `dimension` NUL-terminated; `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ecq_scores_box_svg(
    scores: *const EcqScores,
    dimension: *const c_char,
    out: *mut *mut c_char,
) -> EcqStatus {
    guard(|| {
        check_out(out)?;
        let s = handle(scores, "scores")?;
        let svg = report::emit_box_plot(&s.summary, str_arg(dimension, "dimension")?)
            .or_else(|e| fail(EcqStatus::InvalidArgument, e))?;
        put_string(out, svg)
    })
}

/// # Safety
/// `scores` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ecq_scores_free(scores: *mut EcqScores) {
    if !scores.is_null() {
        drop(Box::from_raw(scores));
    }
}
