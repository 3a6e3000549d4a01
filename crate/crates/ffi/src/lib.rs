// SPDX-License-Identifier: Apache-2.0

//! C ABI for gitclock.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `*_free` function. Strings returned by this library
//! are NUL-terminated UTF-8 and released with [`gc_string_free`]. Every
//! fallible call returns a [`GcStatus`]; on failure, [`gc_last_error`]
//! describes the problem until the next call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gitclock::detect::DetectorConfig;
use gitclock::filter::{apply_policies, PolicyFile, RemovalLedger};
use gitclock::ingest::{parse_commit_stream, InputFormat, MalformedRecord, ParseOptions};
use gitclock::model::{format_utc, AnomalyKind, CommitRecord, DateField, Timestamp};
use gitclock::pipeline::{run_audit, AuditOptions, Detector};
use gitclock::report::{to_json, AuditReport, InputSummary, RunConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    ParseError = 4,
    PolicyError = 5,
    AuditError = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GcFormat {
    Ndjson = 0,
    Gitlog = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GcDateField {
    Committer = 0,
    Author = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GcAnomalyKind {
    Old = 0,
    Future = 1,
    OutOfOrderLinear = 2,
    OutOfOrderParent = 3,
    ToolSignature = 4,
    VerifiedMismatch = 5,
}

pub const GC_DETECT_OLD: u32 = 1;
pub const GC_DETECT_FUTURE: u32 = 1 << 1;
pub const GC_DETECT_OUT_OF_ORDER: u32 = 1 << 2;
pub const GC_DETECT_SIGNATURES: u32 = 1 << 3;
pub const GC_DETECT_VERIFIED: u32 = 1 << 4;
pub const GC_DETECT_ALL: u32 = 0x1f;

/// Detector settings. Dates are epoch seconds.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GcAuditConfig {
    /// Bitwise OR of `GC_DETECT_*`.
    pub detectors: u32,
    pub old_cutoff: i64,
    pub has_snapshot: bool,
    pub snapshot: i64,
    pub include_merges: bool,
    pub date_field: GcDateField,
}

/// A parsed commit export.
pub struct GcDataset {
    records: Vec<CommitRecord>,
    malformed: Vec<MalformedRecord>,
    ledgers: Vec<RemovalLedger>,
}

/// The result of [`gc_audit_run`].
pub struct GcAudit {
    report: AuditReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(text).expect("NULs removed")));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: GcStatus, msg: impl Into<String>) -> GcStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> GcStatus) -> GcStatus {
    clear_error();
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(GcStatus::Panic, "internal panic"))
}

unsafe fn opt_str<'a>(p: *const c_char) -> Result<Option<&'a str>, GcStatus> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Some)
        .map_err(|_| fail(GcStatus::InvalidUtf8, "string argument is not UTF-8"))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .expect("NULs removed")
        .into_raw()
}

/// Message describing the last failure on this thread, or NULL. The
/// pointer stays valid until the next call into this library.
#[no_mangle]
pub extern "C" fn gc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Defaults: every detector except `future`, the 1990-11-19 old cutoff,
/// merges excluded, committer dates.
#[no_mangle]
pub extern "C" fn gc_audit_config_default() -> GcAuditConfig {
    let d = DetectorConfig::default();
    GcAuditConfig {
        detectors: GC_DETECT_ALL & !GC_DETECT_FUTURE,
        old_cutoff: d.old_cutoff.epoch_seconds,
        has_snapshot: false,
        snapshot: 0,
        include_merges: false,
        date_field: GcDateField::Committer,
    }
}

/// Parses `len` bytes of NDJSON or gitlog export. `repo` names the
/// repository for gitlog input and may be NULL. Malformed records are
/// skipped and counted.
///
/// # Safety
/// `data` must point to `len` readable bytes; `repo` must be NULL or a
/// NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gc_dataset_parse(
    data: *const u8,
    len: usize,
    format: GcFormat,
    repo: *const c_char,
    out: *mut *mut GcDataset,
) -> GcStatus {
    guard(|| {
        if out.is_null() || (data.is_null() && len > 0) {
            return fail(GcStatus::NullPointer, "null argument");
        }
        let bytes: &[u8] = if len == 0 { &[] } else { std::slice::from_raw_parts(data, len) };
        let repo = match opt_str(repo) {
            Ok(r) => r,
            Err(s) => return s,
        };
        let format = match format {
            GcFormat::Ndjson => InputFormat::Ndjson,
            GcFormat::Gitlog => InputFormat::Gitlog,
        };
        let opts = ParseOptions {
            repo_id: repo.map(str::to_owned),
        };
        match parse_commit_stream(bytes, format, &opts) {
            Ok(parsed) => {
                *out = Box::into_raw(Box::new(GcDataset {
                    records: parsed.records,
                    malformed: parsed.errors,
                    ledgers: Vec::new(),
                }));
                GcStatus::Ok
            }
            Err(e) => fail(GcStatus::ParseError, e.to_string()),
        }
    })
}

/// Number of parsed records, or 0 for NULL.
///
/// # Safety
/// `ds` must be NULL or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn gc_dataset_len(ds: *const GcDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.records.len())
}

/// Number of malformed records skipped while parsing.
///
/// # Safety
/// `ds` must be NULL or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn gc_dataset_malformed(ds: *const GcDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.malformed.len())
}

/// Applies the policies in `policy_toml` (the policy file format) and
/// returns a new dataset holding the survivors. `config` supplies the
/// date field and merge handling and may be NULL for the defaults.
/// `removed` receives the number of commits removed and may be NULL.
///
/// # Safety
/// `ds` must be a live dataset handle, `policy_toml` a NUL-terminated
/// string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gc_dataset_filter(
    ds: *const GcDataset,
    policy_toml: *const c_char,
    config: *const GcAuditConfig,
    removed: *mut usize,
    out: *mut *mut GcDataset,
) -> GcStatus {
    guard(|| {
        let (Some(ds), false) = (ds.as_ref(), out.is_null()) else {
            return fail(GcStatus::NullPointer, "null argument");
        };
        let text = match opt_str(policy_toml) {
            Ok(Some(t)) => t,
            Ok(None) => return fail(GcStatus::NullPointer, "null policy text"),
            Err(s) => return s,
        };
        let policies = match PolicyFile::from_toml(text) {
            Ok(p) => p.policies,
            Err(e) => return fail(GcStatus::PolicyError, e.to_string()),
        };
        let cfg = match config.as_ref() {
            Some(c) => detector_config(c).0,
            None => DetectorConfig::default(),
        };
        match apply_policies(ds.records.clone(), &policies, &cfg) {
            Ok((kept, ledgers)) => {
                if !removed.is_null() {
                    *removed = ds.records.len() - kept.len();
                }
                let mut all = ds.ledgers.clone();
                all.extend(ledgers);
                *out = Box::into_raw(Box::new(GcDataset {
                    records: kept,
                    malformed: Vec::new(),
                    ledgers: all,
                }));
                GcStatus::Ok
            }
            Err(e) => fail(GcStatus::PolicyError, e.to_string()),
        }
    })
}

/// # Safety
/// `ds` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gc_dataset_free(ds: *mut GcDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

fn detector_config(c: &GcAuditConfig) -> (DetectorConfig, Vec<Detector>) {
    let cfg = DetectorConfig {
        old_cutoff: Timestamp::utc(c.old_cutoff),
        future_cutoff: c.has_snapshot.then(|| Timestamp::utc(c.snapshot)),
        exclude_merges: !c.include_merges,
        date_field: match c.date_field {
            GcDateField::Committer => DateField::Committer,
            GcDateField::Author => DateField::Author,
        },
    };
    let detectors = [
        (GC_DETECT_OLD, Detector::Old),
        (GC_DETECT_FUTURE, Detector::Future),
        (GC_DETECT_OUT_OF_ORDER, Detector::Ooo),
        (GC_DETECT_SIGNATURES, Detector::Signatures),
        (GC_DETECT_VERIFIED, Detector::Verified),
    ]
    .into_iter()
    .filter(|(bit, _)| c.detectors & bit != 0)
    .map(|(_, d)| d)
    .collect();
    (cfg, detectors)
}

/// Runs the detectors over `ds`. A NULL `config` means
/// [`gc_audit_config_default`].
///
/// # Safety
/// `ds` must be a live dataset handle, `config` NULL or readable, `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn gc_audit_run(
    ds: *const GcDataset,
    config: *const GcAuditConfig,
    out: *mut *mut GcAudit,
) -> GcStatus {
    guard(|| {
        let (Some(ds), false) = (ds.as_ref(), out.is_null()) else {
            return fail(GcStatus::NullPointer, "null argument");
        };
        let c = config.as_ref().copied().unwrap_or_else(|| gc_audit_config_default());
        if c.detectors & !GC_DETECT_ALL != 0 {
            return fail(GcStatus::InvalidArgument, "unknown detector bits");
        }
        let (cfg, detectors) = detector_config(&c);
        let opts = AuditOptions {
            detectors: detectors.iter().copied().collect(),
            config: cfg.clone(),
            policies: Vec::new(),
            workers: None,
        };
        let outcome = match run_audit(ds.records.clone(), &opts) {
            Ok(o) => o,
            Err(e) => return fail(GcStatus::AuditError, e.to_string()),
        };
        let run = RunConfig {
            inputs: Vec::new(),
            format: "memory".into(),
            repo: None,
            detectors: detectors.iter().map(|d| d.name().to_string()).collect(),
            detector_config: cfg,
            manifest: None,
            policies: ds.ledgers.iter().map(|l| l.policy.clone()).collect(),
        };
        let input = InputSummary {
            records_read: ds.records.len() + ds.malformed.len(),
            malformed: ds.malformed.clone(),
            dedup: outcome.dedup.clone(),
            repos: outcome.repos,
            commits_scanned: outcome.records.len(),
            dangling_parents: outcome.dangling_parents,
        };
        let report = AuditReport::new(
            run,
            input,
            outcome.anomalies,
            ds.ledgers.clone(),
            &outcome.records,
        );
        *out = Box::into_raw(Box::new(GcAudit { report }));
        GcStatus::Ok
    })
}

fn kind(k: GcAnomalyKind) -> AnomalyKind {
    match k {
        GcAnomalyKind::Old => AnomalyKind::Old,
        GcAnomalyKind::Future => AnomalyKind::Future,
        GcAnomalyKind::OutOfOrderLinear => AnomalyKind::OutOfOrderLinear,
        GcAnomalyKind::OutOfOrderParent => AnomalyKind::OutOfOrderParent,
        GcAnomalyKind::ToolSignature => AnomalyKind::ToolSignature,
        GcAnomalyKind::VerifiedMismatch => AnomalyKind::VerifiedMismatch,
    }
}

/// Distinct commits flagged with `kind`.
///
/// # Safety
/// `audit` must be NULL or a live audit handle.
#[no_mangle]
pub unsafe extern "C" fn gc_audit_count(audit: *const GcAudit, k: GcAnomalyKind) -> usize {
    audit
        .as_ref()
        .and_then(|a| a.report.summary.by_kind.get(&kind(k)).map(|s| s.commits))
        .unwrap_or(0)
}

/// Distinct commits flagged with any kind.
///
/// # Safety
/// `audit` must be NULL or a live audit handle.
#[no_mangle]
pub unsafe extern "C" fn gc_audit_total(audit: *const GcAudit) -> usize {
    audit.as_ref().map_or(0, |a| a.report.summary.total.commits)
}

/// The full audit report as JSON. Free the result with [`gc_string_free`].
///
/// # Safety
/// `audit` must be a live audit handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gc_audit_report_json(audit: *const GcAudit, out: *mut *mut c_char) -> GcStatus {
    guard(|| {
        let (Some(a), false) = (audit.as_ref(), out.is_null()) else {
            return fail(GcStatus::NullPointer, "null argument");
        };
        *out = into_c_string(to_json(&a.report));
        GcStatus::Ok
    })
}

/// # Safety
/// `audit` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gc_audit_free(audit: *mut GcAudit) {
    if !audit.is_null() {
        drop(Box::from_raw(audit));
    }
}

/// `YYYY-MM-DD HH:MM:SS UTC` for epoch seconds. Free with [`gc_string_free`].
#[no_mangle]
pub extern "C" fn gc_format_utc(epoch_seconds: i64) -> *mut c_char {
    into_c_string(format_utc(Timestamp::utc(epoch_seconds)))
}

/// # Safety
/// `s` must be NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
