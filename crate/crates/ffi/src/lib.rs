// SPDX-License-Identifier: Apache-2.0

//! C ABI over the canonicalization engine.
//!
//! Objects cross the boundary as opaque handles that the caller frees with
//! the matching `*_free` function. Every fallible call returns a
//! [`TcStatus`]; on failure [`tc_last_error`] describes what went wrong on
//! the calling thread. Strings returned through `char **` are owned by the
//! caller and released with [`tc_string_free`]. Panics never unwind into C:
//! they surface as `TC_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tablecanon::ops::{ExecError, ExecPolicy, Execution};
use tablecanon::plan::{parse_plan, validate_plan_with, TransformationPlan, ValidateOptions};
use tablecanon::qa::{compute_f1, format_answer};
use tablecanon::structure::{make_lossless, recover_raw, LossAudit};
use tablecanon::table::{ingest_csv, ingest_markdown, write_csv, CsvOptions, Table};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Input text could not be parsed as a table, plan or JSON value.
    Parse = 3,
    /// The plan has blocking findings.
    Validation = 4,
    /// A step failed while executing.
    Execution = 5,
    /// Execution succeeded but some raw value is not recoverable.
    NotLossless = 6,
    Panic = 99,
}

/// A parsed table.
pub struct TcTable {
    table: Table,
}

/// A parsed transformation plan.
pub struct TcPlan {
    plan: TransformationPlan,
}

/// A canonical table with its step traces and loss audit.
pub struct TcExecution {
    execution: Execution,
    audit: LossAudit,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

struct Failure(TcStatus, String);

type FfiResult = Result<(), Failure>;

/// Runs `body`, translating errors and panics into a status.
fn guard(body: impl FnOnce() -> FfiResult) -> TcStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => TcStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_error(format!("internal panic: {message}"));
            TcStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(TcStatus::NullPointer, format!("`{what}` is null"))
}

/// # Safety
/// `p` must be null or a valid NUL-terminated string.
unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|e| Failure(TcStatus::InvalidUtf8, format!("`{what}`: {e}")))
}

/// # Safety
/// `r` must be null or point to a live handle of type `T`.
unsafe fn handle<'a, T>(r: *const T, what: &str) -> Result<&'a T, Failure> {
    r.as_ref().ok_or_else(|| null(what))
}

/// # Safety
/// `out` must be null or writable.
unsafe fn put<T>(out: *mut *mut T, value: T) -> FfiResult {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// # Safety
/// `out` must be null or writable.
unsafe fn put_string(out: *mut *mut c_char, s: String) -> FfiResult {
    if out.is_null() {
        return Err(null("out"));
    }
    let c = CString::new(s.replace('\0', "")).expect("NUL bytes removed");
    *out = c.into_raw();
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn tc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string obtained from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn tc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses CSV bytes. Every cell is read as text.
///
/// # Safety
/// `table_id` must be a valid C string, `data` must point to `len` readable
/// bytes (it may be null only when `len` is 0), and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tc_table_from_csv(
    table_id: *const c_char,
    data: *const u8,
    len: usize,
    out: *mut *mut TcTable,
) -> TcStatus {
    guard(|| {
        let id = text(table_id, "table_id")?;
        let bytes: &[u8] = if len == 0 {
            &[]
        } else if data.is_null() {
            return Err(null("data"));
        } else {
            std::slice::from_raw_parts(data, len)
        };
        let options = CsvOptions { table_id: id.to_string(), ..CsvOptions::default() };
        let table = ingest_csv(bytes, &options).map_err(|e| Failure(TcStatus::Parse, e.to_string()))?;
        put(out, TcTable { table })
    })
}

/// Parses a pipe-delimited markdown table.
///
/// # Safety
/// Both strings must be valid C strings and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tc_table_from_markdown(
    table_id: *const c_char,
    markdown: *const c_char,
    out: *mut *mut TcTable,
) -> TcStatus {
    guard(|| {
        let id = text(table_id, "table_id")?;
        let md = text(markdown, "markdown")?;
        let mut table = ingest_markdown(md).map_err(|e| Failure(TcStatus::Parse, e.to_string()))?;
        table.table_id = id.to_string();
        put(out, TcTable { table })
    })
}

/// Number of data rows; 0 for a null handle.
///
/// # Safety
/// `table` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tc_table_num_rows(table: *const TcTable) -> usize {
    table.as_ref().map_or(0, |t| t.table.num_rows())
}

/// Number of columns; 0 for a null handle.
///
/// # Safety
/// `table` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tc_table_num_columns(table: *const TcTable) -> usize {
    table.as_ref().map_or(0, |t| t.table.num_columns())
}

/// Serializes the table as CSV.
///
/// # Safety
/// `table` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tc_table_to_csv(table: *const TcTable, out: *mut *mut c_char) -> TcStatus {
    guard(|| put_string(out, write_csv(&handle(table, "table")?.table)))
}

/// # Safety
/// `table` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn tc_table_free(table: *mut TcTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Parses a plan document.
///
/// # Safety
/// `json` must be a valid C string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tc_plan_parse(json: *const c_char, out: *mut *mut TcPlan) -> TcStatus {
    guard(|| {
        let plan = parse_plan(text(json, "json")?).map_err(|e| Failure(TcStatus::Parse, e.to_string()))?;
        put(out, TcPlan { plan })
    })
}

/// # Safety
/// `plan` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn tc_plan_free(plan: *mut TcPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

/// Checks a plan against a raw table. The policy report (JSON) is written
/// to `report_json` in every case where it could be computed; the status
/// is `TC_STATUS_VALIDATION` when it holds blocking findings.
///
/// # Safety
/// Handles must be live and `report_json` writable.
#[no_mangle]
pub unsafe extern "C" fn tc_plan_validate(
    plan: *const TcPlan,
    raw: *const TcTable,
    allow_row_change: bool,
    report_json: *mut *mut c_char,
) -> TcStatus {
    guard(|| {
        let plan = &handle(plan, "plan")?.plan;
        let raw = &handle(raw, "raw")?.table;
        let report = validate_plan_with(plan, &raw.schema(), &ValidateOptions { allow_row_change, samples: Some(raw) });
        put_string(report_json, report.to_json())?;
        if report.has_errors() {
            Err(Failure(TcStatus::Validation, "plan has blocking findings".to_string()))
        } else {
            Ok(())
        }
    })
}

/// Executes `plan` over `raw`, adding raw snapshots where the audit finds
/// loss. The handle is produced even when the result is not lossless, in
/// which case the status is `TC_STATUS_NOT_LOSSLESS`.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tc_execute(
    plan: *const TcPlan,
    raw: *const TcTable,
    allow_row_change: bool,
    out: *mut *mut TcExecution,
) -> TcStatus {
    guard(|| {
        let plan = &handle(plan, "plan")?.plan;
        let raw = &handle(raw, "raw")?.table;
        let policy = ExecPolicy { allow_row_change, ..ExecPolicy::default() };
        let (execution, audit) = make_lossless(plan, raw, &policy).map_err(|e| match e {
            ExecError::Validation(report) => Failure(TcStatus::Validation, report.to_json()),
            e => Failure(TcStatus::Execution, e.to_string()),
        })?;
        let lossless = audit.lossless;
        put(out, TcExecution { execution, audit })?;
        if lossless {
            Ok(())
        } else {
            Err(Failure(TcStatus::NotLossless, "some raw values are not recoverable".to_string()))
        }
    })
}

/// # Safety
/// `exec` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tc_execution_is_lossless(exec: *const TcExecution) -> bool {
    exec.as_ref().is_some_and(|e| e.audit.lossless)
}

/// # Safety
/// `exec` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tc_execution_canonical_csv(exec: *const TcExecution, out: *mut *mut c_char) -> TcStatus {
    guard(|| put_string(out, handle(exec, "exec")?.execution.canonical_csv()))
}

/// # Safety
/// `exec` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tc_execution_trace_json(exec: *const TcExecution, out: *mut *mut c_char) -> TcStatus {
    guard(|| put_string(out, handle(exec, "exec")?.execution.trace_json()))
}

/// # Safety
/// `exec` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tc_execution_audit_json(exec: *const TcExecution, out: *mut *mut c_char) -> TcStatus {
    guard(|| put_string(out, handle(exec, "exec")?.audit.to_json()))
}

/// Rebuilds the raw table from the canonical one.
///
/// # Safety
/// `exec` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tc_execution_recover_raw(exec: *const TcExecution, out: *mut *mut TcTable) -> TcStatus {
    guard(|| {
        let e = handle(exec, "exec")?;
        let table = recover_raw(&e.execution.table, &e.audit).map_err(|e| Failure(TcStatus::NotLossless, e.to_string()))?;
        put(out, TcTable { table })
    })
}

/// # Safety
/// `exec` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn tc_execution_free(exec: *mut TcExecution) {
    if !exec.is_null() {
        drop(Box::from_raw(exec));
    }
}

/// Normalizes an answer string for scoring.
///
/// # Safety
/// `answer` must be a valid C string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tc_format_answer(answer: *const c_char, out: *mut *mut c_char) -> TcStatus {
    guard(|| put_string(out, format_answer(text(answer, "answer")?)))
}

/// Token F1 between two answers given as JSON values (a string, number or
/// list).
///
/// # Safety
/// Both strings must be valid C strings and `f1` writable.
#[no_mangle]
pub unsafe extern "C" fn tc_answer_f1(predicted_json: *const c_char, gold_json: *const c_char, f1: *mut f64) -> TcStatus {
    guard(|| {
        let parse = |s: &str, what: &str| {
            serde_json::from_str::<serde_json::Value>(s).map_err(|e| Failure(TcStatus::Parse, format!("`{what}`: {e}")))
        };
        let p = parse(text(predicted_json, "predicted_json")?, "predicted_json")?;
        let g = parse(text(gold_json, "gold_json")?, "gold_json")?;
        if f1.is_null() {
            return Err(null("f1"));
        }
        *f1 = compute_f1("", &p, &g).f1;
        Ok(())
    })
}
