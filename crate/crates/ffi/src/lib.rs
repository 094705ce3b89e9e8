//! C ABI for the influence diagram engine.
//!
//! Diagrams and solutions are opaque handles owned by the caller and
//! released with `idg_diagram_free` / `idg_solution_free`. Every fallible
//! function returns an `IdgStatus`; on failure `idg_last_error` and
//! `idg_last_error_code` describe the error for the calling thread. Strings
//! returned through out-parameters are heap allocated and must be released
//! with `idg_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use idg_core::io::{self, LoadError, LoadOptions};
use idg_core::model::NodeKind;
use idg_core::report::{export_report_with_precision, ReportFormat};
use idg_core::solve::SolveError;
use idg_core::transforms::{self, Transform, TransformError};
use idg_core::{solve, validate, value_of_information, Diagram, NodeId, Solution};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IdgStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not UTF-8, or a result contained a NUL byte.
    InvalidString = 2,
    /// The document is not well-formed JSON or has the wrong shape.
    ParseError = 3,
    /// The diagram violates an invariant.
    InvalidDiagram = 4,
    /// A transform or query precondition failed.
    Precondition = 5,
    /// A named node does not exist.
    UnknownNode = 6,
    /// The computation exceeds a size bound.
    TooLarge = 7,
    /// An internal invariant failed.
    Internal = 8,
    /// A panic was caught at the boundary.
    Panic = 9,
}

/// Load flag: rescale rows within 1e-6 of summing to one.
pub const IDG_LOAD_RENORMALIZE: u32 = 1;
/// Load flag: add no-forgetting arcs before validating.
pub const IDG_LOAD_COMPLETE_NO_FORGETTING: u32 = 2;
/// Load flag: skip full validation (structural checks still apply).
pub const IDG_LOAD_SKIP_VALIDATION: u32 = 4;

/// Report format for `idg_solution_report`.
pub const IDG_FORMAT_TEXT: u32 = 0;
pub const IDG_FORMAT_JSON: u32 = 1;

/// Opaque diagram handle.
pub struct IdgDiagram(Diagram);

/// Opaque solution handle.
pub struct IdgSolution(Solution);

struct LastError {
    code: CString,
    message: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<LastError>> = const { RefCell::new(None) };
}

struct Failure {
    status: IdgStatus,
    code: &'static str,
    message: String,
}

impl Failure {
    fn new(status: IdgStatus, code: &'static str, message: impl Into<String>) -> Self {
        Failure {
            status,
            code,
            message: message.into(),
        }
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        let status = match e {
            LoadError::Invalid(_) => IdgStatus::InvalidDiagram,
            _ => IdgStatus::ParseError,
        };
        Failure::new(status, e.code(), e.to_string())
    }
}

impl From<TransformError> for Failure {
    fn from(e: TransformError) -> Self {
        let status = match e {
            TransformError::UnknownNode(_) => IdgStatus::UnknownNode,
            TransformError::Model(_) => IdgStatus::InvalidDiagram,
            _ => IdgStatus::Precondition,
        };
        Failure::new(status, e.code(), e.to_string())
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        let status = match &e {
            SolveError::Precondition(t) => return t.clone().into(),
            _ if e.is_internal() => IdgStatus::Internal,
            SolveError::UnknownNode(_) => IdgStatus::UnknownNode,
            SolveError::Invalid(_) | SolveError::Order(_) | SolveError::Model(_) => {
                IdgStatus::InvalidDiagram
            }
            _ if e.code() == "TOO_LARGE" => IdgStatus::TooLarge,
            _ => IdgStatus::Precondition,
        };
        Failure::new(status, e.code(), e.to_string())
    }
}

fn set_error(code: &str, message: &str) {
    let clean = |s: &str| CString::new(s.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = Some(LastError {
            code: clean(code),
            message: clean(message),
        })
    });
}

/// Run `f` behind a panic guard, recording any failure.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> IdgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            IdgStatus::Ok
        }
        Ok(Err(failure)) => {
            set_error(failure.code, &failure.message);
            failure.status
        }
        Err(_) => {
            set_error("PANIC", "panic caught at the C boundary");
            IdgStatus::Panic
        }
    }
}

fn null() -> Failure {
    Failure::new(
        IdgStatus::NullPointer,
        "NULL_POINTER",
        "required pointer argument is null",
    )
}

/// # Safety
/// `p` is null or points to a live handle.
unsafe fn borrow<'a, T>(p: *const T) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(null)
}

/// # Safety
/// `s` is null or a NUL-terminated string.
unsafe fn text<'a>(s: *const c_char) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null());
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        Failure::new(
            IdgStatus::InvalidString,
            "INVALID_STRING",
            "argument is not UTF-8",
        )
    })
}

/// # Safety
/// `out` is null or writable.
unsafe fn put<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null());
    }
    out.write(value);
    Ok(())
}

fn owned_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s).map(CString::into_raw).map_err(|_| {
        Failure::new(
            IdgStatus::InvalidString,
            "INVALID_STRING",
            "result contains a NUL byte",
        )
    })
}

fn new_diagram(d: Diagram) -> *mut IdgDiagram {
    Box::into_raw(Box::new(IdgDiagram(d)))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn idg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last error on this thread, or null. Valid until the next
/// call into the library on the same thread.
#[no_mangle]
pub extern "C" fn idg_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(ptr::null(), |e| e.message.as_ptr())
    })
}

/// Machine-readable code of the last error on this thread (for example
/// `REVERSAL_WOULD_CYCLE`), or null.
#[no_mangle]
pub extern "C" fn idg_last_error_code() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(ptr::null(), |e| e.code.as_ptr())
    })
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` is null or was returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn idg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parse an `.idg.json` document of `len` bytes. `flags` is a bitwise OR of
/// the `IDG_LOAD_*` constants.
///
/// # Safety
/// `bytes` points to `len` readable bytes; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn idg_diagram_load(
    bytes: *const u8,
    len: usize,
    flags: u32,
    out: *mut *mut IdgDiagram,
) -> IdgStatus {
    guard(|| {
        if bytes.is_null() {
            return Err(null());
        }
        let data = std::slice::from_raw_parts(bytes, len);
        let options = LoadOptions {
            renormalize: flags & IDG_LOAD_RENORMALIZE != 0,
            complete_no_forgetting: flags & IDG_LOAD_COMPLETE_NO_FORGETTING != 0,
            validate: flags & IDG_LOAD_SKIP_VALIDATION == 0,
        };
        let d = io::load_with(data, options)?;
        put(out, new_diagram(d))
    })
}

/// Serialize to an `.idg.json` document (free with `idg_string_free`).
///
/// # Safety
/// `d` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn idg_diagram_save(
    d: *const IdgDiagram,
    out: *mut *mut c_char,
) -> IdgStatus {
    guard(|| {
        let d = borrow(d)?;
        let json = String::from_utf8(io::save(&d.0)).expect("JSON is UTF-8");
        put(out, owned_string(json)?)
    })
}

/// # Safety
/// `d` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn idg_diagram_free(d: *mut IdgDiagram) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Number of nodes, or 0 for a null handle.
///
/// # Safety
/// `d` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn idg_diagram_node_count(d: *const IdgDiagram) -> usize {
    d.as_ref().map_or(0, |d| d.0.len())
}

/// Validate. Writes the number of violations to `count`; if `report` is
/// non-null it receives the violations as a JSON array.
///
/// # Safety
/// `d` is a live handle; `count` is writable; `report` is null or writable.
#[no_mangle]
pub unsafe extern "C" fn idg_diagram_validate(
    d: *const IdgDiagram,
    count: *mut usize,
    report: *mut *mut c_char,
) -> IdgStatus {
    guard(|| {
        let violations = validate(&borrow(d)?.0);
        put(count, violations.len())?;
        if !report.is_null() {
            let json = serde_json::to_string(&violations).expect("violations serialize");
            put(report, owned_string(json)?)?;
        }
        Ok(())
    })
}

unsafe fn transformed(
    d: *const IdgDiagram,
    out: *mut *mut IdgDiagram,
    make: impl FnOnce(&Diagram) -> Result<Transform, Failure>,
) -> IdgStatus {
    guard(|| {
        let d = borrow(d)?;
        if out.is_null() {
            return Err(null());
        }
        let t = make(&d.0)?;
        let record = transforms::apply(&Arc::new(d.0.clone()), &t)?;
        put(out, new_diagram(Arc::unwrap_or_clone(record.after)))
    })
}

/// Reverse the arc `from -> to` between chance nodes into a new diagram.
///
/// # Safety
/// `d` is a live handle; `from`/`to` are NUL-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn idg_diagram_reverse_arc(
    d: *const IdgDiagram,
    from: *const c_char,
    to: *const c_char,
    out: *mut *mut IdgDiagram,
) -> IdgStatus {
    transformed(d, out, |_| {
        Ok(Transform::ReverseArc {
            from: text(from)?.into(),
            to: text(to)?.into(),
        })
    })
}

/// Let decision `to` observe `from`, into a new diagram.
///
/// # Safety
/// As for `idg_diagram_reverse_arc`.
#[no_mangle]
pub unsafe extern "C" fn idg_diagram_add_informational_arc(
    d: *const IdgDiagram,
    from: *const c_char,
    to: *const c_char,
    out: *mut *mut IdgDiagram,
) -> IdgStatus {
    transformed(d, out, |_| {
        Ok(Transform::AddInformationalArc {
            from: text(from)?.into(),
            to: text(to)?.into(),
        })
    })
}

/// Remove `node`: deleted if barren, otherwise absorbed into the value node
/// by expectation (chance) or maximization (decision).
///
/// # Safety
/// `d` is a live handle; `node` is NUL-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn idg_diagram_remove_node(
    d: *const IdgDiagram,
    node: *const c_char,
    out: *mut *mut IdgDiagram,
) -> IdgStatus {
    transformed(d, out, |d| {
        let id = NodeId::from(text(node)?);
        let n = d.node(&id).ok_or_else(|| {
            Failure::new(
                IdgStatus::UnknownNode,
                "UNKNOWN_NODE",
                format!("unknown node `{id}`"),
            )
        })?;
        Ok(
            if n.kind() != NodeKind::Value && d.children(&id).is_empty() {
                Transform::RemoveBarren { node: id }
            } else if n.kind() == NodeKind::Decision {
                Transform::RemoveDecision { node: id }
            } else {
                Transform::RemoveChance { node: id }
            },
        )
    })
}

/// Apply a transform given as JSON, e.g.
/// `{"kind": "reverse_arc", "from": "a", "to": "b"}`.
///
/// # Safety
/// `d` is a live handle; `json` is NUL-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn idg_diagram_apply_transform(
    d: *const IdgDiagram,
    json: *const c_char,
    out: *mut *mut IdgDiagram,
) -> IdgStatus {
    transformed(d, out, |_| {
        serde_json::from_str(text(json)?)
            .map_err(|e| Failure::new(IdgStatus::ParseError, "PARSE_ERROR", e.to_string()))
    })
}

/// Value of letting decision `to` observe `from`.
///
/// # Safety
/// `d` is a live handle; `from`/`to` are NUL-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn idg_value_of_information(
    d: *const IdgDiagram,
    from: *const c_char,
    to: *const c_char,
    out: *mut f64,
) -> IdgStatus {
    guard(|| {
        let d = borrow(d)?;
        let v = value_of_information(&d.0, &text(from)?.into(), &text(to)?.into())?;
        put(out, v)
    })
}

/// Solve by reductions.
///
/// # Safety
/// `d` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn idg_solve(d: *const IdgDiagram, out: *mut *mut IdgSolution) -> IdgStatus {
    guard(|| {
        let d = borrow(d)?;
        if out.is_null() {
            return Err(null());
        }
        let s = solve(&d.0)?;
        put(out, Box::into_raw(Box::new(IdgSolution(s))))
    })
}

/// # Safety
/// `s` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn idg_solution_free(s: *mut IdgSolution) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Certain equivalent of the optimal strategy.
///
/// # Safety
/// `s` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn idg_solution_optimal_value(
    s: *const IdgSolution,
    out: *mut f64,
) -> IdgStatus {
    guard(|| put(out, borrow(s)?.0.optimal_value))
}

/// Optimal expected utility.
///
/// # Safety
/// `s` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn idg_solution_expected_utility(
    s: *const IdgSolution,
    out: *mut f64,
) -> IdgStatus {
    guard(|| put(out, borrow(s)?.0.optimal_expected_utility))
}

/// Number of decision policies (one per decision).
///
/// # Safety
/// `s` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn idg_solution_policy_count(s: *const IdgSolution) -> usize {
    s.as_ref().map_or(0, |s| s.0.policies.len())
}

/// Number of reduction steps taken.
///
/// # Safety
/// `s` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn idg_solution_step_count(s: *const IdgSolution) -> usize {
    s.as_ref().map_or(0, |s| s.0.transcript.len())
}

/// Chosen alternative index of policy `policy` for information state
/// `state` (mixed-radix index over the policy's domain).
///
/// # Safety
/// `s` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn idg_solution_policy_choice(
    s: *const IdgSolution,
    policy: usize,
    state: usize,
    out: *mut usize,
) -> IdgStatus {
    guard(|| {
        let s = borrow(s)?;
        let p = s.0.policies.get(policy).ok_or_else(|| {
            Failure::new(
                IdgStatus::Precondition,
                "OUT_OF_RANGE",
                format!("no policy {policy}"),
            )
        })?;
        let choice = p.choices().get(state).ok_or_else(|| {
            Failure::new(
                IdgStatus::Precondition,
                "OUT_OF_RANGE",
                format!("no information state {state}"),
            )
        })?;
        put(out, *choice)
    })
}

/// Render the solution report. `format` is `IDG_FORMAT_TEXT` or
/// `IDG_FORMAT_JSON`; `precision` is the number of significant digits in
/// text output (0 selects the default of 6).
///
/// # Safety
/// `s` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn idg_solution_report(
    s: *const IdgSolution,
    format: u32,
    precision: u32,
    out: *mut *mut c_char,
) -> IdgStatus {
    guard(|| {
        let s = borrow(s)?;
        let format = match format {
            IDG_FORMAT_TEXT => ReportFormat::Text,
            IDG_FORMAT_JSON => ReportFormat::Json,
            other => {
                return Err(Failure::new(
                    IdgStatus::Precondition,
                    "UNKNOWN_FORMAT",
                    format!("unknown report format {other}"),
                ))
            }
        };
        let precision = if precision == 0 {
            6
        } else {
            precision as usize
        };
        let bytes = export_report_with_precision(&s.0, format, precision)?;
        put(
            out,
            owned_string(String::from_utf8(bytes).expect("reports are UTF-8"))?,
        )
    })
}
