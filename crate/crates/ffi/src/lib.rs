//! C ABI for the uitask library.
//!
//! Conventions:
//! - Every function returns a [`UitaskStatus`]; results come back through
//!   `out_*` pointers that are written only on `UITASK_STATUS_OK`.
//! - Strings returned through `out` pointers are heap-allocated and must be
//!   released with [`uitask_string_free`]. Strings returned as `const char*`
//!   without an out-pointer are borrowed and must not be freed.
//! - Handles are opaque; free them with their matching `_free` function.
//!   A `NULL` handle or argument yields `UITASK_STATUS_NULL_ARGUMENT`.
//! - On any failure, [`uitask_last_error`] returns a message for the
//!   current thread, valid until the next call on that thread.
//! - Panics never unwind across the boundary; they surface as
//!   `UITASK_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use uitask::agent::{run_task, AgentConfig};
use uitask::bench::completion_progress;
use uitask::device::{AppModel, Device, Simulator};
use uitask::llm::{CompletionParams, ScriptedBackend};
use uitask::parse::{parse_choice, parse_edit_text, Decision};
use uitask::prompt::{describe_state, synthesize_choice_prompt};
use uitask::ui::UiState;

/// Result of every FFI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UitaskStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidJson = 3,
    InvalidModel = 4,
    DeviceError = 5,
    ParseError = 6,
    InvalidArgument = 7,
    LlmError = 8,
    Panic = 9,
}

/// A loaded app model (opaque).
pub struct UitaskAppModel {
    inner: AppModel,
}

/// A running simulator session (opaque).
pub struct UitaskSim {
    inner: Simulator,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(status: UitaskStatus, message: impl AsRef<str>) -> UitaskStatus {
    let sanitized = message.as_ref().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = Some(CString::new(sanitized).expect("NULs removed"));
    });
    status
}

fn clear_error() {
    LAST_ERROR.with(|slot| slot.borrow_mut().take());
}

/// Runs `body` with panic containment; `body` must not leave `out` pointers
/// half-written on failure.
fn guarded(body: impl FnOnce() -> UitaskStatus) -> UitaskStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(UitaskStatus::Panic, message)
        }
    }
}

/// # Safety
/// `ptr` must be NULL or a NUL-terminated string valid for the call.
unsafe fn required_str<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, UitaskStatus> {
    if ptr.is_null() {
        return Err(set_error(UitaskStatus::NullArgument, format!("{name} is NULL")));
    }
    unsafe { CStr::from_ptr(ptr) }
        .to_str()
        .map_err(|_| set_error(UitaskStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

fn write_string(out: *mut *mut c_char, value: String) -> UitaskStatus {
    let sanitized = value.replace('\0', " ");
    let raw = CString::new(sanitized).expect("NULs removed").into_raw();
    unsafe { *out = raw };
    UitaskStatus::Ok
}

fn require_out<T>(out: *mut T, name: &str) -> Result<(), UitaskStatus> {
    if out.is_null() {
        Err(set_error(UitaskStatus::NullArgument, format!("{name} is NULL")))
    } else {
        Ok(())
    }
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn uitask_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Message for the current thread's most recent failure, or NULL if the
/// last call succeeded. Borrowed; valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn uitask_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow().as_ref().map_or(std::ptr::null(), |message| message.as_ptr())
    })
}

/// Frees a string returned through an `out` pointer.
///
/// # Safety
/// `ptr` must be NULL or a pointer obtained from this library's `out`
/// parameters, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn uitask_string_free(ptr: *mut c_char) {
    if !ptr.is_null() {
        drop(unsafe { CString::from_raw(ptr) });
    }
}

/// Parses and validates an app model from JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out_model` must be a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn uitask_app_model_from_json(
    json: *const c_char,
    out_model: *mut *mut UitaskAppModel,
) -> UitaskStatus {
    guarded(|| {
        if let Err(status) = require_out(out_model, "out_model") {
            return status;
        }
        let json = match unsafe { required_str(json, "json") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        match AppModel::from_json(json) {
            Ok(model) => {
                let handle = Box::new(UitaskAppModel { inner: model });
                unsafe { *out_model = Box::into_raw(handle) };
                UitaskStatus::Ok
            }
            Err(e) => set_error(UitaskStatus::InvalidModel, e.to_string()),
        }
    })
}

/// # Safety
/// `model` must be NULL or an unfreed handle from
/// [`uitask_app_model_from_json`].
#[no_mangle]
pub unsafe extern "C" fn uitask_app_model_free(model: *mut UitaskAppModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Creates an empty simulator; add models before starting apps.
///
/// # Safety
/// `out_sim` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn uitask_sim_new(out_sim: *mut *mut UitaskSim) -> UitaskStatus {
    guarded(|| {
        if let Err(status) = require_out(out_sim, "out_sim") {
            return status;
        }
        let handle = Box::new(UitaskSim { inner: Simulator::new() });
        unsafe { *out_sim = Box::into_raw(handle) };
        UitaskStatus::Ok
    })
}

/// Copies a model into the simulator. The model handle stays owned by the
/// caller.
///
/// # Safety
/// Both handles must be valid and unfreed.
#[no_mangle]
pub unsafe extern "C" fn uitask_sim_add_model(
    sim: *mut UitaskSim,
    model: *const UitaskAppModel,
) -> UitaskStatus {
    guarded(|| {
        if sim.is_null() || model.is_null() {
            return set_error(UitaskStatus::NullArgument, "sim and model must not be NULL");
        }
        let sim = unsafe { &mut *sim };
        let model = unsafe { &*model };
        match sim.inner.add_model(model.inner.clone()) {
            Ok(()) => UitaskStatus::Ok,
            Err(e) => set_error(UitaskStatus::InvalidModel, e.to_string()),
        }
    })
}

/// # Safety
/// `sim` must be NULL or an unfreed handle from [`uitask_sim_new`].
#[no_mangle]
pub unsafe extern "C" fn uitask_sim_free(sim: *mut UitaskSim) {
    if !sim.is_null() {
        drop(unsafe { Box::from_raw(sim) });
    }
}

fn current_state(sim: &mut Simulator) -> Result<UiState, UitaskStatus> {
    sim.get_state().map_err(|e| set_error(UitaskStatus::DeviceError, e.to_string()))
}

/// Returns the current UI state as JSON.
///
/// # Safety
/// `sim` must be a valid handle; `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn uitask_sim_state_json(
    sim: *mut UitaskSim,
    out_json: *mut *mut c_char,
) -> UitaskStatus {
    guarded(|| {
        if sim.is_null() {
            return set_error(UitaskStatus::NullArgument, "sim is NULL");
        }
        if let Err(status) = require_out(out_json, "out_json") {
            return status;
        }
        let sim = unsafe { &mut *sim };
        match current_state(&mut sim.inner) {
            Ok(state) => {
                write_string(out_json, serde_json::to_string(&state).expect("state serializes"))
            }
            Err(status) => status,
        }
    })
}

/// Performs an action given as JSON (same schema as trace files) and
/// returns the resulting state digest.
///
/// # Safety
/// `sim` must be a valid handle; `action_json` a NUL-terminated string;
/// `out_digest` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn uitask_sim_perform_json(
    sim: *mut UitaskSim,
    action_json: *const c_char,
    out_digest: *mut *mut c_char,
) -> UitaskStatus {
    guarded(|| {
        if sim.is_null() {
            return set_error(UitaskStatus::NullArgument, "sim is NULL");
        }
        if let Err(status) = require_out(out_digest, "out_digest") {
            return status;
        }
        let json = match unsafe { required_str(action_json, "action_json") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        let action = match serde_json::from_str(json) {
            Ok(action) => action,
            Err(e) => return set_error(UitaskStatus::InvalidJson, e.to_string()),
        };
        let sim = unsafe { &mut *sim };
        match sim.inner.perform(&action) {
            Ok(result) => write_string(out_digest, result.state_digest),
            Err(e) => set_error(UitaskStatus::DeviceError, e.to_string()),
        }
    })
}

/// Renders the choice prompt for the simulator's current state.
/// `history_json` is a JSON array of executed action strings, or NULL for
/// none.
///
/// # Safety
/// `sim` must be a valid handle; `task` a NUL-terminated string;
/// `history_json` NULL or a NUL-terminated string; `out_prompt` a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn uitask_sim_choice_prompt(
    sim: *mut UitaskSim,
    task: *const c_char,
    history_json: *const c_char,
    out_prompt: *mut *mut c_char,
) -> UitaskStatus {
    guarded(|| {
        if sim.is_null() {
            return set_error(UitaskStatus::NullArgument, "sim is NULL");
        }
        if let Err(status) = require_out(out_prompt, "out_prompt") {
            return status;
        }
        let task = match unsafe { required_str(task, "task") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        let history: Vec<String> = if history_json.is_null() {
            Vec::new()
        } else {
            let json = match unsafe { required_str(history_json, "history_json") } {
                Ok(s) => s,
                Err(status) => return status,
            };
            match serde_json::from_str(json) {
                Ok(history) => history,
                Err(e) => return set_error(UitaskStatus::InvalidJson, e.to_string()),
            }
        };
        let sim = unsafe { &mut *sim };
        match current_state(&mut sim.inner) {
            Ok(state) => {
                let description = describe_state(&state);
                let prompt = synthesize_choice_prompt(task, &description, &history);
                write_string(out_prompt, prompt.rendered)
            }
            Err(status) => status,
        }
    })
}

/// Extracts the chosen action id from a model reply. Writes the id, or -1
/// when the model declared the task complete.
///
/// # Safety
/// `reply` must be a NUL-terminated string; `out_choice` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn uitask_parse_choice(
    reply: *const c_char,
    num_actions: usize,
    out_choice: *mut i64,
) -> UitaskStatus {
    guarded(|| {
        if let Err(status) = require_out(out_choice, "out_choice") {
            return status;
        }
        let reply = match unsafe { required_str(reply, "reply") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        match parse_choice(reply, num_actions) {
            Ok(Decision::TaskComplete) => {
                unsafe { *out_choice = -1 };
                UitaskStatus::Ok
            }
            Ok(Decision::Choice(id)) => {
                unsafe { *out_choice = id as i64 };
                UitaskStatus::Ok
            }
            Ok(Decision::EditText(_)) => unreachable!("parse_choice never yields edits"),
            Err(e) => set_error(UitaskStatus::ParseError, e.to_string()),
        }
    })
}

/// Normalizes a model reply to an edit prompt into the text to type.
///
/// # Safety
/// `reply` must be a NUL-terminated string; `out_text` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn uitask_parse_edit_text(
    reply: *const c_char,
    out_text: *mut *mut c_char,
) -> UitaskStatus {
    guarded(|| {
        if let Err(status) = require_out(out_text, "out_text") {
            return status;
        }
        let reply = match unsafe { required_str(reply, "reply") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        match parse_edit_text(reply) {
            Ok(Decision::EditText(text)) => write_string(out_text, text),
            Ok(_) => unreachable!("parse_edit_text only yields edit text"),
            Err(e) => set_error(UitaskStatus::ParseError, e.to_string()),
        }
    })
}

/// Task completion progress: the matched share of the reference sequence.
/// Both arguments are JSON arrays of action strings; the reference must be
/// non-empty.
///
/// # Safety
/// Both JSON arguments must be NUL-terminated strings; `out_progress` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn uitask_completion_progress(
    reference_json: *const c_char,
    predicted_json: *const c_char,
    out_progress: *mut f64,
) -> UitaskStatus {
    guarded(|| {
        if let Err(status) = require_out(out_progress, "out_progress") {
            return status;
        }
        let parse_list = |ptr: *const c_char, name: &str| -> Result<Vec<String>, UitaskStatus> {
            let json = unsafe { required_str(ptr, name) }?;
            serde_json::from_str(json)
                .map_err(|e| set_error(UitaskStatus::InvalidJson, format!("{name}: {e}")))
        };
        let reference = match parse_list(reference_json, "reference_json") {
            Ok(list) => list,
            Err(status) => return status,
        };
        let predicted = match parse_list(predicted_json, "predicted_json") {
            Ok(list) => list,
            Err(status) => return status,
        };
        if reference.is_empty() {
            return set_error(UitaskStatus::InvalidArgument, "reference must not be empty");
        }
        unsafe { *out_progress = completion_progress(&reference, &predicted) };
        UitaskStatus::Ok
    })
}

/// Runs a whole task against the simulator with a scripted oracle
/// (`rules_json`, same schema as rules files). Writes the full trace as
/// JSON. `max_steps` of 0 keeps the default budget.
///
/// # Safety
/// `sim` must be a valid handle; string arguments NUL-terminated;
/// `out_trace_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn uitask_sim_run_task_scripted(
    sim: *mut UitaskSim,
    rules_json: *const c_char,
    task: *const c_char,
    app_id: *const c_char,
    max_steps: usize,
    out_trace_json: *mut *mut c_char,
) -> UitaskStatus {
    guarded(|| {
        if sim.is_null() {
            return set_error(UitaskStatus::NullArgument, "sim is NULL");
        }
        if let Err(status) = require_out(out_trace_json, "out_trace_json") {
            return status;
        }
        let rules = match unsafe { required_str(rules_json, "rules_json") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        let task = match unsafe { required_str(task, "task") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        let app_id = match unsafe { required_str(app_id, "app_id") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        let backend = match ScriptedBackend::from_json(rules) {
            Ok(backend) => backend,
            Err(e) => return set_error(UitaskStatus::LlmError, e.to_string()),
        };
        let mut cfg = AgentConfig::default();
        if max_steps > 0 {
            cfg.max_steps = max_steps;
        }
        let sim = unsafe { &mut *sim };
        let trace = run_task(
            &mut sim.inner,
            &backend,
            &CompletionParams::default(),
            &cfg,
            task,
            app_id,
        );
        write_string(
            out_trace_json,
            serde_json::to_string(&trace).expect("trace serializes"),
        )
    })
}
