//! The observe → prompt → decide → act loop, with replayable traces.
//!
//! One run starts an app, then repeatedly shows the model the current
//! screen and executes whatever in-prompt action it picks, until the model
//! declares completion or a guard stops the run. Every step is recorded; a
//! trace file plus the transcript of model replies reproduces a run.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{Action, Device};
use crate::digest::sha256_hex;
use crate::llm::{CompletionParams, CompletionRequest, LlmBackend};
use crate::parse::{parse_choice, parse_edit_text, Decision};
use crate::prompt::{
    describe_state_with, synthesize_choice_prompt, synthesize_edit_prompt, Prompt,
};
use crate::ui::{element_display_name, ActionKind, UiState};

fn default_max_steps() -> usize {
    20
}
fn default_max_retries() -> usize {
    1
}
fn default_repetition_window() -> usize {
    4
}
fn default_truncation_words() -> usize {
    crate::prompt::DEFAULT_TRUNCATION_WORDS
}

/// Knobs for one agent run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentConfig {
    /// Model-chosen steps per run (the start step is extra).
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    /// Extra asks of the same prompt after an unparseable reply.
    #[serde(default = "default_max_retries")]
    pub max_retries_per_step: usize,
    /// Stop once the same (state, action) pair has executed this many times.
    #[serde(default = "default_repetition_window")]
    pub repetition_window: usize,
    /// Word cap for display names in prompts.
    #[serde(default = "default_truncation_words")]
    pub truncation_words: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            max_steps: default_max_steps(),
            max_retries_per_step: default_max_retries(),
            repetition_window: default_repetition_window(),
            truncation_words: default_truncation_words(),
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (name, value) in [
            ("max_steps", self.max_steps),
            ("max_retries_per_step", self.max_retries_per_step),
            ("repetition_window", self.repetition_window),
            ("truncation_words", self.truncation_words),
        ] {
            if value == 0 {
                return Err(format!("{name} must be positive"));
            }
        }
        Ok(())
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// The model replied `-1`.
    ModelDeclaredComplete,
    MaxSteps,
    RepetitionGuard,
    /// Replies stayed unparseable through the retry budget, or the backend
    /// failed.
    ParseFailure,
    DeviceError,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::ModelDeclaredComplete => "model declared the task complete",
            Termination::MaxSteps => "step budget exhausted",
            Termination::RepetitionGuard => "repetition guard tripped",
            Termination::ParseFailure => "model replies were unusable",
            Termination::DeviceError => "device error",
        })
    }
}

/// What the model decided at one step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum StepDecision {
    /// The implicit app start; nothing was asked.
    Start,
    Choice { action_id: usize },
    Edit { action_id: usize, text: String },
}

/// One executed step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub index: usize,
    /// SHA-256 of the choice prompt; absent for the start step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_digest: Option<String>,
    /// SHA-256 of the follow-up edit prompt, when one was asked.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edit_prompt_digest: Option<String>,
    pub decision: StepDecision,
    pub action: Action,
    /// Canonical human-readable form; this is what the benchmark compares.
    pub action_string: String,
    /// State digest the action was chosen against; absent for start.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digest_before: Option<String>,
    pub digest_after: String,
}

/// Full record of one run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskTrace {
    pub task: String,
    pub app_id: String,
    pub config: AgentConfig,
    pub steps: Vec<TraceStep>,
    pub termination: Termination,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub termination_detail: Option<String>,
}

impl TaskTrace {
    /// The executed action strings in order, start step included.
    pub fn predicted_actions(&self) -> Vec<String> {
        self.steps.iter().map(|s| s.action_string.clone()).collect()
    }
}

/// Renders an action in the canonical trace grammar.
///
/// Click uses `click view with text "<text>"` when the element has literal
/// text and `click view '<name>'` otherwise; names are never truncated
/// here.
pub fn action_to_string(action: &Action, state: &UiState) -> Result<String, ActionStringError> {
    if action.kind == ActionKind::StartApp {
        let app_id = action.app_id.as_deref().unwrap_or_default();
        return Ok(format!("start the app {app_id}"));
    }
    let target = action.target.as_ref().ok_or(ActionStringError::MissingTarget)?;
    let element = state
        .find_element(target)
        .ok_or_else(|| ActionStringError::UnresolvableTarget(target.to_string()))?;
    let name = element_display_name(&element);
    Ok(match action.kind {
        ActionKind::Click => match element.text.as_deref() {
            Some(text) if !text.is_empty() => format!("click view with text \"{text}\""),
            _ => format!("click view '{name}'"),
        },
        ActionKind::Edit => {
            let content = action.text.as_deref().unwrap_or_default();
            format!("enter \"{content}\" into view with text \"{name}\"")
        }
        ActionKind::LongClick => format!("long click view '{name}'"),
        ActionKind::Check => format!("check view '{name}'"),
        ActionKind::ScrollUp => format!("scroll up view '{name}'"),
        ActionKind::ScrollDown => format!("scroll down view '{name}'"),
        ActionKind::StartApp => unreachable!("handled above"),
    })
}

/// Action could not be rendered as a trace string.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ActionStringError {
    #[error("action has no target element")]
    MissingTarget,
    #[error("target '{0}' is not on the current screen")]
    UnresolvableTarget(String),
}

/// Runs one task to termination.
pub fn run_task<D: Device>(
    device: &mut D,
    llm: &dyn LlmBackend,
    params: &CompletionParams,
    cfg: &AgentConfig,
    task: &str,
    app_id: &str,
) -> TaskTrace {
    run_task_with(device, llm, params, cfg, task, app_id, |_| {})
}

/// [`run_task`] with an observer called after every executed step.
pub fn run_task_with<D: Device>(
    device: &mut D,
    llm: &dyn LlmBackend,
    params: &CompletionParams,
    cfg: &AgentConfig,
    task: &str,
    app_id: &str,
    mut on_step: impl FnMut(&TraceStep),
) -> TaskTrace {
    let mut steps: Vec<TraceStep> = Vec::new();
    let mut history: Vec<String> = Vec::new();
    let mut pair_counts: HashMap<(String, String), usize> = HashMap::new();

    let finish = |steps: Vec<TraceStep>, termination, detail: Option<String>| TaskTrace {
        task: task.to_string(),
        app_id: app_id.to_string(),
        config: cfg.clone(),
        steps,
        termination,
        termination_detail: detail,
    };

    let start_action = Action::start_app(app_id);
    let start_string = format!("start the app {app_id}");
    match device.perform(&start_action) {
        Err(e) => {
            return finish(
                steps,
                Termination::DeviceError,
                Some(format!("action '{start_string}' failed: {e}")),
            );
        }
        Ok(result) => {
            let step = TraceStep {
                index: 0,
                prompt_digest: None,
                edit_prompt_digest: None,
                decision: StepDecision::Start,
                action: start_action,
                action_string: start_string.clone(),
                digest_before: None,
                digest_after: result.state_digest,
            };
            on_step(&step);
            steps.push(step);
            history.push(start_string);
        }
    }

    while steps.len() < cfg.max_steps + 1 {
        let state = match device.get_state() {
            Ok(state) => state,
            Err(e) => {
                return finish(steps, Termination::DeviceError, Some(e.to_string()));
            }
        };
        let description = describe_state_with(&state, cfg.truncation_words);
        let choice_prompt = synthesize_choice_prompt(task, &description, &history);
        let num_actions = description.bindings.len();

        let decision = match ask_parsed(llm, params, &choice_prompt, cfg.max_retries_per_step, |r| {
            parse_choice(r, num_actions)
        }) {
            Ok(decision) => decision,
            Err(detail) => return finish(steps, Termination::ParseFailure, Some(detail)),
        };

        let action_id = match decision {
            Decision::TaskComplete => {
                return finish(steps, Termination::ModelDeclaredComplete, None);
            }
            Decision::Choice(id) => id,
            Decision::EditText(_) => unreachable!("parse_choice never yields EditText"),
        };

        let binding = &description.bindings[action_id];
        let element = state.find_element(&binding.element_key).expect("bindings are sound");

        let (record, action, edit_prompt_digest) = if binding.kind == ActionKind::Edit {
            let edit_prompt = synthesize_edit_prompt(task, &description, &history, &element)
                .expect("edit binding implies editable element");
            let text = match ask_parsed(
                llm,
                params,
                &edit_prompt,
                cfg.max_retries_per_step,
                parse_edit_text,
            ) {
                Ok(Decision::EditText(text)) => text,
                Ok(_) => unreachable!("parse_edit_text only yields EditText"),
                Err(detail) => return finish(steps, Termination::ParseFailure, Some(detail)),
            };
            (
                StepDecision::Edit { action_id, text: text.clone() },
                Action::edit(binding.element_key.clone(), text),
                Some(sha256_hex(edit_prompt.rendered.as_bytes())),
            )
        } else {
            let action = Action {
                kind: binding.kind,
                target: Some(binding.element_key.clone()),
                text: None,
                app_id: None,
            };
            (StepDecision::Choice { action_id }, action, None)
        };

        let action_string =
            action_to_string(&action, &state).expect("bound target is on screen");
        let digest_before = state.state_digest.clone();

        let result = match device.perform(&action) {
            Ok(result) => result,
            Err(e) => {
                return finish(
                    steps,
                    Termination::DeviceError,
                    Some(format!("action '{action_string}' failed: {e}")),
                );
            }
        };

        let step = TraceStep {
            index: steps.len(),
            prompt_digest: Some(sha256_hex(choice_prompt.rendered.as_bytes())),
            edit_prompt_digest,
            decision: record,
            action,
            action_string: action_string.clone(),
            digest_before: Some(digest_before.clone()),
            digest_after: result.state_digest,
        };
        on_step(&step);
        steps.push(step);
        history.push(action_string.clone());

        let count = pair_counts.entry((digest_before, action_string)).or_insert(0);
        *count += 1;
        if *count >= cfg.repetition_window {
            return finish(
                steps,
                Termination::RepetitionGuard,
                Some(format!("same action executed {count} times in the same state")),
            );
        }
    }

    finish(steps, Termination::MaxSteps, None)
}

/// Asks one prompt, re-asking on unparseable replies until the retry budget
/// is spent. Backend failures are not retried here (the HTTP backend has
/// its own retry schedule).
fn ask_parsed<T, E: fmt::Display>(
    llm: &dyn LlmBackend,
    params: &CompletionParams,
    prompt: &Prompt,
    max_retries: usize,
    parse: impl Fn(&str) -> Result<T, E>,
) -> Result<T, String> {
    let request = CompletionRequest::new(prompt.rendered.clone(), params)
        .map_err(|e| e.to_string())?;
    let attempts = max_retries + 1;
    let mut last_error = String::new();
    for _ in 0..attempts {
        let reply = llm.complete(&request).map_err(|e| e.to_string())?;
        match parse(&reply) {
            Ok(value) => return Ok(value),
            Err(e) => last_error = format!("reply '{}' unusable: {e}", reply.trim()),
        }
    }
    Err(format!("no usable reply after {attempts} attempts; last: {last_error}"))
}

// ── trace files ─────────────────────────────────────────────────────────

/// One line of a trace file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "record")]
pub enum TraceLine {
    Header { task: String, app_id: String, config: AgentConfig },
    Step(TraceStep),
    End {
        termination: Termination,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        detail: Option<String>,
    },
}

/// Trace file could not be read back.
#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace i/o failed")]
    Io(#[from] std::io::Error),
    #[error("trace line {line}: {message}")]
    Malformed { line: usize, message: String },
}

/// Writes a trace as newline-delimited JSON: header, steps, end marker.
/// The output contains no timestamps, so identical runs produce identical
/// bytes.
pub fn write_trace(trace: &TaskTrace, mut writer: impl Write) -> Result<(), TraceError> {
    let mut emit = |line: &TraceLine| -> Result<(), TraceError> {
        let encoded = serde_json::to_string(line).expect("trace line serializes");
        writer.write_all(encoded.as_bytes())?;
        writer.write_all(b"\n")?;
        Ok(())
    };
    emit(&TraceLine::Header {
        task: trace.task.clone(),
        app_id: trace.app_id.clone(),
        config: trace.config.clone(),
    })?;
    for step in &trace.steps {
        emit(&TraceLine::Step(step.clone()))?;
    }
    emit(&TraceLine::End {
        termination: trace.termination,
        detail: trace.termination_detail.clone(),
    })?;
    Ok(())
}

pub fn write_trace_file(trace: &TaskTrace, path: impl AsRef<Path>) -> Result<(), TraceError> {
    write_trace(trace, File::create(path)?)
}

/// Reads a trace written by [`write_trace`].
pub fn read_trace(reader: impl Read) -> Result<TaskTrace, TraceError> {
    let malformed = |line: usize, message: &str| TraceError::Malformed {
        line,
        message: message.to_string(),
    };
    let mut header: Option<(String, String, AgentConfig)> = None;
    let mut steps = Vec::new();
    let mut end: Option<(Termination, Option<String>)> = None;

    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: TraceLine = serde_json::from_str(&line)
            .map_err(|e| malformed(line_no, &e.to_string()))?;
        match parsed {
            TraceLine::Header { task, app_id, config } => {
                if header.is_some() {
                    return Err(malformed(line_no, "second header"));
                }
                if !steps.is_empty() || end.is_some() {
                    return Err(malformed(line_no, "header is not the first record"));
                }
                header = Some((task, app_id, config));
            }
            TraceLine::Step(step) => {
                if header.is_none() || end.is_some() {
                    return Err(malformed(line_no, "step outside header..end"));
                }
                if step.index != steps.len() {
                    return Err(malformed(line_no, "step indices are not consecutive"));
                }
                steps.push(step);
            }
            TraceLine::End { termination, detail } => {
                if header.is_none() || end.is_some() {
                    return Err(malformed(line_no, "unexpected end record"));
                }
                end = Some((termination, detail));
            }
        }
    }
    let (task, app_id, config) = header.ok_or_else(|| malformed(0, "missing header"))?;
    let (termination, termination_detail) = end.ok_or_else(|| malformed(0, "missing end"))?;
    Ok(TaskTrace { task, app_id, config, steps, termination, termination_detail })
}

pub fn read_trace_file(path: impl AsRef<Path>) -> Result<TaskTrace, TraceError> {
    read_trace(File::open(path)?)
}
