//! Command-line entry point: run one task, score a benchmark suite, dump a
//! screen's prompt, or summarize an app model.
//!
//! Exit codes: 0 success, 1 the task ran but did not complete, 2
//! configuration error (bad flags, unreadable files, unknown app/screen).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Parser, Subcommand};
use serde::Deserialize;

use crate::agent::{run_task_with, write_trace_file, AgentConfig, TaskTrace, Termination};
use crate::bench::{load_suite, render_text, run_suite, validate_report_json, TaskSpec};
use crate::device::{load_models_path, BridgeClient, Device, Simulator};
use crate::llm::{
    CompletionParams, HttpBackend, HttpConfig, LlmBackend, RecordingBackend, ReplayBackend,
    ScriptedBackend,
};
use crate::prompt::{describe_state_with, synthesize_choice_prompt, DEFAULT_TRUNCATION_WORDS};

/// Environment variable that overrides the config file's API key.
pub const API_KEY_ENV: &str = "UITASK_API_KEY";

const BRIDGE_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Parser)]
#[command(
    name = "uitask",
    version,
    about = "Drive Android-style GUI tasks with a language model"
)]
struct Cli {
    /// TOML config file with [llm] and [agent] sections.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Backend: http, scripted:<rules file>, or replay:<transcript>.
    #[arg(long, global = true, value_name = "SPEC")]
    backend: Option<String>,
    /// Device: sim:<model file or dir> or bridge:<host:port>.
    #[arg(long, global = true, value_name = "SPEC")]
    device: Option<String>,
    /// Output directory for traces and reports.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Override the agent's step budget.
    #[arg(long, global = true, value_name = "N")]
    max_steps: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single task end to end and write its trace.
    Run {
        /// Natural-language task, e.g. "check the weather in London".
        #[arg(long)]
        task: String,
        /// App id the task starts in.
        #[arg(long)]
        app: String,
    },
    /// Run every task in one or more suite files and write reports.
    Bench {
        /// Task-suite JSON files.
        #[arg(value_name = "SUITE")]
        suites: Vec<PathBuf>,
        /// Additional suite files appended to the positional ones.
        #[arg(long = "seed-suite", value_name = "PATH")]
        seed_suites: Vec<PathBuf>,
    },
    /// Print the choice prompt for one simulator screen; no backend used.
    Prompt {
        #[arg(long)]
        app: String,
        #[arg(long)]
        screen: String,
        #[arg(long)]
        task: String,
    },
    /// Summarize an app model file.
    Inspect {
        #[arg(value_name = "MODEL")]
        model: PathBuf,
    },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FileConfig {
    llm: LlmSection,
    agent: AgentSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct LlmSection {
    endpoint: Option<String>,
    model: String,
    api_key: Option<String>,
    temperature: f64,
    max_reply_tokens: u32,
    /// When set, every completion is appended to this transcript file.
    record: Option<PathBuf>,
}

impl Default for LlmSection {
    fn default() -> Self {
        LlmSection {
            endpoint: None,
            model: "gpt-3.5-turbo".to_string(),
            api_key: None,
            temperature: 0.0,
            max_reply_tokens: 64,
            record: None,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct AgentSection {
    max_steps: Option<usize>,
    max_retries_per_step: Option<usize>,
    repetition_window: Option<usize>,
    truncation_words: Option<usize>,
}

#[derive(Debug)]
enum CliError {
    /// Bad flags or unusable inputs — exit 2.
    Config(String),
    /// The task ran but did not complete — exit 1.
    Task(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Task(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Task(m) => m,
        }
    }
}

fn config_error(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

/// Parses `args` and runs the selected command, returning the process exit
/// code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let file = load_file_config(cli.config.as_deref())?;
    let agent_cfg = agent_config(&file, cli.max_steps)?;
    match cli.command {
        Command::Run { task, app } => cmd_run(
            &task,
            &app,
            required(&cli.backend, "--backend")?,
            required(&cli.device, "--device")?,
            &cli.out,
            &file,
            &agent_cfg,
        ),
        Command::Bench { suites, seed_suites } => cmd_bench(
            &suites,
            &seed_suites,
            required(&cli.backend, "--backend")?,
            required(&cli.device, "--device")?,
            &cli.out,
            &file,
            &agent_cfg,
        ),
        Command::Prompt { app, screen, task } => cmd_prompt(
            &app,
            &screen,
            &task,
            required(&cli.device, "--device")?,
            &agent_cfg,
        ),
        Command::Inspect { model } => cmd_inspect(&model),
    }
}

fn required<'a>(value: &'a Option<String>, flag: &str) -> Result<&'a str, CliError> {
    value
        .as_deref()
        .ok_or_else(|| CliError::Config(format!("{flag} is required for this command")))
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| CliError::Config(format!("config {} is invalid: {e}", path.display())))
}

fn agent_config(file: &FileConfig, max_steps_flag: Option<usize>) -> Result<AgentConfig, CliError> {
    let mut cfg = AgentConfig::default();
    let section = &file.agent;
    if let Some(v) = section.max_steps {
        cfg.max_steps = v;
    }
    if let Some(v) = section.max_retries_per_step {
        cfg.max_retries_per_step = v;
    }
    if let Some(v) = section.repetition_window {
        cfg.repetition_window = v;
    }
    if let Some(v) = section.truncation_words {
        cfg.truncation_words = v;
    }
    if let Some(v) = max_steps_flag {
        cfg.max_steps = v;
    }
    cfg.validate().map_err(config_error)?;
    Ok(cfg)
}

fn completion_params(file: &FileConfig) -> CompletionParams {
    CompletionParams {
        model_name: file.llm.model.clone(),
        temperature: file.llm.temperature,
        max_reply_tokens: file.llm.max_reply_tokens,
    }
}

fn build_backend(spec: &str, file: &FileConfig) -> Result<Box<dyn LlmBackend>, CliError> {
    let base: Box<dyn LlmBackend> = if spec == "http" {
        let mut cfg = HttpConfig::default();
        if let Some(endpoint) = &file.llm.endpoint {
            cfg.endpoint = endpoint.clone();
        }
        cfg.api_key = std::env::var(API_KEY_ENV)
            .ok()
            .filter(|k| !k.is_empty())
            .or_else(|| file.llm.api_key.clone());
        Box::new(HttpBackend::new(cfg).map_err(config_error)?)
    } else if let Some(path) = spec.strip_prefix("scripted:") {
        Box::new(ScriptedBackend::from_file(path).map_err(config_error)?)
    } else if let Some(path) = spec.strip_prefix("replay:") {
        Box::new(ReplayBackend::from_file(path).map_err(config_error)?)
    } else {
        return Err(CliError::Config(format!(
            "unknown backend '{spec}' (expected http, scripted:<rules file>, or \
             replay:<transcript>)"
        )));
    };
    Ok(match &file.llm.record {
        Some(path) => Box::new(RecordingBackend::create(base, path).map_err(config_error)?),
        None => base,
    })
}

fn build_device(spec: &str) -> Result<Box<dyn Device>, CliError> {
    if let Some(path) = spec.strip_prefix("sim:") {
        let models = load_models_path(path).map_err(config_error)?;
        Ok(Box::new(Simulator::with_models(models).map_err(config_error)?))
    } else if let Some(addr) = spec.strip_prefix("bridge:") {
        Ok(Box::new(BridgeClient::connect(addr, BRIDGE_TIMEOUT).map_err(config_error)?))
    } else {
        Err(CliError::Config(format!(
            "unknown device '{spec}' (expected sim:<model file or dir> or bridge:<host:port>)"
        )))
    }
}

fn ensure_out_dir(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", out.display())))
}

fn write_trace_or_die(trace: &TaskTrace, path: &Path) -> Result<(), CliError> {
    write_trace_file(trace, path)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

fn cmd_run(
    task: &str,
    app: &str,
    backend_spec: &str,
    device_spec: &str,
    out: &Path,
    file: &FileConfig,
    cfg: &AgentConfig,
) -> Result<(), CliError> {
    let backend = build_backend(backend_spec, file)?;
    let mut device = build_device(device_spec)?;
    let params = completion_params(file);
    ensure_out_dir(out)?;

    let trace = run_task_with(&mut device, &*backend, &params, cfg, task, app, |step| {
        println!("{}", step.action_string);
    });
    let trace_path = out.join("trace.ndjson");
    write_trace_or_die(&trace, &trace_path)?;

    match trace.termination {
        Termination::ModelDeclaredComplete => {
            println!("task complete after {} actions; trace: {}", trace.steps.len(),
                trace_path.display());
            Ok(())
        }
        other => {
            let detail = trace
                .termination_detail
                .as_deref()
                .map(|d| format!(": {d}"))
                .unwrap_or_default();
            Err(CliError::Task(format!("task did not complete — {other}{detail}")))
        }
    }
}

/// Task ids become file names; anything outside a safe set is replaced.
fn trace_file_name(task_id: &str) -> String {
    let safe: String = task_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' })
        .collect();
    format!("{safe}.ndjson")
}

fn cmd_bench(
    suites: &[PathBuf],
    seed_suites: &[PathBuf],
    backend_spec: &str,
    device_spec: &str,
    out: &Path,
    file: &FileConfig,
    cfg: &AgentConfig,
) -> Result<(), CliError> {
    let mut specs: Vec<TaskSpec> = Vec::new();
    for path in suites.iter().chain(seed_suites) {
        let loaded = load_suite(path)
            .map_err(|e| CliError::Config(format!("suite {}: {e}", path.display())))?;
        specs.extend(loaded);
    }
    if specs.is_empty() {
        return Err(CliError::Config(
            "no tasks to run — pass at least one suite file".to_string(),
        ));
    }

    let backend = build_backend(backend_spec, file)?;
    let params = completion_params(file);
    ensure_out_dir(out)?;
    let traces_dir = out.join("traces");
    ensure_out_dir(&traces_dir)?;

    let outcome = run_suite(
        &specs,
        |_spec| match build_device(device_spec) {
            Ok(device) => Ok(device),
            Err(e) => Err(crate::device::DeviceError::Protocol(e.message().to_string())),
        },
        &*backend,
        &params,
        cfg,
    )
    .map_err(config_error)?;

    for (task_id, trace) in &outcome.traces {
        write_trace_or_die(trace, &traces_dir.join(trace_file_name(task_id)))?;
    }

    let text = render_text(&outcome.report);
    let json = serde_json::to_value(&outcome.report).expect("report serializes");
    validate_report_json(&json).map_err(config_error)?;
    let report_txt = out.join("report.txt");
    let report_json = out.join("report.json");
    fs::write(&report_txt, &text)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", report_txt.display())))?;
    fs::write(&report_json, serde_json::to_string_pretty(&json).expect("report serializes"))
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", report_json.display())))?;
    print!("{text}");
    Ok(())
}

fn cmd_prompt(
    app: &str,
    screen: &str,
    task: &str,
    device_spec: &str,
    cfg: &AgentConfig,
) -> Result<(), CliError> {
    let Some(path) = device_spec.strip_prefix("sim:") else {
        return Err(CliError::Config(
            "prompt dumping needs a simulator device (--device sim:<path>)".to_string(),
        ));
    };
    let models = load_models_path(path).map_err(config_error)?;
    let sim = Simulator::with_models(models).map_err(config_error)?;
    let state = sim.state_of(app, screen).map_err(config_error)?;
    let max_words = if cfg.truncation_words == 0 {
        DEFAULT_TRUNCATION_WORDS
    } else {
        cfg.truncation_words
    };
    let description = describe_state_with(&state, max_words);
    let prompt = synthesize_choice_prompt(task, &description, &[]);
    println!("{}", prompt.rendered);
    Ok(())
}

fn cmd_inspect(model_path: &Path) -> Result<(), CliError> {
    let model = crate::device::load_app_model(model_path).map_err(config_error)?;
    println!("app: {}", model.app_id);
    println!("initial screen: {}", model.initial_screen);
    println!("screens: {}", model.screens.len());
    for (id, screen) in &model.screens {
        let element_count: usize = screen.elements.iter().map(count_elements).sum();
        println!(
            "  {id}: {element_count} elements, {} transitions{}",
            screen.transitions.len(),
            if screen.scroll.is_some() { ", scrollable" } else { "" }
        );
    }
    Ok(())
}

fn count_elements(element: &crate::ui::UiElement) -> usize {
    1 + element.children.iter().map(count_elements).sum::<usize>()
}
