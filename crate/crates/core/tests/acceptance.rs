//! Acceptance gate: every release-blocking criterion, one test each, at its
//! stated tolerance. Each test prints one `ACCEPTANCE <name>: PASS` line on
//! completing its assertions; a failed assertion is the FAIL signal.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use uitask::agent::{run_task, write_trace, AgentConfig, TaskTrace};
use uitask::bench::{aggregate, completion_progress, load_suite, TaskResult, TaskSpec};
use uitask::device::{load_models_path, Simulator};
use uitask::llm::{CompletionParams, LlmBackend, RecordingBackend, ReplayBackend, ScriptedBackend};
use uitask::parse::{parse_choice, Decision};
use uitask::prompt::{describe_state, synthesize_edit_prompt};
use uitask::ui::{UiElement, UiState};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn fixture_sim() -> Simulator {
    Simulator::with_models(load_models_path(fixtures()).unwrap()).unwrap()
}

fn faithful_backend() -> ScriptedBackend {
    ScriptedBackend::from_file(fixtures().join("faithful.rules.json")).unwrap()
}

fn trace_bytes(trace: &TaskTrace) -> Vec<u8> {
    let mut bytes = Vec::new();
    write_trace(trace, &mut bytes).unwrap();
    bytes
}

fn pass(name: &str) {
    // Write to the real stdout so the line survives libtest's capture.
    writeln!(std::io::stdout(), "ACCEPTANCE {name}: PASS").unwrap();
}

#[test]
fn acceptance_prompt_fidelity() {
    let started = Instant::now();

    let root = UiElement::new("root", "FrameLayout").with_children(vec![
        UiElement::new("sort", "TextView").with_text("Sort by").clickable(),
        UiElement::new("hint", "TextView").with_text("Newest first"),
    ]);
    let state = UiState::new("Files", "list", root);
    let description = describe_state(&state);

    assert!(description.text.contains(
        "The current state has the following UI views and corresponding actions, \
         with action id in parentheses"
    ));
    assert!(description.text.contains("a view 'Sort by' that can click (0);"));

    assert!(started.elapsed() < Duration::from_secs(1));
    pass("prompt_fidelity");
}

#[test]
fn acceptance_edit_protocol_fidelity() {
    let field = UiElement::new("field", "EditText").with_text("city, country").editable();
    let root = UiElement::new("root", "FrameLayout").with_children(vec![field.clone()]);
    let state = UiState::new("World Weather", "add_city", root);
    let description = describe_state(&state);

    let prompt =
        synthesize_edit_prompt("add the city Beijing", &description, &[], &field).unwrap();
    assert!(prompt.rendered.ends_with(
        "What should I enter to the view with the text 'city, country'? \
         Just return the text and nothing else."
    ));

    pass("edit_protocol_fidelity");
}

/// Builds a spec/result pair with `n` reference actions of which the first
/// `matched` are reproduced (followed by a wrong action when partial).
fn synthetic_task(id: usize, n: usize, matched: usize) -> (TaskSpec, Vec<String>) {
    let reference: Vec<String> =
        (0..n).map(|j| format!("click view 'screen {id} item {j}'")).collect();
    let mut predicted: Vec<String> = reference.iter().take(matched).cloned().collect();
    if matched < n {
        predicted.push(format!("click view 'wrong turn {id}'"));
    }
    let spec = TaskSpec {
        task_id: format!("t{id:02}"),
        description: format!("synthetic task {id}"),
        app_id: "Synthetic".to_string(),
        category: "Synthetic".to_string(),
        reference_actions: reference,
    };
    (spec, predicted)
}

#[test]
fn acceptance_metric_arithmetic() {
    let started = Instant::now();

    // (reference length, matched steps) for 33 tasks: 10 short, 13 medium,
    // 10 long; 6 + 5 + 2 = 13 fully complete.
    #[rustfmt::skip]
    let shape: Vec<(usize, usize)> = vec![
        // 2~3 steps: 6 complete, 4 at 1/3
        (2, 2), (2, 2), (2, 2), (3, 3), (3, 3), (3, 3),
        (3, 1), (3, 1), (3, 1), (3, 1),
        // 4~5 steps: 5 complete, then 3/4, 2/4 ×3, 1/4 ×4
        (4, 4), (4, 4), (5, 5), (5, 5), (4, 4),
        (4, 3), (4, 2), (4, 2), (4, 2), (4, 1), (4, 1), (4, 1), (4, 1),
        // 6~13 steps: 2 complete, then 1/13 ×3, 8/10, 11/12 ×4
        (7, 7), (13, 13),
        (13, 1), (13, 1), (13, 1), (10, 8),
        (12, 11), (12, 11), (12, 11), (12, 11),
    ];
    assert_eq!(shape.len(), 33);

    let mut specs = Vec::new();
    let mut results = Vec::new();
    for (id, (n, matched)) in shape.into_iter().enumerate() {
        let (spec, predicted) = synthetic_task(id, n, matched);
        results.push(TaskResult::score(&spec, predicted));
        specs.push(spec);
    }

    let report = aggregate(&specs, &results).unwrap();
    assert_eq!(report.total.count, 33);
    assert!((report.total.full_completion_rate_pct - 39.39).abs() <= 0.01);

    let rows = &report.by_complexity;
    assert_eq!(rows[0].label, "2~3 steps");
    assert_eq!(rows[0].count, 10);
    assert_eq!(rows[0].full_completion_rate_pct, 60.00);
    assert_eq!(rows[0].avg_progress_pct, 73.33);
    assert_eq!(rows[1].label, "4~5 steps");
    assert_eq!(rows[1].count, 13);
    assert_eq!(rows[1].full_completion_rate_pct, 38.46);
    assert_eq!(rows[1].avg_progress_pct, 63.46);
    assert_eq!(rows[2].label, "6~13 steps");
    assert_eq!(rows[2].count, 10);
    assert_eq!(rows[2].full_completion_rate_pct, 20.00);
    assert_eq!(rows[2].avg_progress_pct, 66.97);

    assert!(started.elapsed() < Duration::from_secs(1));
    pass("metric_arithmetic");
}

#[test]
fn acceptance_end_to_end_determinism() {
    let started = Instant::now();

    let specs = load_suite(fixtures().join("demo.suite.json")).unwrap();
    let backend = faithful_backend();
    let params = CompletionParams::default();
    let cfg = AgentConfig::default();

    for spec in &specs {
        let run = |_: ()| {
            let mut sim = fixture_sim();
            run_task(&mut sim, &backend, &params, &cfg, &spec.description, &spec.app_id)
        };
        let first = run(());
        let second = run(());
        assert_eq!(
            first.predicted_actions(),
            spec.reference_actions,
            "{} diverged from its reference sequence",
            spec.task_id
        );
        assert_eq!(trace_bytes(&first), trace_bytes(&second), "{} trace drifted", spec.task_id);
    }

    assert!(started.elapsed() < Duration::from_secs(5));
    pass("end_to_end_determinism");
}

#[test]
fn acceptance_prefix_metric_oracle_equivalence() {
    let started = Instant::now();

    let alphabet = ["alpha", "beta", "gamma", "delta", "epsilon"];
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let random_actions = |rng: &mut ChaCha8Rng| -> Vec<String> {
        let len = rng.random_range(0..=13);
        (0..len)
            .map(|_| format!("click view '{}'", alphabet[rng.random_range(0..alphabet.len())]))
            .collect()
    };

    for _ in 0..10_000 {
        let reference = {
            let mut r = random_actions(&mut rng);
            if r.is_empty() {
                r.push("click view 'alpha'".to_string());
            }
            r
        };
        let predicted = random_actions(&mut rng);

        // independent oracle: longest common prefix by scanning down from
        // the maximum possible length
        let upper = reference.len().min(predicted.len());
        let mut oracle = 0;
        for k in (0..=upper).rev() {
            if (0..k).all(|j| reference[j] == predicted[j]) {
                oracle = k;
                break;
            }
        }

        let expected = oracle as f64 / reference.len() as f64;
        assert_eq!(completion_progress(&reference, &predicted), expected);
    }

    assert!(started.elapsed() < Duration::from_secs(10));
    pass("prefix_metric_oracle_equivalence");
}

#[test]
fn acceptance_parser_robustness() {
    let prefixes = [
        "",
        "I think the best action is ",
        "Action: ",
        "The answer is clearly\n",
        "Based on the current state, choose ",
        "reply: ",
    ];
    let suffixes = [
        "",
        " because it matches the task.",
        ".",
        "\nThat should finish the step.",
        " (the most relevant view)",
        ", then wait.",
    ];

    let mut rng = ChaCha8Rng::seed_from_u64(0xdec0);
    let mut correct = 0;
    for _ in 0..1_000 {
        let num_actions = rng.random_range(1..=12);
        let id = rng.random_range(0..num_actions);
        let reply = format!(
            "{}{}{}",
            prefixes[rng.random_range(0..prefixes.len())],
            id,
            suffixes[rng.random_range(0..suffixes.len())]
        );
        match parse_choice(&reply, num_actions) {
            Ok(Decision::Choice(found)) => {
                assert!(found < num_actions, "out-of-range choice from '{reply}'");
                if found == id {
                    correct += 1;
                }
            }
            other => panic!("reply '{reply}' parsed as {other:?}"),
        }
    }
    assert_eq!(correct, 1_000, "decorated replies must parse with 100% accuracy");

    pass("parser_robustness");
}

#[test]
fn acceptance_replay_regression() {
    let dir = tempfile::tempdir().unwrap();
    let transcript_path = dir.path().join("session.ndjson");
    let task = "add the city Beijing, China to the city list";
    let params = CompletionParams::default();
    let cfg = AgentConfig::default();

    let recorded = {
        let backend: Box<dyn LlmBackend> = Box::new(faithful_backend());
        let recording = RecordingBackend::create(backend, &transcript_path).unwrap();
        let mut sim = fixture_sim();
        run_task(&mut sim, &recording, &params, &cfg, task, "World Weather")
    };

    let replayed = {
        let backend = ReplayBackend::from_file(&transcript_path).unwrap();
        let mut sim = fixture_sim();
        run_task(&mut sim, &backend, &params, &cfg, task, "World Weather")
    };

    assert_eq!(trace_bytes(&recorded), trace_bytes(&replayed));
    pass("replay_regression");
}
