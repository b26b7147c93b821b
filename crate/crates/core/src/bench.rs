//! Benchmark scoring: compare executed action strings against reference
//! sequences, compute per-task completion progress, and aggregate by task
//! complexity and category.
//!
//! Progress for one task is `i/n`: `n` reference actions, of which the
//! first `i` were matched in order by the predicted sequence. Divergence
//! ends the match — later re-convergence earns no credit.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{run_task, AgentConfig, TaskTrace, Termination};
use crate::device::{Device, DeviceError};
use crate::llm::{CompletionParams, LlmBackend};

/// One benchmark task: what to ask for and the reference action sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub task_id: String,
    /// The natural-language task given to the agent.
    pub description: String,
    pub app_id: String,
    pub category: String,
    /// Canonical action strings, start step included.
    pub reference_actions: Vec<String>,
}

impl TaskSpec {
    /// Task complexity is the reference sequence length.
    pub fn complexity(&self) -> usize {
        self.reference_actions.len()
    }
}

/// Score of one task run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task_id: String,
    pub predicted_actions: Vec<String>,
    /// `i`: how many leading reference actions were matched.
    pub matched_steps: usize,
    /// `n`: reference sequence length.
    pub reference_len: usize,
    /// `i/n`.
    pub progress: f64,
    pub fully_complete: bool,
}

impl TaskResult {
    pub fn score(spec: &TaskSpec, predicted_actions: Vec<String>) -> TaskResult {
        let matched = matched_prefix_len(&spec.reference_actions, &predicted_actions);
        let n = spec.reference_actions.len();
        TaskResult {
            task_id: spec.task_id.clone(),
            progress: completion_progress(&spec.reference_actions, &predicted_actions),
            predicted_actions,
            matched_steps: matched,
            reference_len: n,
            fully_complete: matched == n,
        }
    }
}

/// Scores a recorded trace against its spec.
pub fn score_trace(spec: &TaskSpec, trace: &TaskTrace) -> TaskResult {
    TaskResult::score(spec, trace.predicted_actions())
}

/// Canonical comparison form: verbs and connectives are compared
/// case-insensitively with whitespace collapsed, while anything inside
/// single or double quotes — element names and typed text — is compared
/// exactly. An unterminated quote keeps the rest of the string verbatim.
fn canonicalize(action: &str) -> String {
    let mut out = String::new();
    let mut quote: Option<char> = None;
    let mut pending_space = false;
    for c in action.chars() {
        if let Some(q) = quote {
            out.push(c);
            if c == q {
                quote = None;
            }
            continue;
        }
        if c.is_whitespace() {
            pending_space = true;
            continue;
        }
        if pending_space && !out.is_empty() {
            out.push(' ');
        }
        pending_space = false;
        if c == '\'' || c == '"' {
            quote = Some(c);
            out.push(c);
        } else {
            out.extend(c.to_lowercase());
        }
    }
    out
}

/// Whether two canonical action strings denote the same action.
pub fn action_equal(a: &str, b: &str) -> bool {
    canonicalize(a) == canonicalize(b)
}

/// `i`: length of the longest reference prefix matched element-wise by
/// `predicted`.
pub fn matched_prefix_len(reference: &[String], predicted: &[String]) -> usize {
    reference
        .iter()
        .zip(predicted)
        .take_while(|(r, p)| action_equal(r, p))
        .count()
}

/// `P_pred = i/n`. The reference sequence must be non-empty.
pub fn completion_progress(reference: &[String], predicted: &[String]) -> f64 {
    assert!(!reference.is_empty(), "reference sequence must not be empty");
    matched_prefix_len(reference, predicted) as f64 / reference.len() as f64
}

/// Complexity bucket labels, in report order.
pub const COMPLEXITY_BUCKETS: [&str; 3] = ["2~3 steps", "4~5 steps", "6~13 steps"];

fn complexity_bucket(n: usize) -> &'static str {
    match n {
        0..=3 => COMPLEXITY_BUCKETS[0],
        4..=5 => COMPLEXITY_BUCKETS[1],
        _ => COMPLEXITY_BUCKETS[2],
    }
}

/// One aggregated report row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketRow {
    pub label: String,
    pub count: usize,
    /// Mean progress over the bucket, as a percentage with 2 decimals.
    pub avg_progress_pct: f64,
    /// Fully-completed share of the bucket, as a percentage with 2 decimals.
    pub full_completion_rate_pct: f64,
}

/// Aggregated scores: totals plus per-complexity and per-category rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressReport {
    pub total: BucketRow,
    pub by_complexity: Vec<BucketRow>,
    pub by_category: Vec<BucketRow>,
    pub tasks: Vec<TaskResult>,
}

/// Specs and results disagree about task ids.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AggregateError {
    #[error("duplicate task id '{0}'")]
    DuplicateTaskId(String),
    #[error("no result for task '{0}'")]
    MissingResult(String),
    #[error("result for unknown task '{0}'")]
    UnexpectedResult(String),
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn row_for(label: &str, results: &[&TaskResult]) -> BucketRow {
    let count = results.len();
    let sum: f64 = results.iter().map(|r| r.progress).sum();
    let complete = results.iter().filter(|r| r.fully_complete).count();
    BucketRow {
        label: label.to_string(),
        count,
        avg_progress_pct: round2(sum / count as f64 * 100.0),
        full_completion_rate_pct: round2(complete as f64 / count as f64 * 100.0),
    }
}

/// Aggregates results over specs; results must cover specs one-to-one.
pub fn aggregate(
    specs: &[TaskSpec],
    results: &[TaskResult],
) -> Result<ProgressReport, AggregateError> {
    let mut seen = BTreeSet::new();
    for spec in specs {
        if !seen.insert(spec.task_id.as_str()) {
            return Err(AggregateError::DuplicateTaskId(spec.task_id.clone()));
        }
    }
    let mut by_id: BTreeMap<&str, &TaskResult> = BTreeMap::new();
    for result in results {
        if !seen.contains(result.task_id.as_str()) {
            return Err(AggregateError::UnexpectedResult(result.task_id.clone()));
        }
        if by_id.insert(result.task_id.as_str(), result).is_some() {
            return Err(AggregateError::DuplicateTaskId(result.task_id.clone()));
        }
    }

    let mut ordered = Vec::with_capacity(specs.len());
    for spec in specs {
        let result = by_id
            .get(spec.task_id.as_str())
            .ok_or_else(|| AggregateError::MissingResult(spec.task_id.clone()))?;
        ordered.push((spec, *result));
    }

    let all: Vec<&TaskResult> = ordered.iter().map(|(_, r)| *r).collect();
    let total = row_for("Total", &all);

    let mut by_complexity = Vec::new();
    for bucket in COMPLEXITY_BUCKETS {
        let members: Vec<&TaskResult> = ordered
            .iter()
            .filter(|(s, _)| complexity_bucket(s.complexity()) == bucket)
            .map(|(_, r)| *r)
            .collect();
        if !members.is_empty() {
            by_complexity.push(row_for(bucket, &members));
        }
    }

    let mut category_order: Vec<&str> = Vec::new();
    for (spec, _) in &ordered {
        if !category_order.contains(&spec.category.as_str()) {
            category_order.push(&spec.category);
        }
    }
    let mut by_category = Vec::new();
    for category in category_order {
        let members: Vec<&TaskResult> = ordered
            .iter()
            .filter(|(s, _)| s.category == category)
            .map(|(_, r)| *r)
            .collect();
        by_category.push(row_for(category, &members));
    }

    Ok(ProgressReport {
        total,
        by_complexity,
        by_category,
        tasks: ordered.into_iter().map(|(_, r)| r.clone()).collect(),
    })
}

fn render_table(title: &str, rows: &[BucketRow], total: &BucketRow) -> String {
    let label_width = rows
        .iter()
        .map(|r| r.label.len())
        .chain([title.len(), total.label.len()])
        .max()
        .unwrap_or(0);
    let mut out = format!(
        "{title:<label_width$}  {:>6}  {:>27}  {:>21}\n",
        "Number", "Average completion progress", "Fully completion rate"
    );
    for row in rows.iter().chain([total]) {
        out.push_str(&format!(
            "{:<label_width$}  {:>6}  {:>26.2}%  {:>20.2}%\n",
            row.label, row.count, row.avg_progress_pct, row.full_completion_rate_pct
        ));
    }
    out
}

/// Plain-text report: one table by complexity, one by category.
pub fn render_text(report: &ProgressReport) -> String {
    format!(
        "{}\n{}",
        render_table("Task complexity", &report.by_complexity, &report.total),
        render_table("Task category", &report.by_category, &report.total)
    )
}

/// Structural check for a serialized report: required fields, percentage
/// ranges, and bucket counts summing to the total.
pub fn validate_report_json(value: &serde_json::Value) -> Result<(), String> {
    let check_row = |row: &serde_json::Value, where_: &str| -> Result<u64, String> {
        let label = row.get("label").and_then(|v| v.as_str());
        if label.is_none_or(str::is_empty) {
            return Err(format!("{where_}: missing label"));
        }
        let count = row
            .get("count")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| format!("{where_}: missing count"))?;
        for field in ["avg_progress_pct", "full_completion_rate_pct"] {
            let pct = row
                .get(field)
                .and_then(|v| v.as_f64())
                .ok_or_else(|| format!("{where_}: missing {field}"))?;
            if !(0.0..=100.0).contains(&pct) {
                return Err(format!("{where_}: {field} {pct} outside [0, 100]"));
            }
        }
        Ok(count)
    };

    let total_count = check_row(
        value.get("total").ok_or("missing total row")?,
        "total",
    )?;
    for section in ["by_complexity", "by_category"] {
        let rows = value
            .get(section)
            .and_then(|v| v.as_array())
            .ok_or_else(|| format!("missing {section} array"))?;
        let mut sum = 0;
        for (i, row) in rows.iter().enumerate() {
            sum += check_row(row, &format!("{section}[{i}]"))?;
        }
        if sum != total_count {
            return Err(format!("{section} counts sum to {sum}, total says {total_count}"));
        }
    }
    let tasks = value
        .get("tasks")
        .and_then(|v| v.as_array())
        .ok_or("missing tasks array")?;
    if tasks.len() as u64 != total_count {
        return Err(format!("{} tasks listed, total says {total_count}", tasks.len()));
    }
    for (i, task) in tasks.iter().enumerate() {
        if task.get("task_id").and_then(|v| v.as_str()).is_none_or(str::is_empty) {
            return Err(format!("tasks[{i}]: missing task_id"));
        }
    }
    Ok(())
}

/// Suite file rejected during load.
#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("cannot read suite file")]
    Io(#[from] std::io::Error),
    #[error("suite is not valid JSON: {0}")]
    Schema(String),
    #[error("task '{task_id}': {message}")]
    Invalid { task_id: String, message: String },
}

/// Loads and validates a JSON task-suite file (an array of specs).
pub fn load_suite(path: impl AsRef<Path>) -> Result<Vec<TaskSpec>, SuiteError> {
    parse_suite(&fs::read_to_string(path)?)
}

/// [`load_suite`] over in-memory JSON.
pub fn parse_suite(json: &str) -> Result<Vec<TaskSpec>, SuiteError> {
    let specs: Vec<TaskSpec> =
        serde_json::from_str(json).map_err(|e| SuiteError::Schema(e.to_string()))?;
    let mut seen = BTreeSet::new();
    for spec in &specs {
        let fail = |message: &str| SuiteError::Invalid {
            task_id: spec.task_id.clone(),
            message: message.to_string(),
        };
        if spec.task_id.is_empty() {
            return Err(fail("task_id must not be empty"));
        }
        if !seen.insert(spec.task_id.as_str()) {
            return Err(fail("duplicate task_id"));
        }
        if spec.description.is_empty() {
            return Err(fail("description must not be empty"));
        }
        if spec.app_id.is_empty() {
            return Err(fail("app_id must not be empty"));
        }
        if spec.reference_actions.is_empty() {
            return Err(fail("reference_actions must not be empty"));
        }
    }
    Ok(specs)
}

/// A full suite run: the aggregated report plus one trace per task.
#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub report: ProgressReport,
    /// `(task_id, trace)` in suite order.
    pub traces: Vec<(String, TaskTrace)>,
}

/// Runs every task in the suite on a fresh device from the factory and
/// aggregates the scores. Per-task failures (device setup included) become
/// scores, never suite aborts.
pub fn run_suite<F>(
    specs: &[TaskSpec],
    mut device_factory: F,
    llm: &dyn LlmBackend,
    params: &CompletionParams,
    cfg: &AgentConfig,
) -> Result<SuiteOutcome, AggregateError>
where
    F: FnMut(&TaskSpec) -> Result<Box<dyn Device>, DeviceError>,
{
    let mut results = Vec::with_capacity(specs.len());
    let mut traces = Vec::with_capacity(specs.len());
    for spec in specs {
        let trace = match device_factory(spec) {
            Ok(mut device) => {
                run_task(&mut device, llm, params, cfg, &spec.description, &spec.app_id)
            }
            Err(e) => TaskTrace {
                task: spec.description.clone(),
                app_id: spec.app_id.clone(),
                config: cfg.clone(),
                steps: Vec::new(),
                termination: Termination::DeviceError,
                termination_detail: Some(format!("device setup failed: {e}")),
            },
        };
        results.push(score_trace(spec, &trace));
        traces.push((spec.task_id.clone(), trace));
    }
    let report = aggregate(specs, &results)?;
    Ok(SuiteOutcome { report, traces })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn spec(id: &str, category: &str, refs: &[&str]) -> TaskSpec {
        TaskSpec {
            task_id: id.to_string(),
            description: format!("task {id}"),
            app_id: "App".to_string(),
            category: category.to_string(),
            reference_actions: strings(refs),
        }
    }

    fn result_with(spec: &TaskSpec, matched: usize) -> TaskResult {
        let predicted: Vec<String> =
            spec.reference_actions.iter().take(matched).cloned().collect();
        TaskResult::score(spec, predicted)
    }

    // ── action_equal ────────────────────────────────────────────────────

    #[test]
    fn verb_case_is_ignored() {
        assert!(action_equal("click view 'Extras'", "Click view 'Extras'"));
        assert!(action_equal("START the app Demo", "start the app Demo"));
    }

    #[test]
    fn whitespace_outside_quotes_is_collapsed() {
        assert!(action_equal("click  view   'Extras'", "click view 'Extras'"));
        assert!(action_equal("  click view 'Extras'  ", "click view 'Extras'"));
    }

    #[test]
    fn quoted_content_is_compared_exactly() {
        assert!(!action_equal(
            "click view with text \"Current  weather\"",
            "click view with text \"Current weather\""
        ));
        assert!(!action_equal("click view 'extras'", "click view 'Extras'"));
        assert!(action_equal(
            "click view with text \"Beijing, CN  (39.91,...\"",
            "click view with text \"Beijing, CN  (39.91,...\""
        ));
    }

    #[test]
    fn different_targets_differ() {
        assert!(!action_equal("click view 'Extras'", "click view 'Settings'"));
    }

    #[test]
    fn unbalanced_quote_keeps_rest_verbatim() {
        assert!(!action_equal("click view 'Ex  tras", "click view 'Ex tras"));
        assert!(action_equal("click view 'Ex  tras", "CLICK view 'Ex  tras"));
    }

    #[test]
    fn mixed_quote_styles_are_distinct() {
        assert!(!action_equal("click view 'Extras'", "click view \"Extras\""));
    }

    // ── completion_progress ─────────────────────────────────────────────

    #[test]
    fn identical_sequences_score_one() {
        let r = strings(&["a", "b", "c", "d"]);
        assert_eq!(completion_progress(&r, &r), 1.0);
    }

    #[test]
    fn divergence_halfway_scores_half() {
        let r = strings(&["a1", "a2", "a3", "a4"]);
        let p = strings(&["a1", "a2", "x", "y"]);
        assert_eq!(completion_progress(&r, &p), 0.5);
    }

    #[test]
    fn strict_prefix_scores_by_length() {
        let r = strings(&["a1", "a2", "a3", "a4"]);
        let p = strings(&["a1", "a2"]);
        assert_eq!(completion_progress(&r, &p), 0.5);
    }

    #[test]
    fn reconvergence_earns_nothing() {
        let r = strings(&["a", "b", "c"]);
        let p = strings(&["a", "x", "c"]);
        assert_eq!(matched_prefix_len(&r, &p), 1);
    }

    #[test]
    fn empty_prediction_scores_zero() {
        let r = strings(&["a", "b"]);
        assert_eq!(completion_progress(&r, &[]), 0.0);
    }

    #[test]
    fn extra_predicted_steps_after_full_match_keep_score_one() {
        let r = strings(&["a", "b"]);
        let p = strings(&["a", "b", "c", "d"]);
        assert_eq!(completion_progress(&r, &p), 1.0);
    }

    #[test]
    #[should_panic(expected = "reference sequence")]
    fn empty_reference_is_rejected() {
        completion_progress(&[], &[]);
    }

    #[test]
    fn completion_rate_rounding_examples() {
        // 33 tasks, 13 complete → 39.39%; 10 tasks, 6 complete → 60.00%
        assert_eq!(round2(13.0 / 33.0 * 100.0), 39.39);
        assert_eq!(round2(6.0 / 10.0 * 100.0), 60.00);
    }

    // ── scoring traces ──────────────────────────────────────────────────

    #[test]
    fn score_marks_full_completion() {
        let s = spec("t", "Tools", &["a", "b"]);
        let result = TaskResult::score(&s, strings(&["a", "b"]));
        assert!(result.fully_complete);
        assert_eq!(result.progress, 1.0);
        assert_eq!(result.matched_steps, 2);
        assert_eq!(result.reference_len, 2);
    }

    #[test]
    fn full_completion_iff_progress_one() {
        let s = spec("t", "Tools", &["a", "b", "c"]);
        for matched in 0..=3 {
            let result = result_with(&s, matched);
            assert_eq!(result.fully_complete, result.progress == 1.0);
        }
    }

    // ── aggregation ─────────────────────────────────────────────────────

    fn demo_specs() -> Vec<TaskSpec> {
        vec![
            spec("t1", "Weather", &["a", "b"]),
            spec("t2", "Weather", &["a", "b", "c", "d", "e", "f", "g"]),
            spec("t3", "Weather", &["a", "b", "c", "d"]),
            spec("t4", "Music", &["a", "b", "c"]),
        ]
    }

    fn demo_results(specs: &[TaskSpec]) -> Vec<TaskResult> {
        vec![
            result_with(&specs[0], 2), // complete, bucket 2~3
            result_with(&specs[1], 2), // 2/7, bucket 6~13
            result_with(&specs[2], 4), // complete, bucket 4~5
            result_with(&specs[3], 3), // complete, bucket 2~3
        ]
    }

    #[test]
    fn aggregate_buckets_and_totals() {
        let specs = demo_specs();
        let report = aggregate(&specs, &demo_results(&specs)).unwrap();

        assert_eq!(report.total.count, 4);
        // (1 + 2/7 + 1 + 1) / 4 = 0.82142857 → 82.14%
        assert_eq!(report.total.avg_progress_pct, 82.14);
        assert_eq!(report.total.full_completion_rate_pct, 75.0);

        let labels: Vec<&str> =
            report.by_complexity.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, vec!["2~3 steps", "4~5 steps", "6~13 steps"]);
        assert_eq!(report.by_complexity[0].count, 2);
        assert_eq!(report.by_complexity[0].avg_progress_pct, 100.0);
        assert_eq!(report.by_complexity[0].full_completion_rate_pct, 100.0);
        assert_eq!(report.by_complexity[2].count, 1);
        // 2/7 → 28.571% → 28.57
        assert_eq!(report.by_complexity[2].avg_progress_pct, 28.57);
        assert_eq!(report.by_complexity[2].full_completion_rate_pct, 0.0);

        // categories in first-appearance order
        let labels: Vec<&str> = report.by_category.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, vec!["Weather", "Music"]);
        assert_eq!(report.by_category[0].count, 3);
        assert_eq!(report.by_category[1].count, 1);

        // bucket counts sum to the total
        let sum: usize = report.by_complexity.iter().map(|r| r.count).sum();
        assert_eq!(sum, report.total.count);
    }

    #[test]
    fn aggregate_detects_id_mismatches() {
        let specs = demo_specs();
        let results = demo_results(&specs);

        let missing = &results[..3];
        assert_eq!(
            aggregate(&specs, missing).unwrap_err(),
            AggregateError::MissingResult("t4".to_string())
        );

        let mut duplicated = results.clone();
        duplicated.push(results[0].clone());
        assert_eq!(
            aggregate(&specs, &duplicated).unwrap_err(),
            AggregateError::DuplicateTaskId("t1".to_string())
        );

        let mut unexpected = results.clone();
        unexpected[0].task_id = "t9".to_string();
        assert_eq!(
            aggregate(&specs, &unexpected).unwrap_err(),
            AggregateError::UnexpectedResult("t9".to_string())
        );
    }

    #[test]
    fn single_complete_task_reports_all_hundreds() {
        let specs = vec![spec("only", "Tools", &["a"])];
        let results = vec![result_with(&specs[0], 1)];
        let report = aggregate(&specs, &results).unwrap();
        assert_eq!(report.total.count, 1);
        assert_eq!(report.total.avg_progress_pct, 100.0);
        assert_eq!(report.total.full_completion_rate_pct, 100.0);
    }

    #[test]
    fn report_json_validates_and_mutations_fail() {
        let specs = demo_specs();
        let report = aggregate(&specs, &demo_results(&specs)).unwrap();
        let mut value = serde_json::to_value(&report).unwrap();
        validate_report_json(&value).unwrap();

        let mut broken = value.clone();
        broken["by_complexity"][0]["count"] = 99.into();
        assert!(validate_report_json(&broken).unwrap_err().contains("sum"));

        let mut broken = value.clone();
        broken["total"]["avg_progress_pct"] = 123.0.into();
        assert!(validate_report_json(&broken).unwrap_err().contains("outside"));

        value.as_object_mut().unwrap().remove("tasks");
        assert!(validate_report_json(&value).unwrap_err().contains("tasks"));
    }

    #[test]
    fn render_text_lays_out_both_tables() {
        let specs = demo_specs();
        let report = aggregate(&specs, &demo_results(&specs)).unwrap();
        let text = render_text(&report);
        assert!(text.contains(
            "Task complexity  Number  Average completion progress  Fully completion rate"
        ));
        assert!(text.contains(
            "Task category  Number  Average completion progress  Fully completion rate"
        ));
        assert!(text.contains("2~3 steps"));
        assert!(text.contains("82.14%"));
        assert!(text.contains("75.00%"));
        let complexity_line =
            text.lines().find(|l| l.starts_with("6~13 steps")).unwrap().to_string();
        assert!(complexity_line.ends_with("0.00%"), "{complexity_line}");
        assert!(complexity_line.contains("28.57%"), "{complexity_line}");
    }

    // ── suite files ─────────────────────────────────────────────────────

    #[test]
    fn parse_suite_accepts_valid_and_rejects_broken() {
        let json = serde_json::to_string(&demo_specs()).unwrap();
        assert_eq!(parse_suite(&json).unwrap().len(), 4);

        let mut dup = demo_specs();
        dup[1].task_id = "t1".to_string();
        let err = parse_suite(&serde_json::to_string(&dup).unwrap()).unwrap_err();
        assert!(err.to_string().contains("duplicate"));

        let mut empty_refs = demo_specs();
        empty_refs[0].reference_actions.clear();
        let err = parse_suite(&serde_json::to_string(&empty_refs).unwrap()).unwrap_err();
        assert!(err.to_string().contains("reference_actions"));

        assert!(matches!(parse_suite("not json"), Err(SuiteError::Schema(_))));
    }

    // ── run_suite ───────────────────────────────────────────────────────

    #[test]
    fn suite_failures_become_zero_scores() {
        use crate::llm::scripted::ScriptedBackend;
        let specs = vec![
            spec("works", "Tools", &["start the app App"]),
            spec("breaks", "Tools", &["start the app App", "never happens"]),
        ];
        let backend = ScriptedBackend::from_json(r#"[{"default": true, "reply": "-1"}]"#).unwrap();

        let model = crate::device::sim::AppModel::from_json(
            &serde_json::json!({
                "app_id": "App",
                "initial_screen": "only",
                "screens": {"only": {"elements": [
                    {"key": "l", "class": "TextView", "text": "Hi"}
                ]}}
            })
            .to_string(),
        )
        .unwrap();

        let outcome = run_suite(
            &specs,
            |spec| {
                if spec.task_id == "breaks" {
                    Err(DeviceError::Disconnected)
                } else {
                    let sim =
                        crate::device::sim::Simulator::with_models(vec![model.clone()]).unwrap();
                    Ok(Box::new(sim) as Box<dyn Device>)
                }
            },
            &backend,
            &CompletionParams::default(),
            &AgentConfig::default(),
        )
        .unwrap();

        assert_eq!(outcome.report.total.count, 2);
        assert_eq!(outcome.traces.len(), 2);
        let broken = &outcome.report.tasks[1];
        assert_eq!(broken.progress, 0.0);
        assert!(broken.predicted_actions.is_empty());
        assert_eq!(outcome.traces[1].1.termination, Termination::DeviceError);
        let working = &outcome.report.tasks[0];
        assert!(working.fully_complete);
    }

    // ── properties ──────────────────────────────────────────────────────

    fn arb_actions() -> impl Strategy<Value = Vec<String>> {
        proptest::collection::vec(
            prop_oneof![
                Just("click view 'A'".to_string()),
                Just("click view 'B'".to_string()),
                Just("check view 'C'".to_string()),
                Just("scroll up view 'D'".to_string()),
                Just("enter \"x\" into view with text \"E\"".to_string()),
            ],
            0..13,
        )
    }

    // Independent prefix-length computation: scan downward from the longest
    // possible prefix.
    fn oracle_prefix_len(reference: &[String], predicted: &[String]) -> usize {
        let upper = reference.len().min(predicted.len());
        for k in (0..=upper).rev() {
            if (0..k).all(|j| action_equal(&reference[j], &predicted[j])) {
                return k;
            }
        }
        0
    }

    proptest! {
        #[test]
        fn prefix_len_matches_oracle(r in arb_actions(), p in arb_actions()) {
            prop_assert_eq!(matched_prefix_len(&r, &p), oracle_prefix_len(&r, &p));
        }

        #[test]
        fn progress_is_monotone_in_correct_prefix(r in arb_actions(), k in 0usize..13) {
            prop_assume!(!r.is_empty());
            let shorter: Vec<String> = r.iter().take(k).cloned().collect();
            let longer: Vec<String> = r.iter().take(k + 1).cloned().collect();
            prop_assert!(
                completion_progress(&r, &shorter) <= completion_progress(&r, &longer)
            );
        }

        #[test]
        fn progress_stays_in_unit_interval(r in arb_actions(), p in arb_actions()) {
            prop_assume!(!r.is_empty());
            let progress = completion_progress(&r, &p);
            prop_assert!((0.0..=1.0).contains(&progress));
        }

        #[test]
        fn canonicalization_is_idempotent(a in "[a-zA-Z '\"]{0,30}") {
            let once = canonicalize(&a);
            prop_assert_eq!(canonicalize(&once), once);
        }
    }

    #[test]
    fn total_equals_weighted_mean_of_buckets() {
        let specs = demo_specs();
        let report = aggregate(&specs, &demo_results(&specs)).unwrap();
        let weighted: f64 = report
            .by_complexity
            .iter()
            .map(|r| r.avg_progress_pct * r.count as f64)
            .sum::<f64>()
            / report.total.count as f64;
        assert!((weighted - report.total.avg_progress_pct).abs() < 0.02, "{weighted}");
    }
}
