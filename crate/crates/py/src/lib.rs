//! Python bindings for trajkit: ReACT parsing, trajectory metrics,
//! offline trajectory synthesis and adapter parameter accounting.
//!
//! Structured results cross the boundary as JSON and are decoded with the
//! standard `json` module, so Python callers receive plain dicts and lists.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde_json::{json, Value};

use trajkit::aen::{
    construct_trajectories, discover_connections, ConnectionParams, ConstructionParams, HashScorer,
};
use trajkit::backend::ScriptedBackend;
use trajkit::metrics::{self, EvalParams, DEFAULT_TRR_THETA};
use trajkit::model::{from_jsonl_str, AenNode, MetaTrajectory, ToolCallRecord};
use trajkit::modulation;
use trajkit::orchestrator::RunRecord;
use trajkit::react;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py(py: Python<'_>, value: &Value) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(value_error)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn to_json<T: serde::Serialize>(value: &T) -> PyResult<Value> {
    serde_json::to_value(value).map_err(value_error)
}

/// Segments of a ReACT transcript as dicts with kind, content and byte spans.
#[pyfunction]
fn parse_transcript(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    let segments: Vec<Value> = react::parse_transcript(text)
        .iter()
        .map(|s| {
            json!({
                "kind": s.kind.marker(),
                "content": s.content,
                "start": s.span.start,
                "end": s.span.end,
            })
        })
        .collect();
    to_py(py, &Value::Array(segments))
}

/// Tool calls in transcript order as dicts with action, input and parsed input.
#[pyfunction]
fn action_sequence(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    let segments = react::parse_transcript(text);
    let actions: Vec<Value> = react::action_sequence(&segments)
        .into_iter()
        .map(
            |a| json!({"action": a.action, "input": a.raw_input, "structured": a.structured_input}),
        )
        .collect();
    to_py(py, &Value::Array(actions))
}

/// First Final Answer of a transcript, if any.
#[pyfunction]
fn final_answer(text: &str) -> Option<String> {
    react::final_answer(&react::parse_transcript(text)).map(str::to_string)
}

/// ReACT text for a trajectory given as one JSON object.
#[pyfunction]
fn render_trajectory(trajectory_json: &str) -> PyResult<String> {
    let traj: Vec<MetaTrajectory> = from_jsonl_str(trajectory_json).map_err(value_error)?;
    match traj.as_slice() {
        [t] => Ok(react::render_trajectory(t)),
        _ => Err(PyValueError::new_err(
            "expected exactly one trajectory object",
        )),
    }
}

#[pyfunction]
fn jaccard_similarity(a: &str, b: &str) -> f64 {
    metrics::jaccard_similarity(a, b)
}

/// Calls are (tool, input) pairs.
#[pyfunction]
#[pyo3(signature = (calls, theta = DEFAULT_TRR_THETA))]
fn tool_redundancy_rate(calls: Vec<(String, String)>, theta: f64) -> f64 {
    let records: Vec<ToolCallRecord> = calls
        .into_iter()
        .map(|(tool, input)| ToolCallRecord::new(tool, input, true, "", 0))
        .collect();
    metrics::tool_redundancy_rate(&records, theta)
}

/// Returns (precision, recall, f1) over tool-name sets.
#[pyfunction]
fn tool_consistency_f1(expected: Vec<String>, actual: Vec<String>) -> (f64, f64, f64) {
    let p = metrics::tool_consistency_f1(&expected, &actual);
    (p.precision, p.recall, p.f1)
}

/// `successes` holds one flag per tool call.
#[pyfunction]
fn trajectory_success_score(valid_output: bool, successes: Vec<bool>) -> f64 {
    let records: Vec<ToolCallRecord> = successes
        .into_iter()
        .map(|ok| ToolCallRecord::new("tool", "", ok, "", 0))
        .collect();
    metrics::trajectory_success_score(valid_output, &records)
}

/// Dataset metrics over RunRecord JSONL, with optional reference trajectories.
#[pyfunction]
#[pyo3(signature = (runs_jsonl, ground_truth_jsonl = None, trr_theta = DEFAULT_TRR_THETA))]
fn evaluate(
    py: Python<'_>,
    runs_jsonl: &str,
    ground_truth_jsonl: Option<&str>,
    trr_theta: f64,
) -> PyResult<Py<PyAny>> {
    let runs: Vec<RunRecord> = from_jsonl_str(runs_jsonl).map_err(value_error)?;
    let truth: Option<Vec<MetaTrajectory>> = ground_truth_jsonl
        .map(from_jsonl_str)
        .transpose()
        .map_err(value_error)?;
    let params = EvalParams {
        trr_theta,
        ..EvalParams::default()
    };
    let report =
        metrics::evaluate_dataset(&runs, truth.as_deref(), None, &params).map_err(value_error)?;
    to_py(py, &to_json(&report)?)
}

/// Connection discovery and greedy construction with the deterministic
/// hash scorer. Every trajectory receives `answer` as its final answer.
#[pyfunction]
#[pyo3(signature = (
    nodes_jsonl,
    theta = 0.5,
    max_pairs = 1000,
    seed = 37,
    max_length = 8,
    max_usage = 3,
    answer = "",
))]
#[allow(clippy::too_many_arguments)]
fn synthesize(
    py: Python<'_>,
    nodes_jsonl: &str,
    theta: f64,
    max_pairs: usize,
    seed: u64,
    max_length: usize,
    max_usage: usize,
    answer: &str,
) -> PyResult<Py<PyAny>> {
    let nodes: Vec<AenNode> = from_jsonl_str(nodes_jsonl).map_err(value_error)?;
    let params = ConnectionParams {
        theta,
        max_pairs,
        seed,
        ..ConnectionParams::default()
    };
    let discovery =
        discover_connections(&nodes, &params, &HashScorer::new(seed)).map_err(value_error)?;
    let construction = ConstructionParams {
        max_length,
        max_usage,
        ..ConstructionParams::default()
    };
    let answerer =
        ScriptedBackend::new(Vec::<String>::new()).with_fallback(format!("Final Answer: {answer}"));
    let built = construct_trajectories(&nodes, &discovery.connections, &construction, &answerer)
        .map_err(value_error)?;
    to_py(
        py,
        &json!({
            "connections": to_json(&discovery.connections)?,
            "trajectories": to_json(&built.trajectories)?,
        }),
    )
}

#[pyfunction]
#[pyo3(signature = (layers = 32, d = 4096, ffn_mult = 4, lora_rank = 8))]
fn parameter_stats(
    py: Python<'_>,
    layers: usize,
    d: usize,
    ffn_mult: usize,
    lora_rank: usize,
) -> PyResult<Py<PyAny>> {
    let stats = modulation::parameter_stats(layers, d, ffn_mult, lora_rank).map_err(value_error)?;
    to_py(py, &to_json(&stats)?)
}

#[pyfunction]
#[pyo3(signature = (batch = 1, seq_len = 1024, text_len = 512, d = 4096))]
fn overhead_estimate(batch: usize, seq_len: usize, text_len: usize, d: usize) -> PyResult<f64> {
    modulation::overhead_estimate(batch, seq_len, text_len, d).map_err(value_error)
}

#[pymodule]
fn trajkit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(parse_transcript, m)?)?;
    m.add_function(wrap_pyfunction!(action_sequence, m)?)?;
    m.add_function(wrap_pyfunction!(final_answer, m)?)?;
    m.add_function(wrap_pyfunction!(render_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(jaccard_similarity, m)?)?;
    m.add_function(wrap_pyfunction!(tool_redundancy_rate, m)?)?;
    m.add_function(wrap_pyfunction!(tool_consistency_f1, m)?)?;
    m.add_function(wrap_pyfunction!(trajectory_success_score, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(parameter_stats, m)?)?;
    m.add_function(wrap_pyfunction!(overhead_estimate, m)?)?;
    m.add("STOP_MESSAGE", trajkit::orchestrator::STOP_MESSAGE)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
