//! Shared fixtures for integration tests.
#![allow(dead_code)]

pub mod agents;
pub mod corpus;
pub mod oracle;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use trajkit::model::{write_jsonl, AenNode, Extra, MetaTrajectory, ToolCallRecord, TrajectoryStep};
use trajkit::orchestrator::{ComponentRun, RunRecord, Termination};
use trajkit::react::FINAL_ANSWER_ACTION;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

/// Runs the CLI binary inside `dir`.
pub fn trajkit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trajkit"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn write_value(path: &Path, value: &Value) {
    fs::write(path, serde_json::to_string_pretty(value).unwrap()).unwrap();
}

pub fn write_records<T: serde::Serialize + trajkit::model::Validate>(path: &Path, records: &[T]) {
    let mut buf = Vec::new();
    write_jsonl(records, &mut buf).unwrap();
    fs::write(path, buf).unwrap();
}

/// Two mock tools: `Echo` (text) and `ImageEcho` (image_path).
pub fn tool_bindings() -> Value {
    json!([
        {"name": "Echo", "description": "Repeats the text it is given.",
         "fields": [{"name": "text", "type": "string"}],
         "executor": {"type": "mock", "behavior": {"kind": "echo"}}},
        {"name": "ImageEcho", "description": "Describes an image file.",
         "fields": [{"name": "image_path", "type": "string"}],
         "executor": {"type": "mock", "behavior": {"kind": "echo"}}}
    ])
}

pub fn scripted_config(responses: &[&str], fallback: Option<&str>) -> Value {
    json!({
        "backend": {"kind": "scripted", "responses": responses, "fallback": fallback},
        "tools": tool_bindings(),
    })
}

/// Deterministic node set without images.
pub fn nodes(n: usize) -> Vec<AenNode> {
    (0..n)
        .map(|i| {
            let mut node = AenNode::new(
                format!("n{i:03}"),
                format!("question {i}"),
                if i % 2 == 0 { "Echo" } else { "ImageEcho" },
                format!("{{\"text\": \"item {i}\"}}"),
                format!("observation {i}"),
            );
            node.reasoning = Some(format!("look up item {i}"));
            node
        })
        .collect()
}

pub fn call(tool: &str, input: &str, success: bool) -> ToolCallRecord {
    ToolCallRecord::new(tool, input, success, "obs", 0)
}

fn traj(id: &str, actions: &[&str], answer: &str) -> MetaTrajectory {
    let mut steps: Vec<TrajectoryStep> = actions
        .iter()
        .enumerate()
        .map(|(i, a)| TrajectoryStep::new(i + 1, "think", *a, "{}", "obs"))
        .collect();
    steps.push(TrajectoryStep::new(
        steps.len() + 1,
        "done",
        FINAL_ANSWER_ACTION,
        answer,
        "",
    ));
    MetaTrajectory {
        sample_id: id.into(),
        image: None,
        steps,
        final_answer: answer.into(),
        extra: Extra::new(),
    }
}

fn run(id: &str, calls: Vec<ToolCallRecord>, valid: bool) -> RunRecord {
    let tools: Vec<&str> = calls.iter().map(|c| c.tool.as_str()).collect();
    let mut planner = traj(id, &["Agent"], "answer");
    if !valid {
        planner.steps.pop();
        planner.final_answer = trajkit::orchestrator::STOP_MESSAGE.into();
    }
    RunRecord {
        sample_id: id.into(),
        query: format!("query {id}"),
        image: None,
        component_runs: vec![ComponentRun {
            agent: "Agent".into(),
            trajectory: traj(&format!("{id}-Agent-1"), &tools, "sub"),
            calls,
        }],
        planner_trajectory: planner,
        final_answer: if valid {
            "answer".into()
        } else {
            trajkit::orchestrator::STOP_MESSAGE.into()
        },
        termination: if valid {
            Termination::FinalAnswer
        } else {
            Termination::IterationLimit
        },
    }
}

/// Four runs with hand-checked per-sample metrics:
///
/// | id | valid | calls (tool: input, ok)                 | TSS  | TRR | expected | P   | R   | F1  |
/// | r1 | yes   | A:"brca1 gene" ok, B:"tp53" ok          | 1.0  | 0   | {A,B}    | 1   | 1   | 1   |
/// | r2 | yes   | A:"x y" ok, A:"x y" fail                | 0.75 | 1   | {A}      | 1   | 1   | 1   |
/// | r3 | no    | none                                    | 0.5  | 0   | {C}      | 0   | 0   | 0   |
/// | r4 | yes   | A:"a b c" ok, A:"a b d" ok, C:"q" fail  | 0.8333 | 0 | {A,B}    | 0.5 | 0.5 | 0.5 |
pub fn four_runs() -> (Vec<RunRecord>, Vec<MetaTrajectory>) {
    let runs = vec![
        run(
            "r1",
            vec![call("A", "brca1 gene", true), call("B", "tp53", true)],
            true,
        ),
        run(
            "r2",
            vec![call("A", "x y", true), call("A", "x y", false)],
            true,
        ),
        run("r3", vec![], false),
        run(
            "r4",
            vec![
                call("A", "a b c", true),
                call("A", "a b d", true),
                call("C", "q", false),
            ],
            true,
        ),
    ];
    let truth = vec![
        traj("r1", &["A", "B"], "answer"),
        traj("r2", &["A"], "answer"),
        traj("r3", &["C"], "answer"),
        traj("r4", &["A", "B"], "answer"),
    ];
    (runs, truth)
}

/// Hand aggregation of `four_runs`.
pub const FOUR_RUNS_TSS: f64 = (1.0 + 0.75 + 0.5 + (0.5 + 0.5 * 2.0 / 3.0)) / 4.0;
pub const FOUR_RUNS_TRR: f64 = (0.0 + 1.0 + 0.0 + 0.0) / 4.0;
pub const FOUR_RUNS_F1: f64 = (1.0 + 1.0 + 0.0 + 0.5) / 4.0;
