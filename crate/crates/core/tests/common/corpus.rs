//! Case-study transcripts with hand-labeled action sequences, and a
//! generator of well-formed trajectories for render/parse round trips.

use std::fs;
use std::path::Path;

use proptest::prelude::*;
use trajkit::model::{Extra, MetaTrajectory, TrajectoryStep};
use trajkit::react::{
    action_sequence, final_answer, parse_transcript, render_trajectory, SegmentKind,
    FINAL_ANSWER_ACTION,
};

pub fn transcript(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures/transcripts")
        .join(name);
    fs::read_to_string(path).unwrap()
}

/// (file, expected actions, whether a Final Answer marker is present)
pub fn corpus() -> Vec<(&'static str, Vec<&'static str>, bool)> {
    vec![
        (
            "case1_lammi.txt",
            vec![
                "GeneAgent",
                "ProteinAtlasGeneInfoTool",
                "EnsemblToDatabaseTool",
                "DocumentGeneQueryTool",
            ],
            true,
        ),
        ("case1_mat_agent.txt", vec![], false),
        (
            "case1_react.txt",
            vec![
                "ProteinAtlasGeneInfoTool",
                "DocumentGeneQueryTool",
                "PathwayKGTool",
            ],
            true,
        ),
        (
            "case1_mllm_tools.txt",
            vec![
                "ProteinAtlasGeneInfoTool",
                "ProteinAtlasGeneInfoTool",
                "PathwayKGTool",
                "PathwayKGTool",
                "DocumentGeneQueryTool",
            ],
            false,
        ),
        (
            "case1_openai_sdk.txt",
            vec![
                "DocumentGeneQueryTool",
                "GenetoDiseaseTool",
                "ProteinAtlasGeneInfoTool",
                "GDCGeneInfoTool",
            ],
            true,
        ),
        (
            "case4_lammi.txt",
            vec![
                "ImageAgent",
                "QwenVLCaptionTool",
                "OncoTreeTool",
                "BLIPTool",
                "GeneAgent",
                "BiomedicalEntityExtractorTool",
                "DocumentGeneQueryTool",
                "ProteinAtlasGeneInfoTool",
            ],
            true,
        ),
        ("case4_mat_agent.txt", vec![], true),
        (
            "case4_react.txt",
            vec!["BLIPTool", "OncoTreeTool", "BiomedicalEntityExtractorTool"],
            true,
        ),
        ("case4_mllm_tools.txt", vec!["BLIPTool"; 4], true),
        (
            "case4_openai_sdk.txt",
            vec!["QwenVLCaptionTool", "BLIPTool"],
            true,
        ),
    ]
}

/// Checks one transcript against its labels; returns a mismatch description.
pub fn check_transcript(file: &str, expected: &[&str], has_final: bool) -> Result<(), String> {
    let segs = parse_transcript(&transcript(file));
    let actions: Vec<String> = action_sequence(&segs)
        .into_iter()
        .map(|a| a.action)
        .collect();
    if actions != expected {
        return Err(format!("{file}: actions {actions:?}"));
    }
    if final_answer(&segs).is_some() != has_final {
        return Err(format!("{file}: final answer presence"));
    }
    Ok(())
}

fn content() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9][a-zA-Z0-9 ,.?()/-]{0,30}[a-zA-Z0-9.]"
}

fn input() -> impl Strategy<Value = String> {
    prop_oneof![
        ("[a-z_]{1,8}", content()).prop_map(|(k, v)| serde_json::json!({ k: v }).to_string()),
        content(),
    ]
}

pub fn react_trajectory() -> impl Strategy<Value = MetaTrajectory> {
    (
        proptest::collection::vec(
            (content(), "[A-Z][A-Za-z]{1,10}Tool", input(), content()),
            1..9,
        ),
        content(),
        any::<bool>(),
    )
        .prop_map(|(raw, answer, explicit)| {
            let mut steps: Vec<TrajectoryStep> = raw
                .into_iter()
                .enumerate()
                .map(|(i, (t, a, inp, o))| TrajectoryStep::new(i + 1, t, a, inp, o))
                .collect();
            if explicit {
                let n = steps.len() + 1;
                steps.push(TrajectoryStep::new(
                    n,
                    "done",
                    FINAL_ANSWER_ACTION,
                    answer.clone(),
                    "",
                ));
            }
            MetaTrajectory {
                sample_id: "p".into(),
                image: None,
                steps,
                final_answer: answer,
                extra: Extra::new(),
            }
        })
}

/// Rendering then parsing keeps step count, actions, inputs and the answer.
pub fn check_round_trip(traj: &MetaTrajectory) -> Result<(), TestCaseError> {
    let text = render_trajectory(traj);
    let segs = parse_transcript(&text);
    let tool_steps: Vec<&TrajectoryStep> = traj
        .steps
        .iter()
        .filter(|s| s.action != FINAL_ANSWER_ACTION)
        .collect();
    let actions = action_sequence(&segs);
    prop_assert_eq!(actions.len(), tool_steps.len());
    for (a, s) in actions.iter().zip(&tool_steps) {
        prop_assert_eq!(&a.action, &s.action);
        prop_assert_eq!(a.raw_input.as_str(), s.action_input.raw());
    }
    let thoughts = segs
        .iter()
        .filter(|s| s.kind == SegmentKind::Thought)
        .count();
    prop_assert_eq!(thoughts, traj.steps.len());
    prop_assert_eq!(final_answer(&segs), Some(traj.final_answer.as_str()));
    Ok(())
}
