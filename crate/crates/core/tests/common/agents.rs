//! A one-tool agent setup driven by randomized scripted replies.

use std::sync::Arc;

use proptest::prelude::*;
use trajkit::backend::CompletionBackend;
use trajkit::clock::VirtualClock;
use trajkit::model::MetaTrajectory;
use trajkit::orchestrator::{
    generic_agent_instruction, AgentConfig, ComponentConfig, Orchestrator, RunInput, RunRecord,
    Termination, ToolRegistry, ToolSpec, STOP_MESSAGE,
};
use trajkit::react::{parse_transcript, SegmentKind, FINAL_ANSWER_ACTION};
use trajkit::schema::{FieldType, InputSchema};
use trajkit::tools::MockTool;

pub const REPLIES: &[&str] = &[
    "Thought: ask the agent\nAction: EchoAgent\nAction Input: say hi",
    "Thought: use the tool\nAction: Echo\nAction Input: {\"text\": \"hi\"}",
    "Thought: done\nFinal Answer: ok",
    "Thought: both\nAction: Echo\nAction Input: {\"text\": \"a\"}\nFinal Answer: b",
    "I am not sure what to do.",
    "Thought: t\nAction: Echo\nAction Input: {\"text\": \"a\"}\nObservation: fake\nFinal Answer: fake",
    "Action: Nope\nAction Input: x",
    "Thought: broken\nAction: Echo",
];

pub fn orchestrator(backend: Arc<dyn CompletionBackend>) -> Orchestrator {
    let registry = ToolRegistry::new()
        .with(ToolSpec::new(
            "Echo",
            "Repeats the text it is given.",
            InputSchema::new("Echo").field("text", FieldType::String),
            Arc::new(MockTool::Echo),
        ))
        .unwrap();
    let config = AgentConfig::new(vec![ComponentConfig {
        name: "EchoAgent".into(),
        description: "Repeats things.".into(),
        instruction: generic_agent_instruction(),
        tools: vec!["Echo".into()],
    }]);
    Orchestrator::new(backend, config, registry, Arc::new(VirtualClock::new())).unwrap()
}

pub fn input() -> RunInput {
    RunInput {
        sample_id: "s1".into(),
        query: "say hi".into(),
        image: None,
        extra: Default::default(),
    }
}

/// Scripted replies plus a fallback that never answers on its own.
pub fn script() -> impl Strategy<Value = (Vec<&'static str>, &'static str)> {
    (
        proptest::collection::vec(proptest::sample::select(REPLIES), 0..40),
        proptest::sample::select(vec![REPLIES[0], REPLIES[1], REPLIES[4], REPLIES[6]]),
    )
}

fn check_trajectory(t: &MetaTrajectory, limit: usize) -> Result<(), TestCaseError> {
    prop_assert!(t.steps.len() <= limit, "{} steps", t.steps.len());
    for (k, step) in t.steps.iter().enumerate() {
        if step.action == FINAL_ANSWER_ACTION {
            prop_assert!(k + 1 == t.steps.len());
            prop_assert!(step.observation.is_empty());
        }
        for text in [step.thought.as_str(), step.action_input.raw()] {
            let segs = parse_transcript(text);
            prop_assert!(segs
                .iter()
                .all(|s| s.kind != SegmentKind::FinalAnswer && s.kind != SegmentKind::Action));
        }
    }
    let answered = t
        .steps
        .last()
        .is_some_and(|s| s.action == FINAL_ANSWER_ACTION);
    if !answered {
        prop_assert_eq!(t.final_answer.as_str(), STOP_MESSAGE);
    }
    Ok(())
}

/// Step limit, action/answer exclusivity and the stop message, for the
/// planner and every component run.
pub fn check_record(r: &RunRecord, limit: usize) -> Result<(), TestCaseError> {
    check_trajectory(&r.planner_trajectory, limit)?;
    for c in &r.component_runs {
        check_trajectory(&c.trajectory, limit)?;
    }
    match r.termination {
        Termination::IterationLimit => prop_assert_eq!(r.final_answer.as_str(), STOP_MESSAGE),
        Termination::FinalAnswer => prop_assert_ne!(r.final_answer.as_str(), STOP_MESSAGE),
        Termination::Timeout => prop_assert!(false, "no deadline configured"),
    }
    Ok(())
}
