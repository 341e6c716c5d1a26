use crate::model::{MetaTrajectory, TrajectoryStep};

/// Action name the agent loops give the step that produced the final answer.
pub const FINAL_ANSWER_ACTION: &str = "Final Answer";

/// Renders steps in ReACT form, one marker per line. A step whose action is
/// [`FINAL_ANSWER_ACTION`] renders as a Final Answer line.
pub fn render_steps(steps: &[TrajectoryStep]) -> String {
    let mut out = String::new();
    for step in steps {
        out.push_str("Thought: ");
        out.push_str(&step.thought);
        out.push('\n');
        if step.action == FINAL_ANSWER_ACTION {
            out.push_str("Final Answer: ");
            out.push_str(step.action_input.raw());
            out.push('\n');
            continue;
        }
        out.push_str("Action: ");
        out.push_str(&step.action);
        out.push('\n');
        out.push_str("Action Input: ");
        out.push_str(step.action_input.raw());
        out.push('\n');
        out.push_str("Observation: ");
        out.push_str(&step.observation);
        out.push('\n');
    }
    out
}

pub fn render_trajectory(traj: &MetaTrajectory) -> String {
    let mut out = String::new();
    if let Some(q) = traj.query() {
        out.push_str("Question: ");
        out.push_str(q);
        out.push('\n');
    }
    out.push_str(&render_steps(&traj.steps));
    if traj.steps.last().map(|s| s.action.as_str()) != Some(FINAL_ANSWER_ACTION) {
        out.push_str("Final Answer: ");
        out.push_str(&traj.final_answer);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Extra;
    use crate::react::{action_sequence, final_answer, parse_transcript, SegmentKind};

    #[test]
    fn render_then_parse() {
        let traj = MetaTrajectory {
            sample_id: "1_2".into(),
            image: None,
            steps: vec![
                TrajectoryStep::new(
                    1,
                    "look up",
                    "ProteinAtlasGeneInfoTool",
                    r#"{"gene": "BRCA1"}"#,
                    "Gene: BRCA1",
                ),
                TrajectoryStep::new(
                    2,
                    "then",
                    "DocumentGeneQueryTool",
                    r#"{"query": "BRCA2"}"#,
                    "1. Gene entry",
                ),
            ],
            final_answer: "Yes.".into(),
            extra: Extra::new(),
        };
        let text = render_trajectory(&traj);
        let segs = parse_transcript(&text);
        let actions = action_sequence(&segs);
        assert_eq!(actions.len(), 2);
        assert_eq!(actions[1].action, "DocumentGeneQueryTool");
        assert_eq!(actions[0].raw_input, r#"{"gene": "BRCA1"}"#);
        assert_eq!(final_answer(&segs), Some("Yes."));
        assert_eq!(
            segs.iter()
                .filter(|s| s.kind == SegmentKind::Observation)
                .count(),
            2
        );
    }

    #[test]
    fn final_answer_step_renders_once() {
        let steps = vec![TrajectoryStep::new(
            1,
            "direct",
            FINAL_ANSWER_ACTION,
            "42",
            "",
        )];
        let traj = MetaTrajectory {
            sample_id: "q".into(),
            image: None,
            steps,
            final_answer: "42".into(),
            extra: Extra::new(),
        };
        let text = render_trajectory(&traj);
        assert_eq!(text, "Thought: direct\nFinal Answer: 42\n");
    }
}
