use std::ops::Range;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Observation injected when a model reply has no usable Action / Action Input.
pub const PARSE_RECOVERY_MESSAGE: &str =
    "Could not parse Action / Action Input. Please follow the format: Thought/Action/Action Input or Final Answer.";

/// Observation injected when a reply mixes an Action with a Final Answer.
pub const SAME_STEP_RECOVERY_MESSAGE: &str = "Invalid output: you MUST NOT output \"Final Answer\" in the same step as \"Action\" and \"Action Input\". Please follow the format: Thought/Action/Action Input or Final Answer.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SegmentKind {
    Thought,
    Action,
    ActionInput,
    Observation,
    FinalAnswer,
}

impl SegmentKind {
    pub fn marker(self) -> &'static str {
        match self {
            SegmentKind::Thought => "Thought",
            SegmentKind::Action => "Action",
            SegmentKind::ActionInput => "Action Input",
            SegmentKind::Observation => "Observation",
            SegmentKind::FinalAnswer => "Final Answer",
        }
    }

    /// Mask channel for the three modulated segment kinds.
    pub fn channel(self) -> Option<usize> {
        match self {
            SegmentKind::Thought => Some(0),
            SegmentKind::Action => Some(1),
            SegmentKind::ActionInput => Some(2),
            _ => None,
        }
    }

    fn from_marker(marker: &str) -> Self {
        match marker {
            "Thought" => SegmentKind::Thought,
            "Action" => SegmentKind::Action,
            "Action Input" => SegmentKind::ActionInput,
            "Observation" => SegmentKind::Observation,
            "Final Answer" => SegmentKind::FinalAnswer,
            other => unreachable!("marker regex matched {other:?}"),
        }
    }
}

/// One marked region of a transcript.
///
/// `span` covers the marker through the end of the segment; `content_span`
/// is the trimmed text after the marker and is what `content` holds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub span: Range<usize>,
    pub content_span: Range<usize>,
    pub content: String,
}

fn marker_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?m)^[ \t]*(?:(?:[-*+]|\d+[.)])[ \t]+)?(?:\*\*|__)?(Thought|Action Input|Action|Observation|Final Answer)(?:\*\*|__)?[ \t]*:(?:\*\*|__)?",
        )
        .expect("marker regex")
    })
}

/// Splits a ReACT transcript into marker-delimited segments, in order.
///
/// Markers are case-sensitive and must start a line, optionally preceded by
/// whitespace, a list bullet, or markdown bold. Text before the first marker
/// is ignored.
pub fn parse_transcript(text: &str) -> Vec<Segment> {
    let markers: Vec<(SegmentKind, usize, usize)> = marker_regex()
        .captures_iter(text)
        .map(|caps| {
            let whole = caps.get(0).expect("match");
            let kind = SegmentKind::from_marker(caps.get(1).expect("group").as_str());
            (kind, whole.start(), whole.end())
        })
        .collect();

    let mut segments = Vec::with_capacity(markers.len());
    for (i, &(kind, start, content_start)) in markers.iter().enumerate() {
        let end = markers.get(i + 1).map_or(text.len(), |m| m.1);
        let content_span = trimmed_range(text, content_start, end);
        segments.push(Segment {
            kind,
            span: start..end,
            content: text[content_span.clone()].to_string(),
            content_span,
        });
    }
    segments
}

fn trimmed_range(text: &str, start: usize, end: usize) -> Range<usize> {
    let slice = &text[start..end];
    let lead = slice.len() - slice.trim_start().len();
    let trimmed = slice.trim();
    let s = start + lead;
    s..s + trimmed.len()
}

/// Action name and input extracted from one model reply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedAction {
    pub action: String,
    pub raw_input: String,
    pub structured_input: Option<serde_json::Value>,
}

impl ParsedAction {
    fn new(action: &str, raw_input: &str) -> Self {
        let raw_input = raw_input.trim().to_string();
        let structured_input = serde_json::from_str::<serde_json::Value>(&raw_input)
            .ok()
            .filter(serde_json::Value::is_object);
        Self {
            action: clean_action_name(action),
            raw_input,
            structured_input,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("no Action found")]
    MissingAction,
    #[error("Action `{0}` has no Action Input")]
    MissingActionInput(String),
    #[error("Action and Final Answer in the same step")]
    InvalidSameStep,
}

impl ExtractError {
    /// Observation text the agent loop feeds back after this failure.
    pub fn recovery_observation(&self) -> &'static str {
        match self {
            ExtractError::InvalidSameStep => SAME_STEP_RECOVERY_MESSAGE,
            _ => PARSE_RECOVERY_MESSAGE,
        }
    }
}

/// Strips whitespace, markdown emphasis, code ticks, quotes and brackets
/// from an action name and keeps the first line only.
pub fn clean_action_name(raw: &str) -> String {
    let first = raw.trim().lines().next().unwrap_or("");
    first
        .trim_matches(|c: char| {
            c.is_whitespace()
                || matches!(
                    c,
                    '*' | '_' | '`' | '"' | '\'' | '[' | ']' | '(' | ')' | '<' | '>'
                )
        })
        .to_string()
}

/// Returns the first Action / Action Input pair after the last Thought.
pub fn extract_action(segments: &[Segment]) -> Result<ParsedAction, ExtractError> {
    let has_action = segments.iter().any(|s| s.kind == SegmentKind::Action);
    let has_final = segments.iter().any(|s| s.kind == SegmentKind::FinalAnswer);
    if has_action && has_final {
        return Err(ExtractError::InvalidSameStep);
    }
    let start = segments
        .iter()
        .rposition(|s| s.kind == SegmentKind::Thought)
        .map_or(0, |p| p + 1);
    let tail = &segments[start..];
    let action_pos = tail
        .iter()
        .position(|s| s.kind == SegmentKind::Action)
        .ok_or(ExtractError::MissingAction)?;
    let action = &tail[action_pos];
    let name = clean_action_name(&action.content);
    if name.is_empty() {
        return Err(ExtractError::MissingAction);
    }
    let input = tail[action_pos + 1..]
        .iter()
        .take_while(|s| s.kind != SegmentKind::Action)
        .find(|s| s.kind == SegmentKind::ActionInput)
        .ok_or_else(|| ExtractError::MissingActionInput(name.clone()))?;
    Ok(ParsedAction::new(&action.content, &input.content))
}

/// Every Action with the Action Input that follows it, across a whole
/// transcript. Actions lacking an input get an empty one.
pub fn action_sequence(segments: &[Segment]) -> Vec<ParsedAction> {
    let mut out = Vec::new();
    for (i, seg) in segments.iter().enumerate() {
        if seg.kind != SegmentKind::Action {
            continue;
        }
        let input = segments[i + 1..]
            .iter()
            .take_while(|s| s.kind != SegmentKind::Action)
            .find(|s| s.kind == SegmentKind::ActionInput)
            .map_or("", |s| s.content.as_str());
        out.push(ParsedAction::new(&seg.content, input));
    }
    out
}

/// Content of the first Final Answer segment, if any.
pub fn final_answer(segments: &[Segment]) -> Option<&str> {
    segments
        .iter()
        .find(|s| s.kind == SegmentKind::FinalAnswer)
        .map(|s| s.content.as_str())
}

/// Content of the last Thought segment, or the text before the first
/// marker when the reply starts mid-thought (agent scratchpads end with an
/// open "Thought:").
pub fn leading_thought(text: &str, segments: &[Segment]) -> String {
    if let Some(t) = segments
        .iter()
        .rev()
        .find(|s| s.kind == SegmentKind::Thought)
    {
        return t.content.clone();
    }
    let end = segments.first().map_or(text.len(), |s| s.span.start);
    text[..end].trim().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<SegmentKind> {
        parse_transcript(text).iter().map(|s| s.kind).collect()
    }

    #[test]
    fn planner_example_has_three_segments() {
        let text = "Thought: x\nAction: GeneAgent\nAction Input: Explain the role of TP53";
        let segs = parse_transcript(text);
        assert_eq!(
            segs.iter().map(|s| s.kind).collect::<Vec<_>>(),
            vec![
                SegmentKind::Thought,
                SegmentKind::Action,
                SegmentKind::ActionInput
            ]
        );
        assert_eq!(segs[1].content, "GeneAgent");
        assert_eq!(segs[2].content, "Explain the role of TP53");
    }

    #[test]
    fn empty_text_has_no_segments() {
        assert!(parse_transcript("").is_empty());
        assert!(parse_transcript("no markers at all").is_empty());
    }

    #[test]
    fn bold_and_bulleted_markers() {
        let text = "**Thought:** a\n**Action**: B\n- Action Input: c\n  **Final Answer:** d";
        assert_eq!(
            kinds(text),
            vec![
                SegmentKind::Thought,
                SegmentKind::Action,
                SegmentKind::ActionInput,
                SegmentKind::FinalAnswer
            ]
        );
        let segs = parse_transcript(text);
        assert_eq!(segs[1].content, "B");
        assert_eq!(segs[3].content, "d");
    }

    #[test]
    fn markers_are_case_sensitive_and_line_anchored() {
        assert!(parse_transcript("thought: lower").is_empty());
        assert_eq!(
            kinds("Thought: see the Action: inline"),
            vec![SegmentKind::Thought]
        );
    }

    #[test]
    fn spans_are_ordered_and_disjoint() {
        let text =
            "Thought: a\nAction: b\nAction Input: {\"x\": 1}\nObservation: ok\nFinal Answer: done";
        let segs = parse_transcript(text);
        for w in segs.windows(2) {
            assert!(w[0].span.end <= w[1].span.start);
        }
        for s in &segs {
            assert!(s.span.start <= s.content_span.start && s.content_span.end <= s.span.end);
            assert_eq!(&text[s.content_span.clone()], s.content);
        }
    }

    #[test]
    fn extract_blip_action() {
        let text = "Thought: look at the image\nAction: BLIPTool\nAction Input: {\"text\": \"q\", \"image_path\": \"a.png\"}";
        let parsed = extract_action(&parse_transcript(text)).unwrap();
        assert_eq!(parsed.action, "BLIPTool");
        assert_eq!(parsed.structured_input.unwrap()["image_path"], "a.png");
    }

    #[test]
    fn thought_only_is_missing_action() {
        let err = extract_action(&parse_transcript("Thought: hmm")).unwrap_err();
        assert_eq!(err, ExtractError::MissingAction);
        assert_eq!(err.recovery_observation(), PARSE_RECOVERY_MESSAGE);
    }

    #[test]
    fn action_without_input() {
        let err = extract_action(&parse_transcript("Thought: t\nAction: X")).unwrap_err();
        assert_eq!(err, ExtractError::MissingActionInput("X".into()));
    }

    #[test]
    fn same_step_final_answer_is_invalid() {
        let text = "Thought: t\nAction: X\nAction Input: y\nFinal Answer: z";
        assert_eq!(
            extract_action(&parse_transcript(text)).unwrap_err(),
            ExtractError::InvalidSameStep
        );
    }

    #[test]
    fn picks_pair_after_last_thought() {
        let text = "Thought: a\nAction: First\nAction Input: 1\nThought: b\nAction: Second\nAction Input: 2";
        let parsed = extract_action(&parse_transcript(text)).unwrap();
        assert_eq!(parsed.action, "Second");
        assert_eq!(parsed.raw_input, "2");
    }

    #[test]
    fn action_name_is_cleaned() {
        assert_eq!(clean_action_name("  **[GeneAgent]**  "), "GeneAgent");
        assert_eq!(clean_action_name("`OncoTreeTool`\nextra"), "OncoTreeTool");
    }

    #[test]
    fn leading_thought_without_marker() {
        let text = "I should call a tool.\nAction: X\nAction Input: y";
        let segs = parse_transcript(text);
        assert_eq!(leading_thought(text, &segs), "I should call a tool.");
    }

    #[test]
    fn multibyte_text_is_handled() {
        let text = "Thought: naïve → ünïcode\nAction: T\nAction Input: ✓";
        let segs = parse_transcript(text);
        assert_eq!(segs[0].content, "naïve → ünïcode");
        assert_eq!(segs[2].content, "✓");
    }
}
