mod common;

use common::corpus::{check_round_trip, check_transcript, corpus, react_trajectory, transcript};
use proptest::prelude::*;
use trajkit::react::{
    action_sequence, extract_action, final_answer, generate_segment_mask, parse_transcript,
    whitespace_tokens, ExtractError, CHANNELS,
};

#[test]
fn case_study_transcripts() {
    for (file, expected, has_final) in corpus() {
        check_transcript(file, &expected, has_final).unwrap();
    }
}

#[test]
fn case_study_inputs() {
    let segs = parse_transcript(&transcript("case1_lammi.txt"));
    let actions = action_sequence(&segs);
    assert_eq!(
        actions[0].raw_input.lines().next().unwrap(),
        "\"Explain the role of HER2/neu receptor in breast cancer and how targeting it can improve patient outcomes\""
    );
    assert_eq!(
        actions[1].structured_input.as_ref().unwrap()["gene"],
        "HER2/neu"
    );
    assert_eq!(
        actions[2].structured_input.as_ref().unwrap()["ensembl"],
        "ENSG00000141526"
    );

    let segs = parse_transcript(&transcript("case4_react.txt"));
    let actions = action_sequence(&segs);
    assert_eq!(
        actions[1].structured_input.as_ref().unwrap()["query_type"],
        "tissue"
    );

    let segs = parse_transcript(&transcript("case1_react.txt"));
    assert!(action_sequence(&segs)
        .iter()
        .all(|a| a.raw_input.lines().next() == Some("HER2")));
    // A transcript that answers and acts in one reply is invalid as a single step.
    assert_eq!(extract_action(&segs), Err(ExtractError::InvalidSameStep));

    let segs = parse_transcript(&transcript("case4_mllm_tools.txt"));
    assert_eq!(
        final_answer(&segs),
        Some("Agent stopped due to iteration limit or time limit.")
    );
}

#[test]
fn case_study_masks() {
    for (file, _, _) in corpus() {
        let text = transcript(file);
        let segs = parse_transcript(&text);
        let toks = whitespace_tokens(&text);
        let mask = generate_segment_mask(&toks, text.len(), &segs, 16, 1).unwrap();
        let m = mask.entries();
        for t in 0..mask.seq_len() {
            let total: u32 = (0..CHANNELS).map(|c| u32::from(m[[0, t, c]])).sum();
            assert!(total <= 1);
            if t < 16 {
                assert_eq!(total, 0);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn render_parse_round_trip(traj in react_trajectory()) {
        check_round_trip(&traj)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn parser_is_total(text in "(?s).{0,200}", visual in 0usize..8, batch in 0usize..3) {
        let segs = parse_transcript(&text);
        let _ = action_sequence(&segs);
        let _ = extract_action(&segs);
        let toks = whitespace_tokens(&text);
        let mask = generate_segment_mask(&toks, text.len(), &segs, visual, batch).unwrap();
        let m = mask.entries();
        for b in 0..batch {
            for t in 0..mask.seq_len() {
                let total: u32 = (0..CHANNELS).map(|c| u32::from(m[[b, t, c]])).sum();
                prop_assert!(total <= 1);
                if t < visual {
                    prop_assert_eq!(total, 0);
                }
            }
        }
    }

    #[test]
    fn marker_heavy_text_is_total(parts in proptest::collection::vec(
        prop_oneof![
            Just("Thought:".to_string()), Just("Action:".to_string()), Just("Action Input:".to_string()),
            Just("Observation:".to_string()), Just("Final Answer:".to_string()), Just("\n".to_string()),
            Just("**Action**:".to_string()), Just("  - Thought :".to_string()), "[ -~]{0,6}",
        ], 0..30)) {
        let text: String = parts.concat();
        let segs = parse_transcript(&text);
        for s in &segs {
            prop_assert!(s.span.start <= s.content_span.start && s.content_span.end <= s.span.end);
            prop_assert_eq!(&text[s.content_span.clone()], s.content.as_str());
        }
        let _ = extract_action(&segs);
    }
}
