//! ReACT transcript handling: marker segmentation, Action / Action Input
//! extraction, schema coercion of inputs, and token-level segment masks.

mod coerce;
mod mask;
mod parser;
mod render;

pub use coerce::{
    coerce_action_input, first_json_object, render_parsing_prompt, CoerceError, PARSING_TEMPLATE,
};
pub use mask::{generate_segment_mask, whitespace_tokens, MaskError, SegmentMask, CHANNELS};
pub use parser::{
    action_sequence, clean_action_name, extract_action, final_answer, leading_thought,
    parse_transcript, ExtractError, ParsedAction, Segment, SegmentKind, PARSE_RECOVERY_MESSAGE,
    SAME_STEP_RECOVERY_MESSAGE,
};
pub use render::{render_steps, render_trajectory, FINAL_ANSWER_ACTION};
