use std::ops::Range;

use ndarray::{s, Array3};
use thiserror::Error;

use super::parser::Segment;

/// Number of modulated segment channels: Thought, Action, Action Input.
pub const CHANNELS: usize = 3;

/// Per-token segment membership over a batch of visual + text sequences.
///
/// `entries[b, t, i]` is 1 when token `t` of sequence `b` lies in a segment
/// of channel `i`. Visual positions `t < visual_len` are always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentMask {
    visual_len: usize,
    text_len: usize,
    entries: Array3<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MaskError {
    #[error("token {index} range {start}..{end} exceeds text length {text_len}")]
    OffsetOutOfRange {
        index: usize,
        start: usize,
        end: usize,
        text_len: usize,
    },
    #[error("token ranges must be ascending and non-overlapping (token {0})")]
    UnorderedOffsets(usize),
    #[error("mask rows disagree on shape")]
    ShapeMismatch,
}

impl SegmentMask {
    pub fn zeros(batch: usize, visual_len: usize, text_len: usize) -> Self {
        Self {
            visual_len,
            text_len,
            entries: Array3::zeros((batch, visual_len + text_len, CHANNELS)),
        }
    }

    pub fn batch(&self) -> usize {
        self.entries.shape()[0]
    }

    pub fn visual_len(&self) -> usize {
        self.visual_len
    }

    pub fn text_len(&self) -> usize {
        self.text_len
    }

    pub fn seq_len(&self) -> usize {
        self.visual_len + self.text_len
    }

    pub fn entries(&self) -> &Array3<u8> {
        &self.entries
    }

    pub fn get(&self, b: usize, t: usize, channel: usize) -> u8 {
        self.entries[[b, t, channel]]
    }

    /// Sets one text-token channel; the position is relative to the text
    /// portion. Clears the other channels so exclusivity holds.
    pub fn set_text_channel(&mut self, b: usize, text_pos: usize, channel: usize) {
        let t = self.visual_len + text_pos;
        for c in 0..CHANNELS {
            self.entries[[b, t, c]] = u8::from(c == channel);
        }
    }

    /// Stacks single-sequence masks with identical shapes into one batch.
    pub fn stack(rows: &[SegmentMask]) -> Result<Self, MaskError> {
        let Some(first) = rows.first() else {
            return Ok(Self::zeros(0, 0, 0));
        };
        let mut out = Self::zeros(0, first.visual_len, first.text_len);
        let mut entries = Array3::zeros((0, first.seq_len(), CHANNELS));
        for row in rows {
            if row.visual_len != first.visual_len || row.text_len != first.text_len {
                return Err(MaskError::ShapeMismatch);
            }
            entries = ndarray::concatenate(ndarray::Axis(0), &[entries.view(), row.entries.view()])
                .expect("shapes checked");
        }
        out.entries = entries;
        Ok(out)
    }
}

/// Byte ranges of whitespace-separated tokens.
pub fn whitespace_tokens(text: &str) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push(s..i);
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(s..text.len());
    }
    out
}

/// Builds the mask for one tokenized transcript, replicated across `batch`.
///
/// A text token takes the channel of the first Thought / Action / Action
/// Input segment whose content span it overlaps. Marker text is excluded,
/// and Observation / Final Answer segments contribute nothing.
pub fn generate_segment_mask(
    token_offsets: &[Range<usize>],
    text_len: usize,
    segments: &[Segment],
    visual_len: usize,
    batch: usize,
) -> Result<SegmentMask, MaskError> {
    let mut prev_end = 0;
    for (index, r) in token_offsets.iter().enumerate() {
        if r.end > text_len || r.start > r.end {
            return Err(MaskError::OffsetOutOfRange {
                index,
                start: r.start,
                end: r.end,
                text_len,
            });
        }
        if r.start < prev_end {
            return Err(MaskError::UnorderedOffsets(index));
        }
        prev_end = r.end;
    }

    let channel_spans: Vec<(usize, &Range<usize>)> = segments
        .iter()
        .filter_map(|s| s.kind.channel().map(|c| (c, &s.content_span)))
        .filter(|(_, r)| !r.is_empty())
        .collect();

    let mut mask = SegmentMask::zeros(batch, visual_len, token_offsets.len());
    // Both lists are sorted by start, so one forward pass suffices.
    let mut cursor = 0;
    for (pos, tok) in token_offsets.iter().enumerate() {
        if tok.is_empty() {
            continue;
        }
        while cursor < channel_spans.len() && channel_spans[cursor].1.end <= tok.start {
            cursor += 1;
        }
        if let Some((channel, span)) = channel_spans.get(cursor) {
            if span.start < tok.end {
                let t = visual_len + pos;
                mask.entries.slice_mut(s![.., t, *channel]).fill(1);
            }
        }
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::react::parse_transcript;

    #[test]
    fn no_segments_all_zero() {
        let text = "just words here";
        let toks = whitespace_tokens(text);
        let m = generate_segment_mask(&toks, text.len(), &[], 2, 1).unwrap();
        assert!(m.entries().iter().all(|&v| v == 0));
        assert_eq!(m.seq_len(), 5);
    }

    #[test]
    fn single_thought_covers_text_tokens() {
        // The marker is its own token, so pad the tokenization to exactly
        // the three content tokens.
        let text = "Thought: a b c";
        let segs = parse_transcript(text);
        let toks = vec![9..10, 11..12, 13..14];
        let m = generate_segment_mask(&toks, text.len(), &segs, 4, 1).unwrap();
        for t in 0..4 {
            for c in 0..3 {
                assert_eq!(m.get(0, t, c), 0);
            }
        }
        for t in 4..7 {
            assert_eq!(m.get(0, t, 0), 1);
            assert_eq!(m.get(0, t, 1), 0);
        }
    }

    #[test]
    fn marker_tokens_are_unmasked() {
        let text = "Thought: x\nAction: Tool\nAction Input: y";
        let segs = parse_transcript(text);
        let toks = whitespace_tokens(text);
        let m = generate_segment_mask(&toks, text.len(), &segs, 0, 1).unwrap();
        let rows: Vec<[u8; 3]> = (0..toks.len())
            .map(|t| [m.get(0, t, 0), m.get(0, t, 1), m.get(0, t, 2)])
            .collect();
        // Thought: | x | Action: | Tool | Action | Input: | y
        assert_eq!(
            rows,
            vec![
                [0, 0, 0],
                [1, 0, 0],
                [0, 0, 0],
                [0, 1, 0],
                [0, 0, 0],
                [0, 0, 0],
                [0, 0, 1]
            ]
        );
    }

    #[test]
    fn out_of_range_token() {
        let err = generate_segment_mask(&std::iter::once(0..10).collect::<Vec<_>>(), 5, &[], 0, 1)
            .unwrap_err();
        assert!(matches!(err, MaskError::OffsetOutOfRange { index: 0, .. }));
    }

    #[test]
    fn overlapping_tokens_rejected() {
        let err = generate_segment_mask(&[0..3, 2..4], 5, &[], 0, 1).unwrap_err();
        assert_eq!(err, MaskError::UnorderedOffsets(1));
    }

    #[test]
    fn batch_rows_replicate() {
        let text = "Action: T";
        let segs = parse_transcript(text);
        let toks = whitespace_tokens(text);
        let m = generate_segment_mask(&toks, text.len(), &segs, 1, 3).unwrap();
        assert_eq!(m.batch(), 3);
        for b in 0..3 {
            assert_eq!(m.get(b, 2, 1), 1);
        }
    }

    #[test]
    fn stack_checks_shapes() {
        let a = SegmentMask::zeros(1, 2, 3);
        let b = SegmentMask::zeros(1, 2, 4);
        assert_eq!(
            SegmentMask::stack(&[a.clone(), b]).unwrap_err(),
            MaskError::ShapeMismatch
        );
        assert_eq!(SegmentMask::stack(&[a.clone(), a]).unwrap().batch(), 2);
    }

    #[test]
    fn whitespace_tokens_byte_offsets() {
        assert_eq!(whitespace_tokens("  ab  c\nd "), vec![2..4, 6..7, 8..9]);
        assert_eq!(whitespace_tokens("é x"), vec![0..2, 3..4]);
    }
}
