use std::collections::BTreeMap;
use std::sync::Arc;

use regex::Regex;
use sha2::{Digest, Sha256};

use crate::backend::{CompletionBackend, CompletionRequest};
use crate::model::AenNode;
use crate::orchestrator::fill;

use super::AenError;

/// Scores a directed pair: how well `dst` continues the work of `src`.
pub trait PairScorer: Send + Sync {
    fn score(&self, src: &AenNode, dst: &AenNode) -> Result<(f64, String), AenError>;
}

/// Deterministic pseudo-random scores from a hash of the id pair.
#[derive(Debug, Clone, Default)]
pub struct HashScorer {
    pub salt: u64,
    /// Quantize scores to multiples of 1/levels, producing ties.
    pub levels: Option<u32>,
}

impl HashScorer {
    pub fn new(salt: u64) -> Self {
        Self { salt, levels: None }
    }

    pub fn with_levels(mut self, levels: u32) -> Self {
        self.levels = Some(levels.max(1));
        self
    }

    pub fn raw(&self, src: &str, dst: &str) -> f64 {
        let mut h = Sha256::new();
        h.update(self.salt.to_le_bytes());
        h.update(src.as_bytes());
        h.update([0u8]);
        h.update(dst.as_bytes());
        let digest = h.finalize();
        let mut word = [0u8; 8];
        word.copy_from_slice(&digest[..8]);
        let unit = (u64::from_le_bytes(word) >> 11) as f64 / (1u64 << 53) as f64;
        match self.levels {
            Some(l) => (unit * f64::from(l)).floor() / f64::from(l),
            None => unit,
        }
    }
}

impl PairScorer for HashScorer {
    fn score(&self, src: &AenNode, dst: &AenNode) -> Result<(f64, String), AenError> {
        let s = self.raw(&src.id, &dst.id);
        Ok((
            s,
            format!("Continue from {} with {}.", src.action, dst.action),
        ))
    }
}

/// Fixed scores by (src id, dst id); missing pairs score 0.
#[derive(Debug, Clone, Default)]
pub struct TableScorer {
    pub table: BTreeMap<(String, String), (f64, String)>,
}

impl TableScorer {
    pub fn insert(&mut self, src: &str, dst: &str, score: f64, reasoning: &str) {
        self.table.insert(
            (src.to_string(), dst.to_string()),
            (score, reasoning.to_string()),
        );
    }
}

impl PairScorer for TableScorer {
    fn score(&self, src: &AenNode, dst: &AenNode) -> Result<(f64, String), AenError> {
        Ok(self
            .table
            .get(&(src.id.clone(), dst.id.clone()))
            .cloned()
            .unwrap_or((0.0, String::new())))
    }
}

/// Default connection prompt. Slots: {src_query} {src_action} {src_input}
/// {src_observation} {dst_query} {dst_action} {dst_input} {dst_observation}.
pub const CONNECTION_PROMPT: &str = "You are assembling multi-step tool-use trajectories.
Decide whether step B is a natural next step after step A when answering A's question.

Step A
Question: {src_query}
Action: {src_action}
Action Input: {src_input}
Observation: {src_observation}

Step B
Question: {dst_query}
Action: {dst_action}
Action Input: {dst_input}
Observation: {dst_observation}

Rate the connection from 0 (unrelated) to 1 (B directly builds on A's observation).
Reply exactly in this format:
Score: <number between 0 and 1>
Reasoning: <why B follows from A, written as the agent's thought before calling B>";

/// Extracts (score, reasoning) from a "Score: / Reasoning:" reply.
pub fn parse_connection_reply(reply: &str) -> Result<(f64, String), AenError> {
    let score_re = Regex::new(r"(?i)score\s*[:=]\s*\**\s*([0-9]*\.?[0-9]+)").expect("valid regex");
    let reason_re = Regex::new(r"(?is)reasoning\s*[:=]\s*(.*)").expect("valid regex");
    let score: f64 = score_re
        .captures(reply)
        .and_then(|c| c[1].parse().ok())
        .ok_or_else(|| AenError::UnparsableScore(reply.chars().take(200).collect()))?;
    let reasoning = reason_re
        .captures(reply)
        .map(|c| c[1].trim().to_string())
        .unwrap_or_default();
    Ok((score, reasoning))
}

pub struct LlmScorer {
    backend: Arc<dyn CompletionBackend>,
    template: String,
}

impl LlmScorer {
    pub fn new(backend: Arc<dyn CompletionBackend>) -> Self {
        Self {
            backend,
            template: CONNECTION_PROMPT.to_string(),
        }
    }

    pub fn with_template(mut self, template: impl Into<String>) -> Self {
        self.template = template.into();
        self
    }

    pub fn prompt(&self, src: &AenNode, dst: &AenNode) -> String {
        fill(
            &self.template,
            &[
                ("src_query", &src.query),
                ("src_action", &src.action),
                ("src_input", src.action_input.raw()),
                ("src_observation", &src.observation),
                ("dst_query", &dst.query),
                ("dst_action", &dst.action),
                ("dst_input", dst.action_input.raw()),
                ("dst_observation", &dst.observation),
            ],
        )
    }
}

impl PairScorer for LlmScorer {
    fn score(&self, src: &AenNode, dst: &AenNode) -> Result<(f64, String), AenError> {
        let mut request = CompletionRequest::new(self.prompt(src, dst));
        request.images = src.image.iter().chain(dst.image.iter()).cloned().collect();
        request.images.dedup();
        let reply = self.backend.complete(&request)?;
        parse_connection_reply(&reply)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_scores_in_unit_interval_and_stable() {
        let s = HashScorer::new(37);
        for i in 0..200 {
            let v = s.raw(&i.to_string(), "x");
            assert!((0.0..1.0).contains(&v));
            assert_eq!(v, s.raw(&i.to_string(), "x"));
        }
        let q = HashScorer::new(1).with_levels(4);
        let v = q.raw("a", "b");
        assert_eq!((v * 4.0).fract(), 0.0);
    }

    #[test]
    fn parse_reply() {
        let (s, r) =
            parse_connection_reply("Score: 0.85\nReasoning: B uses the gene from A.").unwrap();
        assert_eq!(s, 0.85);
        assert_eq!(r, "B uses the gene from A.");
        assert!(parse_connection_reply("no idea").is_err());
    }
}
