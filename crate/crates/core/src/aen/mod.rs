//! Atomic execution node pipeline: node generation from verified tool calls,
//! sampled connection discovery, greedy trajectory construction, filtering,
//! splitting and the scalability probe.

mod connect;
mod construct;
mod dataset;
mod generate;
mod probe;
mod scorer;

pub use connect::{
    discover_connections, image_compatible, ConnectionParams, Discovery, PairSampler,
};
pub use construct::{
    construct_trajectories, final_answer_prompt, Construction, ConstructionParams, SkipRecord,
    FINAL_ANSWER_INSTRUCTION,
};
pub use dataset::{
    filter_trajectories, split_dataset, ConstructionReport, FilterParams, Rejection, Split,
};
pub use generate::{generate_aen, AEN_INSTRUCTION};
pub use probe::{scalability_probe, uniform_expected_max, ProbeRow};
pub use scorer::{
    parse_connection_reply, HashScorer, LlmScorer, PairScorer, TableScorer, CONNECTION_PROMPT,
};

use thiserror::Error;

use crate::backend::BackendError;

#[derive(Debug, Error)]
pub enum AenError {
    #[error("need at least 2 nodes, got {0}")]
    InsufficientNodes(usize),
    #[error("duplicate node id: {0}")]
    DuplicateNodeId(String),
    #[error("connection references unknown node {0}")]
    UnknownNode(String),
    #[error("invalid parameter {field}: {message}")]
    InvalidParams {
        field: &'static str,
        message: String,
    },
    #[error("scorer returned {score} for {src}->{dst}, outside [0, 1]")]
    ScoreOutOfRange {
        src: String,
        dst: String,
        score: f64,
    },
    #[error("could not parse scorer reply: {0}")]
    UnparsableScore(String),
    #[error("model proposal has no usable action: {0}")]
    MalformedProposal(String),
    #[error("ratios must sum to 100, got {0:?}")]
    BadRatios([u32; 3]),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

pub(crate) fn invalid(field: &'static str, message: impl Into<String>) -> AenError {
    AenError::InvalidParams {
        field,
        message: message.into(),
    }
}
