//! Core record types and the JSONL layer shared by every pipeline stage.
//!
//! Every record type implements [`Validate`]; [`read_jsonl`] rejects any
//! line whose record breaks a type invariant and [`write_jsonl`] refuses to
//! emit one. Unknown JSON fields survive a read/write cycle through the
//! `extra` maps.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;
use thiserror::Error;

/// Separator used when joining node ids into a trajectory sample id.
pub const SAMPLE_ID_SEPARATOR: &str = "_";

/// Unknown fields carried through read/write untouched.
pub type Extra = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid `{field}`: {message}")]
pub struct InvariantError {
    pub field: String,
    pub message: String,
}

impl InvariantError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// Type-level invariant check run on every record crossing the JSONL boundary.
pub trait Validate {
    fn validate(&self) -> Result<(), InvariantError>;
}

/// Tool input as emitted by a model: the raw text, plus the parsed JSON
/// object when the text happens to be one.
///
/// Serialized as the raw string so that round trips are byte-identical. On
/// read, a JSON object is also accepted and stored in compact form.
#[derive(Clone, PartialEq)]
pub struct ActionInput {
    raw: String,
    parsed: Option<Value>,
}

impl ActionInput {
    pub fn new(raw: impl Into<String>) -> Self {
        let raw = raw.into();
        let parsed = serde_json::from_str::<Value>(raw.trim())
            .ok()
            .filter(Value::is_object);
        Self { raw, parsed }
    }

    pub fn from_value(value: &Value) -> Self {
        match value {
            Value::String(s) => Self::new(s.clone()),
            other => Self::new(other.to_string()),
        }
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn parsed(&self) -> Option<&Value> {
        self.parsed.as_ref()
    }
}

impl fmt::Debug for ActionInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.raw)
    }
}

impl Default for ActionInput {
    fn default() -> Self {
        Self::new("")
    }
}

impl From<&str> for ActionInput {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

impl From<String> for ActionInput {
    fn from(s: String) -> Self {
        Self::new(s)
    }
}

impl Serialize for ActionInput {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.raw)
    }
}

impl<'de> Deserialize<'de> for ActionInput {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(deserializer)?;
        Ok(Self::from_value(&value))
    }
}

/// Atomic Execution Node: one verified (query, action, observation) tool
/// interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AenNode {
    pub id: String,
    pub query: String,
    pub action: String,
    pub action_input: ActionInput,
    pub observation: String,
    #[serde(default)]
    pub image: Option<String>,
    #[serde(default)]
    pub step: Option<i64>,
    #[serde(default)]
    pub reasoning: Option<String>,
    #[serde(flatten)]
    pub extra: Extra,
}

impl AenNode {
    pub fn new(
        id: impl Into<String>,
        query: impl Into<String>,
        action: impl Into<String>,
        action_input: impl Into<ActionInput>,
        observation: impl Into<String>,
    ) -> Self {
        Self {
            id: id.into(),
            query: query.into(),
            action: action.into(),
            action_input: action_input.into(),
            observation: observation.into(),
            image: None,
            step: None,
            reasoning: None,
            extra: Extra::new(),
        }
    }

    pub fn with_image(mut self, image: impl Into<String>) -> Self {
        self.image = Some(image.into());
        self
    }
}

impl Validate for AenNode {
    fn validate(&self) -> Result<(), InvariantError> {
        if self.id.is_empty() {
            return Err(InvariantError::new("id", "must be non-empty"));
        }
        if self.action.trim().is_empty() {
            return Err(InvariantError::new("action", "must be non-empty"));
        }
        if let Some(step) = self.step {
            if step < 0 {
                return Err(InvariantError::new("step", format!("{step} is negative")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub index: i64,
    pub thought: String,
    pub action: String,
    pub action_input: ActionInput,
    pub observation: String,
}

impl TrajectoryStep {
    pub fn new(
        index: usize,
        thought: impl Into<String>,
        action: impl Into<String>,
        action_input: impl Into<ActionInput>,
        observation: impl Into<String>,
    ) -> Self {
        Self {
            index: index as i64,
            thought: thought.into(),
            action: action.into(),
            action_input: action_input.into(),
            observation: observation.into(),
        }
    }
}

/// Ordered (thought, action, observation) steps plus a final answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaTrajectory {
    pub sample_id: String,
    #[serde(default)]
    pub image: Option<String>,
    pub steps: Vec<TrajectoryStep>,
    pub final_answer: String,
    #[serde(flatten)]
    pub extra: Extra,
}

impl MetaTrajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Query the trajectory answers, when recorded.
    pub fn query(&self) -> Option<&str> {
        self.extra.get("query").and_then(Value::as_str)
    }

    pub fn set_query(&mut self, query: impl Into<String>) {
        self.extra
            .insert("query".to_string(), Value::String(query.into()));
    }

    pub fn source_ids(&self) -> Vec<&str> {
        self.sample_id.split(SAMPLE_ID_SEPARATOR).collect()
    }
}

impl Validate for MetaTrajectory {
    fn validate(&self) -> Result<(), InvariantError> {
        if self.steps.is_empty() {
            return Err(InvariantError::new("steps", "trajectory has no steps"));
        }
        for (pos, step) in self.steps.iter().enumerate() {
            let expected = pos as i64 + 1;
            if step.index != expected {
                return Err(InvariantError::new(
                    "index",
                    format!("step {pos} has index {}, expected {expected}", step.index),
                ));
            }
        }
        Ok(())
    }
}

/// Scored directed edge between two AEN nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Connection {
    pub src: String,
    pub dst: String,
    pub score: f64,
    pub reasoning: String,
    #[serde(flatten)]
    pub extra: Extra,
}

impl Connection {
    pub fn new(
        src: impl Into<String>,
        dst: impl Into<String>,
        score: f64,
        reasoning: impl Into<String>,
    ) -> Self {
        Self {
            src: src.into(),
            dst: dst.into(),
            score,
            reasoning: reasoning.into(),
            extra: Extra::new(),
        }
    }
}

impl Validate for Connection {
    fn validate(&self) -> Result<(), InvariantError> {
        if self.src == self.dst {
            return Err(InvariantError::new("dst", "self-connection"));
        }
        if !(0.0..=1.0).contains(&self.score) {
            return Err(InvariantError::new(
                "score",
                format!("{} outside [0, 1]", self.score),
            ));
        }
        Ok(())
    }
}

/// One tool invocation with its outcome. `success` is the execution-error
/// flag: false exactly when the observation reports a failed execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCallRecord {
    pub tool: String,
    pub input: String,
    pub success: bool,
    pub observation: String,
    pub duration_ms: u64,
    #[serde(flatten)]
    pub extra: Extra,
}

impl ToolCallRecord {
    pub fn new(
        tool: impl Into<String>,
        input: impl Into<String>,
        success: bool,
        observation: impl Into<String>,
        duration_ms: u64,
    ) -> Self {
        Self {
            tool: tool.into(),
            input: input.into(),
            success,
            observation: observation.into(),
            duration_ms,
            extra: Extra::new(),
        }
    }
}

impl Validate for ToolCallRecord {
    fn validate(&self) -> Result<(), InvariantError> {
        if self.tool.is_empty() {
            return Err(InvariantError::new("tool", "must be non-empty"));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error("record {index}: {source}")]
    Invariant {
        index: usize,
        #[source]
        source: InvariantError,
    },
    #[error("record {index}: serialization failed: {source}")]
    Serialize {
        index: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: parse error: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: {source}")]
    Validation {
        line: usize,
        #[source]
        source: InvariantError,
    },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl JsonlError {
    /// Name of the offending field for invariant failures.
    pub fn field(&self) -> Option<&str> {
        match self {
            JsonlError::Invariant { source, .. } | JsonlError::Validation { source, .. } => {
                Some(&source.field)
            }
            _ => None,
        }
    }

    pub fn line(&self) -> Option<usize> {
        match self {
            JsonlError::Parse { line, .. } | JsonlError::Validation { line, .. } => Some(*line),
            _ => None,
        }
    }
}

/// Writes one JSON object per line and returns the number of records.
pub fn write_jsonl<T, W>(records: &[T], mut sink: W) -> Result<usize, JsonlError>
where
    T: Serialize + Validate,
    W: Write,
{
    for (index, record) in records.iter().enumerate() {
        record
            .validate()
            .map_err(|source| JsonlError::Invariant { index, source })?;
        let line = serde_json::to_string(record)
            .map_err(|source| JsonlError::Serialize { index, source })?;
        sink.write_all(line.as_bytes())?;
        sink.write_all(b"\n")?;
    }
    sink.flush()?;
    Ok(records.len())
}

/// Reads and validates records; blank lines are skipped, line numbers are 1-based.
pub fn read_jsonl<T, R>(source: R) -> Result<Vec<T>, JsonlError>
where
    T: DeserializeOwned + Validate,
    R: BufRead,
{
    let mut out = Vec::new();
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let number = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line).map_err(|source| JsonlError::Parse {
            line: number,
            source,
        })?;
        record.validate().map_err(|source| JsonlError::Validation {
            line: number,
            source,
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Serializes records to an in-memory JSONL string.
pub fn to_jsonl_string<T: Serialize + Validate>(records: &[T]) -> Result<String, JsonlError> {
    let mut buf = Vec::new();
    write_jsonl(records, &mut buf)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn from_jsonl_str<T: DeserializeOwned + Validate>(text: &str) -> Result<Vec<T>, JsonlError> {
    read_jsonl(text.as_bytes())
}
