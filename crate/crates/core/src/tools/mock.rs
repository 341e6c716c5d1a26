use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{ToolError, ToolExecutor};
use crate::clock::Clock;

/// Local tools with canned behavior, configurable from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MockTool {
    /// Returns the `text` field, or the whole input as JSON when absent.
    Echo,
    /// Looks up the canonical JSON of the input.
    Keyed {
        responses: BTreeMap<String, String>,
        #[serde(default)]
        default: String,
    },
    /// Sleeps on the run clock, then returns `output`.
    Delay {
        seconds: f64,
        output: String,
    },
    Fail {
        message: String,
    },
}

impl MockTool {
    pub fn input_key(input: &Map<String, Value>) -> String {
        serde_json::to_string(input).expect("maps serialize")
    }
}

impl ToolExecutor for MockTool {
    fn execute(&self, input: &Map<String, Value>, clock: &dyn Clock) -> Result<String, ToolError> {
        match self {
            MockTool::Echo => Ok(match input.get("text") {
                Some(Value::String(s)) => s.clone(),
                _ => Self::input_key(input),
            }),
            MockTool::Keyed { responses, default } => Ok(responses
                .get(&Self::input_key(input))
                .cloned()
                .unwrap_or_else(|| default.clone())),
            MockTool::Delay { seconds, output } => {
                clock.sleep(Duration::from_secs_f64(seconds.max(0.0)));
                Ok(output.clone())
            }
            MockTool::Fail { message } => Err(ToolError::Failed(message.clone())),
        }
    }
}
