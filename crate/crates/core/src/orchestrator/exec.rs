use std::path::Path;
use std::sync::mpsc;
use std::sync::Arc;
use std::time::Duration;

use log::warn;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::backend::{CompletionBackend, DEFAULT_MAX_TOKENS};
use crate::clock::Clock;
use crate::model::ToolCallRecord;
use crate::react::{coerce_action_input, CoerceError, ParsedAction};

use super::registry::{invalid_tool_message, ToolRegistry};
use super::OrchestratorError;

/// Per-run budgets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExecutionLimits {
    pub max_iterations: usize,
    pub tool_timeout_secs: f64,
    pub max_generation: u32,
}

impl Default for ExecutionLimits {
    fn default() -> Self {
        Self {
            max_iterations: 8,
            tool_timeout_secs: 300.0,
            max_generation: DEFAULT_MAX_TOKENS,
        }
    }
}

impl ExecutionLimits {
    pub fn validate(&self) -> Result<(), OrchestratorError> {
        if self.max_iterations == 0 {
            return Err(OrchestratorError::InvalidLimits(
                "max_iterations must be positive".into(),
            ));
        }
        if !(self.tool_timeout_secs.is_finite() && self.tool_timeout_secs > 0.0) {
            return Err(OrchestratorError::InvalidLimits(
                "tool_timeout_secs must be positive".into(),
            ));
        }
        if self.max_generation == 0 {
            return Err(OrchestratorError::InvalidLimits(
                "max_generation must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn tool_timeout(&self) -> Duration {
        Duration::from_secs_f64(self.tool_timeout_secs)
    }
}

/// Shared execution environment for tool calls.
#[derive(Clone)]
pub struct ExecContext {
    pub limits: ExecutionLimits,
    pub clock: Arc<dyn Clock>,
    /// Model used to coerce free-text Action Inputs into schema objects.
    pub assistant: Option<Arc<dyn CompletionBackend>>,
}

impl ExecContext {
    pub fn new(limits: ExecutionLimits, clock: Arc<dyn Clock>) -> Self {
        Self {
            limits,
            clock,
            assistant: None,
        }
    }
}

pub fn timeout_message(timeout: Duration) -> String {
    if timeout.subsec_nanos() == 0 {
        format!("Tool execution timed out after {}s", timeout.as_secs())
    } else {
        format!("Tool execution timed out after {}s", timeout.as_secs_f64())
    }
}

fn millis(d: Duration) -> u64 {
    d.as_millis().min(u128::from(u64::MAX)) as u64
}

/// Runs a registered tool under the timeout. Every outcome becomes a record.
pub fn execute_tool(
    name: &str,
    input: &Map<String, Value>,
    registry: &ToolRegistry,
    timeout: Duration,
    clock: &Arc<dyn Clock>,
) -> ToolCallRecord {
    let input_text = serde_json::to_string(input).expect("maps serialize");
    let Some(spec) = registry.get(name) else {
        return ToolCallRecord::new(
            name,
            input_text,
            false,
            invalid_tool_message(name, &registry.names()),
            0,
        );
    };
    if let Some(path) = input.get("image_path").and_then(Value::as_str) {
        if !Path::new(path).exists() {
            let obs = format!("API call failed: Image file does not exist: {path}");
            return ToolCallRecord::new(name, input_text, false, obs, 0);
        }
    }
    let start = clock.now();
    let outcome = if clock.is_virtual() {
        let result = spec.executor.execute(input, clock.as_ref());
        if clock.now().saturating_sub(start) > timeout {
            None
        } else {
            Some(result)
        }
    } else {
        let (tx, rx) = mpsc::channel();
        let executor = Arc::clone(&spec.executor);
        let thread_clock = Arc::clone(clock);
        let thread_input = input.clone();
        std::thread::spawn(move || {
            let _ = tx.send(executor.execute(&thread_input, thread_clock.as_ref()));
        });
        match rx.recv_timeout(timeout) {
            Ok(result) => Some(result),
            Err(mpsc::RecvTimeoutError::Timeout) => None,
            Err(mpsc::RecvTimeoutError::Disconnected) => Some(Err(
                crate::tools::ToolError::Failed("tool executor panicked".into()),
            )),
        }
    };
    let elapsed = clock.now().saturating_sub(start).min(timeout);
    match outcome {
        Some(Ok(obs)) => ToolCallRecord::new(name, input_text, true, obs, millis(elapsed)),
        Some(Err(err)) => {
            ToolCallRecord::new(name, input_text, false, err.to_string(), millis(elapsed))
        }
        None => {
            warn!("tool {name} timed out");
            ToolCallRecord::new(
                name,
                input_text,
                false,
                timeout_message(timeout),
                millis(timeout),
            )
        }
    }
}

/// Resolves, coerces and executes one parsed action.
pub fn call_tool(
    action: &ParsedAction,
    registry: &ToolRegistry,
    ctx: &ExecContext,
) -> ToolCallRecord {
    let Some(spec) = registry.get(&action.action) else {
        let obs = invalid_tool_message(&action.action, &registry.names());
        return ToolCallRecord::new(&action.action, &action.raw_input, false, obs, 0);
    };
    let assistant = ctx.assistant.as_deref();
    match coerce_action_input(&action.raw_input, &spec.input_schema, assistant) {
        Ok(input) => execute_tool(
            &action.action,
            &input,
            registry,
            ctx.limits.tool_timeout(),
            &ctx.clock,
        ),
        Err(err) => {
            let msg = match err {
                CoerceError::Validation(m) => m,
                other => other.to_string(),
            };
            let obs = json!({ "error": msg }).to_string();
            ToolCallRecord::new(&action.action, &action.raw_input, false, obs, 0)
        }
    }
}
