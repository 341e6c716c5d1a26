//! Hierarchical agent execution: a planner delegates sub-queries to
//! component agents, which run ReACT tool loops over their toolsets.

mod agent;
mod exec;
mod lifecycle;
mod registry;
mod templates;

pub use agent::{
    ComponentRun, Orchestrator, RunInput, RunRecord, Termination, INVALID_OUTPUT_ACTION,
    STOP_MESSAGE,
};
pub use exec::{call_tool, execute_tool, timeout_message, ExecContext, ExecutionLimits};
pub use lifecycle::{ComponentHandle, ComponentPool};
pub use registry::{invalid_tool_message, ToolRegistry, ToolSpec};
pub use templates::{
    extra_params_str, fill, gene_agent_instruction, generic_agent_instruction,
    image_agent_instruction, AgentConfig, ComponentConfig, COMPONENT_BASE_TEMPLATE,
    PLANNER_TEMPLATE,
};

use thiserror::Error;

use crate::backend::BackendError;

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("duplicate tool name: {0}")]
    DuplicateTool(String),
    #[error("unknown tool: {0}")]
    UnknownTool(String),
    #[error("agent {agent} references unregistered tool {tool}")]
    UnknownToolInConfig { agent: String, tool: String },
    #[error("no component agents configured")]
    NoComponents,
    #[error("component {0} has no tools")]
    EmptyToolset(String),
    #[error("template {template} is missing slot {{{slot}}}")]
    MissingSlot { template: String, slot: String },
    #[error("invalid limits: {0}")]
    InvalidLimits(String),
    #[error("{0} component handle(s) still live at end of run")]
    LeakDetected(usize),
}
