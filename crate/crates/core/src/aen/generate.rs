use serde_json::Value;

use crate::backend::{CompletionBackend, CompletionRequest};
use crate::model::{ActionInput, AenNode};
use crate::orchestrator::{call_tool, fill, ExecContext, ToolRegistry, COMPONENT_BASE_TEMPLATE};
use crate::react::{extract_action, leading_thought, parse_transcript, SegmentKind};

use super::AenError;

/// Instruction used when proposing the single tool call of a node.
pub const AEN_INSTRUCTION: &str =
    "You are a biomedical research agent. Answer the query by calling exactly one tool.
You have access to the following tools:

{tools}

<Question>: {query}
<Image>: {img}

Use the following format:
Thought: what should I do?
Action: must be one of [{tool_names}]
Action Input: the input to the tool as a JSON object

(Observation will be provided after tool execution)";

/// Proposes one tool call for `query` and executes it for real. Failed
/// executions still yield a node whose observation records the failure.
pub fn generate_aen(
    id: &str,
    query: &str,
    image: Option<&str>,
    backend: &dyn CompletionBackend,
    registry: &ToolRegistry,
    ctx: &ExecContext,
) -> Result<AenNode, AenError> {
    let instruction = fill(
        AEN_INSTRUCTION,
        &[
            ("tools", &registry.descriptions()),
            ("tool_names", &registry.names().join(", ")),
            ("query", query),
            ("img", image.unwrap_or("None")),
        ],
    );
    let prompt = fill(
        COMPONENT_BASE_TEMPLATE,
        &[
            ("extra_instruction", &instruction),
            ("agent_scratchpad", ""),
        ],
    );
    let request = CompletionRequest::new(prompt)
        .with_images(image.map(str::to_string))
        .with_max_tokens(ctx.limits.max_generation, ctx.limits.max_generation);
    let reply = backend.complete(&request)?;
    let segments = parse_transcript(&reply);
    let cut = segments
        .iter()
        .position(|s| s.kind == SegmentKind::Observation)
        .unwrap_or(segments.len());
    let segments = &segments[..cut];
    let action =
        extract_action(segments).map_err(|e| AenError::MalformedProposal(e.to_string()))?;
    let record = call_tool(&action, registry, ctx);
    let thought = leading_thought(&reply, segments);

    let mut node = AenNode::new(
        id,
        query,
        action.action.clone(),
        ActionInput::new(action.raw_input.clone()),
        record.observation,
    );
    node.image = image.map(str::to_string);
    node.reasoning = Some(thought).filter(|t| !t.is_empty());
    node.extra
        .insert("tool_success".into(), Value::Bool(record.success));
    Ok(node)
}
