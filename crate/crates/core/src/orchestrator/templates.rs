use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::exec::ExecutionLimits;
use super::OrchestratorError;

pub const PLANNER_TEMPLATE: &str = "<Context Begin>:
You are a master planner. Analyze the user's query and decide whether to answer directly or delegate to a specialized agent.

Please strictly follow the ReACT format, and give dialogues in Thought/Action/Action Input loop.

Available Specialist Agents:
{agent_descriptions}

If you can answer the query directly, respond with:
Final Answer: [your direct answer]

If the query requires a specialist, strictly follow the ReACT format:
Thought: The information obtained so far regarding the user query, along with the sub-agents that need to be invoked next and the aspects that require further discussion.
Action: [agent_name]
Action Input: [detailed sub query]

Example:
User query: \"What is the role of TP53 in cancer?\"

Thought: To answer the effects of TP53, I need to call sub-agent xx to investigate yy.
Action: GeneAgent
Action Input: Explain the role and function of TP53 gene in cancer development.

Once you believe the summaries from the sub-agents are sufficient to answer the user's question, please output Final Answer and provide the summarized answer to the question. Repeatedly calling the same sub-agent and asking the same query is meaningless.

Begin!

User Query: <Question>: {query}
<Image>: {img}
Extra parameters:
{extra_params_str}
Thought: {agent_scratchpad}";

pub const COMPONENT_BASE_TEMPLATE: &str = "<Context Begin>:
Please follow strict ReACT format (Thought/Action/Action Input) to solve tasks.

Thought: what should I do?
Action: the subagent or tool to use, return only the subagent or tool name without any redundance
Action Input: the input to the subagent or tool

(Observation will be provided after tool execution)

Launch Thought/Action/Action Loop as needed, repeatedly generating the same action and action input is not suggested.

If you think you have enough information or you cannot solve the query anymore, please provide:
Final Answer: your final answer to the question

You MUST NOT output \"Final Answer\" in the same step as \"Action\" and \"Action Input\". If you do so, your output will be considered INVALID and ignored.

Specific requirements are given below:

{extra_instruction}

{agent_scratchpad}";

const COMPONENT_FORMAT: &str = "You have access to the following tools:

{tools}

<Question>: {query}
<Image>: {img}

Extra parameters:
{extra_params_str}

Use the following format to solve a given question:
Thought: what should I do?
Action: must be one of [{tool_names}]
Action Input: the input to the tool

(Observation will be provided after tool execution)";

pub fn gene_agent_instruction() -> String {
    format!(
        "You are a gene expert. Answer gene-related queries by tool calling.\n{COMPONENT_FORMAT}"
    )
}

pub fn image_agent_instruction() -> String {
    format!(
        "You are an image expert. Analyze histopathology slides by tool calling.\nYou are encouraged to give hypotheses based on the pathology image you see.\n\n{COMPONENT_FORMAT}"
    )
}

/// Instruction for agents built from tool clusters with no hand-written prompt.
pub fn generic_agent_instruction() -> String {
    format!("You are a specialist agent. Answer queries by tool calling.\n{COMPONENT_FORMAT}")
}

/// Replaces `{name}` slots in one pass; substituted text is never rescanned.
pub fn fill(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let close = after.find('}');
        let replaced = close.and_then(|c| {
            let key = &after[..c];
            slots.iter().find(|(k, _)| *k == key).map(|(_, v)| (c, *v))
        });
        match replaced {
            Some((c, value)) => {
                out.push_str(value);
                rest = &after[c + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

/// "key: value" lines; strings are written bare.
pub fn extra_params_str(params: &BTreeMap<String, Value>) -> String {
    params
        .iter()
        .map(|(k, v)| match v {
            Value::String(s) => format!("{k}: {s}"),
            other => format!("{k}: {other}"),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Fills the base template's `{extra_instruction}` slot.
    #[serde(default = "generic_agent_instruction")]
    pub instruction: String,
    pub tools: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    #[serde(default = "default_planner")]
    pub planner_template: String,
    #[serde(default = "default_component_base")]
    pub component_template: String,
    pub components: Vec<ComponentConfig>,
    #[serde(default)]
    pub limits: ExecutionLimits,
}

fn default_planner() -> String {
    PLANNER_TEMPLATE.to_string()
}

fn default_component_base() -> String {
    COMPONENT_BASE_TEMPLATE.to_string()
}

fn require(template: &str, name: &str, slots: &[&str]) -> Result<(), OrchestratorError> {
    for slot in slots {
        if !template.contains(&format!("{{{slot}}}")) {
            return Err(OrchestratorError::MissingSlot {
                template: name.to_string(),
                slot: slot.to_string(),
            });
        }
    }
    Ok(())
}

impl AgentConfig {
    pub fn new(components: Vec<ComponentConfig>) -> Self {
        Self {
            planner_template: default_planner(),
            component_template: default_component_base(),
            components,
            limits: ExecutionLimits::default(),
        }
    }

    pub fn validate(&self) -> Result<(), OrchestratorError> {
        require(
            &self.planner_template,
            "planner_template",
            &["query", "img", "extra_params_str", "agent_scratchpad"],
        )?;
        require(
            &self.component_template,
            "component_template",
            &["extra_instruction", "agent_scratchpad"],
        )?;
        if self.components.is_empty() {
            return Err(OrchestratorError::NoComponents);
        }
        for c in &self.components {
            require(&c.instruction, &c.name, &["query", "tools"])?;
            if c.tools.is_empty() {
                return Err(OrchestratorError::EmptyToolset(c.name.clone()));
            }
        }
        self.limits.validate()
    }

    pub fn component(&self, name: &str) -> Option<&ComponentConfig> {
        self.components.iter().find(|c| c.name == name)
    }

    pub fn component_names(&self) -> Vec<&str> {
        self.components.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn agent_descriptions(&self) -> String {
        self.components
            .iter()
            .map(|c| format!("- {}: {}", c.name, c.description))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fill_single_pass() {
        let out = fill("{a} and {b} {c}", &[("a", "{b}"), ("b", "B")]);
        assert_eq!(out, "{b} and B {c}");
    }

    #[test]
    fn extra_params_lines() {
        let mut p = BTreeMap::new();
        p.insert("gene".to_string(), Value::String("TP53".into()));
        p.insert("k".to_string(), Value::from(3));
        assert_eq!(extra_params_str(&p), "gene: TP53\nk: 3");
    }

    #[test]
    fn slots_are_required() {
        let comp = ComponentConfig {
            name: "GeneAgent".into(),
            description: "genes".into(),
            instruction: gene_agent_instruction(),
            tools: vec!["EchoTool".into()],
        };
        let mut cfg = AgentConfig::new(vec![comp]);
        assert!(cfg.validate().is_ok());
        cfg.planner_template = "no slots".into();
        assert!(matches!(
            cfg.validate(),
            Err(OrchestratorError::MissingSlot { .. })
        ));
    }
}
