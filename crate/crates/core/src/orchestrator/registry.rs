use std::sync::Arc;

use crate::schema::InputSchema;
use crate::tools::ToolExecutor;

use super::OrchestratorError;

#[derive(Clone)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    pub input_schema: InputSchema,
    pub executor: Arc<dyn ToolExecutor>,
}

impl ToolSpec {
    pub fn new(
        name: impl Into<String>,
        description: impl Into<String>,
        input_schema: InputSchema,
        executor: Arc<dyn ToolExecutor>,
    ) -> Self {
        Self {
            name: name.into(),
            description: description.into(),
            input_schema,
            executor,
        }
    }
}

impl std::fmt::Debug for ToolSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ToolSpec")
            .field("name", &self.name)
            .field("description", &self.description)
            .field("input_schema", &self.input_schema)
            .finish_non_exhaustive()
    }
}

/// Tools in registration order, with unique names.
#[derive(Debug, Clone, Default)]
pub struct ToolRegistry {
    tools: Vec<ToolSpec>,
}

impl ToolRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, spec: ToolSpec) -> Result<(), OrchestratorError> {
        if self.get(&spec.name).is_some() {
            return Err(OrchestratorError::DuplicateTool(spec.name));
        }
        self.tools.push(spec);
        Ok(())
    }

    pub fn with(mut self, spec: ToolSpec) -> Result<Self, OrchestratorError> {
        self.register(spec)?;
        Ok(self)
    }

    pub fn get(&self, name: &str) -> Option<&ToolSpec> {
        self.tools.iter().find(|t| t.name == name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.tools.iter().map(|t| t.name.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.tools.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tools.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ToolSpec> {
        self.tools.iter()
    }

    /// "- name: description" per tool, for prompt injection.
    pub fn descriptions(&self) -> String {
        self.tools
            .iter()
            .map(|t| format!("- {}: {}", t.name, t.description))
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Registry restricted to `names`, in the order given.
    pub fn subset<S: AsRef<str>>(&self, names: &[S]) -> Result<Self, OrchestratorError> {
        let mut out = Self::new();
        for name in names {
            let spec = self
                .get(name.as_ref())
                .ok_or_else(|| OrchestratorError::UnknownTool(name.as_ref().to_string()))?;
            out.register(spec.clone())?;
        }
        Ok(out)
    }
}

pub fn invalid_tool_message<S: AsRef<str>>(name: &str, valid: &[S]) -> String {
    let names: Vec<&str> = valid.iter().map(AsRef::as_ref).collect();
    format!(
        "{name} is not a valid tool, try one of [{}].",
        names.join(", ")
    )
}
