//! Two-stage Action Input coercion: direct JSON parse first, then an
//! optional assistant model prompted to fill the schema.

use serde_json::{Map, Value};
use thiserror::Error;

use crate::backend::{BackendError, CompletionBackend, CompletionRequest};
use crate::schema::InputSchema;

pub const PARSING_TEMPLATE: &str = "Do not interpret, or infer new information from the input. You are not allowed to add extra information.
You must only fill the fields according to the schema below.

=== SCHEMA ===
{schema_json}

=== INPUT ===
{raw_input}

Now return the JSON object:";

#[derive(Debug, Error)]
pub enum CoerceError {
    #[error("{0}")]
    Validation(String),
    #[error("Action Input is not valid JSON and no parsing assistant is configured")]
    AssistantUnavailable,
    #[error("parsing assistant failed: {0}")]
    Assistant(#[from] BackendError),
}

pub fn render_parsing_prompt(raw: &str, schema: &InputSchema) -> String {
    let schema_json = serde_json::to_string_pretty(&schema.to_json_schema()).expect("schema json");
    PARSING_TEMPLATE
        .replace("{schema_json}", &schema_json)
        .replace("{raw_input}", raw)
}

/// Finds the first balanced `{...}` object in free text and parses it.
pub fn first_json_object(text: &str) -> Option<Value> {
    let trimmed = text.trim();
    if let Ok(v) = serde_json::from_str::<Value>(trimmed) {
        if v.is_object() {
            return Some(v);
        }
    }
    let bytes = trimmed.as_bytes();
    let mut start = 0;
    while let Some(off) = trimmed[start..].find('{') {
        let open = start + off;
        let mut depth = 0usize;
        let mut in_str = false;
        let mut escaped = false;
        for (i, &b) in bytes.iter().enumerate().skip(open) {
            if in_str {
                match b {
                    _ if escaped => escaped = false,
                    b'\\' => escaped = true,
                    b'"' => in_str = false,
                    _ => {}
                }
                continue;
            }
            match b {
                b'"' => in_str = true,
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        if let Ok(v) = serde_json::from_str::<Value>(&trimmed[open..=i]) {
                            return Some(v);
                        }
                        break;
                    }
                }
                _ => {}
            }
        }
        start = open + 1;
    }
    None
}

/// Coerces a raw Action Input into an object matching `schema`.
pub fn coerce_action_input(
    raw: &str,
    schema: &InputSchema,
    assistant: Option<&dyn CompletionBackend>,
) -> Result<Map<String, Value>, CoerceError> {
    let direct = serde_json::from_str::<Value>(raw.trim()).ok();
    let stage_one = direct.as_ref().map(|v| schema.validate(v));
    match (stage_one, assistant) {
        (Some(Ok(obj)), _) => Ok(obj),
        (Some(Err(msg)), None) => Err(CoerceError::Validation(msg)),
        (None, None) => Err(CoerceError::AssistantUnavailable),
        (_, Some(backend)) => {
            let request = CompletionRequest::new(render_parsing_prompt(raw, schema));
            let reply = backend.complete(&request)?;
            let value = first_json_object(&reply).ok_or_else(|| {
                CoerceError::Validation(format!(
                    "1 validation error for {}. Invalid JSON [type=json_invalid]",
                    schema.name
                ))
            })?;
            schema.validate(&value).map_err(CoerceError::Validation)
        }
    }
}
