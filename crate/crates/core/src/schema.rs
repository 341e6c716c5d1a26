//! Flat tool input schemas: named fields with primitive types.

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldType {
    String,
    Integer,
    Number,
    Boolean,
}

impl FieldType {
    fn accepts(self, value: &Value) -> bool {
        match self {
            FieldType::String => value.is_string(),
            FieldType::Integer => value.is_i64() || value.is_u64(),
            FieldType::Number => value.is_number(),
            FieldType::Boolean => value.is_boolean(),
        }
    }

    fn error_tag(self) -> &'static str {
        match self {
            FieldType::String => "Input should be a valid string [type=string_type]",
            FieldType::Integer => "Input should be a valid integer [type=int_type]",
            FieldType::Number => "Input should be a valid number [type=float_type]",
            FieldType::Boolean => "Input should be a valid boolean [type=bool_type]",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: FieldType,
    #[serde(default = "default_true")]
    pub required: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputSchema {
    pub name: String,
    pub fields: Vec<FieldSpec>,
}

impl InputSchema {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            fields: Vec::new(),
        }
    }

    pub fn field(mut self, name: impl Into<String>, ty: FieldType) -> Self {
        self.fields.push(FieldSpec {
            name: name.into(),
            ty,
            required: true,
        });
        self
    }

    pub fn optional(mut self, name: impl Into<String>, ty: FieldType) -> Self {
        self.fields.push(FieldSpec {
            name: name.into(),
            ty,
            required: false,
        });
        self
    }

    pub fn has_field(&self, name: &str) -> bool {
        self.fields.iter().any(|f| f.name == name)
    }

    /// JSON-schema rendering used in parsing prompts.
    pub fn to_json_schema(&self) -> Value {
        let mut props = Map::new();
        for f in &self.fields {
            let ty = match f.ty {
                FieldType::String => "string",
                FieldType::Integer => "integer",
                FieldType::Number => "number",
                FieldType::Boolean => "boolean",
            };
            props.insert(f.name.clone(), json!({ "title": f.name, "type": ty }));
        }
        let required: Vec<&str> = self
            .fields
            .iter()
            .filter(|f| f.required)
            .map(|f| f.name.as_str())
            .collect();
        json!({
            "title": self.name,
            "type": "object",
            "properties": props,
            "required": required,
        })
    }

    /// Checks an object against the schema. Unknown keys are dropped.
    ///
    /// The error text follows the pydantic style agents see in their
    /// observations, e.g. `1 validation error for GeneSchema. Field required
    /// [type=missing] (gene)`.
    pub fn validate(&self, value: &Value) -> Result<Map<String, Value>, String> {
        let Some(obj) = value.as_object() else {
            return Err(format!(
                "1 validation error for {}. Input should be a valid dictionary [type=dict_type]",
                self.name
            ));
        };
        let mut errors = Vec::new();
        let mut out = Map::new();
        for f in &self.fields {
            match obj.get(&f.name) {
                None | Some(Value::Null) if f.required => {
                    errors.push(format!("Field required [type=missing] ({})", f.name));
                }
                None | Some(Value::Null) => {}
                Some(v) if f.ty.accepts(v) => {
                    out.insert(f.name.clone(), v.clone());
                }
                Some(_) => errors.push(format!("{} ({})", f.ty.error_tag(), f.name)),
            }
        }
        if errors.is_empty() {
            Ok(out)
        } else {
            let plural = if errors.len() == 1 { "" } else { "s" };
            Err(format!(
                "{} validation error{plural} for {}. {}",
                errors.len(),
                self.name,
                errors.join("; ")
            ))
        }
    }
}
