use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{str_field, HttpGet, ToolError, ToolExecutor};
use crate::clock::Clock;

pub const ONCOTREE_BASE_URL: &str = "https://oncotree.mskcc.org";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryType {
    Tumor,
    Tissue,
}

impl std::str::FromStr for QueryType {
    type Err = ToolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tumor" => Ok(Self::Tumor),
            "tissue" => Ok(Self::Tissue),
            other => Err(ToolError::Failed(format!(
                "query_type must be 'tumor' or 'tissue', got '{other}'"
            ))),
        }
    }
}

/// OncoTree tumor-type lookup by name or by tissue.
pub struct OncoTreeTool {
    base_url: String,
    http: Arc<dyn HttpGet>,
}

fn py_str(v: Option<&Value>) -> String {
    match v {
        Some(Value::String(s)) => format!("'{s}'"),
        None | Some(Value::Null) => "None".into(),
        Some(other) => other.to_string(),
    }
}

fn text(v: Option<&Value>) -> String {
    match v {
        Some(Value::String(s)) => s.clone(),
        None | Some(Value::Null) => "None".into(),
        Some(other) => other.to_string(),
    }
}

/// Renders one tumor-type record as an observation block.
pub fn format_tumor_type(t: &Value) -> String {
    let precursors: Vec<String> = t
        .get("precursors")
        .and_then(Value::as_array)
        .map(|a| a.iter().map(|p| py_str(Some(p))).collect())
        .unwrap_or_default();
    let children: Vec<String> = match t.get("children") {
        Some(Value::Object(m)) => m.keys().cloned().collect(),
        Some(Value::Array(a)) => a.iter().map(|c| text(c.get("code").or(Some(c)))).collect(),
        _ => Vec::new(),
    };
    let downstream = if children.is_empty() {
        "None".to_string()
    } else {
        children.join(", ")
    };
    format!(
        "Tumor/Disease: {} ({})\n**Main Type**: {}\n**Tissue/Organ**: {}\n**Upstream Nodes**: {{'parent': {}, 'precursors': [{}]}}\n**Downstream Nodes**: {}\n---",
        text(t.get("name")),
        text(t.get("code")),
        text(t.get("mainType")),
        text(t.get("tissue")),
        py_str(t.get("parent")),
        precursors.join(", "),
        downstream,
    )
}

impl OncoTreeTool {
    pub fn new(http: Arc<dyn HttpGet>) -> Self {
        Self::with_base_url(http, ONCOTREE_BASE_URL)
    }

    pub fn with_base_url(http: Arc<dyn HttpGet>, base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            http,
        }
    }

    pub fn search_url(&self, query: &str) -> Result<String, ToolError> {
        let mut url =
            reqwest::Url::parse(&self.base_url).map_err(|e| ToolError::Api(e.to_string()))?;
        url.path_segments_mut()
            .map_err(|_| ToolError::Api("base URL cannot hold a path".into()))?
            .extend(["api", "tumorTypes", "search", "name", query]);
        url.set_query(Some("exactMatch=false"));
        Ok(url.to_string())
    }

    pub fn all_url(&self) -> String {
        format!("{}/api/tumorTypes", self.base_url)
    }

    fn fetch(&self, url: &str) -> Result<Vec<Value>, ToolError> {
        let resp = self.http.get(url)?;
        if resp.status == 404 {
            return Ok(Vec::new());
        }
        if !(200..300).contains(&resp.status) {
            return Err(ToolError::Api(format!("HTTP {}", resp.status)));
        }
        let body: Value = serde_json::from_str(&resp.body)
            .map_err(|e| ToolError::Api(format!("invalid JSON: {e}")))?;
        match body {
            Value::Array(items) => Ok(items),
            Value::Object(_) => Ok(vec![body]),
            _ => Err(ToolError::Api("unexpected response shape".into())),
        }
    }

    pub fn lookup(&self, query: &str, query_type: QueryType) -> Result<String, ToolError> {
        let matches = match query_type {
            QueryType::Tumor => self.fetch(&self.search_url(query)?)?,
            QueryType::Tissue => {
                let needle = query.to_lowercase();
                self.fetch(&self.all_url())?
                    .into_iter()
                    .filter(|t| {
                        t.get("tissue")
                            .and_then(Value::as_str)
                            .is_some_and(|tissue| tissue.to_lowercase().contains(&needle))
                    })
                    .collect()
            }
        };
        if matches.is_empty() {
            return Ok(format!("No results found for query '{query}'"));
        }
        Ok(matches
            .iter()
            .map(format_tumor_type)
            .collect::<Vec<_>>()
            .join("\n"))
    }
}

impl ToolExecutor for OncoTreeTool {
    fn execute(&self, input: &Map<String, Value>, _clock: &dyn Clock) -> Result<String, ToolError> {
        let query = str_field(input, "query")?;
        let query_type = match input.get("query_type").and_then(Value::as_str) {
            Some(s) => s.parse()?,
            None => QueryType::Tumor,
        };
        self.lookup(query, query_type)
    }
}
