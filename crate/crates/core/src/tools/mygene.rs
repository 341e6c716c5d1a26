use std::sync::Arc;

use serde_json::{Map, Value};

use super::{str_field, HttpGet, ToolError, ToolExecutor};
use crate::clock::Clock;

pub const MYGENE_BASE_URL: &str = "https://mygene.info";
const DEFAULT_TOP_K: usize = 3;

/// MyGene.info full-text gene query returning ranked entries with summaries.
pub struct MyGeneTool {
    base_url: String,
    http: Arc<dyn HttpGet>,
}

fn entry_text(v: Option<&Value>) -> Option<String> {
    match v? {
        Value::String(s) => Some(s.clone()),
        Value::Null => None,
        other => Some(other.to_string()),
    }
}

impl MyGeneTool {
    pub fn new(http: Arc<dyn HttpGet>) -> Self {
        Self::with_base_url(http, MYGENE_BASE_URL)
    }

    pub fn with_base_url(http: Arc<dyn HttpGet>, base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            http,
        }
    }

    pub fn query_url(&self, query: &str, top_k: usize) -> Result<String, ToolError> {
        let mut url = reqwest::Url::parse(&format!("{}/v3/query", self.base_url))
            .map_err(|e| ToolError::Api(e.to_string()))?;
        url.query_pairs_mut()
            .append_pair("q", query)
            .append_pair("fields", "name,summary,entrezgene")
            .append_pair("size", &top_k.to_string());
        Ok(url.to_string())
    }

    pub fn query(&self, query: &str, top_k: usize) -> Result<String, ToolError> {
        let resp = self.http.get(&self.query_url(query, top_k)?)?;
        if !(200..300).contains(&resp.status) {
            return Err(ToolError::Api(format!("HTTP {}", resp.status)));
        }
        let body: Value = serde_json::from_str(&resp.body)
            .map_err(|e| ToolError::Api(format!("invalid JSON: {e}")))?;
        let hits = body
            .get("hits")
            .and_then(Value::as_array)
            .ok_or_else(|| ToolError::Api("response has no hits array".into()))?;
        if hits.is_empty() {
            return Ok("No results found.".into());
        }
        let entries: Vec<String> = hits
            .iter()
            .take(top_k)
            .enumerate()
            .map(|(i, hit)| {
                let name = entry_text(hit.get("name")).unwrap_or_else(|| "Unknown".into());
                let id = entry_text(hit.get("entrezgene"))
                    .or_else(|| entry_text(hit.get("_id")))
                    .unwrap_or_else(|| "N/A".into());
                let score = entry_text(hit.get("_score")).unwrap_or_else(|| "N/A".into());
                let summary = entry_text(hit.get("summary"))
                    .unwrap_or_else(|| "No summary available.".into());
                format!(
                    "{}. Gene entry: {name} (Entrez ID: {id}, Correlation Score: {score})\nSummary: {summary}",
                    i + 1
                )
            })
            .collect();
        Ok(entries.join("\n---\n"))
    }
}

impl ToolExecutor for MyGeneTool {
    fn execute(&self, input: &Map<String, Value>, _clock: &dyn Clock) -> Result<String, ToolError> {
        let query = str_field(input, "query")?;
        let top_k = input
            .get("top_k")
            .and_then(Value::as_u64)
            .map_or(DEFAULT_TOP_K, |k| k.max(1) as usize);
        self.query(query, top_k)
    }
}
