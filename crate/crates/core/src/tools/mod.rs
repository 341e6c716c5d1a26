//! Tool executors: public biomedical API clients and local mocks.

mod http_get;
mod mock;
mod mygene;
mod oncotree;

pub use http_get::{
    HttpCassette, HttpExchange, HttpGet, HttpResponse, LiveHttp, RecordingHttp, ReplayHttp,
};
pub use mock::MockTool;
pub use mygene::{MyGeneTool, MYGENE_BASE_URL};
pub use oncotree::{format_tumor_type, OncoTreeTool, QueryType, ONCOTREE_BASE_URL};

use serde_json::{Map, Value};
use thiserror::Error;

use crate::clock::Clock;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ToolError {
    #[error("API call failed: {0}")]
    Api(String),
    #[error("{0}")]
    Failed(String),
}

/// A callable tool. The input has already been validated against the tool's schema.
pub trait ToolExecutor: Send + Sync {
    fn execute(&self, input: &Map<String, Value>, clock: &dyn Clock) -> Result<String, ToolError>;
}

pub(crate) fn str_field<'a>(
    input: &'a Map<String, Value>,
    key: &str,
) -> Result<&'a str, ToolError> {
    input
        .get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| ToolError::Failed(format!("missing string field '{key}'")))
}
