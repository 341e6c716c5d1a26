//! Pipeline configuration: one JSON file, overridden by command-line flags.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::aen::{
    ConnectionParams, ConstructionParams, FilterParams, HashScorer, LlmScorer, PairScorer,
};
use crate::backend::{
    Cassette, CompletionBackend, OpenAiCompatBackend, OpenAiConfig, RecordingBackend,
    ReplayBackend, ScriptedBackend, DEFAULT_API_KEY_ENV,
};
use crate::clock::{Clock, SystemClock, VirtualClock};
use crate::orchestrator::{AgentConfig, ComponentConfig, ExecutionLimits, ToolRegistry, ToolSpec};
use crate::schema::{FieldSpec, FieldType, InputSchema};
use crate::tools::{
    HttpCassette, HttpGet, LiveHttp, MockTool, MyGeneTool, OncoTreeTool, ReplayHttp, ToolExecutor,
};

use super::CliError;

pub const DEFAULT_SEED: u64 = 37;
pub const DEFAULT_SPLIT: [u32; 3] = [85, 5, 10];

const BACKEND_KINDS: [&str; 3] = ["scripted", "openai", "replay"];
const SCORER_KINDS: [&str; 2] = ["hash", "llm"];
const CLOCK_KINDS: [&str; 3] = ["auto", "virtual", "system"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSettings {
    /// One of `scripted`, `openai`, `replay`.
    pub kind: String,
    /// Scripted replies, consumed in order.
    pub responses: Vec<String>,
    /// Scripted reply once `responses` runs out.
    pub fallback: Option<String>,
    /// Cassette replayed by the `replay` backend.
    pub cassette: Option<PathBuf>,
    /// Records every completion to this cassette file.
    pub record: Option<PathBuf>,
    pub base_url: String,
    pub model: String,
    pub api_key_env: String,
    pub max_in_flight: usize,
    pub timeout_secs: u64,
}

impl Default for BackendSettings {
    fn default() -> Self {
        let http = OpenAiConfig::default();
        Self {
            kind: "scripted".into(),
            responses: Vec::new(),
            fallback: None,
            cassette: None,
            record: None,
            base_url: http.base_url,
            model: http.model,
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            max_in_flight: http.max_in_flight,
            timeout_secs: http.timeout.as_secs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScorerSettings {
    /// `hash` (deterministic, offline) or `llm` (uses the backend).
    pub kind: String,
    /// Hash salt; the run seed when absent.
    pub salt: Option<u64>,
    /// Quantization levels for hash scores.
    pub levels: Option<u32>,
}

impl Default for ScorerSettings {
    fn default() -> Self {
        Self {
            kind: "hash".into(),
            salt: None,
            levels: None,
        }
    }
}

/// How a tool is executed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ExecutorSettings {
    Mock {
        behavior: MockTool,
    },
    Oncotree {
        #[serde(default)]
        base_url: Option<String>,
        /// Replay GET responses from this file instead of the network.
        #[serde(default)]
        http_cassette: Option<PathBuf>,
    },
    Mygene {
        #[serde(default)]
        base_url: Option<String>,
        #[serde(default)]
        http_cassette: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolBinding {
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Input fields; API tools fall back to their built-in schema.
    #[serde(default)]
    pub fields: Vec<FieldSpec>,
    pub executor: ExecutorSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub connection: ConnectionParams,
    pub construction: ConstructionParams,
    pub filter: FilterParams,
    pub split: [u32; 3],
    pub limits: ExecutionLimits,
    pub backend: BackendSettings,
    pub scorer: ScorerSettings,
    /// `auto` picks the virtual clock for offline backends.
    pub clock: String,
    pub tools: Vec<ToolBinding>,
    /// Component agents; each tool becomes its own agent when empty.
    pub agents: Vec<ComponentConfig>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            connection: ConnectionParams::default(),
            construction: ConstructionParams::default(),
            filter: FilterParams::default(),
            split: DEFAULT_SPLIT,
            limits: ExecutionLimits::default(),
            backend: BackendSettings::default(),
            scorer: ScorerSettings::default(),
            clock: "auto".into(),
            tools: Vec::new(),
            agents: Vec::new(),
        }
    }
}

fn config_err(field: &str, message: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {message}"))
}

fn one_of(field: &str, value: &str, allowed: &[&str]) -> Result<(), CliError> {
    if allowed.contains(&value) {
        Ok(())
    } else {
        Err(config_err(
            field,
            format!(
                "unknown value '{value}' (expected one of {})",
                allowed.join(", ")
            ),
        ))
    }
}

fn existing(field: &str, path: &Option<PathBuf>) -> Result<(), CliError> {
    match path {
        Some(p) if !p.exists() => Err(config_err(field, format!("{} does not exist", p.display()))),
        _ => Ok(()),
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let file = File::open(path)
            .map_err(|e| config_err("config", format!("{}: {e}", path.display())))?;
        serde_json::from_reader(BufReader::new(file)).map_err(|e| config_err("config", e))
    }

    /// Loads `path` if given, otherwise defaults.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self, CliError> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    /// Checks kinds, numeric ranges and referenced paths.
    pub fn validate(&self) -> Result<(), CliError> {
        one_of("backend.kind", &self.backend.kind, &BACKEND_KINDS)?;
        one_of("scorer.kind", &self.scorer.kind, &SCORER_KINDS)?;
        one_of("clock", &self.clock, &CLOCK_KINDS)?;
        if self.backend.kind == "replay" && self.backend.cassette.is_none() {
            return Err(config_err(
                "backend.cassette",
                "required by the replay backend",
            ));
        }
        existing("backend.cassette", &self.backend.cassette)?;
        if self.backend.record.is_some() && self.backend.record == self.backend.cassette {
            return Err(config_err(
                "backend.record",
                "must differ from backend.cassette",
            ));
        }
        if self.backend.max_in_flight == 0 {
            return Err(config_err("backend.max_in_flight", "must be at least 1"));
        }
        for (i, tool) in self.tools.iter().enumerate() {
            if let ExecutorSettings::Oncotree { http_cassette, .. }
            | ExecutorSettings::Mygene { http_cassette, .. } = &tool.executor
            {
                existing(&format!("tools[{i}].executor.http_cassette"), http_cassette)?;
            }
        }
        self.connection
            .validate()
            .map_err(|e| config_err("connection", e))?;
        self.construction
            .validate()
            .map_err(|e| config_err("construction", e))?;
        if self.filter.min_nodes > self.filter.max_nodes {
            return Err(config_err("filter", "min_nodes exceeds max_nodes"));
        }
        if self.split.iter().sum::<u32>() != 100 {
            return Err(config_err(
                "split",
                format!("{:?} does not sum to 100", self.split),
            ));
        }
        self.limits
            .validate()
            .map_err(|e| config_err("limits", e))?;
        Ok(())
    }

    pub fn offline(&self) -> bool {
        self.backend.kind != "openai"
    }

    pub fn clock(&self) -> Arc<dyn Clock> {
        let virtual_clock = match self.clock.as_str() {
            "virtual" => true,
            "system" => false,
            _ => self.offline(),
        };
        if virtual_clock {
            Arc::new(VirtualClock::new())
        } else {
            Arc::new(SystemClock::default())
        }
    }

    pub fn backend(&self) -> Result<Arc<dyn CompletionBackend>, CliError> {
        let inner = self.base_backend()?;
        match &self.backend.record {
            Some(path) => {
                let recorder = RecordingBackend::to_file(inner, path).map_err(|e| {
                    config_err("backend.record", format!("{}: {e}", path.display()))
                })?;
                Ok(Arc::new(recorder))
            }
            None => Ok(inner),
        }
    }

    fn base_backend(&self) -> Result<Arc<dyn CompletionBackend>, CliError> {
        let b = &self.backend;
        Ok(match b.kind.as_str() {
            "scripted" => {
                let scripted = ScriptedBackend::new(b.responses.iter().cloned());
                match &b.fallback {
                    Some(f) => Arc::new(scripted.with_fallback(f.clone())),
                    None => Arc::new(scripted),
                }
            }
            "replay" => {
                let path = b
                    .cassette
                    .as_ref()
                    .ok_or_else(|| config_err("backend.cassette", "missing"))?;
                let cassette =
                    Cassette::load(path).map_err(|e| config_err("backend.cassette", e))?;
                Arc::new(ReplayBackend::new(cassette))
            }
            "openai" => {
                let config = OpenAiConfig {
                    base_url: b.base_url.clone(),
                    model: b.model.clone(),
                    api_key_env: b.api_key_env.clone(),
                    max_in_flight: b.max_in_flight,
                    timeout: Duration::from_secs(b.timeout_secs),
                };
                Arc::new(OpenAiCompatBackend::new(config).map_err(|e| config_err("backend", e))?)
            }
            other => {
                return Err(config_err(
                    "backend.kind",
                    format!("unknown value '{other}'"),
                ))
            }
        })
    }

    pub fn scorer(&self, backend: Arc<dyn CompletionBackend>) -> Box<dyn PairScorer> {
        match self.scorer.kind.as_str() {
            "llm" => Box::new(LlmScorer::new(backend)),
            _ => {
                let scorer = HashScorer::new(self.scorer.salt.unwrap_or(self.seed));
                match self.scorer.levels {
                    Some(l) => Box::new(scorer.with_levels(l)),
                    None => Box::new(scorer),
                }
            }
        }
    }

    pub fn registry(&self) -> Result<ToolRegistry, CliError> {
        let mut registry = ToolRegistry::new();
        for (i, binding) in self.tools.iter().enumerate() {
            let field = format!("tools[{i}]");
            let (executor, default_schema): (Arc<dyn ToolExecutor>, InputSchema) =
                match &binding.executor {
                    ExecutorSettings::Mock { behavior } => {
                        (Arc::new(behavior.clone()), InputSchema::new(&binding.name))
                    }
                    ExecutorSettings::Oncotree {
                        base_url,
                        http_cassette,
                    } => {
                        let http = self.http(&field, http_cassette)?;
                        let tool = match base_url {
                            Some(url) => OncoTreeTool::with_base_url(http, url),
                            None => OncoTreeTool::new(http),
                        };
                        let schema = InputSchema::new(&binding.name)
                            .field("query", FieldType::String)
                            .optional("query_type", FieldType::String);
                        (Arc::new(tool), schema)
                    }
                    ExecutorSettings::Mygene {
                        base_url,
                        http_cassette,
                    } => {
                        let http = self.http(&field, http_cassette)?;
                        let tool = match base_url {
                            Some(url) => MyGeneTool::with_base_url(http, url),
                            None => MyGeneTool::new(http),
                        };
                        let schema = InputSchema::new(&binding.name)
                            .field("query", FieldType::String)
                            .optional("top_k", FieldType::Integer);
                        (Arc::new(tool), schema)
                    }
                };
            let schema = if binding.fields.is_empty() {
                default_schema
            } else {
                InputSchema {
                    name: binding.name.clone(),
                    fields: binding.fields.clone(),
                }
            };
            registry
                .register(ToolSpec::new(
                    &binding.name,
                    &binding.description,
                    schema,
                    executor,
                ))
                .map_err(|e| config_err(&field, e))?;
        }
        if registry.is_empty() {
            return Err(config_err("tools", "at least one tool binding is required"));
        }
        Ok(registry)
    }

    fn http(&self, field: &str, cassette: &Option<PathBuf>) -> Result<Arc<dyn HttpGet>, CliError> {
        match cassette {
            Some(path) => {
                let file = File::open(path).map_err(|e| config_err(field, e))?;
                let tape = HttpCassette::from_reader(BufReader::new(file))
                    .map_err(|e| config_err(field, e))?;
                Ok(Arc::new(ReplayHttp::new(tape)))
            }
            None => Ok(Arc::new(
                LiveHttp::new(self.limits.tool_timeout()).map_err(|e| config_err(field, e))?,
            )),
        }
    }

    /// Agent hierarchy; one component per tool unless configured.
    pub fn agent_config(&self) -> AgentConfig {
        let components = if self.agents.is_empty() {
            self.tools
                .iter()
                .map(|t| ComponentConfig {
                    name: format!("{}Agent", t.name),
                    description: if t.description.is_empty() {
                        format!("Uses the {} tool.", t.name)
                    } else {
                        t.description.clone()
                    },
                    instruction: crate::orchestrator::generic_agent_instruction(),
                    tools: vec![t.name.clone()],
                })
                .collect()
        } else {
            self.agents.clone()
        };
        let mut config = AgentConfig::new(components);
        config.limits = self.limits.clone();
        config
    }
}
