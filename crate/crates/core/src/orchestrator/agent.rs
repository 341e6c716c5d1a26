use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use log::{debug, info};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::backend::{CompletionBackend, CompletionRequest};
use crate::clock::Clock;
use crate::model::{
    Extra, InvariantError, MetaTrajectory, ToolCallRecord, TrajectoryStep, Validate,
};
use crate::react::{
    extract_action, final_answer, leading_thought, parse_transcript, ParsedAction, SegmentKind,
    FINAL_ANSWER_ACTION,
};

use super::exec::{call_tool, ExecContext};
use super::lifecycle::ComponentPool;
use super::registry::{invalid_tool_message, ToolRegistry};
use super::templates::{extra_params_str, fill, AgentConfig, ComponentConfig};
use super::OrchestratorError;

pub const STOP_MESSAGE: &str = "Agent stopped due to iteration limit or time limit.";
/// Action recorded for a step whose output stayed malformed after the retry.
pub const INVALID_OUTPUT_ACTION: &str = "InvalidOutput";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    FinalAnswer,
    IterationLimit,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentRun {
    pub agent: String,
    pub trajectory: MetaTrajectory,
    pub calls: Vec<ToolCallRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub sample_id: String,
    pub query: String,
    #[serde(default)]
    pub image: Option<String>,
    pub planner_trajectory: MetaTrajectory,
    pub component_runs: Vec<ComponentRun>,
    pub final_answer: String,
    pub termination: Termination,
}

impl RunRecord {
    pub fn tool_calls(&self) -> impl Iterator<Item = &ToolCallRecord> {
        self.component_runs.iter().flat_map(|r| r.calls.iter())
    }
}

impl Validate for RunRecord {
    fn validate(&self) -> Result<(), InvariantError> {
        self.planner_trajectory.validate()?;
        for run in &self.component_runs {
            run.trajectory.validate()?;
        }
        let explicit = self
            .planner_trajectory
            .steps
            .last()
            .is_some_and(|s| s.action == FINAL_ANSWER_ACTION);
        if explicit != (self.termination == Termination::FinalAnswer) {
            return Err(InvariantError::new(
                "termination",
                "FinalAnswer termination must coincide with an explicit Final Answer step",
            ));
        }
        Ok(())
    }
}

/// One query's inputs to the planner.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunInput {
    pub sample_id: String,
    pub query: String,
    #[serde(default)]
    pub image: Option<String>,
    #[serde(default)]
    pub extra: BTreeMap<String, Value>,
}

struct LoopOutcome {
    steps: Vec<TrajectoryStep>,
    final_answer: String,
    termination: Termination,
}

/// Model text up to the first Observation marker; anything after it was
/// hallucinated by the model.
fn until_observation(reply: &str) -> &str {
    parse_transcript(reply)
        .iter()
        .find(|s| s.kind == SegmentKind::Observation)
        .map_or(reply, |s| &reply[..s.span.start])
}

fn append_scratch(scratch: &mut String, log: &str, observation: &str) {
    scratch.push_str(log.trim_end());
    scratch.push_str("\nObservation: ");
    scratch.push_str(observation);
    scratch.push_str("\nThought: ");
}

struct LoopSpec<'a> {
    backend: &'a dyn CompletionBackend,
    images: Vec<String>,
    max_iterations: usize,
    max_generation: u32,
    clock: &'a dyn Clock,
    deadline: Option<Duration>,
}

fn react_loop(
    spec: &LoopSpec<'_>,
    prompt: impl Fn(&str) -> String,
    mut dispatch: impl FnMut(&ParsedAction) -> Result<String, OrchestratorError>,
) -> Result<LoopOutcome, OrchestratorError> {
    let mut steps: Vec<TrajectoryStep> = Vec::new();
    let mut scratch = String::new();
    let mut pending_invalid: Option<(String, &'static str)> = None;
    let mut termination = Termination::IterationLimit;
    for _ in 0..spec.max_iterations {
        if spec.deadline.is_some_and(|d| spec.clock.now() >= d) {
            termination = Termination::Timeout;
            break;
        }
        let request = CompletionRequest::new(prompt(&scratch))
            .with_images(spec.images.iter().cloned())
            .with_max_tokens(spec.max_generation, spec.max_generation);
        let reply = spec.backend.complete(&request)?;
        let log = until_observation(&reply);
        let segments = parse_transcript(log);
        let thought = leading_thought(log, &segments);
        let has_action = segments.iter().any(|s| s.kind == SegmentKind::Action);
        if let (Some(answer), false) = (final_answer(&segments), has_action) {
            let answer = answer.to_string();
            steps.push(TrajectoryStep::new(
                steps.len() + 1,
                thought,
                FINAL_ANSWER_ACTION,
                answer.clone(),
                "",
            ));
            return Ok(LoopOutcome {
                steps,
                final_answer: answer,
                termination: Termination::FinalAnswer,
            });
        }
        match extract_action(&segments) {
            Ok(action) => {
                pending_invalid = None;
                let observation = dispatch(&action)?;
                append_scratch(&mut scratch, log, &observation);
                steps.push(TrajectoryStep::new(
                    steps.len() + 1,
                    thought,
                    action.action.clone(),
                    action.raw_input.clone(),
                    observation,
                ));
            }
            Err(err) => {
                let recovery = err.recovery_observation();
                debug!("malformed output: {err}");
                append_scratch(&mut scratch, log, recovery);
                if pending_invalid.take().is_some() {
                    steps.push(TrajectoryStep::new(
                        steps.len() + 1,
                        thought,
                        INVALID_OUTPUT_ACTION,
                        "",
                        recovery,
                    ));
                } else {
                    pending_invalid = Some((thought, recovery));
                }
            }
        }
    }
    if let Some((thought, recovery)) = pending_invalid {
        steps.push(TrajectoryStep::new(
            steps.len() + 1,
            thought,
            INVALID_OUTPUT_ACTION,
            "",
            recovery,
        ));
    }
    Ok(LoopOutcome {
        steps,
        final_answer: STOP_MESSAGE.to_string(),
        termination,
    })
}

fn trajectory(
    sample_id: String,
    query: &str,
    image: Option<&str>,
    outcome: &LoopOutcome,
) -> MetaTrajectory {
    let mut traj = MetaTrajectory {
        sample_id,
        image: image.map(str::to_string),
        steps: outcome.steps.clone(),
        final_answer: outcome.final_answer.clone(),
        extra: Extra::new(),
    };
    traj.set_query(query);
    traj
}

/// Planner plus component agents sharing one backend.
pub struct Orchestrator {
    pub backend: Arc<dyn CompletionBackend>,
    pub config: AgentConfig,
    pub registry: ToolRegistry,
    pub ctx: ExecContext,
    /// Run-level wall-clock budget on the context clock.
    pub run_deadline: Option<Duration>,
}

impl Orchestrator {
    pub fn new(
        backend: Arc<dyn CompletionBackend>,
        config: AgentConfig,
        registry: ToolRegistry,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, OrchestratorError> {
        config.validate()?;
        for comp in &config.components {
            for tool in &comp.tools {
                if registry.get(tool).is_none() {
                    return Err(OrchestratorError::UnknownToolInConfig {
                        agent: comp.name.clone(),
                        tool: tool.clone(),
                    });
                }
            }
        }
        let ctx = ExecContext::new(config.limits.clone(), clock);
        Ok(Self {
            backend,
            config,
            registry,
            ctx,
            run_deadline: None,
        })
    }

    fn loop_spec(&self, image: Option<&str>, deadline: Option<Duration>) -> LoopSpec<'_> {
        LoopSpec {
            backend: self.backend.as_ref(),
            images: image.map(str::to_string).into_iter().collect(),
            max_iterations: self.config.limits.max_iterations,
            max_generation: self.config.limits.max_generation,
            clock: self.ctx.clock.as_ref(),
            deadline,
        }
    }

    /// Runs one component agent on a sub-query.
    pub fn run_component(
        &self,
        component: &ComponentConfig,
        sub_query: &str,
        image: Option<&str>,
        extra: &BTreeMap<String, Value>,
        sample_id: String,
    ) -> Result<ComponentRun, OrchestratorError> {
        let tools = self.registry.subset(&component.tools)?;
        if tools.is_empty() {
            return Err(OrchestratorError::EmptyToolset(component.name.clone()));
        }
        let extra_str = extra_params_str(extra);
        let tool_names = tools.names().join(", ");
        let descriptions = tools.descriptions();
        let instruction = fill(
            &component.instruction,
            &[
                ("tools", &descriptions),
                ("tool_names", &tool_names),
                ("query", sub_query),
                ("img", image.unwrap_or("None")),
                ("extra_params_str", &extra_str),
            ],
        );
        let base = &self.config.component_template;
        let mut calls = Vec::new();
        let deadline = self.deadline_from_now();
        let outcome = react_loop(
            &self.loop_spec(image, deadline),
            |scratch| {
                fill(
                    base,
                    &[
                        ("extra_instruction", &instruction),
                        ("agent_scratchpad", scratch),
                    ],
                )
            },
            |action| {
                let record = call_tool(action, &tools, &self.ctx);
                let obs = record.observation.clone();
                calls.push(record);
                Ok(obs)
            },
        )?;
        info!(
            "{} finished after {} steps",
            component.name,
            outcome.steps.len()
        );
        Ok(ComponentRun {
            agent: component.name.clone(),
            trajectory: trajectory(sample_id, sub_query, image, &outcome),
            calls,
        })
    }

    fn deadline_from_now(&self) -> Option<Duration> {
        self.run_deadline.map(|d| self.ctx.clock.now() + d)
    }

    pub fn run(&self, input: &RunInput) -> Result<RunRecord, OrchestratorError> {
        let pool = ComponentPool::new();
        let record = self.run_with_pool(input, &pool)?;
        pool.finish()?;
        Ok(record)
    }

    /// Planner loop; delegations acquire `pool` for the component's lifetime.
    pub fn run_with_pool(
        &self,
        input: &RunInput,
        pool: &ComponentPool,
    ) -> Result<RunRecord, OrchestratorError> {
        let image = input.image.as_deref();
        let extra_str = extra_params_str(&input.extra);
        let agents = self.config.agent_descriptions();
        let names = self.config.component_names();
        let template = &self.config.planner_template;
        let mut component_runs: Vec<ComponentRun> = Vec::new();
        let deadline = self.deadline_from_now();
        let outcome = react_loop(
            &self.loop_spec(image, deadline),
            |scratch| {
                fill(
                    template,
                    &[
                        ("agent_descriptions", &agents),
                        ("query", &input.query),
                        ("img", image.unwrap_or("None")),
                        ("extra_params_str", &extra_str),
                        ("agent_scratchpad", scratch),
                    ],
                )
            },
            |action| {
                let Some(component) = self.config.component(&action.action) else {
                    return Ok(invalid_tool_message(&action.action, &names));
                };
                let handle = pool.acquire(&component.name);
                let sub_id = format!(
                    "{}-{}-{}",
                    input.sample_id,
                    component.name,
                    component_runs.len() + 1
                );
                let run =
                    self.run_component(component, &action.raw_input, image, &input.extra, sub_id)?;
                drop(handle);
                let obs = run.trajectory.final_answer.clone();
                component_runs.push(run);
                Ok(obs)
            },
        )?;
        Ok(RunRecord {
            sample_id: input.sample_id.clone(),
            query: input.query.clone(),
            image: input.image.clone(),
            planner_trajectory: trajectory(input.sample_id.clone(), &input.query, image, &outcome),
            component_runs,
            final_answer: outcome.final_answer,
            termination: outcome.termination,
        })
    }
}
