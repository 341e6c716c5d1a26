use std::collections::{HashMap, HashSet};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::backend::{CompletionBackend, CompletionRequest};
use crate::model::{
    AenNode, Connection, Extra, MetaTrajectory, TrajectoryStep, SAMPLE_ID_SEPARATOR,
};
use crate::react::{final_answer, parse_transcript, render_steps};

use super::connect::check_unique;
use super::{invalid, AenError};

pub const FINAL_ANSWER_INSTRUCTION: &str = "Now provide the Final Answer to the original query.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstructionParams {
    pub max_length: usize,
    pub max_usage: usize,
    pub max_trajectories: usize,
}

impl Default for ConstructionParams {
    fn default() -> Self {
        Self {
            max_length: 8,
            max_usage: 3,
            max_trajectories: 1_000_000,
        }
    }
}

impl ConstructionParams {
    pub fn validate(&self) -> Result<(), AenError> {
        if self.max_length < 2 {
            return Err(invalid("max_length", "must be at least 2"));
        }
        if self.max_usage < 1 {
            return Err(invalid("max_usage", "must be at least 1"));
        }
        if self.max_trajectories < 1 {
            return Err(invalid("max_trajectories", "must be at least 1"));
        }
        Ok(())
    }
}

/// A trajectory abandoned because the answerer failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub sample_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Construction {
    pub trajectories: Vec<MetaTrajectory>,
    pub skipped: Vec<SkipRecord>,
}

#[derive(Clone, Copy)]
struct Edge {
    dst: usize,
    score: f64,
    conn: usize,
}

/// Prompt asking the answerer to close a trajectory.
pub fn final_answer_prompt(query: &str, steps: &[TrajectoryStep]) -> String {
    format!(
        "Question: {query}\n{}{FINAL_ANSWER_INSTRUCTION}",
        render_steps(steps)
    )
}

fn build_steps(nodes: &[AenNode], path: &[usize], reasons: &[&str]) -> Vec<TrajectoryStep> {
    path.iter()
        .enumerate()
        .map(|(pos, &idx)| {
            let node = &nodes[idx];
            let thought = if pos == 0 {
                node.reasoning
                    .clone()
                    .filter(|r| !r.is_empty())
                    .unwrap_or_else(|| node.query.clone())
            } else {
                reasons[pos - 1].to_string()
            };
            TrajectoryStep::new(
                pos + 1,
                thought,
                node.action.clone(),
                node.action_input.clone(),
                node.observation.clone(),
            )
        })
        .collect()
}

/// Greedy trajectory construction over connections in the given order.
///
/// Each admissible seed pair starts a trajectory that is extended from its
/// endpoint by the best-scoring outgoing connection to a node not yet in
/// the trajectory and below the usage limit.
pub fn construct_trajectories(
    nodes: &[AenNode],
    connections: &[Connection],
    params: &ConstructionParams,
    answerer: &dyn CompletionBackend,
) -> Result<Construction, AenError> {
    params.validate()?;
    check_unique(nodes)?;
    let index: HashMap<&str, usize> = nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.id.as_str(), i))
        .collect();
    let lookup = |id: &str| {
        index
            .get(id)
            .copied()
            .ok_or_else(|| AenError::UnknownNode(id.to_string()))
    };

    let mut resolved = Vec::with_capacity(connections.len());
    let mut adjacency: Vec<Vec<Edge>> = vec![Vec::new(); nodes.len()];
    for (k, c) in connections.iter().enumerate() {
        let (i, j) = (lookup(&c.src)?, lookup(&c.dst)?);
        resolved.push((i, j));
        adjacency[i].push(Edge {
            dst: j,
            score: c.score,
            conn: k,
        });
    }
    for list in &mut adjacency {
        list.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| nodes[a.dst].id.cmp(&nodes[b.dst].id))
        });
    }

    let m = params.max_usage;
    let mut count = vec![0usize; nodes.len()];
    let mut used: HashSet<(usize, usize)> = HashSet::new();
    let mut trajectories = Vec::new();
    let mut skipped = Vec::new();

    for (k, &(i, j)) in resolved.iter().enumerate() {
        if trajectories.len() >= params.max_trajectories {
            break;
        }
        if used.contains(&(i, j)) || count[i] >= m || count[j] >= m {
            continue;
        }
        let mut path = vec![i, j];
        let mut reasons = vec![connections[k].reasoning.as_str()];
        let mut scores = vec![connections[k].score];
        let mut current = j;
        while path.len() < params.max_length {
            let mut saturated = false;
            let best = adjacency[current].iter().copied().find(|e| {
                if count[e.dst] >= m {
                    saturated = true;
                    return false;
                }
                !path.contains(&e.dst)
            });
            if saturated {
                adjacency[current].retain(|e| count[e.dst] < m);
            }
            match best {
                Some(e) if e.score > 0.0 => {
                    path.push(e.dst);
                    reasons.push(connections[e.conn].reasoning.as_str());
                    scores.push(e.score);
                    current = e.dst;
                }
                _ => break,
            }
        }

        let steps = build_steps(nodes, &path, &reasons);
        let sample_id = path
            .iter()
            .map(|&p| nodes[p].id.as_str())
            .collect::<Vec<_>>()
            .join(SAMPLE_ID_SEPARATOR);
        let query = nodes[i].query.clone();
        let image = path.iter().find_map(|&p| nodes[p].image.clone());
        let request =
            CompletionRequest::new(final_answer_prompt(&query, &steps)).with_images(image.clone());
        let reply = match answerer.complete(&request) {
            Ok(r) => r,
            Err(err) => {
                warn!("answerer failed for {sample_id}: {err}");
                skipped.push(SkipRecord {
                    sample_id,
                    error: err.to_string(),
                });
                continue;
            }
        };
        let segments = parse_transcript(&reply);
        let answer =
            final_answer(&segments).map_or_else(|| reply.trim().to_string(), str::to_string);

        let mut extra = Extra::new();
        extra.insert("query".into(), Value::String(query));
        extra.insert("edge_scores".into(), Value::from(scores));
        trajectories.push(MetaTrajectory {
            sample_id,
            image,
            steps,
            final_answer: answer,
            extra,
        });
        used.insert((i, j));
        for &p in &path {
            count[p] += 1;
        }
    }
    info!(
        "constructed {} trajectories, skipped {}",
        trajectories.len(),
        skipped.len()
    );
    Ok(Construction {
        trajectories,
        skipped,
    })
}
