use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backend::ScriptedBackend;
use crate::model::{AenNode, Connection};

use super::connect::sort_connections;
use super::construct::{construct_trajectories, ConstructionParams};
use super::AenError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub n: usize,
    /// Ordered pairs evaluated per trial, n(n-1).
    pub pairs: usize,
    pub trials: usize,
    pub mean_max: f64,
    pub std_err: f64,
    pub mean_length: f64,
    pub max_length: usize,
    /// Trajectory count per node length, pooled over trials.
    pub length_counts: BTreeMap<usize, usize>,
}

/// Expected maximum of `m` i.i.d. uniform(0, 1) draws.
pub fn uniform_expected_max(m: usize) -> f64 {
    m as f64 / (m as f64 + 1.0)
}

/// Monte Carlo estimate of the best admitted connection score and of the
/// trajectory lengths reachable from `n` nodes, with every ordered pair
/// scored by `sampler` and admitted (threshold 0).
pub fn scalability_probe(
    n_values: &[usize],
    sampler: &dyn Fn(&mut ChaCha8Rng) -> f64,
    trials: usize,
    params: &ConstructionParams,
    seed: u64,
) -> Result<Vec<ProbeRow>, AenError> {
    let answerer = ScriptedBackend::new(Vec::<String>::new()).with_fallback("");
    let mut rows = Vec::with_capacity(n_values.len());
    for &n in n_values {
        if n < 2 {
            return Err(AenError::InsufficientNodes(n));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (n as u64).rotate_left(32));
        let nodes: Vec<AenNode> = (0..n)
            .map(|i| AenNode::new(format!("{i:05}"), "probe", "ProbeTool", "{}", ""))
            .collect();
        let mut maxima = Vec::with_capacity(trials);
        let mut length_counts = BTreeMap::new();
        let mut total_len = 0usize;
        let mut total_traj = 0usize;
        for _ in 0..trials {
            let mut connections = Vec::with_capacity(n * (n - 1));
            let mut best = f64::NEG_INFINITY;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        let s = sampler(&mut rng);
                        best = best.max(s);
                        connections.push(Connection::new(&nodes[i].id, &nodes[j].id, s, ""));
                    }
                }
            }
            maxima.push(best);
            sort_connections(&mut connections);
            let built = construct_trajectories(&nodes, &connections, params, &answerer)?;
            for t in &built.trajectories {
                *length_counts.entry(t.steps.len()).or_insert(0) += 1;
                total_len += t.steps.len();
                total_traj += 1;
            }
        }
        let k = maxima.len().max(1) as f64;
        let mean = maxima.iter().sum::<f64>() / k;
        let var = if maxima.len() > 1 {
            maxima.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (k - 1.0)
        } else {
            0.0
        };
        rows.push(ProbeRow {
            n,
            pairs: n * (n - 1),
            trials,
            mean_max: mean,
            std_err: (var / k).sqrt(),
            mean_length: if total_traj == 0 {
                0.0
            } else {
                total_len as f64 / total_traj as f64
            },
            max_length: length_counts.keys().next_back().copied().unwrap_or(0),
            length_counts,
        });
    }
    Ok(rows)
}
