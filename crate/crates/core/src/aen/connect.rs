use std::collections::{HashMap, HashSet};

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{AenNode, Connection};

use super::scorer::PairScorer;
use super::{invalid, AenError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConnectionParams {
    pub theta: f64,
    pub max_pairs: usize,
    pub attempts_multiplier: usize,
    pub seed: u64,
}

impl Default for ConnectionParams {
    fn default() -> Self {
        Self {
            theta: 0.5,
            max_pairs: 1000,
            attempts_multiplier: 10,
            seed: 37,
        }
    }
}

impl ConnectionParams {
    pub fn validate(&self) -> Result<(), AenError> {
        // Thresholds above 1 are accepted and admit nothing.
        if self.theta.is_nan() || self.theta < 0.0 {
            return Err(invalid(
                "theta",
                format!("{} is not a threshold in [0, 1]", self.theta),
            ));
        }
        if self.max_pairs == 0 {
            return Err(invalid("max_pairs", "must be at least 1"));
        }
        if self.attempts_multiplier == 0 {
            return Err(invalid("attempts_multiplier", "must be at least 1"));
        }
        Ok(())
    }
}

/// Compatible iff both reference the same image or either has none.
pub fn image_compatible(a: &AenNode, b: &AenNode) -> bool {
    match (&a.image, &b.image) {
        (Some(x), Some(y)) => x == y,
        _ => true,
    }
}

/// Uniform sampling of ordered pairs (i, j), i != j, without replacement.
/// A partial Fisher-Yates shuffle over the n(n-1) pair indices, stored
/// sparsely so memory stays proportional to the number of draws.
pub struct PairSampler {
    n: usize,
    total: usize,
    drawn: usize,
    swaps: HashMap<usize, usize>,
    rng: ChaCha8Rng,
}

impl PairSampler {
    pub fn new(n: usize, seed: u64) -> Self {
        Self {
            n,
            total: n * n.saturating_sub(1),
            drawn: 0,
            swaps: HashMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn remaining(&self) -> usize {
        self.total - self.drawn
    }

    fn decode(&self, k: usize) -> (usize, usize) {
        let i = k / (self.n - 1);
        let r = k % (self.n - 1);
        (i, if r >= i { r + 1 } else { r })
    }
}

impl Iterator for PairSampler {
    type Item = (usize, usize);

    fn next(&mut self) -> Option<(usize, usize)> {
        if self.drawn >= self.total {
            return None;
        }
        let t = self.drawn;
        let r = self.rng.random_range(t..self.total);
        let at_r = *self.swaps.get(&r).unwrap_or(&r);
        let at_t = *self.swaps.get(&t).unwrap_or(&t);
        self.swaps.insert(r, at_t);
        self.swaps.remove(&t);
        self.drawn += 1;
        Some(self.decode(at_r))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Discovery {
    /// Kept connections, score descending, ties by (src, dst) ascending.
    pub connections: Vec<Connection>,
    pub pairs_evaluated: usize,
    pub attempts: usize,
}

pub(crate) fn check_unique(nodes: &[AenNode]) -> Result<(), AenError> {
    let mut seen = HashSet::new();
    for n in nodes {
        if !seen.insert(n.id.as_str()) {
            return Err(AenError::DuplicateNodeId(n.id.clone()));
        }
    }
    Ok(())
}

pub(crate) fn sort_connections(connections: &mut [Connection]) {
    connections.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.src.cmp(&b.src))
            .then_with(|| a.dst.cmp(&b.dst))
    });
}

pub fn discover_connections(
    nodes: &[AenNode],
    params: &ConnectionParams,
    scorer: &dyn PairScorer,
) -> Result<Discovery, AenError> {
    params.validate()?;
    if nodes.len() < 2 {
        return Err(AenError::InsufficientNodes(nodes.len()));
    }
    check_unique(nodes)?;
    let cap = params.max_pairs.saturating_mul(params.attempts_multiplier);
    let mut sampler = PairSampler::new(nodes.len(), params.seed);
    let mut pairs = Vec::new();
    let mut attempts = 0usize;
    while pairs.len() < params.max_pairs && attempts < cap {
        let Some((i, j)) = sampler.next() else { break };
        attempts += 1;
        if image_compatible(&nodes[i], &nodes[j]) {
            pairs.push((i, j));
        }
    }
    let scored: Vec<(usize, usize, f64, String)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            scorer
                .score(&nodes[i], &nodes[j])
                .map(|(s, r)| (i, j, s, r))
        })
        .collect::<Result<_, _>>()?;
    let mut connections = Vec::new();
    for (i, j, score, reasoning) in scored {
        if !(0.0..=1.0).contains(&score) {
            return Err(AenError::ScoreOutOfRange {
                src: nodes[i].id.clone(),
                dst: nodes[j].id.clone(),
                score,
            });
        }
        if score >= params.theta {
            connections.push(Connection::new(
                &nodes[i].id,
                &nodes[j].id,
                score,
                reasoning,
            ));
        }
    }
    sort_connections(&mut connections);
    info!(
        "evaluated {} pairs in {attempts} attempts, kept {}",
        pairs.len(),
        connections.len()
    );
    Ok(Discovery {
        connections,
        pairs_evaluated: pairs.len(),
        attempts,
    })
}
