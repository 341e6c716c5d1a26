use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::MetaTrajectory;

use super::connect::ConnectionParams;
use super::construct::{ConstructionParams, SkipRecord};
use super::AenError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterParams {
    pub min_nodes: usize,
    pub max_nodes: usize,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            min_nodes: 2,
            max_nodes: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub sample_id: String,
    pub reason: String,
}

/// Keeps trajectories within the node-count bounds that pass `semantic`.
pub fn filter_trajectories(
    trajectories: Vec<MetaTrajectory>,
    params: &FilterParams,
    semantic: Option<&dyn Fn(&MetaTrajectory) -> bool>,
) -> (Vec<MetaTrajectory>, Vec<Rejection>) {
    let mut kept = Vec::new();
    let mut rejected = Vec::new();
    for t in trajectories {
        let n = t.steps.len();
        let reason = if n < params.min_nodes || n > params.max_nodes {
            Some(format!(
                "length {n} outside [{}, {}]",
                params.min_nodes, params.max_nodes
            ))
        } else if semantic.is_some_and(|f| !f(&t)) {
            Some("semantic filter".to_string())
        } else {
            None
        };
        match reason {
            Some(reason) => rejected.push(Rejection {
                sample_id: t.sample_id.clone(),
                reason,
            }),
            None => kept.push(t),
        }
    }
    (kept, rejected)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub validation: Vec<T>,
    pub test: Vec<T>,
}

/// Largest-remainder apportionment of `n` by `ratios`; fractional ties go
/// to the earlier partition.
pub(crate) fn apportion(n: usize, ratios: [u32; 3]) -> [usize; 3] {
    let exact: Vec<u128> = ratios.iter().map(|&r| n as u128 * u128::from(r)).collect();
    let mut counts = [0usize; 3];
    let mut assigned = 0usize;
    for (c, e) in counts.iter_mut().zip(&exact) {
        *c = (e / 100) as usize;
        assigned += *c;
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| (exact[b] % 100).cmp(&(exact[a] % 100)).then(a.cmp(&b)));
    for &k in order.iter().take(n - assigned) {
        counts[k] += 1;
    }
    counts
}

/// Seeded shuffle, then contiguous train / validation / test partitions.
pub fn split_dataset<T>(
    mut items: Vec<T>,
    ratios: [u32; 3],
    seed: u64,
) -> Result<Split<T>, AenError> {
    if ratios.iter().sum::<u32>() != 100 {
        return Err(AenError::BadRatios(ratios));
    }
    let [a, b, _] = apportion(items.len(), ratios);
    items.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = items.split_off(a + b);
    let validation = items.split_off(a);
    Ok(Split {
        train: items,
        validation,
        test,
    })
}

/// Summary written next to synthesized datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionReport {
    pub nodes_in: usize,
    pub pairs_evaluated: usize,
    pub connections_kept: usize,
    pub trajectories: usize,
    pub rejections: Vec<Rejection>,
    pub skipped: Vec<SkipRecord>,
    pub connection: ConnectionParams,
    pub construction: ConstructionParams,
    pub filter: FilterParams,
    pub split: [usize; 3],
}
