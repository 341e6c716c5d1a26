//! Groups tools into component agents by how often they are called back to
//! back in synthesized trajectories.
//!
//! Clustering is average-linkage agglomeration over degree-normalized
//! co-occurrence, stopping once the best linkage falls below a threshold,
//! so the number of agents adapts to the data.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::MetaTrajectory;
use crate::react::FINAL_ANSWER_ACTION;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClusterError {
    #[error("co-occurrence matrix has no tools")]
    EmptyMatrix,
    #[error("matrix is {rows}x{cols} for {tools} tools")]
    Malformed {
        tools: usize,
        rows: usize,
        cols: usize,
    },
    #[error("counts are not symmetric at ({0}, {1})")]
    Asymmetric(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CooccurrenceMatrix {
    pub tools: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl CooccurrenceMatrix {
    pub fn validate(&self) -> Result<(), ClusterError> {
        let n = self.tools.len();
        if self.counts.len() != n || self.counts.iter().any(|r| r.len() != n) {
            return Err(ClusterError::Malformed {
                tools: n,
                rows: self.counts.len(),
                cols: self.counts.first().map_or(0, Vec::len),
            });
        }
        for a in 0..n {
            for b in 0..a {
                if self.counts[a][b] != self.counts[b][a] {
                    return Err(ClusterError::Asymmetric(a, b));
                }
            }
        }
        Ok(())
    }

    pub fn index(&self, tool: &str) -> Option<usize> {
        self.tools.iter().position(|t| t == tool)
    }

    pub fn count(&self, a: &str, b: &str) -> u64 {
        match (self.index(a), self.index(b)) {
            (Some(i), Some(j)) => self.counts[i][j],
            _ => 0,
        }
    }
}

/// Counts adjacent tool pairs over every trajectory. Tools are listed in
/// name order; final-answer steps are not tool calls and are ignored.
pub fn count_cooccurrence(trajectories: &[MetaTrajectory]) -> CooccurrenceMatrix {
    let mut pairs: BTreeMap<(String, String), u64> = BTreeMap::new();
    let mut names: BTreeMap<String, ()> = BTreeMap::new();
    for t in trajectories {
        let actions: Vec<&str> = t
            .steps
            .iter()
            .map(|s| s.action.as_str())
            .filter(|a| *a != FINAL_ANSWER_ACTION)
            .collect();
        for a in &actions {
            names.insert((*a).to_string(), ());
        }
        for w in actions.windows(2) {
            let (a, b) = if w[0] <= w[1] {
                (w[0], w[1])
            } else {
                (w[1], w[0])
            };
            *pairs.entry((a.to_string(), b.to_string())).or_insert(0) += 1;
        }
    }
    let tools: Vec<String> = names.into_keys().collect();
    let n = tools.len();
    let mut counts = vec![vec![0u64; n]; n];
    let idx = |name: &str| {
        tools
            .binary_search_by(|t| t.as_str().cmp(name))
            .expect("collected")
    };
    for ((a, b), c) in pairs {
        let (i, j) = (idx(&a), idx(&b));
        counts[i][j] += c;
        if i != j {
            counts[j][i] += c;
        }
    }
    CooccurrenceMatrix { tools, counts }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolCluster {
    pub agent_name: String,
    pub tools: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub clusters: Vec<ToolCluster>,
}

/// Degree-normalized co-occurrence: counts / sqrt(deg(a) deg(b)).
pub fn normalized(matrix: &CooccurrenceMatrix) -> Vec<Vec<f64>> {
    let deg: Vec<f64> = matrix
        .counts
        .iter()
        .map(|r| r.iter().sum::<u64>() as f64)
        .collect();
    matrix
        .counts
        .iter()
        .enumerate()
        .map(|(a, row)| {
            row.iter()
                .enumerate()
                .map(|(b, &c)| {
                    let d = (deg[a] * deg[b]).sqrt();
                    if d == 0.0 {
                        0.0
                    } else {
                        c as f64 / d
                    }
                })
                .collect()
        })
        .collect()
}

fn linkage(norm: &[Vec<f64>], a: &[usize], b: &[usize]) -> f64 {
    let mut total = 0.0;
    for &x in a {
        for &y in b {
            total += norm[x][y];
        }
    }
    total / (a.len() * b.len()) as f64
}

/// Average-linkage agglomeration, merging while the best linkage is at
/// least `min_link`. Ties go to the lexicographically smallest pair of
/// clusters, so the partition does not depend on tool order.
pub fn cluster_tools(
    matrix: &CooccurrenceMatrix,
    min_link: f64,
) -> Result<ClusterConfig, ClusterError> {
    matrix.validate()?;
    if matrix.tools.is_empty() {
        return Err(ClusterError::EmptyMatrix);
    }
    let norm = normalized(matrix);
    let name = |i: usize| matrix.tools[i].as_str();
    let mut clusters: Vec<Vec<usize>> = (0..matrix.tools.len()).map(|i| vec![i]).collect();
    clusters.sort_by(|a, b| name(a[0]).cmp(name(b[0])));
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                let l = linkage(&norm, &clusters[i], &clusters[j]);
                if best.is_none_or(|(bl, _, _)| l > bl) {
                    best = Some((l, i, j));
                }
            }
        }
        match best {
            Some((l, i, j)) if l >= min_link => {
                let merged = clusters.remove(j);
                clusters[i].extend(merged);
                clusters[i].sort_by(|&x, &y| name(x).cmp(name(y)));
                clusters.sort_by(|a, b| name(a[0]).cmp(name(b[0])));
            }
            _ => break,
        }
    }
    clusters.sort_by(|a, b| {
        b.len()
            .cmp(&a.len())
            .then_with(|| name(a[0]).cmp(name(b[0])))
    });
    Ok(ClusterConfig {
        clusters: clusters
            .into_iter()
            .enumerate()
            .map(|(k, members)| ToolCluster {
                agent_name: format!("Agent{}", k + 1),
                tools: members.into_iter().map(|m| name(m).to_string()).collect(),
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Extra, TrajectoryStep};

    fn traj(actions: &[&str]) -> MetaTrajectory {
        MetaTrajectory {
            sample_id: "t".into(),
            image: None,
            steps: actions
                .iter()
                .enumerate()
                .map(|(i, a)| TrajectoryStep::new(i + 1, "", *a, "{}", ""))
                .collect(),
            final_answer: String::new(),
            extra: Extra::new(),
        }
    }

    #[test]
    fn single_step_is_zero() {
        let m = count_cooccurrence(&[traj(&["BLIPTool"])]);
        assert_eq!(m.counts, vec![vec![0]]);
    }

    #[test]
    fn adjacent_pairs() {
        let m = count_cooccurrence(&[traj(&["BLIPTool", "QwenVLCaptionTool", "OncoTreeTool"])]);
        assert_eq!(m.count("BLIPTool", "QwenVLCaptionTool"), 1);
        assert_eq!(m.count("QwenVLCaptionTool", "OncoTreeTool"), 1);
        assert_eq!(m.count("OncoTreeTool", "QwenVLCaptionTool"), 1);
        assert_eq!(m.count("BLIPTool", "OncoTreeTool"), 0);
        let total: u64 = m.counts.iter().flatten().sum();
        assert_eq!(total, 4);
    }

    #[test]
    fn self_adjacency_on_diagonal() {
        let m = count_cooccurrence(&[traj(&["A", "A", "B"])]);
        assert_eq!(m.count("A", "A"), 1);
        assert_eq!(m.count("A", "B"), 1);
    }

    #[test]
    fn blocks_and_singleton() {
        let m = CooccurrenceMatrix {
            tools: vec!["a".into(), "b".into(), "c".into(), "d".into()],
            counts: vec![
                vec![0, 5, 0, 0],
                vec![5, 0, 0, 0],
                vec![0, 0, 0, 3],
                vec![0, 0, 3, 0],
            ],
        };
        let c = cluster_tools(&m, 0.1).unwrap();
        assert_eq!(c.clusters.len(), 2);
        assert_eq!(c.clusters[0].tools, ["a", "b"]);
        assert_eq!(c.clusters[1].agent_name, "Agent2");
        let one = CooccurrenceMatrix {
            tools: vec!["x".into()],
            counts: vec![vec![0]],
        };
        assert_eq!(cluster_tools(&one, 0.1).unwrap().clusters[0].tools, ["x"]);
        let empty = CooccurrenceMatrix {
            tools: vec![],
            counts: vec![],
        };
        assert_eq!(cluster_tools(&empty, 0.1), Err(ClusterError::EmptyMatrix));
    }
}
