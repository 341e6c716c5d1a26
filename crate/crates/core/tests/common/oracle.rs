//! Brute-force reference interpreter for connection discovery and greedy
//! trajectory construction, written directly from the pseudocode without
//! reusing library internals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use trajkit::aen::PairScorer;
use trajkit::backend::{BackendError, CompletionRequest};
use trajkit::model::{AenNode, Connection, Extra, MetaTrajectory, TrajectoryStep};

/// All ordered compatible pairs, scored, thresholded and sorted.
pub fn discover(nodes: &[AenNode], theta: f64, scorer: &dyn PairScorer) -> Vec<Connection> {
    let mut out = Vec::new();
    for a in nodes {
        for b in nodes {
            if a.id == b.id {
                continue;
            }
            if let (Some(x), Some(y)) = (&a.image, &b.image) {
                if x != y {
                    continue;
                }
            }
            let (s, r) = scorer.score(a, b).unwrap();
            if s >= theta {
                out.push(Connection::new(&a.id, &b.id, s, r));
            }
        }
    }
    // Selection sort on (score desc, src asc, dst asc).
    for i in 0..out.len() {
        let mut best = i;
        for j in i + 1..out.len() {
            let (c, b) = (&out[j], &out[best]);
            let better = c.score > b.score
                || (c.score == b.score
                    && (c.src.as_str(), c.dst.as_str()) < (b.src.as_str(), b.dst.as_str()));
            if better {
                best = j;
            }
        }
        out.swap(i, best);
    }
    out
}

/// Deterministic stand-in answerer: the answer encodes the whole prompt.
pub fn answer_for(request: &CompletionRequest) -> Result<String, BackendError> {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in request
        .prompt
        .bytes()
        .chain(request.images.join("|").bytes())
    {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x100000001b3);
    }
    Ok(format!("Thought: wrap up\nFinal Answer: answer-{h:016x}"))
}

fn prompt(query: &str, steps: &[TrajectoryStep]) -> String {
    let mut p = format!("Question: {query}\n");
    for s in steps {
        p += &format!(
            "Thought: {}\nAction: {}\nAction Input: {}\nObservation: {}\n",
            s.thought,
            s.action,
            s.action_input.raw(),
            s.observation
        );
    }
    p + "Now provide the Final Answer to the original query."
}

pub fn construct(
    nodes: &[AenNode],
    conns: &[Connection],
    k: usize,
    m: usize,
    t_max: usize,
) -> Vec<MetaTrajectory> {
    let node = |id: &str| nodes.iter().find(|n| n.id == id).unwrap();
    let mut usage: Vec<(String, usize)> = nodes.iter().map(|n| (n.id.clone(), 0)).collect();
    let count =
        |usage: &Vec<(String, usize)>, id: &str| usage.iter().find(|(n, _)| n == id).unwrap().1;
    let mut used_pairs: Vec<(String, String)> = Vec::new();
    let mut out = Vec::new();
    for c in conns {
        if out.len() >= t_max {
            break;
        }
        if used_pairs.contains(&(c.src.clone(), c.dst.clone())) {
            continue;
        }
        if count(&usage, &c.src) >= m || count(&usage, &c.dst) >= m {
            continue;
        }
        let mut path = vec![c.src.clone(), c.dst.clone()];
        let mut reasons = vec![c.reasoning.clone()];
        let mut scores = vec![c.score];
        while path.len() < k {
            let current = path.last().unwrap().clone();
            // Connections are already in score order, so the first candidate is the best.
            let next = conns
                .iter()
                .find(|e| e.src == current && !path.contains(&e.dst) && count(&usage, &e.dst) < m);
            match next {
                Some(e) if e.score > 0.0 => {
                    path.push(e.dst.clone());
                    reasons.push(e.reasoning.clone());
                    scores.push(e.score);
                }
                _ => break,
            }
        }
        let first = node(&path[0]);
        let steps: Vec<TrajectoryStep> = path
            .iter()
            .enumerate()
            .map(|(pos, id)| {
                let n = node(id);
                let thought = if pos == 0 {
                    match &first.reasoning {
                        Some(r) if !r.is_empty() => r.clone(),
                        _ => first.query.clone(),
                    }
                } else {
                    reasons[pos - 1].clone()
                };
                TrajectoryStep::new(
                    pos + 1,
                    thought,
                    n.action.clone(),
                    n.action_input.clone(),
                    n.observation.clone(),
                )
            })
            .collect();
        let image = path.iter().find_map(|id| node(id).image.clone());
        let request =
            CompletionRequest::new(prompt(&first.query, &steps)).with_images(image.clone());
        let reply = answer_for(&request).unwrap();
        let answer = reply.split("Final Answer: ").nth(1).unwrap().to_string();
        let mut extra = Extra::new();
        extra.insert("query".into(), Value::String(first.query.clone()));
        extra.insert("edge_scores".into(), Value::from(scores));
        out.push(MetaTrajectory {
            sample_id: path.join("_"),
            image,
            steps,
            final_answer: answer,
            extra,
        });
        used_pairs.push((c.src.clone(), c.dst.clone()));
        for id in &path {
            usage.iter_mut().find(|(n, _)| n == id).unwrap().1 += 1;
        }
    }
    out
}

/// Random node set: some share an image, some have none, some carry reasoning.
pub fn random_nodes(rng: &mut ChaCha8Rng, n: usize) -> Vec<AenNode> {
    (0..n)
        .map(|i| {
            let mut node = AenNode::new(
                format!("n{i}"),
                format!("query {}", rng.random_range(0..3)),
                format!("Tool{}", rng.random_range(0..4)),
                format!("{{\"q\": \"v{i}\"}}"),
                format!("obs {i}"),
            );
            match rng.random_range(0..4) {
                0 => node.image = Some("img_a.png".into()),
                1 => node.image = Some("img_b.png".into()),
                _ => {}
            }
            if rng.random_bool(0.5) {
                node.reasoning = Some(format!("why {i}"));
            }
            node
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
