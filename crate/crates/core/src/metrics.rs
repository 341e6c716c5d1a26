//! Trajectory and answer metrics: success score, redundancy rate, tool
//! consistency F1, judge-scored answer consistency and hallucination rate,
//! and multiple-choice accuracy.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, CompletionBackend, CompletionRequest};
use crate::model::{MetaTrajectory, ToolCallRecord};
use crate::orchestrator::{fill, RunRecord, Termination};
use crate::react::{render_trajectory, FINAL_ANSWER_ACTION};

pub const DEFAULT_TRR_THETA: f64 = 0.7;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("judge model not configured")]
    JudgeUnavailable,
    #[error("judge reply contains no score: {0:?}")]
    UnparsableScore(String),
    #[error("sample ids differ: {missing_truth} runs without ground truth, {missing_runs} ground truth records without runs")]
    ShapeMismatch {
        missing_truth: usize,
        missing_runs: usize,
    },
    #[error(transparent)]
    Backend(#[from] BackendError),
}

pub const CONSISTENCY_PROMPT: &str = "You are grading an answer against a reference answer.
Rate how semantically consistent the model answer is with the reference, from 0 (contradicts or unrelated) to 1 (same meaning).
Reply with a single decimal number between 0 and 1 and nothing else.

Reference answer:
{reference}

Model answer:
{answer}

Score:";

pub const HALLUCINATION_PROMPT: &str = "You are checking a model response for hallucination.
Given the question, the tool-use trajectory the model actually executed, and its final answer, rate how much of the answer is unsupported by the trajectory or fabricated, from 0 (fully grounded) to 1 (entirely fabricated).
Reply with a single decimal number between 0 and 1 and nothing else.

Question:
{question}

Trajectory:
{trajectory}

Answer:
{answer}

Score:";

pub const OPTION_PROMPT: &str = "Does the predicted option denote the same choice as the correct option?
Reply with a single decimal number between 0 (different choice) and 1 (same choice) and nothing else.

Correct option: {correct}
Predicted option: {predicted}

Score:";

/// 0.5 for a valid output plus 0.5 times the call success ratio. With no
/// calls the ratio counts as 1.
pub fn trajectory_success_score(valid_output: bool, calls: &[ToolCallRecord]) -> f64 {
    let ratio = if calls.is_empty() {
        1.0
    } else {
        calls.iter().filter(|c| c.success).count() as f64 / calls.len() as f64
    };
    0.5 * f64::from(u8::from(valid_output)) + 0.5 * ratio
}

/// Lowercased tokens split on whitespace after dropping punctuation.
pub fn tokens(text: &str) -> BTreeSet<String> {
    let cleaned: String = text
        .to_lowercase()
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect();
    cleaned.split_whitespace().map(str::to_string).collect()
}

pub fn jaccard_similarity(a: &str, b: &str) -> f64 {
    let (ta, tb) = (tokens(a), tokens(b));
    if ta.is_empty() && tb.is_empty() {
        return 1.0;
    }
    let inter = ta.intersection(&tb).count();
    let union = ta.union(&tb).count();
    inter as f64 / union as f64
}

/// Share of call pairs that hit the same tool with inputs more similar than `theta`.
pub fn tool_redundancy_rate(calls: &[ToolCallRecord], theta: f64) -> f64 {
    let n = calls.len();
    if n < 2 {
        return 0.0;
    }
    let toks: Vec<BTreeSet<String>> = calls.iter().map(|c| tokens(&c.input)).collect();
    let mut redundant = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            if calls[i].tool != calls[j].tool {
                continue;
            }
            let (a, b) = (&toks[i], &toks[j]);
            let sim = if a.is_empty() && b.is_empty() {
                1.0
            } else {
                a.intersection(b).count() as f64 / a.union(b).count() as f64
            };
            if sim > theta {
                redundant += 1;
            }
        }
    }
    redundant as f64 / (n * (n - 1) / 2) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn tool_consistency_f1<S: AsRef<str>>(expected: &[S], actual: &[S]) -> Prf {
    let exp: BTreeSet<&str> = expected.iter().map(AsRef::as_ref).collect();
    let act: BTreeSet<&str> = actual.iter().map(AsRef::as_ref).collect();
    if exp.is_empty() && act.is_empty() {
        return Prf {
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
        };
    }
    let inter = exp.intersection(&act).count() as f64;
    if inter == 0.0 {
        return Prf {
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
        };
    }
    let precision = inter / act.len() as f64;
    let recall = inter / exp.len() as f64;
    Prf {
        precision,
        recall,
        f1: 2.0 * precision * recall / (precision + recall),
    }
}

/// First decimal number in a judge reply, clamped to [0, 1].
pub fn parse_judge_score(reply: &str) -> Result<f64, MetricError> {
    let re = Regex::new(r"[-+]?(?:\d+\.?\d*|\.\d+)").expect("valid regex");
    let m = re
        .find(reply)
        .ok_or_else(|| MetricError::UnparsableScore(reply.chars().take(200).collect()))?;
    let v: f64 = m
        .as_str()
        .parse()
        .map_err(|_| MetricError::UnparsableScore(m.as_str().to_string()))?;
    Ok(v.clamp(0.0, 1.0))
}

fn judge_score(judge: Option<&dyn CompletionBackend>, prompt: String) -> Result<f64, MetricError> {
    let judge = judge.ok_or(MetricError::JudgeUnavailable)?;
    parse_judge_score(&judge.complete(&CompletionRequest::new(prompt))?)
}

pub fn answer_consistency(
    reference: &str,
    answer: &str,
    judge: Option<&dyn CompletionBackend>,
) -> Result<f64, MetricError> {
    judge_score(
        judge,
        fill(
            CONSISTENCY_PROMPT,
            &[("reference", reference), ("answer", answer)],
        ),
    )
}

/// Per-item hallucination score H in [0, 1].
pub fn hallucination_score(
    question: &str,
    answer: &str,
    trajectory: &str,
    judge: Option<&dyn CompletionBackend>,
) -> Result<f64, MetricError> {
    judge_score(
        judge,
        fill(
            HALLUCINATION_PROMPT,
            &[
                ("question", question),
                ("trajectory", trajectory),
                ("answer", answer),
            ],
        ),
    )
}

/// Fraction of items whose hallucination score exceeds 0.5; 0 for no items.
pub fn hallucination_rate(
    items: &[(String, String, String)],
    judge: Option<&dyn CompletionBackend>,
) -> Result<f64, MetricError> {
    if items.is_empty() {
        return Ok(0.0);
    }
    let mut flagged = 0usize;
    for (q, a, t) in items {
        if hallucination_score(q, a, t, judge)? > 0.5 {
            flagged += 1;
        }
    }
    Ok(flagged as f64 / items.len() as f64)
}

pub fn hallucination_rate_from_scores(scores: &[f64]) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    scores.iter().filter(|&&h| h > 0.5).count() as f64 / scores.len() as f64
}

/// 1 on exact match after trim and case-fold, else the judge's score, else 0.
pub fn mc_accuracy(
    predicted: &str,
    correct: &str,
    judge: Option<&dyn CompletionBackend>,
) -> Result<f64, MetricError> {
    if predicted.trim().to_lowercase() == correct.trim().to_lowercase() {
        return Ok(1.0);
    }
    match judge {
        None => Ok(0.0),
        Some(_) => judge_score(
            judge,
            fill(
                OPTION_PROMPT,
                &[("correct", correct), ("predicted", predicted)],
            ),
        ),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub tss: f64,
    pub trr: f64,
    pub tcf1: Option<Prf>,
    pub acs: Option<f64>,
    pub hr: Option<f64>,
    pub mc_f1: Option<BTreeMap<String, f64>>,
    pub n: usize,
}

impl MetricReport {
    /// Plain-text table for terminals.
    pub fn table(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
        let mut rows = vec![
            ("n".to_string(), self.n.to_string()),
            ("TSS".to_string(), format!("{:.4}", self.tss)),
            ("TRR".to_string(), format!("{:.4}", self.trr)),
            ("TCF1".to_string(), opt(self.tcf1.map(|p| p.f1))),
            (
                "TCF1 precision".to_string(),
                opt(self.tcf1.map(|p| p.precision)),
            ),
            ("TCF1 recall".to_string(), opt(self.tcf1.map(|p| p.recall))),
            ("ACS".to_string(), opt(self.acs)),
            ("HR".to_string(), opt(self.hr)),
        ];
        if let Some(mc) = &self.mc_f1 {
            for (task, v) in mc {
                rows.push((format!("MC F1 [{task}]"), format!("{v:.4}")));
            }
        }
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        rows.iter()
            .map(|(k, v)| format!("{k:<width$}  {v}\n"))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalParams {
    pub trr_theta: f64,
    /// Score samples concurrently. Off by default so order-sensitive
    /// judges (scripted or replayed) see a fixed call order.
    pub parallel: bool,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self {
            trr_theta: DEFAULT_TRR_THETA,
            parallel: false,
        }
    }
}

/// Tool names a ground-truth trajectory expects to be called.
pub fn expected_tools(truth: &MetaTrajectory) -> Vec<String> {
    truth
        .steps
        .iter()
        .filter(|s| s.action != FINAL_ANSWER_ACTION)
        .map(|s| s.action.clone())
        .collect()
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

struct SampleScores {
    tss: f64,
    trr: f64,
    tcf1: Option<Prf>,
    acs: Option<f64>,
    h: Option<f64>,
    mc: Option<(String, f64)>,
}

/// Aggregates per-run metrics into dataset means. Judge metrics are
/// absent without a judge; TCF1, ACS and MC need ground truth.
pub fn evaluate_dataset(
    runs: &[RunRecord],
    ground_truth: Option<&[MetaTrajectory]>,
    judge: Option<&dyn CompletionBackend>,
    params: &EvalParams,
) -> Result<MetricReport, MetricError> {
    let truth: Option<HashMap<&str, &MetaTrajectory>> =
        ground_truth.map(|gt| gt.iter().map(|t| (t.sample_id.as_str(), t)).collect());
    if let Some(map) = &truth {
        let run_ids: BTreeSet<&str> = runs.iter().map(|r| r.sample_id.as_str()).collect();
        let missing_truth = run_ids.iter().filter(|id| !map.contains_key(*id)).count();
        let missing_runs = map.keys().filter(|id| !run_ids.contains(*id)).count();
        if missing_truth > 0 || missing_runs > 0 {
            return Err(MetricError::ShapeMismatch {
                missing_truth,
                missing_runs,
            });
        }
    }

    let score = |run: &RunRecord| -> Result<SampleScores, MetricError> {
        let calls: Vec<ToolCallRecord> = run.tool_calls().cloned().collect();
        let valid = run.termination == Termination::FinalAnswer;
        let gt = truth.as_ref().map(|m| m[run.sample_id.as_str()]);
        let tcf1 = gt.map(|g| {
            let actual: Vec<String> = calls.iter().map(|c| c.tool.clone()).collect();
            tool_consistency_f1(&expected_tools(g), &actual)
        });
        let acs = match (gt, judge) {
            (Some(g), Some(_)) => Some(answer_consistency(
                &g.final_answer,
                &run.final_answer,
                judge,
            )?),
            _ => None,
        };
        let h = match judge {
            Some(_) => Some(hallucination_score(
                &run.query,
                &run.final_answer,
                &render_trajectory(&run.planner_trajectory),
                judge,
            )?),
            None => None,
        };
        let mc = match gt.and_then(|g| {
            g.extra
                .get("correct_option")
                .and_then(|v| v.as_str())
                .map(|c| (g, c))
        }) {
            Some((g, correct)) => {
                let task = g
                    .extra
                    .get("subtask")
                    .and_then(|v| v.as_str())
                    .unwrap_or("all")
                    .to_string();
                Some((task, mc_accuracy(&run.final_answer, correct, judge)?))
            }
            None => None,
        };
        Ok(SampleScores {
            tss: trajectory_success_score(valid, &calls),
            trr: tool_redundancy_rate(&calls, params.trr_theta),
            tcf1,
            acs,
            h,
            mc,
        })
    };
    let per_sample: Vec<SampleScores> = if params.parallel {
        runs.par_iter().map(score).collect::<Result<_, _>>()?
    } else {
        runs.iter().map(score).collect::<Result<_, _>>()?
    };

    let tss: Vec<f64> = per_sample.iter().map(|s| s.tss).collect();
    let trr: Vec<f64> = per_sample.iter().map(|s| s.trr).collect();
    let tcf1 = truth.as_ref().map(|_| {
        let prfs: Vec<Prf> = per_sample.iter().filter_map(|s| s.tcf1).collect();
        Prf {
            precision: mean(&prfs.iter().map(|p| p.precision).collect::<Vec<_>>()),
            recall: mean(&prfs.iter().map(|p| p.recall).collect::<Vec<_>>()),
            f1: mean(&prfs.iter().map(|p| p.f1).collect::<Vec<_>>()),
        }
    });
    let acs_vals: Vec<f64> = per_sample.iter().filter_map(|s| s.acs).collect();
    let acs = (truth.is_some() && judge.is_some()).then(|| mean(&acs_vals));
    let h_vals: Vec<f64> = per_sample.iter().filter_map(|s| s.h).collect();
    let hr = judge.map(|_| hallucination_rate_from_scores(&h_vals));
    let mut mc_groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (task, v) in per_sample.iter().filter_map(|s| s.mc.clone()) {
        mc_groups.entry(task).or_default().push(v);
    }
    let mc_f1 = (!mc_groups.is_empty())
        .then(|| mc_groups.into_iter().map(|(k, v)| (k, mean(&v))).collect());
    Ok(MetricReport {
        tss: mean(&tss),
        trr: mean(&trr),
        tcf1,
        acs,
        hr,
        mc_f1,
        n: runs.len(),
    })
}
