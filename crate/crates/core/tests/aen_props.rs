mod common;

use std::collections::HashMap;

use proptest::prelude::*;
use trajkit::aen::{
    construct_trajectories, discover_connections, filter_trajectories, split_dataset,
    ConnectionParams, ConstructionParams, FilterParams, HashScorer,
};
use trajkit::backend::FnBackend;
use trajkit::model::{to_jsonl_string, MetaTrajectory};

use common::oracle;

#[derive(Debug, Clone)]
struct Setup {
    seed: u64,
    n: usize,
    theta: f64,
    levels: Option<u32>,
    k: usize,
    m: usize,
    t_max: usize,
}

fn setup() -> impl Strategy<Value = Setup> {
    (
        any::<u64>(),
        2usize..=10,
        prop_oneof![Just(0.0), Just(0.3), Just(0.5), Just(0.8)],
        proptest::option::of(2u32..6),
        2usize..=8,
        1usize..=3,
        prop_oneof![Just(1_000_000usize), 1usize..6],
    )
        .prop_map(|(seed, n, theta, levels, k, m, t_max)| Setup {
            seed,
            n,
            theta,
            levels,
            k,
            m,
            t_max,
        })
}

fn scorer(s: &Setup) -> HashScorer {
    let h = HashScorer::new(s.seed);
    match s.levels {
        Some(l) => h.with_levels(l),
        None => h,
    }
}

fn synthesize(s: &Setup) -> (Vec<trajkit::model::Connection>, Vec<MetaTrajectory>) {
    let nodes = oracle::random_nodes(&mut oracle::rng(s.seed), s.n);
    let params = ConnectionParams {
        theta: s.theta,
        max_pairs: s.n * (s.n - 1),
        seed: s.seed,
        ..Default::default()
    };
    let conns = discover_connections(&nodes, &params, &scorer(s))
        .unwrap()
        .connections;
    let cp = ConstructionParams {
        max_length: s.k,
        max_usage: s.m,
        max_trajectories: s.t_max,
    };
    let out = construct_trajectories(&nodes, &conns, &cp, &FnBackend(oracle::answer_for)).unwrap();
    assert!(out.skipped.is_empty());
    (conns, out.trajectories)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn matches_bruteforce_interpreter(s in setup()) {
        let nodes = oracle::random_nodes(&mut oracle::rng(s.seed), s.n);
        let (conns, trajs) = synthesize(&s);
        let want_conns = oracle::discover(&nodes, s.theta, &scorer(&s));
        prop_assert_eq!(&conns, &want_conns);
        let want = oracle::construct(&nodes, &want_conns, s.k, s.m, s.t_max);
        prop_assert_eq!(trajs, want);
    }

    #[test]
    fn deterministic_output(s in setup()) {
        let (c1, t1) = synthesize(&s);
        let (c2, t2) = synthesize(&s);
        prop_assert_eq!(to_jsonl_string(&c1).unwrap(), to_jsonl_string(&c2).unwrap());
        prop_assert_eq!(to_jsonl_string(&t1).unwrap(), to_jsonl_string(&t2).unwrap());
    }

    #[test]
    fn usage_length_and_edges(s in setup()) {
        let (conns, trajs) = synthesize(&s);
        let by_pair: HashMap<(&str, &str), f64> =
            conns.iter().map(|c| ((c.src.as_str(), c.dst.as_str()), c.score)).collect();
        let mut usage: HashMap<&str, usize> = HashMap::new();
        for t in &trajs {
            let ids = t.source_ids();
            prop_assert!(ids.len() >= 2 && ids.len() <= s.k);
            for w in ids.windows(2) {
                let score = by_pair.get(&(w[0], w[1]));
                prop_assert!(score.is_some_and(|&v| v >= s.theta));
            }
            let mut distinct = ids.clone();
            distinct.sort_unstable();
            distinct.dedup();
            prop_assert_eq!(distinct.len(), ids.len());
            for id in ids {
                *usage.entry(id).or_default() += 1;
            }
        }
        prop_assert!(usage.values().all(|&u| u <= s.m));
        prop_assert!(trajs.len() <= s.t_max);
    }

    #[test]
    fn split_is_a_partition(len in 0usize..300, seed in any::<u64>(), a in 0u32..=100) {
        let b = (100 - a) / 2;
        let ratios = [a, b, 100 - a - b];
        let items: Vec<usize> = (0..len).collect();
        let split = split_dataset(items, ratios, seed).unwrap();
        let mut all: Vec<usize> = split.train.iter().chain(&split.validation).chain(&split.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..len).collect::<Vec<_>>());
        for (got, r) in [split.train.len(), split.validation.len(), split.test.len()].iter().zip(ratios) {
            let exact = len as f64 * f64::from(r) / 100.0;
            prop_assert!((*got as f64 - exact).abs() < 1.0);
        }
    }
}

#[test]
fn filter_defaults_keep_two_to_eight() {
    let s = Setup {
        seed: 37,
        n: 10,
        theta: 0.0,
        levels: None,
        k: 8,
        m: 3,
        t_max: 1_000_000,
    };
    let (_, trajs) = synthesize(&s);
    let (kept, rejected) = filter_trajectories(trajs.clone(), &FilterParams::default(), None);
    assert_eq!(kept.len() + rejected.len(), trajs.len());
    assert!(kept.iter().all(|t| (2..=8).contains(&t.len())));
}
