mod common;

use std::sync::Arc;

use proptest::prelude::*;
use trajkit::backend::{
    Cassette, CompletionBackend, CompletionRequest, RecordingBackend, ReplayBackend,
    ScriptedBackend,
};
use trajkit::orchestrator::{ComponentPool, Termination, STOP_MESSAGE};

use common::agents::{check_record, input, orchestrator, script, REPLIES};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn scripted_runs_honor_contracts((replies, fallback) in script()) {
        let backend = Arc::new(ScriptedBackend::new(replies).with_fallback(fallback));
        let orch = orchestrator(backend);
        let pool = ComponentPool::new();
        let record = orch.run_with_pool(&input(), &pool).unwrap();
        pool.finish().unwrap();
        prop_assert!(pool.peak() <= 1);
        prop_assert_eq!(pool.acquisitions(), record.component_runs.len());
        check_record(&record, 8)?;
    }

    #[test]
    fn replay_reproduces_run((replies, fallback) in script()) {
        let recorder = Arc::new(RecordingBackend::new(ScriptedBackend::new(replies).with_fallback(fallback)));
        let first = orchestrator(recorder.clone()).run(&input()).unwrap();
        let mut tape = Vec::new();
        recorder.cassette().write_to(&mut tape).unwrap();
        let cassette = Cassette::from_reader(tape.as_slice()).unwrap();
        let calls = cassette.entries.len();
        let replay = Arc::new(ReplayBackend::new(cassette));
        let second = orchestrator(replay.clone()).run(&input()).unwrap();
        prop_assert_eq!(&first, &second);
        prop_assert!(replay.complete(&CompletionRequest::new("more")).is_err());
        prop_assert!(calls <= 8 + 8 * 8);
    }
}

#[test]
fn exhaustion_yields_stop_message() {
    let backend = Arc::new(ScriptedBackend::new(Vec::<String>::new()).with_fallback(REPLIES[4]));
    let record = orchestrator(backend).run(&input()).unwrap();
    assert_eq!(record.termination, Termination::IterationLimit);
    assert_eq!(record.final_answer, STOP_MESSAGE);
    assert!(record.planner_trajectory.steps.len() <= 8);
}
