mod common;

use std::fs;
use std::sync::Arc;

use common::sim::Simulated;
use common::{
    fixture, kk_replay_puzzles, replay_outcome_lines, replayed_outcome_lines, REPLAY_OUTCOMES,
    REPLAY_TRANSCRIPT,
};
use totlab::harness::Backends;
use totlab::llm::RecordingBackend;

/// Rewrites the transcript and golden outcomes from the simulated model.
#[test]
#[ignore = "rewrites committed fixtures"]
fn regenerate_replay_fixtures() {
    let recorder = Arc::new(RecordingBackend::new(Simulated::new(&kk_replay_puzzles())));
    let mut backends = Backends::default();
    backends.insert("sim", recorder.clone());
    let lines = replay_outcome_lines(&backends);
    fs::create_dir_all(fixture("fixtures")).unwrap();
    recorder
        .transcript()
        .save(&fixture(REPLAY_TRANSCRIPT))
        .unwrap();
    fs::write(fixture(REPLAY_OUTCOMES), lines).unwrap();
}

#[test]
fn transcript_replays_to_golden_outcomes() {
    let golden = fs::read_to_string(fixture(REPLAY_OUTCOMES)).unwrap();
    assert_eq!(replayed_outcome_lines().unwrap(), golden);
}

#[test]
fn live_simulation_matches_golden_outcomes() {
    let mut backends = Backends::default();
    backends.insert("sim", Arc::new(Simulated::new(&kk_replay_puzzles())));
    let golden = fs::read_to_string(fixture(REPLAY_OUTCOMES)).unwrap();
    assert_eq!(replay_outcome_lines(&backends), golden);
}
