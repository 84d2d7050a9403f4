//! Breadth-style tree-of-thoughts search.
//!
//! Each depth expands every frontier state through a [`Generator`], filters
//! the proposals through the task [`Environment`] so only valid steps reach
//! the [`Discriminator`], and keeps at most `beam_width` of them. After the
//! last depth the surviving states' answers are checked by the environment.
//! A run is a pure function of its inputs and seed; the returned
//! [`TaskOutcome`] doubles as the persisted trace record.

use std::collections::HashSet;
use std::fmt;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type SearchRng = rand_chacha::ChaCha8Rng;

pub fn search_rng(seed: u64) -> SearchRng {
    SearchRng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluationMode {
    Value,
    Vote,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub candidates_per_expansion: usize,
    pub beam_width: usize,
    pub valuation_rounds: usize,
    pub max_depth: usize,
    pub evaluation_mode: EvaluationMode,
}

impl SearchConfig {
    /// Ten proposals per state, each valued three times, top five kept.
    pub fn game24() -> Self {
        SearchConfig {
            candidates_per_expansion: 10,
            beam_width: 5,
            valuation_rounds: 3,
            max_depth: 4,
            evaluation_mode: EvaluationMode::Value,
        }
    }

    /// Two proposals per character, three voting rounds, one survivor.
    pub fn knights(characters: usize) -> Self {
        SearchConfig {
            candidates_per_expansion: 2,
            beam_width: 1,
            valuation_rounds: 3,
            max_depth: characters,
            evaluation_mode: EvaluationMode::Vote,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, value) in [
            ("candidates_per_expansion", self.candidates_per_expansion),
            ("beam_width", self.beam_width),
            ("valuation_rounds", self.valuation_rounds),
            ("max_depth", self.max_depth),
        ] {
            if value == 0 {
                return Err(ConfigError::ZeroCount(name));
            }
        }
        if self.beam_width > self.candidates_per_expansion {
            return Err(ConfigError::BeamWiderThanExpansion {
                beam_width: self.beam_width,
                candidates: self.candidates_per_expansion,
            });
        }
        if self.evaluation_mode == EvaluationMode::Vote && self.beam_width != 1 {
            return Err(ConfigError::VoteNeedsSingleBeam(self.beam_width));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("{0} must be at least 1")]
    ZeroCount(&'static str),
    #[error("beam_width {beam_width} exceeds candidates_per_expansion {candidates}")]
    BeamWiderThanExpansion {
        beam_width: usize,
        candidates: usize,
    },
    #[error("vote mode keeps one plurality winner, beam_width is {0}")]
    VoteNeedsSingleBeam(usize),
    #[error("max_depth {configured} does not match the task depth {task}")]
    DepthMismatch { configured: usize, task: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Confident,
    Likely,
    Impossible,
}

impl Verdict {
    /// One `confident` outranks any number of `likely`s over a few rounds.
    pub fn weight(self) -> f64 {
        match self {
            Verdict::Confident => 20.0,
            Verdict::Likely => 1.0,
            Verdict::Impossible => 0.001,
        }
    }
}

/// Sum of verdict weights; an empty list scores 0.
pub fn aggregate_value(verdicts: &[Verdict]) -> f64 {
    verdicts.iter().map(|v| v.weight()).sum()
}

/// Indices of the `k` best scores, ties broken by lower index.
pub fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

/// Most-voted choice among `n_choices`; ties go to the lower index.
/// `None` when every vote abstained.
pub fn plurality(votes: &[Option<usize>], n_choices: usize) -> Option<usize> {
    let mut counts = vec![0usize; n_choices];
    for &v in votes.iter().flatten() {
        if v < n_choices {
            counts[v] += 1;
        }
    }
    let best = *counts.iter().max()?;
    if best == 0 {
        return None;
    }
    counts.iter().position(|&c| c == best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Validity {
    Valid,
    Invalid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Viability {
    Viable,
    Inviable,
    Unknown,
}

impl From<Option<bool>> for Viability {
    fn from(v: Option<bool>) -> Self {
        match v {
            Some(true) => Viability::Viable,
            Some(false) => Viability::Inviable,
            None => Viability::Unknown,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnswerCheck {
    Correct,
    Incorrect(String),
    Unparseable(String),
}

/// A task the engine can search: its states, step grammar, and ground truth.
pub trait Environment: Sync {
    type State: Clone + fmt::Debug + Send + Sync;
    type Step: Clone + fmt::Debug + Send + Sync;

    fn task_id(&self) -> String;
    fn initial_state(&self) -> Self::State;
    /// Number of steps from the initial state to a final answer.
    fn depth(&self) -> usize;
    /// Upper bound on distinct moves from `state`, when the task fixes one
    /// below the requested candidate count.
    fn expansion_cap(&self, _state: &Self::State) -> Option<usize> {
        None
    }
    fn legal_steps(&self, state: &Self::State) -> Vec<Self::Step>;
    fn format_step(&self, state: &Self::State, step: &Self::Step) -> String;
    /// Parses agent text and checks it against the rules; `Err` carries the
    /// reason the candidate is invalid.
    fn parse_step(&self, state: &Self::State, text: &str) -> Result<Self::Step, String>;
    fn apply(&self, state: &Self::State, step: &Self::Step) -> Self::State;
    /// Ground-truth viability of a valid step, if the environment knows it.
    fn step_viability(&self, state: &Self::State, step: &Self::Step) -> Option<bool>;
    /// Key under which two steps from the same state count as the same.
    fn canonical_step(&self, state: &Self::State, step: &Self::Step) -> String;
    fn final_answer(&self, state: &Self::State) -> Option<String>;
    fn verify_answer(&self, answer: &str) -> AnswerCheck;
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgentError {
    #[error("backend failure: {0}")]
    Backend(String),
    #[error("agent returned an unusable selection: {0}")]
    Protocol(String),
}

pub trait Generator<E: Environment>: Send + Sync {
    fn name(&self) -> String;
    /// Proposes up to `k` step texts for `state`.
    fn generate(
        &self,
        env: &E,
        state: &E::State,
        k: usize,
        rng: &mut SearchRng,
    ) -> Result<Vec<String>, AgentError>;
}

/// A valid candidate in the discriminator pool.
#[derive(Debug, Clone)]
pub struct Candidate<S> {
    /// Position of the parent in the current frontier.
    pub parent: usize,
    pub step_text: String,
    pub step: S,
    pub viability: Viability,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Selection {
    /// Pool indices in frontier order.
    pub chosen: Vec<usize>,
    /// Per pool candidate, the numeric valuations that led to the choice.
    pub scores: Vec<Vec<f64>>,
}

pub trait Discriminator<E: Environment>: Send + Sync {
    fn name(&self) -> String;
    fn select(
        &self,
        env: &E,
        frontier: &[E::State],
        pool: &[Candidate<E::Step>],
        config: &SearchConfig,
        rng: &mut SearchRng,
    ) -> Result<Selection, AgentError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    EmptyPool,
    NoSelection,
    DepthExhausted,
    BackendError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceCandidate {
    pub parent: usize,
    pub step_text: String,
    pub validity: Validity,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub invalid_reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub viability: Option<Viability>,
    pub scores: Vec<f64>,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceLevel {
    pub depth: usize,
    pub frontier_size: usize,
    /// Candidate slots requested from the generator at this depth.
    pub slots: usize,
    pub candidates: Vec<TraceCandidate>,
    /// Indices into `candidates`, in the order they form the next frontier.
    pub selection: Vec<usize>,
    /// Distinct viable candidates, keyed by parent and canonical step.
    pub unique_viable: usize,
}

impl TraceLevel {
    pub fn valid_count(&self) -> usize {
        self.candidates
            .iter()
            .filter(|c| c.validity == Validity::Valid)
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalAnswer {
    pub text: String,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub task_id: String,
    pub seed: u64,
    pub generator: String,
    pub discriminator: String,
    pub config: SearchConfig,
    pub levels: Vec<TraceLevel>,
    pub final_answers: Vec<FinalAnswer>,
    /// Final answers the verifier could not parse; they are not outputs.
    pub excluded_answers: Vec<String>,
    pub n_correct: usize,
    pub n_outputs: usize,
    pub failure_reason: Option<FailureReason>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub failure_detail: Option<String>,
}

impl TaskOutcome {
    /// This task's term in the average success rate.
    pub fn success_ratio(&self) -> f64 {
        if self.n_outputs == 0 {
            0.0
        } else {
            self.n_correct as f64 / self.n_outputs as f64
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("outcome serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Candidates produced from one frontier, split into the valid pool and the
/// trace of everything proposed.
#[derive(Debug, Clone)]
pub struct Expansion<S> {
    pub pool: Vec<Candidate<S>>,
    pub trace: Vec<TraceCandidate>,
    /// For each pool entry, its index in `trace`.
    pub pool_trace_index: Vec<usize>,
    pub slots: usize,
    pub unique_viable: usize,
}

/// Asks the generator for candidates from every frontier state and keeps
/// only those the environment accepts.
pub fn expand_frontier<E: Environment>(
    env: &E,
    frontier: &[E::State],
    generator: &dyn Generator<E>,
    config: &SearchConfig,
    rng: &mut SearchRng,
) -> Result<Expansion<E::Step>, AgentError> {
    let mut expansion = Expansion {
        pool: Vec::new(),
        trace: Vec::new(),
        pool_trace_index: Vec::new(),
        slots: 0,
        unique_viable: 0,
    };
    let mut viable_keys = HashSet::new();
    for (parent, state) in frontier.iter().enumerate() {
        let k = match env.expansion_cap(state) {
            Some(cap) => config.candidates_per_expansion.min(cap),
            None => config.candidates_per_expansion,
        };
        expansion.slots += k;
        let texts = generator.generate(env, state, k, rng)?;
        for text in texts.into_iter().take(k) {
            match env.parse_step(state, &text) {
                Ok(step) => {
                    let viability = Viability::from(env.step_viability(state, &step));
                    if viability == Viability::Viable
                        && viable_keys.insert((parent, env.canonical_step(state, &step)))
                    {
                        expansion.unique_viable += 1;
                    }
                    expansion.pool_trace_index.push(expansion.trace.len());
                    expansion.trace.push(TraceCandidate {
                        parent,
                        step_text: text.clone(),
                        validity: Validity::Valid,
                        invalid_reason: None,
                        viability: Some(viability),
                        scores: Vec::new(),
                        selected: false,
                    });
                    expansion.pool.push(Candidate {
                        parent,
                        step_text: text,
                        step,
                        viability,
                    });
                }
                Err(reason) => expansion.trace.push(TraceCandidate {
                    parent,
                    step_text: text,
                    validity: Validity::Invalid,
                    invalid_reason: Some(reason),
                    viability: None,
                    scores: Vec::new(),
                    selected: false,
                }),
            }
        }
    }
    Ok(expansion)
}

/// Picks the surviving candidates. A lone candidate survives without
/// consulting the discriminator.
pub fn select_frontier<E: Environment>(
    env: &E,
    frontier: &[E::State],
    pool: &[Candidate<E::Step>],
    discriminator: &dyn Discriminator<E>,
    config: &SearchConfig,
    rng: &mut SearchRng,
) -> Result<Selection, AgentError> {
    if pool.len() <= 1 {
        return Ok(Selection {
            chosen: (0..pool.len()).collect(),
            scores: vec![Vec::new(); pool.len()],
        });
    }
    let mut selection = discriminator.select(env, frontier, pool, config, rng)?;
    let mut seen = HashSet::new();
    for &i in &selection.chosen {
        if i >= pool.len() || !seen.insert(i) {
            return Err(AgentError::Protocol(format!(
                "selection {:?} is not a set of pool indices below {}",
                selection.chosen,
                pool.len()
            )));
        }
    }
    selection.chosen.truncate(config.beam_width);
    selection.scores.resize(pool.len(), Vec::new());
    Ok(selection)
}

/// Runs one task to completion and returns its trace record.
pub fn run_task<E: Environment>(
    env: &E,
    generator: &dyn Generator<E>,
    discriminator: &dyn Discriminator<E>,
    config: &SearchConfig,
    seed: u64,
) -> Result<TaskOutcome, EngineError> {
    config.validate()?;
    if config.max_depth != env.depth() {
        return Err(ConfigError::DepthMismatch {
            configured: config.max_depth,
            task: env.depth(),
        }
        .into());
    }
    let mut rng = search_rng(seed);
    let mut outcome = TaskOutcome {
        task_id: env.task_id(),
        seed,
        generator: generator.name(),
        discriminator: discriminator.name(),
        config: config.clone(),
        levels: Vec::new(),
        final_answers: Vec::new(),
        excluded_answers: Vec::new(),
        n_correct: 0,
        n_outputs: 0,
        failure_reason: None,
        failure_detail: None,
    };
    let fail = |mut outcome: TaskOutcome, reason, detail: Option<String>| {
        outcome.failure_reason = Some(reason);
        outcome.failure_detail = detail;
        Ok(outcome)
    };

    let mut frontier = vec![env.initial_state()];
    for depth in 0..config.max_depth {
        let expansion = match expand_frontier(env, &frontier, generator, config, &mut rng) {
            Ok(e) => e,
            Err(err) => return fail(outcome, FailureReason::BackendError, Some(err.to_string())),
        };
        let mut level = TraceLevel {
            depth: depth + 1,
            frontier_size: frontier.len(),
            slots: expansion.slots,
            candidates: expansion.trace,
            selection: Vec::new(),
            unique_viable: expansion.unique_viable,
        };
        if expansion.pool.is_empty() {
            outcome.levels.push(level);
            return fail(outcome, FailureReason::EmptyPool, None);
        }
        let selection = match select_frontier(
            env,
            &frontier,
            &expansion.pool,
            discriminator,
            config,
            &mut rng,
        ) {
            Ok(s) => s,
            Err(err) => {
                outcome.levels.push(level);
                return fail(outcome, FailureReason::BackendError, Some(err.to_string()));
            }
        };
        for (pool_index, scores) in selection.scores.into_iter().enumerate() {
            level.candidates[expansion.pool_trace_index[pool_index]].scores = scores;
        }
        for &i in &selection.chosen {
            let trace_index = expansion.pool_trace_index[i];
            level.candidates[trace_index].selected = true;
            level.selection.push(trace_index);
        }
        outcome.levels.push(level);
        if selection.chosen.is_empty() {
            return fail(outcome, FailureReason::NoSelection, None);
        }
        frontier = selection
            .chosen
            .iter()
            .map(|&i| {
                let c = &expansion.pool[i];
                env.apply(&frontier[c.parent], &c.step)
            })
            .collect();
    }

    for state in &frontier {
        let Some(text) = env.final_answer(state) else {
            outcome.excluded_answers.push(String::new());
            continue;
        };
        match env.verify_answer(&text) {
            AnswerCheck::Correct => {
                outcome.n_outputs += 1;
                outcome.n_correct += 1;
                outcome.final_answers.push(FinalAnswer {
                    text,
                    correct: true,
                });
            }
            AnswerCheck::Incorrect(_) => {
                outcome.n_outputs += 1;
                outcome.final_answers.push(FinalAnswer {
                    text,
                    correct: false,
                });
            }
            AnswerCheck::Unparseable(_) => outcome.excluded_answers.push(text),
        }
    }
    if outcome.n_outputs == 0 {
        return fail(outcome, FailureReason::DepthExhausted, None);
    }
    Ok(outcome)
}
