//! Experiment configuration and execution: whole-answer baselines, tree
//! search runs, accuracy sweeps over oracle agents, and report files.

mod metrics;
mod report;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use metrics::{
    average_success_rate, bootstrap_ci, closed_form_success, derive_seed, generation_quality,
    paired_bootstrap_diff, DepthStats, GenerationQuality, MetricsError, RunRecord,
};
pub use report::{emit_report, read_records, summarize, ReportFiles, SummaryRow};

use crate::engine::{
    run_task, AnswerCheck, Discriminator, EngineError, Environment, FailureReason, FinalAnswer,
    Generator, SearchConfig, TaskOutcome,
};
use crate::game24::{self, ColumnSpec, Game24Task};
use crate::knights::{self, generate_puzzle, GenerateError, GeneratorConstraints, KkTask};
use crate::llm::{
    parse_final_answer, template_request, Backend, BackendConfig, BackendError, DirectPrompt,
    LlmDiscriminator, LlmGenerator, ParsedAnswer, SamplingSettings, TaskKind, TemplateId,
};
use crate::oracle::{
    AgentSpec, AgentSpecError, ClassFallback, OracleDiscriminator, OracleGenerator,
    RandomDiscriminator,
};

/// Bootstrap resamples behind every reported interval.
pub const BOOTSTRAP_RESAMPLES: usize = 1000;
pub const CI_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Io,
    Cot,
    Tot,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Io => "io",
            Method::Cot => "cot",
            Method::Tot => "tot",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "io" => Ok(Method::Io),
            "cot" => Ok(Method::Cot),
            "tot" => Ok(Method::Tot),
            _ => Err(format!("unknown method `{s}`; expected io, cot, or tot")),
        }
    }
}

fn default_characters() -> usize {
    3
}

/// Which puzzles to run. Without `source`, Game of 24 uses every solvable
/// multiset in canonical order and Knights and Knaves generates puzzles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSet {
    pub kind: TaskKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<PathBuf>,
    /// Puzzle column of a Game of 24 file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<String>,
    #[serde(default)]
    pub start: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default = "default_characters")]
    pub characters: usize,
    #[serde(default)]
    pub generation_seed: u64,
}

impl TaskSet {
    pub fn new(kind: TaskKind) -> Self {
        TaskSet {
            kind,
            source: None,
            column: None,
            start: 0,
            count: None,
            characters: default_characters(),
            generation_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sampling {
    pub temperature: f64,
    pub max_tokens: usize,
}

impl Default for Sampling {
    fn default() -> Self {
        let s = SamplingSettings::default();
        Sampling {
            temperature: s.temperature,
            max_tokens: s.max_tokens,
        }
    }
}

impl From<Sampling> for SamplingSettings {
    fn from(s: Sampling) -> Self {
        SamplingSettings {
            temperature: s.temperature,
            max_tokens: s.max_tokens,
        }
    }
}

fn default_samples() -> usize {
    5
}

/// One experiment, as read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub tasks: TaskSet,
    pub method: Method,
    /// Tree search generator, or the answering model for `io` and `cot`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<AgentSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discriminator: Option<AgentSpec>,
    /// Per-task defaults apply when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchConfig>,
    #[serde(default = "default_samples")]
    pub samples_per_task: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub backends: Vec<BackendConfig>,
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error(transparent)]
    Game24File(#[from] game24::PuzzleFileError),
    #[error(transparent)]
    KkFile(#[from] knights::PuzzleFileError),
    #[error(transparent)]
    Generate(#[from] GenerateError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    AgentSpec(#[from] AgentSpecError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl ExperimentConfig {
    pub fn new(tasks: TaskSet, method: Method) -> Self {
        ExperimentConfig {
            tasks,
            method,
            generator: None,
            discriminator: None,
            search: None,
            samples_per_task: default_samples(),
            master_seed: 0,
            sampling: Sampling::default(),
            backends: Vec::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text).map_err(|message| HarnessError::Parse {
            path: path.to_path_buf(),
            message,
        })
    }

    /// Checks the method, agents, and search settings, plus that every
    /// `llm:<name>` agent names a configured backend.
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.validate_shape()?;
        for spec in self.generator.iter().chain(&self.discriminator) {
            if let AgentSpec::Llm(name) = spec {
                if !self.backends.iter().any(|b| b.name() == name) {
                    return Err(HarnessError::Config(format!("no backend named `{name}`")));
                }
            }
        }
        Ok(())
    }

    fn validate_shape(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.samples_per_task == 0 {
            return bad("samples_per_task must be at least 1".into());
        }
        if let Some(search) = &self.search {
            search
                .validate()
                .map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        match self.method {
            Method::Tot => {
                match &self.generator {
                    None => return bad("tot needs a generator".into()),
                    Some(AgentSpec::Random) => {
                        return bad("`random` can only be a discriminator".into())
                    }
                    Some(_) => {}
                }
                if self.discriminator.is_none() {
                    return bad("tot needs a discriminator".into());
                }
            }
            Method::Io | Method::Cot => {
                if !matches!(self.generator, Some(AgentSpec::Llm(_))) {
                    return bad(format!(
                        "{} needs generator = \"llm:<backend>\"",
                        self.method
                    ));
                }
                if self.discriminator.is_some() {
                    return bad(format!("{} takes no discriminator", self.method));
                }
            }
        }
        Ok(())
    }
}

/// Environment-specific hooks the harness needs beyond [`Environment`].
pub trait HarnessTask: Environment + DirectPrompt + Send + Sync + Sized + 'static {
    fn default_search(&self) -> SearchConfig;
    fn llm_generator(agent: LlmGenerator) -> Box<dyn Generator<Self>>;
    fn llm_discriminator(agent: LlmDiscriminator) -> Box<dyn Discriminator<Self>>;
}

impl HarnessTask for Game24Task {
    fn default_search(&self) -> SearchConfig {
        SearchConfig::game24()
    }

    fn llm_generator(agent: LlmGenerator) -> Box<dyn Generator<Self>> {
        Box::new(agent)
    }

    fn llm_discriminator(agent: LlmDiscriminator) -> Box<dyn Discriminator<Self>> {
        Box::new(agent)
    }
}

impl HarnessTask for KkTask {
    fn default_search(&self) -> SearchConfig {
        SearchConfig::knights(self.puzzle.len())
    }

    fn llm_generator(agent: LlmGenerator) -> Box<dyn Generator<Self>> {
        Box::new(agent)
    }

    fn llm_discriminator(agent: LlmDiscriminator) -> Box<dyn Discriminator<Self>> {
        Box::new(agent)
    }
}

#[derive(Debug, Clone)]
pub enum TaskList {
    Game24(Vec<Game24Task>),
    Kk(Vec<KkTask>),
}

impl TaskList {
    pub fn len(&self) -> usize {
        match self {
            TaskList::Game24(t) => t.len(),
            TaskList::Kk(t) => t.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn window<T>(items: Vec<T>, start: usize, count: Option<usize>) -> Vec<T> {
    let it = items.into_iter().skip(start);
    match count {
        Some(n) => it.take(n).collect(),
        None => it.collect(),
    }
}

/// Relative paths resolve against `base`.
pub fn load_tasks(set: &TaskSet, base: &Path) -> Result<TaskList, HarnessError> {
    match set.kind {
        TaskKind::Game24 => {
            let puzzles = match &set.source {
                Some(path) => {
                    let spec = set
                        .column
                        .as_ref()
                        .map_or_else(ColumnSpec::default, |c| ColumnSpec::named(c.clone()));
                    game24::load_puzzles(&base.join(path), &spec)?
                }
                None => game24::enumerate_solvable_puzzles(),
            };
            Ok(TaskList::Game24(
                window(puzzles, set.start, set.count)
                    .into_iter()
                    .map(Game24Task::new)
                    .collect(),
            ))
        }
        TaskKind::Kk => {
            let puzzles = match &set.source {
                Some(path) => window(
                    knights::load_puzzles(&base.join(path))?,
                    set.start,
                    set.count,
                ),
                None => {
                    let count = set.count.ok_or_else(|| {
                        HarnessError::Config("generated puzzle sets need a count".into())
                    })?;
                    generate_puzzles(set.characters, set.start + count, set.generation_seed)?
                        .split_off(set.start)
                }
            };
            let tasks = puzzles
                .into_iter()
                .enumerate()
                .map(|(i, p)| {
                    let id = format!("kk{}-{}", p.len(), set.start + i);
                    KkTask::new(p, id).map_err(|e| HarnessError::Config(e.to_string()))
                })
                .collect::<Result<_, _>>()?;
            Ok(TaskList::Kk(tasks))
        }
    }
}

/// `count` puzzles drawn in sequence from one seeded stream.
pub fn generate_puzzles(
    characters: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<knights::KkPuzzle>, GenerateError> {
    let mut rng = crate::engine::search_rng(seed);
    (0..count)
        .map(|_| generate_puzzle(characters, &mut rng, GeneratorConstraints::default()))
        .collect()
}

/// Backends by name.
#[derive(Clone, Default)]
pub struct Backends(BTreeMap<String, Arc<dyn Backend>>);

impl Backends {
    pub fn build(configs: &[BackendConfig], base: &Path) -> Result<Self, HarnessError> {
        let mut map = BTreeMap::new();
        for c in configs {
            map.insert(c.name().to_string(), c.build(base)?);
        }
        Ok(Backends(map))
    }

    pub fn insert(&mut self, name: impl Into<String>, backend: Arc<dyn Backend>) {
        self.0.insert(name.into(), backend);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Backend>, HarnessError> {
        self.0
            .get(name)
            .cloned()
            .ok_or_else(|| HarnessError::Backend(BackendError::Unknown(name.to_string())))
    }

    fn concurrency(&self, specs: &[&AgentSpec]) -> Option<usize> {
        specs
            .iter()
            .filter_map(|s| match s {
                AgentSpec::Llm(name) => self.0.get(name).and_then(|b| b.max_concurrency()),
                _ => None,
            })
            .min()
    }
}

fn build_generator<E: HarnessTask>(
    spec: &AgentSpec,
    backends: &Backends,
    sampling: SamplingSettings,
) -> Result<Box<dyn Generator<E>>, HarnessError> {
    Ok(match spec {
        AgentSpec::Oracle { p, .. } => {
            Box::new(OracleGenerator::new(*p).map_err(|e| HarnessError::Config(e.to_string()))?)
        }
        AgentSpec::Random => {
            return Err(HarnessError::Config(
                "`random` can only be a discriminator".into(),
            ))
        }
        AgentSpec::Llm(name) => E::llm_generator(LlmGenerator::new(backends.get(name)?, sampling)),
    })
}

fn build_discriminator<E: HarnessTask>(
    spec: &AgentSpec,
    backends: &Backends,
    sampling: SamplingSettings,
) -> Result<Box<dyn Discriminator<E>>, HarnessError> {
    Ok(match spec {
        AgentSpec::Oracle { p, fallback } => Box::new(
            OracleDiscriminator::new(*p, *fallback)
                .map_err(|e| HarnessError::Config(e.to_string()))?,
        ),
        AgentSpec::Random => Box::new(RandomDiscriminator),
        AgentSpec::Llm(name) => {
            E::llm_discriminator(LlmDiscriminator::new(backends.get(name)?, sampling))
        }
    })
}

/// Records plus the full per-task traces.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutput {
    pub records: Vec<RunRecord>,
    pub outcomes: Vec<TaskOutcome>,
}

impl RunOutput {
    fn extend(&mut self, other: RunOutput) {
        self.records.extend(other.records);
        self.outcomes.extend(other.outcomes);
    }
}

fn in_pool<T: Send>(limit: Option<usize>, job: impl FnOnce() -> T + Send) -> T {
    match limit {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool")
            .install(job),
        None => job(),
    }
}

/// Runs the tree search on every task. `point` is the sweep accuracy the
/// records are tagged with and the seeds are derived from.
#[allow(clippy::too_many_arguments)]
fn run_tot<E: HarnessTask>(
    tasks: &[E],
    kind: TaskKind,
    config: &ExperimentConfig,
    generator: &AgentSpec,
    discriminator: &AgentSpec,
    backends: &Backends,
    point: Option<f64>,
) -> Result<RunOutput, HarnessError> {
    let sampling = config.sampling.into();
    let gen = build_generator::<E>(generator, backends, sampling)?;
    let disc = build_discriminator::<E>(discriminator, backends, sampling)?;
    let limit = backends.concurrency(&[generator, discriminator]);
    let results: Vec<Result<(TaskOutcome, u64), EngineError>> = in_pool(limit, || {
        tasks
            .par_iter()
            .enumerate()
            .map(|(i, task)| {
                let search = config
                    .search
                    .clone()
                    .unwrap_or_else(|| task.default_search());
                let seed = derive_seed(config.master_seed, i, point);
                let start = Instant::now();
                let outcome = run_task(task, gen.as_ref(), disc.as_ref(), &search, seed)?;
                Ok((outcome, start.elapsed().as_millis() as u64))
            })
            .collect()
    });
    let mut out = RunOutput::default();
    for r in results {
        let (outcome, ms) = r?;
        out.records
            .push(RunRecord::from_outcome(kind, "tot", point, &outcome, ms));
        out.outcomes.push(outcome);
    }
    Ok(out)
}

fn answer_text(parsed: ParsedAnswer) -> String {
    match parsed {
        ParsedAnswer::Expression(e) => format!("Answer: {e}"),
        ParsedAnswer::Assignment(lines) => {
            let body: Vec<String> = lines.iter().map(|(c, id)| format!("{c}: {id}")).collect();
            format!("CONCLUSION:\n{}", body.join("\n"))
        }
    }
}

/// Whole-answer prompting: `samples_per_task` answers per task, each
/// verified independently. Answers without the expected marker are
/// excluded rather than counted wrong.
fn run_direct<E: HarnessTask>(
    tasks: &[E],
    kind: TaskKind,
    config: &ExperimentConfig,
    backends: &Backends,
) -> Result<RunOutput, HarnessError> {
    let Some(AgentSpec::Llm(name)) = &config.generator else {
        return Err(HarnessError::Config(format!(
            "{} needs an llm generator",
            config.method
        )));
    };
    let backend = backends.get(name)?;
    let template = match (kind, config.method) {
        (TaskKind::Game24, Method::Io) => TemplateId::Io24,
        (TaskKind::Game24, _) => TemplateId::Cot24,
        (TaskKind::Kk, Method::Io) => TemplateId::IoKk,
        (TaskKind::Kk, _) => TemplateId::CotKk,
    };
    let sampling: SamplingSettings = config.sampling.into();
    let agent = format!("llm:{name}");
    let method = config.method.as_str();
    let results: Vec<(TaskOutcome, u64)> = in_pool(backend.max_concurrency(), || {
        tasks
            .par_iter()
            .enumerate()
            .map(|(i, task)| {
                let start = Instant::now();
                let mut outcome = TaskOutcome {
                    task_id: task.task_id(),
                    seed: derive_seed(config.master_seed, i, None),
                    generator: agent.clone(),
                    discriminator: "none".into(),
                    config: task.default_search(),
                    levels: Vec::new(),
                    final_answers: Vec::new(),
                    excluded_answers: Vec::new(),
                    n_correct: 0,
                    n_outputs: 0,
                    failure_reason: None,
                    failure_detail: None,
                };
                let texts = template_request(
                    template,
                    &task.direct_bindings(),
                    config.samples_per_task,
                    sampling,
                )
                .map_err(|e| e.to_string())
                .and_then(|req| backend.complete(&req).map_err(|e| e.to_string()));
                match texts {
                    Err(detail) => {
                        outcome.failure_reason = Some(FailureReason::BackendError);
                        outcome.failure_detail = Some(detail);
                    }
                    Ok(texts) => {
                        for t in texts {
                            let Some(parsed) = parse_final_answer(&t, kind) else {
                                outcome.excluded_answers.push(t);
                                continue;
                            };
                            let text = answer_text(parsed);
                            match task.verify_answer(&text) {
                                AnswerCheck::Unparseable(_) => outcome.excluded_answers.push(t),
                                check => {
                                    let correct = check == AnswerCheck::Correct;
                                    outcome.n_outputs += 1;
                                    outcome.n_correct += usize::from(correct);
                                    outcome.final_answers.push(FinalAnswer { text, correct });
                                }
                            }
                        }
                        if outcome.n_outputs == 0 {
                            outcome.failure_reason = Some(FailureReason::DepthExhausted);
                        }
                    }
                }
                (outcome, start.elapsed().as_millis() as u64)
            })
            .collect()
    });
    let mut out = RunOutput::default();
    for (outcome, ms) in results {
        out.records
            .push(RunRecord::from_outcome(kind, method, None, &outcome, ms));
        out.outcomes.push(outcome);
    }
    Ok(out)
}

/// Runs one experiment. Relative paths in the config resolve against `base`.
pub fn run_experiment(config: &ExperimentConfig, base: &Path) -> Result<RunOutput, HarnessError> {
    config.validate()?;
    let tasks = load_tasks(&config.tasks, base)?;
    let backends = Backends::build(&config.backends, base)?;
    run_loaded(config, &tasks, &backends)
}

/// [`run_experiment`] with tasks and backends supplied by the caller.
pub fn run_loaded(
    config: &ExperimentConfig,
    tasks: &TaskList,
    backends: &Backends,
) -> Result<RunOutput, HarnessError> {
    config.validate_shape()?;
    match (config.method, tasks) {
        (Method::Tot, TaskList::Game24(t)) => run_tot(
            t,
            TaskKind::Game24,
            config,
            config.generator.as_ref().expect("validated"),
            config.discriminator.as_ref().expect("validated"),
            backends,
            None,
        ),
        (Method::Tot, TaskList::Kk(t)) => run_tot(
            t,
            TaskKind::Kk,
            config,
            config.generator.as_ref().expect("validated"),
            config.discriminator.as_ref().expect("validated"),
            backends,
            None,
        ),
        (_, TaskList::Game24(t)) => run_direct(t, TaskKind::Game24, config, backends),
        (_, TaskList::Kk(t)) => run_direct(t, TaskKind::Kk, config, backends),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    GeneratorAccuracy,
    DiscriminatorAccuracy,
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "gen" | "generator" | "generator_accuracy" => Ok(SweepAxis::GeneratorAccuracy),
            "disc" | "discriminator" | "discriminator_accuracy" => {
                Ok(SweepAxis::DiscriminatorAccuracy)
            }
            _ => Err(format!("unknown sweep axis `{s}`; expected gen or disc")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub points: Vec<f64>,
    /// Adds a random-discriminator row; discriminator sweeps only.
    pub include_random: bool,
    /// Fallback for oracle discriminators created by the sweep.
    pub fallback: ClassFallback,
}

impl SweepSpec {
    pub fn new(axis: SweepAxis, points: Vec<f64>) -> Self {
        SweepSpec {
            axis,
            points,
            include_random: false,
            fallback: ClassFallback::Fail,
        }
    }
}

/// Generator fixed during a discriminator sweep when the config names none.
pub const DEFAULT_SWEEP_GENERATOR_ACCURACY: f64 = 0.5;

/// One tree-search run per point with the swept role played by an oracle of
/// that accuracy. The other role comes from the config, or defaults to a
/// perfect oracle discriminator (generator sweeps) or an oracle generator
/// of accuracy [`DEFAULT_SWEEP_GENERATOR_ACCURACY`] (discriminator sweeps).
/// A failing task is recorded as such and never aborts the sweep.
pub fn run_sweep(
    config: &ExperimentConfig,
    spec: &SweepSpec,
    tasks: &TaskList,
    backends: &Backends,
) -> Result<RunOutput, HarnessError> {
    if config.method != Method::Tot {
        return Err(HarnessError::Config(
            "sweeps run the tree search; set method = \"tot\"".into(),
        ));
    }
    if spec.include_random && spec.axis != SweepAxis::DiscriminatorAccuracy {
        return Err(HarnessError::Config(
            "the random row belongs to discriminator sweeps".into(),
        ));
    }
    for &p in &spec.points {
        if !(0.0..=1.0).contains(&p) {
            return Err(HarnessError::Config(format!(
                "sweep point {p} is outside [0, 1]"
            )));
        }
    }
    let oracle = |p: f64| AgentSpec::Oracle {
        p,
        fallback: spec.fallback,
    };
    let mut runs: Vec<(AgentSpec, AgentSpec, Option<f64>)> = Vec::new();
    match spec.axis {
        SweepAxis::GeneratorAccuracy => {
            let disc = config.discriminator.clone().unwrap_or_else(|| oracle(1.0));
            for &p in &spec.points {
                runs.push((
                    AgentSpec::Oracle {
                        p,
                        fallback: ClassFallback::Fail,
                    },
                    disc.clone(),
                    Some(p),
                ));
            }
        }
        SweepAxis::DiscriminatorAccuracy => {
            let gen = config.generator.clone().unwrap_or(AgentSpec::Oracle {
                p: DEFAULT_SWEEP_GENERATOR_ACCURACY,
                fallback: ClassFallback::Fail,
            });
            for &p in &spec.points {
                runs.push((gen.clone(), oracle(p), Some(p)));
            }
            if spec.include_random {
                runs.push((gen, AgentSpec::Random, None));
            }
        }
    }
    let mut out = RunOutput::default();
    for (gen, disc, point) in runs {
        let mut run_config = config.clone();
        run_config.generator = Some(gen.clone());
        run_config.discriminator = Some(disc.clone());
        run_config.validate_shape()?;
        let part = match tasks {
            TaskList::Game24(t) => run_tot(
                t,
                TaskKind::Game24,
                &run_config,
                &gen,
                &disc,
                backends,
                point,
            )?,
            TaskList::Kk(t) => run_tot(t, TaskKind::Kk, &run_config, &gen, &disc, backends, point)?,
        };
        out.extend(part);
    }
    Ok(out)
}

/// Paired comparison of consecutive sweep points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityCheck {
    pub from: f64,
    pub to: f64,
    pub mean_diff: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// The whole interval for `rate(to) - rate(from)` lies below zero.
    pub violated: bool,
}

/// Checks that success does not fall between consecutive `points`. Records
/// are paired by task id.
pub fn check_monotone(records: &[RunRecord], points: &[f64], seed: u64) -> Vec<MonotonicityCheck> {
    let ratios_at = |p: f64| -> BTreeMap<&str, f64> {
        records
            .iter()
            .filter(|r| r.accuracy == Some(p))
            .map(|r| (r.task_id.as_str(), r.success_ratio()))
            .collect()
    };
    points
        .windows(2)
        .map(|w| {
            let (a, b) = (ratios_at(w[0]), ratios_at(w[1]));
            let (xs, ys): (Vec<f64>, Vec<f64>) = a
                .iter()
                .filter_map(|(id, x)| b.get(id).map(|y| (*x, *y)))
                .unzip();
            let (lo, hi) = paired_bootstrap_diff(&xs, &ys, BOOTSTRAP_RESAMPLES, CI_LEVEL, seed);
            let mean_diff = if xs.is_empty() {
                0.0
            } else {
                ys.iter().zip(&xs).map(|(y, x)| y - x).sum::<f64>() / xs.len() as f64
            };
            MonotonicityCheck {
                from: w[0],
                to: w[1],
                mean_diff,
                ci_low: lo,
                ci_high: hi,
                violated: hi < 0.0,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{CompletionRequest, ScriptedBackend, Transcript};

    const SAMPLE: &str = r#"
method = "tot"
generator = "oracle:p=1"
discriminator = "oracle:p=1"
master_seed = 3

[tasks]
kind = "kk"
count = 4
characters = 3
"#;

    #[test]
    fn config_parses_and_validates() {
        let c = ExperimentConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(c.samples_per_task, 5);
        assert_eq!(c.sampling.temperature, 0.7);
        c.validate().unwrap();
        let mut bad = c.clone();
        bad.discriminator = None;
        assert!(bad.validate().is_err());
        let mut bad = c.clone();
        bad.generator = Some(AgentSpec::Random);
        assert!(bad.validate().is_err());
        let mut bad = c.clone();
        bad.method = Method::Io;
        assert!(bad.validate().is_err());
        let mut bad = c;
        bad.generator = Some(AgentSpec::Llm("nowhere".into()));
        assert!(bad.validate().is_err());
        assert!(
            ExperimentConfig::from_toml("method = \"tot\"\nbogus = 1\n[tasks]\nkind = \"kk\"")
                .is_err()
        );
    }

    #[test]
    fn full_config_parses() {
        let text = r#"
method = "tot"
generator = "llm:local"
discriminator = "oracle:p=0.8,fallback=other"
samples_per_task = 5
master_seed = 7

[tasks]
kind = "game24"
source = "puzzles.csv"
column = "Puzzles"
start = 900
count = 100

[search]
candidates_per_expansion = 10
beam_width = 5
valuation_rounds = 3
max_depth = 4
evaluation_mode = "value"

[sampling]
temperature = 0.7
max_tokens = 1000

[[backends]]
kind = "http"
name = "local"
endpoint = "http://127.0.0.1:8000/complete"
auth_env = "TOTLAB_TOKEN"
max_concurrency = 4

[[backends]]
kind = "scripted"
name = "replay"
transcript = "transcript.json"
"#;
        let c = ExperimentConfig::from_toml(text).unwrap();
        c.validate().unwrap();
        assert_eq!(c.search, Some(SearchConfig::game24()));
        assert_eq!(c.backends.len(), 2);
        assert_eq!(
            c.discriminator,
            Some(AgentSpec::Oracle {
                p: 0.8,
                fallback: ClassFallback::OtherClass
            })
        );
        let back = ExperimentConfig::from_toml(&toml::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn perfect_oracles_run_end_to_end() {
        let c = ExperimentConfig::from_toml(SAMPLE).unwrap();
        let out = run_experiment(&c, Path::new(".")).unwrap();
        assert_eq!(out.records.len(), 4);
        assert_eq!(average_success_rate(&out.records), Ok(1.0));
        let again = run_experiment(&c, Path::new(".")).unwrap();
        assert_eq!(out.outcomes, again.outcomes);
    }

    #[test]
    fn game24_windows() {
        let mut set = TaskSet::new(TaskKind::Game24);
        set.start = 10;
        set.count = Some(3);
        let TaskList::Game24(tasks) = load_tasks(&set, Path::new(".")).unwrap() else {
            panic!()
        };
        assert_eq!(tasks.len(), 3);
        assert_eq!(tasks[0].id, "g24-10");
    }

    #[test]
    fn direct_method_with_scripted_answers() {
        let mut set = TaskSet::new(TaskKind::Game24);
        set.count = Some(1);
        let tasks = load_tasks(&set, Path::new(".")).unwrap();
        let TaskList::Game24(list) = &tasks else {
            panic!()
        };
        let mut config = ExperimentConfig::new(set, Method::Io);
        config.generator = Some(AgentSpec::Llm("replay".into()));
        let request = template_request(
            TemplateId::Io24,
            &list[0].direct_bindings(),
            5,
            config.sampling.into(),
        )
        .unwrap();
        let solution = game24::solve_all(&list[0].puzzle.numbers)[0].answer_text();
        let mut transcript = Transcript::default();
        transcript.record(
            &CompletionRequest {
                n_samples: 1,
                ..request
            },
            &[
                format!("Answer: {solution}"),
                "Answer: 1 + 1 + 1 + 1 = 24".into(),
                "no marker here".into(),
            ],
        );
        let mut backends = Backends::default();
        backends.insert(
            "replay",
            Arc::new(ScriptedBackend::new("replay", transcript)),
        );
        let out = run_loaded(&config, &tasks, &backends).unwrap();
        let o = &out.outcomes[0];
        assert_eq!((o.n_correct, o.n_outputs), (2, 4), "{o:?}");
        assert_eq!(o.excluded_answers.len(), 1);
        assert_eq!(out.records[0].method, "io");
    }

    #[test]
    fn sweep_rows_and_errors() {
        let c = ExperimentConfig::from_toml(SAMPLE).unwrap();
        let tasks = load_tasks(&c.tasks, Path::new(".")).unwrap();
        let mut spec = SweepSpec::new(SweepAxis::DiscriminatorAccuracy, vec![0.2, 1.0]);
        spec.include_random = true;
        let mut cfg = c.clone();
        cfg.generator = None;
        cfg.discriminator = None;
        let out = run_sweep(&cfg, &spec, &tasks, &Backends::default()).unwrap();
        assert_eq!(out.records.len(), 12);
        assert_eq!(out.records[8].discriminator, "random");
        assert_eq!(out.records[0].generator, "oracle:p=0.5");
        let again = run_sweep(&cfg, &spec, &tasks, &Backends::default()).unwrap();
        assert_eq!(out.outcomes, again.outcomes);

        let mut gen_spec = SweepSpec::new(SweepAxis::GeneratorAccuracy, vec![1.0]);
        let out = run_sweep(&cfg, &gen_spec, &tasks, &Backends::default()).unwrap();
        assert_eq!(average_success_rate(&out.records), Ok(1.0));
        gen_spec.include_random = true;
        assert!(run_sweep(&cfg, &gen_spec, &tasks, &Backends::default()).is_err());
        let bad = SweepSpec::new(SweepAxis::GeneratorAccuracy, vec![1.5]);
        assert!(run_sweep(&cfg, &bad, &tasks, &Backends::default()).is_err());
    }

    #[test]
    fn monotonicity_flags_only_clear_drops() {
        let mk = |id: usize, p: f64, c: usize| RunRecord {
            task: TaskKind::Kk,
            task_id: format!("t{id}"),
            method: "tot".into(),
            generator: "g".into(),
            discriminator: "d".into(),
            accuracy: Some(p),
            seed: 0,
            n_correct: c,
            n_outputs: 1,
            failure_reason: None,
            depths: Vec::new(),
            wall_time_ms: 0,
        };
        let mut records = Vec::new();
        for i in 0..100 {
            records.push(mk(i, 0.2, usize::from(i % 4 == 0)));
            records.push(mk(i, 0.4, usize::from(i % 2 == 0)));
            records.push(mk(i, 0.6, usize::from(i % 10 == 0)));
        }
        let checks = check_monotone(&records, &[0.2, 0.4, 0.6], 0);
        assert!(!checks[0].violated);
        assert!(checks[1].violated);
        assert!((checks[1].mean_diff + 0.4).abs() < 1e-12);
    }

    #[test]
    fn axis_and_method_names() {
        assert_eq!("gen".parse::<SweepAxis>(), Ok(SweepAxis::GeneratorAccuracy));
        assert_eq!(
            "disc".parse::<SweepAxis>(),
            Ok(SweepAxis::DiscriminatorAccuracy)
        );
        assert!("both".parse::<SweepAxis>().is_err());
        assert_eq!("cot".parse::<Method>(), Ok(Method::Cot));
    }
}
