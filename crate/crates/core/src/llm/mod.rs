//! Language-model agents: prompt templates, response parsers, and the
//! backend contract they call through.

mod backend;
mod parse;
mod template;

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

pub use backend::{
    Backend, BackendConfig, BackendError, CompletionRequest, HttpBackend, HttpBackendConfig,
    RecordingBackend, ScriptedBackend, Transcript, TranscriptEntry, DEFAULT_MAX_TOKENS,
    DEFAULT_TEMPERATURE,
};
pub use parse::{
    parse_final_answer, parse_generation, parse_value, parse_vote, ParsedAnswer, TaskKind,
};
pub use template::{render_prompt, TemplateError, TemplateId, SYSTEM_KK};

use crate::engine::{
    aggregate_value, plurality, top_k, AgentError, Candidate, Discriminator, Environment,
    Generator, SearchConfig, SearchRng, Selection,
};
use crate::game24::{format_number, Game24State, Game24Task, Move24};
use crate::knights::{KkState, KkTask};

/// Sampling settings shared by every request an agent makes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingSettings {
    pub temperature: f64,
    pub max_tokens: usize,
}

impl Default for SamplingSettings {
    fn default() -> Self {
        SamplingSettings {
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }
}

fn bindings<'a>(pairs: &[(&'a str, String)]) -> BTreeMap<&'a str, String> {
    pairs.iter().cloned().collect()
}

/// Builds the request for a rendered template.
pub fn template_request(
    id: TemplateId,
    pairs: &[(&str, String)],
    n_samples: usize,
    settings: SamplingSettings,
) -> Result<CompletionRequest, TemplateError> {
    let prompt = render_prompt(id, &bindings(pairs))?;
    Ok(CompletionRequest {
        prompt,
        system: id.system().map(str::to_string),
        temperature: settings.temperature,
        max_tokens: settings.max_tokens,
        n_samples,
    })
}

fn protocol(e: TemplateError) -> AgentError {
    AgentError::Protocol(e.to_string())
}

fn backend_failure(e: BackendError) -> AgentError {
    AgentError::Backend(e.to_string())
}

/// A whole-answer prompt (`io_*` or `cot_*`) for a task.
pub trait DirectPrompt {
    fn task_kind(&self) -> TaskKind;
    fn direct_bindings(&self) -> Vec<(&'static str, String)>;
}

impl DirectPrompt for Game24Task {
    fn task_kind(&self) -> TaskKind {
        TaskKind::Game24
    }

    fn direct_bindings(&self) -> Vec<(&'static str, String)> {
        vec![("input", self.puzzle.to_string())]
    }
}

impl DirectPrompt for KkTask {
    fn task_kind(&self) -> TaskKind {
        TaskKind::Kk
    }

    fn direct_bindings(&self) -> Vec<(&'static str, String)> {
        vec![
            ("num-characters", self.puzzle.len().to_string()),
            ("statements", self.puzzle.statements_text()),
        ]
    }
}

/// The tree-search generator role played by a backend.
#[derive(Clone)]
pub struct LlmGenerator {
    backend: Arc<dyn Backend>,
    settings: SamplingSettings,
}

impl LlmGenerator {
    pub fn new(backend: Arc<dyn Backend>, settings: SamplingSettings) -> Self {
        LlmGenerator { backend, settings }
    }

    fn ask(
        &self,
        id: TemplateId,
        pairs: &[(&str, String)],
        n: usize,
    ) -> Result<Vec<String>, AgentError> {
        let request = template_request(id, pairs, n, self.settings).map_err(protocol)?;
        self.backend.complete(&request).map_err(backend_failure)
    }
}

/// The discriminator role played by a backend.
#[derive(Clone)]
pub struct LlmDiscriminator {
    backend: Arc<dyn Backend>,
    settings: SamplingSettings,
}

impl LlmDiscriminator {
    pub fn new(backend: Arc<dyn Backend>, settings: SamplingSettings) -> Self {
        LlmDiscriminator { backend, settings }
    }

    fn ask(
        &self,
        id: TemplateId,
        pairs: &[(&str, String)],
        n: usize,
    ) -> Result<Vec<String>, AgentError> {
        let request = template_request(id, pairs, n, self.settings).map_err(protocol)?;
        self.backend.complete(&request).map_err(backend_failure)
    }
}

impl Generator<Game24Task> for LlmGenerator {
    fn name(&self) -> String {
        format!("llm:{}", self.backend.name())
    }

    /// Pairwise states use one proposal prompt; the final state asks for
    /// `k` merged equations.
    fn generate(
        &self,
        _env: &Game24Task,
        state: &Game24State,
        k: usize,
        _rng: &mut SearchRng,
    ) -> Result<Vec<String>, AgentError> {
        if state.remaining.len() >= 2 {
            let texts = self.ask(TemplateId::Gen24, &[("input", state.remaining_text())], 1)?;
            Ok(texts
                .iter()
                .flat_map(|t| parse_generation(t, TaskKind::Game24))
                .take(k)
                .collect())
        } else {
            let steps: Vec<String> = state.history.iter().map(|s| s.to_string()).collect();
            let texts = self.ask(
                TemplateId::Merge24,
                &[("steps", format!("\n{}", steps.join("\n")))],
                k,
            )?;
            Ok(texts
                .iter()
                .map(|t| match parse_final_answer(t, TaskKind::Game24) {
                    Some(ParsedAnswer::Expression(e)) => format!("Answer: {e}"),
                    _ => t.trim().to_string(),
                })
                .collect())
        }
    }
}

impl Discriminator<Game24Task> for LlmDiscriminator {
    fn name(&self) -> String {
        format!("llm:{}", self.backend.name())
    }

    /// Values every candidate `valuation_rounds` times and keeps the top
    /// `beam_width`. Identical prompts within one call share a valuation.
    fn select(
        &self,
        env: &Game24Task,
        frontier: &[Game24State],
        pool: &[Candidate<Move24>],
        config: &SearchConfig,
        _rng: &mut SearchRng,
    ) -> Result<Selection, AgentError> {
        type ValueKey<'a> = (TemplateId, Vec<(&'a str, String)>);
        let mut cache: HashMap<ValueKey, (Vec<f64>, f64)> = HashMap::new();
        let mut scores = Vec::with_capacity(pool.len());
        let mut totals = Vec::with_capacity(pool.len());
        for c in pool {
            let state = &frontier[c.parent];
            let key = match &c.step {
                Move24::Combine(s) => (
                    TemplateId::Value24,
                    vec![(
                        "input",
                        s.left_after
                            .iter()
                            .map(format_number)
                            .collect::<Vec<_>>()
                            .join(" "),
                    )],
                ),
                Move24::Answer(_) => {
                    let shown = env.format_step(state, &c.step);
                    let answer = shown.strip_prefix("Answer: ").unwrap_or(&shown).to_string();
                    (
                        TemplateId::ValueLast24,
                        vec![("input", env.puzzle.to_string()), ("answer", answer)],
                    )
                }
            };
            if !cache.contains_key(&key) {
                let texts = self.ask(key.0, &key.1, config.valuation_rounds)?;
                let verdicts: Vec<_> = texts.iter().filter_map(|t| parse_value(t)).collect();
                let weights = verdicts.iter().map(|v| v.weight()).collect();
                cache.insert(key.clone(), (weights, aggregate_value(&verdicts)));
            }
            let (weights, total) = &cache[&key];
            scores.push(weights.clone());
            totals.push(*total);
        }
        Ok(Selection {
            chosen: top_k(&totals, config.beam_width),
            scores,
        })
    }
}

impl Generator<KkTask> for LlmGenerator {
    fn name(&self) -> String {
        format!("llm:{}", self.backend.name())
    }

    /// `k` samples of the single-character prompt; each yields its last
    /// identity line for the character asked about.
    fn generate(
        &self,
        env: &KkTask,
        state: &KkState,
        k: usize,
        _rng: &mut SearchRng,
    ) -> Result<Vec<String>, AgentError> {
        let Some(character) = env.next_character(state) else {
            return Ok(Vec::new());
        };
        let pairs = [
            ("num-characters", env.puzzle.len().to_string()),
            ("statements", env.puzzle.statements_text()),
            ("known_identities", env.known_identities_text(state)),
            ("character", character.to_string()),
        ];
        let texts = self.ask(TemplateId::GenKk, &pairs, k)?;
        let prefix = format!("{character}:");
        Ok(texts
            .iter()
            .map(|t| {
                parse_generation(t, TaskKind::Kk)
                    .into_iter()
                    .rev()
                    .find(|line| {
                        line.trim_start_matches(|c: char| !c.is_alphanumeric())
                            .starts_with(&prefix)
                    })
                    .unwrap_or_else(|| t.trim().to_string())
            })
            .collect())
    }
}

impl Discriminator<KkTask> for LlmDiscriminator {
    fn name(&self) -> String {
        format!("llm:{}", self.backend.name())
    }

    /// Takes `valuation_rounds` votes between exactly two candidates and
    /// keeps the plurality winner. Scores are per-candidate vote counts.
    fn select(
        &self,
        env: &KkTask,
        frontier: &[KkState],
        pool: &[Candidate<crate::knights::KkStep>],
        config: &SearchConfig,
        _rng: &mut SearchRng,
    ) -> Result<Selection, AgentError> {
        if pool.len() != 2 || pool[0].parent != pool[1].parent {
            return Err(AgentError::Protocol(format!(
                "the vote prompt compares two candidates from one state, got {}",
                pool.len()
            )));
        }
        let state = &frontier[pool[0].parent];
        let pairs = [
            ("num-characters", env.puzzle.len().to_string()),
            ("statements", env.puzzle.statements_text()),
            ("known_identities", env.known_identities_text(state)),
            (
                "first candidate step",
                env.format_step(state, &pool[0].step),
            ),
            (
                "second candidate step",
                env.format_step(state, &pool[1].step),
            ),
        ];
        let texts = self.ask(TemplateId::VoteKk, &pairs, config.valuation_rounds)?;
        let votes: Vec<Option<usize>> = texts
            .iter()
            .map(|t| parse_vote(t, 2).map(|c| c - 1))
            .collect();
        let mut scores = vec![vec![0.0]; 2];
        for v in votes.iter().flatten() {
            scores[*v][0] += 1.0;
        }
        Ok(Selection {
            chosen: plurality(&votes, 2).into_iter().collect(),
            scores,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::search_rng;
    use crate::engine::{run_task, FailureReason, Viability};
    use crate::game24::Puzzle24;
    use crate::knights::{generate_puzzle, GeneratorConstraints, Identity};
    use std::sync::Mutex;

    /// Answers by prompt shape with fixed text, recording every prompt seen.
    struct Canned {
        seen: Mutex<Vec<CompletionRequest>>,
        reply: fn(&CompletionRequest) -> String,
    }

    impl Backend for Canned {
        fn name(&self) -> String {
            "canned".into()
        }

        fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>, BackendError> {
            self.seen.lock().unwrap().push(request.clone());
            Ok((0..request.n_samples)
                .map(|_| (self.reply)(request))
                .collect())
        }
    }

    fn canned(reply: fn(&CompletionRequest) -> String) -> Arc<Canned> {
        Arc::new(Canned {
            seen: Mutex::new(Vec::new()),
            reply,
        })
    }

    #[test]
    fn game24_generation_and_merge_prompts() {
        let backend = canned(|r| {
            if r.prompt.contains("Possible next steps:") {
                "4 + 8 = 12 (left: 4 6 12)\nnonsense\n6 - 4 = 2 (left: 2 4 8)".into()
            } else {
                "Answer: (6 - 4) * (4 + 8) = 24".into()
            }
        });
        let generator = LlmGenerator::new(backend.clone(), SamplingSettings::default());
        let task = Game24Task::new(Puzzle24::new([4, 4, 6, 8]).unwrap());
        let mut rng = search_rng(0);
        let state = task.initial_state();
        let texts = generator.generate(&task, &state, 10, &mut rng).unwrap();
        assert_eq!(
            texts,
            ["4 + 8 = 12 (left: 4 6 12)", "6 - 4 = 2 (left: 2 4 8)"]
        );
        let seen = backend.seen.lock().unwrap().clone();
        assert!(seen[0]
            .prompt
            .ends_with("Input: 4 4 6 8\nPossible next steps:"));

        let mut state = state;
        for line in [
            "4 + 8 = 12 (left: 4 6 12)",
            "6 - 4 = 2 (left: 2 12)",
            "2 * 12 = 24 (left: 24)",
        ] {
            let mv = task.parse_step(&state, line).unwrap();
            state = task.apply(&state, &mv);
        }
        let texts = generator.generate(&task, &state, 1, &mut rng).unwrap();
        assert_eq!(texts, ["Answer: (6 - 4) * (4 + 8) = 24"]);
        let seen = backend.seen.lock().unwrap().clone();
        assert!(seen[1].prompt.ends_with(
            "Steps: \n4 + 8 = 12 (left: 4 6 12)\n6 - 4 = 2 (left: 2 12)\n2 * 12 = 24 (left: 24)"
        ));
    }

    #[test]
    fn game24_value_selection() {
        let backend = canned(|r| {
            if r.prompt.ends_with("\n2 4 4") {
                "confident".into()
            } else {
                "impossible".into()
            }
        });
        let disc = LlmDiscriminator::new(backend.clone(), SamplingSettings::default());
        let task = Game24Task::new(Puzzle24::new([4, 4, 6, 8]).unwrap());
        let state = task.initial_state();
        let pool: Vec<_> = [
            "4 * 6 = 24 (left: 4 8 24)",
            "8 - 6 = 2 (left: 2 4 4)",
            "6 * 4 = 24 (left: 4 8 24)",
        ]
        .iter()
        .map(|t| Candidate {
            parent: 0,
            step_text: t.to_string(),
            step: task.parse_step(&state, t).unwrap(),
            viability: Viability::Unknown,
        })
        .collect();
        let config = SearchConfig {
            beam_width: 2,
            ..SearchConfig::game24()
        };
        let sel = disc
            .select(&task, &[state], &pool, &config, &mut search_rng(0))
            .unwrap();
        assert_eq!(sel.chosen, vec![1, 0]);
        assert_eq!(sel.scores[1], vec![20.0; 3]);
        assert_eq!(sel.scores[0], vec![0.001; 3]);
        assert_eq!(backend.seen.lock().unwrap().len(), 2);
    }

    #[test]
    fn knights_generation_and_votes() {
        let puzzle =
            generate_puzzle(3, &mut search_rng(1), GeneratorConstraints::default()).unwrap();
        let task = KkTask::new(puzzle, "kk").unwrap();
        let backend = canned(|r| {
            if r.prompt.contains("Choice 1:") {
                "Choice 2 fits.\nThe best choice is 2".into()
            } else {
                "Reasoning...\nA: truth-teller\nSo in the end\nA: liar".into()
            }
        });
        let generator = LlmGenerator::new(backend.clone(), SamplingSettings::default());
        let disc = LlmDiscriminator::new(backend.clone(), SamplingSettings::default());
        let state = task.initial_state();
        let texts = generator
            .generate(&task, &state, 2, &mut search_rng(0))
            .unwrap();
        assert_eq!(texts, ["A: liar", "A: liar"]);
        let seen = backend.seen.lock().unwrap()[0].clone();
        assert!(seen.prompt.contains("statements from 3 characters"));
        assert!(seen.prompt.contains("Known identities:\nNone\n"));
        assert_eq!(seen.n_samples, 2);

        let pool: Vec<_> = Identity::BOTH
            .iter()
            .map(|&id| {
                let text = format!("A: {id}");
                Candidate {
                    parent: 0,
                    step: task.parse_step(&state, &text).unwrap(),
                    step_text: text,
                    viability: Viability::Unknown,
                }
            })
            .collect();
        let sel = disc
            .select(
                &task,
                std::slice::from_ref(&state),
                &pool,
                &SearchConfig::knights(3),
                &mut search_rng(0),
            )
            .unwrap();
        assert_eq!(sel.chosen, vec![1]);
        assert_eq!(sel.scores, vec![vec![0.0], vec![3.0]]);
        let err = disc.select(
            &task,
            &[state],
            &pool[..1],
            &SearchConfig::knights(3),
            &mut search_rng(0),
        );
        assert!(matches!(err, Err(AgentError::Protocol(_))));
    }

    #[test]
    fn abstaining_voters_end_the_search() {
        let puzzle =
            generate_puzzle(3, &mut search_rng(2), GeneratorConstraints::default()).unwrap();
        let task = KkTask::new(puzzle, "kk").unwrap();
        let backend = canned(|r| {
            if r.prompt.contains("Choice 1:") {
                "I cannot decide.".into()
            } else if r.prompt.contains("Known identities:\nNone") {
                "A: truth-teller".into()
            } else {
                "A: liar".into()
            }
        });
        let generator = LlmGenerator::new(backend.clone(), SamplingSettings::default());
        let disc = LlmDiscriminator::new(backend, SamplingSettings::default());
        let out = run_task(&task, &generator, &disc, &SearchConfig::knights(3), 0).unwrap();
        assert_eq!(out.levels.len(), 1);
        assert_eq!(out.failure_reason, Some(FailureReason::NoSelection));
        assert_eq!(out.n_outputs, 0);
        assert_eq!(out.generator, "llm:canned");
    }

    #[test]
    fn direct_prompts_and_scores() {
        let task = Game24Task::new(Puzzle24::new([4, 5, 6, 10]).unwrap());
        let req = template_request(
            TemplateId::Io24,
            &task.direct_bindings(),
            5,
            SamplingSettings::default(),
        )
        .unwrap();
        assert!(req.prompt.ends_with("Input: 4 5 6 10"));
        assert_eq!(req.system, None);
        assert_eq!(req.n_samples, 5);
        let kk = KkTask::new(
            generate_puzzle(3, &mut search_rng(3), GeneratorConstraints::default()).unwrap(),
            "kk",
        )
        .unwrap();
        let req = template_request(
            TemplateId::CotKk,
            &kk.direct_bindings(),
            5,
            SamplingSettings::default(),
        )
        .unwrap();
        assert_eq!(req.system.as_deref(), Some(SYSTEM_KK));
    }
}
