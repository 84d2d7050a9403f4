//! Oracle agents with a tunable accuracy, and a uniformly random
//! discriminator. They read ground-truth viability from the environment, so
//! each ToT role can be studied with the other held fixed.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{
    AgentError, Candidate, Discriminator, Environment, Generator, SearchConfig, SearchRng,
    Selection, Viability,
};

/// Legal steps from a state split by ground-truth viability. Steps whose
/// viability the environment cannot tell are counted as inviable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassifiedSteps<S> {
    pub viable: Vec<S>,
    pub inviable: Vec<S>,
}

pub fn classify_steps<E: Environment>(env: &E, state: &E::State) -> ClassifiedSteps<E::Step> {
    let (viable, inviable) = env
        .legal_steps(state)
        .into_iter()
        .partition(|s| env.step_viability(state, s) == Some(true));
    ClassifiedSteps { viable, inviable }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Class {
    Viable,
    Inviable,
}

fn draw_class(rng: &mut SearchRng, p: f64) -> Class {
    if rng.gen_bool(p) {
        Class::Viable
    } else {
        Class::Inviable
    }
}

/// Draws `k` slots. Each slot picks the viable class with probability `p`,
/// then a member of that class uniformly among those not yet drawn in this
/// call; once every member has been drawn, members repeat. A slot whose class
/// is empty takes the other class. Returns `(class, index)` pairs.
fn draw_generation_slots(
    n_viable: usize,
    n_inviable: usize,
    k: usize,
    p: f64,
    rng: &mut SearchRng,
) -> Vec<(Class, usize)> {
    if n_viable + n_inviable == 0 {
        return Vec::new();
    }
    let mut unused_viable: Vec<usize> = (0..n_viable).collect();
    let mut unused_inviable: Vec<usize> = (0..n_inviable).collect();
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let mut class = draw_class(rng, p);
        let size = |c| {
            if c == Class::Viable {
                n_viable
            } else {
                n_inviable
            }
        };
        if size(class) == 0 {
            class = if class == Class::Viable {
                Class::Inviable
            } else {
                Class::Viable
            };
        }
        let unused = if class == Class::Viable {
            &mut unused_viable
        } else {
            &mut unused_inviable
        };
        let index = if unused.is_empty() {
            rng.gen_range(0..size(class))
        } else {
            unused.swap_remove(rng.gen_range(0..unused.len()))
        };
        out.push((class, index));
    }
    out
}

/// Proposes `k` valid steps, each viable with probability `p` whenever the
/// state has steps of both kinds. Emits nothing when the state has no legal
/// steps.
pub fn oracle_generate<E: Environment>(
    env: &E,
    state: &E::State,
    k: usize,
    p: f64,
    rng: &mut SearchRng,
) -> Vec<E::Step> {
    let classes = classify_steps(env, state);
    draw_generation_slots(classes.viable.len(), classes.inviable.len(), k, p, rng)
        .into_iter()
        .map(|(class, i)| match class {
            Class::Viable => classes.viable[i].clone(),
            Class::Inviable => classes.inviable[i].clone(),
        })
        .collect()
}

/// What a selection slot does when no unselected candidate of its class is
/// left in the pool.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassFallback {
    /// The slot selects nothing.
    #[default]
    Fail,
    /// The slot picks from the other class instead.
    OtherClass,
}

/// Picks up to `m` distinct pool indices. Each slot chooses the viable class
/// with probability `p` and then a uniformly random unselected member.
pub fn oracle_select(
    viability: &[Viability],
    m: usize,
    p: f64,
    fallback: ClassFallback,
    rng: &mut SearchRng,
) -> Vec<usize> {
    let mut viable: Vec<usize> = Vec::new();
    let mut inviable: Vec<usize> = Vec::new();
    for (i, v) in viability.iter().enumerate() {
        if *v == Viability::Viable {
            viable.push(i);
        } else {
            inviable.push(i);
        }
    }
    let mut chosen = Vec::new();
    for _ in 0..m {
        if viable.is_empty() && inviable.is_empty() {
            break;
        }
        let class = draw_class(rng, p);
        let (own, other) = match class {
            Class::Viable => (&mut viable, &mut inviable),
            Class::Inviable => (&mut inviable, &mut viable),
        };
        let bucket = if !own.is_empty() {
            own
        } else if fallback == ClassFallback::OtherClass {
            other
        } else {
            continue;
        };
        let pick = bucket.swap_remove(rng.gen_range(0..bucket.len()));
        chosen.push(pick);
    }
    chosen
}

/// Uniformly random `min(m, n)` distinct indices below `n`.
pub fn random_select(n: usize, m: usize, rng: &mut SearchRng) -> Vec<usize> {
    sample(rng, n, m.min(n)).into_vec()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("accuracy {0} is outside [0, 1]")]
    Accuracy(f64),
}

fn check_accuracy(p: f64) -> Result<f64, OracleError> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(OracleError::Accuracy(p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleRole {
    Generator,
    Discriminator,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub accuracy: f64,
    pub role: OracleRole,
}

impl OracleConfig {
    pub fn new(accuracy: f64, role: OracleRole) -> Result<Self, OracleError> {
        Ok(OracleConfig {
            accuracy: check_accuracy(accuracy)?,
            role,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleGenerator {
    p: f64,
}

impl OracleGenerator {
    pub fn new(p: f64) -> Result<Self, OracleError> {
        Ok(OracleGenerator {
            p: check_accuracy(p)?,
        })
    }

    pub fn accuracy(&self) -> f64 {
        self.p
    }
}

impl<E: Environment> Generator<E> for OracleGenerator {
    fn name(&self) -> String {
        AgentSpec::Oracle {
            p: self.p,
            fallback: ClassFallback::Fail,
        }
        .to_string()
    }

    fn generate(
        &self,
        env: &E,
        state: &E::State,
        k: usize,
        rng: &mut SearchRng,
    ) -> Result<Vec<String>, AgentError> {
        Ok(oracle_generate(env, state, k, self.p, rng)
            .iter()
            .map(|s| env.format_step(state, s))
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleDiscriminator {
    p: f64,
    fallback: ClassFallback,
}

impl OracleDiscriminator {
    pub fn new(p: f64, fallback: ClassFallback) -> Result<Self, OracleError> {
        Ok(OracleDiscriminator {
            p: check_accuracy(p)?,
            fallback,
        })
    }

    pub fn accuracy(&self) -> f64 {
        self.p
    }
}

impl<E: Environment> Discriminator<E> for OracleDiscriminator {
    fn name(&self) -> String {
        AgentSpec::Oracle {
            p: self.p,
            fallback: self.fallback,
        }
        .to_string()
    }

    fn select(
        &self,
        _env: &E,
        _frontier: &[E::State],
        pool: &[Candidate<E::Step>],
        config: &SearchConfig,
        rng: &mut SearchRng,
    ) -> Result<Selection, AgentError> {
        let viability: Vec<Viability> = pool.iter().map(|c| c.viability).collect();
        Ok(Selection {
            chosen: oracle_select(&viability, config.beam_width, self.p, self.fallback, rng),
            scores: vec![Vec::new(); pool.len()],
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RandomDiscriminator;

impl<E: Environment> Discriminator<E> for RandomDiscriminator {
    fn name(&self) -> String {
        AgentSpec::Random.to_string()
    }

    fn select(
        &self,
        _env: &E,
        _frontier: &[E::State],
        pool: &[Candidate<E::Step>],
        config: &SearchConfig,
        rng: &mut SearchRng,
    ) -> Result<Selection, AgentError> {
        Ok(Selection {
            chosen: random_select(pool.len(), config.beam_width, rng),
            scores: vec![Vec::new(); pool.len()],
        })
    }
}

/// Agent selector as written on the command line and in config files:
/// `oracle:p=<f>[,fallback=fail|other]`, `random`, or `llm:<backend>`.
#[derive(Debug, Clone, PartialEq)]
pub enum AgentSpec {
    Oracle { p: f64, fallback: ClassFallback },
    Random,
    Llm(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentSpecError {
    #[error("unrecognised agent `{0}`; expected oracle:p=<f>, random, or llm:<backend>")]
    Syntax(String),
    #[error("agent `{spec}`: {source}")]
    Accuracy { spec: String, source: OracleError },
}

impl FromStr for AgentSpec {
    type Err = AgentSpecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let syntax = || AgentSpecError::Syntax(s.to_string());
        if s == "random" {
            return Ok(AgentSpec::Random);
        }
        if let Some(name) = s.strip_prefix("llm:") {
            if name.is_empty() {
                return Err(syntax());
            }
            return Ok(AgentSpec::Llm(name.to_string()));
        }
        let rest = s.strip_prefix("oracle:").ok_or_else(syntax)?;
        let mut p = None;
        let mut fallback = ClassFallback::Fail;
        for part in rest.split(',') {
            match part.trim().split_once('=') {
                Some(("p", v)) => p = Some(v.trim().parse::<f64>().map_err(|_| syntax())?),
                Some(("fallback", "fail")) => fallback = ClassFallback::Fail,
                Some(("fallback", "other")) => fallback = ClassFallback::OtherClass,
                _ => return Err(syntax()),
            }
        }
        let p = p.ok_or_else(syntax)?;
        check_accuracy(p).map_err(|source| AgentSpecError::Accuracy {
            spec: s.to_string(),
            source,
        })?;
        Ok(AgentSpec::Oracle { p, fallback })
    }
}

impl fmt::Display for AgentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentSpec::Oracle { p, fallback } => {
                write!(f, "oracle:p={p}")?;
                if *fallback == ClassFallback::OtherClass {
                    f.write_str(",fallback=other")?;
                }
                Ok(())
            }
            AgentSpec::Random => f.write_str("random"),
            AgentSpec::Llm(name) => write!(f, "llm:{name}"),
        }
    }
}

impl Serialize for AgentSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AgentSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::search_rng;
    use crate::game24::{Game24State, Game24Task, Move24, Puzzle24, Rational};
    use crate::knights::{generate_puzzle, GeneratorConstraints, KkTask};

    fn game24() -> Game24Task {
        Game24Task::new(Puzzle24::new([4, 9, 10, 13]).unwrap())
    }

    #[test]
    fn classification_matches_ground_truth() {
        let task = game24();
        let state = Game24State {
            remaining: vec![Rational::from_integer(4), Rational::from_integer(6)],
            history: Vec::new(),
            answer: None,
        };
        let classes = classify_steps(&task, &state);
        let texts = |v: &[Move24]| {
            v.iter()
                .map(|s| task.format_step(&state, s))
                .collect::<Vec<_>>()
        };
        assert!(texts(&classes.viable).contains(&"4 * 6 = 24 (left: 24)".to_string()));
        assert_eq!(classes.viable.len() + classes.inviable.len(), 8);

        let state = Game24State {
            remaining: vec![Rational::from_integer(10), Rational::from_integer(14)],
            history: Vec::new(),
            answer: None,
        };
        let classes = classify_steps(&task, &state);
        let texts = |v: &[Move24]| {
            v.iter()
                .map(|s| task.format_step(&state, s))
                .collect::<Vec<_>>()
        };
        assert!(texts(&classes.inviable).contains(&"10 * 14 = 140 (left: 140)".to_string()));
        assert!(classes
            .viable
            .iter()
            .all(|s| task.step_viability(&state, s) == Some(true)));
    }

    #[test]
    fn degenerate_accuracies() {
        let task = game24();
        let state = task.initial_state();
        let mut rng = search_rng(1);
        let all = oracle_generate(&task, &state, 10, 1.0, &mut rng);
        assert_eq!(all.len(), 10);
        assert!(all
            .iter()
            .all(|s| task.step_viability(&state, s) == Some(true)));
        let none = oracle_generate(&task, &state, 10, 0.0, &mut rng);
        assert!(none
            .iter()
            .all(|s| task.step_viability(&state, s) == Some(false)));
    }

    #[test]
    fn no_duplicates_until_a_class_is_exhausted() {
        let task = game24();
        let state = task.initial_state();
        let classes = classify_steps(&task, &state);
        let n = classes.viable.len();
        let steps = oracle_generate(&task, &state, n, 1.0, &mut search_rng(9));
        let mut keys: Vec<String> = steps.iter().map(|s| task.format_step(&state, s)).collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), n);
        let steps = oracle_generate(&task, &state, n + 1, 1.0, &mut search_rng(9));
        assert_eq!(steps.len(), n + 1);
        assert!(steps
            .iter()
            .all(|s| task.step_viability(&state, s) == Some(true)));
    }

    fn viable_fraction<E: Environment>(
        env: &E,
        state: &E::State,
        p: f64,
        k: usize,
        seed: u64,
    ) -> f64 {
        let mut rng = search_rng(seed);
        let mut viable = 0usize;
        let mut total = 0usize;
        while total < 10_000 {
            for s in oracle_generate(env, state, k, p, &mut rng) {
                total += 1;
                viable += usize::from(env.step_viability(state, &s) == Some(true));
            }
        }
        viable as f64 / total as f64
    }

    #[test]
    fn generator_calibration_in_both_environments() {
        let g24 = game24();
        let kk = KkTask::new(
            generate_puzzle(3, &mut search_rng(4), GeneratorConstraints::default()).unwrap(),
            "kk",
        )
        .unwrap();
        for p in [0.2, 0.6, 0.8] {
            // 99% binomial half-width over 10,000 draws is at most 0.013.
            let tol = 2.576 * (p * (1.0 - p) / 10_000.0_f64).sqrt() + 0.002;
            let f = viable_fraction(&g24, &g24.initial_state(), p, 10, 5);
            assert!((f - p).abs() <= tol, "game24 p={p}: {f}");
            let f = viable_fraction(&kk, &kk.initial_state(), p, 2, 6);
            assert!((f - p).abs() <= tol, "kk p={p}: {f}");
        }
        let f = viable_fraction(&g24, &g24.initial_state(), 0.6, 10, 12);
        assert!((f - 0.6).abs() <= 0.015, "{f}");
    }

    #[test]
    fn selection_calibration() {
        let pool = [
            Viability::Inviable,
            Viability::Viable,
            Viability::Inviable,
            Viability::Viable,
            Viability::Inviable,
        ];
        let mut rng = search_rng(21);
        let hits = (0..10_000)
            .filter(|_| {
                let pick = oracle_select(&pool, 1, 0.8, ClassFallback::Fail, &mut rng);
                pool[pick[0]] == Viability::Viable
            })
            .count();
        assert!((hits as f64 / 10_000.0 - 0.8).abs() <= 0.011, "{hits}");
    }

    #[test]
    fn selection_fallbacks() {
        let mut rng = search_rng(2);
        let doomed = [Viability::Inviable, Viability::Inviable];
        assert!(oracle_select(&doomed, 1, 1.0, ClassFallback::Fail, &mut rng).is_empty());
        for p in [0.0, 0.5, 1.0] {
            let pick = oracle_select(&doomed, 1, p, ClassFallback::OtherClass, &mut rng);
            assert_eq!(pick.len(), 1);
        }
        let mixed = [Viability::Viable, Viability::Inviable, Viability::Viable];
        let pick = oracle_select(&mixed, 1, 1.0, ClassFallback::Fail, &mut rng);
        assert_eq!(mixed[pick[0]], Viability::Viable);
        let mut all = oracle_select(&mixed, 5, 1.0, ClassFallback::OtherClass, &mut rng);
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2]);
        let only_viable = oracle_select(&mixed, 5, 1.0, ClassFallback::Fail, &mut rng);
        assert_eq!(only_viable.len(), 2);
    }

    #[test]
    fn random_selection() {
        let mut rng = search_rng(3);
        let mut all = random_select(4, 4, &mut rng);
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2, 3]);
        assert_eq!(random_select(3, 5, &mut rng).len(), 3);
        assert_eq!(
            random_select(10, 2, &mut search_rng(8)),
            random_select(10, 2, &mut search_rng(8))
        );
        let hits = (0..10_000)
            .filter(|_| random_select(5, 1, &mut rng)[0] < 2)
            .count();
        assert!((hits as f64 / 10_000.0 - 0.4).abs() <= 0.013, "{hits}");
    }

    #[test]
    fn determinism() {
        let task = game24();
        let state = task.initial_state();
        let a = oracle_generate(&task, &state, 10, 0.5, &mut search_rng(77));
        let b = oracle_generate(&task, &state, 10, 0.5, &mut search_rng(77));
        assert_eq!(a, b);
    }

    #[test]
    fn agent_specs() {
        assert_eq!(
            "oracle:p=0.8".parse::<AgentSpec>(),
            Ok(AgentSpec::Oracle {
                p: 0.8,
                fallback: ClassFallback::Fail
            })
        );
        assert_eq!(
            "oracle:p=1,fallback=other"
                .parse::<AgentSpec>()
                .unwrap()
                .to_string(),
            "oracle:p=1,fallback=other"
        );
        assert_eq!("random".parse::<AgentSpec>(), Ok(AgentSpec::Random));
        assert_eq!(
            "llm:local".parse::<AgentSpec>(),
            Ok(AgentSpec::Llm("local".into()))
        );
        for bad in ["oracle", "oracle:p=", "oracle:q=1", "llm:", "guess"] {
            assert!(
                matches!(bad.parse::<AgentSpec>(), Err(AgentSpecError::Syntax(_))),
                "{bad}"
            );
        }
        assert!(matches!(
            "oracle:p=1.5".parse::<AgentSpec>(),
            Err(AgentSpecError::Accuracy { .. })
        ));
        assert!(OracleConfig::new(-0.1, OracleRole::Generator).is_err());
    }
}
