//! Rejection sampling of puzzles with a unique solution.

use rand::Rng;
use thiserror::Error;

use super::{
    labels, solve_brute_force, Formula, Identity, KkPuzzle, Statement, MAX_CHARACTERS,
    MIN_CHARACTERS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeneratorConstraints {
    /// Samples tried before giving up.
    pub max_attempts: usize,
}

impl Default for GeneratorConstraints {
    fn default() -> Self {
        GeneratorConstraints {
            max_attempts: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenerateError {
    #[error("{0} characters is outside {MIN_CHARACTERS}..={MAX_CHARACTERS}")]
    CharacterCount(usize),
    #[error("no unique-solution puzzle found in {0} attempts")]
    BudgetExhausted(usize),
}

/// Samples statement sets (every character speaks once, formula depth at
/// most 2, atoms about other characters) until exactly one assignment is
/// consistent, and stores it as the solution.
pub fn generate_puzzle<R: Rng + ?Sized>(
    n: usize,
    rng: &mut R,
    constraints: GeneratorConstraints,
) -> Result<KkPuzzle, GenerateError> {
    if !(MIN_CHARACTERS..=MAX_CHARACTERS).contains(&n) {
        return Err(GenerateError::CharacterCount(n));
    }
    let characters = labels(n);
    for _ in 0..constraints.max_attempts {
        let statements = (0..n)
            .map(|speaker| Statement {
                speaker,
                formula: random_formula(n, speaker, rng),
            })
            .collect();
        let puzzle = KkPuzzle {
            characters: characters.clone(),
            statements,
            solution: None,
        };
        let mut solutions = solve_brute_force(&puzzle);
        if solutions.len() == 1 {
            return Ok(KkPuzzle {
                solution: solutions.pop(),
                ..puzzle
            });
        }
    }
    Err(GenerateError::BudgetExhausted(constraints.max_attempts))
}

fn random_atom<R: Rng + ?Sized>(
    n: usize,
    speaker: usize,
    avoid: Option<usize>,
    rng: &mut R,
) -> Formula {
    let others: Vec<usize> = (0..n)
        .filter(|&c| c != speaker && Some(c) != avoid)
        .collect();
    let pool = if others.is_empty() {
        (0..n).filter(|&c| c != speaker).collect()
    } else {
        others
    };
    let character = pool[rng.gen_range(0..pool.len())];
    let identity = if rng.gen_bool(0.5) {
        Identity::TruthTeller
    } else {
        Identity::Liar
    };
    Formula::is(character, identity)
}

fn random_formula<R: Rng + ?Sized>(n: usize, speaker: usize, rng: &mut R) -> Formula {
    match rng.gen_range(0..5) {
        0 | 1 => random_atom(n, speaker, None, rng),
        2 => Formula::negate(random_atom(n, speaker, None, rng)),
        kind => {
            let a = random_atom(n, speaker, None, rng);
            let Formula::Is(first, _) = a else {
                unreachable!()
            };
            let b = random_atom(n, speaker, Some(first), rng);
            if kind == 3 {
                Formula::and(a, b)
            } else {
                Formula::or(a, b)
            }
        }
    }
}
