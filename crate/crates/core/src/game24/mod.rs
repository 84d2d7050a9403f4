//! Game of 24: combine four integers in 1..=13 with `+ - * /` to reach 24.
//!
//! A search state holds the numbers still in play and the steps taken so far.
//! Three pairwise steps reduce four numbers to one; the fourth move merges
//! the history into a single answer equation. All arithmetic is exact.

mod expr;
mod number;
mod puzzles;
mod solver;
mod step;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{AnswerCheck, Environment};

pub use expr::{
    answer_expression_text, parse_expression, verify_answer, AnswerError, Expr, ExprError,
};
pub use number::{format_number, parse_number, Rational};
pub use puzzles::{
    load_puzzles, write_puzzles, ColumnRef, ColumnSpec, PuzzleFileError, SolutionRecord,
};
pub use solver::{
    all_multisets, enumerate_solvable_puzzles, is_viable, merge_steps, solve_all, Solution,
    ViabilityCache,
};
pub use step::{
    is_step_line, legal_steps, parse_step, validate_step, InvalidStep, Op, Step, StepParseError,
    TooFewNumbers,
};

pub const TARGET: i64 = 24;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Puzzle24 {
    pub numbers: [i64; 4],
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rank: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PuzzleError {
    #[error("expected 4 numbers, got {0}")]
    Arity(usize),
    #[error("{0} is outside 1..=13")]
    Range(i64),
}

impl Puzzle24 {
    pub fn new(numbers: [i64; 4]) -> Result<Self, PuzzleError> {
        for n in numbers {
            if !(1..=13).contains(&n) {
                return Err(PuzzleError::Range(n));
            }
        }
        Ok(Puzzle24 {
            numbers,
            rank: None,
        })
    }

    pub fn with_rank(numbers: [i64; 4], rank: usize) -> Result<Self, PuzzleError> {
        let mut p = Self::new(numbers)?;
        p.rank = Some(rank);
        Ok(p)
    }

    pub fn from_slice(numbers: &[i64]) -> Result<Self, PuzzleError> {
        let arr: [i64; 4] = numbers
            .try_into()
            .map_err(|_| PuzzleError::Arity(numbers.len()))?;
        Self::new(arr)
    }

    pub fn sorted(&self) -> [i64; 4] {
        let mut n = self.numbers;
        n.sort_unstable();
        n
    }
}

impl fmt::Display for Puzzle24 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.numbers;
        write!(f, "{a} {b} {c} {d}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Game24State {
    /// Sorted.
    pub remaining: Vec<Rational>,
    pub history: Vec<Step>,
    pub answer: Option<String>,
}

impl Game24State {
    pub fn new(puzzle: &Puzzle24) -> Self {
        let mut remaining: Vec<Rational> = puzzle
            .numbers
            .iter()
            .map(|&n| Rational::from_integer(n))
            .collect();
        remaining.sort();
        Game24State {
            remaining,
            history: Vec::new(),
            answer: None,
        }
    }

    pub fn depth(&self) -> usize {
        self.history.len() + usize::from(self.answer.is_some())
    }

    /// Space-separated remaining numbers, as shown to a model.
    pub fn remaining_text(&self) -> String {
        self.remaining
            .iter()
            .map(format_number)
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// A move from a state: a pairwise step, or the final merged answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Move24 {
    Combine(Step),
    Answer(Expr),
}

/// One Game of 24 instance as a search environment.
#[derive(Debug, Clone)]
pub struct Game24Task {
    pub puzzle: Puzzle24,
    pub id: String,
}

impl Game24Task {
    pub fn new(puzzle: Puzzle24) -> Self {
        let id = match puzzle.rank {
            Some(rank) => format!("g24-{rank}"),
            None => {
                let [a, b, c, d] = puzzle.numbers;
                format!("g24-{a}-{b}-{c}-{d}")
            }
        };
        Game24Task { puzzle, id }
    }

    pub fn with_id(puzzle: Puzzle24, id: impl Into<String>) -> Self {
        Game24Task {
            puzzle,
            id: id.into(),
        }
    }

    fn answer_move(&self, text: &str) -> Result<Expr, String> {
        let expr = parse_expression(answer_expression_text(text)).map_err(|e| e.to_string())?;
        let mut input: Vec<Rational> = self
            .puzzle
            .numbers
            .iter()
            .map(|&n| Rational::from_integer(n))
            .collect();
        input.sort();
        if expr.leaves() != input {
            return Err("answer does not use each input number exactly once".into());
        }
        expr.eval().map_err(|e| e.to_string())?;
        Ok(expr)
    }
}

fn answer_text(expr: &Expr) -> String {
    let value = expr
        .eval()
        .map(|v| format_number(&v))
        .unwrap_or_else(|_| "?".into());
    format!("Answer: {expr} = {value}")
}

impl Environment for Game24Task {
    type State = Game24State;
    type Step = Move24;

    fn task_id(&self) -> String {
        self.id.clone()
    }

    fn initial_state(&self) -> Game24State {
        Game24State::new(&self.puzzle)
    }

    fn depth(&self) -> usize {
        4
    }

    fn expansion_cap(&self, state: &Game24State) -> Option<usize> {
        (state.remaining.len() < 2).then_some(1)
    }

    fn legal_steps(&self, state: &Game24State) -> Vec<Move24> {
        if state.answer.is_some() {
            return Vec::new();
        }
        if state.remaining.len() >= 2 {
            legal_steps(&state.remaining)
                .map(|v| v.into_iter().map(Move24::Combine).collect())
                .unwrap_or_default()
        } else {
            merge_steps(&self.puzzle.numbers, &state.history)
                .map(|e| vec![Move24::Answer(e)])
                .unwrap_or_default()
        }
    }

    fn format_step(&self, _state: &Game24State, step: &Move24) -> String {
        match step {
            Move24::Combine(s) => s.to_string(),
            Move24::Answer(e) => answer_text(e),
        }
    }

    fn parse_step(&self, state: &Game24State, text: &str) -> Result<Move24, String> {
        if state.answer.is_some() {
            return Err("state is terminal".into());
        }
        if state.remaining.len() >= 2 {
            let step = parse_step(text).map_err(|e| e.to_string())?;
            validate_step(&state.remaining, &step).map_err(|e| e.to_string())?;
            Ok(Move24::Combine(step))
        } else {
            self.answer_move(text).map(Move24::Answer)
        }
    }

    fn apply(&self, state: &Game24State, step: &Move24) -> Game24State {
        let mut next = state.clone();
        match step {
            Move24::Combine(s) => {
                next.remaining = s.left_after.clone();
                next.history.push(s.clone());
            }
            Move24::Answer(e) => next.answer = Some(answer_text(e)),
        }
        next
    }

    fn step_viability(&self, _state: &Game24State, step: &Move24) -> Option<bool> {
        Some(match step {
            Move24::Combine(s) => is_viable(&s.left_after),
            Move24::Answer(e) => e.eval() == Ok(Rational::from_integer(TARGET)),
        })
    }

    fn canonical_step(&self, _state: &Game24State, step: &Move24) -> String {
        match step {
            Move24::Combine(s) => s.canonical(),
            Move24::Answer(e) => e.to_string(),
        }
    }

    fn final_answer(&self, state: &Game24State) -> Option<String> {
        state.answer.clone()
    }

    fn verify_answer(&self, answer: &str) -> AnswerCheck {
        match verify_answer(&self.puzzle.numbers, answer) {
            Ok(()) => AnswerCheck::Correct,
            Err(e) if e.is_unparseable() => AnswerCheck::Unparseable(e.to_string()),
            Err(e) => AnswerCheck::Incorrect(e.to_string()),
        }
    }
}
