//! Knights and Knaves: every character is a truth-teller or a liar, and each
//! makes a statement about the others. A puzzle is solved by the assignment
//! under which exactly the truth-tellers' statements hold.
//!
//! As a search task, characters are assigned one at a time in label order,
//! so the tree is a full binary tree of depth `n`.

mod formula;
mod generate;
mod io;

use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use crate::engine::{AnswerCheck, Environment};

pub use formula::{format_statement, parse_statement, Formula, Identity, StatementError};
pub use generate::{generate_puzzle, GenerateError, GeneratorConstraints};
pub use io::{load_puzzles, normalize_statement, save_puzzles, PuzzleFileError, PuzzleRecord};

pub const MIN_CHARACTERS: usize = 2;
pub const MAX_CHARACTERS: usize = 6;

/// Default labels `A`, `B`, ... for `n` characters.
pub fn labels(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| ((b'A' + i as u8) as char).to_string())
        .collect()
}

/// Possibly partial map from character index to identity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Assignment(pub Vec<Option<Identity>>);

impl Assignment {
    pub fn empty(n: usize) -> Self {
        Assignment(vec![None; n])
    }

    pub fn total(ids: &[Identity]) -> Self {
        Assignment(ids.iter().copied().map(Some).collect())
    }

    pub fn is_total(&self) -> bool {
        self.0.iter().all(Option::is_some)
    }

    pub fn as_total(&self) -> Option<Vec<Identity>> {
        self.0.iter().copied().collect()
    }

    pub fn agrees_with(&self, total: &[Identity]) -> bool {
        self.0
            .iter()
            .zip(total)
            .all(|(a, t)| a.is_none_or(|a| a == *t))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Statement {
    pub speaker: usize,
    pub formula: Formula,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KkPuzzle {
    pub characters: Vec<String>,
    pub statements: Vec<Statement>,
    pub solution: Option<Vec<Identity>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KkError {
    #[error("{0} characters is outside {MIN_CHARACTERS}..={MAX_CHARACTERS}")]
    CharacterCount(usize),
    #[error("statement by character {speaker} mentions character {mentioned}, puzzle has {count}")]
    UnknownCharacter {
        speaker: usize,
        mentioned: usize,
        count: usize,
    },
    #[error("puzzle has {0} solutions, expected exactly one")]
    NotUnique(usize),
    #[error("stored solution is not the puzzle's unique solution")]
    WrongSolution,
}

impl KkPuzzle {
    /// Checks structure only; see [`KkPuzzle::with_unique_solution`].
    pub fn new(characters: Vec<String>, statements: Vec<Statement>) -> Result<Self, KkError> {
        let n = characters.len();
        if !(MIN_CHARACTERS..=MAX_CHARACTERS).contains(&n) {
            return Err(KkError::CharacterCount(n));
        }
        for s in &statements {
            let mentioned = s.formula.max_character().max(s.speaker);
            if mentioned >= n {
                return Err(KkError::UnknownCharacter {
                    speaker: s.speaker,
                    mentioned,
                    count: n,
                });
            }
        }
        Ok(KkPuzzle {
            characters,
            statements,
            solution: None,
        })
    }

    /// Solves by brute force and stores the solution; errors unless unique.
    pub fn with_unique_solution(mut self) -> Result<Self, KkError> {
        let solutions = solve_brute_force(&self);
        if solutions.len() != 1 {
            return Err(KkError::NotUnique(solutions.len()));
        }
        if let Some(stored) = &self.solution {
            if *stored != solutions[0] {
                return Err(KkError::WrongSolution);
            }
        }
        self.solution = solutions.into_iter().next();
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.characters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.characters.is_empty()
    }

    pub fn is_consistent(&self, assignment: &[Identity]) -> bool {
        self.statements
            .iter()
            .all(|s| (assignment[s.speaker] == Identity::TruthTeller) == s.formula.eval(assignment))
    }

    /// One `X says: ...` line per statement.
    pub fn statements_text(&self) -> String {
        self.statements
            .iter()
            .map(|s| {
                format!(
                    "{} says: {}",
                    self.characters[s.speaker],
                    format_statement(&s.formula, &self.characters)
                )
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn format_assignment(&self, ids: &[Identity]) -> String {
        self.characters
            .iter()
            .zip(ids)
            .map(|(c, id)| format!("{c}: {id}"))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Every total assignment under which each speaker is a truth-teller exactly
/// when their statement holds. Assignments are enumerated with character 0
/// as the most significant bit, truth-teller before liar.
pub fn solve_brute_force(puzzle: &KkPuzzle) -> Vec<Vec<Identity>> {
    let n = puzzle.len();
    (0u32..1 << n)
        .map(|mask| {
            (0..n)
                .map(|i| {
                    if mask >> (n - 1 - i) & 1 == 0 {
                        Identity::TruthTeller
                    } else {
                        Identity::Liar
                    }
                })
                .collect::<Vec<_>>()
        })
        .filter(|a| puzzle.is_consistent(a))
        .collect()
}

/// Whether `partial` can be extended to a solution. Uses the stored solution
/// when present, otherwise searches the extensions.
pub fn is_viable_partial(puzzle: &KkPuzzle, partial: &Assignment) -> bool {
    match &puzzle.solution {
        Some(solution) => partial.agrees_with(solution),
        None => solve_brute_force(puzzle)
            .iter()
            .any(|s| partial.agrees_with(s)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KkVerdictError {
    #[error("assignment is incomplete")]
    Incomplete,
    #[error("assignment differs from the solution")]
    Wrong,
    #[error("puzzle has no unique solution")]
    NoSolution,
}

pub fn verify_assignment(puzzle: &KkPuzzle, assignment: &Assignment) -> Result<(), KkVerdictError> {
    let Some(total) = assignment.as_total() else {
        return Err(KkVerdictError::Incomplete);
    };
    if total.len() != puzzle.len() {
        return Err(KkVerdictError::Incomplete);
    }
    let solution = match &puzzle.solution {
        Some(s) => s.clone(),
        None => {
            let all = solve_brute_force(puzzle);
            if all.len() != 1 {
                return Err(KkVerdictError::NoSolution);
            }
            all[0].clone()
        }
    };
    if total == solution {
        Ok(())
    } else {
        Err(KkVerdictError::Wrong)
    }
}

fn conclusion_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?i)^\W*([A-Z][A-Za-z0-9]*)\W*:\W*(truth-teller|truthteller|liar|knight|knave)\b",
        )
        .expect("conclusion regex")
    })
}

/// `(label, identity)` pairs from lines shaped like `B: liar`, in order.
pub fn conclusion_lines(text: &str) -> Vec<(String, Identity)> {
    text.lines()
        .filter_map(|line| {
            let caps = conclusion_line().captures(line.trim())?;
            Some((caps[1].to_string(), Identity::parse(&caps[2])?))
        })
        .collect()
}

/// Reads an assignment from the block after `CONCLUSION:` (or the whole text
/// when the marker is absent). Later lines override earlier ones.
pub fn parse_assignment(text: &str, characters: &[String]) -> Assignment {
    let body = text
        .rfind("CONCLUSION:")
        .map_or(text, |pos| &text[pos + "CONCLUSION:".len()..]);
    let mut out = Assignment::empty(characters.len());
    for (label, id) in conclusion_lines(body) {
        if let Some(i) = characters.iter().position(|c| *c == label) {
            out.0[i] = Some(id);
        }
    }
    out
}

/// Identities fixed so far, for the first `len()` characters in label order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct KkState {
    pub assigned: Vec<Identity>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct KkStep {
    pub character: usize,
    pub identity: Identity,
}

/// One Knights and Knaves puzzle as a search environment.
#[derive(Debug, Clone)]
pub struct KkTask {
    pub puzzle: KkPuzzle,
    pub id: String,
}

impl KkTask {
    /// Fills in the solution by brute force when it is missing.
    pub fn new(puzzle: KkPuzzle, id: impl Into<String>) -> Result<Self, KkError> {
        let puzzle = if puzzle.solution.is_some() {
            puzzle
        } else {
            puzzle.with_unique_solution()?
        };
        Ok(KkTask {
            puzzle,
            id: id.into(),
        })
    }

    pub fn partial(&self, state: &KkState) -> Assignment {
        let mut a = Assignment::empty(self.puzzle.len());
        for (i, id) in state.assigned.iter().enumerate() {
            a.0[i] = Some(*id);
        }
        a
    }

    /// `A: truth-teller` lines for the assigned prefix, or `None`.
    pub fn known_identities_text(&self, state: &KkState) -> String {
        if state.assigned.is_empty() {
            "None".to_string()
        } else {
            self.puzzle.format_assignment(&state.assigned)
        }
    }

    pub fn next_character(&self, state: &KkState) -> Option<&str> {
        self.puzzle
            .characters
            .get(state.assigned.len())
            .map(String::as_str)
    }
}

impl fmt::Display for KkStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}: {}", self.character, self.identity)
    }
}

impl Environment for KkTask {
    type State = KkState;
    type Step = KkStep;

    fn task_id(&self) -> String {
        self.id.clone()
    }

    fn initial_state(&self) -> KkState {
        KkState::default()
    }

    fn depth(&self) -> usize {
        self.puzzle.len()
    }

    fn legal_steps(&self, state: &KkState) -> Vec<KkStep> {
        let d = state.assigned.len();
        if d >= self.puzzle.len() {
            return Vec::new();
        }
        Identity::BOTH
            .iter()
            .map(|&identity| KkStep {
                character: d,
                identity,
            })
            .collect()
    }

    fn format_step(&self, _state: &KkState, step: &KkStep) -> String {
        format!(
            "{}: {}",
            self.puzzle.characters[step.character], step.identity
        )
    }

    fn parse_step(&self, state: &KkState, text: &str) -> Result<KkStep, String> {
        let Some(expected) = self.next_character(state) else {
            return Err("every character is already assigned".into());
        };
        let (label, identity) = conclusion_lines(text)
            .pop()
            .ok_or_else(|| "no `<character>: truth-teller/liar` line".to_string())?;
        if label != expected {
            return Err(format!("expected the identity of {expected}, got {label}"));
        }
        Ok(KkStep {
            character: state.assigned.len(),
            identity,
        })
    }

    fn apply(&self, state: &KkState, step: &KkStep) -> KkState {
        let mut next = state.clone();
        next.assigned.push(step.identity);
        next
    }

    fn step_viability(&self, state: &KkState, step: &KkStep) -> Option<bool> {
        let mut partial = self.partial(state);
        partial.0[step.character] = Some(step.identity);
        Some(is_viable_partial(&self.puzzle, &partial))
    }

    fn canonical_step(&self, state: &KkState, step: &KkStep) -> String {
        self.format_step(state, step)
    }

    fn final_answer(&self, state: &KkState) -> Option<String> {
        (state.assigned.len() == self.puzzle.len()).then(|| {
            format!(
                "CONCLUSION:\n{}",
                self.puzzle.format_assignment(&state.assigned)
            )
        })
    }

    fn verify_answer(&self, answer: &str) -> AnswerCheck {
        let assignment = parse_assignment(answer, &self.puzzle.characters);
        if assignment.0.iter().all(Option::is_none) {
            return AnswerCheck::Unparseable("no identity lines".into());
        }
        match verify_assignment(&self.puzzle, &assignment) {
            Ok(()) => AnswerCheck::Correct,
            Err(e) => AnswerCheck::Incorrect(e.to_string()),
        }
    }
}
