//! JSON-lines puzzle files.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{format_statement, parse_statement, Identity, KkPuzzle, Statement};

/// One puzzle as stored on disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PuzzleRecord {
    pub characters: Vec<String>,
    pub statements: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub solution: BTreeMap<String, Identity>,
}

impl PuzzleRecord {
    pub fn from_puzzle(puzzle: &KkPuzzle) -> Self {
        let statements = puzzle
            .statements
            .iter()
            .map(|s| {
                (
                    puzzle.characters[s.speaker].clone(),
                    format_statement(&s.formula, &puzzle.characters),
                )
            })
            .collect();
        let solution = puzzle
            .solution
            .iter()
            .flat_map(|sol| puzzle.characters.iter().cloned().zip(sol.iter().copied()))
            .collect();
        PuzzleRecord {
            characters: puzzle.characters.clone(),
            statements,
            solution,
        }
    }

    /// Parses the statements and checks the puzzle has exactly one solution,
    /// matching the stored one if present.
    pub fn to_puzzle(&self) -> Result<KkPuzzle, String> {
        let mut statements = Vec::new();
        for (speaker, text) in &self.statements {
            let speaker_index = self
                .characters
                .iter()
                .position(|c| c == speaker)
                .ok_or_else(|| format!("unknown speaker `{speaker}`"))?;
            let formula = parse_statement(&normalize_statement(text), &self.characters)
                .map_err(|e| format!("statement by {speaker}: {e}"))?;
            statements.push(Statement {
                speaker: speaker_index,
                formula,
            });
        }
        statements.sort_by_key(|s| s.speaker);
        let mut puzzle =
            KkPuzzle::new(self.characters.clone(), statements).map_err(|e| e.to_string())?;
        if !self.solution.is_empty() {
            let stored = self
                .characters
                .iter()
                .map(|c| {
                    self.solution
                        .get(c)
                        .copied()
                        .ok_or_else(|| format!("solution is missing `{c}`"))
                })
                .collect::<Result<Vec<_>, _>>()?;
            puzzle.solution = Some(stored);
        }
        puzzle.with_unique_solution().map_err(|e| e.to_string())
    }
}

#[derive(Debug, Error)]
pub enum PuzzleFileError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Record {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

fn rewrite_rules() -> &'static [(Regex, &'static str)] {
    static RULES: OnceLock<Vec<(Regex, &'static str)>> = OnceLock::new();
    RULES.get_or_init(|| {
        [
            (r"(?i)\bknights?\b", "truth-teller"),
            (r"(?i)\bknaves?\b", "liar"),
            (r"(?i)\btruth[\s_]+teller\b", "truth-teller"),
            (r"\b([A-Z]\w*) is not an? ", "not $1 is a "),
            (r"\ban truth-teller\b", "a truth-teller"),
        ]
        .into_iter()
        .map(|(p, r)| (Regex::new(p).expect("static pattern"), r))
        .collect()
    })
}

/// Rewrites common phrasings into the statement grammar: knight/knave
/// synonyms, `X is not a Y`, and a trailing period.
pub fn normalize_statement(text: &str) -> String {
    let mut out = text.trim().trim_end_matches('.').trim().to_string();
    for (re, replacement) in rewrite_rules() {
        out = re.replace_all(&out, *replacement).into_owned();
    }
    out
}

/// Reads one [`PuzzleRecord`] per non-blank line and validates each.
pub fn load_puzzles(path: &Path) -> Result<Vec<KkPuzzle>, PuzzleFileError> {
    let text = fs::read_to_string(path).map_err(|source| PuzzleFileError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record_err = |message: String| PuzzleFileError::Record {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let record: PuzzleRecord =
            serde_json::from_str(line).map_err(|e| record_err(e.to_string()))?;
        out.push(record.to_puzzle().map_err(record_err)?);
    }
    Ok(out)
}

pub fn save_puzzles(path: &Path, puzzles: &[KkPuzzle]) -> Result<(), PuzzleFileError> {
    let mut text = String::new();
    for p in puzzles {
        let line = serde_json::to_string(&PuzzleRecord::from_puzzle(p)).expect("records serialize");
        text.push_str(&line);
        text.push('\n');
    }
    fs::write(path, text).map_err(|source| PuzzleFileError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::search_rng;
    use crate::knights::{generate_puzzle, GeneratorConstraints};

    #[test]
    fn normalization_table() {
        assert_eq!(normalize_statement("B is a knave."), "B is a liar");
        assert_eq!(normalize_statement("A is a Knight"), "A is a truth-teller");
        assert_eq!(
            normalize_statement("C is a truth teller"),
            "C is a truth-teller"
        );
        assert_eq!(normalize_statement("B is not a liar"), "not B is a liar");
        assert_eq!(
            normalize_statement("A is not a knight and C is a knave"),
            "not A is a truth-teller and C is a liar"
        );
    }

    #[test]
    fn save_then_load() {
        let mut rng = search_rng(3);
        let puzzles: Vec<_> = (0..10)
            .map(|_| generate_puzzle(4, &mut rng, GeneratorConstraints::default()).unwrap())
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kk.jsonl");
        save_puzzles(&path, &puzzles).unwrap();
        assert_eq!(load_puzzles(&path).unwrap(), puzzles);
    }

    #[test]
    fn loader_rejects_bad_records() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kk.jsonl");
        let good = r#"{"characters":["A","B","C"],"statements":{"A":"B is a knave.","B":"C is a knave","C":"A is a knave and B is a liar"},"solution":{"A":"liar","B":"truth-teller","C":"liar"}}"#;
        fs::write(&path, format!("{good}\n")).unwrap();
        let loaded = load_puzzles(&path).unwrap();
        assert_eq!(
            loaded[0].solution,
            Some(vec![Identity::Liar, Identity::TruthTeller, Identity::Liar])
        );

        let two_solutions =
            r#"{"characters":["A","B"],"statements":{"A":"B is a liar","B":"A is a liar"}}"#;
        let wrong = r#"{"characters":["A","B","C"],"statements":{"A":"B is a knave.","B":"C is a knave","C":"A is a knave and B is a liar"},"solution":{"A":"truth-teller","B":"liar","C":"truth-teller"}}"#;
        let unknown = r#"{"characters":["A","B"],"statements":{"A":"D is a liar"}}"#;
        for (bad, needle) in [
            (two_solutions, "2 solutions"),
            (wrong, "stored solution"),
            (unknown, "unknown character"),
            ("{not json", "key must be a string"),
        ] {
            fs::write(&path, format!("\n{bad}\n")).unwrap();
            let err = load_puzzles(&path).unwrap_err();
            assert!(
                matches!(err, PuzzleFileError::Record { line: 2, .. }),
                "{err}"
            );
            assert!(err.to_string().contains(needle), "{err}");
        }
    }
}
