//! Puzzle files: delimited text with one column holding `a b c d`.

use std::fs::File;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Puzzle24, Solution};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSpec {
    pub column: ColumnRef,
    pub delimiter: u8,
    pub has_header: bool,
}

impl ColumnSpec {
    pub fn named(name: impl Into<String>) -> Self {
        ColumnSpec {
            column: ColumnRef::Name(name.into()),
            delimiter: b',',
            has_header: true,
        }
    }

    /// Headerless file, puzzle in column `index`.
    pub fn index(index: usize) -> Self {
        ColumnSpec {
            column: ColumnRef::Index(index),
            delimiter: b',',
            has_header: false,
        }
    }
}

impl Default for ColumnSpec {
    fn default() -> Self {
        ColumnSpec::named("Puzzles")
    }
}

#[derive(Debug, Error)]
pub enum PuzzleFileError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: no column named `{column}`")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path}:{line}: {message}")]
    Row {
        path: PathBuf,
        line: u64,
        message: String,
    },
}

/// Reads puzzles in file order; `rank` is the data-row index.
pub fn load_puzzles(path: &Path, spec: &ColumnSpec) -> Result<Vec<Puzzle24>, PuzzleFileError> {
    let file = File::open(path).map_err(|source| PuzzleFileError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(spec.delimiter)
        .has_headers(spec.has_header)
        .flexible(true)
        .from_reader(file);
    let csv_err = |source| PuzzleFileError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let column = match &spec.column {
        ColumnRef::Index(i) => *i,
        ColumnRef::Name(name) => {
            let headers = reader.headers().map_err(csv_err)?;
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| PuzzleFileError::MissingColumn {
                    path: path.to_path_buf(),
                    column: name.clone(),
                })?
        }
    };
    let mut out = Vec::new();
    for (rank, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        let row_err = |message: String| PuzzleFileError::Row {
            path: path.to_path_buf(),
            line,
            message,
        };
        let cell = record
            .get(column)
            .ok_or_else(|| row_err(format!("missing column {column}")))?;
        let numbers = cell
            .split_whitespace()
            .map(|t| t.parse::<i64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| row_err(format!("`{cell}`: {e}")))?;
        let mut puzzle =
            Puzzle24::from_slice(&numbers).map_err(|e| row_err(format!("`{cell}`: {e}")))?;
        puzzle.rank = Some(rank);
        out.push(puzzle);
    }
    Ok(out)
}

/// Writes `rank,Puzzles` rows readable by [`load_puzzles`] with the default spec.
pub fn write_puzzles(path: &Path, puzzles: &[Puzzle24]) -> Result<(), PuzzleFileError> {
    let mut writer = csv::Writer::from_path(path).map_err(|source| PuzzleFileError::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    let csv_err = |source| PuzzleFileError::Csv {
        path: path.to_path_buf(),
        source,
    };
    writer.write_record(["Rank", "Puzzles"]).map_err(csv_err)?;
    for (i, p) in puzzles.iter().enumerate() {
        let rank = p.rank.unwrap_or(i).to_string();
        writer
            .write_record([rank, p.to_string()])
            .map_err(csv_err)?;
    }
    writer.flush().map_err(|source| PuzzleFileError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// One line of a solution dump.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub puzzle: String,
    pub steps: Vec<String>,
    pub expression: String,
}

impl SolutionRecord {
    pub fn new(puzzle: &Puzzle24, solution: &Solution) -> Self {
        SolutionRecord {
            puzzle: puzzle.to_string(),
            steps: solution.steps.iter().map(|s| s.to_string()).collect(),
            expression: solution.answer_text(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_named_column_in_file_order() {
        let f = file("Rank,Puzzles,AMT (s)\n1,1 1 4 6,4.4\n2,1 1 11 11,4.5\n");
        let puzzles = load_puzzles(f.path(), &ColumnSpec::named("Puzzles")).unwrap();
        assert_eq!(puzzles.len(), 2);
        assert_eq!(puzzles[0].numbers, [1, 1, 4, 6]);
        assert_eq!(puzzles[0].rank, Some(0));
        assert_eq!(puzzles[1].rank, Some(1));
    }

    #[test]
    fn row_errors_carry_line_numbers() {
        let f = file("Puzzles\n1 1 4 6\n1 1 4\n");
        let err = load_puzzles(f.path(), &ColumnSpec::named("Puzzles")).unwrap_err();
        assert!(matches!(err, PuzzleFileError::Row { line: 3, .. }), "{err}");
        let f = file("Puzzles\n1 1 4 20\n");
        let err = load_puzzles(f.path(), &ColumnSpec::named("Puzzles")).unwrap_err();
        assert!(err.to_string().contains("outside 1..=13"), "{err}");
    }

    #[test]
    fn missing_file_and_column() {
        let err =
            load_puzzles(Path::new("/nonexistent/24.csv"), &ColumnSpec::default()).unwrap_err();
        assert!(matches!(err, PuzzleFileError::Io { .. }));
        let f = file("a,b\n1,2\n");
        let err = load_puzzles(f.path(), &ColumnSpec::named("Puzzles")).unwrap_err();
        assert!(matches!(err, PuzzleFileError::MissingColumn { .. }));
    }

    #[test]
    fn headerless_tab_separated() {
        let f = file("x\t3 3 8 8\n");
        let spec = ColumnSpec {
            delimiter: b'\t',
            ..ColumnSpec::index(1)
        };
        let puzzles = load_puzzles(f.path(), &spec).unwrap();
        assert_eq!(puzzles[0].numbers, [3, 3, 8, 8]);
    }

    #[test]
    fn write_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let puzzles = vec![
            Puzzle24::with_rank([1, 2, 3, 4], 0).unwrap(),
            Puzzle24::with_rank([4, 9, 10, 13], 1).unwrap(),
        ];
        write_puzzles(&path, &puzzles).unwrap();
        assert_eq!(
            load_puzzles(&path, &ColumnSpec::default()).unwrap(),
            puzzles
        );
    }
}
