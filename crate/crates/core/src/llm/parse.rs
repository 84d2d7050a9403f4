use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::engine::Verdict;
use crate::game24::is_step_line;
use crate::knights::{conclusion_lines, Identity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Game24,
    Kk,
}

/// Step lines in `text`, trimmed, in order. Lines that do not have the
/// task's step shape are dropped.
pub fn parse_generation(text: &str, kind: TaskKind) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|line| match kind {
            TaskKind::Game24 => is_step_line(line),
            TaskKind::Kk => !conclusion_lines(line).is_empty(),
        })
        .map(str::to_string)
        .collect()
}

fn verdict_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(confident|likely|impossible)\b").expect("verdict regex"))
}

/// The last verdict keyword in the text, scanning lines from the end.
pub fn parse_value(text: &str) -> Option<Verdict> {
    text.lines().rev().find_map(|line| {
        let word = verdict_regex()
            .find_iter(line)
            .last()?
            .as_str()
            .to_ascii_lowercase();
        Some(match word.as_str() {
            "confident" => Verdict::Confident,
            "likely" => Verdict::Likely,
            _ => Verdict::Impossible,
        })
    })
}

fn vote_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)best\s+choice\s+is\s*:?\s*\{?\s*(\d+)").expect("vote regex"))
}

/// The 1-based choice named by the last `best choice is N`, or `None` when
/// there is no such phrase or `N` is outside `1..=n_choices`.
pub fn parse_vote(text: &str, n_choices: usize) -> Option<usize> {
    let caps = vote_regex().captures_iter(text).last()?;
    let choice: usize = caps[1].parse().ok()?;
    (1..=n_choices).contains(&choice).then_some(choice)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParsedAnswer {
    /// Text after the last `Answer:` marker.
    Expression(String),
    /// Identity lines after the last `CONCLUSION:` marker.
    Assignment(Vec<(String, Identity)>),
}

pub fn parse_final_answer(text: &str, kind: TaskKind) -> Option<ParsedAnswer> {
    match kind {
        TaskKind::Game24 => text.lines().rev().find_map(|line| {
            let rest = line.trim().strip_prefix("Answer:")?.trim();
            (!rest.is_empty()).then(|| ParsedAnswer::Expression(rest.to_string()))
        }),
        TaskKind::Kk => {
            let pos = text.rfind("CONCLUSION:")?;
            let lines = conclusion_lines(&text[pos + "CONCLUSION:".len()..]);
            (!lines.is_empty()).then_some(ParsedAnswer::Assignment(lines))
        }
    }
}
