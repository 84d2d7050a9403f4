use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    Io24,
    Cot24,
    Gen24,
    Merge24,
    Value24,
    ValueLast24,
    IoKk,
    CotKk,
    GenKk,
    VoteKk,
}

const IO_24: &str = include_str!("templates/io_24.txt");
const COT_24: &str = include_str!("templates/cot_24.txt");
const GEN_24: &str = include_str!("templates/gen_24.txt");
const MERGE_24: &str = include_str!("templates/merge_24.txt");
const VALUE_24: &str = include_str!("templates/value_24.txt");
const VALUE_LAST_24: &str = include_str!("templates/value_last_24.txt");
const IO_KK: &str = include_str!("templates/io_kk.txt");
const GEN_KK: &str = include_str!("templates/gen_kk.txt");
const VOTE_KK: &str = include_str!("templates/vote_kk.txt");

/// System message sent with every Knights and Knaves answer prompt.
pub const SYSTEM_KK: &str = include_str!("templates/system_kk.txt");

const COT_SUFFIX: &str = "\n\nLet's think step by step.";

impl TemplateId {
    pub const ALL: [TemplateId; 10] = [
        TemplateId::Io24,
        TemplateId::Cot24,
        TemplateId::Gen24,
        TemplateId::Merge24,
        TemplateId::Value24,
        TemplateId::ValueLast24,
        TemplateId::IoKk,
        TemplateId::CotKk,
        TemplateId::GenKk,
        TemplateId::VoteKk,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::Io24 => "io_24",
            TemplateId::Cot24 => "cot_24",
            TemplateId::Gen24 => "gen_24",
            TemplateId::Merge24 => "merge_24",
            TemplateId::Value24 => "value_24",
            TemplateId::ValueLast24 => "value_last_24",
            TemplateId::IoKk => "io_kk",
            TemplateId::CotKk => "cot_kk",
            TemplateId::GenKk => "gen_kk",
            TemplateId::VoteKk => "vote_kk",
        }
    }

    /// Raw template text with `<name>` placeholders.
    pub fn body(self) -> &'static str {
        static COT_KK: OnceLock<String> = OnceLock::new();
        match self {
            TemplateId::Io24 => IO_24,
            TemplateId::Cot24 => COT_24,
            TemplateId::Gen24 => GEN_24,
            TemplateId::Merge24 => MERGE_24,
            TemplateId::Value24 => VALUE_24,
            TemplateId::ValueLast24 => VALUE_LAST_24,
            TemplateId::IoKk => IO_KK,
            TemplateId::CotKk => COT_KK.get_or_init(|| format!("{IO_KK}{COT_SUFFIX}")),
            TemplateId::GenKk => GEN_KK,
            TemplateId::VoteKk => VOTE_KK,
        }
    }

    /// System message to pair with this template, if any.
    pub fn system(self) -> Option<&'static str> {
        matches!(self, TemplateId::IoKk | TemplateId::CotKk).then_some(SYSTEM_KK)
    }

    pub fn placeholders(self) -> BTreeSet<&'static str> {
        placeholder_regex()
            .captures_iter(self.body())
            .map(|c| c.get(1).expect("group").as_str())
            .collect()
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn placeholder_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"<([a-z][a-z_ -]*[a-z])>").expect("placeholder regex"))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("template {template} needs a binding for <{name}>")]
    Missing { template: TemplateId, name: String },
    #[error("template {template} has no placeholder <{name}>")]
    Extra { template: TemplateId, name: String },
}

/// Substitutes every placeholder in one pass; bound text is never rescanned.
pub fn render_prompt(
    id: TemplateId,
    bindings: &BTreeMap<&str, String>,
) -> Result<String, TemplateError> {
    let wanted = id.placeholders();
    if let Some(name) = wanted.iter().find(|n| !bindings.contains_key(*n)) {
        return Err(TemplateError::Missing {
            template: id,
            name: name.to_string(),
        });
    }
    if let Some(name) = bindings.keys().find(|n| !wanted.contains(*n)) {
        return Err(TemplateError::Extra {
            template: id,
            name: name.to_string(),
        });
    }
    Ok(placeholder_regex()
        .replace_all(id.body(), |c: &regex::Captures<'_>| bindings[&c[1]].clone())
        .into_owned())
}
