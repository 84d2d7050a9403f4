use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Identity {
    #[serde(rename = "truth-teller")]
    TruthTeller,
    #[serde(rename = "liar")]
    Liar,
}

impl Identity {
    pub const BOTH: [Identity; 2] = [Identity::TruthTeller, Identity::Liar];

    pub fn as_str(self) -> &'static str {
        match self {
            Identity::TruthTeller => "truth-teller",
            Identity::Liar => "liar",
        }
    }

    pub fn flip(self) -> Identity {
        match self {
            Identity::TruthTeller => Identity::Liar,
            Identity::Liar => Identity::TruthTeller,
        }
    }

    /// Accepts `truth-teller`, `liar`, and the knight/knave synonyms.
    pub fn parse(word: &str) -> Option<Identity> {
        match word.trim().to_ascii_lowercase().as_str() {
            "truth-teller" | "truthteller" | "truth teller" | "knight" => {
                Some(Identity::TruthTeller)
            }
            "liar" | "knave" => Some(Identity::Liar),
            _ => None,
        }
    }
}

impl fmt::Display for Identity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Propositional statement over identity atoms. Characters are indices into
/// the owning puzzle's character list.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    Is(usize, Identity),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn is(character: usize, identity: Identity) -> Formula {
        Formula::Is(character, identity)
    }

    pub fn negate(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    /// Truth value under a total assignment.
    pub fn eval(&self, assignment: &[Identity]) -> bool {
        match self {
            Formula::Is(c, id) => assignment[*c] == *id,
            Formula::Not(f) => !f.eval(assignment),
            Formula::And(a, b) => a.eval(assignment) && b.eval(assignment),
            Formula::Or(a, b) => a.eval(assignment) || b.eval(assignment),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Formula::Is(..) => 1,
            Formula::Not(f) => 1 + f.depth(),
            Formula::And(a, b) | Formula::Or(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    pub fn max_character(&self) -> usize {
        match self {
            Formula::Is(c, _) => *c,
            Formula::Not(f) => f.max_character(),
            Formula::And(a, b) | Formula::Or(a, b) => a.max_character().max(b.max_character()),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Formula::Or(..) => 1,
            Formula::And(..) => 2,
            Formula::Not(_) | Formula::Is(..) => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatementError {
    #[error("at offset {offset}: expected {expected}, found `{found}`")]
    Syntax {
        offset: usize,
        expected: &'static str,
        found: String,
    },
    #[error("at offset {offset}: unknown character `{label}`")]
    UnknownCharacter { offset: usize, label: String },
}

/// Renders with the fewest parentheses that parse back to the same tree.
pub fn format_statement(formula: &Formula, characters: &[String]) -> String {
    fn go(f: &Formula, chars: &[String], out: &mut String) {
        match f {
            Formula::Is(c, id) => {
                let label = chars.get(*c).map_or("?", String::as_str);
                out.push_str(&format!("{label} is a {id}"));
            }
            Formula::Not(inner) => {
                out.push_str("not ");
                wrap(inner, inner.precedence() < 3, chars, out);
            }
            Formula::And(a, b) | Formula::Or(a, b) => {
                let p = f.precedence();
                let word = if matches!(f, Formula::And(..)) {
                    " and "
                } else {
                    " or "
                };
                wrap(a, a.precedence() < p, chars, out);
                out.push_str(word);
                wrap(b, b.precedence() <= p, chars, out);
            }
        }
    }
    fn wrap(f: &Formula, parens: bool, chars: &[String], out: &mut String) {
        if parens {
            out.push('(');
            go(f, chars, out);
            out.push(')');
        } else {
            go(f, chars, out);
        }
    }
    let mut out = String::new();
    go(formula, characters, &mut out);
    out
}

#[derive(Debug, Clone, PartialEq)]
struct Tok {
    text: String,
    offset: usize,
}

fn tokenize(text: &str) -> Vec<Tok> {
    let mut out = Vec::new();
    let mut current: Option<(usize, String)> = None;
    for (i, ch) in text.char_indices() {
        if ch == '(' || ch == ')' || ch.is_whitespace() {
            if let Some((offset, t)) = current.take() {
                out.push(Tok { text: t, offset });
            }
            if !ch.is_whitespace() {
                out.push(Tok {
                    text: ch.to_string(),
                    offset: i,
                });
            }
        } else {
            current.get_or_insert_with(|| (i, String::new())).1.push(ch);
        }
    }
    if let Some((offset, t)) = current {
        out.push(Tok { text: t, offset });
    }
    out
}

struct Parser<'a> {
    toks: Vec<Tok>,
    pos: usize,
    end: usize,
    characters: &'a [String],
}

impl Parser<'_> {
    fn peek(&self) -> Option<&str> {
        self.toks.get(self.pos).map(|t| t.text.as_str())
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |t| t.offset)
    }

    fn err(&self, expected: &'static str) -> StatementError {
        StatementError::Syntax {
            offset: self.offset(),
            expected,
            found: self.peek().unwrap_or("end of statement").to_string(),
        }
    }

    fn keyword(&self, word: &str) -> bool {
        self.peek().is_some_and(|t| t.eq_ignore_ascii_case(word))
    }

    fn or(&mut self) -> Result<Formula, StatementError> {
        let mut lhs = self.and()?;
        while self.keyword("or") {
            self.pos += 1;
            lhs = Formula::or(lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, StatementError> {
        let mut lhs = self.unary()?;
        while self.keyword("and") {
            self.pos += 1;
            lhs = Formula::and(lhs, self.unary()?);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, StatementError> {
        if self.keyword("not") {
            self.pos += 1;
            return Ok(Formula::negate(self.unary()?));
        }
        if self.peek() == Some("(") {
            self.pos += 1;
            let inner = self.or()?;
            if self.peek() != Some(")") {
                return Err(self.err("`)`"));
            }
            self.pos += 1;
            return Ok(inner);
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Formula, StatementError> {
        let label_offset = self.offset();
        let label = self
            .peek()
            .ok_or_else(|| self.err("a character"))?
            .to_string();
        if !label.chars().next().is_some_and(|c| c.is_ascii_uppercase()) {
            return Err(self.err("a character"));
        }
        let character = self.characters.iter().position(|c| *c == label).ok_or(
            StatementError::UnknownCharacter {
                offset: label_offset,
                label,
            },
        )?;
        self.pos += 1;
        if !self.keyword("is") {
            return Err(self.err("`is`"));
        }
        self.pos += 1;
        if !(self.keyword("a") || self.keyword("an")) {
            return Err(self.err("`a`"));
        }
        self.pos += 1;
        let identity = self
            .peek()
            .and_then(Identity::parse)
            .ok_or_else(|| self.err("`truth-teller` or `liar`"))?;
        self.pos += 1;
        Ok(Formula::is(character, identity))
    }
}

/// Parses `<char> is a truth-teller|liar` atoms joined by `and`, `or`,
/// prefix `not`, and parentheses. `not` binds tighter than `and`, which binds
/// tighter than `or`.
pub fn parse_statement(text: &str, characters: &[String]) -> Result<Formula, StatementError> {
    let trimmed = text.trim().trim_end_matches('.');
    let mut parser = Parser {
        toks: tokenize(trimmed),
        pos: 0,
        end: trimmed.len(),
        characters,
    };
    let formula = parser.or()?;
    if parser.pos != parser.toks.len() {
        return Err(parser.err("end of statement"));
    }
    Ok(formula)
}
