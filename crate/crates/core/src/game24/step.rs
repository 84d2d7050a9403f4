//! The `a op b = c (left: ...)` step grammar, validation and move enumeration.

use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::number::{
    checked_apply, format_number, is_decimal_token, parse_number, within_slack, Rational,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
}

impl Op {
    pub const ALL: [Op; 4] = [Op::Add, Op::Sub, Op::Mul, Op::Div];

    pub fn symbol(self) -> &'static str {
        match self {
            Op::Add => "+",
            Op::Sub => "-",
            Op::Mul => "*",
            Op::Div => "/",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Op> {
        match s {
            "+" => Some(Op::Add),
            "-" | "−" => Some(Op::Sub),
            "*" | "×" | "x" => Some(Op::Mul),
            "/" | "÷" => Some(Op::Div),
            _ => None,
        }
    }

    pub fn is_commutative(self) -> bool {
        matches!(self, Op::Add | Op::Mul)
    }

    pub fn apply(self, lhs: &Rational, rhs: &Rational) -> Option<Rational> {
        checked_apply(self, lhs, rhs)
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// One pairwise operation together with the numbers left afterwards.
///
/// `left_after` is kept sorted so two steps compare equal regardless of the
/// order the leftovers were written in.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Step {
    pub lhs: Rational,
    pub op: Op,
    pub rhs: Rational,
    pub result: Rational,
    pub left_after: Vec<Rational>,
}

impl Step {
    /// Builds the step that combines `remaining[i]` and `remaining[j]`.
    pub fn from_positions(remaining: &[Rational], i: usize, j: usize, op: Op) -> Option<Step> {
        let (lhs, rhs) = (remaining[i], remaining[j]);
        let result = op.apply(&lhs, &rhs)?;
        let mut left_after: Vec<Rational> = remaining
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != i && k != j)
            .map(|(_, v)| *v)
            .collect();
        left_after.push(result);
        left_after.sort();
        Some(Step {
            lhs,
            op,
            rhs,
            result,
            left_after,
        })
    }

    /// Dedup key: operands sorted for `+` and `*`, leftovers sorted.
    pub fn canonical(&self) -> String {
        let (a, b) = if self.op.is_commutative() && self.rhs < self.lhs {
            (self.rhs, self.lhs)
        } else {
            (self.lhs, self.rhs)
        };
        Step {
            lhs: a,
            op: self.op,
            rhs: b,
            result: self.result,
            left_after: self.left_after.clone(),
        }
        .to_string()
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let left: Vec<String> = self.left_after.iter().map(format_number).collect();
        write!(
            f,
            "{} {} {} = {} (left: {})",
            format_number(&self.lhs),
            self.op,
            format_number(&self.rhs),
            format_number(&self.result),
            left.join(" ")
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StepParseError {
    #[error("text does not match `a op b = c (left: ...)`")]
    Grammar,
    #[error("bad number `{0}`")]
    Number(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("arithmetic overflow")]
    Overflow,
    #[error("{lhs} {op} {rhs} is {expected}, not {written}")]
    Arithmetic {
        lhs: String,
        op: Op,
        rhs: String,
        expected: String,
        written: String,
    },
}

pub(crate) fn step_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(-?[0-9][0-9./]*)\s+([-+*/×÷−x])\s+(-?[0-9][0-9./]*)\s*=\s*(-?[0-9][0-9./]*)\s*\(\s*left:\s*([^)]*)\)",
        )
        .expect("step regex")
    })
}

/// Whether `text` has the shape of a step line, whatever its arithmetic.
pub fn is_step_line(text: &str) -> bool {
    let trimmed = text.trim();
    step_regex()
        .find(trimmed)
        .is_some_and(|m| m.start() == 0 && m.end() == trimmed.len())
}

/// Parses one step line. Surrounding whitespace is allowed, nothing else.
pub fn parse_step(text: &str) -> Result<Step, StepParseError> {
    let trimmed = text.trim();
    let caps = step_regex()
        .captures(trimmed)
        .ok_or(StepParseError::Grammar)?;
    let whole = caps.get(0).expect("match");
    if whole.start() != 0 || whole.end() != trimmed.len() {
        return Err(StepParseError::Grammar);
    }
    let num = |s: &str| parse_number(s).ok_or_else(|| StepParseError::Number(s.to_string()));
    let lhs = num(&caps[1])?;
    let op = Op::from_symbol(&caps[2]).ok_or(StepParseError::Grammar)?;
    let rhs = num(&caps[3])?;
    let result_token = &caps[4];
    let written = num(result_token)?;
    if op == Op::Div && rhs == Rational::from_integer(0) {
        return Err(StepParseError::DivisionByZero);
    }
    let exact = op.apply(&lhs, &rhs).ok_or(StepParseError::Overflow)?;
    let result =
        if written == exact || (is_decimal_token(result_token) && within_slack(&written, &exact)) {
            exact
        } else {
            return Err(StepParseError::Arithmetic {
                lhs: format_number(&lhs),
                op,
                rhs: format_number(&rhs),
                expected: format_number(&exact),
                written: result_token.to_string(),
            });
        };
    let mut left_after = Vec::new();
    for token in caps[5].split_whitespace() {
        let value = num(token)?;
        let value = if value != result && is_decimal_token(token) && within_slack(&value, &result) {
            result
        } else {
            value
        };
        left_after.push(value);
    }
    if left_after.is_empty() {
        return Err(StepParseError::Grammar);
    }
    left_after.sort();
    Ok(Step {
        lhs,
        op,
        rhs,
        result,
        left_after,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InvalidStep {
    #[error("operand {0} is not among the remaining numbers")]
    OperandNotAvailable(String),
    #[error("leftover numbers should be ({expected}), step says ({written})")]
    LeftoverMismatch { expected: String, written: String },
    #[error("arithmetic is not exact")]
    Arithmetic,
}

/// Checks a parsed step against the numbers actually remaining.
pub fn validate_step(remaining: &[Rational], step: &Step) -> Result<(), InvalidStep> {
    if step.op.apply(&step.lhs, &step.rhs) != Some(step.result) {
        return Err(InvalidStep::Arithmetic);
    }
    let mut pool = remaining.to_vec();
    for operand in [step.lhs, step.rhs] {
        match pool.iter().position(|v| *v == operand) {
            Some(pos) => {
                pool.swap_remove(pos);
            }
            None => return Err(InvalidStep::OperandNotAvailable(format_number(&operand))),
        }
    }
    pool.push(step.result);
    pool.sort();
    if pool != step.left_after {
        let show = |v: &[Rational]| v.iter().map(format_number).collect::<Vec<_>>().join(" ");
        return Err(InvalidStep::LeftoverMismatch {
            expected: show(&pool),
            written: show(&step.left_after),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("need at least two numbers to combine, have {0}")]
pub struct TooFewNumbers(pub usize);

/// Every ordered pair of distinct positions under every operator, minus
/// divisions by zero.
pub fn legal_steps(remaining: &[Rational]) -> Result<Vec<Step>, TooFewNumbers> {
    let n = remaining.len();
    if n < 2 {
        return Err(TooFewNumbers(n));
    }
    let mut steps = Vec::with_capacity(n * (n - 1) * 4);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            for op in Op::ALL {
                if let Some(step) = Step::from_positions(remaining, i, j, op) {
                    steps.push(step);
                }
            }
        }
    }
    Ok(steps)
}
