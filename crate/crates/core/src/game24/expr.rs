//! Infix arithmetic expressions over the four operators, evaluated exactly.

use std::fmt;

use thiserror::Error;

use super::number::{format_number, parse_number, Rational};
use super::Op;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Num(Rational),
    Bin(Box<Expr>, Op, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("unexpected `{found}` at offset {offset}")]
    Unexpected { found: String, offset: usize },
    #[error("unexpected end of expression")]
    UnexpectedEnd,
    #[error("division by zero")]
    DivisionByZero,
    #[error("arithmetic overflow")]
    Overflow,
}

impl Expr {
    pub fn num(n: i64) -> Expr {
        Expr::Num(Rational::from_integer(n))
    }

    pub fn bin(lhs: Expr, op: Op, rhs: Expr) -> Expr {
        Expr::Bin(Box::new(lhs), op, Box::new(rhs))
    }

    pub fn eval(&self) -> Result<Rational, ExprError> {
        match self {
            Expr::Num(v) => Ok(*v),
            Expr::Bin(lhs, op, rhs) => {
                let (a, b) = (lhs.eval()?, rhs.eval()?);
                if *op == Op::Div && b == Rational::from_integer(0) {
                    return Err(ExprError::DivisionByZero);
                }
                op.apply(&a, &b).ok_or(ExprError::Overflow)
            }
        }
    }

    /// Leaf values, sorted.
    pub fn leaves(&self) -> Vec<Rational> {
        fn walk(e: &Expr, out: &mut Vec<Rational>) {
            match e {
                Expr::Num(v) => out.push(*v),
                Expr::Bin(l, _, r) => {
                    walk(l, out);
                    walk(r, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out.sort();
        out
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Num(_) => 3,
            Expr::Bin(_, Op::Add | Op::Sub, _) => 1,
            Expr::Bin(_, Op::Mul | Op::Div, _) => 2,
        }
    }
}

impl fmt::Display for Expr {
    /// Minimal parentheses under left-associative standard precedence.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => {
                if *v < Rational::from_integer(0) {
                    write!(f, "({})", format_number(v))
                } else {
                    f.write_str(&format_number(v))
                }
            }
            Expr::Bin(lhs, op, rhs) => {
                let p = self.precedence();
                if lhs.precedence() < p {
                    write!(f, "({lhs})")?;
                } else {
                    write!(f, "{lhs}")?;
                }
                write!(f, " {op} ")?;
                let rp = rhs.precedence();
                if rp < p || (rp == p && matches!(op, Op::Sub | Op::Div)) {
                    write!(f, "({rhs})")
                } else {
                    write!(f, "{rhs}")
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(Rational),
    Op(Op),
    Open,
    Close,
}

fn tokenize(text: &str) -> Result<Vec<(Token, usize)>, ExprError> {
    let mut tokens = Vec::new();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (offset, c) = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '(' | '[' => {
                tokens.push((Token::Open, offset));
                i += 1;
            }
            ')' | ']' => {
                tokens.push((Token::Close, offset));
                i += 1;
            }
            c if c.is_ascii_digit() => {
                let mut j = i;
                while j < chars.len() && (chars[j].1.is_ascii_digit() || chars[j].1 == '.') {
                    j += 1;
                }
                let end = chars.get(j).map_or(text.len(), |&(o, _)| o);
                let literal = &text[offset..end];
                let value = parse_number(literal).ok_or_else(|| ExprError::Unexpected {
                    found: literal.to_string(),
                    offset,
                })?;
                tokens.push((Token::Num(value), offset));
                i = j;
            }
            _ => {
                let op = Op::from_symbol(&c.to_string()).ok_or_else(|| ExprError::Unexpected {
                    found: c.to_string(),
                    offset,
                })?;
                tokens.push((Token::Op(op), offset));
                i += 1;
            }
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn unexpected(&self) -> ExprError {
        match self.tokens.get(self.pos) {
            None => ExprError::UnexpectedEnd,
            Some((tok, offset)) => ExprError::Unexpected {
                found: match tok {
                    Token::Num(v) => format_number(v),
                    Token::Op(op) => op.symbol().to_string(),
                    Token::Open => "(".into(),
                    Token::Close => ")".into(),
                },
                offset: *offset,
            },
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        while let Some(Token::Op(op @ (Op::Add | Op::Sub))) = self.peek() {
            let op = *op;
            self.pos += 1;
            lhs = Expr::bin(lhs, op, self.term()?);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.atom()?;
        while let Some(Token::Op(op @ (Op::Mul | Op::Div))) = self.peek() {
            let op = *op;
            self.pos += 1;
            lhs = Expr::bin(lhs, op, self.atom()?);
        }
        Ok(lhs)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some(Token::Num(v)) => {
                let v = *v;
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Some(Token::Open) => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(&Token::Close) {
                    return Err(self.unexpected());
                }
                self.pos += 1;
                Ok(inner)
            }
            _ => Err(self.unexpected()),
        }
    }
}

pub fn parse_expression(text: &str) -> Result<Expr, ExprError> {
    let mut parser = Parser {
        tokens: tokenize(text)?,
        pos: 0,
    };
    let expr = parser.expr()?;
    if parser.pos != parser.tokens.len() {
        return Err(parser.unexpected());
    }
    Ok(expr)
}

/// Pulls the left-hand side of the equation out of an answer text: the
/// content of the last `Answer:` line if present, else the whole text, cut
/// at the first `=`.
pub fn answer_expression_text(text: &str) -> &str {
    let body = match text.rfind("Answer:") {
        Some(pos) => {
            let rest = &text[pos + "Answer:".len()..];
            rest.lines().next().unwrap_or("")
        }
        None => text.trim(),
    };
    body.split('=').next().unwrap_or("").trim()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnswerError {
    #[error("unparseable answer: {0}")]
    Unparseable(ExprError),
    #[error("arithmetic error: {0}")]
    Arithmetic(ExprError),
    #[error("numbers used ({used}) differ from the input ({input})")]
    NumberUsage { used: String, input: String },
    #[error("evaluates to {0}, not 24")]
    WrongValue(String),
}

impl AnswerError {
    pub fn is_unparseable(&self) -> bool {
        matches!(self, AnswerError::Unparseable(_))
    }
}

/// Checks an answer against the four input numbers with exact arithmetic.
pub fn verify_answer(numbers: &[i64], answer_text: &str) -> Result<(), AnswerError> {
    let expr =
        parse_expression(answer_expression_text(answer_text)).map_err(AnswerError::Unparseable)?;
    let mut input: Vec<Rational> = numbers.iter().map(|&n| Rational::from_integer(n)).collect();
    input.sort();
    let used = expr.leaves();
    if used != input {
        let show = |v: &[Rational]| v.iter().map(format_number).collect::<Vec<_>>().join(" ");
        return Err(AnswerError::NumberUsage {
            used: show(&used),
            input: show(&input),
        });
    }
    let value = expr.eval().map_err(AnswerError::Arithmetic)?;
    if value != Rational::from_integer(super::TARGET) {
        return Err(AnswerError::WrongValue(format_number(&value)));
    }
    Ok(())
}
