//! Exact rational numbers as they appear in step text.

use num_integer::Integer;
use num_rational::Rational64;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, Signed, Zero};

pub type Rational = Rational64;

/// Slack allowed between a written decimal and the exact value it stands for.
pub const DECIMAL_SLACK: (i64, i64) = (1, 1000);

pub fn int(n: i64) -> Rational {
    Rational::from_integer(n)
}

/// Parses `12`, `-3`, `1.4` or `14/3` into an exact rational.
///
/// Decimals become the exact rational they denote (`1.4` is `7/5`).
pub fn parse_number(token: &str) -> Option<Rational> {
    let token = token.trim();
    if let Some((num, den)) = token.split_once('/') {
        let num: i64 = parse_plain_int(num)?;
        if den.starts_with('-') {
            return None;
        }
        let den = parse_plain_int(den)?;
        if den == 0 {
            return None;
        }
        return Some(Rational::new(num, den));
    }
    let (negative, body) = match token.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, token),
    };
    if body.is_empty() {
        return None;
    }
    let value = match body.split_once('.') {
        None => {
            if !body.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            int(body.parse().ok()?)
        }
        Some((whole, frac)) => {
            let digits_ok = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
            if whole.is_empty() || frac.is_empty() || !digits_ok(whole) || !digits_ok(frac) {
                return None;
            }
            if frac.len() > 18 {
                return None;
            }
            let scale = 10i64.checked_pow(frac.len() as u32)?;
            let numer = whole
                .parse::<i64>()
                .ok()?
                .checked_mul(scale)?
                .checked_add(frac.parse::<i64>().ok()?)?;
            Rational::new(numer, scale)
        }
    };
    Some(if negative { -value } else { value })
}

fn parse_plain_int(s: &str) -> Option<i64> {
    let digits = s.strip_prefix('-').unwrap_or(s);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

/// True when the token was written as a decimal (`1.4`), i.e. possibly truncated.
pub fn is_decimal_token(token: &str) -> bool {
    token.contains('.')
}

/// Canonical text for a rational: integer, exact terminating decimal, or `p/q`.
pub fn format_number(value: &Rational) -> String {
    if value.is_integer() {
        return value.to_integer().to_string();
    }
    let mut den = *value.denom();
    let (mut twos, mut fives) = (0u32, 0u32);
    while den % 2 == 0 {
        den /= 2;
        twos += 1;
    }
    while den % 5 == 0 {
        den /= 5;
        fives += 1;
    }
    if den != 1 {
        return format!("{}/{}", value.numer(), value.denom());
    }
    let places = twos.max(fives);
    let Some(scale) = 10i64.checked_pow(places) else {
        return format!("{}/{}", value.numer(), value.denom());
    };
    let Some(scaled) = value.checked_mul(&int(scale)) else {
        return format!("{}/{}", value.numer(), value.denom());
    };
    let scaled = scaled.to_integer();
    let sign = if scaled < 0 { "-" } else { "" };
    let abs = scaled.abs();
    let (whole, frac) = abs.div_rem(&scale);
    format!("{sign}{whole}.{frac:0width$}", width = places as usize)
}

/// `|written - exact| <= 10^-3`.
pub fn within_slack(written: &Rational, exact: &Rational) -> bool {
    match written.checked_sub(exact) {
        Some(diff) => diff.abs() <= Rational::new(DECIMAL_SLACK.0, DECIMAL_SLACK.1),
        None => false,
    }
}

pub(crate) fn checked_apply(op: super::Op, lhs: &Rational, rhs: &Rational) -> Option<Rational> {
    use super::Op;
    match op {
        Op::Add => lhs.checked_add(rhs),
        Op::Sub => lhs.checked_sub(rhs),
        Op::Mul => lhs.checked_mul(rhs),
        Op::Div => {
            if rhs.is_zero() {
                None
            } else {
                lhs.checked_div(rhs)
            }
        }
    }
}
