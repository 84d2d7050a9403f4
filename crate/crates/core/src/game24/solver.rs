//! Exhaustive search: viability of a multiset, all solutions of a puzzle, and
//! the full list of solvable puzzles.

use std::collections::HashMap;
use std::sync::{OnceLock, RwLock};

use super::expr::Expr;
use super::number::Rational;
use super::{Op, Puzzle24, Step, TARGET};

/// Memo of viability keyed on the sorted multiset. Safe to share across threads.
#[derive(Debug, Default)]
pub struct ViabilityCache {
    table: RwLock<HashMap<Vec<Rational>, bool>>,
}

impl ViabilityCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.table.read().expect("viability cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_viable(&self, remaining: &[Rational]) -> bool {
        let mut key = remaining.to_vec();
        key.sort();
        self.lookup(key)
    }

    fn lookup(&self, key: Vec<Rational>) -> bool {
        match key.len() {
            0 => return false,
            1 => return key[0] == Rational::from_integer(TARGET),
            _ => {}
        }
        if let Some(&hit) = self
            .table
            .read()
            .expect("viability cache poisoned")
            .get(&key)
        {
            return hit;
        }
        let viable = self.search(&key);
        self.table
            .write()
            .expect("viability cache poisoned")
            .insert(key, viable);
        viable
    }

    fn search(&self, sorted: &[Rational]) -> bool {
        let n = sorted.len();
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let rest = sorted
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != i && k != j)
                    .map(|(_, v)| *v);
                for op in Op::ALL {
                    // a+b and a*b are covered once by the i < j ordering
                    if op.is_commutative() && i > j {
                        continue;
                    }
                    let Some(result) = op.apply(&sorted[i], &sorted[j]) else {
                        continue;
                    };
                    let mut next: Vec<Rational> = rest.clone().collect();
                    next.push(result);
                    next.sort();
                    if self.lookup(next) {
                        return true;
                    }
                }
            }
        }
        false
    }
}

fn shared_cache() -> &'static ViabilityCache {
    static CACHE: OnceLock<ViabilityCache> = OnceLock::new();
    CACHE.get_or_init(ViabilityCache::new)
}

/// Whether some sequence of pairwise operations on `remaining` reaches
/// exactly 24. Uses a process-wide memo.
pub fn is_viable(remaining: &[Rational]) -> bool {
    shared_cache().is_viable(remaining)
}

/// One complete solution: the three steps and the expression they merge into.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution {
    pub steps: Vec<Step>,
    pub expression: Expr,
}

impl Solution {
    pub fn answer_text(&self) -> String {
        format!("{} = {}", self.expression, TARGET)
    }
}

/// Every sequence of ordered-pair operations that ends at 24. Equal values at
/// different positions are tried separately, so commutative twins and
/// repeated values yield repeated solutions.
pub fn solve_all(numbers: &[i64]) -> Vec<Solution> {
    let items: Vec<(Rational, Expr)> = numbers
        .iter()
        .map(|&n| (Rational::from_integer(n), Expr::num(n)))
        .collect();
    let mut steps = Vec::new();
    let mut out = Vec::new();
    if !items.is_empty() {
        dfs(&items, &mut steps, &mut out);
    }
    out
}

fn dfs(items: &[(Rational, Expr)], steps: &mut Vec<Step>, out: &mut Vec<Solution>) {
    if items.len() == 1 {
        if items[0].0 == Rational::from_integer(TARGET) {
            out.push(Solution {
                steps: steps.clone(),
                expression: items[0].1.clone(),
            });
        }
        return;
    }
    let values: Vec<Rational> = items.iter().map(|(v, _)| *v).collect();
    let n = items.len();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            for op in Op::ALL {
                let Some(step) = Step::from_positions(&values, i, j, op) else {
                    continue;
                };
                let combined = (
                    step.result,
                    Expr::bin(items[i].1.clone(), op, items[j].1.clone()),
                );
                let mut next: Vec<(Rational, Expr)> = items
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != i && k != j)
                    .map(|(_, item)| item.clone())
                    .collect();
                next.push(combined);
                steps.push(step);
                dfs(&next, steps, out);
                steps.pop();
            }
        }
    }
}

/// Rebuilds the single expression a sequence of steps computes from the
/// starting numbers. `None` if a step uses a number that is not available.
pub fn merge_steps(numbers: &[i64], steps: &[Step]) -> Option<Expr> {
    let mut pool: Vec<(Rational, Expr)> = numbers
        .iter()
        .map(|&n| (Rational::from_integer(n), Expr::num(n)))
        .collect();
    for step in steps {
        let take = |pool: &mut Vec<(Rational, Expr)>, value: Rational| {
            let pos = pool.iter().position(|(v, _)| *v == value)?;
            Some(pool.remove(pos).1)
        };
        let lhs = take(&mut pool, step.lhs)?;
        let rhs = take(&mut pool, step.rhs)?;
        pool.push((step.result, Expr::bin(lhs, step.op, rhs)));
    }
    if pool.len() == 1 {
        pool.pop().map(|(_, e)| e)
    } else {
        None
    }
}

/// All multisets of four values in 1..=13 that can reach 24, in ascending
/// lexicographic order of their sorted numbers.
pub fn enumerate_solvable_puzzles() -> Vec<Puzzle24> {
    all_multisets()
        .into_iter()
        .filter(|nums| {
            let values: Vec<Rational> = nums.iter().map(|&n| Rational::from_integer(n)).collect();
            is_viable(&values)
        })
        .enumerate()
        .map(|(rank, nums)| Puzzle24::with_rank(nums, rank).expect("in range"))
        .collect()
}

/// The 1,820 sorted 4-multisets over 1..=13.
pub fn all_multisets() -> Vec<[i64; 4]> {
    let mut out = Vec::with_capacity(1820);
    for a in 1..=13 {
        for b in a..=13 {
            for c in b..=13 {
                for d in c..=13 {
                    out.push([a, b, c, d]);
                }
            }
        }
    }
    out
}
