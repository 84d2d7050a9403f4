//! A deterministic stand-in for a language model. Replies depend only on
//! the prompt and the sample index, so a recorded transcript replays to
//! the same search no matter how calls interleave.

use totlab::game24::{self, legal_steps, parse_number, parse_step, Rational};
use totlab::knights::{Identity, KkPuzzle};
use totlab::llm::{Backend, BackendError, CompletionRequest};

pub struct Simulated {
    /// Statement block and solution of every Knights and Knaves puzzle
    /// the model may be asked about.
    pub puzzles: Vec<(String, Vec<(String, Identity)>)>,
}

impl Simulated {
    pub fn new(puzzles: &[KkPuzzle]) -> Self {
        let puzzles = puzzles
            .iter()
            .map(|p| {
                let solution = p.solution.clone().expect("solved");
                let ids = p.characters.iter().cloned().zip(solution).collect();
                (p.statements_text(), ids)
            })
            .collect();
        Simulated { puzzles }
    }

    fn kk_solution(&self, prompt: &str) -> &[(String, Identity)] {
        &self
            .puzzles
            .iter()
            .find(|(block, _)| prompt.contains(&format!("Statements:\n{block}\n")))
            .expect("known puzzle")
            .1
    }
}

fn noise(request: &CompletionRequest, sample: usize) -> u64 {
    let head = u64::from_str_radix(&request.digest()[..12], 16).expect("hex");
    head.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((sample as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9))
        >> 17
}

fn numbers(text: &str) -> Vec<Rational> {
    text.split_whitespace().filter_map(parse_number).collect()
}

fn identity_of(solution: &[(String, Identity)], name: &str) -> Identity {
    solution
        .iter()
        .find(|(c, _)| c == name)
        .expect("character")
        .1
}

impl Simulated {
    fn reply(&self, r: &CompletionRequest, sample: usize) -> String {
        let p = r.prompt.as_str();
        let h = noise(r, sample);
        if p.ends_with("Possible next steps:") {
            let input = p
                .lines()
                .rev()
                .find_map(|l| l.strip_prefix("Input: "))
                .expect("input");
            let steps = legal_steps(&numbers(input)).expect("two or more numbers");
            let offset = (h as usize) % steps.len();
            let mut lines: Vec<String> = (0..8)
                .map(|i| steps[(offset + 3 * i) % steps.len()].to_string())
                .collect();
            if h.is_multiple_of(3) {
                lines.insert(2, "Let me also try something else.".into());
            }
            return lines.join("\n");
        }
        if p.starts_with("Given three calculation steps.") {
            let tail = &p[p.rfind("Steps: \n").expect("steps") + 8..];
            let steps: Vec<_> = tail.lines().map(|l| parse_step(l).expect("step")).collect();
            let first = &steps[0];
            let mut origin = first.left_after.clone();
            let at = origin
                .iter()
                .position(|v| *v == first.result)
                .expect("result");
            origin.remove(at);
            origin.extend([first.lhs, first.rhs]);
            let ints: Vec<i64> = origin.iter().map(|r| *r.numer()).collect();
            return match (h % 4, game24::merge_steps(&ints, &steps)) {
                (0, _) => "The steps combine as follows, but I lost track.".into(),
                (_, Some(e)) if sample.is_multiple_of(2) => format!("Answer: {e} = 24"),
                (_, Some(e)) => format!("Combining the steps.\nAnswer: {e} = 24"),
                (_, None) => "Answer: 24".into(),
            };
        }
        if p.starts_with("Evaluate if given numbers can reach 24.") {
            let last = p.lines().last().expect("line");
            let verdict = match (game24::is_viable(&numbers(last)), h % 6) {
                (_, 0) => "likely",
                (true, _) => "confident",
                (false, _) => "impossible",
            };
            return format!("{last}\nthinking it over\n{verdict}");
        }
        if p.starts_with("Given an input and an answer") {
            let input = p
                .lines()
                .rev()
                .find_map(|l| l.strip_prefix("Input: "))
                .expect("input");
            let answer = p
                .lines()
                .rev()
                .find_map(|l| l.strip_prefix("Answer: "))
                .expect("answer");
            let ints: Vec<i64> = numbers(input).iter().map(|r| *r.numer()).collect();
            let ok = game24::verify_answer(&ints, answer).is_ok();
            return if ok {
                "confident".into()
            } else {
                "impossible".into()
            };
        }
        if p.contains("Choice 1: ") {
            let solution = self.kk_solution(p);
            let choice = |n: usize| {
                let line = p
                    .lines()
                    .find_map(|l| l.strip_prefix(&format!("Choice {n}: ")))
                    .expect("choice");
                let (name, id) = line.split_once(": ").expect("step");
                Identity::parse(id).expect("identity") == identity_of(solution, name)
            };
            let right = if choice(1) {
                1
            } else if choice(2) {
                2
            } else {
                1
            };
            return match h % 7 {
                0 => "Both look plausible to me.".into(),
                1 | 2 => format!("Weighing them.\nThe best choice is {}", 3 - right),
                _ => format!("Weighing them.\nThe best choice is {right}"),
            };
        }
        if p.starts_with("### Instruction ###") {
            let solution = self.kk_solution(p);
            let name = p
                .lines()
                .find_map(|l| l.strip_prefix("Now, infer the identity of "))
                .and_then(|l| l.split(' ').next())
                .expect("character");
            let truth = identity_of(solution, name);
            let id = match (h % 4, truth) {
                (0, Identity::TruthTeller) => Identity::Liar,
                (0, Identity::Liar) => Identity::TruthTeller,
                _ => truth,
            };
            return format!("Looking at the statements.\n{name}: {id}");
        }
        "I am not sure.".into()
    }
}

impl Backend for Simulated {
    fn name(&self) -> String {
        "sim".into()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>, BackendError> {
        Ok((0..request.n_samples)
            .map(|i| self.reply(request, i))
            .collect())
    }
}
