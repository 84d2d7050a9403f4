#![allow(dead_code)]

pub mod sim;

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use totlab::game24::{parse_number, parse_step, validate_step, verify_answer, Rational, Step};
use totlab::llm::{render_prompt, TemplateId};

/// Golden prompt files, named after their templates.
pub const GOLDEN: [&str; 10] = [
    "io_24",
    "cot_24",
    "gen_24",
    "merge_24",
    "value_24",
    "value_last_24",
    "io_kk",
    "gen_kk",
    "vote_kk",
    "system_kk",
];

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join(rel)
}

pub fn golden(name: &str) -> String {
    fs::read_to_string(fixture(&format!("golden/prompts/{name}.txt"))).expect("golden prompt")
}

/// Renders a template with every placeholder bound to its own `<name>`.
pub fn render_verbatim(id: TemplateId) -> String {
    let bindings: BTreeMap<&str, String> = id
        .placeholders()
        .into_iter()
        .map(|p| (p, format!("<{p}>")))
        .collect();
    render_prompt(id, &bindings).expect("complete bindings")
}

/// Every template whose rendering differs from its golden file.
pub fn prompt_mismatches() -> Vec<String> {
    let mut bad = Vec::new();
    for id in TemplateId::ALL {
        let expected = match id {
            TemplateId::CotKk => format!("{}\n\nLet's think step by step.", golden("io_kk")),
            _ => golden(id.as_str()),
        };
        if render_verbatim(id) != expected {
            bad.push(id.as_str().to_string());
        }
    }
    if totlab::llm::SYSTEM_KK != golden("system_kk") {
        bad.push("system_kk".into());
    }
    bad
}

/// `(file, line)` for every step line in the golden prompts.
pub fn step_lines() -> Vec<(&'static str, String)> {
    GOLDEN
        .iter()
        .flat_map(|name| {
            golden(name)
                .lines()
                .filter(|l| l.contains("(left:"))
                .map(|l| (*name, l.to_string()))
                .collect::<Vec<_>>()
        })
        .collect()
}

fn sorted(mut v: Vec<Rational>) -> Vec<Rational> {
    v.sort();
    v
}

/// The state a step must have been taken from: its leftovers with the
/// result replaced by the two operands.
pub fn parent_of(step: &Step) -> Vec<Rational> {
    let mut pool = step.left_after.clone();
    let i = pool
        .iter()
        .position(|v| *v == step.result)
        .expect("result is left over");
    pool.remove(i);
    pool.push(step.lhs);
    pool.push(step.rhs);
    sorted(pool)
}

fn numbers(text: &str) -> Vec<Rational> {
    sorted(
        text.split_whitespace()
            .map(|t| parse_number(t).expect("number"))
            .collect(),
    )
}

/// Parses and validates every step line in the context it appears in.
/// Proposal lists are checked against their `Input:` line; step chains
/// must link up and end in an answer that verifies against the chain's
/// starting numbers. Returns the number of lines checked.
pub fn check_step_lines() -> Result<usize, String> {
    let mut checked = 0;
    for name in GOLDEN {
        let text = golden(name);
        let mut input: Option<Vec<Rational>> = None;
        let mut chain: Vec<Step> = Vec::new();
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix("Input: ") {
                input = (!rest.contains('<')).then(|| numbers(rest));
                chain.clear();
            } else if line == "Steps:" {
                chain.clear();
            } else if let Some(answer) = line.strip_prefix("Answer: ") {
                let Some(first) = chain.first() else { continue };
                let origin: Vec<i64> = parent_of(first)
                    .iter()
                    .map(|r| if r.is_integer() { *r.numer() } else { -1 })
                    .collect();
                verify_answer(&origin, answer).map_err(|e| format!("{name}: `{line}`: {e}"))?;
                chain.clear();
            } else if line.contains("(left:") {
                let step = parse_step(line).map_err(|e| format!("{name}: `{line}`: {e}"))?;
                let parent = parent_of(&step);
                validate_step(&parent, &step).map_err(|e| format!("{name}: `{line}`: {e}"))?;
                let context = match (name, chain.last(), &input) {
                    ("gen_24", _, Some(i)) => Some(i.clone()),
                    (_, Some(prev), _) => Some(prev.left_after.clone()),
                    (_, None, Some(i)) => Some(i.clone()),
                    _ => None,
                };
                if let Some(ctx) = context {
                    if sorted(ctx) != parent {
                        return Err(format!("{name}: `{line}` does not follow its context"));
                    }
                }
                if name != "gen_24" {
                    chain.push(step);
                }
                checked += 1;
            }
        }
    }
    Ok(checked)
}

pub const REPLAY_TRANSCRIPT: &str = "fixtures/replay_transcript.json";
pub const REPLAY_OUTCOMES: &str = "fixtures/replay_outcomes.jsonl";

/// Tasks and configs behind the recorded transcript: three Game of 24
/// puzzles and two generated Knights and Knaves puzzles, searched with the
/// same backend in both roles.
pub fn replay_runs() -> Vec<(totlab::harness::ExperimentConfig, totlab::harness::TaskList)> {
    use totlab::game24::{Game24Task, Puzzle24};
    use totlab::harness::{generate_puzzles, ExperimentConfig, Method, TaskList, TaskSet};
    use totlab::knights::KkTask;
    use totlab::llm::TaskKind;
    use totlab::oracle::AgentSpec;

    let config = |kind| {
        let mut c = ExperimentConfig::new(TaskSet::new(kind), Method::Tot);
        c.generator = Some(AgentSpec::Llm("sim".into()));
        c.discriminator = Some(AgentSpec::Llm("sim".into()));
        c.master_seed = 2024;
        c
    };
    let g24 = [[4, 9, 10, 13], [1, 4, 8, 8], [2, 9, 10, 12]]
        .iter()
        .map(|&n| Game24Task::new(Puzzle24::new(n).unwrap()))
        .collect();
    let kk = generate_puzzles(3, 2, 11)
        .unwrap()
        .into_iter()
        .enumerate()
        .map(|(i, p)| KkTask::new(p, format!("kk3-{i}")).unwrap())
        .collect();
    vec![
        (config(TaskKind::Game24), TaskList::Game24(g24)),
        (config(TaskKind::Kk), TaskList::Kk(kk)),
    ]
}

/// Every outcome of the replay runs, one JSON line each.
pub fn replay_outcome_lines(backends: &totlab::harness::Backends) -> String {
    let mut out = String::new();
    for (config, tasks) in replay_runs() {
        let run = totlab::harness::run_loaded(&config, &tasks, backends).expect("replay run");
        for o in run.outcomes {
            out.push_str(&o.to_json_line());
            out.push('\n');
        }
    }
    out
}

pub fn kk_replay_puzzles() -> Vec<totlab::knights::KkPuzzle> {
    replay_runs()
        .into_iter()
        .filter_map(|(_, t)| match t {
            totlab::harness::TaskList::Kk(t) => {
                Some(t.into_iter().map(|t| t.puzzle).collect::<Vec<_>>())
            }
            _ => None,
        })
        .flatten()
        .collect()
}

/// Replays the committed transcript and returns the outcome lines.
pub fn replayed_outcome_lines() -> Result<String, String> {
    let backend = totlab::llm::ScriptedBackend::from_file("sim", &fixture(REPLAY_TRANSCRIPT))
        .map_err(|e| e.to_string())?;
    let mut backends = totlab::harness::Backends::default();
    backends.insert("sim", std::sync::Arc::new(backend));
    let mut out = String::new();
    for (config, tasks) in replay_runs() {
        let run =
            totlab::harness::run_loaded(&config, &tasks, &backends).map_err(|e| e.to_string())?;
        for o in run.outcomes {
            out.push_str(&o.to_json_line());
            out.push('\n');
        }
    }
    Ok(out)
}
