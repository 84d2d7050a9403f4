use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use totlab::game24::{self, Puzzle24, SolutionRecord};
use totlab::harness::{
    check_monotone, emit_report, load_tasks, read_records, run_experiment, run_sweep, summarize,
    Backends, ExperimentConfig, Method, RunOutput, SummaryRow, SweepAxis, SweepSpec, TaskSet,
};
use totlab::knights;
use totlab::llm::TaskKind;
use totlab::oracle::{AgentSpec, ClassFallback};

#[derive(Parser)]
#[command(
    name = "totlab",
    version,
    about = "Tree-of-thoughts search experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one Game of 24 puzzle exactly.
    Solve24 {
        #[arg(num_args = 4, required = true)]
        numbers: Vec<i64>,
        /// Print every solution instead of the first.
        #[arg(long)]
        all: bool,
        #[arg(long)]
        json: bool,
    },
    /// Puzzle set utilities.
    #[command(subcommand)]
    Puzzles(PuzzlesCommand),
    /// Knights and Knaves utilities.
    #[command(subcommand)]
    Kk(KkCommand),
    /// Run one experiment and write a report directory.
    Run(RunArgs),
    /// Sweep oracle accuracy on one axis and write a report directory.
    Sweep(SweepArgs),
    /// Summarize a report directory written by `run` or `sweep`.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Subcommand)]
enum PuzzlesCommand {
    /// Write every solvable Game of 24 multiset to a CSV file.
    Enum24 {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum KkCommand {
    /// Generate puzzles with unique solutions as JSON lines.
    Gen {
        #[arg(long, default_value_t = 3)]
        chars: usize,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the unique solution of every puzzle in a file.
    Solve {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML experiment file; the flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_task)]
    task: Option<TaskKind>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    start: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "report")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: ExperimentArgs,
    #[arg(long)]
    method: Option<Method>,
    /// `oracle:p=<p>[,fallback=fail|other]` or `llm:<backend>`.
    #[arg(long)]
    generator: Option<AgentSpec>,
    /// `oracle:p=<p>[,fallback=fail|other]`, `random`, or `llm:<backend>`.
    #[arg(long)]
    discriminator: Option<AgentSpec>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: ExperimentArgs,
    /// `gen` or `disc`.
    #[arg(long)]
    axis: SweepAxis,
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.4,0.6,0.8,1.0")]
    points: Vec<f64>,
    #[arg(long)]
    include_random: bool,
    /// Oracle discriminator behavior when a slot's class is exhausted.
    #[arg(long, value_parser = parse_fallback, default_value = "fail")]
    fallback: ClassFallback,
    /// Fixed agent for the other role.
    #[arg(long)]
    generator: Option<AgentSpec>,
    #[arg(long)]
    discriminator: Option<AgentSpec>,
}

fn parse_task(s: &str) -> Result<TaskKind, String> {
    match s {
        "game24" | "24" => Ok(TaskKind::Game24),
        "kk" | "knights" => Ok(TaskKind::Kk),
        _ => Err(format!("unknown task `{s}`; expected game24 or kk")),
    }
}

fn parse_fallback(s: &str) -> Result<ClassFallback, String> {
    match s {
        "fail" => Ok(ClassFallback::Fail),
        "other" => Ok(ClassFallback::OtherClass),
        _ => Err(format!("unknown fallback `{s}`; expected fail or other")),
    }
}

/// Config file (if any) with command-line overrides applied, plus the
/// directory relative paths resolve against.
fn experiment_config(
    args: &ExperimentArgs,
    method: Option<Method>,
) -> Result<(ExperimentConfig, PathBuf)> {
    let (mut config, base) = match &args.config {
        Some(path) => {
            let config = ExperimentConfig::load(path)?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (config, base)
        }
        None => {
            let Some(kind) = args.task else {
                bail!("pass --config or --task");
            };
            let mut tasks = TaskSet::new(kind);
            if kind == TaskKind::Kk && args.count.is_none() {
                tasks.count = Some(100);
            }
            (
                ExperimentConfig::new(tasks, method.unwrap_or(Method::Tot)),
                PathBuf::from("."),
            )
        }
    };
    if let Some(kind) = args.task {
        if kind != config.tasks.kind {
            bail!("--task disagrees with the config file");
        }
    }
    if let Some(m) = method {
        config.method = m;
    }
    if args.count.is_some() {
        config.tasks.count = args.count;
    }
    if let Some(start) = args.start {
        config.tasks.start = start;
    }
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    Ok((config, base))
}

fn print_summary(rows: &[SummaryRow]) {
    println!(
        "{:<6} {:<28} {:<28} {:>8} {:>6} {:>8} {:>17} {:>8}",
        "method", "generator", "discriminator", "accuracy", "tasks", "success", "95% CI", "quality"
    );
    for r in rows {
        let acc = r
            .accuracy
            .map_or_else(|| "-".to_string(), |a| format!("{a:.2}"));
        println!(
            "{:<6} {:<28} {:<28} {:>8} {:>6} {:>8.4} [{:.4}, {:.4}] {:>8.4}",
            r.method,
            r.generator,
            r.discriminator,
            acc,
            r.n_tasks,
            r.success_rate,
            r.ci_low,
            r.ci_high,
            r.quality_overall
        );
    }
}

fn finish(output: &RunOutput, out: &Path) -> Result<()> {
    let files = emit_report(out, output)?;
    if !output.records.is_empty() {
        print_summary(&summarize(&output.records)?);
    }
    eprintln!("wrote {}", files.sweep.parent().unwrap_or(out).display());
    Ok(())
}

fn solve24(numbers: &[i64], all: bool, json: bool) -> Result<()> {
    let puzzle = Puzzle24::new([numbers[0], numbers[1], numbers[2], numbers[3]])?;
    let solutions = game24::solve_all(&puzzle.numbers);
    if solutions.is_empty() {
        bail!("{puzzle} has no solution");
    }
    let take = if all { solutions.len() } else { 1 };
    for s in &solutions[..take] {
        if json {
            println!(
                "{}",
                serde_json::to_string(&SolutionRecord::new(&puzzle, s))?
            );
        } else {
            for step in &s.steps {
                println!("{step}");
            }
            println!("Answer: {}", s.answer_text());
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Solve24 { numbers, all, json } => solve24(&numbers, all, json)?,
        Command::Puzzles(PuzzlesCommand::Enum24 { out }) => {
            let puzzles = game24::enumerate_solvable_puzzles();
            game24::write_puzzles(&out, &puzzles)?;
            eprintln!("wrote {} puzzles to {}", puzzles.len(), out.display());
        }
        Command::Kk(KkCommand::Gen {
            chars,
            count,
            seed,
            out,
        }) => {
            let puzzles = totlab::harness::generate_puzzles(chars, count, seed)?;
            knights::save_puzzles(&out, &puzzles)?;
            eprintln!("wrote {} puzzles to {}", puzzles.len(), out.display());
        }
        Command::Kk(KkCommand::Solve { input }) => {
            for (i, puzzle) in knights::load_puzzles(&input)?.into_iter().enumerate() {
                let solutions = knights::solve_brute_force(&puzzle);
                let [solution] = solutions.as_slice() else {
                    bail!("puzzle {} has {} solutions", i + 1, solutions.len());
                };
                let line: Vec<String> = puzzle
                    .characters
                    .iter()
                    .zip(solution)
                    .map(|(c, id)| format!("{c}: {id}"))
                    .collect();
                println!("{}", line.join(", "));
            }
        }
        Command::Run(args) => {
            let (mut config, base) = experiment_config(&args.common, args.method)?;
            if args.generator.is_some() {
                config.generator = args.generator;
            }
            if args.discriminator.is_some() {
                config.discriminator = args.discriminator;
            }
            let output = run_experiment(&config, &base)?;
            finish(&output, &args.common.out)?;
        }
        Command::Sweep(args) => {
            let (mut config, base) = experiment_config(&args.common, Some(Method::Tot))?;
            if args.generator.is_some() {
                config.generator = args.generator;
            }
            if args.discriminator.is_some() {
                config.discriminator = args.discriminator;
            }
            match args.axis {
                SweepAxis::GeneratorAccuracy => config.generator = None,
                SweepAxis::DiscriminatorAccuracy => config.discriminator = None,
            }
            let spec = SweepSpec {
                axis: args.axis,
                points: args.points.clone(),
                include_random: args.include_random,
                fallback: args.fallback,
            };
            let tasks = load_tasks(&config.tasks, &base)?;
            let backends = Backends::build(&config.backends, &base)?;
            let output = run_sweep(&config, &spec, &tasks, &backends)?;
            finish(&output, &args.common.out)?;
            for c in check_monotone(&output.records, &args.points, config.master_seed) {
                println!(
                    "{:.2} -> {:.2}: diff {:+.4} [{:+.4}, {:+.4}]{}",
                    c.from,
                    c.to,
                    c.mean_diff,
                    c.ci_low,
                    c.ci_high,
                    if c.violated { "  DROP" } else { "" }
                );
            }
        }
        Command::Report { input } => {
            let records = read_records(&input)?;
            if records.is_empty() {
                bail!("{} has no records", input.display());
            }
            print_summary(&summarize(&records)?);
        }
    }
    Ok(())
}
