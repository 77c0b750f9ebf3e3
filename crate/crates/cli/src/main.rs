mod bench;
mod record;

use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use domcoop::check::{run_suite, Suite};
use domcoop::fjssp::{parse_fjs, solve_instance, FjsInstance, ModelKind};
use domcoop::search::{Budget, Outcome, Status};

use record::{write_records, Format, ResultRecord};

/// Flexible job shop solving with cooperating abstract domains.
#[derive(Parser)]
#[command(name = "domcoop", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one `.fjs` instance and print its result record.
    Solve(SolveArgs),
    /// Run every instance of a manifest with each domain and append the
    /// records to a file.
    Bench(BenchArgs),
    /// Run the randomized oracle suites.
    Check(CheckArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum StrategyName {
    Dms,
}

#[derive(Args)]
struct Limits {
    /// Time limit per run, in seconds.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    timeout: u64,
    /// Also stop after this many search nodes; makes runs reproducible.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    node_limit: Option<u64>,
    /// Upper bound on start dates and makespan instead of the serial bound.
    #[arg(long, value_parser = clap::value_parser!(i64).range(1..))]
    horizon: Option<i64>,
}

impl Limits {
    fn budget(&self) -> Budget {
        Budget { time: Some(Duration::from_secs(self.timeout)), nodes: self.node_limit }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_parser = parse_domain)]
    domain: ModelKind,
    #[command(flatten)]
    limits: Limits,
    #[arg(long, value_enum, default_value = "dms")]
    strategy: StrategyName,
    #[arg(long, value_enum, default_value = "jsonl")]
    output: Format,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    limits: Limits,
    /// Comma-separated list of fjs1, fjs2, box-ipc.
    #[arg(long, value_delimiter = ',', value_parser = parse_domain, required = true)]
    domains: Vec<ModelKind>,
    /// Records are appended to this file, one JSON object per line.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CheckArgs {
    /// Run only these suites (repeatable); all by default.
    #[arg(long, value_parser = parse_suite)]
    suite: Vec<Suite>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trials per suite instead of each suite's default.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, hide = true)]
    inject_fault: bool,
}

fn parse_domain(s: &str) -> Result<ModelKind, String> {
    s.parse()
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    if s.is_empty() {
        return Err("empty suite name".into());
    }
    s.parse()
}

fn read_instance(path: &Path) -> Result<FjsInstance> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_fjs(&text).with_context(|| format!("{}", path.display()))
}

fn solve(args: &SolveArgs) -> Result<ExitCode> {
    let StrategyName::Dms = args.strategy;
    let inst = read_instance(&args.instance)?;
    let out = solve_instance(&inst, args.domain, args.limits.horizon, args.limits.budget())?;
    let rec = ResultRecord::from_outcome(&args.instance.display().to_string(), args.domain.name(), &out, None);
    write_records(&mut io::stdout().lock(), args.output, &[rec])?;
    Ok(ExitCode::from(exit_code(&out)))
}

fn exit_code(out: &Outcome) -> u8 {
    match out.stats.status {
        Status::Optimal | Status::Sat => 0,
        Status::Unsat => 2,
        Status::Timeout if out.stats.best_objective.is_some() => 0,
        Status::Timeout => 3,
    }
}

fn run_bench(args: &BenchArgs) -> Result<ExitCode> {
    let text = fs::read_to_string(&args.manifest)
        .with_context(|| format!("cannot read {}", args.manifest.display()))?;
    let base = args.manifest.parent().unwrap_or(Path::new("."));
    let entries = bench::parse_manifest(&text, base)?;
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&args.out)
        .with_context(|| format!("cannot open {}", args.out.display()))?;
    let mut records = Vec::new();
    for e in &entries {
        let name = e.path.display().to_string();
        let inst = read_instance(&e.path);
        for &kind in &args.domains {
            let rec = match &inst {
                Ok(inst) => match solve_instance(inst, kind, args.limits.horizon, args.limits.budget()) {
                    Ok(out) => ResultRecord::from_outcome(&name, kind.name(), &out, e.lower_bound),
                    Err(err) => {
                        eprintln!("{name} ({kind}): {err}");
                        ResultRecord::error(&name, kind.name())
                    }
                },
                Err(err) => {
                    eprintln!("{err:#}");
                    ResultRecord::error(&name, kind.name())
                }
            };
            writeln!(file, "{}", rec.to_json())?;
            file.flush()?;
            records.push(rec);
        }
    }
    let names: Vec<String> = args.domains.iter().map(|k| k.name().to_string()).collect();
    print!("{}", bench::summary(&records, &names));
    Ok(ExitCode::SUCCESS)
}

fn check(args: &CheckArgs) -> Result<ExitCode> {
    let suites = if args.suite.is_empty() { Suite::ALL.to_vec() } else { args.suite.clone() };
    if args.inject_fault {
        domcoop::octagon::inject_closure_fault(true);
    }
    let mut ok = true;
    for s in suites {
        let trials = args.trials.unwrap_or(s.default_trials());
        let r = run_suite(s, args.seed, trials);
        println!(
            "{:<12} {} passed, {} failed ({:.2} s)",
            s.name(),
            r.passed,
            r.failed,
            r.elapsed.as_secs_f64()
        );
        for f in &r.failures {
            println!("  {f}");
        }
        ok &= r.ok();
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Solve(a) => solve(a),
        Command::Bench(a) => run_bench(a),
        Command::Check(a) => check(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
