use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nil_cli::bench::{find, run_case, CaseResult, CASES};
use nil_cli::config::{parse_range, settings, Mode, Overrides};
use nil_cli::report::{run_and_report, sweep, ErrorReport, EXIT_USAGE};
use nil_cli::plot;
use nil_core::formula::parse_problem;

/// Polynomial Craig interpolants from sampled models, an SVM and an
/// interval prover.
#[derive(Parser)]
#[command(name = "nil", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize an interpolant for a problem file.
    Solve(SolveArgs),
    /// Run the embedded benchmark suite.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SolveArgs {
    file: PathBuf,
    /// Polynomial degree m (overrides the file).
    #[arg(long)]
    degree: Option<u32>,
    /// Counterexample margin δ (delta and star modes).
    #[arg(long)]
    delta: Option<f64>,
    /// Half-width of the initial box.
    #[arg(long = "box")]
    box_radius: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// RNG seed; NIL_SEED takes precedence.
    #[arg(long)]
    seed: Option<u64>,
    /// Print the run report as JSON.
    #[arg(long)]
    json: bool,
    /// Write an SVG picture of the run (two common variables only).
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Try degrees LO..HI in turn until one succeeds.
    #[arg(long, value_name = "LO..HI", conflicts_with = "degree")]
    sweep_degree: Option<String>,
}

#[derive(Args)]
struct BenchArgs {
    /// Only the gating cases (the default when no case is named).
    #[arg(long)]
    required: bool,
    /// Include the stretch cases.
    #[arg(long)]
    stretch: bool,
    /// Run the named case; repeatable.
    #[arg(long = "case")]
    cases: Vec<String>,
    /// Print the case names without running anything.
    #[arg(long)]
    list: bool,
    /// Override every case's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// One JSON object per case instead of a table.
    #[arg(long)]
    json: bool,
}

fn usage_error(json: bool, kind: &str, message: String) -> ExitCode {
    if json {
        let e = ErrorReport { error: kind.to_string(), message };
        println!("{}", serde_json::to_string(&e).expect("serializable"));
    } else {
        eprintln!("error: {message}");
    }
    ExitCode::from(EXIT_USAGE as u8)
}

fn env_seed() -> Result<Option<u64>, String> {
    match std::env::var("NIL_SEED") {
        Ok(s) => s.trim().parse().map(Some).map_err(|_| format!("NIL_SEED is not a seed: `{s}`")),
        Err(_) => Ok(None),
    }
}

fn solve(a: SolveArgs) -> ExitCode {
    let text = match std::fs::read_to_string(&a.file) {
        Ok(t) => t,
        Err(e) => return usage_error(a.json, "io", format!("{}: {e}", a.file.display())),
    };
    let problem = match parse_problem(&text) {
        Ok(p) => p,
        Err(e) => return usage_error(a.json, "parse", format!("{}: {e}", a.file.display())),
    };
    let seed = match env_seed() {
        Ok(s) => s.or(a.seed),
        Err(m) => return usage_error(a.json, "usage", m),
    };
    let range = match a.sweep_degree.as_deref().map(parse_range).transpose() {
        Ok(r) => r,
        Err(e) => return usage_error(a.json, "usage", e.to_string()),
    };
    let flags = Overrides {
        degree: range.map(|(lo, _)| lo).or(a.degree),
        delta: a.delta,
        box_radius: a.box_radius,
        mode: a.mode,
        max_iters: a.max_iters,
        seed,
    };
    let s = match settings(&problem, &flags) {
        Ok(s) => s,
        Err(e) => return usage_error(a.json, "config", e.to_string()),
    };
    let name = a.file.file_stem().map_or_else(|| "problem".to_string(), |n| n.to_string_lossy().into_owned());
    let result = match range {
        Some(r) => sweep(&name, &problem, &s, r),
        None => run_and_report(&name, &problem, &s),
    };
    let (run, report) = match result {
        Ok(r) => r,
        Err(e) => return usage_error(a.json, "run", e.to_string()),
    };
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
    } else {
        println!("{}", report.summary());
    }
    if let Some(path) = &a.plot {
        let p = nil_core::formula::Problem { degree: report.degree, ..problem };
        if let Err(e) = plot::write(&p, &run, &path.to_string_lossy()) {
            eprintln!("plot: {e}");
        }
    }
    ExitCode::from(report.exit_code() as u8)
}

fn bench(a: BenchArgs) -> ExitCode {
    let selected: Vec<_> = if !a.cases.is_empty() {
        let mut out = Vec::new();
        for name in &a.cases {
            match find(name) {
                Some(c) => out.push(c),
                None => return usage_error(a.json, "usage", format!("no case named `{name}`")),
            }
        }
        out
    } else {
        CASES.iter().filter(|c| c.required || a.stretch).collect()
    };
    if a.list {
        for c in &selected {
            println!("{}{}", c.name, if c.required { "" } else { " (stretch)" });
        }
        return ExitCode::SUCCESS;
    }
    let seed = match env_seed() {
        Ok(s) => s.or(a.seed),
        Err(m) => return usage_error(a.json, "usage", m),
    };
    if !a.json {
        println!("{:<20} {:<26} {:>3} {:>8} {:>9}  {}", "case", "outcome", "m", "verified", "time", "interpolant");
    }
    let mut failed = false;
    for c in selected {
        let r = run_case(c, seed);
        failed |= !r.passed;
        if a.json {
            println!("{}", serde_json::to_string(&r).expect("serializable"));
        } else {
            print_row(&r);
        }
    }
    if failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

fn print_row(r: &CaseResult) {
    let verified = match r.verified {
        Some(true) => "yes",
        Some(false) => "NO",
        None => "-",
    };
    let outcome = r.outcomes.last().map_or("error", String::as_str);
    let status = if r.passed { "" } else { "  FAIL: " };
    println!(
        "{:<20} {:<26} {:>3} {:>8} {:>8.2}s  {}{status}{}",
        r.name,
        outcome,
        r.degree,
        verified,
        r.time_ms as f64 / 1000.0,
        r.interpolant.as_deref().unwrap_or(""),
        if r.passed { "" } else { r.detail.as_str() }
    );
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE as u8 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Solve(a) => solve(a),
        Command::Bench(a) => bench(a),
    }
}
