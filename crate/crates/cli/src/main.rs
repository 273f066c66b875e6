//! `smsp`: validate, solve, benchmark and check scheduling instances.
//!
//! Exit codes: 0 success, 1 invalid input, 2 I/O error, 3 no schedule.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use smsp_core::bench::{run_bench, strategy_matrix, write_csv, BenchRow};
use smsp_core::instance::{generate_instance, validate_instance, GeneratorParams};
use smsp_core::oracle::{oracle_optimum, OracleError, OracleLimits};
use smsp_core::prealloc::AllocConfig;
use smsp_core::render::{gantt_svg, gantt_text, GanttOptions};
use smsp_core::schedule::{compute_start_times, evaluate, schedule_from_json, schedule_to_json, to_document};
use smsp_core::solver::{solve_with_progress, SearchMode, SolveError, SolverConfig};
use smsp_core::{parse_facts, serialize_facts, Instance};

#[derive(Parser)]
#[command(name = "smsp", version, about = "Semiconductor manufacturing scheduling toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate an instance file.
    Validate { path: PathBuf },
    /// Solve an instance: makespan first, then setup and batch violations.
    Solve(SolveArgs),
    /// Run the preallocation strategy matrix over a directory of instances.
    Bench(BenchArgs),
    /// Write a random instance.
    Generate(GenerateArgs),
    /// Exhaustively enumerate a micro-instance and print its optimum.
    Oracle(OracleArgs),
    /// Evaluate a JSON schedule against an instance.
    Check { instance: PathBuf, schedule: PathBuf },
}

#[derive(Args)]
struct Limits {
    /// Stage-1 time limit in seconds.
    #[arg(long, default_value_t = 450.0)]
    stage1_limit: f64,
    /// Stage-2 time limit in seconds.
    #[arg(long, default_value_t = 150.0)]
    stage2_limit: f64,
    /// Search without time limits (overrides both limits).
    #[arg(long)]
    no_limit: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Search::Greedy)]
    search: Search,
}

#[derive(Clone, Copy, ValueEnum)]
enum Search {
    Exact,
    Greedy,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Json,
    GanttSvg,
    GanttText,
}

#[derive(Args)]
struct SolveArgs {
    path: PathBuf,
    /// Machines per subgroup; 0 for the whole tool group, 1 for one machine.
    #[arg(long, default_value_t = 0)]
    sub_size: u32,
    #[arg(long, default_value_t = 0)]
    lot_step: u32,
    /// Within a subgroup, assign operations to machines by setup.
    #[arg(long)]
    by_setup: bool,
    #[command(flatten)]
    limits: Limits,
    /// Render the best schedule.
    #[arg(long, value_enum)]
    out: Option<OutFormat>,
    /// Write the rendering here instead of standard output.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Gantt scale (SVG: pixels per time unit; text: time units per column).
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Print incumbents as `<elapsed_ms> <makespan> <setup> <batch>` on
    /// standard error.
    #[arg(long)]
    progress: bool,
}

#[derive(Args)]
struct BenchArgs {
    dir: PathBuf,
    #[command(flatten)]
    limits: Limits,
    /// CSV destination; standard output when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 7)]
    lots: u32,
    #[arg(long, default_value_t = 2)]
    products: u32,
    #[arg(long, default_value_t = 10)]
    route_len: u32,
    #[arg(long, default_value_t = 3)]
    groups: u32,
    #[arg(long, default_value_t = 3)]
    machines: u32,
    #[arg(long, default_value_t = 0.2)]
    batch_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Destination file; standard output when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    path: PathBuf,
    #[arg(long, default_value_t = 3)]
    max_lots: usize,
    #[arg(long, default_value_t = 4)]
    max_ops: usize,
    #[arg(long, default_value_t = 2)]
    max_machines: usize,
    #[arg(long, default_value_t = 10_000_000)]
    max_states: u64,
}

/// An error with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn invalid(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: 1,
            error: error.into(),
        }
    }
    fn io(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: 2,
            error: error.into(),
        }
    }
    fn infeasible(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: 3,
            error: error.into(),
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { path } => cmd_validate(&path),
        Command::Solve(args) => cmd_solve(&args),
        Command::Bench(args) => cmd_bench(&args),
        Command::Generate(args) => cmd_generate(&args),
        Command::Oracle(args) => cmd_oracle(&args),
        Command::Check { instance, schedule } => cmd_check(&instance, &schedule),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(Failure::io)
}

fn write_out(path: Option<&Path>, text: &str) -> Outcome {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => io::stdout()
            .write_all(text.as_bytes())
            .context("cannot write to standard output"),
    }
    .map_err(Failure::io)
}

/// Parses and validates; every problem is an invalid-input failure.
fn load(path: &Path) -> Result<Instance, Failure> {
    let text = read(path)?;
    let inst = parse_facts(&text)
        .with_context(|| path.display().to_string())
        .map_err(Failure::invalid)?;
    let diagnostics = validate_instance(&inst);
    if !diagnostics.is_empty() {
        let list: Vec<String> = diagnostics.iter().map(ToString::to_string).collect();
        return Err(Failure::invalid(anyhow!("{}: {}", path.display(), list.join("; "))));
    }
    Ok(inst)
}

fn cmd_validate(path: &Path) -> Outcome {
    let inst = load(path)?;
    println!(
        "ok: {} lots, {} operations, {} machines",
        inst.lots.len(),
        inst.operation_count(),
        inst.machine_count()
    );
    Ok(())
}

fn solver_config(limits: &Limits, prealloc: AllocConfig) -> Result<SolverConfig, Failure> {
    let limit = |secs: f64, name: &str| {
        if limits.no_limit {
            Ok(None)
        } else if secs.is_finite() && secs > 0.0 {
            Ok(Some(Duration::from_secs_f64(secs)))
        } else {
            Err(Failure::invalid(anyhow!("{name} must be a positive number of seconds")))
        }
    };
    Ok(SolverConfig {
        stage1_limit: limit(limits.stage1_limit, "--stage1-limit")?,
        stage2_limit: limit(limits.stage2_limit, "--stage2-limit")?,
        prealloc,
        search: match limits.search {
            Search::Exact => SearchMode::ExactBnb,
            Search::Greedy => SearchMode::GreedySeedThenBnb,
        },
        rng_seed: limits.seed,
    })
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn cmd_solve(args: &SolveArgs) -> Outcome {
    let inst = load(&args.path)?;
    let prealloc = AllocConfig::new(args.sub_size, args.lot_step, args.by_setup).map_err(Failure::invalid)?;
    let cfg = solver_config(&args.limits, prealloc)?;
    let progress = args.progress;
    let result = solve_with_progress(&inst, &cfg, &mut |inc| {
        if progress {
            eprintln!("{inc}");
        }
    })
    .map_err(|e| match e {
        SolveError::NoFeasibleSchedule => Failure::infeasible(e),
        SolveError::Config(_) => Failure::invalid(e),
    })?;
    let (Some(best), Some(obj)) = (result.best, result.objectives) else {
        return Err(Failure::infeasible(anyhow!("no schedule found within the time limit")));
    };
    println!(
        "{obj} optimal={}/{}",
        yes_no(result.stage1_optimal),
        yes_no(result.stage2_optimal)
    );
    let opts = GanttOptions {
        scale: args.scale,
        ..GanttOptions::default()
    };
    let rendered = match args.out {
        None => return Ok(()),
        Some(OutFormat::Json) => schedule_to_json(&best) + "\n",
        Some(OutFormat::GanttSvg) => gantt_svg(&best, &opts),
        Some(OutFormat::GanttText) => gantt_text(&best, &opts),
    };
    write_out(args.output.as_deref(), &rendered)
}

fn threads() -> usize {
    std::env::var("SMSP_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n| n > 0)
        .unwrap_or(1)
}

fn cmd_bench(args: &BenchArgs) -> Outcome {
    let mut paths: Vec<PathBuf> = fs::read_dir(&args.dir)
        .with_context(|| format!("cannot read directory {}", args.dir.display()))
        .map_err(Failure::io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    let base = solver_config(&args.limits, AllocConfig::flexible())?;
    let configs = strategy_matrix();

    let mut loaded = Vec::new();
    let mut broken = Vec::new();
    for path in &paths {
        let id = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        match load(path) {
            Ok(inst) => loaded.push((id, inst)),
            Err(f) => broken.push((id, format!("{:#}", f.error))),
        }
    }
    let mut rows = run_bench(&loaded, &configs, &base, threads());
    for (id, error) in broken {
        for c in &configs {
            rows.push(BenchRow::failed(&id, c, error.clone()));
        }
    }
    rows.sort_by(|a, b| a.instance.cmp(&b.instance));

    let mut buf = Vec::new();
    write_csv(&rows, &mut buf).map_err(Failure::io)?;
    write_out(args.output.as_deref(), &String::from_utf8_lossy(&buf))
}

fn cmd_generate(args: &GenerateArgs) -> Outcome {
    let inst = generate_instance(&GeneratorParams {
        n_lots: args.lots,
        n_products: args.products,
        route_len: args.route_len,
        n_groups: args.groups,
        machines_per_group: args.machines,
        batch_fraction: args.batch_fraction,
        seed: args.seed,
    })
    .map_err(Failure::invalid)?;
    write_out(args.output.as_deref(), &serialize_facts(&inst))
}

fn cmd_oracle(args: &OracleArgs) -> Outcome {
    let inst = load(&args.path)?;
    let limits = OracleLimits {
        max_lots: args.max_lots,
        max_ops_per_lot: args.max_ops,
        max_machines_per_group: args.max_machines,
        max_enumerated_states: args.max_states,
    };
    let best = oracle_optimum(&inst, &limits).map_err(|e| match e {
        OracleError::NoFeasibleSchedule => Failure::infeasible(e),
        other => Failure::invalid(other),
    })?;
    let timed = compute_start_times(&best.schedule, &inst)
        .context("oracle schedule")
        .map_err(Failure::invalid)?;
    let doc = serde_json::json!({
        "objectives": best.objectives,
        "schedules": best.schedules,
        "states": best.states,
        "schedule": to_document(&timed),
    });
    let text = serde_json::to_string_pretty(&doc).expect("serializable") + "\n";
    write_out(None, &text)
}

fn cmd_check(instance: &Path, schedule: &Path) -> Outcome {
    let inst = load(instance)?;
    let text = read(schedule)?;
    let gs = schedule_from_json(&text)
        .with_context(|| schedule.display().to_string())
        .map_err(Failure::invalid)?;
    let obj = evaluate(&gs, &inst).map_err(Failure::invalid)?;
    println!("{obj}");
    Ok(())
}
