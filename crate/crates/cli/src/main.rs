use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pipe_cli::bench::{cmd_bench, BenchArgs};
use pipe_cli::batch::cmd_batch;
use pipe_cli::config::{load_document, BatchSpec, ExperimentConfig, StartSpec, WorldSource};
use pipe_cli::genmap::{cmd_gen_map, GenMapArgs};
use pipe_cli::oracle::{cmd_oracle_check, OracleArgs};
use pipe_cli::run::{cmd_run, run_dir_name};
use pipe_cli::{CliError, CliResult, EXIT_OK, EXIT_ORACLE_FAILURE, EXIT_RUN_FAILURE};
use pipe_core::geometry::MaskParams;
use pipe_core::ingestion::MapClass;
use pipe_core::planners::PlannerKind;

#[derive(Parser)]
#[command(name = "pipe", version, about = "Frontier exploration workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one world from one or more start poses.
    Run(RunArgs),
    /// Sweep maps × starts × planners and aggregate.
    Batch(BatchArgs),
    /// Compare union path masks against per-pose rasterization.
    OracleCheck(OracleCli),
    /// Time path-mask construction and parallel waypoint selection.
    Bench(BenchCli),
    /// Write a procedural floorplan.
    GenMap(GenMapCli),
}

#[derive(Args)]
struct RunArgs {
    /// JSON or TOML experiment document.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Generated world class when no config is given.
    #[arg(long)]
    class: Option<MapClass>,
    #[arg(long)]
    planner: Option<PlannerKind>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    budget: Option<usize>,
    /// Number of sampled start poses.
    #[arg(long)]
    starts: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    snapshot_every: Option<usize>,
}

#[derive(Args)]
struct BatchArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct OracleCli {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 64)]
    size: usize,
    #[arg(long, default_value_t = 50)]
    max_path: usize,
    #[arg(long, default_value_t = 20.0)]
    range: f64,
    #[arg(long, default_value_t = 360)]
    rays: usize,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Skip hole extraction on the union route.
    #[arg(long)]
    no_holes: bool,
    /// Counterexample directory.
    #[arg(long, default_value = "oracle_failures")]
    out: PathBuf,
}

#[derive(Args)]
struct BenchCli {
    #[arg(long, default_value = "large")]
    class: MapClass,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Cells per meter; 10 when omitted.
    #[arg(long)]
    resolution: Option<f64>,
    #[arg(long, default_value_t = 200)]
    path_len: usize,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long, default_value_t = 8)]
    workers: usize,
    #[arg(long, default_value_t = 200.0)]
    range: f64,
    #[arg(long, default_value_t = 360)]
    rays: usize,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long, default_value_t = 300)]
    warmup: usize,
    /// Time mask construction only.
    #[arg(long)]
    masks_only: bool,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct GenMapCli {
    #[arg(long)]
    class: MapClass,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    resolution: Option<f64>,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    pgm: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

fn dispatch(command: Command) -> CliResult<i32> {
    match command {
        Command::Run(a) => run(a),
        Command::Batch(a) => batch(a),
        Command::OracleCheck(a) => oracle(a),
        Command::Bench(a) => bench(a),
        Command::GenMap(a) => {
            cmd_gen_map(&GenMapArgs {
                class: a.class,
                seed: a.seed,
                resolution: a.resolution,
                json: a.json,
                pgm: a.pgm,
            })?;
            Ok(EXIT_OK)
        }
    }
}

fn run(a: RunArgs) -> CliResult<i32> {
    let mut cfg = match (&a.config, a.class) {
        (Some(path), _) => load_document::<ExperimentConfig>(path)?,
        (None, Some(class)) => ExperimentConfig::new(WorldSource::Generated {
            class,
            seed: None,
            resolution: None,
        }),
        (None, None) => return Err(CliError::Usage("give --config or --class".into())),
    };
    if let Some(p) = a.planner {
        cfg.sim.planner = p;
    }
    if let Some(s) = a.seed {
        cfg.sim.seed = s;
    }
    if let Some(b) = a.budget {
        cfg.sim.budget = b;
    }
    if let Some(k) = a.starts {
        cfg.starts = StartSpec::Sample(k);
    }
    if let Some(o) = a.output {
        cfg.output = o;
    }
    if let Some(w) = a.workers {
        cfg.workers = w;
    }
    if a.snapshot_every.is_some() {
        cfg.snapshot_every = a.snapshot_every;
    }
    for r in cmd_run(&cfg)? {
        if let Ok(rec) = &r.outcome {
            let s = &rec.summary;
            println!(
                "{} start {} {}: auc {:.1} t90 {} t95 {} final iou {:.3} after {} steps ({:?})",
                run_dir_name(r.index),
                r.start,
                rec.planner,
                s.auc,
                fmt_t(s.t90),
                fmt_t(s.t95),
                s.final_iou,
                s.final_t,
                s.termination
            );
        }
    }
    Ok(EXIT_OK)
}

fn fmt_t(t: Option<usize>) -> String {
    t.map(|t| t.to_string()).unwrap_or_else(|| "-".into())
}

fn batch(a: BatchArgs) -> CliResult<i32> {
    let mut spec: BatchSpec = load_document(&a.config)?;
    if let Some(s) = a.seed {
        spec.sim.seed = s;
    }
    if let Some(o) = a.output {
        spec.output = o;
    }
    if let Some(w) = a.workers {
        spec.workers = w;
    }
    let report = cmd_batch(&spec)?;
    print!("{}", pipe_core::metrics::format_tables(&report.aggregate));
    let failures = report.failures();
    if failures > 0 {
        eprintln!("{failures} of {} runs failed", report.rows.len());
        return Ok(EXIT_RUN_FAILURE);
    }
    Ok(EXIT_OK)
}

fn oracle(a: OracleCli) -> CliResult<i32> {
    let args = OracleArgs {
        seed: a.seed,
        trials: a.trials,
        size: a.size,
        max_path: a.max_path,
        mask: MaskParams {
            range: a.range,
            samples: a.rays,
            stride: a.stride,
        },
        holes: !a.no_holes,
        out: a.out,
        ..OracleArgs::default()
    };
    let report = cmd_oracle_check(&args)?;
    for t in report.failures() {
        println!(
            "FAIL {}: {} differing (allowed {}), {} off ring, {} trapped covered",
            t.name, t.differing, t.allowance, t.off_ring, t.trapped_covered
        );
    }
    println!(
        "{} trials, max symmetric difference {} cells",
        report.trials.len(),
        report.max_difference
    );
    if report.passed() {
        println!("PASS");
        Ok(EXIT_OK)
    } else {
        println!("FAIL");
        Ok(EXIT_ORACLE_FAILURE)
    }
}

fn bench(a: BenchCli) -> CliResult<i32> {
    let report = cmd_bench(&BenchArgs {
        class: a.class,
        seed: a.seed,
        resolution: a.resolution,
        path_len: a.path_len,
        reps: a.reps,
        workers: a.workers,
        mask: MaskParams {
            range: a.range,
            samples: a.rays,
            stride: a.stride,
        },
        warmup_steps: a.warmup,
        masks_only: a.masks_only,
        ..BenchArgs::default()
    })?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report).map_err(|e| CliError::Run(e.to_string()))?);
    } else {
        print!("{}", report.render());
    }
    Ok(EXIT_OK)
}
