use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use pushsort_core::harness::{
    export_svgs, generate_scene, run_batch, run_trial, Algo, RunConfig, ScenarioSpec, TrajectoryLog,
};
use pushsort_core::planner::derive_rng;
use pushsort_core::scene::SceneFile;

#[derive(Parser)]
#[command(name = "pushsort", version, about = "Sort objects by class with planar pushing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random scene file.
    Gen(GenArgs),
    /// Run one closed-loop trial on a scene file.
    Solve(SolveArgs),
    /// Run a seeded batch of trials and write summary statistics.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 8)]
    objects: usize,
    #[arg(long, default_value_t = 2)]
    classes: usize,
    /// Fraction of U-shaped objects.
    #[arg(long, default_value_t = 0.0)]
    nonconvex: f64,
    #[arg(long, default_value_t = 0)]
    obstacles: usize,
    /// Workspace side, meters.
    #[arg(long, default_value_t = 0.5)]
    workspace: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long, default_value = "mcts")]
    algo: Algo,
    /// JSON object with planner and physics fields; omitted fields keep defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for `trajectory.json`.
    #[arg(long)]
    log: PathBuf,
    /// Write an SVG snapshot every k steps into `<log>/svg`.
    #[arg(long, value_name = "K")]
    svg: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    /// Scenario spec JSON.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, default_value = "mcts")]
    algo: Algo,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Relative std of the execution friction noise.
    #[arg(long, default_value_t = 0.0)]
    noise_p: f64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the full summary, per-trial records included, as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

fn load_config(path: Option<&PathBuf>) -> anyhow::Result<RunConfig> {
    Ok(match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    })
}

fn gen(args: GenArgs) -> anyhow::Result<()> {
    let spec = ScenarioSpec {
        n_objects: args.objects,
        n_classes: args.classes,
        ratio_nonconvex: args.nonconvex,
        n_obstacles: args.obstacles,
        workspace_side: args.workspace,
        seed: args.seed,
        ..ScenarioSpec::default()
    };
    let (scene, state) = generate_scene(&spec, &mut derive_rng(args.seed, 0))?;
    SceneFile::from_parts(&scene, &state).save(&args.out)?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn solve(args: SolveArgs) -> anyhow::Result<()> {
    let run = load_config(args.config.as_ref())?;
    let (scene, start) = SceneFile::load(&args.scene)?;
    let record = run_trial(&scene, &start, args.algo, &run.planner, &run.physics, args.seed);
    if let Some(e) = &record.error {
        bail!("trial failed: {e}");
    }
    let log = TrajectoryLog::from_record(&record, args.scene.display().to_string());
    let path = args.log.join("trajectory.json");
    log.save(&path)?;
    if let Some(k) = args.svg {
        if k == 0 {
            bail!("--svg needs a positive step interval");
        }
        export_svgs(&scene, &log, k, &args.log.join("svg"))?;
    }
    println!(
        "{} after {} steps ({:.3} s planning), log at {}",
        record.outcome,
        record.steps,
        record.plan_time,
        path.display()
    );
    Ok(())
}

fn bench(args: BenchArgs) -> anyhow::Result<()> {
    let spec = ScenarioSpec::load(&args.spec)?;
    let mut run = load_config(args.config.as_ref())?;
    run.physics.noise_std_frac = args.noise_p;
    let summary = run_batch(&spec, args.algo, &run.planner, &run.physics, args.trials, args.workers)?;
    summary.write_csv(&args.out)?;
    if let Some(p) = &args.json {
        std::fs::write(p, summary.to_json()).with_context(|| format!("writing {}", p.display()))?;
    }
    println!("{}\n{}", pushsort_core::harness::BatchSummary::CSV_HEADER, summary.csv_row());
    Ok(())
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Gen(a) => gen(a),
        Command::Solve(a) => solve(a),
        Command::Bench(a) => bench(a),
    }
}
