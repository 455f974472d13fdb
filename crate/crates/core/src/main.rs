use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use marketsim::analytics::RunStatistics;
use marketsim::config::{load_config, ConfigError, RunConfig};
use marketsim::experiments::{run_ensemble, run_single, scenario_streak};
use marketsim::io::{emit_scenario, emit_stats, emit_sweep, emit_timeseries, read_timeseries};
use marketsim::news::NewsSpec;

#[derive(Parser)]
#[command(
    name = "marketsim",
    version,
    about = "Agent-based market simulator with adaptive trust dynamics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation; writes timeseries.csv and stats.csv
    Simulate(RunArgs),
    /// Run the parameter sweep from the config's sweep section; writes
    /// sweep.csv and an append-only journal that makes reruns resumable
    Sweep(RunArgs),
    /// Run the scripted news scenario from the config; writes
    /// timeseries.csv and scenario.csv with the news-weight response
    Scenario(RunArgs),
    /// Recompute statistics from an existing timeseries.csv
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file; every section is optional and {} is the baseline
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config's root seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's number of steps
    #[arg(long)]
    steps: Option<usize>,
    /// Override the config's output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Timeseries CSV produced by simulate
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    run: RunArgs,
}

fn load(args: &RunArgs) -> Result<RunConfig, ConfigError> {
    let mut config = match &args.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.model.seed = seed;
    }
    if let Some(steps) = args.steps {
        config.model.n_steps = steps;
    }
    if let Some(out) = &args.out {
        config.output_dir = out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn workers() -> Result<usize, ConfigError> {
    match std::env::var("MARKETSIM_WORKERS") {
        Ok(s) => match s.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(ConfigError::invalid(
                "MARKETSIM_WORKERS",
                format!("must be a positive integer, got {s:?}"),
            )),
        },
        Err(_) => Ok(0), // 0 sizes the pool to the machine
    }
}

fn cmd_simulate(args: RunArgs) -> anyhow::Result<()> {
    let config = load(&args)?;
    let run = run_single(&config.model, &config.news, &config.analysis)?;
    let ts_path = config.output_dir.join("timeseries.csv");
    emit_timeseries(&run.records, &ts_path)
        .with_context(|| format!("writing {}", ts_path.display()))?;
    let stats_path = config.output_dir.join("stats.csv");
    emit_stats(&run.stats, Some(run.cap_events), &config.analysis, &stats_path)
        .with_context(|| format!("writing {}", stats_path.display()))?;
    println!(
        "simulated {} steps (seed {}), wrote {} and {}",
        run.records.len(),
        config.model.seed,
        ts_path.display(),
        stats_path.display()
    );
    Ok(())
}

fn cmd_sweep(args: RunArgs) -> anyhow::Result<()> {
    let config = load(&args)?;
    let spec = config
        .sweep
        .as_ref()
        .ok_or_else(|| ConfigError::invalid("sweep", "the sweep command needs a sweep section"))?;
    let journal = config.output_dir.join("sweep_journal.csv");
    let result = run_ensemble(&config.model, spec, Some(&journal), workers()?)?;
    let sweep_path = config.output_dir.join("sweep.csv");
    emit_sweep(&result, &sweep_path).with_context(|| format!("writing {}", sweep_path.display()))?;
    let incomplete = result.points.iter().filter(|p| !p.complete).count();
    println!(
        "swept {} grid points x {} realizations, wrote {}{}",
        result.points.len(),
        spec.n_realizations,
        sweep_path.display(),
        if incomplete > 0 { format!(" ({incomplete} incomplete points)") } else { String::new() }
    );
    Ok(())
}

fn cmd_scenario(args: RunArgs) -> anyhow::Result<()> {
    let config = load(&args)?;
    let entry = match &config.news {
        NewsSpec::Scripted { entries } if entries.len() == 1 => &entries[0],
        _ => {
            return Err(ConfigError::invalid(
                "news",
                "the scenario command needs scripted news with exactly one entry",
            )
            .into())
        }
    };
    let end = entry.start_step + entry.values.len() - 1;
    if end >= config.model.n_steps {
        return Err(ConfigError::invalid(
            "news.entries",
            format!("streak ends at step {end} but the run has {} steps", config.model.n_steps),
        )
        .into());
    }
    let (records, diag) = scenario_streak(&config.model, entry)?;
    let ts_path = config.output_dir.join("timeseries.csv");
    emit_timeseries(&records, &ts_path).with_context(|| format!("writing {}", ts_path.display()))?;
    let scen_path = config.output_dir.join("scenario.csv");
    emit_scenario(&diag, &scen_path).with_context(|| format!("writing {}", scen_path.display()))?;
    println!(
        "scenario streak [{}, {}]: responded={}, peak |u| {:.4} at step {}, e-fold {:.1} steps; wrote {} and {}",
        diag.streak_start,
        diag.streak_end,
        diag.responded,
        diag.peak_abs_u,
        diag.peak_step,
        diag.efold_steps,
        ts_path.display(),
        scen_path.display()
    );
    Ok(())
}

fn cmd_analyze(args: AnalyzeArgs) -> anyhow::Result<()> {
    let config = load(&args.run)?;
    let records = read_timeseries(&args.input)?;
    let stats = RunStatistics::from_records(&records, config.model.burn_in, &config.analysis)
        .with_context(|| format!("analyzing {}", args.input.display()))?;
    let stats_path = config.output_dir.join("stats.csv");
    emit_stats(&stats, None, &config.analysis, &stats_path)
        .with_context(|| format!("writing {}", stats_path.display()))?;
    println!("analyzed {} records, wrote {}", records.len(), stats_path.display());
    Ok(())
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Scenario(args) => cmd_scenario(args),
        Command::Analyze(args) => cmd_analyze(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
