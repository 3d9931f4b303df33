use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use synccount::pulling::threshold_stats;
use synccount::sim::detect_stabilization_with;
use synccount_cli::{
    load_replay, prediction_table, replay, run_experiment, verify_bounds, ConfigError,
    ExperimentConfig, RunOptions,
};

#[derive(Parser)]
#[command(name = "synccount", version, about = "Run and inspect self-stabilising counter experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the prediction table and layer report of a plan.
    Plan(Common),
    /// Execute the configured run matrix and verify the bounds.
    Run(Common),
    /// Monte-Carlo frequencies of the sampled threshold tests.
    Stats(StatsArgs),
    /// Re-execute a single run from its recorded parameter file.
    Replay(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Print predictions without simulating.
    #[arg(long)]
    predict_only: bool,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long, default_value_t = 64)]
    samples: usize,
    #[arg(long, default_value_t = 0.75)]
    correct_fraction: f64,
    #[arg(long, default_value_t = 1.0)]
    value_fraction: f64,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) if err.downcast_ref::<ConfigError>().is_some() => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn print_plan(cfg: &ExperimentConfig) -> Result<()> {
    print!("{}", prediction_table(&cfg.plan)?);
    let plan = cfg.build_plan()?;
    println!();
    print!("{}", plan.report());
    for note in &plan.notes {
        println!("note: {note}");
    }
    Ok(())
}

fn execute(command: Command) -> Result<bool> {
    match command {
        Command::Plan(args) => {
            let cfg = ExperimentConfig::load(&args.config)?;
            print_plan(&cfg)?;
            Ok(true)
        }
        Command::Run(args) => {
            let cfg = ExperimentConfig::load(&args.config)?;
            if args.predict_only {
                print_plan(&cfg)?;
                return Ok(true);
            }
            let opts = RunOptions {
                out: args.out,
                seed: args.seed,
                jobs: args.jobs,
            };
            let summary = run_experiment(&cfg, &opts)?;
            let assertions = verify_bounds(&summary);
            let text = summary.render();
            let head_len = text.find("placement,").unwrap_or(text.len());
            print!("{}", &text[..head_len]);
            for a in &assertions {
                println!("{}: {} ({})", a.name, if a.pass { "pass" } else { "FAIL" }, a.detail);
            }
            Ok(assertions.iter().all(|a| a.pass))
        }
        Command::Stats(args) => {
            let stats = threshold_stats(
                args.samples,
                args.correct_fraction,
                args.value_fraction,
                args.trials,
                args.seed,
            )
            .map_err(|e| ConfigError(e.to_string()))?;
            let report = stats.report();
            print!("{report}");
            if let Some(dir) = args.out {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("stats.csv"), &report)
                    .with_context(|| format!("writing {}", dir.display()))?;
            }
            Ok(true)
        }
        Command::Replay(args) => {
            let params = load_replay(&args.config)?;
            let (trace, alg) = replay(&params)?;
            let report = detect_stabilization_with(&trace, alg.modulus(), params.experiment.run.min_window);
            print!("{report}");
            if let Some(dir) = args.out {
                std::fs::create_dir_all(&dir)?;
                let mut csv = Vec::new();
                trace.write_csv(&alg, &mut csv)?;
                std::fs::write(dir.join("replay.csv"), csv)?;
            }
            Ok(report.within_bound)
        }
    }
}
