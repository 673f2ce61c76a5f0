use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use passfl::fl::Backend;
use passfl::harness::{
    emit_results, generate_scenario, load_config, load_data, repetition_seed, run_comparison, run_sweep, run_training, shard_sizes,
    ExperimentConfig, Results,
};
use passfl::optimizer::joint_optimize;
use passfl::Error;

#[derive(Parser)]
#[command(name = "passfl", version, about = "Over-the-air federated learning with a pinching-antenna server")]
struct Cli {
    /// TOML or JSON experiment configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimise the waveguide link and print the state and metrics.
    Solve,
    /// One federated training run with the configured backend.
    Train {
        #[arg(long)]
        backend: Option<Backend>,
    },
    /// Sweep one parameter over the configured values and backends.
    Sweep,
    /// IDEAL, PASS and MIMO side by side on the same placement.
    Fig1 {
        /// Number of rounds; 40 when neither this nor the config sets it.
        #[arg(long)]
        rounds: Option<usize>,
    },
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.scenario.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.directory = out.clone();
    }
    if let Command::Fig1 { rounds } = &cli.command {
        cfg.fl.rounds = rounds.unwrap_or(if cli.config.is_some() { cfg.fl.rounds } else { 40 });
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), Error> {
    let cfg = resolve(cli)?;
    let seed = cfg.scenario.seed;
    let out = cfg.output.directory.clone();
    match &cli.command {
        Command::Solve => {
            let total = match cfg.fl.dataset {
                passfl::harness::DatasetSource::Synthetic => cfg.fl.synthetic.train_samples,
                passfl::harness::DatasetSource::Mnist => load_data(&cfg)?.train.len(),
            };
            let scenario = generate_scenario(&cfg, &shard_sizes(total, cfg.scenario.devices), seed)?;
            let sol = joint_optimize(&cfg.system_params()?, &scenario, &cfg.solver_config())?;
            let report = json!({
                "positions": sol.state.positions,
                "schedule": sol.state.schedule,
                "power_scalings": sol.state.power_scalings.iter().map(|b| [b.re, b.im]).collect::<Vec<_>>(),
                "receive_scale": sol.state.receive_scale,
                "metrics": sol.metrics,
                "energy_trace": sol.trace.energies(),
            });
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Train { backend } => {
            let data = load_data(&cfg)?;
            let run = run_training(&cfg, &data, backend.unwrap_or(cfg.fl.backend), seed)?;
            let runs = [run];
            for p in emit_results(Results::Runs(&runs), &cfg, "train", vec![seed], &out)? {
                println!("{}", p.display());
            }
        }
        Command::Sweep => {
            let data = load_data(&cfg)?;
            let table = run_sweep(&cfg, &data)?;
            let seeds = (0..cfg.sweep.repetitions).map(|r| repetition_seed(seed, r)).collect();
            for p in emit_results(Results::Sweep(&table), &cfg, "sweep", seeds, &out)? {
                println!("{}", p.display());
            }
        }
        Command::Fig1 { .. } => {
            let data = load_data(&cfg)?;
            let runs = run_comparison(&cfg, &data, seed)?;
            for p in emit_results(Results::Runs(&runs), &cfg, "fig1", vec![seed], &out)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({"error": e.kind(), "message": e.to_string()}));
            ExitCode::FAILURE
        }
    }
}
