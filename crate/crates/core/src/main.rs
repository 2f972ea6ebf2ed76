use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use memlstm::cli::{self, CliError, CurveRange, Options, RunConfig, SweepParam};

/// Memristive-crossbar LSTM forecasting simulator.
#[derive(Debug, Parser)]
#[command(name = "memlstm", version, about)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// JSON run configuration ("version": "v1"); flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Global seed for training and device variation.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Omit generation timestamps from reports.
    #[arg(long, global = true)]
    no_timestamp: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the reference network and write weights.json.
    Train {
        /// Override the training CSV.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Run the analog pipeline over the test rows.
    Simulate {
        /// Weight file (default: <out>/weights.json).
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Monte Carlo trials; trial 0 provides the per-point outputs.
        #[arg(long, default_value_t = 1)]
        trials: u64,
        /// Programming variation (lognormal sigma).
        #[arg(long)]
        sigma_rel: Option<f64>,
        /// Per-read conductance noise.
        #[arg(long)]
        read_noise_rel: Option<f64>,
        /// Programming levels: an integer >= 2 or "continuous".
        #[arg(long)]
        levels: Option<String>,
    },
    /// Compare software and analog prediction series against targets.
    Compare {
        #[arg(long)]
        software: PathBuf,
        #[arg(long)]
        analog: PathBuf,
        #[arg(long)]
        targets: PathBuf,
    },
    /// Mean/std analog RMSE over seeded trials for a list of values.
    Sweep {
        /// One of sigma_rel, levels, droop_rate, gain_error_rel.
        #[arg(long)]
        param: String,
        /// Comma-separated values, e.g. 2,4,8,continuous.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long, default_value_t = 30)]
        trials: u64,
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// Write sigmoid, tanh and multiplier transfer curves.
    DumpCurves {
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        start: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        stop: f64,
        #[arg(long, default_value_t = 0.001)]
        step: f64,
    },
    /// Write programmed crossbar conductances.
    DumpCrossbar {
        #[arg(long)]
        weights: Option<PathBuf>,
    },
}

fn resolve_config(global: &GlobalArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &global.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = global.seed {
        cfg.set_seed(seed);
    }
    if let Some(out) = &global.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = resolve_config(&cli.global)?;
    let opts = Options {
        no_timestamp: cli.global.no_timestamp,
    };

    match cli.command {
        Command::Train { dataset } => {
            if dataset.is_some() {
                cfg.dataset = dataset;
            }
            let report = cli::cmd_train(&cfg, &opts)?;
            print!("{}", report.summary());
        }
        Command::Simulate {
            weights,
            trials,
            sigma_rel,
            read_noise_rel,
            levels,
        } => {
            if let Some(s) = sigma_rel {
                cfg.variation.sigma_rel = s;
            }
            if let Some(r) = read_noise_rel {
                cfg.variation.read_noise_rel = r;
            }
            if let Some(l) = levels {
                cfg.memristor.levels = l.parse().map_err(CliError::Usage)?;
            }
            cfg.validate()?;
            let weights = weights.unwrap_or_else(|| cfg.weights_path());
            let report = cli::cmd_simulate(&cfg, &weights, trials, &opts)?;
            print!("{}", report.summary());
        }
        Command::Compare {
            software,
            analog,
            targets,
        } => {
            let report = cli::cmd_compare(&cfg, &software, &analog, &targets, &opts)?;
            print!("{}", report.summary());
        }
        Command::Sweep {
            param,
            values,
            trials,
            weights,
        } => {
            let param: SweepParam = param.parse()?;
            let weights = weights.unwrap_or_else(|| cfg.weights_path());
            let report = cli::cmd_sweep(&cfg, &weights, param, &values, trials, &opts)?;
            print!("{}", report.to_csv());
        }
        Command::DumpCurves { start, stop, step } => {
            for path in cli::cmd_dump_curves(&cfg, CurveRange { start, stop, step })? {
                println!("{}", path.display());
            }
        }
        Command::DumpCrossbar { weights } => {
            let weights = weights.unwrap_or_else(|| cfg.weights_path());
            for path in cli::cmd_dump_crossbar(&cfg, &weights)? {
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("{}", CliError::Usage(first.trim_start_matches("error: ").to_string()).render());
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.render());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
