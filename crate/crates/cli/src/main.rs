use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tscorrect_cli::config::RunConfig;
use tscorrect_cli::pipeline::summary_table;
use tscorrect_cli::{
    cmd_compare, cmd_correct, cmd_evaluate, cmd_evaluate_file, cmd_fit_density, cmd_generate,
    cmd_simulate, cmd_verify_theory, theory_failure, CliError,
};

#[derive(Parser)]
#[command(name = "tscorrect")]
#[command(about = "Metropolis-Hastings correction of synthetic time series")]
#[command(version)]
struct Cli {
    /// JSON run configuration; defaults apply to omitted fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Run a single seed instead of the configured list.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true)]
    beta: Option<f64>,

    #[arg(long, global = true)]
    epsilon: Option<f64>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for per-seed parallelism.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured dataset to series.csv.
    Simulate,
    /// Fit the first-difference density and write density.json.
    FitDensity,
    /// Roll out the uncorrected source for each seed.
    Generate,
    /// Generate and correct for each seed.
    Correct,
    /// Generate, correct and score each seed.
    Evaluate {
        /// Score this CSV against the real target segment instead.
        #[arg(long)]
        gen: Option<PathBuf>,
    },
    /// Evaluate all seeds and write summary.json.
    Compare,
    /// Run the finite-chain verification suite.
    VerifyTheory,
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(beta) = cli.beta {
        cfg.correction.beta = beta;
    }
    if let Some(eps) = cli.epsilon {
        cfg.correction.epsilon = eps;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Config(format!("workers: {e}")))?;
    }
    if let Command::VerifyTheory = cli.command {
        let report = cmd_verify_theory(cli.seed.unwrap_or(0), cli.out.as_deref())?;
        print_json(&report);
        return theory_failure(&report).map_or(Ok(()), Err);
    }
    let cfg = load_config(&cli)?;
    match &cli.command {
        Command::Simulate => println!("{}", cmd_simulate(&cfg)?.display()),
        Command::FitDensity => println!("{}", cmd_fit_density(&cfg)?.display()),
        Command::Generate => {
            for p in cmd_generate(&cfg)? {
                println!("{}", p.display());
            }
        }
        Command::Correct => {
            for (seed, diag) in cmd_correct(&cfg)? {
                print_json(&serde_json::json!({ "seed": seed, "correction": diag }));
            }
        }
        Command::Evaluate { gen: Some(path) } => {
            println!("{}", cmd_evaluate_file(&cfg, path)?.display())
        }
        Command::Evaluate { gen: None } => {
            for r in cmd_evaluate(&cfg)? {
                print_json(&r);
            }
        }
        Command::Compare => print!("{}", summary_table(&cmd_compare(&cfg)?)),
        Command::VerifyTheory => unreachable!("handled above"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}
