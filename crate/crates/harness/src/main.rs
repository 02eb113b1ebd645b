use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use qtompc_harness::{
    bounds_csv, bounds_report, bounds_text, lstar_study, run_compare, run_experiment,
    write_artifacts, Algorithm, ExperimentConfig, Uncertainty,
};

/// Time-optimal MPC of a qubit with measurement feedback: experiments and
/// reports.
#[derive(Parser, Debug)]
#[command(name = "qtompc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML configuration; every key is optional.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Monte Carlo trials per experiment.
    #[arg(long, global = true, value_name = "N")]
    trials: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    algorithm: Option<Algorithm>,
    #[arg(long, global = true, value_enum)]
    uncertainty: Option<Uncertainty>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One experiment: per-step, per-trial and series CSVs plus a summary.
    Run,
    /// Algorithm x uncertainty grid of tracking error and infidelity.
    Compare,
    /// Analytical bounds against simulated success runs.
    Bounds,
    /// Nominal closed-loop transfer and minimal step counts.
    Lstar,
}

fn load(common: &Common) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = common.trials {
        cfg.trials = trials;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    if let Some(a) = common.algorithm {
        cfg.algorithm = a;
    }
    if let Some(u) = common.uncertainty {
        cfg.uncertainty = u;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write(path: PathBuf, text: &str) -> anyhow::Result<()> {
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let cfg = load(&cli.common)?;
    let out = cfg.out_dir.clone();
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    match cli.command {
        Command::Run => {
            let exp = run_experiment(&cfg)?;
            let paths = write_artifacts(&exp, &out)?;
            println!("{}", serde_json::to_string_pretty(&exp.summary)?);
            eprintln!("wrote {}", paths.summary.display());
            if exp.failed() > 0 {
                eprintln!("{} of {} trials failed", exp.failed(), exp.summary.trials);
            }
            Ok(exp.failed() == 0)
        }
        Command::Compare => {
            let algorithms = match cli.common.algorithm {
                Some(a) => vec![a],
                None => Algorithm::ALL.to_vec(),
            };
            let uncertainties = match cli.common.uncertainty {
                Some(u) => vec![u],
                None => Uncertainty::ALL.to_vec(),
            };
            let (table, _) = run_compare(&cfg, &algorithms, &uncertainties, Some(&out))?;
            print!("{}", table.to_text());
            if table.failed() > 0 {
                eprintln!("{} trials failed across the grid", table.failed());
            }
            Ok(table.failed() == 0)
        }
        Command::Bounds => {
            let rows = bounds_report(&cfg)?;
            write(out.join("bounds.csv"), &bounds_csv(&rows)?)?;
            let text = bounds_text(&rows);
            write(out.join("bounds.txt"), &text)?;
            print!("{text}");
            Ok(rows.iter().all(|r| r.empirical_ok()))
        }
        Command::Lstar => {
            let study = lstar_study(&cfg)?;
            write(out.join("lstar.csv"), &study.steps_csv()?)?;
            write(out.join("lstar_theta.csv"), &study.theta_csv()?)?;
            print!("{}", study.text());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
