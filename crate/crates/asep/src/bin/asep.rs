//! Command-line front end for the open-boundary ASEP laboratory.

use asep::harness::{
    current_identity_residuals, current_table, exact_current_table, fmt_float, mix_exact_table,
    specialfn_check_table, sweep_coalescence, sweep_current_asymptotics, sweep_current_variance,
    sweep_second_class, ExperimentConfig, Table,
};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "asep",
    about = "Simulation and numerics laboratory for the open-boundary ASEP",
    version
)]
struct Cli {
    /// Flat key=value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output CSV path (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker thread count (output is independent of this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Cap on applied events per run (overrides the config).
    #[arg(long, global = true)]
    event_budget: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact stationary currents for small systems.
    ExactCurrent,
    /// Stationary current by the configured method (exact|contour|asymptotic).
    Current {
        /// Evaluation method (overrides the config).
        #[arg(long)]
        method: Option<String>,
    },
    /// Exact mixing times with Monte Carlo coalescence cross-checks.
    MixExact,
    /// Coalescence-time sweep with a power-law fit of the median.
    CoupleSweep,
    /// Variance of the time-T boundary current on the product line.
    VarSweep,
    /// Second-class particle drift and variance growth.
    SecondClass {
        /// Bulk asymmetry for the tracking runs.
        #[arg(long, default_value_t = 0.5)]
        q: f64,
    },
    /// Second-order current asymptotics over the scaling family.
    Asymptotics,
    /// Internal identities of the special-function stack.
    SpecialfnCheck,
    /// Pathwise current-identity residuals of the extended disagreement
    /// process (all zero on valid runs).
    CurrentIdentity {
        #[arg(long, default_value_t = 10)]
        replicas: u64,
        #[arg(long, default_value_t = 20)]
        times: usize,
        #[arg(long, default_value_t = 40.0)]
        horizon: f64,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, asep::Error> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::parse(&std::fs::read_to_string(path)?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(budget) = cli.event_budget {
        cfg.event_budget = Some(budget);
    }
    Ok(cfg)
}

fn emit(table: &Table, out: &Option<PathBuf>) -> std::io::Result<()> {
    let csv = table.to_csv();
    match out {
        Some(path) => std::fs::write(path, csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn run(cli: &Cli) -> Result<Table, asep::Error> {
    let mut cfg = load_config(cli)?;
    match &cli.command {
        Command::ExactCurrent => exact_current_table(&cfg),
        Command::Current { method } => {
            if let Some(m) = method {
                cfg.method = m.clone();
            }
            current_table(&cfg)
        }
        Command::MixExact => mix_exact_table(&cfg),
        Command::CoupleSweep => sweep_coalescence(&cfg).map(|(t, _)| t),
        Command::VarSweep => sweep_current_variance(&cfg).map(|(t, _)| t),
        Command::SecondClass { q } => sweep_second_class(&cfg, *q).map(|(t, _, _)| t),
        Command::Asymptotics => sweep_current_asymptotics(&cfg),
        Command::SpecialfnCheck => specialfn_check_table(&cfg),
        Command::CurrentIdentity {
            replicas,
            times,
            horizon,
        } => {
            let p = cfg.params_for(cfg.ns.first().copied().unwrap_or(8))?;
            let sample_times: Vec<f64> = (1..=*times)
                .map(|i| horizon * i as f64 / *times as f64)
                .collect();
            let halfwidth = ((2.0 * horizon).ceil() as i64 + 8).max(4);
            let mut table = Table::new(&["replica", "t", "residual"]);
            table.provenance(&cfg);
            for r in 0..*replicas {
                let residuals = current_identity_residuals(
                    cfg.rho,
                    p.alpha,
                    p.gamma,
                    p.q,
                    halfwidth,
                    &sample_times,
                    cfg.master_seed,
                    r,
                )?;
                for (t, res) in sample_times.iter().zip(residuals) {
                    table.row(vec![r.to_string(), fmt_float(*t), res.to_string()]);
                }
            }
            Ok(table)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: failed to configure thread pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(&cli) {
        Ok(table) => match emit(&table, &cli.out) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: failed to write output: {e}");
                ExitCode::FAILURE
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
