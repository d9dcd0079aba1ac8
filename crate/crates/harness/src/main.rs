use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use fsi_harness::cache::{load_or_compute, ReferenceKey};
use fsi_harness::config::config_from_settings;
use fsi_harness::report::write_profile;
use fsi_harness::runner::default_threads;
use fsi_harness::{bench, parse_sweep, run};

#[derive(Parser)]
#[command(name = "fsi", about = "Hybrid Monte Carlo / fluid solvers for the 1-D BGK equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write its CSV reports.
    Run(RunArgs),
    /// Run every configuration of a sweep file concurrently.
    Bench {
        #[arg(long)]
        sweep: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Compute a discrete-velocity reference profile.
    Reference(RunArgs),
}

/// Flags share their names with the keys of sweep files.
#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    cells: Option<String>,
    #[arg(long)]
    ppc: Option<String>,
    #[arg(long)]
    tfinal: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    fluid_solver: Option<String>,
    #[arg(long)]
    matching: Option<String>,
    #[arg(long)]
    beta_estimator: Option<String>,
    #[arg(long)]
    velocity_nodes: Option<String>,
    #[arg(long)]
    reference_dir: Option<String>,
    #[arg(long)]
    out: Option<String>,
}

impl RunArgs {
    fn settings(&self) -> Vec<(usize, &str, &str)> {
        [
            ("scenario", &self.scenario),
            ("solver", &self.solver),
            ("epsilon", &self.epsilon),
            ("cells", &self.cells),
            ("ppc", &self.ppc),
            ("tfinal", &self.tfinal),
            ("seed", &self.seed),
            ("fluid-solver", &self.fluid_solver),
            ("matching", &self.matching),
            ("beta-estimator", &self.beta_estimator),
            ("velocity-nodes", &self.velocity_nodes),
            ("reference-dir", &self.reference_dir),
            ("out", &self.out),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_deref().map(|v| (0, k, v)))
        .collect()
    }
}

fn main() -> anyhow::Result<ExitCode> {
    match Cli::parse().command {
        Command::Run(args) => {
            let config = config_from_settings(&args.settings())?;
            let report = run(&config)?;
            let e = report.errors;
            println!(
                "{}: {} steps, L1 rho {:.4e} u {:.4e} T {:.4e}",
                config.out.display(),
                report.outcome.steps,
                e.rho,
                e.u,
                e.temperature
            );
        }
        Command::Bench { sweep, threads } => {
            let text = std::fs::read_to_string(&sweep).with_context(|| format!("reading {}", sweep.display()))?;
            let configs = parse_sweep(&text)?;
            let reports = bench(&configs, threads.unwrap_or_else(default_threads));
            let mut failures = 0;
            println!("scenario,solver,epsilon,seed,steps,rho,u,T");
            for (config, report) in configs.iter().zip(reports) {
                let s = &config.spec;
                match report {
                    Ok(r) => println!(
                        "{},{},{:e},{},{},{:.4e},{:.4e},{:.4e}",
                        s.scenario.name(),
                        s.solver.name(),
                        s.epsilon,
                        s.seed,
                        r.outcome.steps,
                        r.errors.rho,
                        r.errors.u,
                        r.errors.temperature
                    ),
                    Err(e) => {
                        failures += 1;
                        eprintln!("{}: {e}", config.out.display());
                    }
                }
            }
            if failures > 0 {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Reference(args) => {
            let config = config_from_settings(&args.settings())?;
            // `--cells` sets the reference grid itself; the default matches
            // the reference used for runs at the scenario's resolution.
            let mut key = ReferenceKey {
                velocity_nodes: config.spec.velocity_nodes,
                ..ReferenceKey::for_run(&config.spec)
            };
            if args.cells.is_some() {
                key.cells = config.spec.cells;
            }
            let rows = match args.reference_dir {
                Some(_) => load_or_compute(&config.reference_dir, &key)?,
                None => key.compute()?,
            };
            let out = args.out.map_or_else(|| PathBuf::from("reference.csv"), PathBuf::from);
            write_profile(&out, &rows)?;
            println!("{}: {} cells, key {}", out.display(), rows.len(), key.digest());
        }
    }
    Ok(ExitCode::SUCCESS)
}
