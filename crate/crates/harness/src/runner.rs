//! Single runs and parallel sweeps.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use fsi_core::driver::{simulate, RunDiagnostics, RunOutcome};
use fsi_core::metrics::{l1_error, FieldErrors};
use fsi_core::scenario::Scenario;

use crate::cache::{load_or_compute, ReferenceKey};
use crate::config::{beta_estimator_name, RunConfig};
use crate::report::{format_float, write_errors, write_profile, write_timeseries};
use crate::{HarnessError, Result};

#[derive(Debug, Clone)]
pub struct RunReport {
    pub config: RunConfig,
    pub outcome: RunOutcome,
    pub errors: FieldErrors,
    pub reference: ReferenceKey,
}

impl RunReport {
    /// `key = value` summary written as `report.txt`.
    pub fn summary(&self) -> String {
        let s = &self.config.spec;
        let mut out = String::new();
        let mut line = |k: &str, v: &dyn std::fmt::Display| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("scenario", &s.scenario.name());
        line("solver", &s.solver.name());
        line("epsilon", &format_float(s.epsilon));
        line("cells", &s.cells);
        line("ppc", &s.particles_per_cell);
        line("tfinal", &format_float(s.t_final));
        line("seed", &s.seed);
        line("fluid-solver", &s.fluid_solver);
        line("matching", &if s.matching { "on" } else { "off" });
        line("beta-estimator", &beta_estimator_name(s.beta_estimator));
        line("velocity-nodes", &s.velocity_nodes);
        line("steps", &self.outcome.steps);
        line("final_time", &format_float(self.outcome.final_time));
        line("reference", &self.reference.digest());
        for (name, v) in self.errors.as_array() {
            line(&format!("l1_error_{name}"), &format_float(v));
        }
        match self.outcome.diagnostics {
            RunDiagnostics::None => {}
            RunDiagnostics::Mcm(d) => line("diagnostics", &format_args!("{d:?}")),
            RunDiagnostics::Hybrid(d) => line("diagnostics", &format_args!("{d:?}")),
        }
        out
    }
}

/// Runs one configuration, compares it with its (cached) reference and
/// writes `profile.csv`, `timeseries.csv`, `errors.csv` and `report.txt`
/// into `config.out`.
pub fn run(config: &RunConfig) -> Result<RunReport> {
    let reference = ReferenceKey::for_run(&config.spec);
    let reference_rows = load_or_compute(&config.reference_dir, &reference)?;
    let outcome = simulate(&config.spec)?;
    let dx = Scenario::new(config.spec.scenario).grid(config.spec.cells)?.dx;
    let errors = l1_error(&outcome.profile, &reference_rows, dx)?;
    let report = RunReport {
        config: config.clone(),
        outcome,
        errors,
        reference,
    };
    let out = &config.out;
    fs::create_dir_all(out).map_err(|source| HarnessError::Io {
        path: out.clone(),
        source,
    })?;
    write_profile(&out.join("profile.csv"), &report.outcome.profile)?;
    write_timeseries(&out.join("timeseries.csv"), &report.outcome.timeseries)?;
    write_errors(&out.join("errors.csv"), &report.errors)?;
    let summary = out.join("report.txt");
    fs::write(&summary, report.summary()).map_err(|source| HarnessError::Io { path: summary, source })?;
    Ok(report)
}

/// Applies `f` to every job on up to `threads` worker threads; results keep
/// the job order.
fn parallel_map<T: Sync, R: Send>(jobs: &[T], threads: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new(jobs.iter().map(|_| None).collect());
    thread::scope(|s| {
        for _ in 0..threads.clamp(1, jobs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                let r = f(job);
                slots.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

pub fn default_threads() -> usize {
    thread::available_parallelism().map_or(1, |n| n.get())
}

/// Runs every configuration concurrently. Distinct references are
/// generated first so that no two runs compute the same one.
pub fn bench(configs: &[RunConfig], threads: usize) -> Vec<Result<RunReport>> {
    let mut references: Vec<(&Path, ReferenceKey)> = Vec::new();
    for c in configs {
        let key = ReferenceKey::for_run(&c.spec);
        if !references.iter().any(|(d, k)| *d == c.reference_dir && k.digest() == key.digest()) {
            references.push((&c.reference_dir, key));
        }
    }
    let failed: Vec<Option<String>> = parallel_map(&references, threads, |(dir, key)| {
        load_or_compute(dir, key).err().map(|e| e.to_string())
    });
    for e in failed.into_iter().flatten() {
        eprintln!("reference generation failed: {e}");
    }
    parallel_map(configs, threads, run)
}
