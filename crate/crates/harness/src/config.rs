//! Run configuration from `key = value` settings.
//!
//! Keys are the CLI flag names without the leading dashes. In a sweep file a
//! value may be a comma-separated list; the sweep is the cartesian product
//! of all lists, in file order with the last key varying fastest.

use std::path::PathBuf;

use fsi_core::driver::{fluid_solver_id, RunSpec, SolverKind};
use fsi_core::hybrid::BetaEstimator;
use fsi_core::scenario::ScenarioKind;

use crate::{HarnessError, Result};

pub const KEYS: [&str; 13] = [
    "scenario",
    "solver",
    "epsilon",
    "cells",
    "ppc",
    "tfinal",
    "seed",
    "fluid-solver",
    "matching",
    "beta-estimator",
    "velocity-nodes",
    "out",
    "reference-dir",
];

/// One fully specified run and where its outputs go.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub spec: RunSpec,
    pub out: PathBuf,
    /// Cache directory for reference solutions.
    pub reference_dir: PathBuf,
}

pub fn beta_estimator_name(e: BetaEstimator) -> &'static str {
    match e {
        BetaEstimator::Bound => "bound",
        BetaEstimator::Reconstruction => "reconstruction",
    }
}

fn config_error(line: usize, message: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        line,
        message: message.into(),
    }
}

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| config_error(line, format!("invalid value {value:?} for {key}")))
}

/// Builds a run from `(line, key, value)` settings. The scenario fixes the
/// defaults for cells, particles per cell and final time; every other
/// setting overrides a default regardless of its position.
pub fn config_from_settings(settings: &[(usize, &str, &str)]) -> Result<RunConfig> {
    let find = |key: &str| settings.iter().rev().find(|(_, k, _)| *k == key);
    let scenario = match find("scenario") {
        Some(&(line, k, v)) => v.parse::<ScenarioKind>().map_err(|_| config_error(line, format!("unknown {k} {v:?}")))?,
        None => ScenarioKind::Accuracy,
    };
    let solver = match find("solver") {
        Some(&(line, k, v)) => v.parse::<SolverKind>().map_err(|_| config_error(line, format!("unknown {k} {v:?}")))?,
        None => SolverKind::Fsi,
    };
    let mut spec = RunSpec::new(scenario, solver);
    let mut out = None;
    let mut reference_dir = None;
    for &(line, key, value) in settings {
        match key {
            "scenario" | "solver" => {}
            "epsilon" => spec.epsilon = parse_value(line, key, value)?,
            "cells" => spec.cells = parse_value(line, key, value)?,
            "ppc" => spec.particles_per_cell = parse_value(line, key, value)?,
            "tfinal" => spec.t_final = parse_value(line, key, value)?,
            "seed" => spec.seed = parse_value(line, key, value)?,
            "velocity-nodes" => spec.velocity_nodes = parse_value(line, key, value)?,
            "fluid-solver" => {
                spec.fluid_solver =
                    fluid_solver_id(value).map_err(|_| config_error(line, format!("unknown fluid solver {value:?}")))?
            }
            "matching" => {
                spec.matching = match value {
                    "on" => true,
                    "off" => false,
                    _ => return Err(config_error(line, "matching must be on or off")),
                }
            }
            "beta-estimator" => {
                spec.beta_estimator = match value {
                    "bound" => BetaEstimator::Bound,
                    "reconstruction" => BetaEstimator::Reconstruction,
                    _ => return Err(config_error(line, "beta-estimator must be bound or reconstruction")),
                }
            }
            "out" => out = Some(PathBuf::from(value)),
            "reference-dir" => reference_dir = Some(PathBuf::from(value)),
            _ => return Err(config_error(line, format!("unknown key {key:?}"))),
        }
    }
    // Physical parameters are validated by the driver; a grid needs cells.
    if spec.cells == 0 {
        return Err(config_error(0, "cells must be positive"));
    }
    let out = out.unwrap_or_else(|| PathBuf::from(default_run_name(&spec)));
    let reference_dir = reference_dir.unwrap_or_else(|| PathBuf::from("references"));
    Ok(RunConfig {
        spec,
        out,
        reference_dir,
    })
}

/// Directory name that identifies a run within a sweep.
pub fn default_run_name(spec: &RunSpec) -> String {
    format!(
        "{}_{}_eps{:e}_n{}_ppc{}_seed{}",
        spec.scenario.name(),
        spec.solver.name(),
        spec.epsilon,
        spec.cells,
        spec.particles_per_cell,
        spec.seed
    )
}

/// Parses a sweep file into the runs of its cartesian product. `out` names
/// the root directory; each run writes to its own subdirectory.
pub fn parse_sweep(text: &str) -> Result<Vec<RunConfig>> {
    let mut entries: Vec<(usize, String, Vec<String>)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| config_error(line, "expected key = value"))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(config_error(line, format!("unknown key {key:?}")));
        }
        let values: Vec<String> = value.split(',').map(|v| v.trim().to_owned()).collect();
        if values.iter().any(String::is_empty) {
            return Err(config_error(line, format!("empty value for {key}")));
        }
        if matches!(key, "out" | "reference-dir") && values.len() > 1 {
            return Err(config_error(line, format!("{key} takes a single value")));
        }
        entries.push((line, key.to_owned(), values));
    }
    let root = entries.iter().rev().find(|(_, k, _)| k == "out").map(|(_, _, v)| PathBuf::from(&v[0]));
    let total: usize = entries.iter().map(|(_, _, v)| v.len()).product();
    let mut runs = Vec::with_capacity(total);
    for mut index in 0..total {
        let mut choice = vec![0; entries.len()];
        for (k, (_, _, values)) in entries.iter().enumerate().rev() {
            choice[k] = index % values.len();
            index /= values.len();
        }
        let settings: Vec<(usize, &str, &str)> = entries
            .iter()
            .zip(&choice)
            .filter(|((_, key, _), _)| key != "out")
            .map(|((line, key, values), &c)| (*line, key.as_str(), values[c].as_str()))
            .collect();
        let mut config = config_from_settings(&settings)?;
        config.out = root.clone().unwrap_or_else(|| PathBuf::from("bench")).join(default_run_name(&config.spec));
        runs.push(config);
    }
    Ok(runs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_scenario() {
        let c = config_from_settings(&[(1, "scenario", "lax"), (2, "solver", "mcm")]).unwrap();
        assert_eq!(c.spec.cells, 200);
        assert_eq!(c.spec.particles_per_cell, 500);
        assert_eq!(c.spec.t_final, 0.05);
        assert_eq!(c.spec.solver, SolverKind::Mcm);
    }

    #[test]
    fn overrides_apply_in_any_order() {
        let c = config_from_settings(&[
            (1, "cells", "50"),
            (2, "matching", "off"),
            (3, "scenario", "shock"),
            (4, "fluid-solver", "lax_friedrichs"),
            (5, "beta-estimator", "reconstruction"),
        ])
        .unwrap();
        assert_eq!(c.spec.cells, 50);
        assert!(!c.spec.matching);
        assert_eq!(c.spec.scenario, ScenarioKind::Shock);
        assert_eq!(c.spec.fluid_solver, "lax_friedrichs");
        assert_eq!(c.spec.beta_estimator, BetaEstimator::Reconstruction);
    }

    #[test]
    fn bad_settings_are_rejected() {
        assert!(config_from_settings(&[(1, "solver", "pic")]).is_err());
        assert!(config_from_settings(&[(1, "matching", "yes")]).is_err());
        assert!(config_from_settings(&[(1, "cells", "-3")]).is_err());
        assert!(config_from_settings(&[(1, "colour", "red")]).is_err());
        assert!(parse_sweep("epsilon 1e-2").is_err());
        assert!(parse_sweep("epsilon = 1e-2,").is_err());
    }

    #[test]
    fn sweep_is_a_cartesian_product() {
        let text = "# table sweep\nscenario = accuracy\nsolver = mcm, fsi, fsi1\nepsilon = 1e-2, 1e-3, 5e-4, 1e-4\nout = results\n";
        let runs = parse_sweep(text).unwrap();
        assert_eq!(runs.len(), 12);
        assert_eq!(runs[0].spec.solver, SolverKind::Mcm);
        assert_eq!(runs[1].spec.epsilon, 1e-3);
        assert_eq!(runs[4].spec.solver, SolverKind::Fsi);
        assert!(runs.iter().all(|r| r.out.starts_with("results")));
        let mut dirs: Vec<_> = runs.iter().map(|r| r.out.clone()).collect();
        dirs.sort();
        dirs.dedup();
        assert_eq!(dirs.len(), 12);
    }
}
