//! Runs a scenario to its final time with any of the solvers and collects
//! the final profile and per-step totals.

use alloc::vec::Vec;
use core::str::FromStr;

use crate::dvm::{dvm_moments, DvmSolver, KineticField, DEFAULT_VELOCITY_NODES};
use crate::error::{Error, Result};
use crate::euler::{fluid_solver_by_id, FluidSolver, SOLVER_IDS};
use crate::hybrid::{hybrid_step, initialize_hybrid, BetaEstimator, FsiConfig, HybridDiagnostics, HybridState, Variant};
use crate::math::CompensatedSum;
use crate::metrics::{profile_from_field, ProfileRow};
use crate::moments::ConservedMoments;
use crate::particles::{init_particles, mcm_step, particle_dt, McmDiagnostics, McmState, INIT_PHASE};
use crate::sampling::{RngStream, StreamId};
use crate::scenario::{Scenario, ScenarioKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    Mcm,
    Fsi,
    Fsi1,
    Dvm,
    Euler,
}

impl SolverKind {
    pub const ALL: [SolverKind; 5] = [
        SolverKind::Mcm,
        SolverKind::Fsi,
        SolverKind::Fsi1,
        SolverKind::Dvm,
        SolverKind::Euler,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::Mcm => "mcm",
            SolverKind::Fsi => "fsi",
            SolverKind::Fsi1 => "fsi1",
            SolverKind::Dvm => "dvm",
            SolverKind::Euler => "euler",
        }
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or(Error::UnknownSolver)
    }
}

/// Resolves a fluid solver id to its registered static name.
pub fn fluid_solver_id(id: &str) -> Result<&'static str> {
    SOLVER_IDS.into_iter().find(|s| *s == id).ok_or(Error::UnknownSolver)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSpec {
    pub scenario: ScenarioKind,
    pub solver: SolverKind,
    pub epsilon: f64,
    pub cells: usize,
    pub particles_per_cell: usize,
    pub t_final: f64,
    pub seed: u64,
    pub fluid_solver: &'static str,
    pub matching: bool,
    pub beta_estimator: BetaEstimator,
    pub include_bulk_velocity: bool,
    pub velocity_nodes: usize,
    /// Stops after this many steps even if `t_final` is not reached.
    pub max_steps: Option<u64>,
}

impl RunSpec {
    /// Scenario defaults with `eps = 1e-2` and seed 0.
    pub fn new(scenario: ScenarioKind, solver: SolverKind) -> Self {
        let s = Scenario::new(scenario);
        RunSpec {
            scenario,
            solver,
            epsilon: 1e-2,
            cells: s.cells,
            particles_per_cell: s.particles_per_cell,
            t_final: s.t_final,
            seed: 0,
            fluid_solver: "muscl_relaxed",
            matching: true,
            beta_estimator: BetaEstimator::Bound,
            include_bulk_velocity: false,
            velocity_nodes: DEFAULT_VELOCITY_NODES,
            max_steps: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument("epsilon must be positive"));
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(Error::InvalidArgument("t_final must be finite and non-negative"));
        }
        if self.particles_per_cell == 0 && matches!(self.solver, SolverKind::Mcm | SolverKind::Fsi | SolverKind::Fsi1) {
            return Err(Error::InvalidArgument("particle solvers need particles_per_cell > 0"));
        }
        Ok(())
    }
}

/// Totals after a step (or at `t = 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeseriesRow {
    pub t: f64,
    pub n_particles: usize,
    pub mass: f64,
    pub momentum: f64,
    pub energy: f64,
}

impl TimeseriesRow {
    fn new(t: f64, n_particles: usize, totals: ConservedMoments) -> Self {
        TimeseriesRow {
            t,
            n_particles,
            mass: totals.rho,
            momentum: totals.mom,
            energy: totals.energy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunDiagnostics {
    None,
    Mcm(McmDiagnostics),
    Hybrid(HybridDiagnostics),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub profile: Vec<ProfileRow>,
    /// Final cell states.
    pub moments: Vec<ConservedMoments>,
    /// One row at `t = 0` and one per step.
    pub timeseries: Vec<TimeseriesRow>,
    pub steps: u64,
    pub final_time: f64,
    pub diagnostics: RunDiagnostics,
}

fn field_totals(field: &[ConservedMoments], dx: f64) -> ConservedMoments {
    let mut s = [CompensatedSum::default(); 3];
    for u in field {
        s[0].add(u.rho * dx);
        s[1].add(u.mom * dx);
        s[2].add(u.energy * dx);
    }
    ConservedMoments::new(s[0].value(), s[1].value(), s[2].value())
}

/// Time loop shared by all solvers: steps are the stable step recomputed
/// from the current state, shortened at the end to land on `t_final`.
struct Clock {
    t: f64,
    t_final: f64,
    steps: u64,
    max_steps: Option<u64>,
}

impl Clock {
    fn new(spec: &RunSpec) -> Self {
        Clock {
            t: 0.0,
            t_final: spec.t_final,
            steps: 0,
            max_steps: spec.max_steps,
        }
    }

    fn next(&self, stable_dt: f64) -> Option<f64> {
        if self.max_steps.is_some_and(|m| self.steps >= m) {
            return None;
        }
        let remaining = self.t_final - self.t;
        if remaining <= 1e-12 * self.t_final {
            return None;
        }
        // Splitting the last two steps evenly avoids a sliver step, whose
        // lambda close to 1 would leave an untypical final beta.
        if remaining > stable_dt && remaining <= 2.0 * stable_dt {
            return Some(0.5 * remaining);
        }
        Some(stable_dt.min(remaining))
    }

    fn advance(&mut self, dt: f64) {
        self.steps += 1;
        self.t = if self.t_final - (self.t + dt) <= 1e-12 * self.t_final {
            self.t_final
        } else {
            self.t + dt
        };
    }
}

/// Runs `spec` to completion.
pub fn simulate(spec: &RunSpec) -> Result<RunOutcome> {
    spec.validate()?;
    let scenario = Scenario::new(spec.scenario);
    let grid = scenario.grid(spec.cells)?;
    let initial = scenario.cell_averages(&grid);
    let n_total = spec.cells * spec.particles_per_cell;
    let mut clock = Clock::new(spec);
    let mut series = Vec::new();
    match spec.solver {
        SolverKind::Euler => {
            let fluid = fluid_solver_by_id(spec.fluid_solver)?;
            let mut field = initial;
            series.push(TimeseriesRow::new(0.0, 0, field_totals(&field, grid.dx)));
            while let Some(dt) = clock.next(fluid.max_dt(&field, &grid)?) {
                field = fluid.step(&field, dt, &grid).map_err(|e| e.at_step(clock.steps))?;
                clock.advance(dt);
                series.push(TimeseriesRow::new(clock.t, 0, field_totals(&field, grid.dx)));
            }
            let beta = alloc::vec![1.0; field.len()];
            Ok(RunOutcome {
                profile: profile_from_field(&grid, &field, Some(&beta)),
                moments: field,
                timeseries: series,
                steps: clock.steps,
                final_time: clock.t,
                diagnostics: RunDiagnostics::None,
            })
        }
        SolverKind::Dvm => {
            let solver = DvmSolver::for_initial_data(&initial, &grid, spec.velocity_nodes, 0.9)?;
            let mut f = KineticField::from_moments(&initial, &solver.vgrid)?;
            series.push(TimeseriesRow::new(0.0, 0, field_totals(&dvm_moments(&f, &solver.vgrid), grid.dx)));
            while let Some(dt) = clock.next(solver.max_dt(&grid)) {
                solver.step(&mut f, dt, spec.epsilon, &grid).map_err(|e| e.at_step(clock.steps))?;
                clock.advance(dt);
                let m = dvm_moments(&f, &solver.vgrid);
                series.push(TimeseriesRow::new(clock.t, 0, field_totals(&m, grid.dx)));
            }
            let field = dvm_moments(&f, &solver.vgrid);
            Ok(RunOutcome {
                profile: profile_from_field(&grid, &field, None),
                moments: field,
                timeseries: series,
                steps: clock.steps,
                final_time: clock.t,
                diagnostics: RunDiagnostics::None,
            })
        }
        SolverKind::Mcm => {
            let mut rng = RngStream::new(spec.seed, StreamId::new(0, 0, INIT_PHASE));
            let particles = init_particles(&scenario, n_total, &grid, &mut rng)?;
            let mut state = McmState::new(grid, particles);
            series.push(TimeseriesRow::new(0.0, state.particles.len(), state.particles.totals()));
            loop {
                let field = state.cell_moments();
                let Some(dt) = clock.next(particle_dt(&field, &grid, spec.include_bulk_velocity)) else {
                    break;
                };
                mcm_step(&mut state, dt, spec.epsilon, spec.matching, spec.seed).map_err(|e| e.at_step(clock.steps))?;
                clock.advance(dt);
                series.push(TimeseriesRow::new(clock.t, state.particles.len(), state.particles.totals()));
            }
            let field = state.cell_moments();
            Ok(RunOutcome {
                profile: profile_from_field(&grid, &field, None),
                moments: field,
                timeseries: series,
                steps: clock.steps,
                final_time: clock.t,
                diagnostics: RunDiagnostics::Mcm(state.diagnostics),
            })
        }
        SolverKind::Fsi | SolverKind::Fsi1 => {
            let fluid = fluid_solver_by_id(spec.fluid_solver)?;
            let config = FsiConfig {
                variant: if spec.solver == SolverKind::Fsi { Variant::Fsi } else { Variant::Fsi1 },
                matching: spec.matching,
                fluid_solver: fluid_solver_id(spec.fluid_solver)?,
                estimator: spec.beta_estimator,
                include_bulk_velocity: spec.include_bulk_velocity,
                ..FsiConfig::new(Variant::Fsi)
            };
            let dt0 = particle_dt(&initial, &grid, spec.include_bulk_velocity).min(fluid.max_dt(&initial, &grid)?);
            let mut state = initialize_hybrid(&scenario, &grid, n_total, spec.epsilon, dt0, config, spec.seed)?;
            run_hybrid(&mut state, fluid.as_ref(), spec, &mut clock, &mut series)?;
            Ok(RunOutcome {
                profile: profile_from_field(&grid, &state.moments, Some(&state.beta)),
                moments: state.moments.clone(),
                timeseries: series,
                steps: clock.steps,
                final_time: clock.t,
                diagnostics: RunDiagnostics::Hybrid(state.diagnostics),
            })
        }
    }
}

fn run_hybrid(
    state: &mut HybridState,
    fluid: &dyn FluidSolver,
    spec: &RunSpec,
    clock: &mut Clock,
    series: &mut Vec<TimeseriesRow>,
) -> Result<()> {
    series.push(TimeseriesRow::new(0.0, state.particles.len(), state.totals()));
    while let Some(dt) = clock.next(state.time_step(fluid)?) {
        hybrid_step(state, dt, spec.epsilon, fluid, spec.seed).map_err(|e| e.at_step(clock.steps))?;
        clock.advance(dt);
        series.push(TimeseriesRow::new(clock.t, state.particles.len(), state.totals()));
    }
    Ok(())
}

/// Default reference resolution: twice the scenario's cells.
pub fn reference_cells(cells: usize) -> usize {
    2 * cells
}

/// Discrete-velocity reference profile of a scenario at `t_final`.
pub fn reference_profile(
    scenario: ScenarioKind,
    epsilon: f64,
    cells: usize,
    velocity_nodes: usize,
    t_final: f64,
) -> Result<Vec<ProfileRow>> {
    let spec = RunSpec {
        epsilon,
        cells,
        velocity_nodes,
        t_final,
        ..RunSpec::new(scenario, SolverKind::Dvm)
    };
    Ok(simulate(&spec)?.profile)
}
