//! Finite-volume solvers for the 1-D Euler equations of the BGK closure
//! (`gamma = 3`), behind the [`FluidSolver`] seam used by the hybrid schemes.
//!
//! The default scheme is a relaxation (Jin-Xin) scheme: with a frozen speed
//! `a` the flux is split into the characteristic variables `w = F(U) +- a U`,
//! which are reconstructed with limited slopes and upwinded. Time integration
//! is Heun's method. Vacuum cells (`rho = 0`) carry zero flux, which lets the
//! hybrid schemes hand in fluid fractions that vanish in parts of the domain.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{Boundary, Grid1D};
use crate::math::{minmod, monotonized_central, sqrt};
use crate::moments::{ConservedMoments, GAMMA};

/// Ghost cells per side used by every stencil in this module.
pub const GHOSTS: usize = 2;

/// A deterministic solver for the Euler equations on a [`Grid1D`].
pub trait FluidSolver: core::fmt::Debug + Send + Sync {
    fn id(&self) -> &'static str;

    /// Largest stable time step for `field`.
    fn max_dt(&self, field: &[ConservedMoments], grid: &Grid1D) -> Result<f64>;

    /// Advances `field` by `dt`.
    fn step(&self, field: &[ConservedMoments], dt: f64, grid: &Grid1D) -> Result<Vec<ConservedMoments>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Limiter {
    Minmod,
    MonotonizedCentral,
}

impl Limiter {
    fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            Limiter::Minmod => minmod(a, b),
            Limiter::MonotonizedCentral => monotonized_central(a, b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxedSchemeConfig {
    pub cfl: f64,
    pub limiter: Limiter,
    /// Relaxation speed over the largest characteristic speed.
    pub safety: f64,
}

impl Default for RelaxedSchemeConfig {
    fn default() -> Self {
        RelaxedSchemeConfig {
            cfl: 0.9,
            limiter: Limiter::Minmod,
            safety: 1.2,
        }
    }
}

impl RelaxedSchemeConfig {
    fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return Err(Error::InvalidArgument("cfl must lie in (0, 1)"));
        }
        if !(self.safety >= 1.0) {
            return Err(Error::InvalidArgument("relaxation speed safety factor must be >= 1"));
        }
        Ok(())
    }
}

/// Second-order relaxed MUSCL scheme.
///
/// A stage producing an unphysical state makes the whole step restart with
/// the first-order flux; if that fails too the step returns
/// [`Error::SolverFailure`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RelaxedMuscl {
    pub config: RelaxedSchemeConfig,
}

/// First-order relaxation scheme (global Lax-Friedrichs flux with speed `a`).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LaxFriedrichs {
    pub config: RelaxedSchemeConfig,
}

pub const SOLVER_IDS: [&str; 2] = ["muscl_relaxed", "lax_friedrichs"];

pub fn fluid_solver_by_id(id: &str) -> Result<Box<dyn FluidSolver>> {
    match id {
        "muscl_relaxed" => Ok(Box::new(RelaxedMuscl::default())),
        "lax_friedrichs" => Ok(Box::new(LaxFriedrichs::default())),
        _ => Err(Error::UnknownSolver),
    }
}

/// `max_i |u_i| + sqrt(gamma T_i)` over non-vacuum cells.
pub fn max_wave_speed(field: &[ConservedMoments]) -> Result<f64> {
    let mut s: f64 = 0.0;
    for (i, state) in field.iter().enumerate() {
        if state.is_vacuum() {
            continue;
        }
        let p = state.primitives().map_err(|e| e.at_cell(i))?;
        s = s.max(p.u.abs() + sqrt(GAMMA * p.temperature));
    }
    Ok(s)
}

/// `cfl dx / max_i (|u_i| + sqrt(gamma T_i))`; infinite for an all-vacuum field.
pub fn euler_max_dt(field: &[ConservedMoments], grid: &Grid1D, cfl: f64) -> Result<f64> {
    let s = max_wave_speed(field)?;
    Ok(if s > 0.0 { cfl * grid.dx / s } else { f64::INFINITY })
}

/// Interior cells padded with [`GHOSTS`] ghost states on each side.
pub fn boundary_fill(field: &[ConservedMoments], grid: &Grid1D) -> Vec<ConservedMoments> {
    let n = field.len();
    debug_assert_eq!(n, grid.n_cells);
    let mut out = Vec::with_capacity(n + 2 * GHOSTS);
    let ghost = |b: Boundary, g: usize, left: bool| -> ConservedMoments {
        // g = 0 is the ghost adjacent to the boundary.
        match b {
            Boundary::Periodic => {
                if left {
                    field[n - 1 - g]
                } else {
                    field[g]
                }
            }
            Boundary::SpecularWall => {
                let s = if left { field[g] } else { field[n - 1 - g] };
                ConservedMoments::new(s.rho, -s.mom, s.energy)
            }
            Boundary::Inflow(state) => state,
            Boundary::FreeFlow => {
                if left {
                    field[0]
                } else {
                    field[n - 1]
                }
            }
        }
    };
    for g in (0..GHOSTS).rev() {
        out.push(ghost(grid.left, g, true));
    }
    out.extend_from_slice(field);
    for g in 0..GHOSTS {
        out.push(ghost(grid.right, g, false));
    }
    out
}

#[derive(Clone, Copy)]
enum Order {
    First,
    Second(Limiter),
}

fn limited(limiter: Limiter, a: ConservedMoments, b: ConservedMoments) -> ConservedMoments {
    ConservedMoments::new(
        limiter.apply(a.rho, b.rho),
        limiter.apply(a.mom, b.mom),
        limiter.apply(a.energy, b.energy),
    )
}

/// `-(F_{i+1/2} - F_{i-1/2}) / dx` for every interior cell.
fn residual(padded: &[ConservedMoments], a: f64, dx: f64, order: Order) -> Vec<ConservedMoments> {
    let m = padded.len();
    let n = m - 2 * GHOSTS;
    let plus: Vec<ConservedMoments> = padded.iter().map(|u| u.euler_flux() + *u * a).collect();
    let minus: Vec<ConservedMoments> = padded.iter().map(|u| u.euler_flux() - *u * a).collect();
    let slope = |w: &[ConservedMoments], j: usize| match order {
        Order::First => ConservedMoments::ZERO,
        Order::Second(l) => limited(l, w[j] - w[j - 1], w[j + 1] - w[j]),
    };
    // Faces j + 1/2 for padded j in GHOSTS - 1 ..= GHOSTS + n - 1.
    let flux: Vec<ConservedMoments> = (GHOSTS - 1..GHOSTS + n)
        .map(|j| {
            let wp = plus[j] + slope(&plus, j) * 0.5;
            let wm = minus[j + 1] - slope(&minus, j + 1) * 0.5;
            (wp + wm) * 0.5
        })
        .collect();
    (0..n).map(|i| (flux[i + 1] - flux[i]) * (-1.0 / dx)).collect()
}

fn first_invalid(field: &[ConservedMoments]) -> Option<usize> {
    field.iter().position(|u| !(u.is_vacuum() || u.is_physical()))
}

fn heun_step(
    field: &[ConservedMoments],
    dt: f64,
    grid: &Grid1D,
    a: f64,
    order: Order,
) -> core::result::Result<Vec<ConservedMoments>, usize> {
    let euler = |u: &[ConservedMoments]| -> core::result::Result<Vec<ConservedMoments>, usize> {
        let r = residual(&boundary_fill(u, grid), a, grid.dx, order);
        let next: Vec<ConservedMoments> = u.iter().zip(r).map(|(u, r)| *u + r * dt).collect();
        match first_invalid(&next) {
            Some(i) => Err(i),
            None => Ok(next),
        }
    };
    let stage1 = euler(field)?;
    let stage2 = euler(&stage1)?;
    let out: Vec<ConservedMoments> = field.iter().zip(&stage2).map(|(u, s)| (*u + *s) * 0.5).collect();
    match first_invalid(&out) {
        Some(i) => Err(i),
        None => Ok(out),
    }
}

fn relaxed_step(
    config: &RelaxedSchemeConfig,
    field: &[ConservedMoments],
    dt: f64,
    grid: &Grid1D,
    order: Order,
) -> Result<Vec<ConservedMoments>> {
    config.validate()?;
    if field.len() != grid.n_cells {
        return Err(Error::InvalidArgument("field length differs from the grid's cell count"));
    }
    if !(dt >= 0.0) {
        return Err(Error::InvalidArgument("dt must be non-negative"));
    }
    if let Some(i) = first_invalid(field) {
        return Err(field[i].primitives().err().unwrap_or(Error::InvalidArgument("non-finite state")).at_cell(i));
    }
    // Ghost states (inflow reservoirs, mirrored cells) bound the speed too.
    let padded = boundary_fill(field, grid);
    let a = config.safety * max_wave_speed(&padded)?;
    if a == 0.0 || dt == 0.0 {
        return Ok(field.to_vec());
    }
    let max_dt = grid.dx / a;
    if dt > max_dt * (1.0 + 1e-12) {
        return Err(Error::CflViolation { dt, max_dt });
    }
    let failure = |i: usize, out: &[ConservedMoments]| -> Error {
        let s = out.get(i).copied().unwrap_or(field[i]);
        Error::SolverFailure {
            cell: i,
            rho: s.rho,
            internal_energy: s.internal_energy(),
        }
    };
    match heun_step(field, dt, grid, a, order) {
        Ok(out) => Ok(out),
        Err(_) if matches!(order, Order::Second(_)) => {
            heun_step(field, dt, grid, a, Order::First).map_err(|i| failure(i, field))
        }
        Err(i) => Err(failure(i, field)),
    }
}

impl FluidSolver for RelaxedMuscl {
    fn id(&self) -> &'static str {
        "muscl_relaxed"
    }

    /// `cfl dx / (safety max(|u| + c))`, so the relaxation speed obeys
    /// `a dt / dx = cfl`.
    fn max_dt(&self, field: &[ConservedMoments], grid: &Grid1D) -> Result<f64> {
        let padded = boundary_fill(field, grid);
        Ok(euler_max_dt(&padded, grid, self.config.cfl)? / self.config.safety)
    }

    fn step(&self, field: &[ConservedMoments], dt: f64, grid: &Grid1D) -> Result<Vec<ConservedMoments>> {
        relaxed_step(&self.config, field, dt, grid, Order::Second(self.config.limiter))
    }
}

impl FluidSolver for LaxFriedrichs {
    fn id(&self) -> &'static str {
        "lax_friedrichs"
    }

    fn max_dt(&self, field: &[ConservedMoments], grid: &Grid1D) -> Result<f64> {
        let padded = boundary_fill(field, grid);
        Ok(euler_max_dt(&padded, grid, self.config.cfl)? / self.config.safety)
    }

    fn step(&self, field: &[ConservedMoments], dt: f64, grid: &Grid1D) -> Result<Vec<ConservedMoments>> {
        relaxed_step(&self.config, field, dt, grid, Order::First)
    }
}
