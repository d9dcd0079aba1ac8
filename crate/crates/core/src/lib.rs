//! Multiscale solvers for the one-dimensional Boltzmann-BGK equation.
//!
//! The crate couples a Monte Carlo particle description of the
//! non-equilibrium part of the distribution with an arbitrary deterministic
//! solver for the compressible Euler equations (the equilibrium part). Two
//! hybrid steppers are provided, [`hybrid::fsi_step`] and the optimized
//! [`hybrid::fsi1_step`], next to three stand-alone solvers used as
//! baselines and references:
//!
//! * [`particles::mcm_step`]: pure Monte Carlo for BGK,
//! * [`dvm::DvmSolver`]: a discrete-velocity deterministic solver,
//! * [`euler::RelaxedMuscl`]: a second-order relaxed MUSCL Euler scheme.
//!
//! Scenario definitions, error metrics and a run driver live in
//! [`scenario`], [`metrics`] and [`driver`]. File IO and the command line are
//! in the companion `fsi-harness` crate; this crate is `no_std` and only needs
//! an allocator.

#![no_std]
#![deny(missing_debug_implementations)]
// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod driver;
pub mod dvm;
mod error;
pub mod euler;
pub mod grid;
pub mod hybrid;
pub(crate) mod math;
pub mod metrics;
pub mod moments;
pub mod particles;
pub mod sampling;
pub mod scenario;

pub use self::error::{Error, Result};
pub use self::grid::{Boundary, Grid1D};
pub use self::moments::{ConservedMoments, MaxwellianParams, Primitives};
