//! Profiles of macroscopic fields and discrete L1 errors between them.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::moments::{ConservedMoments, DIM};

/// Macroscopic state of one cell as written to profile files.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileRow {
    pub x: f64,
    pub rho: f64,
    pub u: f64,
    pub temperature: f64,
    pub energy: f64,
    pub beta: f64,
}

impl ProfileRow {
    /// Primitives are taken as computed, without validity checks; a vacuum
    /// cell reports `u = T = 0`.
    pub fn from_state(x: f64, state: ConservedMoments, beta: f64) -> Self {
        let (u, temperature) = if state.rho > 0.0 {
            let u = state.mom / state.rho;
            (u, (2.0 * state.energy / state.rho - u * u) / DIM as f64)
        } else {
            (0.0, 0.0)
        };
        ProfileRow {
            x,
            rho: state.rho,
            u,
            temperature,
            energy: state.energy,
            beta,
        }
    }

    pub fn conserved(&self) -> ConservedMoments {
        ConservedMoments::new(self.rho, self.rho * self.u, self.energy)
    }
}

pub fn profile_from_field(grid: &Grid1D, field: &[ConservedMoments], beta: Option<&[f64]>) -> Vec<ProfileRow> {
    field
        .iter()
        .enumerate()
        .map(|(i, &s)| ProfileRow::from_state(grid.center(i), s, beta.map_or(0.0, |b| b[i])))
        .collect()
}

/// Per-field `sum_i |q_i - q_i^ref| dx`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FieldErrors {
    pub rho: f64,
    pub u: f64,
    pub temperature: f64,
}

impl FieldErrors {
    pub fn as_array(&self) -> [(&'static str, f64); 3] {
        [("rho", self.rho), ("u", self.u), ("T", self.temperature)]
    }
}

/// Averages blocks of `factor` consecutive rows in conserved variables.
pub fn coarsen(reference: &[ProfileRow], factor: usize) -> Vec<ProfileRow> {
    reference
        .chunks_exact(factor)
        .map(|block| {
            let inv = 1.0 / factor as f64;
            let state = block.iter().fold(ConservedMoments::ZERO, |acc, r| acc + r.conserved()) * inv;
            let x = block.iter().map(|r| r.x).sum::<f64>() * inv;
            let beta = block.iter().map(|r| r.beta).sum::<f64>() * inv;
            ProfileRow::from_state(x, state, beta)
        })
        .collect()
}

/// L1 errors of `solution` against `reference`. A finer reference whose
/// cell count is an integer multiple of the solution's is block-averaged
/// onto the solution grid first.
pub fn l1_error(solution: &[ProfileRow], reference: &[ProfileRow], dx: f64) -> Result<FieldErrors> {
    let n = solution.len();
    let m = reference.len();
    if n == 0 || m < n || !m.is_multiple_of(n) {
        return Err(Error::GridMismatch {
            cells: n,
            reference_cells: m,
        });
    }
    let coarse;
    let reference = if m == n {
        reference
    } else {
        coarse = coarsen(reference, m / n);
        &coarse
    };
    let mut e = FieldErrors::default();
    for (s, r) in solution.iter().zip(reference) {
        e.rho += (s.rho - r.rho).abs() * dx;
        e.u += (s.u - r.u).abs() * dx;
        e.temperature += (s.temperature - r.temperature).abs() * dx;
    }
    Ok(e)
}

/// [`l1_error`] for conserved fields.
pub fn l1_error_fields(solution: &[ConservedMoments], reference: &[ConservedMoments], dx: f64) -> Result<FieldErrors> {
    let rows = |f: &[ConservedMoments]| -> Vec<ProfileRow> {
        f.iter().map(|&s| ProfileRow::from_state(0.0, s, 0.0)).collect()
    };
    l1_error(&rows(solution), &rows(reference), dx)
}
