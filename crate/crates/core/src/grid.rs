//! Uniform 1-D finite-volume grid and boundary kinds.

use crate::error::{Error, Result};
use crate::math::floor;
use crate::moments::ConservedMoments;

/// Boundary condition on one side of the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    Periodic,
    /// Reflecting wall: particles get `(p, v) -> (2 x_wall - p, -v)`,
    /// fluid ghosts mirror density and energy and negate momentum.
    SpecularWall,
    /// Equilibrium reservoir with the given conserved state.
    Inflow(ConservedMoments),
    /// Zero-gradient boundary; kinetic solvers treat it as a reservoir in
    /// the current edge state.
    FreeFlow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub n_cells: usize,
    pub dx: f64,
    pub left: Boundary,
    pub right: Boundary,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n_cells: usize, left: Boundary, right: Boundary) -> Result<Self> {
        if n_cells < 2 {
            return Err(Error::InvalidArgument("grid needs at least two cells"));
        }
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidArgument("grid bounds must satisfy x_min < x_max"));
        }
        if matches!(left, Boundary::Periodic) != matches!(right, Boundary::Periodic) {
            return Err(Error::InvalidArgument("periodic boundaries must be paired"));
        }
        Ok(Grid1D {
            x_min,
            x_max,
            n_cells,
            dx: (x_max - x_min) / n_cells as f64,
            left,
            right,
        })
    }

    pub fn periodic(x_min: f64, x_max: f64, n_cells: usize) -> Result<Self> {
        Self::new(x_min, x_max, n_cells, Boundary::Periodic, Boundary::Periodic)
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    #[inline]
    pub fn center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx
    }

    #[inline]
    pub fn left_face(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    /// Cell containing `x`; positions on the domain edge are clamped inside.
    #[inline]
    pub fn cell_of(&self, x: f64) -> usize {
        let s = floor((x - self.x_min) / self.dx);
        if s <= 0.0 {
            0
        } else {
            (s as usize).min(self.n_cells - 1)
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.left, Boundary::Periodic)
    }

    /// Same geometry with a different cell count.
    pub fn with_cells(&self, n_cells: usize) -> Result<Self> {
        Self::new(self.x_min, self.x_max, n_cells, self.left, self.right)
    }

    /// Same geometry with the inflow reservoir states scaled by `left` and
    /// `right` (used to hand the equilibrium fraction of a reservoir to a
    /// fluid solver).
    pub fn with_scaled_inflow(&self, left: f64, right: f64) -> Self {
        let scale = |b: Boundary, s: f64| match b {
            Boundary::Inflow(state) => Boundary::Inflow(state * s),
            other => other,
        };
        Grid1D {
            left: scale(self.left, left),
            right: scale(self.right, right),
            ..*self
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centers_and_width() {
        let g = Grid1D::periodic(0.0, 1.0, 200).unwrap();
        assert_eq!(g.dx, 0.005);
        assert!((g.center(0) - 0.0025).abs() < 1e-15);
        assert!((g.center(199) - 0.9975).abs() < 1e-15);
        assert_eq!(g.cell_of(0.0), 0);
        assert_eq!(g.cell_of(1.0), 199);
        assert_eq!(g.cell_of(0.0051), 1);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(Grid1D::periodic(0.0, 1.0, 1).is_err());
        assert!(Grid1D::periodic(1.0, 1.0, 10).is_err());
        assert!(Grid1D::new(0.0, 1.0, 10, Boundary::Periodic, Boundary::FreeFlow).is_err());
    }
}
