//! Benchmark problems: a smooth periodic wave, a shock reflected from a wall
//! and the Lax shock tube.

use alloc::vec::Vec;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{Boundary, Grid1D};
use crate::math::sin;
use crate::moments::{ConservedMoments, MaxwellianParams};
use crate::particles::{gauss_average, InitialDistribution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    /// Periodic smooth data on `[0, 1]`.
    Accuracy,
    /// Uniform gas moving into a specular wall, fed by an inflow reservoir.
    Shock,
    /// Riemann problem with free-flow ends.
    Lax,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [ScenarioKind::Accuracy, ScenarioKind::Shock, ScenarioKind::Lax];

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::Accuracy => "accuracy",
            ScenarioKind::Shock => "shock",
            ScenarioKind::Lax => "lax",
        }
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or(Error::UnknownScenario)
    }
}

pub const SHOCK_STATE: ConservedMoments = ConservedMoments::new(1.0, -1.0, 2.5);
pub const LAX_LEFT: ConservedMoments = ConservedMoments::new(0.445, 0.598, 3.5);
pub const LAX_RIGHT: ConservedMoments = ConservedMoments::new(0.5, 0.0, 0.48);
const LAX_INTERFACE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub x_min: f64,
    pub x_max: f64,
    pub left: Boundary,
    pub right: Boundary,
    pub t_final: f64,
    pub cells: usize,
    pub particles_per_cell: usize,
}

pub fn build_scenario(name: &str) -> Result<Scenario> {
    Ok(Scenario::new(name.parse()?))
}

impl Scenario {
    pub fn new(kind: ScenarioKind) -> Self {
        let base = Scenario {
            kind,
            x_min: 0.0,
            x_max: 1.0,
            left: Boundary::Periodic,
            right: Boundary::Periodic,
            t_final: 0.05,
            cells: 200,
            particles_per_cell: 200,
        };
        match kind {
            ScenarioKind::Accuracy => base,
            ScenarioKind::Shock => Scenario {
                left: Boundary::SpecularWall,
                right: Boundary::Inflow(SHOCK_STATE),
                t_final: 0.065,
                particles_per_cell: 500,
                ..base
            },
            ScenarioKind::Lax => Scenario {
                left: Boundary::FreeFlow,
                right: Boundary::FreeFlow,
                particles_per_cell: 500,
                ..base
            },
        }
    }

    pub fn grid(&self, n_cells: usize) -> Result<Grid1D> {
        Grid1D::new(self.x_min, self.x_max, n_cells, self.left, self.right)
    }

    pub fn default_grid(&self) -> Grid1D {
        self.grid(self.cells).expect("built-in scenarios have valid grids")
    }

    /// Initial conserved state at `x`.
    pub fn state_at(&self, x: f64) -> ConservedMoments {
        match self.kind {
            ScenarioKind::Accuracy => {
                let s = sin(2.0 * core::f64::consts::PI * (x - self.x_min) / (self.x_max - self.x_min));
                let rho = 1.0 + 0.3 * s;
                let u = 1.5 + 0.1 * s;
                ConservedMoments::new(rho, rho * u, 2.5 + s)
            }
            ScenarioKind::Shock => SHOCK_STATE,
            ScenarioKind::Lax => {
                if x < LAX_INTERFACE {
                    LAX_LEFT
                } else {
                    LAX_RIGHT
                }
            }
        }
    }

    pub fn cell_averages(&self, grid: &Grid1D) -> Vec<ConservedMoments> {
        (0..grid.n_cells)
            .map(|i| {
                let a = grid.left_face(i);
                self.cell_average(a, a + grid.dx)
            })
            .collect()
    }
}

impl InitialDistribution for Scenario {
    fn maxwellian_at(&self, x: f64) -> MaxwellianParams {
        self.state_at(x)
            .maxwellian()
            .expect("built-in scenarios are physical everywhere")
    }

    fn total_mass(&self, grid: &Grid1D) -> f64 {
        self.cell_averages(grid).iter().map(|u| u.rho * grid.dx).sum()
    }

    fn density_bound(&self, _a: f64, _b: f64) -> f64 {
        match self.kind {
            ScenarioKind::Accuracy => 1.3,
            ScenarioKind::Shock => SHOCK_STATE.rho,
            ScenarioKind::Lax => LAX_RIGHT.rho.max(LAX_LEFT.rho),
        }
    }

    fn cell_average(&self, a: f64, b: f64) -> ConservedMoments {
        let q = |x: f64| self.state_at(x);
        if self.kind == ScenarioKind::Lax && a < LAX_INTERFACE && LAX_INTERFACE < b {
            let wl = (LAX_INTERFACE - a) / (b - a);
            gauss_average(q, a, LAX_INTERFACE) * wl + gauss_average(q, LAX_INTERFACE, b) * (1.0 - wl)
        } else {
            gauss_average(q, a, b)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lax_left_state_is_as_printed() {
        let s = build_scenario("lax").unwrap();
        assert_eq!(s.state_at(0.1), ConservedMoments::new(0.445, 0.598, 3.5));
        assert_eq!(s.state_at(0.9), ConservedMoments::new(0.5, 0.0, 0.48));
    }

    #[test]
    fn shock_state_has_temperature_four() {
        let s = build_scenario("shock").unwrap();
        let p = s.state_at(0.3).primitives().unwrap();
        assert_eq!((p.u, p.temperature), (-1.0, 4.0));
        assert_eq!(s.right, Boundary::Inflow(SHOCK_STATE));
        assert_eq!(s.left, Boundary::SpecularWall);
        assert_eq!((s.t_final, s.cells, s.particles_per_cell), (0.065, 200, 500));
    }

    #[test]
    fn accuracy_profile_peak() {
        let s = build_scenario("accuracy").unwrap();
        let u = s.state_at(0.25);
        assert!((u.rho - 1.3).abs() < 1e-15);
        assert!((u.mom / u.rho - 1.6).abs() < 1e-15);
        assert!((u.energy - 3.5).abs() < 1e-15);
    }

    #[test]
    fn unknown_scenario() {
        assert_eq!(build_scenario("sod"), Err(Error::UnknownScenario));
    }

    #[test]
    fn cell_averages_integrate_exactly() {
        // Mean of sin over a whole period vanishes, so the total mass is 1.
        let s = build_scenario("accuracy").unwrap();
        let g = s.grid(7).unwrap();
        assert!((s.total_mass(&g) - 1.0).abs() < 1e-14);
        // Odd cell count puts the Lax interface inside a cell.
        let lax = build_scenario("lax").unwrap();
        let g = lax.grid(5).unwrap();
        let avg = lax.cell_averages(&g);
        let expected = (LAX_LEFT + LAX_RIGHT) * 0.5;
        assert!((avg[2].rho - expected.rho).abs() < 1e-15);
        assert!((avg[2].energy - expected.energy).abs() < 1e-15);
    }
}
