//! Discrete-velocity solver for the BGK equation.
//!
//! The distribution is stored on a uniform symmetric velocity grid. Each step
//! transports every velocity node with a flux-limited second-order upwind
//! scheme and then relaxes exactly toward a discrete Maxwellian whose
//! quadrature moments equal those of the transported distribution.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{Boundary, Grid1D};
use crate::math::{exp, sqrt, van_leer};
use crate::moments::{ConservedMoments, MaxwellianParams};

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityGrid {
    pub v_max: f64,
    pub dv: f64,
    pub nodes: Vec<f64>,
    /// Trapezoid weights; they sum to `2 v_max`.
    pub weights: Vec<f64>,
}

impl VelocityGrid {
    pub fn new(n_v: usize, v_max: f64) -> Result<Self> {
        if n_v < 2 {
            return Err(Error::InvalidArgument("velocity grid needs at least two nodes"));
        }
        if !(v_max > 0.0) || !v_max.is_finite() {
            return Err(Error::InvalidArgument("v_max must be positive"));
        }
        let dv = 2.0 * v_max / (n_v - 1) as f64;
        // Mirror pairs are exact negatives of each other.
        let nodes: Vec<f64> = (0..n_v)
            .map(|k| {
                let j = n_v - 1 - k;
                if k < j {
                    -v_max + k as f64 * dv
                } else {
                    v_max - j as f64 * dv
                }
            })
            .collect();
        let weights = (0..n_v)
            .map(|k| if k == 0 || k == n_v - 1 { 0.5 * dv } else { dv })
            .collect();
        Ok(VelocityGrid {
            v_max,
            dv,
            nodes,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Index of the node at `-v_k`.
    #[inline]
    pub fn mirror(&self, k: usize) -> usize {
        self.len() - 1 - k
    }

    /// Moments `(rho, mom, E)` of a nodal distribution.
    pub fn moments(&self, f: &[f64]) -> ConservedMoments {
        let mut acc = [0.0; 3];
        for ((&fk, &v), &w) in f.iter().zip(&self.nodes).zip(&self.weights) {
            let wf = w * fk;
            acc[0] += wf;
            acc[1] += wf * v;
            acc[2] += wf * 0.5 * v * v;
        }
        ConservedMoments::new(acc[0], acc[1], acc[2])
    }
}

/// `f[i][k]`, cell-major.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticField {
    pub n_cells: usize,
    pub n_v: usize,
    pub data: Vec<f64>,
}

impl KineticField {
    pub fn zeros(n_cells: usize, n_v: usize) -> Self {
        KineticField {
            n_cells,
            n_v,
            data: vec![0.0; n_cells * n_v],
        }
    }

    /// Discrete Maxwellians of the given cell states.
    pub fn from_moments(field: &[ConservedMoments], vgrid: &VelocityGrid) -> Result<Self> {
        let mut f = KineticField::zeros(field.len(), vgrid.len());
        for (i, state) in field.iter().enumerate() {
            if state.is_vacuum() {
                continue;
            }
            let m = discrete_maxwellian(*state, vgrid).map_err(|e| e.at_cell(i))?;
            f.cell_mut(i).copy_from_slice(&m);
        }
        Ok(f)
    }

    #[inline]
    pub fn cell(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_v..(i + 1) * self.n_v]
    }

    #[inline]
    pub fn cell_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n_v..(i + 1) * self.n_v]
    }
}

pub fn dvm_moments(f: &KineticField, vgrid: &VelocityGrid) -> Vec<ConservedMoments> {
    (0..f.n_cells).map(|i| vgrid.moments(f.cell(i))).collect()
}

fn eval_nodes(m: &MaxwellianParams, vgrid: &VelocityGrid) -> Vec<f64> {
    vgrid.nodes.iter().map(|&v| m.eval(v)).collect()
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(a);
    if !(d.abs() > 0.0) || !d.is_finite() {
        return None;
    }
    let mut x = [0.0; 3];
    for (c, xc) in x.iter_mut().enumerate() {
        let mut m = a;
        for r in 0..3 {
            m[r][c] = b[r];
        }
        *xc = det(m) / d;
    }
    Some(x)
}

const NEWTON_MAX_ITERATIONS: usize = 20;
const NEWTON_TOLERANCE: f64 = 1e-14;

/// Nodal Maxwellian whose quadrature moments equal `target`.
///
/// Starts from the continuous Maxwellian of `target` and corrects its
/// parameters `(rho, u, T)` by Newton's method on the quadrature moments.
/// If Newton does not converge the uncorrected Maxwellian is returned.
pub fn discrete_maxwellian(target: ConservedMoments, vgrid: &VelocityGrid) -> Result<Vec<f64>> {
    let m0 = target.maxwellian()?;
    let scale = [target.rho, target.rho * sqrt(m0.temperature) + target.mom.abs(), target.energy];
    let mut p = [m0.rho, m0.u, m0.temperature];
    for _ in 0..NEWTON_MAX_ITERATIONS {
        let m = MaxwellianParams {
            rho: p[0],
            u: p[1],
            temperature: p[2],
        };
        let mut g = [0.0; 3];
        let mut jac = [[0.0; 3]; 3];
        for ((&v, &w), fk) in vgrid.nodes.iter().zip(&vgrid.weights).zip(eval_nodes(&m, vgrid)) {
            let phi = [1.0, v, 0.5 * v * v];
            let d = v - m.u;
            let dm = [
                fk / m.rho,
                fk * d / m.temperature,
                fk * (d * d / (2.0 * m.temperature * m.temperature) - 0.5 / m.temperature),
            ];
            for r in 0..3 {
                g[r] += w * phi[r] * fk;
                for c in 0..3 {
                    jac[r][c] += w * phi[r] * dm[c];
                }
            }
        }
        let residual = [g[0] - target.rho, g[1] - target.mom, g[2] - target.energy];
        if (0..3).all(|r| residual[r].abs() <= NEWTON_TOLERANCE * scale[r]) {
            return Ok(eval_nodes(&m, vgrid));
        }
        let Some(delta) = solve3(jac, residual) else { break };
        let next = [p[0] - delta[0], p[1] - delta[1], p[2] - delta[2]];
        if !(next[0] > 0.0 && next[2] > 0.0) || next.iter().any(|x| !x.is_finite()) {
            break;
        }
        p = next;
    }
    let m = MaxwellianParams {
        rho: p[0],
        u: p[1],
        temperature: p[2],
    };
    let g = vgrid.moments(&eval_nodes(&m, vgrid));
    let converged = (g.rho - target.rho).abs() <= 1e3 * NEWTON_TOLERANCE * scale[0]
        && (g.mom - target.mom).abs() <= 1e3 * NEWTON_TOLERANCE * scale[1]
        && (g.energy - target.energy).abs() <= 1e3 * NEWTON_TOLERANCE * scale[2];
    Ok(eval_nodes(if converged { &m } else { &m0 }, vgrid))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DvmSolver {
    pub vgrid: VelocityGrid,
    pub cfl: f64,
    /// Discrete reservoir distributions for inflow sides.
    inflow: [Option<Vec<f64>>; 2],
}

pub const DEFAULT_VELOCITY_NODES: usize = 64;

/// `max_i |u_i| + 6 sqrt(T_i)`, including inflow reservoir states.
pub fn default_v_max(field: &[ConservedMoments], grid: &Grid1D) -> Result<f64> {
    let mut v: f64 = 0.0;
    let reservoirs = [grid.left, grid.right].into_iter().filter_map(|b| match b {
        Boundary::Inflow(s) => Some(s),
        _ => None,
    });
    for (i, s) in field.iter().copied().chain(reservoirs).enumerate() {
        if s.is_vacuum() {
            continue;
        }
        let p = s.primitives().map_err(|e| e.at_cell(i))?;
        v = v.max(p.u.abs() + 6.0 * sqrt(p.temperature));
    }
    Ok(v)
}

impl DvmSolver {
    pub fn new(vgrid: VelocityGrid, cfl: f64, grid: &Grid1D) -> Result<Self> {
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(Error::InvalidArgument("cfl must lie in (0, 1]"));
        }
        let reservoir = |b: Boundary| -> Result<Option<Vec<f64>>> {
            match b {
                Boundary::Inflow(s) => Ok(Some(discrete_maxwellian(s, &vgrid)?)),
                _ => Ok(None),
            }
        };
        let inflow = [reservoir(grid.left)?, reservoir(grid.right)?];
        Ok(DvmSolver { vgrid, cfl, inflow })
    }

    /// Default velocity grid for the initial `field` with `n_v` nodes.
    pub fn for_initial_data(field: &[ConservedMoments], grid: &Grid1D, n_v: usize, cfl: f64) -> Result<Self> {
        let vgrid = VelocityGrid::new(n_v, default_v_max(field, grid)?)?;
        Self::new(vgrid, cfl, grid)
    }

    pub fn max_dt(&self, grid: &Grid1D) -> f64 {
        self.cfl * grid.dx / self.vgrid.v_max
    }

    /// One transport step followed by exact relaxation with
    /// `lambda = exp(-dt / eps)`. Fails if `dt > dx / v_max`.
    pub fn step(&self, f: &mut KineticField, dt: f64, eps: f64, grid: &Grid1D) -> Result<()> {
        if !(eps > 0.0) || !(dt >= 0.0) {
            return Err(Error::InvalidArgument("need dt >= 0 and eps > 0"));
        }
        let max_dt = grid.dx / self.vgrid.v_max;
        if dt > max_dt * (1.0 + 1e-12) {
            return Err(Error::CflViolation { dt, max_dt });
        }
        self.transport(f, dt, grid);
        let lambda = exp(-dt / eps);
        if lambda == 1.0 {
            return Ok(());
        }
        for i in 0..f.n_cells {
            let target = self.vgrid.moments(f.cell(i));
            if !target.is_physical() {
                // Vacuum or unresolved cells are left untouched.
                continue;
            }
            let m = discrete_maxwellian(target, &self.vgrid).map_err(|e| e.at_cell(i))?;
            for (fk, mk) in f.cell_mut(i).iter_mut().zip(m) {
                *fk = lambda * *fk + (1.0 - lambda) * mk;
            }
        }
        Ok(())
    }

    /// Ghost value `g` cells outside the given side (g = 0 adjacent).
    fn ghost(&self, f: &KineticField, grid: &Grid1D, left: bool, g: usize, k: usize) -> f64 {
        let n = f.n_cells;
        let side = if left { grid.left } else { grid.right };
        match side {
            Boundary::Periodic => f.cell(if left { n - 1 - g } else { g })[k],
            Boundary::SpecularWall => f.cell(if left { g } else { n - 1 - g })[self.vgrid.mirror(k)],
            Boundary::Inflow(_) => self.inflow[if left { 0 } else { 1 }].as_ref().expect("inflow reservoir")[k],
            Boundary::FreeFlow => f.cell(if left { 0 } else { n - 1 })[k],
        }
    }

    fn transport(&self, f: &mut KineticField, dt: f64, grid: &Grid1D) {
        let n = f.n_cells;
        let mut column = vec![0.0; n + 4];
        let mut flux = vec![0.0; n + 1];
        for (k, &v) in self.vgrid.nodes.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            for i in 0..n {
                column[i + 2] = f.cell(i)[k];
            }
            column[1] = self.ghost(f, grid, true, 0, k);
            column[0] = self.ghost(f, grid, true, 1, k);
            column[n + 2] = self.ghost(f, grid, false, 0, k);
            column[n + 3] = self.ghost(f, grid, false, 1, k);
            let nu = v.abs() * dt / grid.dx;
            // Face j sits between padded cells j + 1 and j + 2.
            for (j, fl) in flux.iter_mut().enumerate() {
                let (up, down, far) = if v > 0.0 { (j + 1, j + 2, j) } else { (j + 2, j + 1, j + 3) };
                let slope = van_leer(column[up] - column[far], column[down] - column[up]);
                *fl = v * (column[up] + 0.5 * (1.0 - nu) * slope);
            }
            let r = dt / grid.dx;
            for i in 0..n {
                f.cell_mut(i)[k] = column[i + 2] - r * (flux[i + 1] - flux[i]);
            }
        }
    }
}
