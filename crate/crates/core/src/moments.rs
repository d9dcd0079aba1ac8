//! Conserved moments, the local Maxwellian and the ideal-gas closure
//! `p = rho T`, `E = d/2 rho T + 1/2 rho u^2`.

use core::ops::{Add, AddAssign, Mul, Sub};

use crate::error::{Error, Result};
use crate::math::{exp, sqrt, CompensatedSum};

/// Velocity-space dimension of the implemented solvers.
pub const DIM: usize = 1;

/// Ratio of specific heats of the BGK closure, `(d + 2) / d`.
pub const GAMMA: f64 = (DIM as f64 + 2.0) / DIM as f64;

/// Per-cell mass, momentum and total energy densities.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConservedMoments {
    pub rho: f64,
    pub mom: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Primitives {
    pub rho: f64,
    pub u: f64,
    pub temperature: f64,
    pub pressure: f64,
}

/// Parameters of `rho (2 pi T)^{-1/2} exp(-(v - u)^2 / (2 T))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxwellianParams {
    pub rho: f64,
    pub u: f64,
    pub temperature: f64,
}

impl ConservedMoments {
    pub const ZERO: ConservedMoments = ConservedMoments {
        rho: 0.0,
        mom: 0.0,
        energy: 0.0,
    };

    pub const fn new(rho: f64, mom: f64, energy: f64) -> Self {
        ConservedMoments { rho, mom, energy }
    }

    /// Conserved state of density `rho`, velocity `u` and temperature `t` (d = 1).
    pub fn from_primitives(rho: f64, u: f64, t: f64) -> Self {
        ConservedMoments {
            rho,
            mom: rho * u,
            energy: 0.5 * DIM as f64 * rho * t + 0.5 * rho * u * u,
        }
    }

    pub fn is_vacuum(&self) -> bool {
        self.rho == 0.0
    }

    /// `E - (rho u)^2 / (2 rho)`; zero for vacuum.
    pub fn internal_energy(&self) -> f64 {
        if self.rho == 0.0 {
            0.0
        } else {
            self.energy - 0.5 * self.mom * self.mom / self.rho
        }
    }

    pub fn is_physical(&self) -> bool {
        self.rho > 0.0 && self.internal_energy() > 0.0 && self.mom.is_finite() && self.energy.is_finite()
    }

    pub fn primitives(&self) -> Result<Primitives> {
        primitives_from_conserved(*self, DIM)
    }

    pub fn maxwellian(&self) -> Result<MaxwellianParams> {
        let p = self.primitives()?;
        Ok(MaxwellianParams {
            rho: p.rho,
            u: p.u,
            temperature: p.temperature,
        })
    }

    /// Mean velocity and mean squared velocity per unit mass.
    pub fn velocity_moments(&self) -> (f64, f64) {
        (self.mom / self.rho, 2.0 * self.energy / self.rho)
    }

    /// Ideal-gas Euler flux; zero in vacuum.
    pub fn euler_flux(&self) -> ConservedMoments {
        if self.rho == 0.0 {
            return ConservedMoments::ZERO;
        }
        let u = self.mom / self.rho;
        // p = rho T = (2 / d) (E - rho u^2 / 2)
        let p = 2.0 / DIM as f64 * (self.energy - 0.5 * self.mom * u);
        ConservedMoments {
            rho: self.mom,
            mom: self.mom * u + p,
            energy: (self.energy + p) * u,
        }
    }
}

impl Add for ConservedMoments {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        ConservedMoments::new(self.rho + o.rho, self.mom + o.mom, self.energy + o.energy)
    }
}

impl AddAssign for ConservedMoments {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sub for ConservedMoments {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        ConservedMoments::new(self.rho - o.rho, self.mom - o.mom, self.energy - o.energy)
    }
}

impl Mul<f64> for ConservedMoments {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        ConservedMoments::new(self.rho * s, self.mom * s, self.energy * s)
    }
}

/// `u = mom / rho`, `T = (2E / rho - u^2) / d`, `p = rho T`.
pub fn primitives_from_conserved(state: ConservedMoments, dim: usize) -> Result<Primitives> {
    let invalid = |temperature| Error::InvalidState {
        cell: None,
        rho: state.rho,
        temperature,
    };
    if !(state.rho > 0.0) || !state.rho.is_finite() {
        return Err(invalid(f64::NAN));
    }
    let u = state.mom / state.rho;
    let temperature = (2.0 * state.energy / state.rho - u * u) / dim as f64;
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(invalid(temperature));
    }
    Ok(Primitives {
        rho: state.rho,
        u,
        temperature,
        pressure: state.rho * temperature,
    })
}

impl MaxwellianParams {
    pub fn new(rho: f64, u: f64, temperature: f64) -> Result<Self> {
        if !(rho > 0.0) || !(temperature > 0.0) || !u.is_finite() || !rho.is_finite() || !temperature.is_finite() {
            return Err(Error::InvalidState {
                cell: None,
                rho,
                temperature,
            });
        }
        Ok(MaxwellianParams { rho, u, temperature })
    }

    #[inline]
    pub fn eval(&self, v: f64) -> f64 {
        eval_maxwellian(self, v)
    }

    pub fn conserved(&self) -> ConservedMoments {
        ConservedMoments::from_primitives(self.rho, self.u, self.temperature)
    }

    pub fn scaled(&self, factor: f64) -> MaxwellianParams {
        MaxwellianParams {
            rho: self.rho * factor,
            ..*self
        }
    }
}

#[inline]
pub fn eval_maxwellian(m: &MaxwellianParams, v: f64) -> f64 {
    let d = v - m.u;
    m.rho / sqrt(2.0 * core::f64::consts::PI * m.temperature) * exp(-d * d / (2.0 * m.temperature))
}

/// Moments of equal-mass particles: `rho = n m / dx`, `mom = m / dx sum v`,
/// `E = m / dx sum v^2 / 2`. An empty set gives zero moments.
pub fn moments_of_sample_set(velocities: &[f64], particle_mass: f64, dx: f64) -> ConservedMoments {
    let mut s1 = CompensatedSum::default();
    let mut s2 = CompensatedSum::default();
    for &v in velocities {
        s1.add(v);
        s2.add(v * v);
    }
    moments_from_sums(velocities.len(), s1.value(), s2.value(), particle_mass, dx)
}

pub(crate) fn moments_from_sums(count: usize, sum_v: f64, sum_v2: f64, particle_mass: f64, dx: f64) -> ConservedMoments {
    let w = particle_mass / dx;
    ConservedMoments {
        rho: count as f64 * w,
        mom: w * sum_v,
        energy: 0.5 * w * sum_v2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{sample_maxwellian, RngStream, StreamId};
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn primitives_at_rest() {
        let p = primitives_from_conserved(ConservedMoments::new(1.0, 0.0, 0.5), 1).unwrap();
        assert_eq!((p.rho, p.u, p.temperature, p.pressure), (1.0, 0.0, 1.0, 1.0));
    }

    #[test]
    fn primitives_of_lax_right_state() {
        let p = primitives_from_conserved(ConservedMoments::new(0.5, 0.0, 0.48), 1).unwrap();
        assert_eq!(p.u, 0.0);
        assert!(close(p.temperature, 1.92, 1e-15));
        assert!(close(p.pressure, 0.96, 1e-15));
    }

    #[test]
    fn primitives_of_shock_inflow() {
        let p = primitives_from_conserved(ConservedMoments::new(1.0, -1.0, 2.5), 1).unwrap();
        assert_eq!(p.u, -1.0);
        assert_eq!(p.temperature, 4.0);
        assert_eq!(p.pressure, 4.0);
    }

    #[test]
    fn invalid_states_are_rejected() {
        assert!(primitives_from_conserved(ConservedMoments::new(0.0, 0.0, 1.0), 1).is_err());
        assert!(primitives_from_conserved(ConservedMoments::new(1.0, 2.0, 1.0), 1).is_err());
        let err = primitives_from_conserved(ConservedMoments::new(-1.0, 0.0, 1.0), 1)
            .unwrap_err()
            .at_cell(7);
        assert!(matches!(err, Error::InvalidState { cell: Some(7), .. }));
    }

    #[test]
    fn maxwellian_values() {
        let m = MaxwellianParams::new(1.0, 0.0, 1.0).unwrap();
        assert!((eval_maxwellian(&m, 0.0) - 0.398_942_280_4).abs() < 1e-10);
        let m2 = MaxwellianParams::new(2.0, 0.0, 1.0).unwrap();
        assert_eq!(eval_maxwellian(&m2, 0.0), 2.0 * eval_maxwellian(&m, 0.0));
        let m3 = MaxwellianParams::new(1.0, 3.0, 1.0).unwrap();
        assert_eq!(eval_maxwellian(&m3, 3.0), eval_maxwellian(&m, 0.0));
    }

    #[test]
    fn sample_set_moments() {
        assert_eq!(
            moments_of_sample_set(&[-1.0, 1.0], 0.5, 1.0),
            ConservedMoments::new(1.0, 0.0, 0.5)
        );
        assert_eq!(moments_of_sample_set(&[], 0.5, 1.0), ConservedMoments::ZERO);
    }

    #[test]
    fn sample_set_moments_of_a_million_draws() {
        let n = 1_000_000;
        let m = MaxwellianParams::new(1.0, 0.0, 1.0).unwrap();
        let mut rng = RngStream::new(11, StreamId::new(0, 0, 0));
        let v = sample_maxwellian(&m, n, &mut rng);
        let mp = 1.0 / n as f64;
        let u = moments_of_sample_set(&v, mp, 1.0);
        assert_eq!(u.rho, 1.0);
        // sd of mean(v) = 1/sqrt(n); sd of mean(v^2)/2 = sqrt(2)/2/sqrt(n)
        let sn = 1.0 / (n as f64).sqrt();
        assert!(u.mom.abs() < 5.0 * sn);
        assert!((u.energy - 0.5).abs() < 5.0 * core::f64::consts::FRAC_1_SQRT_2 * sn);
    }

    fn trapezoid_moments(m: &MaxwellianParams) -> ConservedMoments {
        let half = 14.0 * m.temperature.sqrt();
        let n = 4001;
        let h = 2.0 * half / (n - 1) as f64;
        let mut acc = ConservedMoments::ZERO;
        for k in 0..n {
            let v = m.u - half + k as f64 * h;
            let w = if k == 0 || k == n - 1 { 0.5 * h } else { h };
            let f = eval_maxwellian(m, v);
            acc += ConservedMoments::new(w * f, w * v * f, w * 0.5 * v * v * f);
        }
        acc
    }

    proptest! {
        #[test]
        fn quadrature_reproduces_moments(rho in 0.1f64..5.0, u in -3.0f64..3.0, t in 0.2f64..10.0) {
            let m = MaxwellianParams::new(rho, u, t).unwrap();
            let q = trapezoid_moments(&m);
            let exact = m.conserved();
            prop_assert!(close(q.rho, exact.rho, 1e-8));
            prop_assert!(close(q.mom, exact.mom, 1e-8));
            prop_assert!(close(q.energy, exact.energy, 1e-8));
        }

        #[test]
        fn conserved_primitive_round_trip(rho in 1e-3f64..1e3, u in -50.0f64..50.0, t in 1e-3f64..1e3) {
            let p = ConservedMoments::from_primitives(rho, u, t).primitives().unwrap();
            prop_assert!(close(p.rho, rho, 1e-14));
            prop_assert!((p.u - u).abs() <= 1e-14 * (1.0 + u.abs()));
            // T is recovered from E - rho u^2 / 2, so cancellation scales with u^2 / T.
            prop_assert!(close(p.temperature, t, 1e-14 * (1.0 + u * u / t)));
        }

        #[test]
        fn shift_invariance(u in -5.0f64..5.0, v in -5.0f64..5.0, s in -10.0f64..10.0, t in 0.1f64..5.0) {
            let a = MaxwellianParams::new(1.3, u, t).unwrap();
            let b = MaxwellianParams::new(1.3, u + s, t).unwrap();
            let fa = eval_maxwellian(&a, v);
            let fb = eval_maxwellian(&b, v + s);
            prop_assert!((fa - fb).abs() <= 1e-12 * fa.max(1e-300));
        }
    }
}
