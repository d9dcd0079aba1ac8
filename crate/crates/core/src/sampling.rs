//! Stochastic primitives: keyed random streams, stochastic rounding,
//! Maxwellian sampling, moment matching, exact minimization of Maxwellian
//! ratios and acceptance-rejection sampling of residual distributions.

use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::math::{cos, floor, ln, sqrt};
use crate::moments::MaxwellianParams;

/// Identifies one random stream within a run.
///
/// Streams are keyed by cell and step so that per-cell work can be executed
/// in any order (or in parallel) and still reproduce the serial result. The
/// `phase` separates independent consumers inside the same step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamId {
    pub cell: u32,
    pub step: u64,
    pub phase: u8,
}

impl StreamId {
    pub const fn new(cell: u32, step: u64, phase: u8) -> Self {
        StreamId { cell, step, phase }
    }

    fn word(&self) -> u64 {
        debug_assert!(self.cell < 1 << 24);
        debug_assert!(self.step < 1 << 36);
        (self.step << 28) | ((self.phase as u64 & 0xf) << 24) | self.cell as u64
    }
}

/// Deterministic random stream: ChaCha8 keyed by the run seed, with the
/// stream id selecting one of its 2^64 independent streams.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl RngStream {
    pub fn new(seed: u64, id: StreamId) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(id.word());
        RngStream {
            rng,
            spare_normal: None,
        }
    }

    /// Uniform in `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..n`.
    #[inline]
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    /// Standard normal draw (Box-Muller, both variates used).
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // 1 - U lies in (0, 1], keeping the logarithm finite.
        let r = sqrt(-2.0 * ln(1.0 - self.uniform()));
        let theta = 2.0 * core::f64::consts::PI * self.uniform();
        self.spare_normal = Some(r * libm::sin(theta));
        r * cos(theta)
    }
}

/// Stochastic rounding: `floor(x)` with probability `floor(x) + 1 - x`,
/// otherwise `floor(x) + 1`; unbiased.
pub fn iround(x: f64, rng: &mut RngStream) -> Result<u64> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::InvalidArgument("iround needs a finite non-negative value"));
    }
    let base = floor(x);
    let frac = x - base;
    let up = frac > 0.0 && rng.uniform() < frac;
    Ok(base as u64 + up as u64)
}

/// `n` independent draws from `Normal(u, T)`.
pub fn sample_maxwellian(m: &MaxwellianParams, n: usize, rng: &mut RngStream) -> Vec<f64> {
    let sd = sqrt(m.temperature);
    (0..n).map(|_| m.u + sd * rng.standard_normal()).collect()
}

/// Sample mean and (biased) variance, two-pass.
pub(crate) fn mean_and_variance(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Affine rescaling `v* = (v - mu1) / c + m1` so the set has sample mean `m1`
/// and mean square `m2` exactly.
///
/// The scale is `c = sqrt((mu2 - mu1^2) / (m2 - m1^2))`, the ratio of sample
/// to target standard deviations.
pub fn moment_match(velocities: &mut [f64], m1: f64, m2: f64) -> Result<()> {
    if velocities.len() < 2 {
        return Err(Error::MatchingImpossible);
    }
    let target_var = m2 - m1 * m1;
    if !(target_var > 0.0) || !target_var.is_finite() {
        return Err(Error::MatchingImpossible);
    }
    let (mu1, var) = mean_and_variance(velocities);
    if !(var > 0.0) || !var.is_finite() {
        return Err(Error::MatchingImpossible);
    }
    let inv_c = sqrt(target_var / var);
    for v in velocities.iter_mut() {
        *v = (*v - mu1) * inv_c + m1;
    }
    // One polishing pass removes the rounding left by the first transform.
    let (mu1, var) = mean_and_variance(velocities);
    let inv_c = sqrt(target_var / var);
    for v in velocities.iter_mut() {
        *v = (*v - mu1) * inv_c + m1;
    }
    Ok(())
}

/// Minimum of a Maxwellian ratio over an interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioMinResult {
    pub min_value: f64,
    pub argmin_v: f64,
}

/// Exact minimum over `[lo, hi]` of `numer(v) / denom(v)` for a single
/// Maxwellian numerator. The log-ratio is a quadratic in `v`.
fn min_single_ratio(numer: &MaxwellianParams, denom: &MaxwellianParams, lo: f64, hi: f64) -> RatioMinResult {
    if numer.rho == 0.0 {
        return RatioMinResult {
            min_value: 0.0,
            argmin_v: lo,
        };
    }
    let (tn, td) = (numer.temperature, denom.temperature);
    let log_prefactor = ln(numer.rho / denom.rho) + 0.5 * ln(td / tn);
    let exponent = |v: f64| {
        let dn = v - numer.u;
        let dd = v - denom.u;
        dd * dd / (2.0 * td) - dn * dn / (2.0 * tn)
    };
    // q(v) = a v^2 + b v + c
    let a = 0.5 / td - 0.5 / tn;
    let b = numer.u / tn - denom.u / td;
    let mut best_v = lo;
    let mut best_q = exponent(lo);
    let q_hi = exponent(hi);
    if q_hi < best_q {
        best_q = q_hi;
        best_v = hi;
    }
    if a > 0.0 {
        let vertex = -b / (2.0 * a);
        if vertex > lo && vertex < hi {
            let q = exponent(vertex);
            if q < best_q {
                best_q = q;
                best_v = vertex;
            }
        }
    }
    RatioMinResult {
        min_value: libm::exp(log_prefactor + best_q),
        argmin_v: best_v,
    }
}

/// Minimum of `sum_k w_k M_k(v) / denom(v)` over `[lo, hi]`.
///
/// `numer` holds one or two `(weight, Maxwellian)` terms. A single term with
/// weight 1 is minimized exactly. For two terms the weights may be any
/// (possibly velocity dependent) convex combination, and the result is the
/// lower bound `min_k min_v M_k / denom`, which never exceeds the true
/// minimum. Terms with zero density contribute a zero ratio.
pub fn min_ratio_maxwellians(
    numer: &[(f64, MaxwellianParams)],
    denom: &MaxwellianParams,
    lo: f64,
    hi: f64,
) -> Result<RatioMinResult> {
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidArgument("ratio interval must satisfy lo < hi"));
    }
    if numer.is_empty() || numer.len() > 2 {
        return Err(Error::InvalidArgument("ratio numerator needs one or two terms"));
    }
    if numer.iter().any(|(w, _)| !(*w >= 0.0)) {
        return Err(Error::InvalidArgument("numerator weights must be non-negative"));
    }
    let weight_sum: f64 = numer.iter().map(|(w, _)| w).sum();
    if (weight_sum - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument("numerator weights must sum to one"));
    }
    let mut best: Option<RatioMinResult> = None;
    for (w, m) in numer {
        if numer.len() == 2 && *w == 0.0 {
            continue;
        }
        let r = min_single_ratio(m, denom, lo, hi);
        if best.is_none_or(|b| r.min_value < b.min_value) {
            best = Some(r);
        }
    }
    Ok(best.expect("at least one weighted term"))
}

/// Counters raised by [`accept_reject_residual`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AcceptRejectStats {
    pub trials: u64,
    /// Acceptance probabilities found outside `[0, 1]` beyond `1e-9`.
    pub clamped: u64,
}

/// Acceptance-rejection sampling of `(source - beta_c M^H) / (1 - beta_c)`.
///
/// Each trial draws a source particle uniformly with replacement and keeps it
/// with probability `1 - beta_c M^H(v) / source_density(v)`; trials continue
/// until `n` particles are accepted.
pub fn accept_reject_residual<F>(
    source: &[f64],
    source_density: F,
    n: usize,
    beta_c: f64,
    target: &MaxwellianParams,
    rng: &mut RngStream,
    stats: &mut AcceptRejectStats,
) -> Result<Vec<f64>>
where
    F: Fn(f64) -> f64,
{
    if !(0.0..=1.0).contains(&beta_c) {
        return Err(Error::InvalidArgument("beta_c must lie in [0, 1]"));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if source.is_empty() {
        return Err(Error::InvalidArgument("acceptance-rejection needs source particles"));
    }
    let accept_probability = |v: f64, stats: &mut AcceptRejectStats| {
        let p = 1.0 - beta_c * target.eval(v) / source_density(v);
        if !(-1e-9..=1.0 + 1e-9).contains(&p) || p.is_nan() {
            stats.clamped += 1;
        }
        if p.is_nan() {
            0.0
        } else {
            p.clamp(0.0, 1.0)
        }
    };
    if beta_c > 0.0 {
        let mean_ratio =
            source.iter().map(|&v| target.eval(v) / source_density(v)).sum::<f64>() / source.len() as f64;
        let expected = 1.0 - beta_c * mean_ratio;
        if !(expected > 1e-6) {
            return Err(Error::AcceptanceTooLow { expected });
        }
    }
    let max_trials = 1_000_000u64.max(10_000 * n as u64);
    let mut out = Vec::with_capacity(n);
    let mut trials = 0u64;
    while out.len() < n {
        if trials >= max_trials {
            stats.trials += trials;
            return Err(Error::AcceptanceTooLow {
                expected: out.len() as f64 / trials as f64,
            });
        }
        trials += 1;
        let v = source[rng.index(source.len())];
        if beta_c == 0.0 || rng.uniform() < accept_probability(v, stats) {
            out.push(v);
        }
    }
    stats.trials += trials;
    Ok(out)
}
