//! Sparse horocycle orbits `T_n x = u(t_n) k_θ g₀ Γ`.
//!
//! Times grow like `e^{λn}`, so reducing `u(t_n) k_θ g₀` into the fundamental
//! domain needs all integer digits of `t_n` plus guard bits. Every point is
//! computed independently from `g₀` at a precision fixed by a
//! [`PrecisionPolicy`], never by incremental products.

use std::f64::consts::{LOG2_E, TAU};
use std::io::Write;

use once_cell::sync::Lazy;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::group::GroupElement;
use crate::modular::{reduce_frame, Frame, FramePoint, DEFAULT_LOG2_TOLERANCE};
use crate::mp::Real;

/// Guard bits added on top of the size of the largest time.
pub const GUARD_BITS: usize = 96;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TimeSequence {
    /// `t_n = e^{λn}`.
    Exponential { lambda: f64 },
    /// `t_n = n^{1+γ}`.
    Polynomial { gamma: f64 },
    /// `t_n` = the n-th prime.
    Primes,
    /// `t_n` = `values[n-1]`; must be nonnegative and nondecreasing.
    Explicit { values: Vec<f64> },
}

impl TimeSequence {
    pub fn exponential(lambda: f64) -> Self {
        TimeSequence::Exponential { lambda }
    }

    pub fn explicit(values: Vec<f64>) -> Self {
        TimeSequence::Explicit { values }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TimeSequence::Exponential { lambda } if !(*lambda > 0.0 && lambda.is_finite()) => {
                Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")))
            }
            TimeSequence::Polynomial { gamma } if !(*gamma >= 0.0 && gamma.is_finite()) => {
                Err(Error::InvalidArgument(format!("gamma must be nonnegative, got {gamma}")))
            }
            TimeSequence::Explicit { values } => {
                if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::InvalidArgument("explicit times must be finite and nonnegative".into()));
                }
                if values.windows(2).any(|w| w[1] < w[0]) {
                    return Err(Error::InvalidArgument("explicit times must be nondecreasing".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Largest usable index, if the sequence is finite.
    pub fn max_len(&self) -> Option<usize> {
        match self {
            TimeSequence::Explicit { values } => Some(values.len()),
            _ => None,
        }
    }

    /// `log₂ t_n`, used for precision planning (`-∞` for `t_n = 0`).
    pub fn log2_time(&self, n: usize) -> f64 {
        let n = n.max(1) as f64;
        match self {
            TimeSequence::Exponential { lambda } => lambda * n * LOG2_E,
            TimeSequence::Polynomial { gamma } => (1.0 + gamma) * n.log2(),
            TimeSequence::Primes => (nth_prime(n as usize) as f64).log2(),
            TimeSequence::Explicit { values } => values
                .get(n as usize - 1)
                .map(|v| v.log2())
                .unwrap_or(f64::INFINITY),
        }
    }

    /// `t_n` as a double (may overflow to infinity for huge exponentials).
    pub fn time_f64(&self, n: usize) -> f64 {
        match self {
            TimeSequence::Exponential { lambda } => (lambda * n as f64).exp(),
            TimeSequence::Polynomial { gamma } => (n as f64).powf(1.0 + gamma),
            TimeSequence::Primes => nth_prime(n) as f64,
            TimeSequence::Explicit { values } => values[n - 1],
        }
    }

    /// `t_n` at precision `p` (1-based `n`).
    pub fn time(&self, n: usize, p: usize) -> Result<Real> {
        if n == 0 {
            return Err(Error::InvalidArgument("time indices are 1-based".into()));
        }
        match self {
            TimeSequence::Exponential { lambda } => Ok((Real::from_f64(*lambda, p) * Real::from_i64(n as i64, p)).exp()),
            TimeSequence::Polynomial { gamma } => {
                let e = Real::from_f64(1.0 + gamma, p);
                Ok((e * Real::from_i64(n as i64, p).ln()).exp())
            }
            TimeSequence::Primes => Ok(Real::from_i64(nth_prime(n) as i64, p)),
            TimeSequence::Explicit { values } => values
                .get(n - 1)
                .map(|v| Real::from_f64(*v, p))
                .ok_or(Error::InsufficientLength { needed: n, got: values.len() }),
        }
    }

    /// `t_1, …, t_N` at precision `p`.
    pub fn values(&self, n_max: usize, p: usize) -> Result<Vec<Real>> {
        self.validate()?;
        if let Some(len) = self.max_len() {
            if n_max > len {
                return Err(Error::InsufficientLength { needed: n_max, got: len });
            }
        }
        if let TimeSequence::Primes = self {
            ensure_primes(n_max);
        }
        (1..=n_max).into_par_iter().map(|n| self.time(n, p)).collect()
    }
}

static PRIMES: Lazy<Mutex<Vec<u64>>> = Lazy::new(|| Mutex::new(Vec::new()));

/// Sieves until at least `n` primes are known.
fn ensure_primes(n: usize) {
    let mut primes = PRIMES.lock().expect("prime cache poisoned");
    if primes.len() >= n {
        return;
    }
    // p_n < n (ln n + ln ln n) for n ≥ 6
    let nf = n.max(6) as f64;
    let limit = (nf * (nf.ln() + nf.ln().ln())).ceil() as usize + 16;
    let mut composite = vec![false; limit + 1];
    let mut out = Vec::with_capacity(n);
    for i in 2..=limit {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= limit {
                composite[j] = true;
                j += i;
            }
        }
    }
    *primes = out;
}

/// The n-th prime, 1-based (`nth_prime(1) = 2`).
pub fn nth_prime(n: usize) -> u64 {
    assert!(n >= 1, "primes are 1-based");
    ensure_primes(n);
    PRIMES.lock().expect("prime cache poisoned")[n - 1]
}

/// Working precision as a function of the orbit length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PrecisionPolicy {
    /// `2·⌈log₂ t_N⌉ + 96` bits, at least 128.
    Default,
    Fixed { bits: usize },
}

impl PrecisionPolicy {
    pub fn bits(&self, times: &TimeSequence, n: usize) -> usize {
        match self {
            PrecisionPolicy::Fixed { bits } => *bits,
            PrecisionPolicy::Default => default_precision(times, n),
        }
    }
}

/// Default precision for reducing the first `n` points of `times`.
///
/// The reduction error grows like `t_N² · 2^{-p}` for a generic angle, so the
/// integer digits of `t_N` are budgeted twice.
pub fn default_precision(times: &TimeSequence, n: usize) -> usize {
    let top = match times {
        TimeSequence::Explicit { values } => values.iter().take(n).map(|v| v.log2()).fold(0.0f64, f64::max),
        _ => times.log2_time(n),
    };
    ((2.0 * top.max(0.0)).ceil() as usize + GUARD_BITS).max(128)
}

/// Orbit specification: `T_n x = u(t_n)·k_θ·g₀Γ`, `n = 1..=n_max`.
#[derive(Clone, Debug)]
pub struct OrbitSpec {
    pub base: GroupElement,
    pub theta: f64,
    pub times: TimeSequence,
    pub n_max: usize,
    pub policy: PrecisionPolicy,
}

impl OrbitSpec {
    pub fn new(times: TimeSequence, theta: f64, n_max: usize) -> Self {
        OrbitSpec {
            base: GroupElement::identity(2, 64),
            theta,
            times,
            n_max,
            policy: PrecisionPolicy::Default,
        }
    }

    pub fn with_base(mut self, base: GroupElement) -> Self {
        self.base = base;
        self
    }

    pub fn with_policy(mut self, policy: PrecisionPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn precision(&self, n: usize) -> usize {
        self.policy.bits(&self.times, n)
    }
}

/// The frame `φ(k_θ g₀) = φ(g₀)·k_θ` at precision `p`.
pub fn base_frame(base: &GroupElement, theta: f64, p: usize) -> Result<Frame> {
    let g0 = base.with_precision(p);
    let k = GroupElement::rotation(&Real::from_f64(theta, p));
    Frame::of_coset(&k.mul(&g0)?)
}

/// `φ(u(t)·k_θ g₀) = base·u(t)`.
pub fn frame_at_time(base: &Frame, t: &Real) -> Frame {
    Frame {
        a: base.a.clone(),
        b: &(&base.a * t) + &base.b,
        c: base.c.clone(),
        d: &(&base.c * t) + &base.d,
    }
}

/// Reduced orbit points for `n = 1..=N`, computed in parallel at
/// `spec.precision(N)` and returned in index order.
pub fn orbit_prefix(spec: &OrbitSpec, n: usize) -> Result<Vec<FramePoint>> {
    if n > spec.n_max {
        return Err(Error::InvalidArgument(format!("N = {n} exceeds N_max = {}", spec.n_max)));
    }
    let p = spec.precision(n);
    let times = spec.times.values(n, p)?;
    let base = base_frame(&spec.base, spec.theta, p)?;
    times
        .par_iter()
        .map(|t| reduce_frame(&frame_at_time(&base, t), DEFAULT_LOG2_TOLERANCE))
        .collect()
}

/// Uniform angle on `[0, 2π)`, the law of `k_θ` under Haar measure on `SO(2)`.
pub fn mu_h_sampler<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.gen::<f64>() * TAU
}

/// Writes `n, t_n, x, y, theta, word_length` rows.
pub fn write_orbit_csv<W: Write>(out: W, times: &TimeSequence, points: &[FramePoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
    w.write_record(["n", "t_n", "x", "y", "theta", "word_length"]).map_err(io)?;
    for (i, pt) in points.iter().enumerate() {
        let n = i + 1;
        w.write_record([
            n.to_string(),
            format!("{:e}", times.time_f64(n)),
            pt.x.to_string(),
            pt.y.to_string(),
            pt.theta.to_string(),
            pt.word.len().to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn theta_zero_gives_fractional_parts() {
        let times = TimeSequence::exponential(0.37);
        let spec = OrbitSpec::new(times.clone(), 0.0, 50);
        let pts = orbit_prefix(&spec, 50).unwrap();
        for (i, pt) in pts.iter().enumerate() {
            let n = i + 1;
            // Oracle: floor-based fractional part at doubled precision.
            let p = 2 * spec.precision(50) + 64;
            let t = times.time(n, p).unwrap();
            let mut frac = (&t - &t.floor()).to_f64();
            if frac >= 0.5 {
                frac -= 1.0;
            }
            assert!((pt.x - frac).abs() < 1e-12, "n = {n}: {} vs {frac}", pt.x);
            assert_eq!(pt.y, 1.0);
            assert_eq!(pt.theta, 0.0);
        }
    }

    #[test]
    fn integer_times_land_on_i() {
        let spec = OrbitSpec::new(TimeSequence::explicit(vec![1.0, 2.0, 3.0]), 0.0, 3);
        for pt in orbit_prefix(&spec, 3).unwrap() {
            assert_eq!((pt.x, pt.y), (0.0, 1.0));
        }
    }

    #[test]
    fn elevated_precision_self_consistency() {
        let spec = OrbitSpec::new(TimeSequence::exponential(0.1), 0.7, 500);
        let p = spec.precision(500);
        let lo = orbit_prefix(&spec, 500).unwrap();
        let hi = orbit_prefix(&spec.clone().with_policy(PrecisionPolicy::Fixed { bits: p + 64 }), 500).unwrap();
        for (a, b) in lo.iter().zip(&hi) {
            let tol = 2f64.powi(-32);
            assert!((a.x - b.x).abs() < tol && (a.y - b.y).abs() < tol);
            let dt = (a.theta - b.theta).abs();
            assert!(dt.min(TAU - dt) < tol);
        }
    }

    #[test]
    fn precision_monotonicity() {
        let spec = OrbitSpec::new(TimeSequence::exponential(0.2), 1.3, 120);
        let old = spec.precision(120);
        let a = orbit_prefix(&spec, 120).unwrap();
        for extra in [32, 200] {
            let b = orbit_prefix(&spec.clone().with_policy(PrecisionPolicy::Fixed { bits: old + extra }), 120).unwrap();
            for (p, q) in a.iter().zip(&b) {
                // Coordinates are doubles, so the bound bottoms out at f64 resolution.
                let tol = 2f64.powf(-(old as f64) / 2.0).max(1e-15 * p.y.max(1.0));
                assert!((p.x - q.x).abs() <= tol && (p.y - q.y).abs() <= tol);
            }
        }
    }

    #[test]
    fn too_little_precision_is_reported() {
        let spec = OrbitSpec::new(TimeSequence::exponential(0.5), 0.3, 200).with_policy(PrecisionPolicy::Fixed { bits: 128 });
        assert!(matches!(orbit_prefix(&spec, 200), Err(Error::PrecisionExhausted { .. })));
    }

    #[test]
    fn deterministic() {
        let spec = OrbitSpec::new(TimeSequence::exponential(0.05), 2.0, 300);
        assert_eq!(orbit_prefix(&spec, 300).unwrap(), orbit_prefix(&spec, 300).unwrap());
    }

    #[test]
    fn group_law_consistency() {
        let (a, b, c) = (0.75, 13.4, 2.125);
        let base = GroupElement::unipotent(&Real::from_f64(c, 128));
        let shifted = OrbitSpec::new(TimeSequence::explicit(vec![a, b]), 0.0, 2).with_base(base);
        let direct = OrbitSpec::new(TimeSequence::explicit(vec![a + c, b + c]), 0.0, 2);
        let p = orbit_prefix(&shifted, 2).unwrap();
        let q = orbit_prefix(&direct, 2).unwrap();
        for (x, y) in p.iter().zip(&q) {
            assert!((x.x - y.x).abs() < 1e-12 && (x.y - y.y).abs() < 1e-12);
        }
    }

    #[test]
    fn primes_and_polynomial() {
        assert_eq!((1..=10).map(nth_prime).collect::<Vec<_>>(), [2, 3, 5, 7, 11, 13, 17, 19, 23, 29]);
        assert_eq!(nth_prime(10_000), 104_729);
        let poly = TimeSequence::Polynomial { gamma: 0.5 };
        assert!((poly.time(4, 128).unwrap().to_f64() - 8.0).abs() < 1e-30);
        let spec = OrbitSpec::new(TimeSequence::Primes, 0.4, 100);
        assert_eq!(spec.precision(100), 128);
        assert!(orbit_prefix(&spec, 100).is_ok());
    }

    #[test]
    fn explicit_validation() {
        assert!(TimeSequence::explicit(vec![0.0, 1.0]).validate().is_ok());
        assert!(TimeSequence::explicit(vec![2.0, 1.0]).validate().is_err());
        assert!(TimeSequence::explicit(vec![-1.0]).validate().is_err());
        let spec = OrbitSpec::new(TimeSequence::explicit(vec![1.0]), 0.0, 5);
        assert!(matches!(orbit_prefix(&spec, 2), Err(Error::InsufficientLength { .. })));
    }

    #[test]
    fn mu_h_sampler_is_uniform() {
        let mut rng = seeded(21);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| mu_h_sampler(&mut rng)).collect();
        let mean_sin = draws.iter().map(|t| t.sin()).sum::<f64>() / n as f64;
        assert!(mean_sin.abs() < 3.0 * (0.5 / n as f64).sqrt());
        let mut bins = [0usize; 16];
        for t in &draws {
            bins[((t / TAU) * 16.0) as usize] += 1;
        }
        let e = n as f64 / 16.0;
        let chi: f64 = bins.iter().map(|&b| (b as f64 - e).powi(2) / e).sum();
        // chi-square(15) upper 1% point
        assert!(chi < 30.578);
    }

    #[test]
    fn csv_columns() {
        let spec = OrbitSpec::new(TimeSequence::explicit(vec![1.5, 2.0]), 0.0, 2);
        let pts = orbit_prefix(&spec, 2).unwrap();
        let mut buf = Vec::new();
        write_orbit_csv(&mut buf, &spec.times, &pts).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "n,t_n,x,y,theta,word_length");
        assert_eq!(text.lines().count(), 3);
    }
}
