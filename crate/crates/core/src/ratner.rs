//! Unipotent limits of conjugated sequences and the statistics of `f_n`.
//!
//! The setting is `G = SL(2,R)`, `H = SO(2)`, `U` the upper unipotents and
//! `g_n = u(t_n)`. A direction `v ∈ 𝔥` shrunk at the right speed,
//! `v_n = v / t_n^{d_𝔥}`, has `exp(Ad(g_n) v_n)` converging to a nontrivial
//! unipotent element centralizing `U`. The functions
//! `f_n(hΓ) = φ(g_n exp(v_n) hΓ) − φ(g_n hΓ)` then decorrelate along
//! sparse schedules, which is what the law of large numbers needs.

use std::f64::consts::TAU;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{ad_operator_norm, adjoint_eigenvalues, cartan_kah, exp, AlgebraElement, GroupElement};
use crate::modular::{distance_to_identity, injectivity_radius, reduce_frame, Frame, FramePoint, TestFunction, DEFAULT_LOG2_TOLERANCE, DEFAULT_WORD_BUDGET};
use crate::mp::Real;
use crate::orbit::{default_precision, frame_at_time, TimeSequence};
use crate::rng::seeded;
use crate::sl2::{d_h_compute, decompose_adjoint, jacobson_morozov, sl2_standard, RatMatrix};

/// Cauchy tolerance for conjugation trajectories.
pub const CAUCHY_TOLERANCE: f64 = 1e-8;
/// Number of consecutive indices the Cauchy test looks at.
pub const CAUCHY_WINDOW: usize = 5;
/// Tolerance of the unipotence and centralizer certificates.
pub const CERTIFICATE_TOLERANCE: f64 = 1e-6;
/// Cluster radius used to pick a convergent subsequence.
pub const CLUSTER_RADIUS: f64 = 1e-6;
/// A sequence whose Cartan `σ` never exceeds this is treated as bounded in `G/H`.
pub const ESCAPE_SIGMA: f64 = 1e3;

fn precision_for(t_log2: f64, factor: f64) -> usize {
    128 + (factor * t_log2.max(0.0)).ceil() as usize
}

/// Conjugates `g_n k_{θ_n} g_n^{-1}` with `g_n = u(t_n)` and `t_n² sin θ_n = α`.
///
/// Their limit is `u(α)`, but only at rate `α/t_n`: the diagonal entries
/// are `cos θ_n ∓ t_n sin θ_n`.
pub fn example_theta_limit(alpha: f64, times: &TimeSequence, n: usize) -> Result<Vec<GroupElement>> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha must lie in [0, 1), got {alpha}")));
    }
    times.validate()?;
    (1..=n)
        .map(|k| {
            let p = precision_for(times.log2_time(k), 4.0);
            let t = times.time(k, p)?;
            let ratio = &Real::from_f64(alpha, p) / &t.sqr();
            if ratio.to_f64() > 1.0 || t.is_zero() {
                return Err(Error::TimesTooSmall {
                    index: k,
                    ratio: ratio.to_f64(),
                });
            }
            let g = GroupElement::unipotent(&t);
            let rot = GroupElement::rotation(&ratio.asin());
            g.mul(&rot)?.mul(&g.inverse())
        })
        .collect()
}

/// `θ_n = arcsin(α / t_n²)`.
pub fn theta_n(alpha: f64, t: f64) -> f64 {
    (alpha / (t * t)).asin()
}

/// Entrywise sup distance of each conjugate from `u(α)`.
pub fn theta_limit_errors(alpha: f64, conjugates: &[GroupElement]) -> Vec<f64> {
    conjugates
        .iter()
        .map(|g| {
            let limit = GroupElement::unipotent(&Real::from_f64(alpha, g.precision_bits()));
            g.sup_distance(&limit)
        })
        .collect()
}

/// How `v_n` is scaled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingMode {
    /// `v_n = v / t_n^{d_𝔥}`.
    DhPower,
    /// `v_n = v / ‖Ad(g_n)|_𝔥‖`.
    AdNorm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConjugationExperiment {
    pub direction: [f64; 4],
    pub mode: ScalingMode,
    /// `d_𝔥`, when computed.
    pub d_h: Option<usize>,
    /// `g_n exp(v_n) g_n^{-1}` for `n = 1, 2, …`.
    pub trajectory: Vec<[f64; 4]>,
    /// `‖v_n‖ · ‖Ad(g_n)|_𝔥‖`, bounded for a correct schedule.
    pub scale_products: Vec<f64>,
    /// Indices (1-based) of the convergent tail or cluster.
    pub selected: Vec<usize>,
    pub limit: Option<[f64; 4]>,
    /// All adjoint eigenvalues of the limit within the certificate tolerance of 1.
    pub unipotent: bool,
    /// `[limit, u(1)]` within the certificate tolerance of the identity.
    pub centralizes: bool,
    /// The limit differs from the identity by more than the certificate tolerance.
    pub nontrivial: bool,
}

fn entries(g: &GroupElement) -> [f64; 4] {
    let m = g.to_f64();
    [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]]
}

fn sup4(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// First 1-based index from which `CAUCHY_WINDOW` consecutive points agree within `tol`.
pub fn cauchy_index(traj: &[[f64; 4]], tol: f64) -> Option<usize> {
    if traj.len() < CAUCHY_WINDOW {
        return None;
    }
    (0..=traj.len() - CAUCHY_WINDOW).find(|&i| {
        let w = &traj[i..i + CAUCHY_WINDOW];
        w.iter().all(|a| w.iter().all(|b| sup4(a, b) < tol))
    })
    .map(|i| i + 1)
}

/// Indices (0-based) of the largest cluster of radius `radius`; ties go to the later center.
pub fn largest_cluster(traj: &[[f64; 4]], radius: f64) -> Vec<usize> {
    let mut best: Vec<usize> = Vec::new();
    for c in 0..traj.len() {
        let members: Vec<usize> = (0..traj.len()).filter(|&j| sup4(&traj[c], &traj[j]) < radius).collect();
        if members.len() >= best.len() {
            best = members;
        }
    }
    best
}

struct Certificates {
    unipotent: bool,
    centralizes: bool,
    nontrivial: bool,
}

fn certify(limit: &GroupElement) -> Certificates {
    let p = limit.precision_bits();
    let unipotent = adjoint_eigenvalues(limit)
        .iter()
        .all(|z| (z - nalgebra::Complex::new(1.0, 0.0)).norm() < CERTIFICATE_TOLERANCE);
    let u1 = GroupElement::unipotent(&Real::one(p));
    let comm = limit
        .mul(&u1)
        .and_then(|x| x.mul(&limit.inverse()))
        .and_then(|x| x.mul(&u1.inverse()))
        .map(|c| c.sup_distance(&GroupElement::identity(2, p)))
        .unwrap_or(f64::INFINITY);
    let nontrivial = limit.sup_distance(&GroupElement::identity(2, p)) > CERTIFICATE_TOLERANCE;
    Certificates {
        unipotent,
        centralizes: comm < CERTIFICATE_TOLERANCE,
        nontrivial,
    }
}

fn algebra_entries(v: &AlgebraElement) -> [f64; 4] {
    let m = v.to_f64();
    [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]]
}

/// `d_𝔥` of `span(v)` for `U = exp(tE)`, computed exactly from the doubles of `v`.
pub fn d_h_of_direction(v: &AlgebraElement) -> Result<usize> {
    let (e, _, _) = sl2_standard();
    let dec = decompose_adjoint(&jacobson_morozov(&e)?)?;
    let exact = RatMatrix::from_f64(2, &algebra_entries(v))?;
    d_h_compute(&dec, &[exact])
}

/// `exp(Ad(u(t_n)) v_n)` for `n = 1..=N` with `v_n` scaled per `mode`.
pub fn jm_conjugation(v: &AlgebraElement, times: &TimeSequence, n: usize, mode: ScalingMode) -> Result<ConjugationExperiment> {
    if v.dim() != 2 {
        return Err(Error::DimensionMismatch { left: v.dim(), right: 2 });
    }
    times.validate()?;
    let d = d_h_of_direction(v)?;
    if d == 0 {
        return Err(Error::Centralized);
    }
    let direction = algebra_entries(v);
    let steps: Vec<(GroupElement, f64)> = (1..=n)
        .into_par_iter()
        .map(|k| -> Result<(GroupElement, f64)> {
            let p = precision_for(times.log2_time(k), (d + 2) as f64);
            let t = times.time(k, p)?;
            let vp = AlgebraElement::from_f64(2, &direction, p)?;
            let g = GroupElement::unipotent(&t);
            let restricted = ad_operator_norm(&g, Some(std::slice::from_ref(&vp)));
            let scale = match mode {
                ScalingMode::DhPower => {
                    let mut s = Real::one(p);
                    for _ in 0..d {
                        s = &s * &t;
                    }
                    s.recip()
                }
                ScalingMode::AdNorm => Real::from_f64(restricted, p).recip(),
            };
            let vn = vp.scale(&scale);
            let product = vn.norm().to_f64() * restricted;
            Ok((exp(&g.conjugate(&vn)), product))
        })
        .collect::<Result<_>>()?;
    let trajectory: Vec<[f64; 4]> = steps.iter().map(|(g, _)| entries(g)).collect();
    let scale_products = steps.iter().map(|s| s.1).collect();
    let converged = cauchy_index(&trajectory, CAUCHY_TOLERANCE);
    let (selected, limit, certs) = match converged {
        Some(i) => {
            let c = certify(&steps[n - 1].0);
            ((i..=n).collect(), Some(trajectory[n - 1]), c)
        }
        None => (
            Vec::new(),
            None,
            Certificates {
                unipotent: false,
                centralizes: false,
                nontrivial: false,
            },
        ),
    };
    Ok(ConjugationExperiment {
        direction,
        mode,
        d_h: Some(d),
        trajectory,
        scale_products,
        selected,
        limit,
        unipotent: certs.unipotent,
        centralizes: certs.centralizes,
        nontrivial: certs.nontrivial,
    })
}

/// Escaping-sequence construction for `(SL(2,R), SO(2))` with `σ(g) = (gᵀ)⁻¹`:
/// `v = E + σ(E) = E − F`, `v_n = v / ‖Ad(g_n)‖`, trajectory `exp(Ad(g_n) v_n)`,
/// and a convergent subsequence picked by clustering.
pub fn appendix_vn(g_seq: &[GroupElement]) -> Result<ConjugationExperiment> {
    if g_seq.is_empty() {
        return Err(Error::InvalidArgument("empty sequence".into()));
    }
    let mut max_sigma = 0.0f64;
    for g in g_seq {
        max_sigma = max_sigma.max(cartan_kah(g)?.sigma.to_f64());
    }
    if max_sigma < ESCAPE_SIGMA {
        return Err(Error::BoundedSequence { max_sigma });
    }
    let steps: Vec<(GroupElement, f64)> = g_seq
        .par_iter()
        .map(|g| -> Result<(GroupElement, f64)> {
            let p = g.precision_bits();
            let v = AlgebraElement::so2(p);
            let norm = ad_operator_norm(g, None);
            let vn = v.scale(&Real::from_f64(norm, p).recip());
            let restricted = ad_operator_norm(g, Some(std::slice::from_ref(&v)));
            Ok((exp(&g.conjugate(&vn)), vn.norm().to_f64() * restricted))
        })
        .collect::<Result<_>>()?;
    let trajectory: Vec<[f64; 4]> = steps.iter().map(|(g, _)| entries(g)).collect();
    let cluster = largest_cluster(&trajectory, CLUSTER_RADIUS);
    let last = *cluster.last().expect("every point is in its own cluster");
    let certs = certify(&steps[last].0);
    Ok(ConjugationExperiment {
        direction: [0.0, 1.0, -1.0, 0.0],
        mode: ScalingMode::AdNorm,
        d_h: None,
        scale_products: steps.iter().map(|s| s.1).collect(),
        selected: cluster.iter().map(|i| i + 1).collect(),
        limit: Some(trajectory[last]),
        trajectory,
        unipotent: certs.unipotent,
        centralizes: certs.centralizes,
        nontrivial: certs.nontrivial,
    })
}

/// `‖Ad(u(t))|_{so(2)}‖ / t²`.
pub fn scale_law_ratio(t: f64) -> f64 {
    let p = precision_for(t.log2(), 4.0);
    let g = GroupElement::unipotent(&Real::from_f64(t, p));
    ad_operator_norm(&g, Some(&[AlgebraElement::so2(p)])) / (t * t)
}

/// `v_n = direction / t_n^exponent` along `g_n = u(t_n)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VnSchedule {
    pub times: TimeSequence,
    /// Row-major entries of the direction in `𝔥`.
    pub direction: [f64; 4],
    pub exponent: u32,
}

impl VnSchedule {
    /// `v = E − F ∈ so(2)` with `d_𝔥 = 2`.
    pub fn so2(times: TimeSequence) -> Self {
        VnSchedule {
            times,
            direction: [0.0, 1.0, -1.0, 0.0],
            exponent: 2,
        }
    }

    pub fn zero(times: TimeSequence) -> Self {
        VnSchedule {
            times,
            direction: [0.0; 4],
            exponent: 0,
        }
    }

    pub fn precision(&self, n: usize) -> usize {
        default_precision(&self.times, n) + 32
    }

    /// `(t_n, exp(v_n))` at the schedule's precision for `n`.
    pub fn step(&self, n: usize) -> Result<(Real, GroupElement)> {
        let p = self.precision(n);
        let t = self.times.time(n, p)?;
        let mut scale = Real::one(p);
        for _ in 0..self.exponent {
            scale = &scale / &t;
        }
        let v = AlgebraElement::from_f64(2, &self.direction, p)?.scale(&scale);
        Ok((t, exp(&v)))
    }

    /// `g_n exp(v_n) g_n^{-1}` in doubles.
    pub fn conjugate(&self, n: usize) -> Result<[f64; 4]> {
        let (t, ev) = self.step(n)?;
        let g = GroupElement::unipotent(&t);
        Ok(entries(&g.mul(&ev)?.mul(&g.inverse())?))
    }

    /// Frame displacement of left translation by `g_n exp(v_n) g_n^{-1}`.
    pub fn displacement(&self, n: usize) -> Result<f64> {
        let c = self.conjugate(n)?;
        // φ((a b; c d)) = (d b; c a)
        Ok(distance_to_identity(&[c[3], c[1], c[2], c[0]]))
    }
}

/// Reduced `u(t)·m·k_θ·g₀Γ`.
fn orbit_point(t: &Real, m: Option<&GroupElement>, k: &GroupElement, g0: &GroupElement) -> Result<FramePoint> {
    let p = t.precision();
    let h = k.with_precision(p).mul(&g0.with_precision(p))?;
    let h = match m {
        Some(m) => m.mul(&h)?,
        None => h,
    };
    reduce_frame(&frame_at_time(&Frame::of_coset(&h)?, t), DEFAULT_LOG2_TOLERANCE)
}

fn f_n_parts(
    phi_fn: &TestFunction,
    g0: &GroupElement,
    t: &Real,
    ev: &GroupElement,
    theta: &Real,
) -> Result<(f64, FramePoint)> {
    let k = GroupElement::rotation(theta);
    let moved = orbit_point(t, Some(ev), &k, g0)?;
    let base = orbit_point(t, None, &k, g0)?;
    Ok((phi_fn.eval(&moved) - phi_fn.eval(&base), base))
}

/// `f_n(k_θ g₀Γ) = φ(g_n exp(v_n) k_θ g₀Γ) − φ(g_n k_θ g₀Γ)`.
pub fn f_n_eval(phi_fn: &TestFunction, g0: &GroupElement, schedule: &VnSchedule, n: usize, theta: f64) -> Result<f64> {
    let (t, ev) = schedule.step(n)?;
    let th = Real::from_f64(theta, t.precision());
    Ok(f_n_parts(phi_fn, g0, &t, &ev, &th)?.0)
}

/// `φ(u·g_n k_θ g₀Γ) − φ(g_n k_θ g₀Γ)` for a fixed `u ∈ G`.
pub fn limit_difference(phi_fn: &TestFunction, g0: &GroupElement, times: &TimeSequence, u: &GroupElement, n: usize, theta: f64) -> Result<f64> {
    let p = default_precision(times, n) + 32;
    let t = times.time(n, p)?;
    let k = GroupElement::rotation(&Real::from_f64(theta, p));
    let base = orbit_point(&t, None, &k, g0)?;
    let moved = base.translate(&u.with_precision(p))?;
    Ok(phi_fn.eval(&moved) - phi_fn.eval(&base))
}

/// Default observable for the `f_n` experiments: a bump of width 2 at `(0, 1.2, 0)`.
///
/// Narrow bumps leave `f_n = 0` for most angles at small `n`, which makes
/// medians of `|S_N/N|` meaningless there.
pub fn default_observable() -> TestFunction {
    TestFunction::bump(FramePoint::from_reduced(0.0, 1.2, 0.0), 2.0)
}

/// Seeded uniform angles.
pub fn theta_panel(m: usize, seed: u64) -> Vec<f64> {
    let mut rng = seeded(seed);
    (0..m).map(|_| rng.gen::<f64>() * TAU).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRecord {
    pub n: usize,
    pub m: usize,
    /// Monte Carlo estimate of `∫ f_n f_m dμ_H`.
    pub estimate: f64,
    pub std_error: f64,
    /// `(d_m / d_n)^{1/2}` with `d_k = ‖Ad(g_k)|_𝔥‖`.
    pub ratio: f64,
    /// Thick/thin radius `r = (d_m d_n)^{-1/2}`.
    pub radius: f64,
    /// Fraction of samples discarded because the orbit point has injectivity radius below `r`.
    pub discarded_fraction: f64,
}

/// Radius coupling for the thick/thin split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum RadiusMode {
    /// `r = (d_m d_n)^{-1/2}`.
    Coupled,
    Fixed { r: f64 },
}

fn restricted_norm(schedule: &VnSchedule, n: usize) -> Result<f64> {
    let p = schedule.precision(n);
    let t = schedule.times.time(n, p)?;
    let v = AlgebraElement::from_f64(2, &schedule.direction, p)?;
    Ok(ad_operator_norm(&GroupElement::unipotent(&t), Some(&[v])))
}

/// Monte Carlo estimates of `∫ f_n f_m dμ_H` over `thetas`, records sorted by `(n, m)`.
pub fn correlation_decay_experiment(
    phi_fn: &TestFunction,
    g0: &GroupElement,
    schedule: &VnSchedule,
    pairs: &[(usize, usize)],
    thetas: &[f64],
    radius: RadiusMode,
) -> Result<Vec<CorrelationRecord>> {
    if let Some(&(n, m)) = pairs.iter().find(|(n, m)| n < m || *m == 0) {
        return Err(Error::InvalidArgument(format!("pairs need n ≥ m ≥ 1, got ({n}, {m})")));
    }
    if thetas.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let mut indices: Vec<usize> = pairs.iter().flat_map(|&(n, m)| [n, m]).collect();
    indices.sort_unstable();
    indices.dedup();
    let steps: Vec<(Real, GroupElement)> = indices.iter().map(|&k| schedule.step(k)).collect::<Result<_>>()?;
    let norms: Vec<f64> = indices.iter().map(|&k| restricted_norm(schedule, k)).collect::<Result<_>>()?;
    let pos = |k: usize| indices.binary_search(&k).expect("index collected");
    let radii: Vec<f64> = pairs
        .iter()
        .map(|&(n, m)| match radius {
            RadiusMode::Coupled => (norms[pos(m)] * norms[pos(n)]).sqrt().recip(),
            RadiusMode::Fixed { r } => r,
        })
        .collect();
    // values[θ][i] = (f_{indices[i]}(θ), injectivity radius at g_{indices[i]} k_θ g₀Γ, lazily)
    let values: Vec<Vec<(f64, FramePoint)>> = thetas
        .par_iter()
        .map(|&theta| {
            steps
                .iter()
                .map(|(t, ev)| f_n_parts(phi_fn, g0, t, ev, &Real::from_f64(theta, t.precision())))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let records: Vec<CorrelationRecord> = pairs
        .par_iter()
        .zip(&radii)
        .map(|(&(n, m), &r)| {
            let (i, j) = (pos(n), pos(m));
            let kept: Vec<f64> = values
                .iter()
                .filter(|row| injectivity_radius(&row[i].1, DEFAULT_WORD_BUDGET) >= r)
                .map(|row| row[i].0 * row[j].0)
                .collect();
            let total = values.len() as f64;
            let k = kept.len() as f64;
            let (estimate, std_error) = if kept.is_empty() {
                (0.0, f64::INFINITY)
            } else {
                let mean = kept.iter().sum::<f64>() / k;
                let var = if kept.len() > 1 {
                    kept.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)
                } else {
                    0.0
                };
                (mean, (var / k).sqrt())
            };
            CorrelationRecord {
                n,
                m,
                estimate,
                std_error,
                ratio: (norms[j] / norms[i]).sqrt(),
                radius: r,
                discarded_fraction: 1.0 - k / total,
            }
        })
        .collect();
    let mut records = records;
    records.sort_by_key(|r| (r.n, r.m));
    Ok(records)
}

/// Least-squares slope of `log|corr|` against `log ratio`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Slope over off-diagonal records above the noise floor, if at least two.
    pub slope: Option<f64>,
    pub above_noise: usize,
    pub off_diagonal: usize,
    pub all_below_noise: bool,
}

/// Fits the off-diagonal records whose `|estimate|` exceeds three standard errors.
pub fn fit_decay(records: &[CorrelationRecord]) -> DecayFit {
    let off: Vec<&CorrelationRecord> = records.iter().filter(|r| r.n != r.m).collect();
    let above: Vec<&CorrelationRecord> = off
        .iter()
        .copied()
        .filter(|r| r.estimate.abs() > 3.0 * r.std_error && r.estimate != 0.0)
        .collect();
    let slope = if above.len() >= 2 {
        let xs: Vec<f64> = above.iter().map(|r| r.ratio.ln()).collect();
        let ys: Vec<f64> = above.iter().map(|r| r.estimate.abs().ln()).collect();
        least_squares_slope(&xs, &ys)
    } else {
        None
    };
    DecayFit {
        slope,
        above_noise: above.len(),
        off_diagonal: off.len(),
        all_below_noise: above.is_empty(),
    }
}

/// Slope of the least-squares line through `(x, y)`; `None` if `x` is constant.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

/// `N_k = k⁴` for `k = 1..=k_max`.
pub fn lln_grid(k_max: usize) -> Vec<usize> {
    (1..=k_max).map(|k| k.pow(4)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LlnReport {
    pub n_k: Vec<usize>,
    /// `curves[j][k] = S_{N_k}(θ_j) / N_k`.
    pub curves: Vec<Vec<f64>>,
    /// Median over θ of `|S_{N_k}/N_k|`.
    pub medians: Vec<f64>,
    /// `(1/N_k²)·mean_θ S_{N_k}²`.
    pub second_moments: Vec<f64>,
    /// Log-log slope of the second moment against `N_k` for `k ≥ 2`.
    pub slope: Option<f64>,
}

/// Ergodic sums `S_N(θ) = Σ_{n ≤ N} f_n(k_θ g₀Γ)` along `N_k = k⁴`.
pub fn lln_experiment(
    phi_fn: &TestFunction,
    g0: &GroupElement,
    schedule: &VnSchedule,
    k_max: usize,
    thetas: &[f64],
) -> Result<LlnReport> {
    if k_max < 3 {
        return Err(Error::InvalidArgument(format!("k_max must be at least 3, got {k_max}")));
    }
    if thetas.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let n_k = lln_grid(k_max);
    let n_max = *n_k.last().unwrap();
    if let Some(max) = schedule.times.max_len() {
        if n_max > max {
            return Err(Error::InvalidArgument(format!("N = {n_max} exceeds the {max} available times")));
        }
    }
    let steps: Vec<(Real, GroupElement)> = (1..=n_max).into_par_iter().map(|k| schedule.step(k)).collect::<Result<_>>()?;
    let top = schedule.precision(n_max);
    let curves: Vec<Vec<f64>> = thetas
        .par_iter()
        .map(|&theta| -> Result<Vec<f64>> {
            let th = Real::from_f64(theta, top);
            let mut sum = 0.0;
            let mut out = Vec::with_capacity(n_k.len());
            let mut next = 0;
            for (i, (t, ev)) in steps.iter().enumerate() {
                if !phi_fn.is_constant() {
                    sum += f_n_parts(phi_fn, g0, t, ev, &th.with_precision(t.precision()))?.0;
                }
                if i + 1 == n_k[next] {
                    out.push(sum / n_k[next] as f64);
                    next += 1;
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut medians = Vec::with_capacity(n_k.len());
    let mut second_moments = Vec::with_capacity(n_k.len());
    for k in 0..n_k.len() {
        let mut abs: Vec<f64> = curves.iter().map(|c| c[k].abs()).collect();
        abs.sort_by(f64::total_cmp);
        let mid = abs.len() / 2;
        medians.push(if abs.len() % 2 == 1 { abs[mid] } else { 0.5 * (abs[mid - 1] + abs[mid]) });
        second_moments.push(curves.iter().map(|c| c[k] * c[k]).sum::<f64>() / curves.len() as f64);
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = n_k
        .iter()
        .zip(&second_moments)
        .skip(1)
        .filter(|(_, m)| **m > 0.0)
        .map(|(&n, &m)| ((n as f64).ln(), m.ln()))
        .unzip();
    let slope = if xs.len() >= 2 { least_squares_slope(&xs, &ys) } else { None };
    Ok(LlnReport {
        n_k,
        curves,
        medians,
        second_moments,
        slope,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BallGroup {
    /// `SO(2)` with arc length.
    Circle,
    /// `SL(2,R)` with Frobenius balls in exponential coordinates.
    Sl2,
}

/// `log g` for `g ∈ SL(2,R)` near the identity (trace above −2).
fn log_sl2(g: &[f64; 4]) -> [f64; 4] {
    let half_tr = 0.5 * (g[0] + g[3]);
    let factor = if half_tr > 1.0 {
        let l = half_tr.acosh();
        l / l.sinh()
    } else if half_tr < 1.0 {
        let a = half_tr.clamp(-1.0, 1.0).acos();
        if a == 0.0 { 1.0 } else { a / a.sin() }
    } else {
        1.0
    };
    [factor * (g[0] - half_tr), factor * g[1], factor * g[2], factor * (g[3] - half_tr)]
}

fn exp_sl2_f64(x: &[f64; 4]) -> [f64; 4] {
    let det = x[0] * x[3] - x[1] * x[2];
    let (c, s) = if det > 0.0 {
        let r = det.sqrt();
        (r.cos(), r.sin() / r)
    } else if det < 0.0 {
        let r = (-det).sqrt();
        (r.cosh(), r.sinh() / r)
    } else {
        (1.0, 1.0)
    };
    [c + s * x[0], s * x[1], s * x[2], c + s * x[3]]
}

fn mul2(a: &[f64; 4], b: &[f64; 4]) -> [f64; 4] {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

fn frobenius(x: &[f64; 4]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Haar density of `exp(X)` relative to Lebesgue measure on `sl2`:
/// `(sinh(μ/2)/(μ/2))²` with `±μ` the nonzero eigenvalues of `ad X`.
fn exp_jacobian(x: &[f64; 4]) -> f64 {
    let det = x[0] * x[3] - x[1] * x[2];
    // eigenvalues of X are ±λ with λ² = −det; those of ad X are ±2λ
    if det < 0.0 {
        let l = (-det).sqrt();
        let s = if l == 0.0 { 1.0 } else { l.sinh() / l };
        s * s
    } else if det > 0.0 {
        let l = det.sqrt();
        let s = l.sin() / l;
        s * s
    } else {
        1.0
    }
}

/// `μ(hB_r Δ B_r) / μ(B_r)` for `h` at distance `d` from the identity.
///
/// For the circle this is exactly `2d / 2r = d/r`. For `SL(2,R)` the ball is
/// `exp` of the Frobenius ball of radius `r`, `h = exp(d·H₀/√2)`, and the
/// ratio `2·P(h⁻¹x ∉ B)` is estimated from Haar-weighted rejection samples.
pub fn ball_overlap_ratio<R: Rng + ?Sized>(group: BallGroup, r: f64, d: f64, samples: usize, rng: &mut R) -> Result<(f64, f64)> {
    if !(r > 0.0) || d < 0.0 {
        return Err(Error::InvalidArgument(format!("need r > 0 and d ≥ 0, got r = {r}, d = {d}")));
    }
    if d >= 2.0 * r {
        return Err(Error::Saturated { d, diameter: 2.0 * r });
    }
    if d == 0.0 {
        return Ok((0.0, 0.0));
    }
    match group {
        BallGroup::Circle => Ok((d / r, 0.0)),
        BallGroup::Sl2 => {
            if samples < 2 {
                return Err(Error::InvalidArgument("need at least two samples".into()));
            }
            let s = d / std::f64::consts::SQRT_2;
            let h_inv = exp_sl2_f64(&[-s, 0.0, 0.0, s]);
            let root2 = std::f64::consts::SQRT_2;
            let (mut w_sum, mut hit_sum, mut w2, mut wh2, mut whw) = (0.0, 0.0, 0.0, 0.0, 0.0);
            let mut accepted = 0usize;
            while accepted < samples {
                let c: [f64; 3] = [rng.gen_range(-r..r), rng.gen_range(-r..r), rng.gen_range(-r..r)];
                if c.iter().map(|v| v * v).sum::<f64>() >= r * r {
                    continue;
                }
                accepted += 1;
                // orthonormal coordinates: H₀/√2, E, F
                let x = [c[0] / root2, c[1], c[2], -c[0] / root2];
                let w = exp_jacobian(&x);
                let moved = mul2(&h_inv, &exp_sl2_f64(&x));
                let out = if frobenius(&log_sl2(&moved)) >= r { 1.0 } else { 0.0 };
                w_sum += w;
                hit_sum += w * out;
                w2 += w * w;
                wh2 += (w * out) * (w * out);
                whw += w * w * out;
            }
            let n = accepted as f64;
            let p = hit_sum / w_sum;
            // delta-method variance of a ratio estimator
            let mw = w_sum / n;
            let var = (wh2 - 2.0 * p * whw + p * p * w2) / n / (mw * mw) / n;
            Ok((2.0 * p, 2.0 * var.max(0.0).sqrt()))
        }
    }
}

/// Writes `n, a, b, c, d, distance_to_limit` rows.
pub fn write_trajectory_csv<W: Write>(out: W, exp: &ConjugationExperiment) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
    w.write_record(["n", "a", "b", "c", "d", "distance_to_limit"]).map_err(io)?;
    for (i, g) in exp.trajectory.iter().enumerate() {
        let dist = exp.limit.map_or(f64::NAN, |l| sup4(g, &l));
        let mut row = vec![(i + 1).to_string()];
        row.extend(g.iter().map(f64::to_string));
        row.push(dist.to_string());
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    Ok(())
}

/// Writes one row per correlation record.
pub fn write_correlation_csv<W: Write>(out: W, records: &[CorrelationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
    w.write_record(["n", "m", "estimate", "std_error", "ratio", "radius", "discarded_fraction"]).map_err(io)?;
    for r in records {
        w.write_record([
            r.n.to_string(),
            r.m.to_string(),
            r.estimate.to_string(),
            r.std_error.to_string(),
            r.ratio.to_string(),
            r.radius.to_string(),
            r.discarded_fraction.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    Ok(())
}

/// Writes `theta_index, k, N_k, S_over_N` rows.
pub fn write_lln_csv<W: Write>(out: W, report: &LlnReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
    w.write_record(["theta_index", "k", "N_k", "S_over_N"]).map_err(io)?;
    for (j, curve) in report.curves.iter().enumerate() {
        for (k, v) in curve.iter().enumerate() {
            w.write_record([j.to_string(), (k + 1).to_string(), report.n_k[k].to_string(), v.to_string()])
                .map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    Ok(())
}
