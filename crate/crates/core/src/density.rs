//! Integer-set densities and the maximal inequalities behind them.
//!
//! * [`IndexSet`] and [`upper_density`]: finite-horizon surrogate for the
//!   upper density `limsup #(A∩[1,N])/N`, a maximum over a late window.
//! * [`shift_maximal_check`]: the shift maximal inequality on `ℓ¹(Z)`,
//!   `α·|{a : φ*(a) > α}| ≤ 3‖φ‖₁`, computed exactly.
//! * [`maximal_inequality_check`]: the weak-type bound
//!   `αβ·ν(E) ≤ 12‖ψ‖_{L¹(μ)}` for the best window offset `j`.
//! * [`merge_subsequences`]: the diagonal construction gluing density-one
//!   subsequences block by block.
//!
//! Indices are 1-based throughout.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::exact::ExactSum;

/// Sorted set of distinct positive integers below a horizon.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexSet {
    members: Vec<u64>,
    horizon: u64,
}

impl IndexSet {
    /// Sorts and deduplicates `members`; every member must lie in `[1, horizon]`.
    pub fn new(mut members: Vec<u64>, horizon: u64) -> Result<Self> {
        members.sort_unstable();
        members.dedup();
        if members.first() == Some(&0) {
            return Err(Error::InvalidArgument("index sets hold positive integers".into()));
        }
        if members.last().is_some_and(|&m| m > horizon) {
            return Err(Error::InvalidArgument(format!("member exceeds horizon {horizon}")));
        }
        Ok(IndexSet { members, horizon })
    }

    pub fn from_predicate(horizon: u64, keep: impl Fn(u64) -> bool) -> Self {
        IndexSet {
            members: (1..=horizon).filter(|&n| keep(n)).collect(),
            horizon,
        }
    }

    pub fn full(horizon: u64) -> Self {
        Self::from_predicate(horizon, |_| true)
    }

    pub fn members(&self) -> &[u64] {
        &self.members
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, n: u64) -> bool {
        self.members.binary_search(&n).is_ok()
    }

    /// `#(A ∩ [1, n])`.
    pub fn count_up_to(&self, n: u64) -> usize {
        self.members.partition_point(|&m| m <= n)
    }

    /// `#(A ∩ [1, n]) / n`.
    pub fn density_at(&self, n: u64) -> f64 {
        if n == 0 {
            return 0.0;
        }
        self.count_up_to(n) as f64 / n as f64
    }

    /// Maximal runs `[lo, hi]` of consecutive members.
    pub fn intervals(&self) -> Vec<(u64, u64)> {
        let mut out: Vec<(u64, u64)> = Vec::new();
        for &m in &self.members {
            match out.last_mut() {
                Some((_, hi)) if *hi + 1 == m => *hi = m,
                _ => out.push((m, m)),
            }
        }
        out
    }

    pub fn from_intervals(intervals: &[(u64, u64)], horizon: u64) -> Result<Self> {
        let mut members = Vec::new();
        for &(lo, hi) in intervals {
            if lo > hi {
                return Err(Error::InvalidArgument(format!("empty interval [{lo}, {hi}]")));
            }
            members.extend(lo..=hi);
        }
        Self::new(members, horizon)
    }

    /// `self ∩ [lo, hi]`.
    pub fn restrict(&self, lo: u64, hi: u64) -> Vec<u64> {
        let a = self.members.partition_point(|&m| m < lo);
        let b = self.members.partition_point(|&m| m <= hi);
        self.members[a..b].to_vec()
    }
}

#[derive(Serialize, Deserialize)]
struct IntervalForm {
    horizon: u64,
    intervals: Vec<(u64, u64)>,
}

impl Serialize for IndexSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        IntervalForm {
            horizon: self.horizon,
            intervals: self.intervals(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for IndexSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let f = IntervalForm::deserialize(d)?;
        IndexSet::from_intervals(&f.intervals, f.horizon).map_err(serde::de::Error::custom)
    }
}

/// `max #(A∩[1,N])/N` over `N ∈ [⌈burn_in·H⌉, H]`, `H` the horizon.
pub fn upper_density(a: &IndexSet, burn_in_fraction: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&burn_in_fraction) {
        return Err(Error::InvalidArgument(format!("burn-in fraction must lie in [0, 1), got {burn_in_fraction}")));
    }
    if a.horizon == 0 {
        return Err(Error::EmptyHorizon);
    }
    let start = ((burn_in_fraction * a.horizon as f64).ceil() as u64).max(1);
    // The ratio only rises at members, so the window start and the members
    // inside the window are the only candidates.
    let mut best = a.density_at(start);
    let first = a.members.partition_point(|&m| m < start);
    for (i, &m) in a.members.iter().enumerate().skip(first) {
        best = best.max((i + 1) as f64 / m as f64);
    }
    Ok(best)
}

/// Finitely supported signal on `Z`: `values[i]` sits at `start + i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteSignal {
    pub start: i64,
    pub values: Vec<f64>,
}

impl FiniteSignal {
    pub fn new(start: i64, values: Vec<f64>) -> Self {
        FiniteSignal { start, values }
    }

    pub fn l1_exact(&self) -> ExactSum {
        let mut s = ExactSum::zero();
        for v in &self.values {
            s.add_f64(v.abs());
        }
        s
    }

    pub fn l1(&self) -> f64 {
        self.l1_exact().to_f64()
    }

    /// Random signal with support length in `1..=max_support` and values in `[-1, 1]`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, max_support: usize) -> Self {
        let len = rng.gen_range(1..=max_support);
        let start = rng.gen_range(-100..100);
        FiniteSignal {
            start,
            values: (0..len).map(|_| rng.gen_range(-1.0..=1.0)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftMaximalReport {
    pub alpha: f64,
    /// `E_α = {a : φ*(a) > α}`, ascending.
    pub exceedance: Vec<i64>,
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

/// Exact check of `α·|E_α| ≤ 3‖φ‖₁` with `φ*(a) = sup_N |(1/N) Σ_{i<N} φ(a+i)|`.
///
/// Only finitely many windows matter: a window starting at `a` and ending
/// past the support has constant sum, so its average is largest when it ends
/// exactly at the support's right edge; left of the support, averages are at
/// most `‖φ‖₁/(s-a+1)`, which bounds the range of `a` to scan.
pub fn shift_maximal_check(phi: &FiniteSignal, alpha: f64) -> Result<ShiftMaximalReport> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
    }
    let l1 = phi.l1_exact();
    let rhs_exact = l1.scale(3);
    let rhs = rhs_exact.to_f64();
    let s = phi.start;
    let e = phi.start + phi.values.len() as i64 - 1;
    if phi.values.is_empty() || l1.is_zero() {
        return Ok(ShiftMaximalReport {
            alpha,
            exceedance: Vec::new(),
            lhs: 0.0,
            rhs,
            ok: true,
        });
    }
    // prefix[k] = Σ_{i<k} values[i], exactly and in f64
    let mut prefix = vec![ExactSum::zero()];
    for v in &phi.values {
        let mut next = prefix.last().unwrap().clone();
        next.add_f64(*v);
        prefix.push(next);
    }
    let prefix_f: Vec<f64> = prefix.iter().map(ExactSum::to_f64).collect();
    let scale = l1.to_f64();
    let alpha_exact = ExactSum::from_f64(alpha);
    let exceeds = |lo: usize, hi: usize, n: i64| -> bool {
        // |Σ values[lo..hi]| > α n, screened in f64 and settled exactly near ties
        let approx = (prefix_f[hi] - prefix_f[lo]).abs();
        let target = alpha * n as f64;
        let slack = 1e-12 * (scale + target);
        if approx > target + slack {
            true
        } else if approx < target - slack {
            false
        } else {
            (&prefix[hi] - &prefix[lo]).abs() > alpha_exact.scale(n)
        }
    };
    let a_min = (s as f64 - scale / alpha - 2.0).floor() as i64;
    let mut exceedance = Vec::new();
    for a in a_min..=e {
        // window [a, a+N-1] ∩ [s, e] = indices lo..hi into values
        let n_lo = (s - a + 1).max(1);
        let n_hi = e - a + 1;
        let hit = (n_lo..=n_hi).any(|n| {
            let lo = (a.max(s) - s) as usize;
            let hi = ((a + n - 1).min(e) - s + 1) as usize;
            exceeds(lo, hi, n)
        });
        if hit {
            exceedance.push(a);
        }
    }
    let count = exceedance.len() as i64;
    let ok = alpha_exact.scale(count) <= rhs_exact;
    Ok(ShiftMaximalReport {
        alpha,
        lhs: alpha * count as f64,
        rhs,
        ok,
        exceedance,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaximalReport {
    /// Offset `j ∈ [0, βN)` minimizing the exceedance mass.
    pub j_n: usize,
    /// Empirical `ν(E^ψ_{α,N,j_N})`.
    pub nu_e: f64,
    /// `12·‖ψ‖₁ / (αβ)`.
    pub bound: f64,
    /// `3/√samples`, the sampling allowance added to the bound.
    pub sampling_allowance: f64,
    pub ok: bool,
    /// Exceedance mass for every offset.
    pub masses: Vec<f64>,
}

fn check_maximal_args(values: &[Vec<f64>], alpha: f64, beta: f64, n: usize) -> Result<usize> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidArgument(format!("beta must lie in (0, 1), got {beta}")));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("N must be positive".into()));
    }
    if values.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let offsets = (beta * n as f64).ceil() as usize;
    let needed = offsets + n;
    if let Some(short) = values.iter().find(|v| v.len() < needed) {
        return Err(Error::InsufficientLength { needed, got: short.len() });
    }
    Ok(offsets)
}

/// For each offset `j ∈ [0, βN)`, the samples whose running averages
/// `(1/M)Σ_{k=j}^{j+M-1} ψ(T_k x)`, `1 ≤ M ≤ N`, ever exceed `α` in absolute value.
pub fn exceedance_sets(values: &[Vec<f64>], alpha: f64, beta: f64, n: usize) -> Result<Vec<Vec<usize>>> {
    let offsets = check_maximal_args(values, alpha, beta, n)?;
    let flags: Vec<Vec<bool>> = values
        .par_iter()
        .map(|row| {
            (0..offsets)
                .map(|j| {
                    let mut sum = 0.0;
                    (1..=n).any(|m| {
                        sum += row[j + m - 1];
                        (sum / m as f64).abs() > alpha
                    })
                })
                .collect()
        })
        .collect();
    Ok((0..offsets)
        .map(|j| (0..values.len()).filter(|&i| flags[i][j]).collect())
        .collect())
}

/// Verifies `ν(E^ψ_{α,N,j_N}) ≤ 12‖ψ‖₁/(αβ)` up to the sampling allowance
/// `3/√samples`, with `ν` the empirical measure of the samples.
pub fn maximal_inequality_check(
    values: &[Vec<f64>],
    alpha: f64,
    beta: f64,
    n: usize,
    psi_l1: f64,
) -> Result<MaximalReport> {
    let sets = exceedance_sets(values, alpha, beta, n)?;
    let samples = values.len() as f64;
    let masses: Vec<f64> = sets.iter().map(|s| s.len() as f64 / samples).collect();
    let (j_n, nu_e) = masses
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (j, m)| if m < best.1 { (j, m) } else { best });
    let bound = 12.0 * psi_l1 / (alpha * beta);
    let sampling_allowance = 3.0 / samples.sqrt();
    Ok(MaximalReport {
        j_n,
        nu_e,
        bound,
        sampling_allowance,
        ok: nu_e <= bound + sampling_allowance,
        masses,
    })
}

/// Orbit values `ψ(T^k x)`, `k < len`, of the doubling map `T x = 2x mod 1`
/// from uniform random starts, computed exactly: each start is a random bit
/// string and `T^k x` is read off from bits `k..k+64`.
pub fn doubling_map_values<R: Rng + ?Sized>(
    psi: impl Fn(f64) -> f64 + Sync,
    n_samples: usize,
    len: usize,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let words = len / 64 + 2;
    let starts: Vec<Vec<u64>> = (0..n_samples).map(|_| (0..words).map(|_| rng.gen()).collect()).collect();
    starts
        .par_iter()
        .map(|bits| {
            (0..len)
                .map(|k| {
                    let (w, o) = (k / 64, k % 64);
                    let hi = bits[w] << o;
                    let lo = if o == 0 { 0 } else { bits[w + 1] >> (64 - o) };
                    let top = hi | lo;
                    psi((top >> 11) as f64 * 2f64.powi(-53))
                })
                .collect()
        })
        .collect()
}

/// `∫₀¹ f` by composite Simpson with `2m` panels.
pub fn integrate_unit_interval(f: impl Fn(f64) -> f64, m: usize) -> f64 {
    let n = 2 * m.max(1);
    let h = 1.0 / n as f64;
    let mut s = f(0.0) + f(1.0);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(i as f64 * h);
    }
    s * h / 3.0
}

/// One member of a family to merge: a good set, its quality and the index
/// from which it is valid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyMember {
    pub set: IndexSet,
    pub epsilon: f64,
    pub threshold: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergeBlock {
    pub j: usize,
    pub m_j: u64,
    pub m_next: u64,
    /// `1 - upper_density(A_j)`, the deficit the block target allows.
    pub delta_j: f64,
    /// Density of the merged set at `m_next`.
    pub block_density: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergeReport {
    pub merged: IndexSet,
    pub blocks: Vec<MergeBlock>,
    /// False when the horizon ran out before every member was used.
    pub complete: bool,
}

/// Glues the family into one set, `∪_j A_j ∩ [M_j, M_{j+1}]`.
///
/// `M_1 = N_1`; `M_{j+1}` is the least `M ≥ max(j·M_j, N_{j+1})` where
/// `#(A_j∩[1,M])/M ≥ 1 - δ_j - 1/j`, with `δ_j = 1 - upper_density(A_j, 1/2)`.
/// The ratio condition `M_j/M_{j+1} ≤ 1/j` then bounds the loss from earlier
/// blocks, so the merged density at `M_{j+1}` is at least `1 - δ_j - 2/j`.
pub fn merge_subsequences(family: &[FamilyMember]) -> Result<MergeReport> {
    if family.is_empty() {
        return Err(Error::InvalidArgument("empty family".into()));
    }
    if family.windows(2).any(|w| w[1].epsilon > w[0].epsilon) {
        return Err(Error::InvalidArgument("qualities epsilon_j must be nonincreasing".into()));
    }
    let mut members = Vec::new();
    let mut blocks = Vec::new();
    let mut m_j = family[0].threshold.max(1);
    let mut complete = true;
    for (idx, member) in family.iter().enumerate() {
        let j = idx + 1;
        let a = &member.set;
        let delta = 1.0 - upper_density(a, 0.5)?;
        let next_threshold = family.get(idx + 1).map_or(0, |f| f.threshold);
        let floor = (j as u64 * m_j).max(next_threshold).max(m_j + 1);
        let target = 1.0 - delta - 1.0 / j as f64;
        let found = (floor..=a.horizon()).find(|&m| a.density_at(m) >= target - 1e-12);
        let Some(m_next) = found else {
            complete = false;
            break;
        };
        members.extend(a.restrict(m_j, m_next));
        let merged_so_far = IndexSet::new(members.clone(), m_next)?;
        blocks.push(MergeBlock {
            j,
            m_j,
            m_next,
            delta_j: delta,
            block_density: merged_so_far.density_at(m_next),
        });
        m_j = m_next;
    }
    let horizon = blocks.last().map_or(m_j, |b| b.m_next);
    Ok(MergeReport {
        merged: IndexSet::new(members, horizon)?,
        blocks,
        complete,
    })
}

/// Writes `j, M_j, M_next, block_density` rows.
pub fn write_merge_csv<W: Write>(out: W, report: &MergeReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
    w.write_record(["j", "M_j", "M_next", "block_density"]).map_err(io)?;
    for b in &report.blocks {
        w.write_record([b.j.to_string(), b.m_j.to_string(), b.m_next.to_string(), b.block_density.to_string()])
            .map_err(io)?;
    }
    w.flush().map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    Ok(())
}

/// `(1/n) Σ_{i<n} values[start + i]`.
pub fn average(values: &[f64], start: usize, n: usize) -> f64 {
    values[start..start + n].iter().sum::<f64>() / n as f64
}

/// `A_N(A_M ψ)` at offset 0: `(1/N) Σ_{n<N} (1/M) Σ_{i<M} ψ_{n+i}`.
pub fn average_of_average(values: &[f64], n: usize, m: usize) -> f64 {
    (0..n).map(|k| average(values, k, m)).sum::<f64>() / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn upper_density_examples() {
        let evens = IndexSet::from_predicate(10_000, |n| n % 2 == 0);
        assert!((upper_density(&evens, 0.1).unwrap() - 0.5).abs() < 1e-3);
        assert_eq!(upper_density(&IndexSet::full(777), 0.1).unwrap(), 1.0);
        assert!(matches!(upper_density(&IndexSet::new(vec![], 0).unwrap(), 0.1), Err(Error::EmptyHorizon)));
        assert!(upper_density(&evens, 1.0).is_err());
    }

    #[test]
    fn dyadic_blocks_density() {
        // n in [2^j, 2^{j+1}) for even j
        let a = IndexSet::from_predicate(1 << 20, |n| (63 - n.leading_zeros()) % 2 == 0);
        let d = upper_density(&a, 0.1).unwrap();
        assert!(d >= 2.0 / 3.0, "{d}");
        // Brute force over the window.
        let start = ((0.1 * (1u64 << 20) as f64).ceil()) as u64;
        let brute = (start..=1 << 20).map(|n| a.density_at(n)).fold(0.0, f64::max);
        assert_eq!(d, brute);
    }

    #[test]
    fn shift_maximal_examples() {
        let r = shift_maximal_check(&FiniteSignal::new(0, vec![1.0]), 0.4).unwrap();
        assert_eq!(r.exceedance, vec![-1, 0]);
        assert!((r.lhs - 0.8).abs() < 1e-15);
        assert_eq!(r.rhs, 3.0);
        assert!(r.ok);

        let r = shift_maximal_check(&FiniteSignal::new(5, vec![0.0; 7]), 0.1).unwrap();
        assert!(r.exceedance.is_empty());
        assert_eq!(r.lhs, 0.0);
    }

    fn brute_phi_star(phi: &FiniteSignal, a: i64) -> f64 {
        let at = |i: i64| -> f64 {
            let k = i - phi.start;
            if k >= 0 && (k as usize) < phi.values.len() {
                phi.values[k as usize]
            } else {
                0.0
            }
        };
        let mut best = 0.0f64;
        let mut sum = 0.0;
        for n in 1..=2000 {
            sum += at(a + n - 1);
            best = best.max((sum / n as f64).abs());
        }
        best
    }

    #[test]
    fn shift_maximal_matches_brute_force() {
        let mut rng = seeded(4);
        for _ in 0..40 {
            let phi = FiniteSignal::random(&mut rng, 12);
            let alpha = rng.gen_range(0.05..1.0);
            let r = shift_maximal_check(&phi, alpha).unwrap();
            let lo = phi.start - 400;
            let hi = phi.start + phi.values.len() as i64 + 5;
            let brute: Vec<i64> = (lo..=hi).filter(|&a| brute_phi_star(&phi, a) > alpha).collect();
            assert_eq!(r.exceedance, brute);
        }
    }

    #[test]
    fn maximal_inequality_trivial_and_errors() {
        let zeros = vec![vec![0.0; 200]; 10];
        let r = maximal_inequality_check(&zeros, 0.5, 0.25, 100, 0.0).unwrap();
        assert!(r.ok && r.nu_e == 0.0);
        assert!(matches!(
            maximal_inequality_check(&zeros, 0.5, 0.25, 180, 0.0),
            Err(Error::InsufficientLength { .. })
        ));
        assert!(maximal_inequality_check(&zeros, 0.5, 1.5, 10, 0.0).is_err());
    }

    #[test]
    fn doubling_map_is_exact() {
        let mut rng = seeded(8);
        let vals = doubling_map_values(|x| x, 3, 200, &mut rng);
        for row in &vals {
            for k in 0..199 {
                let next = (2.0 * row[k]).fract();
                // x_{k+1} = 2 x_k mod 1 up to the 53-bit window
                assert!((row[k + 1] - next).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn doubling_map_weak_type() {
        let psi = |x: f64| crate::modular::bump_profile((x - 0.5) / 0.25);
        let l1 = integrate_unit_interval(psi, 2000);
        let mut rng = seeded(12);
        let vals = doubling_map_values(psi, 1000, 512 + 128, &mut rng);
        let r = maximal_inequality_check(&vals, 0.5, 0.25, 512, l1).unwrap();
        assert!(r.ok, "{r:?}");
        assert_eq!(r.masses.len(), 128);
    }

    #[test]
    fn simpson_integrates_cubics_exactly() {
        assert!((integrate_unit_interval(|x| x * x * x, 4) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn merge_full_sets() {
        let family: Vec<_> = (1..=6)
            .map(|j| FamilyMember {
                set: IndexSet::full(100_000),
                epsilon: 1.0 / j as f64,
                threshold: 10,
            })
            .collect();
        let r = merge_subsequences(&family).unwrap();
        assert!(r.complete);
        let h = r.merged.horizon();
        // Everything from M_1 on is present.
        assert_eq!(r.merged.len() as u64, h - 10 + 1);
        assert!(r.blocks.iter().all(|b| b.m_next >= b.j as u64 * b.m_j));
    }

    #[test]
    fn merge_complements_of_initial_segments() {
        let family: Vec<_> = (1..=8)
            .map(|j| FamilyMember {
                set: IndexSet::from_predicate(1_000_000, move |n| n > j),
                epsilon: 1.0 / j as f64,
                threshold: 1,
            })
            .collect();
        let r = merge_subsequences(&family).unwrap();
        let last = r.blocks.last().unwrap();
        assert!(last.block_density > 0.99);
    }

    fn dyadic_hole_family(levels: usize, horizon: u64) -> Vec<FamilyMember> {
        (1..=levels)
            .map(|j| {
                let set = IndexSet::from_predicate(horizon, move |n| {
                    let k = 63 - n.leading_zeros();
                    let hole = (1u64 << k) >> j;
                    n - (1u64 << k) >= hole
                });
                FamilyMember {
                    set,
                    epsilon: 2f64.powi(-(j as i32)),
                    threshold: 1 << j,
                }
            })
            .collect()
    }

    #[test]
    fn merge_dyadic_family_meets_block_bound() {
        let r = merge_subsequences(&dyadic_hole_family(8, 1 << 22)).unwrap();
        for b in &r.blocks {
            let j = b.j as f64;
            let direct = r.merged.density_at(b.m_next);
            assert_eq!(direct, b.block_density);
            assert!(direct >= 1.0 - b.delta_j - 3.0 / j, "{b:?}");
            assert!(direct >= 1.0 - 2f64.powf(-j) - 3.0 / j - 1e-12, "{b:?}");
        }
    }

    #[test]
    fn merge_reports_partial_when_horizon_runs_out() {
        let r = merge_subsequences(&dyadic_hole_family(12, 1 << 12)).unwrap();
        assert!(!r.complete);
        assert!(!r.blocks.is_empty());
    }

    #[test]
    fn index_set_json_is_run_length_encoded() {
        let a = IndexSet::new(vec![1, 2, 3, 7, 9, 10], 12).unwrap();
        let v = serde_json::to_value(&a).unwrap();
        assert_eq!(v, serde_json::json!({"horizon": 12, "intervals": [[1, 3], [7, 7], [9, 10]]}));
        let back: IndexSet = serde_json::from_value(v).unwrap();
        assert_eq!(back, a);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn shift_maximal_always_holds(
            start in -50i64..50,
            values in prop::collection::vec(-1.0f64..1.0, 1..50),
            alpha in 0.01f64..2.0,
        ) {
            let r = shift_maximal_check(&FiniteSignal::new(start, values), alpha).unwrap();
            prop_assert!(r.ok);
        }

        #[test]
        fn exceedance_sets_shrink_with_alpha(seed in 0u64..1000, a1 in 0.05f64..1.0, bump in 0.0f64..1.0) {
            let mut rng = seeded(seed);
            let vals: Vec<Vec<f64>> = (0..20).map(|_| (0..60).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let small = exceedance_sets(&vals, a1, 0.3, 40).unwrap();
            let large = exceedance_sets(&vals, a1 + bump, 0.3, 40).unwrap();
            for (s, l) in small.iter().zip(&large) {
                prop_assert!(l.iter().all(|i| s.contains(i)));
            }
        }

        #[test]
        fn average_of_average_identity(
            values in prop::collection::vec(-5.0f64..5.0, 120..200),
            n in 1usize..60,
            m in 1usize..60,
        ) {
            let sup = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let lhs = average_of_average(&values, n, m);
            let rhs = average(&values, 0, n);
            prop_assert!((lhs - rhs).abs() <= 2.0 * m as f64 * sup / n as f64 + 1e-12);
        }

        #[test]
        fn upper_density_matches_brute_force(bits in prop::collection::vec(any::<bool>(), 1..300), burn in 0.0f64..0.9) {
            let h = bits.len() as u64;
            let a = IndexSet::from_predicate(h, |n| bits[(n - 1) as usize]);
            let start = ((burn * h as f64).ceil() as u64).max(1);
            let brute = (start..=h).map(|n| a.density_at(n)).fold(0.0, f64::max);
            prop_assert_eq!(upper_density(&a, burn).unwrap(), brute);
        }
    }
}
