//! Empirical measures over orbit prefixes and their distance to Haar measure.
//!
//! An [`EmpiricalMeasure`] keeps exact running sums of a fixed dictionary of
//! test functions, so shards accumulated in parallel merge to exactly the
//! accumulator of the concatenated orbit. The weak-* discrepancy is the
//! largest deviation from frozen Haar reference values over the dictionary,
//! tracked along a geometric checkpoint grid.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::density::{upper_density, IndexSet};
use crate::error::{Error, Result};
use crate::exact::ExactSum;
use crate::group::GroupElement;
use crate::modular::{
    distance_to_identity, haar_sample, reduce_frame, FramePoint, TestFunction, DEFAULT_LOG2_TOLERANCE,
};
use crate::mp::Real;
use crate::orbit::{base_frame, default_precision, frame_at_time, TimeSequence};
use crate::rng::{seeded, shard};

/// Ratio of consecutive checkpoints.
pub const CHECKPOINT_RATIO: f64 = 1.15;

/// Width of the dictionary bumps.
pub const BUMP_WIDTH: f64 = 0.3;

/// Height cutoffs of the dictionary height profiles.
pub const HEIGHT_CUTOFFS: [f64; 4] = [2.0, 4.0, 8.0, 16.0];

/// Twelve bumps of width [`BUMP_WIDTH`] at pseudo-random points of height at
/// most 1.5, followed by the four height profiles of [`HEIGHT_CUTOFFS`].
pub fn default_dictionary(seed: u64) -> Vec<TestFunction> {
    let mut rng = seeded(seed);
    let mut dict = Vec::with_capacity(16);
    while dict.len() < 12 {
        let pt = haar_sample(&mut rng);
        if pt.y <= 1.5 {
            dict.push(TestFunction::bump(pt, BUMP_WIDTH));
        }
    }
    dict.extend(HEIGHT_CUTOFFS.iter().map(|&c| TestFunction::height_cutoff(c)));
    dict
}

/// Hex SHA-256 of the dictionary's JSON form.
pub fn dictionary_hash(dict: &[TestFunction]) -> String {
    let json = serde_json::to_vec(dict).expect("test functions serialize");
    format!("{:x}", Sha256::digest(json))
}

/// Running exact sums of dictionary functions over a finite point set.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMeasure {
    dictionary: Vec<TestFunction>,
    sums: Vec<ExactSum>,
    count: u64,
}

impl EmpiricalMeasure {
    pub fn new(dictionary: Vec<TestFunction>) -> Self {
        let sums = vec![ExactSum::zero(); dictionary.len()];
        EmpiricalMeasure {
            dictionary,
            sums,
            count: 0,
        }
    }

    pub fn dictionary(&self) -> &[TestFunction] {
        &self.dictionary
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn sums(&self) -> Vec<f64> {
        self.sums.iter().map(ExactSum::to_f64).collect()
    }

    pub fn accumulate(&mut self, pt: &FramePoint) {
        for (s, f) in self.sums.iter_mut().zip(&self.dictionary) {
            s.add_f64(f.eval(pt));
        }
        self.count += 1;
    }

    /// Adds precomputed dictionary values of one point.
    pub fn accumulate_values(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.sums.len() {
            return Err(Error::DictionaryMismatch {
                measure: self.sums.len(),
                reference: values.len(),
            });
        }
        for (s, v) in self.sums.iter_mut().zip(values) {
            s.add_f64(*v);
        }
        self.count += 1;
        Ok(())
    }

    pub fn merge(&self, other: &EmpiricalMeasure) -> Result<EmpiricalMeasure> {
        if self.dictionary != other.dictionary {
            return Err(Error::DictionaryMismatch {
                measure: self.dictionary.len(),
                reference: other.dictionary.len(),
            });
        }
        let mut out = self.clone();
        for (s, o) in out.sums.iter_mut().zip(&other.sums) {
            *s += o;
        }
        out.count += other.count;
        Ok(out)
    }

    /// `sums[i] / N`.
    pub fn averages(&self) -> Result<Vec<f64>> {
        if self.count == 0 {
            return Err(Error::EmptyMeasure);
        }
        Ok(self.sums.iter().map(|s| s.mean(self.count)).collect())
    }

    /// Keeps only the functions at `indices`.
    pub fn restrict(&self, indices: &[usize]) -> EmpiricalMeasure {
        EmpiricalMeasure {
            dictionary: indices.iter().map(|&i| self.dictionary[i].clone()).collect(),
            sums: indices.iter().map(|&i| self.sums[i].clone()).collect(),
            count: self.count,
        }
    }
}

/// Frozen Monte Carlo estimates of `∫ f dμ` for each dictionary function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HaarReference {
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub samples: usize,
}

impl HaarReference {
    /// Three times the largest standard error: deviations below this are
    /// indistinguishable from zero.
    pub fn noise_floor(&self) -> f64 {
        3.0 * self.std_errors.iter().copied().fold(0.0, f64::max)
    }

    pub fn restrict(&self, indices: &[usize]) -> HaarReference {
        HaarReference {
            values: indices.iter().map(|&i| self.values[i]).collect(),
            std_errors: indices.iter().map(|&i| self.std_errors[i]).collect(),
            samples: self.samples,
        }
    }
}

const REFERENCE_SHARDS: u64 = 16;

/// Haar reference values from `n_samples` shared Haar points, drawn in
/// parallel shards seeded from `seed`. Constants are exact.
pub fn haar_reference(dict: &[TestFunction], n_samples: usize, seed: u64) -> Result<HaarReference> {
    if n_samples < 100 {
        return Err(Error::InvalidArgument(format!("need at least 100 Haar samples, got {n_samples}")));
    }
    let per = n_samples.div_ceil(REFERENCE_SHARDS as usize);
    let partial: Vec<(Vec<ExactSum>, Vec<ExactSum>, usize)> = (0..REFERENCE_SHARDS)
        .into_par_iter()
        .map(|k| {
            let mut rng = shard(seed, k);
            let count = per.min(n_samples.saturating_sub(k as usize * per));
            let mut s = vec![ExactSum::zero(); dict.len()];
            let mut s2 = vec![ExactSum::zero(); dict.len()];
            for _ in 0..count {
                let pt = haar_sample(&mut rng);
                for (i, f) in dict.iter().enumerate() {
                    let v = f.eval(&pt);
                    s[i].add_f64(v);
                    s2[i].add_f64(v * v);
                }
            }
            (s, s2, count)
        })
        .collect();
    let n = n_samples as f64;
    let mut values = Vec::with_capacity(dict.len());
    let mut std_errors = Vec::with_capacity(dict.len());
    for (i, f) in dict.iter().enumerate() {
        if let TestFunction::Constant { value } = f {
            values.push(*value);
            std_errors.push(0.0);
            continue;
        }
        let mut s = ExactSum::zero();
        let mut s2 = ExactSum::zero();
        for (ps, ps2, _) in &partial {
            s += &ps[i];
            s2 += &ps2[i];
        }
        let mean = s.to_f64() / n;
        let var = (s2.to_f64() / n - mean * mean).max(0.0) * n / (n - 1.0);
        values.push(mean);
        std_errors.push((var / n).sqrt());
    }
    debug_assert_eq!(partial.iter().map(|p| p.2).sum::<usize>(), n_samples);
    Ok(HaarReference {
        values,
        std_errors,
        samples: n_samples,
    })
}

/// Signed deviations `sums[i]/N − haar[i]`.
pub fn deviations(measure: &EmpiricalMeasure, reference: &HaarReference) -> Result<Vec<f64>> {
    if measure.dictionary.len() != reference.values.len() {
        return Err(Error::DictionaryMismatch {
            measure: measure.dictionary.len(),
            reference: reference.values.len(),
        });
    }
    Ok(measure
        .averages()?
        .iter()
        .zip(&reference.values)
        .map(|(a, h)| a - h)
        .collect())
}

/// `max_i |sums[i]/N − haar[i]|`.
pub fn discrepancy(measure: &EmpiricalMeasure, reference: &HaarReference) -> Result<f64> {
    Ok(deviations(measure, reference)?
        .iter()
        .fold(0.0, |m, d| m.max(d.abs())))
}

/// Geometric checkpoints `1 = N_1 < N_2 < …` with `N_{k+1} = max(N_k + 1, ⌈1.15·N_k⌉)`,
/// ending exactly at `n_max`.
pub fn checkpoint_grid(n_max: u64) -> Vec<u64> {
    let mut grid = Vec::new();
    let mut n = 1u64;
    while n < n_max {
        grid.push(n);
        n = (n + 1).max((n as f64 * CHECKPOINT_RATIO).ceil() as u64);
    }
    if n_max > 0 {
        grid.push(n_max);
    }
    grid
}

/// Discrepancy `D_N` along the checkpoint grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancySeries {
    pub checkpoints: Vec<u64>,
    pub values: Vec<f64>,
    /// Signed per-function deviations at each checkpoint.
    pub deviations: Vec<Vec<f64>>,
    pub reference: HaarReference,
}

impl DiscrepancySeries {
    /// A series with given checkpoints and values and no per-function detail.
    pub fn from_values(checkpoints: Vec<u64>, values: Vec<f64>) -> Result<Self> {
        if checkpoints.len() != values.len() {
            return Err(Error::InvalidArgument("checkpoints and values differ in length".into()));
        }
        if checkpoints.windows(2).any(|w| w[0] >= w[1]) || checkpoints.first() == Some(&0) {
            return Err(Error::InvalidArgument("checkpoints must be positive and increasing".into()));
        }
        Ok(DiscrepancySeries {
            deviations: vec![Vec::new(); values.len()],
            checkpoints,
            values,
            reference: HaarReference {
                values: Vec::new(),
                std_errors: Vec::new(),
                samples: 0,
            },
        })
    }

    pub fn first(&self) -> Option<f64> {
        self.values.first().copied()
    }

    pub fn last(&self) -> Option<f64> {
        self.values.last().copied()
    }
}

/// Dictionary values per point, evaluated in parallel.
pub fn dictionary_values(points: &[FramePoint], dict: &[TestFunction]) -> Vec<Vec<f64>> {
    points
        .par_iter()
        .map(|pt| dict.iter().map(|f| f.eval(pt)).collect())
        .collect()
}

/// `D_N` of the empirical measures of `points[..N]` for `N` on the checkpoint grid.
pub fn discrepancy_series(
    points: &[FramePoint],
    dict: &[TestFunction],
    reference: &HaarReference,
) -> Result<DiscrepancySeries> {
    let rows = dictionary_values(points, dict);
    series_from_rows(rows.iter().map(|r| vec![r.as_slice()]), points.len(), dict, reference)
}

/// Builds the series where step `n` contributes every row in `groups[n]`.
fn series_from_rows<'a, I>(groups: I, n_max: usize, dict: &[TestFunction], reference: &HaarReference) -> Result<DiscrepancySeries>
where
    I: Iterator<Item = Vec<&'a [f64]>>,
{
    if dict.len() != reference.values.len() {
        return Err(Error::DictionaryMismatch {
            measure: dict.len(),
            reference: reference.values.len(),
        });
    }
    let grid = checkpoint_grid(n_max as u64);
    let mut measure = EmpiricalMeasure::new(dict.to_vec());
    let mut next = 0;
    let mut series = DiscrepancySeries {
        checkpoints: Vec::new(),
        values: Vec::new(),
        deviations: Vec::new(),
        reference: reference.clone(),
    };
    for (i, group) in groups.enumerate() {
        for row in group {
            measure.accumulate_values(row)?;
        }
        if next < grid.len() && (i + 1) as u64 == grid[next] {
            let dev = deviations(&measure, reference)?;
            series.checkpoints.push(grid[next]);
            series.values.push(dev.iter().fold(0.0, |m, d: &f64| m.max(d.abs())));
            series.deviations.push(dev);
            next += 1;
        }
    }
    if series.values.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    Ok(series)
}

/// Discrepancy of `(1/N) Σ_{n ≤ N} (u(t_n))_* μ_H` where `μ_H` is the law of
/// `k_θ g₀Γ` for uniform `θ`, approximated by `m_theta` uniform angles.
///
/// Each point is reduced at the default precision of its own time.
pub fn translated_measure_discrepancy(
    times: &TimeSequence,
    g0: &GroupElement,
    n: usize,
    m_theta: usize,
    dict: &[TestFunction],
    reference: &HaarReference,
    seed: u64,
) -> Result<DiscrepancySeries> {
    times.validate()?;
    if n == 0 || m_theta == 0 {
        return Err(Error::EmptyMeasure);
    }
    if let Some(max) = times.max_len() {
        if n > max {
            return Err(Error::InvalidArgument(format!("N = {n} exceeds the {max} available times")));
        }
    }
    let mut rng = seeded(seed);
    let thetas: Vec<f64> = (0..m_theta).map(|_| rng.gen::<f64>() * std::f64::consts::TAU).collect();
    let precisions: Vec<usize> = (1..=n).map(|k| default_precision(times, k)).collect();
    let times_mp: Vec<Real> = (1..=n)
        .map(|k| times.time(k, precisions[k - 1]))
        .collect::<Result<_>>()?;
    // rows[j][k] = dictionary values at u(t_{k+1}) k_{θ_j} g₀Γ
    let rows: Vec<Vec<Vec<f64>>> = thetas
        .par_iter()
        .map(|&theta| -> Result<Vec<Vec<f64>>> {
            let mut out = Vec::with_capacity(n);
            let mut base = base_frame(g0, theta, precisions[0])?;
            for k in 0..n {
                if base.precision() < precisions[k] {
                    base = base_frame(g0, theta, precisions[k])?;
                }
                let pt = reduce_frame(&frame_at_time(&base, &times_mp[k]), DEFAULT_LOG2_TOLERANCE)?;
                out.push(dict.iter().map(|f| f.eval(&pt)).collect());
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let groups = (0..n).map(|k| rows.iter().map(|r| r[k].as_slice()).collect::<Vec<_>>());
    series_from_rows(groups, n, dict, reference)
}

/// Estimated defect together with its Monte Carlo standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectEstimate {
    pub defect: f64,
    pub std_error: f64,
}

/// `|(1/N)Σ f(pt_n) − (1/N)Σ f(u(s)·pt_n)|` with its standard error across points.
pub fn unipotent_defect_estimate(points: &[FramePoint], f: &TestFunction, s: f64) -> Result<DefectEstimate> {
    if points.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    if s == 0.0 {
        return Ok(DefectEstimate {
            defect: 0.0,
            std_error: 0.0,
        });
    }
    let u = GroupElement::unipotent(&Real::from_f64(s, 128));
    let diffs: Vec<f64> = points
        .par_iter()
        .map(|pt| Ok(f.eval(pt) - f.eval(&pt.translate(&u)?)))
        .collect::<Result<_>>()?;
    let n = diffs.len() as f64;
    let mut total = ExactSum::zero();
    for d in &diffs {
        total.add_f64(*d);
    }
    let mean = total.to_f64() / n;
    let var = if diffs.len() > 1 {
        diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(DefectEstimate {
        defect: mean.abs(),
        std_error: (var / n).sqrt(),
    })
}

/// `|(1/N)Σ f(pt_n) − (1/N)Σ f(u(s)·pt_n)|`.
pub fn unipotent_defect(points: &[FramePoint], f: &TestFunction, s: f64) -> Result<f64> {
    Ok(unipotent_defect_estimate(points, f, s)?.defect)
}

/// Frame displacement of `u(s)`: every point moves by exactly this much, so
/// `unipotent_defect(·, f, s) ≤ f.lipschitz() · unipotent_displacement(s)`.
pub fn unipotent_displacement(s: f64) -> f64 {
    distance_to_identity(&[1.0, s, 0.0, 1.0])
}

/// Good checkpoints and their densities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityExtraction {
    /// Checkpoints `N` with `D_N ≤ ε`; horizon is the last checkpoint.
    pub set: IndexSet,
    /// Windowed upper density counted along the checkpoint index.
    pub grid_density: f64,
    /// Windowed upper density of the integer set in which every `N` inherits
    /// the status of the last checkpoint at or below it.
    pub integer_density: f64,
}

/// `A_ε = {N on the grid : D_N ≤ ε}` with its windowed upper densities.
pub fn density_one_extraction(series: &DiscrepancySeries, epsilon: f64, burn_in_fraction: f64) -> Result<DensityExtraction> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    let Some(&horizon) = series.checkpoints.last() else {
        return Err(Error::EmptyHorizon);
    };
    let good: Vec<bool> = series.values.iter().map(|&d| d <= epsilon).collect();
    let set = IndexSet::new(
        series
            .checkpoints
            .iter()
            .zip(&good)
            .filter(|(_, &g)| g)
            .map(|(&n, _)| n)
            .collect(),
        horizon,
    )?;
    let by_index = IndexSet::from_predicate(good.len() as u64, |k| good[(k - 1) as usize]);
    let grid_density = upper_density(&by_index, burn_in_fraction)?;
    let cps = &series.checkpoints;
    let expanded = IndexSet::from_predicate(horizon, |n| {
        let k = cps.partition_point(|&c| c <= n);
        k > 0 && good[k - 1]
    });
    let integer_density = upper_density(&expanded, burn_in_fraction)?;
    Ok(DensityExtraction {
        set,
        grid_density,
        integer_density,
    })
}

/// Writes `N, D_N, dev_0, …` rows.
pub fn write_discrepancy_csv<W: Write>(out: W, series: &DiscrepancySeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
    let width = series.deviations.first().map_or(0, Vec::len);
    let mut header = vec!["N".to_string(), "D_N".to_string()];
    header.extend((0..width).map(|i| format!("dev_{i}")));
    w.write_record(&header).map_err(io)?;
    for ((n, d), dev) in series.checkpoints.iter().zip(&series.values).zip(&series.deviations) {
        let mut row = vec![n.to_string(), d.to_string()];
        row.extend(dev.iter().map(f64::to_string));
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    Ok(())
}
