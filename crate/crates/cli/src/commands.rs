//! Experiment runners. Each returns its output files in memory; the caller
//! writes them after every shard has finished.

use std::f64::consts::TAU;

use horolab::density::{
    doubling_map_values, integrate_unit_interval, maximal_inequality_check, merge_subsequences, shift_maximal_check,
    write_merge_csv, FamilyMember, FiniteSignal, IndexSet,
};
use horolab::group::{AlgebraElement, GroupElement};
use horolab::measure::{
    default_dictionary, density_one_extraction, dictionary_hash, discrepancy_series, haar_reference,
    translated_measure_discrepancy, write_discrepancy_csv,
};
use horolab::modular::{bump_profile, reduce_frame, DEFAULT_LOG2_TOLERANCE};
use horolab::mp::Real;
use horolab::orbit::{base_frame, frame_at_time, mu_h_sampler, orbit_prefix, write_orbit_csv, OrbitSpec, PrecisionPolicy};
use horolab::ratner::{
    appendix_vn, ball_overlap_ratio, correlation_decay_experiment, default_observable, example_theta_limit, fit_decay,
    jm_conjugation, lln_experiment, theta_limit_errors, theta_panel, write_correlation_csv, write_lln_csv,
    write_trajectory_csv, VnSchedule,
};
use horolab::rng::seeded;
use horolab::sl2::{d_h_compute, d_of_vector, decompose_adjoint, jacobson_morozov, minimal_nilpotent, regular_nilpotent, RatMatrix};
use horolab::Error;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::*;

/// Exit-code classes.
#[derive(Debug)]
pub enum CliError {
    /// Exit 2.
    Config(String),
    /// Exit 3.
    Precision(String),
    /// Exit 1.
    Other(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Precision(_) => 3,
            CliError::Other(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Precision(m) => write!(f, "precision exhausted: {m}"),
            CliError::Other(m) => write!(f, "{m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::PrecisionExhausted { .. } => CliError::Precision(e.to_string()),
            Error::InvalidArgument(_)
            | Error::DimensionMismatch { .. }
            | Error::NotUnimodular { .. }
            | Error::NotTraceFree { .. }
            | Error::NotNilpotent
            | Error::ZeroNilpotent
            | Error::EmptyBasis
            | Error::EmptyMeasure
            | Error::EmptyHorizon
            | Error::InsufficientLength { .. }
            | Error::TimesTooSmall { .. }
            | Error::Saturated { .. }
            | Error::Centralized
            | Error::BoundedSequence { .. } => CliError::Config(e.to_string()),
            _ => CliError::Other(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Files produced by a run, a few derived facts for the manifest, and the
/// witness of a verifier failure if there was one.
#[derive(Default)]
pub struct RunOutput {
    pub files: Vec<(String, Vec<u8>)>,
    pub derived: Map<String, Value>,
    pub violation: Option<Value>,
}

impl RunOutput {
    fn csv(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> horolab::Result<()>) -> CliResult<()> {
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.files.push((name.to_string(), buf));
        Ok(())
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> CliResult<()> {
        let mut buf = serde_json::to_vec_pretty(value).map_err(|e| CliError::Other(e.to_string()))?;
        buf.push(b'\n');
        self.files.push((name.to_string(), buf));
        Ok(())
    }
}

fn base_element(base: Option<[f64; 4]>) -> CliResult<GroupElement> {
    match base {
        None => Ok(GroupElement::identity(2, 64)),
        Some([a, b, c, d]) => Ok(GroupElement::from_f64_2x2(a, b, c, d, 128)?),
    }
}

fn policy(bits: Option<usize>) -> PrecisionPolicy {
    bits.map_or(PrecisionPolicy::Default, |bits| PrecisionPolicy::Fixed { bits })
}

/// The angle stream is `seeded(seed)`; the Haar reference uses `seed + 1`.
fn theta_or_draw(theta: Option<f64>, seed: u64) -> f64 {
    theta.unwrap_or_else(|| mu_h_sampler(&mut seeded(seed)))
}

pub fn run(exp: &Experiment) -> CliResult<RunOutput> {
    match exp {
        Experiment::Orbit(c) => orbit(c),
        Experiment::Discrepancy(c) => discrepancy(c),
        Experiment::Translated(c) => translated(c),
        Experiment::Maximal(c) => maximal(c),
        Experiment::ShiftMaximal(c) => shift_maximal(c),
        Experiment::Merge(c) => merge(c),
        Experiment::Conjugate(c) => conjugate(c),
        Experiment::Correlations(c) => correlations(c),
        Experiment::Lln(c) => lln(c),
        Experiment::Jm(c) => jm(c),
        Experiment::BallOverlap(c) => ball_overlap(c),
    }
}

fn orbit(c: &OrbitConfig) -> CliResult<RunOutput> {
    let theta = theta_or_draw(c.theta, c.seed);
    let spec = OrbitSpec::new(c.times.clone(), theta, c.n)
        .with_base(base_element(c.base)?)
        .with_policy(policy(c.precision_bits));
    let points = orbit_prefix(&spec, c.n)?;
    let mut out = RunOutput::default();
    out.csv("orbit.csv", |w| write_orbit_csv(w, &c.times, &points))?;
    out.derived.insert("theta".into(), json!(theta));
    out.derived.insert("precision_bits".into(), json!(spec.precision(c.n)));
    Ok(out)
}

fn discrepancy(c: &DiscrepancyConfig) -> CliResult<RunOutput> {
    let theta = theta_or_draw(c.theta, c.seed);
    let dict = default_dictionary(c.dictionary_seed);
    let reference = haar_reference(&dict, c.reference_samples, c.seed.wrapping_add(1))?;
    let spec = OrbitSpec::new(c.times.clone(), theta, c.n).with_policy(policy(c.precision_bits));
    let points = orbit_prefix(&spec, c.n)?;
    let series = discrepancy_series(&points, &dict, &reference)?;
    let extraction = density_one_extraction(&series, c.epsilon, c.burn_in)?;
    let mut out = RunOutput::default();
    out.csv("discrepancy.csv", |w| write_discrepancy_csv(w, &series))?;
    out.json(
        "extraction.json",
        &json!({
            "epsilon": c.epsilon,
            "burn_in": c.burn_in,
            "good_checkpoints": extraction.set.members(),
            "horizon": extraction.set.horizon(),
            "grid_density": extraction.grid_density,
            "integer_density": extraction.integer_density,
            "noise_floor": reference.noise_floor(),
        }),
    )?;
    out.derived.insert("theta".into(), json!(theta));
    out.derived.insert("dictionary_hash".into(), json!(dictionary_hash(&dict)));
    Ok(out)
}

fn translated(c: &TranslatedConfig) -> CliResult<RunOutput> {
    let dict = default_dictionary(c.dictionary_seed);
    let reference = haar_reference(&dict, c.reference_samples, c.seed.wrapping_add(1))?;
    let series = translated_measure_discrepancy(&c.times, &base_element(c.base)?, c.n, c.m_theta, &dict, &reference, c.seed)?;
    let (first, last) = (series.first().unwrap_or(f64::NAN), series.last().unwrap_or(f64::NAN));
    let mut out = RunOutput::default();
    out.csv("translated.csv", |w| write_discrepancy_csv(w, &series))?;
    out.json(
        "translated.json",
        &json!({ "first": first, "last": last, "decreasing": last < first, "noise_floor": reference.noise_floor() }),
    )?;
    out.derived.insert("dictionary_hash".into(), json!(dictionary_hash(&dict)));
    Ok(out)
}

fn maximal(c: &MaximalConfig) -> CliResult<RunOutput> {
    let len = (c.beta * c.n as f64).ceil() as usize + c.n;
    let mut rng = seeded(c.seed);
    let (values, l1) = match c.system {
        MaximalSystem::Doubling => {
            if !(c.bump_width > 0.0 && c.bump_width <= 0.5) {
                return Err(CliError::Config(format!("bump_width must lie in (0, 1/2], got {}", c.bump_width)));
            }
            let w = c.bump_width;
            let psi = move |x: f64| bump_profile((x - 0.5) / w);
            (doubling_map_values(psi, c.samples, len, &mut rng), integrate_unit_interval(psi, 2000))
        }
        MaximalSystem::Horocycle => {
            c.times.validate()?;
            let psi = default_observable();
            let l1 = haar_reference(&[psi.clone()], 100_000, c.seed.wrapping_add(1))?.values[0];
            let thetas: Vec<f64> = (0..c.samples).map(|_| rng.gen::<f64>() * TAU).collect();
            let p = policy(c.precision_bits).bits(&c.times, len);
            let times = c.times.values(len, p)?;
            let g0 = GroupElement::identity(2, 64);
            let values = thetas
                .par_iter()
                .map(|&th| {
                    let base = base_frame(&g0, th, p)?;
                    times
                        .iter()
                        .map(|t| Ok(psi.eval(&reduce_frame(&frame_at_time(&base, t), DEFAULT_LOG2_TOLERANCE)?)))
                        .collect::<horolab::Result<Vec<f64>>>()
                })
                .collect::<horolab::Result<Vec<_>>>()?;
            (values, l1)
        }
    };
    let report = maximal_inequality_check(&values, c.alpha, c.beta, c.n, l1)?;
    let mut out = RunOutput::default();
    out.json("maximal.json", &report)?;
    if !report.ok {
        out.violation = Some(serde_json::to_value(&report).map_err(|e| CliError::Other(e.to_string()))?);
    }
    Ok(out)
}

fn shift_maximal(c: &ShiftMaximalConfig) -> CliResult<RunOutput> {
    if !(c.alpha_min > 0.0 && c.alpha_min < c.alpha_max) || c.max_support == 0 {
        return Err(CliError::Config("need 0 < alpha_min < alpha_max and max_support ≥ 1".into()));
    }
    let mut rng = seeded(c.seed);
    let cases: Vec<(FiniteSignal, f64)> = (0..c.signals)
        .map(|_| {
            let s = FiniteSignal::random(&mut rng, c.max_support);
            let a = rng.gen_range(c.alpha_min..c.alpha_max);
            (s, a)
        })
        .collect();
    let reports = cases
        .par_iter()
        .map(|(s, a)| shift_maximal_check(s, *a))
        .collect::<horolab::Result<Vec<_>>>()?;
    let worst = reports
        .iter()
        .map(|r| if r.rhs > 0.0 { r.lhs / r.rhs } else { 0.0 })
        .fold(0.0, f64::max);
    let violations: Vec<Value> = cases
        .iter()
        .zip(&reports)
        .filter(|(_, r)| !r.ok)
        .map(|((s, _), r)| json!({ "signal": s, "report": r }))
        .collect();
    let mut out = RunOutput::default();
    out.json(
        "shift_maximal.json",
        &json!({ "signals": c.signals, "violations": violations.len(), "max_lhs_over_rhs": worst }),
    )?;
    if let Some(v) = violations.into_iter().next() {
        out.violation = Some(v);
    }
    Ok(out)
}

fn merge(c: &MergeConfig) -> CliResult<RunOutput> {
    if c.j_max == 0 || c.j_max > 40 {
        return Err(CliError::Config(format!("j_max must lie in 1..=40, got {}", c.j_max)));
    }
    let family: Vec<FamilyMember> = (1..=c.j_max)
        .map(|j| FamilyMember {
            set: IndexSet::from_predicate(c.horizon, move |n| n % (1u64 << j) != 0),
            epsilon: 2f64.powi(-(j as i32)),
            threshold: 1u64 << j,
        })
        .collect();
    let report = merge_subsequences(&family)?;
    let mut out = RunOutput::default();
    out.csv("merge.csv", |w| write_merge_csv(w, &report))?;
    let last = report.blocks.last();
    out.json(
        "merge.json",
        &json!({
            "blocks": report.blocks,
            "complete": report.complete,
            "deepest_block": last.map(|b| b.j),
            "final_density": last.map(|b| b.block_density),
            "merged_size": report.merged.len(),
        }),
    )?;
    Ok(out)
}

fn conjugate(c: &ConjugateConfig) -> CliResult<RunOutput> {
    let mut out = RunOutput::default();
    match c.mode {
        ConjugateMode::Example => {
            let conj = example_theta_limit(c.alpha, &c.resolved_times(), c.n)?;
            let errors = theta_limit_errors(c.alpha, &conj);
            let limit = [1.0, c.alpha, 0.0, 1.0];
            let mut buf = Vec::new();
            {
                let mut w = csv::Writer::from_writer(&mut buf);
                let e = |e: csv::Error| CliError::Other(e.to_string());
                w.write_record(["n", "a", "b", "c", "d", "distance_to_limit"]).map_err(e)?;
                for (i, (g, err)) in conj.iter().zip(&errors).enumerate() {
                    let m = g.to_f64();
                    w.write_record([
                        (i + 1).to_string(),
                        m[(0, 0)].to_string(),
                        m[(0, 1)].to_string(),
                        m[(1, 0)].to_string(),
                        m[(1, 1)].to_string(),
                        err.to_string(),
                    ])
                    .map_err(e)?;
                }
                w.flush().map_err(|e| CliError::Other(e.to_string()))?;
            }
            out.files.push(("trajectory.csv".into(), buf));
            out.json(
                "conjugation.json",
                &json!({ "mode": "example", "alpha": c.alpha, "limit": limit, "errors": errors }),
            )?;
        }
        ConjugateMode::Jm => {
            let v = AlgebraElement::from_f64(2, &c.direction, 128)?;
            let exp = jm_conjugation(&v, &c.resolved_times(), c.n, c.scaling)?;
            out.csv("trajectory.csv", |w| write_trajectory_csv(w, &exp))?;
            out.json("conjugation.json", &exp)?;
        }
        ConjugateMode::Appendix => {
            let p = c.precision_bits.unwrap_or(256);
            let k = GroupElement::rotation(&Real::from_f64(c.appendix_angle, p));
            let seq = (1..=c.n)
                .map(|i| k.mul(&GroupElement::diagonal(&Real::from_f64(c.appendix_lambda * i as f64, p).exp())))
                .collect::<horolab::Result<Vec<_>>>()?;
            let exp = appendix_vn(&seq)?;
            out.csv("trajectory.csv", |w| write_trajectory_csv(w, &exp))?;
            out.json("conjugation.json", &exp)?;
        }
    }
    Ok(out)
}

fn correlations(c: &CorrelationsConfig) -> CliResult<RunOutput> {
    let mut pairs: Vec<(usize, usize)> = c.ms.iter().flat_map(|&m| c.gaps.iter().map(move |&g| (m + g, m))).collect();
    if c.include_diagonal {
        pairs.extend(c.ms.iter().map(|&m| (m, m)));
    }
    let schedule = VnSchedule::so2(c.times.clone());
    let recs = correlation_decay_experiment(
        &default_observable(),
        &GroupElement::identity(2, 64),
        &schedule,
        &pairs,
        &theta_panel(c.thetas, c.seed),
        c.radius,
    )?;
    let mut out = RunOutput::default();
    out.csv("correlations.csv", |w| write_correlation_csv(w, &recs))?;
    out.json("fit.json", &fit_decay(&recs))?;
    Ok(out)
}

fn lln(c: &LlnConfig) -> CliResult<RunOutput> {
    let schedule = VnSchedule::so2(c.times.clone());
    let report = lln_experiment(
        &default_observable(),
        &GroupElement::identity(2, 64),
        &schedule,
        c.k_max,
        &theta_panel(c.thetas, c.seed),
    )?;
    let mut out = RunOutput::default();
    out.csv("lln.csv", |w| write_lln_csv(w, &report))?;
    out.json(
        "lln.json",
        &json!({
            "n_k": report.n_k,
            "medians": report.medians,
            "second_moments": report.second_moments,
            "slope": report.slope,
        }),
    )?;
    Ok(out)
}

fn jm(c: &JmConfig) -> CliResult<RunOutput> {
    if c.n < 2 {
        return Err(CliError::Config(format!("n must be at least 2, got {}", c.n)));
    }
    let x = match c.nilpotent {
        NilpotentKind::Regular => regular_nilpotent(c.n),
        NilpotentKind::Minimal => minimal_nilpotent(c.n),
        NilpotentKind::Explicit => {
            let e = c.entries.as_ref().ok_or_else(|| CliError::Config("explicit nilpotent needs entries".into()))?;
            RatMatrix::from_i64(c.n, e)?
        }
    };
    let triple = jacobson_morozov(&x)?;
    let dec = decompose_adjoint(&triple)?;
    let basis: Vec<RatMatrix> = match &c.subalgebra {
        Some(b) => b.iter().map(|m| RatMatrix::from_i64(c.n, m)).collect::<horolab::Result<_>>()?,
        None if c.n == 2 => vec![RatMatrix::from_i64(2, &[0, 1, -1, 0])?],
        None => Vec::new(),
    };
    let mut report = json!({
        "triple": triple,
        "dims": dec.dims(),
        "highest_weights": dec.components.iter().map(|c| c.highest_weight).collect::<Vec<_>>(),
    });
    if !basis.is_empty() {
        let d = d_h_compute(&dec, &basis)?;
        let degrees = basis.iter().map(|v| d_of_vector(&dec, v)).collect::<horolab::Result<Vec<_>>>()?;
        report["d_h"] = json!(d);
        report["degrees"] = serde_json::to_value(degrees).map_err(|e| CliError::Other(e.to_string()))?;
    }
    let mut out = RunOutput::default();
    out.json("jm.json", &report)?;
    out.json("decomposition.json", &dec)?;
    Ok(out)
}

fn ball_overlap(c: &BallOverlapConfig) -> CliResult<RunOutput> {
    let rows = c
        .ds
        .iter()
        .map(|&d| ball_overlap_ratio(c.group, c.r, d, c.samples, &mut seeded(c.seed)).map(|r| (d, r)))
        .collect::<horolab::Result<Vec<_>>>()?;
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let e = |e: csv::Error| CliError::Other(e.to_string());
        w.write_record(["r", "d", "ratio", "std_error"]).map_err(e)?;
        for (d, (ratio, se)) in &rows {
            w.write_record([c.r.to_string(), d.to_string(), ratio.to_string(), se.to_string()]).map_err(e)?;
        }
        w.flush().map_err(|e| CliError::Other(e.to_string()))?;
    }
    let mut out = RunOutput::default();
    out.files.push(("ball_overlap.csv".into(), buf));
    Ok(out)
}
