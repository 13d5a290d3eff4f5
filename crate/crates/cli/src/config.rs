//! Experiment configurations.
//!
//! Every field has a default, so an empty TOML file is a valid config.
//! Unknown keys are rejected.

use horolab::orbit::TimeSequence;
use horolab::ratner::{BallGroup, RadiusMode, ScalingMode};
use serde::{Deserialize, Serialize};

fn exp(lambda: f64) -> TimeSequence {
    TimeSequence::exponential(lambda)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrbitConfig {
    pub times: TimeSequence,
    /// Drawn from the seed when absent.
    pub theta: Option<f64>,
    pub n: usize,
    /// Row-major `g₀`; identity when absent.
    pub base: Option<[f64; 4]>,
    pub seed: u64,
    pub precision_bits: Option<usize>,
}

impl Default for OrbitConfig {
    fn default() -> Self {
        OrbitConfig {
            times: exp(0.1),
            theta: None,
            n: 1000,
            base: None,
            seed: 0,
            precision_bits: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscrepancyConfig {
    pub times: TimeSequence,
    pub theta: Option<f64>,
    pub n: usize,
    pub dictionary_seed: u64,
    pub reference_samples: usize,
    pub epsilon: f64,
    pub burn_in: f64,
    pub seed: u64,
    pub precision_bits: Option<usize>,
}

impl Default for DiscrepancyConfig {
    fn default() -> Self {
        DiscrepancyConfig {
            times: exp(0.05),
            theta: None,
            n: 2000,
            dictionary_seed: 0,
            reference_samples: 100_000,
            epsilon: 0.1,
            burn_in: 0.2,
            seed: 0,
            precision_bits: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TranslatedConfig {
    pub times: TimeSequence,
    pub n: usize,
    pub m_theta: usize,
    pub base: Option<[f64; 4]>,
    pub dictionary_seed: u64,
    pub reference_samples: usize,
    pub seed: u64,
    pub precision_bits: Option<usize>,
}

impl Default for TranslatedConfig {
    fn default() -> Self {
        TranslatedConfig {
            times: exp(0.2),
            n: 200,
            m_theta: 400,
            base: None,
            dictionary_seed: 0,
            reference_samples: 100_000,
            seed: 0,
            precision_bits: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaximalSystem {
    Doubling,
    Horocycle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaximalConfig {
    pub system: MaximalSystem,
    pub alpha: f64,
    pub beta: f64,
    pub n: usize,
    pub samples: usize,
    /// Horocycle system only.
    pub times: TimeSequence,
    /// Doubling system only: half-width of the bump on `[0, 1)` centred at 1/2.
    pub bump_width: f64,
    pub seed: u64,
    pub precision_bits: Option<usize>,
}

impl Default for MaximalConfig {
    fn default() -> Self {
        MaximalConfig {
            system: MaximalSystem::Doubling,
            alpha: 0.5,
            beta: 0.25,
            n: 512,
            samples: 1000,
            times: exp(0.1),
            bump_width: 0.2,
            seed: 0,
            precision_bits: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShiftMaximalConfig {
    pub signals: usize,
    pub max_support: usize,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub seed: u64,
    pub precision_bits: Option<usize>,
}

impl Default for ShiftMaximalConfig {
    fn default() -> Self {
        ShiftMaximalConfig {
            signals: 1000,
            max_support: 64,
            alpha_min: 0.01,
            alpha_max: 1.0,
            seed: 0,
            precision_bits: None,
        }
    }
}

/// Synthetic family `A_j = {n : 2^j ∤ n}` of density `1 − 2^{−j}`, valid from `2^j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MergeConfig {
    pub j_max: u32,
    pub horizon: u64,
    pub seed: u64,
    pub precision_bits: Option<usize>,
}

impl Default for MergeConfig {
    fn default() -> Self {
        MergeConfig {
            j_max: 12,
            horizon: 400_000,
            seed: 0,
            precision_bits: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConjugateMode {
    /// `u(t_n) k_{θ_n} u(t_n)^{-1}` with `t_n² sin θ_n = α`.
    Example,
    /// `exp(Ad(u(t_n)) v_n)` with `v_n` scaled by `t_n^{d_𝔥}` or by the restricted adjoint norm.
    Jm,
    /// `g_n = k_φ diag(e^{λn}, e^{−λn})` with `v_n = (E − F)/‖Ad(g_n)‖`.
    Appendix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConjugateConfig {
    pub mode: ConjugateMode,
    pub n: usize,
    /// Defaults to `t_n = 2^n`.
    pub times: Option<TimeSequence>,
    pub alpha: f64,
    pub direction: [f64; 4],
    pub scaling: ScalingMode,
    pub appendix_lambda: f64,
    pub appendix_angle: f64,
    pub seed: u64,
    /// Working precision for the escaping sequence in appendix mode (default 256).
    pub precision_bits: Option<usize>,
}

impl Default for ConjugateConfig {
    fn default() -> Self {
        ConjugateConfig {
            mode: ConjugateMode::Example,
            n: 30,
            times: None,
            alpha: 0.5,
            direction: [0.0, 1.0, -1.0, 0.0],
            scaling: ScalingMode::DhPower,
            appendix_lambda: 1.0,
            appendix_angle: 0.0,
            seed: 0,
            precision_bits: None,
        }
    }
}

impl ConjugateConfig {
    pub fn resolved_times(&self) -> TimeSequence {
        self.times
            .clone()
            .unwrap_or_else(|| TimeSequence::explicit((1..=self.n).map(|k| 2f64.powi(k as i32)).collect()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrelationsConfig {
    pub times: TimeSequence,
    pub ms: Vec<usize>,
    pub gaps: Vec<usize>,
    pub include_diagonal: bool,
    pub thetas: usize,
    pub radius: RadiusMode,
    pub seed: u64,
    pub precision_bits: Option<usize>,
}

impl Default for CorrelationsConfig {
    fn default() -> Self {
        CorrelationsConfig {
            times: exp(0.3),
            ms: vec![5, 10, 15, 20],
            gaps: vec![5, 10, 15],
            include_diagonal: true,
            thetas: 400,
            radius: RadiusMode::Coupled,
            seed: 0,
            precision_bits: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlnConfig {
    pub times: TimeSequence,
    pub k_max: usize,
    pub thetas: usize,
    pub seed: u64,
    pub precision_bits: Option<usize>,
}

impl Default for LlnConfig {
    fn default() -> Self {
        LlnConfig {
            times: exp(0.3),
            k_max: 6,
            thetas: 100,
            seed: 0,
            precision_bits: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NilpotentKind {
    Regular,
    Minimal,
    Explicit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JmConfig {
    pub nilpotent: NilpotentKind,
    pub n: usize,
    /// Row-major integer entries, for `nilpotent = "explicit"`.
    pub entries: Option<Vec<i64>>,
    /// Basis of 𝔥 as row-major integer matrices. For `n = 2` defaults to `so(2)`.
    pub subalgebra: Option<Vec<Vec<i64>>>,
    pub seed: u64,
    pub precision_bits: Option<usize>,
}

impl Default for JmConfig {
    fn default() -> Self {
        JmConfig {
            nilpotent: NilpotentKind::Regular,
            n: 2,
            entries: None,
            subalgebra: None,
            seed: 0,
            precision_bits: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BallOverlapConfig {
    pub group: BallGroup,
    pub r: f64,
    pub ds: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub precision_bits: Option<usize>,
}

impl Default for BallOverlapConfig {
    fn default() -> Self {
        BallOverlapConfig {
            group: BallGroup::Sl2,
            r: 0.1,
            ds: vec![0.005, 0.01, 0.02],
            samples: 100_000,
            seed: 0,
            precision_bits: None,
        }
    }
}

/// A subcommand together with its resolved config; this is what a manifest records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subcommand", content = "config", rename_all = "kebab-case")]
pub enum Experiment {
    Orbit(OrbitConfig),
    Discrepancy(DiscrepancyConfig),
    Translated(TranslatedConfig),
    Maximal(MaximalConfig),
    ShiftMaximal(ShiftMaximalConfig),
    Merge(MergeConfig),
    Conjugate(ConjugateConfig),
    Correlations(CorrelationsConfig),
    Lln(LlnConfig),
    Jm(JmConfig),
    BallOverlap(BallOverlapConfig),
}
