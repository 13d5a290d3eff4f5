//! Geometry of the modular surface `SL(2,Z)\SL(2,R)`.
//!
//! # Coordinates
//!
//! A coset `gΓ ∈ G/Γ` is identified with `Γ\G` through the anti-automorphism
//! `φ(g) = J g⁻¹ J`, `J = diag(1,-1)`, which fixes every `u(t)` and every
//! rotation `k_θ`. For `h = φ(g) = (a b; c d)` the frame coordinates are
//!
//! * `z = h·i`, so `y = 1/(c²+d²)` and `x = (ac+bd)/(c²+d²)`,
//! * `θ = 2·arg(d + ic) mod 2π`, the angle of the unit tangent vector.
//!
//! `Γ` acts by left multiplication on `h`, which is the usual Möbius action on
//! `z` together with the derivative action on the frame. Left translation of
//! `gΓ` by `s ∈ G` becomes right multiplication `h ↦ h·φ(s)`.
//!
//! # Frame metric
//!
//! Distances between frames are `d(h₁,h₂) = d_ℍ(h₁·i, h₂·i) + d_ℍ(h₁·ei, h₂·ei)`:
//! the hyperbolic distance of base points plus that of the points at height
//! `e` pushed forward by the frames. This is invariant under the left action
//! of `G` on frames, hence descends to `Γ\G`, and right translation by `u(s)`
//! moves every point by the same amount.

use std::collections::{HashMap, HashSet, VecDeque};
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::{Arc, Mutex};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use once_cell::sync::{Lazy, OnceCell};
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::group::GroupElement;
use crate::mp::Real;

/// Default bound on the reduction error, `2^-32`.
pub const DEFAULT_LOG2_TOLERANCE: f64 = -32.0;

/// Word budget used by [`quotient_distance`] and [`injectivity_radius`] when
/// callers have no better choice. Above height 100 the results are only
/// upper (distance) or lower (radius) bounds at this budget.
pub const DEFAULT_WORD_BUDGET: usize = 8;

const SQRT3_2: f64 = 0.866_025_403_784_438_6;

/// One syllable of a word in `PSL(2,Z)`: `T^e = (1 e; 0 1)` or `S = (0 -1; 1 0)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Syllable {
    T(BigInt),
    S,
}

impl fmt::Display for Syllable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Syllable::S => write!(f, "S"),
            Syllable::T(e) if e.is_one() => write!(f, "T"),
            Syllable::T(e) => write!(f, "T^{e}"),
        }
    }
}

impl std::str::FromStr for Syllable {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "S" => Ok(Syllable::S),
            "T" => Ok(Syllable::T(BigInt::one())),
            _ => s
                .strip_prefix("T^")
                .and_then(|e| e.parse::<BigInt>().ok())
                .map(Syllable::T)
                .ok_or_else(|| Error::InvalidArgument(format!("bad word letter {s:?}"))),
        }
    }
}

/// Reduction word: the moves applied to a frame, in order.
///
/// If the moves are `m₁, …, m_k` then the reducing element is
/// `γ = m_k ⋯ m₁` and `reduced = γ · original`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Word(Vec<Syllable>);

impl Word {
    pub fn new() -> Self {
        Word(Vec::new())
    }

    pub fn syllables(&self) -> &[Syllable] {
        &self.0
    }

    /// Number of syllables.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Appends `T^e`, merging with a trailing `T` power.
    pub fn push_t(&mut self, e: BigInt) {
        if e.is_zero() {
            return;
        }
        if let Some(Syllable::T(prev)) = self.0.last_mut() {
            *prev += e;
            if prev.is_zero() {
                self.0.pop();
            }
            return;
        }
        self.0.push(Syllable::T(e));
    }

    /// Appends `S`, cancelling a trailing `S` (`S² = -I`).
    pub fn push_s(&mut self) {
        if let Some(Syllable::S) = self.0.last() {
            self.0.pop();
        } else {
            self.0.push(Syllable::S);
        }
    }

    pub fn to_matrix(&self) -> IntMatrix {
        let mut m = IntMatrix::identity();
        for s in &self.0 {
            m = IntMatrix::from_syllable(s).mul(&m);
        }
        m
    }
}

impl Serialize for Word {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.0.iter().map(|x| x.to_string()))
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        let mut w = Word::new();
        for s in raw {
            match s.parse::<Syllable>().map_err(serde::de::Error::custom)? {
                Syllable::S => w.push_s(),
                Syllable::T(e) => w.push_t(e),
            }
        }
        Ok(w)
    }
}

/// Exact integer `2x2` matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntMatrix {
    pub a: BigInt,
    pub b: BigInt,
    pub c: BigInt,
    pub d: BigInt,
}

impl IntMatrix {
    pub fn identity() -> Self {
        IntMatrix {
            a: BigInt::one(),
            b: BigInt::zero(),
            c: BigInt::zero(),
            d: BigInt::one(),
        }
    }

    fn from_syllable(s: &Syllable) -> Self {
        match s {
            Syllable::S => IntMatrix {
                a: BigInt::zero(),
                b: BigInt::from(-1),
                c: BigInt::one(),
                d: BigInt::zero(),
            },
            Syllable::T(e) => IntMatrix {
                b: e.clone(),
                ..IntMatrix::identity()
            },
        }
    }

    pub fn mul(&self, o: &IntMatrix) -> IntMatrix {
        IntMatrix {
            a: &self.a * &o.a + &self.b * &o.c,
            b: &self.a * &o.b + &self.b * &o.d,
            c: &self.c * &o.a + &self.d * &o.c,
            d: &self.c * &o.b + &self.d * &o.d,
        }
    }

    pub fn inverse(&self) -> IntMatrix {
        IntMatrix {
            a: self.d.clone(),
            b: -&self.b,
            c: -&self.c,
            d: self.a.clone(),
        }
    }

    pub fn det(&self) -> BigInt {
        &self.a * &self.d - &self.b * &self.c
    }

    /// `self · h` for a real frame matrix.
    pub fn apply(&self, h: &Frame) -> Frame {
        let p = h.precision();
        let [a, b, c, d] = [&self.a, &self.b, &self.c, &self.d].map(|v| Real::from_bigint(v, p));
        Frame {
            a: &a * &h.a + &b * &h.c,
            b: &a * &h.b + &b * &h.d,
            c: &c * &h.a + &d * &h.c,
            d: &c * &h.b + &d * &h.d,
        }
    }
}

/// A `2x2` real matrix representing a point of `Γ\G` (see module docs).
#[derive(Clone, Debug)]
pub struct Frame {
    pub a: Real,
    pub b: Real,
    pub c: Real,
    pub d: Real,
}

impl Frame {
    pub fn precision(&self) -> usize {
        [&self.a, &self.b, &self.c, &self.d].iter().map(|x| x.precision()).min().unwrap()
    }

    /// The frame `φ(g)` attached to the coset `gΓ`.
    pub fn of_coset(g: &GroupElement) -> Result<Frame> {
        if g.dim() != 2 {
            return Err(Error::DimensionMismatch { left: g.dim(), right: 2 });
        }
        Ok(Frame {
            a: g.entry(1, 1).clone(),
            b: g.entry(0, 1).clone(),
            c: g.entry(1, 0).clone(),
            d: g.entry(0, 0).clone(),
        })
    }

    /// Frame with coordinates `(x, y, θ)`.
    pub fn from_coordinates(x: &Real, y: &Real, theta: &Real) -> Result<Frame> {
        if !y.is_finite() || y.is_negative() || y.is_zero() {
            return Err(Error::NonPositiveHeight(y.to_f64()));
        }
        let p = x.precision().min(y.precision()).min(theta.precision());
        let half = theta * &Real::from_f64(0.5, p);
        let s = y.sqrt().recip();
        let c = &s * &half.sin();
        let d = &s * &half.cos();
        // a + ... : b + i a = z (d + i c)
        let b = x * &d - y * &c;
        let a = x * &c + y * &d;
        Ok(Frame { a, b, c, d })
    }

    pub fn to_f64(&self) -> [f64; 4] {
        [self.a.to_f64(), self.b.to_f64(), self.c.to_f64(), self.d.to_f64()]
    }

    /// `self · m` for a `2x2` group element `m`.
    pub fn right_mul(&self, m: &GroupElement) -> Frame {
        let (p, q, r, s) = (m.entry(0, 0), m.entry(0, 1), m.entry(1, 0), m.entry(1, 1));
        Frame {
            a: &self.a * p + &self.b * r,
            b: &self.a * q + &self.b * s,
            c: &self.c * p + &self.d * r,
            d: &self.c * q + &self.d * s,
        }
    }

    fn max_log2(&self) -> f64 {
        [&self.a, &self.b, &self.c, &self.d]
            .iter()
            .map(|x| x.log2_abs())
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Reduced representative of a point of `G/Γ`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FramePoint {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub word: Word,
    #[serde(skip, default = "default_precision")]
    pub precision_bits: usize,
}

fn default_precision() -> usize {
    53
}

impl PartialEq for FramePoint {
    fn eq(&self, o: &Self) -> bool {
        self.x.to_bits() == o.x.to_bits()
            && self.y.to_bits() == o.y.to_bits()
            && self.theta.to_bits() == o.theta.to_bits()
            && self.word == o.word
    }
}

impl FramePoint {
    /// A point given directly by reduced coordinates (no reduction performed).
    pub fn from_reduced(x: f64, y: f64, theta: f64) -> Self {
        FramePoint {
            x,
            y,
            theta: theta.rem_euclid(TAU),
            word: Word::new(),
            precision_bits: 53,
        }
    }

    /// Frame matrix in doubles.
    pub fn frame_f64(&self) -> [f64; 4] {
        frame_from_coordinates_f64(self.x, self.y, self.theta)
    }

    /// Frame matrix at precision `p`.
    pub fn frame(&self, p: usize) -> Frame {
        Frame::from_coordinates(&Real::from_f64(self.x, p), &Real::from_f64(self.y, p), &Real::from_f64(self.theta, p))
            .expect("reduced points have positive height")
    }

    /// Left translation by `s ∈ G`, reduced again.
    pub fn translate(&self, s: &GroupElement) -> Result<FramePoint> {
        let p = s.precision_bits().max(self.precision_bits).max(64);
        let phi = phi(s);
        reduce_frame(&self.frame(p).right_mul(&phi), DEFAULT_LOG2_TOLERANCE)
    }
}

/// `φ(g) = J g⁻¹ J`, which for `2x2` is `(d b; c a)`.
pub fn phi(g: &GroupElement) -> GroupElement {
    let m = crate::group::MpMatrix::from_reals(
        2,
        2,
        vec![g.entry(1, 1).clone(), g.entry(0, 1).clone(), g.entry(1, 0).clone(), g.entry(0, 0).clone()],
    );
    GroupElement::new(m).expect("φ preserves the determinant")
}

pub fn frame_from_coordinates_f64(x: f64, y: f64, theta: f64) -> [f64; 4] {
    let s = 1.0 / y.sqrt();
    let (sn, cs) = (0.5 * theta).sin_cos();
    let (c, d) = (s * sn, s * cs);
    [x * c + y * d, x * d - y * c, c, d]
}

/// Reduces `z = x + iy` with frame angle `θ` into the fundamental domain.
///
/// Input that already satisfies the fundamental-domain conditions is returned
/// unchanged (angle taken mod 2π), which makes reduction exactly idempotent.
pub fn reduce(x: &Real, y: &Real, theta: &Real, p: usize) -> Result<FramePoint> {
    let (x, y, theta) = (x.with_precision(p), y.with_precision(p), theta.with_precision(p));
    let h = Frame::from_coordinates(&x, &y, &theta)?;
    let tol = boundary_tolerance(p);
    let half = Real::from_f64(0.5, p);
    let in_strip = x >= -&half && x < half;
    let bound = Real::from_f64((1.0 - tol) * (1.0 - tol), p);
    if in_strip && (&x * &x + &y * &y) >= bound {
        return Ok(FramePoint {
            x: x.to_f64(),
            y: y.to_f64(),
            theta: normalize_angle(theta.to_f64()),
            word: Word::new(),
            precision_bits: p,
        });
    }
    reduce_frame(&h, DEFAULT_LOG2_TOLERANCE)
}

pub fn reduce_f64(x: f64, y: f64, theta: f64, p: usize) -> Result<FramePoint> {
    reduce(&Real::from_f64(x, p), &Real::from_f64(y, p), &Real::from_f64(theta, p), p)
}

/// Reduced point of the coset `gΓ`.
pub fn reduce_coset(g: &GroupElement, log2_tolerance: f64) -> Result<FramePoint> {
    reduce_frame(&Frame::of_coset(g)?, log2_tolerance)
}

fn boundary_tolerance(p: usize) -> f64 {
    2f64.powf(-(p as f64) / 2.0)
}

fn normalize_angle(t: f64) -> f64 {
    let r = t.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Gauss reduction of a frame matrix by left multiplication with `PSL(2,Z)`.
///
/// The rounding error of the reduced coordinates is bounded by
/// `16 · (max entry)² · 2^-p`; if that exceeds `2^log2_tolerance` the call
/// fails with [`Error::PrecisionExhausted`] before doing any work.
pub fn reduce_frame(h: &Frame, log2_tolerance: f64) -> Result<FramePoint> {
    let p = h.precision();
    let log2_error = 2.0 * h.max_log2().max(0.0) + 4.0 - p as f64;
    if log2_error > log2_tolerance {
        return Err(Error::PrecisionExhausted {
            precision_bits: p,
            log2_error,
        });
    }
    let tol = boundary_tolerance(p);
    let accept = Real::from_f64((1.0 - tol) * (1.0 - tol), p);
    let Frame {
        mut a,
        mut b,
        mut c,
        mut d,
    } = h.clone();
    let mut word = Word::new();
    // Each S-step at least squares away a factor of the height deficit; the
    // cap only guards against NaN-like inputs.
    let cap = 64 * p + 1024;
    for _ in 0..cap {
        let nb = &c * &c + &d * &d;
        let x = (&a * &c + &b * &d) / &nb;
        let k = x.round_half_up();
        if !k.is_zero() {
            a = &a - &(&k * &c);
            b = &b - &(&k * &d);
            let kb = k.to_bigint().ok_or_else(|| Error::InvalidArgument("non-finite frame".into()))?;
            word.push_t(-kb);
        }
        let nt = &a * &a + &b * &b;
        if nt < &accept * &nb {
            let (na, nb_, nc, nd) = (-&c, -&d, a, b);
            a = na;
            b = nb_;
            c = nc;
            d = nd;
            word.push_s();
        } else {
            return Ok(finish(a, b, c, d, word, p));
        }
    }
    Err(Error::InvalidArgument("reduction did not terminate".into()))
}

fn finish(a: Real, b: Real, c: Real, d: Real, mut word: Word, p: usize) -> FramePoint {
    let nb = &c * &c + &d * &d;
    let mut x = ((&a * &c + &b * &d) / &nb).to_f64();
    let y = nb.recip().to_f64();
    if x >= 0.5 {
        x -= 1.0;
        word.push_t(BigInt::from(-1));
    }
    let theta = normalize_angle(2.0 * c.to_f64().atan2(d.to_f64()));
    FramePoint {
        x,
        y,
        theta,
        word,
        precision_bits: p,
    }
}

/// `y` of the reduced representative.
pub fn invariant_height(pt: &FramePoint) -> f64 {
    pt.y
}

fn mobius(h: &[f64; 4], zr: f64, zi: f64) -> (f64, f64) {
    let [a, b, c, d] = *h;
    // (a z + b)/(c z + d)
    let (nr, ni) = (a * zr + b, a * zi);
    let (dr, di) = (c * zr + d, c * zi);
    let den = dr * dr + di * di;
    ((nr * dr + ni * di) / den, (ni * dr - nr * di) / den)
}

/// Hyperbolic distance in the upper half-plane.
pub fn hyperbolic_distance(z: (f64, f64), w: (f64, f64)) -> f64 {
    let dx = z.0 - w.0;
    let dy = z.1 - w.1;
    // arcosh(1 + r) with r = |z-w|²/(2 Im z Im w), written to stay accurate for small r
    let r = (dx * dx + dy * dy) / (2.0 * z.1 * w.1);
    (r + (r * (r + 2.0)).sqrt()).ln_1p()
}

/// Frame distance between two frame matrices.
pub fn frame_distance(h1: &[f64; 4], h2: &[f64; 4]) -> f64 {
    let e = std::f64::consts::E;
    hyperbolic_distance(mobius(h1, 0.0, 1.0), mobius(h2, 0.0, 1.0))
        + hyperbolic_distance(mobius(h1, 0.0, e), mobius(h2, 0.0, e))
}

/// Distance of a `2x2` group element from the identity in the frame metric.
pub fn distance_to_identity(g: &[f64; 4]) -> f64 {
    frame_distance(g, &[1.0, 0.0, 0.0, 1.0])
}

type SmallMatrix = [i64; 4];

fn small_mul(x: &SmallMatrix, y: &SmallMatrix) -> SmallMatrix {
    [
        x[0] * y[0] + x[1] * y[2],
        x[0] * y[1] + x[1] * y[3],
        x[2] * y[0] + x[3] * y[2],
        x[2] * y[1] + x[3] * y[3],
    ]
}

fn small_normalize(m: SmallMatrix) -> SmallMatrix {
    if m[2] < 0 || (m[2] == 0 && m[3] < 0) {
        m.map(|v| -v)
    } else {
        m
    }
}

static WORD_BALLS: Lazy<Mutex<HashMap<usize, Arc<Vec<SmallMatrix>>>>> = Lazy::new(|| Mutex::new(HashMap::new()));

/// Distinct elements of `PSL(2,Z)` of word length at most `budget` in the
/// letters `T, T⁻¹, S`, identity first, in breadth-first order.
pub fn word_ball(budget: usize) -> Arc<Vec<[i64; 4]>> {
    let mut cache = WORD_BALLS.lock().expect("word ball cache poisoned");
    if let Some(v) = cache.get(&budget) {
        return v.clone();
    }
    let gens: [SmallMatrix; 3] = [[1, 1, 0, 1], [1, -1, 0, 1], [0, -1, 1, 0]];
    let id = [1, 0, 0, 1];
    let mut seen = HashSet::from([id]);
    let mut out = vec![id];
    let mut queue = VecDeque::from([(id, 0usize)]);
    while let Some((m, len)) = queue.pop_front() {
        if len == budget {
            continue;
        }
        for g in &gens {
            let n = small_normalize(small_mul(g, &m));
            if seen.insert(n) {
                out.push(n);
                queue.push_back((n, len + 1));
            }
        }
    }
    let out = Arc::new(out);
    cache.insert(budget, out.clone());
    out
}

fn small_apply(g: &SmallMatrix, h: &[f64; 4]) -> [f64; 4] {
    let g = g.map(|v| v as f64);
    [
        g[0] * h[0] + g[1] * h[2],
        g[0] * h[1] + g[1] * h[3],
        g[2] * h[0] + g[3] * h[2],
        g[2] * h[1] + g[3] * h[3],
    ]
}

/// Minimum of the frame distance between `a` and `γ·b` over `γ` of word length
/// at most `word_budget`. Always an upper bound on the true quotient distance.
pub fn quotient_distance(a: &FramePoint, b: &FramePoint, word_budget: usize) -> f64 {
    let (ha, hb) = (a.frame_f64(), b.frame_f64());
    word_ball(word_budget)
        .iter()
        .map(|g| frame_distance(&ha, &small_apply(g, &hb)))
        .fold(f64::INFINITY, f64::min)
}

/// Half the minimal displacement `d(h, γh)` over nontrivial `γ` of word
/// length at most `word_budget`.
pub fn injectivity_radius(pt: &FramePoint, word_budget: usize) -> f64 {
    let h = pt.frame_f64();
    word_ball(word_budget.max(1))
        .iter()
        .skip(1)
        .map(|g| frame_distance(&h, &small_apply(g, &h)))
        .fold(f64::INFINITY, f64::min)
        / 2.0
}

/// The standard smooth profile `exp(1 - 1/(1 - s²))` on `|s| < 1`, zero outside.
pub fn bump_profile(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

static PROFILE_LIPSCHITZ: Lazy<f64> = Lazy::new(|| {
    let n = 200_000;
    (1..n)
        .map(|i| {
            let s = i as f64 / n as f64;
            let den = 1.0 - s * s;
            (2.0 * s / (den * den) * bump_profile(s)).abs()
        })
        .fold(0.0, f64::max)
        * 1.001
});

/// Lipschitz constant of [`bump_profile`] (a numerical maximum of `|profile'|`
/// with a small safety margin).
pub fn profile_lipschitz() -> f64 {
    *PROFILE_LIPSCHITZ
}

/// Γ-invariant test function on the unit tangent bundle of the modular surface.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TestFunction {
    /// Function of the invariant height only: 1 below `lower`, the smooth
    /// profile in between, 0 above `upper`.
    HeightProfile { lower: f64, upper: f64 },
    /// `profile(d(center, ·)/width)` with `d` the quotient frame distance.
    DistanceBump {
        center: FramePoint,
        width: f64,
        #[serde(skip)]
        candidates: OnceCell<Vec<[f64; 4]>>,
    },
    Constant { value: f64 },
}

impl TestFunction {
    /// Height profile vanishing above `cutoff` and equal to 1 below `cutoff/2`.
    pub fn height_cutoff(cutoff: f64) -> Self {
        TestFunction::HeightProfile {
            lower: cutoff / 2.0,
            upper: cutoff,
        }
    }

    pub fn bump(center: FramePoint, width: f64) -> Self {
        TestFunction::DistanceBump {
            center,
            width,
            candidates: OnceCell::new(),
        }
    }

    pub fn constant(value: f64) -> Self {
        TestFunction::Constant { value }
    }

    pub fn eval(&self, pt: &FramePoint) -> f64 {
        match self {
            TestFunction::Constant { value } => *value,
            TestFunction::HeightProfile { lower, upper } => height_profile(pt.y, *lower, *upper),
            TestFunction::DistanceBump {
                center,
                width,
                candidates,
            } => {
                let cands = candidates.get_or_init(|| bump_candidates(center, *width));
                let h = pt.frame_f64();
                let d = cands.iter().map(|c| frame_distance(c, &h)).fold(f64::INFINITY, f64::min);
                bump_profile(d / width)
            }
        }
    }

    /// Lipschitz constant with respect to the quotient frame metric.
    pub fn lipschitz(&self) -> f64 {
        match self {
            TestFunction::Constant { .. } => 0.0,
            // |log y₁ - log y₂| ≤ d, and y ≤ upper on the support of the slope
            TestFunction::HeightProfile { lower, upper } => profile_lipschitz() * upper / (upper - lower),
            TestFunction::DistanceBump { width, .. } => profile_lipschitz() / width,
        }
    }

    /// `sup f - inf f` is at most this (all dictionary functions take values in `[0,1]`).
    pub fn is_constant(&self) -> bool {
        matches!(self, TestFunction::Constant { .. })
    }
}

impl PartialEq for TestFunction {
    fn eq(&self, other: &Self) -> bool {
        serde_json::to_string(self).ok() == serde_json::to_string(other).ok()
    }
}

fn height_profile(y: f64, lower: f64, upper: f64) -> f64 {
    if y <= lower {
        1.0
    } else if y >= upper {
        0.0
    } else {
        bump_profile((y - lower) / (upper - lower))
    }
}

/// All `δ·h_c` with `δ ∈ PSL(2,Z)` that can come within frame distance
/// `width` of a reduced frame.
///
/// A reduced frame has base point in `F`, and the base-point part of the frame
/// distance bounds `d_ℍ(δ z_c, F)`. So `Im δz_c ≥ (√3/2)e^{-w}` and
/// `|Re δz_c| ≤ 1/2 + Im δz_c · sinh w`; only finitely many `δ` qualify.
fn bump_candidates(center: &FramePoint, width: f64) -> Vec<[f64; 4]> {
    let hc = center.frame_f64();
    let (zx, zy) = (center.x, center.y);
    let ymin = 0.99 * SQRT3_2 * (-width).exp();
    let r2 = zy / ymin;
    let mut out = Vec::new();
    let cmax = (r2.sqrt() / zy).floor() as i64;
    for c in 0..=cmax {
        let span = r2.sqrt() + c as f64 * zx.abs() + 1.0;
        let dlo = if c == 0 { 1 } else { (-c as f64 * zx - span).floor() as i64 };
        let dhi = if c == 0 { 1 } else { (-c as f64 * zx + span).ceil() as i64 };
        for d in dlo..=dhi {
            if c.gcd(&d) != 1 {
                continue;
            }
            let (cf, df) = (c as f64, d as f64);
            let q = (cf * zx + df).powi(2) + (cf * zy).powi(2);
            if q > r2 {
                continue;
            }
            // a d - b c = 1
            let (a, b) = if c == 0 {
                (1, 0)
            } else {
                let e = i64::extended_gcd(&d, &c);
                // e.x·d + e.y·c = ±1
                let sgn = e.gcd.signum();
                (sgn * e.x, -sgn * e.y)
            };
            let delta = [a, b, c, d];
            let (px, py) = mobius(&delta.map(|v| v as f64), zx, zy);
            let reach = 0.5 + py * width.sinh() + 1e-9;
            let nlo = (-reach - px).ceil() as i64;
            let nhi = (reach - px).floor() as i64;
            for n in nlo..=nhi {
                let shifted = small_mul(&[1, n, 0, 1], &delta);
                out.push(small_apply(&shifted, &hc));
            }
        }
    }
    out
}

/// Draws a point from the normalized Haar measure `dx dy dθ / y²` on `F × [0, 2π)`.
pub fn haar_sample<R: Rng + ?Sized>(rng: &mut R) -> FramePoint {
    loop {
        let x: f64 = rng.gen::<f64>() - 0.5;
        let u: f64 = rng.gen();
        let y = SQRT3_2 / (1.0 - u);
        if x * x + y * y < 1.0 {
            continue;
        }
        let theta = rng.gen::<f64>() * TAU;
        return FramePoint::from_reduced(x, y, theta);
    }
}

/// Monte Carlo estimate of `∫ f dμ` with its standard error.
pub fn haar_integral<R: Rng + ?Sized>(f: &TestFunction, n_samples: usize, rng: &mut R) -> Result<(f64, f64)> {
    if n_samples < 100 {
        return Err(Error::InvalidArgument(format!("haar_integral needs at least 100 samples, got {n_samples}")));
    }
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..n_samples {
        let v = f.eval(&haar_sample(rng));
        s += v;
        s2 += v * v;
    }
    let n = n_samples as f64;
    let mean = s / n;
    let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Hyperbolic area of the fundamental domain.
pub const FUNDAMENTAL_AREA: f64 = PI / 3.0;

/// Antiderivative of `width(y)/y²`, with `width(y)` the length of the
/// horizontal slice of `F` at height `y`.
fn slice_antiderivative(y: f64) -> f64 {
    if y >= 1.0 {
        PI - 1.0 / y
    } else {
        -1.0 / y + 2.0 * (1.0 - y * y).sqrt() / y + 2.0 * y.asin()
    }
}

/// Haar measure of `{y ≤ t}`.
pub fn haar_height_cdf(t: f64) -> f64 {
    if t <= SQRT3_2 {
        0.0
    } else {
        (slice_antiderivative(t) - slice_antiderivative(SQRT3_2)) / FUNDAMENTAL_AREA
    }
}

/// Pearson statistic of the height marginal of `heights` against
/// [`haar_height_cdf`] over `bins` equiprobable bins. Returns the statistic
/// and its degrees of freedom.
pub fn height_chi_square(heights: &[f64], bins: usize) -> (f64, usize) {
    assert!(bins >= 2, "need at least two bins");
    let mut edges = Vec::with_capacity(bins - 1);
    for k in 1..bins {
        let target = k as f64 / bins as f64;
        let (mut lo, mut hi) = (SQRT3_2, 1e12);
        for _ in 0..200 {
            let mid = if hi > 1e3 * lo { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
            if haar_height_cdf(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        edges.push(0.5 * (lo + hi));
    }
    let mut counts = vec![0usize; bins];
    for &y in heights {
        counts[edges.partition_point(|&e| e < y)] += 1;
    }
    let expect = heights.len() as f64 / bins as f64;
    let stat = counts.iter().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
    (stat, bins - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::Rng;

    const P: usize = 128;

    fn red(x: f64, y: f64, t: f64) -> FramePoint {
        reduce_f64(x, y, t, P).unwrap()
    }

    #[test]
    fn reduce_examples() {
        let p = red(0.0, 1.0, 0.0);
        assert_eq!((p.x, p.y, p.theta), (0.0, 1.0, 0.0));
        assert!(p.word.is_empty());

        let p = red(1.0, 1.0, 0.0);
        assert_eq!((p.x, p.y, p.theta), (0.0, 1.0, 0.0));
        assert_eq!(serde_json::to_value(&p.word).unwrap(), serde_json::json!(["T^-1"]));
    }

    #[test]
    fn reduce_matches_exhaustive_search() {
        // Oracle: among all γ of word length ≤ 20 pick the largest Im γz,
        // then translate into the strip.
        let (x, y) = (0.3, 0.01);
        let p = red(x, y, 0.0);
        let gens: [SmallMatrix; 3] = [[1, 1, 0, 1], [1, -1, 0, 1], [0, -1, 1, 0]];
        let mut best = (x, y);
        let mut seen = HashSet::from([[1i64, 0, 0, 1]]);
        let mut frontier = vec![[1i64, 0, 0, 1]];
        for _ in 0..20 {
            let mut next = Vec::new();
            for m in &frontier {
                for g in &gens {
                    let n = small_normalize(small_mul(g, m));
                    if seen.insert(n) {
                        let (gx, gy) = mobius(&n.map(|v| v as f64), x, y);
                        if gy > best.1 + 1e-12 {
                            best = (gx, gy);
                        }
                        next.push(n);
                    }
                }
            }
            frontier = next;
        }
        let bx = best.0 - (best.0 + 0.5).floor();
        assert!(p.y >= SQRT3_2);
        assert!((p.y - best.1).abs() < 1e-9, "{} vs {}", p.y, best.1);
        assert!((p.x - bx).abs() < 1e-9 || (p.x.abs() - bx.abs()).abs() < 1e-9);
    }

    #[test]
    fn nonpositive_height_rejected() {
        assert!(matches!(reduce_f64(0.0, 0.0, 0.0, P), Err(Error::NonPositiveHeight(_))));
        assert!(matches!(reduce_f64(0.0, -1.0, 0.0, P), Err(Error::NonPositiveHeight(_))));
    }

    #[test]
    fn precision_exhaustion_is_reported() {
        let g = GroupElement::unipotent(&Real::from_f64(2f64.powi(60), 64));
        assert!(matches!(
            reduce_coset(&g, DEFAULT_LOG2_TOLERANCE),
            Err(Error::PrecisionExhausted { .. })
        ));
    }

    #[test]
    fn invariant_height_examples() {
        assert_eq!(invariant_height(&red(0.0, 10.0, 0.0)), 10.0);
        assert_eq!(invariant_height(&red(0.0, 1.0, 0.0)), 1.0);
        // The corner ρ sits on |z| = 1; its height is √3/2.
        let p = red(0.5, 0.866025, 0.0);
        assert!(((p.x * p.x + p.y * p.y).sqrt() - 1.0).abs() < 1e-5);
        assert!((invariant_height(&p) - SQRT3_2).abs() < 1e-5);
    }

    #[test]
    fn half_open_strip() {
        let p = red(0.5, 3.0, 0.0);
        assert_eq!(p.x, -0.5);
    }

    #[test]
    fn word_reproduces_original_frame() {
        let (x, y, t) = (0.37, 0.003, 1.2);
        let p = red(x, y, t);
        let gamma = p.word.to_matrix();
        assert_eq!(gamma.det(), BigInt::one());
        let back = gamma.inverse().apply(&p.frame(P)).to_f64();
        let orig = frame_from_coordinates_f64(x, y, t);
        // Equality in PSL(2,R): up to an overall sign.
        let sign = if back[3] * orig[3] + back[2] * orig[2] < 0.0 { -1.0 } else { 1.0 };
        for (a, b) in back.iter().zip(&orig) {
            assert!((sign * a - b).abs() < 1e-9, "{back:?} vs {orig:?}");
        }
    }

    #[test]
    fn word_json_round_trip() {
        let p = red(17.3, 0.02, 0.4);
        let s = serde_json::to_string(&p).unwrap();
        let back: FramePoint = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys, ["theta", "word", "x", "y"]);
    }

    #[test]
    fn coset_convention() {
        // u(t)Γ is the point t + i with θ = 0.
        let g = GroupElement::unipotent(&Real::from_f64(2.25, P));
        let p = reduce_coset(&g, DEFAULT_LOG2_TOLERANCE).unwrap();
        assert_eq!((p.x, p.y, p.theta), (0.25, 1.0, 0.0));
    }

    #[test]
    fn fiber_distance_closed_form() {
        let a = FramePoint::from_reduced(0.0, 1.0, 0.0);
        for delta in [0.3f64, 1.0, PI] {
            let b = FramePoint::from_reduced(0.0, 1.0, delta);
            let c1 = 1f64.cosh();
            let s1 = 1f64.sinh();
            let expect = (c1 * c1 - s1 * s1 * delta.cos()).acosh();
            assert!((quotient_distance(&a, &b, 0) - expect).abs() < 1e-12);
        }
        // S fixes i and turns the frame by π, so these are one point of Γ\G.
        let b = FramePoint::from_reduced(0.0, 1.0, PI);
        assert!(quotient_distance(&a, &b, DEFAULT_WORD_BUDGET) < 1e-12);
        assert_eq!(quotient_distance(&a, &a, DEFAULT_WORD_BUDGET), 0.0);
    }

    #[test]
    fn nearby_interior_points_need_no_translate() {
        let a = FramePoint::from_reduced(0.0, 1.0, 0.0);
        let b = FramePoint::from_reduced(0.4, 1.0, 0.0);
        assert_eq!(quotient_distance(&a, &b, 0), quotient_distance(&a, &b, 8));
    }

    #[test]
    fn injectivity_radius_cusp_behaviour() {
        // The radius depends on the frame angle, so compare at a common θ.
        let base = injectivity_radius(&FramePoint::from_reduced(0.0, 1.0, 0.0), 8);
        assert!(base > 0.0);
        for (x, y) in [(0.3, 1.0), (0.2, 1.5), (-0.3, 2.0), (0.1, 5.0), (-0.45, 1.1)] {
            assert!(injectivity_radius(&FramePoint::from_reduced(x, y, 0.0), 8) <= base);
        }
        let r100 = injectivity_radius(&FramePoint::from_reduced(0.0, 100.0, 0.0), 8);
        assert!(r100 <= base / 50.0 * 2.0);
        let r2 = injectivity_radius(&FramePoint::from_reduced(0.0, 2.0, 0.0), 8);
        let r10 = injectivity_radius(&FramePoint::from_reduced(0.0, 10.0, 0.0), 8);
        assert!(r10 < r2);
        for y in [2.0, 5.0, 10.0, 30.0, 100.0] {
            for t in [0.0, 1.0, 3.0] {
                let r = injectivity_radius(&FramePoint::from_reduced(0.1, y, t), 8);
                let c = r * y;
                assert!((0.3..3.0).contains(&c), "r·y = {c} at y = {y}");
            }
        }
    }

    #[test]
    fn haar_sampler_examples() {
        let mut rng = seeded(11);
        let n = 200_000;
        let pts: Vec<_> = (0..n).map(|_| haar_sample(&mut rng)).collect();
        let above = pts.iter().filter(|p| p.y > 2.0).count() as f64 / n as f64;
        let expect = 1.0 - haar_height_cdf(2.0);
        assert!((expect - 0.5 / FUNDAMENTAL_AREA).abs() < 1e-12);
        let se = (expect * (1.0 - expect) / n as f64).sqrt();
        assert!((above - expect).abs() < 3.0 * se);
        let xm = pts.iter().map(|p| p.x).sum::<f64>() / n as f64;
        assert!(xm.abs() < 3.0 * (1.0 / 12.0 / n as f64).sqrt());
    }

    #[test]
    fn haar_sampler_acceptance_rate() {
        // Accepted fraction of the strip above √3/2 is vol(F)/(strip volume 2/√3).
        let strip = 2.0 / 3f64.sqrt();
        let rate = FUNDAMENTAL_AREA / strip;
        assert!((rate - 0.9069).abs() < 1e-4);
        let mut rng = seeded(3);
        let (mut tries, mut hits) = (0usize, 0usize);
        for _ in 0..100_000 {
            let x: f64 = rng.gen::<f64>() - 0.5;
            let y = SQRT3_2 / (1.0 - rng.gen::<f64>());
            tries += 1;
            if x * x + y * y >= 1.0 {
                hits += 1;
            }
        }
        let est = hits as f64 / tries as f64;
        assert!((est - rate).abs() < 3.0 * (rate * (1.0 - rate) / tries as f64).sqrt());
    }

    #[test]
    fn haar_integral_examples() {
        let mut rng = seeded(5);
        let (m, se) = haar_integral(&TestFunction::constant(1.0), 1000, &mut rng).unwrap();
        assert_eq!((m, se), (1.0, 0.0));
        let (m, _) = haar_integral(&TestFunction::height_cutoff(SQRT3_2), 1000, &mut rng).unwrap();
        assert_eq!(m, 0.0);
        assert!(haar_integral(&TestFunction::constant(1.0), 10, &mut rng).is_err());

        let f = TestFunction::bump(FramePoint::from_reduced(0.0, 1.0, 0.0), 0.2);
        let (a, sa) = haar_integral(&f, 20_000, &mut seeded(1)).unwrap();
        let (b, sb) = haar_integral(&f, 200_000, &mut seeded(2)).unwrap();
        assert!(a > 0.0);
        assert!((a - b).abs() < 3.0 * (sa * sa + sb * sb).sqrt());
    }

    #[test]
    fn bump_candidates_agree_with_word_ball() {
        let mut rng = seeded(9);
        for _ in 0..20 {
            let c = haar_sample(&mut rng);
            if c.y > 3.0 {
                continue;
            }
            let f = TestFunction::bump(c.clone(), 0.6);
            for _ in 0..50 {
                let p = haar_sample(&mut rng);
                let brute = bump_profile(quotient_distance(&c, &p, 10) / 0.6);
                assert!((f.eval(&p) - brute).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn profile_lipschitz_value() {
        // max |profile'| is attained where 3s⁴ = 1.
        let s: f64 = 3f64.powf(-0.25);
        let den = 1.0 - s * s;
        let exact = 2.0 * s / (den * den) * bump_profile(s);
        assert!(profile_lipschitz() >= exact && profile_lipschitz() < exact * 1.01);
    }

    #[test]
    fn chi_square_on_exact_quantiles_is_zero() {
        let bins = 10;
        let (stat, dof) = height_chi_square(&[], bins);
        assert_eq!(dof, 9);
        assert!(stat.is_nan() || stat == 0.0);
        assert!((haar_height_cdf(1e15) - 1.0).abs() < 1e-12);
    }

    fn random_gamma(rng: &mut crate::rng::Rng, len: usize) -> [i64; 4] {
        let gens: [[i64; 4]; 3] = [[1, 1, 0, 1], [1, -1, 0, 1], [0, -1, 1, 0]];
        let mut m = [1, 0, 0, 1];
        for _ in 0..len {
            m = small_mul(&gens[rng.gen_range(0..3)], &m);
        }
        m
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn gamma_invariance(x in -3.0f64..3.0, y in 0.05f64..4.0, t in 0.0f64..6.28, seed in 0u64..1000) {
            let mut rng = seeded(seed);
            let len = rng.gen_range(0..=5);
            let g = random_gamma(&mut rng, len);
            let h = frame_from_coordinates_f64(x, y, t);
            let gh = small_apply(&g, &h);
            let frame = Frame {
                a: Real::from_f64(gh[0], P), b: Real::from_f64(gh[1], P),
                c: Real::from_f64(gh[2], P), d: Real::from_f64(gh[3], P),
            };
            let p1 = reduce_frame(&frame, DEFAULT_LOG2_TOLERANCE).unwrap();
            let p0 = red(x, y, t);
            let near_edge = (p0.x.abs() - 0.5).abs() < 1e-6 || ((p0.x * p0.x + p0.y * p0.y) - 1.0).abs() < 1e-6;
            if !near_edge {
                prop_assert!((p0.x - p1.x).abs() < 1e-9 && (p0.y - p1.y).abs() < 1e-9);
            }
            let center = FramePoint::from_reduced(0.1, 1.2, 0.5);
            for f in [TestFunction::bump(center, 0.5), TestFunction::height_cutoff(2.0)] {
                prop_assert!((f.eval(&p0) - f.eval(&p1)).abs() < 1e-7);
            }
        }

        #[test]
        fn reduce_is_idempotent(x in -3.0f64..3.0, y in 0.01f64..4.0, t in 0.0f64..6.28) {
            let p = red(x, y, t);
            let q = red(p.x, p.y, p.theta);
            prop_assert_eq!((p.x, p.y, p.theta), (q.x, q.y, q.theta));
            prop_assert!(q.word.is_empty());
            prop_assert!(p.x >= -0.5 && p.x < 0.5);
            prop_assert!(p.x * p.x + p.y * p.y >= 1.0 - 1e-12);
            prop_assert!((0.0..TAU).contains(&p.theta));
        }

        #[test]
        fn word_length_is_logarithmic(x in -50.0f64..50.0, ly in -12.0f64..0.0) {
            let y = ly.exp();
            let p = red(x, y, 0.0);
            let bound = 4.0 * ((1.0 / y).ln() + x.abs().max(1.0).ln()) + 4.0;
            prop_assert!((p.word.len() as f64) <= bound);
        }

        #[test]
        fn quotient_distance_metric_axioms(
            a in (-0.5f64..0.5, 0.9f64..3.0, 0.0f64..6.28),
            b in (-0.5f64..0.5, 0.9f64..3.0, 0.0f64..6.28),
            c in (-0.5f64..0.5, 0.9f64..3.0, 0.0f64..6.28),
        ) {
            let [pa, pb, pc] = [a, b, c].map(|(x, y, t)| red(x, y, t));
            let dab = quotient_distance(&pa, &pb, 6);
            let dba = quotient_distance(&pb, &pa, 6);
            let dbc = quotient_distance(&pb, &pc, 6);
            let dac = quotient_distance(&pa, &pc, 6);
            prop_assert!((dab - dba).abs() < 1e-9);
            prop_assert!(dac <= dab + dbc + 1e-9);
        }
    }
}
