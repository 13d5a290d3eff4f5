//! Exact rational sl2-triples and the weight decomposition of `sl_n` under them.
//!
//! Everything here is over `Q` with zero tolerance. For a nilpotent `X` the
//! Jacobson–Morozov completion `(H, X, Y)` is obtained by two linear solves:
//!
//! 1. `H` with `[H, X] = 2X` and `H ∈ im(ad X)`. The image of `ad X` is the
//!    trace-form orthogonal of the centralizer `z(X)`, so the second
//!    condition is the linear system `tr(H K) = 0` for `K` in a basis of `z(X)`.
//! 2. `Y` with `[X, Y] = H` and `[H, Y] = -2Y`, unique once `H` is fixed.
//!
//! `H` is not unique. The tie-break is the RREF particular solution with all
//! free variables zero, unknowns ordered diagonal entries first, then the
//! off-diagonal entries row by row; this makes `H` diagonal whenever a
//! diagonal solution exists.
//!
//! Each irreducible component of `ad` is spanned by `w_0, …, w_m` with
//! `ad(X) w_l = l·w_{l-1}`, so that `Ad(exp tX) w_l = Σ_k C(l,k) t^{l-k} w_k`
//! and the coefficient of `w_0` in `Ad(exp tX) v` is `Σ_l c_l t^l`.

use std::fmt;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type Rational = BigRational;

fn q(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Square matrix over `Q`, row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RatMatrix {
    n: usize,
    entries: Vec<Rational>,
}

impl RatMatrix {
    pub fn zeros(n: usize) -> Self {
        RatMatrix {
            n,
            entries: vec![Rational::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, Rational::one());
        }
        m
    }

    /// `E_{ij}` (0-based).
    pub fn elementary(n: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(n);
        m.set(i, j, Rational::one());
        m
    }

    pub fn from_i64(n: usize, rows: &[i64]) -> Result<Self> {
        if rows.len() != n * n {
            return Err(Error::DimensionMismatch { left: n, right: (rows.len() as f64).sqrt() as usize });
        }
        Ok(RatMatrix {
            n,
            entries: rows.iter().map(|&v| q(v)).collect(),
        })
    }

    pub fn from_rationals(n: usize, entries: Vec<Rational>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch { left: n, right: (entries.len() as f64).sqrt() as usize });
        }
        Ok(RatMatrix { n, entries })
    }

    /// Exact image of a matrix of doubles (every finite double is rational).
    pub fn from_f64(n: usize, rows: &[f64]) -> Result<Self> {
        let entries = rows
            .iter()
            .map(|&v| Rational::from_float(v).ok_or_else(|| Error::InvalidArgument(format!("non-finite entry {v}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::from_rationals(n, entries)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &Rational {
        &self.entries[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Rational) {
        self.entries[i * self.n + j] = v;
    }

    pub fn entries(&self) -> &[Rational] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Zero::is_zero)
    }

    pub fn trace(&self) -> Rational {
        (0..self.n).map(|i| self.get(i, i).clone()).sum()
    }

    fn check(&self, o: &RatMatrix) -> Result<()> {
        if self.n != o.n {
            return Err(Error::DimensionMismatch { left: self.n, right: o.n });
        }
        Ok(())
    }

    pub fn mul(&self, o: &RatMatrix) -> Result<RatMatrix> {
        self.check(o)?;
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let b = o.get(k, j);
                    if !b.is_zero() {
                        out.entries[i * n + j] += a * b;
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, o: &RatMatrix) -> Result<RatMatrix> {
        self.check(o)?;
        Ok(RatMatrix {
            n: self.n,
            entries: self.entries.iter().zip(&o.entries).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, o: &RatMatrix) -> Result<RatMatrix> {
        self.check(o)?;
        Ok(RatMatrix {
            n: self.n,
            entries: self.entries.iter().zip(&o.entries).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn scale(&self, s: &Rational) -> RatMatrix {
        RatMatrix {
            n: self.n,
            entries: self.entries.iter().map(|a| a * s).collect(),
        }
    }

    /// `[self, o] = self·o − o·self`.
    pub fn bracket(&self, o: &RatMatrix) -> Result<RatMatrix> {
        self.mul(o)?.sub(&o.mul(self)?)
    }

    pub fn pow(&self, k: u32) -> RatMatrix {
        let mut out = Self::identity(self.n);
        for _ in 0..k {
            out = out.mul(self).expect("same size");
        }
        out
    }

    /// `exp(self)` for nilpotent `self`, a finite sum.
    pub fn exp_nilpotent(&self) -> Result<RatMatrix> {
        if !self.pow(self.n as u32).is_zero() {
            return Err(Error::NotNilpotent);
        }
        let mut out = Self::identity(self.n);
        let mut term = Self::identity(self.n);
        for k in 1..self.n {
            term = term.mul(self)?.scale(&Rational::new(BigInt::one(), BigInt::from(k)));
            out = out.add(&term)?;
        }
        Ok(out)
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j).to_f64().unwrap_or(f64::NAN))
    }

    /// Coordinates in [`sl_basis`]: off-diagonal entries in order, with the
    /// diagonal `diag(m_1..m_n)` written as `Σ c_k (E_kk − E_{k+1,k+1})`, `c_k = m_1 + … + m_k`.
    pub fn sl_coordinates(&self) -> Vec<Rational> {
        let n = self.n;
        let mut out = Vec::with_capacity(n * n - 1);
        let mut partial = Rational::zero();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    out.push(self.get(i, j).clone());
                } else if i + 1 < n {
                    partial += self.get(i, i);
                    out.push(partial.clone());
                }
            }
        }
        out
    }

    pub fn from_sl_coordinates(n: usize, coords: &[Rational]) -> RatMatrix {
        let basis = sl_basis(n);
        let mut out = Self::zeros(n);
        for (b, c) in basis.iter().zip(coords) {
            if !c.is_zero() {
                out = out.add(&b.scale(c)).expect("same size");
            }
        }
        out
    }
}

impl fmt::Debug for RatMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.n {
            if i > 0 {
                write!(f, "; ")?;
            }
            let row: Vec<String> = (0..self.n).map(|j| self.get(i, j).to_string()).collect();
            write!(f, "{}", row.join(" "))?;
        }
        write!(f, "]")
    }
}

/// Rational as a `{"num": "...", "den": "..."}` pair of decimal strings.
#[derive(Serialize, Deserialize)]
struct RationalForm {
    num: String,
    den: String,
}

fn to_form(r: &Rational) -> RationalForm {
    RationalForm {
        num: r.numer().to_string(),
        den: r.denom().to_string(),
    }
}

fn from_form<E: serde::de::Error>(f: &RationalForm) -> std::result::Result<Rational, E> {
    let num: BigInt = f.num.parse().map_err(E::custom)?;
    let den: BigInt = f.den.parse().map_err(E::custom)?;
    if den.is_zero() {
        return Err(E::custom("zero denominator"));
    }
    Ok(Rational::new(num, den))
}

impl Serialize for RatMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<RationalForm>> = (0..self.n)
            .map(|i| (0..self.n).map(|j| to_form(self.get(i, j))).collect())
            .collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for RatMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<RationalForm>> = Vec::deserialize(d)?;
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for row in &rows {
            if row.len() != n {
                return Err(D::Error::custom("matrix must be square"));
            }
            for f in row {
                entries.push(from_form::<D::Error>(f)?);
            }
        }
        Ok(RatMatrix { n, entries })
    }
}

fn serialize_rationals<S: Serializer>(v: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
    v.iter().map(to_form).collect::<Vec<_>>().serialize(s)
}

fn deserialize_rationals<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Rational>, D::Error> {
    Vec::<RationalForm>::deserialize(d)?
        .iter()
        .map(from_form::<D::Error>)
        .collect()
}

/// Basis of `sl_n`: `E_ij` (`i ≠ j`) and `E_ii − E_{i+1,i+1}`, in
/// lexicographic order of `(i, j)` with the diagonal difference at `(i, i)`.
pub fn sl_basis(n: usize) -> Vec<RatMatrix> {
    let mut out = Vec::with_capacity(n * n - 1);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                out.push(RatMatrix::elementary(n, i, j));
            } else if i + 1 < n {
                let mut m = RatMatrix::elementary(n, i, i);
                m.set(i + 1, i + 1, q(-1));
                out.push(m);
            }
        }
    }
    out
}

/// The `(n²−1)`-square matrix of `ad(m)` in [`sl_basis`] coordinates.
pub fn ad_matrix(m: &RatMatrix) -> Vec<Vec<Rational>> {
    let basis = sl_basis(m.n);
    let cols: Vec<Vec<Rational>> = basis
        .iter()
        .map(|b| m.bracket(b).expect("same size").sl_coordinates())
        .collect();
    let d = basis.len();
    (0..d).map(|r| (0..d).map(|c| cols[c][r].clone()).collect()).collect()
}

/// Reduced row echelon form in place; returns the pivot columns.
fn rref(rows: &mut [Vec<Rational>], ncols: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        if r == rows.len() {
            break;
        }
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let inv = rows[r][c].recip();
        for v in rows[r].iter_mut() {
            *v *= &inv;
        }
        for i in 0..rows.len() {
            if i != r && !rows[i][c].is_zero() {
                let f = rows[i][c].clone();
                let (pivot_row, row) = if i < r {
                    let (a, b) = rows.split_at_mut(r);
                    (&b[0], &mut a[i])
                } else {
                    let (a, b) = rows.split_at_mut(i);
                    (&a[r], &mut b[0])
                };
                for (x, y) in row.iter_mut().zip(pivot_row) {
                    if !y.is_zero() {
                        *x -= &f * y;
                    }
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

/// Basis of `{x : A x = 0}` for `A` with `ncols` columns.
pub fn nullspace(a: &[Vec<Rational>], ncols: usize) -> Vec<Vec<Rational>> {
    let mut rows = a.to_vec();
    let pivots = rref(&mut rows, ncols);
    let free: Vec<usize> = (0..ncols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![Rational::zero(); ncols];
            v[f] = Rational::one();
            for (r, &p) in pivots.iter().enumerate() {
                v[p] = -rows[r][f].clone();
            }
            v
        })
        .collect()
}

/// The solution of `A x = b` with every free variable zero.
pub fn solve(a: &[Vec<Rational>], b: &[Rational], ncols: usize) -> Result<Vec<Rational>> {
    let mut rows: Vec<Vec<Rational>> = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| {
            let mut r = row.clone();
            r.push(rhs.clone());
            r
        })
        .collect();
    let pivots = rref(&mut rows, ncols + 1);
    if pivots.last() == Some(&ncols) {
        return Err(Error::Inconsistent("right-hand side is not in the column space".into()));
    }
    let mut x = vec![Rational::zero(); ncols];
    for (r, &p) in pivots.iter().enumerate() {
        x[p] = rows[r][ncols].clone();
    }
    Ok(x)
}

/// Exact sl2-triple `[H,X] = 2X`, `[H,Y] = −2Y`, `[X,Y] = H`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sl2Triple {
    pub h: RatMatrix,
    pub x: RatMatrix,
    pub y: RatMatrix,
}

impl Sl2Triple {
    /// Checks the three relations exactly.
    pub fn verify(&self) -> bool {
        let two = q(2);
        let check = || -> Result<bool> {
            Ok(self.h.bracket(&self.x)? == self.x.scale(&two)
                && self.h.bracket(&self.y)? == self.y.scale(&-two.clone())
                && self.x.bracket(&self.y)? == self.h)
        };
        check().unwrap_or(false)
    }

    pub fn dim(&self) -> usize {
        self.x.n
    }
}

/// Column order for the `H` solve: diagonal entries first, then off-diagonal row by row.
fn h_unknown_order(n: usize) -> Vec<(usize, usize)> {
    let mut order: Vec<(usize, usize)> = (0..n).map(|i| (i, i)).collect();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                order.push((i, j));
            }
        }
    }
    order
}

/// Rows of the linear map `M ↦ L(M)` on `gl_n` written over `unknowns`.
fn linear_rows(n: usize, unknowns: &[(usize, usize)], map: impl Fn(&RatMatrix) -> RatMatrix) -> Vec<Vec<Rational>> {
    let images: Vec<RatMatrix> = unknowns.iter().map(|&(i, j)| map(&RatMatrix::elementary(n, i, j))).collect();
    (0..n * n)
        .map(|e| images.iter().map(|m| m.entries[e].clone()).collect())
        .collect()
}

/// Completes a nilpotent `X ∈ sl_n(Q)` to an sl2-triple.
pub fn jacobson_morozov(x: &RatMatrix) -> Result<Sl2Triple> {
    let n = x.n;
    if x.is_zero() {
        return Err(Error::ZeroNilpotent);
    }
    if !x.trace().is_zero() {
        return Err(Error::NotTraceFree {
            trace: x.trace().to_f64().unwrap_or(f64::NAN),
        });
    }
    if !x.pow(n as u32).is_zero() {
        return Err(Error::NotNilpotent);
    }
    let order = h_unknown_order(n);
    let to_matrix = |v: &[Rational]| {
        let mut m = RatMatrix::zeros(n);
        for (&(i, j), c) in order.iter().zip(v) {
            m.set(i, j, c.clone());
        }
        m
    };

    // [H, X] = 2X
    let mut a = linear_rows(n, &order, |e| e.bracket(x).expect("same size"));
    let mut b: Vec<Rational> = x.scale(&q(2)).entries;
    // tr(H K) = 0 for K spanning the centralizer of X in gl_n (which contains I)
    let centralizer = nullspace(&linear_rows(n, &order, |e| x.bracket(e).expect("same size")), n * n);
    for k in &centralizer {
        let k = to_matrix(k);
        a.push(order.iter().map(|&(i, j)| k.get(j, i).clone()).collect());
        b.push(Rational::zero());
    }
    let h = to_matrix(&solve(&a, &b, n * n)?);

    // [X, Y] = H and [H, Y] = −2Y
    let mut a = linear_rows(n, &order, |e| x.bracket(e).expect("same size"));
    let mut b = h.entries.clone();
    a.extend(linear_rows(n, &order, |e| {
        h.bracket(e).expect("same size").add(&e.scale(&q(2))).expect("same size")
    }));
    b.extend(std::iter::repeat(Rational::zero()).take(n * n));
    let y = to_matrix(&solve(&a, &b, n * n)?);

    let triple = Sl2Triple { h, x: x.clone(), y };
    if !triple.verify() {
        return Err(Error::Inconsistent("bracket relations fail".into()));
    }
    Ok(triple)
}

/// One irreducible summand: `w_0` highest weight of weight `m = dim − 1`,
/// `ad(H) w_l = (m − 2l) w_l`, `ad(X) w_l = l·w_{l−1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub highest_weight: usize,
    pub basis: Vec<RatMatrix>,
}

impl Component {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightDecomposition {
    pub triple: Sl2Triple,
    pub components: Vec<Component>,
}

impl WeightDecomposition {
    pub fn dims(&self) -> Vec<usize> {
        self.components.iter().map(Component::dim).collect()
    }

    /// Exact coefficients of `v` in the component bases.
    pub fn coefficients(&self, v: &RatMatrix) -> Result<Vec<Vec<Rational>>> {
        let n = self.triple.dim();
        if v.n != n {
            return Err(Error::DimensionMismatch { left: n, right: v.n });
        }
        if !v.trace().is_zero() {
            return Err(Error::NotTraceFree {
                trace: v.trace().to_f64().unwrap_or(f64::NAN),
            });
        }
        let cols: Vec<Vec<Rational>> = self
            .components
            .iter()
            .flat_map(|c| c.basis.iter().map(RatMatrix::sl_coordinates))
            .collect();
        let d = cols.len();
        let a: Vec<Vec<Rational>> = (0..d).map(|r| cols.iter().map(|c| c[r].clone()).collect()).collect();
        let flat = solve(&a, &v.sl_coordinates(), d)?;
        let mut out = Vec::with_capacity(self.components.len());
        let mut k = 0;
        for c in &self.components {
            out.push(flat[k..k + c.dim()].to_vec());
            k += c.dim();
        }
        Ok(out)
    }
}

/// Splits `sl_n` into irreducible summands under the triple.
pub fn decompose_adjoint(triple: &Sl2Triple) -> Result<WeightDecomposition> {
    let n = triple.dim();
    let d = n * n - 1;
    let ad_h = ad_matrix(&triple.h);
    let ad_x = ad_matrix(&triple.x);
    let bound = 2 * n as i64;
    let mut eigen_total = 0;
    let mut components = Vec::new();
    for weight in (-bound..=bound).rev() {
        let shifted: Vec<Vec<Rational>> = ad_h
            .iter()
            .enumerate()
            .map(|(r, row)| {
                let mut row = row.clone();
                row[r] -= q(weight);
                row
            })
            .collect();
        let eigenspace = nullspace(&shifted, d);
        eigen_total += eigenspace.len();
        if weight < 0 || eigenspace.is_empty() {
            continue;
        }
        // highest weight vectors: ker ad(X) ∩ eigenspace, solved in eigenspace coordinates
        let k = eigenspace.len();
        let ad_x_on: Vec<Vec<Rational>> = (0..d)
            .map(|r| {
                (0..k)
                    .map(|c| {
                        ad_x[r]
                            .iter()
                            .zip(&eigenspace[c])
                            .filter(|(a, b)| !a.is_zero() && !b.is_zero())
                            .map(|(a, b)| a * b)
                            .sum()
                    })
                    .collect()
            })
            .collect();
        for coeffs in nullspace(&ad_x_on, k) {
            let mut w0 = vec![Rational::zero(); d];
            for (c, e) in coeffs.iter().zip(&eigenspace) {
                for (acc, x) in w0.iter_mut().zip(e) {
                    *acc += c * x;
                }
            }
            let m = weight as usize;
            let mut basis = vec![RatMatrix::from_sl_coordinates(n, &w0)];
            for l in 1..=m {
                let prev = basis.last().unwrap();
                let next = triple.y.bracket(prev)?.scale(&Rational::new(BigInt::one(), BigInt::from(m - l + 1)));
                basis.push(next);
            }
            components.push(Component {
                highest_weight: m,
                basis,
            });
        }
    }
    if eigen_total != d {
        return Err(Error::NonIntegerSpectrum);
    }
    let total: usize = components.iter().map(Component::dim).sum();
    if total != d {
        return Err(Error::NonIntegerSpectrum);
    }
    Ok(WeightDecomposition {
        triple: triple.clone(),
        components,
    })
}

/// Degrees `d_i(v) = max{l : c_l^{(i)} ≠ 0}` per component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeReport {
    #[serde(serialize_with = "serialize_nested", deserialize_with = "deserialize_nested")]
    pub coefficients: Vec<Vec<Rational>>,
    /// `None` where every coefficient of the component vanishes.
    pub degrees: Vec<Option<usize>>,
    /// `max_i d_i(v)`; `None` for `v = 0`.
    pub d: Option<usize>,
    /// Components realizing the maximum.
    pub maximizers: Vec<usize>,
}

fn serialize_nested<S: Serializer>(v: &[Vec<Rational>], s: S) -> std::result::Result<S::Ok, S::Error> {
    v.iter()
        .map(|row| row.iter().map(to_form).collect::<Vec<_>>())
        .collect::<Vec<_>>()
        .serialize(s)
}

fn deserialize_nested<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Vec<Rational>>, D::Error> {
    Vec::<Vec<RationalForm>>::deserialize(d)?
        .iter()
        .map(|row| row.iter().map(from_form::<D::Error>).collect())
        .collect()
}

pub fn d_of_vector(decomp: &WeightDecomposition, v: &RatMatrix) -> Result<DegreeReport> {
    let coefficients = decomp.coefficients(v)?;
    let degrees: Vec<Option<usize>> = coefficients
        .iter()
        .map(|c| c.iter().rposition(|x| !x.is_zero()))
        .collect();
    let d = degrees.iter().flatten().copied().max();
    let maximizers = match d {
        Some(m) => (0..degrees.len()).filter(|&i| degrees[i] == Some(m)).collect(),
        None => Vec::new(),
    };
    Ok(DegreeReport {
        coefficients,
        degrees,
        d,
        maximizers,
    })
}

/// `d_𝔥 = max_{v ∈ basis} d(v)`; zero vectors contribute nothing and an
/// all-zero basis gives 0.
pub fn d_h_compute(decomp: &WeightDecomposition, basis: &[RatMatrix]) -> Result<usize> {
    if basis.is_empty() {
        return Err(Error::EmptyBasis);
    }
    let mut best = 0;
    for v in basis {
        if let Some(d) = d_of_vector(decomp, v)?.d {
            best = best.max(d);
        }
    }
    Ok(best)
}

/// Coefficient of `w_0^{(i)}` in `Ad(exp tX) v` as a polynomial in `t`
/// (ascending powers); this is just the component's coefficient list.
pub fn highest_weight_polynomial(report: &DegreeReport, component: usize) -> Vec<Rational> {
    report.coefficients[component].clone()
}

/// Evaluates an ascending-power polynomial exactly.
pub fn eval_polynomial(coeffs: &[Rational], t: &Rational) -> Rational {
    coeffs.iter().rev().fold(Rational::zero(), |acc, c| acc * t + c)
}

/// The standard sl2 generators `E`, `H₀ = diag(1,−1)`, `F`.
pub fn sl2_standard() -> (RatMatrix, RatMatrix, RatMatrix) {
    (
        RatMatrix::from_i64(2, &[0, 1, 0, 0]).unwrap(),
        RatMatrix::from_i64(2, &[1, 0, 0, -1]).unwrap(),
        RatMatrix::from_i64(2, &[0, 0, 1, 0]).unwrap(),
    )
}

/// Regular nilpotent `Σ E_{i,i+1}` in `sl_n`.
pub fn regular_nilpotent(n: usize) -> RatMatrix {
    let mut m = RatMatrix::zeros(n);
    for i in 0..n.saturating_sub(1) {
        m.set(i, i + 1, Rational::one());
    }
    m
}

/// Minimal nilpotent `E_{1n}` in `sl_n`.
pub fn minimal_nilpotent(n: usize) -> RatMatrix {
    RatMatrix::elementary(n, 0, n - 1)
}

/// Exact JSON form of a list of rationals, exposed for CLI reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RationalList(
    #[serde(serialize_with = "serialize_rationals", deserialize_with = "deserialize_rationals")] pub Vec<Rational>,
);

/// `|r|` as a double, for diagnostics.
pub fn abs_f64(r: &Rational) -> f64 {
    r.abs().to_f64().unwrap_or(f64::INFINITY)
}
