//! Complex polynomials, finite Laurent polynomials and truncated double
//! series in `(1/z, 1/w̄)`.
//!
//! Everything here is immutable value arithmetic over `Complex64`. The
//! root finder is a simultaneous (Aberth–Ehrlich) iteration started from a
//! seeded, perturbed circle so repeated runs return identical roots.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Library-wide default absolute tolerance on unit-scaled data.
pub const DEFAULT_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Dense polynomial `Σ c_k ζ^k`. The highest stored coefficient is nonzero
/// unless the polynomial is identically zero (empty storage).
#[derive(Clone, Debug, PartialEq, Default)]
pub struct CPoly {
    coeffs: Vec<Complex64>,
}

impl CPoly {
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        while coeffs.last().is_some_and(|c| *c == ZERO) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: Complex64) -> Self {
        Self::new(vec![c])
    }

    /// `c ζ^k`
    pub fn monomial(c: Complex64, k: usize) -> Self {
        let mut v = vec![ZERO; k + 1];
        v[k] = c;
        Self::new(v)
    }

    /// `lead · Π (ζ − r)`
    pub fn from_roots(lead: Complex64, roots: &[Complex64]) -> Self {
        let mut p = Self::constant(lead);
        for &r in roots {
            p = &p * &Self::new(vec![-r, ONE]);
        }
        p
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> Complex64 {
        self.coeffs.get(k).copied().unwrap_or(ZERO)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn leading(&self) -> Complex64 {
        self.coeffs.last().copied().unwrap_or(ZERO)
    }

    /// Largest coefficient modulus.
    pub fn scale(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, &c| acc * z + c)
    }

    /// `Σ |c_k| |z|^k`, the natural scale for a residual at `z`.
    pub fn eval_abs(&self, z: Complex64) -> f64 {
        let r = z.norm();
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Self::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    pub fn conj_coeffs(&self) -> Self {
        Self::new(self.coeffs.iter().map(|c| c.conj()).collect())
    }

    /// Drops trailing coefficients with modulus at most `tol · scale`.
    pub fn trimmed(&self, tol: f64) -> Self {
        let cut = tol * self.scale();
        let mut v = self.coeffs.clone();
        while v.last().is_some_and(|c| c.norm() <= cut) {
            v.pop();
        }
        Self::new(v)
    }

    pub fn roots(&self) -> Result<Vec<Complex64>> {
        poly_roots(self, &RootOptions::default())
    }
}

impl fmt::Display for CPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate() {
            if *c == ZERO {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match k {
                0 => write!(f, "({c})")?,
                1 => write!(f, "({c})z")?,
                _ => write!(f, "({c})z^{k}")?,
            }
        }
        Ok(())
    }
}

impl Add for &CPoly {
    type Output = CPoly;
    fn add(self, rhs: &CPoly) -> CPoly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        CPoly::new((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl Sub for &CPoly {
    type Output = CPoly;
    fn sub(self, rhs: &CPoly) -> CPoly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        CPoly::new((0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl Neg for &CPoly {
    type Output = CPoly;
    fn neg(self) -> CPoly {
        self.scaled(-ONE)
    }
}

impl Mul for &CPoly {
    type Output = CPoly;
    fn mul(self, rhs: &CPoly) -> CPoly {
        if self.is_zero() || rhs.is_zero() {
            return CPoly::zero();
        }
        let mut out = vec![ZERO; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        CPoly::new(out)
    }
}

/// Knobs for [`poly_roots`].
#[derive(Clone, Debug)]
pub struct RootOptions {
    /// Accepted backward residual `|p(r)| ≤ tol · Σ|c_k||r|^k`.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_iter: 800, seed: 0x51ed_2701 }
    }
}

/// All roots of `p`, repeated according to multiplicity.
pub fn poly_roots(p: &CPoly, opts: &RootOptions) -> Result<Vec<Complex64>> {
    if p.coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    if p.degree() == 0 {
        return Err(Error::DegreeTooLow);
    }
    // exact zeros at the origin
    let zeros = p.coeffs.iter().take_while(|c| **c == ZERO).count();
    let mut roots = vec![ZERO; zeros];
    let q = CPoly::new(p.coeffs[zeros..].to_vec());
    if q.degree() == 0 {
        return Ok(roots);
    }
    roots.extend(aberth(&q, opts)?);
    Ok(roots)
}

fn aberth(p: &CPoly, opts: &RootOptions) -> Result<Vec<Complex64>> {
    let n = p.degree();
    let lead = p.leading();
    let monic = p.scaled(lead.inv());
    if n == 1 {
        return Ok(vec![-monic.coeff(0)]);
    }
    let dp = monic.derivative();
    let eps = f64::EPSILON;

    let radius = monic.coeff(0).norm().powf(1.0 / n as f64).max(1e-3);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let offset: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let jitter: f64 = rng.random_range(0.9..1.1);
            let ang = offset + std::f64::consts::TAU * (k as f64 + 0.25 * rng.random::<f64>()) / n as f64;
            Complex64::from_polar(radius * jitter, ang)
        })
        .collect();
    let mut done = vec![false; n];

    for _ in 0..opts.max_iter {
        let mut all = true;
        for i in 0..n {
            if done[i] {
                continue;
            }
            let zi = z[i];
            let pz = monic.eval(zi);
            if pz.norm() <= 4.0 * eps * monic.eval_abs(zi) {
                done[i] = true;
                continue;
            }
            let ratio = pz / dp.eval(zi);
            let s: Complex64 = (0..n).filter(|&j| j != i).map(|j| (zi - z[j]).inv()).sum();
            let w = ratio / (ONE - ratio * s);
            if !w.re.is_finite() || !w.im.is_finite() {
                // collision with a neighbour; nudge and keep going
                z[i] = zi + Complex64::new(1e-8, 1e-8) * (1.0 + zi.norm());
                all = false;
                continue;
            }
            z[i] = zi - w;
            if w.norm() <= 2.0 * eps * z[i].norm() {
                done[i] = true;
            } else {
                all = false;
            }
        }
        if all {
            break;
        }
    }

    let residual = z
        .iter()
        .map(|&r| monic.eval(r).norm() / monic.eval_abs(r).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    if residual > opts.tol || !residual.is_finite() {
        return Err(Error::NoConvergence { iterations: opts.max_iter, residual });
    }
    Ok(z)
}

/// Classical resultant with the convention
/// `Res(p, q) = lc(p)^{deg q} · Π q(roots of p)`.
///
/// Two constants give 1.
pub fn sylvester_resultant(p: &CPoly, q: &CPoly) -> Result<Complex64> {
    if p.is_zero() || q.is_zero() {
        return Err(Error::InvalidArgument("resultant of the zero polynomial".into()));
    }
    let (m, n) = (p.degree(), q.degree());
    if m == 0 && n == 0 {
        return Ok(ONE);
    }
    if m == 0 {
        return Ok(p.leading().powu(n as u32));
    }
    let roots = p.roots()?;
    let prod = roots.iter().fold(ONE, |acc, &r| acc * q.eval(r));
    Ok(p.leading().powu(n as u32) * prod)
}

/// Determinant of the Sylvester matrix of `p` and `q` with formal degrees
/// `dp ≥ deg p`, `dq ≥ deg q`. With exact degrees this equals
/// [`sylvester_resultant`].
pub fn sylvester_determinant_formal(p: &CPoly, q: &CPoly, dp: usize, dq: usize) -> Complex64 {
    let size = dp + dq;
    if size == 0 {
        return ONE;
    }
    let mut m = DMatrix::<Complex64>::zeros(size, size);
    for row in 0..dq {
        for k in 0..=dp {
            m[(row, row + k)] = p.coeff(dp - k);
        }
    }
    for row in 0..dp {
        for k in 0..=dq {
            m[(dq + row, row + k)] = q.coeff(dq - k);
        }
    }
    m.lu().determinant()
}

pub fn sylvester_determinant(p: &CPoly, q: &CPoly) -> Complex64 {
    sylvester_determinant_formal(p, q, p.degree(), q.degree())
}

/// Finite Laurent polynomial `Σ_{k=low}^{low+len-1} c_k ζ^k`, stored densely
/// from the lowest exponent.
#[derive(Clone, Debug, PartialEq)]
pub struct LaurentPoly {
    low: i32,
    coeffs: Vec<Complex64>,
}

impl LaurentPoly {
    pub fn new(low: i32, coeffs: Vec<Complex64>) -> Self {
        let mut p = Self { low, coeffs };
        p.normalize();
        p
    }

    pub fn zero() -> Self {
        Self { low: 0, coeffs: Vec::new() }
    }

    pub fn monomial(c: Complex64, k: i32) -> Self {
        Self::new(k, vec![c])
    }

    fn normalize(&mut self) {
        while self.coeffs.last().is_some_and(|c| *c == ZERO) {
            self.coeffs.pop();
        }
        let lead = self.coeffs.iter().take_while(|c| **c == ZERO).count();
        if lead == self.coeffs.len() {
            self.low = 0;
            self.coeffs.clear();
        } else if lead > 0 {
            self.coeffs.drain(..lead);
            self.low += lead as i32;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn low(&self) -> i32 {
        self.low
    }

    pub fn high(&self) -> i32 {
        self.low + self.coeffs.len() as i32 - 1
    }

    pub fn coeff(&self, k: i32) -> Complex64 {
        let i = (k - self.low) as isize;
        if i < 0 {
            return ZERO;
        }
        self.coeffs.get(i as usize).copied().unwrap_or(ZERO)
    }

    /// `(exponent, coefficient)` for every stored nonzero term.
    pub fn terms(&self) -> impl Iterator<Item = (i32, Complex64)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != ZERO)
            .map(move |(i, &c)| (self.low + i as i32, c))
    }

    /// Coefficient of `ζ^{-1}`.
    pub fn residue(&self) -> Complex64 {
        self.coeff(-1)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let body = self.coeffs.iter().rev().fold(ZERO, |acc, &c| acc * z + c);
        body * z.powi(self.low)
    }

    pub fn derivative(&self) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        Self::new(
            self.low - 1,
            self.coeffs.iter().enumerate().map(|(i, &c)| c * (self.low + i as i32) as f64).collect(),
        )
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Self::new(self.low, self.coeffs.iter().map(|&c| c * s).collect())
    }

    pub fn powu(&self, n: u32) -> Self {
        (0..n).fold(Self::monomial(ONE, 0), |acc, _| &acc * self)
    }
}

impl From<&CPoly> for LaurentPoly {
    fn from(p: &CPoly) -> Self {
        LaurentPoly::new(0, p.coeffs.clone())
    }
}

impl Add for &LaurentPoly {
    type Output = LaurentPoly;
    fn add(self, rhs: &LaurentPoly) -> LaurentPoly {
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        let low = self.low.min(rhs.low);
        let high = self.high().max(rhs.high());
        LaurentPoly::new(low, (low..=high).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl Sub for &LaurentPoly {
    type Output = LaurentPoly;
    fn sub(self, rhs: &LaurentPoly) -> LaurentPoly {
        self + &rhs.scaled(-ONE)
    }
}

impl Mul for &LaurentPoly {
    type Output = LaurentPoly;
    fn mul(self, rhs: &LaurentPoly) -> LaurentPoly {
        if self.is_zero() || rhs.is_zero() {
            return LaurentPoly::zero();
        }
        let mut out = vec![ZERO; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        LaurentPoly::new(self.low + rhs.low, out)
    }
}

/// Reflection in the unit circle, `p*(ζ) = conj(p(1/ζ̄))`.
pub trait Reflect {
    fn reflect(&self) -> LaurentPoly;
}

impl Reflect for LaurentPoly {
    fn reflect(&self) -> LaurentPoly {
        if self.is_zero() {
            return LaurentPoly::zero();
        }
        LaurentPoly::new(-self.high(), self.coeffs.iter().rev().map(|c| c.conj()).collect())
    }
}

impl Reflect for CPoly {
    fn reflect(&self) -> LaurentPoly {
        LaurentPoly::from(self).reflect()
    }
}

/// Truncated double series `Σ_{k,j≤K} c_{kj} z^{-k-1} w̄^{-j-1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct BiSeries {
    order: usize,
    data: Vec<Complex64>,
}

impl BiSeries {
    pub fn zeros(order: usize) -> Self {
        Self { order, data: vec![ZERO; (order + 1) * (order + 1)] }
    }

    /// Builds from a row-major `(K+1)×(K+1)` grid.
    pub fn from_grid(grid: &[Vec<Complex64>]) -> Result<Self> {
        let order = grid.len().checked_sub(1).ok_or_else(|| Error::InvalidArgument("empty grid".into()))?;
        if grid.iter().any(|row| row.len() != order + 1) {
            return Err(Error::InvalidArgument("grid must be square".into()));
        }
        Ok(Self { order, data: grid.iter().flatten().copied().collect() })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, k: usize, j: usize) -> Complex64 {
        self.data[k * (self.order + 1) + j]
    }

    pub fn set(&mut self, k: usize, j: usize, v: Complex64) {
        self.data[k * (self.order + 1) + j] = v;
    }

    pub fn to_grid(&self) -> Vec<Vec<Complex64>> {
        self.data.chunks(self.order + 1).map(|r| r.to_vec()).collect()
    }

    pub fn truncate(&self, order: usize) -> Self {
        let order = order.min(self.order);
        let mut out = Self::zeros(order);
        for k in 0..=order {
            for j in 0..=order {
                out.set(k, j, self.get(k, j));
            }
        }
        out
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Self { order: self.order, data: self.data.iter().map(|&c| c * s).collect() }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!(self.order, rhs.order, "series orders differ");
        Self { order: self.order, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }

    /// Truncated product. Every term carries at least one power of each
    /// variable, so `(k1, j1)·(k2, j2)` lands on `(k1+k2+1, j1+j2+1)`.
    pub fn mul(&self, rhs: &Self) -> Self {
        let order = self.order.min(rhs.order);
        let mut out = Self::zeros(order);
        for k1 in 0..order {
            for j1 in 0..order {
                let a = self.get(k1, j1);
                if a == ZERO {
                    continue;
                }
                for k2 in 0..order - k1 {
                    for j2 in 0..order - j1 {
                        let idx = (k1 + k2 + 1) * (order + 1) + j1 + j2 + 1;
                        out.data[idx] += a * rhs.get(k2, j2);
                    }
                }
            }
        }
        out
    }

    /// `1 − exp(−m)` through order K. The Taylor sum is finite because the
    /// n-th power has no terms below `(n−1, n−1)`.
    pub fn one_minus_exp_neg(&self) -> Self {
        let neg = self.scaled(-ONE);
        let mut term = neg.clone();
        let mut acc = neg.clone();
        for n in 2..=self.order + 1 {
            term = term.mul(&neg).scaled(Complex64::new(1.0 / n as f64, 0.0));
            acc = acc.add(&term);
        }
        acc.scaled(-ONE)
    }

    /// `−log(1 − b)` through order K, the inverse of [`Self::one_minus_exp_neg`].
    pub fn neg_log_one_minus(&self) -> Self {
        let mut term = self.clone();
        let mut acc = self.clone();
        for n in 2..=self.order + 1 {
            term = term.mul(self);
            acc = acc.add(&term.scaled(Complex64::new(1.0 / n as f64, 0.0)));
        }
        acc
    }
}

/// Two-variable polynomial `Σ c_{pq} z^p y^q`.
#[derive(Clone, Debug, PartialEq)]
pub struct BiPoly {
    coeffs: Vec<Vec<Complex64>>,
}

impl BiPoly {
    /// `coeffs[p][q]` multiplies `z^p y^q`; rows must have equal length.
    pub fn new(coeffs: Vec<Vec<Complex64>>) -> Self {
        let width = coeffs.iter().map(Vec::len).max().unwrap_or(0);
        let coeffs = coeffs
            .into_iter()
            .map(|mut r| {
                r.resize(width, ZERO);
                r
            })
            .collect();
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[Vec<Complex64>] {
        &self.coeffs
    }

    pub fn coeff(&self, p: usize, q: usize) -> Complex64 {
        self.coeffs.get(p).and_then(|r| r.get(q)).copied().unwrap_or(ZERO)
    }

    pub fn eval(&self, z: Complex64, y: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(ZERO, |acc, row| acc * z + row.iter().rev().fold(ZERO, |a, &c| a * y + c))
    }

    /// Degrees in `(z, y)` after dropping coefficients with modulus `≤ tol·max`.
    pub fn degrees(&self, tol: f64) -> (usize, usize) {
        let cut = tol * self.coeffs.iter().flatten().map(|c| c.norm()).fold(0.0, f64::max);
        let mut dz = 0;
        let mut dy = 0;
        for (p, row) in self.coeffs.iter().enumerate() {
            for (q, c) in row.iter().enumerate() {
                if c.norm() > cut {
                    dz = dz.max(p);
                    dy = dy.max(q);
                }
            }
        }
        (dz, dy)
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Self::new(self.coeffs.iter().map(|r| r.iter().map(|&c| c * s).collect()).collect())
    }

    /// Maximum coefficient difference against `other`.
    pub fn max_diff(&self, other: &Self) -> f64 {
        let rows = self.coeffs.len().max(other.coeffs.len());
        let cols = self
            .coeffs
            .first()
            .map_or(0, Vec::len)
            .max(other.coeffs.first().map_or(0, Vec::len));
        let mut m: f64 = 0.0;
        for p in 0..rows {
            for q in 0..cols {
                m = m.max((self.coeff(p, q) - other.coeff(p, q)).norm());
            }
        }
        m
    }
}
