//! Harmonic, complex, negative and exponential moments, plus recovery of
//! `P` and `Q` from a finite block of complex moments.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cpoly::{BiPoly, BiSeries, CPoly, LaurentPoly};
use crate::domain::PolyDomain;
use crate::error::{Error, Result};
use crate::par::{self, Exec};

/// Default relative threshold for [`detect_order`].
pub const ORDER_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `M₀` (real), `M₁..M_N`, and optionally `M₋₁..M₋J`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentVector {
    pub m0: f64,
    pub m: Vec<Complex64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neg: Option<Vec<Complex64>>,
}

impl MomentVector {
    pub fn new(m0: f64, m: Vec<Complex64>) -> Self {
        Self { m0, m, neg: None }
    }

    /// `N`, the index of the last stored positive moment.
    pub fn order(&self) -> usize {
        self.m.len()
    }

    /// `M_k` for `k ≥ 0`; zero beyond the stored range.
    pub fn get(&self, k: usize) -> Complex64 {
        if k == 0 {
            Complex64::new(self.m0, 0.0)
        } else {
            self.m.get(k - 1).copied().unwrap_or(ZERO)
        }
    }

    /// `M₋k` for `k ≥ 1`, if cached.
    pub fn get_neg(&self, k: usize) -> Option<Complex64> {
        self.neg.as_ref().and_then(|v| v.get(k - 1).copied())
    }

    pub fn with_negative(mut self, neg: Vec<Complex64>) -> Self {
        self.neg = Some(neg);
        self
    }

    /// Real coordinates `(M₀, Re M₁, Im M₁, …)`.
    pub fn to_real(&self) -> Vec<f64> {
        let mut v = vec![self.m0];
        for c in &self.m {
            v.push(c.re);
            v.push(c.im);
        }
        v
    }

    pub fn from_real(x: &[f64]) -> Self {
        let m = x[1..].chunks(2).map(|p| Complex64::new(p[0], p[1])).collect();
        Self::new(x[0], m)
    }
}

/// Richardson's formula, written as a convolution:
/// `M_k = Σ_s [B·A^k]_s ā_{s+k}` with `A = Σ a_j x^j`, `B = Σ (j+1) a_j x^j`.
pub fn harmonic_moments(d: &PolyDomain) -> MomentVector {
    let a = d.coeffs();
    let n = d.order();
    let all = richardson(a, n);
    MomentVector::new(all[0].re, all[1..].to_vec())
}

/// `M₀..M_kmax` from raw coefficients (no validation).
pub(crate) fn richardson(a: &[Complex64], kmax: usize) -> Vec<Complex64> {
    let n = a.len() - 1;
    let base = CPoly::new(a.to_vec());
    let weighted = CPoly::new(a.iter().enumerate().map(|(j, &c)| c * (j + 1) as f64).collect());
    let mut acc = weighted;
    let mut out = Vec::with_capacity(kmax + 1);
    for k in 0..=kmax {
        let mut s = ZERO;
        for idx in 0..=n.saturating_sub(k) {
            if idx + k > n {
                break;
            }
            s += acc.coeff(idx) * a[idx + k].conj();
        }
        out.push(s);
        if k < kmax {
            acc = &acc * &base;
        }
    }
    out
}

/// Square grid `M_{kj} = (1/π) ∫_Ω z^k z̄^j dm`, `0 ≤ k, j ≤ K`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMomentGrid(pub BiSeries);

impl ComplexMomentGrid {
    pub fn from_grid(grid: &[Vec<Complex64>]) -> Result<Self> {
        Ok(Self(BiSeries::from_grid(grid)?))
    }

    pub fn order(&self) -> usize {
        self.0.order()
    }

    pub fn get(&self, k: usize, j: usize) -> Complex64 {
        self.0.get(k, j)
    }

    pub fn hermitian_defect(&self) -> f64 {
        hermitian_defect(&self.0)
    }
}

/// Residue of `f^k (f*)^{j+1} f′ / (j+1)` at the origin.
pub fn complex_moments(d: &PolyDomain, order: usize) -> ComplexMomentGrid {
    complex_moments_with(d, order, Exec::default())
}

pub fn complex_moments_with(d: &PolyDomain, order: usize, exec: Exec) -> ComplexMomentGrid {
    let f = LaurentPoly::from(d.map());
    let fs = d.reflected();
    let df = LaurentPoly::from(d.map_derivative());
    let size = order + 1;
    let fk: Vec<LaurentPoly> = (0..size).map(|k| f.powu(k as u32)).collect();
    let fsj: Vec<LaurentPoly> = (0..size).map(|j| fs.powu(j as u32 + 1)).collect();
    let entries = par::map(exec, size * size, |idx| {
        let (k, j) = (idx / size, idx % size);
        (&(&fk[k] * &fsj[j]) * &df).residue() / (j + 1) as f64
    });
    let mut s = BiSeries::zeros(order);
    for (idx, v) in entries.into_iter().enumerate() {
        s.set(idx / size, idx % size, v);
    }
    ComplexMomentGrid(s)
}

/// `M₋k = (1/2πi) ∮ z^{-k} z̄ dz`, `k = 1..J`, by the trapezoid rule on `n`
/// samples of the unit circle.
pub fn negative_moments(d: &PolyDomain, count: usize, samples: usize) -> Result<Vec<Complex64>> {
    negative_moments_with(d, count, samples, Exec::default())
}

pub fn negative_moments_with(d: &PolyDomain, count: usize, samples: usize, exec: Exec) -> Result<Vec<Complex64>> {
    let s = d.sample_boundary(samples)?;
    // f(ζ)^{-k} f*(ζ) f′(ζ) ζ, with f* = conj(f) on the circle
    let base: Vec<(Complex64, Complex64)> = par::map(exec, samples, |j| {
        let u = s.zeta[j];
        let z = s.z[j];
        (z.inv(), z.conj() * d.df(u) * u)
    });
    Ok(par::map(exec, count, |k| {
        let k = k as i32 + 1;
        par::sum(Exec::Sequential, samples, |j| base[j].0.powi(k) * base[j].1) / samples as f64
    }))
}

/// Moments with the negative cache filled.
pub fn moments_with_negative(d: &PolyDomain, count: usize, samples: usize) -> Result<MomentVector> {
    Ok(harmonic_moments(d).with_negative(negative_moments(d, count, samples)?))
}

/// Truncated Laurent series `Σ_{k=-J}^{N} M_k z^{-k-1}` of the Schwarz
/// function. Fails when the negative-index tail does not decay at `z`.
pub fn schwarz_series_eval(mv: &MomentVector, z: Complex64) -> Result<Complex64> {
    if z == ZERO {
        return Err(Error::Divergent { z, ratio: f64::INFINITY });
    }
    let neg = mv.neg.as_deref().unwrap_or(&[]);
    let mut s = ZERO;
    for k in 0..=mv.order() {
        s += mv.get(k) / z.powi(k as i32 + 1);
    }
    let terms: Vec<f64> = neg.iter().enumerate().map(|(i, m)| m.norm() * z.norm().powi(i as i32)).collect();
    if terms.len() >= 8 {
        let half = terms.len() / 2;
        let head = terms[..half].iter().cloned().fold(0.0, f64::max);
        let tail = terms[half..].iter().cloned().fold(0.0, f64::max);
        if head > 0.0 && tail > 0.0 {
            let ratio = (tail / head).powf(1.0 / half as f64);
            if ratio >= 1.0 {
                return Err(Error::Divergent { z, ratio });
            }
        }
    }
    for (i, m) in neg.iter().enumerate() {
        s += m * z.powi(i as i32);
    }
    Ok(s)
}

/// Exponential moments `B_{kj}` generated by `1 − E`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpMomentMatrix(pub BiSeries);

impl ExpMomentMatrix {
    pub fn order(&self) -> usize {
        self.0.order()
    }

    pub fn get(&self, k: usize, j: usize) -> Complex64 {
        self.0.get(k, j)
    }

    pub fn hermitian_defect(&self) -> f64 {
        hermitian_defect(&self.0)
    }

    /// Leading `(n+1)×(n+1)` block as a matrix.
    pub fn block(&self, n: usize) -> DMatrix<Complex64> {
        DMatrix::from_fn(n + 1, n + 1, |k, j| self.0.get(k, j))
    }

    /// Real parts of the leading principal minors of orders `1..=K+1`.
    pub fn leading_minors(&self) -> Vec<f64> {
        (0..=self.order()).map(|n| self.block(n).determinant().re).collect()
    }
}

fn hermitian_defect(s: &BiSeries) -> f64 {
    let n = s.order();
    let mut worst: f64 = 0.0;
    for k in 0..=n {
        for j in 0..=n {
            worst = worst.max((s.get(k, j) - s.get(j, k).conj()).norm());
        }
    }
    worst
}

pub fn exp_moments(m: &ComplexMomentGrid) -> ExpMomentMatrix {
    ExpMomentMatrix(m.0.one_minus_exp_neg())
}

/// Determinant test scale for the block of size `n+1`. Diagonal entries
/// can vanish exactly (the disk has `B₁₁ = 0`), so each is floored by
/// `B₀₀^{k+1}`, which carries the same length dimension.
fn minor_scale(b: &ExpMomentMatrix, n: usize) -> f64 {
    let b00 = b.get(0, 0).norm();
    (0..=n).map(|k| b.get(k, k).norm().max(b00.powi(k as i32 + 1))).product()
}

/// Smallest `N` for which the leading `(N+1)×(N+1)` block is singular.
pub fn detect_order(b: &ExpMomentMatrix, tol: f64) -> Result<usize> {
    for n in 0..=b.order() {
        let det = b.block(n).determinant().norm();
        if det <= tol * minor_scale(b, n) {
            return Ok(n);
        }
    }
    Err(Error::NotFinitelyDetermined { order: b.order() })
}

/// `P`, `Q` and the factors `P₀..P_{N-1}` of a quadrature domain.
#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructionResult {
    pub order: usize,
    /// Monic of degree `order`.
    pub p: CPoly,
    /// `q.coeff(p, q)` multiplies `z^p w̄^q`.
    pub q: BiPoly,
    /// `pk[k]` has degree `k` exactly.
    pub pk: Vec<CPoly>,
    pub b: ExpMomentMatrix,
}

impl ReconstructionResult {
    /// Coefficient residual of `Q = P P̄ − Σ P_k P̄_k`.
    pub fn factorization_residual(&self) -> f64 {
        let n = self.order;
        let mut worst: f64 = 0.0;
        for i in 0..=n {
            for j in 0..=n {
                let mut v = self.p.coeff(i) * self.p.coeff(j).conj();
                for pk in &self.pk {
                    v -= pk.coeff(i) * pk.coeff(j).conj();
                }
                worst = worst.max((v - self.q.coeff(i, j)).norm());
            }
        }
        worst
    }

    /// Numerator of the exterior Cauchy transform over `P`.
    pub fn cauchy_numerator(&self) -> CPoly {
        match self.pk.last() {
            Some(last) => last.scaled(last.leading().conj()),
            None => CPoly::zero(),
        }
    }

    /// Center and radius when the order is one.
    pub fn as_disk(&self) -> Option<(Complex64, f64)> {
        (self.order == 1).then(|| (-self.p.coeff(0), self.pk[0].leading().norm()))
    }
}

/// Recovers `P` from the nullspace of the exponential-moment block and `Q`
/// from the polynomial part of `P(z) P̄(w̄) Σ B_{kj} z^{-k-1} w̄^{-j-1}`.
pub fn reconstruct_pq(m: &ComplexMomentGrid, tol: f64) -> Result<ReconstructionResult> {
    let b = exp_moments(m);
    let n = detect_order(&b, tol)?;
    if n == 0 {
        return Err(Error::InvalidArgument("zero area: B₀₀ vanishes".into()));
    }
    let block = b.block(n);
    let svd = block.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let mut order: Vec<usize> = (0..=n).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let smax = svd.singular_values[order[n]];
    if svd.singular_values[order[1]] <= tol * smax {
        let dim = order.iter().filter(|&&i| svd.singular_values[i] <= tol * smax).count();
        return Err(Error::AmbiguousNullspace { order: n, dim });
    }
    // right singular vector for the smallest singular value
    let row = order[0];
    let mut alpha: Vec<Complex64> = (0..=n).map(|j| v_t[(row, j)].conj()).collect();
    let lead = alpha[n];
    if lead.norm() <= tol {
        return Err(Error::AmbiguousNullspace { order: n, dim: 1 });
    }
    for a in &mut alpha {
        *a /= lead;
    }
    alpha[n] = Complex64::new(1.0, 0.0);
    let p = CPoly::new(alpha.clone());

    let mut q = vec![vec![ZERO; n + 1]; n + 1];
    for (pi, row) in q.iter_mut().enumerate() {
        for (qi, cell) in row.iter_mut().enumerate() {
            let mut v = alpha[pi] * alpha[qi].conj();
            for a in pi + 1..=n {
                for bb in qi + 1..=n {
                    v -= alpha[a] * alpha[bb].conj() * b.get(a - pi - 1, bb - qi - 1);
                }
            }
            *cell = v;
        }
    }
    let mut r = ReconstructionResult { order: n, p, q: BiPoly::new(q), pk: Vec::new(), b };
    r.pk = decompose_q(&r, tol)?;
    Ok(r)
}

/// Factors `P P̄ − Q = Σ_{k<N} P_k P̄_k` with `deg P_k = k` and positive
/// leading coefficients.
///
/// The coefficient matrix is `C C*` with `C` upper triangular; a Cholesky
/// factorization of the index-reversed matrix gives `C` directly.
pub fn decompose_q(r: &ReconstructionResult, tol: f64) -> Result<Vec<CPoly>> {
    let n = r.order;
    if n == 0 {
        return Ok(Vec::new());
    }
    let g = DMatrix::from_fn(n, n, |i, j| {
        // reversed indices
        let (p, q) = (n - 1 - i, n - 1 - j);
        r.p.coeff(p) * r.p.coeff(q).conj() - r.q.coeff(p, q)
    });
    let scale = (0..n).map(|i| g[(i, i)].norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut l = DMatrix::<Complex64>::zeros(n, n);
    for j in 0..n {
        let mut d = g[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)].conj();
        }
        if d.re <= tol * scale || d.im.abs() > 1e-6 * scale {
            return Err(Error::Indefinite { index: n - 1 - j, pivot: d.re });
        }
        let piv = d.re.sqrt();
        l[(j, j)] = Complex64::new(piv, 0.0);
        for i in j + 1..n {
            let mut v = g[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = v / piv;
        }
    }
    // column j of L (reversed) is P_{n-1-j}
    Ok((0..n)
        .map(|k| {
            let col = n - 1 - k;
            CPoly::new((0..=k).map(|p| l[(n - 1 - p, col)]).collect())
        })
        .collect())
}
