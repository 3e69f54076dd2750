//! Divisors on the Riemann sphere, the meromorphic resultant
//! `Res(f, g) = g((f))`, elimination functions and divisor actions.

use std::f64::consts::TAU;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cpoly::{sylvester_determinant_formal, BiPoly, CPoly, LaurentPoly};
use crate::error::{Error, Result};

/// Roots closer than this (relative to `1 + |root|`) are one point.
pub const MERGE_TOL: f64 = 1e-7;
/// Roots closer than this but farther than [`MERGE_TOL`] are reported as
/// unresolvable instead of being silently split or merged.
pub const AMBIGUOUS_TOL: f64 = 1e-5;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A point of `C ∪ {∞}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SpherePoint {
    Finite(Complex64),
    Infinity,
}

impl SpherePoint {
    pub fn finite(self) -> Option<Complex64> {
        match self {
            SpherePoint::Finite(z) => Some(z),
            SpherePoint::Infinity => None,
        }
    }

    fn close_to(&self, other: &SpherePoint, tol: f64) -> bool {
        match (self, other) {
            (SpherePoint::Finite(a), SpherePoint::Finite(b)) => (a - b).norm() <= tol * (1.0 + a.norm().max(b.norm())),
            (SpherePoint::Infinity, SpherePoint::Infinity) => true,
            _ => false,
        }
    }
}

impl From<Complex64> for SpherePoint {
    fn from(z: Complex64) -> Self {
        SpherePoint::Finite(z)
    }
}

impl fmt::Display for SpherePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpherePoint::Finite(z) => write!(f, "{z}"),
            SpherePoint::Infinity => write!(f, "∞"),
        }
    }
}

/// Finite formal sum `Σ m_p · (p)` with pairwise distinct points and
/// nonzero multiplicities.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Divisor {
    terms: Vec<(SpherePoint, i32)>,
}

impl Divisor {
    /// Merges exactly equal points and drops zero multiplicities.
    pub fn new(terms: impl IntoIterator<Item = (SpherePoint, i32)>) -> Self {
        let mut out: Vec<(SpherePoint, i32)> = Vec::new();
        for (p, m) in terms {
            match out.iter_mut().find(|(q, _)| *q == p) {
                Some(slot) => slot.1 += m,
                None => out.push((p, m)),
            }
        }
        out.retain(|(_, m)| *m != 0);
        Self { terms: out }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn terms(&self) -> &[(SpherePoint, i32)] {
        &self.terms
    }

    pub fn degree(&self) -> i32 {
        self.terms.iter().map(|(_, m)| m).sum()
    }

    pub fn multiplicity(&self, p: SpherePoint) -> i32 {
        self.terms.iter().find(|(q, _)| *q == p).map_or(0, |t| t.1)
    }

    /// Multiplicity at the point within [`MERGE_TOL`] of `p`, if any.
    pub fn multiplicity_near(&self, p: SpherePoint) -> i32 {
        self.terms.iter().filter(|(q, _)| q.close_to(&p, MERGE_TOL)).map(|t| t.1).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// `num / den` with a nonzero denominator.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalMap {
    pub num: CPoly,
    pub den: CPoly,
}

impl RationalMap {
    pub fn new(num: CPoly, den: CPoly) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::InvalidArgument("denominator is identically zero".into()));
        }
        Ok(Self { num, den })
    }

    pub fn polynomial(p: CPoly) -> Self {
        Self { num: p, den: CPoly::constant(ONE) }
    }

    /// Clears the negative powers of a Laurent polynomial.
    pub fn from_laurent(p: &LaurentPoly) -> Self {
        let shift = (-p.low()).max(0);
        let lo = p.low().min(0);
        let coeffs = (lo..=p.high().max(0)).map(|k| p.coeff(k)).collect();
        let num = CPoly::new(coeffs);
        let den = CPoly::monomial(ONE, shift as usize);
        Self { num, den }
    }

    /// `f − c`
    pub fn shifted(&self, c: Complex64) -> Self {
        Self { num: &self.num - &self.den.scaled(c), den: self.den.clone() }
    }

    /// Degree as a map of the sphere.
    pub fn degree(&self) -> usize {
        self.num.degree().max(self.den.degree())
    }

    pub fn eval(&self, z: Complex64) -> SpherePoint {
        let d = self.den.eval(z);
        if d == ZERO {
            SpherePoint::Infinity
        } else {
            SpherePoint::Finite(self.num.eval(z) / d)
        }
    }

    pub fn eval_at(&self, p: SpherePoint) -> SpherePoint {
        match p {
            SpherePoint::Finite(z) => self.eval(z),
            SpherePoint::Infinity => match self.num.degree().cmp(&self.den.degree()) {
                _ if self.num.is_zero() => SpherePoint::Finite(ZERO),
                std::cmp::Ordering::Equal => SpherePoint::Finite(self.num.leading() / self.den.leading()),
                std::cmp::Ordering::Less => SpherePoint::Finite(ZERO),
                std::cmp::Ordering::Greater => SpherePoint::Infinity,
            },
        }
    }

    /// Leading coefficient of the expansion at infinity,
    /// `f(z) ≈ κ z^{deg num − deg den}`.
    pub fn leading_at_infinity(&self) -> Complex64 {
        self.num.leading() / self.den.leading()
    }
}

/// Roots grouped into points with multiplicities.
fn cluster(p: &CPoly, roots: Vec<Complex64>) -> Result<Vec<(Complex64, i32)>> {
    let mut groups: Vec<Vec<Complex64>> = Vec::new();
    'outer: for r in roots {
        for g in groups.iter_mut() {
            let c = g.iter().sum::<Complex64>() / g.len() as f64;
            if (r - c).norm() <= MERGE_TOL * (1.0 + c.norm()) {
                g.push(r);
                continue 'outer;
            }
        }
        groups.push(vec![r]);
    }
    let pts: Vec<(Complex64, i32)> = groups
        .iter()
        .map(|g| {
            let mean = g.iter().sum::<Complex64>() / g.len() as f64;
            (polish_multiple(p, mean, g.len()), g.len() as i32)
        })
        .collect();
    for (i, (a, _)) in pts.iter().enumerate() {
        for (b, _) in &pts[i + 1..] {
            let dist = (a - b).norm();
            if dist <= AMBIGUOUS_TOL * (1.0 + a.norm().max(b.norm())) {
                return Err(Error::Multiplicity { a: *a, b: *b, distance: dist });
            }
        }
    }
    Ok(pts)
}

/// A root of multiplicity `m` is a simple root of the `(m−1)`-th
/// derivative; Newton there recovers the digits lost by the cluster mean.
fn polish_multiple(p: &CPoly, z0: Complex64, m: usize) -> Complex64 {
    if m == 1 {
        return z0;
    }
    let mut q = p.clone();
    for _ in 1..m {
        q = q.derivative();
    }
    let dq = q.derivative();
    let mut z = z0;
    for _ in 0..8 {
        let d = dq.eval(z);
        if d == ZERO {
            break;
        }
        let step = q.eval(z) / d;
        z -= step;
        if step.norm() <= 4.0 * f64::EPSILON * (1.0 + z.norm()) {
            break;
        }
    }
    if (z - z0).norm() <= MERGE_TOL * (1.0 + z0.norm()) {
        z
    } else {
        z0
    }
}

fn roots_of(p: &CPoly) -> Result<Vec<Complex64>> {
    if p.degree() == 0 {
        Ok(Vec::new())
    } else {
        p.roots()
    }
}

/// Divisor of `r − shift`: zeros, poles, and the order at infinity.
pub fn divisor_of(r: &RationalMap, shift: Complex64) -> Result<Divisor> {
    let s = r.shifted(shift);
    if s.num.is_zero() {
        return Err(Error::InvalidArgument("map minus shift vanishes identically".into()));
    }
    let mut terms: Vec<(SpherePoint, i32)> = Vec::new();
    for (p, m) in cluster(&s.num, roots_of(&s.num)?)? {
        terms.push((SpherePoint::Finite(p), m));
    }
    for (p, m) in cluster(&s.den, roots_of(&s.den)?)? {
        // a numerator root at the same place cancels
        match terms.iter_mut().find(|(q, _)| q.close_to(&SpherePoint::Finite(p), MERGE_TOL)) {
            Some(slot) => slot.1 -= m,
            None => terms.push((SpherePoint::Finite(p), -m)),
        }
    }
    let at_inf = s.den.degree() as i32 - s.num.degree() as i32;
    terms.push((SpherePoint::Infinity, at_inf));
    Ok(Divisor::new(terms))
}

/// Value of `g` at a point of a divisor, as a local leading term:
/// `g ≈ value · t^order` in the local coordinate `t`.
fn local_value(g: &RationalMap, gdiv: &Divisor, p: SpherePoint) -> (Complex64, i32) {
    let order = gdiv.multiplicity_near(p);
    match p {
        SpherePoint::Infinity => (g.leading_at_infinity(), order),
        SpherePoint::Finite(z) if order == 0 => (g.eval(z).finite().unwrap_or(ZERO), 0),
        SpherePoint::Finite(_) => (ZERO, order),
    }
}

/// `Res(f, g) = Π_p g(p)^{m_p}` over the divisor of `f`, or `∞`.
///
/// At `∞` the value of `g` is its leading coefficient
/// `lim z^{deg den − deg num} g(z)`, which for equal degrees is the plain
/// value. This makes `Res(z − a, z − b) = a − b` and keeps
/// `−log|Res|` equal to the pairwise logarithmic energy.
pub fn mer_resultant(f: &RationalMap, g: &RationalMap) -> Result<SpherePoint> {
    let fdiv = divisor_of(f, ZERO)?;
    let gdiv = divisor_of(g, ZERO)?;
    resultant_from_divisors(&fdiv, g, &gdiv)
}

fn resultant_from_divisors(fdiv: &Divisor, g: &RationalMap, gdiv: &Divisor) -> Result<SpherePoint> {
    let mut prod = ONE;
    let (mut zeros, mut poles) = (0, 0);
    for &(p, m) in fdiv.terms() {
        let (v, order) = local_value(g, gdiv, p);
        match (p, order) {
            (SpherePoint::Finite(_), o) if o != 0 => {
                // g has a zero (o > 0) or pole (o < 0) on the support of f
                if (o > 0) == (m > 0) {
                    zeros += 1;
                } else {
                    poles += 1;
                }
            }
            _ => prod *= v.powi(m),
        }
    }
    match (zeros, poles) {
        (0, 0) => Ok(SpherePoint::Finite(prod)),
        (_, 0) => Ok(SpherePoint::Finite(ZERO)),
        (0, _) => Ok(SpherePoint::Infinity),
        _ => Err(Error::Undefined("0·∞ in the divisor evaluation".into())),
    }
}

/// `𝓔_{f,g}(z, w) = Res(f − z, g − w)`.
pub fn elimination_at(f: &RationalMap, g: &RationalMap, z: Complex64, w: Complex64) -> Result<SpherePoint> {
    mer_resultant(&f.shifted(z), &g.shifted(w))
}

/// `𝓔 = Q(z, w) / (P(z) R(w))`.
#[derive(Clone, Debug, PartialEq)]
pub struct EliminationForm {
    pub q: BiPoly,
    pub p: CPoly,
    pub r: CPoly,
}

impl EliminationForm {
    pub fn eval(&self, z: Complex64, w: Complex64) -> Result<Complex64> {
        let den = self.p.eval(z) * self.r.eval(w);
        if den == ZERO {
            return Err(Error::Pole("P(z) R(w) = 0".into()));
        }
        Ok(self.q.eval(z, w) / den)
    }
}

/// `Π (x − h(q))^{m}` over the poles `q` of `pole_map`, with `h` the other map.
fn pole_image_poly(pole_map: &RationalMap, h: &RationalMap, name: &str) -> Result<CPoly> {
    let div = divisor_of(pole_map, ZERO)?;
    let mut roots = Vec::new();
    for &(q, m) in div.terms() {
        if m >= 0 {
            continue;
        }
        let v = match q {
            SpherePoint::Infinity => h.eval_at(SpherePoint::Infinity),
            SpherePoint::Finite(z) => h.eval(z),
        };
        let v = v.finite().ok_or_else(|| Error::DegreeCollapse(format!("{name} and its partner share a pole at {q}")))?;
        roots.extend(std::iter::repeat_n(v, (-m) as usize));
    }
    Ok(CPoly::from_roots(ONE, &roots))
}

/// `Q`, `P`, `R` from the Sylvester determinant in `ζ` of
/// `num_f − z den_f` and `num_g − w den_g`, scaled to match
/// [`elimination_at`].
pub fn elimination_rational_form(f: &RationalMap, g: &RationalMap) -> Result<EliminationForm> {
    let df = f.degree();
    let dg = g.degree();
    if df == 0 || dg == 0 {
        return Err(Error::DegreeCollapse(format!("constant map (degrees {df}, {dg})")));
    }
    let p = pole_image_poly(g, f, "g")?;
    let r = pole_image_poly(f, g, "f")?;
    // Q has degree ≤ deg g in z and ≤ deg f in w
    let (nz, nw) = (dg + 1, df + 1);
    let rho = 1.0 + f.num.scale().max(g.num.scale());
    let sample = |z: Complex64, w: Complex64| {
        let a = &f.num - &f.den.scaled(z);
        let b = &g.num - &g.den.scaled(w);
        sylvester_determinant_formal(&a, &b, df, dg)
    };
    let zs: Vec<Complex64> = (0..nz).map(|j| Complex64::from_polar(rho, TAU * j as f64 / nz as f64)).collect();
    let ws: Vec<Complex64> = (0..nw).map(|k| Complex64::from_polar(rho, TAU * k as f64 / nw as f64)).collect();
    let vals: Vec<Vec<Complex64>> = zs.iter().map(|&z| ws.iter().map(|&w| sample(z, w)).collect()).collect();
    // 2-D inverse DFT on the circles gives the coefficients
    let mut s = vec![vec![ZERO; nw]; nz];
    for (a, row) in s.iter_mut().enumerate() {
        for (b, cell) in row.iter_mut().enumerate() {
            let mut acc = ZERO;
            for (j, vr) in vals.iter().enumerate() {
                for (k, v) in vr.iter().enumerate() {
                    let ang = -TAU * ((a * j) as f64 / nz as f64 + (b * k) as f64 / nw as f64);
                    acc += v * Complex64::from_polar(1.0, ang);
                }
            }
            *cell = acc / ((nz * nw) as f64 * rho.powi((a + b) as i32));
        }
    }
    let s = BiPoly::new(s);
    let smax = s.coeffs().iter().flatten().map(|c| c.norm()).fold(0.0, f64::max);
    if smax == 0.0 {
        return Err(Error::DegreeCollapse("Sylvester determinant vanishes identically".into()));
    }
    // one constant fixes the normalization; pick a generic point
    let (z0, w0) = (Complex64::new(0.377, 1.213) * rho, Complex64::new(-1.119, 0.461) * rho);
    let e0 = elimination_at(f, g, z0, w0)?
        .finite()
        .ok_or_else(|| Error::DegreeCollapse("elimination function infinite at the normalization point".into()))?;
    let sv = s.eval(z0, w0);
    if sv.norm() <= 1e-14 * smax {
        return Err(Error::DegreeCollapse("Sylvester determinant vanishes at the normalization point".into()));
    }
    let kappa = e0 * p.eval(z0) * r.eval(w0) / sv;
    let mut q = s.scaled(kappa);
    // drop round-off coefficients
    let qmax = q.coeffs().iter().flatten().map(|c| c.norm()).fold(0.0, f64::max);
    let cleaned = q
        .coeffs()
        .iter()
        .map(|row| row.iter().map(|&c| if c.norm() <= 1e-13 * qmax { ZERO } else { c }).collect())
        .collect();
    q = BiPoly::new(cleaned);
    Ok(EliminationForm { q, p, r })
}

/// `Π_{α, β} k(α, β)^{m₁(α) m₂(β)}`, computed in product form.
pub fn kernel_divisor_action<K>(kernel: K, d1: &Divisor, d2: &Divisor) -> Result<Complex64>
where
    K: Fn(SpherePoint, SpherePoint) -> Result<Complex64>,
{
    let mut prod = ONE;
    for &(a, m1) in d1.terms() {
        for &(b, m2) in d2.terms() {
            let v = kernel(a, b)?;
            if v == ZERO || !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::KernelSingular(a.to_string(), b.to_string()));
            }
            prod *= v.powi(m1 * m2);
        }
    }
    Ok(prod)
}

/// `I(μ, ν) = −log|Res(f, g)|`. Returns `+∞` when the resultant is 0
/// and `−∞` when it is infinite.
pub fn mutual_energy(f: &RationalMap, g: &RationalMap) -> Result<f64> {
    match mer_resultant(f, g)? {
        SpherePoint::Infinity => Ok(f64::NEG_INFINITY),
        SpherePoint::Finite(v) if v == ZERO => Ok(f64::INFINITY),
        SpherePoint::Finite(v) => Ok(-v.norm().ln()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::PolyDomain;
    use crate::xform::{BoundaryTransform, DiskFormula};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn fin(z: Complex64) -> SpherePoint {
        SpherePoint::Finite(z)
    }

    fn val(p: SpherePoint) -> Complex64 {
        p.finite().expect("finite")
    }

    fn three_point_map(a: Complex64, b: Complex64, cc: Complex64) -> RationalMap {
        RationalMap::new(CPoly::from_roots(ONE, &[a, b]), CPoly::from_roots(ONE, &[cc, cc])).unwrap()
    }

    #[test]
    fn divisor_examples() {
        let (a, b, cc) = (c(0.5, 1.0), c(-1.0, 0.2), c(2.0, -0.7));
        let d = divisor_of(&three_point_map(a, b, cc), ZERO).unwrap();
        assert_eq!(d.terms().len(), 3);
        assert_eq!(d.multiplicity_near(fin(a)), 1);
        assert_eq!(d.multiplicity_near(fin(b)), 1);
        assert_eq!(d.multiplicity_near(fin(cc)), -2);
        assert_eq!(d.multiplicity(SpherePoint::Infinity), 0);
        assert_eq!(d.degree(), 0);

        let p = RationalMap::polynomial(CPoly::from_roots(ONE, &[ONE, c(2.0, 0.0), c(0.0, 3.0)]));
        let d = divisor_of(&p, ZERO).unwrap();
        assert_eq!(d.multiplicity(SpherePoint::Infinity), -3);
        assert_eq!(d.terms().len(), 4);

        let f = RationalMap::polynomial(CPoly::new(vec![ZERO, c(2.0, 0.0)]));
        let z = c(0.6, -0.4);
        let d = divisor_of(&f, z).unwrap();
        assert_eq!(d.multiplicity_near(fin(z / 2.0)), 1);
        assert_eq!(d.multiplicity(SpherePoint::Infinity), -1);
    }

    #[test]
    fn close_roots_are_reported() {
        let p = RationalMap::polynomial(CPoly::from_roots(ONE, &[ONE, c(1.0 + 1e-6, 0.0)]));
        assert!(matches!(divisor_of(&p, ZERO), Err(Error::Multiplicity { .. })));
    }

    #[test]
    fn resultant_examples() {
        let (a, b, cc) = (c(0.5, 1.0), c(-1.0, 0.2), c(2.0, -0.7));
        let f = three_point_map(a, b, cc);
        let g = RationalMap::new(CPoly::new(vec![c(1.0, 1.0), c(0.3, 0.0), ONE]), CPoly::new(vec![c(2.0, 0.0), ONE])).unwrap();
        let ge = |z| val(g.eval(z));
        let want = ge(a) * ge(b) / (ge(cc) * ge(cc));
        let got = val(mer_resultant(&f, &g).unwrap());
        assert!((got - want).norm() < 1e-12 * want.norm(), "{got} {want} {:?}", divisor_of(&f, ZERO));

        let (a, b) = (c(0.3, -1.1), c(2.0, 0.4));
        let fa = RationalMap::polynomial(CPoly::new(vec![-a, ONE]));
        let fb = RationalMap::polynomial(CPoly::new(vec![-b, ONE]));
        assert!((val(mer_resultant(&fa, &fb).unwrap()) - (a - b)).norm() < 1e-14);
    }

    #[test]
    fn resultant_zero_infinity_and_undefined() {
        let f = RationalMap::polynomial(CPoly::new(vec![-ONE, ONE]));
        let g = RationalMap::new(CPoly::new(vec![-ONE, ONE]), CPoly::new(vec![c(3.0, 0.0), ONE])).unwrap();
        assert_eq!(mer_resultant(&f, &g).unwrap(), fin(ZERO));
        let h = RationalMap::new(ONE.into_poly(), CPoly::new(vec![-ONE, ONE])).unwrap();
        assert_eq!(mer_resultant(&f, &h).unwrap(), SpherePoint::Infinity);
        // g(1) = 0 and g(2) = ∞ with both points zeros of f
        let two = c(2.0, 0.0);
        let f = RationalMap::new(CPoly::from_roots(ONE, &[ONE, two]), CPoly::from_roots(ONE, &[c(3.0, 0.0); 2])).unwrap();
        let g = RationalMap::new(CPoly::new(vec![-ONE, ONE]), CPoly::new(vec![-two, ONE])).unwrap();
        assert!(matches!(mer_resultant(&f, &g), Err(Error::Undefined(_))));
    }

    trait IntoPoly {
        fn into_poly(self) -> CPoly;
    }
    impl IntoPoly for Complex64 {
        fn into_poly(self) -> CPoly {
            CPoly::constant(self)
        }
    }

    fn random_poly(rng: &mut ChaCha8Rng, deg: usize) -> CPoly {
        let roots: Vec<Complex64> = (0..deg).map(|_| c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))).collect();
        CPoly::from_roots(c(rng.random_range(0.5..2.0), rng.random_range(-1.0..1.0)), &roots)
    }

    /// Rational map of the given degree, regular and nonzero at infinity.
    pub(crate) fn random_regular(rng: &mut ChaCha8Rng, deg: usize) -> RationalMap {
        RationalMap::new(random_poly(rng, deg), random_poly(rng, deg)).unwrap()
    }

    #[test]
    fn weil_symmetry_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let (m, n) = (rng.random_range(1..=4), rng.random_range(1..=4));
            let f = random_regular(&mut rng, m);
            let g = random_regular(&mut rng, n);
            let a = val(mer_resultant(&f, &g).unwrap());
            let b = val(mer_resultant(&g, &f).unwrap());
            assert!((a - b).norm() <= 1e-10 * a.norm(), "{a} vs {b}");
        }
    }

    #[test]
    fn disk_elimination() {
        let r = 1.4;
        let d = PolyDomain::disk(r).unwrap();
        let f = RationalMap::polynomial(d.map().clone());
        let g = RationalMap::from_laurent(&d.reflected());
        let (z, w) = (c(2.0, 0.7), c(-1.5, 1.1));
        let e = val(elimination_at(&f, &g, z, w.conj()).unwrap());
        assert!((e - (ONE - r * r / (z * w.conj()))).norm() < 1e-13);
        let zeta = c(1.7, 0.0);
        let e = val(elimination_at(&f, &g, val(f.eval(zeta)), val(g.eval(zeta))).unwrap());
        assert!(e.norm() < 1e-10);

        let form = elimination_rational_form(&f, &g).unwrap();
        assert!((form.p.coeff(1) - ONE).norm() < 1e-14 && form.p.coeff(0).norm() < 1e-14);
        assert!((form.r.coeff(1) - ONE).norm() < 1e-14 && form.r.coeff(0).norm() < 1e-14);
        assert!((form.q.coeff(1, 1) - ONE).norm() < 1e-12);
        assert!((form.q.coeff(0, 0) + r * r).norm() < 1e-12);
        assert!(form.q.coeff(1, 0).norm() < 1e-12 && form.q.coeff(0, 1).norm() < 1e-12);
    }

    #[test]
    fn cardioid_elimination_matches_transform() {
        let d = PolyDomain::from_real(&[1.0, 0.2]).unwrap();
        let f = RationalMap::polynomial(d.map().clone());
        let g = RationalMap::from_laurent(&d.reflected());
        let bt = BoundaryTransform::new(&d, 1024).unwrap();
        let form = elimination_rational_form(&f, &g).unwrap();
        assert!(form.q.degrees(1e-12).0 <= f.degree() && form.q.degrees(1e-12).1 <= g.degree());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let z = Complex64::from_polar(rng.random_range(1.7..4.0), rng.random_range(0.0..TAU));
            let w = Complex64::from_polar(rng.random_range(1.7..4.0), rng.random_range(0.0..TAU));
            let e = val(elimination_at(&f, &g, z, w.conj()).unwrap());
            assert!((e - bt.exponential(z, w).unwrap()).norm() < 1e-8);
            assert!((form.eval(z, w.conj()).unwrap() - e).norm() < 1e-9 * (1.0 + e.norm()));
        }
        for k in 0..16 {
            let zeta = Complex64::from_polar(0.5 + 0.1 * k as f64, 0.7 * k as f64);
            let e = val(elimination_at(&f, &g, d.f(zeta), val(g.eval(zeta))).unwrap());
            assert!(e.norm() < 1e-9, "{e}");
        }
    }

    #[test]
    fn degenerate_elimination() {
        let f = RationalMap::polynomial(CPoly::constant(ONE));
        let g = RationalMap::polynomial(CPoly::new(vec![ZERO, ONE]));
        assert!(matches!(elimination_rational_form(&f, &g), Err(Error::DegreeCollapse(_))));
    }

    #[test]
    fn divisor_action_examples() {
        let kernel = |x: SpherePoint, y: SpherePoint| -> Result<Complex64> {
            let (x, y) = (val(x), val(y));
            Ok(ONE + x * 0.5 + y * y.conj() * 0.25 + x * y)
        };
        let (a, b, cc, p, q) = (c(0.1, 0.2), c(-0.3, 0.5), c(1.1, -0.2), c(0.4, 0.4), c(-0.7, 0.1));
        let d1 = Divisor::new([(fin(a), 1), (fin(b), 1), (fin(cc), -2)]);
        let d2 = Divisor::new([(fin(p), 3), (fin(q), -3)]);
        let g = |x: Complex64, y: Complex64| kernel(fin(x), fin(y)).unwrap();
        let want = g(a, p).powi(3) * g(b, p).powi(3) * g(cc, q).powi(6)
            / (g(a, q).powi(3) * g(b, q).powi(3) * g(cc, p).powi(6));
        let got = kernel_divisor_action(kernel, &d1, &d2).unwrap();
        assert!((got - want).norm() < 1e-12 * want.norm());
        assert_eq!(kernel_divisor_action(kernel, &Divisor::empty(), &d2).unwrap(), ONE);
        let zero = |_: SpherePoint, _: SpherePoint| Ok(ZERO);
        assert!(matches!(kernel_divisor_action(zero, &d1, &d2), Err(Error::KernelSingular(..))));
    }

    #[test]
    fn moebius_image_transform() {
        // F(ζ) = 1/(ζ − 2) maps the unit disk onto D(−2/3, 1/3)
        let big_f = RationalMap::new(CPoly::constant(ONE), CPoly::new(vec![c(-2.0, 0.0), ONE])).unwrap();
        let image = DiskFormula::ExteriorE { center: c(-2.0 / 3.0, 0.0), radius: 1.0 / 3.0 };
        let unit = DiskFormula::ExteriorE { center: ZERO, radius: 1.0 };
        let kernel = |x: SpherePoint, y: SpherePoint| unit.eval(val(x), val(y));
        for (z, w) in [(c(0.5, 0.2), c(-1.5, 0.3)), (c(-0.6, 0.5), c(0.1, -0.4))] {
            let dz = divisor_of(&big_f, z).unwrap();
            let dw = divisor_of(&big_f, w).unwrap();
            let got = kernel_divisor_action(kernel, &dz, &dw).unwrap();
            let want = image.eval(z, w).unwrap();
            assert!((got - want).norm() < 1e-10, "{got} vs {want}");
        }
    }

    #[test]
    fn energy_examples() {
        let (a, b) = (c(0.3, -1.1), c(2.0, 0.4));
        let fa = RationalMap::polynomial(CPoly::new(vec![-a, ONE]));
        let fb = RationalMap::polynomial(CPoly::new(vec![-b, ONE]));
        assert!((mutual_energy(&fa, &fb).unwrap() + (a - b).norm().ln()).abs() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let f = RationalMap::new(random_poly(&mut rng, 3), random_poly(&mut rng, 1)).unwrap();
            let g = RationalMap::new(random_poly(&mut rng, 2), random_poly(&mut rng, 2)).unwrap();
            let i1 = mutual_energy(&f, &g).unwrap();
            let i2 = mutual_energy(&g, &f).unwrap();
            assert!((i1 - i2).abs() < 1e-12 * (1.0 + i1.abs()));
            // finite pairs only; the ∞ terms cancel because both divisors have zero mass
            let (df, dg) = (divisor_of(&f, ZERO).unwrap(), divisor_of(&g, ZERO).unwrap());
            let mut brute = 0.0;
            for &(p, m) in df.terms() {
                for &(q, n) in dg.terms() {
                    if let (SpherePoint::Finite(p), SpherePoint::Finite(q)) = (p, q) {
                        brute -= (m * n) as f64 * (p - q).norm().ln();
                    }
                }
            }
            assert!((brute - i1).abs() < 1e-10 * (1.0 + i1.abs()), "{brute} vs {i1}");
        }
        let z = RationalMap::polynomial(CPoly::new(vec![-ONE, ONE]));
        assert_eq!(mutual_energy(&z, &z).unwrap(), f64::INFINITY);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn divisors_have_zero_mass(seed in 0u64..10_000, m in 0usize..=4, n in 0usize..=4, sh in -1.0..1.0f64) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let f = RationalMap::new(random_poly(&mut rng, m), random_poly(&mut rng, n)).unwrap();
                if let Ok(d) = divisor_of(&f, c(sh, 0.5 * sh)) {
                    prop_assert_eq!(d.degree(), 0);
                }
            }

            #[test]
            fn resultant_is_symmetric(seed in 0u64..10_000, m in 1usize..=4, n in 1usize..=4) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let f = random_regular(&mut rng, m);
                let g = random_regular(&mut rng, n);
                if let (Ok(a), Ok(b)) = (mer_resultant(&f, &g), mer_resultant(&g, &f)) {
                    let (a, b) = (val(a), val(b));
                    prop_assert!((a - b).norm() <= 1e-9 * a.norm().max(1e-300));
                }
            }
        }
    }
}
