//! Cauchy and exponential transforms: spectral boundary-integral formulas,
//! disk closed forms, and a slow area-integral oracle.
//!
//! Conventions: `C(z, w) = −(1/π) ∫_Ω dm(ζ) / ((ζ − z) conj(ζ − w))` and
//! `E = exp C`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::cpoly::CPoly;
use crate::domain::{BoundarySampling, Location, PolyDomain, DEFAULT_SAMPLES};
use crate::error::{Error, Result};
use crate::moments::{MomentVector, ReconstructionResult};
use crate::par::{self, Exec};
use crate::resultant::SpherePoint;

/// Points closer than this (relative to the domain size) to the sampled
/// boundary are rejected by the boundary formulas.
pub const NEAR_BOUNDARY: f64 = 1e-6;
/// Default area-oracle budget (number of grid cells per chart).
pub const ORACLE_BUDGET: usize = 1_000_000;

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tag {
    Exterior,
    Interior,
    Mixed,
}

/// A pair `(z, w)` with its location relative to `Ω`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransformPoint {
    pub z: Complex64,
    pub w: Complex64,
    pub tag: Tag,
}

impl TransformPoint {
    /// Classifies by the winding number of the sampled boundary.
    pub fn classify(s: &BoundarySampling, scale: f64, z: Complex64, w: Complex64) -> Result<Self> {
        let eps = NEAR_BOUNDARY * scale;
        let locate = |p: Complex64| -> Result<bool> {
            let dist = s.distance_to(p);
            if dist <= eps {
                return Err(Error::NearBoundary { z: p, distance: dist });
            }
            Ok(s.winding_number(p) != 0)
        };
        let tag = match (locate(z)?, locate(w)?) {
            (false, false) => Tag::Exterior,
            (true, true) => Tag::Interior,
            _ => Tag::Mixed,
        };
        Ok(Self { z, w, tag })
    }
}

/// Boundary samples of a domain, reused across many evaluations.
#[derive(Clone, Debug)]
pub struct BoundaryTransform<'a> {
    pub domain: &'a PolyDomain,
    pub samples: BoundarySampling,
    pub exec: Exec,
}

impl<'a> BoundaryTransform<'a> {
    pub fn new(domain: &'a PolyDomain, n: usize) -> Result<Self> {
        Self::with_exec(domain, n, Exec::default())
    }

    pub fn with_exec(domain: &'a PolyDomain, n: usize, exec: Exec) -> Result<Self> {
        Ok(Self { domain, samples: BoundarySampling::new(domain, n, exec)?, exec })
    }

    pub fn classify(&self, z: Complex64, w: Complex64) -> Result<TransformPoint> {
        TransformPoint::classify(&self.samples, self.domain.radius_bound(), z, w)
    }

    /// `−(1/2πi) ∮ ζ̄ dζ / (ζ − z)` for `z` outside the closure.
    pub fn cauchy_exterior(&self, z: Complex64) -> Result<Complex64> {
        let p = self.classify(z, z)?;
        if p.tag != Tag::Exterior {
            return Err(Error::NotExterior { z });
        }
        let s = &self.samples;
        let sum = par::sum(self.exec, s.n, |j| s.z[j].conj() * s.dz[j] / (s.z[j] - z));
        Ok(-sum * (s.weight() / (TAU * Complex64::i())))
    }

    /// `(1/iπ) ∮ log|ζ − z| conj(dζ / (ζ − w))` over the positively
    /// oriented boundary.
    fn log_integral(&self, z: Complex64, w: Complex64) -> Complex64 {
        let s = &self.samples;
        let sum = par::sum(self.exec, s.n, |j| (s.z[j] - z).norm().ln() * (s.dz[j] / (s.z[j] - w)).conj());
        sum * (s.weight() / (PI * Complex64::i()))
    }

    /// `E(z, w)` for an exterior pair, `H(z, w)` for an interior pair.
    ///
    /// The interior formula integrates over the boundary of the exterior
    /// domain, i.e. with the opposite orientation.
    pub fn evaluate(&self, p: &TransformPoint) -> Result<Complex64> {
        match p.tag {
            Tag::Exterior => Ok(self.log_integral(p.z, p.w).exp()),
            Tag::Interior => Ok((-self.log_integral(p.z, p.w)).exp()),
            Tag::Mixed => Err(Error::MixedPair),
        }
    }

    pub fn exponential(&self, z: Complex64, w: Complex64) -> Result<Complex64> {
        let p = self.classify(z, w)?;
        if p.tag != Tag::Exterior {
            return Err(Error::NotExterior { z: if p.tag == Tag::Mixed { w } else { z } });
        }
        self.evaluate(&p)
    }

    pub fn interior(&self, z: Complex64, w: Complex64) -> Result<Complex64> {
        let p = self.classify(z, w)?;
        if p.tag != Tag::Interior {
            return Err(Error::NotInterior { z });
        }
        self.evaluate(&p)
    }
}

pub fn cauchy_exterior(d: &PolyDomain, z: Complex64) -> Result<Complex64> {
    BoundaryTransform::new(d, DEFAULT_SAMPLES)?.cauchy_exterior(z)
}

/// `Σ_{k≤N} M_k / z^{k+1}`; exact outside a polynomial domain.
pub fn cauchy_from_moments(m: &MomentVector, z: Complex64) -> Complex64 {
    (0..=m.order()).map(|k| m.get(k) / z.powi(k as i32 + 1)).sum()
}

pub fn exp_transform_boundary(d: &PolyDomain, p: &TransformPoint, samples: usize) -> Result<Complex64> {
    BoundaryTransform::new(d, samples)?.evaluate(p)
}

/// A unit-disk parametrization `u ↦ ζ(u)` of a piece of the sphere.
#[derive(Clone, Copy, Debug)]
pub enum Chart<'a> {
    Poly(&'a PolyDomain),
    /// `ζ = center + radius·u`
    Disk { center: Complex64, radius: f64 },
    /// `ζ = radius / u`, the outside of the circle `|ζ| = radius`.
    Inverted { radius: f64 },
}

impl Chart<'_> {
    /// `(ζ(u), dζ/du)`
    fn eval(&self, u: Complex64) -> (Complex64, Complex64) {
        match self {
            Chart::Poly(d) => (d.f(u), d.df(u)),
            Chart::Disk { center, radius } => (center + u * *radius, Complex64::new(*radius, 0.0)),
            Chart::Inverted { radius } => (*radius / u, -*radius / (u * u)),
        }
    }

    /// Chart coordinate of `p`, if `p` lies in the open chart.
    fn preimage(&self, p: SpherePoint) -> Option<Complex64> {
        match (self, p) {
            (Chart::Inverted { .. }, SpherePoint::Infinity) => Some(ZERO),
            (_, SpherePoint::Infinity) => None,
            (Chart::Poly(d), SpherePoint::Finite(z)) => d.inverse_map(z).ok().filter(|u| u.norm() < 1.0),
            (Chart::Disk { center, radius }, SpherePoint::Finite(z)) => {
                Some((z - center) / *radius).filter(|u| u.norm() < 1.0)
            }
            (Chart::Inverted { radius }, SpherePoint::Finite(z)) => {
                (z != ZERO).then(|| *radius / z).filter(|u| u.norm() < 1.0)
            }
        }
    }
}

/// Simple pole `c/(ζ − p)` (holomorphic) or `c/conj(ζ − p)` of an
/// integrand, in chart coordinates.
#[derive(Clone, Copy, Debug)]
struct Singular {
    at: Complex64,
    coeff: Complex64,
    holomorphic: bool,
    radius: f64,
}

/// Smooth bump, 1 at the origin and 0 from `rho` on.
fn bump(r: f64, rho: f64) -> f64 {
    if r >= rho {
        return 0.0;
    }
    let x = r / rho;
    (1.0 - 1.0 / (1.0 - x * x)).exp()
}

/// Polar midpoint rule for `∫_{|u|<1} g(u) dm(u)`. Each listed pole is
/// removed with a radially symmetric cutoff whose integral vanishes.
fn disk_midpoint<G>(exec: Exec, budget: usize, g: G, sing: &[Singular]) -> Complex64
where
    G: Fn(Complex64) -> Complex64 + Sync + Send,
{
    let nr = ((budget as f64 / TAU).sqrt().ceil() as usize).max(4);
    let nt = (budget / nr).max(8);
    let (hr, ht) = (1.0 / nr as f64, TAU / nt as f64);
    let trig: Vec<Complex64> = (0..nt).map(|j| Complex64::from_polar(1.0, (j as f64 + 0.5) * ht)).collect();
    par::sum(exec, nr, |i| {
        let r = (i as f64 + 0.5) * hr;
        let mut acc = ZERO;
        for e in &trig {
            let u = e * r;
            let mut v = g(u);
            for s in sing {
                let d = u - s.at;
                let b = bump(d.norm(), s.radius);
                if b > 0.0 {
                    v -= s.coeff * b / if s.holomorphic { d } else { d.conj() };
                }
            }
            acc += v;
        }
        acc * r
    }) * (hr * ht)
}

/// Generic kernel `A(ζ)·conj(B(ζ))` with simple poles of `A` at `poles_a`
/// and of `B` at `poles_b` (pairs of point and residue).
struct Kernel<'k> {
    a: &'k (dyn Fn(Complex64) -> Complex64 + Sync),
    b: &'k (dyn Fn(Complex64) -> Complex64 + Sync),
    poles_a: Vec<(Complex64, Complex64)>,
    poles_b: Vec<(Complex64, Complex64)>,
}

impl Kernel<'_> {
    /// `∫_{chart} A conj(B) dm`
    fn integrate(&self, chart: Chart<'_>, budget: usize, exec: Exec) -> Complex64 {
        let mut raw = Vec::new();
        for &(p, res) in &self.poles_a {
            if let Some(u) = chart.preimage(SpherePoint::Finite(p)) {
                let (_, dz) = chart.eval(u);
                // A ≈ res/(ζ − p), so A conj(B) |ζ'|² ≈ res conj(B(p)) conj(ζ') / (u − u_p)
                raw.push((u, res * (self.b)(p).conj() * dz.conj(), true));
            }
        }
        for &(p, res) in &self.poles_b {
            if let Some(u) = chart.preimage(SpherePoint::Finite(p)) {
                let (_, dz) = chart.eval(u);
                raw.push((u, (self.a)(p) * res.conj() * dz, false));
            }
        }
        let sing: Vec<Singular> = raw
            .iter()
            .enumerate()
            .map(|(i, &(at, coeff, holomorphic))| {
                let mut radius = 0.5 * (1.0 - at.norm());
                for (j, other) in raw.iter().enumerate() {
                    if i != j {
                        radius = radius.min(0.5 * (at - other.0).norm());
                    }
                }
                Singular { at, coeff, holomorphic, radius }
            })
            .collect();
        disk_midpoint(
            exec,
            budget,
            |u| {
                let (z, dz) = chart.eval(u);
                (self.a)(z) * (self.b)(z).conj() * dz.norm_sqr()
            },
            &sing,
        )
    }
}

/// Area-integral oracle for `E(z, w)` over a single chart. An interior
/// diagonal point gives 0 (the integral diverges to −∞).
pub fn exp_transform_oracle_2d(chart: Chart<'_>, z: Complex64, w: Complex64, budget: usize) -> Complex64 {
    exp_transform_oracle_2d_with(chart, z, w, budget, Exec::default())
}

pub fn exp_transform_oracle_2d_with(chart: Chart<'_>, z: Complex64, w: Complex64, budget: usize, exec: Exec) -> Complex64 {
    double_cauchy_oracle(&[chart], z, w, budget, exec).map_or(ZERO, |c| c.exp())
}

/// `C(z, w)` summed over charts; `None` when it diverges.
pub fn double_cauchy_oracle(charts: &[Chart<'_>], z: Complex64, w: Complex64, budget: usize, exec: Exec) -> Option<Complex64> {
    if z == w && charts.iter().any(|c| c.preimage(SpherePoint::Finite(z)).is_some()) {
        return None;
    }
    let fa = move |s: Complex64| (s - z).inv();
    let fb = move |s: Complex64| (s - w).inv();
    let k = Kernel { a: &fa, b: &fb, poles_a: vec![(z, ONE)], poles_b: vec![(w, ONE)] };
    let total: Complex64 = charts.iter().map(|c| k.integrate(*c, budget, exec)).sum();
    Some(-total / PI)
}

/// Four-variable transform by the area oracle over the given charts.
pub fn four_variable_oracle(
    charts: &[Chart<'_>],
    pts: [SpherePoint; 4],
    budget: usize,
    exec: Exec,
) -> Result<Complex64> {
    let [z, w, a, b] = pts;
    if z == a || w == b {
        return Ok(ONE);
    }
    check_distinct(&pts)?;
    // kernel factor 1/(ζ − p) − 1/(ζ − q), with a point at ∞ dropping its term
    fn diff(p: SpherePoint, q: SpherePoint) -> (impl Fn(Complex64) -> Complex64 + Sync, Vec<(Complex64, Complex64)>) {
        let mut poles = Vec::new();
        if let SpherePoint::Finite(p) = p {
            poles.push((p, ONE));
        }
        if let SpherePoint::Finite(q) = q {
            poles.push((q, -ONE));
        }
        let f = move |s: Complex64| {
            let t = |x: SpherePoint| match x {
                SpherePoint::Finite(x) => (s - x).inv(),
                SpherePoint::Infinity => ZERO,
            };
            t(p) - t(q)
        };
        (f, poles)
    }
    let (fa, pa) = diff(z, a);
    let (fb, pb) = diff(w, b);
    let k = Kernel { a: &fa, b: &fb, poles_a: pa, poles_b: pb };
    let total: Complex64 = charts.iter().map(|c| k.integrate(*c, budget, exec)).sum();
    Ok((-total / PI).exp())
}

fn check_distinct(pts: &[SpherePoint; 4]) -> Result<()> {
    for i in 0..4 {
        for j in i + 1..4 {
            if pts[i] == pts[j] {
                return Err(Error::CoincidentPoints);
            }
        }
    }
    Ok(())
}

/// The whole sphere as a disk plus the inverted outside, split at a
/// radius kept away from the given finite points.
pub fn sphere_charts(pts: &[SpherePoint]) -> [Chart<'static>; 2] {
    let mods: Vec<f64> = pts
        .iter()
        .filter_map(|p| match p {
            SpherePoint::Finite(z) => Some(z.norm()),
            SpherePoint::Infinity => None,
        })
        .collect();
    let gap = |r: f64| mods.iter().map(|m| (m / r).ln().abs()).fold(f64::INFINITY, f64::min);
    let radius = (0..=64)
        .map(|i| 0.25 * 16f64.powf(i as f64 / 64.0))
        .max_by(|a, b| gap(*a).total_cmp(&gap(*b)))
        .unwrap_or(1.0);
    [Chart::Disk { center: ZERO, radius }, Chart::Inverted { radius }]
}

/// `E(z, w; a, b)` over `Ω`. All-exterior tuples use the ratio of boundary
/// transforms; anything else goes through the area oracle.
pub fn four_variable_e(
    d: &PolyDomain,
    z: Complex64,
    w: Complex64,
    a: Complex64,
    b: Complex64,
    budget: usize,
) -> Result<Complex64> {
    if z == a || w == b {
        return Ok(ONE);
    }
    let pts = [z, w, a, b].map(SpherePoint::Finite);
    check_distinct(&pts)?;
    let bt = BoundaryTransform::new(d, DEFAULT_SAMPLES)?;
    let all_outside = [z, w, a, b]
        .iter()
        .map(|&p| bt.classify(p, p).map(|t| t.tag == Tag::Exterior))
        .collect::<Result<Vec<_>>>()?;
    if all_outside.iter().all(|&x| x) {
        let e = |p, q| bt.exponential(p, q);
        return Ok(e(z, w)? * e(a, b)? / (e(z, b)? * e(a, w)?));
    }
    four_variable_oracle(&[Chart::Poly(d)], pts, budget, Exec::default())
}

/// Closed-form oracles for disks and for the whole sphere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DiskFormula {
    /// `E` of `D(a, R)` with both variables outside.
    ExteriorE { center: Complex64, radius: f64 },
    /// `E` of `D(a, R)` with both variables inside.
    InteriorE { center: Complex64, radius: f64 },
    /// `H` of `D(a, R)` with both variables inside.
    InteriorH { center: Complex64, radius: f64 },
}

impl DiskFormula {
    pub fn eval(&self, z: Complex64, w: Complex64) -> Result<Complex64> {
        match *self {
            DiskFormula::ExteriorE { center, radius } => {
                for p in [z, w] {
                    if (p - center).norm() < radius {
                        return Err(Error::NotExterior { z: p });
                    }
                }
                let den = (z - center) * (w - center).conj();
                if den == ZERO {
                    return Err(Error::Pole("(z − a)(w̄ − ā) = 0".into()));
                }
                Ok(ONE - radius * radius / den)
            }
            DiskFormula::InteriorE { center, radius } => {
                inside(center, radius, z, w)?;
                let den = radius * radius - (z - center) * (w - center).conj();
                if den == ZERO {
                    return Err(Error::Pole("R² = (z − a)(w̄ − ā)".into()));
                }
                Ok(Complex64::new((z - w).norm_sqr(), 0.0) / den)
            }
            DiskFormula::InteriorH { center, radius } => {
                inside(center, radius, z, w)?;
                Ok(radius * radius - (z - center) * (w - center).conj())
            }
        }
    }
}

fn inside(center: Complex64, radius: f64, z: Complex64, w: Complex64) -> Result<()> {
    for p in [z, w] {
        if (p - center).norm() >= radius {
            return Err(Error::NotInterior { z: p });
        }
    }
    Ok(())
}

/// Cross-ratio `(z:a:w:b) = (z−w)(a−b) / ((z−b)(a−w))` on the sphere.
pub fn cross_ratio(z: SpherePoint, a: SpherePoint, w: SpherePoint, b: SpherePoint) -> Result<Complex64> {
    check_distinct(&[z, a, w, b])?;
    // every point occurs once upstairs and once downstairs; a point at ∞
    // cancels out of its two factors
    let factor = |p: SpherePoint, q: SpherePoint| match (p, q) {
        (SpherePoint::Finite(p), SpherePoint::Finite(q)) => p - q,
        _ => ONE,
    };
    let num = factor(z, w) * factor(a, b);
    let den = factor(z, b) * factor(a, w);
    Ok(num / den)
}

/// `|(z:a:w:b)|²`, the four-variable transform of the whole sphere.
pub fn sphere_cross(z: SpherePoint, a: SpherePoint, w: SpherePoint, b: SpherePoint) -> Result<f64> {
    Ok(cross_ratio(z, a, w, b)?.norm_sqr())
}

/// `Q(z, w̄) / (P(z) conj(P(w)))`.
pub fn rational_form_eval(r: &ReconstructionResult, z: Complex64, w: Complex64) -> Result<Complex64> {
    let pz = checked_p(&r.p, z)?;
    let pw = checked_p(&r.p, w)?;
    Ok(r.q.eval(z, w.conj()) / (pz * pw.conj()))
}

/// `λ̄_{N−1} P_{N−1}(z) / P(z)`, the exterior Cauchy transform.
pub fn rational_cauchy(r: &ReconstructionResult, z: Complex64) -> Result<Complex64> {
    let pz = checked_p(&r.p, z)?;
    Ok(r.cauchy_numerator().eval(z) / pz)
}

/// `P(z)`, or a pole error when it is zero up to rounding.
fn checked_p(p: &CPoly, z: Complex64) -> Result<Complex64> {
    let v = p.eval(z);
    if v.norm() <= 64.0 * f64::EPSILON * p.eval_abs(z) {
        return Err(Error::Pole(format!("P vanishes at {z}")));
    }
    Ok(v)
}

/// `Location` of `z` by the sampled boundary of a transform.
pub fn locate(bt: &BoundaryTransform<'_>, z: Complex64) -> Location {
    bt.domain.locate(z, &bt.samples, NEAR_BOUNDARY * bt.domain.radius_bound())
}
