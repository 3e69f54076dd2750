//! Domains given as images of the unit disk under a univalent polynomial
//! `f(ζ) = a₀ζ + a₁ζ² + … + a_Nζ^{N+1}`, `a₀ > 0`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::cpoly::{CPoly, LaurentPoly, Reflect};
use crate::error::{Error, Result};
use crate::par::{self, Exec};

/// Critical points must satisfy `|c| > 1 + CRITICAL_MARGIN`.
pub const CRITICAL_MARGIN: f64 = 1e-6;
/// Samples used by the boundary self-intersection test.
pub const INJECTIVITY_SAMPLES: usize = 1024;
/// Default boundary sampling for spectral quadrature.
pub const DEFAULT_SAMPLES: usize = 1024;
/// Largest half-width ever used for the Schwarz annulus.
pub const MAX_DELTA: f64 = 0.5;

const REFINE: usize = 32;

/// How much univalence [`validate_domain_with`] insists on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Univalence {
    /// `f′ ≠ 0` on the closed disk and a simple boundary curve.
    #[default]
    Full,
    /// Only `f′ ≠ 0` on the closed disk. Good enough for the algebraic
    /// identities, not for anything that needs `f⁻¹`.
    LocalOnly,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolyDomain {
    a: Vec<Complex64>,
    f: CPoly,
    df: CPoly,
    critical: Vec<Complex64>,
    univalence: Univalence,
}

/// Fully certified domain from the map coefficients `a₀..a_N`.
pub fn validate_domain(a: &[Complex64]) -> Result<PolyDomain> {
    validate_domain_with(a, Univalence::Full)
}

pub fn validate_domain_with(a: &[Complex64], mode: Univalence) -> Result<PolyDomain> {
    let d = PolyDomain::unchecked(a)?;
    if let Some(&c) = d.critical.iter().find(|c| c.norm() <= 1.0 + CRITICAL_MARGIN) {
        return Err(Error::CriticalPoint { witness: c });
    }
    if mode == Univalence::Full {
        check_simple_boundary(&d, Exec::default())?;
    }
    Ok(PolyDomain { univalence: mode, ..d })
}

impl PolyDomain {
    /// Normalization and root checks only; no univalence certificate.
    fn unchecked(a: &[Complex64]) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::InvalidArgument("need at least a₀".into()));
        }
        if a.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        if a[0].im != 0.0 || a[0].re <= 0.0 {
            return Err(Error::Normalization(format!("a₀ must be real and positive, got {}", a[0])));
        }
        let mut coeffs = Vec::with_capacity(a.len() + 1);
        coeffs.push(Complex64::new(0.0, 0.0));
        coeffs.extend_from_slice(a);
        let f = CPoly::new(coeffs);
        let df = f.derivative();
        let critical = if df.degree() >= 1 { df.roots()? } else { Vec::new() };
        Ok(Self { a: f.coeffs()[1..].to_vec(), f, df, critical, univalence: Univalence::LocalOnly })
    }

    pub fn from_real(a: &[f64]) -> Result<Self> {
        validate_domain(&a.iter().map(|&x| Complex64::new(x, 0.0)).collect::<Vec<_>>())
    }

    /// Disk of radius `r` centred at the origin.
    pub fn disk(r: f64) -> Result<Self> {
        Self::from_real(&[r])
    }

    /// Coefficients `a₀..a_N`, trailing zeros dropped.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.a
    }

    pub fn a0(&self) -> f64 {
        self.a[0].re
    }

    /// `N`, one less than the degree of `f`.
    pub fn order(&self) -> usize {
        self.a.len() - 1
    }

    pub fn univalence(&self) -> Univalence {
        self.univalence
    }

    pub fn map(&self) -> &CPoly {
        &self.f
    }

    pub fn map_derivative(&self) -> &CPoly {
        &self.df
    }

    pub fn reflected(&self) -> LaurentPoly {
        self.f.reflect()
    }

    pub fn critical_points(&self) -> &[Complex64] {
        &self.critical
    }

    pub fn f(&self, zeta: Complex64) -> Complex64 {
        self.f.eval(zeta)
    }

    pub fn df(&self, zeta: Complex64) -> Complex64 {
        self.df.eval(zeta)
    }

    /// `f*(ζ) = conj(f(1/ζ̄))`.
    pub fn f_star(&self, zeta: Complex64) -> Complex64 {
        self.f.eval(zeta.conj().inv()).conj()
    }

    /// Half-width of the annulus around the unit circle where `f⁻¹` and
    /// the Schwarz function are used.
    pub fn delta(&self) -> f64 {
        self.critical
            .iter()
            .map(|c| 0.5 * (c.norm() - 1.0))
            .fold(MAX_DELTA, f64::min)
    }

    /// Upper bound for `|f|` on the closed disk.
    pub fn radius_bound(&self) -> f64 {
        self.a.iter().map(|c| c.norm()).sum()
    }

    pub fn sample_boundary(&self, n: usize) -> Result<BoundarySampling> {
        BoundarySampling::new(self, n, Exec::default())
    }

    /// Preimage of `z` in the closed unit disk.
    pub fn inverse_map(&self, z: Complex64) -> Result<Complex64> {
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::NonFinite);
        }
        self.preimage_within(z, 1.0 + 1e-10).ok_or(Error::OutsideClosure { z })
    }

    /// Preimage with `|ζ| ≤ rmax`, Newton first and all roots as fallback.
    pub(crate) fn preimage_within(&self, z: Complex64, rmax: f64) -> Option<Complex64> {
        let guess = z / self.a0();
        let guess = if guess.norm() > rmax { guess * (rmax / guess.norm()) } else { guess };
        if let Some(r) = self.newton_preimage(z, guess) {
            if r.norm() <= rmax {
                return Some(r);
            }
        }
        let shifted = &self.f - &CPoly::constant(z);
        let roots = shifted.roots().ok()?;
        roots
            .into_iter()
            .map(|r| self.newton_preimage(z, r).unwrap_or(r))
            .filter(|r| r.norm() <= rmax)
            .min_by(|a, b| a.norm().total_cmp(&b.norm()))
    }

    fn newton_preimage(&self, z: Complex64, mut zeta: Complex64) -> Option<Complex64> {
        let scale = self.radius_bound().max(z.norm());
        for _ in 0..60 {
            let r = self.f(zeta) - z;
            if r.norm() <= 1e-15 * scale {
                return Some(zeta);
            }
            let d = self.df(zeta);
            if d.norm() == 0.0 {
                return None;
            }
            let step = r / d;
            zeta -= step;
            if !zeta.re.is_finite() || !zeta.im.is_finite() {
                return None;
            }
            if step.norm() <= 1e-16 * (1.0 + zeta.norm()) {
                break;
            }
        }
        ((self.f(zeta) - z).norm() <= 1e-13 * scale).then_some(zeta)
    }

    /// `S(z) = f*(f⁻¹(z))` on the annulus `1−δ ≤ |f⁻¹(z)| ≤ 1+δ`.
    pub fn schwarz_at(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.f_star(self.annulus_preimage(z)?))
    }

    /// `f⁻¹(z)` restricted to the annulus `1−δ ≤ |ζ| ≤ 1+δ`.
    pub fn annulus_preimage(&self, z: Complex64) -> Result<Complex64> {
        let delta = self.delta();
        let zeta = self.preimage_within(z, 1.0 + delta).ok_or(Error::OutsideAnnulus {
            z,
            modulus: f64::INFINITY,
            delta,
        })?;
        let m = zeta.norm();
        if (m - 1.0).abs() > delta {
            return Err(Error::OutsideAnnulus { z, modulus: m, delta });
        }
        Ok(zeta)
    }

    /// Quadrature nodes weights `c_k = π M_k / k!` so that
    /// `∫_Ω h dm = Σ c_k h^{(k)}(0)`.
    pub fn quadrature_data(&self) -> Vec<Complex64> {
        let m = crate::moments::harmonic_moments(self);
        let mut fact = 1.0;
        (0..=self.order())
            .map(|k| {
                if k > 0 {
                    fact *= k as f64;
                }
                m.get(k) * (PI / fact)
            })
            .collect()
    }

    /// Interior, exterior or (numerically) on the boundary.
    pub fn locate(&self, z: Complex64, samples: &BoundarySampling, eps: f64) -> Location {
        let dist = samples.distance_to(z);
        if dist <= eps {
            return Location::Boundary { distance: dist };
        }
        if samples.winding_number(z) != 0 {
            Location::Interior
        } else {
            Location::Exterior
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Location {
    Interior,
    Exterior,
    Boundary { distance: f64 },
}

/// Equispaced samples of the boundary curve `θ ↦ f(e^{iθ})`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundarySampling {
    pub n: usize,
    pub theta: Vec<f64>,
    /// `e^{iθ}`
    pub zeta: Vec<Complex64>,
    /// `f(e^{iθ})`
    pub z: Vec<Complex64>,
    /// `d f(e^{iθ}) / dθ = f′(e^{iθ}) i e^{iθ}`
    pub dz: Vec<Complex64>,
}

impl BoundarySampling {
    pub fn new(d: &PolyDomain, n: usize, exec: Exec) -> Result<Self> {
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("sample count must be a power of two ≥ 4, got {n}")));
        }
        let theta: Vec<f64> = (0..n).map(|j| TAU * j as f64 / n as f64).collect();
        let zeta: Vec<Complex64> = theta.iter().map(|&t| Complex64::from_polar(1.0, t)).collect();
        let pts = par::map(exec, n, |j| {
            let u = zeta[j];
            (d.f(u), d.df(u) * Complex64::i() * u)
        });
        let (z, dz) = pts.into_iter().unzip();
        Ok(Self { n, theta, zeta, z, dz })
    }

    /// Trapezoid weight `2π/n`.
    pub fn weight(&self) -> f64 {
        TAU / self.n as f64
    }

    /// `∮ g(ζ, z) dz` with `g` evaluated at the sample `(e^{iθ}, f(e^{iθ}))`.
    pub fn contour<F>(&self, exec: Exec, g: F) -> Complex64
    where
        F: Fn(Complex64, Complex64) -> Complex64 + Sync + Send,
    {
        par::sum(exec, self.n, |j| g(self.zeta[j], self.z[j]) * self.dz[j]) * self.weight()
    }

    /// Enclosed area `(1/2) ∮ Im(z̄ dz)` by the trapezoid rule.
    pub fn area(&self) -> f64 {
        0.5 * par::sum_real(Exec::default(), self.n, |j| (self.z[j].conj() * self.dz[j]).im) * self.weight()
    }

    /// Winding number of the sampled polygon about `z`.
    pub fn winding_number(&self, z: Complex64) -> i64 {
        let total: f64 = (0..self.n)
            .map(|j| ((self.z[(j + 1) % self.n] - z) / (self.z[j] - z)).arg())
            .sum();
        (total / TAU).round() as i64
    }

    /// Distance from `z` to the sampled polygon.
    pub fn distance_to(&self, z: Complex64) -> f64 {
        (0..self.n)
            .map(|j| point_segment_distance(z, self.z[j], self.z[(j + 1) % self.n]))
            .fold(f64::INFINITY, f64::min)
    }
}

fn point_segment_distance(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * ab.conj()).re / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

fn cross(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

fn segments_cross(p1: Complex64, p2: Complex64, q1: Complex64, q2: Complex64) -> bool {
    let d1 = cross(p2 - p1, q1 - p1);
    let d2 = cross(p2 - p1, q2 - p1);
    let d3 = cross(q2 - q1, p1 - q1);
    let d4 = cross(q2 - q1, p2 - q1);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

fn segment_distance(p1: Complex64, p2: Complex64, q1: Complex64, q2: Complex64) -> f64 {
    if segments_cross(p1, p2, q1, q2) {
        return 0.0;
    }
    point_segment_distance(p1, q1, q2)
        .min(point_segment_distance(p2, q1, q2))
        .min(point_segment_distance(q1, p1, p2))
        .min(point_segment_distance(q2, p1, p2))
}

/// Polygon crossing test on the sampled boundary. Pairs of segments that
/// come closer than the sampling resolution are resampled more finely
/// before a verdict.
pub(crate) fn check_simple_boundary(d: &PolyDomain, exec: Exec) -> Result<()> {
    if d.order() == 0 {
        return Ok(());
    }
    let n = INJECTIVITY_SAMPLES;
    let s = BoundarySampling::new(d, n, exec)?;
    // segments this many steps apart along the curve cannot be close
    // unless the curve folds back on itself
    let min_sep = 4usize;
    let hit = par::find_first(exec, n, |i| {
        let p1 = s.z[i];
        let p2 = s.z[(i + 1) % n];
        for j in (i + min_sep)..n {
            if (n + i - j) % n < min_sep {
                continue;
            }
            let q1 = s.z[j];
            let q2 = s.z[(j + 1) % n];
            if segments_cross(p1, p2, q1, q2) {
                return Some((s.theta[i], s.theta[j]));
            }
            let local = (p2 - p1).norm().max((q2 - q1).norm());
            if segment_distance(p1, p2, q1, q2) < local {
                if let Some(t) = refined_crossing(d, s.theta[i], s.theta[j], TAU / n as f64) {
                    return Some(t);
                }
            }
        }
        None
    });
    match hit {
        Some((theta1, theta2)) => Err(Error::SelfIntersection { theta1, theta2 }),
        None => Ok(()),
    }
}

fn refined_crossing(d: &PolyDomain, t1: f64, t2: f64, h: f64) -> Option<(f64, f64)> {
    // resample one step either side of both arcs
    let arc = |t0: f64| -> Vec<(f64, Complex64)> {
        (0..=3 * REFINE)
            .map(|k| {
                let t = t0 - h + h * k as f64 / REFINE as f64;
                (t, d.f(Complex64::from_polar(1.0, t)))
            })
            .collect()
    };
    let a = arc(t1);
    let b = arc(t2);
    for wa in a.windows(2) {
        for wb in b.windows(2) {
            if segments_cross(wa[0].1, wa[1].1, wb[0].1, wb[1].1) {
                return Some((wa[0].0.rem_euclid(TAU), wb[0].0.rem_euclid(TAU)));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn cardioid() -> PolyDomain {
        PolyDomain::from_real(&[1.0, 0.2]).unwrap()
    }

    #[test]
    fn validation_examples() {
        assert!(PolyDomain::from_real(&[1.0]).is_ok());
        match PolyDomain::from_real(&[1.0, 0.6]) {
            Err(Error::CriticalPoint { witness }) => assert!((witness - c(-5.0 / 6.0, 0.0)).norm() < 1e-12),
            other => panic!("{other:?}"),
        }
        let d = cardioid();
        assert!((d.critical_points()[0] - c(-2.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn normalization_is_enforced() {
        assert!(matches!(validate_domain(&[c(1.0, 0.1)]), Err(Error::Normalization(_))));
        assert!(matches!(validate_domain(&[c(-1.0, 0.0)]), Err(Error::Normalization(_))));
        assert!(matches!(validate_domain(&[]), Err(Error::InvalidArgument(_))));
        assert_eq!(validate_domain(&[c(f64::NAN, 0.0)]), Err(Error::NonFinite));
    }

    #[test]
    fn self_intersection_is_detected() {
        // truncated (e^{3.5ζ} − 1)/3.5: f′ has no zeros in |ζ| < 1.44 but the
        // argument of f′ sweeps more than 2π, so the boundary overlaps itself
        let mut a = Vec::new();
        let mut term = 1.0;
        for j in 0..16 {
            a.push(c(term, 0.0));
            term *= 3.5 / (j + 2) as f64;
        }
        assert!(matches!(validate_domain(&a), Err(Error::SelfIntersection { .. })));
        assert!(validate_domain_with(&a, Univalence::LocalOnly).is_ok());
    }

    #[test]
    fn inverse_map_examples() {
        let d = PolyDomain::from_real(&[2.0]).unwrap();
        assert!((d.inverse_map(c(1.0, 0.0)).unwrap() - c(0.5, 0.0)).norm() < 1e-15);
        let d = cardioid();
        let z0 = c(0.3, 0.1);
        assert!((d.inverse_map(d.f(z0)).unwrap() - z0).norm() < 1e-12);
        let u = Complex64::from_polar(1.0, 1.0);
        assert!((d.inverse_map(d.f(u)).unwrap() - u).norm() < 1e-12);
        assert!(matches!(d.inverse_map(c(3.0, 0.0)), Err(Error::OutsideClosure { .. })));
    }

    #[test]
    fn inverse_map_on_grid() {
        for coeffs in [vec![c(1.0, 0.0), c(0.2, 0.0)], vec![c(1.0, 0.0), c(0.1, 0.1), c(0.05, -0.02)]] {
            let d = validate_domain(&coeffs).unwrap();
            for r in [0.0, 0.25, 0.5, 0.75] {
                for k in 0..8 {
                    let zeta = Complex64::from_polar(r, TAU * k as f64 / 8.0 + 0.1);
                    assert!((d.inverse_map(d.f(zeta)).unwrap() - zeta).norm() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn schwarz_examples() {
        let r = 1.7;
        let d = PolyDomain::disk(r).unwrap();
        let z = c(1.3, 0.9);
        assert!((d.schwarz_at(z).unwrap() - r * r / z).norm() < 1e-13);
        let d = cardioid();
        let s = d.sample_boundary(256).unwrap();
        let worst = s.z.iter().map(|&z| (d.schwarz_at(z).unwrap() - z.conj()).norm()).fold(0.0, f64::max);
        assert!(worst <= 1e-10, "{worst}");
        assert!(d.schwarz_at(d.f(c(1.05, 0.0))).unwrap().norm().is_finite());
        assert!(matches!(d.schwarz_at(c(0.0, 0.0)), Err(Error::OutsideAnnulus { .. })));
    }

    #[test]
    fn delta_uses_nearest_critical_point() {
        assert_eq!(PolyDomain::disk(1.0).unwrap().delta(), MAX_DELTA);
        let d = PolyDomain::from_real(&[1.0, 0.4]).unwrap();
        assert!((d.delta() - 0.125).abs() < 1e-12);
    }

    #[test]
    fn quadrature_data_examples() {
        let d = PolyDomain::disk(1.5).unwrap();
        let q = d.quadrature_data();
        assert!((q[0] - c(PI * 2.25, 0.0)).norm() < 1e-13);
        let q = cardioid().quadrature_data();
        assert!((q[0] - c(1.08 * PI, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn area_matches_hand_value() {
        let d = cardioid();
        let s = d.sample_boundary(1024).unwrap();
        assert!((s.area() - 1.08 * PI).abs() < 1e-12);
    }

    #[test]
    fn sample_count_must_be_power_of_two() {
        assert!(cardioid().sample_boundary(1000).is_err());
    }

    #[test]
    fn locate_points() {
        let d = cardioid();
        let s = d.sample_boundary(512).unwrap();
        assert_eq!(d.locate(c(0.1, 0.0), &s, 1e-6), Location::Interior);
        assert_eq!(d.locate(c(3.0, 0.0), &s, 1e-6), Location::Exterior);
        assert!(matches!(d.locate(d.f(c(1.0, 0.0)), &s, 1e-6), Location::Boundary { .. }));
    }

    #[test]
    fn injectivity_check_is_exec_independent() {
        let d = cardioid();
        assert_eq!(check_simple_boundary(&d, Exec::Sequential), check_simple_boundary(&d, Exec::Parallel));
    }
}
