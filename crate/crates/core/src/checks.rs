//! Named numerical checks with a residual, a tolerance and a verdict.
//!
//! Every check is deterministic: sample points come from fixed seeds and
//! all sums run in a fixed order.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cpoly::{BiPoly, CPoly};
use crate::domain::{validate_domain, PolyDomain, DEFAULT_SAMPLES};
use crate::error::{Error, Result};
use crate::flow::{
    evolve_source, hamiltonian_checks, integrability_residual, invert_moments, jacobian_check, pg_residual,
    string_residual,
};
use crate::moments::{complex_moments, exp_moments, harmonic_moments, reconstruct_pq, ComplexMomentGrid, ORDER_TOL};
use crate::par::Exec;
use crate::resultant::{elimination_at, mer_resultant, RationalMap, SpherePoint};
use crate::xform::{four_variable_oracle, rational_form_eval, sphere_charts, sphere_cross, BoundaryTransform, ORACLE_BUDGET};

const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// One line of a check report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    /// `None` when the check raised an error instead of producing a number.
    pub residual: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CheckRecord {
    pub fn measured(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            residual: Some(residual),
            tolerance,
            pass: residual.is_finite() && residual <= tolerance,
            detail: None,
            error: None,
        }
    }

    pub fn failed(name: impl Into<String>, tolerance: f64, err: &Error) -> Self {
        Self { name: name.into(), residual: None, tolerance, pass: false, detail: None, error: Some(err.to_string()) }
    }

    fn from_result(name: &str, tolerance: f64, r: Result<f64>) -> Self {
        match r {
            Ok(v) => Self::measured(name, v, tolerance),
            Err(e) => Self::failed(name, tolerance, &e),
        }
    }

    fn with_detail(mut self, detail: String) -> Self {
        self.detail = Some(detail);
        self
    }
}

/// Knobs shared by all checks. `None` keeps each check's own default.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CheckOptions {
    pub samples: usize,
    pub tol: Option<f64>,
    pub fd_step: Option<f64>,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self { samples: DEFAULT_SAMPLES, tol: None, fd_step: None }
    }
}

impl CheckOptions {
    fn tol(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }

    fn step(&self, default: f64) -> f64 {
        self.fd_step.unwrap_or(default)
    }
}

/// Checks that take a domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainCheck {
    String,
    Jacobian,
    Integrability,
    Elimination,
    Reconstruct,
    Positivity,
    Schwarz,
    Area,
    Quadrature,
    RoundTrip,
    Conservation,
    Hamiltonian,
}

impl DomainCheck {
    pub const ALL: [DomainCheck; 12] = [
        DomainCheck::String,
        DomainCheck::Jacobian,
        DomainCheck::Integrability,
        DomainCheck::Elimination,
        DomainCheck::Reconstruct,
        DomainCheck::Positivity,
        DomainCheck::Schwarz,
        DomainCheck::Area,
        DomainCheck::Quadrature,
        DomainCheck::RoundTrip,
        DomainCheck::Conservation,
        DomainCheck::Hamiltonian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DomainCheck::String => "string",
            DomainCheck::Jacobian => "jacobian",
            DomainCheck::Integrability => "integrability",
            DomainCheck::Elimination => "elimination",
            DomainCheck::Reconstruct => "reconstruct",
            DomainCheck::Positivity => "positivity",
            DomainCheck::Schwarz => "schwarz",
            DomainCheck::Area => "area",
            DomainCheck::Quadrature => "quadrature",
            DomainCheck::RoundTrip => "roundtrip",
            DomainCheck::Conservation => "conservation",
            DomainCheck::Hamiltonian => "hamiltonian",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }

    pub fn run(self, d: &PolyDomain, opts: &CheckOptions) -> Vec<CheckRecord> {
        let name = self.name();
        match self {
            DomainCheck::String => {
                let tol = opts.tol(1e-6);
                let r = string_residual(d, opts.step(1e-5)).map(|b| b.max_residual());
                vec![CheckRecord::from_result(name, tol, r)]
            }
            DomainCheck::Jacobian => {
                let tol = opts.tol(1e-6);
                let r = jacobian_check(d, opts.step(1e-3)).map(|j| j.relative_defect());
                vec![CheckRecord::from_result(name, tol, r)]
            }
            DomainCheck::Integrability => {
                let tol = opts.tol(1e-4);
                if d.order() < 2 {
                    return vec![CheckRecord::measured(name, 0.0, tol).with_detail("order < 2: no mixed pairs".into())];
                }
                let r = integrability_residual(d, 1, 2, opts.step(1e-4)).map(|r| r.relative());
                vec![CheckRecord::from_result(name, tol, r)]
            }
            DomainCheck::Elimination => vec![CheckRecord::from_result(name, opts.tol(1e-7), elimination_defect(d, opts))],
            DomainCheck::Reconstruct => reconstruct_domain(d, opts),
            DomainCheck::Positivity => positivity(d, opts),
            DomainCheck::Schwarz => vec![CheckRecord::from_result(name, opts.tol(1e-9), schwarz_defect(d, opts))],
            DomainCheck::Area => {
                let r = d.sample_boundary(opts.samples).map(|s| {
                    let want = PI * harmonic_moments(d).m0;
                    (s.area() - want).abs() / want
                });
                vec![CheckRecord::from_result(name, opts.tol(1e-8), r)]
            }
            DomainCheck::Quadrature => vec![CheckRecord::from_result(name, opts.tol(1e-9), quadrature_defect(d, opts))],
            DomainCheck::RoundTrip => vec![CheckRecord::from_result(name, opts.tol(1e-10), round_trip_defect(d))],
            DomainCheck::Conservation => conservation(d, opts),
            DomainCheck::Hamiltonian => {
                if d.order() == 0 {
                    let tol = opts.tol(1e-10);
                    return vec![CheckRecord::measured(name, 0.0, tol).with_detail("order 0: no moment to vary".into())];
                }
                match hamiltonian_checks(d, 1, opts.step(1e-4)) {
                    Ok(r) => vec![
                        CheckRecord::measured("hamiltonian-green", r.green_two_point, opts.tol(1e-5)),
                        CheckRecord::measured("hamiltonian-h0", r.h0, opts.tol(1e-10)),
                        CheckRecord::measured("hamiltonian-fh", r.fh, opts.tol(1e-3)),
                    ],
                    Err(e) => vec![CheckRecord::failed(name, opts.tol(1e-3), &e)],
                }
            }
        }
    }
}

/// Exterior points at 1.2 to 3 times the coefficient bound.
pub fn exterior_points(d: &PolyDomain, count: usize, seed: u64) -> Vec<Complex64> {
    let r = d.radius_bound();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| Complex64::from_polar(rng.random_range(1.2 * r..3.0 * r), rng.random_range(0.0..TAU))).collect()
}

fn elimination_defect(d: &PolyDomain, opts: &CheckOptions) -> Result<f64> {
    let f = RationalMap::polynomial(d.map().clone());
    let g = RationalMap::from_laurent(&d.reflected());
    let bt = BoundaryTransform::new(d, opts.samples)?;
    let zs = exterior_points(d, 20, 1);
    let ws = exterior_points(d, 20, 2);
    let mut worst: f64 = 0.0;
    for (&z, &w) in zs.iter().zip(&ws) {
        let e = match elimination_at(&f, &g, z, w.conj())? {
            SpherePoint::Finite(e) => e,
            SpherePoint::Infinity => return Err(Error::Pole(format!("elimination function at ({z}, {w})"))),
        };
        worst = worst.max((e - bt.exponential(z, w)?).norm());
    }
    Ok(worst)
}

fn reconstruct_domain(d: &PolyDomain, opts: &CheckOptions) -> Vec<CheckRecord> {
    let tol = opts.tol(1e-7);
    let grid = complex_moments(d, d.order() + 2);
    let r = match reconstruct_pq(&grid, ORDER_TOL) {
        Ok(r) => r,
        Err(e) => return vec![CheckRecord::failed("reconstruct", tol, &e)],
    };
    let order = CheckRecord::measured("reconstruct-order", (r.order as f64 - (d.order() + 1) as f64).abs(), 0.0)
        .with_detail(format!("detected order {}", r.order));
    let defect = (|| {
        let bt = BoundaryTransform::new(d, opts.samples)?;
        let mut worst: f64 = 0.0;
        for (&z, &w) in exterior_points(d, 10, 3).iter().zip(&exterior_points(d, 10, 4)) {
            worst = worst.max((rational_form_eval(&r, z, w)? - bt.exponential(z, w)?).norm());
        }
        Ok(worst)
    })();
    vec![order, CheckRecord::from_result("reconstruct", tol, defect)]
}

fn min_eigenvalue(m: DMatrix<Complex64>) -> f64 {
    let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    h.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

fn positivity(d: &PolyDomain, opts: &CheckOptions) -> Vec<CheckRecord> {
    let tol = opts.tol(1e-10);
    let gram = (|| {
        let bt = BoundaryTransform::new(d, opts.samples)?;
        let pts = exterior_points(d, 8, 5);
        let n = pts.len();
        let mut e = DMatrix::from_element(n, n, ONE);
        for i in 0..n {
            for j in 0..n {
                e[(i, j)] = bt.exponential(pts[i], pts[j])?;
            }
        }
        let inv = e.map(|x| x.inv());
        let one_minus = e.map(|x| ONE - x);
        Ok((min_eigenvalue(inv), min_eigenvalue(one_minus)))
    })();
    let b = exp_moments(&complex_moments(d, d.order() + 2));
    let minor = b.leading_minors().into_iter().fold(f64::INFINITY, f64::min);
    let neg = |x: f64| (-x).max(0.0);
    let mut out = match gram {
        Ok((a, c)) => vec![
            CheckRecord::measured("positivity-inverse-e", neg(a), tol).with_detail(format!("min eigenvalue {a:e}")),
            CheckRecord::measured("positivity-one-minus-e", neg(c), tol).with_detail(format!("min eigenvalue {c:e}")),
        ],
        Err(e) => vec![CheckRecord::failed("positivity-gram", tol, &e)],
    };
    out.push(CheckRecord::measured("positivity-minors", neg(minor), tol).with_detail(format!("min minor {minor:e}")));
    out
}

fn schwarz_defect(d: &PolyDomain, opts: &CheckOptions) -> Result<f64> {
    let s = d.sample_boundary(opts.samples.min(256))?;
    let mut worst: f64 = 0.0;
    for &z in &s.z {
        worst = worst.max((d.schwarz_at(z)? - z.conj()).norm());
    }
    Ok(worst)
}

/// `∫_Ω e^z dm` by `(1/2i)∮ e^z z̄ dz` against `π Σ M_k / k!`.
fn quadrature_defect(d: &PolyDomain, opts: &CheckOptions) -> Result<f64> {
    let s = d.sample_boundary(opts.samples)?;
    let lhs = s.contour(Exec::default(), |_, z| z.exp() * z.conj()) / Complex64::new(0.0, 2.0);
    let mv = harmonic_moments(d);
    let mut rhs = Complex64::new(mv.m0, 0.0);
    let mut fact = 1.0;
    for (k, &m) in mv.m.iter().enumerate() {
        fact *= (k + 1) as f64;
        rhs += m / fact;
    }
    Ok((lhs - PI * rhs).norm())
}

fn round_trip_defect(d: &PolyDomain) -> Result<f64> {
    let seed = PolyDomain::disk(d.a0())?;
    let back = invert_moments(&harmonic_moments(d), &seed)?;
    Ok(back.coeffs().iter().zip(d.coeffs()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max))
}

fn conservation(d: &PolyDomain, opts: &CheckOptions) -> Vec<CheckRecord> {
    let tr = match evolve_source(d, 1.0, 100) {
        Ok(tr) => tr,
        Err(e) => return vec![CheckRecord::failed("conservation", opts.tol(1e-9), &e)],
    };
    if let Some(term) = &tr.termination {
        return vec![CheckRecord::failed("conservation", opts.tol(1e-9), &term.reason)];
    }
    let first = &tr.states[0].moments;
    let mut drift: f64 = 0.0;
    let mut growth: f64 = 0.0;
    let mut area: f64 = 0.0;
    let mut area_err = None;
    for st in &tr.states {
        for k in 1..=first.order().max(st.moments.order()) {
            drift = drift.max((st.moments.get(k) - first.get(k)).norm());
        }
        growth = growth.max((st.moments.m0 - 2.0 * st.t - first.m0).abs());
        match st.domain.sample_boundary(opts.samples) {
            Ok(s) => area = area.max((s.area() - PI * st.moments.m0).abs() / (PI * st.moments.m0)),
            Err(e) => area_err = Some(e),
        }
    }
    vec![
        CheckRecord::measured("conservation-drift", drift, opts.tol(1e-9)),
        CheckRecord::measured("conservation-source", growth, opts.tol(1e-9)),
        match area_err {
            Some(e) => CheckRecord::failed("conservation-area", opts.tol(1e-8), &e),
            None => CheckRecord::measured("conservation-area", area, opts.tol(1e-8)),
        },
        CheckRecord::from_result("conservation-pg", opts.tol(1e-6), pg_residual(&tr.states)),
    ]
}

/// Two-chart sphere quadrature of the four-variable transform against
/// `|(z:a:w:b)|²`, relative.
pub fn crossratio_check(opts: &CheckOptions) -> CheckRecord {
    let tol = opts.tol(1e-3);
    let c = Complex64::new;
    let tuples = [
        [c(0.3, 0.2), c(1.4, -0.7), c(-0.8, 1.1), c(2.2, 1.9)],
        [c(-1.5, 0.4), c(0.1, -0.3), c(3.0, 0.5), c(0.7, 0.9)],
        [c(0.9, -1.2), c(-0.4, 0.6), c(1.8, 0.2), c(-2.1, -0.8)],
        [c(0.05, 0.5), c(2.5, -1.5), c(-1.0, -1.0), c(0.6, 2.4)],
        [c(-0.7, -0.2), c(1.1, 1.3), c(0.2, -2.0), c(-3.0, 0.4)],
    ];
    let r = (|| {
        let mut worst: f64 = 0.0;
        for t in tuples {
            let pts = t.map(SpherePoint::Finite);
            let got = four_variable_oracle(&sphere_charts(&pts), pts, ORACLE_BUDGET, Exec::default())?;
            // E(z, w; a, b) pairs with (z:a:w:b)
            let want = sphere_cross(pts[0], pts[2], pts[1], pts[3])?;
            worst = worst.max((got - want).norm() / want);
        }
        Ok(worst)
    })();
    CheckRecord::from_result("crossratio", tol, r)
}

fn random_map(rng: &mut ChaCha8Rng, deg: usize) -> Result<RationalMap> {
    let mut p = || CPoly::new((0..=deg).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect());
    let num = p();
    RationalMap::new(num, p())
}

/// `Res(f, g) = Res(g, f)` over random regular pairs of degree ≤ 4.
pub fn weil_check(opts: &CheckOptions) -> CheckRecord {
    let tol = opts.tol(1e-10);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let r = (|| {
        let mut worst: f64 = 0.0;
        let mut pairs = 0;
        while pairs < 50 {
            let (m, n) = (rng.random_range(1..=4), rng.random_range(1..=4));
            let f = random_map(&mut rng, m)?;
            let g = random_map(&mut rng, n)?;
            let (a, b) = match (mer_resultant(&f, &g), mer_resultant(&g, &f)) {
                (Ok(SpherePoint::Finite(a)), Ok(SpherePoint::Finite(b))) => (a, b),
                // a random pair that touches ∞ or has clustered roots is not regular
                (Err(Error::Multiplicity { .. }), _) | (_, Err(Error::Multiplicity { .. })) => continue,
                (Ok(SpherePoint::Infinity), _) | (_, Ok(SpherePoint::Infinity)) => continue,
                (Err(e), _) | (_, Err(e)) => return Err(e),
            };
            worst = worst.max((a - b).norm() / a.norm());
            pairs += 1;
        }
        Ok(worst)
    })();
    CheckRecord::from_result("weil", tol, r)
}

/// Names accepted by [`example_grid`].
pub const EXAMPLES: [&str; 1] = ["paper41"];

/// Built-in moment grids with their expected reconstruction:
/// `(grid, P, Q, center, radius)`.
pub fn example_grid(name: &str) -> Result<(ComplexMomentGrid, CPoly, BiPoly, Complex64, f64)> {
    let c = |x: f64| Complex64::new(x, 0.0);
    match name {
        "paper41" => {
            let grid = ComplexMomentGrid::from_grid(&[vec![c(4.0), c(4.0)], vec![c(4.0), c(12.0)]])?;
            let p = CPoly::from_real(&[-1.0, 1.0]);
            let q = BiPoly::new(vec![vec![c(-3.0), c(-1.0)], vec![c(-1.0), c(1.0)]]);
            Ok((grid, p, q, c(1.0), 2.0))
        }
        _ => Err(Error::InvalidArgument(format!("unknown example {name:?}; known: {}", EXAMPLES.join(", ")))),
    }
}

/// Reconstruction of a built-in moment grid, compared coefficientwise.
pub fn reconstruct_example(name: &str, opts: &CheckOptions) -> Result<Vec<CheckRecord>> {
    let (grid, p, q, center, radius) = example_grid(name)?;
    let tol = opts.tol(1e-12);
    let r = match reconstruct_pq(&grid, ORDER_TOL) {
        Ok(r) => r,
        Err(e) => return Ok(vec![CheckRecord::failed("reconstruct", tol, &e)]),
    };
    let b = &r.b;
    let mut b_err: f64 = 0.0;
    for k in 0..=b.order() {
        for j in 0..=b.order() {
            b_err = b_err.max((b.get(k, j) - Complex64::new(4.0, 0.0)).norm());
        }
    }
    let p_err = (0..=p.degree().max(r.p.degree())).map(|k| (r.p.coeff(k) - p.coeff(k)).norm()).fold(0.0, f64::max);
    let q_err = r.q.max_diff(&q);
    let disk_err = match r.as_disk() {
        Some((a, rad)) => (a - center).norm().max((rad - radius).abs()),
        None => f64::INFINITY,
    };
    Ok(vec![
        CheckRecord::measured("reconstruct-b", b_err, tol),
        CheckRecord::measured("reconstruct-order", (r.order as f64 - p.degree() as f64).abs(), 0.0)
            .with_detail(format!("detected order {}", r.order)),
        CheckRecord::measured("reconstruct-p", p_err, tol).with_detail(format!("P = {}", format_poly(&r.p))),
        CheckRecord::measured("reconstruct-q", q_err, tol).with_detail(format!("Q = {}", format_bipoly(&r.q))),
        CheckRecord::measured("reconstruct-disk", disk_err, tol).with_detail(match r.as_disk() {
            Some((a, rad)) => format!("center {}, radius {}", format_coeff(a), format_real(rad)),
            None => "not a disk".into(),
        }),
    ])
}

fn format_real(x: f64) -> String {
    // 12 decimals strips round-off without hiding real digits
    let r = (x * 1e12).round() / 1e12;
    format!("{}", if r == 0.0 { 0.0 } else { r })
}

fn format_coeff(c: Complex64) -> String {
    if c.im.abs() <= 1e-12 {
        format_real(c.re)
    } else {
        format!("({}{:+}i)", format_real(c.re), (c.im * 1e12).round() / 1e12)
    }
}

fn join_terms(terms: Vec<(Complex64, String)>) -> String {
    let mut out = String::new();
    for (c, mono) in terms {
        if c.norm() <= 1e-12 {
            continue;
        }
        let (neg, mag) = if c.im.abs() <= 1e-12 { (c.re < 0.0, Complex64::new(c.re.abs(), 0.0)) } else { (false, c) };
        let coeff = if (mag - ONE).norm() <= 1e-12 && !mono.is_empty() { String::new() } else { format_coeff(mag) };
        let body = match (coeff.is_empty(), mono.is_empty()) {
            (true, _) => mono,
            (false, true) => coeff,
            (false, false) => format!("{coeff} {mono}"),
        };
        match (out.is_empty(), neg) {
            (true, true) => out.push_str(&format!("-{body}")),
            (true, false) => out.push_str(&body),
            (false, true) => out.push_str(&format!(" - {body}")),
            (false, false) => out.push_str(&format!(" + {body}")),
        }
    }
    if out.is_empty() {
        "0".into()
    } else {
        out
    }
}

fn power(var: &str, k: usize) -> String {
    match k {
        0 => String::new(),
        1 => var.into(),
        _ => format!("{var}^{k}"),
    }
}

/// `z - 1` style rendering, highest degree first.
pub fn format_poly(p: &CPoly) -> String {
    join_terms((0..=p.degree()).rev().map(|k| (p.coeff(k), power("z", k))).collect())
}

/// `z w̄ - z - w̄ - 3` style rendering by descending total degree.
pub fn format_bipoly(q: &BiPoly) -> String {
    let n = q.coeffs().len();
    let m = q.coeffs().iter().map(|r| r.len()).max().unwrap_or(0);
    let mut terms = Vec::new();
    for total in (0..n + m).rev() {
        for p in (0..n).rev() {
            if total < p || total - p >= m {
                continue;
            }
            let j = total - p;
            let mono = [power("z", p), power("w̄", j)].into_iter().filter(|s| !s.is_empty()).collect::<Vec<_>>().join(" ");
            terms.push((q.coeff(p, j), mono));
        }
    }
    join_terms(terms)
}

/// Names accepted by [`corpus`].
pub const CORPORA: [&str; 1] = ["default"];

/// Built-in domains.
pub fn corpus(name: &str) -> Result<Vec<(&'static str, PolyDomain)>> {
    let c = Complex64::new;
    match name {
        "default" => Ok(vec![
            ("disk", PolyDomain::disk(1.3)?),
            ("cardioid", PolyDomain::from_real(&[1.0, 0.2])?),
            ("tilted", validate_domain(&[c(1.0, 0.0), c(0.1, 0.1), c(0.04, 0.0)])?),
            ("cubic", PolyDomain::from_real(&[1.0, 0.15, 0.04])?),
            ("quartic", validate_domain(&[c(1.0, 0.0), c(0.1, 0.05), c(0.06, -0.03), c(0.04, 0.02)])?),
        ]),
        _ => Err(Error::InvalidArgument(format!("unknown corpus {name:?}; known: {}", CORPORA.join(", ")))),
    }
}

/// Every domain check on every corpus member, then the domain-free checks.
pub fn run_all(domains: &[(&str, PolyDomain)], opts: &CheckOptions) -> Vec<CheckRecord> {
    let mut out = Vec::new();
    for (label, d) in domains {
        for check in DomainCheck::ALL {
            for mut rec in check.run(d, opts) {
                rec.name = format!("{label}/{}", rec.name);
                out.push(rec);
            }
        }
    }
    for name in EXAMPLES {
        match reconstruct_example(name, opts) {
            Ok(recs) => out.extend(recs.into_iter().map(|mut r| {
                r.name = format!("{name}/{}", r.name);
                r
            })),
            Err(e) => out.push(CheckRecord::failed(name, opts.tol(1e-12), &e)),
        }
    }
    out.push(crossratio_check(opts));
    out.push(weil_check(opts));
    out
}
