//! Moment coordinates: Newton inversion of Richardson's map, the Jacobian
//! identity, Laplacian-growth evolutions and the residuals of the string,
//! Polubarinova–Galin, integrability and Hamiltonian identities.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::cpoly::{CPoly, LaurentPoly, Reflect};
use crate::domain::{validate_domain_with, PolyDomain, Univalence, DEFAULT_SAMPLES};
use crate::error::{Error, Result};
use crate::moments::{harmonic_moments, negative_moments, richardson, MomentVector};
use crate::par::{self, Exec};
use crate::resultant::{mer_resultant, RationalMap, SpherePoint};

pub const NEWTON_MAX_ITER: usize = 60;
/// Accepted moment residual of an inversion, relative to `max(1, |M|∞)`.
pub const INVERT_TOL: f64 = 1e-12;
pub const MAX_HALVINGS: u32 = 10;
/// Negative moments kept in the truncated W series.
pub const W_TERMS: usize = 60;
pub const BRACKET_SAMPLES: usize = 256;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Central difference stencil.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Stencil {
    /// `(g(h) − g(−h)) / 2h`
    #[default]
    Second,
    /// `(g(−2h) − 8g(−h) + 8g(h) − g(2h)) / 12h`
    Fourth,
    /// Seven-point stencil, error `O(h⁶)`.
    Sixth,
}

impl Stencil {
    fn nodes(self) -> &'static [(f64, f64)] {
        match self {
            Stencil::Second => &[(-1.0, -0.5), (1.0, 0.5)],
            Stencil::Fourth => &[(-2.0, 1.0 / 12.0), (-1.0, -8.0 / 12.0), (1.0, 8.0 / 12.0), (2.0, -1.0 / 12.0)],
            Stencil::Sixth => &[
                (-3.0, -1.0 / 60.0),
                (-2.0, 3.0 / 20.0),
                (-1.0, -3.0 / 4.0),
                (1.0, 3.0 / 4.0),
                (2.0, -3.0 / 20.0),
                (3.0, 1.0 / 60.0),
            ],
        }
    }

    fn reach(self) -> usize {
        match self {
            Stencil::Second => 1,
            Stencil::Fourth => 2,
            Stencil::Sixth => 3,
        }
    }
}

/// Derivative at 0 of a vector-valued `g`.
fn central<F>(h: f64, stencil: Stencil, g: F) -> Result<Vec<Complex64>>
where
    F: Fn(f64) -> Result<Vec<Complex64>>,
{
    let mut acc: Vec<Complex64> = Vec::new();
    for &(x, w) in stencil.nodes() {
        let v = g(x * h)?;
        if acc.is_empty() {
            acc = vec![ZERO; v.len()];
        }
        if v.len() != acc.len() {
            return Err(Error::InvalidArgument("stencil evaluations changed length".into()));
        }
        for (a, b) in acc.iter_mut().zip(&v) {
            *a += b * (w / h);
        }
    }
    Ok(acc)
}

/// `(a₀, Re a₁, Im a₁, …)`
fn to_real(a: &[Complex64]) -> Vec<f64> {
    let mut y = vec![a[0].re];
    for c in &a[1..] {
        y.push(c.re);
        y.push(c.im);
    }
    y
}

fn from_real(y: &[f64]) -> Vec<Complex64> {
    let mut a = vec![Complex64::new(y[0], 0.0)];
    a.extend(y[1..].chunks(2).map(|p| Complex64::new(p[0], p[1])));
    a
}

fn moments_real(a: &[Complex64]) -> Vec<f64> {
    let m = richardson(a, a.len() - 1);
    let mut x = vec![m[0].re];
    for c in &m[1..] {
        x.push(c.re);
        x.push(c.im);
    }
    x
}

/// Wirtinger derivatives `(∂M_k/∂a_m, ∂M_k/∂ā_m)` of Richardson's sum.
pub fn moment_wirtinger(a: &[Complex64]) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let n = a.len() - 1;
    let base = CPoly::new(a.to_vec());
    let weighted = CPoly::new(a.iter().enumerate().map(|(j, &c)| c * (j + 1) as f64).collect());
    let mut da = DMatrix::zeros(n + 1, n + 1);
    let mut dabar = DMatrix::zeros(n + 1, n + 1);
    // A^{k−1} and A^k
    let mut prev = CPoly::constant(ZERO);
    let mut pow = CPoly::constant(Complex64::new(1.0, 0.0));
    for k in 0..=n {
        let bak = &weighted * &pow;
        for m in k..=n {
            dabar[(k, m)] = bak.coeff(m - k);
        }
        for m in 0..=n {
            // ∂(B A^k)/∂a_m = x^m ((m+1) A^k + k B A^{k−1})
            let c = &pow.scaled(Complex64::new((m + 1) as f64, 0.0)) + &(&weighted * &prev).scaled(Complex64::new(k as f64, 0.0));
            let mut s = ZERO;
            for idx in m..=n.saturating_sub(k) {
                s += c.coeff(idx - m) * a[idx + k].conj();
            }
            da[(k, m)] = s;
        }
        prev = pow.clone();
        pow = &pow * &base;
    }
    (da, dabar)
}

/// Real Jacobian of `(a₀, Re a₁, Im a₁, …) ↦ (M₀, Re M₁, Im M₁, …)`.
pub fn moment_jacobian(a: &[Complex64]) -> DMatrix<f64> {
    let n = a.len() - 1;
    let (da, dabar) = moment_wirtinger(a);
    let dim = 2 * n + 1;
    let mut j = DMatrix::zeros(dim, dim);
    for k in 0..=n {
        for m in 0..=n {
            let (p, q) = (da[(k, m)], dabar[(k, m)]);
            let cols: Vec<(usize, Complex64)> = if m == 0 {
                vec![(0, p + q)]
            } else {
                vec![(2 * m - 1, p + q), (2 * m, I * (p - q))]
            };
            for (col, v) in cols {
                if k == 0 {
                    j[(0, col)] = v.re;
                } else {
                    j[(2 * k - 1, col)] = v.re;
                    j[(2 * k, col)] = v.im;
                }
            }
        }
    }
    j
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize)]
pub struct NewtonStats {
    pub iterations: usize,
    /// Max-norm moment residual of the result.
    pub residual: f64,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn residual(y: &[f64], target: &[f64]) -> Vec<f64> {
    moments_real(&from_real(y)).iter().zip(target).map(|(m, t)| m - t).collect()
}

/// Domain whose moments `M₀..M_N` equal `target`, by damped Newton from `seed`.
pub fn invert_moments(target: &MomentVector, seed: &PolyDomain) -> Result<PolyDomain> {
    invert_moments_with(target, seed).map(|(d, _)| d)
}

pub fn invert_moments_with(target: &MomentVector, seed: &PolyDomain) -> Result<(PolyDomain, NewtonStats)> {
    let n = target.order();
    let x = target.to_real();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut a: Vec<Complex64> = seed.coeffs().to_vec();
    a.resize(n + 1, ZERO);
    let mut y = to_real(&a);
    let mut r = residual(&y, &x);
    let mut rn = inf_norm(&r);
    let mut iterations = 0;
    while iterations < NEWTON_MAX_ITER && rn > 4.0 * f64::EPSILON * scale {
        iterations += 1;
        let jac = moment_jacobian(&from_real(&y));
        let hadamard: f64 = jac.column_iter().map(|c| c.norm()).product();
        let det = jac.determinant();
        if det.abs() <= 1e-13 * hadamard {
            return Err(Error::SingularJacobian { det });
        }
        let step = jac
            .lu()
            .solve(&DVector::from_iterator(r.len(), r.iter().map(|v| -v)))
            .ok_or(Error::SingularJacobian { det })?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = y.iter().zip(step.iter()).map(|(a, s)| a + lambda * s).collect();
            if trial[0] > 0.0 {
                let rt = residual(&trial, &x);
                let rtn = inf_norm(&rt);
                if rtn < rn {
                    y = trial;
                    r = rt;
                    rn = rtn;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if rn > INVERT_TOL * scale || !rn.is_finite() {
        return Err(Error::InversionFailed { iterations, residual: rn });
    }
    let d = validate_domain_with(&from_real(&y), seed.univalence())?;
    Ok((d, NewtonStats { iterations, residual: rn }))
}

/// Same domain without the boundary certificate, for differencing.
fn local(d: &PolyDomain) -> Result<PolyDomain> {
    if d.univalence() == Univalence::LocalOnly {
        Ok(d.clone())
    } else {
        validate_domain_with(d.coeffs(), Univalence::LocalOnly)
    }
}

/// Domain with real moment coordinate `coord` moved by `delta`.
fn shifted(d: &PolyDomain, coord: usize, delta: f64) -> Result<PolyDomain> {
    let mut x = harmonic_moments(d).to_real();
    x[coord] += delta;
    invert_moments(&MomentVector::from_real(&x), d)
}

/// `∂a/∂x_coord` for a real moment coordinate.
fn coeff_derivative(d: &PolyDomain, coord: usize, h: f64, stencil: Stencil) -> Result<Vec<Complex64>> {
    let d = local(d)?;
    central(h, stencil, |s| Ok(shifted(&d, coord, s)?.coeffs().to_vec()))
}

/// `∂a/∂M_k` in the Wirtinger sense, `½(∂/∂Re M_k − i ∂/∂Im M_k)`.
fn coeff_wirtinger(d: &PolyDomain, k: usize, h: f64, stencil: Stencil) -> Result<Vec<Complex64>> {
    if k == 0 {
        return coeff_derivative(d, 0, h, stencil);
    }
    let re = coeff_derivative(d, 2 * k - 1, h, stencil)?;
    let im = coeff_derivative(d, 2 * k, h, stencil)?;
    Ok(re.iter().zip(&im).map(|(r, i)| (r - I * i) * 0.5).collect())
}

/// Both sides of the volume-form identity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JacobianCheck {
    /// Determinant of the real moment Jacobian by central differences.
    pub fd_det: f64,
    /// `2 a₀^{N²+3N+1} Res(f′, f′*)`.
    pub formula: f64,
}

impl JacobianCheck {
    /// `| |fd| / |formula| − 1 |`
    pub fn relative_defect(&self) -> f64 {
        (self.fd_det.abs() / self.formula.abs() - 1.0).abs()
    }
}

/// `2 a₀^{N²+3N+1} Res(f′, f′*)`.
pub fn jacobian_formula(d: &PolyDomain) -> Result<f64> {
    let n = d.order() as i32;
    let df = d.map_derivative();
    let res = mer_resultant(&RationalMap::polynomial(df.clone()), &RationalMap::from_laurent(&df.reflect()))?;
    match res {
        SpherePoint::Finite(v) => Ok(2.0 * d.a0().powi(n * n + 3 * n + 1) * v.re),
        SpherePoint::Infinity => Err(Error::Undefined("Res(f′, f′*) is infinite".into())),
    }
}

/// Finite-difference determinant against [`jacobian_formula`]. The step is
/// halved while a perturbed map has a critical point in the closed disk.
pub fn jacobian_check(d: &PolyDomain, h: f64) -> Result<JacobianCheck> {
    let y0 = to_real(d.coeffs());
    let dim = y0.len();
    let mut step = h;
    for _ in 0..=MAX_HALVINGS {
        let mut jac = DMatrix::zeros(dim, dim);
        let mut ok = true;
        'cols: for col in 0..dim {
            let mut acc = vec![0.0; dim];
            for &(x, w) in Stencil::Fourth.nodes() {
                let mut y = y0.clone();
                y[col] += x * step;
                let a = from_real(&y);
                if validate_domain_with(&a, Univalence::LocalOnly).is_err() {
                    ok = false;
                    break 'cols;
                }
                for (s, m) in acc.iter_mut().zip(moments_real(&a)) {
                    *s += m * w / step;
                }
            }
            for (row, v) in acc.into_iter().enumerate() {
                jac[(row, col)] = v;
            }
        }
        if ok {
            return Ok(JacobianCheck { fd_det: jac.determinant(), formula: jacobian_formula(d)? });
        }
        step *= 0.5;
    }
    Err(Error::InvalidArgument(format!("no univalent differencing step down to {step:e}")))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepStats {
    pub iterations: usize,
    pub residual: f64,
    /// Interval halvings needed to reach this state.
    pub halvings: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionState {
    pub t: f64,
    pub domain: PolyDomain,
    /// `harmonic_moments(domain)`
    pub moments: MomentVector,
    pub stats: StepStats,
}

/// Why an evolution stopped early.
#[derive(Clone, Debug, PartialEq)]
pub struct Termination {
    /// Last time that could not be reached.
    pub t: f64,
    pub reason: Error,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<EvolutionState>,
    pub termination: Option<Termination>,
}

/// Continuation driver: one inversion per grid time seeded by the last
/// accepted state, halving the interval on failure.
fn evolve<F>(d0: &PolyDomain, t_end: f64, steps: usize, target: F) -> Result<Trajectory>
where
    F: Fn(f64) -> MomentVector,
{
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be at least 1".into()));
    }
    if !t_end.is_finite() {
        return Err(Error::NonFinite);
    }
    let initial = EvolutionState {
        t: 0.0,
        domain: d0.clone(),
        moments: harmonic_moments(d0),
        stats: StepStats { iterations: 0, residual: 0.0, halvings: 0 },
    };
    let mut states = vec![initial];
    for i in 1..=steps {
        let prev = states.last().expect("nonempty");
        let (t0, t1) = (prev.t, t_end * i as f64 / steps as f64);
        let mut seed = prev.domain.clone();
        let mut halvings = 0;
        let mut last = None;
        // substeps of [t0, t1]; refined on failure
        let mut sub = 1usize;
        let mut done = 0usize;
        let mut t_now = t0;
        let mut total_iter = 0;
        while done < sub {
            let t = t0 + (t1 - t0) * (done + 1) as f64 / sub as f64;
            match invert_moments_with(&target(t), &seed) {
                Ok((d, stats)) => {
                    seed = d;
                    total_iter += stats.iterations;
                    last = Some(stats);
                    done += 1;
                    t_now = t;
                }
                Err(e) => {
                    if halvings == MAX_HALVINGS {
                        return Ok(Trajectory { states, termination: Some(Termination { t, reason: e }) });
                    }
                    halvings += 1;
                    // keep the progress already made
                    let frac = (t_now - t0) / (t1 - t0);
                    sub *= 2;
                    done = (frac * sub as f64).round() as usize;
                }
            }
        }
        let stats = last.expect("at least one substep");
        let moments = harmonic_moments(&seed);
        states.push(EvolutionState {
            t: t1,
            domain: seed,
            moments,
            stats: StepStats { iterations: total_iter, residual: stats.residual, halvings },
        });
    }
    Ok(Trajectory { states, termination: None })
}

/// Laplacian growth with a unit source at the origin: `M₀ = M₀(0) + 2t`,
/// higher moments fixed. Negative `t_end` is suction and stops at loss of
/// univalence.
pub fn evolve_source(d0: &PolyDomain, t_end: f64, steps: usize) -> Result<Trajectory> {
    let m = harmonic_moments(d0);
    evolve(d0, t_end, steps, |t| {
        let mut x = m.clone();
        x.m0 += 2.0 * t;
        x
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Re,
    Im,
}

/// Evolution driven by `L = ∂^k/∂x^k` (`Re`) or `∂^k/∂x^{k−1}∂y` (`Im`):
/// `Re M_k` (resp. `Im M_k`) grows with slope `2·k!`.
pub fn evolve_moment(d0: &PolyDomain, k: usize, dir: Direction, t_end: f64, steps: usize) -> Result<Trajectory> {
    let n = d0.order();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("moment index {k} outside 1..={n}")));
    }
    let x0 = harmonic_moments(d0).to_real();
    let slope = 2.0 * (1..=k).map(|i| i as f64).product::<f64>();
    let coord = match dir {
        Direction::Re => 2 * k - 1,
        Direction::Im => 2 * k,
    };
    evolve(d0, t_end, steps, |t| {
        let mut x = x0.clone();
        x[coord] += slope * t;
        MomentVector::from_real(&x)
    })
}

/// `{f, g}` on an equispaced grid of the unit circle.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BracketSample {
    pub theta: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl BracketSample {
    /// `max |{f, f*} − 1|`
    pub fn max_residual(&self) -> f64 {
        self.values.iter().map(|v| (v - 1.0).norm()).fold(0.0, f64::max)
    }
}

/// `{f, f*}` with `∂/∂M₀` by central differences of step `h`.
pub fn string_residual(d: &PolyDomain, h: f64) -> Result<BracketSample> {
    string_residual_with(d, h, BRACKET_SAMPLES, Stencil::Second)
}

pub fn string_residual_with(d: &PolyDomain, h: f64, samples: usize, stencil: Stencil) -> Result<BracketSample> {
    let da = coeff_derivative(d, 0, h, stencil)?;
    let a = d.coeffs();
    let theta: Vec<f64> = (0..samples).map(|j| TAU * j as f64 / samples as f64).collect();
    let values = par::map(Exec::default(), samples, |j| {
        let z = Complex64::from_polar(1.0, theta[j]);
        let (mut df_m0, mut dfs_m0, mut dfs) = (ZERO, ZERO, ZERO);
        for (k, (c, dc)) in a.iter().zip(&da).enumerate() {
            let p = k as i32 + 1;
            df_m0 += dc * z.powi(p);
            dfs_m0 += dc.conj() * z.powi(-p);
            dfs -= c.conj() * p as f64 * z.powi(-p - 1);
        }
        z * d.df(z) * dfs_m0 - z * dfs * df_m0
    });
    Ok(BracketSample { theta, values })
}

/// `max |Re[ḟ conj(ζ f′)] − 1|` over interior states of a source
/// trajectory, with `ḟ` by the widest central stencil the trajectory allows.
pub fn pg_residual(traj: &[EvolutionState]) -> Result<f64> {
    let stencil = match traj.len() {
        n if n >= 7 => Stencil::Sixth,
        5 | 6 => Stencil::Fourth,
        _ => Stencil::Second,
    };
    pg_residual_with(traj, stencil, BRACKET_SAMPLES)
}

pub fn pg_residual_with(traj: &[EvolutionState], stencil: Stencil, samples: usize) -> Result<f64> {
    let reach = stencil.reach();
    if traj.len() < 2 * reach + 1 {
        return Err(Error::InvalidArgument(format!("need at least {} states, got {}", 2 * reach + 1, traj.len())));
    }
    let dt = traj[1].t - traj[0].t;
    for w in traj.windows(2) {
        if ((w[1].t - w[0].t) - dt).abs() > 1e-9 * dt.abs() {
            return Err(Error::InvalidArgument("trajectory is not equispaced in t".into()));
        }
    }
    let n = traj[0].domain.order();
    if traj.iter().any(|s| s.domain.order() != n) {
        return Err(Error::InvalidArgument("order changes along the trajectory".into()));
    }
    let mut worst: f64 = 0.0;
    for i in reach..traj.len() - reach {
        let mut adot = vec![ZERO; n + 1];
        for &(x, w) in stencil.nodes() {
            let s = &traj[(i as i64 + x as i64) as usize];
            for (acc, c) in adot.iter_mut().zip(s.domain.coeffs()) {
                *acc += c * (w / dt);
            }
        }
        let d = &traj[i].domain;
        let local = par::map(Exec::default(), samples, |j| {
            let z = Complex64::from_polar(1.0, TAU * j as f64 / samples as f64);
            let fdot: Complex64 = adot.iter().enumerate().map(|(k, c)| c * z.powi(k as i32 + 1)).sum();
            ((fdot * (z * d.df(z)).conj()).re - 1.0).abs()
        });
        worst = local.into_iter().fold(worst, f64::max);
    }
    Ok(worst)
}

/// `|(1/k)∂M₋k/∂M_j − (1/j)∂M₋j/∂M_k|` and the scale it is measured against.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IntegrabilityResidual {
    pub residual: f64,
    /// `max(|∂M₋k/∂M_j|, |∂M₋j/∂M_k|, 1)`
    pub scale: f64,
}

impl IntegrabilityResidual {
    pub fn relative(&self) -> f64 {
        self.residual / self.scale
    }
}

/// Wirtinger derivative `∂M₋·/∂M_k` of the first `count` negative moments.
fn negative_wirtinger(d: &PolyDomain, k: usize, count: usize, h: f64) -> Result<Vec<Complex64>> {
    let d = local(d)?;
    let part = |coord: usize| {
        central(h, Stencil::Second, |s| negative_moments(&shifted(&d, coord, s)?, count, DEFAULT_SAMPLES))
    };
    let re = part(2 * k - 1)?;
    let im = part(2 * k)?;
    Ok(re.iter().zip(&im).map(|(r, i)| (r - I * i) * 0.5).collect())
}

pub fn integrability_residual(d: &PolyDomain, k: usize, j: usize, h: f64) -> Result<IntegrabilityResidual> {
    let n = d.order();
    if k == 0 || j == 0 || k > n || j > n {
        return Err(Error::InvalidArgument(format!("indices ({k}, {j}) outside 1..={n}")));
    }
    if k == j {
        return Ok(IntegrabilityResidual { residual: 0.0, scale: 1.0 });
    }
    let count = k.max(j);
    let by_j = negative_wirtinger(d, j, count, h)?;
    let by_k = negative_wirtinger(d, k, count, h)?;
    let (a, b) = (by_j[k - 1], by_k[j - 1]);
    Ok(IntegrabilityResidual {
        residual: (a / k as f64 - b / j as f64).norm(),
        scale: a.norm().max(b.norm()).max(1.0),
    })
}

/// A primitive `W` of the Schwarz function, `W′ = S`, in closed form:
/// `W(z) = M₀ log z + P(ζ) − M₀ log(f(ζ)/ζ) + K` with `ζ = f⁻¹(z)` and
/// `P` the Laurent primitive of `f* f′ − M₀/ζ`. `K` is fixed so that the
/// Laurent expansion at 0 has a real constant `C` and `Re W = |z|²/2` at
/// `z = f(1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WFunction {
    domain: PolyDomain,
    prim: LaurentPoly,
    /// Nonzero roots of `f`, for the branch of `log(f(ζ)/ζ)` on the disk.
    roots: Vec<Complex64>,
    m0: f64,
    k: Complex64,
    c: f64,
}

impl WFunction {
    pub fn new(d: &PolyDomain) -> Result<Self> {
        let m0 = harmonic_moments(d).m0;
        let integrand = &d.reflected() * &LaurentPoly::from(d.map_derivative());
        let prim = LaurentPoly::new(
            integrand.low() + 1,
            (integrand.low()..=integrand.high())
                .map(|p| if p == -1 { ZERO } else { integrand.coeff(p) / (p + 1) as f64 })
                .collect(),
        );
        let quotient = CPoly::new(d.coeffs().to_vec());
        let roots = if quotient.degree() == 0 { Vec::new() } else { quotient.roots()? };
        let mut w = Self { domain: d.clone(), prim, roots, m0, k: ZERO, c: 0.0 };
        // the constant coefficient at z = 0 of W − M₀ log z without K is the
        // residue of (P − M₀ log(f/ζ)) f′/f at ζ = 0
        let n = DEFAULT_SAMPLES;
        let kappa = par::sum(Exec::default(), n, |j| {
            let u = Complex64::from_polar(0.5, TAU * j as f64 / n as f64);
            w.bare(u) * d.df(u) / d.f(u) * u
        }) / n as f64;
        let one = Complex64::new(1.0, 0.0);
        let z1 = d.f(one);
        let re = (w.bare(one) + m0 * z1.ln()).re - kappa.re;
        w.c = 0.5 * z1.norm_sqr() - re;
        w.k = Complex64::new(w.c, 0.0) - kappa;
        Ok(w)
    }

    /// `P(ζ) − M₀ log(f(ζ)/ζ)`
    fn bare(&self, u: Complex64) -> Complex64 {
        let log_quot = self.roots.iter().map(|r| (1.0 - u / r).ln()).sum::<Complex64>() + self.domain.a0().ln();
        self.prim.eval(u) - self.m0 * log_quot
    }

    pub fn domain(&self) -> &PolyDomain {
        &self.domain
    }

    /// Real constant `C` of the Laurent form.
    pub fn constant(&self) -> f64 {
        self.c
    }

    fn zeta(&self, z: Complex64) -> Result<Complex64> {
        let d = &self.domain;
        if z == ZERO {
            return Err(Error::Pole("W has a logarithmic singularity at 0".into()));
        }
        let delta = d.delta();
        let u = d.preimage_within(z, 1.0 + delta).ok_or(Error::OutsideAnnulus { z, modulus: f64::INFINITY, delta })?;
        if self.roots.iter().any(|r| r.norm() <= u.norm()) {
            return Err(Error::OutsideAnnulus { z, modulus: u.norm(), delta });
        }
        Ok(u)
    }

    /// `W(z)` at `z = f(ζ)`, `0 < |ζ| ≤ 1 + δ`, principal `log z`.
    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        let u = self.zeta(z)?;
        Ok(self.eval_at_preimage(z, u))
    }

    fn eval_at_preimage(&self, z: Complex64, u: Complex64) -> Complex64 {
        self.m0 * z.ln() + self.bare(u) + self.k
    }

    /// `W′(z) = S(z) = f*(f⁻¹(z))`
    pub fn derivative(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.domain.f_star(self.zeta(z)?))
    }

    /// Truncated Laurent form with `J` negative moments.
    pub fn series(&self, terms: usize) -> Result<WSeries> {
        let d = &self.domain;
        let n = d.order();
        let mv = harmonic_moments(d);
        let neg = negative_moments(d, terms, DEFAULT_SAMPLES)?;
        let mut coeffs = Vec::with_capacity(n + terms + 1);
        for k in (1..=n).rev() {
            coeffs.push(-mv.get(k) / k as f64);
        }
        coeffs.push(ZERO);
        for (m, c) in neg.iter().enumerate() {
            coeffs.push(c / (m + 1) as f64);
        }
        Ok(WSeries { log_coeff: self.m0, low: -(n as i32), coeffs, c: self.c })
    }
}

/// `Σ_n w_n z^n + M₀ log z + C`
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WSeries {
    pub log_coeff: f64,
    /// Power of `coeffs[0]`.
    pub low: i32,
    pub coeffs: Vec<Complex64>,
    pub c: f64,
}

impl WSeries {
    fn check_tail(&self, z: Complex64) -> Result<()> {
        if z == ZERO {
            return Err(Error::Divergent { z, ratio: f64::INFINITY });
        }
        let first = (1 - self.low).max(0) as usize;
        let terms: Vec<f64> =
            self.coeffs.iter().enumerate().skip(first).map(|(i, c)| c.norm() * z.norm().powi(self.low + i as i32)).collect();
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
        Ok(())
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        self.check_tail(z)?;
        let s: Complex64 = self.coeffs.iter().enumerate().map(|(i, c)| c * z.powi(self.low + i as i32)).sum();
        Ok(s + self.log_coeff * z.ln() + self.c)
    }

    pub fn derivative(&self, z: Complex64) -> Result<Complex64> {
        self.check_tail(z)?;
        let s: Complex64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let p = self.low + i as i32;
                c * p as f64 * z.powi(p - 1)
            })
            .sum();
        Ok(s + self.log_coeff / z)
    }
}

/// Truncated series value of `W` with `J` negative moments, for `z` in the
/// image of the annulus `1−δ ≤ |ζ| ≤ 1+δ`.
pub fn w_function_at(d: &PolyDomain, terms: usize, z: Complex64) -> Result<Complex64> {
    d.annulus_preimage(z)?;
    WFunction::new(d)?.series(terms)?.eval(z)
}

/// Values of `W` (and of `S` when `schwarz`) at the points `zs`.
fn w_values(d: &PolyDomain, zs: &[Complex64], schwarz: bool) -> Result<Vec<Complex64>> {
    let w = WFunction::new(d)?;
    zs.iter().map(|&z| if schwarz { w.derivative(z) } else { w.eval(z) }).collect()
}

/// `∂/∂M_k` at fixed `z` of `W` (or `S`); Wirtinger for `k ≥ 1`.
fn w_moment_derivative(
    d: &PolyDomain,
    k: usize,
    zs: &[Complex64],
    schwarz: bool,
    h: f64,
    stencil: Stencil,
) -> Result<Vec<Complex64>> {
    let d = local(d)?;
    let part = |coord: usize| central(h, stencil, |s| w_values(&shifted(&d, coord, s)?, zs, schwarz));
    if k == 0 {
        return part(0);
    }
    let re = part(2 * k - 1)?;
    let im = part(2 * k)?;
    Ok(re.iter().zip(&im).map(|(r, i)| (r - I * i) * 0.5).collect())
}

/// Residuals of the Green's function and Hamiltonian identities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HamiltonianResiduals {
    /// Two-point Green's check with the free constant cancelled.
    pub green_two_point: f64,
    /// `max |G(f(ζ)) + log ζ|`
    pub h0: f64,
    /// `max |∂f/∂M_k − {f, H_k}|` on the interior circle.
    pub fh: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HamiltonianOptions {
    pub h: f64,
    pub stencil: Stencil,
    /// Radius of the circle for the `H₀` and `(fH)` residuals.
    pub radius: f64,
    pub samples: usize,
}

impl Default for HamiltonianOptions {
    fn default() -> Self {
        Self { h: 1e-4, stencil: Stencil::Fourth, radius: 0.9, samples: 32 }
    }
}

pub fn hamiltonian_checks(d: &PolyDomain, k: usize, h: f64) -> Result<HamiltonianResiduals> {
    hamiltonian_checks_with(d, k, HamiltonianOptions { h, ..Default::default() })
}

pub fn hamiltonian_checks_with(d: &PolyDomain, k: usize, opts: HamiltonianOptions) -> Result<HamiltonianResiduals> {
    let n = d.order();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("moment index {k} outside 1..={n}")));
    }
    let HamiltonianOptions { h, stencil, radius, samples } = opts;
    let d = local(d)?;
    let circle: Vec<Complex64> =
        (0..samples).map(|j| Complex64::from_polar(radius, TAU * (j as f64 + 0.5) / samples as f64)).collect();
    let zc: Vec<Complex64> = circle.iter().map(|&u| d.f(u)).collect();

    // ∂W/∂M₀ = −G
    let z1 = d.f(Complex64::from_polar(radius, 0.3));
    let z2 = d.f(Complex64::from_polar(0.5 * radius, -0.5));
    let two = w_moment_derivative(&d, 0, &[z1, z2], false, h, stencil)?;
    let (u1, u2) = (d.inverse_map(z1)?, d.inverse_map(z2)?);
    let green_two_point = (two[0] - two[1] - (u1.ln() - u2.ln())).norm();
    let dw0 = w_moment_derivative(&d, 0, &zc, false, h, stencil)?;
    let h0 = circle.iter().zip(&dw0).map(|(u, g)| (u.ln() - g).norm()).fold(0.0, f64::max);

    // H_k(ζ; M) = −∂W/∂M_k (f(ζ; M); M)
    let ds_k = w_moment_derivative(&d, k, &zc, true, h, stencil)?;
    let df_mk = coeff_wirtinger(&d, k, h, stencil)?;
    let df_m0 = coeff_derivative(&d, 0, h, stencil)?;
    // ∂H_k/∂M₀ at fixed ζ
    let hk_m0 = central(h, stencil, |s| {
        let ds = local(&shifted(&d, 0, s)?)?;
        let zs: Vec<Complex64> = circle.iter().map(|&u| ds.f(u)).collect();
        Ok(w_moment_derivative(&ds, k, &zs, false, h, stencil)?.into_iter().map(|v| -v).collect())
    })?;
    let mut fh: f64 = 0.0;
    for (i, &u) in circle.iter().enumerate() {
        let zdf = u * d.df(u);
        let zdhk = -ds_k[i] * zdf;
        let f_m0: Complex64 = df_m0.iter().enumerate().map(|(j, c)| c * u.powi(j as i32 + 1)).sum();
        let lhs: Complex64 = df_mk.iter().enumerate().map(|(j, c)| c * u.powi(j as i32 + 1)).sum();
        let bracket = zdf * hk_m0[i] - zdhk * f_m0;
        fh = fh.max((lhs - bracket).norm());
    }
    Ok(HamiltonianResiduals { green_two_point, h0, fh })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::validate_domain;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_domain(rng: &mut ChaCha8Rng, n: usize) -> PolyDomain {
        loop {
            let mut a = vec![c(rng.random_range(0.5..2.0), 0.0)];
            for k in 1..=n {
                let r = rng.random_range(0.0..0.5) * a[0].re / ((k + 1) as f64).powi(2);
                a.push(Complex64::from_polar(r, rng.random_range(0.0..TAU)));
            }
            if let Ok(d) = validate_domain(&a) {
                return d;
            }
        }
    }

    #[test]
    fn wirtinger_jacobian_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 0..=3 {
            let d = random_domain(&mut rng, n);
            let y = to_real(d.coeffs());
            let jac = moment_jacobian(d.coeffs());
            let h = 1e-5;
            for col in 0..y.len() {
                let (mut p, mut m) = (y.clone(), y.clone());
                p[col] += h;
                m[col] -= h;
                let (mp, mm) = (moments_real(&from_real(&p)), moments_real(&from_real(&m)));
                for row in 0..y.len() {
                    let fd = (mp[row] - mm[row]) / (2.0 * h);
                    assert!((fd - jac[(row, col)]).abs() < 1e-8, "n={n} ({row},{col}) {fd} vs {}", jac[(row, col)]);
                }
            }
        }
    }

    #[test]
    fn inversion_examples() {
        let seed = PolyDomain::disk(1.0).unwrap();
        let d = invert_moments(&MomentVector::new(4.0, vec![]), &seed).unwrap();
        assert!((d.a0() - 2.0).abs() < 1e-13);

        let truth = PolyDomain::from_real(&[1.0, 0.2]).unwrap();
        let seed = PolyDomain::from_real(&[1.0, 0.15]).unwrap();
        let (d, stats) = invert_moments_with(&harmonic_moments(&truth), &seed).unwrap();
        for (x, y) in d.coeffs().iter().zip(truth.coeffs()) {
            assert!((x - y).norm() < 1e-10);
        }
        assert!(stats.residual <= 1e-11);

        let m1 = c(0.05, 0.0);
        let d = invert_moments(&MomentVector::new(1.0, vec![m1]), &PolyDomain::disk(1.0).unwrap()).unwrap();
        assert!((d.coeffs()[1] - m1.conj()).norm() < 2.0 * m1.norm_sqr());
    }

    #[test]
    fn inversion_reports_non_univalent_targets() {
        // moments of a map with a critical point inside the disk
        let a = [c(1.0, 0.0), c(0.6, 0.0)];
        let m = richardson(&a, 1);
        let target = MomentVector::new(m[0].re, vec![m[1]]);
        let seed = validate_domain_with(&a, Univalence::LocalOnly).unwrap_err();
        assert!(matches!(seed, Error::CriticalPoint { .. }));
        // Richardson's map is not injective; this seed finds a univalent preimage
        let other = invert_moments(&target, &PolyDomain::from_real(&[1.0, 0.45]).unwrap()).unwrap();
        assert!((harmonic_moments(&other).get(1) - m[1]).norm() < 1e-11);
        // below the fold M₀ = min_s (s + 2M₁²/s²) there is no preimage at all
        let near = PolyDomain::from_real(&[1.0, 0.49]).unwrap();
        let err = invert_moments(&MomentVector::new(1.0, vec![c(0.55, 0.0)]), &near).unwrap_err();
        assert!(matches!(err, Error::CriticalPoint { .. } | Error::SingularJacobian { .. } | Error::InversionFailed { .. }), "{err}");
    }

    #[test]
    fn round_trip_random_domains() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for i in 0..20 {
            let d = random_domain(&mut rng, i % 4);
            let seed = validate_domain(&[c(d.a0(), 0.0)]).unwrap();
            let back = invert_moments(&harmonic_moments(&d), &seed).unwrap();
            for (x, y) in back.coeffs().iter().zip(d.coeffs()) {
                assert!((x - y).norm() < 1e-10, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn jacobian_examples() {
        let d = PolyDomain::disk(1.3).unwrap();
        let j = jacobian_check(&d, 1e-3).unwrap();
        assert!((j.formula - 2.6).abs() < 1e-13 && (j.fd_det - 2.6).abs() < 1e-9);
        let d = PolyDomain::from_real(&[1.0, 0.25]).unwrap();
        let j = jacobian_check(&d, 1e-3).unwrap();
        assert!((j.formula.abs() - 1.5).abs() < 1e-12, "{}", j.formula);
        assert!(j.relative_defect() < 1e-6);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let d = random_domain(&mut rng, 2);
        assert!(jacobian_check(&d, 1e-3).unwrap().relative_defect() < 1e-6);
    }

    #[test]
    fn source_growth_of_the_disk() {
        let d = PolyDomain::disk(1.0).unwrap();
        let tr = evolve_source(&d, 1.5, 30).unwrap();
        assert!(tr.termination.is_none());
        assert!((tr.states.last().unwrap().domain.a0() - 2.0).abs() < 1e-12);
        let pg = pg_residual(&tr.states).unwrap();
        assert!(pg < 1e-5, "{pg}");
    }

    #[test]
    fn source_conserves_moments() {
        let d = PolyDomain::from_real(&[1.0, 0.2]).unwrap();
        let tr = evolve_source(&d, 1.0, 100).unwrap();
        let m = harmonic_moments(&d);
        for s in &tr.states {
            assert!((s.moments.m0 - m.m0 - 2.0 * s.t).abs() <= 1e-9);
            assert!((s.moments.get(1) - m.get(1)).norm() <= 1e-9);
            assert!((s.domain.sample_boundary(1024).unwrap().area() - std::f64::consts::PI * s.moments.m0).abs() < 1e-8);
        }
        let pg = pg_residual(&tr.states).unwrap();
        assert!(pg <= 1e-6, "{pg}");
    }

    #[test]
    fn pg_residual_is_second_order() {
        let d = PolyDomain::from_real(&[1.0, 0.2]).unwrap();
        let r1 = pg_residual_with(&evolve_source(&d, 0.2, 10).unwrap().states, Stencil::Second, 64).unwrap();
        let r2 = pg_residual_with(&evolve_source(&d, 0.2, 20).unwrap().states, Stencil::Second, 64).unwrap();
        let ratio = r1 / r2;
        assert!((3.0..5.0).contains(&ratio), "{r1} {r2}");
    }

    #[test]
    fn suction_stops_at_univalence_loss() {
        let d = PolyDomain::from_real(&[1.0, 0.3]).unwrap();
        let tr = evolve_source(&d, -0.5, 20).unwrap();
        let term = tr.termination.expect("suction must break down");
        assert!(term.t < 0.0 && tr.states.len() < 21);
    }

    #[test]
    fn moment_driven_evolution() {
        let d = PolyDomain::from_real(&[1.0, 0.1]).unwrap();
        let tr = evolve_moment(&d, 1, Direction::Re, 0.02, 4).unwrap();
        let m = harmonic_moments(&d);
        for s in &tr.states {
            assert!((s.moments.get(1) - m.get(1) - 2.0 * s.t).norm() < 1e-11);
            assert!((s.moments.m0 - m.m0).abs() < 1e-11);
        }
        // d/dt ∫ z dm = 2π by a boundary integral of z z̄ dz / 2i
        let integral = |d: &PolyDomain| {
            let s = d.sample_boundary(1024).unwrap();
            s.contour(Exec::Sequential, |_, z| z * z.conj()) / c(0.0, 2.0)
        };
        let (a, b) = (&tr.states[1].domain, &tr.states[3].domain);
        let rate = (integral(b) - integral(a)) / (tr.states[3].t - tr.states[1].t);
        assert!((rate - c(TAU, 0.0)).norm() < 1e-8, "{rate}");

        // a disk with a negligible a₁ keeps N = 1
        let disk = validate_domain(&[c(1.0, 0.0), c(1e-12, 0.0)]).unwrap();
        let tr = evolve_moment(&disk, 1, Direction::Im, 0.001, 2).unwrap();
        let s = tr.states.last().unwrap();
        let want = s.moments.get(1).conj() / s.domain.a0().powi(2);
        assert!((s.domain.coeffs()[1] - want).norm() < 1e-5);
        assert!(evolve_moment(&PolyDomain::disk(1.0).unwrap(), 1, Direction::Re, 0.1, 2).is_err());
    }

    #[test]
    fn string_equation_examples() {
        let b = string_residual(&PolyDomain::disk(1.7).unwrap(), 1e-5).unwrap();
        assert!(b.max_residual() < 1e-9);
        let d = PolyDomain::from_real(&[1.0, 0.2]).unwrap();
        assert!(string_residual(&d, 1e-5).unwrap().max_residual() <= 1e-6);
        let fine = string_residual_with(&d, 1e-5, 1024, Stencil::Second).unwrap().max_residual();
        assert!((fine - string_residual(&d, 1e-5).unwrap().max_residual()).abs() <= 1e-9);
        let r1 = string_residual(&d, 0.02).unwrap().max_residual();
        let r2 = string_residual(&d, 0.01).unwrap().max_residual();
        assert!((3.0..5.0).contains(&(r1 / r2)), "{r1} {r2}");
    }

    #[test]
    fn integrability_examples() {
        let d = PolyDomain::from_real(&[1.0, 0.2, 0.05]).unwrap();
        assert_eq!(integrability_residual(&d, 2, 2, 1e-4).unwrap().residual, 0.0);
        let r = integrability_residual(&d, 1, 2, 1e-4).unwrap();
        assert!(r.relative() <= 1e-4, "{r:?}");
        let near = validate_domain(&[c(1.0, 0.0), c(0.01, 0.02), c(-0.005, 0.003)]).unwrap();
        assert!(integrability_residual(&near, 1, 2, 1e-4).unwrap().residual <= 1e-5);
    }

    #[test]
    fn w_function_examples() {
        let r = 1.5;
        let d = PolyDomain::disk(r).unwrap();
        let w = WFunction::new(&d).unwrap();
        assert!((w.constant() - (0.5 * r * r - r * r * r.ln())).abs() < 1e-13);
        let z = c(0.4, 1.1);
        assert!((w.eval(z).unwrap() - (r * r * z.ln() + w.constant())).norm() < 1e-13);

        for a in [&[1.0, 0.1, 0.02][..], &[1.0, 0.2, 0.05]] {
            let d = PolyDomain::from_real(a).unwrap();
            let w = WFunction::new(&d).unwrap();
            let s = d.sample_boundary(16).unwrap();
            for &z in &s.z {
                assert!((0.25 * z.norm_sqr() - 0.5 * w.eval(z).unwrap().re).abs() < 1e-12);
                let h = 1e-5;
                let num = (w.eval(z + h).unwrap() - w.eval(z - h).unwrap()) / (2.0 * h);
                assert!((num - d.schwarz_at(z).unwrap()).norm() < 1e-8);
            }
            // the truncated Laurent form agrees where it converges
            let series = w.series(W_TERMS).unwrap();
            let z = d.f(c(0.3, 0.2));
            assert!((series.eval(z).unwrap() - w.eval(z).unwrap()).norm() < 1e-10);
        }
        let d = PolyDomain::from_real(&[1.0, 0.1, 0.02]).unwrap();
        let s = d.sample_boundary(16).unwrap();
        for &z in &s.z {
            let v = w_function_at(&d, W_TERMS, z).unwrap();
            assert!((0.25 * z.norm_sqr() - 0.5 * v.re).abs() < 1e-8);
        }
        assert!(w_function_at(&d, W_TERMS, c(5.0, 0.0)).is_err());
    }

    #[test]
    fn hamiltonian_examples() {
        let disk = validate_domain(&[c(1.2, 0.0), c(1e-13, 0.0)]).unwrap();
        let r = hamiltonian_checks(&disk, 1, 1e-4).unwrap();
        assert!(r.h0 < 1e-10, "{r:?}");
        let d = PolyDomain::from_real(&[1.0, 0.1]).unwrap();
        let r = hamiltonian_checks(&d, 1, 1e-4).unwrap();
        assert!(r.green_two_point <= 1e-5, "{r:?}");
        assert!(r.h0 <= 1e-10, "{r:?}");
        assert!(r.fh <= 1e-3, "{r:?}");
    }
}
