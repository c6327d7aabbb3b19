//! Clebsch potentials for rotational flows: `mv = ∇S + α∇β − eA`, the
//! effective electromagnetic fields built from `(α, β)`, gauge freedom and
//! the vorticity identities.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Point, RealField};
use crate::madelung::wrap_phase;
use crate::trajectories::{integrate_guided, GuidanceField, Probe, TimeGrid};

/// Value, spatial gradient and time derivative of a scalar field.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: [f64; 3],
    pub dt: f64,
}

pub trait ScalarField: Send + Sync {
    fn jet(&self, r: &Point, t: f64) -> Jet;
    /// True when the field contains an angle and is only defined mod 2π.
    fn cyclic(&self) -> bool {
        false
    }
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn shifted(r: &Point, axis: usize, h: f64) -> Point {
    let mut p = *r;
    p[axis] += h;
    p
}

/// The zero field.
pub struct Zero;

impl ScalarField for Zero {
    fn jet(&self, _r: &Point, _t: f64) -> Jet {
        Jet::default()
    }
}

/// `Σ a_j cos(k_j·r − ω_j t + φ_j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierScalar {
    pub terms: Vec<FourierTerm>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierTerm {
    pub amplitude: f64,
    pub k: [f64; 3],
    pub omega: f64,
    pub phase: f64,
}

impl FourierScalar {
    /// `n` random terms with wavevectors in `[−kmax, kmax]` on the first
    /// `dim` axes and amplitudes in `[−1, 1]`.
    pub fn random(seed: u64, n: usize, dim: usize, kmax: f64, time_dependent: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let terms = (0..n)
            .map(|_| {
                let mut k = [0.0; 3];
                for ki in k.iter_mut().take(dim) {
                    *ki = rng.gen_range(-kmax..=kmax);
                }
                FourierTerm {
                    amplitude: rng.gen_range(-1.0..=1.0),
                    k,
                    omega: if time_dependent { rng.gen_range(-1.0..=1.0) } else { 0.0 },
                    phase: rng.gen_range(0.0..2.0 * PI),
                }
            })
            .collect();
        Self { terms }
    }

    pub fn value(&self, r: &Point, t: f64) -> f64 {
        self.jet(r, t).value
    }
}

impl ScalarField for FourierScalar {
    fn jet(&self, r: &Point, t: f64) -> Jet {
        let mut j = Jet::default();
        for term in &self.terms {
            let arg = term.k[0] * r[0] + term.k[1] * r[1] + term.k[2] * r[2] - term.omega * t + term.phase;
            let (s, c) = arg.sin_cos();
            j.value += term.amplitude * c;
            for ax in 0..3 {
                j.grad[ax] -= term.amplitude * s * term.k[ax];
            }
            j.dt += term.amplitude * s * term.omega;
        }
        j
    }
}

/// Linear field `c + g·r + w t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub constant: f64,
    pub gradient: [f64; 3],
    pub rate: f64,
}

impl ScalarField for Linear {
    fn jet(&self, r: &Point, t: f64) -> Jet {
        Jet {
            value: self.constant + self.gradient.iter().zip(r).map(|(g, x)| g * x).sum::<f64>() + self.rate * t,
            grad: self.gradient,
            dt: self.rate,
        }
    }
}

/// A static 2D grid field; gradients come from the grid derivative operators.
pub struct GridScalar {
    field: RealField,
    grads: Vec<RealField>,
    rate: Option<RealField>,
}

impl GridScalar {
    pub fn new(field: RealField, rate: Option<RealField>) -> Result<Self> {
        let grads = (0..field.spec().dim()).map(|ax| field.gradient(ax)).collect::<Result<Vec<_>>>()?;
        if let Some(r) = &rate {
            if r.spec() != field.spec() {
                return Err(Error::GridMismatch);
            }
        }
        Ok(Self { field, grads, rate })
    }

    pub fn field(&self) -> &RealField {
        &self.field
    }
}

impl ScalarField for GridScalar {
    fn jet(&self, r: &Point, _t: f64) -> Jet {
        let at = |f: &RealField| f.interpolate(r).unwrap_or(f64::NAN);
        let mut grad = [0.0; 3];
        for (g, f) in grad.iter_mut().zip(&self.grads) {
            *g = at(f);
        }
        Jet { value: at(&self.field), grad, dt: self.rate.as_ref().map_or(0.0, at) }
    }
}

/// A pair of Clebsch potentials.
#[derive(Clone)]
pub struct ClebschPair {
    pub alpha: Arc<dyn ScalarField>,
    pub beta: Arc<dyn ScalarField>,
}

impl ClebschPair {
    pub fn new(alpha: Arc<dyn ScalarField>, beta: Arc<dyn ScalarField>) -> Self {
        Self { alpha, beta }
    }

    pub fn zero() -> Self {
        Self { alpha: Arc::new(Zero), beta: Arc::new(Zero) }
    }
}

/// External electromagnetic potentials with charge `e`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExternalEm {
    None,
    /// Uniform `B = b ẑ` in the symmetric gauge `A = (b/2)(−y, x, 0)`.
    UniformB { b: f64 },
    /// Uniform vector potential, `B = 0`.
    UniformA { a: [f64; 3] },
}

impl ExternalEm {
    pub fn vector_potential(&self, r: &Point) -> [f64; 3] {
        match self {
            ExternalEm::None => [0.0; 3],
            ExternalEm::UniformB { b } => [-0.5 * b * r[1], 0.5 * b * r[0], 0.0],
            ExternalEm::UniformA { a } => *a,
        }
    }

    pub fn magnetic(&self) -> [f64; 3] {
        match self {
            ExternalEm::UniformB { b } => [0.0, 0.0, *b],
            _ => [0.0; 3],
        }
    }
}

/// `A_eff`, `V_eff`, `E_eff`, `B_eff` at one point (already divided by `e`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveFields {
    pub a: [f64; 3],
    pub v: f64,
    pub e: [f64; 3],
    pub b: [f64; 3],
}

/// `eA = −α∇β`, `eV = α∂_tβ`, `eE = ∂_tα∇β − ∂_tβ∇α`, `eB = −∇α×∇β`.
pub fn effective_fields(pair: &ClebschPair, r: &Point, t: f64, charge: f64) -> EffectiveFields {
    let a = pair.alpha.jet(r, t);
    let b = pair.beta.jet(r, t);
    let ab = cross(&a.grad, &b.grad);
    EffectiveFields {
        a: b.grad.map(|g| -a.value * g / charge),
        v: a.value * b.dt / charge,
        e: [0, 1, 2].map(|k| (a.dt * b.grad[k] - b.dt * a.grad[k]) / charge),
        b: ab.map(|c| -c / charge),
    }
}

/// Velocity field `v = (∇S + α∇β − eA)/m`.
#[derive(Clone)]
pub struct GeneralizedFlow {
    pub phase: Arc<dyn ScalarField>,
    pub pair: ClebschPair,
    pub em: ExternalEm,
    pub mass: f64,
    pub charge: f64,
    pub dim: usize,
    /// Probes farther than this from the origin count as outside.
    pub radius: f64,
}

impl GeneralizedFlow {
    pub fn new(phase: Arc<dyn ScalarField>, pair: ClebschPair, em: ExternalEm, mass: f64, dim: usize) -> Self {
        Self { phase, pair, em, mass, charge: 1.0, dim, radius: f64::INFINITY }
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    pub fn velocity_at(&self, r: &Point, t: f64) -> [f64; 3] {
        let s = self.phase.jet(r, t);
        let a = self.pair.alpha.jet(r, t);
        let b = self.pair.beta.jet(r, t);
        let ea = self.em.vector_potential(r);
        [0, 1, 2].map(|k| (s.grad[k] + a.value * b.grad[k] - self.charge * ea[k]) / self.mass)
    }

    /// Fourth-order central-difference curl of the velocity.
    pub fn curl(&self, r: &Point, t: f64, h: f64) -> [f64; 3] {
        curl_fd(|p| self.velocity_at(p, t), r, h)
    }
}

impl GuidanceField for GeneralizedFlow {
    fn dim(&self) -> usize {
        self.dim
    }

    fn mass(&self) -> f64 {
        self.mass
    }

    fn velocity(&self, q: &Point, t: f64) -> Probe {
        if (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt() > self.radius {
            return Probe::Outside;
        }
        let v = self.velocity_at(q, t);
        if v.iter().all(|x| x.is_finite()) {
            Probe::Velocity(v)
        } else {
            Probe::Node
        }
    }

    fn describe(&self) -> String {
        "generalized Clebsch guidance".into()
    }
}

/// Fourth-order central difference of component `comp` of `f` along `axis`.
fn partial_fd(f: &impl Fn(&Point) -> [f64; 3], r: &Point, axis: usize, comp: usize, h: f64) -> f64 {
    let at = |s: f64| f(&shifted(r, axis, s * h))[comp];
    (at(-2.0) - 8.0 * at(-1.0) + 8.0 * at(1.0) - at(2.0)) / (12.0 * h)
}

fn curl_fd(f: impl Fn(&Point) -> [f64; 3], r: &Point, h: f64) -> [f64; 3] {
    let d = |axis, comp| partial_fd(&f, r, axis, comp, h);
    [d(1, 2) - d(2, 1), d(2, 0) - d(0, 2), d(0, 1) - d(1, 0)]
}

fn div_fd(f: impl Fn(&Point) -> [f64; 3], r: &Point, h: f64) -> f64 {
    (0..3).map(|ax| partial_fd(&f, r, ax, ax, h)).sum()
}

/// Fourth-order central difference in time.
fn time_fd(f: impl Fn(f64) -> [f64; 3], t: f64, h: f64) -> [f64; 3] {
    let (a, b, c, d) = (f(t - 2.0 * h), f(t - h), f(t + h), f(t + 2.0 * h));
    [0, 1, 2].map(|k| (a[k] - 8.0 * b[k] + 8.0 * c[k] - d[k]) / (12.0 * h))
}

/// Largest `|m∇×v + eB − ∇α×∇β|` over `points`, with `∇×v` by fourth-order
/// central differences of step `h`.
pub fn vorticity_residual(flow: &GeneralizedFlow, points: &[Point], t: f64, h: f64) -> f64 {
    let b_ext = flow.em.magnetic();
    points
        .iter()
        .map(|r| {
            let curl = flow.curl(r, t, h);
            let a = flow.pair.alpha.jet(r, t);
            let b = flow.pair.beta.jet(r, t);
            let ab = cross(&a.grad, &b.grad);
            (0..3)
                .map(|k| (flow.mass * curl[k] + flow.charge * b_ext[k] - ab[k]).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// Largest `|e(E_eff + v×B_eff)|` over `points`; zero wherever `α` and `β`
/// are carried by the flow.
pub fn lorentz_force_residual(flow: &GeneralizedFlow, points: &[Point], t: f64) -> f64 {
    points
        .iter()
        .map(|r| {
            let f = effective_fields(&flow.pair, r, t, flow.charge);
            let v = flow.velocity_at(r, t);
            let vb = cross(&v, &f.b);
            (0..3).map(|k| (flow.charge * (f.e[k] + vb[k])).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxwellResiduals {
    /// `|∇·B_eff|`
    pub divergence: f64,
    /// `|∂_tB_eff + ∇×E_eff|`
    pub faraday: f64,
    /// `|E_eff + ∂_tA_eff + ∇V_eff|`
    pub potentials: f64,
}

/// First Maxwell group for the effective fields, by fourth-order central
/// differences in space and time with step `h`.
pub fn maxwell_residuals(pair: &ClebschPair, points: &[Point], t: f64, h: f64) -> MaxwellResiduals {
    let ef = |p: &Point, s: f64| effective_fields(pair, p, s, 1.0);
    let mut out = MaxwellResiduals { divergence: 0.0, faraday: 0.0, potentials: 0.0 };
    for r in points {
        out.divergence = out.divergence.max(div_fd(|p| ef(p, t).b, r, h).abs());
        let curl_e = curl_fd(|p| ef(p, t).e, r, h);
        let db = time_fd(|s| ef(r, s).b, t, h);
        let da = time_fd(|s| ef(r, s).a, t, h);
        let here = ef(r, t);
        for k in 0..3 {
            let gv = partial_fd(&|p: &Point| [ef(p, t).v; 3], r, k, 0, h);
            out.faraday = out.faraday.max((db[k] + curl_e[k]).abs());
            out.potentials = out.potentials.max((here.e[k] + da[k] + gv).abs());
        }
    }
    out
}

/// Residual of `∂_t W = ∇×(v × W)` with `W = m∇×v + eB`, by nested
/// fourth-order central differences of step `h`.
pub fn vorticity_transport_residual(flow: &GeneralizedFlow, points: &[Point], t: f64, h: f64) -> f64 {
    let b_ext = flow.em.magnetic();
    let w = |p: &Point, s: f64| {
        let c = flow.curl(p, s, h);
        [0, 1, 2].map(|k| flow.mass * c[k] + flow.charge * b_ext[k])
    };
    points
        .iter()
        .map(|r| {
            let dw = time_fd(|s| w(r, s), t, h);
            let rhs = curl_fd(|p| cross(&flow.velocity_at(p, t), &w(p, t)), r, h);
            (0..3).map(|k| (dw[k] - rhs[k]).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdvectionReport {
    pub alpha: f64,
    pub beta: f64,
}

/// Integrates probes along the flow and reports the largest change of `α`
/// and `β` seen along each path (β compared mod 2π when cyclic).
pub fn advection_residual(flow: &GeneralizedFlow, starts: &[Point], time: TimeGrid) -> Result<AdvectionReport> {
    let ens = integrate_guided(flow, starts, time)?;
    for (i, st) in ens.status.iter().enumerate() {
        if !st.is_active() {
            return Err(Error::ProbeExited(i));
        }
    }
    let mut out = AdvectionReport { alpha: 0.0, beta: 0.0 };
    let cyclic = flow.pair.beta.cyclic();
    for path in &ens.positions {
        let a0 = flow.pair.alpha.jet(&path[0], ens.times[0]).value;
        let b0 = flow.pair.beta.jet(&path[0], ens.times[0]).value;
        for (q, &t) in path.iter().zip(&ens.times) {
            let da = flow.pair.alpha.jet(q, t).value - a0;
            let mut db = flow.pair.beta.jet(q, t).value - b0;
            if cyclic {
                db = wrap_phase(db);
            }
            out.alpha = out.alpha.max(da.abs());
            out.beta = out.beta.max(db.abs());
        }
    }
    Ok(out)
}

/// A gauge triple `S' = S + f`, `α' = g`, `β' = h`, each a function of
/// `(α, β, t)`. `partials` returns `[∂_α, ∂_β, ∂_t]` of `(f, g, h)`.
pub trait Gauge: Send + Sync {
    fn values(&self, a: f64, b: f64, t: f64) -> [f64; 3];
    fn partials(&self, a: f64, b: f64, t: f64) -> [[f64; 3]; 3];
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BuiltinGauge {
    Identity,
    /// `f = sin β`, `g = α − cos β`, `h = β`.
    SinShift,
    /// `f = αβ`, `g = α`, `h = β`: violates `∂f/∂α + g ∂h/∂α = 0`.
    Product,
    /// `f = 0`, `g = α/c`, `h = cβ`.
    Scale { c: f64 },
}

impl Gauge for BuiltinGauge {
    fn values(&self, a: f64, b: f64, _t: f64) -> [f64; 3] {
        match *self {
            BuiltinGauge::Identity => [0.0, a, b],
            BuiltinGauge::SinShift => [b.sin(), a - b.cos(), b],
            BuiltinGauge::Product => [a * b, a, b],
            BuiltinGauge::Scale { c } => [0.0, a / c, c * b],
        }
    }

    fn partials(&self, a: f64, b: f64, _t: f64) -> [[f64; 3]; 3] {
        match *self {
            BuiltinGauge::Identity => [[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            BuiltinGauge::SinShift => [[0.0, b.cos(), 0.0], [1.0, b.sin(), 0.0], [0.0, 1.0, 0.0]],
            BuiltinGauge::Product => [[b, a, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            BuiltinGauge::Scale { c } => [[0.0; 3], [1.0 / c, 0.0, 0.0], [0.0, c, 0.0]],
        }
    }
}

/// Tolerance for the gauge constraint identities.
pub const GAUGE_TOL: f64 = 1e-8;

/// Largest violation of `∂f/∂β + g ∂h/∂β = α` and `∂f/∂α + g ∂h/∂α = 0`
/// on a 32×32 lattice over `alpha_range × beta_range` at time `t`.
pub fn gauge_violation(gauge: &dyn Gauge, alpha_range: (f64, f64), beta_range: (f64, f64), t: f64) -> f64 {
    const N: usize = 32;
    let mut worst = 0.0_f64;
    for i in 0..N {
        let a = alpha_range.0 + (alpha_range.1 - alpha_range.0) * i as f64 / (N - 1) as f64;
        for j in 0..N {
            let b = beta_range.0 + (beta_range.1 - beta_range.0) * j as f64 / (N - 1) as f64;
            let [_, g, _] = gauge.values(a, b, t);
            let [pf, _, ph] = gauge.partials(a, b, t);
            worst = worst.max((pf[1] + g * ph[1] - a).abs()).max((pf[0] + g * ph[0]).abs());
        }
    }
    worst
}

struct Transformed {
    s: Arc<dyn ScalarField>,
    pair: ClebschPair,
    gauge: Arc<dyn Gauge>,
    which: usize,
}

impl ScalarField for Transformed {
    fn jet(&self, r: &Point, t: f64) -> Jet {
        let a = self.pair.alpha.jet(r, t);
        let b = self.pair.beta.jet(r, t);
        let vals = self.gauge.values(a.value, b.value, t);
        let p = self.gauge.partials(a.value, b.value, t)[self.which];
        let mut out = Jet {
            value: vals[self.which],
            grad: [0, 1, 2].map(|k| p[0] * a.grad[k] + p[1] * b.grad[k]),
            dt: p[0] * a.dt + p[1] * b.dt + p[2],
        };
        if self.which == 0 {
            let s = self.s.jet(r, t);
            out.value += s.value;
            out.dt += s.dt;
            for k in 0..3 {
                out.grad[k] += s.grad[k];
            }
        }
        out
    }

    fn cyclic(&self) -> bool {
        self.which == 2 && self.pair.beta.cyclic()
    }
}

/// Applies a gauge triple after checking its constraints on the sampled
/// `(α, β)` ranges at each time in `times`.
pub fn gauge_transform(
    s: Arc<dyn ScalarField>,
    pair: &ClebschPair,
    gauge: Arc<dyn Gauge>,
    alpha_range: (f64, f64),
    beta_range: (f64, f64),
    times: &[f64],
) -> Result<(Arc<dyn ScalarField>, ClebschPair)> {
    let worst = times
        .iter()
        .map(|&t| gauge_violation(gauge.as_ref(), alpha_range, beta_range, t))
        .fold(0.0, f64::max);
    if !(worst <= GAUGE_TOL) {
        return Err(Error::GaugeConstraint(worst));
    }
    let make = |which| -> Arc<dyn ScalarField> {
        Arc::new(Transformed { s: s.clone(), pair: pair.clone(), gauge: gauge.clone(), which })
    };
    Ok((make(0), ClebschPair::new(make(1), make(2))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lattice(n: usize, half: f64) -> Vec<Point> {
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                out.push([
                    -half + 2.0 * half * (i as f64 + 0.5) / n as f64,
                    -half + 2.0 * half * (j as f64 + 0.5) / n as f64,
                    0.0,
                ]);
            }
        }
        out
    }

    #[test]
    fn uniform_effective_field() {
        let pair = ClebschPair::new(
            Arc::new(Linear { constant: 0.0, gradient: [0.0, -1.0, 0.0], rate: 0.0 }),
            Arc::new(Linear { constant: 0.0, gradient: [1.0, 0.0, 0.0], rate: 0.0 }),
        );
        for r in lattice(4, 2.0) {
            let f = effective_fields(&pair, &r, 0.3, 1.0);
            assert_eq!(f.b, [0.0, 0.0, -1.0]);
        }
    }

    #[test]
    fn constant_alpha_gives_only_scalar_potential() {
        let pair = ClebschPair::new(
            Arc::new(Linear { constant: 2.0, gradient: [0.0; 3], rate: 0.0 }),
            Arc::new(Linear { constant: 0.0, gradient: [0.0, 1.0, 0.0], rate: 0.5 }),
        );
        let f = effective_fields(&pair, &[0.3, 0.1, 0.0], 0.0, 1.0);
        assert_eq!(f.b, [0.0; 3]);
        assert_eq!(f.v, 1.0);
        assert_eq!(f.e, [0.0; 3]);
        // A_eff = −2∇β is a pure gradient here.
        assert_eq!(f.a, [0.0, -2.0, 0.0]);
    }

    #[test]
    fn generalized_velocity_limits() {
        let s = Arc::new(Linear { constant: 0.0, gradient: [1.0, 2.0, 0.0], rate: 0.0 });
        let plain = GeneralizedFlow::new(s.clone(), ClebschPair::zero(), ExternalEm::None, 2.0, 2);
        assert_eq!(plain.velocity_at(&[0.4, 0.2, 0.0], 0.0), [0.5, 1.0, 0.0]);
        let drift = GeneralizedFlow::new(
            Arc::new(Zero),
            ClebschPair::zero(),
            ExternalEm::UniformA { a: [0.5, 0.0, 0.0] },
            1.0,
            2,
        );
        assert_eq!(drift.velocity_at(&[3.0, -1.0, 0.0], 0.0), [-0.5, 0.0, 0.0]);
    }

    #[test]
    fn random_fields_satisfy_vorticity_identity() {
        for seed in 0..3 {
            let flow = GeneralizedFlow::new(
                Arc::new(FourierScalar::random(seed, 5, 2, 2.0, true)),
                ClebschPair::new(
                    Arc::new(FourierScalar::random(seed + 100, 5, 2, 2.0, true)),
                    Arc::new(FourierScalar::random(seed + 200, 5, 2, 2.0, true)),
                ),
                ExternalEm::UniformB { b: 0.7 },
                1.3,
                2,
            );
            let pts = lattice(6, 1.5);
            assert!(vorticity_residual(&flow, &pts, 0.4, 1e-4) < 1e-5);
            let m = maxwell_residuals(&flow.pair, &pts, 0.4, 1e-4);
            assert!(m.divergence < 1e-6 && m.faraday < 1e-6 && m.potentials < 1e-6, "{m:?}");
        }
    }

    #[test]
    fn irrotational_flow_has_no_vorticity() {
        let flow = GeneralizedFlow::new(
            Arc::new(FourierScalar::random(9, 4, 2, 1.5, false)),
            ClebschPair::zero(),
            ExternalEm::None,
            1.0,
            2,
        );
        let pts = lattice(5, 1.0);
        assert!(vorticity_residual(&flow, &pts, 0.0, 1e-4) < 1e-8);
        assert!(vorticity_transport_residual(&flow, &pts, 0.0, 1e-3) < 1e-8);
    }

    #[test]
    fn rigid_rotation_transport() {
        // α = ω ξ², β = φ gives α∇β = ω ξ φ̂, rigid rotation with m = 1.
        struct Phi;
        impl ScalarField for Phi {
            fn jet(&self, r: &Point, _t: f64) -> Jet {
                let x2 = r[0] * r[0] + r[1] * r[1];
                Jet { value: r[1].atan2(r[0]), grad: [-r[1] / x2, r[0] / x2, 0.0], dt: 0.0 }
            }
            fn cyclic(&self) -> bool {
                true
            }
        }
        struct Quad(f64);
        impl ScalarField for Quad {
            fn jet(&self, r: &Point, _t: f64) -> Jet {
                Jet {
                    value: self.0 * (r[0] * r[0] + r[1] * r[1]),
                    grad: [2.0 * self.0 * r[0], 2.0 * self.0 * r[1], 0.0],
                    dt: 0.0,
                }
            }
        }
        let flow = GeneralizedFlow::new(
            Arc::new(Zero),
            ClebschPair::new(Arc::new(Quad(0.8)), Arc::new(Phi)),
            ExternalEm::None,
            1.0,
            2,
        );
        let pts: Vec<Point> = lattice(5, 2.0).into_iter().filter(|p| p[0].hypot(p[1]) > 0.3).collect();
        assert!(vorticity_transport_residual(&flow, &pts, 0.0, 1e-3) < 1e-6);
        let v = flow.velocity_at(&[1.0, 0.0, 0.0], 0.0);
        assert!((v[1] - 0.8).abs() < 1e-14);
    }

    #[test]
    fn gauges() {
        assert_eq!(gauge_violation(&BuiltinGauge::Identity, (-2.0, 2.0), (0.0, 6.0), 0.0), 0.0);
        assert!(gauge_violation(&BuiltinGauge::SinShift, (-2.0, 2.0), (0.0, 6.0), 0.0) < 1e-14);
        assert!(gauge_violation(&BuiltinGauge::Scale { c: 3.0 }, (-2.0, 2.0), (0.0, 6.0), 0.0) < 1e-14);
        assert!(gauge_violation(&BuiltinGauge::Product, (-2.0, 2.0), (0.0, 6.0), 0.0) > 1.0);
        let s: Arc<dyn ScalarField> = Arc::new(FourierScalar::random(1, 3, 2, 1.0, false));
        let pair = ClebschPair::new(
            Arc::new(FourierScalar::random(2, 3, 2, 1.0, false)),
            Arc::new(FourierScalar::random(3, 3, 2, 1.0, false)),
        );
        let r = gauge_transform(s.clone(), &pair, Arc::new(BuiltinGauge::Product), (-3.0, 3.0), (-3.0, 3.0), &[0.0]);
        assert!(matches!(r, Err(Error::GaugeConstraint(_))));
        let (s2, p2) =
            gauge_transform(s.clone(), &pair, Arc::new(BuiltinGauge::SinShift), (-3.0, 3.0), (-3.0, 3.0), &[0.0])
                .unwrap();
        let f1 = GeneralizedFlow::new(s, pair, ExternalEm::None, 1.0, 2);
        let f2 = GeneralizedFlow::new(s2, p2, ExternalEm::None, 1.0, 2);
        for p in lattice(6, 2.0) {
            let (a, b) = (f1.velocity_at(&p, 0.0), f2.velocity_at(&p, 0.0));
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 1e-10);
            }
        }
    }
}
