//! The quantum Rankine vortex: a core of uniform vorticity `2ω̃` carried by
//! Clebsch potentials inside `ξ < ξ0`, irrotational `N/(mξ)` flow outside,
//! and the radial amplitude `G(τ)`, `τ = ξ/ξ0`, solving
//! `G'' + G'/τ + c(τ) G = 0` with `c = ε + N²(τ² − 2)` inside and
//! `c = ε − N²/τ²` outside.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bessel::bessel_jy;
use crate::clebsch::{ClebschPair, ExternalEm, GeneralizedFlow, Jet, ScalarField};
use crate::error::{Error, Result};
use crate::grid::{derivative, GridSpec, Point, RealField};
use crate::io::fmt_f64;
use crate::trajectories::{integrate_guided, GuidanceField, Probe, TimeGrid, TrajectoryEnsemble};

/// Charge of the particle; the effective field `B0` follows from `N` and `ξ0`.
pub const CHARGE: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankineParams {
    /// Winding number `N`.
    pub n: u32,
    /// Normalized energy `ε = 2mEξ0²`.
    pub eps: f64,
    pub xi0: f64,
    pub mass: f64,
}

impl Default for RankineParams {
    fn default() -> Self {
        Self { n: 1, eps: 3.0, xi0: 1.0, mass: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub b0: f64,
    pub omega: f64,
    pub energy: f64,
    /// `N' = −eB0ξ0²/2`, equal to `N` by construction.
    pub n_prime: f64,
}

impl RankineParams {
    pub fn new(n: u32, eps: f64) -> Self {
        Self { n, eps, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::param("ε must be positive: no convergent solution otherwise"));
        }
        if !(self.xi0 > 0.0 && self.mass > 0.0) {
            return Err(Error::param("ξ0 and mass must be positive"));
        }
        Ok(())
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }

    pub fn derived(&self) -> Derived {
        let b0 = -2.0 * self.nf() / (CHARGE * self.xi0 * self.xi0);
        Derived {
            b0,
            omega: -CHARGE * b0 / (2.0 * self.mass),
            energy: self.eps / (2.0 * self.mass * self.xi0 * self.xi0),
            n_prime: -CHARGE * b0 * self.xi0 * self.xi0 / 2.0,
        }
    }

    /// Bracketed coefficient `c(τ)` of the radial equation.
    pub fn coefficient(&self, tau: f64) -> f64 {
        let n2 = self.nf() * self.nf();
        if tau < 1.0 {
            self.eps + n2 * (tau * tau - 2.0)
        } else {
            self.eps - n2 / (tau * tau)
        }
    }

    /// Azimuthal velocity: `ω̃ξ` inside the core, `N/(mξ)` outside.
    pub fn velocity(&self, xi: f64) -> f64 {
        if xi <= self.xi0 {
            self.derived().omega * xi
        } else {
            self.nf() / (self.mass * xi)
        }
    }

    /// Closed-form vorticity: `2ω̃` inside, 0 outside.
    pub fn vorticity(&self, xi: f64) -> f64 {
        if xi < self.xi0 {
            2.0 * self.derived().omega
        } else {
            0.0
        }
    }

    /// `V_Ψ(ξ)` with the constant fixed to `E`.
    pub fn quantum_potential(&self, xi: f64) -> f64 {
        let n2 = self.nf() * self.nf();
        let m = self.mass;
        let x0 = self.xi0;
        let e = self.derived().energy;
        if xi < x0 {
            n2 / (2.0 * m * x0.powi(4)) * (xi * xi - 2.0 * x0 * x0) + e
        } else {
            -n2 / (2.0 * m * xi * xi) + e
        }
    }

    /// `dV_Ψ/dξ` of the closed form.
    pub fn quantum_potential_slope(&self, xi: f64) -> f64 {
        let n2 = self.nf() * self.nf();
        if xi < self.xi0 {
            n2 * xi / (self.mass * self.xi0.powi(4))
        } else {
            n2 / (self.mass * xi.powi(3))
        }
    }

    /// The Clebsch pair `α = −eB0ξ²/2 − N`, `β = φ − ω̃t` inside the core,
    /// both zero outside.
    pub fn clebsch_pair(&self) -> ClebschPair {
        self.clebsch_pair_with_rate(self.derived().omega)
    }

    /// As [`Self::clebsch_pair`] but with `β = φ − rate·t`.
    pub fn clebsch_pair_with_rate(&self, rate: f64) -> ClebschPair {
        ClebschPair::new(Arc::new(RankineAlpha(*self)), Arc::new(RankineBeta { params: *self, rate }))
    }

    /// Generalized guidance `mv = ∇S + α∇β` with `S = Nφ − Et`.
    pub fn flow(&self) -> GeneralizedFlow {
        GeneralizedFlow::new(Arc::new(RankinePhase(*self)), self.clebsch_pair(), ExternalEm::None, self.mass, 2)
    }
}

fn polar(r: &Point) -> (f64, f64) {
    (r[0].hypot(r[1]), r[1].atan2(r[0]))
}

/// `∇φ = (−y, x)/ξ²`.
fn grad_phi(r: &Point) -> [f64; 3] {
    let x2 = r[0] * r[0] + r[1] * r[1];
    [-r[1] / x2, r[0] / x2, 0.0]
}

struct RankineAlpha(RankineParams);

impl ScalarField for RankineAlpha {
    fn jet(&self, r: &Point, _t: f64) -> Jet {
        let p = &self.0;
        let (xi, _) = polar(r);
        if xi >= p.xi0 {
            return Jet::default();
        }
        let b0 = p.derived().b0;
        Jet {
            value: -CHARGE * b0 * xi * xi / 2.0 - p.nf(),
            grad: [-CHARGE * b0 * r[0], -CHARGE * b0 * r[1], 0.0],
            dt: 0.0,
        }
    }
}

struct RankineBeta {
    params: RankineParams,
    rate: f64,
}

impl ScalarField for RankineBeta {
    fn jet(&self, r: &Point, t: f64) -> Jet {
        let (xi, phi) = polar(r);
        if xi >= self.params.xi0 {
            return Jet::default();
        }
        Jet { value: phi - self.rate * t, grad: grad_phi(r), dt: -self.rate }
    }

    fn cyclic(&self) -> bool {
        true
    }
}

struct RankinePhase(RankineParams);

impl ScalarField for RankinePhase {
    fn jet(&self, r: &Point, t: f64) -> Jet {
        let n = self.0.nf();
        let (_, phi) = polar(r);
        Jet { value: n * phi - self.0.derived().energy * t, grad: grad_phi(r).map(|g| n * g), dt: -self.0.derived().energy }
    }

    fn cyclic(&self) -> bool {
        true
    }
}

/// The piecewise azimuthal flow as a guidance field.
pub struct RankineFlow(pub RankineParams);

impl GuidanceField for RankineFlow {
    fn dim(&self) -> usize {
        2
    }

    fn mass(&self) -> f64 {
        self.0.mass
    }

    fn velocity(&self, q: &Point, _t: f64) -> Probe {
        let xi = q[0].hypot(q[1]);
        if xi == 0.0 {
            return Probe::Velocity([0.0; 3]);
        }
        let s = self.0.velocity(xi) / xi;
        Probe::Velocity([-s * q[1], s * q[0], 0.0])
    }

    fn describe(&self) -> String {
        serde_json::to_string(&self.0).unwrap_or_default()
    }
}

/// `E − (mv)²/2m − eV_eff − V_Ψ` at each point; zero for the exact vortex.
pub fn energy_residual(params: &RankineParams, points: &[Point]) -> f64 {
    let flow = params.flow();
    let e = params.derived().energy;
    points
        .iter()
        .map(|r| {
            let v = flow.velocity_at(r, 0.0);
            let kin = params.mass * (v[0] * v[0] + v[1] * v[1]) / 2.0;
            let veff = crate::clebsch::effective_fields(&flow.pair, r, 0.0, CHARGE).v * CHARGE;
            (e - kin - veff - params.quantum_potential(r[0].hypot(r[1]))).abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankineSolution {
    pub params: RankineParams,
    pub d_tau: f64,
    pub tau: Vec<f64>,
    pub g: Vec<f64>,
    pub dg: Vec<f64>,
}

/// RK4 integration of the radial equation from `G(0) = 1`, `G'(0) = 0`.
/// The first point `τ = dτ` comes from `G ≈ 1 + ((2N² − ε)/4)τ²`; `dτ`
/// must divide 1 so the coefficient switches exactly on a grid point.
pub fn solve_radial(params: &RankineParams, tau_max: f64, d_tau: f64) -> Result<RankineSolution> {
    let a2 = (2.0 * params.nf() * params.nf() - params.eps) / 4.0;
    let first = [1.0 + a2 * d_tau * d_tau, 2.0 * a2 * d_tau];
    integrate(params, tau_max, d_tau, [1.0, 0.0], first, |t| params.coefficient(t))
}

/// The `B0 = 0` limit: Bessel's equation on the whole line, started from the
/// regular branch `G ≈ τ^N (1 − ετ²/(4(N+1)))`.
pub fn solve_free(params: &RankineParams, tau_max: f64, d_tau: f64) -> Result<RankineSolution> {
    let n = params.nf();
    let c = params.eps / (4.0 * (n + 1.0));
    let origin = if params.n == 0 { 1.0 } else { 0.0 };
    let first = [
        d_tau.powf(n) * (1.0 - c * d_tau * d_tau),
        n * d_tau.powf(n - 1.0) - (n + 2.0) * c * d_tau.powf(n + 1.0),
    ];
    let n2 = n * n;
    integrate(params, tau_max, d_tau, [origin, if params.n == 1 { 1.0 } else { 0.0 }], first, |t| {
        params.eps - n2 / (t * t)
    })
}

fn integrate(
    params: &RankineParams,
    tau_max: f64,
    d_tau: f64,
    origin: [f64; 2],
    first: [f64; 2],
    coefficient: impl Fn(f64) -> f64,
) -> Result<RankineSolution> {
    params.validate()?;
    if !(d_tau > 0.0 && d_tau <= 1e-3) {
        return Err(Error::param("d_tau must lie in (0, 1e-3]"));
    }
    let per_unit = (1.0 / d_tau).round();
    if (per_unit * d_tau - 1.0).abs() > 1e-12 {
        return Err(Error::param("d_tau must divide 1"));
    }
    if tau_max < 5.0 {
        return Err(Error::param("tau_max must be at least 5"));
    }
    let steps = (tau_max / d_tau).round() as usize;
    let mut tau = Vec::with_capacity(steps + 1);
    let mut g = Vec::with_capacity(steps + 1);
    let mut dg = Vec::with_capacity(steps + 1);
    tau.push(0.0);
    g.push(origin[0]);
    dg.push(origin[1]);
    let mut y = first;
    tau.push(d_tau);
    g.push(y[0]);
    dg.push(y[1]);
    let rhs = |t: f64, y: &[f64; 2]| [y[1], -y[1] / t - coefficient(t) * y[0]];
    for i in 1..steps {
        let t = i as f64 / per_unit;
        let k1 = rhs(t, &y);
        let k2 = rhs(t + 0.5 * d_tau, &[y[0] + 0.5 * d_tau * k1[0], y[1] + 0.5 * d_tau * k1[1]]);
        let k3 = rhs(t + 0.5 * d_tau, &[y[0] + 0.5 * d_tau * k2[0], y[1] + 0.5 * d_tau * k2[1]]);
        let k4 = rhs(t + d_tau, &[y[0] + d_tau * k3[0], y[1] + d_tau * k3[1]]);
        for k in 0..2 {
            y[k] += d_tau / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
        }
        tau.push((i + 1) as f64 / per_unit);
        g.push(y[0]);
        dg.push(y[1]);
    }
    Ok(RankineSolution { params: *params, d_tau, tau, g, dg })
}

/// `sign(G''(0))`: negative exactly when `ε > 2N²`.
pub fn curvature_sign_at_origin(params: &RankineParams) -> f64 {
    (2.0 * params.nf() * params.nf() - params.eps).signum()
}

impl RankineSolution {
    /// `G(τ)` by cubic Hermite interpolation; 0 beyond the solved range.
    pub fn value(&self, tau: f64) -> f64 {
        let last = self.tau.len() - 1;
        if !(tau >= 0.0) || tau > self.tau[last] {
            return 0.0;
        }
        let i = ((tau / self.d_tau) as usize).min(last - 1);
        let h = self.d_tau;
        let s = (tau - self.tau[i]) / h;
        let (s2, s3) = (s * s, s * s * s);
        (2.0 * s3 - 3.0 * s2 + 1.0) * self.g[i]
            + (s3 - 2.0 * s2 + s) * h * self.dg[i]
            + (-2.0 * s3 + 3.0 * s2) * self.g[i + 1]
            + (s3 - s2) * h * self.dg[i + 1]
    }

    /// `V_Ψ = −(G'' + G'/τ)/(2mξ0²G)` from the solved profile, with `G''`
    /// by central differences of `G'`. NaN where `|G|` is below `floor`.
    pub fn quantum_potential(&self, index: usize, floor: f64) -> f64 {
        let p = &self.params;
        if index == 0 || index + 1 >= self.tau.len() || self.g[index].abs() < floor {
            return f64::NAN;
        }
        let g2 = (self.dg[index + 1] - self.dg[index - 1]) / (2.0 * self.d_tau);
        let lap = g2 + self.dg[index] / self.tau[index];
        -lap / (2.0 * p.mass * p.xi0 * p.xi0 * self.g[index])
    }

    /// CSV with columns `tau, G, W, U_eff`.
    pub fn to_csv(&self) -> String {
        let w = w_transform(self);
        let mut out = String::from("tau,G,W,U_eff\n");
        for i in 0..self.tau.len() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                fmt_f64(self.tau[i]),
                fmt_f64(self.g[i]),
                fmt_f64(w.w[i]),
                fmt_f64(w.u_paper[i])
            );
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesselMatch {
    pub c1: f64,
    pub c2: f64,
    /// Largest deviation over the fit window.
    pub residual: f64,
}

/// Least-squares `(C1, C2)` for `values ≈ C1 J_n(k τ) + C2 Y_n(k τ)`.
pub fn fit_bessel(n: u32, k: f64, taus: &[f64], values: &[f64]) -> Result<BesselMatch> {
    if taus.len() != values.len() {
        return Err(Error::LengthMismatch { expected: taus.len(), got: values.len() });
    }
    let basis =
        taus.iter().map(|&t| bessel_jy(n as usize, k * t)).collect::<Result<Vec<_>>>()?;
    let (mut sjj, mut sjy, mut syy, mut sjg, mut syg) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((j, y), g) in basis.iter().zip(values) {
        sjj += j * j;
        sjy += j * y;
        syy += y * y;
        sjg += j * g;
        syg += y * g;
    }
    let det = sjj * syy - sjy * sjy;
    if taus.len() < 2 || !(det.abs() > 1e-12 * sjj * syy) {
        return Err(Error::RankDeficient);
    }
    let c1 = (syy * sjg - sjy * syg) / det;
    let c2 = (sjj * syg - sjy * sjg) / det;
    let residual = basis
        .iter()
        .zip(values)
        .map(|((j, y), g)| (c1 * j + c2 * y - g).abs())
        .fold(0.0, f64::max);
    Ok(BesselMatch { c1, c2, residual })
}

/// Fits the outer solution over `τ ∈ [2, τ_max]`.
pub fn match_bessel(sol: &RankineSolution) -> Result<BesselMatch> {
    let start = sol.tau.partition_point(|&t| t < 2.0);
    if sol.tau.len() - start < 2 {
        return Err(Error::RankDeficient);
    }
    fit_bessel(sol.params.n, sol.params.eps.sqrt(), &sol.tau[start..], &sol.g[start..])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BarrierClass {
    AboveBarrier,
    BelowBarrier,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WTransform {
    pub w: Vec<f64>,
    /// `N²(2 − τ²)` inside and `(N² − 1/4)/τ²` outside.
    pub u_paper: Vec<f64>,
    /// The potential that makes `W'' + (ε − U)W = 0` exact: the inner branch
    /// carries the extra `−1/(4τ²)`.
    pub u_exact: Vec<f64>,
    pub barrier_top: f64,
    pub class: BarrierClass,
    /// `(inner, outer)` one-sided limits of `U_eff` at `τ = 1`.
    pub limits_at_core: (f64, f64),
}

/// `U_eff` with the barrier written as in the one-dimensional reduction.
pub fn u_eff(n: u32, tau: f64) -> f64 {
    let n2 = (n as f64).powi(2);
    if tau < 1.0 {
        n2 * (2.0 - tau * tau)
    } else {
        (n2 - 0.25) / (tau * tau)
    }
}

/// `W = G√τ` and the barrier it moves in.
pub fn w_transform(sol: &RankineSolution) -> WTransform {
    let n = sol.params.n;
    let n2 = (n as f64).powi(2);
    let w = sol.tau.iter().zip(&sol.g).map(|(t, g)| g * t.sqrt()).collect();
    let u_paper: Vec<f64> = sol.tau.iter().map(|&t| u_eff(n, t)).collect();
    let u_exact = sol
        .tau
        .iter()
        .map(|&t| if t < 1.0 { u_eff(n, t) - 0.25 / (t * t) } else { u_eff(n, t) })
        .collect();
    let barrier_top = u_paper[0];
    WTransform {
        w,
        u_paper,
        u_exact,
        barrier_top,
        class: if sol.params.eps > barrier_top { BarrierClass::AboveBarrier } else { BarrierClass::BelowBarrier },
        limits_at_core: (n2, n2 - 0.25),
    }
}

/// Largest `|W'' + (ε − U_exact)W|` for `τ ≥ tau_min`, with `W''` by
/// second differences on the solved grid.
pub fn w_residual(sol: &RankineSolution, wt: &WTransform, tau_min: f64) -> f64 {
    let h = sol.d_tau;
    (1..sol.tau.len() - 1)
        .filter(|&i| sol.tau[i] >= tau_min)
        .map(|i| {
            let w2 = (wt.w[i + 1] - 2.0 * wt.w[i] + wt.w[i - 1]) / (h * h);
            (w2 + (sol.params.eps - wt.u_exact[i]) * wt.w[i]).abs()
        })
        .fold(0.0, f64::max)
}

/// Circular orbits of the piecewise flow starting at `(ξ, 0)` for each radius.
pub fn trajectory_portrait(params: &RankineParams, radii: &[f64], time: TimeGrid) -> Result<TrajectoryEnsemble> {
    params.validate()?;
    if radii.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::param("orbit radii must be positive: ξ = 0 is a stagnation point"));
    }
    let starts: Vec<Point> = radii.iter().map(|&r| [r, 0.0, 0.0]).collect();
    integrate_guided(&RankineFlow(*params), &starts, time)
}

/// Analytic orbit period at radius `ξ`.
pub fn orbit_period(params: &RankineParams, xi: f64) -> f64 {
    2.0 * PI * xi / params.velocity(xi)
}

/// Largest deviation of the grid curl of the flow from `2ω̃` (inside) and
/// 0 (outside), skipping nodes within `3h` of the core edge.
pub fn grid_vorticity_error(params: &RankineParams, spec: &GridSpec) -> Result<(f64, f64)> {
    if spec.dim() != 2 {
        return Err(Error::param("vorticity check needs a 2D grid"));
    }
    let n = spec.len();
    let mut vx = Vec::with_capacity(n);
    let mut vy = Vec::with_capacity(n);
    for i in 0..n {
        let q = spec.node(i);
        match RankineFlow(*params).velocity(&q, 0.0) {
            Probe::Velocity(v) => {
                vx.push(v[0]);
                vy.push(v[1]);
            }
            _ => unreachable!("the Rankine flow is defined everywhere"),
        }
    }
    let dvy = derivative(spec, &vy, 0, 1)?;
    let dvx = derivative(spec, &vx, 1, 1)?;
    let band = 3.0 * spec.spacing(0).max(spec.spacing(1));
    let (mut inside, mut outside) = (0.0_f64, 0.0_f64);
    for i in 0..n {
        let q = spec.node(i);
        let xi = q[0].hypot(q[1]);
        if (xi - params.xi0).abs() <= band {
            continue;
        }
        let err = (dvy[i] - dvx[i] - params.vorticity(xi)).abs();
        if xi < params.xi0 {
            inside = inside.max(err);
        } else {
            outside = outside.max(err);
        }
    }
    Ok((inside, outside))
}

/// `|G(ξ/ξ0)|²` on a 2D grid.
pub fn density_grid(sol: &RankineSolution, spec: &GridSpec) -> RealField {
    let x0 = sol.params.xi0;
    RealField::from_fn(spec, |q| sol.value(q[0].hypot(q[1]) / x0).powi(2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_constants_and_continuity() {
        let p = RankineParams::default();
        let d = p.derived();
        assert_eq!(d.n_prime, 1.0);
        assert_eq!(d.omega, 1.0);
        assert!((p.velocity(1.0) - p.velocity(1.0 + 1e-15)).abs() < 1e-12);
        assert!((p.quantum_potential(1.0 - 1e-15) - (-0.5 + d.energy)).abs() < 1e-12);
        assert!((p.quantum_potential(1.0) - (-0.5 + d.energy)).abs() < 1e-12);
        assert!((p.quantum_potential(1e6) - d.energy).abs() < 1e-9);
    }

    #[test]
    fn euler_balance() {
        let p = RankineParams { n: 2, eps: 3.0, xi0: 0.7, mass: 1.5 };
        for xi in [0.1, 0.3, 0.69, 0.71, 1.0, 3.0] {
            let v = p.velocity(xi);
            assert!((p.mass * v * v / xi - p.quantum_potential_slope(xi)).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(solve_radial(&RankineParams::new(1, 0.0), 8.0, 1e-3).is_err());
        assert!(solve_radial(&RankineParams::new(1, 3.0), 8.0, 2e-3).is_err());
        assert!(solve_radial(&RankineParams::new(1, 3.0), 4.0, 1e-3).is_err());
        let tg = TimeGrid::new(0.0, 1.0, 0.1);
        assert!(trajectory_portrait(&RankineParams::default(), &[0.0], tg).is_err());
    }

    #[test]
    fn pure_j1_fits_exactly() {
        let taus: Vec<f64> = (0..200).map(|i| 2.0 + i as f64 * 0.03).collect();
        let vals: Vec<f64> = taus.iter().map(|&t| bessel_jy(1, 1.7 * t).unwrap().0 * 0.8).collect();
        let m = fit_bessel(1, 1.7, &taus, &vals).unwrap();
        assert!((m.c1 - 0.8).abs() < 1e-8 && m.c2.abs() < 1e-8);
        assert!(matches!(fit_bessel(1, 1.7, &taus[..1], &vals[..1]), Err(Error::RankDeficient)));
    }

    #[test]
    fn w_transform_reports_barrier() {
        let sol = solve_radial(&RankineParams::new(1, 3.0), 6.0, 1e-3).unwrap();
        let wt = w_transform(&sol);
        assert_eq!(wt.barrier_top, 2.0);
        assert_eq!(wt.class, BarrierClass::AboveBarrier);
        assert_eq!(wt.limits_at_core, (1.0, 0.75));
        assert!(w_residual(&sol, &wt, 0.5) < 1e-5);
        let low = solve_radial(&RankineParams::new(1, 1.0), 6.0, 1e-3).unwrap();
        assert_eq!(w_transform(&low).class, BarrierClass::BelowBarrier);
    }

    #[test]
    fn outer_region_is_bessel() {
        for (eps, g01) in [(3.0, 0.9974953), (1.0, 1.0024953)] {
            let sol = solve_radial(&RankineParams::new(1, eps), 8.0, 1e-3).unwrap();
            assert!((sol.g[100] - g01).abs() < 1e-6, "{}", sol.g[100]);
            let m = match_bessel(&sol).unwrap();
            assert!(m.residual < 1e-6);
        }
    }

    #[test]
    fn clebsch_pair_is_consistent() {
        use crate::clebsch::{advection_residual, lorentz_force_residual, vorticity_residual};
        let p = RankineParams::default();
        let flow = p.flow();
        let pts: Vec<Point> = [0.2, 0.5, 0.8].iter().flat_map(|&r| (0..5).map(move |k| {
            let a = 1.3 * k as f64;
            [r * a.cos(), r * a.sin(), 0.0]
        })).collect();
        assert!(vorticity_residual(&flow, &pts, 0.4, 1e-3) < 1e-6);
        assert!(lorentz_force_residual(&flow, &pts, 0.4) < 1e-6);
        assert!(energy_residual(&p, &pts) < 1e-12);
        let period = orbit_period(&p, 0.5);
        let tg = TimeGrid::new(0.0, period, period / 2000.0);
        let starts = [[0.3, 0.0, 0.0], [0.6, 0.0, 0.0]];
        let rep = advection_residual(&flow, &starts, tg).unwrap();
        assert!(rep.alpha < 1e-6 && rep.beta < 1e-6, "{rep:?}");
        let wrong = GeneralizedFlow::new(
            Arc::new(RankinePhase(p)),
            p.clebsch_pair_with_rate(2.0 * p.derived().omega),
            ExternalEm::None,
            p.mass,
            2,
        );
        let tg = TimeGrid::new(0.0, period / 4.0, period / 2000.0);
        let rep = advection_residual(&wrong, &starts, tg).unwrap();
        assert!((rep.beta - p.derived().omega * period / 4.0).abs() < 1e-6, "{rep:?}");
    }

    #[test]
    fn orbits_and_grid_vorticity() {
        let p = RankineParams::default();
        let period = orbit_period(&p, 2.0);
        let ens = trajectory_portrait(&p, &[0.5, 2.0], TimeGrid::new(0.0, period, period / 4000.0)).unwrap();
        let end = ens.final_positions();
        assert!((end[1][0] - 2.0).abs() < 1e-8 && end[1][1].abs() < 1e-8);
        assert!((orbit_period(&p, 0.5) - 2.0 * PI).abs() < 1e-12);
        let spec = GridSpec::new(&[-2.0, -2.0], &[2.0, 2.0], &[256, 256], crate::grid::Boundary::Dirichlet).unwrap();
        let (inside, outside) = grid_vorticity_error(&p, &spec).unwrap();
        assert!(inside < 1e-6 && outside < 1e-2, "{inside} {outside}");
    }

    #[test]
    fn no_core_limit_is_regular_bessel() {
        for n in [1, 2] {
            let p = RankineParams::new(n, 3.0);
            let sol = solve_free(&p, 8.0, 1e-3).unwrap();
            assert_eq!(sol.g[0], 0.0);
            let m = match_bessel(&sol).unwrap();
            assert!(m.residual < 1e-6 && (m.c2 / m.c1).abs() < 1e-6, "{m:?}");
        }
    }

    #[test]
    fn fourth_order_convergence() {
        let p = RankineParams::new(1, 3.0);
        let g = |h: f64| *solve_radial(&p, 6.0, h).unwrap().g.last().unwrap();
        let (a, b, c) = (g(1e-3), g(5e-4), g(2.5e-4));
        let ratio = (a - b) / (b - c);
        assert!(ratio > 4.0 && ratio < 20.0, "{ratio}");
    }

    #[test]
    fn curvature_dichotomy_and_continuity() {
        for (eps, n) in [(3.0, 1), (1.0, 1), (9.0, 2), (7.0, 2)] {
            let p = RankineParams::new(n, eps);
            let sol = solve_radial(&p, 5.0, 1e-3).unwrap();
            assert_eq!((sol.g[1] - 1.0).signum(), curvature_sign_at_origin(&p));
            let k = 1000;
            let jump = (sol.dg[k + 1] - sol.dg[k]) - (sol.dg[k] - sol.dg[k - 1]);
            assert!(jump.abs() < 1e-5, "{jump}");
        }
        let p = RankineParams::default();
        assert!((orbit_period(&p, 1.0) - 2.0 * PI / p.derived().omega).abs() < 1e-12);
        assert!((orbit_period(&p, 1.0) - 2.0 * PI * p.mass / p.nf()).abs() < 1e-12);
    }

    #[test]
    fn azimuthal_flux_is_divergence_free() {
        let p = RankineParams::default();
        let sol = solve_radial(&p, 5.0, 1e-3).unwrap();
        let spec = GridSpec::new(&[-2.0, -2.0], &[2.0, 2.0], &[128, 128], crate::grid::Boundary::Dirichlet).unwrap();
        let rho = density_grid(&sol, &spec);
        let mut jx = Vec::new();
        let mut jy = Vec::new();
        for i in 0..spec.len() {
            let q = spec.node(i);
            let Probe::Velocity(v) = RankineFlow(p).velocity(&q, 0.0) else { unreachable!() };
            jx.push(rho.values()[i] * v[0]);
            jy.push(rho.values()[i] * v[1]);
        }
        let band = 3.0 * spec.spacing(0);
        let div: f64 = derivative(&spec, &jx, 0, 1)
            .unwrap()
            .iter()
            .zip(derivative(&spec, &jy, 1, 1).unwrap())
            .enumerate()
            .filter(|(i, _)| (spec.node(*i)[0].hypot(spec.node(*i)[1]) - p.xi0).abs() > band)
            .map(|(_, (a, b))| (a + b).abs())
            .fold(0.0, f64::max);
        assert!(div < 1e-2, "{div}");
    }

    #[test]
    fn hermite_value_matches_nodes() {
        let sol = solve_radial(&RankineParams::new(1, 3.0), 5.0, 1e-3).unwrap();
        assert_eq!(sol.value(0.0), 1.0);
        assert!((sol.value(2.5) - sol.g[2500]).abs() < 1e-14);
    }
}
