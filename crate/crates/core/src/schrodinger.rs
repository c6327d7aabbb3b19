//! Split-step Fourier evolution of Ψ.
//!
//! Quantum mode solves `i∂tΨ = −∇²Ψ/2m + VΨ`. Classical mode solves the
//! nonlinear equation `ia∂tΨ = −(a²/2m)∇²Ψ + VΨ − V_cl Ψ` with
//! `V_cl = −(a²/2m)∇²|Ψ|/|Ψ|`, whose phase obeys the classical
//! Hamilton–Jacobi equation.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{derivative, ComplexField, GridSpec, RealField};
use crate::madelung::NODE_THRESHOLD_REL;
use crate::spectral::SpectralPlan;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Quantum,
    Classical,
}

#[derive(Clone, Debug)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub steps: usize,
    /// External potential; `None` means V ≡ 0.
    pub potential: Option<RealField>,
    pub mode: Mode,
    pub classical_a: f64,
    pub record_every: usize,
}

impl EvolutionConfig {
    pub fn new(dt: f64, steps: usize) -> Self {
        Self { dt, steps, potential: None, mode: Mode::Quantum, classical_a: 1.0, record_every: steps.max(1) }
    }

    pub fn with_potential(mut self, v: RealField) -> Self {
        self.potential = Some(v);
        self
    }

    pub fn classical(mut self, a: f64) -> Self {
        self.mode = Mode::Classical;
        self.classical_a = a;
        self
    }

    pub fn record_every(mut self, stride: usize) -> Self {
        self.record_every = stride;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::param(format!("dt must be positive, got {}", self.dt)));
        }
        if self.steps == 0 {
            return Err(Error::param("steps must be at least 1"));
        }
        if self.record_every == 0 {
            return Err(Error::param("record_every must be at least 1"));
        }
        if !(self.classical_a > 0.0 && self.classical_a.is_finite()) {
            return Err(Error::param("classical_a must be positive"));
        }
        Ok(())
    }

    /// Largest step keeping `dt·max|V| < 0.1` and `dt·k_max²/2m < 0.5`.
    pub fn default_dt(spec: &GridSpec, potential: Option<&RealField>, mass: f64) -> f64 {
        let kmax2: f64 = (0..spec.dim())
            .map(|a| (PI / spec.spacing(a)).powi(2))
            .sum();
        let mut dt = 0.5 * 2.0 * mass / kmax2;
        if let Some(v) = potential {
            let vmax = v.max_abs();
            if vmax > 0.0 {
                dt = dt.min(0.1 / vmax);
            }
        }
        dt * 0.999
    }
}

/// Classical mode drops Fourier modes above this fraction of the Nyquist
/// wavenumber. The nonlinear term otherwise aliases, and without quantum
/// pressure nothing damps the aliased modes.
pub const DEALIAS: f64 = 2.0 / 3.0;

/// Classical mode warns when the kinetic phase per step at the dealiasing
/// cutoff, `a·k²·dt/2m`, exceeds this. Moving states grow a splitting
/// instability above it; static ones tolerate much larger steps.
pub const CLASSICAL_PHASE_GUIDE: f64 = 0.1;

/// Single-step propagator. Reusable across many steps without reallocation.
pub struct Propagator {
    plan: SpectralPlan,
    kinetic: Vec<Complex64>,
    half_potential: Option<Vec<Complex64>>,
    mode: Mode,
    a: f64,
    mass: f64,
    dt: f64,
}

impl Propagator {
    /// `dt` may be negative (backward evolution).
    pub fn new(
        spec: &GridSpec,
        mass: f64,
        dt: f64,
        potential: Option<&RealField>,
        mode: Mode,
        a: f64,
    ) -> Result<Self> {
        let plan = SpectralPlan::new(spec).map_err(|e| match e {
            Error::NotPeriodic => Error::param("split-step evolution needs a periodic grid"),
            other => other,
        })?;
        let a = if mode == Mode::Quantum { 1.0 } else { a };
        let kmax: Vec<f64> = (0..spec.dim()).map(|ax| DEALIAS * PI / spec.spacing(ax)).collect();
        let kinetic = (0..plan.len())
            .map(|i| {
                if mode == Mode::Classical && plan.beyond_fraction(i, &kmax, 1.0) {
                    return Complex64::default();
                }
                Complex64::from_polar(1.0, -a * plan.k_squared(i) * dt / (2.0 * mass))
            })
            .collect();
        let half_potential = match potential {
            Some(v) => {
                if v.spec() != spec {
                    return Err(Error::GridMismatch);
                }
                Some(v.values().iter().map(|&x| Complex64::from_polar(1.0, -x * dt / (2.0 * a))).collect())
            }
            None => None,
        };
        Ok(Self { plan, kinetic, half_potential, mode, a, mass, dt })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn potential_half(&self, psi: &mut [Complex64]) {
        if let Some(h) = &self.half_potential {
            for (p, f) in psi.iter_mut().zip(h) {
                *p *= f;
            }
        }
    }

    /// `V_cl` from the current amplitude; zero on masked nodes.
    pub fn classical_potential(&mut self, psi: &[Complex64]) -> Vec<f64> {
        let (grads, lap) = self.plan.gradient_and_laplacian(psi);
        let thr = NODE_THRESHOLD_REL * psi.iter().fold(0.0_f64, |m, c| m.max(c.norm()));
        let coef = -self.a * self.a / (2.0 * self.mass);
        (0..psi.len())
            .map(|i| {
                let p = psi[i];
                if p.norm() < thr {
                    return 0.0;
                }
                let mut ratio = (lap[i] / p).re;
                for g in &grads {
                    ratio += (g[i] / p).im.powi(2);
                }
                coef * ratio
            })
            .collect()
    }

    fn classical_half(&mut self, psi: &mut [Complex64]) {
        let vcl = self.classical_potential(psi);
        let s = self.dt / (2.0 * self.a);
        for (p, v) in psi.iter_mut().zip(vcl) {
            *p *= Complex64::from_polar(1.0, v * s);
        }
    }

    /// Advances `psi` by one step.
    ///
    /// The classical correction only changes the phase, so `V_cl` is the same
    /// before and after it; applying it as two half steps around the quantum
    /// step keeps the scheme symmetric.
    pub fn step(&mut self, psi: &mut [Complex64]) {
        if self.mode == Mode::Classical {
            self.classical_half(psi);
        }
        self.potential_half(psi);
        self.plan.forward(psi);
        for (p, k) in psi.iter_mut().zip(&self.kinetic) {
            *p *= k;
        }
        self.plan.inverse(psi);
        self.potential_half(psi);
        if self.mode == Mode::Classical {
            self.classical_half(psi);
        }
    }
}

#[derive(Clone, Debug)]
pub struct Evolution {
    pub times: Vec<f64>,
    pub snapshots: Vec<ComplexField>,
    pub norms: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Share of additional masked nodes that triggers the caustic warning.
pub const CAUSTIC_FRACTION: f64 = 0.10;

fn masked(psi: &[Complex64]) -> usize {
    let thr = NODE_THRESHOLD_REL * psi.iter().fold(0.0_f64, |m, c| m.max(c.norm()));
    psi.iter().filter(|c| c.norm() < thr).count()
}

fn run(psi0: &ComplexField, cfg: &EvolutionConfig, mode: Mode) -> Result<Evolution> {
    cfg.validate()?;
    if cfg.mode != mode {
        return Err(Error::param(format!("configuration mode is {:?}", cfg.mode)));
    }
    let spec = psi0.spec();
    let mut prop =
        Propagator::new(spec, psi0.mass(), cfg.dt, cfg.potential.as_ref(), mode, cfg.classical_a)?;
    let mut psi = psi0.values().to_vec();
    let mut out = Evolution {
        times: vec![0.0],
        snapshots: vec![psi0.clone()],
        norms: vec![psi0.norm_sq().sqrt()],
        warnings: Vec::new(),
    };
    if mode == Mode::Classical {
        let kc2: f64 = (0..spec.dim()).map(|ax| (DEALIAS * PI / spec.spacing(ax)).powi(2)).sum();
        let phase = cfg.classical_a * kc2 * cfg.dt / (2.0 * psi0.mass());
        if phase > CLASSICAL_PHASE_GUIDE {
            out.warnings.push(format!(
                "classical step phase {phase:.3} exceeds {CLASSICAL_PHASE_GUIDE}; moving states may go unstable"
            ));
        }
    }
    let baseline = masked(&psi);
    let mut warned = false;
    for step in 1..=cfg.steps {
        prop.step(&mut psi);
        if mode == Mode::Classical && !warned {
            let grown = masked(&psi).saturating_sub(baseline);
            if grown as f64 > CAUSTIC_FRACTION * psi.len() as f64 {
                out.warnings.push(format!("caustic formation at step {step}"));
                warned = true;
            }
        }
        if step % cfg.record_every == 0 || step == cfg.steps {
            let snap = psi0.with_values(psi.clone())?;
            out.norms.push(snap.norm_sq().sqrt());
            out.times.push(step as f64 * cfg.dt);
            out.snapshots.push(snap);
        }
    }
    Ok(out)
}

pub fn evolve_quantum(psi0: &ComplexField, cfg: &EvolutionConfig) -> Result<Evolution> {
    run(psi0, cfg, Mode::Quantum)
}

pub fn evolve_classical(psi0: &ComplexField, cfg: &EvolutionConfig) -> Result<Evolution> {
    run(psi0, cfg, Mode::Classical)
}

pub fn evolve(psi0: &ComplexField, cfg: &EvolutionConfig) -> Result<Evolution> {
    run(psi0, cfg, cfg.mode)
}

/// Max-norm of `(−∇²/2m + V − E)Ψ` over non-masked nodes.
pub fn stationary_residual(psi: &ComplexField, v: Option<&RealField>, e: f64) -> Result<f64> {
    let lap = psi.laplacian()?;
    if let Some(v) = v {
        if v.spec() != psi.spec() {
            return Err(Error::GridMismatch);
        }
    }
    let thr = NODE_THRESHOLD_REL * psi.max_abs();
    let m = psi.mass();
    let mut worst = 0.0_f64;
    for i in 0..psi.values().len() {
        let p = psi.values()[i];
        if p.norm() < thr {
            continue;
        }
        let vi = v.map_or(0.0, |v| v.values()[i]);
        let h = -lap.values()[i] / (2.0 * m) + p * (vi - e);
        worst = worst.max(h.norm());
    }
    Ok(worst)
}

/// Mean and variance of `|Ψ|²` along `axis`.
pub fn position_moments(psi: &ComplexField, axis: usize) -> Result<(f64, f64)> {
    let spec = psi.spec();
    spec.check_axis(axis)?;
    let (mut w, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for (i, c) in psi.values().iter().enumerate() {
        let x = spec.node(i)[axis];
        let r = c.norm_sqr();
        w += r;
        s1 += r * x;
        s2 += r * x * x;
    }
    let mean = s1 / w;
    Ok((mean, s2 / w - mean * mean))
}

/// Probability current `Im(Ψ̄ ∂_kΨ)/m` per axis.
pub fn current(psi: &ComplexField) -> Result<Vec<Vec<f64>>> {
    let spec = psi.spec();
    (0..spec.dim())
        .map(|a| {
            let d = derivative(spec, psi.values(), a, 1)?;
            Ok(psi.values().iter().zip(&d).map(|(p, d)| (p.conj() * d).im / psi.mass()).collect())
        })
        .collect()
}

/// Max of `|∂tρ + ∇·j|` between two snapshots `dt` apart, with both terms
/// centred at the midpoint.
pub fn continuity_residual(a: &ComplexField, b: &ComplexField, dt: f64) -> Result<f64> {
    if a.spec() != b.spec() {
        return Err(Error::GridMismatch);
    }
    let spec = a.spec();
    let ja = current(a)?;
    let jb = current(b)?;
    let mut div = vec![0.0; spec.len()];
    for axis in 0..spec.dim() {
        let mid: Vec<f64> = ja[axis].iter().zip(&jb[axis]).map(|(x, y)| 0.5 * (x + y)).collect();
        let d = derivative(spec, &mid, axis, 1)?;
        for (acc, v) in div.iter_mut().zip(d) {
            *acc += v;
        }
    }
    let mut worst = 0.0_f64;
    for i in 0..spec.len() {
        let drho = (b.values()[i].norm_sqr() - a.values()[i].norm_sqr()) / dt;
        worst = worst.max((drho + div[i]).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;

    fn gaussian(spec: &GridSpec, sigma: f64, k: f64, x0: f64) -> ComplexField {
        ComplexField::from_fn(spec, 1.0, |p| {
            let x = p[0] - x0;
            Complex64::from_polar((-x * x / (4.0 * sigma * sigma)).exp(), k * p[0])
        })
        .unwrap()
        .normalized()
        .unwrap()
    }

    #[test]
    fn free_gaussian_dispersion() {
        let g = GridSpec::line(-20.0, 20.0, 512, Boundary::Periodic).unwrap();
        let psi = gaussian(&g, 1.0, 0.0, 0.0);
        let ev = evolve_quantum(&psi, &EvolutionConfig::new(1e-3, 1000)).unwrap();
        let (_, var) = position_moments(ev.snapshots.last().unwrap(), 0).unwrap();
        assert!((var - 1.25).abs() < 1e-3, "{var}");
    }

    #[test]
    fn plane_wave_phase_advance() {
        let g = GridSpec::line(0.0, 2.0 * PI, 64, Boundary::Periodic).unwrap();
        let k = 3.0;
        let psi = ComplexField::from_fn(&g, 1.0, |p| Complex64::from_polar(1.0, k * p[0])).unwrap();
        let ev = evolve_quantum(&psi, &EvolutionConfig::new(0.01, 100)).unwrap();
        let last = ev.snapshots.last().unwrap();
        for (a, b) in last.values().iter().zip(psi.values()) {
            let want = b * Complex64::from_polar(1.0, -k * k * 1.0 / 2.0);
            assert!((a - want).norm() < 1e-8);
        }
    }

    #[test]
    fn harmonic_ground_state_returns_after_one_period() {
        let g = GridSpec::line(-10.0, 10.0, 256, Boundary::Periodic).unwrap();
        let v = RealField::from_fn(&g, |p| p[0] * p[0] / 2.0);
        let psi = ComplexField::from_fn(&g, 1.0, |p| Complex64::new((-p[0] * p[0] / 2.0).exp(), 0.0))
            .unwrap()
            .normalized()
            .unwrap();
        let steps = 2000;
        let cfg = EvolutionConfig::new(2.0 * PI / steps as f64, steps).with_potential(v);
        let ev = evolve_quantum(&psi, &cfg).unwrap();
        let ov = psi.inner(ev.snapshots.last().unwrap()).unwrap().norm();
        assert!((ov - 1.0).abs() < 1e-6, "{ov}");
    }

    #[test]
    fn norm_conserved_and_time_reversible() {
        let g = GridSpec::line(-10.0, 10.0, 256, Boundary::Periodic).unwrap();
        let v = RealField::from_fn(&g, |p| 0.5 * p[0] * p[0] + (2.0 * p[0]).sin());
        let psi = gaussian(&g, 0.8, 1.5, -1.0);
        let dt = 1e-3;
        let mut fwd = Propagator::new(&g, 1.0, dt, Some(&v), Mode::Quantum, 1.0).unwrap();
        let mut bwd = Propagator::new(&g, 1.0, -dt, Some(&v), Mode::Quantum, 1.0).unwrap();
        let mut x = psi.values().to_vec();
        for _ in 0..1000 {
            fwd.step(&mut x);
        }
        let n = psi.with_values(x.clone()).unwrap().norm_sq().sqrt();
        assert!((n - 1.0).abs() < 1e-10);
        for _ in 0..1000 {
            bwd.step(&mut x);
        }
        let err = x.iter().zip(psi.values()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn dirichlet_grid_rejected() {
        let g = GridSpec::line(-1.0, 1.0, 64, Boundary::Dirichlet).unwrap();
        let psi = ComplexField::from_fn(&g, 1.0, |_| Complex64::new(1.0, 0.0)).unwrap();
        assert!(evolve_quantum(&psi, &EvolutionConfig::new(0.1, 1)).is_err());
        assert!(evolve_classical(&psi, &EvolutionConfig::new(0.1, 1)).is_err());
    }

    #[test]
    fn classical_mode_keeps_gaussian_at_rest() {
        let g = GridSpec::line(-10.0, 10.0, 256, Boundary::Periodic).unwrap();
        let psi = gaussian(&g, 1.0, 0.0, 0.0);
        let cfg = EvolutionConfig::new(1e-3, 1000).classical(1.0);
        let ev = evolve_classical(&psi, &cfg).unwrap();
        let last = ev.snapshots.last().unwrap();
        let drift: f64 = last
            .values()
            .iter()
            .zip(psi.values())
            .map(|(a, b)| (a.norm_sqr() - b.norm_sqr()).powi(2))
            .sum::<f64>()
            .sqrt()
            * g.cell_volume().sqrt();
        assert!(drift < 1e-3, "{drift}");
        assert!(ev.warnings.iter().all(|w| !w.contains("caustic")));
    }

    #[test]
    fn classical_mode_translates_rigidly() {
        let g = GridSpec::line(-20.0, 20.0, 512, Boundary::Periodic).unwrap();
        let k = 1.5;
        let psi = gaussian(&g, 1.0, k, -2.0);
        let ev = evolve_classical(&psi, &EvolutionConfig::new(1e-3, 1000).classical(1.0)).unwrap();
        let (mean, var) = position_moments(ev.snapshots.last().unwrap(), 0).unwrap();
        assert!((mean - (-2.0 + k)).abs() < 1e-3, "{mean}");
        assert!((var - 1.0).abs() < 1e-3, "{var}");
    }

    #[test]
    fn classical_plane_wave_matches_quantum() {
        let g = GridSpec::line(0.0, 2.0 * PI, 64, Boundary::Periodic).unwrap();
        let psi = ComplexField::from_fn(&g, 1.0, |p| Complex64::from_polar(1.0, 2.0 * p[0])).unwrap();
        let q = evolve_quantum(&psi, &EvolutionConfig::new(1e-3, 500)).unwrap();
        let c = evolve_classical(&psi, &EvolutionConfig::new(1e-3, 500).classical(1.0)).unwrap();
        for (a, b) in q.snapshots[1].values().iter().zip(c.snapshots[1].values()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn stationary_residuals() {
        let g = GridSpec::line(0.0, 2.0 * PI, 64, Boundary::Periodic).unwrap();
        let psi = ComplexField::from_fn(&g, 1.0, |p| Complex64::from_polar(1.0, 3.0 * p[0])).unwrap();
        assert!(stationary_residual(&psi, None, 4.5).unwrap() < 1e-8);
        let off = stationary_residual(&psi, None, 4.6).unwrap();
        assert!((off - 0.1).abs() < 1e-8);

        let g = GridSpec::line(-10.0, 10.0, 256, Boundary::Periodic).unwrap();
        let v = RealField::from_fn(&g, |p| p[0] * p[0] / 2.0);
        let ho = ComplexField::from_fn(&g, 1.0, |p| Complex64::new((-p[0] * p[0] / 2.0).exp(), 0.0))
            .unwrap();
        assert!(stationary_residual(&ho, Some(&v), 0.5).unwrap() < 1e-4);
    }

    #[test]
    fn continuity_between_snapshots() {
        let g = GridSpec::line(-15.0, 15.0, 256, Boundary::Periodic).unwrap();
        let psi = gaussian(&g, 0.7, 2.0, 0.0);
        let dt = 1e-3;
        let ev = evolve_quantum(&psi, &EvolutionConfig::new(dt, 10).record_every(1)).unwrap();
        let r = continuity_residual(&ev.snapshots[4], &ev.snapshots[5], dt).unwrap();
        assert!(r < 1e-5, "{r}");
    }
}
