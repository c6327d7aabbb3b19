//! Browser bindings for three interactive views:
//! the Rankine radial profile, the Rankine density with its orbits, and the
//! phase map of a set of phase singularities with their detected windings.
//!
//! Every export returns a JSON string; the plain Rust functions underneath
//! are what the tests exercise.

use qbohm::madelung::detect_vortices;
use qbohm::rankine::{density_grid, match_bessel, orbit_period, solve_radial, trajectory_portrait, w_transform, RankineParams};
use qbohm::trajectories::TimeGrid;
use qbohm::{Boundary, Complex64, ComplexField, GridSpec};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct Profile {
    pub tau: Vec<f64>,
    pub g: Vec<f64>,
    pub w: Vec<f64>,
    pub u_eff: Vec<f64>,
    pub c1: f64,
    pub c2: f64,
    pub residual: f64,
    pub above_barrier: bool,
}

/// `G(τ)` on `[0, tau_max]` with every `stride`-th solver point kept.
pub fn profile(n: u32, eps: f64, tau_max: f64, stride: usize) -> Result<Profile, String> {
    let sol = solve_radial(&RankineParams::new(n, eps), tau_max.max(5.0), 1e-3).map_err(|e| e.to_string())?;
    let fit = match_bessel(&sol).map_err(|e| e.to_string())?;
    let wt = w_transform(&sol);
    let pick = |v: &[f64]| v.iter().step_by(stride.max(1)).copied().collect::<Vec<_>>();
    Ok(Profile {
        tau: pick(&sol.tau),
        g: pick(&sol.g),
        w: pick(&wt.w),
        u_eff: pick(&wt.u_paper),
        c1: fit.c1,
        c2: fit.c2,
        residual: fit.residual,
        above_barrier: eps > wt.barrier_top,
    })
}

#[derive(Debug, Serialize)]
pub struct Portrait {
    pub size: usize,
    pub half_width: f64,
    /// Row-major `size × size` density, normalized to a peak of 1.
    pub density: Vec<f64>,
    /// One closed polyline `[x0, y0, x1, y1, ...]` per orbit.
    pub orbits: Vec<Vec<f64>>,
    pub periods: Vec<f64>,
    pub core_radius: f64,
}

pub fn portrait(n: u32, eps: f64, half_width: f64, size: usize, radii: &[f64]) -> Result<Portrait, String> {
    let p = RankineParams::new(n, eps);
    let size = size.clamp(16, 512);
    let spec = GridSpec::square(-half_width, half_width, size, Boundary::Dirichlet).map_err(|e| e.to_string())?;
    let sol = solve_radial(&p, (half_width * 1.5).max(5.0), 1e-3).map_err(|e| e.to_string())?;
    let rho = density_grid(&sol, &spec);
    let peak = rho.max_abs().max(f64::MIN_POSITIVE);
    let mut orbits = Vec::new();
    let mut periods = Vec::new();
    for &r in radii {
        let period = orbit_period(&p, r);
        let ens = trajectory_portrait(&p, &[r], TimeGrid::new(0.0, period, period / 400.0).record_every(4))
            .map_err(|e| e.to_string())?;
        orbits.push(ens.positions[0].iter().flat_map(|q| [q[0], q[1]]).collect());
        periods.push(period);
    }
    Ok(Portrait {
        size,
        half_width,
        density: rho.values().iter().map(|v| v / peak).collect(),
        orbits,
        periods,
        core_radius: p.xi0,
    })
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
pub struct Singularity {
    pub x: f64,
    pub y: f64,
    pub charge: i32,
}

#[derive(Debug, Serialize)]
pub struct PhaseMap {
    pub size: usize,
    pub half_width: f64,
    /// Row-major phase in `(−π, π]`.
    pub phase: Vec<f64>,
    /// Row-major `|Ψ|`, normalized to a peak of 1.
    pub amplitude: Vec<f64>,
    /// Detected singularities `[x, y, winding]`. Adjacent nonzero plaquettes
    /// are merged, so a higher-order zero split across cells reads as one.
    pub vortices: Vec<[f64; 3]>,
}

/// `Ψ = Π (z − z_k)^{n_k} e^{−|z|²/(2w²)}` with `w = half_width/2`; negative
/// charges use the conjugate factor.
pub fn phase_map(sources: &[Singularity], half_width: f64, size: usize) -> Result<PhaseMap, String> {
    let size = size.clamp(16, 512);
    let spec = GridSpec::square(-half_width, half_width, size, Boundary::Dirichlet).map_err(|e| e.to_string())?;
    let w2 = (half_width / 2.0).powi(2);
    let psi = ComplexField::from_fn(&spec, 1.0, |q| {
        let mut z = Complex64::new((-(q[0] * q[0] + q[1] * q[1]) / (2.0 * w2)).exp(), 0.0);
        for s in sources {
            let d = Complex64::new(q[0] - s.x, q[1] - s.y);
            let d = if s.charge >= 0 { d } else { d.conj() };
            z *= d.powi(s.charge.abs());
        }
        z
    })
    .map_err(|e| e.to_string())?;
    let peak = psi.max_abs().max(f64::MIN_POSITIVE);
    let found = detect_vortices(&psi).map_err(|e| e.to_string())?;
    let reach = 2.5 * spec.spacing(0);
    let mut clusters: Vec<Vec<[f64; 3]>> = Vec::new();
    for v in found {
        let p = [v.center[0], v.center[1], v.winding as f64];
        match clusters.iter_mut().find(|c| c.iter().any(|q| (q[0] - p[0]).hypot(q[1] - p[1]) < reach)) {
            Some(c) => c.push(p),
            None => clusters.push(vec![p]),
        }
    }
    let vortices = clusters
        .iter()
        .map(|c| {
            let k = c.len() as f64;
            [c.iter().map(|p| p[0]).sum::<f64>() / k, c.iter().map(|p| p[1]).sum::<f64>() / k, c.iter().map(|p| p[2]).sum()]
        })
        .filter(|v| v[2] != 0.0)
        .collect();
    Ok(PhaseMap {
        size,
        half_width,
        phase: psi.values().iter().map(|c| c.arg()).collect(),
        amplitude: psi.values().iter().map(|c| c.norm() / peak).collect(),
        vortices,
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string())).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = radialProfile)]
pub fn radial_profile(n: u32, eps: f64, tau_max: f64) -> Result<String, JsValue> {
    to_js(profile(n, eps, tau_max, 20))
}

#[wasm_bindgen(js_name = vortexPortrait)]
pub fn vortex_portrait(n: u32, eps: f64, half_width: f64, size: usize, radii: Vec<f64>) -> Result<String, JsValue> {
    to_js(portrait(n, eps, half_width, size, &radii))
}

/// `sources` is a JSON array of `{x, y, charge}`.
#[wasm_bindgen(js_name = phaseMap)]
pub fn phase_map_js(sources: &str, half_width: f64, size: usize) -> Result<String, JsValue> {
    let parsed: Vec<Singularity> = serde_json::from_str(sources).map_err(|e| JsValue::from_str(&e.to_string()))?;
    to_js(phase_map(&parsed, half_width, size))
}
