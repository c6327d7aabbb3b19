//! Polar decomposition Ψ = R e^{iS} and the hydrodynamic quantities built on it.
//!
//! Quantities that are undefined on nodal points (velocity, quantum potential)
//! carry `NaN` on masked nodes.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{derivative, ComplexField, GridSpec, RealField};

/// Nodes with `R < NODE_THRESHOLD_REL * max R` are masked.
pub const NODE_THRESHOLD_REL: f64 = 1e-8;

/// Stress residuals are evaluated where `R ≥ STRESS_FLOOR_REL * max R`.
pub const STRESS_FLOOR_REL: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct MadelungFields {
    pub r: RealField,
    pub s_principal: RealField,
    pub velocity: Vec<RealField>,
    pub vq: RealField,
    pub node_mask: Vec<bool>,
    pub mass: f64,
}

impl MadelungFields {
    pub fn masked_count(&self) -> usize {
        self.node_mask.iter().filter(|&&m| m).count()
    }
}

pub fn node_mask(r: &RealField) -> Vec<bool> {
    let thr = NODE_THRESHOLD_REL * r.max_abs();
    r.values().iter().map(|&v| v < thr).collect()
}

/// Derivatives of Ψ shared by several diagnostics.
struct PsiJet {
    d1: Vec<Vec<Complex64>>,
    d2: Vec<Vec<Complex64>>,
}

impl PsiJet {
    fn new(psi: &ComplexField) -> Result<Self> {
        let spec = psi.spec();
        let mut d1 = Vec::new();
        let mut d2 = Vec::new();
        for axis in 0..spec.dim() {
            d1.push(derivative(spec, psi.values(), axis, 1)?);
            d2.push(derivative(spec, psi.values(), axis, 2)?);
        }
        Ok(Self { d1, d2 })
    }
}

/// `∇²R / R` from derivatives of Ψ: `Re(∇²Ψ/Ψ) + |Im(∇Ψ/Ψ)|²`.
///
/// Unlike differentiating `R` directly this stays smooth where the phase
/// winds, since Ψ itself is smooth.
fn lap_r_over_r(psi: Complex64, d1: impl Iterator<Item = Complex64>, lap: Complex64) -> f64 {
    let mut grad_s2 = 0.0;
    for d in d1 {
        grad_s2 += (d / psi).im.powi(2);
    }
    (lap / psi).re + grad_s2
}

pub fn decompose(psi: &ComplexField) -> Result<MadelungFields> {
    let spec = psi.spec();
    let m = psi.mass();
    let r = psi.amplitude();
    let mask = node_mask(&r);
    let s = RealField::new(spec.clone(), psi.values().iter().map(|c| c.arg()).collect())?;
    let jet = PsiJet::new(psi)?;
    let dim = spec.dim();
    let mut velocity = Vec::with_capacity(dim);
    for axis in 0..dim {
        let v = psi
            .values()
            .iter()
            .zip(&jet.d1[axis])
            .zip(&mask)
            .map(|((p, d), &masked)| if masked { f64::NAN } else { (d / p).im / m })
            .collect();
        velocity.push(RealField::new(spec.clone(), v)?);
    }
    let vq = (0..spec.len())
        .map(|i| {
            if mask[i] {
                return f64::NAN;
            }
            let lap: Complex64 = (0..dim).map(|a| jet.d2[a][i]).sum();
            let ratio = lap_r_over_r(psi.values()[i], (0..dim).map(|a| jet.d1[a][i]), lap);
            -ratio / (2.0 * m)
        })
        .collect();
    Ok(MadelungFields {
        r,
        s_principal: s,
        velocity,
        vq: RealField::new(spec.clone(), vq)?,
        node_mask: mask,
        mass: m,
    })
}

/// `−(1/2m) ∇²R / R`, differentiating `R` itself.
pub fn quantum_potential(r: &RealField, mass: f64) -> Result<RealField> {
    if r.values().iter().any(|&v| v < 0.0) {
        return Err(Error::param("amplitude must be non-negative"));
    }
    let lap = r.laplacian()?;
    let mask = node_mask(r);
    let values = r
        .values()
        .iter()
        .zip(lap.values())
        .zip(&mask)
        .map(|((&rv, &l), &masked)| if masked { f64::NAN } else { -l / (2.0 * mass * rv) })
        .collect();
    RealField::new(r.spec().clone(), values)
}

/// Maps a phase difference into `(−π, π]`.
pub fn wrap_phase(d: f64) -> f64 {
    let w = d - 2.0 * PI * (d / (2.0 * PI)).round();
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

fn adjacent(spec: &GridSpec, a: [usize; 2], b: [usize; 2]) -> bool {
    let step = |axis: usize| -> usize {
        let n = spec.points(axis);
        let d = a[axis].abs_diff(b[axis]);
        if spec.is_periodic() && d == n - 1 {
            1
        } else {
            d
        }
    };
    let total: usize = (0..spec.dim()).map(step).sum();
    total == 1
}

/// Winding number of the phase around a closed path of adjacent nodes.
///
/// The path may or may not repeat its first node at the end; the closing
/// edge is implied either way.
pub fn circulation_winding(psi: &ComplexField, path: &[[usize; 2]]) -> Result<i64> {
    let spec = psi.spec();
    if spec.dim() != 2 {
        return Err(Error::InvalidLoop("loops need a 2D field".into()));
    }
    let mut nodes = path.to_vec();
    if nodes.len() > 1 && nodes.first() == nodes.last() {
        nodes.pop();
    }
    if nodes.len() < 4 {
        return Err(Error::InvalidLoop(format!("{} distinct nodes cannot enclose a cell", nodes.len())));
    }
    let thr = NODE_THRESHOLD_REL * psi.max_abs();
    for (k, node) in nodes.iter().enumerate() {
        if node[0] >= spec.points(0) || node[1] >= spec.points(1) {
            return Err(Error::InvalidLoop(format!("node {node:?} outside the grid")));
        }
        let next = nodes[(k + 1) % nodes.len()];
        if !adjacent(spec, *node, next) {
            return Err(Error::InvalidLoop(format!("{node:?} and {next:?} are not adjacent")));
        }
        if psi.values()[spec.flat(node)].norm() < thr {
            return Err(Error::LoopThroughNode(node.to_vec()));
        }
    }
    Ok(winding_unchecked(psi, &nodes))
}

fn winding_unchecked(psi: &ComplexField, nodes: &[[usize; 2]]) -> i64 {
    let spec = psi.spec();
    let phase = |n: &[usize; 2]| psi.values()[spec.flat(n)].arg();
    let mut total = 0.0;
    for k in 0..nodes.len() {
        let a = phase(&nodes[k]);
        let b = phase(&nodes[(k + 1) % nodes.len()]);
        total += wrap_phase(b - a);
    }
    (total / (2.0 * PI)).round() as i64
}

/// Counter-clockwise rectangle through nodes `lo..=hi` (axis 0 is x, axis 1 is y).
pub fn rectangle_loop(lo: [usize; 2], hi: [usize; 2]) -> Vec<[usize; 2]> {
    let mut path = Vec::new();
    for i in lo[0]..hi[0] {
        path.push([i, lo[1]]);
    }
    for j in lo[1]..hi[1] {
        path.push([hi[0], j]);
    }
    for i in (lo[0] + 1..=hi[0]).rev() {
        path.push([i, hi[1]]);
    }
    for j in (lo[1] + 1..=hi[1]).rev() {
        path.push([lo[0], j]);
    }
    path
}

/// The outermost node ring of a 2D grid.
pub fn boundary_loop(spec: &GridSpec) -> Vec<[usize; 2]> {
    rectangle_loop([0, 0], [spec.points(0) - 1, spec.points(1) - 1])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VortexRecord {
    /// Lower-left node of the plaquette.
    pub cell: [usize; 2],
    /// Plaquette centre.
    pub center: [f64; 2],
    pub winding: i64,
    pub circulation: f64,
}

/// Non-zero plaquette windings. Plaquettes with a masked corner are skipped,
/// so a vortex whose core sits exactly on a node is reported by none of them.
pub fn detect_vortices(psi: &ComplexField) -> Result<Vec<VortexRecord>> {
    let spec = psi.spec();
    if spec.dim() != 2 {
        return Err(Error::param("vortex detection needs a 2D field"));
    }
    let (n0, n1) = spec.shape();
    let thr = NODE_THRESHOLD_REL * psi.max_abs();
    let (c0, c1) = if spec.is_periodic() { (n0, n1) } else { (n0 - 1, n1 - 1) };
    let mut out = Vec::new();
    for i in 0..c0 {
        for j in 0..c1 {
            let (ip, jp) = ((i + 1) % n0, (j + 1) % n1);
            let corners = [[i, j], [ip, j], [ip, jp], [i, jp]];
            if corners.iter().any(|c| psi.values()[spec.flat(c)].norm() < thr) {
                continue;
            }
            let w = winding_unchecked(psi, &corners);
            if w != 0 {
                let h0 = spec.spacing(0);
                let h1 = spec.spacing(1);
                out.push(VortexRecord {
                    cell: [i, j],
                    center: [spec.coord(0, i) + 0.5 * h0, spec.coord(1, j) + 0.5 * h1],
                    winding: w,
                    circulation: 2.0 * PI * w as f64,
                });
            }
        }
    }
    Ok(out)
}

/// Madelung stress `σ_ij = −(ρ/4m) ∂_i∂_j ln ρ`, row-major over axes.
///
/// Evaluated as `−(1/2m) Re(Ψ̄ ∂_i∂_jΨ − (Ψ̄/Ψ) ∂_iΨ ∂_jΨ)`, which is bounded
/// even where ρ is tiny. Exact zeros of Ψ give σ = 0.
pub fn stress_tensor(psi: &ComplexField) -> Result<Vec<RealField>> {
    let spec = psi.spec();
    let dim = spec.dim();
    let m = psi.mass();
    let mut d1 = Vec::new();
    for a in 0..dim {
        d1.push(derivative(spec, psi.values(), a, 1)?);
    }
    let mut out = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        for j in 0..dim {
            let dij = if i == j {
                derivative(spec, psi.values(), i, 2)?
            } else {
                derivative(spec, &d1[i], j, 1)?
            };
            let values = (0..spec.len())
                .map(|k| {
                    let p = psi.values()[k];
                    if p.norm() == 0.0 {
                        return 0.0;
                    }
                    let t = p.conj() * dij[k] - (p.conj() / p) * d1[i][k] * d1[j][k];
                    -t.re / (2.0 * m)
                })
                .collect();
            out.push(RealField::new(spec.clone(), values)?);
        }
    }
    Ok(out)
}

/// `∂_j V_Ψ` from up to third derivatives of Ψ.
fn quantum_potential_gradient(psi: &ComplexField) -> Result<Vec<Vec<f64>>> {
    let spec = psi.spec();
    let dim = spec.dim();
    let m = psi.mass();
    let jet = PsiJet::new(psi)?;
    let lap: Vec<Complex64> =
        (0..spec.len()).map(|k| (0..dim).map(|a| jet.d2[a][k]).sum()).collect();
    let mut out = Vec::with_capacity(dim);
    for j in 0..dim {
        let dlap = derivative(spec, &lap, j, 1)?;
        let mut djk = Vec::with_capacity(dim);
        for k in 0..dim {
            djk.push(if j == k { jet.d2[j].clone() } else { derivative(spec, &jet.d1[k], j, 1)? });
        }
        let g = (0..spec.len())
            .map(|n| {
                let p = psi.values()[n];
                let uj = jet.d1[j][n] / p;
                let l = lap[n] / p;
                let mut v = (dlap[n] / p - l * uj).re;
                for k in 0..dim {
                    let uk = jet.d1[k][n] / p;
                    v += 2.0 * uk.im * (djk[k][n] / p - uj * uk).im;
                }
                -v / (2.0 * m)
            })
            .collect();
        out.push(g);
    }
    Ok(out)
}

/// Max over well-resolved nodes of `|(1/ρ)(∇·σ)_j − ∂_j V_Ψ|`.
///
/// Nodes with `R < STRESS_FLOOR_REL * max R` are excluded: there the division
/// by ρ amplifies round-off rather than testing the identity.
pub fn stress_tensor_residual(psi: &ComplexField) -> Result<f64> {
    let spec = psi.spec();
    let dim = spec.dim();
    let sigma = stress_tensor(psi)?;
    let grad_vq = quantum_potential_gradient(psi)?;
    let floor = STRESS_FLOOR_REL * psi.max_abs();
    let mut div = vec![vec![0.0; spec.len()]; dim];
    for j in 0..dim {
        for i in 0..dim {
            let d = sigma[i * dim + j].gradient(i)?;
            for (acc, v) in div[j].iter_mut().zip(d.values()) {
                *acc += v;
            }
        }
    }
    let mut worst = 0.0_f64;
    for n in 0..spec.len() {
        let p = psi.values()[n];
        if p.norm() < floor {
            continue;
        }
        let rho = p.norm_sqr();
        for j in 0..dim {
            worst = worst.max((div[j][n] / rho - grad_vq[j][n]).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;

    fn vortex(spec: &GridSpec, charge: i32) -> ComplexField {
        ComplexField::from_fn(spec, 1.0, |p| {
            Complex64::new(p[0], p[1]).powi(charge) * (-(p[0] * p[0] + p[1] * p[1]) / 2.0).exp()
        })
        .unwrap()
    }

    fn plane(k: f64) -> ComplexField {
        let g = GridSpec::line(0.0, 2.0 * PI, 64, Boundary::Periodic).unwrap();
        ComplexField::from_fn(&g, 1.0, |p| Complex64::new(0.0, k * p[0]).exp()).unwrap()
    }

    #[test]
    fn plane_wave_velocity_and_potential() {
        let mf = decompose(&plane(2.0)).unwrap();
        assert!(mf.velocity[0].values().iter().all(|v| (v - 2.0).abs() < 1e-10));
        assert!(mf.vq.max_abs() < 1e-10);
        assert_eq!(mf.masked_count(), 0);
    }

    #[test]
    fn real_gaussian_has_no_current() {
        let g = GridSpec::line(-10.0, 10.0, 128, Boundary::Periodic).unwrap();
        let psi =
            ComplexField::from_fn(&g, 1.0, |p| Complex64::new((-p[0] * p[0] / 2.0).exp(), 0.0))
                .unwrap();
        let mf = decompose(&psi).unwrap();
        for (v, m) in mf.velocity[0].values().iter().zip(&mf.node_mask) {
            assert!(*m || v.abs() < 1e-6, "{v}");
        }
    }

    #[test]
    fn vortex_azimuthal_velocity() {
        let g = GridSpec::square(-8.0, 8.0, 128, Boundary::Periodic).unwrap();
        let mf = decompose(&vortex(&g, 1)).unwrap();
        let mut checked = 0;
        for n in 0..g.len() {
            let p = g.node(n);
            let r = p[0].hypot(p[1]);
            if !(0.3..=3.0).contains(&r) {
                continue;
            }
            let (vx, vy) = (mf.velocity[0].values()[n], mf.velocity[1].values()[n]);
            let vphi = (-p[1] * vx + p[0] * vy) / r;
            let vr = (p[0] * vx + p[1] * vy) / r;
            assert!((vphi - 1.0 / r).abs() < 1e-6 && vr.abs() < 1e-6);
            checked += 1;
        }
        assert!(checked > 1000);
    }

    #[test]
    fn gaussian_quantum_potential() {
        // R = exp(-x²/4): R''/R = x²/4 - 1/2, so V_Ψ = 1/4 - x²/8.
        let g = GridSpec::line(-12.0, 12.0, 256, Boundary::Periodic).unwrap();
        let r = RealField::from_fn(&g, |p| (-p[0] * p[0] / 4.0).exp());
        let vq = quantum_potential(&r, 1.0).unwrap();
        for i in 0..g.len() {
            let x = g.coord(0, i);
            if x.abs() < 6.0 {
                assert!((vq.values()[i] - (0.25 - x * x / 8.0)).abs() < 1e-6, "x={x}");
            }
        }
        let i0 = g.len() / 2;
        assert!((vq.values()[i0] - 0.25).abs() < 1e-10);
    }

    #[test]
    fn constant_amplitude_has_zero_potential() {
        let g = GridSpec::line(0.0, 1.0, 32, Boundary::Dirichlet).unwrap();
        let vq = quantum_potential(&RealField::constant(&g, 0.7), 2.0).unwrap();
        assert!(vq.max_abs() < 1e-10);
        let lin = RealField::from_fn(&g, |p| 1.0 + p[0]);
        assert!(quantum_potential(&lin, 1.0).unwrap().max_abs() < 1e-9);
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_phase(PI), PI);
        assert_eq!(wrap_phase(-PI), PI);
        assert!((wrap_phase(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn windings() {
        let g = GridSpec::square(-4.0, 4.0, 64, Boundary::Dirichlet).unwrap();
        let around = rectangle_loop([20, 20], [44, 44]);
        let beside = rectangle_loop([40, 40], [60, 60]);
        assert_eq!(circulation_winding(&vortex(&g, 1), &around).unwrap(), 1);
        assert_eq!(circulation_winding(&vortex(&g, 1), &beside).unwrap(), 0);
        assert_eq!(circulation_winding(&vortex(&g, 2), &around).unwrap(), 2);
        assert_eq!(circulation_winding(&vortex(&g, -1), &around).unwrap(), -1);
    }

    #[test]
    fn loop_validation() {
        // Odd point count puts a node exactly at the origin.
        let g = GridSpec::square(-4.0, 4.0, 65, Boundary::Dirichlet).unwrap();
        let psi = vortex(&g, 1);
        let through = rectangle_loop([32, 32], [40, 40]);
        assert!(matches!(
            circulation_winding(&psi, &through),
            Err(Error::LoopThroughNode(n)) if n == vec![32, 32]
        ));
        let broken = vec![[1, 1], [3, 1], [3, 3], [1, 3]];
        assert!(matches!(circulation_winding(&psi, &broken), Err(Error::InvalidLoop(_))));
    }

    #[test]
    fn detects_single_vortex_and_nothing_in_gaussian() {
        let g = GridSpec::square(-4.0, 4.0, 64, Boundary::Dirichlet).unwrap();
        let v = detect_vortices(&vortex(&g, 1)).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].winding, 1);
        assert_eq!(v[0].circulation, 2.0 * PI);
        assert!(v[0].center[0].abs() < 0.2 && v[0].center[1].abs() < 0.2);
        let gauss = ComplexField::from_fn(&g, 1.0, |p| {
            Complex64::new((-(p[0] * p[0] + p[1] * p[1]) / 2.0).exp(), 0.0)
        })
        .unwrap();
        assert!(detect_vortices(&gauss).unwrap().is_empty());
    }

    #[test]
    fn vortex_pair_sums_to_boundary_winding() {
        let g = GridSpec::square(-4.0, 4.0, 64, Boundary::Dirichlet).unwrap();
        let psi = ComplexField::from_fn(&g, 1.0, |p| {
            let z = Complex64::new(p[0], p[1]);
            let w = Complex64::new(p[0] - 1.0, -p[1]);
            z * w * (-(p[0] * p[0] + p[1] * p[1]) / 8.0).exp()
        })
        .unwrap();
        let v = detect_vortices(&psi).unwrap();
        let mut w: Vec<i64> = v.iter().map(|r| r.winding).collect();
        w.sort();
        assert_eq!(w, vec![-1, 1]);
        let boundary = circulation_winding(&psi, &boundary_loop(&g)).unwrap();
        assert_eq!(boundary, 0);
    }

    #[test]
    fn stress_residuals() {
        let g = GridSpec::line(-10.0, 10.0, 256, Boundary::Periodic).unwrap();
        let ho = ComplexField::from_fn(&g, 1.0, |p| Complex64::new((-p[0] * p[0] / 2.0).exp(), 0.0))
            .unwrap();
        let r = stress_tensor_residual(&ho).unwrap();
        assert!(r < 1e-4, "{r}");
        assert!(stress_tensor_residual(&plane(3.0)).unwrap() < 1e-10);
    }

    #[test]
    fn harmonic_stress_matches_closed_form() {
        // ρ = e^{-x²}: ∂²ln ρ = -2, so σ = ρ/(2m).
        let g = GridSpec::line(-10.0, 10.0, 256, Boundary::Periodic).unwrap();
        let ho = ComplexField::from_fn(&g, 1.0, |p| Complex64::new((-p[0] * p[0] / 2.0).exp(), 0.0))
            .unwrap();
        let s = stress_tensor(&ho).unwrap();
        for i in 0..g.len() {
            let x = g.coord(0, i);
            assert!((s[0].values()[i] - (-x * x).exp() / 2.0).abs() < 1e-10);
        }
    }
}
