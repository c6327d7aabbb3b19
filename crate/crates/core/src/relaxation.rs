//! Quantum equilibrium: Born sampling, the ratio `f = ρ/|Ψ|²`, the
//! coarse-grained H-function and relaxation experiments in a periodic box.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Boundary, ComplexField, GridSpec, Point, RealField};
use crate::io::fmt_f64;
use crate::madelung::node_mask;
use crate::par_map;
use crate::schrodinger::{Mode, Propagator};
use crate::spectral::SpectralPlan;
use crate::trajectories::{advance_guided, GuidanceField, Probe, Snapshot, SnapshotPair, TrajectoryStatus};

/// Rejection sampling gives up below this acceptance rate.
pub const MIN_ACCEPTANCE: f64 = 1e-4;

/// Envelope over the largest node density, covering interpolation overshoot.
const ENVELOPE: f64 = 1.25;

/// Warn when more than this fraction of trajectories stops at nodes.
pub const CAPTURE_WARNING: f64 = 0.01;

fn domain(spec: &GridSpec) -> Vec<(f64, f64)> {
    (0..spec.dim())
        .map(|ax| {
            let (lo, _) = spec.extent(ax);
            (lo, spec.length(ax))
        })
        .collect()
}

fn uniform_point(rng: &mut ChaCha8Rng, dom: &[(f64, f64)]) -> Point {
    let mut q = [0.0; 3];
    for (qi, &(lo, len)) in q.iter_mut().zip(dom) {
        *qi = lo + len * rng.gen::<f64>();
    }
    q
}

/// `n` independent points with density `|Ψ|²`, by rejection against a
/// uniform proposal over the domain. Deterministic for a fixed seed.
pub fn sample_born(psi: &ComplexField, n: usize, seed: u64) -> Result<Vec<Point>> {
    if n == 0 {
        return Err(Error::param("need at least one sample"));
    }
    if (psi.norm_sq() - 1.0).abs() >= 1e-9 {
        return Err(Error::param("Born sampling needs a normalized wave function"));
    }
    let spec = psi.spec();
    let dom = domain(spec);
    let volume: f64 = dom.iter().map(|d| d.1).product();
    let rho = psi.density();
    let mut envelope = ENVELOPE * rho.max_abs();
    let rate = 1.0 / (envelope * volume);
    if rate < MIN_ACCEPTANCE {
        return Err(Error::ProposalTooLoose(rate));
    }
    'restart: loop {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let q = uniform_point(&mut rng, &dom);
            let u: f64 = rng.gen();
            let d = rho.interpolate(&q)?.max(0.0);
            if d > envelope {
                // The interpolant overshoots the envelope: widen and redo so
                // the accepted set stays exact and seed-determined.
                envelope = 2.0 * d;
                continue 'restart;
            }
            if u * envelope < d {
                out.push(q);
            }
        }
        return Ok(out);
    }
}

/// `n` points uniform over the grid's domain.
pub fn sample_uniform(spec: &GridSpec, n: usize, seed: u64) -> Vec<Point> {
    let dom = domain(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| uniform_point(&mut rng, &dom)).collect()
}

/// Pointwise `ρ/|Ψ|²`; NaN on masked nodes.
pub fn f_ratio(rho: &RealField, psi: &ComplexField) -> Result<RealField> {
    if rho.spec() != psi.spec() {
        return Err(Error::GridMismatch);
    }
    let mask = node_mask(&psi.amplitude());
    let values = rho
        .values()
        .iter()
        .zip(psi.values())
        .zip(mask)
        .map(|((r, p), m)| if m { f64::NAN } else { r / p.norm_sqr() })
        .collect();
    RealField::new(psi.spec().clone(), values)
}

/// Cell-averaged `f̄` with the `dΓ = ∫_cell |Ψ|²` weight of each cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoarseGrain {
    pub cells: [usize; 2],
    pub weights: Vec<f64>,
    pub fbar: Vec<f64>,
}

impl CoarseGrain {
    /// Blocks of grid nodes; `cells[axis]` must divide the node count.
    /// `f̄ = Σ f R² / Σ R²` over unmasked nodes of the block.
    pub fn from_field(f: &RealField, psi: &ComplexField, cells: [usize; 2]) -> Result<Self> {
        let spec = psi.spec();
        if f.spec() != spec {
            return Err(Error::GridMismatch);
        }
        let cells = if spec.dim() == 1 { [cells[0], 1] } else { cells };
        let (n0, n1) = spec.shape();
        if cells[0] == 0 || cells[1] == 0 || n0 % cells[0] != 0 || n1 % cells[1] != 0 {
            return Err(Error::param("cell counts must divide the grid point counts"));
        }
        let (b0, b1) = (n0 / cells[0], n1 / cells[1]);
        let dv = spec.cell_volume();
        let nc = cells[0] * cells[1];
        let mut weights = vec![0.0; nc];
        let mut mass = vec![0.0; nc];
        let mut wf = vec![0.0; nc];
        for i in 0..n0 {
            for j in 0..n1 {
                let flat = i * n1 + j;
                let c = (i / b0) * cells[1] + j / b1;
                let r2 = psi.values()[flat].norm_sqr();
                weights[c] += r2 * dv;
                let fv = f.values()[flat];
                if fv.is_finite() {
                    mass[c] += fv * r2;
                    wf[c] += r2;
                }
            }
        }
        let fbar = mass.iter().zip(&wf).map(|(m, w)| if *w > 0.0 { m / w } else { 0.0 }).collect();
        Ok(Self { cells, weights, fbar })
    }

    /// `f̄ = count / (n · dΓ)`; cells with `dΓ = 0` get `f̄ = 0`.
    pub fn from_counts(counts: &[usize], n: usize, weights: Vec<f64>, cells: [usize; 2]) -> Result<Self> {
        if counts.len() != weights.len() || counts.len() != cells[0] * cells[1] {
            return Err(Error::LengthMismatch { expected: weights.len(), got: counts.len() });
        }
        let fbar = counts
            .iter()
            .zip(&weights)
            .map(|(&c, &w)| if w > 0.0 { c as f64 / (n as f64 * w) } else { 0.0 })
            .collect();
        Ok(Self { cells, weights, fbar })
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `H̄ = Σ dΓ f̄ ln f̄`, with `0 ln 0 = 0`.
    pub fn h(&self) -> f64 {
        self.terms().sum()
    }

    /// Per-cell contributions to `H̄`.
    pub fn terms(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .iter()
            .zip(&self.fbar)
            .map(|(&w, &f)| if w > 0.0 && f > 0.0 { w * f * f.ln() } else { 0.0 })
    }
}

/// `H̄` of a grid field `f` coarse-grained into `cells` blocks.
pub fn h_function(f: &RealField, psi: &ComplexField, cells: [usize; 2]) -> Result<f64> {
    Ok(CoarseGrain::from_field(f, psi, cells)?.h())
}

/// One-sample Kolmogorov distance of `samples` from `cdf`. Sorts in place.
pub fn ks_distance(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = cdf(x);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical distance at level `alpha`, Bonferroni-corrected
/// for `tests` simultaneous comparisons.
pub fn ks_critical(n: usize, alpha: f64, tests: usize) -> f64 {
    (-(alpha / (2.0 * tests as f64)).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// A finite plane-wave superposition on a periodic box,
/// `Ψ(q) = Σ a_n e^{ik_n·(q−o)} / √A` with `Σ|a_n|² = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeExpansion {
    dim: usize,
    origin: [f64; 2],
    length: [f64; 2],
    mass: f64,
    modes: Vec<[i64; 2]>,
    coeffs: Vec<Complex64>,
}

/// Above this many modes a field is not treated as a sparse superposition.
const MAX_MODES: usize = 4096;

fn segment_integral(delta: i64, len: f64, a: f64, b: f64) -> Complex64 {
    if delta == 0 {
        return Complex64::new(b - a, 0.0);
    }
    let kappa = 2.0 * PI * delta as f64 / len;
    (Complex64::from_polar(1.0, kappa * b) - Complex64::from_polar(1.0, kappa * a)) / Complex64::new(0.0, kappa)
}

impl ModeExpansion {
    /// Equal-amplitude superposition of the modes `axis_modes × axis_modes`
    /// (or `axis_modes` in 1D) with seeded uniform random phases.
    pub fn template(dim: usize, length: f64, axis_modes: &[i64], mass: f64, seed: u64) -> Result<Self> {
        if !(1..=2).contains(&dim) || axis_modes.is_empty() || !(length > 0.0) || !(mass > 0.0) {
            return Err(Error::param("template needs dim 1 or 2, modes, length > 0 and mass > 0"));
        }
        let mut modes = Vec::new();
        for &a in axis_modes {
            if dim == 1 {
                modes.push([a, 0]);
            } else {
                for &b in axis_modes {
                    modes.push([a, b]);
                }
            }
        }
        modes.sort();
        modes.dedup();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amp = 1.0 / (modes.len() as f64).sqrt();
        let coeffs = modes.iter().map(|_| Complex64::from_polar(amp, 2.0 * PI * rng.gen::<f64>())).collect();
        let length = if dim == 1 { [length, 1.0] } else { [length, length] };
        Ok(Self { dim, origin: [0.0; 2], length, mass, modes, coeffs })
    }

    /// Recovers the expansion of a band-limited field on a periodic grid.
    pub fn from_field(psi: &ComplexField) -> Result<Self> {
        let spec = psi.spec();
        let mut plan = SpectralPlan::new(spec)?;
        let mut data = psi.values().to_vec();
        plan.forward(&mut data);
        let dim = spec.dim();
        let length = [spec.length(0), if dim == 2 { spec.length(1) } else { 1.0 }];
        let origin = [spec.extent(0).0, if dim == 2 { spec.extent(1).0 } else { 0.0 }];
        let scale = (length[0] * length[1]).sqrt() / spec.len() as f64;
        let n1 = spec.shape().1;
        let kept: Vec<(usize, Complex64)> = data
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c * scale))
            .filter(|(_, c)| c.norm() > 1e-9)
            .collect();
        if kept.len() > MAX_MODES {
            return Err(Error::param(format!("field has {} significant modes, not a sparse superposition", kept.len())));
        }
        let mut modes = Vec::new();
        let mut coeffs = Vec::new();
        for (i, c) in kept {
            let (a, b) = (i / n1, i % n1);
            let n0 = (plan.wavenumbers(0)[a] * length[0] / (2.0 * PI)).round() as i64;
            let n1v = if dim == 2 { (plan.wavenumbers(1)[b] * length[1] / (2.0 * PI)).round() as i64 } else { 0 };
            modes.push([n0, n1v]);
            coeffs.push(c);
        }
        Ok(Self { dim, origin, length, mass: psi.mass(), modes, coeffs })
    }

    pub fn modes(&self) -> &[[i64; 2]] {
        &self.modes
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    fn k(&self, n: &[i64; 2]) -> [f64; 2] {
        [2.0 * PI * n[0] as f64 / self.length[0], 2.0 * PI * n[1] as f64 / self.length[1]]
    }

    pub fn energy(&self, n: &[i64; 2]) -> f64 {
        let k = self.k(n);
        (k[0] * k[0] + k[1] * k[1]) / (2.0 * self.mass)
    }

    /// The free evolution to time `t`.
    pub fn at_time(&self, t: f64) -> Self {
        let mut out = self.clone();
        for (c, n) in out.coeffs.iter_mut().zip(&self.modes) {
            *c *= Complex64::from_polar(1.0, -self.energy(n) * t);
        }
        out
    }

    fn area(&self) -> f64 {
        self.length[0] * self.length[1]
    }

    pub fn psi(&self, q: &Point) -> Complex64 {
        let s: Complex64 = self
            .modes
            .iter()
            .zip(&self.coeffs)
            .map(|(n, c)| {
                let k = self.k(n);
                c * Complex64::from_polar(1.0, k[0] * (q[0] - self.origin[0]) + k[1] * (q[1] - self.origin[1]))
            })
            .sum();
        s / self.area().sqrt()
    }

    pub fn density(&self, q: &Point) -> f64 {
        self.psi(q).norm_sqr()
    }

    /// Samples onto a periodic grid covering the same box.
    pub fn to_field(&self, spec: &GridSpec) -> Result<ComplexField> {
        ComplexField::from_fn(spec, self.mass, |q| self.psi(q))
    }

    /// `C_Δ = Σ_{n−n'=Δ} a_n ā_{n'}`, so `|Ψ|² = Σ_Δ C_Δ e^{ik_Δ·(q−o)}/A`.
    fn autocorrelation(&self) -> Vec<([i64; 2], Complex64)> {
        let mut acc: BTreeMap<[i64; 2], Complex64> = BTreeMap::new();
        for (n, a) in self.modes.iter().zip(&self.coeffs) {
            for (m, b) in self.modes.iter().zip(&self.coeffs) {
                *acc.entry([n[0] - m[0], n[1] - m[1]]).or_default() += a * b.conj();
            }
        }
        acc.into_iter().collect()
    }

    /// Exact `∫|Ψ|²` over each cell of a `cells[0] × cells[1]` partition,
    /// flat index `c0 * cells[1] + c1`.
    pub fn cell_weights(&self, cells: [usize; 2]) -> Vec<f64> {
        let cells = if self.dim == 1 { [cells[0], 1] } else { cells };
        let auto = self.autocorrelation();
        let w = [self.length[0] / cells[0] as f64, self.length[1] / cells[1] as f64];
        let mut out = Vec::with_capacity(cells[0] * cells[1]);
        for c0 in 0..cells[0] {
            let (a0, b0) = (c0 as f64 * w[0], (c0 + 1) as f64 * w[0]);
            for c1 in 0..cells[1] {
                let (a1, b1) = (c1 as f64 * w[1], (c1 + 1) as f64 * w[1]);
                let s: Complex64 = auto
                    .iter()
                    .map(|(d, c)| {
                        c * segment_integral(d[0], self.length[0], a0, b0)
                            * segment_integral(d[1], self.length[1], a1, b1)
                    })
                    .sum();
                out.push(s.re / self.area());
            }
        }
        out
    }

    /// Cell index of `q` in the partition used by [`Self::cell_weights`].
    pub fn cell_of(&self, q: &Point, cells: [usize; 2]) -> usize {
        let idx = |ax: usize, n: usize| {
            let u = (q[ax] - self.origin[ax]).rem_euclid(self.length[ax]) / self.length[ax];
            ((u * n as f64) as usize).min(n - 1)
        };
        if self.dim == 1 {
            idx(0, cells[0])
        } else {
            idx(0, cells[0]) * cells[1] + idx(1, cells[1])
        }
    }

    /// Exact marginal cumulative distribution of `|Ψ|²` along `axis`.
    pub fn marginal_cdf(&self, axis: usize) -> impl Fn(f64) -> f64 + '_ {
        let other = 1 - axis;
        let terms: Vec<(i64, Complex64)> =
            self.autocorrelation().into_iter().filter(|(d, _)| d[other] == 0).map(|(d, c)| (d[axis], c)).collect();
        move |x| {
            let u = (x - self.origin[axis]).rem_euclid(self.length[axis]);
            let s: Complex64 =
                terms.iter().map(|(d, c)| c * segment_integral(*d, self.length[axis], 0.0, u)).sum();
            s.re * self.length[other] / self.area()
        }
    }

    /// Largest marginal KS distance of `points` from `|Ψ|²` over the axes.
    pub fn ks(&self, points: &[Point]) -> f64 {
        (0..self.dim)
            .map(|ax| {
                let mut xs: Vec<f64> = points
                    .iter()
                    .map(|q| self.origin[ax] + (q[ax] - self.origin[ax]).rem_euclid(self.length[ax]))
                    .collect();
                ks_distance(&mut xs, self.marginal_cdf(ax))
            })
            .fold(0.0, f64::max)
    }
}

impl ModeExpansion {
    /// `(Ψ, ∂_xΨ, ∂_yΨ, ∇²Ψ)` at `q` and time `t` of the free evolution.
    pub fn jet(&self, q: &Point, t: f64) -> [Complex64; 4] {
        let mut out = [Complex64::default(); 4];
        for (n, c) in self.modes.iter().zip(&self.coeffs) {
            let k = self.k(n);
            let phase = k[0] * (q[0] - self.origin[0]) + k[1] * (q[1] - self.origin[1]) - self.energy(n) * t;
            let term = c * Complex64::from_polar(1.0, phase);
            out[0] += term;
            out[1] += term * Complex64::new(0.0, k[0]);
            out[2] += term * Complex64::new(0.0, k[1]);
            out[3] -= term * (k[0] * k[0] + k[1] * k[1]);
        }
        let s = 1.0 / self.area().sqrt();
        out.map(|v| v * s)
    }
}

impl GuidanceField for ModeExpansion {
    fn dim(&self) -> usize {
        self.dim
    }

    fn mass(&self) -> f64 {
        self.mass
    }

    fn velocity(&self, q: &Point, t: f64) -> Probe {
        let j = self.jet(q, t);
        if j[0].norm() < 1e-12 {
            return Probe::Node;
        }
        let mut v = [0.0; 3];
        for ax in 0..self.dim {
            v[ax] = (j[1 + ax] / j[0]).im / self.mass;
        }
        Probe::Velocity(v)
    }

    fn wrap(&self, q: &mut Point) {
        for ax in 0..self.dim {
            q[ax] = self.origin[ax] + (q[ax] - self.origin[ax]).rem_euclid(self.length[ax]);
        }
    }

    fn describe(&self) -> String {
        format!("{}-mode periodic superposition", self.modes.len())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialDensity {
    /// `ρ0 = |Ψ0|²`.
    Equilibrium,
    /// `ρ0 = |ground mode|²`, uniform on the periodic box.
    GroundMode,
}

/// A relaxation experiment on a periodic square box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaxationConfig {
    pub length: f64,
    pub points: usize,
    /// Mode numbers per axis; the superposition uses their square product.
    pub axis_modes: Vec<i64>,
    pub mass: f64,
    pub phase_seed: u64,
    pub sample_seed: u64,
    pub initial: InitialDensity,
    pub n_traj: usize,
    /// Coarse cells per axis.
    pub cells: usize,
    pub t_end: f64,
    pub dt: f64,
    /// Trajectory steps per wave-function snapshot (1 to 5).
    pub snapshot_every: usize,
    /// Number of output times after t = 0.
    pub outputs: usize,
    pub ks_alpha: f64,
}

impl Default for RelaxationConfig {
    fn default() -> Self {
        Self {
            length: 2.0 * PI,
            points: 128,
            axis_modes: vec![-1, 0, 1, 2],
            mass: 1.0,
            phase_seed: 7,
            sample_seed: 11,
            initial: InitialDensity::GroundMode,
            n_traj: 100_000,
            cells: 32,
            t_end: 12.0,
            dt: 0.02,
            snapshot_every: 1,
            outputs: 4,
            ks_alpha: 0.01,
        }
    }
}

impl RelaxationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.axis_modes.len() < 2 {
            return Err(Error::param("need at least 2 modes per axis (4 in the box)"));
        }
        if !(1..=5).contains(&self.snapshot_every) {
            return Err(Error::param("snapshot_every must be between 1 and 5"));
        }
        if self.n_traj == 0 || self.cells == 0 || self.outputs == 0 {
            return Err(Error::param("n_traj, cells and outputs must be positive"));
        }
        if !(self.dt > 0.0 && self.t_end > 0.0 && self.length > 0.0 && self.mass > 0.0) {
            return Err(Error::param("dt, t_end, length and mass must be positive"));
        }
        if !(self.ks_alpha > 0.0 && self.ks_alpha < 1.0) {
            return Err(Error::param("ks_alpha must lie in (0, 1)"));
        }
        self.schedule().map(|_| ())
    }

    /// `(total steps, steps per output)`, both multiples of `snapshot_every`.
    fn schedule(&self) -> Result<(usize, usize)> {
        let unit = self.snapshot_every * self.outputs;
        let steps = (self.t_end / self.dt).round() as usize;
        if steps == 0 || steps % unit != 0 || ((steps as f64) * self.dt - self.t_end).abs() > 1e-9 * self.t_end {
            return Err(Error::param(format!(
                "t_end/dt must be an integer multiple of snapshot_every·outputs = {unit}"
            )));
        }
        Ok((steps, steps / self.outputs))
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::square(0.0, self.length, self.points, Boundary::Periodic)
    }

    pub fn initial_state(&self) -> Result<ModeExpansion> {
        ModeExpansion::template(2, self.length, &self.axis_modes, self.mass, self.phase_seed)
    }
}

/// Streams trajectories through a split-step evolution, one snapshot pair
/// at a time, calling `on_output` at t = 0 and every `per_output` steps.
fn stream<F>(
    cfg: &RelaxationConfig,
    psi0: &ComplexField,
    starts: &[Point],
    mut on_output: F,
) -> Result<()>
where
    F: FnMut(f64, &ComplexField, &[Point], &[TrajectoryStatus]) -> Result<()>,
{
    let (steps, per_output) = cfg.schedule()?;
    let spec = psi0.spec().clone();
    let stride = cfg.snapshot_every as f64 * cfg.dt;
    let mut prop = Propagator::new(&spec, psi0.mass(), stride, None, Mode::Quantum, 1.0)?;
    let mut psi = psi0.clone();
    let mut pos = starts.to_vec();
    let mut status = vec![TrajectoryStatus::Active; starts.len()];
    let first = Snapshot::new(&psi, 0.0)?;
    for (q, st) in pos.iter_mut().zip(status.iter_mut()) {
        spec.wrap(q);
        if first.probe(q) != Probe::Velocity(first_velocity(&first, q)) {
            *st = TrajectoryStatus::NodeCaptured { t: 0.0 };
        }
    }
    on_output(0.0, &psi, &pos, &status)?;
    let mut a = first;
    let mut step = 0;
    while step < steps {
        let t0 = step as f64 * cfg.dt;
        let mut vals = psi.values().to_vec();
        prop.step(&mut vals);
        psi = psi.with_values(vals)?;
        let b = Snapshot::new(&psi, t0 + stride)?;
        let pair = SnapshotPair { a: &a, b: &b };
        let moved = par_map(&(0..pos.len()).collect::<Vec<_>>(), |&i| {
            if !status[i].is_active() {
                return (pos[i], status[i]);
            }
            match advance_guided(&pair, &pos[i], t0, cfg.dt, cfg.snapshot_every) {
                Ok(q) => (q, TrajectoryStatus::Active),
                Err(st) => (pos[i], st),
            }
        });
        for (i, (q, st)) in moved.into_iter().enumerate() {
            pos[i] = q;
            status[i] = st;
        }
        a = b;
        step += cfg.snapshot_every;
        if step % per_output == 0 {
            on_output(step as f64 * cfg.dt, &psi, &pos, &status)?;
        }
    }
    Ok(())
}

fn first_velocity(s: &Snapshot, q: &Point) -> Point {
    match s.probe(q) {
        Probe::Velocity(v) => v,
        _ => [f64::NAN; 3],
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxationReport {
    pub times: Vec<f64>,
    pub h: Vec<f64>,
    pub ks: Vec<f64>,
    pub captured: Vec<usize>,
    /// Bonferroni-corrected KS critical distance over all outputs and axes.
    pub ks_threshold: f64,
    /// Sampling noise floor `cells / n_traj` for `H̄`.
    pub epsilon_stat: f64,
    pub warnings: Vec<String>,
}

impl RelaxationReport {
    /// CSV with columns `t, H, KS, captured_count`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,H,KS,captured_count\n");
        for i in 0..self.times.len() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                fmt_f64(self.times[i]),
                fmt_f64(self.h[i]),
                fmt_f64(self.ks[i]),
                self.captured[i]
            );
        }
        out
    }
}

/// Samples `ρ0`, evolves Ψ, transports the ensemble and records `H̄` and
/// the KS distance to `|Ψ_t|²` at each output time.
pub fn run_relaxation(cfg: &RelaxationConfig) -> Result<RelaxationReport> {
    cfg.validate()?;
    let spec = cfg.grid()?;
    let psi0 = cfg.initial_state()?.to_field(&spec)?.normalized()?;
    let starts = match cfg.initial {
        InitialDensity::Equilibrium => sample_born(&psi0, cfg.n_traj, cfg.sample_seed)?,
        InitialDensity::GroundMode => sample_uniform(&spec, cfg.n_traj, cfg.sample_seed),
    };
    let cells = [cfg.cells, cfg.cells];
    let mut report = RelaxationReport {
        times: Vec::new(),
        h: Vec::new(),
        ks: Vec::new(),
        captured: Vec::new(),
        ks_threshold: ks_critical(cfg.n_traj, cfg.ks_alpha, 2 * (cfg.outputs + 1)),
        epsilon_stat: (cfg.cells * cfg.cells) as f64 / cfg.n_traj as f64,
        warnings: Vec::new(),
    };
    stream(cfg, &psi0, &starts, |t, psi, pos, status| {
        let modes = ModeExpansion::from_field(psi)?;
        let weights = modes.cell_weights(cells);
        let mut counts = vec![0usize; weights.len()];
        for q in pos {
            counts[modes.cell_of(q, cells)] += 1;
        }
        let cg = CoarseGrain::from_counts(&counts, pos.len(), weights, cells)?;
        report.times.push(t);
        report.h.push(cg.h());
        report.ks.push(modes.ks(pos));
        report.captured.push(status.iter().filter(|s| !s.is_active()).count());
        Ok(())
    })?;
    let worst = report.captured.iter().copied().max().unwrap_or(0);
    if worst as f64 > CAPTURE_WARNING * cfg.n_traj as f64 {
        report.warnings.push(format!("{worst} of {} trajectories stopped at nodes", cfg.n_traj));
    }
    Ok(report)
}

/// Checks that `f = ρ/|Ψ|²` is a constant of the motion along guided
/// trajectories of the free superposition `modes`, starting at `starts`.
///
/// The flow carries `ρ_t(q_t) = ρ_0(q_0)/J` with `d ln J/dt = ∇·v`, so
/// `f_t/f_0 = |Ψ_0(q_0)|² / (J |Ψ_t(q_t)|²)`. `(q, ln J)` is integrated with
/// step-doubling RK4 at local tolerance `tol`, which keeps passages close to
/// vortex cores resolved. Returns the largest `|f_t/f_0 − 1|` along each
/// trajectory over `[0, t_end]`.
pub fn flow_constant_check(modes: &ModeExpansion, starts: &[Point], t_end: f64, tol: f64) -> Result<Vec<f64>> {
    if modes.dim != 2 {
        return Err(Error::param("flow check is two-dimensional"));
    }
    if !(t_end > 0.0 && tol > 0.0) {
        return Err(Error::param("need t_end > 0 and tol > 0"));
    }
    let m = modes.mass;
    let rhs = |s: &[f64; 3], t: f64| -> Option<[f64; 3]> {
        let j = modes.jet(&[s[0], s[1], 0.0], t);
        if j[0].norm() < 1e-12 {
            return None;
        }
        let gx = j[1] / j[0];
        let gy = j[2] / j[0];
        // ∇·v = Im(∇²Ψ/Ψ − (∇Ψ/Ψ)²)/m
        let div = (j[3] / j[0] - gx * gx - gy * gy).im / m;
        Some([gx.im / m, gy.im / m, div])
    };
    let rk4 = |s: &[f64; 3], t: f64, h: f64| -> Option<[f64; 3]> {
        let at = |a: &[f64; 3], k: &[f64; 3], c: f64| [a[0] + c * k[0], a[1] + c * k[1], a[2] + c * k[2]];
        let k1 = rhs(s, t)?;
        let k2 = rhs(&at(s, &k1, 0.5 * h), t + 0.5 * h)?;
        let k3 = rhs(&at(s, &k2, 0.5 * h), t + 0.5 * h)?;
        let k4 = rhs(&at(s, &k3, h), t + h)?;
        Some([0, 1, 2].map(|i| s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])))
    };
    let results = par_map(starts, |q0| {
        let d0 = modes.density(q0);
        let mut s = [q0[0], q0[1], 0.0];
        let mut t = 0.0;
        let mut h = 1e-2_f64.min(t_end);
        let mut worst = 0.0_f64;
        while t < t_end {
            h = h.min(t_end - t);
            let (Some(full), Some(half)) = (rk4(&s, t, h), rk4(&s, t, 0.5 * h)) else {
                return f64::INFINITY;
            };
            let Some(two) = rk4(&half, t + 0.5 * h, 0.5 * h) else {
                return f64::INFINITY;
            };
            let err = (0..3).map(|i| (two[i] - full[i]).abs()).fold(0.0, f64::max) / 15.0;
            if err <= tol || h < 1e-12 {
                t += h;
                s = [0, 1, 2].map(|i| two[i] + (two[i] - full[i]) / 15.0);
                let d = modes.jet(&[s[0], s[1], 0.0], t)[0].norm_sqr();
                worst = worst.max((d0 / (s[2].exp() * d) - 1.0).abs());
            }
            let grow = if err > 0.0 { 0.9 * (tol / err).powf(0.2) } else { 2.0 };
            h *= grow.clamp(0.2, 2.0);
        }
        worst
    });
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(spec: &GridSpec, sigma: f64) -> ComplexField {
        ComplexField::from_fn(spec, 1.0, |q| {
            Complex64::new((-(q[0] * q[0] + q[1] * q[1]) / (4.0 * sigma * sigma)).exp(), 0.0)
        })
        .unwrap()
        .normalized()
        .unwrap()
    }

    #[test]
    fn born_samples_of_gaussian_have_right_moments() {
        let spec = GridSpec::line(-8.0, 8.0, 256, Boundary::Periodic).unwrap();
        let sigma = 1.0;
        let psi = gaussian(&spec, sigma);
        let n = 100_000;
        let s = sample_born(&psi, n, 3).unwrap();
        let mean = s.iter().map(|q| q[0]).sum::<f64>() / n as f64;
        let var = s.iter().map(|q| (q[0] - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 * sigma / (n as f64).sqrt(), "{mean}");
        assert!((var / (sigma * sigma) - 1.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn born_samples_of_flat_state_are_uniform() {
        let spec = GridSpec::line(0.0, 1.0, 32, Boundary::Periodic).unwrap();
        let psi = ComplexField::from_fn(&spec, 1.0, |_| Complex64::new(1.0, 0.0)).unwrap().normalized().unwrap();
        let n = 20_000;
        let s = sample_born(&psi, n, 5).unwrap();
        let mut xs: Vec<f64> = s.iter().map(|q| q[0]).collect();
        let d = ks_distance(&mut xs, |x| x);
        assert!(d < 1.63 / (n as f64).sqrt(), "{d}");
        assert!((ks_critical(n, 0.01, 1) * (n as f64).sqrt() - 1.6276).abs() < 1e-3);
    }

    #[test]
    fn sampling_is_deterministic_and_rejects_loose_proposals() {
        let spec = GridSpec::line(-8.0, 8.0, 128, Boundary::Periodic).unwrap();
        let psi = gaussian(&spec, 1.0);
        let a = sample_born(&psi, 1, 42).unwrap();
        let b = sample_born(&psi, 1, 42).unwrap();
        assert_eq!(a[0][0].to_bits(), b[0][0].to_bits());
        let wide = GridSpec::line(-4000.0, 4000.0, 1 << 16, Boundary::Periodic).unwrap();
        let narrow = gaussian(&wide, 0.2);
        assert!(matches!(sample_born(&narrow, 10, 1), Err(Error::ProposalTooLoose(_))));
    }

    #[test]
    fn f_ratio_and_half_split_entropy() {
        let spec = GridSpec::square(-4.0, 4.0, 32, Boundary::Periodic).unwrap();
        // Centred between nodes so the two half-grids mirror each other.
        let c = -0.5 * spec.spacing(0);
        let psi = ComplexField::from_fn(&spec, 1.0, |q| {
            Complex64::new((-((q[0] - c).powi(2) + q[1] * q[1]) / 2.56).exp(), 0.0)
        })
        .unwrap()
        .normalized()
        .unwrap();
        let eq = f_ratio(&psi.density(), &psi).unwrap();
        assert!(eq.values().iter().filter(|v| v.is_finite()).all(|v| (v - 1.0).abs() < 1e-12));
        assert_eq!(h_function(&eq, &psi, [8, 8]).unwrap(), 0.0);

        let n1 = spec.shape().1;
        let left: Vec<f64> =
            psi.density().values().iter().enumerate().map(|(i, d)| if i / n1 < 16 { *d } else { 0.0 }).collect();
        let p_left = left.iter().sum::<f64>() * spec.cell_volume();
        let half = RealField::new(spec.clone(), left.iter().map(|d| d / p_left).collect()).unwrap();
        let f = f_ratio(&half, &psi).unwrap();
        for (i, v) in f.values().iter().enumerate() {
            if v.is_finite() {
                let want = if i / n1 < 16 { 2.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-12);
            }
        }
        let h = h_function(&f, &psi, [8, 8]).unwrap();
        assert!((h - 2f64.ln()).abs() < 1e-12, "{h}");
    }

    #[test]
    fn coarse_weights_sum_to_one() {
        let m = ModeExpansion::template(2, 2.0 * PI, &[-1, 0, 1, 2], 1.0, 9).unwrap();
        let w = m.cell_weights([16, 16]);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let spec = GridSpec::square(0.0, 2.0 * PI, 64, Boundary::Periodic).unwrap();
        let back = ModeExpansion::from_field(&m.to_field(&spec).unwrap()).unwrap();
        assert_eq!(back.modes().len(), 16);
        let q = [1.3, 4.4, 0.0];
        assert!((back.density(&q) - m.density(&q)).abs() < 1e-12);
    }

    #[test]
    fn marginal_cdf_matches_quadrature() {
        let m = ModeExpansion::template(2, 2.0 * PI, &[-1, 0, 1, 2], 1.0, 4).unwrap().at_time(0.7);
        let cdf = m.marginal_cdf(0);
        let x = 2.1;
        // Midpoint rule over [0, x] × [0, L].
        let (nx, ny) = (400, 200);
        let mut s = 0.0;
        for i in 0..nx {
            for j in 0..ny {
                let q = [(i as f64 + 0.5) * x / nx as f64, (j as f64 + 0.5) * 2.0 * PI / ny as f64, 0.0];
                s += m.density(&q);
            }
        }
        s *= x / nx as f64 * 2.0 * PI / ny as f64;
        assert!((cdf(x) - s).abs() < 1e-4, "{} {s}", cdf(x));
        assert!((cdf(2.0 * PI - 1e-12) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn config_schedule_checks() {
        let mut cfg = RelaxationConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.dt = 0.07;
        assert!(cfg.validate().is_err());
    }
}
