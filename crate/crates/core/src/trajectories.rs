//! Particle dynamics: first-order guidance `m dq/dt = ∇S` and the
//! second-order law `m d²q/dt² = −∇(V + V_Ψ)`.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{derivative, ComplexField, GridSpec, Point};
use crate::io::fmt_f64;
use crate::madelung::NODE_THRESHOLD_REL;
use crate::par_map;

/// Result of asking a field for the velocity at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Probe {
    Velocity(Point),
    /// The point lies on (or numerically at) a node of Ψ.
    Node,
    /// The point lies outside the field's domain.
    Outside,
}

/// A velocity field `v(q, t)`.
pub trait GuidanceField: Sync {
    fn dim(&self) -> usize;
    fn mass(&self) -> f64;
    fn velocity(&self, q: &Point, t: f64) -> Probe;
    /// Maps a position back into the fundamental domain.
    fn wrap(&self, _q: &mut Point) {}
    /// Shortest displacement from `a` to `b`.
    fn displacement(&self, a: &Point, b: &Point) -> Point {
        [b[0] - a[0], b[1] - a[1], b[2] - a[2]]
    }
    /// Largest gap between tabulated times, for tabulated fields.
    fn max_time_stride(&self) -> Option<f64> {
        None
    }
    fn describe(&self) -> String;
}

/// A force field `F(q) = −∇(V + V_Ψ)` for the second-order law.
pub trait ForceField: Sync {
    fn dim(&self) -> usize;
    fn mass(&self) -> f64;
    /// `None` where the force is undefined (for example at a Coulomb centre).
    fn force(&self, q: &Point) -> Option<Point>;
    fn describe(&self) -> String;
}

fn add(a: &Point, b: &Point, s: f64) -> Point {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

fn norm(a: &Point) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// Closed-form fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AnalyticField {
    /// `Ψ = e^{ik·q}`, `V = 0`: uniform velocity `k/m`, no force.
    PlaneWave { k: Vec<f64>, mass: f64 },
    /// Hydrogen 1s state `R = e^{−r}` in `V = −1/r` (m = e = 1): at rest,
    /// and `V + V_Ψ = −1/2` so the force vanishes.
    HydrogenGroundState,
    /// Irrotational 2D vortex `Ψ ∝ (x + iy)^N`: `v = N/(mξ)` azimuthal.
    PointVortex { winding: i32, mass: f64 },
    /// Rigid rotation `v = ω ẑ × q` in 2D.
    RigidRotation { omega: f64, mass: f64 },
}

/// Radial amplitude jet `(R, R', R'', R''')` of the hydrogen ground state.
fn hydrogen_r(r: f64) -> [f64; 4] {
    let e = (-r).exp();
    [e, -e, e, -e]
}

/// `(V, V_Ψ, dV/dr, dV_Ψ/dr)` at radius `r` for a radial amplitude jet in 3D.
///
/// With `L = R'' + 2R'/r` (the radial Laplacian), `V_Ψ = −L/(2mR)` and
/// `dV_Ψ/dr = −(L'R − LR')/(2mR²)`, `L' = R''' + 2R''/r − 2R'/r²`.
pub fn radial_quantum_potential(jet: [f64; 4], r: f64, mass: f64) -> (f64, f64) {
    let [r0, r1, r2, r3] = jet;
    let l = r2 + 2.0 * r1 / r;
    let dl = r3 + 2.0 * r2 / r - 2.0 * r1 / (r * r);
    let vq = -l / (2.0 * mass * r0);
    let dvq = -(dl * r0 - l * r1) / (2.0 * mass * r0 * r0);
    (vq, dvq)
}

/// Hydrogen `(V, V_Ψ, d(V + V_Ψ)/dr)` at radius `r`.
pub fn hydrogen_potentials(r: f64) -> (f64, f64, f64) {
    let (vq, dvq) = radial_quantum_potential(hydrogen_r(r), r, 1.0);
    (-1.0 / r, vq, 1.0 / (r * r) + dvq)
}

impl AnalyticField {
    pub fn validate(&self) -> Result<()> {
        let mass = match self {
            AnalyticField::PlaneWave { k, mass } => {
                if !(1..=3).contains(&k.len()) {
                    return Err(Error::param("plane wave needs 1 to 3 wavevector components"));
                }
                *mass
            }
            AnalyticField::HydrogenGroundState => 1.0,
            AnalyticField::PointVortex { mass, .. } | AnalyticField::RigidRotation { mass, .. } => *mass,
        };
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::param("mass must be positive"));
        }
        Ok(())
    }
}

impl GuidanceField for AnalyticField {
    fn dim(&self) -> usize {
        match self {
            AnalyticField::PlaneWave { k, .. } => k.len(),
            AnalyticField::HydrogenGroundState => 3,
            _ => 2,
        }
    }

    fn mass(&self) -> f64 {
        match self {
            AnalyticField::PlaneWave { mass, .. }
            | AnalyticField::PointVortex { mass, .. }
            | AnalyticField::RigidRotation { mass, .. } => *mass,
            AnalyticField::HydrogenGroundState => 1.0,
        }
    }

    fn velocity(&self, q: &Point, _t: f64) -> Probe {
        match self {
            AnalyticField::PlaneWave { k, mass } => {
                let mut v = [0.0; 3];
                for (vi, ki) in v.iter_mut().zip(k) {
                    *vi = ki / mass;
                }
                Probe::Velocity(v)
            }
            AnalyticField::HydrogenGroundState => Probe::Velocity([0.0; 3]),
            AnalyticField::PointVortex { winding, mass } => {
                let r2 = q[0] * q[0] + q[1] * q[1];
                if r2 == 0.0 {
                    return Probe::Node;
                }
                let s = *winding as f64 / (mass * r2);
                Probe::Velocity([-s * q[1], s * q[0], 0.0])
            }
            AnalyticField::RigidRotation { omega, .. } => {
                Probe::Velocity([-omega * q[1], omega * q[0], 0.0])
            }
        }
    }

    fn describe(&self) -> String {
        serde_json::to_string(self).unwrap_or_default()
    }
}

impl ForceField for AnalyticField {
    fn dim(&self) -> usize {
        GuidanceField::dim(self)
    }

    fn mass(&self) -> f64 {
        GuidanceField::mass(self)
    }

    fn force(&self, q: &Point) -> Option<Point> {
        match self {
            AnalyticField::PlaneWave { .. } => Some([0.0; 3]),
            AnalyticField::HydrogenGroundState => {
                let r = norm(q);
                if r == 0.0 {
                    return None;
                }
                let (_, _, dw) = hydrogen_potentials(r);
                Some([-dw * q[0] / r, -dw * q[1] / r, -dw * q[2] / r])
            }
            AnalyticField::PointVortex { winding, mass } => {
                // R = ξ^N gives V_Ψ = −N²/(2mξ²), so F = −N²/(mξ³) ξ̂.
                let r2 = q[0] * q[0] + q[1] * q[1];
                if r2 == 0.0 {
                    return None;
                }
                let n = *winding as f64;
                let f = -n * n / (mass * r2 * r2);
                Some([f * q[0], f * q[1], 0.0])
            }
            AnalyticField::RigidRotation { omega, mass } => {
                Some([-mass * omega * omega * q[0], -mass * omega * omega * q[1], 0.0])
            }
        }
    }

    fn describe(&self) -> String {
        GuidanceField::describe(self)
    }
}

/// One tabulated wave function with its gradient, ready for interpolation.
pub struct Snapshot {
    spec: GridSpec,
    t: f64,
    mass: f64,
    threshold: f64,
    jet: Vec<[Complex64; 3]>,
}

impl Snapshot {
    pub fn new(psi: &ComplexField, t: f64) -> Result<Self> {
        let spec = psi.spec().clone();
        let mut jet: Vec<[Complex64; 3]> =
            psi.values().iter().map(|&p| [p, Complex64::default(), Complex64::default()]).collect();
        for axis in 0..spec.dim() {
            let d = derivative(&spec, psi.values(), axis, 1)?;
            for (rec, v) in jet.iter_mut().zip(d) {
                rec[1 + axis] = v;
            }
        }
        Ok(Self { threshold: NODE_THRESHOLD_REL * psi.max_abs(), spec, t, mass: psi.mass(), jet })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    /// Interpolated `(Ψ, ∇Ψ)` at `q`.
    pub fn jet_at(&self, q: &Point) -> Option<[Complex64; 3]> {
        let st = self.spec.stencil(q).ok()?;
        Some(st.apply_interleaved(&self.jet, self.spec.shape().1))
    }

    pub fn probe(&self, q: &Point) -> Probe {
        match self.jet_at(q) {
            None => Probe::Outside,
            Some(rec) => self.velocity_from(rec).map_or(Probe::Node, Probe::Velocity),
        }
    }

    fn velocity_from(&self, rec: [Complex64; 3]) -> Option<Point> {
        if rec[0].norm() < self.threshold {
            return None;
        }
        let mut v = [0.0; 3];
        for axis in 0..self.spec.dim() {
            v[axis] = (rec[1 + axis] / rec[0]).im / self.mass;
        }
        Some(v)
    }

    fn min_image(&self, a: &Point, b: &Point) -> Point {
        let mut d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        if self.spec.is_periodic() {
            for (axis, di) in d.iter_mut().enumerate().take(self.spec.dim()) {
                let len = self.spec.length(axis);
                *di -= len * (*di / len).round();
            }
        }
        d
    }
}

fn blend(a: &Snapshot, b: &Snapshot, q: &Point, t: f64) -> Probe {
    let span = b.t - a.t;
    let w = if span > 0.0 { ((t - a.t) / span).clamp(0.0, 1.0) } else { 0.0 };
    // Both snapshots share one grid, so a single stencil serves both.
    let Ok(st) = a.spec.stencil(q) else {
        return Probe::Outside;
    };
    let n1 = a.spec.shape().1;
    let va = a.velocity_from(st.apply_interleaved(&a.jet, n1));
    let vb = b.velocity_from(st.apply_interleaved(&b.jet, n1));
    match (va, vb) {
        (Some(va), Some(vb)) => Probe::Velocity([0, 1, 2].map(|k| (1.0 - w) * va[k] + w * vb[k])),
        _ => Probe::Node,
    }
}

/// Snapshots at increasing times; velocity is linear in time between them.
pub struct SnapshotSequence {
    snaps: Vec<Snapshot>,
}

impl SnapshotSequence {
    pub fn new(times: &[f64], fields: &[ComplexField]) -> Result<Self> {
        if times.len() != fields.len() || times.is_empty() {
            return Err(Error::param("need one time per snapshot and at least one snapshot"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("snapshot times must increase strictly"));
        }
        if fields.iter().any(|f| f.spec() != fields[0].spec()) {
            return Err(Error::GridMismatch);
        }
        let snaps = par_map(&(0..times.len()).collect::<Vec<_>>(), |&i| Snapshot::new(&fields[i], times[i]))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { snaps })
    }

    pub fn start_time(&self) -> f64 {
        self.snaps[0].t
    }

    pub fn end_time(&self) -> f64 {
        self.snaps[self.snaps.len() - 1].t
    }

    fn interval(&self, t: f64) -> usize {
        let idx = self.snaps.partition_point(|s| s.t <= t);
        idx.saturating_sub(1).min(self.snaps.len().saturating_sub(2))
    }
}

impl GuidanceField for SnapshotSequence {
    fn dim(&self) -> usize {
        self.snaps[0].spec.dim()
    }

    fn mass(&self) -> f64 {
        self.snaps[0].mass
    }

    fn velocity(&self, q: &Point, t: f64) -> Probe {
        if self.snaps.len() == 1 {
            return self.snaps[0].probe(q);
        }
        let i = self.interval(t);
        blend(&self.snaps[i], &self.snaps[i + 1], q, t)
    }

    fn wrap(&self, q: &mut Point) {
        self.snaps[0].spec.wrap(q);
    }

    fn displacement(&self, a: &Point, b: &Point) -> Point {
        self.snaps[0].min_image(a, b)
    }

    fn max_time_stride(&self) -> Option<f64> {
        self.snaps.windows(2).map(|w| w[1].t - w[0].t).reduce(f64::max)
    }

    fn describe(&self) -> String {
        format!("{} tabulated snapshots", self.snaps.len())
    }
}

/// Two consecutive snapshots, for streaming transport alongside an evolution.
pub struct SnapshotPair<'a> {
    pub a: &'a Snapshot,
    pub b: &'a Snapshot,
}

impl GuidanceField for SnapshotPair<'_> {
    fn dim(&self) -> usize {
        self.a.spec.dim()
    }

    fn mass(&self) -> f64 {
        self.a.mass
    }

    fn velocity(&self, q: &Point, t: f64) -> Probe {
        blend(self.a, self.b, q, t)
    }

    fn wrap(&self, q: &mut Point) {
        self.a.spec.wrap(q);
    }

    fn displacement(&self, a: &Point, b: &Point) -> Point {
        self.a.min_image(a, b)
    }

    fn max_time_stride(&self) -> Option<f64> {
        Some(self.b.t - self.a.t)
    }

    fn describe(&self) -> String {
        format!("snapshot pair [{}, {}]", self.a.t, self.b.t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum TrajectoryStatus {
    Active,
    NodeCaptured { t: f64 },
    LeftDomain { t: f64 },
    ForceUndefined { t: f64 },
}

impl TrajectoryStatus {
    pub fn is_active(&self) -> bool {
        matches!(self, TrajectoryStatus::Active)
    }

    pub fn label(&self) -> &'static str {
        match self {
            TrajectoryStatus::Active => "active",
            TrajectoryStatus::NodeCaptured { .. } => "node-captured",
            TrajectoryStatus::LeftDomain { .. } => "left-domain",
            TrajectoryStatus::ForceUndefined { .. } => "force-undefined",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    GuidedRk4,
    NewtonVerlet,
}

#[derive(Clone, Debug)]
pub struct TrajectoryEnsemble {
    pub dim: usize,
    pub times: Vec<f64>,
    /// `positions[particle][time_index]`; stops early for stopped particles.
    pub positions: Vec<Vec<Point>>,
    pub status: Vec<TrajectoryStatus>,
    pub mass: f64,
    pub integrator: Integrator,
    pub source: String,
}

impl TrajectoryEnsemble {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn final_positions(&self) -> Vec<Point> {
        self.positions.iter().map(|p| *p.last().expect("at least the start is recorded")).collect()
    }

    /// CSV with columns `trajectory_id, t, q_1..q_dim, status`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trajectory_id,t");
        for k in 1..=self.dim {
            let _ = write!(out, ",q_{k}");
        }
        out.push_str(",status\n");
        for (id, path) in self.positions.iter().enumerate() {
            let last = path.len() - 1;
            for (ti, q) in path.iter().enumerate() {
                let _ = write!(out, "{id},{}", fmt_f64(self.times[ti]));
                for c in &q[..self.dim] {
                    let _ = write!(out, ",{}", fmt_f64(*c));
                }
                let label = if ti == last { self.status[id].label() } else { "active" };
                let _ = writeln!(out, ",{label}");
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub t_end: f64,
    pub dt: f64,
    pub record_every: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t_end: f64, dt: f64) -> Self {
        Self { t0, t_end, dt, record_every: 1 }
    }

    pub fn record_every(mut self, n: usize) -> Self {
        self.record_every = n;
        self
    }

    /// Number of steps; `dt` is shrunk so that it divides the span.
    pub fn steps(&self) -> Result<(usize, f64)> {
        let span = self.t_end - self.t0;
        if !(self.dt > 0.0 && span > 0.0 && span.is_finite()) || self.record_every == 0 {
            return Err(Error::param("need dt > 0, t_end > t0 and record_every ≥ 1"));
        }
        let n = (span / self.dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        Ok((n, span / n as f64))
    }

    fn recorded_times(&self, n: usize, dt: f64) -> Vec<f64> {
        (0..=n)
            .filter(|&s| s % self.record_every == 0 || s == n)
            .map(|s| self.t0 + s as f64 * dt)
            .collect()
    }
}

enum Step {
    Moved(Point),
    Stopped(TrajectoryStatus),
}

fn rk4<F: GuidanceField + ?Sized>(field: &F, q: &Point, t: f64, dt: f64) -> Step {
    let eval = |p: &Point, s: f64| match field.velocity(p, s) {
        Probe::Velocity(v) => Ok(v),
        Probe::Node => Err(TrajectoryStatus::NodeCaptured { t: s }),
        Probe::Outside => Err(TrajectoryStatus::LeftDomain { t: s }),
    };
    let run = || -> std::result::Result<Point, TrajectoryStatus> {
        let k1 = eval(q, t)?;
        let k2 = eval(&add(q, &k1, 0.5 * dt), t + 0.5 * dt)?;
        let k3 = eval(&add(q, &k2, 0.5 * dt), t + 0.5 * dt)?;
        let k4 = eval(&add(q, &k3, dt), t + dt)?;
        let mut out = *q;
        for k in 0..3 {
            out[k] += dt / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
        }
        Ok(out)
    };
    match run() {
        Ok(mut p) => {
            field.wrap(&mut p);
            Step::Moved(p)
        }
        Err(s) => Step::Stopped(s),
    }
}

/// Advances one particle by `steps` RK4 steps of size `dt` from time `t0`.
/// Returns the final position or the stopping status.
pub fn advance_guided<F: GuidanceField + ?Sized>(
    field: &F,
    q: &Point,
    t0: f64,
    dt: f64,
    steps: usize,
) -> std::result::Result<Point, TrajectoryStatus> {
    let mut p = *q;
    for s in 0..steps {
        match rk4(field, &p, t0 + s as f64 * dt, dt) {
            Step::Moved(n) => p = n,
            Step::Stopped(st) => return Err(st),
        }
    }
    Ok(p)
}

/// Integrates `dq/dt = v(q, t)` with classical RK4.
pub fn integrate_guided<F: GuidanceField + ?Sized>(
    field: &F,
    starts: &[Point],
    time: TimeGrid,
) -> Result<TrajectoryEnsemble> {
    let (n, dt) = time.steps()?;
    if let Some(stride) = field.max_time_stride() {
        if stride > 5.0 * dt * (1.0 + 1e-9) {
            return Err(Error::param(format!(
                "snapshot stride {stride} exceeds 5·dt = {}",
                5.0 * dt
            )));
        }
    }
    for (index, q) in starts.iter().enumerate() {
        match field.velocity(q, time.t0) {
            Probe::Velocity(_) => {}
            Probe::Node => return Err(Error::StartOnNode { index }),
            Probe::Outside => return Err(Error::OutsideDomain(q[..field.dim()].to_vec())),
        }
    }
    let times = time.recorded_times(n, dt);
    let results = par_map(starts, |q0| {
        let mut q = *q0;
        field.wrap(&mut q);
        let mut path = vec![q];
        let mut status = TrajectoryStatus::Active;
        for s in 0..n {
            match rk4(field, &q, time.t0 + s as f64 * dt, dt) {
                Step::Moved(p) => q = p,
                Step::Stopped(st) => {
                    status = st;
                    break;
                }
            }
            if (s + 1) % time.record_every == 0 || s + 1 == n {
                path.push(q);
            }
        }
        (path, status)
    });
    let (positions, status) = results.into_iter().unzip();
    Ok(TrajectoryEnsemble {
        dim: field.dim(),
        times,
        positions,
        status,
        mass: field.mass(),
        integrator: Integrator::GuidedRk4,
        source: field.describe(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderEnsemble {
    pub ensemble: TrajectoryEnsemble,
    /// `velocities[particle][time_index]`, aligned with positions.
    pub velocities: Vec<Vec<Point>>,
}

/// Velocity-Verlet integration of `m d²q/dt² = F(q)`, with no guidance
/// constraint. Particles farther than `radius` from the origin stop with
/// status `left-domain`.
pub fn integrate_second_order<F: ForceField + ?Sized>(
    field: &F,
    starts: &[Point],
    velocities: &[Point],
    time: TimeGrid,
    radius: f64,
) -> Result<SecondOrderEnsemble> {
    if starts.len() != velocities.len() {
        return Err(Error::LengthMismatch { expected: starts.len(), got: velocities.len() });
    }
    let (n, dt) = time.steps()?;
    let m = field.mass();
    let times = time.recorded_times(n, dt);
    let pairs: Vec<(Point, Point)> = starts.iter().copied().zip(velocities.iter().copied()).collect();
    let results = par_map(&pairs, |&(q0, v0)| {
        let mut q = q0;
        let mut v = v0;
        let mut path = vec![q];
        let mut vpath = vec![v];
        let mut status = TrajectoryStatus::Active;
        let Some(mut f) = field.force(&q) else {
            return (path, vpath, TrajectoryStatus::ForceUndefined { t: time.t0 });
        };
        for s in 0..n {
            let t = time.t0 + (s + 1) as f64 * dt;
            let vh = add(&v, &f, 0.5 * dt / m);
            q = add(&q, &vh, dt);
            match field.force(&q) {
                Some(fn_) => f = fn_,
                None => {
                    status = TrajectoryStatus::ForceUndefined { t };
                    break;
                }
            }
            v = add(&vh, &f, 0.5 * dt / m);
            if norm(&q) > radius {
                status = TrajectoryStatus::LeftDomain { t };
                path.push(q);
                vpath.push(v);
                break;
            }
            if (s + 1) % time.record_every == 0 || s + 1 == n {
                path.push(q);
                vpath.push(v);
            }
        }
        (path, vpath, status)
    });
    let mut positions = Vec::new();
    let mut vels = Vec::new();
    let mut status = Vec::new();
    for (p, v, s) in results {
        positions.push(p);
        vels.push(v);
        status.push(s);
    }
    Ok(SecondOrderEnsemble {
        ensemble: TrajectoryEnsemble {
            dim: field.dim(),
            times,
            positions,
            status,
            mass: m,
            integrator: Integrator::NewtonVerlet,
            source: field.describe(),
        },
        velocities: vels,
    })
}

impl Serialize for TrajectoryEnsemble {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("TrajectoryEnsemble", 6)?;
        st.serialize_field("dim", &self.dim)?;
        st.serialize_field("times", &self.times)?;
        st.serialize_field("positions", &self.positions)?;
        st.serialize_field("status", &self.status)?;
        st.serialize_field("mass", &self.mass)?;
        st.serialize_field("integrator", &self.integrator)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for TrajectoryEnsemble {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            dim: usize,
            times: Vec<f64>,
            positions: Vec<Vec<Point>>,
            status: Vec<TrajectoryStatus>,
            mass: f64,
            integrator: Integrator,
        }
        let r = Raw::deserialize(d)?;
        Ok(TrajectoryEnsemble {
            dim: r.dim,
            times: r.times,
            positions: r.positions,
            status: r.status,
            mass: r.mass,
            integrator: r.integrator,
            source: String::new(),
        })
    }
}

impl PartialEq for TrajectoryEnsemble {
    fn eq(&self, o: &Self) -> bool {
        self.dim == o.dim
            && self.times == o.times
            && self.positions == o.positions
            && self.status == o.status
            && self.mass == o.mass
            && self.integrator == o.integrator
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonCrossingReport {
    /// False for second-order ensembles, where crossings are allowed.
    pub applicable: bool,
    pub note: String,
    pub min_distance: f64,
    /// 1D only: whether the initial ordering holds at every recorded time.
    pub order_preserved: Option<bool>,
}

/// Minimum equal-time pairwise distance, and order preservation in 1D.
///
/// Only times at which every trajectory is still running are compared.
/// Distances are plain Euclidean (no periodic images).
pub fn non_crossing_check(ens: &TrajectoryEnsemble) -> NonCrossingReport {
    if ens.integrator != Integrator::GuidedRk4 {
        return NonCrossingReport {
            applicable: false,
            note: "not guided".into(),
            min_distance: f64::NAN,
            order_preserved: None,
        };
    }
    let common = ens.positions.iter().map(Vec::len).min().unwrap_or(0);
    let mut min_d = f64::INFINITY;
    let mut ordered = true;
    let order: Vec<usize> = if ens.dim == 1 {
        let mut idx: Vec<usize> = (0..ens.len()).collect();
        idx.sort_by(|&a, &b| ens.positions[a][0][0].total_cmp(&ens.positions[b][0][0]));
        idx
    } else {
        Vec::new()
    };
    for ti in 0..common {
        if ens.dim == 1 {
            for w in order.windows(2) {
                let d = ens.positions[w[1]][ti][0] - ens.positions[w[0]][ti][0];
                if d <= 0.0 {
                    ordered = false;
                }
                min_d = min_d.min(d.abs());
            }
        } else {
            for a in 0..ens.len() {
                for b in a + 1..ens.len() {
                    let pa = ens.positions[a][ti];
                    let pb = ens.positions[b][ti];
                    min_d = min_d.min(norm(&[pb[0] - pa[0], pb[1] - pa[1], pb[2] - pa[2]]));
                }
            }
        }
    }
    NonCrossingReport {
        applicable: true,
        note: "guided".into(),
        min_distance: min_d,
        order_preserved: (ens.dim == 1).then_some(ordered),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CirculationSeries {
    pub times: Vec<f64>,
    pub circulation: Vec<f64>,
}

/// `∮ m v·dl` around a polygon, trapezoid rule on each edge.
pub fn polygon_circulation<F: GuidanceField + ?Sized>(
    field: &F,
    vertices: &[Point],
    t: f64,
) -> std::result::Result<f64, usize> {
    let n = vertices.len();
    let mut vel = Vec::with_capacity(n);
    for (i, q) in vertices.iter().enumerate() {
        match field.velocity(q, t) {
            Probe::Velocity(v) => vel.push(v),
            _ => return Err(i),
        }
    }
    let mut c = 0.0;
    for a in 0..n {
        let b = (a + 1) % n;
        let d = field.displacement(&vertices[a], &vertices[b]);
        for k in 0..3 {
            c += 0.5 * (vel[a][k] + vel[b][k]) * d[k];
        }
    }
    Ok(field.mass() * c)
}

/// Advects a closed polygon and records its circulation at every recorded time.
pub fn kelvin_transport<F: GuidanceField + ?Sized>(
    field: &F,
    vertices: &[Point],
    time: TimeGrid,
) -> Result<CirculationSeries> {
    if vertices.len() < 3 {
        return Err(Error::InvalidLoop("a loop needs at least three vertices".into()));
    }
    let ens = integrate_guided(field, vertices, time)?;
    for (vertex, st) in ens.status.iter().enumerate() {
        if !st.is_active() {
            let time_index = ens.positions[vertex].len();
            return Err(Error::VertexCaptured { vertex, time_index });
        }
    }
    let mut out = CirculationSeries { times: ens.times.clone(), circulation: Vec::new() };
    for (ti, &t) in ens.times.iter().enumerate() {
        let poly: Vec<Point> = ens.positions.iter().map(|p| p[ti]).collect();
        let c = polygon_circulation(field, &poly, t)
            .map_err(|vertex| Error::VertexCaptured { vertex, time_index: ti })?;
        out.circulation.push(c);
    }
    Ok(out)
}

/// Regular polygon with `n` vertices on a circle, counter-clockwise.
pub fn circle_loop(center: [f64; 2], radius: f64, n: usize) -> Vec<Point> {
    (0..n)
        .map(|i| {
            let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            [center[0] + radius * a.cos(), center[1] + radius * a.sin(), 0.0]
        })
        .collect()
}

/// Maximum central-difference divergence of `j = (0, 0, F(x,y) U(x,y))` over
/// the sample points: the non-confined ensemble with `ρ = F(x, y)` and
/// `v = U(x, y) ẑ` is stationary because `F U` does not depend on `z`.
pub fn z_flow_divergence(
    f: impl Fn(f64, f64) -> f64,
    u: impl Fn(f64, f64) -> f64,
    points: &[Point],
    h: f64,
) -> f64 {
    let jz = |q: &Point| f(q[0], q[1]) * u(q[0], q[1]);
    points
        .iter()
        .map(|q| {
            let up = [q[0], q[1], q[2] + h];
            let dn = [q[0], q[1], q[2] - h];
            ((jz(&up) - jz(&dn)) / (2.0 * h)).abs()
        })
        .fold(0.0, f64::max)
}
