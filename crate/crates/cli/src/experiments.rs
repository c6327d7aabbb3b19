use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use qbohm::clebsch::{
    advection_residual, gauge_transform, lorentz_force_residual, maxwell_residuals, vorticity_residual,
    BuiltinGauge, ClebschPair, ExternalEm, FourierScalar, GeneralizedFlow, ScalarField,
};
use qbohm::io::{complex_to_csv, fmt_f64};
use qbohm::rankine::{
    energy_residual, match_bessel, orbit_period, solve_radial, trajectory_portrait, u_eff, w_transform, RankineParams,
};
use qbohm::relaxation::{run_relaxation, InitialDensity, RelaxationConfig};
use qbohm::schrodinger::{evolve, position_moments, EvolutionConfig, Mode};
use qbohm::trajectories::{
    integrate_guided, integrate_second_order, non_crossing_check, AnalyticField, Integrator, TimeGrid,
};
use qbohm::{Boundary, Complex64, ComplexField, GridSpec, Point, RealField};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{Experiment, ExperimentConfig};
use crate::CliError;

pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    fn text(name: &str, text: String) -> Self {
        Self { name: name.to_owned(), bytes: text.into_bytes() }
    }
}

pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    /// Experiment-specific numbers echoed into the manifest.
    pub results: Value,
    /// Set when a check the experiment exists to perform did not hold.
    pub failure: Option<String>,
}

/// Parses parameters and checks them without running anything.
pub fn validate(cfg: &ExperimentConfig) -> Result<(), CliError> {
    if cfg.experiment.stochastic() && cfg.seed.is_none() {
        return Err(CliError::Validation(format!("seed: required for {}", cfg.experiment.name())));
    }
    match cfg.experiment {
        Experiment::Evolve => cfg.params::<EvolveParams>()?.build().map(|_| ()),
        Experiment::Trajectories => cfg.params::<TrajectoryParams>()?.check(),
        Experiment::Relax => cfg.params::<RelaxParams>()?.build(cfg.seed).and_then(|c| Ok(c.validate()?)),
        Experiment::Rankine => cfg.params::<RankineRun>()?.check(),
        Experiment::ClebschCheck => cfg.params::<ClebschParams>().map(|_| ()),
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    validate(cfg)?;
    match cfg.experiment {
        Experiment::Evolve => run_evolve(cfg.params()?),
        Experiment::Trajectories => run_trajectories(cfg.params()?),
        Experiment::Relax => run_relax(cfg.params::<RelaxParams>()?.build(cfg.seed)?),
        Experiment::Rankine => run_rankine(cfg.params()?),
        Experiment::ClebschCheck => run_clebsch(cfg.params()?, cfg.seed.unwrap_or_default()),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum PotentialSpec {
    Free,
    Harmonic { omega: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct EvolveParams {
    dim: usize,
    points: usize,
    extent: [f64; 2],
    mass: f64,
    sigma: f64,
    k: Vec<f64>,
    center: Vec<f64>,
    potential: PotentialSpec,
    mode: Mode,
    a: f64,
    dt: f64,
    steps: usize,
    record_every: usize,
}

impl Default for EvolveParams {
    fn default() -> Self {
        Self {
            dim: 1,
            points: 512,
            extent: [-20.0, 20.0],
            mass: 1.0,
            sigma: 1.0,
            k: vec![0.0],
            center: vec![0.0],
            potential: PotentialSpec::Free,
            mode: Mode::Quantum,
            a: 1.0,
            dt: 1e-3,
            steps: 1000,
            record_every: 100,
        }
    }
}

impl EvolveParams {
    fn build(&self) -> Result<(ComplexField, EvolutionConfig), CliError> {
        if self.k.len() != self.dim || self.center.len() != self.dim {
            return Err(CliError::Validation("k and center need one entry per dimension".into()));
        }
        if !(self.sigma > 0.0) {
            return Err(CliError::Validation("sigma: must be positive".into()));
        }
        let spec = match self.dim {
            1 => GridSpec::line(self.extent[0], self.extent[1], self.points, Boundary::Periodic)?,
            2 => GridSpec::square(self.extent[0], self.extent[1], self.points, Boundary::Periodic)?,
            d => return Err(CliError::Validation(format!("dim: must be 1 or 2, got {d}"))),
        };
        let s2 = 4.0 * self.sigma * self.sigma;
        let psi = ComplexField::from_fn(&spec, self.mass, |q| {
            let (mut r2, mut phase) = (0.0, 0.0);
            for a in 0..self.dim {
                r2 += (q[a] - self.center[a]).powi(2);
                phase += self.k[a] * q[a];
            }
            Complex64::from_polar((-r2 / s2).exp(), phase)
        })?
        .normalized()?;
        let mut cfg = EvolutionConfig::new(self.dt, self.steps).record_every(self.record_every.max(1));
        if let PotentialSpec::Harmonic { omega } = self.potential {
            let m = self.mass;
            cfg = cfg.with_potential(RealField::from_fn(&spec, |q| {
                0.5 * m * omega * omega * q[..self.dim].iter().map(|x| x * x).sum::<f64>()
            }));
        }
        if self.mode == Mode::Classical {
            cfg = cfg.classical(self.a);
        }
        cfg.validate()?;
        Ok((psi, cfg))
    }
}

fn run_evolve(p: EvolveParams) -> Result<Outcome, CliError> {
    let (psi, cfg) = p.build()?;
    let ev = evolve(&psi, &cfg)?;
    let mut csv = String::from("t,norm");
    for a in 1..=p.dim {
        let _ = write!(csv, ",mean_{a},var_{a}");
    }
    csv.push('\n');
    for (i, snap) in ev.snapshots.iter().enumerate() {
        let _ = write!(csv, "{},{}", fmt_f64(ev.times[i]), fmt_f64(ev.norms[i]));
        for a in 0..p.dim {
            let (m, v) = position_moments(snap, a)?;
            let _ = write!(csv, ",{},{}", fmt_f64(m), fmt_f64(v));
        }
        csv.push('\n');
    }
    let last = ev.snapshots.last().expect("initial snapshot is always recorded");
    let (field_csv, meta) = complex_to_csv(last);
    let drift = ev.norms.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max);
    Ok(Outcome {
        artifacts: vec![
            Artifact::text("evolve_moments.csv", csv),
            Artifact::text("psi_final.csv", field_csv),
            Artifact::text("psi_final.json", serde_json::to_string_pretty(&meta)?),
        ],
        results: json!({ "max_norm_drift": drift, "warnings": ev.warnings }),
        failure: None,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrajectoryParams {
    field: AnalyticField,
    starts: Vec<Vec<f64>>,
    #[serde(default)]
    velocities: Option<Vec<Vec<f64>>>,
    #[serde(default = "guided")]
    integrator: Integrator,
    t_end: f64,
    dt: f64,
    #[serde(default = "one")]
    record_every: usize,
    #[serde(default = "far")]
    radius: f64,
}

fn guided() -> Integrator {
    Integrator::GuidedRk4
}

fn one() -> usize {
    1
}

fn far() -> f64 {
    1e6
}

fn points(rows: &[Vec<f64>], what: &str) -> Result<Vec<Point>, CliError> {
    rows.iter()
        .map(|r| {
            if r.is_empty() || r.len() > 3 {
                return Err(CliError::Validation(format!("{what}: each point needs 1 to 3 coordinates")));
            }
            let mut p = [0.0; 3];
            p[..r.len()].copy_from_slice(r);
            Ok(p)
        })
        .collect()
}

impl TrajectoryParams {
    fn check(&self) -> Result<(), CliError> {
        self.field.validate()?;
        if self.starts.is_empty() {
            return Err(CliError::Validation("starts: need at least one start".into()));
        }
        points(&self.starts, "starts")?;
        match (self.integrator, &self.velocities) {
            (Integrator::NewtonVerlet, Some(v)) if v.len() == self.starts.len() => {
                points(v, "velocities")?;
            }
            (Integrator::NewtonVerlet, _) => {
                return Err(CliError::Validation("velocities: one per start for newton-verlet".into()))
            }
            (Integrator::GuidedRk4, Some(_)) => {
                return Err(CliError::Validation("velocities: not used by the guided integrator".into()))
            }
            _ => {}
        }
        self.time().steps()?;
        Ok(())
    }

    fn time(&self) -> TimeGrid {
        TimeGrid::new(0.0, self.t_end, self.dt).record_every(self.record_every)
    }
}

fn run_trajectories(p: TrajectoryParams) -> Result<Outcome, CliError> {
    let starts = points(&p.starts, "starts")?;
    let ens = match p.integrator {
        Integrator::GuidedRk4 => integrate_guided(&p.field, &starts, p.time())?,
        Integrator::NewtonVerlet => {
            let v = points(p.velocities.as_deref().unwrap_or_default(), "velocities")?;
            integrate_second_order(&p.field, &starts, &v, p.time(), p.radius)?.ensemble
        }
    };
    let report = non_crossing_check(&ens);
    let status: Vec<&str> = ens.status.iter().map(|s| s.label()).collect();
    Ok(Outcome {
        artifacts: vec![Artifact::text("trajectories.csv", ens.to_csv())],
        results: json!({ "non_crossing": report, "status": status }),
        failure: None,
    })
}

/// `"4x4"` or `4`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum Square {
    Count(usize),
    Text(String),
}

impl Square {
    fn side(&self, key: &str) -> Result<usize, CliError> {
        match self {
            Square::Count(n) => Ok(*n),
            Square::Text(s) => {
                let bad = || CliError::Validation(format!("{key}: expected NxN, got '{s}'"));
                let (a, b) = s.split_once('x').ok_or_else(bad)?;
                let (a, b): (usize, usize) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
                if a != b {
                    return Err(CliError::Validation(format!("{key}: only square layouts are supported")));
                }
                Ok(a)
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RelaxParams {
    #[serde(default)]
    modes: Option<Square>,
    #[serde(default)]
    cells: Option<Square>,
    #[serde(default)]
    n_traj: Option<usize>,
    #[serde(default)]
    initial: Option<InitialDensity>,
    #[serde(default)]
    phase_seed: Option<u64>,
    #[serde(default)]
    points: Option<usize>,
    #[serde(default)]
    t_end: Option<f64>,
    #[serde(default)]
    dt: Option<f64>,
    #[serde(default)]
    snapshot_every: Option<usize>,
    #[serde(default)]
    outputs: Option<usize>,
    #[serde(default)]
    mass: Option<f64>,
    #[serde(default)]
    ks_alpha: Option<f64>,
}

impl RelaxParams {
    fn build(&self, seed: Option<u64>) -> Result<RelaxationConfig, CliError> {
        let mut c = RelaxationConfig::default();
        if let Some(m) = &self.modes {
            let n = m.side("modes")? as i64;
            if n < 2 {
                return Err(CliError::Validation("modes: need at least 2 per axis".into()));
            }
            // n consecutive mode numbers starting at −(n/2 − 1).
            let lo = -(n / 2 - 1);
            c.axis_modes = (lo..lo + n).collect();
        }
        if let Some(cells) = &self.cells {
            c.cells = cells.side("cells")?;
        }
        c.n_traj = self.n_traj.unwrap_or(c.n_traj);
        c.initial = self.initial.unwrap_or(c.initial);
        c.phase_seed = self.phase_seed.unwrap_or(c.phase_seed);
        c.points = self.points.unwrap_or(c.points);
        c.t_end = self.t_end.unwrap_or(c.t_end);
        c.dt = self.dt.unwrap_or(c.dt);
        c.snapshot_every = self.snapshot_every.unwrap_or(c.snapshot_every);
        c.outputs = self.outputs.unwrap_or(c.outputs);
        c.mass = self.mass.unwrap_or(c.mass);
        c.ks_alpha = self.ks_alpha.unwrap_or(c.ks_alpha);
        c.sample_seed = seed.ok_or_else(|| CliError::Validation("seed: required for relax".into()))?;
        Ok(c)
    }
}

fn run_relax(cfg: RelaxationConfig) -> Result<Outcome, CliError> {
    let report = run_relaxation(&cfg)?;
    Ok(Outcome {
        artifacts: vec![Artifact::text("relaxation.csv", report.to_csv())],
        results: json!({
            "resolved": cfg,
            "ks_threshold": report.ks_threshold,
            "epsilon_stat": report.epsilon_stat,
            "h_initial": report.h.first(),
            "h_final": report.h.last(),
            "warnings": report.warnings,
        }),
        failure: None,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RankineRun {
    n: u32,
    eps: f64,
    xi0: f64,
    mass: f64,
    tau_max: f64,
    d_tau: f64,
    radii: Vec<f64>,
    orbit_dt: f64,
    record_every: usize,
}

impl Default for RankineRun {
    fn default() -> Self {
        let p = RankineParams::default();
        Self {
            n: p.n,
            eps: p.eps,
            xi0: p.xi0,
            mass: p.mass,
            tau_max: 8.0,
            d_tau: 1e-3,
            radii: vec![0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0],
            orbit_dt: 1e-3,
            record_every: 20,
        }
    }
}

impl RankineRun {
    fn params(&self) -> RankineParams {
        RankineParams { n: self.n, eps: self.eps, xi0: self.xi0, mass: self.mass }
    }

    fn check(&self) -> Result<(), CliError> {
        self.params().validate()?;
        if self.radii.is_empty() || self.radii.iter().any(|r| !(*r > 0.0)) {
            return Err(CliError::Validation("radii: orbit radii must be positive".into()));
        }
        if !(self.orbit_dt > 0.0) || self.record_every == 0 {
            return Err(CliError::Validation("orbit_dt and record_every must be positive".into()));
        }
        Ok(())
    }
}

fn run_rankine(r: RankineRun) -> Result<Outcome, CliError> {
    let p = r.params();
    let sol = solve_radial(&p, r.tau_max, r.d_tau)?;
    let fit = match_bessel(&sol)?;
    let wt = w_transform(&sol);
    let longest = r.radii.iter().map(|&x| orbit_period(&p, x)).fold(0.0, f64::max);
    let time = TimeGrid::new(0.0, longest, r.orbit_dt).record_every(r.record_every);
    let ens = trajectory_portrait(&p, &r.radii, time)?;
    let mut traj = String::from("trajectory_id,t,x,y\n");
    for (id, path) in ens.positions.iter().enumerate() {
        for (ti, q) in path.iter().enumerate() {
            let _ = writeln!(traj, "{id},{},{},{}", fmt_f64(ens.times[ti]), fmt_f64(q[0]), fmt_f64(q[1]));
        }
    }
    let drift = ens
        .positions
        .iter()
        .zip(&r.radii)
        .flat_map(|(path, r0)| path.iter().map(move |q| (q[0].hypot(q[1]) - r0).abs()))
        .fold(0.0, f64::max);
    let periods: Vec<f64> = r.radii.iter().map(|&x| orbit_period(&p, x)).collect();
    Ok(Outcome {
        artifacts: vec![Artifact::text("rankine_profile.csv", sol.to_csv()), Artifact::text("rankine_traj.csv", traj)],
        results: json!({
            "params": p,
            "derived": p.derived(),
            "bessel_match": fit,
            "u_eff_max": u_eff(p.n, 0.0),
            "barrier": wt.class,
            "u_eff_limits_at_core": [wt.limits_at_core.0, wt.limits_at_core.1],
            "critical_radius": p.xi0,
            "orbit_radii": r.radii,
            "orbit_periods": periods,
            "max_radius_drift": drift,
        }),
        failure: None,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ClebschParams {
    random_fields: usize,
    terms: usize,
    kmax: f64,
    h: f64,
    tolerance: f64,
}

impl Default for ClebschParams {
    fn default() -> Self {
        Self { random_fields: 3, terms: 5, kmax: 2.0, h: 1e-3, tolerance: 1e-6 }
    }
}

fn ring(radii: &[f64], per: usize) -> Vec<Point> {
    radii
        .iter()
        .flat_map(|&r| {
            (0..per).map(move |k| {
                let a = 2.0 * PI * (k as f64 + 0.3) / per as f64;
                [r * a.cos(), r * a.sin(), 0.0]
            })
        })
        .collect()
}

fn run_clebsch(c: ClebschParams, seed: u64) -> Result<Outcome, CliError> {
    let mut rows: Vec<(String, f64, f64)> = Vec::new();
    let p = RankineParams::default();
    let flow = p.flow();
    for xi in [0.3, 0.7] {
        let period = orbit_period(&p, xi);
        let rep = advection_residual(&flow, &[[xi, 0.0, 0.0]], TimeGrid::new(0.0, period, period / 2000.0))?;
        rows.push((format!("rankine_advection_alpha_r{xi}"), rep.alpha, c.tolerance));
        rows.push((format!("rankine_advection_beta_r{xi}"), rep.beta, c.tolerance));
    }
    let pts = ring(&[0.2, 0.5, 0.8], 8);
    rows.push(("rankine_vorticity".into(), vorticity_residual(&flow, &pts, 0.3, c.h), c.tolerance));
    rows.push(("rankine_lorentz".into(), lorentz_force_residual(&flow, &pts, 0.3), c.tolerance));
    rows.push(("rankine_energy".into(), energy_residual(&p, &pts), 1e-8));
    for i in 0..c.random_fields as u64 {
        let s = seed.wrapping_mul(31).wrapping_add(3 * i);
        let random = |k: u64| FourierScalar::random(s + k, c.terms, 2, c.kmax, true);
        let pair = ClebschPair::new(Arc::new(random(1)), Arc::new(random(2)));
        let gen = GeneralizedFlow::new(Arc::new(random(0)), pair.clone(), ExternalEm::None, 1.0, 2);
        let pts = ring(&[0.4, 1.1], 10);
        rows.push((format!("random{i}_vorticity"), vorticity_residual(&gen, &pts, 0.2, c.h), c.tolerance));
        let m = maxwell_residuals(&pair, &pts, 0.2, c.h);
        rows.push((format!("random{i}_div_b"), m.divergence, c.tolerance));
        rows.push((format!("random{i}_faraday"), m.faraday, c.tolerance));
        rows.push((format!("random{i}_potentials"), m.potentials, c.tolerance));
        let s0: Arc<dyn ScalarField> = Arc::new(FourierScalar::random(s + 4, c.terms, 2, 1.0, false));
        let still = ClebschPair::new(
            Arc::new(FourierScalar::random(s + 5, c.terms, 2, 1.0, false)),
            Arc::new(FourierScalar::random(s + 6, c.terms, 2, 1.0, false)),
        );
        let (s2, pair2) =
            gauge_transform(s0.clone(), &still, Arc::new(BuiltinGauge::SinShift), (-6.0, 6.0), (-6.0, 6.0), &[0.0])?;
        let f1 = GeneralizedFlow::new(s0, still, ExternalEm::None, 1.0, 2);
        let f2 = GeneralizedFlow::new(s2, pair2, ExternalEm::None, 1.0, 2);
        let worst = pts
            .iter()
            .map(|q| {
                let (a, b) = (f1.velocity_at(q, 0.0), f2.velocity_at(q, 0.0));
                (0..3).map(|k| (a[k] - b[k]).abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        rows.push((format!("random{i}_gauge_invariance"), worst, 1e-10));
    }
    let mut csv = String::from("check,value,tolerance,pass\n");
    let mut failed = Vec::new();
    for (name, v, tol) in &rows {
        let ok = *v < *tol;
        if !ok {
            failed.push(name.clone());
        }
        let _ = writeln!(csv, "{name},{},{},{ok}", fmt_f64(*v), fmt_f64(*tol));
    }
    Ok(Outcome {
        artifacts: vec![Artifact::text("clebsch_check.csv", csv)],
        results: json!({ "checks": rows.len(), "failed": failed }),
        failure: (!failed.is_empty()).then(|| format!("checks failed: {}", failed.join(", "))),
    })
}
