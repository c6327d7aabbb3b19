//! Uniform 1D/2D grids, field containers, derivatives and interpolation.
//!
//! Periodic grids place `points` nodes on `[min, max)`; dirichlet grids place
//! them on `[min, max]` including both end points. Node `(i0, i1)` lives at
//! flat index `i0 * n1 + i1`, so the last axis is contiguous.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Position in configuration space. Unused trailing components are zero.
pub type Point = [f64; 3];

/// Minimum number of nodes per axis.
pub const MIN_POINTS: usize = 8;

/// Snap tolerance (in index units) that makes interpolation at nodes exact.
const NODE_SNAP: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Dirichlet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpecRepr")]
pub struct GridSpec {
    dim: usize,
    extent_min: Vec<f64>,
    extent_max: Vec<f64>,
    points: Vec<usize>,
    boundary: Boundary,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSpecRepr {
    dim: usize,
    extent_min: Vec<f64>,
    extent_max: Vec<f64>,
    points: Vec<usize>,
    boundary: Boundary,
}

impl TryFrom<GridSpecRepr> for GridSpec {
    type Error = Error;

    fn try_from(r: GridSpecRepr) -> Result<Self> {
        let spec = GridSpec::new(&r.extent_min, &r.extent_max, &r.points, r.boundary)?;
        if spec.dim != r.dim {
            return Err(Error::InvalidGrid(format!(
                "dim {} disagrees with {} axes",
                r.dim, spec.dim
            )));
        }
        Ok(spec)
    }
}

impl GridSpec {
    pub fn new(
        extent_min: &[f64],
        extent_max: &[f64],
        points: &[usize],
        boundary: Boundary,
    ) -> Result<Self> {
        let dim = points.len();
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension must be 1 or 2, got {dim}")));
        }
        if extent_min.len() != dim || extent_max.len() != dim {
            return Err(Error::InvalidGrid("extent length differs from dimension".into()));
        }
        for axis in 0..dim {
            if points[axis] < MIN_POINTS {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis} has {} points, need at least {MIN_POINTS}",
                    points[axis]
                )));
            }
            let (lo, hi) = (extent_min[axis], extent_max[axis]);
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis} extent [{lo}, {hi}] is empty"
                )));
            }
        }
        Ok(Self {
            dim,
            extent_min: extent_min.to_vec(),
            extent_max: extent_max.to_vec(),
            points: points.to_vec(),
            boundary,
        })
    }

    pub fn line(min: f64, max: f64, points: usize, boundary: Boundary) -> Result<Self> {
        Self::new(&[min], &[max], &[points], boundary)
    }

    pub fn square(min: f64, max: f64, points: usize, boundary: Boundary) -> Result<Self> {
        Self::new(&[min, min], &[max, max], &[points, points], boundary)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn is_periodic(&self) -> bool {
        self.boundary == Boundary::Periodic
    }

    pub fn points(&self, axis: usize) -> usize {
        self.points[axis]
    }

    pub fn extent(&self, axis: usize) -> (f64, f64) {
        (self.extent_min[axis], self.extent_max[axis])
    }

    pub fn length(&self, axis: usize) -> f64 {
        self.extent_max[axis] - self.extent_min[axis]
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `(n0, n1)` with `n1 = 1` on 1D grids.
    pub fn shape(&self) -> (usize, usize) {
        if self.dim == 1 {
            (self.points[0], 1)
        } else {
            (self.points[0], self.points[1])
        }
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        let n = self.points[axis] as f64;
        match self.boundary {
            Boundary::Periodic => self.length(axis) / n,
            Boundary::Dirichlet => self.length(axis) / (n - 1.0),
        }
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).product()
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.extent_min[axis] + i as f64 * self.spacing(axis)
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        if self.dim == 1 {
            idx[0]
        } else {
            idx[0] * self.points[1] + idx[1]
        }
    }

    pub fn unflat(&self, flat: usize) -> [usize; 2] {
        if self.dim == 1 {
            [flat, 0]
        } else {
            [flat / self.points[1], flat % self.points[1]]
        }
    }

    pub fn node(&self, flat: usize) -> Point {
        let idx = self.unflat(flat);
        let mut p = [0.0; 3];
        for axis in 0..self.dim {
            p[axis] = self.coord(axis, idx[axis]);
        }
        p
    }

    pub fn check_axis(&self, axis: usize) -> Result<()> {
        if axis >= self.dim {
            Err(Error::AxisOutOfRange { axis, dim: self.dim })
        } else {
            Ok(())
        }
    }

    /// Angular wavenumber of FFT bin `j` along `axis`.
    pub fn wavenumber(&self, axis: usize, j: usize) -> f64 {
        let n = self.points[axis] as i64;
        let j = j as i64;
        let signed = if j <= n / 2 { j } else { j - n };
        2.0 * std::f64::consts::PI * signed as f64 / self.length(axis)
    }

    pub fn require_spectral(&self) -> Result<()> {
        if !self.is_periodic() {
            return Err(Error::NotPeriodic);
        }
        for &n in &self.points {
            if !n.is_power_of_two() {
                return Err(Error::NotPowerOfTwo(n));
            }
        }
        Ok(())
    }

    /// Wraps periodic coordinates into the fundamental domain.
    pub fn wrap(&self, p: &mut Point) {
        if self.is_periodic() {
            for axis in 0..self.dim {
                let (lo, _) = self.extent(axis);
                let len = self.length(axis);
                p[axis] = lo + (p[axis] - lo).rem_euclid(len);
            }
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.is_periodic()
            || (0..self.dim).all(|a| {
                let (lo, hi) = self.extent(a);
                p[a] >= lo && p[a] <= hi
            })
    }

    /// Interpolation stencil at `p`: cubic Lagrange per axis, tensor product in 2D.
    pub fn stencil(&self, p: &Point) -> Result<Stencil> {
        let mut st = Stencil {
            dim: self.dim,
            idx: [[0; 4]; 2],
            w: [[0.0; 4]; 2],
        };
        for axis in 0..self.dim {
            let n = self.points[axis];
            let (lo, _) = self.extent(axis);
            let mut s = (p[axis] - lo) / self.spacing(axis);
            if (s - s.round()).abs() < NODE_SNAP {
                s = s.round();
            }
            let offsets: [i64; 4];
            let base: i64;
            match self.boundary {
                Boundary::Periodic => {
                    s = s.rem_euclid(n as f64);
                    if s >= n as f64 {
                        s = 0.0;
                    }
                    base = s.floor() as i64 - 1;
                    offsets = [0, 1, 2, 3];
                    for (k, o) in offsets.iter().enumerate() {
                        st.idx[axis][k] = (base + o).rem_euclid(n as i64) as usize;
                    }
                }
                Boundary::Dirichlet => {
                    let last = (n - 1) as f64;
                    if !(s >= -NODE_SNAP && s <= last + NODE_SNAP) {
                        return Err(Error::OutsideDomain(p[..self.dim].to_vec()));
                    }
                    s = s.clamp(0.0, last);
                    base = ((s.floor() as i64) - 1).clamp(0, n as i64 - 4);
                    offsets = [0, 1, 2, 3];
                    for (k, o) in offsets.iter().enumerate() {
                        st.idx[axis][k] = (base + o) as usize;
                    }
                }
            }
            let u = s - base as f64;
            st.w[axis] = lagrange4(u);
        }
        if self.dim == 1 {
            st.idx[1] = [0; 4];
        }
        Ok(st)
    }
}

/// Cubic Lagrange weights for nodes at 0, 1, 2, 3 evaluated at `u`.
fn lagrange4(u: f64) -> [f64; 4] {
    let (a, b, c, d) = (u, u - 1.0, u - 2.0, u - 3.0);
    [
        -(b * c * d) / 6.0,
        (a * c * d) / 2.0,
        -(a * b * d) / 2.0,
        (a * b * c) / 6.0,
    ]
}

/// Precomputed interpolation weights, reusable across fields on one grid.
#[derive(Clone, Copy, Debug)]
pub struct Stencil {
    dim: usize,
    idx: [[usize; 4]; 2],
    w: [[f64; 4]; 2],
}

impl Stencil {
    /// Applies the stencil to node values laid out with row length `n1`.
    #[inline]
    pub fn apply<T: FieldValue>(&self, values: &[T], n1: usize) -> T {
        if self.dim == 1 {
            let mut acc = T::zero();
            for k in 0..4 {
                acc = acc + values[self.idx[0][k]] * self.w[0][k];
            }
            return acc;
        }
        let mut acc = T::zero();
        for a in 0..4 {
            let row = self.idx[0][a] * n1;
            let mut line = T::zero();
            for b in 0..4 {
                line = line + values[row + self.idx[1][b]] * self.w[1][b];
            }
            acc = acc + line * self.w[0][a];
        }
        acc
    }

    /// Applies the stencil to interleaved records of `K` values per node.
    #[inline]
    pub fn apply_interleaved<const K: usize>(
        &self,
        values: &[[Complex64; K]],
        n1: usize,
    ) -> [Complex64; K] {
        let mut acc = [Complex64::new(0.0, 0.0); K];
        if self.dim == 1 {
            for k in 0..4 {
                let rec = &values[self.idx[0][k]];
                let w = self.w[0][k];
                for c in 0..K {
                    acc[c] += rec[c] * w;
                }
            }
            return acc;
        }
        for a in 0..4 {
            let row = self.idx[0][a] * n1;
            let mut line = [Complex64::new(0.0, 0.0); K];
            for b in 0..4 {
                let rec = &values[row + self.idx[1][b]];
                let w = self.w[1][b];
                for c in 0..K {
                    line[c] += rec[c] * w;
                }
            }
            let wa = self.w[0][a];
            for c in 0..K {
                acc[c] += line[c] * wa;
            }
        }
        acc
    }
}

/// Scalar types a field can hold.
pub trait FieldValue:
    Copy + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn zero() -> Self;
    fn to_complex(self) -> Complex64;
    fn from_complex(c: Complex64) -> Self;
}

impl FieldValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    fn from_complex(c: Complex64) -> Self {
        c.re
    }
}

impl FieldValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn to_complex(self) -> Complex64 {
        self
    }
    fn from_complex(c: Complex64) -> Self {
        c
    }
}

/// `order`-th derivative (1 or 2) of node values along `axis`.
///
/// Periodic grids use FFTs; dirichlet grids use fourth-order finite
/// differences with one-sided stencils at the edges.
pub fn derivative<T: FieldValue>(
    spec: &GridSpec,
    values: &[T],
    axis: usize,
    order: u8,
) -> Result<Vec<T>> {
    spec.check_axis(axis)?;
    if values.len() != spec.len() {
        return Err(Error::LengthMismatch { expected: spec.len(), got: values.len() });
    }
    match spec.boundary() {
        Boundary::Periodic => {
            spec.require_spectral()?;
            Ok(spectral_derivative(spec, values, axis, order))
        }
        Boundary::Dirichlet => Ok(fd_derivative(spec, values, axis, order)),
    }
}

/// Iterates over the lines of the grid along `axis`: yields (start, stride, len).
fn lines(spec: &GridSpec, axis: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
    let n1 = spec.shape().1;
    let count = spec.len() / spec.points(axis);
    (0..count).map(move |l| match (spec.dim(), axis) {
        (1, _) => (0, 1),
        (_, 0) => (l, n1),
        _ => (l * n1, 1),
    })
}

fn spectral_derivative<T: FieldValue>(
    spec: &GridSpec,
    values: &[T],
    axis: usize,
    order: u8,
) -> Vec<T> {
    let n = spec.points(axis);
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let line_starts: Vec<(usize, usize)> = lines(spec, axis).collect();
    let mut buf = Vec::with_capacity(spec.len());
    for &(start, stride) in &line_starts {
        for i in 0..n {
            buf.push(values[start + i * stride].to_complex());
        }
    }
    fwd.process(&mut buf);
    let factors: Vec<Complex64> = (0..n)
        .map(|j| {
            let k = spec.wavenumber(axis, j);
            match order {
                1 if n % 2 == 0 && j == n / 2 => Complex64::new(0.0, 0.0),
                1 => Complex64::new(0.0, k),
                _ => Complex64::new(-k * k, 0.0),
            }
        })
        .collect();
    let scale = 1.0 / n as f64;
    for chunk in buf.chunks_mut(n) {
        for (c, f) in chunk.iter_mut().zip(&factors) {
            *c = *c * *f * scale;
        }
    }
    inv.process(&mut buf);
    let mut out = vec![T::zero(); values.len()];
    for (l, &(start, stride)) in line_starts.iter().enumerate() {
        for i in 0..n {
            out[start + i * stride] = T::from_complex(buf[l * n + i]);
        }
    }
    out
}

fn fd_derivative<T: FieldValue>(spec: &GridSpec, values: &[T], axis: usize, order: u8) -> Vec<T> {
    let n = spec.points(axis);
    let h = spec.spacing(axis);
    let mut out = vec![T::zero(); values.len()];
    let line: Vec<(usize, usize)> = lines(spec, axis).collect();
    for (start, stride) in line {
        let f = |i: usize| values[start + i * stride];
        for i in 0..n {
            let v = if order == 1 {
                fd_first(&f, i, n) * (1.0 / (12.0 * h))
            } else {
                fd_second(&f, i, n) * (1.0 / (12.0 * h * h))
            };
            out[start + i * stride] = v;
        }
    }
    out
}

fn combo<T: FieldValue>(f: &impl Fn(usize) -> T, idx: &[usize], c: &[f64]) -> T {
    let mut acc = T::zero();
    for (&i, &w) in idx.iter().zip(c) {
        acc = acc + f(i) * w;
    }
    acc
}

/// Twelve times the first derivative times `h`.
fn fd_first<T: FieldValue>(f: &impl Fn(usize) -> T, i: usize, n: usize) -> T {
    const EDGE0: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
    const EDGE1: [f64; 5] = [-3.0, -10.0, 18.0, -6.0, 1.0];
    if i == 0 {
        combo(f, &[0, 1, 2, 3, 4], &EDGE0)
    } else if i == 1 {
        combo(f, &[0, 1, 2, 3, 4], &EDGE1)
    } else if i == n - 1 {
        combo(f, &[n - 1, n - 2, n - 3, n - 4, n - 5], &EDGE0) * -1.0
    } else if i == n - 2 {
        combo(f, &[n - 1, n - 2, n - 3, n - 4, n - 5], &EDGE1) * -1.0
    } else {
        combo(f, &[i - 2, i - 1, i + 1, i + 2], &[1.0, -8.0, 8.0, -1.0])
    }
}

/// Twelve times the second derivative times `h^2`.
fn fd_second<T: FieldValue>(f: &impl Fn(usize) -> T, i: usize, n: usize) -> T {
    const EDGE0: [f64; 6] = [45.0, -154.0, 214.0, -156.0, 61.0, -10.0];
    const EDGE1: [f64; 6] = [10.0, -15.0, -4.0, 14.0, -6.0, 1.0];
    if i == 0 {
        combo(f, &[0, 1, 2, 3, 4, 5], &EDGE0)
    } else if i == 1 {
        combo(f, &[0, 1, 2, 3, 4, 5], &EDGE1)
    } else if i == n - 1 {
        combo(f, &[n - 1, n - 2, n - 3, n - 4, n - 5, n - 6], &EDGE0)
    } else if i == n - 2 {
        combo(f, &[n - 1, n - 2, n - 3, n - 4, n - 5, n - 6], &EDGE1)
    } else {
        combo(
            f,
            &[i - 2, i - 1, i, i + 1, i + 2],
            &[-1.0, 16.0, -30.0, 16.0, -1.0],
        )
    }
}

fn laplacian_values<T: FieldValue>(spec: &GridSpec, values: &[T]) -> Result<Vec<T>> {
    let mut acc = derivative(spec, values, 0, 2)?;
    for axis in 1..spec.dim() {
        let d = derivative(spec, values, axis, 2)?;
        for (a, b) in acc.iter_mut().zip(d) {
            *a = *a + b;
        }
    }
    Ok(acc)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RealField {
    spec: GridSpec,
    values: Vec<f64>,
}

impl RealField {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::LengthMismatch { expected: spec.len(), got: values.len() });
        }
        Ok(Self { spec, values })
    }

    pub fn from_fn(spec: &GridSpec, f: impl Fn(&Point) -> f64) -> Self {
        let values = (0..spec.len()).map(|i| f(&spec.node(i))).collect();
        Self { spec: spec.clone(), values }
    }

    pub fn constant(spec: &GridSpec, c: f64) -> Self {
        Self { spec: spec.clone(), values: vec![c; spec.len()] }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { spec: self.spec.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn gradient(&self, axis: usize) -> Result<Self> {
        let values = derivative(&self.spec, &self.values, axis, 1)?;
        Ok(Self { spec: self.spec.clone(), values })
    }

    pub fn second_derivative(&self, axis: usize) -> Result<Self> {
        let values = derivative(&self.spec, &self.values, axis, 2)?;
        Ok(Self { spec: self.spec.clone(), values })
    }

    pub fn laplacian(&self) -> Result<Self> {
        let values = laplacian_values(&self.spec, &self.values)?;
        Ok(Self { spec: self.spec.clone(), values })
    }

    pub fn interpolate(&self, p: &Point) -> Result<f64> {
        let st = self.spec.stencil(p)?;
        Ok(st.apply(&self.values, self.spec.shape().1))
    }

    /// Riemann sum over the grid.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spec.cell_volume()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    spec: GridSpec,
    values: Vec<Complex64>,
    mass: f64,
    potential_ref: Option<String>,
    normalized: bool,
}

/// Tolerance of the normalization flag.
pub const NORMALIZATION_TOL: f64 = 1e-9;

impl ComplexField {
    pub fn new(spec: GridSpec, values: Vec<Complex64>, mass: f64) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::LengthMismatch { expected: spec.len(), got: values.len() });
        }
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::param(format!("mass must be positive, got {mass}")));
        }
        Ok(Self { spec, values, mass, potential_ref: None, normalized: false })
    }

    pub fn from_fn(spec: &GridSpec, mass: f64, f: impl Fn(&Point) -> Complex64) -> Result<Self> {
        let values = (0..spec.len()).map(|i| f(&spec.node(i))).collect();
        Self::new(spec.clone(), values, mass)
    }

    pub fn with_potential_ref(mut self, name: impl Into<String>) -> Self {
        self.potential_ref = Some(name.into());
        self
    }

    /// Same nodes with new values; drops the normalization flag.
    pub fn with_values(&self, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != self.spec.len() {
            return Err(Error::LengthMismatch { expected: self.spec.len(), got: values.len() });
        }
        Ok(Self {
            spec: self.spec.clone(),
            values,
            mass: self.mass,
            potential_ref: self.potential_ref.clone(),
            normalized: false,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn potential_ref(&self) -> Option<&str> {
        self.potential_ref.as_deref()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Σ|Ψ|² times the cell volume.
    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.spec.cell_volume()
    }

    /// Rescales to unit norm and sets the normalization flag.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sq();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::param("cannot normalize a zero or non-finite field"));
        }
        let s = 1.0 / n.sqrt();
        let mut out = self.with_values(self.values.iter().map(|c| c * s).collect())?;
        out.normalized = (out.norm_sq() - 1.0).abs() < NORMALIZATION_TOL;
        Ok(out)
    }

    /// Sets the normalization flag after checking it.
    pub fn assert_normalized(mut self) -> Result<Self> {
        let n = self.norm_sq();
        if (n - 1.0).abs() >= NORMALIZATION_TOL {
            return Err(Error::param(format!("field norm is {n}, not 1")));
        }
        self.normalized = true;
        Ok(self)
    }

    pub fn density(&self) -> RealField {
        RealField {
            spec: self.spec.clone(),
            values: self.values.iter().map(|c| c.norm_sqr()).collect(),
        }
    }

    pub fn amplitude(&self) -> RealField {
        RealField { spec: self.spec.clone(), values: self.values.iter().map(|c| c.norm()).collect() }
    }

    pub fn gradient(&self, axis: usize) -> Result<Self> {
        let values = derivative(&self.spec, &self.values, axis, 1)?;
        self.with_values(values)
    }

    pub fn second_derivative(&self, axis: usize) -> Result<Self> {
        let values = derivative(&self.spec, &self.values, axis, 2)?;
        self.with_values(values)
    }

    pub fn laplacian(&self) -> Result<Self> {
        let values = laplacian_values(&self.spec, &self.values)?;
        self.with_values(values)
    }

    pub fn interpolate(&self, p: &Point) -> Result<Complex64> {
        let st = self.spec.stencil(p)?;
        Ok(st.apply(&self.values, self.spec.shape().1))
    }

    /// ⟨self|other⟩ as a Riemann sum.
    pub fn inner(&self, other: &ComplexField) -> Result<Complex64> {
        if self.spec != other.spec {
            return Err(Error::GridMismatch);
        }
        let s: Complex64 =
            self.values.iter().zip(&other.values).map(|(a, b)| a.conj() * b).sum();
        Ok(s * self.spec.cell_volume())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.norm()))
    }
}
