//! Grid geometry, field containers and the linear operators coupling the
//! centered and staggered discretizations.
//!
//! Every field is stored as a dense row-major block indexed `(time, axis0,
//! axis1)`. One-dimensional problems use a trailing axis of length one so 1D
//! and 2D share a single code path. Space-staggered momentum component `k`
//! carries one extra node along spatial axis `k`, the time-staggered density
//! carries one extra slice along time.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("shape mismatch for {what}: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        what: &'static str,
        expected: [usize; 3],
        found: [usize; 3],
    },
    #[error("invalid boundary data: {0}")]
    InvalidBoundary(String),
}

/// Discretization of `[0,1] x prod_k [0, L_k]` with `N_k` cells per spatial
/// axis and `T` cells in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    lengths: Vec<f64>,
    n_space: Vec<usize>,
    n_time: usize,
}

impl GridSpec {
    pub fn new(lengths: Vec<f64>, n_space: Vec<usize>, n_time: usize) -> Result<Self, GridError> {
        if lengths.is_empty() || lengths.len() > 2 {
            return Err(GridError::InvalidGrid(format!(
                "expected 1 or 2 spatial dimensions, got {}",
                lengths.len()
            )));
        }
        if lengths.len() != n_space.len() {
            return Err(GridError::InvalidGrid(
                "lengths and cell counts differ in dimension".into(),
            ));
        }
        if let Some(l) = lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(GridError::InvalidGrid(format!("length {l} must be positive")));
        }
        if let Some(n) = n_space.iter().find(|n| **n < 2) {
            return Err(GridError::InvalidGrid(format!("{n} spatial cells, need at least 2")));
        }
        if n_time < 2 {
            return Err(GridError::InvalidGrid(format!("{n_time} time steps, need at least 2")));
        }
        Ok(Self {
            lengths,
            n_space,
            n_time,
        })
    }

    pub fn line(length: f64, n: usize, n_time: usize) -> Result<Self, GridError> {
        Self::new(vec![length], vec![n], n_time)
    }

    pub fn plane(lengths: [f64; 2], n: [usize; 2], n_time: usize) -> Result<Self, GridError> {
        Self::new(lengths.to_vec(), n.to_vec(), n_time)
    }

    pub fn dims(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn n_space(&self) -> &[usize] {
        &self.n_space
    }

    pub fn n_time(&self) -> usize {
        self.n_time
    }

    /// Cells along spatial axis `k`, padded to two axes (missing axis has 1).
    fn space_extent(&self, k: usize) -> usize {
        self.n_space.get(k).copied().unwrap_or(1)
    }

    pub fn spatial_cells(&self) -> usize {
        self.n_space.iter().product()
    }

    /// `N_k / L_k`, the inverse spatial step.
    pub fn inv_step(&self, k: usize) -> f64 {
        self.n_space[k] as f64 / self.lengths[k]
    }

    /// Lebesgue measure of one spatial cell.
    pub fn spatial_cell_volume(&self) -> f64 {
        self.lengths
            .iter()
            .zip(&self.n_space)
            .map(|(l, n)| l / *n as f64)
            .product()
    }

    /// Space-time measure of one centered cell.
    pub fn cell_volume(&self) -> f64 {
        self.spatial_cell_volume() / self.n_time as f64
    }

    pub fn domain_volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    /// Center of cell `i` along axis `k`: `L (i + 1/2) / N` (zero based).
    pub fn cell_center(&self, k: usize, i: usize) -> f64 {
        self.lengths[k] * (i as f64 + 0.5) / self.n_space[k] as f64
    }

    /// Center of time cell `j`: `(j + 1/2) / T`.
    pub fn time_center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) / self.n_time as f64
    }

    /// Time node `j / T` of the time-staggered grid.
    pub fn time_node(&self, j: usize) -> f64 {
        j as f64 / self.n_time as f64
    }

    /// Spatial coordinates of flat spatial cell index `s`.
    pub fn spatial_coords(&self, s: usize) -> Vec<f64> {
        match self.dims() {
            1 => vec![self.cell_center(0, s)],
            _ => {
                let n1 = self.n_space[1];
                vec![self.cell_center(0, s / n1), self.cell_center(1, s % n1)]
            }
        }
    }

    /// Same discretization on a domain stretched by `s` along every axis.
    pub fn stretched(&self, s: f64) -> Self {
        Self {
            lengths: self.lengths.iter().map(|l| l * s).collect(),
            n_space: self.n_space.clone(),
            n_time: self.n_time,
        }
    }

    pub fn spatial_shape(&self) -> [usize; 3] {
        [1, self.space_extent(0), self.space_extent(1)]
    }

    pub fn centered_shape(&self) -> [usize; 3] {
        [self.n_time, self.space_extent(0), self.space_extent(1)]
    }

    pub fn time_staggered_shape(&self) -> [usize; 3] {
        [self.n_time + 1, self.space_extent(0), self.space_extent(1)]
    }

    pub fn space_staggered_shape(&self, k: usize) -> [usize; 3] {
        let mut s = self.centered_shape();
        s[k + 1] += 1;
        s
    }
}

/// Dense scalar field over a `(time, axis0, axis1)` block.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    shape: [usize; 3],
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(shape: [usize; 3]) -> Self {
        Self {
            shape,
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn constant(shape: [usize; 3], value: f64) -> Self {
        Self {
            shape,
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: [usize; 3], data: Vec<f64>) -> Result<Self, GridError> {
        let n: usize = shape.iter().product();
        if data.len() != n {
            return Err(GridError::ShapeMismatch {
                what: "field data",
                expected: shape,
                found: [data.len(), 1, 1],
            });
        }
        Ok(Self { shape, data })
    }

    pub fn from_fn(shape: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(shape.iter().product());
        for t in 0..shape[0] {
            for i in 0..shape[1] {
                for j in 0..shape[2] {
                    data.push(f(t, i, j));
                }
            }
        }
        Self { shape, data }
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, t: usize, i: usize, j: usize) -> usize {
        (t * self.shape[1] + i) * self.shape[2] + j
    }

    #[inline]
    pub fn get(&self, t: usize, i: usize, j: usize) -> f64 {
        self.data[self.index(t, i, j)]
    }

    #[inline]
    pub fn set(&mut self, t: usize, i: usize, j: usize, v: f64) {
        let k = self.index(t, i, j);
        self.data[k] = v;
    }

    /// Values of time slice `t` (contiguous).
    pub fn slice(&self, t: usize) -> &[f64] {
        let n = self.shape[1] * self.shape[2];
        &self.data[t * n..(t + 1) * n]
    }

    pub fn slice_mut(&mut self, t: usize) -> &mut [f64] {
        let n = self.shape[1] * self.shape[2];
        &mut self.data[t * n..(t + 1) * n]
    }

    pub fn dot(&self, other: &Field) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &Field) {
        debug_assert_eq!(self.shape, other.shape);
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += a * y;
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.data.iter_mut().for_each(|x| *x *= a);
    }

    fn check(&self, what: &'static str, expected: [usize; 3]) -> Result<(), GridError> {
        if self.shape != expected {
            return Err(GridError::ShapeMismatch {
                what,
                expected,
                found: self.shape,
            });
        }
        Ok(())
    }
}

/// Calls `f(base, stride, len)` once per line of `shape` running along `axis`.
pub(crate) fn for_each_line(shape: [usize; 3], axis: usize, mut f: impl FnMut(usize, usize, usize)) {
    let stride: usize = shape[axis + 1..].iter().product();
    let len = shape[axis];
    let outer: usize = shape[..axis].iter().product();
    for o in 0..outer {
        for inner in 0..stride {
            f(o * len * stride + inner, stride, len);
        }
    }
}

/// Midpoint average along `axis`; output is one shorter along that axis.
pub(crate) fn average_along(src: &Field, axis: usize) -> Field {
    let mut shape = src.shape;
    shape[axis] -= 1;
    let mut out = Field::zeros(shape);
    let src_stride: usize = src.shape[axis + 1..].iter().product();
    for_each_line(shape, axis, |base, stride, len| {
        // Lines of `out` and `src` share inner layout; only the outer offset differs.
        let outer = base / (len * stride);
        let inner = base % stride;
        let sbase = outer * (len + 1) * src_stride + inner;
        for i in 0..len {
            out.data[base + i * stride] =
                0.5 * (src.data[sbase + i * src_stride] + src.data[sbase + (i + 1) * src_stride]);
        }
    });
    out
}

/// Transpose of [`average_along`]; output is one longer along `axis`.
pub(crate) fn average_along_adjoint(src: &Field, axis: usize) -> Field {
    let mut shape = src.shape;
    shape[axis] += 1;
    let mut out = Field::zeros(shape);
    let out_stride: usize = shape[axis + 1..].iter().product();
    for_each_line(src.shape, axis, |base, stride, len| {
        let outer = base / (len * stride);
        let inner = base % stride;
        let obase = outer * (len + 1) * out_stride + inner;
        for i in 0..len {
            let v = 0.5 * src.data[base + i * stride];
            out.data[obase + i * out_stride] += v;
            out.data[obase + (i + 1) * out_stride] += v;
        }
    });
    out
}

/// `out[i] += scale * (src[i+1] - src[i])` along `axis`.
pub(crate) fn add_difference_along(out: &mut Field, src: &Field, axis: usize, scale: f64) {
    let src_stride: usize = src.shape[axis + 1..].iter().product();
    let shape = out.shape;
    for_each_line(shape, axis, |base, stride, len| {
        let outer = base / (len * stride);
        let inner = base % stride;
        let sbase = outer * (len + 1) * src_stride + inner;
        for i in 0..len {
            out.data[base + i * stride] +=
                scale * (src.data[sbase + (i + 1) * src_stride] - src.data[sbase + i * src_stride]);
        }
    });
}

/// Transpose of [`add_difference_along`]: `out[i] = scale * (src[i-1] - src[i])`
/// with missing neighbours treated as zero.
pub(crate) fn difference_along_adjoint(src: &Field, axis: usize, scale: f64) -> Field {
    let mut shape = src.shape;
    shape[axis] += 1;
    let mut out = Field::zeros(shape);
    let out_stride: usize = shape[axis + 1..].iter().product();
    for_each_line(src.shape, axis, |base, stride, len| {
        let outer = base / (len * stride);
        let inner = base % stride;
        let obase = outer * (len + 1) * out_stride + inner;
        for i in 0..len {
            let v = scale * src.data[base + i * stride];
            out.data[obase + i * out_stride] -= v;
            out.data[obase + (i + 1) * out_stride] += v;
        }
    });
    out
}

/// Density, momentum and source sampled on the centered grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredTriplet {
    pub rho: Field,
    pub m: Vec<Field>,
    pub zeta: Field,
}

impl CenteredTriplet {
    pub fn zeros(grid: &GridSpec) -> Self {
        let shape = grid.centered_shape();
        Self {
            rho: Field::zeros(shape),
            m: (0..grid.dims()).map(|_| Field::zeros(shape)).collect(),
            zeta: Field::zeros(shape),
        }
    }

    pub fn check_shape(&self, grid: &GridSpec) -> Result<(), GridError> {
        let shape = grid.centered_shape();
        self.rho.check("centered rho", shape)?;
        if self.m.len() != grid.dims() {
            return Err(GridError::InvalidGrid(format!(
                "{} momentum components for a {}-dimensional grid",
                self.m.len(),
                grid.dims()
            )));
        }
        for m in &self.m {
            m.check("centered momentum", shape)?;
        }
        self.zeta.check("centered source", shape)
    }

    pub fn fields(&self) -> impl Iterator<Item = &Field> {
        std::iter::once(&self.rho).chain(self.m.iter()).chain(std::iter::once(&self.zeta))
    }

    pub fn fields_mut(&mut self) -> impl Iterator<Item = &mut Field> {
        std::iter::once(&mut self.rho)
            .chain(self.m.iter_mut())
            .chain(std::iter::once(&mut self.zeta))
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.fields().zip(other.fields()).map(|(a, b)| a.dot(b)).sum()
    }

    pub fn axpy(&mut self, a: f64, other: &Self) {
        for (x, y) in self.fields_mut().zip(other.fields()) {
            x.axpy(a, y);
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.fields_mut().for_each(|f| f.scale(a));
    }

    pub fn is_finite(&self) -> bool {
        self.fields().all(Field::is_finite)
    }
}

/// Density on the time-staggered grid, momentum component `k` on the `k`-th
/// space-staggered grid, source on the centered grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StaggeredTriplet {
    pub rho: Field,
    pub m: Vec<Field>,
    pub zeta: Field,
}

impl StaggeredTriplet {
    pub fn zeros(grid: &GridSpec) -> Self {
        Self {
            rho: Field::zeros(grid.time_staggered_shape()),
            m: (0..grid.dims())
                .map(|k| Field::zeros(grid.space_staggered_shape(k)))
                .collect(),
            zeta: Field::zeros(grid.centered_shape()),
        }
    }

    /// Linear-in-time interpolation between the endpoints with zero momentum and
    /// the matching constant source. Always satisfies the discrete continuity
    /// constraint.
    pub fn linear_interpolation(grid: &GridSpec, b: &BoundaryData) -> Self {
        let mut u = Self::zeros(grid);
        let nt = grid.n_time();
        let r0 = b.rho0.data();
        let r1 = b.rho1.data();
        for j in 0..=nt {
            let s = j as f64 / nt as f64;
            for (x, (a, c)) in u.rho.slice_mut(j).iter_mut().zip(r0.iter().zip(r1)) {
                *x = (1.0 - s) * a + s * c;
            }
        }
        for j in 0..nt {
            for (x, (a, c)) in u.zeta.slice_mut(j).iter_mut().zip(r0.iter().zip(r1)) {
                *x = c - a;
            }
        }
        u
    }

    pub fn check_shape(&self, grid: &GridSpec) -> Result<(), GridError> {
        self.rho.check("staggered rho", grid.time_staggered_shape())?;
        if self.m.len() != grid.dims() {
            return Err(GridError::InvalidGrid(format!(
                "{} momentum components for a {}-dimensional grid",
                self.m.len(),
                grid.dims()
            )));
        }
        for (k, m) in self.m.iter().enumerate() {
            m.check("staggered momentum", grid.space_staggered_shape(k))?;
        }
        self.zeta.check("staggered source", grid.centered_shape())
    }

    pub fn fields(&self) -> impl Iterator<Item = &Field> {
        std::iter::once(&self.rho).chain(self.m.iter()).chain(std::iter::once(&self.zeta))
    }

    pub fn fields_mut(&mut self) -> impl Iterator<Item = &mut Field> {
        std::iter::once(&mut self.rho)
            .chain(self.m.iter_mut())
            .chain(std::iter::once(&mut self.zeta))
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.fields().zip(other.fields()).map(|(a, b)| a.dot(b)).sum()
    }

    pub fn axpy(&mut self, a: f64, other: &Self) {
        for (x, y) in self.fields_mut().zip(other.fields()) {
            x.axpy(a, y);
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.fields_mut().for_each(|f| f.scale(a));
    }

    pub fn is_finite(&self) -> bool {
        self.fields().all(Field::is_finite)
    }
}

/// Endpoint densities on the spatial centered grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub rho0: Field,
    pub rho1: Field,
}

impl BoundaryData {
    pub fn new(grid: &GridSpec, rho0: Vec<f64>, rho1: Vec<f64>) -> Result<Self, GridError> {
        let shape = grid.spatial_shape();
        let rho0 = Field::from_vec(shape, rho0)?;
        let rho1 = Field::from_vec(shape, rho1)?;
        let b = Self { rho0, rho1 };
        b.validate(grid)?;
        Ok(b)
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<(), GridError> {
        let shape = grid.spatial_shape();
        self.rho0.check("rho0", shape)?;
        self.rho1.check("rho1", shape)?;
        for (name, f) in [("rho0", &self.rho0), ("rho1", &self.rho1)] {
            if let Some(v) = f.data().iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return Err(GridError::InvalidBoundary(format!(
                    "{name} has a negative or non-finite value {v}"
                )));
            }
        }
        Ok(())
    }

    /// Total masses `(rho0(Omega), rho1(Omega))`.
    pub fn masses(&self, grid: &GridSpec) -> (f64, f64) {
        let v = grid.spatial_cell_volume();
        (self.rho0.sum() * v, self.rho1.sum() * v)
    }
}

/// Midpoint interpolation from the staggered to the centered grid; the source
/// passes through unchanged.
pub fn interpolate(grid: &GridSpec, u: &StaggeredTriplet) -> Result<CenteredTriplet, GridError> {
    u.check_shape(grid)?;
    Ok(interpolate_unchecked(u))
}

pub(crate) fn interpolate_unchecked(u: &StaggeredTriplet) -> CenteredTriplet {
    CenteredTriplet {
        rho: average_along(&u.rho, 0),
        m: u.m.iter().enumerate().map(|(k, m)| average_along(m, k + 1)).collect(),
        zeta: u.zeta.clone(),
    }
}

/// Exact transpose of [`interpolate`] for the unweighted inner products.
pub fn interpolate_adjoint(grid: &GridSpec, v: &CenteredTriplet) -> Result<StaggeredTriplet, GridError> {
    v.check_shape(grid)?;
    Ok(interpolate_adjoint_unchecked(v))
}

pub(crate) fn interpolate_adjoint_unchecked(v: &CenteredTriplet) -> StaggeredTriplet {
    StaggeredTriplet {
        rho: average_along_adjoint(&v.rho, 0),
        m: v.m.iter().enumerate().map(|(k, m)| average_along_adjoint(m, k + 1)).collect(),
        zeta: v.zeta.clone(),
    }
}

/// Space-time divergence of `(rho_bar, m_bar)`, on the centered grid.
pub fn divergence(grid: &GridSpec, u: &StaggeredTriplet) -> Result<Field, GridError> {
    u.check_shape(grid)?;
    Ok(divergence_unchecked(grid, u))
}

pub(crate) fn divergence_unchecked(grid: &GridSpec, u: &StaggeredTriplet) -> Field {
    let mut out = Field::zeros(grid.centered_shape());
    add_difference_along(&mut out, &u.rho, 0, grid.n_time() as f64);
    for (k, m) in u.m.iter().enumerate() {
        add_difference_along(&mut out, m, k + 1, grid.inv_step(k));
    }
    out
}

/// Transpose of the divergence, returned as `(rho_bar, m_bar)` parts.
pub(crate) fn divergence_adjoint(grid: &GridSpec, p: &Field) -> (Field, Vec<Field>) {
    let rho = difference_along_adjoint(p, 0, grid.n_time() as f64);
    let m = (0..grid.dims())
        .map(|k| difference_along_adjoint(p, k + 1, grid.inv_step(k)))
        .collect();
    (rho, m)
}

#[derive(Debug, Clone)]
pub struct ContinuityResidual {
    /// `div(U) - zeta_bar` per centered cell.
    pub interior: Field,
    /// Max-norm mismatch of endpoint slices and wall-normal momentum.
    pub boundary: f64,
}

impl ContinuityResidual {
    pub fn max_norm(&self) -> f64 {
        self.interior.max_abs().max(self.boundary)
    }
}

pub fn continuity_residual(
    grid: &GridSpec,
    u: &StaggeredTriplet,
    b: &BoundaryData,
) -> Result<ContinuityResidual, GridError> {
    u.check_shape(grid)?;
    b.validate(grid)?;
    Ok(continuity_residual_unchecked(grid, u, b))
}

pub(crate) fn continuity_residual_unchecked(
    grid: &GridSpec,
    u: &StaggeredTriplet,
    b: &BoundaryData,
) -> ContinuityResidual {
    let mut interior = divergence_unchecked(grid, u);
    interior.axpy(-1.0, &u.zeta);
    let nt = grid.n_time();
    let mut boundary = 0.0f64;
    for (x, y) in u.rho.slice(0).iter().zip(b.rho0.data()) {
        boundary = boundary.max((x - y).abs());
    }
    for (x, y) in u.rho.slice(nt).iter().zip(b.rho1.data()) {
        boundary = boundary.max((x - y).abs());
    }
    for (k, m) in u.m.iter().enumerate() {
        for_each_line(m.shape(), k + 1, |base, stride, len| {
            boundary = boundary
                .max(m.data()[base].abs())
                .max(m.data()[base + (len - 1) * stride].abs());
        });
    }
    ContinuityResidual { interior, boundary }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(rng: &mut ChaCha8Rng, shape: [usize; 3]) -> Field {
        Field::from_fn(shape, |_, _, _| rng.gen_range(-1.0..1.0))
    }

    fn random_staggered(rng: &mut ChaCha8Rng, g: &GridSpec) -> StaggeredTriplet {
        StaggeredTriplet {
            rho: random_field(rng, g.time_staggered_shape()),
            m: (0..g.dims()).map(|k| random_field(rng, g.space_staggered_shape(k))).collect(),
            zeta: random_field(rng, g.centered_shape()),
        }
    }

    fn random_centered(rng: &mut ChaCha8Rng, g: &GridSpec) -> CenteredTriplet {
        let s = g.centered_shape();
        CenteredTriplet {
            rho: random_field(rng, s),
            m: (0..g.dims()).map(|_| random_field(rng, s)).collect(),
            zeta: random_field(rng, s),
        }
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(GridSpec::line(1.0, 1, 4).is_err());
        assert!(GridSpec::line(0.0, 4, 4).is_err());
        assert!(GridSpec::line(1.0, 4, 1).is_err());
        assert!(GridSpec::new(vec![1.0; 3], vec![4; 3], 4).is_err());
        let g = GridSpec::plane([1.0, 2.0], [3, 5], 4).unwrap();
        assert_eq!(g.centered_shape(), [4, 3, 5]);
        assert_eq!(g.time_staggered_shape(), [5, 3, 5]);
        assert_eq!(g.space_staggered_shape(0), [4, 4, 5]);
        assert_eq!(g.space_staggered_shape(1), [4, 3, 6]);
    }

    #[test]
    fn coordinates_are_cell_centers() {
        let g = GridSpec::line(2.0, 4, 5).unwrap();
        assert_eq!(g.cell_center(0, 0), 0.25);
        assert_eq!(g.cell_center(0, 3), 1.75);
        assert_eq!(g.time_center(0), 0.1);
        assert_eq!(g.time_node(5), 1.0);
    }

    #[test]
    fn constants_are_fixed_by_interpolation() {
        let g = GridSpec::plane([1.0, 1.0], [3, 4], 5).unwrap();
        let mut u = StaggeredTriplet::zeros(&g);
        u.rho = Field::constant(g.time_staggered_shape(), 3.0);
        for (k, m) in u.m.iter_mut().enumerate() {
            *m = Field::constant(g.space_staggered_shape(k), 1.0);
        }
        let v = interpolate(&g, &u).unwrap();
        assert!(v.rho.data().iter().all(|x| *x == 3.0));
        assert!(v.m.iter().all(|m| m.data().iter().all(|x| *x == 1.0)));
        assert!(v.zeta.data().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn interpolation_averages_time_slices() {
        let g = GridSpec::line(1.0, 2, 2).unwrap();
        let mut u = StaggeredTriplet::zeros(&g);
        for i in 0..2 {
            u.rho.set(0, i, 0, 1.0);
            u.rho.set(1, i, 0, 3.0);
        }
        let v = interpolate(&g, &u).unwrap();
        assert_eq!(v.rho.get(0, 0, 0), 2.0);
        assert_eq!(v.rho.get(0, 1, 0), 2.0);
        let zero = interpolate(&g, &StaggeredTriplet::zeros(&g)).unwrap();
        assert_eq!(zero, CenteredTriplet::zeros(&g));
    }

    #[test]
    fn interpolation_adjoint_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for g in [
            GridSpec::line(1.3, 7, 5).unwrap(),
            GridSpec::plane([1.0, 0.5], [4, 6], 3).unwrap(),
        ] {
            for _ in 0..20 {
                let u = random_staggered(&mut rng, &g);
                let v = random_centered(&mut rng, &g);
                let lhs = interpolate(&g, &u).unwrap().dot(&v);
                let rhs = u.dot(&interpolate_adjoint(&g, &v).unwrap());
                assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn interpolation_adjoint_of_impulse_splits_in_half() {
        let g = GridSpec::line(1.0, 4, 4).unwrap();
        let mut v = CenteredTriplet::zeros(&g);
        v.rho.set(2, 1, 0, 1.0);
        let u = interpolate_adjoint(&g, &v).unwrap();
        assert_eq!(u.rho.get(2, 1, 0), 0.5);
        assert_eq!(u.rho.get(3, 1, 0), 0.5);
        assert_eq!(u.rho.sum(), 1.0);
        assert_eq!(interpolate_adjoint(&g, &CenteredTriplet::zeros(&g)).unwrap(), StaggeredTriplet::zeros(&g));
    }

    #[test]
    fn divergence_of_constant_is_zero() {
        let g = GridSpec::plane([1.0, 2.0], [3, 3], 4).unwrap();
        let mut u = StaggeredTriplet::zeros(&g);
        u.rho = Field::constant(g.time_staggered_shape(), 2.5);
        for (k, m) in u.m.iter_mut().enumerate() {
            *m = Field::constant(g.space_staggered_shape(k), -1.5);
        }
        assert_eq!(divergence(&g, &u).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn divergence_hand_stencil() {
        let g = GridSpec::line(1.0, 2, 2).unwrap();
        let mut u = StaggeredTriplet::zeros(&g);
        u.rho = Field::constant(g.time_staggered_shape(), 1.0);
        for t in 0..2 {
            u.m[0].set(t, 1, 0, 1.0);
        }
        let d = divergence(&g, &u).unwrap();
        for t in 0..2 {
            assert_eq!(d.get(t, 0, 0), 2.0);
            assert_eq!(d.get(t, 1, 0), -2.0);
        }
    }

    #[test]
    fn divergence_of_linear_in_time_density() {
        let g = GridSpec::line(1.0, 3, 6).unwrap();
        let slope = 0.7;
        let mut u = StaggeredTriplet::zeros(&g);
        u.rho = Field::from_fn(g.time_staggered_shape(), |t, _, _| 1.0 + slope * g.time_node(t));
        let d = divergence(&g, &u).unwrap();
        assert!(d.data().iter().all(|x| (x - slope).abs() < 1e-12));
    }

    #[test]
    fn divergence_adjoint_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = GridSpec::plane([0.7, 1.9], [5, 4], 6).unwrap();
        for _ in 0..10 {
            let u = random_staggered(&mut rng, &g);
            let p = random_field(&mut rng, g.centered_shape());
            let lhs = divergence(&g, &u).unwrap().dot(&p);
            let (r, m) = divergence_adjoint(&g, &p);
            let rhs = r.dot(&u.rho) + m.iter().zip(&u.m).map(|(a, b)| a.dot(b)).sum::<f64>();
            assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn stencil_locality() {
        let g = GridSpec::plane([1.0, 1.0], [4, 4], 4).unwrap();
        let mut u = StaggeredTriplet::zeros(&g);
        u.m[1].set(1, 2, 2, 1.0);
        let d = divergence(&g, &u).unwrap();
        let nonzero = d.data().iter().filter(|x| **x != 0.0).count();
        assert_eq!(nonzero, 2);
        assert!(d.get(1, 2, 1) > 0.0 && d.get(1, 2, 2) < 0.0);
    }

    #[test]
    fn linear_interpolation_is_feasible() {
        let g = GridSpec::line(1.0, 5, 4).unwrap();
        let b = BoundaryData::new(&g, vec![1.0, 2.0, 0.0, 0.5, 3.0], vec![0.0, 1.0, 4.0, 0.5, 1.0]).unwrap();
        let u = StaggeredTriplet::linear_interpolation(&g, &b);
        // zeta_bar = T * (rho1 - rho0) / T per step
        let r = continuity_residual(&g, &u, &b).unwrap();
        assert!(r.max_norm() < 1e-12, "{}", r.max_norm());
    }

    #[test]
    fn zero_field_boundary_residual_is_max_rho0() {
        let g = GridSpec::line(1.0, 3, 3).unwrap();
        let b = BoundaryData::new(&g, vec![0.5, 2.0, 1.0], vec![0.0; 3]).unwrap();
        let r = continuity_residual(&g, &StaggeredTriplet::zeros(&g), &b).unwrap();
        assert_eq!(r.boundary, 2.0);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let g = GridSpec::line(1.0, 3, 3).unwrap();
        let h = GridSpec::line(1.0, 4, 3).unwrap();
        let u = StaggeredTriplet::zeros(&h);
        assert!(matches!(interpolate(&g, &u), Err(GridError::ShapeMismatch { .. })));
        assert!(divergence(&g, &u).is_err());
        assert!(BoundaryData::new(&g, vec![1.0; 4], vec![1.0; 3]).is_err());
        assert!(BoundaryData::new(&g, vec![-1.0; 3], vec![1.0; 3]).is_err());
    }

    #[test]
    fn operators_are_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = GridSpec::plane([1.0, 1.0], [3, 4], 3).unwrap();
        let u1 = random_staggered(&mut rng, &g);
        let u2 = random_staggered(&mut rng, &g);
        let (a, b) = (0.3, -1.7);
        let mut comb = u1.clone();
        comb.scale(a);
        comb.axpy(b, &u2);
        let mut expect = interpolate(&g, &u1).unwrap();
        expect.scale(a);
        expect.axpy(b, &interpolate(&g, &u2).unwrap());
        let mut got = interpolate(&g, &comb).unwrap();
        got.axpy(-1.0, &expect);
        assert!(got.fields().all(|f| f.max_abs() < 1e-14));
        let mut d = divergence(&g, &comb).unwrap();
        d.axpy(-a, &divergence(&g, &u1).unwrap());
        d.axpy(-b, &divergence(&g, &u2).unwrap());
        assert!(d.max_abs() < 1e-12);
    }
}
