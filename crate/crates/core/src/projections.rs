//! Euclidean projections onto the discrete continuity constraint and onto the
//! graph of the interpolation operator.

use std::sync::Arc;

use rustdct::{DctPlanner, TransformType2And3};
use thiserror::Error;

use crate::grids::{
    continuity_residual_unchecked, divergence_adjoint, divergence_unchecked, for_each_line,
    interpolate_adjoint_unchecked, interpolate_unchecked, BoundaryData, CenteredTriplet, Field,
    GridError, GridSpec, StaggeredTriplet,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjectionError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("cache was built for a different grid")]
    CacheMismatch,
    #[error("continuity residual {residual:e} after projection exceeds {limit:e}")]
    ResidualTooLarge { residual: f64, limit: f64 },
    #[error("calibrated {axis} coefficient {measured} disagrees with stencil value {expected}")]
    SymbolCalibration {
        axis: &'static str,
        measured: f64,
        expected: f64,
    },
}

/// DCT-II/III plans for every non-trivial axis of a `(time, axis0, axis1)` block.
#[derive(Clone)]
pub struct Dct3d {
    shape: [usize; 3],
    plans: [Option<Arc<dyn TransformType2And3<f64>>>; 3],
}

impl std::fmt::Debug for Dct3d {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dct3d").field("shape", &self.shape).finish()
    }
}

impl Dct3d {
    pub fn new(shape: [usize; 3]) -> Self {
        let mut planner = DctPlanner::new();
        let plans = shape.map(|n| (n > 1).then(|| planner.plan_dct2(n)));
        Self { shape, plans }
    }

    fn apply(&self, field: &mut Field, inverse: bool) {
        assert_eq!(field.shape(), self.shape, "DCT plan/field shape mismatch");
        let mut line = Vec::new();
        for (axis, plan) in self.plans.iter().enumerate() {
            let Some(plan) = plan else { continue };
            let n = self.shape[axis];
            let norm = 2.0 / n as f64;
            let data = field.data_mut();
            for_each_line(self.shape, axis, |base, stride, len| {
                line.clear();
                line.extend((0..len).map(|i| data[base + i * stride]));
                if inverse {
                    plan.process_dct3(&mut line);
                    line.iter_mut().for_each(|x| *x *= norm);
                } else {
                    plan.process_dct2(&mut line);
                }
                for (i, x) in line.iter().enumerate() {
                    data[base + i * stride] = *x;
                }
            });
        }
    }

    /// Unnormalized DCT-II along every axis:
    /// `c[k] = sum_n u[n] cos(pi (n + 1/2) k / N)`.
    pub fn forward(&self, field: &mut Field) {
        self.apply(field, false);
    }

    /// Inverse of [`Dct3d::forward`] (DCT-III scaled by `2 / N` per axis).
    pub fn inverse(&self, field: &mut Field) {
        self.apply(field, true);
    }
}

pub fn dct2_forward(field: &Field) -> Field {
    let mut out = field.clone();
    Dct3d::new(field.shape()).forward(&mut out);
    out
}

pub fn dct3_inverse(coefficients: &Field) -> Field {
    let mut out = coefficients.clone();
    Dct3d::new(coefficients.shape()).inverse(&mut out);
    out
}

/// Sets the endpoint density slices and zeroes wall-normal momentum.
pub(crate) fn apply_boundary(grid: &GridSpec, u: &mut StaggeredTriplet, b: &BoundaryData) {
    let nt = grid.n_time();
    u.rho.slice_mut(0).copy_from_slice(b.rho0.data());
    u.rho.slice_mut(nt).copy_from_slice(b.rho1.data());
    for (k, m) in u.m.iter_mut().enumerate() {
        let shape = m.shape();
        let data = m.data_mut();
        for_each_line(shape, k + 1, |base, stride, len| {
            data[base] = 0.0;
            data[base + (len - 1) * stride] = 0.0;
        });
    }
}

/// Zeroes the boundary entries that [`apply_boundary`] pins.
fn mask_boundary(grid: &GridSpec, rho: &mut Field, m: &mut [Field]) {
    let nt = grid.n_time();
    rho.slice_mut(0).iter_mut().for_each(|x| *x = 0.0);
    rho.slice_mut(nt).iter_mut().for_each(|x| *x = 0.0);
    for (k, mk) in m.iter_mut().enumerate() {
        let shape = mk.shape();
        let data = mk.data_mut();
        for_each_line(shape, k + 1, |base, stride, len| {
            data[base] = 0.0;
            data[base + (len - 1) * stride] = 0.0;
        });
    }
}

/// Applies `S u = u + D_f D_f^* u`, where `D_f` is the divergence restricted
/// to the free (non-boundary) staggered unknowns.
fn apply_schur(grid: &GridSpec, u: &Field) -> Field {
    let (mut rho, mut m) = divergence_adjoint(grid, u);
    mask_boundary(grid, &mut rho, &mut m);
    let tmp = StaggeredTriplet {
        rho,
        m,
        zeta: Field::zeros(grid.centered_shape()),
    };
    let mut out = divergence_unchecked(grid, &tmp);
    out.axpy(1.0, u);
    out
}

/// Multiplier of the Schur complement in the DCT-II basis, with per-axis
/// coefficients calibrated on the implemented stencils.
#[derive(Debug, Clone)]
pub struct ContinuitySolverCache {
    grid: GridSpec,
    /// `[c_t, c_0, c_1]`; the symbol is `1 + sum_a c_a (2 - 2 cos(pi k_a / n_a))`.
    coefficients: [f64; 3],
    symbol: Field,
    dct: Dct3d,
}

impl ContinuitySolverCache {
    pub fn new(grid: &GridSpec) -> Result<Self, ProjectionError> {
        let shape = grid.centered_shape();
        let mut coefficients = [0.0; 3];
        let names = ["time", "axis 0", "axis 1"];
        for axis in 0..3 {
            let n = shape[axis];
            if n < 2 {
                continue;
            }
            let expected = if axis == 0 {
                (grid.n_time() as f64).powi(2)
            } else {
                grid.inv_step(axis - 1).powi(2)
            };
            let measured = calibrate_axis(grid, axis);
            if (measured - expected).abs() > 1e-8 * expected {
                return Err(ProjectionError::SymbolCalibration {
                    axis: names[axis],
                    measured,
                    expected,
                });
            }
            coefficients[axis] = measured;
        }
        let eig = |axis: usize, k: usize| {
            let n = shape[axis];
            if n < 2 {
                0.0
            } else {
                coefficients[axis] * (2.0 - 2.0 * (std::f64::consts::PI * k as f64 / n as f64).cos())
            }
        };
        let symbol = Field::from_fn(shape, |t, i, j| 1.0 + eig(0, t) + eig(1, i) + eig(2, j));
        Ok(Self {
            grid: grid.clone(),
            coefficients,
            symbol,
            dct: Dct3d::new(shape),
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn coefficients(&self) -> [f64; 3] {
        self.coefficients
    }

    pub fn symbol(&self) -> &Field {
        &self.symbol
    }

    /// Solves `S u = p` with the DCT diagonalization.
    pub fn solve(&self, p: &Field) -> Field {
        let mut u = p.clone();
        self.dct.forward(&mut u);
        for (x, s) in u.data_mut().iter_mut().zip(self.symbol.data()) {
            *x /= s;
        }
        self.dct.inverse(&mut u);
        u
    }

    /// Applies the Schur complement directly (for reference solves).
    pub fn apply_schur(&self, u: &Field) -> Field {
        apply_schur(&self.grid, u)
    }
}

/// Rayleigh quotient of `S` on the first DCT mode along `axis`, mapped back to
/// the coefficient in front of `2 - 2 cos(pi / n)`.
fn calibrate_axis(grid: &GridSpec, axis: usize) -> f64 {
    let shape = grid.centered_shape();
    let n = shape[axis];
    let mode = Field::from_fn(shape, |t, i, j| {
        let idx = [t, i, j][axis];
        (std::f64::consts::PI * (idx as f64 + 0.5) / n as f64).cos()
    });
    let s_mode = apply_schur(grid, &mode);
    let lambda = s_mode.dot(&mode) / mode.dot(&mode);
    (lambda - 1.0) / (2.0 - 2.0 * (std::f64::consts::PI / n as f64).cos())
}

/// Projection onto `{div U = zeta_bar, boundary slices = (rho0, rho1), zero
/// wall-normal momentum}`.
pub fn project_continuity(
    u: &StaggeredTriplet,
    b: &BoundaryData,
    cache: &ContinuitySolverCache,
) -> Result<StaggeredTriplet, ProjectionError> {
    let grid = cache.grid();
    u.check_shape(grid)?;
    b.validate(grid)?;
    let mut out = u.clone();
    let before = project_continuity_in_place(&mut out, b, cache);
    let residual = continuity_residual_unchecked(grid, &out, b).max_norm();
    let limit = 1e-6 * before.max(1.0);
    if !(residual <= limit) {
        return Err(ProjectionError::ResidualTooLarge { residual, limit });
    }
    Ok(out)
}

/// Returns the max-norm of the interior residual before the correction.
pub(crate) fn project_continuity_in_place(
    u: &mut StaggeredTriplet,
    b: &BoundaryData,
    cache: &ContinuitySolverCache,
) -> f64 {
    let grid = cache.grid();
    apply_boundary(grid, u, b);
    let mut r = divergence_unchecked(grid, u);
    r.axpy(-1.0, &u.zeta);
    let before = r.max_abs();
    let w = cache.solve(&r);
    let (mut rho, mut m) = divergence_adjoint(grid, &w);
    mask_boundary(grid, &mut rho, &mut m);
    u.rho.axpy(-1.0, &rho);
    for (mk, dk) in u.m.iter_mut().zip(&m) {
        mk.axpy(-1.0, dk);
    }
    u.zeta.axpy(1.0, &w);
    before
}

/// Precomputed LU factors of the tridiagonal `Id + A^T A` for midpoint
/// averaging `A` on a line of `n` nodes.
#[derive(Debug, Clone)]
struct Tridiagonal {
    /// Modified super-diagonal of the Thomas sweep.
    upper: Vec<f64>,
    /// Reciprocal pivots.
    inv_pivot: Vec<f64>,
}

const OFF_DIAGONAL: f64 = 0.25;

impl Tridiagonal {
    fn averaging_normal(n: usize) -> Self {
        let diag = |i: usize| if i == 0 || i + 1 == n { 1.25 } else { 1.5 };
        let mut upper = vec![0.0; n];
        let mut inv_pivot = vec![0.0; n];
        let mut prev_upper = 0.0;
        for i in 0..n {
            let pivot = diag(i) - OFF_DIAGONAL * prev_upper;
            inv_pivot[i] = 1.0 / pivot;
            prev_upper = if i + 1 < n { OFF_DIAGONAL / pivot } else { 0.0 };
            upper[i] = prev_upper;
        }
        Self { upper, inv_pivot }
    }

    fn solve_line(&self, data: &mut [f64], base: usize, stride: usize) {
        let n = self.upper.len();
        let mut prev = 0.0;
        for i in 0..n {
            let k = base + i * stride;
            let v = (data[k] - OFF_DIAGONAL * prev) * self.inv_pivot[i];
            data[k] = v;
            prev = v;
        }
        for i in (0..n - 1).rev() {
            let k = base + i * stride;
            data[k] -= self.upper[i] * data[k + stride];
        }
    }

    fn solve_along(&self, field: &mut Field, axis: usize) {
        let shape = field.shape();
        let data = field.data_mut();
        for_each_line(shape, axis, |base, stride, _| self.solve_line(data, base, stride));
    }
}

/// Factorizations of `Q = Id + I^* I` per staggered component.
#[derive(Debug, Clone)]
pub struct InterpolationSolverCache {
    grid: GridSpec,
    rho: Tridiagonal,
    m: Vec<Tridiagonal>,
}

impl InterpolationSolverCache {
    pub fn new(grid: &GridSpec) -> Self {
        Self {
            grid: grid.clone(),
            rho: Tridiagonal::averaging_normal(grid.n_time() + 1),
            m: (0..grid.dims())
                .map(|k| Tridiagonal::averaging_normal(grid.n_space()[k] + 1))
                .collect(),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// `Q^{-1} u` in place.
    pub fn solve_in_place(&self, u: &mut StaggeredTriplet) {
        self.rho.solve_along(&mut u.rho, 0);
        for (k, (mk, tri)) in u.m.iter_mut().zip(&self.m).enumerate() {
            tri.solve_along(mk, k + 1);
        }
        u.zeta.scale(0.5);
    }

    /// `Q u = u + I^* I u`.
    pub fn apply_q(&self, u: &StaggeredTriplet) -> StaggeredTriplet {
        let mut out = interpolate_adjoint_unchecked(&interpolate_unchecked(u));
        out.axpy(1.0, u);
        out
    }
}

/// Projection of `(U0, V0)` onto the graph `{V = I(U)}`.
pub fn project_interpolation(
    u0: &StaggeredTriplet,
    v0: &CenteredTriplet,
    cache: &InterpolationSolverCache,
) -> Result<(StaggeredTriplet, CenteredTriplet), ProjectionError> {
    let grid = cache.grid();
    u0.check_shape(grid)?;
    v0.check_shape(grid)?;
    Ok(project_interpolation_unchecked(u0, v0, cache))
}

pub(crate) fn project_interpolation_unchecked(
    u0: &StaggeredTriplet,
    v0: &CenteredTriplet,
    cache: &InterpolationSolverCache,
) -> (StaggeredTriplet, CenteredTriplet) {
    let mut u = interpolate_adjoint_unchecked(v0);
    u.axpy(1.0, u0);
    cache.solve_in_place(&mut u);
    let v = interpolate_unchecked(&u);
    (u, v)
}
