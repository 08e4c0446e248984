//! Douglas-Rachford driver for discrete geodesics.
//!
//! The problem is split as `G1(U, V) = indicator(div U = zeta, boundary) + E(V)`
//! and `G2(U, V) = indicator(V = I(U))`; both have cheap proximal maps
//! (see [`crate::projections`] and [`crate::action`]).
//!
//! Internally every model is solved in the chart `x' = x / delta`,
//! `m' = m / delta`, where the integrand becomes `delta^2` times its
//! `delta = 1` version. This keeps the prox step size meaningful across
//! `delta` and makes the mass and space scaling laws exact at the discrete
//! level. Results are returned in the original units.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{cell_energy, energy_sum, prox_cells, ModelError, ModelKind, ModelSpec};
use crate::grids::{
    interpolate_unchecked, BoundaryData, CenteredTriplet, Field, GridError, GridSpec,
    StaggeredTriplet,
};
use crate::projections::{
    project_continuity_in_place, project_interpolation_unchecked, ContinuitySolverCache,
    InterpolationSolverCache, ProjectionError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Analytic(#[from] crate::analytic::AnalyticError),
    #[error("relaxation alpha must lie in (0, 2), got {0}")]
    InvalidAlpha(f64),
    #[error("max_iters must be positive")]
    NoIterations,
    #[error("tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),
    #[error("energy became non-finite at iteration {iteration}")]
    NonFiniteEnergy { iteration: usize },
    #[error("balanced transport needs equal masses, got {m0} and {m1}")]
    UnequalMasses { m0: f64, m1: f64 },
    #[error("certificate leaves the admissible set by {violation:e} at t = {t}, x = {x:?}")]
    CertificateViolation { violation: f64, t: f64, x: Vec<f64> },
}

/// Default prox step, in units of the typical endpoint density divided by the
/// largest domain length measured in the internal chart.
pub const DEFAULT_GAMMA_FACTOR: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub grid: GridSpec,
    pub model: ModelSpec,
    /// Prox step. `None` picks [`SolverConfig::default_gamma`].
    pub gamma: Option<f64>,
    pub alpha: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl SolverConfig {
    pub fn new(grid: GridSpec, model: ModelSpec) -> Self {
        Self {
            grid,
            model,
            gamma: None,
            alpha: 1.8,
            max_iters: 4000,
            tol: 1e-6,
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = Some(gamma);
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_max_iters(mut self, n: usize) -> Self {
        self.max_iters = n;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        self.model.validate()?;
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(SolverError::InvalidAlpha(self.alpha));
        }
        if self.max_iters == 0 {
            return Err(SolverError::NoIterations);
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(SolverError::InvalidTolerance(self.tol));
        }
        if let Some(g) = self.gamma {
            crate::action::ProxParams::new(g)?;
        }
        Ok(())
    }

    /// Step used when `gamma` is unset: `DEFAULT_GAMMA_FACTOR * density *
    /// scale / L`, where `density` is [`typical_density`]. Scales linearly
    /// with mass and is unchanged by stretching space together with `delta`.
    pub fn default_gamma(&self, density: f64) -> f64 {
        let reach = self.grid.lengths().iter().fold(0.0f64, |m, l| m.max(*l)) / self.chart_scale();
        DEFAULT_GAMMA_FACTOR * density / reach
    }

    /// Length scale of the internal chart (1 for balanced transport).
    fn chart_scale(&self) -> f64 {
        match self.model.kind {
            ModelKind::BalancedW2 => 1.0,
            _ => self.model.delta,
        }
    }
}

/// Window (in iterations) of the relative energy change used for stopping.
pub const ENERGY_WINDOW: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub iterations_run: usize,
    pub energy_trace: Vec<f64>,
    /// Per iteration, the larger of the continuity and interpolation residuals.
    pub residual_trace: Vec<f64>,
    pub continuity_residual: f64,
    pub interpolation_residual: f64,
    /// Final discrete action, which approximates the squared distance.
    pub distance_squared: f64,
    pub gamma: f64,
    pub converged: bool,
}

impl SolverReport {
    pub fn distance(&self) -> f64 {
        self.distance_squared.max(0.0).sqrt()
    }
}

/// Discrete geodesic in the original units.
#[derive(Debug, Clone)]
pub struct GeodesicResult {
    pub grid: GridSpec,
    pub model: ModelSpec,
    pub boundary: BoundaryData,
    /// Densities on the `T + 1` time nodes and momenta on spatial faces.
    pub staggered: StaggeredTriplet,
    /// Cell-centered `(rho, m, zeta)` on the `T` time cells.
    pub centered: CenteredTriplet,
    pub report: SolverReport,
}

impl GeodesicResult {
    pub fn distance_squared(&self) -> f64 {
        self.report.distance_squared
    }

    pub fn distance(&self) -> f64 {
        self.report.distance()
    }

    /// Density at time node `j` (time `j / T`).
    pub fn density_at_node(&self, j: usize) -> &[f64] {
        self.staggered.rho.slice(j)
    }

    /// Density at time `t`, linear in time between nodes.
    pub fn density_at(&self, t: f64) -> Vec<f64> {
        sample_in_time(&self.staggered.rho, t, |j| self.grid.time_node(j))
    }

    /// Centered momentum component `k` at time `t`, linear between cell centers.
    pub fn momentum_at(&self, k: usize, t: f64) -> Vec<f64> {
        sample_in_time(&self.centered.m[k], t, |j| self.grid.time_center(j))
    }

    pub fn source_at(&self, t: f64) -> Vec<f64> {
        sample_in_time(&self.centered.zeta, t, |j| self.grid.time_center(j))
    }

    /// Total mass at each time node.
    pub fn mass_trace(&self) -> Vec<f64> {
        let vol = self.grid.spatial_cell_volume();
        (0..=self.grid.n_time())
            .map(|j| vol * self.staggered.rho.slice(j).iter().sum::<f64>())
            .collect()
    }

    /// Most negative density over all time nodes (0 if none).
    pub fn min_density(&self) -> f64 {
        self.staggered.rho.data().iter().fold(0.0, |m, v| m.min(*v))
    }
}

/// Samples a time-indexed field at `t` with linear interpolation between the
/// slices located at `time(j)`; clamps outside the covered range.
pub fn sample_in_time(field: &Field, t: f64, time: impl Fn(usize) -> f64) -> Vec<f64> {
    let n = field.shape()[0];
    if n == 1 || t <= time(0) {
        return field.slice(0).to_vec();
    }
    if t >= time(n - 1) {
        return field.slice(n - 1).to_vec();
    }
    let mut j = 0;
    while j + 2 < n && time(j + 1) <= t {
        j += 1;
    }
    let (t0, t1) = (time(j), time(j + 1));
    let s = (t - t0) / (t1 - t0);
    field
        .slice(j)
        .iter()
        .zip(field.slice(j + 1))
        .map(|(a, b)| (1.0 - s) * a + s * b)
        .collect()
}

/// Mass-weighted average density `sum rho^2 / sum rho` of both endpoints,
/// which tracks the density where the mass actually sits (0 for empty
/// endpoints).
pub fn typical_density(b: &BoundaryData) -> f64 {
    let (mut s1, mut s2) = (0.0, 0.0);
    for v in b.rho0.data().iter().chain(b.rho1.data()) {
        s1 += v;
        s2 += v * v;
    }
    if s1 > 0.0 {
        s2 / s1
    } else {
        0.0
    }
}

fn max_abs_diff(a: &Field, b: &Field) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Runs Douglas-Rachford from the linear interpolation of the endpoints.
pub fn dr_solve(b: &BoundaryData, cfg: &SolverConfig) -> Result<GeodesicResult, SolverError> {
    cfg.validate()?;
    let grid = &cfg.grid;
    b.validate(grid)?;
    let (m0, m1) = b.masses(grid);
    if cfg.model.kind == ModelKind::BalancedW2 && (m0 - m1).abs() > 1e-9 * m0.max(m1).max(1e-300) {
        return Err(SolverError::UnequalMasses { m0, m1 });
    }
    let kind = cfg.model.kind;
    let scale = cfg.chart_scale();
    let chart = grid.stretched(1.0 / scale);
    let ccache = ContinuitySolverCache::new(&chart)?;
    let icache = InterpolationSolverCache::new(&chart);

    let domain = grid.domain_volume();
    let mean_density = 0.5 * (m0 + m1) / domain;
    let rho_scale = if mean_density > 0.0 { mean_density } else { 1.0 };
    let typical = typical_density(b);
    let gamma = cfg
        .gamma
        .unwrap_or_else(|| cfg.default_gamma(if typical > 0.0 { typical } else { 1.0 }));
    let energy_factor = grid.cell_volume() * scale * scale;
    // Energies below this are treated as zero by the stopping rule: a fraction
    // of the cost of destroying and recreating all mass (or of moving it across
    // the domain for balanced transport).
    let reach = match kind {
        ModelKind::BalancedW2 => grid.lengths().iter().fold(0.0f64, |m, l| m.max(*l)),
        _ => scale,
    };
    let energy_floor = 1e-8 * (m0 + m1) * reach * reach;

    let mut w_u = StaggeredTriplet::linear_interpolation(&chart, b);
    if kind == ModelKind::BalancedW2 {
        w_u.zeta.scale(0.0);
    }
    let mut w_v = interpolate_unchecked(&w_u);
    let mut z_u = w_u.clone();
    let mut z_v = w_v.clone();

    let mut energy_trace = Vec::with_capacity(cfg.max_iters);
    let mut residual_trace = Vec::with_capacity(cfg.max_iters);
    let mut continuity = f64::INFINITY;
    let mut interpolation = f64::INFINITY;
    let mut converged = false;

    let mut p_u = z_u.clone();
    let mut p_v = z_v.clone();
    for it in 0..cfg.max_iters {
        // Reflected point 2z - w, then prox of G1.
        p_u.clone_from(&z_u);
        p_u.scale(2.0);
        p_u.axpy(-1.0, &w_u);
        p_v.clone_from(&z_v);
        p_v.scale(2.0);
        p_v.axpy(-1.0, &w_v);
        project_continuity_in_place(&mut p_u, b, &ccache);
        prox_cells(&mut p_v, kind, 1.0, gamma);

        let e = energy_factor * energy_sum(&p_v, kind, 1.0);
        if !e.is_finite() {
            return Err(SolverError::NonFiniteEnergy { iteration: it });
        }
        energy_trace.push(e);

        continuity = p_u
            .fields()
            .zip(z_u.fields())
            .map(|(a, b)| max_abs_diff(a, b))
            .fold(0.0, f64::max)
            / rho_scale;
        let ip = interpolate_unchecked(&p_u);
        interpolation = p_v
            .fields()
            .zip(ip.fields())
            .map(|(a, b)| max_abs_diff(a, b))
            .fold(0.0, f64::max)
            / rho_scale;
        residual_trace.push(continuity.max(interpolation));

        w_u.axpy(cfg.alpha, &p_u);
        w_u.axpy(-cfg.alpha, &z_u);
        w_v.axpy(cfg.alpha, &p_v);
        w_v.axpy(-cfg.alpha, &z_v);
        let (u, v) = project_interpolation_unchecked(&w_u, &w_v, &icache);
        z_u = u;
        z_v = v;

        if it >= ENERGY_WINDOW {
            let past = energy_trace[it - ENERGY_WINDOW];
            let change = (e - past).abs() / e.abs().max(energy_floor).max(f64::MIN_POSITIVE);
            if continuity.max(interpolation).max(change) < cfg.tol {
                converged = true;
                break;
            }
        }
    }

    let distance_squared = *energy_trace.last().expect("at least one iteration");
    let report = SolverReport {
        iterations_run: energy_trace.len(),
        energy_trace,
        residual_trace,
        continuity_residual: continuity,
        interpolation_residual: interpolation,
        distance_squared,
        gamma,
        converged,
    };

    // Back to the original units: only momenta change.
    for m in z_u.m.iter_mut().chain(z_v.m.iter_mut()) {
        m.scale(scale);
    }
    Ok(GeodesicResult {
        grid: grid.clone(),
        model: cfg.model,
        boundary: b.clone(),
        staggered: z_u,
        centered: z_v,
        report,
    })
}

/// A smooth dual potential with analytic derivatives.
pub trait DualCertificate {
    fn value(&self, t: f64, x: &[f64]) -> f64;
    fn time_derivative(&self, t: f64, x: &[f64]) -> f64;
    fn gradient(&self, t: f64, x: &[f64]) -> Vec<f64>;
}

/// Amount by which `(a, b, c) = (dt phi, grad phi, phi)` leaves the dual set
/// of `model` (0 when admissible).
pub fn dual_constraint_violation(model: &ModelSpec, a: f64, b: &[f64], c: f64) -> f64 {
    let d2 = model.delta * model.delta;
    let b_sq: f64 = b.iter().map(|v| v * v).sum();
    let v = match model.kind {
        ModelKind::Wfr => a + 0.5 * (b_sq + c * c / d2),
        ModelKind::BalancedW2 | ModelKind::L2Source => a + 0.5 * b_sq,
        ModelKind::FisherRao => a + 0.5 * c * c / d2,
        ModelKind::PartialTv => (a + 0.5 * b_sq).max(c.abs() - d2),
    };
    v.max(0.0)
}

/// Energy minus the dual objective of `phi`. Weak duality makes this
/// nonnegative up to discretization error; a small value certifies that the
/// discrete geodesic is close to optimal. Rejects `phi` if it violates the
/// dual constraint at any sample (time nodes and cell centers) by more than
/// `1e-9`, relative to the size of `dt phi` there.
pub fn duality_gap_check(result: &GeodesicResult, phi: &dyn DualCertificate) -> Result<f64, SolverError> {
    let grid = &result.grid;
    let model = &result.model;
    let n_cells = grid.spatial_cells();
    let coords: Vec<Vec<f64>> = (0..n_cells).map(|s| grid.spatial_coords(s)).collect();
    let times = (0..=grid.n_time())
        .map(|j| grid.time_node(j))
        .chain((0..grid.n_time()).map(|j| grid.time_center(j)));
    let mut source_penalty = 0.0;
    for t in times {
        for x in &coords {
            let a = phi.time_derivative(t, x);
            let bvec = phi.gradient(t, x);
            let c = phi.value(t, x);
            let viol = dual_constraint_violation(model, a, &bvec, c);
            if viol > 1e-9 * a.abs().max(1.0) {
                return Err(SolverError::CertificateViolation {
                    violation: viol,
                    t,
                    x: x.clone(),
                });
            }
        }
    }
    if model.kind == ModelKind::L2Source {
        let d2 = model.delta * model.delta;
        for j in 0..grid.n_time() {
            let t = grid.time_center(j);
            for x in &coords {
                let c = phi.value(t, x);
                source_penalty += c * c / (4.0 * d2);
            }
        }
        source_penalty *= grid.cell_volume();
    }
    let vol = grid.spatial_cell_volume();
    let rho0 = result.boundary.rho0.data();
    let rho1 = result.boundary.rho1.data();
    let dual: f64 = coords
        .iter()
        .enumerate()
        .map(|(s, x)| phi.value(1.0, x) * rho1[s] - phi.value(0.0, x) * rho0[s])
        .sum::<f64>()
        * vol
        - source_penalty;
    Ok(result.distance_squared() - dual)
}

/// Energy of a centered triplet given in the original units, as reported by
/// the solver.
pub fn discrete_energy(grid: &GridSpec, v: &CenteredTriplet, model: &ModelSpec) -> f64 {
    let zw = model.source_weight();
    let rho = v.rho.data();
    let mut total = 0.0;
    for c in 0..rho.len() {
        let m_sq: f64 = v.m.iter().map(|m| m.data()[c].powi(2)).sum();
        total += cell_energy(model.kind, zw, rho[c], m_sq, v.zeta.data()[c]);
    }
    grid.cell_volume() * total
}

/// One row of a `delta` sweep on fixed endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderRow {
    pub delta: f64,
    pub distance_squared: f64,
    /// `distance_squared - delta^2 * growth`, where `growth` is the discrete
    /// cost of the spatially uniform mass change at `delta = 1`.
    pub reduced: f64,
    pub kinetic: f64,
    /// L1 distance between the `t = 1/2` frame and the Fisher-Rao geodesic.
    pub fr_gap: f64,
    /// L1 distance to the large-`delta` limit frame (NaN outside 1D).
    pub gbb_gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Output of [`delta_ladder`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ladder {
    pub growth: f64,
    /// Limit of `reduced` as `delta` grows (NaN outside 1D).
    pub gbb_squared: f64,
    pub rows: Vec<LadderRow>,
}

/// Solves the WFR problem for each `delta` with the settings of `base` (whose
/// model is ignored) and compares the results with both limit models.
pub fn delta_ladder(b: &BoundaryData, base: &SolverConfig, deltas: &[f64]) -> Result<Ladder, SolverError> {
    delta_ladder_with(b, base, deltas, |_| Ok::<(), SolverError>(()))
}

/// [`delta_ladder`], handing every solve to `visit` as it finishes.
pub fn delta_ladder_with<F, E>(b: &BoundaryData, base: &SolverConfig, deltas: &[f64], mut visit: F) -> Result<Ladder, E>
where
    F: FnMut(&GeodesicResult) -> Result<(), E>,
    E: From<SolverError>,
{
    let refs = LadderReferences::new(b, base)?;
    let grid = &base.grid;
    let vol = grid.spatial_cell_volume();
    let l1 = |a: &[f64], b: &[f64]| vol * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>();
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let mut cfg = base.clone();
        cfg.model = ModelSpec::wfr(delta).map_err(SolverError::from)?;
        let res = dr_solve(b, &cfg)?;
        let mid = res.density_at(0.5);
        let e = res.distance_squared();
        rows.push(LadderRow {
            delta,
            distance_squared: e,
            reduced: e - delta * delta * refs.growth,
            kinetic: crate::action::kinetic_energy(grid, &res.centered).map_err(SolverError::from)?,
            fr_gap: l1(&mid, &refs.fr_mid),
            gbb_gap: refs.gbb_mid.as_ref().map_or(f64::NAN, |g| l1(&mid, g)),
            iterations: res.report.iterations_run,
            converged: res.report.converged,
        });
        visit(&res)?;
    }
    Ok(Ladder {
        growth: refs.growth,
        gbb_squared: refs.gbb_squared,
        rows,
    })
}

struct LadderReferences {
    growth: f64,
    gbb_squared: f64,
    fr_mid: Vec<f64>,
    gbb_mid: Option<Vec<f64>>,
}

impl LadderReferences {
    fn new(b: &BoundaryData, base: &SolverConfig) -> Result<Self, SolverError> {
        use crate::analytic::{fisher_rao_geodesic, gbb_distance, gbb_geodesic, GridMeasure};

        let grid = &base.grid;
        b.validate(grid)?;
        let (m0, m1) = b.masses(grid);
        let growth = if m0 > 0.0 && m1 > 0.0 && m0 != m1 {
            let scaled: Vec<f64> = b.rho0.data().iter().map(|v| v * m1 / m0).collect();
            let g = BoundaryData::new(grid, b.rho0.data().to_vec(), scaled)?;
            let mut cfg = base.clone();
            cfg.model = ModelSpec::new(ModelKind::FisherRao, 1.0)?;
            dr_solve(&g, &cfg)?.distance_squared()
        } else if m0 == m1 {
            0.0
        } else {
            2.0 * (m1.sqrt() - m0.sqrt()).powi(2)
        };
        let measure = |f: &Field| GridMeasure {
            grid: grid.clone(),
            density: f.data().to_vec(),
        };
        let (r0, r1) = (measure(&b.rho0), measure(&b.rho1));
        let one_d = grid.dims() == 1 && m0 > 0.0 && m1 > 0.0;
        let gbb_squared = if one_d {
            gbb_distance(&r0, &r1).map_or(f64::NAN, |d| d * d)
        } else {
            f64::NAN
        };
        Ok(Self {
            growth,
            gbb_squared,
            fr_mid: fisher_rao_geodesic(&r0, &r1, 0.5)?.density,
            gbb_mid: if one_d { gbb_geodesic(&r0, &r1, 0.5).ok().map(|g| g.density) } else { None },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bumps(grid: &GridSpec, centers: &[(f64, f64)], sigma: f64) -> Vec<f64> {
        let n = grid.n_space()[0];
        (0..n)
            .map(|i| {
                let x = grid.cell_center(0, i);
                centers
                    .iter()
                    .map(|(c, h)| h * (-(x - c).powi(2) / (2.0 * sigma * sigma)).exp())
                    .sum::<f64>()
                    + 1e-3
            })
            .collect()
    }

    #[test]
    fn identical_endpoints_are_a_fixed_point() {
        let g = GridSpec::line(1.0, 32, 6).unwrap();
        let r = bumps(&g, &[(0.4, 1.0)], 0.1);
        let b = BoundaryData::new(&g, r.clone(), r).unwrap();
        for kind in ModelKind::ALL {
            let cfg = SolverConfig::new(g.clone(), ModelSpec::new(kind, 0.2).unwrap()).with_max_iters(200);
            let res = dr_solve(&b, &cfg).unwrap();
            assert!(res.distance_squared() <= 1e-8, "{kind}: {}", res.distance_squared());
            assert!(res.report.converged);
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let g = GridSpec::line(1.0, 8, 4).unwrap();
        let b = BoundaryData::new(&g, vec![1.0; 8], vec![1.0; 8]).unwrap();
        let base = SolverConfig::new(g.clone(), ModelSpec::wfr(0.1).unwrap());
        assert!(matches!(dr_solve(&b, &base.clone().with_alpha(2.0)), Err(SolverError::InvalidAlpha(_))));
        assert!(matches!(dr_solve(&b, &base.clone().with_gamma(0.0)), Err(SolverError::Model(_))));
        assert!(matches!(dr_solve(&b, &base.clone().with_max_iters(0)), Err(SolverError::NoIterations)));
        let b2 = BoundaryData::new(&g, vec![1.0; 8], vec![2.0; 8]).unwrap();
        let w2 = SolverConfig::new(g, ModelSpec::balanced());
        assert!(matches!(dr_solve(&b2, &w2), Err(SolverError::UnequalMasses { .. })));
    }

    #[test]
    fn translation_costs_like_balanced_transport() {
        let g = GridSpec::line(1.0, 64, 10).unwrap();
        let r0 = bumps(&g, &[(0.4, 1.0)], 0.06);
        let r1 = bumps(&g, &[(0.6, 1.0)], 0.06);
        let b = BoundaryData::new(&g, r0, r1).unwrap();
        let res = dr_solve(&b, &SolverConfig::new(g.clone(), ModelSpec::balanced())).unwrap();
        let mass = b.masses(&g).0;
        // Half the squared shift times the mass.
        let expect = 0.5 * mass * 0.2 * 0.2;
        let rel = (res.distance_squared() - expect).abs() / expect;
        assert!(rel < 0.05, "{} vs {expect}", res.distance_squared());
        assert!(res.report.continuity_residual < 1e-5);
        let masses = res.mass_trace();
        assert!(masses.iter().all(|m| (m - mass).abs() < 1e-8 * mass));
    }

    #[test]
    fn sample_in_time_interpolates_linearly() {
        let f = Field::from_fn([3, 2, 1], |t, i, _| (t * 10 + i) as f64);
        let v = sample_in_time(&f, 0.25, |j| j as f64 / 2.0);
        assert_eq!(v, vec![5.0, 6.0]);
        assert_eq!(sample_in_time(&f, -1.0, |j| j as f64 / 2.0), vec![0.0, 1.0]);
        assert_eq!(sample_in_time(&f, 2.0, |j| j as f64 / 2.0), vec![20.0, 21.0]);
    }

    #[test]
    fn dual_sets_per_model() {
        let wfr = ModelSpec::wfr(0.5).unwrap();
        assert_eq!(dual_constraint_violation(&wfr, -1.0, &[1.0], 0.5), 0.0);
        assert!(dual_constraint_violation(&wfr, -0.5, &[1.0], 0.5) > 0.0);
        let fr = ModelSpec::new(ModelKind::FisherRao, 1.0).unwrap();
        assert_eq!(dual_constraint_violation(&fr, -0.5, &[100.0], 1.0), 0.0);
        let tv = ModelSpec::new(ModelKind::PartialTv, 1.0).unwrap();
        assert!(dual_constraint_violation(&tv, -1.0, &[0.0], 1.5) > 0.0);
        assert_eq!(dual_constraint_violation(&ModelSpec::balanced(), -0.5, &[1.0], 1e6), 0.0);
    }
}
