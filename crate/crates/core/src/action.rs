//! Action functionals of the dynamic models and their proximal operators.
//!
//! All five models share the kinetic term `|m|^2 / (2 rho)` (except
//! Fisher-Rao) and differ in how the source `zeta` is penalized:
//!
//! | model        | cell integrand                          |
//! |--------------|-----------------------------------------|
//! | `Wfr`        | `(|m|^2 + delta^2 zeta^2) / (2 rho)`    |
//! | `BalancedW2` | `|m|^2 / (2 rho)`, `zeta = 0`           |
//! | `PartialTv`  | `|m|^2 / (2 rho) + delta^2 |zeta|`      |
//! | `L2Source`   | `|m|^2 / (2 rho) + delta^2 zeta^2`      |
//! | `FisherRao`  | `delta^2 zeta^2 / (2 rho)`, `m = 0`     |
//!
//! Discrete energies are cell sums weighted by the space-time cell volume.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grids::{CenteredTriplet, GridError, GridSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("delta must be positive and finite for {kind}, got {delta}")]
    InvalidDelta { kind: ModelKind, delta: f64 },
    #[error("prox step gamma must be positive and finite, got {0}")]
    InvalidGamma(f64),
    #[error("unknown model `{0}` (expected wfr, w2, partial, l2source or fr)")]
    UnknownModel(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Wfr,
    #[serde(rename = "w2")]
    BalancedW2,
    #[serde(rename = "partial")]
    PartialTv,
    L2Source,
    #[serde(rename = "fr")]
    FisherRao,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Wfr,
        ModelKind::BalancedW2,
        ModelKind::PartialTv,
        ModelKind::L2Source,
        ModelKind::FisherRao,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Wfr => "wfr",
            ModelKind::BalancedW2 => "w2",
            ModelKind::PartialTv => "partial",
            ModelKind::L2Source => "l2source",
            ModelKind::FisherRao => "fr",
        }
    }

    pub fn has_transport(self) -> bool {
        self != ModelKind::FisherRao
    }

    pub fn has_source(self) -> bool {
        self != ModelKind::BalancedW2
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ModelError::UnknownModel(s.to_string()))
    }
}

/// Which functional is minimized, with its length scale `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub delta: f64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, delta: f64) -> Result<Self, ModelError> {
        let m = Self { kind, delta };
        m.validate()?;
        Ok(m)
    }

    pub fn wfr(delta: f64) -> Result<Self, ModelError> {
        Self::new(ModelKind::Wfr, delta)
    }

    pub fn balanced() -> Self {
        Self {
            kind: ModelKind::BalancedW2,
            delta: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.kind != ModelKind::BalancedW2 && !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(ModelError::InvalidDelta {
                kind: self.kind,
                delta: self.delta,
            });
        }
        Ok(())
    }

    /// Factor in front of the source term, `delta^2` (unused for W2).
    pub(crate) fn source_weight(&self) -> f64 {
        match self.kind {
            ModelKind::BalancedW2 => 0.0,
            _ => self.delta * self.delta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProxParams {
    pub gamma: f64,
}

impl ProxParams {
    pub fn new(gamma: f64) -> Result<Self, ModelError> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(ModelError::InvalidGamma(gamma));
        }
        Ok(Self { gamma })
    }
}

/// `|m|^2 / (2 rho)` with the lower semicontinuous extension at `rho = 0`.
#[inline]
fn perspective(rho: f64, num: f64) -> f64 {
    if rho > 0.0 {
        num / (2.0 * rho)
    } else if rho == 0.0 && num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Integrand of one cell. `zw` multiplies the source term.
pub(crate) fn cell_energy(kind: ModelKind, zw: f64, rho: f64, m_sq: f64, zeta: f64) -> f64 {
    if rho < 0.0 {
        return f64::INFINITY;
    }
    match kind {
        ModelKind::Wfr => perspective(rho, m_sq + zw * zeta * zeta),
        ModelKind::BalancedW2 => {
            if zeta != 0.0 {
                f64::INFINITY
            } else {
                perspective(rho, m_sq)
            }
        }
        ModelKind::PartialTv => perspective(rho, m_sq) + zw * zeta.abs(),
        ModelKind::L2Source => perspective(rho, m_sq) + zw * zeta * zeta,
        ModelKind::FisherRao => {
            if m_sq != 0.0 {
                f64::INFINITY
            } else {
                perspective(rho, zw * zeta * zeta)
            }
        }
    }
}

/// Discrete action: cell volume times the sum of cell integrands. Infeasible
/// cells make the result `+inf`.
pub fn energy(grid: &GridSpec, v: &CenteredTriplet, model: &ModelSpec) -> Result<f64, ModelError> {
    v.check_shape(grid)?;
    model.validate()?;
    Ok(grid.cell_volume() * energy_sum(v, model.kind, model.source_weight()))
}

pub(crate) fn energy_sum(v: &CenteredTriplet, kind: ModelKind, zw: f64) -> f64 {
    let rho = v.rho.data();
    let zeta = v.zeta.data();
    let mut total = 0.0;
    for c in 0..rho.len() {
        let m_sq: f64 = v.m.iter().map(|m| m.data()[c] * m.data()[c]).sum();
        total += cell_energy(kind, zw, rho[c], m_sq, zeta[c]);
    }
    total
}

/// Kinetic part `sum |m|^2 / (2 rho)` times the cell volume.
pub fn kinetic_energy(grid: &GridSpec, v: &CenteredTriplet) -> Result<f64, ModelError> {
    v.check_shape(grid)?;
    Ok(grid.cell_volume() * energy_sum(v, ModelKind::PartialTv, 0.0))
}

/// Largest real root of `(X - rho_t)(X + gamma)^2 - (gamma / 2) s`.
///
/// Cardano on the shifted variable `Y = X + gamma`, which turns the cubic into
/// `Y^3 - c Y^2 - d` with `d >= 0`. The largest root lies in `[max(c, 0), inf)`
/// where the cubic is increasing and convex, so Newton started from any upper
/// bound converges monotonically. Cardano only serves as a (usually exact)
/// starting point.
pub fn cubic_largest_root(rho_t: f64, gamma: f64, s: f64) -> f64 {
    debug_assert!(gamma > 0.0 && s >= 0.0);
    let c = gamma + rho_t;
    let d = 0.5 * gamma * s;
    if d == 0.0 {
        return c.max(0.0) - gamma;
    }
    let f = |y: f64| y * y * (y - c) - d;
    let lo = c.max(0.0);
    let mut y = lo + d.cbrt();
    if c < 0.0 {
        y = y.min((d / -c).sqrt());
    }
    let guess = cardano_largest(c, d);
    if guess.is_finite() && guess >= lo && guess < y && f(guess) >= 0.0 {
        y = guess;
    }
    for _ in 0..100 {
        let fy = f(y);
        if fy <= 0.0 {
            break;
        }
        let fp = y * (3.0 * y - 2.0 * c);
        let next = y - fy / fp;
        if !(next < y) || next < lo {
            break;
        }
        y = next;
    }
    if !y.is_finite() {
        y = bisect_largest(c, d);
    }
    y - gamma
}

fn cardano_largest(c: f64, d: f64) -> f64 {
    // Y = Z + c/3 gives Z^3 + p Z + q = 0.
    let p = -c * c / 3.0;
    let q = -(2.0 * c * c * c / 27.0 + d);
    let disc = 0.25 * q * q + p * p * p / 27.0;
    let z = if disc >= 0.0 {
        let sq = disc.sqrt();
        // Avoid cancellation between the two cube roots.
        let u = (-0.5 * q + if q <= 0.0 { sq } else { -sq }).cbrt();
        if u == 0.0 {
            0.0
        } else {
            u - p / (3.0 * u)
        }
    } else {
        let r = (-p / 3.0).sqrt();
        let arg = (-0.5 * q / (r * r * r)).clamp(-1.0, 1.0);
        2.0 * r * (arg.acos() / 3.0).cos()
    };
    z + c / 3.0
}

fn bisect_largest(c: f64, d: f64) -> f64 {
    let f = |y: f64| y * y * (y - c) - d;
    let mut lo = c.max(0.0);
    let mut hi = lo + d.cbrt() + 1.0;
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Root in `rho > 0` of the optimality equation of the kinetic + Fisher-Rao
/// prox when the two terms carry different weights:
/// `rho - rho_t - w a / (2 (rho + w)^2) - w k b / (2 (rho + w k)^2) = 0`.
/// The left side is increasing and concave in `rho`, so Newton started left of
/// the root converges monotonically.
fn weighted_root(rho_t: f64, w: f64, k: f64, a: f64, b: f64) -> f64 {
    let wk = w * k;
    let g = |r: f64| r - rho_t - w * a / (2.0 * (r + w).powi(2)) - wk * b / (2.0 * (r + wk).powi(2));
    let gp = |r: f64| 1.0 + w * a / (r + w).powi(3) + wk * b / (r + wk).powi(3);
    if g(0.0) >= 0.0 {
        return 0.0;
    }
    let mut lo = 0.0;
    let mut hi = rho_t.max(0.0) + a / (2.0 * w) + b / (2.0 * wk) + 1.0;
    let mut r = 0.0;
    for _ in 0..200 {
        let val = g(r);
        if val < 0.0 {
            lo = r;
        } else {
            hi = r;
        }
        let mut next = r - val / gp(r);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - r).abs() <= 1e-15 * next.abs().max(1e-300) {
            return next;
        }
        r = next;
    }
    r
}

/// Largest root of the kinetic/source prox equation with the zero branch
/// applied: anything at or below `1e-15 max(1, rho_t)` is treated as zero.
#[inline]
fn positive_part_root(root: f64, rho_t: f64) -> Option<f64> {
    if root > 1e-15 * rho_t.abs().max(1.0) {
        Some(root)
    } else {
        None
    }
}

/// Prox of `w * integrand` at one cell, in place. `zw` multiplies the source.
pub(crate) fn cell_prox(kind: ModelKind, zw: f64, w: f64, rho: &mut f64, m: &mut [f64], zeta: &mut f64) {
    let rho_t = *rho;
    let m_sq: f64 = m.iter().map(|x| x * x).sum();
    let zero = |rho: &mut f64, m: &mut [f64], zeta: &mut f64| {
        *rho = 0.0;
        m.iter_mut().for_each(|x| *x = 0.0);
        *zeta = 0.0;
    };
    match kind {
        ModelKind::Wfr => {
            let z_sq = *zeta * *zeta;
            let root = if zw == 1.0 {
                cubic_largest_root(rho_t, w, m_sq + z_sq)
            } else {
                weighted_root(rho_t, w, zw, m_sq, z_sq)
            };
            match positive_part_root(root, rho_t) {
                Some(r) => {
                    *rho = r;
                    let fm = r / (r + w);
                    m.iter_mut().for_each(|x| *x *= fm);
                    *zeta *= r / (r + w * zw);
                }
                None => zero(rho, m, zeta),
            }
        }
        ModelKind::FisherRao => {
            let wk = w * zw;
            let root = cubic_largest_root(rho_t, wk, *zeta * *zeta);
            m.iter_mut().for_each(|x| *x = 0.0);
            match positive_part_root(root, rho_t) {
                Some(r) => {
                    *rho = r;
                    *zeta *= r / (r + wk);
                }
                None => zero(rho, m, zeta),
            }
        }
        ModelKind::BalancedW2 | ModelKind::PartialTv | ModelKind::L2Source => {
            let root = cubic_largest_root(rho_t, w, m_sq);
            match positive_part_root(root, rho_t) {
                Some(r) => {
                    *rho = r;
                    let fm = r / (r + w);
                    m.iter_mut().for_each(|x| *x *= fm);
                }
                None => {
                    *rho = 0.0;
                    m.iter_mut().for_each(|x| *x = 0.0);
                }
            }
            *zeta = match kind {
                ModelKind::BalancedW2 => 0.0,
                ModelKind::PartialTv => {
                    let t = w * zw;
                    zeta.signum() * (zeta.abs() - t).max(0.0)
                }
                _ => *zeta / (1.0 + 2.0 * w * zw),
            };
        }
    }
}

/// Applies [`cell_prox`] to every cell of `v`.
pub(crate) fn prox_cells(v: &mut CenteredTriplet, kind: ModelKind, zw: f64, w: f64) {
    let n = v.rho.data().len();
    let dims = v.m.len();
    let mut mloc = [0.0f64; 2];
    for c in 0..n {
        for k in 0..dims {
            mloc[k] = v.m[k].data()[c];
        }
        let mut r = v.rho.data()[c];
        let mut z = v.zeta.data()[c];
        cell_prox(kind, zw, w, &mut r, &mut mloc[..dims], &mut z);
        v.rho.data_mut()[c] = r;
        v.zeta.data_mut()[c] = z;
        for k in 0..dims {
            v.m[k].data_mut()[c] = mloc[k];
        }
    }
}

/// Proximal map of `gamma * energy` (cell volume included), computed cell by
/// cell in closed form.
pub fn prox_action(
    grid: &GridSpec,
    v: &CenteredTriplet,
    params: &ProxParams,
    model: &ModelSpec,
) -> Result<CenteredTriplet, ModelError> {
    v.check_shape(grid)?;
    model.validate()?;
    ProxParams::new(params.gamma)?;
    let mut out = v.clone();
    prox_cells(&mut out, model.kind, model.source_weight(), params.gamma * grid.cell_volume());
    Ok(out)
}

/// Worst relative optimality gap of `v_out` as the prox of `v_in`, found by
/// an independent pattern search on `1/2 |x - x_in|^2 + w f(x)` started at
/// `v_out` for a sample of at most `max_cells` cells.
pub fn prox_optimality_check(
    grid: &GridSpec,
    v_in: &CenteredTriplet,
    v_out: &CenteredTriplet,
    params: &ProxParams,
    model: &ModelSpec,
    max_cells: usize,
) -> Result<f64, ModelError> {
    v_in.check_shape(grid)?;
    v_out.check_shape(grid)?;
    model.validate()?;
    let w = params.gamma * grid.cell_volume();
    let zw = model.source_weight();
    let n = v_in.rho.data().len();
    let step = (n / max_cells.max(1)).max(1);
    let mut worst = 0.0f64;
    for c in (0..n).step_by(step) {
        let pack = |v: &CenteredTriplet| {
            let mut x = vec![v.rho.data()[c]];
            x.extend(v.m.iter().map(|m| m.data()[c]));
            x.push(v.zeta.data()[c]);
            x
        };
        let x_in = pack(v_in);
        let x_out = pack(v_out);
        worst = worst.max(local_prox_gap(model.kind, zw, w, &x_in, &x_out));
    }
    Ok(worst)
}

fn prox_objective(kind: ModelKind, zw: f64, w: f64, x_in: &[f64], x: &[f64]) -> f64 {
    let d = x.len();
    let quad: f64 = x.iter().zip(x_in).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() * 0.5;
    let m_sq: f64 = x[1..d - 1].iter().map(|v| v * v).sum();
    quad + w * cell_energy(kind, zw, x[0], m_sq, x[d - 1])
}

/// Relative decrease achievable from `x_out` by a shrinking compass search.
pub(crate) fn local_prox_gap(kind: ModelKind, zw: f64, w: f64, x_in: &[f64], x_out: &[f64]) -> f64 {
    let obj = |x: &[f64]| prox_objective(kind, zw, w, x_in, x);
    let f0 = obj(x_out);
    if !f0.is_finite() {
        return f64::INFINITY;
    }
    let scale = x_in.iter().chain(x_out).fold(w, |m, v| m.max(v.abs()));
    let mut best = x_out.to_vec();
    let mut fbest = f0;
    let mut h = 0.1 * scale;
    let d = best.len();
    let mut trial = best.clone();
    while h > 1e-12 * scale {
        let mut improved = false;
        // Full 3^d stencil catches descent directions across kinks.
        for code in 0..3usize.pow(d as u32) {
            let mut c = code;
            for k in 0..d {
                trial[k] = best[k] + h * ((c % 3) as f64 - 1.0);
                c /= 3;
            }
            let f = obj(&trial);
            if f < fbest {
                fbest = f;
                best.copy_from_slice(&trial);
                improved = true;
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    let denom = f0.abs().max(1e-12 * (1.0 + scale * scale));
    (f0 - fbest) / denom
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids::Field;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Largest root by bisection on the raw cubic, independent of Cardano.
    fn bisection_root(rho_t: f64, gamma: f64, s: f64) -> f64 {
        let p = |x: f64| (x - rho_t) * (x + gamma) * (x + gamma) - 0.5 * gamma * s;
        let mut lo = -gamma;
        let mut hi = rho_t.abs() + s + gamma + 1.0;
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if p(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn single_cell(rho: f64, m: f64, zeta: f64) -> (GridSpec, CenteredTriplet) {
        // Four cells of space-time volume 1/2.
        let g = GridSpec::line(2.0, 2, 2).unwrap();
        let mut v = CenteredTriplet::zeros(&g);
        v.rho = Field::constant(g.centered_shape(), rho);
        v.m[0] = Field::constant(g.centered_shape(), m);
        v.zeta = Field::constant(g.centered_shape(), zeta);
        (g, v)
    }

    #[test]
    fn zero_flux_has_zero_energy() {
        let (g, v) = single_cell(3.0, 0.0, 0.0);
        for kind in ModelKind::ALL {
            let e = energy(&g, &v, &ModelSpec::new(kind, 0.7).unwrap()).unwrap();
            assert_eq!(e, 0.0, "{kind}");
        }
    }

    #[test]
    fn wfr_cell_value() {
        // rho=2, m=2, zeta=1, delta=1: (4 + 1) / 4
        assert_eq!(cell_energy(ModelKind::Wfr, 1.0, 2.0, 4.0, 1.0), 1.25);
        let (g, v) = single_cell(2.0, 2.0, 1.0);
        let e = energy(&g, &v, &ModelSpec::wfr(1.0).unwrap()).unwrap();
        // four cells, each of volume 1/2
        assert!((e - 4.0 * 0.5 * 1.25).abs() < 1e-15);
    }

    #[test]
    fn infeasible_cells_are_infinite() {
        assert_eq!(cell_energy(ModelKind::Wfr, 1.0, 0.0, 1.0, 0.0), f64::INFINITY);
        assert_eq!(cell_energy(ModelKind::Wfr, 1.0, -1.0, 0.0, 0.0), f64::INFINITY);
        assert_eq!(cell_energy(ModelKind::BalancedW2, 0.0, 1.0, 0.0, 0.5), f64::INFINITY);
        assert_eq!(cell_energy(ModelKind::FisherRao, 1.0, 1.0, 0.1, 0.0), f64::INFINITY);
        assert_eq!(cell_energy(ModelKind::PartialTv, 1.0, 0.0, 0.0, 2.0), 2.0);
    }

    #[test]
    fn wfr_energy_splits_into_kinetic_and_source() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = GridSpec::plane([1.0, 1.5], [3, 4], 3).unwrap();
        let s = g.centered_shape();
        let v = CenteredTriplet {
            rho: Field::from_fn(s, |_, _, _| rng.gen_range(0.1..2.0)),
            m: vec![
                Field::from_fn(s, |_, _, _| rng.gen_range(-1.0..1.0)),
                Field::from_fn(s, |_, _, _| rng.gen_range(-1.0..1.0)),
            ],
            zeta: Field::from_fn(s, |_, _, _| rng.gen_range(-1.0..1.0)),
        };
        let delta = 0.37;
        let wfr = energy(&g, &v, &ModelSpec::wfr(delta).unwrap()).unwrap();
        let kin = kinetic_energy(&g, &v).unwrap();
        let mut fr = v.clone();
        fr.m.iter_mut().for_each(|m| m.scale(0.0));
        let src = energy(&g, &fr, &ModelSpec::new(ModelKind::FisherRao, delta).unwrap()).unwrap();
        assert!((wfr - kin - src).abs() < 1e-12 * wfr);
    }

    #[test]
    fn cubic_examples() {
        assert_eq!(cubic_largest_root(5.0, 1.0, 0.0), 5.0);
        assert_eq!(cubic_largest_root(-2.0, 1.0, 0.0), -1.0);
        let r = cubic_largest_root(0.0, 1.0, 4.0);
        assert!((r - bisection_root(0.0, 1.0, 4.0)).abs() < 1e-12);
        assert!((r - 0.695_620_769_559_862_8).abs() < 1e-3);
        assert!((r * r * r + 2.0 * r * r + r - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cubic_matches_bisection_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let rho_t = rng.gen_range(-5.0..5.0) * 10f64.powi(rng.gen_range(-3..3));
            let gamma = 10f64.powf(rng.gen_range(-4.0..2.0));
            let s = rng.gen_range(0.0..5.0) * 10f64.powi(rng.gen_range(-6..3));
            let a = cubic_largest_root(rho_t, gamma, s);
            let b = bisection_root(rho_t, gamma, s);
            let tol = 1e-10 * (1.0 + a.abs());
            assert!((a - b).abs() < tol, "rho_t={rho_t} gamma={gamma} s={s}: {a} vs {b}");
        }
    }

    #[test]
    fn prox_fixes_minimized_cell() {
        let mut r = 5.0;
        let mut m = [0.0];
        let mut z = 0.0;
        cell_prox(ModelKind::Wfr, 1.0, 1.0, &mut r, &mut m, &mut z);
        assert_eq!((r, m[0], z), (5.0, 0.0, 0.0));
    }

    #[test]
    fn prox_wfr_example() {
        let mut r = 0.0;
        let mut m = [2.0];
        let mut z = 0.0;
        cell_prox(ModelKind::Wfr, 1.0, 1.0, &mut r, &mut m, &mut z);
        let root = bisection_root(0.0, 1.0, 4.0);
        assert!((r - root).abs() < 1e-12);
        assert!((m[0] - 2.0 * root / (root + 1.0)).abs() < 1e-12);
        assert_eq!(z, 0.0);
    }

    #[test]
    fn prox_partial_soft_thresholds() {
        let mut r = 1.0;
        let mut m = [0.0];
        let mut z = 0.5;
        cell_prox(ModelKind::PartialTv, 1.0, 1.0, &mut r, &mut m, &mut z);
        assert_eq!(z, 0.0);
        let mut z = -2.5;
        cell_prox(ModelKind::PartialTv, 1.0, 1.0, &mut r, &mut m, &mut z);
        assert_eq!(z, -1.5);
    }

    #[test]
    fn prox_l2_shrinks_source() {
        let (mut r, mut m, mut z) = (1.0, [0.0], 3.0);
        cell_prox(ModelKind::L2Source, 0.25, 2.0, &mut r, &mut m, &mut z);
        assert!((z - 3.0 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn prox_weighted_root_matches_general_optimality() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let x_in = [rng.gen_range(-2.0..3.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let zw = 10f64.powf(rng.gen_range(-2.0..1.0));
            let w = 10f64.powf(rng.gen_range(-2.0..0.5));
            let (mut r, mut m, mut z) = (x_in[0], [x_in[1]], x_in[2]);
            cell_prox(ModelKind::Wfr, zw, w, &mut r, &mut m, &mut z);
            let gap = local_prox_gap(ModelKind::Wfr, zw, w, &x_in, &[r, m[0], z]);
            assert!(gap <= 1e-6, "gap {gap} at {x_in:?} zw={zw} w={w}");
        }
    }

    #[test]
    fn prox_with_zero_flux_has_zero_gap() {
        let x_in = [2.0, 0.0, 0.0];
        for kind in ModelKind::ALL {
            let (mut r, mut m, mut z) = (x_in[0], [x_in[1]], x_in[2]);
            cell_prox(kind, 1.0, 0.5, &mut r, &mut m, &mut z);
            assert_eq!(local_prox_gap(kind, 1.0, 0.5, &x_in, &[r, m[0], z]), 0.0);
        }
    }

    #[test]
    fn wrong_output_is_detected() {
        let x_in = [0.0, 2.0, 0.0];
        let gap = local_prox_gap(ModelKind::Wfr, 1.0, 1.0, &x_in, &[0.5, 0.5, 0.0]);
        assert!(gap > 1e-3);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(ModelSpec::wfr(0.0).is_err());
        assert!(ModelSpec::new(ModelKind::FisherRao, f64::NAN).is_err());
        assert!(ModelSpec::new(ModelKind::BalancedW2, 0.0).is_ok());
        assert!(ProxParams::new(-1.0).is_err());
        assert_eq!("partial".parse::<ModelKind>().unwrap(), ModelKind::PartialTv);
        assert!("hanin".parse::<ModelKind>().is_err());
    }
}
