//! Closed-form geodesics, distances and bounds, used as oracles for the
//! solver, together with optimality certificates.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grids::{GridError, GridSpec};
use crate::solver::DualCertificate;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("masses must be nonnegative and finite, got {0}")]
    InvalidMass(f64),
    #[error("delta must be positive and finite, got {0}")]
    InvalidDelta(f64),
    #[error("positions must share one dimension ({expected}), got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("measures live on different grids")]
    DomainMismatch,
    #[error("{0} requires one-dimensional measures")]
    NotOneDimensional(&'static str),
    #[error("total masses differ: {m0} vs {m1}")]
    UnequalMasses { m0: f64, m1: f64 },
    #[error("measure has zero mass")]
    ZeroMass,
    #[error(
        "atoms are {distance} apart, which is not below the cut locus {cut} \
         (use the Fisher-Rao branch instead)"
    )]
    NotTravelling { distance: f64, cut: f64 },
    #[error("degenerate pair (zero mass or coincident atoms): no transport takes place")]
    NoTransport,
    #[error("pair {pair}: {reason}")]
    PairHypothesis { pair: usize, reason: String },
    #[error("no admissible certificate constants: {0}")]
    NoCertificate(String),
    #[error("time {0} lies outside [0, 1]")]
    InvalidTime(f64),
    #[error(transparent)]
    Grid(#[from] GridError),
}

fn check_mass(h: f64) -> Result<(), AnalyticError> {
    if h.is_finite() && h >= 0.0 {
        Ok(())
    } else {
        Err(AnalyticError::InvalidMass(h))
    }
}

fn check_delta(delta: f64) -> Result<(), AnalyticError> {
    if delta.is_finite() && delta > 0.0 {
        Ok(())
    } else {
        Err(AnalyticError::InvalidDelta(delta))
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub mass: f64,
    pub position: Vec<f64>,
}

/// Finite sum of weighted Diracs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AtomicMeasure {
    pub atoms: Vec<Atom>,
}

impl AtomicMeasure {
    pub fn new(atoms: Vec<(f64, Vec<f64>)>) -> Result<Self, AnalyticError> {
        let dim = atoms.first().map_or(0, |a| a.1.len());
        for (h, x) in &atoms {
            check_mass(*h)?;
            if x.len() != dim {
                return Err(AnalyticError::DimensionMismatch {
                    expected: dim,
                    found: x.len(),
                });
            }
        }
        Ok(Self {
            atoms: atoms
                .into_iter()
                .map(|(mass, position)| Atom { mass, position })
                .collect(),
        })
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum()
    }
}

/// Piecewise-constant density on the spatial cells of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeasure {
    pub grid: GridSpec,
    pub density: Vec<f64>,
}

impl GridMeasure {
    pub fn new(grid: &GridSpec, density: Vec<f64>) -> Result<Self, AnalyticError> {
        if density.len() != grid.spatial_cells() {
            return Err(GridError::ShapeMismatch {
                what: "density",
                expected: grid.spatial_shape(),
                found: [1, density.len(), 1],
            }
            .into());
        }
        for v in &density {
            check_mass(*v)?;
        }
        Ok(Self {
            grid: grid.clone(),
            density,
        })
    }

    pub fn mass(&self) -> f64 {
        self.grid.spatial_cell_volume() * self.density.iter().sum::<f64>()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            density: self.density.iter().map(|v| v * alpha).collect(),
        }
    }

    fn same_domain(&self, other: &Self) -> Result<(), AnalyticError> {
        if self.grid.lengths() == other.grid.lengths() && self.grid.n_space() == other.grid.n_space() {
            Ok(())
        } else {
            Err(AnalyticError::DomainMismatch)
        }
    }
}

/// `2 sum (sqrt(rho1) - sqrt(rho0))^2` over cells, i.e. the squared
/// Fisher-Rao distance at `delta = 1`.
pub fn fisher_rao_distance_squared(rho0: &GridMeasure, rho1: &GridMeasure) -> Result<f64, AnalyticError> {
    rho0.same_domain(rho1)?;
    let s: f64 = rho0
        .density
        .iter()
        .zip(&rho1.density)
        .map(|(a, b)| (b.sqrt() - a.sqrt()).powi(2))
        .sum();
    Ok(2.0 * s * rho0.grid.spatial_cell_volume())
}

pub fn fisher_rao_distance(rho0: &GridMeasure, rho1: &GridMeasure) -> Result<f64, AnalyticError> {
    fisher_rao_distance_squared(rho0, rho1).map(f64::sqrt)
}

/// Atomic analogue: atoms at the same position are compared, every other
/// atom is created or destroyed entirely.
pub fn fisher_rao_distance_atomic(rho0: &AtomicMeasure, rho1: &AtomicMeasure) -> f64 {
    let mut used = vec![false; rho1.atoms.len()];
    let mut s = 0.0;
    for a in &rho0.atoms {
        let mut matched = 0.0;
        for (j, b) in rho1.atoms.iter().enumerate() {
            if !used[j] && b.position == a.position {
                used[j] = true;
                matched += b.mass;
            }
        }
        s += (matched.sqrt() - a.mass.sqrt()).powi(2);
    }
    s += rho1
        .atoms
        .iter()
        .zip(&used)
        .filter(|(_, u)| !**u)
        .map(|(b, _)| b.mass)
        .sum::<f64>();
    (2.0 * s).sqrt()
}

/// `(t sqrt(rho1) + (1 - t) sqrt(rho0))^2`, cell by cell.
pub fn fisher_rao_geodesic(rho0: &GridMeasure, rho1: &GridMeasure, t: f64) -> Result<GridMeasure, AnalyticError> {
    rho0.same_domain(rho1)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(AnalyticError::InvalidTime(t));
    }
    let density = rho0
        .density
        .iter()
        .zip(&rho1.density)
        .map(|(a, b)| {
            if t == 0.0 {
                *a
            } else if t == 1.0 {
                *b
            } else {
                (t * b.sqrt() + (1.0 - t) * a.sqrt()).powi(2)
            }
        })
        .collect();
    Ok(GridMeasure {
        grid: rho0.grid.clone(),
        density,
    })
}

/// Geodesic between `rho0` and `alpha rho0`: `(t sqrt(alpha) + 1 - t)^2 rho0`.
pub fn no_transport_geodesic(rho0: &GridMeasure, alpha: f64, t: f64) -> Result<GridMeasure, AnalyticError> {
    check_mass(alpha)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(AnalyticError::InvalidTime(t));
    }
    Ok(rho0.scaled((t * alpha.sqrt() + 1.0 - t).powi(2)))
}

pub fn no_transport_distance(mass0: f64, alpha: f64, delta: f64) -> Result<f64, AnalyticError> {
    check_mass(mass0)?;
    check_mass(alpha)?;
    check_delta(delta)?;
    Ok(delta * (alpha.sqrt() - 1.0).abs() * (2.0 * mass0).sqrt())
}

/// Upper bounds on the squared distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceBounds {
    /// `2 delta^2 int (sqrt(rho1) - sqrt(rho0))^2`, attained without transport.
    pub tight: f64,
    /// `2 delta^2 (rho0(Omega) + rho1(Omega))`.
    pub loose: f64,
}

pub fn distance_upper_bound(rho0: &GridMeasure, rho1: &GridMeasure, delta: f64) -> Result<DistanceBounds, AnalyticError> {
    check_delta(delta)?;
    let d2 = delta * delta;
    Ok(DistanceBounds {
        tight: d2 * fisher_rao_distance_squared(rho0, rho1)?,
        loose: 2.0 * d2 * (rho0.mass() + rho1.mass()),
    })
}

/// Distance between `h0 delta_x0` and `h1 delta_x1`.
pub fn wfr_dirac_distance(h0: f64, x0: &[f64], h1: f64, x1: &[f64], delta: f64) -> Result<f64, AnalyticError> {
    check_mass(h0)?;
    check_mass(h1)?;
    check_delta(delta)?;
    if x0.len() != x1.len() {
        return Err(AnalyticError::DimensionMismatch {
            expected: x0.len(),
            found: x1.len(),
        });
    }
    let d = dist(x0, x1);
    Ok(if d < PI * delta {
        // sqrt(2) delta |sqrt(h1) e^{i d / 2 delta} - sqrt(h0)|
        let th = d / (2.0 * delta);
        let re = h1.sqrt() * th.cos() - h0.sqrt();
        let im = h1.sqrt() * th.sin();
        2f64.sqrt() * delta * re.hypot(im)
    } else {
        (2.0 * delta * delta * (h0 + h1)).sqrt()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Travelling,
    CutLocus,
    NoTransport,
}

/// Geodesic between two Diracs. In the travelling regime the path is
/// `h(t) delta_{x(t)}` with `h(t) = A t^2 - 2 B t + h0` and `h x' = omega0 u`,
/// where `u` is the unit vector from `x0` to `x1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiracPairGeodesic {
    pub h0: f64,
    pub h1: f64,
    pub x0: Vec<f64>,
    pub x1: Vec<f64>,
    pub delta: f64,
    pub regime: Regime,
    pub tau: f64,
    pub a: f64,
    pub b: f64,
    pub omega0: f64,
}

impl DiracPairGeodesic {
    /// Classifies the pair and computes its constants in any regime.
    pub fn new(h0: f64, x0: &[f64], h1: f64, x1: &[f64], delta: f64) -> Result<Self, AnalyticError> {
        check_mass(h0)?;
        check_mass(h1)?;
        check_delta(delta)?;
        if x0.len() != x1.len() {
            return Err(AnalyticError::DimensionMismatch {
                expected: x0.len(),
                found: x1.len(),
            });
        }
        let d = dist(x0, x1);
        let mut g = Self {
            h0,
            h1,
            x0: x0.to_vec(),
            x1: x1.to_vec(),
            delta,
            regime: Regime::NoTransport,
            tau: 0.0,
            a: h0 + h1 - 2.0 * (h0 * h1).sqrt(),
            b: h0 - (h0 * h1).sqrt(),
            omega0: 0.0,
        };
        if h0 == 0.0 || h1 == 0.0 || d == 0.0 {
            if d == 0.0 {
                return Ok(g);
            }
            // A lone atom appears or vanishes: Fisher-Rao on each atom.
            g.regime = Regime::CutLocus;
        } else if d >= PI * delta {
            g.regime = Regime::CutLocus;
        } else {
            g.regime = Regime::Travelling;
        }
        if g.regime == Regime::CutLocus {
            g.a = h0 + h1;
            g.b = h0;
            return Ok(g);
        }
        let tau = (d / (2.0 * delta)).tan();
        let c = (h0 * h1 / (1.0 + tau * tau)).sqrt();
        g.tau = tau;
        g.a = h0 + h1 - 2.0 * c;
        g.b = h0 - c;
        g.omega0 = 2.0 * delta * tau * c;
        Ok(g)
    }

    pub fn separation(&self) -> f64 {
        dist(&self.x0, &self.x1)
    }

    fn direction(&self) -> Vec<f64> {
        let d = self.separation();
        self.x0.iter().zip(&self.x1).map(|(a, b)| (b - a) / d).collect()
    }

    /// Squared distance `2 delta^2 A`.
    pub fn energy(&self) -> f64 {
        2.0 * self.delta * self.delta * self.a
    }

    pub fn distance(&self) -> f64 {
        self.energy().sqrt()
    }

    /// Mass of the travelling atom.
    pub fn h(&self, t: f64) -> f64 {
        self.a * t * t - 2.0 * self.b * t + self.h0
    }

    pub fn h_prime(&self, t: f64) -> f64 {
        2.0 * (self.a * t - self.b)
    }

    /// Distance travelled along the segment by time `t`.
    pub fn arc(&self, t: f64) -> f64 {
        if self.regime != Regime::Travelling {
            return 0.0;
        }
        let k = 2.0 * self.delta / self.omega0;
        2.0 * self.delta * ((k * (self.a * t - self.b)).atan() + (k * self.b).atan())
    }

    /// Position of the travelling atom.
    pub fn x(&self, t: f64) -> Vec<f64> {
        let s = self.arc(t);
        if s == 0.0 {
            return self.x0.clone();
        }
        self.x0.iter().zip(self.direction()).map(|(x, u)| x + s * u).collect()
    }

    /// Velocity `omega0 / h(t)` along the unit direction.
    pub fn velocity(&self, t: f64) -> Vec<f64> {
        let v = self.omega0 / self.h(t);
        self.direction().into_iter().map(|u| u * v).collect()
    }

    /// Atoms of the geodesic at time `t`. Outside the travelling regime this
    /// is the Fisher-Rao geodesic on each atom.
    pub fn atoms_at(&self, t: f64) -> Vec<Atom> {
        match self.regime {
            Regime::Travelling => vec![Atom {
                mass: self.h(t),
                position: self.x(t),
            }],
            Regime::NoTransport => vec![Atom {
                mass: (t * self.h1.sqrt() + (1.0 - t) * self.h0.sqrt()).powi(2),
                position: self.x0.clone(),
            }],
            Regime::CutLocus => vec![
                Atom {
                    mass: (1.0 - t).powi(2) * self.h0,
                    position: self.x0.clone(),
                },
                Atom {
                    mass: t * t * self.h1,
                    position: self.x1.clone(),
                },
            ],
        }
    }

    /// Same geodesic with all masses multiplied by `alpha`.
    pub fn mass_rescale(&self, alpha: f64) -> Result<Self, AnalyticError> {
        Self::new(alpha * self.h0, &self.x0, alpha * self.h1, &self.x1, self.delta)
    }

    /// Geodesic of the space stretched by `s`, for the length scale `s delta`.
    pub fn space_rescale(&self, s: f64) -> Result<Self, AnalyticError> {
        let x0: Vec<f64> = self.x0.iter().map(|v| v * s).collect();
        let x1: Vec<f64> = self.x1.iter().map(|v| v * s).collect();
        Self::new(self.h0, &x0, self.h1, &x1, s * self.delta)
    }
}

/// Travelling-Dirac geodesic; errors outside the travelling regime.
pub fn wfr_dirac_geodesic(h0: f64, x0: &[f64], h1: f64, x1: &[f64], delta: f64) -> Result<DiracPairGeodesic, AnalyticError> {
    let g = DiracPairGeodesic::new(h0, x0, h1, x1, delta)?;
    match g.regime {
        Regime::Travelling => Ok(g),
        Regime::NoTransport => Err(AnalyticError::NoTransport),
        Regime::CutLocus if h0 == 0.0 || h1 == 0.0 => Err(AnalyticError::NoTransport),
        Regime::CutLocus => Err(AnalyticError::NotTravelling {
            distance: g.separation(),
            cut: PI * delta,
        }),
    }
}

/// Superposition of independent pair geodesics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairsGeodesic {
    pub pairs: Vec<DiracPairGeodesic>,
}

impl PairsGeodesic {
    pub fn energy(&self) -> f64 {
        self.pairs.iter().map(|p| p.energy()).sum()
    }

    pub fn distance(&self) -> f64 {
        self.energy().sqrt()
    }

    pub fn atoms_at(&self, t: f64) -> Vec<Atom> {
        self.pairs.iter().flat_map(|p| p.atoms_at(t)).collect()
    }

    /// Unique when every mass is positive.
    pub fn is_unique(&self) -> bool {
        self.pairs.iter().all(|p| p.h0 > 0.0 && p.h1 > 0.0)
    }
}

/// Security distance between pairs, in units of `pi delta`.
pub const PAIR_SEPARATION: f64 = 6.0;

/// Geodesic between atomic measures made of well separated close pairs.
/// `pairing[i] = (j0, j1)` matches atom `j0` of `rho0` with atom `j1` of
/// `rho1`; every atom must be used exactly once (use zero masses for atoms
/// that appear or vanish).
pub fn wfr_pairs_geodesic(
    rho0: &AtomicMeasure,
    rho1: &AtomicMeasure,
    pairing: &[(usize, usize)],
    delta: f64,
) -> Result<PairsGeodesic, AnalyticError> {
    check_delta(delta)?;
    let mut used0 = vec![false; rho0.atoms.len()];
    let mut used1 = vec![false; rho1.atoms.len()];
    let mut pairs = Vec::with_capacity(pairing.len());
    for (i, &(j0, j1)) in pairing.iter().enumerate() {
        let bad = |reason: String| AnalyticError::PairHypothesis { pair: i, reason };
        let (a, b) = match (rho0.atoms.get(j0), rho1.atoms.get(j1)) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(bad(format!("atom index ({j0}, {j1}) out of range"))),
        };
        if std::mem::replace(&mut used0[j0], true) || std::mem::replace(&mut used1[j1], true) {
            return Err(bad("atom used twice".into()));
        }
        let d = dist(&a.position, &b.position);
        if a.mass > 0.0 && b.mass > 0.0 && d >= PI * delta {
            return Err(bad(format!("atoms are {d} apart, not below pi * delta = {}", PI * delta)));
        }
        pairs.push(DiracPairGeodesic::new(a.mass, &a.position, b.mass, &b.position, delta)?);
    }
    if let Some(j) = used0.iter().position(|u| !u) {
        return Err(AnalyticError::PairHypothesis {
            pair: pairing.len(),
            reason: format!("initial atom {j} is not paired"),
        });
    }
    if let Some(j) = used1.iter().position(|u| !u) {
        return Err(AnalyticError::PairHypothesis {
            pair: pairing.len(),
            reason: format!("final atom {j} is not paired"),
        });
    }
    let limit = PAIR_SEPARATION * PI * delta;
    for i in 0..pairs.len() {
        for j in i + 1..pairs.len() {
            let (p, q) = (&pairs[i], &pairs[j]);
            let closest = [&p.x0, &p.x1]
                .iter()
                .flat_map(|a| [&q.x0, &q.x1].map(|b| dist(a, b)))
                .fold(f64::INFINITY, f64::min);
            if closest <= limit {
                return Err(AnalyticError::PairHypothesis {
                    pair: i,
                    reason: format!("pair {j} is only {closest} away (needs more than {limit})"),
                });
            }
        }
    }
    Ok(PairsGeodesic { pairs })
}

/// Squared 1D quadratic Wasserstein distance between measures of equal mass.
pub fn w2_1d_squared(rho0: &GridMeasure, rho1: &GridMeasure) -> Result<f64, AnalyticError> {
    rho0.same_domain(rho1)?;
    let q0 = Quantile::new(rho0)?;
    let q1 = Quantile::new(rho1)?;
    let (m0, m1) = (q0.mass, q1.mass);
    if (m0 - m1).abs() > 1e-9 * m0.max(m1) {
        return Err(AnalyticError::UnequalMasses { m0, m1 });
    }
    let mut total = 0.0;
    for_each_merged(&q0, &q1, |u0, u1, a0, a1, b0, b1| {
        // Both quantiles are affine on [u0, u1]; integrate the squared gap.
        let (p, q) = (a0 - a1, b0 - b1);
        total += (u1 - u0) * (p * p + p * q + q * q) / 3.0;
    });
    Ok(m0 * total)
}

pub fn w2_1d(rho0: &GridMeasure, rho1: &GridMeasure) -> Result<f64, AnalyticError> {
    w2_1d_squared(rho0, rho1).map(f64::sqrt)
}

/// Inverse cumulative distribution of a piecewise-constant 1D density.
struct Quantile {
    mass: f64,
    /// Cumulative mass fractions at cell edges, nondecreasing from 0 to 1.
    u: Vec<f64>,
    /// Cell edge positions.
    x: Vec<f64>,
}

impl Quantile {
    fn new(m: &GridMeasure) -> Result<Self, AnalyticError> {
        if m.grid.dims() != 1 {
            return Err(AnalyticError::NotOneDimensional("quantile transport"));
        }
        let mass = m.mass();
        if mass <= 0.0 {
            return Err(AnalyticError::ZeroMass);
        }
        let n = m.density.len();
        let h = m.grid.lengths()[0] / n as f64;
        let total: f64 = m.density.iter().sum();
        let mut u = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        u.push(0.0);
        for v in &m.density {
            acc += v;
            u.push((acc / total).min(1.0));
        }
        u[n] = 1.0;
        let x = (0..=n).map(|i| i as f64 * h).collect();
        Ok(Self { mass, u, x })
    }

    /// Quantile on `[u_lo, u_hi]` restricted to cell `k`, affine in `u`.
    fn eval_in(&self, k: usize, u: f64) -> f64 {
        let (ua, ub) = (self.u[k], self.u[k + 1]);
        if ub <= ua {
            return self.x[k];
        }
        self.x[k] + (u - ua) / (ub - ua) * (self.x[k + 1] - self.x[k])
    }
}

/// Walks the common refinement of two quantile partitions, calling
/// `f(u_lo, u_hi, q0(u_lo), q1(u_lo), q0(u_hi), q1(u_hi))` on each piece.
fn for_each_merged(q0: &Quantile, q1: &Quantile, mut f: impl FnMut(f64, f64, f64, f64, f64, f64)) {
    let n0 = q0.u.len() - 1;
    let n1 = q1.u.len() - 1;
    let (mut i, mut j) = (0, 0);
    let mut lo = 0.0;
    while i < n0 && j < n1 {
        // Skip empty cells.
        if q0.u[i + 1] <= lo && i + 1 < n0 {
            i += 1;
            continue;
        }
        if q1.u[j + 1] <= lo && j + 1 < n1 {
            j += 1;
            continue;
        }
        let hi = q0.u[i + 1].min(q1.u[j + 1]);
        if hi > lo {
            f(lo, hi, q0.eval_in(i, lo), q1.eval_in(j, lo), q0.eval_in(i, hi), q1.eval_in(j, hi));
            lo = hi;
        }
        if q0.u[i + 1] <= hi {
            i += 1;
        }
        if q1.u[j + 1] <= hi {
            j += 1;
        }
        if hi >= 1.0 {
            break;
        }
    }
}

/// Displacement interpolation at time `s` between 1D measures of equal mass,
/// returned as a density on the same grid.
pub fn w2_geodesic_1d(rho0: &GridMeasure, rho1: &GridMeasure, s: f64) -> Result<GridMeasure, AnalyticError> {
    rho0.same_domain(rho1)?;
    if !(0.0..=1.0).contains(&s) {
        return Err(AnalyticError::InvalidTime(s));
    }
    let q0 = Quantile::new(rho0)?;
    let q1 = Quantile::new(rho1)?;
    let (m0, m1) = (q0.mass, q1.mass);
    if (m0 - m1).abs() > 1e-9 * m0.max(m1) {
        return Err(AnalyticError::UnequalMasses { m0, m1 });
    }
    let n = rho0.density.len();
    let len = rho0.grid.lengths()[0];
    let h = len / n as f64;
    let mut mass = vec![0.0; n];
    for_each_merged(&q0, &q1, |u0, u1, a0, a1, b0, b1| {
        let lo = (1.0 - s) * a0 + s * a1;
        let hi = (1.0 - s) * b0 + s * b1;
        deposit(&mut mass, h, lo, hi, m0 * (u1 - u0));
    });
    Ok(GridMeasure {
        grid: rho0.grid.clone(),
        density: mass.into_iter().map(|m| m / h).collect(),
    })
}

/// Spreads `m` uniformly over `[lo, hi]` into cells of width `h`.
fn deposit(cells: &mut [f64], h: f64, lo: f64, hi: f64, m: f64) {
    let n = cells.len();
    let cell = |x: f64| ((x / h).floor().max(0.0) as usize).min(n - 1);
    if hi - lo <= 1e-14 * h {
        cells[cell(0.5 * (lo + hi))] += m;
        return;
    }
    let (first, last) = (cell(lo), cell(hi));
    for (k, c) in cells.iter_mut().enumerate().take(last + 1).skip(first) {
        let a = (k as f64 * h).max(lo);
        let b = ((k + 1) as f64 * h).min(hi);
        if b > a {
            *c += m * (b - a) / (hi - lo);
        }
    }
}

/// Time at which the rescaled path of the large-`delta` limit would reach
/// zero mass, `sqrt(m0) / (sqrt(m0) - sqrt(m1))`; `None` for equal masses.
pub fn gbb_singular_time(m0: f64, m1: f64) -> Option<f64> {
    let (a, b) = (m0.sqrt(), m1.sqrt());
    (a != b).then(|| a / (a - b))
}

/// Spatially uniform growth rate of the large-`delta` limit: 0 for equal
/// masses and `2 / (t - t0)` otherwise.
pub fn gbb_rate_of_growth(m0: f64, m1: f64, t: f64) -> f64 {
    match gbb_singular_time(m0, m1) {
        None => 0.0,
        Some(t0) => 2.0 / (t - t0),
    }
}

/// Limit distance as `delta -> inf` once the pure mass change
/// `2 delta^2 (sqrt(m1) - sqrt(m0))^2` is removed: the transport cost between
/// the endpoints rescaled to the geometric mean mass, under the
/// `|v|^2 rho / 2` normalization, i.e. `W2 / sqrt(2)` of the rescaled pair.
pub fn gbb_distance(rho0: &GridMeasure, rho1: &GridMeasure) -> Result<f64, AnalyticError> {
    let (m0, m1) = (rho0.mass(), rho1.mass());
    if m0 <= 0.0 || m1 <= 0.0 {
        return Err(AnalyticError::ZeroMass);
    }
    let g = (m0 * m1).sqrt();
    let w = w2_1d(&rho0.scaled(g / m0), &rho1.scaled(g / m1))?;
    Ok(w / 2f64.sqrt())
}

/// Frame of the large-`delta` limit geodesic: a displacement interpolation
/// between `rho0` and `(m0 / m1) rho1`, reparametrized in time and scaled by
/// the uniform growth factor `((t0 - t) / t0)^2`.
pub fn gbb_geodesic(rho0: &GridMeasure, rho1: &GridMeasure, t: f64) -> Result<GridMeasure, AnalyticError> {
    if !(0.0..=1.0).contains(&t) {
        return Err(AnalyticError::InvalidTime(t));
    }
    let (m0, m1) = (rho0.mass(), rho1.mass());
    if m0 <= 0.0 || m1 <= 0.0 {
        return Err(AnalyticError::ZeroMass);
    }
    let target = rho1.scaled(m0 / m1);
    match gbb_singular_time(m0, m1) {
        None => w2_geodesic_1d(rho0, &target, t),
        Some(t0) => {
            let s = t * (t0 - 1.0) / (t0 - t);
            let frame = w2_geodesic_1d(rho0, &target, s.clamp(0.0, 1.0))?;
            Ok(frame.scaled(((t0 - t) / t0).powi(2)))
        }
    }
}

/// Certificate `2 delta^2 (sqrt(alpha) - 1) / (t sqrt(alpha) + 1 - t)` for the
/// pure growth from `rho0` to `alpha rho0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherRaoCertificate {
    pub alpha: f64,
    pub delta: f64,
}

impl FisherRaoCertificate {
    pub fn new(alpha: f64, delta: f64) -> Result<Self, AnalyticError> {
        check_delta(delta)?;
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(AnalyticError::InvalidMass(alpha));
        }
        Ok(Self { alpha, delta })
    }

    fn denom(&self, t: f64) -> f64 {
        t * self.alpha.sqrt() + 1.0 - t
    }
}

impl DualCertificate for FisherRaoCertificate {
    fn value(&self, t: f64, _x: &[f64]) -> f64 {
        2.0 * self.delta.powi(2) * (self.alpha.sqrt() - 1.0) / self.denom(t)
    }

    fn time_derivative(&self, t: f64, _x: &[f64]) -> f64 {
        let s = self.alpha.sqrt() - 1.0;
        -2.0 * self.delta.powi(2) * s * s / self.denom(t).powi(2)
    }

    fn gradient(&self, _t: f64, x: &[f64]) -> Vec<f64> {
        vec![0.0; x.len()]
    }
}

/// Certificate of one travelling pair in the `delta = 1` chart:
/// `a(t) cos|y - theta| + b(t)` with `a = p - q`, `b = p + q`,
/// `p = 1 / (t - t1)`, `q = 1 / (t - t2)`, continued by the binding
/// `q (1 - cos|y - theta|)` up to `|y - theta| = 2 pi` and by zero beyond.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiracCertificate {
    pub delta: f64,
    pub t1: f64,
    pub t2: f64,
    pub kappa: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Center of the cosine profile, in the original coordinates.
    pub theta: Vec<f64>,
}

impl DiracCertificate {
    fn pq(&self, t: f64) -> (f64, f64) {
        (1.0 / (t - self.t1), 1.0 / (t - self.t2))
    }

    /// Chart radius `|x - theta| / delta`.
    fn radius(&self, x: &[f64]) -> f64 {
        dist(x, &self.theta) / self.delta
    }

    /// `(phi, dt phi, d phi / dr)` in the chart as functions of the radius.
    fn profile(&self, t: f64, r: f64) -> (f64, f64, f64) {
        let (p, q) = self.pq(t);
        if r <= PI {
            let (a, b) = (p - q, p + q);
            let (da, db) = (q * q - p * p, -p * p - q * q);
            (a * r.cos() + b, da * r.cos() + db, -a * r.sin())
        } else if r <= 2.0 * PI {
            (q * (1.0 - r.cos()), -q * q * (1.0 - r.cos()), q * r.sin())
        } else {
            (0.0, 0.0, 0.0)
        }
    }
}

impl DualCertificate for DiracCertificate {
    fn value(&self, t: f64, x: &[f64]) -> f64 {
        self.delta.powi(2) * self.profile(t, self.radius(x)).0
    }

    fn time_derivative(&self, t: f64, x: &[f64]) -> f64 {
        self.delta.powi(2) * self.profile(t, self.radius(x)).1
    }

    fn gradient(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let r = self.radius(x);
        let (_, _, dr) = self.profile(t, r);
        let d = dist(x, &self.theta);
        if d == 0.0 {
            return vec![0.0; x.len()];
        }
        // d/dx of delta^2 f(|x - theta| / delta) = delta f'(r) (x - theta) / |x - theta|
        x.iter().zip(&self.theta).map(|(a, b)| self.delta * dr * (a - b) / d).collect()
    }
}

/// Builds the optimality certificate of a travelling pair.
pub fn build_dirac_certificate(g: &DiracPairGeodesic) -> Result<DiracCertificate, AnalyticError> {
    if g.regime != Regime::Travelling {
        return Err(AnalyticError::NoCertificate(format!("regime is {:?}", g.regime)));
    }
    let (a, b, h0) = (g.a, g.b, g.h0);
    let w = g.omega0 / g.delta;
    // t2 < 0 needs kappa > alpha_c, t1 > 1 needs 1 / kappa > beta_c.
    let alpha_c = 2.0 * b / w;
    let beta_c = 2.0 * (a - b) / w;
    let lo = alpha_c.max(0.0);
    let hi = if beta_c > 0.0 { 1.0 / beta_c } else { f64::INFINITY };
    if !(lo < hi) {
        return Err(AnalyticError::NoCertificate(format!(
            "empty interval for kappa: ({alpha_c}, {hi})"
        )));
    }
    let kappa = match (lo > 0.0, hi.is_finite()) {
        (true, true) => (lo * hi).sqrt(),
        (true, false) => 2.0 * lo,
        (false, true) => 0.5 * hi,
        (false, false) => 1.0,
    };
    let t1 = b / a + w / (2.0 * a * kappa);
    let t2 = b / a - w * kappa / (2.0 * a);
    let lambda2 = a / (1.0 + kappa * kappa);
    let lambda1 = kappa * kappa * lambda2;
    let scale = a.abs().max(b.abs()).max(h0);
    let res_b = (lambda1 * t1 + lambda2 * t2 - b).abs();
    let res_h = (lambda1 * t1 * t1 + lambda2 * t2 * t2 - h0).abs();
    if !(t1 > 1.0 && t2 < 0.0) || res_b > 1e-10 * scale || res_h > 1e-10 * scale {
        return Err(AnalyticError::NoCertificate(format!(
            "t1 = {t1}, t2 = {t2}, residuals {res_b:e}, {res_h:e}"
        )));
    }
    let (k1, k2) = (kappa * kappa * t1 * t1, t2 * t2);
    let c0 = ((k1 - k2) / (k1 + k2)).clamp(-1.0, 1.0);
    // The atom starts at chart distance arccos(c0) ahead of theta.
    let back = g.delta * c0.acos();
    let theta = g.x0.iter().zip(g.direction()).map(|(x, u)| x - back * u).collect();
    Ok(DiracCertificate {
        delta: g.delta,
        t1,
        t2,
        kappa,
        lambda1,
        lambda2,
        theta,
    })
}

/// Certificate of a superposition of separated pairs: each pair's profile
/// within `2 pi delta` of its center, zero elsewhere. Pairs without
/// transport are not supported.
#[derive(Debug, Clone, PartialEq)]
pub struct PairsCertificate {
    pub parts: Vec<DiracCertificate>,
}

pub fn build_pairs_certificate(g: &PairsGeodesic) -> Result<PairsCertificate, AnalyticError> {
    Ok(PairsCertificate {
        parts: g.pairs.iter().map(build_dirac_certificate).collect::<Result<_, _>>()?,
    })
}

impl PairsCertificate {
    fn part(&self, x: &[f64]) -> Option<&DiracCertificate> {
        self.parts.iter().find(|c| c.radius(x) <= 2.0 * PI)
    }
}

impl DualCertificate for PairsCertificate {
    fn value(&self, t: f64, x: &[f64]) -> f64 {
        self.part(x).map_or(0.0, |c| c.value(t, x))
    }

    fn time_derivative(&self, t: f64, x: &[f64]) -> f64 {
        self.part(x).map_or(0.0, |c| c.time_derivative(t, x))
    }

    fn gradient(&self, t: f64, x: &[f64]) -> Vec<f64> {
        self.part(x).map_or_else(|| vec![0.0; x.len()], |c| c.gradient(t, x))
    }
}

/// Largest violation of `dt phi + (|grad phi|^2 + phi^2 / delta^2) / 2 <= 0`
/// on an `nt x nx` sample of `[0, 1] x [lo, hi]` along the pair axis, and the
/// worst on-path residuals of `phi = delta^2 h'/h`, `grad phi = x'` and the
/// equality `dt phi + ... = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub max_violation: f64,
    pub value_residual: f64,
    pub gradient_residual: f64,
    pub equality_residual: f64,
}

pub fn check_dirac_certificate(
    g: &DiracPairGeodesic,
    cert: &DiracCertificate,
    span: (f64, f64),
    samples: (usize, usize),
) -> CertificateReport {
    let d2 = g.delta * g.delta;
    let hj = |t: f64, x: &[f64]| {
        let grad = cert.gradient(t, x);
        let v = cert.value(t, x);
        cert.time_derivative(t, x) + 0.5 * (grad.iter().map(|v| v * v).sum::<f64>() + v * v / d2)
    };
    let u = g.direction();
    let (nt, nx) = samples;
    let mut max_violation = 0.0f64;
    for i in 0..nt {
        let t = i as f64 / (nt - 1) as f64;
        for j in 0..nx {
            let s = span.0 + (span.1 - span.0) * j as f64 / (nx - 1) as f64;
            let x: Vec<f64> = g.x0.iter().zip(&u).map(|(x, u)| x + s * u).collect();
            max_violation = max_violation.max(hj(t, &x));
        }
    }
    let (mut value_residual, mut gradient_residual, mut equality_residual) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..nt {
        let t = i as f64 / (nt - 1) as f64;
        let x = g.x(t);
        value_residual = value_residual.max((cert.value(t, &x) - d2 * g.h_prime(t) / g.h(t)).abs());
        let grad = cert.gradient(t, &x);
        gradient_residual = gradient_residual.max(dist(&grad, &g.velocity(t)));
        equality_residual = equality_residual.max(hj(t, &x).abs());
    }
    CertificateReport {
        max_violation,
        value_residual,
        gradient_residual,
        equality_residual,
    }
}

/// `alpha rho`: distances scale by `sqrt(alpha)`.
pub fn mass_rescale(m: &GridMeasure, alpha: f64) -> GridMeasure {
    m.scaled(alpha)
}

/// Pushforward by `x -> s x`: the grid is stretched and densities divided by
/// `s^d`. Distances for `s delta` are `s` times those for `delta`.
pub fn space_rescale(m: &GridMeasure, s: f64) -> GridMeasure {
    let d = m.grid.dims() as i32;
    GridMeasure {
        grid: m.grid.stretched(s),
        density: m.density.iter().map(|v| v / s.powi(d)).collect(),
    }
}
