//! Browser bindings for three small demos: the two-Dirac geodesic, a 1D
//! solve shown at `t = 1/2`, and distance against separation.
//!
//! Each demo is a plain Rust function (tested natively) plus a thin
//! `#[wasm_bindgen]` wrapper that turns errors into JS exceptions.

use std::f64::consts::PI;

use wasm_bindgen::prelude::*;
use wfr_core::action::ModelSpec;
use wfr_core::analytic::{wfr_dirac_distance, DiracPairGeodesic, Regime};
use wfr_core::grids::{BoundaryData, GridSpec};
use wfr_core::solver::{dr_solve, SolverConfig};

/// Atoms of the two-Dirac geodesic, flattened: atom `k` lives at time
/// `times[k]` with mass `masses[k]` at `positions[k]`.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct DiracPath {
    times: Vec<f64>,
    masses: Vec<f64>,
    positions: Vec<f64>,
    distance: f64,
    regime: String,
}

#[wasm_bindgen]
impl DiracPath {
    #[wasm_bindgen(getter)]
    pub fn times(&self) -> Vec<f64> {
        self.times.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn masses(&self) -> Vec<f64> {
        self.masses.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn positions(&self) -> Vec<f64> {
        self.positions.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn distance(&self) -> f64 {
        self.distance
    }

    #[wasm_bindgen(getter)]
    pub fn regime(&self) -> String {
        self.regime.clone()
    }
}

pub fn dirac_path(h0: f64, x0: f64, h1: f64, x1: f64, delta: f64, samples: usize) -> Result<DiracPath, String> {
    if samples < 2 {
        return Err("need at least two samples".into());
    }
    let g = DiracPairGeodesic::new(h0, &[x0], h1, &[x1], delta).map_err(|e| e.to_string())?;
    let mut path = DiracPath {
        times: Vec::new(),
        masses: Vec::new(),
        positions: Vec::new(),
        distance: g.distance(),
        regime: match g.regime {
            Regime::Travelling => "travelling",
            Regime::CutLocus => "cut locus",
            Regime::NoTransport => "no transport",
        }
        .into(),
    };
    for i in 0..samples {
        let t = i as f64 / (samples - 1) as f64;
        for atom in g.atoms_at(t) {
            path.times.push(t);
            path.masses.push(atom.mass);
            path.positions.push(atom.position[0]);
        }
    }
    Ok(path)
}

#[wasm_bindgen(js_name = diracPath)]
pub fn dirac_path_js(h0: f64, x0: f64, h1: f64, x1: f64, delta: f64, samples: usize) -> Result<DiracPath, JsError> {
    dirac_path(h0, x0, h1, x1, delta, samples).map_err(|e| JsError::new(&e))
}

/// The `t = 1/2` slice of a solve between two pairs of Gaussian bumps.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Midpoint {
    x: Vec<f64>,
    rho0: Vec<f64>,
    rho1: Vec<f64>,
    rho: Vec<f64>,
    momentum: Vec<f64>,
    source: Vec<f64>,
    distance: f64,
    iterations: usize,
}

#[wasm_bindgen]
impl Midpoint {
    #[wasm_bindgen(getter)]
    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn rho0(&self) -> Vec<f64> {
        self.rho0.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn rho1(&self) -> Vec<f64> {
        self.rho1.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn rho(&self) -> Vec<f64> {
        self.rho.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn momentum(&self) -> Vec<f64> {
        self.momentum.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn source(&self) -> Vec<f64> {
        self.source.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn distance(&self) -> f64 {
        self.distance
    }

    #[wasm_bindgen(getter)]
    pub fn iterations(&self) -> usize {
        self.iterations
    }
}

fn gaussians(x: &[f64], bumps: [(f64, f64); 2]) -> Vec<f64> {
    let s = 0.02;
    let k = 1.0 / (s * (2.0 * PI).sqrt());
    x.iter()
        .map(|x| bumps.iter().map(|(c, m)| m * k * (-(x - c).powi(2) / (2.0 * s * s)).exp()).sum())
        .collect()
}

/// Bumps of mass 1 and 2 at 0.2 and 0.9 moving to 2 and 1 at 0.3 and 0.65,
/// solved with length scale `pi_delta / pi`.
pub fn midpoint(pi_delta: f64, n: usize, nt: usize, iters: usize) -> Result<Midpoint, String> {
    let grid = GridSpec::line(1.0, n, nt).map_err(|e| e.to_string())?;
    let x: Vec<f64> = (0..n).map(|i| grid.cell_center(0, i)).collect();
    let rho0 = gaussians(&x, [(0.2, 1.0), (0.9, 2.0)]);
    let rho1 = gaussians(&x, [(0.3, 2.0), (0.65, 1.0)]);
    let b = BoundaryData::new(&grid, rho0.clone(), rho1.clone()).map_err(|e| e.to_string())?;
    let model = ModelSpec::wfr(pi_delta / PI).map_err(|e| e.to_string())?;
    let cfg = SolverConfig::new(grid, model).with_max_iters(iters);
    let res = dr_solve(&b, &cfg).map_err(|e| e.to_string())?;
    Ok(Midpoint {
        rho: res.density_at(0.5),
        momentum: res.momentum_at(0, 0.5),
        source: res.source_at(0.5),
        distance: res.distance(),
        iterations: res.report.iterations_run,
        x,
        rho0,
        rho1,
    })
}

#[wasm_bindgen(js_name = midpoint)]
pub fn midpoint_js(pi_delta: f64, n: usize, nt: usize, iters: usize) -> Result<Midpoint, JsError> {
    midpoint(pi_delta, n, nt, iters).map_err(|e| JsError::new(&e))
}

/// Distances between `h0` at 0 and `h1` at each of `n` separations in
/// `[0, max_separation]`.
pub fn distance_curve(h0: f64, h1: f64, delta: f64, max_separation: f64, n: usize) -> Result<Vec<f64>, String> {
    if n < 2 || !(max_separation > 0.0) {
        return Err("need n >= 2 and a positive range".into());
    }
    (0..n)
        .map(|i| {
            let s = max_separation * i as f64 / (n - 1) as f64;
            wfr_dirac_distance(h0, &[0.0], h1, &[s], delta).map_err(|e| e.to_string())
        })
        .collect()
}

#[wasm_bindgen(js_name = distanceCurve)]
pub fn distance_curve_js(h0: f64, h1: f64, delta: f64, max_separation: f64, n: usize) -> Result<Vec<f64>, JsError> {
    distance_curve(h0, h1, delta, max_separation, n).map_err(|e| JsError::new(&e))
}
