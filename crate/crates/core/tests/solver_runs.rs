use wfr_core::action::{ModelKind, ModelSpec};
use wfr_core::analytic::{distance_upper_bound, fisher_rao_distance_squared, GridMeasure};
use wfr_core::grids::{BoundaryData, GridSpec};
use wfr_core::solver::{dr_solve, SolverConfig, SolverError};

fn bump(grid: &GridSpec, c: f64, h: f64) -> Vec<f64> {
    (0..grid.n_space()[0])
        .map(|i| 0.05 + h * (-(grid.cell_center(0, i) - c).powi(2) / 0.005).exp())
        .collect()
}

#[test]
fn wfr_sits_below_the_no_transport_bound() {
    let grid = GridSpec::line(1.0, 64, 8).unwrap();
    let (r0, r1) = (bump(&grid, 0.4, 1.0), bump(&grid, 0.6, 1.5));
    let delta = 0.2;
    let b = BoundaryData::new(&grid, r0.clone(), r1.clone()).unwrap();
    let res = dr_solve(&b, &SolverConfig::new(grid.clone(), ModelSpec::wfr(delta).unwrap())).unwrap();
    let m0 = GridMeasure::new(&grid, r0).unwrap();
    let m1 = GridMeasure::new(&grid, r1).unwrap();
    let bound = distance_upper_bound(&m0, &m1, delta).unwrap();
    assert!(res.distance_squared() < bound.tight);
    assert!(bound.tight <= bound.loose);
    assert!(res.min_density() > -1e-6);
}

#[test]
fn two_dimensional_run_conserves_structure() {
    let grid = GridSpec::plane([1.0, 1.0], [16, 16], 6).unwrap();
    let n = grid.spatial_cells();
    let coords = |s: usize| grid.spatial_coords(s);
    let blob = |cx: f64, cy: f64| -> Vec<f64> {
        (0..n)
            .map(|s| {
                let p = coords(s);
                0.1 + (-((p[0] - cx).powi(2) + (p[1] - cy).powi(2)) / 0.02).exp()
            })
            .collect()
    };
    let b = BoundaryData::new(&grid, blob(0.4, 0.4), blob(0.6, 0.55)).unwrap();
    let res = dr_solve(&b, &SolverConfig::new(grid.clone(), ModelSpec::wfr(0.3).unwrap())).unwrap();
    assert!(res.distance_squared() > 0.0);
    assert!(res.report.continuity_residual < 1e-4);
    assert!(res.report.interpolation_residual < 1e-3);
}

#[test]
fn all_models_run_and_fr_matches_closed_form() {
    let grid = GridSpec::line(1.0, 64, 8).unwrap();
    let (r0, r1) = (bump(&grid, 0.5, 1.0), bump(&grid, 0.5, 2.0));
    let b = BoundaryData::new(&grid, r0.clone(), r1.clone()).unwrap();
    for kind in ModelKind::ALL {
        let cfg = SolverConfig::new(grid.clone(), ModelSpec::new(kind, 1.0).unwrap());
        match (kind, dr_solve(&b, &cfg)) {
            (ModelKind::BalancedW2, Err(SolverError::UnequalMasses { .. })) => {}
            (ModelKind::FisherRao, Ok(res)) => {
                let exact = fisher_rao_distance_squared(
                    &GridMeasure::new(&grid, r0.clone()).unwrap(),
                    &GridMeasure::new(&grid, r1.clone()).unwrap(),
                )
                .unwrap();
                assert!((res.distance_squared() - exact).abs() < 1e-2 * exact);
            }
            (_, Ok(res)) => assert!(res.distance_squared().is_finite()),
            (k, Err(e)) => panic!("{k:?}: {e}"),
        }
    }
}
