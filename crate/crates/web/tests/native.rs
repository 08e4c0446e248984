use std::f64::consts::PI;

use wfr_web::{dirac_path, distance_curve, midpoint};

#[test]
fn dirac_path_travels_then_splits() {
    let p = dirac_path(1.0, 0.0, 2.0, 1.0, 1.0, 5).unwrap();
    assert_eq!(p.regime(), "travelling");
    assert_eq!(p.times().len(), 5);
    assert!((p.positions()[4] - 1.0).abs() < 1e-12);
    assert!((p.masses()[4] - 2.0).abs() < 1e-12);

    let far = dirac_path(1.0, 0.0, 2.0, 4.0, 1.0, 3).unwrap();
    assert_eq!(far.regime(), "cut locus");
    // Two atoms per sample: one fading, one growing.
    assert_eq!(far.times(), [0.0, 0.0, 0.5, 0.5, 1.0, 1.0]);
    assert!((far.distance() - (2.0f64 * 3.0).sqrt()).abs() < 1e-12);
    assert!(dirac_path(-1.0, 0.0, 1.0, 1.0, 1.0, 3).is_err());
}

#[test]
fn distance_curve_saturates_at_the_cut_locus() {
    let d = distance_curve(1.0, 1.5, 0.5, 2.0 * PI * 0.5, 41).unwrap();
    assert_eq!(d[0], (2.0 * 0.25 * (1.5f64.sqrt() - 1.0).powi(2)).sqrt());
    assert!(d.windows(2).all(|w| w[1] >= w[0] - 1e-15));
    let cut = (2.0 * 0.25 * 2.5f64).sqrt();
    assert!((d[40] - cut).abs() < 1e-12);
    assert!((d[20] - cut).abs() < 1e-12);
    assert!(distance_curve(1.0, 1.0, 1.0, 1.0, 1).is_err());
}

#[test]
fn midpoint_slice_has_the_right_shape() {
    let m = midpoint(0.3, 64, 6, 200).unwrap();
    assert_eq!(m.x().len(), 64);
    assert_eq!(m.rho().len(), 64);
    assert_eq!(m.momentum().len(), 64);
    assert_eq!(m.iterations(), 200);
    assert!(m.distance() > 0.0);
    assert!(midpoint(0.3, 1, 6, 10).is_err());
}
