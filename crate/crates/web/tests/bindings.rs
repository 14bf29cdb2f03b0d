use fforge_web::{frechet_mean, geodesic, principal_geodesic};

#[test]
fn euclidean_geodesic_is_the_segment() {
    let g = geodesic("euclidean", vec![0.0, 0.0], vec![3.0, 4.0], 0.0, 10).unwrap();
    assert_eq!(g.points().len(), 22);
    assert!((g.length() - 5.0).abs() < 1e-12);
}

#[test]
fn sphere_mean_of_a_symmetric_cross_is_the_pole() {
    let pts = vec![0.3, 0.0, -0.3, 0.0, 0.0, 0.3, 0.0, -0.3];
    let r = frechet_mean("sphere", pts, 0.0, false, 40).unwrap();
    assert!(r.converged());
    assert!(r.mean().iter().all(|v| v.abs() < 1e-3), "{:?}", r.mean());
    assert_eq!(r.curves().len(), 4 * 41 * 2);
}

#[test]
fn wind_separates_forward_and_backward_means() {
    let pts = vec![0.1, 0.2, -0.2, 0.1, 0.0, -0.3, 0.3, 0.3];
    let fwd = frechet_mean("sphere", pts.clone(), 1.0, false, 40).unwrap();
    let bwd = frechet_mean("sphere", pts, 1.0, true, 40).unwrap();
    assert!((fwd.moi() - bwd.moi()).abs() > 1e-3 * fwd.moi());
}

#[test]
fn principal_geodesic_follows_the_spread() {
    let pts = vec![-0.5, 0.01, -0.2, -0.02, 0.0, 0.0, 0.25, 0.02, 0.5, -0.01];
    let p = principal_geodesic("sphere", pts, 1.5, 40).unwrap();
    let d = p.direction();
    assert!(d[0].abs() > 0.99, "{d:?}");
    assert_eq!(p.path().len(), 49 * 2);
}

#[test]
fn malformed_input_is_an_error() {
    assert!(frechet_mean("sphere", vec![0.1, 0.2, 0.3], 0.0, false, 20).is_err());
    assert!(geodesic("moebius", vec![0.0, 0.0], vec![1.0, 0.0], 0.0, 10).is_err());
    assert!(principal_geodesic("sphere", vec![0.1, 0.1], 1.0, 20).is_err());
}
