//! Property tests for solver and numerics invariants.

use proptest::prelude::*;

use fforge::adaptive::{sample_index_set, step_rng};
use fforge::baselines::FlatVars;
use fforge::frechet::{solve, solve_observed, FrechetOptions, IterationRecord, Mode, SolverState, WeightedDataset};
use fforge::geodesic::{discrete_length, georce, DiscreteCurve, GeorceOptions};
use fforge::manifold::{FieldRef, GenericWind, MetricField, Randers, Reversed, ZooMetric};
use fforge::numerics::{symmetric_eigen, Cholesky, Matrix};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn point(dim: usize, r: f64) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-r..r, dim)
}

fn points(n: std::ops::Range<usize>, dim: usize, r: f64) -> impl Strategy<Value = Vec<Vec<f64>>> {
    proptest::collection::vec(point(dim, r), n)
}

fn spd(n: usize) -> impl Strategy<Value = Matrix> {
    proptest::collection::vec(-1.0..1.0f64, n * n).prop_map(move |m| {
        let b = Matrix::from_row_major(n, n, m);
        let mut a = b.gram();
        a.add_assign(&Matrix::identity(n).scaled(0.1));
        a
    })
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn cholesky_solves_spd_systems(a in spd(4), b in point(4, 3.0)) {
        let x = Cholesky::new(&a).unwrap().solve(&b);
        let r = a.matvec(&x);
        for (ri, bi) in r.iter().zip(&b) {
            prop_assert!((ri - bi).abs() < 1e-9 * (1.0 + bi.abs()));
        }
    }

    #[test]
    fn eigen_reconstructs_symmetric_matrices(a in spd(3)) {
        let (vals, vecs) = symmetric_eigen(&a, 1e-14);
        prop_assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        let back = Matrix::from_fn(3, 3, |i, j| (0..3).map(|k| vals[k] * vecs[(i, k)] * vecs[(j, k)]).sum());
        prop_assert!(back.max_abs_diff(&a) < 1e-10);
    }

    #[test]
    fn euclidean_mean_is_weighted_average(
        pts in points(1..30, 3, 10.0),
        seed in any::<u64>(),
    ) {
        let w: Vec<f64> = (0..pts.len()).map(|i| 0.5 + ((seed >> (i % 60)) & 3) as f64).collect();
        let data = WeightedDataset::with_weights(pts, w).unwrap();
        let want = data.weighted_average();
        let r = solve(&ZooMetric::Euclidean { dim: 3 }, &data, &FrechetOptions { steps: 8, ..Default::default() }, Mode::Riemannian).unwrap();
        for (a, b) in r.mean.iter().zip(&want) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn controls_rebuild_the_curve(a in point(2, 1.0), b in point(2, 1.0), steps in 2usize..40) {
        let c = DiscreteCurve::straight(&a, &b, steps);
        prop_assert_eq!(c.start(), &a[..]);
        prop_assert_eq!(c.end(), &b[..]);
        let rebuilt = DiscreteCurve::from_controls(&a, &c.controls(), Some(&b));
        prop_assert_eq!(rebuilt.points.len(), steps + 1);
        for (p, q) in rebuilt.points.iter().zip(&c.points) {
            for (x, y) in p.iter().zip(q) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn flat_vars_round_trip(pts in points(1..5, 2, 1.0), y in point(2, 1.0), steps in 2usize..6) {
        let data = WeightedDataset::new(pts).unwrap();
        let st = SolverState::straight(&data, &y, steps);
        let back = FlatVars::pack(&st).unpack(&data);
        prop_assert_eq!(back.y, st.y);
        prop_assert_eq!(back.curves, st.curves);
    }

    #[test]
    fn index_sets_are_distinct_and_sorted(total in 1usize..200, frac in 0.0..1.0f64, seed in any::<u64>(), k in 0u64..50) {
        let n = ((total as f64 * frac) as usize).max(1);
        let set = sample_index_set(total, n, &mut step_rng(seed, k)).unwrap();
        prop_assert_eq!(set.len(), n);
        prop_assert!(set.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(set.iter().all(|i| *i < total));
        prop_assert_eq!(&set, &sample_index_set(total, n, &mut step_rng(seed, k)).unwrap());
    }

    #[test]
    fn randers_energy_is_two_homogeneous(x in point(2, 0.4), v in point(2, 1.0), lambda in 0.1..5.0f64) {
        let f = Randers::new(ZooMetric::Sphere { dim: 2 }, GenericWind { scale: 0.5 }, 1.0);
        prop_assume!(f.in_domain(&x) && v.iter().any(|c| c.abs() > 1e-3));
        let scaled: Vec<f64> = v.iter().map(|c| lambda * c).collect();
        let e1 = f.energy_density(&x, &v);
        let e2 = f.energy_density(&x, &scaled);
        prop_assert!((e2 - lambda * lambda * e1).abs() < 1e-10 * (1.0 + e2));
        let r = Reversed(FieldRef(&f));
        let neg: Vec<f64> = v.iter().map(|c| -c).collect();
        prop_assert!((r.energy_density(&x, &v) - f.energy_density(&x, &neg)).abs() < 1e-12 * (1.0 + e1));
    }
}

proptest! {
    #![proptest_config(config(16))]

    #[test]
    fn georce_descends_and_satisfies_cauchy_schwarz(a in point(2, 0.8), b in point(2, 0.8)) {
        prop_assume!(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() > 1e-3);
        let s = ZooMetric::Sphere { dim: 2 };
        // Cauchy-Schwarz gap T*E - L^2 at convergence: it vanishes at second
        // order in 1/T under the left-point rule.
        let gap = |steps: usize| {
            let tol = 1e-10 * (40.0 / steps as f64).powf(1.5);
            let opts = GeorceOptions { steps, tol, max_iter: 500, ..Default::default() };
            let rep = georce(&s, &a, &b, &opts).unwrap();
            assert!(rep.energy_trace.windows(2).all(|w| w[1] <= w[0]));
            assert_eq!(rep.curve.start(), &a[..]);
            assert_eq!(rep.curve.end(), &b[..]);
            let l = discrete_length(&rep.curve, &s).unwrap();
            let te = steps as f64 * rep.energy;
            assert!(l * l <= te * (1.0 + 1e-12));
            (te - l * l) / (l * l)
        };
        let (g40, g160) = (gap(40), gap(160));
        prop_assert!(g40 < 1e-3, "gap at T=40: {}", g40);
        prop_assert!(g160 <= g40 / 8.0 + 1e-12, "gap {} -> {}", g40, g160);
    }

    #[test]
    fn frechet_iterations_keep_invariants(pts in points(2..8, 2, 0.7)) {
        let s = ZooMetric::Sphere { dim: 2 };
        let data = WeightedDataset::new(pts).unwrap();
        let mut bad = Vec::new();
        let mut obs = |rec: &IterationRecord| {
            if rec.energy_after > rec.energy_before {
                bad.push("energy rose".to_string());
            }
            for (i, u) in rec.proposal.controls.iter().enumerate() {
                for k in 0..2 {
                    let sum: f64 = u.iter().map(|c| c[k]).sum();
                    if (sum - (rec.proposal.y[k] - data.points[i][k])).abs() > 1e-9 {
                        bad.push(format!("control sum of curve {i}"));
                    }
                }
            }
        };
        let opts = FrechetOptions { steps: 30, tol: 1e-6, max_iter: 50, ..Default::default() };
        let r = solve_observed(&s, &data, &opts, Mode::Riemannian, Some(&mut obs)).unwrap();
        prop_assert!(bad.is_empty(), "{:?}", bad);
        prop_assert!(r.moi >= 0.0);
    }
}

#[test]
fn mean_beats_every_data_point_as_candidate() {
    use fforge::bench::gen_dataset;
    use fforge::frechet::MoiOptions;
    use fforge::stats::moment_of_inertia;
    for name in ["sphere", "ellipsoid", "torus", "hyperbolic", "paraboloid", "gaussian_fr"] {
        let m = fforge::manifold::ManifoldSpec::new(name, 2).build().unwrap();
        let data = gen_dataset(&m, 8, 42).unwrap();
        let opts = FrechetOptions {
            steps: 30,
            tol: 1e-6,
            ..Default::default()
        };
        let r = solve(&m, &data, &opts, Mode::Riemannian).unwrap();
        for p in &data.points {
            let at = moment_of_inertia(&m, p, &data, Mode::Riemannian, 30, &MoiOptions::default()).unwrap();
            assert!(r.moi <= at + 1e-9, "{name}: mean {} vs data point {}", r.moi, at);
        }
    }
}
