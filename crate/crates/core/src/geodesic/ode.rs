//! Geodesic initial-value problem, integrated with the Dormand–Prince 5(4)
//! pair.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{christoffel, RiemannianMetric};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OdeOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            abs_tol: 1e-8,
            rel_tol: 1e-8,
            initial_step: 1e-3,
            min_step: 1e-14,
            max_steps: 100_000,
        }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// State `(x, ẋ)` stacked, derivative `(ẋ, −Γ(ẋ, ẋ))`.
fn rhs<M: RiemannianMetric + ?Sized>(field: &M, state: &[f64], time: f64) -> Result<Vec<f64>> {
    let d = state.len() / 2;
    let (x, v) = state.split_at(d);
    if !field.in_domain(x) {
        return Err(Error::Integration {
            time,
            reason: format!("left the chart domain at {x:?}"),
        });
    }
    let gamma = christoffel(field, x).map_err(|e| Error::Integration {
        time,
        reason: e.to_string(),
    })?;
    let mut out = v.to_vec();
    out.extend(gamma.iter().map(|gk| -gk.bilinear(v, v)));
    Ok(out)
}

/// Solution of the geodesic equation on `[0, 1]` from `x` with velocity `v`,
/// as the accepted time steps `(t, x(t))`.
pub fn geodesic_path<M: RiemannianMetric + ?Sized>(
    field: &M,
    x: &[f64],
    v: &[f64],
    opts: &OdeOptions,
) -> Result<Vec<(f64, Vec<f64>)>> {
    let d = x.len();
    let mut y: Vec<f64> = x.iter().chain(v).copied().collect();
    let mut t = 0.0;
    let mut h = opts.initial_step;
    let mut path = vec![(0.0, x.to_vec())];
    let mut k1 = rhs(field, &y, t)?;
    let mut steps = 0;
    while t < 1.0 {
        if steps >= opts.max_steps {
            return Err(Error::Integration {
                time: t,
                reason: "step budget exhausted".into(),
            });
        }
        steps += 1;
        h = h.min(1.0 - t);
        let mut ks = vec![k1.clone()];
        let mut failed = None;
        for s in 1..7 {
            let ys: Vec<f64> = (0..2 * d)
                .map(|j| y[j] + h * (0..s).map(|r| A[s][r] * ks[r][j]).sum::<f64>())
                .collect();
            match rhs(field, &ys, t + C[s] * h) {
                Ok(k) => ks.push(k),
                Err(e) => {
                    failed = Some(e);
                    break;
                }
            }
        }
        let accepted = match failed {
            // A stage outside the domain: retry smaller before giving up.
            Some(e) => {
                h *= 0.25;
                if h < opts.min_step {
                    return Err(e);
                }
                continue;
            }
            None => {
                let y5: Vec<f64> = (0..2 * d)
                    .map(|j| y[j] + h * (0..7).map(|r| B5[r] * ks[r][j]).sum::<f64>())
                    .collect();
                let err = (0..2 * d)
                    .map(|j| {
                        let e = h * (0..7).map(|r| (B5[r] - B4[r]) * ks[r][j]).sum::<f64>();
                        let sc = opts.abs_tol + opts.rel_tol * y[j].abs().max(y5[j].abs());
                        (e / sc).powi(2)
                    })
                    .sum::<f64>()
                    / (2 * d) as f64;
                let err = err.sqrt();
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                let ok = err <= 1.0 && y5.iter().all(|c| c.is_finite());
                let h_used = h;
                h *= factor;
                if ok {
                    Some((y5, ks.pop().expect("seven stages"), h_used))
                } else {
                    None
                }
            }
        };
        match accepted {
            Some((y5, k7, h_used)) => {
                t = if 1.0 - (t + h_used) < 1e-15 { 1.0 } else { t + h_used };
                y = y5;
                k1 = k7; // first-same-as-last
                path.push((t, y[..d].to_vec()));
            }
            None => {
                if h < opts.min_step {
                    return Err(Error::Integration {
                        time: t,
                        reason: "step size underflow".into(),
                    });
                }
            }
        }
    }
    Ok(path)
}

/// `Exp_x(v)`: the time-1 point of the geodesic with `γ(0) = x`, `γ̇(0) = v`.
pub fn exp_map_ode<M: RiemannianMetric + ?Sized>(field: &M, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    exp_map_with(field, x, v, &OdeOptions::default())
}

pub fn exp_map_with<M: RiemannianMetric + ?Sized>(field: &M, x: &[f64], v: &[f64], opts: &OdeOptions) -> Result<Vec<f64>> {
    let path = geodesic_path(field, x, v, opts)?;
    Ok(path.last().expect("path holds the start point").1.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::{chart_distance, georce, GeorceOptions};
    use crate::manifold::zoo::sphere_distance;
    use crate::manifold::ZooMetric;

    #[test]
    fn flat_exp_is_translation() {
        let e = ZooMetric::Euclidean { dim: 3 };
        let p = exp_map_ode(&e, &[1.0, 2.0, 3.0], &[0.5, -1.0, 2.0]).unwrap();
        for (a, b) in p.iter().zip([1.5, 1.0, 5.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_exp_preserves_speed() {
        let s = ZooMetric::Sphere { dim: 2 };
        let x = [0.2, -0.1];
        let v = [0.9, 0.4];
        let speed = s.metric_at(&x).bilinear(&v, &v).sqrt();
        let y = exp_map_ode(&s, &x, &v).unwrap();
        assert!((sphere_distance(&x, &y) - speed).abs() < 1e-6);
    }

    #[test]
    fn shooting_hits_the_boundary_point() {
        let s = ZooMetric::Sphere { dim: 2 };
        let (a, b) = ([0.3, 0.2], [-0.4, 0.6]);
        let opts = GeorceOptions {
            steps: 1000,
            tol: 1e-9,
            ..Default::default()
        };
        let r = georce(&s, &a, &b, &opts).unwrap();
        let u0: Vec<f64> = r.curve.controls()[0].iter().map(|c| c * 1000.0).collect();
        let hit = exp_map_ode(&s, &a, &u0).unwrap();
        assert!(chart_distance(&hit, &b) < 1e-3);
    }

    #[test]
    fn leaving_the_domain_is_an_integration_error() {
        // Speed 8 > π: the geodesic runs through the south pole, which the
        // chart sends to infinity.
        let s = ZooMetric::Sphere { dim: 2 };
        let err = exp_map_ode(&s, &[0.0, 0.0], &[4.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::Integration { .. }));
    }
}
