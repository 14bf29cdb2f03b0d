//! Discrete curves, their energy and length, and the single-geodesic GEORCE
//! solver. The per-curve update quantities live here too because the mean
//! solvers reuse them curve by curve.

mod ode;

pub use ode::{exp_map_ode, geodesic_path, OdeOptions};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{metric_velocity_gradients, MetricField};
use crate::numerics::linalg::{norm, sub};
use crate::numerics::{Cholesky, Matrix};

/// Points `x_0, …, x_T` of a discretized curve in chart coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteCurve {
    pub points: Vec<Vec<f64>>,
}

impl DiscreteCurve {
    /// `x_t = a + (b − a) t / T`, with both ends exact.
    pub fn straight(a: &[f64], b: &[f64], steps: usize) -> Self {
        let mut points: Vec<Vec<f64>> = (0..steps)
            .map(|t| {
                let s = t as f64 / steps as f64;
                a.iter().zip(b).map(|(p, q)| p + (q - p) * s).collect()
            })
            .collect();
        points.push(b.to_vec());
        DiscreteCurve { points }
    }

    /// Rebuild from a start point and controls by the state equation, then
    /// pin the last point to `end` exactly when given.
    pub fn from_controls(start: &[f64], controls: &[Vec<f64>], end: Option<&[f64]>) -> Self {
        let mut points = Vec::with_capacity(controls.len() + 1);
        let mut x = start.to_vec();
        points.push(x.clone());
        for u in controls {
            for (xi, ui) in x.iter_mut().zip(u) {
                *xi += ui;
            }
            points.push(x.clone());
        }
        if let Some(e) = end {
            *points.last_mut().expect("at least one point") = e.to_vec();
        }
        DiscreteCurve { points }
    }

    /// Number of segments `T`.
    pub fn steps(&self) -> usize {
        self.points.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn start(&self) -> &[f64] {
        &self.points[0]
    }

    pub fn end(&self) -> &[f64] {
        &self.points[self.steps()]
    }

    /// `u_t = x_{t+1} − x_t`.
    pub fn controls(&self) -> Vec<Vec<f64>> {
        self.points.windows(2).map(|w| sub(&w[1], &w[0])).collect()
    }

    /// CSV with header `t,x_0,…` and one row per grid point.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((0..self.dim()).map(|k| format!("x_{k}")));
        w.write_record(&header)?;
        for (t, p) in self.points.iter().enumerate() {
            let mut row = vec![t.to_string()];
            row.extend(p.iter().map(|v| fmt_float(*v)));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut points = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let p = rec
                .iter()
                .skip(1)
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Config(format!("bad curve value '{s}': {e}"))))
                .collect::<Result<Vec<_>>>()?;
            points.push(p);
        }
        if points.len() < 2 {
            return Err(Error::Config("a curve needs at least two points".into()));
        }
        Ok(DiscreteCurve { points })
    }
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn check_point<F: MetricField + ?Sized>(field: &F, x: &[f64], t: usize) -> Result<()> {
    if field.in_domain(x) {
        Ok(())
    } else {
        Err(Error::domain(format!("point {x:?} at t={t}")))
    }
}

/// `Σ_t u_tᵀ G(x_t, u_t) u_t`.
pub fn discrete_energy<F: MetricField + ?Sized>(curve: &DiscreteCurve, field: &F) -> Result<f64> {
    segment_energies(curve, field).map(|e| e.iter().sum())
}

/// `Σ_t √(u_tᵀ G(x_t, u_t) u_t)`.
pub fn discrete_length<F: MetricField + ?Sized>(curve: &DiscreteCurve, field: &F) -> Result<f64> {
    segment_energies(curve, field).map(|e| e.iter().map(|v| v.max(0.0).sqrt()).sum())
}

/// Per-segment energies `u_tᵀ G(x_t, u_t) u_t`.
pub fn segment_energies<F: MetricField + ?Sized>(curve: &DiscreteCurve, field: &F) -> Result<Vec<f64>> {
    for (t, p) in curve.points.iter().enumerate() {
        check_point(field, p, t)?;
    }
    curve
        .points
        .windows(2)
        .enumerate()
        .map(|(t, w)| {
            let u = sub(&w[1], &w[0]);
            let e = if u.iter().all(|c| *c == 0.0) {
                0.0
            } else {
                field.energy_density(&w[0], &u)
            };
            if e.is_finite() {
                Ok(e)
            } else {
                Err(Error::Numerical {
                    index: t,
                    context: "segment energy".into(),
                })
            }
        })
        .collect()
}

/// Tensors, gradients and partial sums of one curve at the current iterate.
///
/// `nu` and `zeta` already include the curve weight `w`; `rsum[t]` is
/// `Σ_{j>t} ν_j`, so `rsum[T−1] = 0` and `ν_0` never contributes.
#[derive(Clone, Debug)]
pub struct CurveAux {
    pub g: Vec<Matrix>,
    pub ginv: Vec<Matrix>,
    pub nu: Vec<Vec<f64>>,
    pub zeta: Vec<Vec<f64>>,
    pub rsum: Vec<Vec<f64>>,
    /// `Σ_t G_t^{-1}`.
    pub s: Matrix,
    /// `Σ_t G_t^{-1}(ζ_t + R_t)`.
    pub b: Vec<f64>,
    /// Unweighted energy of the curve.
    pub energy: f64,
    pub weight: f64,
}

pub fn curve_aux<F: MetricField + ?Sized>(
    field: &F,
    curve: &DiscreteCurve,
    weight: f64,
    index: Option<usize>,
) -> Result<CurveAux> {
    let steps = curve.steps();
    let d = curve.dim();
    let controls = curve.controls();
    let mut g = Vec::with_capacity(steps);
    let mut ginv = Vec::with_capacity(steps);
    let mut nu = Vec::with_capacity(steps);
    let mut zeta = Vec::with_capacity(steps);
    let mut energy = 0.0;
    for (t, u) in controls.iter().enumerate() {
        let x = &curve.points[t];
        check_point(field, x, t).map_err(|e| e.at(t, index))?;
        let at_rest = u.iter().all(|c| *c == 0.0);
        let (gt, n, z) = if at_rest && field.velocity_dependent() {
            // A Finsler tensor has no limit at v = 0; any direction gives an
            // SPD tensor, and ν, ζ vanish with u.
            let mut e0 = vec![0.0; d];
            e0[0] = 1.0;
            (field.tensor(x, &e0), vec![0.0; d], vec![0.0; d])
        } else {
            let (n, z) = metric_velocity_gradients(field, x, u)?;
            (field.tensor(x, u), n, z)
        };
        let gt = gt.map_err(|e| e.at(t, index))?;
        let chol = Cholesky::new(&gt).map_err(|e| e.at(t, index))?;
        energy += if at_rest { 0.0 } else { gt.bilinear(u, u) };
        ginv.push(chol.inverse());
        g.push(gt);
        nu.push(n.into_iter().map(|v| v * weight).collect::<Vec<_>>());
        zeta.push(z.into_iter().map(|v| v * weight).collect::<Vec<_>>());
    }
    let mut rsum = vec![vec![0.0; d]; steps];
    for t in (0..steps.saturating_sub(1)).rev() {
        rsum[t] = rsum[t + 1].iter().zip(&nu[t + 1]).map(|(a, b)| a + b).collect();
    }
    let mut s = Matrix::zeros(d, d);
    let mut b = vec![0.0; d];
    for t in 0..steps {
        s.add_assign(&ginv[t]);
        let rhs: Vec<f64> = zeta[t].iter().zip(&rsum[t]).map(|(a, c)| a + c).collect();
        for (bi, v) in b.iter_mut().zip(ginv[t].matvec(&rhs)) {
            *bi += v;
        }
    }
    Ok(CurveAux {
        g,
        ginv,
        nu,
        zeta,
        rsum,
        s,
        b,
        energy,
        weight,
    })
}

impl CurveAux {
    pub fn steps(&self) -> usize {
        self.g.len()
    }

    /// `p_t = ∂(w e_t)/∂u_t = 2w G_t u_t + ζ_t`.
    fn momentum(&self, controls: &[Vec<f64>]) -> Vec<Vec<f64>> {
        controls
            .iter()
            .enumerate()
            .map(|(t, u)| {
                self.g[t]
                    .matvec(u)
                    .iter()
                    .zip(&self.zeta[t])
                    .map(|(gu, z)| 2.0 * self.weight * gu + z)
                    .collect()
            })
            .collect()
    }

    /// Gradient of the weighted curve energy w.r.t. the interior points
    /// `x_1 … x_{T−1}` and w.r.t. the end point `x_T`.
    pub fn energy_gradient(&self, controls: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>) {
        let p = self.momentum(controls);
        let steps = self.steps();
        let interior = (1..steps)
            .map(|t| {
                (0..p[t].len())
                    .map(|k| self.nu[t][k] - p[t][k] + p[t - 1][k])
                    .collect()
            })
            .collect();
        (interior, p[steps - 1].clone())
    }

    /// `u_t = −(1/2w) G_t^{-1}(μ + ζ_t + R_t)`.
    pub fn controls_for(&self, mu: &[f64]) -> Vec<Vec<f64>> {
        let c = -0.5 / self.weight;
        (0..self.steps())
            .map(|t| {
                let rhs: Vec<f64> = (0..mu.len())
                    .map(|k| mu[k] + self.zeta[t][k] + self.rsum[t][k])
                    .collect();
                self.ginv[t].matvec(&rhs).into_iter().map(|v| c * v).collect()
            })
            .collect()
    }
}

/// Backtracking on `α ∈ {1, ρ, ρ², …}` with an Armijo margin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LineSearch {
    pub rho: f64,
    pub c1: f64,
    pub max_halvings: usize,
}

impl Default for LineSearch {
    fn default() -> Self {
        LineSearch {
            rho: 0.5,
            c1: 1e-4,
            max_halvings: 50,
        }
    }
}

/// Outcome of an accepted step.
pub struct Accepted<S> {
    pub alpha: f64,
    pub energy: f64,
    pub state: S,
}

impl LineSearch {
    /// `eval(α)` returns the energy and state of the blended iterate, or
    /// `None` when the blend leaves the domain. The decrease expected of the
    /// full step, `E₀ − E(1)`, sets the Armijo slope when positive; otherwise
    /// any strict decrease is accepted.
    pub fn run<S>(&self, e0: f64, mut eval: impl FnMut(f64) -> Option<(f64, S)>) -> Result<Accepted<S>> {
        let first = eval(1.0).filter(|(e, _)| e.is_finite());
        let slope = first.as_ref().map(|(e, _)| e0 - e).filter(|d| *d > 0.0);
        let accept = |alpha: f64, e: f64| match slope {
            Some(d) => e <= e0 - self.c1 * alpha * d,
            None => e < e0,
        };
        if let Some((e, s)) = first {
            if accept(1.0, e) {
                return Ok(Accepted {
                    alpha: 1.0,
                    energy: e,
                    state: s,
                });
            }
        }
        let mut alpha = 1.0;
        for _ in 0..self.max_halvings {
            alpha *= self.rho;
            if let Some((e, s)) = eval(alpha) {
                if e.is_finite() && accept(alpha, e) {
                    return Ok(Accepted { alpha, energy: e, state: s });
                }
            }
        }
        Err(Error::StalledLineSearch {
            halvings: self.max_halvings,
        })
    }
}

/// Why an iterative solver stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    StalledLineSearch,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeorceOptions {
    /// Number of segments `T`.
    pub steps: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub line_search: LineSearch,
}

impl Default for GeorceOptions {
    fn default() -> Self {
        GeorceOptions {
            steps: 100,
            tol: 1e-6,
            max_iter: 100,
            line_search: LineSearch::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeodesicReport {
    pub curve: DiscreteCurve,
    pub energy: f64,
    pub length: f64,
    pub iterations: usize,
    pub final_grad_norm: f64,
    pub termination: Termination,
    /// Energy before the first iteration and after each accepted one.
    pub energy_trace: Vec<f64>,
}

impl GeodesicReport {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

fn interior_norm(interior: &[Vec<f64>]) -> f64 {
    interior.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

/// Geodesic between `a` and `b` by GEORCE, starting from the straight chart
/// segment. Works for Riemannian and Finsler fields alike; for the former
/// every `ζ_t` vanishes.
pub fn georce<F: MetricField + ?Sized>(field: &F, a: &[f64], b: &[f64], opts: &GeorceOptions) -> Result<GeodesicReport> {
    for p in [a, b] {
        if p.len() != field.dim() {
            return Err(Error::Shape {
                expected: format!("{} coordinates", field.dim()),
                got: format!("{}", p.len()),
            });
        }
    }
    georce_from(field, DiscreteCurve::straight(a, b, opts.steps), opts)
}

/// [`georce`] for a Finsler field; the velocity-dependent terms are picked
/// up from the field itself.
pub fn georce_finsler<F: MetricField + ?Sized>(
    field: &F,
    a: &[f64],
    b: &[f64],
    opts: &GeorceOptions,
) -> Result<GeodesicReport> {
    georce(field, a, b, opts)
}

/// GEORCE from a given initial curve; its end points are kept fixed.
pub fn georce_from<F: MetricField + ?Sized>(
    field: &F,
    init: DiscreteCurve,
    opts: &GeorceOptions,
) -> Result<GeodesicReport> {
    if init.steps() < 1 {
        return Err(Error::Config("a curve needs T >= 1".into()));
    }
    if init.start().len() != field.dim() || init.end().len() != field.dim() {
        return Err(Error::Shape {
            expected: format!("{} coordinates", field.dim()),
            got: format!("{}", init.start().len()),
        });
    }
    let a = init.start().to_vec();
    let b = init.end().to_vec();
    let mut curve = init;
    let mut energy = discrete_energy(&curve, field)?;
    let mut trace = vec![energy];
    let mut iterations = 0;
    let mut termination = Termination::MaxIterations;
    let mut grad_norm;
    loop {
        let aux = curve_aux(field, &curve, 1.0, None)?;
        let u_old = curve.controls();
        grad_norm = interior_norm(&aux.energy_gradient(&u_old).0);
        if grad_norm <= opts.tol {
            termination = Termination::Converged;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        let chol = Cholesky::new(&aux.s)?;
        let rhs: Vec<f64> = (0..a.len()).map(|k| 2.0 * (a[k] - b[k]) - aux.b[k]).collect();
        let mu = chol.solve(&rhs);
        let u_new = aux.controls_for(&mu);
        let step = opts.line_search.run(energy, |alpha| {
            let blended: Vec<Vec<f64>> = u_new
                .iter()
                .zip(&u_old)
                .map(|(n, o)| n.iter().zip(o).map(|(p, q)| alpha * p + (1.0 - alpha) * q).collect())
                .collect();
            let cand = DiscreteCurve::from_controls(&a, &blended, Some(&b));
            discrete_energy(&cand, field).ok().map(|e| (e, cand))
        });
        match step {
            Ok(acc) => {
                curve = acc.state;
                energy = acc.energy;
                trace.push(energy);
                iterations += 1;
            }
            Err(Error::StalledLineSearch { .. }) => {
                termination = Termination::StalledLineSearch;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let length = discrete_length(&curve, field)?;
    Ok(GeodesicReport {
        curve,
        energy,
        length,
        iterations,
        final_grad_norm: grad_norm,
        termination,
        energy_trace: trace,
    })
}

/// Euclidean distance between two chart points.
pub fn chart_distance(a: &[f64], b: &[f64]) -> f64 {
    norm(&sub(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::zoo::{hyperbolic_distance, sphere_distance};
    use crate::manifold::{Randers, ZeroWind, ZooMetric};
    use crate::numerics::grad_central_difference;

    #[test]
    fn constant_and_straight_curves() {
        let e = ZooMetric::Euclidean { dim: 2 };
        let c = DiscreteCurve::straight(&[1.0, 1.0], &[1.0, 1.0], 10);
        assert_eq!(discrete_energy(&c, &e).unwrap(), 0.0);
        assert_eq!(discrete_length(&c, &e).unwrap(), 0.0);
        let s = DiscreteCurve::straight(&[0.0, 0.0], &[3.0, 4.0], 7);
        assert!((discrete_energy(&s, &e).unwrap() - 25.0 / 7.0).abs() < 1e-12);
        assert!((discrete_length(&s, &e).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn energy_matches_hand_loop_on_sphere() {
        let s = ZooMetric::Sphere { dim: 2 };
        let (a, b) = ([0.3, -0.2], [-0.5, 0.7]);
        let c = DiscreteCurve::straight(&a, &b, 100);
        let mut want = 0.0;
        for t in 0..100 {
            let x: Vec<f64> = (0..2).map(|k| a[k] + (b[k] - a[k]) * t as f64 / 100.0).collect();
            let u: Vec<f64> = (0..2).map(|k| (b[k] - a[k]) / 100.0).collect();
            let r2 = x[0] * x[0] + x[1] * x[1];
            want += 4.0 / (1.0 + r2).powi(2) * (u[0] * u[0] + u[1] * u[1]);
        }
        assert!((discrete_energy(&c, &s).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn out_of_domain_point_is_reported() {
        let g = ZooMetric::GaussianFr;
        let c = DiscreteCurve::straight(&[0.0, 1.0], &[0.0, -1.0], 4);
        assert!(matches!(discrete_energy(&c, &g), Err(Error::Domain { .. })));
    }

    #[test]
    fn aux_gradient_matches_finite_differences() {
        let s = ZooMetric::Sphere { dim: 2 };
        let mut c = DiscreteCurve::straight(&[0.3, -0.2], &[-0.5, 0.7], 6);
        c.points[2][0] += 0.1;
        c.points[4][1] -= 0.2;
        let aux = curve_aux(&s, &c, 1.7, None).unwrap();
        let (interior, end) = aux.energy_gradient(&c.controls());
        let flat: Vec<f64> = c.points[1..].iter().flatten().copied().collect();
        let f = |z: &[f64]| {
            let mut cc = c.clone();
            for (t, p) in cc.points[1..].iter_mut().enumerate() {
                p.copy_from_slice(&z[2 * t..2 * t + 2]);
            }
            1.7 * discrete_energy(&cc, &s).unwrap()
        };
        let fd = grad_central_difference(f, &flat, 1e-6);
        let ad: Vec<f64> = interior.iter().flatten().chain(&end).copied().collect();
        for (x, y) in ad.iter().zip(&fd) {
            assert!((x - y).abs() < 1e-6 * x.abs().max(1.0), "{x} vs {y}");
        }
    }

    #[test]
    fn euclidean_is_immediate() {
        let e = ZooMetric::Euclidean { dim: 3 };
        let mut c = DiscreteCurve::straight(&[0.0; 3], &[1.0, 2.0, 3.0], 10);
        c.points[5][1] += 0.7;
        let r = georce_from(&e, c, &GeorceOptions::default()).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(r.converged());
        assert!((r.length - 14f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn sphere_length_is_great_circle() {
        let s = ZooMetric::Sphere { dim: 2 };
        let (a, b) = ([0.3, -0.2], [-0.3, 0.25]);
        let r = georce(&s, &a, &b, &GeorceOptions::default()).unwrap();
        let want = sphere_distance(&a, &b);
        assert!((r.length - want).abs() < 1e-3 * want, "{} vs {want}", r.length);
        assert!(r.energy_trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.length.powi(2) <= 100.0 * r.energy * (1.0 + 1e-12));
    }

    fn with_steps(steps: usize) -> GeorceOptions {
        GeorceOptions {
            steps,
            tol: 1e-9,
            ..Default::default()
        }
    }

    #[test]
    fn hyperbolic_length_converges_first_order() {
        // Metric at the left end of each segment: O(1/T) bias in the length.
        let h = ZooMetric::Hyperbolic;
        let (a, b) = ([0.8, 0.3], [1.2, 1.1]);
        let want = hyperbolic_distance(&a, &b);
        let err = |steps| (georce(&h, &a, &b, &with_steps(steps)).unwrap().length - want).abs() / want;
        let (coarse, fine) = (err(100), err(400));
        assert!(coarse < 5e-3 && fine < 1e-3);
        assert!(fine < coarse / 3.0, "{coarse} -> {fine}");
    }

    #[test]
    fn reversal_gap_vanishes_with_refinement() {
        let t = ZooMetric::Torus { major: 3.0, minor: 1.0 };
        let (a, b) = ([0.2, 0.1], [1.0, 1.3]);
        let gap = |steps| {
            let f = georce(&t, &a, &b, &with_steps(steps)).unwrap();
            let r = georce(&t, &b, &a, &with_steps(steps)).unwrap();
            (f.length - r.length).abs()
        };
        let (coarse, fine) = (gap(100), gap(400));
        assert!(fine < coarse / 3.0, "{coarse} -> {fine}");
    }

    #[test]
    fn zero_wind_finsler_matches_background() {
        let bg = ZooMetric::Sphere { dim: 2 };
        let fin = Randers::new(bg.clone(), ZeroWind, 1.0);
        let (a, b) = ([0.4, -0.3], [-0.6, 0.5]);
        let o = GeorceOptions::default();
        let r = georce(&bg, &a, &b, &o).unwrap();
        let f = georce_finsler(&fin, &a, &b, &o).unwrap();
        for (p, q) in r.curve.points.iter().zip(&f.curve.points) {
            assert!(chart_distance(p, q) < 1e-6);
        }
    }

    #[test]
    fn csv_round_trip() {
        let c = DiscreteCurve::straight(&[0.1, 1.0 / 3.0], &[2.0, -0.7], 5);
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x_0,x_1\n"));
        assert_eq!(text.lines().count(), 7);
        assert_eq!(DiscreteCurve::read_csv(&buf[..]).unwrap(), c);
    }

    #[test]
    fn line_search_rules() {
        let ls = LineSearch::default();
        let acc = ls.run(1.0, |a| Some((1.0 - a, ()))).unwrap();
        assert_eq!(acc.alpha, 1.0);
        // Overshooting full step: E(α) = 1 − α(2 − 1.9α) only decreases for small α.
        let acc = ls.run(1.0, |a| Some((1.0 - a * (1.0 - 1.9 * a), ()))).unwrap();
        assert!(acc.alpha < 1.0 && acc.energy < 1.0);
        let err = ls.run(1.0, |_| None::<(f64, ())>).err().unwrap();
        assert!(matches!(err, Error::StalledLineSearch { halvings: 50 }));
    }
}
