//! Moment of inertia, approximate logarithmic maps and principal geodesic
//! analysis on top of solver output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frechet::{FrechetResult, Mode, MoiOptions, ResultSummary, WeightedDataset};
use crate::geodesic::{exp_map_ode, geodesic_path, georce, GeorceOptions, OdeOptions};
use crate::manifold::{MetricField, RiemannianMetric};
use crate::numerics::{par_map, symmetric_eigen, Matrix};

/// `Σ_i w_i d(a_i, mean)²` with each distance the length of a standalone
/// GEORCE geodesic. For the forward Finsler mean the geodesics run from the
/// mean to the data.
pub fn moment_of_inertia<F: MetricField + ?Sized>(
    field: &F,
    mean: &[f64],
    data: &WeightedDataset,
    mode: Mode,
    steps: usize,
    opts: &MoiOptions,
) -> Result<f64> {
    let gopts = GeorceOptions {
        steps: opts.steps.unwrap_or(steps),
        tol: opts.tol,
        max_iter: opts.max_iter,
        ..Default::default()
    };
    let lengths: Vec<f64> = par_map(data.len(), |i| {
        let a = &data.points[i];
        let report = match mode {
            Mode::Finsler => georce(field, mean, a, &gopts),
            Mode::Riemannian | Mode::FinslerBackward => georce(field, a, mean, &gopts),
        }?;
        Ok(report.length)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    Ok(lengths
        .iter()
        .zip(&data.weights)
        .map(|(l, w)| w * l * l)
        .sum())
}

/// Which tangent vector stands in for `Log_μ(a_i)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogConvention {
    /// `u_{0,i}`, a tangent at `a_i`.
    FirstControl,
    /// `−T · u_{T−1,i}`, a tangent at the mean scaled to unit time.
    #[default]
    MeanTangent,
}

/// Solver output that carries the first and last controls of every curve.
pub trait ControlSummary {
    fn mean(&self) -> &[f64];
    fn first_controls(&self) -> &[Vec<f64>];
    fn last_controls(&self) -> &[Vec<f64>];
    fn steps(&self) -> usize;
}

impl ControlSummary for FrechetResult {
    fn mean(&self) -> &[f64] {
        &self.mean
    }
    fn first_controls(&self) -> &[Vec<f64>] {
        &self.u0
    }
    fn last_controls(&self) -> &[Vec<f64>] {
        &self.u_end
    }
    fn steps(&self) -> usize {
        self.steps
    }
}

impl ControlSummary for ResultSummary {
    fn mean(&self) -> &[f64] {
        &self.mean
    }
    fn first_controls(&self) -> &[Vec<f64>] {
        &self.u0
    }
    fn last_controls(&self) -> &[Vec<f64>] {
        &self.u_end
    }
    fn steps(&self) -> usize {
        self.steps
    }
}

pub fn log_approx<R: ControlSummary + ?Sized>(result: &R, convention: LogConvention) -> Vec<Vec<f64>> {
    match convention {
        LogConvention::FirstControl => result.first_controls().to_vec(),
        LogConvention::MeanTangent => {
            let t = result.steps() as f64;
            result
                .last_controls()
                .iter()
                .map(|u| u.iter().map(|c| -t * c).collect())
                .collect()
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PgaResult {
    pub base: Vec<f64>,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// Unit chart vectors, first non-negligible component positive.
    pub directions: Vec<Vec<f64>>,
    #[serde(skip)]
    pub scatter: Option<Matrix>,
}

/// Flip `v` so that its first component with `|c| > 1e-12` is positive.
pub fn sign_normalize(v: &mut [f64]) {
    if let Some(c) = v.iter().find(|c| c.abs() > 1e-12) {
        if *c < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Eigendecomposition of `S = (1/N) Σ ℓ_i ℓ_iᵀ`.
pub fn pga_from_logs(base: &[f64], logs: &[Vec<f64>]) -> Result<PgaResult> {
    if logs.is_empty() {
        return Err(Error::Config("PGA needs at least one tangent vector".into()));
    }
    let d = base.len();
    let n = logs.len() as f64;
    let scatter = Matrix::from_fn(d, d, |i, j| logs.iter().map(|l| l[i] * l[j]).sum::<f64>() / n);
    let (eigenvalues, vecs) = symmetric_eigen(&scatter, 1e-12);
    let directions = (0..d)
        .map(|c| {
            let mut v: Vec<f64> = (0..d).map(|r| vecs[(r, c)]).collect();
            sign_normalize(&mut v);
            v
        })
        .collect();
    Ok(PgaResult {
        base: base.to_vec(),
        eigenvalues,
        directions,
        scatter: Some(scatter),
    })
}

pub fn pga<R: ControlSummary + ?Sized>(result: &R, convention: LogConvention) -> Result<PgaResult> {
    pga_from_logs(result.mean(), &log_approx(result, convention))
}

impl PgaResult {
    /// `Σ_k α_k v_k` for the given leading coefficients.
    pub fn tangent(&self, coefficients: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.base.len()];
        for (a, dir) in coefficients.iter().zip(&self.directions) {
            for (vi, di) in v.iter_mut().zip(dir) {
                *vi += a * di;
            }
        }
        v
    }

    /// `Exp(μ, Σ_k α_k v_k)`.
    pub fn sample<M: RiemannianMetric + ?Sized>(&self, field: &M, coefficients: &[f64]) -> Result<Vec<f64>> {
        exp_map_ode(field, &self.base, &self.tangent(coefficients))
    }

    /// The geodesic from the mean along `Σ_k α_k v_k`, at the integrator's steps.
    pub fn sample_path<M: RiemannianMetric + ?Sized>(&self, field: &M, coefficients: &[f64]) -> Result<Vec<(f64, Vec<f64>)>> {
        geodesic_path(field, &self.base, &self.tangent(coefficients), &OdeOptions::default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frechet::{solve, FrechetOptions};
    use crate::manifold::zoo::{sphere_chart, sphere_distance};
    use crate::manifold::ZooMetric;

    #[test]
    fn moi_of_mean_itself_is_zero() {
        let s = ZooMetric::Sphere { dim: 2 };
        let data = WeightedDataset::new(vec![vec![0.2, 0.1]]).unwrap();
        let m = moment_of_inertia(&s, &[0.2, 0.1], &data, Mode::Riemannian, 50, &MoiOptions::default()).unwrap();
        assert_eq!(m, 0.0);
    }

    #[test]
    fn moi_on_a_ring() {
        // Eight points at angular radius θ around the north pole.
        let theta: f64 = 0.5;
        let pts: Vec<Vec<f64>> = (0..8)
            .map(|k| {
                let phi = k as f64 * std::f64::consts::PI / 4.0;
                sphere_chart(&[theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()])
            })
            .collect();
        let s = ZooMetric::Sphere { dim: 2 };
        let data = WeightedDataset::new(pts.clone()).unwrap();
        let m = moment_of_inertia(&s, &[0.0, 0.0], &data, Mode::Riemannian, 100, &MoiOptions::default()).unwrap();
        let want: f64 = pts.iter().map(|p| sphere_distance(p, &[0.0, 0.0]).powi(2)).sum();
        assert!((want - 8.0 * theta * theta).abs() < 1e-12);
        assert!((m - want).abs() < 1e-3 * want, "{m} vs {want}");
    }

    #[test]
    fn euclidean_logs_and_pca() {
        let e = ZooMetric::Euclidean { dim: 2 };
        let data = WeightedDataset::new(vec![vec![0.0, 0.0], vec![2.0, 1.0], vec![4.0, 2.5], vec![-1.0, 0.2]]).unwrap();
        let r = solve(&e, &data, &FrechetOptions::default(), Mode::Riemannian).unwrap();
        let logs = log_approx(&r, LogConvention::MeanTangent);
        for (l, a) in logs.iter().zip(&data.points) {
            for k in 0..2 {
                assert!((l[k] - (a[k] - r.mean[k])).abs() < 1e-10);
            }
        }
        let p = pga(&r, LogConvention::MeanTangent).unwrap();
        let tr = p.scatter.as_ref().unwrap().trace();
        assert!((p.eigenvalues.iter().sum::<f64>() - tr).abs() < 1e-10);
        assert!(p.eigenvalues[0] >= p.eigenvalues[1]);
        assert!(p.directions[0][0] > 0.0);
        let dot: f64 = p.directions[0].iter().zip(&p.directions[1]).map(|(a, b)| a * b).sum();
        assert!(dot.abs() < 1e-10);
        assert_eq!(p.sample(&e, &[0.0, 0.0]).unwrap(), r.mean);
    }

    #[test]
    fn single_point_log_is_zero() {
        let s = ZooMetric::Sphere { dim: 2 };
        let data = WeightedDataset::new(vec![vec![0.1, 0.1]]).unwrap();
        let r = solve(&s, &data, &FrechetOptions::default(), Mode::Riemannian).unwrap();
        assert_eq!(log_approx(&r, LogConvention::MeanTangent), vec![vec![0.0, 0.0]]);
    }

    #[test]
    fn rescaling_logs_keeps_directions() {
        let logs = vec![vec![1.0, 0.3], vec![-0.5, 0.9], vec![0.2, -1.1]];
        let a = pga_from_logs(&[0.0, 0.0], &logs).unwrap();
        let scaled: Vec<Vec<f64>> = logs.iter().map(|l| l.iter().map(|c| 3.0 * c).collect()).collect();
        let b = pga_from_logs(&[0.0, 0.0], &scaled).unwrap();
        for k in 0..2 {
            assert!((b.eigenvalues[k] - 9.0 * a.eigenvalues[k]).abs() < 1e-10);
            for j in 0..2 {
                assert!((a.directions[k][j] - b.directions[k][j]).abs() < 1e-10);
            }
        }
    }
}
