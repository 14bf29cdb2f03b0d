//! Closed-form chart metrics for the standard test manifolds.

use serde::{Deserialize, Serialize};

use super::RiemannianMetric;
use crate::error::{Error, Result};
use crate::numerics::{Mat, Scalar};

/// Default bound on `‖x‖` for stereographic charts.
pub const DEFAULT_DOMAIN_CAP: f64 = 1e6;

/// Euler–Mascheroni constant.
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Clone, Debug, PartialEq)]
pub enum ZooMetric {
    Euclidean { dim: usize },
    /// Stereographic chart of `Sⁿ`, projected from the south pole so the
    /// chart origin is the north pole.
    Sphere { dim: usize },
    /// `{p ⊙ s : s ∈ Sⁿ}` in the sphere's stereographic chart; `half_axes`
    /// has `n + 1` entries, the last one along the pole axis.
    Ellipsoid { half_axes: Vec<f64> },
    /// Coordinates `(θ, φ)`.
    Torus { major: f64, minor: f64 },
    /// `H²` in Minkowski space with coordinates `(α, β)`.
    Hyperbolic,
    /// Graph of `Σ xᵢ²`.
    Paraboloid { dim: usize },
    /// Graph of `x₁² − x₂²`.
    HyperbolicParaboloid,
    /// Normal family in `(μ, σ)`.
    GaussianFr,
    /// Fréchet family in `(shape β, scale λ)`.
    FrechetFr,
    /// Cauchy family in `(location μ, scale σ)`.
    CauchyFr,
    /// Pareto family in `(scale θ, shape α)`.
    ParetoFr,
}

/// Serializable manifold selection, as found in CLI config files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldSpec {
    pub name: String,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub params: ManifoldParams,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldParams {
    /// Explicit ellipsoid half-axes (length `dim + 1`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_axes: Option<Vec<f64>>,
    /// Ellipsoid half-axes spacing: include the 1.0 end point (default true).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axes_endpoint: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub major_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minor_radius: Option<f64>,
}

impl ManifoldSpec {
    pub fn new(name: &str, dim: usize) -> Self {
        ManifoldSpec {
            name: name.to_string(),
            dim: Some(dim),
            params: ManifoldParams::default(),
        }
    }

    pub fn build(&self) -> Result<ZooMetric> {
        zoo_metric(&self.name, self.dim, &self.params)
    }
}

/// `n` linearly spaced values on `[lo, hi]` (or `[lo, hi)` without end point).
pub fn linspace(lo: f64, hi: f64, n: usize, endpoint: bool) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let div = if endpoint { (n - 1) as f64 } else { n as f64 };
            (0..n).map(|k| lo + (hi - lo) * k as f64 / div).collect()
        }
    }
}

/// Look up a zoo manifold by name.
pub fn zoo_metric(name: &str, dim: Option<usize>, params: &ManifoldParams) -> Result<ZooMetric> {
    let fixed2 = |m: ZooMetric| -> Result<ZooMetric> {
        match dim {
            None | Some(2) => Ok(m),
            Some(d) => Err(Error::Config(format!("{name} is two-dimensional, got dim = {d}"))),
        }
    };
    let need_dim = || -> Result<usize> {
        match dim {
            Some(0) => Err(Error::Config(format!("{name}: dim must be at least 1"))),
            Some(d) => Ok(d),
            None => Ok(2),
        }
    };
    match name {
        "euclidean" => Ok(ZooMetric::Euclidean { dim: need_dim()? }),
        "sphere" => Ok(ZooMetric::Sphere { dim: need_dim()? }),
        "ellipsoid" => {
            let d = need_dim()?;
            let half_axes = match &params.half_axes {
                Some(p) if p.len() == d + 1 && p.iter().all(|v| *v > 0.0) => p.clone(),
                Some(p) => {
                    return Err(Error::Config(format!(
                        "ellipsoid needs {} positive half-axes, got {p:?}",
                        d + 1
                    )))
                }
                None => linspace(0.5, 1.0, d + 1, params.axes_endpoint.unwrap_or(true)),
            };
            Ok(ZooMetric::Ellipsoid { half_axes })
        }
        "torus" => fixed2(ZooMetric::Torus {
            major: params.major_radius.unwrap_or(3.0),
            minor: params.minor_radius.unwrap_or(1.0),
        }),
        "hyperbolic" => fixed2(ZooMetric::Hyperbolic),
        "paraboloid" => Ok(ZooMetric::Paraboloid { dim: need_dim()? }),
        "hyperbolic_paraboloid" => fixed2(ZooMetric::HyperbolicParaboloid),
        "gaussian_fr" => fixed2(ZooMetric::GaussianFr),
        "frechet_fr" => fixed2(ZooMetric::FrechetFr),
        "cauchy_fr" => fixed2(ZooMetric::CauchyFr),
        "pareto_fr" => fixed2(ZooMetric::ParetoFr),
        other => Err(Error::Config(format!("unknown manifold '{other}'"))),
    }
}

/// Names accepted by [`zoo_metric`].
pub const ZOO_NAMES: [&str; 11] = [
    "sphere",
    "ellipsoid",
    "torus",
    "hyperbolic",
    "paraboloid",
    "hyperbolic_paraboloid",
    "gaussian_fr",
    "frechet_fr",
    "cauchy_fr",
    "pareto_fr",
    "euclidean",
];

fn sq_norm<S: Scalar>(x: &[S]) -> S {
    x.iter().fold(S::zero(), |acc, v| acc + v.square())
}

/// Jacobian-vector product of the stereographic map at `x` along `u`:
/// returns `n + 1` ambient components.
fn stereo_jvp<S: Scalar>(x: &[S], u: &[S]) -> Vec<S> {
    let denom = sq_norm(x) + 1.0;
    let inv = denom.recip();
    let inv2 = inv.square();
    let xu = crate::numerics::linalg::dot(x, u);
    let mut out: Vec<S> = x
        .iter()
        .zip(u)
        .map(|(xi, ui)| ui.clone() * inv.clone() * 2.0 - xi.clone() * xu.clone() * inv2.clone() * 4.0)
        .collect();
    out.push(xu * inv2 * 4.0);
    out
}

/// Jacobian of the stereographic map, `(n + 1) × n`.
fn stereo_jacobian<S: Scalar>(x: &[S]) -> Mat<S> {
    let n = x.len();
    let inv = (sq_norm(x) + 1.0).recip();
    let inv2 = inv.square();
    Mat::from_fn(n + 1, n, |i, j| {
        if i < n {
            let diag = if i == j { inv.clone() * 2.0 } else { S::zero() };
            diag - x[i].clone() * x[j].clone() * inv2.clone() * 4.0
        } else {
            x[j].clone() * inv2.clone() * 4.0
        }
    })
}

impl ZooMetric {
    pub fn name(&self) -> &'static str {
        match self {
            ZooMetric::Euclidean { .. } => "euclidean",
            ZooMetric::Sphere { .. } => "sphere",
            ZooMetric::Ellipsoid { .. } => "ellipsoid",
            ZooMetric::Torus { .. } => "torus",
            ZooMetric::Hyperbolic => "hyperbolic",
            ZooMetric::Paraboloid { .. } => "paraboloid",
            ZooMetric::HyperbolicParaboloid => "hyperbolic_paraboloid",
            ZooMetric::GaussianFr => "gaussian_fr",
            ZooMetric::FrechetFr => "frechet_fr",
            ZooMetric::CauchyFr => "cauchy_fr",
            ZooMetric::ParetoFr => "pareto_fr",
        }
    }
}

impl RiemannianMetric for ZooMetric {
    fn dim(&self) -> usize {
        match self {
            ZooMetric::Euclidean { dim } | ZooMetric::Sphere { dim } | ZooMetric::Paraboloid { dim } => *dim,
            ZooMetric::Ellipsoid { half_axes } => half_axes.len() - 1,
            _ => 2,
        }
    }

    fn metric<S: Scalar>(&self, x: &[S]) -> Mat<S> {
        let d = x.len();
        match self {
            ZooMetric::Euclidean { .. } => Mat::identity(d),
            ZooMetric::Sphere { .. } => {
                let c = (sq_norm(x) + 1.0).square().recip() * 4.0;
                Mat::diagonal(&vec![c; d])
            }
            ZooMetric::Ellipsoid { half_axes } => {
                let j = stereo_jacobian(x);
                let p2: Vec<S> = half_axes.iter().map(|p| S::cst(p * p)).collect();
                Mat::from_fn(d, d, |a, b| {
                    (0..=d).fold(S::zero(), |acc, k| {
                        acc + j[(k, a)].clone() * j[(k, b)].clone() * p2[k].clone()
                    })
                })
            }
            ZooMetric::Torus { major, minor } => {
                let rho = x[0].cos() * *minor + *major;
                Mat::diagonal(&[S::cst(minor * minor), rho.square()])
            }
            ZooMetric::Hyperbolic => Mat::diagonal(&[S::one(), x[0].sinh().square()]),
            ZooMetric::Paraboloid { .. } => Mat::from_fn(d, d, |i, j| {
                let base = if i == j { S::one() } else { S::zero() };
                base + x[i].clone() * x[j].clone() * 4.0
            }),
            ZooMetric::HyperbolicParaboloid => {
                let grad = [x[0].clone() * 2.0, -(x[1].clone() * 2.0)];
                Mat::from_fn(2, 2, |i, j| {
                    let base = if i == j { S::one() } else { S::zero() };
                    base + grad[i].clone() * grad[j].clone()
                })
            }
            ZooMetric::GaussianFr => {
                let inv = x[1].square().recip();
                Mat::diagonal(&[inv.clone(), inv * 2.0])
            }
            ZooMetric::FrechetFr => {
                let (shape, scale) = (&x[0], &x[1]);
                let c = (1.0 - EULER_GAMMA).powi(2) + std::f64::consts::PI.powi(2) / 6.0;
                let off = scale.recip() * (1.0 - EULER_GAMMA);
                Mat::from_row_major(
                    2,
                    2,
                    vec![
                        shape.square().recip() * c,
                        off.clone(),
                        off,
                        (shape.clone() / scale.clone()).square(),
                    ],
                )
            }
            ZooMetric::CauchyFr => {
                let c = (x[1].square() * 2.0).recip();
                Mat::diagonal(&[c.clone(), c])
            }
            ZooMetric::ParetoFr => {
                let (scale, shape) = (&x[0], &x[1]);
                Mat::diagonal(&[(shape.clone() / scale.clone()).square(), shape.square().recip()])
            }
        }
    }

    fn quad_form<S: Scalar>(&self, x: &[S], u: &[S]) -> S {
        match self {
            ZooMetric::Euclidean { .. } => sq_norm(u),
            ZooMetric::Sphere { .. } => sq_norm(u) * (sq_norm(x) + 1.0).square().recip() * 4.0,
            ZooMetric::Ellipsoid { half_axes } => stereo_jvp(x, u)
                .into_iter()
                .zip(half_axes)
                .fold(S::zero(), |acc, (v, p)| acc + v.square() * (p * p)),
            ZooMetric::Paraboloid { .. } => {
                sq_norm(u) + crate::numerics::linalg::dot(x, u).square() * 4.0
            }
            _ => self.metric(x).bilinear(u, u),
        }
    }

    fn in_domain(&self, x: &[f64]) -> bool {
        if x.len() != RiemannianMetric::dim(self) || !x.iter().all(|v| v.is_finite()) {
            return false;
        }
        match self {
            ZooMetric::Sphere { .. } | ZooMetric::Ellipsoid { .. } => {
                crate::numerics::linalg::norm(x) <= DEFAULT_DOMAIN_CAP
            }
            ZooMetric::Hyperbolic => x[0].abs() > 1e-10,
            ZooMetric::GaussianFr | ZooMetric::CauchyFr => x[1] > 0.0,
            ZooMetric::FrechetFr | ZooMetric::ParetoFr => x[0] > 0.0 && x[1] > 0.0,
            _ => true,
        }
    }
}

/// Point on the unit sphere `Sⁿ ⊂ Rⁿ⁺¹` for chart coordinates `x`.
pub fn sphere_embed(x: &[f64]) -> Vec<f64> {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let mut p: Vec<f64> = x.iter().map(|v| 2.0 * v / (1.0 + r2)).collect();
    p.push((1.0 - r2) / (1.0 + r2));
    p
}

/// Chart coordinates of a unit-sphere point (any point except the south pole).
pub fn sphere_chart(p: &[f64]) -> Vec<f64> {
    let n = p.len() - 1;
    let denom = 1.0 + p[n];
    p[..n].iter().map(|v| v / denom).collect()
}

/// Great-circle distance between two chart points.
pub fn sphere_distance(a: &[f64], b: &[f64]) -> f64 {
    let pa = sphere_embed(a);
    let pb = sphere_embed(b);
    let c: f64 = pa.iter().zip(&pb).map(|(u, v)| u * v).sum();
    c.clamp(-1.0, 1.0).acos()
}

/// Point on the hyperboloid for chart coordinates `(α, β)`.
pub fn hyperbolic_embed(x: &[f64]) -> [f64; 3] {
    [x[0].cosh(), x[0].sinh() * x[1].cos(), x[0].sinh() * x[1].sin()]
}

/// Hyperbolic distance via the Minkowski inner product.
pub fn hyperbolic_distance(a: &[f64], b: &[f64]) -> f64 {
    let p = hyperbolic_embed(a);
    let q = hyperbolic_embed(b);
    let inner = -p[0] * q[0] + p[1] * q[1] + p[2] * q[2];
    (-inner).max(1.0).acosh()
}
