//! Metric fields in a local chart.
//!
//! Two layers:
//!
//! * [`RiemannianMetric`]: a position-dependent SPD tensor `G(x)`, written
//!   generically over [`Scalar`] so every derivative the solvers need comes
//!   from forward-mode AD.
//! * [`MetricField`]: what the solvers consume. It allows a velocity argument,
//!   `G(x, v)`, which Finsler fields use and Riemannian fields ignore. Every
//!   `RiemannianMetric` is a `MetricField` through a blanket impl.

pub mod embedding;
pub mod finsler;
pub mod zoo;

pub use embedding::{pullback_metric, Embedding, Pullback};
pub use finsler::{
    generic_wind, randers_fundamental, ConstantWind, FinslerNorm, GenericWind, NormField, Randers, Reversed, WindField,
    ZeroWind,
};
pub use zoo::{zoo_metric, ManifoldSpec, ZooMetric};

use crate::error::{Error, Result};
use crate::numerics::{seed_block, Dual, Mat, Matrix, Scalar};

pub trait RiemannianMetric: Send + Sync {
    fn dim(&self) -> usize;

    /// `G(x)` as a matrix over any scalar type.
    fn metric<S: Scalar>(&self, x: &[S]) -> Mat<S>;

    /// `uᵀ G(x) u`. Override when a cheaper closed form exists.
    fn quad_form<S: Scalar>(&self, x: &[S], u: &[S]) -> S {
        self.metric(x).bilinear(u, u)
    }

    fn metric_at(&self, x: &[f64]) -> Matrix {
        self.metric(x)
    }

    /// Chart validity of `x`.
    fn in_domain(&self, x: &[f64]) -> bool {
        x.iter().all(|v| v.is_finite())
    }
}

/// Chart-local field `G(x, v)` as consumed by the geodesic and mean solvers.
pub trait MetricField: Send + Sync {
    fn dim(&self) -> usize;

    fn in_domain(&self, x: &[f64]) -> bool;

    /// The tensor at `(x, v)`. Riemannian fields ignore `v`.
    fn tensor(&self, x: &[f64], v: &[f64]) -> Result<Matrix>;

    /// `uᵀ G(x, v) u` with all three arguments independent.
    fn quad<S: Scalar>(&self, x: &[S], v: &[S], u: &[S]) -> S;

    /// The energy integrand `uᵀ G(x, u) u`.
    fn energy_density(&self, x: &[f64], u: &[f64]) -> f64 {
        self.quad(x, u, u)
    }

    /// Whether `G` depends on the velocity argument.
    fn velocity_dependent(&self) -> bool;
}

impl<M: RiemannianMetric> MetricField for M {
    fn dim(&self) -> usize {
        RiemannianMetric::dim(self)
    }

    fn in_domain(&self, x: &[f64]) -> bool {
        RiemannianMetric::in_domain(self, x)
    }

    fn tensor(&self, x: &[f64], _v: &[f64]) -> Result<Matrix> {
        if !RiemannianMetric::in_domain(self, x) {
            return Err(Error::domain(format!("metric evaluated at {x:?}")));
        }
        Ok(self.metric_at(x))
    }

    fn quad<S: Scalar>(&self, x: &[S], _v: &[S], u: &[S]) -> S {
        self.quad_form(x, u)
    }

    fn energy_density(&self, x: &[f64], u: &[f64]) -> f64 {
        self.quad_form(x, u)
    }

    fn velocity_dependent(&self) -> bool {
        false
    }
}

/// Borrowed field, so wrappers such as [`Reversed`] can hold a reference.
#[derive(Debug)]
pub struct FieldRef<'a, F: ?Sized>(pub &'a F);

impl<F: ?Sized> Clone for FieldRef<'_, F> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<F: ?Sized> Copy for FieldRef<'_, F> {}

impl<F: MetricField + ?Sized> MetricField for FieldRef<'_, F> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn in_domain(&self, x: &[f64]) -> bool {
        self.0.in_domain(x)
    }
    fn tensor(&self, x: &[f64], v: &[f64]) -> Result<Matrix> {
        self.0.tensor(x, v)
    }
    fn quad<S: Scalar>(&self, x: &[S], v: &[S], u: &[S]) -> S {
        self.0.quad(x, v, u)
    }
    fn energy_density(&self, x: &[f64], u: &[f64]) -> f64 {
        self.0.energy_density(x, u)
    }
    fn velocity_dependent(&self) -> bool {
        self.0.velocity_dependent()
    }
}

/// `ν = ∇ₓ[uᵀ G(x, u) u]` with `u` held fixed, and
/// `ζ = ∇ᵥ[uᵀ G(x, v) u]` at `v = u` with the outer factors held fixed.
///
/// One AD sweep seeds `x` and `v` together. For velocity-independent fields
/// only `x` is seeded and `ζ` is exactly zero.
pub fn metric_velocity_gradients<F: MetricField + ?Sized>(
    field: &F,
    x: &[f64],
    u: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = x.len();
    let uc: Vec<Dual> = u.iter().map(|&v| Dual::constant(v)).collect();
    let (nu, zeta) = if field.velocity_dependent() {
        let xs = seed_block(x, 0, 2 * d);
        let vs = seed_block(u, d, 2 * d);
        let out = field.quad(&xs, &vs, &uc);
        let nu = (0..d).map(|k| out.partial(k)).collect::<Vec<_>>();
        let zeta = (0..d).map(|k| out.partial(d + k)).collect::<Vec<_>>();
        (nu, zeta)
    } else {
        let xs = seed_block(x, 0, d);
        let out = field.quad(&xs, &uc, &uc);
        ((0..d).map(|k| out.partial(k)).collect(), vec![0.0; d])
    };
    for (index, v) in nu.iter().chain(&zeta).enumerate() {
        if !v.is_finite() {
            return Err(Error::Numerical {
                index: index % d,
                context: if index < d { "nu" } else { "zeta" }.into(),
            });
        }
    }
    Ok((nu, zeta))
}

/// Christoffel symbols `Γᵏᵢⱼ` of a Riemannian metric, indexed `[k][i][j]`.
pub fn christoffel<M: RiemannianMetric + ?Sized>(field: &M, x: &[f64]) -> Result<Vec<Matrix>> {
    let d = x.len();
    let xs = crate::numerics::seed(x);
    let g_dual = field.metric(&xs);
    // dg[l] = ∂_l G
    let dg: Vec<Matrix> = (0..d)
        .map(|l| Matrix::from_fn(d, d, |i, j| g_dual[(i, j)].partial(l)))
        .collect();
    let g = g_dual.map(|v| v.re);
    let ginv = crate::numerics::spd_inverse(&g)?;
    Ok((0..d)
        .map(|k| {
            Matrix::from_fn(d, d, |i, j| {
                (0..d)
                    .map(|l| 0.5 * ginv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]))
                    .sum()
            })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::grad_central_difference;

    #[test]
    fn euclidean_gradients_vanish() {
        let e = ZooMetric::Euclidean { dim: 3 };
        let (nu, zeta) = metric_velocity_gradients(&e, &[0.1, 2.0, -3.0], &[1.0, 1.0, 0.5]).unwrap();
        assert_eq!(nu, vec![0.0; 3]);
        assert_eq!(zeta, vec![0.0; 3]);
    }

    #[test]
    fn sphere_nu_matches_finite_differences() {
        let s = ZooMetric::Sphere { dim: 2 };
        let x = [0.1, 0.2];
        let u = [1.0, 0.0];
        let (nu, zeta) = metric_velocity_gradients(&s, &x, &u).unwrap();
        let fd = grad_central_difference(|y| s.quad_form(y, &u), &x, 1e-6);
        for (a, b) in nu.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        assert_eq!(zeta, vec![0.0, 0.0]);
    }

    #[test]
    fn christoffel_of_flat_metric_vanishes() {
        let e = ZooMetric::Euclidean { dim: 2 };
        for g in christoffel(&e, &[0.3, 0.4]).unwrap() {
            assert_eq!(g.frobenius(), 0.0);
        }
    }

    #[test]
    fn christoffel_polar_like_torus() {
        // Torus metric diag(r², (R + r cosθ)²): Γ^θ_φφ = (R + r cosθ) sinθ / r,
        // Γ^φ_θφ = -r sinθ / (R + r cosθ).
        let (big, small) = (3.0, 1.0);
        let t = ZooMetric::Torus { major: big, minor: small };
        let x = [0.7, 1.2];
        let g = christoffel(&t, &x).unwrap();
        let rho = big + small * x[0].cos();
        assert!((g[0][(1, 1)] - rho * x[0].sin() / small).abs() < 1e-12);
        assert!((g[1][(0, 1)] + small * x[0].sin() / rho).abs() < 1e-12);
        assert!((g[1][(1, 0)] - g[1][(0, 1)]).abs() < 1e-15);
    }
}
