//! Finsler fields: fundamental tensors `G(x, v) = ½ ∂²F²/∂v²` of a norm
//! `F(x, v)`, the Randers construction from a background metric and a wind,
//! and the reversed field `G(x, −v)`.

use super::{MetricField, RiemannianMetric};
use crate::error::{Error, Result};
use crate::numerics::linalg::dot;
use crate::numerics::{hessian_forward, second_directional, Dual, Mat, Matrix, Scalar};

type D2<S> = Dual<Dual<S>>;

fn lift2<S: Scalar>(s: &S) -> D2<S> {
    Dual::constant(Dual::constant(s.clone()))
}

/// A Finsler norm `F(x, v)` in a chart, positively 1-homogeneous in `v`.
pub trait FinslerNorm: Send + Sync {
    fn dim(&self) -> usize;
    fn norm<S: Scalar>(&self, x: &[S], v: &[S]) -> S;

    fn in_domain(&self, x: &[f64]) -> bool {
        x.iter().all(|v| v.is_finite())
    }

    /// Checked before the tensor is formed; the default only tests the domain.
    fn validate(&self, x: &[f64]) -> Result<()> {
        if self.in_domain(x) {
            Ok(())
        } else {
            Err(Error::domain(format!("Finsler norm evaluated at {x:?}")))
        }
    }
}

/// Wraps a [`FinslerNorm`] into a metric field through nested AD of `F²`.
#[derive(Clone, Debug)]
pub struct NormField<N>(pub N);

fn norm_tensor<N: FinslerNorm + ?Sized>(n: &N, x: &[f64], v: &[f64]) -> Result<Matrix> {
    n.validate(x)?;
    let xc: Vec<D2<f64>> = x.iter().map(lift2).collect();
    let h = hessian_forward(|w| n.norm(&xc, w).square(), v)?;
    Ok(h.scaled(0.5))
}

fn norm_quad<N: FinslerNorm + ?Sized, S: Scalar>(n: &N, x: &[S], v: &[S], u: &[S]) -> S {
    let xc: Vec<D2<S>> = x.iter().map(lift2).collect();
    second_directional(|w| n.norm(&xc, w).square(), v, u) * 0.5
}

impl<N: FinslerNorm> MetricField for NormField<N> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn in_domain(&self, x: &[f64]) -> bool {
        self.0.in_domain(x)
    }
    fn tensor(&self, x: &[f64], v: &[f64]) -> Result<Matrix> {
        norm_tensor(&self.0, x, v)
    }
    fn quad<S: Scalar>(&self, x: &[S], v: &[S], u: &[S]) -> S {
        norm_quad(&self.0, x, v, u)
    }
    fn energy_density(&self, x: &[f64], u: &[f64]) -> f64 {
        self.0.norm(x, u).powi(2)
    }
    fn velocity_dependent(&self) -> bool {
        true
    }
}

/// Vector field `f(x)` used as the Randers wind. Receives the background
/// metric at `x` so normalizations can depend on it.
pub trait WindField: Send + Sync {
    fn wind<S: Scalar>(&self, x: &[S], g: &Mat<S>) -> Vec<S>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroWind;

impl WindField for ZeroWind {
    fn wind<S: Scalar>(&self, x: &[S], _g: &Mat<S>) -> Vec<S> {
        vec![S::zero(); x.len()]
    }
}

#[derive(Clone, Debug)]
pub struct ConstantWind(pub Vec<f64>);

impl WindField for ConstantWind {
    fn wind<S: Scalar>(&self, _x: &[S], _g: &Mat<S>) -> Vec<S> {
        self.0.iter().map(|&c| S::cst(c)).collect()
    }
}

/// `f(x) = (sin x ⊙ cos x) / (cos xᵀ G(x) cos x)`, optionally scaled.
#[derive(Clone, Copy, Debug)]
pub struct GenericWind {
    pub scale: f64,
}

impl Default for GenericWind {
    fn default() -> Self {
        GenericWind { scale: 1.0 }
    }
}

impl WindField for GenericWind {
    fn wind<S: Scalar>(&self, x: &[S], g: &Mat<S>) -> Vec<S> {
        let c: Vec<S> = x.iter().map(Scalar::cos).collect();
        let inv = g.bilinear(&c, &c).recip() * self.scale;
        x.iter()
            .zip(&c)
            .map(|(xi, ci)| xi.sin() * ci.clone() * inv.clone())
            .collect()
    }
}

/// Checked evaluation of [`GenericWind`] at a point with metric `g`.
pub fn generic_wind(x: &[f64], g: &Matrix) -> Result<Vec<f64>> {
    let c: Vec<f64> = x.iter().map(|v| v.cos()).collect();
    let denom = g.bilinear(&c, &c);
    // cos(π/2) is ~6e-17 in floating point, so "zero" means below roundoff.
    if !(denom > 1e-12) {
        return Err(Error::Numerical {
            index: c
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .map(|(k, _)| k)
                .unwrap_or(0),
            context: format!("wind denominator cosᵀG cos = {denom:e}"),
        });
    }
    Ok(GenericWind::default().wind(x, g))
}

/// Randers norm `F(x, v) = √(vᵀ a v) + bᵀ v` built from a background metric
/// `g`, a wind `f` and an initial speed `v0`:
/// `λ = 1 / (v0² − fᵀ g f)`, `a = λ g + λ² (g f)(g f)ᵀ`, `b = −λ g f`.
#[derive(Clone, Debug)]
pub struct Randers<M, W> {
    pub background: M,
    pub wind: W,
    pub v0: f64,
}

impl<M: RiemannianMetric, W: WindField> Randers<M, W> {
    pub fn new(background: M, wind: W, v0: f64) -> Self {
        Randers { background, wind, v0 }
    }

    /// `‖f(x)‖_g`.
    pub fn wind_norm(&self, x: &[f64]) -> f64 {
        let g = self.background.metric_at(x);
        let f = self.wind.wind(x, &g);
        g.bilinear(&f, &f).max(0.0).sqrt()
    }

    /// `(g, g f, λ)` at `x`.
    fn parts<S: Scalar>(&self, x: &[S]) -> (Mat<S>, Vec<S>, S) {
        let g = self.background.metric(x);
        let f = self.wind.wind(x, &g);
        let fl = g.matvec(&f);
        let lambda = (-dot(&f, &fl) + self.v0 * self.v0).recip();
        (g, fl, lambda)
    }

    /// The matrix `a` and covector `b` of the norm.
    pub fn coefficients(&self, x: &[f64]) -> (Matrix, Vec<f64>) {
        let (g, fl, l) = self.parts(x);
        let a = Matrix::from_fn(x.len(), x.len(), |i, j| l * g[(i, j)] + l * l * fl[i] * fl[j]);
        (a, fl.iter().map(|v| -l * v).collect())
    }
}

fn randers_eval<T: Scalar>(g: &Mat<T>, fl: &[T], lambda: &T, v: &[T]) -> T {
    let flv = dot(fl, v);
    let quad = lambda.clone() * g.bilinear(v, v) + lambda.square() * flv.square();
    quad.sqrt() - lambda.clone() * flv
}

impl<M: RiemannianMetric, W: WindField> FinslerNorm for Randers<M, W> {
    fn dim(&self) -> usize {
        self.background.dim()
    }

    fn norm<S: Scalar>(&self, x: &[S], v: &[S]) -> S {
        let (g, fl, l) = self.parts(x);
        randers_eval(&g, &fl, &l, v)
    }

    fn in_domain(&self, x: &[f64]) -> bool {
        RiemannianMetric::in_domain(&self.background, x) && {
            let n = self.wind_norm(x);
            n.is_finite() && n < self.v0
        }
    }

    fn validate(&self, x: &[f64]) -> Result<()> {
        if !RiemannianMetric::in_domain(&self.background, x) {
            return Err(Error::domain(format!("Randers background evaluated at {x:?}")));
        }
        let wind_norm = self.wind_norm(x);
        if !(wind_norm < self.v0) {
            return Err(Error::IllPosedRanders { wind_norm, v0: self.v0 });
        }
        Ok(())
    }
}

impl<M: RiemannianMetric, W: WindField> MetricField for Randers<M, W> {
    fn dim(&self) -> usize {
        self.background.dim()
    }
    fn in_domain(&self, x: &[f64]) -> bool {
        FinslerNorm::in_domain(self, x)
    }
    fn tensor(&self, x: &[f64], v: &[f64]) -> Result<Matrix> {
        norm_tensor(self, x, v)
    }
    fn quad<S: Scalar>(&self, x: &[S], v: &[S], u: &[S]) -> S {
        // Background and wind are constants w.r.t. the velocity seeds, so
        // they are evaluated once in `S` and lifted.
        let (g, fl, l) = self.parts(x);
        let g2 = g.map(lift2);
        let fl2: Vec<D2<S>> = fl.iter().map(lift2).collect();
        let l2 = lift2(&l);
        second_directional(|w| randers_eval(&g2, &fl2, &l2, w).square(), v, u) * 0.5
    }
    fn energy_density(&self, x: &[f64], u: &[f64]) -> f64 {
        self.norm(x, u).powi(2)
    }
    fn velocity_dependent(&self) -> bool {
        true
    }
}

/// Fundamental tensor of a Randers field at `(x, v)`.
pub fn randers_fundamental<M: RiemannianMetric, W: WindField>(
    spec: &Randers<M, W>,
    x: &[f64],
    v: &[f64],
) -> Result<Matrix> {
    spec.tensor(x, v)
}

/// The reversed field `G̃(x, v) = G(x, −v)`.
#[derive(Clone, Debug)]
pub struct Reversed<F>(pub F);

fn negated<S: Scalar>(v: &[S]) -> Vec<S> {
    v.iter().map(|c| -c.clone()).collect()
}

impl<F: MetricField> MetricField for Reversed<F> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn in_domain(&self, x: &[f64]) -> bool {
        self.0.in_domain(x)
    }
    fn tensor(&self, x: &[f64], v: &[f64]) -> Result<Matrix> {
        self.0.tensor(x, &negated(v))
    }
    fn quad<S: Scalar>(&self, x: &[S], v: &[S], u: &[S]) -> S {
        self.0.quad(x, &negated(v), u)
    }
    fn energy_density(&self, x: &[f64], u: &[f64]) -> f64 {
        self.0.energy_density(x, &negated(u))
    }
    fn velocity_dependent(&self) -> bool {
        self.0.velocity_dependent()
    }
}
