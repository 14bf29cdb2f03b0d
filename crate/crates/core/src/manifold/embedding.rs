//! Metrics pulled back through a smooth embedding `R^d → R^D`.

use super::RiemannianMetric;
use crate::error::{Error, Result};
use crate::numerics::{jacobian_forward, Cholesky, Dual, Mat, Matrix, Scalar};

/// A smooth map from chart coordinates into an ambient Euclidean space.
pub trait Embedding: Send + Sync {
    fn dim(&self) -> usize;
    fn ambient_dim(&self) -> usize;
    fn embed<S: Scalar>(&self, x: &[S]) -> Vec<S>;

    fn in_domain(&self, x: &[f64]) -> bool {
        x.iter().all(|v| v.is_finite())
    }
}

/// The induced metric `JᵀJ` of an embedding, usable as a metric field.
#[derive(Clone, Debug)]
pub struct Pullback<E>(pub E);

fn gram_of_jacobian<S: Scalar>(j: &Mat<S>) -> Mat<S> {
    let d = j.cols();
    Mat::from_fn(d, d, |a, b| {
        (0..j.rows()).fold(S::zero(), |acc, k| acc + j[(k, a)].clone() * j[(k, b)].clone())
    })
}

impl<E: Embedding> RiemannianMetric for Pullback<E> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn metric<S: Scalar>(&self, x: &[S]) -> Mat<S> {
        let j = jacobian_forward(|z: &[Dual<S>]| self.0.embed(z), x);
        gram_of_jacobian(&j)
    }

    fn quad_form<S: Scalar>(&self, x: &[S], u: &[S]) -> S {
        // ‖J u‖² from a single directional sweep.
        let z: Vec<Dual<S>> = x
            .iter()
            .zip(u)
            .map(|(xi, ui)| Dual {
                re: xi.clone(),
                eps: vec![ui.clone()],
            })
            .collect();
        self.0
            .embed(&z)
            .into_iter()
            .fold(S::zero(), |acc, c| acc + c.partial(0).square())
    }

    fn in_domain(&self, x: &[f64]) -> bool {
        x.len() == self.0.dim() && self.0.in_domain(x)
    }
}

/// `JᵀJ` at `x`, rejecting rank-deficient Jacobians.
pub fn pullback_metric<E: Embedding>(embedding: &E, x: &[f64]) -> Result<Matrix> {
    if x.len() != embedding.dim() {
        return Err(Error::Shape {
            expected: format!("{} coordinates", embedding.dim()),
            got: format!("{}", x.len()),
        });
    }
    if !embedding.in_domain(x) {
        return Err(Error::domain(format!("embedding evaluated at {x:?}")));
    }
    let g = Pullback(RefEmbedding(embedding)).metric_at(x);
    Cholesky::new(&g)?;
    Ok(g)
}

struct RefEmbedding<'a, E>(&'a E);

impl<E: Embedding> Embedding for RefEmbedding<'_, E> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn ambient_dim(&self) -> usize {
        self.0.ambient_dim()
    }
    fn embed<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        self.0.embed(x)
    }
}

/// The identity map `R^d → R^d`.
#[derive(Clone, Debug)]
pub struct IdentityEmbedding {
    pub dim: usize,
}

impl Embedding for IdentityEmbedding {
    fn dim(&self) -> usize {
        self.dim
    }
    fn ambient_dim(&self) -> usize {
        self.dim
    }
    fn embed<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        x.to_vec()
    }
}

/// Inverse stereographic projection onto `Sⁿ`, scaled per axis by
/// `half_axes` (all ones gives the unit sphere).
#[derive(Clone, Debug)]
pub struct StereographicEmbedding {
    pub half_axes: Vec<f64>,
}

impl StereographicEmbedding {
    pub fn sphere(dim: usize) -> Self {
        StereographicEmbedding {
            half_axes: vec![1.0; dim + 1],
        }
    }
}

impl Embedding for StereographicEmbedding {
    fn dim(&self) -> usize {
        self.half_axes.len() - 1
    }
    fn ambient_dim(&self) -> usize {
        self.half_axes.len()
    }
    fn embed<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let r2 = x.iter().fold(S::zero(), |acc, v| acc + v.square());
        let inv = (r2.clone() + 1.0).recip();
        let mut p: Vec<S> = x.iter().map(|v| v.clone() * inv.clone() * 2.0).collect();
        p.push((-r2 + 1.0) * inv);
        p.into_iter().zip(&self.half_axes).map(|(v, a)| v * *a).collect()
    }
}

/// Graph embedding `x ↦ (x, h(x))` with `h = Σ sᵢ xᵢ²`.
#[derive(Clone, Debug)]
pub struct QuadraticGraph {
    pub signs: Vec<f64>,
}

impl Embedding for QuadraticGraph {
    fn dim(&self) -> usize {
        self.signs.len()
    }
    fn ambient_dim(&self) -> usize {
        self.signs.len() + 1
    }
    fn embed<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let h = x
            .iter()
            .zip(&self.signs)
            .fold(S::zero(), |acc, (v, s)| acc + v.square() * *s);
        let mut p = x.to_vec();
        p.push(h);
        p
    }
}

/// `P(n)` through its Cholesky factor: `x` holds the lower triangle of `L`
/// row by row with log-diagonal, and the embedding returns the upper
/// triangle of `LLᵀ`. Only a stub; no closed-form chart metric exists for it.
#[derive(Clone, Debug)]
pub struct SpdEmbedding {
    pub n: usize,
}

impl SpdEmbedding {
    fn lower<S: Scalar>(&self, x: &[S]) -> Vec<Vec<S>> {
        let mut it = x.iter();
        (0..self.n)
            .map(|i| {
                (0..=i)
                    .map(|j| {
                        let v = it.next().expect("coordinate count checked by dim").clone();
                        if i == j {
                            v.exp()
                        } else {
                            v
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

impl Embedding for SpdEmbedding {
    fn dim(&self) -> usize {
        self.n * (self.n + 1) / 2
    }
    fn ambient_dim(&self) -> usize {
        self.dim()
    }
    fn embed<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let l = self.lower(x);
        let mut out = Vec::with_capacity(self.dim());
        for i in 0..self.n {
            for j in i..self.n {
                let s = (0..=i).fold(S::zero(), |acc, k| acc + l[i][k].clone() * l[j][k].clone());
                out.push(s);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::ZooMetric;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_pullback_is_identity() {
        let g = pullback_metric(&IdentityEmbedding { dim: 2 }, &[3.0, -7.0]).unwrap();
        assert_eq!(g, Matrix::identity(2));
    }

    #[test]
    fn stereographic_origin() {
        let g = pullback_metric(&StereographicEmbedding::sphere(2), &[0.0, 0.0]).unwrap();
        assert_eq!(g, Matrix::identity(2).scaled(4.0));
    }

    #[test]
    fn paraboloid_by_hand() {
        let g = pullback_metric(&QuadraticGraph { signs: vec![1.0, 1.0] }, &[1.0, 1.0]).unwrap();
        assert_eq!(g, Matrix::from_row_major(2, 2, vec![5.0, 4.0, 4.0, 5.0]));
    }

    #[test]
    fn rank_deficient_is_not_spd() {
        struct Collapse;
        impl Embedding for Collapse {
            fn dim(&self) -> usize {
                2
            }
            fn ambient_dim(&self) -> usize {
                2
            }
            fn embed<S: Scalar>(&self, x: &[S]) -> Vec<S> {
                let s = x[0].clone() + x[1].clone();
                vec![s.clone(), s]
            }
        }
        assert!(matches!(pullback_metric(&Collapse, &[0.1, 0.2]), Err(Error::NotSpd { .. })));
    }

    #[test]
    fn zoo_parity_with_pullbacks() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let axes = crate::manifold::zoo::linspace(0.5, 1.0, 4, true);
        let cases: Vec<(ZooMetric, StereographicEmbedding)> = vec![
            (ZooMetric::Sphere { dim: 3 }, StereographicEmbedding::sphere(3)),
            (
                ZooMetric::Ellipsoid { half_axes: axes.clone() },
                StereographicEmbedding { half_axes: axes },
            ),
        ];
        for (zoo, emb) in cases {
            for _ in 0..200 {
                let x: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
                let a = zoo.metric_at(&x);
                let b = pullback_metric(&emb, &x).unwrap();
                assert!(a.max_abs_diff(&b) <= 1e-12, "{} at {x:?}", zoo.name());
            }
        }
        let para = ZooMetric::Paraboloid { dim: 2 };
        let hyp = ZooMetric::HyperbolicParaboloid;
        for _ in 0..100 {
            let x: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
            let a = pullback_metric(&QuadraticGraph { signs: vec![1.0, 1.0] }, &x).unwrap();
            let b = pullback_metric(&QuadraticGraph { signs: vec![1.0, -1.0] }, &x).unwrap();
            assert!(para.metric_at(&x).max_abs_diff(&a) <= 1e-12);
            assert!(hyp.metric_at(&x).max_abs_diff(&b) <= 1e-12);
        }
    }

    #[test]
    fn pullback_quad_form_matches_matrix() {
        let e = Pullback(SpdEmbedding { n: 2 });
        let x = [0.1, -0.4, 0.3];
        let u = [1.0, 2.0, -0.5];
        let a = e.quad_form(&x, &u);
        let b = e.metric_at(&x).bilinear(&u, &u);
        assert!((a - b).abs() < 1e-12 * b);
    }

    #[test]
    fn spd_stub_is_positive_definite() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let emb = SpdEmbedding { n: 3 };
        for _ in 0..50 {
            let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            pullback_metric(&emb, &x).unwrap();
        }
    }
}
