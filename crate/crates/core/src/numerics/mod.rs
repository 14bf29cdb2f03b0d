//! Dense linear algebra, forward-mode AD drivers and deterministic reductions.

pub mod dual;
pub mod linalg;

pub use dual::{Dual, Scalar};
pub use linalg::{spd_inverse, spd_solve, spd_solve_mat, symmetric_eigen, Cholesky, Mat, Matrix};

use crate::error::{Error, Result};

/// Lift a point into duals seeded along every coordinate (one batched sweep).
pub fn seed<S: Scalar>(x: &[S]) -> Vec<Dual<S>> {
    let n = x.len();
    x.iter()
        .enumerate()
        .map(|(i, xi)| Dual::variable(xi.clone(), i, n))
        .collect()
}

/// Lift a point into duals seeded at coordinates `offset..offset + x.len()`
/// out of `total` seeds.
pub fn seed_block<S: Scalar>(x: &[S], offset: usize, total: usize) -> Vec<Dual<S>> {
    x.iter()
        .enumerate()
        .map(|(i, xi)| Dual::variable(xi.clone(), offset + i, total))
        .collect()
}

pub fn constants<S: Scalar>(x: &[S]) -> Vec<Dual<S>> {
    x.iter().cloned().map(Dual::constant).collect()
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::Numerical {
            index,
            context: what.to_string(),
        }),
        None => Ok(()),
    }
}

/// Gradient of a scalar function by forward-mode AD, all seeds in one sweep.
///
/// Generic over the base scalar so it composes with outer duals.
pub fn grad_forward<S: Scalar>(f: impl Fn(&[Dual<S>]) -> Dual<S>, x: &[S]) -> Result<Vec<S>> {
    let n = x.len();
    let out = f(&seed(x));
    let g: Vec<S> = (0..n).map(|k| out.partial(k)).collect();
    let values: Vec<f64> = g.iter().map(Scalar::value).collect();
    check_finite(&values, "gradient")?;
    Ok(g)
}

/// Hessian of a scalar function by nested forward duals, symmetrized.
pub fn hessian_forward(
    f: impl Fn(&[Dual<Dual<f64>>]) -> Dual<Dual<f64>>,
    x: &[f64],
) -> Result<Matrix> {
    let raw = hessian_raw(f, x)?;
    Ok(raw.symmetrized())
}

/// Hessian before symmetrization, exposed for asymmetry checks.
pub fn hessian_raw(
    f: impl Fn(&[Dual<Dual<f64>>]) -> Dual<Dual<f64>>,
    x: &[f64],
) -> Result<Matrix> {
    let n = x.len();
    let inner = seed(x);
    let outer: Vec<Dual<Dual<f64>>> = inner
        .into_iter()
        .enumerate()
        .map(|(i, xi)| {
            let mut eps = vec![Dual::constant(0.0); n];
            eps[i] = Dual::constant(1.0);
            Dual { re: xi, eps }
        })
        .collect();
    let out = f(&outer);
    let h = Matrix::from_fn(n, n, |i, j| out.partial(i).partial(j));
    if let Some(index) = h.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(Error::Numerical {
            index: index / n,
            context: "hessian".into(),
        });
    }
    Ok(h)
}

/// Jacobian of a vector function, rows = outputs.
pub fn jacobian_forward<S: Scalar>(
    f: impl Fn(&[Dual<S>]) -> Vec<Dual<S>>,
    x: &[S],
) -> Mat<S> {
    let n = x.len();
    let out = f(&seed(x));
    Mat::from_fn(out.len(), n, |r, c| out[r].partial(c))
}

/// Second directional derivative `d²/dε² f(x + ε u)` at `ε = 0`, computed with
/// two nested single-seed duals.
pub fn second_directional<S: Scalar>(
    f: impl Fn(&[Dual<Dual<S>>]) -> Dual<Dual<S>>,
    x: &[S],
    u: &[S],
) -> S {
    let arg: Vec<Dual<Dual<S>>> = x
        .iter()
        .zip(u)
        .map(|(xi, ui)| Dual {
            re: Dual {
                re: xi.clone(),
                eps: vec![ui.clone()],
            },
            eps: vec![Dual::constant(ui.clone())],
        })
        .collect();
    f(&arg).partial(0).partial(0)
}

/// Shapes that can be summed by [`sum_deterministic`].
pub trait Summable: Sized {
    fn shape(&self) -> (usize, usize);
    fn zeros(shape: (usize, usize)) -> Self;
    fn accumulate(&mut self, other: &Self);
}

impl Summable for Vec<f64> {
    fn shape(&self) -> (usize, usize) {
        (self.len(), 1)
    }
    fn zeros(shape: (usize, usize)) -> Self {
        vec![0.0; shape.0 * shape.1]
    }
    fn accumulate(&mut self, other: &Self) {
        for (a, b) in self.iter_mut().zip(other) {
            *a += b;
        }
    }
}

impl Summable for Matrix {
    fn shape(&self) -> (usize, usize) {
        (self.rows(), self.cols())
    }
    fn zeros(shape: (usize, usize)) -> Self {
        Matrix::zeros(shape.0, shape.1)
    }
    fn accumulate(&mut self, other: &Self) {
        self.add_assign(other);
    }
}

/// Left-to-right sum with a fixed order, so the bits only depend on the
/// inputs and never on how the terms were produced.
pub fn sum_deterministic<T: Summable>(terms: &[T], shape: (usize, usize)) -> Result<T> {
    let mut acc = T::zeros(shape);
    for (k, term) in terms.iter().enumerate() {
        if term.shape() != shape {
            return Err(Error::Shape {
                expected: format!("{shape:?}"),
                got: format!("{:?} at term {k}", term.shape()),
            });
        }
        acc.accumulate(term);
    }
    Ok(acc)
}

/// Order-preserving map over indices, parallel when the `parallel` feature
/// is enabled. Results come back in index order regardless of scheduling.
pub fn par_map<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Central finite-difference gradient; used as an independent check on AD.
pub fn grad_central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|k| {
            xp[k] = x[k] + h;
            let fp = f(&xp);
            xp[k] = x[k] - h;
            let fm = f(&xp);
            xp[k] = x[k];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}
