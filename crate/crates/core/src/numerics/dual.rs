//! Forward-mode automatic differentiation.
//!
//! [`Dual<S>`] carries a value and a vector of partial derivatives, one per
//! seed direction. Because `Dual<S>` is itself a [`Scalar`], duals nest:
//! `Dual<Dual<f64>>` yields second derivatives, `Dual<Dual<Dual<f64>>>` third.
//! An empty partial vector stands for "all zero", so constants never allocate.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Real-valued scalar that can flow through metric and energy code.
///
/// Implemented by `f64` and, recursively, by [`Dual`]. Metric fields are
/// written once against this trait and are then differentiable to any order.
pub trait Scalar:
    Clone
    + Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn cst(v: f64) -> Self;
    /// The underlying real value, stripped of all derivative parts.
    fn value(&self) -> f64;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn tan(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sinh(&self) -> Self;
    fn cosh(&self) -> Self;
    fn tanh(&self) -> Self;
    fn atan(&self) -> Self;
    fn powi(&self, n: i32) -> Self;
    /// Every component (value and partials, recursively) is finite.
    fn all_finite(&self) -> bool;
    /// Exactly zero in every component.
    fn is_zero(&self) -> bool;

    fn zero() -> Self {
        Self::cst(0.0)
    }
    fn one() -> Self {
        Self::cst(1.0)
    }
    fn recip(&self) -> Self {
        Self::one() / self.clone()
    }
    fn square(&self) -> Self {
        self.clone() * self.clone()
    }
}

impl Scalar for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn tan(&self) -> Self {
        f64::tan(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn sinh(&self) -> Self {
        f64::sinh(*self)
    }
    fn cosh(&self) -> Self {
        f64::cosh(*self)
    }
    fn tanh(&self) -> Self {
        f64::tanh(*self)
    }
    fn atan(&self) -> Self {
        f64::atan(*self)
    }
    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }
    fn all_finite(&self) -> bool {
        self.is_finite()
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
}

/// A value together with its partial derivatives along `eps.len()` seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct Dual<S = f64> {
    pub re: S,
    pub eps: Vec<S>,
}

impl<S: Scalar> Dual<S> {
    pub fn constant(re: S) -> Self {
        Dual { re, eps: Vec::new() }
    }

    /// Independent variable number `index` out of `n` seeds.
    pub fn variable(re: S, index: usize, n: usize) -> Self {
        let mut eps = vec![S::zero(); n];
        eps[index] = S::one();
        Dual { re, eps }
    }

    /// Partial derivative along seed `k` (zero when the partials are implicit).
    pub fn partial(&self, k: usize) -> S {
        self.eps.get(k).cloned().unwrap_or_else(S::zero)
    }

    /// Apply a unary function with value `re` and derivative `deriv` at `self.re`.
    ///
    /// Structurally zero partials stay zero, so an infinite derivative along
    /// one seed does not turn untouched seeds into NaN.
    fn chain(self, re: S, deriv: S) -> Self {
        let eps = self
            .eps
            .into_iter()
            .map(|e| if e.is_zero() { e } else { e * deriv.clone() })
            .collect();
        Dual { re, eps }
    }
}

/// `a * fa + b * fb` elementwise, treating an empty vector as zeros.
fn combine<S: Scalar>(a: Vec<S>, fa: S, b: Vec<S>, fb: S) -> Vec<S> {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => Vec::new(),
        (false, true) => a.into_iter().map(|x| x * fa.clone()).collect(),
        (true, false) => b.into_iter().map(|x| x * fb.clone()).collect(),
        (false, false) => {
            debug_assert_eq!(a.len(), b.len(), "dual seed counts differ");
            a.into_iter()
                .zip(b)
                .map(|(x, y)| x * fa.clone() + y * fb.clone())
                .collect()
        }
    }
}

impl<S: Scalar> Add for Dual<S> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let eps = match (self.eps.is_empty(), rhs.eps.is_empty()) {
            (_, true) => self.eps,
            (true, false) => rhs.eps,
            (false, false) => self.eps.into_iter().zip(rhs.eps).map(|(a, b)| a + b).collect(),
        };
        Dual { re: self.re + rhs.re, eps }
    }
}

impl<S: Scalar> Sub for Dual<S> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let eps = match (self.eps.is_empty(), rhs.eps.is_empty()) {
            (_, true) => self.eps,
            (true, false) => rhs.eps.into_iter().map(|b| -b).collect(),
            (false, false) => self.eps.into_iter().zip(rhs.eps).map(|(a, b)| a - b).collect(),
        };
        Dual { re: self.re - rhs.re, eps }
    }
}

impl<S: Scalar> Mul for Dual<S> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let re = self.re.clone() * rhs.re.clone();
        let eps = combine(self.eps, rhs.re, rhs.eps, self.re);
        Dual { re, eps }
    }
}

impl<S: Scalar> Div for Dual<S> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let inv = rhs.re.recip();
        let re = self.re.clone() * inv.clone();
        // d(a/b) = da/b - a db / b^2
        let fb = -(re.clone() * inv.clone());
        let eps = combine(self.eps, inv, rhs.eps, fb);
        Dual { re, eps }
    }
}

impl<S: Scalar> Neg for Dual<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual {
            re: -self.re,
            eps: self.eps.into_iter().map(|e| -e).collect(),
        }
    }
}

impl<S: Scalar> Add<f64> for Dual<S> {
    type Output = Self;
    fn add(self, rhs: f64) -> Self {
        Dual { re: self.re + rhs, eps: self.eps }
    }
}

impl<S: Scalar> Sub<f64> for Dual<S> {
    type Output = Self;
    fn sub(self, rhs: f64) -> Self {
        Dual { re: self.re - rhs, eps: self.eps }
    }
}

impl<S: Scalar> Mul<f64> for Dual<S> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        Dual {
            re: self.re * rhs,
            eps: self.eps.into_iter().map(|e| e * rhs).collect(),
        }
    }
}

impl<S: Scalar> Div<f64> for Dual<S> {
    type Output = Self;
    fn div(self, rhs: f64) -> Self {
        Dual {
            re: self.re / rhs,
            eps: self.eps.into_iter().map(|e| e / rhs).collect(),
        }
    }
}

impl<S: Scalar> Scalar for Dual<S> {
    fn cst(v: f64) -> Self {
        Dual::constant(S::cst(v))
    }
    fn value(&self) -> f64 {
        self.re.value()
    }
    fn sin(&self) -> Self {
        let (s, c) = (self.re.sin(), self.re.cos());
        self.clone().chain(s, c)
    }
    fn cos(&self) -> Self {
        let (s, c) = (self.re.sin(), self.re.cos());
        self.clone().chain(c, -s)
    }
    fn tan(&self) -> Self {
        let t = self.re.tan();
        let d = t.square() + 1.0;
        self.clone().chain(t, d)
    }
    fn sqrt(&self) -> Self {
        let r = self.re.sqrt();
        let d = (r.clone() * 2.0).recip();
        self.clone().chain(r, d)
    }
    fn exp(&self) -> Self {
        let e = self.re.exp();
        self.clone().chain(e.clone(), e)
    }
    fn ln(&self) -> Self {
        let d = self.re.recip();
        self.clone().chain(self.re.ln(), d)
    }
    fn sinh(&self) -> Self {
        self.clone().chain(self.re.sinh(), self.re.cosh())
    }
    fn cosh(&self) -> Self {
        self.clone().chain(self.re.cosh(), self.re.sinh())
    }
    fn tanh(&self) -> Self {
        let t = self.re.tanh();
        let d = -(t.square()) + 1.0;
        self.clone().chain(t, d)
    }
    fn atan(&self) -> Self {
        let d = (self.re.square() + 1.0).recip();
        self.clone().chain(self.re.atan(), d)
    }
    fn powi(&self, n: i32) -> Self {
        if n == 0 {
            return Self::one();
        }
        let d = self.re.powi(n - 1) * (n as f64);
        self.clone().chain(self.re.powi(n), d)
    }
    fn all_finite(&self) -> bool {
        self.re.all_finite() && self.eps.iter().all(Scalar::all_finite)
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.eps.iter().all(Scalar::is_zero)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(x: f64, i: usize, n: usize) -> Dual {
        Dual::variable(x, i, n)
    }

    #[test]
    fn product_rule() {
        let f = var(3.0, 0, 2);
        let g = var(5.0, 1, 2);
        let h = f.clone() * g.clone();
        assert_eq!(h.re, 15.0);
        assert_eq!(h.eps, vec![5.0, 3.0]);
    }

    #[test]
    fn quotient_and_constants() {
        let x = var(2.0, 0, 1);
        let q = Dual::cst(1.0) / x.clone();
        assert_eq!(q.re, 0.5);
        assert!((q.eps[0] + 0.25).abs() < 1e-15);
        let c = Dual::<f64>::cst(4.0) * Dual::cst(2.0);
        assert!(c.eps.is_empty());
    }

    #[test]
    fn elementary_functions() {
        let x = 0.7;
        let d = var(x, 0, 1);
        let cases: Vec<(Dual, f64)> = vec![
            (d.sin(), x.cos()),
            (d.cos(), -x.sin()),
            (d.tan(), 1.0 / x.cos().powi(2)),
            (d.sqrt(), 0.5 / x.sqrt()),
            (d.exp(), x.exp()),
            (d.ln(), 1.0 / x),
            (d.sinh(), x.cosh()),
            (d.cosh(), x.sinh()),
            (d.tanh(), 1.0 - x.tanh().powi(2)),
            (d.atan(), 1.0 / (1.0 + x * x)),
            (d.powi(3), 3.0 * x * x),
        ];
        for (k, (got, want)) in cases.into_iter().enumerate() {
            assert!((got.eps[0] - want).abs() < 1e-14, "case {k}");
        }
    }

    #[test]
    fn nested_second_derivative() {
        // f(x) = x^3, f'' = 6x
        let x = 1.5;
        let inner = Dual::variable(x, 0, 1);
        let outer = Dual {
            re: inner,
            eps: vec![Dual::constant(1.0)],
        };
        let y = outer.powi(3);
        assert!((y.eps[0].eps[0] - 6.0 * x).abs() < 1e-12);
    }
}
