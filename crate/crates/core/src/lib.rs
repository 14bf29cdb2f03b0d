//! Simultaneous Fréchet means and geodesics on Riemannian and Finsler
//! manifolds given by a chart-local metric field.

pub mod adaptive;
pub mod baselines;
pub mod bench;
pub mod error;
pub mod frechet;
pub mod geodesic;
pub mod manifold;
pub mod numerics;
pub mod stats;

pub use error::{Error, Result};
