//! WebAssembly bindings for the browser demo: geodesics, Fréchet means
//! (Riemannian or under a generic wind) and principal geodesics on
//! two-dimensional zoo manifolds.
//!
//! Point lists cross the boundary as flat `[x0, y0, x1, y1, ...]` arrays.

use fforge::bench::{AnyField, FinslerSpec, WindKind};
use fforge::frechet::{solve, FrechetOptions, Mode, WeightedDataset};
use fforge::geodesic::{georce, GeorceOptions};
use fforge::manifold::ManifoldSpec;
use fforge::stats::{pga, LogConvention};
use wasm_bindgen::prelude::*;

const DIM: usize = 2;

fn unflatten(coords: &[f64]) -> Result<Vec<Vec<f64>>, String> {
    if coords.is_empty() || !coords.len().is_multiple_of(DIM) {
        return Err(format!("expected a non-empty list of {DIM}-d points, got {} numbers", coords.len()));
    }
    Ok(coords.chunks(DIM).map(<[f64]>::to_vec).collect())
}

fn field(manifold: &str, wind_scale: f64) -> Result<AnyField, String> {
    let spec = ManifoldSpec::new(manifold, DIM);
    let finsler = (wind_scale != 0.0).then(|| FinslerSpec {
        wind: WindKind::Generic,
        scale: wind_scale,
        ..Default::default()
    });
    AnyField::build(&spec, finsler.as_ref()).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub struct Geodesic {
    points: Vec<f64>,
    length: f64,
    iterations: usize,
}

#[wasm_bindgen]
impl Geodesic {
    /// Curve points, flattened.
    #[wasm_bindgen(getter)]
    pub fn points(&self) -> Vec<f64> {
        self.points.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn length(&self) -> f64 {
        self.length
    }
    #[wasm_bindgen(getter)]
    pub fn iterations(&self) -> usize {
        self.iterations
    }
}

/// GEORCE geodesic from `from` to `to`. A non-zero `wind_scale` turns the
/// manifold into a Randers field with the generic wind.
#[wasm_bindgen]
pub fn geodesic(manifold: &str, from: Vec<f64>, to: Vec<f64>, wind_scale: f64, steps: usize) -> Result<Geodesic, String> {
    let f = field(manifold, wind_scale)?;
    let opts = GeorceOptions {
        steps,
        ..Default::default()
    };
    let r = georce(&f, &from, &to, &opts).map_err(|e| e.to_string())?;
    Ok(Geodesic {
        points: r.curve.points.concat(),
        length: r.length,
        iterations: r.iterations,
    })
}

#[wasm_bindgen]
pub struct MeanResult {
    mean: Vec<f64>,
    moi: f64,
    iterations: usize,
    converged: bool,
    curves: Vec<f64>,
    grad_trace: Vec<f64>,
}

#[wasm_bindgen]
impl MeanResult {
    #[wasm_bindgen(getter)]
    pub fn mean(&self) -> Vec<f64> {
        self.mean.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn moi(&self) -> f64 {
        self.moi
    }
    #[wasm_bindgen(getter)]
    pub fn iterations(&self) -> usize {
        self.iterations
    }
    #[wasm_bindgen(getter)]
    pub fn converged(&self) -> bool {
        self.converged
    }
    /// All curves back to back, `T + 1` points each.
    #[wasm_bindgen(getter)]
    pub fn curves(&self) -> Vec<f64> {
        self.curves.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn grad_trace(&self) -> Vec<f64> {
        self.grad_trace.clone()
    }
}

/// GEORCE-FM mean of the points. With wind, `backward` selects the mean as
/// the end point of the distances instead of the start point.
#[wasm_bindgen]
pub fn frechet_mean(
    manifold: &str,
    coords: Vec<f64>,
    wind_scale: f64,
    backward: bool,
    steps: usize,
) -> Result<MeanResult, String> {
    let f = field(manifold, wind_scale)?;
    let data = WeightedDataset::new(unflatten(&coords)?).map_err(|e| e.to_string())?;
    let mode = match (wind_scale != 0.0, backward) {
        (false, _) => Mode::Riemannian,
        (true, false) => Mode::Finsler,
        (true, true) => Mode::FinslerBackward,
    };
    let opts = FrechetOptions {
        steps,
        ..Default::default()
    };
    let r = solve(&f, &data, &opts, mode).map_err(|e| e.to_string())?;
    Ok(MeanResult {
        curves: r.curves.iter().flat_map(|c| c.points.concat()).collect(),
        mean: r.mean,
        moi: r.moi,
        iterations: r.iterations,
        converged: r.converged,
        grad_trace: r.grad_trace,
    })
}

#[wasm_bindgen]
pub struct PrincipalGeodesic {
    mean: Vec<f64>,
    direction: Vec<f64>,
    eigenvalues: Vec<f64>,
    path: Vec<f64>,
}

#[wasm_bindgen]
impl PrincipalGeodesic {
    #[wasm_bindgen(getter)]
    pub fn mean(&self) -> Vec<f64> {
        self.mean.clone()
    }
    /// Unit chart direction of the first principal component.
    #[wasm_bindgen(getter)]
    pub fn direction(&self) -> Vec<f64> {
        self.direction.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigenvalues.clone()
    }
    /// Geodesic through the mean along the direction, flattened.
    #[wasm_bindgen(getter)]
    pub fn path(&self) -> Vec<f64> {
        self.path.clone()
    }
}

/// Riemannian mean, tangent PCA of the approximate logs, and the geodesic
/// through the mean along the first direction, spanning `±spread·√λ₁`.
#[wasm_bindgen]
pub fn principal_geodesic(manifold: &str, coords: Vec<f64>, spread: f64, steps: usize) -> Result<PrincipalGeodesic, String> {
    let metric = ManifoldSpec::new(manifold, DIM).build().map_err(|e| e.to_string())?;
    let data = WeightedDataset::new(unflatten(&coords)?).map_err(|e| e.to_string())?;
    if data.len() < 2 {
        return Err("PGA needs at least two points".into());
    }
    let opts = FrechetOptions {
        steps,
        ..Default::default()
    };
    let r = solve(&metric, &data, &opts, Mode::Riemannian).map_err(|e| e.to_string())?;
    let p = pga(&r, LogConvention::MeanTangent).map_err(|e| e.to_string())?;
    let c = spread * p.eigenvalues[0].max(0.0).sqrt();
    const HALF: usize = 24;
    let path = (0..=2 * HALF)
        .map(|k| {
            let coeff = c * (k as f64 - HALF as f64) / HALF as f64;
            p.sample(&metric, &[coeff]).map_err(|e| e.to_string())
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PrincipalGeodesic {
        mean: r.mean,
        direction: p.directions[0].clone(),
        eigenvalues: p.eigenvalues,
        path: path.concat(),
    })
}
