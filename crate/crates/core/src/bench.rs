//! Synthetic datasets and the experiment runner behind the `benchmark`
//! command.

use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::adaptive::{adaptive_solve, BatchConfig};
use crate::baselines::{run_first_order, Method, Minibatch, OptimizerConfig};
use crate::error::{Error, Result};
use crate::frechet::{solve, FrechetOptions, Mode, WeightedDataset};
use crate::geodesic::fmt_float;
use crate::manifold::zoo::linspace;
use crate::manifold::{GenericWind, ManifoldSpec, MetricField, Randers, ZeroWind, ZooMetric};
use crate::numerics::{Matrix, Scalar};

/// Lower bound applied to coordinates that must stay positive.
pub const POSITIVE_FLOOR: f64 = 1e-2;

fn gaussian_cloud(rng: &mut ChaCha8Rng, n: usize, mean: &[f64], variance: f64) -> Vec<Vec<f64>> {
    let normal = Normal::new(0.0, variance.sqrt()).expect("positive variance");
    (0..n)
        .map(|_| mean.iter().map(|m| m + normal.sample(rng)).collect())
        .collect()
}

fn two_clusters(rng: &mut ChaCha8Rng, n: usize, a: [f64; 2], b: [f64; 2], positive: &[usize]) -> Vec<Vec<f64>> {
    let mut pts = gaussian_cloud(rng, n / 2, &a, 0.1);
    pts.extend(gaussian_cloud(rng, n - n / 2, &b, 0.1));
    for p in &mut pts {
        for &k in positive {
            p[k] = p[k].abs().max(POSITIVE_FLOOR);
        }
    }
    pts
}

/// Synthetic data in chart coordinates for a zoo manifold, unit weights.
///
/// | manifold | sampling |
/// |---|---|
/// | sphere, euclidean | variance 1 around `linspace(0, 1, d)` |
/// | ellipsoid | variance 1 around `linspace(0.5, 1, d)`, end point excluded |
/// | torus, hyperbolic | variance 1 around the origin |
/// | paraboloid, hyperbolic paraboloid | variance 0.1 around `(1, …, 1)` |
/// | Gaussian, Cauchy | two halves, variance 0.1, around `(−1, 0.5)` and `(1, 1)` |
/// | Fréchet, Pareto | two halves, variance 0.1, around `(0.5, 0.5)` and `(1, 1)` |
///
/// Coordinates that must be positive are replaced by `max(|c|, 0.01)`.
pub fn gen_dataset(manifold: &ZooMetric, n: usize, seed: u64) -> Result<WeightedDataset> {
    if n == 0 {
        return Err(Error::Config("N must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = MetricField::dim(manifold);
    let points = match manifold {
        ZooMetric::Sphere { .. } | ZooMetric::Euclidean { .. } => gaussian_cloud(&mut rng, n, &linspace(0.0, 1.0, d, true), 1.0),
        ZooMetric::Ellipsoid { .. } => gaussian_cloud(&mut rng, n, &linspace(0.5, 1.0, d, false), 1.0),
        ZooMetric::Torus { .. } | ZooMetric::Hyperbolic => gaussian_cloud(&mut rng, n, &[0.0, 0.0], 1.0),
        ZooMetric::Paraboloid { .. } | ZooMetric::HyperbolicParaboloid => gaussian_cloud(&mut rng, n, &vec![1.0; d], 0.1),
        ZooMetric::GaussianFr | ZooMetric::CauchyFr => two_clusters(&mut rng, n, [-1.0, 0.5], [1.0, 1.0], &[1]),
        ZooMetric::FrechetFr | ZooMetric::ParetoFr => two_clusters(&mut rng, n, [0.5, 0.5], [1.0, 1.0], &[0, 1]),
    };
    WeightedDataset::new(points)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindKind {
    #[default]
    Generic,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinslerSpec {
    pub wind: WindKind,
    pub v0: f64,
    pub scale: f64,
}

impl Default for FinslerSpec {
    fn default() -> Self {
        FinslerSpec {
            wind: WindKind::Generic,
            v0: 1.0,
            scale: 1.0,
        }
    }
}

/// A zoo manifold, optionally turned into a Randers field.
#[derive(Clone, Debug)]
pub enum AnyField {
    Riemannian(ZooMetric),
    Generic(Randers<ZooMetric, GenericWind>),
    ZeroWind(Randers<ZooMetric, ZeroWind>),
}

impl AnyField {
    pub fn build(manifold: &ManifoldSpec, finsler: Option<&FinslerSpec>) -> Result<Self> {
        let m = manifold.build()?;
        Ok(match finsler {
            None => AnyField::Riemannian(m),
            Some(f) => {
                if !(f.v0 > 0.0) {
                    return Err(Error::Config("v0 must be positive".into()));
                }
                match f.wind {
                    WindKind::Generic => AnyField::Generic(Randers::new(m, GenericWind { scale: f.scale }, f.v0)),
                    WindKind::None => AnyField::ZeroWind(Randers::new(m, ZeroWind, f.v0)),
                }
            }
        })
    }

    pub fn background(&self) -> &ZooMetric {
        match self {
            AnyField::Riemannian(m) => m,
            AnyField::Generic(r) => &r.background,
            AnyField::ZeroWind(r) => &r.background,
        }
    }
}

macro_rules! each_field {
    ($self:expr, $f:ident => $body:expr) => {
        match $self {
            AnyField::Riemannian($f) => $body,
            AnyField::Generic($f) => $body,
            AnyField::ZeroWind($f) => $body,
        }
    };
}

impl MetricField for AnyField {
    fn dim(&self) -> usize {
        each_field!(self, f => MetricField::dim(f))
    }
    fn in_domain(&self, x: &[f64]) -> bool {
        each_field!(self, f => MetricField::in_domain(f, x))
    }
    fn tensor(&self, x: &[f64], v: &[f64]) -> Result<Matrix> {
        each_field!(self, f => f.tensor(x, v))
    }
    fn quad<S: Scalar>(&self, x: &[S], v: &[S], u: &[S]) -> S {
        each_field!(self, f => f.quad(x, v, u))
    }
    fn energy_density(&self, x: &[f64], u: &[f64]) -> f64 {
        each_field!(self, f => f.energy_density(x, u))
    }
    fn velocity_dependent(&self) -> bool {
        each_field!(self, f => f.velocity_dependent())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    pub n: usize,
    pub seed: u64,
    /// Read points from this CSV instead of generating them.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            n: 100,
            seed: 0,
            path: None,
        }
    }
}

/// One solver in a sweep. `method` is `georce_fm`, `adaptive_georce_fm` or
/// an optimizer name; unset fields take the solver's defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodSpec {
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_size: Option<f64>,
    /// Mini-batch size; a fraction of N when `batch_fraction` is given instead.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sub_iters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl MethodSpec {
    pub fn new(method: &str) -> Self {
        MethodSpec {
            method: method.into(),
            ..Default::default()
        }
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.method.clone())
    }

    fn batch(&self, n_total: usize) -> Result<Option<usize>> {
        match (self.batch_size, self.batch_fraction) {
            (Some(b), _) => Ok(Some(b)),
            (None, Some(f)) if f > 0.0 && f <= 1.0 => Ok(Some(((f * n_total as f64).round() as usize).max(1))),
            (None, Some(f)) => Err(Error::Config(format!("batch_fraction must be in (0, 1], got {f}"))),
            (None, None) => Ok(None),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub manifold: ManifoldSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finsler: Option<FinslerSpec>,
    pub mode: Mode,
    pub dataset: DatasetSpec,
    #[serde(rename = "T")]
    pub steps: usize,
    pub tol: f64,
    pub methods: Vec<MethodSpec>,
    pub repeats: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            manifold: ManifoldSpec::new("sphere", 2),
            finsler: None,
            mode: Mode::Riemannian,
            dataset: DatasetSpec::default(),
            steps: 100,
            tol: 1e-4,
            methods: vec![MethodSpec::new("georce_fm")],
            repeats: 3,
            output_dir: None,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.steps < 2 {
            return Err(Error::Config(format!("T must be at least 2, got {}", self.steps)));
        }
        if self.dataset.n == 0 && self.dataset.path.is_none() {
            return Err(Error::Config("N must be at least 1".into()));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods listed".into()));
        }
        for m in &self.methods {
            if !matches!(m.method.as_str(), "georce_fm" | "adaptive_georce_fm") {
                m.method.parse::<Method>()?;
            }
        }
        self.manifold.build()?;
        Ok(())
    }

    pub fn dataset(&self, field: &AnyField) -> Result<WeightedDataset> {
        match &self.dataset.path {
            Some(p) => {
                let f = std::fs::File::open(p).map_err(|e| Error::Io(format!("{p}: {e}")))?;
                WeightedDataset::read_csv(f)
            }
            None => gen_dataset(field.background(), self.dataset.n, self.dataset.seed),
        }
    }
}

/// One line of a results table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub manifold: String,
    pub method: String,
    /// Absent for diverged or failed runs.
    pub moi: Option<f64>,
    pub iterations: usize,
    pub runtime_mean: f64,
    pub runtime_std: f64,
    pub converged: bool,
    pub diverged: bool,
    pub seed: u64,
    pub mean: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

struct MethodOutcome {
    mean: Vec<f64>,
    moi: f64,
    iterations: usize,
    converged: bool,
}

fn run_method(spec: &ExperimentSpec, m: &MethodSpec, field: &AnyField, data: &WeightedDataset) -> Result<MethodOutcome> {
    let steps = spec.steps;
    match m.method.as_str() {
        "georce_fm" => {
            let mut opts = FrechetOptions {
                steps,
                tol: spec.tol,
                ..Default::default()
            };
            if let Some(k) = m.max_iter {
                opts.max_iter = k;
            }
            let r = solve(field, data, &opts, spec.mode)?;
            Ok(MethodOutcome {
                mean: r.mean,
                moi: r.moi,
                iterations: r.iterations,
                converged: r.converged,
            })
        }
        "adaptive_georce_fm" => {
            let mut cfg = BatchConfig {
                batch_size: m.batch(data.len())?.unwrap_or(data.len()),
                tol: spec.tol,
                inner_tol: spec.tol,
                seed: m.seed.unwrap_or(spec.dataset.seed),
                ..Default::default()
            };
            if let Some(k) = m.max_iter {
                cfg.max_outer = k;
            }
            if let Some(s) = m.sub_iters {
                cfg.sub_iters = s;
            }
            if let Some(l) = m.lambda {
                cfg.lambda = l;
            }
            let r = adaptive_solve(field, data, steps, &cfg, spec.mode)?;
            Ok(MethodOutcome {
                mean: r.result.mean,
                moi: r.result.moi,
                iterations: r.outer_iterations,
                converged: r.result.converged,
            })
        }
        name => {
            let mut cfg = OptimizerConfig {
                method: name.parse()?,
                steps,
                tol: spec.tol,
                ..Default::default()
            };
            if let Some(k) = m.max_iter {
                cfg.max_iter = k;
            }
            if let Some(a) = m.step_size {
                cfg.step_size = a;
            }
            let batch = m.batch(data.len())?.map(|batch_size| Minibatch {
                batch_size,
                seed: m.seed.unwrap_or(spec.dataset.seed),
            });
            let r = run_first_order(&cfg, field, data, batch, spec.mode)?;
            Ok(MethodOutcome {
                mean: r.result.mean,
                moi: r.result.moi,
                iterations: r.iterations_run,
                converged: r.result.converged,
            })
        }
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Solves with every listed method; each is timed over `repeats` runs. A
/// failing method yields a row with `moi` absent and never stops the sweep.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let field = AnyField::build(&spec.manifold, spec.finsler.as_ref())?;
    let data = spec.dataset(&field)?;
    let manifold = match &spec.finsler {
        Some(_) => format!("{}+randers", spec.manifold.name),
        None => spec.manifold.name.clone(),
    };
    let mut rows = Vec::with_capacity(spec.methods.len());
    for m in &spec.methods {
        let mut times = Vec::with_capacity(spec.repeats);
        let mut outcome = None;
        for _ in 0..spec.repeats {
            let start = Instant::now();
            let r = run_method(spec, m, &field, &data);
            times.push(start.elapsed().as_secs_f64());
            let failed = r.is_err();
            outcome = Some(r);
            if failed {
                break;
            }
        }
        let (runtime_mean, runtime_std) = mean_std(&times);
        let row = match outcome.expect("at least one repeat") {
            Ok(o) => ResultRow {
                manifold: manifold.clone(),
                method: m.label(),
                moi: Some(o.moi),
                iterations: o.iterations,
                runtime_mean,
                runtime_std,
                converged: o.converged,
                diverged: false,
                seed: spec.dataset.seed,
                mean: o.mean,
                error: None,
            },
            Err(e) => ResultRow {
                manifold: manifold.clone(),
                method: m.label(),
                moi: None,
                iterations: match &e {
                    Error::Diverged { iteration, .. } => *iteration,
                    _ => 0,
                },
                runtime_mean,
                runtime_std,
                converged: false,
                diverged: matches!(e, Error::Diverged { .. }),
                seed: spec.dataset.seed,
                mean: match &e {
                    Error::Diverged { snapshot, .. } => snapshot.clone(),
                    _ => Vec::new(),
                },
                error: Some(e.to_string()),
            },
        };
        rows.push(row);
    }
    Ok(rows)
}

/// Columns `manifold,method,moi,iterations,runtime_mean,runtime_std,converged,diverged,seed`;
/// `moi` is empty for diverged runs.
pub fn write_rows_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "manifold",
        "method",
        "moi",
        "iterations",
        "runtime_mean",
        "runtime_std",
        "converged",
        "diverged",
        "seed",
    ])?;
    for r in rows {
        w.write_record([
            r.manifold.clone(),
            r.method.clone(),
            r.moi.map(fmt_float).unwrap_or_default(),
            r.iterations.to_string(),
            format!("{:.6}", r.runtime_mean),
            format!("{:.6}", r.runtime_std),
            r.converged.to_string(),
            r.diverged.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `results.csv` and `results.json` into `dir`.
pub fn write_outputs(rows: &[ResultRow], dir: &std::path::Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let csv_path = dir.join("results.csv");
    let f = std::fs::File::create(&csv_path).map_err(|e| Error::Io(format!("{}: {e}", csv_path.display())))?;
    write_rows_csv(rows, f)?;
    let json_path = dir.join("results.json");
    let text = serde_json::to_string_pretty(rows).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(&json_path, text + "\n").map_err(|e| Error::Io(format!("{}: {e}", json_path.display())))?;
    Ok(())
}
