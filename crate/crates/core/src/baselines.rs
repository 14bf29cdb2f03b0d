//! First-order optimizers on the joint discretized objective: all interior
//! curve points plus the shared end point `y`, with fixed step sizes.

use serde::{Deserialize, Serialize};

use crate::adaptive::{sample_index_set, step_rng};
use crate::error::{Error, Result};
use crate::frechet::{FrechetResult, Mode, MoiOptions, ResultSummary, SolverState, WeightedDataset};
use crate::geodesic::{DiscreteCurve, Termination};
use crate::manifold::{FieldRef, MetricField, Reversed};
use crate::numerics::{par_map, seed_block, sum_deterministic};

/// Objective values above this count as divergence.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

/// Free variables packed as `[x_{1..T−1, 1..N}, y]`, curve-major, then step,
/// then coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct FlatVars {
    pub values: Vec<f64>,
    pub n_curves: usize,
    pub steps: usize,
    pub dim: usize,
}

impl FlatVars {
    pub fn pack(state: &SolverState) -> Self {
        let n_curves = state.curves.len();
        let steps = state.steps();
        let dim = state.y.len();
        let mut values = Vec::with_capacity((n_curves * (steps - 1) + 1) * dim);
        for c in &state.curves {
            for p in &c.points[1..steps] {
                values.extend_from_slice(p);
            }
        }
        values.extend_from_slice(&state.y);
        FlatVars {
            values,
            n_curves,
            steps,
            dim,
        }
    }

    /// Offset of `x_{t,i}` for `1 ≤ t ≤ T−1`.
    pub fn offset(&self, i: usize, t: usize) -> usize {
        (i * (self.steps - 1) + t - 1) * self.dim
    }

    pub fn y(&self) -> &[f64] {
        &self.values[self.values.len() - self.dim..]
    }

    pub fn curve(&self, i: usize, start: &[f64]) -> DiscreteCurve {
        let mut points = Vec::with_capacity(self.steps + 1);
        points.push(start.to_vec());
        for t in 1..self.steps {
            let o = self.offset(i, t);
            points.push(self.values[o..o + self.dim].to_vec());
        }
        points.push(self.y().to_vec());
        DiscreteCurve { points }
    }

    pub fn unpack(&self, data: &WeightedDataset) -> SolverState {
        SolverState {
            curves: (0..self.n_curves).map(|i| self.curve(i, &data.points[i])).collect(),
            y: self.y().to_vec(),
            iteration: 0,
        }
    }
}

/// Energy of one curve and its gradient w.r.t. `x_1 … x_T`.
fn curve_energy_grad<F: MetricField + ?Sized>(field: &F, curve: &DiscreteCurve, index: usize) -> Result<(f64, Vec<Vec<f64>>)> {
    let steps = curve.steps();
    let d = curve.dim();
    let mut energy = 0.0;
    // ν_t = ∂e_t/∂x_t and p_t = ∂e_t/∂u_t, from one sweep seeding both.
    let mut nu = vec![vec![0.0; d]; steps];
    let mut p = vec![vec![0.0; d]; steps];
    for t in 0..steps {
        let x = &curve.points[t];
        if !field.in_domain(x) {
            return Err(Error::domain(format!("point {x:?}")).at(t, Some(index)));
        }
        let u: Vec<f64> = curve.points[t + 1].iter().zip(x).map(|(a, b)| a - b).collect();
        if u.iter().all(|c| *c == 0.0) {
            continue;
        }
        let xs = seed_block(x, 0, 2 * d);
        let us = seed_block(&u, d, 2 * d);
        let e = field.quad(&xs, &us, &us);
        if !e.re.is_finite() {
            return Err(Error::Numerical {
                index: t,
                context: format!("segment energy of curve {index}"),
            });
        }
        energy += e.re;
        for k in 0..d {
            nu[t][k] = e.partial(k);
            p[t][k] = e.partial(d + k);
        }
    }
    let mut grad: Vec<Vec<f64>> = (1..steps)
        .map(|t| (0..d).map(|k| nu[t][k] - p[t][k] + p[t - 1][k]).collect())
        .collect();
    grad.push(p[steps - 1].clone());
    Ok((energy, grad))
}

/// `Σ_{i∈I} c·w_i E_i` over the curves in `subset` (all curves if `None`) and
/// its gradient in the packed layout; `c` scales the subset objective.
fn energy_and_grad_on<F: MetricField + ?Sized>(
    field: &F,
    vars: &FlatVars,
    data: &WeightedDataset,
    subset: Option<&[usize]>,
    scale: f64,
) -> Result<(f64, Vec<f64>)> {
    let all: Vec<usize>;
    let idx = match subset {
        Some(s) => s,
        None => {
            all = (0..vars.n_curves).collect();
            &all
        }
    };
    let d = vars.dim;
    let parts: Vec<(f64, Vec<Vec<f64>>)> = par_map(idx.len(), |j| {
        let i = idx[j];
        curve_energy_grad(field, &vars.curve(i, &data.points[i]), i)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let mut grad = vec![0.0; vars.values.len()];
    let mut energies = Vec::with_capacity(idx.len());
    let mut y_terms = Vec::with_capacity(idx.len());
    for (&i, (e, g)) in idx.iter().zip(&parts) {
        let c = scale * data.weights[i];
        energies.push(c * e);
        for t in 1..vars.steps {
            let o = vars.offset(i, t);
            for k in 0..d {
                grad[o + k] = c * g[t - 1][k];
            }
        }
        y_terms.push(g[vars.steps - 1].iter().map(|v| c * v).collect::<Vec<f64>>());
    }
    let gy = sum_deterministic(&y_terms, (d, 1))?;
    let n = grad.len();
    grad[n - d..].copy_from_slice(&gy);
    Ok((energies.iter().sum(), grad))
}

/// `Σ_i w_i E_i` and its exact gradient in the packed layout.
pub fn joint_energy_and_grad<F: MetricField + ?Sized>(
    vars: &FlatVars,
    field: &F,
    data: &WeightedDataset,
) -> Result<(f64, Vec<f64>)> {
    energy_and_grad_on(field, vars, data, None, 1.0)
}

/// Subset objective scaled by `N/n`, an unbiased estimate of the full one.
pub fn minibatch_energy_and_grad<F: MetricField + ?Sized>(
    vars: &FlatVars,
    field: &F,
    data: &WeightedDataset,
    subset: &[usize],
) -> Result<(f64, Vec<f64>)> {
    let scale = data.len() as f64 / subset.len() as f64;
    energy_and_grad_on(field, vars, data, Some(subset), scale)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Adam,
    Rmsprop,
    RmspropMomentum,
    Sgd,
    Adamax,
    Adagrad,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Adam,
        Method::Rmsprop,
        Method::RmspropMomentum,
        Method::Sgd,
        Method::Adamax,
        Method::Adagrad,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Adam => "adam",
            Method::Rmsprop => "rmsprop",
            Method::RmspropMomentum => "rmsprop_momentum",
            Method::Sgd => "sgd",
            Method::Adamax => "adamax",
            Method::Adagrad => "adagrad",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown optimizer '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub method: Method,
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Momentum of `rmsprop_momentum`.
    pub momentum: f64,
    /// Squared-gradient decay of the RMSprop variants.
    pub decay: f64,
    /// Starting value of Adagrad's accumulator.
    pub adagrad_init: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub steps: usize,
    pub moi: MoiOptions,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            method: Method::Adam,
            step_size: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            momentum: 0.9,
            decay: 0.9,
            adagrad_init: 0.1,
            tol: 1e-4,
            max_iter: 1000,
            steps: 100,
            moi: MoiOptions::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn with_method(method: Method) -> Self {
        OptimizerConfig {
            method,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) {
            return Err(Error::Config("step size must be positive".into()));
        }
        if !(self.tol > 0.0 && self.eps > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if self.steps < 2 {
            return Err(Error::Config(format!("T must be at least 2, got {}", self.steps)));
        }
        Ok(())
    }
}

/// Optimizer state; `step` applies one update in place.
#[derive(Clone, Debug)]
pub struct Optimizer {
    cfg: OptimizerConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Optimizer {
    pub fn new(cfg: &OptimizerConfig, n: usize) -> Self {
        let v0 = if cfg.method == Method::Adagrad { cfg.adagrad_init } else { 0.0 };
        Optimizer {
            cfg: cfg.clone(),
            m: vec![0.0; n],
            v: vec![v0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, x: &mut [f64], g: &[f64]) {
        self.t += 1;
        let c = &self.cfg;
        let a = c.step_size;
        match c.method {
            Method::Sgd => {
                for (xi, gi) in x.iter_mut().zip(g) {
                    *xi -= a * gi;
                }
            }
            Method::Adam => {
                let bc1 = 1.0 - c.beta1.powi(self.t);
                let bc2 = 1.0 - c.beta2.powi(self.t);
                for k in 0..x.len() {
                    self.m[k] = c.beta1 * self.m[k] + (1.0 - c.beta1) * g[k];
                    self.v[k] = c.beta2 * self.v[k] + (1.0 - c.beta2) * g[k] * g[k];
                    x[k] -= a * (self.m[k] / bc1) / ((self.v[k] / bc2).sqrt() + c.eps);
                }
            }
            Method::Adamax => {
                let bc1 = 1.0 - c.beta1.powi(self.t);
                for k in 0..x.len() {
                    self.m[k] = c.beta1 * self.m[k] + (1.0 - c.beta1) * g[k];
                    self.v[k] = (c.beta2 * self.v[k]).max(g[k].abs());
                    x[k] -= (a / bc1) * self.m[k] / (self.v[k] + c.eps);
                }
            }
            Method::Rmsprop => {
                for k in 0..x.len() {
                    self.v[k] = c.decay * self.v[k] + (1.0 - c.decay) * g[k] * g[k];
                    x[k] -= a * g[k] / (self.v[k].sqrt() + c.eps);
                }
            }
            Method::RmspropMomentum => {
                for k in 0..x.len() {
                    self.v[k] = c.decay * self.v[k] + (1.0 - c.decay) * g[k] * g[k];
                    self.m[k] = c.momentum * self.m[k] + g[k] / (self.v[k].sqrt() + c.eps);
                    x[k] -= a * self.m[k];
                }
            }
            Method::Adagrad => {
                for k in 0..x.len() {
                    self.v[k] += g[k] * g[k];
                    x[k] -= a * g[k] / (self.v[k].sqrt() + c.eps);
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Minibatch {
    pub batch_size: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BaselineResult {
    pub result: FrechetResult,
    pub method: Method,
    pub iterations_run: usize,
}

impl BaselineResult {
    pub fn summary(&self) -> ResultSummary {
        let mut s = self.result.summary();
        s.extra.insert("method".into(), self.method.name().into());
        s.extra.insert("iterations_run".into(), self.iterations_run.into());
        s.extra.insert("diverged".into(), false.into());
        s
    }
}

struct Run {
    vars: FlatVars,
    iterations: usize,
    grad_trace: Vec<f64>,
    energy_trace: Vec<f64>,
    converged: bool,
}

fn optimize<F: MetricField + ?Sized>(
    field: &F,
    data: &WeightedDataset,
    cfg: &OptimizerConfig,
    batch: Option<Minibatch>,
) -> Result<Run> {
    for (i, a) in data.points.iter().enumerate() {
        if !field.in_domain(a) {
            return Err(Error::domain(format!("data point {i} = {a:?}")));
        }
    }
    let n = data.len();
    let init = SolverState::straight(data, &data.points[0], cfg.steps);
    let mut vars = FlatVars::pack(&init);
    let mut opt = Optimizer::new(cfg, vars.values.len());
    let mut grad_trace = Vec::new();
    let mut energy_trace = Vec::new();
    let mut iterations = 0;
    loop {
        let evaluated = match batch {
            None => joint_energy_and_grad(&vars, field, data),
            Some(b) => {
                let idx = sample_index_set(n, b.batch_size, &mut step_rng(b.seed, iterations as u64))?;
                minibatch_energy_and_grad(&vars, field, data, &idx)
            }
        };
        let (energy, grad) = match evaluated {
            Ok(v) => v,
            Err(Error::Domain { .. } | Error::Numerical { .. }) => {
                return Err(Error::Diverged {
                    iteration: iterations,
                    objective: f64::INFINITY,
                    snapshot: vars.y().to_vec(),
                })
            }
            Err(e) => return Err(e),
        };
        if !energy.is_finite() || energy > DIVERGENCE_THRESHOLD || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged {
                iteration: iterations,
                objective: energy,
                snapshot: vars.y().to_vec(),
            });
        }
        let metric = grad.iter().map(|g| g * g).sum::<f64>().sqrt() / n as f64;
        grad_trace.push(metric);
        energy_trace.push(energy);
        if metric <= cfg.tol || iterations >= cfg.max_iter {
            return Ok(Run {
                converged: metric <= cfg.tol,
                vars,
                iterations,
                grad_trace,
                energy_trace,
            });
        }
        opt.step(&mut vars.values, &grad);
        iterations += 1;
    }
}

/// Runs one optimizer from straight lines to the first data point until
/// `(1/N)‖∇‖ ≤ tol` or `max_iter`. Divergence (objective above
/// [`DIVERGENCE_THRESHOLD`], non-finite values, or iterates leaving the chart)
/// is reported as [`Error::Diverged`].
pub fn run_first_order<F: MetricField + ?Sized>(
    cfg: &OptimizerConfig,
    field: &F,
    data: &WeightedDataset,
    batch: Option<Minibatch>,
    mode: Mode,
) -> Result<BaselineResult> {
    cfg.validate()?;
    data.validate()?;
    if let Some(b) = batch {
        if b.batch_size == 0 || b.batch_size > data.len() {
            return Err(Error::Config(format!("batch size must be in 1..={}, got {}", data.len(), b.batch_size)));
        }
    }
    let run = match mode {
        Mode::Finsler => optimize(&Reversed(FieldRef(field)), data, cfg, batch)?,
        Mode::Riemannian | Mode::FinslerBackward => optimize(&FieldRef(field), data, cfg, batch)?,
    };
    let state = run.vars.unpack(data);
    let moi = crate::stats::moment_of_inertia(field, &state.y, data, mode, cfg.steps, &cfg.moi)?;
    let termination = if run.converged {
        Termination::Converged
    } else {
        Termination::MaxIterations
    };
    Ok(BaselineResult {
        result: FrechetResult::from_state(&state, moi, run.iterations, run.grad_trace, run.energy_trace, termination, mode),
        method: cfg.method,
        iterations_run: run.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frechet::{init_state, weighted_energy};
    use crate::geodesic::discrete_energy;
    use crate::manifold::ZooMetric;
    use crate::numerics::grad_central_difference;

    fn ds() -> WeightedDataset {
        WeightedDataset::with_weights(
            vec![vec![0.3, 0.1], vec![-0.2, 0.4], vec![0.0, -0.5], vec![0.25, 0.3]],
            vec![1.0, 2.0, 0.5, 1.5],
        )
        .unwrap()
    }

    fn wiggled(data: &WeightedDataset, steps: usize) -> SolverState {
        let s = ZooMetric::Sphere { dim: 2 };
        let mut st = init_state(&s, data, steps, Some(&[0.05, 0.02])).unwrap();
        for (i, c) in st.curves.iter_mut().enumerate() {
            for (t, p) in c.points.iter_mut().enumerate().take(steps).skip(1) {
                p[0] += 0.03 * ((i + t) as f64).sin();
                p[1] -= 0.02 * ((i * t) as f64).cos();
            }
        }
        st
    }

    #[test]
    fn pack_round_trip() {
        let data = ds();
        let st = wiggled(&data, 5);
        let v = FlatVars::pack(&st);
        assert_eq!(v.values.len(), (4 * 4 + 1) * 2);
        assert_eq!(&v.values[v.offset(2, 3)..v.offset(2, 3) + 2], &st.curves[2].points[3][..]);
        assert_eq!(v.unpack(&data), st);
    }

    #[test]
    fn value_and_gradient() {
        let data = ds();
        let s = ZooMetric::Sphere { dim: 2 };
        let st = wiggled(&data, 6);
        let vars = FlatVars::pack(&st);
        let (e, g) = joint_energy_and_grad(&vars, &s, &data).unwrap();
        let want: f64 = st
            .curves
            .iter()
            .zip(&data.weights)
            .map(|(c, w)| w * discrete_energy(c, &s).unwrap())
            .sum();
        assert!((e - want).abs() < 1e-12);
        let f = |z: &[f64]| {
            let v = FlatVars {
                values: z.to_vec(),
                ..vars.clone()
            };
            weighted_energy(&s, &v.unpack(&data), &data).unwrap()
        };
        let fd = grad_central_difference(f, &vars.values, 1e-6);
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-5 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn euclidean_optimum_has_zero_gradient() {
        let data = ds();
        let e = ZooMetric::Euclidean { dim: 2 };
        let st = SolverState::straight(&data, &data.weighted_average(), 7);
        let (_, g) = joint_energy_and_grad(&FlatVars::pack(&st), &e, &data).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn minibatch_gradient_is_unbiased() {
        let data = ds();
        let s = ZooMetric::Sphere { dim: 2 };
        let vars = FlatVars::pack(&wiggled(&data, 5));
        let (_, full) = joint_energy_and_grad(&vars, &s, &data).unwrap();
        let mut avg = vec![0.0; full.len()];
        let mut count = 0.0;
        for a in 0..4 {
            for b in a + 1..4 {
                let (_, g) = minibatch_energy_and_grad(&vars, &s, &data, &[a, b]).unwrap();
                avg.iter_mut().zip(&g).for_each(|(s, v)| *s += v);
                count += 1.0;
            }
        }
        for (a, f) in avg.iter().zip(&full) {
            assert!((a / count - f).abs() < 1e-10);
        }
    }

    fn two_steps(method: Method, g: f64) -> (f64, f64) {
        let mut o = Optimizer::new(&OptimizerConfig::with_method(method), 1);
        let mut x = [0.0];
        o.step(&mut x, &[g]);
        let first = x[0];
        o.step(&mut x, &[g]);
        (first, x[0])
    }

    #[test]
    fn update_rules_by_hand() {
        let close = |a: f64, b: f64| (a - b).abs() < 1e-15;
        // SGD: x ← x − 0.01·g.
        let (a, b) = two_steps(Method::Sgd, 2.0);
        assert!(close(a, -0.02) && close(b, -0.04));
        // Adam with constant g: bias-corrected moments are g and g², so each
        // step moves by 0.01·g/(|g| + 1e-8).
        let (a, b) = two_steps(Method::Adam, 2.0);
        let s = 0.01 * 2.0 / (2.0 + 1e-8);
        assert!(close(a, -s) && close(b, -2.0 * s));
        // Adamax: u₁ = |g|, m̂₁ = g; step two has u₂ = max(0.999·2, 2) = 2.
        let (a, b) = two_steps(Method::Adamax, 2.0);
        assert!(close(a, -s) && close(b, -2.0 * s));
        // RMSprop: v₁ = 0.1·4 = 0.4, v₂ = 0.9·0.4 + 0.4 = 0.76.
        let (a, b) = two_steps(Method::Rmsprop, 2.0);
        let s1 = 0.01 * 2.0 / (0.4f64.sqrt() + 1e-8);
        let s2 = 0.01 * 2.0 / (0.76f64.sqrt() + 1e-8);
        assert!(close(a, -s1) && close(b, -s1 - s2));
        // RMSprop with momentum: m₂ = 0.9·m₁ + g/√v₂.
        let (a, b) = two_steps(Method::RmspropMomentum, 2.0);
        let m1 = 2.0 / (0.4f64.sqrt() + 1e-8);
        let m2 = 0.9 * m1 + 2.0 / (0.76f64.sqrt() + 1e-8);
        assert!(close(a, -0.01 * m1) && close(b, -0.01 * (m1 + m2)));
        // Adagrad: accumulator 0.1 + 4, then 0.1 + 8.
        let (a, b) = two_steps(Method::Adagrad, 2.0);
        let s1 = 0.01 * 2.0 / (4.1f64.sqrt() + 1e-8);
        let s2 = 0.01 * 2.0 / (8.1f64.sqrt() + 1e-8);
        assert!(close(a, -s1) && close(b, -s1 - s2));
    }

    #[test]
    fn adam_finds_the_euclidean_mean() {
        let data = ds();
        let e = ZooMetric::Euclidean { dim: 2 };
        let cfg = OptimizerConfig {
            steps: 10,
            ..Default::default()
        };
        let r = run_first_order(&cfg, &e, &data, None, Mode::Riemannian).unwrap();
        let want = data.weighted_average();
        assert!(crate::geodesic::chart_distance(&r.result.mean, &want) < 1e-3);
        assert!(r.iterations_run <= 1000);
    }

    #[test]
    fn divergence_is_reported() {
        let data = WeightedDataset::new(vec![vec![0.0, 1.0], vec![1.0, 0.5], vec![-0.5, 2.0]]).unwrap();
        let g = ZooMetric::GaussianFr;
        let cfg = OptimizerConfig {
            method: Method::Sgd,
            step_size: 10.0,
            steps: 5,
            ..Default::default()
        };
        match run_first_order(&cfg, &g, &data, None, Mode::Riemannian) {
            Err(Error::Diverged { snapshot, .. }) => assert_eq!(snapshot.len(), 2),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_value(m).unwrap(), m.name());
        }
        assert!("bfgs".parse::<Method>().is_err());
    }
}
