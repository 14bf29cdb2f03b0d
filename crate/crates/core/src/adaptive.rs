//! Mini-batch GEORCE-FM: each outer step runs a few GEORCE-FM iterations on a
//! random subset of the data and blends the subset's `(W, V)` into running
//! estimates `(Ŵ, V̂)`, whose solve gives the next mean.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frechet::{
    run_iterations, FrechetOptions, FrechetResult, Mode, MoiOptions, ResultSummary, SolverState, WeightedDataset,
};
use crate::geodesic::{DiscreteCurve, LineSearch, Termination};
use crate::manifold::{FieldRef, MetricField, Reversed};
use crate::numerics::linalg::norm;
use crate::numerics::{spd_solve, Cholesky, Matrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatchConfig {
    pub batch_size: usize,
    /// GEORCE-FM iterations per batch.
    pub sub_iters: usize,
    /// Blend weight used when the inner run has not converged.
    pub lambda: f64,
    pub seed: u64,
    /// Stop once `‖y^(k) − y^(k−1)‖₂ ≤ tol`.
    pub tol: f64,
    pub max_outer: usize,
    /// Stop-metric threshold that counts an inner run as converged.
    pub inner_tol: f64,
    /// Use this blend weight on every step instead of `1/(k+1)` or `λ`.
    pub alpha_override: Option<f64>,
    pub line_search: LineSearch,
    pub moi: MoiOptions,
}

impl Default for BatchConfig {
    fn default() -> Self {
        BatchConfig {
            batch_size: 10,
            sub_iters: 5,
            lambda: 0.5,
            seed: 0,
            tol: 1e-4,
            max_outer: 1000,
            inner_tol: 1e-4,
            alpha_override: None,
            line_search: LineSearch::default(),
            moi: MoiOptions::default(),
        }
    }
}

impl BatchConfig {
    pub fn validate(&self, n_total: usize) -> Result<()> {
        if self.batch_size == 0 || self.batch_size > n_total {
            return Err(Error::Config(format!(
                "batch size must be in 1..={n_total}, got {}",
                self.batch_size
            )));
        }
        if self.sub_iters == 0 {
            return Err(Error::Config("sub_iters must be at least 1".into()));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::Config(format!("lambda must be in (0, 1], got {}", self.lambda)));
        }
        if let Some(a) = self.alpha_override {
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::Config(format!("alpha must be in (0, 1], got {a}")));
            }
        }
        if !(self.tol > 0.0 && self.inner_tol > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// `n` distinct indices from `0..n_total`, uniformly, in increasing order.
pub fn sample_index_set(n_total: usize, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    if n > n_total {
        return Err(Error::Config(format!("cannot draw {n} distinct indices from {n_total}")));
    }
    let mut idx = index::sample(rng, n_total, n).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// Generator for outer step `k`: one stream per step, so draws do not depend
/// on how many numbers earlier steps consumed.
pub fn step_rng(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunningEstimates {
    pub w_hat: Matrix,
    pub v_hat: Vec<f64>,
    pub k: usize,
}

/// Subset `(W̃, Ṽ)` after the inner iterations.
#[derive(Clone, Debug)]
pub struct BatchOutcome {
    pub w: Matrix,
    pub v: Vec<f64>,
    pub state: SolverState,
    pub converged: bool,
    pub iterations: usize,
}

/// Runs `sub_iters` GEORCE-FM iterations on `subset` from `warm` and evaluates
/// `(W̃, Ṽ)` at the final inner iterate.
pub fn batch_wv<F: MetricField + ?Sized>(
    field: &F,
    subset: &WeightedDataset,
    warm: SolverState,
    sub_iters: usize,
    inner_tol: f64,
    line_search: &LineSearch,
) -> Result<BatchOutcome> {
    let opts = FrechetOptions {
        steps: warm.steps(),
        tol: inner_tol,
        max_iter: sub_iters,
        line_search: *line_search,
        ..Default::default()
    };
    let out = run_iterations(field, subset, warm, &opts, None)?;
    Ok(BatchOutcome {
        w: out.aux.w,
        v: out.aux.v,
        state: out.state,
        converged: out.termination == Termination::Converged,
        iterations: out.iterations,
    })
}

/// Adaptive solve output: the usual result plus the outer-loop record.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdaptiveResult {
    pub result: FrechetResult,
    pub outer_iterations: usize,
    pub batch_size: usize,
    pub lambda: f64,
    pub seed: u64,
    /// `y^(0), y^(1), …`.
    pub y_trace: Vec<Vec<f64>>,
    /// Blend weight used at each outer step `k ≥ 1`.
    pub alphas: Vec<f64>,
}

impl AdaptiveResult {
    pub fn summary(&self) -> ResultSummary {
        let mut s = self.result.summary();
        s.extra.insert("outer_iterations".into(), self.outer_iterations.into());
        s.extra.insert("batch_size".into(), self.batch_size.into());
        s.extra.insert("lambda".into(), self.lambda.into());
        s.extra.insert("seed".into(), self.seed.into());
        s
    }
}

/// Per-point curve cache; a curve is moved onto a new mean by adding
/// `(t/T)(y − x_T)` to its `t`-th point.
struct CurveCache {
    curves: Vec<Option<DiscreteCurve>>,
}

impl CurveCache {
    fn warm_curve(&self, i: usize, a: &[f64], y: &[f64], steps: usize) -> DiscreteCurve {
        match &self.curves[i] {
            None => DiscreteCurve::straight(a, y, steps),
            Some(c) => {
                let shift: Vec<f64> = y.iter().zip(c.end()).map(|(n, o)| n - o).collect();
                let mut c = c.clone();
                let t_max = steps as f64;
                for (t, p) in c.points.iter_mut().enumerate().skip(1) {
                    let s = t as f64 / t_max;
                    for (pk, dk) in p.iter_mut().zip(&shift) {
                        *pk += s * dk;
                    }
                }
                c.points[steps] = y.to_vec();
                c
            }
        }
    }

    fn warm_state(&self, data: &WeightedDataset, idx: &[usize], y: &[f64], steps: usize) -> SolverState {
        SolverState {
            curves: idx
                .iter()
                .map(|&i| self.warm_curve(i, &data.points[i], y, steps))
                .collect(),
            y: y.to_vec(),
            iteration: 0,
        }
    }

    fn store(&mut self, idx: &[usize], state: SolverState) {
        for (&i, c) in idx.iter().zip(state.curves) {
            self.curves[i] = Some(c);
        }
    }
}

fn check_in_domain<F: MetricField + ?Sized>(field: &F, y: &[f64], k: usize) -> Result<()> {
    if field.in_domain(y) && y.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::domain(format!("mean estimate {y:?} at outer step {k}")))
    }
}

struct Outer {
    state: SolverState,
    y_trace: Vec<Vec<f64>>,
    alphas: Vec<f64>,
    converged: bool,
    inner_iterations: usize,
}

fn drive<F: MetricField + ?Sized>(field: &F, data: &WeightedDataset, steps: usize, cfg: &BatchConfig) -> Result<Outer> {
    let n_total = data.len();
    let y_init = data.points[0].clone();
    for (i, a) in data.points.iter().enumerate() {
        if !field.in_domain(a) {
            return Err(Error::domain(format!("data point {i} = {a:?}")));
        }
    }
    let mut cache = CurveCache {
        curves: vec![None; n_total],
    };
    let mut inner_iterations = 0;

    let idx = sample_index_set(n_total, cfg.batch_size, &mut step_rng(cfg.seed, 0))?;
    let subset = data.subset(&idx);
    let first = batch_wv(
        field,
        &subset,
        cache.warm_state(data, &idx, &y_init, steps),
        cfg.sub_iters,
        cfg.inner_tol,
        &cfg.line_search,
    )?;
    inner_iterations += first.iterations;
    cache.store(&idx, first.state);
    let mut est = RunningEstimates {
        w_hat: first.w,
        v_hat: first.v,
        k: 0,
    };
    let mut y = spd_solve(&est.w_hat, &est.v_hat)?;
    check_in_domain(field, &y, 0)?;
    let mut y_trace = vec![y.clone()];
    let mut alphas = Vec::new();
    let mut converged = false;

    for k in 1..=cfg.max_outer {
        let idx = sample_index_set(n_total, cfg.batch_size, &mut step_rng(cfg.seed, k as u64))?;
        let subset = data.subset(&idx);
        let out = batch_wv(
            field,
            &subset,
            cache.warm_state(data, &idx, &y, steps),
            cfg.sub_iters,
            cfg.inner_tol,
            &cfg.line_search,
        )?;
        inner_iterations += out.iterations;
        cache.store(&idx, out.state);
        let alpha = cfg
            .alpha_override
            .unwrap_or(if out.converged { 1.0 / (k as f64 + 1.0) } else { cfg.lambda });
        let mut w_hat = out.w.scaled(alpha);
        w_hat.add_assign(&est.w_hat.scaled(1.0 - alpha));
        let v_hat: Vec<f64> = out
            .v
            .iter()
            .zip(&est.v_hat)
            .map(|(n, o)| alpha * n + (1.0 - alpha) * o)
            .collect();
        Cholesky::new(&w_hat)?;
        est = RunningEstimates { w_hat, v_hat, k };
        let y_new = spd_solve(&est.w_hat, &est.v_hat)?;
        check_in_domain(field, &y_new, k)?;
        let step = norm(&y_new.iter().zip(&y).map(|(a, b)| a - b).collect::<Vec<_>>());
        y = y_new;
        y_trace.push(y.clone());
        alphas.push(alpha);
        if step <= cfg.tol {
            converged = true;
            break;
        }
    }

    let all: Vec<usize> = (0..n_total).collect();
    Ok(Outer {
        state: cache.warm_state(data, &all, &y, steps),
        y_trace,
        alphas,
        converged,
        inner_iterations,
    })
}

/// Adaptive GEORCE-FM. The returned curves are the cached per-point curves
/// moved onto the final mean (straight lines for points never sampled); the
/// moment of inertia is evaluated over all data.
pub fn adaptive_solve<F: MetricField + ?Sized>(
    field: &F,
    data: &WeightedDataset,
    steps: usize,
    cfg: &BatchConfig,
    mode: Mode,
) -> Result<AdaptiveResult> {
    data.validate()?;
    cfg.validate(data.len())?;
    if steps < 2 {
        return Err(Error::Config(format!("T must be at least 2, got {steps}")));
    }
    let outer = match mode {
        Mode::Finsler => drive(&Reversed(FieldRef(field)), data, steps, cfg)?,
        Mode::Riemannian | Mode::FinslerBackward => drive(&FieldRef(field), data, steps, cfg)?,
    };
    let moi = crate::stats::moment_of_inertia(field, &outer.state.y, data, mode, steps, &cfg.moi)?;
    let termination = if outer.converged {
        Termination::Converged
    } else {
        Termination::MaxIterations
    };
    let outer_iterations = outer.y_trace.len() - 1;
    let grad_trace = outer
        .y_trace
        .windows(2)
        .map(|w| norm(&w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect::<Vec<_>>()))
        .collect();
    let result = FrechetResult::from_state(
        &outer.state,
        moi,
        outer.inner_iterations,
        grad_trace,
        Vec::new(),
        termination,
        mode,
    );
    Ok(AdaptiveResult {
        result,
        outer_iterations,
        batch_size: cfg.batch_size,
        lambda: cfg.lambda,
        seed: cfg.seed,
        y_trace: outer.y_trace,
        alphas: outer.alphas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frechet::{compute_aux, init_state, mean_update, solve};
    use crate::manifold::ZooMetric;
    use rand::Rng;

    fn grid(n: usize) -> WeightedDataset {
        let pts = (0..n)
            .map(|i| {
                let a = i as f64 * 0.7;
                vec![0.3 * a.cos() + 0.05 * (i % 3) as f64, 0.25 * a.sin()]
            })
            .collect();
        WeightedDataset::new(pts).unwrap()
    }

    #[test]
    fn index_sets() {
        let mut rng = step_rng(1, 0);
        assert_eq!(sample_index_set(5, 5, &mut rng).unwrap(), vec![0, 1, 2, 3, 4]);
        let s = sample_index_set(100, 10, &mut rng).unwrap();
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert!(sample_index_set(3, 4, &mut rng).is_err());
        assert_eq!(
            sample_index_set(50, 7, &mut step_rng(9, 3)).unwrap(),
            sample_index_set(50, 7, &mut step_rng(9, 3)).unwrap()
        );
    }

    #[test]
    fn singleton_draws_are_uniform() {
        let n = 10;
        let draws = 10_000;
        let mut counts = vec![0usize; n];
        for k in 0..draws {
            counts[sample_index_set(n, 1, &mut step_rng(42, k)).unwrap()[0]] += 1;
        }
        let e = draws as f64 / n as f64;
        let chi2: f64 = counts.iter().map(|c| (*c as f64 - e).powi(2) / e).sum();
        // 99th percentile of chi-square with 9 degrees of freedom.
        assert!(chi2 < 21.666, "chi2 = {chi2}");
    }

    #[test]
    fn euclidean_batch_wv_is_closed_form() {
        let t = 8;
        let e = ZooMetric::Euclidean { dim: 2 };
        let data = grid(6);
        let sub = data.subset(&[1, 3, 4]);
        let warm = init_state(&e, &sub, t, Some(&[0.1, 0.1])).unwrap();
        for sub_iters in [1, 3] {
            let out = batch_wv(&e, &sub, warm.clone(), sub_iters, 1e-12, &LineSearch::default()).unwrap();
            for r in 0..2 {
                for c in 0..2 {
                    let want = if r == c { 3.0 / t as f64 } else { 0.0 };
                    assert!((out.w[(r, c)] - want).abs() < 1e-12);
                }
                let want: f64 = sub.points.iter().map(|p| p[r]).sum::<f64>() / t as f64;
                assert!((out.v[r] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn disjoint_batches_add_up() {
        let s = ZooMetric::Sphere { dim: 2 };
        let data = grid(6);
        let state = init_state(&s, &data, 10, Some(&[0.02, -0.03])).unwrap();
        let full = compute_aux(&s, &state, &data, false).unwrap();
        let mut w = Matrix::zeros(2, 2);
        let mut v = [0.0; 2];
        for part in [[0usize, 2, 5], [1, 3, 4]] {
            let sub = data.subset(&part);
            let st = SolverState {
                curves: part.iter().map(|&i| state.curves[i].clone()).collect(),
                y: state.y.clone(),
                iteration: 0,
            };
            let a = compute_aux(&s, &st, &sub, false).unwrap();
            w.add_assign(&a.w);
            v[0] += a.v[0];
            v[1] += a.v[1];
        }
        assert!(w.max_abs_diff(&full.w) < 1e-12);
        assert!((v[0] - full.v[0]).abs() < 1e-12 && (v[1] - full.v[1]).abs() < 1e-12);
    }

    #[test]
    fn full_batch_first_estimate_is_the_next_georce_fm_mean() {
        let s = ZooMetric::Sphere { dim: 2 };
        let data = grid(8);
        let cfg = BatchConfig {
            batch_size: 8,
            sub_iters: 2,
            inner_tol: 1e-14,
            alpha_override: Some(1.0),
            max_outer: 1,
            ..Default::default()
        };
        let r = adaptive_solve(&s, &data, 20, &cfg, Mode::Riemannian).unwrap();
        let opts = FrechetOptions {
            steps: 20,
            tol: 1e-14,
            max_iter: 2,
            ..Default::default()
        };
        let st = init_state(&s, &data, 20, None).unwrap();
        let out = run_iterations(&s, &data, st, &opts, None).unwrap();
        assert_eq!(r.y_trace[0], mean_update(&out.aux).unwrap());
    }

    #[test]
    fn euclidean_mean_is_recovered() {
        let e = ZooMetric::Euclidean { dim: 2 };
        let mut rng = step_rng(5, 1000);
        let pts: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.random::<f64>(), rng.random::<f64>() * 2.0]).collect();
        let data = WeightedDataset::new(pts).unwrap();
        let cfg = BatchConfig {
            batch_size: 20,
            max_outer: 200,
            ..Default::default()
        };
        let r = adaptive_solve(&e, &data, 10, &cfg, Mode::Riemannian).unwrap();
        let want = data.weighted_average();
        assert!(crate::geodesic::chart_distance(&r.result.mean, &want) < 5e-2);
        assert!(r.alphas.iter().all(|a| *a < 1.0));
    }

    #[test]
    fn full_batch_converges_to_the_full_solve() {
        let s = ZooMetric::Sphere { dim: 2 };
        let data = grid(8);
        let cfg = BatchConfig {
            batch_size: 8,
            tol: 1e-9,
            inner_tol: 1e-8,
            ..Default::default()
        };
        let a = adaptive_solve(&s, &data, 20, &cfg, Mode::Riemannian).unwrap();
        let f = solve(
            &s,
            &data,
            &FrechetOptions {
                steps: 20,
                tol: 1e-8,
                ..Default::default()
            },
            Mode::Riemannian,
        )
        .unwrap();
        assert!(a.result.converged);
        assert!(crate::geodesic::chart_distance(&a.result.mean, &f.mean) < 1e-6);
    }

    #[test]
    fn config_is_checked() {
        let data = grid(4);
        let e = ZooMetric::Euclidean { dim: 2 };
        for bad in [
            BatchConfig { batch_size: 5, ..Default::default() },
            BatchConfig { batch_size: 0, ..Default::default() },
            BatchConfig { batch_size: 2, lambda: 0.0, ..Default::default() },
            BatchConfig { batch_size: 2, sub_iters: 0, ..Default::default() },
        ] {
            assert!(matches!(adaptive_solve(&e, &data, 5, &bad, Mode::Riemannian), Err(Error::Config(_))));
        }
    }
}
