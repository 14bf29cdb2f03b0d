//! GEORCE-FM: the Fréchet mean and the geodesics to it, updated together.
//!
//! One iteration freezes the tensors `G_{t,i}` and their gradients at the
//! current curves, solves the resulting problem in closed form for the mean
//! `y = W^{-1} V` and the controls of every curve, and backtracks on a linear
//! blend of old and new controls (and mean) until the total energy drops.

mod data;

pub use data::WeightedDataset;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesic::{curve_aux, discrete_energy, Accepted, CurveAux, DiscreteCurve, LineSearch, Termination};
use crate::manifold::{FieldRef, MetricField, Reversed};
use crate::numerics::{par_map, spd_solve, sum_deterministic, Cholesky, Matrix};

/// Which Fréchet mean is computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Riemannian,
    /// Finsler mean as the start point of the distances, `Σ d_F(y, a_i)²`.
    /// The solver runs on the reversed field so that `y` still sits at the
    /// curve ends.
    Finsler,
    /// Finsler mean as the end point, `Σ d_F(a_i, y)²`.
    FinslerBackward,
}

/// Starting value of the mean.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMean {
    #[default]
    FirstPoint,
    ChartAverage,
    Point(Vec<f64>),
}

/// Settings of the post-hoc geodesic solves used for the moment of inertia.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MoiOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Segments per post-hoc geodesic; the solver's `T` when unset. The
    /// left-point length rule is first order, so a finer grid here gives a
    /// less biased moment at little cost.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
}

impl Default for MoiOptions {
    fn default() -> Self {
        MoiOptions {
            tol: 1e-6,
            max_iter: 100,
            steps: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrechetOptions {
    /// Number of segments `T` per curve.
    pub steps: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub line_search: LineSearch,
    pub init: InitMean,
    pub moi: MoiOptions,
    /// Keep only `(Σ_t G^{-1})^{-1}` and the right-hand sides between the
    /// mean update and the control update, recomputing the per-step tensors.
    pub low_memory: bool,
}

impl Default for FrechetOptions {
    fn default() -> Self {
        FrechetOptions {
            steps: 100,
            tol: 1e-4,
            max_iter: 1000,
            line_search: LineSearch::default(),
            init: InitMean::FirstPoint,
            moi: MoiOptions::default(),
            low_memory: false,
        }
    }
}

impl FrechetOptions {
    pub fn validate(&self) -> Result<()> {
        if self.steps < 2 {
            return Err(Error::Config(format!("T must be at least 2, got {}", self.steps)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config("tol must be positive".into()));
        }
        if self.moi.max_iter < 10 {
            return Err(Error::Config("MOI geodesics need at least 10 iterations".into()));
        }
        if matches!(self.moi.steps, Some(t) if t < 2) {
            return Err(Error::Config("MOI geodesics need T >= 2".into()));
        }
        Ok(())
    }
}

/// All curves `x_{t,i}` and the shared end point `y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverState {
    pub curves: Vec<DiscreteCurve>,
    pub y: Vec<f64>,
    pub iteration: usize,
}

impl SolverState {
    pub fn steps(&self) -> usize {
        self.curves[0].steps()
    }

    pub fn controls(&self, i: usize) -> Vec<Vec<f64>> {
        self.curves[i].controls()
    }

    /// Straight segments from every `a_i` to `y`.
    pub fn straight(data: &WeightedDataset, y: &[f64], steps: usize) -> Self {
        SolverState {
            curves: data
                .points
                .iter()
                .map(|a| DiscreteCurve::straight(a, y, steps))
                .collect(),
            y: y.to_vec(),
            iteration: 0,
        }
    }
}

/// Straight-line initial state with `y` from `y0`, or the first point.
pub fn init_state<F: MetricField + ?Sized>(
    field: &F,
    data: &WeightedDataset,
    steps: usize,
    y0: Option<&[f64]>,
) -> Result<SolverState> {
    data.validate()?;
    if steps < 2 {
        return Err(Error::Config(format!("T must be at least 2, got {steps}")));
    }
    if data.dim() != field.dim() {
        return Err(Error::Shape {
            expected: format!("{}-dimensional points", field.dim()),
            got: format!("{}", data.dim()),
        });
    }
    for (i, a) in data.points.iter().enumerate() {
        if !field.in_domain(a) {
            return Err(Error::domain(format!("data point {i} = {a:?}")));
        }
    }
    let y = y0.map(<[f64]>::to_vec).unwrap_or_else(|| data.points[0].clone());
    if y.len() != data.dim() || !field.in_domain(&y) {
        return Err(Error::domain(format!("initial mean {y:?}")));
    }
    Ok(SolverState::straight(data, &y, steps))
}

fn initial_mean(data: &WeightedDataset, init: &InitMean) -> Vec<f64> {
    match init {
        InitMean::FirstPoint => data.points[0].clone(),
        InitMean::ChartAverage => data.weighted_average(),
        InitMean::Point(p) => p.clone(),
    }
}

/// Frozen quantities of one iteration.
#[derive(Clone, Debug)]
pub struct UpdateAux {
    /// Per-curve tensors and gradients; `None` in low-memory mode.
    pub curves: Option<Vec<CurveAux>>,
    /// `(Σ_t G_{t,i}^{-1})^{-1}`.
    pub s_inv: Vec<Matrix>,
    /// `Σ_t G_{t,i}^{-1}(ζ_{t,i} + Σ_{j>t} ν_{j,i})`.
    pub b: Vec<Vec<f64>>,
    pub w: Matrix,
    pub v: Vec<f64>,
    /// `Σ_i w_i E_i` at the current iterate.
    pub energy: f64,
    /// `(1/N) ‖∇E‖` over interior points and `y`.
    pub stop_metric: f64,
}

struct CurveTerms {
    aux: Option<CurveAux>,
    s_inv: Matrix,
    b: Vec<f64>,
    weighted_energy: f64,
    interior_sq: f64,
    end_grad: Vec<f64>,
}

fn curve_terms<F: MetricField + ?Sized>(
    field: &F,
    curve: &DiscreteCurve,
    weight: f64,
    i: usize,
    keep: bool,
) -> Result<CurveTerms> {
    let aux = curve_aux(field, curve, weight, Some(i))?;
    let s_inv = Cholesky::new(&aux.s).map_err(|e| e.at(0, Some(i)))?.inverse();
    let (interior, end_grad) = aux.energy_gradient(&curve.controls());
    Ok(CurveTerms {
        s_inv,
        b: aux.b.clone(),
        weighted_energy: weight * aux.energy,
        interior_sq: interior.iter().flatten().map(|g| g * g).sum(),
        end_grad,
        aux: keep.then_some(aux),
    })
}

/// Tensors, gradients and the mean-update system at the current iterate.
pub fn compute_aux<F: MetricField + ?Sized>(
    field: &F,
    state: &SolverState,
    data: &WeightedDataset,
    low_memory: bool,
) -> Result<UpdateAux> {
    let n = data.len();
    let d = data.dim();
    let terms: Vec<CurveTerms> = par_map(n, |i| curve_terms(field, &state.curves[i], data.weights[i], i, !low_memory))
        .into_iter()
        .collect::<Result<_>>()?;
    let w_terms: Vec<Matrix> = terms
        .iter()
        .zip(&data.weights)
        .map(|(c, w)| c.s_inv.scaled(*w))
        .collect();
    let v_terms: Vec<Vec<f64>> = terms
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let sa = c.s_inv.matvec(&data.points[i]);
            let sb = c.s_inv.matvec(&c.b);
            (0..d).map(|k| data.weights[i] * sa[k] - 0.5 * sb[k]).collect()
        })
        .collect();
    let w = sum_deterministic(&w_terms, (d, d))?;
    let v = sum_deterministic(&v_terms, (d, 1))?;
    let energy: f64 = terms.iter().map(|c| c.weighted_energy).sum();
    let interior_sq: f64 = terms.iter().map(|c| c.interior_sq).sum();
    let end_terms: Vec<Vec<f64>> = terms.iter().map(|c| c.end_grad.clone()).collect();
    let end = sum_deterministic(&end_terms, (d, 1))?;
    let grad_norm = (interior_sq + end.iter().map(|g| g * g).sum::<f64>()).sqrt();
    let mut curves = Vec::with_capacity(n);
    let mut s_inv = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for c in terms {
        if let Some(a) = c.aux {
            curves.push(a);
        }
        s_inv.push(c.s_inv);
        b.push(c.b);
    }
    Ok(UpdateAux {
        curves: (!low_memory).then_some(curves),
        s_inv,
        b,
        w,
        v,
        energy,
        stop_metric: grad_norm / n as f64,
    })
}

/// `y = W^{-1} V`.
pub fn mean_update(aux: &UpdateAux) -> Result<Vec<f64>> {
    spd_solve(&aux.w, &aux.v)
}

/// Candidate controls for every curve given the new mean.
#[derive(Clone, Debug)]
pub struct Proposal {
    /// `μ_{T−1,i}`.
    pub mu: Vec<Vec<f64>>,
    /// `u_{t,i}`, indexed `[i][t]`.
    pub controls: Vec<Vec<Vec<f64>>>,
    pub y: Vec<f64>,
}

impl Proposal {
    /// Curves rebuilt by the state equation with `x_{T,i} = y`.
    pub fn curves(&self, data: &WeightedDataset) -> Vec<DiscreteCurve> {
        self.controls
            .iter()
            .zip(&data.points)
            .map(|(u, a)| DiscreteCurve::from_controls(a, u, Some(&self.y)))
            .collect()
    }
}

/// `μ_{T−1,i} = S_i^{-1}(2w_i(a_i − y) − B_i)` and
/// `u_{t,i} = −(1/2w_i) G_{t,i}^{-1}(μ_{T−1,i} + ζ_{t,i} + Σ_{j>t} ν_{j,i})`.
pub fn costate_and_controls<F: MetricField + ?Sized>(
    field: &F,
    aux: &UpdateAux,
    state: &SolverState,
    data: &WeightedDataset,
    y: &[f64],
) -> Result<Proposal> {
    let d = data.dim();
    let per_curve: Vec<(Vec<f64>, Vec<Vec<f64>>)> = par_map(data.len(), |i| {
        let w = data.weights[i];
        let rhs: Vec<f64> = (0..d)
            .map(|k| 2.0 * w * (data.points[i][k] - y[k]) - aux.b[i][k])
            .collect();
        let mu = aux.s_inv[i].matvec(&rhs);
        let controls = match &aux.curves {
            Some(c) => c[i].controls_for(&mu),
            None => curve_aux(field, &state.curves[i], w, Some(i))?.controls_for(&mu),
        };
        Ok((mu, controls))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let (mu, controls) = per_curve.into_iter().unzip();
    Ok(Proposal {
        mu,
        controls,
        y: y.to_vec(),
    })
}

/// Total weighted energy, or `None` if any point leaves the domain.
fn total_energy<F: MetricField + ?Sized>(field: &F, curves: &[DiscreteCurve], data: &WeightedDataset) -> Option<f64> {
    let parts = par_map(curves.len(), |i| discrete_energy(&curves[i], field).ok().map(|e| data.weights[i] * e));
    parts.into_iter().sum::<Option<f64>>()
}

/// `Σ_i w_i E_i` of a state.
pub fn weighted_energy<F: MetricField + ?Sized>(field: &F, state: &SolverState, data: &WeightedDataset) -> Result<f64> {
    total_energy(field, &state.curves, data).ok_or_else(|| Error::domain("curve point outside the chart"))
}

/// Backtracking on `u(α) = α u_new + (1 − α) u_old`, `y(α) = α y_new + (1 − α) y_old`.
pub fn line_search<F: MetricField + ?Sized>(
    field: &F,
    state: &SolverState,
    proposal: &Proposal,
    data: &WeightedDataset,
    energy: f64,
    ls: &LineSearch,
) -> Result<Accepted<SolverState>> {
    let old: Vec<Vec<Vec<f64>>> = (0..data.len()).map(|i| state.controls(i)).collect();
    ls.run(energy, |alpha| {
        let y: Vec<f64> = proposal
            .y
            .iter()
            .zip(&state.y)
            .map(|(n, o)| alpha * n + (1.0 - alpha) * o)
            .collect();
        if !field.in_domain(&y) {
            return None;
        }
        let curves: Vec<DiscreteCurve> = (0..data.len())
            .map(|i| {
                let u: Vec<Vec<f64>> = proposal.controls[i]
                    .iter()
                    .zip(&old[i])
                    .map(|(n, o)| n.iter().zip(o).map(|(p, q)| alpha * p + (1.0 - alpha) * q).collect())
                    .collect();
                DiscreteCurve::from_controls(&data.points[i], &u, Some(&y))
            })
            .collect();
        let e = total_energy(field, &curves, data)?;
        Some((
            e,
            SolverState {
                curves,
                y,
                iteration: state.iteration + 1,
            },
        ))
    })
}

/// `(1/N) ‖∇E‖` over all interior points and the mean.
pub fn stop_metric<F: MetricField + ?Sized>(field: &F, state: &SolverState, data: &WeightedDataset) -> Result<f64> {
    compute_aux(field, state, data, true).map(|a| a.stop_metric)
}

/// Everything known about one accepted iteration, for observers.
pub struct IterationRecord<'a> {
    pub before: &'a SolverState,
    pub aux: &'a UpdateAux,
    pub proposal: &'a Proposal,
    pub alpha: f64,
    pub after: &'a SolverState,
    pub energy_before: f64,
    pub energy_after: f64,
}

/// Raw outcome of the iteration loop.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub state: SolverState,
    /// Aux at the final iterate (the one the stop test saw).
    pub aux: UpdateAux,
    pub iterations: usize,
    pub grad_trace: Vec<f64>,
    pub energy_trace: Vec<f64>,
    pub termination: Termination,
}

/// Iterate from `state` until the stop metric is at most `opts.tol` or
/// `opts.max_iter` iterations have been accepted.
pub fn run_iterations<F: MetricField + ?Sized>(
    field: &F,
    data: &WeightedDataset,
    mut state: SolverState,
    opts: &FrechetOptions,
    mut observer: Option<&mut dyn FnMut(&IterationRecord)>,
) -> Result<RunOutcome> {
    let mut grad_trace = Vec::new();
    let mut energy_trace = Vec::new();
    let mut iterations = 0;
    loop {
        let aux = compute_aux(field, &state, data, opts.low_memory)?;
        grad_trace.push(aux.stop_metric);
        energy_trace.push(aux.energy);
        let termination = if aux.stop_metric <= opts.tol {
            Some(Termination::Converged)
        } else if iterations >= opts.max_iter {
            Some(Termination::MaxIterations)
        } else {
            None
        };
        if let Some(termination) = termination {
            return Ok(RunOutcome {
                state,
                aux,
                iterations,
                grad_trace,
                energy_trace,
                termination,
            });
        }
        let y = mean_update(&aux)?;
        let proposal = costate_and_controls(field, &aux, &state, data, &y)?;
        match line_search(field, &state, &proposal, data, aux.energy, &opts.line_search) {
            Ok(acc) => {
                if let Some(obs) = observer.as_deref_mut() {
                    obs(&IterationRecord {
                        before: &state,
                        aux: &aux,
                        proposal: &proposal,
                        alpha: acc.alpha,
                        after: &acc.state,
                        energy_before: aux.energy,
                        energy_after: acc.energy,
                    });
                }
                state = acc.state;
                iterations += 1;
            }
            Err(Error::StalledLineSearch { .. }) => {
                return Ok(RunOutcome {
                    state,
                    aux,
                    iterations,
                    grad_trace,
                    energy_trace,
                    termination: Termination::StalledLineSearch,
                });
            }
            Err(e) => return Err(e),
        }
    }
}

/// Solver output.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FrechetResult {
    pub mean: Vec<f64>,
    /// Curves from each `a_i` to the mean, as the solver ran them (for the
    /// forward Finsler mean these are geodesics of the reversed field).
    pub curves: Vec<DiscreteCurve>,
    /// First control `u_{0,i}` of each curve.
    pub u0: Vec<Vec<f64>>,
    /// Last control `u_{T−1,i}` of each curve.
    pub u_end: Vec<Vec<f64>>,
    pub moi: f64,
    pub iterations: usize,
    pub grad_trace: Vec<f64>,
    pub energy_trace: Vec<f64>,
    pub converged: bool,
    pub termination: Termination,
    pub steps: usize,
    pub mode: Mode,
}

/// The JSON view of a result: the solver summary without the curves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultSummary {
    pub mean: Vec<f64>,
    pub moi: f64,
    pub iterations: usize,
    pub converged: bool,
    pub grad_trace: Vec<f64>,
    #[serde(rename = "T")]
    pub steps: usize,
    pub u0: Vec<Vec<f64>>,
    pub u_end: Vec<Vec<f64>>,
    pub termination: Termination,
    pub mode: Mode,
    /// Caller-specific fields (manifold name, batch settings, method, …).
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl FrechetResult {
    pub fn summary(&self) -> ResultSummary {
        ResultSummary {
            mean: self.mean.clone(),
            moi: self.moi,
            iterations: self.iterations,
            converged: self.converged,
            grad_trace: self.grad_trace.clone(),
            steps: self.steps,
            u0: self.u0.clone(),
            u_end: self.u_end.clone(),
            termination: self.termination,
            mode: self.mode,
            extra: serde_json::Map::new(),
        }
    }

    pub(crate) fn from_state(
        state: &SolverState,
        moi: f64,
        iterations: usize,
        grad_trace: Vec<f64>,
        energy_trace: Vec<f64>,
        termination: Termination,
        mode: Mode,
    ) -> Self {
        let controls: Vec<Vec<Vec<f64>>> = state.curves.iter().map(DiscreteCurve::controls).collect();
        FrechetResult {
            mean: state.y.clone(),
            curves: state.curves.clone(),
            u0: controls.iter().map(|c| c[0].clone()).collect(),
            u_end: controls.iter().map(|c| c[c.len() - 1].clone()).collect(),
            moi,
            iterations,
            grad_trace,
            energy_trace,
            converged: termination == Termination::Converged,
            termination,
            steps: state.steps(),
            mode,
        }
    }
}

/// Run `body` with the field the solver should see for `mode`.
pub(crate) fn with_mode_field<F, R>(field: &F, mode: Mode, body: impl FnOnce(&dyn ModeField) -> R) -> R
where
    F: MetricField + ?Sized,
{
    match mode {
        Mode::Finsler => body(&ModeFieldImpl(Reversed(FieldRef(field)))),
        Mode::Riemannian | Mode::FinslerBackward => body(&ModeFieldImpl(FieldRef(field))),
    }
}

/// Object-safe facade over the generic solver entry points, so one code
/// path serves both the plain and the reversed field.
pub(crate) trait ModeField {
    fn run(
        &self,
        data: &WeightedDataset,
        state: SolverState,
        opts: &FrechetOptions,
        observer: Option<&mut dyn FnMut(&IterationRecord)>,
    ) -> Result<RunOutcome>;
    fn init(&self, data: &WeightedDataset, steps: usize, y0: &[f64]) -> Result<SolverState>;
}

struct ModeFieldImpl<F>(F);

impl<F: MetricField> ModeField for ModeFieldImpl<F> {
    fn run(
        &self,
        data: &WeightedDataset,
        state: SolverState,
        opts: &FrechetOptions,
        observer: Option<&mut dyn FnMut(&IterationRecord)>,
    ) -> Result<RunOutcome> {
        run_iterations(&self.0, data, state, opts, observer)
    }
    fn init(&self, data: &WeightedDataset, steps: usize, y0: &[f64]) -> Result<SolverState> {
        init_state(&self.0, data, steps, Some(y0))
    }
}

/// GEORCE-FM. The moment of inertia is evaluated afterwards with standalone
/// geodesic solves at the returned mean.
pub fn solve<F: MetricField + ?Sized>(
    field: &F,
    data: &WeightedDataset,
    opts: &FrechetOptions,
    mode: Mode,
) -> Result<FrechetResult> {
    solve_observed(field, data, opts, mode, None)
}

pub fn solve_observed<F: MetricField + ?Sized>(
    field: &F,
    data: &WeightedDataset,
    opts: &FrechetOptions,
    mode: Mode,
    observer: Option<&mut dyn FnMut(&IterationRecord)>,
) -> Result<FrechetResult> {
    opts.validate()?;
    data.validate()?;
    let y0 = initial_mean(data, &opts.init);
    let out = with_mode_field(field, mode, |f| {
        let state = f.init(data, opts.steps, &y0)?;
        f.run(data, state, opts, observer)
    })?;
    let moi = crate::stats::moment_of_inertia(field, &out.state.y, data, mode, opts.steps, &opts.moi)?;
    Ok(FrechetResult::from_state(
        &out.state,
        moi,
        out.iterations,
        out.grad_trace,
        out.energy_trace,
        out.termination,
        mode,
    ))
}
