//! The solver family: ISTA, FISTA with backtracking, generic scaled
//! gradient projection, the direction relaxation scheme, and the learned
//! SGP variant. All solvers emit a per-iteration trace.
//!
//! Line-search note: the sufficient-decrease test used by the SGP solvers
//! is evaluated on the full objective F = f + λ‖·‖₁ with the composite
//! slope Δ = ⟨∇f, z⟩ + λ(‖x+z‖₁ − ‖x‖₁), capped at zero. For the
//! conservative prox-gradient direction Δ ≤ −‖z‖²/t < 0, so the loop
//! always terminates and F is monotone; wild learned directions that
//! cannot decrease F shrink γ until the scheme falls back permanently to
//! the conservative direction. `armijo_satisfied` exposes the plain
//! smooth-part test as a standalone predicate.

use std::time::Instant;

use ndarray::Array1;

use crate::error::Error;
use crate::objective::{
    prox_scaled, soft_threshold, soft_threshold_scalar, DiagScaling, LassoProblem,
};
use crate::wavelet::CoeffVector;
use crate::Result;

/// Line-search and relaxation constants. `t_min`/`t_max` bracket admissible
/// stepsizes and default to `1e-4/L` and `10/L`.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Default iteration budget for callers that do not pass one.
    pub max_iters: usize,
    /// Armijo slope parameter β ∈ (0,1).
    pub beta: f64,
    /// Backtracking shrink factor η ∈ (0,1) (FISTA and generic SGP).
    pub eta: f64,
    /// Relaxation-weight shrink factor η₁ ∈ (0,1).
    pub eta1: f64,
    /// Stepsize shrink factor η₂ ∈ (0,1).
    pub eta2: f64,
    /// Direction mixing threshold α ∈ (0,1].
    pub alpha: f64,
    pub t_min: f64,
    pub t_max: f64,
    /// Eigenvalue cap δ ≥ 1 for diagonal scalings.
    pub delta: f64,
    /// Optional early stop on accepted-step norm (0 disables).
    pub tolerance: f64,
}

impl SolverConfig {
    /// Conventional line-search settings for a problem with the given
    /// Lipschitz constant.
    pub fn for_lipschitz(lipschitz: f64) -> Self {
        Self {
            max_iters: 500,
            beta: 1e-4,
            eta: 0.5,
            eta1: 0.5,
            eta2: 0.5,
            alpha: 0.9,
            t_min: 1e-4 / lipschitz,
            t_max: 10.0 / lipschitz,
            delta: 10.0,
            tolerance: 0.0,
        }
    }

    /// Range checks plus the recommended `t_min <= 1/L <= t_max` bracket;
    /// returns warnings rather than failing.
    pub fn validate(&self, lipschitz: f64) -> Vec<String> {
        let mut warnings = Vec::new();
        let t_l = 1.0 / lipschitz;
        if self.t_min > t_l || self.t_max < t_l {
            warnings.push(format!(
                "stepsize bracket [{}, {}] does not contain 1/L = {}",
                self.t_min, self.t_max, t_l
            ));
        }
        warnings
    }
}

/// Relaxation state of the learned SGP iteration.
#[derive(Debug, Clone, Copy)]
pub struct RelaxState {
    /// Mixing weight γ₁ for the learned direction; non-increasing.
    pub gamma1: f64,
    /// Current Armijo stepsize γ₂ (reset to 1 each iteration).
    pub gamma2: f64,
    /// Whether the predictor is still consulted; flips true→false once.
    pub use_cnn: bool,
}

impl Default for RelaxState {
    fn default() -> Self {
        Self {
            gamma1: 1.0,
            gamma2: 1.0,
            use_cnn: true,
        }
    }
}

/// Where a search direction came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    LearnedMixed,
    ConservativeOnly,
}

/// A candidate step z with its provenance and the prediction that built it.
#[derive(Debug, Clone)]
pub struct SearchDirection {
    pub z: CoeffVector,
    pub provenance: Provenance,
    /// Scalar summary of the predictor output (stepsize, or mean diagonal
    /// value), for tracing.
    pub step_summary: f64,
}

/// Predictor output: a scalar stepsize or a grouped diagonal scaling.
#[derive(Debug, Clone)]
pub enum Prediction {
    Scalar(f64),
    Grouped(DiagScaling),
}

impl Prediction {
    pub fn summary(&self) -> f64 {
        match self {
            Prediction::Scalar(t) => *t,
            Prediction::Grouped(d) => d.mean(),
        }
    }
}

/// A stepsize oracle Ψ(x, ∇f): trained network or test stub.
pub trait StepPredictor {
    fn predict(
        &self,
        problem: &LassoProblem,
        x: &CoeffVector,
        grad: &CoeffVector,
    ) -> Result<Prediction>;
}

/// One row of a solver trace.
#[derive(Debug, Clone)]
pub struct TraceRecord {
    pub iter: usize,
    pub objective: f64,
    pub fidelity: f64,
    pub nmse_db: Option<f64>,
    /// Stepsize used this iteration (or scaling mean for grouped steps).
    pub step: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub use_cnn: bool,
    pub backtracks: u32,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Ran the full iteration budget.
    Finished,
    /// Reached a stationary point (z = 0) or the step-norm tolerance.
    Converged,
    /// Line search underflowed on the conservative direction.
    Stalled,
}

/// Per-iteration record of a solver run. The record count is the number of
/// executed iterations plus one (the initial point).
#[derive(Debug, Clone)]
pub struct SolverTrace {
    pub records: Vec<TraceRecord>,
    pub warnings: Vec<String>,
    pub status: SolveStatus,
}

impl SolverTrace {
    fn new(capacity: usize) -> Self {
        Self {
            records: Vec::with_capacity(capacity + 1),
            warnings: Vec::new(),
            status: SolveStatus::Finished,
        }
    }

    pub fn final_objective(&self) -> f64 {
        self.records.last().map(|r| r.objective).unwrap_or(f64::NAN)
    }

    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }
}

fn nmse_of(x: &CoeffVector, reference: Option<&CoeffVector>) -> Option<f64> {
    reference.and_then(|r| crate::objective::nmse_db(x, r).ok())
}

struct TraceBuilder<'a> {
    trace: SolverTrace,
    reference: Option<&'a CoeffVector>,
    start: Instant,
}

impl<'a> TraceBuilder<'a> {
    fn new(iters: usize, reference: Option<&'a CoeffVector>) -> Self {
        Self {
            trace: SolverTrace::new(iters),
            reference,
            start: Instant::now(),
        }
    }

    fn push(
        &mut self,
        iter: usize,
        p: &LassoProblem,
        x: &CoeffVector,
        fidelity: f64,
        step: f64,
        state: RelaxState,
        backtracks: u32,
    ) {
        self.trace.records.push(TraceRecord {
            iter,
            objective: fidelity + p.lambda * x.norm_l1(),
            fidelity,
            nmse_db: nmse_of(x, self.reference),
            step,
            gamma1: state.gamma1,
            gamma2: state.gamma2,
            use_cnn: state.use_cnn,
            backtracks,
            wall_time_s: self.start.elapsed().as_secs_f64(),
        });
    }
}

fn axpy(x: &CoeffVector, alpha: f64, z: &CoeffVector) -> CoeffVector {
    CoeffVector::from_data(x.layout().clone(), x.data() + &(z.data() * alpha))
        .expect("same layout")
}

fn sub(a: &CoeffVector, b: &CoeffVector) -> CoeffVector {
    CoeffVector::from_data(a.layout().clone(), a.data() - b.data()).expect("same layout")
}

/// One prox-gradient step with scalar stepsize t: T_{λt}(x − t∇f).
fn prox_grad_step(p: &LassoProblem, x: &CoeffVector, grad: &CoeffVector, t: f64) -> CoeffVector {
    let shifted = axpy(x, -t, grad);
    soft_threshold_scalar(&shifted, p.lambda * t).expect("nonnegative threshold")
}

/// ISTA: fixed stepsize t = 1/L, monotone in the full objective.
pub fn ista(
    p: &LassoProblem,
    x0: &CoeffVector,
    cfg: &SolverConfig,
    iters: usize,
    reference: Option<&CoeffVector>,
) -> Result<(CoeffVector, SolverTrace)> {
    let t = 1.0 / p.lipschitz;
    let mut tb = TraceBuilder::new(iters, reference);
    tb.trace.warnings = cfg.validate(p.lipschitz);
    let state = RelaxState {
        use_cnn: false,
        ..Default::default()
    };
    let mut x = x0.clone();
    tb.push(0, p, &x, p.fidelity(&x)?, 0.0, state, 0);
    for k in 0..iters {
        let grad = p.gradient(&x)?;
        let next = prox_grad_step(p, &x, &grad, t);
        let moved = sub(&next, &x).norm();
        x = next;
        tb.push(k + 1, p, &x, p.fidelity(&x)?, t, state, 0);
        if cfg.tolerance > 0.0 && moved <= cfg.tolerance {
            tb.trace.status = SolveStatus::Converged;
            break;
        }
    }
    Ok((x, tb.trace))
}

/// FISTA with backtracking: momentum acceleration plus a stepsize that
/// shrinks whenever the quadratic majorization of f fails. Non-monotone in
/// F but converges at the accelerated rate.
pub fn fista_backtracking(
    p: &LassoProblem,
    x0: &CoeffVector,
    cfg: &SolverConfig,
    iters: usize,
    reference: Option<&CoeffVector>,
) -> Result<(CoeffVector, SolverTrace)> {
    let mut t = 1.0 / p.lipschitz;
    let mut tb = TraceBuilder::new(iters, reference);
    tb.trace.warnings = cfg.validate(p.lipschitz);
    let state = RelaxState {
        use_cnn: false,
        ..Default::default()
    };
    let mut x = x0.clone();
    let mut x_prev = x0.clone();
    let mut theta = 1.0f64;
    tb.push(0, p, &x, p.fidelity(&x)?, 0.0, state, 0);
    for k in 0..iters {
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        let momentum = (theta - 1.0) / theta_next;
        let y = {
            let diff = sub(&x, &x_prev);
            axpy(&x, momentum, &diff)
        };
        let fy = p.fidelity(&y)?;
        let grad = p.gradient(&y)?;
        let mut backtracks = 0u32;
        let next = loop {
            let candidate = prox_grad_step(p, &y, &grad, t);
            let d = sub(&candidate, &y);
            let quad = fy + grad.dot(&d) + d.dot(&d) / (2.0 * t);
            let fc = p.fidelity(&candidate)?;
            if fc <= quad + eps_slack(fy) {
                break candidate;
            }
            t *= cfg.eta;
            backtracks += 1;
            if backtracks >= MAX_BACKTRACKS {
                tb.trace.warnings.push(format!(
                    "fista backtracking hit {MAX_BACKTRACKS} shrinks at iter {k}"
                ));
                break candidate;
            }
        };
        x_prev = x;
        x = next;
        theta = theta_next;
        tb.push(k + 1, p, &x, p.fidelity(&x)?, t, state, backtracks);
    }
    Ok((x, tb.trace))
}

/// High-iteration FISTA run used to produce ground-truth solutions.
pub fn run_to_convergence(p: &LassoProblem, cfg: &SolverConfig) -> Result<CoeffVector> {
    let x0 = CoeffVector::zeros(p.layout().clone());
    let (x, _) = fista_backtracking(p, &x0, cfg, cfg.max_iters, None)?;
    Ok(x)
}

/// The sufficient-decrease inequality on the smooth part, exactly as the
/// scaled-gradient-projection literature states it:
/// f(x + γz) ≤ f(x) + βγ⟨∇f(x), z⟩.
pub fn armijo_satisfied(
    p: &LassoProblem,
    x: &CoeffVector,
    z: &CoeffVector,
    gamma: f64,
    beta: f64,
) -> Result<bool> {
    let fx = p.fidelity(x)?;
    let grad = p.gradient(x)?;
    let lhs = p.fidelity(&axpy(x, gamma, z))?;
    Ok(lhs <= fx + beta * gamma * grad.dot(z) + eps_slack(fx))
}

const MAX_BACKTRACKS: u32 = 60;
const GAMMA_UNDERFLOW: f64 = 1e-18;

#[inline]
fn eps_slack(scale: f64) -> f64 {
    16.0 * f64::EPSILON * scale.abs().max(1.0)
}

/// Composite slope Δ = ⟨∇f, z⟩ + λ(‖x+z‖₁ − ‖x‖₁), capped at zero so an
/// accepted step never increases F.
fn composite_slope(p: &LassoProblem, x: &CoeffVector, grad: &CoeffVector, z: &CoeffVector) -> f64 {
    let l1_after = axpy(x, 1.0, z).norm_l1();
    (grad.dot(z) + p.lambda * (l1_after - x.norm_l1())).min(0.0)
}

struct LineSearchOutcome {
    gamma: f64,
    backtracks: u32,
    underflow: bool,
    f_accepted: f64,
}

/// Backtracks γ by `shrink` until F(x + γz) ≤ F(x) + βγΔ.
fn backtrack_composite(
    p: &LassoProblem,
    x: &CoeffVector,
    grad: &CoeffVector,
    z: &CoeffVector,
    objective_x: f64,
    beta: f64,
    shrink: f64,
) -> Result<LineSearchOutcome> {
    let slope = composite_slope(p, x, grad, z);
    let mut gamma = 1.0;
    let mut backtracks = 0u32;
    loop {
        let candidate = axpy(x, gamma, z);
        let f_candidate = p.fidelity(&candidate)?;
        let obj = f_candidate + p.lambda * candidate.norm_l1();
        if obj <= objective_x + beta * gamma * slope + eps_slack(objective_x) {
            return Ok(LineSearchOutcome {
                gamma,
                backtracks,
                underflow: false,
                f_accepted: f_candidate,
            });
        }
        gamma *= shrink;
        backtracks += 1;
        if gamma < GAMMA_UNDERFLOW || backtracks >= MAX_BACKTRACKS {
            return Ok(LineSearchOutcome {
                gamma,
                backtracks,
                underflow: true,
                f_accepted: f64::NAN,
            });
        }
    }
}

/// Generic scaled gradient projection (Algorithm-1 shape): the caller
/// chooses (t_k, D_k) each iteration; out-of-range choices are clamped and
/// recorded as trace warnings.
pub fn sgp_generic<F>(
    p: &LassoProblem,
    x0: &CoeffVector,
    cfg: &SolverConfig,
    mut scaling_chooser: F,
    iters: usize,
    reference: Option<&CoeffVector>,
) -> Result<(CoeffVector, SolverTrace)>
where
    F: FnMut(usize, &CoeffVector, &CoeffVector) -> (f64, DiagScaling),
{
    let mut tb = TraceBuilder::new(iters, reference);
    tb.trace.warnings = cfg.validate(p.lipschitz);
    let state = RelaxState {
        use_cnn: false,
        ..Default::default()
    };
    let mut x = x0.clone();
    tb.push(0, p, &x, p.fidelity(&x)?, 0.0, state, 0);
    for k in 0..iters {
        let grad = p.gradient(&x)?;
        let (t_raw, d_raw) = scaling_chooser(k, &x, &grad);
        let t = t_raw.clamp(cfg.t_min, cfg.t_max);
        if t != t_raw {
            tb.trace
                .warnings
                .push(format!("iter {k}: stepsize {t_raw} clamped to {t}"));
        }
        let (d, was_clamped) = DiagScaling::clamped(d_raw.values().to_vec(), cfg.delta);
        if was_clamped {
            tb.trace
                .warnings
                .push(format!("iter {k}: scaling clamped into admissible set"));
        }
        // z = prox_{tD}(x − t D ∇f) − x
        let scale = d.expand(x.layout())?;
        let shifted =
            CoeffVector::from_data(x.layout().clone(), x.data() - &(&scale * t * grad.data()))?;
        let tau = scale.mapv(|s| p.lambda * t * s);
        let z = sub(&soft_threshold(&shifted, &tau)?, &x);
        if z.norm() == 0.0 {
            tb.trace.status = SolveStatus::Converged;
            break;
        }
        let fx = p.fidelity(&x)?;
        let objective_x = fx + p.lambda * x.norm_l1();
        let ls = backtrack_composite(p, &x, &grad, &z, objective_x, cfg.beta, cfg.eta)?;
        if ls.underflow {
            tb.trace
                .warnings
                .push(format!("iter {k}: line search underflow"));
            tb.trace.status = SolveStatus::Stalled;
            break;
        }
        x = axpy(&x, ls.gamma, &z);
        let st = RelaxState {
            gamma1: 1.0,
            gamma2: ls.gamma,
            use_cnn: false,
        };
        tb.push(k + 1, p, &x, ls.f_accepted, t * d.mean(), st, ls.backtracks);
        if cfg.tolerance > 0.0 && ls.gamma * z.norm() <= cfg.tolerance {
            tb.trace.status = SolveStatus::Converged;
            break;
        }
    }
    Ok((x, tb.trace))
}

/// Direction relaxation scheme: mixes the predictor-driven step with the
/// conservative 1/L prox-gradient direction, falling back permanently once
/// the learned component becomes negligible or the predictor fails.
pub fn drs_direction(
    p: &LassoProblem,
    x: &CoeffVector,
    grad: &CoeffVector,
    predictor: &dyn StepPredictor,
    state: RelaxState,
    cfg: &SolverConfig,
) -> Result<(SearchDirection, RelaxState, Option<String>)> {
    let t_l = 1.0 / p.lipschitz;
    let conservative = || -> CoeffVector { sub(&prox_grad_step(p, x, grad, t_l), x) };
    if !state.use_cnn {
        let z = conservative();
        return Ok((
            SearchDirection {
                z,
                provenance: Provenance::ConservativeOnly,
                step_summary: t_l,
            },
            state,
            None,
        ));
    }
    let (x_tilde, summary) = match predictor.predict(p, x, grad) {
        Ok(Prediction::Scalar(t)) => (prox_grad_step(p, x, grad, t), t),
        Ok(Prediction::Grouped(d)) => {
            let scale = d.expand(x.layout())?;
            let shifted =
                CoeffVector::from_data(x.layout().clone(), x.data() - &(&scale * grad.data()))?;
            (prox_scaled(&shifted, &d, p.lambda)?, d.mean())
        }
        Err(e) => {
            let z = conservative();
            let next = RelaxState {
                use_cnn: false,
                ..state
            };
            return Ok((
                SearchDirection {
                    z,
                    provenance: Provenance::ConservativeOnly,
                    step_summary: t_l,
                },
                next,
                Some(format!("predictor failed: {e}")),
            ));
        }
    };
    let grad_tilde = p.gradient(&x_tilde)?;
    let z1 = sub(&prox_grad_step(p, &x_tilde, &grad_tilde, t_l), x);
    let z2 = conservative();
    let g1 = state.gamma1;
    if g1 * z1.norm() > cfg.alpha * (1.0 - g1) * z2.norm() {
        let z = CoeffVector::from_data(
            x.layout().clone(),
            &(z1.data() * g1) + &(z2.data() * (1.0 - g1)),
        )?;
        Ok((
            SearchDirection {
                z,
                provenance: Provenance::LearnedMixed,
                step_summary: summary,
            },
            state,
            None,
        ))
    } else {
        let next = RelaxState {
            use_cnn: false,
            ..state
        };
        Ok((
            SearchDirection {
                z: z2,
                provenance: Provenance::ConservativeOnly,
                step_summary: t_l,
            },
            next,
            None,
        ))
    }
}

/// Learned SGP (the proposed solver): DRS direction, then a line search
/// that shrinks both the mixing weight γ₁ and the stepsize γ₂ together.
/// Once the relaxation falls back, iterations equal the plain
/// prox-gradient method.
pub fn sgp_learned(
    p: &LassoProblem,
    x0: &CoeffVector,
    predictor: &dyn StepPredictor,
    cfg: &SolverConfig,
    iters: usize,
    reference: Option<&CoeffVector>,
) -> Result<(CoeffVector, SolverTrace)> {
    let mut tb = TraceBuilder::new(iters, reference);
    tb.trace.warnings = cfg.validate(p.lipschitz);
    let mut state = RelaxState::default();
    let mut x = x0.clone();
    tb.push(0, p, &x, p.fidelity(&x)?, 0.0, state, 0);
    for k in 0..iters {
        let grad = p.gradient(&x)?;
        let (direction, next_state, warning) = drs_direction(p, &x, &grad, predictor, state, cfg)?;
        state = next_state;
        if let Some(w) = warning {
            tb.trace.warnings.push(format!("iter {k}: {w}"));
        }
        if direction.z.norm() == 0.0 {
            tb.trace.status = SolveStatus::Converged;
            break;
        }
        let fx = p.fidelity(&x)?;
        let objective_x = fx + p.lambda * x.norm_l1();
        let slope = composite_slope(p, &x, &grad, &direction.z);
        let mut gamma1_next = state.gamma1;
        let mut gamma2 = 1.0;
        let mut backtracks = 0u32;
        let mut accepted_f = fx;
        let mut accepted = false;
        loop {
            let candidate = axpy(&x, gamma2, &direction.z);
            let f_candidate = p.fidelity(&candidate)?;
            let obj = f_candidate + p.lambda * candidate.norm_l1();
            if obj <= objective_x + cfg.beta * gamma2 * slope + eps_slack(objective_x) {
                accepted = true;
                accepted_f = f_candidate;
                break;
            }
            gamma1_next *= cfg.eta1;
            gamma2 *= cfg.eta2;
            backtracks += 1;
            if gamma2 < GAMMA_UNDERFLOW || backtracks >= MAX_BACKTRACKS {
                break;
            }
        }
        state.gamma1 = gamma1_next;
        if !accepted {
            // γ₂ underflow: the direction cannot decrease F at any
            // stepsize. Drop the predictor permanently and continue; if
            // already conservative the solve is stalled at numerical
            // precision.
            if direction.provenance == Provenance::LearnedMixed {
                state.use_cnn = false;
                tb.trace.warnings.push(format!(
                    "iter {k}: line search underflow on learned direction, falling back"
                ));
                let st = RelaxState {
                    gamma2: 0.0,
                    ..state
                };
                tb.push(k + 1, p, &x, fx, direction.step_summary, st, backtracks);
                continue;
            }
            tb.trace.status = SolveStatus::Stalled;
            tb.trace
                .warnings
                .push(format!("iter {k}: stalled on conservative direction"));
            break;
        }
        x = axpy(&x, gamma2, &direction.z);
        let st = RelaxState { gamma2, ..state };
        tb.push(
            k + 1,
            p,
            &x,
            accepted_f,
            direction.step_summary,
            st,
            backtracks,
        );
        if cfg.tolerance > 0.0 && gamma2 * direction.z.norm() <= cfg.tolerance {
            tb.trace.status = SolveStatus::Converged;
            break;
        }
    }
    Ok((x, tb.trace))
}

/// Stepsize chooser that always returns the conservative 1/L with identity
/// scaling; `sgp_generic` with this chooser reproduces ISTA.
pub fn conservative_chooser(
    p: &LassoProblem,
) -> impl FnMut(usize, &CoeffVector, &CoeffVector) -> (f64, DiagScaling) {
    let t = 1.0 / p.lipschitz;
    let groups = p.layout().num_groups();
    move |_, _, _| (t, DiagScaling::identity(groups, 10.0))
}

/// Fixed-prediction stub predictor for tests and baselines.
#[derive(Debug, Clone)]
pub struct ConstantPredictor(pub Prediction);

impl StepPredictor for ConstantPredictor {
    fn predict(
        &self,
        _problem: &LassoProblem,
        _x: &CoeffVector,
        _grad: &CoeffVector,
    ) -> Result<Prediction> {
        Ok(self.0.clone())
    }
}

/// Predictor that always fails; exercises the DRS fallback path.
#[derive(Debug, Clone)]
pub struct FailingPredictor;

impl StepPredictor for FailingPredictor {
    fn predict(
        &self,
        _problem: &LassoProblem,
        _x: &CoeffVector,
        _grad: &CoeffVector,
    ) -> Result<Prediction> {
        Err(Error::Predictor("stub failure".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::make_inpainting;
    use crate::objective::soft_threshold_scalar;
    use crate::wavelet::{dwt_forward, WaveletFamily, WaveletSpec};
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec() -> WaveletSpec {
        WaveletSpec::new(WaveletFamily::Symlet4, 2).unwrap()
    }

    fn problem(seed: u64, rate: f64) -> (LassoProblem, CoeffVector) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = Array2::from_shape_fn((16, 16), |_| rng.gen_range(0.0..1.0));
        let model = make_inpainting(spec(), 16, 16, rate, seed * 31 + 7).unwrap();
        let y = model.synthesize_measurement(&img, 0.0, 0).unwrap();
        let gt = dwt_forward(&img, spec()).unwrap();
        (LassoProblem::new(model, y, 0.1).unwrap(), gt)
    }

    #[test]
    fn armijo_hand_cases() {
        // f(x) = ½‖x‖² via a rate-1 inpainting model with y = 0, matching
        // the scalar example f(x)=½x², x=1, z=-1.
        let (p0, _) = problem(1, 1.0);
        let zero_y = crate::Measurement {
            data: crate::MeasurementData::Real(Array1::zeros(p0.y.len())),
            kind: p0.y.kind,
        };
        let p = LassoProblem::new(p0.model.clone(), zero_y, 0.1).unwrap();
        let mut x = CoeffVector::zeros(p.layout().clone());
        x.data_mut()[0] = 1.0;
        let mut z = CoeffVector::zeros(p.layout().clone());
        z.data_mut()[0] = -1.0;
        assert!(armijo_satisfied(&p, &x, &z, 1.0, 0.5).unwrap());
        assert!(!armijo_satisfied(&p, &x, &z, 1.0, 0.9).unwrap());
        let z0 = CoeffVector::zeros(p.layout().clone());
        assert!(armijo_satisfied(&p, &x, &z0, 1.0, 0.5).unwrap());
    }

    #[test]
    fn ista_objective_monotone() {
        for seed in 0..5 {
            let (p, _) = problem(seed + 10, 0.5);
            let x0 = CoeffVector::zeros(p.layout().clone());
            let cfg = SolverConfig::for_lipschitz(p.lipschitz);
            let (_, trace) = ista(&p, &x0, &cfg, 40, None).unwrap();
            for w in trace.records.windows(2) {
                assert!(
                    w[1].objective <= w[0].objective + 1e-12,
                    "objective increased: {} -> {}",
                    w[0].objective,
                    w[1].objective
                );
            }
        }
    }

    #[test]
    fn ista_fixed_point_does_not_move() {
        let (p, _) = problem(3, 0.5);
        let cfg = SolverConfig::for_lipschitz(p.lipschitz);
        let mut conv_cfg = cfg.clone();
        conv_cfg.max_iters = 1200;
        let xstar = run_to_convergence(&p, &conv_cfg).unwrap();
        let (x, trace) = ista(&p, &xstar, &cfg, 5, None).unwrap();
        assert!(sub(&x, &xstar).norm() < 1e-8);
        assert_eq!(trace.records.len(), 6);
    }

    #[test]
    fn ista_unitary_closed_form() {
        // rate-1 inpainting: A orthonormal, x* = soft_threshold(A'y, λ)
        let (p, _) = problem(4, 1.0);
        let aty = p.model.adjoint(&p.y).unwrap();
        let closed = soft_threshold_scalar(&aty, p.lambda).unwrap();
        let x0 = CoeffVector::zeros(p.layout().clone());
        let cfg = SolverConfig::for_lipschitz(p.lipschitz);
        let (x, _) = ista(&p, &x0, &cfg, 3, None).unwrap();
        let rel = sub(&x, &closed).norm() / closed.norm();
        assert!(rel < 1e-6, "rel err {rel}");
        let (x2, _) = ista(&p, &x0, &cfg, 2, None).unwrap();
        assert!(sub(&x2, &closed).norm() / closed.norm() < 1e-3);
    }

    #[test]
    fn fista_beats_ista_at_equal_iterations() {
        for seed in 0..10 {
            let (p, _) = problem(seed + 100, 0.45);
            let x0 = CoeffVector::zeros(p.layout().clone());
            let cfg = SolverConfig::for_lipschitz(p.lipschitz);
            let (_, ti) = ista(&p, &x0, &cfg, 30, None).unwrap();
            let (_, tf) = fista_backtracking(&p, &x0, &cfg, 30, None).unwrap();
            assert!(
                tf.final_objective() <= ti.final_objective() + 1e-9,
                "seed {seed}: fista {} vs ista {}",
                tf.final_objective(),
                ti.final_objective()
            );
            assert_eq!(tf.records.len(), 31);
        }
    }

    #[test]
    fn fista_unitary_closed_form_by_iteration_5() {
        let (p, _) = problem(6, 1.0);
        let aty = p.model.adjoint(&p.y).unwrap();
        let closed = soft_threshold_scalar(&aty, p.lambda).unwrap();
        let x0 = CoeffVector::zeros(p.layout().clone());
        let cfg = SolverConfig::for_lipschitz(p.lipschitz);
        let (x, _) = fista_backtracking(&p, &x0, &cfg, 5, None).unwrap();
        assert!(sub(&x, &closed).norm() / closed.norm() < 1e-8);
    }

    #[test]
    fn run_to_convergence_is_deterministic_and_converged() {
        let (p, _) = problem(7, 0.5);
        let mut cfg = SolverConfig::for_lipschitz(p.lipschitz);
        cfg.max_iters = 1200;
        let a = run_to_convergence(&p, &cfg).unwrap();
        let b = run_to_convergence(&p, &cfg).unwrap();
        assert_eq!(a.data().to_vec(), b.data().to_vec());
        let x0 = CoeffVector::zeros(p.layout().clone());
        let (_, trace) = fista_backtracking(&p, &x0, &cfg, 1200, None).unwrap();
        let tail = &trace.records[1190..];
        let f_last = tail.last().unwrap().objective;
        for r in tail {
            assert!((r.objective - f_last).abs() / f_last.abs().max(1e-300) < 1e-10);
        }
    }

    #[test]
    fn sgp_generic_with_conservative_chooser_matches_ista() {
        let (p, _) = problem(8, 0.5);
        let x0 = CoeffVector::zeros(p.layout().clone());
        let cfg = SolverConfig::for_lipschitz(p.lipschitz);
        let (xi, _) = ista(&p, &x0, &cfg, 25, None).unwrap();
        let chooser = conservative_chooser(&p);
        let (xs, trace) = sgp_generic(&p, &x0, &cfg, chooser, 25, None).unwrap();
        let rel = sub(&xs, &xi).norm() / xi.norm().max(1e-300);
        assert!(rel < 1e-12, "rel deviation {rel}");
        assert!(trace.warnings.is_empty());
    }

    #[test]
    fn sgp_generic_clamps_rogue_chooser() {
        let (p, _) = problem(9, 0.5);
        let x0 = CoeffVector::zeros(p.layout().clone());
        let cfg = SolverConfig::for_lipschitz(p.lipschitz);
        let groups = p.layout().num_groups();
        let (_, trace) = sgp_generic(
            &p,
            &x0,
            &cfg,
            move |_, _, _| (1e9, DiagScaling::identity(groups, 10.0)),
            5,
            None,
        )
        .unwrap();
        assert!(trace.warnings.iter().any(|w| w.contains("clamped")));
        for w in trace.records.windows(2) {
            assert!(w[1].objective <= w[0].objective + 1e-12);
        }
    }

    #[test]
    fn sgp_learned_with_conservative_stub_tracks_prox_descent() {
        let (p, _) = problem(11, 0.5);
        let x0 = CoeffVector::zeros(p.layout().clone());
        let cfg = SolverConfig::for_lipschitz(p.lipschitz);
        let predictor = ConstantPredictor(Prediction::Scalar(1.0 / p.lipschitz));
        // with t = 1/L the learned branch performs two conservative prox
        // steps per iteration; it must match 2x ISTA iterates exactly when
        // every Armijo check passes at γ₂ = 1
        let (xl, tl) = sgp_learned(&p, &x0, &predictor, &cfg, 25, None).unwrap();
        let (xi, _) = ista(&p, &x0, &cfg, 50, None).unwrap();
        let rel = sub(&xl, &xi).norm() / xi.norm().max(1e-300);
        assert!(rel < 1e-9, "rel deviation {rel}");
        assert!(tl.records.iter().all(|r| r.gamma1 <= 1.0));
    }

    #[test]
    fn sgp_learned_gamma1_non_increasing_and_cnn_flips_once() {
        let (p, _) = problem(12, 0.5);
        let x0 = CoeffVector::zeros(p.layout().clone());
        let cfg = SolverConfig::for_lipschitz(p.lipschitz);
        let hostile = ConstantPredictor(Prediction::Scalar(1e6));
        let (_, trace) = sgp_learned(&p, &x0, &hostile, &cfg, 60, None).unwrap();
        let mut prev_gamma1 = f64::INFINITY;
        let mut prev_cnn = true;
        for r in &trace.records {
            assert!(r.gamma1 <= prev_gamma1 + 1e-15);
            prev_gamma1 = r.gamma1;
            assert!(!(r.use_cnn && !prev_cnn), "use_cnn flipped back to true");
            prev_cnn = r.use_cnn;
        }
        for w in trace.records.windows(2) {
            assert!(w[1].objective <= w[0].objective + 1e-12);
        }
    }

    #[test]
    fn sgp_learned_failing_predictor_falls_back() {
        let (p, _) = problem(13, 0.5);
        let x0 = CoeffVector::zeros(p.layout().clone());
        let cfg = SolverConfig::for_lipschitz(p.lipschitz);
        let (x, trace) = sgp_learned(&p, &x0, &FailingPredictor, &cfg, 30, None).unwrap();
        assert!(trace
            .warnings
            .iter()
            .any(|w| w.contains("predictor failed")));
        assert!(trace.records.iter().skip(2).all(|r| !r.use_cnn));
        // after the first-iteration fallback the iterates are exactly ISTA
        let (xi, _) = ista(&p, &x0, &cfg, 30, None).unwrap();
        assert!(sub(&x, &xi).norm() / xi.norm().max(1e-300) < 1e-12);
    }

    #[test]
    fn drs_gamma1_one_returns_pure_learned_direction() {
        let (p, _) = problem(14, 0.5);
        let x = CoeffVector::zeros(p.layout().clone());
        let grad = p.gradient(&x).unwrap();
        let cfg = SolverConfig::for_lipschitz(p.lipschitz);
        let t_pred = 2.0 / p.lipschitz;
        let predictor = ConstantPredictor(Prediction::Scalar(t_pred));
        let state = RelaxState::default();
        let (dir, state_after, _) = drs_direction(&p, &x, &grad, &predictor, state, &cfg).unwrap();
        assert_eq!(dir.provenance, Provenance::LearnedMixed);
        assert!(state_after.use_cnn);
        let t_l = 1.0 / p.lipschitz;
        let x_tilde = prox_grad_step(&p, &x, &grad, t_pred);
        let g_tilde = p.gradient(&x_tilde).unwrap();
        let z1 = sub(&prox_grad_step(&p, &x_tilde, &g_tilde, t_l), &x);
        assert!(sub(&dir.z, &z1).norm() < 1e-15);
    }

    #[test]
    fn drs_conservative_branch_is_ista_direction() {
        let (p, _) = problem(15, 0.5);
        let x = CoeffVector::zeros(p.layout().clone());
        let grad = p.gradient(&x).unwrap();
        let cfg = SolverConfig::for_lipschitz(p.lipschitz);
        let state = RelaxState {
            use_cnn: false,
            ..Default::default()
        };
        let (dir, _, _) = drs_direction(&p, &x, &grad, &FailingPredictor, state, &cfg).unwrap();
        let t_l = 1.0 / p.lipschitz;
        let expected = sub(&prox_grad_step(&p, &x, &grad, t_l), &x);
        assert!(sub(&dir.z, &expected).norm() == 0.0);
        assert_eq!(dir.provenance, Provenance::ConservativeOnly);
    }

    #[test]
    fn trace_lengths_and_config_warning() {
        let (p, gt) = problem(16, 0.5);
        let x0 = CoeffVector::zeros(p.layout().clone());
        let mut cfg = SolverConfig::for_lipschitz(p.lipschitz);
        let (_, t1) = ista(&p, &x0, &cfg, 12, Some(&gt)).unwrap();
        assert_eq!(t1.records.len(), 13);
        assert!(t1.records.iter().all(|r| r.nmse_db.is_some()));
        cfg.t_max = 0.5 / p.lipschitz;
        let (_, t2) = ista(&p, &x0, &cfg, 1, None).unwrap();
        assert!(!t2.warnings.is_empty());
    }
}
