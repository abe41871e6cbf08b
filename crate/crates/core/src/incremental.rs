//! The incremental cross-entropy optimizer.
//!
//! Each iteration draws one point from the mixture `(1 - λ) f_θ + λ f_θ₀`
//! and feeds it to a set of coupled stochastic-approximation recursions:
//!
//! * `γ` tracks the `(1 - ρ)`-quantile of `H` under the current mixture;
//! * `ξ⁽⁰⁾` and `ξ⁽¹⁾` track the weighted elite mean and covariance;
//! * `γᵖ` tracks the same quantile under the previous model's mixture
//!   (one extra evaluation per iteration once a previous model exists);
//! * `T` is a geometric average of `±1` outcomes of `γ > γᵖ`.
//!
//! The model `θ = (μ, Σ)` only moves when `T` exceeds `ε₁`, and then only a
//! `β`-sized step toward `(ξ⁽⁰⁾, ξ⁽¹⁾)`.
//!
//! Elite weights are `S(h) = exp(r (h - shift))` with `shift` the running
//! maximum of observed values. Rescaling `S` by a constant leaves every
//! fixed point of the `ξ` recursions unchanged, and the shift keeps
//! `exp` from overflowing on objectives with large magnitudes.

use crate::error::{Error, Result};
use crate::gaussian::{draw_mixture, Branch, GaussianParams, GaussianSampler};
use crate::linalg::Matrix;
use crate::objectives::ObjectiveFunction;
use crate::rng::RngState;
use crate::scalar::{all_finite, Scalar};
use crate::schedule::{Clock, Schedule};
use crate::trace::TraceRecord;
use serde::{Deserialize, Serialize};

/// Largest mixing weight actually used; schedules that evaluate to 1 or
/// more (e.g. `k^-3` at `k = 1`) are clamped here.
pub const LAMBDA_MAX: f64 = 1.0 - 1e-9;

fn default_k_gamma() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

/// Every tunable of the optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedules {
    pub rho: f64,
    pub eps1: f64,
    pub r: f64,
    pub beta: Schedule,
    pub c: Schedule,
    pub lambda: Schedule,
    #[serde(default = "default_k_gamma")]
    pub k_gamma: f64,
    /// Clamp `γ`, `γᵖ` into `[H_l - 1, H_u + 1]` when the objective declares bounds.
    #[serde(default = "default_true")]
    pub projection: bool,
}

impl Schedules {
    /// Hard validation; returns soft warnings about step-size families.
    pub fn validate(&self) -> Result<Vec<String>> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::config("rho", format!("must lie in (0, 1), got {}", self.rho)));
        }
        // eps1 = 1 is allowed and freezes the model (T never exceeds 1)
        if !(self.eps1 > 0.0 && self.eps1 <= 1.0) {
            return Err(Error::config("eps1", format!("must lie in (0, 1], got {}", self.eps1)));
        }
        if !(self.r > 0.0) || !self.r.is_finite() {
            return Err(Error::config("r", format!("must be positive, got {}", self.r)));
        }
        if !(self.k_gamma >= 1.0) || !self.k_gamma.is_finite() {
            return Err(Error::config("k_gamma", format!("must be >= 1, got {}", self.k_gamma)));
        }
        self.beta.validate_step("beta")?;
        self.c.validate_range("c", 0.0, 1.0, false)?;
        self.lambda.validate_range("lambda", 0.0, 1.0 + f64::EPSILON, true)?;
        Ok(self.beta.robbins_monro_warning("beta").into_iter().collect())
    }
}

/// Shift-normalized elite weight `S(h) = exp(r (h - shift))`.
pub fn s_weight<T: Scalar>(h: T, r: T, shift: T) -> Result<T> {
    let arg = r * (h - shift);
    let s = arg.exp();
    if s.is_finite() && !arg.is_nan() {
        Ok(s)
    } else {
        Err(Error::WeightOverflow(arg.to_f64_lossy()))
    }
}

/// Subgradient increment of the quantile loss:
/// `-(1 - ρ)·I{h ≥ γ} + ρ·I{h ≤ γ}`. Both indicators fire on ties.
pub fn delta_gamma<T: Scalar>(h: T, gamma: T, rho: T) -> T {
    let mut d = T::zero();
    if h >= gamma {
        d -= T::one() - rho;
    }
    if h <= gamma {
        d += rho;
    }
    d
}

/// `S(h)·I{h ≥ γ}` given the weight `s = S(h)`.
pub fn g0<T: Scalar>(h: T, gamma: T, s: T) -> T {
    if h >= gamma {
        s
    } else {
        T::zero()
    }
}

pub fn g1<T: Scalar>(h: T, x: &[T], gamma: T, s: T) -> Vec<T> {
    let w = g0(h, gamma, s);
    x.iter().map(|&v| w * v).collect()
}

pub fn g2<T: Scalar>(h: T, x: &[T], gamma: T, mu: &[T], s: T) -> Matrix<T> {
    let w = g0(h, gamma, s);
    let d: Vec<T> = x.iter().zip(mu).map(|(&a, &b)| a - b).collect();
    let mut out = Matrix::zeros(x.len(), x.len());
    out.add_outer(&d, &d, w);
    out
}

/// `(1 - c)·T + c·(±1)`, kept on the representable values strictly inside
/// `(-1, 1)` (long streaks would otherwise round onto `±1`).
pub fn update_tcmp<T: Scalar>(tcmp: T, c: T, gamma_gt: bool) -> T {
    let sign = if gamma_gt { T::one() } else { -T::one() };
    let edge = T::one() - T::epsilon() / T::of(2.0);
    (tcmp + c * (sign - tcmp)).max(-edge).min(edge)
}

/// Everything the optimizer tracks between iterations.
#[derive(Debug, Clone)]
pub struct Ce2ndState<T> {
    pub gamma: T,
    /// `None` is the `-∞` sentinel used until the first model update.
    pub gamma_prev: Option<T>,
    pub xi0: Vec<T>,
    pub xi1: Matrix<T>,
    pub tcmp: T,
    pub theta: GaussianParams<T>,
    pub theta_prev: Option<GaussianParams<T>>,
    pub c: T,
    pub t: u64,
    pub n_updates: u64,
    pub last_update_t: Option<u64>,
    /// Running maximum of observed objective values (`None` before the first).
    pub shift: Option<T>,
    pub rng: RngState,
}

impl<T: Scalar> Ce2ndState<T> {
    fn is_finite(&self) -> bool {
        self.gamma.is_finite()
            && self.gamma_prev.map_or(true, |g| g.is_finite())
            && all_finite(&self.xi0)
            && self.xi1.all_finite()
            && self.tcmp.is_finite()
            && self.theta.is_finite()
    }

    fn clock(&self) -> Clock {
        Clock {
            t: self.t,
            n_updates: self.n_updates,
            last_update_t: self.last_update_t,
        }
    }

    /// Compact text dump used in divergence reports.
    pub fn snapshot(&self) -> String {
        format!(
            "t={} n_updates={} gamma={} gamma_prev={:?} tcmp={} c={} shift={:?} mu={:?} sigma_trace={} xi0={:?} xi1_trace={}",
            self.t,
            self.n_updates,
            self.gamma,
            self.gamma_prev,
            self.tcmp,
            self.c,
            self.shift,
            self.theta.mu(),
            self.theta.sigma().trace(),
            self.xi0,
            self.xi1.trace()
        )
    }
}

/// What one call to [`Ce2nd::step`] did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub evaluations: u64,
    pub updated: bool,
    pub branch: Branch,
}

/// Stopping rules for [`Ce2nd::run`] and the batch baselines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub max_evals: u64,
    pub max_updates: Option<u64>,
    /// Stop once every entry of `Σ` is below this in magnitude.
    pub degeneracy: f64,
}

impl StopRule {
    pub fn evals(max_evals: u64) -> Self {
        Self {
            max_evals,
            max_updates: None,
            degeneracy: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxEvals,
    MaxUpdates,
    Degenerate,
    Diverged,
}

/// Result of a run. `error` is set (and `stop == Diverged`) when the run
/// ended in divergence; the trace up to that point is kept.
#[derive(Debug)]
pub struct RunOutcome<S> {
    pub trace: Vec<TraceRecord>,
    pub stop: StopReason,
    pub error: Option<Error>,
    pub final_state: S,
}

/// The optimizer: schedules, initial model and evolving state.
#[derive(Debug, Clone)]
pub struct Ce2nd<T> {
    schedules: Schedules,
    theta0: GaussianParams<T>,
    initial_sampler: GaussianSampler<T>,
    current_sampler: GaussianSampler<T>,
    prev_sampler: Option<GaussianSampler<T>>,
    state: Ce2ndState<T>,
}

impl<T: Scalar> Ce2nd<T> {
    pub fn new(schedules: Schedules, theta0: GaussianParams<T>, rng: RngState) -> Result<Self> {
        schedules.validate()?;
        if theta0.sigma().cholesky().is_none() {
            return Err(Error::InvalidInput(
                "initial covariance must be strictly positive definite".into(),
            ));
        }
        let m = theta0.dim();
        let initial_sampler = theta0.sampler()?;
        let c0 = T::of(schedules.c.at_iteration(0));
        let state = Ce2ndState {
            gamma: T::zero(),
            gamma_prev: None,
            xi0: vec![T::zero(); m],
            xi1: Matrix::zeros(m, m),
            tcmp: T::zero(),
            theta: theta0.clone(),
            theta_prev: None,
            c: c0,
            t: 0,
            n_updates: 0,
            last_update_t: None,
            shift: None,
            rng,
        };
        Ok(Self {
            schedules,
            current_sampler: initial_sampler.clone(),
            initial_sampler,
            prev_sampler: None,
            theta0,
            state,
        })
    }

    /// Starts from `current` while keeping `theta0` as the fixed mixture component.
    pub fn with_initial(
        schedules: Schedules,
        current: GaussianParams<T>,
        theta0: GaussianParams<T>,
        rng: RngState,
    ) -> Result<Self> {
        if current.dim() != theta0.dim() {
            return Err(Error::DimensionMismatch { expected: theta0.dim(), got: current.dim() });
        }
        let mut opt = Self::new(schedules, theta0, rng)?;
        opt.current_sampler = current.sampler()?;
        opt.state.theta = current;
        Ok(opt)
    }

    pub fn state(&self) -> &Ce2ndState<T> {
        &self.state
    }

    pub fn schedules(&self) -> &Schedules {
        &self.schedules
    }

    pub fn theta0(&self) -> &GaussianParams<T> {
        &self.theta0
    }

    /// Test hook: overwrite `γ` (e.g. to pin the threshold).
    pub fn set_gamma(&mut self, gamma: T) {
        self.state.gamma = gamma;
    }

    /// Mixing weight used by the next iteration.
    pub fn current_lambda(&self) -> T {
        let v = self.schedules.lambda.at(self.state.clock());
        T::of(v.clamp(0.0, LAMBDA_MAX))
    }

    fn project(&self, v: T, f: &ObjectiveFunction<T>) -> T {
        if self.schedules.projection {
            f.bounds().project(v)
        } else {
            v
        }
    }

    fn diverged(&self, reason: impl Into<String>) -> Error {
        Error::Divergence {
            t: self.state.t,
            reason: reason.into(),
            snapshot: self.state.snapshot(),
        }
    }

    fn evaluate(&mut self, f: &mut ObjectiveFunction<T>, x: &[T]) -> Result<T> {
        if !all_finite(x) {
            return Err(self.diverged("sampled a non-finite point"));
        }
        let h = f.evaluate(x)?;
        if !h.is_finite() {
            return Err(self.diverged("objective returned a non-finite value"));
        }
        self.state.shift = Some(self.state.shift.map_or(h, |s| s.max(h)));
        Ok(h)
    }

    /// One iteration. See the module docs for the recursion order.
    pub fn step(&mut self, f: &mut ObjectiveFunction<T>) -> Result<StepInfo> {
        if f.dim() != self.theta0.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.theta0.dim(),
                got: f.dim(),
            });
        }
        let evals_before = f.evaluations();
        let t = self.state.t;
        let clock_next = Clock {
            t: t + 1,
            ..self.state.clock()
        };
        let beta = T::of(self.schedules.beta.at(clock_next));
        let gain = T::of(self.schedules.k_gamma) * beta;
        let rho = T::of(self.schedules.rho);
        let r = T::of(self.schedules.r);
        let lambda = self.current_lambda();

        // Sample generation and evaluation.
        let (x, branch) = draw_mixture(
            &self.current_sampler,
            &self.initial_sampler,
            lambda,
            &mut self.state.rng,
        );
        let h = self.evaluate(f, &x)?;
        let shift = self.state.shift.unwrap_or(h);
        let s = s_weight(h, r, shift)?;

        // Quantile tracking.
        let gamma_t = self.state.gamma;
        let gamma_next = self.project(gamma_t - gain * delta_gamma(h, gamma_t, rho), f);

        // Previous-model quantile tracking.
        let mut gamma_prev_next = self.state.gamma_prev;
        if let Some(gp) = self.state.gamma_prev {
            let prev = self
                .prev_sampler
                .as_ref()
                .expect("a previous threshold implies a previous model");
            let (xp, _) = draw_mixture(prev, &self.initial_sampler, lambda, &mut self.state.rng);
            let hp = self.evaluate(f, &xp)?;
            gamma_prev_next = Some(self.project(gp - gain * delta_gamma(hp, gp, rho), f));
        }

        // Threshold comparison.
        let gamma_gt = gamma_prev_next.map_or(true, |gp| gamma_next > gp);
        let tcmp_next = update_tcmp(self.state.tcmp, self.state.c, gamma_gt);
        let updated = tcmp_next > T::of(self.schedules.eps1);

        // The model step uses ξ⁽⁰⁾_t, ξ⁽¹⁾_t, so it is formed before the
        // trackers below advance.
        let theta_next = if updated {
            let next = self.state.theta.relax_toward(
                &self.state.xi0,
                &self.state.xi1.symmetrized(),
                beta,
            );
            if !next.is_finite() {
                return Err(self.diverged("model update produced non-finite parameters"));
            }
            Some(next)
        } else {
            None
        };

        // ξ⁽⁰⁾ and ξ⁽¹⁾ tracking; both use γ_t and ξ⁽⁰⁾_t.
        let w = beta * g0(h, gamma_t, s);
        if w != T::zero() {
            let d: Vec<T> = x.iter().zip(&self.state.xi0).map(|(&a, &b)| a - b).collect();
            for (xi, &di) in self.state.xi0.iter_mut().zip(&d) {
                *xi += w * di;
            }
            self.state.xi1.decay_add_outer(T::one() - w, &d, w);
        }

        self.state.gamma = gamma_next;
        self.state.gamma_prev = gamma_prev_next;
        self.state.tcmp = tcmp_next;

        if let Some(theta_next) = theta_next {
            let new_sampler = theta_next.sampler()?;
            self.prev_sampler = Some(std::mem::replace(&mut self.current_sampler, new_sampler));
            self.state.theta_prev = Some(std::mem::replace(&mut self.state.theta, theta_next));
            self.state.gamma_prev = Some(gamma_t);
            self.state.tcmp = T::zero();
            self.state.c = T::of(self.schedules.c.at_iteration(t));
            self.state.n_updates += 1;
            self.state.last_update_t = Some(t + 1);
        }
        self.state.t = t + 1;

        if !self.state.is_finite() {
            return Err(self.diverged("state became non-finite"));
        }
        Ok(StepInfo {
            evaluations: f.evaluations() - evals_before,
            updated,
            branch,
        })
    }

    fn record(&self, f: &ObjectiveFunction<T>) -> TraceRecord {
        let h_of_mu = f
            .peek(self.state.theta.mu())
            .map(|v| v.to_f64_lossy())
            .unwrap_or(f64::NAN);
        TraceRecord {
            t: self.state.t,
            n_evals: f.evaluations(),
            n_updates: self.state.n_updates,
            h_of_mu,
            gamma: self.state.gamma.to_f64_lossy(),
            gamma_prev: Some(
                self.state
                    .gamma_prev
                    .map_or(f64::NEG_INFINITY, |g| g.to_f64_lossy()),
            ),
            tcmp: Some(self.state.tcmp.to_f64_lossy()),
            sigma_trace: self.state.theta.sigma().trace().to_f64_lossy(),
        }
    }

    /// Iterates until a stopping rule fires. One record per `stride`
    /// iterations, plus the final iteration.
    pub fn run(
        &mut self,
        f: &mut ObjectiveFunction<T>,
        stop: &StopRule,
        stride: u64,
    ) -> RunOutcome<Ce2ndState<T>> {
        let stride = stride.max(1);
        let mut trace = Vec::new();
        let mut last_recorded = None;
        let reason = loop {
            if f.evaluations() >= stop.max_evals {
                break StopReason::MaxEvals;
            }
            if stop.max_updates.is_some_and(|n| self.state.n_updates >= n) {
                break StopReason::MaxUpdates;
            }
            if self.state.theta.sigma().max_abs().to_f64_lossy() < stop.degeneracy {
                break StopReason::Degenerate;
            }
            match self.step(f) {
                Ok(_) => {
                    if self.state.t % stride == 0 {
                        trace.push(self.record(f));
                        last_recorded = Some(self.state.t);
                    }
                }
                Err(e) => {
                    return RunOutcome {
                        trace,
                        stop: StopReason::Diverged,
                        error: Some(e),
                        final_state: self.state.clone(),
                    };
                }
            }
        };
        if self.state.t > 0 && last_recorded != Some(self.state.t) {
            trace.push(self.record(f));
        }
        RunOutcome {
            trace,
            stop: reason,
            error: None,
            final_state: self.state.clone(),
        }
    }
}
