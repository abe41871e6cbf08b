//! Batch Monte-Carlo cross-entropy baselines.
//!
//! Both methods draw `N_t` IID points from the current Gaussian, estimate
//! the `(1 - ρ)`-quantile by an order statistic and refit the model from the
//! weighted elite set. Batch sizes grow as `N_{t+1} = ⌈η N_t⌉`.
//!
//! * [`BatchAlgorithm::Mcce`] gates the threshold: the running threshold only
//!   moves when the batch quantile beats it by at least `eps`.
//! * [`BatchAlgorithm::Gmcce`] uses the raw batch quantile and blends the refit
//!   into the current model with gain `α_t`.

use crate::incremental::{RunOutcome, StopReason, StopRule};
use crate::error::{Error, Result};
use crate::gaussian::GaussianParams;
use crate::linalg::Matrix;
use crate::objectives::ObjectiveFunction;
use crate::rng::RngState;
use crate::scalar::{all_finite, Scalar};
use crate::schedule::Schedule;
use crate::trace::TraceRecord;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchAlgorithm {
    Mcce,
    Gmcce,
}

impl BatchAlgorithm {
    pub fn id(self) -> &'static str {
        match self {
            BatchAlgorithm::Mcce => "mcce",
            BatchAlgorithm::Gmcce => "gmcce",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub n0: usize,
    pub eta: f64,
    pub rho: f64,
    pub r: f64,
    /// Threshold acceptance margin (MCCE only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// Smoothing gain (GMCCE only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Schedule>,
}

impl MonteCarloConfig {
    pub fn validate(&self, algorithm: BatchAlgorithm) -> Result<()> {
        if self.n0 < 1 {
            return Err(Error::config("n0", "must be at least 1"));
        }
        if !(self.eta >= 1.0) || !self.eta.is_finite() {
            return Err(Error::config("eta", format!("must be a finite value >= 1, got {}", self.eta)));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::config("rho", format!("must lie in (0, 1), got {}", self.rho)));
        }
        if !(self.r > 0.0) || !self.r.is_finite() {
            return Err(Error::config("r", format!("must be positive, got {}", self.r)));
        }
        match algorithm {
            BatchAlgorithm::Mcce => match self.eps {
                Some(e) if e > 0.0 && e.is_finite() => {}
                Some(e) => return Err(Error::config("eps", format!("must be positive, got {e}"))),
                None => return Err(Error::config("eps", "required for mcce")),
            },
            BatchAlgorithm::Gmcce => match &self.alpha {
                Some(a) => {
                    a.validate_range("alpha", 0.0, 1.0, false)?;
                }
                None => return Err(Error::config("alpha", "required for gmcce")),
            },
        }
        Ok(())
    }

    /// `⌈η n⌉`, never smaller than `n`.
    pub fn next_batch_size(&self, n: usize) -> usize {
        let grown = (self.eta * n as f64).ceil();
        if grown >= usize::MAX as f64 {
            usize::MAX
        } else {
            (grown as usize).max(n)
        }
    }
}

/// The `⌈(1 - ρ) N⌉`-th smallest value (1-based).
pub fn sample_quantile<T: Scalar>(values: &[T], rho: f64) -> Result<T> {
    if values.is_empty() {
        return Err(Error::InvalidInput("quantile of an empty batch".into()));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidInput(format!("rho must lie in (0, 1), got {rho}")));
    }
    let n = values.len();
    let k = (((1.0 - rho) * n as f64).ceil() as usize).clamp(1, n);
    let mut buf = values.to_vec();
    let (_, v, _) = buf.select_nth_unstable_by(k - 1, |a, b| a.partial_cmp(b).expect("NaN in batch"));
    Ok(*v)
}

/// `S(h) I{h ≥ γ}` with `S(h) = exp(r (h - max h))`. `gamma = None` admits
/// every point.
pub fn elite_weights<T: Scalar>(values: &[T], gamma: Option<T>, r: T) -> Vec<T> {
    let shift = values.iter().copied().fold(T::neg_infinity(), T::max);
    values
        .iter()
        .map(|&h| {
            if gamma.map_or(true, |g| h >= g) {
                (r * (h - shift)).exp()
            } else {
                T::zero()
            }
        })
        .collect()
}

/// Weighted mean, then weighted second moment about that mean. `None` when
/// all weights vanish.
pub fn weighted_moments<T: Scalar>(points: &[Vec<T>], weights: &[T]) -> Option<(Vec<T>, Matrix<T>)> {
    let m = points.first()?.len();
    let total: T = weights.iter().copied().sum();
    if !(total > T::zero()) {
        return None;
    }
    let mut mu = vec![T::zero(); m];
    for (x, &w) in points.iter().zip(weights) {
        if w > T::zero() {
            for (acc, &xi) in mu.iter_mut().zip(x) {
                *acc += w * xi;
            }
        }
    }
    for v in &mut mu {
        *v /= total;
    }
    let mut sigma = Matrix::zeros(m, m);
    let mut d = vec![T::zero(); m];
    for (x, &w) in points.iter().zip(weights) {
        if w > T::zero() {
            for ((di, &xi), &mi) in d.iter_mut().zip(x).zip(&mu) {
                *di = xi - mi;
            }
            sigma.add_outer(&d, &d, w / total);
        }
    }
    Some((mu, sigma))
}

/// Blended refit: `μ' = α μ_fit + (1 - α) μ` and
/// `Σ' = α Σ_fit(μ') + (1 - α)(Σ + (μ - μ')(μ - μ')ᵀ)`, where `Σ_fit(μ')` is
/// the weighted elite second moment about the new mean. `None` when every
/// weight is zero.
pub fn smoothed_refit<T: Scalar>(
    theta: &GaussianParams<T>,
    points: &[Vec<T>],
    weights: &[T],
    alpha: T,
) -> Result<Option<GaussianParams<T>>> {
    let Some((fit_mu, _)) = weighted_moments(points, weights) else {
        return Ok(None);
    };
    let one = T::one();
    let mu = theta.mu();
    let m = mu.len();
    let mu_next: Vec<T> = fit_mu
        .iter()
        .zip(mu)
        .map(|(&a, &b)| alpha * a + (one - alpha) * b)
        .collect();
    let total: T = weights.iter().copied().sum();
    let mut fit_sigma = Matrix::zeros(m, m);
    let mut d = vec![T::zero(); m];
    for (x, &w) in points.iter().zip(weights) {
        if w > T::zero() {
            for ((di, &xi), &mi) in d.iter_mut().zip(x).zip(&mu_next) {
                *di = xi - mi;
            }
            fit_sigma.add_outer(&d, &d, w / total);
        }
    }
    let mut carried = theta.sigma().clone();
    let drift: Vec<T> = mu.iter().zip(&mu_next).map(|(&a, &b)| a - b).collect();
    carried.add_outer(&drift, &drift, one);
    let sigma_next = Matrix::from_fn(m, m, |i, j| alpha * fit_sigma[(i, j)] + (one - alpha) * carried[(i, j)]);
    Ok(Some(GaussianParams::new(mu_next, sigma_next)?))
}

/// What one batch iteration saw.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats<T> {
    pub batch_size: usize,
    pub quantile: T,
    /// Threshold used for elite selection.
    pub threshold: T,
    pub elites: usize,
    pub best: T,
    pub updated: bool,
}

#[derive(Debug, Clone)]
pub struct BatchState<T> {
    pub theta: GaussianParams<T>,
    /// MCCE running threshold; `None` is `-∞`.
    pub gamma_star: Option<T>,
    pub last_quantile: Option<T>,
    pub t: u64,
    pub batch_size: usize,
    pub n_updates: u64,
    pub rng: RngState,
}

impl<T: Scalar> BatchState<T> {
    pub fn snapshot(&self) -> String {
        format!(
            "t={} batch={} gamma_star={:?} mu={:?} sigma_trace={}",
            self.t,
            self.batch_size,
            self.gamma_star,
            self.theta.mu(),
            self.theta.sigma().trace()
        )
    }
}

#[derive(Debug, Clone)]
pub struct BatchOptimizer<T> {
    algorithm: BatchAlgorithm,
    config: MonteCarloConfig,
    state: BatchState<T>,
}

impl<T: Scalar> BatchOptimizer<T> {
    pub fn new(
        algorithm: BatchAlgorithm,
        config: MonteCarloConfig,
        theta0: GaussianParams<T>,
        rng: RngState,
    ) -> Result<Self> {
        config.validate(algorithm)?;
        let batch_size = config.n0;
        Ok(Self {
            algorithm,
            config,
            state: BatchState {
                theta: theta0,
                gamma_star: None,
                last_quantile: None,
                t: 0,
                batch_size,
                n_updates: 0,
                rng,
            },
        })
    }

    pub fn algorithm(&self) -> BatchAlgorithm {
        self.algorithm
    }

    pub fn config(&self) -> &MonteCarloConfig {
        &self.config
    }

    pub fn state(&self) -> &BatchState<T> {
        &self.state
    }

    fn diverged(&self, reason: impl Into<String>) -> Error {
        Error::Divergence {
            t: self.state.t,
            reason: reason.into(),
            snapshot: self.state.snapshot(),
        }
    }

    /// Draws the whole batch first, then evaluates it in order.
    fn sample_batch(&mut self, f: &mut ObjectiveFunction<T>) -> Result<(Vec<Vec<T>>, Vec<T>)> {
        let sampler = self.state.theta.sampler()?;
        let n = self.state.batch_size;
        let points: Vec<Vec<T>> = (0..n).map(|_| sampler.sample(&mut self.state.rng)).collect();
        let mut values = Vec::with_capacity(n);
        for x in &points {
            if !all_finite(x) {
                return Err(self.diverged("sampled a non-finite point"));
            }
            let h = f.evaluate(x)?;
            if !h.is_finite() {
                return Err(self.diverged("objective returned a non-finite value"));
            }
            values.push(h);
        }
        Ok((points, values))
    }

    /// One batch iteration; consumes exactly `N_t` evaluations.
    pub fn step(&mut self, f: &mut ObjectiveFunction<T>) -> Result<BatchStats<T>> {
        if f.dim() != self.state.theta.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.state.theta.dim(),
                got: f.dim(),
            });
        }
        let (points, values) = self.sample_batch(f)?;
        let quantile = sample_quantile(&values, self.config.rho)?;
        let best = values.iter().copied().fold(T::neg_infinity(), T::max);
        let r = T::of(self.config.r);

        let (threshold, next) = match self.algorithm {
            BatchAlgorithm::Mcce => {
                let eps = T::of(self.config.eps.unwrap_or(0.0));
                let gs = match self.state.gamma_star {
                    Some(g) if quantile < g + eps => g,
                    _ => quantile,
                };
                self.state.gamma_star = Some(gs);
                let w = elite_weights(&values, Some(gs), r);
                let next = weighted_moments(&points, &w)
                    .map(|(mu, sigma)| GaussianParams::new(mu, sigma))
                    .transpose()?;
                (gs, next)
            }
            BatchAlgorithm::Gmcce => {
                let alpha_sched = self.config.alpha.as_ref().expect("validated");
                let alpha = T::of(alpha_sched.at_iteration(self.state.t + 1));
                let w = elite_weights(&values, Some(quantile), r);
                let next = smoothed_refit(&self.state.theta, &points, &w, alpha)?;
                (quantile, next)
            }
        };

        let elites = values.iter().filter(|&&h| h >= threshold).count();
        let updated = next.is_some();
        if let Some(theta) = next {
            if !theta.is_finite() {
                return Err(self.diverged("model update produced non-finite parameters"));
            }
            self.state.theta = theta;
            self.state.n_updates += 1;
        }
        let stats = BatchStats {
            batch_size: self.state.batch_size,
            quantile,
            threshold,
            elites,
            best,
            updated,
        };
        self.state.last_quantile = Some(quantile);
        self.state.t += 1;
        self.state.batch_size = self.config.next_batch_size(self.state.batch_size);
        Ok(stats)
    }

    fn record(&self, f: &ObjectiveFunction<T>) -> TraceRecord {
        let gamma = match self.algorithm {
            BatchAlgorithm::Mcce => self.state.gamma_star,
            BatchAlgorithm::Gmcce => self.state.last_quantile,
        };
        TraceRecord {
            t: self.state.t,
            n_evals: f.evaluations(),
            n_updates: self.state.n_updates,
            h_of_mu: f
                .peek(self.state.theta.mu())
                .map(|v| v.to_f64_lossy())
                .unwrap_or(f64::NAN),
            gamma: gamma.map_or(f64::NEG_INFINITY, |g| g.to_f64_lossy()),
            gamma_prev: None,
            tcmp: None,
            sigma_trace: self.state.theta.sigma().trace().to_f64_lossy(),
        }
    }

    /// Iterates until a stopping rule fires; same conventions as the
    /// incremental optimizer's `run`.
    pub fn run(
        &mut self,
        f: &mut ObjectiveFunction<T>,
        stop: &StopRule,
        stride: u64,
    ) -> RunOutcome<BatchState<T>> {
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
                    }
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::make_benchmark;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn mc(n0: usize) -> MonteCarloConfig {
        MonteCarloConfig {
            n0,
            eta: 1.005,
            rho: 0.1,
            r: 0.1,
            eps: Some(1e-6),
            alpha: Some(Schedule::Constant(0.5)),
        }
    }

    #[test]
    fn quantile_order_statistic() {
        assert_eq!(sample_quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.2).unwrap(), 4.0);
        assert_eq!(sample_quantile(&[5.0, 3.0, 1.0, 2.0, 4.0], 0.2).unwrap(), 4.0);
        assert_eq!(sample_quantile(&[7.0], 0.37).unwrap(), 7.0);
        assert!(sample_quantile::<f64>(&[], 0.1).is_err());
    }

    #[test]
    fn quantile_of_normal_batch() {
        let mut rng = RngState::new(11, 0);
        let xs: Vec<f64> = (0..1000).map(|_| rng.standard_normal()).collect();
        let q = sample_quantile(&xs, 0.1).unwrap();
        let exact = Normal::new(0.0, 1.0).unwrap().inverse_cdf(0.9);
        assert!((q - exact).abs() < 0.13, "{q} vs {exact}");
    }

    #[test]
    fn unit_weights_give_elite_mean() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 2.0], vec![3.0, 4.0], vec![-5.0, 1.0]];
        let w = [0.0, 1.0, 1.0, 0.0];
        let (mu, sigma) = weighted_moments(&pts, &w).unwrap();
        assert_eq!(mu, vec![2.0, 3.0]);
        assert_eq!(sigma.as_slice(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn single_elite_collapses_covariance() {
        let pts = vec![vec![0.5, -1.5, 2.0], vec![9.0, 9.0, 9.0]];
        let (mu, sigma) = weighted_moments(&pts, &[0.3, 0.0]).unwrap();
        assert_eq!(mu, vec![0.5, -1.5, 2.0]);
        assert!(sigma.as_slice().iter().all(|&v| v == 0.0));
        assert!(weighted_moments(&pts, &[0.0, 0.0]).is_none());
    }

    #[test]
    fn weights_ignore_common_scale() {
        let pts = vec![vec![0.1, 2.0], vec![1.5, -0.7], vec![-2.0, 0.4]];
        let w = [0.2, 0.7, 0.1];
        let w3: Vec<f64> = w.iter().map(|v| v * 1e3).collect();
        let (m1, s1) = weighted_moments(&pts, &w).unwrap();
        let (m2, s2) = weighted_moments(&pts, &w3).unwrap();
        for (a, b) in m1.iter().zip(&m2) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in s1.as_slice().iter().zip(s2.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn smoothing_extremes() {
        let theta = GaussianParams::<f64>::new(vec![0.3, -0.2], Matrix::from_rows(&[vec![2.0, 0.1], vec![0.1, 1.0]])).unwrap();
        let pts = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![2.0, 2.0]];
        let w = [1.0, 0.5, 0.25];
        let same = smoothed_refit(&theta, &pts, &w, 0.0).unwrap().unwrap();
        assert_eq!(same.mu(), theta.mu());
        assert_eq!(same.sigma(), theta.sigma());
        let full = smoothed_refit(&theta, &pts, &w, 1.0).unwrap().unwrap();
        let (mu, sigma) = weighted_moments(&pts, &w).unwrap();
        for (a, b) in full.mu().iter().zip(&mu) {
            assert!((a - b).abs() < 1e-15);
        }
        for (a, b) in full.sigma().as_slice().iter().zip(sigma.as_slice()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn smoothing_half_by_hand() {
        // μ = 0, Σ = 1, elites x = 1 and x = 3 with equal weight.
        // fit mean 2 → μ' = 1; fit second moment about 1 is (0 + 4)/2 = 2;
        // Σ' = 0.5·2 + 0.5·(1 + 1) = 2.
        let theta = GaussianParams::new(vec![0.0], Matrix::identity(1)).unwrap();
        let pts = vec![vec![1.0], vec![3.0]];
        let next = smoothed_refit(&theta, &pts, &[1.0, 1.0], 0.5).unwrap().unwrap();
        assert_eq!(next.mu(), &[1.0]);
        assert_eq!(next.sigma()[(0, 0)], 2.0);
    }

    #[test]
    fn batch_sizes_grow_by_ceiling() {
        let c = mc(100);
        assert_eq!(c.next_batch_size(100), 101);
        assert_eq!(c.next_batch_size(1), 2);
        let flat = MonteCarloConfig { eta: 1.0, ..c };
        assert_eq!(flat.next_batch_size(700), 700);
    }

    #[test]
    fn evaluations_match_batch_sizes() {
        let mut f = make_benchmark::<f64>("griewank", 3).unwrap();
        let theta0 = GaussianParams::isotropic(vec![5.0; 3], 4.0).unwrap();
        for alg in [BatchAlgorithm::Mcce, BatchAlgorithm::Gmcce] {
            f.reset_counter();
            let mut opt = BatchOptimizer::new(alg, mc(20), theta0.clone(), RngState::new(3, 0)).unwrap();
            let mut expected = 0u64;
            for _ in 0..15 {
                let n = opt.state().batch_size;
                let stats = opt.step(&mut f).unwrap();
                assert_eq!(stats.batch_size, n);
                expected += n as u64;
                assert_eq!(f.evaluations(), expected);
            }
        }
    }

    #[test]
    fn gated_threshold_never_decreases() {
        let mut f = make_benchmark::<f64>("rastrigin", 4).unwrap();
        let theta0 = GaussianParams::isotropic(vec![3.0; 4], 9.0).unwrap();
        let mut opt = BatchOptimizer::new(BatchAlgorithm::Mcce, mc(50), theta0, RngState::new(9, 2)).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for _ in 0..40 {
            let s = opt.step(&mut f).unwrap();
            assert!(s.threshold >= prev);
            assert!(opt.state().theta.sigma().is_symmetric());
            prev = s.threshold;
        }
    }

    #[test]
    fn config_validation_names_keys() {
        let mut c = mc(10);
        c.eps = None;
        let err = c.validate(BatchAlgorithm::Mcce).unwrap_err().to_string();
        assert!(err.contains("eps"), "{err}");
        assert!(c.validate(BatchAlgorithm::Gmcce).is_ok());
        c.alpha = Some(Schedule::Constant(1.5));
        assert!(c.validate(BatchAlgorithm::Gmcce).unwrap_err().to_string().contains("alpha"));
        let z = MonteCarloConfig { n0: 0, ..mc(1) };
        assert!(z.validate(BatchAlgorithm::Mcce).is_err());
    }
}
