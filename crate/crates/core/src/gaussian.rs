//! Gaussian model parameters, sampling, and the two-component mixture
//! `(1 - λ) f_θ + λ f_θ₀` used for exploration.

use crate::error::{Error, Result};
use crate::linalg::{FactorMethod, Matrix};
use crate::rng::RngState;
use crate::scalar::{all_finite, Scalar};

/// Mean vector and (symmetric) covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianParams<T> {
    mu: Vec<T>,
    sigma: Matrix<T>,
}

impl<T: Scalar> GaussianParams<T> {
    /// Validates shapes and finiteness; the covariance is stored symmetrized.
    pub fn new(mu: Vec<T>, sigma: Matrix<T>) -> Result<Self> {
        let m = mu.len();
        if sigma.nrows() != m || sigma.ncols() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: sigma.nrows(),
            });
        }
        if !all_finite(&mu) || !sigma.all_finite() {
            return Err(Error::InvalidInput(
                "Gaussian parameters contain non-finite entries".into(),
            ));
        }
        let sigma = if sigma.is_symmetric() {
            sigma
        } else {
            sigma.symmetrized()
        };
        Ok(Self { mu, sigma })
    }

    /// `(μ, q I)`.
    pub fn isotropic(mu: Vec<T>, q: T) -> Result<Self> {
        let m = mu.len();
        Self::new(mu, Matrix::scaled_identity(m, q))
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[T] {
        &self.mu
    }

    pub fn sigma(&self) -> &Matrix<T> {
        &self.sigma
    }

    pub fn is_finite(&self) -> bool {
        all_finite(&self.mu) && self.sigma.all_finite()
    }

    /// `θ + step · (target - θ)` on both components. Skips validation so a
    /// non-finite result can be reported by the caller as divergence.
    pub(crate) fn relax_toward(&self, mu_target: &[T], sigma_target: &Matrix<T>, step: T) -> Self {
        let mu = self
            .mu
            .iter()
            .zip(mu_target)
            .map(|(&m, &t)| m + step * (t - m))
            .collect();
        let sigma = self.sigma.relax_toward(sigma_target, step);
        Self { mu, sigma }
    }

    /// Precomputes the covariance factor for repeated sampling.
    pub fn sampler(&self) -> Result<GaussianSampler<T>> {
        if !self.is_finite() {
            return Err(Error::InvalidInput(
                "cannot sample from non-finite Gaussian parameters".into(),
            ));
        }
        let f = self.sigma.psd_factor();
        Ok(GaussianSampler {
            mu: self.mu.clone(),
            factor: f.factor,
            method: f.method,
        })
    }
}

/// A Gaussian with its covariance already factored.
#[derive(Debug, Clone)]
pub struct GaussianSampler<T> {
    mu: Vec<T>,
    factor: Matrix<T>,
    method: FactorMethod,
}

impl<T: Scalar> GaussianSampler<T> {
    pub fn factor_method(&self) -> FactorMethod {
        self.method
    }

    /// `μ + L z` with `z` drawn as `m` standard normals.
    pub fn sample(&self, rng: &mut RngState) -> Vec<T> {
        let z: Vec<T> = rng.standard_normal_vec(self.mu.len());
        let lz = self.factor.mul_vec(&z);
        self.mu.iter().zip(lz).map(|(&m, d)| m + d).collect()
    }
}

/// Draws one point from `N(μ, Σ)`. Refactors `Σ` on every call; hold a
/// [`GaussianSampler`] for repeated draws.
pub fn sample_gaussian<T: Scalar>(params: &GaussianParams<T>, rng: &mut RngState) -> Result<Vec<T>> {
    Ok(params.sampler()?.sample(rng))
}

/// `log f_θ(x)` for strictly positive definite `Σ`.
pub fn log_density<T: Scalar>(params: &GaussianParams<T>, x: &[T]) -> Result<T> {
    let m = params.dim();
    if x.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: x.len(),
        });
    }
    let l = params
        .sigma
        .cholesky()
        .ok_or_else(|| Error::Singular("covariance is not positive definite".into()))?;
    // Solve L y = x - μ.
    let mut y = vec![T::zero(); m];
    for i in 0..m {
        let mut s = x[i] - params.mu[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    let quad: T = y.iter().map(|&v| v * v).sum();
    let log_det: T = (0..m).map(|i| l[(i, i)].ln()).sum::<T>() * T::of(2.0);
    let half = T::of(0.5);
    Ok(-half * (T::of_usize(m) * (T::TAU()).ln() + log_det + quad))
}

/// Which component of a mixture produced a draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Current,
    Initial,
}

/// `(1 - λ) f_current + λ f_initial`.
#[derive(Debug, Clone)]
pub struct MixtureModel<T> {
    pub current: GaussianParams<T>,
    pub initial: GaussianParams<T>,
    pub lambda: T,
}

impl<T: Scalar> MixtureModel<T> {
    pub fn new(current: GaussianParams<T>, initial: GaussianParams<T>, lambda: T) -> Result<Self> {
        if current.dim() != initial.dim() {
            return Err(Error::DimensionMismatch {
                expected: initial.dim(),
                got: current.dim(),
            });
        }
        if !(lambda >= T::zero() && lambda < T::one()) {
            return Err(Error::InvalidInput(format!(
                "mixing weight must lie in [0, 1), got {lambda}"
            )));
        }
        if initial.sigma().cholesky().is_none() {
            return Err(Error::InvalidInput(
                "initial covariance must be strictly positive definite".into(),
            ));
        }
        Ok(Self {
            current,
            initial,
            lambda,
        })
    }

    pub fn sampler(&self) -> Result<MixtureSampler<T>> {
        Ok(MixtureSampler {
            current: self.current.sampler()?,
            initial: self.initial.sampler()?,
            lambda: self.lambda,
        })
    }

    /// `log((1 - λ) f_current(x) + λ f_initial(x))` via log-sum-exp.
    pub fn log_density(&self, x: &[T]) -> Result<T> {
        let a = log_density(&self.current, x)?;
        let b = log_density(&self.initial, x)?;
        if self.lambda == T::zero() {
            return Ok(a);
        }
        let la = (T::one() - self.lambda).ln() + a;
        let lb = self.lambda.ln() + b;
        let hi = la.max(lb);
        Ok(hi + ((la - hi).exp() + (lb - hi).exp()).ln())
    }
}

/// Borrowed-factor mixture used inside the optimizer loop.
#[derive(Debug, Clone)]
pub struct MixtureSampler<T> {
    pub(crate) current: GaussianSampler<T>,
    pub(crate) initial: GaussianSampler<T>,
    pub(crate) lambda: T,
}

impl<T: Scalar> MixtureSampler<T> {
    pub fn from_samplers(current: GaussianSampler<T>, initial: GaussianSampler<T>, lambda: T) -> Self {
        Self {
            current,
            initial,
            lambda,
        }
    }

    pub fn sample(&self, rng: &mut RngState) -> (Vec<T>, Branch) {
        draw_mixture(&self.current, &self.initial, self.lambda, rng)
    }
}

/// One uniform picks the branch (`u < λ` selects `initial`), then `m`
/// normals feed the chosen Gaussian.
pub fn draw_mixture<T: Scalar>(
    current: &GaussianSampler<T>,
    initial: &GaussianSampler<T>,
    lambda: T,
    rng: &mut RngState,
) -> (Vec<T>, Branch) {
    let u = rng.uniform();
    if T::of(u) < lambda {
        (initial.sample(rng), Branch::Initial)
    } else {
        (current.sample(rng), Branch::Current)
    }
}

pub fn sample_mixture<T: Scalar>(model: &MixtureModel<T>, rng: &mut RngState) -> Result<(Vec<T>, Branch)> {
    Ok(model.sampler()?.sample(rng))
}
