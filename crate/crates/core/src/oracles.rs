//! Brute-force reference computations: the quantile loss, 1-D quadrature
//! quantiles and ideal cross-entropy steps, and Monte-Carlo estimates of the
//! tracker fixed points.

use crate::error::{Error, Result};
use crate::gaussian::{draw_mixture, GaussianParams};
use crate::linalg::Matrix;
use crate::rng::RngState;
use std::f64::consts::PI;

/// `(1 - ρ)(h - γ) I{h ≥ γ} + ρ (γ - h) I{h ≤ γ}`.
pub fn psi_loss(h: f64, gamma: f64, rho: f64) -> f64 {
    let mut v = 0.0;
    if h >= gamma {
        v += (1.0 - rho) * (h - gamma);
    }
    if h <= gamma {
        v += rho * (gamma - h);
    }
    v
}

pub const DEFAULT_NODES: usize = 20_001;
pub const DEFAULT_HALF_WIDTH: f64 = 8.0;

/// Composite Simpson rule on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    lo: f64,
    hi: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Grid1D {
    /// `n` is rounded up to the next odd count.
    pub fn simpson(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidInput(format!("grid needs finite lo < hi, got [{lo}, {hi}]")));
        }
        if n < 3 {
            return Err(Error::InvalidInput(format!("grid needs at least 3 nodes, got {n}")));
        }
        let n = if n % 2 == 0 { n + 1 } else { n };
        let h = (hi - lo) / (n - 1) as f64;
        // offsets from the midpoint keep the grid mirror-symmetric
        let mid = 0.5 * (lo + hi);
        let c = ((n - 1) / 2) as f64;
        let nodes = (0..n).map(|i| mid + (i as f64 - c) * h).collect();
        let weights = (0..n)
            .map(|i| {
                let k = if i == 0 || i == n - 1 {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                k * h / 3.0
            })
            .collect();
        Ok(Self { lo, hi, nodes, weights })
    }

    /// `mean ± half_width · sd`.
    pub fn around(mean: f64, sd: f64, half_width: f64, n: usize) -> Result<Self> {
        Self::simpson(mean - half_width * sd, mean + half_width * sd, n)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    (-(d * d) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

fn scalar_params(p: &GaussianParams<f64>) -> Result<(f64, f64)> {
    if p.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: p.dim(),
        });
    }
    Ok((p.mu()[0], p.sigma()[(0, 0)]))
}

/// A discrete probability measure: points with nonnegative masses summing to 1.
#[derive(Debug, Clone)]
pub struct Measure {
    pub points: Vec<f64>,
    pub mass: Vec<f64>,
}

impl Measure {
    /// Quadrature of `N(mean, var)` on `mean ± half_width·sd` with `n` nodes.
    /// A variance too small to resolve around `mean` becomes a point mass.
    pub fn gaussian(mean: f64, var: f64, half_width: f64, n: usize) -> Result<Self> {
        if !(var >= 0.0) || !mean.is_finite() || !var.is_finite() {
            return Err(Error::InvalidInput(format!("bad 1-D Gaussian ({mean}, {var})")));
        }
        let sd = var.sqrt();
        let cell = 2.0 * half_width * sd / n as f64;
        if sd == 0.0 || cell <= 4.0 * f64::EPSILON * mean.abs().max(f64::MIN_POSITIVE) {
            return Ok(Self {
                points: vec![mean],
                mass: vec![1.0],
            });
        }
        let grid = Grid1D::around(mean, sd, half_width, n)?;
        let mut mass: Vec<f64> = grid
            .nodes()
            .iter()
            .zip(grid.weights())
            .map(|(&x, &w)| w * normal_pdf(x, mean, var))
            .collect();
        let total: f64 = mass.iter().sum();
        for m in &mut mass {
            *m /= total;
        }
        Ok(Self {
            points: grid.nodes,
            mass,
        })
    }

    /// `(1 - λ) a + λ b`.
    pub fn mix(a: Measure, b: Measure, lambda: f64) -> Self {
        let mut points = a.points;
        let mut mass: Vec<f64> = a.mass.into_iter().map(|m| (1.0 - lambda) * m).collect();
        if lambda > 0.0 {
            points.extend(b.points);
            mass.extend(b.mass.into_iter().map(|m| lambda * m));
        }
        Self { points, mass }
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points.iter().zip(&self.mass).map(|(&x, &m)| m * f(x)).sum()
    }
}

/// Quadrature settings shared by the 1-D oracles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSettings {
    pub nodes: usize,
    pub half_width: f64,
    /// How many times the node count may double when the two quantile
    /// definitions disagree.
    pub max_refinements: u32,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            nodes: DEFAULT_NODES,
            half_width: DEFAULT_HALF_WIDTH,
            max_refinements: 3,
        }
    }
}

/// `sup{l : P(H ≥ l) ≥ ρ}` for the law of `H` under a discrete measure.
pub fn direct_quantile(values: &[f64], mass: &[f64], rho: f64) -> f64 {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).expect("NaN objective value"));
    let mut tail = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let v = values[idx[i]];
        while i < idx.len() && values[idx[i]] == v {
            tail += mass[idx[i]];
            i += 1;
        }
        // relative slack absorbs the rounding in the accumulated masses
        if tail >= rho * (1.0 - 1e-12) {
            return v;
        }
    }
    values[idx[idx.len() - 1]]
}

fn expected_psi(values: &[f64], mass: &[f64], gamma: f64, rho: f64) -> f64 {
    values
        .iter()
        .zip(mass)
        .map(|(&h, &m)| m * psi_loss(h, gamma, rho))
        .sum()
}

/// Golden-section search for the minimizer of the convex map `γ ↦ E[ψ(H, γ)]`.
fn minimize_expected_psi(values: &[f64], mass: &[f64], rho: f64) -> f64 {
    let (mut a, mut b) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if a == b {
        return a;
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let tol = 1e-13 * (1.0 + a.abs().max(b.abs()));
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = expected_psi(values, mass, c, rho);
    let mut fd = expected_psi(values, mass, d, rho);
    for _ in 0..200 {
        if b - a <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = expected_psi(values, mass, c, rho);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = expected_psi(values, mass, d, rho);
        }
    }
    0.5 * (a + b)
}

/// Size of one grid cell in objective units near level `level`: the widest
/// jump of `H` between adjacent nodes that straddle it, and the gap between
/// the distinct values bracketing it.
fn level_resolution(points: &[f64], values: &[f64], level: f64) -> f64 {
    let mut res: f64 = 0.0;
    for i in 1..points.len() {
        if points[i] < points[i - 1] {
            continue; // seam between the two halves of a mixture
        }
        let (a, b) = (values[i - 1], values[i]);
        if a.min(b) <= level && level <= a.max(b) {
            res = res.max((a - b).abs());
        }
    }
    let below = values.iter().copied().filter(|&v| v < level).fold(f64::NEG_INFINITY, f64::max);
    let above = values.iter().copied().filter(|&v| v > level).fold(f64::INFINITY, f64::min);
    if below.is_finite() {
        res = res.max(level - below);
    }
    if above.is_finite() {
        res = res.max(above - level);
    }
    res
}

/// Both quantile definitions evaluated on one discretization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileReport {
    /// Minimizer of the expected quantile loss.
    pub by_minimization: f64,
    /// `sup{l : P(H ≥ l) ≥ ρ}`.
    pub direct: f64,
    /// Agreement tolerance in objective units (one grid cell).
    pub resolution: f64,
    pub nodes: usize,
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("rho must lie in (0, 1), got {rho}")))
    }
}

/// Quantile of `H(X)` under the measure built by `measure(n)`, by
/// minimization and by the direct definition. The node count doubles until
/// the two agree within one grid cell.
fn quantile_on<H, M>(h: &H, rho: f64, quad: QuadratureSettings, measure: M) -> Result<(QuantileReport, Measure, Vec<f64>)>
where
    H: Fn(f64) -> f64,
    M: Fn(usize) -> Result<Measure>,
{
    check_rho(rho)?;
    let mut n = quad.nodes;
    let mut last = None;
    for _ in 0..=quad.max_refinements {
        let mu = measure(n)?;
        let values: Vec<f64> = mu.points.iter().map(|&x| h(x)).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("objective is not finite on the quadrature grid".into()));
        }
        let by_min = minimize_expected_psi(&values, &mu.mass, rho);
        let direct = direct_quantile(&values, &mu.mass, rho);
        let resolution = level_resolution(&mu.points, &values, direct) + 1e-12 * (1.0 + direct.abs());
        let report = QuantileReport {
            by_minimization: by_min,
            direct,
            resolution,
            nodes: mu.points.len(),
        };
        if (by_min - direct).abs() <= resolution {
            return Ok((report, mu, values));
        }
        last = Some(report);
        n = 2 * n - 1;
    }
    let r = last.expect("at least one attempt");
    Err(Error::GridTooCoarse(format!(
        "minimizer {} and direct quantile {} differ by more than {} with {} nodes",
        r.by_minimization, r.direct, r.resolution, r.nodes
    )))
}

/// `argmin_γ E_θ[ψ(H(X), γ)]` for a 1-D Gaussian `θ`, checked against the
/// direct quantile definition on the same grid.
pub fn quantile_by_minimization<H: Fn(f64) -> f64>(
    h: H,
    params: &GaussianParams<f64>,
    rho: f64,
    quad: QuadratureSettings,
) -> Result<QuantileReport> {
    let (mean, var) = scalar_params(params)?;
    quantile_on(&h, rho, quad, |n| Measure::gaussian(mean, var, quad.half_width, n)).map(|(r, _, _)| r)
}

/// Settings for [`ideal_ce_step_1d`].
#[derive(Debug, Clone, PartialEq)]
pub struct IdealCeSettings {
    pub rho: f64,
    pub r: f64,
    /// Mixing weight of `initial`; 0 disables the mixture.
    pub lambda: f64,
    pub initial: Option<GaussianParams<f64>>,
    pub quad: QuadratureSettings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdealCeStep {
    pub theta: GaussianParams<f64>,
    /// Threshold used for the step, the `(1 - ρ)`-quantile under the
    /// (mixture) model the step started from.
    pub gamma: f64,
}

fn sampling_measure(
    mean: f64,
    var: f64,
    cfg: &IdealCeSettings,
    n: usize,
) -> Result<Measure> {
    let current = Measure::gaussian(mean, var, cfg.quad.half_width, n)?;
    match (&cfg.initial, cfg.lambda > 0.0) {
        (Some(init), true) => {
            let (m0, v0) = scalar_params(init)?;
            let base = Measure::gaussian(m0, v0, cfg.quad.half_width, n)?;
            Ok(Measure::mix(current, base, cfg.lambda))
        }
        (None, true) => Err(Error::InvalidInput("lambda > 0 needs an initial distribution".into())),
        _ => Ok(current),
    }
}

/// Weighted elite moments `E[g1]/E[g0]` and `E[g2]/E[g0]` on a measure.
fn elite_ratios(mu: &Measure, values: &[f64], gamma: Option<f64>, r: f64) -> Result<(f64, f64)> {
    let shift = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // mirrored nodes can differ in the last bit; treat those as ties
    let gamma = gamma.map(|g| g - 1e-12 * (1.0 + g.abs()));
    let w: Vec<f64> = values
        .iter()
        .zip(&mu.mass)
        .map(|(&h, &m)| {
            if gamma.map_or(true, |g| h >= g) {
                m * (r * (h - shift)).exp()
            } else {
                0.0
            }
        })
        .collect();
    let e0: f64 = w.iter().sum();
    if !(e0 > 1e-300) {
        return Err(Error::ZeroWeights(format!("E[g0] = {e0} after shifting by {shift}")));
    }
    let mean = mu.points.iter().zip(&w).map(|(&x, &wi)| wi * x).sum::<f64>() / e0;
    let var = mu
        .points
        .iter()
        .zip(&w)
        .map(|(&x, &wi)| wi * (x - mean) * (x - mean))
        .sum::<f64>()
        / e0;
    Ok((mean, var))
}

/// One exact-expectation cross-entropy step for a 1-D Gaussian model.
pub fn ideal_ce_step_1d<H: Fn(f64) -> f64>(
    h: H,
    theta: &GaussianParams<f64>,
    cfg: &IdealCeSettings,
) -> Result<IdealCeStep> {
    let (mean, var) = scalar_params(theta)?;
    let (report, mu, values) = quantile_on(&h, cfg.rho, cfg.quad, |n| sampling_measure(mean, var, cfg, n))?;
    let (m1, v1) = elite_ratios(&mu, &values, Some(report.direct), cfg.r)?;
    Ok(IdealCeStep {
        theta: GaussianParams::new(vec![m1], Matrix::from_rows(&[vec![v1]]))?,
        gamma: report.direct,
    })
}

/// The `(1 - ρ)`-quantile of `H` under the sampling law used by the ideal
/// step (mixture when configured).
pub fn model_quantile_1d<H: Fn(f64) -> f64>(h: H, theta: &GaussianParams<f64>, cfg: &IdealCeSettings) -> Result<f64> {
    let (mean, var) = scalar_params(theta)?;
    quantile_on(&h, cfg.rho, cfg.quad, |n| sampling_measure(mean, var, cfg, n)).map(|(r, _, _)| r.direct)
}

/// Fixed-point ratios by quadrature at a given threshold (1-D).
pub fn elite_ratios_1d<H: Fn(f64) -> f64>(
    h: H,
    theta: &GaussianParams<f64>,
    gamma: Option<f64>,
    cfg: &IdealCeSettings,
) -> Result<(f64, f64)> {
    let (mean, var) = scalar_params(theta)?;
    let mu = sampling_measure(mean, var, cfg, cfg.quad.nodes)?;
    let values: Vec<f64> = mu.points.iter().map(|&x| h(x)).collect();
    elite_ratios(&mu, &values, gamma, cfg.r)
}

/// Monte-Carlo estimate of the tracker fixed points with standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointEstimate {
    /// `E[g1]/E[g0]`.
    pub mean: Vec<f64>,
    pub mean_se: Vec<f64>,
    /// `E[g2(·, mean)]/E[g0]`.
    pub second: Matrix<f64>,
    pub second_se: Matrix<f64>,
    /// Number of draws with nonzero weight.
    pub elites: usize,
}

/// Inputs of [`fixed_point_oracle`].
#[derive(Debug, Clone)]
pub struct FixedPointSettings {
    pub lambda: f64,
    /// `None` is `-∞`: every draw is elite.
    pub gamma: Option<f64>,
    /// `r = 0` gives unit weights.
    pub r: f64,
    /// Weights are `exp(r (h - shift))`; `None` uses the sample maximum.
    pub shift: Option<f64>,
    pub n_samples: usize,
}

/// Ratio estimates `Ȳ / X̄` with delta-method standard errors
/// `sd(Y - R X) / (√n X̄)`.
pub fn fixed_point_oracle<H: Fn(&[f64]) -> f64>(
    h: H,
    theta: &GaussianParams<f64>,
    theta0: &GaussianParams<f64>,
    cfg: &FixedPointSettings,
    rng: &mut RngState,
) -> Result<FixedPointEstimate> {
    if theta.dim() != theta0.dim() {
        return Err(Error::DimensionMismatch {
            expected: theta.dim(),
            got: theta0.dim(),
        });
    }
    if cfg.n_samples < 2 {
        return Err(Error::InvalidInput("need at least two samples".into()));
    }
    if !(cfg.r >= 0.0) || !(0.0..1.0).contains(&cfg.lambda) {
        return Err(Error::InvalidInput(format!("need r >= 0 and lambda in [0, 1), got {} and {}", cfg.r, cfg.lambda)));
    }
    let m = theta.dim();
    let cur = theta.sampler()?;
    let init = theta0.sampler()?;
    let n = cfg.n_samples;
    let mut xs = Vec::with_capacity(n);
    let mut hs = Vec::with_capacity(n);
    for _ in 0..n {
        let (x, _) = draw_mixture(&cur, &init, cfg.lambda, rng);
        hs.push(h(&x));
        xs.push(x);
    }
    let shift = cfg
        .shift
        .unwrap_or_else(|| hs.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let g0: Vec<f64> = hs
        .iter()
        .map(|&v| {
            if cfg.gamma.map_or(true, |g| v >= g) {
                if cfg.r == 0.0 {
                    1.0
                } else {
                    (cfg.r * (v - shift)).exp()
                }
            } else {
                0.0
            }
        })
        .collect();
    let elites = g0.iter().filter(|&&w| w > 0.0).count();
    let nf = n as f64;
    let mean_g0 = g0.iter().sum::<f64>() / nf;
    if !(mean_g0 > 0.0) || !mean_g0.is_finite() {
        return Err(Error::ZeroWeights(format!("no draw out of {n} reached the threshold")));
    }

    // ratio estimate and delta-method SE for a family of numerators y_k(x)
    let ratio = |y: &dyn Fn(usize) -> f64| -> (f64, f64) {
        let r = (0..n).map(|i| y(i)).sum::<f64>() / nf / mean_g0;
        let resid: Vec<f64> = (0..n).map(|i| y(i) - r * g0[i]).collect();
        let rm = resid.iter().sum::<f64>() / nf;
        let var = resid.iter().map(|e| (e - rm) * (e - rm)).sum::<f64>() / (nf - 1.0);
        (r, (var / nf).sqrt() / mean_g0)
    };

    let mut mean = vec![0.0; m];
    let mut mean_se = vec![0.0; m];
    for j in 0..m {
        let (r, se) = ratio(&|i| g0[i] * xs[i][j]);
        mean[j] = r;
        mean_se[j] = se;
    }
    let mut second = Matrix::zeros(m, m);
    let mut second_se = Matrix::zeros(m, m);
    for a in 0..m {
        for b in a..m {
            let (r, se) = ratio(&|i| g0[i] * (xs[i][a] - mean[a]) * (xs[i][b] - mean[b]));
            second[(a, b)] = r;
            second[(b, a)] = r;
            second_se[(a, b)] = se;
            second_se[(b, a)] = se;
        }
    }
    Ok(FixedPointEstimate {
        mean,
        mean_se,
        second,
        second_se,
        elites,
    })
}
