//! Black-box objectives (maximization) and the benchmark suite.
//!
//! Every benchmark is written as a function to be *maximized*; the global
//! maxima are recorded as [`KnownOptimum`]s.
//!
//! Deviations from the commonly printed forms:
//! - Rosenbrock uses the chained sum `Σ_{i<m} 100(x_{i+1} - x_i²)² + (1 - x_i)²`,
//!   scaled by `-1e-4`, so that the all-ones point attains 0.
//! - Bukin keeps its `-20` offset, so its maximum at `(-10, 1)` is `-20`, and
//!   the square root is taken of `|x₂ - 0.01 x₁²|` to stay real valued.
//! - Trigonometric subtracts `(x_i - 0.9)²` (sign of the quadratic term
//!   matching the standard function), making `(0.9, …, 0.9)` a maximum.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Benchmark {
    Griewank,
    Levy,
    Trigonometric,
    Rastrigin,
    Qing,
    Bukin,
    Salomon,
    Rosenbrock,
    Plateau,
    Pathological,
}

impl Benchmark {
    pub const ALL: [Benchmark; 10] = [
        Benchmark::Griewank,
        Benchmark::Levy,
        Benchmark::Trigonometric,
        Benchmark::Rastrigin,
        Benchmark::Qing,
        Benchmark::Bukin,
        Benchmark::Salomon,
        Benchmark::Rosenbrock,
        Benchmark::Plateau,
        Benchmark::Pathological,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Benchmark::Griewank => "griewank",
            Benchmark::Levy => "levy",
            Benchmark::Trigonometric => "trigonometric",
            Benchmark::Rastrigin => "rastrigin",
            Benchmark::Qing => "qing",
            Benchmark::Bukin => "bukin",
            Benchmark::Salomon => "salomon",
            Benchmark::Rosenbrock => "rosenbrock",
            Benchmark::Plateau => "plateau",
            Benchmark::Pathological => "pathological",
        }
    }

    /// Dimension used in the reference experiments.
    pub fn default_dim(self) -> usize {
        match self {
            Benchmark::Griewank => 200,
            Benchmark::Levy => 50,
            Benchmark::Trigonometric => 30,
            Benchmark::Rastrigin => 30,
            Benchmark::Qing => 30,
            Benchmark::Bukin => 2,
            Benchmark::Salomon => 20,
            Benchmark::Rosenbrock => 10,
            Benchmark::Plateau => 100,
            Benchmark::Pathological => 50,
        }
    }

    fn check_dim(self, m: usize) -> Result<()> {
        let ok = match self {
            Benchmark::Bukin => m == 2,
            Benchmark::Rosenbrock | Benchmark::Pathological => m >= 2,
            _ => m >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "benchmark `{}` does not support dimension {m}",
                self.id()
            )))
        }
    }

    /// Location of the global maximum.
    pub fn optimum_location<T: Scalar>(self, m: usize) -> Vec<T> {
        match self {
            Benchmark::Levy | Benchmark::Rosenbrock => vec![T::one(); m],
            Benchmark::Trigonometric => vec![T::of(0.9); m],
            Benchmark::Qing => (1..=m).map(|i| T::of_usize(i).sqrt()).collect(),
            Benchmark::Bukin => vec![T::of(-10.0), T::one()],
            _ => vec![T::zero(); m],
        }
    }

    /// Maximum value of the implemented formula.
    pub fn optimum_value<T: Scalar>(self) -> T {
        match self {
            Benchmark::Levy | Benchmark::Trigonometric => -T::one(),
            Benchmark::Plateau => T::of(-3.0),
            Benchmark::Bukin => T::of(-20.0),
            _ => T::zero(),
        }
    }

    /// Analytic envelope on the value over all of `ℝ^m`.
    pub fn value_bounds<T: Scalar>(self, m: usize) -> ValueBounds<T> {
        let upper = Some(self.optimum_value());
        let lower = match self {
            Benchmark::Pathological => Some(T::of(-0.1) * T::of_usize(m - 1)),
            _ => None,
        };
        ValueBounds { lower, upper }
    }

    pub fn value<T: Scalar>(self, x: &[T]) -> T {
        let c = T::of;
        let pi = T::PI();
        match self {
            Benchmark::Griewank => {
                let sq: T = x.iter().map(|&v| v * v).sum();
                let prod = x
                    .iter()
                    .enumerate()
                    .fold(T::one(), |acc, (i, &v)| acc * (v / T::of_usize(i + 1).sqrt()).cos());
                -T::one() - sq / c(4000.0) + prod
            }
            Benchmark::Levy => {
                let m = x.len();
                let y: Vec<T> = x.iter().map(|&v| T::one() + (v - T::one()) / c(4.0)).collect();
                let sin2 = |v: T| v.sin() * v.sin();
                let ym = y[m - 1] - T::one();
                let tail = ym * ym * (T::one() + sin2(c(2.0) * pi * y[m - 1]));
                let body: T = y
                    .iter()
                    .map(|&yi| {
                        let d = yi - T::one();
                        d * d * (T::one() + c(10.0) * sin2(pi * yi + T::one()))
                    })
                    .sum();
                -T::one() - sin2(pi * y[0]) - tail - body
            }
            Benchmark::Trigonometric => {
                let s: T = x
                    .iter()
                    .map(|&v| {
                        let d2 = (v - c(0.9)) * (v - c(0.9));
                        let a = (c(7.0) * d2).sin();
                        let b = (c(14.0) * d2).sin();
                        c(8.0) * a * a + c(6.0) * b * b + d2
                    })
                    .sum();
                -T::one() - s
            }
            Benchmark::Rastrigin => {
                let s: T = x
                    .iter()
                    .map(|&v| v * v - c(10.0) * (c(2.0) * pi * v).cos())
                    .sum();
                -s - c(10.0) * T::of_usize(x.len())
            }
            Benchmark::Qing => {
                let s: T = x
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        let d = v * v - T::of_usize(i + 1);
                        d * d
                    })
                    .sum();
                -s
            }
            Benchmark::Bukin => {
                let (x1, x2) = (x[0], x[1]);
                -c(100.0) * (x2 - c(0.01) * x1 * x1).abs().sqrt()
                    - c(0.01) * (x1 + c(10.0)).abs()
                    - c(20.0)
            }
            Benchmark::Salomon => {
                let norm = x.iter().map(|&v| v * v).sum::<T>().sqrt();
                c(10.0) * (-T::one() + (c(2.0) * pi * norm).cos() - c(0.1) * norm)
            }
            Benchmark::Rosenbrock => {
                let s: T = x
                    .windows(2)
                    .map(|w| {
                        let a = w[1] - w[0] * w[0];
                        let b = T::one() - w[0];
                        c(100.0) * a * a + b * b
                    })
                    .sum();
                -c(1e-4) * s
            }
            Benchmark::Plateau => {
                let s: T = x.iter().map(|&v| v.abs().floor()).sum();
                -c(0.1) * (c(30.0) + s)
            }
            Benchmark::Pathological => {
                let s: T = x
                    .windows(2)
                    .map(|w| {
                        let r = (c(100.0) * w[0] * w[0] + w[1] * w[1]).sqrt().sin();
                        let d = w[0] - w[1];
                        let d2 = d * d;
                        (r * r - c(0.5)) / (c(0.001) * d2 * d2 + T::one()) + c(0.5)
                    })
                    .sum();
                -c(0.1) * s
            }
        }
    }
}

impl FromStr for Benchmark {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Benchmark::ALL
            .into_iter()
            .find(|b| b.id() == lower)
            .ok_or_else(|| Error::UnknownBenchmark(s.to_string()))
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Optional envelope `[H_l, H_u]` on objective values.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ValueBounds<T> {
    pub lower: Option<T>,
    pub upper: Option<T>,
}

impl<T: Scalar> ValueBounds<T> {
    pub fn none() -> Self {
        Self {
            lower: None,
            upper: None,
        }
    }

    pub fn is_declared(&self) -> bool {
        self.lower.is_some() || self.upper.is_some()
    }

    pub fn contains(&self, h: T) -> bool {
        self.lower.map_or(true, |l| h >= l) && self.upper.map_or(true, |u| h <= u)
    }

    /// Clamp into `[H_l - 1, H_u + 1]`, each side only if declared.
    pub fn project(&self, v: T) -> T {
        let mut v = v;
        if let Some(l) = self.lower {
            v = v.max(l - T::one());
        }
        if let Some(u) = self.upper {
            v = v.min(u + T::one());
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnownOptimum<T> {
    pub x: Vec<T>,
    pub value: T,
}

type CustomFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;

#[derive(Clone)]
enum Kind<T> {
    Bench(Benchmark),
    Triangle { delta: T },
    Custom(CustomFn<T>),
}

/// An objective with identity, dimension, optional value bounds and an
/// evaluation counter.
#[derive(Clone)]
pub struct ObjectiveFunction<T> {
    id: String,
    dim: usize,
    kind: Kind<T>,
    bounds: ValueBounds<T>,
    known_optimum: Option<KnownOptimum<T>>,
    evals: u64,
}

impl<T: Scalar> fmt::Debug for ObjectiveFunction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObjectiveFunction")
            .field("id", &self.id)
            .field("dim", &self.dim)
            .field("bounds", &self.bounds)
            .field("evals", &self.evals)
            .finish()
    }
}

impl<T: Scalar> ObjectiveFunction<T> {
    /// Wraps an arbitrary closure. No bounds or optimum are declared.
    pub fn custom(
        id: impl Into<String>,
        dim: usize,
        f: impl Fn(&[T]) -> T + Send + Sync + 'static,
    ) -> Self {
        Self {
            id: id.into(),
            dim,
            kind: Kind::Custom(Arc::new(f)),
            bounds: ValueBounds::none(),
            known_optimum: None,
            evals: 0,
        }
    }

    pub fn with_bounds(mut self, bounds: ValueBounds<T>) -> Self {
        self.bounds = bounds;
        self
    }

    pub fn with_known_optimum(mut self, x: Vec<T>, value: T) -> Self {
        self.known_optimum = Some(KnownOptimum { x, value });
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bounds(&self) -> &ValueBounds<T> {
        &self.bounds
    }

    pub fn known_optimum(&self) -> Option<&KnownOptimum<T>> {
        self.known_optimum.as_ref()
    }

    pub fn evaluations(&self) -> u64 {
        self.evals
    }

    pub fn reset_counter(&mut self) {
        self.evals = 0;
    }

    /// Evaluates `H(x)` and charges one evaluation.
    pub fn evaluate(&mut self, x: &[T]) -> Result<T> {
        self.check_input(x)?;
        self.evals += 1;
        Ok(self.raw(x))
    }

    /// Evaluates without charging the counter. Used for reporting `H(μ_t)`,
    /// which is bookkeeping rather than part of the search.
    pub fn peek(&self, x: &[T]) -> Result<T> {
        self.check_input(x)?;
        Ok(self.raw(x))
    }

    fn check_input(&self, x: &[T]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "component {i} of the evaluation point is not finite"
            )));
        }
        Ok(())
    }

    fn raw(&self, x: &[T]) -> T {
        match &self.kind {
            Kind::Bench(b) => b.value(x),
            Kind::Triangle { delta } => triangle(*delta, x[0]),
            Kind::Custom(f) => f(x),
        }
    }
}

fn triangle<T: Scalar>(delta: T, x: T) -> T {
    let three = T::of(3.0);
    if x < -delta || x > delta {
        T::zero()
    } else if x <= T::zero() {
        three / delta * x + three
    } else {
        -three / delta * x + three
    }
}

/// Builds benchmark `name` in dimension `m`.
pub fn make_benchmark<T: Scalar>(name: &str, m: usize) -> Result<ObjectiveFunction<T>> {
    let bench: Benchmark = name.parse()?;
    bench.check_dim(m)?;
    Ok(ObjectiveFunction {
        id: bench.id().to_string(),
        dim: m,
        kind: Kind::Bench(bench),
        bounds: bench.value_bounds(m),
        known_optimum: Some(KnownOptimum {
            x: bench.optimum_location(m),
            value: bench.optimum_value(),
        }),
        evals: 0,
    })
}

/// One-dimensional triangle: 0 outside `[-δ, δ]`, apex 3 at the origin.
pub fn make_triangle_example<T: Scalar>(delta: T) -> Result<ObjectiveFunction<T>> {
    if !(delta > T::zero()) || !delta.is_finite() {
        return Err(Error::InvalidInput(format!(
            "triangle half-width must be positive, got {delta}"
        )));
    }
    Ok(ObjectiveFunction {
        id: "triangle".to_string(),
        dim: 1,
        kind: Kind::Triangle { delta },
        bounds: ValueBounds {
            lower: Some(T::zero()),
            upper: Some(T::of(3.0)),
        },
        known_optimum: Some(KnownOptimum {
            x: vec![T::zero()],
            value: T::of(3.0),
        }),
        evals: 0,
    })
}
