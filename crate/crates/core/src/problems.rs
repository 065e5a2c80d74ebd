//! Continuous benchmark functions and the input-shift wrapper.
//!
//! All functions are minimized and use their common textbook forms:
//! Ackley (a = 20, b = 0.2, c = 2π), Griewank (product over cos(x_i / √i)),
//! Rastrigin (A = 10), Rosenbrock (100 and 1 coefficients) and Sphere.
//! A shifted problem evaluates `f(x - shift)`, so its optimum moves by `+shift`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::seed::{rng_from_seed, RunRng};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("dimension mismatch: problem has {expected} variables, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("dimension must be positive")]
    ZeroDimension,
    #[error("invalid bounds: lower {lower} must be below upper {upper}")]
    InvalidBounds { lower: f64, upper: f64 },
    #[error("shift has {got} components, problem has {expected} variables")]
    ShiftLength { expected: usize, got: usize },
    #[error("shift interval [{low}, {high}] is empty")]
    ShiftInterval { low: f64, high: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionKind {
    Ackley,
    Griewank,
    Rastrigin,
    Rosenbrock,
    Sphere,
}

impl FunctionKind {
    pub const ALL: [FunctionKind; 5] = [
        FunctionKind::Ackley,
        FunctionKind::Griewank,
        FunctionKind::Rastrigin,
        FunctionKind::Rosenbrock,
        FunctionKind::Sphere,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FunctionKind::Ackley => "ackley",
            FunctionKind::Griewank => "griewank",
            FunctionKind::Rastrigin => "rastrigin",
            FunctionKind::Rosenbrock => "rosenbrock",
            FunctionKind::Sphere => "sphere",
        }
    }

    /// Standard search box used when a config does not override it.
    pub fn default_bounds(self) -> (f64, f64) {
        match self {
            FunctionKind::Ackley => (-32.768, 32.768),
            FunctionKind::Griewank => (-600.0, 600.0),
            FunctionKind::Rastrigin => (-5.12, 5.12),
            FunctionKind::Rosenbrock => (-5.0, 10.0),
            FunctionKind::Sphere => (-5.12, 5.12),
        }
    }

    /// Coordinate value of the unshifted global minimizer (all coordinates equal).
    pub fn optimum_coordinate(self) -> f64 {
        match self {
            FunctionKind::Rosenbrock => 1.0,
            _ => 0.0,
        }
    }

    /// Rosenbrock's valley is not symmetric around its minimizer, so only
    /// the magnitude of a shift does not characterize the problem variant.
    pub fn is_symmetric(self) -> bool {
        !matches!(self, FunctionKind::Rosenbrock)
    }

    /// Evaluates the unshifted function at `z`.
    pub fn eval<T: Scalar>(self, z: &[T]) -> T {
        match self {
            FunctionKind::Sphere => z.iter().map(|&v| v * v).sum(),
            FunctionKind::Rastrigin => {
                let a = T::lit(10.0);
                let tau = T::TAU();
                a * T::lit(z.len() as f64)
                    + z.iter().map(|&v| v * v - a * (tau * v).cos()).sum::<T>()
            }
            FunctionKind::Ackley => {
                let n = T::lit(z.len() as f64);
                let tau = T::TAU();
                let sq = z.iter().map(|&v| v * v).sum::<T>() / n;
                let cs = z.iter().map(|&v| (tau * v).cos()).sum::<T>() / n;
                -T::lit(20.0) * (-T::lit(0.2) * sq.sqrt()).exp() - cs.exp()
                    + T::lit(20.0)
                    + T::E()
            }
            FunctionKind::Griewank => {
                let sum = z.iter().map(|&v| v * v).sum::<T>() / T::lit(4000.0);
                let prod = z.iter().enumerate().fold(T::one(), |acc, (i, &v)| {
                    acc * (v / T::lit((i + 1) as f64).sqrt()).cos()
                });
                T::one() + sum - prod
            }
            FunctionKind::Rosenbrock => z
                .windows(2)
                .map(|w| {
                    let a = w[1] - w[0] * w[0];
                    let b = T::one() - w[0];
                    T::lit(100.0) * a * a + b * b
                })
                .sum(),
        }
    }
}

impl fmt::Display for FunctionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FunctionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FunctionKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown function '{s}'"))
    }
}

/// A named benchmark function with its dimension, search box and input shift.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousProblem<T> {
    kind: FunctionKind,
    lower: T,
    upper: T,
    shift: Vec<T>,
}

impl<T: Scalar> ContinuousProblem<T> {
    /// Unshifted problem with the function's default bounds.
    pub fn new(kind: FunctionKind, dimension: usize) -> Result<Self, ProblemError> {
        if dimension == 0 {
            return Err(ProblemError::ZeroDimension);
        }
        let (lo, hi) = kind.default_bounds();
        Ok(Self {
            kind,
            lower: T::lit(lo),
            upper: T::lit(hi),
            shift: vec![T::zero(); dimension],
        })
    }

    pub fn with_bounds(mut self, lower: T, upper: T) -> Result<Self, ProblemError> {
        if !(lower < upper) {
            return Err(ProblemError::InvalidBounds {
                lower: lower.as_f64(),
                upper: upper.as_f64(),
            });
        }
        self.lower = lower;
        self.upper = upper;
        Ok(self)
    }

    pub fn with_shift(mut self, shift: Vec<T>) -> Result<Self, ProblemError> {
        if shift.len() != self.dimension() {
            return Err(ProblemError::ShiftLength {
                expected: self.dimension(),
                got: shift.len(),
            });
        }
        self.shift = shift;
        Ok(self)
    }

    /// Copy with shift components drawn uniformly from `[low, high]`.
    pub fn make_shifted(&self, seed: u64, low: T, high: T) -> Result<Self, ProblemError> {
        if !(low <= high) {
            return Err(ProblemError::ShiftInterval {
                low: low.as_f64(),
                high: high.as_f64(),
            });
        }
        let mut rng = rng_from_seed(seed);
        let (lo, hi) = (low.as_f64(), high.as_f64());
        let shift = (0..self.dimension())
            .map(|_| T::lit(rng.random_range(lo..=hi)))
            .collect();
        Ok(Self {
            shift,
            ..self.clone()
        })
    }

    pub fn kind(&self) -> FunctionKind {
        self.kind
    }

    pub fn dimension(&self) -> usize {
        self.shift.len()
    }

    pub fn lower(&self) -> T {
        self.lower
    }

    pub fn upper(&self) -> T {
        self.upper
    }

    pub fn shift(&self) -> &[T] {
        &self.shift
    }

    pub fn is_shifted(&self) -> bool {
        self.shift.iter().any(|s| !s.is_zero())
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.len() == self.dimension() && x.iter().all(|&v| v >= self.lower && v <= self.upper)
    }

    /// `f(x - shift)`; lower is better.
    pub fn evaluate(&self, x: &[T]) -> Result<T, ProblemError> {
        if x.len() != self.dimension() {
            return Err(ProblemError::Dimension {
                expected: self.dimension(),
                got: x.len(),
            });
        }
        let z: Vec<T> = x.iter().zip(&self.shift).map(|(&a, &s)| a - s).collect();
        Ok(self.kind.eval(&z))
    }

    /// The global minimizer: the unshifted optimum translated by the shift.
    pub fn optimum_point(&self) -> Vec<T> {
        let c = T::lit(self.kind.optimum_coordinate());
        self.shift.iter().map(|&s| s + c).collect()
    }

    /// Uniform sample inside the search box.
    pub fn random_solution(&self, rng: &mut RunRng) -> Vec<T> {
        let (lo, hi) = (self.lower.as_f64(), self.upper.as_f64());
        (0..self.dimension())
            .map(|_| T::lit(rng.random_range(lo..=hi)))
            .collect()
    }

    /// Short identifier such as `sphere-2d`.
    pub fn id(&self) -> String {
        format!("{}-{}d", self.kind, self.dimension())
    }
}

/// Shift declaration in a config file: an explicit vector or a seeded draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ShiftSpec {
    Explicit(Vec<f64>),
    Random {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
        low: f64,
        high: f64,
    },
}

/// Serializable problem description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub function: FunctionKind,
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<ShiftSpec>,
}

fn default_dimension() -> usize {
    2
}

impl ProblemSpec {
    pub fn new(function: FunctionKind, dimension: usize) -> Self {
        Self {
            function,
            dimension,
            bounds: None,
            shift: None,
        }
    }

    /// Builds the problem; `default_seed` is used for seeded shifts without
    /// an explicit seed.
    pub fn resolve(&self, default_seed: u64) -> Result<ContinuousProblem<f64>, ProblemError> {
        let mut p = ContinuousProblem::new(self.function, self.dimension)?;
        if let Some([lo, hi]) = self.bounds {
            p = p.with_bounds(lo, hi)?;
        }
        match &self.shift {
            None => Ok(p),
            Some(ShiftSpec::Explicit(v)) => p.with_shift(v.clone()),
            Some(ShiftSpec::Random { seed, low, high }) => {
                p.make_shifted(seed.unwrap_or(default_seed), *low, *high)
            }
        }
    }

    /// Spec with the resolved shift written out explicitly.
    pub fn resolved_spec(&self, default_seed: u64) -> Result<ProblemSpec, ProblemError> {
        let p = self.resolve(default_seed)?;
        Ok(ProblemSpec {
            function: self.function,
            dimension: self.dimension,
            bounds: Some([p.lower(), p.upper()]),
            shift: Some(ShiftSpec::Explicit(p.shift().to_vec())),
        })
    }
}
