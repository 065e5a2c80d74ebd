//! Exact reference solvers: exhaustive search and the Held-Karp bitmask
//! dynamic program for TSP, plus the analytic optimum of the continuous
//! benchmarks.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problems::ContinuousProblem;
use crate::scalar::Scalar;
use crate::tsp::{Tour, TspInstance};

pub const BRUTE_FORCE_MAX_CITIES: usize = 11;
pub const HELD_KARP_MAX_CITIES: usize = 20;

/// Relative slack within which a length counts as equal to the optimum.
pub const OPTIMUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("{method:?} supports at most {max} cities, got {n}")]
    TooLarge {
        method: OracleMethod,
        n: usize,
        max: usize,
    },
    #[error("found length {found} is below the optimum {optimal}: oracle or evaluation bug")]
    OracleViolation { found: f64, optimal: f64 },
    #[error("optimal length must be positive, got {0}")]
    NonPositiveOptimum(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMethod {
    BruteForce,
    HeldKarp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult<T> {
    pub optimal_length: T,
    /// Canonical orientation (see [`Tour::canonical`]).
    pub optimal_tour: Tour,
    pub method: OracleMethod,
}

/// Exhaustive search over the (n-1)!/2 distinct cycles.
pub fn brute_force_tsp<T: Scalar>(instance: &TspInstance<T>) -> Result<OracleResult<T>, OracleError> {
    let n = instance.len();
    if n > BRUTE_FORCE_MAX_CITIES {
        return Err(OracleError::TooLarge {
            method: OracleMethod::BruteForce,
            n,
            max: BRUTE_FORCE_MAX_CITIES,
        });
    }
    let mut search = Exhaustive {
        instance,
        path: vec![0],
        used: vec![false; n],
        best: T::infinity(),
        best_path: Vec::new(),
    };
    search.used[0] = true;
    search.extend(T::zero());
    let optimal_tour = Tour::new(search.best_path, n).expect("search yields a permutation");
    Ok(OracleResult {
        optimal_length: search.best,
        optimal_tour,
        method: OracleMethod::BruteForce,
    })
}

struct Exhaustive<'a, T: Scalar> {
    instance: &'a TspInstance<T>,
    path: Vec<usize>,
    used: Vec<bool>,
    best: T,
    best_path: Vec<usize>,
}

impl<T: Scalar> Exhaustive<'_, T> {
    // Partial sums accumulate in path order so the final value is
    // bit-identical to `TspInstance::tour_length` of the same order.
    fn extend(&mut self, partial: T) {
        let n = self.used.len();
        let last = *self.path.last().unwrap();
        if self.path.len() == n {
            // Each cycle appears twice; keep the orientation with path[1] < path[n-1].
            if self.path[1] < self.path[n - 1] {
                let total = partial + self.instance.distance(last, 0);
                if total < self.best {
                    self.best = total;
                    self.best_path.clone_from(&self.path);
                }
            }
            return;
        }
        for next in 1..n {
            if self.used[next] {
                continue;
            }
            self.used[next] = true;
            self.path.push(next);
            self.extend(partial + self.instance.distance(last, next));
            self.path.pop();
            self.used[next] = false;
        }
    }
}

/// Held-Karp: `O(n² 2ⁿ)` time, `O(n 2ⁿ)` memory.
pub fn held_karp_tsp<T: Scalar>(instance: &TspInstance<T>) -> Result<OracleResult<T>, OracleError> {
    let n = instance.len();
    if n > HELD_KARP_MAX_CITIES {
        return Err(OracleError::TooLarge {
            method: OracleMethod::HeldKarp,
            n,
            max: HELD_KARP_MAX_CITIES,
        });
    }
    // City 0 is the fixed start; cities 1..n map to bits 0..m.
    let m = n - 1;
    let full = (1usize << m) - 1;
    let mut cost = vec![T::infinity(); (1usize << m) * m];
    let mut parent = vec![u8::MAX; (1usize << m) * m];
    for j in 0..m {
        cost[(1 << j) * m + j] = instance.distance(0, j + 1);
    }
    for mask in 1..=full {
        for j in 0..m {
            if mask & (1 << j) == 0 {
                continue;
            }
            let here = cost[mask * m + j];
            if !here.is_finite() {
                continue;
            }
            for k in 0..m {
                if mask & (1 << k) != 0 {
                    continue;
                }
                let next = mask | (1 << k);
                let cand = here + instance.distance(j + 1, k + 1);
                let slot = next * m + k;
                if cand < cost[slot] {
                    cost[slot] = cand;
                    parent[slot] = j as u8;
                }
            }
        }
    }

    let mut last = 0;
    let mut best = T::infinity();
    for j in 0..m {
        let total = cost[full * m + j] + instance.distance(j + 1, 0);
        if total < best {
            best = total;
            last = j;
        }
    }

    let mut order = Vec::with_capacity(n);
    let mut mask = full;
    let mut j = last;
    loop {
        order.push(j + 1);
        let p = parent[mask * m + j];
        mask &= !(1 << j);
        if p == u8::MAX {
            break;
        }
        j = p as usize;
    }
    order.push(0);
    order.reverse();
    let tour = Tour::new(order, n).expect("reconstruction yields a permutation").canonical();
    // Re-sum along the canonical orientation so the reported length does not
    // depend on the DP's summation order.
    let optimal_length = instance.cycle_length(tour.order());
    Ok(OracleResult {
        optimal_length,
        optimal_tour: tour,
        method: OracleMethod::HeldKarp,
    })
}

/// Exact optimum using whichever oracle covers the instance size.
pub fn exact_tsp<T: Scalar>(instance: &TspInstance<T>) -> Result<OracleResult<T>, OracleError> {
    held_karp_tsp(instance)
}

/// Percentage excess of `found` over `optimal`.
pub fn optimality_gap<T: Scalar>(found: T, optimal: T) -> Result<T, OracleError> {
    if !(optimal > T::zero()) {
        return Err(OracleError::NonPositiveOptimum(optimal.as_f64()));
    }
    let tolerance = T::lit(OPTIMUM_TOLERANCE) * optimal.max(T::one());
    if found < optimal - tolerance {
        return Err(OracleError::OracleViolation {
            found: found.as_f64(),
            optimal: optimal.as_f64(),
        });
    }
    // The same cycle summed from another start differs by rounding only.
    if (found - optimal).abs() <= tolerance {
        return Ok(T::zero());
    }
    Ok(T::lit(100.0) * (found - optimal) / optimal)
}

/// Minimum value of a (possibly shifted) benchmark function: 0 for all five,
/// attained at [`ContinuousProblem::optimum_point`].
pub fn continuous_reference<T: Scalar>(_problem: &ContinuousProblem<T>) -> T {
    T::zero()
}
