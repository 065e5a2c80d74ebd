use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{Backend, BackendError, Payload, ProblemContext, QueryContext, RunKey, Session};
use crate::prompting::{solution_tag, trace_tag};
use crate::seed::{rng_from_seed, RunRng};

/// A fresh uniform sample: a point in the box or a random permutation.
pub(crate) fn uniform_reply(problem: &ProblemContext, rng: &mut RunRng) -> String {
    match problem {
        ProblemContext::Continuous {
            dimension,
            lower,
            upper,
            ..
        } => {
            let x: Vec<f64> = (0..*dimension)
                .map(|_| rng.random_range(*lower..=*upper))
                .collect();
            solution_tag(&x)
        }
        ProblemContext::Tsp { n_cities, .. } => {
            let mut order: Vec<usize> = (0..*n_cities).collect();
            order.shuffle(rng);
            trace_tag(&order)
        }
    }
}

/// Ignores the history and proposes uniform random solutions.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomSearchBackend;

struct RandomSearchSession {
    rng: RunRng,
}

impl Backend for RandomSearchBackend {
    fn name(&self) -> String {
        "random_search".into()
    }

    fn open_session(&self, run: &RunKey) -> Result<Box<dyn Session + '_>, BackendError> {
        Ok(Box::new(RandomSearchSession {
            rng: rng_from_seed(run.seed),
        }))
    }
}

impl Session for RandomSearchSession {
    fn generate(&mut self, _prompt: &str, ctx: &QueryContext<'_>) -> Result<String, BackendError> {
        Ok(uniform_reply(ctx.problem, &mut self.rng))
    }
}

/// Perturbs the archive best: Gaussian noise clamped to the box for
/// vectors, a random segment reversal (2-opt move) for tours.
#[derive(Debug, Clone)]
pub struct HillClimbBackend {
    noise: Normal<f64>,
}

impl HillClimbBackend {
    pub fn new(sigma: f64) -> Result<Self, BackendError> {
        let noise = Normal::new(0.0, sigma)
            .ok()
            .filter(|_| sigma > 0.0)
            .ok_or_else(|| BackendError::Config(format!("sigma must be positive, got {sigma}")))?;
        Ok(Self { noise })
    }

    pub fn sigma(&self) -> f64 {
        self.noise.std_dev()
    }
}

impl Backend for HillClimbBackend {
    fn name(&self) -> String {
        format!("hill_climb(sigma={})", self.sigma())
    }

    fn open_session(&self, run: &RunKey) -> Result<Box<dyn Session + '_>, BackendError> {
        Ok(Box::new(HillClimbSession {
            noise: self.noise,
            rng: rng_from_seed(run.seed),
        }))
    }
}

struct HillClimbSession {
    noise: Normal<f64>,
    rng: RunRng,
}

impl Session for HillClimbSession {
    fn generate(&mut self, _prompt: &str, ctx: &QueryContext<'_>) -> Result<String, BackendError> {
        let Some(best) = ctx.best() else {
            return Ok(uniform_reply(ctx.problem, &mut self.rng));
        };
        match (best, ctx.problem) {
            (Payload::Vector(v), ProblemContext::Continuous { lower, upper, .. }) => {
                let x: Vec<f64> = v
                    .iter()
                    .map(|&xi| (xi + self.noise.sample(&mut self.rng)).clamp(*lower, *upper))
                    .collect();
                Ok(solution_tag(&x))
            }
            (Payload::Tour(t), ProblemContext::Tsp { .. }) => {
                let mut order = t.clone();
                if order.len() >= 3 {
                    let i = self.rng.random_range(1..order.len() - 1);
                    let j = self.rng.random_range(i + 1..order.len());
                    order[i..=j].reverse();
                }
                Ok(trace_tag(&order))
            }
            _ => Err(BackendError::Unsupported(
                "history payload does not match the problem".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parsing::{parse_solution, parse_trace};

    fn sphere_ctx() -> ProblemContext {
        ProblemContext::Continuous {
            dimension: 2,
            lower: -5.12,
            upper: 5.12,
            display_digits: None,
            optimum: vec![0.0, 0.0],
        }
    }

    #[test]
    fn random_search_stays_in_bounds() {
        let problem = sphere_ctx();
        let ctx = QueryContext { problem: &problem, history: &[] };
        let mut s = RandomSearchBackend.open_session(&RunKey::new("r", 1)).unwrap();
        for _ in 0..200 {
            let r = s.generate("p", &ctx).unwrap();
            let x = parse_solution::<f64>(&r, 2, -5.12, 5.12).unwrap();
            assert!(x.iter().all(|v| (-5.12..=5.12).contains(v)));
        }
        let tsp = ProblemContext::Tsp { n_cities: 9, displayed: None, optimal_tour: None };
        let ctx = QueryContext { problem: &tsp, history: &[] };
        assert!(parse_trace(&s.generate("p", &ctx).unwrap(), 9).is_ok());
    }

    #[test]
    fn hill_climb_moves_near_best() {
        let problem = sphere_ctx();
        let history = vec![(Payload::Vector(vec![5.1, 0.0]), 26.01)];
        let ctx = QueryContext { problem: &problem, history: &history };
        let hc = HillClimbBackend::new(0.1).unwrap();
        let mut s = hc.open_session(&RunKey::new("h", 2)).unwrap();
        for _ in 0..100 {
            let x = parse_solution::<f64>(&s.generate("p", &ctx).unwrap(), 2, -5.12, 5.12).unwrap();
            assert!((x[0] - 5.1).abs() < 1.0 && x[1].abs() < 1.0);
        }
        let tsp = ProblemContext::Tsp { n_cities: 6, displayed: None, optimal_tour: None };
        let history = vec![(Payload::Tour(vec![0, 1, 2, 3, 4, 5]), 1.0)];
        let ctx = QueryContext { problem: &tsp, history: &history };
        for _ in 0..50 {
            let t = parse_trace(&s.generate("p", &ctx).unwrap(), 6).unwrap();
            assert_eq!(t.order()[0], 0);
        }
        assert!(HillClimbBackend::new(0.0).is_err());
    }
}
