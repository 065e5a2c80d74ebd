use serde::{Deserialize, Serialize};

use super::baselines::uniform_reply;
use super::{Backend, BackendError, Payload, ProblemContext, QueryContext, RunKey, Session};
use crate::prompting::{format_number, solution_tag, trace_tag, NumberFormat};
use crate::seed::{rng_from_seed, RunRng};

/// Reply text that contains no tag at all.
pub const REFUSAL: &str = "I am unable to provide a new solution.";

/// Deterministic reply rules. Every policy is a pure function of the query
/// context, the session's call counter and its seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScriptedPolicy {
    /// The archive best, verbatim (a point mass when sampled).
    EchoBest,
    /// The archive best vector scaled by 0.5.
    Halving,
    /// The known optimum: the minimizer of a continuous problem (rounded to
    /// `digits` decimals when set) or the optimal tour of a TSP instance.
    EchoOptimum {
        #[serde(default)]
        digits: Option<u32>,
    },
    /// The continuous minimizer rounded to the prompt's decimal digits, as
    /// a generator reading the optimum off the prompt would reproduce it.
    EchoOptimumDisplayed,
    /// Greedy nearest-neighbour tour from city 0 over the displayed
    /// coordinates; the identity tour when none are displayed.
    NearestNeighbor,
    /// Uniform over the box, or a uniformly random permutation.
    Uniform,
    AlwaysInvalid,
    /// `invalid` tagless replies before every reply of `then`.
    InvalidThenValid {
        invalid: usize,
        then: Box<ScriptedPolicy>,
    },
}

#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    policy: ScriptedPolicy,
}

impl ScriptedBackend {
    pub fn new(policy: ScriptedPolicy) -> Self {
        Self { policy }
    }
}

impl Backend for ScriptedBackend {
    fn name(&self) -> String {
        format!("scripted:{}", policy_name(&self.policy))
    }

    fn open_session(&self, run: &RunKey) -> Result<Box<dyn Session + '_>, BackendError> {
        Ok(Box::new(ScriptedSession {
            policy: &self.policy,
            calls: 0,
            rng: rng_from_seed(run.seed),
        }))
    }
}

fn policy_name(p: &ScriptedPolicy) -> String {
    match p {
        ScriptedPolicy::EchoBest => "echo_best".into(),
        ScriptedPolicy::Halving => "halving".into(),
        ScriptedPolicy::EchoOptimum { digits: None } => "echo_optimum".into(),
        ScriptedPolicy::EchoOptimum { digits: Some(d) } => format!("echo_optimum_d{d}"),
        ScriptedPolicy::EchoOptimumDisplayed => "echo_optimum_displayed".into(),
        ScriptedPolicy::NearestNeighbor => "nearest_neighbor".into(),
        ScriptedPolicy::Uniform => "uniform".into(),
        ScriptedPolicy::AlwaysInvalid => "always_invalid".into(),
        ScriptedPolicy::InvalidThenValid { invalid, then } => {
            format!("{invalid}_invalid_then_{}", policy_name(then))
        }
    }
}

struct ScriptedSession<'a> {
    policy: &'a ScriptedPolicy,
    calls: u64,
    rng: RunRng,
}

impl Session for ScriptedSession<'_> {
    fn generate(&mut self, _prompt: &str, ctx: &QueryContext<'_>) -> Result<String, BackendError> {
        let call = self.calls;
        self.calls += 1;
        reply(self.policy, call, &mut self.rng, ctx)
    }
}

fn render(payload: &Payload) -> String {
    match payload {
        Payload::Vector(v) => solution_tag(v),
        Payload::Tour(t) => trace_tag(t),
    }
}

fn best<'a>(ctx: &QueryContext<'a>) -> Result<&'a Payload, BackendError> {
    ctx.best()
        .ok_or_else(|| BackendError::Unsupported("no history to echo".into()))
}

fn reply(
    policy: &ScriptedPolicy,
    call: u64,
    rng: &mut RunRng,
    ctx: &QueryContext<'_>,
) -> Result<String, BackendError> {
    match policy {
        ScriptedPolicy::EchoBest => Ok(render(best(ctx)?)),
        ScriptedPolicy::Halving => match best(ctx)? {
            Payload::Vector(v) => Ok(solution_tag(&v.iter().map(|x| x * 0.5).collect::<Vec<_>>())),
            Payload::Tour(_) => Err(BackendError::Unsupported("halving needs a vector".into())),
        },
        ScriptedPolicy::EchoOptimum { digits } => match ctx.problem {
            ProblemContext::Continuous { optimum, .. } => rounded_solution(optimum, *digits),
            ProblemContext::Tsp { optimal_tour, .. } => optimal_tour
                .as_deref()
                .map(trace_tag)
                .ok_or_else(|| BackendError::Unsupported("no optimal tour known".into())),
        },
        ScriptedPolicy::EchoOptimumDisplayed => match ctx.problem {
            ProblemContext::Continuous {
                optimum,
                display_digits,
                ..
            } => rounded_solution(optimum, *display_digits),
            ProblemContext::Tsp { .. } => Err(BackendError::Unsupported(
                "displayed optimum needs a continuous problem".into(),
            )),
        },
        ScriptedPolicy::NearestNeighbor => match ctx.problem {
            ProblemContext::Tsp {
                n_cities,
                displayed,
                ..
            } => Ok(trace_tag(&match displayed {
                Some(points) => nearest_neighbor_tour(points),
                None => (0..*n_cities).collect(),
            })),
            ProblemContext::Continuous { .. } => Err(BackendError::Unsupported(
                "nearest neighbour needs a TSP instance".into(),
            )),
        },
        ScriptedPolicy::Uniform => Ok(uniform_reply(ctx.problem, rng)),
        ScriptedPolicy::AlwaysInvalid => Ok(REFUSAL.to_owned()),
        ScriptedPolicy::InvalidThenValid { invalid, then } => {
            let period = *invalid as u64 + 1;
            if call % period < *invalid as u64 {
                Ok(REFUSAL.to_owned())
            } else {
                reply(then, call / period, rng, ctx)
            }
        }
    }
}

/// `<solution>` tag with each value rounded to `digits` decimals, or in
/// shortest form when `digits` is unset.
fn rounded_solution(values: &[f64], digits: Option<u32>) -> Result<String, BackendError> {
    let Some(d) = digits else {
        return Ok(solution_tag(values));
    };
    let parts = values
        .iter()
        .map(|&v| format_number(v, NumberFormat::new(d)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| BackendError::Unsupported(e.to_string()))?;
    Ok(format!("<solution>{}</solution>", parts.join(",")))
}

/// Greedy tour from city 0; ties go to the lower index.
pub fn nearest_neighbor_tour(points: &[[f64; 2]]) -> Vec<usize> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut current = 0;
    visited[0] = true;
    order.push(0);
    while order.len() < n {
        let [cx, cy] = points[current];
        let mut next = None;
        let mut best = f64::INFINITY;
        for (j, &[x, y]) in points.iter().enumerate() {
            if visited[j] {
                continue;
            }
            let d = (x - cx).hypot(y - cy);
            if d < best {
                best = d;
                next = Some(j);
            }
        }
        let j = next.expect("an unvisited city remains");
        visited[j] = true;
        order.push(j);
        current = j;
    }
    order
}
