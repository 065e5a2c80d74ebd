use super::Objective;
use crate::backends::{Payload, ProblemContext};
use crate::parsing::{parse_solution, parse_trace, ParseErrorKind};
use crate::problems::ContinuousProblem;
use crate::scalar::Scalar;
use crate::seed::RunRng;
use crate::tsp::{Point, PromptView, Tour, TspInstance};

/// Box-bounded continuous minimization; replies carry `<solution>` tags.
#[derive(Debug, Clone)]
pub struct ContinuousTask<T: Scalar> {
    problem: ContinuousProblem<T>,
    display_digits: Option<u32>,
}

impl<T: Scalar> ContinuousTask<T> {
    pub fn new(problem: ContinuousProblem<T>) -> Self {
        Self {
            problem,
            display_digits: None,
        }
    }

    /// Records the prompt precision in the generator context.
    pub fn with_display_digits(mut self, digits: u32) -> Self {
        self.display_digits = Some(digits);
        self
    }

    pub fn problem(&self) -> &ContinuousProblem<T> {
        &self.problem
    }
}

impl<T: Scalar> Objective for ContinuousTask<T> {
    type Solution = Vec<T>;
    type Fitness = T;

    fn random_solution(&self, rng: &mut RunRng) -> Vec<T> {
        self.problem.random_solution(rng)
    }

    fn evaluate(&self, solution: &Vec<T>) -> T {
        self.problem
            .evaluate(solution)
            .expect("solutions are dimension-checked before evaluation")
    }

    fn parse(&self, response: &str) -> Result<Vec<T>, ParseErrorKind> {
        parse_solution(
            response,
            self.problem.dimension(),
            self.problem.lower(),
            self.problem.upper(),
        )
    }

    fn context(&self) -> ProblemContext {
        ProblemContext::Continuous {
            dimension: self.problem.dimension(),
            lower: self.problem.lower().as_f64(),
            upper: self.problem.upper().as_f64(),
            optimum: self.problem.optimum_point().iter().map(|v| v.as_f64()).collect(),
            display_digits: self.display_digits,
        }
    }

    fn payload(&self, solution: &Vec<T>) -> Payload {
        Payload::Vector(solution.iter().map(|v| v.as_f64()).collect())
    }
}

/// Tour search on an instance; replies carry `<trace>` tags. The displayed
/// coordinates (from a [`PromptView`]) are exposed to generators, while
/// evaluation always uses the instance.
#[derive(Debug, Clone)]
pub struct TspTask<T: Scalar> {
    instance: TspInstance<T>,
    displayed: Option<Vec<Point<T>>>,
    optimal_tour: Option<Tour>,
}

impl<T: Scalar> TspTask<T> {
    pub fn new(instance: TspInstance<T>, view: &PromptView<T>) -> Self {
        Self {
            instance,
            displayed: view.displayed.clone(),
            optimal_tour: None,
        }
    }

    /// Makes a known optimal tour available to oracle-fed generators.
    pub fn with_optimal_tour(mut self, tour: Option<Tour>) -> Self {
        self.optimal_tour = tour;
        self
    }

    pub fn instance(&self) -> &TspInstance<T> {
        &self.instance
    }
}

impl<T: Scalar> Objective for TspTask<T> {
    type Solution = Tour;
    type Fitness = T;

    fn random_solution(&self, rng: &mut RunRng) -> Tour {
        self.instance.random_tour(rng)
    }

    fn evaluate(&self, tour: &Tour) -> T {
        self.instance
            .tour_length(tour)
            .expect("tours are validated before evaluation")
    }

    fn parse(&self, response: &str) -> Result<Tour, ParseErrorKind> {
        parse_trace(response, self.instance.len())
    }

    fn context(&self) -> ProblemContext {
        ProblemContext::Tsp {
            n_cities: self.instance.len(),
            displayed: self
                .displayed
                .as_ref()
                .map(|pts| pts.iter().map(|p| [p.x.as_f64(), p.y.as_f64()]).collect()),
            optimal_tour: self.optimal_tour.as_ref().map(|t| t.order().to_vec()),
        }
    }

    fn payload(&self, tour: &Tour) -> Payload {
        Payload::Tour(tour.order().to_vec())
    }
}
