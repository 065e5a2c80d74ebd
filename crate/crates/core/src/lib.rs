//! Evaluation laboratory for generator-driven black-box optimization.
//!
//! The numeric core ([`problems`], [`tsp`], [`oracle`], [`engine`]) is
//! generic over [`Scalar`] (`f32` or `f64`); configs, backends and reports
//! work in `f64`.

pub mod backends;
pub mod engine;
pub mod experiments;
pub mod oracle;
pub mod parsing;
pub mod problems;
pub mod prompting;
pub mod reporting;
pub mod scalar;
pub mod seed;
pub mod tsp;

pub use scalar::Scalar;

pub type Problem = problems::ContinuousProblem<f64>;
pub type Problem32 = problems::ContinuousProblem<f32>;
pub type Instance = tsp::TspInstance<f64>;
pub type Instance32 = tsp::TspInstance<f32>;
pub type View = tsp::PromptView<f64>;
