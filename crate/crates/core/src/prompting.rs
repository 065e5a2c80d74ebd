//! Prompt rendering: task description, history of best solutions, and an
//! instruction from the prompt pool, with fixed-precision number output.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Archive, PromptBuilder};
use crate::parsing::{SOLUTION_TAG, TRACE_TAG};
use crate::problems::ContinuousProblem;
use crate::scalar::Scalar;
use crate::tsp::{Point, PromptView, Tour};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PromptError {
    #[error("cannot format non-finite value {0}")]
    Format(f64),
    #[error("cannot render an empty archive")]
    EmptyArchive,
    #[error("template/target mismatch: {0}")]
    Mismatch(String),
    #[error("prompt pool has no {kind:?} instruction {id}")]
    UnknownInstruction { kind: ProblemKind, id: usize },
    #[error("prompt pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Continuous,
    Tsp,
}

/// Number of digits printed after the decimal point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NumberFormat {
    pub decimal_digits: u32,
}

impl NumberFormat {
    pub const fn new(decimal_digits: u32) -> Self {
        Self { decimal_digits }
    }
}

impl Default for NumberFormat {
    fn default() -> Self {
        Self::new(5)
    }
}

// Every finite f64 has at most 1074 fractional decimal digits.
const EXACT_DIGITS: usize = 1100;

/// Fixed-point rendering with exactly `d` fractional digits, rounding half
/// away from zero on the exact binary value. No exponent notation; a minus
/// sign only when the rounded value is non-zero.
pub fn format_number<T: Scalar>(x: T, fmt: NumberFormat) -> Result<String, PromptError> {
    let v = x.as_f64();
    if !v.is_finite() {
        return Err(PromptError::Format(v));
    }
    let d = fmt.decimal_digits as usize;
    let magnitude = v.abs();
    // Rust rounds half to even; the two modes differ only on exact ties,
    // and a tie must print with a trailing 5 at one extra digit.
    let probe = format!("{magnitude:.prec$}", prec = d + 1);
    let body = if probe.ends_with('5') {
        round_half_away(&format!("{magnitude:.EXACT_DIGITS$}"), d)
    } else {
        format!("{magnitude:.d$}")
    };
    let is_zero = body.bytes().all(|b| b == b'0' || b == b'.');
    Ok(if v < 0.0 && !is_zero {
        format!("-{body}")
    } else {
        body
    })
}

/// Rounds an exact non-negative decimal string to `d` fractional digits.
fn round_half_away(exact: &str, d: usize) -> String {
    let (int_part, frac) = exact.split_once('.').unwrap_or((exact, ""));
    let mut digits: Vec<u8> = int_part
        .bytes()
        .chain(frac.bytes().chain(std::iter::repeat(b'0')).take(d))
        .collect();
    if frac.as_bytes().get(d).is_some_and(|&b| b >= b'5') {
        let mut i = digits.len();
        loop {
            if i == 0 {
                digits.insert(0, b'1');
                break;
            }
            i -= 1;
            if digits[i] == b'9' {
                digits[i] = b'0';
            } else {
                digits[i] += 1;
                break;
            }
        }
    }
    let split = digits.len() - d;
    let mut out = String::from_utf8(digits[..split].to_vec()).expect("ascii digits");
    if d > 0 {
        out.push('.');
        out.push_str(std::str::from_utf8(&digits[split..]).expect("ascii digits"));
    }
    out
}

/// Integral coordinates print without a decimal point.
fn format_coordinate<T: Scalar>(v: T, fmt: NumberFormat) -> Result<String, PromptError> {
    let f = v.as_f64();
    if f.is_finite() && f.fract() == 0.0 && f.abs() < 1e15 {
        Ok(format!("{}", f as i64))
    } else {
        format_number(v, fmt)
    }
}

/// A payload type with its reply tag and fitness label.
pub trait Tagged {
    const TAG: &'static str;
    const FITNESS_LABEL: &'static str;

    fn render_body(&self, fmt: NumberFormat) -> Result<String, PromptError>;
}

impl<T: Scalar> Tagged for Vec<T> {
    const TAG: &'static str = SOLUTION_TAG;
    const FITNESS_LABEL: &'static str = "value";

    fn render_body(&self, fmt: NumberFormat) -> Result<String, PromptError> {
        let parts = self
            .iter()
            .map(|&v| format_number(v, fmt))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(parts.join(","))
    }
}

impl Tagged for Tour {
    const TAG: &'static str = TRACE_TAG;
    const FITNESS_LABEL: &'static str = "length";

    fn render_body(&self, _fmt: NumberFormat) -> Result<String, PromptError> {
        Ok(join_indices(self.order()))
    }
}

fn join_indices(order: &[usize]) -> String {
    order
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

/// `<solution>v1,…</solution>` with shortest round-trip number output, so
/// parsing the text returns the identical values.
pub fn solution_tag(values: &[f64]) -> String {
    let body: Vec<String> = values.iter().map(|v| format!("{v}")).collect();
    format!("<{SOLUTION_TAG}>{}</{SOLUTION_TAG}>", body.join(","))
}

pub fn trace_tag(order: &[usize]) -> String {
    format!("<{TRACE_TAG}>{}</{TRACE_TAG}>", join_indices(order))
}

/// Order in which history entries are listed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistoryOrder {
    /// Worst first, best last (descending fitness).
    #[default]
    Descend,
    /// Best first.
    Ascend,
}

pub fn render_entry<S: Tagged, F: Scalar>(
    solution: &S,
    fitness: F,
    fmt: NumberFormat,
) -> Result<String, PromptError> {
    Ok(format!(
        "<{tag}>{body}</{tag}>\n{label}: {value}",
        tag = S::TAG,
        body = solution.render_body(fmt)?,
        label = S::FITNESS_LABEL,
        value = format_number(fitness, fmt)?,
    ))
}

pub fn render_history<S, F>(
    archive: &Archive<S, F>,
    fmt: NumberFormat,
    order: HistoryOrder,
) -> Result<String, PromptError>
where
    S: Tagged + Clone + PartialEq,
    F: Scalar,
{
    if archive.is_empty() {
        return Err(PromptError::EmptyArchive);
    }
    let mut blocks = archive
        .entries()
        .iter()
        .map(|e| render_entry(&e.solution, e.fitness, fmt))
        .collect::<Result<Vec<_>, _>>()?;
    if order == HistoryOrder::Ascend {
        blocks.reverse();
    }
    Ok(blocks.join("\n"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PoolSection {
    task: String,
    #[serde(default)]
    transition: Option<String>,
    instructions: Vec<String>,
}

/// Task templates and instruction variants per problem kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptPool {
    continuous: PoolSection,
    tsp: PoolSection,
}

impl PromptPool {
    pub fn bundled() -> Self {
        Self::from_json(include_str!("../data/prompt_pool.json")).expect("bundled pool is valid")
    }

    pub fn from_json(json: &str) -> Result<Self, PromptError> {
        let pool: PromptPool =
            serde_json::from_str(json).map_err(|e| PromptError::Pool(e.to_string()))?;
        for (kind, section) in [
            (ProblemKind::Continuous, &pool.continuous),
            (ProblemKind::Tsp, &pool.tsp),
        ] {
            if section.instructions.is_empty() {
                return Err(PromptError::Pool(format!("no {kind:?} instructions")));
            }
        }
        Ok(pool)
    }

    pub fn load(path: &Path) -> Result<Self, PromptError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PromptError::Pool(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn section(&self, kind: ProblemKind) -> &PoolSection {
        match kind {
            ProblemKind::Continuous => &self.continuous,
            ProblemKind::Tsp => &self.tsp,
        }
    }

    pub fn instruction_count(&self, kind: ProblemKind) -> usize {
        self.section(kind).instructions.len()
    }

    pub fn template(&self, kind: ProblemKind, instruction_id: usize) -> Result<PromptTemplate, PromptError> {
        let section = self.section(kind);
        let instruction = section
            .instructions
            .get(instruction_id)
            .ok_or(PromptError::UnknownInstruction {
                kind,
                id: instruction_id,
            })?;
        let prefix = match kind {
            ProblemKind::Continuous => "continuous",
            ProblemKind::Tsp => "tsp",
        };
        Ok(PromptTemplate {
            id: format!("{prefix}/{instruction_id}"),
            kind,
            task_description: section.task.clone(),
            transition: section.transition.clone(),
            instruction: instruction.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub id: String,
    pub kind: ProblemKind,
    /// Placeholders: `{dimension}`, `{dimension_word}`, `{lower}`, `{upper}`
    /// for continuous problems; `{points}` for TSP.
    pub task_description: String,
    /// Line between the task and the history.
    pub transition: Option<String>,
    pub instruction: String,
}

/// What the task description describes.
#[derive(Debug, Clone, Copy)]
pub enum TaskTarget<'a, T: Scalar> {
    Continuous(&'a ContinuousProblem<T>),
    Tsp(&'a PromptView<T>),
}

fn fill(template: &str, values: &BTreeMap<&str, String>) -> String {
    values.iter().fold(template.to_owned(), |acc, (k, v)| {
        acc.replace(&format!("{{{k}}}"), v)
    })
}

fn dimension_word(n: usize) -> String {
    const WORDS: [&str; 11] = [
        "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    ];
    WORDS.get(n).map_or_else(|| n.to_string(), |w| (*w).to_owned())
}

fn render_points<T: Scalar>(view: &PromptView<T>, fmt: NumberFormat) -> Result<String, PromptError> {
    let coord = |p: &Point<T>| -> Result<String, PromptError> {
        Ok(format!(
            "({}, {})",
            format_coordinate(p.x, fmt)?,
            format_coordinate(p.y, fmt)?
        ))
    };
    let items: Vec<String> = match (&view.displayed, &view.names) {
        (Some(points), None) => points
            .iter()
            .enumerate()
            .map(|(i, p)| Ok(format!("({i}): {}", coord(p)?)))
            .collect::<Result<_, PromptError>>()?,
        (None, Some(names)) => names
            .iter()
            .enumerate()
            .map(|(i, name)| format!("({i}): {name}"))
            .collect(),
        (Some(points), Some(names)) => {
            if points.len() != names.len() {
                return Err(PromptError::Mismatch("names and coordinates differ in length".into()));
            }
            points
                .iter()
                .zip(names)
                .enumerate()
                .map(|(i, (p, name))| Ok(format!("({i}): {name} {}", coord(p)?)))
                .collect::<Result<_, PromptError>>()?
        }
        (None, None) => {
            return Err(PromptError::Mismatch("view shows neither names nor coordinates".into()))
        }
    };
    Ok(items.join(", "))
}

pub fn render_task<T: Scalar>(
    template: &PromptTemplate,
    target: TaskTarget<'_, T>,
    fmt: NumberFormat,
) -> Result<String, PromptError> {
    let mut values = BTreeMap::new();
    match (template.kind, target) {
        (ProblemKind::Continuous, TaskTarget::Continuous(p)) => {
            values.insert("dimension", p.dimension().to_string());
            values.insert("dimension_word", dimension_word(p.dimension()));
            values.insert("lower", format!("{}", p.lower()));
            values.insert("upper", format!("{}", p.upper()));
        }
        (ProblemKind::Tsp, TaskTarget::Tsp(view)) => {
            values.insert("points", render_points(view, fmt)?);
        }
        (kind, _) => {
            return Err(PromptError::Mismatch(format!(
                "{kind:?} template used with a different problem kind"
            )))
        }
    }
    Ok(fill(&template.task_description, &values))
}

/// Task, optional transition line, history and instruction, separated by
/// blank lines. Empty parts are skipped.
pub fn assemble_prompt(template: &PromptTemplate, task: &str, history: &str) -> String {
    [
        task,
        template.transition.as_deref().unwrap_or(""),
        history,
        template.instruction.as_str(),
    ]
    .into_iter()
    .filter(|s| !s.is_empty())
    .collect::<Vec<_>>()
    .join("\n\n")
}

/// Prompt builder for continuous problems.
#[derive(Debug, Clone)]
pub struct ContinuousPrompt {
    template: PromptTemplate,
    task: String,
    fmt: NumberFormat,
    order: HistoryOrder,
}

impl ContinuousPrompt {
    pub fn new<T: Scalar>(
        template: PromptTemplate,
        problem: &ContinuousProblem<T>,
        fmt: NumberFormat,
        order: HistoryOrder,
    ) -> Result<Self, PromptError> {
        let task = render_task(&template, TaskTarget::Continuous(problem), fmt)?;
        Ok(Self {
            template,
            task,
            fmt,
            order,
        })
    }
}

impl<T: Scalar> PromptBuilder<Vec<T>, T> for ContinuousPrompt {
    fn build(&self, archive: &Archive<Vec<T>, T>) -> Result<String, PromptError> {
        let history = render_history(archive, self.fmt, self.order)?;
        Ok(assemble_prompt(&self.template, &self.task, &history))
    }
}

/// Prompt builder for TSP, rendering the cities as the view displays them.
#[derive(Debug, Clone)]
pub struct TspPrompt {
    template: PromptTemplate,
    task: String,
    fmt: NumberFormat,
}

impl TspPrompt {
    pub fn new<T: Scalar>(
        template: PromptTemplate,
        view: &PromptView<T>,
        fmt: NumberFormat,
    ) -> Result<Self, PromptError> {
        let task = render_task(&template, TaskTarget::Tsp(view), fmt)?;
        Ok(Self {
            template,
            task,
            fmt,
        })
    }
}

impl<T: Scalar> PromptBuilder<Tour, T> for TspPrompt {
    fn build(&self, archive: &Archive<Tour, T>) -> Result<String, PromptError> {
        let history = render_history(archive, self.fmt, HistoryOrder::Descend)?;
        Ok(assemble_prompt(&self.template, &self.task, &history))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::FunctionKind;
    use crate::tsp::{grid15_fixture, make_view, us_cities, ViewMode};

    fn f(x: f64, d: u32) -> String {
        format_number(x, NumberFormat::new(d)).unwrap()
    }

    #[test]
    fn precision_examples() {
        assert_eq!(f(-2.6711006, 1), "-2.7");
        assert_eq!(f(-2.6711006, 3), "-2.671");
        assert_eq!(f(-2.6711006, 5), "-2.67110");
    }

    #[test]
    fn ties_round_away_from_zero() {
        assert_eq!(f(0.125, 2), "0.13");
        assert_eq!(f(-0.125, 2), "-0.13");
        assert_eq!(f(2.5, 0), "3");
        assert_eq!(f(0.5, 0), "1");
        assert_eq!(f(9.995, 2), "9.99"); // 9.995 is below the tie in binary
        assert_eq!(f(99.5, 0), "100");
        assert_eq!(f(0.375, 2), "0.38");
    }

    #[test]
    fn sign_and_shape() {
        assert_eq!(f(-0.0, 2), "0.00");
        assert_eq!(f(-0.001, 2), "0.00");
        assert_eq!(f(1e-7, 3), "0.000");
        assert_eq!(f(1e21, 1), "1000000000000000000000.0");
        assert_eq!(f(3.0, 0), "3");
        assert_eq!(format_number(0.1f32, NumberFormat::new(10)).unwrap(), "0.1000000015");
        assert!(format_number(f64::NAN, NumberFormat::new(2)).is_err());
        assert!(format_number(f64::INFINITY, NumberFormat::new(2)).is_err());
    }

    #[test]
    fn history_block_layout() {
        let a = Archive::from_entries(16, [(vec![-2.6711006, -3.21306], 18.70646)]);
        let h = render_history(&a, NumberFormat::new(5), HistoryOrder::Descend).unwrap();
        assert_eq!(h, "<solution>-2.67110,-3.21306</solution>\nvalue: 18.70646");
    }

    #[test]
    fn history_order() {
        let a = Archive::from_entries(16, [(vec![1.0], 1.0), (vec![5.0], 5.0)]);
        let h = render_history(&a, NumberFormat::new(1), HistoryOrder::Descend).unwrap();
        assert!(h.find("value: 5.0").unwrap() < h.find("value: 1.0").unwrap());
        let asc = render_history(&a, NumberFormat::new(1), HistoryOrder::Ascend).unwrap();
        assert!(asc.find("value: 1.0").unwrap() < asc.find("value: 5.0").unwrap());

        let big = Archive::from_entries(16, (0..20).map(|i| (vec![i as f64], i as f64)));
        let h = render_history(&big, NumberFormat::new(2), HistoryOrder::Descend).unwrap();
        assert_eq!(h.matches("<solution>").count(), 16);
        assert!(h.ends_with("value: 0.00"));

        let empty: Archive<Vec<f64>, f64> = Archive::new(4);
        assert_eq!(
            render_history(&empty, NumberFormat::new(2), HistoryOrder::Descend),
            Err(PromptError::EmptyArchive)
        );
    }

    #[test]
    fn tsp_history_uses_trace_and_length() {
        let a = Archive::from_entries(4, [(Tour::identity(3), 12.0)]);
        let h = render_history(&a, NumberFormat::new(2), HistoryOrder::Descend).unwrap();
        assert_eq!(h, "<trace>0,1,2</trace>\nlength: 12.00");
    }

    #[test]
    fn continuous_task() {
        let pool = PromptPool::bundled();
        let t = pool.template(ProblemKind::Continuous, 0).unwrap();
        let p = ContinuousProblem::<f64>::new(FunctionKind::Rastrigin, 2).unwrap();
        let task = render_task(&t, TaskTarget::Continuous(&p), NumberFormat::default()).unwrap();
        assert!(task.contains("The problem has 2 decision variables"));
        assert!(task.contains("between -5.12 and 5.12"));
        assert!(task.contains("The two decision variables"));
    }

    #[test]
    fn tsp_tasks() {
        let pool = PromptPool::bundled();
        let t = pool.template(ProblemKind::Tsp, 0).unwrap();
        let grid = grid15_fixture();
        let view = PromptView::truthful(&grid);
        let task = render_task(&t, TaskTarget::Tsp(&view), NumberFormat::default()).unwrap();
        assert!(task.starts_with(
            "You are given a list of points with coordinates: (0): (74, 39), (1): (7, 24)"
        ));

        let cities = us_cities();
        let names = make_view(&cities, ViewMode::NamesOnly, 0).unwrap();
        let task = render_task(&t, TaskTarget::Tsp(&names), NumberFormat::default()).unwrap();
        assert!(task.contains(": (0): San Diego, (1): Philadelphia"));

        let both = make_view(&cities, ViewMode::NamesAndCoords, 0).unwrap();
        let task = render_task(&t, TaskTarget::Tsp(&both), NumberFormat::new(2)).unwrap();
        assert!(task.contains("(0): San Diego (32.72, -117.16)"), "{task}");

        let p = ContinuousProblem::<f64>::new(FunctionKind::Sphere, 2).unwrap();
        assert!(matches!(
            render_task(&t, TaskTarget::Continuous(&p), NumberFormat::default()),
            Err(PromptError::Mismatch(_))
        ));
    }

    #[test]
    fn assembly() {
        let pool = PromptPool::bundled();
        let mut t = pool.template(ProblemKind::Tsp, 1).unwrap();
        let prompt = assemble_prompt(&t, "TASK", "HISTORY");
        assert_eq!(prompt.matches("Below are some previous traces and their lengths.").count(), 1);
        assert!(prompt.starts_with("TASK\n\nBelow are"));
        assert!(prompt.ends_with(&t.instruction));
        assert_eq!(prompt, assemble_prompt(&t, "TASK", "HISTORY"));
        t.instruction.clear();
        assert!(assemble_prompt(&t, "TASK", "HISTORY").ends_with("HISTORY"));
    }

    #[test]
    fn pool_invariants() {
        let pool = PromptPool::bundled();
        for id in 0..pool.instruction_count(ProblemKind::Continuous) {
            let t = pool.template(ProblemKind::Continuous, id).unwrap();
            assert!(t.instruction.contains("<solution>") && t.instruction.contains("</solution>"));
            assert_eq!(t.id, format!("continuous/{id}"));
        }
        for id in 0..pool.instruction_count(ProblemKind::Tsp) {
            let t = pool.template(ProblemKind::Tsp, id).unwrap();
            assert!(t.instruction.contains("trace>"));
        }
        assert!(matches!(
            pool.template(ProblemKind::Tsp, 99),
            Err(PromptError::UnknownInstruction { .. })
        ));
        assert!(PromptPool::from_json("{}").is_err());
    }

    #[test]
    fn exact_tags_round_trip() {
        let v = [0.1 + 0.2, -1e-7, 5.12];
        let parsed = crate::parsing::parse_solution(&solution_tag(&v), 3, -6.0, 6.0).unwrap();
        assert_eq!(parsed, v.to_vec());
        assert_eq!(trace_tag(&[2, 0, 1]), "<trace>2,0,1</trace>");
    }
}
