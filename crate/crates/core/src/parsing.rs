//! Extraction and validation of solutions from raw generator replies.
//!
//! A reply is accepted only if it contains exactly one complete tag pair.
//! Tags match case-insensitively and may contain whitespace (`< /trace >`).
//! Prose outside the pair is ignored. Nothing is repaired or clamped.

use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::tsp::Tour;

pub const SOLUTION_TAG: &str = "solution";
pub const TRACE_TAG: &str = "trace";

/// Why a reply was rejected. Names appear verbatim in run logs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ParseErrorKind {
    NoTag,
    MultipleTags,
    MalformedNumber,
    DimensionMismatch,
    OutOfBounds,
    DuplicateElement,
    MissingElement,
    UnknownElement,
}

impl ParseErrorKind {
    pub const ALL: [ParseErrorKind; 8] = [
        ParseErrorKind::NoTag,
        ParseErrorKind::MultipleTags,
        ParseErrorKind::MalformedNumber,
        ParseErrorKind::DimensionMismatch,
        ParseErrorKind::OutOfBounds,
        ParseErrorKind::DuplicateElement,
        ParseErrorKind::MissingElement,
        ParseErrorKind::UnknownElement,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParseErrorKind::NoTag => "NoTag",
            ParseErrorKind::MultipleTags => "MultipleTags",
            ParseErrorKind::MalformedNumber => "MalformedNumber",
            ParseErrorKind::DimensionMismatch => "DimensionMismatch",
            ParseErrorKind::OutOfBounds => "OutOfBounds",
            ParseErrorKind::DuplicateElement => "DuplicateElement",
            ParseErrorKind::MissingElement => "MissingElement",
            ParseErrorKind::UnknownElement => "UnknownElement",
        }
    }
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::error::Error for ParseErrorKind {}

/// Either a validated payload or the rejection reason.
pub type ParseOutcome<P> = Result<P, ParseErrorKind>;

fn pair_regex(tag: &str) -> Regex {
    Regex::new(&format!(r"(?is)<\s*{tag}\s*>(.*?)<\s*/\s*{tag}\s*>")).expect("static pattern")
}

fn tag_regex(tag: &str) -> &'static Regex {
    static SOLUTION: OnceLock<Regex> = OnceLock::new();
    static TRACE: OnceLock<Regex> = OnceLock::new();
    match tag {
        SOLUTION_TAG => SOLUTION.get_or_init(|| pair_regex(SOLUTION_TAG)),
        TRACE_TAG => TRACE.get_or_init(|| pair_regex(TRACE_TAG)),
        other => panic!("no pattern for tag '{other}'"),
    }
}

fn decimal_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?$").expect("static pattern")
    })
}

fn integer_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[+-]?\d+$").expect("static pattern"))
}

/// Contents of the single `<tag>…</tag>` pair in `response`.
pub fn extract_tagged<'a>(response: &'a str, tag: &str) -> ParseOutcome<&'a str> {
    let mut pairs = tag_regex(tag).captures_iter(response);
    let first = pairs.next().ok_or(ParseErrorKind::NoTag)?;
    if pairs.next().is_some() {
        return Err(ParseErrorKind::MultipleTags);
    }
    Ok(first.get(1).map_or("", |m| m.as_str()))
}

fn split_items(payload: &str) -> impl Iterator<Item = &str> {
    payload.split(',').map(str::trim)
}

/// Parses `<solution>v1,v2,…</solution>` into a vector inside `[lower, upper]`.
pub fn parse_solution<T: Scalar>(
    response: &str,
    dimension: usize,
    lower: T,
    upper: T,
) -> ParseOutcome<Vec<T>> {
    let payload = extract_tagged(response, SOLUTION_TAG)?;
    let values = split_items(payload)
        .map(|item| {
            if !decimal_regex().is_match(item) {
                return Err(ParseErrorKind::MalformedNumber);
            }
            let v: f64 = item.parse().map_err(|_| ParseErrorKind::MalformedNumber)?;
            if !v.is_finite() {
                return Err(ParseErrorKind::MalformedNumber);
            }
            T::from_f64(v)
                .filter(|t| t.is_finite())
                .ok_or(ParseErrorKind::MalformedNumber)
        })
        .collect::<Result<Vec<T>, _>>()?;
    if values.len() != dimension {
        return Err(ParseErrorKind::DimensionMismatch);
    }
    if values.iter().any(|&v| v < lower || v > upper) {
        return Err(ParseErrorKind::OutOfBounds);
    }
    Ok(values)
}

/// Parses `<trace>i0,i1,…</trace>` into a permutation of `0..n_cities`.
pub fn parse_trace(response: &str, n_cities: usize) -> ParseOutcome<Tour> {
    let payload = extract_tagged(response, TRACE_TAG)?;
    let mut order = Vec::new();
    let mut unknown = false;
    for item in split_items(payload) {
        if !integer_regex().is_match(item) {
            return Err(ParseErrorKind::MalformedNumber);
        }
        match item.trim_start_matches('+').parse::<usize>() {
            Ok(c) if c < n_cities => order.push(c),
            // negative, too large, or overflowing integers
            _ => unknown = true,
        }
    }
    if unknown {
        return Err(ParseErrorKind::UnknownElement);
    }
    let mut seen = vec![false; n_cities];
    for &c in &order {
        if std::mem::replace(&mut seen[c], true) {
            return Err(ParseErrorKind::DuplicateElement);
        }
    }
    if order.len() < n_cities {
        return Err(ParseErrorKind::MissingElement);
    }
    Ok(Tour::new(order, n_cities).expect("validated permutation"))
}
