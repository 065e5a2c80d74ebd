//! TSP instances, tours and the coordinate views shown to a generator.
//!
//! A [`PromptView`] only changes what the prompt displays. Tour lengths are
//! always computed from the instance's true coordinates.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::seed::rng_from_seed;

/// Mean Earth radius in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Upper end of the integer grid used for synthetic cities and masked views.
pub const GRID_MAX: i64 = 100;

/// Range of the integer offset applied per axis by a shifted view.
pub const SHIFT_OFFSET_RANGE: (i64, i64) = (50, 200);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TspError {
    #[error("instance needs at least 3 cities, got {0}")]
    TooFewCities(usize),
    #[error("{labels} labels for {coords} coordinates")]
    LabelCount { labels: usize, coords: usize },
    #[error("duplicate city label '{0}'")]
    DuplicateLabel(String),
    #[error("coordinate {index} is not a valid latitude/longitude pair")]
    InvalidGeoPoint { index: usize },
    #[error("coordinate {index} is not finite")]
    NonFinite { index: usize },
    #[error("invalid tour: {0}")]
    Tour(String),
    #[error("view mode {mode:?} requires a named instance")]
    View { mode: ViewMode },
    #[error("instance file {path}: {message}")]
    File { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    /// Coordinates are (latitude°, longitude°); distances in kilometres.
    Haversine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[T; 2]", into = "[T; 2]")]
pub struct Point<T: Copy> {
    pub x: T,
    pub y: T,
}

impl<T: Copy> From<[T; 2]> for Point<T> {
    fn from([x, y]: [T; 2]) -> Self {
        Point { x, y }
    }
}

impl<T: Copy> From<Point<T>> for [T; 2] {
    fn from(p: Point<T>) -> Self {
        [p.x, p.y]
    }
}

impl<T: Scalar> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Point { x, y }
    }

    pub fn euclidean(self, other: Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Great-circle distance in km between two (latitude°, longitude°) points.
pub fn haversine<T: Scalar>(p: Point<T>, q: Point<T>) -> T {
    let two = T::lit(2.0);
    let (phi1, phi2) = (p.x.to_radians(), q.x.to_radians());
    let dphi = (q.x - p.x).to_radians();
    let dlambda = (q.y - p.y).to_radians();
    let h = (dphi / two).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / two).sin().powi(2);
    let h = h.min(T::one());
    two * T::lit(EARTH_RADIUS_KM) * h.sqrt().atan2((T::one() - h).sqrt())
}

/// A cyclic visiting order over city indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Tour(Vec<usize>);

impl Tour {
    /// Validates that `order` is a permutation of `0..n`.
    pub fn new(order: Vec<usize>, n: usize) -> Result<Self, TspError> {
        if order.len() != n {
            return Err(TspError::Tour(format!(
                "expected {n} cities, got {}",
                order.len()
            )));
        }
        let mut seen = vec![false; n];
        for &c in &order {
            if c >= n {
                return Err(TspError::Tour(format!("unknown city {c}")));
            }
            if std::mem::replace(&mut seen[c], true) {
                return Err(TspError::Tour(format!("city {c} visited twice")));
            }
        }
        Ok(Tour(order))
    }

    pub fn identity(n: usize) -> Self {
        Tour((0..n).collect())
    }

    pub fn order(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }

    /// Rotated to start at city 0 and oriented so the second city has the
    /// smaller index of city 0's two neighbours. Equal for all rotations and
    /// reversals of the same cycle.
    pub fn canonical(&self) -> Tour {
        let n = self.0.len();
        if n == 0 {
            return self.clone();
        }
        let start = self.0.iter().position(|&c| c == 0).unwrap_or(0);
        let mut rotated: Vec<usize> = (0..n).map(|i| self.0[(start + i) % n]).collect();
        if n > 2 && rotated[1] > rotated[n - 1] {
            rotated[1..].reverse();
        }
        Tour(rotated)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TspInstance<T: Scalar> {
    labels: Vec<String>,
    coordinates: Vec<Point<T>>,
    metric: Metric,
    reference_length: Option<T>,
    distances: Vec<T>,
}

impl<T: Scalar> TspInstance<T> {
    pub fn new(
        labels: Vec<String>,
        coordinates: Vec<Point<T>>,
        metric: Metric,
    ) -> Result<Self, TspError> {
        let n = coordinates.len();
        if n < 3 {
            return Err(TspError::TooFewCities(n));
        }
        if labels.len() != n {
            return Err(TspError::LabelCount {
                labels: labels.len(),
                coords: n,
            });
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(TspError::DuplicateLabel(l.clone()));
            }
        }
        for (index, p) in coordinates.iter().enumerate() {
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(TspError::NonFinite { index });
            }
            if metric == Metric::Haversine
                && (p.x.abs() > T::lit(90.0) || p.y.abs() > T::lit(180.0))
            {
                return Err(TspError::InvalidGeoPoint { index });
            }
        }
        let mut distances = vec![T::zero(); n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = match metric {
                    Metric::Euclidean => coordinates[i].euclidean(coordinates[j]),
                    Metric::Haversine => haversine(coordinates[i], coordinates[j]),
                };
                distances[i * n + j] = d;
                distances[j * n + i] = d;
            }
        }
        Ok(Self {
            labels,
            coordinates,
            metric,
            reference_length: None,
            distances,
        })
    }

    /// Euclidean instance labelled `"0".."n-1"`.
    pub fn from_points(coordinates: Vec<Point<T>>) -> Result<Self, TspError> {
        let labels = index_labels(coordinates.len());
        Self::new(labels, coordinates, Metric::Euclidean)
    }

    /// Integer coordinates uniform on `[0, 100]²`, Euclidean metric.
    pub fn random(n_cities: usize, seed: u64) -> Result<Self, TspError> {
        if n_cities < 3 {
            return Err(TspError::TooFewCities(n_cities));
        }
        let mut rng = rng_from_seed(seed);
        let coords = (0..n_cities)
            .map(|_| {
                let x = rng.random_range(0..=GRID_MAX);
                let y = rng.random_range(0..=GRID_MAX);
                Point::new(T::lit(x as f64), T::lit(y as f64))
            })
            .collect();
        Self::from_points(coords)
    }

    /// Attaches an externally computed optimal length, used for gaps when the
    /// instance is too large for the exact oracle.
    pub fn with_reference_length(mut self, length: Option<T>) -> Self {
        self.reference_length = length;
        self
    }

    pub fn len(&self) -> usize {
        self.coordinates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coordinates.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn coordinates(&self) -> &[Point<T>] {
        &self.coordinates
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn reference_length(&self) -> Option<T> {
        self.reference_length
    }

    /// True when labels are real names rather than index strings.
    pub fn is_named(&self) -> bool {
        self.labels
            .iter()
            .enumerate()
            .any(|(i, l)| *l != i.to_string())
    }

    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> T {
        self.distances[i * self.len() + j]
    }

    /// Cyclic length including the closing edge back to the first city.
    pub fn tour_length(&self, tour: &Tour) -> Result<T, TspError> {
        if tour.len() != self.len() {
            return Err(TspError::Tour(format!(
                "tour has {} cities, instance has {}",
                tour.len(),
                self.len()
            )));
        }
        Ok(self.cycle_length(tour.order()))
    }

    /// Length of an already validated order.
    pub(crate) fn cycle_length(&self, order: &[usize]) -> T {
        let n = order.len();
        let mut total = T::zero();
        for k in 0..n {
            total = total + self.distance(order[k], order[(k + 1) % n]);
        }
        total
    }

    pub fn random_tour(&self, rng: &mut impl Rng) -> Tour {
        let mut order: Vec<usize> = (0..self.len()).collect();
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        Tour(order)
    }
}

pub fn index_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

/// On-disk instance: `{labels, coordinates, metric}` plus an optional
/// precomputed optimal length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub labels: Vec<String>,
    pub coordinates: Vec<Point<f64>>,
    pub metric: Metric,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_length: Option<f64>,
}

impl InstanceFile {
    pub fn into_instance(self) -> Result<TspInstance<f64>, TspError> {
        Ok(TspInstance::new(self.labels, self.coordinates, self.metric)?
            .with_reference_length(self.reference_length))
    }
}

impl From<&TspInstance<f64>> for InstanceFile {
    fn from(inst: &TspInstance<f64>) -> Self {
        InstanceFile {
            labels: inst.labels.clone(),
            coordinates: inst.coordinates.clone(),
            metric: inst.metric,
            reference_length: inst.reference_length,
        }
    }
}

pub fn parse_instance(json: &str) -> Result<TspInstance<f64>, TspError> {
    let file: InstanceFile = serde_json::from_str(json).map_err(|e| TspError::File {
        path: "<inline>".into(),
        message: e.to_string(),
    })?;
    file.into_instance()
}

pub fn load_instance(path: &Path) -> Result<TspInstance<f64>, TspError> {
    let err = |message: String| TspError::File {
        path: path.display().to_string(),
        message,
    };
    let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let file: InstanceFile = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
    file.into_instance()
}

/// The 15 US cities used for the city-name studies, with real lat/lon.
pub fn us_cities() -> TspInstance<f64> {
    parse_instance(include_str!("../data/us_cities.json")).expect("bundled city fixture is valid")
}

/// The 15-point integer-grid instance listed in the TSP prompt example.
pub fn grid15_fixture() -> TspInstance<f64> {
    parse_instance(include_str!("../data/grid15.json")).expect("bundled grid fixture is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewMode {
    True,
    Masked,
    Shifted,
    NamesOnly,
    CoordsOnly,
    NamesAndCoords,
}

impl ViewMode {
    pub fn name(self) -> &'static str {
        match self {
            ViewMode::True => "true",
            ViewMode::Masked => "masked",
            ViewMode::Shifted => "shifted",
            ViewMode::NamesOnly => "names_only",
            ViewMode::CoordsOnly => "coords_only",
            ViewMode::NamesAndCoords => "names_and_coords",
        }
    }

    pub fn shows_names(self) -> bool {
        matches!(self, ViewMode::NamesOnly | ViewMode::NamesAndCoords)
    }

    fn needs_named_instance(self) -> bool {
        matches!(
            self,
            ViewMode::NamesOnly | ViewMode::CoordsOnly | ViewMode::NamesAndCoords
        )
    }
}

/// What a prompt displays for an instance.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptView<T: Scalar> {
    pub mode: ViewMode,
    pub displayed: Option<Vec<Point<T>>>,
    pub names: Option<Vec<String>>,
}

impl<T: Scalar> PromptView<T> {
    /// View that shows true coordinates, usable with any instance.
    pub fn truthful(instance: &TspInstance<T>) -> Self {
        PromptView {
            mode: ViewMode::True,
            displayed: Some(instance.coordinates.clone()),
            names: None,
        }
    }
}

pub fn make_view<T: Scalar>(
    instance: &TspInstance<T>,
    mode: ViewMode,
    seed: u64,
) -> Result<PromptView<T>, TspError> {
    if mode.needs_named_instance() && !instance.is_named() {
        return Err(TspError::View { mode });
    }
    let mut rng = rng_from_seed(seed);
    let displayed = match mode {
        ViewMode::True | ViewMode::CoordsOnly | ViewMode::NamesAndCoords => {
            Some(instance.coordinates.clone())
        }
        ViewMode::NamesOnly => None,
        ViewMode::Masked => Some(
            (0..instance.len())
                .map(|_| {
                    let x = rng.random_range(0..=GRID_MAX);
                    let y = rng.random_range(0..=GRID_MAX);
                    Point::new(T::lit(x as f64), T::lit(y as f64))
                })
                .collect(),
        ),
        ViewMode::Shifted => {
            let (lo, hi) = SHIFT_OFFSET_RANGE;
            let dx = T::lit(rng.random_range(lo..=hi) as f64);
            let dy = T::lit(rng.random_range(lo..=hi) as f64);
            Some(
                instance
                    .coordinates
                    .iter()
                    .map(|p| Point::new(p.x + dx, p.y + dy))
                    .collect(),
            )
        }
    };
    let names = mode.shows_names().then(|| instance.labels.clone());
    Ok(PromptView {
        mode,
        displayed,
        names,
    })
}
