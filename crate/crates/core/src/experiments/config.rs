use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::backends::BackendSpec;
use crate::engine::LoopConfig;
use crate::problems::{FunctionKind, ProblemSpec};
use crate::prompting::{HistoryOrder, ProblemKind, PromptPool, NumberFormat};
use crate::tsp::{load_instance, grid15_fixture, us_cities, ViewMode};
use crate::Instance;

pub const SCHEMA_VERSION: u32 = 1;

fn default_repeats() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptSettings {
    /// Index into the instruction pool of the problem kind.
    #[serde(default)]
    pub instruction_id: usize,
    /// Decimals used for numbers shown in prompts.
    #[serde(default = "default_digits")]
    pub decimal_digits: u32,
    /// Alternative pool file; the bundled pool otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool: Option<PathBuf>,
}

fn default_digits() -> u32 {
    NumberFormat::default().decimal_digits
}

impl Default for PromptSettings {
    fn default() -> Self {
        Self {
            instruction_id: 0,
            decimal_digits: default_digits(),
            pool: None,
        }
    }
}

impl PromptSettings {
    pub fn pool(&self) -> Result<PromptPool, ExperimentError> {
        match &self.pool {
            None => Ok(PromptPool::bundled()),
            Some(p) => Ok(PromptPool::load(p)?),
        }
    }

    pub fn format(&self) -> NumberFormat {
        NumberFormat::new(self.decimal_digits)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TspFixture {
    /// 15 integer-grid points.
    Grid15,
    /// 15 named US cities, Haversine metric.
    UsCities,
}

/// One TSP instance: exactly one of `cities` (random integer grid),
/// `file` or `fixture`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TspSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cities: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<TspFixture>,
    /// Known optimum for instances too large for the exact oracle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_length: Option<f64>,
}

impl TspSpec {
    pub fn random(cities: usize) -> Self {
        Self {
            cities: Some(cities),
            file: None,
            fixture: None,
            reference_length: None,
        }
    }

    pub fn fixture(fixture: TspFixture) -> Self {
        Self {
            cities: None,
            file: None,
            fixture: Some(fixture),
            reference_length: None,
        }
    }

    fn validate(&self, field: &str) -> Result<(), ExperimentError> {
        let sources = [self.cities.is_some(), self.file.is_some(), self.fixture.is_some()];
        if sources.iter().filter(|s| **s).count() != 1 {
            return Err(ExperimentError::field(
                field,
                "exactly one of `cities`, `file` or `fixture` is required",
            ));
        }
        if let Some(n) = self.cities {
            if n < 3 {
                return Err(ExperimentError::field(format!("{field}.cities"), "need at least 3 cities"));
            }
        }
        if let Some(r) = self.reference_length {
            if !(r > 0.0 && r.is_finite()) {
                return Err(ExperimentError::field(
                    format!("{field}.reference_length"),
                    "must be positive",
                ));
            }
        }
        Ok(())
    }

    /// Builds the instance; random instances use `seed`.
    pub fn load(&self, seed: u64) -> Result<Instance, ExperimentError> {
        let inst = match (self.cities, &self.file, self.fixture) {
            (Some(n), None, None) => Instance::random(n, seed)?,
            (None, Some(path), None) => load_instance(path)?,
            (None, None, Some(TspFixture::Grid15)) => grid15_fixture(),
            (None, None, Some(TspFixture::UsCities)) => us_cities(),
            _ => return Err(ExperimentError::field("tsp", "ambiguous instance source")),
        };
        Ok(match self.reference_length {
            Some(r) => inst.with_reference_length(Some(r)),
            None => inst,
        })
    }

    /// Stable identifier used in reports.
    pub fn id(&self) -> String {
        match (self.cities, &self.file, self.fixture) {
            (Some(n), _, _) => format!("tsp-{n}"),
            (_, Some(p), _) => format!(
                "tsp-{}",
                p.file_stem().map_or_else(|| "file".into(), |s| s.to_string_lossy().into_owned())
            ),
            (_, _, Some(TspFixture::Grid15)) => "tsp-grid15".into(),
            _ => "tsp-us-cities".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemEntry {
    Continuous(ProblemSpec),
    Tsp(TspSpec),
}

impl ProblemEntry {
    pub fn kind(&self) -> ProblemKind {
        match self {
            ProblemEntry::Continuous(_) => ProblemKind::Continuous,
            ProblemEntry::Tsp(_) => ProblemKind::Tsp,
        }
    }
}

fn default_baseline_problems() -> Vec<ProblemEntry> {
    let tsp = [10, 15, 20, 25, 30]
        .into_iter()
        .map(|n| ProblemEntry::Tsp(TspSpec::random(n)));
    let continuous = FunctionKind::ALL
        .into_iter()
        .map(|f| ProblemEntry::Continuous(ProblemSpec::new(f, 2)));
    tsp.chain(continuous).collect()
}

fn sphere() -> FunctionKind {
    FunctionKind::Sphere
}
fn two() -> usize {
    2
}
fn default_digit_grid() -> Vec<u32> {
    (1..=6).collect()
}
fn small_shift() -> [f64; 2] {
    [-0.1, 0.1]
}
fn default_dimensions() -> Vec<usize> {
    vec![16, 32, 64, 128, 256]
}
fn default_shift_functions() -> Vec<FunctionKind> {
    FunctionKind::ALL.into_iter().filter(|f| f.is_symmetric()).collect()
}
fn default_magnitudes() -> Vec<f64> {
    (0..=8).map(|i| i as f64 * 0.25).collect()
}
fn ten() -> usize {
    10
}
fn coord_views() -> Vec<ViewMode> {
    vec![ViewMode::Masked, ViewMode::Shifted, ViewMode::True]
}
fn name_views() -> Vec<ViewMode> {
    vec![ViewMode::NamesOnly, ViewMode::CoordsOnly, ViewMode::NamesAndCoords]
}
fn us_fixture() -> TspSpec {
    TspSpec::fixture(TspFixture::UsCities)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeShift {
    NoShift,
    Shifted,
}

impl ProbeShift {
    pub fn name(self) -> &'static str {
        match self {
            ProbeShift::NoShift => "no_shift",
            ProbeShift::Shifted => "shifted",
        }
    }
}

fn both_orders() -> Vec<HistoryOrder> {
    vec![HistoryOrder::Ascend, HistoryOrder::Descend]
}
fn both_shifts() -> Vec<ProbeShift> {
    vec![ProbeShift::NoShift, ProbeShift::Shifted]
}
fn thousand() -> usize {
    1000
}
fn probe_shift_range() -> [f64; 2] {
    [-2.0, 2.0]
}

/// Monte Carlo probe of a generator's output distribution on 2-D Sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingProbeConfig {
    /// Which of the generated 16-entry archives to show (0 or 1).
    #[serde(default)]
    pub archive_set: usize,
    #[serde(default = "both_orders")]
    pub orders: Vec<HistoryOrder>,
    #[serde(default = "both_shifts")]
    pub shifts: Vec<ProbeShift>,
    #[serde(default = "thousand")]
    pub sample_count: usize,
    /// Interval of the per-coordinate shift for the shifted arm.
    #[serde(default = "probe_shift_range")]
    pub shift_range: [f64; 2],
    /// Distance under which a sample counts as a copy of the archive best.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_epsilon() -> f64 {
    1e-9
}

impl Default for SamplingProbeConfig {
    fn default() -> Self {
        Self {
            archive_set: 0,
            orders: both_orders(),
            shifts: both_shifts(),
            sample_count: thousand(),
            shift_range: probe_shift_range(),
            epsilon: default_epsilon(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Protocol {
    /// Table-style comparison over TSP sizes and 2-D functions.
    Baseline {
        #[serde(default = "default_baseline_problems")]
        problems: Vec<ProblemEntry>,
    },
    /// Best fitness against prompt precision, one shared shift.
    PrecisionSweep {
        #[serde(default = "sphere")]
        function: FunctionKind,
        #[serde(default = "two")]
        dimension: usize,
        #[serde(default = "default_digit_grid")]
        digits: Vec<u32>,
        #[serde(default = "small_shift")]
        shift: [f64; 2],
    },
    /// Best fitness against problem dimension.
    DimensionScaling {
        #[serde(default = "sphere")]
        function: FunctionKind,
        #[serde(default = "default_dimensions")]
        dimensions: Vec<usize>,
        #[serde(default = "small_shift")]
        shift: [f64; 2],
    },
    /// Best fitness against a constant input shift of growing magnitude.
    ShiftSweep {
        #[serde(default = "default_shift_functions")]
        functions: Vec<FunctionKind>,
        #[serde(default = "two")]
        dimension: usize,
        #[serde(default = "default_magnitudes")]
        magnitudes: Vec<f64>,
    },
    SamplingProbe(SamplingProbeConfig),
    /// One random instance shown with masked, shifted or true coordinates.
    CoordHeuristics {
        #[serde(default = "ten")]
        cities: usize,
        #[serde(default = "coord_views")]
        views: Vec<ViewMode>,
    },
    /// A named instance shown by names, coordinates or both.
    CityNameHeuristics {
        #[serde(default = "us_fixture")]
        instance: TspSpec,
        #[serde(default = "name_views")]
        settings: Vec<ViewMode>,
    },
}

impl Protocol {
    pub fn name(&self) -> &'static str {
        match self {
            Protocol::Baseline { .. } => "baseline",
            Protocol::PrecisionSweep { .. } => "precision_sweep",
            Protocol::DimensionScaling { .. } => "dimension_scaling",
            Protocol::ShiftSweep { .. } => "shift_sweep",
            Protocol::SamplingProbe(_) => "sampling_probe",
            Protocol::CoordHeuristics { .. } => "coord_heuristics",
            Protocol::CityNameHeuristics { .. } => "cityname_heuristics",
        }
    }

    fn kinds(&self) -> Vec<ProblemKind> {
        match self {
            Protocol::Baseline { problems } => problems.iter().map(ProblemEntry::kind).collect(),
            Protocol::CoordHeuristics { .. } | Protocol::CityNameHeuristics { .. } => {
                vec![ProblemKind::Tsp]
            }
            _ => vec![ProblemKind::Continuous],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub protocol: Protocol,
    pub backend: BackendSpec,
    #[serde(default, rename = "loop")]
    pub loop_config: LoopConfig,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    /// Master seed; every random quantity derives from it.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub prompt: PromptSettings,
}

fn nonempty<T>(v: &[T], field: &str) -> Result<(), ExperimentError> {
    if v.is_empty() {
        Err(ExperimentError::field(field, "must not be empty"))
    } else {
        Ok(())
    }
}

fn check_interval([lo, hi]: [f64; 2], field: &str) -> Result<(), ExperimentError> {
    if lo.is_finite() && hi.is_finite() && lo <= hi {
        Ok(())
    } else {
        Err(ExperimentError::field(field, format!("[{lo}, {hi}] is not an interval")))
    }
}

impl ExperimentConfig {
    pub fn new(protocol: Protocol, backend: BackendSpec) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            name: String::new(),
            protocol,
            backend,
            loop_config: LoopConfig::default(),
            repeats: default_repeats(),
            seed: 0,
            prompt: PromptSettings::default(),
        }
    }

    /// Parses and validates; relative paths are resolved against `base_dir`.
    pub fn from_json(json: &str, base_dir: Option<&Path>) -> Result<Self, ExperimentError> {
        let mut cfg: ExperimentConfig = serde_json::from_str(json).map_err(|e| ExperimentError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if let Some(base) = base_dir {
            cfg.resolve_paths(base);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(|e| ExperimentError::io(path.display(), e))?;
        let base = path.parent().map(|p| if p.as_os_str().is_empty() { Path::new(".") } else { p });
        Self::from_json(&text, base)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                let joined = base.join(&*p);
                *p = joined.canonicalize().unwrap_or(joined);
            }
        };
        if let Some(p) = self.prompt.pool.as_mut() {
            fix(p);
        }
        if let crate::backends::BackendSpec::Replay { dir } = &mut self.backend {
            fix(dir);
        }
        match &mut self.protocol {
            Protocol::Baseline { problems } => {
                for e in problems {
                    if let ProblemEntry::Tsp(TspSpec { file: Some(p), .. }) = e {
                        fix(p);
                    }
                }
            }
            Protocol::CityNameHeuristics {
                instance: TspSpec { file: Some(p), .. },
                ..
            } => fix(p),
            _ => {}
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ExperimentError::field(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        if self.repeats == 0 {
            return Err(ExperimentError::field("repeats", "must be at least 1"));
        }
        let lc = &self.loop_config;
        for (name, v) in [("loop.n", lc.n), ("loop.m", lc.m), ("loop.retry_cap", lc.retry_cap)] {
            if v == 0 {
                return Err(ExperimentError::field(name, "must be at least 1"));
            }
        }
        if lc.rng_seed != 0 {
            return Err(ExperimentError::field(
                "loop.rng_seed",
                "run seeds derive from the master `seed`; leave this unset",
            ));
        }
        self.backend
            .validate()
            .map_err(|e| ExperimentError::field("backend", e.to_string()))?;
        let pool = self
            .prompt
            .pool()
            .map_err(|e| ExperimentError::field("prompt.pool", e.to_string()))?;
        for kind in self.protocol.kinds() {
            if self.prompt.instruction_id >= pool.instruction_count(kind) {
                return Err(ExperimentError::field(
                    "prompt.instruction_id",
                    format!(
                        "{kind:?} pool has {} instructions, got id {}",
                        pool.instruction_count(kind),
                        self.prompt.instruction_id
                    ),
                ));
            }
        }
        if self.prompt.decimal_digits > 17 {
            return Err(ExperimentError::field("prompt.decimal_digits", "at most 17"));
        }
        self.validate_protocol()
    }

    fn validate_protocol(&self) -> Result<(), ExperimentError> {
        match &self.protocol {
            Protocol::Baseline { problems } => {
                nonempty(problems, "protocol.problems")?;
                for (i, p) in problems.iter().enumerate() {
                    let field = format!("protocol.problems[{i}]");
                    match p {
                        ProblemEntry::Continuous(spec) => {
                            spec.resolve(0).map_err(|e| ExperimentError::field(&field, e.to_string()))?;
                        }
                        ProblemEntry::Tsp(spec) => spec.validate(&field)?,
                    }
                }
            }
            Protocol::PrecisionSweep {
                dimension,
                digits,
                shift,
                ..
            } => {
                nonempty(digits, "protocol.digits")?;
                if digits.iter().any(|&d| d > 17) {
                    return Err(ExperimentError::field("protocol.digits", "at most 17 decimals"));
                }
                if *dimension == 0 {
                    return Err(ExperimentError::field("protocol.dimension", "must be positive"));
                }
                check_interval(*shift, "protocol.shift")?;
            }
            Protocol::DimensionScaling { dimensions, shift, .. } => {
                nonempty(dimensions, "protocol.dimensions")?;
                if dimensions.contains(&0) {
                    return Err(ExperimentError::field("protocol.dimensions", "must be positive"));
                }
                check_interval(*shift, "protocol.shift")?;
            }
            Protocol::ShiftSweep {
                functions,
                dimension,
                magnitudes,
            } => {
                nonempty(functions, "protocol.functions")?;
                nonempty(magnitudes, "protocol.magnitudes")?;
                if let Some(f) = functions.iter().find(|f| !f.is_symmetric()) {
                    return Err(ExperimentError::field(
                        "protocol.functions",
                        format!("{f} is asymmetric and not part of the shift study"),
                    ));
                }
                if *dimension == 0 {
                    return Err(ExperimentError::field("protocol.dimension", "must be positive"));
                }
                if magnitudes.iter().any(|m| !m.is_finite()) {
                    return Err(ExperimentError::field("protocol.magnitudes", "must be finite"));
                }
            }
            Protocol::SamplingProbe(p) => {
                if p.archive_set > 1 {
                    return Err(ExperimentError::field("protocol.archive_set", "must be 0 or 1"));
                }
                nonempty(&p.orders, "protocol.orders")?;
                nonempty(&p.shifts, "protocol.shifts")?;
                if p.sample_count == 0 {
                    return Err(ExperimentError::field("protocol.sample_count", "must be at least 1"));
                }
                check_interval(p.shift_range, "protocol.shift_range")?;
                if !(p.epsilon >= 0.0) {
                    return Err(ExperimentError::field("protocol.epsilon", "must be non-negative"));
                }
            }
            Protocol::CoordHeuristics { cities, views } => {
                nonempty(views, "protocol.views")?;
                if *cities < 3 {
                    return Err(ExperimentError::field("protocol.cities", "need at least 3 cities"));
                }
                if let Some(v) = views
                    .iter()
                    .find(|v| !matches!(v, ViewMode::True | ViewMode::Masked | ViewMode::Shifted))
                {
                    return Err(ExperimentError::field(
                        "protocol.views",
                        format!("{} needs a named instance", v.name()),
                    ));
                }
            }
            Protocol::CityNameHeuristics { instance, settings } => {
                nonempty(settings, "protocol.settings")?;
                instance.validate("protocol.instance")?;
            }
        }
        Ok(())
    }

    /// The config with the backend removed, as hashed into transcripts:
    /// replaying under a different backend is the point of a replay.
    pub fn hash_without_backend(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = value.as_object_mut() {
            obj.remove("backend");
        }
        crate::backends::config_hash(&value)
    }
}
