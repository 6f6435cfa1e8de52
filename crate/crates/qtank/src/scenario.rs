//! Scenario configuration: a versioned TOML document describing one
//! closed-loop experiment, materialized into a fully explicit
//! [`ScenarioConfig`] at load time.
//!
//! The input grammar accepts conveniences (operating-point sources,
//! reference deltas, a 5-entry pole list plus completion pole); the
//! materialized form written back out carries every value explicitly and
//! reloads to an identical configuration.

use std::fmt;
use std::path::Path;

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fault::{validate_schedule, FaultEvent, FdiConfig};
use crate::metrics::WindowSpec;
use crate::plant::{equilibrium_levels, OperatingPoint, PlantParams, PumpCommand};
use crate::synthesis::{ParameterPolicy, PoleSet};

pub const SCHEMA_VERSION: &str = "qtank-scenario/1";

/// Default appended pole when the configured list covers only five of
/// the six augmented states.
pub const DEFAULT_COMPLETION_POLE: f64 = -0.1;

/// Slack for treating event times as sample-aligned.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("scenario validation error: {0}")]
    Validation(String),
    #[error("unsupported schema version {found:?}, expected {SCHEMA_VERSION:?}")]
    Schema { found: String },
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerMode {
    Fixed,
    Reconfigurable,
}

impl fmt::Display for ControllerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControllerMode::Fixed => write!(f, "fixed"),
            ControllerMode::Reconfigurable => write!(f, "reconfigurable"),
        }
    }
}

/// Absolute reference target taking effect at a point in time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceStep {
    pub time: f64,
    pub value: [f64; 2],
}

/// Fully materialized experiment description; every field is concrete.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub params: PlantParams,
    pub operating_point: OperatingPoint,
    pub initial_levels: [f64; 4],
    pub duration: f64,
    pub plant_dt: f64,
    pub control_period: f64,
    pub mode: ControllerMode,
    pub poles: PoleSet,
    pub parameter_policy: ParameterPolicy,
    pub integrator_freeze_on_saturation: bool,
    pub reference_baseline: [f64; 2],
    pub reference_steps: Vec<ReferenceStep>,
    pub fault_schedule: Vec<FaultEvent>,
    pub fdi: FdiConfig,
    pub iae_windows: Vec<WindowSpec>,
}

/// A loaded scenario plus any materialization notes (for example the
/// pole-list completion).
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub config: ScenarioConfig,
    pub notes: Vec<String>,
}

impl ScenarioConfig {
    /// Number of control samples after the initial one.
    pub fn sample_count(&self) -> usize {
        (self.duration / self.control_period).round() as usize
    }

    /// Plant integration sub-steps per control period.
    pub fn substeps(&self) -> usize {
        (self.control_period / self.plant_dt).round() as usize
    }

    /// Reference value in effect at time `t` (step onset inclusive).
    pub fn reference_at(&self, t: f64) -> [f64; 2] {
        let mut r = self.reference_baseline;
        for step in &self.reference_steps {
            if t >= step.time - TIME_EPS {
                r = step.value;
            } else {
                break;
            }
        }
        r
    }

    /// Serializes the fully explicit form of this configuration.
    pub fn to_toml_string(&self) -> String {
        let raw = RawScenario::from_config(self);
        toml::to_string_pretty(&raw).expect("materialized scenario serializes")
    }
}

// ---------------------------------------------------------------------
// Input grammar
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum PoleEntry {
    Real(f64),
    Pair([f64; 2]),
}

impl PoleEntry {
    fn to_complex(&self) -> Complex<f64> {
        match *self {
            PoleEntry::Real(re) => Complex::new(re, 0.0),
            PoleEntry::Pair([re, im]) => Complex::new(re, im),
        }
    }

    fn from_complex(c: Complex<f64>) -> Self {
        if c.im == 0.0 {
            PoleEntry::Real(c.re)
        } else {
            PoleEntry::Pair([c.re, c.im])
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
enum OperatingPointSource {
    #[default]
    Table2,
    ComputedEquilibrium,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
enum InitialStateSource {
    OperatingPoint,
    #[default]
    ComputedEquilibrium,
    Explicit,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RawPlant {
    operating_point_source: OperatingPointSource,
    initial_state_source: InitialStateSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    initial_levels: Option<[f64; 4]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    params: Option<PlantParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    operating_point: Option<OperatingPoint>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawController {
    mode: ControllerMode,
    poles: Vec<PoleEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    completion_pole: Option<f64>,
    parameter_policy: ParameterPolicy,
    integrator_freeze_on_saturation: bool,
}

impl Default for RawController {
    fn default() -> Self {
        Self {
            mode: ControllerMode::Reconfigurable,
            poles: [-0.252, -0.184, -0.017, -0.057, -0.073]
                .iter()
                .map(|&re| PoleEntry::Real(re))
                .collect(),
            completion_pole: None,
            parameter_policy: ParameterPolicy::BasisCycle,
            integrator_freeze_on_saturation: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStep {
    time: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    value: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RawReference {
    #[serde(skip_serializing_if = "Option::is_none")]
    baseline: Option<[f64; 2]>,
    steps: Vec<RawStep>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RawIae {
    windows: Vec<WindowSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default = "default_schema")]
    schema: String,
    duration: f64,
    #[serde(default = "default_plant_dt")]
    plant_dt: f64,
    #[serde(default = "default_control_period")]
    control_period: f64,
    #[serde(default)]
    plant: RawPlant,
    #[serde(default)]
    controller: RawController,
    #[serde(default)]
    reference: RawReference,
    #[serde(default)]
    fdi: FdiConfig,
    #[serde(default)]
    iae: RawIae,
    #[serde(default)]
    faults: Vec<FaultEvent>,
}

fn default_schema() -> String {
    SCHEMA_VERSION.to_string()
}

fn default_plant_dt() -> f64 {
    0.01
}

fn default_control_period() -> f64 {
    0.1
}

impl RawScenario {
    fn from_config(config: &ScenarioConfig) -> Self {
        RawScenario {
            schema: SCHEMA_VERSION.to_string(),
            duration: config.duration,
            plant_dt: config.plant_dt,
            control_period: config.control_period,
            plant: RawPlant {
                operating_point_source: OperatingPointSource::Table2,
                initial_state_source: InitialStateSource::Explicit,
                initial_levels: Some(config.initial_levels),
                params: Some(config.params.clone()),
                operating_point: Some(config.operating_point),
            },
            controller: RawController {
                mode: config.mode,
                poles: config.poles.poles().iter().map(|&c| PoleEntry::from_complex(c)).collect(),
                completion_pole: None,
                parameter_policy: config.parameter_policy,
                integrator_freeze_on_saturation: config.integrator_freeze_on_saturation,
            },
            reference: RawReference {
                baseline: Some(config.reference_baseline),
                steps: config
                    .reference_steps
                    .iter()
                    .map(|s| RawStep { time: s.time, value: Some(s.value), delta: None })
                    .collect(),
            },
            fdi: config.fdi,
            iae: RawIae { windows: config.iae_windows.clone() },
            faults: config.fault_schedule.clone(),
        }
    }
}

// ---------------------------------------------------------------------
// Materialization
// ---------------------------------------------------------------------

fn materialize(raw: RawScenario) -> Result<LoadedScenario, ScenarioError> {
    if raw.schema != SCHEMA_VERSION {
        return Err(ScenarioError::Schema { found: raw.schema });
    }
    let mut notes = Vec::new();

    if !(raw.duration > 0.0) {
        return Err(invalid(format!("duration must be > 0, got {}", raw.duration)));
    }
    if !(raw.plant_dt > 0.0) {
        return Err(invalid(format!("plant_dt must be > 0, got {}", raw.plant_dt)));
    }
    if raw.control_period < raw.plant_dt {
        return Err(invalid(format!(
            "control_period ({}) must be >= plant_dt ({})",
            raw.control_period, raw.plant_dt
        )));
    }
    let substep_ratio = raw.control_period / raw.plant_dt;
    if (substep_ratio - substep_ratio.round()).abs() > 1e-12 {
        return Err(invalid(format!(
            "control_period ({}) must be an integer multiple of plant_dt ({})",
            raw.control_period, raw.plant_dt
        )));
    }
    let sample_ratio = raw.duration / raw.control_period;
    if (sample_ratio - sample_ratio.round()).abs() > 1e-9 {
        return Err(invalid(format!(
            "duration ({}) must be an integer multiple of control_period ({})",
            raw.duration, raw.control_period
        )));
    }

    let params = raw.plant.params.clone().unwrap_or_default();
    params.validate().map_err(invalid)?;

    let operating_point = match raw.plant.operating_point {
        Some(op) => op,
        None => match raw.plant.operating_point_source {
            OperatingPointSource::Table2 => OperatingPoint::table_values(),
            OperatingPointSource::ComputedEquilibrium => {
                let voltages = OperatingPoint::table_values().voltages;
                let levels = equilibrium_levels(&params, &PumpCommand { voltages });
                OperatingPoint { levels, voltages }
            }
        },
    };
    operating_point.validate().map_err(invalid)?;

    let initial_levels = if let Some(levels) = raw.plant.initial_levels {
        levels
    } else {
        match raw.plant.initial_state_source {
            InitialStateSource::OperatingPoint => operating_point.levels,
            InitialStateSource::ComputedEquilibrium => equilibrium_levels(
                &params,
                &PumpCommand { voltages: operating_point.voltages },
            ),
            InitialStateSource::Explicit => {
                return Err(invalid(
                    "plant.initial_levels is required when plant.initial_state_source = \"explicit\"",
                ))
            }
        }
    };
    for (i, &h) in initial_levels.iter().enumerate() {
        if !(h >= 0.0 && h <= params.tank_height) {
            return Err(invalid(format!(
                "plant.initial_levels[{i}] must lie in [0, {}], got {h}",
                params.tank_height
            )));
        }
    }

    let mut poles: Vec<Complex<f64>> =
        raw.controller.poles.iter().map(PoleEntry::to_complex).collect();
    let augmented_dim = 6;
    if poles.len() == augmented_dim - 1 {
        let completion = raw.controller.completion_pole.unwrap_or(DEFAULT_COMPLETION_POLE);
        poles.push(Complex::new(completion, 0.0));
        notes.push(format!(
            "controller.poles listed {} entries for a {augmented_dim}-state design; appended completion pole {completion}",
            augmented_dim - 1
        ));
    }
    if poles.len() != augmented_dim {
        return Err(invalid(format!(
            "controller.poles must contain {augmented_dim} entries (or {} plus a completion pole), got {}",
            augmented_dim - 1,
            poles.len()
        )));
    }
    let poles = PoleSet::new(poles).map_err(|e| invalid(e.to_string()))?;

    let reference_baseline = raw.reference.baseline.unwrap_or_else(|| {
        [
            params.sensor_gain * operating_point.levels[0],
            params.sensor_gain * operating_point.levels[1],
        ]
    });
    let mut reference_steps = Vec::with_capacity(raw.reference.steps.len());
    let mut running = reference_baseline;
    let mut last_time = f64::NEG_INFINITY;
    for (i, step) in raw.reference.steps.iter().enumerate() {
        if !(step.time >= 0.0) {
            return Err(invalid(format!(
                "reference.steps[{i}].time must be >= 0, got {}",
                step.time
            )));
        }
        if step.time <= last_time {
            return Err(invalid(format!(
                "reference.steps[{i}].time ({}) must be strictly increasing",
                step.time
            )));
        }
        last_time = step.time;
        let value = match (step.value, step.delta) {
            (Some(value), None) => value,
            (None, Some(delta)) => [running[0] + delta[0], running[1] + delta[1]],
            _ => {
                return Err(invalid(format!(
                    "reference.steps[{i}] must set exactly one of `value` or `delta`"
                )))
            }
        };
        running = value;
        reference_steps.push(ReferenceStep { time: step.time, value });
    }

    validate_schedule(&raw.faults).map_err(invalid)?;
    raw.fdi.validate().map_err(invalid)?;

    for (i, w) in raw.iae.windows.iter().enumerate() {
        if w.label.is_empty() {
            return Err(invalid(format!("iae.windows[{i}].label must not be empty")));
        }
        if !(w.start < w.end) {
            return Err(invalid(format!(
                "iae.windows[{i}] must satisfy start < end, got [{}, {})",
                w.start, w.end
            )));
        }
        if w.start < 0.0 || w.end > raw.duration + TIME_EPS {
            return Err(invalid(format!(
                "iae.windows[{i}] [{}, {}) must lie within the scenario duration {}",
                w.start, w.end, raw.duration
            )));
        }
    }

    Ok(LoadedScenario {
        config: ScenarioConfig {
            params,
            operating_point,
            initial_levels,
            duration: raw.duration,
            plant_dt: raw.plant_dt,
            control_period: raw.control_period,
            mode: raw.controller.mode,
            poles,
            parameter_policy: raw.controller.parameter_policy,
            integrator_freeze_on_saturation: raw.controller.integrator_freeze_on_saturation,
            reference_baseline,
            reference_steps,
            fault_schedule: raw.faults,
            fdi: raw.fdi,
            iae_windows: raw.iae.windows,
        },
        notes,
    })
}

/// Parses and materializes a scenario document.
pub fn from_toml_str(text: &str) -> Result<LoadedScenario, ScenarioError> {
    let raw: RawScenario = toml::from_str(text)?;
    materialize(raw)
}

/// Loads a scenario file, materializing every defaulted field.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<LoadedScenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    from_toml_str(&text)
}

/// Applies a `--set key=value` style dotted-path override to a parsed
/// TOML document. Numeric segments index existing array elements; the
/// value is parsed as a TOML literal, falling back to a bare string.
pub fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<(), ScenarioError> {
    let (path, raw_value) = assignment
        .split_once('=')
        .ok_or_else(|| invalid(format!("override {assignment:?} must look like key=value")))?;
    let path = path.trim();
    if path.is_empty() {
        return Err(invalid("override key must not be empty"));
    }
    let value: toml::Value = match format!("v = {raw_value}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("just inserted"),
        Err(_) => toml::Value::String(raw_value.trim().to_string()),
    };
    let segments: Vec<&str> = path.split('.').collect();
    set_in_table(doc, path, &segments, value)
}

fn set_in_table(
    table: &mut toml::Table,
    path: &str,
    segments: &[&str],
    value: toml::Value,
) -> Result<(), ScenarioError> {
    let (head, rest) = segments.split_first().expect("non-empty override path");
    if rest.is_empty() {
        table.insert(head.to_string(), value);
        return Ok(());
    }
    let entry = table
        .entry(head.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    set_in_value(entry, path, rest, value)
}

fn set_in_value(
    node: &mut toml::Value,
    path: &str,
    segments: &[&str],
    value: toml::Value,
) -> Result<(), ScenarioError> {
    match node {
        toml::Value::Table(t) => set_in_table(t, path, segments, value),
        toml::Value::Array(arr) => {
            let (head, rest) = segments.split_first().expect("non-empty override path");
            let idx: usize = head.parse().map_err(|_| {
                invalid(format!("override path {path:?}: expected an array index, got {head:?}"))
            })?;
            if idx >= arr.len() {
                return Err(invalid(format!(
                    "override path {path:?}: index {idx} out of range (len {})",
                    arr.len()
                )));
            }
            if rest.is_empty() {
                arr[idx] = value;
                Ok(())
            } else {
                set_in_value(&mut arr[idx], path, rest, value)
            }
        }
        _ => Err(invalid(format!(
            "override path {path:?}: cannot descend into a scalar at {:?}",
            segments[0]
        ))),
    }
}

/// Parses a scenario document after applying command-line overrides.
pub fn from_toml_str_with_overrides(
    text: &str,
    overrides: &[String],
) -> Result<LoadedScenario, ScenarioError> {
    if overrides.is_empty() {
        return from_toml_str(text);
    }
    let mut doc: toml::Table = text.parse()?;
    for assignment in overrides {
        apply_override(&mut doc, assignment)?;
    }
    let raw: RawScenario = toml::Value::Table(doc).try_into()?;
    materialize(raw)
}
