//! Scenario files: one JSON document describing the workspace, the model,
//! the planner settings, and the experiment sweep.
//!
//! Omitted optional fields take their defaults. Any field can be overridden
//! from the environment: `RRTMPPI_PLANNER__MPPI__SAMPLES=2000` sets
//! `planner.mppi.samples`. Segments are lowercased and joined by `__`;
//! numeric segments index arrays. Values are parsed as JSON when possible
//! and taken as strings otherwise.

use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dynamics::{Control, DynamicsParams};
use crate::env::{Environment, Obstacle, Shape};
use crate::error::{Error, Result};
use crate::geometry::{Aabb, Point};
use crate::planner::{Mode, PlannerConfig};

pub const SCENARIO_VERSION: u32 = 1;
pub const ENV_PREFIX: &str = "RRTMPPI_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    pub environment: Environment,
    #[serde(default)]
    pub dynamics: DynamicsParams,
    #[serde(default)]
    pub planner: PlannerConfig,
    #[serde(default = "default_modes")]
    pub modes: Vec<Mode>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Replanning radii swept by `bench`; empty means the planner's own.
    #[serde(default)]
    pub replan_radii: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

fn default_modes() -> Vec<Mode> {
    vec![Mode::RrtMppi]
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

impl Scenario {
    pub fn new(environment: Environment) -> Self {
        Scenario {
            version: SCENARIO_VERSION,
            notes: None,
            environment,
            dynamics: DynamicsParams::default(),
            planner: PlannerConfig::default(),
            modes: default_modes(),
            seeds: default_seeds(),
            replan_radii: Vec::new(),
            output_dir: None,
        }
    }

    /// Parses and validates without environment overrides.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        let s: Scenario = serde_json::from_value(value).map_err(|e| Error::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    /// Reads `path`, applies `RRTMPPI_*` variables from the process
    /// environment, and validates.
    pub fn load(path: impl AsRef<FsPath>) -> Result<Self> {
        Self::load_with(path, std::env::vars())
    }

    pub fn load_with(path: impl AsRef<FsPath>, vars: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut value: Value = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
        apply_overrides(&mut value, vars)?;
        Self::from_value(value)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SCENARIO_VERSION {
            return Err(Error::invalid(
                "version",
                format!("unsupported version {}, expected {SCENARIO_VERSION}", self.version),
            ));
        }
        self.environment.validate()?;
        if let Some(k) = self.environment.blocking_obstacle(self.environment.start, 0.0) {
            return Err(Error::invalid("start", format!("lies inside obstacles[{k}]")));
        }
        self.dynamics.validate("dynamics")?;
        self.planner.validate("planner")?;
        if self.modes.is_empty() {
            return Err(Error::invalid("modes", "must not be empty"));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("seeds", "must not be empty"));
        }
        for (i, r) in self.replan_radii.iter().enumerate() {
            if r.is_nan() || *r <= 0.0 {
                return Err(Error::invalid(format!("replan_radii[{i}]"), "must be positive"));
            }
        }
        Ok(())
    }

    /// Static workspace used throughout the experiments: a 50 x 27 field
    /// with a few circles and rectangles near the line from start (2, 3)
    /// to goal (49, 24).
    ///
    /// The layout is a by-eye reconstruction, not a copy of exact
    /// coordinates.
    pub fn preset_static() -> Self {
        let mut s = Scenario::new(preset_environment(0.0));
        s.notes = Some("Static workspace. Obstacle layout is a by-eye reconstruction.".into());
        s.seeds = (0..10).collect();
        s.modes = vec![Mode::RrtMppi, Mode::FixedMean(Control::new(1.0, 0.0))];
        s
    }

    /// As [`Scenario::preset_static`], with every circle growing by `growth`
    /// at t = 0.5 s.
    pub fn preset_dynamic(growth: f64) -> Self {
        let mut s = Scenario::preset_static();
        s.environment = preset_environment(growth);
        s.notes = Some(format!(
            "Circle radii grow by {growth} at t = 0.5 s. Obstacle layout is a by-eye reconstruction."
        ));
        s
    }
}

/// Time at which circles grow in the dynamic scenarios.
pub const GROWTH_TIME: f64 = 0.5;

fn preset_environment(growth: f64) -> Environment {
    let circles = [
        (Point::new(19.82, 16.98), 4.0),
        (Point::new(8.0, 21.5), 1.2),
        (Point::new(40.0, 6.0), 1.5),
    ];
    let rects = [
        (Point::new(4.0, 15.0), Point::new(8.0, 21.0)),
        (Point::new(31.0, 0.0), Point::new(34.0, 5.0)),
        (Point::new(43.0, 3.0), Point::new(47.0, 8.0)),
    ];
    let mut obstacles: Vec<Obstacle> = circles
        .iter()
        .map(|&(c, r)| {
            let o = Obstacle::fixed(Shape::circle(c, r));
            if growth > 0.0 {
                o.with_change(GROWTH_TIME, Shape::circle(c, r + growth))
            } else {
                o
            }
        })
        .collect();
    obstacles.extend(rects.iter().map(|&(a, b)| Obstacle::fixed(Shape::rect(a, b))));
    Environment::new(
        Aabb::new(Point::new(0.0, 0.0), Point::new(50.0, 27.0)),
        obstacles,
        Point::new(2.0, 3.0),
        Point::new(49.0, 24.0),
    )
    .expect("preset environment is valid")
}

/// Applies `PREFIX` + `A__B__C=value` overrides to a parsed document.
pub fn apply_overrides(doc: &mut Value, vars: impl IntoIterator<Item = (String, String)>) -> Result<()> {
    let mut vars: Vec<(String, String)> = vars
        .into_iter()
        .filter(|(k, _)| k.starts_with(ENV_PREFIX) && k.len() > ENV_PREFIX.len())
        .collect();
    vars.sort();
    for (key, raw) in vars {
        let segments: Vec<String> = key[ENV_PREFIX.len()..].split("__").map(str::to_lowercase).collect();
        let value = serde_json::from_str(&raw).unwrap_or(Value::String(raw.clone()));
        set_path(doc, &segments, value).map_err(|m| Error::invalid(key.clone(), m))?;
    }
    Ok(())
}

fn set_path(doc: &mut Value, segments: &[String], value: Value) -> std::result::Result<(), String> {
    let Some((head, rest)) = segments.split_first() else {
        *doc = value;
        return Ok(());
    };
    if doc.is_null() {
        *doc = Value::Object(Default::default());
    }
    let child = match doc {
        Value::Object(map) => map.entry(head.clone()).or_insert(Value::Null),
        Value::Array(items) => {
            let i: usize = head.parse().map_err(|_| format!("`{head}` is not an array index"))?;
            let len = items.len();
            items
                .get_mut(i)
                .ok_or_else(|| format!("index {i} out of range for array of {len}"))?
        }
        _ => return Err(format!("cannot descend into `{head}`: not an object or array")),
    };
    set_path(child, rest, value)
}
