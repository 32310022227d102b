//! JSON scenario files.
//!
//! By default times are given in hours and flows in m³/h; with
//! `"units": "seconds"` they are in s and m³/s. Lengths are in m and
//! concentrations in kg/m³. Material and kinetic parameters stay in SI
//! seconds. Files are written in hours unless some time or flow would not
//! survive the conversion bit for bit.
//!
//! ```json
//! {
//!   "name": "example1",
//!   "geometry": { "H": 1, "B": 3, "segments": [ { "top": -1, "bottom": 3, "shape": { "kind": "step", "area": 400 } } ] },
//!   "reactions": { "model": "denitrification", "yield_coefficient": 0.67, "decay": 6.94e-6, "undegradable_fraction": 0.2,
//!                  "mu_max": 5.56e-5, "k_no3": 5e-4, "k_s": 0.02 },
//!   "diffusion": [0, 0, 0],
//!   "feed": {
//!     "flow":       { "times": [0, 2, 4], "values": [450, 130, 65] },
//!     "underflow":  { "times": [0, 2, 4, 7], "values": [30, 100, 35, 50] },
//!     "solids":     { "times": [0], "values": [[0.714, 0.286]] },
//!     "solubles":   { "times": [0], "values": [[0.006, 0.0009, 0]] }
//!   },
//!   "initial": { "solids": [ [ { "start": -1, "value": 0 } ] ], "solubles": [ ... ] },
//!   "run": { "cells": 128, "horizon": 9, "cadence": 1 }
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{builtin, Geometry, InitialData, Profile, ReactionSpec, RunControls, Scenario, Schedule};
use crate::constitutive::ConstitutiveParams;
use crate::error::{Error, Result};
use crate::grid::{FaceAreaMode, Segment};

const HOUR: f64 = 3600.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeUnit {
    /// Times in h, flows in m³/h.
    #[default]
    Hours,
    /// Times in s, flows in m³/s.
    Seconds,
}

impl TimeUnit {
    pub fn seconds(self) -> f64 {
        match self {
            TimeUnit::Hours => HOUR,
            TimeUnit::Seconds => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub units: TimeUnit,
    pub geometry: GeometryFile,
    #[serde(default)]
    pub constitutive: ConstitutiveParams,
    pub reactions: ReactionSpec,
    pub diffusion: Vec<f64>,
    pub feed: FeedFile,
    pub initial: InitialFile,
    pub run: RunFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryFile {
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub segments: Vec<Segment>,
    #[serde(default)]
    pub face_area: FaceAreaMode,
}

/// Breakpoints and flows in the file's time unit; concentrations in kg/m³.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarScheduleFile {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorScheduleFile {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedFile {
    pub flow: ScalarScheduleFile,
    pub underflow: ScalarScheduleFile,
    pub solids: VectorScheduleFile,
    pub solubles: VectorScheduleFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialFile {
    pub solids: Vec<Profile>,
    pub solubles: Vec<Profile>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub cells: usize,
    pub horizon: f64,
    pub cadence: f64,
}

fn scalar(f: &ScalarScheduleFile, unit: f64, path: &str) -> Result<Schedule> {
    let times = f.times.iter().map(|t| t * unit).collect();
    let values: Vec<f64> = f.values.iter().map(|q| q / unit).collect();
    Schedule::scalar(times, &values).map_err(|e| rebase(e, path))
}

fn vector(f: &VectorScheduleFile, unit: f64, path: &str) -> Result<Schedule> {
    let times = f.times.iter().map(|t| t * unit).collect();
    Schedule::new(times, f.values.clone()).map_err(|e| rebase(e, path))
}

fn rebase(e: Error, path: &str) -> Error {
    match e {
        Error::Config { path: p, msg } => {
            let tail = p.strip_prefix("schedule").unwrap_or(&p);
            Error::config(format!("{path}{tail}"), msg)
        }
        other => other,
    }
}

impl ScenarioFile {
    pub fn into_scenario(self) -> Result<Scenario> {
        let f = &self.feed;
        let u = self.units.seconds();
        let scenario = Scenario {
            name: self.name.clone(),
            geometry: Geometry {
                h: self.geometry.h,
                b: self.geometry.b,
                profile: crate::grid::AreaProfile {
                    segments: self.geometry.segments.clone(),
                },
                face_area: self.geometry.face_area,
            },
            constitutive: self.constitutive,
            reactions: self.reactions,
            diffusion: self.diffusion.clone(),
            feed_flow: scalar(&f.flow, u, "feed.flow")?,
            underflow: scalar(&f.underflow, u, "feed.underflow")?,
            feed_solids: vector(&f.solids, u, "feed.solids")?,
            feed_solubles: vector(&f.solubles, u, "feed.solubles")?,
            initial: InitialData {
                solids: self.initial.solids.clone(),
                solubles: self.initial.solubles.clone(),
            },
            run: RunControls {
                cells: self.run.cells,
                horizon: self.run.horizon * u,
                cadence: self.run.cadence * u,
            },
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_scenario(s: &Scenario) -> Self {
        let units = if hours_are_exact(s) {
            TimeUnit::Hours
        } else {
            TimeUnit::Seconds
        };
        let u = units.seconds();
        let times = |sch: &Schedule| sch.times().iter().map(|t| t / u).collect();
        let flows = |sch: &Schedule| ScalarScheduleFile {
            times: times(sch),
            values: sch.values().iter().map(|v| v[0] * u).collect(),
        };
        let conc = |sch: &Schedule| VectorScheduleFile {
            times: times(sch),
            values: sch.values().to_vec(),
        };
        Self {
            name: s.name.clone(),
            units,
            geometry: GeometryFile {
                h: s.geometry.h,
                b: s.geometry.b,
                segments: s.geometry.profile.segments.clone(),
                face_area: s.geometry.face_area,
            },
            constitutive: s.constitutive,
            reactions: s.reactions,
            diffusion: s.diffusion.clone(),
            feed: FeedFile {
                flow: flows(&s.feed_flow),
                underflow: flows(&s.underflow),
                solids: conc(&s.feed_solids),
                solubles: conc(&s.feed_solubles),
            },
            initial: InitialFile {
                solids: s.initial.solids.clone(),
                solubles: s.initial.solubles.clone(),
            },
            run: RunFile {
                cells: s.run.cells,
                horizon: s.run.horizon / u,
                cadence: s.run.cadence / u,
            },
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Whether every time and flow of `s` survives the trip through hours.
fn hours_are_exact(s: &Scenario) -> bool {
    let time_ok = |t: f64| (t / HOUR) * HOUR == t;
    let flow_ok = |q: f64| (q * HOUR) / HOUR == q;
    let schedules = [&s.feed_flow, &s.underflow, &s.feed_solids, &s.feed_solubles];
    schedules.iter().all(|sch| sch.times().iter().all(|&t| time_ok(t)))
        && [&s.feed_flow, &s.underflow]
            .iter()
            .all(|sch| sch.values().iter().all(|v| flow_ok(v[0])))
        && time_ok(s.run.horizon)
        && time_ok(s.run.cadence)
}

/// Parses a scenario document, reporting schema errors with their field path.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(path, e.into_inner().to_string())
    })?;
    file.into_scenario()
}

/// Loads a builtin scenario by name or a JSON scenario file by path.
pub fn load_scenario(name_or_path: &str) -> Result<Scenario> {
    if let Some(s) = builtin::builtin_opt(name_or_path) {
        return Ok(s);
    }
    let path = Path::new(name_or_path);
    if !path.exists() && !name_or_path.ends_with(".json") {
        return Err(Error::UnknownBuiltin(name_or_path.to_string()));
    }
    parse_scenario(&std::fs::read_to_string(path)?)
}
