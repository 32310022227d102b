//! The five denitrification benchmark scenarios.

use super::{Geometry, InitialData, Piece, Profile, ReactionSpec, RunControls, Scenario, Schedule};
use crate::constitutive::ConstitutiveParams;
use crate::error::{Error, Result};
use crate::grid::{AreaProfile, FaceAreaMode};
use crate::reactions::{DenitrificationParams, ZMode};

pub const BUILTIN_NAMES: [&str; 5] = ["example1", "example2", "example3", "example4", "example5"];

const HOUR: f64 = 3600.0;
const OHO: f64 = 5.0 / 7.0;
const UND: f64 = 2.0 / 7.0;

pub fn builtin(name: &str) -> Result<Scenario> {
    builtin_opt(name).ok_or_else(|| Error::UnknownBuiltin(name.to_string()))
}

pub(crate) fn builtin_opt(name: &str) -> Option<Scenario> {
    Some(match name {
        "example1" => example1(),
        "example2" => example2(),
        "example3" => variable_diffusion("example3", [0.0, 0.0, 0.0]),
        "example4" => variable_diffusion("example4", [0.0, 0.0, 3e-6]),
        "example5" => variable_diffusion("example5", [1e-5, 5e-5, 3e-6]),
        _ => return None,
    })
}

fn hours(t: &[f64]) -> Vec<f64> {
    t.iter().map(|h| h * HOUR).collect()
}

fn flow(t: &[f64], q_m3h: &[f64]) -> Schedule {
    let q: Vec<f64> = q_m3h.iter().map(|q| q / HOUR).collect();
    Schedule::scalar(hours(t), &q).expect("builtin flow schedule")
}

fn solids_feed(t: &[f64], x_f: &[f64]) -> Schedule {
    Schedule::new(hours(t), x_f.iter().map(|x| vec![OHO * x, UND * x]).collect())
        .expect("builtin feed schedule")
}

fn soluble_feed() -> Schedule {
    Schedule::constant(vec![6.00e-3, 9.00e-4, 0.0])
}

fn denitrification() -> ReactionSpec {
    ReactionSpec::Denitrification {
        params: DenitrificationParams::default(),
        z_mode: ZMode::Identity,
    }
}

fn ramp_from(at: f64, slope: f64) -> Profile {
    Profile {
        pieces: vec![
            Piece { start: f64::MIN, value: 0.0, slope: 0.0 },
            Piece { start: at, value: 0.0, slope },
        ],
    }
}

/// `S⁰ = (0.006, 0, 0)` above `z = 0.5` and `(0, 0.12(z - 0.5), 0.006)` below.
fn layered_solubles() -> Vec<Profile> {
    vec![
        Profile::step(0.5, 0.006, 0.0),
        ramp_from(0.5, 0.12),
        Profile::step(0.5, 0.0, 0.006),
    ]
}

fn example1() -> Scenario {
    // X⁰ = 0 above z = 0.5 and 3.8 z + 1.6 below
    let x0 = Profile {
        pieces: vec![
            Piece { start: f64::MIN, value: 0.0, slope: 0.0 },
            Piece { start: 0.5, value: 3.8 * 0.5 + 1.6, slope: 3.8 },
        ],
    };
    Scenario {
        name: "example1".into(),
        geometry: Geometry {
            h: 1.0,
            b: 3.0,
            profile: AreaProfile::constant(400.0, -1.0, 3.0),
            face_area: FaceAreaMode::CellAverage,
        },
        constitutive: ConstitutiveParams::default(),
        reactions: denitrification(),
        diffusion: vec![0.0; 3],
        feed_flow: flow(&[0.0, 2.0, 4.0], &[450.0, 130.0, 65.0]),
        underflow: flow(&[0.0, 2.0, 4.0, 7.0], &[30.0, 100.0, 35.0, 50.0]),
        feed_solids: solids_feed(&[0.0, 2.0, 4.0, 7.0], &[1.0, 0.5, 3.0, 4.0]),
        feed_solubles: soluble_feed(),
        initial: InitialData {
            solids: vec![x0.scaled(OHO), x0.scaled(UND)],
            solubles: layered_solubles(),
        },
        run: RunControls {
            cells: 128,
            horizon: 9.0 * HOUR,
            cadence: HOUR,
        },
    }
}

fn example2() -> Scenario {
    Scenario {
        name: "example2".into(),
        geometry: Geometry {
            h: 1.0,
            b: 4.0,
            profile: AreaProfile::v7like(),
            face_area: FaceAreaMode::CellAverage,
        },
        constitutive: ConstitutiveParams::default(),
        reactions: denitrification(),
        diffusion: vec![0.0; 3],
        feed_flow: flow(&[0.0, 4.0, 6.0], &[100.0, 150.0, 250.0]),
        underflow: flow(&[0.0, 4.0, 6.0, 9.0], &[10.0, 100.0, 50.0, 5.0]),
        feed_solids: solids_feed(&[0.0, 2.0, 4.0, 7.0], &[4.0, 2.0, 5.0, 6.0]),
        feed_solubles: soluble_feed(),
        initial: InitialData {
            solids: vec![
                Profile::step(0.5, 0.0, 20.0 / 7.0),
                Profile::step(0.5, 0.0, 8.0 / 7.0),
            ],
            solubles: layered_solubles(),
        },
        run: RunControls {
            cells: 100,
            horizon: 20.0 * HOUR,
            cadence: HOUR,
        },
    }
}

fn variable_diffusion(name: &str, d: [f64; 3]) -> Scenario {
    let mut s = example2();
    s.name = name.into();
    s.diffusion = d.to_vec();
    s.initial.solubles = vec![
        Profile::step(0.5, 0.006, 0.0),
        ramp_from(0.5, 0.12),
        Profile {
            pieces: vec![
                Piece { start: f64::MIN, value: 0.0, slope: 0.0 },
                Piece { start: 0.5, value: 0.003, slope: 0.0 },
                Piece { start: 1.5, value: 0.006, slope: 0.0 },
            ],
        },
    ];
    s.run = RunControls {
        cells: 100,
        horizon: 3.0 * HOUR,
        cadence: 0.5 * HOUR,
    };
    s
}
