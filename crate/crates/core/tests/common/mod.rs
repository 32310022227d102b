//! Random admissible scenarios shared by the property suites.

#![allow(dead_code)]

use clarifier_core::grid::{AreaProfile, Segment};
use clarifier_core::scenario::{builtin, Piece, Profile, ReactionSpec, Scenario, Schedule};
use rand::Rng;

/// Splits `total` into `k` nonnegative parts.
fn split<R: Rng>(rng: &mut R, total: f64, k: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
    let s: f64 = w.iter().sum();
    if s == 0.0 {
        return vec![total / k as f64; k];
    }
    // rescaling may overshoot `total` by an ulp
    let mut parts: Vec<f64> = w.iter().map(|v| total * v / s).collect();
    while parts.iter().sum::<f64>() > total {
        for p in &mut parts {
            *p = (*p * (1.0 - 1e-15)).max(0.0);
        }
    }
    parts
}

/// Piecewise-constant profiles of `k` components whose sum stays in
/// `[0, cap]`, with 1 to 5 pieces over `[top, bottom]`.
fn random_profiles<R: Rng>(rng: &mut R, k: usize, cap: f64, top: f64, bottom: f64) -> Vec<Profile> {
    let pieces = rng.random_range(1..=5);
    let mut starts: Vec<f64> = (1..pieces).map(|_| rng.random_range(top..bottom)).collect();
    starts.sort_by(f64::total_cmp);
    starts.dedup();
    starts.insert(0, f64::MIN);
    let mut out = vec![Profile { pieces: Vec::new() }; k];
    for &start in &starts {
        let total = if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..=cap) };
        for (p, v) in out.iter_mut().zip(split(rng, total, k)) {
            p.pieces.push(Piece { start, value: v, slope: 0.0 });
        }
    }
    out
}

fn random_times<R: Rng>(rng: &mut R, span: f64) -> Vec<f64> {
    let mut t: Vec<f64> = (0..rng.random_range(0..4)).map(|_| rng.random_range(1.0..span)).collect();
    t.push(0.0);
    t.sort_by(f64::total_cmp);
    t.dedup();
    t
}

/// A random admissible scenario built around the first benchmark: random
/// vessel, schedules with jumps inside `[0, span]` seconds, initial data in
/// the invariant region and random diffusion. Reactions are switched off
/// with probability 1/4.
pub fn random_scenario<R: Rng>(rng: &mut R, span: f64) -> Scenario {
    let mut s = builtin("example1").unwrap();
    let x_max = s.constitutive.x_max;
    let h = rng.random_range(0.3..2.0);
    let b = rng.random_range(1.0..4.0);
    s.geometry.h = h;
    s.geometry.b = b;
    s.geometry.profile = if rng.random_bool(0.5) {
        AreaProfile::constant(rng.random_range(50.0..800.0), -h, b)
    } else {
        AreaProfile {
            segments: vec![Segment::cone_with_areas(
                -h,
                b,
                rng.random_range(100.0..800.0),
                rng.random_range(20.0..400.0),
            )],
        }
    };
    if rng.random_bool(0.25) {
        s.reactions = ReactionSpec::None { solids: 2, solubles: 3 };
    }

    let times = random_times(rng, span);
    let mut qf = Vec::new();
    let mut qu = Vec::new();
    for _ in &times {
        let f = rng.random_range(20.0..700.0) / 3600.0;
        qf.push(f);
        qu.push(f * rng.random_range(0.02..=1.0));
    }
    s.feed_flow = Schedule::scalar(times.clone(), &qf).unwrap();
    s.underflow = Schedule::scalar(times, &qu).unwrap();

    let times = random_times(rng, span);
    let solids = times
        .iter()
        .map(|_| {
            let total = rng.random_range(0.0..=x_max);
            split(rng, total, 2)
        })
        .collect();
    s.feed_solids = Schedule::new(times, solids).unwrap();
    let times = random_times(rng, span);
    let solubles = times
        .iter()
        .map(|_| (0..3).map(|_| rng.random_range(0.0..0.02)).collect())
        .collect();
    s.feed_solubles = Schedule::new(times, solubles).unwrap();

    s.initial.solids = random_profiles(rng, 2, x_max, -h, b);
    s.initial.solubles = (0..3)
        .map(|_| random_profiles(rng, 1, 0.02, -h, b).remove(0))
        .collect();
    s.diffusion = (0..3)
        .map(|_| if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..5e-5) })
        .collect();
    s.validate().unwrap();
    s
}
