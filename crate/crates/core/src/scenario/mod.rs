//! Operating conditions: feed and underflow schedules, feed concentrations,
//! initial profiles, vessel geometry and run controls.
//!
//! Everything in this module is in SI units (s, m, m³/s, kg/m³). The JSON
//! scenario format in [`config`] uses hours and m³/h and converts on load.

pub mod builtin;
pub mod config;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::constitutive::ConstitutiveParams;
use crate::error::{Error, Result};
use crate::grid::{AreaProfile, FaceAreaMode, Grid};
use crate::reactions::{Denitrification, DenitrificationParams, Inert, ReactionModel, ZMode};

pub use builtin::{builtin, BUILTIN_NAMES};
pub use config::{load_scenario, ScenarioFile};

/// Piecewise-constant vector-valued function of time, right-continuous and
/// extended by the last value.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl Schedule {
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::config("schedule", "need one value per breakpoint"));
        }
        if times[0] != 0.0 {
            return Err(Error::config("schedule.times", "first breakpoint must be 0"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::config("schedule.times", "breakpoints must increase strictly"));
        }
        let width = values[0].len();
        if values.iter().any(|v| v.len() != width || v.iter().any(|x| !x.is_finite())) {
            return Err(Error::config("schedule.values", "values must be finite with equal lengths"));
        }
        Ok(Self { times, values })
    }

    pub fn constant(value: Vec<f64>) -> Self {
        Self {
            times: vec![0.0],
            values: vec![value],
        }
    }

    pub fn scalar(times: Vec<f64>, values: &[f64]) -> Result<Self> {
        Self::new(times, values.iter().map(|&v| vec![v]).collect())
    }

    pub fn width(&self) -> usize {
        self.values[0].len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    fn interval(&self, t: f64) -> usize {
        self.times.partition_point(|&b| b <= t).saturating_sub(1)
    }

    pub fn value_at(&self, t: f64) -> &[f64] {
        &self.values[self.interval(t)]
    }

    /// Mean of the schedule over `[t, t + dt]`, written into `out`.
    pub fn average_into(&self, t: f64, dt: f64, out: &mut [f64]) {
        if !(t + dt > t) {
            out.copy_from_slice(self.value_at(t));
            return;
        }
        out.fill(0.0);
        let end = t + dt;
        let span = end - t;
        let mut i = self.interval(t);
        let mut lo = t;
        loop {
            let hi = self.times.get(i + 1).map_or(end, |&b| b.min(end));
            for (o, v) in out.iter_mut().zip(&self.values[i]) {
                *o += (hi - lo) * v;
            }
            if hi >= end {
                break;
            }
            lo = hi;
            i += 1;
        }
        for o in out.iter_mut() {
            *o /= span;
        }
    }

    pub fn average(&self, t: f64, dt: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.width()];
        self.average_into(t, dt, &mut out);
        out
    }

    /// Largest value of component `k` on `[0, horizon]`.
    pub fn max_on(&self, k: usize, horizon: f64) -> f64 {
        self.times
            .iter()
            .zip(&self.values)
            .filter(|(&t, _)| t <= horizon)
            .map(|(_, v)| v[k])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// First breakpoint strictly after `t`, if any.
    pub fn next_breakpoint(&self, t: f64) -> Option<f64> {
        self.times.iter().copied().find(|&b| b > t)
    }
}

/// Piecewise-linear profile `z ↦ value + slope (z - start)` on the piece with
/// the largest `start ≤ z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Profile {
    pub pieces: Vec<Piece>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Piece {
    pub start: f64,
    pub value: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub slope: f64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

impl Profile {
    pub fn constant(value: f64) -> Self {
        Self {
            pieces: vec![Piece {
                start: f64::MIN,
                value,
                slope: 0.0,
            }],
        }
    }

    /// Value `lo` for `z < at` and `hi` from `at` on.
    pub fn step(at: f64, lo: f64, hi: f64) -> Self {
        Self {
            pieces: vec![
                Piece { start: f64::MIN, value: lo, slope: 0.0 },
                Piece { start: at, value: hi, slope: 0.0 },
            ],
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            pieces: self
                .pieces
                .iter()
                .map(|p| Piece {
                    start: p.start,
                    value: p.value * factor,
                    slope: p.slope * factor,
                })
                .collect(),
        }
    }

    fn validate(&self, top: f64, path: &str) -> Result<()> {
        if self.pieces.is_empty() || self.pieces[0].start > top {
            return Err(Error::config(path, format!("first piece must start at or above z = {top}")));
        }
        if self.pieces.windows(2).any(|w| !(w[1].start > w[0].start)) {
            return Err(Error::config(path, "piece starts must increase strictly"));
        }
        if self.pieces.iter().any(|p| !(p.value.is_finite() && p.slope.is_finite())) {
            return Err(Error::config(path, "values must be finite"));
        }
        Ok(())
    }

    pub fn eval(&self, z: f64) -> f64 {
        let i = self.pieces.partition_point(|p| p.start <= z).saturating_sub(1);
        let p = &self.pieces[i];
        p.value + p.slope * (z - p.start)
    }

    /// Exact `∫_a^b` of the profile restricted to `[lo, hi]`.
    fn integral_inside(&self, a: f64, b: f64) -> f64 {
        let mut total = 0.0;
        for (i, p) in self.pieces.iter().enumerate() {
            let end = self.pieces.get(i + 1).map_or(f64::INFINITY, |q| q.start);
            let lo = a.max(p.start);
            let hi = b.min(end);
            if hi > lo {
                let mid = 0.5 * (lo + hi);
                total += (hi - lo) * (p.value + p.slope * (mid - p.start));
            }
        }
        total
    }

    /// Mean over `[a, b]` of the profile continued by its boundary values
    /// outside `[top, bottom]`.
    pub fn average(&self, a: f64, b: f64, top: f64, bottom: f64) -> f64 {
        let mut total = 0.0;
        if a < top {
            total += self.eval(top) * (b.min(top) - a);
        }
        if b > bottom {
            total += self.eval(bottom) * (b - a.max(bottom));
        }
        let (lo, hi) = (a.max(top), b.min(bottom));
        if hi > lo {
            total += self.integral_inside(lo, hi);
        }
        total / (b - a)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub solids: Vec<Profile>,
    pub solubles: Vec<Profile>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub h: f64,
    pub b: f64,
    pub profile: AreaProfile,
    pub face_area: FaceAreaMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReactionSpec {
    Denitrification {
        #[serde(flatten)]
        params: DenitrificationParams,
        #[serde(default)]
        z_mode: ZMode,
    },
    /// No reactions with the given component counts.
    None { solids: usize, solubles: usize },
}

impl ReactionSpec {
    pub fn solids(&self) -> usize {
        match self {
            ReactionSpec::Denitrification { .. } => 2,
            ReactionSpec::None { solids, .. } => *solids,
        }
    }

    pub fn solubles(&self) -> usize {
        match self {
            ReactionSpec::Denitrification { .. } => 3,
            ReactionSpec::None { solubles, .. } => *solubles,
        }
    }

    pub fn build(&self, x_max: f64) -> Result<Arc<dyn ReactionModel>> {
        Ok(match *self {
            ReactionSpec::Denitrification { params, z_mode } => {
                Arc::new(Denitrification::new(params, z_mode, x_max)?)
            }
            ReactionSpec::None { solids, solubles } => Arc::new(Inert { solids, solubles }),
        })
    }
}

/// Number of cells, horizon and snapshot cadence (s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunControls {
    pub cells: usize,
    pub horizon: f64,
    pub cadence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub geometry: Geometry,
    pub constitutive: ConstitutiveParams,
    pub reactions: ReactionSpec,
    /// Soluble diffusion coefficients `d^(k)` (m²/s).
    pub diffusion: Vec<f64>,
    /// Feed flow `Q_f` (m³/s).
    pub feed_flow: Schedule,
    /// Underflow `Q_u` (m³/s).
    pub underflow: Schedule,
    pub feed_solids: Schedule,
    pub feed_solubles: Schedule,
    pub initial: InitialData,
    pub run: RunControls,
}

impl Scenario {
    pub fn solids(&self) -> usize {
        self.reactions.solids()
    }

    pub fn solubles(&self) -> usize {
        self.reactions.solubles()
    }

    pub fn validate(&self) -> Result<()> {
        self.constitutive.validate()?;
        let g = &self.geometry;
        if !(g.h > 0.0 && g.b > 0.0) {
            return Err(Error::config("geometry", "H and B must be positive"));
        }
        g.profile.validate(g.h, g.b)?;
        let (kc, ks) = (self.solids(), self.solubles());
        if kc == 0 {
            return Err(Error::config("reactions", "need at least one solid component"));
        }
        if self.diffusion.len() != ks || self.diffusion.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
            return Err(Error::config("diffusion", format!("need {ks} nonnegative coefficients")));
        }
        if self.feed_flow.width() != 1 || self.underflow.width() != 1 {
            return Err(Error::config("feed.flow", "flows are scalar schedules"));
        }
        if self.feed_solids.width() != kc {
            return Err(Error::config("feed.solids", format!("need {kc} components")));
        }
        if self.feed_solubles.width() != ks {
            return Err(Error::config("feed.solubles", format!("need {ks} components")));
        }
        // flows: Q_f ≥ Q_u > 0 on every joint interval
        let mut t = 0.0;
        loop {
            let (qf, qu) = (self.feed_flow.value_at(t)[0], self.underflow.value_at(t)[0]);
            if !(qu > 0.0 && qf >= qu) {
                return Err(Error::config(
                    "feed.flow",
                    format!("need Q_f ≥ Q_u > 0, got Q_f = {qf}, Q_u = {qu} at t = {t} s"),
                ));
            }
            match next_event(&[&self.feed_flow, &self.underflow], t) {
                Some(n) => t = n,
                None => break,
            }
        }
        let x_max = self.constitutive.x_max;
        for v in self.feed_solids.values() {
            if v.iter().any(|c| *c < 0.0) || v.iter().sum::<f64>() > x_max {
                return Err(Error::config("feed.solids", "need 0 ≤ C_f with ΣC_f ≤ X_max"));
            }
        }
        for v in self.feed_solubles.values() {
            if v.iter().any(|s| *s < 0.0) {
                return Err(Error::config("feed.solubles", "need S_f ≥ 0"));
            }
        }
        let init = &self.initial;
        if init.solids.len() != kc || init.solubles.len() != ks {
            return Err(Error::config("initial", format!("need {kc} solid and {ks} soluble profiles")));
        }
        for (k, p) in init.solids.iter().enumerate() {
            p.validate(-g.h, &format!("initial.solids[{k}]"))?;
        }
        for (k, p) in init.solubles.iter().enumerate() {
            p.validate(-g.h, &format!("initial.solubles[{k}]"))?;
        }
        let r = self.run;
        if r.cells < 2 {
            return Err(Error::config("run.cells", "need at least 2 cells"));
        }
        if !(r.horizon >= 0.0 && r.horizon.is_finite()) {
            return Err(Error::config("run.horizon", "must be nonnegative"));
        }
        if !(r.cadence > 0.0) {
            return Err(Error::config("run.cadence", "must be positive"));
        }
        Ok(())
    }

    pub fn grid(&self, cells: usize) -> Result<Grid> {
        let g = &self.geometry;
        Grid::build(&g.profile, g.h, g.b, cells, g.face_area)
    }

    /// `‖Q_f‖_{∞,T}`.
    pub fn max_feed_flow(&self, horizon: f64) -> f64 {
        self.feed_flow.max_on(0, horizon)
    }

    /// `Q_e = Q_f - Q_u`.
    pub fn effluent_flow(&self, t: f64) -> f64 {
        self.feed_flow.value_at(t)[0] - self.underflow.value_at(t)[0]
    }

    /// First time after `t` at which any input jumps.
    pub fn next_breakpoint(&self, t: f64) -> Option<f64> {
        next_event(
            &[&self.feed_flow, &self.underflow, &self.feed_solids, &self.feed_solubles],
            t,
        )
    }

    pub fn without_reactions(&self) -> Self {
        let mut s = self.clone();
        s.reactions = ReactionSpec::None {
            solids: self.solids(),
            solubles: self.solubles(),
        };
        s
    }
}

fn next_event(schedules: &[&Schedule], t: f64) -> Option<f64> {
    schedules
        .iter()
        .filter_map(|s| s.next_breakpoint(t))
        .min_by(f64::total_cmp)
}

/// Bulk flow through every face (m³/s): `Q_u - Q_f` above the feed layer and
/// `Q_u` from its top face downwards.
pub fn face_bulk_flow(grid: &Grid, q_f: f64, q_u: f64, out: &mut [f64]) {
    for (i, q) in out.iter_mut().enumerate() {
        *q = if i <= grid.feed_cell { q_u - q_f } else { q_u };
    }
}

/// Face velocities `q = Q/A` (m/s).
pub fn face_velocity(grid: &Grid, flows: &[f64], out: &mut [f64]) {
    for ((v, q), a) in out.iter_mut().zip(flows).zip(&grid.a_faces) {
        *v = q / a;
    }
}
