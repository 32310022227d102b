//! Explicit Euler march of the semi-discrete system under the step bound
//! that keeps every state in the invariant region.
//!
//! [`simulate`] drives any [`Scheme`] from `t = 0` to the horizon. Steps land
//! exactly on input breakpoints and output times, and every step is
//! followed by an invariant-region check and a mass-ledger update.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::constitutive::ConstitutiveSet;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::mol::{in_omega, omega_violation, Inputs, Layout, Problem, State, Workspace, OMEGA_SLACK};
use crate::numerics::CompensatedSum;
use crate::reactions::ReactionBounds;

pub const DEFAULT_SAFETY: f64 = 0.95;

/// Everything that enters `β₁` and `β₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CflIngredients {
    pub dz: f64,
    /// `‖Q_f‖_{∞,T}` (m³/s).
    pub qf_max: f64,
    pub a_min: f64,
    pub m1: f64,
    pub m2: f64,
    pub vhs_norm: f64,
    pub vhs_prime_norm: f64,
    pub vhs_zero: f64,
    pub dc_norm: f64,
    pub dc_primitive_max: f64,
    pub d_tilde: f64,
    pub m_c: f64,
    pub m_c_tilde: f64,
    pub m_s: f64,
    pub rho_x: f64,
    pub x_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CflBudget {
    pub beta1: f64,
    pub beta2: f64,
    /// `1/max(β₁, β₂)`.
    pub dt_cfl: f64,
    pub safety: f64,
    /// `safety · dt_cfl`.
    pub dt_max: f64,
    pub ingredients: CflIngredients,
}

/// Largest step of the explicit scheme on `grid`.
pub fn cfl_max_dt(
    grid: &Grid,
    cs: &ConstitutiveSet,
    bounds: &ReactionBounds,
    qf_max: f64,
    diffusion: &[f64],
    safety: f64,
) -> Result<CflBudget> {
    let c = grid.constants;
    if !(c.a_min > 0.0) {
        return Err(Error::config("geometry", "nonpositive cell area"));
    }
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(Error::config("run.safety", "must lie in (0, 1]"));
    }
    let n = cs.norms();
    let ing = CflIngredients {
        dz: grid.dz,
        qf_max,
        a_min: c.a_min,
        m1: c.m1,
        m2: c.m2,
        vhs_norm: n.vhs,
        vhs_prime_norm: n.vhs_prime,
        vhs_zero: cs.vhs(0.0),
        dc_norm: n.dc,
        dc_primitive_max: n.dc_primitive_max,
        d_tilde: diffusion.iter().copied().fold(0.0, f64::max),
        m_c: bounds.m_c,
        m_c_tilde: bounds.m_c_tilde,
        m_s: bounds.m_s,
        rho_x: cs.rho_x(),
        x_max: cs.x_max(),
    };
    let (beta1, beta2) = betas(&ing);
    let dt_cfl = 1.0 / beta1.max(beta2);
    Ok(CflBudget {
        beta1,
        beta2,
        dt_cfl,
        safety,
        dt_max: safety * dt_cfl,
        ingredients: ing,
    })
}

pub fn betas(i: &CflIngredients) -> (f64, f64) {
    let (dz, dz2) = (i.dz, i.dz * i.dz);
    let feed = i.qf_max / (i.a_min * dz);
    let gap = i.rho_x - i.x_max;
    let beta1 = feed
        + i.m1 / dz * (i.vhs_prime_norm * i.x_max + i.vhs_zero)
        + i.m2 / dz2 * (i.dc_norm * i.x_max + i.dc_primitive_max)
        + i.m_c.max(i.m_c_tilde);
    let beta2 = (i.rho_x + i.x_max) / gap * feed
        + i.x_max * i.m1 / gap * i.vhs_norm / dz
        + i.x_max * i.m2 / gap * i.dc_primitive_max / dz2
        + i.d_tilde * i.m2 / dz2
        + i.m_s;
    (beta1, beta2)
}

/// Mass exchanged by every component over one step (kg).
#[derive(Debug, Clone, PartialEq)]
pub struct Exchange {
    pub feed: Vec<f64>,
    /// Leaving through the effluent boundary.
    pub effluent: Vec<f64>,
    /// Leaving through the underflow boundary.
    pub underflow: Vec<f64>,
    pub reaction: Vec<f64>,
}

impl Exchange {
    pub fn zeros(m: usize) -> Self {
        Self {
            feed: vec![0.0; m],
            effluent: vec![0.0; m],
            underflow: vec![0.0; m],
            reaction: vec![0.0; m],
        }
    }
}

/// A fully discrete time-marching method.
pub trait Scheme {
    fn name(&self) -> &'static str;
    fn problem(&self) -> &Problem;
    fn dt_max(&self) -> f64;
    /// Advances `u` from `t` to `t + dt` and reports the exchanged mass.
    fn step(&mut self, u: &mut [f64], t: f64, dt: f64, exchange: &mut Exchange) -> Result<()>;
}

/// The explicit method of lines scheme.
pub struct MethodCs<'a> {
    problem: &'a Problem,
    budget: CflBudget,
    ws: Workspace,
    du: Vec<f64>,
    inputs: Inputs,
}

impl<'a> MethodCs<'a> {
    pub fn new(problem: &'a Problem, horizon: f64, safety: f64) -> Result<Self> {
        let budget = cfl_max_dt(
            &problem.grid,
            &problem.constitutive,
            &problem.reactions.bounds(),
            problem.scenario.max_feed_flow(horizon),
            &problem.diffusion,
            safety,
        )?;
        let layout = problem.layout();
        Ok(Self {
            problem,
            budget,
            ws: Workspace::new(&layout),
            du: vec![0.0; layout.len()],
            inputs: problem.inputs_at(0.0),
        })
    }

    pub fn budget(&self) -> &CflBudget {
        &self.budget
    }

    /// Overrides the step bound (for step-size studies).
    pub fn set_dt_max(&mut self, dt: f64) {
        self.budget.dt_max = dt;
    }

    pub fn workspace(&self) -> &Workspace {
        &self.ws
    }
}

impl Scheme for MethodCs<'_> {
    fn name(&self) -> &'static str {
        "CS"
    }

    fn problem(&self) -> &Problem {
        self.problem
    }

    fn dt_max(&self) -> f64 {
        self.budget.dt_max
    }

    fn step(&mut self, u: &mut [f64], t: f64, dt: f64, ex: &mut Exchange) -> Result<()> {
        if dt > self.budget.dt_max * (1.0 + 1e-12) {
            return Err(Error::StepTooLarge {
                dt,
                dt_max: self.budget.dt_max,
            });
        }
        let p = self.problem;
        p.inputs_averaged(t, dt, &mut self.inputs);
        p.rhs(&self.inputs, u, &mut self.du, &mut self.ws)
            .map_err(|e| with_time(e, t))?;
        for (x, d) in u.iter_mut().zip(&self.du) {
            *x += dt * d;
        }
        let layout = p.layout();
        let (kc, m) = (layout.solids, layout.stride());
        let last = layout.cells;
        let top = self.ws.face_flux(0);
        let bottom = self.ws.face_flux(last);
        for k in 0..m {
            let conc = if k < kc { self.inputs.c_f[k] } else { self.inputs.s_f[k - kc] };
            ex.feed[k] = dt * conc * self.inputs.q_f;
            ex.effluent[k] = -dt * top[k];
            ex.underflow[k] = dt * bottom[k];
            ex.reaction[k] = dt * self.ws.reaction_total[k];
        }
        Ok(())
    }
}

fn with_time(e: Error, t: f64) -> Error {
    match e {
        Error::InvariantBreach { cell, detail, .. } => Error::InvariantBreach { cell, time: t, detail },
        other => other,
    }
}

/// What to do when a state leaves the invariant region after a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaCheck {
    #[default]
    Fail,
    Count,
    Off,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub horizon: f64,
    /// Output times in `[0, horizon]`; `0` and `horizon` are always added.
    pub output_times: Vec<f64>,
    pub omega: OmegaCheck,
    /// Stop after this many steps.
    pub max_steps: Option<u64>,
    /// Recount the mass after every step; otherwise only at output times.
    pub audit_every_step: bool,
}

impl RunOptions {
    pub fn with_cadence(horizon: f64, cadence: f64) -> Self {
        let mut times = Vec::new();
        if cadence > 0.0 {
            let mut k = 1.0;
            while k * cadence < horizon * (1.0 - 1e-12) {
                times.push(k * cadence);
                k += 1.0;
            }
        }
        Self {
            horizon,
            output_times: times,
            omega: OmegaCheck::Fail,
            max_steps: None,
            audit_every_step: true,
        }
    }

    fn schedule(&self) -> Vec<f64> {
        let mut t: Vec<f64> = std::iter::once(0.0)
            .chain(self.output_times.iter().copied().filter(|&t| t > 0.0 && t < self.horizon))
            .chain(std::iter::once(self.horizon))
            .collect();
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }
}

/// Receives the state at every output time.
pub trait Sink {
    fn record(&mut self, t: f64, state: &State, problem: &Problem) -> Result<()>;
}

#[derive(Debug, Default, Clone)]
pub struct NullSink;

impl Sink for NullSink {
    fn record(&mut self, _t: f64, _state: &State, _problem: &Problem) -> Result<()> {
        Ok(())
    }
}

/// Keeps every recorded state in memory.
#[derive(Debug, Default, Clone)]
pub struct Snapshots {
    pub frames: Vec<(f64, State)>,
}

impl Sink for Snapshots {
    fn record(&mut self, t: f64, state: &State, _problem: &Problem) -> Result<()> {
        self.frames.push((t, state.clone()));
        Ok(())
    }
}

impl Snapshots {
    pub fn at(&self, t: f64) -> Option<&State> {
        self.frames
            .iter()
            .find(|(s, _)| (s - t).abs() <= 1e-9 * t.max(1.0))
            .map(|(_, st)| st)
    }
}

/// Per-component conservation ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassAudit {
    pub initial: Vec<f64>,
    pub final_mass: Vec<f64>,
    pub feed: Vec<f64>,
    pub effluent: Vec<f64>,
    pub underflow: Vec<f64>,
    pub reaction: Vec<f64>,
    /// `|M(T) - M(0) - (feed - effluent - underflow + reaction)|` per component.
    pub residual: Vec<f64>,
    /// Residual divided by the component throughput.
    pub relative_residual: Vec<f64>,
    /// Largest relative residual between consecutive mass counts.
    pub max_step_residual: f64,
}

impl MassAudit {
    pub fn max_relative(&self) -> f64 {
        self.relative_residual.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub method: String,
    pub scenario: String,
    pub cells: usize,
    pub horizon: f64,
    pub final_time: f64,
    pub steps: u64,
    pub dt_max: f64,
    pub wall_seconds: f64,
    pub omega_violations: u64,
    pub first_violation: Option<String>,
    pub clamp_events: u64,
    pub mass_audit: MassAudit,
}

pub fn total_mass(problem: &Problem, u: &[f64]) -> Vec<f64> {
    let layout = problem.layout();
    let m = layout.stride();
    let mut sums = vec![CompensatedSum::default(); m];
    for j in 0..layout.cells {
        let vol = problem.grid.volume(j);
        for k in 0..m {
            sums[k].add(vol * u[j * m + k]);
        }
    }
    sums.iter().map(|s| s.value()).collect()
}

struct Ledger {
    feed: Vec<CompensatedSum>,
    effluent: Vec<CompensatedSum>,
    underflow: Vec<CompensatedSum>,
    reaction: Vec<CompensatedSum>,
    throughput: Vec<CompensatedSum>,
    /// Net exchange and its magnitude since the last mass count.
    net: Vec<f64>,
    moved: Vec<f64>,
    max_step: f64,
}

impl Ledger {
    fn new(m: usize) -> Self {
        let z = vec![CompensatedSum::default(); m];
        Self {
            feed: z.clone(),
            effluent: z.clone(),
            underflow: z.clone(),
            reaction: z.clone(),
            throughput: z,
            net: vec![0.0; m],
            moved: vec![0.0; m],
            max_step: 0.0,
        }
    }

    fn add(&mut self, ex: &Exchange) {
        for k in 0..self.net.len() {
            self.feed[k].add(ex.feed[k]);
            self.effluent[k].add(ex.effluent[k]);
            self.underflow[k].add(ex.underflow[k]);
            self.reaction[k].add(ex.reaction[k]);
            let moved = ex.feed[k].abs() + ex.effluent[k].abs() + ex.underflow[k].abs() + ex.reaction[k].abs();
            self.throughput[k].add(moved);
            self.moved[k] += moved;
            self.net[k] += ex.feed[k] - ex.effluent[k] - ex.underflow[k] + ex.reaction[k];
        }
    }

    fn check(&mut self, before: &[f64], after: &[f64]) {
        for k in 0..before.len() {
            let scale = before[k].abs().max(after[k].abs()) + self.moved[k];
            if scale > 0.0 {
                let r = (after[k] - before[k] - self.net[k]).abs() / scale;
                self.max_step = self.max_step.max(r);
            }
        }
        self.net.fill(0.0);
        self.moved.fill(0.0);
    }

    fn audit(&self, initial: Vec<f64>, final_mass: Vec<f64>) -> MassAudit {
        let v = |s: &[CompensatedSum]| s.iter().map(|x| x.value()).collect::<Vec<_>>();
        let (feed, effluent, underflow, reaction) = (v(&self.feed), v(&self.effluent), v(&self.underflow), v(&self.reaction));
        let m = initial.len();
        let mut residual = vec![0.0; m];
        let mut relative = vec![0.0; m];
        for k in 0..m {
            let net = feed[k] - effluent[k] - underflow[k] + reaction[k];
            residual[k] = (final_mass[k] - initial[k] - net).abs();
            let scale = initial[k].abs().max(final_mass[k].abs()) + self.throughput[k].value();
            relative[k] = if scale > 0.0 { residual[k] / scale } else { 0.0 };
        }
        MassAudit {
            initial,
            final_mass,
            feed,
            effluent,
            underflow,
            reaction,
            residual,
            relative_residual: relative,
            max_step_residual: self.max_step,
        }
    }
}

/// Marches `state` to the horizon, recording it at the output times.
pub fn simulate(
    scheme: &mut dyn Scheme,
    state: &mut State,
    options: &RunOptions,
    sink: &mut dyn Sink,
) -> Result<RunReport> {
    let started = Instant::now();
    let problem = scheme.problem();
    let layout: Layout = problem.layout();
    assert_eq!(state.layout, layout, "state does not match the problem layout");
    let scenario = problem.scenario.clone();
    let x_max = problem.x_max();
    let cells = problem.grid.n;
    let outputs = options.schedule();
    let initial = total_mass(problem, &state.data);
    let mut ledger = Ledger::new(layout.stride());
    let mut ex = Exchange::zeros(layout.stride());
    let mut violations = 0u64;
    let mut first_violation = None;
    let mut steps = 0u64;
    let mut t = 0.0;
    let mut mass = initial.clone();

    sink.record(0.0, state, scheme.problem())?;
    let dt_max = scheme.dt_max();
    for &target in &outputs[1..] {
        while t < target {
            if options.max_steps.is_some_and(|n| steps >= n) {
                break;
            }
            let mut stop = target;
            if let Some(b) = scenario.next_breakpoint(t) {
                stop = stop.min(b);
            }
            let (dt, t_next) = if stop - t <= dt_max { (stop - t, stop) } else { (dt_max, t + dt_max) };
            scheme.step(&mut state.data, t, dt, &mut ex)?;
            steps += 1;
            t = t_next;
            if options.omega != OmegaCheck::Off {
                let breach = if in_omega(&layout, &state.data, x_max, OMEGA_SLACK) {
                    None
                } else {
                    omega_violation(&layout, &state.data, x_max, OMEGA_SLACK)
                };
                if let Some((cell, detail)) = breach {
                    violations += 1;
                    if options.omega == OmegaCheck::Fail {
                        return Err(Error::InvariantBreach { cell, time: t, detail });
                    }
                    first_violation.get_or_insert(format!("cell {cell} at t = {t} s: {detail}"));
                }
            }
            ledger.add(&ex);
            if options.audit_every_step || t == target {
                let after = total_mass(scheme.problem(), &state.data);
                ledger.check(&mass, &after);
                mass = after;
            }
        }
        if t < target {
            let after = total_mass(scheme.problem(), &state.data);
            ledger.check(&mass, &after);
            mass = after;
            break;
        }
        sink.record(t, state, scheme.problem())?;
    }

    let problem = scheme.problem();
    Ok(RunReport {
        method: scheme.name().to_string(),
        scenario: scenario.name.clone(),
        cells,
        horizon: options.horizon,
        final_time: t,
        steps,
        dt_max,
        wall_seconds: started.elapsed().as_secs_f64(),
        omega_violations: violations,
        first_violation,
        clamp_events: problem.clamp_events(),
        mass_audit: ledger.audit(initial, mass),
    })
}

/// Runs method CS on `problem` from its initial data and keeps the snapshots.
pub fn run_cs(problem: &Problem, options: &RunOptions, safety: f64) -> Result<(Snapshots, RunReport)> {
    let mut scheme = MethodCs::new(problem, options.horizon, safety)?;
    let mut state = problem.initial_state()?;
    let mut snaps = Snapshots::default();
    let report = simulate(&mut scheme, &mut state, options, &mut snaps)?;
    Ok((snaps, report))
}
