//! Reference scheme for constant cross-sectional area: the total solids
//! concentration is updated with Godunov's flux and the components are
//! carried as percentage vectors of the solid and liquid phases.
//!
//! Used to cross-validate method CS; there is no soluble diffusion.

use serde::{Deserialize, Serialize};

use crate::constitutive::ConstitutiveSet;
use crate::error::{Error, Result};
use crate::fluxes::{neg, pos};
use crate::mol::{Inputs, Layout, Problem, State};
use crate::reactions::ReactionBounds;
use crate::scenario::{face_bulk_flow, Scenario};
use crate::stepper::{Exchange, Scheme};

/// Godunov flux of the unimodal batch flux `f(X) = X v_hs(X)`.
#[inline]
pub fn godunov_flux(cs: &ConstitutiveSet, x_j: f64, x_j1: f64) -> f64 {
    let x_hat = cs.x_hat();
    cs.flux(x_j.min(x_hat)).min(cs.flux(x_j1.max(x_hat)))
}

/// Totals and percentage vectors on every cell.
#[derive(Debug, Clone, PartialEq)]
pub struct XpState {
    pub solids: usize,
    pub solubles: usize,
    pub x: Vec<f64>,
    pub l: Vec<f64>,
    /// `P_X`, cell-major.
    pub p_x: Vec<f64>,
    /// `P_L`, cell-major.
    pub p_l: Vec<f64>,
}

impl XpState {
    /// Splits concentrations into totals and percentages. Cells without
    /// solids get the uniform composition.
    pub fn from_concentrations(layout: &Layout, u: &[f64], rho_l: f64, r: f64) -> Self {
        let (kc, ks) = (layout.solids, layout.solubles);
        let mut out = Self {
            solids: kc,
            solubles: ks,
            x: vec![0.0; layout.cells],
            l: vec![0.0; layout.cells],
            p_x: vec![0.0; layout.cells * kc],
            p_l: vec![0.0; layout.cells * ks],
        };
        for j in 0..layout.cells {
            let (c, s) = layout.cell(u, j);
            let x: f64 = c.iter().sum();
            let l = rho_l - r * x;
            out.x[j] = x;
            out.l[j] = l;
            let px = &mut out.p_x[j * kc..(j + 1) * kc];
            if x > 0.0 {
                px.iter_mut().zip(c).for_each(|(p, c)| *p = c / x);
            } else {
                px.fill(1.0 / kc as f64);
            }
            out.p_l[j * ks..(j + 1) * ks]
                .iter_mut()
                .zip(s)
                .for_each(|(p, s)| *p = s / l);
        }
        out
    }

    /// `C = P_X X`, `S = P_L L`.
    pub fn write_concentrations(&self, u: &mut [f64]) {
        let (kc, ks) = (self.solids, self.solubles);
        let m = kc + ks;
        for j in 0..self.x.len() {
            let cell = &mut u[j * m..(j + 1) * m];
            for k in 0..kc {
                cell[k] = self.p_x[j * kc + k] * self.x[j];
            }
            for k in 0..ks {
                cell[kc + k] = self.p_l[j * ks + k] * self.l[j];
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XpBudget {
    /// `‖q‖_∞` over the horizon (m/s).
    pub q_norm: f64,
    pub beta_x: f64,
    pub beta_px: f64,
    pub beta_pl: f64,
    /// `1/(‖q‖/Δz + max β)`.
    pub dt_cfl: f64,
    pub safety: f64,
    pub dt_max: f64,
}

/// Largest `|Q_u|` or `|Q_f - Q_u|` on `[0, horizon]` (m³/s).
pub fn max_bulk_flow(scenario: &Scenario, horizon: f64) -> f64 {
    let mut t = 0.0;
    let mut best = 0.0f64;
    loop {
        let q_u = scenario.underflow.value_at(t)[0];
        best = best.max(q_u.abs()).max(scenario.effluent_flow(t).abs());
        match scenario.next_breakpoint(t) {
            Some(b) if b <= horizon => t = b,
            _ => return best,
        }
    }
}

/// Step bound of the reference scheme.
pub fn xp_cfl(
    cs: &ConstitutiveSet,
    bounds: &ReactionBounds,
    q_norm: f64,
    dz: f64,
    safety: f64,
) -> Result<XpBudget> {
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(Error::config("run.safety", "must lie in (0, 1]"));
    }
    let n = cs.norms();
    let r = cs.rho_l() / cs.rho_x();
    let transport = n.flux_prime / dz + n.xp_primitive_prime / (dz * dz);
    let beta_x = transport + bounds.m_c_tilde + r * bounds.m_s_tilde;
    let beta_px = transport + bounds.m_c;
    let beta_pl = (n.flux / dz + n.xp_primitive_max / (dz * dz)) / (cs.rho_x() - cs.x_max()) + bounds.m_c;
    let dt_cfl = 1.0 / (q_norm / dz + beta_x.max(beta_px).max(beta_pl));
    Ok(XpBudget {
        q_norm,
        beta_x,
        beta_px,
        beta_pl,
        dt_cfl,
        safety,
        dt_max: safety * dt_cfl,
    })
}

/// The reference scheme on a constant-area grid.
pub struct MethodXp<'a> {
    problem: &'a Problem,
    budget: XpBudget,
    area: f64,
    state: XpState,
    /// Concentrations last written by [`Scheme::step`].
    emitted: Vec<f64>,
    inputs: Inputs,
    flows: Vec<f64>,
    f_x: Vec<f64>,
    flux_c: Vec<f64>,
    flux_s: Vec<f64>,
    rc: Vec<f64>,
    rs: Vec<f64>,
}

impl<'a> MethodXp<'a> {
    pub fn new(problem: &'a Problem, horizon: f64, safety: f64) -> Result<Self> {
        let g = &problem.grid;
        if !g.has_constant_area() {
            return Err(Error::config(
                "geometry",
                "method XP only handles a constant cross-sectional area",
            ));
        }
        let area = g.a_cells[0];
        let cs = &problem.constitutive;
        let q_norm = max_bulk_flow(&problem.scenario, horizon) / area;
        let budget = xp_cfl(cs, &problem.reactions.bounds(), q_norm, g.dz, safety)?;
        let layout = problem.layout();
        let faces = layout.cells + 1;
        Ok(Self {
            problem,
            budget,
            area,
            state: XpState::from_concentrations(&layout, &vec![0.0; layout.len()], cs.rho_l(), ratio(cs)),
            emitted: Vec::new(),
            inputs: problem.inputs_at(0.0),
            flows: vec![0.0; faces],
            f_x: vec![0.0; faces],
            flux_c: vec![0.0; faces * layout.solids],
            flux_s: vec![0.0; faces * layout.solubles],
            rc: vec![0.0; layout.solids],
            rs: vec![0.0; layout.solubles],
        })
    }

    pub fn budget(&self) -> &XpBudget {
        &self.budget
    }

    /// Overrides the step bound (for step-size studies).
    pub fn set_dt_max(&mut self, dt: f64) {
        self.budget.dt_max = dt;
    }

    pub fn state(&self) -> &XpState {
        &self.state
    }

    /// One step of the percentage formulation on the internal state.
    pub fn advance(&mut self, t: f64, dt: f64, ex: &mut Exchange) {
        let p = self.problem;
        let g = &p.grid;
        let cs = &*p.constitutive;
        let (kc, ks) = (self.state.solids, self.state.solubles);
        let cells = g.cells();
        let (rho_l, r) = (cs.rho_l(), ratio(cs));
        let dz = g.dz;
        let lambda = dt / dz;
        p.inputs_averaged(t, dt, &mut self.inputs);
        face_bulk_flow(g, self.inputs.q_f, self.inputs.q_u, &mut self.flows);
        let st = &self.state;

        for i in 0..=cells {
            let (x_a, x_b) = (
                if i == 0 { 0.0 } else { st.x[i - 1] },
                if i == cells { 0.0 } else { st.x[i] },
            );
            let q = self.flows[i] / self.area;
            let gamma = g.gamma_faces[i];
            let mut f = pos(q) * x_a + neg(q) * x_b;
            if gamma != 0.0 {
                f += gamma
                    * (godunov_flux(cs, x_a, x_b) - (cs.xp_primitive(x_b) - cs.xp_primitive(x_a)) / dz);
            }
            self.f_x[i] = f;
            let f_l = rho_l * q - r * f;
            for k in 0..kc {
                let pa = if i == 0 { 0.0 } else { st.p_x[(i - 1) * kc + k] };
                let pb = if i == cells { 0.0 } else { st.p_x[i * kc + k] };
                self.flux_c[i * kc + k] = pos(f) * pa + neg(f) * pb;
            }
            for k in 0..ks {
                let pa = if i == 0 { 0.0 } else { st.p_l[(i - 1) * ks + k] };
                let pb = if i == cells { 0.0 } else { st.p_l[i * ks + k] };
                self.flux_s[i * ks + k] = pos(f_l) * pa + neg(f_l) * pb;
            }
        }

        let qf = self.inputs.q_f / self.area;
        let x_f: f64 = self.inputs.c_f.iter().sum();
        let vol = self.area * dz;
        let mut c = vec![0.0; kc];
        let mut s = vec![0.0; ks];
        let mut reaction = vec![0.0; kc + ks];
        let st = &mut self.state;
        for j in 0..cells {
            let feed = j == g.feed_cell;
            let gam = g.gamma_cells[j];
            let (x, l) = (st.x[j], st.l[j]);
            let px = &mut st.p_x[j * kc..(j + 1) * kc];
            let pl = &mut st.p_l[j * ks..(j + 1) * ks];
            let mut rc_total = 0.0;
            if gam != 0.0 {
                c.iter_mut().zip(px.iter()).for_each(|(c, p)| *c = p * x);
                s.iter_mut().zip(pl.iter()).for_each(|(s, p)| *s = p * l);
                p.reactions.rates(&c, &s, &mut self.rc, &mut self.rs);
                rc_total = self.rc.iter().sum();
            }
            let mut x_new = x - lambda * (self.f_x[j + 1] - self.f_x[j]) + dt * gam * rc_total;
            if feed {
                x_new += lambda * x_f * qf;
            }
            let l_new = rho_l - r * x_new;
            for k in 0..kc {
                let mut psi = px[k] * x - lambda * (self.flux_c[(j + 1) * kc + k] - self.flux_c[j * kc + k]);
                if feed {
                    psi += lambda * self.inputs.c_f[k] * qf;
                }
                if gam != 0.0 {
                    psi += dt * gam * self.rc[k];
                    reaction[k] += dt * gam * self.rc[k] * vol;
                }
                if x_new > 0.0 {
                    px[k] = psi / x_new;
                }
            }
            for k in 0..ks {
                let mut psi = pl[k] * l - lambda * (self.flux_s[(j + 1) * ks + k] - self.flux_s[j * ks + k]);
                if feed {
                    psi += lambda * self.inputs.s_f[k] * qf;
                }
                if gam != 0.0 {
                    psi += dt * gam * self.rs[k];
                    reaction[kc + k] += dt * gam * self.rs[k] * vol;
                }
                pl[k] = psi / l_new;
            }
            st.x[j] = x_new;
            st.l[j] = l_new;
        }

        let last = cells;
        for k in 0..kc + ks {
            let (feed, top, bottom) = if k < kc {
                (self.inputs.c_f[k], self.flux_c[k], self.flux_c[last * kc + k])
            } else {
                let k = k - kc;
                (self.inputs.s_f[k], self.flux_s[k], self.flux_s[last * ks + k])
            };
            ex.feed[k] = dt * feed * self.inputs.q_f;
            ex.effluent[k] = -dt * self.area * top;
            ex.underflow[k] = dt * self.area * bottom;
            ex.reaction[k] = reaction[k];
        }
    }
}

fn ratio(cs: &ConstitutiveSet) -> f64 {
    cs.rho_l() / cs.rho_x()
}

impl Scheme for MethodXp<'_> {
    fn name(&self) -> &'static str {
        "XP"
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
        if self.emitted.as_slice() != &*u {
            let cs = &self.problem.constitutive;
            self.state = XpState::from_concentrations(&self.problem.layout(), u, cs.rho_l(), ratio(cs));
        }
        self.advance(t, dt, ex);
        self.state.write_concentrations(u);
        self.emitted.clear();
        self.emitted.extend_from_slice(u);
        Ok(())
    }
}

/// Concentrations of an [`XpState`] as a [`State`].
pub fn to_state(layout: Layout, xp: &XpState) -> State {
    let mut s = State::zeros(layout);
    xp.write_concentrations(&mut s.data);
    s
}
