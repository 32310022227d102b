//! Semi-discrete right-hand side over all `N + 2` cells.
//!
//! The state is a flat vector, cell-major: cell `j` occupies
//! `u[j*m .. (j+1)*m]` with `m = k_C + k_S`, holding `C^(1..k_C)` followed by
//! `S^(1..k_S)`. [`Problem::rhs`] is reentrant, so any ODE integrator can
//! drive it; [`crate::stepper`] provides the explicit Euler march with its
//! invariant-preserving step bound.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use log::warn;

use crate::constitutive::ConstitutiveSet;
use crate::error::{Error, Result};
use crate::fluxes::{neg, phi_c_face, phi_s_face_unchecked, pos, vx_from_parts, LiquidFace};
use crate::grid::Grid;
use crate::reactions::ReactionModel;
use crate::scenario::{face_bulk_flow, Scenario};

/// Absolute slack for the invariant-region checks.
pub const OMEGA_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub solids: usize,
    pub solubles: usize,
    pub cells: usize,
}

impl Layout {
    pub fn stride(&self) -> usize {
        self.solids + self.solubles
    }

    pub fn len(&self) -> usize {
        self.stride() * self.cells
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell<'a>(&self, u: &'a [f64], j: usize) -> (&'a [f64], &'a [f64]) {
        let m = self.stride();
        u[j * m..(j + 1) * m].split_at(self.solids)
    }

    pub fn total_solids(&self, u: &[f64], j: usize) -> f64 {
        let m = self.stride();
        u[j * m..j * m + self.solids].iter().sum()
    }
}

/// Concentrations on every cell together with their layout.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub layout: Layout,
    pub data: Vec<f64>,
}

impl State {
    pub fn zeros(layout: Layout) -> Self {
        Self {
            layout,
            data: vec![0.0; layout.len()],
        }
    }

    pub fn solids(&self, j: usize) -> &[f64] {
        self.layout.cell(&self.data, j).0
    }

    pub fn solubles(&self, j: usize) -> &[f64] {
        self.layout.cell(&self.data, j).1
    }

    pub fn total_solids(&self, j: usize) -> f64 {
        self.layout.total_solids(&self.data, j)
    }

    /// Profile of component `k` (solids first, then solubles).
    pub fn component(&self, k: usize) -> Vec<f64> {
        let m = self.layout.stride();
        (0..self.layout.cells).map(|j| self.data[j * m + k]).collect()
    }
}

/// Water concentration `W = ρ_L - rX - ΣS` with `r = ρ_L/ρ_X`.
pub fn water_profile(state: &State, rho_l: f64, rho_x: f64) -> Vec<f64> {
    let r = rho_l / rho_x;
    (0..state.layout.cells)
        .map(|j| rho_l - r * state.total_solids(j) - state.solubles(j).iter().sum::<f64>())
        .collect()
}

/// First cell that leaves `Ω = {C ≥ 0, X ≤ X_max, S ≥ 0}` by more than `slack`.
pub fn omega_violation(layout: &Layout, u: &[f64], x_max: f64, slack: f64) -> Option<(usize, String)> {
    for j in 0..layout.cells {
        let (c, s) = layout.cell(u, j);
        if let Some(k) = c.iter().position(|&v| !(v >= -slack)) {
            return Some((j, format!("C^({}) = {}", k + 1, c[k])));
        }
        let x: f64 = c.iter().sum();
        if !(x <= x_max + slack) {
            return Some((j, format!("X = {x} exceeds X_max = {x_max}")));
        }
        if let Some(k) = s.iter().position(|&v| !(v >= -slack)) {
            return Some((j, format!("S^({}) = {}", k + 1, s[k])));
        }
    }
    None
}

/// Fast membership test equivalent to `omega_violation(..).is_none()`.
pub fn in_omega(layout: &Layout, u: &[f64], x_max: f64, slack: f64) -> bool {
    let (kc, m) = (layout.solids, layout.stride());
    let mut ok = true;
    for cell in u.chunks_exact(m) {
        let mut x = 0.0;
        for &c in &cell[..kc] {
            x += c;
        }
        for &v in cell {
            ok &= v >= -slack;
        }
        ok &= x <= x_max + slack;
    }
    ok
}

/// Handling of right-hand-side evaluations at states outside `Ω`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OmegaPolicy {
    /// Refuse with [`Error::InvariantBreach`].
    Strict,
    /// Project onto `Ω` and count the event.
    Clamp,
}

impl Default for OmegaPolicy {
    fn default() -> Self {
        if cfg!(debug_assertions) {
            OmegaPolicy::Strict
        } else {
            OmegaPolicy::Clamp
        }
    }
}

/// Boundary data frozen over one evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Inputs {
    pub q_f: f64,
    pub q_u: f64,
    pub c_f: Vec<f64>,
    pub s_f: Vec<f64>,
}

/// Scratch buffers; after [`Problem::rhs`] they hold the face fluxes of the
/// evaluated state.
#[derive(Debug, Clone)]
pub struct Workspace {
    x: Vec<f64>,
    vhs: Vec<f64>,
    dc: Vec<f64>,
    projected: Vec<f64>,
    ghost: Vec<f64>,
    /// Face bulk flows `Q` (m³/s).
    pub flows: Vec<f64>,
    /// Face fluxes `Φ`, face-major with the state stride (kg/s).
    pub phi: Vec<f64>,
    /// `Σ_j γ_j A_j Δz R_j` per component (kg/s).
    pub reaction_total: Vec<f64>,
    rc: Vec<f64>,
    rs: Vec<f64>,
}

impl Workspace {
    pub fn new(layout: &Layout) -> Self {
        let faces = layout.cells + 1;
        let m = layout.stride();
        Self {
            x: vec![0.0; layout.cells],
            vhs: vec![0.0; layout.cells],
            dc: vec![0.0; layout.cells],
            projected: Vec::new(),
            ghost: vec![0.0; m],
            flows: vec![0.0; faces],
            phi: vec![0.0; faces * m],
            reaction_total: vec![0.0; m],
            rc: vec![0.0; layout.solids],
            rs: vec![0.0; layout.solubles],
        }
    }

    /// Fluxes through face `i` (face `i` bounds cell `i` from above).
    pub fn face_flux(&self, i: usize) -> &[f64] {
        let m = self.reaction_total.len();
        &self.phi[i * m..(i + 1) * m]
    }
}

/// A scenario discretized on a grid: everything the right-hand side needs.
pub struct Problem {
    pub grid: Grid,
    pub constitutive: Arc<ConstitutiveSet>,
    pub reactions: Arc<dyn ReactionModel>,
    pub diffusion: Vec<f64>,
    pub scenario: Arc<Scenario>,
    pub policy: OmegaPolicy,
    clamp_events: AtomicU64,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("scenario", &self.scenario.name)
            .field("cells", &self.grid.n)
            .field("diffusion", &self.diffusion)
            .finish()
    }
}

impl Problem {
    pub fn new(scenario: &Scenario, cells: usize) -> Result<Self> {
        scenario.validate()?;
        let constitutive = Arc::new(ConstitutiveSet::new(scenario.constitutive)?);
        Self::with_constitutive(Arc::new(scenario.clone()), constitutive, cells)
    }

    /// Reuses an already tabulated constitutive set.
    pub fn with_constitutive(
        scenario: Arc<Scenario>,
        constitutive: Arc<ConstitutiveSet>,
        cells: usize,
    ) -> Result<Self> {
        let grid = scenario.grid(cells)?;
        let reactions = scenario.reactions.build(scenario.constitutive.x_max)?;
        Ok(Self {
            grid,
            constitutive,
            reactions,
            diffusion: scenario.diffusion.clone(),
            scenario,
            policy: OmegaPolicy::default(),
            clamp_events: AtomicU64::new(0),
        })
    }

    pub fn with_reactions(mut self, reactions: Arc<dyn ReactionModel>) -> Self {
        assert_eq!(reactions.solids(), self.layout().solids);
        assert_eq!(reactions.solubles(), self.layout().solubles);
        self.reactions = reactions;
        self
    }

    pub fn layout(&self) -> Layout {
        Layout {
            solids: self.scenario.solids(),
            solubles: self.scenario.solubles(),
            cells: self.grid.cells(),
        }
    }

    pub fn x_max(&self) -> f64 {
        self.constitutive.x_max()
    }

    pub fn clamp_events(&self) -> u64 {
        self.clamp_events.load(Ordering::Relaxed)
    }

    /// Cell averages of the initial profiles, checked against `Ω`.
    pub fn initial_state(&self) -> Result<State> {
        let layout = self.layout();
        let g = &self.grid;
        let init = &self.scenario.initial;
        let mut state = State::zeros(layout);
        let m = layout.stride();
        for j in 0..layout.cells {
            let (a, b) = (g.z_faces[j], g.z_faces[j + 1]);
            for (k, p) in init.solids.iter().chain(&init.solubles).enumerate() {
                state.data[j * m + k] = p.average(a, b, -g.h, g.b);
            }
        }
        if let Some((cell, detail)) = omega_violation(&layout, &state.data, self.x_max(), 0.0) {
            return Err(Error::InvariantBreach {
                cell,
                time: 0.0,
                detail: format!("initial data: {detail}"),
            });
        }
        Ok(state)
    }

    /// Boundary data at the instant `t`.
    pub fn inputs_at(&self, t: f64) -> Inputs {
        let s = &self.scenario;
        Inputs {
            q_f: s.feed_flow.value_at(t)[0],
            q_u: s.underflow.value_at(t)[0],
            c_f: s.feed_solids.value_at(t).to_vec(),
            s_f: s.feed_solubles.value_at(t).to_vec(),
        }
    }

    /// Boundary data averaged over `[t, t + dt]`. The feed loads `C_f Q_f`
    /// are averaged as products, then divided by the mean flow.
    pub fn inputs_averaged(&self, t: f64, dt: f64, out: &mut Inputs) {
        let s = &self.scenario;
        let mut q = [0.0];
        s.feed_flow.average_into(t, dt, &mut q);
        out.q_f = q[0];
        s.underflow.average_into(t, dt, &mut q);
        out.q_u = q[0];
        let same_interval = s.next_breakpoint(t).is_none_or(|b| b >= t + dt);
        if same_interval || out.q_f == 0.0 {
            out.c_f.copy_from_slice(s.feed_solids.value_at(t));
            out.s_f.copy_from_slice(s.feed_solubles.value_at(t));
            return;
        }
        // exact mean of the load over the window
        out.c_f.fill(0.0);
        out.s_f.fill(0.0);
        let end = t + dt;
        let mut lo = t;
        while lo < end {
            let hi = s.next_breakpoint(lo).map_or(end, |b| b.min(end));
            let w = (hi - lo) / (end - t) * s.feed_flow.value_at(lo)[0] / out.q_f;
            for (o, v) in out.c_f.iter_mut().zip(s.feed_solids.value_at(lo)) {
                *o += w * v;
            }
            for (o, v) in out.s_f.iter_mut().zip(s.feed_solubles.value_at(lo)) {
                *o += w * v;
            }
            lo = hi;
        }
    }

    /// `du = dU/dt` at state `u` with frozen boundary data.
    pub fn rhs(&self, inputs: &Inputs, u: &[f64], du: &mut [f64], ws: &mut Workspace) -> Result<()> {
        let layout = self.layout();
        debug_assert_eq!(u.len(), layout.len());
        if in_omega(&layout, u, self.x_max(), OMEGA_SLACK) {
            return self.rhs_unchecked(inputs, u, du, ws);
        }
        if let Some((cell, detail)) = omega_violation(&layout, u, self.x_max(), OMEGA_SLACK) {
            match self.policy {
                OmegaPolicy::Strict => {
                    return Err(Error::InvariantBreach {
                        cell,
                        time: f64::NAN,
                        detail,
                    })
                }
                OmegaPolicy::Clamp => {
                    let n = self.clamp_events.fetch_add(1, Ordering::Relaxed);
                    if n == 0 {
                        warn!("state outside the invariant region at cell {cell} ({detail}); projecting");
                    }
                    let mut projected = std::mem::take(&mut ws.projected);
                    projected.clear();
                    projected.extend_from_slice(u);
                    project_onto_omega(&layout, &mut projected, self.x_max());
                    let out = self.rhs_unchecked(inputs, &projected, du, ws);
                    ws.projected = projected;
                    return out;
                }
            }
        }
        self.rhs_unchecked(inputs, u, du, ws)
    }

    fn rhs_unchecked(&self, inputs: &Inputs, u: &[f64], du: &mut [f64], ws: &mut Workspace) -> Result<()> {
        let layout = self.layout();
        match (layout.solids, layout.solubles) {
            (2, 3) => self.kernel_fixed::<2, 3, 5>(inputs, u, du, ws),
            (kc, ks) => self.kernel(kc, ks, inputs, u, du, ws),
        }
    }

    /// The generic kernel with the component loops unrolled.
    fn kernel_fixed<const KC: usize, const KS: usize, const M: usize>(
        &self,
        inputs: &Inputs,
        u: &[f64],
        du: &mut [f64],
        ws: &mut Workspace,
    ) -> Result<()> {
        debug_assert_eq!(KC + KS, M);
        let g = &self.grid;
        let cs = &*self.constitutive;
        let (dz, rho_x) = (g.dz, cs.rho_x());
        let (cells_u, _) = u.as_chunks::<M>();
        let (cells_du, _) = du.as_chunks_mut::<M>();
        let n = cells_u.len();
        let x = &mut ws.x[..n];
        let vhs = &mut ws.vhs[..n];
        let dcp = &mut ws.dc[..n];

        let mut densest = (0, 0.0);
        for (j, c) in cells_u.iter().enumerate() {
            let mut xj = 0.0;
            for &v in &c[..KC] {
                xj += v;
            }
            if xj > densest.1 {
                densest = (j, xj);
            }
            x[j] = xj;
            vhs[j] = cs.vhs(xj);
            dcp[j] = cs.dc_primitive(xj);
        }
        if densest.1 >= rho_x {
            return Err(Error::InvariantBreach {
                cell: densest.0,
                time: f64::NAN,
                detail: format!("solids concentration {} reaches the solids density", densest.1),
            });
        }
        face_bulk_flow(g, inputs.q_f, inputs.q_u, &mut ws.flows);

        let mut diffusion = [0.0; KS];
        diffusion.copy_from_slice(&self.diffusion[..KS]);
        let zero = [0.0; M];
        let (phi, _) = ws.phi.as_chunks_mut::<M>();
        let phi = &mut phi[..n + 1];
        let (flows, a_faces, gamma_faces) = (&ws.flows[..n + 1], &g.a_faces[..n + 1], &g.gamma_faces[..n + 1]);
        for i in 0..=n {
            let (above, x_a) = if i == 0 { (&zero, 0.0) } else { (&cells_u[i - 1], x[i - 1]) };
            let (below, x_b) = if i == n { (&zero, 0.0) } else { (&cells_u[i], x[i]) };
            let (gamma, area) = (gamma_faces[i], a_faces[i]);
            let q = flows[i] / area;
            let v = if gamma == 0.0 {
                q
            } else {
                vx_from_parts(q, gamma, vhs[i], dcp[i - 1], dcp[i], dz)
            };
            let out = &mut phi[i];
            let (vm, vp) = (neg(v), pos(v));
            for k in 0..KC {
                out[k] = area * (vm * below[k] + vp * above[k]);
            }
            let f_x = vm * x_b + vp * x_a;
            let f_l = rho_x * q - f_x;
            let a = if f_l < 0.0 { f_l / (rho_x - x_b) } else { 0.0 };
            let b = if f_l > 0.0 { f_l / (rho_x - x_a) } else { 0.0 };
            let gd = gamma / dz;
            for k in 0..KS {
                let (lo, hi) = (above[KC + k], below[KC + k]);
                out[KC + k] = area * (a * hi + b * lo - gd * diffusion[k] * (hi - lo));
            }
        }

        let mut reaction_total = [0.0; M];
        let (mut rc, mut rs) = ([0.0; KC], [0.0; KS]);
        let mut feed = [0.0; M];
        for (k, f) in inputs.c_f.iter().chain(&inputs.s_f).enumerate() {
            feed[k] = f * inputs.q_f;
        }
        let (a_cells, gamma_cells) = (&g.a_cells[..n], &g.gamma_cells[..n]);
        for j in 0..n {
            let vol = a_cells[j] * dz;
            let inv = 1.0 / vol;
            let d = &mut cells_du[j];
            let (top, bottom) = (&phi[j], &phi[j + 1]);
            for k in 0..M {
                d[k] = (top[k] - bottom[k]) * inv;
            }
            if j == g.feed_cell {
                for k in 0..M {
                    d[k] += feed[k] * inv;
                }
            }
            let gam = gamma_cells[j];
            if gam != 0.0 {
                let cell = &cells_u[j];
                self.reactions.rates(&cell[..KC], &cell[KC..], &mut rc, &mut rs);
                for k in 0..KC {
                    d[k] += gam * rc[k];
                    reaction_total[k] += gam * rc[k] * vol;
                }
                for k in 0..KS {
                    d[KC + k] += gam * rs[k];
                    reaction_total[KC + k] += gam * rs[k] * vol;
                }
            }
        }
        ws.reaction_total.copy_from_slice(&reaction_total);
        Ok(())
    }

    fn kernel(&self, kc: usize, ks: usize, inputs: &Inputs, u: &[f64], du: &mut [f64], ws: &mut Workspace) -> Result<()> {
        let m = kc + ks;
        let cells = self.grid.cells();
        let g = &self.grid;
        let cs = &*self.constitutive;
        let dz = g.dz;
        let rho_x = cs.rho_x();

        let mut densest = (0, 0.0);
        for (j, cell) in u.chunks_exact(m).enumerate() {
            let x: f64 = cell[..kc].iter().sum();
            if x > densest.1 {
                densest = (j, x);
            }
            ws.x[j] = x;
            ws.vhs[j] = cs.vhs(x);
            ws.dc[j] = cs.dc_primitive(x);
        }
        if densest.1 >= rho_x {
            return Err(Error::InvariantBreach {
                cell: densest.0,
                time: f64::NAN,
                detail: format!("solids concentration {} reaches the solids density", densest.1),
            });
        }
        face_bulk_flow(g, inputs.q_f, inputs.q_u, &mut ws.flows);

        let ghost = &ws.ghost[..m];
        let diffusion = &self.diffusion[..m - kc];
        for i in 0..cells + 1 {
            let (above, x_a) = if i == 0 { (ghost, 0.0) } else { (&u[(i - 1) * m..i * m], ws.x[i - 1]) };
            let (below, x_b) = if i == cells { (ghost, 0.0) } else { (&u[i * m..(i + 1) * m], ws.x[i]) };
            let gamma = g.gamma_faces[i];
            let area = g.a_faces[i];
            let q = ws.flows[i] / area;
            let v = if gamma == 0.0 {
                q
            } else {
                vx_from_parts(q, gamma, ws.vhs[i], ws.dc[i - 1], ws.dc[i], dz)
            };
            let (out_c, out_s) = ws.phi[i * m..(i + 1) * m].split_at_mut(kc);
            let f_x = phi_c_face(&above[..kc], &below[..kc], x_a, x_b, v, area, out_c);
            let face = LiquidFace { f_x, q, area, gamma, dz, rho_x };
            phi_s_face_unchecked(&above[kc..], &below[kc..], x_a, x_b, &face, diffusion, out_s);
        }

        ws.reaction_total.fill(0.0);
        let (rc, rs) = (&mut ws.rc[..kc], &mut ws.rs[..m - kc]);
        for j in 0..cells {
            let vol = g.a_cells[j] * dz;
            let inv = 1.0 / vol;
            let d = &mut du[j * m..(j + 1) * m];
            let top = &ws.phi[j * m..(j + 1) * m];
            let bottom = &ws.phi[(j + 1) * m..(j + 2) * m];
            for k in 0..m {
                d[k] = (top[k] - bottom[k]) * inv;
            }
            if j == g.feed_cell {
                for (k, f) in inputs.c_f.iter().chain(&inputs.s_f).enumerate() {
                    d[k] += f * inputs.q_f * inv;
                }
            }
            let gam = g.gamma_cells[j];
            if gam != 0.0 {
                let cell = &u[j * m..(j + 1) * m];
                self.reactions.rates(&cell[..kc], &cell[kc..], rc, rs);
                for k in 0..kc {
                    d[k] += gam * rc[k];
                    ws.reaction_total[k] += gam * rc[k] * vol;
                }
                for k in kc..m {
                    d[k] += gam * rs[k - kc];
                    ws.reaction_total[k] += gam * rs[k - kc] * vol;
                }
            }
        }
        Ok(())
    }
}

/// Clamps negatives to zero and rescales `C` where `X > X_max`.
pub fn project_onto_omega(layout: &Layout, u: &mut [f64], x_max: f64) {
    let m = layout.stride();
    for j in 0..layout.cells {
        let cell = &mut u[j * m..(j + 1) * m];
        for v in cell.iter_mut() {
            if !(*v >= 0.0) {
                *v = 0.0;
            }
        }
        let x: f64 = cell[..layout.solids].iter().sum();
        if x > x_max {
            let f = x_max / x;
            cell[..layout.solids].iter_mut().for_each(|c| *c *= f);
        }
    }
}
