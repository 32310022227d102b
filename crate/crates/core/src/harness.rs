//! Validation instruments: projection of reference solutions, relative L1
//! errors and convergence orders, eigenvalue diagnostics, step-size curves
//! and convergence studies.

use std::sync::Arc;
use std::time::Instant;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constitutive::ConstitutiveSet;
use crate::error::{Error, Result};
use crate::methodxp::{max_bulk_flow, xp_cfl, MethodXp};
use crate::mol::{Problem, State};
use crate::scenario::Scenario;
use crate::stepper::{cfl_max_dt, simulate, MassAudit, MethodCs, RunOptions, RunReport, Scheme, Snapshots};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Cs,
    Xp,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Cs => "CS",
            Method::Xp => "XP",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "cs" => Ok(Method::Cs),
            "xp" => Ok(Method::Xp),
            other => Err(format!("unknown method `{other}` (expected cs or xp)")),
        }
    }
}

/// Runs `method` on `problem` from its initial data.
pub fn run(
    problem: &Problem,
    method: Method,
    options: &RunOptions,
    safety: f64,
    sink: &mut dyn crate::stepper::Sink,
) -> Result<RunReport> {
    let mut state = problem.initial_state()?;
    let mut scheme: Box<dyn Scheme + '_> = match method {
        Method::Cs => Box::new(MethodCs::new(problem, options.horizon, safety)?),
        Method::Xp => Box::new(MethodXp::new(problem, options.horizon, safety)?),
    };
    simulate(scheme.as_mut(), &mut state, options, sink)
}

/// Like [`run`], keeping every output state.
pub fn run_snapshots(
    problem: &Problem,
    method: Method,
    options: &RunOptions,
    safety: f64,
) -> Result<(Snapshots, RunReport)> {
    let mut snaps = Snapshots::default();
    let report = run(problem, method, options, safety, &mut snaps)?;
    Ok((snaps, report))
}

/// Averages blocks of `fine.len() / coarse` consecutive values.
pub fn project_fine_to_coarse(fine: &[f64], coarse: usize) -> Result<Vec<f64>> {
    if coarse == 0 || fine.len() % coarse != 0 {
        return Err(Error::NonNested {
            fine: fine.len(),
            coarse,
        });
    }
    let r = fine.len() / coarse;
    Ok(fine.chunks_exact(r).map(|c| c.iter().sum::<f64>() / r as f64).collect())
}

/// Projects the interior cells of `fine` onto `coarse` interior cells; the
/// two boundary cells keep their own values.
pub fn project_state(fine: &State, coarse: usize) -> Result<State> {
    let n_fine = fine.layout.cells - 2;
    let m = fine.layout.stride();
    let mut layout = fine.layout;
    layout.cells = coarse + 2;
    let mut out = State::zeros(layout);
    for k in 0..m {
        let column: Vec<f64> = (1..=n_fine).map(|j| fine.data[j * m + k]).collect();
        let projected = project_fine_to_coarse(&column, coarse)?;
        for (j, v) in projected.into_iter().enumerate() {
            out.data[(j + 1) * m + k] = v;
        }
        out.data[k] = fine.data[k];
        out.data[(coarse + 1) * m + k] = fine.data[(n_fine + 1) * m + k];
    }
    Ok(out)
}

/// Unweighted L1 norm `Δz Σ|v|` over the interior cells of component `k`.
pub fn l1_interior(state: &State, k: usize, dz: f64) -> f64 {
    let m = state.layout.stride();
    let n = state.layout.cells - 2;
    dz * (1..=n).map(|j| state.data[j * m + k].abs()).sum::<f64>()
}

/// Relative L1 error of every component against `reference` (same grid);
/// `None` where the reference norm vanishes.
pub fn component_errors(approx: &State, reference: &State) -> Vec<Option<f64>> {
    assert_eq!(approx.layout, reference.layout, "states live on different grids");
    let m = approx.layout.stride();
    let n = approx.layout.cells - 2;
    (0..m)
        .map(|k| {
            let (mut diff, mut norm) = (0.0, 0.0);
            for j in 1..=n {
                let r = reference.data[j * m + k];
                diff += (approx.data[j * m + k] - r).abs();
                norm += r.abs();
            }
            (norm > 0.0).then(|| diff / norm)
        })
        .collect()
}

/// `e_N^rel`: the sum over all components of the relative L1 errors on the
/// interior cells. Components with a vanishing reference are skipped.
pub fn e_n_rel(approx: &State, reference: &State) -> f64 {
    let mut total = 0.0;
    for (k, e) in component_errors(approx, reference).into_iter().enumerate() {
        match e {
            Some(e) => total += e,
            None => warn!("component {} has a zero reference norm; skipped", k + 1),
        }
    }
    total
}

/// `θ = -log(e₁/e₂)/log(N₁/N₂)`.
pub fn theta(e1: f64, e2: f64, n1: usize, n2: usize) -> f64 {
    -(e1 / e2).ln() / (n1 as f64 / n2 as f64).ln()
}

/// `(λ₁, λ₂) = (q + γ f'(X), q - γ f(X)/(ρ_X - X))`.
pub fn eigenvalues(cs: &ConstitutiveSet, x: f64, q: f64, gamma: f64) -> (f64, f64) {
    (
        q + gamma * cs.flux_prime(x),
        q - gamma * cs.flux(x) / (cs.rho_x() - x),
    )
}

/// Largest relative residual of the conservation identity recorded by a run.
pub fn mass_balance_audit(audit: &MassAudit) -> f64 {
    audit.max_relative().max(audit.max_step_residual)
}

/// Total variation `Σ|v_{j+1} - v_j|`.
pub fn total_variation(profile: &[f64]) -> f64 {
    profile.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CflPoint {
    pub cells: usize,
    pub dz: f64,
    pub dt_cs: f64,
    /// Absent for variable cross-sectional area.
    pub dt_xp: Option<f64>,
}

/// Step bounds of both methods for every resolution in `cells`.
pub fn cfl_curve(scenario: &Scenario, cells: &[usize], horizon: f64, safety: f64) -> Result<Vec<CflPoint>> {
    let cs = ConstitutiveSet::new(scenario.constitutive)?;
    let reactions = scenario.reactions.build(cs.x_max())?;
    let bounds = reactions.bounds();
    let qf = scenario.max_feed_flow(horizon);
    cells
        .iter()
        .map(|&n| {
            let grid = scenario.grid(n)?;
            let cs_budget = cfl_max_dt(&grid, &cs, &bounds, qf, &scenario.diffusion, safety)?;
            let dt_xp = if grid.has_constant_area() {
                let q = max_bulk_flow(scenario, horizon) / grid.a_cells[0];
                Some(xp_cfl(&cs, &bounds, q, grid.dz, safety)?.dt_max)
            } else {
                None
            };
            Ok(CflPoint {
                cells: n,
                dz: grid.dz,
                dt_cs: cs_budget.dt_max,
                dt_xp,
            })
        })
        .collect()
}

/// Cell counts whose spacing `(H + B)/N` covers `[dz_min, dz_max]` with
/// `per_decade` points per decade.
pub fn cells_for_spacings(depth: f64, dz_min: f64, dz_max: f64, per_decade: usize) -> Vec<usize> {
    let decades = (dz_max / dz_min).log10();
    let points = (decades * per_decade as f64).ceil() as usize;
    let mut cells: Vec<usize> = (0..=points)
        .map(|i| {
            let dz = dz_max * (dz_min / dz_max).powf(i as f64 / points as f64);
            ((depth / dz).round() as usize).max(2)
        })
        .collect();
    cells.dedup();
    cells
}

/// Least-squares slope of `log dt` against `log dz`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    pub method: Method,
    pub cells: Vec<usize>,
    pub reference_cells: usize,
    /// Evaluation times (s).
    pub times: Vec<f64>,
    pub safety: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub time: f64,
    pub cells: usize,
    pub e_rel: f64,
    /// Order against the next coarser resolution.
    pub theta: Option<f64>,
    /// Relative L1 error per component (`None` for a zero reference).
    pub components: Vec<Option<f64>>,
    pub cpu_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub method: Method,
    pub reference_cells: usize,
    pub reference_seconds: f64,
    pub rows: Vec<ErrorRow>,
}

impl ErrorReport {
    pub fn at(&self, time: f64) -> impl Iterator<Item = &ErrorRow> {
        self.rows.iter().filter(move |r| r.time == time)
    }
}

/// Errors of `config.method` against a method CS reference solution.
pub fn convergence_study(scenario: &Scenario, config: &ConvergenceConfig) -> Result<ErrorReport> {
    scenario.validate()?;
    if let Some(&n) = config.cells.iter().find(|&&n| n == 0 || config.reference_cells % n != 0) {
        return Err(Error::NonNested {
            fine: config.reference_cells,
            coarse: n,
        });
    }
    let scenario = Arc::new(scenario.clone());
    let cs = Arc::new(ConstitutiveSet::new(scenario.constitutive)?);
    let horizon = config.times.iter().copied().fold(0.0, f64::max);
    let mut options = RunOptions::with_cadence(horizon, 0.0);
    options.output_times = config.times.clone();
    options.audit_every_step = false;

    let run_one = |n: usize, method: Method| -> Result<(Snapshots, f64)> {
        let problem = Problem::with_constitutive(scenario.clone(), cs.clone(), n)?;
        let started = Instant::now();
        let (snaps, _) = run_snapshots(&problem, method, &options, config.safety)?;
        Ok((snaps, started.elapsed().as_secs_f64()))
    };

    let mut jobs: Vec<(usize, Method)> = vec![(config.reference_cells, Method::Cs)];
    jobs.extend(config.cells.iter().map(|&n| (n, config.method)));
    let mut results = jobs
        .par_iter()
        .map(|&(n, m)| run_one(n, m))
        .collect::<Result<Vec<_>>>()?;
    let (reference, reference_seconds) = results.remove(0);

    let mut rows = Vec::new();
    for &t in &config.times {
        let exact = reference
            .at(t)
            .ok_or_else(|| Error::config("times", format!("no reference output at t = {t}")))?;
        let mut previous: Option<(usize, f64)> = None;
        for (&n, (snaps, cpu)) in config.cells.iter().zip(&results) {
            let approx = snaps.at(t).expect("output times are recorded");
            let projected = project_state(exact, n)?;
            let components = component_errors(approx, &projected);
            let e_rel = e_n_rel(approx, &projected);
            let th = previous.map(|(n0, e0)| theta(e_rel, e0, n, n0));
            rows.push(ErrorRow {
                time: t,
                cells: n,
                e_rel,
                theta: th,
                components,
                cpu_seconds: *cpu,
            });
            previous = Some((n, e_rel));
        }
    }
    Ok(ErrorReport {
        method: config.method,
        reference_cells: config.reference_cells,
        reference_seconds,
        rows,
    })
}

/// Relative L1 distance between the two methods at each output time, on the
/// same grid. The reference scheme's solution supplies the norms.
pub fn compare_methods(problem: &Problem, options: &RunOptions, safety: f64) -> Result<Vec<(f64, f64, State, State)>> {
    let (cs, _) = run_snapshots(problem, Method::Cs, options, safety)?;
    let (xp, _) = run_snapshots(problem, Method::Xp, options, safety)?;
    Ok(cs
        .frames
        .into_iter()
        .zip(xp.frames)
        .map(|((t, a), (_, b))| (t, e_n_rel(&a, &b), a, b))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mol::Layout;
    use approx::assert_relative_eq;

    #[test]
    fn projection_examples() {
        assert_eq!(project_fine_to_coarse(&[1.0, 3.0, 5.0, 7.0], 2).unwrap(), vec![2.0, 6.0]);
        assert_eq!(project_fine_to_coarse(&[4.0; 8], 4).unwrap(), vec![4.0; 4]);
        assert!(matches!(
            project_fine_to_coarse(&[1.0; 6], 4),
            Err(Error::NonNested { fine: 6, coarse: 4 })
        ));
        let lin: Vec<f64> = (0..64).map(|i| 0.5 + 0.25 * i as f64).collect();
        let p = project_fine_to_coarse(&lin, 8).unwrap();
        assert_relative_eq!(p.iter().sum::<f64>() * 8.0, lin.iter().sum::<f64>(), max_relative = 1e-15);
    }

    #[test]
    fn error_examples() {
        let layout = Layout { solids: 2, solubles: 1, cells: 6 };
        let mut reference = State::zeros(layout);
        reference.data.fill(1.0);
        assert_eq!(e_n_rel(&reference, &reference), 0.0);
        let mut approx = reference.clone();
        for j in 0..6 {
            approx.data[j * 3] = 1.1;
        }
        assert_relative_eq!(e_n_rel(&approx, &reference), 0.1, max_relative = 1e-14);
    }

    #[test]
    fn theta_examples() {
        assert_relative_eq!(theta(0.5, 1.0, 64, 32), 1.0, max_relative = 1e-15);
        assert_relative_eq!(theta(0.2471, 0.4042, 64, 32), 0.7100, epsilon = 5e-5);
        assert_eq!(theta(0.3, 0.3, 64, 32), 0.0);
    }

    #[test]
    fn eigenvalue_examples() {
        let cs = ConstitutiveSet::new(Default::default()).unwrap();
        let (l1, l2) = eigenvalues(&cs, 0.0, -1e-4, 1.0);
        assert_relative_eq!(l1, -1e-4 + cs.params().v0, max_relative = 1e-14);
        assert_eq!(l2, -1e-4);
        assert_eq!(eigenvalues(&cs, 12.0, 3e-4, 0.0), (3e-4, 3e-4));
        let (a0, b0) = eigenvalues(&cs, 0.0, 0.0, 1.0);
        let xm = cs.x_max();
        let (am, bm) = eigenvalues(&cs, xm, 0.0, 1.0);
        assert!(a0 > b0 && am <= bm);
    }

    #[test]
    fn spacing_grid_and_slope() {
        let cells = cells_for_spacings(4.0, 1e-3, 1e-1, 4);
        assert_eq!(cells.first(), Some(&40));
        assert_eq!(cells.last(), Some(&4000));
        let pts: Vec<(f64, f64)> = (1..6).map(|i| (i as f64, 3.0 * (i as f64).powi(2))).collect();
        assert_relative_eq!(loglog_slope(&pts), 2.0, max_relative = 1e-12);
        assert_eq!(total_variation(&[0.0, 2.0, 1.0, 1.0]), 3.0);
    }
}
