//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits nonzero
//! if any criterion fails. Numeric arguments select criteria, e.g.
//! `cargo test --release --test acceptance -- 2 3`.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use clarifier_core::constitutive::ConstitutiveSet;
use clarifier_core::harness::{
    cells_for_spacings, cfl_curve, compare_methods, convergence_study, eigenvalues, loglog_slope,
    mass_balance_audit, run_snapshots, total_variation, ConvergenceConfig, Method,
};
use clarifier_core::methodxp::godunov_flux;
use clarifier_core::mol::{Problem, State};
use clarifier_core::reactions::ReactionBounds;
use clarifier_core::scenario::{builtin, ReactionSpec, Scenario};
use clarifier_core::stepper::{betas, cfl_max_dt, simulate, MethodCs, NullSink, OmegaCheck, RunOptions, DEFAULT_SAFETY};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const HOUR: f64 = 3600.0;

struct Outcome {
    pass: bool,
    summary: String,
}

type Criterion = fn() -> Result<Outcome, String>;

fn outcome(pass: bool, summary: impl Into<String>) -> Result<Outcome, String> {
    Ok(Outcome {
        pass,
        summary: summary.into(),
    })
}

fn scenario(name: &str) -> Scenario {
    builtin(name).expect("builtin scenario")
}

fn without_reactions(mut s: Scenario) -> Scenario {
    s.reactions = ReactionSpec::None { solids: 2, solubles: 3 };
    s
}

fn convergence_order() -> Result<Outcome, String> {
    let config = ConvergenceConfig {
        method: Method::Cs,
        cells: vec![16, 32, 64, 128, 256],
        reference_cells: 1024,
        times: vec![3.0 * HOUR, 6.0 * HOUR, 9.0 * HOUR],
        safety: DEFAULT_SAFETY,
    };
    let report = convergence_study(&scenario("example1"), &config).map_err(|e| e.to_string())?;
    println!("    reference N = 1024 took {:.1} s", report.reference_seconds);
    let mut pass = true;
    let mut worst = (f64::INFINITY, f64::NEG_INFINITY);
    for &t in &config.times {
        let rows: Vec<_> = report.at(t).collect();
        for r in &rows {
            println!(
                "    t = {:.0} h  N = {:>4}  e_rel = {:.4}  theta = {}  cpu = {:.2} s",
                t / HOUR,
                r.cells,
                r.e_rel,
                r.theta.map_or("-".into(), |v| format!("{v:.2}")),
                r.cpu_seconds
            );
        }
        pass &= rows.windows(2).all(|w| w[1].e_rel < w[0].e_rel);
        for r in rows.iter().filter(|r| r.cells >= 32) {
            let th = r.theta.expect("order against the coarser run");
            worst = (worst.0.min(th), worst.1.max(th));
            pass &= (0.55..=1.15).contains(&th);
        }
    }
    let e32 = report.at(3.0 * HOUR).find(|r| r.cells == 32).map_or(f64::NAN, |r| r.e_rel);
    outcome(
        pass,
        format!(
            "e_rel decreasing at 3/6/9 h, theta range [{:.3}, {:.3}] for N >= 32 (e_32 at 3 h = {e32:.4}, published 0.4042 against N = 4096)",
            worst.0, worst.1
        ),
    )
}

/// Largest or smallest flux on `[lo, hi]` by a uniform scan refined with a
/// golden-section search around the best sample.
fn scan_extremum(cs: &ConstitutiveSet, lo: f64, hi: f64, maximize: bool) -> f64 {
    let n = 512;
    let sign = if maximize { 1.0 } else { -1.0 };
    let f = |x: f64| sign * cs.flux(x);
    let at = |i: usize| lo + (hi - lo) * i as f64 / n as f64;
    let best = (0..=n).max_by(|&a, &b| f(at(a)).total_cmp(&f(at(b)))).unwrap();
    let (mut a, mut b) = (at(best.saturating_sub(1)), at((best + 1).min(n)));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let (c, d) = (b - g * (b - a), a + g * (b - a));
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    sign * f(at(best)).max(f(0.5 * (a + b)))
}

fn godunov_oracle() -> Result<Outcome, String> {
    let cs = ConstitutiveSet::new(Default::default()).map_err(|e| e.to_string())?;
    let x_max = cs.x_max();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..100_000 {
        let (a, b) = (rng.random_range(0.0..=x_max), rng.random_range(0.0..=x_max));
        let expected = if a <= b {
            scan_extremum(&cs, a, b, false)
        } else {
            scan_extremum(&cs, b, a, true)
        };
        let got = godunov_flux(&cs, a, b);
        let scale = expected.abs().max(f64::MIN_POSITIVE);
        worst = worst.max((got - expected).abs() / scale);
    }
    outcome(worst <= 1e-6, format!("10^5 pairs, worst relative deviation {worst:.2e}"))
}

fn invariant_region() -> Result<Outcome, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut violations, mut failures) = (0u64, Vec::new());
    let mut steps = 0u64;
    for trial in 0..200 {
        let s = common::random_scenario(&mut rng, 100.0);
        let n = rng.random_range(8..=128);
        let p = Problem::new(&s, n).map_err(|e| e.to_string())?;
        let mut options = RunOptions::with_cadence(1000.0 * HOUR, 0.0);
        options.max_steps = Some(500);
        options.omega = OmegaCheck::Count;
        options.audit_every_step = false;
        let mut scheme = MethodCs::new(&p, options.horizon, 1.0).map_err(|e| e.to_string())?;
        let mut u = p.initial_state().map_err(|e| e.to_string())?;
        match simulate(&mut scheme, &mut u, &options, &mut NullSink) {
            Ok(r) => {
                violations += r.omega_violations;
                steps += r.steps;
            }
            Err(e) => failures.push(format!("trial {trial}: {e}")),
        }
    }
    for f in &failures {
        println!("    {f}");
    }
    outcome(
        violations == 0 && failures.is_empty() && steps == 200 * 500,
        format!("200 trials, {steps} steps at safety 1.0, {violations} violations, {} aborted runs", failures.len()),
    )
}

fn mass_conservation() -> Result<Outcome, String> {
    let s = without_reactions(scenario("example1"));
    let p = Problem::new(&s, 128).map_err(|e| e.to_string())?;
    let options = RunOptions::with_cadence(9.0 * HOUR, HOUR);
    let (_, report) = run_snapshots(&p, Method::Cs, &options, DEFAULT_SAFETY).map_err(|e| e.to_string())?;
    let worst = mass_balance_audit(&report.mass_audit);
    outcome(
        worst <= 1e-10,
        format!(
            "N = 128, 9 h, {} steps: worst relative residual {worst:.2e} (final {:.2e})",
            report.steps,
            report.mass_audit.max_relative()
        ),
    )
}

fn cross_validation() -> Result<Outcome, String> {
    let s = scenario("example1");
    let mut options = RunOptions::with_cadence(9.0 * HOUR, 0.0);
    options.audit_every_step = false;
    let mut distances = Vec::new();
    for n in [64, 128, 256] {
        let p = Problem::new(&s, n).map_err(|e| e.to_string())?;
        let frames = compare_methods(&p, &options, DEFAULT_SAFETY).map_err(|e| e.to_string())?;
        let (_, d, _, _) = frames.last().cloned().ok_or("no output")?;
        println!("    N = {n:>3}  CS-XP distance at 9 h = {d:.4}");
        distances.push(d);
    }
    let pass = distances.windows(2).all(|w| w[1] < w[0]) && distances[2] <= 0.08;
    outcome(
        pass,
        format!(
            "distances {:.4} > {:.4} > {:.4}, bound 0.08 at N = 256",
            distances[0], distances[1], distances[2]
        ),
    )
}

fn half_decade_slopes(s: &Scenario) -> Result<(f64, f64), String> {
    let depth = s.geometry.h + s.geometry.b;
    let cells = cells_for_spacings(depth, 1e-3, 1e-1, 12);
    let curve = cfl_curve(s, &cells, s.run.horizon, DEFAULT_SAFETY).map_err(|e| e.to_string())?;
    let pick = |lo: f64, hi: f64| -> Vec<(f64, f64)> {
        curve
            .iter()
            .filter(|p| p.dz >= lo * (1.0 - 1e-9) && p.dz <= hi * (1.0 + 1e-9))
            .map(|p| (p.dz, p.dt_cs))
            .collect()
    };
    let small = pick(1e-3, 10f64.powf(-2.5));
    let large = pick(10f64.powf(-1.5), 1e-1);
    Ok((loglog_slope(&small), loglog_slope(&large)))
}

fn cfl_shape() -> Result<Outcome, String> {
    let s = scenario("example1");
    let (small, large) = half_decade_slopes(&s)?;
    let (_, large_inert) = half_decade_slopes(&without_reactions(s))?;
    let pass = (1.8..=2.1).contains(&small) && large < 0.1 && large_inert >= 0.1;
    outcome(
        pass,
        format!("slope {small:.3} at small dz, {large:.3} at large dz with reactions, {large_inert:.3} without"),
    )
}

fn final_state(s: &Scenario, n: usize, horizon: f64) -> Result<State, String> {
    let p = Problem::new(s, n).map_err(|e| e.to_string())?;
    let mut options = RunOptions::with_cadence(horizon, 0.0);
    options.audit_every_step = false;
    let (snaps, _) = run_snapshots(&p, Method::Cs, &options, DEFAULT_SAFETY).map_err(|e| e.to_string())?;
    snaps.frames.last().map(|(_, st)| st.clone()).ok_or_else(|| "no output".into())
}

fn interior(state: &State, k: usize) -> Vec<f64> {
    let c = state.component(k);
    c[1..c.len() - 1].to_vec()
}

fn diffusion_smoothing() -> Result<Outcome, String> {
    let t = 3.0 * HOUR;
    let [e3, e4, e5] = ["example3", "example4", "example5"].map(|n| final_state(&scenario(n), 100, t));
    let (e3, e4, e5) = (e3?, e4?, e5?);
    let kc = e3.layout.solids;
    let (no3, n2) = (kc, kc + 2);
    let (tv3, tv4) = (total_variation(&interior(&e3, n2)), total_variation(&interior(&e4, n2)));
    let (a, b) = (interior(&e5, no3), interior(&e4, no3));
    let diff: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / b.iter().map(|v| v.abs()).sum::<f64>();
    outcome(
        tv4 < tv3 && diff > 0.0,
        format!("TV(S_N2) {tv4:.4e} (ex4) < {tv3:.4e} (ex3); relative L1 change of S_NO3 ex5 vs ex4 = {diff:.3e}"),
    )
}

fn eigenvalue_consistency() -> Result<Outcome, String> {
    let s = scenario("example1");
    let cs = ConstitutiveSet::new(s.constitutive).map_err(|e| e.to_string())?;
    let grid = s.grid(128).map_err(|e| e.to_string())?;
    let qf = s.max_feed_flow(s.run.horizon);
    let budget = cfl_max_dt(&grid, &cs, &ReactionBounds::default(), qf, &[0.0; 3], 1.0).map_err(|e| e.to_string())?;
    let mut ing = budget.ingredients;
    ing.m1 = 1.0;
    ing.m2 = 0.0;
    ing.d_tilde = 0.0;
    ing.m_c = 0.0;
    ing.m_c_tilde = 0.0;
    ing.m_s = 0.0;
    let (b1, b2) = betas(&ing);
    let area = grid.a_cells[1];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut l1, mut l2) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let x = rng.random_range(0.0..=cs.x_max());
        let t = rng.random_range(0.0..=s.run.horizon);
        let q = if rng.random_bool(0.5) {
            s.underflow.value_at(t)[0] / area
        } else {
            -s.effluent_flow(t) / area
        };
        let (a, b) = eigenvalues(&cs, x, q, 1.0);
        l1 = l1.max(a.abs());
        l2 = l2.max(b.abs());
    }
    let (c1, c2) = (b1 * ing.dz, b2 * ing.dz);
    outcome(
        l1 <= c1 && l2 <= c2,
        format!("max|l1| = {l1:.4e} <= {c1:.4e}, max|l2| = {l2:.4e} <= {c2:.4e}"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 8] = [
        ("convergence order", convergence_order),
        ("Godunov oracle", godunov_oracle),
        ("invariant region", invariant_region),
        ("mass conservation", mass_conservation),
        ("CS-XP cross-validation", cross_validation),
        ("CFL curve shape", cfl_shape),
        ("diffusion smoothing", diffusion_smoothing),
        ("eigenvalue/CFL consistency", eigenvalue_consistency),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut all = true;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let started = Instant::now();
        let (pass, summary) = match check() {
            Ok(o) => (o.pass, o.summary),
            Err(e) => (false, format!("error: {e}")),
        };
        all &= pass;
        println!(
            "{} [{id}] {name}: {summary} ({:.1} s)",
            if pass { "PASS" } else { "FAIL" },
            started.elapsed().as_secs_f64()
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
