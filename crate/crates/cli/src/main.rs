//! `clarifier`: simulations of the reactive settling benchmarks, grid
//! convergence studies, step-size curves and comparisons with the reference
//! scheme.

mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use clarifier_core::harness::{self, cells_for_spacings, cfl_curve, convergence_study, ConvergenceConfig, Method};
use clarifier_core::mol::{OmegaPolicy, Problem};
use clarifier_core::reactions::ZMode;
use clarifier_core::scenario::{load_scenario, ReactionSpec, Scenario};
use clarifier_core::stepper::{OmegaCheck, RunOptions, DEFAULT_SAFETY};

const HOUR: f64 = 3600.0;

#[derive(Parser, Debug)]
#[command(name = "clarifier", version, about = "Reactive settling in clarifier-thickeners")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scheme and write profiles, outlet data and a run report.
    Simulate(SimulateArgs),
    /// Errors against a fine reference solution at several resolutions.
    Converge(ConvergeArgs),
    /// Step-size bounds of both schemes over a range of spacings.
    CflCurve(CflArgs),
    /// Run both schemes on the same grid and record their distance.
    CompareXp(CommonArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ZModeArg {
    Identity,
    Ramp,
}

#[derive(Args, Debug, Clone)]
struct CommonArgs {
    /// Builtin name (example1..example5) or path to a JSON scenario.
    #[arg(long, default_value = "example1")]
    scenario: String,
    /// Number of interior cells; defaults to the scenario's value.
    #[arg(long)]
    cells: Option<usize>,
    /// Simulated time in hours; defaults to the scenario's value.
    #[arg(long)]
    horizon: Option<f64>,
    /// Snapshot cadence in hours; defaults to the scenario's value.
    #[arg(long)]
    cadence: Option<f64>,
    /// Fraction of the stable step actually taken.
    #[arg(long, default_value_t = DEFAULT_SAFETY)]
    safety: f64,
    /// Growth modulation near the maximal packing concentration.
    #[arg(long, value_enum)]
    z_mode: Option<ZModeArg>,
    /// Soluble diffusion coefficients (m²/s), comma separated.
    #[arg(long, value_delimiter = ',')]
    diffusion: Option<Vec<f64>>,
    /// Refuse states outside the invariant region and audit mass after every step.
    #[arg(long)]
    debug_invariants: bool,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_enum, default_value = "cs")]
    method: MethodArg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Cs,
    Xp,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Cs => Method::Cs,
            MethodArg::Xp => Method::Xp,
        }
    }
}

#[derive(Args, Debug)]
struct ConvergeArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_enum, default_value = "cs")]
    method: MethodArg,
    /// Resolutions to test, comma separated; each must divide the reference.
    #[arg(long, value_delimiter = ',', default_value = "16,32,64,128,256")]
    levels: Vec<usize>,
    /// Resolution of the reference solution (always computed with method CS).
    #[arg(long, default_value_t = 1024)]
    reference: usize,
    /// Evaluation times in hours, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "3,6,9")]
    times: Vec<f64>,
}

#[derive(Args, Debug)]
struct CflArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, default_value_t = 1e-3)]
    dz_min: f64,
    #[arg(long, default_value_t = 1e-1)]
    dz_max: f64,
    /// Sample spacings per decade.
    #[arg(long, default_value_t = 12)]
    per_decade: usize,
}

/// The scenario with command-line overrides applied.
fn prepare(args: &CommonArgs) -> Result<Scenario> {
    let mut s = load_scenario(&args.scenario).with_context(|| format!("loading scenario `{}`", args.scenario))?;
    if let Some(n) = args.cells {
        s.run.cells = n;
    }
    if let Some(h) = args.horizon {
        s.run.horizon = h * HOUR;
    }
    if let Some(c) = args.cadence {
        s.run.cadence = c * HOUR;
    }
    if let Some(d) = &args.diffusion {
        s.diffusion = d.clone();
    }
    if let Some(z) = args.z_mode {
        match &mut s.reactions {
            ReactionSpec::Denitrification { z_mode, .. } => {
                *z_mode = match z {
                    ZModeArg::Identity => ZMode::Identity,
                    ZModeArg::Ramp => ZMode::ramp_default(s.constitutive.x_max),
                }
            }
            ReactionSpec::None { .. } => warn!("--z-mode has no effect without reactions"),
        }
    }
    s.validate()?;
    if !(args.safety > 0.0 && args.safety <= 1.0) {
        bail!("--safety must lie in (0, 1]");
    }
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    Ok(s)
}

fn problem(s: &Scenario, args: &CommonArgs) -> Result<Problem> {
    let mut p = Problem::new(s, s.run.cells)?;
    if args.debug_invariants {
        p.policy = OmegaPolicy::Strict;
    }
    Ok(p)
}

fn run_options(s: &Scenario, args: &CommonArgs, method: Method) -> RunOptions {
    let mut options = RunOptions::with_cadence(s.run.horizon, s.run.cadence);
    options.audit_every_step = args.debug_invariants;
    options.omega = match method {
        Method::Cs => OmegaCheck::Fail,
        Method::Xp if args.debug_invariants => OmegaCheck::Fail,
        Method::Xp => OmegaCheck::Count,
    };
    options
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let s = prepare(&args.common)?;
    let method = Method::from(args.method);
    let p = problem(&s, &args.common)?;
    let options = run_options(&s, &args.common, method);
    info!("{} on {} with N = {}, T = {} h", method.label(), s.name, s.run.cells, s.run.horizon / HOUR);
    let (snaps, report) = harness::run_snapshots(&p, method, &options, args.common.safety)?;
    let out = &args.common.out;
    output::write_profiles(&out.join("profiles.csv"), &p, &snaps.frames)?;
    output::write_outlets(&out.join("outputs.csv"), &p, &snaps.frames)?;
    output::write_json(&out.join("report.json"), &report)?;
    info!(
        "{} steps, {} invariant-region violations, mass residual {:.2e}",
        report.steps,
        report.omega_violations,
        harness::mass_balance_audit(&report.mass_audit)
    );
    if report.omega_violations > 0 {
        bail!("{} invariant-region violations; first: {:?}", report.omega_violations, report.first_violation);
    }
    Ok(())
}

fn converge(args: &ConvergeArgs) -> Result<()> {
    let s = prepare(&args.common)?;
    let config = ConvergenceConfig {
        method: args.method.into(),
        cells: args.levels.clone(),
        reference_cells: args.reference,
        times: args.times.iter().map(|t| t * HOUR).collect(),
        safety: args.common.safety,
    };
    let report = convergence_study(&s, &config)?;
    output::write_errors(&args.common.out.join("errors.csv"), &report)?;
    output::write_json(&args.common.out.join("errors.json"), &report)?;
    Ok(())
}

fn cfl(args: &CflArgs) -> Result<()> {
    let s = prepare(&args.common)?;
    if !(args.dz_min > 0.0 && args.dz_max > args.dz_min) {
        bail!("need 0 < --dz-min < --dz-max");
    }
    let depth = s.geometry.h + s.geometry.b;
    let cells = cells_for_spacings(depth, args.dz_min, args.dz_max, args.per_decade);
    let curve = cfl_curve(&s, &cells, s.run.horizon, args.common.safety)?;
    output::write_cfl(&args.common.out.join("cfl_curve.csv"), &curve)?;
    Ok(())
}

fn compare(args: &CommonArgs) -> Result<()> {
    let s = prepare(args)?;
    let p = problem(&s, args)?;
    let options = run_options(&s, args, Method::Xp);
    let frames = harness::compare_methods(&p, &options, args.safety)?;
    output::write_comparison(&args.out.join("compare_profiles.csv"), &args.out.join("compare_distance.csv"), &p, &frames)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Converge(a) => converge(a),
        Command::CflCurve(a) => cfl(a),
        Command::CompareXp(a) => compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
