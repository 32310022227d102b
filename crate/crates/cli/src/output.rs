//! CSV and JSON artifacts. Numbers are written in the shortest form that
//! parses back to the same `f64`; columns keep a fixed order.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use clarifier_core::harness::{CflPoint, ErrorReport};
use clarifier_core::mol::{water_profile, Problem, State};

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

fn component_names(p: &Problem, prefix: &str) -> Vec<String> {
    let l = p.layout();
    (1..=l.solids)
        .map(|k| format!("{prefix}C{k}"))
        .chain((1..=l.solubles).map(|k| format!("{prefix}S{k}")))
        .collect()
}

/// `t, z, C1.., S1.., X, W` for every cell of every snapshot.
pub fn write_profiles(path: &Path, p: &Problem, frames: &[(f64, State)]) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["t".to_string(), "z".to_string()];
    header.extend(component_names(p, ""));
    header.extend(["X".to_string(), "W".to_string()]);
    w.write_record(&header)?;
    let cs = &p.constitutive;
    for (t, state) in frames {
        let water = water_profile(state, cs.rho_l(), cs.rho_x());
        let m = state.layout.stride();
        for (j, z) in p.grid.z_cells.iter().enumerate() {
            let mut row = vec![num(*t), num(*z)];
            row.extend(state.data[j * m..(j + 1) * m].iter().map(|v| num(*v)));
            row.push(num(state.total_solids(j)));
            row.push(num(water[j]));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Effluent and underflow concentrations and the effluent flow (m³/s).
pub fn write_outlets(path: &Path, p: &Problem, frames: &[(f64, State)]) -> Result<()> {
    let mut w = writer(path)?;
    let l = p.layout();
    let mut header = vec!["t".to_string()];
    for (k, name) in (1..=l.solids).map(|k| (k, "C")).chain((1..=l.solubles).map(|k| (k, "S"))) {
        header.push(format!("{name}{k}_e"));
        header.push(format!("{name}{k}_u"));
    }
    header.push("Q_e".into());
    w.write_record(&header)?;
    let m = l.stride();
    let last = l.cells - 1;
    for (t, state) in frames {
        let mut row = vec![num(*t)];
        for k in 0..m {
            row.push(num(state.data[k]));
            row.push(num(state.data[last * m + k]));
        }
        row.push(num(p.scenario.effluent_flow(*t)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Error table: `t_h, N, e_rel, theta, cpu_s`.
pub fn write_errors(path: &Path, report: &ErrorReport) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t_h", "N", "e_rel", "theta", "cpu_s"])?;
    for r in &report.rows {
        w.write_record([
            num(r.time / 3600.0),
            r.cells.to_string(),
            num(r.e_rel),
            r.theta.map(num).unwrap_or_default(),
            num(r.cpu_seconds),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `N, dz, dt_cs, dt_xp`; `dt_xp` is empty for variable areas.
pub fn write_cfl(path: &Path, curve: &[CflPoint]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["N", "dz", "dt_cs", "dt_xp"])?;
    for c in curve {
        w.write_record([c.cells.to_string(), num(c.dz), num(c.dt_cs), c.dt_xp.map(num).unwrap_or_default()])?;
    }
    w.flush()?;
    Ok(())
}

/// Paired profiles `t, z, cs_C1.., xp_C1..` and the distance per output time.
pub fn write_comparison(
    profiles: &Path,
    distance: &Path,
    p: &Problem,
    frames: &[(f64, f64, State, State)],
) -> Result<()> {
    let mut w = writer(profiles)?;
    let mut header = vec!["t".to_string(), "z".to_string()];
    header.extend(component_names(p, "cs_"));
    header.extend(component_names(p, "xp_"));
    w.write_record(&header)?;
    let m = p.layout().stride();
    for (t, _, cs, xp) in frames {
        for (j, z) in p.grid.z_cells.iter().enumerate() {
            let mut row = vec![num(*t), num(*z)];
            row.extend(cs.data[j * m..(j + 1) * m].iter().map(|v| num(*v)));
            row.extend(xp.data[j * m..(j + 1) * m].iter().map(|v| num(*v)));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    let mut w = writer(distance)?;
    w.write_record(["t", "distance"])?;
    for (t, d, _, _) in frames {
        w.write_record([num(*t), num(*d)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}
