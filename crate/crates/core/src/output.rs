//! CSV and plain-text emitters for runs, sweeps, and batch trajectories.
//!
//! Snapshot files are named `<prefix>_t<time>.csv` with the time formatted
//! to six significant digits, and carry the header `x,u,chi,s,psi`.
//! Per-step diagnostics go to `<prefix>_diag.csv`. Values are written with
//! the shortest round-trip decimal representation, so re-running a config
//! reproduces the files byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::diagnostics::{ConvergenceSlopes, ConvergenceTable};
use crate::error::Result;
use crate::kinetics::TrajectoryPoint;
use crate::sim::{DiagnosticsSeries, RunResult, Snapshot};
use crate::transport::Grid1D;

/// Format with six significant digits, trimming like `%g`.
pub fn sig6(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    let s = if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let t = format!("{v:.decimals$}");
        let t = t.trim_end_matches('0').trim_end_matches('.').to_string();
        if t.is_empty() || t == "-" {
            "0".to_string()
        } else {
            t
        }
    } else {
        let t = format!("{v:.5e}");
        // Trim trailing zeros in the mantissa: 1.20000e4 -> 1.2e4.
        match t.split_once('e') {
            Some((m, e)) => {
                let m = m.trim_end_matches('0').trim_end_matches('.');
                format!("{m}e{e}")
            }
            None => t,
        }
    };
    s
}

pub fn snapshot_path(dir: &Path, prefix: &str, time: f64) -> PathBuf {
    dir.join(format!("{prefix}_t{}.csv", sig6(time)))
}

pub fn write_snapshot(dir: &Path, prefix: &str, grid: &Grid1D, snap: &Snapshot) -> Result<PathBuf> {
    let mut text = String::from("x,u,chi,s,psi\n");
    for j in 0..grid.m() {
        writeln!(
            text,
            "{},{},{},{},{}",
            grid.center(j),
            snap.u[j],
            snap.chi[j],
            snap.s[j],
            snap.psi[j]
        )
        .expect("string write");
    }
    let path = snapshot_path(dir, prefix, snap.requested_time);
    fs::write(&path, text)?;
    Ok(path)
}

pub fn write_diagnostics(dir: &Path, prefix: &str, series: &DiagnosticsSeries) -> Result<PathBuf> {
    let mut text = String::from(
        "n,t,mass,l1,linf,tv,tv_bound,s_max,s_l1,q_l1,psi_min,external_mass,mass_defect\n",
    );
    for i in 0..series.t.len() {
        writeln!(
            text,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            i,
            series.t[i],
            series.mass[i],
            series.l1[i],
            series.linf[i],
            series.tv[i],
            series.tv_bound[i],
            series.s_max[i],
            series.s_l1[i],
            series.q_l1[i],
            series.psi_min[i],
            series.external_mass[i],
            series.mass_defect[i]
        )
        .expect("string write");
    }
    let path = dir.join(format!("{prefix}_diag.csv"));
    fs::write(&path, text)?;
    Ok(path)
}

pub fn write_run(dir: &Path, prefix: &str, result: &RunResult) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for snap in &result.snapshots {
        files.push(write_snapshot(dir, prefix, &result.grid, snap)?);
    }
    files.push(write_diagnostics(dir, prefix, &result.series)?);
    Ok(files)
}

/// Convergence table with per-row refinement rates; the fitted slopes go in
/// a trailing comment-free summary produced by [`convergence_text`].
pub fn write_convergence_csv(
    dir: &Path,
    prefix: &str,
    table: &ConvergenceTable,
) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut text = String::from("m,h,err_u,err_chi,err_s,rate_u,rate_chi,rate_s\n");
    for (i, row) in table.rows.iter().enumerate() {
        let rates = if i == 0 {
            (String::new(), String::new(), String::new())
        } else {
            let prev = &table.rows[i - 1];
            let ratio = (prev.h / row.h).ln();
            (
                format!("{}", (prev.err_u / row.err_u).ln() / ratio),
                format!("{}", (prev.err_chi / row.err_chi).ln() / ratio),
                format!("{}", (prev.err_s / row.err_s).ln() / ratio),
            )
        };
        writeln!(
            text,
            "{},{},{},{},{},{},{},{}",
            row.m, row.h, row.err_u, row.err_chi, row.err_s, rates.0, rates.1, rates.2
        )
        .expect("string write");
    }
    let path = dir.join(format!("{prefix}_convergence.csv"));
    fs::write(&path, text)?;
    Ok(path)
}

pub fn convergence_text(table: &ConvergenceTable, slopes: Option<&ConvergenceSlopes>) -> String {
    let mut text = String::new();
    writeln!(text, "{:>7} {:>12} {:>13} {:>13} {:>13}", "M", "h", "err_u", "err_chi", "err_s")
        .expect("string write");
    for row in &table.rows {
        writeln!(
            text,
            "{:>7} {:>12} {:>13} {:>13} {:>13}",
            row.m,
            sig6(row.h),
            sig6(row.err_u),
            sig6(row.err_chi),
            sig6(row.err_s)
        )
        .expect("string write");
    }
    if let Some(s) = slopes {
        writeln!(
            text,
            "fitted L1 slopes: u {:.3}  chi {:.3}  s {:.3}",
            s.rate_u, s.rate_chi, s.rate_s
        )
        .expect("string write");
    }
    text
}

pub fn write_batch_trajectory(
    dir: &Path,
    prefix: &str,
    r: f64,
    points: &[TrajectoryPoint],
) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut text = String::from("n,chi,s,psi,u,w,q\n");
    for (n, p) in points.iter().enumerate() {
        let psi = p.state.s * (r - p.state.chi);
        let u = p.state.chi + psi;
        let fmt_opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        writeln!(
            text,
            "{},{},{},{},{},{},{}",
            n,
            p.state.chi,
            p.state.s,
            psi,
            u,
            fmt_opt(p.w),
            fmt_opt(p.q)
        )
        .expect("string write");
    }
    let path = dir.join(format!("{prefix}_batch.csv"));
    fs::write(&path, text)?;
    Ok(path)
}
