//! Scenario runner: dispatches validated configs to the simulation driver,
//! batch iterator, or comparison studies, and writes their outputs.

use std::path::{Path, PathBuf};

use crate::config::{BatchRun, ResolvedConfig, RunConfig, Scenario};
use crate::diagnostics::{
    l1_error, restrict_fine, BoxOracle, ConvergenceRow, ConvergenceSlopes, ConvergenceTable,
};
use crate::error::{Error, Result};
use crate::flux::FlowSpec;
use crate::kinetics::batch_trajectory;
use crate::output;
use crate::presets;
use crate::sim::{run_simulation, RunResult, SimulationInput, SolubilityModel, TransportModel};
use crate::transport::{Grid1D, InitialProfile};

/// Outcome of one scenario invocation. `exit_code` follows the contract:
/// 0 on success, 2 when a stability verdict failed (the run itself is still
/// written), errors surface as `Err` and map to 1.
#[derive(Debug)]
pub struct ScenarioOutcome {
    pub exit_code: i32,
    pub summary: String,
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

/// Interpret `arg` as a preset name, falling back to a config file path.
pub fn load_config(arg: &str) -> Result<RunConfig> {
    if let Some(cfg) = presets::preset(arg) {
        return Ok(cfg);
    }
    let path = Path::new(arg);
    if !path.exists() {
        return Err(Error::config(format!(
            "\"{arg}\" is neither a preset (see list-presets) nor a config file"
        )));
    }
    crate::config::parse_config(&std::fs::read_to_string(path)?)
}

pub fn run_scenario(
    cfg: &RunConfig,
    out_dir: &Path,
    snapshots_override: Option<&[f64]>,
) -> Result<ScenarioOutcome> {
    let mut resolved = cfg.resolve()?;
    if let Some(times) = snapshots_override {
        resolved.output.snapshot_times = times.to_vec();
        if let Scenario::Transport(input) | Scenario::KineticVsEq { base: input, .. } =
            &mut resolved.scenario
        {
            input.snapshot_times = times.to_vec();
        }
    }
    match &resolved.scenario {
        Scenario::Transport(input) => run_transport_scenario(input, &resolved, out_dir),
        Scenario::Batch(batch) => run_batch_scenario(batch, &resolved, out_dir),
        Scenario::KineticVsEq { base, k3_values } => {
            run_compare_scenario(base, k3_values, &resolved, out_dir)
        }
    }
}

fn verdict_lines(result: &RunResult) -> String {
    let v = &result.verdicts;
    let mark = |ok: bool| if ok { "ok" } else { "VIOLATED" };
    let mut s = String::new();
    if v.tv_bound_applicable {
        s.push_str(&format!("  TV within ledger bound: {}\n", mark(v.tv_within_bound)));
    } else {
        s.push_str("  TV bound: not applicable (solubility field has jumps)\n");
    }
    s.push_str(&format!("  L1 stability:           {}\n", mark(v.l1_stable)));
    s.push_str(&format!("  mass conservation:      {}\n", mark(v.mass_conserved)));
    s.push_str(&format!("  ||Q||_1 within C5:      {}\n", mark(v.q_within_bound)));
    s.push_str(&format!("  Psi nonnegative:        {}\n", mark(v.psi_nonnegative)));
    if let Some(first) = &v.first_violation {
        s.push_str(&format!("  first violation: {first}\n"));
    }
    s
}

fn run_transport_scenario(
    input: &SimulationInput,
    resolved: &ResolvedConfig,
    out_dir: &Path,
) -> Result<ScenarioOutcome> {
    let result = run_simulation(input)?;
    let files = output::write_run(out_dir, &resolved.output.prefix, &result)?;
    let mut summary = format!(
        "{}: M = {}, tau = {}, steps = {} ({} macro x {})\n",
        resolved.output.prefix,
        result.grid.m(),
        output::sig6(result.control.tau),
        result.control.n_steps,
        result.control.n_macro,
        result.control.k_macro,
    );
    summary.push_str(&format!(
        "  final: mass = {}, max S = {}, ||S||_1 = {}\n",
        output::sig6(*result.series.mass.last().unwrap()),
        output::sig6(*result.series.s_max.last().unwrap()),
        output::sig6(*result.series.s_l1.last().unwrap()),
    ));
    summary.push_str(&verdict_lines(&result));
    let mut warnings = resolved.warnings.clone();
    warnings.extend(result.warnings.iter().cloned());
    Ok(ScenarioOutcome {
        exit_code: if result.verdicts.all_ok() { 0 } else { 2 },
        summary,
        files,
        warnings,
    })
}

fn run_batch_scenario(
    batch: &BatchRun,
    resolved: &ResolvedConfig,
    out_dir: &Path,
) -> Result<ScenarioOutcome> {
    let traj = batch_trajectory(
        batch.model,
        batch.init,
        batch.chi_star,
        batch.r,
        batch.rate,
        batch.n_steps,
    )?;
    let path = output::write_batch_trajectory(out_dir, &resolved.output.prefix, batch.r, &traj)?;
    let last = traj.last().unwrap();
    let summary = format!(
        "{}: {} steps of {} from ({}, {}) -> ({}, {}), |Q| = {}\n",
        resolved.output.prefix,
        batch.n_steps,
        batch.model,
        batch.init.chi,
        batch.init.s,
        output::sig6(last.state.chi),
        output::sig6(last.state.s),
        output::sig6(last.q.map(f64::abs).unwrap_or(0.0)),
    );
    Ok(ScenarioOutcome {
        exit_code: 0,
        summary,
        files: vec![path],
        warnings: resolved.warnings.clone(),
    })
}

fn run_compare_scenario(
    base: &SimulationInput,
    k3_values: &[f64],
    resolved: &ResolvedConfig,
    out_dir: &Path,
) -> Result<ScenarioOutcome> {
    let prefix = &resolved.output.prefix;
    let eq = run_simulation(base)?;
    let mut files = output::write_run(out_dir, &format!("{prefix}_eq"), &eq)?;
    let mut rows = Vec::new();
    let mut all_ok = eq.verdicts.all_ok();
    for &k3 in k3_values {
        let mut input = base.clone();
        input.model = TransportModel::Kin3 { k3 };
        let kin = run_simulation(&input)?;
        all_ok &= kin.verdicts.all_ok();
        let d_u = l1_error(&kin.final_u, &eq.final_u, base.grid.h())?;
        let d_chi = l1_error(&kin.final_chi, &eq.final_chi, base.grid.h())?;
        let d_s = l1_error(&kin.final_s, &eq.final_s, base.grid.h())?;
        files.extend(output::write_run(out_dir, &format!("{prefix}_k{}", output::sig6(k3)), &kin)?);
        rows.push((k3, d_u, d_chi, d_s));
    }
    let mut csv = String::from("k3,l1_u,l1_chi,l1_s\n");
    let mut summary = format!("{prefix}: L1 distance of kinetic runs to equilibrium at t_final\n");
    for (k3, d_u, d_chi, d_s) in &rows {
        csv.push_str(&format!("{k3},{d_u},{d_chi},{d_s}\n"));
        summary.push_str(&format!(
            "  k3 = {:>8}: ||U_kin - U_eq||_1 = {}\n",
            output::sig6(*k3),
            output::sig6(*d_u)
        ));
    }
    let monotone = rows.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 > w[1].1);
    summary.push_str(&format!(
        "  distance decreasing with k3: {}\n",
        if monotone { "yes" } else { "NO" }
    ));
    let path = out_dir.join(format!("{prefix}_distances.csv"));
    std::fs::write(&path, csv)?;
    files.push(path);
    Ok(ScenarioOutcome {
        exit_code: if all_ok { 0 } else { 2 },
        summary,
        files,
        warnings: resolved.warnings.clone(),
    })
}

/// Reference solution for a convergence sweep.
#[derive(Debug, Clone, Copy)]
pub enum SweepReference {
    /// The closed-form traveling-front solution (box or step data, constant
    /// positive flow, static solubility).
    Oracle,
    /// A fine-grid run restricted onto each coarse grid by cell averaging.
    FineGrid(usize),
}

/// Re-run a transport input at a different resolution.
pub fn at_resolution(input: &SimulationInput, m: usize) -> Result<SimulationInput> {
    if matches!(input.init, InitialProfile::Custom { .. }) {
        return Err(Error::precondition(
            "cannot resample a custom initial profile across resolutions".to_string(),
        ));
    }
    let mut out = input.clone();
    out.grid = Grid1D::new(input.grid.x_min(), input.grid.x_max(), m)?;
    Ok(out)
}

/// Build the analytical oracle matching a transport input.
pub fn oracle_for(input: &SimulationInput) -> Result<BoxOracle> {
    let field = match &input.solubility {
        SolubilityModel::Static(f) => f.clone(),
        SolubilityModel::Warming(_) => {
            return Err(Error::precondition(
                "the analytical solution needs a static solubility field".to_string(),
            ))
        }
    };
    let q = match input.flow.q {
        FlowSpec::Constant(q) if q > 0.0 => q / input.porosity,
        _ => {
            return Err(Error::precondition(
                "the analytical solution needs constant q > 0".to_string(),
            ))
        }
    };
    let (chi_l, support) = match &input.init {
        InitialProfile::BoxHH { chi_l, a, b } => (*chi_l, (*a, *b)),
        InitialProfile::StepH { chi_l } => (*chi_l, (f64::NEG_INFINITY, 0.0)),
        _ => {
            return Err(Error::precondition(
                "the analytical solution needs box or step initial data".to_string(),
            ))
        }
    };
    BoxOracle::new(chi_l, q, input.r, field, support, (input.grid.x_min(), input.grid.x_max()))
}

/// Run the sweep and fit the convergence rates. Errors are measured at
/// `t_final` against the oracle or the restricted fine-grid run.
pub fn convergence_sweep(
    cfg: &RunConfig,
    resolutions: &[usize],
    reference: SweepReference,
    out_dir: Option<&Path>,
) -> Result<(ConvergenceTable, ConvergenceSlopes, Vec<PathBuf>)> {
    let resolved = cfg.resolve()?;
    let base = match &resolved.scenario {
        Scenario::Transport(input) => input.as_ref().clone(),
        Scenario::KineticVsEq { base, .. } => base.as_ref().clone(),
        Scenario::Batch(_) => {
            return Err(Error::precondition("convergence sweeps need a transport config".to_string()))
        }
    };
    if resolutions.len() < 3 {
        return Err(Error::precondition(format!(
            "convergence sweep needs >= 3 resolutions, got {}",
            resolutions.len()
        )));
    }
    if !resolutions.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::precondition(
            "convergence sweep resolutions must be strictly increasing".to_string(),
        ));
    }

    let fine = match reference {
        SweepReference::Oracle => None,
        SweepReference::FineGrid(mf) => {
            for &m in resolutions {
                if mf % m != 0 {
                    return Err(Error::precondition(format!(
                        "fine resolution {mf} is not a multiple of {m}"
                    )));
                }
                if m >= mf {
                    return Err(Error::precondition(format!(
                        "fine resolution {mf} must exceed every sweep resolution (got {m})"
                    )));
                }
            }
            Some(run_simulation(&at_resolution(&base, mf)?)?)
        }
    };

    let mut table = ConvergenceTable::default();
    for &m in resolutions {
        let input = at_resolution(&base, m)?;
        let result = run_simulation(&input)?;
        let h = input.grid.h();
        let (err_u, err_chi, err_s) = match (&reference, &fine) {
            (SweepReference::Oracle, _) => {
                let oracle = oracle_for(&input)?;
                let (u, chi, s) = oracle.sample(&input.grid, input.stepping.t_final)?;
                (
                    l1_error(&result.final_u, &u, h)?,
                    l1_error(&result.final_chi, &chi, h)?,
                    l1_error(&result.final_s, &s, h)?,
                )
            }
            (SweepReference::FineGrid(_), Some(fine)) => (
                l1_error(&result.final_u, &restrict_fine(&fine.final_u, m)?, h)?,
                l1_error(&result.final_chi, &restrict_fine(&fine.final_chi, m)?, h)?,
                l1_error(&result.final_s, &restrict_fine(&fine.final_s, m)?, h)?,
            ),
            (SweepReference::FineGrid(_), None) => unreachable!(),
        };
        table.push(ConvergenceRow { m, h, err_u, err_chi, err_s });
    }
    let slopes = table.fit_rates()?;
    let mut files = Vec::new();
    if let Some(dir) = out_dir {
        files.push(output::write_convergence_csv(dir, &resolved.output.prefix, &table)?);
    }
    Ok((table, slopes, files))
}
