//! Macro/micro time-stepping driver.
//!
//! Each macro step refreshes the thermodynamic inputs (the solubility field,
//! via the warming scenario when one is configured), then takes `K`
//! CFL-limited concentration steps with those inputs frozen at the
//! macro-step value (or linearly interpolated across the window when
//! requested). Diagnostics are accumulated every step; requested snapshot
//! times are mapped to the nearest step with no temporal interpolation.
//!
//! Runs are deterministic: the same input produces bit-identical results.

use crate::diagnostics::{
    l1_norm, linf_norm, stability_ledger_eval, support_measure, tv_extended, LedgerInputs,
    StabilityLedger,
};
use crate::error::{Error, Result};
use crate::flux::{
    lipschitz_constants, warming_update, FlowField, FlowSpec, LipschitzConstants,
    RegularizationParams, SolubilityField, SourceSpec, WarmingLaw, WarmingScenario,
};
use crate::transport::{
    apply_initial_data, equilibrium_step, grid_mass, kinetic_step, max_stable_tau,
    BoundaryConditions, EqState, FluxKind, Grid1D, InitialProfile, KinState, StepContext,
};

/// Threshold below which a cell does not count toward the support measure.
const SUPPORT_THRESHOLD: f64 = 1e-14;

/// Relative slack when comparing measured quantities against ledger bounds.
const BOUND_SLACK: f64 = 1e-9;

/// Transport closure choice. The two batch-only models are rejected by the
/// scenario layer before reaching the driver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TransportModel {
    Eq,
    Kin3 { k3: f64 },
}

/// Static solubility data or a warming scenario that refreshes it at the
/// macro steps.
#[derive(Debug, Clone, PartialEq)]
pub enum SolubilityModel {
    Static(SolubilityField),
    Warming(WarmingScenario),
}

impl SolubilityModel {
    pub fn base(&self) -> &SolubilityField {
        match self {
            SolubilityModel::Static(f) => f,
            SolubilityModel::Warming(sc) => &sc.base,
        }
    }

    /// The frozen field for the macro step ending at `t`.
    fn frozen_at(&self, t: f64) -> Result<SolubilityField> {
        match self {
            SolubilityModel::Static(f) => Ok(f.clone()),
            SolubilityModel::Warming(sc) => warming_update(sc, t),
        }
    }

    /// An equivalent explicit `chi_star(x, t)` for constant estimation; the
    /// affine warming laws are linear in `t`, so this is exact.
    fn effective_field(&self) -> SolubilityField {
        match self {
            SolubilityModel::Static(f) => f.clone(),
            SolubilityModel::Warming(sc) => match sc.law {
                WarmingLaw::Frozen => sc.base.clone(),
                WarmingLaw::AffineRamp { c_p, c_t } => SolubilityField::TimeRamped {
                    base: Box::new(sc.base.clone()),
                    rate: c_p * sc.rho_l * sc.g * sc.sea_rise_rate + c_t * sc.temp_rise_rate,
                },
            },
        }
    }
}

/// Time-step controls before resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteppingSpec {
    /// CFL number in (0, 1].
    pub nu: f64,
    /// Explicit step size; refused if larger than the stable limit.
    pub tau_override: Option<f64>,
    /// Concentration steps per macro step.
    pub k_macro: usize,
    pub t_final: f64,
    /// Interpolate the frozen inputs across the macro window instead of
    /// holding the end-of-window value.
    pub interpolate_macro: bool,
}

/// Resolved step sizes: `n_steps = n_macro * k_macro` and
/// `tau * n_steps = t_final` with `tau` at or below the stable limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub tau: f64,
    pub n_steps: usize,
    pub k_macro: usize,
    pub n_macro: usize,
}

/// Fully resolved description of one transport run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationInput {
    pub model: TransportModel,
    pub grid: Grid1D,
    /// Hydrate methane fraction ratio.
    pub r: f64,
    /// Constant porosity; folded into the flux and source.
    pub porosity: f64,
    pub solubility: SolubilityModel,
    pub flow: FlowField,
    pub stepping: SteppingSpec,
    pub bcs: BoundaryConditions,
    pub init: InitialProfile,
    /// Regularize the equilibrium flux with `eps = alpha * h` when set.
    pub regularization: Option<RegularizationParams>,
    pub snapshot_times: Vec<f64>,
}

/// Field snapshot at (the step nearest) a requested output time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub requested_time: f64,
    pub time: f64,
    pub step: usize,
    pub u: Vec<f64>,
    pub chi: Vec<f64>,
    pub s: Vec<f64>,
    pub psi: Vec<f64>,
    pub w: Option<Vec<f64>>,
}

/// Per-step diagnostic series (one entry per step, including step 0).
#[derive(Debug, Clone, Default)]
pub struct DiagnosticsSeries {
    pub t: Vec<f64>,
    pub mass: Vec<f64>,
    pub tv: Vec<f64>,
    pub l1: Vec<f64>,
    pub linf: Vec<f64>,
    pub s_max: Vec<f64>,
    pub s_l1: Vec<f64>,
    pub q_l1: Vec<f64>,
    pub psi_min: Vec<f64>,
    /// Cumulative net external mass (boundary fluxes, sources, diffusion).
    pub external_mass: Vec<f64>,
    /// `mass - mass_0 - external_mass`: zero for a conservative scheme.
    pub mass_defect: Vec<f64>,
    /// TV bound from the ledger, evaluated at each step time.
    pub tv_bound: Vec<f64>,
}

/// Pass/fail outcome of the per-step stability checks.
#[derive(Debug, Clone, Default)]
pub struct LedgerVerdicts {
    /// `TV <= C1(t)` (equilibrium) or `TV <= TV0 + C4 t` (kinetic). Only
    /// binding when the solubility field is smooth (`applicable`).
    pub tv_within_bound: bool,
    pub tv_bound_applicable: bool,
    /// The product-space L1 norm never grows beyond what entered the domain.
    pub l1_stable: bool,
    /// `|mass - mass_0 - external| <= 1e-12 * scale` at every step.
    pub mass_conserved: bool,
    /// `||Q^n||_1 <= C5(T)` (kinetic; vacuous for equilibrium runs).
    pub q_within_bound: bool,
    /// `Psi >= 0` componentwise after every kinetic step.
    pub psi_nonnegative: bool,
    pub first_violation: Option<String>,
}

impl LedgerVerdicts {
    pub fn all_ok(&self) -> bool {
        (self.tv_within_bound || !self.tv_bound_applicable)
            && self.l1_stable
            && self.mass_conserved
            && self.q_within_bound
            && self.psi_nonnegative
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub grid: Grid1D,
    pub control: StepControl,
    pub snapshots: Vec<Snapshot>,
    pub series: DiagnosticsSeries,
    pub constants: LipschitzConstants,
    pub ledger: StabilityLedger,
    pub verdicts: LedgerVerdicts,
    pub warnings: Vec<String>,
    pub final_u: Vec<f64>,
    pub final_chi: Vec<f64>,
    pub final_s: Vec<f64>,
    pub final_psi: Vec<f64>,
}

/// Resolve the step sizes for a run. With a degenerate flow (`L_q = 0`) and
/// no explicit `tau`, the step falls back to `t_final / 100` with a warning.
pub fn resolve_step_control(
    grid: &Grid1D,
    l_q: f64,
    spec: &SteppingSpec,
    warnings: &mut Vec<String>,
) -> Result<StepControl> {
    if spec.k_macro == 0 {
        return Err(Error::parameter("macro ratio K must be >= 1".to_string()));
    }
    if !(spec.t_final > 0.0) {
        return Err(Error::parameter(format!("t_final must be > 0, got {}", spec.t_final)));
    }
    let tau_target = if l_q > 0.0 {
        let stable = max_stable_tau(grid, l_q, spec.nu)?;
        match spec.tau_override {
            Some(tau) => {
                if tau > stable * (1.0 + 1e-12) {
                    return Err(Error::CflViolation { tau, limit: stable });
                }
                tau
            }
            None => stable,
        }
    } else {
        match spec.tau_override {
            Some(tau) => tau,
            None => {
                warnings.push(
                    "degenerate flow (L_q = 0): tau set from t_final / 100".to_string(),
                );
                spec.t_final / 100.0
            }
        }
    };
    let window = spec.k_macro as f64 * tau_target;
    let n_macro = (spec.t_final / window).ceil().max(1.0) as usize;
    let n_steps = n_macro * spec.k_macro;
    let tau = spec.t_final / n_steps as f64;
    Ok(StepControl { tau, n_steps, k_macro: spec.k_macro, n_macro })
}

fn scaled_flow(flow: &FlowField, inv_phi: f64) -> Result<FlowField> {
    let q = match &flow.q {
        FlowSpec::Constant(q) => FlowSpec::Constant(q * inv_phi),
        FlowSpec::Tabulated { xs, values } => FlowSpec::Tabulated {
            xs: xs.clone(),
            values: values.iter().map(|v| v * inv_phi).collect(),
        },
    };
    let source = match flow.source {
        SourceSpec::Zero => SourceSpec::Zero,
        SourceSpec::Constant(s) => SourceSpec::Constant(s * inv_phi),
    };
    FlowField::new(q, flow.d_m, source)
}

fn blended_context(a: &StepContext, b: &StepContext, theta: f64) -> StepContext {
    let blend = |x: &[f64], y: &[f64]| -> Vec<f64> {
        x.iter().zip(y).map(|(&p, &q)| (1.0 - theta) * p + theta * q).collect()
    };
    StepContext {
        chi_star: blend(&a.chi_star, &b.chi_star),
        q_edges: blend(&a.q_edges, &b.q_edges),
        q_ghost: (1.0 - theta) * a.q_ghost + theta * b.q_ghost,
        src: blend(&a.src, &b.src),
        t: (1.0 - theta) * a.t + theta * b.t,
    }
}

enum State {
    Eq(EqState),
    Kin(KinState),
}

pub fn run_simulation(input: &SimulationInput) -> Result<RunResult> {
    let grid = input.grid;
    let r = input.r;
    if !(r > 0.0) {
        return Err(Error::parameter(format!("R must be > 0, got {r}")));
    }
    if !(input.porosity > 0.0) {
        return Err(Error::parameter(format!("porosity must be > 0, got {}", input.porosity)));
    }
    input.bcs.validate(r)?;

    let mut warnings = Vec::new();
    let flow = scaled_flow(&input.flow, 1.0 / input.porosity)?;

    // CFL data from the edge velocities at the initial time.
    let ctx0_probe = StepContext::build(&grid, input.solubility.base(), &flow, 0.0)?;
    let l_q = ctx0_probe.max_abs_q();
    if l_q == 0.0 && input.flow.d_m == 0.0 && matches!(input.flow.source, SourceSpec::Zero) {
        warnings.push("flow, diffusion, and source are all zero: trivial run".to_string());
    }
    let control = resolve_step_control(&grid, l_q, &input.stepping, &mut warnings)?;
    let tau = control.tau;

    // Initial data and its split.
    let u0 = apply_initial_data(&input.init, &grid)?;
    let field0 = input.solubility.frozen_at(0.0)?;
    let ctx_init = StepContext::build(&grid, &field0, &flow, 0.0)?;
    let eps = input.regularization.map(|reg| reg.epsilon(grid.h()));
    if let Some(e) = eps {
        // The band must stay below the knee everywhere.
        for &cs in &ctx_init.chi_star {
            if e >= cs {
                return Err(Error::parameter(format!(
                    "regularization eps = {e} reaches the solubility knee {cs}"
                )));
            }
        }
    }
    let flux_kind = match eps {
        Some(e) => FluxKind::Regularized { eps: e },
        None => FluxKind::Sharp,
    };

    let mut state = match input.model {
        TransportModel::Eq => State::Eq(EqState::from_totals(u0.clone(), &ctx_init, r)?),
        TransportModel::Kin3 { k3 } => {
            if !(k3 > 0.0) {
                return Err(Error::parameter(format!("k3 must be > 0, got {k3}")));
            }
            match &input.init {
                InitialProfile::Custom { chi: Some(chi), psi: Some(psi), .. } => State::Kin(
                    KinState::from_parts(chi.clone(), psi.clone(), &ctx_init, r)?,
                ),
                _ => State::Kin(KinState::from_totals(&u0, &ctx_init, r)?),
            }
        }
    };
    let k3 = match input.model {
        TransportModel::Eq => 0.0,
        TransportModel::Kin3 { k3 } => k3,
    };

    // Ledger constants from the effective (time-explicit) field.
    let u_max = r.max(linf_norm(&u0));
    let eff_field = input.solubility.effective_field();
    let constants =
        lipschitz_constants(&eff_field, &flow, &grid, u_max, input.stepping.t_final)?;

    // Initial diagnostics.
    let h = grid.h();
    let mut series = DiagnosticsSeries::default();
    let inflow_chi = input.bcs.inflow_chi();
    let (tv0, norm0, q0) = record_step(&mut series, &state, h, 0.0, k3, 0.0, inflow_chi);
    let mass0 = series.mass[0];
    let mut omega_s = initial_support(&state, h);
    let mut external = 0.0f64;
    let mut picard_failures = 0usize;

    // Map requested snapshot times to step indices.
    let snap_steps: Vec<(usize, f64)> = input
        .snapshot_times
        .iter()
        .map(|&t| (((t / tau).round().max(0.0) as usize).min(control.n_steps), t))
        .collect();
    let mut snapshots: Vec<Snapshot> = Vec::new();
    let mut take_snapshot = |state: &State, step: usize, requested: f64, time: f64| {
        snapshots.push(make_snapshot(state, r, step, requested, time));
    };
    for &(s, treq) in &snap_steps {
        if s == 0 {
            take_snapshot(&state, 0, treq, 0.0);
        }
    }

    // Macro / concentration loops.
    let mut ctx_prev = ctx_init.clone();
    for m in 1..=control.n_macro {
        let t_end = (m * control.k_macro) as f64 * tau;
        let field_m = input.solubility.frozen_at(t_end)?;
        let ctx_end = StepContext::build(&grid, &field_m, &flow, t_end)?;
        for sub in 1..=control.k_macro {
            let n = (m - 1) * control.k_macro + sub;
            let t_n = n as f64 * tau;
            let ctx = if input.stepping.interpolate_macro {
                blended_context(&ctx_prev, &ctx_end, sub as f64 / control.k_macro as f64)
            } else {
                ctx_end.clone()
            };
            let fluxes = match &mut state {
                State::Eq(eq) => {
                    let (next, fluxes, converged) = equilibrium_step(
                        eq, &grid, &ctx, tau, &input.bcs, flux_kind, flow.d_m, r,
                    )?;
                    if !converged {
                        picard_failures += 1;
                    }
                    *eq = next;
                    fluxes
                }
                State::Kin(kin) => {
                    let (next, fluxes) =
                        kinetic_step(kin, &grid, &ctx, k3, tau, &input.bcs, flow.d_m, r)?;
                    *kin = next;
                    fluxes
                }
            };
            external += fluxes.net();
            record_step(&mut series, &state, h, t_n, k3, external, inflow_chi);
            omega_s = omega_s.max(current_support(&state, h));
            for &(s, treq) in &snap_steps {
                if s == n {
                    take_snapshot(&state, n, treq, t_n);
                }
            }
        }
        ctx_prev = ctx_end;
    }
    if picard_failures > 0 {
        warnings.push(format!(
            "diffusion/closure iteration hit the cap in {picard_failures} steps"
        ));
    }

    // Ledger and verdicts.
    let inputs = LedgerInputs {
        tv0,
        norm0,
        q0,
        omega_s,
        k3,
        t_final: input.stepping.t_final,
    };
    let ledger = stability_ledger_eval(&constants, &inputs);
    let is_kinetic = matches!(input.model, TransportModel::Kin3 { .. });
    for (i, &t) in series.t.iter().enumerate() {
        let bound =
            if is_kinetic { ledger.kinetic_tv_bound_at(t) } else { ledger.c1_at(t) };
        series.tv_bound[i] = bound;
        series.mass_defect[i] = series.mass[i] - mass0 - series.external_mass[i];
    }
    let verdicts = evaluate_verdicts(&series, &ledger, &constants, is_kinetic);

    let (final_u, final_chi, final_s, final_psi) = match &state {
        State::Eq(eq) => (eq.u.clone(), eq.chi.clone(), eq.s.clone(), eq.psi(r)),
        State::Kin(kin) => (kin.totals(), kin.chi.clone(), kin.s.clone(), kin.psi.clone()),
    };
    Ok(RunResult {
        grid,
        control,
        snapshots,
        series,
        constants,
        ledger,
        verdicts,
        warnings,
        final_u,
        final_chi,
        final_s,
        final_psi,
    })
}

fn make_snapshot(state: &State, r: f64, step: usize, requested: f64, time: f64) -> Snapshot {
    match state {
        State::Eq(eq) => Snapshot {
            requested_time: requested,
            time,
            step,
            u: eq.u.clone(),
            chi: eq.chi.clone(),
            s: eq.s.clone(),
            psi: eq.psi(r),
            w: None,
        },
        State::Kin(kin) => Snapshot {
            requested_time: requested,
            time,
            step,
            u: kin.totals(),
            chi: kin.chi.clone(),
            s: kin.s.clone(),
            psi: kin.psi.clone(),
            w: Some(kin.w.clone()),
        },
    }
}

/// Append one diagnostics row; returns `(tv, l1, q_l1)` of the recorded state
/// so the caller can capture the initial values. The TV column uses the
/// inflow-extended variation the stability bounds are stated for.
fn record_step(
    series: &mut DiagnosticsSeries,
    state: &State,
    h: f64,
    t: f64,
    k3: f64,
    external: f64,
    inflow_chi: f64,
) -> (f64, f64, f64) {
    let (tv_v, l1_v, linf_v, s_max, s_l1, q_l1, psi_min, mass) = match state {
        State::Eq(eq) => (
            tv_extended(&eq.u, inflow_chi),
            l1_norm(&eq.u, h),
            linf_norm(&eq.u),
            linf_norm(&eq.s),
            l1_norm(&eq.s, h),
            0.0,
            0.0,
            grid_mass(&eq.u, h),
        ),
        State::Kin(kin) => {
            let q: Vec<f64> =
                kin.chi.iter().zip(&kin.w).map(|(&c, &w)| k3 * (c - w)).collect();
            (
                tv_extended(&kin.chi, inflow_chi) + tv_extended(&kin.psi, 0.0),
                l1_norm(&kin.chi, h) + l1_norm(&kin.psi, h),
                linf_norm(&kin.chi).max(linf_norm(&kin.psi)),
                linf_norm(&kin.s),
                l1_norm(&kin.s, h),
                l1_norm(&q, h),
                kin.psi.iter().fold(f64::INFINITY, |a, &b| a.min(b)),
                grid_mass(&kin.totals(), h),
            )
        }
    };
    series.t.push(t);
    series.mass.push(mass);
    series.tv.push(tv_v);
    series.l1.push(l1_v);
    series.linf.push(linf_v);
    series.s_max.push(s_max);
    series.s_l1.push(s_l1);
    series.q_l1.push(q_l1);
    series.psi_min.push(psi_min);
    series.external_mass.push(external);
    series.mass_defect.push(0.0);
    series.tv_bound.push(0.0);
    (tv_v, l1_v, q_l1)
}

fn initial_support(state: &State, h: f64) -> f64 {
    current_support(state, h)
}

fn current_support(state: &State, h: f64) -> f64 {
    match state {
        State::Eq(eq) => support_measure(&eq.u, h, SUPPORT_THRESHOLD),
        State::Kin(kin) => support_measure(&kin.totals(), h, SUPPORT_THRESHOLD),
    }
}

fn evaluate_verdicts(
    series: &DiagnosticsSeries,
    ledger: &StabilityLedger,
    constants: &LipschitzConstants,
    is_kinetic: bool,
) -> LedgerVerdicts {
    let mut v = LedgerVerdicts {
        tv_within_bound: true,
        // Prop-1-style bounds assume a smooth solubility field; layered
        // fields with jumps are outside the hypothesis.
        tv_bound_applicable: constants.chi_star_jumps.iter().all(|&(_, j)| j == 0.0),
        l1_stable: true,
        mass_conserved: true,
        q_within_bound: true,
        psi_nonnegative: true,
        first_violation: None,
    };
    let mass_scale = series.mass.iter().fold(1e-30f64, |a, &b| a.max(b.abs()));
    let note = |v: &mut Option<String>, msg: String| {
        if v.is_none() {
            *v = Some(msg);
        }
    };
    for i in 0..series.t.len() {
        let t = series.t[i];
        if series.tv[i] > series.tv_bound[i] * (1.0 + BOUND_SLACK) + 1e-12 {
            if v.tv_within_bound && v.tv_bound_applicable {
                note(
                    &mut v.first_violation,
                    format!("TV {} exceeds bound {} at t = {t}", series.tv[i], series.tv_bound[i]),
                );
            }
            v.tv_within_bound = false;
        }
        if series.mass_defect[i].abs() > 1e-12 * mass_scale {
            if v.mass_conserved {
                note(
                    &mut v.first_violation,
                    format!("mass defect {} at t = {t}", series.mass_defect[i]),
                );
            }
            v.mass_conserved = false;
        }
        if i > 0 {
            // The L1 norm may only grow by what entered from outside.
            let inflow_allowance =
                (series.external_mass[i] - series.external_mass[i - 1]).max(0.0);
            if series.l1[i] > series.l1[i - 1] + inflow_allowance + 1e-12 * mass_scale {
                if v.l1_stable {
                    note(
                        &mut v.first_violation,
                        format!("L1 norm grew beyond inflow at t = {t}"),
                    );
                }
                v.l1_stable = false;
            }
        }
        if is_kinetic {
            if series.q_l1[i] > ledger.c5 * (1.0 + BOUND_SLACK) + 1e-12 {
                if v.q_within_bound {
                    note(
                        &mut v.first_violation,
                        format!("||Q||_1 = {} exceeds C5 = {} at t = {t}", series.q_l1[i], ledger.c5),
                    );
                }
                v.q_within_bound = false;
            }
            if series.psi_min[i] < -0.0 {
                if v.psi_nonnegative {
                    note(&mut v.first_violation, format!("Psi < 0 at t = {t}"));
                }
                v.psi_nonnegative = false;
            }
        }
    }
    v
}
