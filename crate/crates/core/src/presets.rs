//! Compiled-in scenario presets.
//!
//! The presets cover the model problems the solver is exercised on: the
//! analytical-solution transport case (exponential and linear solubility),
//! the basin-scale homogeneous column with and without flux regularization,
//! a three-layer heterogeneous column, kinetic-versus-equilibrium runs, the
//! warming/sea-level-rise sensitivity study, and the batch-reactor cases.
//! They are compiled in so the test suites have no data-file dependencies.

use crate::config::{
    BatchSection, BcSection, CompareSection, FlowSection, GridSection, InitSection, ModelSection,
    OutputSection, RegularizationSection, RunConfig, SolubilitySection, SteppingSection,
    WarmingSection,
};
use crate::diagnostics::BoxOracle;
use crate::flux::SolubilityField;
use crate::transport::Grid1D;

/// The basin column used by the homogeneous large-scale presets.
///
/// The solubility is a continuous two-regime exponential: the gentle decay
/// of the reference fit over most of the column, then a steep drop near the
/// bottom of the window. The gentle regime keeps cells near the flux corner
/// long enough for the regularization study to resolve a difference; the
/// steep regime accumulates the ~10% saturation peak over the 10 ky
/// horizon. The profile stays above the regularization band `alpha * h`
/// everywhere on the coarse grid, and the methane front exits through the
/// outflow around 8 ky.
pub mod basin {
    pub const X_MAX: f64 = 40.0;
    pub const M: usize = 100;
    /// Surface value and gentle decay rate of the shallow regime.
    pub const A: f64 = 0.0024;
    pub const B1: f64 = 0.012;
    /// Where the steep regime starts, and its decay rate.
    pub const X_KNEE: f64 = 35.0;
    pub const B2: f64 = 0.55;
    pub const Q: f64 = 5e-3;
    pub const CHI_L: f64 = 2e-3;
    pub const R: f64 = 0.1203;
    pub const T_FINAL: f64 = 1e4;
    pub const ALPHA: f64 = 1e-4;
    /// Spin-up horizon producing the warming studies' initial state.
    pub const T_SPIN: f64 = 1e4;

    /// Prefactor making the steep layer continuous at the regime change.
    pub fn a2() -> f64 {
        A * (-B1 * X_KNEE).exp() * (B2 * X_KNEE).exp()
    }
}

pub fn preset_names() -> Vec<(&'static str, &'static str)> {
    vec![
        ("masscons_exp", "traveling box vs analytical solution, chi* = e^{-0.5x}"),
        ("masscons_lin", "traveling box vs analytical solution, chi* = 1 - 0.26x"),
        ("ulleung_eq", "basin column, equilibrium model, sharp flux"),
        ("ulleung_eq_reg", "basin column, equilibrium model, regularized flux"),
        ("heterogeneous", "three sediment layers with solubility jumps at x = 1 and x = 2"),
        ("kinetic_k10", "kinetic transport, k3 = 10, step inflow"),
        ("kinetic_k100", "kinetic transport, k3 = 100, step inflow"),
        ("kinetic_eq_ref", "equilibrium reference for the kinetic runs"),
        ("kinetic_vs_eq", "L1 distance of kinetic runs (k3 = 10, 100) to equilibrium"),
        ("warming_eq", "warming/sea-level ramp, equilibrium model, K = 1"),
        ("warming_eq_k150", "warming ramp with one macro step covering 150 y (K = 150)"),
        ("warming_kin_k100", "warming ramp, kinetic model k3 = 100, K = 1"),
        ("batch_kin1_unsat", "batch KIN1 from (0.25, 0.2), unsaturated"),
        ("batch_kin2_unsat", "batch KIN2 from (0.25, 0.2), unsaturated"),
        ("batch_kin3_unsat", "batch KIN3 from (0.25, 0.2), unsaturated"),
        ("batch_kin1_sat", "batch KIN1 from (0.2, 0.8), saturated"),
        ("batch_kin2_sat", "batch KIN2 from (0.2, 0.8), saturated"),
        ("batch_kin3_sat", "batch KIN3 from (0.2, 0.8), saturated"),
    ]
}

pub fn preset(name: &str) -> Option<RunConfig> {
    match name {
        "masscons_exp" => Some(masscons(true)),
        "masscons_lin" => Some(masscons(false)),
        "ulleung_eq" => Some(ulleung(false)),
        "ulleung_eq_reg" => Some(ulleung(true)),
        "heterogeneous" => Some(heterogeneous()),
        "kinetic_k10" => Some(kinetic(Some(10.0))),
        "kinetic_k100" => Some(kinetic(Some(100.0))),
        "kinetic_eq_ref" => Some(kinetic(None)),
        "kinetic_vs_eq" => Some(kinetic_vs_eq()),
        "warming_eq" => Some(warming(1, None)),
        "warming_eq_k150" => Some(warming(150, None)),
        "warming_kin_k100" => Some(warming(1, Some(100.0))),
        "batch_kin1_unsat" => Some(batch("kin1", 0.25, 0.2)),
        "batch_kin2_unsat" => Some(batch("kin2", 0.25, 0.2)),
        "batch_kin3_unsat" => Some(batch("kin3", 0.25, 0.2)),
        "batch_kin1_sat" => Some(batch("kin1", 0.2, 0.8)),
        "batch_kin2_sat" => Some(batch("kin2", 0.2, 0.8)),
        "batch_kin3_sat" => Some(batch("kin3", 0.2, 0.8)),
        _ => None,
    }
}

fn masscons(exponential: bool) -> RunConfig {
    let solubility = if exponential {
        SolubilitySection {
            kind: "exponential".to_string(),
            a: Some(1.0),
            b: Some(0.5),
            ..Default::default()
        }
    } else {
        SolubilitySection {
            kind: "linear".to_string(),
            intercept: Some(1.0),
            slope: Some(-0.26),
            ..Default::default()
        }
    };
    RunConfig {
        name: Some(if exponential { "masscons_exp" } else { "masscons_lin" }.to_string()),
        units: Some("dimensionless model problem".to_string()),
        model: ModelSection { kind: "eq".to_string(), r: 2.0, ..Default::default() },
        grid: Some(GridSection { x_min: -1.0, x_max: 3.0, m: 100 }),
        solubility: Some(solubility),
        flow: Some(FlowSection { q: Some(1.0), ..Default::default() }),
        stepping: Some(SteppingSection { t_final: 1.0, ..Default::default() }),
        bc: Some(BcSection { inflow: Some("compact".to_string()), chi_l: None }),
        init: Some(InitSection {
            profile: "box".to_string(),
            chi_l: Some(1.0),
            a: Some(-1.0),
            b: Some(0.0),
            ..Default::default()
        }),
        output: Some(OutputSection { snapshots: Some(vec![1.0]), prefix: None }),
        ..Default::default()
    }
}

/// The two-regime basin solubility profile (continuous at the regime knee).
fn basin_solubility() -> SolubilitySection {
    SolubilitySection {
        kind: "layered".to_string(),
        breakpoints: Some(vec![basin::X_KNEE]),
        layers: Some(vec![
            SolubilitySection {
                kind: "exponential".to_string(),
                a: Some(basin::A),
                b: Some(basin::B1),
                ..Default::default()
            },
            SolubilitySection {
                kind: "exponential".to_string(),
                a: Some(basin::a2()),
                b: Some(basin::B2),
                ..Default::default()
            },
        ]),
        ..Default::default()
    }
}

fn ulleung(regularized: bool) -> RunConfig {
    RunConfig {
        name: Some(if regularized { "ulleung_eq_reg" } else { "ulleung_eq" }.to_string()),
        units: Some("m, years".to_string()),
        model: ModelSection {
            kind: "eq".to_string(),
            r: basin::R,
            rho_l: Some(1030.0),
            rho_h: Some(925.0),
            ..Default::default()
        },
        grid: Some(GridSection { x_min: 0.0, x_max: basin::X_MAX, m: basin::M }),
        solubility: Some(basin_solubility()),
        flow: Some(FlowSection { q: Some(basin::Q), ..Default::default() }),
        stepping: Some(SteppingSection { t_final: basin::T_FINAL, ..Default::default() }),
        bc: Some(BcSection { inflow: Some("dirichlet".to_string()), chi_l: Some(basin::CHI_L) }),
        init: Some(InitSection {
            profile: "step".to_string(),
            chi_l: Some(basin::CHI_L),
            ..Default::default()
        }),
        output: Some(OutputSection { snapshots: Some(vec![basin::T_FINAL]), prefix: None }),
        regularization: regularized
            .then(|| RegularizationSection { alpha: basin::ALPHA, enabled: Some(true) }),
        ..Default::default()
    }
}

fn heterogeneous() -> RunConfig {
    let layers = vec![
        SolubilitySection {
            kind: "linear".to_string(),
            intercept: Some(1.0),
            slope: Some(-0.3),
            ..Default::default()
        },
        // e^{-0.2 (x - 1)} - 0.2 written as e^{0.2} e^{-0.2 x} - 0.2.
        SolubilitySection {
            kind: "exponential".to_string(),
            a: Some((0.2f64).exp()),
            b: Some(0.2),
            offset: Some(-0.2),
            ..Default::default()
        },
        SolubilitySection {
            kind: "linear".to_string(),
            intercept: Some(0.75),
            slope: Some(-0.1),
            ..Default::default()
        },
    ];
    RunConfig {
        name: Some("heterogeneous".to_string()),
        units: Some("dimensionless model problem".to_string()),
        model: ModelSection { kind: "eq".to_string(), r: 2.0, ..Default::default() },
        grid: Some(GridSection { x_min: 0.0, x_max: 3.0, m: 100 }),
        solubility: Some(SolubilitySection {
            kind: "layered".to_string(),
            breakpoints: Some(vec![1.0, 2.0]),
            layers: Some(layers),
            ..Default::default()
        }),
        flow: Some(FlowSection { q: Some(1.0), d_m: Some(0.0), ..Default::default() }),
        stepping: Some(SteppingSection { t_final: 2.4, ..Default::default() }),
        bc: Some(BcSection { inflow: Some("dirichlet".to_string()), chi_l: Some(0.8) }),
        init: Some(InitSection {
            profile: "step".to_string(),
            chi_l: Some(0.8),
            ..Default::default()
        }),
        output: Some(OutputSection { snapshots: Some(vec![2.4]), prefix: None }),
        ..Default::default()
    }
}

/// The kinetic model case: chi_L = chi_star(x_L) with x_L = 0.35 on the
/// exponential profile, so saturation starts exactly at x_L.
fn kinetic(k3: Option<f64>) -> RunConfig {
    let chi_l = 0.8395;
    debug_assert!((chi_l - (-0.5f64 * 0.35).exp()).abs() < 1e-3);
    let (name, kind) = match k3 {
        Some(k) if k == 10.0 => ("kinetic_k10", "kin3"),
        Some(_) => ("kinetic_k100", "kin3"),
        None => ("kinetic_eq_ref", "eq"),
    };
    RunConfig {
        name: Some(name.to_string()),
        units: Some("dimensionless model problem".to_string()),
        model: ModelSection { kind: kind.to_string(), r: 2.0, k3, ..Default::default() },
        grid: Some(GridSection { x_min: 0.0, x_max: 2.0, m: 100 }),
        solubility: Some(SolubilitySection {
            kind: "exponential".to_string(),
            a: Some(1.0),
            b: Some(0.5),
            ..Default::default()
        }),
        flow: Some(FlowSection { q: Some(1.0), ..Default::default() }),
        stepping: Some(SteppingSection { t_final: 1.0, ..Default::default() }),
        bc: Some(BcSection { inflow: Some("dirichlet".to_string()), chi_l: Some(chi_l) }),
        init: Some(InitSection {
            profile: "step".to_string(),
            chi_l: Some(chi_l),
            ..Default::default()
        }),
        output: Some(OutputSection { snapshots: Some(vec![1.0]), prefix: None }),
        ..Default::default()
    }
}

fn kinetic_vs_eq() -> RunConfig {
    let mut cfg = kinetic(None);
    cfg.name = Some("kinetic_vs_eq".to_string());
    cfg.compare = Some(CompareSection { k3_values: vec![10.0, 100.0] });
    cfg
}

/// Initial state for the warming runs: the analytical basin-column profile
/// after the spin-up horizon, sampled at the cell centers.
pub fn warming_initial_state(grid: &Grid1D) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let field = basin_solubility().to_field("basin").expect("fixed preset field");
    let oracle = BoxOracle::new(
        basin::CHI_L,
        basin::Q,
        basin::R,
        field,
        (f64::NEG_INFINITY, 0.0),
        (0.0, basin::X_MAX),
    )
    .expect("basin oracle parameters are fixed");
    let (u, chi, _s) = oracle.sample(grid, basin::T_SPIN).expect("analytic fields are total");
    let psi: Vec<f64> = u.iter().zip(&chi).map(|(&uv, &cv)| uv - cv).collect();
    (u, chi, psi)
}

fn warming(k_macro: usize, k3: Option<f64>) -> RunConfig {
    let grid = Grid1D::new(0.0, basin::X_MAX, basin::M).expect("fixed grid");
    let (u, chi, psi) = warming_initial_state(&grid);
    let name = match (k_macro, k3) {
        (_, Some(_)) => "warming_kin_k100".to_string(),
        (1, None) => "warming_eq".to_string(),
        (k, None) => format!("warming_eq_k{k}"),
    };
    RunConfig {
        name: Some(name),
        units: Some("m, years; pressures in Pa, temperatures in K".to_string()),
        model: ModelSection {
            kind: if k3.is_some() { "kin3" } else { "eq" }.to_string(),
            r: basin::R,
            k3,
            ..Default::default()
        },
        grid: Some(GridSection { x_min: 0.0, x_max: basin::X_MAX, m: basin::M }),
        solubility: Some(SolubilitySection {
            kind: "exponential".to_string(),
            a: Some(basin::A),
            b: Some(basin::B),
            ..Default::default()
        }),
        flow: Some(FlowSection { q: Some(basin::Q), d_m: Some(3e-2), ..Default::default() }),
        stepping: Some(SteppingSection {
            tau: Some(1.0),
            k: Some(k_macro),
            t_final: 150.0,
            ..Default::default()
        }),
        bc: Some(BcSection { inflow: Some("dirichlet".to_string()), chi_l: Some(basin::CHI_L) }),
        init: Some(InitSection {
            profile: "custom".to_string(),
            u: Some(u),
            chi: Some(chi),
            psi: Some(psi),
            ..Default::default()
        }),
        output: Some(OutputSection { snapshots: Some(vec![0.0, 150.0]), prefix: None }),
        warming: Some(WarmingSection {
            law: "affine".to_string(),
            d_ref0: 2145.0,
            t_ref0: 273.55,
            sea_rise_rate: Some(0.003),
            temp_rise_rate: Some(0.01),
            g_t: Some(0.171),
            d_sf0: Some(2268.49),
            c_p: Some(-1e-9),
            c_t: Some(0.2),
            ..Default::default()
        }),
        ..Default::default()
    }
}

fn batch(kind: &str, chi0: f64, s0: f64) -> RunConfig {
    let regime = if chi0 + s0 * (2.0 - chi0) >= 1.0 { "sat" } else { "unsat" };
    RunConfig {
        name: Some(format!("batch_{kind}_{regime}")),
        units: Some("dimensionless model problem".to_string()),
        model: ModelSection { kind: kind.to_string(), r: 2.0, ..Default::default() },
        batch: Some(BatchSection { chi0, s0, chi_star: 1.0, k: 1.0, tau: 1.0, steps: 30 }),
        ..Default::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Scenario;

    #[test]
    fn all_presets_resolve() {
        for (name, _) in preset_names() {
            let cfg = preset(name).unwrap_or_else(|| panic!("missing preset {name}"));
            let resolved =
                cfg.resolve().unwrap_or_else(|e| panic!("preset {name} failed to resolve: {e}"));
            assert_eq!(resolved.output.prefix, name);
        }
        assert!(preset("no_such_preset").is_none());
    }

    #[test]
    fn masscons_matches_model_case() {
        let cfg = preset("masscons_exp").unwrap();
        let g = cfg.grid.as_ref().unwrap();
        assert_eq!((g.x_min, g.x_max, g.m), (-1.0, 3.0, 100));
        assert_eq!(cfg.model.r, 2.0);
        let resolved = cfg.resolve().unwrap();
        match resolved.scenario {
            Scenario::Transport(input) => {
                assert_eq!(input.stepping.nu, 0.9);
                assert_eq!(input.stepping.t_final, 1.0);
            }
            _ => panic!("expected transport"),
        }
    }

    #[test]
    fn ulleung_matches_basin_case() {
        let cfg = preset("ulleung_eq").unwrap();
        assert_eq!(cfg.flow.as_ref().unwrap().q, Some(5e-3));
        assert_eq!(cfg.bc.as_ref().unwrap().chi_l, Some(2e-3));
        assert_eq!(cfg.model.r, 0.1203);
        assert_eq!(cfg.stepping.as_ref().unwrap().t_final, 1e4);
        assert!(cfg.regularization.is_none());
        let reg = preset("ulleung_eq_reg").unwrap();
        assert_eq!(reg.regularization.as_ref().unwrap().alpha, 1e-4);
    }

    #[test]
    fn kinetic_presets_encode_the_onset_relation() {
        // chi_L = chi_star(x_L) at x_L = 0.35 to the printed precision.
        let chi_l = preset("kinetic_k100").unwrap().bc.unwrap().chi_l.unwrap();
        assert!((chi_l - (-0.5f64 * 0.35).exp()).abs() < 1e-3);
    }

    #[test]
    fn warming_initial_state_is_physical() {
        let grid = Grid1D::new(0.0, basin::X_MAX, basin::M).unwrap();
        let (u, chi, psi) = warming_initial_state(&grid);
        let s_max = u
            .iter()
            .zip(&chi)
            .zip(&psi)
            .map(|((&u, &c), &p)| {
                assert!((u - (c + p)).abs() < 1e-15);
                p / (basin::R - c)
            })
            .fold(0.0f64, f64::max);
        assert!(s_max > 0.05 && s_max < 0.15, "spun-up peak saturation {s_max}");
        assert!(psi.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn batch_presets_follow_the_reference_data() {
        let cfg = preset("batch_kin3_unsat").unwrap();
        let b = cfg.batch.as_ref().unwrap();
        assert_eq!((b.chi0, b.s0, b.chi_star, b.k, b.tau), (0.25, 0.2, 1.0, 1.0, 1.0));
    }
}
