//! Run configuration: the structured text format and its validation.
//!
//! Configs are TOML with one table per concern:
//!
//! ```toml
//! [model]       # kind = "eq" | "kin3" (transport), "kin1".."kin3" (batch)
//! [grid]        # x_min, x_max, m
//! [solubility]  # kind = "exponential" | "linear" | "layered" | "tabulated" | "time_ramped"
//! [flow]        # q, d_m, source
//! [stepping]    # nu, tau, k, t_final
//! [bc]          # inflow = "dirichlet" | "compact", chi_l
//! [init]        # profile = "box" | "step" | "zero" | "custom"
//! [output]      # snapshots = [...], prefix
//! ```
//!
//! plus optional `[regularization]`, `[warming]`, `[batch]`, and `[compare]`
//! tables. Unknown keys are rejected; semantic problems are reported with
//! their key path. Defaults: `nu = 0.9`, `k = 1`, `d_m = 0`, `porosity = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux::{
    FlowField, FlowSpec, RegularizationParams, SolubilityField, SourceSpec, WarmingLaw,
    WarmingScenario,
};
use crate::kinetics::{BatchState, KineticModel, KineticRate};
use crate::sim::{SimulationInput, SolubilityModel, SteppingSpec, TransportModel};
use crate::transport::{BoundaryConditions, Grid1D, InitialProfile};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Preset or scenario name; used as the output file prefix.
    pub name: Option<String>,
    /// Free-form units note (not enforced).
    pub units: Option<String>,
    pub model: ModelSection,
    pub grid: Option<GridSection>,
    pub solubility: Option<SolubilitySection>,
    pub flow: Option<FlowSection>,
    pub stepping: Option<SteppingSection>,
    pub bc: Option<BcSection>,
    pub init: Option<InitSection>,
    pub output: Option<OutputSection>,
    pub regularization: Option<RegularizationSection>,
    pub warming: Option<WarmingSection>,
    pub batch: Option<BatchSection>,
    pub compare: Option<CompareSection>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// "eq", "kin1", "kin2", or "kin3".
    pub kind: String,
    /// Hydrate methane fraction ratio R.
    pub r: f64,
    /// Kinetic exchange rate (required for kinetic models).
    pub k3: Option<f64>,
    pub porosity: Option<f64>,
    /// Provenance metadata for R; not used by the kernels.
    pub rho_l: Option<f64>,
    pub rho_h: Option<f64>,
    pub chi_mh: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub x_min: f64,
    pub x_max: f64,
    pub m: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolubilitySection {
    pub kind: String,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub intercept: Option<f64>,
    pub slope: Option<f64>,
    /// Additive offset applied after the variant formula.
    pub offset: Option<f64>,
    pub breakpoints: Option<Vec<f64>>,
    pub layers: Option<Vec<SolubilitySection>>,
    /// Two-column text file for tabulated fields.
    pub path: Option<String>,
    pub xs: Option<Vec<f64>>,
    pub values: Option<Vec<f64>>,
    /// Relative rate for "time_ramped": chi* = base * (1 + rate * t).
    pub rate: Option<f64>,
    pub base: Option<Box<SolubilitySection>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    pub q: Option<f64>,
    pub q_xs: Option<Vec<f64>>,
    pub q_values: Option<Vec<f64>>,
    pub d_m: Option<f64>,
    pub source: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteppingSection {
    pub nu: Option<f64>,
    /// Explicit concentration step; refused if above the stable limit.
    pub tau: Option<f64>,
    /// Macro ratio K (concentration steps per macro step).
    pub k: Option<usize>,
    pub t_final: f64,
    pub interpolate_macro: Option<bool>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcSection {
    /// "dirichlet" or "compact".
    pub inflow: Option<String>,
    pub chi_l: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    /// "box", "step", "zero", or "custom".
    pub profile: String,
    pub chi_l: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub u: Option<Vec<f64>>,
    pub chi: Option<Vec<f64>>,
    pub psi: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub snapshots: Option<Vec<f64>>,
    pub prefix: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizationSection {
    /// Band half-width scaling: eps = alpha * h.
    pub alpha: f64,
    pub enabled: Option<bool>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WarmingSection {
    /// "frozen" or "affine".
    pub law: String,
    pub d_ref0: f64,
    pub t_ref0: f64,
    pub sea_rise_rate: Option<f64>,
    pub temp_rise_rate: Option<f64>,
    pub g_h: Option<f64>,
    pub g_t: Option<f64>,
    pub rho_l: Option<f64>,
    pub g: Option<f64>,
    pub d_sf0: Option<f64>,
    /// Solubility sensitivity to reference pressure, 1/Pa.
    pub c_p: Option<f64>,
    /// Solubility sensitivity to reference temperature, 1/K.
    pub c_t: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchSection {
    pub chi0: f64,
    pub s0: f64,
    pub chi_star: f64,
    pub k: f64,
    pub tau: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    /// Kinetic rates to run against the equilibrium reference.
    pub k3_values: Vec<f64>,
}

/// A batch-reactor run resolved from a config.
#[derive(Debug, Clone)]
pub struct BatchRun {
    pub model: KineticModel,
    pub init: BatchState,
    pub chi_star: f64,
    pub r: f64,
    pub rate: KineticRate,
    pub n_steps: usize,
}

/// Output destinations shared by the scenario kinds.
#[derive(Debug, Clone)]
pub struct OutputSpec {
    pub prefix: String,
    pub snapshot_times: Vec<f64>,
}

/// What a validated config asks the runner to do.
#[derive(Debug, Clone)]
pub enum Scenario {
    Transport(Box<SimulationInput>),
    Batch(BatchRun),
    /// Equilibrium reference plus kinetic runs at each rate, compared in L1.
    KineticVsEq { base: Box<SimulationInput>, k3_values: Vec<f64> },
}

/// A validated configuration ready to run.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub scenario: Scenario,
    pub output: OutputSpec,
    pub warnings: Vec<String>,
}

/// Parse the structured config text. Syntax errors carry the line/column
/// from the TOML parser; unknown keys are rejected.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    toml::from_str(text).map_err(|e| Error::config(e.to_string()))
}

impl RunConfig {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::config(e.to_string()))
    }

    /// Apply defaults and cross-validate; returns the runnable scenario.
    pub fn resolve(&self) -> Result<ResolvedConfig> {
        let mut warnings = Vec::new();
        let kind = self.model.kind.to_ascii_lowercase();
        let r = self.model.r;
        if !(r > 0.0) {
            return Err(Error::config(format!("model.r: must be > 0, got {r}")));
        }

        let prefix = self
            .output
            .as_ref()
            .and_then(|o| o.prefix.clone())
            .or_else(|| self.name.clone())
            .unwrap_or_else(|| "run".to_string());

        // Batch scenarios carry a [batch] table and no grid.
        if let Some(batch) = &self.batch {
            if self.grid.is_some() {
                return Err(Error::config(
                    "batch: remove the [grid] table for batch runs".to_string(),
                ));
            }
            let model = match kind.as_str() {
                "kin1" => KineticModel::Kin1,
                "kin2" => KineticModel::Kin2,
                "kin3" => KineticModel::Kin3,
                other => {
                    return Err(Error::config(format!(
                        "model.kind: batch runs need kin1/kin2/kin3, got \"{other}\""
                    )))
                }
            };
            if !(batch.chi_star > 0.0 && batch.chi_star < r) {
                return Err(Error::config(format!(
                    "batch.chi_star: must satisfy 0 < chi_star < R, got {}",
                    batch.chi_star
                )));
            }
            let rate = KineticRate::new(batch.k, batch.tau)
                .map_err(|e| Error::config(format!("batch: {e}")))?;
            let run = BatchRun {
                model,
                init: BatchState::new(batch.chi0, batch.s0),
                chi_star: batch.chi_star,
                r,
                rate,
                n_steps: batch.steps,
            };
            return Ok(ResolvedConfig {
                scenario: Scenario::Batch(run),
                output: OutputSpec { prefix, snapshot_times: Vec::new() },
                warnings,
            });
        }

        // Transport scenarios.
        let model = match kind.as_str() {
            "eq" => TransportModel::Eq,
            "kin3" => TransportModel::Kin3 {
                k3: self.model.k3.ok_or_else(|| {
                    Error::config("model.k3: required for kind = \"kin3\"".to_string())
                })?,
            },
            "kin1" | "kin2" => {
                return Err(Error::config(format!(
                    "model.kind: \"{kind}\" is batch-only; transport supports eq and kin3"
                )))
            }
            other => {
                return Err(Error::config(format!("model.kind: unknown model \"{other}\"")))
            }
        };

        let grid_sec = self
            .grid
            .as_ref()
            .ok_or_else(|| Error::config("grid: required for transport runs".to_string()))?;
        let grid = Grid1D::new(grid_sec.x_min, grid_sec.x_max, grid_sec.m)
            .map_err(|e| Error::config(format!("grid: {e}")))?;

        let sol_sec = self
            .solubility
            .as_ref()
            .ok_or_else(|| Error::config("solubility: required for transport runs".to_string()))?;
        let field = sol_sec.to_field("solubility")?;

        let flow = match &self.flow {
            Some(f) => f.to_flow("flow")?,
            None => {
                warnings.push(
                    "flow: missing table, defaulting to q = 0, d_m = 0 (degenerate flow)"
                        .to_string(),
                );
                FlowField::new(FlowSpec::Constant(0.0), 0.0, SourceSpec::Zero)?
            }
        };
        if self
            .flow
            .as_ref()
            .is_some_and(|f| f.q.is_none() && f.q_xs.is_none())
        {
            warnings.push("flow.q: not given, defaulting to 0 (degenerate flow)".to_string());
        }

        let step_sec = self
            .stepping
            .as_ref()
            .ok_or_else(|| Error::config("stepping: required for transport runs".to_string()))?;
        let stepping = SteppingSpec {
            nu: step_sec.nu.unwrap_or(0.9),
            tau_override: step_sec.tau,
            k_macro: step_sec.k.unwrap_or(1),
            t_final: step_sec.t_final,
            interpolate_macro: step_sec.interpolate_macro.unwrap_or(false),
        };

        let init_sec = self
            .init
            .as_ref()
            .ok_or_else(|| Error::config("init: required for transport runs".to_string()))?;
        let init = init_sec.to_profile("init")?;

        let bcs = self.resolve_bcs(init_sec, &init)?;

        let regularization = match &self.regularization {
            Some(sec) if sec.enabled.unwrap_or(true) => Some(
                RegularizationParams::new(sec.alpha)
                    .map_err(|e| Error::config(format!("regularization: {e}")))?,
            ),
            _ => None,
        };

        let solubility = match &self.warming {
            Some(w) => SolubilityModel::Warming(w.to_scenario(field, "warming")?),
            None => SolubilityModel::Static(field),
        };

        let snapshot_times = self
            .output
            .as_ref()
            .and_then(|o| o.snapshots.clone())
            .unwrap_or_else(|| vec![step_sec.t_final]);

        let input = SimulationInput {
            model,
            grid,
            r,
            porosity: self.model.porosity.unwrap_or(1.0),
            solubility,
            flow,
            stepping,
            bcs,
            init,
            regularization,
            snapshot_times: snapshot_times.clone(),
        };

        let scenario = match &self.compare {
            Some(cmp) => {
                if cmp.k3_values.is_empty() {
                    return Err(Error::config("compare.k3_values: must be nonempty".to_string()));
                }
                if !matches!(model, TransportModel::Eq) {
                    return Err(Error::config(
                        "compare: the base model must be kind = \"eq\"".to_string(),
                    ));
                }
                Scenario::KineticVsEq { base: Box::new(input), k3_values: cmp.k3_values.clone() }
            }
            None => Scenario::Transport(Box::new(input)),
        };
        Ok(ResolvedConfig { scenario, output: OutputSpec { prefix, snapshot_times }, warnings })
    }

    fn resolve_bcs(
        &self,
        init_sec: &InitSection,
        init: &InitialProfile,
    ) -> Result<BoundaryConditions> {
        let default_kind = match init {
            // Step data keeps feeding the domain through the inflow.
            InitialProfile::StepH { .. } => "dirichlet",
            _ => "compact",
        };
        let kind = self
            .bc
            .as_ref()
            .and_then(|b| b.inflow.as_deref())
            .unwrap_or(default_kind)
            .to_ascii_lowercase();
        match kind.as_str() {
            "dirichlet" => {
                let chi_l =
                    self.bc.as_ref().and_then(|b| b.chi_l).or(init_sec.chi_l).ok_or_else(|| {
                        Error::config("bc.chi_l: required for inflow = \"dirichlet\"".to_string())
                    })?;
                Ok(BoundaryConditions::inflow_dirichlet(chi_l))
            }
            "compact" => Ok(BoundaryConditions::compact_support()),
            other => Err(Error::config(format!("bc.inflow: unknown kind \"{other}\""))),
        }
    }
}

impl SolubilitySection {
    pub fn to_field(&self, path: &str) -> Result<SolubilityField> {
        let need = |v: Option<f64>, key: &str| {
            v.ok_or_else(|| {
                Error::config(format!("{path}.{key}: required for kind = \"{}\"", self.kind))
            })
        };
        let inner = match self.kind.to_ascii_lowercase().as_str() {
            "exponential" => {
                SolubilityField::Exponential { a: need(self.a, "a")?, b: need(self.b, "b")? }
            }
            "linear" => SolubilityField::Linear {
                intercept: need(self.intercept, "intercept")?,
                slope: need(self.slope, "slope")?,
            },
            "layered" => {
                let breakpoints = self.breakpoints.clone().ok_or_else(|| {
                    Error::config(format!("{path}.breakpoints: required for layered fields"))
                })?;
                let layers = self.layers.as_ref().ok_or_else(|| {
                    Error::config(format!("{path}.layers: required for layered fields"))
                })?;
                if layers.len() != breakpoints.len() + 1 {
                    return Err(Error::config(format!(
                        "{path}.layers: need {} layers for {} breakpoints, got {}",
                        breakpoints.len() + 1,
                        breakpoints.len(),
                        layers.len()
                    )));
                }
                if !breakpoints.windows(2).all(|w| w[0] < w[1]) {
                    return Err(Error::config(format!(
                        "{path}.breakpoints: must be strictly increasing"
                    )));
                }
                let layers = layers
                    .iter()
                    .enumerate()
                    .map(|(i, l)| l.to_field(&format!("{path}.layers[{i}]")))
                    .collect::<Result<Vec<_>>>()?;
                SolubilityField::Layered { breakpoints, layers }
            }
            "tabulated" => {
                if let Some(path_str) = &self.path {
                    let text = std::fs::read_to_string(path_str)?;
                    SolubilityField::parse_tabulated(&text)?
                } else {
                    let xs = self.xs.clone().ok_or_else(|| {
                        Error::config(format!("{path}.xs: required when no file path is given"))
                    })?;
                    let values = self.values.clone().ok_or_else(|| {
                        Error::config(format!(
                            "{path}.values: required when no file path is given"
                        ))
                    })?;
                    if xs.len() != values.len() || xs.len() < 2 {
                        return Err(Error::config(format!(
                            "{path}: xs and values need equal length >= 2"
                        )));
                    }
                    if !xs.windows(2).all(|w| w[0] < w[1]) {
                        return Err(Error::config(format!(
                            "{path}.xs: must be strictly increasing"
                        )));
                    }
                    SolubilityField::Tabulated { xs, values }
                }
            }
            "time_ramped" => {
                let base = self.base.as_ref().ok_or_else(|| {
                    Error::config(format!("{path}.base: required for time_ramped fields"))
                })?;
                SolubilityField::TimeRamped {
                    base: Box::new(base.to_field(&format!("{path}.base"))?),
                    rate: need(self.rate, "rate")?,
                }
            }
            other => {
                return Err(Error::config(format!("{path}.kind: unknown field kind \"{other}\"")))
            }
        };
        Ok(match self.offset {
            Some(offset) if self.kind.to_ascii_lowercase() != "layered" => {
                SolubilityField::Offset { base: Box::new(inner), offset }
            }
            Some(_) => {
                return Err(Error::config(format!(
                    "{path}.offset: put offsets on the individual layers"
                )))
            }
            None => inner,
        })
    }
}

impl FlowSection {
    pub fn to_flow(&self, path: &str) -> Result<FlowField> {
        let q = match (&self.q, &self.q_xs, &self.q_values) {
            (Some(q), None, None) => FlowSpec::Constant(*q),
            (None, Some(xs), Some(values)) => {
                if xs.len() != values.len() || xs.len() < 2 {
                    return Err(Error::config(format!(
                        "{path}: q_xs and q_values need equal length >= 2"
                    )));
                }
                FlowSpec::Tabulated { xs: xs.clone(), values: values.clone() }
            }
            (None, None, None) => FlowSpec::Constant(0.0),
            _ => {
                return Err(Error::config(format!(
                    "{path}: give either q or the q_xs/q_values pair"
                )))
            }
        };
        let source = match self.source {
            Some(s) if s != 0.0 => SourceSpec::Constant(s),
            _ => SourceSpec::Zero,
        };
        FlowField::new(q, self.d_m.unwrap_or(0.0), source)
            .map_err(|e| Error::config(format!("{path}: {e}")))
    }
}

impl InitSection {
    pub fn to_profile(&self, path: &str) -> Result<InitialProfile> {
        match self.profile.to_ascii_lowercase().as_str() {
            "box" => Ok(InitialProfile::BoxHH {
                chi_l: self.chi_l.ok_or_else(|| {
                    Error::config(format!("{path}.chi_l: required for box profiles"))
                })?,
                a: self
                    .a
                    .ok_or_else(|| Error::config(format!("{path}.a: required for box profiles")))?,
                b: self
                    .b
                    .ok_or_else(|| Error::config(format!("{path}.b: required for box profiles")))?,
            }),
            "step" => Ok(InitialProfile::StepH {
                chi_l: self.chi_l.ok_or_else(|| {
                    Error::config(format!("{path}.chi_l: required for step profiles"))
                })?,
            }),
            "zero" => Ok(InitialProfile::Zero),
            "custom" => Ok(InitialProfile::Custom {
                u: self.u.clone().ok_or_else(|| {
                    Error::config(format!("{path}.u: required for custom profiles"))
                })?,
                chi: self.chi.clone(),
                psi: self.psi.clone(),
            }),
            other => Err(Error::config(format!("{path}.profile: unknown profile \"{other}\""))),
        }
    }
}

impl WarmingSection {
    pub fn to_scenario(&self, base: SolubilityField, path: &str) -> Result<WarmingScenario> {
        let rho_l = self.rho_l.unwrap_or(1030.0);
        let g = self.g.unwrap_or(9.8);
        let law = match self.law.to_ascii_lowercase().as_str() {
            "frozen" => WarmingLaw::Frozen,
            "affine" => WarmingLaw::AffineRamp {
                c_p: self.c_p.unwrap_or(0.0),
                c_t: self.c_t.unwrap_or(0.0),
            },
            other => return Err(Error::config(format!("{path}.law: unknown law \"{other}\""))),
        };
        Ok(WarmingScenario {
            base,
            d_ref0: self.d_ref0,
            t_ref0: self.t_ref0,
            sea_rise_rate: self.sea_rise_rate.unwrap_or(0.003),
            temp_rise_rate: self.temp_rise_rate.unwrap_or(0.01),
            g_h: self.g_h.unwrap_or(rho_l * g),
            g_t: self.g_t.unwrap_or(0.171),
            rho_l,
            g,
            d_sf0: self.d_sf0.unwrap_or(self.d_ref0),
            law,
        })
    }
}
