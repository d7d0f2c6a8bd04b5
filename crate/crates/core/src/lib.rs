//! 1D finite-volume simulation of methane transport with hydrate phase
//! change, under an equilibrium closure or kinetic relaxation toward it.
//!
//! The library is organized around the pieces of that model:
//!
//! * [`graph`] — the two-ray maximal monotone graphs, their resolvents and
//!   Yosida approximations;
//! * [`phase`] — the `(u, chi, s, psi)` algebra and the equilibrium closure;
//! * [`kinetics`] — the three implicit batch relaxation schemes and their
//!   property checks;
//! * [`flux`] — solubility/flow fields, the flux corner and its C2
//!   regularization, warming scenarios, Lipschitz-constant estimation;
//! * [`transport`] — the upwind finite-volume steps with implicit diffusion
//!   and the per-cell implicit exchange;
//! * [`sim`] — the macro/micro time-stepping driver with per-step
//!   diagnostics and stability-ledger verdicts;
//! * [`diagnostics`] — norms, total variation, analytical oracles,
//!   convergence-rate fitting, the ledger constants;
//! * [`config`], [`presets`], [`scenario`], [`output`] — the scenario runner
//!   the `hydrate1d` binary exposes.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod flux;
pub mod graph;
pub mod kinetics;
pub mod output;
pub mod phase;
pub mod presets;
pub mod scenario;
pub mod sim;
pub mod transport;

pub use error::{Error, Result};
