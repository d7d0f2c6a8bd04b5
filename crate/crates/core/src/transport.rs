//! 1D finite-volume grid and the explicit upwind transport steps.
//!
//! Cells are uniform on `[x_min, x_max]`: cell `j` has edges
//! `x_min + j h` and `x_min + (j+1) h` and center `x_min + (j + 1/2) h`.
//! With flow pointing up (`q >= 0`) the scheme is the first-order upwind
//! update `U_j^n = U_j^{n-1} - (tau/h)[F_j - F_{j-1}]` with per-cell flux
//! `F_j = q_{j-1/2} X_j` evaluated at the cell's left edge, as in the
//! transport analysis. The equilibrium closure or the per-cell implicit
//! kinetic exchange follows the advective update; diffusion, when present,
//! is handled implicitly on the dissolved variable by a tridiagonal solve.
//!
//! The steps are deterministic state transformers: field in, new field out.
//! All reductions run in fixed index order.

use crate::error::{Error, Result};
use crate::flux::{flux_eval, flux_reg_eval, FlowField, SolubilityField};
use crate::graph::resolvent_wstar;
use crate::phase::equilibrium_closure;

/// Uniform 1D cell grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    m: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::parameter(format!("grid needs at least 2 cells, got {m}")));
        }
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::parameter(format!("invalid grid extent [{x_min}, {x_max}]")));
        }
        Ok(Grid1D { x_min, x_max, m })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn h(&self) -> f64 {
        (self.x_max - self.x_min) / self.m as f64
    }

    pub fn center(&self, j: usize) -> f64 {
        self.x_min + (j as f64 + 0.5) * self.h()
    }

    pub fn left_edge(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.h()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.m).map(|j| self.center(j)).collect()
    }

    /// Index of the cell containing `x` (clamped at the ends).
    pub fn cell_of(&self, x: f64) -> usize {
        let j = ((x - self.x_min) / self.h()).floor();
        (j.max(0.0) as usize).min(self.m - 1)
    }
}

/// Advective inflow condition at `x_min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InflowBc {
    /// Ghost cell holds the prescribed dissolved concentration.
    DirichletChi(f64),
    /// Nothing enters; the solution has compact support away from the boundary.
    CompactSupport,
}

/// Outflow at `x_max`: first-order extrapolation (the upwind update needs
/// no downstream value; this matters only for diffusion).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutflowBc {
    Extrapolate,
}

/// Boundary treatment of the implicit diffusion solve. The outflow end is
/// always no-flux; the inflow end either pins the ghost to the inflow
/// concentration or is no-flux as well.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffusionBc {
    DirichletAtInflow,
    NoFluxAtOutflow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryConditions {
    pub inflow: InflowBc,
    pub outflow: OutflowBc,
    pub diffusion: DiffusionBc,
}

impl BoundaryConditions {
    pub fn inflow_dirichlet(chi_l: f64) -> Self {
        BoundaryConditions {
            inflow: InflowBc::DirichletChi(chi_l),
            outflow: OutflowBc::Extrapolate,
            diffusion: DiffusionBc::DirichletAtInflow,
        }
    }

    pub fn compact_support() -> Self {
        BoundaryConditions {
            inflow: InflowBc::CompactSupport,
            outflow: OutflowBc::Extrapolate,
            diffusion: DiffusionBc::NoFluxAtOutflow,
        }
    }

    /// The ghost-cell dissolved concentration at the inflow.
    pub fn inflow_chi(&self) -> f64 {
        match self.inflow {
            InflowBc::DirichletChi(chi_l) => chi_l,
            InflowBc::CompactSupport => 0.0,
        }
    }

    pub fn validate(&self, r: f64) -> Result<()> {
        if let InflowBc::DirichletChi(chi_l) = self.inflow {
            if !(chi_l >= 0.0) || !chi_l.is_finite() {
                return Err(Error::parameter(format!("inflow chi_L must be >= 0, got {chi_l}")));
            }
            if chi_l >= r {
                return Err(Error::parameter(format!(
                    "inflow chi_L = {chi_l} must stay below R = {r} for a physical run"
                )));
            }
        }
        Ok(())
    }
}

/// Initial total-methane profiles, stored as exact cell averages.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialProfile {
    /// `chi_L * H(x - a) * H(b - x)`: a box on `(a, b)`.
    BoxHH { chi_l: f64, a: f64, b: f64 },
    /// `chi_L * H(-x)`: a step supported on `x < 0`.
    StepH { chi_l: f64 },
    Zero,
    /// Explicit cell data; `chi`/`psi` override the closure split when given.
    Custom { u: Vec<f64>, chi: Option<Vec<f64>>, psi: Option<Vec<f64>> },
}

/// Exact cell averages of the initial profile (fractional cells by overlap
/// length).
pub fn apply_initial_data(profile: &InitialProfile, grid: &Grid1D) -> Result<Vec<f64>> {
    // Overlaps are computed in cell-index coordinates so grid-aligned
    // profile edges give exactly full and exactly empty cells.
    let span = grid.x_max() - grid.x_min();
    let to_index = |x: f64| -> f64 {
        if x == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else if x == f64::INFINITY {
            f64::INFINITY
        } else {
            (x - grid.x_min()) / span * grid.m() as f64
        }
    };
    let box_average = |chi_l: f64, a: f64, b: f64| -> Vec<f64> {
        let (ia, ib) = (to_index(a), to_index(b));
        (0..grid.m())
            .map(|j| {
                let lo = ia.max(j as f64);
                let hi = ib.min((j + 1) as f64);
                chi_l * (hi - lo).max(0.0).min(1.0)
            })
            .collect()
    };
    match profile {
        InitialProfile::BoxHH { chi_l, a, b } => {
            if !(b > a) {
                return Err(Error::parameter(format!("box profile needs b > a, got ({a}, {b})")));
            }
            Ok(box_average(*chi_l, *a, *b))
        }
        InitialProfile::StepH { chi_l } => Ok(box_average(*chi_l, f64::NEG_INFINITY, 0.0)),
        InitialProfile::Zero => Ok(vec![0.0; grid.m()]),
        InitialProfile::Custom { u, .. } => {
            if u.len() != grid.m() {
                return Err(Error::GridMismatch(format!(
                    "custom profile has {} cells, grid has {}",
                    u.len(),
                    grid.m()
                )));
            }
            Ok(u.clone())
        }
    }
}

/// CFL-limited step size `nu * h / L_q`.
pub fn max_stable_tau(grid: &Grid1D, l_q: f64, nu: f64) -> Result<f64> {
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(Error::parameter(format!("CFL number nu must be in (0, 1], got {nu}")));
    }
    if !(l_q > 0.0) {
        return Err(Error::DegenerateFlow(
            "L_q = 0: pure advection has no CFL scale; set tau explicitly".to_string(),
        ));
    }
    Ok(nu * grid.h() / l_q)
}

/// Frozen per-window data the step kernels consume: solubility and source at
/// cell centers, Darcy flux at the edges each cell upwinds from.
#[derive(Debug, Clone)]
pub struct StepContext {
    pub chi_star: Vec<f64>,
    /// `q` at the left edge of cell `j` (the cell's outflux velocity).
    pub q_edges: Vec<f64>,
    /// `q` at the inflow ghost edge (clamped to the domain).
    pub q_ghost: f64,
    pub src: Vec<f64>,
    pub t: f64,
}

impl StepContext {
    pub fn build(
        grid: &Grid1D,
        field: &SolubilityField,
        flow: &FlowField,
        t: f64,
    ) -> Result<Self> {
        let m = grid.m();
        let mut chi_star = Vec::with_capacity(m);
        let mut q_edges = Vec::with_capacity(m);
        let mut src = Vec::with_capacity(m);
        for j in 0..m {
            let xc = grid.center(j);
            chi_star.push(field.eval(xc, t)?);
            q_edges.push(flow.q.eval(grid.left_edge(j), t)?);
            src.push(flow.source.eval(xc, t));
        }
        let q_ghost = flow.q.eval(grid.x_min(), t)?;
        Ok(StepContext { chi_star, q_edges, q_ghost, src, t })
    }

    pub fn max_abs_q(&self) -> f64 {
        self.q_edges.iter().fold(self.q_ghost.abs(), |acc, q| acc.max(q.abs()))
    }
}

fn check_cfl(tau: f64, h: f64, ctx: &StepContext) -> Result<()> {
    let limit = h / ctx.max_abs_q();
    if ctx.max_abs_q() > 0.0 && tau > limit * (1.0 + 1e-12) {
        return Err(Error::CflViolation { tau, limit });
    }
    Ok(())
}

/// Mass exchanged with the outside during one step, as contributions to
/// `h * sum(u)`: advective inflow/outflow through the boundary edges,
/// integrated sources, and the measured diffusion-stage delta.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepFluxes {
    pub inflow: f64,
    pub outflow: f64,
    pub source_total: f64,
    pub diffusion_delta: f64,
}

impl StepFluxes {
    /// Net external mass added during the step.
    pub fn net(&self) -> f64 {
        self.inflow - self.outflow + self.source_total + self.diffusion_delta
    }
}

/// Per-cell totals with the equilibrium split maintained alongside.
#[derive(Debug, Clone, PartialEq)]
pub struct EqState {
    pub u: Vec<f64>,
    pub chi: Vec<f64>,
    pub s: Vec<f64>,
}

impl EqState {
    /// Close the given totals against the context's solubility.
    pub fn from_totals(u: Vec<f64>, ctx: &StepContext, r: f64) -> Result<Self> {
        let mut chi = Vec::with_capacity(u.len());
        let mut s = Vec::with_capacity(u.len());
        for (j, &uj) in u.iter().enumerate() {
            let p = equilibrium_closure(uj, ctx.chi_star[j], r)?;
            chi.push(p.chi);
            s.push(p.s);
        }
        Ok(EqState { u, chi, s })
    }

    /// Stored amounts `psi = s * (R - chi)` for reporting.
    pub fn psi(&self, r: f64) -> Vec<f64> {
        self.chi.iter().zip(&self.s).map(|(&c, &s)| s * (r - c)).collect()
    }
}

/// Kinetic per-cell state `(chi, psi)` with derived saturation and the
/// last step's graph selections.
#[derive(Debug, Clone, PartialEq)]
pub struct KinState {
    pub chi: Vec<f64>,
    pub psi: Vec<f64>,
    pub s: Vec<f64>,
    pub w: Vec<f64>,
}

impl KinState {
    /// Split totals by the equilibrium closure; the initial selection is the
    /// minimal-discrepancy one (`chi_star` where hydrate is present).
    pub fn from_totals(u: &[f64], ctx: &StepContext, r: f64) -> Result<Self> {
        let m = u.len();
        let mut chi = Vec::with_capacity(m);
        let mut psi = Vec::with_capacity(m);
        let mut s = Vec::with_capacity(m);
        let mut w = Vec::with_capacity(m);
        for j in 0..m {
            let p = equilibrium_closure(u[j], ctx.chi_star[j], r)?;
            chi.push(p.chi);
            s.push(p.s);
            psi.push(u[j] - p.chi);
            w.push(if p.s > 0.0 { ctx.chi_star[j] } else { p.chi.min(ctx.chi_star[j]) });
        }
        Ok(KinState { chi, psi, s, w })
    }

    pub fn from_parts(chi: Vec<f64>, psi: Vec<f64>, ctx: &StepContext, r: f64) -> Result<Self> {
        if chi.len() != psi.len() {
            return Err(Error::GridMismatch("chi and psi lengths differ".to_string()));
        }
        let s: Vec<f64> = chi.iter().zip(&psi).map(|(&c, &p)| p / (r - c)).collect();
        let w: Vec<f64> = chi
            .iter()
            .zip(&psi)
            .enumerate()
            .map(|(j, (&c, &p))| if p > 0.0 { ctx.chi_star[j] } else { c.min(ctx.chi_star[j]) })
            .collect();
        Ok(KinState { chi, psi, s, w })
    }

    pub fn totals(&self) -> Vec<f64> {
        self.chi.iter().zip(&self.psi).map(|(&c, &p)| c + p).collect()
    }
}

/// Which flux the equilibrium update advects with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FluxKind {
    Sharp,
    /// C2 regularized flux with band half-width `eps`.
    Regularized { eps: f64 },
}

/// Inflow treatment of [`diffusion_solve`]; the outflow end is no-flux.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiffusionInflow {
    Dirichlet(f64),
    NoFlux,
}

/// Solve `(I + (d_m tau / h^2) A) x = values` with the standard three-point
/// Laplacian stencil, no-flux at the outflow end. Unconditionally stable;
/// `d_m = 0` returns the input unchanged.
pub fn diffusion_solve(
    values: &[f64],
    grid: &Grid1D,
    d_m: f64,
    tau: f64,
    inflow: DiffusionInflow,
) -> Result<Vec<f64>> {
    if d_m < 0.0 {
        return Err(Error::parameter(format!("diffusivity must be >= 0, got {d_m}")));
    }
    if values.len() != grid.m() {
        return Err(Error::GridMismatch(format!(
            "diffusion input has {} cells, grid has {}",
            values.len(),
            grid.m()
        )));
    }
    if d_m == 0.0 || tau == 0.0 {
        return Ok(values.to_vec());
    }
    let n = values.len();
    let h = grid.h();
    let d = d_m * tau / (h * h);

    // Thomas algorithm on the constant-coefficient tridiagonal system.
    let mut diag = vec![1.0 + 2.0 * d; n];
    let mut rhs = values.to_vec();
    match inflow {
        DiffusionInflow::Dirichlet(g) => rhs[0] += d * g,
        DiffusionInflow::NoFlux => diag[0] = 1.0 + d,
    }
    diag[n - 1] = 1.0 + d;
    let off = -d;

    let mut c_prime = vec![0.0; n];
    let mut d_prime = vec![0.0; n];
    c_prime[0] = off / diag[0];
    d_prime[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - off * c_prime[i - 1];
        if denom.abs() < 1e-300 {
            return Err(Error::internal("singular diffusion system".to_string()));
        }
        c_prime[i] = off / denom;
        d_prime[i] = (rhs[i] - off * d_prime[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d_prime[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d_prime[i] - c_prime[i] * x[i + 1];
    }
    Ok(x)
}

fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// `h * sum(v)` with compensated summation.
pub fn grid_mass(v: &[f64], h: f64) -> f64 {
    h * kahan_sum(v.iter().copied())
}

const PICARD_TOL: f64 = 1e-10;
const PICARD_MAX_ITERS: usize = 50;

/// One explicit upwind step of the equilibrium model, with implicit
/// diffusion on the dissolved variable and the closure re-applied.
///
/// Returns the new state, the boundary-exchange bookkeeping, and whether the
/// diffusion/closure Picard iteration converged (always true when `d_m = 0`).
pub fn equilibrium_step(
    state: &EqState,
    grid: &Grid1D,
    ctx: &StepContext,
    tau: f64,
    bcs: &BoundaryConditions,
    flux: FluxKind,
    d_m: f64,
    r: f64,
) -> Result<(EqState, StepFluxes, bool)> {
    let m = grid.m();
    let h = grid.h();
    check_cfl(tau, h, ctx)?;

    // Per-cell fluxes F_j = f(x_j; U_j) with q at the cell's left edge.
    let mut f = Vec::with_capacity(m);
    for j in 0..m {
        let fj = match flux {
            FluxKind::Sharp => flux_eval(ctx.q_edges[j], ctx.chi_star[j], state.u[j]),
            FluxKind::Regularized { eps } => {
                flux_reg_eval(ctx.q_edges[j], ctx.chi_star[j], state.u[j], eps)?
            }
        };
        f.push(fj);
    }
    let f_ghost = ctx.q_ghost * bcs.inflow_chi();

    let lam = tau / h;
    let mut u_star = Vec::with_capacity(m);
    for j in 0..m {
        let upstream = if j == 0 { f_ghost } else { f[j - 1] };
        u_star.push(state.u[j] - lam * (f[j] - upstream) + tau * ctx.src[j]);
    }

    let mut fluxes = StepFluxes {
        inflow: tau * f_ghost,
        outflow: tau * f[m - 1],
        source_total: tau * h * kahan_sum(ctx.src.iter().copied()),
        diffusion_delta: 0.0,
    };

    if d_m == 0.0 {
        let new = EqState::from_totals(u_star, ctx, r)?;
        return Ok((new, fluxes, true));
    }

    // Implicit diffusion acts on the dissolved variable only; Picard-iterate
    // the closure split (lag the precipitate) until the dissolved field is
    // stationary.
    let inflow_bc = match bcs.diffusion {
        DiffusionBc::DirichletAtInflow => DiffusionInflow::Dirichlet(bcs.inflow_chi()),
        DiffusionBc::NoFluxAtOutflow => DiffusionInflow::NoFlux,
    };
    let mut precip: Vec<f64> = Vec::with_capacity(m);
    let mut chi_prev: Vec<f64> = Vec::with_capacity(m);
    for j in 0..m {
        let p = equilibrium_closure(u_star[j], ctx.chi_star[j], r)?;
        chi_prev.push(p.chi);
        precip.push(u_star[j] - p.chi);
    }
    let mut u_new = u_star.clone();
    let mut converged = false;
    for _ in 0..PICARD_MAX_ITERS {
        let rhs: Vec<f64> = u_star.iter().zip(&precip).map(|(&u, &p)| u - p).collect();
        let x_diff = diffusion_solve(&rhs, grid, d_m, tau, inflow_bc)?;
        let mut delta = 0.0f64;
        let mut chi_new = Vec::with_capacity(m);
        for j in 0..m {
            u_new[j] = x_diff[j] + precip[j];
            let p = equilibrium_closure(u_new[j], ctx.chi_star[j], r)?;
            chi_new.push(p.chi);
            precip[j] = u_new[j] - p.chi;
            delta = delta.max((chi_new[j] - chi_prev[j]).abs());
        }
        chi_prev = chi_new;
        if delta < PICARD_TOL {
            converged = true;
            break;
        }
    }
    fluxes.diffusion_delta =
        h * (kahan_sum(u_new.iter().copied()) - kahan_sum(u_star.iter().copied()));
    let new = EqState::from_totals(u_new, ctx, r)?;
    Ok((new, fluxes, converged))
}

/// One step of the kinetic transport scheme: explicit upwind advection of
/// the dissolved variable, optional implicit diffusion, then the per-cell
/// implicit exchange solved by the resolvent of `w*`.
pub fn kinetic_step(
    state: &KinState,
    grid: &Grid1D,
    ctx: &StepContext,
    k3: f64,
    tau: f64,
    bcs: &BoundaryConditions,
    d_m: f64,
    r: f64,
) -> Result<(KinState, StepFluxes)> {
    let m = grid.m();
    let h = grid.h();
    check_cfl(tau, h, ctx)?;
    if !(k3 > 0.0) {
        return Err(Error::parameter(format!("kinetic rate k3 must be > 0, got {k3}")));
    }

    let lam = tau / h;
    let chi_ghost = bcs.inflow_chi();

    // F_j = X_j (1 - lam q_{j-1/2}) + lam q_{j-3/2} X_{j-1}, plus sources.
    let mut f = Vec::with_capacity(m);
    for j in 0..m {
        let (q_in, upstream) =
            if j == 0 { (ctx.q_ghost, chi_ghost) } else { (ctx.q_edges[j - 1], state.chi[j - 1]) };
        f.push(state.chi[j] * (1.0 - lam * ctx.q_edges[j]) + lam * q_in * upstream + tau * ctx.src[j]);
    }

    let mut fluxes = StepFluxes {
        inflow: tau * ctx.q_ghost * chi_ghost,
        outflow: tau * ctx.q_edges[m - 1] * state.chi[m - 1],
        source_total: tau * h * kahan_sum(ctx.src.iter().copied()),
        diffusion_delta: 0.0,
    };

    let f_adv = if d_m > 0.0 {
        let inflow_bc = match bcs.diffusion {
            DiffusionBc::DirichletAtInflow => DiffusionInflow::Dirichlet(chi_ghost),
            DiffusionBc::NoFluxAtOutflow => DiffusionInflow::NoFlux,
        };
        let fd = diffusion_solve(&f, grid, d_m, tau, inflow_bc)?;
        fluxes.diffusion_delta =
            h * (kahan_sum(fd.iter().copied()) - kahan_sum(f.iter().copied()));
        fd
    } else {
        f
    };

    let k_bar = tau * k3;
    let k_tilde = k_bar / (1.0 + k_bar);
    let mut chi = Vec::with_capacity(m);
    let mut psi = Vec::with_capacity(m);
    let mut s = Vec::with_capacity(m);
    let mut w = Vec::with_capacity(m);
    for j in 0..m {
        let arg = state.psi[j] + k_tilde * f_adv[j];
        let psi_j = resolvent_wstar(k_tilde, ctx.chi_star[j], arg)?;
        let w_j = (arg - psi_j) / k_tilde;
        let chi_j = (f_adv[j] + k_bar * w_j) / (1.0 + k_bar);
        psi.push(psi_j);
        w.push(w_j);
        s.push(psi_j / (r - chi_j));
        chi.push(chi_j);
    }
    Ok((KinState { chi, psi, s, w }, fluxes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::{FlowSpec, SourceSpec};
    use crate::kinetics::{kin3_step, BatchState, KineticRate};
    use approx::assert_abs_diff_eq;

    fn const_flow(q: f64) -> FlowField {
        FlowField::new(FlowSpec::Constant(q), 0.0, SourceSpec::Zero).unwrap()
    }

    fn const_field(c: f64) -> SolubilityField {
        SolubilityField::Linear { intercept: c, slope: 0.0 }
    }

    #[test]
    fn grid_geometry() {
        let g = Grid1D::new(-1.0, 3.0, 100).unwrap();
        assert_abs_diff_eq!(g.h(), 0.04, epsilon = 1e-15);
        assert_abs_diff_eq!(g.center(0), -0.98, epsilon = 1e-15);
        assert_abs_diff_eq!(g.left_edge(100), 3.0, epsilon = 1e-15);
        assert!(Grid1D::new(0.0, 1.0, 1).is_err());
        assert!(Grid1D::new(1.0, 0.0, 10).is_err());
        let centers = g.centers();
        assert!(centers.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn max_stable_tau_cases() {
        let g = Grid1D::new(-1.0, 3.0, 100).unwrap();
        assert_abs_diff_eq!(max_stable_tau(&g, 1.0, 0.9).unwrap(), 0.036, epsilon = 1e-15);
        let g1 = Grid1D::new(0.0, 2.0, 2).unwrap();
        assert_abs_diff_eq!(max_stable_tau(&g1, 1.0, 1.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            max_stable_tau(&g, 2.0, 0.9).unwrap(),
            0.5 * max_stable_tau(&g, 1.0, 0.9).unwrap(),
            epsilon = 1e-15
        );
        assert!(matches!(max_stable_tau(&g, 0.0, 0.9), Err(Error::DegenerateFlow(_))));
        assert!(max_stable_tau(&g, 1.0, 0.0).is_err());
    }

    #[test]
    fn initial_data_exact_averages() {
        let g = Grid1D::new(-1.0, 3.0, 100).unwrap();
        let u = apply_initial_data(&InitialProfile::StepH { chi_l: 1.0 }, &g).unwrap();
        assert_eq!(u.iter().filter(|&&v| v == 1.0).count(), 25);
        assert_eq!(u.iter().filter(|&&v| v == 0.0).count(), 75);

        let u = apply_initial_data(&InitialProfile::BoxHH { chi_l: 1.0, a: -1.0, b: 0.0 }, &g)
            .unwrap();
        assert_eq!(&u[0..25], vec![1.0; 25].as_slice());
        assert_eq!(u[25], 0.0);

        // A box not aligned with the grid gets exact fractional cells.
        let g = Grid1D::new(0.0, 1.0, 10).unwrap();
        let u = apply_initial_data(&InitialProfile::BoxHH { chi_l: 2.0, a: 0.15, b: 0.35 }, &g)
            .unwrap();
        assert_abs_diff_eq!(u[1], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(u[2], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(u[3], 1.0, epsilon = 1e-14);
        assert_eq!(u[4], 0.0);
        // Total mass is exact.
        assert_abs_diff_eq!(grid_mass(&u, g.h()), 2.0 * 0.2, epsilon = 1e-14);

        assert!(apply_initial_data(&InitialProfile::BoxHH { chi_l: 1.0, a: 0.5, b: 0.5 }, &g)
            .is_err());
        assert_eq!(apply_initial_data(&InitialProfile::Zero, &g).unwrap(), vec![0.0; 10]);
    }

    #[test]
    fn diffusion_identity_and_constants() {
        let g = Grid1D::new(0.0, 1.0, 16).unwrap();
        let v: Vec<f64> = (0..16).map(|i| (i as f64).sin()).collect();
        assert_eq!(diffusion_solve(&v, &g, 0.0, 0.1, DiffusionInflow::NoFlux).unwrap(), v);
        let c = vec![0.7; 16];
        let out = diffusion_solve(&c, &g, 0.3, 0.1, DiffusionInflow::NoFlux).unwrap();
        for &x in &out {
            assert_abs_diff_eq!(x, 0.7, epsilon = 1e-13);
        }
    }

    #[test]
    fn diffusion_matches_dense_solve_and_conserves() {
        let g = Grid1D::new(0.0, 1.0, 17).unwrap();
        let mut v = vec![0.0; 17];
        v[8] = 1.0;
        let d_m = 0.05;
        let tau = 0.02;
        let out = diffusion_solve(&v, &g, d_m, tau, DiffusionInflow::NoFlux).unwrap();

        // Dense Gaussian elimination oracle.
        let n = 17;
        let d = d_m * tau / (g.h() * g.h());
        let mut a = vec![vec![0.0; n + 1]; n];
        for i in 0..n {
            a[i][i] = 1.0 + 2.0 * d;
            if i > 0 {
                a[i][i - 1] = -d;
            }
            if i + 1 < n {
                a[i][i + 1] = -d;
            }
            a[i][n] = v[i];
        }
        a[0][0] = 1.0 + d;
        a[n - 1][n - 1] = 1.0 + d;
        for col in 0..n {
            let piv = a[col][col];
            for row in col + 1..n {
                let f = a[row][col] / piv;
                for k in col..=n {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
        let mut x = vec![0.0; n];
        for row in (0..n).rev() {
            let mut acc = a[row][n];
            for k in row + 1..n {
                acc -= a[row][k] * x[k];
            }
            x[row] = acc / a[row][row];
        }
        for i in 0..n {
            assert_abs_diff_eq!(out[i], x[i], epsilon = 1e-12);
        }
        // Symmetric smoothing, total preserved under no-flux.
        assert_abs_diff_eq!(
            kahan_sum(out.iter().copied()),
            kahan_sum(v.iter().copied()),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(out[7], out[9], epsilon = 1e-13);
        assert!(out[8] < 1.0 && out[8] > out[7]);
    }

    #[test]
    fn equilibrium_step_constant_state_is_steady() {
        let g = Grid1D::new(0.0, 1.0, 20).unwrap();
        let field = const_field(1.0);
        let flow = const_flow(1.0);
        let ctx = StepContext::build(&g, &field, &flow, 0.0).unwrap();
        let u = vec![0.4; 20];
        let state = EqState::from_totals(u, &ctx, 2.0).unwrap();
        // Inflow holds the same concentration, so fluxes telescope.
        let bcs = BoundaryConditions::inflow_dirichlet(0.4);
        let (next, fluxes, _) =
            equilibrium_step(&state, &g, &ctx, 0.02, &bcs, FluxKind::Sharp, 0.0, 2.0).unwrap();
        for j in 0..20 {
            assert_abs_diff_eq!(next.u[j], 0.4, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(fluxes.inflow, fluxes.outflow, epsilon = 1e-15);
    }

    #[test]
    fn equilibrium_step_moves_one_cfl_fraction() {
        let g = Grid1D::new(0.0, 5.0, 5).unwrap();
        let field = const_field(10.0); // never saturates
        let flow = const_flow(1.0);
        let ctx = StepContext::build(&g, &field, &flow, 0.0).unwrap();
        let state = EqState::from_totals(vec![0.0, 1.0, 0.0, 0.0, 0.0], &ctx, 20.0).unwrap();
        let tau = 0.4;
        let bcs = BoundaryConditions::compact_support();
        let (next, _, _) =
            equilibrium_step(&state, &g, &ctx, tau, &bcs, FluxKind::Sharp, 0.0, 20.0).unwrap();
        // lam = tau/h = 0.4: donor cell keeps 0.6, downstream gains 0.4.
        assert_abs_diff_eq!(next.u[1], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(next.u[2], 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(
            grid_mass(&next.u, g.h()),
            grid_mass(&state.u, g.h()),
            epsilon = 1e-14
        );
    }

    #[test]
    fn equilibrium_step_refuses_cfl_violation() {
        let g = Grid1D::new(0.0, 1.0, 10).unwrap();
        let ctx = StepContext::build(&g, &const_field(1.0), &const_flow(1.0), 0.0).unwrap();
        let state = EqState::from_totals(vec![0.1; 10], &ctx, 2.0).unwrap();
        let bcs = BoundaryConditions::compact_support();
        let err = equilibrium_step(&state, &g, &ctx, 0.2, &bcs, FluxKind::Sharp, 0.0, 2.0);
        assert!(matches!(err, Err(Error::CflViolation { .. })));
    }

    #[test]
    fn equilibrium_positivity_is_preserved() {
        let g = Grid1D::new(0.0, 2.0, 50).unwrap();
        let field = SolubilityField::Exponential { a: 1.0, b: 0.5 };
        let flow = const_flow(1.0);
        let ctx = StepContext::build(&g, &field, &flow, 0.0).unwrap();
        let u0 = apply_initial_data(&InitialProfile::BoxHH { chi_l: 0.9, a: 0.1, b: 0.7 }, &g)
            .unwrap();
        let mut state = EqState::from_totals(u0, &ctx, 2.0).unwrap();
        let tau = max_stable_tau(&g, 1.0, 0.9).unwrap();
        let bcs = BoundaryConditions::compact_support();
        for _ in 0..30 {
            let (next, _, _) =
                equilibrium_step(&state, &g, &ctx, tau, &bcs, FluxKind::Sharp, 0.0, 2.0).unwrap();
            state = next;
            assert!(state.u.iter().all(|&u| u >= 0.0));
        }
    }

    #[test]
    fn kinetic_step_with_zero_flow_is_batch_kin3() {
        let g = Grid1D::new(0.0, 1.0, 8).unwrap();
        let field = const_field(1.0);
        let flow = const_flow(0.0);
        let ctx = StepContext::build(&g, &field, &flow, 0.0).unwrap();
        let r = 2.0;
        let tau = 0.5;
        let k3 = 2.0;
        // Mixed per-cell states, all in D0.
        let chi: Vec<f64> = (0..8).map(|j| 0.1 + 0.15 * j as f64).collect();
        let s = vec![0.0, 0.1, 0.2, 0.0, 0.4, 0.05, 0.3, 0.0];
        let psi: Vec<f64> =
            chi.iter().zip(&s).map(|(&c, &sv)| sv * (r - c)).collect();
        let state = KinState::from_parts(chi.clone(), psi, &ctx, r).unwrap();
        let bcs = BoundaryConditions::compact_support();
        let (next, fluxes) = kinetic_step(&state, &g, &ctx, k3, tau, &bcs, 0.0, r).unwrap();
        let rate = KineticRate::new(k3, tau).unwrap();
        for j in 0..8 {
            let (b, w) = kin3_step(BatchState::new(chi[j], s[j]), 1.0, r, rate).unwrap();
            assert_abs_diff_eq!(next.chi[j], b.chi, epsilon = 1e-14);
            assert_abs_diff_eq!(next.s[j], b.s, epsilon = 1e-14);
            assert_abs_diff_eq!(next.w[j], w, epsilon = 1e-13);
        }
        assert_eq!(fluxes.net(), 0.0);
    }

    #[test]
    fn kinetic_step_psi_stays_nonnegative_and_mass_balances() {
        let g = Grid1D::new(0.0, 2.0, 40).unwrap();
        let field = SolubilityField::Exponential { a: 1.0, b: 0.5 };
        let flow = const_flow(1.0);
        let ctx = StepContext::build(&g, &field, &flow, 0.0).unwrap();
        let r = 2.0;
        let bcs = BoundaryConditions::inflow_dirichlet(0.8395);
        let u0 = vec![0.0; 40];
        let mut state = KinState::from_totals(&u0, &ctx, r).unwrap();
        let tau = max_stable_tau(&g, 1.0, 0.9).unwrap();
        let mut mass = grid_mass(&state.totals(), g.h());
        for _ in 0..50 {
            let (next, fluxes) = kinetic_step(&state, &g, &ctx, 100.0, tau, &bcs, 0.0, r).unwrap();
            assert!(next.psi.iter().all(|&p| p >= 0.0));
            let new_mass = grid_mass(&next.totals(), g.h());
            assert_abs_diff_eq!(new_mass, mass + fluxes.net(), epsilon = 1e-13);
            mass = new_mass;
            state = next;
        }
        // The front has entered: some hydrate must have formed where
        // chi_star < chi_L.
        assert!(state.psi.iter().any(|&p| p > 1e-6));
    }

    #[test]
    fn kinetic_large_rate_tracks_equilibrium() {
        // One step from closure-consistent data with k3 huge matches the
        // equilibrium update to O(1/k_bar).
        let g = Grid1D::new(0.0, 2.0, 100).unwrap();
        let field = SolubilityField::Exponential { a: 1.0, b: 0.5 };
        let flow = const_flow(1.0);
        let ctx = StepContext::build(&g, &field, &flow, 0.0).unwrap();
        let r = 2.0;
        let bcs = BoundaryConditions::inflow_dirichlet(0.8395);
        let tau = max_stable_tau(&g, 1.0, 0.9).unwrap();

        // Build a saturated-profile state by running the EQ scheme a while.
        let u0 = apply_initial_data(&InitialProfile::Zero, &g).unwrap();
        let mut eq = EqState::from_totals(u0, &ctx, r).unwrap();
        for _ in 0..30 {
            eq = equilibrium_step(&eq, &g, &ctx, tau, &bcs, FluxKind::Sharp, 0.0, r).unwrap().0;
        }
        let kin = KinState::from_totals(&eq.u, &ctx, r).unwrap();
        let (eq_next, _, _) =
            equilibrium_step(&eq, &g, &ctx, tau, &bcs, FluxKind::Sharp, 0.0, r).unwrap();
        let (kin_next, _) = kinetic_step(&kin, &g, &ctx, 1e6, tau, &bcs, 0.0, r).unwrap();
        let h = g.h();
        let err: f64 = eq_next
            .u
            .iter()
            .zip(&kin_next.totals())
            .map(|(&a, &b)| (a - b).abs())
            .sum::<f64>()
            * h;
        assert!(err < 1e-4, "L1 gap {err} too large");
    }
}
