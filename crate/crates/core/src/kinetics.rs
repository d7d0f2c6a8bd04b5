//! One-step fully implicit solvers for the three batch kinetic models.
//!
//! All three relax an isolated `(chi, s)` state toward the equilibrium graph
//! along the mass-conservation curve `u(chi, s) = const`:
//!
//! * `KIN1` drives `d/dt((1-s)chi) = -Q`, `R ds/dt = Q` with
//!   `Q = k1*(chi - chi_star)`; the implicit step reduces to a quadratic
//!   whose smaller root is the physical one.
//! * `KIN2` works in the `(chi, psi)` variables, making the step linear.
//! * `KIN3` replaces `chi_star` in the driving force with a selection
//!   `w ∈ w*(psi)`, which keeps the step well-posed in both the saturated
//!   and unsaturated regimes; the implicit step is solved by the closed-form
//!   resolvent of `w*`.
//!
//! With `k_bar = tau*k` and `k_tilde = k_bar/(1 + k_bar)`, every step is
//! explicit. The schemes conserve `u` exactly and contract the exchange
//! discrepancy `|Q|` step over step.

use crate::error::{Error, Result};
use crate::graph::resolvent_wstar;
use crate::phase::{psi_from, PhasePoint};

/// A kinetic exchange rate together with the implicit step size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KineticRate {
    k: f64,
    tau: f64,
}

impl KineticRate {
    pub fn new(k: f64, tau: f64) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::parameter(format!("kinetic rate must satisfy k > 0, got {k}")));
        }
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::parameter(format!("kinetic step must satisfy tau > 0, got {tau}")));
        }
        Ok(KineticRate { k, tau })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `k_bar = tau * k`.
    pub fn k_bar(&self) -> f64 {
        self.tau * self.k
    }

    /// `k_tilde = k_bar / (1 + k_bar)`, always in (0, 1).
    pub fn k_tilde(&self) -> f64 {
        let kb = self.k_bar();
        kb / (1.0 + kb)
    }
}

/// A batch reactor state `(chi, s)`.
pub type BatchState = PhasePoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KineticModel {
    Kin1,
    Kin2,
    Kin3,
}

impl std::fmt::Display for KineticModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KineticModel::Kin1 => write!(f, "KIN1"),
            KineticModel::Kin2 => write!(f, "KIN2"),
            KineticModel::Kin3 => write!(f, "KIN3"),
        }
    }
}

/// One recorded point of a batch trajectory. `w` is the graph selection
/// (KIN3 only) and `q` the exchange value of the step that produced this
/// state; both are absent at the initial point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub state: BatchState,
    pub w: Option<f64>,
    pub q: Option<f64>,
}

fn require_d0(prev: &BatchState, r: f64, op: &str) -> Result<()> {
    if !prev.in_d0(r) {
        return Err(Error::precondition(format!(
            "{op} requires the previous state in D0 = [0,R)x[0,1); got (chi, s) = ({}, {}) with R = {r}",
            prev.chi, prev.s
        )));
    }
    Ok(())
}

fn require_knee(chi_star: f64, r: f64, op: &str) -> Result<()> {
    if !(r > chi_star) {
        return Err(Error::parameter(format!("{op} requires R > chi_star (R = {r}, chi_star = {chi_star})")));
    }
    Ok(())
}

/// One implicit KIN1 step.
///
/// Solves the quadratic `p(X) = (k_bar/R)(R-X)(chi_star-X) + s_bar*X
/// + (1-s_bar)*chi_bar - X = 0` for its unique root in `[0, R)`, then
/// `S = k_bar*(X - chi_star)/R + s_bar`.
pub fn kin1_step(prev: BatchState, chi_star: f64, r: f64, rate: KineticRate) -> Result<BatchState> {
    require_d0(&prev, r, "kin1_step")?;
    require_knee(chi_star, r, "kin1_step")?;
    let kb = rate.k_bar();
    let (x_bar, s_bar) = (prev.chi, prev.s);

    // p(X) = a*X^2 + b*X + c with a > 0 and b < 0; the smaller root is
    // c/q with q = (-b + sqrt(b^2 - 4ac))/2, which stays well conditioned
    // as k_bar -> 0 where the textbook quadratic formula cancels.
    let a = kb / r;
    let b = -(a * (r + chi_star) + 1.0 - s_bar);
    let c = kb * chi_star + (1.0 - s_bar) * x_bar;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Err(Error::internal(format!("kin1_step discriminant {disc} < 0")));
    }
    let q = 0.5 * (-b + disc.sqrt());
    let x = c / q;
    let s = kb * (x - chi_star) / r + s_bar;
    Ok(BatchState::new(x, s))
}

/// One implicit KIN2 step (linear in `(chi, psi)`).
pub fn kin2_step(prev: BatchState, chi_star: f64, r: f64, rate: KineticRate) -> Result<BatchState> {
    require_d0(&prev, r, "kin2_step")?;
    require_knee(chi_star, r, "kin2_step")?;
    let kt = rate.k_tilde();
    let psi_bar = psi_from(prev.chi, prev.s, r)?;
    let x = kt * chi_star + (1.0 - kt) * prev.chi;
    let psi = psi_bar + kt * (prev.chi - chi_star);
    let s = psi / (r - x);
    Ok(BatchState::new(x, s))
}

/// One implicit KIN3 step; also returns the selection `w ∈ w*(psi)` the
/// step equation determines uniquely.
///
/// The resolvent of `w*` reduces to a branch on the sign of
/// `psi_bar + k_tilde*(chi_bar - chi_star)`: the saturated branch matches
/// the KIN2 formulas term for term, the unsaturated one empties the
/// hydrate store.
pub fn kin3_step(
    prev: BatchState,
    chi_star: f64,
    r: f64,
    rate: KineticRate,
) -> Result<(BatchState, f64)> {
    require_d0(&prev, r, "kin3_step")?;
    require_knee(chi_star, r, "kin3_step")?;
    let kt = rate.k_tilde();
    let psi_bar = psi_from(prev.chi, prev.s, r)?;
    let arg = psi_bar + kt * (prev.chi - chi_star);
    let (psi, w, x) = if arg >= 0.0 {
        (arg, chi_star, kt * chi_star + (1.0 - kt) * prev.chi)
    } else {
        (0.0, prev.chi + psi_bar / kt, prev.chi + psi_bar)
    };
    let s = psi / (r - x);
    Ok((BatchState::new(x, s), w))
}

/// Exchange value `Q = k*(X - w)`; `w` is `chi_star` for KIN1/KIN2 and the
/// graph selection for KIN3. Zero exactly at graph-consistent points.
pub fn q_discrepancy(x: f64, w_or_chi_star: f64, k: f64) -> f64 {
    k * (x - w_or_chi_star)
}

/// The KIN1 rate that reproduces one KIN2 step from `prev` exactly:
/// `k1_bar = R*k2_bar*(1 - s_bar) / ((R - chi_bar) + k2_tilde*(chi_bar - chi_star))`.
///
/// Returns `k1 = k1_bar / tau` with the step size taken from `k2`.
pub fn equivalent_rate_k1(
    k2: KineticRate,
    prev: BatchState,
    chi_star: f64,
    r: f64,
) -> Result<f64> {
    require_d0(&prev, r, "equivalent_rate_k1")?;
    require_knee(chi_star, r, "equivalent_rate_k1")?;
    let kb2 = k2.k_bar();
    let kt2 = k2.k_tilde();
    let denom = (r - prev.chi) + kt2 * (prev.chi - chi_star);
    let kb1 = r * kb2 * (1.0 - prev.s) / denom;
    Ok(kb1 / k2.tau())
}

/// Iterate one of the batch schemes; returns `n_steps + 1` points starting
/// with `init`.
pub fn batch_trajectory(
    model: KineticModel,
    init: BatchState,
    chi_star: f64,
    r: f64,
    rate: KineticRate,
    n_steps: usize,
) -> Result<Vec<TrajectoryPoint>> {
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(TrajectoryPoint { state: init, w: None, q: None });
    let mut state = init;
    for _ in 0..n_steps {
        let (next, w, q) = match model {
            KineticModel::Kin1 => {
                let next = kin1_step(state, chi_star, r, rate)?;
                (next, None, q_discrepancy(next.chi, chi_star, rate.k()))
            }
            KineticModel::Kin2 => {
                let next = kin2_step(state, chi_star, r, rate)?;
                (next, None, q_discrepancy(next.chi, chi_star, rate.k()))
            }
            KineticModel::Kin3 => {
                let (next, w) = kin3_step(state, chi_star, r, rate)?;
                (next, Some(w), q_discrepancy(next.chi, w, rate.k()))
            }
        };
        out.push(TrajectoryPoint { state: next, w, q: Some(q) });
        state = next;
    }
    Ok(out)
}

/// Solve the local 2x2 kinetic system with right-hand side `(f, g)`:
/// `X - k_bar*(W - X) = f`, `Psi + k_bar*(W - X) = g`, `W ∈ w*(Psi)`.
///
/// This is the per-cell problem of the kinetic transport scheme; exposed so
/// the comparison principle can be exercised directly.
pub fn kin3_local_solve(
    f: f64,
    g: f64,
    chi_star: f64,
    k_bar: f64,
) -> Result<(f64, f64, f64)> {
    if !(k_bar > 0.0) || !k_bar.is_finite() {
        return Err(Error::parameter(format!("kin3_local_solve requires k_bar > 0, got {k_bar}")));
    }
    let kt = k_bar / (1.0 + k_bar);
    let psi = resolvent_wstar(kt, chi_star, g + kt * f)?;
    let w = (g + kt * f - psi) / kt;
    let x = (f + k_bar * w) / (1.0 + k_bar);
    Ok((x, psi, w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::total_u;
    use approx::assert_abs_diff_eq;

    fn rate(k: f64, tau: f64) -> KineticRate {
        KineticRate::new(k, tau).unwrap()
    }

    /// Bracketed bisection oracle for the KIN1 quadratic on [0, R).
    fn kin1_root_bisect(prev: BatchState, chi_star: f64, r: f64, kb: f64) -> f64 {
        let p = |x: f64| {
            (kb / r) * (r - x) * (chi_star - x) + prev.s * x + (1.0 - prev.s) * prev.chi - x
        };
        let (mut lo, mut hi) = (0.0, r);
        assert!(p(lo) > 0.0 && p(hi) < 0.0, "root not bracketed");
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if p(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn rate_derived_quantities() {
        let r = rate(3.0, 0.5);
        assert_abs_diff_eq!(r.k_bar(), 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r.k_tilde(), 0.6, epsilon = 1e-15);
        assert!(r.k_tilde() > 0.0 && r.k_tilde() < 1.0);
        assert!(KineticRate::new(0.0, 1.0).is_err());
        assert!(KineticRate::new(1.0, -1.0).is_err());
    }

    #[test]
    fn kin1_two_steps_unsaturated() {
        let r1 = rate(1.0, 1.0);
        let s1 = kin1_step(BatchState::new(0.25, 0.2), 1.0, 2.0, r1).unwrap();
        assert_abs_diff_eq!(s1.chi, 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(s1.s, 0.0, epsilon = 1e-12);
        let s2 = kin1_step(s1, 1.0, 2.0, r1).unwrap();
        assert_abs_diff_eq!(s2.chi, 0.7536, epsilon = 5e-4);
        assert_abs_diff_eq!(s2.s, -0.1232, epsilon = 5e-4);
        // Against the independent bisection oracle.
        assert_abs_diff_eq!(s2.chi, kin1_root_bisect(s1, 1.0, 2.0, 1.0), epsilon = 1e-12);
    }

    #[test]
    fn kin1_fixed_point_at_knee() {
        let prev = BatchState::new(1.0, 0.37);
        let next = kin1_step(prev, 1.0, 2.0, rate(5.0, 0.25)).unwrap();
        assert_abs_diff_eq!(next.chi, prev.chi, epsilon = 1e-14);
        assert_abs_diff_eq!(next.s, prev.s, epsilon = 1e-14);
    }

    #[test]
    fn kin1_saturated_step_matches_oracle() {
        let prev = BatchState::new(0.2, 0.8);
        let next = kin1_step(prev, 1.0, 2.0, rate(1.0, 1.0)).unwrap();
        let x_oracle = kin1_root_bisect(prev, 1.0, 2.0, 1.0);
        assert_abs_diff_eq!(next.chi, x_oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(next.chi, 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(next.s, 0.7, epsilon = 1e-12);
        // Ordering toward the knee, saturation stays physical.
        assert!(next.chi > 0.2 && next.chi < 1.0);
        assert!(next.s >= 0.0);
        assert_abs_diff_eq!(
            total_u(next.chi, next.s, 2.0),
            total_u(0.2, 0.8, 2.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn kin1_small_rate_is_stable() {
        // The naive quadratic formula cancels catastrophically here.
        let prev = BatchState::new(0.3, 0.1);
        let next = kin1_step(prev, 1.0, 2.0, rate(1e-12, 1.0)).unwrap();
        assert_abs_diff_eq!(next.chi, 0.3, epsilon = 1e-9);
        let oracle = kin1_root_bisect(prev, 1.0, 2.0, 1e-12);
        assert_abs_diff_eq!(next.chi, oracle, epsilon = 1e-12);
    }

    #[test]
    fn kin1_rejects_states_outside_d0() {
        assert!(kin1_step(BatchState::new(-0.1, 0.2), 1.0, 2.0, rate(1.0, 1.0)).is_err());
        assert!(kin1_step(BatchState::new(0.1, 1.0), 1.0, 2.0, rate(1.0, 1.0)).is_err());
        assert!(kin1_step(BatchState::new(2.0, 0.2), 1.0, 2.0, rate(1.0, 1.0)).is_err());
    }

    #[test]
    fn kin2_unsaturated_goes_unphysical() {
        let next = kin2_step(BatchState::new(0.25, 0.2), 1.0, 2.0, rate(1.0, 1.0)).unwrap();
        assert_abs_diff_eq!(next.chi, 0.625, epsilon = 1e-12);
        assert_abs_diff_eq!(next.s, -0.025 / 1.375, epsilon = 1e-12);
    }

    #[test]
    fn kin2_saturated_step() {
        let next = kin2_step(BatchState::new(0.2, 0.8), 1.0, 2.0, rate(1.0, 1.0)).unwrap();
        assert_abs_diff_eq!(next.chi, 0.6, epsilon = 1e-15);
        let psi = psi_from(next.chi, next.s, 2.0).unwrap();
        assert_abs_diff_eq!(psi, 1.04, epsilon = 1e-14);
        assert_abs_diff_eq!(next.s, 1.04 / 1.4, epsilon = 1e-14);
    }

    #[test]
    fn kin2_explicit_saturation_formula_agrees() {
        // The direct S formula in terms of the previous state.
        for &(xb, sb, kb) in &[(0.2, 0.8, 1.0), (0.25, 0.2, 1.0), (0.7, 0.4, 0.3), (1.4, 0.4, 2.0)]
        {
            let (chi_star, r) = (1.0, 2.0);
            let next = kin2_step(BatchState::new(xb, sb), chi_star, r, rate(kb, 1.0)).unwrap();
            let s_formula = (kb * (xb - chi_star) + (1.0 + kb) * (r - xb) * sb)
                / ((r - xb) + kb * (r - chi_star));
            assert_abs_diff_eq!(next.s, s_formula, epsilon = 1e-13);
        }
    }

    #[test]
    fn kin2_fixed_point_at_knee() {
        let prev = BatchState::new(1.0, 0.42);
        let next = kin2_step(prev, 1.0, 2.0, rate(2.0, 0.7)).unwrap();
        assert_abs_diff_eq!(next.chi, prev.chi, epsilon = 1e-15);
        assert_abs_diff_eq!(next.s, prev.s, epsilon = 1e-14);
    }

    #[test]
    fn kin3_unsaturated_hits_equilibrium_in_one_step() {
        let (next, w) = kin3_step(BatchState::new(0.25, 0.2), 1.0, 2.0, rate(1.0, 1.0)).unwrap();
        assert_abs_diff_eq!(next.chi, 0.6, epsilon = 1e-15);
        assert_eq!(next.s, 0.0);
        // Selection lies on the lower branch of w*.
        assert_abs_diff_eq!(w, 0.25 + 0.35 / 0.5, epsilon = 1e-14);
        assert!(w <= 1.0);
    }

    #[test]
    fn kin3_matches_kin2_in_saturated_region() {
        let prev = BatchState::new(0.2, 0.8);
        let (next3, w) = kin3_step(prev, 1.0, 2.0, rate(1.0, 1.0)).unwrap();
        let next2 = kin2_step(prev, 1.0, 2.0, rate(1.0, 1.0)).unwrap();
        assert_eq!(next3, next2);
        assert_eq!(w, 1.0);
    }

    #[test]
    fn kin3_fixed_point_at_knee() {
        let prev = BatchState::new(1.0, 0.3);
        let (next, w) = kin3_step(prev, 1.0, 2.0, rate(1.0, 1.0)).unwrap();
        assert_abs_diff_eq!(next.chi, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(next.s, 0.3, epsilon = 1e-14);
        assert_eq!(w, 1.0);
    }

    #[test]
    fn q_discrepancy_cases() {
        assert_eq!(q_discrepancy(1.0, 1.0, 7.3), 0.0);
        assert_abs_diff_eq!(q_discrepancy(0.625, 1.0, 1.0), -0.375, epsilon = 1e-15);
        assert_abs_diff_eq!(q_discrepancy(1.4, 1.0, 10.0), 4.0, epsilon = 1e-15);
    }

    #[test]
    fn equivalent_rate_reproduces_kin2() {
        let prev = BatchState::new(0.2, 0.8);
        let k2 = rate(1.0, 1.0);
        let k1 = equivalent_rate_k1(k2, prev, 1.0, 2.0).unwrap();
        let s1 = kin1_step(prev, 1.0, 2.0, rate(k1, 1.0)).unwrap();
        let s2 = kin2_step(prev, 1.0, 2.0, k2).unwrap();
        assert_abs_diff_eq!(s1.chi, s2.chi, epsilon = 1e-12);
        assert_abs_diff_eq!(s1.s, s2.s, epsilon = 1e-12);
        assert_abs_diff_eq!(s1.chi, 0.6, epsilon = 1e-12);
    }

    #[test]
    fn equivalent_rate_vanishes_at_full_saturation() {
        let k2 = rate(1.0, 1.0);
        let k1 = equivalent_rate_k1(k2, BatchState::new(0.2, 1.0 - 1e-12), 1.0, 2.0).unwrap();
        assert!(k1.abs() < 1e-11);
    }

    #[test]
    fn trajectory_basics() {
        let init = BatchState::new(0.25, 0.2);
        let traj =
            batch_trajectory(KineticModel::Kin3, init, 1.0, 2.0, rate(1.0, 1.0), 0).unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!(traj[0].state, init);

        let traj =
            batch_trajectory(KineticModel::Kin3, init, 1.0, 2.0, rate(1.0, 1.0), 20).unwrap();
        assert_eq!(traj.len(), 21);
        // Converges to (0.6, 0) and stays, never leaving D0.
        for p in &traj[1..] {
            assert!(p.state.in_d0(2.0), "KIN3 left D0 at {:?}", p.state);
        }
        let last = traj.last().unwrap();
        assert_abs_diff_eq!(last.state.chi, 0.6, epsilon = 1e-15);
        assert_eq!(last.state.s, 0.0);
        // Once on the graph the exchange vanishes exactly and the state is a
        // fixed point.
        assert_eq!(last.q, Some(0.0));
        assert_eq!(traj[traj.len() - 2].state, last.state);
    }

    #[test]
    fn trajectories_conserve_mass_and_converge_saturated() {
        let u0 = 1.64;
        for model in [KineticModel::Kin1, KineticModel::Kin2, KineticModel::Kin3] {
            for init in [BatchState::new(0.2, 0.8), BatchState::new(1.4, 0.4)] {
                let traj = batch_trajectory(model, init, 1.0, 2.0, rate(1.0, 1.0), 60).unwrap();
                for p in &traj {
                    assert_abs_diff_eq!(total_u(p.state.chi, p.state.s, 2.0), u0, epsilon = 1e-12);
                }
                let last = traj.last().unwrap().state;
                assert_abs_diff_eq!(last.chi, 1.0, epsilon = 1e-8);
                assert_abs_diff_eq!(last.s, 0.64, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn kin3_local_solver_matches_batch_step() {
        // With f = chi_bar (zero flow) and g = psi_bar the local transport
        // system reduces to the batch step.
        let prev = BatchState::new(0.3, 0.45);
        let (chi_star, r) = (0.9, 2.0);
        let rt = rate(2.5, 0.4);
        let psi_bar = psi_from(prev.chi, prev.s, r).unwrap();
        let (x, psi, w) = kin3_local_solve(prev.chi, psi_bar, chi_star, rt.k_bar()).unwrap();
        let (next, w_batch) = kin3_step(prev, chi_star, r, rt).unwrap();
        assert_abs_diff_eq!(x, next.chi, epsilon = 1e-14);
        assert_abs_diff_eq!(psi, psi_from(next.chi, next.s, r).unwrap(), epsilon = 1e-14);
        assert_abs_diff_eq!(w, w_batch, epsilon = 1e-14);
    }
}
