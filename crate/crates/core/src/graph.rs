//! Maximal monotone corner graphs and their resolvents.
//!
//! The phase constraint lives on two-ray graphs in the plane. `E*` pairs
//! dissolved concentration with hydrate saturation: a flat ray at output 0
//! for inputs up to the solubility knee `chi_star`, then a vertical ray at
//! the knee. Its rescaled inverse `w*` maps stored amounts to concentration
//! selections: a vertical ray at input 0, then a plateau at `chi_star`.
//! Both are maximal monotone, so `a + lambda*G(a) ∋ f` has exactly one
//! solution `a = R_lambda(f)` with `R_lambda = (I + lambda*G)^{-1}`
//! contractive, and the Yosida regularization `G_lambda = (I - R_lambda)/lambda`
//! is a monotone single-valued stand-in with Lipschitz constant `1/lambda`.
//!
//! For this family the resolvents are closed-form, which is what makes the
//! implicit phase-exchange steps in the kinetic schemes explicit.

use crate::error::{Error, Result};

/// Absolute tolerance for membership tests at the knee. All model data are
/// O(1) or smaller, so an absolute test suffices.
pub const KNEE_TOL: f64 = 1e-12;

/// Which way the two rays of a [`CornerGraph`] are laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphOrientation {
    /// Flat ray at output 0 below the knee, vertical ray at input `chi_star`.
    EStarLike,
    /// Vertical ray at input 0, then a plateau at output `chi_star`.
    WStarLike,
}

/// A two-ray maximal monotone graph parameterized by the solubility knee.
///
/// Covers every graph the phase model needs (`E*`, `w*`, and rescalings);
/// the sign and Heaviside graphs are the degenerate `chi_star = ±1` cases
/// and are not exposed separately.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerGraph {
    chi_star: f64,
    orientation: GraphOrientation,
}

impl CornerGraph {
    pub fn new(chi_star: f64, orientation: GraphOrientation) -> Result<Self> {
        if !chi_star.is_finite() {
            return Err(Error::NonFinite("CornerGraph::new"));
        }
        Ok(CornerGraph { chi_star, orientation })
    }

    /// The graph `E*`: saturation as a set-valued function of concentration.
    pub fn e_star(chi_star: f64) -> Result<Self> {
        Self::new(chi_star, GraphOrientation::EStarLike)
    }

    /// The graph `w*`: concentration selections as a function of stored amount.
    pub fn w_star(chi_star: f64) -> Result<Self> {
        Self::new(chi_star, GraphOrientation::WStarLike)
    }

    pub fn chi_star(&self) -> f64 {
        self.chi_star
    }

    pub fn orientation(&self) -> GraphOrientation {
        self.orientation
    }

    /// The set of outputs the graph assigns to `input`, as a closed interval
    /// `(lo, hi)` (rays use infinities). `None` if `input` is outside the
    /// domain of the graph.
    pub fn output_interval(&self, input: f64) -> Option<(f64, f64)> {
        match self.orientation {
            GraphOrientation::EStarLike => {
                if input < self.chi_star - KNEE_TOL {
                    Some((0.0, 0.0))
                } else if input <= self.chi_star + KNEE_TOL {
                    Some((0.0, f64::INFINITY))
                } else {
                    None
                }
            }
            GraphOrientation::WStarLike => {
                if input < -KNEE_TOL {
                    None
                } else if input <= KNEE_TOL {
                    Some((f64::NEG_INFINITY, self.chi_star))
                } else {
                    Some((self.chi_star, self.chi_star))
                }
            }
        }
    }

    /// Membership test `(input, output) ∈ G` with [`KNEE_TOL`] slack.
    pub fn contains(&self, input: f64, output: f64) -> bool {
        match self.output_interval(input) {
            Some((lo, hi)) => output >= lo - KNEE_TOL && output <= hi + KNEE_TOL,
            None => false,
        }
    }

    /// The resolvent `(I + lambda*G)^{-1}` applied to `f_in`.
    pub fn resolvent(&self, lambda: f64, f_in: f64) -> Result<f64> {
        if !lambda.is_finite() || !f_in.is_finite() {
            return Err(Error::NonFinite("CornerGraph::resolvent"));
        }
        if lambda <= 0.0 {
            return Err(Error::parameter(format!("resolvent requires lambda > 0, got {lambda}")));
        }
        Ok(match self.orientation {
            // a + lambda*E*(a) ∋ f: identity below the knee, clamp at it.
            GraphOrientation::EStarLike => f_in.min(self.chi_star),
            // psi + lambda*w*(psi) ∋ f: positive part past the plateau load.
            GraphOrientation::WStarLike => (f_in - lambda * self.chi_star).max(0.0),
        })
    }

    /// Yosida approximation `G_lambda = (I - R_lambda)/lambda` at `input`.
    pub fn yosida(&self, lambda: f64, input: f64) -> Result<f64> {
        let r = self.resolvent(lambda, input)?;
        Ok((input - r) / lambda)
    }
}

/// Resolvent of `w*`: the unique `psi >= 0` with `psi + lambda*w*(psi) ∋ w_in`.
///
/// Closed form `(w_in - lambda*chi_star)_+`; contractive in `w_in`.
pub fn resolvent_wstar(lambda: f64, chi_star: f64, w_in: f64) -> Result<f64> {
    if !w_in.is_finite() || !chi_star.is_finite() {
        return Err(Error::NonFinite("resolvent_wstar"));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::parameter(format!("resolvent_wstar requires lambda > 0, got {lambda}")));
    }
    Ok((w_in - lambda * chi_star).max(0.0))
}

/// Yosida approximation of `w*` at `psi`; monotone nondecreasing and
/// Lipschitz with constant `1/lambda`, saturating at `chi_star`.
pub fn yosida_wstar(lambda: f64, chi_star: f64, psi: f64) -> Result<f64> {
    let r = resolvent_wstar(lambda, chi_star, psi)?;
    Ok((psi - r) / lambda)
}

/// L1 distance from the point `(chi, s)` to the graph `E*`.
///
/// Zero exactly on the complementarity set: `chi <= chi_star` with `s = 0`,
/// or `chi = chi_star` with `s >= 0`.
pub fn graph_distance_estar(chi: f64, s: f64, chi_star: f64) -> f64 {
    // Distance to the flat ray (-inf, chi_star] x {0}.
    let d_minus = (chi - chi_star).max(0.0) + s.abs();
    // Distance to the vertical ray {chi_star} x [0, inf).
    let d_plus = (chi - chi_star).abs() + (-s).max(0.0);
    d_minus.min(d_plus)
}

/// One fully implicit step for `da/dt + G(a) ∋ f`.
///
/// Returns the step solution `a_n = R_tau(a_prev + tau*f_n)` together with
/// the selection `G(a_n) = f_n - (a_n - a_prev)/tau`, which the inclusion
/// determines uniquely even where the graph is set-valued.
pub fn implicit_graph_step(
    a_prev: f64,
    tau: f64,
    graph: &CornerGraph,
    f_n: f64,
) -> Result<(f64, f64)> {
    if !a_prev.is_finite() || !f_n.is_finite() {
        return Err(Error::NonFinite("implicit_graph_step"));
    }
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::parameter(format!("implicit_graph_step requires tau > 0, got {tau}")));
    }
    let a_n = graph.resolvent(tau, a_prev + tau * f_n)?;
    let selection = f_n - (a_n - a_prev) / tau;
    Ok((a_n, selection))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Independent oracle: solve `psi + lambda*w ∋ w_in`, `w ∈ w*(psi)` by
    /// bisection over the two graph branches.
    fn resolvent_wstar_bisect(lambda: f64, chi_star: f64, w_in: f64) -> f64 {
        // Branch psi = 0 works iff some w <= chi_star satisfies lambda*w = w_in.
        if w_in <= lambda * chi_star {
            return 0.0;
        }
        // Otherwise w = chi_star and psi solves psi + lambda*chi_star = w_in.
        let f = |psi: f64| psi + lambda * chi_star - w_in;
        let (mut lo, mut hi) = (0.0, w_in.abs() + lambda * chi_star.abs() + 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn resolvent_above_knee() {
        let psi = resolvent_wstar(0.5, 1.0, 1.79).unwrap();
        assert_abs_diff_eq!(psi, 1.29, epsilon = 1e-14);
        assert_abs_diff_eq!(psi, resolvent_wstar_bisect(0.5, 1.0, 1.79), epsilon = 1e-10);
    }

    #[test]
    fn resolvent_below_knee_clamps() {
        assert_eq!(resolvent_wstar(0.5, 1.0, 0.3).unwrap(), 0.0);
        assert_eq!(resolvent_wstar(1.0, 0.0, -2.0).unwrap(), 0.0);
    }

    #[test]
    fn resolvent_rejects_bad_inputs() {
        assert!(resolvent_wstar(0.0, 1.0, 1.0).is_err());
        assert!(resolvent_wstar(-1.0, 1.0, 1.0).is_err());
        assert!(resolvent_wstar(1.0, f64::NAN, 1.0).is_err());
        assert!(resolvent_wstar(1.0, 1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn yosida_saturates_at_plateau() {
        assert_abs_diff_eq!(yosida_wstar(1.0, 1.0, 3.0).unwrap(), 1.0, epsilon = 1e-14);
        assert_eq!(yosida_wstar(1.0, 1.0, 0.0).unwrap(), 0.0);
        let y = yosida_wstar(0.25, 2.0, 0.3).unwrap();
        assert_abs_diff_eq!(y, 1.2, epsilon = 1e-14);
        assert!(y <= 2.0);
    }

    #[test]
    fn yosida_value_is_graph_consistent() {
        // G_lambda(psi) ∈ w*(R_lambda(psi)) for a maximal monotone graph.
        let g = CornerGraph::w_star(1.3).unwrap();
        for &psi in &[0.0, 0.1, 0.65, 1.3, 2.0, 7.5] {
            let lambda = 0.4;
            let r = g.resolvent(lambda, psi).unwrap();
            let y = g.yosida(lambda, psi).unwrap();
            assert!(g.contains(r, y), "psi={psi}: yosida {y} not in w*({r})");
        }
    }

    #[test]
    fn distance_to_estar() {
        assert_eq!(graph_distance_estar(0.5, 0.0, 1.0), 0.0);
        assert_eq!(graph_distance_estar(1.0, 0.64, 1.0), 0.0);
        assert_abs_diff_eq!(graph_distance_estar(1.4, 0.4, 1.0), 0.4, epsilon = 1e-15);
        // Off-graph point below the flat ray.
        assert_abs_diff_eq!(graph_distance_estar(0.3, -0.2, 1.0), 0.2, epsilon = 1e-15);
    }

    #[test]
    fn implicit_step_lands_on_graph() {
        let w = CornerGraph::w_star(1.0).unwrap();
        let (a, sel) = implicit_graph_step(0.0, 1.0, &w, 2.0).unwrap();
        assert_abs_diff_eq!(a, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(sel, 1.0, epsilon = 1e-14);
        assert!(w.contains(a, sel));

        let (a, sel) = implicit_graph_step(0.2, 1.0, &w, 0.0).unwrap();
        assert_eq!(a, 0.0);
        assert_abs_diff_eq!(sel, 0.2, epsilon = 1e-14);
        assert!(w.contains(a, sel));
    }

    #[test]
    fn implicit_step_is_identity_on_flat_branch() {
        let e = CornerGraph::e_star(10.0).unwrap();
        for &x in &[-3.0, 0.0, 2.5, 9.9] {
            let (a, sel) = implicit_graph_step(x, 0.7, &e, 0.0).unwrap();
            assert_eq!(a, x);
            assert_eq!(sel, 0.0);
        }
    }

    #[test]
    fn implicit_step_specializes_to_resolvent() {
        // With f = 0 the step is exactly the resolvent of the previous value.
        let w = CornerGraph::w_star(0.8).unwrap();
        for &prev in &[0.0, 0.3, 1.1, 4.2] {
            let (a, _) = implicit_graph_step(prev, 0.6, &w, 0.0).unwrap();
            assert_eq!(a, resolvent_wstar(0.6, 0.8, prev).unwrap());
        }
    }

    #[test]
    fn estar_resolvent_clamps_at_knee() {
        let e = CornerGraph::e_star(1.0).unwrap();
        assert_eq!(e.resolvent(0.5, 0.7).unwrap(), 0.7);
        assert_eq!(e.resolvent(0.5, 1.9).unwrap(), 1.0);
    }
}
