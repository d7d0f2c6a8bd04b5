//! Algebra of the phase variables.
//!
//! Total methane `u`, dissolved mass fraction `chi`, hydrate saturation `s`
//! and the stored amount `psi = s*(R - chi)` are bound by
//! `u = (1-s)*chi + R*s = chi + psi`. At equilibrium a given `u` splits
//! uniquely as `chi = min(chi_star, u)`, `s = (u - chi_star)_+ / (R - chi_star)`,
//! which places `(chi, s)` on the graph `E*`.
//!
//! Kinetic schemes can leave the physically meaningful region
//! `D0 = [0, R) x [0, 1)`; such states are representable here and only
//! flagged by [`classify_region`], never clamped.

use crate::error::{Error, Result};
use crate::graph::KNEE_TOL;

/// Hydrate methane fraction ratio `R` plus the densities it derives from.
///
/// The densities and hydrate mass fraction are provenance metadata carried
/// through configs; only `r` enters the kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseParams {
    pub r: f64,
    pub rho_l: Option<f64>,
    pub rho_h: Option<f64>,
    pub chi_mh: Option<f64>,
}

impl PhaseParams {
    pub fn new(r: f64) -> Result<Self> {
        if !r.is_finite() || r <= 0.0 {
            return Err(Error::parameter(format!("PhaseParams requires R > 0, got {r}")));
        }
        Ok(PhaseParams { r, rho_l: None, rho_h: None, chi_mh: None })
    }

    /// Derive `R = rho_h * chi_mh / rho_l` from reported densities.
    pub fn from_densities(rho_l: f64, rho_h: f64, chi_mh: f64) -> Result<Self> {
        if rho_l <= 0.0 || rho_h <= 0.0 || chi_mh <= 0.0 {
            return Err(Error::parameter("densities and chi_mh must be positive".to_string()));
        }
        let mut p = Self::new(rho_h * chi_mh / rho_l)?;
        p.rho_l = Some(rho_l);
        p.rho_h = Some(rho_h);
        p.chi_mh = Some(chi_mh);
        Ok(p)
    }

    /// The admissibility constraint `0 < chi_star < R` for a knee value.
    pub fn admits_chi_star(&self, chi_star: f64) -> bool {
        chi_star > 0.0 && chi_star < self.r
    }
}

/// A `(chi, s)` pair; physically meaningful iff it lies in `D0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub chi: f64,
    pub s: f64,
}

impl PhasePoint {
    pub fn new(chi: f64, s: f64) -> Self {
        PhasePoint { chi, s }
    }

    pub fn in_d0(&self, r: f64) -> bool {
        self.chi >= 0.0 && self.chi < r && self.s >= 0.0 && self.s < 1.0
    }
}

/// Region classification of a phase point relative to `D0` and the
/// separating curve `u(chi, s) = chi_star`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// Saturated part of `D0`: `u > chi_star`.
    InD0Plus,
    /// Unsaturated part of `D0`: `u < chi_star`.
    InD0Minus,
    /// On the curve `u = chi_star` (within knee tolerance).
    OnBoundaryCurve,
    /// Outside the physically meaningful region.
    OutsideD0,
}

/// Total methane `u = (1-s)*chi + R*s = chi + s*(R - chi)`.
pub fn total_u(chi: f64, s: f64, r: f64) -> f64 {
    chi + s * (r - chi)
}

/// Equilibrium closure: the unique point of `E*` carrying total `u`.
///
/// `chi = min(chi_star, u)`, `s = (u - chi_star)_+ / (R - chi_star)`.
pub fn equilibrium_closure(u: f64, chi_star: f64, r: f64) -> Result<PhasePoint> {
    if r <= chi_star {
        return Err(Error::parameter(format!(
            "equilibrium closure requires R > chi_star (R = {r}, chi_star = {chi_star})"
        )));
    }
    let chi = chi_star.min(u);
    let s = (u - chi_star).max(0.0) / (r - chi_star);
    Ok(PhasePoint { chi, s })
}

/// Stored amount `psi = s*(R - chi)`.
pub fn psi_from(chi: f64, s: f64, r: f64) -> Result<f64> {
    if chi >= r {
        return Err(Error::parameter(format!("psi_from requires chi < R (chi = {chi}, R = {r})")));
    }
    Ok(s * (r - chi))
}

/// Saturation from the stored amount: `s = psi / (R - chi)`.
pub fn s_from_psi(psi: f64, chi: f64, r: f64) -> Result<f64> {
    if chi >= r {
        return Err(Error::parameter(format!("s_from_psi requires chi < R (chi = {chi}, R = {r})")));
    }
    Ok(psi / (r - chi))
}

/// Classify a point against `D0` and the curve `u(chi, s) = chi_star`.
pub fn classify_region(p: PhasePoint, chi_star: f64, r: f64) -> Region {
    if !p.in_d0(r) {
        return Region::OutsideD0;
    }
    let u = total_u(p.chi, p.s, r);
    if (u - chi_star).abs() <= KNEE_TOL {
        Region::OnBoundaryCurve
    } else if u > chi_star {
        Region::InD0Plus
    } else {
        Region::InD0Minus
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::graph_distance_estar;
    use approx::assert_abs_diff_eq;

    #[test]
    fn total_u_matches_reported_cases() {
        assert_abs_diff_eq!(total_u(1.0, 0.64, 2.0), 1.64, epsilon = 1e-15);
        assert_abs_diff_eq!(total_u(0.25, 0.2, 2.0), 0.6, epsilon = 1e-15);
        assert_eq!(total_u(0.37, 0.0, 5.0), 0.37);
    }

    #[test]
    fn closure_saturated_and_unsaturated() {
        let p = equilibrium_closure(1.64, 1.0, 2.0).unwrap();
        assert_abs_diff_eq!(p.chi, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.s, 0.64, epsilon = 1e-15);
        assert_eq!(graph_distance_estar(p.chi, p.s, 1.0), 0.0);

        let p = equilibrium_closure(0.6, 1.0, 2.0).unwrap();
        assert_eq!((p.chi, p.s), (0.6, 0.0));

        let p = equilibrium_closure(0.0, 0.5, 2.0).unwrap();
        assert_eq!((p.chi, p.s), (0.0, 0.0));
    }

    #[test]
    fn closure_rejects_r_not_above_knee() {
        assert!(equilibrium_closure(0.5, 2.0, 2.0).is_err());
        assert!(equilibrium_closure(0.5, 3.0, 2.0).is_err());
    }

    #[test]
    fn closure_complementarity_is_exact() {
        for &u in &[0.0, 0.3, 0.999, 1.0, 1.2, 1.9999] {
            let p = equilibrium_closure(u, 1.0, 2.0).unwrap();
            assert!(p.chi <= 1.0 && p.s >= 0.0);
            assert_eq!((1.0 - p.chi) * p.s, 0.0, "complementarity at u={u}");
            assert_abs_diff_eq!(total_u(p.chi, p.s, 2.0), u, epsilon = 1e-14);
        }
    }

    #[test]
    fn closure_remark_both_directions() {
        // 0 <= u < R lands in 0 <= chi <= chi_star, 0 <= s < 1; and any
        // point of E*0 carries 0 <= u < R.
        let (chi_star, r) = (1.0, 2.0);
        for i in 0..200 {
            let u = r * (i as f64) / 200.0;
            let p = equilibrium_closure(u, chi_star, r).unwrap();
            assert!(p.chi >= 0.0 && p.chi <= chi_star);
            assert!(p.s >= 0.0 && p.s < 1.0);
            let back = total_u(p.chi, p.s, r);
            assert!((0.0..r).contains(&back));
        }
    }

    #[test]
    fn psi_roundtrip() {
        assert_abs_diff_eq!(psi_from(0.25, 0.2, 2.0).unwrap(), 0.35, epsilon = 1e-15);
        assert_abs_diff_eq!(psi_from(0.2, 0.8, 2.0).unwrap(), 1.44, epsilon = 1e-15);
        assert_eq!(psi_from(1.3, 0.0, 2.0).unwrap(), 0.0);
        assert!(psi_from(2.0, 0.1, 2.0).is_err());

        assert_abs_diff_eq!(s_from_psi(1.04, 0.6, 2.0).unwrap(), 1.04 / 1.4, epsilon = 1e-15);
        assert_eq!(s_from_psi(0.0, 0.4, 2.0).unwrap(), 0.0);
        // Unphysical stored amounts stay representable.
        assert_abs_diff_eq!(
            s_from_psi(-0.025, 0.625, 2.0).unwrap(),
            -0.018181818181818184,
            epsilon = 1e-15
        );
        assert!(s_from_psi(0.1, 2.5, 2.0).is_err());
    }

    #[test]
    fn region_classification() {
        assert_eq!(classify_region(PhasePoint::new(0.2, 0.8), 1.0, 2.0), Region::InD0Plus);
        assert_eq!(classify_region(PhasePoint::new(0.25, 0.2), 1.0, 2.0), Region::InD0Minus);
        assert_eq!(classify_region(PhasePoint::new(-0.1, 0.0), 1.0, 2.0), Region::OutsideD0);
        assert_eq!(classify_region(PhasePoint::new(0.5, 1.0), 1.0, 2.0), Region::OutsideD0);
        // u = chi_star exactly.
        let p = equilibrium_closure(1.0, 1.0, 2.0).unwrap();
        assert_eq!(classify_region(p, 1.0, 2.0), Region::OnBoundaryCurve);
    }

    #[test]
    fn params_from_densities() {
        // R = rho_h * chi_mh / rho_l with the reported reservoir values.
        let p = PhaseParams::from_densities(1030.0, 925.0, 0.134).unwrap();
        assert!((p.r - 925.0 * 0.134 / 1030.0).abs() < 1e-15);
        assert!(p.admits_chi_star(2.4e-3));
        assert!(!p.admits_chi_star(0.2));
    }
}
