//! Norms, total variation, analytical oracles, convergence tables, and the
//! stability ledger.
//!
//! The grid norms are `||V||_1 = h * sum_j |V_j|` and
//! `TV(V) = sum_j |V_j - V_{j-1}|`; the space-time variation accumulates
//! `tau * TV(V^n) + ||V^n - V^{n-1}||_1` over the steps. The ledger
//! evaluates the a-priori bounds the stability analysis provides, so a run
//! can be checked step by step against its own constants:
//!
//! * `C1(T) = TV(U^0) e^{T L1} + 2 omega_S (e^{T L1} - 1)` bounds `TV(U^n)`
//!   for the (regularized) equilibrium scheme,
//! * `TV(X^n, Psi^n) <= TV(X^0, Psi^0) + C4 t` with
//!   `C4 = 2 k3 omega_S L_chistar` for the kinetic scheme,
//! * `||Q^n||_1 <= C5(T)` bounds the exchange discrepancy, and
//! * `C8(T) = T [C4 T + C7(T)]` bounds the space-time variation.
//!
//! All reductions use a fixed summation order.

use crate::error::{Error, Result};
use crate::flux::{LipschitzConstants, SolubilityField};
use crate::transport::Grid1D;

/// `h * sum |v_j|`.
pub fn l1_norm(v: &[f64], h: f64) -> f64 {
    h * v.iter().map(|x| x.abs()).sum::<f64>()
}

pub fn linf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// Total variation over the interior differences; a constant field has
/// `tv = 0`.
pub fn tv(v: &[f64]) -> f64 {
    v.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// Product-space variation `TV(X) + TV(Psi)`.
pub fn tv_pair(x: &[f64], psi: &[f64]) -> f64 {
    tv(x) + tv(psi)
}

/// Total variation with the inflow ghost state prepended, matching the
/// whole-line extension the stability analysis sums over (the outflow side
/// extrapolates, contributing nothing).
pub fn tv_extended(v: &[f64], inflow_value: f64) -> f64 {
    match v.first() {
        Some(&first) => (first - inflow_value).abs() + tv(v),
        None => 0.0,
    }
}

/// Space-time variation of a series of grid functions:
/// `sum_n [tau TV(V^n) + ||V^n - V^{n-1}||_1]`, with no increment charged
/// at `n = 0`.
pub fn tv_time(series: &[Vec<f64>], tau: f64, h: f64) -> f64 {
    let mut acc = 0.0;
    for (n, v) in series.iter().enumerate() {
        acc += tau * tv(v);
        if n > 0 {
            let diff: Vec<f64> = v.iter().zip(&series[n - 1]).map(|(a, b)| a - b).collect();
            acc += l1_norm(&diff, h);
        }
    }
    acc
}

/// `h * sum |a_j - b_j|`; the fields must share a grid.
pub fn l1_error(a: &[f64], b: &[f64], h: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::GridMismatch(format!(
            "l1_error: lengths {} and {} differ",
            a.len(),
            b.len()
        )));
    }
    Ok(h * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

/// Cell-average restriction of a fine field onto a coarser grid; the fine
/// resolution must be an integer multiple of the coarse one.
pub fn restrict_fine(fine: &[f64], coarse_m: usize) -> Result<Vec<f64>> {
    if coarse_m == 0 || fine.len() % coarse_m != 0 {
        return Err(Error::GridMismatch(format!(
            "cannot restrict {} fine cells onto {} coarse cells",
            fine.len(),
            coarse_m
        )));
    }
    let ratio = fine.len() / coarse_m;
    Ok((0..coarse_m)
        .map(|j| fine[j * ratio..(j + 1) * ratio].iter().sum::<f64>() / ratio as f64)
        .collect())
}

/// Discrete support measure `h * #{ j : |v_j| > threshold }`.
pub fn support_measure(v: &[f64], h: f64, threshold: f64) -> f64 {
    h * v.iter().filter(|x| x.abs() > threshold).count() as f64
}

/// Parameters of the traveling-front analytical solution for the model
/// equilibrium problem with box or step initial data.
#[derive(Debug, Clone)]
pub struct BoxOracle {
    pub chi_l: f64,
    pub q: f64,
    pub r: f64,
    pub field: SolubilityField,
    /// Support `(a, b)` of the initial box; `a = -inf` recovers step data.
    pub support: (f64, f64),
    /// Position where hydrate first forms: `chi_star(x_l) = chi_l`.
    pub x_l: f64,
    /// Set when `chi_star(x) = chi_l` had no root in the search interval and
    /// `x_l` was pinned to the domain start.
    pub x_l_fallback: bool,
}

impl BoxOracle {
    /// Locate `x_l` by bisection on `chi_star(x) = chi_l` over `[lo, hi]`
    /// (the field must be strictly decreasing there).
    pub fn new(
        chi_l: f64,
        q: f64,
        r: f64,
        field: SolubilityField,
        support: (f64, f64),
        search: (f64, f64),
    ) -> Result<Self> {
        if !(q > 0.0) {
            return Err(Error::precondition(format!("oracle requires q > 0, got {q}")));
        }
        let (lo, hi) = search;
        let f_lo = field.eval(lo, 0.0)? - chi_l;
        let f_hi = field.eval(hi, 0.0)? - chi_l;
        let (x_l, fallback) = if f_lo.abs() <= 1e-12 {
            (lo, false)
        } else if f_lo < 0.0 || f_hi > 0.0 {
            // No sign change for a decreasing field: no saturation onset in
            // the domain.
            (lo, true)
        } else {
            let (mut a, mut b) = (lo, hi);
            while b - a > 1e-12 * (1.0 + hi.abs()) {
                let mid = 0.5 * (a + b);
                if field.eval(mid, 0.0)? - chi_l > 0.0 {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            // Return the upper bracket end: chi_star(x) < chi_l holds strictly
            // past it, so the saturated set never leaks across the onset point.
            (b, false)
        };
        Ok(BoxOracle { chi_l, q, r, field, support, x_l, x_l_fallback: fallback })
    }

    /// Latest time at which the closed form is valid: beyond it the trailing
    /// edge of the box enters the hydrate zone and dissolution starts.
    pub fn valid_until(&self) -> f64 {
        if self.support.0.is_finite() {
            (self.x_l - self.support.0) / self.q
        } else {
            f64::INFINITY
        }
    }

    /// Exact `(u, chi, s)` at a point. The initial box translates with speed
    /// `q`; hydrate accumulates behind the front where `chi_star < chi_L`.
    pub fn eval(&self, x: f64, t: f64) -> Result<(f64, f64, f64)> {
        let chi_star = self.field.eval(x, 0.0)?;
        let (a, b) = self.support;
        let xs = x - self.q * t;
        let in_box = xs > a && xs <= b;
        let chi = if in_box { self.chi_l.min(chi_star) } else { 0.0 };
        let in_g0 = x > self.x_l && x <= self.q * t;
        let s = if in_g0 {
            let age = (t - x / self.q).max(0.0);
            -age * self.q * self.field.ddx(x, 0.0)? / (self.r - chi_star)
        } else {
            0.0
        };
        let u = chi + (self.r - chi_star) * s;
        Ok((u, chi, s))
    }

    /// Exact fields sampled at the cell centers.
    pub fn sample(&self, grid: &Grid1D, t: f64) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let m = grid.m();
        let (mut u, mut chi, mut s) = (Vec::with_capacity(m), Vec::with_capacity(m), Vec::with_capacity(m));
        for j in 0..m {
            let (uj, cj, sj) = self.eval(grid.center(j), t)?;
            u.push(uj);
            chi.push(cj);
            s.push(sj);
        }
        Ok((u, chi, s))
    }
}

/// One refinement level of a convergence study.
#[derive(Debug, Clone, Copy)]
pub struct ConvergenceRow {
    pub m: usize,
    pub h: f64,
    pub err_u: f64,
    pub err_chi: f64,
    pub err_s: f64,
}

/// Errors per resolution plus fitted convergence orders.
#[derive(Debug, Clone, Default)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

#[derive(Debug, Clone, Copy)]
pub struct ConvergenceSlopes {
    pub rate_u: f64,
    pub rate_chi: f64,
    pub rate_s: f64,
}

impl ConvergenceTable {
    pub fn push(&mut self, row: ConvergenceRow) {
        self.rows.push(row);
    }

    /// Least-squares slope of `log(err)` against `log(h)`, per variable.
    pub fn fit_rates(&self) -> Result<ConvergenceSlopes> {
        if self.rows.len() < 3 {
            return Err(Error::precondition(format!(
                "rate fit needs >= 3 resolutions, got {}",
                self.rows.len()
            )));
        }
        if !self.rows.windows(2).all(|w| w[0].m < w[1].m) {
            return Err(Error::precondition("resolutions must be strictly increasing".to_string()));
        }
        let fit = |errs: Vec<f64>| -> Result<f64> {
            if errs.iter().any(|&e| e <= 0.0) {
                return Err(Error::precondition("rate fit requires positive errors".to_string()));
            }
            let xs: Vec<f64> = self.rows.iter().map(|r| r.h.ln()).collect();
            let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
            let n = xs.len() as f64;
            let mx = xs.iter().sum::<f64>() / n;
            let my = ys.iter().sum::<f64>() / n;
            let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
            let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
            Ok(sxy / sxx)
        };
        Ok(ConvergenceSlopes {
            rate_u: fit(self.rows.iter().map(|r| r.err_u).collect())?,
            rate_chi: fit(self.rows.iter().map(|r| r.err_chi).collect())?,
            rate_s: fit(self.rows.iter().map(|r| r.err_s).collect())?,
        })
    }
}

/// Inputs measured from a run's initial data that the ledger constants need.
#[derive(Debug, Clone, Copy, Default)]
pub struct LedgerInputs {
    /// `TV(U^0)` for equilibrium runs, `TV(X^0, Psi^0)` for kinetic runs.
    pub tv0: f64,
    /// `||(X^0, Psi^0)||_1` (kinetic; zero otherwise).
    pub norm0: f64,
    /// `||Q^0||_1` (kinetic; zero otherwise).
    pub q0: f64,
    /// Support measure bound for the run.
    pub omega_s: f64,
    /// Kinetic exchange rate (zero for equilibrium runs).
    pub k3: f64,
    /// Final time.
    pub t_final: f64,
}

/// The evaluated stability constants of a run.
#[derive(Debug, Clone, Copy, Default)]
pub struct StabilityLedger {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l_q: f64,
    pub l_qx: f64,
    pub l_chistar: f64,
    pub omega_s: f64,
    pub tv0: f64,
    pub norm0: f64,
    pub q0: f64,
    pub k3: f64,
    pub t_final: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
    pub c7: f64,
    pub c8: f64,
}

impl StabilityLedger {
    /// The equilibrium TV bound at time `t`.
    pub fn c1_at(&self, t: f64) -> f64 {
        let e = (t * self.l1).exp();
        self.tv0 * e + 2.0 * self.omega_s * (e - 1.0)
    }

    /// The kinetic TV bound at time `t`.
    pub fn kinetic_tv_bound_at(&self, t: f64) -> f64 {
        self.tv0 + self.c4 * t
    }
}

/// Evaluate every ledger constant from the sampled Lipschitz data and the
/// measured initial quantities.
pub fn stability_ledger_eval(consts: &LipschitzConstants, inputs: &LedgerInputs) -> StabilityLedger {
    let t = inputs.t_final;
    let e = (t * consts.l1).exp();
    let c1 = inputs.tv0 * e + 2.0 * inputs.omega_s * (e - 1.0);
    let c2 = consts.l2 * (c1 + inputs.omega_s);
    let c3 = t * (c1 + c2);
    let c4 = 2.0 * inputs.k3 * inputs.omega_s * consts.l_chistar;
    let c6 = consts.l_q * (inputs.tv0 + c4 * t) + consts.l_qx * inputs.norm0;
    let c5 = inputs.q0 + t * (c6 + consts.l3 * inputs.omega_s);
    let c7 = 2.0 * inputs.k3 * inputs.q0
        + (1.0 + 2.0 * inputs.k3 * t) * c6
        + 2.0 * inputs.k3 * t * consts.l3 * inputs.omega_s;
    let c8 = t * (c4 * t + c7);
    StabilityLedger {
        l1: consts.l1,
        l2: consts.l2,
        l3: consts.l3,
        l_q: consts.l_q,
        l_qx: consts.l_qx,
        l_chistar: consts.l_chistar,
        omega_s: inputs.omega_s,
        tv0: inputs.tv0,
        norm0: inputs.norm0,
        q0: inputs.q0,
        k3: inputs.k3,
        t_final: t,
        c1,
        c2,
        c3,
        c4,
        c5,
        c6,
        c7,
        c8,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn norms_and_tv() {
        let h = 0.5;
        assert_eq!(l1_norm(&[1.0, -2.0, 3.0], h), 3.0);
        assert_eq!(linf_norm(&[1.0, -2.0]), 2.0);
        assert_eq!(tv(&[0.0, 0.0, 1.0, 1.0]), 1.0);
        assert_eq!(tv(&[0.7; 5]), 0.0);
        assert_eq!(tv_pair(&[0.0, 1.0], &[1.0, 0.0]), 2.0);
    }

    #[test]
    fn tv_time_constant_series() {
        let series = vec![vec![0.0, 1.0, 0.0]; 4];
        // Increments vanish; only tau * TV accumulates.
        assert_abs_diff_eq!(tv_time(&series, 0.25, 1.0), 4.0 * 0.25 * 2.0, epsilon = 1e-15);
    }

    #[test]
    fn tv_time_telescopes() {
        let series = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        let (tau, h) = (0.1, 0.5);
        let by_hand = tau * (0.0 + 1.0 + 0.0) + h * (1.0) + h * (1.0);
        assert_abs_diff_eq!(tv_time(&series, tau, h), by_hand, epsilon = 1e-15);
    }

    #[test]
    fn l1_error_cases() {
        let h = 0.1;
        assert_eq!(l1_error(&[1.0, 2.0], &[1.0, 2.0], h).unwrap(), 0.0);
        // Fields differing by c over length L give c * L.
        let a = vec![0.3; 50];
        let b = vec![0.1; 50];
        assert_abs_diff_eq!(l1_error(&a, &b, h).unwrap(), 0.2 * 5.0, epsilon = 1e-13);
        assert!(l1_error(&a, &b[..10], h).is_err());
    }

    #[test]
    fn restriction_is_consistent() {
        let fine: Vec<f64> = (0..64).map(|i| (i as f64 * 0.1).sin()).collect();
        let coarse = restrict_fine(&fine, 16).unwrap();
        assert_eq!(coarse.len(), 16);
        // Restricting a field onto its own resolution is the identity.
        assert_eq!(restrict_fine(&fine, 64).unwrap(), fine);
        // Mass is preserved by averaging.
        assert_abs_diff_eq!(
            coarse.iter().sum::<f64>() * 4.0,
            fine.iter().sum::<f64>(),
            epsilon = 1e-12
        );
        assert!(restrict_fine(&fine, 63).is_err());
    }

    #[test]
    fn oracle_pointwise_value() {
        let field = SolubilityField::Exponential { a: 1.0, b: 0.5 };
        let oracle =
            BoxOracle::new(1.0, 1.0, 2.0, field, (-1.0, 0.0), (-1.0, 3.0)).unwrap();
        assert!(!oracle.x_l_fallback);
        assert_abs_diff_eq!(oracle.x_l, 0.0, epsilon = 1e-10);
        let (_, chi, s) = oracle.eval(0.5, 1.0).unwrap();
        let expect = 0.5 * 0.5 * (-0.25f64).exp() / (2.0 - (-0.25f64).exp());
        assert_abs_diff_eq!(s, expect, epsilon = 1e-10);
        assert_abs_diff_eq!(chi, (-0.25f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn oracle_initial_time_and_front() {
        let field = SolubilityField::Exponential { a: 1.0, b: 0.5 };
        let oracle =
            BoxOracle::new(1.0, 1.0, 2.0, field.clone(), (-1.0, 0.0), (-1.0, 3.0)).unwrap();
        // t = 0 reproduces the initial data under the closure.
        let (u, chi, s) = oracle.eval(-0.5, 0.0).unwrap();
        assert_eq!(s, 0.0);
        assert_abs_diff_eq!(u, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(chi, 1.0, epsilon = 1e-12);
        // Ahead of the front S vanishes.
        let (_, _, s) = oracle.eval(1.7, 1.0).unwrap();
        assert_eq!(s, 0.0);
        assert_abs_diff_eq!(oracle.valid_until(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn oracle_self_consistency() {
        // Wherever s > 0 the solution is saturated and u rebuilds from the
        // closure identity.
        let field = SolubilityField::Exponential { a: 1.0, b: 0.5 };
        let oracle =
            BoxOracle::new(1.0, 1.0, 2.0, field.clone(), (-1.0, 0.0), (-1.0, 3.0)).unwrap();
        for i in 0..200 {
            let x = -1.0 + 4.0 * (i as f64) / 200.0;
            let (u, chi, s) = oracle.eval(x, 1.0).unwrap();
            let cs = field.eval(x, 0.0).unwrap();
            if s > 1e-13 {
                assert_abs_diff_eq!(chi, cs, epsilon = 1e-12);
            }
            assert_abs_diff_eq!(u, chi + (2.0 - cs) * s, epsilon = 1e-12);
        }
    }

    #[test]
    fn oracle_fallback_when_unsolvable() {
        // chi_L above the whole field: saturation from the domain start.
        let field = SolubilityField::Exponential { a: 0.5, b: 0.5 };
        let oracle = BoxOracle::new(1.0, 1.0, 2.0, field, (-1.0, 0.0), (0.0, 3.0)).unwrap();
        assert!(oracle.x_l_fallback);
        assert_eq!(oracle.x_l, 0.0);
    }

    #[test]
    fn rate_fit_synthetic() {
        let mut table = ConvergenceTable::default();
        for &m in &[100usize, 200, 400, 800] {
            let h = 1.0 / m as f64;
            table.push(ConvergenceRow {
                m,
                h,
                err_u: 3.0 * h,
                err_chi: 2.0 * h.sqrt(),
                err_s: 0.5 * h.powf(0.55),
            });
        }
        let slopes = table.fit_rates().unwrap();
        assert_abs_diff_eq!(slopes.rate_u, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(slopes.rate_chi, 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(slopes.rate_s, 0.55, epsilon = 1e-10);
    }

    #[test]
    fn rate_fit_preconditions() {
        let mut table = ConvergenceTable::default();
        table.push(ConvergenceRow { m: 100, h: 0.01, err_u: 1.0, err_chi: 1.0, err_s: 1.0 });
        table.push(ConvergenceRow { m: 200, h: 0.005, err_u: 0.5, err_chi: 0.5, err_s: 0.5 });
        assert!(table.fit_rates().is_err());
        table.push(ConvergenceRow { m: 400, h: 0.0025, err_u: 0.0, err_chi: 0.1, err_s: 0.1 });
        assert!(table.fit_rates().is_err());
    }

    #[test]
    fn ledger_degenerate_cases() {
        let consts = LipschitzConstants {
            l_q: 1.0,
            l_qx: 0.0,
            l_chistar: 0.5,
            l3: 0.0,
            l1: 0.0,
            l2: 1.0,
            chi_star_jumps: Vec::new(),
        };
        // L1 = 0 collapses C1 to TV(U^0).
        let inputs = LedgerInputs { tv0: 2.0, omega_s: 1.5, t_final: 1.0, ..Default::default() };
        let ledger = stability_ledger_eval(&consts, &inputs);
        assert_eq!(ledger.c1, 2.0);
        assert_eq!(ledger.c1_at(0.7), 2.0);
        // k3 = 0 kills C4 and the kinetic bound reduces to TV(X^0, Psi^0).
        assert_eq!(ledger.c4, 0.0);
        assert_eq!(ledger.kinetic_tv_bound_at(0.9), 2.0);
        // C1 dominates TV(U^0) always.
        assert!(ledger.c1 >= inputs.tv0);
    }

    #[test]
    fn ledger_formulas() {
        let consts = LipschitzConstants {
            l_q: 2.0,
            l_qx: 0.25,
            l_chistar: 0.5,
            l3: 0.1,
            l1: 0.3,
            l2: 2.0,
            chi_star_jumps: Vec::new(),
        };
        let inputs = LedgerInputs {
            tv0: 1.0,
            norm0: 0.8,
            q0: 0.2,
            omega_s: 2.0,
            k3: 10.0,
            t_final: 1.0,
        };
        let lg = stability_ledger_eval(&consts, &inputs);
        let e = (0.3f64).exp();
        assert_abs_diff_eq!(lg.c1, e + 4.0 * (e - 1.0), epsilon = 1e-14);
        assert_abs_diff_eq!(lg.c2, 2.0 * (lg.c1 + 2.0), epsilon = 1e-14);
        assert_abs_diff_eq!(lg.c3, lg.c1 + lg.c2, epsilon = 1e-14);
        assert_abs_diff_eq!(lg.c4, 2.0 * 10.0 * 2.0 * 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(lg.c6, 2.0 * (1.0 + 20.0) + 0.25 * 0.8, epsilon = 1e-14);
        assert_abs_diff_eq!(lg.c5, 0.2 + (lg.c6 + 0.1 * 2.0), epsilon = 1e-14);
        assert_abs_diff_eq!(
            lg.c7,
            2.0 * 10.0 * 0.2 + 21.0 * lg.c6 + 2.0 * 10.0 * 0.1 * 2.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(lg.c8, lg.c4 + lg.c7, epsilon = 1e-12);
    }
}
