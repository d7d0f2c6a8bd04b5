//! Solubility and flow fields, the conservation-law flux, and its
//! regularization.
//!
//! The flux of dissolved methane is `f(x,t;u) = q(x,t) * min(chi_star(x,t), u)`:
//! piecewise linear in `u` with a corner at `u = chi_star`. The stability
//! constants of the transport analysis are driven by how smoothly `q` and
//! `chi_star` vary, so this module also estimates those constants by
//! finite-difference sampling.
//!
//! The corner breaks the smoothness the TV analysis needs; `flux_reg_eval`
//! replaces `f` on the band `[chi_star - eps, chi_star + eps]` with the
//! unique quintic matching value, slope, and curvature of both linear
//! branches. The quintic is monotone with `|f_eps - f| <= (3/16) q eps`.

use crate::error::{Error, Result};
use crate::transport::Grid1D;

/// Maximum-solubility field `chi_star(x, t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum SolubilityField {
    /// `a * exp(-b x)`.
    Exponential { a: f64, b: f64 },
    /// `intercept + slope * x`.
    Linear { intercept: f64, slope: f64 },
    /// Piecewise field; layer `i` owns `(breakpoints[i-1], breakpoints[i]]`
    /// (left-continuous at the breakpoints).
    Layered { breakpoints: Vec<f64>, layers: Vec<SolubilityField> },
    /// `base(x) * (1 + rate * t)`.
    TimeRamped { base: Box<SolubilityField>, rate: f64 },
    /// `base(x) * factor`, frozen in time (macro-step refresh output).
    Scaled { base: Box<SolubilityField>, factor: f64 },
    /// `base(x) + offset`.
    Offset { base: Box<SolubilityField>, offset: f64 },
    /// Samples with linear interpolation; errors outside the table range.
    Tabulated { xs: Vec<f64>, values: Vec<f64> },
}

impl SolubilityField {
    /// Evaluate `chi_star(x, t)`.
    pub fn eval(&self, x: f64, t: f64) -> Result<f64> {
        match self {
            SolubilityField::Exponential { a, b } => Ok(a * (-b * x).exp()),
            SolubilityField::Linear { intercept, slope } => Ok(intercept + slope * x),
            SolubilityField::Layered { breakpoints, layers } => {
                layers[layer_index(breakpoints, x)].eval(x, t)
            }
            SolubilityField::TimeRamped { base, rate } => Ok(base.eval(x, t)? * (1.0 + rate * t)),
            SolubilityField::Scaled { base, factor } => Ok(base.eval(x, t)? * factor),
            SolubilityField::Offset { base, offset } => Ok(base.eval(x, t)? + offset),
            SolubilityField::Tabulated { xs, values } => interp_linear(xs, values, x),
        }
    }

    /// Spatial derivative within layers (analytic per variant; segment slope
    /// for tabulated fields).
    pub fn ddx(&self, x: f64, t: f64) -> Result<f64> {
        match self {
            SolubilityField::Exponential { a, b } => Ok(-b * a * (-b * x).exp()),
            SolubilityField::Linear { slope, .. } => Ok(*slope),
            SolubilityField::Layered { breakpoints, layers } => {
                layers[layer_index(breakpoints, x)].ddx(x, t)
            }
            SolubilityField::TimeRamped { base, rate } => Ok(base.ddx(x, t)? * (1.0 + rate * t)),
            SolubilityField::Scaled { base, factor } => Ok(base.ddx(x, t)? * factor),
            SolubilityField::Offset { base, .. } => base.ddx(x, t),
            SolubilityField::Tabulated { xs, values } => {
                let i = segment_index(xs, x)?;
                Ok((values[i + 1] - values[i]) / (xs[i + 1] - xs[i]))
            }
        }
    }

    /// Interior breakpoints where the field may jump (layered fields only).
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            SolubilityField::Layered { breakpoints, .. } => breakpoints.clone(),
            SolubilityField::TimeRamped { base, .. }
            | SolubilityField::Scaled { base, .. }
            | SolubilityField::Offset { base, .. } => base.breakpoints(),
            _ => Vec::new(),
        }
    }

    /// Jump magnitudes `|chi_star(bp+) - chi_star(bp-)|` at the breakpoints.
    pub fn jumps(&self, t: f64) -> Result<Vec<(f64, f64)>> {
        match self {
            SolubilityField::Layered { breakpoints, layers } => {
                let mut out = Vec::with_capacity(breakpoints.len());
                for (i, &bp) in breakpoints.iter().enumerate() {
                    let left = layers[i].eval(bp, t)?;
                    let right = layers[i + 1].eval(bp, t)?;
                    out.push((bp, (right - left).abs()));
                }
                Ok(out)
            }
            SolubilityField::TimeRamped { base, rate } => Ok(base
                .jumps(t)?
                .into_iter()
                .map(|(x, j)| (x, j * (1.0 + rate * t).abs()))
                .collect()),
            SolubilityField::Scaled { base, factor } => {
                Ok(base.jumps(t)?.into_iter().map(|(x, j)| (x, j * factor.abs())).collect())
            }
            SolubilityField::Offset { base, .. } => base.jumps(t),
            _ => Ok(Vec::new()),
        }
    }

    /// Is the field constant in time?
    pub fn is_static(&self) -> bool {
        match self {
            SolubilityField::TimeRamped { .. } => false,
            SolubilityField::Layered { layers, .. } => layers.iter().all(|l| l.is_static()),
            SolubilityField::Scaled { base, .. } | SolubilityField::Offset { base, .. } => {
                base.is_static()
            }
            _ => true,
        }
    }

    /// Parse the two-column `x chi_star` text format (whitespace separated;
    /// `#` starts a comment).
    pub fn parse_tabulated(text: &str) -> Result<Self> {
        let mut xs = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<f64> {
                tok.ok_or_else(|| {
                    Error::config(format!("tabulated field line {}: expected two columns", lineno + 1))
                })?
                .parse::<f64>()
                .map_err(|e| Error::config(format!("tabulated field line {}: {e}", lineno + 1)))
            };
            xs.push(parse(it.next())?);
            values.push(parse(it.next())?);
        }
        if xs.len() < 2 {
            return Err(Error::config("tabulated field needs at least two samples".to_string()));
        }
        if !xs.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::config("tabulated field abscissae must be strictly increasing".to_string()));
        }
        Ok(SolubilityField::Tabulated { xs, values })
    }
}

fn layer_index(breakpoints: &[f64], x: f64) -> usize {
    // Layer i owns (bp[i-1], bp[i]]; value at a breakpoint comes from the left.
    breakpoints.iter().position(|&bp| x <= bp).unwrap_or(breakpoints.len())
}

fn segment_index(xs: &[f64], x: f64) -> Result<usize> {
    if x < xs[0] || x > xs[xs.len() - 1] {
        return Err(Error::parameter(format!(
            "x = {x} outside tabulated range [{}, {}]",
            xs[0],
            xs[xs.len() - 1]
        )));
    }
    let mut i = xs.partition_point(|&v| v <= x);
    i = i.clamp(1, xs.len() - 1);
    Ok(i - 1)
}

fn interp_linear(xs: &[f64], values: &[f64], x: f64) -> Result<f64> {
    let i = segment_index(xs, x)?;
    let w = (x - xs[i]) / (xs[i + 1] - xs[i]);
    Ok(values[i] + w * (values[i + 1] - values[i]))
}

/// Darcy-flux field `q(x, t)` (prescribed; the pressure solve is external).
#[derive(Debug, Clone, PartialEq)]
pub enum FlowSpec {
    Constant(f64),
    Tabulated { xs: Vec<f64>, values: Vec<f64> },
}

impl FlowSpec {
    pub fn eval(&self, x: f64, _t: f64) -> Result<f64> {
        match self {
            FlowSpec::Constant(q) => Ok(*q),
            FlowSpec::Tabulated { xs, values } => interp_linear(xs, values, x),
        }
    }
}

/// Methane source `F_M / rho_l` in units of total methane per time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceSpec {
    Zero,
    Constant(f64),
}

impl SourceSpec {
    pub fn eval(&self, _x: f64, _t: f64) -> f64 {
        match self {
            SourceSpec::Zero => 0.0,
            SourceSpec::Constant(v) => *v,
        }
    }
}

/// Prescribed flow data: Darcy flux, diffusivity, source.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub q: FlowSpec,
    pub d_m: f64,
    pub source: SourceSpec,
}

impl FlowField {
    pub fn new(q: FlowSpec, d_m: f64, source: SourceSpec) -> Result<Self> {
        if d_m < 0.0 || !d_m.is_finite() {
            return Err(Error::parameter(format!("diffusivity must be >= 0, got {d_m}")));
        }
        Ok(FlowField { q, d_m, source })
    }
}

/// Regularization band half-width scaling, `eps = alpha * h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizationParams {
    pub alpha: f64,
}

impl RegularizationParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::parameter(format!("regularization alpha must be > 0, got {alpha}")));
        }
        Ok(RegularizationParams { alpha })
    }

    pub fn epsilon(&self, h: f64) -> f64 {
        self.alpha * h
    }
}

/// Sharp flux `f = q * min(chi_star, u)`.
pub fn flux_eval(q_val: f64, chi_star: f64, u: f64) -> f64 {
    q_val * chi_star.min(u)
}

/// C2 regularized flux: equals `flux_eval` outside the band
/// `[chi_star - eps, chi_star + eps]`; inside, the quintic Hermite join of
/// the two linear branches. Monotone nondecreasing in `u` for `q_val >= 0`.
pub fn flux_reg_eval(q_val: f64, chi_star: f64, u: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::parameter(format!("regularization eps must be > 0, got {eps}")));
    }
    if eps >= chi_star {
        return Err(Error::parameter(format!(
            "regularization band eps = {eps} must stay below chi_star = {chi_star}"
        )));
    }
    if u <= chi_star - eps || u >= chi_star + eps {
        return Ok(flux_eval(q_val, chi_star, u));
    }
    // On s in [0,1] with u = (chi_star - eps) + 2*eps*s the join is
    // g(s) = s - s^3 + s^4/2: g(0)=0, g'(0)=1, g''(0)=0 match the linear
    // inflow branch; g(1)=1/2, g'(1)=0, g''(1)=0 match the plateau.
    // g'(s) = (1-s)^2 (1+2s) >= 0, so the join is monotone.
    let s = (u - (chi_star - eps)) / (2.0 * eps);
    let g = s - s.powi(3) + 0.5 * s.powi(4);
    Ok(q_val * ((chi_star - eps) + 2.0 * eps * g))
}

/// How a warming scenario maps ramped reference conditions to a new field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WarmingLaw {
    /// Keep the base field unchanged.
    Frozen,
    /// `chi_star(x, t) = chi_star_0(x) * (1 + c_p * dP_ref(t) + c_t * dT_ref(t))`
    /// with sensitivities per Pa and per K.
    AffineRamp { c_p: f64, c_t: f64 },
}

/// Sea-level and seafloor-temperature ramp driving the macro-step
/// solubility refresh.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmingScenario {
    pub base: SolubilityField,
    /// Reference (seafloor) depth at t = 0, m below sea level.
    pub d_ref0: f64,
    /// Reference temperature at t = 0, K.
    pub t_ref0: f64,
    /// Sea level rise rate, m per year.
    pub sea_rise_rate: f64,
    /// Seafloor temperature rise rate, K per year.
    pub temp_rise_rate: f64,
    /// Hydrostatic pressure gradient, Pa per m of depth.
    pub g_h: f64,
    /// Geothermal gradient, K per m of depth.
    pub g_t: f64,
    /// Sea water density, kg/m^3.
    pub rho_l: f64,
    /// Gravity, m/s^2.
    pub g: f64,
    /// Depth below sea level of the grid origin x = 0; x points upward, so
    /// `d_sf(x) = d_sf0 - x`.
    pub d_sf0: f64,
    pub law: WarmingLaw,
}

impl WarmingScenario {
    pub fn d_ref(&self, t: f64) -> f64 {
        self.d_ref0 + self.sea_rise_rate * t
    }

    pub fn t_ref(&self, t: f64) -> f64 {
        self.t_ref0 + self.temp_rise_rate * t
    }

    /// `P_ref(t) = rho_l * g * D_ref(t)` in Pa.
    pub fn p_ref(&self, t: f64) -> f64 {
        self.rho_l * self.g * self.d_ref(t)
    }

    pub fn depth_below_sea(&self, x: f64) -> f64 {
        self.d_sf0 - x
    }

    /// `P(x,t) = P_ref(t) + G_H (d_sf(x) - D_ref(t))`.
    pub fn pressure_at(&self, x: f64, t: f64) -> f64 {
        self.p_ref(t) + self.g_h * (self.depth_below_sea(x) - self.d_ref(t))
    }

    /// `T(x,t) = T_ref(t) + G_T (d_sf(x) - D_ref(t))`.
    pub fn temperature_at(&self, x: f64, t: f64) -> f64 {
        self.t_ref(t) + self.g_t * (self.depth_below_sea(x) - self.d_ref(t))
    }
}

/// Recompute the solubility field for the ramped conditions at time `t`.
///
/// With the frozen law (or at `t = 0`) this returns the base field itself.
pub fn warming_update(scenario: &WarmingScenario, t: f64) -> Result<SolubilityField> {
    if t < 0.0 {
        return Err(Error::parameter(format!("warming_update requires t >= 0, got {t}")));
    }
    match scenario.law {
        WarmingLaw::Frozen => Ok(scenario.base.clone()),
        WarmingLaw::AffineRamp { c_p, c_t } => {
            let dp = scenario.p_ref(t) - scenario.p_ref(0.0);
            let dt = scenario.t_ref(t) - scenario.t_ref(0.0);
            let factor = 1.0 + c_p * dp + c_t * dt;
            if factor <= 0.0 {
                return Err(Error::parameter(format!(
                    "affine solubility ramp produced nonpositive factor {factor} at t = {t}"
                )));
            }
            if factor == 1.0 {
                Ok(scenario.base.clone())
            } else {
                Ok(SolubilityField::Scaled { base: Box::new(scenario.base.clone()), factor })
            }
        }
    }
}

/// Sampled bounds on the data and flux derivatives entering the stability
/// ledgers. All are conservative max-over-samples estimates at the cell
/// centers, with one-sided stencils at layer edges.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzConstants {
    /// `max |q|`.
    pub l_q: f64,
    /// `max |q_x|`.
    pub l_qx: f64,
    /// `max |chi_star_x|` within layers.
    pub l_chistar: f64,
    /// `max |chi_star_t|`.
    pub l3: f64,
    /// `max { |f_xu|, |f_xx| }` over the smooth flux branches.
    pub l1: f64,
    /// `max { |f_u|, |f_x| }`.
    pub l2: f64,
    /// Breakpoint jump magnitudes of a layered field, reported separately.
    pub chi_star_jumps: Vec<(f64, f64)>,
}

/// Estimate the ledger constants for a field/flow pair over `[0, t_final]`,
/// with `u_max` bounding the totals the run can reach.
pub fn lipschitz_constants(
    field: &SolubilityField,
    flow: &FlowField,
    grid: &Grid1D,
    u_max: f64,
    t_final: f64,
) -> Result<LipschitzConstants> {
    let h = grid.h();
    let centers: Vec<f64> = (0..grid.m()).map(|j| grid.center(j)).collect();
    // Split the sample set at layer breakpoints so stencils never straddle a jump.
    let mut segments: Vec<Vec<f64>> = Vec::new();
    let bps = field.breakpoints();
    let mut current = Vec::new();
    let mut bp_iter = bps.iter().copied().peekable();
    for &x in &centers {
        while let Some(&bp) = bp_iter.peek() {
            if x > bp {
                bp_iter.next();
                if !current.is_empty() {
                    segments.push(std::mem::take(&mut current));
                }
            } else {
                break;
            }
        }
        current.push(x);
    }
    if !current.is_empty() {
        segments.push(current);
    }

    let time_samples: Vec<f64> = if field.is_static() || t_final <= 0.0 {
        vec![0.0]
    } else {
        (0..=4).map(|i| t_final * (i as f64) / 4.0).collect()
    };

    let mut c = LipschitzConstants {
        l_q: 0.0,
        l_qx: 0.0,
        l_chistar: 0.0,
        l3: 0.0,
        l1: 0.0,
        l2: 0.0,
        chi_star_jumps: field.jumps(0.0)?,
    };

    for &t in &time_samples {
        for seg in &segments {
            let q: Vec<f64> = seg.iter().map(|&x| flow.q.eval(x, t)).collect::<Result<_>>()?;
            let cs: Vec<f64> = seg.iter().map(|&x| field.eval(x, t)).collect::<Result<_>>()?;
            let qcs: Vec<f64> = q.iter().zip(&cs).map(|(a, b)| a * b).collect();

            let q1 = fd_first(&q, h);
            let q2 = fd_second(&q, h);
            let cs1 = fd_first(&cs, h);
            let qcs1 = fd_first(&qcs, h);
            let qcs2 = fd_second(&qcs, h);

            for i in 0..seg.len() {
                c.l_q = c.l_q.max(q[i].abs());
                c.l_qx = c.l_qx.max(q1[i].abs());
                c.l_chistar = c.l_chistar.max(cs1[i].abs());
                // f_xu = q_x below the corner; f_xx = (q chi_star)_xx above it
                // and q_xx * u below it.
                c.l1 = c.l1.max(q1[i].abs()).max(qcs2[i].abs()).max(q2[i].abs() * u_max);
                // f_u = q; f_x = (q chi_star)_x above the corner, q_x * u below.
                c.l2 = c.l2.max(q[i].abs()).max(qcs1[i].abs()).max(q1[i].abs() * u_max);
            }
        }
        // Time derivative of chi_star by forward differences in t.
        if !field.is_static() && t_final > 0.0 {
            let dt = t_final / 64.0;
            for &x in &centers {
                let d = (field.eval(x, t + dt)? - field.eval(x, t)?) / dt;
                c.l3 = c.l3.max(d.abs());
            }
        }
    }
    Ok(c)
}

fn fd_first(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    for i in 0..n {
        out[i] = if i == 0 {
            (v[1] - v[0]) / h
        } else if i == n - 1 {
            (v[n - 1] - v[n - 2]) / h
        } else {
            (v[i + 1] - v[i - 1]) / (2.0 * h)
        };
    }
    out
}

fn fd_second(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    let mut out = vec![0.0; n];
    if n < 3 {
        return out;
    }
    for i in 0..n {
        let k = i.clamp(1, n - 2);
        out[i] = (v[k + 1] - 2.0 * v[k] + v[k - 1]) / (h * h);
    }
    out
}
