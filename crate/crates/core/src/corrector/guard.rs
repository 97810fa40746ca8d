use serde::Serialize;

use super::family::q0_from;
use crate::error::Result;
use crate::symdsl::{grid_rates, norm_derivative_range, symbol_norm, GridSpec, MatrixSymbol};

/// Calibration constants of the ε-smallness condition. The defaults are
/// artifact choices, not values derived from the estimates.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GuardConstants {
    pub c0: f64,
    /// `C(d)` as `c_d_slope·d + c_d_offset`.
    pub c_d_slope: usize,
    pub c_d_offset: usize,
    /// `N* = q0 + n_star_offset`.
    pub n_star_offset: usize,
}

impl Default for GuardConstants {
    fn default() -> Self {
        GuardConstants { c0: 1.0, c_d_slope: 2, c_d_offset: 2, n_star_offset: 2 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EpsGuardReport {
    pub eps: f64,
    /// `ε|ln ε|^{N*}`.
    pub lhs: f64,
    /// `C0 / ‖M‖_r`.
    pub threshold: f64,
    pub pass: bool,
    /// `threshold / lhs`.
    pub margin: f64,
    pub norm: f64,
    pub r: usize,
    pub gamma: f64,
    pub q0: usize,
    pub n_star: usize,
    pub constants: GuardConstants,
    /// Always `true`: the constants are calibrations.
    pub calibrated_constants: bool,
}

/// `ε|ln ε|^{N*} < C0 ‖M‖_{[γT]+C(d)}^{-1}` with `γ = max Re σ(M)` on the grid.
pub fn eps_guard(eps: f64, m: &MatrixSymbol, t: f64, g: &GridSpec) -> Result<EpsGuardReport> {
    eps_guard_with(eps, m, t, g, &GuardConstants::default())
}

pub fn eps_guard_with(eps: f64, m: &MatrixSymbol, t: f64, g: &GridSpec, c: &GuardConstants) -> Result<EpsGuardReport> {
    let ge = g.with_eps(eps)?;
    let gamma = grid_rates(m, &ge, 0.0).gamma_spec.max(0.0);
    let q0 = q0_from(gamma, t);
    let n_star = q0 + c.n_star_offset;
    let r = (gamma * t).floor() as usize + c.c_d_slope * g.d + c.c_d_offset;
    let need = norm_derivative_range(r, g.d);
    let mm = m.clone().with_cap(need.max(m.cap()));
    let norm = symbol_norm(&mm, r, g)?;
    let lhs = eps * eps.ln().abs().powi(n_star as i32);
    let threshold = if norm > 0.0 { c.c0 / norm } else { f64::INFINITY };
    Ok(EpsGuardReport {
        eps,
        lhs,
        threshold,
        pass: lhs < threshold,
        margin: threshold / lhs,
        norm,
        r,
        gamma,
        q0,
        n_star,
        constants: *c,
        calibrated_constants: true,
    })
}
