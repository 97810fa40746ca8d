//! Solution operators `S(τ;t)` of the pointwise ODE `∂_t S = M S`, the
//! corrector hierarchy `S_q`, the approximate solution operator
//! `Σ = S + Σ_q ε^q S_q`, its residual, and the Duhamel solver built on it.

mod approx;
mod duhamel;
mod family;
mod guard;
mod hierarchy;
mod residual;

pub use approx::{approx_datum, approximation_experiment, ApproxReport, ApproxRow, ApproxSettings};
pub use duhamel::{duhamel_solve, DuhamelOptions, DuhamelResult};
pub use family::{
    assemble_sigma, default_corrector_dt, fit_step, q0_from, solve_correctors, solve_family, solve_s, CorrectorFamily, FamilyOptions, ModeWindow,
    NodeSelection, FAMILY_MAGIC,
};
pub use guard::{eps_guard, eps_guard_with, EpsGuardReport, GuardConstants};
pub use hierarchy::{coupling_terms, Expansion, Hierarchy, PointValues};
pub use residual::{residual_probe, residual_probe_with, ResidualSettings};
