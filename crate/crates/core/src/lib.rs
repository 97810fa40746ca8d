//! Numerical toolkit for semiclassical pseudo-differential flows on the torus.
//!
//! Symbols are expression trees in `(x, ξ)` ([`symdsl`]), quantized on a
//! periodic grid ([`quantize`]), composed by asymptotic expansion
//! ([`calculus`]). The flow `exp(t op_ε(M))` is approximated by `op_ε(Σ)` built
//! from a corrector hierarchy ([`corrector`]) and checked against a reference
//! integrator ([`flow`]). [`bounds`] and [`garding`] run the growth-rate and
//! positivity experiments; [`cli`] drives them from config files.

pub mod bounds;
pub mod calculus;
pub mod cli;
pub mod corrector;
pub mod error;
pub mod flow;
pub mod garding;
pub mod linalg;
pub mod quantize;
pub mod symdsl;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
