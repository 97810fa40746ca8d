//! Semiclassical and Weyl quantization on the periodic grid, semiclassical
//! Sobolev norms, operator-norm probes and Littlewood–Paley filter banks.
//!
//! Fourier coefficients follow the Fourier-series convention
//! `û_k = (1/n) Σ_j u_j e^{-ik·x_j}`, so `op_ε(a)u(x) = Σ_k e^{ik·x} a(x, εk) û_k`
//! carries no extra normalization constant and the discrete L² norm
//! (mean square over the grid) equals `(Σ_k |û_k|²)^{1/2}`.

pub mod fft;
pub mod io;
pub mod lp;
pub mod op;
pub mod opnorm;
pub mod sobolev;
pub mod state;
pub mod weyl;

pub use lp::{lp_filters, DyadicFilterBank};
pub use op::{op_eps_apply, project_lattice, BracketMultiplier, Compose, FnOperator, Identity, LinearCombination, LinearOperator, OpEps};
pub use opnorm::{assemble_dense, operator_norm_probe, NormEstimate, NormMethod, NormProbe};
pub use sobolev::sobolev_norm;
pub use state::{dft_full, from_fourier, idft_full, to_fourier, FourierState, StateVector};
pub use weyl::{sample_weyl, weyl_apply, weyl_mid, WeylOperator, WeylSample};
