//! Matrix-valued symbols as expression trees, with sampling on periodic grids,
//! symbol norms and order-class checks.

pub mod cutoff;
pub mod expr;
pub mod grid;
pub mod multi;
pub mod norm;
pub mod parse;
pub mod symbol;

pub use expr::{Node, SymbolExpr, Var};
pub use grid::{japanese, GridSpec};
pub use norm::{check_class, grid_rates, norm_derivative_range, symbol_norm, ClassEntry, ClassReport, GridRates};
pub use parse::{parse_expr, parse_matrix, print_matrix};
pub use symbol::{sample, sample_at, DerivativeTable, MatrixSymbol, SampledSymbol, DEFAULT_DERIV_CAP};
