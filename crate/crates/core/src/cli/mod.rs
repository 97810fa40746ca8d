//! Declarative experiment configs, the runner behind the `pdflow` binary, and
//! the shipped example configs.
//!
//! A config is line-oriented `key = value` text. Keys shared by every kind
//! come first; kind-specific keys go in a section named after the kind:
//!
//! ```text
//! kind = bounds-upper
//! symbol = [[0, 4], [1, 0]]
//! eps = 2^-5, 2^-6
//!
//! [bounds-upper]
//! enforce_guard = false
//! ```
//!
//! `#` starts a comment. Unknown keys are errors.

mod config;
mod run;

pub use config::{
    validate, ApproxParams, BoundsParams, ComposeParams, ExperimentConfig, GardingParams, InstabilityParams, Kind, KindParams, SymbolSource,
    SymbolSpec,
};
pub use run::{report_json, run, with_workers, workers_from_env, write_outputs, Check, ExperimentReport, RunOutput, Series, Status, Timings};

/// `(name, config text)` of every shipped example.
pub const EXAMPLES: [(&str, &str); 9] = [
    ("approx-x-only", include_str!("../../configs/approx-x-only.conf")),
    ("approx-generic", include_str!("../../configs/approx-generic.conf")),
    ("compose-xi-only", include_str!("../../configs/compose-xi-only.conf")),
    ("compose-generic", include_str!("../../configs/compose-generic.conf")),
    ("bounds-upper-constant", include_str!("../../configs/bounds-upper-constant.conf")),
    ("bounds-upper", include_str!("../../configs/bounds-upper.conf")),
    ("bounds-lower", include_str!("../../configs/bounds-lower.conf")),
    ("instability", include_str!("../../configs/instability.conf")),
    ("garding", include_str!("../../configs/garding.conf")),
];

pub fn example(name: &str) -> Option<&'static str> {
    EXAMPLES.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// First comment line of an example.
pub fn example_summary(text: &str) -> &str {
    text.lines().find_map(|l| l.trim().strip_prefix('#')).map(str::trim).unwrap_or("")
}
