mod common;

use std::path::Path;

use proptest::prelude::*;

use common::*;
use pdflow::cli::{report_json, run, validate};

fn eps_list(min: usize) -> impl Strategy<Value = String> {
    prop::collection::vec(3i32..8, min..min + 3).prop_map(|v| v.iter().map(|e| format!("2^-{e}")).collect::<Vec<_>>().join(", "))
}

fn constant_matrix() -> impl Strategy<Value = String> {
    [-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64].prop_map(|m| format!("[[{:.4}, {:.4}], [{:.4}, {:.4}]]", m[0], m[1], m[2], m[3]))
}

fn config_text() -> impl Strategy<Value = String> {
    let bounds = (prop::bool::ANY, constant_matrix(), eps_list(1), 2usize..12, 0.05..0.5f64, prop::bool::ANY).prop_map(
        |(lower, m, eps, samples, tol, guard)| {
            let kind = if lower { "bounds-lower" } else { "bounds-upper" };
            format!("kind = {kind}\nsymbol = {m}\nn_x = 32\neps = {eps}\n\n[{kind}]\nsamples = {samples}\ntol = {tol:.3}\nenforce_guard = {guard}\n")
        },
    );
    let compose =
        (constant_matrix(), constant_matrix(), eps_list(3), prop::collection::vec(0usize..3, 1..4), 0u64..100).prop_map(|(a, b, eps, n, seed)| {
            let n: Vec<String> = n.iter().map(|v| v.to_string()).collect();
            format!("kind = compose\nsymbol = {a}\neps = {eps}\nseed = {seed}\n\n[compose]\nsymbol2 = {b}\nn = {}\n", n.join(", "))
        });
    let approx = (coeffs(1, 1.0), eps_list(1), 1usize..16, 0.5..2.0f64)
        .prop_map(|(c, eps, nodes, t)| format!("kind = approx\nsymbol = {}\neps = {eps}\nT = {t:.3}\n\n[approx]\nnodes = {nodes}\n", entry_text(&c)));
    let garding = (0.1..0.9f64, 1usize..4, 4usize..7).prop_map(|(theta, lo, hi)| {
        format!("kind = garding\nsymbol = sin(x1)^2\nn_x = 64\ntheta = {theta:.3}\n\n[garding]\nj_min = {lo}\nj_max = {hi}\n")
    });
    prop_oneof![bounds, compose, approx, garding]
}

proptest! {
    #![proptest_config(config(48, 0xc11))]

    #[test]
    fn echo_round_trips(text in config_text()) {
        let cfg = validate(&text, Path::new(".")).unwrap();
        let echo = cfg.to_text();
        let again = validate(&echo, Path::new(".")).unwrap();
        prop_assert_eq!(again.kind, cfg.kind);
        prop_assert_eq!(&again.eps, &cfg.eps);
        prop_assert_eq!(again.to_text(), echo);
    }

    #[test]
    fn unknown_keys_are_rejected(text in config_text(), key in "[a-z]{3,8}") {
        let bad = format!("zz_{key} = 1\n{text}");
        prop_assert!(validate(&bad, Path::new(".")).is_err());
    }
}

proptest! {
    #![proptest_config(config(6, 0xc12))]

    #[test]
    fn reports_are_deterministic(m in constant_matrix(), seed in 0u64..1000) {
        let text = format!("kind = bounds-upper\nsymbol = {m}\nn_x = 16\neps = 2^-4\nseed = {seed}\n\n[bounds-upper]\nenforce_guard = false\n");
        let cfg = validate(&text, Path::new(".")).unwrap();
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        prop_assert_eq!(report_json(&a.report).unwrap(), report_json(&b.report).unwrap());
        prop_assert!(a.report.checks.iter().all(|c| !c.tolerance.is_empty()));
    }
}
