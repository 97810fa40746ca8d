mod common;

use proptest::prelude::*;

use common::*;
use pdflow::bounds::{gamma_sup, instability_experiment, lower_bound_experiment, upper_bound_experiment, InstabilitySettings, SweepSettings};
use pdflow::flow::QuadraticNonlinearity;
use pdflow::symdsl::{GridSpec, MatrixSymbol};
use pdflow::C64;

fn grid() -> GridSpec {
    GridSpec::new(1, 16, 7, 0.25).unwrap()
}

fn sweep() -> SweepSettings {
    SweepSettings { n_x: 32, k_max: 15, enforce_guard: false, ..Default::default() }
}

/// `P diag(l1, l2) P⁻¹` as symbol text.
fn similar(p: [f64; 4], l1: f64, l2: f64) -> String {
    let det = p[0] * p[3] - p[1] * p[2];
    let inv = [p[3] / det, -p[1] / det, -p[2] / det, p[0] / det];
    let pd = [p[0] * l1, p[1] * l2, p[2] * l1, p[3] * l2];
    let m = [pd[0] * inv[0] + pd[1] * inv[2], pd[0] * inv[1] + pd[1] * inv[3], pd[2] * inv[0] + pd[3] * inv[2], pd[2] * inv[1] + pd[3] * inv[3]];
    format!("[[{:.17e}, {:.17e}], [{:.17e}, {:.17e}]]", m[0], m[1], m[2], m[3])
}

fn conditioned() -> impl Strategy<Value = [f64; 4]> {
    [-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64].prop_filter("well conditioned", |p| (p[0] * p[3] - p[1] * p[2]).abs() > 0.3)
}

proptest! {
    #![proptest_config(config(24, 0xb0a1))]

    #[test]
    fn spectral_rate_below_garding_rate(c in coeffs(2, 1.0)) {
        let r = gamma_sup(&symbol(2, &c), &grid());
        prop_assert!(r.gamma_spec <= r.gamma_garding + 1e-12, "{} > {}", r.gamma_spec, r.gamma_garding);
    }

    #[test]
    fn rates_coincide_for_normal_symbols(p in coeffs(1, 1.0), q in coeffs(1, 1.0), r in coeffs(1, 1.0), s in coeffs(1, 1.0)) {
        let (p, q, r, s) = (entry_text(&p), entry_text(&q), entry_text(&r), entry_text(&s));
        let hermitian = MatrixSymbol::parse(&format!("[[{p}, {q}], [{q}, {r}]]"), 1, 0.0).unwrap();
        let h = gamma_sup(&hermitian, &grid());
        prop_assert!((h.gamma_spec - h.gamma_garding).abs() < 1e-10, "{} vs {}", h.gamma_spec, h.gamma_garding);
        // scalar real part plus a skew-hermitian matrix
        let normal = MatrixSymbol::parse(&format!("[[{p} + i*({q}), i*({r})], [i*({r}), {p} + i*({s})]]"), 1, 0.0).unwrap();
        let n = gamma_sup(&normal, &grid());
        prop_assert!((n.gamma_spec - n.gamma_garding).abs() < 1e-10, "{} vs {}", n.gamma_spec, n.gamma_garding);
    }

    #[test]
    fn off_diagonal_gap(a in 0.05..5.0f64, b in 0.05..5.0f64) {
        let r = gamma_sup(&MatrixSymbol::parse(&format!("[[0, {a:.17e}], [{b:.17e}, 0]]"), 1, 0.0).unwrap(), &grid());
        let want = (a + b) / 2.0 - (a * b).sqrt();
        prop_assert!((r.gamma_garding - r.gamma_spec - want).abs() < 1e-10);
    }

    #[test]
    fn jordan_gap(l in -2.0..2.0f64) {
        let r = gamma_sup(&MatrixSymbol::parse(&format!("[[{l:.17e}, 1], [0, {l:.17e}]]"), 1, 0.0).unwrap(), &grid());
        prop_assert!((r.gamma_garding - r.gamma_spec - 0.5).abs() < 1e-10, "{}", r.gamma_garding - r.gamma_spec);
    }
}

proptest! {
    #![proptest_config(config(8, 0xb0a2))]

    #[test]
    fn constant_rates_are_bracketed(p in conditioned(), l1 in 0.2..1.0f64, gap in 1.0..2.0f64) {
        let m = MatrixSymbol::parse(&similar(p, l1, l1 - gap), 1, 0.0).unwrap();
        let eps = [2f64.powi(-5)];
        let up = upper_bound_experiment(&m, &eps, 2.0, &sweep()).unwrap();
        prop_assert!(up.pass, "upper {:?} vs {}", up.rows[0].rate, l1);
        let lo = lower_bound_experiment(&m, &eps, 2.0, 0.5, &sweep()).unwrap();
        prop_assert!(lo.pass, "lower {:?} vs {}", lo.rows[0].rate, l1);
        prop_assert!((up.rates.gamma_spec - l1).abs() < 1e-9);
    }

    #[test]
    fn scalar_rates_are_bracketed(c0 in -0.5..0.5f64, c1 in -0.5..0.5f64, c2 in -0.5..0.5f64) {
        let m = MatrixSymbol::parse(&format!("{c0:.6} + ({c1:.6})*cos(x1) + ({c2:.6})*sin(2*x1)"), 1, 0.0).unwrap();
        let eps = [2f64.powi(-5)];
        let up = upper_bound_experiment(&m, &eps, 2.0, &sweep()).unwrap();
        prop_assert!(up.pass, "upper {:?} vs {}", up.rows[0].rate, up.rates.gamma_spec);
        let lo = lower_bound_experiment(&m, &eps, 2.0, 0.5, &sweep()).unwrap();
        prop_assert!(lo.pass, "lower {:?} vs {}", lo.rows[0].rate, lo.rates.gamma_spec);
    }
}

proptest! {
    #![proptest_config(config(4, 0xb0a3))]

    #[test]
    fn instability_grows_at_the_spectral_rate(g0 in 0.3..0.7f64, c1 in -0.3..0.3f64, b in -1.0..1.0f64) {
        let m = MatrixSymbol::parse(&format!("{g0:.6} + ({c1:.6})*cos(x1)"), 1, 0.0).unwrap();
        let s = InstabilitySettings {
            n_x: 64,
            k_max: 31,
            ..Default::default()
        };
        let rep = instability_experiment(&m, &QuadraticNonlinearity::scalar(C64::new(b, 0.0)), 2.0, 1.0, &[2f64.powi(-6)], &s).unwrap();
        prop_assert!(rep.rows[0].rate_error <= 0.1, "rate error {}", rep.rows[0].rate_error);
    }
}
