mod common;

use proptest::prelude::*;

use common::*;
use pdflow::bounds::gamma_sup;
use pdflow::flow::{evolve_linear, FlowOptions, Trajectory};
use pdflow::linalg::ls_fit;
use pdflow::quantize::StateVector;
use pdflow::symdsl::{GridSpec, MatrixSymbol};
use pdflow::C64;

fn fixed(dt: f64, nodes: usize) -> FlowOptions {
    FlowOptions { dt: Some(dt), refine: false, nodes, sobolev_orders: vec![], ..Default::default() }
}

fn run(m: &MatrixSymbol, u: &StateVector, t: f64, o: &FlowOptions) -> Trajectory {
    evolve_linear(m, u, t, o).unwrap()
}

proptest! {
    #![proptest_config(config(12, 0xf1a0))]

    #[test]
    fn evolve_linear_is_linear(c in coeffs(2, 1.0), z in (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64), seed in 0u64..1000) {
        let g = GridSpec::new(1, 32, 15, 0.125).unwrap();
        let m = symbol(2, &c);
        let mut rng = rng(seed);
        let u = StateVector::random_bandlimited(g, 2, &mut rng);
        let v = StateVector::random_bandlimited(g, 2, &mut rng);
        let (a, b) = (C64::new(z.0, z.1), C64::new(z.2, z.3));
        let mut w = u.clone();
        w.scale_mut(a);
        w.axpy(b, &v);
        let o = fixed(0.05, 4);
        let (tu, tv, tw) = (run(&m, &u, 1.0, &o), run(&m, &v, 1.0, &o), run(&m, &w, 1.0, &o));
        for ((su, sv), sw) in tu.states.iter().zip(&tv.states).zip(&tw.states) {
            let mut want = su.clone();
            want.scale_mut(a);
            want.axpy(b, sv);
            prop_assert!(sw.sub(&want).l2() <= 1e-10 * want.l2().max(1.0));
        }
    }

    /// Successive-difference order of the fixed-step integrator.
    #[test]
    fn time_refinement_order(c in coeffs(2, 1.0), seed in 0u64..1000) {
        let g = GridSpec::new(1, 32, 15, 0.125).unwrap();
        let m = symbol(2, &c);
        let u = StateVector::random_bandlimited(g, 2, &mut rng(seed));
        let finals: Vec<StateVector> = [0.2, 0.1, 0.05].iter().map(|dt| run(&m, &u, 2.0, &fixed(*dt, 1)).last().clone()).collect();
        let d1 = finals[0].sub(&finals[1]).l2();
        let d2 = finals[1].sub(&finals[2]).l2();
        let order = (d1 / d2).log2();
        prop_assert!((3.5..=4.5).contains(&order), "order {order} ({d1:.3e}, {d2:.3e})");
    }
}

proptest! {
    #![proptest_config(config(6, 0xf1a1))]

    /// Log-slope of `‖u(t)‖` over `[T/2, T]·|ln ε|` with `T = 4`.
    #[test]
    fn growth_rate_below_spectral_bound(c in coeffs(2, 0.3), seed in 0u64..1000) {
        let eps = 2f64.powi(-5);
        let g = GridSpec::new(1, 64, 31, eps).unwrap();
        let m = symbol(2, &c);
        let gamma = gamma_sup(&m, &g).gamma_spec;
        let u = StateVector::random_bandlimited(g, 2, &mut rng(seed));
        let horizon = 4.0 * eps.ln().abs();
        let tr = evolve_linear(&m, &u, horizon, &FlowOptions { nodes: 16, sobolev_orders: vec![], ..Default::default() }).unwrap();
        let pts: Vec<(f64, f64)> = tr.diagnostics.iter().filter(|d| d.t >= horizon / 2.0 - 1e-9).map(|d| (d.t, d.l2.ln())).collect();
        let rate = ls_fit(&pts).0;
        prop_assert!(rate <= gamma + 0.1, "rate {rate} vs γ {gamma}");
    }
}
