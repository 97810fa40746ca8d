mod common;

use proptest::prelude::*;

use common::*;
use pdflow::calculus::{diamond_k, semiclassical_remainders, sharp_q, ProbeSettings};
use pdflow::symdsl::MatrixSymbol;
use pdflow::C64;

fn close(a: &[C64], b: &[C64]) -> bool {
    let scale = a.iter().chain(b).map(|v| v.norm()).fold(1.0, f64::max);
    max_diff(a, b) <= 1e-12 * scale
}

proptest! {
    #![proptest_config(config(24, 0xca1c))]

    #[test]
    fn sharp_and_diamond_are_bilinear(c1 in coeffs(2, 1.0), c2 in coeffs(2, 1.0), c3 in coeffs(2, 1.0), q in 0usize..3, z in (-2.0..2.0f64, -2.0..2.0f64), seed in 0u64..1000) {
        let (a, b, e) = (symbol(2, &c1), symbol(2, &c2), symbol(2, &c3));
        let z = C64::new(z.0, z.1);
        for op in [sharp_q, diamond_k] {
            let base = op(&a, &b, q).unwrap();
            let left = op(&a.scale(z), &b, q).unwrap();
            let right = op(&a, &b.scale(z), q).unwrap();
            let sum = op(&a.add(&e).unwrap(), &b, q).unwrap();
            let parts = base.add(&op(&e, &b, q).unwrap()).unwrap();
            for (x, xi) in points(seed, 20) {
                let want: Vec<C64> = base.eval(&[x], &[xi], 0.0).iter().map(|v| v * z).collect();
                prop_assert!(close(&left.eval(&[x], &[xi], 0.0), &want));
                prop_assert!(close(&right.eval(&[x], &[xi], 0.0), &want));
                prop_assert!(close(&sum.eval(&[x], &[xi], 0.0), &parts.eval(&[x], &[xi], 0.0)));
            }
        }
    }

    #[test]
    fn sharp_with_identity_vanishes(c in coeffs(2, 1.0), q in 1usize..4, seed in 0u64..1000) {
        let a = symbol(2, &c);
        let id = MatrixSymbol::identity(2, 1);
        for s in [sharp_q(&a, &id, q).unwrap(), sharp_q(&id, &a, q).unwrap()] {
            prop_assert!(s.is_zero());
            for (x, xi) in points(seed, 10) {
                prop_assert!(s.eval(&[x], &[xi], 0.0).iter().all(|v| *v == C64::new(0.0, 0.0)));
            }
        }
    }

    #[test]
    fn diamond_parity_for_scalars(c1 in coeffs(1, 1.0), c2 in coeffs(1, 1.0), seed in 0u64..1000) {
        let (a, b) = (symbol(1, &c1), symbol(1, &c2));
        for k in 1..=2 {
            let ab = diamond_k(&a, &b, k).unwrap();
            let ba = diamond_k(&b, &a, k).unwrap();
            let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
            for (x, xi) in points(seed, 100) {
                let u = ab.eval(&[x], &[xi], 0.0);
                let v: Vec<C64> = ba.eval(&[x], &[xi], 0.0).iter().map(|w| w * sign).collect();
                prop_assert!(max_diff(&u, &v) <= 1e-12, "k={k}");
            }
        }
    }
}

proptest! {
    #![proptest_config(config(3, 0xca1d))]

    /// First-order accuracy of the plain product.
    #[test]
    fn product_remainder_is_first_order(c1 in coeffs(2, 0.5), c2 in coeffs(2, 0.5)) {
        let (a, b) = (symbol(2, &c1), symbol(2, &c2));
        let sweep: Vec<f64> = (3..=6).map(|e| 2f64.powi(-e)).collect();
        let r = semiclassical_remainders(&a, &b, &[0], &sweep, &ProbeSettings::default()).unwrap();
        let slope = r[0].slope.unwrap();
        prop_assert!((slope - 1.0).abs() <= 0.2, "slope {slope}");
    }
}
