mod common;

use proptest::prelude::*;

use common::*;
use pdflow::quantize::{
    lp_filters, op_eps_apply, operator_norm_probe, sample_weyl, sobolev_norm, weyl_apply, BracketMultiplier, LinearOperator, OpEps, StateVector,
    WeylOperator,
};
use pdflow::symdsl::{sample, symbol_norm, GridSpec, MatrixSymbol};
use pdflow::C64;

fn grid(eps: f64) -> GridSpec {
    GridSpec::new(1, 64, 31, eps).unwrap()
}

fn combo(a: C64, u: &StateVector, b: C64, v: &StateVector) -> StateVector {
    let mut w = u.clone();
    w.scale_mut(a);
    w.axpy(b, v);
    w
}

/// Bound for symbols whose x-dependence has Fourier modes `|m| ≤ 2`: writing
/// `a = Σ_m e^{imx} â_m(ξ)` each term maps `H^{s+ord}_ε → H^s_ε` with norm at most
/// `2^{|s|/2}⟨εm⟩^{|s|} sup|â_m⟨ξ⟩^{-ord}|` (Peetre), and `sup|â_m⟨ξ⟩^{-ord}|`
/// is at most the entry supremum, itself below `‖a‖₀`. An `n × n` matrix
/// adds a factor `n`.
fn a_priori(n: usize, s: f64, eps: f64) -> f64 {
    let modes = 5.0;
    n as f64 * modes * 2f64.powf(s.abs() / 2.0) * (1.0 + 4.0 * eps * eps).powf(s.abs() / 2.0)
}

fn fitted_within(ratios: &[f64], bound: f64) -> Result<f64, TestCaseError> {
    let c = ratios.iter().cloned().fold(0.0, f64::max);
    if c <= bound {
        Ok(c)
    } else {
        Err(TestCaseError::fail(format!("fitted constant {c} exceeds the a priori bound {bound}; ratios {ratios:?}")))
    }
}

proptest! {
    #![proptest_config(config(2, 0x9a01))]

    /// One constant bounds `‖op_ε(a)‖ / ‖a‖₀` for every symbol and every ε.
    #[test]
    fn calderon_vaillancourt(cs in prop::collection::vec(coeffs(2, 1.0), 20)) {
        let mut rng = rng(11);
        let mut semi = Vec::new();
        for e in [3, 5] {
            let g = grid(2f64.powi(-e));
            for c in &cs {
                let a = symbol(2, c);
                let a = a.scale(C64::new(1.0 / symbol_norm(&a, 0, &g).unwrap(), 0.0));
                let op = OpEps::from_symbol(&a, &g, 0.0).unwrap();
                semi.push(operator_norm_probe(&op, 4, &mut rng).value);
            }
        }
        // Weyl quantization is classical: the norm is sampled at ξ = k/2 so the
        // extended lattice covers every kernel frequency
        let g = grid(0.5);
        let weyl: Vec<f64> = cs
            .iter()
            .map(|c| {
                let a = symbol(2, c);
                let a = a.scale(C64::new(1.0 / symbol_norm(&a, 0, &g).unwrap(), 0.0));
                operator_norm_probe(&WeylOperator::from_symbol(&a, &g).unwrap(), 4, &mut rng).value
            })
            .collect();
        fitted_within(&semi, a_priori(2, 0.0, 0.0))?;
        fitted_within(&weyl, a_priori(2, 0.0, 0.0))?;
    }

    #[test]
    fn sobolev_continuity(cs in prop::collection::vec(coeffs(2, 1.0), 8), seed in 0u64..1000) {
        let mut rng = rng(seed);
        for (src, m) in [(None, 0.0), (Some("[[cos(x1)*xi1, 1], [xi1, sin(x1)]]"), 1.0)] {
            let orders = [-2.0, 0.0, 2.0];
            let mut ratios = vec![Vec::new(); orders.len()];
            for e in [3, 5] {
                let eps = 2f64.powi(-e);
                let g = GridSpec::new(1, 32, 15, eps).unwrap();
                for c in &cs {
                    let a = match src {
                        Some(t) => MatrixSymbol::parse(t, 1, m).unwrap().add(&symbol(2, c).with_order(m)).unwrap(),
                        None => symbol(2, c),
                    };
                    let k = symbol_norm(&a, 0, &g).unwrap() + eps * symbol_norm(&a, 1, &g).unwrap();
                    let u = StateVector::random_bandlimited(g, 2, &mut rng);
                    let au = op_eps_apply(&sample(&a, &g, true), &u).unwrap();
                    for (r, s) in ratios.iter_mut().zip(orders) {
                        r.push(sobolev_norm(&au, s, eps) / (k * sobolev_norm(&u, s + m, eps)));
                    }
                }
            }
            for (r, s) in ratios.iter().zip(orders) {
                fitted_within(r, a_priori(2, s, 0.125)).map_err(|e| TestCaseError::fail(format!("s={s} m={m}: {e}")))?;
            }
        }
    }
}

proptest! {
    #![proptest_config(config(16, 0x9a02))]

    #[test]
    fn operators_are_linear(c in coeffs(2, 1.0), z in (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64), seed in 0u64..1000) {
        let (a, b) = (C64::new(z.0, z.1), C64::new(z.2, z.3));
        let g = GridSpec::new(1, 32, 15, 0.125).unwrap();
        let mut rng = rng(seed);
        let u = StateVector::random_bandlimited(g, 2, &mut rng);
        let v = StateVector::random_bandlimited(g, 2, &mut rng);
        let w = combo(a, &u, b, &v);
        let sym = symbol(2, &c);
        let banded = OpEps::from_symbol(&sym, &g, 0.0).unwrap();
        let weyl_s = sample_weyl(&sym, &g).unwrap();
        let bank = lp_filters(2, &g).unwrap();
        let bracket = BracketMultiplier::new(g, 2, -1.5, 0.125);
        let sampled = sample(&sym, &g, true);
        let ops: Vec<Box<dyn Fn(&StateVector) -> StateVector>> = vec![
            Box::new(|x| banded.apply(x)),
            Box::new(|x| op_eps_apply(&sampled, x).unwrap()),
            Box::new(|x| weyl_apply(&weyl_s, x).unwrap()),
            Box::new(|x| bracket.apply(x)),
            Box::new(|x| bank.apply_phi(2, x)),
            Box::new(|x| bank.apply_psi(3, x)),
        ];
        for (i, op) in ops.iter().enumerate() {
            let lhs = op(&w);
            let rhs = combo(a, &op(&u), b, &op(&v));
            prop_assert!(lhs.sub(&rhs).l2() <= 1e-12 * lhs.l2().max(1.0), "operator {i}");
        }
    }

    #[test]
    fn weyl_form_of_real_symbol_is_real(c in coeffs(1, 1.0), seed in 0u64..1000) {
        let g = GridSpec::new(1, 64, 31, 0.5).unwrap();
        let a = symbol(1, &c);
        let ws = sample_weyl(&a, &g).unwrap();
        let mut rng = rng(seed);
        for _ in 0..4 {
            let u = StateVector::random_bandlimited(g, 1, &mut rng);
            let form = weyl_apply(&ws, &u).unwrap().inner(&u);
            prop_assert!(form.im.abs() < 1e-10 * u.l2().powi(2), "{form}");
        }
    }
}
