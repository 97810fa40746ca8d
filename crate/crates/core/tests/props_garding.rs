mod common;

use proptest::prelude::*;

use common::*;
use pdflow::garding::{dyadic_blocks_range, observation_time, BlockFlow, DyadicBlock, GardingSettings};
use pdflow::quantize::{lp_filters, sobolev_norm, LinearOperator, StateVector, WeylOperator};
use pdflow::symdsl::{GridSpec, MatrixSymbol};

const THETA: f64 = 0.5;

/// `(c0 + c1 cos x + c2 sin 2x + c3 ξ⟨ξ⟩⁻¹)²`, nonnegative and of order 0.
fn square(c: &[f64]) -> String {
    format!("(({:.6}) + ({:.6})*cos(x1) + ({:.6})*sin(2*x1) + ({:.6})*xi1*bracket(-1))^2", c[0], c[1], c[2], c[3])
}

fn blocks(src: &str, j_min: usize, j_max: usize) -> Vec<DyadicBlock> {
    let a = MatrixSymbol::parse(src, 1, 0.0).unwrap();
    let g = GridSpec::new(1, 32, 15, 0.5).unwrap();
    let s = GardingSettings { normalize: false, ..Default::default() };
    dyadic_blocks_range(&a, THETA, j_min, j_max, &g, &s).unwrap()
}

fn random_state(g: GridSpec, seed: u64) -> StateVector {
    let full = GridSpec::with_full_band(1, g.n_x, 0.5).unwrap();
    StateVector { grid: g, ..StateVector::random_bandlimited(full, 1, &mut rng(seed)) }
}

fn form(op: &WeylOperator, u: &StateVector) -> f64 {
    op.apply(u).inner(u).re
}

fn symbols() -> impl Strategy<Value = String> {
    prop_oneof![Just("sin(x1)^2".to_string()), prop::collection::vec(-1.0..1.0f64, 4).prop_map(|c| square(&c)),]
}

proptest! {
    #![proptest_config(config(10, 0x9a4d))]

    #[test]
    fn block_form_grows_along_the_flow(src in symbols(), j in 3usize..6, seed in 0u64..1000) {
        let b = &blocks(&src, j, j)[0];
        let f = BlockFlow::new(b).unwrap();
        let u = random_state(b.grid, seed);
        let scale = f.eigenvalues.iter().map(|l| l.abs()).fold(0.0, f64::max).max(1.0) * u.l2().powi(2);
        let mut last = f64::NEG_INFINITY;
        for step in 0..=16 {
            let y = f.apply(0.25 * step as f64, &u);
            let v = f.form(&y);
            prop_assert!(v >= last - 1e-8 * scale, "step {step}: {v} < {last}");
            last = v;
        }
    }

    #[test]
    fn energy_identity(src in symbols(), j in 3usize..6, seed in 0u64..1000, s in 0.0..3.0f64) {
        let b = &blocks(&src, j, j)[0];
        let f = BlockFlow::new(b).unwrap();
        let w = random_state(b.grid, seed);
        let h = 1e-4;
        let e = |t: f64| f.apply(t, &w).l2().powi(2);
        let fd = (e(s + h) - e(s - h)) / (2.0 * h);
        let want = 2.0 * f.form(&f.apply(s, &w));
        prop_assert!((fd - want).abs() <= 1e-6 * want.abs().max(e(s)), "{fd} vs {want}");
    }

    #[test]
    fn flow_is_invertible(src in symbols(), j in 3usize..6, seed in 0u64..1000, t in 0.0..8.0f64) {
        let b = &blocks(&src, j, j)[0];
        let f = BlockFlow::new(b).unwrap();
        let u = random_state(b.grid, seed);
        let back = f.apply(t, &f.apply(-t, &u));
        prop_assert!(back.sub(&u).l2() <= 1e-10 * u.l2() * (t * f.min_eigenvalue().abs().max(1.0)).exp().max(1.0));
    }

    #[test]
    fn passing_flow_test_means_nonnegative_form(src in symbols(), seed in 0u64..1000) {
        for b in blocks(&src, 3, 5) {
            let f = BlockFlow::new(&b).unwrap();
            let t = observation_time(b.j, THETA, 4.0);
            let mut probes: Vec<StateVector> = (0..4).map(|i| random_state(b.grid, seed + 31 * i)).collect();
            probes.push(f.lowest_mode());
            let mut all_pass = true;
            let mut lo = f64::INFINITY;
            for u in &probes {
                all_pass &= f.backward_test(&b, u, t).unwrap().pass;
                let uj = b.localize(u);
                lo = lo.min(f.form(&uj) / uj.l2().powi(2));
            }
            if all_pass {
                prop_assert!(lo >= -1e-8, "block {}: form {lo}", b.j);
                prop_assert!(f.min_eigenvalue() >= -1e-8, "block {}: eigenvalue {}", b.j, f.min_eigenvalue());
            }
        }
    }
}

proptest! {
    #![proptest_config(config(6, 0x9a4e))]

    // (a^w u, u) − Σ_j ((φ_j a)^w ψ_j u, ψ_j u) measured against ‖u‖²_{H^{-1}}
    #[test]
    fn littlewood_paley_consistency(src in symbols(), seed in 0u64..1000) {
        const J: usize = 3;
        let g = GridSpec::new(1, 64, 31, 0.5).unwrap();
        let bank = lp_filters(J, &g).unwrap();
        let full = WeylOperator::from_symbol(&MatrixSymbol::parse(&src, 1, 0.0).unwrap(), &g).unwrap();
        let parts: Vec<WeylOperator> = (0..bank.len())
            .map(|j| WeylOperator::from_symbol(&MatrixSymbol::parse(&format!("({src})*dyadic({j}, {J})"), 1, 0.0).unwrap(), &g).unwrap())
            .collect();
        let ratio = |u: &StateVector| {
            let split: f64 = parts.iter().enumerate().map(|(j, p)| form(p, &bank.apply_psi(j, u))).sum();
            (form(&full, u) - split).abs() / sobolev_norm(u, -1.0, 1.0).powi(2)
        };
        let fit = (0..4).map(|i| ratio(&random_state(g, seed + i))).fold(0.0, f64::max);
        for i in 4..12 {
            let mut u = random_state(g, seed + i);
            if i % 2 == 0 {
                // weight toward high frequencies, where the H^{-1} norm is small
                u = bank.apply_psi(J + 1, &u);
            }
            let r = ratio(&u);
            prop_assert!(r <= 2.0 * fit + 1e-12, "probe {i}: {r} against fitted {fit}");
        }
    }
}
