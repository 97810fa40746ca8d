#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::{Config, FileFailurePersistence, RngAlgorithm, RngSeed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pdflow::symdsl::MatrixSymbol;

/// Deterministic runner: fixed seed, no persistence files.
pub fn config(cases: u32, seed: u64) -> Config {
    Config {
        cases,
        rng_algorithm: RngAlgorithm::ChaCha,
        rng_seed: RngSeed::Fixed(seed),
        failure_persistence: Some(Box::new(FileFailurePersistence::Off)),
        max_shrink_iters: 8,
        ..Config::default()
    }
}

/// Smooth periodic order-0 building blocks.
pub const BASIS: [&str; 6] = ["1", "cos(x1)", "sin(x1)", "xi1*bracket(-1)", "cos(x1)*xi1*bracket(-1)", "sin(2*x1)*bracket(-2)"];

/// `Σ c_i b_i` over [`BASIS`].
pub fn entry_text(c: &[f64]) -> String {
    let terms: Vec<String> = c.iter().zip(BASIS).map(|(v, b)| format!("({v:.6})*{b}")).collect();
    terms.join(" + ")
}

pub fn matrix_text(n: usize, c: &[f64]) -> String {
    let k = BASIS.len();
    let rows: Vec<String> = (0..n)
        .map(|i| {
            let row: Vec<String> = (0..n).map(|j| entry_text(&c[(i * n + j) * k..(i * n + j + 1) * k])).collect();
            format!("[{}]", row.join(", "))
        })
        .collect();
    if n == 1 {
        entry_text(c)
    } else {
        format!("[{}]", rows.join(", "))
    }
}

/// Coefficients of a random `n × n` order-0 symbol, each in `[-scale, scale]`.
pub fn coeffs(n: usize, scale: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-scale..scale, n * n * BASIS.len())
}

pub fn symbol(n: usize, c: &[f64]) -> MatrixSymbol {
    MatrixSymbol::parse(&matrix_text(n, c), 1, 0.0).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform points of `[0, 2π) × [-4, 4]`.
pub fn points(seed: u64, count: usize) -> Vec<(f64, f64)> {
    let mut r = rng(seed);
    (0..count).map(|_| (r.random_range(0.0..std::f64::consts::TAU), r.random_range(-4.0..4.0))).collect()
}

pub fn max_diff(a: &[pdflow::C64], b: &[pdflow::C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
