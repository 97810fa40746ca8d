use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::op::LinearOperator;
use super::state::StateVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMethod {
    /// Exact largest singular value of the assembled matrix.
    Dense,
    /// Power iteration on `A^H A`.
    Power,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct NormEstimate {
    pub value: f64,
    pub method: NormMethod,
    pub iterations: usize,
    /// `false` when power iteration hit the iteration cap.
    pub converged: bool,
}

/// Tuning of [`operator_norm_probe`].
#[derive(Clone, Copy, Debug)]
pub struct NormProbe {
    pub dense_cap: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for NormProbe {
    fn default() -> Self {
        NormProbe { dense_cap: 4096, max_iter: 500, tol: 1e-8 }
    }
}

/// Matrix of `op` in the grid basis, by applying it to every basis vector.
pub fn assemble_dense(op: &dyn LinearOperator) -> DMatrix<C64> {
    let g = op.grid();
    let n = op.components();
    let dim = g.npts() * n;
    let cols: Vec<Vec<C64>> = (0..dim)
        .into_par_iter()
        .map(|i| {
            let mut e = StateVector::zeros(g, n);
            e.data[i] = C64::new(1.0, 0.0);
            op.apply(&e).data
        })
        .collect();
    let mut m = DMatrix::from_element(dim, dim, C64::new(0.0, 0.0));
    for (i, c) in cols.iter().enumerate() {
        m.set_column(i, &nalgebra::DVector::from_column_slice(c));
    }
    m
}

impl NormProbe {
    pub fn estimate<R: Rng>(&self, op: &dyn LinearOperator, trials: usize, rng: &mut R) -> NormEstimate {
        let g = op.grid();
        let n = op.components();
        let dim = g.npts() * n;
        let probe = StateVector::zeros(g, n);
        let has_adjoint = op.apply_adjoint(&probe).is_some();
        if dim <= self.dense_cap || !has_adjoint {
            let m = assemble_dense(op);
            return NormEstimate { value: crate::linalg::dense_spectral_norm(m), method: NormMethod::Dense, iterations: dim, converged: true };
        }
        let mut best = NormEstimate { value: 0.0, method: NormMethod::Power, iterations: 0, converged: true };
        for _ in 0..trials.max(1) {
            let mut v =
                StateVector::from_data(g, n, (0..dim).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect()).unwrap();
            let s = 1.0 / v.l2();
            v.scale_mut(C64::new(s, 0.0));
            let mut prev = 0.0;
            let mut est = 0.0;
            let mut converged = false;
            let mut it = 0;
            while it < self.max_iter {
                it += 1;
                let w = op.apply(&v);
                est = w.l2();
                if est == 0.0 {
                    converged = true;
                    break;
                }
                let mut z = op.apply_adjoint(&w).unwrap();
                let zn = z.l2();
                z.scale_mut(C64::new(1.0 / zn, 0.0));
                v = z;
                if (est - prev).abs() <= self.tol * est {
                    converged = true;
                    break;
                }
                prev = est;
            }
            if est >= best.value {
                best.value = est;
            }
            best.iterations += it;
            best.converged &= converged;
        }
        best
    }
}

/// Largest singular value of `op` on the grid, with the default probe settings.
pub fn operator_norm_probe<R: Rng>(op: &dyn LinearOperator, trials: usize, rng: &mut R) -> NormEstimate {
    NormProbe::default().estimate(op, trials, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantize::op::{Identity, OpEps};
    use crate::symdsl::{GridSpec, MatrixSymbol};
    use rand::SeedableRng;

    #[test]
    fn identity_and_multiplier() {
        let g = GridSpec::new(1, 64, 31, 0.25).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let id = Identity { grid: g, n: 2 };
        assert!((operator_norm_probe(&id, 1, &mut rng).value - 1.0).abs() < 1e-12);
        let m = MatrixSymbol::parse("2*sin(x1)", 1, 0.0).unwrap();
        let op = OpEps::from_symbol(&m, &g, 0.0).unwrap();
        let est = operator_norm_probe(&op, 1, &mut rng);
        // grid sup of |2 sin x| is attained at x = π/2, a grid point
        assert!((est.value - 2.0).abs() < 1e-6, "{}", est.value);
    }

    #[test]
    fn power_iteration_matches_dense() {
        let g = GridSpec::new(1, 64, 31, 0.125).unwrap();
        let m = MatrixSymbol::parse("cos(x1)*bracket(-1)", 1, -1.0).unwrap();
        let op = OpEps::from_symbol(&m, &g, 0.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let dense = operator_norm_probe(&op, 1, &mut rng);
        let power = NormProbe { dense_cap: 0, max_iter: 500, tol: 1e-12 }.estimate(&op, 3, &mut rng);
        assert_eq!(power.method, NormMethod::Power);
        assert!((dense.value - power.value).abs() < 1e-6 * dense.value);
    }
}
