use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use super::fft::fft_nd;
use super::op::LinearOperator;
use super::state::StateVector;
use crate::error::{Error, Result};
use crate::symdsl::{GridSpec, MatrixSymbol};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Index on the doubled grid (`x = πμ/n`) of the periodic midpoint of
/// `x_j` and `x_l`, taken along the shorter arc. Antipodal pairs use the arc
/// through 0, or the direct arc when one endpoint is 0 itself.
pub fn weyl_mid(j: usize, l: usize, n: usize) -> usize {
    let diff = j.abs_diff(l);
    let direct = j + l;
    let wrapped = (j + l + n) % (2 * n);
    if 2 * diff < n {
        direct
    } else if 2 * diff > n {
        wrapped
    } else if j.min(l) == 0 {
        direct
    } else {
        wrapped
    }
}

/// Symbol values for Weyl assembly: midpoints on the `2n_x` grid and the
/// unscaled frequencies `k = -n_x/2 ..= n_x/2`.
#[derive(Clone, Debug)]
pub struct WeylSample {
    pub grid: GridSpec,
    pub n: usize,
    values: Vec<C64>,
}

impl WeylSample {
    fn nfreq(&self) -> usize {
        self.grid.n_x + 1
    }

    /// Wraps values laid out `[mu][k + n_x/2][N×N]` for `mu < 2n_x`, `|k| ≤ n_x/2`.
    pub fn from_values(grid: GridSpec, n: usize, values: Vec<C64>) -> Result<Self> {
        let want = 2 * grid.n_x * (grid.n_x + 1) * n * n;
        if values.len() != want || grid.d != 1 {
            return Err(Error::Shape(format!("Weyl sample needs {} values in d = 1, got {}", want, values.len())));
        }
        Ok(WeylSample { grid, n, values })
    }

    /// Sampling points `(x, ξ)` in storage order.
    pub fn points(grid: &GridSpec) -> Vec<f64> {
        let n = grid.n_x;
        let mut out = Vec::with_capacity(4 * n * (n + 1));
        for mu in 0..2 * n {
            for kk in 0..=n {
                out.push(std::f64::consts::PI * mu as f64 / n as f64);
                out.push(kk as f64 - (n / 2) as f64);
            }
        }
        out
    }

    /// Block at midpoint index `mu`, frequency `k`.
    pub fn at(&self, mu: usize, k: i64) -> &[C64] {
        let nn = self.n * self.n;
        let kk = (k + self.grid.n_x as i64 / 2) as usize;
        let o = (mu * self.nfreq() + kk) * nn;
        &self.values[o..o + nn]
    }
}

/// Samples `a(πμ/n_x, k)` for the Weyl kernel (classical quantization, d = 1).
pub fn sample_weyl(s: &MatrixSymbol, g: &GridSpec) -> Result<WeylSample> {
    if g.d != 1 || s.d() != 1 {
        return Err(Error::Unsupported("Weyl quantization is implemented for d = 1".into()));
    }
    let n = g.n_x;
    let nn = s.n() * s.n();
    let nf = n + 1;
    let mut values = vec![ZERO; 2 * n * nf * nn];
    values.par_chunks_mut(nf * nn).enumerate().for_each(|(mu, row)| {
        let x = [std::f64::consts::PI * mu as f64 / n as f64];
        for kk in 0..nf {
            let xi = [kk as f64 - (n / 2) as f64];
            s.eval_into(&x, &xi, 0.0, &mut row[kk * nn..(kk + 1) * nn]);
        }
    });
    Ok(WeylSample { grid: *g, n: s.n(), values })
}

/// Dense Weyl operator `a^w` on the grid, component-major.
///
/// The kernel is `K(x_j, y_l) = (1/n) Σ_k w_k e^{i(x_j - y_l)k} a(mid, k)` with
/// half weights at `k = ±n/2`; it is exact for x-only symbols and hermitian
/// for real symbols.
#[derive(Clone, Debug)]
pub struct WeylOperator {
    grid: GridSpec,
    n: usize,
    mat: DMatrix<C64>,
}

impl WeylOperator {
    pub fn new(a: &WeylSample) -> Self {
        let g = a.grid;
        let n = g.n_x;
        let nc = a.n;
        let half = (n / 2) as i64;
        // f[(mu, r, c)][z] = F_mu(z) for entry (r, c)
        let rows: Vec<Vec<C64>> = (0..2 * n)
            .into_par_iter()
            .map(|mu| {
                let mut out = vec![ZERO; nc * nc * n];
                for e in 0..nc * nc {
                    let line = &mut out[e * n..(e + 1) * n];
                    for (b, v) in line.iter_mut().enumerate() {
                        let bi = b as i64;
                        *v = if bi < half {
                            a.at(mu, bi)[e]
                        } else if bi == half {
                            (a.at(mu, half)[e] + a.at(mu, -half)[e]) * 0.5
                        } else {
                            a.at(mu, bi - n as i64)[e]
                        };
                    }
                    fft_nd(line, n, 1, true);
                    line.iter_mut().for_each(|v| *v /= n as f64);
                }
                out
            })
            .collect();
        let dim = n * nc;
        let mut mat = DMatrix::from_element(dim, dim, ZERO);
        for j in 0..n {
            for l in 0..n {
                let mu = weyl_mid(j, l, n);
                let z = (j + n - l) % n;
                for r in 0..nc {
                    for c in 0..nc {
                        mat[(r * n + j, c * n + l)] = rows[mu][(r * nc + c) * n + z];
                    }
                }
            }
        }
        WeylOperator { grid: g, n: nc, mat }
    }

    pub fn from_symbol(s: &MatrixSymbol, g: &GridSpec) -> Result<Self> {
        Ok(Self::new(&sample_weyl(s, g)?))
    }

    pub fn from_matrix(grid: GridSpec, n: usize, mat: DMatrix<C64>) -> Self {
        WeylOperator { grid, n, mat }
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    /// `(A + A^H)/2`.
    pub fn hermitian_part(&self) -> DMatrix<C64> {
        (&self.mat + self.mat.adjoint()) * C64::new(0.5, 0.0)
    }

    /// Applies to several states at once (columns of `block`).
    pub fn apply_block(&self, block: &DMatrix<C64>) -> DMatrix<C64> {
        &self.mat * block
    }
}

impl LinearOperator for WeylOperator {
    fn grid(&self) -> GridSpec {
        self.grid
    }

    fn components(&self) -> usize {
        self.n
    }

    fn apply(&self, u: &StateVector) -> StateVector {
        let v = nalgebra::DVector::from_column_slice(&u.data);
        let w = &self.mat * v;
        StateVector { grid: u.grid, n: u.n, data: w.as_slice().to_vec() }
    }

    fn apply_adjoint(&self, v: &StateVector) -> Option<StateVector> {
        let x = nalgebra::DVector::from_column_slice(&v.data);
        let w = self.mat.adjoint() * x;
        Some(StateVector { grid: v.grid, n: v.n, data: w.as_slice().to_vec() })
    }
}

/// `a^w u` by dense kernel assembly and quadrature.
pub fn weyl_apply(a: &WeylSample, u: &StateVector) -> Result<StateVector> {
    if a.grid.n_x != u.grid.n_x || u.grid.d != 1 || a.n != u.n {
        return Err(Error::Grid("Weyl symbol and state grids differ".into()));
    }
    Ok(WeylOperator::new(a).apply(u))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_is_symmetric_and_on_the_short_arc() {
        let n = 16;
        for j in 0..n {
            for l in 0..n {
                let mu = weyl_mid(j, l, n);
                assert_eq!(mu, weyl_mid(l, j, n));
                let xm = std::f64::consts::PI * mu as f64 / n as f64;
                let dx = 2.0 * std::f64::consts::PI / n as f64;
                let dist = |a: f64, b: f64| {
                    let d = (a - b).rem_euclid(2.0 * std::f64::consts::PI);
                    d.min(2.0 * std::f64::consts::PI - d)
                };
                let (xj, xl) = (j as f64 * dx, l as f64 * dx);
                assert!((dist(xm, xj) - dist(xm, xl)).abs() < 1e-12);
                assert!(dist(xm, xj) <= std::f64::consts::PI / 2.0 + 1e-12);
            }
        }
    }

    #[test]
    fn x_only_symbol_is_multiplication() {
        let g = GridSpec::new(1, 32, 15, 0.5).unwrap();
        let s = MatrixSymbol::parse("exp(cos(x1)) + sin(3*x1)", 1, 0.0).unwrap();
        let op = WeylOperator::from_symbol(&s, &g).unwrap();
        let m = op.matrix();
        for j in 0..32 {
            let x = [j as f64 * g.dx()];
            let want = s.eval(&x, &[0.0], 0.0)[0];
            for l in 0..32 {
                let v = if j == l { want } else { ZERO };
                assert!((m[(j, l)] - v).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn real_symbol_is_hermitian() {
        let g = GridSpec::new(1, 32, 15, 0.5).unwrap();
        let s = MatrixSymbol::parse("cos(x1)*xi1*bracket(-1) + sin(x1)^2", 1, 0.0).unwrap();
        let op = WeylOperator::from_symbol(&s, &g).unwrap();
        let m = op.matrix();
        let diff = (m - m.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-14);
    }
}
