use num_complex::Complex64 as C64;
use rayon::prelude::*;

use super::fft::fft_nd;
use super::state::{dft_full, from_fourier, idft_full, to_fourier, FourierState, StateVector};
use crate::error::{Error, Result};
use crate::symdsl::{sample_at, GridSpec, MatrixSymbol, SampledSymbol};

const ZERO: C64 = C64::new(0.0, 0.0);

/// A linear map on grid states with an optional closed-form adjoint.
pub trait LinearOperator: Sync {
    fn grid(&self) -> GridSpec;
    fn components(&self) -> usize;
    fn apply(&self, u: &StateVector) -> StateVector;
    fn apply_adjoint(&self, _v: &StateVector) -> Option<StateVector> {
        None
    }
}

fn check_pair(a: &SampledSymbol, u: &StateVector) -> Result<()> {
    if !a.scaled {
        return Err(Error::Grid("op_eps needs a symbol sampled at (x, eps k)".into()));
    }
    if a.grid != u.grid {
        return Err(Error::Grid(format!("symbol grid {:?} differs from state grid {:?}", a.grid, u.grid)));
    }
    if a.n != u.n {
        return Err(Error::Shape(format!("symbol is {}x{}, state has {} components", a.n, a.n, u.n)));
    }
    Ok(())
}

/// Reference semiclassical quantization `x ↦ Σ_k e^{ik·x} a(x, εk) û_k`,
/// accumulated mode by mode.
pub fn op_eps_apply(a: &SampledSymbol, u: &StateVector) -> Result<StateVector> {
    check_pair(a, u)?;
    let g = u.grid;
    let (n, npts, nk) = (u.n, g.npts(), g.nk());
    let uh = to_fourier(u);
    let mut phases = vec![ZERO; nk];
    let mut x = vec![0.0; g.d];
    let mut k = vec![0i64; g.d];
    let cols: Vec<Vec<C64>> = (0..npts)
        .map(|j| {
            g.x_at(j, &mut x);
            for (kk, ph) in phases.iter_mut().enumerate() {
                g.k_at(kk, &mut k);
                let p: f64 = x.iter().zip(&k).map(|(a, b)| a * *b as f64).sum();
                *ph = C64::from_polar(1.0, p);
            }
            let mut out = vec![ZERO; n];
            for kk in 0..nk {
                let blk = a.at(j, kk);
                for r in 0..n {
                    let mut s = ZERO;
                    for c in 0..n {
                        s += blk[r * n + c] * uh.coef[c * nk + kk];
                    }
                    out[r] += phases[kk] * s;
                }
            }
            out
        })
        .collect();
    let mut w = StateVector::zeros(g, n);
    for (j, v) in cols.iter().enumerate() {
        for r in 0..n {
            w.data[r * npts + j] = v[r];
        }
    }
    Ok(w)
}

/// Fast exact form of `op_ε(a)`: the x-dependence of each column `a(·, εk)`
/// is expanded in its grid harmonics, so mode `k` feeds output modes `k + m`.
#[derive(Clone, Debug)]
pub struct OpEps {
    grid: GridSpec,
    n: usize,
    starts: Vec<usize>,
    targets: Vec<usize>,
    blocks: Vec<C64>,
}

/// Harmonics whose size is below this fraction of the column maximum are dropped.
pub const BAND_THRESHOLD: f64 = 1e-15;

impl OpEps {
    pub fn new(a: &SampledSymbol) -> Result<Self> {
        if !a.scaled {
            return Err(Error::Grid("op_eps needs a symbol sampled at (x, eps k)".into()));
        }
        let g = a.grid;
        let (n, npts, nk) = (a.n, g.npts(), g.nk());
        let nn = n * n;
        let per_mode: Vec<(Vec<usize>, Vec<C64>)> = (0..nk)
            .into_par_iter()
            .map(|kk| {
                let mut hat = vec![ZERO; nn * npts];
                for e in 0..nn {
                    let col = &mut hat[e * npts..(e + 1) * npts];
                    for (j, v) in col.iter_mut().enumerate() {
                        *v = a.at(j, kk)[e];
                    }
                    fft_nd(col, g.n_x, g.d, false);
                    let inv = 1.0 / npts as f64;
                    col.iter_mut().for_each(|v| *v *= inv);
                }
                let peak = hat.iter().map(|v| v.norm()).fold(0.0, f64::max);
                let mut targets = Vec::new();
                let mut blocks = Vec::new();
                if peak == 0.0 {
                    return (targets, blocks);
                }
                let k = g.k_vec(kk);
                let mut p = vec![0i64; g.d];
                for b in 0..npts {
                    let big = (0..nn).any(|e| hat[e * npts + b].norm() > BAND_THRESHOLD * peak);
                    if !big {
                        continue;
                    }
                    // signed harmonic of bin b along each axis
                    let mut r = b;
                    for ax in (0..g.d).rev() {
                        p[ax] = k[ax] + g.bin_freq(r % g.n_x);
                        r /= g.n_x;
                    }
                    targets.push(g.dft_index(&p));
                    blocks.extend((0..nn).map(|e| hat[e * npts + b]));
                }
                (targets, blocks)
            })
            .collect();
        let mut starts = Vec::with_capacity(nk + 1);
        let mut targets = Vec::new();
        let mut blocks = Vec::new();
        for (t, b) in per_mode {
            starts.push(targets.len());
            targets.extend(t);
            blocks.extend(b);
        }
        starts.push(targets.len());
        Ok(OpEps { grid: g, n, starts, targets, blocks })
    }

    /// Samples `M(t, ·, ε·)` and builds the operator.
    pub fn from_symbol(m: &MatrixSymbol, g: &GridSpec, t: f64) -> Result<Self> {
        Self::new(&sample_at(m, g, true, t))
    }

    /// Average number of retained harmonics per mode.
    pub fn mean_bandwidth(&self) -> f64 {
        self.targets.len() as f64 / (self.starts.len() - 1) as f64
    }

    /// Output spectrum on the full DFT grid for lattice input coefficients.
    pub fn apply_coef(&self, uh: &FourierState) -> Vec<C64> {
        let (n, npts, nk) = (self.n, self.grid.npts(), self.grid.nk());
        if n > 8 {
            return self.apply_coef_wide(uh);
        }
        let nn = n * n;
        let mut w = vec![ZERO; n * npts];
        let mut buf = [ZERO; 8];
        for kk in 0..nk {
            let (s, e) = (self.starts[kk], self.starts[kk + 1]);
            if s == e {
                continue;
            }
            let uk = &mut buf[..n];
            for c in 0..n {
                uk[c] = uh.coef[c * nk + kk];
            }
            if uk.iter().all(|v| *v == ZERO) {
                continue;
            }
            for idx in s..e {
                let p = self.targets[idx];
                let blk = &self.blocks[idx * nn..(idx + 1) * nn];
                for r in 0..n {
                    let mut acc = ZERO;
                    for c in 0..n {
                        acc += blk[r * n + c] * uk[c];
                    }
                    w[r * npts + p] += acc;
                }
            }
        }
        w
    }

    fn apply_coef_wide(&self, uh: &FourierState) -> Vec<C64> {
        let (n, npts, nk) = (self.n, self.grid.npts(), self.grid.nk());
        let nn = n * n;
        let mut w = vec![ZERO; n * npts];
        for kk in 0..nk {
            for idx in self.starts[kk]..self.starts[kk + 1] {
                let p = self.targets[idx];
                let blk = &self.blocks[idx * nn..(idx + 1) * nn];
                for r in 0..n {
                    for c in 0..n {
                        w[r * npts + p] += blk[r * n + c] * uh.coef[c * nk + kk];
                    }
                }
            }
        }
        w
    }

    /// Lattice-to-lattice action: the output spectrum restricted to `|k_i| ≤ K`.
    pub fn apply_lattice(&self, uh: &FourierState) -> FourierState {
        project_lattice(self.grid, self.n, &self.apply_coef(uh))
    }

    /// Adjoint in coefficient space: full output spectrum to lattice input.
    pub fn adjoint_coef(&self, vh: &[C64]) -> FourierState {
        let (n, npts, nk) = (self.n, self.grid.npts(), self.grid.nk());
        let nn = n * n;
        let mut coef = vec![ZERO; n * nk];
        for kk in 0..nk {
            for idx in self.starts[kk]..self.starts[kk + 1] {
                let p = self.targets[idx];
                let blk = &self.blocks[idx * nn..(idx + 1) * nn];
                for c in 0..n {
                    let mut acc = ZERO;
                    for r in 0..n {
                        acc += blk[r * n + c].conj() * vh[r * npts + p];
                    }
                    coef[c * nk + kk] += acc;
                }
            }
        }
        FourierState { grid: self.grid, n, coef }
    }
}

impl LinearOperator for OpEps {
    fn grid(&self) -> GridSpec {
        self.grid
    }

    fn components(&self) -> usize {
        self.n
    }

    fn apply(&self, u: &StateVector) -> StateVector {
        let w = self.apply_coef(&to_fourier(u));
        idft_full(self.grid, self.n, w)
    }

    fn apply_adjoint(&self, v: &StateVector) -> Option<StateVector> {
        let c = self.adjoint_coef(&dft_full(v));
        Some(from_fourier(&c).unwrap())
    }
}

/// Restricts a full DFT spectrum to the lattice `|k_i| ≤ K`.
pub fn project_lattice(grid: GridSpec, n: usize, full: &[C64]) -> FourierState {
    let (npts, nk) = (grid.npts(), grid.nk());
    let mut coef = vec![ZERO; n * nk];
    let mut k = vec![0i64; grid.d];
    for kk in 0..nk {
        grid.k_at(kk, &mut k);
        let b = grid.dft_index(&k);
        for c in 0..n {
            coef[c * nk + kk] = full[c * npts + b];
        }
    }
    FourierState { grid, n, coef }
}

/// Fourier multiplier `⟨εD⟩^s` acting on the full DFT spectrum.
#[derive(Clone, Debug)]
pub struct BracketMultiplier {
    grid: GridSpec,
    n: usize,
    weights: Vec<f64>,
}

impl BracketMultiplier {
    pub fn new(grid: GridSpec, n: usize, s: f64, eps: f64) -> Self {
        let npts = grid.npts();
        let weights = (0..npts)
            .map(|b| {
                let mut r = b;
                let mut k2 = 0.0;
                for _ in 0..grid.d {
                    let f = grid.bin_freq(r % grid.n_x) as f64 * eps;
                    k2 += f * f;
                    r /= grid.n_x;
                }
                (1.0 + k2).powf(0.5 * s)
            })
            .collect();
        BracketMultiplier { grid, n, weights }
    }
}

impl LinearOperator for BracketMultiplier {
    fn grid(&self) -> GridSpec {
        self.grid
    }

    fn components(&self) -> usize {
        self.n
    }

    fn apply(&self, u: &StateVector) -> StateVector {
        let npts = self.grid.npts();
        let mut c = dft_full(u);
        for comp in 0..self.n {
            for (v, w) in c[comp * npts..(comp + 1) * npts].iter_mut().zip(&self.weights) {
                *v *= *w;
            }
        }
        idft_full(self.grid, self.n, c)
    }

    fn apply_adjoint(&self, v: &StateVector) -> Option<StateVector> {
        Some(self.apply(v))
    }
}

/// `A ∘ B`.
pub struct Compose<'a> {
    pub outer: &'a dyn LinearOperator,
    pub inner: &'a dyn LinearOperator,
}

impl LinearOperator for Compose<'_> {
    fn grid(&self) -> GridSpec {
        self.inner.grid()
    }

    fn components(&self) -> usize {
        self.inner.components()
    }

    fn apply(&self, u: &StateVector) -> StateVector {
        self.outer.apply(&self.inner.apply(u))
    }

    fn apply_adjoint(&self, v: &StateVector) -> Option<StateVector> {
        let w = self.outer.apply_adjoint(v)?;
        self.inner.apply_adjoint(&w)
    }
}

/// `Σ c_i A_i`.
pub struct LinearCombination<'a> {
    pub terms: Vec<(C64, &'a dyn LinearOperator)>,
}

impl LinearOperator for LinearCombination<'_> {
    fn grid(&self) -> GridSpec {
        self.terms[0].1.grid()
    }

    fn components(&self) -> usize {
        self.terms[0].1.components()
    }

    fn apply(&self, u: &StateVector) -> StateVector {
        let mut out = StateVector::zeros(u.grid, u.n);
        for (c, op) in &self.terms {
            out.axpy(*c, &op.apply(u));
        }
        out
    }

    fn apply_adjoint(&self, v: &StateVector) -> Option<StateVector> {
        let mut out = StateVector::zeros(v.grid, v.n);
        for (c, op) in &self.terms {
            out.axpy(c.conj(), &op.apply_adjoint(v)?);
        }
        Some(out)
    }
}

/// Operator given by a closure, without adjoint.
pub struct FnOperator<F: Fn(&StateVector) -> StateVector + Sync> {
    pub grid: GridSpec,
    pub n: usize,
    pub f: F,
}

impl<F: Fn(&StateVector) -> StateVector + Sync> LinearOperator for FnOperator<F> {
    fn grid(&self) -> GridSpec {
        self.grid
    }

    fn components(&self) -> usize {
        self.n
    }

    fn apply(&self, u: &StateVector) -> StateVector {
        (self.f)(u)
    }
}

/// Identity on a grid.
pub struct Identity {
    pub grid: GridSpec,
    pub n: usize,
}

impl LinearOperator for Identity {
    fn grid(&self) -> GridSpec {
        self.grid
    }

    fn components(&self) -> usize {
        self.n
    }

    fn apply(&self, u: &StateVector) -> StateVector {
        u.clone()
    }

    fn apply_adjoint(&self, v: &StateVector) -> Option<StateVector> {
        Some(v.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symdsl::sample;
    use rand::SeedableRng;

    #[test]
    fn banded_matches_direct() {
        let g = GridSpec::new(1, 32, 15, 0.125).unwrap();
        let m = MatrixSymbol::parse("[[exp(cos(x1))*bracket(-1), sin(2*x1)*xi1*bracket(-1)], [1, cos(x1)]]", 1, 0.0).unwrap();
        let a = sample(&m, &g, true);
        let op = OpEps::new(&a).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let u = StateVector::random_bandlimited(g, 2, &mut rng);
        let fast = op.apply(&u);
        let slow = op_eps_apply(&a, &u).unwrap();
        assert!(fast.sub(&slow).l2() < 1e-13);
    }

    #[test]
    fn adjoint_identity() {
        let g = GridSpec::new(1, 32, 12, 0.25).unwrap();
        let m = MatrixSymbol::parse("[[cos(x1)*bracket(-1), i*sin(x1)], [xi1*bracket(-1), 2]]", 1, 0.0).unwrap();
        let op = OpEps::from_symbol(&m, &g, 0.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let u = StateVector::random_bandlimited(g, 2, &mut rng);
        let v = StateVector::random_bandlimited(g, 2, &mut rng);
        let lhs = op.apply(&u).inner(&v);
        let rhs = u.inner(&op.apply_adjoint(&v).unwrap());
        assert!((lhs - rhs).norm() < 1e-13);
    }

    #[test]
    fn multiplier_on_one_mode() {
        let g = GridSpec::new(1, 16, 6, 0.5).unwrap();
        let m = MatrixSymbol::parse("bracket(-1)", 1, -1.0).unwrap();
        let op = OpEps::from_symbol(&m, &g, 0.0).unwrap();
        let u = StateVector::mode(g, 1, &[4], 0);
        let mut want = u.clone();
        want.scale_mut(C64::new(5f64.powf(-0.5), 0.0));
        assert!(op.apply(&u).sub(&want).l2() < 1e-14);
    }
}
