use num_complex::Complex64 as C64;
use rand::Rng;

use super::fft::fft_nd;
use crate::error::{Error, Result};
use crate::symdsl::GridSpec;

const ZERO: C64 = C64::new(0.0, 0.0);

/// `N`-component complex field on the spatial grid, stored component-major.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub grid: GridSpec,
    pub n: usize,
    pub data: Vec<C64>,
}

/// `N`-component coefficients on the truncated lattice `|k_i| ≤ K`,
/// component-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierState {
    pub grid: GridSpec,
    pub n: usize,
    pub coef: Vec<C64>,
}

impl StateVector {
    pub fn zeros(grid: GridSpec, n: usize) -> Self {
        StateVector { grid, n, data: vec![ZERO; grid.npts() * n] }
    }

    pub fn from_data(grid: GridSpec, n: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != grid.npts() * n {
            return Err(Error::Shape(format!("state of {} values does not fit {} components on {} points", data.len(), n, grid.npts())));
        }
        if data.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("state vector entry".into()));
        }
        Ok(StateVector { grid, n, data })
    }

    /// Samples `f(x)` into each component.
    pub fn from_fn(grid: GridSpec, n: usize, f: impl Fn(&[f64]) -> Vec<C64>) -> Self {
        let npts = grid.npts();
        let mut u = Self::zeros(grid, n);
        let mut x = vec![0.0; grid.d];
        for j in 0..npts {
            grid.x_at(j, &mut x);
            let v = f(&x);
            for c in 0..n {
                u.data[c * npts + j] = v[c];
            }
        }
        u
    }

    /// Single Fourier mode `e^{ik·x}` in component `c`.
    pub fn mode(grid: GridSpec, n: usize, k: &[i64], c: usize) -> Self {
        Self::from_fn(grid, n, |x| {
            let ph: f64 = x.iter().zip(k).map(|(a, b)| a * *b as f64).sum();
            let mut v = vec![ZERO; n];
            v[c] = C64::from_polar(1.0, ph);
            v
        })
    }

    /// Random field band-limited to the lattice, with i.i.d. Gaussian-like
    /// coefficients of unit variance before normalization to unit L².
    pub fn random_bandlimited<R: Rng>(grid: GridSpec, n: usize, rng: &mut R) -> Self {
        let nk = grid.nk();
        let coef: Vec<C64> = (0..n * nk).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        let mut u = from_fourier(&FourierState { grid, n, coef }).unwrap();
        let nrm = u.l2();
        u.scale_mut(C64::new(1.0 / nrm, 0.0));
        u
    }

    pub fn component(&self, c: usize) -> &[C64] {
        let npts = self.grid.npts();
        &self.data[c * npts..(c + 1) * npts]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [C64] {
        let npts = self.grid.npts();
        &mut self.data[c * npts..(c + 1) * npts]
    }

    /// Discrete L² norm `((1/n_x^d) Σ_j |u_j|²)^{1/2}`, so that `‖e^{ikx}‖ = 1`.
    pub fn l2(&self) -> f64 {
        (self.data.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.grid.npts() as f64).sqrt()
    }

    pub fn linf(&self) -> f64 {
        let npts = self.grid.npts();
        (0..npts).map(|j| (0..self.n).map(|c| self.data[c * npts + j].norm_sqr()).sum::<f64>().sqrt()).fold(0.0, f64::max)
    }

    /// Inner product `(u, v) = (1/n_x^d) Σ_j u_j · conj(v_j)`.
    pub fn inner(&self, v: &StateVector) -> C64 {
        self.data.iter().zip(&v.data).map(|(a, b)| a * b.conj()).sum::<C64>() / self.grid.npts() as f64
    }

    pub fn scale_mut(&mut self, c: C64) {
        self.data.iter_mut().for_each(|v| *v *= c);
    }

    /// `self += c · other`.
    pub fn axpy(&mut self, c: C64, other: &StateVector) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    pub fn sub(&self, other: &StateVector) -> StateVector {
        let mut out = self.clone();
        out.axpy(C64::new(-1.0, 0.0), other);
        out
    }

    pub fn check_compatible(&self, other: &StateVector) -> Result<()> {
        if self.grid.n_x != other.grid.n_x || self.grid.d != other.grid.d || self.n != other.n {
            return Err(Error::Shape("state vectors live on different grids".into()));
        }
        Ok(())
    }
}

/// Full-spectrum coefficients `û_p = (1/n_x^d) Σ_j u_j e^{-ip·x_j}` of every
/// component on the `n_x^d` DFT grid.
pub fn dft_full(u: &StateVector) -> Vec<C64> {
    let npts = u.grid.npts();
    let mut out = u.data.clone();
    let inv = 1.0 / npts as f64;
    for c in 0..u.n {
        let s = &mut out[c * npts..(c + 1) * npts];
        fft_nd(s, u.grid.n_x, u.grid.d, false);
        s.iter_mut().for_each(|v| *v *= inv);
    }
    out
}

/// Inverse of [`dft_full`]: `u_j = Σ_p û_p e^{ip·x_j}`.
pub fn idft_full(grid: GridSpec, n: usize, mut coef: Vec<C64>) -> StateVector {
    let npts = grid.npts();
    for c in 0..n {
        fft_nd(&mut coef[c * npts..(c + 1) * npts], grid.n_x, grid.d, true);
    }
    StateVector { grid, n, data: coef }
}

/// Lattice coefficients `û_k` for `|k_i| ≤ K`.
pub fn to_fourier(u: &StateVector) -> FourierState {
    let g = u.grid;
    let npts = g.npts();
    let nk = g.nk();
    let full = dft_full(u);
    let mut coef = vec![ZERO; u.n * nk];
    let mut k = vec![0i64; g.d];
    for kk in 0..nk {
        g.k_at(kk, &mut k);
        let b = g.dft_index(&k);
        for c in 0..u.n {
            coef[c * nk + kk] = full[c * npts + b];
        }
    }
    FourierState { grid: g, n: u.n, coef }
}

/// Synthesizes `Σ_k û_k e^{ik·x}` on the grid.
pub fn from_fourier(c: &FourierState) -> Result<StateVector> {
    let g = c.grid;
    let nk = g.nk();
    if c.coef.len() != c.n * nk {
        return Err(Error::Shape(format!("expected {} coefficients, got {}", c.n * nk, c.coef.len())));
    }
    let npts = g.npts();
    let mut full = vec![ZERO; c.n * npts];
    let mut k = vec![0i64; g.d];
    for kk in 0..nk {
        g.k_at(kk, &mut k);
        let b = g.dft_index(&k);
        for comp in 0..c.n {
            full[comp * npts + b] = c.coef[comp * nk + kk];
        }
    }
    Ok(idft_full(g, c.n, full))
}

impl FourierState {
    /// `(Σ |û_k|²)^{1/2}`, equal to the L² norm of a band-limited state.
    pub fn l2(&self) -> f64 {
        self.coef.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }
}
