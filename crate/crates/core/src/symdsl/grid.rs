use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Periodic spatial grid `x_j = 2πj/n_x` per axis together with the
/// truncated frequency lattice `|k_i| ≤ K`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub d: usize,
    pub n_x: usize,
    #[serde(rename = "K")]
    pub k_max: usize,
    pub eps: f64,
}

impl GridSpec {
    pub fn new(d: usize, n_x: usize, k_max: usize, eps: f64) -> Result<Self> {
        let g = GridSpec { d, n_x, k_max, eps };
        g.validate()?;
        Ok(g)
    }

    /// Largest cutoff allowed by `n_x ≥ 2K + 2`.
    pub fn with_full_band(d: usize, n_x: usize, eps: f64) -> Result<Self> {
        Self::new(d, n_x, (n_x.max(2) - 2) / 2, eps)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::Grid("dimension d must be at least 1".into()));
        }
        if !self.n_x.is_power_of_two() || self.n_x < 2 {
            return Err(Error::Grid(format!("n_x = {} is not a power of two", self.n_x)));
        }
        if self.n_x < 2 * self.k_max + 2 {
            return Err(Error::Grid(format!("n_x = {} must be at least 2K+2 = {}", self.n_x, 2 * self.k_max + 2)));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::Grid(format!("eps = {} is outside (0,1)", self.eps)));
        }
        Ok(())
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        Self::new(self.d, self.n_x, self.k_max, eps)
    }

    /// Number of spatial grid points `n_x^d`.
    pub fn npts(&self) -> usize {
        self.n_x.pow(self.d as u32)
    }

    /// Modes per axis `2K+1`.
    pub fn nk_axis(&self) -> usize {
        2 * self.k_max + 1
    }

    /// Number of lattice points `(2K+1)^d`.
    pub fn nk(&self) -> usize {
        self.nk_axis().pow(self.d as u32)
    }

    pub fn dx(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.n_x as f64
    }

    /// Coordinates of flat spatial index `j` (axis 0 varies slowest).
    pub fn x_at(&self, j: usize, out: &mut [f64]) {
        let mut r = j;
        for a in (0..self.d).rev() {
            out[a] = (r % self.n_x) as f64 * self.dx();
            r /= self.n_x;
        }
    }

    /// Integer lattice vector of flat mode index `kk` (axis 0 varies slowest).
    pub fn k_at(&self, kk: usize, out: &mut [i64]) {
        let m = self.nk_axis();
        let mut r = kk;
        for a in (0..self.d).rev() {
            out[a] = (r % m) as i64 - self.k_max as i64;
            r /= m;
        }
    }

    pub fn k_vec(&self, kk: usize) -> Vec<i64> {
        let mut v = vec![0; self.d];
        self.k_at(kk, &mut v);
        v
    }

    /// Flat mode index of a lattice vector, if it is retained.
    pub fn k_index(&self, k: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        for &ki in k {
            if ki.unsigned_abs() as usize > self.k_max {
                return None;
            }
            idx = idx * self.nk_axis() + (ki + self.k_max as i64) as usize;
        }
        Some(idx)
    }

    /// Flat index into the `n_x^d` DFT array for a lattice vector.
    pub fn dft_index(&self, k: &[i64]) -> usize {
        let n = self.n_x as i64;
        k.iter().fold(0usize, |acc, &ki| acc * self.n_x + ki.rem_euclid(n) as usize)
    }

    /// Signed frequency of each DFT bin along one axis.
    pub fn bin_freq(&self, b: usize) -> i64 {
        let n = self.n_x as i64;
        let b = b as i64;
        if b <= n / 2 {
            b
        } else {
            b - n
        }
    }
}

/// Japanese bracket `⟨v⟩ = (1 + |v|²)^{1/2}`.
pub fn japanese(v: &[f64]) -> f64 {
    (1.0 + v.iter().map(|a| a * a).sum::<f64>()).sqrt()
}
