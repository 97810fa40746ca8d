use num_complex::Complex64 as C64;

use super::state::{from_fourier, to_fourier, StateVector};
use crate::error::{Error, Result};
pub use crate::symdsl::cutoff::{chi, phi_profile, smooth_step};
use crate::symdsl::GridSpec;

/// Dyadic partition `φ_0, …, φ_J` plus the tail `φ_{J+1} = 1 − χ(|k|/2^J)`,
/// with companions `ψ_j ≡ 1` on `supp φ_j`, tabulated on the lattice.
#[derive(Clone, Debug)]
pub struct DyadicFilterBank {
    pub j_max: usize,
    pub grid: GridSpec,
    pub phi: Vec<Vec<f64>>,
    pub psi: Vec<Vec<f64>>,
}

/// `ψ_j` at radius `r`: 1 on `[2^{j-1}, 2^{j+1}]` (on `[0, 2]` for j = 0, on
/// `[2^J, ∞)` for the tail), smooth cut-offs over a quarter of each end.
pub fn psi_profile(j: usize, j_max: usize, r: f64) -> f64 {
    if j == 0 {
        return smooth_step(r, 2.0, 2.5);
    }
    let lo = if j <= j_max { 2f64.powi(j as i32 - 1) } else { 2f64.powi(j_max as i32) };
    let low_cut = 1.0 - smooth_step(r, 0.75 * lo, lo);
    if j > j_max {
        return low_cut;
    }
    let hi = 2f64.powi(j as i32 + 1);
    low_cut * smooth_step(r, hi, 1.25 * hi)
}

/// Builds the bank for blocks `0..=J` (and the tail `J+1`).
pub fn lp_filters(j_max: usize, g: &GridSpec) -> Result<DyadicFilterBank> {
    let need = 1usize << (j_max + 1);
    if need > g.k_max {
        return Err(Error::CutoffTooSmall { need, cutoff: g.k_max });
    }
    let nk = g.nk();
    let radii: Vec<f64> = (0..nk)
        .map(|kk| {
            let k = g.k_vec(kk);
            k.iter().map(|v| (*v as f64).powi(2)).sum::<f64>().sqrt()
        })
        .collect();
    let blocks = j_max + 2;
    let phi = (0..blocks).map(|j| radii.iter().map(|&r| phi_profile(j, j_max, r)).collect()).collect();
    let psi = (0..blocks).map(|j| radii.iter().map(|&r| psi_profile(j, j_max, r)).collect()).collect();
    Ok(DyadicFilterBank { j_max, grid: *g, phi, psi })
}

impl DyadicFilterBank {
    /// Number of blocks including the tail.
    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    fn multiply(&self, table: &[f64], u: &StateVector) -> StateVector {
        let mut c = to_fourier(u);
        let nk = self.grid.nk();
        for comp in 0..u.n {
            for (v, w) in c.coef[comp * nk..(comp + 1) * nk].iter_mut().zip(table) {
                *v *= C64::new(*w, 0.0);
            }
        }
        from_fourier(&c).unwrap()
    }

    /// `φ_j(D) u`.
    pub fn apply_phi(&self, j: usize, u: &StateVector) -> StateVector {
        self.multiply(&self.phi[j], u)
    }

    /// `ψ_j(D) u`.
    pub fn apply_psi(&self, j: usize, u: &StateVector) -> StateVector {
        self.multiply(&self.psi[j], u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_and_companions() {
        let g = GridSpec::new(1, 128, 63, 0.5).unwrap();
        let bank = lp_filters(4, &g).unwrap();
        for kk in 0..g.nk() {
            let s: f64 = bank.phi.iter().map(|p| p[kk]).sum();
            assert!((s - 1.0).abs() < 1e-12);
            for j in 0..bank.len() {
                let (p, q) = (bank.phi[j][kk], bank.psi[j][kk]);
                assert_eq!(p * q * q, p);
            }
        }
        for j in 1..=4 {
            for kk in 0..g.nk() {
                let r = g.k_vec(kk)[0].abs() as f64;
                if bank.phi[j][kk] != 0.0 {
                    assert!(r >= 2f64.powi(j as i32 - 1) && r <= 2f64.powi(j as i32 + 1));
                }
            }
        }
        assert!(lp_filters(5, &g).is_err());
    }
}
