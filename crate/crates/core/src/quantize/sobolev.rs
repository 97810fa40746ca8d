use super::state::{dft_full, StateVector};

/// `(Σ_k ⟨εk⟩^{2s} |û_k|²)^{1/2}` over the full DFT spectrum.
pub fn sobolev_norm(u: &StateVector, s: f64, eps: f64) -> f64 {
    let g = u.grid;
    let npts = g.npts();
    let c = dft_full(u);
    let mut total = 0.0;
    for b in 0..npts {
        let mut r = b;
        let mut k2 = 0.0;
        for _ in 0..g.d {
            let f = g.bin_freq(r % g.n_x) as f64 * eps;
            k2 += f * f;
            r /= g.n_x;
        }
        let w = (1.0 + k2).powf(s);
        for comp in 0..u.n {
            total += w * c[comp * npts + b].norm_sqr();
        }
    }
    total.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symdsl::GridSpec;

    #[test]
    fn single_mode() {
        let g = GridSpec::new(1, 32, 15, 0.25).unwrap();
        let u = StateVector::mode(g, 1, &[6], 0);
        let want = (1.0f64 + 1.5 * 1.5).powf(0.5 * 2.0);
        assert!((sobolev_norm(&u, 2.0, 0.25) - want).abs() < 1e-12);
        assert!((sobolev_norm(&u, 0.0, 0.25) - u.l2()).abs() < 1e-14);
    }
}
