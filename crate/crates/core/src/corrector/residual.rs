use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::family::CorrectorFamily;
use crate::error::{Error, Result};
use crate::quantize::{idft_full, project_lattice, to_fourier, FnOperator, FourierState, NormProbe, OpEps, StateVector};
use crate::symdsl::{japanese, MatrixSymbol};

/// Input restriction and norm method of [`residual_probe_with`].
#[derive(Clone, Copy, Debug)]
pub struct ResidualSettings {
    /// Inputs are restricted to `|k_i| ≤ input_band·K`, so that outputs of
    /// `op_ε(Σ)` stay on the lattice before `op_ε(M)` acts.
    pub input_band: f64,
    pub probe: NormProbe,
    pub seed: u64,
}

impl Default for ResidualSettings {
    fn default() -> Self {
        ResidualSettings { input_band: 0.5, probe: NormProbe::default(), seed: 0x5eed }
    }
}

/// `(1/ε)(∂_t op_ε(Σ) − op_ε(M) op_ε(Σ))` at a stored node, as a map
/// `H_ε^{−q0−1} → L²`.
pub fn residual_probe(m: &MatrixSymbol, fam: &CorrectorFamily, eps: f64, t: f64) -> Result<f64> {
    residual_probe_with(m, fam, eps, t, &ResidualSettings::default())
}

pub fn residual_probe_with(m: &MatrixSymbol, fam: &CorrectorFamily, eps: f64, t: f64, settings: &ResidualSettings) -> Result<f64> {
    let g = fam.grid;
    if (eps - g.eps).abs() > 1e-14 * eps {
        return Err(Error::Precondition(format!("family was sampled at ε = {}, probe asks for ε = {}", g.eps, eps)));
    }
    let node = fam.node_of(t).ok_or_else(|| Error::Precondition(format!("t = {} is not a stored node", t)))?;
    let sig = OpEps::new(&fam.sigma(node, eps))?;
    let dsig = OpEps::new(&fam.dsigma(node, eps))?;
    let op_m = OpEps::from_symbol(m, &g, fam.times[node])?;
    let nk = g.nk();
    let n = fam.n;
    let band = settings.input_band * g.k_max as f64;
    let s = (fam.q0 + 1) as i32;
    let weights: Vec<f64> = (0..nk)
        .map(|kk| {
            let k = g.k_vec(kk);
            if k.iter().any(|v| (*v as f64).abs() > band) {
                0.0
            } else {
                let xi: Vec<f64> = k.iter().map(|v| *v as f64 * eps).collect();
                japanese(&xi).powi(s)
            }
        })
        .collect();
    let apply = |u: &StateVector| -> StateVector {
        let mut uh = to_fourier(u);
        for c in 0..n {
            for (v, w) in uh.coef[c * nk..(c + 1) * nk].iter_mut().zip(&weights) {
                *v *= *w;
            }
        }
        let a = dsig.apply_coef(&uh);
        let mid: FourierState = project_lattice(g, n, &sig.apply_coef(&uh));
        let b = op_m.apply_coef(&mid);
        let inv = 1.0 / eps;
        let out: Vec<C64> = a.iter().zip(&b).map(|(x, y)| (x - y) * inv).collect();
        idft_full(g, n, out)
    };
    let op = FnOperator { grid: g, n, f: apply };
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    Ok(settings.probe.estimate(&op, 1, &mut rng).value)
}
