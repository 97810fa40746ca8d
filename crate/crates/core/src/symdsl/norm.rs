use rayon::prelude::*;
use serde::Serialize;

use super::grid::GridSpec;
use super::multi;
use super::symbol::MatrixSymbol;
use crate::error::Result;

/// Highest derivative order entering `‖·‖_r`: `r + 2([d/2] + 1)`.
pub fn norm_derivative_range(r: usize, d: usize) -> usize {
    r + 2 * (d / 2 + 1)
}

/// For every joint multi-index and every extended-lattice mode, the largest
/// weighted entry modulus over the x-grid: `⟨k⟩^{|β|-m} max_x |∂_x^α ∂_ξ^β s|`.
fn weighted_profiles(s: &MatrixSymbol, m: f64, max_ord: usize, g: &GridSpec) -> Result<Vec<(Vec<usize>, Vec<(f64, f64)>)>> {
    let d = s.d();
    let table = s.derivative_table(max_ord)?;
    let ext = GridSpec { k_max: 4 * g.k_max, ..*g };
    let nk = ext.nk();
    let npts = g.npts();
    let out = table
        .indices()
        .par_iter()
        .map(|gamma| {
            let ds = table.get_joint(gamma).unwrap();
            let beta_ord = multi::order(&gamma[d..]) as f64;
            let mut x = vec![0.0; d];
            let mut k = vec![0i64; d];
            let mut xi = vec![0.0; d];
            let mut buf = vec![num_complex::Complex64::new(0.0, 0.0); s.n() * s.n()];
            let mut prof = Vec::with_capacity(nk);
            for kk in 0..nk {
                ext.k_at(kk, &mut k);
                for (a, v) in xi.iter_mut().zip(&k) {
                    *a = *v as f64;
                }
                let br = super::grid::japanese(&xi);
                let w = br.powf(beta_ord - m);
                let mut mx: f64 = 0.0;
                for jx in 0..npts {
                    g.x_at(jx, &mut x);
                    ds.eval_into(&x, &xi, 0.0, &mut buf);
                    for v in &buf {
                        mx = mx.max(v.norm());
                    }
                }
                prof.push((br, w * mx));
            }
            (gamma.clone(), prof)
        })
        .collect();
    Ok(out)
}

/// Symbol norm `‖s‖_r` as a grid maximum over the extended lattice `|k_i| ≤ 4K`.
pub fn symbol_norm(s: &MatrixSymbol, r: usize, g: &GridSpec) -> Result<f64> {
    let max_ord = norm_derivative_range(r, s.d());
    let profiles = weighted_profiles(s, s.order(), max_ord, g)?;
    Ok(profiles.iter().flat_map(|(_, p)| p.iter().map(|v| v.1)).fold(0.0, f64::max))
}

/// Observed constant for one derivative.
#[derive(Clone, Debug, Serialize)]
pub struct ClassEntry {
    pub alpha: Vec<usize>,
    pub beta: Vec<usize>,
    pub constant: f64,
    /// Least-squares slope of `log value` against `log⟨k⟩`; `None` when the
    /// derivative vanishes identically on the lattice.
    pub slope: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassReport {
    pub order: f64,
    pub r: usize,
    pub entries: Vec<ClassEntry>,
    pub slope_tol: f64,
    pub pass: bool,
}

/// Checks membership in the order-`m` class up to the `‖·‖_r` derivative range.
pub fn check_class(s: &MatrixSymbol, m: f64, r: usize, g: &GridSpec) -> Result<ClassReport> {
    const SLOPE_TOL: f64 = 0.1;
    let d = s.d();
    let max_ord = norm_derivative_range(r, d);
    let profiles = weighted_profiles(s, m, max_ord, g)?;
    let mut entries = Vec::with_capacity(profiles.len());
    let mut pass = true;
    for (gamma, prof) in profiles {
        let constant = prof.iter().map(|v| v.1).fold(0.0, f64::max);
        // growth is read off the last two octaves of the extended lattice, so
        // profiles with compact frequency support pass
        let br_max = prof.iter().map(|p| p.0).fold(1.0, f64::max);
        let pts: Vec<(f64, f64)> =
            prof.iter().filter(|(br, v)| *br > 1.5 && *br >= 0.25 * br_max && *v > 1e-300).map(|(br, v)| (br.ln(), v.ln())).collect();
        let slope = if pts.len() >= 2 && constant > 1e-14 { Some(crate::linalg::ls_slope(&pts)) } else { None };
        if let Some(sl) = slope {
            if sl > SLOPE_TOL {
                pass = false;
            }
        }
        entries.push(ClassEntry { alpha: gamma[..d].to_vec(), beta: gamma[d..].to_vec(), constant, slope });
    }
    Ok(ClassReport { order: m, r, entries, slope_tol: SLOPE_TOL, pass })
}

/// Pointwise growth rates of `M(t, x_j, εk)` over the sampled grid.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GridRates {
    /// `max ‖M‖`, the Gronwall rate.
    pub gamma_inf: f64,
    /// `max Re σ(M)`.
    pub gamma_spec: f64,
    /// `max σ((M + M*)/2)`.
    pub gamma_garding: f64,
    /// Grid position and lattice mode index of the `gamma_spec` maximum.
    pub argmax: (usize, usize),
}

pub fn grid_rates(m: &MatrixSymbol, g: &GridSpec, t: f64) -> GridRates {
    let n = m.n();
    let npts = g.npts();
    let per_mode: Vec<(f64, f64, f64, usize)> = (0..g.nk())
        .into_par_iter()
        .map(|kk| {
            let mut x = vec![0.0; g.d];
            let k = g.k_vec(kk);
            let xi: Vec<f64> = k.iter().map(|v| *v as f64 * g.eps).collect();
            let mut buf = vec![num_complex::Complex64::new(0.0, 0.0); n * n];
            let (mut gi, mut gs, mut gg, mut arg) = (0.0f64, f64::NEG_INFINITY, f64::NEG_INFINITY, 0);
            for jx in 0..npts {
                g.x_at(jx, &mut x);
                m.eval_into(&x, &xi, t, &mut buf);
                gi = gi.max(crate::linalg::spectral_norm(&buf, n));
                let re = crate::linalg::eigenvalues(&buf, n).iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
                if re > gs {
                    gs = re;
                    arg = jx;
                }
                gg = gg.max(crate::linalg::hermitian_part_max(&buf, n));
            }
            (gi, gs, gg, arg)
        })
        .collect();
    let mut r = GridRates { gamma_inf: 0.0, gamma_spec: f64::NEG_INFINITY, gamma_garding: f64::NEG_INFINITY, argmax: (0, 0) };
    for (kk, (gi, gs, gg, arg)) in per_mode.into_iter().enumerate() {
        r.gamma_inf = r.gamma_inf.max(gi);
        r.gamma_garding = r.gamma_garding.max(gg);
        if gs > r.gamma_spec {
            r.gamma_spec = gs;
            r.argmax = (arg, kk);
        }
    }
    r
}
