//! Composition expansions: `♯_q` for semiclassical and `◇_k` for Weyl
//! quantization, and remainder probes that measure the truncation order.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quantize::{FourierState, LinearOperator, OpEps, WeylOperator};
use crate::symdsl::multi::{factorial, multi_factorial, multi_indices_exact};
use crate::symdsl::{GridSpec, MatrixSymbol};

/// Denominator used in `♯_q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SharpConvention {
    /// `α! = Π α_i!`.
    #[default]
    MultiFactorial,
    /// `|α|!`; coincides with `α!` in one dimension.
    TotalFactorial,
}

/// `a1 ♯_q a2 = Σ_{|α|=q} (−i)^{|α|}/α! ∂_ξ^α a1 ∂_x^α a2`.
pub fn sharp_q(a1: &MatrixSymbol, a2: &MatrixSymbol, q: usize) -> Result<MatrixSymbol> {
    sharp_q_with(a1, a2, q, SharpConvention::MultiFactorial)
}

pub fn sharp_q_with(a1: &MatrixSymbol, a2: &MatrixSymbol, q: usize, conv: SharpConvention) -> Result<MatrixSymbol> {
    let d = a1.d();
    let zero = vec![0; d];
    let phase = C64::new(0.0, -1.0).powi(q as i32);
    let mut acc = MatrixSymbol::zeros(a1.n(), d).with_cap(a1.cap());
    for alpha in multi_indices_exact(d, q) {
        let denom = match conv {
            SharpConvention::MultiFactorial => multi_factorial(&alpha),
            SharpConvention::TotalFactorial => factorial(q),
        };
        let left = a1.differentiate(&zero, &alpha)?;
        let right = a2.differentiate(&alpha, &zero)?;
        let term = left.matmul(&right)?.scale(phase / denom);
        acc = acc.add(&term)?;
    }
    Ok(acc.with_order(a1.order() + a2.order() - q as f64))
}

/// `a1 ◇_k a2 = (−i/2)^k Σ_{|α|+|β|=k} (−1)^{|α|}/(α!β!) ∂_x^α∂_ξ^β a1 ∂_x^β∂_ξ^α a2`,
/// so that `◇_1 = (1/(2i)){a1, a2}` with `{a, b} = ∂_ξa·∂_xb − ∂_xa·∂_ξb`.
pub fn diamond_k(a1: &MatrixSymbol, a2: &MatrixSymbol, k: usize) -> Result<MatrixSymbol> {
    let d = a1.d();
    let phase = C64::new(0.0, -0.5).powi(k as i32);
    let mut acc = MatrixSymbol::zeros(a1.n(), d).with_cap(a1.cap());
    for ka in 0..=k {
        for alpha in multi_indices_exact(d, ka) {
            for beta in multi_indices_exact(d, k - ka) {
                let sign = if ka % 2 == 0 { 1.0 } else { -1.0 };
                let c = phase * sign / (multi_factorial(&alpha) * multi_factorial(&beta));
                let left = a1.differentiate(&alpha, &beta)?;
                let right = a2.differentiate(&beta, &alpha)?;
                acc = acc.add(&left.matmul(&right)?.scale(c))?;
            }
        }
    }
    Ok(acc.with_order(a1.order() + a2.order() - k as f64))
}

/// Scalar Poisson bracket `{a, b} = ∂_ξa·∂_xb − ∂_xa·∂_ξb` (d = 1 entries).
pub fn poisson_bracket(a: &MatrixSymbol, b: &MatrixSymbol) -> Result<MatrixSymbol> {
    let d = a.d();
    let mut acc = MatrixSymbol::zeros(a.n(), d).with_cap(a.cap());
    for i in 0..d {
        let mut e = vec![0; d];
        e[i] = 1;
        let z = vec![0; d];
        let t1 = a.differentiate(&z, &e)?.matmul(&b.differentiate(&e, &z)?)?;
        let t2 = a.differentiate(&e, &z)?.matmul(&b.differentiate(&z, &e)?)?;
        acc = acc.add(&t1)?.add(&t2.scale(C64::new(-1.0, 0.0)))?;
    }
    Ok(acc)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantization {
    Semiclassical,
    Weyl,
}

#[derive(Clone, Debug, Serialize)]
pub struct RemainderRow {
    /// `ε` for semiclassical probes, `1/λ` (inverse frequency scale) for Weyl.
    pub eps: f64,
    pub remainder: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RemainderReport {
    pub quantization: Quantization,
    pub n: usize,
    pub rows: Vec<RemainderRow>,
    /// Least-squares slope of `log remainder` vs `log eps`; `None` when the
    /// remainder vanishes at every sweep point.
    pub slope: Option<f64>,
    pub max_remainder: f64,
}

/// Settings of the composition probe.
#[derive(Clone, Debug)]
pub struct ProbeSettings {
    /// `K = cutoff_factor / ε`.
    pub cutoff_factor: f64,
    /// Inputs are restricted to `|k| ≤ K · input_band`, keeping every
    /// generated harmonic inside the lattice.
    pub input_band: f64,
    /// Weyl probe grid size.
    pub weyl_nx: usize,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        ProbeSettings { cutoff_factor: 4.0, input_band: 0.5, weyl_nx: 256 }
    }
}

fn full_to_lattice(g: &GridSpec, n: usize, full: &[C64]) -> FourierState {
    let (npts, nk) = (g.npts(), g.nk());
    let mut coef = vec![C64::new(0.0, 0.0); n * nk];
    let mut k = vec![0i64; g.d];
    for kk in 0..nk {
        g.k_at(kk, &mut k);
        let b = g.dft_index(&k);
        for c in 0..n {
            coef[c * nk + kk] = full[c * npts + b];
        }
    }
    FourierState { grid: *g, n, coef }
}

/// Largest singular value of a coefficient-space operator restricted to the
/// given input modes, assembled column by column.
fn coefficient_norm(g: &GridSpec, n: usize, inputs: &[usize], apply: &(dyn Fn(&FourierState) -> Vec<C64> + Sync)) -> f64 {
    let nk = g.nk();
    let cols: Vec<Vec<C64>> = inputs
        .par_iter()
        .flat_map_iter(|&kk| {
            (0..n).map(move |c| {
                let mut e = FourierState { grid: *g, n, coef: vec![C64::new(0.0, 0.0); n * nk] };
                e.coef[c * nk + kk] = C64::new(1.0, 0.0);
                apply(&e)
            })
        })
        .collect();
    let rows: Vec<usize> = (0..cols[0].len()).filter(|&r| cols.iter().any(|c| c[r] != C64::new(0.0, 0.0))).collect();
    if rows.is_empty() {
        return 0.0;
    }
    let m = DMatrix::from_fn(rows.len(), cols.len(), |i, j| cols[j][rows[i]]);
    crate::linalg::dense_spectral_norm(m)
}

fn semiclassical_grid(eps: f64, d: usize, s: &ProbeSettings) -> Result<GridSpec> {
    let k = (s.cutoff_factor / eps).ceil() as usize;
    let n_x = (2 * k + 2).next_power_of_two();
    GridSpec::new(d, n_x, k, eps)
}

/// Semiclassical remainder `‖op(a1)op(a2) − Σ_{q≤n} ε^q op(a1♯_q a2)‖` for
/// each `ε`, with inputs restricted to the band `|k| ≤ input_band · K`.
pub fn semiclassical_remainders(
    a1: &MatrixSymbol,
    a2: &MatrixSymbol,
    ns: &[usize],
    sweep: &[f64],
    s: &ProbeSettings,
) -> Result<Vec<RemainderReport>> {
    if sweep.len() < 3 {
        return Err(Error::DegenerateSweep(format!("{} epsilon values given, need at least 3", sweep.len())));
    }
    let nmax = ns.iter().copied().max().unwrap_or(0);
    let sharps: Vec<MatrixSymbol> = (0..=nmax).map(|q| sharp_q(a1, a2, q)).collect::<Result<_>>()?;
    let d = a1.d();
    let nc = a1.n();
    let mut per_n: Vec<Vec<RemainderRow>> = vec![Vec::new(); ns.len()];
    for &eps in sweep {
        let g = semiclassical_grid(eps, d, s)?;
        let o1 = OpEps::from_symbol(a1, &g, 0.0)?;
        let o2 = OpEps::from_symbol(a2, &g, 0.0)?;
        let oq: Vec<OpEps> = sharps.iter().map(|m| OpEps::from_symbol(m, &g, 0.0)).collect::<Result<_>>()?;
        let band = (s.input_band * g.k_max as f64).floor() as i64;
        let inputs: Vec<usize> = (0..g.nk()).filter(|&kk| g.k_vec(kk).iter().all(|v| v.abs() <= band)).collect();
        for (slot, &n) in ns.iter().enumerate() {
            let apply = |u: &FourierState| {
                let mid = full_to_lattice(&g, nc, &o2.apply_coef(u));
                let mut w = o1.apply_coef(&mid);
                for (q, op) in oq.iter().enumerate().take(n + 1) {
                    let t = op.apply_coef(u);
                    let c = eps.powi(q as i32);
                    for (a, b) in w.iter_mut().zip(&t) {
                        *a -= b * c;
                    }
                }
                w
            };
            let r = coefficient_norm(&g, nc, &inputs, &apply);
            per_n[slot].push(RemainderRow { eps, remainder: r });
        }
    }
    Ok(ns.iter().zip(per_n).map(|(&n, rows)| finish(Quantization::Semiclassical, n, rows)).collect())
}

fn finish(quantization: Quantization, n: usize, rows: Vec<RemainderRow>) -> RemainderReport {
    let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.remainder > 0.0).map(|r| (r.eps.ln(), r.remainder.ln())).collect();
    let max_remainder = rows.iter().map(|r| r.remainder).fold(0.0, f64::max);
    let slope = if pts.len() >= 2 && max_remainder > 1e-12 { Some(crate::linalg::ls_slope(&pts)) } else { None };
    RemainderReport { quantization, n, rows, slope, max_remainder }
}

/// Weyl remainder at `ε = 1`: the composite error restricted to the dyadic
/// shell `λ/2 < |k| ≤ λ`, swept over `λ = 1/eps`.
pub fn weyl_remainders(a1: &MatrixSymbol, a2: &MatrixSymbol, ns: &[usize], sweep: &[f64], s: &ProbeSettings) -> Result<Vec<RemainderReport>> {
    if sweep.len() < 3 {
        return Err(Error::DegenerateSweep(format!("{} scales given, need at least 3", sweep.len())));
    }
    let n_x = s.weyl_nx;
    let g = GridSpec::with_full_band(1, n_x, 0.5)?;
    let nmax = ns.iter().copied().max().unwrap_or(0);
    let diamonds: Vec<WeylOperator> = (0..=nmax).map(|k| WeylOperator::from_symbol(&diamond_k(a1, a2, k)?, &g)).collect::<Result<_>>()?;
    let w1 = WeylOperator::from_symbol(a1, &g)?;
    let w2 = WeylOperator::from_symbol(a2, &g)?;
    let prod = w1.matrix() * w2.matrix();
    let nc = a1.n();
    let mut out = Vec::new();
    for &n in ns {
        let mut r = prod.clone();
        for op in diamonds.iter().take(n + 1) {
            r -= op.matrix();
        }
        let mut rows = Vec::new();
        for &eps in sweep {
            let lam = 1.0 / eps;
            if lam > (n_x / 4) as f64 {
                return Err(Error::Grid(format!("frequency scale {} too large for n_x = {}", lam, n_x)));
            }
            let rem = shell_norm(&r, &g, nc, lam);
            rows.push(RemainderRow { eps, remainder: rem });
        }
        out.push(finish(Quantization::Weyl, n, rows));
    }
    Ok(out)
}

/// Norm of `R` restricted to states with frequencies in `λ/2 < |k| ≤ λ`.
fn shell_norm(r: &DMatrix<C64>, g: &GridSpec, nc: usize, lam: f64) -> f64 {
    let n = g.n_x;
    let modes: Vec<i64> = (-(n as i64) / 2 + 1..(n as i64) / 2).filter(|k| (k.abs() as f64) > lam / 2.0 && (k.abs() as f64) <= lam).collect();
    // columns: unit-L² plane waves in each component
    let basis = DMatrix::from_fn(n * nc, modes.len() * nc, |row, col| {
        let (c, j) = (row / n, row % n);
        let (mc, mi) = (col / modes.len(), col % modes.len());
        if c != mc {
            return C64::new(0.0, 0.0);
        }
        C64::from_polar(1.0, g.dx() * j as f64 * modes[mi] as f64)
    });
    let img = r * basis;
    // the plane waves are orthonormal for the mean-square inner product
    crate::linalg::dense_spectral_norm(img) / (n as f64).sqrt()
}

/// Dispatches on the quantization kind.
pub fn composition_remainder_probe(
    a1: &MatrixSymbol,
    a2: &MatrixSymbol,
    n: usize,
    sweep: &[f64],
    quantization: Quantization,
) -> Result<RemainderReport> {
    let s = ProbeSettings::default();
    let mut reps = match quantization {
        Quantization::Semiclassical => semiclassical_remainders(a1, a2, &[n], sweep, &s)?,
        Quantization::Weyl => weyl_remainders(a1, a2, &[n], sweep, &s)?,
    };
    Ok(reps.remove(0))
}

/// Writes `eps,remainder,fit_slope`.
pub fn write_remainder_csv<W: Write>(w: &mut W, rep: &RemainderReport) -> Result<()> {
    writeln!(w, "eps,remainder,fit_slope")?;
    let slope = rep.slope.map(|s| format!("{:.6}", s)).unwrap_or_else(|| "nan".into());
    for r in &rep.rows {
        writeln!(w, "{:.12e},{:.12e},{}", r.eps, r.remainder, slope)?;
    }
    Ok(())
}

/// Operator `op_ε(a)` for a sampled time, for callers that only need the trait.
pub fn op_eps(a: &MatrixSymbol, g: &GridSpec, t: f64) -> Result<Box<dyn LinearOperator>> {
    Ok(Box::new(OpEps::from_symbol(a, g, t)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(s: &str) -> MatrixSymbol {
        MatrixSymbol::parse(s, 1, 0.0).unwrap()
    }

    fn agree(a: &MatrixSymbol, b: &MatrixSymbol) {
        for i in 0..20 {
            let x = [0.3 * i as f64];
            let xi = [1.7 - 0.4 * i as f64];
            for (u, v) in a.eval(&x, &xi, 0.0).iter().zip(b.eval(&x, &xi, 0.0)) {
                assert!((u - v).norm() < 1e-12, "{} vs {}", u, v);
            }
        }
    }

    #[test]
    fn sharp_zero_is_product() {
        let a = sym("[[cos(x1), xi1*bracket(-1)], [1, sin(x1)]]");
        let b = sym("[[1, 2], [exp(cos(x1)), bracket(-2)]]");
        agree(&sharp_q(&a, &b, 0).unwrap(), &a.matmul(&b).unwrap());
    }

    #[test]
    fn sharp_one_example() {
        let psi = sym("xi1*bracket(-1)");
        let e = sym("cos(x1) + i*sin(x1)");
        let want = psi.differentiate(&[0], &[1]).unwrap().matmul(&e).unwrap();
        agree(&sharp_q(&psi, &e, 1).unwrap(), &want);
    }

    #[test]
    fn diamond_one_is_half_bracket() {
        let a = sym("cos(x1)*bracket(-1)");
        let b = sym("sin(2*x1)*xi1*bracket(-2)");
        let pb = poisson_bracket(&a, &b).unwrap().scale(C64::new(0.0, -0.5));
        agree(&diamond_k(&a, &b, 1).unwrap(), &pb);
        assert!(diamond_k(&a, &a, 1).unwrap().eval(&[0.4], &[0.9], 0.0)[0].norm() < 1e-15);
    }

    #[test]
    fn fourier_multipliers_compose_exactly() {
        let a = sym("bracket(-1)");
        let b = sym("xi1*bracket(-2)");
        let rep = composition_remainder_probe(&a, &b, 0, &[0.25, 0.125, 0.0625], Quantization::Semiclassical).unwrap();
        assert!(rep.max_remainder < 1e-10);
    }
}
