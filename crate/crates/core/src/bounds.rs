//! Growth rates of `exp(t op_ε(M))`: spectral and Gårding suprema of the
//! symbol, measured upper and localized lower rates, and the semilinear
//! instability experiment.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::corrector::{
    default_corrector_dt, eps_guard, fit_step, q0_from, residual_probe, solve_family, EpsGuardReport, FamilyOptions, NodeSelection,
};
use crate::error::{Error, Result};
use crate::flow::{default_dt, evolve_linear, evolve_semilinear, project, FlowOptions, QuadraticNonlinearity, Trajectory};
use crate::linalg::{dense_spectral_norm, eigenvalues, hermitian_part_max, leading_eigenpair, ls_fit, ls_slope};
use crate::quantize::{from_fourier, to_fourier, FourierState, StateVector};
use crate::symdsl::{GridSpec, MatrixSymbol};

#[derive(Clone, Debug, Serialize)]
pub struct RateReport {
    /// `sup Re σ(M)`.
    pub gamma_spec: f64,
    /// `sup σ((M + M*)/2)`.
    pub gamma_garding: f64,
    pub argmax_x: Vec<f64>,
    pub argmax_xi: Vec<f64>,
    /// Argmax restricted to the resolved band `|k| ≤ K/2`, where packets live.
    pub packet_x: Vec<f64>,
    pub packet_xi: Vec<f64>,
    pub packet_gamma: f64,
    pub upper_rate: Option<f64>,
    pub lower_rate: Option<f64>,
    /// Fitted exponent of the `|ln ε|` prefactor.
    pub prefactor_exponent: Option<f64>,
}

fn spectral_abscissa(a: &[C64], n: usize) -> f64 {
    eigenvalues(a, n).iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Suprema over `(x_j, εk)` with `|k_i| ≤ 4K`, refined once around the
/// spectral argmax on a half-spacing stencil.
pub fn gamma_sup(m: &MatrixSymbol, g: &GridSpec) -> RateReport {
    let d = g.d;
    let n = m.n();
    let ext = GridSpec { k_max: 4 * g.k_max, ..*g };
    let npts = g.npts();
    let per_mode: Vec<(f64, f64, usize)> = (0..ext.nk())
        .into_par_iter()
        .map(|kk| {
            let xi: Vec<f64> = ext.k_vec(kk).iter().map(|v| *v as f64 * g.eps).collect();
            let mut x = vec![0.0; d];
            let mut buf = vec![C64::new(0.0, 0.0); n * n];
            let (mut best, mut garding, mut arg) = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0);
            for jx in 0..npts {
                g.x_at(jx, &mut x);
                m.eval_into(&x, &xi, 0.0, &mut buf);
                let s = spectral_abscissa(&buf, n);
                if s > best {
                    best = s;
                    arg = jx;
                }
                garding = garding.max(hermitian_part_max(&buf, n));
            }
            (best, garding, arg)
        })
        .collect();
    let (mut gs, mut gg, mut x_star, mut xi_star) = (f64::NEG_INFINITY, f64::NEG_INFINITY, vec![0.0; d], vec![0.0; d]);
    // ties go to the smallest |k|, so ξ-flat symbols pick ξ = 0
    let mut order: Vec<usize> = (0..per_mode.len()).collect();
    order.sort_by_key(|&kk| ext.k_vec(kk).iter().map(|v| v.abs()).sum::<i64>());
    let (mut pg, mut px, mut pxi) = (f64::NEG_INFINITY, vec![0.0; d], vec![0.0; d]);
    for kk in order {
        let (s, h, arg) = per_mode[kk];
        gg = gg.max(h);
        let kv = ext.k_vec(kk);
        if kv.iter().all(|v| 2 * v.unsigned_abs() as usize <= g.k_max) && (!pg.is_finite() || s > pg + 1e-13 * pg.abs().max(1.0)) {
            pg = s;
            g.x_at(arg, &mut px);
            pxi = kv.iter().map(|v| *v as f64 * g.eps).collect();
        }
        if !gs.is_finite() || s > gs + 1e-13 * gs.abs().max(1.0) {
            gs = s;
            g.x_at(arg, &mut x_star);
            xi_star = ext.k_vec(kk).iter().map(|v| *v as f64 * g.eps).collect();
        }
    }
    let (hx, hxi) = (0.5 * g.dx(), 0.5 * g.eps);
    let mut buf = vec![C64::new(0.0, 0.0); n * n];
    let stencil = 3usize.pow(2 * d as u32);
    let (cx, cxi) = (x_star.clone(), xi_star.clone());
    for s in 0..stencil {
        let mut r = s;
        let mut x = cx.clone();
        let mut xi = cxi.clone();
        for i in 0..2 * d {
            let off = (r % 3) as f64 - 1.0;
            r /= 3;
            if i < d {
                x[i] += off * hx;
            } else {
                xi[i - d] += off * hxi;
            }
        }
        m.eval_into(&x, &xi, 0.0, &mut buf);
        let v = spectral_abscissa(&buf, n);
        gg = gg.max(hermitian_part_max(&buf, n));
        if v > gs + 1e-13 * gs.abs().max(1.0) {
            gs = v;
            x_star = x;
            xi_star = xi;
        }
    }
    RateReport {
        gamma_spec: gs,
        gamma_garding: gg,
        argmax_x: x_star,
        argmax_xi: xi_star,
        packet_x: px,
        packet_xi: pxi,
        packet_gamma: pg,
        upper_rate: None,
        lower_rate: None,
        prefactor_exponent: None,
    }
}

/// Settings shared by the upper and lower experiments.
#[derive(Clone, Debug)]
pub struct SweepSettings {
    pub n_x: usize,
    pub k_max: usize,
    /// Observation times per run, spread over `[T/2, T]·|ln ε|`.
    pub samples: usize,
    pub enforce_guard: bool,
    /// Tolerance on the rate comparisons.
    pub tol: f64,
    pub dense_cap: usize,
    /// Ramp the ball indicator over one grid spacing instead of cutting sharply.
    pub smooth_ball: bool,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings { n_x: 256, k_max: 127, samples: 8, enforce_guard: true, tol: 0.1, dense_cap: 4096, smooth_ball: false }
    }
}

fn pilot_dt(m: &MatrixSymbol, g: &GridSpec, t_end: f64, nodes: usize) -> Result<f64> {
    // one refined run on a fixed smooth datum fixes the step for every column
    let u = StateVector::from_fn(*g, m.n(), |x| {
        let b = (-(1.0 - x[0].cos())).exp();
        (0..m.n()).map(|c| C64::new(b, 0.1 * c as f64)).collect()
    });
    let tr = evolve_linear(m, &u, t_end, &FlowOptions { nodes, dt: Some(default_dt(m, g)), sobolev_orders: vec![], ..Default::default() })?;
    Ok(tr.dt)
}

/// `‖exp(t op_ε(M))‖_{L²→L²}` at `nodes` equally spaced times in `(0, t_end]`,
/// from the dense flow matrix on the lattice.
pub fn flow_norms(m: &MatrixSymbol, g: &GridSpec, t_end: f64, nodes: usize, dense_cap: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = m.n();
    let nk = g.nk();
    let dim = n * nk;
    if dim > dense_cap {
        return Err(Error::Unsupported(format!("dense flow matrix of size {} exceeds cap {}", dim, dense_cap)));
    }
    let dt = pilot_dt(m, g, t_end, nodes)?;
    let opts = FlowOptions { dt: Some(dt), refine: false, nodes, sobolev_orders: vec![], ..Default::default() };
    let cols: Vec<Trajectory> = (0..dim)
        .into_par_iter()
        .map(|i| {
            let mut c = FourierState { grid: *g, n, coef: vec![C64::new(0.0, 0.0); dim] };
            c.coef[i] = C64::new(1.0, 0.0);
            evolve_linear(m, &from_fourier(&c)?, t_end, &opts)
        })
        .collect::<Result<_>>()?;
    let times: Vec<f64> = cols[0].times[1..].to_vec();
    let norms = (1..cols[0].times.len())
        .map(|node| {
            let mut a = DMatrix::from_element(dim, dim, C64::new(0.0, 0.0));
            for (i, tr) in cols.iter().enumerate() {
                let c = to_fourier(&tr.states[node]);
                for (r, v) in c.coef.iter().enumerate() {
                    a[(r, i)] = *v;
                }
            }
            dense_spectral_norm(a)
        })
        .collect();
    Ok((times, norms))
}

#[derive(Clone, Debug, Serialize)]
pub struct UpperRow {
    pub eps: f64,
    pub guard: EpsGuardReport,
    pub skipped: bool,
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    /// Log-slope of the norm over `[T/2, T]·|ln ε|`.
    pub rate: Option<f64>,
    /// `log‖·‖ / t` at the final time.
    pub mean_rate: Option<f64>,
    pub pass: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct UpperReport {
    pub rates: RateReport,
    pub big_t: f64,
    pub tol: f64,
    pub rows: Vec<UpperRow>,
    pub pass: bool,
}

/// Window `[T/2, T]·|ln ε|` of a time series.
fn late_half(times: &[f64], values: &[f64], t_end: f64) -> Vec<(f64, f64)> {
    times.iter().zip(values).filter(|(t, _)| **t >= 0.5 * t_end - 1e-12).map(|(t, v)| (*t, v.ln())).collect()
}

pub fn upper_bound_experiment(m: &MatrixSymbol, eps_list: &[f64], big_t: f64, s: &SweepSettings) -> Result<UpperReport> {
    let g0 = GridSpec::new(m.d(), s.n_x, s.k_max, eps_list.first().copied().unwrap_or(0.5))?;
    let mut rates = gamma_sup(m, &g0);
    let mut rows = Vec::new();
    for &eps in eps_list {
        let g = g0.with_eps(eps)?;
        let guard = eps_guard(eps, m, big_t, &g)?;
        if s.enforce_guard && !guard.pass {
            rows.push(UpperRow { eps, guard, skipped: true, times: vec![], norms: vec![], rate: None, mean_rate: None, pass: None });
            continue;
        }
        let gamma = gamma_sup(m, &g).gamma_spec;
        let t_end = big_t * eps.ln().abs();
        let nodes = 2 * s.samples.max(2);
        let (times, norms) = flow_norms(m, &g, t_end, nodes, s.dense_cap)?;
        let rate = ls_slope(&late_half(&times, &norms, t_end));
        let mean_rate = norms.last().unwrap().ln() / t_end;
        rows.push(UpperRow {
            eps,
            guard,
            skipped: false,
            times,
            norms,
            rate: Some(rate),
            mean_rate: Some(mean_rate),
            pass: Some(rate <= gamma + s.tol),
        });
    }
    let run: Vec<&UpperRow> = rows.iter().filter(|r| !r.skipped).collect();
    if !run.is_empty() {
        rates.upper_rate = run.iter().filter_map(|r| r.rate).fold(None, |a: Option<f64>, v| Some(a.map_or(v, |a| a.max(v))));
        if run.len() >= 2 {
            let pts: Vec<(f64, f64)> = run
                .iter()
                .map(|r| {
                    let t = *r.times.last().unwrap();
                    (r.eps.ln().abs().ln(), r.norms.last().unwrap().ln() - rates.gamma_spec * t)
                })
                .collect();
            rates.prefactor_exponent = Some(ls_slope(&pts));
        }
    }
    let pass = !run.is_empty() && run.iter().all(|r| r.pass == Some(true));
    Ok(UpperReport { rates, big_t, tol: s.tol, rows, pass })
}

#[derive(Clone, Debug)]
pub struct WavePacket {
    /// `ε·k0`, the snapped frequency.
    pub xi0: Vec<f64>,
    pub k0: Vec<i64>,
    pub x0: Vec<f64>,
    pub radius: f64,
    pub eps: f64,
    /// Eigenvalue of the followed branch at `x0`.
    pub lambda: C64,
    pub gap: f64,
    pub state: StateVector,
}

/// Minimum spectral gap accepted at the argmax.
pub const PACKET_GAP_TOL: f64 = 1e-3;

fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

fn torus_dist(a: &[f64], b: &[f64]) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = (x - y).rem_euclid(tau);
            let d = d.min(tau - d);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PacketNorm {
    L2,
    LInf,
}

/// `e^{ik0·x} χ(|x−x0|/r) v(x)` with `v` the leading eigenvector of
/// `M(x, εk0)`, phase-aligned outward from `x0`, projected onto the lattice.
/// d = 1.
pub fn make_wave_packet(m: &MatrixSymbol, g: &GridSpec, rate: &RateReport, radius: f64, norm: PacketNorm) -> Result<WavePacket> {
    if g.d != 1 {
        return Err(Error::Unsupported("wave packets are implemented for d = 1".into()));
    }
    let n = m.n();
    let k0: Vec<i64> = rate.packet_xi.iter().map(|v| (v / g.eps).round() as i64).collect();
    if k0.iter().any(|k| k.unsigned_abs() as usize > g.k_max) {
        return Err(Error::Grid(format!("packet frequency {:?} lies outside the lattice", k0)));
    }
    let xi0: Vec<f64> = k0.iter().map(|k| *k as f64 * g.eps).collect();
    let npts = g.npts();
    let j0 = ((rate.packet_x[0] / g.dx()).round() as i64).rem_euclid(g.n_x as i64) as usize;
    let x0 = vec![j0 as f64 * g.dx()];
    let (lambda, _, gap) = leading_eigenpair(&m.eval(&x0, &xi0, 0.0), n);
    if gap < PACKET_GAP_TOL {
        return Err(Error::SpectralGap { gap, tol: PACKET_GAP_TOL });
    }
    let mut vecs: Vec<Option<Vec<C64>>> = vec![None; npts];
    let eig_at = |j: usize| -> Vec<C64> { leading_eigenpair(&m.eval(&[j as f64 * g.dx()], &xi0, 0.0), n).1 };
    vecs[j0] = Some(eig_at(j0));
    for dir in [1i64, -1] {
        let mut prev = vecs[j0].clone().unwrap();
        for step in 1..=(npts / 2) as i64 {
            let j = (j0 as i64 + dir * step).rem_euclid(npts as i64) as usize;
            if vecs[j].is_some() {
                break;
            }
            let mut v = eig_at(j);
            let ip: C64 = prev.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            if ip.norm() > 0.0 {
                let ph = ip.conj() / ip.norm();
                v.iter_mut().for_each(|c| *c *= ph);
            }
            prev = v.clone();
            vecs[j] = Some(v);
        }
    }
    let mut u = StateVector::zeros(*g, n);
    let mut x = [0.0];
    for j in 0..npts {
        g.x_at(j, &mut x);
        let w = bump(torus_dist(&x, &x0) / radius);
        if w == 0.0 {
            continue;
        }
        let ph = C64::from_polar(1.0, k0[0] as f64 * x[0]);
        let v = vecs[j].as_ref().unwrap();
        for c in 0..n {
            u.data[c * npts + j] = ph * v[c] * w;
        }
    }
    let mut u = project(&u);
    let scale = match norm {
        PacketNorm::L2 => u.l2(),
        PacketNorm::LInf => u.linf(),
    };
    u.scale_mut(C64::new(1.0 / scale, 0.0));
    Ok(WavePacket { xi0, k0, x0, radius, eps: g.eps, lambda, gap, state: u })
}

/// L² norm (grid mean square) of `u` restricted to the ball `B(x0, r)`.
pub fn local_norm(u: &StateVector, x0: &[f64], r: f64) -> f64 {
    local_norm_with(u, x0, r, false)
}

pub fn local_norm_with(u: &StateVector, x0: &[f64], r: f64, smooth: bool) -> f64 {
    let g = u.grid;
    let npts = g.npts();
    let mut x = vec![0.0; g.d];
    let mut acc = 0.0;
    for j in 0..npts {
        g.x_at(j, &mut x);
        let dist = torus_dist(&x, x0);
        let w = if smooth {
            ((r - dist) / g.dx() + 0.5).clamp(0.0, 1.0)
        } else if dist < r {
            1.0
        } else {
            0.0
        };
        if w > 0.0 {
            for c in 0..u.n {
                acc += w * u.data[c * npts + j].norm_sqr();
            }
        }
    }
    (acc / npts as f64).sqrt()
}

#[derive(Clone, Debug, Serialize)]
pub struct LowerRow {
    pub eps: f64,
    pub guard: EpsGuardReport,
    pub skipped: bool,
    pub times: Vec<f64>,
    pub local_norms: Vec<f64>,
    pub rate: Option<f64>,
    /// `local(T) / (|ln ε|^{-d} e^{γ t})`.
    pub ratio: Option<f64>,
    pub pass: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LowerReport {
    pub rates: RateReport,
    pub big_t: f64,
    pub tol: f64,
    pub radius: f64,
    pub rows: Vec<LowerRow>,
    /// Single constant `C` with `local ≥ C|ln ε|^{-d}e^{γt}` across the sweep.
    pub c_fit: Option<f64>,
    pub pass: bool,
}

pub fn lower_bound_experiment(m: &MatrixSymbol, eps_list: &[f64], big_t: f64, radius: f64, s: &SweepSettings) -> Result<LowerReport> {
    let g0 = GridSpec::new(m.d(), s.n_x, s.k_max, eps_list.first().copied().unwrap_or(0.5))?;
    let mut rates = gamma_sup(m, &g0);
    let mut rows = Vec::new();
    for &eps in eps_list {
        let g = g0.with_eps(eps)?;
        let guard = eps_guard(eps, m, big_t, &g)?;
        if s.enforce_guard && !guard.pass {
            rows.push(LowerRow { eps, guard, skipped: true, times: vec![], local_norms: vec![], rate: None, ratio: None, pass: None });
            continue;
        }
        let rr = gamma_sup(m, &g);
        let packet = make_wave_packet(m, &g, &rr, radius, PacketNorm::L2)?;
        let ln = eps.ln().abs();
        let t_end = big_t * ln;
        let tr = evolve_linear(m, &packet.state, t_end, &FlowOptions { nodes: 2 * s.samples.max(2), sobolev_orders: vec![], ..Default::default() })?;
        let ball = 1.0 / ln;
        let local: Vec<f64> = tr.states.iter().map(|u| local_norm_with(u, &packet.x0, ball, s.smooth_ball)).collect();
        let rate = ls_slope(&late_half(&tr.times[1..], &local[1..], t_end));
        let ratio = local.last().unwrap() / (ln.powi(-(g.d as i32)) * (rr.gamma_spec * t_end).exp());
        rows.push(LowerRow {
            eps,
            guard,
            skipped: false,
            times: tr.times.clone(),
            local_norms: local,
            rate: Some(rate),
            ratio: Some(ratio),
            pass: Some(rate >= rr.gamma_spec - s.tol),
        });
    }
    let run: Vec<&LowerRow> = rows.iter().filter(|r| !r.skipped).collect();
    let c_fit = run.iter().filter_map(|r| r.ratio).fold(None, |a: Option<f64>, v| Some(a.map_or(v, |a| a.min(v))));
    rates.lower_rate = run.iter().filter_map(|r| r.rate).fold(None, |a: Option<f64>, v| Some(a.map_or(v, |a| a.min(v))));
    let pass = !run.is_empty() && run.iter().all(|r| r.pass == Some(true)) && c_fit.is_some_and(|c| c > 0.0);
    Ok(LowerReport { rates, big_t, tol: s.tol, radius, rows, c_fit, pass })
}

#[derive(Clone, Debug, Serialize)]
pub struct NStarFit {
    pub eps: Vec<f64>,
    /// Largest residual over the stored nodes in `[0, T|ln ε|]`.
    pub residuals: Vec<f64>,
    /// Slope of log residual against `log|ln ε|`, clamped at zero.
    pub n_star: f64,
}

/// Fits the polylog exponent of the corrector residual across an ε sweep.
pub fn fit_n_star(m: &MatrixSymbol, g: &GridSpec, eps_list: &[f64], big_t: f64, samples: usize) -> Result<NStarFit> {
    if eps_list.len() < 2 {
        return Err(Error::Precondition("fitting N* needs at least two ε values".into()));
    }
    let mut residuals = Vec::new();
    for &eps in eps_list {
        let ge = g.with_eps(eps)?;
        let t_end = big_t * eps.ln().abs();
        let q0 = q0_from(gamma_sup(m, &ge).gamma_spec, big_t);
        let samples = samples.max(1);
        // a step dividing each sampling interval
        let dt = fit_step(t_end / samples as f64, default_corrector_dt(m, &ge));
        let fam = solve_family(m, q0, 0.0, t_end, &ge, dt, &FamilyOptions { nodes: NodeSelection::Intervals(samples), ..Default::default() })?;
        let mut worst = 0.0f64;
        for &t in fam.times.iter().skip(1) {
            worst = worst.max(residual_probe(m, &fam, eps, t)?);
        }
        residuals.push(worst);
    }
    let pts: Vec<(f64, f64)> = eps_list.iter().zip(&residuals).map(|(e, r)| (e.ln().abs().ln(), r.max(f64::MIN_POSITIVE).ln())).collect();
    Ok(NStarFit { eps: eps_list.to_vec(), residuals, n_star: ls_slope(&pts).max(0.0) })
}

/// `T* = (K/γ)|ln ε| − (K1/γ) ln|ln ε|`.
pub fn instability_time(gamma: f64, k: f64, k1: f64, eps: f64) -> f64 {
    let l = eps.ln().abs();
    (k / gamma) * l - (k1 / gamma) * l.ln()
}

/// `K1 = 2N* + d + 1`.
pub fn default_k1(n_star: f64, d: usize) -> f64 {
    2.0 * n_star + d as f64 + 1.0
}

#[derive(Clone, Debug, Serialize)]
pub struct InstabilityRow {
    pub eps: f64,
    pub t_star: f64,
    pub amplitude_initial: f64,
    pub amplitude_final: f64,
    /// `|u(T*)|_∞ / ε^K`.
    pub amplification: f64,
    /// `K'` with `|u(T*)|_∞ = |ln ε|^{−K'}`.
    pub k_prime: f64,
    /// Log-slope of `|u|_∞` before saturation.
    pub growth_rate: f64,
    pub rate_error: f64,
    pub blowup_time: Option<f64>,
    pub times: Vec<f64>,
    pub linf: Vec<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct InstabilityReport {
    pub gamma_spec: f64,
    pub k: f64,
    pub k1: f64,
    pub rate_tol: f64,
    pub rows: Vec<InstabilityRow>,
    /// Slope of `log amplitude` against `log ε` across the sweep.
    pub amplitude_slope: Option<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct InstabilitySettings {
    pub n_x: usize,
    pub k_max: usize,
    pub radius: f64,
    pub nodes: usize,
    /// Relative tolerance on the growth rate.
    pub rate_tol: f64,
    /// Amplitudes above this fraction of the final one count as saturated.
    pub saturation: f64,
}

impl Default for InstabilitySettings {
    fn default() -> Self {
        InstabilitySettings { n_x: 256, k_max: 127, radius: 0.5, nodes: 48, rate_tol: 0.1, saturation: 0.1 }
    }
}

pub fn instability_experiment(
    m: &MatrixSymbol,
    b: &QuadraticNonlinearity,
    k: f64,
    k1: f64,
    eps_list: &[f64],
    s: &InstabilitySettings,
) -> Result<InstabilityReport> {
    let g0 = GridSpec::new(m.d(), s.n_x, s.k_max, eps_list.first().copied().unwrap_or(0.5))?;
    let gamma0 = gamma_sup(m, &g0).gamma_spec;
    if gamma0 <= 0.0 {
        return Err(Error::Precondition(format!("spectrum is stable: sup Re σ(M) = {:.3e}", gamma0)));
    }
    let mut rows = Vec::new();
    for &eps in eps_list {
        let g = g0.with_eps(eps)?;
        let rr = gamma_sup(m, &g);
        let gamma = rr.gamma_spec;
        let t_star = instability_time(gamma, k, k1, eps);
        if t_star <= 0.0 {
            return Err(Error::Precondition(format!("T* = {:.3} is not positive at ε = {}; lower K1 or ε", t_star, eps)));
        }
        let packet = make_wave_packet(m, &g, &rr, s.radius, PacketNorm::LInf)?;
        let mut u0 = packet.state.clone();
        u0.scale_mut(C64::new(eps.powf(k), 0.0));
        let tr = evolve_semilinear(m, b, &u0, t_star, &FlowOptions { nodes: s.nodes, sobolev_orders: vec![], ..Default::default() })?;
        let linf: Vec<f64> = tr.diagnostics.iter().map(|d| d.linf).collect();
        let a0 = linf[0];
        let af = *linf.last().unwrap();
        let ln = eps.ln().abs();
        let cut = s.saturation * linf.iter().cloned().fold(0.0, f64::max);
        let t_last = *tr.times.last().unwrap();
        let pts: Vec<(f64, f64)> =
            tr.times.iter().zip(&linf).filter(|(t, v)| **t >= 0.25 * t_last && **v <= cut.max(a0)).map(|(t, v)| (*t, v.ln())).collect();
        let pts =
            if pts.len() >= 2 { pts } else { tr.times.iter().zip(&linf).filter(|(t, _)| **t >= 0.5 * t_last).map(|(t, v)| (*t, v.ln())).collect() };
        let growth = ls_slope(&pts);
        let rate_error = (growth - gamma).abs() / gamma;
        let k_prime = -af.ln() / ln.ln();
        rows.push(InstabilityRow {
            eps,
            t_star,
            amplitude_initial: a0,
            amplitude_final: af,
            amplification: af / eps.powf(k),
            k_prime,
            growth_rate: growth,
            rate_error,
            blowup_time: tr.blowup_time,
            times: tr.times.clone(),
            linf,
            pass: rate_error <= s.rate_tol && k_prime.is_finite(),
        });
    }
    let amplitude_slope =
        if rows.len() >= 2 { Some(ls_fit(&rows.iter().map(|r| (r.eps.ln(), r.amplitude_final.ln())).collect::<Vec<_>>()).0) } else { None };
    let pass = rows.iter().all(|r| r.pass);
    Ok(InstabilityReport { gamma_spec: gamma0, k, k1, rate_tol: s.rate_tol, rows, amplitude_slope, pass })
}
