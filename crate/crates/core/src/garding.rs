//! Sharp Gårding inequality with gain `θ` for scalar nonnegative symbols in
//! d = 1: dyadic blocks, the backward-flow test, Weyl correctors and the
//! dense quadratic form.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::corrector::{fit_step, Expansion, Hierarchy, PointValues};
use crate::error::{Error, Result};
use crate::linalg::ls_fit;
use crate::quantize::fft::fft_nd;
use crate::quantize::lp::psi_profile;
use crate::quantize::{dft_full, idft_full, sobolev_norm, StateVector, WeylOperator, WeylSample};
use crate::symdsl::{check_class, japanese, norm_derivative_range, symbol_norm, GridSpec, MatrixSymbol, SymbolExpr};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Calibration knobs with their shipped defaults.
#[derive(Clone, Debug, Serialize)]
pub struct GardingSettings {
    /// `c_d` in `q0 = 1 + c_d⌊θ/(1−θ)⌋`.
    pub c_d: usize,
    /// `τ*` in `t* = jτ*2^{jθ}`.
    pub tau_star: f64,
    /// Divide `a` by `‖a‖_{2q0+4}` before blocking.
    pub normalize: bool,
    /// Random test vectors per block and for the sampled form.
    pub samples: usize,
    pub seed: u64,
    /// Largest `n_x` for dense assembly of the full form.
    pub dense_cap: usize,
    /// Times in `[0, t*]` for the margin series.
    pub margin_nodes: usize,
    pub tau_sweep: Vec<f64>,
}

impl Default for GardingSettings {
    fn default() -> Self {
        GardingSettings {
            c_d: 1,
            tau_star: 4.0,
            normalize: true,
            samples: 8,
            seed: 0x6a5d,
            dense_cap: 512,
            margin_nodes: 16,
            tau_sweep: vec![1.0, 2.0, 4.0, 8.0],
        }
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta < 1.0 {
        Ok(())
    } else {
        Err(Error::Precondition(format!("θ = {} must lie in (0, 1); the endpoint θ = 1 is not handled", theta)))
    }
}

pub fn weyl_q0(theta: f64, c_d: usize) -> usize {
    1 + c_d * (theta / (1.0 - theta)).floor() as usize
}

/// `t*(j) = jτ*2^{jθ}`.
pub fn observation_time(j: usize, theta: f64, tau_star: f64) -> f64 {
    j as f64 * tau_star * 2f64.powf(j as f64 * theta)
}

/// Block grid: `n_x = 2^{j+3}` (at least 32), so Weyl frequencies reach `2^{j+2}`.
pub fn block_grid(j: usize) -> GridSpec {
    let n = (1usize << (j + 3)).max(32);
    GridSpec::new(1, n, n / 2 - 1, 0.5).expect("power-of-two block grid")
}

#[derive(Clone, Debug)]
pub struct DyadicBlock {
    pub j: usize,
    pub j_max: usize,
    pub theta: f64,
    /// `2^{−jθ}`.
    pub floor: f64,
    /// Normalization applied to `a`.
    pub scale: f64,
    /// `a_j = φ_j(ξ)·a/scale + 2^{−jθ}`.
    pub symbol: MatrixSymbol,
    pub grid: GridSpec,
}

impl DyadicBlock {
    /// `a_j^w` on the block grid, symmetrized.
    pub fn weyl(&self) -> Result<DMatrix<C64>> {
        Ok(WeylOperator::from_symbol(&self.symbol, &self.grid)?.hermitian_part())
    }

    /// `ψ_j(D)u`.
    pub fn localize(&self, u: &StateVector) -> StateVector {
        let g = u.grid;
        let mut c = dft_full(u);
        for (b, v) in c.iter_mut().enumerate() {
            *v *= psi_profile(self.j, self.j_max, g.bin_freq(b % g.n_x).unsigned_abs() as f64);
        }
        idft_full(g, u.n, c)
    }

    /// Smallest sampled value of `a_j` over the block grid and Weyl frequencies.
    pub fn grid_min(&self) -> f64 {
        let n = self.grid.n_x as i64;
        let mut x = [0.0];
        let mut lo = f64::INFINITY;
        for jx in 0..self.grid.n_x {
            self.grid.x_at(jx, &mut x);
            for k in -n / 2..=n / 2 {
                lo = lo.min(self.symbol.eval(&x, &[k as f64], 0.0)[0].re);
            }
        }
        lo
    }
}

fn sample_scalar(a: &MatrixSymbol, g: &GridSpec) -> (f64, f64, f64, f64) {
    // (min Re, max |Im|, argmin x, argmin ξ) over the x-grid and |k| ≤ 4K
    let kmax = 4 * g.k_max as i64;
    let mut x = [0.0];
    let (mut lo, mut im, mut ax, mut ak) = (f64::INFINITY, 0.0f64, 0.0, 0.0);
    for jx in 0..g.n_x {
        g.x_at(jx, &mut x);
        for k in -kmax..=kmax {
            let v = a.eval(&x, &[k as f64], 0.0)[0];
            im = im.max(v.im.abs());
            if v.re < lo {
                lo = v.re;
                ax = x[0];
                ak = k as f64;
            }
        }
    }
    (lo, im, ax, ak)
}

fn check_symbol(a: &MatrixSymbol, g: &GridSpec) -> Result<()> {
    if a.n() != 1 || a.d() != 1 || g.d != 1 {
        return Err(Error::Unsupported("the Gårding experiments take scalar symbols in d = 1".into()));
    }
    let (lo, im, ax, ak) = sample_scalar(a, g);
    if im > 1e-12 {
        return Err(Error::Precondition(format!("symbol is not real (|Im a| up to {:.3e})", im)));
    }
    if lo < -1e-12 {
        return Err(Error::Precondition(format!("symbol is negative: a({:.4}, {}) = {:.3e}", ax, ak, lo)));
    }
    Ok(())
}

/// Blocks `j_min..=j_max` of `a`, each on its own grid.
pub fn dyadic_blocks_range(a: &MatrixSymbol, theta: f64, j_min: usize, j_max: usize, g: &GridSpec, s: &GardingSettings) -> Result<Vec<DyadicBlock>> {
    check_theta(theta)?;
    check_symbol(a, g)?;
    if j_min > j_max {
        return Err(Error::Precondition(format!("empty block range {}..={}", j_min, j_max)));
    }
    let q0 = weyl_q0(theta, s.c_d);
    let r = 2 * q0 + 4;
    let cap = a.cap().max(norm_derivative_range(r, 1) + 2);
    let a = &a.clone().with_cap(cap);
    let class = check_class(a, 0.0, r, g)?;
    if !class.pass {
        return Err(Error::Precondition("symbol is not of order 0".into()));
    }
    let scale = if s.normalize {
        let nrm = symbol_norm(a, r, g)?;
        if nrm > 0.0 {
            nrm.max(1.0)
        } else {
            1.0
        }
    } else {
        1.0
    };
    let base = a.entry(0, 0).clone().scale(C64::new(1.0 / scale, 0.0));
    (j_min..=j_max)
        .map(|j| {
            let floor = 2f64.powf(-(j as f64) * theta);
            let e = SymbolExpr::product([SymbolExpr::dyadic(j, j_max), base.clone()]) + SymbolExpr::real(floor);
            Ok(DyadicBlock { j, j_max, theta, floor, scale, symbol: MatrixSymbol::scalar(e, 1, 0.0)?.with_cap(cap), grid: block_grid(j) })
        })
        .collect()
}

/// Blocks `0..=J`.
pub fn dyadic_blocks(a: &MatrixSymbol, theta: f64, j_max: usize, g: &GridSpec) -> Result<Vec<DyadicBlock>> {
    dyadic_blocks_range(a, theta, 0, j_max, g, &GardingSettings::default())
}

/// Exact propagator `Φ(s) = e^{s a_j^w}` from the eigendecomposition of the
/// hermitian block matrix.
#[derive(Clone, Debug)]
pub struct BlockFlow {
    pub grid: GridSpec,
    pub eigenvalues: Vec<f64>,
    vectors: DMatrix<C64>,
}

impl BlockFlow {
    pub fn new(blk: &DyadicBlock) -> Result<Self> {
        Ok(Self::from_matrix(blk.grid, blk.weyl()?))
    }

    pub fn from_matrix(grid: GridSpec, h: DMatrix<C64>) -> Self {
        let e = h.symmetric_eigen();
        BlockFlow { grid, eigenvalues: e.eigenvalues.iter().copied().collect(), vectors: e.eigenvectors }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Eigenvector of the smallest eigenvalue.
    pub fn lowest_mode(&self) -> StateVector {
        let i = (0..self.eigenvalues.len()).min_by(|a, b| self.eigenvalues[*a].total_cmp(&self.eigenvalues[*b])).unwrap();
        StateVector { grid: self.grid, n: 1, data: self.vectors.column(i).iter().copied().collect() }
    }

    pub fn apply(&self, s: f64, u: &StateVector) -> StateVector {
        let c = self.vectors.adjoint() * DVector::from_column_slice(&u.data);
        let c = DVector::from_iterator(c.len(), c.iter().zip(&self.eigenvalues).map(|(v, l)| v * (s * l).exp()));
        let w = &self.vectors * c;
        StateVector { grid: u.grid, n: u.n, data: w.iter().copied().collect() }
    }

    /// `(a_j^w u, u)` through the spectral decomposition.
    pub fn form(&self, u: &StateVector) -> f64 {
        let c = self.vectors.adjoint() * DVector::from_column_slice(&u.data);
        c.iter().zip(&self.eigenvalues).map(|(v, l)| l * v.norm_sqr()).sum::<f64>() / self.grid.npts() as f64
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FlowTest {
    pub t: f64,
    /// `|Φ(−t)u_j| / |u_j|`.
    pub ratio: f64,
    pub margin: f64,
    pub pass: bool,
}

/// Tolerance on `|Φ(−t)u_j| ≤ |u_j|`.
pub const FLOW_TEST_TOL: f64 = 1e-10;

impl BlockFlow {
    pub fn backward_test(&self, blk: &DyadicBlock, u: &StateVector, t: f64) -> Result<FlowTest> {
        let uj = blk.localize(u);
        let n0 = uj.l2();
        if n0 == 0.0 {
            return Err(Error::Precondition(format!("ψ_{}(D)u vanishes", blk.j)));
        }
        let ratio = self.apply(-t, &uj).l2() / n0;
        Ok(FlowTest { t, ratio, margin: 1.0 - ratio, pass: ratio <= 1.0 + FLOW_TEST_TOL })
    }
}

/// Evolves `ψ_j(D)u` backward under `y' = a_j^w y` to time `−t`.
pub fn backward_flow_test(blk: &DyadicBlock, u: &StateVector, t: f64) -> Result<FlowTest> {
    BlockFlow::new(blk)?.backward_test(blk, u, t)
}

/// Where the Weyl correctors are integrated.
#[derive(Clone, Debug)]
pub enum CorrectorPoints {
    /// `nx` positions times `nk` frequencies spread over `2^{j−1} ≤ |k| ≤ 2^{j+1}`.
    Sampled { nx: usize, nk: usize },
    /// The full Weyl sampling grid of the block, so `Σ^w` can be assembled.
    Weyl,
}

#[derive(Clone, Debug)]
pub struct CorrectorOptions {
    pub points: CorrectorPoints,
    /// Stored nodes, equally spaced in `[0, t_end]`.
    pub nodes: usize,
    /// Defaults to `t*(j)`.
    pub t_end: Option<f64>,
    pub dt_max: f64,
    /// Keep all derivatives up to this joint order.
    pub deriv_order: usize,
}

impl Default for CorrectorOptions {
    fn default() -> Self {
        CorrectorOptions { points: CorrectorPoints::Sampled { nx: 32, nk: 12 }, nodes: 32, t_end: None, dt_max: 0.05, deriv_order: 2 }
    }
}

/// `S_q` and their derivatives for `∂_t S_q = −a_j S_q − Σ a_j ◇_{q1} S_{q2}`.
#[derive(Clone, Debug)]
pub struct WeylCorrectors {
    pub j: usize,
    pub q0: usize,
    pub floor: f64,
    pub grid: GridSpec,
    pub times: Vec<f64>,
    /// Flat `(x, ξ)` pairs.
    pub points: Vec<f64>,
    /// `(q, joint multi-index)` of every kept unknown.
    pub kept: Vec<(usize, Vec<usize>)>,
    values: PointValues,
    weyl_points: bool,
}

fn annulus_points(j: usize, nx: usize, nk: usize) -> Vec<f64> {
    let (lo, hi) = (2f64.powi(j as i32 - 1).max(1.0), 2f64.powi(j as i32 + 1));
    let mut ks: Vec<f64> = (0..nk.max(1))
        .map(|i| {
            let s = if nk > 1 { i as f64 / (nk - 1) as f64 } else { 0.5 };
            (lo * (hi / lo).powf(s)).round()
        })
        .collect();
    ks.dedup();
    let mut out = Vec::new();
    for i in 0..nx {
        let x = 2.0 * std::f64::consts::PI * i as f64 / nx as f64;
        for k in &ks {
            out.push(x);
            out.push(*k);
        }
    }
    out
}

pub fn weyl_correctors(blk: &DyadicBlock, theta: f64, c_d: usize, opts: &CorrectorOptions) -> Result<WeylCorrectors> {
    check_theta(theta)?;
    let q0 = weyl_q0(theta, c_d);
    let m = blk.symbol.scale(C64::new(-1.0, 0.0));
    let h = Hierarchy::new(&m, q0, opts.deriv_order, Expansion::Diamond)?;
    let t_end = opts.t_end.unwrap_or_else(|| observation_time(blk.j, theta, 4.0));
    let nodes = opts.nodes.max(1);
    let dt = fit_step(t_end / nodes as f64, opts.dt_max);
    let per = (t_end / nodes as f64 / dt).round() as usize;
    let store_at: Vec<usize> = (0..=nodes).map(|i| i * per).collect();
    let kept: Vec<(usize, Vec<usize>)> = h.slots().iter().filter(|(_, g)| g.iter().sum::<usize>() <= opts.deriv_order).cloned().collect();
    let keep: Vec<usize> = kept.iter().map(|(q, g)| h.slot(*q, g).unwrap()).collect();
    let (points, weyl_points) = match opts.points {
        CorrectorPoints::Sampled { nx, nk } => (annulus_points(blk.j, nx, nk), false),
        CorrectorPoints::Weyl => (WeylSample::points(&blk.grid), true),
    };
    let values = h.integrate(&points, 0.0, dt, per * nodes, &store_at, &keep);
    Ok(WeylCorrectors {
        j: blk.j,
        q0,
        floor: blk.floor,
        grid: blk.grid,
        times: store_at.iter().map(|s| *s as f64 * dt).collect(),
        points,
        kept,
        values,
        weyl_points,
    })
}

impl WeylCorrectors {
    pub fn index(&self, q: usize, gamma: &[usize]) -> Option<usize> {
        self.kept.iter().position(|(p, g)| *p == q && g == gamma)
    }

    /// Values of `∂^γ S_q` at every point at a stored node.
    pub fn values(&self, q: usize, gamma: &[usize], node: usize) -> Option<&[C64]> {
        self.index(q, gamma).map(|i| self.values.block(node, i))
    }

    /// `Σ = Σ_{q<q0} S_q` sampled for Weyl assembly.
    pub fn sigma_weyl(&self, node: usize) -> Result<WeylSample> {
        if !self.weyl_points {
            return Err(Error::Precondition("correctors were not integrated on the Weyl grid".into()));
        }
        let npt = self.values.points;
        let mut sum = vec![ZERO; npt];
        for q in 0..self.q0 {
            if let Some(v) = self.values(q, &[0, 0], node) {
                sum.iter_mut().zip(v).for_each(|(a, b)| *a += b);
            }
        }
        WeylSample::from_values(self.grid, 1, sum)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthEntry {
    pub q: usize,
    pub alpha: usize,
    pub beta: usize,
    /// Log-log slope in `t ≥ 1` of `⟨k⟩^{q+β}|∂^α∂^β S_q| e^{t2^{−jθ}}`.
    pub exponent: Option<f64>,
    pub allowed: f64,
    /// Smallest `P` with the bound holding at every stored node.
    pub prefactor: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthReport {
    pub j: usize,
    pub q0: usize,
    pub t_star: f64,
    pub slack: f64,
    pub entries: Vec<GrowthEntry>,
    /// Every undifferentiated `⟨k⟩^q S_q` within its allowed exponent.
    pub pass: bool,
    /// Same for the derivative entries. On weakly varying blocks `t(a_j - floor)`
    /// stays small up to `t*` and first derivatives grow linearly there.
    pub derivatives_pass: bool,
}

/// Exponent slack over `q + (|α|+|β|)/2`.
pub const GROWTH_SLACK: f64 = 0.2;

const ZERO_SERIES: f64 = 1e-12;

pub fn corrector_growth_from(c: &WeylCorrectors) -> GrowthReport {
    let npt = c.points.len() / 2;
    let t_star = *c.times.last().unwrap();
    let mut entries = Vec::new();
    for (q, gamma) in &c.kept {
        if *q > c.q0 {
            continue;
        }
        let (alpha, beta) = (gamma[0], gamma[1]);
        let nominal = *q as f64 + (alpha + beta) as f64 / 2.0;
        let series: Vec<(f64, f64)> = (0..c.times.len())
            .map(|node| {
                let v = c.values(*q, gamma, node).unwrap();
                let mx = (0..npt).map(|p| japanese(&[c.points[2 * p + 1]]).powi((*q + beta) as i32) * v[p].norm()).fold(0.0, f64::max);
                (c.times[node], mx * (c.times[node] * c.floor).exp())
            })
            .collect();
        let scale = series.iter().map(|s| s.1).fold(0.0, f64::max);
        let prefactor = series.iter().map(|(t, v)| v / (1.0 + t).powf(nominal)).fold(0.0, f64::max);
        let pts: Vec<(f64, f64)> =
            series.iter().filter(|(t, v)| *t >= 1.0 && *v > 1e-13 * scale.max(1e-300)).map(|(t, v)| (t.ln(), v.ln())).collect();
        // below this the series is roundoff of an identically vanishing corrector
        let exponent = if scale > ZERO_SERIES && pts.len() >= 2 { Some(ls_fit(&pts).0) } else { None };
        let allowed = nominal + GROWTH_SLACK;
        entries.push(GrowthEntry { q: *q, alpha, beta, exponent, allowed, prefactor, pass: exponent.is_none_or(|e| e <= allowed) });
    }
    let (plain, derived): (Vec<&GrowthEntry>, Vec<&GrowthEntry>) = entries.iter().partition(|e| e.alpha + e.beta == 0);
    let pass = plain.iter().all(|e| e.pass);
    let derivatives_pass = derived.iter().all(|e| e.pass);
    GrowthReport { j: c.j, q0: c.q0, t_star, slack: GROWTH_SLACK, entries, pass, derivatives_pass }
}

/// Integrates the correctors up to `t*(j)` and fits their time exponents.
pub fn corrector_growth_check(blk: &DyadicBlock, theta: f64, s: &GardingSettings) -> Result<GrowthReport> {
    let opts = CorrectorOptions { t_end: Some(observation_time(blk.j, theta, s.tau_star)), ..Default::default() };
    Ok(corrector_growth_from(&weyl_correctors(blk, theta, s.c_d, &opts)?))
}

#[derive(Clone, Debug, Serialize)]
pub struct GradientRow {
    pub h: f64,
    /// Sampled points of `{a_j < h}`.
    pub points: usize,
    /// `max(|∂_x a_j|, ⟨k⟩|∂_ξ a_j|)` over the sublevel set.
    pub max_gradient: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradientReport {
    pub j: usize,
    pub rows: Vec<GradientRow>,
    pub pass: bool,
}

/// `|D a_j| ≤ 4h^{1/2}` on the sampled sublevel sets `{a_j < h}`.
pub fn gradient_bound_check(blk: &DyadicBlock, hs: &[f64]) -> Result<GradientReport> {
    let dx = blk.symbol.differentiate(&[1], &[0])?;
    let dxi = blk.symbol.differentiate(&[0], &[1])?;
    let n = blk.grid.n_x as i64;
    let mut samples = Vec::new();
    let mut x = [0.0];
    for jx in 0..blk.grid.n_x {
        blk.grid.x_at(jx, &mut x);
        for k in -n / 2..=n / 2 {
            let xi = [k as f64];
            let v = blk.symbol.eval(&x, &xi, 0.0)[0].re;
            let gx = dx.eval(&x, &xi, 0.0)[0].norm();
            let gk = japanese(&xi) * dxi.eval(&x, &xi, 0.0)[0].norm();
            samples.push((v, gx.max(gk)));
        }
    }
    let rows: Vec<GradientRow> = hs
        .iter()
        .map(|&h| {
            let inside: Vec<f64> = samples.iter().filter(|(v, _)| *v < h).map(|s| s.1).collect();
            let max_gradient = inside.iter().copied().fold(0.0, f64::max);
            let bound = 4.0 * h.sqrt();
            GradientRow { h, points: inside.len(), max_gradient, bound, pass: max_gradient <= bound }
        })
        .collect();
    let pass = rows.iter().all(|r| r.pass);
    Ok(GradientReport { j: blk.j, rows, pass })
}

/// `U A U*` with `U` the unitary DFT, so quadratic forms act on `û`.
fn to_fourier_basis(a: &DMatrix<C64>) -> DMatrix<C64> {
    let n = a.nrows();
    let mut b = a.clone();
    for mut col in b.column_iter_mut() {
        let mut v: Vec<C64> = col.iter().copied().collect();
        fft_nd(&mut v, n, 1, false);
        col.iter_mut().zip(v).for_each(|(c, w)| *c = w);
    }
    let mut c = b.adjoint();
    for mut col in c.column_iter_mut() {
        let mut v: Vec<C64> = col.iter().copied().collect();
        fft_nd(&mut v, n, 1, false);
        col.iter_mut().zip(v).for_each(|(c, w)| *c = w);
    }
    c.adjoint() / C64::new(n as f64, 0.0)
}

fn sobolev_weights(g: &GridSpec, s: f64) -> Vec<f64> {
    (0..g.n_x).map(|b| japanese(&[g.bin_freq(b) as f64]).powf(s)).collect()
}

fn min_eig(h: DMatrix<C64>) -> f64 {
    h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Dense `Re a^w` in the Fourier basis together with `⟨k⟩^{−θ}`.
#[derive(Clone, Debug)]
pub struct DenseForm {
    pub grid: GridSpec,
    pub theta: f64,
    pub re_a: DMatrix<C64>,
    pub weights: Vec<f64>,
}

impl DenseForm {
    pub fn new(a: &MatrixSymbol, theta: f64, g: &GridSpec) -> Result<Self> {
        let w = WeylOperator::from_symbol(a, g)?;
        Ok(DenseForm { grid: *g, theta, re_a: to_fourier_basis(&w.hermitian_part()), weights: sobolev_weights(g, -theta) })
    }

    /// Smallest eigenvalue of `Re a^w + c⟨D⟩^{−θ}`.
    pub fn min_eigenvalue(&self, c: f64) -> f64 {
        let mut h = self.re_a.clone();
        for (i, w) in self.weights.iter().enumerate() {
            h[(i, i)] += C64::new(c * w, 0.0);
        }
        min_eig(h)
    }

    /// `c* = max(0, −λ_min(⟨D⟩^{θ/2} Re a^w ⟨D⟩^{θ/2}))`, the exact threshold.
    pub fn critical_c(&self) -> f64 {
        let n = self.weights.len();
        let r: Vec<f64> = self.weights.iter().map(|w| w.powf(-0.5)).collect();
        let h = DMatrix::from_fn(n, n, |i, j| self.re_a[(i, j)] * (r[i] * r[j]));
        (-min_eig(h)).max(0.0)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Calibration {
    /// Exact threshold from the congruence transform.
    pub c_exact: f64,
    /// Smallest bisection point accepted by the `−1e-8` criterion.
    pub c: f64,
    pub min_eigenvalue: f64,
    pub iterations: usize,
}

/// Acceptance threshold on the dense minimum eigenvalue.
pub const FORM_TOL: f64 = 1e-8;

/// Bisection for the smallest `c` with `λ_min(Re a^w + c⟨D⟩^{−θ}) ≥ −1e-8`.
pub fn calibrate_c(form: &DenseForm) -> Calibration {
    let c_exact = form.critical_c();
    let at0 = form.min_eigenvalue(0.0);
    if at0 >= -FORM_TOL {
        return Calibration { c_exact, c: 0.0, min_eigenvalue: at0, iterations: 0 };
    }
    let mut hi = c_exact * (1.0 + 1e-6) + 1e-12;
    while form.min_eigenvalue(hi) < -FORM_TOL {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    let mut it = 0;
    while hi - lo > 1e-6 * hi && it < 60 {
        let mid = 0.5 * (lo + hi);
        if form.min_eigenvalue(mid) >= -FORM_TOL {
            hi = mid;
        } else {
            lo = mid;
        }
        it += 1;
    }
    Calibration { c_exact, c: hi, min_eigenvalue: form.min_eigenvalue(hi), iterations: it }
}

#[derive(Clone, Debug, Serialize)]
pub struct QuadraticFormReport {
    pub theta: f64,
    pub c: f64,
    pub n_x: usize,
    /// Smallest `(Re(a^w u, u) + c‖u‖²_{H^{−θ/2}}) / ‖u‖²` over random `u`.
    pub sampled_min: f64,
    /// Dense smallest eigenvalue; absent above the size cap.
    pub dense_min: Option<f64>,
    /// False when only random sampling was possible.
    pub confident: bool,
    pub pass: bool,
}

pub fn quadratic_form_check(a: &MatrixSymbol, theta: f64, c: f64, samples: usize, g: &GridSpec, s: &GardingSettings) -> Result<QuadraticFormReport> {
    check_theta(theta)?;
    check_symbol(a, g)?;
    let w = WeylOperator::from_symbol(a, g)?;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let sampled_min = (0..samples.max(1))
        .map(|_| {
            let u = StateVector::random_bandlimited(*g, 1, &mut rng);
            let au = crate::quantize::LinearOperator::apply(&w, &u);
            let h = sobolev_norm(&u, -theta / 2.0, 1.0);
            (au.inner(&u).re + c * h * h) / u.l2().powi(2)
        })
        .fold(f64::INFINITY, f64::min);
    let dense_min = if g.n_x <= s.dense_cap { Some(DenseForm::new(a, theta, g)?.min_eigenvalue(c)) } else { None };
    let pass = match dense_min {
        Some(v) => v >= -FORM_TOL,
        None => sampled_min >= -FORM_TOL,
    };
    Ok(QuadraticFormReport { theta, c, n_x: g.n_x, sampled_min, dense_min, confident: dense_min.is_some(), pass })
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockResult {
    pub j: usize,
    pub t_star: f64,
    pub floor: f64,
    pub n_x: usize,
    pub grid_min: f64,
    /// Smallest eigenvalue of `a_j^w`.
    pub min_eigenvalue: f64,
    /// Smallest margin `1 − |Φ(−t*)u_j|/|u_j|` over the tested vectors.
    pub margin: f64,
    pub pass: bool,
    /// Smallest `(a_j^w u_j, u_j)/|u_j|²` over the tested vectors.
    pub form_min: f64,
    /// Passing flow test went with a nonnegative block form.
    pub positivity_consistent: bool,
    /// Worst-vector margin at equally spaced times in `[0, t*]`.
    pub margins: Vec<(f64, f64)>,
    /// Pass/fail at `t*` for each `τ*` of the sweep.
    pub tau_pass: Vec<(f64, bool)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GardingReport {
    pub theta: f64,
    pub q0: usize,
    pub tau_star: f64,
    pub scale: f64,
    pub c: Calibration,
    pub form: QuadraticFormReport,
    pub blocks: Vec<BlockResult>,
    /// First `j` from which every tested block passes.
    pub j0: Option<usize>,
    /// `j0` for each `τ*` of the sweep.
    pub tau_sweep: Vec<(f64, Option<usize>)>,
    pub pass: bool,
}

fn first_passing(blocks: &[(usize, bool)]) -> Option<usize> {
    let mut j0 = None;
    for (j, ok) in blocks.iter().rev() {
        if !ok {
            break;
        }
        j0 = Some(*j);
    }
    j0
}

fn run_block(blk: &DyadicBlock, s: &GardingSettings) -> Result<BlockResult> {
    let flow = BlockFlow::new(blk)?;
    let t_star = observation_time(blk.j, blk.theta, s.tau_star);
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed ^ blk.j as u64);
    let wide = GridSpec::with_full_band(1, blk.grid.n_x, blk.grid.eps)?;
    let mut tests: Vec<StateVector> = (0..s.samples)
        .map(|_| {
            let mut u = StateVector::random_bandlimited(wide, 1, &mut rng);
            u.grid = blk.grid;
            u
        })
        .collect();
    tests.push(flow.lowest_mode());
    let mut margin = f64::INFINITY;
    let mut form_min = f64::INFINITY;
    let mut worst = 0;
    for (i, u) in tests.iter().enumerate() {
        let uj = blk.localize(u);
        let n2 = uj.l2().powi(2);
        if n2 < 1e-28 {
            continue;
        }
        let r = flow.backward_test(blk, u, t_star)?;
        if r.margin < margin {
            margin = r.margin;
            worst = i;
        }
        form_min = form_min.min(flow.form(&uj) / n2);
    }
    let pass = margin >= -FLOW_TEST_TOL;
    let nodes = s.margin_nodes.max(1);
    let margins = (0..=nodes)
        .map(|i| {
            let t = t_star * i as f64 / nodes as f64;
            Ok((t, flow.backward_test(blk, &tests[worst], t)?.margin))
        })
        .collect::<Result<Vec<_>>>()?;
    let tau_pass = s
        .tau_sweep
        .iter()
        .map(|&tau| {
            let t = observation_time(blk.j, blk.theta, tau);
            let ok = tests.iter().filter(|u| blk.localize(u).l2() > 1e-14).all(|u| flow.backward_test(blk, u, t).map(|r| r.pass).unwrap_or(false));
            (tau, ok)
        })
        .collect();
    Ok(BlockResult {
        j: blk.j,
        t_star,
        floor: blk.floor,
        n_x: blk.grid.n_x,
        grid_min: blk.grid_min(),
        min_eigenvalue: flow.min_eigenvalue(),
        margin,
        pass,
        form_min,
        positivity_consistent: !pass || form_min >= -FORM_TOL,
        margins,
        tau_pass,
    })
}

/// Flow tests on the blocks `j_min..=j_max` plus the dense form of `a` on `g`.
pub fn garding_experiment(a: &MatrixSymbol, theta: f64, j_min: usize, j_max: usize, g: &GridSpec, s: &GardingSettings) -> Result<GardingReport> {
    let blocks = dyadic_blocks_range(a, theta, j_min, j_max, g, s)?;
    let results: Vec<BlockResult> = blocks.par_iter().map(|b| run_block(b, s)).collect::<Result<_>>()?;
    let dense = if g.n_x <= s.dense_cap { Some(DenseForm::new(a, theta, g)?) } else { None };
    let c = match &dense {
        Some(f) => calibrate_c(f),
        None => Calibration { c_exact: f64::NAN, c: 0.0, min_eigenvalue: f64::NAN, iterations: 0 },
    };
    let form = quadratic_form_check(a, theta, c.c, s.samples, g, s)?;
    let j0 = first_passing(&results.iter().map(|r| (r.j, r.pass)).collect::<Vec<_>>());
    let tau_sweep = s
        .tau_sweep
        .iter()
        .enumerate()
        .map(|(i, tau)| (*tau, first_passing(&results.iter().map(|r| (r.j, r.tau_pass[i].1)).collect::<Vec<_>>())))
        .collect();
    let pass = j0.is_some() && form.pass && results.iter().all(|r| r.positivity_consistent);
    Ok(GardingReport {
        theta,
        q0: weyl_q0(theta, s.c_d),
        tau_star: s.tau_star,
        scale: blocks[0].scale,
        c,
        form,
        blocks: results,
        j0,
        tau_sweep,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec::new(1, 64, 15, 0.5).unwrap()
    }

    #[test]
    fn q0_and_time() {
        assert_eq!(weyl_q0(0.5, 1), 2);
        assert_eq!(weyl_q0(0.25, 1), 1);
        assert_eq!(weyl_q0(0.75, 1), 4);
        assert!((observation_time(4, 0.5, 4.0) - 64.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = MatrixSymbol::parse("sin(x1)^2", 1, 0.0).unwrap();
        assert!(dyadic_blocks(&a, 1.0, 3, &grid()).is_err());
        let neg = MatrixSymbol::parse("cos(x1)", 1, 0.0).unwrap();
        assert!(matches!(dyadic_blocks(&neg, 0.5, 3, &grid()), Err(Error::Precondition(_))));
    }

    #[test]
    fn zero_symbol_gives_constant_blocks() {
        let a = MatrixSymbol::zeros(1, 1);
        for b in dyadic_blocks(&a, 0.5, 3, &grid()).unwrap() {
            assert_eq!(b.symbol.entry(0, 0).as_const(), Some(C64::new(b.floor, 0.0)));
            let f = BlockFlow::new(&b).unwrap();
            assert!((f.min_eigenvalue() - b.floor).abs() < 1e-12);
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let u = StateVector::random_bandlimited(GridSpec::with_full_band(1, b.grid.n_x, 0.5).unwrap(), 1, &mut rng);
            let u = StateVector { grid: b.grid, ..u };
            let r = f.backward_test(&b, &u, 3.0).unwrap();
            assert!((r.ratio - (-3.0 * b.floor).exp()).abs() < 1e-12);
            assert!(f.backward_test(&b, &u, 0.0).unwrap().margin.abs() < 1e-14);
        }
    }

    #[test]
    fn block_floor_holds() {
        let a = MatrixSymbol::parse("sin(x1)^2", 1, 0.0).unwrap();
        for b in dyadic_blocks(&a, 0.5, 4, &grid()).unwrap() {
            assert!(b.grid_min() >= b.floor - 1e-14);
        }
    }

    #[test]
    fn localized_symbol_touches_one_block() {
        let a = MatrixSymbol::parse("sin(x1)^2*dyadic(4, 6)", 1, 0.0).unwrap();
        let s = GardingSettings { normalize: false, ..Default::default() };
        let g = GridSpec::new(1, 64, 31, 0.5).unwrap();
        for b in dyadic_blocks_range(&a, 0.5, 0, 6, &g, &s).unwrap() {
            let mut x = [0.0];
            let mut amp: f64 = 0.0;
            for jx in 0..16 {
                x[0] = 0.4 * jx as f64;
                for k in 0..200 {
                    amp = amp.max((b.symbol.eval(&x, &[k as f64], 0.0)[0].re - b.floor).abs());
                }
            }
            if (3..=5).contains(&b.j) {
                assert!(amp > 0.0);
            } else {
                assert_eq!(amp, 0.0, "block {}", b.j);
            }
        }
    }

    #[test]
    fn constant_block_correctors_vanish() {
        let a = MatrixSymbol::zeros(1, 1);
        let b = &dyadic_blocks(&a, 0.5, 3, &grid()).unwrap()[3];
        let c = weyl_correctors(b, 0.5, 1, &CorrectorOptions { t_end: Some(5.0), nodes: 5, ..Default::default() }).unwrap();
        for node in 0..=5 {
            let s0 = c.values(0, &[0, 0], node).unwrap();
            let want = (-c.times[node] * b.floor).exp();
            // RK4 at dt = 0.05
            assert!(s0.iter().all(|v| (v.re - want).abs() < 1e-8 && v.im == 0.0));
            for q in 1..=c.q0 {
                assert!(c.values(q, &[0, 0], node).unwrap().iter().all(|v| v.norm() == 0.0));
            }
        }
    }

    #[test]
    fn first_corrector_vanishes_for_scalars() {
        let a = MatrixSymbol::parse("sin(x1)^2", 1, 0.0).unwrap();
        let s = GardingSettings { normalize: false, ..Default::default() };
        let b = &dyadic_blocks_range(&a, 0.5, 3, 3, &grid(), &s).unwrap()[0];
        let c = weyl_correctors(b, 0.5, 1, &CorrectorOptions { t_end: Some(8.0), nodes: 4, ..Default::default() }).unwrap();
        let s1 = c.values(1, &[0, 0], 4).unwrap();
        assert!(s1.iter().all(|v| v.norm() < 1e-12), "{:?}", s1.iter().map(|v| v.norm()).fold(0.0, f64::max));
        let s2 = c.values(2, &[0, 0], 4).unwrap();
        assert!(s2.iter().any(|v| v.norm() > 1e-8));
    }

    #[test]
    fn gradient_of_constant_block() {
        let b = &dyadic_blocks(&MatrixSymbol::zeros(1, 1), 0.5, 2, &grid()).unwrap()[2];
        let r = gradient_bound_check(b, &[0.9, 0.5]).unwrap();
        assert!(r.pass);
        assert_eq!(r.rows[0].max_gradient, 0.0);
    }

    #[test]
    fn form_of_trivial_symbols() {
        let g = GridSpec::new(1, 32, 15, 0.5).unwrap();
        let s = GardingSettings::default();
        let zero = MatrixSymbol::zeros(1, 1);
        let r = quadratic_form_check(&zero, 0.5, 0.3, 4, &g, &s).unwrap();
        let want = 0.3 * japanese(&[16.0]).powf(-0.5);
        assert!((r.dense_min.unwrap() - want).abs() < 1e-12);
        let one = MatrixSymbol::parse("1", 1, 0.0).unwrap();
        let r = quadratic_form_check(&one, 0.5, 0.0, 4, &g, &s).unwrap();
        assert!((r.dense_min.unwrap() - 1.0).abs() < 1e-12);
        assert!((r.sampled_min - 1.0).abs() < 1e-12);
    }

    #[test]
    fn calibration_brackets_the_threshold() {
        let g = GridSpec::new(1, 32, 15, 0.5).unwrap();
        // ξ-dependent nonnegative symbol whose Weyl form dips below zero
        let a = MatrixSymbol::parse("(sin(x1) + 0.5*xi1*bracket(-1))^2", 1, 0.0).unwrap();
        let f = DenseForm::new(&a, 0.5, &g).unwrap();
        let cal = calibrate_c(&f);
        assert!(cal.c_exact > 0.0);
        assert!(cal.min_eigenvalue >= -FORM_TOL);
        assert!(f.min_eigenvalue(cal.c_exact * 0.99) < 0.0);
        assert!(cal.c <= cal.c_exact * 1.01 + 1e-9);
    }
}
