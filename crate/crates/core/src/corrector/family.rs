use std::io::{Read, Write};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::hierarchy::{Expansion, Hierarchy};
use crate::error::{Error, Result};
use crate::quantize::io::{read_framed, write_framed};
use crate::symdsl::{grid_rates, GridSpec, MatrixSymbol, SampledSymbol};

const ZERO: C64 = C64::new(0.0, 0.0);

pub const FAMILY_MAGIC: &[u8; 4] = b"PDCF";

/// `q0 = [γT] + 1`.
pub fn q0_from(gamma: f64, t: f64) -> usize {
    (gamma.max(0.0) * t).floor() as usize + 1
}

/// Default time step `min(0.01, 0.1/γ_∞)`.
pub fn default_corrector_dt(m: &MatrixSymbol, g: &GridSpec) -> f64 {
    let gi = grid_rates(m, g, 0.0).gamma_inf;
    if gi > 0.0 {
        (0.1 / gi).min(0.01)
    } else {
        0.01
    }
}

/// Largest step `≤ dt_max` dividing `span` evenly.
pub fn fit_step(span: f64, dt_max: f64) -> f64 {
    span / (span / dt_max).ceil().max(1.0)
}

fn step_count(span: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !(span > 0.0) {
        return Err(Error::Precondition(format!("need t > τ and dt > 0, got span {} and dt {}", span, dt)));
    }
    let r = span / dt;
    let n = r.round();
    if (r - n).abs() > 1e-9 * r.max(1.0) {
        return Err(Error::Precondition(format!("dt = {} does not divide t − τ = {}", dt, span)));
    }
    Ok(n as usize)
}

/// Which integration steps become stored nodes.
#[derive(Clone, Debug, PartialEq)]
pub enum NodeSelection {
    EveryStep,
    /// Every `s`-th step; `s` must divide the step count.
    Stride(usize),
    /// `m` equal intervals; `m` must divide the step count.
    Intervals(usize),
}

/// Lattice modes on which the hierarchy is integrated; other modes stay zero.
#[derive(Clone, Debug, PartialEq)]
pub enum ModeWindow {
    All,
    Indices(Vec<usize>),
}

impl ModeWindow {
    /// Modes where some component of `coef` exceeds `rel` times the largest.
    pub fn support(coef: &crate::quantize::FourierState, rel: f64) -> Self {
        let nk = coef.grid.nk();
        let peak = coef.coef.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let idx = (0..nk).filter(|kk| (0..coef.n).any(|c| coef.coef[c * nk + kk].norm() > rel * peak)).collect();
        ModeWindow::Indices(idx)
    }
}

#[derive(Clone, Debug)]
pub struct FamilyOptions {
    pub nodes: NodeSelection,
    pub modes: ModeWindow,
    pub expansion: Expansion,
}

impl Default for FamilyOptions {
    fn default() -> Self {
        FamilyOptions { nodes: NodeSelection::EveryStep, modes: ModeWindow::All, expansion: Expansion::Sharp }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Manifest {
    q0: usize,
    gamma: f64,
    dt: f64,
    tau: f64,
    times: Vec<f64>,
    grid: GridSpec,
    n: usize,
    order: f64,
    modes: Vec<usize>,
    dtype: String,
}

/// `S_q(τ; t_m)` and `∂_t S_q(τ; t_m)` for `q ≤ q0` at the stored nodes,
/// sampled at `(x_j, εk)` on the window modes.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrectorFamily {
    pub q0: usize,
    /// Spectral growth rate `max Re σ(M)` over the grid.
    pub gamma: f64,
    pub dt: f64,
    pub tau: f64,
    pub times: Vec<f64>,
    pub grid: GridSpec,
    pub n: usize,
    /// Order of `M`; `S_q` has order `−q` relative to it.
    pub order: f64,
    modes: Vec<usize>,
    /// `[node][q][local mode][jx][N×N]`.
    values: Vec<C64>,
    derivs: Vec<C64>,
}

/// Integrates the hierarchy up to `q0` on the grid `(x_j, εk)`.
pub fn solve_family(m: &MatrixSymbol, q0: usize, tau: f64, t: f64, g: &GridSpec, dt: f64, opts: &FamilyOptions) -> Result<CorrectorFamily> {
    g.validate()?;
    if m.d() != g.d {
        return Err(Error::Shape(format!("symbol dimension {} differs from grid dimension {}", m.d(), g.d)));
    }
    let steps = step_count(t - tau, dt)?;
    let stride = match opts.nodes {
        NodeSelection::EveryStep => 1,
        NodeSelection::Stride(s) => s,
        NodeSelection::Intervals(k) => {
            if k == 0 || steps % k != 0 {
                return Err(Error::Precondition(format!("{} intervals do not divide {} steps", k, steps)));
            }
            steps / k
        }
    };
    if stride == 0 || steps % stride != 0 {
        return Err(Error::Precondition(format!("stride {} does not divide {} steps", stride, steps)));
    }
    let store_at: Vec<usize> = (0..=steps / stride).map(|i| i * stride).collect();
    let h = Hierarchy::new(m, q0, 0, opts.expansion)?;
    let zero = vec![0; 2 * g.d];
    let keep: Vec<usize> = (0..=q0).map(|q| h.slot(q, &zero).unwrap()).collect();
    let modes: Vec<usize> = match &opts.modes {
        ModeWindow::All => (0..g.nk()).collect(),
        ModeWindow::Indices(v) => v.clone(),
    };
    if let Some(bad) = modes.iter().find(|kk| **kk >= g.nk()) {
        return Err(Error::Grid(format!("mode index {} outside the lattice", bad)));
    }
    let npts = g.npts();
    let d = g.d;
    let mut points = Vec::with_capacity(modes.len() * npts * 2 * d);
    let mut x = vec![0.0; d];
    for &kk in &modes {
        let k = g.k_vec(kk);
        for jx in 0..npts {
            g.x_at(jx, &mut x);
            points.extend_from_slice(&x);
            points.extend(k.iter().map(|v| *v as f64 * g.eps));
        }
    }
    let pv = h.integrate(&points, tau, dt, steps, &store_at, &keep);
    let gamma = grid_rates(m, g, tau).gamma_spec;
    Ok(CorrectorFamily {
        q0,
        gamma,
        dt,
        tau,
        times: store_at.iter().map(|s| tau + *s as f64 * dt).collect(),
        grid: *g,
        n: m.n(),
        order: m.order(),
        modes,
        values: pv.values,
        derivs: pv.derivs,
    })
}

/// `S(τ; t_m)` at every step.
pub fn solve_s(m: &MatrixSymbol, tau: f64, t: f64, g: &GridSpec, dt: f64) -> Result<Vec<SampledSymbol>> {
    let fam = solve_family(m, 0, tau, t, g, dt, &FamilyOptions::default())?;
    Ok((0..fam.nodes()).map(|i| fam.s(0, i)).collect())
}

/// `S_0..S_{q0}` at every step.
pub fn solve_correctors(m: &MatrixSymbol, q0: usize, tau: f64, t: f64, g: &GridSpec, dt: f64) -> Result<CorrectorFamily> {
    solve_family(m, q0, tau, t, g, dt, &FamilyOptions::default())
}

impl CorrectorFamily {
    pub fn nodes(&self) -> usize {
        self.times.len()
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    /// Index of the stored node at time `t`.
    pub fn node_of(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * self.dt.max(1e-300);
        self.times.iter().position(|s| (s - t).abs() <= tol.max(1e-12 * t.abs()))
    }

    fn block_len(&self) -> usize {
        self.modes.len() * self.grid.npts() * self.n * self.n
    }

    fn range(&self, q: usize, node: usize) -> std::ops::Range<usize> {
        let len = self.block_len();
        let o = (node * (self.q0 + 1) + q) * len;
        o..o + len
    }

    /// Raw window values `[local mode][jx][N×N]` of `S_q` at a node.
    pub fn raw(&self, q: usize, node: usize) -> &[C64] {
        &self.values[self.range(q, node)]
    }

    pub fn raw_deriv(&self, q: usize, node: usize) -> &[C64] {
        &self.derivs[self.range(q, node)]
    }

    fn expand(&self, parts: &[(f64, &[C64])]) -> SampledSymbol {
        let npts = self.grid.npts();
        let nn = self.n * self.n;
        let mut full = vec![ZERO; self.grid.nk() * npts * nn];
        let per_mode = npts * nn;
        for (lm, &kk) in self.modes.iter().enumerate() {
            let dst = &mut full[kk * per_mode..(kk + 1) * per_mode];
            for (w, src) in parts {
                for (a, b) in dst.iter_mut().zip(&src[lm * per_mode..(lm + 1) * per_mode]) {
                    *a += b * *w;
                }
            }
        }
        SampledSymbol::from_values(self.grid, self.n, self.order, true, self.times[0], full).expect("finite corrector values")
    }

    fn at_time(mut s: SampledSymbol, t: f64) -> SampledSymbol {
        s.time = t;
        s
    }

    /// `S_q(τ; t_node)` on the full lattice.
    pub fn s(&self, q: usize, node: usize) -> SampledSymbol {
        let mut s = Self::at_time(self.expand(&[(1.0, self.raw(q, node))]), self.times[node]);
        s.order = self.order - q as f64;
        s
    }

    pub fn ds(&self, q: usize, node: usize) -> SampledSymbol {
        Self::at_time(self.expand(&[(1.0, self.raw_deriv(q, node))]), self.times[node])
    }

    /// `Σ_q w_q S_q` at a node.
    pub fn combine(&self, node: usize, weights: &[f64]) -> SampledSymbol {
        let parts: Vec<(f64, &[C64])> = weights.iter().enumerate().take(self.q0 + 1).map(|(q, w)| (*w, self.raw(q, node))).collect();
        Self::at_time(self.expand(&parts), self.times[node])
    }

    pub fn combine_deriv(&self, node: usize, weights: &[f64]) -> SampledSymbol {
        let parts: Vec<(f64, &[C64])> = weights.iter().enumerate().take(self.q0 + 1).map(|(q, w)| (*w, self.raw_deriv(q, node))).collect();
        Self::at_time(self.expand(&parts), self.times[node])
    }

    /// Weights `ε^q` of `Σ = S + Σ_{q≥1} ε^q S_q`.
    pub fn sigma_weights(&self, eps: f64) -> Vec<f64> {
        (0..=self.q0).map(|q| eps.powi(q as i32)).collect()
    }

    pub fn sigma(&self, node: usize, eps: f64) -> SampledSymbol {
        self.combine(node, &self.sigma_weights(eps))
    }

    pub fn dsigma(&self, node: usize, eps: f64) -> SampledSymbol {
        self.combine_deriv(node, &self.sigma_weights(eps))
    }

    /// Largest entry modulus of `S_q` at a node.
    pub fn max_abs(&self, q: usize, node: usize) -> f64 {
        self.raw(q, node).iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest pointwise operator norm of `S_q` at a node.
    pub fn max_norm(&self, q: usize, node: usize) -> f64 {
        let nn = self.n * self.n;
        self.raw(q, node).chunks(nn).map(|b| crate::linalg::spectral_norm(b, self.n)).fold(0.0, f64::max)
    }

    /// `max_k ⟨εk⟩^q max_x |S_q|` at a node.
    pub fn weighted_max(&self, q: usize, node: usize) -> f64 {
        let per_mode = self.grid.npts() * self.n * self.n;
        let raw = self.raw(q, node);
        self.modes
            .iter()
            .enumerate()
            .map(|(lm, &kk)| {
                let xi: Vec<f64> = self.grid.k_vec(kk).iter().map(|v| *v as f64 * self.grid.eps).collect();
                let w = crate::symdsl::japanese(&xi).powi(q as i32);
                w * raw[lm * per_mode..(lm + 1) * per_mode].iter().map(|v| v.norm()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        let man = Manifest {
            q0: self.q0,
            gamma: self.gamma,
            dt: self.dt,
            tau: self.tau,
            times: self.times.clone(),
            grid: self.grid,
            n: self.n,
            order: self.order,
            modes: self.modes.clone(),
            dtype: "complex128".into(),
        };
        let mut payload = Vec::with_capacity((self.values.len() + self.derivs.len()) * 16);
        for v in self.values.iter().chain(&self.derivs) {
            payload.extend_from_slice(&v.re.to_le_bytes());
            payload.extend_from_slice(&v.im.to_le_bytes());
        }
        write_framed(w, FAMILY_MAGIC, &man, &payload)
    }

    pub fn read<R: Read>(r: &mut R) -> Result<Self> {
        let (h, payload) = read_framed(r, FAMILY_MAGIC)?;
        let man: Manifest = serde_json::from_slice(&h)?;
        if man.dtype != "complex128" {
            return Err(Error::Format(format!("unsupported dtype {}", man.dtype)));
        }
        man.grid.validate()?;
        let len = (man.q0 + 1) * man.times.len() * man.modes.len() * man.grid.npts() * man.n * man.n;
        if payload.len() != 2 * len * 16 {
            return Err(Error::Format(format!("payload has {} bytes, manifest implies {}", payload.len(), 2 * len * 16)));
        }
        let vals: Vec<C64> = payload
            .chunks_exact(16)
            .map(|c| C64::new(f64::from_le_bytes(c[..8].try_into().unwrap()), f64::from_le_bytes(c[8..].try_into().unwrap())))
            .collect();
        let (values, derivs) = vals.split_at(len);
        Ok(CorrectorFamily {
            q0: man.q0,
            gamma: man.gamma,
            dt: man.dt,
            tau: man.tau,
            times: man.times,
            grid: man.grid,
            n: man.n,
            order: man.order,
            modes: man.modes,
            values: values.to_vec(),
            derivs: derivs.to_vec(),
        })
    }
}

/// `Σ(τ; t_m)` at every stored node.
pub fn assemble_sigma(fam: &CorrectorFamily, eps: f64) -> Vec<SampledSymbol> {
    (0..fam.nodes()).map(|i| fam.sigma(i, eps)).collect()
}
