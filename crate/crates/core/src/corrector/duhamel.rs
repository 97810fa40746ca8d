use num_complex::Complex64 as C64;
use serde::Serialize;

use super::family::{default_corrector_dt, fit_step, q0_from, solve_family, CorrectorFamily, FamilyOptions, NodeSelection};
use super::guard::{eps_guard, EpsGuardReport};
use crate::error::{Error, Result};
use crate::quantize::{idft_full, project_lattice, to_fourier, OpEps, StateVector};
use crate::symdsl::{grid_rates, MatrixSymbol};

#[derive(Clone, Debug)]
pub struct DuhamelOptions {
    /// Number of quadrature intervals on `[0, T|ln ε|]`.
    pub nodes: usize,
    /// Upper bound for the corrector step; `None` uses the default.
    pub dt_max: Option<f64>,
    pub check_guard: bool,
    /// Relative size of the last Neumann term kept.
    pub neumann_tol: f64,
    pub max_terms: usize,
}

impl Default for DuhamelOptions {
    fn default() -> Self {
        DuhamelOptions { nodes: 24, dt_max: None, check_guard: true, neumann_tol: 1e-10, max_terms: 200 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DuhamelResult {
    pub times: Vec<f64>,
    #[serde(skip)]
    pub states: Vec<StateVector>,
    /// `op_ε(Σ(0;t))u0` alone.
    #[serde(skip)]
    pub free: Vec<StateVector>,
    pub q0: usize,
    pub neumann_terms: usize,
    pub guard: Option<EpsGuardReport>,
}

/// `op_ε(Σ(τ;t))` and `op_ε(∂_tΣ(τ;t))` at one node.
struct NodeOps {
    sig: OpEps,
    dsig: OpEps,
}

impl NodeOps {
    fn new(fam: &CorrectorFamily, node: usize, eps: f64) -> Result<Self> {
        Ok(NodeOps { sig: OpEps::new(&fam.sigma(node, eps))?, dsig: OpEps::new(&fam.dsigma(node, eps))? })
    }

    fn sigma(&self, v: &StateVector) -> StateVector {
        idft_full(v.grid, v.n, self.sig.apply_coef(&to_fourier(v)))
    }

    /// `ε op_ε(ρ) v = op_ε(∂_tΣ)v − op_ε(M) op_ε(Σ)v`.
    fn err(&self, op_m: &OpEps, v: &StateVector) -> StateVector {
        let vh = to_fourier(v);
        let a = self.dsig.apply_coef(&vh);
        let b = op_m.apply_coef(&project_lattice(v.grid, v.n, &self.sig.apply_coef(&vh)));
        let out: Vec<C64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        idft_full(v.grid, v.n, out)
    }
}

fn trapezoid(h: f64, terms: Vec<StateVector>, zero: &StateVector) -> StateVector {
    let mut acc = zero.clone();
    let last = terms.len().saturating_sub(1);
    for (l, t) in terms.iter().enumerate() {
        let w = if l == 0 || l == last { 0.5 * h } else { h };
        acc.axpy(C64::new(w, 0.0), t);
    }
    if terms.len() < 2 {
        return zero.clone();
    }
    acc
}

/// Solves `u' = op_ε(M)u + f`, `u(0) = u0`, on `[0, T|ln ε|]` through the
/// Duhamel representation with approximate solution operators `op_ε(Σ)`.
pub fn duhamel_solve(
    m: &MatrixSymbol,
    f: Option<&dyn Fn(f64) -> StateVector>,
    u0: &StateVector,
    big_t: f64,
    opts: &DuhamelOptions,
) -> Result<DuhamelResult> {
    let g = u0.grid;
    let eps = g.eps;
    if m.n() != u0.n {
        return Err(Error::Shape(format!("symbol is {}x{}, state has {} components", m.n(), m.n(), u0.n)));
    }
    let guard = if opts.check_guard {
        let r = eps_guard(eps, m, big_t, &g)?;
        if !r.pass {
            return Err(Error::Guard(format!("ε|ln ε|^N* = {:.3e} exceeds C0/‖M‖ = {:.3e}", r.lhs, r.threshold)));
        }
        Some(r)
    } else {
        None
    };
    let gamma = grid_rates(m, &g, 0.0).gamma_spec.max(0.0);
    let q0 = q0_from(gamma, big_t);
    let horizon = big_t * eps.ln().abs();
    let nodes = opts.nodes.max(1);
    let h = horizon / nodes as f64;
    let dt = fit_step(h, opts.dt_max.unwrap_or_else(|| default_corrector_dt(m, &g)));
    let per = (h / dt).round() as usize;
    let times: Vec<f64> = (0..=nodes).map(|i| i as f64 * h).collect();
    let fam_opts = FamilyOptions { nodes: NodeSelection::Stride(per), ..Default::default() };
    // ops[l][m - l] holds the operators for Σ(t_l; t_m)
    let ops: Vec<Vec<NodeOps>> = if m.is_time_dependent() {
        (0..nodes)
            .map(|l| {
                let fam = solve_family(m, q0, times[l], horizon, &g, dt, &fam_opts)?;
                (0..fam.nodes()).map(|i| NodeOps::new(&fam, i, eps)).collect()
            })
            .collect::<Result<_>>()?
    } else {
        let fam = solve_family(m, q0, 0.0, horizon, &g, dt, &fam_opts)?;
        vec![(0..fam.nodes()).map(|i| NodeOps::new(&fam, i, eps)).collect::<Result<_>>()?]
    };
    let pair = |l: usize, mm: usize| -> &NodeOps {
        if ops.len() == 1 {
            &ops[0][mm - l]
        } else {
            &ops[l][mm - l]
        }
    };
    let op_m: Vec<OpEps> = if m.is_time_dependent() {
        times.iter().map(|t| OpEps::from_symbol(m, &g, *t)).collect::<Result<_>>()?
    } else {
        vec![OpEps::from_symbol(m, &g, 0.0)?]
    };
    let op_m_at = |mm: usize| -> &OpEps { &op_m[if op_m.len() == 1 { 0 } else { mm }] };
    let zero = StateVector::zeros(g, u0.n);
    let rhs: Vec<StateVector> = (0..=nodes)
        .map(|mm| {
            let mut r = match f {
                Some(f) => f(times[mm]),
                None => zero.clone(),
            };
            r.axpy(C64::new(-1.0, 0.0), &pair(0, mm).err(op_m_at(mm), u0));
            r
        })
        .collect();
    let rho0 = |v: &[StateVector]| -> Vec<StateVector> {
        (0..=nodes)
            .map(|mm| {
                let terms: Vec<StateVector> = (0..=mm).map(|l| pair(l, mm).err(op_m_at(mm), &v[l])).collect();
                trapezoid(h, terms, &zero)
            })
            .collect()
    };
    let size = |v: &[StateVector]| v.iter().map(|s| s.l2()).fold(0.0, f64::max);
    let mut g_sum = rhs.clone();
    let mut term = rhs;
    let mut prev = size(&term);
    let mut used = 1;
    while prev > 0.0 {
        let next: Vec<StateVector> = rho0(&term)
            .into_iter()
            .map(|mut s| {
                s.scale_mut(C64::new(-1.0, 0.0));
                s
            })
            .collect();
        let sz = size(&next);
        if sz >= prev && used > 1 {
            return Err(Error::Guard(format!("Neumann series is not contracting: term {} has size {:.3e} after {:.3e}", used, sz, prev)));
        }
        for (a, b) in g_sum.iter_mut().zip(&next) {
            a.axpy(C64::new(1.0, 0.0), b);
        }
        used += 1;
        if sz <= opts.neumann_tol * size(&g_sum).max(f64::MIN_POSITIVE) {
            break;
        }
        if used >= opts.max_terms {
            return Err(Error::Guard(format!("Neumann series did not reach tolerance in {} terms", used)));
        }
        term = next;
        prev = sz;
    }
    let mut states = Vec::with_capacity(nodes + 1);
    let mut free = Vec::with_capacity(nodes + 1);
    for mm in 0..=nodes {
        let fr = pair(0, mm).sigma(u0);
        let terms: Vec<StateVector> = (0..=mm).map(|l| pair(l, mm).sigma(&g_sum[l])).collect();
        let mut u = fr.clone();
        u.axpy(C64::new(1.0, 0.0), &trapezoid(h, terms, &zero));
        states.push(u);
        free.push(fr);
    }
    Ok(DuhamelResult { times, states, free, q0, neumann_terms: used, guard })
}
