use std::collections::{BTreeSet, HashMap};

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::matmul_acc;
use crate::symdsl::multi::{leq, multi_binomial, multi_factorial, multi_indices, multi_indices_exact, order};
use crate::symdsl::MatrixSymbol;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Which composition expansion couples the correctors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Expansion {
    /// `M ♯_{q1} S` in semiclassical quantization.
    Sharp,
    /// `M ◇_{q1} S` in Weyl quantization.
    Diamond,
}

/// Terms `c · D^μ M · D^ν S` of the order-`k` product, with joint
/// multi-indices `(x-part, ξ-part)` of length `2d`.
pub fn coupling_terms(expansion: Expansion, d: usize, k: usize) -> Vec<(C64, Vec<usize>, Vec<usize>)> {
    let mut out = Vec::new();
    match expansion {
        Expansion::Sharp => {
            let phase = C64::new(0.0, -1.0).powi(k as i32);
            for alpha in multi_indices_exact(d, k) {
                let mut mu = vec![0; d];
                mu.extend_from_slice(&alpha);
                let mut nu = alpha.clone();
                nu.extend(std::iter::repeat_n(0, d));
                out.push((phase / multi_factorial(&alpha), mu, nu));
            }
        }
        Expansion::Diamond => {
            let phase = C64::new(0.0, -0.5).powi(k as i32);
            for ka in 0..=k {
                let sign = if ka % 2 == 0 { 1.0 } else { -1.0 };
                for alpha in multi_indices_exact(d, ka) {
                    for beta in multi_indices_exact(d, k - ka) {
                        let c = phase * sign / (multi_factorial(&alpha) * multi_factorial(&beta));
                        let mut mu = alpha.clone();
                        mu.extend_from_slice(&beta);
                        let mut nu = beta.clone();
                        nu.extend_from_slice(&alpha);
                        out.push((c, mu, nu));
                    }
                }
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug)]
struct Term {
    dst: usize,
    src: usize,
    m: usize,
    coef: C64,
}

/// Precompiled triangular system for `D^γ S_q`, `0 ≤ q ≤ q_top`: each
/// unknown obeys `∂_t D^γ S_q = Σ_{γ'≤γ} C(γ,γ') D^{γ-γ'}M D^{γ'}S_q` plus the
/// differentiated coupling terms from lower `q`.
#[derive(Clone, Debug)]
pub struct Hierarchy {
    d: usize,
    n: usize,
    q_top: usize,
    slots: Vec<(usize, Vec<usize>)>,
    slot_index: HashMap<(usize, Vec<usize>), usize>,
    m_derivs: Vec<MatrixSymbol>,
    m_keys: Vec<Vec<usize>>,
    terms: Vec<Term>,
    time_dependent: bool,
}

fn down_closure(set: &BTreeSet<Vec<usize>>) -> BTreeSet<Vec<usize>> {
    let mut out = set.clone();
    let mut frontier: Vec<Vec<usize>> = set.iter().cloned().collect();
    while let Some(g) = frontier.pop() {
        for i in 0..g.len() {
            if g[i] > 0 {
                let mut h = g.clone();
                h[i] -= 1;
                if out.insert(h.clone()) {
                    frontier.push(h);
                }
            }
        }
    }
    out
}

fn below(g: &[usize]) -> Vec<Vec<usize>> {
    multi_indices(g.len(), order(g)).into_iter().filter(|h| leq(h, g)).collect()
}

impl Hierarchy {
    /// `base_order` keeps all derivatives `|γ| ≤ base_order` of every `S_q`.
    pub fn new(m: &MatrixSymbol, q_top: usize, base_order: usize, expansion: Expansion) -> Result<Self> {
        let d = m.d();
        let dim = 2 * d;
        let mut needed: Vec<BTreeSet<Vec<usize>>> = vec![BTreeSet::new(); q_top + 1];
        for q in (0..=q_top).rev() {
            let mut set: BTreeSet<Vec<usize>> = multi_indices(dim, base_order).into_iter().collect();
            for qp in q + 1..=q_top {
                for (_, _, nu) in coupling_terms(expansion, d, qp - q) {
                    for g in &needed[qp] {
                        for gp in below(g) {
                            set.insert(gp.iter().zip(&nu).map(|(a, b)| a + b).collect());
                        }
                    }
                }
            }
            needed[q] = down_closure(&set);
        }
        let mut slots = Vec::new();
        let mut slot_index = HashMap::new();
        for (q, set) in needed.iter().enumerate() {
            let mut v: Vec<Vec<usize>> = set.iter().cloned().collect();
            v.sort_by_key(|g| (order(g), std::cmp::Reverse(g.clone())));
            for g in v {
                slot_index.insert((q, g.clone()), slots.len());
                slots.push((q, g));
            }
        }
        let mut m_keys: Vec<Vec<usize>> = Vec::new();
        let mut m_index: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut key = |k: Vec<usize>, keys: &mut Vec<Vec<usize>>| -> usize {
            *m_index.entry(k.clone()).or_insert_with(|| {
                keys.push(k);
                keys.len() - 1
            })
        };
        let mut terms = Vec::new();
        for (dst, (q, g)) in slots.iter().enumerate() {
            for gp in below(g) {
                let c = multi_binomial(g, &gp);
                let mk: Vec<usize> = g.iter().zip(&gp).map(|(a, b)| a - b).collect();
                let m = key(mk, &mut m_keys);
                terms.push(Term { dst, src: slot_index[&(*q, gp.clone())], m, coef: C64::new(c, 0.0) });
            }
            for q2 in 0..*q {
                for (c, mu, nu) in coupling_terms(expansion, d, q - q2) {
                    for gp in below(g) {
                        let b = multi_binomial(g, &gp);
                        let mk: Vec<usize> = g.iter().zip(&gp).zip(&mu).map(|((a, b), c)| a - b + c).collect();
                        let src_g: Vec<usize> = gp.iter().zip(&nu).map(|(a, b)| a + b).collect();
                        let src = *slot_index
                            .get(&(q2, src_g.clone()))
                            .ok_or_else(|| Error::Precondition(format!("missing unknown D^{:?} S_{}", src_g, q2)))?;
                        let m = key(mk, &mut m_keys);
                        terms.push(Term { dst, src, m, coef: c * b });
                    }
                }
            }
        }
        let max_m = m_keys.iter().map(|k| order(k)).max().unwrap_or(0);
        let table = m.derivative_table(max_m)?;
        let m_derivs = m_keys.iter().map(|k| table.get_joint(k).cloned().unwrap()).collect();
        Ok(Hierarchy { d, n: m.n(), q_top, slots, slot_index, m_derivs, m_keys, terms, time_dependent: m.is_time_dependent() })
    }

    pub fn slots(&self) -> &[(usize, Vec<usize>)] {
        &self.slots
    }

    pub fn slot(&self, q: usize, gamma: &[usize]) -> Option<usize> {
        self.slot_index.get(&(q, gamma.to_vec())).copied()
    }

    pub fn q_top(&self) -> usize {
        self.q_top
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Highest derivative order of the symbol that the system uses.
    pub fn symbol_order_used(&self) -> usize {
        self.m_keys.iter().map(|k| order(k)).max().unwrap_or(0)
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    fn eval_m(&self, x: &[f64], xi: &[f64], t: f64, out: &mut [C64]) {
        let nn = self.n * self.n;
        for (i, ms) in self.m_derivs.iter().enumerate() {
            ms.eval_into(x, xi, t, &mut out[i * nn..(i + 1) * nn]);
        }
    }

    fn rhs(&self, mvals: &[C64], y: &[C64], out: &mut [C64]) {
        let n = self.n;
        let nn = n * n;
        out.iter_mut().for_each(|v| *v = ZERO);
        for t in &self.terms {
            let (a, b) = (&mvals[t.m * nn..(t.m + 1) * nn], &y[t.src * nn..(t.src + 1) * nn]);
            let o = &mut out[t.dst * nn..(t.dst + 1) * nn];
            if n == 1 {
                o[0] += t.coef * a[0] * b[0];
            } else {
                matmul_acc(a, b, n, t.coef, o);
            }
        }
    }

    /// Integrates every point `(x, ξ)` (flat: `d` x-coordinates then `d`
    /// ξ-coordinates) from `tau` over `steps` RK4 steps of size `dt`,
    /// recording the `keep` unknowns and their exact time derivatives after
    /// the listed steps (step 0 is the initial value).
    pub fn integrate(&self, points: &[f64], tau: f64, dt: f64, steps: usize, store_at: &[usize], keep: &[usize]) -> PointValues {
        let d = self.d;
        let npt = points.len() / (2 * d);
        let nn = self.n * self.n;
        let ns = self.slots.len();
        let nkeep = keep.len();
        let nm = self.m_derivs.len();
        let per_point: Vec<(Vec<C64>, Vec<C64>)> = (0..npt)
            .into_par_iter()
            .map(|p| {
                let x = &points[p * 2 * d..p * 2 * d + d];
                let xi = &points[p * 2 * d + d..(p + 1) * 2 * d];
                let mut y = vec![ZERO; ns * nn];
                let id = self.slot(0, &vec![0; 2 * d]).unwrap();
                for i in 0..self.n {
                    y[id * nn + i * self.n + i] = C64::new(1.0, 0.0);
                }
                let mut m0 = vec![ZERO; nm * nn];
                let mut mh = vec![ZERO; nm * nn];
                let mut m1 = vec![ZERO; nm * nn];
                self.eval_m(x, xi, tau, &mut m0);
                let (mut k1, mut k2, mut k3, mut k4) = (vec![ZERO; ns * nn], vec![ZERO; ns * nn], vec![ZERO; ns * nn], vec![ZERO; ns * nn]);
                let mut tmp = vec![ZERO; ns * nn];
                let mut vals = Vec::with_capacity(store_at.len() * nkeep * nn);
                let mut ders = Vec::with_capacity(store_at.len() * nkeep * nn);
                let mut next = 0;
                let record = |step: usize, y: &[C64], m: &[C64], next: &mut usize, vals: &mut Vec<C64>, ders: &mut Vec<C64>, buf: &mut [C64]| {
                    while *next < store_at.len() && store_at[*next] == step {
                        self.rhs(m, y, buf);
                        for &s in keep {
                            vals.extend_from_slice(&y[s * nn..(s + 1) * nn]);
                            ders.extend_from_slice(&buf[s * nn..(s + 1) * nn]);
                        }
                        *next += 1;
                    }
                };
                record(0, &y, &m0, &mut next, &mut vals, &mut ders, &mut k1);
                for step in 0..steps {
                    let t0 = tau + step as f64 * dt;
                    if self.time_dependent {
                        if step > 0 {
                            std::mem::swap(&mut m0, &mut m1);
                        }
                        self.eval_m(x, xi, t0 + 0.5 * dt, &mut mh);
                        self.eval_m(x, xi, t0 + dt, &mut m1);
                    }
                    let (ma, mb, mc): (&[C64], &[C64], &[C64]) = if self.time_dependent { (&m0, &mh, &m1) } else { (&m0, &m0, &m0) };
                    self.rhs(ma, &y, &mut k1);
                    for i in 0..tmp.len() {
                        tmp[i] = y[i] + k1[i] * (0.5 * dt);
                    }
                    self.rhs(mb, &tmp, &mut k2);
                    for i in 0..tmp.len() {
                        tmp[i] = y[i] + k2[i] * (0.5 * dt);
                    }
                    self.rhs(mb, &tmp, &mut k3);
                    for i in 0..tmp.len() {
                        tmp[i] = y[i] + k3[i] * dt;
                    }
                    self.rhs(mc, &tmp, &mut k4);
                    for i in 0..y.len() {
                        y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0);
                    }
                    record(step + 1, &y, mc, &mut next, &mut vals, &mut ders, &mut k1);
                }
                (vals, ders)
            })
            .collect();
        let nodes = store_at.len();
        let mut values = vec![ZERO; nodes * nkeep * npt * nn];
        let mut derivs = vec![ZERO; nodes * nkeep * npt * nn];
        for (p, (v, dv)) in per_point.iter().enumerate() {
            for node in 0..nodes {
                for s in 0..nkeep {
                    let src = (node * nkeep + s) * nn;
                    let dst = ((node * nkeep + s) * npt + p) * nn;
                    values[dst..dst + nn].copy_from_slice(&v[src..src + nn]);
                    derivs[dst..dst + nn].copy_from_slice(&dv[src..src + nn]);
                }
            }
        }
        PointValues { nodes, slots: nkeep, points: npt, nn, values, derivs }
    }
}

/// Kept unknowns `[node][kept slot][point][N×N]` and their time derivatives.
#[derive(Clone, Debug)]
pub struct PointValues {
    pub nodes: usize,
    pub slots: usize,
    pub points: usize,
    pub nn: usize,
    pub values: Vec<C64>,
    pub derivs: Vec<C64>,
}

impl PointValues {
    pub fn block(&self, node: usize, slot: usize) -> &[C64] {
        let len = self.points * self.nn;
        let o = (node * self.slots + slot) * len;
        &self.values[o..o + len]
    }

    pub fn deriv_block(&self, node: usize, slot: usize) -> &[C64] {
        let len = self.points * self.nn;
        let o = (node * self.slots + slot) * len;
        &self.derivs[o..o + len]
    }
}
