//! Reference integrators for `u' = op_ε(M)u` and `u' = op_ε(M)u + B(u,u)`.
//!
//! States evolve in lattice coefficient space (`|k_i| ≤ K`) with classical RK4;
//! nonlinear terms are formed pointwise on the grid and projected back.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quantize::{from_fourier, project_lattice, sobolev_norm, to_fourier, FourierState, OpEps, StateVector};
use crate::symdsl::{grid_rates, GridSpec, MatrixSymbol};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Bilinear map `B(u,v)_i = Σ_{jk} b_{ijk} u_j v_k` applied pointwise in x.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuadraticNonlinearity {
    n: usize,
    coef: Vec<C64>,
}

impl QuadraticNonlinearity {
    /// `coef[(i*n + j)*n + k] = b_{ijk}`.
    pub fn new(n: usize, coef: Vec<C64>) -> Result<Self> {
        if coef.len() != n * n * n {
            return Err(Error::Shape(format!("bilinear tensor needs {} entries, got {}", n * n * n, coef.len())));
        }
        if coef.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("bilinear tensor".into()));
        }
        Ok(QuadraticNonlinearity { n, coef })
    }

    pub fn zero(n: usize) -> Self {
        QuadraticNonlinearity { n, coef: vec![ZERO; n * n * n] }
    }

    /// Scalar `B(u,u) = c·u²`.
    pub fn scalar(c: C64) -> Self {
        QuadraticNonlinearity { n: 1, coef: vec![c] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coef(&self) -> &[C64] {
        &self.coef
    }

    pub fn is_zero(&self) -> bool {
        self.coef.iter().all(|c| *c == ZERO)
    }

    pub fn eval(&self, u: &[C64], v: &[C64], out: &mut [C64]) {
        let n = self.n;
        for i in 0..n {
            let mut acc = ZERO;
            for j in 0..n {
                for k in 0..n {
                    acc += self.coef[(i * n + j) * n + k] * u[j] * v[k];
                }
            }
            out[i] = acc;
        }
    }

    pub fn apply(&self, u: &StateVector, v: &StateVector) -> Result<StateVector> {
        u.check_compatible(v)?;
        if u.n != self.n {
            return Err(Error::Shape(format!("nonlinearity acts on {} components, state has {}", self.n, u.n)));
        }
        let npts = u.grid.npts();
        let mut out = StateVector::zeros(u.grid, self.n);
        let (mut a, mut b, mut o) = (vec![ZERO; self.n], vec![ZERO; self.n], vec![ZERO; self.n]);
        for j in 0..npts {
            for c in 0..self.n {
                a[c] = u.data[c * npts + j];
                b[c] = v.data[c * npts + j];
            }
            self.eval(&a, &b, &mut o);
            for c in 0..self.n {
                out.data[c * npts + j] = o[c];
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    pub t: f64,
    pub l2: f64,
    pub linf: f64,
    /// `‖u‖_{ε,s}` for each configured order.
    pub hs: Vec<f64>,
}

impl Diagnostics {
    pub fn of(t: f64, u: &StateVector, orders: &[f64]) -> Self {
        Diagnostics { t, l2: u.l2(), linf: u.linf(), hs: orders.iter().map(|s| sobolev_norm(u, *s, u.grid.eps)).collect() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub eps: f64,
    pub times: Vec<f64>,
    #[serde(skip)]
    pub states: Vec<StateVector>,
    pub sobolev_orders: Vec<f64>,
    pub diagnostics: Vec<Diagnostics>,
    /// Step size of the accepted run.
    pub dt: f64,
    /// Relative L² difference between the last two refinement levels at the final time.
    pub refinement_diff: Option<f64>,
    /// `false` when the refinement cap was reached above tolerance.
    pub accurate: bool,
    /// Time at which the blow-up guard fired.
    pub blowup_time: Option<f64>,
}

impl Trajectory {
    pub fn last(&self) -> &StateVector {
        self.states.last().unwrap()
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut sink = CsvSink::create(path, &self.sobolev_orders)?;
        for d in &self.diagnostics {
            sink.row(d)?;
        }
        Ok(())
    }
}

/// Receives diagnostics rows while a run progresses.
pub trait DiagnosticsSink {
    /// Called at the start of every refinement pass; earlier rows are superseded.
    fn begin(&mut self) -> Result<()>;
    fn row(&mut self, d: &Diagnostics) -> Result<()>;
}

/// Streams `t,L2,Linf,H<s>...` rows to a file, rewriting it on each pass.
pub struct CsvSink {
    path: PathBuf,
    orders: Vec<f64>,
    out: BufWriter<File>,
}

impl CsvSink {
    pub fn create(path: &Path, orders: &[f64]) -> Result<Self> {
        let mut s = CsvSink { path: path.to_path_buf(), orders: orders.to_vec(), out: BufWriter::new(File::create(path)?) };
        s.header()?;
        Ok(s)
    }

    fn header(&mut self) -> Result<()> {
        let mut h = String::from("t,L2,Linf");
        for s in &self.orders {
            h.push_str(&format!(",H{}", s));
        }
        writeln!(self.out, "{}", h)?;
        Ok(())
    }
}

impl DiagnosticsSink for CsvSink {
    fn begin(&mut self) -> Result<()> {
        self.out = BufWriter::new(File::create(&self.path)?);
        self.header()
    }

    fn row(&mut self, d: &Diagnostics) -> Result<()> {
        write!(self.out, "{:.12e},{:.12e},{:.12e}", d.t, d.l2, d.linf)?;
        for h in &d.hs {
            write!(self.out, ",{:.12e}", h)?;
        }
        writeln!(self.out)?;
        self.out.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct FlowOptions {
    /// Initial step; `None` uses `0.25/(γ_∞+1)`.
    pub dt: Option<f64>,
    /// Halve the step until successive runs agree to `tol`.
    pub refine: bool,
    pub tol: f64,
    pub max_halvings: usize,
    /// Number of stored intervals; the final time is always stored.
    pub nodes: usize,
    pub sobolev_orders: Vec<f64>,
    /// L∞ threshold of the semilinear blow-up guard.
    pub blowup: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions { dt: None, refine: true, tol: 1e-8, max_halvings: 8, nodes: 16, sobolev_orders: vec![1.0], blowup: 1e3 }
    }
}

/// Default step `0.25/(γ_∞+1)` from the largest pointwise norm of `M` at `t = 0`.
pub fn default_dt(m: &MatrixSymbol, g: &GridSpec) -> f64 {
    0.25 / (grid_rates(m, g, 0.0).gamma_inf + 1.0)
}

/// `op_ε(M(t))` built on demand, cached for autonomous symbols.
struct OpSource<'a> {
    m: &'a MatrixSymbol,
    grid: GridSpec,
    fixed: Option<OpEps>,
}

impl<'a> OpSource<'a> {
    fn new(m: &'a MatrixSymbol, grid: GridSpec) -> Result<Self> {
        let fixed = if m.is_time_dependent() { None } else { Some(OpEps::from_symbol(m, &grid, 0.0)?) };
        Ok(OpSource { m, grid, fixed })
    }

    fn at(&self, t: f64) -> Result<std::borrow::Cow<'_, OpEps>> {
        Ok(match &self.fixed {
            Some(op) => std::borrow::Cow::Borrowed(op),
            None => std::borrow::Cow::Owned(OpEps::from_symbol(self.m, &self.grid, t)?),
        })
    }
}

fn axpy_coef(y: &FourierState, c: f64, k: &FourierState) -> FourierState {
    FourierState { grid: y.grid, n: y.n, coef: y.coef.iter().zip(&k.coef).map(|(a, b)| a + b * c).collect() }
}

fn nonlinear_term(b: &QuadraticNonlinearity, uh: &FourierState) -> Result<FourierState> {
    let u = from_fourier(uh)?;
    let w = b.apply(&u, &u)?;
    let full = crate::quantize::dft_full(&w);
    Ok(project_lattice(uh.grid, uh.n, &full))
}

struct Pass {
    times: Vec<f64>,
    states: Vec<StateVector>,
    blowup_time: Option<f64>,
}

fn run_pass(
    src: &OpSource,
    b: Option<&QuadraticNonlinearity>,
    u0: &FourierState,
    t_end: f64,
    steps: usize,
    stride: usize,
    blowup: f64,
) -> Result<Pass> {
    let dt = t_end / steps as f64;
    let rhs = |op: &OpEps, y: &FourierState| -> Result<FourierState> {
        let mut out = op.apply_lattice(y);
        if let Some(b) = b {
            let nl = nonlinear_term(b, y)?;
            for (o, v) in out.coef.iter_mut().zip(&nl.coef) {
                *o += v;
            }
        }
        Ok(out)
    };
    let mut y = u0.clone();
    let mut times = vec![0.0];
    let mut states = vec![from_fourier(&y)?];
    let mut op0 = src.at(0.0)?;
    for step in 0..steps {
        let t0 = step as f64 * dt;
        let oph = src.at(t0 + 0.5 * dt)?;
        let op1 = src.at(t0 + dt)?;
        let k1 = rhs(&op0, &y)?;
        let k2 = rhs(&oph, &axpy_coef(&y, 0.5 * dt, &k1))?;
        let k3 = rhs(&oph, &axpy_coef(&y, 0.5 * dt, &k2))?;
        let k4 = rhs(&op1, &axpy_coef(&y, dt, &k3))?;
        for i in 0..y.coef.len() {
            y.coef[i] += (k1.coef[i] + (k2.coef[i] + k3.coef[i]) * 2.0 + k4.coef[i]) * (dt / 6.0);
        }
        op0 = op1;
        let t1 = (step + 1) as f64 * dt;
        let guarded = b.is_some();
        let u = if guarded || (step + 1) % stride == 0 { Some(from_fourier(&y)?) } else { None };
        if let Some(u) = u {
            let blown = guarded && (!u.linf().is_finite() || u.linf() > blowup);
            if (step + 1) % stride == 0 || blown {
                times.push(t1);
                states.push(u);
            }
            if blown {
                return Ok(Pass { times, states, blowup_time: Some(t1) });
            }
        }
    }
    Ok(Pass { times, states, blowup_time: None })
}

fn rel_diff(a: &StateVector, b: &StateVector) -> f64 {
    a.sub(b).l2() / b.l2().max(1.0)
}

fn evolve(
    m: &MatrixSymbol,
    b: Option<&QuadraticNonlinearity>,
    u0: &StateVector,
    t_end: f64,
    opts: &FlowOptions,
    mut sink: Option<&mut dyn DiagnosticsSink>,
) -> Result<Trajectory> {
    if m.n() != u0.n || m.d() != u0.grid.d {
        return Err(Error::Shape(format!("symbol is {}x{} in d={}, state has {} components in d={}", m.n(), m.n(), m.d(), u0.n, u0.grid.d)));
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::Precondition(format!("final time must be positive, got {}", t_end)));
    }
    let nodes = opts.nodes.max(1);
    let dt0 = opts.dt.unwrap_or_else(|| default_dt(m, &u0.grid));
    let mut per_node = ((t_end / dt0) / nodes as f64).ceil().max(1.0) as usize;
    let src = OpSource::new(m, u0.grid)?;
    let uh = to_fourier(u0);
    let orders = opts.sobolev_orders.clone();
    let mut prev: Option<Pass> = None;
    let mut diff = None;
    let mut accurate = !opts.refine;
    let halvings = if opts.refine { opts.max_halvings + 1 } else { 0 };
    for level in 0..=halvings {
        let pass = run_pass(&src, b, &uh, t_end, nodes * per_node, per_node, opts.blowup)?;
        if let Some(s) = sink.as_deref_mut() {
            s.begin()?;
            for (t, u) in pass.times.iter().zip(&pass.states) {
                s.row(&Diagnostics::of(*t, u, &orders))?;
            }
        }
        let stop = pass.blowup_time.is_some() || !opts.refine;
        if let Some(p) = &prev {
            if p.blowup_time.is_none() && pass.blowup_time.is_none() {
                let dlt = rel_diff(p.states.last().unwrap(), pass.states.last().unwrap());
                diff = Some(dlt);
                if dlt < opts.tol {
                    accurate = true;
                }
            }
        }
        let done = stop || accurate || level == halvings;
        prev = Some(pass);
        if done {
            break;
        }
        per_node *= 2;
    }
    let pass = prev.unwrap();
    let diagnostics: Vec<Diagnostics> = pass.times.iter().zip(&pass.states).map(|(t, u)| Diagnostics::of(*t, u, &orders)).collect();
    if diagnostics.iter().any(|d| !d.l2.is_finite()) && pass.blowup_time.is_none() {
        return Err(Error::NonFinite("trajectory diagnostics".into()));
    }
    Ok(Trajectory {
        eps: u0.grid.eps,
        times: pass.times,
        states: pass.states,
        sobolev_orders: orders,
        diagnostics,
        dt: t_end / (nodes * per_node) as f64,
        refinement_diff: diff,
        accurate,
        blowup_time: pass.blowup_time,
    })
}

/// `u(t) = exp(t op_ε(M))u0` on `[0, t_end]`; ε is the grid's.
pub fn evolve_linear(m: &MatrixSymbol, u0: &StateVector, t_end: f64, opts: &FlowOptions) -> Result<Trajectory> {
    evolve(m, None, u0, t_end, opts, None)
}

pub fn evolve_linear_with_sink(
    m: &MatrixSymbol,
    u0: &StateVector,
    t_end: f64,
    opts: &FlowOptions,
    sink: &mut dyn DiagnosticsSink,
) -> Result<Trajectory> {
    evolve(m, None, u0, t_end, opts, Some(sink))
}

/// `u' = op_ε(M)u + B(u,u)`, stopping at the first step where `|u|_∞` exceeds the guard.
pub fn evolve_semilinear(m: &MatrixSymbol, b: &QuadraticNonlinearity, u0: &StateVector, t_end: f64, opts: &FlowOptions) -> Result<Trajectory> {
    if b.n() != m.n() {
        return Err(Error::Shape(format!("nonlinearity has {} components, symbol {}", b.n(), m.n())));
    }
    evolve(m, Some(b), u0, t_end, opts, None)
}

pub fn evolve_semilinear_with_sink(
    m: &MatrixSymbol,
    b: &QuadraticNonlinearity,
    u0: &StateVector,
    t_end: f64,
    opts: &FlowOptions,
    sink: &mut dyn DiagnosticsSink,
) -> Result<Trajectory> {
    if b.n() != m.n() {
        return Err(Error::Shape(format!("nonlinearity has {} components, symbol {}", b.n(), m.n())));
    }
    evolve(m, Some(b), u0, t_end, opts, Some(sink))
}

/// Applies `op_ε(M(t))` to a state, keeping the lattice part of the output.
pub fn apply_projected(m: &MatrixSymbol, u: &StateVector, t: f64) -> Result<StateVector> {
    let op = OpEps::from_symbol(m, &u.grid, t)?;
    let w = op.apply_lattice(&to_fourier(u));
    from_fourier(&w)
}

/// Lattice projection of a grid state.
pub fn project(u: &StateVector) -> StateVector {
    let p = project_lattice(u.grid, u.n, &crate::quantize::dft_full(u));
    from_fourier(&p).expect("projected spectrum has lattice size")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::matmul;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bump(g: GridSpec, n: usize) -> StateVector {
        StateVector::from_fn(g, n, |x| {
            let b = (-2.0 * (1.0 - (x[0] - 1.0).cos())).exp();
            (0..n).map(|c| C64::new(b * (1.0 + c as f64), 0.3 * c as f64 * b)).collect()
        })
    }

    fn expm(a: &[C64], n: usize) -> Vec<C64> {
        // scaling and squaring with a 20-term Taylor core
        let norm: f64 = a.iter().map(|v| v.norm()).sum();
        let s = (norm.max(1.0).log2().ceil() as i32 + 4).max(0);
        let scale = 0.5f64.powi(s);
        let b: Vec<C64> = a.iter().map(|v| v * scale).collect();
        let mut term = crate::linalg::identity(n);
        let mut sum = term.clone();
        for k in 1..20 {
            term = matmul(&term, &b, n).iter().map(|v| v / k as f64).collect();
            for (s, t) in sum.iter_mut().zip(&term) {
                *s += t;
            }
        }
        for _ in 0..s {
            sum = matmul(&sum, &sum, n);
        }
        sum
    }

    #[test]
    fn zero_symbol_keeps_state() {
        let g = GridSpec::new(1, 32, 15, 0.1).unwrap();
        let u0 = project(&bump(g, 1));
        let tr = evolve_linear(&MatrixSymbol::zeros(1, 1), &u0, 2.0, &FlowOptions::default()).unwrap();
        assert!(tr.last().sub(&u0).l2() < 1e-14);
        assert!(tr.accurate);
    }

    #[test]
    fn multiplication_flow() {
        let g = GridSpec::with_full_band(1, 128, 0.1).unwrap();
        let m = MatrixSymbol::parse("[[0.3*cos(x1), 1], [0, -0.5*sin(x1)]]", 1, 0.0).unwrap();
        let u0 = bump(g, 2);
        let t = 1.5;
        let tr = evolve_linear(&m, &u0, t, &FlowOptions::default()).unwrap();
        let npts = g.npts();
        let mut err: f64 = 0.0;
        let mut x = [0.0];
        for j in 0..npts {
            g.x_at(j, &mut x);
            let a: Vec<C64> = m.eval(&x, &[0.0], 0.0).iter().map(|v| v * t).collect();
            let e = expm(&a, 2);
            for r in 0..2 {
                let want = e[r * 2] * u0.data[j] + e[r * 2 + 1] * u0.data[npts + j];
                err = err.max((want - tr.last().data[r * npts + j]).norm());
            }
        }
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn fourier_multiplier_flow() {
        let g = GridSpec::new(1, 64, 31, 0.125).unwrap();
        let m = MatrixSymbol::parse("[[i*xi1, 0.5], [-0.5*bracket(-1), -0.2*xi1*xi1]]", 1, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u0 = StateVector::random_bandlimited(g, 2, &mut rng);
        let t = 1.0;
        let tr = evolve_linear(&m, &u0, t, &FlowOptions::default()).unwrap();
        let c0 = to_fourier(&u0);
        let c1 = to_fourier(tr.last());
        let nk = g.nk();
        let mut err: f64 = 0.0;
        for kk in 0..nk {
            let xi = g.k_vec(kk)[0] as f64 * g.eps;
            let a: Vec<C64> = m.eval(&[0.0], &[xi], 0.0).iter().map(|v| v * t).collect();
            let e = expm(&a, 2);
            for r in 0..2 {
                let want = e[r * 2] * c0.coef[kk] + e[r * 2 + 1] * c0.coef[nk + kk];
                err = err.max((want - c1.coef[r * nk + kk]).norm());
            }
        }
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn riccati_before_blowup() {
        let g = GridSpec::new(1, 8, 3, 0.1).unwrap();
        let u0 = StateVector::from_fn(g, 1, |_| vec![C64::new(0.5, 0.0)]);
        let b = QuadraticNonlinearity::scalar(C64::new(1.0, 0.0));
        let opts = FlowOptions { dt: Some(0.01), ..Default::default() };
        let tr = evolve_semilinear(&MatrixSymbol::zeros(1, 1), &b, &u0, 1.5, &opts).unwrap();
        assert!(tr.blowup_time.is_none());
        for (t, u) in tr.times.iter().zip(&tr.states) {
            let want = 0.5 / (1.0 - t * 0.5);
            assert!((u.data[0].re - want).abs() < 1e-6);
        }
        let tr = evolve_semilinear(&MatrixSymbol::zeros(1, 1), &b, &u0, 3.0, &opts).unwrap();
        let hit = tr.blowup_time.unwrap();
        assert!(hit > 1.99 && hit < 2.01, "{hit}");
    }

    #[test]
    fn zero_nonlinearity_matches_linear() {
        let g = GridSpec::new(1, 32, 15, 0.125).unwrap();
        let m = MatrixSymbol::parse("cos(x1)*xi1*i + 0.1", 1, 1.0).unwrap();
        let u0 = project(&bump(g, 1));
        let a = evolve_linear(&m, &u0, 1.0, &FlowOptions::default()).unwrap();
        let b = evolve_semilinear(&m, &QuadraticNonlinearity::zero(1), &u0, 1.0, &FlowOptions::default()).unwrap();
        assert!(a.last().sub(b.last()).l2() < 1e-12);
    }

    #[test]
    fn csv_stream_has_header_and_rows() {
        let g = GridSpec::new(1, 16, 7, 0.25).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        let m = MatrixSymbol::parse("0.2", 1, 0.0).unwrap();
        let mut sink = CsvSink::create(&path, &[1.0, 2.0]).unwrap();
        let opts = FlowOptions { nodes: 4, ..Default::default() };
        let tr = evolve_linear_with_sink(&m, &project(&bump(g, 1)), 1.0, &opts, &mut sink).unwrap();
        drop(sink);
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,L2,Linf,H1,H2");
        assert_eq!(lines.len(), tr.times.len() + 1);
    }
}
