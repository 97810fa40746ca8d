use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::family::{default_corrector_dt, fit_step, q0_from, solve_family, FamilyOptions, ModeWindow, NodeSelection};
use super::residual::{residual_probe_with, ResidualSettings};
use crate::error::{Error, Result};
use crate::flow::{evolve_linear, project, FlowOptions};
use crate::linalg::ls_fit;
use crate::quantize::{from_fourier, idft_full, to_fourier, OpEps, StateVector};
use crate::symdsl::{grid_rates, GridSpec, MatrixSymbol};

#[derive(Clone, Debug, Serialize)]
pub struct ApproxSettings {
    pub n_x: usize,
    pub k_max: usize,
    /// Initial data live on `|k| ≤ band/ε`, capped at `K/2`.
    pub band: f64,
    /// Stored intervals on `[0, T|ln ε|]`.
    pub nodes: usize,
    /// Overrides `q0 = [γT] + 1`.
    pub q0: Option<usize>,
    pub dt_max: Option<f64>,
    pub seed: u64,
}

impl Default for ApproxSettings {
    fn default() -> Self {
        ApproxSettings { n_x: 256, k_max: 127, band: 0.5, nodes: 8, q0: None, dt_max: None, seed: 7 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ApproxRow {
    pub eps: f64,
    pub q0: usize,
    pub dt: f64,
    pub times: Vec<f64>,
    /// `‖exp(t op_ε(M))u0 − op_ε(Σ(0;t))u0‖` with `‖u0‖ = 1`.
    pub errors: Vec<f64>,
    pub max_error: f64,
    /// Residual of `op_ε(Σ)` at `T|ln ε|`, restricted to the datum band.
    pub residual: f64,
    /// Step refinement of the reference flow met its tolerance.
    pub reference_accurate: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ApproxReport {
    pub big_t: f64,
    pub rows: Vec<ApproxRow>,
    /// Least-squares slope of `log max_error` against `log ε`; `None` for a single ε.
    pub slope: Option<f64>,
}

/// Seeded unit-norm datum on `|k| ≤ min(band/ε, K/2)`.
pub fn approx_datum(g: GridSpec, n: usize, band: f64, seed: u64) -> Result<StateVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = to_fourier(&StateVector::random_bandlimited(g, n, &mut rng));
    let cut = (band / g.eps).min(g.k_max as f64 / 2.0);
    let nk = g.nk();
    for kk in 0..nk {
        if g.k_vec(kk).iter().any(|k| k.abs() as f64 > cut) {
            for comp in 0..n {
                c.coef[comp * nk + kk] = C64::new(0.0, 0.0);
            }
        }
    }
    let mut u = from_fourier(&c)?;
    let l2 = u.l2();
    if l2 == 0.0 {
        return Err(Error::Precondition("datum band contains no lattice mode".into()));
    }
    u.scale_mut(C64::new(1.0 / l2, 0.0));
    Ok(u)
}

/// Compares `op_ε(Σ(0;t))u0` with the reference flow on `[0, T|ln ε|]` for
/// each `ε`.
pub fn approximation_experiment(m: &MatrixSymbol, eps_list: &[f64], big_t: f64, s: &ApproxSettings) -> Result<ApproxReport> {
    if m.is_time_dependent() {
        return Err(Error::Unsupported("the approximation experiment needs an autonomous symbol".into()));
    }
    if !(big_t > 0.0) || s.nodes == 0 {
        return Err(Error::Precondition("need T > 0 and at least one node".into()));
    }
    let mut rows = Vec::new();
    for &eps in eps_list {
        let g = GridSpec::new(m.d(), s.n_x, s.k_max, eps)?;
        let u0 = approx_datum(g, m.n(), s.band, s.seed)?;
        let uh = to_fourier(&u0);
        let cut = (s.band / eps).min(s.k_max as f64 / 2.0);
        let gamma = grid_rates(m, &g, 0.0).gamma_spec.max(0.0);
        let q0 = s.q0.unwrap_or_else(|| q0_from(gamma, big_t));
        let horizon = big_t * eps.ln().abs();
        let h = horizon / s.nodes as f64;
        let dt = fit_step(h, s.dt_max.unwrap_or_else(|| default_corrector_dt(m, &g)));
        let fam = solve_family(
            m,
            q0,
            0.0,
            horizon,
            &g,
            dt,
            &FamilyOptions { nodes: NodeSelection::Stride((h / dt).round() as usize), modes: ModeWindow::support(&uh, 0.0), ..Default::default() },
        )?;
        let reference = evolve_linear(m, &u0, horizon, &FlowOptions { nodes: s.nodes, sobolev_orders: vec![], ..Default::default() })?;
        if reference.times.len() != fam.nodes() {
            return Err(Error::Precondition(format!("reference stored {} nodes, family {}", reference.times.len(), fam.nodes())));
        }
        let mut errors = Vec::with_capacity(fam.nodes());
        for (node, want) in reference.states.iter().enumerate() {
            let op = OpEps::new(&fam.sigma(node, eps))?;
            let got = project(&idft_full(g, m.n(), op.apply_coef(&uh)));
            errors.push(got.sub(want).l2());
        }
        let residual = residual_probe_with(m, &fam, eps, horizon, &ResidualSettings { input_band: cut / s.k_max as f64, ..Default::default() })?;
        rows.push(ApproxRow {
            eps,
            q0,
            dt,
            times: fam.times.clone(),
            max_error: errors.iter().cloned().fold(0.0, f64::max),
            errors,
            residual,
            reference_accurate: reference.accurate,
        });
    }
    let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.max_error > 0.0).map(|r| (r.eps.ln(), r.max_error.ln())).collect();
    let slope = (pts.len() >= 2).then(|| ls_fit(&pts).0);
    Ok(ApproxReport { big_t, rows, slope })
}
