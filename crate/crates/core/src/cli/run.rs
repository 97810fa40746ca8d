use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::config::{ExperimentConfig, KindParams};
use crate::bounds::{
    default_k1, fit_n_star, instability_experiment, lower_bound_experiment, upper_bound_experiment, InstabilitySettings, SweepSettings,
};
use crate::calculus::{semiclassical_remainders, weyl_remainders, ProbeSettings};
use crate::corrector::{approximation_experiment, ApproxSettings};
use crate::error::{Error, Result};
use crate::flow::QuadraticNonlinearity;
use crate::garding::{corrector_growth_check, dyadic_blocks_range, garding_experiment, gradient_bound_check, GardingSettings, FORM_TOL};
use crate::symdsl::GridSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// Not run, e.g. the ε-guard refused this sweep point.
    Skipped,
}

/// One pass/fail decision with the tolerance it was held to.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: Option<f64>,
    pub tolerance: String,
    pub status: Status,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, tolerance: String, ok: bool) -> Self {
        Check { name: name.into(), value: Some(value), tolerance, status: if ok { Status::Pass } else { Status::Fail } }
    }

    fn skipped(name: impl Into<String>, why: String) -> Self {
        Check { name: name.into(), value: None, tolerance: why, status: Status::Skipped }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub kind: String,
    pub seed: u64,
    /// Normalized config, `section.key` for section entries.
    pub config: BTreeMap<String, String>,
    pub metrics: serde_json::Value,
    pub checks: Vec<Check>,
    /// No failed check and at least one passed.
    pub pass: bool,
}

/// Columns of one `series/*.csv` file.
#[derive(Clone, Debug)]
pub struct Series {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    fn new(name: String, header: Vec<&'static str>, rows: Vec<Vec<f64>>) -> Self {
        Series { name, header, rows }
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| format!("{v:.12e}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Timings {
    pub total_seconds: f64,
    pub stages: Vec<(String, f64)>,
}

pub struct RunOutput {
    pub report: ExperimentReport,
    pub series: Vec<Series>,
    pub timings: Timings,
}

struct Stopwatch {
    start: Instant,
    lap: Instant,
    stages: Vec<(String, f64)>,
}

impl Stopwatch {
    fn new() -> Self {
        let now = Instant::now();
        Stopwatch { start: now, lap: now, stages: Vec::new() }
    }

    fn mark(&mut self, name: &str) {
        let now = Instant::now();
        self.stages.push((name.to_string(), (now - self.lap).as_secs_f64()));
        self.lap = now;
    }

    fn finish(self) -> Timings {
        Timings { total_seconds: self.start.elapsed().as_secs_f64(), stages: self.stages }
    }
}

fn echo(cfg: &ExperimentConfig) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut section = String::new();
    for line in cfg.to_text().lines() {
        let line = line.trim();
        if let Some(s) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = format!("{s}.");
        } else if let Some((k, v)) = line.split_once('=') {
            out.insert(format!("{section}{}", k.trim()), v.trim().to_string());
        }
    }
    out
}

fn eps_tag(eps: f64) -> String {
    let l = eps.log2();
    if l.fract() == 0.0 {
        format!("eps2^{}", l as i32)
    } else {
        format!("eps{eps}")
    }
}

fn fmt_tol(v: f64) -> String {
    format!("{v:.6e}")
}

struct Outcome {
    metrics: serde_json::Value,
    checks: Vec<Check>,
    series: Vec<Series>,
}

/// Runs one experiment; the report is a pure function of the config.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut sw = Stopwatch::new();
    let m = cfg.symbol.parse(cfg.d, cfg.order)?;
    sw.mark("parse");
    let out = match &cfg.params {
        KindParams::Approx(p) => {
            let s = ApproxSettings { n_x: cfg.n_x, k_max: cfg.k_max, band: p.band, nodes: p.nodes, q0: p.q0, dt_max: p.dt_max, seed: cfg.seed };
            let r = approximation_experiment(&m, &cfg.eps, p.big_t, &s)?;
            sw.mark("approximation");
            let mut checks = Vec::new();
            let mut series = Vec::new();
            for row in &r.rows {
                let l = row.eps.ln().abs();
                let bound = p.error_constant * row.eps * l.powi(row.q0 as i32 + 2);
                checks.push(Check::new(
                    format!("max_error[{}]", eps_tag(row.eps)),
                    row.max_error,
                    format!("<= {} (C·ε|ln ε|^(q0+2), C = {})", fmt_tol(bound), p.error_constant),
                    row.max_error <= bound,
                ));
                series.push(Series::new(
                    format!("approx_{}", eps_tag(row.eps)),
                    vec!["t", "error"],
                    row.times.iter().zip(&row.errors).map(|(t, e)| vec![*t, *e]).collect(),
                ));
            }
            if p.slope_min.is_some() || p.slope_max.is_some() {
                let lo = p.slope_min.unwrap_or(f64::NEG_INFINITY);
                let hi = p.slope_max.unwrap_or(f64::INFINITY);
                match r.slope {
                    Some(v) => checks.push(Check::new("error_slope", v, format!("in [{lo}, {hi}]"), v >= lo && v <= hi)),
                    None => checks.push(Check::skipped("error_slope", "needs two ε values with nonzero error".into())),
                }
            }
            Outcome { metrics: serde_json::to_value(&r)?, checks, series }
        }
        KindParams::Compose(p) => {
            let a2 = p.second.parse(cfg.d, cfg.order)?;
            let s = ProbeSettings { cutoff_factor: p.cutoff_factor, input_band: p.input_band, weyl_nx: p.weyl_nx };
            let reps =
                if p.weyl { weyl_remainders(&m, &a2, &p.orders, &cfg.eps, &s)? } else { semiclassical_remainders(&m, &a2, &p.orders, &cfg.eps, &s)? };
            sw.mark("remainders");
            let mut checks = Vec::new();
            let mut series = Vec::new();
            for r in &reps {
                let n = r.n as f64;
                let name = format!("remainder_n{}", r.n);
                if r.max_remainder < p.zero_tol {
                    checks.push(Check::new(name, r.max_remainder, format!("< {:e} (vanishing)", p.zero_tol), true));
                } else {
                    let (lo, hi) = (n + p.slope_low, n + p.slope_high);
                    match r.slope {
                        Some(v) => checks.push(Check::new(format!("{name}_slope"), v, format!("in [{lo}, {hi}]"), v >= lo && v <= hi)),
                        None => checks.push(Check::new(format!("{name}_slope"), r.max_remainder, format!("slope in [{lo}, {hi}]"), false)),
                    }
                }
                series.push(Series::new(
                    format!("compose_n{}", r.n),
                    vec!["eps", "remainder"],
                    r.rows.iter().map(|row| vec![row.eps, row.remainder]).collect(),
                ));
            }
            Outcome { metrics: serde_json::to_value(&reps)?, checks, series }
        }
        KindParams::BoundsUpper(p) => {
            let s = sweep_settings(cfg, p.samples, p.tol, p.enforce_guard, p.dense_cap, false);
            let r = upper_bound_experiment(&m, &cfg.eps, p.big_t, &s)?;
            sw.mark("upper");
            let gamma = r.rates.gamma_spec;
            let mut checks = Vec::new();
            let mut series = Vec::new();
            for row in &r.rows {
                let name = format!("upper_rate[{}]", eps_tag(row.eps));
                if row.skipped {
                    checks.push(Check::skipped(name, format!("ε-guard: lhs {:.3e} above threshold {:.3e}", row.guard.lhs, row.guard.threshold)));
                    continue;
                }
                let rate = row.rate.unwrap_or(f64::NAN);
                checks.push(Check::new(name, rate, format!("<= γ_spec + {} = {}", p.tol, fmt_tol(gamma + p.tol)), rate <= gamma + p.tol));
                series.push(Series::new(
                    format!("upper_{}", eps_tag(row.eps)),
                    vec!["t", "norm"],
                    row.times.iter().zip(&row.norms).map(|(t, v)| vec![*t, *v]).collect(),
                ));
            }
            Outcome { metrics: serde_json::to_value(&r)?, checks, series }
        }
        KindParams::BoundsLower(p) => {
            let s = sweep_settings(cfg, p.samples, p.tol, p.enforce_guard, p.dense_cap, p.smooth_ball);
            let r = lower_bound_experiment(&m, &cfg.eps, p.big_t, p.radius, &s)?;
            sw.mark("lower");
            let gamma = r.rates.gamma_spec;
            let mut checks = Vec::new();
            let mut series = Vec::new();
            for row in &r.rows {
                let name = format!("lower_rate[{}]", eps_tag(row.eps));
                if row.skipped {
                    checks.push(Check::skipped(name, format!("ε-guard: lhs {:.3e} above threshold {:.3e}", row.guard.lhs, row.guard.threshold)));
                    continue;
                }
                let rate = row.rate.unwrap_or(f64::NAN);
                checks.push(Check::new(name, rate, format!(">= γ_spec − {} = {}", p.tol, fmt_tol(gamma - p.tol)), rate >= gamma - p.tol));
                series.push(Series::new(
                    format!("lower_{}", eps_tag(row.eps)),
                    vec!["t", "local_norm"],
                    row.times.iter().zip(&row.local_norms).map(|(t, v)| vec![*t, *v]).collect(),
                ));
            }
            if let Some(c) = r.c_fit {
                checks.push(Check::new("prefactor_c", c, "> 0".into(), c > 0.0));
            }
            Outcome { metrics: serde_json::to_value(&r)?, checks, series }
        }
        KindParams::Instability(p) => {
            let b = QuadraticNonlinearity::new(m.n(), p.nonlinearity.clone())?;
            let g = GridSpec::new(m.d(), cfg.n_x, cfg.k_max, cfg.eps[0])?;
            let fit = fit_n_star(&m, &g, &p.nstar_eps, p.big_t, p.nstar_samples)?;
            sw.mark("n_star");
            let k1 = p.k1.unwrap_or_else(|| default_k1(fit.n_star, m.d()));
            // exponent guaranteed by the proof of the lower bound
            let k_prime_max = 2.0 * fit.n_star + 2.0 * m.d() as f64 + 1.0;
            let s = InstabilitySettings {
                n_x: cfg.n_x,
                k_max: cfg.k_max,
                radius: p.radius,
                nodes: p.nodes,
                rate_tol: p.rate_tol,
                saturation: p.saturation,
            };
            let r = instability_experiment(&m, &b, p.k, k1, &cfg.eps, &s)?;
            sw.mark("instability");
            let mut checks = Vec::new();
            let mut series = Vec::new();
            for row in &r.rows {
                let tag = eps_tag(row.eps);
                checks.push(Check::new(
                    format!("growth_rate_error[{tag}]"),
                    row.rate_error,
                    format!("<= {} (relative to γ_spec)", p.rate_tol),
                    row.rate_error <= p.rate_tol,
                ));
                checks.push(Check::new(format!("amplification[{tag}]"), row.amplification, "> 1".into(), row.amplification > 1.0));
                checks.push(Check::new(
                    format!("k_prime[{tag}]"),
                    row.k_prime,
                    format!("|u(T*)|_∞ >= |ln ε|^(-K') with K' <= 2N* + 2d + 1 = {k_prime_max}"),
                    row.k_prime <= k_prime_max,
                ));
                series.push(Series::new(
                    format!("instability_{tag}"),
                    vec!["t", "linf"],
                    row.times.iter().zip(&row.linf).map(|(t, v)| vec![*t, *v]).collect(),
                ));
            }
            let metrics = serde_json::json!({ "n_star_fit": fit, "k1": k1, "k_prime_max": k_prime_max, "report": r });
            Outcome { metrics, checks, series }
        }
        KindParams::Garding(p) => {
            let g = GridSpec::new(1, cfg.n_x, cfg.k_max, 0.5)?;
            let s = GardingSettings {
                c_d: p.c_d,
                tau_star: p.tau_star,
                normalize: p.normalize,
                samples: p.samples,
                seed: cfg.seed,
                dense_cap: p.dense_cap,
                margin_nodes: p.margin_nodes,
                tau_sweep: p.tau_sweep.clone(),
            };
            let r = garding_experiment(&m, p.theta, p.j_min, p.j_max, &g, &s)?;
            sw.mark("flow");
            let mut checks = Vec::new();
            let mut series = Vec::new();
            match r.j0 {
                Some(j0) => checks.push(Check::new("j0", j0 as f64, format!("<= {}", p.j0_max), j0 <= p.j0_max)),
                None => checks.push(Check::new("j0", f64::NAN, format!("<= {} (no passing tail)", p.j0_max), false)),
            }
            match r.form.dense_min {
                Some(v) => checks.push(Check::new("dense_form_min", v, format!(">= −{:e} at c = {:.6e}", FORM_TOL, r.c.c), v >= -FORM_TOL)),
                None => checks.push(Check::skipped("dense_form_min", format!("n_x above dense_cap {}", p.dense_cap))),
            }
            for b in &r.blocks {
                checks.push(Check::new(
                    format!("positivity_consistent[j{}]", b.j),
                    b.form_min,
                    format!("passing flow test implies block form >= −{:e}", FORM_TOL),
                    b.positivity_consistent,
                ));
                series.push(Series::new(
                    format!("garding_margins_j{}", b.j),
                    vec!["t", "margin"],
                    b.margins.iter().map(|(t, v)| vec![*t, *v]).collect(),
                ));
            }
            let mut growth = Vec::new();
            let mut gradient = Vec::new();
            if p.growth || p.gradient_levels > 0 {
                let blocks = dyadic_blocks_range(&m, p.theta, p.j_min, p.j_max, &g, &s)?;
                for blk in &blocks {
                    if p.growth {
                        let gr = corrector_growth_check(blk, p.theta, &s)?;
                        let worst = gr
                            .entries
                            .iter()
                            .filter(|e| e.alpha + e.beta == 0)
                            .filter_map(|e| e.exponent.map(|x| x - e.q as f64))
                            .fold(f64::NEG_INFINITY, f64::max);
                        checks.push(Check::new(
                            format!("corrector_growth[j{}]", blk.j),
                            worst,
                            format!("exponent of ⟨k⟩^q|S_q| <= q + {}", gr.slack),
                            gr.pass,
                        ));
                        growth.push(gr);
                    }
                    if p.gradient_levels > 0 {
                        let hs: Vec<f64> = (1..=p.gradient_levels).map(|i| blk.floor * 2f64.powf(i as f64 / 2.0)).collect();
                        let gb = gradient_bound_check(blk, &hs)?;
                        let worst = gb.rows.iter().filter(|r| r.points > 0).map(|r| r.max_gradient / r.bound).fold(0.0, f64::max);
                        checks.push(Check::new(
                            format!("gradient_bound[j{}]", blk.j),
                            worst,
                            "max |Da_j| / (4 h^(1/2)) <= 1 on {a_j < h}".into(),
                            gb.pass,
                        ));
                        gradient.push(gb);
                    }
                }
                sw.mark("correctors");
            }
            let metrics = serde_json::json!({ "flow": r, "growth": growth, "gradient": gradient });
            Outcome { metrics, checks, series }
        }
    };
    let pass = out.checks.iter().all(|c| c.status != Status::Fail) && out.checks.iter().any(|c| c.status == Status::Pass);
    let report =
        ExperimentReport { kind: cfg.kind.name().to_string(), seed: cfg.seed, config: echo(cfg), metrics: out.metrics, checks: out.checks, pass };
    Ok(RunOutput { report, series: out.series, timings: sw.finish() })
}

fn sweep_settings(cfg: &ExperimentConfig, samples: usize, tol: f64, enforce_guard: bool, dense_cap: usize, smooth_ball: bool) -> SweepSettings {
    SweepSettings { n_x: cfg.n_x, k_max: cfg.k_max, samples, enforce_guard, tol, dense_cap, smooth_ball }
}

/// Report JSON exactly as written to `report.json`.
pub fn report_json(r: &ExperimentReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(r)?;
    s.push('\n');
    Ok(s)
}

/// Writes `report.json`, `series/*.csv` and `timings.json` under `dir`.
pub fn write_outputs(out: &RunOutput, dir: &Path) -> Result<()> {
    let series_dir = dir.join("series");
    fs::create_dir_all(&series_dir)?;
    fs::write(dir.join("report.json"), report_json(&out.report)?)?;
    for s in &out.series {
        fs::write(series_dir.join(format!("{}.csv", s.name)), s.to_csv())?;
    }
    let mut t = serde_json::to_string_pretty(&out.timings)?;
    t.push('\n');
    fs::write(dir.join("timings.json"), t)?;
    Ok(())
}

/// Worker count from `PDFLOW_WORKERS`; `None` leaves the pool default.
pub fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var("PDFLOW_WORKERS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(vec![format!("PDFLOW_WORKERS = '{v}' is not a positive integer")])),
        },
    }
}

/// Runs `f` on a pool of `workers` threads, or the global pool for `None`.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| Error::Precondition(format!("worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}
