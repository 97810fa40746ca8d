//! End-to-end acceptance gate: one PASS/FAIL line per criterion.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use pdflow::bounds::gamma_sup;
use pdflow::cli::{self, run, validate, write_outputs, RunOutput, Status};
use pdflow::symdsl::{GridSpec, MatrixSymbol};

const XI_ONLY: &str = "kind = approx
symbol = [[0.2*xi1*bracket(-1), 0.4], [0.3*bracket(-1), -0.1]]
n_x = 256
eps = 2^-5
T = 1
";

const SUITES: [&str; 8] =
    ["props_symdsl", "props_quantize", "props_calculus", "props_corrector", "props_flow", "props_bounds", "props_garding", "props_cli"];

struct Gate {
    lines: Vec<String>,
    failed: usize,
}

impl Gate {
    fn report(&mut self, id: usize, title: &str, ok: bool, took: Duration, budget: Duration, notes: &[String]) {
        let in_time = took <= budget;
        let pass = ok && in_time;
        let line = format!(
            "{} {id}. {title} ({:.1} s, budget {} s{})",
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            budget.as_secs(),
            if in_time { "" } else { ", over budget" }
        );
        println!("{line}");
        for n in notes {
            println!("       {n}");
        }
        if !pass {
            self.failed += 1;
        }
        self.lines.push(line);
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn run_text(text: &str) -> Result<RunOutput, String> {
    let cfg = validate(text, Path::new(".")).map_err(|e| e.to_string())?;
    run(&cfg).map_err(|e| e.to_string())
}

fn run_example(name: &str) -> Result<RunOutput, String> {
    run_text(cli::example(name).ok_or_else(|| format!("no example {name}"))?)
}

/// Value of the unique check called `name`, if it ran.
fn check_value(out: &RunOutput, name: &str) -> Option<f64> {
    out.report.checks.iter().find(|c| c.name == name && c.status != Status::Skipped).and_then(|c| c.value)
}

fn checks_with_prefix<'a>(out: &'a RunOutput, prefix: &str) -> Vec<&'a cli::Check> {
    out.report.checks.iter().filter(|c| c.name.starts_with(prefix)).collect()
}

fn all_pass(out: &RunOutput, prefix: &str, notes: &mut Vec<String>) -> bool {
    let cs = checks_with_prefix(out, prefix);
    for c in &cs {
        notes.push(format!("{} = {:?} [{}] {:?}", c.name, c.value, c.tolerance, c.status));
    }
    !cs.is_empty() && cs.iter().all(|c| c.status == Status::Pass)
}

fn max_errors(out: &RunOutput) -> Vec<f64> {
    out.report.metrics["rows"].as_array().map(|rows| rows.iter().filter_map(|r| r["max_error"].as_f64()).collect()).unwrap_or_default()
}

fn exact_flow(gate: &mut Gate) {
    let mut notes = Vec::new();
    let ((x, xi), took) = timed(|| (run_example("approx-x-only"), run_text(XI_ONLY)));
    let mut ok = true;
    for (label, r) in [("x-only", x), ("xi-only", xi)] {
        match r {
            Ok(out) => {
                let errs = max_errors(&out);
                let worst = errs.iter().cloned().fold(0.0, f64::max);
                notes.push(format!("{label}: max error {worst:.3e} <= 1e-7"));
                ok &= !errs.is_empty() && worst <= 1e-7;
            }
            Err(e) => {
                notes.push(format!("{label}: {e}"));
                ok = false;
            }
        }
    }
    gate.report(1, "exact flow for x-only and xi-only symbols", ok, took, Duration::from_secs(60), &notes);
}

fn approximation_order(gate: &mut Gate) {
    let (r, took) = timed(|| run_example("approx-generic"));
    let mut notes = Vec::new();
    let ok = match r {
        Ok(out) => {
            let slope = out.report.metrics["slope"].as_f64();
            notes.push(format!("slope {slope:?} in [0.7, 1.3]"));
            for (i, e) in max_errors(&out).iter().enumerate() {
                notes.push(format!("row {i}: max error {e:.4e}"));
            }
            slope.is_some_and(|s| (0.7..=1.3).contains(&s))
        }
        Err(e) => {
            notes.push(e);
            false
        }
    };
    gate.report(2, "approximation order of the corrector expansion", ok, took, Duration::from_secs(600), &notes);
}

fn composition_order(gate: &mut Gate) {
    let (r, took) = timed(|| run_example("compose-generic"));
    let mut notes = Vec::new();
    let ok = match r {
        Ok(out) => (0..=2).all(|n| {
            let v = check_value(&out, &format!("remainder_n{n}_slope"));
            let (lo, hi) = (n as f64 + 0.8, n as f64 + 1.3);
            notes.push(format!("n = {n}: slope {v:?} in [{lo}, {hi}]"));
            v.is_some_and(|s| s >= lo && s <= hi)
        }),
        Err(e) => {
            notes.push(e);
            false
        }
    };
    gate.report(3, "composition remainder order", ok, took, Duration::from_secs(300), &notes);
}

fn bracketing(gate: &mut Gate) {
    let (r, took) = timed(|| (run_example("bounds-upper"), run_example("bounds-lower")));
    let mut notes = Vec::new();
    let mut ok = true;
    match r {
        (Ok(up), Ok(lo)) => {
            for (out, side) in [(&up, "upper"), (&lo, "lower")] {
                let gamma = out.report.metrics["rates"]["gamma_spec"].as_f64().unwrap_or(f64::NAN);
                for e in [-5, -6] {
                    let v = check_value(out, &format!("{side}_rate[eps2^{e}]"));
                    let good = match side {
                        "upper" => v.is_some_and(|v| v <= gamma + 0.1),
                        _ => v.is_some_and(|v| v >= gamma - 0.1),
                    };
                    notes.push(format!("{side} rate at 2^{e}: {v:?} against γ_spec = {gamma:.6}"));
                    ok &= good;
                }
            }
        }
        (a, b) => {
            for e in [a.err(), b.err()].into_iter().flatten() {
                notes.push(e);
            }
            ok = false;
        }
    }
    let g = GridSpec::new(1, 16, 7, 0.25).unwrap();
    for src in ["[[0, 4], [1, 0]]", "[[1, 1], [0, 1]]"] {
        let r = gamma_sup(&MatrixSymbol::parse(src, 1, 0.0).unwrap(), &g);
        let gap = r.gamma_garding - r.gamma_spec;
        notes.push(format!("{src}: γ_garding − γ_spec = {gap:.12}"));
        ok &= (gap - 0.5).abs() < 1e-10;
    }
    gate.report(4, "sharp semigroup bracketing", ok, took, Duration::from_secs(600), &notes);
}

fn instability(gate: &mut Gate) {
    let (r, took) = timed(|| run_example("instability"));
    let mut notes = Vec::new();
    let ok = match r {
        Ok(out) => {
            let err = check_value(&out, "growth_rate_error[eps2^-6]");
            let kp = check_value(&out, "k_prime[eps2^-6]");
            let kp_max = out.report.metrics["k_prime_max"].as_f64();
            notes.push(format!("relative rate error {err:?} <= 0.1"));
            notes.push(format!("K' = {kp:?}, allowed up to {kp_max:?}"));
            err.is_some_and(|e| e <= 0.1) && all_pass(&out, "k_prime", &mut notes) && all_pass(&out, "amplification", &mut notes)
        }
        Err(e) => {
            notes.push(e);
            false
        }
    };
    gate.report(5, "semilinear instability", ok, took, Duration::from_secs(600), &notes);
}

fn garding(gate: &mut Gate) {
    let (r, took) = timed(|| run_example("garding"));
    match r {
        Ok(out) => {
            let mut notes = Vec::new();
            let j0 = check_value(&out, "j0");
            let dense = check_value(&out, "dense_form_min");
            notes.push(format!("j0 = {j0:?} <= 5"));
            notes.push(format!("dense form minimum {dense:?} >= -1e-8"));
            let ok = j0.is_some_and(|j| j <= 5.0) && dense.is_some_and(|v| v >= -1e-8) && all_pass(&out, "positivity_consistent", &mut notes);
            gate.report(6, "positivity via backward flows", ok, took, Duration::from_secs(600), &notes);

            let mut notes = Vec::new();
            let growth = all_pass(&out, "corrector_growth", &mut notes);
            let slack = checks_with_prefix(&out, "corrector_growth").iter().all(|c| c.tolerance.ends_with("q + 0.2"));
            let gradient = all_pass(&out, "gradient_bound", &mut notes);
            let stage = out.timings.stages.iter().find(|(n, _)| n == "correctors").map_or(took, |(_, s)| Duration::from_secs_f64(*s));
            gate.report(7, "corrector growth and gradient bound", growth && slack && gradient, stage, Duration::from_secs(300), &notes);
        }
        Err(e) => {
            for id in [6, 7] {
                gate.report(id, "garding experiment", false, took, Duration::from_secs(600), std::slice::from_ref(&e));
            }
        }
    }
}

/// Newest sibling test executable called `name-<hash>`.
fn sibling(name: &str) -> Option<PathBuf> {
    let dir = std::env::current_exe().ok()?.parent()?.to_path_buf();
    fs::read_dir(dir)
        .ok()?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            let f = p.file_name().and_then(|f| f.to_str()).unwrap_or("");
            f.strip_prefix(name).and_then(|r| r.strip_prefix('-')).is_some_and(|h| !h.is_empty() && h.chars().all(|c| c.is_ascii_hexdigit()))
        })
        .max_by_key(|p| fs::metadata(p).and_then(|m| m.modified()).ok())
}

fn same_outputs(a: &Path, b: &Path) -> Result<bool, String> {
    let read = |p: PathBuf| fs::read(&p).map_err(|e| format!("{}: {e}", p.display()));
    if read(a.join("report.json"))? != read(b.join("report.json"))? {
        return Ok(false);
    }
    let mut names: Vec<PathBuf> =
        fs::read_dir(a.join("series")).map_err(|e| e.to_string())?.filter_map(|e| e.ok()).map(|e| e.file_name().into()).collect();
    names.sort();
    for n in names {
        if read(a.join("series").join(&n))? != read(b.join("series").join(&n))? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn invariants(gate: &mut Gate) {
    let mut notes = Vec::new();
    let (ok, took) = timed(|| {
        let mut ok = true;
        for s in SUITES {
            match sibling(s) {
                Some(bin) => {
                    let out = Command::new(&bin).args(["--test-threads", "1", "-q"]).output();
                    let passed = out.as_ref().is_ok_and(|o| o.status.success());
                    notes.push(format!("{s}: {}", if passed { "green" } else { "red" }));
                    ok &= passed;
                }
                None => {
                    notes.push(format!("{s}: test executable not found next to {:?}", std::env::current_exe().ok()));
                    ok = false;
                }
            }
        }
        for name in ["compose-xi-only", "bounds-upper-constant"] {
            let dirs = ["a", "b"].map(|d| std::env::temp_dir().join(format!("pdflow-acceptance-{}-{name}-{d}", std::process::id())));
            let mut runs = Vec::new();
            for d in &dirs {
                runs.push(run_example(name).and_then(|o| write_outputs(&o, d).map_err(|e| e.to_string())));
            }
            let same = runs.iter().all(|r| r.is_ok()) && same_outputs(&dirs[0], &dirs[1]).unwrap_or(false);
            notes.push(format!("{name}: outputs byte-identical across runs: {same}"));
            ok &= same;
            for d in &dirs {
                let _ = fs::remove_dir_all(d);
            }
        }
        ok
    });
    gate.report(8, "invariant suites and deterministic reports", ok, took, Duration::from_secs(600), &notes);
}

fn main() -> ExitCode {
    let mut gate = Gate { lines: Vec::new(), failed: 0 };
    exact_flow(&mut gate);
    approximation_order(&mut gate);
    composition_order(&mut gate);
    bracketing(&mut gate);
    instability(&mut gate);
    garding(&mut gate);
    invariants(&mut gate);
    println!();
    for l in &gate.lines {
        println!("{l}");
    }
    if gate.failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{} criteria failed", gate.failed);
        ExitCode::FAILURE
    }
}
