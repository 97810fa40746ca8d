use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::symdsl::{parse_expr, MatrixSymbol};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Approx,
    Compose,
    BoundsUpper,
    BoundsLower,
    Instability,
    Garding,
}

impl Kind {
    pub const ALL: [Kind; 6] = [Kind::Approx, Kind::Compose, Kind::BoundsUpper, Kind::BoundsLower, Kind::Instability, Kind::Garding];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Approx => "approx",
            Kind::Compose => "compose",
            Kind::BoundsUpper => "bounds-upper",
            Kind::BoundsLower => "bounds-lower",
            Kind::Instability => "instability",
            Kind::Garding => "garding",
        }
    }

    pub fn from_name(s: &str) -> Option<Kind> {
        Kind::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Top-level keys besides the common ones.
    fn top_keys(self) -> &'static [&'static str] {
        match self {
            Kind::Approx => &["n_x", "k_max", "eps", "T", "q0"],
            Kind::Compose => &["eps"],
            Kind::BoundsUpper | Kind::BoundsLower => &["n_x", "k_max", "eps", "T"],
            Kind::Instability => &["n_x", "k_max", "eps", "T", "K", "K1"],
            Kind::Garding => &["n_x", "k_max", "theta"],
        }
    }
}

const COMMON_KEYS: [&str; 7] = ["kind", "symbol", "symbol_file", "d", "order", "output", "seed"];

/// Where a symbol came from, kept for the config echo.
#[derive(Clone, Debug, PartialEq)]
pub enum SymbolSource {
    Inline,
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymbolSpec {
    pub source: SymbolSource,
    pub text: String,
}

impl SymbolSpec {
    pub fn parse(&self, d: usize, order: f64) -> Result<MatrixSymbol> {
        MatrixSymbol::parse(&self.text, d, order)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ApproxParams {
    pub big_t: f64,
    pub q0: Option<usize>,
    pub band: f64,
    pub nodes: usize,
    pub dt_max: Option<f64>,
    /// Bound `C·ε|ln ε|^{q0+2}` on the largest error.
    pub error_constant: f64,
    pub slope_min: Option<f64>,
    pub slope_max: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComposeParams {
    pub second: SymbolSpec,
    pub orders: Vec<usize>,
    pub weyl: bool,
    pub cutoff_factor: f64,
    pub input_band: f64,
    pub weyl_nx: usize,
    /// Slope window `[n + low, n + high]`.
    pub slope_low: f64,
    pub slope_high: f64,
    /// Remainders below this count as vanishing.
    pub zero_tol: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundsParams {
    pub big_t: f64,
    pub samples: usize,
    pub tol: f64,
    pub enforce_guard: bool,
    pub dense_cap: usize,
    pub radius: f64,
    pub smooth_ball: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstabilityParams {
    pub big_t: f64,
    pub k: f64,
    /// `None` fits `N*` and uses `2N* + d + 1`.
    pub k1: Option<f64>,
    pub nonlinearity: Vec<C64>,
    pub radius: f64,
    pub nodes: usize,
    pub rate_tol: f64,
    pub saturation: f64,
    pub nstar_eps: Vec<f64>,
    pub nstar_samples: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GardingParams {
    pub theta: f64,
    pub j_min: usize,
    pub j_max: usize,
    pub c_d: usize,
    pub tau_star: f64,
    pub normalize: bool,
    pub samples: usize,
    pub dense_cap: usize,
    pub margin_nodes: usize,
    pub tau_sweep: Vec<f64>,
    pub j0_max: usize,
    pub growth: bool,
    pub gradient_levels: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum KindParams {
    Approx(ApproxParams),
    Compose(ComposeParams),
    BoundsUpper(BoundsParams),
    BoundsLower(BoundsParams),
    Instability(InstabilityParams),
    Garding(GardingParams),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub symbol: SymbolSpec,
    pub d: usize,
    pub order: f64,
    pub n_x: usize,
    pub k_max: usize,
    pub eps: Vec<f64>,
    pub output: PathBuf,
    pub seed: u64,
    pub params: KindParams,
}

struct Entry {
    line: usize,
    value: String,
    used: bool,
}

/// Key/value entries of one config file, consumed by typed getters that
/// collect every problem instead of stopping at the first.
struct Fields {
    top: BTreeMap<String, Entry>,
    sections: BTreeMap<String, (usize, BTreeMap<String, Entry>)>,
    errors: Vec<String>,
}

fn split_lines(text: &str) -> Fields {
    let mut f = Fields { top: BTreeMap::new(), sections: BTreeMap::new(), errors: Vec::new() };
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            match rest.strip_suffix(']') {
                Some(name) if !name.trim().is_empty() && !name.contains('[') => {
                    let name = name.trim().to_string();
                    if f.sections.contains_key(&name) {
                        f.errors.push(format!("line {line}: section [{name}] repeated"));
                    }
                    f.sections.entry(name.clone()).or_insert((line, BTreeMap::new()));
                    current = Some(name);
                }
                _ => f.errors.push(format!("line {line}: malformed section header")),
            }
            continue;
        }
        let Some((k, v)) = body.split_once('=') else {
            f.errors.push(format!("line {line}: expected 'key = value'"));
            continue;
        };
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if k.is_empty() {
            f.errors.push(format!("line {line}: empty key"));
            continue;
        }
        let map = match &current {
            Some(s) => &mut f.sections.get_mut(s).unwrap().1,
            None => &mut f.top,
        };
        if map.contains_key(&k) {
            f.errors.push(format!("line {line}: key '{k}' repeated"));
            continue;
        }
        map.insert(k, Entry { line, value: v, used: false });
    }
    f
}

fn parse_real(s: &str) -> Option<f64> {
    // `2^-5` style powers are accepted alongside plain decimals
    if let Some((b, e)) = s.split_once('^') {
        let (b, e) = (b.trim().parse::<f64>().ok()?, e.trim().parse::<i32>().ok()?);
        return Some(b.powi(e));
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" | "yes" | "on" => Some(true),
        "false" | "no" | "off" => Some(false),
        _ => None,
    }
}

fn list(s: &str) -> Vec<&str> {
    s.split(',').map(str::trim).filter(|p| !p.is_empty()).collect()
}

impl Fields {
    fn entry(&mut self, section: Option<&str>, key: &str) -> Option<(usize, String)> {
        let map = match section {
            Some(s) => &mut self.sections.get_mut(s)?.1,
            None => &mut self.top,
        };
        map.get_mut(key).map(|e| {
            e.used = true;
            (e.line, e.value.clone())
        })
    }

    fn typed<T>(&mut self, sec: Option<&str>, key: &str, what: &str, p: impl Fn(&str) -> Option<T>) -> Option<T> {
        let (line, v) = self.entry(sec, key)?;
        match p(&v) {
            Some(x) => Some(x),
            None => {
                self.errors.push(format!("line {line}: {key} = '{v}' is not {what}"));
                None
            }
        }
    }

    fn real(&mut self, sec: Option<&str>, key: &str) -> Option<f64> {
        self.typed(sec, key, "a number", parse_real)
    }

    fn positive(&mut self, sec: Option<&str>, key: &str, default: f64) -> f64 {
        self.typed(sec, key, "a positive number", |s| parse_real(s).filter(|v| *v > 0.0)).unwrap_or(default)
    }

    fn count(&mut self, sec: Option<&str>, key: &str, default: usize) -> usize {
        self.typed(sec, key, "a nonnegative integer", |s| s.parse::<usize>().ok()).unwrap_or(default)
    }

    fn flag(&mut self, sec: Option<&str>, key: &str, default: bool) -> bool {
        self.typed(sec, key, "true or false", parse_bool).unwrap_or(default)
    }

    fn reals(&mut self, sec: Option<&str>, key: &str) -> Option<Vec<f64>> {
        self.typed(sec, key, "a comma-separated list of numbers", |s| {
            let v: Option<Vec<f64>> = list(s).into_iter().map(parse_real).collect();
            v.filter(|v| !v.is_empty())
        })
    }

    fn counts(&mut self, sec: Option<&str>, key: &str) -> Option<Vec<usize>> {
        self.typed(sec, key, "a comma-separated list of integers", |s| {
            let v: Option<Vec<usize>> = list(s).into_iter().map(|p| p.parse().ok()).collect();
            v.filter(|v| !v.is_empty())
        })
    }

    fn complexes(&mut self, sec: Option<&str>, key: &str) -> Option<Vec<C64>> {
        self.typed(sec, key, "a comma-separated list of constants", |s| {
            list(s).into_iter().map(|p| parse_expr(p).ok().and_then(|e| e.as_const())).collect()
        })
    }

    fn symbol(&mut self, sec: Option<&str>, inline: &str, file: &str, base: &Path) -> Option<SymbolSpec> {
        let a = self.entry(sec, inline);
        let b = self.entry(sec, file);
        match (a, b) {
            (Some(_), Some((line, _))) => {
                self.errors.push(format!("line {line}: give either {inline} or {file}, not both"));
                None
            }
            (Some((_, text)), None) => Some(SymbolSpec { source: SymbolSource::Inline, text }),
            (None, Some((line, path))) => {
                let p = PathBuf::from(&path);
                let full = if p.is_absolute() { p.clone() } else { base.join(&p) };
                match std::fs::read_to_string(&full) {
                    Ok(t) => Some(SymbolSpec { source: SymbolSource::File(p), text: t.trim().to_string() }),
                    Err(e) => {
                        self.errors.push(format!("line {line}: cannot read {file} '{}': {e}", full.display()));
                        None
                    }
                }
            }
            (None, None) => {
                self.errors.push(format!("{inline} missing (give {inline} or {file})"));
                None
            }
        }
    }

    fn leftovers(&mut self, kind: Kind) {
        let allowed: Vec<&str> = COMMON_KEYS.iter().chain(kind.top_keys()).copied().collect();
        for (k, e) in &self.top {
            if e.used {
                continue;
            }
            if allowed.contains(&k.as_str()) {
                continue;
            }
            let owner = Kind::ALL.into_iter().find(|o| o.top_keys().contains(&k.as_str()));
            match owner {
                Some(_) => self.errors.push(format!("line {}: key '{k}' does not apply to kind {}", e.line, kind.name())),
                None => self.errors.push(format!("line {}: unknown key '{k}'", e.line)),
            }
        }
        for (name, (line, map)) in &self.sections {
            if name != kind.name() {
                self.errors.push(format!("line {line}: section [{name}] does not match kind {}", kind.name()));
                continue;
            }
            for (k, e) in map {
                if !e.used {
                    self.errors.push(format!("line {}: unknown key '{k}' in [{name}]", e.line));
                }
            }
        }
    }
}

/// Parses and checks a config; `base` resolves relative `symbol_file` paths.
pub fn validate(text: &str, base: &Path) -> Result<ExperimentConfig> {
    let mut f = split_lines(text);
    let kind = match f.entry(None, "kind") {
        None => {
            f.errors.insert(0, "kind missing".into());
            return Err(Error::Config(f.errors));
        }
        Some((line, v)) => match Kind::from_name(&v) {
            Some(k) => k,
            None => {
                let names: Vec<&str> = Kind::ALL.iter().map(|k| k.name()).collect();
                f.errors.push(format!("line {line}: unknown kind '{v}' (expected one of {})", names.join(", ")));
                return Err(Error::Config(f.errors));
            }
        },
    };
    let sec = Some(kind.name());
    let symbol = f.symbol(None, "symbol", "symbol_file", base);
    let d = f.count(None, "d", 1).max(1);
    let order = f.real(None, "order").unwrap_or(0.0);
    let seed = f.typed(None, "seed", "a nonnegative integer", |s| s.parse::<u64>().ok()).unwrap_or(7);
    let output = f.entry(None, "output").map(|(_, v)| PathBuf::from(v)).unwrap_or_else(|| PathBuf::from("out").join(kind.name()));
    let n_x = f.count(None, "n_x", 256);
    let k_max = f.count(None, "k_max", n_x.saturating_sub(2) / 2);
    let needs_eps = kind != Kind::Garding;
    let eps = if needs_eps {
        match f.reals(None, "eps") {
            Some(v) => {
                if v.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
                    f.errors.push("eps: every value must lie in (0, 1)".into());
                }
                v
            }
            None => {
                if f.top.get("eps").is_none() {
                    f.errors.push(format!("eps missing (required for kind {})", kind.name()));
                }
                vec![]
            }
        }
    } else {
        vec![]
    };
    let big_t = f.positive(None, "T", 1.0);
    let params = match kind {
        Kind::Approx => KindParams::Approx(ApproxParams {
            big_t,
            q0: f.typed(None, "q0", "a nonnegative integer", |s| s.parse::<usize>().ok()),
            band: f.positive(sec, "band", 0.5),
            nodes: f.count(sec, "nodes", 8).max(1),
            dt_max: f.typed(sec, "dt_max", "a positive number", |s| parse_real(s).filter(|v| *v > 0.0)),
            error_constant: f.positive(sec, "error_constant", 1.0),
            slope_min: f.real(sec, "slope_min"),
            slope_max: f.real(sec, "slope_max"),
        }),
        Kind::Compose => {
            let second = f.symbol(sec, "symbol2", "symbol2_file", base);
            let quant = f.entry(sec, "quantization").map(|(l, v)| (l, v.to_string()));
            let weyl = match quant.as_ref().map(|(l, v)| (*l, v.as_str())) {
                None | Some((_, "semiclassical")) => false,
                Some((_, "weyl")) => true,
                Some((l, v)) => {
                    f.errors.push(format!("line {l}: quantization = '{v}' is not semiclassical or weyl"));
                    false
                }
            };
            KindParams::Compose(ComposeParams {
                second: second.unwrap_or(SymbolSpec { source: SymbolSource::Inline, text: String::new() }),
                orders: f.counts(sec, "n").unwrap_or_else(|| vec![0, 1, 2]),
                weyl,
                cutoff_factor: f.positive(sec, "cutoff_factor", 4.0),
                input_band: f.positive(sec, "input_band", 0.5),
                weyl_nx: f.count(sec, "weyl_nx", 256),
                slope_low: f.real(sec, "slope_low").unwrap_or(0.8),
                slope_high: f.real(sec, "slope_high").unwrap_or(1.3),
                zero_tol: f.positive(sec, "zero_tol", 1e-10),
            })
        }
        Kind::BoundsUpper | Kind::BoundsLower => {
            let p = BoundsParams {
                big_t,
                samples: f.count(sec, "samples", 8).max(2),
                tol: f.positive(sec, "tol", 0.1),
                enforce_guard: f.flag(sec, "enforce_guard", true),
                dense_cap: f.count(sec, "dense_cap", 4096),
                radius: if kind == Kind::BoundsLower { f.positive(sec, "radius", 0.5) } else { 0.5 },
                smooth_ball: if kind == Kind::BoundsLower { f.flag(sec, "smooth_ball", false) } else { false },
            };
            if kind == Kind::BoundsUpper {
                KindParams::BoundsUpper(p)
            } else {
                KindParams::BoundsLower(p)
            }
        }
        Kind::Instability => {
            let nonlinearity = f.complexes(sec, "nonlinearity");
            if nonlinearity.is_none() && f.sections.get(kind.name()).is_none_or(|s| !s.1.contains_key("nonlinearity")) {
                f.errors.push("nonlinearity missing (required for kind instability)".into());
            }
            KindParams::Instability(InstabilityParams {
                big_t,
                k: f.positive(None, "K", 2.0),
                k1: f.real(None, "K1"),
                nonlinearity: nonlinearity.unwrap_or_default(),
                radius: f.positive(sec, "radius", 0.5),
                nodes: f.count(sec, "nodes", 48).max(2),
                rate_tol: f.positive(sec, "rate_tol", 0.1),
                saturation: f.positive(sec, "saturation", 0.1),
                nstar_eps: f.reals(sec, "nstar_eps").unwrap_or_else(|| vec![2f64.powi(-5), 2f64.powi(-6)]),
                nstar_samples: f.count(sec, "nstar_samples", 4).max(1),
            })
        }
        Kind::Garding => {
            let theta = match f.real(None, "theta") {
                Some(t) if t > 0.0 && t < 1.0 => t,
                Some(t) => {
                    let line = f.top["theta"].line;
                    f.errors.push(format!(
                        "line {line}: theta = {t} is outside (0, 1); the endpoint θ = 1 is excluded (the gain of θ derivatives needs θ < 1)"
                    ));
                    t
                }
                None => 0.5,
            };
            let defaults = crate::garding::GardingSettings::default();
            KindParams::Garding(GardingParams {
                theta,
                j_min: f.count(sec, "j_min", 3),
                j_max: f.count(sec, "j_max", 7),
                c_d: f.count(sec, "c_d", defaults.c_d),
                tau_star: f.positive(sec, "tau_star", defaults.tau_star),
                normalize: f.flag(sec, "normalize", defaults.normalize),
                samples: f.count(sec, "samples", defaults.samples).max(1),
                dense_cap: f.count(sec, "dense_cap", defaults.dense_cap),
                margin_nodes: f.count(sec, "margin_nodes", defaults.margin_nodes).max(1),
                tau_sweep: f.reals(sec, "tau_sweep").unwrap_or(defaults.tau_sweep),
                j0_max: f.count(sec, "j0_max", 5),
                growth: f.flag(sec, "growth", true),
                gradient_levels: f.count(sec, "gradient_levels", 8),
            })
        }
    };
    f.leftovers(kind);
    let cfg = ExperimentConfig {
        kind,
        symbol: symbol.unwrap_or(SymbolSpec { source: SymbolSource::Inline, text: String::new() }),
        d,
        order,
        n_x,
        k_max,
        eps,
        output,
        seed,
        params,
    };
    if f.errors.is_empty() {
        f.errors.extend(cfg.semantic_errors());
    }
    if f.errors.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Config(f.errors))
    }
}

fn fmt_real(v: f64) -> String {
    // exact powers of two print as 2^-k so echoes stay readable
    if v > 0.0 && v < 1.0 {
        let l = v.log2();
        if l.fract() == 0.0 && 2f64.powi(l as i32) == v {
            return format!("2^{}", l as i32);
        }
    }
    format!("{v}")
}

fn fmt_reals(v: &[f64]) -> String {
    v.iter().map(|x| fmt_real(*x)).collect::<Vec<_>>().join(", ")
}

impl ExperimentConfig {
    fn semantic_errors(&self) -> Vec<String> {
        let mut errs = Vec::new();
        match self.symbol.parse(self.d, self.order) {
            Ok(m) => {
                if let KindParams::Instability(p) = &self.params {
                    let n = m.n();
                    if p.nonlinearity.len() != n * n * n {
                        errs.push(format!("nonlinearity: a {n}x{n} symbol needs {} coefficients, got {}", n * n * n, p.nonlinearity.len()));
                    }
                }
            }
            Err(e) => errs.push(format!("symbol: {e}")),
        }
        if let KindParams::Compose(p) = &self.params {
            if let Err(e) = p.second.parse(self.d, self.order) {
                errs.push(format!("symbol2: {e}"));
            }
            if self.eps.len() < 3 {
                errs.push(format!("eps: compose needs at least 3 values for a slope, got {}", self.eps.len()));
            }
        }
        if self.kind != Kind::Compose && self.k_max * 2 + 1 > self.n_x {
            errs.push(format!("k_max = {} needs n_x ≥ {}", self.k_max, 2 * self.k_max + 1));
        }
        if let KindParams::Garding(p) = &self.params {
            if p.j_min > p.j_max {
                errs.push(format!("j_min = {} exceeds j_max = {}", p.j_min, p.j_max));
            }
            if self.d != 1 {
                errs.push("garding runs in dimension d = 1 only".into());
            }
        }
        errs
    }

    /// The config with every default filled in, in canonical order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let w = &mut s;
        let _ = writeln!(w, "kind = {}", self.kind.name());
        match &self.symbol.source {
            SymbolSource::Inline => {
                let _ = writeln!(w, "symbol = {}", self.symbol.text);
            }
            SymbolSource::File(p) => {
                let _ = writeln!(w, "symbol_file = {}", p.display());
            }
        }
        let _ = writeln!(w, "d = {}", self.d);
        let _ = writeln!(w, "order = {}", self.order);
        if self.kind != Kind::Compose {
            let _ = writeln!(w, "n_x = {}", self.n_x);
            let _ = writeln!(w, "k_max = {}", self.k_max);
        }
        if !self.eps.is_empty() {
            let _ = writeln!(w, "eps = {}", fmt_reals(&self.eps));
        }
        match &self.params {
            KindParams::Approx(p) => {
                let _ = writeln!(w, "T = {}", p.big_t);
                if let Some(q) = p.q0 {
                    let _ = writeln!(w, "q0 = {q}");
                }
            }
            KindParams::BoundsUpper(p) | KindParams::BoundsLower(p) => {
                let _ = writeln!(w, "T = {}", p.big_t);
            }
            KindParams::Instability(p) => {
                let _ = writeln!(w, "T = {}", p.big_t);
                let _ = writeln!(w, "K = {}", p.k);
                if let Some(k1) = p.k1 {
                    let _ = writeln!(w, "K1 = {k1}");
                }
            }
            KindParams::Garding(p) => {
                let _ = writeln!(w, "theta = {}", p.theta);
            }
            KindParams::Compose(_) => {}
        }
        let _ = writeln!(w, "output = {}", self.output.display());
        let _ = writeln!(w, "seed = {}", self.seed);
        let _ = writeln!(w, "\n[{}]", self.kind.name());
        match &self.params {
            KindParams::Approx(p) => {
                let _ = writeln!(w, "band = {}", p.band);
                let _ = writeln!(w, "nodes = {}", p.nodes);
                if let Some(dt) = p.dt_max {
                    let _ = writeln!(w, "dt_max = {dt}");
                }
                let _ = writeln!(w, "error_constant = {}", p.error_constant);
                if let Some(v) = p.slope_min {
                    let _ = writeln!(w, "slope_min = {v}");
                }
                if let Some(v) = p.slope_max {
                    let _ = writeln!(w, "slope_max = {v}");
                }
            }
            KindParams::Compose(p) => {
                match &p.second.source {
                    SymbolSource::Inline => {
                        let _ = writeln!(w, "symbol2 = {}", p.second.text);
                    }
                    SymbolSource::File(f) => {
                        let _ = writeln!(w, "symbol2_file = {}", f.display());
                    }
                }
                let orders: Vec<String> = p.orders.iter().map(|n| n.to_string()).collect();
                let _ = writeln!(w, "n = {}", orders.join(", "));
                let _ = writeln!(w, "quantization = {}", if p.weyl { "weyl" } else { "semiclassical" });
                let _ = writeln!(w, "cutoff_factor = {}", p.cutoff_factor);
                let _ = writeln!(w, "input_band = {}", p.input_band);
                let _ = writeln!(w, "weyl_nx = {}", p.weyl_nx);
                let _ = writeln!(w, "slope_low = {}", p.slope_low);
                let _ = writeln!(w, "slope_high = {}", p.slope_high);
                let _ = writeln!(w, "zero_tol = {:e}", p.zero_tol);
            }
            KindParams::BoundsUpper(p) | KindParams::BoundsLower(p) => {
                let _ = writeln!(w, "samples = {}", p.samples);
                let _ = writeln!(w, "tol = {}", p.tol);
                let _ = writeln!(w, "enforce_guard = {}", p.enforce_guard);
                let _ = writeln!(w, "dense_cap = {}", p.dense_cap);
                if self.kind == Kind::BoundsLower {
                    let _ = writeln!(w, "radius = {}", p.radius);
                    let _ = writeln!(w, "smooth_ball = {}", p.smooth_ball);
                }
            }
            KindParams::Instability(p) => {
                let coef: Vec<String> = p.nonlinearity.iter().map(fmt_complex).collect();
                let _ = writeln!(w, "nonlinearity = {}", coef.join(", "));
                let _ = writeln!(w, "radius = {}", p.radius);
                let _ = writeln!(w, "nodes = {}", p.nodes);
                let _ = writeln!(w, "rate_tol = {}", p.rate_tol);
                let _ = writeln!(w, "saturation = {}", p.saturation);
                let _ = writeln!(w, "nstar_eps = {}", fmt_reals(&p.nstar_eps));
                let _ = writeln!(w, "nstar_samples = {}", p.nstar_samples);
            }
            KindParams::Garding(p) => {
                let _ = writeln!(w, "j_min = {}", p.j_min);
                let _ = writeln!(w, "j_max = {}", p.j_max);
                let _ = writeln!(w, "c_d = {}", p.c_d);
                let _ = writeln!(w, "tau_star = {}", p.tau_star);
                let _ = writeln!(w, "normalize = {}", p.normalize);
                let _ = writeln!(w, "samples = {}", p.samples);
                let _ = writeln!(w, "dense_cap = {}", p.dense_cap);
                let _ = writeln!(w, "margin_nodes = {}", p.margin_nodes);
                let _ = writeln!(w, "tau_sweep = {}", fmt_reals(&p.tau_sweep));
                let _ = writeln!(w, "j0_max = {}", p.j0_max);
                let _ = writeln!(w, "growth = {}", p.growth);
                let _ = writeln!(w, "gradient_levels = {}", p.gradient_levels);
            }
        }
        s
    }
}

fn fmt_complex(c: &C64) -> String {
    match (c.re, c.im) {
        (re, im) if im == 0.0 => format!("{re}"),
        (re, im) if re == 0.0 => format!("{im}*i"),
        (re, im) => format!("{re} + {im}*i"),
    }
}
