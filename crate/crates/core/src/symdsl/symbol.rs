use std::collections::HashMap;

use num_complex::Complex64 as C64;

use super::expr::{SymbolExpr, Var};
use super::grid::GridSpec;
use super::multi;
use super::parse::{parse_matrix, print_matrix};
use crate::error::{Error, Result};

/// Default cap on the total derivative order taken from a symbol.
pub const DEFAULT_DERIV_CAP: usize = 8;

/// Square matrix of expression trees in `(x, ξ)` over spatial dimension `d`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixSymbol {
    entries: Vec<SymbolExpr>,
    n: usize,
    d: usize,
    order: f64,
    cap: usize,
    taken: usize,
}

impl MatrixSymbol {
    /// Builds a symbol from rows, checking shape, dimension and periodicity.
    pub fn new(rows: Vec<Vec<SymbolExpr>>, d: usize, order: f64) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Shape("symbol must be a non-empty square matrix".into()));
        }
        if d == 0 {
            return Err(Error::Shape("dimension d must be at least 1".into()));
        }
        let entries: Vec<SymbolExpr> = rows.into_iter().flatten().collect();
        for e in &entries {
            if e.dimension_used() > d {
                return Err(Error::Shape(format!("entry {} uses variables beyond d = {}", e, d)));
            }
            e.check_periodic().map_err(Error::NonPeriodic)?;
        }
        Ok(MatrixSymbol { entries, n, d, order, cap: DEFAULT_DERIV_CAP, taken: 0 })
    }

    pub fn parse(src: &str, d: usize, order: f64) -> Result<Self> {
        Self::new(parse_matrix(src, Some(d))?, d, order)
    }

    pub fn scalar(e: SymbolExpr, d: usize, order: f64) -> Result<Self> {
        Self::new(vec![vec![e]], d, order)
    }

    pub fn identity(n: usize, d: usize) -> Self {
        Self::diagonal(n, d, SymbolExpr::one())
    }

    pub fn zeros(n: usize, d: usize) -> Self {
        Self::diagonal(n, d, SymbolExpr::zero())
    }

    fn diagonal(n: usize, d: usize, v: SymbolExpr) -> Self {
        let mut entries = vec![SymbolExpr::zero(); n * n];
        for i in 0..n {
            entries[i * n + i] = v.clone();
        }
        MatrixSymbol { entries, n, d, order: 0.0, cap: DEFAULT_DERIV_CAP, taken: 0 }
    }

    fn from_entries(&self, entries: Vec<SymbolExpr>) -> Self {
        MatrixSymbol { entries, ..self.clone() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn with_order(mut self, order: f64) -> Self {
        self.order = order;
        self
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    /// Total derivative order already applied to reach this symbol.
    pub fn taken(&self) -> usize {
        self.taken
    }

    pub fn entry(&self, i: usize, j: usize) -> &SymbolExpr {
        &self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[SymbolExpr] {
        &self.entries
    }

    pub fn rows(&self) -> Vec<Vec<SymbolExpr>> {
        self.entries.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    pub fn is_time_dependent(&self) -> bool {
        self.entries.iter().any(|e| e.uses_time())
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|e| e.is_zero())
    }

    pub fn depends_on_x(&self) -> bool {
        self.entries.iter().any(|e| e.depends_on_x())
    }

    pub fn depends_on_xi(&self) -> bool {
        self.entries.iter().any(|e| e.depends_on_xi())
    }

    pub fn to_text(&self) -> String {
        print_matrix(&self.rows())
    }

    /// Writes the row-major matrix value at `(x, ξ, t)` into `out`.
    pub fn eval_into(&self, x: &[f64], xi: &[f64], t: f64, out: &mut [C64]) {
        for (o, e) in out.iter_mut().zip(&self.entries) {
            *o = e.eval(x, xi, t);
        }
    }

    pub fn eval(&self, x: &[f64], xi: &[f64], t: f64) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.n * self.n];
        self.eval_into(x, xi, t, &mut out);
        out
    }

    /// Exact `∂_x^α ∂_ξ^β` of every entry.
    pub fn differentiate(&self, alpha: &[usize], beta: &[usize]) -> Result<Self> {
        if alpha.len() != self.d || beta.len() != self.d {
            return Err(Error::Shape(format!("multi-indices must have length d = {}", self.d)));
        }
        let requested = self.taken + multi::order(alpha) + multi::order(beta);
        if requested > self.cap {
            return Err(Error::OrderExceeded { requested, cap: self.cap });
        }
        let entries = self.entries.iter().map(|e| e.diff_multi(alpha, beta)).collect();
        Ok(MatrixSymbol { taken: requested, ..self.from_entries(entries) })
    }

    fn diff_var(&self, var: Var) -> Result<Self> {
        let requested = self.taken + 1;
        if requested > self.cap {
            return Err(Error::OrderExceeded { requested, cap: self.cap });
        }
        let entries = self.entries.iter().map(|e| e.diff(var)).collect();
        Ok(MatrixSymbol { taken: requested, ..self.from_entries(entries) })
    }

    /// Symbolic matrix product.
    pub fn matmul(&self, rhs: &MatrixSymbol) -> Result<Self> {
        self.check_compatible(rhs)?;
        let n = self.n;
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(SymbolExpr::sum((0..n).map(|l| self.entry(i, l).clone() * rhs.entry(l, j).clone())));
            }
        }
        Ok(MatrixSymbol { order: self.order + rhs.order, taken: self.taken.max(rhs.taken), ..self.from_entries(entries) })
    }

    pub fn add(&self, rhs: &MatrixSymbol) -> Result<Self> {
        self.check_compatible(rhs)?;
        let entries = self.entries.iter().zip(&rhs.entries).map(|(a, b)| a.clone() + b.clone()).collect();
        Ok(MatrixSymbol { order: self.order.max(rhs.order), taken: self.taken.max(rhs.taken), ..self.from_entries(entries) })
    }

    pub fn scale(&self, c: C64) -> Self {
        self.from_entries(self.entries.iter().map(|e| e.clone().scale(c)).collect())
    }

    /// Entrywise product with a scalar expression.
    pub fn mul_scalar(&self, e: &SymbolExpr) -> Self {
        self.from_entries(self.entries.iter().map(|a| a.clone() * e.clone()).collect())
    }

    fn check_compatible(&self, rhs: &MatrixSymbol) -> Result<()> {
        if self.n != rhs.n || self.d != rhs.d {
            return Err(Error::Shape(format!(
                "symbols of shape {}x{} (d={}) and {}x{} (d={}) are incompatible",
                self.n, self.n, self.d, rhs.n, rhs.n, rhs.d
            )));
        }
        Ok(())
    }

    /// All derivatives `∂_x^α ∂_ξ^β` with `|α|+|β| ≤ max_order`.
    pub fn derivative_table(&self, max_order: usize) -> Result<DerivativeTable> {
        let dim = 2 * self.d;
        let mut table: HashMap<Vec<usize>, MatrixSymbol> = HashMap::new();
        let indices = multi::multi_indices(dim, max_order);
        for g in &indices {
            if multi::order(g) == 0 {
                table.insert(g.clone(), self.clone());
                continue;
            }
            let slot = g.iter().rposition(|&v| v > 0).unwrap();
            let mut parent = g.clone();
            parent[slot] -= 1;
            let var = if slot < self.d { Var::X(slot) } else { Var::Xi(slot - self.d) };
            let next = table[&parent].diff_var(var)?;
            table.insert(g.clone(), next);
        }
        Ok(DerivativeTable { d: self.d, indices, table })
    }
}

/// Derivatives of a symbol keyed by the concatenated multi-index `(α, β)`.
#[derive(Clone, Debug)]
pub struct DerivativeTable {
    d: usize,
    indices: Vec<Vec<usize>>,
    table: HashMap<Vec<usize>, MatrixSymbol>,
}

impl DerivativeTable {
    pub fn get(&self, alpha: &[usize], beta: &[usize]) -> Option<&MatrixSymbol> {
        let mut key = alpha.to_vec();
        key.extend_from_slice(beta);
        self.table.get(&key)
    }

    pub fn get_joint(&self, gamma: &[usize]) -> Option<&MatrixSymbol> {
        self.table.get(gamma)
    }

    /// Joint multi-indices in graded order.
    pub fn indices(&self) -> &[Vec<usize>] {
        &self.indices
    }

    pub fn d(&self) -> usize {
        self.d
    }
}

/// Values of a symbol over `x-grid × frequency lattice`, stored with the
/// frequency index varying slowest.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledSymbol {
    pub grid: GridSpec,
    pub n: usize,
    pub order: f64,
    /// `true` when values are `s(x_j, εk)`, `false` for `s(x_j, k)`.
    pub scaled: bool,
    pub time: f64,
    values: Vec<C64>,
}

impl SampledSymbol {
    pub fn from_values(grid: GridSpec, n: usize, order: f64, scaled: bool, time: f64, values: Vec<C64>) -> Result<Self> {
        let want = grid.npts() * grid.nk() * n * n;
        if values.len() != want {
            return Err(Error::Shape(format!("expected {} values, got {}", want, values.len())));
        }
        if let Some(p) = values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite(format!("sampled value at flat index {}", p)));
        }
        Ok(SampledSymbol { grid, n, order, scaled, time, values })
    }

    fn offset(&self, jx: usize, kk: usize) -> usize {
        (kk * self.grid.npts() + jx) * self.n * self.n
    }

    /// Row-major `N×N` block at spatial index `jx`, mode index `kk`.
    pub fn at(&self, jx: usize, kk: usize) -> &[C64] {
        let o = self.offset(jx, kk);
        &self.values[o..o + self.n * self.n]
    }

    pub fn at_mut(&mut self, jx: usize, kk: usize) -> &mut [C64] {
        let o = self.offset(jx, kk);
        let nn = self.n * self.n;
        &mut self.values[o..o + nn]
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    /// Max entry modulus over the whole table.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Samples `s` at `t = 0`.
pub fn sample(s: &MatrixSymbol, g: &GridSpec, scale_freq: bool) -> SampledSymbol {
    sample_at(s, g, scale_freq, 0.0)
}

/// Samples `s(x_j, εk)` (or `s(x_j, k)`) at time `t`.
pub fn sample_at(s: &MatrixSymbol, g: &GridSpec, scale_freq: bool, t: f64) -> SampledSymbol {
    let nn = s.n * s.n;
    let npts = g.npts();
    let scale = if scale_freq { g.eps } else { 1.0 };
    let mut values = vec![C64::new(0.0, 0.0); npts * g.nk() * nn];
    let mut x = vec![0.0; g.d];
    let mut k = vec![0i64; g.d];
    let mut xi = vec![0.0; g.d];
    for kk in 0..g.nk() {
        g.k_at(kk, &mut k);
        for (a, v) in xi.iter_mut().zip(&k) {
            *a = scale * *v as f64;
        }
        for jx in 0..npts {
            g.x_at(jx, &mut x);
            let o = (kk * npts + jx) * nn;
            s.eval_into(&x, &xi, t, &mut values[o..o + nn]);
        }
    }
    SampledSymbol { grid: *g, n: s.n, order: s.order, scaled: scale_freq, time: t, values }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_bracket_scaled() {
        let s = MatrixSymbol::parse("bracket(-1)", 1, -1.0).unwrap();
        let g = GridSpec::new(1, 16, 6, 0.25).unwrap();
        let sm = sample(&s, &g, true);
        let kk = g.k_index(&[4]).unwrap();
        assert!((sm.at(3, kk)[0].re - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn cap_is_enforced_cumulatively() {
        let s = MatrixSymbol::parse("sin(x1)*bracket(-1)", 1, -1.0).unwrap();
        let d1 = s.differentiate(&[4], &[0]).unwrap();
        assert!(d1.differentiate(&[2], &[2]).is_ok());
        assert!(matches!(d1.differentiate(&[3], &[2]), Err(Error::OrderExceeded { requested: 9, cap: 8 })));
    }

    #[test]
    fn rejects_nonperiodic() {
        assert!(MatrixSymbol::parse("x1", 1, 0.0).is_err());
        assert!(MatrixSymbol::parse("[[1, x2], [0, 1]]", 1, 0.0).is_err());
    }

    #[test]
    fn table_matches_direct() {
        let s = MatrixSymbol::parse("[[exp(cos(x1))*bracket(-2), xi1], [sin(2*x1), 1]]", 1, 0.0).unwrap();
        let t = s.derivative_table(3).unwrap();
        let direct = s.differentiate(&[2], &[1]).unwrap();
        let x = [0.7];
        let xi = [1.3];
        let a = t.get(&[2], &[1]).unwrap().eval(&x, &xi, 0.0);
        let b = direct.eval(&x, &xi, 0.0);
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).norm() < 1e-13);
        }
    }
}
