//! Immutable expression trees for symbols in `(x, ξ)` with exact differentiation.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;

/// Node kinds of a symbol expression.
#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Const(C64),
    /// Spatial variable `x_{i+1}`.
    X(usize),
    /// Frequency variable `ξ_{i+1}`.
    Xi(usize),
    /// External time parameter.
    Time,
    Sum(Vec<SymbolExpr>),
    Product(Vec<SymbolExpr>),
    Pow(SymbolExpr, i32),
    Sin(SymbolExpr),
    Cos(SymbolExpr),
    Exp(SymbolExpr),
    /// `⟨ξ⟩^s = (1 + |ξ|²)^{s/2}`.
    Bracket(f64),
    /// `∂_{ξ1}^n φ_j(|ξ1|)`, the `j`-th dyadic cut-off of a partition with
    /// `J` annuli.
    Dyadic {
        j: usize,
        j_max: usize,
        n: usize,
    },
}

/// A shared, immutable expression tree.
///
/// All constructors fold constants and flatten nested sums and products, so
/// structurally equal inputs always produce structurally equal trees.
#[derive(Clone, PartialEq)]
pub struct SymbolExpr(Arc<Node>);

/// Differentiation variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    X(usize),
    Xi(usize),
}

impl fmt::Debug for SymbolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl SymbolExpr {
    fn wrap(node: Node) -> Self {
        SymbolExpr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn constant(c: C64) -> Self {
        Self::wrap(Node::Const(c))
    }

    pub fn real(v: f64) -> Self {
        Self::constant(C64::new(v, 0.0))
    }

    pub fn zero() -> Self {
        Self::real(0.0)
    }

    pub fn one() -> Self {
        Self::real(1.0)
    }

    pub fn x(i: usize) -> Self {
        Self::wrap(Node::X(i))
    }

    pub fn xi(i: usize) -> Self {
        Self::wrap(Node::Xi(i))
    }

    pub fn time() -> Self {
        Self::wrap(Node::Time)
    }

    pub fn bracket(s: f64) -> Self {
        if s == 0.0 {
            Self::one()
        } else {
            Self::wrap(Node::Bracket(s))
        }
    }

    /// Dyadic cut-off `φ_j(ξ1)` (see [`crate::symdsl::cutoff::phi_profile`]).
    pub fn dyadic(j: usize, j_max: usize) -> Self {
        Self::dyadic_deriv(j, j_max, 0)
    }

    pub fn dyadic_deriv(j: usize, j_max: usize, n: usize) -> Self {
        Self::wrap(Node::Dyadic { j, j_max, n })
    }

    pub fn as_const(&self) -> Option<C64> {
        match self.node() {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.node(), Node::Const(c) if *c == C64::new(0.0, 0.0))
    }

    pub fn is_one(&self) -> bool {
        matches!(self.node(), Node::Const(c) if *c == C64::new(1.0, 0.0))
    }

    /// Splits a term into its constant coefficient and the remaining factor.
    pub fn split_coefficient(&self) -> (C64, SymbolExpr) {
        match self.node() {
            Node::Const(c) => (*c, Self::one()),
            Node::Product(fs) => match fs[0].node() {
                Node::Const(c) => {
                    let rest: Vec<SymbolExpr> = fs[1..].to_vec();
                    let rest = if rest.len() == 1 { rest.into_iter().next().unwrap() } else { Self::wrap(Node::Product(rest)) };
                    (*c, rest)
                }
                _ => (C64::new(1.0, 0.0), self.clone()),
            },
            _ => (C64::new(1.0, 0.0), self.clone()),
        }
    }

    /// Flattened sum; constants are folded into one trailing term and terms
    /// that differ only by a constant coefficient are merged.
    pub fn sum<I: IntoIterator<Item = SymbolExpr>>(terms: I) -> Self {
        let mut acc = C64::new(0.0, 0.0);
        let mut merged: Vec<(C64, SymbolExpr)> = Vec::new();
        let mut add = |t: &SymbolExpr, acc: &mut C64| {
            if let Node::Const(c) = t.node() {
                *acc += c;
                return;
            }
            let (c, rest) = t.split_coefficient();
            match merged.iter_mut().find(|(_, r)| same(r, &rest)) {
                Some(slot) => slot.0 += c,
                None => merged.push((c, rest)),
            }
        };
        for t in terms {
            match t.node() {
                Node::Sum(children) => children.iter().for_each(|c| add(c, &mut acc)),
                _ => add(&t, &mut acc),
            }
        }
        let mut out: Vec<SymbolExpr> = merged
            .into_iter()
            .filter(|(c, _)| *c != C64::new(0.0, 0.0))
            .map(|(c, r)| if c == C64::new(1.0, 0.0) { r } else { Self::product([Self::constant(c), r]) })
            .collect();
        if acc != C64::new(0.0, 0.0) {
            out.push(Self::constant(acc));
        }
        match out.len() {
            0 => Self::zero(),
            1 => out.pop().unwrap(),
            _ => Self::wrap(Node::Sum(out)),
        }
    }

    /// Flattened product; constants fold into a leading coefficient, bracket
    /// powers add, and repeated bases collapse into integer powers.
    pub fn product<I: IntoIterator<Item = SymbolExpr>>(factors: I) -> Self {
        let mut coef = C64::new(1.0, 0.0);
        let mut bracket: Option<(usize, f64)> = None;
        // (base, exponent); a bracket sits in the list as a placeholder.
        let mut powers: Vec<(SymbolExpr, i32)> = Vec::new();
        let mut push = |f: &SymbolExpr, coef: &mut C64| match f.node() {
            Node::Const(c) => *coef *= c,
            Node::Bracket(s) => match bracket {
                Some((pos, acc)) => bracket = Some((pos, acc + s)),
                None => {
                    bracket = Some((powers.len(), *s));
                    powers.push((f.clone(), 1));
                }
            },
            _ => {
                let (base, e) = match f.node() {
                    Node::Pow(b, e) => (b.clone(), *e),
                    _ => (f.clone(), 1),
                };
                let is_bracket_slot = |i: usize| matches!(bracket, Some((p, _)) if p == i);
                match powers.iter().enumerate().position(|(i, (b, _))| !is_bracket_slot(i) && same(b, &base)) {
                    Some(i) => powers[i].1 += e,
                    None => powers.push((base, e)),
                }
            }
        };
        for f in factors {
            match f.node() {
                Node::Product(children) => children.iter().for_each(|c| push(c, &mut coef)),
                _ => push(&f, &mut coef),
            }
        }
        if coef == C64::new(0.0, 0.0) {
            return Self::zero();
        }
        let mut out = Vec::with_capacity(powers.len() + 1);
        if coef != C64::new(1.0, 0.0) {
            out.push(Self::constant(coef));
        }
        for (i, (b, e)) in powers.into_iter().enumerate() {
            match bracket {
                Some((p, s)) if p == i => {
                    if s != 0.0 {
                        out.push(Self::wrap(Node::Bracket(s)));
                    }
                }
                _ => {
                    if e == 0 {
                        continue;
                    }
                    let f = if e == 1 { b } else { Self::wrap(Node::Pow(b, e)) };
                    out.push(f);
                }
            }
        }
        match out.len() {
            0 => Self::one(),
            1 => out.pop().unwrap(),
            _ => Self::wrap(Node::Product(out)),
        }
    }

    pub fn pow(base: SymbolExpr, n: i32) -> Self {
        if n == 0 {
            return Self::one();
        }
        if n == 1 {
            return base;
        }
        match base.node() {
            Node::Const(c) => Self::constant(c.powi(n)),
            Node::Bracket(s) => Self::bracket(s * n as f64),
            Node::Pow(b, m) => Self::pow(b.clone(), m * n),
            _ => Self::wrap(Node::Pow(base, n)),
        }
    }

    pub fn sin(arg: SymbolExpr) -> Self {
        match arg.as_const() {
            Some(c) => Self::constant(c.sin()),
            None => Self::wrap(Node::Sin(arg)),
        }
    }

    pub fn cos(arg: SymbolExpr) -> Self {
        match arg.as_const() {
            Some(c) => Self::constant(c.cos()),
            None => Self::wrap(Node::Cos(arg)),
        }
    }

    pub fn exp(arg: SymbolExpr) -> Self {
        match arg.as_const() {
            Some(c) => Self::constant(c.exp()),
            None => Self::wrap(Node::Exp(arg)),
        }
    }

    pub fn neg(self) -> Self {
        Self::product([Self::real(-1.0), self])
    }

    pub fn scale(self, c: C64) -> Self {
        Self::product([Self::constant(c), self])
    }

    /// Evaluates at a real point `(x, ξ)` and time `t`.
    pub fn eval(&self, x: &[f64], xi: &[f64], t: f64) -> C64 {
        match self.node() {
            Node::Const(c) => *c,
            Node::X(i) => C64::new(x[*i], 0.0),
            Node::Xi(i) => C64::new(xi[*i], 0.0),
            Node::Time => C64::new(t, 0.0),
            Node::Sum(ts) => ts.iter().map(|e| e.eval(x, xi, t)).sum(),
            Node::Product(fs) => fs.iter().fold(C64::new(1.0, 0.0), |acc, e| acc * e.eval(x, xi, t)),
            Node::Pow(b, n) => b.eval(x, xi, t).powi(*n),
            Node::Sin(a) => a.eval(x, xi, t).sin(),
            Node::Cos(a) => a.eval(x, xi, t).cos(),
            Node::Exp(a) => a.eval(x, xi, t).exp(),
            Node::Bracket(s) => {
                let r2: f64 = xi.iter().map(|v| v * v).sum();
                C64::new((1.0 + r2).powf(0.5 * s), 0.0)
            }
            Node::Dyadic { j, j_max, n } => {
                let v = super::cutoff::phi_profile_deriv(*j, *j_max, xi[0].abs(), *n);
                let sign = if xi[0] < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
                C64::new(sign * v, 0.0)
            }
        }
    }

    /// Exact partial derivative with respect to one variable.
    pub fn diff(&self, var: Var) -> SymbolExpr {
        match self.node() {
            Node::Const(_) | Node::Time => Self::zero(),
            Node::X(i) => {
                if var == Var::X(*i) {
                    Self::one()
                } else {
                    Self::zero()
                }
            }
            Node::Xi(i) => {
                if var == Var::Xi(*i) {
                    Self::one()
                } else {
                    Self::zero()
                }
            }
            Node::Sum(ts) => Self::sum(ts.iter().map(|e| e.diff(var))),
            Node::Product(fs) => {
                let mut terms = Vec::new();
                for (k, f) in fs.iter().enumerate() {
                    let df = f.diff(var);
                    if df.is_zero() {
                        continue;
                    }
                    let factors = fs.iter().enumerate().map(|(l, g)| if l == k { df.clone() } else { g.clone() });
                    terms.push(Self::product(factors));
                }
                Self::sum(terms)
            }
            Node::Pow(b, n) => {
                let db = b.diff(var);
                if db.is_zero() {
                    return Self::zero();
                }
                Self::product([Self::real(*n as f64), Self::pow(b.clone(), n - 1), db])
            }
            Node::Sin(a) => {
                let da = a.diff(var);
                if da.is_zero() {
                    return Self::zero();
                }
                Self::product([Self::cos(a.clone()), da])
            }
            Node::Cos(a) => {
                let da = a.diff(var);
                if da.is_zero() {
                    return Self::zero();
                }
                Self::product([Self::real(-1.0), Self::sin(a.clone()), da])
            }
            Node::Exp(a) => {
                let da = a.diff(var);
                if da.is_zero() {
                    return Self::zero();
                }
                Self::product([Self::exp(a.clone()), da])
            }
            Node::Bracket(s) => match var {
                Var::X(_) => Self::zero(),
                Var::Xi(i) => Self::product([Self::real(*s), Self::xi(i), Self::bracket(s - 2.0)]),
            },
            Node::Dyadic { j, j_max, n } => match var {
                Var::Xi(0) => Self::dyadic_deriv(*j, *j_max, n + 1),
                _ => Self::zero(),
            },
        }
    }

    /// Applies `∂_x^α ∂_ξ^β`.
    pub fn diff_multi(&self, alpha: &[usize], beta: &[usize]) -> SymbolExpr {
        let mut e = self.clone();
        for (i, &a) in alpha.iter().enumerate() {
            for _ in 0..a {
                e = e.diff(Var::X(i));
            }
        }
        for (i, &b) in beta.iter().enumerate() {
            for _ in 0..b {
                e = e.diff(Var::Xi(i));
            }
        }
        e
    }

    fn children(&self) -> Vec<&SymbolExpr> {
        match self.node() {
            Node::Sum(v) | Node::Product(v) => v.iter().collect(),
            Node::Pow(b, _) => vec![b],
            Node::Sin(a) | Node::Cos(a) | Node::Exp(a) => vec![a],
            _ => Vec::new(),
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    pub fn uses_time(&self) -> bool {
        matches!(self.node(), Node::Time) || self.children().iter().any(|c| c.uses_time())
    }

    pub fn depends_on_x(&self) -> bool {
        matches!(self.node(), Node::X(_)) || self.children().iter().any(|c| c.depends_on_x())
    }

    pub fn depends_on_xi(&self) -> bool {
        matches!(self.node(), Node::Xi(_) | Node::Bracket(_) | Node::Dyadic { .. }) || self.children().iter().any(|c| c.depends_on_xi())
    }

    /// Largest spatial/frequency variable index plus one.
    pub fn dimension_used(&self) -> usize {
        let own = match self.node() {
            Node::X(i) | Node::Xi(i) => i + 1,
            Node::Dyadic { .. } => 1,
            _ => 0,
        };
        self.children().iter().map(|c| c.dimension_used()).fold(own, usize::max)
    }

    /// Checks that `x` enters only through `sin`/`cos` of integer multiples.
    pub fn check_periodic(&self) -> Result<(), String> {
        match self.node() {
            Node::X(i) => Err(format!("x{} appears outside sin/cos", i + 1)),
            Node::Sin(a) | Node::Cos(a) => check_trig_argument(a),
            _ => {
                for c in self.children() {
                    c.check_periodic()?;
                }
                Ok(())
            }
        }
    }
}

fn same(a: &SymbolExpr, b: &SymbolExpr) -> bool {
    Arc::ptr_eq(&a.0, &b.0) || a == b
}

fn check_trig_argument(arg: &SymbolExpr) -> Result<(), String> {
    let terms: Vec<&SymbolExpr> = match arg.node() {
        Node::Sum(ts) => ts.iter().collect(),
        _ => vec![arg],
    };
    for term in terms {
        match term.node() {
            Node::X(_) => {}
            Node::Product(fs) if fs.len() == 2 && matches!(fs[1].node(), Node::X(_)) => {
                let c = fs[0].as_const().ok_or_else(|| format!("non-constant coefficient of x in {}", arg))?;
                if c.im != 0.0 || c.re.fract() != 0.0 {
                    return Err(format!("coefficient {} of x is not an integer in {}", c, arg));
                }
            }
            _ => term.check_periodic()?,
        }
    }
    Ok(())
}

pub(crate) fn fmt_real(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    format!("{}", v)
}

pub(crate) fn fmt_const(c: C64) -> String {
    if c.im == 0.0 {
        fmt_real(c.re)
    } else if c.re == 0.0 {
        format!("({}*i)", fmt_real(c.im))
    } else {
        format!("({} + {}*i)", fmt_real(c.re), fmt_real(c.im))
    }
}

impl fmt::Display for SymbolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(c) => write!(f, "{}", fmt_const(*c)),
            Node::X(i) => write!(f, "x{}", i + 1),
            Node::Xi(i) => write!(f, "xi{}", i + 1),
            Node::Time => write!(f, "t"),
            Node::Sum(ts) => {
                write!(f, "(")?;
                for (k, t) in ts.iter().enumerate() {
                    if k > 0 {
                        write!(f, " + ")?;
                    }
                    write!(f, "{}", t)?;
                }
                write!(f, ")")
            }
            Node::Product(fs) => {
                write!(f, "(")?;
                for (k, t) in fs.iter().enumerate() {
                    if k > 0 {
                        write!(f, "*")?;
                    }
                    write!(f, "{}", t)?;
                }
                write!(f, ")")
            }
            Node::Pow(b, n) => {
                if *n < 0 {
                    write!(f, "{}^({})", b, n)
                } else {
                    write!(f, "{}^{}", b, n)
                }
            }
            Node::Sin(a) => write!(f, "sin({})", a),
            Node::Cos(a) => write!(f, "cos({})", a),
            Node::Exp(a) => write!(f, "exp({})", a),
            Node::Bracket(s) => write!(f, "bracket({})", fmt_real(*s)),
            Node::Dyadic { j, j_max, n: 0 } => write!(f, "dyadic({}, {})", j, j_max),
            Node::Dyadic { j, j_max, n } => write!(f, "dyadic({}, {}, {})", j, j_max, n),
        }
    }
}

impl std::ops::Add for SymbolExpr {
    type Output = SymbolExpr;
    fn add(self, rhs: SymbolExpr) -> SymbolExpr {
        SymbolExpr::sum([self, rhs])
    }
}

impl std::ops::Sub for SymbolExpr {
    type Output = SymbolExpr;
    fn sub(self, rhs: SymbolExpr) -> SymbolExpr {
        SymbolExpr::sum([self, rhs.neg()])
    }
}

impl std::ops::Mul for SymbolExpr {
    type Output = SymbolExpr;
    fn mul(self, rhs: SymbolExpr) -> SymbolExpr {
        SymbolExpr::product([self, rhs])
    }
}
