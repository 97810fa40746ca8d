//! Smooth cut-offs of the dyadic partition, with exact derivatives through
//! truncated Taylor series.

/// Truncated Taylor coefficients `c_0..c_n` of a function at a point.
#[derive(Clone, Debug, PartialEq)]
struct Jet(Vec<f64>);

impl Jet {
    fn constant(v: f64, n: usize) -> Self {
        let mut c = vec![0.0; n + 1];
        c[0] = v;
        Jet(c)
    }

    fn affine(v: f64, slope: f64, n: usize) -> Self {
        let mut j = Self::constant(v, n);
        if n > 0 {
            j.0[1] = slope;
        }
        j
    }

    fn mul(&self, o: &Jet) -> Jet {
        let n = self.0.len();
        let mut c = vec![0.0; n];
        for (i, a) in self.0.iter().enumerate() {
            for (k, b) in o.0[..n - i].iter().enumerate() {
                c[i + k] += a * b;
            }
        }
        Jet(c)
    }

    fn add(&self, o: &Jet) -> Jet {
        Jet(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }

    fn recip(&self) -> Jet {
        let n = self.0.len();
        let mut c = vec![0.0; n];
        c[0] = 1.0 / self.0[0];
        for k in 1..n {
            let s: f64 = (1..=k).map(|i| self.0[i] * c[k - i]).sum();
            c[k] = -s * c[0];
        }
        Jet(c)
    }

    fn exp(&self) -> Jet {
        // e' = f' e, solved coefficient by coefficient
        let n = self.0.len();
        let mut c = vec![0.0; n];
        c[0] = self.0[0].exp();
        for k in 1..n {
            let s: f64 = (1..=k).map(|i| i as f64 * self.0[i] * c[k - i]).sum();
            c[k] = s / k as f64;
        }
        Jet(c)
    }

    /// `exp(-1/u)` for `u > 0`.
    fn h(&self) -> Jet {
        let mut r = self.recip();
        r.0.iter_mut().for_each(|v| *v = -*v);
        r.exp()
    }
}

fn smooth_step_jet(s: f64, a: f64, b: f64, n: usize) -> Jet {
    if s <= a {
        Jet::constant(1.0, n)
    } else if s >= b {
        Jet::constant(0.0, n)
    } else {
        let w = 1.0 / (b - a);
        let u = (s - a) * w;
        let p = Jet::affine(1.0 - u, -w, n).h();
        let q = Jet::affine(u, w, n).h();
        p.mul(&p.add(&q).recip())
    }
}

fn h(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth step: exactly 1 for `s ≤ a`, exactly 0 for `s ≥ b`.
pub fn smooth_step(s: f64, a: f64, b: f64) -> f64 {
    if s <= a {
        1.0
    } else if s >= b {
        0.0
    } else {
        let u = (s - a) / (b - a);
        let (p, q) = (h(1.0 - u), h(u));
        p / (p + q)
    }
}

/// Low-pass profile `χ(s)`: 1 on `[0, 1]`, 0 on `[2, ∞)`.
pub fn chi(s: f64) -> f64 {
    smooth_step(s, 1.0, 2.0)
}

/// `φ_j` evaluated at radius `r = |k|`.
pub fn phi_profile(j: usize, j_max: usize, r: f64) -> f64 {
    if j == 0 {
        chi(r)
    } else if j <= j_max {
        chi(r / 2f64.powi(j as i32)) - chi(r / 2f64.powi(j as i32 - 1))
    } else {
        1.0 - chi(r / 2f64.powi(j_max as i32))
    }
}

fn chi_scaled_jet(r: f64, scale: f64, n: usize) -> Jet {
    // χ(r/λ): the k-th coefficient picks up λ^{-k}
    let mut j = smooth_step_jet(r / scale, 1.0, 2.0, n);
    let mut f = 1.0;
    for c in j.0.iter_mut() {
        *c *= f;
        f /= scale;
    }
    j
}

/// `d^n φ_j / dr^n` at radius `r ≥ 0`.
pub fn phi_profile_deriv(j: usize, j_max: usize, r: f64, n: usize) -> f64 {
    let jet = if j == 0 {
        chi_scaled_jet(r, 1.0, n)
    } else if j <= j_max {
        let mut lo = chi_scaled_jet(r, 2f64.powi(j as i32 - 1), n);
        lo.0.iter_mut().for_each(|v| *v = -*v);
        chi_scaled_jet(r, 2f64.powi(j as i32), n).add(&lo)
    } else {
        let mut t = chi_scaled_jet(r, 2f64.powi(j_max as i32), n);
        t.0.iter_mut().for_each(|v| *v = -*v);
        t.0[0] += 1.0;
        t
    };
    let fact: f64 = (1..=n).map(|k| k as f64).product();
    jet.0[n] * fact
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jet_value_matches_profile() {
        for j in 0..5 {
            for i in 0..200 {
                let r = 0.2 * i as f64;
                assert!((phi_profile_deriv(j, 3, r, 0) - phi_profile(j, 3, r)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn jet_derivatives_match_differences() {
        for n in 1..5 {
            for &r in &[1.2, 1.5, 1.9, 2.7, 3.3, 5.0, 7.1] {
                let h = 1e-3;
                let fd = (phi_profile_deriv(2, 3, r + h, n - 1) - phi_profile_deriv(2, 3, r - h, n - 1)) / (2.0 * h);
                let ex = phi_profile_deriv(2, 3, r, n);
                assert!((fd - ex).abs() < 1e-4 * ex.abs().max(1.0), "n={n} r={r}: {fd} vs {ex}");
            }
        }
    }

    #[test]
    fn flat_outside_transition() {
        for n in 1..6 {
            assert_eq!(phi_profile_deriv(0, 3, 0.5, n), 0.0);
            assert_eq!(phi_profile_deriv(2, 3, 10.0, n), 0.0);
        }
    }
}
