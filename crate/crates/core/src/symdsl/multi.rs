/// All multi-indices of length `dim` with total order `≤ max`, graded by
/// total order, then lexicographic with the first slot varying slowest.
pub fn multi_indices(dim: usize, max: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for total in 0..=max {
        exact_order(dim, total, &mut vec![0; dim], 0, &mut out);
    }
    out
}

/// All multi-indices of length `dim` with total order exactly `total`.
pub fn multi_indices_exact(dim: usize, total: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    exact_order(dim, total, &mut vec![0; dim], 0, &mut out);
    out
}

fn exact_order(dim: usize, left: usize, cur: &mut Vec<usize>, slot: usize, out: &mut Vec<Vec<usize>>) {
    if dim == 0 {
        if left == 0 {
            out.push(Vec::new());
        }
        return;
    }
    if slot == dim - 1 {
        cur[slot] = left;
        out.push(cur.clone());
        cur[slot] = 0;
        return;
    }
    for v in (0..=left).rev() {
        cur[slot] = v;
        exact_order(dim, left - v, cur, slot + 1, out);
    }
    cur[slot] = 0;
}

pub fn order(a: &[usize]) -> usize {
    a.iter().sum()
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|v| v as f64).product()
}

/// `α! = Π α_i!`.
pub fn multi_factorial(a: &[usize]) -> f64 {
    a.iter().map(|&v| factorial(v)).product()
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `Π binom(γ_i, γ'_i)`, zero unless `γ' ≤ γ` componentwise.
pub fn multi_binomial(g: &[usize], gp: &[usize]) -> f64 {
    g.iter().zip(gp).map(|(&a, &b)| binomial(a, b)).product()
}

pub fn leq(a: &[usize], b: &[usize]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

pub fn add(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(multi_indices(2, 3).len(), 10);
        assert_eq!(multi_indices_exact(3, 2).len(), 6);
        assert_eq!(multi_indices(1, 0), vec![vec![0]]);
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(multi_factorial(&[2, 3]), 12.0);
    }
}
