//! Small dense helpers on row-major complex matrices and least-squares fits.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Least-squares line through `(x, y)` points: returns `(slope, intercept)`.
pub fn ls_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return (f64::NAN, my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

pub fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    ls_fit(pts).0
}

pub fn identity(n: usize) -> Vec<C64> {
    let mut m = vec![ZERO; n * n];
    for i in 0..n {
        m[i * n + i] = C64::new(1.0, 0.0);
    }
    m
}

/// `out = a b` for `n×n` row-major matrices.
pub fn matmul_into(a: &[C64], b: &[C64], n: usize, out: &mut [C64]) {
    for i in 0..n {
        for j in 0..n {
            let mut s = ZERO;
            for l in 0..n {
                s += a[i * n + l] * b[l * n + j];
            }
            out[i * n + j] = s;
        }
    }
}

pub fn matmul(a: &[C64], b: &[C64], n: usize) -> Vec<C64> {
    let mut out = vec![ZERO; n * n];
    matmul_into(a, b, n, &mut out);
    out
}

/// `out += c · a b`.
pub fn matmul_acc(a: &[C64], b: &[C64], n: usize, c: C64, out: &mut [C64]) {
    for i in 0..n {
        for j in 0..n {
            let mut s = ZERO;
            for l in 0..n {
                s += a[i * n + l] * b[l * n + j];
            }
            out[i * n + j] += c * s;
        }
    }
}

pub fn to_dmatrix(a: &[C64], n: usize) -> DMatrix<C64> {
    DMatrix::from_row_slice(n, n, a)
}

/// Eigenvalues of a square complex matrix.
pub fn eigenvalues(a: &[C64], n: usize) -> Vec<C64> {
    match n {
        1 => vec![a[0]],
        2 => {
            let tr = a[0] + a[3];
            let det = a[0] * a[3] - a[1] * a[2];
            let disc = (tr * tr - det * 4.0).sqrt();
            vec![(tr + disc) * 0.5, (tr - disc) * 0.5]
        }
        _ => {
            let schur = nalgebra::Schur::new(to_dmatrix(a, n));
            let (_, t) = schur.unpack();
            (0..n).map(|i| t[(i, i)]).collect()
        }
    }
}

/// Eigenvalue with the largest real part, a unit eigenvector for it by
/// inverse iteration, and the distance to the rest of the spectrum.
pub fn leading_eigenpair(a: &[C64], n: usize) -> (C64, Vec<C64>, f64) {
    let ev = eigenvalues(a, n);
    let (lead, lam) = ev.iter().enumerate().fold((0, ev[0]), |acc, (i, z)| if z.re > acc.1.re { (i, *z) } else { acc });
    let gap = ev.iter().enumerate().filter(|(i, _)| *i != lead).map(|(_, z)| (z - lam).norm()).fold(f64::INFINITY, f64::min);
    if n == 1 {
        return (lam, vec![C64::new(1.0, 0.0)], gap);
    }
    let scale = a.iter().map(|v| v.norm()).fold(1.0, f64::max);
    let shift = lam + C64::new(1e-10 * scale, 1e-10 * scale);
    let mut m = to_dmatrix(a, n);
    for i in 0..n {
        m[(i, i)] -= shift;
    }
    let lu = m.lu();
    let mut v = nalgebra::DVector::from_fn(n, |i, _| C64::new(1.0 + 0.1 * i as f64, 0.05 * i as f64));
    for _ in 0..3 {
        let w = lu.solve(&v).unwrap_or_else(|| v.clone());
        let nrm = w.norm();
        v = if nrm > 0.0 && nrm.is_finite() { w / C64::new(nrm, 0.0) } else { v };
    }
    (lam, v.iter().cloned().collect(), gap)
}

/// Largest eigenvalue of the hermitian part `(A + A^H)/2`.
pub fn hermitian_part_max(a: &[C64], n: usize) -> f64 {
    let m = to_dmatrix(a, n);
    let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(h);
    eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(a: &[C64], n: usize) -> f64 {
    if n == 1 {
        return a[0].norm();
    }
    let svd = nalgebra::SVD::new(to_dmatrix(a, n), false, false);
    svd.singular_values.iter().cloned().fold(0.0, f64::max)
}

/// Largest singular value of an arbitrary dense matrix.
pub fn dense_spectral_norm(m: DMatrix<C64>) -> f64 {
    let svd = nalgebra::SVD::new(m, false, false);
    svd.singular_values.iter().cloned().fold(0.0, f64::max)
}

pub fn max_abs(a: &[C64]) -> f64 {
    a.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leading_eigenvector_of_triangular() {
        let a = vec![C64::new(1.0, 0.0), C64::new(0.5, 0.0), C64::new(0.0, 0.0), C64::new(-1.0, 0.0)];
        let (lam, v, gap) = leading_eigenpair(&a, 2);
        assert!((lam - C64::new(1.0, 0.0)).norm() < 1e-14);
        assert!((gap - 2.0).abs() < 1e-14);
        let av = matmul(&a, &[v[0], C64::new(0.0, 0.0), v[1], C64::new(0.0, 0.0)], 2);
        assert!((av[0] - v[0]).norm() < 1e-8 && (av[2] - v[1]).norm() < 1e-8);
        let a3 = vec![
            C64::new(2.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.5, 0.0),
            C64::new(0.3, 0.0),
            C64::new(0.1, 0.0),
            C64::new(0.0, 0.0),
            C64::new(-1.0, 0.0),
        ];
        let (lam, v, _) = leading_eigenpair(&a3, 3);
        for r in 0..3 {
            let av: C64 = (0..3).map(|c| a3[r * 3 + c] * v[c]).sum();
            assert!((av - lam * v[r]).norm() < 1e-8);
        }
    }

    #[test]
    fn slope_of_line() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 3.0 * i as f64 - 1.0)).collect();
        let (s, c) = ls_fit(&pts);
        assert!((s - 3.0).abs() < 1e-14 && (c + 1.0).abs() < 1e-14);
    }

    #[test]
    fn schur_eigenvalues_match_closed_form() {
        let a = vec![
            C64::new(1.0, 0.5),
            C64::new(2.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.3, -1.0),
            C64::new(-1.0, 0.0),
            C64::new(4.0, 1.0),
            C64::new(0.0, 2.0),
            C64::new(1.0, 0.0),
            C64::new(0.5, 0.0),
        ];
        let ev = eigenvalues(&a, 3);
        let tr: C64 = ev.iter().sum();
        assert!((tr - (a[0] + a[4] + a[8])).norm() < 1e-12);
        let det: C64 = ev.iter().product();
        let m = to_dmatrix(&a, 3);
        assert!((det - m.determinant()).norm() < 1e-10);
    }

    #[test]
    fn hermitian_part_of_jordan_block() {
        let a = vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0), ZERO, C64::new(1.0, 0.0)];
        assert!((hermitian_part_max(&a, 2) - 1.5).abs() < 1e-14);
        assert!((spectral_norm(&a, 2) - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-12);
    }
}
