//! Small dense complex linear-algebra helpers shared by the numerical modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Builds a complex matrix from real row-major data.
pub fn from_real_rows(n: usize, rows: &[f64]) -> CMatrix {
    CMatrix::from_row_iterator(n, n, rows.iter().map(|&x| c(x, 0.0)))
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vector_norm(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Thin singular value decomposition `A = U Σ V^H`, singular values in
/// descending order.  `v` is always square (ncols × ncols); columns of `u`
/// belonging to zero singular values are zero.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMatrix,
    pub sigma: Vec<f64>,
    pub v: CMatrix,
}

/// One-sided (Hestenes) Jacobi SVD.  Slower than bidiagonalisation but
/// accurate for the rank-deficient matrices that rank and kernel decisions
/// depend on.
pub fn svd(a: &CMatrix) -> Svd {
    let (m, n) = a.shape();
    let rows = m.max(n);
    let mut work = CMatrix::zeros(rows, n);
    work.rows_mut(0, m).copy_from(a);
    let mut v = identity(n);
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = work.column(p).iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = work.column(q).iter().map(|z| z.norm_sqr()).sum();
                let gamma: Complex64 = work.column(p).dotc(&work.column(q));
                let g = gamma.norm();
                if g == 0.0 || g <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                // remove the phase so the rotation is real
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for mat in [&mut work, &mut v] {
                    for k in 0..mat.nrows() {
                        let xp = mat[(k, p)];
                        let xq = mat[(k, q)] * phase.conj();
                        mat[(k, p)] = xp * cs - xq * sn;
                        mat[(k, q)] = xp * sn + xq * cs;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|j| work.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let mut u = CMatrix::zeros(m, n);
    let mut v_sorted = CMatrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    for (j, &k) in order.iter().enumerate() {
        sigma.push(norms[k]);
        v_sorted.set_column(j, &v.column(k));
        if norms[k] > 0.0 {
            let col = work.column(k).rows(0, m) / c(norms[k], 0.0);
            u.set_column(j, &col);
        }
    }
    Svd {
        u,
        sigma,
        v: v_sorted,
    }
}

/// Singular values in descending order (`ncols` of them).
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    svd(m).sigma
}

/// Induced 2-norm.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    singular_values(m)[0]
}

/// Numerical rank: singular values above `tol` (absolute).
pub fn rank(m: &CMatrix, tol: f64) -> usize {
    singular_values(m).iter().filter(|&&s| s > tol).count()
}

/// Orthonormal basis (as columns) of the `dim` right singular directions with
/// the smallest singular values.
pub fn smallest_right_singular_space(m: &CMatrix, dim: usize) -> CMatrix {
    let d = svd(m);
    let n = m.ncols();
    d.v.columns(n - dim, dim).into_owned()
}

/// Orthonormal basis of the column span, keeping directions with singular
/// value above `tol`, at most `max_dim` of them (largest first).
pub fn column_space(m: &CMatrix, tol: f64, max_dim: usize) -> CMatrix {
    let d = svd(m);
    let keep = d.sigma.iter().filter(|&&s| s > tol).count().min(max_dim);
    d.u.columns(0, keep).into_owned()
}

/// Inverse via partial-pivoted LU.
pub fn inverse(m: &CMatrix) -> Option<CMatrix> {
    let inv = m.clone().lu().try_inverse()?;
    inv.iter()
        .all(|z| z.re.is_finite() && z.im.is_finite())
        .then_some(inv)
}

pub fn solve(m: &CMatrix, rhs: &CVector) -> Option<CVector> {
    m.clone().lu().solve(rhs)
}

pub fn determinant(m: &CMatrix) -> Complex64 {
    m.clone().lu().determinant()
}

/// `m^k` for `k >= 0` by repeated squaring.
pub fn integer_power(m: &CMatrix, k: u32) -> CMatrix {
    let mut acc = identity(m.nrows());
    let mut base = m.clone();
    let mut e = k;
    while e > 0 {
        if e & 1 == 1 {
            acc = &acc * &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    acc
}

/// Matrix exponential by scaling and squaring of a Taylor polynomial.
pub fn expm(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    let norm = a.iter().map(|z| z.norm()).fold(0.0, f64::max) * n as f64;
    let mut squarings = 0u32;
    if norm > 0.5 {
        squarings = (norm / 0.5).log2().ceil() as u32;
    }
    let scaled = a * c(0.5f64.powi(squarings as i32), 0.0);
    let mut term = identity(n);
    let mut sum = identity(n);
    for k in 1..=24 {
        term = &term * &scaled * c(1.0 / k as f64, 0.0);
        sum += &term;
        if frobenius(&term) <= f64::EPSILON * frobenius(&sum) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Largest Frobenius distance normalised by `max(1, ‖b‖)`.
pub fn relative_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    frobenius(&(a - b)) / frobenius(b).max(1.0)
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_diagonal_and_nilpotent() {
        let d = from_real_rows(2, &[1.0, 0.0, 0.0, -2.0]);
        let e = expm(&d);
        assert!((e[(0, 0)].re - 1f64.exp()).abs() < 1e-14);
        assert!((e[(1, 1)].re - (-2f64).exp()).abs() < 1e-15);
        let n = from_real_rows(2, &[0.0, 3.0, 0.0, 0.0]);
        let e = expm(&n);
        assert_eq!(e, from_real_rows(2, &[1.0, 3.0, 0.0, 1.0]));
        let big = from_real_rows(2, &[0.0, 20.0, -20.0, 0.0]);
        let e = expm(&big);
        assert!((e[(0, 0)].re - 20f64.cos()).abs() < 1e-11);
        assert!((e[(0, 1)].re - 20f64.sin()).abs() < 1e-11);
    }

    #[test]
    fn null_space_of_rank_one() {
        let m = from_real_rows(2, &[1.0, 2.0, 2.0, 4.0]);
        let k = smallest_right_singular_space(&m, 1);
        let r = &m * &k;
        assert!(frobenius(&r) < 1e-12);
        assert_eq!(rank(&m, 1e-10), 1);
    }

    #[test]
    fn svd_of_rank_deficient_tall_matrix() {
        // rank one: column 0 is a multiple of column 1
        let col = [0.2791308695389257, -0.3360530324023464, 0.8994810826307996];
        let a = CMatrix::from_fn(3, 2, |i, j| c(col[i] * if j == 0 { -0.0093865 } else { 1.0 }, 0.0));
        let d = svd(&a);
        let sigma = CMatrix::from_diagonal(&CVector::from_iterator(2, d.sigma.iter().map(|&s| c(s, 0.0))));
        let back = &d.u * sigma * d.v.adjoint();
        assert!(frobenius(&(back - &a)) < 1e-14);
        assert!(d.sigma[1] < 1e-15);
        let u0 = d.u.column(0);
        let n = (col[0] * col[0] + col[1] * col[1] + col[2] * col[2]).sqrt();
        assert!((u0[0].norm() - col[0].abs() / n).abs() < 1e-14);
    }

    #[test]
    fn svd_of_complex_wide_matrix() {
        let a = CMatrix::from_fn(2, 3, |i, j| c((i + 2 * j) as f64, (i as f64) - (j as f64)));
        let d = svd(&a);
        assert_eq!(d.sigma.len(), 3);
        let sigma = CMatrix::from_diagonal(&CVector::from_iterator(3, d.sigma.iter().map(|&s| c(s, 0.0))));
        let back = &d.u * sigma * d.v.adjoint();
        assert!(frobenius(&(back - &a)) < 1e-13);
        assert!(frobenius(&(d.v.adjoint() * &d.v - identity(3))) < 1e-14);
    }

    #[test]
    fn integer_powers() {
        let m = from_real_rows(2, &[1.0, 1.0, 0.0, 1.0]);
        assert_eq!(integer_power(&m, 0), identity(2));
        assert_eq!(integer_power(&m, 5), from_real_rows(2, &[1.0, 5.0, 0.0, 1.0]));
    }
}
