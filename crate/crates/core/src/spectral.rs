//! Spectral projectors, principal real powers and logarithms of nonsingular
//! matrices, with eigenvalue clustering so repeated multipliers are treated as
//! exactly repeated.

use nalgebra::Schur;
use num_complex::Complex64;
use thiserror::Error;

use crate::hilger::{principal_ln, principal_powf};
use crate::linalg::{
    c, column_space, frobenius, identity, integer_power, inverse, is_finite, rank,
    smallest_right_singular_space, spectral_norm, CMatrix, CVector, ONE,
};

pub type ComplexMatrix = CMatrix;

/// Default relative clustering tolerance (scaled by ‖M‖).
pub const CLUSTER_TOL_REL: f64 = 1e-7;
/// Eigenvalues this close to zero (relative to ‖M‖) count as singular.
pub const SINGULAR_TOL_REL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("matrix is singular (eigenvalue {modulus:e} within tolerance of zero)")]
    Singular { modulus: f64 },
    #[error("eigenvalue iteration failed to converge")]
    NoConvergence,
    #[error("generalized eigenspace basis is ill-conditioned")]
    IllConditioned,
    #[error("cluster index {index} out of range ({count} clusters)")]
    BadIndex { index: usize, count: usize },
    #[error("rank {rank} outside 1..={max}")]
    BadRank { rank: usize, max: usize },
    #[error("generalized eigenvector vanished numerically")]
    ZeroVector,
}

pub type Result<T> = std::result::Result<T, SpectralError>;

/// Eigen-structure of a nonsingular matrix: one entry per eigenvalue cluster.
#[derive(Debug, Clone)]
pub struct SpectralData {
    matrix: CMatrix,
    norm: f64,
    cluster_tol: f64,
    pub eigenvalues: Vec<Complex64>,
    pub multiplicities: Vec<usize>,
    pub nilpotent_indices: Vec<usize>,
    pub projections: Vec<CMatrix>,
    /// Columns spanning each generalized eigenspace.
    bases: Vec<CMatrix>,
    /// Matching rows of the inverse basis (P_i = bases[i] * duals[i]).
    duals: Vec<CMatrix>,
}

impl SpectralData {
    /// Decomposition with the default clustering tolerance.
    pub fn new(m: &CMatrix) -> Result<Self> {
        eigen_decompose(m, None)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn cluster_tol(&self) -> f64 {
        self.cluster_tol
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Eigenvalues repeated by algebraic multiplicity.
    pub fn eigenvalue_multiset(&self) -> Vec<Complex64> {
        self.eigenvalues
            .iter()
            .zip(&self.multiplicities)
            .flat_map(|(&l, &m)| std::iter::repeat(l).take(m))
            .collect()
    }

    /// True when every cluster has nilpotent index 1.
    pub fn is_semisimple(&self) -> bool {
        self.nilpotent_indices.iter().all(|&k| k == 1)
    }

    fn shifted(&self, i: usize) -> CMatrix {
        let n = self.dimension();
        &self.matrix - identity(n) * self.eigenvalues[i]
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.len() {
            return Err(SpectralError::BadIndex {
                index: i,
                count: self.len(),
            });
        }
        Ok(())
    }

    /// Restriction of `M - λ_i I` to the i-th generalized eigenspace, in the
    /// coordinates of `bases[i]`.
    fn restricted_nilpotent(&self, i: usize) -> CMatrix {
        &self.duals[i] * self.shifted(i) * &self.bases[i]
    }
}

/// Clusters eigenvalues closer than `cluster_tol` (absolute; `None` selects
/// 1e-7·‖M‖) and builds the spectral projectors.
pub fn eigen_decompose(m: &CMatrix, cluster_tol: Option<f64>) -> Result<SpectralData> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(SpectralError::NotSquare {
            rows: n,
            cols: m.ncols(),
        });
    }
    if !is_finite(m) {
        return Err(SpectralError::NonFinite);
    }
    let norm = spectral_norm(m);
    if n == 0 || norm == 0.0 {
        return Err(SpectralError::Singular { modulus: 0.0 });
    }
    let cluster_tol = cluster_tol.unwrap_or(CLUSTER_TOL_REL * norm);

    let raw = Schur::try_new(m.clone(), f64::EPSILON, 100 * n.max(10))
        .ok_or(SpectralError::NoConvergence)?
        .eigenvalues()
        .ok_or(SpectralError::NoConvergence)?;
    let raw: Vec<Complex64> = raw.iter().copied().collect();
    for z in &raw {
        if z.norm() <= SINGULAR_TOL_REL * norm {
            return Err(SpectralError::Singular { modulus: z.norm() });
        }
    }

    let (eigenvalues, multiplicities) = cluster(&raw, cluster_tol, norm);

    // generalized eigenspace bases from the kernel of (M - λI)^m
    let mut bases = Vec::with_capacity(eigenvalues.len());
    for (&lambda, &mult) in eigenvalues.iter().zip(&multiplicities) {
        let shifted = m - identity(n) * lambda;
        let power = integer_power(&shifted, mult as u32);
        bases.push(smallest_right_singular_space(&power, mult));
    }
    let mut all = CMatrix::zeros(n, n);
    let mut col = 0;
    for b in &bases {
        all.columns_mut(col, b.ncols()).copy_from(b);
        col += b.ncols();
    }
    let sv = crate::linalg::singular_values(&all);
    if sv[n - 1] <= 1e-13 * sv[0] {
        return Err(SpectralError::IllConditioned);
    }
    let all_inv = inverse(&all).ok_or(SpectralError::IllConditioned)?;

    let mut duals = Vec::with_capacity(bases.len());
    let mut projections = Vec::with_capacity(bases.len());
    let mut row = 0;
    for b in &bases {
        let dual = all_inv.rows(row, b.ncols()).into_owned();
        row += b.ncols();
        projections.push(b * &dual);
        duals.push(dual);
    }

    let mut spec = SpectralData {
        matrix: m.clone(),
        norm,
        cluster_tol,
        eigenvalues,
        multiplicities,
        nilpotent_indices: Vec::new(),
        projections,
        bases,
        duals,
    };
    spec.nilpotent_indices = (0..spec.len()).map(|i| nilpotent_index(&spec, i)).collect();
    Ok(spec)
}

/// Single-linkage grouping; each group is replaced by its mean.  Output is
/// ordered by decreasing modulus, then increasing argument.
fn cluster(raw: &[Complex64], tol: f64, norm: f64) -> (Vec<Complex64>, Vec<usize>) {
    let n = raw.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if (raw[i] - raw[j]).norm() < tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<(usize, Complex64, usize)> = Vec::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        match groups.iter_mut().find(|g| g.0 == root) {
            Some(g) => {
                g.1 += raw[i];
                g.2 += 1;
            }
            None => groups.push((root, raw[i], 1)),
        }
    }
    let mut out: Vec<(Complex64, usize)> = groups
        .into_iter()
        .map(|(_, sum, count)| {
            let mut mean = sum / count as f64;
            // conjugate-pair noise on real eigenvalues
            if mean.im.abs() <= 64.0 * f64::EPSILON * norm {
                mean.im = 0.0;
            }
            (mean, count)
        })
        .collect();
    out.sort_by(|a, b| {
        b.0.norm()
            .total_cmp(&a.0.norm())
            .then(principal_ln(a.0).im.total_cmp(&principal_ln(b.0).im))
    });
    out.into_iter().unzip()
}

fn nilpotent_index(spec: &SpectralData, i: usize) -> usize {
    let k = spec.restricted_nilpotent(i);
    let m = spec.multiplicities[i];
    let scale = spec.norm.max(1.0);
    let rel = 10.0 * spec.cluster_tol / spec.norm;
    let mut power = identity(m);
    for j in 1..=m {
        power = &power * &k;
        if frobenius(&power) <= rel * scale.powi(j as i32) {
            return j;
        }
    }
    m
}

/// Generalised binomial coefficient r(r-1)…(r-j+1)/j!.
pub fn binomial(r: f64, j: usize) -> f64 {
    (0..j).fold(1.0, |acc, l| acc * (r - l as f64) / (l + 1) as f64)
}

/// Principal real power Σ P_i λ_i^r Σ_j C(r,j) ((M - λ_i I)/λ_i)^j.
pub fn real_power(r: f64, spec: &SpectralData) -> CMatrix {
    let n = spec.dimension();
    let mut out = CMatrix::zeros(n, n);
    for i in 0..spec.len() {
        let lambda = spec.eigenvalues[i];
        let scaled = spec.shifted(i) / lambda;
        let mut term = identity(n);
        let mut series = identity(n);
        for j in 1..spec.multiplicities[i] {
            term = &term * &scaled;
            series += &term * c(binomial(r, j), 0.0);
        }
        out += &spec.projections[i] * series * principal_powf(lambda, r);
    }
    out
}

/// Principal logarithm Σ P_i [Log λ_i I + Σ_j (-1)^{j+1}/j ((M - λ_i I)/λ_i)^j].
pub fn principal_log(spec: &SpectralData) -> CMatrix {
    let n = spec.dimension();
    let mut out = CMatrix::zeros(n, n);
    for i in 0..spec.len() {
        let lambda = spec.eigenvalues[i];
        let scaled = spec.shifted(i) / lambda;
        let mut term = identity(n);
        let mut series = identity(n) * principal_ln(lambda);
        for j in 1..spec.multiplicities[i] {
            term = &term * &scaled;
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            series += &term * c(sign / j as f64, 0.0);
        }
        out += &spec.projections[i] * series;
    }
    out
}

pub use crate::linalg::expm;

/// Column `j` of P_i (M - λ_i I)^{n_i - r}, unit length.  `j` maximises the
/// matching column of P_i (M - λ_i I)^{n_i - 1}, so the vector has exact rank
/// `r` and vectors of successive ranks form a chain.
pub fn generalized_eigenvector(spec: &SpectralData, i: usize, r: usize) -> Result<CVector> {
    spec.check_index(i)?;
    let ni = spec.nilpotent_indices[i];
    if r == 0 || r > ni {
        return Err(SpectralError::BadRank { rank: r, max: ni });
    }
    let shifted = spec.shifted(i);
    let bottom = &spec.projections[i] * integer_power(&shifted, (ni - 1) as u32);
    let (best, norm) = (0..bottom.ncols())
        .map(|j| (j, bottom.column(j).norm()))
        .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    if norm <= 1e-10 * spec.norm.max(1.0).powi((ni - 1) as i32) {
        return Err(SpectralError::ZeroVector);
    }
    let m = &spec.projections[i] * integer_power(&shifted, (ni - r) as u32);
    let v = m.column(best).into_owned();
    let len = v.norm();
    Ok(v / c(len, 0.0))
}

/// Eigenvectors of every cluster (one per cluster), unit length.
pub fn eigenvectors(spec: &SpectralData) -> Result<Vec<CVector>> {
    (0..spec.len())
        .map(|i| generalized_eigenvector(spec, i, 1))
        .collect()
}

/// Jordan chains: `transform` C with C⁻¹ M C = `jordan`.
#[derive(Debug, Clone)]
pub struct JordanForm {
    pub transform: CMatrix,
    pub jordan: CMatrix,
    /// (cluster index, block size) in column order.
    pub blocks: Vec<(usize, usize)>,
}

impl JordanForm {
    /// J^r from the block formula: λ^r C(r,j) λ^{-j} on the j-th superdiagonal.
    pub fn power(&self, r: f64, spec: &SpectralData) -> CMatrix {
        let n = self.jordan.nrows();
        let mut out = CMatrix::zeros(n, n);
        let mut start = 0;
        for &(cluster, size) in &self.blocks {
            let lambda = spec.eigenvalues[cluster];
            let lr = principal_powf(lambda, r);
            for j in 0..size {
                let v = lr * binomial(r, j) / lambda.powi(j as i32);
                for k in 0..size - j {
                    out[(start + k, start + k + j)] = v;
                }
            }
            start += size;
        }
        out
    }
}

pub fn jordan_form(spec: &SpectralData) -> Result<JordanForm> {
    let n = spec.dimension();
    let mut columns: Vec<CVector> = Vec::with_capacity(n);
    let mut blocks = Vec::new();
    let scale = spec.norm.max(1.0);
    let rel = 10.0 * spec.cluster_tol / spec.norm;
    for i in 0..spec.len() {
        let k = spec.restricted_nilpotent(i);
        let m = spec.multiplicities[i];
        let top = spec.nilpotent_indices[i];
        let powers: Vec<CMatrix> = (0..=top + 1).map(|j| integer_power(&k, j as u32)).collect();
        let tol = |j: usize| rel * scale.powi(j as i32);
        let ranks: Vec<usize> = (0..=top + 1)
            .map(|j| if j == 0 { m } else if j > top { 0 } else { rank(&powers[j], tol(j)) })
            .collect();
        // chains in cluster coordinates, stored top vector first
        let mut chains: Vec<Vec<CVector>> = Vec::new();
        for s in (1..=top).rev() {
            let count = (ranks[s - 1] - ranks[s]).saturating_sub(ranks[s] - ranks[s + 1]);
            if count == 0 {
                continue;
            }
            let kernel_s = smallest_right_singular_space(&powers[s], m - ranks[s]);
            let mut avoid: Vec<CVector> = Vec::new();
            if s > 1 {
                let kernel_prev = smallest_right_singular_space(&powers[s - 1], m - ranks[s - 1]);
                avoid.extend(kernel_prev.column_iter().map(|c| c.into_owned()));
            }
            for chain in &chains {
                let h = chain.len();
                avoid.push(chain[h - s].clone());
            }
            let mut candidates = kernel_s.clone();
            if !avoid.is_empty() {
                let mut a = CMatrix::zeros(m, avoid.len());
                for (j, v) in avoid.iter().enumerate() {
                    a.set_column(j, v);
                }
                let q = column_space(&a, 1e-10, m);
                candidates = &candidates - &q * (q.adjoint() * &candidates);
            }
            let tops = column_space(&candidates, 1e-8, count);
            if tops.ncols() < count {
                return Err(SpectralError::IllConditioned);
            }
            for t in tops.column_iter() {
                let mut chain = vec![t.into_owned()];
                for _ in 1..s {
                    let next = &k * chain.last().unwrap();
                    chain.push(next);
                }
                chains.push(chain);
            }
        }
        chains.sort_by(|a, b| b.len().cmp(&a.len()));
        for chain in chains {
            blocks.push((i, chain.len()));
            for v in chain.iter().rev() {
                columns.push(&spec.bases[i] * v);
            }
        }
    }
    if columns.len() != n {
        return Err(SpectralError::IllConditioned);
    }
    let transform = CMatrix::from_columns(&columns);
    let mut jordan = CMatrix::zeros(n, n);
    let mut start = 0;
    for &(cluster, size) in &blocks {
        for k in 0..size {
            jordan[(start + k, start + k)] = spec.eigenvalues[cluster];
            if k + 1 < size {
                jordan[(start + k, start + k + 1)] = ONE;
            }
        }
        start += size;
    }
    Ok(JordanForm {
        transform,
        jordan,
        blocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{from_real_rows, relative_distance};
    use proptest::prelude::*;

    fn diag(v: &[f64]) -> CMatrix {
        let n = v.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, &x) in v.iter().enumerate() {
            m[(i, i)] = c(x, 0.0);
        }
        m
    }

    fn close(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
        frobenius(&(a - b)) <= tol
    }

    /// Partial-fraction construction of the projector for distinct eigenvalues:
    /// P_i = Π_{j≠i} (M - λ_j I)/(λ_i - λ_j).
    fn lagrange_projector(m: &CMatrix, lambdas: &[Complex64], i: usize) -> CMatrix {
        let n = m.nrows();
        let mut p = identity(n);
        for (j, &l) in lambdas.iter().enumerate() {
            if j != i {
                p = p * ((m - identity(n) * l) / (lambdas[i] - l));
            }
        }
        p
    }

    #[test]
    fn diagonal_projectors() {
        let m = diag(&[2.0, 3.0]);
        let s = SpectralData::new(&m).unwrap();
        assert_eq!(s.len(), 2);
        // decreasing modulus
        assert!((s.eigenvalues[0] - c(3.0, 0.0)).norm() < 1e-14);
        assert!(close(&s.projections[1], &diag(&[1.0, 0.0]), 1e-12));
        assert!(close(&s.projections[0], &diag(&[0.0, 1.0]), 1e-12));
        // -(M - 3I) from the partial-fraction route
        let oracle = -(&m - identity(2) * c(3.0, 0.0));
        assert!(close(&s.projections[1], &oracle, 1e-12));
    }

    #[test]
    fn identity_and_jordan_block() {
        let s = SpectralData::new(&identity(2)).unwrap();
        assert_eq!(s.multiplicities, vec![2]);
        assert_eq!(s.nilpotent_indices, vec![1]);
        assert!(close(&s.projections[0], &identity(2), 1e-12));

        let j = from_real_rows(2, &[1.5, 1.0, 0.0, 1.5]);
        let s = SpectralData::new(&j).unwrap();
        assert_eq!(s.multiplicities, vec![2]);
        assert_eq!(s.nilpotent_indices, vec![2]);
        assert!(close(&s.projections[0], &identity(2), 1e-12));
    }

    #[test]
    fn singular_rejected() {
        let m = from_real_rows(2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(
            SpectralData::new(&m),
            Err(SpectralError::Singular { .. })
        ));
        assert!(matches!(
            SpectralData::new(&CMatrix::zeros(2, 3)),
            Err(SpectralError::NotSquare { .. })
        ));
    }

    #[test]
    fn power_examples() {
        let s = SpectralData::new(&diag(&[4.0, 9.0])).unwrap();
        assert!(close(&real_power(0.5, &s), &diag(&[2.0, 3.0]), 1e-13));

        let s = SpectralData::new(&diag(&[0.75, 0.75])).unwrap();
        let h = 3f64.sqrt() / 2.0;
        assert!(close(&real_power(0.5, &s), &diag(&[h, h]), 1e-14));

        let lambda: f64 = 1.7;
        let j = from_real_rows(2, &[lambda, 1.0, 0.0, lambda]);
        let s = SpectralData::new(&j).unwrap();
        for &r in &[0.5, -1.3, 2.25, 3.0] {
            let expect = from_real_rows(
                2,
                &[lambda.powf(r), r * lambda.powf(r - 1.0), 0.0, lambda.powf(r)],
            );
            assert!(close(&real_power(r, &s), &expect, 1e-12), "r={r}");
        }
        let half = real_power(0.5, &s);
        assert!(close(&(&half * &half), &j, 1e-12));
    }

    #[test]
    fn negative_multiplier_power_is_complex() {
        let l = -2.0 * (-3f64).exp();
        let s = SpectralData::new(&from_real_rows(2, &[l, 1.0, 0.0, l])).unwrap();
        let half = real_power(0.5, &s);
        assert!(half[(0, 0)].im > 0.0);
        assert!(close(&(&half * &half), s.matrix(), 1e-13));
    }

    #[test]
    fn log_examples() {
        let s = SpectralData::new(&identity(2)).unwrap();
        assert!(frobenius(&principal_log(&s)) < 1e-15);
        let e = std::f64::consts::E;
        let s = SpectralData::new(&diag(&[e, e * e])).unwrap();
        assert!(close(&principal_log(&s), &diag(&[1.0, 2.0]), 1e-14));

        let tau = 2.0 * std::f64::consts::PI;
        let q = (-tau).exp();
        let m = from_real_rows(2, &[q, 0.0, (1.0 - q) / 2.0, 1.0]);
        let s = SpectralData::new(&m).unwrap();
        let r = principal_log(&s) / c(tau, 0.0);
        assert!(close(&r, &from_real_rows(2, &[-1.0, 0.0, 0.5, 0.0]), 1e-12));
        assert!(relative_distance(&expm(&principal_log(&s)), &m) < 1e-12);
    }

    #[test]
    fn generalized_eigenvector_examples() {
        let s = SpectralData::new(&diag(&[2.0, 3.0])).unwrap();
        let v = generalized_eigenvector(&s, 1, 1).unwrap();
        assert!(v[1].norm() < 1e-14 && (v[0].norm() - 1.0).abs() < 1e-14);

        let lambda = c(0.8, 0.0);
        let j = from_real_rows(2, &[0.8, 1.0, 0.0, 0.8]);
        let s = SpectralData::new(&j).unwrap();
        let v1 = generalized_eigenvector(&s, 0, 1).unwrap();
        assert!(v1[1].norm() < 1e-14);
        let v2 = generalized_eigenvector(&s, 0, 2).unwrap();
        let w = (&j - identity(2) * lambda) * &v2;
        // w parallel to v1
        let cross = w[0] * v1[1] - w[1] * v1[0];
        assert!(cross.norm() < 1e-12 && w.norm() > 1e-6);
        assert!(matches!(
            generalized_eigenvector(&s, 0, 3),
            Err(SpectralError::BadRank { .. })
        ));
    }

    #[test]
    fn jordan_form_of_mixed_structure() {
        // blocks of size 2 and 1 for eigenvalue 2, plus a simple eigenvalue -1
        let j = from_real_rows(
            4,
            &[
                2.0, 1.0, 0.0, 0.0, //
                0.0, 2.0, 0.0, 0.0, //
                0.0, 0.0, 2.0, 0.0, //
                0.0, 0.0, 0.0, -1.0,
            ],
        );
        let t = from_real_rows(
            4,
            &[
                1.0, 2.0, 0.0, 1.0, //
                0.0, 1.0, 1.0, 0.0, //
                1.0, 0.0, 1.0, 2.0, //
                0.0, 1.0, 0.0, 1.0,
            ],
        );
        let m = &t * &j * inverse(&t).unwrap();
        let s = SpectralData::new(&m).unwrap();
        assert_eq!(s.multiplicities, vec![3, 1]);
        assert_eq!(s.nilpotent_indices, vec![2, 1]);
        let jf = jordan_form(&s).unwrap();
        let cinv = inverse(&jf.transform).unwrap();
        let got = &cinv * &m * &jf.transform;
        assert!(relative_distance(&got, &jf.jordan) < 1e-9, "{got} {} {:?}", jf.jordan, s.eigenvalues);
        for &r in &[0.5, -0.7, 1.5] {
            let lhs = &cinv * real_power(r, &s) * &jf.transform;
            assert!(relative_distance(&lhs, &jf.power(r, &s)) < 1e-9);
        }
    }

    fn random_matrix(n: usize, entries: &[f64]) -> CMatrix {
        CMatrix::from_fn(n, n, |i, j| c(entries[2 * (i * n + j)], entries[2 * (i * n + j) + 1]))
    }

    fn well_separated(s: &SpectralData) -> bool {
        let mut min = f64::INFINITY;
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                min = min.min((s.eigenvalues[i] - s.eigenvalues[j]).norm());
            }
        }
        s.len() == s.dimension() && min > 1e-2 * s.norm()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn projector_identities(n in 1usize..=4, entries in prop::collection::vec(-2.0f64..2.0, 32)) {
            let m = random_matrix(n, &entries);
            prop_assume!(spectral_norm(&m) > 0.1);
            let s = match SpectralData::new(&m) { Ok(s) => s, Err(_) => return Ok(()) };
            prop_assume!(well_separated(&s));
            let mut sum = CMatrix::zeros(n, n);
            for i in 0..s.len() {
                sum += &s.projections[i];
                for j in 0..s.len() {
                    let pp = &s.projections[i] * &s.projections[j];
                    let expect = if i == j { s.projections[i].clone() } else { CMatrix::zeros(n, n) };
                    prop_assert!(frobenius(&(pp - expect)) < 1e-10);
                }
                let ann = &s.projections[i] * integer_power(&s.shifted(i), s.multiplicities[i] as u32);
                prop_assert!(frobenius(&ann) < 1e-10);
            }
            prop_assert!(frobenius(&(sum - identity(n))) < 1e-10);
            if n <= 3 && s.len() == n {
                for i in 0..n {
                    let oracle = lagrange_projector(&m, &s.eigenvalues, i);
                    prop_assert!(frobenius(&(&oracle - &s.projections[i])) < 1e-8);
                }
            }
        }

        #[test]
        fn power_laws(n in 1usize..=4, entries in prop::collection::vec(-2.0f64..2.0, 32),
                      r in -2.0f64..2.0, t in -2.0f64..2.0) {
            let m = random_matrix(n, &entries) + identity(n) * c(3.0, 0.0);
            let s = match SpectralData::new(&m) { Ok(s) => s, Err(_) => return Ok(()) };
            let scale = frobenius(&m).max(1.0);
            let prod = real_power(r, &s) * real_power(t, &s);
            prop_assert!(relative_distance(&prod, &real_power(r + t, &s)) < 1e-9 * scale);
            for k in 0..=4u32 {
                prop_assert!(relative_distance(&real_power(k as f64, &s), &integer_power(&m, k)) < 1e-10 * scale.powi(k as i32));
            }
            for q in 2..=4u32 {
                let root = real_power(1.0 / q as f64, &s);
                prop_assert!(relative_distance(&integer_power(&root, q), &m) < 1e-8);
            }
            prop_assert!(relative_distance(&expm(&principal_log(&s)), &m) < 1e-8);
            for i in 0..s.len() {
                let v = generalized_eigenvector(&s, i, 1).unwrap();
                let lhs = real_power(r, &s) * &v;
                let rhs = &v * principal_powf(s.eigenvalues[i], r);
                prop_assert!((lhs - rhs).norm() <= 1e-8 * v.norm());
            }
        }

        #[test]
        fn defective_similarity(lambda in 0.3f64..3.0, sign in prop::bool::ANY,
                                entries in prop::collection::vec(-1.0f64..1.0, 18), r in -2.0f64..2.0) {
            let l = if sign { lambda } else { -lambda };
            let j = from_real_rows(3, &[l, 1.0, 0.0, 0.0, l, 0.0, 0.0, 0.0, 0.5 * l + 4.0]);
            let t = random_matrix(3, &entries) + identity(3) * c(2.5, 0.0);
            let tinv = inverse(&t).unwrap();
            let m = &t * &j * &tinv;
            let s = SpectralData::new(&m).unwrap();
            prop_assert_eq!(s.nilpotent_indices.iter().max().copied(), Some(2));
            let jf = jordan_form(&s).unwrap();
            let cinv = inverse(&jf.transform).unwrap();
            let lhs = &cinv * real_power(r, &s) * &jf.transform;
            prop_assert!(relative_distance(&lhs, &jf.power(r, &s)) < 1e-7);
        }
    }
}
