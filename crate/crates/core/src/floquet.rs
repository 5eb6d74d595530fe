//! Monodromy, R(t), e_R, the periodic factor L(t), Floquet exponents,
//! alternate decompositions, periodic solutions, modal vectors and stability.

use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::hilger::{self, circle_minus, principal_ln, principal_powf, unit_rotation_rate, HilgerError};
use crate::linalg::{c, frobenius, identity, inverse, rank, smallest_right_singular_space, solve, CMatrix, CVector, ONE};
use crate::spectral::{principal_log, real_power, SpectralData, SpectralError};
use crate::timescale::{PeriodicTimeScale, Segment, TimePoint, TimeScaleError, DEFAULT_TOL};
use crate::transition::{
    transition_table, variation_of_constants, Forcing, Fundamental, LinearDynamicSystem, SolverOptions, TransitionError,
};

/// Band around 1 (and the unit circle) used by the stability and periodicity tests.
pub const UNIT_TOL: f64 = 1e-7;
/// Relative singular-value threshold for geometric multiplicities.
pub const RANK_TOL_REL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FloquetError {
    #[error(transparent)]
    Transition(#[from] TransitionError),
    #[error(transparent)]
    TimeScale(#[from] TimeScaleError),
    #[error(transparent)]
    Hilger(#[from] HilgerError),
    #[error("monodromy matrix is singular (the system is not regressive)")]
    SingularMonodromy,
    #[error(transparent)]
    Spectral(SpectralError),
    #[error("I - M is singular: multiplier {multiplier} is 1, so the homogeneous system has a p-periodic solution")]
    HomogeneousPeriodic { multiplier: Complex64 },
    #[error("no eigenvector with index {index} (there are {count})")]
    NoEigenvector { index: usize, count: usize },
    #[error("scalar map {index} is not regressive at t={t}")]
    NonRegressiveExponent { index: usize, t: f64 },
    #[error("expected {expected} scalar maps, got {found}")]
    Dimension { expected: usize, found: usize },
    #[error("non-finite value at t={t}")]
    NonFinite { t: f64 },
}

impl From<SpectralError> for FloquetError {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::Singular { .. } => FloquetError::SingularMonodromy,
            other => FloquetError::Spectral(other),
        }
    }
}

pub type Result<T> = std::result::Result<T, FloquetError>;

fn locate(ts: &PeriodicTimeScale, t: f64) -> Result<TimePoint> {
    Ok(ts.locate(t, DEFAULT_TOL).ok_or(TimeScaleError::NotInTimeScale(t))?)
}

/// Monodromy matrix with its spectral data, anchored at `t0`.
#[derive(Debug, Clone)]
pub struct FloquetData {
    sys: LinearDynamicSystem,
    t0: TimePoint,
    monodromy: CMatrix,
    spectrum: SpectralData,
    /// `Log M / p`
    log_rate: CMatrix,
    opts: SolverOptions,
}

impl FloquetData {
    pub fn new(sys: &LinearDynamicSystem, t0: &TimePoint, opts: &SolverOptions) -> Result<Self> {
        let monodromy = sys.monodromy_matrix(t0, opts)?;
        let spectrum = SpectralData::new(&monodromy)?;
        let log_rate = principal_log(&spectrum) / c(sys.period(), 0.0);
        Ok(FloquetData {
            sys: sys.clone(),
            t0: *t0,
            monodromy,
            spectrum,
            log_rate,
            opts: *opts,
        })
    }

    pub fn system(&self) -> &LinearDynamicSystem {
        &self.sys
    }

    pub fn timescale(&self) -> &PeriodicTimeScale {
        self.sys.timescale()
    }

    pub fn t0(&self) -> &TimePoint {
        &self.t0
    }

    pub fn monodromy(&self) -> &CMatrix {
        &self.monodromy
    }

    pub fn spectrum(&self) -> &SpectralData {
        &self.spectrum
    }

    pub fn period(&self) -> f64 {
        self.sys.period()
    }

    pub fn options(&self) -> &SolverOptions {
        &self.opts
    }

    pub fn dimension(&self) -> usize {
        self.sys.dimension()
    }

    /// Multipliers with algebraic multiplicity, ordered by cluster.
    pub fn multipliers(&self) -> Vec<Complex64> {
        self.spectrum.eigenvalue_multiset()
    }

    pub fn locate(&self, t: f64) -> Result<TimePoint> {
        locate(self.timescale(), t)
    }

    /// `R` for graininess `mu`: `(M^{μ/p} − I)/μ`, or `Log M / p` at μ = 0.
    pub fn r_matrix_for(&self, mu: f64) -> CMatrix {
        if mu > 0.0 {
            let n = self.dimension();
            (real_power(mu / self.period(), &self.spectrum) - identity(n)) / c(mu, 0.0)
        } else {
            self.log_rate.clone()
        }
    }

    pub fn r_matrix(&self, t: &TimePoint) -> CMatrix {
        self.r_matrix_for(self.timescale().mu(t))
    }

    /// `e_R(t, s) = M^{(t−s)/p}`, the exponent taken from the point structure.
    pub fn exp_r(&self, t: &TimePoint, s: &TimePoint) -> CMatrix {
        if t.cmp_position(s) == std::cmp::Ordering::Equal {
            return identity(self.dimension());
        }
        real_power(self.timescale().periods_between(s, t), &self.spectrum)
    }

    /// `L(t) = Φ(t, t0) e_R(t, t0)^{-1}`.
    pub fn lyapunov_factor(&self, t: &TimePoint) -> Result<CMatrix> {
        if t.cmp_position(&self.t0) == std::cmp::Ordering::Equal {
            return Ok(identity(self.dimension()));
        }
        let phi = self.sys.transition(t, &self.t0, &self.opts)?;
        Ok(self.factor_from_phi(phi, t))
    }

    /// `L(t)` using a precomputed fundamental matrix.
    pub fn lyapunov_factor_with(&self, fund: &Fundamental, t: &TimePoint) -> Result<CMatrix> {
        if t.cmp_position(&self.t0) == std::cmp::Ordering::Equal {
            return Ok(identity(self.dimension()));
        }
        let phi = if fund.start().cmp_position(&self.t0) == std::cmp::Ordering::Equal {
            fund.at(t)?
        } else {
            fund.between(t, &self.t0)?
        };
        Ok(self.factor_from_phi(phi, t))
    }

    fn factor_from_phi(&self, phi: CMatrix, t: &TimePoint) -> CMatrix {
        let r = -self.timescale().periods_between(&self.t0, t);
        phi * real_power(r, &self.spectrum)
    }

    /// Fundamental matrix from `from` to `to` with checkpoints every few steps.
    pub fn fundamental(&self, from: &TimePoint, to: &TimePoint) -> Result<Fundamental> {
        let spacing = (16.0 * self.opts.h_max).max(self.period() / 64.0);
        Ok(Fundamental::new(&self.sys, from, to, spacing, &self.opts)?)
    }

    /// Floquet exponent of each multiplier cluster for graininess `mu`.
    pub fn exponents_for(&self, mu: f64) -> Vec<Complex64> {
        self.spectrum
            .eigenvalues
            .iter()
            .map(|&l| exponent_of(l, mu, self.period()))
            .collect()
    }

    pub fn exponents(&self, t: &TimePoint) -> Vec<Complex64> {
        self.exponents_for(self.timescale().mu(t))
    }

    /// `x^Δ = R(t)x` on the same time scale.
    pub fn r_system(&self) -> Result<LinearDynamicSystem> {
        let fd = self.clone();
        let n = self.dimension();
        Ok(LinearDynamicSystem::from_fn(self.timescale().clone(), n, move |ts, tp| {
            Ok(fd.r_matrix_for(ts.mu(tp)))
        })?)
    }

    /// Orthonormal eigenvectors of the multiplier cluster `i`.
    pub fn eigenspace(&self, i: usize) -> CMatrix {
        let shifted = &self.monodromy - identity(self.dimension()) * self.spectrum.eigenvalues[i];
        let g = geometric_multiplicity(&self.monodromy, self.spectrum.eigenvalues[i]);
        smallest_right_singular_space(&shifted, g.max(1))
    }

    /// All eigenvectors, paired with their multiplier cluster.
    pub fn eigenvectors(&self) -> Vec<(usize, CVector)> {
        let mut out = Vec::new();
        for i in 0..self.spectrum.len() {
            let basis = self.eigenspace(i);
            for j in 0..basis.ncols() {
                out.push((i, basis.column(j).into_owned()));
            }
        }
        out
    }

    /// Alternate decomposition with `R̃ = R ⊖ i̊(2πk/p) I`.
    pub fn shifted(&self, k: i64) -> ShiftedDecomposition {
        ShiftedDecomposition {
            fd: self.clone(),
            k,
            omega: 2.0 * std::f64::consts::PI * k as f64 / self.period(),
        }
    }
}

/// `(λ^{μ/p} − 1)/μ`, or `Log λ / p` at μ = 0.
pub fn exponent_of(lambda: Complex64, mu: f64, p: f64) -> Complex64 {
    if mu > 0.0 {
        (principal_powf(lambda, mu / p) - ONE) / mu
    } else {
        principal_ln(lambda) / p
    }
}

/// `n − rank(M − λI)` with singular values below `RANK_TOL_REL·‖M‖` treated as zero.
pub fn geometric_multiplicity(m: &CMatrix, lambda: Complex64) -> usize {
    let n = m.nrows();
    let tol = RANK_TOL_REL * crate::linalg::spectral_norm(m).max(f64::MIN_POSITIVE);
    n - rank(&(m - identity(n) * lambda), tol)
}

pub fn monodromy(sys: &LinearDynamicSystem, t0: f64, opts: &SolverOptions) -> Result<FloquetData> {
    let tp = locate(sys.timescale(), t0)?;
    FloquetData::new(sys, &tp, opts)
}

pub fn r_matrix(fd: &FloquetData, t: f64) -> Result<CMatrix> {
    Ok(fd.r_matrix(&fd.locate(t)?))
}

pub fn exp_r(fd: &FloquetData, t: f64, s: f64) -> Result<CMatrix> {
    Ok(fd.exp_r(&fd.locate(t)?, &fd.locate(s)?))
}

pub fn lyapunov_factor(fd: &FloquetData, t: f64) -> Result<CMatrix> {
    fd.lyapunov_factor(&fd.locate(t)?)
}

pub fn floquet_exponents(fd: &FloquetData, t: f64) -> Result<Vec<Complex64>> {
    Ok(fd.exponents(&fd.locate(t)?))
}

/// Points `from + span·j/(count−1)`, each rounded down onto the time scale,
/// without duplicates.
pub fn sample_grid(ts: &PeriodicTimeScale, from: &TimePoint, span: f64, count: usize) -> Vec<TimePoint> {
    let start = ts.time(from);
    let mut out: Vec<TimePoint> = Vec::with_capacity(count);
    for j in 0..count.max(1) {
        let t = if count <= 1 {
            start
        } else {
            start + span * j as f64 / (count - 1) as f64
        };
        let mut tp = ts.floor_point(t, DEFAULT_TOL);
        if tp.cmp_position(from) == std::cmp::Ordering::Less {
            tp = *from;
        }
        if out
            .last()
            .map_or(true, |last| last.cmp_position(&tp) == std::cmp::Ordering::Less)
        {
            out.push(tp);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionReport {
    /// max ‖Φ_A(t,τ) − L(t) e_R(t,τ) L⁻¹(τ)‖_F
    pub max_residual: f64,
    /// the same, divided by max(1, ‖Φ_A(t,τ)‖_F)
    pub max_relative: f64,
    pub pairs: usize,
}

/// Checks the decomposition on every pair of grid points.  `Φ_A(t, τ)` is
/// integrated from each `τ` independently of the fundamental matrix behind `L`.
pub fn verify_decomposition(fd: &FloquetData, grid: &[TimePoint]) -> Result<DecompositionReport> {
    let mut pts = grid.to_vec();
    pts.sort_by(|a, b| a.cmp_position(b));
    pts.dedup_by(|a, b| a.cmp_position(b) == std::cmp::Ordering::Equal);
    if pts.is_empty() {
        return Ok(DecompositionReport {
            max_residual: 0.0,
            max_relative: 0.0,
            pairs: 0,
        });
    }
    let sys = fd.system();
    let opts = fd.options();
    let lo = if pts[0].cmp_position(fd.t0()) == std::cmp::Ordering::Less {
        pts[0]
    } else {
        *fd.t0()
    };
    let fund = fd.fundamental(&lo, pts.last().unwrap())?;
    let ls = pts
        .iter()
        .map(|tp| fd.lyapunov_factor_with(&fund, tp))
        .collect::<Result<Vec<_>>>()?;
    let l_inv = ls
        .iter()
        .map(|l| inverse(l).ok_or(TransitionError::Singular))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let table = transition_table(sys, &pts, opts)?;
    let mut report = DecompositionReport {
        max_residual: 0.0,
        max_relative: 0.0,
        pairs: 0,
    };
    for (i, t) in pts.iter().enumerate() {
        for (j, tau) in pts.iter().enumerate() {
            let phi = &table[i][j];
            let model = &ls[i] * fd.exp_r(t, tau) * &l_inv[j];
            let residual = frobenius(&(phi - model));
            report.max_residual = report.max_residual.max(residual);
            report.max_relative = report.max_relative.max(residual / frobenius(phi).max(1.0));
            report.pairs += 1;
        }
    }
    Ok(report)
}

/// max ‖L(t + p) − L(t)‖_F over the grid.
pub fn l_periodicity_residual(fd: &FloquetData, grid: &[TimePoint]) -> Result<f64> {
    if grid.is_empty() {
        return Ok(0.0);
    }
    let ts = fd.timescale();
    let mut lo = *fd.t0();
    let mut hi = *fd.t0();
    for tp in grid {
        if tp.cmp_position(&lo) == std::cmp::Ordering::Less {
            lo = *tp;
        }
        let shifted = ts.shift(tp, 1);
        if shifted.cmp_position(&hi) == std::cmp::Ordering::Greater {
            hi = shifted;
        }
    }
    let fund = fd.fundamental(&lo, &hi)?;
    let mut worst: f64 = 0.0;
    for tp in grid {
        let a = fd.lyapunov_factor_with(&fund, tp)?;
        let b = fd.lyapunov_factor_with(&fund, &ts.shift(tp, 1))?;
        worst = worst.max(frobenius(&(b - a)));
    }
    Ok(worst)
}

/// Largest distance between two equally long multisets under the best pairing
/// (exhaustive for up to 8 elements, greedy beyond).
pub fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    if a.len() <= 8 {
        let mut perm: Vec<usize> = (0..b.len()).collect();
        let mut best = f64::INFINITY;
        permute(&mut perm, 0, &mut |p| {
            let d = a.iter().zip(p).map(|(x, &j)| (x - b[j]).norm()).fold(0.0, f64::max);
            best = best.min(d);
        });
        return best;
    }
    let mut left: Vec<Complex64> = b.to_vec();
    let mut worst: f64 = 0.0;
    for x in a {
        let (k, d) = left
            .iter()
            .enumerate()
            .map(|(k, y)| (k, (x - y).norm()))
            .min_by(|u, v| u.1.total_cmp(&v.1))
            .unwrap();
        worst = worst.max(d);
        left.swap_remove(k);
    }
    worst
}

fn permute(p: &mut Vec<usize>, k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == p.len() {
        visit(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, visit);
        p.swap(k, i);
    }
}

/// max over the grid of the distance between the spectrum of `e_R(t, t0)` and
/// `{e_{γ_i}(t, t0)}`, the scalar exponentials integrated on the time scale.
pub fn spectral_mapping_residual(fd: &FloquetData, grid: &[TimePoint]) -> Result<f64> {
    let ts = fd.timescale();
    let p = fd.period();
    let mut worst: f64 = 0.0;
    for t in grid {
        let e = fd.exp_r(t, fd.t0());
        let eig = SpectralData::new(&e)?.eigenvalue_multiset();
        let mut mapped = Vec::new();
        for (i, &lambda) in fd.spectrum().eigenvalues.iter().enumerate() {
            let v = hilger::scalar_exp_between(
                ts,
                |tp| exponent_of(lambda, ts.mu(tp), p),
                fd.t0(),
                t,
                fd.options().h_max,
            )?;
            mapped.extend(std::iter::repeat(v).take(fd.spectrum().multiplicities[i]));
        }
        worst = worst.max(multiset_distance(&eig, &mapped));
    }
    Ok(worst)
}

/// max over multipliers and `k` of `|e_{γ ⊕ i̊(2πk/p)}(t0 + p, t0) − λ|`.
pub fn exponent_shift_residual(fd: &FloquetData, ks: std::ops::RangeInclusive<i64>) -> Result<f64> {
    let ts = fd.timescale();
    let p = fd.period();
    let end = ts.shift(fd.t0(), 1);
    let mut worst: f64 = 0.0;
    for &lambda in &fd.spectrum().eigenvalues {
        for k in ks.clone() {
            let omega = 2.0 * std::f64::consts::PI * k as f64 / p;
            let v = hilger::scalar_exp_between(
                ts,
                |tp| {
                    let mu = ts.mu(tp);
                    hilger::circle_plus(exponent_of(lambda, mu, p), unit_rotation_rate(omega, mu), mu)
                },
                fd.t0(),
                &end,
                fd.options().h_max,
            )?;
            worst = worst.max((v - lambda).norm());
        }
    }
    Ok(worst)
}

/// max ‖R(t)v − γ(t)v‖ / ‖v‖ over eigenvectors `v` of `M` and grid points.
pub fn shared_eigenvector_residual(fd: &FloquetData, grid: &[TimePoint]) -> f64 {
    let mut worst: f64 = 0.0;
    for t in grid {
        let r = fd.r_matrix(t);
        let gammas = fd.exponents(t);
        for (cluster, v) in fd.eigenvectors() {
            let res = (&r * &v - &v * gammas[cluster]).norm() / v.norm();
            worst = worst.max(res);
        }
    }
    worst
}

/// max over modes and grid points of ‖x(t + p) − λ x(t)‖ / max(1, ‖x(t)‖).
pub fn mode_repeat_residual(fd: &FloquetData, grid: &[TimePoint]) -> Result<f64> {
    let ts = fd.timescale();
    let mut worst: f64 = 0.0;
    for i in 0..fd.eigenvectors().len() {
        let mode = mode_solution(fd, i)?;
        for t in grid {
            let x = mode.at(t)?;
            let y = mode.at(&ts.shift(t, 1))?;
            worst = worst.max((y - &x * mode.multiplier).norm() / x.norm().max(1.0));
        }
    }
    Ok(worst)
}

/// `(R̃, L̃)` with `R̃(t) = R(t) ⊖ i̊ω I`, `L̃(t) = L(t) e_{i̊ω}(t, t0)`, `ω = 2πk/p`.
#[derive(Debug, Clone)]
pub struct ShiftedDecomposition {
    fd: FloquetData,
    k: i64,
    omega: f64,
}

impl ShiftedDecomposition {
    pub fn k(&self) -> i64 {
        self.k
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// `i̊ω` for graininess `mu`.
    pub fn rotation(&self, mu: f64) -> Complex64 {
        unit_rotation_rate(self.omega, mu)
    }

    pub fn r_tilde_for(&self, mu: f64) -> CMatrix {
        let w = self.rotation(mu);
        let n = self.fd.dimension();
        (self.fd.r_matrix_for(mu) - identity(n) * w) / (ONE + w * mu)
    }

    pub fn r_tilde(&self, t: &TimePoint) -> CMatrix {
        self.r_tilde_for(self.fd.timescale().mu(t))
    }

    /// `e_{i̊ω}(t, s)`
    pub fn rotation_exp(&self, t: &TimePoint, s: &TimePoint) -> Result<Complex64> {
        let ts = self.fd.timescale();
        Ok(hilger::scalar_exp_between(
            ts,
            |tp| self.rotation(ts.mu(tp)),
            s,
            t,
            self.fd.options().h_max,
        )?)
    }

    pub fn l_tilde(&self, t: &TimePoint) -> Result<CMatrix> {
        let l = self.fd.lyapunov_factor(t)?;
        Ok(l * self.rotation_exp(t, self.fd.t0())?)
    }

    /// `x^Δ = R̃(t)x`; its transition matrix is `e_R̃`.
    pub fn r_tilde_system(&self) -> Result<LinearDynamicSystem> {
        let me = self.clone();
        let n = self.fd.dimension();
        Ok(LinearDynamicSystem::from_fn(self.fd.timescale().clone(), n, move |ts, tp| {
            Ok(me.r_tilde_for(ts.mu(tp)))
        })?)
    }

    /// Exponents `γ_i ⊖ i̊ω` for graininess `mu`.
    pub fn exponents_for(&self, mu: f64) -> Result<Vec<Complex64>> {
        let w = self.rotation(mu);
        self.fd
            .exponents_for(mu)
            .into_iter()
            .map(|g| Ok(circle_minus(g, w, mu)?))
            .collect()
    }
}

pub fn shifted_decomposition(fd: &FloquetData, k: i64) -> ShiftedDecomposition {
    fd.shifted(k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityClass {
    ExponentiallyStable,
    Stable,
    UnstablePolynomial,
    UnstableExponential,
}

impl StabilityClass {
    pub fn as_str(self) -> &'static str {
        match self {
            StabilityClass::ExponentiallyStable => "exponentially_stable",
            StabilityClass::Stable => "stable",
            StabilityClass::UnstablePolynomial => "unstable_polynomial",
            StabilityClass::UnstableExponential => "unstable_exponential",
        }
    }
}

impl std::fmt::Display for StabilityClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierEvidence {
    pub value: Complex64,
    pub modulus: f64,
    pub algebraic_multiplicity: usize,
    pub geometric_multiplicity: usize,
    pub semisimple: bool,
    /// `||λ| − 1| <= tol`
    pub unit_modulus: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityVerdict {
    pub class: StabilityClass,
    pub evidence: Vec<MultiplierEvidence>,
    /// Some multiplier sits inside the tolerance band around the unit circle.
    pub marginal: bool,
}

/// Classification from moduli and semisimplicity of the unit-modulus multipliers.
pub fn classify_spectrum(spec: &SpectralData, tol: f64) -> StabilityVerdict {
    let m = spec.matrix();
    let evidence: Vec<MultiplierEvidence> = (0..spec.len())
        .map(|i| {
            let value = spec.eigenvalues[i];
            let algebraic = spec.multiplicities[i];
            let geometric = geometric_multiplicity(m, value);
            MultiplierEvidence {
                value,
                modulus: value.norm(),
                algebraic_multiplicity: algebraic,
                geometric_multiplicity: geometric,
                semisimple: geometric == algebraic,
                unit_modulus: (value.norm() - 1.0).abs() <= tol,
            }
        })
        .collect();
    let marginal = evidence.iter().any(|e| e.unit_modulus);
    let class = if evidence.iter().any(|e| e.modulus > 1.0 + tol) {
        StabilityClass::UnstableExponential
    } else if !marginal {
        StabilityClass::ExponentiallyStable
    } else if evidence.iter().filter(|e| e.unit_modulus).all(|e| e.semisimple) {
        StabilityClass::Stable
    } else {
        StabilityClass::UnstablePolynomial
    };
    StabilityVerdict {
        class,
        evidence,
        marginal,
    }
}

pub fn classify_stability(fd: &FloquetData, tol: f64) -> StabilityVerdict {
    classify_spectrum(fd.spectrum(), tol)
}

/// `x0` of a p-periodic solution of the homogeneous system, if a multiplier is 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSolution {
    pub x0: CVector,
    pub multiplier: Complex64,
}

pub fn periodic_solution_homogeneous(fd: &FloquetData, tol: f64) -> Option<PeriodicSolution> {
    let (i, lambda) = fd
        .spectrum()
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, l)| (**l - ONE).norm() <= tol)
        .min_by(|a, b| (*a.1 - ONE).norm().total_cmp(&(*b.1 - ONE).norm()))?;
    let z0 = fd.eigenspace(i).column(0).into_owned();
    // L(t0) = I, so x0 = L(t0) z0 = z0
    Some(PeriodicSolution {
        x0: z0,
        multiplier: *lambda,
    })
}

/// `x0 = (I − M)⁻¹ ∫_{t0}^{t0+p} Φ(t0+p, σ(τ)) f(τ) Δτ`.
pub fn periodic_solution_nonhomogeneous(
    sys: &LinearDynamicSystem,
    f: &Forcing,
    t0: &TimePoint,
    opts: &SolverOptions,
) -> Result<CVector> {
    let end = sys.timescale().shift(t0, 1);
    let (integral, m) = variation_of_constants(sys, f, t0, &end, opts)?;
    let n = sys.dimension();
    let a = identity(n) - &m;
    let sigma = crate::linalg::singular_values(&a);
    let smallest = *sigma.last().unwrap();
    if smallest <= 1e-10 * crate::linalg::spectral_norm(&m).max(1.0) {
        let spec = SpectralData::new(&m)?;
        let multiplier = spec
            .eigenvalues
            .iter()
            .copied()
            .min_by(|a, b| (*a - ONE).norm().total_cmp(&(*b - ONE).norm()))
            .unwrap_or(ONE);
        return Err(FloquetError::HomogeneousPeriodic { multiplier });
    }
    solve(&a, &integral).ok_or(FloquetError::HomogeneousPeriodic { multiplier: ONE })
}

/// `x(t) = e_γ(t, t0) L(t) v` for an eigenvector `v` of the monodromy.
#[derive(Debug, Clone)]
pub struct ModeSolution {
    fd: FloquetData,
    pub cluster: usize,
    pub multiplier: Complex64,
    pub v: CVector,
}

impl ModeSolution {
    pub fn exponent(&self, mu: f64) -> Complex64 {
        exponent_of(self.multiplier, mu, self.fd.period())
    }

    /// `e_γ(t, t0)`
    pub fn growth(&self, t: &TimePoint) -> Result<Complex64> {
        let ts = self.fd.timescale();
        Ok(hilger::scalar_exp_between(
            ts,
            |tp| self.exponent(ts.mu(tp)),
            self.fd.t0(),
            t,
            self.fd.options().h_max,
        )?)
    }

    /// The p-periodic part `q(t) = L(t) v`.
    pub fn periodic_part(&self, t: &TimePoint) -> Result<CVector> {
        Ok(self.fd.lyapunov_factor(t)? * &self.v)
    }

    pub fn at(&self, t: &TimePoint) -> Result<CVector> {
        Ok(self.periodic_part(t)? * self.growth(t)?)
    }
}

/// Mode for the `i`-th eigenvector (over all clusters, see [`FloquetData::eigenvectors`]).
pub fn mode_solution(fd: &FloquetData, i: usize) -> Result<ModeSolution> {
    let vectors = fd.eigenvectors();
    let count = vectors.len();
    let (cluster, v) = vectors
        .into_iter()
        .nth(i)
        .ok_or(FloquetError::NoEigenvector { index: i, count })?;
    Ok(ModeSolution {
        multiplier: fd.spectrum().eigenvalues[cluster],
        fd: fd.clone(),
        cluster,
        v,
    })
}

pub type ScalarMap = Arc<dyn Fn(&PeriodicTimeScale, &TimePoint) -> Complex64 + Send + Sync>;

/// Dynamic eigenpairs `{ξ_i, w_i}` with `W(t) = Φ(t, t0) e_{⊖Ξ}(t, t0)`.
#[derive(Clone)]
pub struct DynamicEigenpairs {
    sys: LinearDynamicSystem,
    xi: Vec<ScalarMap>,
    t0: TimePoint,
    opts: SolverOptions,
}

impl std::fmt::Debug for DynamicEigenpairs {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DynamicEigenpairs")
            .field("n", &self.xi.len())
            .field("t0", &self.t0)
            .finish()
    }
}

pub fn dynamic_eigenpairs(
    sys: &LinearDynamicSystem,
    xi: Vec<ScalarMap>,
    t0: &TimePoint,
    opts: &SolverOptions,
) -> Result<DynamicEigenpairs> {
    let n = sys.dimension();
    if xi.len() != n {
        return Err(FloquetError::Dimension {
            expected: n,
            found: xi.len(),
        });
    }
    let ts = sys.timescale();
    let start = ts.period_start(0);
    let end = ts.period_start(1);
    for seg in ts.segments(&start, &end) {
        if let Segment::Jump { at, mu } = seg {
            for (index, x) in xi.iter().enumerate() {
                if (ONE + x(ts, &at) * mu).norm() <= 1e-12 {
                    return Err(FloquetError::NonRegressiveExponent {
                        index,
                        t: ts.time(&at),
                    });
                }
            }
        }
    }
    Ok(DynamicEigenpairs {
        sys: sys.clone(),
        xi,
        t0: *t0,
        opts: *opts,
    })
}

impl DynamicEigenpairs {
    pub fn dimension(&self) -> usize {
        self.xi.len()
    }

    pub fn system(&self) -> &LinearDynamicSystem {
        &self.sys
    }

    pub fn xi(&self, i: usize, t: &TimePoint) -> Complex64 {
        (self.xi[i])(self.sys.timescale(), t)
    }

    /// `e_{ξ_i}(t, t0)`
    pub fn xi_exp(&self, i: usize, t: &TimePoint) -> Result<Complex64> {
        let ts = self.sys.timescale();
        Ok(hilger::scalar_exp_between(ts, |tp| self.xi(i, tp), &self.t0, t, self.opts.h_max)?)
    }

    /// `e_{⊖ξ_i}(t, t0)`, integrated from `⊖ξ_i` itself.
    pub fn xi_exp_minus(&self, i: usize, t: &TimePoint) -> Result<Complex64> {
        let ts = self.sys.timescale();
        let value = hilger::scalar_exp_between(
            ts,
            |tp| {
                let mu = ts.mu(tp);
                circle_minus(Complex64::new(0.0, 0.0), self.xi(i, tp), mu)
                    .unwrap_or(Complex64::new(f64::NAN, f64::NAN))
            },
            &self.t0,
            t,
            self.opts.h_max,
        )?;
        if !(value.re.is_finite() && value.im.is_finite()) {
            return Err(FloquetError::NonFinite { t: ts.time(t) });
        }
        Ok(value)
    }

    fn w_from_phi(&self, phi: CMatrix, t: &TimePoint) -> Result<CMatrix> {
        let mut w = phi;
        for i in 0..self.dimension() {
            let e = self.xi_exp_minus(i, t)?;
            let mut col = w.column_mut(i);
            col *= e;
        }
        Ok(w)
    }

    pub fn w(&self, t: &TimePoint) -> Result<CMatrix> {
        let phi = self.sys.transition(t, &self.t0, &self.opts)?;
        self.w_from_phi(phi, t)
    }

    /// Mode vectors `m_i(t) = e_{ξ_i}(t, t0) w_i(t)` as columns.
    pub fn mode_vectors(&self, t: &TimePoint) -> Result<CMatrix> {
        let mut m = self.w(t)?;
        for i in 0..self.dimension() {
            let e = self.xi_exp(i, t)?;
            let mut col = m.column_mut(i);
            col *= e;
        }
        Ok(m)
    }

    /// Rows `v_i^T(t0)` of `W(t0)^{-1}`.
    pub fn reciprocal_rows(&self) -> Result<CMatrix> {
        let w0 = self.w(&self.t0)?;
        Ok(inverse(&w0).ok_or(TransitionError::Singular)?)
    }

    /// `Σ m_i(t) v_i^T(t0)`, which reproduces `Φ(t, t0)`.
    pub fn reconstruct(&self, t: &TimePoint) -> Result<CMatrix> {
        Ok(self.mode_vectors(t)? * self.reciprocal_rows()?)
    }

    /// max_i ‖w_i^Δ(t) − A(t) w_i(t) + ξ_i(t) w_i^σ(t)‖ / max(1, ‖w_i(t)‖, ‖w_i^σ(t)‖).
    pub fn residual(&self, t: &TimePoint) -> Result<f64> {
        let ts = self.sys.timescale();
        let mu = ts.mu(t);
        let w = self.w(t)?;
        let a = self.sys.coefficient(t)?;
        let (delta, w_sigma) = if mu > 0.0 {
            let ws = self.w(&ts.sigma_point(t))?;
            ((&ws - &w) / c(mu, 0.0), ws)
        } else {
            (self.centered_derivative(t)?, w.clone())
        };
        let mut worst: f64 = 0.0;
        for i in 0..self.dimension() {
            let r = delta.column(i) - &a * w.column(i) + w_sigma.column(i) * self.xi(i, t);
            let scale = w.column(i).norm().max(w_sigma.column(i).norm()).max(1.0);
            worst = worst.max(r.norm() / scale);
        }
        Ok(worst)
    }

    /// `W'` at a dense point: centered difference, one-sided next to a run boundary.
    fn centered_derivative(&self, t: &TimePoint) -> Result<CMatrix> {
        let ts = self.sys.timescale();
        let h = self.opts.h_max / 10.0;
        let time = ts.time(t);
        let neighbour = |dt: f64| -> Option<TimePoint> {
            let tp = ts.locate(time + dt, 1e-12)?;
            let (a, b) = if dt < 0.0 { (tp, *t) } else { (*t, tp) };
            let jumps = ts
                .segments(&a, &b)
                .iter()
                .any(|s| matches!(s, Segment::Jump { .. }));
            (!jumps).then_some(tp)
        };
        match (neighbour(-h), neighbour(h)) {
            (Some(l), Some(r)) => Ok((self.w(&r)? - self.w(&l)?) / c(2.0 * h, 0.0)),
            (None, Some(r)) => {
                let r2 = neighbour(2.0 * h).unwrap_or(r);
                let w0 = self.w(t)?;
                Ok((self.w(&r)? * c(4.0, 0.0) - w0 * c(3.0, 0.0) - self.w(&r2)?) / c(2.0 * h, 0.0))
            }
            (Some(l), None) => {
                let l2 = neighbour(-2.0 * h).unwrap_or(l);
                let w0 = self.w(t)?;
                Ok((w0 * c(3.0, 0.0) - self.w(&l)? * c(4.0, 0.0) + self.w(&l2)?) / c(2.0 * h, 0.0))
            }
            (None, None) => Err(TimeScaleError::InvalidStep(h).into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialBound {
    /// Degree bound `d`: the envelope is `c·Σ_{k<=d} h_k(t, t0)`.
    pub degree: usize,
    pub constant: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeReport {
    pub initial_norm: f64,
    pub final_norm: f64,
    pub sup_norm: f64,
    /// sup ‖w_i‖ over the horizon
    pub sup_w: f64,
    /// fitted `‖m_i(t)‖ ≈ exp(a + b (t − t0))`
    pub envelope_rate: f64,
    pub envelope_amplitude: f64,
    pub decays: bool,
    pub bounded: bool,
    pub polynomial: PolynomialBound,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeStabilityReport {
    pub horizon: f64,
    pub samples: usize,
    pub modes: Vec<ModeReport>,
}

/// Finite-horizon behaviour of each mode vector on a grid of 16 points per period.
pub fn mode_stability_report(pairs: &DynamicEigenpairs, horizon: f64) -> Result<ModeStabilityReport> {
    let sys = pairs.system();
    let ts = sys.timescale();
    let p = ts.period();
    let periods = (horizon / p).ceil().max(1.0) as usize;
    let grid = sample_grid(ts, &pairs.t0, horizon, 16 * periods + 1);
    let n = pairs.dimension();
    let fund = Fundamental::new(sys, &pairs.t0, grid.last().unwrap(), p / 16.0, &pairs.opts)?;
    let mut norms_m = vec![Vec::with_capacity(grid.len()); n];
    let mut norms_w = vec![Vec::with_capacity(grid.len()); n];
    let mut times = Vec::with_capacity(grid.len());
    let mut h_sums = Vec::with_capacity(grid.len());
    for tp in &grid {
        let w = pairs.w_from_phi(fund.at(tp)?, tp)?;
        for i in 0..n {
            let wn = w.column(i).norm();
            norms_w[i].push(wn);
            norms_m[i].push(wn * pairs.xi_exp(i, tp)?.norm());
        }
        times.push(ts.distance(&pairs.t0, tp));
        let h = ts.h_polynomials_between(&pairs.t0, tp, n - 1);
        h_sums.push(h.iter().map(|x| x.abs()).sum::<f64>());
    }
    let first_period = times.iter().filter(|&&s| s <= p + 1e-12).count().max(1);
    let modes = (0..n)
        .map(|i| {
            let m = &norms_m[i];
            let w = &norms_w[i];
            let (a, b) = fit_log_linear(&times, m);
            let sup_first = m[..first_period].iter().cloned().fold(0.0, f64::max);
            let tail_start = m.len().saturating_sub(first_period);
            let sup_last = m[tail_start..].iter().cloned().fold(0.0, f64::max);
            let constant = (0..first_period)
                .map(|j| w[j] / h_sums[j])
                .fold(0.0, f64::max);
            let holds = w
                .iter()
                .zip(&h_sums)
                .all(|(wn, hs)| *wn <= 2.0 * constant * hs + 1e-12);
            ModeReport {
                initial_norm: m[0],
                final_norm: *m.last().unwrap(),
                sup_norm: m.iter().cloned().fold(0.0, f64::max),
                sup_w: w.iter().cloned().fold(0.0, f64::max),
                envelope_rate: b,
                envelope_amplitude: a.exp(),
                decays: b < 0.0 && *m.last().unwrap() < m[0],
                bounded: sup_last <= 2.0 * sup_first,
                polynomial: PolynomialBound {
                    degree: n - 1,
                    constant,
                    holds,
                },
            }
        })
        .collect();
    Ok(ModeStabilityReport {
        horizon,
        samples: grid.len(),
        modes,
    })
}

/// Least squares `log y ≈ a + b x` over the positive samples.
fn fit_log_linear(x: &[f64], y: &[f64]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(_, v)| **v > 0.0)
        .map(|(u, v)| (*u, v.ln()))
        .collect();
    let k = pts.len() as f64;
    if pts.len() < 2 {
        return (pts.first().map_or(f64::NEG_INFINITY, |p| p.1), 0.0);
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - b * mx, b)
}

/// Floquet exponents of `fd` as scalar maps, one per multiplier counted with
/// algebraic multiplicity.
pub fn exponent_maps(fd: &FloquetData) -> Vec<ScalarMap> {
    let p = fd.period();
    fd.multipliers()
        .into_iter()
        .map(|lambda| {
            Arc::new(move |ts: &PeriodicTimeScale, tp: &TimePoint| exponent_of(lambda, ts.mu(tp), p)) as ScalarMap
        })
        .collect()
}
