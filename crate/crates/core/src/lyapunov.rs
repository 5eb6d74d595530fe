//! Lyapunov transformations `z = L⁻¹(t) x`: boundedness checks, the
//! transformed coefficient `G`, and finite-sample stability estimates.

use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::expr::{EvalError, Expression, ParseError};
use crate::floquet::{FloquetData, FloquetError};
use crate::hilger::{self, HilgerError};
use crate::linalg::{c, determinant, frobenius, identity, inverse, spectral_norm, CMatrix};
use crate::timescale::{PeriodicTimeScale, Segment, TimePoint, TimeScaleError};
use crate::transition::{transition_table, Fundamental, LinearDynamicSystem, SolverOptions, TransitionError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LyapunovError {
    #[error(transparent)]
    Floquet(#[from] FloquetError),
    #[error(transparent)]
    Transition(#[from] TransitionError),
    #[error(transparent)]
    TimeScale(#[from] TimeScaleError),
    #[error(transparent)]
    Hilger(#[from] HilgerError),
    #[error("cannot parse entry ({row},{col}): {source}")]
    Parse {
        row: usize,
        col: usize,
        source: ParseError,
    },
    #[error("evaluating L at t={t}: {source}")]
    Evaluation { t: f64, source: EvalError },
    #[error("L(σ(t)) is singular at t={t}")]
    Singular { t: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
}

pub type Result<T> = std::result::Result<T, LyapunovError>;

type FactorFn = dyn Fn(&PeriodicTimeScale, &TimePoint) -> Result<CMatrix> + Send + Sync;

#[derive(Clone)]
enum Source {
    /// Row-major expressions in absolute time.
    Expressions { n: usize, entries: Vec<Expression> },
    /// `L(t)` of a Floquet decomposition, read off a checkpointed fundamental matrix.
    Floquet { fd: Box<FloquetData>, fund: Box<Fundamental> },
    Constant(CMatrix),
    Function { n: usize, f: Arc<FactorFn> },
}

/// A candidate transformation with its claimed bounds `‖L‖ <= ρ`, `|det L| >= η`.
#[derive(Clone)]
pub struct LyapunovTransformation {
    source: Source,
    pub rho: f64,
    pub eta: f64,
}

impl std::fmt::Debug for LyapunovTransformation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match &self.source {
            Source::Expressions { .. } => "expressions",
            Source::Floquet { .. } => "floquet",
            Source::Constant(_) => "constant",
            Source::Function { .. } => "function",
        };
        f.debug_struct("LyapunovTransformation")
            .field("source", &kind)
            .field("rho", &self.rho)
            .field("eta", &self.eta)
            .finish()
    }
}

impl LyapunovTransformation {
    pub fn from_strings<S: AsRef<str>>(rows: &[Vec<S>], rho: f64, eta: f64) -> Result<Self> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(LyapunovError::Dimension {
                    expected: n,
                    found: row.len(),
                });
            }
            for (j, s) in row.iter().enumerate() {
                entries.push(Expression::parse(s.as_ref()).map_err(|source| LyapunovError::Parse {
                    row: i,
                    col: j,
                    source,
                })?);
            }
        }
        Ok(LyapunovTransformation {
            source: Source::Expressions { n, entries },
            rho,
            eta,
        })
    }

    /// The periodic factor of a Floquet decomposition.  Checkpoints cover one
    /// period starting at `t0`; evaluations elsewhere integrate further.
    pub fn from_floquet(fd: &FloquetData, rho: f64, eta: f64) -> Result<Self> {
        let end = fd.timescale().shift(fd.t0(), 1);
        let spacing = (4.0 * fd.options().h_max).min(fd.period() / 16.0);
        let fund = Fundamental::new(fd.system(), fd.t0(), &end, spacing, fd.options())?;
        Ok(LyapunovTransformation {
            source: Source::Floquet {
                fd: Box::new(fd.clone()),
                fund: Box::new(fund),
            },
            rho,
            eta,
        })
    }

    pub fn constant(m: CMatrix, rho: f64, eta: f64) -> Self {
        LyapunovTransformation {
            source: Source::Constant(m),
            rho,
            eta,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::constant(identity(n), 1.0, 1.0)
    }

    pub fn from_fn<F>(n: usize, f: F, rho: f64, eta: f64) -> Self
    where
        F: Fn(&PeriodicTimeScale, &TimePoint) -> Result<CMatrix> + Send + Sync + 'static,
    {
        LyapunovTransformation {
            source: Source::Function { n, f: Arc::new(f) },
            rho,
            eta,
        }
    }

    pub fn dimension(&self) -> usize {
        match &self.source {
            Source::Expressions { n, .. } | Source::Function { n, .. } => *n,
            Source::Floquet { fd, .. } => fd.dimension(),
            Source::Constant(m) => m.nrows(),
        }
    }

    pub fn evaluate(&self, ts: &PeriodicTimeScale, tp: &TimePoint) -> Result<CMatrix> {
        match &self.source {
            Source::Expressions { n, entries } => {
                let t = ts.time(tp);
                let mut m = CMatrix::zeros(*n, *n);
                for (k, e) in entries.iter().enumerate() {
                    m[(k / n, k % n)] = e
                        .evaluate(t)
                        .map_err(|source| LyapunovError::Evaluation { t, source })?;
                }
                Ok(m)
            }
            Source::Floquet { fd, fund } => Ok(fd.lyapunov_factor_with(fund, tp)?),
            Source::Constant(m) => Ok(m.clone()),
            Source::Function { f, .. } => f(ts, tp),
        }
    }

    /// `L^Δ(t)`: forward quotient at scattered points; inside a run a centered
    /// difference with step `h`, one-sided (second order) next to a boundary.
    pub fn delta_derivative(&self, ts: &PeriodicTimeScale, tp: &TimePoint, h: f64) -> Result<CMatrix> {
        let mu = ts.mu(tp);
        if mu > 0.0 {
            let a = self.evaluate(ts, tp)?;
            let b = self.evaluate(ts, &ts.sigma_point(tp))?;
            return Ok((b - a) / c(mu, 0.0));
        }
        let left = dense_neighbour(ts, tp, -2.0 * h);
        let right = dense_neighbour(ts, tp, 2.0 * h);
        let at = |dt: f64| -> Result<CMatrix> {
            let p = ts
                .locate(ts.time(tp) + dt, 1e-12)
                .ok_or(TimeScaleError::NotInTimeScale(ts.time(tp) + dt))?;
            self.evaluate(ts, &p)
        };
        let two_h = c(2.0 * h, 0.0);
        match (left.is_some(), right.is_some()) {
            (true, true) => Ok((at(h)? - at(-h)?) / two_h),
            (false, true) => Ok((at(h)? * c(4.0, 0.0) - self.evaluate(ts, tp)? * c(3.0, 0.0) - at(2.0 * h)?) / two_h),
            (true, false) => Ok((self.evaluate(ts, tp)? * c(3.0, 0.0) - at(-h)? * c(4.0, 0.0) + at(-2.0 * h)?) / two_h),
            (false, false) => Err(TimeScaleError::InvalidStep(h).into()),
        }
    }
}

/// The point `tp + dt` if it is reached without crossing a gap.
fn dense_neighbour(ts: &PeriodicTimeScale, tp: &TimePoint, dt: f64) -> Option<TimePoint> {
    let other = ts.locate(ts.time(tp) + dt, 1e-12)?;
    let (a, b) = if dt < 0.0 { (other, *tp) } else { (*tp, other) };
    let crosses = ts
        .segments(&a, &b)
        .iter()
        .any(|s| matches!(s, Segment::Jump { .. }));
    (!crosses).then_some(other)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovReport {
    /// sup ‖L(t)‖₂ over the grid
    pub rho_observed: f64,
    /// inf |det L(t)| over the grid
    pub eta_observed: f64,
    /// sup ‖L⁻¹(t)‖₂, the bound the inverse inherits
    pub inverse_rho_observed: f64,
    /// ‖L⁻¹‖ <= ‖L‖^{n−1}/|det L| held at every grid point
    pub inverse_bound_holds: bool,
    pub samples: usize,
    pub pass: bool,
}

/// Evaluates `L` on a grid of `[from, from + horizon]` with spacing `h`.
pub fn verify_lyapunov(
    lt: &LyapunovTransformation,
    ts: &PeriodicTimeScale,
    from: &TimePoint,
    horizon: f64,
    h: f64,
) -> Result<LyapunovReport> {
    let end = ts.floor_point(ts.time(from) + horizon, 1e-9);
    let grid = ts.grid_between(from, &end, h)?;
    let n = lt.dimension();
    let mut report = LyapunovReport {
        rho_observed: 0.0,
        eta_observed: f64::INFINITY,
        inverse_rho_observed: 0.0,
        inverse_bound_holds: true,
        samples: grid.len(),
        pass: false,
    };
    for tp in &grid {
        let l = lt.evaluate(ts, tp)?;
        let norm = spectral_norm(&l);
        let det = determinant(&l).norm();
        report.rho_observed = report.rho_observed.max(norm);
        report.eta_observed = report.eta_observed.min(det);
        match inverse(&l) {
            Some(inv) if det > 0.0 => {
                let inv_norm = spectral_norm(&inv);
                report.inverse_rho_observed = report.inverse_rho_observed.max(inv_norm);
                let bound = norm.powi(n as i32 - 1) / det;
                if inv_norm > bound * (1.0 + 1e-9) + 1e-12 {
                    report.inverse_bound_holds = false;
                }
            }
            _ => report.inverse_rho_observed = f64::INFINITY,
        }
    }
    report.pass = report.rho_observed <= lt.rho
        && report.eta_observed >= lt.eta
        && report.inverse_bound_holds
        && report.inverse_rho_observed.is_finite();
    Ok(report)
}

/// `G(t) = L(σ(t))⁻¹ (A(t) L(t) − L^Δ(t))` as a system on the same time scale.
pub fn transform_system(
    sys: &LinearDynamicSystem,
    lt: &LyapunovTransformation,
    opts: &SolverOptions,
) -> Result<LinearDynamicSystem> {
    let n = sys.dimension();
    if lt.dimension() != n {
        return Err(LyapunovError::Dimension {
            expected: n,
            found: lt.dimension(),
        });
    }
    let inner = sys.clone();
    let lt = lt.clone();
    let h = opts.h_max / 10.0;
    let g = LinearDynamicSystem::from_fn(sys.timescale().clone(), n, move |ts, tp| {
        let t = ts.time(tp);
        let wrap = |e: LyapunovError| match e {
            LyapunovError::Transition(t) => t,
            other => TransitionError::Options(other.to_string()),
        };
        let l = lt.evaluate(ts, tp).map_err(wrap)?;
        let l_sigma = lt.evaluate(ts, &ts.sigma_point(tp)).map_err(wrap)?;
        let l_delta = lt.delta_derivative(ts, tp, h).map_err(wrap)?;
        let a = inner.coefficient(tp)?;
        let inv = inverse(&l_sigma).ok_or(TransitionError::NonRegressive { t, det: 0.0 })?;
        Ok(inv * (a * l - l_delta))
    })?;
    Ok(g)
}

/// max ‖Φ_G(t,τ) − L⁻¹(t) Φ_A(t,τ) L(τ)‖_F over grid pairs, `Φ_G` integrated from `G`.
pub fn verify_transition_relation(
    sys: &LinearDynamicSystem,
    lt: &LyapunovTransformation,
    grid: &[TimePoint],
    opts: &SolverOptions,
) -> Result<f64> {
    let ts = sys.timescale();
    let mut pts = grid.to_vec();
    pts.sort_by(|a, b| a.cmp_position(b));
    pts.dedup_by(|a, b| a.cmp_position(b) == std::cmp::Ordering::Equal);
    let g = transform_system(sys, lt, opts)?;
    let phi_a = transition_table(sys, &pts, opts)?;
    let phi_g = transition_table(&g, &pts, opts)?;
    let ls = pts
        .iter()
        .map(|tp| lt.evaluate(ts, tp))
        .collect::<Result<Vec<_>>>()?;
    let mut worst: f64 = 0.0;
    for i in 0..pts.len() {
        let l_inv = inverse(&ls[i]).ok_or(LyapunovError::Singular { t: ts.time(&pts[i]) })?;
        for j in 0..pts.len() {
            let model = &l_inv * &phi_a[i][j] * &ls[j];
            worst = worst.max(frobenius(&(&phi_g[i][j] - model)));
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialFit {
    pub gamma: f64,
    pub lambda: f64,
}

/// Finite-sample estimates; never a certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityEstimates {
    /// max ‖Φ(t, t0)‖₂ over the sampled pairs
    pub gamma_uniform: f64,
    /// `‖Φ(t,t0)‖ <= γ e_{−λ}(t, t0)` on every sample, with the envelope at
    /// least halving over the horizon
    pub exponential: Option<ExponentialFit>,
    /// the largest norm over the final period exceeds twice that of the first
    pub growing: bool,
    pub samples: usize,
}

struct Sample {
    norm: f64,
    tp: TimePoint,
    t0: TimePoint,
}

pub fn stability_estimates(
    sys: &LinearDynamicSystem,
    t0_samples: &[TimePoint],
    horizon: f64,
    opts: &SolverOptions,
) -> Result<StabilityEstimates> {
    let ts = sys.timescale();
    let p = ts.period();
    let periods = (horizon / p).ceil().max(1.0) as usize;
    let mut samples = Vec::new();
    let mut growing = false;
    for t0 in t0_samples {
        let grid = crate::floquet::sample_grid(ts, t0, horizon, 16 * periods + 1);
        let mut x = identity(sys.dimension());
        let mut first: f64 = 0.0;
        let mut last: f64 = 0.0;
        for (k, tp) in grid.iter().enumerate() {
            if k > 0 {
                x = sys.propagate(x, &grid[k - 1], tp, opts)?;
            }
            let norm = spectral_norm(&x);
            let elapsed = ts.distance(t0, tp);
            if elapsed <= p {
                first = first.max(norm);
            }
            if elapsed >= horizon - p {
                last = last.max(norm);
            }
            samples.push(Sample { norm, tp: *tp, t0: *t0 });
        }
        growing |= last > 2.0 * first;
    }
    let gamma_uniform = samples.iter().map(|s| s.norm).fold(0.0, f64::max);

    let mu_max = ts.mu_max();
    let lambda_max = if mu_max > 0.0 {
        (1.0 - 1e-9) / mu_max
    } else {
        50.0 / p
    };
    let decay = |lambda: f64, s: &Sample| -> Result<f64> {
        let e = hilger::scalar_exp_between(ts, |_| Complex64::new(-lambda, 0.0), &s.t0, &s.tp, opts.h_max)?;
        Ok(e.re)
    };
    // least squares in log space, best log γ for each λ
    let objective = |lambda: f64| -> Result<f64> {
        let mut diffs = Vec::with_capacity(samples.len());
        for s in &samples {
            diffs.push(s.norm.max(f64::MIN_POSITIVE).ln() - decay(lambda, s)?.ln());
        }
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        Ok(diffs.iter().map(|d| (d - mean).powi(2)).sum())
    };
    let lambda = golden_section(objective, 0.0, lambda_max, 60)?;
    let mut gamma: f64 = 0.0;
    for s in &samples {
        gamma = gamma.max(s.norm / decay(lambda, s)?);
    }
    let end_decay = t0_samples
        .first()
        .map(|t0| {
            let end = ts.floor_point(ts.time(t0) + horizon, 1e-9);
            hilger::scalar_exp_between(ts, |_| Complex64::new(-lambda, 0.0), t0, &end, opts.h_max)
        })
        .transpose()?
        .map_or(1.0, |e| e.re);
    let exponential = (lambda > 0.0 && end_decay <= 0.5 && gamma.is_finite()).then_some(ExponentialFit { gamma, lambda });
    Ok(StabilityEstimates {
        gamma_uniform,
        exponential,
        growing,
        samples: samples.len(),
    })
}

fn golden_section<F>(f: F, mut a: f64, mut b: f64, iterations: usize) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 0..iterations {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok((a + b) / 2.0)
}
