//! Transition matrices of `x^Δ = A(t)x` on a periodic time scale.
//!
//! Continuous runs are integrated with classical RK4 under step-doubling
//! control; each right-scattered point contributes the exact factor
//! `I + μ(t)A(t)`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::expr::{EvalError, Expression, ParseError};
use crate::linalg::{c, determinant, frobenius, identity, inverse, solve, CMatrix, CVector};
use crate::timescale::{
    PeriodicTimeScale, RunKind, Segment, TimePoint, TimeScaleError, DEFAULT_TOL,
    LEFT_LIMIT_FRACTION,
};

/// `|det(I + μA)|` at or below this counts as non-regressive.
pub const SINGULAR_TOL: f64 = 1e-12;
/// Periodicity of A is checked to this relative tolerance.
pub const PERIODICITY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransitionError {
    #[error(transparent)]
    TimeScale(#[from] TimeScaleError),
    #[error("cannot parse entry ({row},{col}): {source}")]
    Parse {
        row: usize,
        col: usize,
        source: ParseError,
    },
    #[error("evaluating the coefficient at t={t}: {source}")]
    Evaluation { t: f64, source: EvalError },
    #[error("coefficient is not finite at t={t}")]
    NonFinite { t: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("system is not regressive at t={t} (|det(I+μA)| = {det:e})")]
    NonRegressive { t: f64, det: f64 },
    #[error("coefficient is not {period}-periodic near t={t} (difference {difference:e})")]
    NotPeriodic { t: f64, period: f64, difference: f64 },
    #[error("integrator could not meet rk_tol near t={t}")]
    Tolerance { t: f64 },
    #[error("invalid solver options: {0}")]
    Options(String),
    #[error("transition matrix is singular")]
    Singular,
}

pub type Result<T> = std::result::Result<T, TransitionError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Largest step on continuous runs.
    pub h_max: f64,
    /// Step-doubling error target (relative to `max(1, ‖X‖)`).
    pub rk_tol: f64,
    /// Number of Picard iterations in the Peano–Baker oracle.
    pub pb_terms: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            h_max: 1e-2,
            rk_tol: 1e-10,
            pb_terms: 12,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.h_max > 0.0 && self.h_max.is_finite()) {
            return Err(TransitionError::Options(format!("h_max = {}", self.h_max)));
        }
        if !(self.rk_tol > 0.0 && self.rk_tol.is_finite()) {
            return Err(TransitionError::Options(format!("rk_tol = {}", self.rk_tol)));
        }
        if self.pb_terms == 0 {
            return Err(TransitionError::Options("pb_terms = 0".into()));
        }
        Ok(())
    }

    pub fn with_h_max(mut self, h_max: f64) -> Self {
        self.h_max = h_max;
        self
    }
}

type CoefficientFn = dyn Fn(&PeriodicTimeScale, &TimePoint) -> Result<CMatrix> + Send + Sync;

/// Source of `A(t)`.
#[derive(Clone)]
pub enum Coefficient {
    /// Row-major expressions in `t`, evaluated at the point reduced into period 0.
    Expressions(Vec<Expression>),
    Constant(CMatrix),
    /// Arbitrary map of the structural point; may depend on graininess.
    Function(Arc<CoefficientFn>),
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Expressions(e) => f.debug_tuple("Expressions").field(e).finish(),
            Coefficient::Constant(m) => f.debug_tuple("Constant").field(m).finish(),
            Coefficient::Function(_) => f.write_str("Function(..)"),
        }
    }
}

type CacheKey = (usize, u64, u64, u64);

/// `x^Δ = A(t)x` with p-periodic `A` on a periodic time scale.
#[derive(Debug, Clone)]
pub struct LinearDynamicSystem {
    ts: PeriodicTimeScale,
    n: usize,
    coefficient: Coefficient,
    cache: Arc<Mutex<HashMap<CacheKey, CMatrix>>>,
}

impl LinearDynamicSystem {
    /// Checks regressivity and (for expressions) periodicity.
    pub fn new(ts: PeriodicTimeScale, n: usize, coefficient: Coefficient) -> Result<Self> {
        match &coefficient {
            Coefficient::Expressions(e) if e.len() != n * n => {
                return Err(TransitionError::Dimension {
                    expected: n * n,
                    found: e.len(),
                })
            }
            Coefficient::Constant(m) if m.nrows() != n || m.ncols() != n => {
                return Err(TransitionError::Dimension {
                    expected: n,
                    found: m.nrows(),
                })
            }
            _ => {}
        }
        if n == 0 {
            return Err(TransitionError::Dimension {
                expected: 1,
                found: 0,
            });
        }
        let sys = LinearDynamicSystem {
            ts,
            n,
            coefficient,
            cache: Arc::new(Mutex::new(HashMap::new())),
        };
        if matches!(sys.coefficient, Coefficient::Expressions(_)) {
            sys.check_periodicity(sys.ts.period() / 64.0)?;
        }
        sys.check_regressivity()?;
        Ok(sys)
    }

    pub fn from_expressions(ts: PeriodicTimeScale, rows: &[Vec<Expression>]) -> Result<Self> {
        let n = rows.len();
        let mut flat = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(TransitionError::Dimension {
                    expected: n,
                    found: row.len(),
                });
            }
            flat.extend(row.iter().cloned());
        }
        Self::new(ts, n, Coefficient::Expressions(flat))
    }

    /// Parses a square array of expression strings.
    pub fn from_strings<S: AsRef<str>>(ts: PeriodicTimeScale, rows: &[Vec<S>]) -> Result<Self> {
        let mut parsed = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            let mut r = Vec::with_capacity(row.len());
            for (j, s) in row.iter().enumerate() {
                r.push(
                    Expression::parse(s.as_ref()).map_err(|source| TransitionError::Parse {
                        row: i,
                        col: j,
                        source,
                    })?,
                );
            }
            parsed.push(r);
        }
        Self::from_expressions(ts, &parsed)
    }

    pub fn constant(ts: PeriodicTimeScale, a: CMatrix) -> Result<Self> {
        let n = a.nrows();
        Self::new(ts, n, Coefficient::Constant(a))
    }

    pub fn from_fn<F>(ts: PeriodicTimeScale, n: usize, f: F) -> Result<Self>
    where
        F: Fn(&PeriodicTimeScale, &TimePoint) -> Result<CMatrix> + Send + Sync + 'static,
    {
        Self::new(ts, n, Coefficient::Function(Arc::new(f)))
    }

    pub fn timescale(&self) -> &PeriodicTimeScale {
        &self.ts
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn period(&self) -> f64 {
        self.ts.period()
    }

    pub fn coefficient_source(&self) -> &Coefficient {
        &self.coefficient
    }

    /// `A` at a structural point (its actual value, graininess included).
    pub fn coefficient(&self, tp: &TimePoint) -> Result<CMatrix> {
        let t = self.ts.reduced_time(tp);
        match &self.coefficient {
            Coefficient::Expressions(e) => self.evaluate_expressions(e, t),
            Coefficient::Constant(m) => Ok(m.clone()),
            Coefficient::Function(f) => {
                let m = f(&self.ts, tp)?;
                if m.nrows() != self.n || m.ncols() != self.n {
                    return Err(TransitionError::Dimension {
                        expected: self.n,
                        found: m.nrows(),
                    });
                }
                if !crate::linalg::is_finite(&m) {
                    return Err(TransitionError::NonFinite { t });
                }
                Ok(m)
            }
        }
    }

    pub fn coefficient_at(&self, t: f64) -> Result<CMatrix> {
        let tp = self
            .ts
            .locate(t, DEFAULT_TOL)
            .ok_or(TimeScaleError::NotInTimeScale(t))?;
        self.coefficient(&tp)
    }

    fn evaluate_expressions(&self, e: &[Expression], t: f64) -> Result<CMatrix> {
        let mut m = CMatrix::zeros(self.n, self.n);
        for (k, expr) in e.iter().enumerate() {
            let v = expr
                .evaluate(t)
                .map_err(|source| TransitionError::Evaluation { t, source })?;
            m[(k / self.n, k % self.n)] = v;
        }
        Ok(m)
    }

    /// `A` inside a continuous run.  At the end of a run followed by a gap the
    /// left limit is used, extrapolated from inside when `A` may depend on μ.
    fn coefficient_in_run(&self, period: i64, run: usize, offset: f64, step: f64) -> Result<CMatrix> {
        let r = &self.ts.runs()[run];
        let at = |offset| TimePoint {
            period,
            run,
            offset,
        };
        let at_end = r.trailing_gap > 0.0 && offset >= r.length();
        if at_end && matches!(self.coefficient, Coefficient::Function(_)) {
            let d = LEFT_LIMIT_FRACTION * step.max(f64::MIN_POSITIVE);
            let a1 = self.coefficient(&at(offset - d))?;
            let a2 = self.coefficient(&at(offset - 2.0 * d))?;
            return Ok(a1 * c(2.0, 0.0) - a2);
        }
        self.coefficient(&at(offset))
    }

    /// ‖A(t) − A(t+p)‖ on a grid over one period, with expressions evaluated
    /// at raw (unreduced) time.
    pub fn check_periodicity(&self, h: f64) -> Result<()> {
        let e = match &self.coefficient {
            Coefficient::Expressions(e) => e,
            _ => return Ok(()),
        };
        let start = self.ts.period_start(0);
        let end = self.ts.period_start(1);
        for tp in self.ts.grid_between(&start, &end, h)? {
            let t = self.ts.time(&tp);
            let shifted = self.ts.time(&self.ts.shift(&tp, 1));
            let a = self.evaluate_expressions(e, t)?;
            let b = self.evaluate_expressions(e, shifted)?;
            let difference = frobenius(&(&a - &b));
            if difference > PERIODICITY_TOL * frobenius(&a).max(1.0) {
                return Err(TransitionError::NotPeriodic {
                    t,
                    period: self.ts.period(),
                    difference,
                });
            }
        }
        Ok(())
    }

    /// `|det(I + μA)| > SINGULAR_TOL` at every right-scattered point of a period.
    pub fn check_regressivity(&self) -> Result<()> {
        let start = self.ts.period_start(0);
        let end = self.ts.period_start(1);
        for seg in self.ts.segments(&start, &end) {
            if let Segment::Jump { at, mu } = seg {
                self.jump_factor(&at, mu)?;
            }
        }
        Ok(())
    }

    fn jump_factor(&self, at: &TimePoint, mu: f64) -> Result<CMatrix> {
        let f = identity(self.n) + self.coefficient(at)? * c(mu, 0.0);
        let det = determinant(&f).norm();
        if det <= SINGULAR_TOL {
            return Err(TransitionError::NonRegressive {
                t: self.ts.time(at),
                det,
            });
        }
        Ok(f)
    }

    fn locate(&self, t: f64) -> Result<TimePoint> {
        Ok(self
            .ts
            .locate(t, DEFAULT_TOL)
            .ok_or(TimeScaleError::NotInTimeScale(t))?)
    }

    /// Carries `x` (any number of columns) forward from `from` to `to`.
    pub fn propagate(&self, x: CMatrix, from: &TimePoint, to: &TimePoint, opts: &SolverOptions) -> Result<CMatrix> {
        opts.validate()?;
        let mut x = x;
        for seg in self.ts.segments(from, to) {
            match seg {
                Segment::Continuous {
                    period,
                    run,
                    from,
                    to,
                } => self.advance_run(&mut x, period, run, from, to, opts)?,
                Segment::Jump { at, mu } => x = self.jump_factor(&at, mu)? * x,
            }
        }
        Ok(x)
    }

    fn advance_run(
        &self,
        x: &mut CMatrix,
        period: i64,
        run: usize,
        from: f64,
        to: f64,
        opts: &SolverOptions,
    ) -> Result<()> {
        let floor = opts.h_max / 1_048_576.0;
        let mut pos = from;
        let mut h = opts.h_max.min(to - from);
        let span = (to - from).max(1.0);
        while pos < to {
            let last = pos + h >= to - 1e-14 * span;
            if last {
                h = to - pos;
            }
            let node = |j: usize| if j == 4 && last { to } else { pos + h * j as f64 / 4.0 };
            let mut a = Vec::with_capacity(5);
            for j in 0..5 {
                a.push(self.coefficient_in_run(period, run, node(j), h)?);
            }
            let full = rk4(x, &a[0], &a[2], &a[4], h);
            let mid = rk4(x, &a[0], &a[1], &a[2], h / 2.0);
            let half = rk4(&mid, &a[2], &a[3], &a[4], h / 2.0);
            let diff = &half - &full;
            let err = frobenius(&diff) / 15.0;
            let scale = frobenius(&half).max(1.0);
            if !err.is_finite() {
                return Err(TransitionError::Tolerance {
                    t: self.ts.time(&TimePoint {
                        period,
                        run,
                        offset: pos,
                    }),
                });
            }
            if err <= opts.rk_tol * scale {
                *x = half + diff / c(15.0, 0.0);
                pos = if last { to } else { pos + h };
                if err < opts.rk_tol * scale / 32.0 {
                    h = (2.0 * h).min(opts.h_max);
                }
                h = h.min(to - pos).max(0.0);
            } else {
                h /= 2.0;
                if h < floor {
                    return Err(TransitionError::Tolerance {
                        t: self.ts.time(&TimePoint {
                            period,
                            run,
                            offset: pos,
                        }),
                    });
                }
            }
        }
        Ok(())
    }

    /// `Φ(t, t0)`; backward in time through the inverse of the forward matrix.
    pub fn transition(&self, t: &TimePoint, t0: &TimePoint, opts: &SolverOptions) -> Result<CMatrix> {
        match t.cmp_position(t0) {
            std::cmp::Ordering::Equal => Ok(identity(self.n)),
            std::cmp::Ordering::Greater => self.propagate(identity(self.n), t0, t, opts),
            std::cmp::Ordering::Less => {
                let forward = self.propagate(identity(self.n), t, t0, opts)?;
                inverse(&forward).ok_or(TransitionError::Singular)
            }
        }
    }

    /// `Φ(t0 + p, t0)`, cached on `t0` reduced modulo the period.
    pub fn monodromy_matrix(&self, t0: &TimePoint, opts: &SolverOptions) -> Result<CMatrix> {
        let base = self.ts.shift(t0, -t0.period);
        let key = (
            base.run,
            base.offset.to_bits(),
            opts.h_max.to_bits(),
            opts.rk_tol.to_bits(),
        );
        if let Some(m) = self.cache.lock().expect("cache poisoned").get(&key) {
            return Ok(m.clone());
        }
        let m = self.transition(&self.ts.shift(&base, 1), &base, opts)?;
        self.cache
            .lock()
            .expect("cache poisoned")
            .insert(key, m.clone());
        Ok(m)
    }

    /// Iterated-integral (Picard) partial sum of the transition matrix.
    pub fn peano_baker_between(&self, t: &TimePoint, t0: &TimePoint, opts: &SolverOptions) -> Result<CMatrix> {
        opts.validate()?;
        enum Piece {
            Run { h: f64, a: Vec<CMatrix> },
            Jump { mu: f64, a: CMatrix },
        }
        let mut pieces = Vec::new();
        for seg in self.ts.segments(t0, t) {
            match seg {
                Segment::Continuous {
                    period,
                    run,
                    from,
                    to,
                } => {
                    let m = (((to - from) / opts.h_max).ceil() as usize).max(3);
                    let h = (to - from) / m as f64;
                    let a = (0..=m)
                        .map(|j| {
                            let off = if j == m { to } else { from + h * j as f64 };
                            self.coefficient_in_run(period, run, off, h)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    pieces.push(Piece::Run { h, a });
                }
                Segment::Jump { at, mu } => pieces.push(Piece::Jump {
                    mu,
                    a: self.coefficient(&at)?,
                }),
            }
        }
        let eye = identity(self.n);
        // P_k sampled on every piece
        let mut prev: Vec<Vec<CMatrix>> = pieces
            .iter()
            .map(|p| match p {
                Piece::Run { a, .. } => vec![eye.clone(); a.len()],
                Piece::Jump { .. } => vec![eye.clone()],
            })
            .collect();
        let mut result = eye.clone();
        for _ in 0..opts.pb_terms {
            let mut running = eye.clone();
            let mut next = Vec::with_capacity(pieces.len());
            for (piece, old) in pieces.iter().zip(&prev) {
                match piece {
                    Piece::Run { h, a } => {
                        let f: Vec<CMatrix> = a.iter().zip(old).map(|(a, p)| a * p).collect();
                        let m = f.len() - 1;
                        let mut values = Vec::with_capacity(m + 1);
                        values.push(running.clone());
                        let w = c(h / 24.0, 0.0);
                        for i in 0..m {
                            let inc = if i == 0 {
                                &f[0] * c(9.0, 0.0) + &f[1] * c(19.0, 0.0) - &f[2] * c(5.0, 0.0) + &f[3]
                            } else if i == m - 1 {
                                &f[m - 3] - &f[m - 2] * c(5.0, 0.0) + &f[m - 1] * c(19.0, 0.0) + &f[m] * c(9.0, 0.0)
                            } else {
                                (&f[i] + &f[i + 1]) * c(13.0, 0.0) - &f[i - 1] - &f[i + 2]
                            };
                            running += inc * w;
                            values.push(running.clone());
                        }
                        next.push(values);
                    }
                    Piece::Jump { mu, a } => {
                        next.push(vec![running.clone()]);
                        running += a * &old[0] * c(*mu, 0.0);
                    }
                }
            }
            result = running;
            prev = next;
        }
        Ok(result)
    }
}

fn rk4(x: &CMatrix, a0: &CMatrix, a_mid: &CMatrix, a1: &CMatrix, h: f64) -> CMatrix {
    let hh = c(h, 0.0);
    let half = c(h / 2.0, 0.0);
    let k1 = a0 * x;
    let k2 = a_mid * (x + &k1 * half);
    let k3 = a_mid * (x + &k2 * half);
    let k4 = a1 * (x + &k3 * hh);
    x + (k1 + (k2 + k3) * c(2.0, 0.0) + k4) * c(h / 6.0, 0.0)
}

/// `Φ_A(t, t0)` for points of the time scale.
pub fn transition_matrix(sys: &LinearDynamicSystem, t: f64, t0: f64, opts: &SolverOptions) -> Result<CMatrix> {
    let tp = sys.locate(t)?;
    let tp0 = sys.locate(t0)?;
    sys.transition(&tp, &tp0, opts)
}

/// Peano–Baker partial sum with `opts.pb_terms` iterated integrals; `t >= t0`.
pub fn peano_baker(sys: &LinearDynamicSystem, t: f64, t0: f64, opts: &SolverOptions) -> Result<CMatrix> {
    let tp = sys.locate(t)?;
    let tp0 = sys.locate(t0)?;
    if tp.cmp_position(&tp0) == std::cmp::Ordering::Less {
        return Err(TimeScaleError::ReversedInterval { a: t0, b: t }.into());
    }
    sys.peano_baker_between(&tp, &tp0, opts)
}

/// `e_A(t, t0) = Σ A^k h_k(t, t0)` for constant `A`.
pub fn matrix_exp_constant(
    a: &CMatrix,
    ts: &PeriodicTimeScale,
    t: f64,
    t0: f64,
    opts: &SolverOptions,
) -> Result<CMatrix> {
    let sys = LinearDynamicSystem::constant(ts.clone(), a.clone())?;
    let tp = sys.locate(t)?;
    let tp0 = sys.locate(t0)?;
    if tp.cmp_position(&tp0) == std::cmp::Ordering::Less {
        let forward = matrix_exp_constant(a, ts, t0, t, opts)?;
        return inverse(&forward).ok_or(TransitionError::Singular);
    }
    let n = a.nrows();
    let a_norm = frobenius(a);
    let span = sys.ts.distance(&tp0, &tp);
    // terms decay once k exceeds ‖A‖·(t - t0)
    let k_max = (2.0 * a_norm * span).ceil() as usize + 40;
    let h = ts.h_polynomials_between(&tp0, &tp, k_max);
    let mut power = identity(n);
    let mut sum = identity(n);
    for hk in h.iter().skip(1) {
        power = &power * a;
        sum += &power * c(*hk, 0.0);
    }
    Ok(sum)
}

/// `Φ(t, t0) x0`.
pub fn solve_ivp(sys: &LinearDynamicSystem, x0: &CVector, t0: f64, t: f64, opts: &SolverOptions) -> Result<CVector> {
    if x0.len() != sys.n {
        return Err(TransitionError::Dimension {
            expected: sys.n,
            found: x0.len(),
        });
    }
    let phi = transition_matrix(sys, t, t0, opts)?;
    Ok(phi * x0)
}

/// Forcing term `f(t)`, one expression per component, evaluated at absolute time.
#[derive(Debug, Clone, PartialEq)]
pub struct Forcing(pub Vec<Expression>);

impl Forcing {
    pub fn parse<S: AsRef<str>>(entries: &[S]) -> std::result::Result<Self, ParseError> {
        entries
            .iter()
            .map(|s| Expression::parse(s.as_ref()))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(Forcing)
    }

    pub fn zero(n: usize) -> Self {
        Forcing(vec![Expression::Real(0.0); n])
    }

    pub fn evaluate(&self, t: f64) -> Result<CVector> {
        let mut v = CVector::zeros(self.0.len());
        for (i, e) in self.0.iter().enumerate() {
            v[i] = e
                .evaluate(t)
                .map_err(|source| TransitionError::Evaluation { t, source })?;
        }
        Ok(v)
    }
}

/// `∫_{t0}^{t} Φ(t, σ(τ)) f(τ) Δτ` together with `Φ(t, t0)`, by a single sweep of
/// the fundamental matrix over Simpson nodes and scattered points.
pub fn variation_of_constants(
    sys: &LinearDynamicSystem,
    f: &Forcing,
    t0: &TimePoint,
    t: &TimePoint,
    opts: &SolverOptions,
) -> Result<(CVector, CMatrix)> {
    opts.validate()?;
    if f.0.len() != sys.n {
        return Err(TransitionError::Dimension {
            expected: sys.n,
            found: f.0.len(),
        });
    }
    let ts = &sys.ts;
    let mut phi = identity(sys.n);
    let mut acc = CVector::zeros(sys.n);
    // integrand Φ(σ(τ), t0)^{-1} f(τ)
    let pulled = |phi: &CMatrix, tp: &TimePoint| -> Result<CVector> {
        let v = f.evaluate(ts.time(tp))?;
        solve(phi, &v).ok_or(TransitionError::Singular)
    };
    for seg in ts.segments(t0, t) {
        match seg {
            Segment::Continuous {
                period,
                run,
                from,
                to,
            } => {
                let panels = ((to - from) / (2.0 * opts.h_max)).ceil().max(1.0) as usize;
                let m = 2 * panels;
                let h = (to - from) / m as f64;
                let node = |j: usize| TimePoint {
                    period,
                    run,
                    offset: if j == m { to } else { from + h * j as f64 },
                };
                for j in 0..=m {
                    if j > 0 {
                        sys.advance_run(&mut phi, period, run, node(j - 1).offset, node(j).offset, opts)?;
                    }
                    let w = if j == 0 || j == m {
                        1.0
                    } else if j % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    acc += pulled(&phi, &node(j))? * c(w * h / 3.0, 0.0);
                }
            }
            Segment::Jump { at, mu } => {
                phi = sys.jump_factor(&at, mu)? * phi;
                acc += pulled(&phi, &at)? * c(mu, 0.0);
            }
        }
    }
    Ok((&phi * acc, phi))
}

/// `x(t) = Φ(t,t0)x0 + ∫_{t0}^{t} Φ(t, σ(τ)) f(τ) Δτ` for `t >= t0`.
pub fn solve_nonhomogeneous(
    sys: &LinearDynamicSystem,
    f: &Forcing,
    x0: &CVector,
    t0: f64,
    t: f64,
    opts: &SolverOptions,
) -> Result<CVector> {
    if x0.len() != sys.n {
        return Err(TransitionError::Dimension {
            expected: sys.n,
            found: x0.len(),
        });
    }
    let tp = sys.locate(t)?;
    let tp0 = sys.locate(t0)?;
    if tp.cmp_position(&tp0) == std::cmp::Ordering::Less {
        return Err(TimeScaleError::ReversedInterval { a: t0, b: t }.into());
    }
    let (integral, phi) = variation_of_constants(sys, f, &tp0, &tp, opts)?;
    Ok(phi * x0 + integral)
}

/// `table[i][j] = Φ(pts[i], pts[j])` for points sorted in time: one forward
/// sweep per column, inverses above the diagonal.
pub fn transition_table(sys: &LinearDynamicSystem, pts: &[TimePoint], opts: &SolverOptions) -> Result<Vec<Vec<CMatrix>>> {
    let n = sys.dimension();
    let k = pts.len();
    let mut table = vec![vec![identity(n); k]; k];
    for j in 0..k {
        let mut x = identity(n);
        for i in j + 1..k {
            x = sys.propagate(x, &pts[i - 1], &pts[i], opts)?;
            table[i][j] = x.clone();
        }
    }
    for i in 0..k {
        for j in i + 1..k {
            table[i][j] = inverse(&table[j][i]).ok_or(TransitionError::Singular)?;
        }
    }
    Ok(table)
}

/// Fundamental matrix `Φ(·, start)` with checkpoints, so that many evaluations
/// over a long interval each cost only a short integration.
#[derive(Debug, Clone)]
pub struct Fundamental {
    sys: LinearDynamicSystem,
    opts: SolverOptions,
    start: TimePoint,
    checkpoints: Vec<(TimePoint, CMatrix)>,
}

impl Fundamental {
    pub fn new(
        sys: &LinearDynamicSystem,
        start: &TimePoint,
        end: &TimePoint,
        spacing: f64,
        opts: &SolverOptions,
    ) -> Result<Self> {
        let ts = &sys.ts;
        let mut checkpoints = vec![(*start, identity(sys.n))];
        if end.cmp_position(start) == std::cmp::Ordering::Greater {
            let grid = ts.grid_between(start, end, spacing)?;
            let mut x = identity(sys.n);
            let mut prev = grid[0];
            for tp in grid.into_iter().skip(1) {
                x = sys.propagate(x, &prev, &tp, opts)?;
                checkpoints.push((tp, x.clone()));
                prev = tp;
            }
        }
        Ok(Fundamental {
            sys: sys.clone(),
            opts: *opts,
            start: *start,
            checkpoints,
        })
    }

    pub fn start(&self) -> &TimePoint {
        &self.start
    }

    pub fn system(&self) -> &LinearDynamicSystem {
        &self.sys
    }

    /// `Φ(tp, start)`.
    pub fn at(&self, tp: &TimePoint) -> Result<CMatrix> {
        if tp.cmp_position(&self.start) == std::cmp::Ordering::Less {
            let back = self.sys.transition(tp, &self.start, &self.opts)?;
            return Ok(back);
        }
        let idx = self
            .checkpoints
            .partition_point(|(cp, _)| cp.cmp_position(tp) != std::cmp::Ordering::Greater);
        let (cp, x) = &self.checkpoints[idx.saturating_sub(1)];
        if cp.cmp_position(tp) == std::cmp::Ordering::Equal {
            return Ok(x.clone());
        }
        self.sys.propagate(x.clone(), cp, tp, &self.opts)
    }

    /// `Φ(t, s) = Φ(t, start) Φ(s, start)^{-1}`.
    pub fn between(&self, t: &TimePoint, s: &TimePoint) -> Result<CMatrix> {
        let a = self.at(t)?;
        let b = self.at(s)?;
        let inv = inverse(&b).ok_or(TransitionError::Singular)?;
        Ok(a * inv)
    }
}

/// Whether a run is continuous (used by callers choosing difference stencils).
pub fn is_continuous_run(ts: &PeriodicTimeScale, run: usize) -> bool {
    matches!(ts.runs()[run].kind, RunKind::Continuous { .. })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{from_real_rows, relative_distance};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn discrete() -> LinearDynamicSystem {
        let ts = PeriodicTimeScale::integers(2).unwrap();
        LinearDynamicSystem::from_strings(
            ts,
            &[
                vec!["-1", "(2 + (-1)^t)/2"],
                vec!["(2 + (-1)^t)/2", "-1"],
            ],
        )
        .unwrap()
    }

    fn continuous() -> LinearDynamicSystem {
        let ts = PeriodicTimeScale::real_line(2.0 * std::f64::consts::PI).unwrap();
        LinearDynamicSystem::from_strings(ts, &[vec!["-1", "0"], vec!["sin(t)", "0"]]).unwrap()
    }

    fn hybrid() -> LinearDynamicSystem {
        let ts = PeriodicTimeScale::pattern(1.0, 1.0).unwrap();
        LinearDynamicSystem::from_strings(ts, &[vec!["-3 + sin(2*pi*t)", "1"], vec!["0", "-3"]]).unwrap()
    }

    fn opts() -> SolverOptions {
        SolverOptions::default()
    }

    #[test]
    fn discrete_monodromy_is_exact() {
        let sys = discrete();
        let m = transition_matrix(&sys, 2.0, 0.0, &opts()).unwrap();
        assert!(frobenius(&(m - from_real_rows(2, &[0.75, 0.0, 0.0, 0.75]))) < 1e-15);
        let x = solve_ivp(&sys, &CVector::from_element(2, c(1.0, 0.0)), 0.0, 1.0, &opts()).unwrap();
        assert!((x[0] - c(1.5, 0.0)).norm() < 1e-15 && (x[1] - c(1.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn continuous_monodromy() {
        let sys = continuous();
        let tau = 2.0 * std::f64::consts::PI;
        let m = transition_matrix(&sys, tau, 0.0, &opts().with_h_max(1e-3)).unwrap();
        let q = (-tau).exp();
        let expect = from_real_rows(2, &[q, 0.0, (1.0 - q) / 2.0, 1.0]);
        assert!(frobenius(&(m - expect)) < 1e-9);
        let x = solve_ivp(&sys, &CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]), 0.0, tau, &opts()).unwrap();
        assert!((x[0].re - q).abs() < 1e-9 && (x[1].re - (1.0 - q) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn identity_at_coincident_times_and_zero_state() {
        let sys = hybrid();
        assert_eq!(transition_matrix(&sys, 0.5, 0.5, &opts()).unwrap(), identity(2));
        let z = solve_ivp(&sys, &CVector::zeros(2), 0.0, 3.0, &opts()).unwrap();
        assert_eq!(z, CVector::zeros(2));
    }

    #[test]
    fn hybrid_monodromy_multiplier() {
        let sys = hybrid();
        let m = sys.monodromy_matrix(&sys.ts.period_start(0), &opts()).unwrap();
        let l = -2.0 * (-3f64).exp();
        assert!((m[(0, 0)].re - l).abs() < 1e-10);
        assert!((m[(1, 1)].re - l).abs() < 1e-10);
        assert!(m[(1, 0)].norm() < 1e-15);
        // cached copy is identical
        let again = sys.monodromy_matrix(&sys.ts.period_start(5), &opts()).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn backward_time_inverts() {
        let sys = hybrid();
        let f = transition_matrix(&sys, 2.5, 0.25, &opts()).unwrap();
        let b = transition_matrix(&sys, 0.25, 2.5, &opts()).unwrap();
        assert!(frobenius(&(f * b - identity(2))) < 1e-12);
    }

    #[test]
    fn peano_baker_examples() {
        let zero = LinearDynamicSystem::constant(PeriodicTimeScale::pattern(1.0, 1.0).unwrap(), CMatrix::zeros(2, 2)).unwrap();
        for k in 1..5 {
            let o = SolverOptions { pb_terms: k, ..opts() };
            assert_eq!(peano_baker(&zero, 3.0, 0.0, &o).unwrap(), identity(2));
        }
        // one term: I + ∫A
        let sys = hybrid();
        let o = SolverOptions { pb_terms: 1, ..opts() };
        let one = peano_baker(&sys, 2.0, 0.0, &o).unwrap();
        // ∫_0^2 A Δτ = ∫_0^1 A dτ + A(1)·1
        let expect = from_real_rows(2, &[-3.0 - 3.0 + (2.0 * std::f64::consts::PI).sin(), 2.0, 0.0, -6.0]) + identity(2);
        assert!(frobenius(&(one - expect)) < 1e-12);
        // finite sum on Z
        let sys = discrete();
        for k in 2..6 {
            let o = SolverOptions { pb_terms: k, ..opts() };
            let pb = peano_baker(&sys, 2.0, 0.0, &o).unwrap();
            let a0 = sys.coefficient_at(0.0).unwrap();
            let a1 = sys.coefficient_at(1.0).unwrap();
            let product = (identity(2) + a1) * (identity(2) + a0);
            assert!(frobenius(&(pb - product)) < 1e-15);
        }
    }

    #[test]
    fn matrix_exp_constant_examples() {
        let p11 = PeriodicTimeScale::pattern(1.0, 1.0).unwrap();
        let e = matrix_exp_constant(&from_real_rows(1, &[-3.0]), &p11, 2.0, 0.0, &opts()).unwrap();
        assert!((e[(0, 0)].re + 2.0 * (-3f64).exp()).abs() < 1e-14);
        let z = PeriodicTimeScale::integers(1).unwrap();
        let e = matrix_exp_constant(&identity(2), &z, 3.0, 0.0, &opts()).unwrap();
        assert!(frobenius(&(e - identity(2) * c(8.0, 0.0))) < 1e-13);
        let e = matrix_exp_constant(&CMatrix::zeros(2, 2), &p11, 3.0, 0.0, &opts()).unwrap();
        assert_eq!(e, identity(2));
        // agrees with integration of the constant system
        let a = from_real_rows(2, &[-0.4, 1.1, -0.7, 0.2]);
        let sys = LinearDynamicSystem::constant(p11.clone(), a.clone()).unwrap();
        let direct = transition_matrix(&sys, 2.5, 0.25, &opts()).unwrap();
        let series = matrix_exp_constant(&a, &p11, 2.5, 0.25, &opts()).unwrap();
        assert!(relative_distance(&direct, &series) < 1e-10);
    }

    #[test]
    fn nonhomogeneous_examples() {
        let z = PeriodicTimeScale::integers(1).unwrap();
        let sys = LinearDynamicSystem::from_strings(z, &[vec!["-1/2"]]).unwrap();
        let f = Forcing::parse(&["3.5"]).unwrap();
        let x = solve_nonhomogeneous(&sys, &f, &CVector::zeros(1), 0.0, 1.0, &opts()).unwrap();
        assert!((x[0] - c(3.5, 0.0)).norm() < 1e-15);

        let r = PeriodicTimeScale::real_line(1.0).unwrap();
        let sys = LinearDynamicSystem::from_strings(r, &[vec!["0"]]).unwrap();
        let f = Forcing::parse(&["1"]).unwrap();
        let x = solve_nonhomogeneous(&sys, &f, &CVector::zeros(1), 0.0, 2.75, &opts()).unwrap();
        assert!((x[0].re - 2.75).abs() < 1e-12);

        let sys = hybrid();
        let x0 = CVector::from_vec(vec![c(1.0, 0.0), c(-2.0, 0.0)]);
        let a = solve_nonhomogeneous(&sys, &Forcing::zero(2), &x0, 0.0, 2.5, &opts()).unwrap();
        let b = solve_ivp(&sys, &x0, 0.0, 2.5, &opts()).unwrap();
        assert!((a - b).norm() < 1e-12);
    }

    /// Direct integration of `x^Δ = Ax + f` with RK4 on runs and the Euler
    /// step at jumps, as an independent oracle for the variation-of-constants sweep.
    fn augmented_oracle(sys: &LinearDynamicSystem, f: &Forcing, x0: &CVector, t: f64) -> CVector {
        let n = sys.dimension();
        let ts = sys.timescale().clone();
        let fc = f.clone();
        let inner = sys.clone();
        let aug = LinearDynamicSystem::from_fn(ts.clone(), n + 1, move |ts, tp| {
            let mut m = CMatrix::zeros(n + 1, n + 1);
            m.view_mut((0, 0), (n, n)).copy_from(&inner.coefficient(tp)?);
            let v = fc.evaluate(ts.time(tp))?;
            for i in 0..n {
                m[(i, n)] = v[i];
            }
            Ok(m)
        })
        .unwrap();
        let mut y = CVector::zeros(n + 1);
        y.rows_mut(0, n).copy_from(x0);
        y[n] = c(1.0, 0.0);
        let out = solve_ivp(&aug, &y, 0.0, t, &SolverOptions { h_max: 1e-3, ..opts() }).unwrap();
        out.rows(0, n).into_owned()
    }

    #[test]
    fn variation_of_constants_matches_augmented_system() {
        for sys in [hybrid(), discrete(), continuous()] {
            let f = Forcing::parse(&["1 + cos(t)", "0.5"]).unwrap();
            let x0 = CVector::from_vec(vec![c(0.3, 0.0), c(-1.0, 0.0)]);
            let t = 3.0;
            let t = sys.ts.time(&sys.ts.floor_point(t, 1e-9));
            let a = solve_nonhomogeneous(&sys, &f, &x0, 0.0, t, &SolverOptions { h_max: 1e-3, ..opts() }).unwrap();
            let b = augmented_oracle(&sys, &f, &x0, t);
            assert!((&a - &b).norm() < 1e-8, "{a} {b}");
        }
    }

    #[test]
    fn rejects_bad_systems() {
        let z = PeriodicTimeScale::integers(1).unwrap();
        assert!(matches!(
            LinearDynamicSystem::from_strings(z.clone(), &[vec!["-1"]]),
            Err(TransitionError::NonRegressive { .. })
        ));
        let r = PeriodicTimeScale::real_line(1.0).unwrap();
        assert!(matches!(
            LinearDynamicSystem::from_strings(r.clone(), &[vec!["t"]]),
            Err(TransitionError::NotPeriodic { .. })
        ));
        assert!(matches!(
            LinearDynamicSystem::from_strings(r, &[vec!["1", "2"]]),
            Err(TransitionError::Dimension { .. })
        ));
        assert!(matches!(
            LinearDynamicSystem::from_strings(z, &[vec!["foo"]]),
            Err(TransitionError::Parse { .. })
        ));
    }

    #[test]
    fn fundamental_checkpoints_agree_with_direct_integration() {
        let sys = hybrid();
        let ts = sys.timescale();
        let fund = Fundamental::new(&sys, &ts.period_start(0), &ts.period_start(3), 0.1, &opts()).unwrap();
        for t in [0.0, 0.37, 1.0, 2.0, 2.5, 4.0, 4.99, 6.0] {
            let tp = ts.locate(t, 1e-9).unwrap();
            let direct = sys.transition(&tp, &ts.period_start(0), &opts()).unwrap();
            assert!(relative_distance(&fund.at(&tp).unwrap(), &direct) < 1e-12, "t={t}");
        }
        let t = ts.locate(4.25, 1e-9).unwrap();
        let s = ts.locate(0.5, 1e-9).unwrap();
        let direct = sys.transition(&t, &s, &opts()).unwrap();
        assert!(relative_distance(&fund.between(&t, &s).unwrap(), &direct) < 1e-10);
    }

    pub(crate) fn random_system(rng: &mut ChaCha8Rng, ts: PeriodicTimeScale, n: usize, budget: f64) -> LinearDynamicSystem {
        // A(t) = B + C sin(2πt/p) + D cos(2πt/p) with ‖B‖+‖C‖+‖D‖ ≤ budget/p
        let p = ts.period();
        let scale = budget / p / (3.0 * n as f64);
        let mut rows = Vec::new();
        for _ in 0..n {
            let mut row = Vec::new();
            for _ in 0..n {
                let b: f64 = rng.gen_range(-1.0..1.0) * scale;
                let s: f64 = rng.gen_range(-1.0..1.0) * scale;
                let k: f64 = rng.gen_range(-1.0..1.0) * scale;
                row.push(format!("{b:?} + {s:?}*sin(2*pi*t/{p:?}) + {k:?}*cos(2*pi*t/{p:?})"));
            }
            rows.push(row);
        }
        LinearDynamicSystem::from_strings(ts, &rows).unwrap()
    }

    #[test]
    fn peano_baker_agrees_with_piecewise_integration() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for ts in [
            PeriodicTimeScale::integers(2).unwrap(),
            PeriodicTimeScale::real_line(2.0).unwrap(),
            PeriodicTimeScale::pattern(1.0, 1.0).unwrap(),
        ] {
            for _ in 0..5 {
                let sys = random_system(&mut rng, ts.clone(), 3, 2.0);
                let p = ts.period();
                let pb = peano_baker(&sys, p, 0.0, &opts()).unwrap();
                let direct = transition_matrix(&sys, p, 0.0, &opts()).unwrap();
                assert!(frobenius(&(pb - direct)) < 1e-6);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn cocycle_and_shift_invariance(seed in 0u64..1000, s in 0.0f64..3.0, ds in 0.0f64..2.0, dt in 0.0f64..2.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ts = PeriodicTimeScale::pattern(1.0, 1.0).unwrap();
            let sys = random_system(&mut rng, ts.clone(), 2, 3.0);
            let o = opts();
            let t0 = ts.ceil_point(s, 1e-9);
            let mid = ts.ceil_point(s + ds, 1e-9);
            let t = ts.ceil_point(s + ds + dt, 1e-9);
            let whole = sys.transition(&t, &t0, &o).unwrap();
            let parts = sys.transition(&t, &mid, &o).unwrap() * sys.transition(&mid, &t0, &o).unwrap();
            prop_assert!(frobenius(&(&parts - &whole)) <= 1e-8 * frobenius(&whole));
            for k in 1..=3 {
                let shifted = sys.transition(&ts.shift(&t, k), &ts.shift(&t0, k), &o).unwrap();
                prop_assert!(frobenius(&(shifted - &whole)) <= 1e-7);
            }
            prop_assert!(determinant(&whole).norm() > 1e-12);
        }
    }
}
