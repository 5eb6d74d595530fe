//! Periodic time scales built from a repeating pattern of continuous runs and
//! isolated points.
//!
//! Times are addressed structurally by [`TimePoint`] (period index, run index,
//! offset inside the run) so that isolated points and period boundaries stay
//! exact no matter how many periods away from the anchor they are.

use std::cmp::Ordering;
use std::ops::{AddAssign, Mul};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

/// Default absolute membership tolerance.
/// Relative step used to approximate left limits at the end of a run.
pub const LEFT_LIMIT_FRACTION: f64 = 1e-7;

pub const DEFAULT_TOL: f64 = 1e-9;

const PERIOD_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TimeScaleError {
    #[error("time scale needs at least one run")]
    Empty,
    #[error("run {index}: continuous run length must be positive, got {length}")]
    NonPositiveLength { index: usize, length: f64 },
    #[error("run {index}: trailing gap must be non-negative and finite, got {gap}")]
    InvalidGap { index: usize, gap: f64 },
    #[error("run {index}: an isolated point needs a positive trailing gap")]
    PointWithoutGap { index: usize },
    #[error("period must be positive, got {0}")]
    NonPositivePeriod(f64),
    #[error("runs span {span} but the declared period is {period}")]
    PeriodMismatch { span: f64, period: f64 },
    #[error("maximum graininess {mu_max} exceeds the period {period}")]
    GraininessExceedsPeriod { mu_max: f64, period: f64 },
    #[error("period {period} is not a positive integer multiple of the base pattern length {base}")]
    NotAMultiple { period: f64, base: f64 },
    #[error("t = {0} is not a point of the time scale")]
    NotInTimeScale(f64),
    #[error("interval [{a}, {b}] is reversed")]
    ReversedInterval { a: f64, b: f64 },
    #[error("step bound must be positive, got {0}")]
    InvalidStep(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunKind {
    Continuous { length: f64 },
    Point,
}

/// One element of the repeating pattern, followed by a gap to the next run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Run {
    pub kind: RunKind,
    pub trailing_gap: f64,
}

impl Run {
    pub fn continuous(length: f64, trailing_gap: f64) -> Self {
        Run {
            kind: RunKind::Continuous { length },
            trailing_gap,
        }
    }

    pub fn point(trailing_gap: f64) -> Self {
        Run {
            kind: RunKind::Point,
            trailing_gap,
        }
    }

    pub fn length(&self) -> f64 {
        match self.kind {
            RunKind::Continuous { length } => length,
            RunKind::Point => 0.0,
        }
    }

    fn span(&self) -> f64 {
        self.length() + self.trailing_gap
    }
}

/// Structural address of a point of the time scale.
///
/// Canonical form: the right end of a continuous run with no trailing gap is
/// stored as offset 0 of the following run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimePoint {
    pub period: i64,
    pub run: usize,
    pub offset: f64,
}

impl TimePoint {
    fn key(&self) -> (i64, usize) {
        (self.period, self.run)
    }

    pub fn cmp_position(&self, other: &TimePoint) -> Ordering {
        self.key()
            .cmp(&other.key())
            .then(self.offset.total_cmp(&other.offset))
    }
}

/// A stretch of the time scale between two consecutive structural events.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Segment {
    /// Part of a continuous run, `from` and `to` are offsets inside it.
    Continuous {
        period: i64,
        run: usize,
        from: f64,
        to: f64,
    },
    /// A right-scattered point together with its graininess.
    Jump { at: TimePoint, mu: f64 },
}

/// Values that can be accumulated by the Δ-integral.
pub trait Integrand: Sized {
    fn scaled(&self, w: f64) -> Self;
    fn accumulate(&mut self, other: Self);
}

impl Integrand for f64 {
    fn scaled(&self, w: f64) -> Self {
        self * w
    }
    fn accumulate(&mut self, other: Self) {
        *self += other;
    }
}

impl Integrand for Complex64 {
    fn scaled(&self, w: f64) -> Self {
        self * w
    }
    fn accumulate(&mut self, other: Self) {
        *self += other;
    }
}

impl<T> Integrand for DMatrix<T>
where
    T: nalgebra::Scalar + Copy + AddAssign + Mul<f64, Output = T>,
{
    fn scaled(&self, w: f64) -> Self {
        self.map(|x| x * w)
    }
    fn accumulate(&mut self, other: Self) {
        self.zip_apply(&other, |a, b| *a += b);
    }
}

impl<T> Integrand for DVector<T>
where
    T: nalgebra::Scalar + Copy + AddAssign + Mul<f64, Output = T>,
{
    fn scaled(&self, w: f64) -> Self {
        self.map(|x| x * w)
    }
    fn accumulate(&mut self, other: Self) {
        self.zip_apply(&other, |a, b| *a += b);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicTimeScale {
    anchor: f64,
    period: f64,
    runs: Vec<Run>,
    starts: Vec<f64>,
    mu_max: f64,
}

impl PeriodicTimeScale {
    /// Builds a time scale whose period is the span of `runs`.
    pub fn new(anchor: f64, runs: Vec<Run>) -> Result<Self, TimeScaleError> {
        let span: f64 = runs.iter().map(Run::span).sum();
        Self::with_period(anchor, runs, span)
    }

    pub fn with_period(anchor: f64, runs: Vec<Run>, period: f64) -> Result<Self, TimeScaleError> {
        if runs.is_empty() {
            return Err(TimeScaleError::Empty);
        }
        for (index, run) in runs.iter().enumerate() {
            if !(run.trailing_gap >= 0.0 && run.trailing_gap.is_finite()) {
                return Err(TimeScaleError::InvalidGap {
                    index,
                    gap: run.trailing_gap,
                });
            }
            match run.kind {
                RunKind::Continuous { length } if !(length > 0.0 && length.is_finite()) => {
                    return Err(TimeScaleError::NonPositiveLength { index, length });
                }
                RunKind::Point if run.trailing_gap <= 0.0 => {
                    return Err(TimeScaleError::PointWithoutGap { index });
                }
                _ => {}
            }
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(TimeScaleError::NonPositivePeriod(period));
        }
        let mut starts = Vec::with_capacity(runs.len());
        let mut acc = 0.0;
        for run in &runs {
            starts.push(acc);
            acc += run.span();
        }
        if (acc - period).abs() > PERIOD_SUM_TOL * period.max(1.0) {
            return Err(TimeScaleError::PeriodMismatch { span: acc, period });
        }
        let mu_max = runs.iter().map(|r| r.trailing_gap).fold(0.0, f64::max);
        if mu_max > period {
            return Err(TimeScaleError::GraininessExceedsPeriod { mu_max, period });
        }
        Ok(PeriodicTimeScale {
            anchor,
            period,
            runs,
            starts,
            mu_max,
        })
    }

    /// The real line viewed as a `period`-periodic time scale.
    pub fn real_line(period: f64) -> Result<Self, TimeScaleError> {
        Self::new(0.0, vec![Run::continuous(period, 0.0)])
    }

    /// The lattice `hZ` with `period / h` points per period.
    pub fn lattice(h: f64, period: f64) -> Result<Self, TimeScaleError> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(TimeScaleError::InvalidStep(h));
        }
        let base = Self::new(0.0, vec![Run::point(h)])?;
        base.repeated_to(period)
    }

    /// The integers with period `period`.
    pub fn integers(period: u32) -> Result<Self, TimeScaleError> {
        Self::lattice(1.0, f64::from(period))
    }

    /// `P_{a,b}`: unit runs of length `a` separated by gaps of length `b`.
    pub fn pattern(a: f64, b: f64) -> Result<Self, TimeScaleError> {
        Self::new(0.0, vec![Run::continuous(a, b)])
    }

    /// Repeats the pattern so the period becomes `period`, which must be an
    /// integer multiple of the current one.
    pub fn repeated_to(&self, period: f64) -> Result<Self, TimeScaleError> {
        let ratio = period / self.period;
        let copies = ratio.round();
        if !(copies >= 1.0) || (ratio - copies).abs() > 1e-9 {
            return Err(TimeScaleError::NotAMultiple {
                period,
                base: self.period,
            });
        }
        let runs: Vec<Run> = (0..copies as usize)
            .flat_map(|_| self.runs.iter().copied())
            .collect();
        Self::with_period(self.anchor, runs, period)
    }

    pub fn with_anchor(mut self, anchor: f64) -> Self {
        self.anchor = anchor;
        self
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn runs(&self) -> &[Run] {
        &self.runs
    }

    pub fn mu_max(&self) -> f64 {
        self.mu_max
    }

    /// True when every point is right-scattered with the same graininess.
    pub fn constant_graininess(&self) -> Option<f64> {
        if self
            .runs
            .iter()
            .all(|r| matches!(r.kind, RunKind::Continuous { .. }) && r.trailing_gap == 0.0)
        {
            return Some(0.0);
        }
        let first = self.runs[0].trailing_gap;
        self.runs
            .iter()
            .all(|r| r.kind == RunKind::Point && r.trailing_gap == first)
            .then_some(first)
    }

    fn normalize(&self, mut tp: TimePoint) -> TimePoint {
        if let RunKind::Continuous { length } = self.runs[tp.run].kind {
            if tp.offset >= length && self.runs[tp.run].trailing_gap == 0.0 {
                tp = self.next_run_start(&tp);
            }
        }
        tp
    }

    fn next_run_start(&self, tp: &TimePoint) -> TimePoint {
        if tp.run + 1 < self.runs.len() {
            TimePoint {
                period: tp.period,
                run: tp.run + 1,
                offset: 0.0,
            }
        } else {
            TimePoint {
                period: tp.period + 1,
                run: 0,
                offset: 0.0,
            }
        }
    }

    /// First point of the period with index `k`.
    pub fn period_start(&self, k: i64) -> TimePoint {
        TimePoint {
            period: k,
            run: 0,
            offset: 0.0,
        }
    }

    /// Position of a point inside its period, measured from the period start.
    pub fn phase(&self, tp: &TimePoint) -> f64 {
        self.starts[tp.run] + tp.offset
    }

    pub fn time(&self, tp: &TimePoint) -> f64 {
        self.anchor + tp.period as f64 * self.period + self.phase(tp)
    }

    /// The same point moved into period 0; periodic coefficients are
    /// evaluated here.
    pub fn reduced_time(&self, tp: &TimePoint) -> f64 {
        self.anchor + self.phase(tp)
    }

    /// `tp + k·p`.
    pub fn shift(&self, tp: &TimePoint, k: i64) -> TimePoint {
        TimePoint {
            period: tp.period + k,
            ..*tp
        }
    }

    /// `(b - a) / p`, computed from the structure so that whole periods are exact.
    pub fn periods_between(&self, a: &TimePoint, b: &TimePoint) -> f64 {
        (b.period - a.period) as f64 + (self.phase(b) - self.phase(a)) / self.period
    }

    /// `b - a` computed structurally.
    pub fn distance(&self, a: &TimePoint, b: &TimePoint) -> f64 {
        (b.period - a.period) as f64 * self.period + (self.phase(b) - self.phase(a))
    }

    /// Locates `t` within `tol`, snapping to the exact structural point.
    pub fn locate(&self, t: f64, tol: f64) -> Option<TimePoint> {
        if !t.is_finite() {
            return None;
        }
        let rel = t - self.anchor;
        let k = (rel / self.period).floor();
        let phase = rel - k * self.period;
        let k = k as i64;
        if let Some(tp) = self.locate_phase(k, phase, tol) {
            return Some(tp);
        }
        // close to the next period start
        if self.period - phase <= tol {
            return Some(self.period_start(k + 1));
        }
        None
    }

    fn locate_phase(&self, k: i64, phase: f64, tol: f64) -> Option<TimePoint> {
        for (run_idx, run) in self.runs.iter().enumerate() {
            let start = self.starts[run_idx];
            match run.kind {
                RunKind::Continuous { length } => {
                    if phase >= start - tol && phase <= start + length + tol {
                        let mut offset = (phase - start).clamp(0.0, length);
                        if offset <= tol {
                            offset = 0.0;
                        } else if length - offset <= tol {
                            offset = length;
                        }
                        return Some(self.normalize(TimePoint {
                            period: k,
                            run: run_idx,
                            offset,
                        }));
                    }
                }
                RunKind::Point => {
                    if (phase - start).abs() <= tol {
                        return Some(TimePoint {
                            period: k,
                            run: run_idx,
                            offset: 0.0,
                        });
                    }
                }
            }
        }
        None
    }

    pub fn contains(&self, t: f64, tol: f64) -> bool {
        self.locate(t, tol).is_some()
    }

    fn require(&self, t: f64) -> Result<TimePoint, TimeScaleError> {
        self.locate(t, DEFAULT_TOL)
            .ok_or(TimeScaleError::NotInTimeScale(t))
    }

    /// Graininess of a structural point.
    pub fn mu(&self, tp: &TimePoint) -> f64 {
        let run = &self.runs[tp.run];
        match run.kind {
            RunKind::Continuous { length } if tp.offset < length => 0.0,
            _ => run.trailing_gap,
        }
    }

    pub fn graininess(&self, t: f64) -> Result<f64, TimeScaleError> {
        Ok(self.mu(&self.require(t)?))
    }

    /// Forward jump of a structural point.
    pub fn sigma_point(&self, tp: &TimePoint) -> TimePoint {
        if self.mu(tp) > 0.0 {
            self.next_run_start(tp)
        } else {
            *tp
        }
    }

    pub fn sigma(&self, t: f64) -> Result<f64, TimeScaleError> {
        let tp = self.require(t)?;
        Ok(self.time(&self.sigma_point(&tp)))
    }

    /// Smallest point of the time scale that is `>= t - tol`.
    pub fn ceil_point(&self, t: f64, tol: f64) -> TimePoint {
        if let Some(tp) = self.locate(t, tol) {
            return tp;
        }
        let rel = t - self.anchor;
        let k = (rel / self.period).floor();
        let phase = rel - k * self.period;
        let k = k as i64;
        for (run_idx, &start) in self.starts.iter().enumerate() {
            if start >= phase {
                return TimePoint {
                    period: k,
                    run: run_idx,
                    offset: 0.0,
                };
            }
        }
        self.period_start(k + 1)
    }

    /// Largest point of the time scale that is `<= t + tol`.
    pub fn floor_point(&self, t: f64, tol: f64) -> TimePoint {
        if let Some(tp) = self.locate(t, tol) {
            return tp;
        }
        let rel = t - self.anchor;
        let k = (rel / self.period).floor();
        let phase = rel - k * self.period;
        let k = k as i64;
        for run_idx in (0..self.runs.len()).rev() {
            let start = self.starts[run_idx];
            if start <= phase {
                let offset = self.runs[run_idx].length();
                return TimePoint {
                    period: k,
                    run: run_idx,
                    offset,
                };
            }
        }
        let last = self.runs.len() - 1;
        TimePoint {
            period: k - 1,
            run: last,
            offset: self.runs[last].length(),
        }
    }

    /// Splits `[from, to]` into continuous pieces and jumps, in order.
    /// Returns an empty list when `to <= from`.
    pub fn segments(&self, from: &TimePoint, to: &TimePoint) -> Vec<Segment> {
        let mut out = Vec::new();
        let mut cur = self.normalize(*from);
        let to = self.normalize(*to);
        while cur.cmp_position(&to) == Ordering::Less {
            let run = &self.runs[cur.run];
            match run.kind {
                RunKind::Continuous { length } => {
                    let end = if cur.key() == to.key() {
                        to.offset
                    } else {
                        length
                    };
                    if end > cur.offset {
                        out.push(Segment::Continuous {
                            period: cur.period,
                            run: cur.run,
                            from: cur.offset,
                            to: end,
                        });
                        cur.offset = end;
                    }
                    if cur.cmp_position(&to) != Ordering::Less {
                        break;
                    }
                    if run.trailing_gap > 0.0 {
                        out.push(Segment::Jump {
                            at: cur,
                            mu: run.trailing_gap,
                        });
                    }
                    cur = self.next_run_start(&cur);
                }
                RunKind::Point => {
                    out.push(Segment::Jump {
                        at: cur,
                        mu: run.trailing_gap,
                    });
                    cur = self.next_run_start(&cur);
                }
            }
        }
        out
    }

    /// Ordered points of `T ∩ [a, b]`: every isolated point exactly, every
    /// continuous piece subdivided with steps at most `h_max`.
    pub fn grid(&self, a: f64, b: f64, h_max: f64) -> Result<Vec<TimePoint>, TimeScaleError> {
        if a > b {
            return Err(TimeScaleError::ReversedInterval { a, b });
        }
        let from = self.ceil_point(a, DEFAULT_TOL);
        let to = self.floor_point(b, DEFAULT_TOL);
        if self.time(&from) > b + DEFAULT_TOL {
            return Ok(Vec::new());
        }
        self.grid_between(&from, &to, h_max)
    }

    pub fn grid_between(
        &self,
        from: &TimePoint,
        to: &TimePoint,
        h_max: f64,
    ) -> Result<Vec<TimePoint>, TimeScaleError> {
        if !(h_max > 0.0) {
            return Err(TimeScaleError::InvalidStep(h_max));
        }
        let from = self.normalize(*from);
        let mut points = vec![from];
        for seg in self.segments(&from, to) {
            match seg {
                Segment::Continuous {
                    period,
                    run,
                    from,
                    to,
                } => {
                    let steps = ((to - from) / h_max).ceil().max(1.0) as usize;
                    for j in 1..=steps {
                        let offset = if j == steps {
                            to
                        } else {
                            from + (to - from) * j as f64 / steps as f64
                        };
                        points.push(self.normalize(TimePoint {
                            period,
                            run,
                            offset,
                        }));
                    }
                }
                Segment::Jump { at, .. } => {
                    points.push(self.next_run_start(&at));
                }
            }
        }
        Ok(points)
    }

    /// Quadrature nodes and weights for `∫_from^to f Δτ`: composite Simpson on
    /// continuous pieces, weight `μ(τ)` at each right-scattered point.
    pub fn quadrature_nodes(&self, from: &TimePoint, to: &TimePoint, h_max: f64) -> Vec<(TimePoint, f64)> {
        let mut nodes = Vec::new();
        for seg in self.segments(from, to) {
            match seg {
                Segment::Continuous {
                    period,
                    run,
                    from,
                    to,
                } => {
                    let len = to - from;
                    let panels = (len / (2.0 * h_max)).ceil().max(1.0) as usize;
                    let n = 2 * panels;
                    let h = len / n as f64;
                    for j in 0..=n {
                        let w = if j == 0 || j == n {
                            1.0
                        } else if j % 2 == 1 {
                            4.0
                        } else {
                            2.0
                        };
                        let at = |offset| TimePoint {
                            period,
                            run,
                            offset,
                        };
                        let weight = w * h / 3.0;
                        let before_gap =
                            self.runs[run].trailing_gap > 0.0 && to >= self.runs[run].length();
                        if j == n && before_gap {
                            // the run's right end is itself right-scattered; Simpson needs
                            // the left limit, taken by linear extrapolation from inside
                            let d = LEFT_LIMIT_FRACTION * h;
                            nodes.push((at(to - d), 2.0 * weight));
                            nodes.push((at(to - 2.0 * d), -weight));
                        } else {
                            let offset = if j == n { to } else { from + h * j as f64 };
                            nodes.push((at(offset), weight));
                        }
                    }
                }
                Segment::Jump { at, mu } => nodes.push((at, mu)),
            }
        }
        nodes
    }

    /// `∫_a^b f(τ) Δτ` for `a <= b` in the time scale.
    pub fn delta_integral<T, E, F>(&self, a: f64, b: f64, h_max: f64, f: F) -> Result<T, E>
    where
        T: Integrand,
        E: From<TimeScaleError>,
        F: FnMut(&TimePoint) -> Result<T, E>,
    {
        let from = self.require(a)?;
        let to = self.require(b)?;
        if from.cmp_position(&to) == Ordering::Greater {
            return Err(TimeScaleError::ReversedInterval { a, b }.into());
        }
        self.delta_integral_between(&from, &to, h_max, f)
    }

    pub fn delta_integral_between<T, E, F>(
        &self,
        from: &TimePoint,
        to: &TimePoint,
        h_max: f64,
        mut f: F,
    ) -> Result<T, E>
    where
        T: Integrand,
        E: From<TimeScaleError>,
        F: FnMut(&TimePoint) -> Result<T, E>,
    {
        if !(h_max > 0.0) {
            return Err(TimeScaleError::InvalidStep(h_max).into());
        }
        let nodes = self.quadrature_nodes(from, to, h_max);
        let mut acc: Option<T> = None;
        for (node, w) in nodes {
            let term = f(&node)?.scaled(w);
            match acc.as_mut() {
                Some(a) => a.accumulate(term),
                None => acc = Some(term),
            }
        }
        match acc {
            Some(a) => Ok(a),
            None => Ok(f(from)?.scaled(0.0)),
        }
    }

    /// Generalized polynomials `h_0..=h_{k_max}` at `t` with base point `t0`.
    ///
    /// Inside a continuous piece the recursion `h_{k+1}^Δ = h_k` integrates
    /// exactly as a Taylor polynomial; a jump of size `μ` adds `μ·h_k`.
    pub fn h_polynomials_between(&self, t0: &TimePoint, t: &TimePoint, k_max: usize) -> Vec<f64> {
        let mut h = vec![0.0; k_max + 1];
        h[0] = 1.0;
        for seg in self.segments(t0, t) {
            match seg {
                Segment::Continuous { from, to, .. } => {
                    let s = to - from;
                    let old = h.clone();
                    for k in 0..=k_max {
                        let mut term = 1.0;
                        let mut acc = old[k];
                        for j in 1..=k {
                            term *= s / j as f64;
                            acc += old[k - j] * term;
                        }
                        h[k] = acc;
                    }
                }
                Segment::Jump { mu, .. } => {
                    for k in (1..=k_max).rev() {
                        h[k] += mu * h[k - 1];
                    }
                }
            }
        }
        h
    }

    pub fn h_polynomial(&self, k: usize, t: f64, t0: f64) -> Result<f64, TimeScaleError> {
        let tp = self.require(t)?;
        let tp0 = self.require(t0)?;
        if tp.cmp_position(&tp0) == Ordering::Less {
            return Err(TimeScaleError::ReversedInterval { a: t0, b: t });
        }
        Ok(self.h_polynomials_between(&tp0, &tp, k)[k])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p11() -> PeriodicTimeScale {
        PeriodicTimeScale::pattern(1.0, 1.0).unwrap()
    }

    fn z() -> PeriodicTimeScale {
        PeriodicTimeScale::integers(1).unwrap()
    }

    #[test]
    fn membership() {
        assert!(p11().contains(0.5, DEFAULT_TOL));
        assert!(!p11().contains(1.5, DEFAULT_TOL));
        assert!(p11().contains(2.0, DEFAULT_TOL));
        assert!(p11().contains(-1.0, DEFAULT_TOL));
        assert!(!p11().contains(-0.5, DEFAULT_TOL));
        assert!(z().contains(3.0, DEFAULT_TOL));
        assert!(!z().contains(3.5, DEFAULT_TOL));
        assert!(z().contains(3.0 + 1e-12, DEFAULT_TOL));
    }

    #[test]
    fn graininess_values() {
        assert_eq!(p11().graininess(0.5).unwrap(), 0.0);
        assert_eq!(p11().graininess(1.0).unwrap(), 1.0);
        assert_eq!(p11().graininess(0.0).unwrap(), 0.0);
        for t in [-4.0, 0.0, 7.0, 1000.0] {
            assert_eq!(z().graininess(t).unwrap(), 1.0);
        }
        assert!(matches!(
            p11().graininess(1.5),
            Err(TimeScaleError::NotInTimeScale(_))
        ));
    }

    #[test]
    fn forward_jump() {
        assert_eq!(p11().sigma(1.0).unwrap(), 2.0);
        let r = PeriodicTimeScale::real_line(2.0).unwrap();
        for t in [0.0, 0.3, 1.9999, 2.0, 17.25] {
            assert!((r.sigma(t).unwrap() - t).abs() < 1e-12);
        }
        assert_eq!(z().sigma(7.0).unwrap(), 8.0);
    }

    #[test]
    fn grids() {
        let ts = p11();
        let g: Vec<f64> = ts
            .grid(0.0, 2.0, 0.5)
            .unwrap()
            .iter()
            .map(|p| ts.time(p))
            .collect();
        assert_eq!(g, vec![0.0, 0.5, 1.0, 2.0]);
        let g: Vec<f64> = ts
            .grid(0.0, 2.0, 0.3)
            .unwrap()
            .iter()
            .map(|p| ts.time(p))
            .collect();
        assert!(g.contains(&1.0) && g.contains(&2.0) && g.len() == 6);

        let zs = z();
        let g: Vec<f64> = zs
            .grid(0.0, 3.0, 0.1)
            .unwrap()
            .iter()
            .map(|p| zs.time(p))
            .collect();
        assert_eq!(g, vec![0.0, 1.0, 2.0, 3.0]);

        let unit = PeriodicTimeScale::real_line(1.0).unwrap();
        let g: Vec<f64> = unit
            .grid(0.0, 1.0, 0.25)
            .unwrap()
            .iter()
            .map(|p| unit.time(p))
            .collect();
        assert_eq!(g, vec![0.0, 0.25, 0.5, 0.75, 1.0]);

        // endpoints outside the scale snap inward
        let g: Vec<f64> = ts
            .grid(1.5, 3.2, 1.0)
            .unwrap()
            .iter()
            .map(|p| ts.time(p))
            .collect();
        assert_eq!(g, vec![2.0, 3.0]);
    }

    #[test]
    fn delta_integrals() {
        let one = |_: &TimePoint| Ok::<f64, TimeScaleError>(1.0);
        assert!((p11().delta_integral(0.0, 2.0, 0.1, one).unwrap() - 2.0).abs() < 1e-14);
        assert!((z().delta_integral(0.0, 3.0, 0.1, one).unwrap() - 3.0).abs() < 1e-14);
        let ts = p11();
        let ident = |p: &TimePoint| Ok::<f64, TimeScaleError>(ts.time(p));
        let v = ts.delta_integral(0.0, 2.0, 0.1, ident).unwrap();
        assert!((v - 1.5).abs() < 1e-14, "{v}");
    }

    #[test]
    fn delta_integral_matches_fine_midpoint_oracle() {
        // closed-form against an independent midpoint sum over a fine partition
        let ts = p11();
        let f = |t: f64| (3.0 * t).sin() + t * t;
        let got = ts
            .delta_integral(0.0, 4.0, 0.005, |p: &TimePoint| {
                Ok::<f64, TimeScaleError>(f(ts.time(p)))
            })
            .unwrap();
        let n = 200_000;
        let mut oracle = 0.0;
        for run_start in [0.0, 2.0] {
            let h = 1.0 / n as f64;
            for j in 0..n {
                oracle += f(run_start + (j as f64 + 0.5) * h) * h;
            }
            oracle += f(run_start + 1.0) * 1.0;
        }
        assert!((got - oracle).abs() < 1e-8, "{got} vs {oracle}");
    }

    #[test]
    fn generalized_polynomials() {
        let r = PeriodicTimeScale::real_line(1.0).unwrap();
        for t in [0.0, 0.5, 2.0, 3.7] {
            assert!((r.h_polynomial(2, t, 0.0).unwrap() - t * t / 2.0).abs() < 1e-12);
            assert_eq!(r.h_polynomial(0, t, 0.0).unwrap(), 1.0);
        }
        assert!((z().h_polynomial(2, 3.0, 0.0).unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn generalized_polynomials_match_direct_summation_on_z() {
        // h_{k+1}(t,0) = Σ_{s=0}^{t-1} h_k(s,0) by direct summation
        let zs = z();
        let n = 9usize;
        let mut table = vec![vec![0.0f64; n + 1]; 6];
        table[0] = vec![1.0; n + 1];
        for k in 0..5 {
            for t in 0..=n {
                table[k + 1][t] = (0..t).map(|s| table[k][s]).sum();
            }
        }
        for k in 0..6 {
            for t in 0..=n {
                let got = zs.h_polynomial(k, t as f64, 0.0).unwrap();
                assert!((got - table[k][t]).abs() < 1e-9, "k={k} t={t}");
            }
        }
    }

    #[test]
    fn generalized_polynomials_match_recursive_delta_integral_on_hybrid() {
        let ts = p11();
        let h1 = |tp: &TimePoint| -> Result<f64, TimeScaleError> {
            let t0 = ts.period_start(0);
            Ok(ts.h_polynomials_between(&t0, tp, 1)[1])
        };
        for t in [0.5, 1.0, 2.0, 2.75, 4.0] {
            let direct = ts.h_polynomial(2, t, 0.0).unwrap();
            let via_integral: f64 = ts.delta_integral(0.0, t, 0.01, h1).unwrap();
            assert!((direct - via_integral).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn construction_errors() {
        assert_eq!(
            PeriodicTimeScale::new(0.0, vec![]),
            Err(TimeScaleError::Empty)
        );
        assert!(matches!(
            PeriodicTimeScale::new(0.0, vec![Run::point(0.0)]),
            Err(TimeScaleError::PointWithoutGap { .. })
        ));
        assert!(matches!(
            PeriodicTimeScale::new(0.0, vec![Run::continuous(-1.0, 1.0)]),
            Err(TimeScaleError::NonPositiveLength { .. })
        ));
        assert!(matches!(
            PeriodicTimeScale::with_period(0.0, vec![Run::continuous(1.0, 1.0)], 3.0),
            Err(TimeScaleError::PeriodMismatch { .. })
        ));
        assert!(matches!(
            p11().repeated_to(3.0),
            Err(TimeScaleError::NotAMultiple { .. })
        ));
        assert_eq!(p11().repeated_to(4.0).unwrap().runs().len(), 2);
    }

    #[test]
    fn far_periods_stay_exact() {
        let ts = p11();
        let far = ts.shift(&TimePoint { period: 0, run: 0, offset: 1.0 }, 1_000_000);
        assert_eq!(ts.mu(&far), 1.0);
        assert_eq!(ts.time(&ts.sigma_point(&far)), 2_000_002.0);
        let a = ts.period_start(0);
        assert_eq!(ts.periods_between(&a, &far), 1_000_000.5);
    }

    proptest! {
        #[test]
        fn graininess_and_membership_are_periodic(phase in 0.0f64..2.0, k in -50i64..50) {
            let ts = p11();
            let t = phase;
            let shifted = t + k as f64 * ts.period();
            prop_assert_eq!(ts.contains(t, DEFAULT_TOL), ts.contains(shifted, DEFAULT_TOL));
            if let (Some(a), Some(b)) = (ts.locate(t, DEFAULT_TOL), ts.locate(shifted, DEFAULT_TOL)) {
                prop_assert_eq!(ts.mu(&a), ts.mu(&b));
            }
        }

        #[test]
        fn delta_integral_is_additive(a in 0.0f64..3.0, b in 0.0f64..3.0, c in 0.0f64..3.0) {
            let ts = PeriodicTimeScale::new(0.0, vec![Run::continuous(0.7, 0.3), Run::point(0.5)]).unwrap();
            let mut pts = [a, b, c].map(|x| ts.time(&ts.ceil_point(x, DEFAULT_TOL)));
            pts.sort_by(f64::total_cmp);
            let f = |p: &TimePoint| Ok::<f64, TimeScaleError>((ts.time(p)).cos() * 2.0);
            let ab: f64 = ts.delta_integral(pts[0], pts[1], 0.01, f).unwrap();
            let bc: f64 = ts.delta_integral(pts[1], pts[2], 0.01, f).unwrap();
            let ac: f64 = ts.delta_integral(pts[0], pts[2], 0.01, f).unwrap();
            prop_assert!((ab + bc - ac).abs() < 1e-9);
        }

        #[test]
        fn grid_points_are_members(a in -3.0f64..3.0, len in 0.0f64..5.0, h in 0.05f64..1.0) {
            let ts = PeriodicTimeScale::new(0.25, vec![Run::continuous(0.7, 0.3), Run::point(0.5), Run::point(0.25)]).unwrap();
            let grid = ts.grid(a, a + len, h).unwrap();
            for w in grid.windows(2) {
                prop_assert!(ts.time(&w[1]) > ts.time(&w[0]));
                prop_assert!(ts.distance(&w[0], &w[1]) <= h.max(0.5) + 1e-12);
            }
            for p in &grid {
                prop_assert!(ts.contains(ts.time(p), 1e-12));
            }
        }

        #[test]
        fn h_polynomials_are_nonnegative_and_monotone(k in 0usize..5, s in 0.0f64..4.0, ds in 0.0f64..2.0) {
            let ts = PeriodicTimeScale::new(0.0, vec![Run::continuous(0.5, 0.5), Run::point(1.0)]).unwrap();
            let t0 = ts.period_start(0);
            let a = ts.ceil_point(s, DEFAULT_TOL);
            let b = ts.ceil_point(s + ds, DEFAULT_TOL);
            let ha = ts.h_polynomials_between(&t0, &a, k)[k];
            let hb = ts.h_polynomials_between(&t0, &b, k)[k];
            prop_assert!(ha >= 0.0);
            prop_assert!(hb >= ha - 1e-12);
        }
    }
}
