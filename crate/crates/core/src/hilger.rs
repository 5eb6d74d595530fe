//! Scalar Hilger algebra on a time scale: circle-plus/minus, the cylinder
//! transformation, Hilger imaginary numbers and the scalar exponential.
//!
//! All logarithms are principal, `Arg ∈ (-π, π]`.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::timescale::{PeriodicTimeScale, TimePoint, TimeScaleError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HilgerError {
    #[error("non-regressive value: 1 + μ·z = 0 for z = {z}, μ = {mu}")]
    NonRegressive { z: Complex64, mu: f64 },
    #[error("frequency {omega} lies outside the principal strip (-π/h, π/h] for h = {h}")]
    OutsideStrip { omega: f64, h: f64 },
    #[error("graininess must be non-negative, got {0}")]
    NegativeGraininess(f64),
    #[error(transparent)]
    TimeScale(#[from] TimeScaleError),
    #[error("exponent evaluation failed: {0}")]
    Evaluation(String),
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Principal logarithm with the negative real axis mapped to `Arg = π`.
pub fn principal_ln(z: Complex64) -> Complex64 {
    if z.im == 0.0 && z.re < 0.0 {
        return Complex64::new((-z.re).ln(), PI);
    }
    z.ln()
}

/// Principal real power `z^r` with the negative real axis mapped to `Arg = π`.
pub fn principal_powf(z: Complex64, r: f64) -> Complex64 {
    if r == 0.0 {
        return ONE;
    }
    if z.im == 0.0 && z.re > 0.0 {
        return Complex64::new(z.re.powf(r), 0.0);
    }
    if r.fract() == 0.0 && r.abs() <= 64.0 {
        return z.powi(r as i32);
    }
    (principal_ln(z) * r).exp()
}

/// `a ⊕ b = a + b + μab`.
pub fn circle_plus(a: Complex64, b: Complex64, mu: f64) -> Complex64 {
    a + b + a * b * mu
}

/// `a ⊖ b = (a - b) / (1 + μb)`.
pub fn circle_minus(a: Complex64, b: Complex64, mu: f64) -> Result<Complex64, HilgerError> {
    let denom = ONE + b * mu;
    if denom == ZERO {
        return Err(HilgerError::NonRegressive { z: b, mu });
    }
    Ok((a - b) / denom)
}

/// `⊖b = -b / (1 + μb)`.
pub fn circle_negate(b: Complex64, mu: f64) -> Result<Complex64, HilgerError> {
    circle_minus(ZERO, b, mu)
}

/// Cylinder transformation `ξ_μ(z) = Log(1 + μz)/μ`, and `z` when `μ = 0`.
pub fn cylinder(z: Complex64, mu: f64) -> Result<Complex64, HilgerError> {
    if mu < 0.0 {
        return Err(HilgerError::NegativeGraininess(mu));
    }
    if mu == 0.0 {
        return Ok(z);
    }
    let w = ONE + z * mu;
    if w == ZERO {
        return Err(HilgerError::NonRegressive { z, mu });
    }
    Ok(principal_ln(w) / mu)
}

/// Hilger purely imaginary number `(e^{iωh} - 1)/h`, `iω` when `h = 0`.
pub fn hilger_imaginary(omega: f64, h: f64) -> Result<Complex64, HilgerError> {
    if h < 0.0 {
        return Err(HilgerError::NegativeGraininess(h));
    }
    if h == 0.0 {
        return Ok(Complex64::new(0.0, omega));
    }
    if !(omega > -PI / h && omega <= PI / h) {
        return Err(HilgerError::OutsideStrip { omega, h });
    }
    Ok(unit_rotation_rate(omega, h))
}

/// `(e^{iωh} - 1)/h` without the strip restriction. The value only depends on
/// `ωh mod 2π`, so this is the Hilger imaginary number of the reduced frequency.
pub fn unit_rotation_rate(omega: f64, h: f64) -> Complex64 {
    if h == 0.0 {
        return Complex64::new(0.0, omega);
    }
    let theta = omega * h;
    // cos θ - 1 = -2 sin²(θ/2) avoids cancellation for small θ
    let s = (theta / 2.0).sin();
    Complex64::new(-2.0 * s * s, theta.sin()) / h
}

/// Hilger real part `(|1 + μz| - 1)/μ`, `Re z` when `μ = 0`.
pub fn hilger_real_part(z: Complex64, mu: f64) -> f64 {
    if mu == 0.0 {
        z.re
    } else {
        ((ONE + z * mu).norm() - 1.0) / mu
    }
}

/// Hilger circle membership: `|1 + zμ| < 1` (or `<=` when closed); left
/// half-plane when `μ = 0`.
pub fn in_hilger_circle(z: Complex64, mu: f64, closed: bool) -> bool {
    if mu == 0.0 {
        return if closed { z.re <= 0.0 } else { z.re < 0.0 };
    }
    let r = (ONE + z * mu).norm();
    if closed {
        r <= 1.0
    } else {
        r < 1.0
    }
}

/// Scalar time-scale exponential `e_γ(t, t0)` for `t >= t0`.
///
/// Continuous pieces contribute `exp(∫γ)` (composite Simpson with step at most
/// `h_max`); each right-scattered point contributes the exact factor
/// `1 + μ(τ)γ(τ)`. For `t < t0` the reciprocal of the forward value is returned.
pub fn scalar_exp_between<F>(
    ts: &PeriodicTimeScale,
    gamma: F,
    t0: &TimePoint,
    t: &TimePoint,
    h_max: f64,
) -> Result<Complex64, HilgerError>
where
    F: Fn(&TimePoint) -> Complex64,
{
    if t.cmp_position(t0) == std::cmp::Ordering::Less {
        return Ok(scalar_exp_between(ts, gamma, t, t0, h_max)?.inv());
    }
    if !(h_max > 0.0) {
        return Err(TimeScaleError::InvalidStep(h_max).into());
    }
    let mut log_sum = ZERO;
    let mut factor = ONE;
    for (node, w) in ts.quadrature_nodes(t0, t, h_max) {
        let z = gamma(&node);
        let mu = ts.mu(&node);
        if mu > 0.0 {
            let step = ONE + z * mu;
            if step == ZERO {
                return Err(HilgerError::NonRegressive { z, mu });
            }
            factor *= step;
        } else {
            log_sum += z * w;
        }
    }
    Ok(factor * log_sum.exp())
}

/// Real-time front end of [`scalar_exp_between`]; `gamma` receives absolute time.
pub fn scalar_exp<F>(
    ts: &PeriodicTimeScale,
    gamma: F,
    t: f64,
    t0: f64,
    h_max: f64,
) -> Result<Complex64, HilgerError>
where
    F: Fn(f64) -> Complex64,
{
    let tol = crate::timescale::DEFAULT_TOL;
    let tp = ts
        .locate(t, tol)
        .ok_or(TimeScaleError::NotInTimeScale(t))?;
    let tp0 = ts
        .locate(t0, tol)
        .ok_or(TimeScaleError::NotInTimeScale(t0))?;
    scalar_exp_between(ts, |p| gamma(ts.time(p)), &tp0, &tp, h_max)
}

/// Uniform regressivity over one period: `|1 + μ(t)γ(t)| >= 1/δ` at every
/// grid point of `[t0, t0 + horizon]` with step `h_max`.
pub fn uniformly_regressive_check<F>(
    gamma: F,
    ts: &PeriodicTimeScale,
    t0: f64,
    horizon: f64,
    delta: f64,
    h_max: f64,
) -> Result<bool, HilgerError>
where
    F: Fn(&TimePoint) -> Complex64,
{
    if !(delta > 0.0) {
        return Ok(false);
    }
    let bound = 1.0 / delta;
    let grid = ts.grid(t0, t0 + horizon, h_max)?;
    Ok(grid.iter().all(|p| {
        let mu = ts.mu(p);
        (ONE + gamma(p) * mu).norm() >= bound * (1.0 - 1e-12)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn circle_plus_examples() {
        let z = c(0.3, -1.2);
        assert_eq!(circle_plus(ZERO, z, 0.7), z);
        assert_eq!(circle_plus(c(-1.0, 0.0), c(-1.0, 0.0), 1.0), c(-1.0, 0.0));
        let gamma = c(-(3f64.sqrt()) / 2.0 - 1.0, 0.0);
        let ipi = hilger_imaginary(PI, 1.0).unwrap();
        assert!(close(
            circle_plus(gamma, ipi, 1.0),
            c(3f64.sqrt() / 2.0 - 1.0, 0.0),
            1e-15
        ));
    }

    #[test]
    fn circle_minus_examples() {
        let got = circle_minus(c(3f64.sqrt() / 2.0 - 1.0, 0.0), c(-2.0, 0.0), 1.0).unwrap();
        assert!(close(got, c(-(3f64.sqrt()) / 2.0 - 1.0, 0.0), 1e-15));
        let a = c(1.5, 0.25);
        assert_eq!(circle_minus(a, ZERO, 0.3).unwrap(), a);
        assert_eq!(circle_minus(c(5.0, 0.0), c(3.0, 0.0), 0.0).unwrap(), c(2.0, 0.0));
        assert!(matches!(
            circle_minus(ONE, c(-1.0, 0.0), 1.0),
            Err(HilgerError::NonRegressive { .. })
        ));
    }

    #[test]
    fn cylinder_examples() {
        assert_eq!(cylinder(ZERO, 0.4).unwrap(), ZERO);
        let v = cylinder(c(-3.0, 0.0), 1.0).unwrap();
        assert!(close(v, c(2f64.ln(), PI), 1e-15));
        let z = c(0.2, -0.9);
        assert_eq!(cylinder(z, 0.0).unwrap(), z);
        assert!(cylinder(c(-2.0, 0.0), 0.5).is_err());
    }

    #[test]
    fn hilger_imaginary_examples() {
        assert!(close(hilger_imaginary(PI, 1.0).unwrap(), c(-2.0, 0.0), 1e-15));
        assert_eq!(hilger_imaginary(2.5, 0.0).unwrap(), c(0.0, 2.5));
        assert_eq!(hilger_imaginary(0.0, 0.7).unwrap(), ZERO);
        assert!(matches!(
            hilger_imaginary(2.0 * PI, 1.0),
            Err(HilgerError::OutsideStrip { .. })
        ));
        assert!(hilger_imaginary(-PI, 1.0).is_err());
    }

    #[test]
    fn hilger_real_part_examples() {
        let on_circle = Complex64::from_polar(1.0, 0.8) - ONE;
        assert!(hilger_real_part(on_circle, 1.0).abs() < 1e-15);
        assert_eq!(hilger_real_part(c(-3.0, 0.0), 1.0), 1.0);
        assert_eq!(hilger_real_part(c(-1.0, 0.0), 0.0), -1.0);
    }

    #[test]
    fn hilger_circle_examples() {
        assert!(in_hilger_circle(c(-1.0, 0.0), 1.0, false));
        assert!(!in_hilger_circle(ZERO, 0.5, false));
        assert!(in_hilger_circle(ZERO, 0.5, true));
        assert!(in_hilger_circle(c(-1.0, 0.0), 0.0, false));
        assert!(!in_hilger_circle(c(-3.0, 0.0), 1.0, true));
    }

    #[test]
    fn scalar_exp_examples() {
        let p11 = PeriodicTimeScale::pattern(1.0, 1.0).unwrap();
        let v = scalar_exp(&p11, |_| c(-3.0, 0.0), 2.0, 0.0, 1e-3).unwrap();
        assert!(close(v, c(-2.0 * (-3f64).exp(), 0.0), 1e-14));

        let z = PeriodicTimeScale::integers(1).unwrap();
        assert_eq!(scalar_exp(&z, |_| ZERO, 5.0, 0.0, 0.1).unwrap(), ONE);
        let ipi = hilger_imaginary(PI, 1.0).unwrap();
        let v = scalar_exp(&z, |_| ipi, 2.0, 0.0, 0.1).unwrap();
        assert!(close(v, ONE, 1e-15));
    }

    #[test]
    fn scalar_exp_of_smooth_exponent_on_reals() {
        let r = PeriodicTimeScale::real_line(1.0).unwrap();
        let v = scalar_exp(&r, |t| c(t.cos(), 0.5), 2.0, 0.0, 1e-3).unwrap();
        let expected = Complex64::new(2f64.sin(), 1.0).exp();
        assert!(close(v, expected, 1e-12));
    }

    #[test]
    fn single_jump_contributes_exact_factor() {
        let z = PeriodicTimeScale::lattice(0.5, 0.5).unwrap();
        let gamma = c(0.37, -1.1);
        let v = scalar_exp(&z, |_| gamma, 0.5, 0.0, 0.1).unwrap();
        assert_eq!(v, ONE + gamma * 0.5);
    }

    #[test]
    fn circle_exponentials_are_periodic() {
        for ts in [
            PeriodicTimeScale::pattern(1.0, 1.0).unwrap(),
            PeriodicTimeScale::integers(2).unwrap(),
            PeriodicTimeScale::real_line(2.0).unwrap(),
        ] {
            let p = ts.period();
            for k in -2i64..=2 {
                let omega = 2.0 * PI * k as f64 / p;
                let gamma = |tp: &TimePoint| unit_rotation_rate(omega, ts.mu(tp));
                let t0 = ts.period_start(0);
                for tp in ts.grid(0.0, p, 0.1).unwrap() {
                    let a = scalar_exp_between(&ts, gamma, &t0, &tp, 1e-3).unwrap();
                    let b = scalar_exp_between(&ts, gamma, &t0, &ts.shift(&tp, 1), 1e-3).unwrap();
                    assert!(close(a, b, 1e-10), "k={k} p={p} {a} {b} {tp:?}");
                }
            }
        }
    }

    #[test]
    fn uniform_regressivity() {
        let ts = PeriodicTimeScale::pattern(1.0, 1.0).unwrap();
        let p = ts.period();
        let ts_ref = &ts;
        let exponent = |lambda: Complex64| {
            move |tp: &TimePoint| {
                let mu = ts_ref.mu(tp);
                if mu == 0.0 {
                    principal_ln(lambda) / p
                } else {
                    (principal_powf(lambda, mu / p) - ONE) / mu
                }
            }
        };
        let big = c(-1.5, 0.4);
        assert!(uniformly_regressive_check(exponent(big), &ts, 0.0, p, 1.0, 0.1).unwrap());
        let small = c(0.3, -0.2);
        // the tightest point is the jump, where |1 + μγ| = |λ|^{μ/p}
        let delta = 1.0 / small.norm().sqrt();
        assert!(uniformly_regressive_check(exponent(small), &ts, 0.0, p, delta, 0.1).unwrap());
        assert!(!uniformly_regressive_check(exponent(small), &ts, 0.0, p, 0.99 * delta, 0.1).unwrap());
        let z = PeriodicTimeScale::integers(1).unwrap();
        for delta in [1e-3, 1.0, 1e6] {
            assert!(!uniformly_regressive_check(|_| c(-1.0, 0.0), &z, 0.0, 1.0, delta, 0.1).unwrap());
        }
    }

    fn arb_c() -> impl Strategy<Value = Complex64> {
        (-3.0f64..3.0, -3.0f64..3.0).prop_map(|(a, b)| c(a, b))
    }

    proptest! {
        #[test]
        fn group_laws(a in arb_c(), b in arb_c(), d in arb_c(), mu in 0.0f64..2.0) {
            prop_assert!(close(circle_plus(a, b, mu), circle_plus(b, a, mu), 1e-12));
            let l = circle_plus(circle_plus(a, b, mu), d, mu);
            let r = circle_plus(a, circle_plus(b, d, mu), mu);
            prop_assert!(close(l, r, 1e-9 * (1.0 + l.norm())));
            let lhs = (ONE + a * mu) * (ONE + b * mu);
            let rhs = ONE + circle_plus(a, b, mu) * mu;
            prop_assert!(close(lhs, rhs, 1e-12 * (1.0 + lhs.norm())));
            if (ONE + b * mu).norm() > 1e-3 {
                let back = circle_plus(circle_minus(a, b, mu).unwrap(), b, mu);
                prop_assert!(close(back, a, 1e-9 * (1.0 + a.norm())));
            }
        }

        #[test]
        fn hilger_real_part_sign_matches_circle(z in arb_c(), mu in 0.0f64..2.0) {
            let re = hilger_real_part(z, mu);
            if re.abs() > 1e-12 {
                prop_assert_eq!(re < 0.0, in_hilger_circle(z, mu, false));
            }
        }

        #[test]
        fn exponential_semigroup(a in arb_c(), b in arb_c(), end in 0.0f64..4.0) {
            let ts = PeriodicTimeScale::new(0.0, vec![
                crate::timescale::Run::continuous(0.6, 0.4),
                crate::timescale::Run::point(0.5),
            ]).unwrap();
            let t0 = ts.period_start(0);
            let t = ts.ceil_point(end, 1e-9);
            let ts_ref = &ts;
            let ga = move |tp: &TimePoint| a * (1.0 + 0.1 * ts_ref.reduced_time(tp));
            let gb = move |_: &TimePoint| b;
            let regressive = ts.grid_between(&t0, &t, 0.5).unwrap().iter().all(|p| {
                let mu = ts.mu(p);
                (ONE + ga(p) * mu).norm() > 1e-2 && (ONE + gb(p) * mu).norm() > 1e-2
            });
            prop_assume!(regressive);
            let sum = |tp: &TimePoint| circle_plus(ga(tp), gb(tp), ts.mu(tp));
            let lhs = scalar_exp_between(&ts, sum, &t0, &t, 1e-3).unwrap();
            let rhs = scalar_exp_between(&ts, ga, &t0, &t, 1e-3).unwrap()
                * scalar_exp_between(&ts, gb, &t0, &t, 1e-3).unwrap();
            prop_assert!(close(lhs, rhs, 1e-9 * (1.0 + rhs.norm())));
        }

        #[test]
        fn exponential_cocycle(s in 0.0f64..3.0, ds in 0.0f64..3.0, a in arb_c()) {
            let ts = PeriodicTimeScale::pattern(1.0, 0.5).unwrap();
            prop_assume!((ONE + a * 0.5).norm() > 1e-2);
            let t0 = ts.period_start(0);
            let mid = ts.ceil_point(s, 1e-9);
            let t = ts.ceil_point(s + ds, 1e-9);
            let g = move |_: &TimePoint| a;
            let whole = scalar_exp_between(&ts, g, &t0, &t, 1e-3).unwrap();
            let parts = scalar_exp_between(&ts, g, &mid, &t, 1e-3).unwrap()
                * scalar_exp_between(&ts, g, &t0, &mid, 1e-3).unwrap();
            prop_assert!(close(whole, parts, 1e-9 * (1.0 + whole.norm())));
        }
    }
}
