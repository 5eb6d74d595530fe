#![allow(dead_code)]

use std::path::PathBuf;

use floquet::cli::{Problem, SystemConfig};
use floquet::linalg::{c, CMatrix};
use floquet::timescale::{PeriodicTimeScale, TimePoint};
use floquet::transition::{LinearDynamicSystem, SolverOptions};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/configs").join(name)
}

pub fn problem(name: &str) -> Problem {
    SystemConfig::load(&config_path(name)).unwrap().build().unwrap()
}

pub fn discrete() -> LinearDynamicSystem {
    LinearDynamicSystem::from_strings(
        PeriodicTimeScale::integers(2).unwrap(),
        &[vec!["-1", "(2 + (-1)^t)/2"], vec!["(2 + (-1)^t)/2", "-1"]],
    )
    .unwrap()
}

pub fn continuous() -> LinearDynamicSystem {
    LinearDynamicSystem::from_strings(
        PeriodicTimeScale::real_line(2.0 * std::f64::consts::PI).unwrap(),
        &[vec!["-1", "0"], vec!["sin(t)", "0"]],
    )
    .unwrap()
}

pub fn hybrid() -> LinearDynamicSystem {
    LinearDynamicSystem::from_strings(
        PeriodicTimeScale::pattern(1.0, 1.0).unwrap(),
        &[vec!["-3 + sin(2*pi*t)", "1"], vec!["0", "-3"]],
    )
    .unwrap()
}

pub fn opts() -> SolverOptions {
    SolverOptions::default()
}

pub fn max_abs(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn real(n: usize, rows: &[f64]) -> CMatrix {
    CMatrix::from_fn(n, n, |i, j| c(rows[i * n + j], 0.0))
}

/// `A(t) = B + C sin(2πt/p) + D cos(2πt/p)`, entries drawn so that
/// `sup ‖A(t)‖₂ · p <= budget`.
pub fn random_system(rng: &mut ChaCha8Rng, ts: PeriodicTimeScale, n: usize, budget: f64) -> LinearDynamicSystem {
    let p = ts.period();
    let scale = budget / p / (3.0 * n as f64);
    let rows: Vec<Vec<String>> = (0..n)
        .map(|_| {
            (0..n)
                .map(|_| {
                    let b: f64 = rng.gen_range(-1.0..1.0) * scale;
                    let s: f64 = rng.gen_range(-1.0..1.0) * scale;
                    let k: f64 = rng.gen_range(-1.0..1.0) * scale;
                    format!("{b:?} + {s:?}*sin(2*pi*t/{p:?}) + {k:?}*cos(2*pi*t/{p:?})")
                })
                .collect()
        })
        .collect();
    LinearDynamicSystem::from_strings(ts, &rows).unwrap()
}

/// The three scale types: integers, a single continuous run, `P_{1,1}`.
pub fn scale_types() -> Vec<(&'static str, PeriodicTimeScale)> {
    vec![
        ("Z", PeriodicTimeScale::integers(3).unwrap()),
        ("R", PeriodicTimeScale::real_line(2.0).unwrap()),
        ("P(1,1)", PeriodicTimeScale::pattern(1.0, 1.0).unwrap()),
    ]
}

/// A random point of the first period.
pub fn random_point(rng: &mut ChaCha8Rng, ts: &PeriodicTimeScale) -> TimePoint {
    let t = rng.gen_range(0.0..ts.period());
    ts.floor_point(t, 1e-9)
}
