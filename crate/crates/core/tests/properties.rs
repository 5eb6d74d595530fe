//! Property tests over randomized periodic systems and matrices.

mod common;

use std::f64::consts::PI;

use floquet::floquet::{
    classify_spectrum, classify_stability, exponent_shift_residual, l_periodicity_residual, mode_solution,
    sample_grid, shared_eigenvector_residual, spectral_mapping_residual, FloquetData, UNIT_TOL,
};
use floquet::hilger::{circle_plus, scalar_exp_between, unit_rotation_rate};
use floquet::linalg::{c, determinant, frobenius, identity, inverse, rank, relative_distance, spectral_norm, CMatrix};
use floquet::lyapunov::{verify_lyapunov, LyapunovTransformation};
use floquet::spectral::SpectralData;
use floquet::timescale::PeriodicTimeScale;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

fn scale(kind: usize) -> PeriodicTimeScale {
    scale_types()[kind % 3].1.clone()
}

fn random_fd(seed: u64, kind: usize, budget: f64) -> FloquetData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ts = scale(kind);
    let n = 2 + (seed % 2) as usize;
    let sys = random_system(&mut rng, ts.clone(), n, budget);
    let t0 = random_point(&mut rng, &ts);
    FloquetData::new(&sys, &t0, &opts()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exp_r_over_a_period_is_the_monodromy(seed in 0u64..10_000, kind in 0usize..3) {
        let f = random_fd(seed, kind, 3.0);
        let ts = f.timescale();
        let end = ts.shift(f.t0(), 1);
        prop_assert!(relative_distance(&f.exp_r(&end, f.t0()), f.monodromy()) <= 1e-9);
        prop_assert_eq!(f.lyapunov_factor(f.t0()).unwrap(), identity(f.dimension()));
        let grid = sample_grid(ts, f.t0(), ts.period(), 7);
        prop_assert!(l_periodicity_residual(&f, &grid).unwrap() <= 1e-6);
    }

    #[test]
    fn r_is_constant_on_homogeneous_scales(seed in 0u64..10_000, kind in 0usize..2, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        // integers and the real line have a single graininess
        let f = random_fd(seed, kind, 3.0);
        let ts = f.timescale();
        let p = ts.period();
        let ta = ts.floor_point(a * p, 1e-9);
        let tb = ts.floor_point(b * p + 5.0 * p, 1e-9);
        prop_assert!(frobenius(&(f.r_matrix(&ta) - f.r_matrix(&tb))) <= 1e-10);
    }

    #[test]
    fn spectral_mapping_and_shared_eigenvectors(seed in 0u64..10_000, kind in 0usize..3) {
        let f = random_fd(seed, kind, 3.0);
        let ts = f.timescale();
        let grid = sample_grid(ts, f.t0(), 1.5 * ts.period(), 7);
        prop_assert!(spectral_mapping_residual(&f, &grid).unwrap() <= 1e-7);
        prop_assert!(shared_eigenvector_residual(&f, &grid) <= 1e-8);
        prop_assert!(exponent_shift_residual(&f, -2..=2).unwrap() <= 1e-8);
    }

    #[test]
    fn verdict_ignores_t0_and_similarity(seed in 0u64..10_000, kind in 0usize..3, entries in prop::collection::vec(-0.4f64..0.4, 9)) {
        let f = random_fd(seed, kind, 4.0);
        let ts = f.timescale();
        let other = ts.floor_point(ts.time(f.t0()) + 0.37 * ts.period(), 1e-9);
        let g = FloquetData::new(f.system(), &other, &opts()).unwrap();
        let base = classify_stability(&f, UNIT_TOL).class;
        prop_assert_eq!(base, classify_stability(&g, UNIT_TOL).class);
        let n = f.dimension();
        let t = CMatrix::from_fn(n, n, |i, j| c(entries[i * 3 + j] + if i == j { 1.5 } else { 0.0 }, 0.0));
        let similar = &t * f.monodromy() * inverse(&t).unwrap();
        let spec = SpectralData::new(&similar).unwrap();
        prop_assert_eq!(base, classify_spectrum(&spec, UNIT_TOL).class);
    }

    #[test]
    fn distinct_multipliers_give_independent_modes(seed in 0u64..10_000, kind in 0usize..3) {
        let f = random_fd(seed, kind, 3.0);
        let vectors = f.eigenvectors();
        let distinct: Vec<usize> = (0..vectors.len())
            .filter(|&i| vectors.iter().position(|v| v.0 == vectors[i].0) == Some(i))
            .collect();
        prop_assume!(distinct.len() >= 2);
        let n = f.dimension();
        let mut x = CMatrix::zeros(n, 2);
        for (col, &i) in distinct.iter().take(2).enumerate() {
            let mode = mode_solution(&f, i).unwrap();
            x.set_column(col, &mode.at(f.t0()).unwrap());
            prop_assert!(relative_distance(&CMatrix::from_column_slice(n, 1, mode.at(f.t0()).unwrap().as_slice()),
                                           &CMatrix::from_column_slice(n, 1, mode.v.as_slice())) <= 1e-12);
        }
        prop_assert_eq!(rank(&x, 1e-8 * spectral_norm(&x)), 2);
    }

    #[test]
    fn transition_matrices_stay_invertible(seed in 0u64..10_000, kind in 0usize..3, s in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ts = scale(kind);
        let sys = random_system(&mut rng, ts.clone(), 3, 4.0);
        let t0 = ts.period_start(0);
        let t = ts.floor_point(s * 3.0 * ts.period(), 1e-9);
        let phi = sys.transition(&t, &t0, &opts()).unwrap();
        prop_assert!(determinant(&phi).norm() > 1e-12);
    }

    #[test]
    fn peano_baker_matches_integration(seed in 0u64..10_000, kind in 0usize..3, frac in 0.1f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ts = scale(kind);
        let sys = random_system(&mut rng, ts.clone(), 2, 2.0);
        let t0 = ts.period_start(0);
        let t = ts.floor_point(frac * ts.period(), 1e-9);
        let pb = sys.peano_baker_between(&t, &t0, &opts()).unwrap();
        let phi = sys.transition(&t, &t0, &opts()).unwrap();
        prop_assert!(frobenius(&(pb - phi)) <= 1e-6);
    }

    #[test]
    fn inverse_norm_bound_holds(entries in prop::collection::vec(-1.0f64..1.0, 8), amp in 0.0f64..0.9) {
        // L(t) = B + amp·sin(2πt)·C with B well conditioned
        let rows: Vec<Vec<String>> = (0..2)
            .map(|i| (0..2).map(|j| {
                let b = entries[2 * i + j] + if i == j { 2.5 } else { 0.0 };
                format!("{b:?} + {:?}*sin(2*pi*t)", amp * entries[4 + 2 * i + j])
            }).collect())
            .collect();
        let lt = LyapunovTransformation::from_strings(&rows, f64::INFINITY, 0.0).unwrap();
        let ts = PeriodicTimeScale::pattern(0.5, 0.5).unwrap();
        let rep = verify_lyapunov(&lt, &ts, &ts.period_start(0), 3.0, 0.05).unwrap();
        prop_assert!(rep.inverse_bound_holds);
        prop_assert!(rep.pass);
    }

    #[test]
    fn rotation_exponentials_are_periodic(kind in 0usize..3, k in -3i64..=3, s in 0.0f64..1.0) {
        let ts = scale(kind);
        let p = ts.period();
        let omega = 2.0 * PI * k as f64 / p;
        let gamma = |tp: &floquet::TimePoint| unit_rotation_rate(omega, ts.mu(tp));
        let t0 = ts.period_start(0);
        let t = ts.floor_point(s * p, 1e-9);
        let a = scalar_exp_between(&ts, gamma, &t0, &t, 1e-3).unwrap();
        let b = scalar_exp_between(&ts, gamma, &t0, &ts.shift(&t, 1), 1e-3).unwrap();
        prop_assert!((a - b).norm() <= 1e-10);
    }

    #[test]
    fn exponential_of_circle_sum_is_product(kind in 0usize..3, re in -1.0f64..1.0, im in -1.0f64..1.0, s in 0.0f64..2.0) {
        let ts = scale(kind);
        let g = |tp: &floquet::TimePoint| c(re, im) * (1.0 + 0.1 * ts.mu(tp));
        let h = |tp: &floquet::TimePoint| {
            let mut rng = ChaCha8Rng::seed_from_u64(tp.run as u64);
            c(rng.gen_range(-0.3..0.3), 0.2)
        };
        let t0 = ts.period_start(0);
        let t = ts.floor_point(s * ts.period(), 1e-9);
        let sum = scalar_exp_between(&ts, |tp| circle_plus(g(tp), h(tp), ts.mu(tp)), &t0, &t, 1e-3).unwrap();
        let prod = scalar_exp_between(&ts, g, &t0, &t, 1e-3).unwrap() * scalar_exp_between(&ts, h, &t0, &t, 1e-3).unwrap();
        prop_assert!((sum - prod).norm() <= 1e-9 * prod.norm().max(1.0));
    }
}
