//! Floquet theory for periodic linear dynamic systems `x^Δ = A(t) x` on
//! periodic time scales: transition matrices on mixed continuous/discrete
//! domains, the decomposition `Φ(t,τ) = L(t) e_R(t,τ) L⁻¹(τ)`, multipliers,
//! exponents and stability classification.
//!
//! ```
//! use floquet::floquet::{classify_stability, monodromy, StabilityClass, UNIT_TOL};
//! use floquet::timescale::PeriodicTimeScale;
//! use floquet::transition::{LinearDynamicSystem, SolverOptions};
//!
//! let ts = PeriodicTimeScale::integers(2).unwrap();
//! let sys = LinearDynamicSystem::from_strings(
//!     ts,
//!     &[vec!["-1", "(2 + (-1)^t)/2"], vec!["(2 + (-1)^t)/2", "-1"]],
//! )
//! .unwrap();
//! let fd = monodromy(&sys, 0.0, &SolverOptions::default()).unwrap();
//! for lambda in fd.multipliers() {
//!     assert!((lambda.re - 0.75).abs() < 1e-12);
//! }
//! assert_eq!(classify_stability(&fd, UNIT_TOL).class, StabilityClass::ExponentiallyStable);
//! ```

pub mod cli;
pub mod error;
pub mod expr;
pub mod floquet;
pub mod hilger;
pub mod linalg;
pub mod lyapunov;
pub mod spectral;
pub mod timescale;
pub mod transition;

pub use error::{Error, Result};
pub use floquet::{FloquetData, StabilityClass, StabilityVerdict};
pub use timescale::{PeriodicTimeScale, Run, TimePoint};
pub use transition::{LinearDynamicSystem, SolverOptions};
