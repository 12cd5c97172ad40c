//! Simulation of stochastic Volterra equations
//!
//! ```text
//! X_t = X_0 + ∫₀ᵗ K₁(t,s) b(s, X_s) ds + ∫₀ᵗ K₂(t,s) σ(s, X_s) dW_s
//! ```
//!
//! with power kernels `c·(t−s)^p`. The crate provides
//!
//! * an Euler scheme that freezes both kernel and coefficients on each cell ([`euler`]),
//! * a Milstein scheme for the two exactly simulable special cases: state-free
//!   diffusion, and a constant diffusion kernel in one dimension ([`milstein`]),
//! * single-level and multilevel Monte Carlo estimators ([`estimators`], [`mlmc`]),
//! * scheme-independent reference values: Gaussian moments of the Volterra
//!   Ornstein–Uhlenbeck process and a Fourier price for rough Heston ([`reference`]),
//! * empirical strong-rate and complexity experiments ([`rates`]).
//!
//! All randomness is drawn from counter-based streams keyed by
//! `(seed, stream, path, cell, driver)`, so every estimate is reproducible
//! bit-for-bit regardless of how many worker threads run it.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod estimators;
pub mod euler;
pub mod grid;
pub mod kernels;
pub mod linalg;
pub mod milstein;
pub mod mlmc;
pub mod models;
pub mod noise;
pub mod quad;
pub mod rates;
pub mod reference;
pub mod stats;

pub use error::{Error, Result};
pub use estimators::{mc_estimate, mc_estimate_payoffs, McEstimate, Payoff, Scheme};
pub use euler::{euler_path, EulerScheme, SchemePath};
pub use grid::TimeGrid;
pub use kernels::{rate_parameters, PowerKernel, RateParams};
pub use milstein::{milstein_path_constant_k2, milstein_path_state_free_sigma};
pub use mlmc::{MlmcConfig, MlmcMode, MlmcResult};
pub use models::{Coefficients, SveModel};
pub use noise::{IncrementTable, KernelGaussianFamily, NoiseConfig};
pub use rates::{ComplexityReport, RateReport};
