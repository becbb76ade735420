//! Samplers built from discretized Ito diffusions, together with the
//! diagnostics used to measure how close their output is to the target.
//!
//! The crate provides
//!
//! * one-step integrators ([`schemes`]): Euler-Maruyama, the order-1.5
//!   stochastic Runge-Kutta scheme for overdamped Langevin dynamics (SRK-LD)
//!   and the derivative-free order-1.0 scheme for general Ito diffusions
//!   (SRK-ID);
//! * Brownian machinery ([`brownian`]): increments, truncated-series iterated
//!   integrals and the Brownian time integral;
//! * concrete targets ([`models`]): Gaussian mixture, Bayesian logistic
//!   regression, a pseudo-Huber non-convex potential with its candidate
//!   diffusion, and (feature `student-t`) Student's t regression;
//! * distances ([`metrics`]): Gaussian and empirical Wasserstein-2, the
//!   null-corrected Wasserstein estimator, energy distance and the kernel
//!   Stein discrepancy with an inverse multiquadric kernel;
//! * experiment drivers ([`harness`]): synchronously coupled mean-square
//!   errors, strong-order fits, stationary-bias sweeps and scheme comparisons.
//!
//! All randomness is addressed by `(seed, particle, step, tag)` through
//! [`rng::RngStream`], so every result is reproducible bit for bit regardless
//! of thread count.

pub mod brownian;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod models;
pub mod oracle;
pub mod point;
pub mod rng;
pub mod schemes;

pub use error::{Error, Result};
pub use oracle::{Diffusion, Langevin, Potential};
pub use point::{ParticleSet, Point};
pub use rng::RngStream;
pub use schemes::{Dynamics, SchemeConfig, SchemeKind};
