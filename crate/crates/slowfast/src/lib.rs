//! Simulation of two-time-scale jump-diffusion systems and their averaged
//! dynamics, with Monte Carlo estimators for the weak and strong error
//! between the slow component and the averaged limit.
//!
//! The coupled system is
//!
//! ```text
//! dX = a(X, Y) dt + b(X) dB + c(X-) dP           (slow, O(1) timescale)
//! dY = f(X, Y) dt / eps + g(X, Y) dW / sqrt(eps)
//!        + h(X-, Y-) dN                          (fast, O(eps) timescale)
//! ```
//!
//! where `P` and `N` are Poisson processes with intensities `lambda1` and
//! `lambda2 / eps`. Averaging the slow drift against the invariant measure
//! of the frozen fast equation yields the effective equation
//! `dXbar = abar(Xbar) dt + b(Xbar) dB + c(Xbar-) dP`, and the crate
//! measures how fast `E phi(X_T)` approaches `E phi(Xbar_T)` as `eps -> 0`
//! (weak error, expected order 1) as well as the pathwise distance under
//! synchronous coupling (strong error, expected order 1/2).
//!
//! Module map:
//!
//! * [`model`] — coefficient models, the jump-OU benchmark, assumption probes
//! * [`randomness`] — seeded substreams, Brownian increments, jump schedules
//! * [`integrate`] — jump-adapted Euler-Maruyama kernels for the coupled,
//!   frozen, averaged, and first-variation dynamics
//! * [`ergodic`] — averaged-drift estimation, invariant moments, mixing rate
//! * [`weakerror`] — weak/strong error estimators and log-log rate fitting
//! * [`expansion`] — first-order expansion `u^eps ~ ubar + eps u1` diagnostics
//! * [`harness`] — experiment configuration, orchestration, result manifests

pub mod error;
pub mod ergodic;
pub mod expansion;
pub mod harness;
pub mod integrate;
pub mod model;
pub mod randomness;
pub mod stats;
pub mod weakerror;

pub use error::{Result, SimError};
