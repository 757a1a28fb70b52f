//! Dynamical Curie-Weiss model of self-organized criticality with Gaussian
//! spins: microscopic and reduced simulators, the exact Hamiltonian
//! expansion of the moderate fluctuation process, the limiting rate
//! functional, and a statistical harness that ties the three together.
//!
//! Module map:
//!
//! * [`model`] - parameters, state frames and every drift/diffusion coefficient.
//! * [`poly`], [`jet`] - exact rational polynomials and numeric second-order jets.
//! * [`expansion`] - perturbed test functions, `H_n`, Taylor remainder, cut-offs, bounds.
//! * [`simulate`] - Euler-Maruyama integrators, Gibbs sampler, seeded ensembles.
//! * [`variational`] - Hamiltonian, Lagrangian, action, optimal paths, resolvent solver.
//! * [`verify`] - limit-law tests, tail bounds, containment and rate estimation.
//! * [`stats`] - KS tests, Wilson intervals, quadrature and small numeric helpers.
//! * [`io`] - CSV and JSON serialization.
//! * [`audit`] - the pre-registered acceptance criteria as callable checks.

pub mod audit;
pub mod error;
pub mod expansion;
pub mod io;
pub mod jet;
pub mod model;
pub mod poly;
pub mod rng;
pub mod simulate;
pub mod stats;
pub mod variational;
pub mod verify;

pub use error::{Error, Result};
pub use model::{Frame, ModelParams, ReducedState, ScalingSchedule, SpinConfiguration};
