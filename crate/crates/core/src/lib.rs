//! Gauge-invariant quantum thermodynamics for agents restricted to energy
//! measurements.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`]: dense Hermitian linear algebra, Gibbs states, Haar sampling
//!   and information distances.
//! - [`gauge`]: degenerate-level clustering, the gauge group and the twirl.
//! - [`entropy`]: gauge-invariant entropy, its decompositions and the
//!   invariant free energy.
//! - [`dynamics`]: driving protocols, unitary evolution, work/heat ledgers,
//!   the covariant-derivative cross-check and Clausius-type bounds.
//! - [`fluctuation`]: two-point-measurement ensembles and fluctuation
//!   theorem checks.
//! - [`models`]: Landau-Zener, Curie-Weiss and random protocol builders.
//!
//! Units: `hbar = k_B = 1`; entropies in nats.

pub mod dynamics;
pub mod entropy;
pub mod error;
pub mod fluctuation;
pub mod gauge;
pub mod linalg;
pub mod models;

pub use error::{Error, Result};
