//! Two-species hard-sphere mixtures in the Boltzmann–Grad regime.
//!
//! The crate provides the particle dynamics (binary collision law, impact
//! operator, event-driven flow), the scaling algebra linking particle numbers
//! to diameters, quadratures for the mixture collision kernels together with a
//! Picard solver for the Boltzmann system for mixtures, the Duhamel machinery
//! of the two-species hierarchies (collision histories and pseudo-trajectories)
//! and ensemble statistics for propagation-of-chaos experiments.

pub mod chaos;
pub mod collision;
pub mod dynamics;
pub mod error;
pub mod hierarchy;
pub mod io;
pub mod mixture;
pub mod registry;
pub mod rng;
pub mod sampling;
pub mod scaling;
pub mod vecops;

pub use error::{Error, Result};
pub use mixture::{Configuration, MixtureParams, ParticleId, SpeciesKind};
