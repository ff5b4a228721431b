//! Simulation suite for quantum light scattered by ultracold atoms in optical lattices.
//!
//! * [`lattice`]: Fock bases, Hubbard Hamiltonians and ground-state solvers.
//! * [`scattering`]: coupling coefficients, classical diffraction and quantum additions.
//! * [`trajectories`]: photodetection backaction and conditional distributions.
//! * [`entanglement`]: light-matter entanglement entropy and squeezing of count distributions.
//! * [`homodyne`]: homodyne detection and fragile versus robust cat states.
//! * [`meanfield`]: quantum-optical-lattice phase diagram in the atomic limit.

pub mod entanglement;
pub mod error;
pub mod homodyne;
pub mod lattice;
pub(crate) mod linalg;
pub mod meanfield;
pub mod scattering;
pub mod trajectories;

pub use error::{Error, Result};
