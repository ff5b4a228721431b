//! Occupation-number bases, sparse lattice Hamiltonians and ground-state solvers
//! for one-dimensional Bose-Hubbard and spin-1/2 Hubbard chains.

mod basis;
mod hamiltonian;
mod operator;
mod solver;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use basis::{fermion_mode, FockBasis, Spin};
pub use hamiltonian::{build_hamiltonian, number_operator, SiteObservable};
pub use operator::{expectation, two_point, SparseOperator, StateVector};
pub use solver::{
    ground_space, ground_state, ground_state_with, GroundSpace, GroundState, Method,
    SolverOptions, DEGENERACY_TOLERANCE,
};

/// Boundary condition of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Open,
    Periodic,
}

/// Particle statistics together with the conserved particle content.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Statistics {
    /// Spinless bosons, at most `n_max` per site, `particles` in total.
    Boson { n_max: usize, particles: usize },
    /// Spin-1/2 fermions with fixed numbers of up and down particles.
    Fermion { up: usize, down: usize },
}

impl Statistics {
    pub fn name(&self) -> &'static str {
        match self {
            Statistics::Boson { .. } => "bosons",
            Statistics::Fermion { .. } => "fermions",
        }
    }
}

/// A finite chain of `sites` lattice sites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub sites: usize,
    pub boundary: Boundary,
    pub statistics: Statistics,
    /// Lattice constant in the same units as the probe wavelength.
    pub lattice_constant: f64,
}

impl LatticeSpec {
    pub fn bosons(sites: usize, particles: usize, n_max: usize) -> Self {
        Self {
            sites,
            boundary: Boundary::Periodic,
            statistics: Statistics::Boson { n_max, particles },
            lattice_constant: 1.0,
        }
    }

    pub fn fermions(sites: usize, up: usize, down: usize) -> Self {
        Self {
            sites,
            boundary: Boundary::Periodic,
            statistics: Statistics::Fermion { up, down },
            lattice_constant: 1.0,
        }
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn total_particles(&self) -> usize {
        match self.statistics {
            Statistics::Boson { particles, .. } => particles,
            Statistics::Fermion { up, down } => up + down,
        }
    }

    /// Number of single-particle modes: one per site for bosons, two for fermions.
    pub fn modes(&self) -> usize {
        match self.statistics {
            Statistics::Boson { .. } => self.sites,
            Statistics::Fermion { .. } => 2 * self.sites,
        }
    }

    pub fn is_fermionic(&self) -> bool {
        matches!(self.statistics, Statistics::Fermion { .. })
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites == 0 {
            return Err(Error::InvalidSpec("a lattice needs at least one site".into()));
        }
        if !(self.lattice_constant.is_finite() && self.lattice_constant > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "lattice constant must be positive, got {}",
                self.lattice_constant
            )));
        }
        match self.statistics {
            Statistics::Boson { n_max, particles } => {
                if n_max == 0 {
                    return Err(Error::InvalidSpec("n_max must be at least 1".into()));
                }
                if n_max > u8::MAX as usize {
                    return Err(Error::InvalidSpec(format!("n_max {n_max} is too large")));
                }
                let capacity = self.sites * n_max;
                if particles > capacity {
                    return Err(Error::Capacity { particles, capacity });
                }
            }
            Statistics::Fermion { up, down } => {
                for n in [up, down] {
                    if n > self.sites {
                        return Err(Error::Capacity {
                            particles: n,
                            capacity: self.sites,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Unordered nearest-neighbour pairs `(i, j)`, each listed once.
    ///
    /// A two-site periodic chain has a single bond, the same as the open one.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let m = self.sites;
        let mut bonds: Vec<(usize, usize)> = (0..m.saturating_sub(1)).map(|i| (i, i + 1)).collect();
        if self.boundary == Boundary::Periodic && m > 2 {
            bonds.push((m - 1, 0));
        }
        bonds
    }
}
