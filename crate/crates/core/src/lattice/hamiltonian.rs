use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::basis::{annihilate, create, fermion_mode, Spin};
use super::{FockBasis, LatticeSpec, SparseOperator, Statistics};
use crate::error::{Error, Result};

/// Local observable measured at a single site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteObservable {
    /// `n_up + n_down`
    Density,
    /// `n_up - n_down`
    Magnetization,
    SpinUp,
    SpinDown,
    /// Bosonic `n`
    Boson,
}

impl SiteObservable {
    pub fn name(&self) -> &'static str {
        match self {
            SiteObservable::Density => "density",
            SiteObservable::Magnetization => "magnetization",
            SiteObservable::SpinUp => "spin-up",
            SiteObservable::SpinDown => "spin-down",
            SiteObservable::Boson => "boson",
        }
    }

    pub fn check(&self, spec: &LatticeSpec) -> Result<()> {
        let ok = match self {
            SiteObservable::Boson => !spec.is_fermionic(),
            _ => spec.is_fermionic(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::ChannelMismatch {
                channel: self.name(),
                statistics: spec.statistics.name(),
            })
        }
    }

    /// Eigenvalue of the observable at `site` in configuration `k`.
    pub fn value(&self, basis: &FockBasis, k: usize, site: usize) -> f64 {
        let up = || basis.occupation(k, site, Spin::Up) as f64;
        let down = || basis.occupation(k, site, Spin::Down) as f64;
        match self {
            SiteObservable::Density | SiteObservable::Boson => basis.site_density(k, site) as f64,
            SiteObservable::Magnetization => up() - down(),
            SiteObservable::SpinUp => up(),
            SiteObservable::SpinDown => down(),
        }
    }
}

/// Diagonal operator for `observable` at `site`.
pub fn number_operator(basis: &Arc<FockBasis>, site: usize, observable: SiteObservable) -> Result<SparseOperator> {
    let spec = basis.spec();
    observable.check(spec)?;
    if site >= spec.sites {
        return Err(Error::SiteOutOfRange {
            site,
            sites: spec.sites,
        });
    }
    let diag = (0..basis.dim())
        .map(|k| Complex64::new(observable.value(basis, k, site), 0.0))
        .collect();
    Ok(SparseOperator::diagonal_from(basis.clone(), diag))
}

/// Bose-Hubbard or Hubbard Hamiltonian with hopping `t0` and on-site interaction `u`.
///
/// Bosons: `-t0 sum_<ij> (b+_i b_j + h.c.) + U/2 sum_i n_i (n_i - 1)`.
/// Fermions: `-t0 sum_<ij>,s (f+_is f_js + h.c.) + U sum_i n_i,up n_i,down`.
pub fn build_hamiltonian(basis: &Arc<FockBasis>, t0: f64, u: f64) -> Result<SparseOperator> {
    let spec = *basis.spec();
    if !(t0.is_finite() && u.is_finite()) {
        return Err(Error::InvalidParameter("t0 and U must be finite".into()));
    }
    let bonds = spec.bonds();
    let mut triplets = Vec::new();
    let mut scratch = vec![0u8; basis.modes()];
    for k in 0..basis.dim() {
        let occ = basis.config(k);
        let interaction = match spec.statistics {
            Statistics::Boson { .. } => occ
                .iter()
                .map(|&n| 0.5 * u * n as f64 * (n as f64 - 1.0))
                .sum::<f64>(),
            Statistics::Fermion { .. } => occ
                .chunks_exact(2)
                .map(|s| u * (s[0] * s[1]) as f64)
                .sum::<f64>(),
        };
        if interaction != 0.0 {
            triplets.push((k, k, Complex64::new(interaction, 0.0)));
        }
        if t0 == 0.0 {
            continue;
        }
        for &(i, j) in &bonds {
            for (to, from) in [(i, j), (j, i)] {
                match spec.statistics {
                    Statistics::Boson { n_max, .. } => {
                        let (nf, nt) = (occ[from] as usize, occ[to] as usize);
                        if nf == 0 || nt + 1 > n_max {
                            continue;
                        }
                        scratch.copy_from_slice(occ);
                        scratch[from] -= 1;
                        scratch[to] += 1;
                        let amp = -t0 * ((nf * (nt + 1)) as f64).sqrt();
                        if let Some(row) = basis.index_of(&scratch) {
                            triplets.push((row, k, Complex64::new(amp, 0.0)));
                        }
                    }
                    Statistics::Fermion { .. } => {
                        for spin in [Spin::Up, Spin::Down] {
                            scratch.copy_from_slice(occ);
                            let sign = annihilate(&mut scratch, fermion_mode(from, spin))
                                .and_then(|s1| create(&mut scratch, fermion_mode(to, spin)).map(|s2| s1 * s2));
                            if let Some(sign) = sign {
                                let row = basis
                                    .index_of(&scratch)
                                    .expect("hopping conserves the particle-number sector");
                                triplets.push((row, k, Complex64::new(-t0 * sign, 0.0)));
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(SparseOperator::from_triplets(basis.clone(), triplets))
}
