use std::collections::HashMap;

use super::{LatticeSpec, Statistics};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Spin {
    Up,
    Down,
}

/// Mode index of a fermion with the given spin: site-major, up before down.
pub fn fermion_mode(site: usize, spin: Spin) -> usize {
    match spin {
        Spin::Up => 2 * site,
        Spin::Down => 2 * site + 1,
    }
}

/// Enumerated occupation-number basis of a fixed particle-number sector.
///
/// Configurations are stored as per-mode occupation vectors (one mode per site
/// for bosons, two for fermions) in ascending lexicographic order.
#[derive(Debug, Clone)]
pub struct FockBasis {
    spec: LatticeSpec,
    modes: usize,
    occupations: Vec<u8>,
    index: HashMap<Box<[u8]>, usize>,
}

impl PartialEq for FockBasis {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl FockBasis {
    pub fn new(spec: LatticeSpec) -> Result<Self> {
        spec.validate()?;
        let modes = spec.modes();
        let mut occupations = Vec::new();
        let mut current = vec![0u8; modes];
        match spec.statistics {
            Statistics::Boson { n_max, particles } => {
                enumerate_bosons(&mut current, 0, particles, n_max as u8, &mut occupations)
            }
            Statistics::Fermion { up, down } => {
                enumerate_fermions(&mut current, 0, up, down, &mut occupations)
            }
        }
        let dim = occupations.len() / modes.max(1);
        let index = (0..dim)
            .map(|k| (occupations[k * modes..(k + 1) * modes].into(), k))
            .collect();
        Ok(Self {
            spec,
            modes,
            occupations,
            index,
        })
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.index.len()
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Occupations of configuration `k`, one entry per mode.
    pub fn config(&self, k: usize) -> &[u8] {
        &self.occupations[k * self.modes..(k + 1) * self.modes]
    }

    pub fn index_of(&self, occupation: &[u8]) -> Option<usize> {
        self.index.get(occupation).copied()
    }

    pub fn configs(&self) -> impl Iterator<Item = &[u8]> {
        self.occupations.chunks_exact(self.modes.max(1)).take(self.dim())
    }

    /// Occupation of `site` in configuration `k` for the given spin (ignored for bosons).
    pub fn occupation(&self, k: usize, site: usize, spin: Spin) -> u8 {
        let c = self.config(k);
        if self.spec.is_fermionic() {
            c[fermion_mode(site, spin)]
        } else {
            c[site]
        }
    }

    /// Total occupation of `site` in configuration `k`.
    pub fn site_density(&self, k: usize, site: usize) -> u8 {
        let c = self.config(k);
        if self.spec.is_fermionic() {
            c[2 * site] + c[2 * site + 1]
        } else {
            c[site]
        }
    }
}

fn enumerate_bosons(current: &mut [u8], mode: usize, remaining: usize, n_max: u8, out: &mut Vec<u8>) {
    let modes = current.len();
    if mode == modes {
        if remaining == 0 {
            out.extend_from_slice(current);
        }
        return;
    }
    let left_after = (modes - mode - 1) * n_max as usize;
    for n in 0..=n_max.min(remaining as u8) {
        if remaining - n as usize > left_after {
            continue;
        }
        current[mode] = n;
        enumerate_bosons(current, mode + 1, remaining - n as usize, n_max, out);
    }
    current[mode] = 0;
}

fn enumerate_fermions(current: &mut [u8], mode: usize, up: usize, down: usize, out: &mut Vec<u8>) {
    let modes = current.len();
    if mode == modes {
        if up == 0 && down == 0 {
            out.extend_from_slice(current);
        }
        return;
    }
    let is_up = mode % 2 == 0;
    let need = if is_up { up } else { down };
    // modes of the same spin after this one
    let same_spin_after = (modes - mode - 1) / 2;
    for n in 0..=1u8 {
        if n as usize > need || need - n as usize > same_spin_after {
            continue;
        }
        current[mode] = n;
        let (u, d) = if is_up {
            (up - n as usize, down)
        } else {
            (up, down - n as usize)
        };
        enumerate_fermions(current, mode + 1, u, d, out);
    }
    current[mode] = 0;
}

/// Jordan-Wigner parity of the occupied modes strictly before `mode`.
fn parity_before(occ: &[u8], mode: usize) -> f64 {
    let occupied: u32 = occ[..mode].iter().map(|&n| n as u32).sum();
    if occupied % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Applies a fermionic creation operator in place; returns the sign or `None` if occupied.
pub(crate) fn create(occ: &mut [u8], mode: usize) -> Option<f64> {
    if occ[mode] != 0 {
        return None;
    }
    let sign = parity_before(occ, mode);
    occ[mode] = 1;
    Some(sign)
}

/// Applies a fermionic annihilation operator in place; returns the sign or `None` if empty.
pub(crate) fn annihilate(occ: &mut [u8], mode: usize) -> Option<f64> {
    if occ[mode] == 0 {
        return None;
    }
    let sign = parity_before(occ, mode);
    occ[mode] = 0;
    Some(sign)
}
