//! Light scattered by a lattice gas: per-site coupling phases, the classical
//! diffraction pattern `|<D>|^2` and the quantum addition `R = <D+D> - |<D>|^2`.
//!
//! The `B` (intersite density) contribution is not modelled; only on-site
//! densities scatter.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{FockBasis, GroundSpace, SiteObservable, SparseOperator, StateVector};

/// Imaginary parts of `R` larger than this are reported as errors.
const IMAGINARY_TOLERANCE: f64 = 1e-10;

/// Probe and detection directions for a chain along the lattice axis.
///
/// Angles are measured from the lattice normal, so `theta_in = 0` is a probe
/// perpendicular to the chain and `theta_out = 0` is the forward direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeGeometry {
    pub theta_in: f64,
    pub theta_out: f64,
    /// Probe wavelength in units of the lattice constant.
    pub wavelength: f64,
}

impl Default for ProbeGeometry {
    fn default() -> Self {
        Self {
            theta_in: 0.0,
            theta_out: 0.0,
            wavelength: 2.0,
        }
    }
}

impl ProbeGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength.is_finite() && self.wavelength > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "wavelength must be positive, got {}",
                self.wavelength
            )));
        }
        for (name, angle) in [("theta_in", self.theta_in), ("theta_out", self.theta_out)] {
            if !(-PI..=PI).contains(&angle) {
                return Err(Error::InvalidParameter(format!("{name} = {angle} outside [-pi, pi]")));
            }
        }
        Ok(())
    }

    /// Phase difference between neighbouring sites, `2 pi a / lambda (sin th_in - sin th_out)`.
    pub fn phase_step(&self) -> f64 {
        2.0 * PI / self.wavelength * (self.theta_in.sin() - self.theta_out.sin())
    }
}

/// Which atomic observable the detected light mode couples to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    /// Linear-x polarisation, fermion density.
    X,
    /// Linear-y polarisation, fermion magnetization.
    Y,
    /// Spinless boson density.
    Boson,
}

impl Channel {
    pub fn observable(&self) -> SiteObservable {
        match self {
            Channel::X => SiteObservable::Density,
            Channel::Y => SiteObservable::Magnetization,
            Channel::Boson => SiteObservable::Boson,
        }
    }
}

/// Cavity prefactor `C = Omega_10 alpha_0 / (Delta_p + i kappa)` of `a_1 = C D`.
pub fn cavity_prefactor(coupling_times_probe: Complex64, detuning: f64, kappa: f64) -> Result<Complex64> {
    let denominator = Complex64::new(detuning, kappa);
    if denominator.norm() == 0.0 {
        return Err(Error::InvalidParameter(
            "cavity prefactor needs kappa > 0 or a nonzero detuning".into(),
        ));
    }
    Ok(coupling_times_probe / denominator)
}

/// Per-site coupling coefficients `J_jj` and the cavity prefactor.
#[derive(Debug, Clone, PartialEq)]
pub struct Couplings {
    pub coefficients: Vec<Complex64>,
    pub prefactor: Complex64,
    pub channel: Channel,
}

/// Travelling-wave couplings `J_jj = exp(i delta j)` for `sites` sites.
pub fn compute_couplings(geometry: &ProbeGeometry, sites: usize, channel: Channel) -> Result<Couplings> {
    geometry.validate()?;
    Ok(couplings_from_phase(geometry.phase_step(), sites, channel))
}

pub fn couplings_from_phase(delta: f64, sites: usize, channel: Channel) -> Couplings {
    Couplings {
        coefficients: (0..sites)
            .map(|j| Complex64::from_polar(1.0, delta * j as f64))
            .collect(),
        prefactor: Complex64::new(1.0, 0.0),
        channel,
    }
}

fn check_channel(basis: &FockBasis, couplings: &Couplings) -> Result<()> {
    couplings.channel.observable().check(basis.spec())?;
    if couplings.coefficients.len() != basis.spec().sites {
        return Err(Error::InvalidParameter(format!(
            "{} coupling coefficients for {} sites",
            couplings.coefficients.len(),
            basis.spec().sites
        )));
    }
    Ok(())
}

/// Eigenvalue of `D` on each basis configuration.
fn d_eigenvalues(basis: &FockBasis, couplings: &Couplings) -> Vec<Complex64> {
    let obs = couplings.channel.observable();
    (0..basis.dim())
        .map(|k| {
            couplings
                .coefficients
                .iter()
                .enumerate()
                .map(|(j, c)| c * obs.value(basis, k, j))
                .sum()
        })
        .collect()
}

/// `D = sum_j J_jj O_j`, diagonal in the Fock basis.
pub fn d_operator(basis: &Arc<FockBasis>, couplings: &Couplings) -> Result<SparseOperator> {
    check_channel(basis, couplings)?;
    Ok(SparseOperator::diagonal_from(basis.clone(), d_eigenvalues(basis, couplings)))
}

/// A matter state seen through diagonal observables: a pure state or the
/// equal-weight mixture over a degenerate ground space.
pub trait Occupations {
    fn basis(&self) -> &Arc<FockBasis>;
    fn probabilities(&self) -> Vec<f64>;
}

impl Occupations for StateVector {
    fn basis(&self) -> &Arc<FockBasis> {
        StateVector::basis(self)
    }
    fn probabilities(&self) -> Vec<f64> {
        StateVector::probabilities(self)
    }
}

impl Occupations for GroundSpace {
    fn basis(&self) -> &Arc<FockBasis> {
        self.states[0].basis()
    }
    fn probabilities(&self) -> Vec<f64> {
        GroundSpace::probabilities(self)
    }
}

/// `<O_i>` and `<O_i O_j>` for every site pair of a diagonal site observable.
#[derive(Debug, Clone)]
pub struct DensityCorrelations {
    pub mean: Vec<f64>,
    pub second_moment: Vec<Vec<f64>>,
}

impl DensityCorrelations {
    pub fn compute<S: Occupations + ?Sized>(state: &S, observable: SiteObservable) -> Result<Self> {
        let basis = state.basis();
        observable.check(basis.spec())?;
        let m = basis.spec().sites;
        let p = state.probabilities();
        let mut mean = vec![0.0; m];
        let mut second_moment = vec![vec![0.0; m]; m];
        let mut values = vec![0.0; m];
        for (k, &pk) in p.iter().enumerate() {
            if pk == 0.0 {
                continue;
            }
            for (i, v) in values.iter_mut().enumerate() {
                *v = observable.value(basis, k, i);
            }
            for i in 0..m {
                mean[i] += pk * values[i];
                for j in 0..m {
                    second_moment[i][j] += pk * values[i] * values[j];
                }
            }
        }
        Ok(Self { mean, second_moment })
    }

    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        self.second_moment[i][j] - self.mean[i] * self.mean[j]
    }

    /// `R = sum_ij J_ii* J_jj Cov(O_i, O_j)`, complex before the reality check.
    pub fn quantum_addition(&self, coefficients: &[Complex64]) -> Complex64 {
        let m = self.mean.len();
        let mut r = Complex64::default();
        for i in 0..m {
            for j in 0..m {
                r += coefficients[i].conj() * coefficients[j] * self.covariance(i, j);
            }
        }
        r
    }

    pub fn classical(&self, coefficients: &[Complex64]) -> f64 {
        coefficients
            .iter()
            .zip(&self.mean)
            .map(|(c, n)| c * n)
            .sum::<Complex64>()
            .norm_sqr()
    }
}

/// `|<D>|^2`.
pub fn classical_diffraction<S: Occupations + ?Sized>(state: &S, couplings: &Couplings) -> Result<f64> {
    let basis = state.basis();
    check_channel(basis, couplings)?;
    let mean: Complex64 = d_eigenvalues(basis, couplings)
        .iter()
        .zip(state.probabilities())
        .map(|(d, p)| d * p)
        .sum();
    Ok(mean.norm_sqr())
}

fn real_part(r: Complex64) -> Result<f64> {
    if r.im.abs() > IMAGINARY_TOLERANCE * r.re.abs().max(1.0) {
        return Err(Error::Numerical(format!("quantum addition has imaginary part {:.3e}", r.im)));
    }
    Ok(r.re)
}

/// Quantum addition `R` from the density-density correlation sum.
pub fn quantum_addition<S: Occupations + ?Sized>(state: &S, couplings: &Couplings) -> Result<f64> {
    check_channel(state.basis(), couplings)?;
    let corr = DensityCorrelations::compute(state, couplings.channel.observable())?;
    real_part(corr.quantum_addition(&couplings.coefficients))
}

/// One row of an angular scan, normalized as `|<D>|^2 / N^2` and `R / N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanPoint {
    pub theta_out: f64,
    pub channel: Channel,
    pub classical: f64,
    pub quantum: f64,
}

/// Classical and quantum scattering over a grid of detection angles.
pub fn angular_scan<S: Occupations + Sync + ?Sized>(
    state: &S,
    theta_in: f64,
    wavelength: f64,
    theta_out: &[f64],
    channel: Channel,
) -> Result<Vec<ScanPoint>> {
    let basis = state.basis();
    channel.observable().check(basis.spec())?;
    let sites = basis.spec().sites;
    let n = basis.spec().total_particles() as f64;
    if n == 0.0 {
        return Err(Error::InvalidParameter("angular scan of an empty lattice".into()));
    }
    let corr = DensityCorrelations::compute(state, channel.observable())?;
    theta_out
        .par_iter()
        .map(|&theta| {
            let geometry = ProbeGeometry {
                theta_in,
                theta_out: theta,
                wavelength,
            };
            let couplings = compute_couplings(&geometry, sites, channel)?;
            Ok(ScanPoint {
                theta_out: theta,
                channel,
                classical: corr.classical(&couplings.coefficients) / (n * n),
                quantum: real_part(corr.quantum_addition(&couplings.coefficients))? / n,
            })
        })
        .collect()
}

/// Trapezoidal integral of the normalized quantum addition over the scan angles.
pub fn integrated_quantum_addition(scan: &[ScanPoint]) -> f64 {
    scan.windows(2)
        .map(|w| 0.5 * (w[1].theta_out - w[0].theta_out) * (w[0].quantum + w[1].quantum))
        .sum()
}

/// Evenly spaced angles covering `[-pi, pi]` inclusive.
pub fn angle_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points)
            .map(|k| -PI + 2.0 * PI * k as f64 / (points - 1) as f64)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{
        build_hamiltonian, expectation, ground_space, ground_state, Boundary, LatticeSpec, Method,
    };

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn coupling_phases() {
        let max = couplings_from_phase(0.0, 4, Channel::X);
        assert!(max.coefficients.iter().all(|c| close(*c, Complex64::new(1.0, 0.0))));
        let min = couplings_from_phase(PI, 4, Channel::X);
        for (j, c) in min.coefficients.iter().enumerate() {
            assert!(close(*c, Complex64::new(if j % 2 == 0 { 1.0 } else { -1.0 }, 0.0)));
        }
        let quarter = couplings_from_phase(PI / 2.0, 2, Channel::X);
        assert!(close(quarter.coefficients[1], Complex64::new(0.0, 1.0)));
    }

    #[test]
    fn geometry_phase_and_validation() {
        let g = ProbeGeometry {
            theta_out: PI / 2.0,
            ..ProbeGeometry::default()
        };
        assert!((g.phase_step() + PI).abs() < 1e-12);
        assert_eq!(ProbeGeometry::default().phase_step(), 0.0);
        let bad = ProbeGeometry {
            wavelength: 0.0,
            ..ProbeGeometry::default()
        };
        assert!(compute_couplings(&bad, 3, Channel::X).is_err());
        let bad = ProbeGeometry {
            theta_out: 4.0,
            ..ProbeGeometry::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn prefactor_needs_loss_or_detuning() {
        assert!(cavity_prefactor(Complex64::new(1.0, 0.0), 0.0, 0.0).is_err());
        let c = cavity_prefactor(Complex64::new(2.0, 0.0), 0.0, 1.0).unwrap();
        assert!(close(c, Complex64::new(0.0, -2.0)));
    }

    #[test]
    fn forward_d_operator_is_total_number_and_magnetization() {
        let basis = Arc::new(FockBasis::new(LatticeSpec::fermions(3, 2, 1)).unwrap());
        let dx = d_operator(&basis, &couplings_from_phase(0.0, 3, Channel::X)).unwrap();
        let dy = d_operator(&basis, &couplings_from_phase(0.0, 3, Channel::Y)).unwrap();
        assert!(dx.diagonal().iter().all(|d| close(*d, Complex64::new(3.0, 0.0))));
        assert!(dy.diagonal().iter().all(|d| close(*d, Complex64::new(1.0, 0.0))));
        let bosons = Arc::new(FockBasis::new(LatticeSpec::bosons(3, 2, 2)).unwrap());
        assert!(d_operator(&bosons, &couplings_from_phase(0.0, 3, Channel::Y)).is_err());
        assert!(d_operator(&basis, &couplings_from_phase(0.0, 2, Channel::X)).is_err());
    }

    #[test]
    fn alternating_sum_of_uniform_density_vanishes() {
        let basis = Arc::new(FockBasis::new(LatticeSpec::bosons(4, 4, 1)).unwrap());
        let psi = StateVector::basis_state(basis.clone(), 0);
        let c = couplings_from_phase(PI, 4, Channel::Boson);
        let d = d_operator(&basis, &c).unwrap();
        assert!(expectation(&psi, &d).unwrap().norm() < 1e-12);
        assert!(classical_diffraction(&psi, &c).unwrap() < 1e-24);
    }

    #[test]
    fn forward_scattering_of_fixed_number_states() {
        let basis = Arc::new(FockBasis::new(LatticeSpec::fermions(4, 2, 2)).unwrap());
        let h = build_hamiltonian(&basis, 1.0, 3.0).unwrap();
        let gs = ground_state(&h, Method::Dense).unwrap().state;
        let x = couplings_from_phase(0.0, 4, Channel::X);
        let y = couplings_from_phase(0.0, 4, Channel::Y);
        assert!((classical_diffraction(&gs, &x).unwrap() - 16.0).abs() < 1e-10);
        assert!(quantum_addition(&gs, &x).unwrap().abs() < 1e-10);
        assert!(quantum_addition(&gs, &y).unwrap().abs() < 1e-10);
    }

    #[test]
    fn correlation_sum_matches_dense_d_dagger_d() {
        let basis = Arc::new(FockBasis::new(LatticeSpec::fermions(4, 2, 1).with_boundary(Boundary::Open)).unwrap());
        assert!(basis.dim() <= 100);
        let h = build_hamiltonian(&basis, 1.0, -2.0).unwrap();
        let gs = ground_state(&h, Method::Dense).unwrap().state;
        for delta in [0.3, 1.1, PI / 2.0, 2.9] {
            for channel in [Channel::X, Channel::Y] {
                let c = couplings_from_phase(delta, 4, channel);
                let d = d_operator(&basis, &c).unwrap();
                let dd = d.adjoint().compose(&d).unwrap();
                let brute = expectation(&gs, &dd).unwrap() - expectation(&gs, &d).unwrap().norm_sqr();
                assert!(brute.im.abs() < 1e-10);
                let r = quantum_addition(&gs, &c).unwrap();
                assert!((brute.re - r).abs() < 1e-10, "{delta} {channel:?}");
                assert!(r >= -1e-10);
            }
        }
    }

    #[test]
    fn periodic_quantum_addition_is_a_structure_factor() {
        let basis = Arc::new(FockBasis::new(LatticeSpec::fermions(6, 2, 2)).unwrap());
        let h = build_hamiltonian(&basis, 1.0, 4.0).unwrap();
        let space = ground_space(&h, Method::Dense).unwrap();
        let m = 6;
        for channel in [Channel::X, Channel::Y] {
            let corr = DensityCorrelations::compute(&space, channel.observable()).unwrap();
            // commensurate phases 2 pi q / M, where the ring's translation symmetry
            // gives R = M sum_r e^{i delta r} Cov(O_0, O_r)
            for q in 0..m {
                let delta = 2.0 * PI * q as f64 / m as f64;
                let c = couplings_from_phase(delta, m, channel);
                let r = quantum_addition(&space, &c).unwrap();
                let s: Complex64 = (0..m)
                    .map(|r| Complex64::from_polar(1.0, delta * r as f64) * corr.covariance(0, r))
                    .sum();
                assert!((r - m as f64 * s.re).abs() < 1e-10);
                assert!(s.im.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn scan_grid_and_integration() {
        let grid = angle_grid(5);
        assert_eq!(grid.len(), 5);
        assert!((grid[0] + PI).abs() < 1e-15 && (grid[4] - PI).abs() < 1e-15);
        let flat: Vec<ScanPoint> = grid
            .iter()
            .map(|&t| ScanPoint {
                theta_out: t,
                channel: Channel::X,
                classical: 0.0,
                quantum: 1.0,
            })
            .collect();
        assert!((integrated_quantum_addition(&flat) - 2.0 * PI).abs() < 1e-12);
    }
}
