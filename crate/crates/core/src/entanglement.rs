//! Light-matter entanglement entropy.
//!
//! After scattering, the joint state is `sum_z c_z |z> |alpha_z>` with
//! `alpha_z = C z`. The matter states are orthogonal, so the reduced light
//! state is `sum_z |c_z|^2 |alpha_z><alpha_z|`. Its entropy is the Shannon
//! entropy of `|c_z|^2` when the coherent states are far apart, and is computed
//! exactly from their Gram matrix otherwise.

use std::f64::consts::{E, LN_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::hermitian_eigen;
use crate::trajectories::{squeezed_weights, MagnetizationDistribution};

/// Eigenvalues of the light density matrix below this are dropped.
const EIGENVALUE_CUTOFF: f64 = 1e-12;
/// Bessel arguments above this try the large-argument expansion first.
const ASYMPTOTIC_THRESHOLD: f64 = 50.0;
/// Probability tails beyond this many standard deviations are dropped.
const TAIL_WIDTH: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LogBase {
    /// Bits.
    #[default]
    #[serde(rename = "2")]
    Two,
    /// Nats.
    #[serde(rename = "e")]
    E,
}

impl LogBase {
    pub fn log(&self, x: f64) -> f64 {
        match self {
            LogBase::Two => x.log2(),
            LogBase::E => x.ln(),
        }
    }
}

/// `1/2 log(2 pi e sigma^2)`, the entropy of a wide Gaussian count distribution.
pub fn gaussian_entropy(variance: f64, base: LogBase) -> Result<f64> {
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::InvalidParameter(format!("variance {variance} must be positive")));
    }
    Ok(0.5 * base.log(2.0 * PI * E * variance))
}

/// `-sum p log p` with `0 log 0 = 0`.
pub fn shannon_entropy_of(probabilities: &[f64], base: LogBase) -> Result<f64> {
    let total: f64 = probabilities.iter().sum();
    if (total - 1.0).abs() > 1e-9 || probabilities.iter().any(|&p| !(p >= 0.0)) {
        return Err(Error::Unnormalized { total });
    }
    Ok(probabilities
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * base.log(p))
        .sum::<f64>()
        .max(0.0))
}

pub fn shannon_entropy(distribution: &CountDistribution, base: LogBase) -> Result<f64> {
    shannon_entropy_of(distribution.table()?.probabilities(), base)
}

/// Distribution of the light-measurement eigenvalue `z`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum CountDistribution {
    /// Atom number at the diffraction maximum of a superfluid.
    Poisson { mean: f64 },
    /// `N_even - N_odd` with both sublattices Poissonian of mean `mean / 2`:
    /// `P(z) = exp(-mean) I_z(mean)`.
    Skellam { mean: f64 },
    Binomial { trials: u64, probability: f64 },
    Empirical(MagnetizationDistribution),
}

impl CountDistribution {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::InvalidParameter(what));
        match *self {
            CountDistribution::Poisson { mean } | CountDistribution::Skellam { mean } => {
                if !(mean >= 0.0 && mean.is_finite()) {
                    return bad(format!("mean {mean} must be nonnegative"));
                }
            }
            CountDistribution::Binomial { probability, .. } => {
                if !(0.0..=1.0).contains(&probability) {
                    return bad(format!("probability {probability} outside [0, 1]"));
                }
            }
            CountDistribution::Empirical(_) => {}
        }
        Ok(())
    }

    /// Probability table; infinite supports are truncated far in the tails.
    pub fn table(&self) -> Result<MagnetizationDistribution> {
        self.validate()?;
        match *self {
            CountDistribution::Poisson { mean } => {
                if mean == 0.0 {
                    return Ok(MagnetizationDistribution::point(0));
                }
                let width = TAIL_WIDTH * (mean.sqrt() + 1.0);
                let lo = (mean - width).floor().max(0.0) as i64;
                let hi = (mean + width).ceil() as i64;
                let mut log_p = -mean + lo as f64 * mean.ln() - ln_factorial(lo as u64);
                let mut logs = Vec::new();
                for z in lo..=hi {
                    logs.push(log_p);
                    log_p += mean.ln() - ((z + 1) as f64).ln();
                }
                table_from_logs(lo, &logs)
            }
            CountDistribution::Skellam { mean } => {
                let half = (TAIL_WIDTH * (mean.sqrt() + 1.0)).ceil() as i64;
                let support: Vec<i64> = (-half..=half).collect();
                let weights: Vec<f64> = support
                    .iter()
                    .map(|z| bessel_i_scaled(z.unsigned_abs(), mean))
                    .collect();
                MagnetizationDistribution::from_weights(&support, &weights)
            }
            CountDistribution::Binomial { trials, probability } => {
                if probability == 0.0 || trials == 0 {
                    return Ok(MagnetizationDistribution::point(0));
                }
                if probability == 1.0 {
                    return Ok(MagnetizationDistribution::point(trials as i64));
                }
                let n = trials as f64;
                let mut log_p = n * (1.0 - probability).ln();
                let odds = (probability / (1.0 - probability)).ln();
                let mut logs = Vec::with_capacity(trials as usize + 1);
                for k in 0..=trials {
                    logs.push(log_p);
                    log_p += ((n - k as f64) / (k + 1) as f64).ln() + odds;
                }
                table_from_logs(0, &logs)
            }
            CountDistribution::Empirical(ref d) => Ok(d.clone()),
        }
    }

    pub fn mean(&self) -> Result<f64> {
        Ok(self.table()?.mean())
    }

    pub fn variance(&self) -> Result<f64> {
        Ok(self.table()?.variance())
    }
}

fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

fn table_from_logs(first: i64, logs: &[f64]) -> Result<MagnetizationDistribution> {
    let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let support: Vec<i64> = (first..first + logs.len() as i64).collect();
    let weights: Vec<f64> = logs.iter().map(|l| (l - peak).exp()).collect();
    MagnetizationDistribution::from_weights(&support, &weights)
}

/// `exp(-x) I_n(x)` for `x >= 0`.
///
/// Uses the power series up to `x = 50` and the large-argument expansion
/// beyond, falling back to the series when the expansion does not reach
/// machine precision (orders comparable to `sqrt(x)` or larger).
pub fn bessel_i_scaled(n: u64, x: f64) -> f64 {
    assert!(x >= 0.0, "bessel_i_scaled needs a nonnegative argument");
    if x > ASYMPTOTIC_THRESHOLD {
        if let Some(v) = bessel_i_asymptotic(n, x) {
            return v;
        }
    }
    bessel_i_series(n, x)
}

/// `sum_k (x/2)^(2k+n) / (k! (k+n)!)`, accumulated in log space.
pub(crate) fn bessel_i_series(n: u64, x: f64) -> f64 {
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let half = (x / 2.0).ln();
    let mut log_term = -x + n as f64 * half - ln_factorial(n);
    let mut logs = Vec::new();
    let mut peak = f64::NEG_INFINITY;
    let mut k = 0u64;
    loop {
        logs.push(log_term);
        peak = peak.max(log_term);
        let ratio = 2.0 * half - ((k + 1) as f64).ln() - ((k + n + 1) as f64).ln();
        log_term += ratio;
        k += 1;
        if ratio < 0.0 && log_term < peak - 40.0 {
            break;
        }
    }
    peak.exp() * logs.iter().map(|l| (l - peak).exp()).sum::<f64>()
}

/// `(2 pi x)^(-1/2) sum_k (-1)^k a_k(n) / x^k`, or `None` if the terms stop
/// shrinking before reaching relative size 1e-17.
pub(crate) fn bessel_i_asymptotic(n: u64, x: f64) -> Option<f64> {
    let mu = 4.0 * (n as f64) * (n as f64);
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for k in 1..200u64 {
        let next = -term * (mu - ((2 * k - 1) as f64).powi(2)) / (8.0 * k as f64 * x);
        if next.abs() > term.abs() {
            return None;
        }
        sum += next;
        term = next;
        if term.abs() < 1e-17 * sum.abs() {
            return Some(sum / (2.0 * PI * x).sqrt());
        }
    }
    None
}

/// Entropy evaluation route for [`light_matter_entropy`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntropyMode {
    /// Coherent states treated as orthogonal: Shannon entropy of `|c_z|^2`.
    OrthogonalApprox,
    /// Von Neumann entropy of the light state from the coherent-state Gram matrix.
    ExactGram,
}

/// `sum_z c_z |z> |C z>`.
#[derive(Debug, Clone, PartialEq)]
pub struct LightMatterSuperposition {
    components: Vec<(f64, Complex64)>,
    coupling: Complex64,
}

impl LightMatterSuperposition {
    /// Amplitudes are renormalized once their squared norm is within 1e-9 of one.
    pub fn new(components: Vec<(f64, Complex64)>, coupling: Complex64) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidParameter("superposition without components".into()));
        }
        let mut zs: Vec<f64> = components.iter().map(|c| c.0).collect();
        zs.sort_by(f64::total_cmp);
        if zs.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("eigenvalues must be distinct".into()));
        }
        let total: f64 = components.iter().map(|c| c.1.norm_sqr()).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Unnormalized { total });
        }
        let scale = total.sqrt();
        Ok(Self {
            components: components.into_iter().map(|(z, c)| (z, c / scale)).collect(),
            coupling,
        })
    }

    /// Real amplitudes `sqrt(P(z))`.
    pub fn from_distribution(distribution: &MagnetizationDistribution, coupling: Complex64) -> Self {
        let components = distribution
            .iter()
            .map(|(z, p)| (z as f64, Complex64::new(p.sqrt(), 0.0)))
            .collect();
        Self::new(components, coupling).expect("distributions are normalized")
    }

    pub fn components(&self) -> &[(f64, Complex64)] {
        &self.components
    }

    pub fn coherent_amplitude(&self, z: f64) -> Complex64 {
        self.coupling * z
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.1.norm_sqr()).collect()
    }
}

/// Entanglement entropy between the light and the matter.
pub fn light_matter_entropy(sup: &LightMatterSuperposition, mode: EntropyMode, base: LogBase) -> Result<f64> {
    let weights = sup.weights();
    match mode {
        EntropyMode::OrthogonalApprox => shannon_entropy_of(&weights, base),
        EntropyMode::ExactGram => {
            let alphas: Vec<Complex64> = sup.components.iter().map(|c| sup.coherent_amplitude(c.0)).collect();
            let roots: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
            let n = alphas.len();
            // W^1/2 G W^1/2 with G_ab = <alpha_a|alpha_b>
            let m = faer::Mat::<Complex64>::from_fn(n, n, |a, b| {
                let (x, y) = (alphas[a], alphas[b]);
                let overlap = (-0.5 * x.norm_sqr() - 0.5 * y.norm_sqr() + x.conj() * y).exp();
                overlap * roots[a] * roots[b]
            });
            let eigen = hermitian_eigen(&m)?;
            Ok(eigen
                .values
                .iter()
                .filter(|&&l| l > EIGENVALUE_CUTOFF)
                .map(|&l| -l * base.log(l))
                .sum::<f64>()
                .max(0.0))
        }
    }
}

/// `P(z, tau) = |z|^(2m) exp(-tau z^2) P(z, 0) / N`, the prior squeezed by
/// `count` detections in scaled time `tau`.
pub fn squeeze_distribution(prior: &CountDistribution, count: u64, tau: f64) -> Result<CountDistribution> {
    let table = prior.table()?;
    let values: Vec<f64> = table.support().iter().map(|&z| z as f64).collect();
    let weights = squeezed_weights(&values, table.probabilities(), count, tau)?;
    Ok(CountDistribution::Empirical(MagnetizationDistribution::from_weights(
        table.support(),
        &weights,
    )?))
}

/// Converts an entropy in bits to nats.
pub fn bits_to_nats(bits: f64) -> f64 {
    bits * LN_2
}
