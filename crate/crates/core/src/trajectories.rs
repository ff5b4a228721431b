//! Photodetection backaction with tunnelling frozen during the measurement.
//!
//! Matter configurations are grouped by the eigenvalue `z` of the detected
//! operator. Each group is one component carrying a weight and a phase. A
//! detection multiplies a component's amplitude by its jump factor `g_z`;
//! between detections the amplitude decays as `exp(-|g_z|^2 t / 2)`. Direct
//! photodetection has `g_z = sqrt(2 kappa) |C| z`, so after `m` counts in
//! scaled time `tau = 2 |C|^2 kappa t` the weights are
//! `|z|^(2m) exp(-tau z^2) P0(z)` up to normalization, whatever the detection
//! times were.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::SiteObservable;
use crate::scattering::{Channel, Occupations};

/// Relative width at which jump-time bisection stops.
const BISECTION_TOLERANCE: f64 = 1e-12;
/// Guard against runaway records.
const MAX_DETECTIONS: usize = 10_000_000;

/// Probability distribution over integer measurement eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MagnetizationDistribution {
    support: Vec<i64>,
    probabilities: Vec<f64>,
}

impl MagnetizationDistribution {
    /// Normalizes nonnegative `weights`; `support` is sorted and merged.
    pub fn from_weights(support: &[i64], weights: &[f64]) -> Result<Self> {
        if support.len() != weights.len() {
            return Err(Error::InvalidParameter(format!(
                "{} support points but {} weights",
                support.len(),
                weights.len()
            )));
        }
        let mut merged = BTreeMap::new();
        for (&z, &w) in support.iter().zip(weights) {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidParameter(format!("weight {w} at z = {z}")));
            }
            *merged.entry(z).or_insert(0.0) += w;
        }
        let total: f64 = merged.values().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Unnormalized { total });
        }
        Ok(Self {
            support: merged.keys().copied().collect(),
            probabilities: merged.values().map(|w| w / total).collect(),
        })
    }

    /// Like [`from_weights`](Self::from_weights) but rejects totals more than 1e-9 away from one.
    pub fn new(support: &[i64], probabilities: &[f64]) -> Result<Self> {
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Unnormalized { total });
        }
        Self::from_weights(support, probabilities)
    }

    /// Uniform distribution over `lo..=hi`.
    pub fn flat(lo: i64, hi: i64) -> Result<Self> {
        let support: Vec<i64> = (lo..=hi).collect();
        Self::from_weights(&support, &vec![1.0; support.len()])
    }

    /// All weight on `z`.
    pub fn point(z: i64) -> Self {
        Self {
            support: vec![z],
            probabilities: vec![1.0],
        }
    }

    pub fn support(&self) -> &[i64] {
        &self.support
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.support.iter().copied().zip(self.probabilities.iter().copied())
    }

    pub fn probability(&self, z: i64) -> f64 {
        self.support
            .binary_search(&z)
            .map(|k| self.probabilities[k])
            .unwrap_or(0.0)
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(z, p)| z as f64 * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.iter().map(|(z, p)| p * (z as f64 - mean).powi(2)).sum()
    }

    /// Most probable eigenvalue; the smallest one on ties.
    pub fn argmax(&self) -> i64 {
        let mut best = 0;
        for k in 1..self.support.len() {
            if self.probabilities[k] > self.probabilities[best] {
                best = k;
            }
        }
        self.support[best]
    }

    pub fn is_symmetric(&self, tolerance: f64) -> bool {
        self.iter().all(|(z, p)| (p - self.probability(-z)).abs() <= tolerance)
    }

    /// Total-variation distance `1/2 sum |p - q|` over the union of supports.
    pub fn total_variation(&self, other: &Self) -> f64 {
        let mut diff: BTreeMap<i64, f64> = self.iter().collect();
        for (z, q) in other.iter() {
            *diff.entry(z).or_insert(0.0) -= q;
        }
        0.5 * diff.values().map(|d| d.abs()).sum::<f64>()
    }
}

/// Illuminated region and the sign pattern of its couplings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Illumination {
    pub sites: Vec<usize>,
    /// Couplings `(-1)^j` (diffraction minimum) instead of all equal (maximum).
    pub alternating: bool,
}

impl Illumination {
    /// Sites `0..count` at the diffraction maximum.
    pub fn first(count: usize) -> Self {
        Self {
            sites: (0..count).collect(),
            alternating: false,
        }
    }

    pub fn alternating(mut self) -> Self {
        self.alternating = true;
        self
    }

    fn sign(&self, site: usize) -> f64 {
        if self.alternating && site % 2 == 1 {
            -1.0
        } else {
            1.0
        }
    }

    fn validate(&self, sites: usize) -> Result<()> {
        if self.sites.is_empty() {
            return Err(Error::InvalidParameter("no illuminated sites".into()));
        }
        let mut seen = vec![false; sites];
        for &s in &self.sites {
            if s >= sites {
                return Err(Error::SiteOutOfRange { site: s, sites });
            }
            if std::mem::replace(&mut seen[s], true) {
                return Err(Error::InvalidParameter(format!("site {s} illuminated twice")));
            }
        }
        Ok(())
    }

    /// Eigenvalue `sum_j s_j O_j` on configuration `k`.
    fn eigenvalue<S: Occupations + ?Sized>(&self, state: &S, k: usize, observable: SiteObservable) -> i64 {
        let basis = state.basis();
        self.sites
            .iter()
            .map(|&j| self.sign(j) * observable.value(basis, k, j))
            .sum::<f64>()
            .round() as i64
    }
}

/// Distribution `P0(z)` of the detected eigenvalue over the illuminated region.
///
/// For the `Y` channel at the diffraction maximum this is the magnetization
/// distribution `P0(M_K)`.
pub fn initial_distribution<S: Occupations + ?Sized>(
    state: &S,
    illumination: &Illumination,
    channel: Channel,
) -> Result<MagnetizationDistribution> {
    let spec = state.basis().spec();
    channel.observable().check(spec)?;
    illumination.validate(spec.sites)?;
    let probs = state.probabilities();
    let support: Vec<i64> = (0..probs.len())
        .map(|k| illumination.eigenvalue(state, k, channel.observable()))
        .collect();
    MagnetizationDistribution::from_weights(&support, &probs)
}

/// Joint distribution of the illuminated spin-up and spin-down eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointDistribution {
    /// `((z_up, z_down), probability)` sorted by `(z_up, z_down)`.
    pub entries: Vec<((i64, i64), f64)>,
}

impl JointDistribution {
    /// Distribution of `z_up - z_down`.
    pub fn magnetization(&self) -> Result<MagnetizationDistribution> {
        let (support, weights): (Vec<i64>, Vec<f64>) = self.entries.iter().map(|&((u, d), p)| (u - d, p)).unzip();
        MagnetizationDistribution::from_weights(&support, &weights)
    }

    /// `|z_up - z_down|^(2m) exp(-tau (z_up - z_down)^2) P0(z_up, z_down)`, normalized.
    pub fn conditional(&self, count: u64, tau: f64) -> Result<Self> {
        let values: Vec<f64> = self.entries.iter().map(|&((u, d), _)| (u - d) as f64).collect();
        let prior: Vec<f64> = self.entries.iter().map(|e| e.1).collect();
        let weights = squeezed_weights(&values, &prior, count, tau)?;
        Ok(Self {
            entries: self.entries.iter().zip(weights).map(|(e, w)| (e.0, w)).collect(),
        })
    }
}

/// Exact joint `P0(z_up, z_down)` of a fermionic state.
pub fn joint_initial_distribution<S: Occupations + ?Sized>(
    state: &S,
    illumination: &Illumination,
) -> Result<JointDistribution> {
    let spec = state.basis().spec();
    SiteObservable::SpinUp.check(spec)?;
    illumination.validate(spec.sites)?;
    let mut joint = BTreeMap::new();
    for (k, p) in state.probabilities().into_iter().enumerate() {
        let up = illumination.eigenvalue(state, k, SiteObservable::SpinUp);
        let down = illumination.eigenvalue(state, k, SiteObservable::SpinDown);
        *joint.entry((up, down)).or_insert(0.0) += p;
    }
    let total: f64 = joint.values().sum();
    Ok(JointDistribution {
        entries: joint.into_iter().map(|(key, p)| (key, p / total)).collect(),
    })
}

/// Normalized `|z|^(2m) exp(-tau z^2) prior(z)`, evaluated in log space.
pub(crate) fn squeezed_weights(values: &[f64], prior: &[f64], count: u64, tau: f64) -> Result<Vec<f64>> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::InvalidParameter(format!("scaled time tau = {tau}")));
    }
    let logs: Vec<f64> = values
        .iter()
        .zip(prior)
        .map(|(&z, &p)| {
            if p <= 0.0 || (count > 0 && z == 0.0) {
                f64::NEG_INFINITY
            } else if count == 0 {
                -tau * z * z + p.ln()
            } else {
                2.0 * count as f64 * z.abs().ln() - tau * z * z + p.ln()
            }
        })
        .collect();
    let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY {
        return Err(Error::InconsistentMeasurement(format!(
            "{count} detections but the prior has no weight off z = 0"
        )));
    }
    let weights: Vec<f64> = logs.iter().map(|l| (l - peak).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// `P_c(z) = |z|^(2m) exp(-tau z^2) P0(z) / N` after `count` detections.
pub fn conditional_distribution(
    prior: &MagnetizationDistribution,
    count: u64,
    tau: f64,
) -> Result<MagnetizationDistribution> {
    let values: Vec<f64> = prior.support.iter().map(|&z| z as f64).collect();
    let probabilities = squeezed_weights(&values, &prior.probabilities, count, tau)?;
    Ok(MagnetizationDistribution {
        support: prior.support.clone(),
        probabilities,
    })
}

/// One eigenvalue group of a conditioned light-matter state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Component {
    pub eigenvalue: f64,
    pub prior: f64,
    /// Normalized current weight.
    pub weight: f64,
    /// Unit phase accumulated from the jump factors.
    pub phase: Complex64,
}

/// Conditioned state after `count` detections in time `time`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalState {
    components: Vec<Component>,
    count: u64,
    time: f64,
    tau: f64,
}

impl ConditionalState {
    pub fn from_prior(eigenvalues: &[f64], prior: &[f64]) -> Result<Self> {
        if eigenvalues.len() != prior.len() || eigenvalues.is_empty() {
            return Err(Error::InvalidParameter("prior needs one weight per eigenvalue".into()));
        }
        let total: f64 = prior.iter().sum();
        if !(total > 0.0 && total.is_finite()) || prior.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::Unnormalized { total });
        }
        let components = eigenvalues
            .iter()
            .zip(prior)
            .map(|(&z, &p)| Component {
                eigenvalue: z,
                prior: p / total,
                weight: p / total,
                phase: Complex64::new(1.0, 0.0),
            })
            .collect();
        Ok(Self {
            components,
            count: 0,
            time: 0.0,
            tau: 0.0,
        })
    }

    pub fn from_distribution(prior: &MagnetizationDistribution) -> Self {
        let values: Vec<f64> = prior.support.iter().map(|&z| z as f64).collect();
        Self::from_prior(&values, &prior.probabilities).expect("distributions are normalized")
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Scaled time `2 |C|^2 kappa t`.
    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.weight).collect()
    }

    pub fn amplitude(&self, k: usize) -> Complex64 {
        self.components[k].phase * self.components[k].weight.sqrt()
    }

    /// `<z>` in the conditioned state.
    pub fn mean(&self) -> f64 {
        self.components.iter().map(|c| c.weight * c.eigenvalue).sum()
    }

    /// Conditioned distribution; eigenvalues are rounded to integers.
    pub fn distribution(&self) -> Result<MagnetizationDistribution> {
        let support: Vec<i64> = self.components.iter().map(|c| c.eigenvalue.round() as i64).collect();
        MagnetizationDistribution::from_weights(&support, &self.weights())
    }

    fn renormalize(&mut self) -> Result<()> {
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Numerical(format!("conditioned weights sum to {total}")));
        }
        self.components.iter_mut().for_each(|c| c.weight /= total);
        Ok(())
    }
}

/// Per-component jump factors of a detector.
#[derive(Debug, Clone)]
pub(crate) struct JumpChannel {
    factors: Vec<Complex64>,
    rates: Vec<f64>,
    /// `d tau / d t`.
    tau_rate: f64,
}

impl JumpChannel {
    pub(crate) fn new(factors: Vec<Complex64>, tau_rate: f64) -> Self {
        let rates = factors.iter().map(|g| g.norm_sqr()).collect();
        Self {
            factors,
            rates,
            tau_rate,
        }
    }

    fn total_rate(&self, state: &ConditionalState) -> f64 {
        state.components.iter().zip(&self.rates).map(|(c, r)| c.weight * r).sum()
    }

    /// Probability of no detection during `dt`, `sum_z w_z exp(-rate_z dt)`.
    fn survival(&self, state: &ConditionalState, dt: f64) -> f64 {
        state
            .components
            .iter()
            .zip(&self.rates)
            .map(|(c, &r)| match (c.weight, r) {
                (w, _) if w == 0.0 => 0.0,
                (w, r) if r == 0.0 => w,
                (w, r) => w * (-r * dt).exp(),
            })
            .sum()
    }

    /// No-detection evolution over `dt`.
    pub(crate) fn decay(&self, state: &mut ConditionalState, dt: f64) -> Result<()> {
        if dt > 0.0 {
            // shifting by the smallest active rate leaves the normalized weights unchanged
            let floor = state
                .components
                .iter()
                .zip(&self.rates)
                .filter(|(c, _)| c.weight > 0.0)
                .map(|(_, &r)| r)
                .fold(f64::INFINITY, f64::min);
            for (c, r) in state.components.iter_mut().zip(&self.rates) {
                c.weight *= (-(r - floor) * dt).exp();
            }
            state.time += dt;
            state.tau += self.tau_rate * dt;
        }
        state.renormalize()
    }

    pub(crate) fn jump(&self, state: &mut ConditionalState) -> Result<()> {
        for (c, g) in state.components.iter_mut().zip(&self.factors) {
            c.weight *= g.norm_sqr();
            if g.norm() > 0.0 {
                c.phase *= g / g.norm();
            }
        }
        state.count += 1;
        state.renormalize()
    }

    /// Delay until the next detection for a uniform draw `u` in (0, 1], or
    /// `None` when it falls beyond `horizon`.
    pub(crate) fn next_delay(&self, state: &ConditionalState, u: f64, horizon: f64) -> Option<f64> {
        if self.total_rate(state) == 0.0 || self.survival(state, horizon) >= u {
            return None;
        }
        let mut hi = if horizon.is_finite() {
            horizon
        } else {
            let max_rate = self.rates.iter().copied().fold(0.0, f64::max);
            let mut hi = 1.0 / max_rate;
            while self.survival(state, hi) >= u {
                hi *= 2.0;
            }
            hi
        };
        let mut lo = 0.0;
        for _ in 0..200 {
            if hi - lo <= BISECTION_TOLERANCE * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.survival(state, mid) > u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }

    /// Evolves `state` for `duration`, returning the absolute detection times.
    pub(crate) fn run<R: Rng>(
        &self,
        state: &mut ConditionalState,
        duration: f64,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        if !(duration >= 0.0) {
            return Err(Error::InvalidParameter(format!("duration {duration}")));
        }
        let has_zero_rate = state
            .components
            .iter()
            .zip(&self.rates)
            .any(|(c, &r)| c.weight > 0.0 && r == 0.0);
        if duration.is_infinite() && self.total_rate(state) > 0.0 && !has_zero_rate {
            return Err(Error::InvalidParameter(
                "an infinite duration needs a dark component or a zero jump rate".into(),
            ));
        }
        let start = state.time;
        let mut times = Vec::new();
        loop {
            let elapsed = state.time - start;
            let u = 1.0 - rng.random::<f64>();
            match self.next_delay(state, u, duration - elapsed) {
                Some(dt) => {
                    self.decay(state, dt)?;
                    self.jump(state)?;
                    times.push(state.time);
                    if times.len() > MAX_DETECTIONS {
                        return Err(Error::Numerical(format!("more than {MAX_DETECTIONS} detections")));
                    }
                }
                None => {
                    if duration.is_finite() {
                        self.decay(state, duration - elapsed)?;
                    } else {
                        // the surviving state is the dark component
                        for (c, &r) in state.components.iter_mut().zip(&self.rates) {
                            if r > 0.0 {
                                c.weight = 0.0;
                            }
                        }
                        if state.components.iter().any(|c| c.weight > 0.0) {
                            state.renormalize()?;
                        }
                    }
                    return Ok(times);
                }
            }
        }
    }
}

/// Cavity decay and coupling magnitude of direct photodetection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Detection {
    /// `|C|`.
    pub coupling: f64,
    pub kappa: f64,
}

impl Detection {
    pub fn validate(&self) -> Result<()> {
        if !(self.coupling.is_finite() && self.coupling >= 0.0) {
            return Err(Error::InvalidParameter(format!("coupling |C| = {}", self.coupling)));
        }
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(Error::InvalidParameter(format!("kappa = {}", self.kappa)));
        }
        Ok(())
    }

    /// `2 |C|^2 kappa`, converting time to scaled time.
    pub fn tau_rate(&self) -> f64 {
        2.0 * self.coupling * self.coupling * self.kappa
    }

    /// Detection rate `2 kappa |C z|^2` of eigenvalue `z`.
    pub fn rate(&self, z: f64) -> f64 {
        self.tau_rate() * z * z
    }

    pub(crate) fn channel(&self, eigenvalues: impl Iterator<Item = f64>) -> JumpChannel {
        let scale = (2.0 * self.kappa).sqrt() * self.coupling;
        JumpChannel::new(eigenvalues.map(|z| Complex64::new(scale * z, 0.0)).collect(), self.tau_rate())
    }
}

/// Per-trajectory generator: stream `stream` of the master `seed`.
pub fn trajectory_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A single stochastic detection record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub stream: u64,
    pub duration: f64,
    /// Strictly increasing detection times.
    pub detection_times: Vec<f64>,
    pub final_state: ConditionalState,
}

impl TrajectoryRecord {
    /// Counts registered up to and including time `t`.
    pub fn count_at(&self, t: f64) -> u64 {
        self.detection_times.partition_point(|&d| d <= t) as u64
    }
}

/// Direct-photodetection trajectory on stream 0 of `seed`.
pub fn sample_trajectory(
    prior: &MagnetizationDistribution,
    detection: &Detection,
    duration: f64,
    seed: u64,
) -> Result<TrajectoryRecord> {
    sample_trajectory_stream(prior, detection, duration, seed, 0)
}

pub fn sample_trajectory_stream(
    prior: &MagnetizationDistribution,
    detection: &Detection,
    duration: f64,
    seed: u64,
    stream: u64,
) -> Result<TrajectoryRecord> {
    detection.validate()?;
    let mut state = ConditionalState::from_distribution(prior);
    let channel = detection.channel(prior.support.iter().map(|&z| z as f64));
    let detection_times = channel.run(&mut state, duration, &mut trajectory_rng(seed, stream))?;
    Ok(TrajectoryRecord {
        seed,
        stream,
        duration,
        detection_times,
        final_state: state,
    })
}

/// `count` trajectories; trajectory `i` uses stream `i`, results ordered by index.
pub fn sample_ensemble(
    prior: &MagnetizationDistribution,
    detection: &Detection,
    duration: f64,
    seed: u64,
    count: usize,
) -> Result<Vec<TrajectoryRecord>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| sample_trajectory_stream(prior, detection, duration, seed, i))
        .collect()
}

/// Aggregate statistics of an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub trajectories: usize,
    pub mean_count: f64,
    pub count_variance: f64,
    /// `count_histogram[m]` trajectories ended with `m` detections.
    pub count_histogram: Vec<u64>,
    /// Ensemble mean of the conditioned `<z>`.
    pub mean_eigenvalue: f64,
    /// Ensemble mean of the conditioned `<|z|>`.
    pub mean_abs_eigenvalue: f64,
    /// Fraction of trajectories left with exactly two components above 1% weight.
    pub cat_fraction: f64,
}

pub fn summarize(records: &[TrajectoryRecord]) -> EnsembleSummary {
    let n = records.len().max(1) as f64;
    let counts: Vec<u64> = records.iter().map(|r| r.final_state.count).collect();
    let max = counts.iter().copied().max().unwrap_or(0) as usize;
    let mut count_histogram = vec![0u64; if records.is_empty() { 0 } else { max + 1 }];
    for &m in &counts {
        count_histogram[m as usize] += 1;
    }
    let mean_count = counts.iter().sum::<u64>() as f64 / n;
    let count_variance = counts.iter().map(|&m| (m as f64 - mean_count).powi(2)).sum::<f64>() / n;
    let mean_abs = |s: &ConditionalState| s.components.iter().map(|c| c.weight * c.eigenvalue.abs()).sum::<f64>();
    EnsembleSummary {
        trajectories: records.len(),
        mean_count,
        count_variance,
        count_histogram,
        mean_eigenvalue: records.iter().map(|r| r.final_state.mean()).sum::<f64>() / n,
        mean_abs_eigenvalue: records.iter().map(|r| mean_abs(&r.final_state)).sum::<f64>() / n,
        cat_fraction: records
            .iter()
            .filter(|r| cat_components(&r.final_state, 0.01).len() == 2)
            .count() as f64
            / n,
    }
}

/// Components whose normalized weight exceeds `threshold`, as `(z, weight)`.
pub fn cat_components(state: &ConditionalState, threshold: f64) -> Vec<(f64, f64)> {
    state
        .components
        .iter()
        .filter(|c| c.weight > threshold)
        .map(|c| (c.eigenvalue, c.weight))
        .collect()
}

/// Two-component state `w+ |z> |a_z> + s w- |-z> |a_-z>` with `s = (-1)^m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CatState {
    pub magnitude: f64,
    pub weight_plus: f64,
    pub weight_minus: f64,
    /// Amplitude ratio sign of `-z` relative to `+z`.
    pub relative_sign: f64,
}

impl CatState {
    pub fn separation(&self) -> f64 {
        2.0 * self.magnitude
    }
}

/// Cat state left by photon counting at the diffraction minimum, where only
/// `|z|` with `z = N_even - N_odd` is constrained.
///
/// The magnitude is the most probable `|z|` of the conditioned distribution;
/// a detection multiplies `|-z>` by `-z`, so the relative sign is `(-1)^m`.
pub fn boson_minimum_cat(prior: &MagnetizationDistribution, count: u64, tau: f64) -> Result<CatState> {
    let conditioned = conditional_distribution(prior, count, tau)?;
    let mut by_magnitude: BTreeMap<i64, f64> = BTreeMap::new();
    for (z, p) in conditioned.iter() {
        *by_magnitude.entry(z.abs()).or_insert(0.0) += p;
    }
    let (&magnitude, _) = by_magnitude
        .iter()
        .fold(None, |best: Option<(&i64, &f64)>, e| match best {
            Some(b) if b.1 >= e.1 => Some(b),
            _ => Some(e),
        })
        .expect("conditioned distributions are nonempty");
    let (plus, minus) = (conditioned.probability(magnitude), conditioned.probability(-magnitude));
    let pair = if magnitude == 0 { plus } else { plus + minus };
    Ok(CatState {
        magnitude: magnitude as f64,
        weight_plus: plus / pair,
        weight_minus: if magnitude == 0 { 0.0 } else { minus / pair },
        relative_sign: if count % 2 == 0 { 1.0 } else { -1.0 },
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use proptest::prelude::*;
    use rand::Rng;

    use super::*;
    use crate::lattice::{build_hamiltonian, ground_space, FockBasis, LatticeSpec, Method, StateVector};

    fn detection() -> Detection {
        Detection {
            coupling: 0.5,
            kappa: 1.0,
        }
    }

    #[test]
    fn single_up_fermion_is_a_point_mass() {
        let basis = Arc::new(FockBasis::new(LatticeSpec::fermions(1, 1, 0)).unwrap());
        let psi = StateVector::basis_state(basis, 0);
        let p0 = initial_distribution(&psi, &Illumination::first(1), Channel::Y).unwrap();
        assert_eq!(p0, MagnetizationDistribution::point(1));
    }

    #[test]
    fn free_fermion_prior_is_spin_symmetric_with_fixed_parity() {
        let basis = Arc::new(FockBasis::new(LatticeSpec::fermions(6, 3, 3)).unwrap());
        let h = build_hamiltonian(&basis, 1.0, 0.0).unwrap();
        let gs = ground_space(&h, Method::Auto).unwrap();
        for k in [6, 3] {
            let p0 = initial_distribution(&gs, &Illumination::first(k), Channel::Y).unwrap();
            assert!(p0.is_symmetric(1e-12));
            assert!(p0.support().iter().all(|z| z.abs() <= k as i64));
            assert!((p0.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        // with all sites lit, M_K = N_up - N_down = 0 for every configuration
        let full = initial_distribution(&gs, &Illumination::first(6), Channel::Y).unwrap();
        assert_eq!(full, MagnetizationDistribution::point(0));
        // parity of M_K follows N_K, which varies in a subregion
        let joint = joint_initial_distribution(&gs, &Illumination::first(3)).unwrap();
        for ((u, d), _) in &joint.entries {
            assert_eq!((u - d).rem_euclid(2), (u + d).rem_euclid(2));
        }
    }

    #[test]
    fn illumination_and_channel_errors() {
        let basis = Arc::new(FockBasis::new(LatticeSpec::fermions(3, 1, 1)).unwrap());
        let psi = StateVector::basis_state(basis, 0);
        assert!(initial_distribution(&psi, &Illumination::first(4), Channel::Y).is_err());
        assert!(initial_distribution(&psi, &Illumination::first(2), Channel::Boson).is_err());
        let twice = Illumination {
            sites: vec![0, 0],
            alternating: false,
        };
        assert!(initial_distribution(&psi, &twice, Channel::Y).is_err());
    }

    #[test]
    fn alternating_boson_channel_counts_even_minus_odd() {
        let basis = Arc::new(FockBasis::new(LatticeSpec::bosons(4, 2, 2)).unwrap());
        let k = basis.index_of(&[1, 0, 0, 1]).unwrap();
        let psi = StateVector::basis_state(basis.clone(), k);
        let lit = Illumination::first(4).alternating();
        assert_eq!(initial_distribution(&psi, &lit, Channel::Boson).unwrap().argmax(), 0);
        let k = basis.index_of(&[2, 0, 0, 0]).unwrap();
        let psi = StateVector::basis_state(basis, k);
        assert_eq!(initial_distribution(&psi, &lit, Channel::Boson).unwrap().argmax(), 2);
    }

    #[test]
    fn conditional_identity_and_zero_exclusion() {
        let p0 = MagnetizationDistribution::flat(-4, 4).unwrap();
        assert_eq!(conditional_distribution(&p0, 0, 0.0).unwrap(), p0);
        for m in 1..6 {
            let pc = conditional_distribution(&p0, m, 0.3).unwrap();
            assert_eq!(pc.probability(0), 0.0);
            assert!((pc.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let dark = MagnetizationDistribution::point(0);
        assert!(matches!(
            conditional_distribution(&dark, 1, 0.1),
            Err(Error::InconsistentMeasurement(_))
        ));
        assert!(conditional_distribution(&dark, 0, 5.0).is_ok());
    }

    #[test]
    fn nearest_integer_rule_fails_just_below_half_integers() {
        // f(M) = 2m ln M - tau M^2 prefers 2 over 1 only once m/tau > 3 / (2 ln 2)
        let p0 = MagnetizationDistribution::flat(-4, 4).unwrap();
        let crossover = (3.0 / (2.0 * 2f64.ln())).sqrt();
        assert!(crossover < 1.5);
        let m = 40;
        let peak = 0.5 * (crossover + 1.5);
        let tau = m as f64 / (peak * peak);
        assert_eq!(conditional_distribution(&p0, m, tau).unwrap().argmax().abs(), 2);
    }

    #[test]
    fn joint_conditional_marginalizes_to_the_magnetization_law() {
        let basis = Arc::new(FockBasis::new(LatticeSpec::fermions(6, 3, 3)).unwrap());
        let h = build_hamiltonian(&basis, 1.0, 2.0).unwrap();
        let gs = ground_space(&h, Method::Auto).unwrap();
        let joint = joint_initial_distribution(&gs, &Illumination::first(4)).unwrap();
        let direct = conditional_distribution(&joint.magnetization().unwrap(), 3, 0.7).unwrap();
        let via_joint = joint.conditional(3, 0.7).unwrap().magnetization().unwrap();
        assert!(direct.total_variation(&via_joint) < 1e-12);
    }

    #[test]
    fn same_seed_same_record() {
        let p0 = MagnetizationDistribution::flat(-3, 3).unwrap();
        let a = sample_trajectory(&p0, &detection(), 20.0, 7).unwrap();
        let b = sample_trajectory(&p0, &detection(), 20.0, 7).unwrap();
        let c = sample_trajectory(&p0, &detection(), 20.0, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.detection_times, c.detection_times);
        assert!(a.detection_times.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(a.count_at(20.0), a.final_state.count());
    }

    #[test]
    fn dark_prior_with_infinite_duration_has_no_detections() {
        let rec = sample_trajectory(&MagnetizationDistribution::point(0), &detection(), f64::INFINITY, 1).unwrap();
        assert!(rec.detection_times.is_empty());
        let bright = MagnetizationDistribution::point(2);
        assert!(sample_trajectory(&bright, &detection(), f64::INFINITY, 1).is_err());
        // a dark component eventually absorbs every trajectory
        let mixed = MagnetizationDistribution::new(&[0, 1], &[0.5, 0.5]).unwrap();
        let rec = sample_trajectory(&mixed, &detection(), f64::INFINITY, 3).unwrap();
        assert_eq!(rec.final_state.weights(), vec![1.0, 0.0]);
        let zero = Detection {
            coupling: 0.0,
            kappa: 1.0,
        };
        assert!(sample_trajectory(&bright, &zero, f64::INFINITY, 1).unwrap().detection_times.is_empty());
    }

    #[test]
    fn single_component_counts_are_poisson() {
        let det = detection();
        let z = 3;
        let t = 2.0;
        let recs = sample_ensemble(&MagnetizationDistribution::point(z), &det, t, 11, 4000).unwrap();
        let s = summarize(&recs);
        let mean = det.rate(z as f64) * t;
        let sigma = (mean / recs.len() as f64).sqrt();
        assert!((s.mean_count - mean).abs() < 3.0 * sigma, "{} vs {mean}", s.mean_count);
        assert!((s.count_variance / mean - 1.0).abs() < 0.1);
    }

    #[test]
    fn ensemble_mean_of_conditioned_weights_is_the_prior() {
        let p0 = MagnetizationDistribution::flat(-3, 3).unwrap();
        let recs = sample_ensemble(&p0, &detection(), 1.5, 5, 6000).unwrap();
        let mut mean = [0.0; 7];
        for r in &recs {
            for (k, w) in r.final_state.weights().iter().enumerate() {
                mean[k] += w / recs.len() as f64;
            }
        }
        for m in mean {
            assert!((m - 1.0 / 7.0).abs() < 0.02, "{mean:?}");
        }
    }

    #[test]
    fn long_trajectories_leave_symmetric_cats() {
        let p0 = MagnetizationDistribution::flat(-4, 4).unwrap();
        let recs = sample_ensemble(&p0, &detection(), 40.0, 2, 400).unwrap();
        let mut plus = 0.0;
        let mut pairs = 0;
        for r in &recs {
            let cat = cat_components(&r.final_state, 0.01);
            if cat.len() == 2 {
                assert_eq!(cat[0].0, -cat[1].0);
                plus += cat[1].1;
                pairs += 1;
            } else {
                // only trajectories that never clicked collapse onto the dark component
                assert!(cat.len() == 1 && cat[0].0 == 0.0 && cat[0].1 > 0.99);
            }
        }
        assert!(pairs > 300);
        assert!((plus / pairs as f64 - 0.5).abs() < 0.02);
        assert!(cat_components(&recs[0].final_state, 1.0).is_empty());

        let one_sided = MagnetizationDistribution::flat(1, 4).unwrap();
        let rec = sample_trajectory(&one_sided, &detection(), 40.0, 2).unwrap();
        assert_eq!(cat_components(&rec.final_state, 0.01).len(), 1);
    }

    #[test]
    fn minimum_cat_sign_and_separation() {
        let p0 = MagnetizationDistribution::flat(-6, 6).unwrap();
        let even = boson_minimum_cat(&p0, 40, 10.0).unwrap();
        let odd = boson_minimum_cat(&p0, 41, 10.25).unwrap();
        assert_eq!(even.relative_sign, 1.0);
        assert_eq!(odd.relative_sign, -1.0);
        assert_eq!(even.separation(), 4.0);
        assert!((even.weight_plus - 0.5).abs() < 1e-12 && (even.weight_minus - 0.5).abs() < 1e-12);
    }

    fn stepwise(p0: &MagnetizationDistribution, gaps: &[f64], tail: f64) -> ConditionalState {
        let det = detection();
        let channel = det.channel(p0.support().iter().map(|&z| z as f64));
        let mut state = ConditionalState::from_distribution(p0);
        for &dt in gaps {
            channel.decay(&mut state, dt).unwrap();
            channel.jump(&mut state).unwrap();
        }
        channel.decay(&mut state, tail).unwrap();
        state
    }

    proptest! {
        #[test]
        fn stepwise_evolution_matches_the_closed_form(
            gaps in prop::collection::vec(0.0f64..0.5, 0..25),
            tail in 0.0f64..2.0,
            weights in prop::collection::vec(0.01f64..1.0, 9),
        ) {
            let support: Vec<i64> = (-4..=4).collect();
            let p0 = MagnetizationDistribution::from_weights(&support, &weights).unwrap();
            let state = stepwise(&p0, &gaps, tail);
            let sum: f64 = state.weights().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            let exact = conditional_distribution(&p0, state.count(), state.tau()).unwrap();
            for (w, p) in state.weights().iter().zip(exact.probabilities()) {
                prop_assert!((w - p).abs() < 1e-10);
            }
        }

        #[test]
        fn detection_times_do_not_matter(
            a in prop::collection::vec(0.01f64..1.0, 1..10),
            shuffle_seed in 0u64..1000,
        ) {
            let p0 = MagnetizationDistribution::flat(-4, 4).unwrap();
            let total: f64 = a.iter().sum();
            // the same count and elapsed time with different jump times
            let mut rng = trajectory_rng(shuffle_seed, 0);
            let mut cuts: Vec<f64> = (0..a.len()).map(|_| rng.random::<f64>() * total).collect();
            cuts.sort_by(f64::total_cmp);
            let mut b = Vec::with_capacity(a.len());
            let mut last = 0.0;
            for c in cuts {
                b.push(c - last);
                last = c;
            }
            let x = stepwise(&p0, &a, 0.3);
            let y = stepwise(&p0, &b, 0.3 + total - last);
            prop_assert_eq!(x.count(), y.count());
            for (u, v) in x.weights().iter().zip(y.weights()) {
                prop_assert!((u - v).abs() < 1e-10);
            }
        }

        #[test]
        fn no_jump_evolution_favours_small_eigenvalues(dt in 0.0f64..3.0, weights in prop::collection::vec(0.05f64..1.0, 5)) {
            let p0 = MagnetizationDistribution::from_weights(&[0, 1, 2, 3, 4], &weights).unwrap();
            let det = detection();
            let channel = det.channel(p0.support().iter().map(|&z| z as f64));
            let mut state = ConditionalState::from_distribution(&p0);
            let ratio = |s: &ConditionalState, i: usize, j: usize| s.weights()[i] / s.weights()[j];
            let before: Vec<f64> = (0..4).map(|i| ratio(&state, i, i + 1)).collect();
            channel.decay(&mut state, dt).unwrap();
            let after: Vec<f64> = (0..4).map(|i| ratio(&state, i, i + 1)).collect();
            for (b, a) in before.iter().zip(&after) {
                prop_assert!(a >= b);
            }
            channel.jump(&mut state).unwrap();
            let jumped: Vec<f64> = (1..4).map(|i| ratio(&state, i, i + 1)).collect();
            for (a, j) in after[1..].iter().zip(&jumped) {
                prop_assert!(j < a);
            }
        }
    }
}
