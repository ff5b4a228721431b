//! Homodyne detection: the cavity output is mixed with a local oscillator of
//! flux `F` before the photodetector, so a detection applies
//! `c = sqrt(F) + sqrt(2 kappa) a` (up to a global phase). On a component with
//! eigenvalue `z` this is the factor `g_z = sqrt(F) + sqrt(2 kappa) |C| z e^(i dphi)`
//! and the count rate is `|g_z|^2`.
//!
//! At a given empirical rate `m/t` only the two eigenvalues with
//! `|g_z|^2 = m/t` survive. With `dphi = 0` the two factors have opposite
//! signs and every count flips the relative phase by pi; with `dphi = pi/2`
//! each count only rotates it by a small angle.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectories::{trajectory_rng, ConditionalState, JumpChannel, TrajectoryRecord};

/// Relative slack allowed below the regime threshold before it is an error.
const REGIME_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomodyneConfig {
    /// Local-oscillator flux at the detector.
    pub flux: f64,
    /// Phase of the atomic light relative to the local oscillator.
    pub phase_difference: f64,
    pub kappa: f64,
    /// `|C|`.
    pub coupling: f64,
    /// Rotation rate of the two components, `e^(+-i phi t)`; cancels in every
    /// measured quantity.
    pub rotation: f64,
}

impl HomodyneConfig {
    pub fn new(flux: f64, phase_difference: f64, kappa: f64, coupling: f64) -> Self {
        Self {
            flux,
            phase_difference,
            kappa,
            coupling,
            rotation: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: String| if ok { Ok(()) } else { Err(Error::InvalidParameter(what)) };
        check(self.flux.is_finite() && self.flux >= 0.0, format!("flux {} must be >= 0", self.flux))?;
        check(self.kappa.is_finite() && self.kappa > 0.0, format!("kappa {} must be > 0", self.kappa))?;
        check(
            self.coupling.is_finite() && self.coupling >= 0.0,
            format!("coupling {} must be >= 0", self.coupling),
        )?;
        check(
            self.phase_difference.is_finite() && self.rotation.is_finite(),
            "phases must be finite".into(),
        )
    }

    /// `sqrt(F) + sqrt(2 kappa) |C| z e^(i dphi)`.
    pub fn jump_factor(&self, z: f64) -> Complex64 {
        self.flux.sqrt() + Complex64::from_polar((2.0 * self.kappa).sqrt() * self.coupling * z, self.phase_difference)
    }

    /// Smallest count rate `m/t` that admits real eigenvalues, `F sin^2(dphi)`.
    pub fn rate_threshold(&self) -> f64 {
        self.flux * self.phase_difference.sin().powi(2)
    }
}

fn empirical_rate(count: u64, time: f64) -> Result<f64> {
    if !(time > 0.0 && time.is_finite()) {
        return Err(Error::InvalidParameter(format!("elapsed time {time} must be positive")));
    }
    Ok(count as f64 / time)
}

/// The eigenvalues `(z+, z-)` whose count rate equals `m/t`:
/// `z+- = (+-sqrt(m/t - F sin^2 dphi) - sqrt(F) cos dphi) / (sqrt(2 kappa) |C|)`.
pub fn eigenvalue_pair(cfg: &HomodyneConfig, count: u64, time: f64) -> Result<(f64, f64)> {
    cfg.validate()?;
    if cfg.coupling == 0.0 {
        return Err(Error::InvalidParameter("eigenvalues are undefined without coupling".into()));
    }
    let rate = empirical_rate(count, time)?;
    let threshold = cfg.rate_threshold();
    let mut gap = rate - threshold;
    if gap < 0.0 {
        if gap < -REGIME_SLACK * threshold.max(rate) {
            return Err(Error::InvalidRegime { rate, threshold });
        }
        gap = 0.0;
    }
    let scale = (2.0 * cfg.kappa).sqrt() * cfg.coupling;
    let offset = cfg.flux.sqrt() * cfg.phase_difference.cos();
    Ok(((gap.sqrt() - offset) / scale, (-gap.sqrt() - offset) / scale))
}

/// Eigenvalue and normalized complex amplitude of one component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HomodyneComponent {
    pub eigenvalue: f64,
    pub amplitude: Complex64,
}

/// `c+ g+^m e^(i phi t) |z+> + c- g-^m e^(-i phi t) |z->`, normalized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HomodyneConditionalState {
    pub plus: HomodyneComponent,
    pub minus: HomodyneComponent,
    pub count: u64,
    pub time: f64,
    /// `m (arg g+ - arg g-) + 2 phi t`, unwrapped.
    pub relative_phase: f64,
}

impl HomodyneConditionalState {
    /// `c+ c-*` divided by `|c+ c-|`.
    pub fn relative_factor(&self) -> Complex64 {
        let r = self.plus.amplitude * self.minus.amplitude.conj();
        r / r.norm()
    }

    pub fn purity(&self) -> f64 {
        let total = self.plus.amplitude.norm_sqr() + self.minus.amplitude.norm_sqr();
        total * total
    }
}

/// Phase added to `c+ / c-` by one detection.
pub fn phase_per_count(cfg: &HomodyneConfig, count: u64, time: f64) -> Result<f64> {
    let (zp, zm) = eigenvalue_pair(cfg, count, time)?;
    Ok(cfg.jump_factor(zp).arg() - cfg.jump_factor(zm).arg())
}

/// Conditioned two-component state after `count` detections in time `time`
/// from prior weights `(p+, p-)` on the eigenvalues selected by `m/t`.
pub fn conditional_state(
    cfg: &HomodyneConfig,
    prior: (f64, f64),
    count: u64,
    time: f64,
) -> Result<HomodyneConditionalState> {
    let (zp, zm) = eigenvalue_pair(cfg, count, time)?;
    let (pp, pm) = prior;
    if !(pp >= 0.0 && pm >= 0.0 && pp + pm > 0.0) {
        return Err(Error::InvalidParameter(format!("prior weights ({pp}, {pm})")));
    }
    let delta = phase_per_count(cfg, count, time)?;
    let relative_phase = count as f64 * delta + 2.0 * cfg.rotation * time;
    // both factors have modulus sqrt(m/t), so the counts leave the weights alone
    let norm = (pp + pm).sqrt();
    let half = 0.5 * relative_phase;
    let component = |z: f64, p: f64, phase: f64| HomodyneComponent {
        eigenvalue: z,
        amplitude: Complex64::from_polar(p.sqrt() / norm, phase),
    };
    Ok(HomodyneConditionalState {
        plus: component(zp, pp, half),
        minus: component(zm, pm, -half),
        count,
        time,
        relative_phase,
    })
}

/// Stochastic homodyne record over a prior given as `(z, weight)` pairs.
pub fn simulate_homodyne_trajectory(
    cfg: &HomodyneConfig,
    prior: &[(f64, f64)],
    duration: f64,
    seed: u64,
    stream: u64,
) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    let (zs, ws): (Vec<f64>, Vec<f64>) = prior.iter().copied().unzip();
    let mut state = ConditionalState::from_prior(&zs, &ws)?;
    let tau_rate = 2.0 * cfg.coupling * cfg.coupling * cfg.kappa;
    let channel = JumpChannel::new(zs.iter().map(|&z| cfg.jump_factor(z)).collect(), tau_rate);
    let detection_times = channel.run(&mut state, duration, &mut trajectory_rng(seed, stream))?;
    Ok(TrajectoryRecord {
        seed,
        stream,
        duration,
        detection_times,
        final_state: state,
    })
}

/// Ensemble of homodyne records, trajectory `i` on stream `i`.
pub fn simulate_homodyne_ensemble(
    cfg: &HomodyneConfig,
    prior: &[(f64, f64)],
    duration: f64,
    seed: u64,
    count: usize,
) -> Result<Vec<TrajectoryRecord>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| simulate_homodyne_trajectory(cfg, prior, duration, seed, i))
        .collect()
}

/// Two-component density matrix of a cat after unobserved losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RobustnessEntry {
    pub phase_difference: f64,
    pub miss_probability: f64,
    pub counts: u64,
    pub phase_per_count: f64,
    pub purity: f64,
    /// `|rho+-| / sqrt(rho++ rho--)`.
    pub coherence: f64,
    /// Closed-form `|1 - eta + eta e^(i delta)|^n`.
    pub expected_coherence: f64,
}

/// Mixes the conditioned cat over the counts the detector missed.
///
/// Each of the `counts` emitted photons escapes detection with probability
/// `miss_probability`. The observer corrects for the counts seen, so each
/// missed one leaves an unknown phase `delta` on `rho+-`. The density matrix
/// is averaged over `samples` thinned records; `prior` weighs `(z+, z-)`.
pub fn mix_over_misses(
    cfg: &HomodyneConfig,
    prior: (f64, f64),
    counts: u64,
    time: f64,
    miss_probability: f64,
    samples: usize,
    seed: u64,
) -> Result<RobustnessEntry> {
    if !(0.0..1.0).contains(&miss_probability) {
        return Err(Error::InvalidParameter(format!(
            "miss probability {miss_probability} outside [0, 1)"
        )));
    }
    if samples == 0 {
        return Err(Error::InvalidParameter("at least one sample is needed".into()));
    }
    let state = conditional_state(cfg, prior, counts, time)?;
    let delta = phase_per_count(cfg, counts, time)?;
    let (p, m) = (state.plus.amplitude.norm_sqr(), state.minus.amplitude.norm_sqr());
    // a fixed chunking keeps the reduction order independent of the thread count
    let chunk = 1024;
    let chunks = samples.div_ceil(chunk);
    let sum: Complex64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = trajectory_rng(seed, c as u64);
            let n = chunk.min(samples - c * chunk);
            (0..n)
                .map(|_| {
                    let missed = (0..counts).filter(|_| rng.random_bool(miss_probability)).count();
                    Complex64::from_polar(1.0, missed as f64 * delta)
                })
                .sum::<Complex64>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    let off = (p * m).sqrt() * sum / samples as f64;
    let purity = p * p + m * m + 2.0 * off.norm_sqr();
    let coherence = if p * m > 0.0 { off.norm() / (p * m).sqrt() } else { 0.0 };
    let eta = miss_probability;
    let expected = ((1.0 - eta) + eta * Complex64::from_polar(1.0, delta)).norm().powi(counts as i32);
    Ok(RobustnessEntry {
        phase_difference: cfg.phase_difference,
        miss_probability,
        counts,
        phase_per_count: delta,
        purity,
        coherence,
        expected_coherence: expected,
    })
}

/// Fragile (`dphi = 0`) versus robust (`dphi = pi/2`) schemes at the same
/// count record, for each miss probability.
pub fn robustness_compare(
    fragile: &HomodyneConfig,
    robust: &HomodyneConfig,
    counts: u64,
    time: f64,
    miss_probabilities: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Vec<(RobustnessEntry, RobustnessEntry)>> {
    miss_probabilities
        .iter()
        .map(|&eta| {
            Ok((
                mix_over_misses(fragile, (0.5, 0.5), counts, time, eta, samples, seed)?,
                mix_over_misses(robust, (0.5, 0.5), counts, time, eta, samples, seed)?,
            ))
        })
        .collect()
}

/// Two-component state after `count` detections by time `time`, as seen by a
/// detector that misses each photon with probability `miss_probability`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HomodyneSnapshot {
    pub count: u64,
    pub time: f64,
    pub weight_plus: f64,
    /// Unwrapped `m (arg g+ - arg g-) + 2 phi t`.
    pub relative_phase: f64,
    /// `|1 - eta + eta e^(i Delta)|^m`, one for an ideal detector.
    pub coherence: f64,
    pub purity: f64,
}

/// Closed-form state for fixed eigenvalues `prior = [(z+, w+), (z-, w-)]`.
pub fn snapshot(
    cfg: &HomodyneConfig,
    prior: [(f64, f64); 2],
    count: u64,
    time: f64,
    miss_probability: f64,
) -> Result<HomodyneSnapshot> {
    cfg.validate()?;
    if !(0.0..1.0).contains(&miss_probability) {
        return Err(Error::InvalidParameter(format!(
            "miss probability {miss_probability} outside [0, 1)"
        )));
    }
    let log_weight = |(z, w): (f64, f64)| {
        let g = cfg.jump_factor(z).norm_sqr();
        if w <= 0.0 || (g == 0.0 && count > 0) {
            f64::NEG_INFINITY
        } else if count == 0 {
            w.ln() - g * time
        } else {
            w.ln() + count as f64 * g.ln() - g * time
        }
    };
    let (lp, lm) = (log_weight(prior[0]), log_weight(prior[1]));
    let top = lp.max(lm);
    if top == f64::NEG_INFINITY {
        return Err(Error::InconsistentMeasurement(format!(
            "{count} detections impossible for eigenvalues {} and {}",
            prior[0].0, prior[1].0
        )));
    }
    let (ep, em) = ((lp - top).exp(), (lm - top).exp());
    let (p, q) = (ep / (ep + em), em / (ep + em));
    let delta = cfg.jump_factor(prior[0].0).arg() - cfg.jump_factor(prior[1].0).arg();
    let eta = miss_probability;
    let coherence = ((1.0 - eta) + eta * Complex64::from_polar(1.0, delta))
        .norm()
        .powi(count as i32);
    Ok(HomodyneSnapshot {
        count,
        time,
        weight_plus: p,
        relative_phase: count as f64 * delta + 2.0 * cfg.rotation * time,
        coherence,
        purity: p * p + q * q + 2.0 * p * q * coherence * coherence,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use proptest::prelude::*;

    use super::*;
    use crate::trajectories::{sample_trajectory_stream, summarize, Detection, MagnetizationDistribution};

    fn cfg(flux: f64, dphi: f64) -> HomodyneConfig {
        HomodyneConfig::new(flux, dphi, 1.0, 1.0)
    }

    #[test]
    fn closed_forms_at_the_two_special_phases() {
        let s = (1.0f64 / 2.0).sqrt();
        let (p, m) = eigenvalue_pair(&cfg(1.0, 0.0), 1, 1.0).unwrap();
        assert!(p.abs() < 1e-15 && (m + 2.0 * s).abs() < 1e-15);
        let (p, m) = eigenvalue_pair(&cfg(1.0, FRAC_PI_2), 1, 1.0).unwrap();
        assert!(p.abs() < 1e-15 && m.abs() < 1e-15);
        let (p, m) = eigenvalue_pair(&cfg(1.0, FRAC_PI_2), 2, 1.0).unwrap();
        assert!((p - s).abs() < 1e-12 && (m + s).abs() < 1e-12);
    }

    #[test]
    fn snapshot_matches_the_simulated_state() {
        let c = cfg(0.7, 0.4);
        let prior = [(0.9, 0.3), (-1.2, 0.7)];
        for stream in 0..20 {
            let rec = simulate_homodyne_trajectory(&c, &prior, 3.0, 11, stream).unwrap();
            let m = rec.detection_times.len() as u64;
            let snap = snapshot(&c, prior, m, 3.0, 0.0).unwrap();
            let w = rec.final_state.weights();
            assert!((w[0] - snap.weight_plus).abs() < 1e-10);
            let rel = (rec.final_state.amplitude(0) * rec.final_state.amplitude(1).conj()).arg();
            let diff = (rel - snap.relative_phase).rem_euclid(2.0 * PI);
            assert!(diff.min(2.0 * PI - diff) < 1e-9, "{rel} vs {}", snap.relative_phase);
            assert!((snap.purity - 1.0).abs() < 1e-12);
        }
        let lossy = snapshot(&c, prior, 12, 3.0, 0.5).unwrap();
        assert!(lossy.purity < 1.0 && lossy.coherence < 1.0);
    }

    #[test]
    fn regime_threshold_is_enforced() {
        let err = eigenvalue_pair(&cfg(1.0, FRAC_PI_2), 9, 10.0).unwrap_err();
        assert!(matches!(err, Error::InvalidRegime { .. }));
        assert!(err.is_numeric());
        assert!(eigenvalue_pair(&cfg(1.0, 0.0), 0, 1.0).is_ok());
        assert!(eigenvalue_pair(&cfg(1.0, 0.0), 1, 0.0).is_err());
    }

    #[test]
    fn fragile_phase_flips_every_count() {
        let c = cfg(1.0, 0.0);
        for m in 1..8 {
            let a = conditional_state(&c, (0.5, 0.5), m, m as f64 / 1.7).unwrap();
            let b = conditional_state(&c, (0.5, 0.5), m + 1, (m + 1) as f64 / 1.7).unwrap();
            let ratio = a.relative_factor() / b.relative_factor();
            assert!((ratio + 1.0).norm() < 1e-12);
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            assert!((a.relative_factor() - sign).norm() < 1e-12);
        }
    }

    #[test]
    fn robust_phase_accumulates_smoothly() {
        let c = cfg(1.0, FRAC_PI_2);
        for m in [1, 10, 100] {
            let s = conditional_state(&c, (0.5, 0.5), m, m as f64).unwrap();
            assert_eq!(s.relative_phase, 0.0);
        }
        let s = conditional_state(&c, (0.5, 0.5), 100, 100.0 / 1.01).unwrap();
        assert!((s.relative_phase - 200.0 * 0.1f64.atan()).abs() < 1e-9);
        assert!((s.relative_phase - 19.93).abs() < 0.01);
        assert!((s.purity() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_only_shifts_the_relative_phase() {
        let mut c = cfg(1.0, FRAC_PI_2);
        let a = conditional_state(&c, (0.3, 0.7), 5, 4.0).unwrap();
        c.rotation = 0.25;
        let b = conditional_state(&c, (0.3, 0.7), 5, 4.0).unwrap();
        assert!((b.relative_phase - a.relative_phase - 2.0).abs() < 1e-12);
        assert!((a.plus.amplitude.norm() - b.plus.amplitude.norm()).abs() < 1e-15);
    }

    #[test]
    fn stepwise_record_matches_the_conditional_state() {
        // prior on the pair selected by the final rate; jump times are arbitrary
        let c = cfg(1.3, 0.7);
        let (m, t) = (6u64, 2.5);
        let (zp, zm) = eigenvalue_pair(&c, m, t).unwrap();
        let channel = JumpChannel::new(vec![c.jump_factor(zp), c.jump_factor(zm)], 1.0);
        let mut state = ConditionalState::from_prior(&[zp, zm], &[0.4, 0.6]).unwrap();
        for dt in [0.1, 0.7, 0.05, 0.3, 0.9, 0.2] {
            channel.decay(&mut state, dt).unwrap();
            channel.jump(&mut state).unwrap();
        }
        let rest = t - state.time();
        channel.decay(&mut state, rest).unwrap();
        let exact = conditional_state(&c, (0.4, 0.6), m, t).unwrap();
        assert!((state.components()[0].weight - exact.plus.amplitude.norm_sqr()).abs() < 1e-8);
        let simulated = state.amplitude(0) * state.amplitude(1).conj();
        let expected = exact.plus.amplitude * exact.minus.amplitude.conj();
        assert!((simulated - expected).norm() < 1e-8);
    }

    #[test]
    fn without_local_oscillator_it_is_direct_detection() {
        let det = Detection {
            coupling: 0.5,
            kappa: 1.0,
        };
        let prior = MagnetizationDistribution::flat(-3, 3).unwrap();
        let pairs: Vec<(f64, f64)> = prior.iter().map(|(z, p)| (z as f64, p)).collect();
        let c = HomodyneConfig::new(0.0, 0.3, 1.0, 0.5);
        for stream in 0..5 {
            let direct = sample_trajectory_stream(&prior, &det, 10.0, 9, stream).unwrap();
            let homodyne = simulate_homodyne_trajectory(&c, &pairs, 10.0, 9, stream).unwrap();
            assert_eq!(direct.detection_times, homodyne.detection_times);
            for (a, b) in direct.final_state.weights().iter().zip(homodyne.final_state.weights()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn uncoupled_atoms_see_the_oscillator_flux() {
        let c = HomodyneConfig::new(2.0, 0.0, 1.0, 0.0);
        let recs = simulate_homodyne_ensemble(&c, &[(1.0, 0.5), (-1.0, 0.5)], 3.0, 4, 4000).unwrap();
        let mean = summarize(&recs).mean_count;
        let sigma = (6.0 / 4000.0f64).sqrt();
        assert!((mean - 6.0).abs() < 3.0 * sigma);
        let again = simulate_homodyne_ensemble(&c, &[(1.0, 0.5), (-1.0, 0.5)], 3.0, 4, 4000).unwrap();
        assert_eq!(recs, again);
    }

    #[test]
    fn missed_counts_decohere_the_fragile_cat_only() {
        let fragile = cfg(1.0, 0.0);
        let robust = cfg(1.0, FRAC_PI_2);
        let t = 10.0 / 1.0025;
        let table = robustness_compare(&fragile, &robust, 10, t, &[0.0, 0.1, 0.5], 10_000, 3).unwrap();
        let (f0, r0) = table[0];
        assert!((f0.purity - 1.0).abs() < 1e-12 && (r0.purity - 1.0).abs() < 1e-12);
        let (f, r) = table[2];
        assert!((f.phase_per_count.abs() - PI).abs() < 1e-12);
        assert!(r.phase_per_count <= 0.1);
        assert!(f.coherence < 0.05);
        assert!(r.coherence > 0.9);
        assert!(table[1].1.coherence > 0.9);
        for (f, r) in &table {
            assert!(r.coherence >= f.coherence);
            assert!((r.coherence - r.expected_coherence).abs() < 0.01);
        }
    }

    proptest! {
        #[test]
        fn returned_eigenvalues_reproduce_the_count_rate(
            flux in 0.01f64..5.0,
            dphi in -PI..PI,
            kappa in 0.1f64..3.0,
            coupling in 0.1f64..3.0,
            excess in 0.0f64..4.0,
            time in 0.5f64..50.0,
        ) {
            let c = HomodyneConfig::new(flux, dphi, kappa, coupling);
            let rate = c.rate_threshold() + excess;
            let count = (rate * time).ceil() as u64;
            let (zp, zm) = eigenvalue_pair(&c, count, time).unwrap();
            let r = count as f64 / time;
            prop_assert!((c.jump_factor(zp).norm_sqr() - r).abs() < 1e-10 * r.max(1.0));
            prop_assert!((c.jump_factor(zm).norm_sqr() - r).abs() < 1e-10 * r.max(1.0));
            let s = conditional_state(&c, (0.5, 0.5), count, time).unwrap();
            let rho = s.plus.amplitude * s.minus.amplitude.conj();
            prop_assert!(rho.norm() <= (s.plus.amplitude.norm_sqr() * s.minus.amplitude.norm_sqr()).sqrt() + 1e-15);
        }

        #[test]
        fn general_formula_reduces_at_quarter_phase(flux in 0.01f64..5.0, excess in 0.0f64..4.0, time in 0.5f64..20.0) {
            let c = HomodyneConfig::new(flux, FRAC_PI_2, 0.7, 1.4);
            let count = ((flux + excess) * time).ceil() as u64;
            let (zp, zm) = eigenvalue_pair(&c, count, time).unwrap();
            let z = ((count as f64 / time - flux) / (2.0 * 0.7 * 1.4 * 1.4)).sqrt();
            // cos(pi/2) is not exactly zero in floating point
            prop_assert!((zp - z).abs() < 1e-12 && (zm + z).abs() < 1e-12);
        }
    }
}
