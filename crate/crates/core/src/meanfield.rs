//! Bosons in a quantum optical lattice at the single-site mean-field level.
//!
//! Energies are in units of `U`. Homogeneous scattering into one cavity mode
//! adds `g_eff D+D = (alpha_D / 2) J_D^2 N^2` with `N` the illuminated atom
//! number; in these units that term is `alpha_D N^2`, and over `K` sites it
//! gives the density slope `gamma_D = 1 / (2 K alpha_D)`.
//!
//! Decoupling `N^2 -> 2 <N> N - <N>^2` per site gives the single-site
//! Hamiltonian
//!
//! ```text
//! h = n (n - 1) / 2 - (mu - rho / gamma_D) n - rho^2 / (2 gamma_D)
//!     - 2 t0 psi (b + b+) + 2 t0 psi^2
//! ```
//!
//! with `rho = <n>` and `psi = <b>` fixed self-consistently (two neighbours per
//! site). At `t0 = 0` the Fock levels `m` and `m + 1` become degenerate
//! exactly when `mu - rho / gamma_D = m`, which pins `rho = gamma_D (mu - m)`
//! between the Mott plateaus: a superfluid supported on two Fock levels.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;

/// `psi` below this counts as zero when labelling phases and drawing boundaries.
pub const PSI_THRESHOLD: f64 = 1e-9;
const DAMPING: f64 = 0.5;
const TOLERANCE: f64 = 1e-10;
const MAX_ITERATIONS: usize = 10_000;
/// Neighbours per site of the chain.
const COORDINATION: f64 = 2.0;

/// A point of the quantum-optical-lattice phase diagram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumLatticeParams {
    /// `mu / U`.
    pub mu: f64,
    /// Effective light strength `alpha_D` in units of `U`.
    pub alpha_d: f64,
    /// Illuminated sites `K`.
    pub sites: usize,
    /// Largest on-site occupation.
    pub n_max: usize,
    /// `t0 / U`.
    pub hopping: f64,
}

impl QuantumLatticeParams {
    pub fn new(mu: f64, alpha_d: f64, sites: usize) -> Self {
        Self {
            mu,
            alpha_d,
            sites,
            n_max: 5,
            hopping: 0.0,
        }
    }

    /// Parameters with `alpha_D` chosen so that the slope is `gamma`.
    pub fn from_gamma(mu: f64, gamma: f64, sites: usize) -> Self {
        Self::new(mu, 1.0 / (2.0 * sites as f64 * gamma), sites)
    }

    pub fn with_n_max(mut self, n_max: usize) -> Self {
        self.n_max = n_max;
        self
    }

    pub fn with_hopping(mut self, hopping: f64) -> Self {
        self.hopping = hopping;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |what: String| Err(Error::InvalidParameter(what));
        if self.sites == 0 {
            return fail("at least one illuminated site is needed".into());
        }
        if self.n_max == 0 {
            return fail("n_max must be at least 1".into());
        }
        if !(self.alpha_d.is_finite() && self.alpha_d >= 0.0) {
            return fail(format!("alpha_D = {} must be >= 0", self.alpha_d));
        }
        if !(self.hopping.is_finite() && self.hopping >= 0.0) {
            return fail(format!("t0/U = {} must be >= 0", self.hopping));
        }
        if !self.mu.is_finite() {
            return fail(format!("mu/U = {}", self.mu));
        }
        Ok(())
    }

    /// `gamma_D = 1 / (2 K alpha_D)`; infinite without light.
    pub fn gamma(&self) -> f64 {
        1.0 / (2.0 * self.sites as f64 * self.alpha_d)
    }

    /// `1 / gamma_D`, zero without light.
    fn inverse_gamma(&self) -> f64 {
        2.0 * self.sites as f64 * self.alpha_d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Phase {
    Vacuum,
    /// Integer density `filling`, `psi = 0`.
    Mott { filling: usize },
    /// Density between `lower` and `lower + 1`, supported on those two levels at `t0 = 0`.
    Superfluid { lower: usize },
}

impl Phase {
    pub fn label(&self) -> String {
        match self {
            Phase::Vacuum => "vacuum".into(),
            Phase::Mott { filling } => format!("mott-{filling}"),
            Phase::Superfluid { lower } => format!("sf-{lower}"),
        }
    }

    pub fn is_superfluid(&self) -> bool {
        matches!(self, Phase::Superfluid { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanFieldSolution {
    pub mu: f64,
    pub alpha_d: f64,
    /// Order parameter `<b>`, gauge-fixed real and nonnegative.
    pub psi: f64,
    pub rho: f64,
    /// On-site number variance.
    pub delta_n: f64,
    /// Energy per site.
    pub energy: f64,
    pub phase: Phase,
    pub iterations: usize,
    pub residual: f64,
    /// Fock amplitudes of the single-site state.
    #[serde(skip)]
    pub amplitudes: Vec<f64>,
}

/// Superfluid window of the lower level `m`: `m (1/gamma + 1) <= mu <= (m + 1)/gamma + m`.
pub fn superfluid_window(m: usize, gamma: f64) -> (f64, f64) {
    let (m, inv) = (m as f64, 1.0 / gamma);
    (m * (inv + 1.0), (m + 1.0) * inv + m)
}

/// Mott window of filling `m + 1`: `(m + 1)/gamma + m <= mu <= (m + 1)(1/gamma + 1)`.
pub fn mott_window(m: usize, gamma: f64) -> (f64, f64) {
    let (m, inv) = (m as f64, 1.0 / gamma);
    ((m + 1.0) * inv + m, (m + 1.0) * (inv + 1.0))
}

/// Two-level state `sqrt(1 - f) |m> + sqrt(f) |m + 1>` with density `rho`.
fn minimal_fluctuation_state(rho: f64, n_max: usize) -> Vec<f64> {
    let m = (rho.floor() as usize).min(n_max);
    let f = rho - m as f64;
    let mut amps = vec![0.0; n_max + 1];
    amps[m] = (1.0 - f).sqrt();
    if f > 0.0 {
        amps[m + 1] = f.sqrt();
    }
    amps
}

struct Moments {
    psi: f64,
    rho: f64,
    delta_n: f64,
    interaction: f64,
}

fn moments(amps: &[f64]) -> Moments {
    let mut psi = 0.0;
    let (mut rho, mut second, mut interaction) = (0.0, 0.0, 0.0);
    for (n, &a) in amps.iter().enumerate() {
        let (nf, p) = (n as f64, a * a);
        rho += p * nf;
        second += p * nf * nf;
        interaction += p * 0.5 * nf * (nf - 1.0);
        if n > 0 {
            psi += nf.sqrt() * amps[n - 1] * a;
        }
    }
    Moments {
        psi: psi.abs(),
        rho,
        delta_n: (second - rho * rho).max(0.0),
        interaction,
    }
}

fn label(psi: f64, rho: f64) -> Phase {
    if psi > PSI_THRESHOLD {
        Phase::Superfluid {
            lower: rho.floor() as usize,
        }
    } else if rho.round() == 0.0 {
        Phase::Vacuum
    } else {
        Phase::Mott {
            filling: rho.round() as usize,
        }
    }
}

/// Energy per site `<n(n-1)/2> - mu rho + rho^2 / (2 gamma) + 2 t0 psi^2 - 4 t0 psi <b>`.
fn site_energy(params: &QuantumLatticeParams, m: &Moments) -> f64 {
    m.interaction - params.mu * m.rho + 0.5 * params.inverse_gamma() * m.rho * m.rho
        - 2.0 * COORDINATION * params.hopping * m.psi * m.psi
        + COORDINATION * params.hopping * m.psi * m.psi
}

fn solution(params: &QuantumLatticeParams, amplitudes: Vec<f64>, iterations: usize, residual: f64) -> MeanFieldSolution {
    let m = moments(&amplitudes);
    MeanFieldSolution {
        mu: params.mu,
        alpha_d: params.alpha_d,
        psi: m.psi,
        rho: m.rho,
        delta_n: m.delta_n,
        energy: site_energy(params, &m),
        phase: label(m.psi, m.rho),
        iterations,
        residual,
        amplitudes,
    }
}

/// Closed-form minimal-fluctuation solution at `t0 = 0`.
///
/// `rho = gamma (mu - m)`, `psi = sqrt((m + 1)(rho - m)(1 - rho + m))` and
/// `delta_n = (rho - m)(1 - rho + m)` in a superfluid window, `rho = m + 1`
/// with `psi = 0` in a Mott window. Negative `mu` gives the vacuum; densities
/// saturate at `n_max`.
pub fn analytic_solution(params: &QuantumLatticeParams) -> Result<MeanFieldSolution> {
    params.validate()?;
    let mu = params.mu;
    let cap = params.n_max as f64;
    let rho = if mu <= 0.0 {
        0.0
    } else if params.alpha_d == 0.0 {
        // plain atomic limit: the lower filling on the degenerate points mu = m
        mu.ceil().min(cap)
    } else {
        let inv = params.inverse_gamma();
        let period = inv + 1.0;
        let m = (mu / period).floor();
        let rho = if mu - m * period <= inv {
            pinned_density(params, m as usize)
        } else {
            m + 1.0
        };
        rho.min(cap)
    };
    Ok(solution(params, minimal_fluctuation_state(rho, params.n_max), 0, 0.0))
}

/// Density at which levels `m` and `m + 1` are degenerate, `gamma (mu - m)`.
/// Rounding within `1e-12` of a plateau snaps onto it so that `psi`, which
/// grows like the square root of the distance, does not amplify it.
fn pinned_density(params: &QuantumLatticeParams, m: usize) -> f64 {
    let m_f = m as f64;
    let f = (params.mu - m_f) / params.inverse_gamma() - m_f;
    let f = if f < 1e-12 {
        0.0
    } else if f > 1.0 - 1e-12 {
        1.0
    } else {
        f
    };
    m_f + f
}

/// Fock-level energy `E_st(rho, n) = n(n - 1)/2 - n x - rho^2 / (2 gamma)`,
/// `x = mu - rho / gamma`, in the field set by the density `rho`.
pub fn onsite_energy(params: &QuantumLatticeParams, rho: f64, n: usize) -> f64 {
    let inv = params.inverse_gamma();
    let x = params.mu - rho * inv;
    let n = n as f64;
    0.5 * n * (n - 1.0) - n * x - 0.5 * rho * rho * inv
}

/// `E_st` averaged over the two-level state of density `rho`; this is the
/// variational energy and is convex in `rho`.
pub fn minimal_fluctuation_energy(params: &QuantumLatticeParams, rho: f64) -> f64 {
    minimal_fluctuation_state(rho, params.n_max)
        .iter()
        .enumerate()
        .map(|(n, a)| a * a * onsite_energy(params, rho, n))
        .sum()
}

/// Lowest Fock level of the decoupled `t0 = 0` Hamiltonian; ties go to the smaller level.
fn lowest_level(params: &QuantumLatticeParams, rho: f64) -> usize {
    (0..=params.n_max)
        .min_by(|&a, &b| onsite_energy(params, rho, a).total_cmp(&onsite_energy(params, rho, b)))
        .expect("n_max >= 1")
}

/// Self-consistent single-site solution of the decoupled Hamiltonian.
///
/// At `t0 = 0` the map `rho -> <n>` is a step function, so the fixed point is
/// bracketed on the monotone residual `rho - <n>(rho)` instead of iterated;
/// a root on a step resolves the degenerate pair `{m, m+1}` with the state of
/// largest `psi`. With hopping the damped iteration is used.
pub fn selfconsistent_solve(params: &QuantumLatticeParams) -> Result<MeanFieldSolution> {
    params.validate()?;
    if params.hopping == 0.0 {
        bracket_atomic_limit(params)
    } else {
        damped_iteration(params)
    }
}

fn bracket_atomic_limit(params: &QuantumLatticeParams) -> Result<MeanFieldSolution> {
    let residual = |rho: f64| rho - lowest_level(params, rho) as f64;
    let (mut lo, mut hi) = (0.0, params.n_max as f64);
    if residual(lo) >= 0.0 {
        return Ok(solution(params, minimal_fluctuation_state(0.0, params.n_max), 0, 0.0));
    }
    let mut iterations = 0;
    while hi - lo > 1e-15 * hi.max(1.0) && iterations < 200 {
        let mid = 0.5 * (lo + hi);
        if residual(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let (upper, lower) = (lowest_level(params, lo), lowest_level(params, hi));
    let rho = if upper == lower {
        upper as f64
    } else {
        pinned_density(params, lower)
    };
    let sol = solution(params, minimal_fluctuation_state(rho, params.n_max), iterations, 0.0);
    Ok(MeanFieldSolution {
        residual: (hi - lo).abs(),
        ..sol
    })
}

fn damped_iteration(params: &QuantumLatticeParams) -> Result<MeanFieldSolution> {
    let dim = params.n_max + 1;
    let inv = params.inverse_gamma();
    let t = COORDINATION * params.hopping;
    let (mut psi, mut rho) = (0.1, params.mu.clamp(0.0, params.n_max as f64));
    let mut residual = f64::INFINITY;
    for iteration in 1..=MAX_ITERATIONS {
        let x = params.mu - rho * inv;
        let (_, vectors) = symmetric_eigen(dim, |i, j| {
            if i == j {
                let n = i as f64;
                0.5 * n * (n - 1.0) - x * n
            } else if i == j + 1 || j == i + 1 {
                -t * psi * (i.max(j) as f64).sqrt()
            } else {
                0.0
            }
        })?;
        let amps: Vec<f64> = (0..dim).map(|n| vectors[(n, 0)]).collect();
        let m = moments(&amps);
        residual = (m.psi - psi).abs().max((m.rho - rho).abs());
        psi = (1.0 - DAMPING) * psi + DAMPING * m.psi;
        rho = (1.0 - DAMPING) * rho + DAMPING * m.rho;
        if residual < TOLERANCE {
            return Ok(solution(params, amps, iteration, residual));
        }
    }
    Err(Error::NoConvergence {
        solver: "mean-field iteration",
        iterations: MAX_ITERATIONS,
        residual,
    })
}

/// Ground state of the `t0 = 0` lattice of `K` illuminated sites at one `mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdPoint {
    pub mu: f64,
    pub particles: usize,
    pub rho: f64,
    pub energy: f64,
}

/// Exact ground states of `sum_i n_i(n_i - 1)/2 - mu N + alpha_D N^2` over `K`
/// sites with at most `n_max` atoms each.
///
/// The light term depends only on `N`, and for fixed `N` the on-site energy is
/// minimized by the most even partition, so the search runs over `N` alone.
pub fn atomic_limit_ed(alpha_d: f64, sites: usize, n_max: usize, mu: &[f64]) -> Result<Vec<EdPoint>> {
    QuantumLatticeParams::new(0.0, alpha_d, sites).with_n_max(n_max).validate()?;
    let energies: Vec<f64> = (0..=sites * n_max)
        .map(|n| {
            let (q, r) = (n / sites, n % sites);
            let pair = |k: usize| 0.5 * k as f64 * (k as f64 - 1.0);
            (sites - r) as f64 * pair(q) + r as f64 * pair(q + 1) + alpha_d * (n * n) as f64
        })
        .collect();
    Ok(mu
        .par_iter()
        .map(|&mu| {
            let (particles, energy) = energies
                .iter()
                .enumerate()
                .map(|(n, e)| (n, e - mu * n as f64))
                .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
            EdPoint {
                mu,
                particles,
                rho: particles as f64 / sites as f64,
                energy,
            }
        })
        .collect())
}

/// Number of density increases along a scan.
pub fn count_steps(points: &[EdPoint]) -> usize {
    points.windows(2).filter(|w| w[1].particles > w[0].particles).count()
}

/// Solution route for [`phase_diagram`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    Analytic,
    SelfConsistent,
}

/// Solutions over `alpha_D x mu` grids, `alpha`-major.
pub fn phase_diagram(
    mu: &[f64],
    alpha: &[f64],
    sites: usize,
    n_max: usize,
    hopping: f64,
    route: Route,
) -> Result<Vec<MeanFieldSolution>> {
    let points: Vec<QuantumLatticeParams> = alpha
        .iter()
        .flat_map(|&a| {
            mu.iter().map(move |&m| {
                QuantumLatticeParams::new(m, a, sites)
                    .with_n_max(n_max)
                    .with_hopping(hopping)
            })
        })
        .collect();
    points
        .par_iter()
        .map(|p| match route {
            Route::Analytic => analytic_solution(p),
            Route::SelfConsistent => selfconsistent_solve(p),
        })
        .collect()
}

/// `(alpha_D, mu)` midpoints where `psi` crosses [`PSI_THRESHOLD`] between
/// neighbouring points of a row of `solutions` (as produced by [`phase_diagram`]).
pub fn phase_boundaries(solutions: &[MeanFieldSolution], row: usize) -> Vec<(f64, f64)> {
    solutions
        .chunks(row)
        .flat_map(|r| {
            r.windows(2)
                .filter(|w| (w[0].psi > PSI_THRESHOLD) != (w[1].psi > PSI_THRESHOLD))
                .map(|w| (w[0].alpha_d, 0.5 * (w[0].mu + w[1].mu)))
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Fraction of a row of solutions in a Mott phase.
pub fn mott_fraction(row: &[MeanFieldSolution]) -> f64 {
    row.iter().filter(|s| matches!(s.phase, Phase::Mott { .. })).count() as f64 / row.len().max(1) as f64
}

/// `points` values evenly spaced over `[lo, hi]`.
pub fn linear_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points).map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64).collect(),
    }
}

/// `points` values evenly spaced in logarithm over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    linear_grid(lo.ln(), hi.ln(), points).into_iter().map(f64::exp).collect()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn windows_tile_the_axis() {
        for gamma in [0.3, 1.0, 2.0, 7.5] {
            for m in 0..5 {
                let sf = superfluid_window(m, gamma);
                let mott = mott_window(m, gamma);
                let next = superfluid_window(m + 1, gamma);
                assert!((sf.1 - mott.0).abs() < 1e-12);
                assert!((mott.1 - next.0).abs() < 1e-12);
                assert!(sf.0 < sf.1 && mott.0 < mott.1);
            }
            assert_eq!(superfluid_window(0, gamma).0, 0.0);
        }
    }

    #[test]
    fn analytic_values() {
        let sf = analytic_solution(&QuantumLatticeParams::from_gamma(0.25, 2.0, 1)).unwrap();
        assert!((sf.rho - 0.5).abs() < 1e-12 && (sf.psi - 0.5).abs() < 1e-12 && (sf.delta_n - 0.25).abs() < 1e-12);
        assert_eq!(sf.phase, Phase::Superfluid { lower: 0 });
        let (lo, hi) = mott_window(1, 2.0);
        let mott = analytic_solution(&QuantumLatticeParams::from_gamma(0.5 * (lo + hi), 2.0, 1)).unwrap();
        assert_eq!((mott.psi, mott.rho, mott.delta_n), (0.0, 2.0, 0.0));
        assert_eq!(mott.phase, Phase::Mott { filling: 2 });
        let vac = analytic_solution(&QuantumLatticeParams::from_gamma(-0.3, 2.0, 1)).unwrap();
        assert_eq!(vac.phase, Phase::Vacuum);
        assert_eq!(vac.rho, 0.0);
    }

    #[test]
    fn density_saturates_at_n_max() {
        let p = QuantumLatticeParams::from_gamma(40.0, 2.0, 1).with_n_max(3);
        assert_eq!(analytic_solution(&p).unwrap().rho, 3.0);
        assert_eq!(selfconsistent_solve(&p).unwrap().rho, 3.0);
        assert!(analytic_solution(&p.with_n_max(0)).is_err());
    }

    #[test]
    fn onsite_energy_examples() {
        let p = QuantumLatticeParams::from_gamma(0.0, 2.0, 1);
        assert_eq!(onsite_energy(&p, 0.0, 1), 0.0);
        // without light the density term drops out
        let dark = QuantumLatticeParams::new(0.7, 0.0, 4);
        assert_eq!(onsite_energy(&dark, 1.3, 2), 1.0 - 2.0 * 0.7);
    }

    #[test]
    fn analytic_density_minimizes_the_variational_energy() {
        for (mu, gamma) in [(0.25, 2.0), (1.4, 0.7), (2.5, 5.0)] {
            let p = QuantumLatticeParams::from_gamma(mu, gamma, 1);
            let sol = analytic_solution(&p).unwrap();
            assert!(sol.phase.is_superfluid());
            let lower = sol.rho.floor();
            let best = (0..=1_000_000)
                .map(|k| lower + k as f64 * 1e-6)
                .filter(|&r| r < lower + 1.0)
                .map(|r| (r, minimal_fluctuation_energy(&p, r)))
                .fold((0.0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
            assert!((best.0 - sol.rho).abs() < 2e-6, "{mu} {gamma}: {} vs {}", best.0, sol.rho);
            assert!((minimal_fluctuation_energy(&p, sol.rho) - sol.energy).abs() < 1e-12);
        }
    }

    #[test]
    fn dark_lattice_is_the_plain_atomic_limit() {
        for (mu, rho) in [(0.5, 1.0), (1.2, 2.0), (2.999, 3.0), (3.0, 3.0), (3.001, 4.0)] {
            let p = QuantumLatticeParams::new(mu, 0.0, 10);
            let a = analytic_solution(&p).unwrap();
            let s = selfconsistent_solve(&p).unwrap();
            assert_eq!((a.rho, s.rho), (rho, rho), "mu = {mu}");
            assert_eq!(a.psi, 0.0);
        }
        let ed = atomic_limit_ed(0.0, 3, 5, &linear_grid(0.01, 2.99, 299)).unwrap();
        assert_eq!(count_steps(&ed), 2);
    }

    #[test]
    fn selfconsistent_matches_analytic() {
        for gamma in [0.5, 2.0, 10.0] {
            for mu in linear_grid(-0.5, 3.0, 351) {
                let p = QuantumLatticeParams::from_gamma(mu, gamma, 3);
                let a = analytic_solution(&p).unwrap();
                let s = selfconsistent_solve(&p).unwrap();
                assert!((a.rho - s.rho).abs() < 1e-8 && (a.psi - s.psi).abs() < 1e-8, "gamma {gamma} mu {mu}");
                if s.phase.is_superfluid() {
                    let support = s.amplitudes.iter().filter(|a| a.abs() > 1e-8).count();
                    assert_eq!(support, 2);
                }
            }
        }
        let p = QuantumLatticeParams::from_gamma(0.25, 2.0, 1);
        let s = selfconsistent_solve(&p).unwrap();
        assert!((s.rho - 0.5).abs() < 1e-12 && (s.psi - 0.5).abs() < 1e-12);
    }

    #[test]
    fn psi_vanishes_continuously_at_the_boundaries() {
        let gamma = 2.0;
        let (_, edge) = superfluid_window(1, gamma);
        let near = analytic_solution(&QuantumLatticeParams::from_gamma(edge - 1e-3, gamma, 1)).unwrap();
        assert!(near.psi < 0.1);
        let scan: Vec<f64> = linear_grid(0.0, 3.0, 3001)
            .iter()
            .map(|&mu| selfconsistent_solve(&QuantumLatticeParams::from_gamma(mu, gamma, 1)).unwrap().psi)
            .collect();
        let max_jump = scan.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        assert!(max_jump < 0.1);
    }

    #[test]
    fn hopping_melts_the_mott_plateau() {
        let deep = selfconsistent_solve(&QuantumLatticeParams::new(0.5, 0.0, 1).with_hopping(0.01)).unwrap();
        assert!(deep.psi < 1e-6 && (deep.rho - 1.0).abs() < 1e-6);
        let shallow = selfconsistent_solve(&QuantumLatticeParams::new(0.5, 0.0, 1).with_hopping(0.2)).unwrap();
        assert!(shallow.psi > 0.1);
        assert!(shallow.iterations > 1);
    }

    #[test]
    fn ed_staircase_has_k_steps_per_window() {
        // gamma = 1 at K = 4
        let alpha = 1.0 / 8.0;
        let (lo, hi) = superfluid_window(1, 1.0);
        let mu = linear_grid(lo - 0.2, hi + 0.2, 4001);
        let ed = atomic_limit_ed(alpha, 4, 5, &mu).unwrap();
        assert_eq!(count_steps(&ed), 4);
        // brute force over all 6^4 configurations
        for point in ed.iter().step_by(97) {
            let mut best = (f64::INFINITY, 0);
            for code in 0..6usize.pow(4) {
                let occ: Vec<usize> = (0..4).map(|i| code / 6usize.pow(i) % 6).collect();
                let n: usize = occ.iter().sum();
                let e = occ.iter().map(|&k| 0.5 * k as f64 * (k as f64 - 1.0)).sum::<f64>() - point.mu * n as f64
                    + alpha * (n * n) as f64;
                if e < best.0 - 1e-12 {
                    best = (e, n);
                }
            }
            assert_eq!(best.1, point.particles, "mu = {}", point.mu);
            assert!((best.0 - point.energy).abs() < 1e-9);
        }
    }

    #[test]
    fn boundaries_follow_the_window_formulas() {
        let mu = linear_grid(0.0, 3.0, 601);
        let step = 0.005;
        for alpha in [0.05, 0.2, 1.0] {
            let gamma = QuantumLatticeParams::new(0.0, alpha, 1).gamma();
            let sols = phase_diagram(&mu, &[alpha], 1, 5, 0.0, Route::Analytic).unwrap();
            let found = phase_boundaries(&sols, mu.len());
            let mut expected = vec![0.0];
            for m in 0..5 {
                for edge in [superfluid_window(m, gamma).1, mott_window(m, gamma).1] {
                    if edge < 3.0 - step {
                        expected.push(edge);
                    }
                }
            }
            assert_eq!(found.len(), expected.len(), "alpha {alpha}");
            for ((_, f), e) in found.iter().zip(&expected) {
                assert!((f - e).abs() <= step);
            }
        }
    }

    #[test]
    fn light_suppresses_mott_regions() {
        let mu = linear_grid(0.0, 3.0, 601);
        let alpha = log_grid(1e-3, 10.0, 15);
        let sols = phase_diagram(&mu, &alpha, 1, 5, 0.0, Route::SelfConsistent).unwrap();
        let fractions: Vec<f64> = sols.chunks(mu.len()).map(mott_fraction).collect();
        assert!(fractions.windows(2).all(|w| w[1] <= w[0]));
        assert!(fractions[0] > 0.9 && *fractions.last().unwrap() == 0.0);
        // the lobe width itself stays one unit of U
        for alpha in &alpha {
            let gamma = QuantumLatticeParams::new(0.0, *alpha, 1).gamma();
            let (lo, hi) = mott_window(1, gamma);
            assert!((hi - lo - 1.0).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn density_is_monotone_in_mu(gamma in 0.1f64..20.0, start in -0.5f64..3.0) {
            let mut last = -1.0;
            for k in 0..200 {
                let mu = start + 0.01 * k as f64;
                let s = selfconsistent_solve(&QuantumLatticeParams::from_gamma(mu, gamma, 2)).unwrap();
                prop_assert!(s.rho >= last);
                prop_assert!(s.delta_n >= 0.0 && s.psi >= 0.0);
                last = s.rho;
            }
        }
    }
}
