//! The five subcommands: read parameters, validate them all, then compute.

use std::sync::Arc;

use lightlattice::entanglement::{
    gaussian_entropy, light_matter_entropy, shannon_entropy, squeeze_distribution, CountDistribution, EntropyMode,
    LightMatterSuperposition, LogBase,
};
use lightlattice::homodyne::{
    conditional_state, eigenvalue_pair, mix_over_misses, phase_per_count, simulate_homodyne_ensemble, snapshot,
    HomodyneConfig,
};
use lightlattice::lattice::{build_hamiltonian, ground_space, Boundary, FockBasis, GroundSpace, LatticeSpec, Method};
use lightlattice::meanfield::{linear_grid, log_grid, mott_fraction, phase_boundaries, phase_diagram, Route};
use lightlattice::scattering::{angle_grid, angular_scan, integrated_quantum_addition, Channel};
use lightlattice::trajectories::{
    conditional_distribution, initial_distribution, sample_ensemble, summarize, Detection, Illumination,
    MagnetizationDistribution, TrajectoryRecord,
};
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::config::Config;
use crate::emit::{Cell, Table};
use crate::error::CliError;

/// Tables keyed by file stem plus the deterministic summary.
pub struct RunOutput {
    pub tables: Vec<(&'static str, Table)>,
    pub summary: Value,
}

struct Hubbard {
    spec: LatticeSpec,
    hopping: f64,
    interaction: f64,
}

fn lattice(cfg: &Config) -> Result<Hubbard, CliError> {
    const S: &str = "lattice";
    let sites = cfg.get_or(S, "sites", 8usize)?;
    let statistics = cfg.choice(S, "statistics", &["fermions", "bosons"])?;
    let mut spec = if statistics == "fermions" {
        cfg.forbid(S, &["particles", "n_max"], "by fermions")?;
        LatticeSpec::fermions(sites, cfg.get_or(S, "up", sites / 2)?, cfg.get_or(S, "down", sites / 2)?)
    } else {
        cfg.forbid(S, &["up", "down"], "by bosons")?;
        let n_max = cfg.get_or(S, "n_max", 5usize)?;
        cfg.ensure(n_max >= 1, S, "n_max", "must be at least 1")?;
        LatticeSpec::bosons(sites, cfg.get_or(S, "particles", sites)?, n_max)
    };
    if cfg.choice(S, "boundary", &["periodic", "open"])? == "open" {
        spec = spec.with_boundary(Boundary::Open);
    }
    cfg.ensure(sites >= 1, S, "sites", "must be at least 1")?;
    spec.validate()?;
    Ok(Hubbard {
        spec,
        hopping: cfg.get_or(S, "hopping", 1.0)?,
        interaction: cfg.get_or(S, "interaction", 0.0)?,
    })
}

fn solve(h: &Hubbard, method: Method) -> Result<GroundSpace, CliError> {
    let basis = Arc::new(FockBasis::new(h.spec)?);
    let hamiltonian = build_hamiltonian(&basis, h.hopping, h.interaction)?;
    Ok(ground_space(&hamiltonian, method)?)
}

fn method(cfg: &Config, section: &str) -> Result<Method, CliError> {
    Ok(match cfg.choice(section, "method", &["auto", "dense", "lanczos", "imaginary-time"])? {
        "dense" => Method::Dense,
        "lanczos" => Method::Lanczos,
        "imaginary-time" => Method::ImaginaryTime,
        _ => Method::Auto,
    })
}

fn positive(cfg: &Config, section: &str, key: &str, default: f64) -> Result<f64, CliError> {
    let x = cfg.get_or(section, key, default)?;
    cfg.ensure(x > 0.0, section, key, "must be positive")?;
    Ok(x)
}

fn seed(seed: Option<u64>, subcommand: &str) -> Result<u64, CliError> {
    seed.ok_or_else(|| CliError::Config(format!("`{subcommand}` is stochastic and needs --seed or run.seed")))
}

pub fn scatter(cfg: &Config) -> Result<RunOutput, CliError> {
    const S: &str = "scatter";
    let hubbard = lattice(cfg)?;
    let theta_in = cfg.get_or(S, "theta_in", 0.0)?;
    let wavelength = positive(cfg, S, "wavelength", 2.0)?;
    let angles = cfg.get_or(S, "angles", 361usize)?;
    let method = method(cfg, S)?;
    let fermions = hubbard.spec.is_fermionic();

    let space = solve(&hubbard, method)?;
    let grid = angle_grid(angles);
    let channels: &[Channel] = if fermions { &[Channel::X, Channel::Y] } else { &[Channel::Boson] };
    let scans = channels
        .iter()
        .map(|&ch| angular_scan(&space, theta_in, wavelength, &grid, ch))
        .collect::<Result<Vec<_>, _>>()?;

    let mut table = Table::new(if fermions {
        &["theta_out", "classical_x", "classical_y", "R_x", "R_y"]
    } else {
        &["theta_out", "classical", "R"]
    });
    for (k, &theta) in grid.iter().enumerate() {
        let mut row = vec![Cell::from(theta)];
        row.extend(scans.iter().map(|s| Cell::from(s[k].classical)));
        row.extend(scans.iter().map(|s| Cell::from(s[k].quantum)));
        table.push(row);
    }
    let integrated: serde_json::Map<String, Value> = channels
        .iter()
        .zip(&scans)
        .map(|(ch, scan)| (format!("{ch:?}").to_lowercase(), json!(integrated_quantum_addition(scan))))
        .collect();
    Ok(RunOutput {
        tables: vec![("scatter", table)],
        summary: json!({
            "sites": hubbard.spec.sites,
            "particles": hubbard.spec.total_particles(),
            "statistics": hubbard.spec.statistics,
            "boundary": hubbard.spec.boundary,
            "hopping": hubbard.hopping,
            "interaction": hubbard.interaction,
            "ground_energy": space.energy,
            "degeneracy": space.degeneracy(),
            "integrated_R": integrated,
        }),
    })
}

fn distribution_json(d: &MagnetizationDistribution) -> Value {
    json!({ "support": d.support(), "probabilities": d.probabilities() })
}

pub fn trajectory(cfg: &Config, master_seed: Option<u64>) -> Result<RunOutput, CliError> {
    const S: &str = "trajectory";
    let master_seed = seed(master_seed, S)?;
    let detection = Detection {
        kappa: positive(cfg, S, "kappa", 1.0)?,
        coupling: cfg.get_or(S, "coupling", 1.0)?,
    };
    detection.validate()?;
    let duration = positive(cfg, S, "duration", 1.0)?;
    let count = cfg.get_or(S, "trajectories", 1000usize)?;
    let logged = cfg.get_or(S, "logged", 3usize)?.min(count);

    let prior = if cfg.choice(S, "prior", &["flat", "lattice"])? == "flat" {
        cfg.forbid(S, &["illuminated", "alternating"], "by a flat prior")?;
        let (lo, hi) = (cfg.get_or::<f64>(S, "min", -4.0)?, cfg.get_or::<f64>(S, "max", 4.0)?);
        cfg.ensure(lo.fract() == 0.0 && hi.fract() == 0.0 && lo <= hi, S, "max", "min and max must be integers with min <= max")?;
        MagnetizationDistribution::flat(lo as i64, hi as i64)?
    } else {
        cfg.forbid(S, &["min", "max"], "by a lattice prior")?;
        let hubbard = lattice(cfg)?;
        let mut illumination = Illumination::first(cfg.get_or(S, "illuminated", hubbard.spec.sites)?);
        if cfg.get_or(S, "alternating", false)? {
            illumination = illumination.alternating();
        }
        let channel = if hubbard.spec.is_fermionic() { Channel::Y } else { Channel::Boson };
        let space = solve(&hubbard, Method::Auto)?;
        initial_distribution(&space, &illumination, channel)?
    };

    let records = sample_ensemble(&prior, &detection, duration, master_seed, count)?;
    let mut log = Table::new(&["trajectory", "t", "tau", "m", "mean_M_K", "snapshot"]);
    let mut snapshots = Table::new(&["snapshot", "M_K", "probability"]);
    let mut snapshot_id = 0usize;
    for (i, record) in records.iter().take(logged).enumerate() {
        for (t, m) in events(record) {
            let tau = detection.tau_rate() * t;
            let conditional = conditional_distribution(&prior, m, tau)?;
            log.push(vec![i.into(), t.into(), tau.into(), m.into(), conditional.mean().into(), snapshot_id.into()]);
            for (z, p) in conditional.iter() {
                snapshots.push(vec![snapshot_id.into(), z.into(), p.into()]);
            }
            snapshot_id += 1;
        }
    }
    Ok(RunOutput {
        tables: vec![("trajectory", log), ("distribution", snapshots)],
        summary: json!({
            "prior": distribution_json(&prior),
            "detection": detection,
            "duration": duration,
            "tau": detection.tau_rate() * duration,
            "ensemble": summarize(&records),
        }),
    })
}

/// `(t, m)` at the start, after every detection, and at the end of a record.
fn events(record: &TrajectoryRecord) -> Vec<(f64, u64)> {
    let mut events = vec![(0.0, 0)];
    events.extend(record.detection_times.iter().enumerate().map(|(k, &t)| (t, k as u64 + 1)));
    events.push((record.duration, record.detection_times.len() as u64));
    events
}

pub fn homodyne(cfg: &Config, master_seed: Option<u64>) -> Result<RunOutput, CliError> {
    const S: &str = "homodyne";
    let master_seed = seed(master_seed, S)?;
    let mut params = HomodyneConfig::new(
        cfg.get_or(S, "flux", 1.0)?,
        cfg.get_or(S, "phase_difference", 0.0)?,
        positive(cfg, S, "kappa", 1.0)?,
        cfg.get_or(S, "coupling", 1.0)?,
    );
    params.rotation = cfg.get_or(S, "rotation", 0.0)?;
    params.validate()?;
    let count = cfg.get_or(S, "count", 10u64)?;
    let time = positive(cfg, S, "time", 10.0)?;
    let weight_plus = cfg.get_or(S, "weight_plus", 0.5)?;
    cfg.ensure((0.0..=1.0).contains(&weight_plus), S, "weight_plus", "must lie in [0, 1]")?;
    let eta = cfg.get_or(S, "miss_probability", 0.0)?;
    cfg.ensure((0.0..1.0).contains(&eta), S, "miss_probability", "must lie in [0, 1)")?;
    let samples = cfg.get_or(S, "samples", 10_000usize)?;
    cfg.ensure(samples >= 1, S, "samples", "must be at least 1")?;
    let duration = positive(cfg, S, "duration", time)?;
    let trajectories = cfg.get_or(S, "trajectories", 100usize)?;
    let logged = cfg.get_or(S, "logged", 3usize)?.min(trajectories);

    // the analytic query fixes the two eigenvalues; below threshold it is a regime error
    let (z_plus, z_minus) = eigenvalue_pair(&params, count, time)?;
    let weights = (weight_plus, 1.0 - weight_plus);
    let closed = conditional_state(&params, weights, count, time)?;
    let robustness = mix_over_misses(&params, weights, count, time, eta, samples, master_seed)?;
    let prior = [(z_plus, weights.0), (z_minus, weights.1)];
    let records = simulate_homodyne_ensemble(&params, &prior, duration, master_seed, trajectories)?;

    let mut log = Table::new(&["trajectory", "t", "m", "relative_phase", "purity"]);
    for (i, record) in records.iter().take(logged).enumerate() {
        for (t, m) in events(record) {
            let snap = snapshot(&params, prior, m, t, eta)?;
            log.push(vec![i.into(), t.into(), m.into(), snap.relative_phase.into(), snap.purity.into()]);
        }
    }
    Ok(RunOutput {
        tables: vec![("homodyne", log)],
        summary: json!({
            "config": params,
            "count": count,
            "time": time,
            "z_plus": z_plus,
            "z_minus": z_minus,
            "phase_per_count": phase_per_count(&params, count, time)?,
            "relative_phase": closed.relative_phase,
            "robustness": robustness,
            "ensemble": summarize(&records),
        }),
    })
}

pub fn entropy(cfg: &Config) -> Result<RunOutput, CliError> {
    const S: &str = "entropy";
    let family = cfg.choice(S, "family", &["poisson", "skellam", "binomial", "flat"])?;
    let prior = match family {
        "poisson" | "skellam" => {
            cfg.forbid(S, &["trials", "probability", "min", "max"], "by this family")?;
            let mean = positive(cfg, S, "mean", 50.0)?;
            if family == "poisson" {
                CountDistribution::Poisson { mean }
            } else {
                CountDistribution::Skellam { mean }
            }
        }
        "binomial" => {
            cfg.forbid(S, &["mean", "min", "max"], "by this family")?;
            CountDistribution::Binomial {
                trials: cfg.get_or(S, "trials", 100u64)?,
                probability: cfg.get_or(S, "probability", 0.5)?,
            }
        }
        _ => {
            cfg.forbid(S, &["mean", "trials", "probability"], "by this family")?;
            let (lo, hi) = (cfg.get_or::<f64>(S, "min", -4.0)?, cfg.get_or::<f64>(S, "max", 4.0)?);
            cfg.ensure(lo.fract() == 0.0 && hi.fract() == 0.0 && lo <= hi, S, "max", "min and max must be integers with min <= max")?;
            CountDistribution::Empirical(MagnetizationDistribution::flat(lo as i64, hi as i64)?)
        }
    };
    prior.validate()?;
    let coupling = cfg.get_or(S, "coupling", 1.0)?;
    let base = match cfg.choice(S, "base", &["2", "e"])? {
        "e" => LogBase::E,
        _ => LogBase::Two,
    };
    let fixed_count = cfg.get::<u64>(S, "count")?;
    let tau_max = cfg.get_or(S, "tau_max", 1.0)?;
    cfg.ensure(tau_max >= 0.0, S, "tau_max", "must be nonnegative")?;
    let tau_points = cfg.get_or(S, "tau_points", 21usize)?;

    let second_moment = prior.variance()? + prior.mean()?.powi(2);
    let mut table = Table::new(&["tau", "m", "entropy_exact", "entropy_approx"]);
    for tau in linear_grid(0.0, tau_max, tau_points) {
        // without a fixed count each tau takes its most typical record
        let m = fixed_count.unwrap_or((tau * second_moment).round() as u64);
        let squeezed = squeeze_distribution(&prior, m, tau)?.table()?;
        let sup = LightMatterSuperposition::from_distribution(&squeezed, Complex64::new(coupling, 0.0));
        table.push(vec![
            tau.into(),
            m.into(),
            light_matter_entropy(&sup, EntropyMode::ExactGram, base)?.into(),
            light_matter_entropy(&sup, EntropyMode::OrthogonalApprox, base)?.into(),
        ]);
    }
    Ok(RunOutput {
        tables: vec![("entropy", table)],
        summary: json!({
            "family": family,
            "base": base,
            "mean": prior.mean()?,
            "variance": prior.variance()?,
            "shannon_entropy": shannon_entropy(&prior, base)?,
            "gaussian_entropy": gaussian_entropy(prior.variance()?, base)?,
        }),
    })
}

pub fn phasediagram(cfg: &Config) -> Result<RunOutput, CliError> {
    const S: &str = "phasediagram";
    let (mu_min, mu_max) = (cfg.get_or(S, "mu_min", 0.0)?, cfg.get_or(S, "mu_max", 3.0)?);
    cfg.ensure(mu_max >= mu_min, S, "mu_max", "must not be below mu_min")?;
    let mu_step = positive(cfg, S, "mu_step", 0.005)?;
    let alpha_min = positive(cfg, S, "alpha_min", 1e-3)?;
    let alpha_max = positive(cfg, S, "alpha_max", 10.0)?;
    cfg.ensure(alpha_max >= alpha_min, S, "alpha_max", "must not be below alpha_min")?;
    let alpha_points = cfg.get_or(S, "alpha_points", 41usize)?;
    let sites = cfg.get_or(S, "sites", 1usize)?;
    cfg.ensure(sites >= 1, S, "sites", "must be at least 1")?;
    let n_max = cfg.get_or(S, "n_max", 5usize)?;
    cfg.ensure(n_max >= 1, S, "n_max", "must be at least 1")?;
    let hopping = cfg.get_or(S, "hopping", 0.0)?;
    cfg.ensure(hopping >= 0.0, S, "hopping", "must be nonnegative")?;
    let route = match cfg.choice(S, "route", &["self-consistent", "analytic"])? {
        "analytic" => Route::Analytic,
        _ => Route::SelfConsistent,
    };
    cfg.ensure(
        route == Route::SelfConsistent || hopping == 0.0,
        S,
        "route",
        "the analytic route needs hopping = 0",
    )?;

    let mu_points = ((mu_max - mu_min) / mu_step).round() as usize + 1;
    let mu = linear_grid(mu_min, mu_max, mu_points);
    let alpha = log_grid(alpha_min, alpha_max, alpha_points);
    let solutions = phase_diagram(&mu, &alpha, sites, n_max, hopping, route)?;
    let mut table = Table::new(&["mu_over_U", "alpha_D", "psi", "rho", "delta_n", "phase"]);
    for s in &solutions {
        table.push(vec![
            s.mu.into(),
            s.alpha_d.into(),
            s.psi.into(),
            s.rho.into(),
            s.delta_n.into(),
            s.phase.label().into(),
        ]);
    }
    let fractions: Vec<Value> = solutions
        .chunks(mu.len().max(1))
        .map(|row| json!({ "alpha_D": row[0].alpha_d, "mott_fraction": mott_fraction(row) }))
        .collect();
    let boundaries: Vec<Value> = phase_boundaries(&solutions, mu.len().max(1))
        .into_iter()
        .map(|(a, m)| json!({ "alpha_D": a, "mu_over_U": m }))
        .collect();
    Ok(RunOutput {
        tables: vec![("phasediagram", table)],
        summary: json!({
            "sites": sites,
            "n_max": n_max,
            "hopping": hopping,
            "route": route,
            "mu_points": mu.len(),
            "alpha_points": alpha.len(),
            "mott_fraction": fractions,
            "boundaries": boundaries,
        }),
    })
}
