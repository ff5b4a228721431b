use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::operator::dot;
use super::{SparseOperator, StateVector};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, symmetric_eigen};

/// Eigenvalue gaps below this are treated as degeneracies.
pub const DEGENERACY_TOLERANCE: f64 = 1e-10;

/// Largest dimension handled by the dense solver under [`Method::Auto`].
const DENSE_LIMIT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Dense,
    Lanczos,
    ImaginaryTime,
    /// Dense up to 2000 states, Lanczos beyond.
    Auto,
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Lanczos residual tolerance, relative to `max(1, |E|)`.
    pub residual_tolerance: f64,
    /// Imaginary-time stopping threshold on the energy change per step.
    pub energy_tolerance: f64,
    pub krylov_dimension: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200_000,
            residual_tolerance: 1e-10,
            energy_tolerance: 1e-12,
            krylov_dimension: 120,
            seed: 0x6c61_7474,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub energy: f64,
    pub state: StateVector,
    /// Set when the next eigenvalue lies within [`DEGENERACY_TOLERANCE`].
    pub degenerate: bool,
    pub iterations: usize,
}

/// Orthonormal basis of the lowest eigenspace.
#[derive(Debug, Clone)]
pub struct GroundSpace {
    pub energy: f64,
    pub states: Vec<StateVector>,
}

impl GroundSpace {
    pub fn degeneracy(&self) -> usize {
        self.states.len()
    }

    /// Configuration probabilities of the equal-weight mixture over the ground space.
    pub fn probabilities(&self) -> Vec<f64> {
        let g = self.states.len() as f64;
        let mut p = vec![0.0; self.states[0].basis().dim()];
        for s in &self.states {
            for (acc, a) in p.iter_mut().zip(s.amplitudes()) {
                *acc += a.norm_sqr() / g;
            }
        }
        p
    }
}

fn resolve(method: Method, dim: usize) -> Method {
    match method {
        Method::Auto if dim <= DENSE_LIMIT => Method::Dense,
        Method::Auto => Method::Lanczos,
        m => m,
    }
}

fn degeneracy_gap(e0: f64) -> f64 {
    DEGENERACY_TOLERANCE * e0.abs().max(1.0)
}

pub fn ground_state(h: &SparseOperator, method: Method) -> Result<GroundState> {
    ground_state_with(h, method, &SolverOptions::default())
}

/// Lowest eigenpair of a Hermitian operator.
pub fn ground_state_with(h: &SparseOperator, method: Method, opts: &SolverOptions) -> Result<GroundState> {
    check_hermitian(h)?;
    let basis = h.basis().clone();
    match resolve(method, h.dim()) {
        Method::Dense => {
            let evd = hermitian_eigen(&h.to_dense())?;
            let e0 = evd.values[0];
            let degenerate = evd.values.get(1).is_some_and(|e1| e1 - e0 < degeneracy_gap(e0));
            Ok(GroundState {
                energy: e0,
                state: StateVector::new(basis, evd.vector(0))?,
                degenerate,
                iterations: 1,
            })
        }
        method => {
            let lowest = |locked: &[Vec<Complex64>]| match method {
                Method::Lanczos => lanczos_lowest(h, locked, opts),
                _ => imaginary_time_lowest(h, locked, opts),
            };
            let first = lowest(&[])?.expect("nonempty basis");
            let degenerate = match lowest(std::slice::from_ref(&first.vector))? {
                Some(next) => next.energy - first.energy < degeneracy_gap(first.energy),
                None => false,
            };
            Ok(GroundState {
                energy: first.energy,
                state: StateVector::new(basis, first.vector)?,
                degenerate,
                iterations: first.iterations,
            })
        }
    }
}

/// All eigenvectors whose eigenvalue lies within the degeneracy tolerance of the minimum.
pub fn ground_space(h: &SparseOperator, method: Method) -> Result<GroundSpace> {
    check_hermitian(h)?;
    let opts = SolverOptions::default();
    let basis = h.basis().clone();
    match resolve(method, h.dim()) {
        Method::Dense => {
            let evd = hermitian_eigen(&h.to_dense())?;
            let e0 = evd.values[0];
            let states = evd
                .values
                .iter()
                .take_while(|&&e| e - e0 < degeneracy_gap(e0))
                .enumerate()
                .map(|(k, _)| StateVector::new(basis.clone(), evd.vector(k)))
                .collect::<Result<Vec<_>>>()?;
            Ok(GroundSpace { energy: e0, states })
        }
        method => {
            let mut locked: Vec<Vec<Complex64>> = Vec::new();
            let mut e0 = f64::NAN;
            loop {
                let found = match method {
                    Method::Lanczos => lanczos_lowest(h, &locked, &opts)?,
                    _ => imaginary_time_lowest(h, &locked, &opts)?,
                };
                let Some(pair) = found else { break };
                if locked.is_empty() {
                    e0 = pair.energy;
                } else if pair.energy - e0 >= degeneracy_gap(e0) {
                    break;
                }
                locked.push(pair.vector);
            }
            let states = locked
                .into_iter()
                .map(|v| StateVector::new(basis.clone(), v))
                .collect::<Result<Vec<_>>>()?;
            Ok(GroundSpace { energy: e0, states })
        }
    }
}

fn check_hermitian(h: &SparseOperator) -> Result<()> {
    let err = h.hermiticity_error();
    if err > 1e-12 * h.max_abs().max(1.0) {
        return Err(Error::Numerical(format!("operator is not Hermitian (deviation {err:.3e})")));
    }
    Ok(())
}

struct Eigenpair {
    energy: f64,
    vector: Vec<Complex64>,
    iterations: usize,
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

fn scale(v: &mut [Complex64], s: f64) {
    v.iter_mut().for_each(|a| *a *= s);
}

fn project_out(v: &mut [Complex64], basis: &[Vec<Complex64>]) {
    // twice is enough for numerical orthogonality
    for _ in 0..2 {
        for q in basis {
            let overlap = dot(q, v);
            v.iter_mut().zip(q).for_each(|(x, y)| *x -= overlap * y);
        }
    }
}

fn rayleigh(h: &SparseOperator, v: &[Complex64]) -> f64 {
    dot(v, &h.apply(v)).re
}

/// Random start vector orthogonal to `locked`; `None` if the complement is empty.
fn start_vector(dim: usize, locked: &[Vec<Complex64>], seed: u64) -> Option<Vec<Complex64>> {
    if locked.len() >= dim {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (dim as u64).rotate_left(17) ^ locked.len() as u64);
    for _ in 0..8 {
        let mut v: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        project_out(&mut v, locked);
        let n = norm(&v);
        if n > 1e-8 {
            scale(&mut v, 1.0 / n);
            return Some(v);
        }
    }
    None
}

/// Lanczos with full reorthogonalization and explicit restarts, restricted to
/// the orthogonal complement of `locked`.
fn lanczos_lowest(h: &SparseOperator, locked: &[Vec<Complex64>], opts: &SolverOptions) -> Result<Option<Eigenpair>> {
    let dim = h.dim();
    let Some(mut v) = start_vector(dim, locked, opts.seed) else {
        return Ok(None);
    };
    let kmax = opts.krylov_dimension.min(dim - locked.len()).max(1);
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while iterations < opts.max_iterations {
        let mut krylov: Vec<Vec<Complex64>> = vec![v.clone()];
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut ritz: Option<(f64, Vec<f64>)> = None;
        for j in 0..kmax {
            iterations += 1;
            let mut w = h.apply(&krylov[j]);
            project_out(&mut w, locked);
            let alpha = dot(&krylov[j], &w).re;
            alphas.push(alpha);
            project_out(&mut w, &krylov);
            let beta = norm(&w);
            let exhausted = beta < 1e-13 || j + 1 == kmax || iterations >= opts.max_iterations;
            if j % 4 == 3 || exhausted {
                let (theta, y) = tridiagonal_lowest(&alphas, &betas)?;
                let estimate = beta * y.last().unwrap().abs();
                ritz = Some((theta, y));
                if estimate < opts.residual_tolerance * theta.abs().max(1.0) || exhausted {
                    break;
                }
            }
            betas.push(beta);
            scale(&mut w, 1.0 / beta);
            krylov.push(w);
        }
        let (_, y) = ritz.expect("at least one Ritz evaluation per cycle");
        let mut x = vec![Complex64::default(); dim];
        for (coef, q) in y.iter().zip(&krylov) {
            x.iter_mut().zip(q).for_each(|(a, b)| *a += *coef * b);
        }
        project_out(&mut x, locked);
        let n = norm(&x);
        scale(&mut x, 1.0 / n);
        let hx = h.apply(&x);
        let energy = dot(&x, &hx).re;
        let mut r: Vec<Complex64> = hx.iter().zip(&x).map(|(a, b)| a - energy * b).collect();
        project_out(&mut r, locked);
        residual = norm(&r);
        if residual < opts.residual_tolerance * energy.abs().max(1.0) {
            return Ok(Some(Eigenpair {
                energy,
                vector: x,
                iterations,
            }));
        }
        v = x;
    }
    Err(Error::NoConvergence {
        solver: "lanczos",
        iterations,
        residual,
    })
}

fn tridiagonal_lowest(alphas: &[f64], betas: &[f64]) -> Result<(f64, Vec<f64>)> {
    let k = alphas.len();
    let (values, vectors) = symmetric_eigen(k, |i, j| {
        if i == j {
            alphas[i]
        } else if i == j + 1 {
            betas[j]
        } else if j == i + 1 {
            betas[i]
        } else {
            0.0
        }
    })?;
    Ok((values[0], (0..k).map(|i| vectors[(i, 0)]).collect()))
}

/// Projection with `1 - dtau H`, `dtau = 1 / (2 r)` for a Gershgorin bound `r`,
/// so every factor lies in `[1/2, 3/2]` and the lowest eigenvalue dominates.
fn imaginary_time_lowest(
    h: &SparseOperator,
    locked: &[Vec<Complex64>],
    opts: &SolverOptions,
) -> Result<Option<Eigenpair>> {
    let dim = h.dim();
    let Some(mut v) = start_vector(dim, locked, opts.seed) else {
        return Ok(None);
    };
    let bound = h.norm_bound();
    if bound == 0.0 {
        return Ok(Some(Eigenpair {
            energy: 0.0,
            vector: v,
            iterations: 0,
        }));
    }
    let dtau = 0.5 / bound;
    let mut energy = rayleigh(h, &v);
    let mut hv = vec![Complex64::default(); dim];
    for it in 1..=opts.max_iterations {
        h.apply_into(&v, &mut hv);
        v.iter_mut().zip(&hv).for_each(|(a, b)| *a -= dtau * b);
        project_out(&mut v, locked);
        let n = norm(&v);
        scale(&mut v, 1.0 / n);
        let next = rayleigh(h, &v);
        let change = (energy - next).abs();
        energy = next;
        if change < opts.energy_tolerance {
            return Ok(Some(Eigenpair {
                energy,
                vector: v,
                iterations: it,
            }));
        }
    }
    h.apply_into(&v, &mut hv);
    let residual = norm(&hv.iter().zip(&v).map(|(a, b)| a - energy * b).collect::<Vec<_>>());
    Err(Error::NoConvergence {
        solver: "imaginary-time",
        iterations: opts.max_iterations,
        residual,
    })
}
