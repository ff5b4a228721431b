use std::sync::Arc;

use num_complex::Complex64;

use super::FockBasis;
use crate::error::{Error, Result};

fn same_basis(a: &Arc<FockBasis>, b: &Arc<FockBasis>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// Sparse complex matrix acting on a [`FockBasis`], stored row-compressed.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    basis: Arc<FockBasis>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<Complex64>,
}

impl SparseOperator {
    /// Builds an operator from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(basis: Arc<FockBasis>, mut triplets: Vec<(usize, usize, Complex64)>) -> Self {
        let dim = basis.dim();
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut values: Vec<Complex64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) outside a {dim}-dimensional basis");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            row_ptr[r + 1] += 1;
            cols.push(c);
            values.push(v);
            last = Some((r, c));
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            basis,
            row_ptr,
            cols,
            values,
        }
    }

    pub fn diagonal_from(basis: Arc<FockBasis>, diag: Vec<Complex64>) -> Self {
        let triplets = diag.into_iter().enumerate().map(|(k, v)| (k, k, v)).collect();
        Self::from_triplets(basis, triplets)
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.row(r)
            .find(|&(col, _)| col == c)
            .map(|(_, v)| v)
            .unwrap_or_default()
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::default(); self.dim()];
        self.apply_into(x, &mut y);
        y
    }

    pub fn apply_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = Complex64::default();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.cols[k]];
            }
            *out = acc;
        }
    }

    pub fn adjoint(&self) -> Self {
        let triplets = (0..self.dim())
            .flat_map(|r| self.row(r).map(move |(c, v)| (c, r, v.conj())))
            .collect();
        Self::from_triplets(self.basis.clone(), triplets)
    }

    /// Largest elementwise deviation `|H_ij - conj(H_ji)|`.
    pub fn hermiticity_error(&self) -> f64 {
        (0..self.dim())
            .flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v)))
            .map(|(r, c, v)| (v - self.get(c, r).conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.dim()).all(|r| self.row(r).all(|(c, v)| c == r || v == Complex64::default()))
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.dim()).map(|k| self.get(k, k)).collect()
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    /// Gershgorin bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        (0..self.dim())
            .map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> faer::Mat<Complex64> {
        let mut m = faer::Mat::<Complex64>::zeros(self.dim(), self.dim());
        for r in 0..self.dim() {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }

    /// Operator product `self * other`.
    pub fn compose(&self, other: &SparseOperator) -> Result<SparseOperator> {
        if !same_basis(&self.basis, &other.basis) {
            return Err(Error::BasisMismatch);
        }
        let mut triplets = Vec::new();
        for r in 0..self.dim() {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    triplets.push((r, c, a * b));
                }
            }
        }
        Ok(Self::from_triplets(self.basis.clone(), triplets))
    }

    /// Linear combination `a * self + b * other`.
    pub fn combine(&self, a: Complex64, other: &SparseOperator, b: Complex64) -> Result<SparseOperator> {
        if !same_basis(&self.basis, &other.basis) {
            return Err(Error::BasisMismatch);
        }
        let triplets = (0..self.dim())
            .flat_map(|r| self.row(r).map(move |(c, v)| (r, c, a * v)))
            .chain((0..other.dim()).flat_map(|r| other.row(r).map(move |(c, v)| (r, c, b * v))))
            .collect();
        Ok(Self::from_triplets(self.basis.clone(), triplets))
    }

    /// Commutator `[self, other]`.
    pub fn commutator(&self, other: &SparseOperator) -> Result<SparseOperator> {
        let ab = self.compose(other)?;
        let ba = other.compose(self)?;
        ab.combine(Complex64::new(1.0, 0.0), &ba, Complex64::new(-1.0, 0.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Complex amplitudes over the configurations of a [`FockBasis`].
#[derive(Debug, Clone)]
pub struct StateVector {
    basis: Arc<FockBasis>,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn new(basis: Arc<FockBasis>, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::BasisMismatch);
        }
        Ok(Self { basis, amplitudes })
    }

    /// The Fock state with unit amplitude on configuration `k`.
    pub fn basis_state(basis: Arc<FockBasis>, k: usize) -> Self {
        let mut amplitudes = vec![Complex64::default(); basis.dim()];
        amplitudes[k] = Complex64::new(1.0, 0.0);
        Self { basis, amplitudes }
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Numerical(format!("cannot normalize a state of norm {n}")));
        }
        self.amplitudes.iter_mut().for_each(|a| *a /= n);
        Ok(())
    }

    /// Born probabilities of the basis configurations.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if !same_basis(&self.basis, &other.basis) {
            return Err(Error::BasisMismatch);
        }
        Ok(dot(&self.amplitudes, &other.amplitudes))
    }
}

pub(crate) fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `<psi|O|psi>`.
pub fn expectation(state: &StateVector, op: &SparseOperator) -> Result<Complex64> {
    if !same_basis(state.basis(), op.basis()) {
        return Err(Error::BasisMismatch);
    }
    Ok(dot(state.amplitudes(), &op.apply(state.amplitudes())))
}

/// `<psi|A B|psi>`.
pub fn two_point(state: &StateVector, a: &SparseOperator, b: &SparseOperator) -> Result<Complex64> {
    if !same_basis(state.basis(), a.basis()) || !same_basis(state.basis(), b.basis()) {
        return Err(Error::BasisMismatch);
    }
    let b_psi = b.apply(state.amplitudes());
    let a_dag_psi = a.adjoint().apply(state.amplitudes());
    Ok(dot(&a_dag_psi, &b_psi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeSpec;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn triplets_merge_and_apply() {
        let basis = Arc::new(FockBasis::new(LatticeSpec::bosons(3, 1, 1)).unwrap());
        let op = SparseOperator::from_triplets(
            basis,
            vec![(0, 1, c(1.0)), (0, 1, c(2.0)), (2, 2, c(-1.0)), (1, 0, c(3.0))],
        );
        assert_eq!(op.nnz(), 3);
        assert_eq!(op.get(0, 1), c(3.0));
        assert_eq!(op.apply(&[c(1.0), c(1.0), c(1.0)]), vec![c(3.0), c(3.0), c(-1.0)]);
        assert_eq!(op.hermiticity_error(), 0.0);
        assert!(!op.is_diagonal());
    }

    #[test]
    fn mismatched_bases_are_rejected() {
        let a = Arc::new(FockBasis::new(LatticeSpec::bosons(3, 1, 1)).unwrap());
        let b = Arc::new(FockBasis::new(LatticeSpec::bosons(3, 2, 2)).unwrap());
        let psi = StateVector::basis_state(a, 0);
        let op = SparseOperator::diagonal_from(b.clone(), vec![c(1.0); b.dim()]);
        assert_eq!(expectation(&psi, &op), Err(Error::BasisMismatch));
        assert!(StateVector::new(b, vec![c(1.0)]).is_err());
    }

    #[test]
    fn normalize_gives_unit_norm() {
        let basis = Arc::new(FockBasis::new(LatticeSpec::bosons(3, 2, 2)).unwrap());
        let amps = (0..basis.dim()).map(|k| Complex64::new(k as f64, 0.5)).collect();
        let mut psi = StateVector::new(basis, amps).unwrap();
        psi.normalize().unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-12);
    }
}
