//! Dense/sparse complex matrix helpers shared by both engines.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Row-compressed complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl SparseMatrix {
    /// Builds from unsorted triplets; duplicates are summed, exact zeros dropped.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, Complex64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<Complex64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            debug_assert!(r < dim && c < dim);
            if last == Some((r, c)) {
                *vals.last_mut().expect("duplicate follows an entry") += v;
                continue;
            }
            cols.push(c);
            vals.push(v);
            row_ptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        let mut m = Self { dim, row_ptr, cols, vals };
        m.prune();
        m
    }

    pub fn from_dense(a: &CMatrix) -> Self {
        let mut t = Vec::new();
        for r in 0..a.nrows() {
            for c in 0..a.ncols() {
                if a[(r, c)] != ZERO {
                    t.push((r, c, a[(r, c)]));
                }
            }
        }
        Self::from_triplets(a.nrows(), t)
    }

    fn prune(&mut self) {
        let mut row_ptr = vec![0usize; self.dim + 1];
        let mut cols = Vec::with_capacity(self.cols.len());
        let mut vals = Vec::with_capacity(self.vals.len());
        for r in 0..self.dim {
            for idx in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.vals[idx] != ZERO {
                    cols.push(self.cols[idx]);
                    vals.push(self.vals[idx]);
                }
            }
            row_ptr[r + 1] = cols.len();
        }
        self.row_ptr = row_ptr;
        self.cols = cols;
        self.vals = vals;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |i| (self.cols[i], self.vals[i]))
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut a = CMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                a[(r, c)] += v;
            }
        }
        a
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut m = self.clone();
        m.vals.iter_mut().for_each(|v| *v *= s);
        m
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut t = Vec::with_capacity(self.nnz() + other.nnz());
        for m in [self, other] {
            for r in 0..m.dim {
                t.extend(m.row(r).map(|(c, v)| (r, c, v)));
            }
        }
        Self::from_triplets(self.dim, t)
    }

    /// Largest absolute row sum, an upper bound on the spectral radius.
    pub fn max_row_sum(&self) -> f64 {
        (0..self.dim).map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// `out = ρ · S†`, computed column by column.
    pub fn rho_times_adjoint(&self, rho: &CMatrix, out: &mut CMatrix) {
        let d = self.dim;
        debug_assert_eq!(rho.nrows(), d);
        out.fill(ZERO);
        for c in 0..d {
            for (k, g) in self.row(c) {
                let g = g.conj();
                let (src, dst) = (rho.column(k), &mut out.column_mut(c));
                for r in 0..d {
                    dst[r] += src[r] * g;
                }
            }
        }
    }
}

/// Overwrites `out` with `Y + Y†`. `Y` must be square.
pub fn add_adjoint_into(y: &CMatrix, out: &mut CMatrix) {
    let d = y.nrows();
    for c in 0..d {
        for r in 0..=c {
            let v = y[(r, c)] + y[(c, r)].conj();
            out[(r, c)] = v;
            out[(c, r)] = v.conj();
        }
    }
}

pub fn trace(a: &CMatrix) -> Complex64 {
    (0..a.nrows()).map(|i| a[(i, i)]).sum()
}

/// `max |A − A†|` over elements.
pub fn hermiticity_error(a: &CMatrix) -> f64 {
    let d = a.nrows();
    let mut m = 0.0_f64;
    for c in 0..d {
        for r in 0..=c {
            m = m.max((a[(r, c)] - a[(c, r)].conj()).norm());
        }
    }
    m
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// `tr ρ²` for Hermitian ρ.
pub fn purity(rho: &CMatrix) -> f64 {
    rho.iter().map(|z| z.norm_sqr()).sum()
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let sym = symmetrize(a);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(a.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn min_eigenvalue(a: &CMatrix) -> f64 {
    hermitian_eigen(a).0[0]
}

fn symmetrize(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Principal square root of a positive-semidefinite Hermitian matrix.
/// Negative eigenvalues from round-off are clamped to zero.
pub fn sqrt_psd(a: &CMatrix) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(a);
    let d = a.nrows();
    let mut scaled = vecs.clone();
    for (c, &v) in vals.iter().enumerate() {
        let s = Complex64::new(v.max(0.0).sqrt(), 0.0);
        scaled.column_mut(c).iter_mut().for_each(|z| *z *= s);
    }
    let out = &scaled * vecs.adjoint();
    debug_assert_eq!(out.nrows(), d);
    out
}

/// Uhlmann fidelity `(tr √(√ρ σ √ρ))²`; equals `⟨ψ|ρ|ψ⟩` when σ = |ψ⟩⟨ψ|.
pub fn fidelity(rho: &CMatrix, sigma: &CMatrix) -> f64 {
    let sr = sqrt_psd(rho);
    let inner = &sr * sigma * &sr;
    let (vals, _) = hermitian_eigen(&inner);
    let s: f64 = vals.iter().map(|v| v.max(0.0).sqrt()).sum();
    s * s
}

/// `⟨ψ|ρ|ψ⟩`.
pub fn fidelity_pure(rho: &CMatrix, psi: &CVector) -> f64 {
    (psi.adjoint() * rho * psi)[(0, 0)].re
}

pub fn projector(psi: &CVector) -> CMatrix {
    psi * psi.adjoint()
}

pub fn real_vector(v: &[f64]) -> CVector {
    CVector::from_iterator(v.len(), v.iter().map(|&x| Complex64::new(x, 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn sparse_matches_dense_product() {
        let a = CMatrix::from_row_slice(
            3,
            3,
            &[c(1.0, 0.0), c(0.0, 2.0), ZERO, ZERO, c(-1.0, 0.5), ZERO, c(3.0, 0.0), ZERO, c(0.0, -1.0)],
        );
        let rho = CMatrix::from_row_slice(
            3,
            3,
            &[c(0.5, 0.0), c(0.1, 0.2), c(0.0, 0.1), c(0.1, -0.2), c(0.3, 0.0), c(0.05, 0.0), c(0.0, -0.1), c(0.05, 0.0), c(0.2, 0.0)],
        );
        let s = SparseMatrix::from_dense(&a);
        assert_eq!(s.nnz(), 5);
        let mut out = CMatrix::zeros(3, 3);
        s.rho_times_adjoint(&rho, &mut out);
        assert!(max_abs_diff(&out, &(&rho * a.adjoint())) < 1e-15);
        let mut sym = CMatrix::zeros(3, 3);
        add_adjoint_into(&out, &mut sym);
        let expected = &rho * a.adjoint() + &a * &rho;
        assert!(max_abs_diff(&sym, &expected) < 1e-15);
    }

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let s = SparseMatrix::from_triplets(2, vec![(0, 1, ONE), (0, 1, ONE), (1, 0, ONE), (1, 0, -ONE)]);
        assert_eq!(s.nnz(), 1);
        assert_eq!(s.to_dense()[(0, 1)], c(2.0, 0.0));
    }

    #[test]
    fn fidelity_of_pure_states() {
        let psi = real_vector(&[1.0, 0.0]);
        let phi = real_vector(&[0.6, 0.8]);
        let rho = projector(&phi);
        assert_relative_eq!(fidelity_pure(&rho, &psi), 0.36, epsilon = 1e-14);
        assert_relative_eq!(fidelity(&rho, &projector(&psi)), 0.36, epsilon = 1e-8);
    }

    #[test]
    fn fidelity_of_commuting_mixtures() {
        let rho = CMatrix::from_diagonal(&CVector::from_vec(vec![c(0.5, 0.0), c(0.5, 0.0)]));
        let sigma = CMatrix::from_diagonal(&CVector::from_vec(vec![c(0.9, 0.0), c(0.1, 0.0)]));
        let expected = ((0.5f64 * 0.9).sqrt() + (0.5f64 * 0.1).sqrt()).powi(2);
        assert_relative_eq!(fidelity(&rho, &sigma), expected, epsilon = 1e-12);
        assert_relative_eq!(fidelity(&rho, &rho), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn purity_of_maximally_mixed() {
        let rho = CMatrix::identity(4, 4) * c(0.25, 0.0);
        assert_relative_eq!(purity(&rho), 0.25, epsilon = 1e-15);
    }
}
