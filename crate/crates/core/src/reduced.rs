//! Propagation in the single-excitation sector plus the ground state.
//!
//! The basis is `{|1⟩, …, |N⟩, |g⟩}` with the ground state last. Dephasing
//! conserves the excitation number and vacuum relaxation only maps `|j⟩` to
//! `|g⟩`, so this `(N+1)`-dimensional block evolves on its own.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::full::{validate_density, Frame};
use crate::integrate::{self, EvolveOptions, MasterEquation, Observables, TimeSeries};
use crate::linalg::{self, add_adjoint_into, CMatrix, CVector, I, ONE};
use crate::model::{CorrelationKernel, NetworkSpec, NoiseSpec, PSD_TOLERANCE};

/// Density matrix on `{|1⟩, …, |N⟩, |g⟩}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState {
    rho: CMatrix,
}

impl ReducedState {
    pub fn new(rho: CMatrix) -> Result<Self> {
        if rho.nrows() < 2 || rho.ncols() != rho.nrows() {
            return Err(Error::Input("reduced state must be square with N >= 1".into()));
        }
        validate_density(&rho)?;
        Ok(Self { rho })
    }

    /// `|site⟩⟨site|` for a zero-based site.
    pub fn excited(n_spins: usize, site: usize) -> Result<Self> {
        if site >= n_spins {
            return Err(Error::Input(format!("site {site} outside chain of {n_spins}")));
        }
        let mut rho = CMatrix::zeros(n_spins + 1, n_spins + 1);
        rho[(site, site)] = ONE;
        Ok(Self { rho })
    }

    pub fn ground(n_spins: usize) -> Self {
        let mut rho = CMatrix::zeros(n_spins + 1, n_spins + 1);
        rho[(n_spins, n_spins)] = ONE;
        Self { rho }
    }

    pub fn pure(psi: &CVector) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(Error::Input("zero state vector".into()));
        }
        Self::new(linalg::projector(&(psi / Complex64::new(norm, 0.0))))
    }

    pub fn n_spins(&self) -> usize {
        self.rho.nrows() - 1
    }

    pub fn rho(&self) -> &CMatrix {
        &self.rho
    }

    pub fn into_inner(self) -> CMatrix {
        self.rho
    }
}

/// Reduced Hamiltonian: the coupling matrix on the excitation block, `Δ` on its
/// diagonal (`2ω_q` in the lab frame, `0` rotating) and zero on `|g⟩`.
pub fn build_hamiltonian_reduced(net: &NetworkSpec, frame: Frame) -> CMatrix {
    let n = net.n_spins();
    let delta = match frame {
        Frame::Rotating => 0.0,
        Frame::Lab => 2.0 * net.omega_q(),
    };
    let c = net.coupling();
    CMatrix::from_fn(n + 1, n + 1, |r, s| {
        if r == n || s == n {
            Complex64::new(0.0, 0.0)
        } else if r == s {
            Complex64::new(delta, 0.0)
        } else {
            Complex64::new(c[(r, s)], 0.0)
        }
    })
}

/// Decay rates of each coherence under pure dephasing.
#[derive(Debug, Clone, PartialEq)]
pub struct DephasingRateMatrix {
    lambda: DMatrix<f64>,
}

impl DephasingRateMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.lambda
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.lambda[(a, b)]
    }

    pub fn zeros(n_spins: usize) -> Self {
        Self { lambda: DMatrix::zeros(n_spins + 1, n_spins + 1) }
    }
}

/// Sign vector of reduced basis state `a`: `+1` on the excited site, `−1` elsewhere.
fn sign_vector(n: usize, a: usize) -> DVector<f64> {
    DVector::from_fn(n, |m, _| if m == a { 1.0 } else { -1.0 })
}

/// `Λ_ab = (c/2) Δzᵀ V K V Δz` with `Δz = z(a) − z(b)`.
pub fn build_dephasing_rates(
    net: &NetworkSpec,
    kernel: &CorrelationKernel,
    noise: &NoiseSpec,
) -> Result<DephasingRateMatrix> {
    let n = net.n_spins();
    if kernel.n() != n {
        return Err(Error::Dimension { expected: n, got: kernel.n() });
    }
    let v = net.dephasing_couplings();
    let w = DMatrix::from_fn(n, n, |j, k| v[j] * v[k] * kernel.get(j, k));
    let z: Vec<DVector<f64>> = (0..=n).map(|a| sign_vector(n, a)).collect();
    let mut lambda = DMatrix::zeros(n + 1, n + 1);
    for a in 0..=n {
        for b in 0..a {
            let dz = &z[a] - &z[b];
            let rate = 0.5 * noise.c_dephasing * dz.dot(&(&w * &dz));
            lambda[(a, b)] = rate;
            lambda[(b, a)] = rate;
        }
    }
    Ok(DephasingRateMatrix { lambda })
}

/// Diagonal Lindblad form of the correlated relaxation double sum.
///
/// Each operator is `L_α = |g⟩⟨w_α|` with `w_α = √λ_α u_α`, where
/// `(λ_α, u_α)` diagonalise `M_jk = ν_j ν_k K_jk C_⊥`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpOperatorSet {
    n: usize,
    eigenvalues: Vec<f64>,
    vectors: Vec<DVector<f64>>,
    rate_matrix: DMatrix<f64>,
}

impl JumpOperatorSet {
    pub fn empty(n_spins: usize) -> Self {
        Self {
            n: n_spins,
            eigenvalues: vec![0.0; n_spins],
            vectors: Vec::new(),
            rate_matrix: DMatrix::zeros(n_spins, n_spins),
        }
    }

    pub fn n_spins(&self) -> usize {
        self.n
    }

    /// All eigenvalues of `M` after clamping, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Number of operators with a nonzero rate.
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Weighted vectors `w_α` on the excitation block.
    pub fn vectors(&self) -> &[DVector<f64>] {
        &self.vectors
    }

    /// `Σ_α w_α w_αᵀ`, equal to `M` up to clamping.
    pub fn rate_matrix(&self) -> &DMatrix<f64> {
        &self.rate_matrix
    }

    /// The operators as `(N+1)×(N+1)` matrices.
    pub fn matrices(&self) -> Vec<CMatrix> {
        let n = self.n;
        self.vectors
            .iter()
            .map(|w| {
                let mut l = CMatrix::zeros(n + 1, n + 1);
                for m in 0..n {
                    l[(n, m)] = Complex64::new(w[m], 0.0);
                }
                l
            })
            .collect()
    }
}

pub fn build_jump_operators(
    net: &NetworkSpec,
    kernel: &CorrelationKernel,
    noise: &NoiseSpec,
) -> Result<JumpOperatorSet> {
    let n = net.n_spins();
    if kernel.n() != n {
        return Err(Error::Dimension { expected: n, got: kernel.n() });
    }
    kernel.check_psd()?;
    let nu = net.relaxation_couplings();
    let c = noise.c_relax_down;
    let m = DMatrix::from_fn(n, n, |j, k| nu[j] * nu[k] * kernel.get(j, k) * c);
    let eig = SymmetricEigen::new(m.clone());
    let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut eigenvalues = Vec::with_capacity(n);
    let mut vectors = Vec::new();
    for &i in &order {
        let lambda = eig.eigenvalues[i];
        if lambda < -PSD_TOLERANCE * max.max(f64::MIN_POSITIVE) {
            return Err(Error::NumericalPsd { min_eigenvalue: lambda });
        }
        let lambda = lambda.max(0.0);
        eigenvalues.push(lambda);
        if lambda > 0.0 {
            vectors.push(eig.eigenvectors.column(i).into_owned() * lambda.sqrt());
        }
    }
    let rate_matrix = vectors
        .iter()
        .fold(DMatrix::zeros(n, n), |acc, w: &DVector<f64>| acc + w * w.transpose());
    Ok(JumpOperatorSet { n, eigenvalues, vectors, rate_matrix })
}

/// Generator of the reduced master equation.
#[derive(Debug, Clone)]
pub struct ReducedLiouvillian {
    n: usize,
    /// `(−iH − ½ Σ L†L)†`, stored pre-adjointed for `ρ G†`.
    generator_adjoint: CMatrix,
    lambda: DMatrix<f64>,
    jump_rates: DMatrix<f64>,
    rate_bound: f64,
    smallest_rate: Option<f64>,
}

impl ReducedLiouvillian {
    pub fn new(
        hamiltonian: &CMatrix,
        rates: &DephasingRateMatrix,
        jumps: &JumpOperatorSet,
    ) -> Result<Self> {
        let d = hamiltonian.nrows();
        let n = d.checked_sub(1).filter(|&n| n >= 1).ok_or_else(|| {
            Error::Input("reduced Hamiltonian needs at least 2 rows".into())
        })?;
        if rates.matrix().nrows() != d {
            return Err(Error::Dimension { expected: d, got: rates.matrix().nrows() });
        }
        if jumps.n_spins() != n {
            return Err(Error::Dimension { expected: n, got: jumps.n_spins() });
        }
        if linalg::hermiticity_error(hamiltonian) > 1e-12 {
            return Err(Error::Input("reduced Hamiltonian must be Hermitian".into()));
        }
        let m = jumps.rate_matrix();
        let mut generator = hamiltonian * (-I);
        for r in 0..n {
            for s in 0..n {
                generator[(r, s)] -= Complex64::new(0.5 * m[(r, s)], 0.0);
            }
        }
        let h_bound = (0..d)
            .map(|r| hamiltonian.row(r).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max);
        let max_lambda = rates.matrix().max();
        let max_relax = jumps.eigenvalues().first().copied().unwrap_or(0.0);
        let rate_bound = 2.0 * h_bound + max_lambda + max_relax;

        let candidates: Vec<f64> =
            rates.matrix().iter().chain(jumps.eigenvalues()).copied().collect();
        let max_rate = candidates.iter().copied().fold(0.0, f64::max);
        let smallest_rate = candidates
            .into_iter()
            .filter(|&r| r > 1e-12 * max_rate)
            .min_by(|a, b| a.total_cmp(b));

        Ok(Self {
            n,
            generator_adjoint: generator.adjoint(),
            lambda: rates.matrix().clone(),
            jump_rates: m.clone(),
            rate_bound,
            smallest_rate,
        })
    }

    /// Builds every ingredient from the model. Upward relaxation leaves the
    /// sector, so `c_relax_up > 0` is rejected.
    pub fn from_model(
        net: &NetworkSpec,
        kernel: &CorrelationKernel,
        noise: &NoiseSpec,
        frame: Frame,
    ) -> Result<Self> {
        noise.validate()?;
        if noise.c_relax_up > 0.0 {
            return Err(Error::Contract(
                "upward relaxation populates two-excitation states; use the full engine".into(),
            ));
        }
        let h = build_hamiltonian_reduced(net, frame);
        let rates = build_dephasing_rates(net, kernel, noise)?;
        let jumps = if noise.c_relax_down > 0.0 {
            build_jump_operators(net, kernel, noise)?
        } else {
            JumpOperatorSet::empty(net.n_spins())
        };
        Self::new(&h, &rates, &jumps)
    }

    pub fn n_spins(&self) -> usize {
        self.n
    }

    /// `⟨σ_-^{(j)}⟩ = ρ_{j,g}` in the propagation frame.
    pub fn sigma_minus(&self, rho: &CMatrix) -> Vec<Complex64> {
        (0..self.n).map(|j| rho[(j, self.n)]).collect()
    }
}

impl MasterEquation for ReducedLiouvillian {
    fn dim(&self) -> usize {
        self.n + 1
    }

    fn apply(&self, rho: &CMatrix, out: &mut CMatrix) {
        let n = self.n;
        let y = rho * &self.generator_adjoint;
        add_adjoint_into(&y, out);
        for c in 0..=n {
            for r in 0..=n {
                out[(r, c)] -= rho[(r, c)] * self.lambda[(r, c)];
            }
        }
        let mut feed = 0.0;
        for k in 0..n {
            for m in 0..n {
                feed += self.jump_rates[(m, k)] * rho[(m, k)].re;
            }
        }
        out[(n, n)] += feed;
    }

    fn rate_bound(&self) -> f64 {
        self.rate_bound
    }

    fn smallest_decay_rate(&self) -> Option<f64> {
        self.smallest_rate
    }

    fn observe(&self, rho: &CMatrix) -> Observables {
        let n = self.n;
        let tr = linalg::trace(rho).re;
        Observables {
            sz: (0..n).map(|j| 2.0 * rho[(j, j)].re - tr).collect(),
            abs_sx: (0..n).map(|j| 2.0 * rho[(j, n)].norm()).collect(),
            purity: linalg::purity(rho),
        }
    }

    fn excitation_number(&self, rho: &CMatrix) -> f64 {
        (0..self.n).map(|j| rho[(j, j)].re).sum()
    }
}

pub fn evolve_reduced(
    rho0: &ReducedState,
    liouvillian: &ReducedLiouvillian,
    opts: &EvolveOptions,
) -> Result<(TimeSeries, ReducedState)> {
    let (series, rho) = integrate::evolve(liouvillian, rho0.rho(), opts)?;
    Ok((series, ReducedState { rho }))
}
