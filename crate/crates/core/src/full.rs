//! Exact propagation in the 2^N tensor-product space.
//!
//! Basis index `a` encodes spin `j` (zero-based) in bit `N−1−j`, with a set bit
//! meaning spin up, so spin 1 is the most significant factor and index 0 is
//! `|↓↓…↓⟩`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::integrate::{self, EvolveOptions, MasterEquation, Observables, TimeSeries};
use crate::linalg::{self, add_adjoint_into, CMatrix, CVector, SparseMatrix, I, ONE, ZERO};
use crate::model::{CorrelationKernel, NetworkSpec, NoiseSpec};

pub const DEFAULT_FULL_CAP: usize = 10;

/// Tolerances for accepting a density matrix.
pub const STATE_HERMITICITY_TOLERANCE: f64 = 1e-10;
pub const STATE_TRACE_TOLERANCE: f64 = 1e-10;
pub const STATE_EIGENVALUE_FLOOR: f64 = -1e-8;

/// Reference frame of the propagation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Frame {
    /// Co-rotating at the level splitting; the `ω_q σ_z` terms are removed.
    #[default]
    Rotating,
    Lab,
}

#[inline]
fn bit(n: usize, j: usize) -> usize {
    1 << (n - 1 - j)
}

#[inline]
fn is_up(a: usize, n: usize, j: usize) -> bool {
    a & bit(n, j) != 0
}

/// Basis index of the product state with the given (zero-based) spins up.
pub fn basis_index(n: usize, up: &[usize]) -> usize {
    up.iter().fold(0, |acc, &j| acc | bit(n, j))
}

/// Full-space index of the single-excitation state `|j⟩` (zero-based site).
pub fn single_excitation_index(n: usize, site: usize) -> usize {
    bit(n, site)
}

fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        return Err(Error::Resource { n, cap });
    }
    Ok(())
}

/// Density matrix on `2^N` states.
#[derive(Debug, Clone, PartialEq)]
pub struct FullState {
    n_spins: usize,
    rho: CMatrix,
}

impl FullState {
    pub fn new(n_spins: usize, rho: CMatrix) -> Result<Self> {
        let d = 1usize << n_spins;
        if rho.nrows() != d || rho.ncols() != d {
            return Err(Error::Dimension { expected: d, got: rho.nrows() });
        }
        validate_density(&rho)?;
        Ok(Self { n_spins, rho })
    }

    /// Product state with the listed spins up.
    pub fn basis(n_spins: usize, up: &[usize]) -> Self {
        let d = 1usize << n_spins;
        let mut rho = CMatrix::zeros(d, d);
        let a = basis_index(n_spins, up);
        rho[(a, a)] = ONE;
        Self { n_spins, rho }
    }

    pub fn pure(n_spins: usize, psi: &CVector) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(Error::Input("zero state vector".into()));
        }
        Self::new(n_spins, linalg::projector(&(psi / Complex64::new(norm, 0.0))))
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn rho(&self) -> &CMatrix {
        &self.rho
    }

    pub fn into_inner(self) -> CMatrix {
        self.rho
    }
}

pub(crate) fn validate_density(rho: &CMatrix) -> Result<()> {
    let herm = linalg::hermiticity_error(rho);
    if herm > STATE_HERMITICITY_TOLERANCE {
        return Err(Error::Input(format!("density matrix not Hermitian (error {herm:e})")));
    }
    let tr = linalg::trace(rho);
    if (tr - ONE).norm() > STATE_TRACE_TOLERANCE {
        return Err(Error::Input(format!("density matrix trace is {tr}, expected 1")));
    }
    let min = linalg::min_eigenvalue(rho);
    if min < STATE_EIGENVALUE_FLOOR {
        return Err(Error::Input(format!("density matrix has eigenvalue {min:e}")));
    }
    Ok(())
}

/// Triplets of the XY coupling `Σ_{j<k} c_jk (σ_+^j σ_-^k + σ_-^j σ_+^k)`.
fn coupling_triplets(net: &NetworkSpec) -> Vec<(usize, usize, Complex64)> {
    let n = net.n_spins();
    let d = 1usize << n;
    let c = net.coupling();
    let mut t = Vec::new();
    for j in 0..n {
        for k in (j + 1)..n {
            let cjk = c[(j, k)];
            if cjk == 0.0 {
                continue;
            }
            let mask = bit(n, j) | bit(n, k);
            for a in 0..d {
                // Hop only between states where exactly one of the pair is up.
                if is_up(a, n, j) != is_up(a, n, k) {
                    t.push((a ^ mask, a, Complex64::new(cjk, 0.0)));
                }
            }
        }
    }
    t
}

fn zeeman_triplets(net: &NetworkSpec) -> Vec<(usize, usize, Complex64)> {
    let n = net.n_spins();
    let w = net.omega_q();
    (0..1usize << n)
        .map(|a| {
            let ups = a.count_ones() as f64;
            (a, a, Complex64::new(w * (2.0 * ups - n as f64), 0.0))
        })
        .collect()
}

/// Sparse system Hamiltonian in the requested frame.
pub fn hamiltonian_sparse(net: &NetworkSpec, frame: Frame) -> SparseMatrix {
    let mut t = coupling_triplets(net);
    if frame == Frame::Lab {
        t.extend(zeeman_triplets(net));
    }
    SparseMatrix::from_triplets(1 << net.n_spins(), t)
}

/// Lab-frame `H = Σ_j ω_q σ_z^{(j)} + Σ_{j<k} (c_jk/2)(σ_x σ_x + σ_y σ_y)`.
pub fn build_hamiltonian_full(net: &NetworkSpec, cap: usize) -> Result<CMatrix> {
    check_cap(net.n_spins(), cap)?;
    Ok(hamiltonian_sparse(net, Frame::Lab).to_dense())
}

/// `W_jk = a_j a_k c K_jk`.
fn weighted_kernel(amplitudes: &[f64], kernel: &CorrelationKernel, c: f64) -> DMatrix<f64> {
    let n = amplitudes.len();
    DMatrix::from_fn(n, n, |j, k| amplitudes[j] * amplitudes[k] * c * kernel.get(j, k))
}

/// Coherence decay rates `Λ_ab = ½ (z_a − z_b)ᵀ W (z_a − z_b)`, column-major.
fn dephasing_rates(n: usize, w: &DMatrix<f64>) -> Vec<f64> {
    let d = 1usize << n;
    let mut rates = vec![0.0; d * d];
    let mut flipped: Vec<(usize, f64)> = Vec::with_capacity(n);
    for b in 0..d {
        for a in 0..d {
            let diff = a ^ b;
            if diff == 0 {
                continue;
            }
            flipped.clear();
            for j in 0..n {
                if diff & bit(n, j) != 0 {
                    flipped.push((j, if is_up(a, n, j) { 1.0 } else { -1.0 }));
                }
            }
            let mut s = 0.0;
            for &(j, sj) in &flipped {
                for &(k, sk) in &flipped {
                    s += sj * sk * w[(j, k)];
                }
            }
            // Δz entries are ±2, so ½ΔzᵀWΔz = 2 Σ s_j s_k W_jk.
            rates[b * d + a] = 2.0 * s;
        }
    }
    rates
}

/// `A = Σ_jk M_jk σ_+^j σ_-^k` (or with `σ_+ ↔ σ_-` when `raising`).
fn anticommutator_operator(n: usize, m: &DMatrix<f64>, raising: bool) -> SparseMatrix {
    let d = 1usize << n;
    let mut t = Vec::new();
    for j in 0..n {
        for k in 0..n {
            let mjk = m[(j, k)];
            if mjk == 0.0 {
                continue;
            }
            for b in 0..d {
                // Lowering spin k then raising spin j (mirrored for `raising`).
                let (first_ok, second_ok) = if raising {
                    (!is_up(b, n, k), true)
                } else {
                    (is_up(b, n, k), true)
                };
                if !(first_ok && second_ok) {
                    continue;
                }
                let mid = b ^ bit(n, k);
                let ok = if raising { is_up(mid, n, j) } else { !is_up(mid, n, j) };
                if ok {
                    t.push((mid ^ bit(n, j), b, Complex64::new(mjk, 0.0)));
                }
            }
        }
    }
    SparseMatrix::from_triplets(d, t)
}

/// Adds `Σ_jk M_jk σ_-^k ρ σ_+^j` (or the raising version) to `out`.
fn add_jump_terms(n: usize, m: &DMatrix<f64>, raising: bool, rho: &CMatrix, out: &mut CMatrix) {
    let d = 1usize << n;
    let pairs: Vec<(usize, usize, f64)> = (0..n)
        .flat_map(|j| (0..n).map(move |k| (j, k)))
        .filter_map(|(j, k)| (m[(j, k)] != 0.0).then(|| (j, k, m[(j, k)])))
        .collect();
    if pairs.is_empty() {
        return;
    }
    let src = rho.as_slice();
    let dst = out.as_mut_slice();
    for b in 0..d {
        for a in 0..d {
            let mut acc = ZERO;
            for &(j, k, mjk) in &pairs {
                // Lowering: a must have k down, b must have j down; source is (a|k, b|j).
                // Raising: a must have k up, b must have j up; source is (a&!k, b&!j).
                let (ak, bj) = (is_up(a, n, k), is_up(b, n, j));
                if raising == ak && raising == bj {
                    let r = a ^ bit(n, k);
                    let c = b ^ bit(n, j);
                    acc += src[c * d + r] * mjk;
                }
            }
            dst[b * d + a] += acc;
        }
    }
}

/// The dephasing contribution `Σ_jk v_j v_k C_∥ K_jk (σ_z^k ρ σ_z^j − ½{σ_z^j σ_z^k, ρ})`.
pub fn apply_dephasing_dissipator(
    rho: &CMatrix,
    net: &NetworkSpec,
    kernel: &CorrelationKernel,
    noise: &NoiseSpec,
) -> Result<CMatrix> {
    let n = net.n_spins();
    check_dims(rho, net, kernel)?;
    let w = weighted_kernel(net.dephasing_couplings(), kernel, noise.c_dephasing);
    let rates = dephasing_rates(n, &w);
    let d = rho.nrows();
    Ok(CMatrix::from_fn(d, d, |a, b| -rho[(a, b)] * rates[b * d + a]))
}

/// The relaxation contribution
/// `Σ_jk ν_j ν_k C_⊥ K_jk (σ_-^k ρ σ_+^j − ½{σ_+^j σ_-^k, ρ})` plus the mirrored
/// upward term weighted by `c_relax_up`.
pub fn apply_relaxation_dissipator(
    rho: &CMatrix,
    net: &NetworkSpec,
    kernel: &CorrelationKernel,
    noise: &NoiseSpec,
) -> Result<CMatrix> {
    let n = net.n_spins();
    check_dims(rho, net, kernel)?;
    let d = rho.nrows();
    let mut out = CMatrix::zeros(d, d);
    let mut y = CMatrix::zeros(d, d);
    for (c, raising) in [(noise.c_relax_down, false), (noise.c_relax_up, true)] {
        if c == 0.0 {
            continue;
        }
        let m = weighted_kernel(net.relaxation_couplings(), kernel, c);
        let g = anticommutator_operator(n, &m, raising).scale(Complex64::new(-0.5, 0.0));
        let mut part = CMatrix::zeros(d, d);
        g.rho_times_adjoint(rho, &mut y);
        add_adjoint_into(&y, &mut part);
        add_jump_terms(n, &m, raising, rho, &mut part);
        out += part;
    }
    Ok(out)
}

fn check_dims(rho: &CMatrix, net: &NetworkSpec, kernel: &CorrelationKernel) -> Result<()> {
    let n = net.n_spins();
    let d = 1usize << n;
    if rho.nrows() != d || rho.ncols() != d {
        return Err(Error::Dimension { expected: d, got: rho.nrows() });
    }
    if kernel.n() != n {
        return Err(Error::Dimension { expected: n, got: kernel.n() });
    }
    Ok(())
}

/// Generator of the full master equation.
#[derive(Debug, Clone)]
pub struct FullLiouvillian {
    n: usize,
    frame: Frame,
    /// `−iH − ½A_↓ − ½A_↑`, so the non-jump part is `Gρ + ρG†`.
    generator: SparseMatrix,
    dephasing: Vec<f64>,
    relax_down: Option<DMatrix<f64>>,
    relax_up: Option<DMatrix<f64>>,
    rate_bound: f64,
    smallest_rate: Option<f64>,
}

impl FullLiouvillian {
    pub fn new(
        net: &NetworkSpec,
        kernel: &CorrelationKernel,
        noise: &NoiseSpec,
        frame: Frame,
        cap: usize,
    ) -> Result<Self> {
        let n = net.n_spins();
        check_cap(n, cap)?;
        noise.validate()?;
        if kernel.n() != n {
            return Err(Error::Dimension { expected: n, got: kernel.n() });
        }
        let h = hamiltonian_sparse(net, frame);
        let mut generator = h.scale(-I);
        let mut dissipative_bound = 0.0;
        let mut relaxation_rates = Vec::new();

        let w = weighted_kernel(net.dephasing_couplings(), kernel, noise.c_dephasing);
        let dephasing = dephasing_rates(n, &w);
        let max_dephasing = dephasing.iter().copied().fold(0.0, f64::max);
        dissipative_bound += max_dephasing;

        let mut relax = |c: f64, raising: bool| -> Option<DMatrix<f64>> {
            if c == 0.0 {
                return None;
            }
            let m = weighted_kernel(net.relaxation_couplings(), kernel, c);
            let a = anticommutator_operator(n, &m, raising);
            dissipative_bound += a.max_row_sum() + m.iter().map(|x| x.abs()).sum::<f64>();
            generator = generator.add(&a.scale(Complex64::new(-0.5, 0.0)));
            relaxation_rates.extend(SymmetricEigen::new(m.clone()).eigenvalues.iter().copied());
            Some(m)
        };
        let relax_down = relax(noise.c_relax_down, false);
        let relax_up = relax(noise.c_relax_up, true);

        let rate_bound = 2.0 * h.max_row_sum() + dissipative_bound;
        let max_rate = dephasing.iter().chain(&relaxation_rates).copied().fold(0.0, f64::max);
        let smallest_rate = dephasing
            .iter()
            .chain(&relaxation_rates)
            .copied()
            .filter(|&r| r > 1e-12 * max_rate)
            .min_by(|a, b| a.total_cmp(b));

        Ok(Self {
            n,
            frame,
            generator,
            dephasing,
            relax_down,
            relax_up,
            rate_bound,
            smallest_rate,
        })
    }

    pub fn n_spins(&self) -> usize {
        self.n
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    /// `⟨σ_-^{(j)}⟩` per site in the propagation frame.
    pub fn sigma_minus(&self, rho: &CMatrix) -> Vec<Complex64> {
        sigma_minus(self.n, rho)
    }
}

pub fn sigma_minus(n: usize, rho: &CMatrix) -> Vec<Complex64> {
    let d = 1usize << n;
    (0..n)
        .map(|j| {
            (0..d).filter(|&a| !is_up(a, n, j)).map(|a| rho[(a | bit(n, j), a)]).sum::<Complex64>()
        })
        .collect()
}

/// Lab-frame `⟨σ_x⟩` from a rotating-frame `⟨σ_-⟩` at time `t`.
pub fn lab_frame_sx(sigma_minus_rotating: Complex64, omega_q: f64, t: f64) -> f64 {
    let phase = Complex64::from_polar(1.0, -2.0 * omega_q * t);
    2.0 * (sigma_minus_rotating * phase).re
}

pub fn site_sz(n: usize, rho: &CMatrix) -> Vec<f64> {
    let d = 1usize << n;
    (0..n)
        .map(|j| {
            (0..d).map(|a| if is_up(a, n, j) { rho[(a, a)].re } else { -rho[(a, a)].re }).sum()
        })
        .collect()
}

impl MasterEquation for FullLiouvillian {
    fn dim(&self) -> usize {
        1 << self.n
    }

    fn apply(&self, rho: &CMatrix, out: &mut CMatrix) {
        let d = self.dim();
        let mut y = CMatrix::zeros(d, d);
        self.generator.rho_times_adjoint(rho, &mut y);
        add_adjoint_into(&y, out);
        let src = rho.as_slice();
        for (o, (r, s)) in out.as_mut_slice().iter_mut().zip(self.dephasing.iter().zip(src)) {
            *o -= s * *r;
        }
        if let Some(m) = &self.relax_down {
            add_jump_terms(self.n, m, false, rho, out);
        }
        if let Some(m) = &self.relax_up {
            add_jump_terms(self.n, m, true, rho, out);
        }
    }

    fn rate_bound(&self) -> f64 {
        self.rate_bound
    }

    fn smallest_decay_rate(&self) -> Option<f64> {
        self.smallest_rate
    }

    fn observe(&self, rho: &CMatrix) -> Observables {
        Observables {
            sz: site_sz(self.n, rho),
            abs_sx: sigma_minus(self.n, rho).iter().map(|s| 2.0 * s.norm()).collect(),
            purity: linalg::purity(rho),
        }
    }

    fn excitation_number(&self, rho: &CMatrix) -> f64 {
        (0..self.dim()).map(|a| a.count_ones() as f64 * rho[(a, a)].re).sum()
    }
}

/// Runs the full engine and returns samples plus the validated final state.
pub fn evolve_full(
    rho0: &FullState,
    liouvillian: &FullLiouvillian,
    opts: &EvolveOptions,
) -> Result<(TimeSeries, FullState)> {
    if rho0.n_spins() != liouvillian.n_spins() {
        return Err(Error::Dimension { expected: liouvillian.n_spins(), got: rho0.n_spins() });
    }
    let (series, rho) = integrate::evolve(liouvillian, rho0.rho(), opts)?;
    Ok((series, FullState { n_spins: rho0.n_spins(), rho }))
}

/// Restriction to `{|1⟩, …, |N⟩, |g⟩}`.
pub fn project_to_reduced(n: usize, rho: &CMatrix) -> CMatrix {
    let idx: Vec<usize> = (0..n).map(|j| bit(n, j)).chain(std::iter::once(0)).collect();
    CMatrix::from_fn(n + 1, n + 1, |r, c| rho[(idx[r], idx[c])])
}

/// Inverse of [`project_to_reduced`]: zero outside the reduced sector.
pub fn embed_reduced(n: usize, reduced: &CMatrix) -> CMatrix {
    let d = 1usize << n;
    let idx: Vec<usize> = (0..n).map(|j| bit(n, j)).chain(std::iter::once(0)).collect();
    let mut rho = CMatrix::zeros(d, d);
    for (r, &ir) in idx.iter().enumerate() {
        for (c, &ic) in idx.iter().enumerate() {
            rho[(ir, ic)] = reduced[(r, c)];
        }
    }
    rho
}
