//! Spin network, noise environment and spatial correlation kernel.
//!
//! Lengths are measured in units of the inter-spin distance `d`, energies in
//! units with ħ = 1.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Kernel entries below this are flushed to zero.
pub const KERNEL_FLUSH: f64 = 1e-15;

/// Relative tolerance on negative kernel eigenvalues.
pub const PSD_TOLERANCE: f64 = 1e-12;

/// Static description of a spin network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    omega_q: f64,
    coupling: DMatrix<f64>,
    positions: Vec<f64>,
    dephasing_couplings: Vec<f64>,
    relaxation_couplings: Vec<f64>,
}

impl NetworkSpec {
    pub fn new(
        omega_q: f64,
        coupling: DMatrix<f64>,
        positions: Vec<f64>,
        dephasing_couplings: Vec<f64>,
        relaxation_couplings: Vec<f64>,
    ) -> Result<Self> {
        let n = coupling.nrows();
        if n == 0 {
            return Err(Error::Input("network needs at least one spin".into()));
        }
        if coupling.ncols() != n {
            return Err(Error::Input(format!(
                "coupling matrix must be square, got {}x{}",
                n,
                coupling.ncols()
            )));
        }
        if !(omega_q.is_finite() && omega_q > 0.0) {
            return Err(Error::Input(format!("omega_q must be positive, got {omega_q}")));
        }
        for (name, arr) in [
            ("positions", &positions),
            ("dephasing_couplings", &dephasing_couplings),
            ("relaxation_couplings", &relaxation_couplings),
        ] {
            if arr.len() != n {
                return Err(Error::Dimension { expected: n, got: arr.len() });
            }
            if arr.iter().any(|x| !x.is_finite()) {
                return Err(Error::Input(format!("{name} contains a non-finite value")));
            }
        }
        if dephasing_couplings.iter().chain(&relaxation_couplings).any(|&x| x < 0.0) {
            return Err(Error::Input("bath couplings must be non-negative".into()));
        }
        for j in 0..n {
            if coupling[(j, j)] != 0.0 {
                return Err(Error::Input(format!("coupling diagonal ({j},{j}) must be zero")));
            }
            for k in 0..j {
                let (a, b) = (coupling[(j, k)], coupling[(k, j)]);
                if !a.is_finite() || a != b {
                    return Err(Error::Input(format!(
                        "coupling must be finite and symmetric at ({j},{k})"
                    )));
                }
            }
        }
        Ok(Self { omega_q, coupling, positions, dephasing_couplings, relaxation_couplings })
    }

    /// Perfect-state-transfer chain with `g_j = g√(j(N−j))`, unit spacing and
    /// uniform bath couplings `v` (dephasing) and `nu` (relaxation).
    pub fn pst_chain(n_spins: usize, omega_q: f64, g: f64, v: f64, nu: f64) -> Result<Self> {
        let coupling = chain_coupling_profile(n_spins, g)?;
        Self::new(
            omega_q,
            coupling,
            default_positions(n_spins),
            vec![v; n_spins],
            vec![nu; n_spins],
        )
    }

    /// Spins sharing one bath but with no coherent coupling between them.
    pub fn uncoupled(n_spins: usize, omega_q: f64, v: f64, nu: f64) -> Result<Self> {
        Self::new(
            omega_q,
            DMatrix::zeros(n_spins, n_spins),
            default_positions(n_spins),
            vec![v; n_spins],
            vec![nu; n_spins],
        )
    }

    pub fn with_relaxation_couplings(mut self, nu: Vec<f64>) -> Result<Self> {
        self.relaxation_couplings = nu;
        Self::new(
            self.omega_q,
            self.coupling,
            self.positions,
            self.dephasing_couplings,
            self.relaxation_couplings,
        )
    }

    pub fn with_dephasing_couplings(mut self, v: Vec<f64>) -> Result<Self> {
        self.dephasing_couplings = v;
        Self::new(
            self.omega_q,
            self.coupling,
            self.positions,
            self.dephasing_couplings,
            self.relaxation_couplings,
        )
    }

    pub fn n_spins(&self) -> usize {
        self.coupling.nrows()
    }

    pub fn omega_q(&self) -> f64 {
        self.omega_q
    }

    pub fn coupling(&self) -> &DMatrix<f64> {
        &self.coupling
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn dephasing_couplings(&self) -> &[f64] {
        &self.dephasing_couplings
    }

    pub fn relaxation_couplings(&self) -> &[f64] {
        &self.relaxation_couplings
    }

    pub fn is_uncoupled(&self) -> bool {
        self.coupling.iter().all(|&c| c == 0.0)
    }

    /// Recovers `g` when the coupling matrix is the perfect-transfer profile.
    pub fn pst_rate(&self) -> Option<f64> {
        let n = self.n_spins();
        if n < 2 {
            return None;
        }
        let g = self.coupling[(0, 1)] / ((n - 1) as f64).sqrt();
        if g <= 0.0 {
            return None;
        }
        let expected = chain_coupling_profile(n, g).ok()?;
        let scale = expected.amax();
        let matches = self
            .coupling
            .iter()
            .zip(expected.iter())
            .all(|(a, b)| (a - b).abs() <= 1e-12 * scale);
        matches.then_some(g)
    }
}

/// `x_j = j` for zero-based site `j`.
pub fn default_positions(n_spins: usize) -> Vec<f64> {
    (0..n_spins).map(|j| j as f64).collect()
}

/// Noise environment shared by all spins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Correlation length in units of `d`. `0` is uncorrelated, `f64::INFINITY`
    /// perfectly correlated.
    pub xi: f64,
    /// Zero-frequency longitudinal spectral amplitude.
    pub c_dephasing: f64,
    /// Downward transversal amplitude at the level splitting.
    pub c_relax_down: f64,
    /// Upward transversal amplitude; zero for a vacuum bath.
    pub c_relax_up: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { xi: 0.0, c_dephasing: 0.0, c_relax_down: 0.0, c_relax_up: 0.0 }
    }
}

impl NoiseSpec {
    pub fn dephasing(xi: f64, c_dephasing: f64) -> Self {
        Self { xi, c_dephasing, ..Self::default() }
    }

    pub fn relaxation(xi: f64, c_relax_down: f64) -> Self {
        Self { xi, c_relax_down, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.xi.is_nan() || self.xi < 0.0 {
            return Err(Error::Input(format!("xi must be >= 0, got {}", self.xi)));
        }
        for (name, c) in [
            ("c_dephasing", self.c_dephasing),
            ("c_relax_down", self.c_relax_down),
            ("c_relax_up", self.c_relax_up),
        ] {
            if !(c.is_finite() && c >= 0.0) {
                return Err(Error::Input(format!("{name} must be finite and >= 0, got {c}")));
            }
        }
        Ok(())
    }
}

/// Normalised spatial correlation matrix `K_jk = C(|x_j − x_k|) / C(0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationKernel {
    k: DMatrix<f64>,
}

impl CorrelationKernel {
    pub fn identity(n: usize) -> Self {
        Self { k: DMatrix::identity(n, n) }
    }

    pub fn all_ones(n: usize) -> Self {
        Self { k: DMatrix::from_element(n, n, 1.0) }
    }

    /// Wraps an arbitrary matrix after checking the kernel invariants.
    pub fn from_matrix(k: DMatrix<f64>) -> Result<Self> {
        let n = k.nrows();
        if k.ncols() != n {
            return Err(Error::Input("kernel must be square".into()));
        }
        for j in 0..n {
            if k[(j, j)] != 1.0 {
                return Err(Error::Input(format!("kernel diagonal ({j},{j}) must be 1")));
            }
            for i in 0..j {
                let v = k[(i, j)];
                if v != k[(j, i)] || !(0.0..=1.0).contains(&v) {
                    return Err(Error::Input(format!(
                        "kernel entry ({i},{j}) must be symmetric and in [0, 1]"
                    )));
                }
            }
        }
        let kernel = Self { k };
        kernel.check_psd()?;
        Ok(kernel)
    }

    pub fn n(&self) -> usize {
        self.k.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.k[(j, k)]
    }

    pub fn max_off_diagonal(&self) -> f64 {
        let n = self.n();
        let mut m = 0.0_f64;
        for j in 0..n {
            for k in 0..n {
                if j != k {
                    m = m.max(self.k[(j, k)]);
                }
            }
        }
        m
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.k.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    /// Errors if the smallest eigenvalue is below `−1e−12 · max eigenvalue`.
    pub fn check_psd(&self) -> Result<()> {
        let ev = self.eigenvalues();
        let (min, max) = (ev[0], ev[ev.len() - 1]);
        if min < -PSD_TOLERANCE * max.abs().max(1.0) {
            return Err(Error::NumericalPsd { min_eigenvalue: min });
        }
        Ok(())
    }
}

/// Gaussian kernel `K_jk = 2^{−((x_j − x_k)/ξ)²}`.
///
/// `ξ = 0` gives the identity exactly, `ξ = ∞` the all-ones matrix.
pub fn build_kernel(positions: &[f64], xi: f64) -> Result<CorrelationKernel> {
    if positions.iter().any(|x| !x.is_finite()) {
        return Err(Error::Input("positions must be finite".into()));
    }
    if xi.is_nan() || xi < 0.0 {
        return Err(Error::Input(format!("xi must be >= 0, got {xi}")));
    }
    let n = positions.len();
    if xi == 0.0 {
        return Ok(CorrelationKernel::identity(n));
    }
    if xi.is_infinite() {
        return Ok(CorrelationKernel::all_ones(n));
    }
    let k = DMatrix::from_fn(n, n, |j, k| {
        if j == k {
            return 1.0;
        }
        let r = (positions[j] - positions[k]) / xi;
        let v = (-r * r).exp2();
        if v < KERNEL_FLUSH {
            0.0
        } else {
            v
        }
    });
    Ok(CorrelationKernel { k })
}

/// Tridiagonal perfect-transfer coupling with bond `(j, j+1)` equal to
/// `g√(j(N−j))` for one-based `j`.
pub fn chain_coupling_profile(n_spins: usize, g: f64) -> Result<DMatrix<f64>> {
    if n_spins < 2 {
        return Err(Error::Input(format!("chain needs at least 2 spins, got {n_spins}")));
    }
    if !(g.is_finite() && g > 0.0) {
        return Err(Error::Input(format!("g must be positive, got {g}")));
    }
    let n = n_spins;
    let mut c = DMatrix::zeros(n, n);
    for j in 1..n {
        let gj = g * ((j * (n - j)) as f64).sqrt();
        c[(j - 1, j)] = gj;
        c[(j, j - 1)] = gj;
    }
    Ok(c)
}
