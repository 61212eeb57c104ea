//! Closed-form subspace constructions, transfer metrics and curve fits.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::integrate::TimeSeries;
use crate::linalg::{self, CMatrix, CVector};
use crate::model::{CorrelationKernel, NetworkSpec, NoiseSpec};

/// Largest `|K_jk − 1|` accepted as a perfectly correlated kernel.
pub const ALL_ONES_TOLERANCE: f64 = 1e-6;

/// Relative amplitude below which the fast strobe component counts as gone.
pub const CROSSOVER_FRACTION: f64 = 0.05;

/// Stationary states and the single decaying state of perfectly correlated
/// relaxation, in the single-excitation basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryBasis {
    /// `N − 1` unnormalised states `ν_j|p⟩ − ν_p|j⟩`, `p` the first site with
    /// `ν_p ≠ 0`, `j` running over the other sites.
    pub states: Vec<DVector<f64>>,
    /// `Σ_j ν_j|j⟩`, normalised.
    pub decaying: DVector<f64>,
    /// Orthonormal basis of `span{states}`.
    pub orthonormal: Vec<DVector<f64>>,
}

impl StationaryBasis {
    /// Orthogonal projection onto the stationary span.
    pub fn project(&self, psi: &DVector<f64>) -> DVector<f64> {
        self.orthonormal
            .iter()
            .fold(DVector::zeros(psi.len()), |acc, e| acc + e * e.dot(psi))
    }
}

pub fn stationary_subspace(relaxation_couplings: &[f64]) -> Result<StationaryBasis> {
    let nu = relaxation_couplings;
    let n = nu.len();
    if n == 0 {
        return Err(Error::Input("empty coupling vector".into()));
    }
    if nu.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::Input("relaxation couplings must be finite and >= 0".into()));
    }
    let pivot = nu.iter().position(|&x| x > 0.0).ok_or_else(|| {
        Error::Degenerate("all relaxation couplings vanish; every state is stationary".into())
    })?;
    let decaying = DVector::from_column_slice(nu).normalize();
    let states: Vec<DVector<f64>> = (0..n)
        .filter(|&j| j != pivot)
        .map(|j| {
            let mut s = DVector::zeros(n);
            s[pivot] = nu[j];
            s[j] = -nu[pivot];
            s
        })
        .collect();
    let mut orthonormal: Vec<DVector<f64>> = Vec::with_capacity(states.len());
    for s in &states {
        let mut v = s.clone();
        // Two passes keep the basis orthogonal to machine precision.
        for _ in 0..2 {
            for e in &orthonormal {
                v -= e * e.dot(&v);
            }
        }
        let norm = v.norm();
        if norm <= 1e-12 * s.norm() {
            return Err(Error::Degenerate("stationary states are linearly dependent".into()));
        }
        orthonormal.push(v / norm);
    }
    Ok(StationaryBasis { states, decaying, orthonormal })
}

/// Long-time state of `|1⟩` under perfectly correlated relaxation of
/// uncoupled spins, with the derived scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalStatePrediction {
    /// Reduced-basis density matrix, ground state last.
    pub rho: CMatrix,
    /// `⟨σ_z^{(1)}⟩(∞)`.
    pub sz_first: f64,
    /// `⟨S_z⟩(∞) + n`, twice the surviving excitation.
    pub sz_total_plus_n: f64,
    /// Excitation that ended up on spins other than the first, `⟨S_z⟩ + n − (⟨σ_z^{(1)}⟩ + 1)`.
    pub transferred: f64,
}

pub fn kernel_is_all_ones(kernel: &CorrelationKernel) -> bool {
    kernel.matrix().iter().all(|&k| (k - 1.0).abs() <= ALL_ONES_TOLERANCE)
}

pub fn predict_final_state(
    net: &NetworkSpec,
    kernel: &CorrelationKernel,
    noise: &NoiseSpec,
) -> Result<FinalStatePrediction> {
    if !net.is_uncoupled() {
        return Err(Error::Contract("prediction requires uncoupled spins".into()));
    }
    if !kernel_is_all_ones(kernel) {
        return Err(Error::Contract("prediction requires a perfectly correlated kernel".into()));
    }
    if noise.c_relax_up != 0.0 {
        return Err(Error::Contract("prediction requires zero upward relaxation".into()));
    }
    let nu = net.relaxation_couplings();
    let n = nu.len();
    let basis = stationary_subspace(nu)?;
    let overlap = basis.decaying[0];
    let mut ps = -&basis.decaying * overlap;
    ps[0] += 1.0;

    let mut rho = CMatrix::zeros(n + 1, n + 1);
    for r in 0..n {
        for c in 0..n {
            rho[(r, c)] = Complex64::new(ps[r] * ps[c], 0.0);
        }
    }
    rho[(n, n)] = Complex64::new(overlap * overlap, 0.0);

    let total: f64 = nu.iter().map(|x| x * x).sum();
    let rest = total - nu[0] * nu[0];
    let sz_first = -1.0 + 2.0 * rest * rest / (total * total);
    let sz_total_plus_n = 2.0 - 2.0 * nu[0] * nu[0] / total;
    let transferred = sz_total_plus_n - (sz_first + 1.0);
    Ok(FinalStatePrediction { rho, sz_first, sz_total_plus_n, transferred })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferReport {
    pub quality: f64,
    pub packet_halfwidth: f64,
    pub xi: f64,
}

/// Arrival time `π/(2g)` of a chain built with the transfer profile.
pub fn arrival_time(net: &NetworkSpec) -> Result<f64> {
    net.pst_rate()
        .map(|g| PI / (2.0 * g))
        .ok_or_else(|| Error::Contract("coupling matrix is not a transfer chain profile".into()))
}

/// End-site `⟨σ_z⟩` at `t = π/(2g)`.
pub fn transfer_quality(series: &TimeSeries, net: &NetworkSpec) -> Result<f64> {
    let t = arrival_time(net)?;
    let tol = series.dt.map_or(1e-12, |dt| 0.5 * dt);
    let idx = series.index_near(t, tol).ok_or(Error::SamplingGrid { requested: t })?;
    let sample = &series.samples[idx];
    sample
        .sz
        .last()
        .copied()
        .ok_or_else(|| Error::Input("sample has no sites".into()))
}

/// Excitation profile `(⟨σ_z^{(j)}⟩ + 1)/2`.
pub fn excitation_profile(sz: &[f64]) -> Vec<f64> {
    sz.iter().map(|s| 0.5 * (s + 1.0)).collect()
}

/// Half width at half maximum of a site profile, in sites.
///
/// The crossing on each side of the maximum is located by linear
/// interpolation between neighbouring sites; the result is half the distance
/// between the two crossings. If only one side crosses, that side's distance
/// is returned. A flat profile, or one with no crossing at all, yields
/// [`Error::UndefinedWidth`] carrying the fallback `N/2`.
pub fn packet_halfwidth(profile: &[f64]) -> Result<f64> {
    let n = profile.len();
    if n == 0 {
        return Err(Error::Input("empty profile".into()));
    }
    if profile.iter().any(|p| !p.is_finite() || *p < -1e-9) {
        return Err(Error::Input("profile must be finite and nonnegative".into()));
    }
    let undefined = Error::UndefinedWidth { sites: n as f64 / 2.0 };
    let (imax, &pmax) = profile
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let pmin = profile.iter().copied().fold(f64::INFINITY, f64::min);
    if pmax - pmin <= 1e-9 * pmax.max(1e-300) {
        return Err(undefined);
    }
    let half = 0.5 * pmax;
    let side = |step: isize| -> Option<f64> {
        let mut j = imax as isize;
        loop {
            let next = j + step;
            if next < 0 || next >= n as isize {
                return None;
            }
            let (pj, pn) = (profile[j as usize], profile[next as usize]);
            if pn <= half {
                let f = (pj - half) / (pj - pn);
                return Some(((j - imax as isize) as f64 + step as f64 * f).abs());
            }
            j = next;
        }
    };
    match (side(-1), side(1)) {
        (Some(l), Some(r)) => Ok(0.5 * (l + r)),
        (Some(w), None) | (None, Some(w)) => Ok(w),
        (None, None) => Err(undefined),
    }
}

/// Position of the steepest rise of a quality curve.
///
/// The gradient is taken with respect to `ln ξ` (the sweep grid is
/// logarithmic), the maximum is refined by a parabola through the gradient at
/// the maximum and its two neighbours.
pub fn critical_xi(curve: &[(f64, f64)]) -> Result<f64> {
    if curve.len() < 8 {
        return Err(Error::Extraction(format!("need at least 8 sweep points, got {}", curve.len())));
    }
    let mut pts = curve.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pts.iter().any(|(x, q)| !(x.is_finite() && *x > 0.0 && q.is_finite())) {
        return Err(Error::Extraction("sweep points need finite ξ > 0 and finite quality".into()));
    }
    if pts.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::Extraction("duplicate ξ values".into()));
    }
    let x: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let q: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let grad = gradient(&x, &q);

    let (imax, &gmax) = grad
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let rise = q[q.len() - 1] - q[0];
    let span = q.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - q.iter().copied().fold(f64::INFINITY, f64::min);
    if gmax <= 0.0 || rise < 0.5 * span || span < 1e-3 {
        return Err(Error::Extraction("quality curve shows no rising step".into()));
    }
    let peak = if imax == 0 || imax + 1 == grad.len() {
        x[imax]
    } else {
        parabola_vertex(
            (x[imax - 1], grad[imax - 1]),
            (x[imax], grad[imax]),
            (x[imax + 1], grad[imax + 1]),
        )
        .filter(|v| *v >= x[imax - 1] && *v <= x[imax + 1])
        .unwrap_or(x[imax])
    };
    Ok(peak.exp())
}

/// Second-order finite differences on a nonuniform grid, one-sided at the ends.
pub fn gradient(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    assert!(n >= 2 && y.len() == n);
    (0..n)
        .map(|i| {
            if i == 0 {
                (y[1] - y[0]) / (x[1] - x[0])
            } else if i == n - 1 {
                (y[n - 1] - y[n - 2]) / (x[n - 1] - x[n - 2])
            } else {
                let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
                (h0 * h0 * y[i + 1] - h1 * h1 * y[i - 1] + (h1 * h1 - h0 * h0) * y[i])
                    / (h0 * h1 * (h0 + h1))
            }
        })
        .collect()
}

fn parabola_vertex(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> Option<f64> {
    let denom = (a.0 - b.0) * (a.0 - c.0) * (b.0 - c.0);
    let qa = (c.0 * (b.1 - a.1) + b.0 * (a.1 - c.1) + a.0 * (c.1 - b.1)) / denom;
    let qb = (c.0 * c.0 * (a.1 - b.1) + b.0 * b.0 * (c.1 - a.1) + a.0 * a.0 * (b.1 - c.1)) / denom;
    (qa < 0.0).then(|| -qb / (2.0 * qa))
}

/// Kernel limit used by [`rate_oracle`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelLimit {
    Uncorrelated,
    PerfectlyCorrelated,
}

/// Predicted decay rate of `|a⟩⟨b|` for computational basis states given as
/// sets of up spins: `n_f γ` uncorrelated, `n_e² γ` perfectly correlated.
pub fn rate_oracle(a_up: &[usize], b_up: &[usize], limit: KernelLimit, gamma: f64) -> f64 {
    let in_a = |j: &usize| a_up.contains(j);
    let in_b = |j: &usize| b_up.contains(j);
    let flipped = a_up.iter().filter(|j| !in_b(j)).count() + b_up.iter().filter(|j| !in_a(j)).count();
    let excitation_diff = a_up.len().abs_diff(b_up.len());
    match limit {
        KernelLimit::Uncorrelated => flipped as f64 * gamma,
        KernelLimit::PerfectlyCorrelated => (excitation_diff * excitation_diff) as f64 * gamma,
    }
}

/// `½|Ψ⟩⟨Ψ| + ½|g⟩⟨g|` with `Ψ = (|1⟩ + sign·|N⟩)/√2` in the reduced basis.
pub fn intermediate_mixture(n_spins: usize, sign: f64) -> CMatrix {
    let mut psi = CVector::zeros(n_spins + 1);
    psi[0] = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    psi[n_spins - 1] += Complex64::new(sign * std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut rho = linalg::projector(&psi) * Complex64::new(0.5, 0.0);
    rho[(n_spins, n_spins)] += Complex64::new(0.5, 0.0);
    rho
}

/// Least-squares line with coefficient of determination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(Error::Fit("linear fit needs at least two paired points".into()));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(LinearFit { slope, intercept, r_squared })
}

/// `A e^{−a m} + B e^{−b m}` fitted in log space, `a ≥ b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoExpFit {
    pub fast_amplitude: f64,
    pub fast_rate: f64,
    pub slow_amplitude: f64,
    pub slow_rate: f64,
    /// Sum of squared log residuals.
    pub sse: f64,
    /// Residual of the best single exponential.
    pub single_sse: f64,
    /// Split index of the piecewise-linear seed.
    pub breakpoint: usize,
    /// The data are described by one exponential; both rates then equal the
    /// single-exponential rate.
    pub collapsed: bool,
}

impl TwoExpFit {
    /// `slow / fast`; exactly 1 when collapsed.
    pub fn rate_ratio(&self) -> f64 {
        if self.collapsed {
            1.0
        } else {
            self.slow_rate / self.fast_rate
        }
    }

    pub fn eval(&self, m: f64) -> f64 {
        self.fast_amplitude * (-self.fast_rate * m).exp() + self.slow_amplitude * (-self.slow_rate * m).exp()
    }

    /// First abscissa where the fast term drops below [`CROSSOVER_FRACTION`]
    /// of the slow term.
    pub fn crossover(&self) -> Option<f64> {
        if self.collapsed || self.fast_rate <= self.slow_rate {
            return None;
        }
        let m = ((self.fast_amplitude / (CROSSOVER_FRACTION * self.slow_amplitude)).ln())
            / (self.fast_rate - self.slow_rate);
        Some(m.max(0.0))
    }
}

/// Smallest positive value kept by the log-space fit.
pub const FIT_FLOOR: f64 = 1e-12;

pub fn fit_two_exponential(m: &[f64], p: &[f64]) -> Result<TwoExpFit> {
    if m.len() != p.len() {
        return Err(Error::Fit("abscissa and data differ in length".into()));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = m
        .iter()
        .zip(p)
        .filter(|(x, y)| x.is_finite() && y.is_finite() && **y > FIT_FLOOR)
        .map(|(x, y)| (*x, y.ln()))
        .unzip();
    if xs.len() < 6 {
        return Err(Error::Fit(format!("only {} usable points above the floor", xs.len())));
    }
    let single = linear_fit(&xs, &ys)?;
    let single_sse: f64 =
        xs.iter().zip(&ys).map(|(x, y)| (y - single.intercept - single.slope * x).powi(2)).sum();
    let single_rate = -single.slope;
    let collapsed_fit = |breakpoint, sse| TwoExpFit {
        fast_amplitude: single.intercept.exp(),
        fast_rate: single_rate,
        slow_amplitude: 0.0,
        slow_rate: single_rate,
        sse,
        single_sse,
        breakpoint,
        collapsed: true,
    };

    let (breakpoint, seed) = breakpoint_scan(&xs, &ys)?;
    let mut starts = vec![seed];
    for a0 in [1.0, 0.3, 0.1, 0.03] {
        for b0 in [0.01, 0.003] {
            starts.push([0.5f64.ln(), f64::ln(a0), 0.3f64.ln(), f64::ln(b0)]);
        }
    }
    let best = starts
        .iter()
        .filter_map(|s| levenberg_marquardt(&xs, &ys, *s))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    let Some((theta, sse)) = best else {
        return Ok(collapsed_fit(breakpoint, single_sse));
    };
    let [mut aa, mut ra, mut ab, mut rb] = theta.map(f64::exp);
    if ra < rb {
        std::mem::swap(&mut aa, &mut ab);
        std::mem::swap(&mut ra, &mut rb);
    }
    let n = xs.len() as f64;
    let collapsed = (single_sse / n).sqrt() < 1e-4 || sse > 0.25 * single_sse || ra < 1.1 * rb;
    if collapsed {
        return Ok(collapsed_fit(breakpoint, sse.min(single_sse)));
    }
    Ok(TwoExpFit {
        fast_amplitude: aa,
        fast_rate: ra,
        slow_amplitude: ab,
        slow_rate: rb,
        sse,
        single_sse,
        breakpoint,
        collapsed: false,
    })
}

/// Best split into two log-linear pieces; returns the split and a seed for
/// the two-exponential fit in log-parameters.
fn breakpoint_scan(x: &[f64], y: &[f64]) -> Result<(usize, [f64; 4])> {
    let n = x.len();
    let piece = |lo: usize, hi: usize| -> Option<(LinearFit, f64)> {
        let f = linear_fit(&x[lo..hi], &y[lo..hi]).ok()?;
        let sse = (lo..hi).map(|i| (y[i] - f.intercept - f.slope * x[i]).powi(2)).sum();
        Some((f, sse))
    };
    let mut best: Option<(f64, usize, LinearFit, LinearFit)> = None;
    for b in 3..n.saturating_sub(2) {
        if let (Some((f1, s1)), Some((f2, s2))) = (piece(0, b), piece(b, n)) {
            if best.as_ref().is_none_or(|bst| s1 + s2 < bst.0) {
                best = Some((s1 + s2, b, f1, f2));
            }
        }
    }
    let (_, b, f1, f2) = best.ok_or_else(|| Error::Fit("too few points for a breakpoint scan".into()))?;
    let fast = (-f1.slope).max(1e-6);
    let slow = (-f2.slope).max(1e-8).min(0.5 * fast);
    let slow_amp = f2.intercept.exp();
    let fast_amp = (f1.intercept.exp() - slow_amp).max(1e-3 * slow_amp.max(1e-12));
    Ok((b, [fast_amp.ln(), fast.ln(), slow_amp.ln(), slow.ln()]))
}

/// Minimises `Σ (ln(A e^{−a x} + B e^{−b x}) − y)²` over `θ = ln(A, a, B, b)`.
fn levenberg_marquardt(x: &[f64], y: &[f64], start: [f64; 4]) -> Option<([f64; 4], f64)> {
    let residuals = |th: &[f64; 4]| -> Option<(DVector<f64>, DMatrix<f64>)> {
        let [a_amp, a, b_amp, b] = th.map(f64::exp);
        let mut r = DVector::zeros(x.len());
        let mut j = DMatrix::zeros(x.len(), 4);
        for (i, (&xi, &yi)) in x.iter().zip(y).enumerate() {
            let ea = a_amp * (-a * xi).exp();
            let eb = b_amp * (-b * xi).exp();
            let f = ea + eb;
            if !(f > 0.0 && f.is_finite()) {
                return None;
            }
            r[i] = f.ln() - yi;
            j[(i, 0)] = ea / f;
            j[(i, 1)] = -a * xi * ea / f;
            j[(i, 2)] = eb / f;
            j[(i, 3)] = -b * xi * eb / f;
        }
        Some((r, j))
    };
    let mut theta = start;
    let (mut r, mut jac) = residuals(&theta)?;
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    for _ in 0..500 {
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let g = &jt * &r;
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for k in 0..4 {
                a[(k, k)] += lambda * (1.0 + jtj[(k, k)]);
            }
            let Some(step) = a.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [theta[0] + step[0], theta[1] + step[1], theta[2] + step[2], theta[3] + step[3]];
            if trial.iter().any(|t| !t.is_finite() || t.abs() > 700.0) {
                lambda *= 10.0;
                continue;
            }
            if let Some((tr, tj)) = residuals(&trial) {
                let tc = tr.norm_squared();
                if tc < cost {
                    let done = (cost - tc) <= 1e-14 * cost.max(1e-300);
                    theta = trial;
                    r = tr;
                    jac = tj;
                    cost = tc;
                    lambda = (lambda * 0.3).max(1e-12);
                    improved = !done;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    cost.is_finite().then_some((theta, cost))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_kernel;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn pair_subspace() {
        let b = stationary_subspace(&[1.0, 1.0]).unwrap();
        assert_eq!(b.states.len(), 1);
        assert_eq!(b.states[0].as_slice(), &[1.0, -1.0]);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(b.decaying[0], r, epsilon = 1e-15);
        assert_relative_eq!(b.decaying[1], r, epsilon = 1e-15);
    }

    #[test]
    fn three_site_unequal() {
        let b = stationary_subspace(&[1.0, 2.0, 2.0]).unwrap();
        assert_relative_eq!(b.decaying[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(b.decaying[1], 2.0 / 3.0, epsilon = 1e-15);
        for s in &b.states {
            assert!(b.decaying.dot(s).abs() < 1e-15);
        }
    }

    #[test]
    fn equal_couplings_overlap() {
        for n in 1..12 {
            let b = stationary_subspace(&vec![0.7; n]).unwrap();
            assert_relative_eq!(b.decaying[0], 1.0 / (n as f64).sqrt(), epsilon = 1e-14);
        }
    }

    #[test]
    fn zero_couplings_degenerate() {
        assert!(matches!(stationary_subspace(&[0.0, 0.0]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn pivot_skips_leading_zero() {
        let b = stationary_subspace(&[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(b.states.len(), 2);
        for s in &b.states {
            assert!(b.decaying.dot(s).abs() < 1e-15);
        }
    }

    #[test]
    fn prediction_closed_forms() {
        let cases = [(1usize, -1.0), (2, -0.5), (4, 0.125), (10, 0.62)];
        for (n, expected) in cases {
            let net = NetworkSpec::uncoupled(n, 100.0, 0.0, 1.0).unwrap();
            let noise = NoiseSpec::relaxation(f64::INFINITY, 1.0);
            let p = predict_final_state(&net, &CorrelationKernel::all_ones(n), &noise).unwrap();
            assert_relative_eq!(p.sz_first, expected, epsilon = 1e-12);
            assert_relative_eq!(linalg::trace(&p.rho).re, 1.0, epsilon = 1e-12);
        }
        let net = NetworkSpec::uncoupled(5, 100.0, 0.0, 1.0).unwrap();
        let p = predict_final_state(&net, &CorrelationKernel::all_ones(5), &NoiseSpec::relaxation(f64::INFINITY, 1.0))
            .unwrap();
        assert_relative_eq!(p.sz_total_plus_n, 1.6, epsilon = 1e-12);
        assert_relative_eq!(p.transferred, 0.32, epsilon = 1e-12);
    }

    #[test]
    fn prediction_rho_matches_scalars() {
        let net = NetworkSpec::uncoupled(3, 100.0, 0.0, 1.0)
            .unwrap()
            .with_relaxation_couplings(vec![1.0, 2.0, 0.5])
            .unwrap();
        let p = predict_final_state(&net, &CorrelationKernel::all_ones(3), &NoiseSpec::relaxation(f64::INFINITY, 1.0))
            .unwrap();
        assert_relative_eq!(2.0 * p.rho[(0, 0)].re - 1.0, p.sz_first, epsilon = 1e-12);
        let exc: f64 = (0..3).map(|j| p.rho[(j, j)].re).sum();
        assert_relative_eq!(2.0 * exc, p.sz_total_plus_n, epsilon = 1e-12);
    }

    #[test]
    fn prediction_preconditions() {
        let chain = NetworkSpec::pst_chain(3, 100.0, 1.0, 0.0, 1.0).unwrap();
        let relax = NoiseSpec::relaxation(f64::INFINITY, 1.0);
        assert!(matches!(
            predict_final_state(&chain, &CorrelationKernel::all_ones(3), &relax),
            Err(Error::Contract(_))
        ));
        let free = NetworkSpec::uncoupled(3, 100.0, 0.0, 1.0).unwrap();
        let k = build_kernel(&[0.0, 1.0, 2.0], 2.0).unwrap();
        assert!(matches!(predict_final_state(&free, &k, &relax), Err(Error::Contract(_))));
        let up = NoiseSpec { c_relax_up: 0.1, ..relax };
        assert!(matches!(
            predict_final_state(&free, &CorrelationKernel::all_ones(3), &up),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn halfwidth_flat_profile() {
        assert_eq!(packet_halfwidth(&[0.5, 0.5]), Err(Error::UndefinedWidth { sites: 1.0 }));
    }

    #[test]
    fn halfwidth_triangle() {
        // Crossings at ±1 around the peak.
        assert_relative_eq!(packet_halfwidth(&[0.0, 0.5, 1.0, 0.5, 0.0]).unwrap(), 1.0, epsilon = 1e-15);
        // Asymmetric: left crossing at 1.5, right at 0.5.
        let w = packet_halfwidth(&[0.25, 0.25, 0.75, 1.0, 0.0]).unwrap();
        assert_relative_eq!(w, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn halfwidth_one_sided() {
        assert_relative_eq!(packet_halfwidth(&[1.0, 0.8, 0.2]).unwrap(), 1.5, epsilon = 1e-15);
    }

    #[test]
    fn rate_oracle_examples() {
        let g = 0.3;
        assert_eq!(rate_oracle(&[2, 3], &[0, 1], KernelLimit::Uncorrelated, g), 4.0 * g);
        assert_eq!(rate_oracle(&[2, 3], &[0, 1], KernelLimit::PerfectlyCorrelated, g), 0.0);
        assert_eq!(rate_oracle(&[], &[0, 1, 2, 3], KernelLimit::Uncorrelated, g), 4.0 * g);
        assert_eq!(rate_oracle(&[], &[0, 1, 2, 3], KernelLimit::PerfectlyCorrelated, g), 16.0 * g);
        assert_eq!(rate_oracle(&[1], &[1], KernelLimit::Uncorrelated, g), 0.0);
        assert_eq!(rate_oracle(&[1], &[1], KernelLimit::PerfectlyCorrelated, g), 0.0);
    }

    #[test]
    fn critical_xi_logistic_in_log() {
        let xs: Vec<f64> = (0..32).map(|i| 0.1 * 1000f64.powf(i as f64 / 31.0)).collect();
        let curve: Vec<(f64, f64)> =
            xs.iter().map(|&x| (x, -1.0 + 2.0 / (1.0 + (-(x.ln() - 3f64.ln()) * 3.0).exp()))).collect();
        let xc = critical_xi(&curve).unwrap();
        let cell = 1000f64.powf(1.0 / 31.0);
        assert!(xc > 3.0 / cell && xc < 3.0 * cell, "xc = {xc}");
    }

    #[test]
    fn critical_xi_logistic_in_linear() {
        let xs: Vec<f64> = (0..32).map(|i| 0.1 * 1000f64.powf(i as f64 / 31.0)).collect();
        let curve: Vec<(f64, f64)> = xs.iter().map(|&x| (x, 1.0 / (1.0 + (-(x - 3.0) / 0.3).exp()))).collect();
        let xc = critical_xi(&curve).unwrap();
        let cell = 1000f64.powf(1.0 / 31.0);
        assert!(xc > 3.0 / cell && xc < 3.0 * cell, "xc = {xc}");
    }

    #[test]
    fn critical_xi_rejects_flat_and_short() {
        let flat: Vec<(f64, f64)> = (1..20).map(|i| (i as f64, 0.2)).collect();
        assert!(matches!(critical_xi(&flat), Err(Error::Extraction(_))));
        let falling: Vec<(f64, f64)> = (1..20).map(|i| (i as f64, -(i as f64))).collect();
        assert!(matches!(critical_xi(&falling), Err(Error::Extraction(_))));
        let short: Vec<(f64, f64)> = (1..5).map(|i| (i as f64, i as f64)).collect();
        assert!(matches!(critical_xi(&short), Err(Error::Extraction(_))));
    }

    #[test]
    fn linear_fit_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 1.7 * v - 0.89).collect();
        let f = linear_fit(&x, &y).unwrap();
        assert_relative_eq!(f.slope, 1.7, epsilon = 1e-12);
        assert_relative_eq!(f.intercept, -0.89, epsilon = 1e-12);
        assert_relative_eq!(f.r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn two_exponential_recovers_rates() {
        let m: Vec<f64> = (1..=200).map(f64::from).collect();
        let p: Vec<f64> = m.iter().map(|x| 0.6 * (-0.1 * x).exp() + 0.3 * (-0.006 * x).exp()).collect();
        let fit = fit_two_exponential(&m, &p).unwrap();
        assert!(!fit.collapsed);
        assert_relative_eq!(fit.fast_rate, 0.1, max_relative = 1e-6);
        assert_relative_eq!(fit.slow_rate, 0.006, max_relative = 1e-6);
        assert!(fit.rate_ratio() < 0.1);
        let c = fit.crossover().unwrap();
        assert_relative_eq!(fit.fast_amplitude * (-fit.fast_rate * c).exp(),
            CROSSOVER_FRACTION * fit.slow_amplitude * (-fit.slow_rate * c).exp(), max_relative = 1e-9);
    }

    #[test]
    fn two_exponential_collapses_on_single_decay() {
        let m: Vec<f64> = (1..=200).map(f64::from).collect();
        let p: Vec<f64> = m.iter().map(|x| (-PI / 2.0 * x).exp()).collect();
        let fit = fit_two_exponential(&m, &p).unwrap();
        assert!(fit.collapsed);
        assert_eq!(fit.rate_ratio(), 1.0);
        assert_relative_eq!(fit.fast_rate, PI / 2.0, max_relative = 1e-9);
    }

    #[test]
    fn intermediate_mixture_properties() {
        let rho = intermediate_mixture(20, 1.0);
        assert_relative_eq!(linalg::purity(&rho), 0.5, epsilon = 1e-14);
        assert_relative_eq!(2.0 * rho[(19, 19)].re - 1.0, -0.5, epsilon = 1e-14);
        assert_relative_eq!(linalg::trace(&rho).re, 1.0, epsilon = 1e-14);
    }

    proptest! {
        #[test]
        fn decaying_state_orthogonal_to_stationary(nu in prop::collection::vec(0.01f64..5.0, 1..12)) {
            let b = stationary_subspace(&nu).unwrap();
            prop_assert_eq!(b.states.len(), nu.len() - 1);
            for s in &b.states {
                prop_assert!(b.decaying.dot(s).abs() < 1e-12 * s.norm());
            }
            for (i, e) in b.orthonormal.iter().enumerate() {
                prop_assert!((e.norm() - 1.0).abs() < 1e-12);
                for f in &b.orthonormal[..i] {
                    prop_assert!(e.dot(f).abs() < 1e-12);
                }
                prop_assert!(b.decaying.dot(e).abs() < 1e-12);
            }
        }

        #[test]
        fn halfwidth_shift_invariant(shift in 0usize..5, w in 1usize..4) {
            let mut profile = vec![0.0; 15];
            for k in 0..=w {
                let v = 1.0 - k as f64 / (w as f64 + 1.0);
                profile[7 + k] = v;
                profile[7 - k] = v;
            }
            profile.rotate_right(shift);
            let expected = (w as f64 + 1.0) / 2.0;
            prop_assert!((packet_halfwidth(&profile).unwrap() - expected).abs() < 1e-12);
        }

        #[test]
        fn oracle_limits_consistent(a in prop::collection::btree_set(0usize..6, 0..6), b in prop::collection::btree_set(0usize..6, 0..6)) {
            let a: Vec<usize> = a.into_iter().collect();
            let b: Vec<usize> = b.into_iter().collect();
            let unc = rate_oracle(&a, &b, KernelLimit::Uncorrelated, 1.0);
            let cor = rate_oracle(&a, &b, KernelLimit::PerfectlyCorrelated, 1.0);
            prop_assert_eq!(unc, rate_oracle(&b, &a, KernelLimit::Uncorrelated, 1.0));
            prop_assert!(cor.sqrt() <= unc + 1e-12);
        }
    }
}
