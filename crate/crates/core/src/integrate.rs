//! Fixed-step RK4 propagation of a time-independent master equation.
//!
//! Both engines implement [`MasterEquation`]; the driver here owns step-size
//! selection, sampling and the mid-run invariant checks.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{hermiticity_error, min_eigenvalue, trace, CMatrix};

/// Steps per period of the fastest Liouvillian frequency in the default step.
pub const STEPS_PER_PERIOD: f64 = 100.0;

pub const TRACE_TOLERANCE: f64 = 1e-8;
pub const HERMITICITY_TOLERANCE: f64 = 1e-8;
pub const POSITIVITY_TOLERANCE: f64 = 1e-6;

/// Per-sample observables.
#[derive(Debug, Clone, PartialEq)]
pub struct Observables {
    /// `⟨σ_z^{(j)}⟩` per site.
    pub sz: Vec<f64>,
    /// Envelope of the transversal magnetisation, `|⟨σ_x^{(j)}⟩ + i⟨σ_y^{(j)}⟩|`.
    /// It drops the fast `2ω_q` harmonic and is the same in the lab and the
    /// rotating frame.
    pub abs_sx: Vec<f64>,
    pub purity: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub samples: Vec<Observables>,
    /// Full density matrices, only when requested.
    pub states: Vec<CMatrix>,
    /// Integration step actually used.
    pub dt: Option<f64>,
}

impl TimeSeries {
    /// Index of the sample closest to `t`, if it lies within `tol`.
    pub fn index_near(&self, t: f64, tol: f64) -> Option<usize> {
        let (i, dist) = self
            .times
            .iter()
            .enumerate()
            .map(|(i, &s)| (i, (s - t).abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1))?;
        (dist <= tol).then_some(i)
    }

    fn push(&mut self, t: f64, obs: Observables, state: Option<CMatrix>) {
        self.times.push(t);
        self.samples.push(obs);
        if let Some(s) = state {
            self.states.push(s);
        }
    }
}

/// A linear, time-independent generator `ρ̇ = L[ρ]` acting on Hermitian ρ.
pub trait MasterEquation: Sync {
    fn dim(&self) -> usize;

    /// Writes `L[ρ]` into `out`. `ρ` is assumed Hermitian.
    fn apply(&self, rho: &CMatrix, out: &mut CMatrix);

    /// Upper bound on `|λ|` over the Liouvillian spectrum.
    fn rate_bound(&self) -> f64;

    /// Smallest strictly positive dissipative rate, if any.
    fn smallest_decay_rate(&self) -> Option<f64>;

    fn observe(&self, rho: &CMatrix) -> Observables;

    /// Expected number of excitations.
    fn excitation_number(&self, rho: &CMatrix) -> f64;

    /// `2π/Ω/STEPS_PER_PERIOD` with Ω the rate bound.
    fn default_dt(&self) -> f64 {
        let omega = self.rate_bound();
        if omega > 0.0 {
            2.0 * PI / omega / STEPS_PER_PERIOD
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveOptions {
    pub t_final: f64,
    /// `None` selects [`MasterEquation::default_dt`]. The step is shrunk so an
    /// integer number of steps lands exactly on `t_final`.
    pub dt: Option<f64>,
    /// Record every k-th step; `t = 0` and `t_final` are always recorded.
    pub sample_every: usize,
    pub keep_states: bool,
    /// Check the minimum eigenvalue at every sample (costly for large bases).
    pub check_positivity: bool,
}

impl EvolveOptions {
    pub fn new(t_final: f64) -> Self {
        Self { t_final, dt: None, sample_every: 1, keep_states: false, check_positivity: false }
    }

    pub fn dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }

    pub fn sample_every(mut self, k: usize) -> Self {
        self.sample_every = k;
        self
    }

    pub fn keep_states(mut self) -> Self {
        self.keep_states = true;
        self
    }

    pub fn check_positivity(mut self) -> Self {
        self.check_positivity = true;
        self
    }
}

/// Resolves the step count and effective step for a run.
pub fn step_plan(t_final: f64, dt: f64) -> Result<(usize, f64)> {
    if !(t_final.is_finite() && t_final >= 0.0) {
        return Err(Error::Input(format!("t_final must be finite and >= 0, got {t_final}")));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Input(format!("dt must be positive, got {dt}")));
    }
    if t_final == 0.0 {
        return Ok((0, dt));
    }
    let n = (t_final / dt - 1e-9).ceil().max(1.0) as usize;
    Ok((n, t_final / n as f64))
}

struct Workspace {
    k1: CMatrix,
    k2: CMatrix,
    k3: CMatrix,
    k4: CMatrix,
    tmp: CMatrix,
}

impl Workspace {
    fn new(d: usize) -> Self {
        let z = || CMatrix::zeros(d, d);
        Self { k1: z(), k2: z(), k3: z(), k4: z(), tmp: z() }
    }
}

/// `y += a·x` elementwise.
fn axpy(y: &mut CMatrix, a: Complex64, x: &CMatrix) {
    for (yi, xi) in y.as_mut_slice().iter_mut().zip(x.as_slice()) {
        *yi += a * xi;
    }
}

fn rk4_step<E: MasterEquation + ?Sized>(eq: &E, rho: &mut CMatrix, dt: f64, ws: &mut Workspace) {
    let h = Complex64::new(dt, 0.0);
    let half = Complex64::new(0.5 * dt, 0.0);

    eq.apply(rho, &mut ws.k1);
    ws.tmp.copy_from(rho);
    axpy(&mut ws.tmp, half, &ws.k1);
    eq.apply(&ws.tmp, &mut ws.k2);
    ws.tmp.copy_from(rho);
    axpy(&mut ws.tmp, half, &ws.k2);
    eq.apply(&ws.tmp, &mut ws.k3);
    ws.tmp.copy_from(rho);
    axpy(&mut ws.tmp, h, &ws.k3);
    eq.apply(&ws.tmp, &mut ws.k4);

    let sixth = Complex64::new(dt / 6.0, 0.0);
    let third = Complex64::new(dt / 3.0, 0.0);
    axpy(rho, sixth, &ws.k1);
    axpy(rho, third, &ws.k2);
    axpy(rho, third, &ws.k3);
    axpy(rho, sixth, &ws.k4);
}

/// Checks trace, Hermiticity, populations and 2x2 principal minors; optionally
/// the full spectrum.
pub fn check_state(rho: &CMatrix, t: f64, dt: f64, spectral: bool) -> Result<()> {
    let fail = |reason: String| Err(Error::Diverged { t, dt, reason });
    if rho.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return fail("non-finite density matrix element".into());
    }
    let tr = trace(rho);
    if (tr - Complex64::new(1.0, 0.0)).norm() > TRACE_TOLERANCE {
        return fail(format!("trace drifted to {tr}"));
    }
    let herm = hermiticity_error(rho);
    if herm > HERMITICITY_TOLERANCE {
        return fail(format!("hermiticity error {herm:e}"));
    }
    let d = rho.nrows();
    for a in 0..d {
        let paa = rho[(a, a)].re;
        if paa < -POSITIVITY_TOLERANCE || paa > 1.0 + POSITIVITY_TOLERANCE {
            return fail(format!("population {paa} outside [0, 1] at index {a}"));
        }
    }
    // Smallest eigenvalue of every 2x2 principal minor.
    for c in 0..d {
        let pc = rho[(c, c)].re;
        for r in 0..c {
            let pr = rho[(r, r)].re;
            let half_gap = 0.5 * (pr - pc);
            let low = 0.5 * (pr + pc) - (half_gap * half_gap + rho[(r, c)].norm_sqr()).sqrt();
            if low < -POSITIVITY_TOLERANCE {
                return fail(format!("coherence ({r},{c}) exceeds its population bound"));
            }
        }
    }
    if spectral {
        let min = min_eigenvalue(rho);
        if min < -POSITIVITY_TOLERANCE {
            return fail(format!("negative eigenvalue {min:e}"));
        }
    }
    Ok(())
}

/// Integrates from `rho0` to `opts.t_final`, returning samples and the final state.
pub fn evolve<E: MasterEquation + ?Sized>(
    eq: &E,
    rho0: &CMatrix,
    opts: &EvolveOptions,
) -> Result<(TimeSeries, CMatrix)> {
    let d = eq.dim();
    if rho0.nrows() != d || rho0.ncols() != d {
        return Err(Error::Dimension { expected: d, got: rho0.nrows() });
    }
    if opts.sample_every == 0 {
        return Err(Error::Input("sample_every must be >= 1".into()));
    }
    let (n_steps, dt) = step_plan(opts.t_final, opts.dt.unwrap_or_else(|| eq.default_dt()))?;

    let mut series = TimeSeries { dt: Some(dt), ..TimeSeries::default() };
    let mut rho = rho0.clone();
    check_state(&rho, 0.0, dt, opts.check_positivity)?;
    series.push(0.0, eq.observe(&rho), opts.keep_states.then(|| rho.clone()));

    let mut ws = Workspace::new(d);
    for step in 1..=n_steps {
        rk4_step(eq, &mut rho, dt, &mut ws);
        if step % opts.sample_every == 0 || step == n_steps {
            let t = step as f64 * dt;
            check_state(&rho, t, dt, opts.check_positivity)?;
            series.push(t, eq.observe(&rho), opts.keep_states.then(|| rho.clone()));
        }
    }
    Ok((series, rho))
}

/// Outcome of [`evolve_to_stationary`].
#[derive(Debug, Clone)]
pub struct StationaryRun {
    pub state: CMatrix,
    pub t: f64,
    /// `false` when the time cap was reached before the drift criterion held.
    pub converged: bool,
}

/// Evolves until the excitation number changes by less than `tol` per unit
/// time, or until `50 / (smallest decay rate)`.
pub fn evolve_to_stationary<E: MasterEquation + ?Sized>(
    eq: &E,
    rho0: &CMatrix,
    dt: Option<f64>,
    tol: f64,
) -> Result<StationaryRun> {
    let dt = dt.unwrap_or_else(|| eq.default_dt());
    let cap = match eq.smallest_decay_rate() {
        Some(rate) => 50.0 / rate,
        None => return Ok(StationaryRun { state: rho0.clone(), t: 0.0, converged: true }),
    };
    // One chunk covers at least one unit of time and a whole number of steps.
    let chunk = (1.0 / dt).ceil().max(1.0) * dt;
    let mut rho = rho0.clone();
    let mut t = 0.0;
    let mut ws = Workspace::new(eq.dim());
    let steps_per_chunk = (chunk / dt).round() as usize;
    let mut previous = eq.excitation_number(&rho);
    while t < cap {
        for _ in 0..steps_per_chunk {
            rk4_step(eq, &mut rho, dt, &mut ws);
        }
        t += chunk;
        check_state(&rho, t, dt, false)?;
        let now = eq.excitation_number(&rho);
        if ((now - previous) / chunk).abs() < tol {
            return Ok(StationaryRun { state: rho, t, converged: true });
        }
        previous = now;
    }
    Ok(StationaryRun { state: rho, t, converged: false })
}
