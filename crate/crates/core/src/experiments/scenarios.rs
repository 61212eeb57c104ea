//! Scenario drivers. Each returns CSV rows plus a JSON summary.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::{json, Value};

use super::config::{EngineChoice, Fault, Scenario, ScenarioConfig};
use super::output::ResultRow;
use crate::analytics::{self, KernelLimit};
use crate::error::{Error, Result};
use crate::full::{self, FullLiouvillian, Frame, DEFAULT_FULL_CAP};
use crate::integrate::{self, EvolveOptions, MasterEquation, TimeSeries};
use crate::linalg::{self, CMatrix, ONE};
use crate::model::{build_kernel, CorrelationKernel, NetworkSpec, NoiseSpec};
use crate::reduced::{self, ReducedLiouvillian};

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutput {
    pub scenario: Scenario,
    pub rows: Vec<ResultRow>,
    pub summary: Value,
    /// `false` only when a validation check failed.
    pub passed: bool,
}

pub fn run(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    cfg.validate()?;
    match cfg.scenario {
        Scenario::Evolve => run_evolve(cfg),
        Scenario::SweepXi => run_sweep_xi(cfg),
        Scenario::Blocking => run_blocking(cfg),
        Scenario::Strobe => run_strobe(cfg),
        Scenario::Validate => run_validate(cfg),
    }
}

/// Network of length `n` from the config's coupling settings.
pub fn build_network(cfg: &ScenarioConfig, n: usize) -> Result<NetworkSpec> {
    let mut net = if cfg.coupled && n >= 2 {
        NetworkSpec::pst_chain(n, cfg.omega_q, cfg.g, cfg.v, cfg.nu)?
    } else {
        NetworkSpec::uncoupled(n, cfg.omega_q, cfg.v, cfg.nu)?
    };
    if let Some(v) = &cfg.dephasing_couplings {
        net = net.with_dephasing_couplings(v.clone())?;
    }
    if let Some(nu) = &cfg.relaxation_couplings {
        net = net.with_relaxation_couplings(nu.clone())?;
    }
    Ok(net)
}

/// A built generator for either engine.
pub enum Engine {
    Full(FullLiouvillian),
    Reduced(ReducedLiouvillian),
}

impl Engine {
    pub fn build(
        choice: EngineChoice,
        net: &NetworkSpec,
        kernel: &CorrelationKernel,
        noise: &NoiseSpec,
    ) -> Result<Self> {
        let full = match choice {
            EngineChoice::Full => true,
            EngineChoice::Reduced => false,
            EngineChoice::Auto => noise.c_relax_up > 0.0,
        };
        if full {
            FullLiouvillian::new(net, kernel, noise, Frame::Rotating, DEFAULT_FULL_CAP).map(Engine::Full)
        } else {
            ReducedLiouvillian::from_model(net, kernel, noise, Frame::Rotating).map(Engine::Reduced)
        }
    }

    pub fn equation(&self) -> &dyn MasterEquation {
        match self {
            Engine::Full(l) => l,
            Engine::Reduced(l) => l,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Engine::Full(_) => "full",
            Engine::Reduced(_) => "reduced",
        }
    }

    /// `|site⟩⟨site|`, zero-based site, in the engine's basis.
    pub fn excited(&self, n: usize, site: usize) -> CMatrix {
        let d = self.equation().dim();
        let idx = match self {
            Engine::Full(_) => full::single_excitation_index(n, site),
            Engine::Reduced(_) => site,
        };
        let mut rho = CMatrix::zeros(d, d);
        rho[(idx, idx)] = ONE;
        rho
    }

    /// The state in the reduced basis.
    pub fn to_reduced(&self, n: usize, rho: &CMatrix) -> CMatrix {
        match self {
            Engine::Full(_) => full::project_to_reduced(n, rho),
            Engine::Reduced(_) => rho.clone(),
        }
    }
}

fn series_rows(scenario: &str, n: usize, xi: f64, series: &TimeSeries) -> Vec<ResultRow> {
    let mut rows = Vec::with_capacity(series.times.len() * n);
    for (t, obs) in series.times.iter().zip(&series.samples) {
        for j in 0..n {
            rows.push(ResultRow {
                xi: Some(xi),
                t: Some(*t),
                site: Some(j + 1),
                sz: Some(obs.sz[j]),
                abs_sx: Some(obs.abs_sx[j]),
                purity: Some(obs.purity),
                ..ResultRow::new(scenario, n)
            });
        }
    }
    rows
}

/// Site/time grid of `⟨σ_z⟩`, `|⟨σ_x⟩|` and purity from `|initial_site⟩`.
pub fn run_evolve(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let n = cfg.n_spins;
    let net = build_network(cfg, n)?;
    let kernel = build_kernel(net.positions(), cfg.noise.xi)?;
    let engine = Engine::build(cfg.engine, &net, &kernel, &cfg.noise)?;
    let eq = engine.equation();
    let t_final = cfg.t_final.unwrap_or(2.0 * PI / cfg.g);
    let dt = cfg.dt.unwrap_or_else(|| eq.default_dt());
    let rho0 = engine.excited(n, cfg.initial_site - 1);
    let opts = EvolveOptions { dt: Some(dt), sample_every: cfg.sample_every, ..EvolveOptions::new(t_final) };
    let (series, _) = integrate::evolve(eq, &rho0, &opts)?;
    let rows = series_rows("evolve", n, cfg.noise.xi, &series);

    let quality = match analytics::arrival_time(&net) {
        Ok(t_arrival) if cfg.initial_site == 1 => {
            let opts = EvolveOptions { dt: Some(dt), sample_every: usize::MAX, ..EvolveOptions::new(t_arrival) };
            let (s, _) = integrate::evolve(eq, &rho0, &opts)?;
            Some(analytics::transfer_quality(&s, &net)?)
        }
        _ => None,
    };
    let purity_final = series.samples.last().map(|o| o.purity);
    let summary = json!({
        "scenario": "evolve",
        "engine": engine.name(),
        "frame": "rotating",
        "n_spins": n,
        "xi": finite_or_string(cfg.noise.xi),
        "noise": noise_json(&cfg.noise),
        "dt": series.dt,
        "t_final": t_final,
        "samples": series.times.len(),
        "quality": quality,
        "purity_final": purity_final,
    });
    Ok(ScenarioOutput { scenario: Scenario::Evolve, rows, summary, passed: true })
}

fn finite_or_string(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(x.to_string())
    }
}

fn noise_json(noise: &NoiseSpec) -> Value {
    json!({
        "xi": finite_or_string(noise.xi),
        "c_dephasing": noise.c_dephasing,
        "c_relax_down": noise.c_relax_down,
        "c_relax_up": noise.c_relax_up,
    })
}

/// Quality and purity at the arrival time, with the profile at half of it.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub n: usize,
    pub xi: f64,
    pub quality: f64,
    pub purity: f64,
}

/// One transfer run on the reduced engine: state at `π/(4g)`, then at `π/(2g)`.
pub fn transfer_run(net: &NetworkSpec, noise: &NoiseSpec, dt: Option<f64>) -> Result<(Vec<f64>, f64, f64)> {
    let n = net.n_spins();
    let kernel = build_kernel(net.positions(), noise.xi)?;
    let liouv = ReducedLiouvillian::from_model(net, &kernel, noise, Frame::Rotating)?;
    let t_arrival = analytics::arrival_time(net)?;
    let dt = dt.unwrap_or_else(|| liouv.default_dt());
    let rho0 = reduced::ReducedState::excited(n, 0)?;
    let half = EvolveOptions { dt: Some(dt), sample_every: usize::MAX, ..EvolveOptions::new(0.5 * t_arrival) };
    let (mid_series, mid) = reduced::evolve_reduced(&rho0, &liouv, &half)?;
    let (end_series, _) = reduced::evolve_reduced(&mid, &liouv, &half)?;
    let profile = analytics::excitation_profile(&mid_series.samples.last().expect("final sample").sz);
    let end = end_series.samples.last().expect("final sample");
    Ok((profile, end.sz[n - 1], end.purity))
}

/// Coherent packet half-width at `π/(4g)`.
pub fn coherent_halfwidth(net: &NetworkSpec) -> Result<f64> {
    let (profile, _, _) = transfer_run(net, &NoiseSpec::default(), None)?;
    analytics::packet_halfwidth(&profile)
}

fn thread_pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(k) = workers {
        b = b.num_threads(k);
    }
    b.build().map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Per-chain-length result of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCurve {
    pub n: usize,
    pub points: Vec<SweepPoint>,
    pub halfwidth: Result<f64>,
    pub xi_c: Result<f64>,
}

/// Runs every `(N, ξ)` point on a worker pool; results are ordered by sweep index.
pub fn sweep_curves(cfg: &ScenarioConfig) -> Result<Vec<SweepCurve>> {
    let grid = cfg.xi_grid();
    let tasks: Vec<(usize, f64)> =
        cfg.n_list.iter().flat_map(|&n| grid.iter().map(move |&xi| (n, xi))).collect();
    let pool = thread_pool(cfg.workers)?;
    let results: Vec<Result<SweepPoint>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(n, xi)| {
                let net = build_network(cfg, n)?;
                let noise = NoiseSpec { xi, ..cfg.noise };
                let (_, quality, purity) = transfer_run(&net, &noise, cfg.dt)?;
                Ok(SweepPoint { n, xi, quality, purity })
            })
            .collect()
    });
    let widths: Vec<Result<f64>> =
        pool.install(|| cfg.n_list.par_iter().map(|&n| coherent_halfwidth(&build_network(cfg, n)?)).collect());

    let mut curves = Vec::new();
    let mut it = results.into_iter();
    for (&n, halfwidth) in cfg.n_list.iter().zip(widths) {
        let points: Vec<SweepPoint> = it.by_ref().take(grid.len()).collect::<Result<_>>()?;
        let pairs: Vec<(f64, f64)> = points.iter().map(|p| (p.xi, p.quality)).collect();
        let xi_c = analytics::critical_xi(&pairs);
        curves.push(SweepCurve { n, points, halfwidth, xi_c });
    }
    Ok(curves)
}

fn result_json(r: &Result<f64>) -> (Value, Value) {
    match r {
        Ok(v) => (json!(v), Value::Null),
        Err(e) => (Value::Null, json!(e.to_string())),
    }
}

pub fn run_sweep_xi(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let curves = sweep_curves(cfg)?;
    let mut rows = Vec::new();
    let mut per_n = Vec::new();
    let (mut ws, mut xcs) = (Vec::new(), Vec::new());
    for c in &curves {
        let t = PI / (2.0 * cfg.g);
        for p in &c.points {
            rows.push(ResultRow {
                xi: Some(p.xi),
                t: Some(t),
                site: Some(c.n),
                sz: Some(p.quality),
                purity: Some(p.purity),
                quality: Some(p.quality),
                ..ResultRow::new("sweep-xi", c.n)
            });
        }
        let (w, w_err) = result_json(&c.halfwidth);
        let (xc, xc_err) = result_json(&c.xi_c);
        if let (Ok(w), Ok(xc)) = (&c.halfwidth, &c.xi_c) {
            ws.push(*w);
            xcs.push(*xc);
        }
        per_n.push(json!({
            "n": c.n,
            "packet_halfwidth": w,
            "packet_halfwidth_error": w_err,
            "xi_c": xc,
            "xi_c_error": xc_err,
            "quality_min_xi": c.points.first().map(|p| p.quality),
            "quality_max_xi": c.points.last().map(|p| p.quality),
        }));
    }
    let fit = if ws.len() >= 2 {
        match analytics::linear_fit(&ws, &xcs) {
            Ok(f) => json!({"slope": f.slope, "intercept": f.intercept, "r_squared": f.r_squared}),
            Err(e) => json!({"error": e.to_string()}),
        }
    } else {
        json!({"error": "fewer than two chain lengths with both w_p and xi_c"})
    };
    let summary = json!({
        "scenario": "sweep-xi",
        "engine": "reduced",
        "v": cfg.v,
        "noise": noise_json(&cfg.noise),
        "xi_grid": cfg.xi_grid(),
        "per_n": per_n,
        "fit": fit,
    });
    Ok(ScenarioOutput { scenario: Scenario::SweepXi, rows, summary, passed: true })
}

/// Long-time blocking run for one `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockingPoint {
    pub n: usize,
    pub t: f64,
    pub converged: bool,
    pub sz: Vec<f64>,
    pub sz_first: f64,
    pub sz_total_plus_n: f64,
    pub transferred: f64,
    pub predicted: analytics::FinalStatePrediction,
    pub state: CMatrix,
}

pub fn blocking_point(cfg: &ScenarioConfig, n: usize) -> Result<BlockingPoint> {
    let net = build_network(&ScenarioConfig { coupled: false, ..cfg.clone() }, n)?;
    let kernel = build_kernel(net.positions(), cfg.noise.xi)?;
    let liouv = ReducedLiouvillian::from_model(&net, &kernel, &cfg.noise, Frame::Rotating)?;
    let rho0 = reduced::ReducedState::excited(n, 0)?;
    let run = integrate::evolve_to_stationary(&liouv, rho0.rho(), cfg.dt, cfg.stationary_tol)?;
    let obs = liouv.observe(&run.state);
    let sz_first = obs.sz[0];
    let sz_total_plus_n = obs.sz.iter().sum::<f64>() + n as f64;
    let predicted = analytics::predict_final_state(&net, &kernel, &cfg.noise)?;
    Ok(BlockingPoint {
        n,
        t: run.t,
        converged: run.converged,
        sz_first,
        sz_total_plus_n,
        transferred: sz_total_plus_n - (sz_first + 1.0),
        sz: obs.sz,
        predicted,
        state: run.state,
    })
}

pub fn run_blocking(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let pool = thread_pool(cfg.workers)?;
    let points: Vec<BlockingPoint> =
        pool.install(|| (1..=cfg.n_max).into_par_iter().map(|n| blocking_point(cfg, n)).collect::<Result<_>>())?;
    let mut rows = Vec::new();
    let mut table = Vec::new();
    for p in &points {
        for (j, sz) in p.sz.iter().enumerate() {
            rows.push(ResultRow {
                xi: Some(cfg.noise.xi),
                t: Some(p.t),
                site: Some(j + 1),
                sz: Some(*sz),
                fidelity: (j == 0).then(|| linalg::fidelity(&p.state, &p.predicted.rho)),
                extra: if j == 0 {
                    format!(
                        "predicted_sz={};{}",
                        super::output::format_real(p.predicted.sz_first),
                        if p.converged { "converged" } else { "cap-reached" }
                    )
                } else {
                    String::new()
                },
                ..ResultRow::new("blocking", p.n)
            });
        }
        table.push(json!({
            "n": p.n,
            "t": p.t,
            "converged": p.converged,
            "sz_first": p.sz_first,
            "sz_first_predicted": p.predicted.sz_first,
            "sz_total_plus_n": p.sz_total_plus_n,
            "sz_total_plus_n_predicted": p.predicted.sz_total_plus_n,
            "transferred": p.transferred,
            "transferred_predicted": p.predicted.transferred,
        }));
    }
    let summary = json!({
        "scenario": "blocking",
        "engine": "reduced",
        "noise": noise_json(&cfg.noise),
        "stationary_tol": cfg.stationary_tol,
        "table": table,
    });
    Ok(ScenarioOutput { scenario: Scenario::Blocking, rows, summary, passed: true })
}

/// Per-pass end-site data of a strobe run.
#[derive(Debug, Clone, PartialEq)]
pub struct StrobePass {
    pub pass: usize,
    /// Zero-based site the packet refocuses on after this pass.
    pub site: usize,
    pub population: f64,
    pub sz_first: f64,
    pub sz_last: f64,
    pub abs_sx_first: f64,
    pub abs_sx_last: f64,
    pub purity: f64,
    /// Fidelity to `½|Ψ⟩⟨Ψ| + ½|g⟩⟨g|` with `Ψ = (|1⟩ + |N⟩)/√2`.
    pub fidelity_plus: f64,
    /// Same with `Ψ = (|1⟩ − |N⟩)/√2`.
    pub fidelity_minus: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrobeResult {
    pub passes: Vec<StrobePass>,
    pub fit: Result<analytics::TwoExpFit>,
    /// Pass closest to the fitted crossover, if the fit separated two scales.
    pub crossover_pass: Option<usize>,
}

pub fn strobe(cfg: &ScenarioConfig) -> Result<StrobeResult> {
    if cfg.passes < 40 {
        return Err(Error::Config(format!("strobe needs at least 40 passes, got {}", cfg.passes)));
    }
    let n = cfg.n_spins;
    let net = build_network(cfg, n)?;
    let kernel = build_kernel(net.positions(), cfg.noise.xi)?;
    let liouv = ReducedLiouvillian::from_model(&net, &kernel, &cfg.noise, Frame::Rotating)?;
    let t_pass = analytics::arrival_time(&net)?;
    let dt = cfg.dt.unwrap_or_else(|| liouv.default_dt());
    let plus = analytics::intermediate_mixture(n, 1.0);
    let minus = analytics::intermediate_mixture(n, -1.0);
    let opts = EvolveOptions { dt: Some(dt), sample_every: usize::MAX, ..EvolveOptions::new(t_pass) };

    let mut rho = reduced::ReducedState::excited(n, 0)?.into_inner();
    let mut passes = Vec::with_capacity(cfg.passes);
    for m in 1..=cfg.passes {
        let (_, next) = integrate::evolve(&liouv, &rho, &opts)?;
        rho = next;
        let obs = liouv.observe(&rho);
        let site = if m % 2 == 1 { n - 1 } else { 0 };
        passes.push(StrobePass {
            pass: m,
            site,
            population: rho[(site, site)].re,
            sz_first: obs.sz[0],
            sz_last: obs.sz[n - 1],
            abs_sx_first: obs.abs_sx[0],
            abs_sx_last: obs.abs_sx[n - 1],
            purity: obs.purity,
            fidelity_plus: linalg::fidelity(&rho, &plus),
            fidelity_minus: linalg::fidelity(&rho, &minus),
        });
    }
    let ms: Vec<f64> = passes.iter().map(|p| p.pass as f64).collect();
    let ps: Vec<f64> = passes.iter().map(|p| p.population).collect();
    let fit = analytics::fit_two_exponential(&ms, &ps);
    let crossover_pass = fit
        .as_ref()
        .ok()
        .and_then(|f| f.crossover())
        .map(|c| (c.round() as usize).clamp(1, cfg.passes));
    Ok(StrobeResult { passes, fit, crossover_pass })
}

pub fn run_strobe(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let res = strobe(cfg)?;
    let n = cfg.n_spins;
    let t_pass = PI / (2.0 * cfg.g);
    let mut rows = Vec::with_capacity(2 * res.passes.len());
    for p in &res.passes {
        for (site, sz, sx) in [(0, p.sz_first, p.abs_sx_first), (n - 1, p.sz_last, p.abs_sx_last)] {
            rows.push(ResultRow {
                xi: Some(cfg.noise.xi),
                t: Some(p.pass as f64 * t_pass),
                site: Some(site + 1),
                sz: Some(sz),
                abs_sx: Some(sx),
                purity: Some(p.purity),
                quality: (site == p.site).then_some(sz),
                fidelity: Some(p.fidelity_plus),
                extra: format!("pass={};fidelity_minus={}", p.pass, super::output::format_real(p.fidelity_minus)),
                ..ResultRow::new("strobe", n)
            });
        }
    }
    let at = |m: Option<usize>| m.and_then(|m| res.passes.get(m - 1));
    let best = |f: fn(&StrobePass) -> f64| {
        res.passes
            .iter()
            .max_by(|a, b| f(a).total_cmp(&f(b)))
            .map(|p| json!({"pass": p.pass, "fidelity": f(p)}))
    };
    let fit = match &res.fit {
        Ok(f) => json!({
            "fit_failed": false,
            "collapsed": f.collapsed,
            "fast_rate": f.fast_rate,
            "slow_rate": f.slow_rate,
            "fast_amplitude": f.fast_amplitude,
            "slow_amplitude": f.slow_amplitude,
            "rate_ratio": f.rate_ratio(),
            "fast_time_constant": 1.0 / f.fast_rate,
            "slow_time_constant": 1.0 / f.slow_rate,
            "sse": f.sse,
            "single_exponential_sse": f.single_sse,
            "breakpoint_pass": f.breakpoint + 1,
        }),
        Err(e) => json!({"fit_failed": true, "error": e.to_string()}),
    };
    let summary = json!({
        "scenario": "strobe",
        "engine": "reduced",
        "n_spins": n,
        "passes": cfg.passes,
        "noise": noise_json(&cfg.noise),
        "fit": fit,
        "crossover_pass": res.crossover_pass,
        "fidelity_at_crossover": at(res.crossover_pass).map(|p| p.fidelity_plus),
        "fidelity_minus_at_crossover": at(res.crossover_pass).map(|p| p.fidelity_minus),
        "fidelity_max": best(|p| p.fidelity_plus),
        "fidelity_minus_max": best(|p| p.fidelity_minus),
    });
    Ok(ScenarioOutput { scenario: Scenario::Strobe, rows, summary, passed: true })
}

/// One named validation check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }

    fn from_result(name: impl Into<String>, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((ok, d)) => Self::new(name, ok, d),
            Err(e) => Self::new(name, false, e.to_string()),
        }
    }
}

/// Largest element deviation between the projected full run and the reduced
/// run over one period `π/g`, both integrated with the same step.
pub fn engine_deviation(
    net: &NetworkSpec,
    noise: &NoiseSpec,
    fault: Fault,
) -> Result<f64> {
    let n = net.n_spins();
    let kernel = build_kernel(net.positions(), noise.xi)?;
    let full = FullLiouvillian::new(net, &kernel, noise, Frame::Rotating, DEFAULT_FULL_CAP)?;
    let mut h = reduced::build_hamiltonian_reduced(net, Frame::Rotating);
    if fault == Fault::NegateReducedHamiltonian {
        h = -h;
    }
    let rates = reduced::build_dephasing_rates(net, &kernel, noise)?;
    let jumps = if noise.c_relax_down > 0.0 {
        reduced::build_jump_operators(net, &kernel, noise)?
    } else {
        reduced::JumpOperatorSet::empty(n)
    };
    let red = ReducedLiouvillian::new(&h, &rates, &jumps)?;
    let dt = full.default_dt().min(red.default_dt());
    let period = analytics::arrival_time(net)? * 2.0;
    let opts = EvolveOptions { dt: Some(dt), keep_states: true, ..EvolveOptions::new(period) };
    let (fs, _) = integrate::evolve(&full, &full::embed_reduced(n, reduced::ReducedState::excited(n, 0)?.rho()), &opts)?;
    let (rs, _) = integrate::evolve(&red, reduced::ReducedState::excited(n, 0)?.rho(), &opts)?;
    Ok(fs
        .states
        .iter()
        .zip(&rs.states)
        .map(|(f, r)| linalg::max_abs_diff(&full::project_to_reduced(n, f), r))
        .fold(0.0, f64::max))
}

/// Decay rate of `ρ_ab` under the full engine, from a log-linear fit.
pub fn fitted_coherence_rate(n: usize, a_up: &[usize], b_up: &[usize], kernel: &CorrelationKernel, c: f64) -> Result<f64> {
    let net = NetworkSpec::uncoupled(n, 100.0, 1.0, 0.0)?;
    let noise = NoiseSpec { xi: 0.0, c_dephasing: c, c_relax_down: 0.0, c_relax_up: 0.0 };
    let liouv = FullLiouvillian::new(&net, kernel, &noise, Frame::Rotating, DEFAULT_FULL_CAP)?;
    let (a, b) = (full::basis_index(n, a_up), full::basis_index(n, b_up));
    let d = 1usize << n;
    let mut rho = CMatrix::zeros(d, d);
    rho[(a, a)] = Complex64::new(0.5, 0.0);
    rho[(b, b)] = Complex64::new(0.5, 0.0);
    rho[(a, b)] = Complex64::new(0.5, 0.0);
    rho[(b, a)] = Complex64::new(0.5, 0.0);
    let opts = EvolveOptions { sample_every: 8, keep_states: true, ..EvolveOptions::new(1.0) };
    let (series, _) = integrate::evolve(&liouv, &rho, &opts)?;
    let (ts, ys): (Vec<f64>, Vec<f64>) = series
        .times
        .iter()
        .zip(&series.states)
        .map(|(t, s)| (*t, s[(a, b)].norm()))
        .filter(|(_, y)| *y > 1e-300)
        .map(|(t, y)| (t, y.ln()))
        .unzip();
    if ts.len() < 2 {
        return Ok(f64::INFINITY);
    }
    Ok(-analytics::linear_fit(&ts, &ys)?.slope)
}

fn check_equivalence(fault: Fault) -> Vec<Check> {
    let mut checks = Vec::new();
    for n in [4, 5] {
        for xi in [0.2, 2.0, 20.0] {
            for (kind, v, nu, noise) in [
                ("dephasing", 1.0, 0.0, NoiseSpec::dephasing(xi, 1.0)),
                ("relaxation", 0.0, 1.0, NoiseSpec::relaxation(xi, 1.0)),
            ] {
                let name = format!("engine-equivalence N={n} xi={xi} {kind}");
                let r = NetworkSpec::pst_chain(n, 100.0, 1.0, v, nu)
                    .and_then(|net| engine_deviation(&net, &noise, fault))
                    .map(|dev| (dev < 1e-6, format!("max deviation {dev:.3e}")));
                checks.push(Check::from_result(name, r));
            }
        }
    }
    checks
}

fn check_transfer() -> Vec<Check> {
    let mut checks = Vec::new();
    for n in [4, 8, 20] {
        let r = (|| {
            let net = NetworkSpec::pst_chain(n, 100.0, 1.0, 0.0, 0.0)?;
            let (_, q, _) = transfer_run(&net, &NoiseSpec::default(), None)?;
            let liouv = ReducedLiouvillian::from_model(&net, &CorrelationKernel::identity(n), &NoiseSpec::default(), Frame::Rotating)?;
            let rho0 = reduced::ReducedState::excited(n, 0)?;
            let (_, back) = reduced::evolve_reduced(&rho0, &liouv, &EvolveOptions::new(PI))?;
            let f = linalg::fidelity(back.rho(), rho0.rho());
            Ok((q >= 1.0 - 1e-6 && f >= 1.0 - 1e-6, format!("quality {q:.9}, period fidelity {f:.9}")))
        })();
        checks.push(Check::from_result(format!("perfect-transfer N={n}"), r));
    }
    checks
}

fn check_rate_oracle() -> Vec<Check> {
    let c = 0.25;
    let gamma = 2.0 * c;
    let cases: [(&str, &[usize], &[usize]); 2] = [("0011-1100", &[2, 3], &[0, 1]), ("0000-1111", &[], &[0, 1, 2, 3])];
    let mut checks = Vec::new();
    for (label, a, b) in cases {
        for (limit, kernel) in [
            (KernelLimit::Uncorrelated, CorrelationKernel::identity(4)),
            (KernelLimit::PerfectlyCorrelated, CorrelationKernel::all_ones(4)),
        ] {
            let expected = analytics::rate_oracle(a, b, limit, gamma);
            let r = fitted_coherence_rate(4, a, b, &kernel, c).map(|got| {
                let ok = if expected == 0.0 { got.abs() < 1e-8 } else { (got / expected - 1.0).abs() < 0.01 };
                (ok, format!("fitted {got:.6}, predicted {expected:.6}"))
            });
            checks.push(Check::from_result(format!("rate-oracle {label} {limit:?}"), r));
        }
    }
    checks
}

fn check_blocking() -> Vec<Check> {
    let cfg = ScenarioConfig::defaults(Scenario::Blocking);
    (1..=cfg.n_max)
        .map(|n| {
            let r = blocking_point(&cfg, n).map(|p| {
                let errs = [
                    (p.sz_first - p.predicted.sz_first).abs(),
                    (p.sz_total_plus_n - p.predicted.sz_total_plus_n).abs(),
                    (p.transferred - p.predicted.transferred).abs(),
                ];
                let worst = errs.iter().copied().fold(0.0, f64::max);
                (worst < 1e-3, format!("worst scalar deviation {worst:.3e}"))
            });
            Check::from_result(format!("blocking n={n}"), r)
        })
        .collect()
}

fn check_divergence_detection() -> Check {
    let r = (|| {
        let net = NetworkSpec::pst_chain(6, 100.0, 1.0, 1.0, 0.0)?;
        let noise = NoiseSpec::dephasing(2.0, 1.0);
        let liouv = ReducedLiouvillian::from_model(&net, &build_kernel(net.positions(), 2.0)?, &noise, Frame::Rotating)?;
        // RK4 is unstable beyond |λ|dt ≈ 2.8 on the imaginary axis.
        let dt = 10.0 / liouv.rate_bound();
        let rho0 = reduced::ReducedState::excited(6, 0)?;
        match reduced::evolve_reduced(&rho0, &liouv, &EvolveOptions::new(20.0).dt(dt)) {
            Err(Error::Diverged { .. }) => Ok((true, format!("divergence reported at dt = {dt:.4}"))),
            Err(e) => Ok((false, format!("unexpected error: {e}"))),
            Ok(_) => Ok((false, format!("dt = {dt:.4} was not flagged"))),
        }
    })();
    Check::from_result("divergence-detection", r)
}

pub fn run_validate(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let pool = thread_pool(cfg.workers)?;
    let fault = cfg.fault;
    let groups: Vec<Vec<Check>> = pool.install(|| {
        let jobs: Vec<Box<dyn Fn() -> Vec<Check> + Send + Sync>> = vec![
            Box::new(move || check_equivalence(fault)),
            Box::new(check_transfer),
            Box::new(check_rate_oracle),
            Box::new(check_blocking),
            Box::new(|| vec![check_divergence_detection()]),
        ];
        jobs.par_iter().map(|job| job()).collect()
    });
    let checks: Vec<Check> = groups.into_iter().flatten().collect();
    let passed = checks.iter().all(|c| c.passed);
    let rows = checks
        .iter()
        .map(|c| ResultRow {
            extra: format!("{}: {} ({})", c.name, if c.passed { "pass" } else { "fail" }, c.detail),
            ..ResultRow::new("validate", 0)
        })
        .collect();
    let summary = json!({
        "scenario": "validate",
        "fault": format!("{:?}", cfg.fault),
        "passed": passed,
        "failed": checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect::<Vec<_>>(),
        "checks": checks.iter().map(|c| json!({"name": c.name, "passed": c.passed, "detail": c.detail})).collect::<Vec<_>>(),
    });
    Ok(ScenarioOutput { scenario: Scenario::Validate, rows, summary, passed })
}
