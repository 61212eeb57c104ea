//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.
//!
//! Reference values are computed here from closed forms or independent
//! constructions; the library is only used as the system under test.

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use nalgebra::DVector;
use num_complex::Complex64;
use spincorr::analytics;
use spincorr::experiments::config::{log_grid, Scenario, ScenarioConfig};
use spincorr::experiments::scenarios::{self, engine_deviation};
use spincorr::experiments::Fault;
use spincorr::full::{Frame, FullLiouvillian, DEFAULT_FULL_CAP};
use spincorr::integrate::{self, EvolveOptions, MasterEquation};
use spincorr::linalg::{self, CMatrix};
use spincorr::reduced::{self, ReducedLiouvillian, ReducedState};
use spincorr::{CorrelationKernel, NetworkSpec, NoiseSpec};

struct Outcome {
    id: &'static str,
    title: &'static str,
    checks: Vec<(String, bool)>,
}

impl Outcome {
    fn new(id: &'static str, title: &'static str) -> Self {
        Self { id, title, checks: Vec::new() }
    }

    fn check(&mut self, ok: bool, detail: String) {
        self.checks.push((detail, ok));
    }

    fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.1)
    }

    fn line(&self) -> String {
        let details: Vec<String> = self
            .checks
            .iter()
            .map(|(d, ok)| if *ok { d.clone() } else { format!("!! {d}") })
            .collect();
        format!(
            "{} [{}] {}: {}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            details.join("; ")
        )
    }
}

/// Least-squares slope of `ln y` against `t`.
fn log_slope(t: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = t.iter().zip(y).filter(|(_, y)| **y > 0.0).map(|(t, y)| (*t, y.ln())).collect();
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    sxy / sxx
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Deterministic uniform numbers in `[0, 1)`.
struct Lcg(u64);

impl Lcg {
    fn next(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }
}

fn pair_radiance() -> Outcome {
    let mut out = Outcome::new("C1", "pair super/subradiance");
    let gamma = 0.8;
    let net = NetworkSpec::uncoupled(2, 100.0, 0.0, 1.0).unwrap();
    let noise = NoiseSpec::relaxation(0.0, gamma);
    // |↑↓⟩ is index 2, |↓↑⟩ index 1 (first spin is the most significant bit).
    let state = |sign: f64| {
        let mut psi = DVector::from_element(4, c(0.0));
        psi[2] = c(std::f64::consts::FRAC_1_SQRT_2);
        psi[1] = c(sign * std::f64::consts::FRAC_1_SQRT_2);
        psi
    };
    let run = |kernel: &CorrelationKernel, sign: f64, t_final: f64| {
        let l = FullLiouvillian::new(&net, kernel, &noise, Frame::Rotating, DEFAULT_FULL_CAP).unwrap();
        let psi = state(sign);
        let opts = EvolveOptions::new(t_final).sample_every(4).keep_states();
        let (s, _) = integrate::evolve(&l, &linalg::projector(&psi), &opts).unwrap();
        let pop: Vec<f64> = s.states.iter().map(|r| linalg::fidelity_pure(r, &psi)).collect();
        (s.times, pop)
    };
    let ones = CorrelationKernel::all_ones(2);
    let (t, p) = run(&ones, 1.0, 2.0 / gamma);
    let rate = -log_slope(&t, &p);
    out.check((rate / (2.0 * gamma) - 1.0).abs() < 0.01, format!("symmetric rate {rate:.6} vs 2γ = {}", 2.0 * gamma));
    let (_, p) = run(&ones, -1.0, 10.0 / gamma);
    let change = p.iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max);
    out.check(change < 1e-8, format!("antisymmetric population change {change:.2e}"));
    for sign in [1.0, -1.0] {
        let (t, p) = run(&CorrelationKernel::identity(2), sign, 2.0 / gamma);
        let rate = -log_slope(&t, &p);
        out.check(
            (rate / gamma - 1.0).abs() < 0.01,
            format!("uncorrelated {} rate {rate:.6} vs γ = {gamma}", if sign > 0.0 { "+" } else { "-" }),
        );
    }
    out
}

fn dephasing_scaling() -> Outcome {
    let mut out = Outcome::new("C2", "dephasing-rate scaling");
    let cd = 0.25;
    // Single-spin coherence sets γ; the four-spin rates are checked relative to it.
    let coherence = |n: usize, a: usize, b: usize, kernel: &CorrelationKernel, t_final: f64| {
        let net = NetworkSpec::uncoupled(n, 100.0, 1.0, 0.0).unwrap();
        let l = FullLiouvillian::new(&net, kernel, &NoiseSpec::dephasing(0.0, cd), Frame::Rotating, DEFAULT_FULL_CAP)
            .unwrap();
        let d = 1 << n;
        let mut rho = CMatrix::zeros(d, d);
        for (r, col) in [(a, a), (b, b), (a, b), (b, a)] {
            rho[(r, col)] = c(0.5);
        }
        let (s, _) = integrate::evolve(&l, &rho, &EvolveOptions::new(t_final).sample_every(4).keep_states()).unwrap();
        let y: Vec<f64> = s.states.iter().map(|m| m[(a, b)].norm()).collect();
        (s.times, y)
    };
    let (t, y) = coherence(1, 0, 1, &CorrelationKernel::identity(1), 2.0);
    let gamma = -log_slope(&t, &y);
    out.check((gamma / (2.0 * cd) - 1.0).abs() < 0.01, format!("single-spin γ {gamma:.6}"));
    let i0011 = 0b0011;
    let i1100 = 0b1100;
    let i1111 = 0b1111;
    let cases = [
        ("0011-1100 uncorrelated", i0011, i1100, CorrelationKernel::identity(4), Some(4.0)),
        ("0011-1100 correlated", i0011, i1100, CorrelationKernel::all_ones(4), None),
        ("0000-1111 uncorrelated", 0, i1111, CorrelationKernel::identity(4), Some(4.0)),
        ("0000-1111 correlated", 0, i1111, CorrelationKernel::all_ones(4), Some(16.0)),
    ];
    for (label, a, b, k, factor) in cases {
        let (t, y) = coherence(4, a, b, &k, 0.5);
        match factor {
            Some(f) => {
                let rate = -log_slope(&t, &y);
                out.check((rate / (f * gamma) - 1.0).abs() < 0.01, format!("{label} rate/γ {:.5}", rate / gamma));
            }
            None => {
                let drift = y.iter().map(|v| (v - 0.5).abs()).fold(0.0, f64::max);
                out.check(drift < 1e-8, format!("{label} drift {drift:.2e}"));
            }
        }
    }
    out
}

fn blocking() -> Outcome {
    let mut out = Outcome::new("C3", "relaxation blocking n = 1..10");
    let mut worst: f64 = 0.0;
    for n in 1..=10usize {
        let net = NetworkSpec::uncoupled(n, 100.0, 0.0, 1.0).unwrap();
        let noise = NoiseSpec::relaxation(f64::INFINITY, 1.0);
        let l = ReducedLiouvillian::from_model(&net, &CorrelationKernel::all_ones(n), &noise, Frame::Rotating).unwrap();
        let rho0 = ReducedState::excited(n, 0).unwrap();
        let run = integrate::evolve_to_stationary(&l, rho0.rho(), None, 1e-9).unwrap();
        let obs = l.observe(&run.state);
        let nf = n as f64;
        let sz1 = obs.sz[0];
        let total = obs.sz.iter().sum::<f64>() + nf;
        let transferred = total - (sz1 + 1.0);
        let errs = [
            (sz1 - (-1.0 + 2.0 * (nf - 1.0).powi(2) / (nf * nf))).abs(),
            (total - (2.0 - 2.0 / nf)).abs(),
            (transferred - (2.0 / nf - 2.0 / (nf * nf))).abs(),
        ];
        let e = errs.iter().copied().fold(0.0, f64::max);
        worst = worst.max(e);
        if !run.converged || e >= 1e-3 {
            out.check(false, format!("n={n}: deviation {e:.2e}, converged {}", run.converged));
        }
    }
    out.check(worst < 1e-3, format!("worst deviation {worst:.2e}"));
    out
}

fn perfect_transfer() -> Outcome {
    let mut out = Outcome::new("C4", "perfect state transfer");
    for n in [4usize, 8, 20] {
        let net = NetworkSpec::pst_chain(n, 100.0, 1.0, 0.0, 0.0).unwrap();
        let l = ReducedLiouvillian::from_model(&net, &CorrelationKernel::identity(n), &NoiseSpec::default(), Frame::Rotating)
            .unwrap();
        let rho0 = ReducedState::excited(n, 0).unwrap();
        let (s, _) = reduced::evolve_reduced(&rho0, &l, &EvolveOptions::new(PI / 2.0)).unwrap();
        let q = analytics::transfer_quality(&s, &net).unwrap();
        let (_, back) = reduced::evolve_reduced(&rho0, &l, &EvolveOptions::new(PI)).unwrap();
        let f = back.rho()[(0, 0)].re;
        out.check(q >= 1.0 - 1e-6 && f >= 1.0 - 1e-6, format!("N={n}: 1-q {:.1e}, 1-F {:.1e}", 1.0 - q, 1.0 - f));
    }
    out
}

fn engine_equivalence() -> Outcome {
    let mut out = Outcome::new("C5", "full vs reduced engine equivalence");
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for n in [4usize, 5] {
        for xi in [0.2, 2.0, 20.0] {
            for (kind, v, nu, noise) in [
                ("dephasing", 1.0, 0.0, NoiseSpec::dephasing(xi, 1.0)),
                ("relaxation", 0.0, 1.0, NoiseSpec::relaxation(xi, 1.0)),
            ] {
                let net = NetworkSpec::pst_chain(n, 100.0, 1.0, v, nu).unwrap();
                let dev = engine_deviation(&net, &noise, Fault::None).unwrap();
                worst = worst.max(dev);
                if dev >= 1e-6 {
                    out.check(false, format!("N={n} xi={xi} {kind}: {dev:.2e}"));
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    out.check(worst < 1e-6, format!("max deviation {worst:.2e}"));
    out.check(secs < 60.0, format!("runtime {secs:.1} s"));
    out
}

fn sweep_config(n_list: Vec<usize>, v: f64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::defaults(Scenario::SweepXi);
    cfg.n_list = n_list;
    cfg.v = v;
    cfg
}

fn quality_step() -> Outcome {
    let mut out = Outcome::new("C6", "transfer-quality step and xi_c fit");
    let curves = scenarios::sweep_curves(&sweep_config(vec![6, 10, 14, 20, 26], 1.0)).unwrap();
    let mut ws = Vec::new();
    let mut xcs = Vec::new();
    for c in &curves {
        let (lo, hi) = (c.points.first().unwrap(), c.points.last().unwrap());
        out.check(
            (lo.xi - 0.1).abs() < 1e-12 && lo.quality < 0.3,
            format!("N={} q(0.1)={:.3}", c.n, lo.quality),
        );
        out.check(
            (hi.xi - 100.0).abs() < 1e-9 && hi.quality > 0.95,
            format!("N={} q(100)={:.4}", c.n, hi.quality),
        );
        match (&c.halfwidth, &c.xi_c) {
            (Ok(w), Ok(x)) => {
                ws.push(*w);
                xcs.push(*x);
            }
            (w, x) => out.check(false, format!("N={} extraction failed: {w:?} {x:?}", c.n)),
        }
    }
    let xc_text: Vec<String> = xcs.iter().map(|x| format!("{x:.3}")).collect();
    let w_text: Vec<String> = ws.iter().map(|x| format!("{x:.3}")).collect();
    out.check(
        xcs.len() == curves.len() && xcs.windows(2).all(|w| w[1] > w[0]),
        format!("xi_c [{}] over w_p [{}] strictly increasing", xc_text.join(", "), w_text.join(", ")),
    );
    // Independent least squares.
    let n = ws.len() as f64;
    let (mx, my) = (ws.iter().sum::<f64>() / n, xcs.iter().sum::<f64>() / n);
    let sxx: f64 = ws.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = ws.iter().zip(&xcs).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = xcs.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = sxy * sxy / (sxx * syy);
    out.check(r2 > 0.9, format!("R² {r2:.4}"));
    out.check((1.3..=2.1).contains(&slope), format!("slope {slope:.3}"));
    out.check((-1.4..=-0.4).contains(&intercept), format!("intercept {intercept:.3}"));
    out
}

fn weak_coupling() -> Outcome {
    let mut out = Outcome::new("C7", "weak-coupling independence of xi_c");
    let xc = |v: f64| {
        let curves = scenarios::sweep_curves(&sweep_config(vec![14], v)).unwrap();
        curves[0].xi_c.clone().unwrap()
    };
    let (strong, weak) = (xc(1.0), xc(0.3));
    let grid = log_grid(0.1, 100.0, 32);
    let cell = (grid[1] / grid[0]).ln();
    let cells = (strong / weak).ln().abs() / cell;
    out.check(cells <= 1.0, format!("xi_c(v=1) {strong:.3}, xi_c(v=0.3) {weak:.3}, {cells:.2} grid cells apart"));
    out
}

fn ground_coherence_rates() -> Outcome {
    let mut out = Outcome::new("C8", "residual dephasing of ground-state coherence");
    let mut rng = Lcg(7);
    let mut worst: f64 = 0.0;
    for n in [2usize, 5, 12] {
        let v: Vec<f64> = (0..n).map(|_| 0.1 + 2.0 * rng.next()).collect();
        let cd = 0.3 + rng.next();
        let net = NetworkSpec::uncoupled(n, 100.0, 1.0, 0.0).unwrap().with_dephasing_couplings(v.clone()).unwrap();
        let rates =
            reduced::build_dephasing_rates(&net, &CorrelationKernel::all_ones(n), &NoiseSpec::dephasing(f64::INFINITY, cd))
                .unwrap();
        for j in 0..n {
            let expected = 2.0 * cd * v[j] * v[j];
            worst = worst.max((rates.get(j, n) - expected).abs()).max((rates.get(n, j) - expected).abs());
        }
    }
    out.check(worst < 1e-12, format!("ground coherences off by {worst:.1e}"));
    let mut block: f64 = 0.0;
    for (n, v) in [(3usize, 1.0), (8, 0.4), (20, 1.7)] {
        let net = NetworkSpec::pst_chain(n, 100.0, 1.0, v, 0.0).unwrap();
        let rates =
            reduced::build_dephasing_rates(&net, &CorrelationKernel::all_ones(n), &NoiseSpec::dephasing(f64::INFINITY, 0.9))
                .unwrap();
        for j in 0..n {
            for k in 0..n {
                block = block.max(rates.get(j, k).abs());
            }
        }
    }
    out.check(block < 1e-12, format!("intra-block rates at most {block:.1e}"));
    out
}

fn two_timescales() -> Outcome {
    let mut out = Outcome::new("C9", "two-timescale relaxation and intermediate state");
    let mut cfg = ScenarioConfig::defaults(Scenario::Strobe);
    cfg.noise.xi = 100.0;
    let res = scenarios::strobe(&cfg).unwrap();
    match &res.fit {
        Ok(f) => out.check(
            f.rate_ratio() < 0.1,
            format!("xi=100: slow {:.4} / fast {:.4} = {:.4}", f.slow_rate, f.fast_rate, f.rate_ratio()),
        ),
        Err(e) => out.check(false, format!("xi=100 fit failed: {e}")),
    }
    // Independent target (|1⟩ + |N⟩)/√2 mixed evenly with |g⟩.
    let n = cfg.n_spins;
    let mut target = CMatrix::zeros(n + 1, n + 1);
    for (r, col) in [(0, 0), (0, n - 1), (n - 1, 0), (n - 1, n - 1)] {
        target[(r, col)] = c(0.25);
    }
    target[(n, n)] = c(0.5);
    match res.crossover_pass {
        Some(m) => {
            let p = &res.passes[m - 1];
            let f = p.fidelity_plus;
            let plus_check = (f - linalg::fidelity(&target_state(&cfg, m), &target)).abs();
            out.check(
                f > 0.95 && plus_check < 1e-9,
                format!("fidelity at pass {m}: {f:.4} (relative sign minus: {:.4})", p.fidelity_minus),
            );
        }
        None => out.check(false, "no crossover pass".into()),
    }
    let mut weak = cfg.clone();
    weak.noise.xi = 0.2;
    let res = scenarios::strobe(&weak).unwrap();
    match &res.fit {
        Ok(f) => out.check(f.rate_ratio() > 0.5, format!("xi=0.2: ratio {:.3} (collapsed {})", f.rate_ratio(), f.collapsed)),
        Err(e) => out.check(false, format!("xi=0.2 fit failed: {e}")),
    }
    out
}

/// Reduced state after `passes` passes, recomputed directly.
fn target_state(cfg: &ScenarioConfig, passes: usize) -> CMatrix {
    let n = cfg.n_spins;
    let net = NetworkSpec::pst_chain(n, 100.0, 1.0, 0.0, 1.0).unwrap();
    let k = spincorr::build_kernel(net.positions(), cfg.noise.xi).unwrap();
    let l = ReducedLiouvillian::from_model(&net, &k, &cfg.noise, Frame::Rotating).unwrap();
    let dt = l.default_dt();
    let mut rho = ReducedState::excited(n, 0).unwrap().into_inner();
    for _ in 0..passes {
        let opts = EvolveOptions::new(PI / 2.0).dt(dt).sample_every(usize::MAX);
        rho = integrate::evolve(&l, &rho, &opts).unwrap().1;
    }
    rho
}

fn subradiant_protection() -> Outcome {
    let mut out = Outcome::new("C10", "subradiant-subspace protection");
    let mut rng = Lcg(99);
    for n in [3usize, 5, 8] {
        let nu: Vec<f64> = (0..n).map(|_| 0.2 + rng.next()).collect();
        let cr = 1.0;
        let fast = cr * nu.iter().map(|x| x * x).sum::<f64>();
        // Stationary vectors built here: ν_j|1⟩ − ν_1|j⟩.
        let mut psi = DVector::from_element(n + 1, c(0.0));
        for j in 1..n {
            let w = rng.next() - 0.5;
            psi[0] += c(w * nu[j]);
            psi[j] -= c(w * nu[0]);
        }
        let psi = &psi / c(psi.norm());
        let net = NetworkSpec::uncoupled(n, 100.0, 0.0, 1.0).unwrap().with_relaxation_couplings(nu.clone()).unwrap();
        let l = ReducedLiouvillian::from_model(&net, &CorrelationKernel::all_ones(n), &NoiseSpec::relaxation(f64::INFINITY, cr), Frame::Rotating)
            .unwrap();
        let (s, _) = integrate::evolve(&l, &linalg::projector(&psi), &EvolveOptions::new(10.0 / fast).keep_states()).unwrap();
        let loss = s.states.iter().map(|r| r[(n, n)].re.abs()).fold(0.0, f64::max);
        out.check(loss < 1e-8, format!("N={n}: loss {loss:.1e}"));
    }
    out
}

fn main() {
    let criteria: Vec<fn() -> Outcome> = vec![
        pair_radiance,
        dephasing_scaling,
        blocking,
        perfect_transfer,
        engine_equivalence,
        quality_step,
        weak_coupling,
        ground_coherence_rates,
        two_timescales,
        subradiant_protection,
    ];
    let start = Instant::now();
    let outcomes: Vec<Outcome> = std::thread::scope(|s| {
        let handles: Vec<_> = criteria.iter().map(|f| s.spawn(f)).collect();
        handles.into_iter().map(|h| h.join().expect("criterion panicked")).collect()
    });
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "\nacceptance criteria").unwrap();
    for o in &outcomes {
        writeln!(stdout, "{}", o.line()).unwrap();
    }
    let failed = outcomes.iter().filter(|o| !o.passed()).count();
    writeln!(
        stdout,
        "acceptance: {} passed, {} failed ({:.1} s)\n",
        outcomes.len() - failed,
        failed,
        start.elapsed().as_secs_f64()
    )
    .unwrap();
    drop(stdout);
    if failed > 0 {
        std::process::exit(1);
    }
}
