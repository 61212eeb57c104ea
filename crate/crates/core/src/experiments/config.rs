//! Flat `key = value` scenario configuration.
//!
//! One assignment per line, `#` starts a comment, lists are comma separated.
//! Lengths are in units of the inter-spin distance `d`, energies and rates in
//! units with `ħ = 1`, times in the matching inverse units.
//!
//! | key | unit / type | meaning |
//! |---|---|---|
//! | `n_spins` | integer | chain length N |
//! | `omega_q` | energy | level splitting coefficient of σ_z |
//! | `g` | energy | transfer-profile scale, couplings `g√(j(N−j))` |
//! | `coupled` | bool | `false` gives zero couplings |
//! | `v`, `nu` | dimensionless | uniform dephasing / relaxation couplings |
//! | `dephasing_couplings`, `relaxation_couplings` | list | per-site overrides |
//! | `xi` | d | correlation length, `inf` for perfect correlation |
//! | `c_dephasing`, `c_relax_down`, `c_relax_up` | rate | spectral amplitudes |
//! | `engine` | `full`/`reduced`/`auto` | propagation engine |
//! | `dt`, `t_final` | time | step (default from the rate bound) and horizon |
//! | `sample_every` | integer | record every k-th step |
//! | `initial_site` | integer, 1-based | initially excited spin |
//! | `xi_list` | list of d | explicit sweep grid |
//! | `xi_min`, `xi_max`, `xi_points` | d, d, integer | log-spaced sweep grid |
//! | `n_list` | list of integers | chain lengths for the sweep |
//! | `passes` | integer | strobe passes |
//! | `n_max` | integer | largest n in the blocking table |
//! | `stationary_tol` | rate | long-time drift criterion |
//! | `workers` | integer | worker threads for sweeps |
//! | `fault` | `none`/`negate-reduced-hamiltonian` | validation mutation hook |

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::NoiseSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Evolve,
    SweepXi,
    Blocking,
    Strobe,
    Validate,
}

impl Scenario {
    pub const ALL: [Scenario; 5] =
        [Scenario::Evolve, Scenario::SweepXi, Scenario::Blocking, Scenario::Strobe, Scenario::Validate];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Evolve => "evolve",
            Scenario::SweepXi => "sweep-xi",
            Scenario::Blocking => "blocking",
            Scenario::Strobe => "strobe",
            Scenario::Validate => "validate",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EngineChoice {
    Full,
    Reduced,
    #[default]
    Auto,
}

impl FromStr for EngineChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Self::Full),
            "reduced" => Ok(Self::Reduced),
            "auto" => Ok(Self::Auto),
            _ => Err(Error::Config(format!("unknown engine '{s}' (full|reduced|auto)"))),
        }
    }
}

/// Deliberate defects for exercising the validation suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    NegateReducedHamiltonian,
}

impl FromStr for Fault {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "negate-reduced-hamiltonian" => Ok(Self::NegateReducedHamiltonian),
            _ => Err(Error::Config(format!("unknown fault '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub n_spins: usize,
    pub omega_q: f64,
    pub g: f64,
    pub coupled: bool,
    pub v: f64,
    pub nu: f64,
    pub dephasing_couplings: Option<Vec<f64>>,
    pub relaxation_couplings: Option<Vec<f64>>,
    pub noise: NoiseSpec,
    pub engine: EngineChoice,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub sample_every: usize,
    pub initial_site: usize,
    pub xi_list: Option<Vec<f64>>,
    pub xi_min: f64,
    pub xi_max: f64,
    pub xi_points: usize,
    pub n_list: Vec<usize>,
    pub passes: usize,
    pub n_max: usize,
    pub stationary_tol: f64,
    pub workers: Option<usize>,
    pub fault: Fault,
}

impl ScenarioConfig {
    /// Defaults: `ω_q = 100`, `g = 1`, couplings `v, ν ∈ {0, 1}` by scenario.
    pub fn defaults(scenario: Scenario) -> Self {
        let base = Self {
            scenario,
            n_spins: 20,
            omega_q: 100.0,
            g: 1.0,
            coupled: true,
            v: 1.0,
            nu: 0.0,
            dephasing_couplings: None,
            relaxation_couplings: None,
            noise: NoiseSpec { xi: 0.2, c_dephasing: 1.0, c_relax_down: 0.0, c_relax_up: 0.0 },
            engine: EngineChoice::Auto,
            dt: None,
            t_final: None,
            sample_every: 4,
            initial_site: 1,
            xi_list: None,
            xi_min: 0.1,
            xi_max: 100.0,
            xi_points: 32,
            n_list: vec![6, 10, 14, 20, 26],
            passes: 200,
            n_max: 10,
            stationary_tol: 1e-9,
            workers: None,
            fault: Fault::None,
        };
        let relaxation = |mut c: Self| {
            c.v = 0.0;
            c.nu = 1.0;
            c.noise = NoiseSpec { xi: 100.0, c_dephasing: 0.0, c_relax_down: 1.0, c_relax_up: 0.0 };
            c
        };
        match scenario {
            Scenario::Evolve | Scenario::SweepXi | Scenario::Validate => base,
            Scenario::Strobe => relaxation(base),
            Scenario::Blocking => {
                let mut c = relaxation(base);
                c.coupled = false;
                c.noise.xi = f64::INFINITY;
                c
            }
        }
    }

    /// Defaults overridden by the assignments in `text`.
    pub fn from_text(scenario: Scenario, text: &str) -> Result<Self> {
        let mut cfg = Self::defaults(scenario);
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {}", lineno + 1, strip_prefix(e))))?;
        }
        self.validate()
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "scenario" => {
                let s: Scenario = value.parse()?;
                if s != self.scenario {
                    return Err(Error::Config(format!(
                        "config is for '{s}' but scenario '{}' was requested",
                        self.scenario
                    )));
                }
            }
            "n_spins" => self.n_spins = parse(key, value)?,
            "omega_q" => self.omega_q = parse(key, value)?,
            "g" => self.g = parse(key, value)?,
            "coupled" => self.coupled = parse(key, value)?,
            "v" => self.v = parse(key, value)?,
            "nu" => self.nu = parse(key, value)?,
            "dephasing_couplings" => self.dephasing_couplings = Some(parse_list(key, value)?),
            "relaxation_couplings" => self.relaxation_couplings = Some(parse_list(key, value)?),
            "xi" => self.noise.xi = parse(key, value)?,
            "c_dephasing" => self.noise.c_dephasing = parse(key, value)?,
            "c_relax_down" => self.noise.c_relax_down = parse(key, value)?,
            "c_relax_up" => self.noise.c_relax_up = parse(key, value)?,
            "engine" => self.engine = value.parse()?,
            "dt" => self.dt = Some(parse(key, value)?),
            "t_final" => self.t_final = Some(parse(key, value)?),
            "sample_every" => self.sample_every = parse(key, value)?,
            "initial_site" => self.initial_site = parse(key, value)?,
            "xi_list" => self.xi_list = Some(parse_list(key, value)?),
            "xi_min" => self.xi_min = parse(key, value)?,
            "xi_max" => self.xi_max = parse(key, value)?,
            "xi_points" => self.xi_points = parse(key, value)?,
            "n_list" => self.n_list = parse_list(key, value)?,
            "passes" => self.passes = parse(key, value)?,
            "n_max" => self.n_max = parse(key, value)?,
            "stationary_tol" => self.stationary_tol = parse(key, value)?,
            "workers" => self.workers = Some(parse(key, value)?),
            "fault" => self.fault = value.parse()?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_spins == 0 {
            return bad("n_spins must be >= 1".into());
        }
        if !(self.omega_q.is_finite() && self.omega_q > 0.0) {
            return bad("omega_q must be > 0".into());
        }
        if !(self.g.is_finite() && self.g > 0.0) {
            return bad("g must be > 0".into());
        }
        if self.sample_every == 0 {
            return bad("sample_every must be >= 1".into());
        }
        if self.initial_site == 0 || self.initial_site > self.n_spins {
            return bad(format!("initial_site must lie in 1..={}", self.n_spins));
        }
        if let Some(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return bad("dt must be > 0".into());
            }
        }
        if let Some(t) = self.t_final {
            if !(t.is_finite() && t >= 0.0) {
                return bad("t_final must be >= 0".into());
            }
        }
        if !(self.xi_min > 0.0 && self.xi_max > self.xi_min && self.xi_points >= 2) {
            return bad("sweep grid needs 0 < xi_min < xi_max and xi_points >= 2".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be >= 1".into());
        }
        if self.n_list.iter().any(|&n| n < 2) {
            return bad("n_list entries must be >= 2".into());
        }
        self.noise.validate().map_err(|e| Error::Config(strip_prefix(e)))
    }

    /// Sweep grid: `xi_list` if given, else `xi_points` log-spaced values.
    pub fn xi_grid(&self) -> Vec<f64> {
        if let Some(list) = &self.xi_list {
            return list.clone();
        }
        log_grid(self.xi_min, self.xi_max, self.xi_points)
    }
}

pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

fn strip_prefix(e: Error) -> String {
    match e {
        Error::Config(m) | Error::Input(m) => m,
        other => other.to_string(),
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("cannot parse '{value}' for key '{key}'")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}
