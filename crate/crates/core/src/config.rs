//! Run configuration in a flat `key = value` format with `#` comments.
//!
//! ```text
//! grid.n = 128
//! domain.length = 16pi
//! cutoff.n = 40
//! time.dt = 0.002
//! ```
//!
//! Unknown keys are rejected. `Display` writes every key, and parsing that
//! output reproduces the configuration exactly.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::ConfigError;
use crate::integrator::{Coupling, IntegratorConfig};

/// Initial-condition family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Dipole,
    GaussianPair,
    /// Random band-limited charge; `None` takes the seed from `init.seed`.
    BandLimitedRandom(Option<u64>),
    MaxwellOnly,
    /// Heat flow for `ρ` with the quadratic coupling switched off.
    HeatOnly,
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Preset::Dipole => f.write_str("dipole"),
            Preset::GaussianPair => f.write_str("gaussian_pair"),
            Preset::BandLimitedRandom(None) => f.write_str("band_limited_random"),
            Preset::BandLimitedRandom(Some(s)) => write!(f, "band_limited_random({s})"),
            Preset::MaxwellOnly => f.write_str("maxwell_only"),
            Preset::HeatOnly => f.write_str("heat_only"),
        }
    }
}

impl FromStr for Preset {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "dipole" => Preset::Dipole,
            "gaussian_pair" => Preset::GaussianPair,
            "band_limited_random" => Preset::BandLimitedRandom(None),
            "maxwell_only" => Preset::MaxwellOnly,
            "heat_only" => Preset::HeatOnly,
            _ => {
                let seed = s
                    .strip_prefix("band_limited_random(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or(())?;
                Preset::BandLimitedRandom(Some(seed.trim().parse().map_err(|_| ())?))
            }
        })
    }
}

/// Names accepted by `verify.suite`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CheckName {
    GaussLaw,
    EnergyIdentity,
    GrowthBound,
    Gn,
    ScalarInequalities,
    Bernstein,
    LpLogBound,
    Contraction,
}

impl CheckName {
    pub const ALL: [CheckName; 8] = [
        CheckName::GaussLaw,
        CheckName::EnergyIdentity,
        CheckName::GrowthBound,
        CheckName::Gn,
        CheckName::ScalarInequalities,
        CheckName::Bernstein,
        CheckName::LpLogBound,
        CheckName::Contraction,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckName::GaussLaw => "gauss_law",
            CheckName::EnergyIdentity => "energy_identity",
            CheckName::GrowthBound => "growth_bound",
            CheckName::Gn => "gn",
            CheckName::ScalarInequalities => "scalar_inequalities",
            CheckName::Bernstein => "bernstein",
            CheckName::LpLogBound => "lp_log_bound",
            CheckName::Contraction => "contraction",
        }
    }
}

impl FromStr for CheckName {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        CheckName::ALL.into_iter().find(|c| c.as_str() == s).ok_or(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub grid_n: usize,
    pub domain_length: f64,
    pub cutoff_n: Option<f64>,
    pub dt: f64,
    pub t_end: f64,
    pub cfl_safety: f64,
    pub record_every: usize,
    pub preset: Preset,
    pub seed: u64,
    /// Peak of `ρ₀` (or of `E₀` for `maxwell_only`).
    pub amplitude: f64,
    pub timeseries_path: PathBuf,
    pub snapshot_dir: Option<PathBuf>,
    /// Write a snapshot every this many records; 0 writes only the last.
    pub snapshot_every: usize,
    pub verify_suite: Vec<CheckName>,
    pub verify_calibrate: bool,
    pub converge_radii: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            grid_n: 128,
            domain_length: 16.0 * std::f64::consts::PI,
            cutoff_n: None,
            dt: 2e-3,
            t_end: 1.0,
            cfl_safety: 0.5,
            record_every: 1,
            preset: Preset::GaussianPair,
            seed: 0,
            amplitude: 0.5,
            timeseries_path: PathBuf::from("timeseries.csv"),
            snapshot_dir: None,
            snapshot_every: 0,
            verify_suite: CheckName::ALL.to_vec(),
            verify_calibrate: false,
            converge_radii: vec![8.0, 16.0, 32.0],
        }
    }
}

/// Every accepted key with its default, for `--help`.
pub const KEYS: &[(&str, &str)] = &[
    ("grid.n", "grid points per axis (even, >= 8) [128]"),
    ("domain.length", "torus side L; accepts a `pi` suffix [16pi]"),
    ("cutoff.n", "Friedrichs cutoff radius in mode units, <= grid.n/3, or `none` [none]"),
    ("time.dt", "macro step [0.002]"),
    ("time.t_end", "final time [1]"),
    ("time.cfl_safety", "CFL safety factor in (0, 1] [0.5]"),
    ("record_every", "record diagnostics every k steps [1]"),
    ("init.preset", "dipole | gaussian_pair | band_limited_random(SEED) | maxwell_only | heat_only [gaussian_pair]"),
    ("init.seed", "seed for random potentials and perturbations [0]"),
    ("init.amplitude", "peak of the initial charge (field for maxwell_only) [0.5]"),
    ("output.timeseries_path", "time-series CSV, relative to --output-dir [timeseries.csv]"),
    ("output.snapshot_dir", "directory for DDMX snapshots, or `none` [none]"),
    ("output.snapshot_every", "snapshot every k records; 0 = final state only [0]"),
    ("verify.suite", "comma-separated checks or `all` [all]"),
    ("verify.calibrate", "refresh calibration constants before verifying [false]"),
    ("converge.radii", "comma-separated increasing cutoff radii [8,16,32]"),
];

fn parse_real(s: &str) -> Option<f64> {
    let v = if s == "pi" {
        std::f64::consts::PI
    } else if let Some(m) = s.strip_suffix("pi") {
        m.trim().parse::<f64>().ok()? * std::f64::consts::PI
    } else {
        s.parse().ok()?
    };
    v.is_finite().then_some(v)
}

fn parse_list<T>(s: &str, item: impl Fn(&str) -> Option<T>) -> Option<Vec<T>> {
    s.split(',').map(|p| item(p.trim())).collect()
}

fn fmt_list<T: fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen: Vec<(&str, usize)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                text: raw.to_string(),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let known = KEYS.iter().find(|(k, _)| *k == key).map(|(k, _)| *k).ok_or_else(|| {
                ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                }
            })?;
            if seen.iter().any(|(k, _)| *k == known) {
                return Err(ConfigError::Duplicate {
                    line,
                    key: key.to_string(),
                });
            }
            seen.push((known, line));
            cfg.set(known, value, line)?;
        }
        let line_of = |k: &str| seen.iter().find(|(s, _)| *s == k).map_or(0, |(_, l)| *l);
        cfg.check(&line_of)?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        let type_err = |expected: &'static str| ConfigError::Type {
            line,
            key: key.to_string(),
            value: value.to_string(),
            expected,
        };
        let real = || parse_real(value).ok_or_else(|| type_err("a finite real number"));
        let uint = || value.parse::<usize>().map_err(|_| type_err("a nonnegative integer"));
        let path = || if value == "none" { None } else { Some(PathBuf::from(value)) };
        match key {
            "grid.n" => self.grid_n = uint()?,
            "domain.length" => self.domain_length = real()?,
            "cutoff.n" => self.cutoff_n = if value == "none" { None } else { Some(real()?) },
            "time.dt" => self.dt = real()?,
            "time.t_end" => self.t_end = real()?,
            "time.cfl_safety" => self.cfl_safety = real()?,
            "record_every" => self.record_every = uint()?,
            "init.preset" => self.preset = value.parse().map_err(|_| type_err("a preset name"))?,
            "init.seed" => self.seed = value.parse().map_err(|_| type_err("an unsigned 64-bit integer"))?,
            "init.amplitude" => self.amplitude = real()?,
            "output.timeseries_path" => {
                self.timeseries_path = path().ok_or_else(|| type_err("a file path"))?;
            }
            "output.snapshot_dir" => self.snapshot_dir = path(),
            "output.snapshot_every" => self.snapshot_every = uint()?,
            "verify.suite" => {
                self.verify_suite = if value == "all" {
                    CheckName::ALL.to_vec()
                } else {
                    parse_list(value, |s| s.parse().ok()).ok_or_else(|| type_err("check names or `all`"))?
                };
            }
            "verify.calibrate" => {
                self.verify_calibrate = value.parse().map_err(|_| type_err("true or false"))?;
            }
            "converge.radii" => {
                self.converge_radii = parse_list(value, parse_real).ok_or_else(|| type_err("a list of reals"))?;
            }
            _ => unreachable!("key table and setter disagree on {key}"),
        }
        Ok(())
    }

    fn check(&self, line_of: &dyn Fn(&str) -> usize) -> Result<(), ConfigError> {
        let fail = |key: &str, reason: String| {
            Err(ConfigError::Constraint {
                line: line_of(key),
                key: key.to_string(),
                reason,
            })
        };
        if self.grid_n < 8 || self.grid_n % 2 != 0 {
            return fail("grid.n", format!("must be even and at least 8, got {}", self.grid_n));
        }
        if self.domain_length <= 0.0 {
            return fail("domain.length", "must be positive".into());
        }
        let limit = self.grid_n / 3;
        if let Some(n) = self.cutoff_n {
            if n <= 0.0 {
                return fail("cutoff.n", "must be positive".into());
            }
            if n > limit as f64 {
                return fail(
                    "cutoff.n",
                    format!("{n} exceeds the de-aliasing limit {limit} = floor(grid.n / 3)"),
                );
            }
        }
        if self.dt <= 0.0 {
            return fail("time.dt", "must be positive".into());
        }
        if self.t_end <= 0.0 {
            return fail("time.t_end", "must be positive".into());
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return fail("time.cfl_safety", "must lie in (0, 1]".into());
        }
        if self.record_every == 0 {
            return fail("record_every", "must be at least 1".into());
        }
        if self.amplitude < 0.0 {
            return fail("init.amplitude", "must be nonnegative".into());
        }
        if self.converge_radii.is_empty() || self.converge_radii.windows(2).any(|w| !(w[0] < w[1])) {
            return fail("converge.radii", "must be a nonempty increasing list".into());
        }
        // the de-aliasing bound on the radii is enforced when `converge` runs,
        // so that changing grid.n alone never invalidates the default list
        if self.converge_radii[0] <= 0.0 {
            return fail("converge.radii", "radii must be positive".into());
        }
        Ok(())
    }

    /// Seed of the random charge for `band_limited_random`.
    pub fn charge_seed(&self) -> u64 {
        match self.preset {
            Preset::BandLimitedRandom(Some(s)) => s,
            _ => self.seed,
        }
    }

    pub fn integrator_config(&self) -> IntegratorConfig {
        IntegratorConfig {
            dt: self.dt,
            t_end: self.t_end,
            cutoff_radius: self.cutoff_n,
            cfl_safety: self.cfl_safety,
            record_every: self.record_every,
            coupling: if self.preset == Preset::HeatOnly {
                Coupling::Decoupled
            } else {
                Coupling::Full
            },
        }
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "none".into());
        writeln!(f, "grid.n = {}", self.grid_n)?;
        writeln!(f, "domain.length = {}", self.domain_length)?;
        writeln!(f, "cutoff.n = {}", opt(self.cutoff_n.map(|v| v.to_string())))?;
        writeln!(f, "time.dt = {}", self.dt)?;
        writeln!(f, "time.t_end = {}", self.t_end)?;
        writeln!(f, "time.cfl_safety = {}", self.cfl_safety)?;
        writeln!(f, "record_every = {}", self.record_every)?;
        writeln!(f, "init.preset = {}", self.preset)?;
        writeln!(f, "init.seed = {}", self.seed)?;
        writeln!(f, "init.amplitude = {}", self.amplitude)?;
        writeln!(f, "output.timeseries_path = {}", self.timeseries_path.display())?;
        writeln!(
            f,
            "output.snapshot_dir = {}",
            opt(self.snapshot_dir.as_ref().map(|p| p.display().to_string()))
        )?;
        writeln!(f, "output.snapshot_every = {}", self.snapshot_every)?;
        let names: Vec<&str> = self.verify_suite.iter().map(|c| c.as_str()).collect();
        writeln!(f, "verify.suite = {}", names.join(","))?;
        writeln!(f, "verify.calibrate = {}", self.verify_calibrate)?;
        writeln!(f, "converge.radii = {}", fmt_list(&self.converge_radii))
    }
}
