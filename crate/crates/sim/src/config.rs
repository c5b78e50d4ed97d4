//! Flat `key = value` experiment configuration.
//!
//! Command-line flags use the same keys, so both sources go through
//! [`ExperimentConfig::set`] and report errors the same way.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ristrain_core::baselines::{group_reduce, SchemeId, SchemeSetup};
use ristrain_core::channel::CorrelationSpec;
use ristrain_core::phase_model::PhaseSearch;
use ristrain_core::{DesignOptions, Estimator, ReflectionModel, SystemDims};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    /// 1-based line in the config file; `None` for command-line values.
    pub line: Option<usize>,
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(field: &str, message: impl Into<String>) -> Self {
        Self {
            line: None,
            field: field.to_string(),
            message: message.into(),
        }
    }

    fn at(mut self, line: Option<usize>) -> Self {
        self.line = self.line.or(line);
        self
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}, field `{}`: {}", self.field, self.message),
            None => write!(f, "field `{}`: {}", self.field, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Profile {
    Desk,
    Paper,
}

impl FromStr for Profile {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s.trim() {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            other => Err(ConfigError::new("profile", format!("expected `desk` or `paper`, got `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub k: usize,
    pub m: usize,
    pub l: usize,
    /// Defaults to `M+1`.
    pub b: Option<usize>,
    /// Defaults to `K`.
    pub tau: Option<usize>,
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub beta_min: f64,
    pub alpha: f64,
    pub delta: f64,
    pub psi_ue: f64,
    pub psi_ris: f64,
    pub psi_bs: f64,
    pub schemes: Vec<SchemeId>,
    pub estimator: Estimator,
    pub accel: bool,
    pub eps: f64,
    pub max_iter: usize,
    pub grid_points: usize,
    /// Grouping factor for a bare `grouped` scheme entry.
    pub rho: usize,
    /// Simulate reception for empirical NMSE.
    pub simulate: bool,
    /// Record wall-clock times; off keeps output byte-identical across runs.
    pub timing: bool,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn profile(p: Profile) -> Self {
        let (k, m, l) = match p {
            Profile::Desk => (2, 8, 4),
            Profile::Paper => (4, 20, 16),
        };
        Self {
            k,
            m,
            l,
            b: None,
            tau: None,
            snr_db: vec![-5.0, 0.0, 5.0, 10.0],
            trials: 50,
            seed: 1,
            beta_min: 0.2,
            alpha: 2.0,
            delta: 0.43 * PI,
            psi_ue: 0.2,
            psi_ris: 0.4,
            psi_bs: 0.6,
            schemes: SchemeId::STANDARD.to_vec(),
            estimator: Estimator::Ls,
            accel: false,
            eps: 1e-3,
            max_iter: 500,
            grid_points: PhaseSearch::default().grid_points,
            rho: 2,
            simulate: true,
            timing: false,
            output: None,
        }
    }

    /// Parses a config file over the desk profile, or over the profile named
    /// by a `profile = ...` line.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::parse_with(text, None)
    }

    /// Like [`Self::parse`]; a given `base` profile overrides the file's.
    pub fn parse_with(text: &str, base: Option<Profile>) -> Result<Self, ConfigError> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::new(line, "expected `key = value`").at(Some(i + 1)))?;
            entries.push((i + 1, key.trim().to_string(), value.trim().to_string()));
        }
        let mut profile = Profile::Desk;
        if let Some((line, _, v)) = entries.iter().find(|(_, k, _)| normalize_key(k) == "profile") {
            profile = v.parse::<Profile>().map_err(|e| e.at(Some(*line)))?;
        }
        let mut cfg = Self::profile(base.unwrap_or(profile));
        for (line, key, value) in &entries {
            if normalize_key(key) != "profile" {
                cfg.set(key, value).map_err(|e| e.at(Some(*line)))?;
            }
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path, base: Option<Profile>) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("config", format!("cannot read {}: {e}", path.display())))?;
        Self::parse_with(&text, base)
    }

    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let key = normalize_key(key);
        let f = key.as_str();
        match f {
            "k" => self.k = parse_count(f, value)?,
            "m" => self.m = parse_count(f, value)?,
            "l" => self.l = parse_count(f, value)?,
            "b" => self.b = Some(parse_count(f, value)?),
            "tau" => self.tau = Some(parse_count(f, value)?),
            "snr_db" => {
                self.snr_db = split_list(value).map(|v| parse_real(f, v)).collect::<Result<_, _>>()?;
                if self.snr_db.is_empty() {
                    return Err(ConfigError::new(f, "expected at least one SNR value"));
                }
            }
            "trials" => self.trials = parse_count(f, value)?,
            "seed" => self.seed = value.parse().map_err(|_| bad(f, "unsigned integer", value))?,
            "beta_min" => self.beta_min = parse_real(f, value)?,
            "alpha" => self.alpha = parse_real(f, value)?,
            "delta" => self.delta = parse_angle(f, value)?,
            "psi_ue" => self.psi_ue = parse_real(f, value)?,
            "psi_ris" => self.psi_ris = parse_real(f, value)?,
            "psi_bs" => self.psi_bs = parse_real(f, value)?,
            "scheme" | "schemes" => {
                self.schemes = if value.trim() == "all" {
                    SchemeId::STANDARD.to_vec()
                } else {
                    split_list(value)
                        .map(|s| match s {
                            "grouped" => Ok(SchemeId::ProposedGrouped(0)),
                            _ => s.parse::<SchemeId>().map_err(|_| bad(f, "scheme name", s)),
                        })
                        .collect::<Result<_, _>>()?
                };
                if self.schemes.is_empty() {
                    return Err(ConfigError::new(f, "expected at least one scheme"));
                }
            }
            "estimator" => self.estimator = value.parse().map_err(|_| bad(f, "`ls` or `lmmse`", value))?,
            "accel" | "accelerate" => self.accel = parse_bool(f, value)?,
            "eps" => self.eps = parse_real(f, value)?,
            "max_iter" => self.max_iter = parse_count(f, value)?,
            "grid_points" => self.grid_points = parse_count(f, value)?,
            "rho" => self.rho = parse_count(f, value)?,
            "simulate" => self.simulate = parse_bool(f, value)?,
            "timing" => self.timing = parse_bool(f, value)?,
            "output" => self.output = Some(PathBuf::from(value)),
            _ => return Err(ConfigError::new(f, "unknown key")),
        }
        Ok(())
    }

    /// Checks cross-field invariants and resolves defaults.
    pub fn validate(&self) -> Result<Resolved, ConfigError> {
        let b = self.b.unwrap_or(self.m + 1);
        let tau = self.tau.unwrap_or(self.k);
        if b < self.m + 1 {
            return Err(ConfigError::new("b", format!("B = {b} must be at least M+1 = {}", self.m + 1)));
        }
        if tau < self.k {
            return Err(ConfigError::new("tau", format!("tau = {tau} must be at least K = {}", self.k)));
        }
        let dims = SystemDims::new(self.k, self.m, self.l, b, tau).map_err(|e| ConfigError::new("m", e.to_string()))?;
        let model = ReflectionModel::new(self.beta_min, self.alpha, self.delta)
            .map_err(|e| ConfigError::new("beta_min", e.to_string()))?;
        let corr = CorrelationSpec::new(self.psi_ue, self.psi_ris, self.psi_bs)
            .map_err(|e| ConfigError::new("psi_ue", e.to_string()))?;
        if !(self.eps > 0.0) {
            return Err(ConfigError::new("eps", "must be positive"));
        }
        for (i, s) in self.snr_db.iter().enumerate() {
            if self.snr_db[..i].contains(s) {
                return Err(ConfigError::new("snr_db", format!("duplicate value {s}")));
            }
        }
        let mut schemes = Vec::with_capacity(self.schemes.len());
        for &s in &self.schemes {
            let s = match s {
                SchemeId::ProposedGrouped(0) => SchemeId::ProposedGrouped(self.rho),
                other => other,
            };
            match s {
                SchemeId::ProposedGrouped(rho) => {
                    group_reduce(self.m, rho).map_err(|e| ConfigError::new("rho", e.to_string()))?;
                    if b != self.m + 1 {
                        return Err(ConfigError::new("b", "grouping needs the minimal B = M+1"));
                    }
                }
                SchemeId::OnOff if b != self.m + 1 => {
                    return Err(ConfigError::new("b", "the on-off scheme needs B = M+1"));
                }
                _ => {}
            }
            if !schemes.contains(&s) {
                schemes.push(s);
            }
        }
        let options = DesignOptions {
            eps: self.eps,
            max_iter: self.max_iter,
            accelerate: self.accel,
            search: PhaseSearch::with_grid(self.grid_points),
        };
        Ok(Resolved {
            dims,
            model,
            corr,
            schemes,
            options,
        })
    }
}

/// Validated, typed view of a config.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub dims: SystemDims,
    pub model: ReflectionModel,
    pub corr: CorrelationSpec,
    pub schemes: Vec<SchemeId>,
    pub options: DesignOptions,
}

impl Resolved {
    pub fn setup(&self, snr_db: f64) -> SchemeSetup {
        SchemeSetup::at_snr(self.dims, self.model, self.corr, snr_db, self.options)
    }
}

fn normalize_key(k: &str) -> String {
    k.trim().trim_start_matches("--").replace('-', "_").to_ascii_lowercase()
}

fn split_list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn bad(field: &str, expected: &str, got: &str) -> ConfigError {
    ConfigError::new(field, format!("expected {expected}, got `{got}`"))
}

fn parse_count(field: &str, v: &str) -> Result<usize, ConfigError> {
    match v.parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(bad(field, "positive integer", v)),
    }
}

fn parse_real(field: &str, v: &str) -> Result<f64, ConfigError> {
    v.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| bad(field, "real number", v))
}

fn parse_bool(field: &str, v: &str) -> Result<bool, ConfigError> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(bad(field, "boolean", v)),
    }
}

/// Radians, optionally as a multiple of π: `1.35`, `0.43pi`, `0.43π`, `pi`.
pub fn parse_angle(field: &str, v: &str) -> Result<f64, ConfigError> {
    let t = v.trim().to_ascii_lowercase();
    let scaled = t.strip_suffix("pi").or_else(|| t.strip_suffix('π')).map(|c| c.trim().trim_end_matches('*').trim());
    match scaled {
        Some("") => Ok(PI),
        Some(c) => parse_real(field, c).map(|x| x * PI).map_err(|_| bad(field, "angle", v)),
        None => parse_real(field, &t).map_err(|_| bad(field, "angle", v)),
    }
}
