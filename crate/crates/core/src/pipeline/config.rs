//! Flat `key = value` experiment configuration.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::degradation::BlurSpec;
use crate::error::{Error, Result};
use crate::frame::FrameFlavor;
use crate::let_estimator::{LetSpec, DEFAULT_OMEGA, DEFAULT_OMEGA_P, DEFAULT_XI};

/// Side of the centered square crop used unless `crop = full`.
pub const DEFAULT_CROP: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Blu,
    Tanh,
    Identity,
    Zero,
    /// Scalar Wiener filter, outside the LET family.
    Wiener,
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "blu" | "bluexp" => EstimatorKind::Blu,
            "tanh" | "tanhgate" => EstimatorKind::Tanh,
            "identity" | "id" => EstimatorKind::Identity,
            "zero" => EstimatorKind::Zero,
            "wiener" => EstimatorKind::Wiener,
            _ => return Err(Error::Config(format!("unknown estimator '{s}'"))),
        })
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorKind::Blu => "blu",
            EstimatorKind::Tanh => "tanh",
            EstimatorKind::Identity => "identity",
            EstimatorKind::Zero => "zero",
            EstimatorKind::Wiener => "wiener",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaMode {
    Heuristic,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChiMode {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseVarMode {
    Known,
    Mad,
}

impl FromStr for NoiseVarMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "known" => Ok(NoiseVarMode::Known),
            "mad" => Ok(NoiseVarMode::Mad),
            _ => Err(Error::Config(format!("noise_var must be known or mad, got '{s}'"))),
        }
    }
}

/// Experiment knobs. Every key has a default; see [`ExperimentConfig::KEYS`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub input: Option<PathBuf>,
    pub blur: BlurSpec,
    pub bsnr_db: Option<f64>,
    pub gamma: Option<f64>,
    pub seed: u64,
    pub frame: String,
    pub filter: String,
    pub levels: usize,
    pub estimator: EstimatorKind,
    pub omega: f64,
    pub xi: f64,
    pub omega_p: f64,
    pub lambda: LambdaMode,
    pub chi: ChiMode,
    pub noise_var: NoiseVarMode,
    /// `None` keeps the full image.
    pub crop: Option<usize>,
    /// Degrade the input before restoring it; otherwise the input is the observation.
    pub degrade: bool,
    /// Cross-term radius of the variance estimate; `None` keeps every lag.
    pub cross_radius: Option<usize>,
    pub seeds: usize,
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            input: None,
            blur: BlurSpec::Uniform(vec![5, 5]),
            bsnr_db: Some(30.0),
            gamma: None,
            seed: 0,
            frame: "undecimated".into(),
            filter: "sym8".into(),
            levels: 4,
            estimator: EstimatorKind::Blu,
            omega: DEFAULT_OMEGA,
            xi: DEFAULT_XI,
            omega_p: DEFAULT_OMEGA_P,
            lambda: LambdaMode::Heuristic,
            chi: ChiMode::Auto,
            noise_var: NoiseVarMode::Known,
            crop: Some(DEFAULT_CROP),
            degrade: true,
            cross_radius: None,
            seeds: 10,
            out: None,
            csv: None,
            report: None,
        }
    }
}

fn number<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{value}'")))
}

fn optional_number<T: FromStr>(key: &str, value: &str, none: &str) -> Result<Option<T>> {
    if value.eq_ignore_ascii_case(none) {
        Ok(None)
    } else {
        number(key, value).map(Some)
    }
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected a boolean, got '{value}'"))),
    }
}

impl ExperimentConfig {
    pub const KEYS: [&'static str; 23] = [
        "input", "blur", "bsnr", "gamma", "seed", "frame", "filter", "levels", "estimator", "omega", "xi",
        "omega_p", "lambda", "chi", "noise_var", "crop", "degrade", "cross_radius", "seeds", "out", "csv",
        "report", "full",
    ];

    /// Sets one key. `bsnr` and `gamma` exclude each other.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "input" => self.input = Some(PathBuf::from(value)),
            "blur" => self.blur = value.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
            "bsnr" | "bsnr_db" => {
                self.bsnr_db = optional_number(key, value, "none")?;
                if self.bsnr_db.is_some() {
                    self.gamma = None;
                }
            }
            "gamma" => {
                self.gamma = optional_number(key, value, "none")?;
                if self.gamma.is_some() {
                    self.bsnr_db = None;
                }
            }
            "seed" => self.seed = number(key, value)?,
            "frame" => self.frame = value.to_ascii_lowercase(),
            "filter" => self.filter = value.to_ascii_lowercase(),
            "levels" => self.levels = number(key, value)?,
            "estimator" => self.estimator = value.parse()?,
            "omega" => self.omega = number(key, value)?,
            "xi" => self.xi = number(key, value)?,
            "omega_p" => self.omega_p = number(key, value)?,
            "lambda" => {
                self.lambda = if value.eq_ignore_ascii_case("heuristic") {
                    LambdaMode::Heuristic
                } else {
                    LambdaMode::Fixed(number(key, value)?)
                }
            }
            "chi" => {
                self.chi = if value.eq_ignore_ascii_case("auto") {
                    ChiMode::Auto
                } else {
                    ChiMode::Fixed(number(key, value)?)
                }
            }
            "noise_var" => self.noise_var = value.parse()?,
            "crop" => self.crop = optional_number(key, value, "full")?,
            "full" => {
                if flag(key, value)? {
                    self.crop = None;
                }
            }
            "degrade" => self.degrade = flag(key, value)?,
            "cross_radius" => self.cross_radius = optional_number(key, value, "full")?,
            "seeds" => self.seeds = number(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "csv" => self.csv = Some(PathBuf::from(value)),
            "report" => self.report = Some(PathBuf::from(value)),
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    pub fn flavor(&self) -> Result<FrameFlavor> {
        FrameFlavor::from_parts(&self.frame, self.levels, &self.filter)
    }

    /// LET family for `subbands` subbands (`None` for the Wiener baseline).
    pub fn let_spec(&self, subbands: usize) -> Result<Option<LetSpec>> {
        Ok(Some(match self.estimator {
            EstimatorKind::Blu => LetSpec::blu(subbands, self.omega)?,
            EstimatorKind::Tanh => LetSpec::tanh(subbands, self.xi, self.omega_p)?,
            EstimatorKind::Identity => LetSpec::identity(subbands)?,
            EstimatorKind::Zero => LetSpec::zero(subbands)?,
            EstimatorKind::Wiener => return Ok(None),
        }))
    }

    /// Method label used in reports.
    pub fn method_id(&self) -> String {
        match self.noise_var {
            NoiseVarMode::Known => self.estimator.to_string(),
            NoiseVarMode::Mad => format!("{}+mad", self.estimator),
        }
    }

    pub fn image_id(&self) -> String {
        self.input
            .as_ref()
            .and_then(|p| p.file_stem())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "synthetic".into())
    }

    pub fn validate(&self) -> Result<()> {
        self.blur.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.degrade && self.bsnr_db.is_none() && self.gamma.is_none() {
            return Err(Error::Config("degrading needs bsnr or gamma".into()));
        }
        if self.degrade && self.bsnr_db.is_some() && self.gamma.is_some() {
            return Err(Error::Config("bsnr and gamma are mutually exclusive".into()));
        }
        if !self.degrade && self.noise_var == NoiseVarMode::Known && self.gamma.is_none() {
            return Err(Error::Config("a degraded input with noise_var = known needs gamma".into()));
        }
        if let Some(g) = self.gamma {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::Config(format!("gamma = {g}")));
            }
        }
        if let LambdaMode::Fixed(l) = self.lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::Config(format!("lambda = {l}")));
            }
        }
        if let ChiMode::Fixed(c) = self.chi {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(Error::Config(format!("chi = {c}")));
            }
        }
        if self.crop == Some(0) || self.seeds == 0 {
            return Err(Error::Config("crop and seeds must be positive".into()));
        }
        self.flavor()?;
        Ok(())
    }
}
