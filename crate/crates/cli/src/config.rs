//! Flat `key = value` run configuration.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use semiclassical::atom_laser::{AtomLaserParams, Panel};
use semiclassical::grid_analysis::Grid;
use semiclassical::hesd::{HesdOptions, Sigma1Form};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("`{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
}

/// Everything a command needs. Defaults reproduce panel (a) of the reference
/// density figure with γ = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: AtomLaserParams,
    pub n_points: usize,
    pub box_length: f64,
    pub t_final: f64,
    pub snapshot_stride: usize,
    pub ode_tol: f64,
    pub pde_dt: f64,
    pub cross_term_correction: bool,
    pub sigma1_form: Sigma1Form,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: AtomLaserParams::fig1(Panel::A),
            n_points: 2048,
            box_length: 32.0,
            t_final: 1.0,
            snapshot_stride: 100,
            ode_tol: 1e-10,
            pde_dt: 1e-3,
            cross_term_correction: false,
            sigma1_form: Sigma1Form::NormIdentity,
            output_dir: PathBuf::from("out"),
        }
    }
}

const KEYS: [&str; 21] = [
    "model",
    "c1",
    "c2",
    "eps",
    "gamma",
    "lambda",
    "kappa",
    "hbar",
    "N",
    "zeta",
    "p0",
    "x0",
    "n_points",
    "box",
    "t_final",
    "snapshot_stride",
    "ode_tol",
    "pde_dt",
    "cross_term_correction",
    "sigma1_form",
    "output_dir",
];

fn invalid(key: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        reason: reason.into(),
    }
}

fn real(key: &'static str, v: &str) -> Result<f64, ConfigError> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(invalid(key, format!("`{v}` is not a finite number"))),
    }
}

fn count(key: &'static str, v: &str) -> Result<usize, ConfigError> {
    v.parse::<usize>()
        .map_err(|_| invalid(key, format!("`{v}` is not a non-negative integer")))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen = BTreeSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((k, v)) = content.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("expected `key = value`, got `{content}`"),
                });
            };
            let (k, v) = (k.trim(), v.trim());
            let Some(&key) = KEYS.iter().find(|&&name| name == k) else {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: k.into(),
                });
            };
            if !seen.insert(key) {
                return Err(ConfigError::Duplicate {
                    line,
                    key: k.into(),
                });
            }
            cfg.set(key, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &'static str, v: &str) -> Result<(), ConfigError> {
        let p = &mut self.params;
        match key {
            "model" if v == "atom_laser" => {}
            "model" => {
                return Err(invalid(
                    key,
                    format!("unsupported model `{v}`; only atom_laser is built in"),
                ))
            }
            "c1" => p.c1 = real(key, v)?,
            "c2" => p.c2 = real(key, v)?,
            "eps" => p.eps = real(key, v)?,
            "gamma" => p.gamma = real(key, v)?,
            "lambda" => p.lambda = real(key, v)?,
            "kappa" => p.kappa = real(key, v)?,
            "hbar" => p.hbar = real(key, v)?,
            "N" => p.n_atoms = real(key, v)?,
            "zeta" => p.zeta = real(key, v)?,
            "p0" => p.p0 = real(key, v)?,
            "x0" => p.x0 = real(key, v)?,
            "n_points" => self.n_points = count(key, v)?,
            "box" => self.box_length = real(key, v)?,
            "t_final" => self.t_final = real(key, v)?,
            "snapshot_stride" => self.snapshot_stride = count(key, v)?,
            "ode_tol" => self.ode_tol = real(key, v)?,
            "pde_dt" => self.pde_dt = real(key, v)?,
            "cross_term_correction" => {
                self.cross_term_correction = v
                    .parse()
                    .map_err(|_| invalid(key, format!("`{v}` is not true or false")))?
            }
            "sigma1_form" => {
                self.sigma1_form = Sigma1Form::parse(v).ok_or_else(|| {
                    invalid(
                        key,
                        format!("`{v}` is neither norm_identity nor conservative"),
                    )
                })?
            }
            "output_dir" if v.is_empty() => return Err(invalid(key, "empty path")),
            "output_dir" => self.output_dir = PathBuf::from(v),
            _ => unreachable!("key list and setter disagree on `{key}`"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = &self.params;
        let positive = [
            ("gamma", p.gamma),
            ("hbar", p.hbar),
            ("N", p.n_atoms),
            ("zeta", p.zeta),
            ("box", self.box_length),
            ("pde_dt", self.pde_dt),
        ];
        for (key, v) in positive {
            if !(v > 0.0) {
                return Err(invalid(key, format!("must be positive, got {v}")));
            }
        }
        if p.hbar > 1.0 {
            return Err(invalid(
                "hbar",
                format!("{} is not a small parameter", p.hbar),
            ));
        }
        if p.lambda < 0.0 {
            return Err(invalid(
                "lambda",
                format!("dissipation must be non-negative, got {}", p.lambda),
            ));
        }
        if !(16..=1 << 20).contains(&self.n_points) || !self.n_points.is_power_of_two() {
            return Err(invalid(
                "n_points",
                format!("{} is not a power of two in [16, 2^20]", self.n_points),
            ));
        }
        if !(self.t_final >= 0.0) {
            return Err(invalid(
                "t_final",
                format!("must be non-negative, got {}", self.t_final),
            ));
        }
        if self.snapshot_stride == 0 {
            return Err(invalid("snapshot_stride", "must be at least 1"));
        }
        if !(1e-14..=1e-3).contains(&self.ode_tol) {
            return Err(invalid(
                "ode_tol",
                format!("{:e} outside [1e-14, 1e-3]", self.ode_tol),
            ));
        }
        if self.pde_dt > 0.1 {
            return Err(invalid("pde_dt", format!("{} above 0.1", self.pde_dt)));
        }
        Ok(())
    }

    pub fn grid(&self) -> semiclassical::Result<Grid> {
        Grid::centered(self.box_length, self.n_points)
    }

    pub fn hesd_options(&self) -> HesdOptions {
        HesdOptions {
            sigma1_form: self.sigma1_form,
            cross_term_correction: self.cross_term_correction,
            ..HesdOptions::new(self.params.lambda, self.params.kappa)
        }
    }

    pub fn with_hbar(&self, hbar: f64) -> Self {
        Self {
            params: self.params.with_hbar(hbar),
            ..self.clone()
        }
    }

    /// Resolved configuration as `(key, value)` pairs in key order, for
    /// output headers.
    pub fn metadata(&self) -> Vec<(String, String)> {
        let p = &self.params;
        let num = |v: f64| format!("{v:e}");
        let values = [
            "atom_laser".to_string(),
            num(p.c1),
            num(p.c2),
            num(p.eps),
            num(p.gamma),
            num(p.lambda),
            num(p.kappa),
            num(p.hbar),
            num(p.n_atoms),
            num(p.zeta),
            num(p.p0),
            num(p.x0),
            self.n_points.to_string(),
            num(self.box_length),
            num(self.t_final),
            self.snapshot_stride.to_string(),
            num(self.ode_tol),
            num(self.pde_dt),
            self.cross_term_correction.to_string(),
            self.sigma1_form.name().to_string(),
            self.output_dir.display().to_string(),
        ];
        KEYS.iter().map(|k| k.to_string()).zip(values).collect()
    }

    /// Output times `0, s, 2s, …` with `s = pde_dt · snapshot_stride`, closed
    /// by `t_final`.
    pub fn output_times(&self) -> Vec<f64> {
        let step = self.pde_dt * self.snapshot_stride as f64;
        let mut times: Vec<f64> = (0..)
            .map(|k| k as f64 * step)
            .take_while(|&t| t < self.t_final - 1e-9 * step)
            .collect();
        times.push(self.t_final);
        times
    }
}
