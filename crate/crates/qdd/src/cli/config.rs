//! `key = value` run configuration with flag overrides.

use super::presets::InitialData;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("{key}: cannot parse {value:?}: {message}")]
    Value {
        key: String,
        value: String,
        message: String,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n_cells: usize,
    pub hbar: f64,
    pub t_final: f64,
    /// Relaxation parameters, descending for the diffusive-limit sweep.
    pub epsilon: Vec<f64>,
    pub initial: InitialData,
    /// Weight of the diagonal part in the initial density matrix.
    pub theta: f64,
    pub out: PathBuf,
    pub seed: u64,
    /// Solver or integrator tolerance; each command has its own default.
    pub tol: Option<f64>,
    /// Number of equally spaced output frames after `t = 0`.
    pub frames: usize,
    /// Mesh family for convergence studies and kernel checks.
    pub n_list: Vec<usize>,
    pub kernel_times: Vec<f64>,
    /// Spatial grid size of the auxiliary-kernel table.
    pub aux_grid: usize,
    /// `ħ` used for the static continuum comparison.
    pub static_hbar: f64,
    pub audit_sizes: Vec<usize>,
    pub audit_trials: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_cells: 32,
            hbar: 0.1,
            t_final: 0.5,
            epsilon: vec![0.4, 0.2, 0.1],
            initial: InitialData::CosineBump,
            theta: 0.5,
            out: PathBuf::from("out"),
            seed: 7,
            tol: None,
            frames: 10,
            n_list: vec![16, 32, 64],
            kernel_times: vec![1.0, 0.5, 0.25],
            aux_grid: 64,
            static_hbar: 1.0,
            audit_sizes: vec![2, 3, 4, 8, 16],
            audit_trials: 200,
        }
    }
}

fn parse_scalar<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: Display,
{
    value.trim().parse().map_err(|e: T::Err| ConfigError::Value {
        key: key.into(),
        value: value.into(),
        message: e.to_string(),
    })
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: Display,
{
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_scalar(key, s))
        .collect()
}

impl RunConfig {
    /// Sets one key; `line` is only used in error messages.
    pub fn set(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        let v = value.trim();
        match key {
            "n_cells" => self.n_cells = parse_scalar(key, v)?,
            "hbar" => self.hbar = parse_scalar(key, v)?,
            "t_final" => self.t_final = parse_scalar(key, v)?,
            "epsilon" => self.epsilon = parse_list(key, v)?,
            "initial" => self.initial = InitialData::parse(v)?,
            "theta" => self.theta = parse_scalar(key, v)?,
            "out" => self.out = PathBuf::from(v),
            "seed" => self.seed = parse_scalar(key, v)?,
            "tol" => self.tol = Some(parse_scalar(key, v)?),
            "frames" => self.frames = parse_scalar(key, v)?,
            "n_list" => self.n_list = parse_list(key, v)?,
            "kernel_times" => self.kernel_times = parse_list(key, v)?,
            "aux_grid" => self.aux_grid = parse_scalar(key, v)?,
            "static_hbar" => self.static_hbar = parse_scalar(key, v)?,
            "audit_sizes" => self.audit_sizes = parse_list(key, v)?,
            "audit_trials" => self.audit_trials = parse_scalar(key, v)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.into(),
                })
            }
        }
        Ok(())
    }

    /// Applies a config text on top of `self`. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                text: raw.into(),
            })?;
            self.set(key.trim(), value, i + 1)?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.into(),
            message: e.to_string(),
        })?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.n_cells < 2 {
            return bad(format!("n_cells must be at least 2, got {}", self.n_cells));
        }
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return bad(format!("hbar must be positive, got {}", self.hbar));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return bad(format!("t_final must be positive, got {}", self.t_final));
        }
        if self.epsilon.is_empty() || self.epsilon.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return bad("epsilon must be a non-empty list of positive numbers".into());
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return bad(format!("theta must lie in [0, 1], got {}", self.theta));
        }
        if let Some(t) = self.tol {
            if !(t > 0.0 && t.is_finite()) {
                return bad(format!("tol must be positive, got {t}"));
            }
        }
        if self.frames == 0 {
            return bad("frames must be at least 1".into());
        }
        if self.n_list.is_empty() || self.n_list.iter().any(|n| *n < 2) {
            return bad("n_list entries must be at least 2".into());
        }
        if self.kernel_times.is_empty() || self.kernel_times.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
            return bad("kernel_times must lie in (0, 1]".into());
        }
        if self.aux_grid < 4 || !self.aux_grid.is_multiple_of(2) {
            return bad(format!("aux_grid must be even and at least 4, got {}", self.aux_grid));
        }
        if !(self.static_hbar > 0.0 && self.static_hbar.is_finite()) {
            return bad(format!("static_hbar must be positive, got {}", self.static_hbar));
        }
        if self.audit_sizes.is_empty() || self.audit_sizes.iter().any(|n| *n < 2) {
            return bad("audit_sizes entries must be at least 2".into());
        }
        if self.audit_trials == 0 {
            return bad("audit_trials must be at least 1".into());
        }
        Ok(())
    }

    /// Output frame times `t_final·k/frames`, `k = 0..=frames`.
    pub fn frame_times(&self) -> Vec<f64> {
        (0..=self.frames)
            .map(|k| self.t_final * k as f64 / self.frames as f64)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_lists() {
        let mut c = RunConfig::default();
        c.apply_text("# sweep\nn_cells = 16  # coarse\nepsilon = 0.3, 0.1\n\ninitial = uniform\n")
            .unwrap();
        assert_eq!(c.n_cells, 16);
        assert_eq!(c.epsilon, vec![0.3, 0.1]);
        assert_eq!(c.initial, InitialData::Uniform);
    }

    #[test]
    fn unknown_key_reports_line() {
        let mut c = RunConfig::default();
        let err = c.apply_text("hbar = 0.1\nmesh = 4\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::UnknownKey {
                line: 2,
                key: "mesh".into()
            }
        );
    }

    #[test]
    fn frame_times_end_at_t_final() {
        let c = RunConfig {
            t_final: 0.3,
            frames: 3,
            ..RunConfig::default()
        };
        let f = c.frame_times();
        assert_eq!(f.len(), 4);
        assert_eq!(f[3], 0.3);
    }
}
