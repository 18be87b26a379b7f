//! Initial densities, defined on the continuum and cell-averaged onto the mesh.

use super::config::ConfigError;
use crate::grid::{self, Mesh};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    /// `n ≡ 1`.
    Uniform,
    /// `1 + 0.5·cos(2πx)`.
    CosineBump,
    /// `0.2 + 0.8·(G(0.3, 0.07) + G(0.7, 0.1))/2`, periodic unit-mass Gaussians.
    GaussianMixture,
    /// Uniform density; for density-matrix runs the initial state is the
    /// global Maxwellian itself.
    Equilibrium,
    /// `N` site values, whitespace or comma separated, `#` comments; normalised to unit mass.
    File(PathBuf),
}

pub const PRESET_NAMES: [&str; 4] = ["uniform", "cosine-bump", "gaussian-mixture", "equilibrium"];

impl InitialData {
    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "cosine-bump" => Ok(Self::CosineBump),
            "gaussian-mixture" => Ok(Self::GaussianMixture),
            "equilibrium" => Ok(Self::Equilibrium),
            _ => match s.strip_prefix('@') {
                Some(path) if !path.is_empty() => Ok(Self::File(PathBuf::from(path))),
                _ => Err(ConfigError::Value {
                    key: "initial".into(),
                    value: s.into(),
                    message: format!("expected one of {} or @FILE", PRESET_NAMES.join(", ")),
                }),
            },
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::Uniform => "uniform".into(),
            Self::CosineBump => "cosine-bump".into(),
            Self::GaussianMixture => "gaussian-mixture".into(),
            Self::Equilibrium => "equilibrium".into(),
            Self::File(p) => format!("@{}", p.display()),
        }
    }

    /// Continuum profile, if the datum has one.
    pub fn profile(&self) -> Option<fn(f64) -> f64> {
        match self {
            Self::Uniform | Self::Equilibrium => Some(|_| 1.0),
            Self::CosineBump => Some(cosine_bump),
            Self::GaussianMixture => Some(gaussian_mixture),
            Self::File(_) => None,
        }
    }

    /// Unit-mass site density on `mesh`.
    pub fn density(&self, mesh: &Mesh) -> Result<Vec<f64>, ConfigError> {
        match (self.profile(), self) {
            (Some(f), _) => grid::cell_average(f, mesh).map_err(|e| ConfigError::Invalid(e.to_string())),
            (None, Self::File(path)) => read_density(path, mesh),
            (None, _) => unreachable!("only file data lack a profile"),
        }
    }
}

pub fn cosine_bump(x: f64) -> f64 {
    1.0 + 0.5 * (2.0 * PI * x).cos()
}

fn periodic_gaussian(x: f64, mu: f64, s: f64) -> f64 {
    let r = (x - mu).rem_euclid(1.0);
    (-3..=3)
        .map(|m| {
            let d = r - m as f64;
            (-(d * d) / (2.0 * s * s)).exp()
        })
        .sum::<f64>()
        / (s * (2.0 * PI).sqrt())
}

pub fn gaussian_mixture(x: f64) -> f64 {
    0.2 + 0.8 * 0.5 * (periodic_gaussian(x, 0.3, 0.07) + periodic_gaussian(x, 0.7, 0.1))
}

fn read_density(path: &Path, mesh: &Mesh) -> Result<Vec<f64>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
        path: path.into(),
        message: e.to_string(),
    })?;
    let values: Vec<f64> = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split(|c: char| c == ',' || c.is_whitespace()))
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>().map_err(|e| ConfigError::Value {
                key: "initial".into(),
                value: s.into(),
                message: e.to_string(),
            })
        })
        .collect::<Result<_, _>>()?;
    if values.len() != mesh.n_cells() {
        return Err(ConfigError::Invalid(format!(
            "{} holds {} values, expected n_cells = {}",
            path.display(),
            values.len(),
            mesh.n_cells()
        )));
    }
    if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
        return Err(ConfigError::Invalid(format!(
            "{}: value {v} at site {i} is not positive",
            path.display()
        )));
    }
    let mass = mesh.delta() * values.iter().sum::<f64>();
    Ok(values.iter().map(|v| v / mass).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_presets_have_unit_mass() {
        let mesh = Mesh::new(64).unwrap();
        for p in [InitialData::Uniform, InitialData::CosineBump, InitialData::GaussianMixture] {
            let n = p.density(&mesh).unwrap();
            let mass = mesh.delta() * n.iter().sum::<f64>();
            assert!((mass - 1.0).abs() < 1e-12, "{} mass {mass}", p.name());
        }
    }

    #[test]
    fn file_prefix() {
        assert_eq!(
            InitialData::parse("@data/n0.txt").unwrap(),
            InitialData::File(PathBuf::from("data/n0.txt"))
        );
        assert!(InitialData::parse("@").is_err());
        assert!(InitialData::parse("bumpy").is_err());
    }
}
