//! Run configuration files.
//!
//! A run is described by one TOML document. Every section and key is
//! optional; missing keys take the defaults of [`ExperimentConfig`]. A run
//! manifest embeds the fully resolved document under `[config]`, so it can be
//! passed back as a configuration to repeat the run.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::Method;
use crate::experiment::{powers_of_ten, ExperimentConfig, WavenumberRule};
use crate::potential::{Basis, Bump, PotentialModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub experiment: ExperimentSection,
    pub noise: NoiseSection,
    pub truth: PotentialSpec,
    pub reference: PotentialSpec,
    pub basis: BasisSpec,
    pub study: StudySection,
    pub romcheck: RomcheckSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub m: usize,
    pub kmax: f64,
    /// `interior` or `right-closed`.
    pub wavenumbers: String,
    pub grid_cells: usize,
    pub method: String,
    pub epsilon: f64,
    pub rho: f64,
    pub alpha: f64,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub sigma: f64,
    pub derivatives: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpSpec {
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialSpec {
    Zero,
    GaussianBumps { support: [f64; 2], bumps: Vec<BumpSpec> },
    PiecewiseConstant { support: [f64; 2], values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BasisSpec {
    PiecewiseConstant { support: [f64; 2], cells: usize },
    GaussianBumps { support: [f64; 2], centers: Vec<f64>, width: f64 },
}

/// Settings for `mc` and `sweep`: which methods and noise levels to run, and
/// the parameter grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudySection {
    pub methods: Vec<String>,
    pub sigmas: Vec<f64>,
    pub state_parameters: Vec<f64>,
    pub alphas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RomcheckSection {
    /// Optional spectrum CSV to check instead of freshly generated data.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<String>,
}

impl Default for ConfigFile {
    fn default() -> Self {
        Self::from_experiment(&ExperimentConfig::default())
    }
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ConfigFile::default().experiment
    }
}

impl Default for NoiseSection {
    fn default() -> Self {
        ConfigFile::default().noise
    }
}

impl Default for StudySection {
    fn default() -> Self {
        Self {
            methods: vec!["LO".into(), "DA".into()],
            sigmas: vec![1e-6, 1e-5, 1e-4, 1e-3],
            state_parameters: powers_of_ten(-4, 1),
            alphas: powers_of_ten(-4, 1),
        }
    }
}

fn support_of(s: [f64; 2]) -> (f64, f64) {
    (s[0], s[1])
}

impl PotentialSpec {
    pub fn to_model(&self) -> Result<PotentialModel> {
        match self {
            PotentialSpec::Zero => Ok(PotentialModel::zero()),
            PotentialSpec::GaussianBumps { support, bumps } => PotentialModel::gaussian_bumps(
                support_of(*support),
                bumps.iter().map(|b| Bump { center: b.center, width: b.width }).collect(),
                bumps.iter().map(|b| b.amplitude).collect(),
            ),
            PotentialSpec::PiecewiseConstant { support, values } => {
                PotentialModel::piecewise_constant(support_of(*support), values.clone())
            }
        }
    }

    pub fn from_model(q: &PotentialModel) -> Self {
        let (a, b) = q.support();
        if q.n_basis() == 0 {
            return PotentialSpec::Zero;
        }
        match q.basis() {
            Basis::PiecewiseConstant { .. } => PotentialSpec::PiecewiseConstant {
                support: [a, b],
                values: q.coefficients().to_vec(),
            },
            Basis::GaussianBumps { bumps } => PotentialSpec::GaussianBumps {
                support: [a, b],
                bumps: bumps
                    .iter()
                    .zip(q.coefficients())
                    .map(|(s, &amplitude)| BumpSpec {
                        center: s.center,
                        width: s.width,
                        amplitude,
                    })
                    .collect(),
            },
        }
    }
}

impl BasisSpec {
    pub fn to_model(&self) -> Result<PotentialModel> {
        match self {
            BasisSpec::PiecewiseConstant { support, cells } => {
                PotentialModel::piecewise_constant(support_of(*support), vec![0.0; *cells])
            }
            BasisSpec::GaussianBumps { support, centers, width } => PotentialModel::gaussian_bumps(
                support_of(*support),
                centers.iter().map(|&center| Bump { center, width: *width }).collect(),
                vec![0.0; centers.len()],
            ),
        }
    }

    pub fn from_model(q: &PotentialModel) -> Self {
        let (a, b) = q.support();
        match q.basis() {
            Basis::PiecewiseConstant { cells } => BasisSpec::PiecewiseConstant {
                support: [a, b],
                cells: *cells,
            },
            Basis::GaussianBumps { bumps } => BasisSpec::GaussianBumps {
                support: [a, b],
                centers: bumps.iter().map(|s| s.center).collect(),
                width: bumps.first().map_or(0.1, |s| s.width),
            },
        }
    }
}

fn parse_rule(s: &str) -> Result<WavenumberRule> {
    match s {
        "interior" => Ok(WavenumberRule::Interior),
        "right-closed" => Ok(WavenumberRule::RightClosed),
        other => Err(Error::Config(format!(
            "experiment.wavenumbers: unknown rule `{other}` (expected interior or right-closed)"
        ))),
    }
}

fn field<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Config(msg) | Error::Invalid(msg) => Error::Config(format!("{name}: {msg}")),
        other => other,
    })
}

impl ConfigFile {
    pub fn from_experiment(cfg: &ExperimentConfig) -> Self {
        Self {
            experiment: ExperimentSection {
                m: cfg.m,
                kmax: cfg.kmax,
                wavenumbers: cfg.wavenumber_rule.as_str().into(),
                grid_cells: cfg.grid_cells,
                method: cfg.method.as_str().into(),
                epsilon: cfg.epsilon,
                rho: cfg.rho,
                alpha: cfg.alpha,
                trials: cfg.trials,
                seed: cfg.seed,
            },
            noise: NoiseSection {
                sigma: cfg.sigma,
                derivatives: cfg.noise_on_derivatives,
            },
            truth: PotentialSpec::from_model(&cfg.truth),
            reference: PotentialSpec::from_model(&cfg.reference),
            basis: BasisSpec::from_model(&cfg.basis),
            study: StudySection::default(),
            romcheck: RomcheckSection::default(),
        }
    }

    /// Parse a configuration or a run manifest (its `[config]` table).
    pub fn parse(text: &str) -> Result<Self> {
        let value: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let body = match (value.get("config"), value.get("run")) {
            (Some(toml::Value::Table(t)), Some(_)) => t.clone(),
            _ => value,
        };
        let cfg: ConfigFile = body.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.experiment_config()?;
        cfg.methods()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::File {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn experiment_config(&self) -> Result<ExperimentConfig> {
        let e = &self.experiment;
        let cfg = ExperimentConfig {
            m: e.m,
            kmax: e.kmax,
            wavenumber_rule: parse_rule(&e.wavenumbers)?,
            grid_cells: e.grid_cells,
            truth: field("truth", self.truth.to_model())?,
            reference: field("reference", self.reference.to_model())?,
            basis: field("basis", self.basis.to_model())?,
            method: field("experiment.method", e.method.parse())?,
            epsilon: e.epsilon,
            rho: e.rho,
            alpha: e.alpha,
            sigma: self.noise.sigma,
            noise_on_derivatives: self.noise.derivatives,
            trials: e.trials,
            seed: e.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn methods(&self) -> Result<Vec<Method>> {
        if self.study.methods.is_empty() {
            return Err(Error::Config("study.methods: at least one method required".into()));
        }
        self.study
            .methods
            .iter()
            .map(|s| field("study.methods", s.parse()))
            .collect()
    }

    /// Noise levels for `mc` and `sweep`; falls back to `noise.sigma`.
    pub fn sigmas(&self) -> Result<Vec<f64>> {
        let s = if self.study.sigmas.is_empty() {
            vec![self.noise.sigma]
        } else {
            self.study.sigmas.clone()
        };
        if let Some(bad) = s.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::Config(format!("study.sigmas: {bad} is not a nonnegative number")));
        }
        Ok(s)
    }

    pub fn axes(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        for (name, axis) in [("study.state_parameters", &self.study.state_parameters), ("study.alphas", &self.study.alphas)] {
            if axis.is_empty() {
                return Err(Error::Config(format!("{name}: axis is empty")));
            }
            if let Some(bad) = axis.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
                return Err(Error::Config(format!("{name}: {bad} is not a nonnegative number")));
            }
        }
        Ok((self.study.state_parameters.clone(), self.study.alphas.clone()))
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.experiment.seed = seed;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = ConfigFile::parse("").unwrap();
        assert_eq!(cfg.experiment_config().unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn resolved_config_round_trips() {
        let text = r#"
            [experiment]
            method = "lo"
            epsilon = 1e-3
            seed = 42
            [noise]
            sigma = 1e-5
            derivatives = false
            [reference]
            kind = "piecewise-constant"
            support = [0.2, 0.8]
            values = [1.0, 2.0, 0.5]
            [study]
            methods = ["DA"]
            sigmas = [0.0, 1e-4]
        "#;
        let cfg = ConfigFile::parse(text).unwrap();
        let again = ConfigFile::parse(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        let e = again.experiment_config().unwrap();
        assert_eq!(e.method, Method::Lo);
        assert_eq!(e.seed, 42);
        assert!(!e.noise_on_derivatives);
        assert_eq!(e.reference.coefficients(), &[1.0, 2.0, 0.5]);
    }

    #[test]
    fn manifest_config_table_is_accepted() {
        let inner = ConfigFile::default().to_toml();
        let inner_table: toml::Table = toml::from_str(&inner).unwrap();
        let mut doc = toml::Table::new();
        let mut run = toml::Table::new();
        run.insert("command".into(), "forward".into());
        doc.insert("run".into(), toml::Value::Table(run));
        doc.insert("config".into(), toml::Value::Table(inner_table));
        let cfg = ConfigFile::parse(&toml::to_string(&doc).unwrap()).unwrap();
        assert_eq!(cfg, ConfigFile::default());
    }

    #[test]
    fn field_level_messages() {
        let err = ConfigFile::parse("[experiment]\nmethod = \"XYZ\"\n").unwrap_err().to_string();
        assert!(err.contains("experiment.method") && err.contains("XYZ"), "{err}");
        let err = ConfigFile::parse("[experiment]\nbogus = 1\n").unwrap_err().to_string();
        assert!(err.contains("bogus"), "{err}");
        let err = ConfigFile::parse("[noise]\nsigma = -1.0\n").unwrap_err().to_string();
        assert!(err.contains("noise.sigma"), "{err}");
        let err = ConfigFile::parse("[truth]\nkind = \"gaussian-bumps\"\nsupport = [0.9, 0.1]\nbumps = []\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("truth"), "{err}");
        assert!(ConfigFile::parse("[experiment\n").is_err());
    }

    #[test]
    fn default_truth_survives_spec_conversion() {
        let q = PotentialModel::default_truth();
        assert_eq!(PotentialSpec::from_model(&q).to_model().unwrap(), q);
    }
}
