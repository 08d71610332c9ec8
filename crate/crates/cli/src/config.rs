//! Run configuration read from the optional JSON file given by `--config`.
//!
//! The file holds the global settings and one optional section per
//! subcommand. Unknown keys are rejected everywhere; command-line flags take
//! precedence over values from the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use covshrink::baselines::Centering;
use covshrink::calibration::RadiusSchedule;
use covshrink::classifier::{EstimatorFamily, Method};
use covshrink::experiments::{ConsistencyConfig, HighDimConfig, SweepConfig, SyntheticRiskConfig};
use covshrink::{Divergence, Error, EstimatorSpec, Result};

pub const DEFAULT_OUT: &str = "covshrink-out";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub estimate: Option<EstimateConfig>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub synthetic_risk: Option<SyntheticRiskConfig>,
    #[serde(default)]
    pub consistency: Option<ConsistencyConfig>,
    #[serde(default)]
    pub high_dimensional: Option<HighDimConfig>,
    #[serde(default)]
    pub portfolio: Option<PortfolioConfig>,
    #[serde(default)]
    pub classify: Option<ClassifyConfig>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputFormat {
    /// A symmetric `p × p` matrix, optionally with a header row.
    #[default]
    Matrix,
    /// One sample per row, optionally with a header row.
    Samples,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimateConfig {
    pub input: Option<PathBuf>,
    pub format: InputFormat,
    /// Centering of sample input.
    pub centering: Centering,
    pub divergence: Option<Divergence>,
    pub radius: Option<RadiusSchedule>,
    /// Sample size behind a matrix input, for sample-size dependent radii.
    pub sample_size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PortfolioConfig {
    pub returns: Option<PathBuf>,
    pub window: usize,
    pub holding: usize,
    pub estimator: Option<EstimatorSpec>,
}

impl Default for PortfolioConfig {
    fn default() -> Self {
        PortfolioConfig {
            returns: None,
            window: covshrink::portfolio::DEFAULT_WINDOW,
            holding: 12,
            estimator: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifyConfig {
    pub data: Option<PathBuf>,
    pub methods: Vec<Method>,
    pub estimators: Vec<EstimatorFamily>,
    /// Random train/test splits to average over.
    pub repeats: usize,
    pub train_fraction: f64,
    /// Share of the training part held out to tune hyperparameters.
    pub validation_fraction: f64,
    pub points: usize,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        let mut estimators = vec![EstimatorFamily::Sample, EstimatorFamily::Linear];
        estimators.extend(
            Divergence::ALL
                .iter()
                .map(|&divergence| EstimatorFamily::Robust { divergence }),
        );
        ClassifyConfig {
            data: None,
            methods: vec![Method::Lda, Method::Qda],
            estimators,
            repeats: 10,
            train_fraction: 0.5,
            validation_fraction: 0.2,
            points: covshrink::calibration::DEFAULT_GRID_POINTS,
        }
    }
}

impl ClassifyConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, f) in [
            ("train_fraction", self.train_fraction),
            ("validation_fraction", self.validation_fraction),
        ] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::InvalidConfig(format!("{name} must lie in (0, 1), got {f}")));
            }
        }
        if self.repeats == 0 || self.points == 0 || self.methods.is_empty() || self.estimators.is_empty() {
            return Err(Error::InvalidConfig(
                "repeats, points, methods and estimators must be non-empty".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_rejects_unknown_keys() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"seed": 3, "estimate": {"divergence": "kl", "radius": {"policy": "root_n", "c": 5.0}}}"#,
        )
        .unwrap();
        let est = cfg.estimate.unwrap();
        assert_eq!(est.divergence, Some(Divergence::KullbackLeibler));
        assert_eq!(est.radius, Some(RadiusSchedule::RootN { c: 5.0 }));
        assert!(serde_json::from_str::<RunConfig>(r#"{"sed": 3}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"sweep": {"point": 3}}"#).is_err());
    }

    #[test]
    fn classify_defaults_cover_every_estimator() {
        let c = ClassifyConfig::default();
        assert_eq!(c.estimators.len(), 9);
        assert!(c.validate().is_ok());
        let bad = ClassifyConfig {
            train_fraction: 1.0,
            ..ClassifyConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
