//! Named covariance estimators with their hyperparameter policies, as used by
//! the applications and the experiment drivers.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::baselines::{linear_shrinkage, sample_covariance, SampleSet};
use crate::calibration::{
    cross_validate_alpha, CvSettings, RadiusContext, RadiusSchedule, DEFAULT_ALPHA_RANGE,
};
use crate::divergence::Divergence;
use crate::error::{Error, Result};
use crate::shrinkage::{estimate_decomposed, SolverOptions};
use crate::spectral::{eigendecompose, SymMatrix};

/// How the mixing weight of linear shrinkage is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy", deny_unknown_fields)]
pub enum AlphaPolicy {
    Fixed { alpha: f64 },
    CrossValidate(CvSettings),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "estimator", deny_unknown_fields)]
pub enum EstimatorSpec {
    Sample,
    Linear {
        alpha: AlphaPolicy,
    },
    Robust {
        divergence: Divergence,
        radius: RadiusSchedule,
    },
}

/// A fitted estimate and the hyperparameter that produced it.
#[derive(Debug, Clone)]
pub struct Fitted {
    pub estimator: SymMatrix,
    /// Mixing weight or radius, when the estimator has one.
    pub parameter: Option<f64>,
    pub warnings: Vec<String>,
}

impl fmt::Display for EstimatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorSpec::Sample => write!(f, "sample"),
            EstimatorSpec::Linear { .. } => write!(f, "linear"),
            EstimatorSpec::Robust { divergence, .. } => write!(f, "{divergence}"),
        }
    }
}

impl EstimatorSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            EstimatorSpec::Sample => Ok(()),
            EstimatorSpec::Linear {
                alpha: AlphaPolicy::Fixed { alpha },
            } => {
                if (0.0..=1.0).contains(alpha) {
                    Ok(())
                } else {
                    Err(Error::BadAlpha(*alpha))
                }
            }
            EstimatorSpec::Linear {
                alpha: AlphaPolicy::CrossValidate(cv),
            } => cv.candidates(DEFAULT_ALPHA_RANGE).and_then(|g| {
                if g.iter().all(|a| (0.0..=1.0).contains(a)) {
                    Ok(())
                } else {
                    Err(Error::BadAlpha(*g.last().unwrap()))
                }
            }),
            EstimatorSpec::Robust { radius, .. } => radius.validate(),
        }
    }

    /// Fits on `data`, using its sample covariance as the nominal matrix.
    pub fn fit(&self, data: &SampleSet, opts: &SolverOptions) -> Result<Fitted> {
        self.fit_with_nominal(&sample_covariance(data)?, data, None, opts)
    }

    /// Fits with an explicit nominal matrix. `data` feeds hyperparameter
    /// selection (sample size, cross-validation folds); `truth` is only read
    /// by the ternary-search radius policy.
    pub fn fit_with_nominal(
        &self,
        nominal: &SymMatrix,
        data: &SampleSet,
        truth: Option<&SymMatrix>,
        opts: &SolverOptions,
    ) -> Result<Fitted> {
        match self {
            EstimatorSpec::Sample => Ok(Fitted {
                estimator: nominal.clone(),
                parameter: None,
                warnings: Vec::new(),
            }),
            EstimatorSpec::Linear { alpha } => {
                let alpha = match alpha {
                    AlphaPolicy::Fixed { alpha } => *alpha,
                    AlphaPolicy::CrossValidate(cv) => {
                        let grid = cv.candidates(DEFAULT_ALPHA_RANGE)?;
                        cross_validate_alpha(data, &grid, cv.folds, cv.seed, cv.score, opts)?
                            .selected
                    }
                };
                Ok(Fitted {
                    estimator: linear_shrinkage(nominal, alpha)?,
                    parameter: Some(alpha),
                    warnings: Vec::new(),
                })
            }
            EstimatorSpec::Robust { divergence, radius } => {
                let decomp = eigendecompose(nominal, opts.eigen_tol)?;
                let resolved = radius.resolve(&RadiusContext {
                    kind: *divergence,
                    data: Some(data),
                    sample_size: None,
                    nominal_eigenvalues: decomp.eigenvalues(),
                    truth,
                    solver: opts,
                })?;
                let sol = estimate_decomposed(&decomp, *divergence, resolved.epsilon, opts)?;
                Ok(Fitted {
                    estimator: sol.estimator,
                    parameter: Some(resolved.epsilon),
                    warnings: resolved.warnings,
                })
            }
        }
    }
}
