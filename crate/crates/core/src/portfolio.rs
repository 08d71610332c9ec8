//! Minimum-variance portfolios and a rolling-window backtest.

use serde::{Deserialize, Serialize, Serializer};

use crate::baselines::{Centering, SampleSet};
use crate::error::{Error, Result};
use crate::estimators::EstimatorSpec;
use crate::shrinkage::SolverOptions;
use crate::spectral::{eigendecompose, SpectralDecomposition, SymMatrix, DEFAULT_EIGEN_TOL};

/// Eigenvalues at or below this multiple of `‖Σ‖_F` count as singular.
pub const SINGULARITY_FLOOR: f64 = 1e-12;

pub const DEFAULT_WINDOW: usize = 50;

/// `w = Σ⁻¹1 / 1ᵀΣ⁻¹1`, solved through the eigendecomposition of `Σ`.
pub fn min_variance_weights(est: &SymMatrix) -> Result<Vec<f64>> {
    min_variance_weights_decomposed(&eigendecompose(est, DEFAULT_EIGEN_TOL)?)
}

/// As [`min_variance_weights`], for an estimator given by its eigensystem.
pub fn min_variance_weights_decomposed(decomp: &SpectralDecomposition) -> Result<Vec<f64>> {
    let norm = decomp.eigenvalues().iter().map(|e| e * e).sum::<f64>().sqrt();
    let lo = decomp.min_eigenvalue();
    if !(lo > SINGULARITY_FLOOR * norm) {
        return Err(Error::SingularEstimator(lo));
    }
    let ones = vec![1.0; decomp.order()];
    let y: Vec<f64> = decomp
        .project(&ones)
        .iter()
        .zip(decomp.eigenvalues())
        .map(|(v, e)| v / e)
        .collect();
    let mut w = decomp.unproject(&y);
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    Ok(w)
}

fn serialize_extended<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else if *x > 0.0 {
        s.serialize_str("inf")
    } else if *x < 0.0 {
        s.serialize_str("-inf")
    } else {
        s.serialize_str("nan")
    }
}

/// Settings echoed into a report so that it can be regenerated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestConfig {
    pub window: usize,
    pub holding: usize,
    pub estimator: EstimatorSpec,
}

#[derive(Debug, Clone, Serialize)]
pub struct BacktestReport {
    /// Realized portfolio return for every period of every completed block.
    pub period_returns: Vec<f64>,
    pub mean_return: f64,
    /// Sample standard deviation (divisor `m − 1`; zero for a single period).
    pub std_return: f64,
    /// Per-period `mean / std` without a risk-free rate; `±inf` when the
    /// returns have zero spread.
    #[serde(serialize_with = "serialize_extended")]
    pub sharpe: f64,
    /// Weights held during each block.
    pub block_weights: Vec<Vec<f64>>,
    /// Hyperparameter selected in each block, when the estimator has one.
    pub block_parameters: Vec<Option<f64>>,
    pub warnings: Vec<String>,
    pub config: BacktestConfig,
}

/// Mean, sample standard deviation and Sharpe ratio of a return series.
pub fn summarize(returns: &[f64]) -> (f64, f64, f64) {
    let m = returns.len();
    if m == 0 {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mean = returns.iter().sum::<f64>() / m as f64;
    let std = if m < 2 {
        0.0
    } else {
        (returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (m - 1) as f64).sqrt()
    };
    let sharpe = if std > 0.0 {
        mean / std
    } else if mean < 0.0 {
        f64::NEG_INFINITY
    } else {
        f64::INFINITY
    };
    (mean, std, sharpe)
}

/// Fits on each trailing window of `window` rows, holds the minimum-variance
/// weights for the next `holding` rows, then rolls forward by `holding`.
/// Blocks are non-overlapping and a final partial block is dropped.
pub fn rolling_backtest(
    returns: &SampleSet,
    window: usize,
    holding: usize,
    estimator: &EstimatorSpec,
    opts: &SolverOptions,
) -> Result<BacktestReport> {
    if window < 2 || holding == 0 {
        return Err(Error::InvalidConfig(format!(
            "window must be at least 2 and holding at least 1, got {window} and {holding}"
        )));
    }
    estimator.validate()?;
    let t = returns.n();
    if t < window + holding {
        return Err(Error::InsufficientHistory {
            needed: window + holding,
            have: t,
        });
    }
    let mut period_returns = Vec::new();
    let mut block_weights = Vec::new();
    let mut block_parameters = Vec::new();
    let mut warnings = Vec::new();
    let mut start = window;
    while start + holding <= t {
        let idx: Vec<usize> = (start - window..start).collect();
        let mut train = returns.select(&idx)?;
        train.centering = Centering::SampleMean;
        let fitted = estimator.fit(&train, opts)?;
        let w = min_variance_weights(&fitted.estimator)?;
        for row in start..start + holding {
            period_returns.push(returns.row(row).iter().zip(&w).map(|(r, wi)| r * wi).sum());
        }
        warnings.extend(fitted.warnings.into_iter().map(|m| format!("block at row {start}: {m}")));
        block_weights.push(w);
        block_parameters.push(fitted.parameter);
        start += holding;
    }
    let (mean_return, std_return, sharpe) = summarize(&period_returns);
    Ok(BacktestReport {
        period_returns,
        mean_return,
        std_return,
        sharpe,
        block_weights,
        block_parameters,
        warnings,
        config: BacktestConfig {
            window,
            holding,
            estimator: estimator.clone(),
        },
    })
}
