//! Gaussian plug-in classifiers (LDA and QDA) with shrunk covariances.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{sample_covariance, Centering, SampleSet};
use crate::calibration::{default_radius_range, log_grid, RadiusSchedule, DEFAULT_ALPHA_RANGE};
use crate::divergence::Divergence;
use crate::error::{Error, Result};
use crate::estimators::{AlphaPolicy, EstimatorSpec};
use crate::portfolio::SINGULARITY_FLOOR;
use crate::sampling;
use crate::shrinkage::SolverOptions;
use crate::spectral::{eigendecompose, SymMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// One covariance pooled over all classes.
    Lda,
    /// One covariance per class.
    Qda,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lda" => Ok(Method::Lda),
            "qda" => Ok(Method::Qda),
            _ => Err(Error::InvalidConfig(format!("unknown method '{s}'"))),
        }
    }
}

/// Feature vectors with one integer label each.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub features: SampleSet,
    pub labels: Vec<i64>,
}

impl LabeledSet {
    pub fn new(features: SampleSet, labels: Vec<i64>) -> Result<Self> {
        if labels.len() != features.n() {
            return Err(Error::DimensionMismatch {
                expected: features.n(),
                found: labels.len(),
            });
        }
        Ok(LabeledSet { features, labels })
    }

    pub fn select(&self, idx: &[usize]) -> Result<LabeledSet> {
        Ok(LabeledSet {
            features: self.features.select(idx)?,
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        })
    }

    /// Distinct labels in ascending order.
    pub fn classes(&self) -> Vec<i64> {
        let mut c = self.labels.clone();
        c.sort_unstable();
        c.dedup();
        c
    }

    fn class_rows(&self, label: i64) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == label).collect()
    }
}

/// Inverse and log-determinant of a class covariance.
#[derive(Debug, Clone)]
struct Gaussian {
    precision: SymMatrix,
    log_det: f64,
}

impl Gaussian {
    fn new(cov: &SymMatrix, label: i64) -> Result<Self> {
        let d = eigendecompose(cov, crate::spectral::DEFAULT_EIGEN_TOL)?;
        let lo = d.min_eigenvalue();
        if !(lo > SINGULARITY_FLOOR * cov.frobenius_norm()) {
            return Err(Error::DegenerateClass {
                label,
                detail: format!("covariance estimate is singular (smallest eigenvalue {lo:e})"),
            });
        }
        Ok(Gaussian {
            precision: d.map(f64::recip),
            log_det: d.eigenvalues().iter().map(|e| e.ln()).sum(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct ClassifierModel {
    pub method: Method,
    /// Ascending class labels.
    pub labels: Vec<i64>,
    pub priors: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    /// One entry per class for QDA, a single pooled entry for LDA.
    pub covariances: Vec<SymMatrix>,
    gaussians: Vec<Gaussian>,
}

/// Fits the class means and priors and passes each nominal covariance (the
/// debiased per-class or pooled sample covariance) through `estimator`.
pub fn fit_classifier(
    train: &LabeledSet,
    method: Method,
    estimator: &EstimatorSpec,
    opts: &SolverOptions,
) -> Result<ClassifierModel> {
    let labels = train.classes();
    if labels.len() < 2 {
        return Err(Error::DegenerateClass {
            label: labels.first().copied().unwrap_or(0),
            detail: "at least two classes are required".into(),
        });
    }
    let n = train.labels.len();
    let p = train.features.p();
    let mut priors = Vec::new();
    let mut means = Vec::new();
    let mut class_sets = Vec::new();
    for &y in &labels {
        let rows = train.class_rows(y);
        if rows.len() < 2 {
            return Err(Error::DegenerateClass {
                label: y,
                detail: format!("{} sample(s), need at least 2", rows.len()),
            });
        }
        let mut set = train.features.select(&rows)?;
        set.centering = Centering::SampleMean;
        priors.push(rows.len() as f64 / n as f64);
        means.push(set.mean());
        class_sets.push(set);
    }
    let covariances = match method {
        Method::Qda => class_sets
            .iter()
            .map(|set| Ok(estimator.fit(set, opts)?.estimator))
            .collect::<Result<Vec<_>>>()?,
        Method::Lda => {
            let k = labels.len();
            if n <= k {
                return Err(Error::InsufficientData("pooled covariance needs n > classes".into()));
            }
            let mut pooled = vec![0.0; p * p];
            let mut centered = Vec::with_capacity(n * p);
            for (set, mean) in class_sets.iter().zip(&means) {
                let s = sample_covariance(set)?;
                let weight = (set.n() - 1) as f64 / (n - k) as f64;
                pooled.iter_mut().zip(s.entries()).for_each(|(a, b)| *a += weight * b);
                for row in set.rows() {
                    centered.extend(row.iter().zip(mean).map(|(x, m)| x - m));
                }
            }
            let nominal = SymMatrix::new(p, pooled)?;
            let centered = SampleSet::new(n, p, centered, Centering::AssumeZeroMean)?;
            vec![estimator.fit_with_nominal(&nominal, &centered, None, opts)?.estimator]
        }
    };
    let gaussians = covariances
        .iter()
        .enumerate()
        .map(|(i, c)| Gaussian::new(c, labels[i.min(labels.len() - 1)]))
        .collect::<Result<Vec<_>>>()?;
    Ok(ClassifierModel {
        method,
        labels,
        priors,
        means,
        covariances,
        gaussians,
    })
}

impl ClassifierModel {
    /// `(z − μ_y)ᵀΣ_y⁻¹(z − μ_y) + log det Σ_y − 2 log p_y` for each class.
    pub fn scores(&self, z: &[f64]) -> Vec<f64> {
        (0..self.labels.len())
            .map(|c| {
                let g = &self.gaussians[if self.method == Method::Lda { 0 } else { c }];
                let dev: Vec<f64> = z.iter().zip(&self.means[c]).map(|(a, b)| a - b).collect();
                let q: f64 = g.precision.matvec(&dev).iter().zip(&dev).map(|(a, b)| a * b).sum();
                q + g.log_det - 2.0 * self.priors[c].ln()
            })
            .collect()
    }

    /// The label with the smallest score; ties go to the smaller label.
    pub fn predict(&self, z: &[f64]) -> i64 {
        let s = self.scores(z);
        let mut best = 0;
        for (i, &v) in s.iter().enumerate() {
            if v < s[best] {
                best = i;
            }
        }
        self.labels[best]
    }

    pub fn accuracy(&self, test: &LabeledSet) -> f64 {
        let correct = test
            .features
            .rows()
            .zip(&test.labels)
            .filter(|(z, &y)| self.predict(z) == y)
            .count();
        correct as f64 / test.labels.len() as f64
    }
}

/// Accuracy of always predicting the most frequent training label.
pub fn prior_only_accuracy(train: &LabeledSet, test: &LabeledSet) -> f64 {
    let classes = train.classes();
    let majority = classes
        .iter()
        .copied()
        .max_by_key(|&y| (train.class_rows(y).len(), std::cmp::Reverse(y)))
        .unwrap_or(0);
    test.labels.iter().filter(|&&y| y == majority).count() as f64 / test.labels.len() as f64
}

/// Random split of `n` indices into a training part of `train_fraction` and
/// the remainder.
pub fn random_split(n: usize, train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut sampling::rng(seed));
    let m = ((train_fraction * n as f64).round() as usize).min(n);
    let (a, b) = idx.split_at(m);
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable();
    b.sort_unstable();
    (a, b)
}

/// A one-parameter family of estimators tuned by holdout accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum EstimatorFamily {
    Sample,
    Linear,
    Robust { divergence: Divergence },
}

impl EstimatorFamily {
    pub fn name(&self) -> String {
        match self {
            EstimatorFamily::Sample => "sample".into(),
            EstimatorFamily::Linear => "linear".into(),
            EstimatorFamily::Robust { divergence } => divergence.name().into(),
        }
    }

    /// Default candidate grid: the cross-validation ranges, log-spaced.
    pub fn default_grid(&self, points: usize) -> Vec<f64> {
        match self {
            EstimatorFamily::Sample => vec![0.0],
            EstimatorFamily::Linear => log_grid(DEFAULT_ALPHA_RANGE.0, DEFAULT_ALPHA_RANGE.1, points),
            EstimatorFamily::Robust { divergence } => {
                let (lo, hi) = default_radius_range(*divergence);
                log_grid(lo, hi, points)
            }
        }
    }

    pub fn at(&self, value: f64) -> EstimatorSpec {
        match self {
            EstimatorFamily::Sample => EstimatorSpec::Sample,
            EstimatorFamily::Linear => EstimatorSpec::Linear {
                alpha: AlphaPolicy::Fixed { alpha: value },
            },
            EstimatorFamily::Robust { divergence } => EstimatorSpec::Robust {
                divergence: *divergence,
                radius: RadiusSchedule::Fixed {
                    epsilon: value,
                    clip: true,
                },
            },
        }
    }
}

/// Holdout selection: fits on `1 − fraction` of `train` for every grid value,
/// keeps the value with the best validation accuracy (ties to the smaller
/// value) and refits on all of `train`. Radii are clipped below each nominal's
/// `ε̄`.
pub fn fit_tuned(
    train: &LabeledSet,
    method: Method,
    family: EstimatorFamily,
    grid: &[f64],
    fraction: f64,
    seed: u64,
    opts: &SolverOptions,
) -> Result<(ClassifierModel, Option<f64>)> {
    if family == EstimatorFamily::Sample {
        return Ok((fit_classifier(train, method, &EstimatorSpec::Sample, opts)?, None));
    }
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let (fit_idx, val_idx) = stratified_split(train, 1.0 - fraction, seed);
    let fit_part = train.select(&fit_idx)?;
    let val_part = train.select(&val_idx)?;
    let accuracies: Vec<f64> = grid
        .par_iter()
        .map(|&v| {
            fit_classifier(&fit_part, method, &family.at(v), opts)
                .map_or(f64::NEG_INFINITY, |m| m.accuracy(&val_part))
        })
        .collect();
    let mut best = 0;
    for (i, &a) in accuracies.iter().enumerate() {
        if a > accuracies[best] {
            best = i;
        }
    }
    if accuracies[best] == f64::NEG_INFINITY {
        return Err(Error::InsufficientData(
            "no candidate produced a valid classifier on the holdout split".into(),
        ));
    }
    let model = fit_classifier(train, method, &family.at(grid[best]), opts)?;
    Ok((model, Some(grid[best])))
}

/// Random split keeping each class's share: `train_fraction` of every class
/// goes to the first part.
pub fn stratified_split(data: &LabeledSet, train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut first = Vec::new();
    let mut second = Vec::new();
    for (k, y) in data.classes().into_iter().enumerate() {
        let rows = data.class_rows(y);
        let (a, b) = random_split(rows.len(), train_fraction, seed.wrapping_add(k as u64));
        first.extend(a.into_iter().map(|i| rows[i]));
        second.extend(b.into_iter().map(|i| rows[i]));
    }
    first.sort_unstable();
    second.sort_unstable();
    (first, second)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_points_per_class() -> LabeledSet {
        let rows = vec![
            vec![-1.2],
            vec![-0.8],
            vec![-1.0],
            vec![0.8],
            vec![1.2],
            vec![1.0],
        ];
        LabeledSet::new(
            SampleSet::from_rows(&rows, Centering::SampleMean).unwrap(),
            vec![0, 0, 0, 1, 1, 1],
        )
        .unwrap()
    }

    #[test]
    fn one_dimensional_threshold_at_zero() {
        let d = two_points_per_class();
        let m = fit_classifier(&d, Method::Lda, &EstimatorSpec::Sample, &SolverOptions::default())
            .unwrap();
        assert_eq!(m.predict(&[-0.01]), 0);
        assert_eq!(m.predict(&[0.01]), 1);
        // Exactly on the boundary the smaller label wins.
        assert_eq!(m.predict(&[0.0]), 0);
        assert_eq!(m.predict(&m.means[1].clone()), 1);
        assert_eq!(m.accuracy(&d), 1.0);
    }

    #[test]
    fn degenerate_classes_are_rejected() {
        let rows = vec![vec![0.0], vec![1.0], vec![2.0]];
        let d = LabeledSet::new(
            SampleSet::from_rows(&rows, Centering::SampleMean).unwrap(),
            vec![0, 0, 1],
        )
        .unwrap();
        let err = fit_classifier(&d, Method::Qda, &EstimatorSpec::Sample, &SolverOptions::default());
        assert!(matches!(err, Err(Error::DegenerateClass { label: 1, .. })));
        let one = d.select(&[0, 1]).unwrap();
        assert!(matches!(
            fit_classifier(&one, Method::Lda, &EstimatorSpec::Sample, &SolverOptions::default()),
            Err(Error::DegenerateClass { .. })
        ));
    }

    #[test]
    fn split_partitions_indices() {
        let (a, b) = random_split(10, 0.5, 4);
        assert_eq!(a.len(), 5);
        let mut all = [a, b].concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }
}
