//! Sample covariance and linear shrinkage toward a scaled identity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::SymMatrix;

/// How [`sample_covariance`] treats the mean of the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    /// Second-moment matrix `(1/n) Σ ξξᵀ`.
    AssumeZeroMean,
    /// Debiased covariance `(1/(n−1)) Σ (ξ − ξ̄)(ξ − ξ̄)ᵀ`.
    #[default]
    SampleMean,
}

/// `n` observations of a `p`-dimensional random vector, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    n: usize,
    p: usize,
    data: Vec<f64>,
    pub centering: Centering,
}

impl SampleSet {
    pub fn new(n: usize, p: usize, data: Vec<f64>, centering: Centering) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::InsufficientData(format!(
                "sample set needs at least one row and one column, got {n}x{p}"
            )));
        }
        if data.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                found: data.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(SampleSet {
            n,
            p,
            data,
            centering,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], centering: Centering) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * p);
        for row in rows {
            if row.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        SampleSet::new(rows.len(), p, data, centering)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.p)
    }

    /// The rows at `indices`, in that order, with the same centering.
    pub fn select(&self, indices: &[usize]) -> Result<SampleSet> {
        let mut data = Vec::with_capacity(indices.len() * self.p);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        SampleSet::new(indices.len(), self.p, data, self.centering)
    }

    /// Column means, or zeros under [`Centering::AssumeZeroMean`].
    pub fn center(&self) -> Vec<f64> {
        match self.centering {
            Centering::AssumeZeroMean => vec![0.0; self.p],
            Centering::SampleMean => self.mean(),
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.p];
        for row in self.rows() {
            for (acc, x) in m.iter_mut().zip(row) {
                *acc += x;
            }
        }
        let n = self.n as f64;
        m.iter_mut().for_each(|x| *x /= n);
        m
    }
}

/// Scatter matrix `Σ (ξ − c)(ξ − c)ᵀ / divisor`.
pub(crate) fn scatter(data: &SampleSet, center: &[f64], divisor: f64) -> SymMatrix {
    let p = data.p();
    let mut acc = vec![0.0; p * p];
    let mut dev = vec![0.0; p];
    for row in data.rows() {
        for ((d, x), c) in dev.iter_mut().zip(row).zip(center) {
            *d = x - c;
        }
        for i in 0..p {
            let di = dev[i];
            for j in i..p {
                acc[i * p + j] += di * dev[j];
            }
        }
    }
    for i in 0..p {
        for j in i..p {
            let v = acc[i * p + j] / divisor;
            acc[i * p + j] = v;
            acc[j * p + i] = v;
        }
    }
    SymMatrix::new(p, acc).expect("finite samples give a finite scatter matrix")
}

pub fn sample_covariance(data: &SampleSet) -> Result<SymMatrix> {
    let n = data.n();
    match data.centering {
        Centering::AssumeZeroMean => Ok(scatter(data, &vec![0.0; data.p()], n as f64)),
        Centering::SampleMean => {
            if n < 2 {
                return Err(Error::InsufficientData(
                    "the debiased sample covariance needs at least two samples".into(),
                ));
            }
            Ok(scatter(data, &data.mean(), (n - 1) as f64))
        }
    }
}

/// `(1 − α)·Σ̂ + α·(Tr Σ̂ / p)·I`.
pub fn linear_shrinkage(nominal: &SymMatrix, alpha: f64) -> Result<SymMatrix> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::BadAlpha(alpha));
    }
    let p = nominal.order();
    let mu = nominal.trace() / p as f64;
    let mut entries = nominal.entries().iter().map(|x| (1.0 - alpha) * x).collect::<Vec<_>>();
    for i in 0..p {
        // Written so the diagonal reduces to x at α = 0 and to μ at α = 1.
        let x = nominal.get(i, i);
        entries[i * p + i] = x + alpha * (mu - x);
    }
    SymMatrix::new(p, entries)
}
