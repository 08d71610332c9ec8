//! Deterministic synthetic datasets with the same layout as the real data
//! the applications are meant for: a monthly returns panel and a labeled
//! two-class feature table.

use crate::baselines::{Centering, SampleSet};
use crate::classifier::LabeledSet;
use crate::error::Result;
use crate::io::ReturnsTable;
use crate::sampling::{rng, BoxMuller, GaussianSampler};
use crate::spectral::SymMatrix;

/// Settings of the synthetic returns panel.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketSpec {
    pub periods: usize,
    pub assets: usize,
    /// Number of assets loading on the common factors.
    pub spikes: usize,
    /// Variance ratio between the spiked and the idiosyncratic directions.
    pub spike: f64,
    /// Idiosyncratic per-period volatility.
    pub volatility: f64,
    /// Common per-period drift of every asset.
    pub drift: f64,
}

impl Default for MarketSpec {
    fn default() -> Self {
        MarketSpec {
            periods: 110,
            assets: 10,
            spikes: 2,
            spike: 100.0,
            volatility: 0.02,
            drift: 0.005,
        }
    }
}

/// Covariance of the synthetic market: a spiked spectrum in a random basis,
/// so that the spikes mix all assets.
pub fn market_covariance(spec: &MarketSpec, seed: u64) -> Result<SymMatrix> {
    let p = spec.assets;
    let mut normals = BoxMuller::new(rng(seed ^ 0x5eed_c0de));
    let q = crate::sampling::random_orthogonal(p, &mut normals);
    let scale = spec.volatility * spec.volatility;
    let diag: Vec<f64> = (0..p)
        .map(|i| if i + spec.spikes >= p { spec.spike * scale } else { scale })
        .collect();
    SymMatrix::from_diagonal(&diag).congruence(&q)
}

/// `periods` i.i.d. Gaussian return vectors with mean `drift`.
pub fn synthetic_market(spec: &MarketSpec, seed: u64) -> Result<ReturnsTable> {
    let sigma = market_covariance(spec, seed)?;
    let mut normals = BoxMuller::new(rng(seed));
    let draws = GaussianSampler::new(&sigma)?.sample(spec.periods, &mut normals, Centering::SampleMean)?;
    let data: Vec<f64> = draws.data().iter().map(|x| x + spec.drift).collect();
    let dates = (0..spec.periods)
        .map(|t| format!("{:04}-{:02}", 2000 + t / 12, t % 12 + 1))
        .collect();
    Ok(ReturnsTable {
        assets: (1..=spec.assets).map(|j| format!("asset{j:02}")).collect(),
        dates,
        returns: SampleSet::new(spec.periods, spec.assets, data, Centering::SampleMean)?,
    })
}

/// Two spherical Gaussian classes in `p` dimensions with unit variance whose
/// means differ by `gap` along the first axis. Rows alternate between labels
/// 0 and 1.
pub fn two_gaussians(per_class: usize, p: usize, gap: f64, seed: u64) -> Result<LabeledSet> {
    let mut normals = BoxMuller::new(rng(seed));
    let mut data = Vec::with_capacity(2 * per_class * p);
    let mut labels = Vec::with_capacity(2 * per_class);
    for _ in 0..per_class {
        for label in [0i64, 1] {
            for j in 0..p {
                let shift = if j == 0 { (label as f64 - 0.5) * gap } else { 0.0 };
                data.push(normals.next_normal() + shift);
            }
            labels.push(label);
        }
    }
    LabeledSet::new(
        SampleSet::new(2 * per_class, p, data, Centering::SampleMean)?,
        labels,
    )
}

/// Seed used for the shipped fixture files.
pub const FIXTURE_SEED: u64 = 20240601;

/// Contents of `fixtures/synthetic_returns.csv`.
pub fn returns_fixture_csv() -> Result<String> {
    let table = synthetic_market(&MarketSpec::default(), FIXTURE_SEED)?;
    let mut out = Vec::new();
    crate::io::write_returns(&mut out, &table)?;
    Ok(String::from_utf8(out).expect("csv output is utf-8"))
}

/// Contents of `fixtures/two_gaussians.csv`.
pub fn labeled_fixture_csv() -> Result<String> {
    let data = two_gaussians(100, 4, 6.0, FIXTURE_SEED)?;
    let mut out = Vec::new();
    crate::io::write_labeled(&mut out, &data)?;
    Ok(String::from_utf8(out).expect("csv output is utf-8"))
}
