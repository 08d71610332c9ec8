//! Experiment drivers producing long-format records: radius sweeps, the
//! synthetic Frobenius-risk study, the consistency study and the
//! high-dimensional radius search.
//!
//! Synthetic data are drawn from `N(0, Σ₀)` and the nominal matrix is the
//! zero-mean second-moment matrix, which stays positive definite down to
//! `n = p`. Every Monte-Carlo trial uses the seed `base_seed + trial`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{linear_shrinkage, sample_covariance, Centering};
use crate::calibration::{
    clip_radius, default_radius_range, log_grid, radius_root_n, ternary_search_radius,
};
use crate::divergence::Divergence;
use crate::error::{Error, Result};
use crate::extended::ExtendedReal;
use crate::sampling::{banded_covariance, gaussian_samples, spiked_covariance};
use crate::shrinkage::{estimate_decomposed, shrink_spectrum, SolverOptions};
use crate::spectral::{eigendecompose, SpectralDecomposition, SymMatrix};

/// One row of long-format output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub experiment: String,
    /// `None` for rows aggregated over seeds.
    pub seed: Option<u64>,
    pub estimator: String,
    pub n: Option<usize>,
    pub p: Option<usize>,
    pub spike: Option<f64>,
    /// Radius or mixing weight.
    pub parameter: Option<f64>,
    /// Eigenvalue index for sweep rows.
    pub index: Option<usize>,
    pub metric: String,
    pub value: f64,
}

impl Record {
    fn new(experiment: &str, estimator: &str, metric: &str, value: f64) -> Self {
        Record {
            experiment: experiment.to_string(),
            seed: None,
            estimator: estimator.to_string(),
            n: None,
            p: None,
            spike: None,
            parameter: None,
            index: None,
            metric: metric.to_string(),
            value,
        }
    }
}

pub fn write_records<W: Write>(writer: W, records: &[Record]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Least-squares line through `(x, y)`: slope, intercept and `R²`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let (mx, _) = mean_std(x);
    let (my, _) = mean_std(y);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, my - slope * mx, r2)
}

// ---------------------------------------------------------------------------
// Radius sweeps

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub eigenvalues: Vec<f64>,
    pub divergences: Vec<Divergence>,
    pub points: usize,
    /// Largest radius for divergences with `ε̄ = ∞`.
    pub max_radius: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            eigenvalues: vec![1.0, 2.0, 3.0],
            divergences: vec![
                Divergence::KullbackLeibler,
                Divergence::Wasserstein,
                Divergence::FisherRao,
            ],
            points: 50,
            max_radius: 10.0,
        }
    }
}

/// Fraction of `ε̄` reached by the last sweep point.
pub const SWEEP_END: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone)]
pub struct SweepPath {
    pub kind: Divergence,
    pub radii: Vec<f64>,
    /// Shrunk spectrum (ascending) at each radius.
    pub eigenvalues: Vec<Vec<f64>>,
    pub condition_numbers: Vec<f64>,
}

/// Radii `top·i/points` for `i = 1..=points`, where `top` is `ε̄·(1 − 10⁻⁶)`
/// or `max_radius` when `ε̄` is infinite.
pub fn sweep_radii(kind: Divergence, eigenvalues: &[f64], points: usize, max_radius: f64) -> Vec<f64> {
    let top = match kind.epsilon_max(eigenvalues) {
        ExtendedReal::Finite(m) => m * SWEEP_END,
        ExtendedReal::PosInfinity => max_radius,
    };
    (1..=points).map(|i| top * i as f64 / points as f64).collect()
}

pub fn sweep(config: &SweepConfig, opts: &SolverOptions) -> Result<Vec<SweepPath>> {
    if config.points == 0 || config.eigenvalues.is_empty() {
        return Err(Error::InvalidConfig("sweep needs eigenvalues and at least one point".into()));
    }
    let mut eigs = config.eigenvalues.clone();
    if eigs.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
        return Err(Error::InvalidConfig("sweep eigenvalues must be finite and non-negative".into()));
    }
    eigs.sort_by(f64::total_cmp);
    config
        .divergences
        .iter()
        .map(|&kind| {
            let radii = sweep_radii(kind, &eigs, config.points, config.max_radius);
            let mut eigenvalues = Vec::with_capacity(radii.len());
            let mut condition_numbers = Vec::with_capacity(radii.len());
            for &eps in &radii {
                let sol = shrink_spectrum(kind, &eigs, eps, opts)?;
                condition_numbers.push(sol.condition_number());
                eigenvalues.push(sol.shrunk_eigenvalues);
            }
            Ok(SweepPath {
                kind,
                radii,
                eigenvalues,
                condition_numbers,
            })
        })
        .collect()
}

pub fn sweep_records(paths: &[SweepPath]) -> Vec<Record> {
    let mut out = Vec::new();
    for path in paths {
        let name = path.kind.name();
        for (k, &eps) in path.radii.iter().enumerate() {
            for (i, &x) in path.eigenvalues[k].iter().enumerate() {
                let mut r = Record::new("sweep", name, "eigenvalue", x);
                r.parameter = Some(eps);
                r.index = Some(i);
                out.push(r);
            }
            let mut r = Record::new("sweep", name, "condition_number", path.condition_numbers[k]);
            r.parameter = Some(eps);
            out.push(r);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Synthetic Frobenius risk

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticRiskConfig {
    pub p: usize,
    pub spikes: usize,
    pub spike_values: Vec<f64>,
    pub sample_sizes: Vec<usize>,
    pub seeds: usize,
    pub divergences: Vec<Divergence>,
    /// Radius grid `[lo, hi]` (log-spaced) shared by all divergences; when
    /// absent each divergence uses its cross-validation range. Radii at or
    /// above a sample's `ε̄` are clipped below it.
    pub radius_range: Option<(f64, f64)>,
    pub alpha_range: (f64, f64),
    pub points: usize,
}

impl Default for SyntheticRiskConfig {
    fn default() -> Self {
        SyntheticRiskConfig {
            p: 100,
            spikes: 10,
            spike_values: vec![10.0, 100.0, 500.0],
            sample_sizes: vec![100, 200, 500],
            seeds: 10,
            divergences: vec![
                Divergence::KullbackLeibler,
                Divergence::Wasserstein,
                Divergence::FisherRao,
            ],
            radius_range: None,
            alpha_range: (1e-4, 1.0),
            points: 40,
        }
    }
}

/// Frobenius losses for one `(M, n)` cell: `losses[seed][grid point]`.
#[derive(Debug, Clone)]
pub struct RiskCurve {
    pub estimator: String,
    pub spike: f64,
    pub n: usize,
    pub grid: Vec<f64>,
    pub losses: Vec<Vec<f64>>,
}

fn robust_loss(
    decomp: &SpectralDecomposition,
    kind: Divergence,
    eps: f64,
    truth: &SymMatrix,
    opts: &SolverOptions,
) -> Result<f64> {
    let eps = clip_radius(eps, kind.epsilon_max(decomp.eigenvalues()));
    let sol = estimate_decomposed(decomp, kind, eps, opts)?;
    Ok(sol.estimator.sub(truth)?.frobenius_norm())
}

pub fn synthetic_risk(
    config: &SyntheticRiskConfig,
    base_seed: u64,
    opts: &SolverOptions,
) -> Result<Vec<RiskCurve>> {
    if config.spikes > config.p || config.seeds == 0 || config.points < 2 {
        return Err(Error::InvalidConfig(
            "synthetic risk needs spikes <= p, seeds >= 1 and points >= 2".into(),
        ));
    }
    let radii: Vec<Vec<f64>> = config
        .divergences
        .iter()
        .map(|&kind| {
            let (lo, hi) = config.radius_range.unwrap_or_else(|| default_radius_range(kind));
            log_grid(lo, hi, config.points)
        })
        .collect();
    let alphas = log_grid(config.alpha_range.0, config.alpha_range.1, config.points);
    let mut curves = Vec::new();
    for &m in &config.spike_values {
        let truth = spiked_covariance(config.p, config.spikes, m);
        for &n in &config.sample_sizes {
            let per_seed: Vec<Vec<Vec<f64>>> = (0..config.seeds as u64)
                .into_par_iter()
                .map(|trial| {
                    let data = gaussian_samples(&truth, n, base_seed + trial, Centering::AssumeZeroMean)?;
                    let nominal = sample_covariance(&data)?;
                    let decomp = eigendecompose(&nominal, opts.eigen_tol)?;
                    let mut rows = vec![vec![nominal.sub(&truth)?.frobenius_norm()]];
                    rows.push(
                        alphas
                            .iter()
                            .map(|&a| Ok(linear_shrinkage(&nominal, a)?.sub(&truth)?.frobenius_norm()))
                            .collect::<Result<Vec<f64>>>()?,
                    );
                    for (&kind, radii) in config.divergences.iter().zip(&radii) {
                        rows.push(
                            radii
                                .iter()
                                .map(|&e| robust_loss(&decomp, kind, e, &truth, opts))
                                .collect::<Result<Vec<f64>>>()?,
                        );
                    }
                    Ok(rows)
                })
                .collect::<Result<_>>()?;
            let mut names = vec!["sample".to_string(), "linear".to_string()];
            names.extend(config.divergences.iter().map(|d| d.name().to_string()));
            for (e, name) in names.into_iter().enumerate() {
                let grid = match e {
                    0 => vec![0.0],
                    1 => alphas.clone(),
                    _ => radii[e - 2].clone(),
                };
                curves.push(RiskCurve {
                    estimator: name,
                    spike: m,
                    n,
                    grid,
                    losses: per_seed.iter().map(|s| s[e].clone()).collect(),
                });
            }
        }
    }
    Ok(curves)
}

pub fn risk_records(curves: &[RiskCurve], p: usize, base_seed: u64) -> Vec<Record> {
    let mut out = Vec::new();
    for c in curves {
        let parameter = |k: usize| if c.estimator == "sample" { None } else { Some(c.grid[k]) };
        for (s, losses) in c.losses.iter().enumerate() {
            for (k, &loss) in losses.iter().enumerate() {
                let mut r = Record::new("synthetic-risk", &c.estimator, "frobenius_loss", loss);
                r.seed = Some(base_seed + s as u64);
                r.n = Some(c.n);
                r.p = Some(p);
                r.spike = Some(c.spike);
                r.parameter = parameter(k);
                out.push(r);
            }
        }
        for k in 0..c.grid.len() {
            let col: Vec<f64> = c.losses.iter().map(|l| l[k]).collect();
            let (mean, std) = mean_std(&col);
            for (metric, v) in [("frobenius_loss_mean", mean), ("frobenius_loss_std", std)] {
                let mut r = Record::new("synthetic-risk", &c.estimator, metric, v);
                r.n = Some(c.n);
                r.p = Some(p);
                r.spike = Some(c.spike);
                r.parameter = parameter(k);
                out.push(r);
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Consistency

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrueCovariance {
    Identity,
    /// Ones on the diagonal, 0.5 on the first off-diagonals.
    Banded,
}

impl TrueCovariance {
    pub fn matrix(self, p: usize) -> SymMatrix {
        match self {
            TrueCovariance::Identity => SymMatrix::identity(p),
            TrueCovariance::Banded => banded_covariance(p, 0.5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConsistencyConfig {
    pub p: usize,
    /// Radius schedule `c·n^{-1/2}`.
    pub c: f64,
    pub sample_sizes: Vec<usize>,
    pub seeds: usize,
    pub truth: TrueCovariance,
    pub divergences: Vec<Divergence>,
}

impl Default for ConsistencyConfig {
    fn default() -> Self {
        ConsistencyConfig {
            p: 10,
            c: 5.0,
            sample_sizes: (6..=12).map(|k| 1usize << k).collect(),
            seeds: 10,
            truth: TrueCovariance::Banded,
            divergences: vec![
                Divergence::KullbackLeibler,
                Divergence::Wasserstein,
                Divergence::FisherRao,
            ],
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConsistencyCurve {
    pub estimator: String,
    pub sample_sizes: Vec<usize>,
    /// `losses[k][seed]` for sample size `k`.
    pub losses: Vec<Vec<f64>>,
    pub slope: f64,
    pub r_squared: f64,
}

impl ConsistencyCurve {
    pub fn mean_losses(&self) -> Vec<f64> {
        self.losses.iter().map(|l| mean_std(l).0).collect()
    }
}

pub fn consistency(
    config: &ConsistencyConfig,
    base_seed: u64,
    opts: &SolverOptions,
) -> Result<Vec<ConsistencyCurve>> {
    if config.sample_sizes.len() < 2 || config.seeds == 0 || !(config.c > 0.0) {
        return Err(Error::InvalidConfig(
            "consistency needs two sample sizes, seeds >= 1 and c > 0".into(),
        ));
    }
    let truth = config.truth.matrix(config.p);
    let estimators = 1 + config.divergences.len();
    // cells[k][seed][estimator]
    let cells: Vec<Vec<Vec<f64>>> = config
        .sample_sizes
        .iter()
        .map(|&n| {
            (0..config.seeds as u64)
                .into_par_iter()
                .map(|trial| {
                    let data = gaussian_samples(&truth, n, base_seed + trial, Centering::AssumeZeroMean)?;
                    let nominal = sample_covariance(&data)?;
                    let decomp = eigendecompose(&nominal, opts.eigen_tol)?;
                    let eps = radius_root_n(config.c, n);
                    let mut row = vec![nominal.sub(&truth)?.frobenius_norm()];
                    for &kind in &config.divergences {
                        row.push(robust_loss(&decomp, kind, eps, &truth, opts)?);
                    }
                    Ok(row)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let log_n: Vec<f64> = config.sample_sizes.iter().map(|&n| (n as f64).ln()).collect();
    let mut names = vec!["sample".to_string()];
    names.extend(config.divergences.iter().map(|d| d.name().to_string()));
    Ok((0..estimators)
        .map(|e| {
            let losses: Vec<Vec<f64>> = cells
                .iter()
                .map(|per_seed| per_seed.iter().map(|row| row[e]).collect())
                .collect();
            let log_mean: Vec<f64> = losses.iter().map(|l| mean_std(l).0.ln()).collect();
            let (slope, _, r_squared) = linear_fit(&log_n, &log_mean);
            ConsistencyCurve {
                estimator: names[e].clone(),
                sample_sizes: config.sample_sizes.clone(),
                losses,
                slope,
                r_squared,
            }
        })
        .collect())
}

pub fn consistency_records(curves: &[ConsistencyCurve], p: usize, base_seed: u64) -> Vec<Record> {
    let mut out = Vec::new();
    for c in curves {
        for (k, &n) in c.sample_sizes.iter().enumerate() {
            for (s, &loss) in c.losses[k].iter().enumerate() {
                let mut r = Record::new("consistency", &c.estimator, "frobenius_loss", loss);
                r.seed = Some(base_seed + s as u64);
                r.n = Some(n);
                r.p = Some(p);
                out.push(r);
            }
            let (mean, std) = mean_std(&c.losses[k]);
            for (metric, v) in [("frobenius_loss_mean", mean), ("frobenius_loss_std", std)] {
                let mut r = Record::new("consistency", &c.estimator, metric, v);
                r.n = Some(n);
                r.p = Some(p);
                out.push(r);
            }
        }
        for (metric, v) in [("loglog_slope", c.slope), ("loglog_r_squared", c.r_squared)] {
            let mut r = Record::new("consistency", &c.estimator, metric, v);
            r.p = Some(p);
            out.push(r);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// High-dimensional optimal radius

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HighDimConfig {
    /// Dimension as a fraction of the sample size.
    pub ratio: f64,
    pub sample_sizes: Vec<usize>,
    pub seeds: usize,
    pub truth: TrueCovariance,
    pub divergences: Vec<Divergence>,
    /// Iterations of the ternary search over `log ε`.
    pub iterations: usize,
    /// Search interval `[lo, hi·p]` for divergences with `ε̄ = ∞`.
    pub lo: f64,
    pub hi_per_dimension: f64,
}

impl Default for HighDimConfig {
    fn default() -> Self {
        HighDimConfig {
            ratio: 0.8,
            sample_sizes: vec![40, 80, 160, 320],
            seeds: 10,
            truth: TrueCovariance::Banded,
            divergences: vec![
                Divergence::KullbackLeibler,
                Divergence::Wasserstein,
                Divergence::FisherRao,
            ],
            iterations: 40,
            lo: 1e-4,
            hi_per_dimension: 100.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HighDimPoint {
    pub estimator: String,
    pub n: usize,
    pub p: usize,
    pub radius: Option<f64>,
    /// Mean of `‖X − Σ₀‖_F / ‖Σ₀‖_F` over seeds.
    pub relative_loss: f64,
}

pub fn high_dimensional(
    config: &HighDimConfig,
    base_seed: u64,
    opts: &SolverOptions,
) -> Result<Vec<HighDimPoint>> {
    if !(config.ratio > 0.0) || config.seeds == 0 || config.iterations == 0 {
        return Err(Error::InvalidConfig("high-dimensional study needs ratio > 0, seeds and iterations".into()));
    }
    let mut out = Vec::new();
    for &n in &config.sample_sizes {
        let p = ((config.ratio * n as f64).round() as usize).max(1);
        let truth = config.truth.matrix(p);
        let scale = truth.frobenius_norm();
        let decomps: Vec<(SymMatrix, SpectralDecomposition)> = (0..config.seeds as u64)
            .into_par_iter()
            .map(|trial| {
                let data = gaussian_samples(&truth, n, base_seed + trial, Centering::AssumeZeroMean)?;
                let nominal = sample_covariance(&data)?;
                let d = eigendecompose(&nominal, opts.eigen_tol)?;
                Ok((nominal, d))
            })
            .collect::<Result<_>>()?;
        let sample_loss = decomps
            .iter()
            .map(|(s, _)| Ok(s.sub(&truth)?.frobenius_norm() / scale))
            .collect::<Result<Vec<f64>>>()?;
        out.push(HighDimPoint {
            estimator: "sample".into(),
            n,
            p,
            radius: None,
            relative_loss: mean_std(&sample_loss).0,
        });
        for &kind in &config.divergences {
            let cap = decomps
                .iter()
                .map(|(_, d)| kind.epsilon_max(d.eigenvalues()).to_f64())
                .fold(config.hi_per_dimension * p as f64, f64::min);
            let hi = clip_radius(cap, ExtendedReal::Finite(cap));
            let mean_loss = |eps: f64| -> f64 {
                let losses: Vec<f64> = decomps
                    .par_iter()
                    .map(|(_, d)| robust_loss(d, kind, eps, &truth, opts).unwrap_or(f64::INFINITY))
                    .collect();
                losses.iter().sum::<f64>() / losses.len() as f64
            };
            let log_eps = ternary_search_radius(
                |t| mean_loss(t.exp()),
                config.lo.ln(),
                hi.ln(),
                config.iterations,
            );
            let eps = log_eps.exp();
            out.push(HighDimPoint {
                estimator: kind.name().into(),
                n,
                p,
                radius: Some(eps),
                relative_loss: mean_loss(eps) / scale,
            });
        }
    }
    Ok(out)
}

pub fn high_dim_records(points: &[HighDimPoint]) -> Vec<Record> {
    points
        .iter()
        .flat_map(|pt| {
            let mut r = Record::new("high-dimensional", &pt.estimator, "relative_frobenius_loss", pt.relative_loss);
            r.n = Some(pt.n);
            r.p = Some(pt.p);
            r.parameter = pt.radius;
            let mut rows = vec![r];
            if let Some(eps) = pt.radius {
                let mut q = Record::new("high-dimensional", &pt.estimator, "optimal_radius", eps);
                q.n = Some(pt.n);
                q.p = Some(pt.p);
                rows.push(q);
            }
            rows
        })
        .collect()
}

/// Metadata written next to experiment output. It holds nothing that varies
/// between runs of the same configuration; wall time is reported separately.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub experiment: String,
    pub crate_version: &'static str,
    pub rng: &'static str,
    pub seed: u64,
    pub config: serde_json::Value,
    pub warnings: Vec<String>,
}

impl Metadata {
    pub fn new<C: Serialize>(experiment: &str, seed: u64, config: &C) -> Result<Self> {
        Ok(Metadata {
            experiment: experiment.to_string(),
            crate_version: env!("CARGO_PKG_VERSION"),
            rng: crate::sampling::RNG_NAME,
            seed,
            config: serde_json::to_value(config)?,
            warnings: Vec::new(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_a_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let (slope, intercept, r2) = linear_fit(&x, &y);
        assert!((slope + 0.5).abs() < 1e-14);
        assert!((intercept - 2.0).abs() < 1e-14);
        assert!((r2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sweep_reaches_the_boundary() {
        let paths = sweep(&SweepConfig::default(), &SolverOptions::default()).unwrap();
        let w = paths.iter().find(|p| p.kind == Divergence::Wasserstein).unwrap();
        assert!((w.radii.last().unwrap() - 6.0 * SWEEP_END).abs() < 1e-12);
        assert!(w.eigenvalues.last().unwrap().iter().all(|&x| x < 1e-3));
        let records = sweep_records(&paths);
        assert_eq!(records.len(), 3 * 50 * 4);
    }

    #[test]
    fn records_serialize_with_blank_options() {
        let mut out = Vec::new();
        write_records(&mut out, &[Record::new("x", "kl", "m", 1.5)]).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "experiment,seed,estimator,n,p,spike,parameter,index,metric,value\nx,,kl,,,,,,m,1.5\n"
        );
    }
}
