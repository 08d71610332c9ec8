//! Radius selection: fixed radii, the `c·n^{-1/2}` schedule, the
//! finite-sample certificate radius, ternary search and cross-validation.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{sample_covariance, SampleSet};
use crate::divergence::Divergence;
use crate::error::{Error, Result};
use crate::extended::ExtendedReal;
use crate::portfolio::min_variance_weights_decomposed;
use crate::sampling;
use crate::shrinkage::{estimate, shrink_spectrum, SolverOptions};
use crate::spectral::{eigendecompose, SpectralDecomposition, SymMatrix};

/// Produced radii are kept at most this fraction of `ε̄`.
pub const CLIP_FACTOR: f64 = 1.0 - 1e-9;

/// Sample sizes up to this use leave-one-out under [`Folds::Auto`].
pub const LOO_MAX_SAMPLES: usize = 100;

pub fn radius_root_n(c: f64, n: usize) -> f64 {
    c / (n as f64).sqrt()
}

/// Per-divergence factor `c` turning the spectral-error bound `ρ` into a
/// divergence radius. `lambda_min` is the smallest population eigenvalue.
pub fn finite_sample_constant(kind: Divergence, p: usize, lambda_min: f64) -> f64 {
    let p = p as f64;
    match kind {
        Divergence::KullbackLeibler
        | Divergence::InverseStein
        | Divergence::SymmetrizedStein => p / lambda_min,
        Divergence::FisherRao | Divergence::WeightedQuadratic => 2.0 * p / lambda_min,
        Divergence::Wasserstein => 4.0 * p / (9.0 * lambda_min * lambda_min),
        Divergence::Quadratic => p,
    }
}

/// `c·c₀σ²((p + log η⁻¹)/n + √((p + log η⁻¹)/n))`.
///
/// `c0` stands in for an unspecified universal constant, so the result has the
/// right shape in `(p, n, η)` but certifies no particular coverage level.
pub fn radius_finite_sample(
    c0: f64,
    sigma2: f64,
    lambda_min: f64,
    p: usize,
    n: usize,
    eta: f64,
    kind: Divergence,
) -> Result<f64> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::BadConfidence(eta));
    }
    for (name, v) in [("c0", c0), ("sigma2", sigma2), ("lambda_min", lambda_min)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
        }
    }
    if p == 0 || n == 0 {
        return Err(Error::InvalidConfig("p and n must be positive".into()));
    }
    let t = (p as f64 - eta.ln()) / n as f64;
    let rho = c0 * sigma2 * (t + t.sqrt());
    Ok(finite_sample_constant(kind, p, lambda_min) * rho)
}

/// Minimizes a loss assumed unimodal on `[lo, hi]`. Unimodality is not
/// checked; the interval shrinks by a factor 2/3 per iteration and the
/// midpoint of the final interval is returned.
pub fn ternary_search_radius(mut loss: impl FnMut(f64) -> f64, lo: f64, hi: f64, iters: usize) -> f64 {
    let (mut a, mut b) = (lo, hi);
    for _ in 0..iters {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if loss(m1) <= loss(m2) {
            b = m2;
        } else {
            a = m1;
        }
    }
    0.5 * (a + b)
}

/// `points` logarithmically spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            let step = (b - a) / (points - 1) as f64;
            let mut g: Vec<f64> = (0..points).map(|i| (a + step * i as f64).exp()).collect();
            g[0] = lo;
            g[points - 1] = hi;
            g
        }
    }
}

/// Pulls `epsilon` strictly below `ε̄` when it would reach it.
pub fn clip_radius(epsilon: f64, epsilon_max: ExtendedReal) -> f64 {
    match epsilon_max {
        ExtendedReal::Finite(m) if epsilon >= m * CLIP_FACTOR => m * CLIP_FACTOR,
        _ => epsilon,
    }
}

/// Radius ranges searched by cross-validation when none is configured.
pub fn default_radius_range(kind: Divergence) -> (f64, f64) {
    match kind {
        Divergence::KullbackLeibler => (1e-5, 1e2),
        Divergence::FisherRao => (1e-10, 1e4),
        Divergence::Wasserstein => (1e-10, 1e8),
        _ => (1e-8, 1e4),
    }
}

pub const DEFAULT_ALPHA_RANGE: (f64, f64) = (1e-5, 1.0);
pub const DEFAULT_GRID_POINTS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum Folds {
    /// Leave-one-out up to [`LOO_MAX_SAMPLES`] samples, five folds above.
    #[default]
    Auto,
    LeaveOneOut,
    KFold { k: usize },
    /// A single split holding out `fraction` of the samples.
    Holdout { fraction: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ValidationScore {
    /// Out-of-sample second moment of the minimum-variance portfolio return.
    #[default]
    PortfolioVariance,
    /// `‖X − S_val‖_F²`.
    FrobeniusHoldout,
    /// `‖X‖_F² − 2 Tr(S_val X)`.
    QuadraticLoss,
}

/// Grid and split settings shared by the cross-validated policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvSettings {
    /// Explicit ascending grid; when absent a log grid over `[lo, hi]`.
    #[serde(default)]
    pub grid: Option<Vec<f64>>,
    #[serde(default)]
    pub lo: Option<f64>,
    #[serde(default)]
    pub hi: Option<f64>,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default)]
    pub folds: Folds,
    #[serde(default)]
    pub score: ValidationScore,
    /// Seed of the fold assignment.
    #[serde(default)]
    pub seed: u64,
}

fn default_points() -> usize {
    DEFAULT_GRID_POINTS
}

impl Default for CvSettings {
    fn default() -> Self {
        CvSettings {
            grid: None,
            lo: None,
            hi: None,
            points: DEFAULT_GRID_POINTS,
            folds: Folds::Auto,
            score: ValidationScore::PortfolioVariance,
            seed: 0,
        }
    }
}

impl CvSettings {
    /// Structural checks that do not depend on the default range.
    pub fn validate(&self) -> Result<()> {
        match &self.grid {
            Some(g) if g.is_empty() => Err(Error::EmptyGrid),
            Some(g) if g.windows(2).any(|w| w[0] >= w[1]) || g.iter().any(|x| !x.is_finite()) => {
                Err(Error::InvalidConfig("grid must be finite and strictly ascending".into()))
            }
            Some(_) => Ok(()),
            None => {
                if self.points == 0 {
                    return Err(Error::EmptyGrid);
                }
                for v in [self.lo, self.hi].into_iter().flatten() {
                    if !(v > 0.0 && v.is_finite()) {
                        return Err(Error::InvalidConfig(format!("grid ends must be positive, got {v}")));
                    }
                }
                match (self.lo, self.hi) {
                    (Some(lo), Some(hi)) if hi < lo || (hi == lo && self.points > 1) => Err(
                        Error::InvalidConfig(format!("grid range [{lo}, {hi}] is empty or degenerate")),
                    ),
                    _ => Ok(()),
                }
            }
        }
    }

    /// The candidate grid, falling back to `default_range` for missing ends.
    pub fn candidates(&self, default_range: (f64, f64)) -> Result<Vec<f64>> {
        let grid = match &self.grid {
            Some(g) => g.clone(),
            None => {
                let lo = self.lo.unwrap_or(default_range.0);
                let hi = self.hi.unwrap_or(default_range.1);
                if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                    return Err(Error::InvalidConfig(format!(
                        "grid range must satisfy 0 < lo <= hi, got [{lo}, {hi}]"
                    )));
                }
                log_grid(lo, hi, self.points)
            }
        };
        if grid.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) || grid.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig("grid must be finite and strictly ascending".into()));
        }
        Ok(grid)
    }
}

/// Rule producing a radius from the data at hand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy", deny_unknown_fields)]
pub enum RadiusSchedule {
    /// A given radius. Radii at or above `ε̄` are rejected unless `clip` is
    /// set, in which case they are moved just below it.
    Fixed {
        epsilon: f64,
        #[serde(default)]
        clip: bool,
    },
    /// `c·n^{-1/2}`. The high-dimensional heuristic `c′·p^{3/2}·n^{-1/2}` is
    /// this policy with `c = c′·p^{3/2}`.
    RootN {
        c: f64,
    },
    /// Certificate radius; `sigma2` and `lambda_min` default to plug-in
    /// estimates from the nominal spectrum.
    FiniteSample {
        c0: f64,
        #[serde(default)]
        sigma2: Option<f64>,
        #[serde(default)]
        lambda_min: Option<f64>,
        eta: f64,
    },
    /// Ternary search for the radius closest to a known true covariance.
    TernarySearch {
        lo: f64,
        hi: f64,
        trials: usize,
    },
    CrossValidate(CvSettings),
}

/// A radius together with any caveats about how it was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedRadius {
    pub epsilon: f64,
    pub warnings: Vec<String>,
}

/// What a schedule may consult when producing a radius.
#[derive(Debug, Clone, Copy)]
pub struct RadiusContext<'a> {
    pub kind: Divergence,
    /// Samples behind the nominal matrix; required by the ternary-search and
    /// cross-validation policies.
    pub data: Option<&'a SampleSet>,
    /// Sample size when `data` is absent.
    pub sample_size: Option<usize>,
    /// Ascending spectrum of the nominal matrix.
    pub nominal_eigenvalues: &'a [f64],
    /// True covariance, needed only by [`RadiusSchedule::TernarySearch`].
    pub truth: Option<&'a SymMatrix>,
    pub solver: &'a SolverOptions,
}

impl RadiusSchedule {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")))
            }
        };
        match self {
            RadiusSchedule::Fixed { epsilon, .. } => {
                if *epsilon > 0.0 {
                    Ok(())
                } else {
                    Err(Error::RadiusNonPositive(*epsilon))
                }
            }
            RadiusSchedule::RootN { c } => positive("c", *c),
            RadiusSchedule::FiniteSample {
                c0,
                sigma2,
                lambda_min,
                eta,
            } => {
                positive("c0", *c0)?;
                if let Some(s) = sigma2 {
                    positive("sigma2", *s)?;
                }
                if let Some(l) = lambda_min {
                    positive("lambda_min", *l)?;
                }
                if !(*eta > 0.0 && *eta < 1.0) {
                    return Err(Error::BadConfidence(*eta));
                }
                Ok(())
            }
            RadiusSchedule::TernarySearch { lo, hi, trials } => {
                if !(*lo >= 0.0 && hi > lo && hi.is_finite()) {
                    return Err(Error::InvalidConfig(format!(
                        "ternary search needs 0 <= lo < hi, got [{lo}, {hi}]"
                    )));
                }
                if *trials == 0 {
                    return Err(Error::InvalidConfig("trials must be at least 1".into()));
                }
                Ok(())
            }
            RadiusSchedule::CrossValidate(cv) => cv.validate(),
        }
    }

    /// Produces a radius in `(0, ε̄)` for the given data.
    pub fn resolve(&self, ctx: &RadiusContext<'_>) -> Result<ResolvedRadius> {
        self.validate()?;
        let eps_max = ctx.kind.epsilon_max(ctx.nominal_eigenvalues);
        let n = || {
            ctx.sample_size.or(ctx.data.map(SampleSet::n)).ok_or_else(|| {
                Error::InvalidConfig("this radius policy needs the sample size".into())
            })
        };
        let data = || {
            ctx.data.ok_or_else(|| {
                Error::InvalidConfig("this radius policy needs the raw samples".into())
            })
        };
        let mut warnings = Vec::new();
        let raw = match self {
            RadiusSchedule::Fixed { epsilon, clip } => {
                if !clip {
                    if let ExtendedReal::Finite(max) = eps_max {
                        if *epsilon >= max {
                            return Err(Error::RadiusTooLarge {
                                epsilon: *epsilon,
                                max,
                            });
                        }
                    }
                }
                *epsilon
            }
            RadiusSchedule::RootN { c } => radius_root_n(*c, n()?),
            RadiusSchedule::FiniteSample {
                c0,
                sigma2,
                lambda_min,
                eta,
            } => {
                let eigs = ctx.nominal_eigenvalues;
                let sigma2 = sigma2.unwrap_or_else(|| {
                    warnings.push("sigma2 replaced by the largest nominal eigenvalue".into());
                    eigs.last().copied().unwrap_or(0.0)
                });
                let lambda_min = lambda_min.unwrap_or_else(|| {
                    warnings.push("lambda_min replaced by the smallest nominal eigenvalue".into());
                    eigs.first().copied().unwrap_or(0.0)
                });
                let p = ctx.nominal_eigenvalues.len();
                radius_finite_sample(*c0, sigma2, lambda_min, p, n()?, *eta, ctx.kind)?
            }
            RadiusSchedule::TernarySearch { lo, hi, trials } => {
                let truth = ctx.truth.ok_or_else(|| {
                    Error::InvalidConfig("ternary search needs the true covariance".into())
                })?;
                let nominal = sample_covariance(data()?)?;
                let hi = clip_radius(*hi, eps_max);
                let lo = lo.max(hi * 1e-12).min(hi);
                ternary_search_radius(
                    |eps| frobenius_loss(&nominal, ctx.kind, eps, truth, ctx.solver),
                    lo,
                    hi,
                    *trials,
                )
            }
            RadiusSchedule::CrossValidate(cv) => {
                let grid = cv.candidates(default_radius_range(ctx.kind))?;
                let outcome = cross_validate_radius(
                    data()?, ctx.kind, &grid, cv.folds, cv.seed, cv.score, ctx.solver,
                )?;
                if outcome.skipped > 0 {
                    warnings.push(format!(
                        "{} fold evaluations scored +inf and were skipped",
                        outcome.skipped
                    ));
                }
                outcome.selected
            }
        };
        if !(raw > 0.0) {
            return Err(Error::RadiusNonPositive(raw));
        }
        let epsilon = clip_radius(raw, eps_max);
        if epsilon < raw {
            warnings.push(format!("radius {raw} clipped below the maximal radius"));
        }
        Ok(ResolvedRadius { epsilon, warnings })
    }
}

/// `‖X*(ε) − Σ₀‖_F`, or `+∞` when the estimate fails.
pub fn frobenius_loss(
    nominal: &SymMatrix,
    kind: Divergence,
    epsilon: f64,
    truth: &SymMatrix,
    opts: &SolverOptions,
) -> f64 {
    match estimate(nominal, kind, epsilon, opts) {
        Ok(sol) => sol
            .estimator
            .sub(truth)
            .map_or(f64::INFINITY, |d| d.frobenius_norm()),
        Err(_) => f64::INFINITY,
    }
}

/// One train/validation split, as row indices into the original sample set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Rows ordered by content, so that fold membership does not depend on the
/// order in which the samples were supplied.
fn canonical_order(data: &SampleSet) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..data.n()).collect();
    idx.sort_by(|&a, &b| {
        data.row(a)
            .iter()
            .zip(data.row(b))
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    });
    idx
}

pub fn splits(data: &SampleSet, folds: Folds, seed: u64) -> Result<Vec<Split>> {
    let n = data.n();
    let mut order = canonical_order(data);
    let folds = match folds {
        Folds::Auto if n <= LOO_MAX_SAMPLES => Folds::LeaveOneOut,
        Folds::Auto => Folds::KFold { k: 5 },
        f => f,
    };
    let groups: Vec<Vec<usize>> = match folds {
        Folds::LeaveOneOut => order.iter().map(|&i| vec![i]).collect(),
        Folds::KFold { k } => {
            if k < 2 || k > n {
                return Err(Error::InvalidConfig(format!(
                    "k-fold needs 2 <= k <= n, got k={k}, n={n}"
                )));
            }
            order.shuffle(&mut sampling::rng(seed));
            let mut g = vec![Vec::new(); k];
            for (pos, &i) in order.iter().enumerate() {
                g[pos % k].push(i);
            }
            g
        }
        Folds::Holdout { fraction } => {
            if !(fraction > 0.0 && fraction < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "holdout fraction must lie in (0, 1), got {fraction}"
                )));
            }
            order.shuffle(&mut sampling::rng(seed));
            let m = ((fraction * n as f64).round() as usize).clamp(1, n.saturating_sub(1).max(1));
            vec![order[..m].to_vec()]
        }
        Folds::Auto => unreachable!("resolved above"),
    };
    let mut out = Vec::with_capacity(groups.len());
    for mut validation in groups {
        validation.sort_unstable();
        let train: Vec<usize> = (0..n).filter(|i| validation.binary_search(i).is_err()).collect();
        if train.len() < 2 || validation.is_empty() {
            return Err(Error::InsufficientData(format!(
                "a fold has {} training and {} validation samples",
                train.len(),
                validation.len()
            )));
        }
        out.push(Split { train, validation });
    }
    Ok(out)
}

/// Scores an estimator fitted on a training set against validation samples,
/// which are centered at `center` (the training mean or zero).
pub fn score_estimator(
    score: ValidationScore,
    estimator: &SpectralDecomposition,
    validation: &SampleSet,
    center: &[f64],
) -> Result<f64> {
    let m = validation.n() as f64;
    match score {
        ValidationScore::PortfolioVariance => {
            let w = min_variance_weights_decomposed(estimator)?;
            let second_moment = validation
                .rows()
                .map(|r| {
                    let ret: f64 = r
                        .iter()
                        .zip(center)
                        .zip(&w)
                        .map(|((x, c), wi)| (x - c) * wi)
                        .sum();
                    ret * ret
                })
                .sum::<f64>()
                / m;
            Ok(second_moment)
        }
        ValidationScore::FrobeniusHoldout | ValidationScore::QuadraticLoss => {
            let s_val = crate::baselines::scatter(validation, center, m);
            let est = estimator.to_matrix();
            let pairs = est.entries().iter().zip(s_val.entries());
            if score == ValidationScore::FrobeniusHoldout {
                Ok(pairs.map(|(a, b)| (a - b) * (a - b)).sum())
            } else {
                Ok(pairs.map(|(a, b)| a * a - 2.0 * a * b).sum())
            }
        }
    }
}

/// Outcome of a grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub selected: f64,
    /// Mean validation score per grid point (`+∞` where no fold scored).
    pub scores: Vec<f64>,
    /// Fold evaluations that failed or scored non-finite.
    pub skipped: usize,
}

/// Grid search over a scalar hyperparameter. `prepare` runs once per training
/// fold; `fit` maps its output and a grid value to an estimator given by its
/// eigensystem. A fit that fails or scores non-finite is left out of that grid
/// point's mean. Ties go to the smaller grid value.
pub fn cross_validate<P, Prep, Fit>(
    data: &SampleSet,
    grid: &[f64],
    folds: Folds,
    seed: u64,
    score: ValidationScore,
    prepare: Prep,
    fit: Fit,
) -> Result<CvOutcome>
where
    P: Send,
    Prep: Fn(&SampleSet) -> Result<P> + Sync,
    Fit: Fn(&P, f64) -> Result<SpectralDecomposition> + Sync,
{
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let splits = splits(data, folds, seed)?;
    let fold_scores: Vec<Vec<Option<f64>>> = splits
        .par_iter()
        .map(|split| {
            let train = data.select(&split.train)?;
            let val = data.select(&split.validation)?;
            let center = train.center();
            let prepared = prepare(&train)?;
            Ok(grid
                .iter()
                .map(|&value| {
                    fit(&prepared, value)
                        .and_then(|est| score_estimator(score, &est, &val, &center))
                        .ok()
                        .filter(|s| s.is_finite())
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut scores = Vec::with_capacity(grid.len());
    let mut skipped = 0;
    for k in 0..grid.len() {
        let used: Vec<f64> = fold_scores.iter().filter_map(|f| f[k]).collect();
        skipped += fold_scores.len() - used.len();
        scores.push(if used.is_empty() {
            f64::INFINITY
        } else {
            used.iter().sum::<f64>() / used.len() as f64
        });
    }
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s < scores[best] {
            best = i;
        }
    }
    if !scores[best].is_finite() {
        return Err(Error::InsufficientData(
            "no grid point produced a finite validation score".into(),
        ));
    }
    Ok(CvOutcome {
        selected: grid[best],
        scores,
        skipped,
    })
}

fn decompose_sample_covariance(train: &SampleSet, opts: &SolverOptions) -> Result<SpectralDecomposition> {
    eigendecompose(&sample_covariance(train)?, opts.eigen_tol)
}

/// Cross-validated radius for the robust estimator built on the sample
/// covariance of each training fold. Grid radii at or above a fold's `ε̄` are
/// clipped below it.
pub fn cross_validate_radius(
    data: &SampleSet,
    kind: Divergence,
    grid: &[f64],
    folds: Folds,
    seed: u64,
    score: ValidationScore,
    opts: &SolverOptions,
) -> Result<CvOutcome> {
    cross_validate(
        data,
        grid,
        folds,
        seed,
        score,
        |train| decompose_sample_covariance(train, opts),
        |decomp, eps| {
            let eps = clip_radius(eps, kind.epsilon_max(decomp.eigenvalues()));
            let sol = shrink_spectrum(kind, decomp.eigenvalues(), eps, opts)?;
            decomp.with_spectrum(sol.shrunk_eigenvalues)
        },
    )
}

/// Cross-validated mixing weight of linear shrinkage.
pub fn cross_validate_alpha(
    data: &SampleSet,
    grid: &[f64],
    folds: Folds,
    seed: u64,
    score: ValidationScore,
    opts: &SolverOptions,
) -> Result<CvOutcome> {
    cross_validate(
        data,
        grid,
        folds,
        seed,
        score,
        |train| decompose_sample_covariance(train, opts),
        |decomp, alpha| {
            if !(0.0..=1.0).contains(&alpha) {
                return Err(Error::BadAlpha(alpha));
            }
            let e = decomp.eigenvalues();
            let mu = e.iter().sum::<f64>() / e.len() as f64;
            decomp.with_spectrum(e.iter().map(|x| x + alpha * (mu - x)).collect())
        },
    )
}
