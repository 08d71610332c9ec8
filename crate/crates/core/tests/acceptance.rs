//! Acceptance checks for the estimator library. Runs as a plain binary and
//! prints one PASS/FAIL line per criterion; exits non-zero if any fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use covshrink::calibration::{log_grid, CvSettings, RadiusSchedule};
use covshrink::classifier::{fit_tuned, stratified_split, EstimatorFamily, Method};
use covshrink::experiments::{
    consistency, sweep, synthetic_risk, ConsistencyConfig, SweepConfig, SyntheticRiskConfig,
    TrueCovariance,
};
use covshrink::fixtures::{synthetic_market, MarketSpec};
use covshrink::io::{read_labeled, read_returns};
use covshrink::portfolio::rolling_backtest;
use covshrink::sampling::{random_orthogonal, BoxMuller};
use covshrink::shrinkage::{eigenvalue_map, eigenvalue_map_numeric, root_function};
use covshrink::spectral::{commutator_norm, SymMatrix};
use covshrink::{estimate, Divergence, EstimatorSpec, ExtendedReal, SolverOptions};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn run(number: usize, title: &str, limit: Duration, check: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let result = check();
    let elapsed = start.elapsed();
    let in_time = elapsed <= limit;
    let passed = result.passed && in_time;
    println!(
        "criterion {number:2} [{}] {title}: {} ({:.2?}, limit {:?}{})",
        if passed { "PASS" } else { "FAIL" },
        result.detail,
        elapsed,
        limit,
        if in_time { "" } else { ", over time" },
    );
    passed
}

fn fixture_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

// ---------------------------------------------------------------------------
// Independent oracles

/// Scalar generators as printed, with `a` the candidate and `b` the nominal.
fn generator(kind: Divergence, a: f64, b: f64) -> f64 {
    match kind {
        Divergence::KullbackLeibler => 0.5 * (a / b - 1.0 - (a / b).ln()),
        Divergence::InverseStein => 0.5 * (b / a - 1.0 - (b / a).ln()),
        Divergence::SymmetrizedStein => 0.5 * (a / b + b / a - 2.0),
        Divergence::FisherRao => (a / b).ln().powi(2),
        Divergence::Wasserstein => (a.sqrt() - b.sqrt()).powi(2),
        Divergence::Quadratic => (a - b).powi(2),
        Divergence::WeightedQuadratic => (a - b).powi(2) / b,
    }
}

/// 2×2 symmetric matrix `[[x, y], [y, z]]`.
#[derive(Clone, Copy)]
struct Sym2 {
    x: f64,
    y: f64,
    z: f64,
}

impl Sym2 {
    fn rotated(theta: f64, e1: f64, e2: f64) -> Sym2 {
        let (s, c) = theta.sin_cos();
        Sym2 {
            x: e1 * c * c + e2 * s * s,
            y: (e1 - e2) * c * s,
            z: e1 * s * s + e2 * c * c,
        }
    }

    fn trace(self) -> f64 {
        self.x + self.z
    }

    fn det(self) -> f64 {
        self.x * self.z - self.y * self.y
    }

    fn inverse(self) -> Sym2 {
        let d = self.det();
        Sym2 {
            x: self.z / d,
            y: -self.y / d,
            z: self.x / d,
        }
    }

    /// `Tr(AB)` for symmetric `A, B`.
    fn trace_product(self, o: Sym2) -> f64 {
        self.x * o.x + 2.0 * self.y * o.y + self.z * o.z
    }

    fn sub(self, o: Sym2) -> Sym2 {
        Sym2 {
            x: self.x - o.x,
            y: self.y - o.y,
            z: self.z - o.z,
        }
    }
}

/// Matrix divergence `D(Σ, Σ̂)` for 2×2 matrices from elementary formulas:
/// generalized eigenvalues for the congruence-invariant kinds, the Bures
/// expression for Wasserstein and explicit traces for the quadratic kinds.
fn divergence_2x2(kind: Divergence, sigma: Sym2, nominal: Sym2) -> f64 {
    match kind {
        Divergence::Wasserstein => {
            let cross = sigma.trace_product(nominal) + 2.0 * (sigma.det() * nominal.det()).max(0.0).sqrt();
            sigma.trace() + nominal.trace() - 2.0 * cross.max(0.0).sqrt()
        }
        Divergence::Quadratic => {
            let d = sigma.sub(nominal);
            d.x * d.x + 2.0 * d.y * d.y + d.z * d.z
        }
        Divergence::WeightedQuadratic => {
            let d = sigma.sub(nominal);
            nominal.inverse().trace_product(Sym2 {
                x: d.x * d.x + d.y * d.y,
                y: d.x * d.y + d.y * d.z,
                z: d.y * d.y + d.z * d.z,
            })
        }
        _ => {
            if sigma.det() <= 0.0 {
                return f64::INFINITY;
            }
            let t = nominal.inverse().trace_product(sigma);
            let d = sigma.det() / nominal.det();
            let disc = (t * t - 4.0 * d).max(0.0).sqrt();
            let mu1 = 0.5 * (t + disc);
            let mu2 = d / mu1;
            generator(kind, mu1, 1.0) + generator(kind, mu2, 1.0)
        }
    }
}

/// Upper bounds on `γ*` as printed for the KL, Wasserstein and Fisher-Rao
/// estimators.
fn printed_gamma_bound(kind: Divergence, nominal: &[f64], eps: f64) -> Option<f64> {
    let p = nominal.len() as f64;
    let top = nominal.iter().cloned().fold(0.0, f64::max);
    match kind {
        Divergence::KullbackLeibler => {
            Some(4.0 * top * top * (-4.0 * eps / p).exp() / (1.0 - (-2.0 * eps / p).exp()))
        }
        Divergence::Wasserstein => Some(2.0 * (p * top.powi(3) / eps).sqrt()),
        Divergence::FisherRao => Some(nominal.iter().map(|x| x * x).sum::<f64>() / eps.sqrt()),
        _ => None,
    }
}

/// Ridders' extrapolated central difference of `f` at `x`, starting from
/// step `h` and keeping the tableau entry with the smallest error estimate.
fn derivative(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    const SHRINK: f64 = 1.4;
    const LEVELS: usize = 10;
    let mut table = [[0.0f64; LEVELS]; LEVELS];
    let mut step = h;
    table[0][0] = (f(x + step) - f(x - step)) / (2.0 * step);
    let mut best = table[0][0];
    let mut err = f64::INFINITY;
    for i in 1..LEVELS {
        step /= SHRINK;
        table[0][i] = (f(x + step) - f(x - step)) / (2.0 * step);
        let mut factor = SHRINK * SHRINK;
        for j in 1..=i {
            table[j][i] = (table[j - 1][i] * factor - table[j - 1][i - 1]) / (factor - 1.0);
            factor *= SHRINK * SHRINK;
            let e = (table[j][i] - table[j - 1][i])
                .abs()
                .max((table[j][i] - table[j - 1][i - 1]).abs());
            if e <= err {
                err = e;
                best = table[j][i];
            }
        }
        if (table[i][i] - table[i - 1][i - 1]).abs() >= 2.0 * err {
            break;
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Criteria

fn closed_form_fidelity() -> Outcome {
    let gammas = log_grid(1e-3, 1e3, 20);
    let bs = log_grid(1e-2, 1e2, 20);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for kind in Divergence::ALL {
        for &g in &gammas {
            for &b in &bs {
                match (eigenvalue_map(kind, g, b), eigenvalue_map_numeric(kind, g, b)) {
                    (Ok(x), Ok(y)) => {
                        let rel = (x - y).abs() / b.max(1.0);
                        worst = worst.max(rel);
                        if rel > 1e-9 {
                            failures += 1;
                        }
                    }
                    _ => failures += 1,
                }
            }
        }
    }
    outcome(
        failures == 0,
        format!("2800 points, worst |Δ|/max(1,b) = {worst:.2e}, {failures} over 1e-9"),
    )
}

struct Instance {
    kind: Divergence,
    nominal: SymMatrix,
    spectrum: Vec<f64>,
    eps: f64,
}

fn random_instances() -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut out = Vec::new();
    for kind in Divergence::ALL {
        let singular_allowed = matches!(kind, Divergence::Wasserstein | Divergence::Quadratic);
        let count = if singular_allowed { 120 } else { 100 };
        for i in 0..count {
            let p = rng.gen_range(2..=30usize);
            let mut spectrum: Vec<f64> = (0..p).map(|_| 10f64.powf(rng.gen_range(-1.0..1.0))).collect();
            if i >= 100 {
                let zeros = rng.gen_range(1..p);
                spectrum.iter_mut().take(zeros).for_each(|x| *x = 0.0);
            }
            spectrum.sort_by(f64::total_cmp);
            let mut normals = BoxMuller::new(ChaCha8Rng::seed_from_u64(rng.gen()));
            let q = random_orthogonal(p, &mut normals);
            let nominal = SymMatrix::from_diagonal(&spectrum).congruence(&q).unwrap();
            let eps_max: f64 = spectrum.iter().map(|&b| match kind.value(0.0, b) {
                ExtendedReal::Finite(v) => v,
                _ => f64::INFINITY,
            })
            .sum();
            let eps = if eps_max.is_finite() {
                eps_max * rng.gen_range(0.01..0.99)
            } else {
                10f64.powf(rng.gen_range(-3.0..(2.0 * p as f64).log10()))
            };
            out.push(Instance {
                kind,
                nominal,
                spectrum,
                eps,
            });
        }
    }
    out
}

struct InstanceReport {
    residual_ok: bool,
    attainment_ok: bool,
    invariants_ok: bool,
    bound_ok: bool,
    worst_residual: f64,
    worst_attainment: f64,
}

fn check_instance(inst: &Instance, opts: &SolverOptions) -> InstanceReport {
    let fail = InstanceReport {
        residual_ok: false,
        attainment_ok: false,
        invariants_ok: false,
        bound_ok: false,
        worst_residual: f64::INFINITY,
        worst_attainment: f64::INFINITY,
    };
    let Ok(sol) = estimate(&inst.nominal, inst.kind, inst.eps, opts) else {
        return fail;
    };
    let scale = inst.eps.max(1.0);
    let nominal_eigs = sol.nominal_eigenvalues();
    let f = root_function(inst.kind, sol.gamma_star(), nominal_eigs, inst.eps)
        .map(|v| v.to_f64().abs())
        .unwrap_or(f64::INFINITY);
    let achieved = inst
        .kind
        .matrix_divergence(&sol.estimator, &inst.nominal)
        .map(|v| v.to_f64())
        .unwrap_or(f64::INFINITY);
    let gap = (achieved - inst.eps).abs();

    let shrunk = sol.shrunk_eigenvalues();
    let mut invariants_ok = shrunk.iter().zip(nominal_eigs).all(|(&x, &b)| {
        if b > 0.0 {
            x > 0.0 && x < b
        } else {
            x == 0.0
        }
    });
    let zero_count = inst.spectrum.iter().filter(|&&b| b == 0.0).count();
    invariants_ok &= nominal_eigs.iter().filter(|&&b| b == 0.0).count() == zero_count;
    let comm = commutator_norm(&sol.estimator, &inst.nominal).unwrap_or(f64::INFINITY);
    invariants_ok &=
        comm <= 1e-8 * inst.nominal.frobenius_norm() * sol.estimator.frobenius_norm();
    if zero_count == 0 {
        let kappa = |v: &[f64]| v[v.len() - 1] / v[0];
        invariants_ok &= kappa(shrunk) <= kappa(nominal_eigs) * (1.0 + 1e-10);
    }
    let bound_ok = printed_gamma_bound(inst.kind, &inst.spectrum, inst.eps)
        .map_or(true, |g| sol.gamma_star() <= g);
    InstanceReport {
        residual_ok: f <= 1e-8 * scale,
        attainment_ok: gap <= 1e-6 * scale,
        invariants_ok,
        bound_ok,
        worst_residual: f / scale,
        worst_attainment: gap / scale,
    }
}

fn monotone_sweep(opts: &SolverOptions) -> Outcome {
    let config = SweepConfig::default();
    let Ok(paths) = sweep(&config, opts) else {
        return outcome(false, "sweep failed");
    };
    let mut ok = true;
    let mut notes = Vec::new();
    for path in &paths {
        let mut monotone = true;
        for k in 1..path.eigenvalues.len() {
            for i in 0..path.eigenvalues[k].len() {
                if path.eigenvalues[k][i] > path.eigenvalues[k - 1][i] + 1e-12 {
                    monotone = false;
                }
            }
            if path.condition_numbers[k] > path.condition_numbers[k - 1] * (1.0 + 1e-12) {
                monotone = false;
            }
        }
        let last = path.eigenvalues.last().unwrap();
        let shape = match path.kind {
            Divergence::Wasserstein => {
                let top = *path.radii.last().unwrap();
                (top - 6.0 * (1.0 - 1e-6)).abs() < 1e-9 && last.iter().all(|&x| x < 1e-3)
            }
            _ => path.eigenvalues.iter().flatten().all(|&x| x > 0.0),
        };
        ok &= monotone && shape;
        notes.push(format!(
            "{}: monotone={monotone}, shape={shape}, end={:.2e}",
            path.kind.name(),
            last.iter().cloned().fold(0.0, f64::max)
        ));
    }
    outcome(ok && paths.len() == 3, notes.join("; "))
}

fn brute_force_agreement(opts: &SolverOptions) -> Outcome {
    let theta0 = 0.4;
    let nominal2 = Sym2::rotated(theta0, 1.0, 3.0);
    let nominal = SymMatrix::from_rows(&[vec![nominal2.x, nominal2.y], vec![nominal2.y, nominal2.z]]).unwrap();
    let eps = 0.2;
    let step_theta = PI / 180.0;
    let h: f64 = 0.01;
    let e_max: f64 = 3.3;
    let e_grid: Vec<f64> = (0..=(e_max / h).round() as usize).map(|i| i as f64 * h).collect();

    let mut notes = Vec::new();
    let mut ok = true;
    for kind in Divergence::ALL {
        let Ok(sol) = estimate(&nominal, kind, eps, opts) else {
            ok = false;
            notes.push(format!("{}: solve failed", kind.name()));
            continue;
        };
        let (x1, x2) = (sol.shrunk_eigenvalues()[0], sol.shrunk_eigenvalues()[1]);
        let feasible =
            |theta: f64, e1: f64, e2: f64| divergence_2x2(kind, Sym2::rotated(theta, e1, e2), nominal2) <= eps;
        // Minimal feasible e2 for every (θ, e1), then the smallest objective.
        let best = (0..180)
            .into_par_iter()
            .filter_map(|t| {
                let theta = t as f64 * step_theta;
                let mut best: Option<(f64, f64, f64, f64)> = None;
                for &e1 in &e_grid {
                    let Some(k) = e_grid.iter().position(|&e2| feasible(theta, e1, e2)) else {
                        continue;
                    };
                    let e2 = if k == 0 {
                        0.0
                    } else {
                        let (mut lo, mut hi) = (e_grid[k - 1], e_grid[k]);
                        for _ in 0..50 {
                            let mid = 0.5 * (lo + hi);
                            if feasible(theta, e1, mid) {
                                hi = mid;
                            } else {
                                lo = mid;
                            }
                        }
                        hi
                    };
                    let obj = e1 * e1 + e2 * e2;
                    if best.map_or(true, |b| obj < b.0) {
                        best = Some((obj, theta, e1, e2));
                    }
                }
                best
            })
            .min_by(|a, b| a.0.total_cmp(&b.0));
        let Some((_, theta, e1, e2)) = best else {
            ok = false;
            notes.push(format!("{}: empty feasible grid", kind.name()));
            continue;
        };
        let angle_gap = |a: f64, b: f64| {
            let d = (a - b).rem_euclid(PI);
            d.min(PI - d)
        };
        let cells = |theta_ref: f64, a: f64, b: f64| {
            (angle_gap(theta, theta_ref) / step_theta)
                .max((e1 - a).abs() / h)
                .max((e2 - b).abs() / h)
        };
        let dist = cells(theta0, x1, x2).min(cells(theta0 + PI / 2.0, x2, x1));
        ok &= dist <= 2.0;
        notes.push(format!("{}: {:.2} cells", kind.name(), dist));
    }
    outcome(ok, notes.join(", "))
}

fn consistency_slopes(opts: &SolverOptions) -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for truth in [TrueCovariance::Banded, TrueCovariance::Identity] {
        let config = ConsistencyConfig {
            truth,
            divergences: Divergence::ALL.to_vec(),
            ..ConsistencyConfig::default()
        };
        let Ok(curves) = consistency(&config, 0, opts) else {
            return outcome(false, "consistency experiment failed");
        };
        for c in curves.iter().filter(|c| c.estimator != "sample") {
            let good = c.slope < 0.0 && c.r_squared >= 0.9;
            ok &= good;
            if !good {
                notes.push(format!(
                    "{truth:?}/{}: slope {:.3}, R² {:.3}",
                    c.estimator, c.slope, c.r_squared
                ));
            }
        }
        let worst = curves
            .iter()
            .filter(|c| c.estimator != "sample")
            .map(|c| c.r_squared)
            .fold(1.0, f64::min);
        let steepest = curves
            .iter()
            .filter(|c| c.estimator != "sample")
            .map(|c| c.slope)
            .fold(f64::NEG_INFINITY, f64::max);
        notes.push(format!("{truth:?}: max slope {steepest:.3}, min R² {worst:.3}"));
    }
    outcome(ok, notes.join("; "))
}

fn risk_u_shape(opts: &SolverOptions) -> Outcome {
    let config = SyntheticRiskConfig {
        p: 50,
        spikes: 5,
        spike_values: vec![10.0, 100.0],
        sample_sizes: vec![50, 100],
        seeds: 10,
        divergences: Divergence::ALL.to_vec(),
        ..SyntheticRiskConfig::default()
    };
    let Ok(curves) = synthetic_risk(&config, 0, opts) else {
        return outcome(false, "synthetic risk experiment failed");
    };
    let mut ok = true;
    let mut notes = Vec::new();
    for &m in &config.spike_values {
        for &n in &config.sample_sizes {
            let cell: Vec<_> = curves.iter().filter(|c| c.spike == m && c.n == n).collect();
            let mut worst_u = config.seeds;
            for c in cell.iter().filter(|c| c.estimator != "sample" && c.estimator != "linear") {
                let u = c
                    .losses
                    .iter()
                    .filter(|l| {
                        let last = l.len() - 1;
                        let interior = l[1..last].iter().cloned().fold(f64::INFINITY, f64::min);
                        interior < l[0] && interior < l[last]
                    })
                    .count();
                if u < 8 {
                    ok = false;
                    notes.push(format!("M={m} n={n} {}: U-shape in {u}/10", c.estimator));
                }
                worst_u = worst_u.min(u);
            }
            let mut summary = format!("M={m} n={n}: U ≥ {worst_u}/10");
            if m == 100.0 {
                let linear = cell.iter().find(|c| c.estimator == "linear").unwrap();
                let wins = (0..config.seeds)
                    .filter(|&s| {
                        let best_linear = linear.losses[s].iter().cloned().fold(f64::INFINITY, f64::min);
                        let best_dro = cell
                            .iter()
                            .filter(|c| c.estimator != "sample" && c.estimator != "linear")
                            .flat_map(|c| c.losses[s].iter().cloned())
                            .fold(f64::INFINITY, f64::min);
                        best_dro <= best_linear
                    })
                    .count();
                ok &= wins >= 6;
                summary.push_str(&format!(", DRO ≤ linear {wins}/10"));
            }
            notes.push(summary);
        }
    }
    outcome(ok, notes.join("; "))
}

fn derivative_checks() -> Outcome {
    let grid = log_grid(1e-2, 1e2, 21);
    let mut deriv_fail = 0;
    let mut curv_fail = 0;
    let mut convex_fail = 0;
    let mut ineq_fail = 0;
    let mut worst_rel = 0.0f64;
    let mut worst_ineq = 0.0f64;
    let val = |k: Divergence, a: f64, b: f64| k.value(a, b).to_f64();
    for kind in Divergence::ALL {
        for &a in &grid {
            for &b in &grid {
                let d1 = kind.deriv(a, b).unwrap();
                let d2 = kind.curv(a, b).unwrap();
                let h = 0.1 * a;
                let fd1 = derivative(|x| val(kind, x, b), a, h);
                let fd2 = derivative(|x| kind.deriv(x, b).unwrap(), a, h);
                let r1 = (fd1 - d1).abs() / d1.abs().max(1e-3 * a * d2.abs()).max(1e-300);
                let r2 = (fd2 - d2).abs() / d2.abs().max(1e-300);
                let r1 = if d1 == 0.0 && fd1.abs() < 1e-9 * a * d2.abs() { 0.0 } else { r1 };
                worst_rel = worst_rel.max(r1).max(r2);
                if r1 > 1e-6 {
                    deriv_fail += 1;
                }
                if r2 > 1e-6 {
                    curv_fail += 1;
                }
            }
        }
        for &b in &grid {
            for t in log_grid(1e-4, 1.0, 25) {
                let a = t * b;
                if kind.curv(a, b).unwrap() < -1e-12 {
                    convex_fail += 1;
                }
                if t < 1.0 {
                    let cross = derivative(|y| kind.deriv(a, y).unwrap(), b, 0.1 * b);
                    let lhs = a * kind.curv(a, b).unwrap() + b * cross - kind.deriv(a, b).unwrap();
                    worst_ineq = worst_ineq.min(lhs);
                    if lhs < -1e-9 {
                        ineq_fail += 1;
                    }
                }
            }
        }
    }
    outcome(
        deriv_fail + curv_fail + convex_fail + ineq_fail == 0,
        format!(
            "worst FD rel err {worst_rel:.2e}; failures: deriv {deriv_fail}, curv {curv_fail}, \
             convexity {convex_fail}, inequality {ineq_fail} (min lhs {worst_ineq:.2e})"
        ),
    )
}

fn cv_robust(kind: Divergence, seed: u64) -> EstimatorSpec {
    EstimatorSpec::Robust {
        divergence: kind,
        radius: RadiusSchedule::CrossValidate(CvSettings {
            seed,
            ..CvSettings::default()
        }),
    }
}

fn applications(opts: &SolverOptions) -> Outcome {
    let mut notes = Vec::new();

    // Determinism of the shipped returns fixture backtest.
    let table = read_returns(std::fs::File::open(fixture_path("synthetic_returns.csv")).unwrap()).unwrap();
    let run_once = || {
        [Divergence::KullbackLeibler, Divergence::Wasserstein]
            .iter()
            .map(|&k| {
                rolling_backtest(&table.returns, 50, 12, &cv_robust(k, 7), opts)
                    .map(|r| serde_json::to_string(&r).unwrap())
                    .unwrap_or_default()
            })
            .collect::<Vec<_>>()
    };
    let first = run_once();
    let deterministic = first == run_once() && first.iter().all(|s| !s.is_empty());
    notes.push(format!("fixture backtest deterministic={deterministic}"));

    // Out-of-sample variance on the spiked market.
    let spec = MarketSpec {
        periods: 50 + 12 * 4,
        assets: 48,
        spikes: 5,
        spike: 100.0,
        ..MarketSpec::default()
    };
    let kinds = [Divergence::KullbackLeibler, Divergence::Wasserstein, Divergence::FisherRao];
    let wins: Vec<usize> = kinds
        .iter()
        .map(|&k| {
            (0..10u64)
                .filter(|&seed| {
                    let market = synthetic_market(&spec, 100 + seed).unwrap();
                    let sample = rolling_backtest(&market.returns, 50, 12, &EstimatorSpec::Sample, opts);
                    let robust = rolling_backtest(&market.returns, 50, 12, &cv_robust(k, seed), opts);
                    matches!((sample, robust), (Ok(s), Ok(r)) if r.std_return <= s.std_return)
                })
                .count()
        })
        .collect();
    let variance_ok = wins.iter().all(|&w| w >= 7);
    notes.push(format!(
        "robust ≤ sample variance: {}",
        kinds
            .iter()
            .zip(&wins)
            .map(|(k, w)| format!("{} {w}/10", k.name()))
            .collect::<Vec<_>>()
            .join(", ")
    ));

    // Classifier accuracy on the shipped labeled fixture.
    let labeled = read_labeled(std::fs::File::open(fixture_path("two_gaussians.csv")).unwrap()).unwrap();
    let (train_idx, test_idx) = stratified_split(&labeled, 0.5, 11);
    let train = labeled.select(&train_idx).unwrap();
    let test = labeled.select(&test_idx).unwrap();
    let mut families = vec![EstimatorFamily::Sample, EstimatorFamily::Linear];
    families.extend(Divergence::ALL.iter().map(|&d| EstimatorFamily::Robust { divergence: d }));
    let mut worst = 1.0f64;
    let mut classifier_ok = true;
    for method in [Method::Lda, Method::Qda] {
        for family in &families {
            let grid = family.default_grid(50);
            let acc = fit_tuned(&train, method, *family, &grid, 0.2, 3, opts)
                .map(|(m, _)| m.accuracy(&test))
                .unwrap_or(0.0);
            worst = worst.min(acc);
            if acc < 0.95 {
                classifier_ok = false;
                notes.push(format!("{method:?}/{}: accuracy {acc:.3}", family.name()));
            }
        }
    }
    notes.push(format!("classifier min accuracy {worst:.3}"));
    outcome(deterministic && variance_ok && classifier_ok, notes.join("; "))
}

fn main() {
    let opts = SolverOptions::default();
    let mut all = true;

    all &= run(1, "closed-form fidelity", Duration::from_secs(1), closed_form_fidelity);

    let instances = random_instances();
    let start = Instant::now();
    let reports: Vec<InstanceReport> = instances.iter().map(|i| check_instance(i, &opts)).collect();
    let solve_time = start.elapsed();
    let count = |f: fn(&InstanceReport) -> bool| reports.iter().filter(|r| !f(r)).count();
    let worst = |f: fn(&InstanceReport) -> f64| reports.iter().map(f).fold(0.0, f64::max);
    all &= run(2, "root residual and radius attainment", Duration::from_secs(30), || {
        let bad = count(|r| r.residual_ok && r.attainment_ok);
        outcome(
            bad == 0 && solve_time <= Duration::from_secs(30),
            format!(
                "{} instances solved in {solve_time:.2?}, worst |F|/max(1,ε) = {:.2e}, \
                 worst |D−ε|/max(1,ε) = {:.2e}, {bad} failures",
                reports.len(),
                worst(|r| r.worst_residual),
                worst(|r| r.worst_attainment)
            ),
        )
    });
    all &= run(3, "spectral invariants", Duration::from_secs(1), || {
        let bad = count(|r| r.invariants_ok);
        outcome(bad == 0, format!("{bad} of {} instances violate an invariant", reports.len()))
    });
    all &= run(4, "monotone shrinkage paths", Duration::from_secs(5), || monotone_sweep(&opts));
    all &= run(5, "brute-force agreement at p = 2", Duration::from_secs(120), || {
        brute_force_agreement(&opts)
    });
    all &= run(6, "gamma bound compliance", Duration::from_secs(1), || {
        let bad = count(|r| r.bound_ok);
        outcome(bad == 0, format!("{bad} instances exceed the printed bound"))
    });
    all &= run(7, "consistency experiment", Duration::from_secs(300), || consistency_slopes(&opts));
    all &= run(8, "synthetic risk U-shape", Duration::from_secs(300), || risk_u_shape(&opts));
    all &= run(9, "derivative and curvature checks", Duration::from_secs(30), derivative_checks);
    all &= run(10, "applications", Duration::from_secs(300), || applications(&opts));

    if !all {
        std::process::exit(1);
    }
}
