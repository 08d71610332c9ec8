//! Subcommand implementations.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use covshrink::baselines::{sample_covariance, Centering};
use covshrink::calibration::{CvSettings, RadiusContext, RadiusSchedule};
use covshrink::classifier::{fit_tuned, prior_only_accuracy, stratified_split, EstimatorFamily, Method};
use covshrink::estimators::AlphaPolicy;
use covshrink::experiments::{
    consistency, consistency_records, high_dim_records, high_dimensional, risk_records, sweep,
    sweep_records, synthetic_risk, write_records, Metadata, Record, TrueCovariance,
};
use covshrink::io::{read_labeled, read_returns, read_samples, read_square_matrix, write_matrix};
use covshrink::portfolio::rolling_backtest;
use covshrink::shrinkage::estimate_decomposed;
use covshrink::spectral::{condition_number_of, eigendecompose};
use covshrink::{Divergence, Error, EstimatorSpec, ExtendedReal, Result, SolverOptions};

use crate::config::{ClassifyConfig, InputFormat, PortfolioConfig, RunConfig, DEFAULT_OUT};
use crate::{Cli, Command};

/// Settings shared by every subcommand after merging flags into the file.
struct Globals {
    seed: u64,
    out: PathBuf,
    opts: SolverOptions,
}

pub fn run(cli: &Cli) -> Result<()> {
    let file = RunConfig::load(cli.config.as_deref())?;
    let tol = cli.tol.or(file.tol);
    let mut opts = SolverOptions::default();
    if let Some(t) = tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidConfig(format!("tol must be positive, got {t}")));
        }
        opts.tol = t;
    }
    let globals = Globals {
        seed: cli.seed.or(file.seed).unwrap_or(0),
        out: cli
            .out
            .clone()
            .or(file.out.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
        opts,
    };
    match &cli.command {
        Command::Estimate(a) => estimate_cmd(a, file.estimate.unwrap_or_default(), &globals),
        Command::Sweep(a) => {
            let mut c = file.sweep.unwrap_or_default();
            set(&mut c.eigenvalues, a.eigenvalues.clone());
            set(&mut c.divergences, parse_list(&a.divergences)?);
            set(&mut c.points, a.points);
            set(&mut c.max_radius, a.max_radius);
            let start = Instant::now();
            let paths = sweep(&c, &globals.opts)?;
            write_experiment("sweep", &c, &sweep_records(&paths), start, &globals)
        }
        Command::SyntheticRisk(a) => {
            let mut c = file.synthetic_risk.unwrap_or_default();
            set(&mut c.p, a.p);
            set(&mut c.spikes, a.spikes);
            set(&mut c.spike_values, a.spike_values.clone());
            set(&mut c.sample_sizes, a.sample_sizes.clone());
            set(&mut c.seeds, a.seeds);
            set(&mut c.divergences, parse_list(&a.divergences)?);
            set(&mut c.points, a.points);
            let start = Instant::now();
            let curves = synthetic_risk(&c, globals.seed, &globals.opts)?;
            let records = risk_records(&curves, c.p, globals.seed);
            write_experiment("synthetic-risk", &c, &records, start, &globals)
        }
        Command::Consistency(a) => {
            let mut c = file.consistency.unwrap_or_default();
            set(&mut c.p, a.p);
            set(&mut c.c, a.c);
            set(&mut c.sample_sizes, a.sample_sizes.clone());
            set(&mut c.seeds, a.seeds);
            set(&mut c.truth, parse_one::<TrueCovariance>(&a.truth)?);
            set(&mut c.divergences, parse_list(&a.divergences)?);
            let start = Instant::now();
            let curves = consistency(&c, globals.seed, &globals.opts)?;
            let records = consistency_records(&curves, c.p, globals.seed);
            write_experiment("consistency", &c, &records, start, &globals)
        }
        Command::HighDimensional(a) => {
            let mut c = file.high_dimensional.unwrap_or_default();
            set(&mut c.ratio, a.ratio);
            set(&mut c.sample_sizes, a.sample_sizes.clone());
            set(&mut c.seeds, a.seeds);
            set(&mut c.truth, parse_one::<TrueCovariance>(&a.truth)?);
            set(&mut c.divergences, parse_list(&a.divergences)?);
            let start = Instant::now();
            let points = high_dimensional(&c, globals.seed, &globals.opts)?;
            write_experiment("high-dimensional", &c, &high_dim_records(&points), start, &globals)
        }
        Command::Portfolio(a) => {
            let mut c = file.portfolio.unwrap_or_default();
            set(&mut c.returns, a.returns.clone().map(Some));
            set(&mut c.window, a.window);
            set(&mut c.holding, a.holding);
            if let Some(name) = &a.estimator {
                c.estimator = Some(cross_validated(name)?);
            }
            portfolio_cmd(c, &globals)
        }
        Command::Classify(a) => {
            let mut c = file.classify.unwrap_or_default();
            set(&mut c.data, a.data.clone().map(Some));
            set(&mut c.methods, parse_list(&a.methods)?);
            if let Some(names) = &a.estimators {
                c.estimators = names.iter().map(|n| family(n)).collect::<Result<_>>()?;
            }
            set(&mut c.repeats, a.repeats);
            set(&mut c.train_fraction, a.train_fraction);
            classify_cmd(c, &globals)
        }
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Parses a flag value with the same spelling as the configuration file.
fn parse_value<T: DeserializeOwned>(s: &str) -> Result<T> {
    serde_json::from_value(Value::String(s.trim().to_string()))
        .map_err(|_| Error::InvalidConfig(format!("unrecognized value '{s}'")))
}

fn parse_one<T: DeserializeOwned>(s: &Option<String>) -> Result<Option<T>> {
    s.as_deref().map(parse_value).transpose()
}

fn parse_list<T: DeserializeOwned>(s: &Option<Vec<String>>) -> Result<Option<Vec<T>>> {
    s.as_ref()
        .map(|v| v.iter().map(|x| parse_value(x)).collect())
        .transpose()
}

fn divergence(name: &str) -> Result<Divergence> {
    name.parse()
}

fn family(name: &str) -> Result<EstimatorFamily> {
    Ok(match name {
        "sample" => EstimatorFamily::Sample,
        "linear" => EstimatorFamily::Linear,
        other => EstimatorFamily::Robust {
            divergence: divergence(other)?,
        },
    })
}

/// `sample`, cross-validated `linear`, or a cross-validated robust estimator.
fn cross_validated(name: &str) -> Result<EstimatorSpec> {
    Ok(match family(name)? {
        EstimatorFamily::Sample => EstimatorSpec::Sample,
        EstimatorFamily::Linear => EstimatorSpec::Linear {
            alpha: AlphaPolicy::CrossValidate(CvSettings::default()),
        },
        EstimatorFamily::Robust { divergence } => EstimatorSpec::Robust {
            divergence,
            radius: RadiusSchedule::CrossValidate(CvSettings::default()),
        },
    })
}

/// Points every cross-validation inside `spec` at the run seed.
fn seeded(spec: EstimatorSpec, seed: u64) -> EstimatorSpec {
    match spec {
        EstimatorSpec::Linear {
            alpha: AlphaPolicy::CrossValidate(cv),
        } => EstimatorSpec::Linear {
            alpha: AlphaPolicy::CrossValidate(CvSettings { seed, ..cv }),
        },
        EstimatorSpec::Robust {
            divergence,
            radius: RadiusSchedule::CrossValidate(cv),
        } => EstimatorSpec::Robust {
            divergence,
            radius: RadiusSchedule::CrossValidate(CvSettings { seed, ..cv }),
        },
        other => other,
    }
}

fn required<T>(value: Option<T>, what: &str) -> Result<T> {
    value.ok_or_else(|| Error::InvalidConfig(format!("{what} is required")))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Numbers as JSON numbers, infinities as the strings `"inf"`/`"-inf"`.
fn extended(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x > 0.0 {
        json!("inf")
    } else if x < 0.0 {
        json!("-inf")
    } else {
        json!("nan")
    }
}

/// Writes `records.csv` and `meta.json`, which depend only on the
/// configuration and seed, and `timing.json`, which does not.
fn write_experiment<C: Serialize>(
    name: &str,
    config: &C,
    records: &[Record],
    start: Instant,
    g: &Globals,
) -> Result<()> {
    let mut w = create(&g.out, "records.csv")?;
    write_records(&mut w, records)?;
    w.flush()?;
    let mut meta = Metadata::new(name, g.seed, config)?;
    meta.config = json!({ "tol": g.opts.tol, name: meta.config });
    write_json(&g.out, "meta.json", &meta)?;
    write_json(&g.out, "timing.json", &json!({ "wall_seconds": start.elapsed().as_secs_f64() }))
}

fn estimate_cmd(a: &crate::EstimateArgs, mut c: crate::config::EstimateConfig, g: &Globals) -> Result<()> {
    set(&mut c.input, a.input.clone().map(Some));
    if a.samples {
        c.format = InputFormat::Samples;
    }
    if a.zero_mean {
        c.centering = Centering::AssumeZeroMean;
    }
    if let Some(name) = &a.divergence {
        c.divergence = Some(divergence(name)?);
    }
    if let Some(epsilon) = a.epsilon {
        c.radius = Some(RadiusSchedule::Fixed {
            epsilon,
            clip: a.clip,
        });
    }
    set(&mut c.sample_size, a.sample_size.map(Some));
    let kind = required(c.divergence, "a divergence")?;
    let radius = required(c.radius.clone(), "a radius")?;
    let input = required(c.input.clone(), "an input file")?;

    let data = match c.format {
        InputFormat::Matrix => None,
        InputFormat::Samples => Some(read_samples(open(&input)?, c.centering)?),
    };
    let nominal = match &data {
        Some(d) => sample_covariance(d)?,
        None => read_square_matrix(open(&input)?)?,
    };
    let decomp = eigendecompose(&nominal, g.opts.eigen_tol)?;
    let resolved = radius.resolve(&RadiusContext {
        kind,
        data: data.as_ref(),
        sample_size: c.sample_size,
        nominal_eigenvalues: decomp.eigenvalues(),
        truth: None,
        solver: &g.opts,
    })?;
    let sol = estimate_decomposed(&decomp, kind, resolved.epsilon, &g.opts)?;

    let mut w = create(&g.out, "estimate.csv")?;
    write_matrix(&mut w, &sol.estimator)?;
    w.flush()?;
    let eps_max = match kind.epsilon_max(decomp.eigenvalues()) {
        ExtendedReal::Finite(m) => m,
        _ => f64::INFINITY,
    };
    let solution = json!({
        "divergence": kind,
        "epsilon": resolved.epsilon,
        "epsilon_max": extended(eps_max),
        "gamma_star": sol.gamma_star(),
        "residual": sol.residual(),
        "eigenvalues_nominal": sol.nominal_eigenvalues(),
        "eigenvalues_shrunk": sol.shrunk_eigenvalues(),
        "achieved_divergence": sol.achieved_divergence(),
        "condition_numbers": {
            "nominal": extended(condition_number_of(sol.nominal_eigenvalues())),
            "shrunk": extended(condition_number_of(sol.shrunk_eigenvalues())),
        },
        "warnings": resolved.warnings,
        "config": {
            "input": input,
            "format": c.format,
            "centering": c.centering,
            "radius": radius,
            "sample_size": c.sample_size,
            "tol": g.opts.tol,
        },
    });
    write_json(&g.out, "solution.json", &solution)
}

fn portfolio_cmd(c: PortfolioConfig, g: &Globals) -> Result<()> {
    let path = required(c.returns.clone(), "a returns file")?;
    let table = read_returns(open(&path)?)?;
    let estimator = seeded(
        c.estimator.clone().unwrap_or(cross_validated("wasserstein")?),
        g.seed,
    );
    let start = Instant::now();
    let report = rolling_backtest(&table.returns, c.window, c.holding, &estimator, &g.opts)?;
    write_json(&g.out, "report.json", &report)?;
    let config = PortfolioConfig {
        estimator: Some(estimator),
        ..c
    };
    let meta = Metadata::new("portfolio", g.seed, &json!({ "tol": g.opts.tol, "portfolio": config }))?;
    write_json(&g.out, "meta.json", &meta)?;
    write_json(&g.out, "timing.json", &json!({ "wall_seconds": start.elapsed().as_secs_f64() }))
}

fn classify_cmd(c: ClassifyConfig, g: &Globals) -> Result<()> {
    c.validate()?;
    let path = required(c.data.clone(), "a labeled data file")?;
    let data = read_labeled(open(&path)?)?;
    let start = Instant::now();
    let mut rows: Vec<(String, String, Vec<f64>)> = Vec::new();
    let mut prior = Vec::new();
    for method in &c.methods {
        for fam in &c.estimators {
            let name = match method {
                Method::Lda => "lda",
                Method::Qda => "qda",
            };
            rows.push((name.into(), fam.name(), Vec::new()));
        }
    }
    for r in 0..c.repeats as u64 {
        let seed = g.seed + r;
        let (train_idx, test_idx) = stratified_split(&data, c.train_fraction, seed);
        let train = data.select(&train_idx)?;
        let test = data.select(&test_idx)?;
        prior.push(prior_only_accuracy(&train, &test));
        let mut k = 0;
        for &method in &c.methods {
            for &fam in &c.estimators {
                let grid = fam.default_grid(c.points);
                let (model, _) = fit_tuned(&train, method, fam, &grid, c.validation_fraction, seed, &g.opts)?;
                rows[k].2.push(model.accuracy(&test));
                k += 1;
            }
        }
    }
    rows.push(("none".into(), "prior".into(), prior));
    let mut w = create(&g.out, "accuracy.csv")?;
    writeln!(w, "method,estimator,mean_accuracy,std_error,repeats")?;
    for (method, estimator, acc) in &rows {
        let m = acc.len() as f64;
        let mean = acc.iter().sum::<f64>() / m;
        let se = if acc.len() > 1 {
            (acc.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (m - 1.0)).sqrt() / m.sqrt()
        } else {
            0.0
        };
        writeln!(w, "{method},{estimator},{mean},{se},{}", acc.len())?;
    }
    w.flush()?;
    let meta = Metadata::new("classify", g.seed, &json!({ "tol": g.opts.tol, "classify": c }))?;
    write_json(&g.out, "meta.json", &meta)?;
    write_json(&g.out, "timing.json", &json!({ "wall_seconds": start.elapsed().as_secs_f64() }))
}
