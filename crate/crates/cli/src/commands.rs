use std::path::Path;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use sdgm_core::data::{
    available_splits, default_gmm_spec, load_csv, load_csv_with_labels, load_splits, save_csv,
    synth_gmm,
};
use sdgm_core::diagnostics::{gradcheck as run_gradcheck, Fault, GradCheckReport};
use sdgm_core::{
    fit_with_progress, Dataset, GmmSpec, LabelColumn, ModelFile, ModelForm, Standardizer,
    TrainReport,
};
use serde::Serialize;

use crate::boundary::{contour, parse_grid, BoundaryGrid, Bounds, SvgScene};
use crate::config::{resolve, ResolvedConfig};
use crate::manifest::{write_json, Fingerprint, RunManifest};
use crate::{Outcome, TrainFlags};

fn dump(cfg: &ResolvedConfig) -> Result<Outcome> {
    println!("{}", serde_json::to_string_pretty(cfg)?);
    Ok(Outcome::Ok)
}

fn load(path: &Path) -> Result<Dataset> {
    load_csv(path, LabelColumn::Last).with_context(|| format!("loading {}", path.display()))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Fits with the configured preprocessing; returns the model file and report.
fn train_model(
    train: &Dataset,
    cfg: &ResolvedConfig,
    verbose: bool,
) -> Result<(ModelFile, TrainReport)> {
    let standardizer = cfg.standardize.then(|| Standardizer::fit(train));
    let prepared = match &standardizer {
        Some(s) => s.apply(train)?,
        None => train.clone(),
    };
    let (model, mut report) = fit_with_progress(&prepared, &cfg.train, |s| {
        if verbose {
            eprintln!(
                "iter {:>3}  J={:.6}  train error {:.2}%  nonzero {}  components {:?}",
                s.iteration,
                s.j,
                100.0 * s.train_error_rate,
                s.nonzero_weights,
                s.components_per_class
            );
        }
    })?;
    report.standardized = cfg.standardize;
    let file = ModelFile {
        model,
        label_names: train.label_names().to_vec(),
        standardizer,
    };
    Ok((file, report))
}

#[derive(Debug, Clone, Serialize)]
pub struct Metrics {
    /// Percentage of misclassified samples.
    pub error_rate: f64,
    pub errors: usize,
    pub samples: usize,
    pub nonzero_weights: usize,
    pub components: usize,
    pub components_per_class: Vec<usize>,
}

fn evaluate(model: &ModelFile, ds: &Dataset) -> Result<Metrics> {
    if ds.dim() != model.model.input_dim() {
        bail!(
            "dataset has {} features but the model expects {}",
            ds.dim(),
            model.model.input_dim()
        );
    }
    let mut errors = 0;
    for (x, &l) in ds.rows().zip(ds.labels()) {
        if model.predict(x)? != l {
            errors += 1;
        }
    }
    let sparsity = model.model.sparsity_metrics();
    Ok(Metrics {
        error_rate: 100.0 * errors as f64 / ds.len() as f64,
        errors,
        samples: ds.len(),
        nonzero_weights: sparsity.nonzero_weights,
        components: sparsity.components_per_class.iter().sum(),
        components_per_class: sparsity.components_per_class,
    })
}

pub fn train(
    args: &[String],
    flags: &TrainFlags,
    data: Option<&Path>,
    out: &Path,
) -> Result<Outcome> {
    let cfg = resolve(flags)?;
    if flags.dump_config {
        return dump(&cfg);
    }
    let data = data.context("--data is required")?;
    let ds = load(data)?;
    create_dir(out)?;
    let (model, report) = train_model(&ds, &cfg, true)?;
    model.save(out.join("model.json"))?;
    write_json(&out.join("report.json"), &report)?;
    let mut manifest = RunManifest::new("train", args);
    manifest.seed = Some(cfg.train.seed);
    manifest.config = Some(cfg);
    manifest
        .datasets
        .push(Fingerprint::of("train", data, ds.len(), ds.dim())?);
    manifest.outputs = vec!["model.json".into(), "report.json".into()];
    manifest.write(out)?;
    let f = &report.final_metrics;
    eprintln!(
        "{} after {} outer iterations: train error {:.2}%, nonzero weights {}, components {:?}",
        if report.converged {
            "converged"
        } else {
            "not converged"
        },
        report.outer_iterations,
        100.0 * f.train_error_rate,
        f.nonzero_weights,
        f.components_per_class
    );
    Ok(if report.converged {
        Outcome::Ok
    } else {
        Outcome::NotConverged
    })
}

pub fn eval(
    args: &[String],
    model_path: &Path,
    data: &Path,
    out: Option<&Path>,
) -> Result<Outcome> {
    let model =
        ModelFile::load(model_path).with_context(|| format!("loading {}", model_path.display()))?;
    let ds = load_csv_with_labels(data, LabelColumn::Last, Some(&model.label_names))
        .with_context(|| format!("loading {}", data.display()))?;
    let metrics = evaluate(&model, &ds)?;
    eprintln!(
        "error rate {:.2}% ({} of {})",
        metrics.error_rate, metrics.errors, metrics.samples
    );
    println!("{}", serde_json::to_string_pretty(&metrics)?);
    if let Some(out) = out {
        create_dir(out)?;
        write_json(&out.join("metrics.json"), &metrics)?;
        let mut manifest = RunManifest::new("eval", args);
        manifest.datasets.push(Fingerprint::of(
            "model",
            model_path,
            0,
            model.model.input_dim(),
        )?);
        manifest
            .datasets
            .push(Fingerprint::of("test", data, ds.len(), ds.dim())?);
        manifest.outputs = vec!["metrics.json".into()];
        manifest.write(out)?;
    }
    Ok(Outcome::Ok)
}

#[derive(Debug, Clone, Serialize)]
pub struct SplitResult {
    pub split: usize,
    pub converged: bool,
    pub train_error_rate: f64,
    pub test_error_rate: f64,
    pub nonzero_weights: usize,
    pub components_per_class: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SplitFailure {
    pub split: usize,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkSummary {
    pub requested: usize,
    pub succeeded: usize,
    pub failed: usize,
    pub not_converged: usize,
    pub mean_error_rate: f64,
    pub std_error_rate: f64,
    pub mean_nonzero_weights: f64,
    pub std_nonzero_weights: f64,
    pub splits: Vec<SplitResult>,
    pub failures: Vec<SplitFailure>,
}

/// Mean and sample standard deviation (0 for a single value).
fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn thread_cap() -> Result<Option<usize>> {
    match std::env::var("SDGM_THREADS") {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .with_context(|| format!("SDGM_THREADS must be a positive integer, got `{v}`"))?;
            if n == 0 {
                bail!("SDGM_THREADS must be at least 1");
            }
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

pub fn benchmark(
    args: &[String],
    flags: &TrainFlags,
    splits_dir: Option<&Path>,
    n_splits: Option<usize>,
    out: &Path,
) -> Result<Outcome> {
    let cfg = resolve(flags)?;
    if flags.dump_config {
        return dump(&cfg);
    }
    let dir = splits_dir.context("--splits-dir is required")?;
    let mut indices =
        available_splits(dir).with_context(|| format!("reading {}", dir.display()))?;
    if indices.is_empty() {
        bail!(
            "no <name>_train_<i>.csv / <name>_test_<i>.csv pairs in {}",
            dir.display()
        );
    }
    if let Some(n) = n_splits {
        if n > indices.len() {
            bail!("{n} splits requested but {} are available", indices.len());
        }
        indices.truncate(n);
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap()? {
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;
    let run = |i: usize| -> Result<SplitResult> {
        let (train, test) = load_splits(dir, i, LabelColumn::Last)?;
        let (model, report) = train_model(&train, &cfg, false)?;
        let metrics = evaluate(&model, &test)?;
        Ok(SplitResult {
            split: i,
            converged: report.converged,
            train_error_rate: 100.0 * report.final_metrics.train_error_rate,
            test_error_rate: metrics.error_rate,
            nonzero_weights: metrics.nonzero_weights,
            components_per_class: metrics.components_per_class,
        })
    };
    let results: Vec<Result<SplitResult>> =
        pool.install(|| indices.par_iter().map(|&i| run(i)).collect());

    let mut splits = Vec::new();
    let mut failures = Vec::new();
    for (&i, r) in indices.iter().zip(results) {
        match r {
            Ok(s) => {
                eprintln!(
                    "split {i}: test error {:.2}%, nonzero weights {}",
                    s.test_error_rate, s.nonzero_weights
                );
                splits.push(s);
            }
            Err(e) => {
                eprintln!("split {i} failed: {e:#}");
                failures.push(SplitFailure {
                    split: i,
                    message: format!("{e:#}"),
                });
            }
        }
    }
    if splits.is_empty() {
        bail!("all {} splits failed", indices.len());
    }
    let errors: Vec<f64> = splits.iter().map(|s| s.test_error_rate).collect();
    let weights: Vec<f64> = splits.iter().map(|s| s.nonzero_weights as f64).collect();
    let (mean_error_rate, std_error_rate) = mean_std(&errors);
    let (mean_nonzero_weights, std_nonzero_weights) = mean_std(&weights);
    let summary = BenchmarkSummary {
        requested: indices.len(),
        succeeded: splits.len(),
        failed: failures.len(),
        not_converged: splits.iter().filter(|s| !s.converged).count(),
        mean_error_rate,
        std_error_rate,
        mean_nonzero_weights,
        std_nonzero_weights,
        splits,
        failures,
    };
    create_dir(out)?;
    write_json(&out.join("benchmark.json"), &summary)?;
    let mut manifest = RunManifest::new("benchmark", args);
    manifest.seed = Some(cfg.train.seed);
    manifest.config = Some(cfg);
    for &i in &indices {
        if let Ok((train, test)) = load_splits(dir, i, LabelColumn::Last) {
            for (role, ds) in [("train", &train), ("test", &test)] {
                let name = ds.name.clone().unwrap_or_default();
                manifest.datasets.push(Fingerprint::of(
                    &format!("{role} {i}"),
                    &dir.join(format!("{name}.csv")),
                    ds.len(),
                    ds.dim(),
                )?);
            }
        }
    }
    manifest.outputs = vec!["benchmark.json".into()];
    manifest.write(out)?;
    eprintln!(
        "{} of {} splits: test error {:.2}% ± {:.2}, nonzero weights {:.1} ± {:.1}",
        summary.succeeded,
        summary.requested,
        summary.mean_error_rate,
        summary.std_error_rate,
        summary.mean_nonzero_weights,
        summary.std_nonzero_weights
    );
    Ok(Outcome::Ok)
}

pub fn boundary(
    args: &[String],
    model_path: &Path,
    grid: &str,
    bounds: Option<&str>,
    data: Option<&Path>,
    svg: bool,
    out: &Path,
) -> Result<Outcome> {
    let model =
        ModelFile::load(model_path).with_context(|| format!("loading {}", model_path.display()))?;
    if model.model.input_dim() != 2 {
        bail!(
            "boundary export needs a 2-D model (this one has D = {})",
            model.model.input_dim()
        );
    }
    let (nx, ny) = parse_grid(grid)?;
    let samples = data
        .map(|p| {
            load_csv_with_labels(p, LabelColumn::Last, Some(&model.label_names))
                .with_context(|| format!("loading {}", p.display()))
        })
        .transpose()?;
    let bounds = match (bounds, &samples) {
        (Some(b), _) => Bounds::parse(b)?,
        (None, Some(ds)) => Bounds::around(ds),
        (None, None) => bail!("give --bounds or --data"),
    };
    let grid = BoundaryGrid::compute(&model, bounds, nx, ny)?;
    create_dir(out)?;
    std::fs::write(out.join("boundary.csv"), grid.to_csv(&model.label_names))?;
    let mut outputs = vec!["boundary.csv".to_string()];
    if svg {
        let classes = model.model.num_classes();
        let fields: Vec<usize> = if classes == 2 {
            vec![0]
        } else {
            (0..classes).collect()
        };
        let contours = fields
            .into_iter()
            .flat_map(|c| contour(&grid.x1, &grid.x2, &grid.field(c), 0.5))
            .collect();
        let relevance = match model.model.form() {
            ModelForm::Dual { reference, .. } => reference
                .iter()
                .map(|r| match &model.standardizer {
                    Some(s) => s.inverse(r),
                    None => Ok(r.clone()),
                })
                .collect::<sdgm_core::Result<Vec<_>>>()?,
            ModelForm::Original { .. } => Vec::new(),
        };
        let scene = SvgScene {
            grid: &grid,
            contours,
            samples: samples.as_ref(),
            relevance,
        };
        std::fs::write(out.join("boundary.svg"), scene.render())?;
        outputs.push("boundary.svg".into());
    }
    let mut manifest = RunManifest::new("boundary", args);
    manifest
        .datasets
        .push(Fingerprint::of("model", model_path, 0, 2)?);
    if let (Some(p), Some(ds)) = (data, &samples) {
        manifest
            .datasets
            .push(Fingerprint::of("overlay", p, ds.len(), ds.dim())?);
    }
    manifest.outputs = outputs;
    manifest.write(out)?;
    Ok(Outcome::Ok)
}

pub fn synth(
    args: &[String],
    spec: Option<&Path>,
    n_train: usize,
    n_test: usize,
    seed: u64,
    out: &Path,
) -> Result<Outcome> {
    let spec: GmmSpec = match spec {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => default_gmm_spec(),
    };
    let (train, test) = synth_gmm(&spec, n_train, n_test, seed)?;
    create_dir(out)?;
    let mut manifest = RunManifest::new("synth", args);
    manifest.seed = Some(seed);
    for (name, ds) in [("train.csv", &train), ("test.csv", &test)] {
        let path = out.join(name);
        save_csv(ds, &path)?;
        manifest.datasets.push(Fingerprint::of(
            name.trim_end_matches(".csv"),
            &path,
            ds.len(),
            ds.dim(),
        )?);
        manifest.outputs.push(name.into());
    }
    manifest.write(out)?;
    eprintln!(
        "wrote {} training and {} test samples to {}",
        train.len(),
        test.len(),
        out.display()
    );
    Ok(Outcome::Ok)
}

/// Samples used by gradcheck when no dataset is given.
pub const GRADCHECK_DEFAULT_SAMPLES: usize = 100;

pub fn gradcheck(
    args: &[String],
    flags: &TrainFlags,
    data: Option<&Path>,
    n_states: usize,
    out: Option<&Path>,
    fault: Fault,
) -> Result<Outcome> {
    let cfg = resolve(flags)?;
    if flags.dump_config {
        return dump(&cfg);
    }
    let ds = match data {
        Some(p) => load(p)?,
        None => {
            synth_gmm(
                &default_gmm_spec(),
                GRADCHECK_DEFAULT_SAMPLES,
                1,
                cfg.train.seed,
            )?
            .0
        }
    };
    let report: GradCheckReport = run_gradcheck(&ds, &cfg.train, n_states, cfg.train.seed, fault)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    eprintln!(
        "gradient error {:.3e} (< {:e}), Hessian error {:.3e} (< {:e}): {}",
        report.max_relative_gradient_error,
        report.gradient_tolerance,
        report.max_relative_hessian_error,
        report.hessian_tolerance,
        if report.passed { "pass" } else { "FAIL" }
    );
    if let Some(out) = out {
        create_dir(out)?;
        write_json(&out.join("gradcheck.json"), &report)?;
        let mut manifest = RunManifest::new("gradcheck", args);
        manifest.seed = Some(cfg.train.seed);
        manifest.config = Some(cfg);
        if let Some(p) = data {
            manifest
                .datasets
                .push(Fingerprint::of("data", p, ds.len(), ds.dim())?);
        }
        manifest.outputs = vec!["gradcheck.json".into()];
        manifest.write(out)?;
    }
    Ok(if report.passed {
        Outcome::Ok
    } else {
        Outcome::DiagnosticFailed
    })
}
