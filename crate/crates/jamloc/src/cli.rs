//! Command-line pipeline: dataset generation, splitting, preprocessing,
//! baselines, the three training phases, evaluation, and diagnostics.
//!
//! Precedence for every setting: command-line flag > `--config` TOML file >
//! built-in default. Every artifact-producing command writes a versioned
//! run-manifest JSON next to its outputs. Exit codes: 0 success, 1 validation
//! error, 2 runtime failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use ndarray::{Array2, Array3};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::analysis;
use crate::baselines::{self, BaselineModel, TabularConfig, Task};
use crate::dataset::{
    self, grid_positions, CirSample, Domain, SampleSet, Splits, SynthConfig,
};
use crate::error::{JamlocError, Result};
use crate::models::AutoencoderSpec;
use crate::preprocess::{
    apply_scaler, cir_feature_matrix, diagnostics_matrix, fit_scaler, processed_batch, FitScope,
    ScalerParams,
};
use crate::training::{
    self, load_checkpoint, save_checkpoint, PhaseConfig, TrainingState,
};
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "jamloc", version, about = "UWB jammer localization pipeline")]
pub struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Subcommand)]
pub enum Cmd {
    /// Generate a synthetic dataset directory.
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "source")]
        domain: String,
        /// Position grid width (count).
        #[arg(long)]
        nx: Option<usize>,
        /// Position grid height (count).
        #[arg(long)]
        ny: Option<usize>,
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long)]
        reflection_scale: Option<f64>,
        #[arg(long)]
        clutter_taps: Option<usize>,
        #[arg(long)]
        diag_shift: Option<f64>,
    },
    /// Write a stratified train/val/test split for a dataset.
    Split {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated train,val,test ratios.
        #[arg(long, default_value = "0.7,0.15,0.15")]
        ratios: String,
    },
    /// Fit CIR and diagnostics scalers and persist them.
    Preprocess {
        #[arg(long)]
        data: Option<PathBuf>,
        /// Target-domain dataset included in the CIR scaler fit.
        #[arg(long)]
        target_data: Option<PathBuf>,
        #[arg(long)]
        splits: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and evaluate a tabular baseline on the diagnostics.
    Baseline {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        splits: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "knn")]
        model: String,
        #[arg(long, default_value = "classify")]
        task: String,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Phase 1: denoising autoencoder pre-training on source data.
    Pretrain {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        splits: PathBuf,
        #[arg(long)]
        scaler: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
    },
    /// Phase 2: adversarial domain alignment.
    Align {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        target_data: PathBuf,
        #[arg(long)]
        splits: PathBuf,
        #[arg(long)]
        scaler: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        /// Disable the adversarial term (lambda = 0 everywhere).
        #[arg(long, default_value_t = false)]
        no_adversarial: bool,
    },
    /// Phase 3: supervised fine-tuning on sparse labeled target data.
    Finetune {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        target_data: PathBuf,
        #[arg(long)]
        scaler: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Number of labeled target samples (stratified by position).
        #[arg(long, default_value_t = 200)]
        labeled: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        /// Disable the fine-tune adversarial term.
        #[arg(long, default_value_t = false)]
        no_adversarial: bool,
    },
    /// Evaluate a checkpoint's localization metrics on a dataset split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Optional splits file; evaluates the named split (default test).
        #[arg(long)]
        splits: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        scaler: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-tap EMD / delta-mean shift diagnostics between two datasets.
    Diagnose {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        target_data: PathBuf,
        #[arg(long)]
        scaler: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Feature-importance table (mutual information, eta-squared, mean rank).
    Importance {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Spatial-zone probe on a checkpoint's embeddings.
    Probe {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        scaler: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        zones: usize,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

// ---------------------------------------------------------------------------
// Config file support
// ---------------------------------------------------------------------------

/// Flat TOML lookup: `[section] key = value`. Returns None when the file,
/// section, or key is absent.
pub struct ConfigFile {
    doc: Option<toml::Value>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self { doc: None }),
            Some(p) => {
                let raw = std::fs::read_to_string(p)?;
                let doc = raw
                    .parse::<toml::Value>()
                    .map_err(|e| JamlocError::Config(format!("bad config file: {e}")))?;
                Ok(Self { doc: Some(doc) })
            }
        }
    }

    fn get(&self, section: &str, key: &str) -> Option<&toml::Value> {
        self.doc.as_ref()?.get(section)?.get(key)
    }

    pub fn usize_or(&self, section: &str, key: &str, flag: Option<usize>, default: usize) -> usize {
        flag.or_else(|| {
            self.get(section, key)
                .and_then(|v| v.as_integer())
                .map(|v| v as usize)
        })
        .unwrap_or(default)
    }

    pub fn f64_or(&self, section: &str, key: &str, flag: Option<f64>, default: f64) -> f64 {
        flag.or_else(|| self.get(section, key).and_then(|v| v.as_float()))
            .unwrap_or(default)
    }
}

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct RunManifest {
    schema_version: u32,
    command: String,
    config_hash: String,
    seed: Option<u64>,
    artifacts: Vec<String>,
    versions: BTreeMap<String, String>,
}

fn write_manifest(
    out_dir: &Path,
    command: &str,
    config_repr: &str,
    seed: Option<u64>,
    artifacts: &[PathBuf],
) -> Result<()> {
    let mut versions = BTreeMap::new();
    versions.insert("jamloc".to_string(), env!("CARGO_PKG_VERSION").to_string());
    versions.insert(
        "dataset_schema".to_string(),
        dataset::DATASET_SCHEMA_VERSION.to_string(),
    );
    let manifest = RunManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        command: command.to_string(),
        config_hash: hex::encode(Sha256::digest(config_repr.as_bytes())),
        seed,
        artifacts: artifacts
            .iter()
            .map(|p| p.to_string_lossy().into_owned())
            .collect(),
        versions,
    };
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(
        out_dir.join("run_manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

/// Resolve a dataset directory: explicit flag wins, else JAMLOC_DATA_DIR.
fn resolve_data(data: Option<PathBuf>) -> Result<PathBuf> {
    match data {
        Some(p) => Ok(p),
        None => std::env::var_os("JAMLOC_DATA_DIR")
            .map(PathBuf::from)
            .ok_or_else(|| {
                JamlocError::Invalid(
                    "no --data given and JAMLOC_DATA_DIR is not set".into(),
                )
            }),
    }
}

fn load_splits(path: &Path) -> Result<Splits> {
    let raw = std::fs::read_to_string(path)?;
    serde_json::from_str(&raw).map_err(|e| JamlocError::Invalid(format!("bad splits file: {e}")))
}

fn select<'a>(set: &'a SampleSet, idx: &[usize]) -> Vec<&'a CirSample> {
    idx.iter().map(|&i| &set.samples[i]).collect()
}

fn coords_matrix(samples: &[&CirSample]) -> Array2<f64> {
    Array2::from_shape_fn((samples.len(), 2), |(i, j)| {
        if j == 0 {
            samples[i].x_cm
        } else {
            samples[i].y_cm
        }
    })
}

fn tensors(
    samples: &[&CirSample],
    scaler: &ScalerParams,
) -> Result<(Array3<f64>, Array2<f64>)> {
    Ok((processed_batch(samples, scaler)?, coords_matrix(samples)))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn write_history(path: &Path, history: &[training::EpochRecord]) -> Result<()> {
    let mut out = String::new();
    for rec in history {
        out.push_str(&serde_json::to_string(rec)?);
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Minimal SVG polyline plot for diagnostics output.
fn write_svg_series(path: &Path, series: &[(&str, &[f64])], title: &str) -> Result<()> {
    let (w, h) = (800.0, 400.0);
    let margin = 40.0;
    let max_y = series
        .iter()
        .flat_map(|(_, v)| v.iter())
        .cloned()
        .fold(1e-12f64, f64::max);
    let max_x = series.iter().map(|(_, v)| v.len()).max().unwrap_or(1) as f64;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n\
         <text x=\"{margin}\" y=\"20\" font-size=\"14\">{title}</text>\n"
    );
    let colors = ["#1f77b4", "#d62728", "#2ca02c"];
    for (si, (name, vals)) in series.iter().enumerate() {
        let pts: Vec<String> = vals
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let x = margin + (w - 2.0 * margin) * i as f64 / (max_x - 1.0).max(1.0);
                let y = h - margin - (h - 2.0 * margin) * v / max_y;
                format!("{x:.1},{y:.1}")
            })
            .collect();
        let color = colors[si % colors.len()];
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" points=\"{}\"/>\n\
             <text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">{name}</text>\n",
            pts.join(" "),
            w - margin - 100.0,
            20.0 + 15.0 * si as f64,
        ));
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)?;
    Ok(())
}

fn parse_domain(s: &str) -> Result<Domain> {
    Domain::parse(s).ok_or_else(|| JamlocError::Invalid(format!("unknown domain `{s}`")))
}

/// Default synthetic benchmark shift knobs for target-domain generation.
fn apply_target_shift(cfg: &mut SynthConfig) {
    cfg.reflection_scale = 2.5;
    cfg.clutter_taps = 3;
    cfg.diag_shift = 0.8;
}

// ---------------------------------------------------------------------------
// Command implementations
// ---------------------------------------------------------------------------

fn cmd_synth(
    cf: &ConfigFile,
    seed: u64,
    out: &Path,
    domain: &str,
    nx: Option<usize>,
    ny: Option<usize>,
    rounds: Option<usize>,
    reflection_scale: Option<f64>,
    clutter_taps: Option<usize>,
    diag_shift: Option<f64>,
) -> Result<()> {
    let domain = parse_domain(domain)?;
    let nx = cf.usize_or("synth", "nx", nx, 4);
    let ny = cf.usize_or("synth", "ny", ny, 4);
    let rounds = cf.usize_or("synth", "rounds", rounds, 25);
    let positions = grid_positions(nx, ny, 300.0, 500.0);
    let mut cfg = SynthConfig::new(positions, rounds, domain);
    if domain == Domain::Target {
        apply_target_shift(&mut cfg);
    }
    cfg.reflection_scale = cf.f64_or(
        "synth",
        "reflection_scale",
        reflection_scale,
        cfg.reflection_scale,
    );
    cfg.clutter_taps = cf.usize_or("synth", "clutter_taps", clutter_taps, cfg.clutter_taps);
    cfg.diag_shift = cf.f64_or("synth", "diag_shift", diag_shift, cfg.diag_shift);
    let set = dataset::synth_generate(&cfg, seed)?;
    dataset::write_dataset(&set, out)?;
    write_manifest(
        out,
        "synth",
        &serde_json::to_string(&cfg)?,
        Some(seed),
        &[out.join("manifest.json"), out.join("data.csv")],
    )
}

fn cmd_split(data: Option<PathBuf>, out: &Path, seed: u64, ratios: &str) -> Result<()> {
    let data = resolve_data(data)?;
    let parts: Vec<f64> = ratios
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| JamlocError::Invalid(format!("bad --ratios: {e}")))?;
    if parts.len() != 3 {
        return Err(JamlocError::Invalid("--ratios needs three values".into()));
    }
    let set = dataset::load_dataset(&data)?;
    let splits = dataset::split(&set, (parts[0], parts[1], parts[2]), seed)?;
    let out_file = out.join("splits.json");
    write_json(&out_file, &splits)?;
    write_manifest(out, "split", ratios, Some(seed), &[out_file])
}

fn cmd_preprocess(
    data: Option<PathBuf>,
    target_data: Option<PathBuf>,
    splits: &Path,
    out: &Path,
) -> Result<()> {
    let data = resolve_data(data)?;
    let set = dataset::load_dataset(&data)?;
    let sp = load_splits(splits)?;
    let train = select(&set, &sp.train);

    // Diagnostics scaler: source train rows only.
    let diag = diagnostics_matrix(&train);
    let diag_scaler = fit_scaler(diag.view(), FitScope::SourceTrainOnly)?;
    let diag_path = out.join("diag_scaler.json");
    std::fs::create_dir_all(out)?;
    diag_scaler.save(&diag_path)?;

    // CIR scaler: source train plus (optionally) unlabeled target rows.
    let mut cir_rows: Vec<&CirSample> = train.clone();
    let target_set;
    let scope = if let Some(td) = &target_data {
        target_set = dataset::load_dataset(td)?;
        cir_rows.extend(target_set.samples.iter());
        FitScope::SourcePlusTarget
    } else {
        FitScope::SourceTrainOnly
    };
    let cir = cir_feature_matrix(&cir_rows)?;
    let cir_scaler = fit_scaler(cir.view(), scope)?;
    let cir_path = out.join("cir_scaler.json");
    cir_scaler.save(&cir_path)?;

    write_manifest(out, "preprocess", &format!("{scope:?}"), None, &[diag_path, cir_path])
}

fn cmd_baseline(
    cf: &ConfigFile,
    data: Option<PathBuf>,
    splits: &Path,
    out: &Path,
    model: &str,
    task: &str,
    k: Option<usize>,
    epochs: Option<usize>,
    seed: u64,
) -> Result<()> {
    let data = resolve_data(data)?;
    let set = dataset::load_dataset(&data)?;
    let sp = load_splits(splits)?;
    let model = match model {
        "knn" => BaselineModel::Knn,
        "simplenn" => BaselineModel::Simplenn,
        other => {
            return Err(JamlocError::Invalid(format!(
                "unknown baseline model `{other}` (knn | simplenn)"
            )))
        }
    };
    let task = match task {
        "classify" => Task::Classify,
        "regress" => Task::Regress,
        other => return Err(JamlocError::Invalid(format!("unknown task `{other}`"))),
    };
    let train = select(&set, &sp.train);
    let test = select(&set, &sp.test);
    let diag_train = diagnostics_matrix(&train);
    let scaler = fit_scaler(diag_train.view(), FitScope::SourceTrainOnly)?;
    let x_train = apply_scaler(&scaler, diag_train.view())?;
    let x_test = apply_scaler(&scaler, diagnostics_matrix(&test).view())?;
    let label = |rows: &[&CirSample]| -> Array2<f64> {
        match task {
            Task::Classify => {
                Array2::from_shape_fn((rows.len(), 1), |(i, _)| rows[i].position_id as f64)
            }
            Task::Regress => coords_matrix(rows),
        }
    };
    let n_classes = set
        .samples
        .iter()
        .map(|s| s.position_id)
        .max()
        .map_or(1, |m| m as usize + 1);
    let cfg = TabularConfig {
        k: cf.usize_or("baseline", "k", k, 5),
        epochs: cf.usize_or("baseline", "epochs", epochs, 200),
        n_classes,
        seed,
    };
    let report = baselines::train_tabular(
        model,
        task,
        &x_train,
        &label(&train),
        &x_test,
        &label(&test),
        &cfg,
        None,
    )?;
    let report_path = out.join("baseline_report.json");
    write_json(&report_path, &report)?;
    write_manifest(out, "baseline", &format!("{model:?}/{task:?}"), Some(seed), &[report_path])
}

fn cmd_pretrain(
    cf: &ConfigFile,
    data: Option<PathBuf>,
    splits: &Path,
    scaler: &Path,
    out: &Path,
    seed: u64,
    epochs: Option<usize>,
    batch_size: Option<usize>,
) -> Result<()> {
    let data = resolve_data(data)?;
    let set = dataset::load_dataset(&data)?;
    let sp = load_splits(splits)?;
    let cir_scaler = load_cir_scaler(scaler)?;
    let (x_train, _) = tensors(&select(&set, &sp.train), &cir_scaler)?;
    let (x_val, _) = tensors(&select(&set, &sp.val), &cir_scaler)?;

    let mut cfg = PhaseConfig::pretrain_default()
        .with_epochs(cf.usize_or("pretrain", "epochs", epochs, 30));
    cfg.batch_size = cf.usize_or("pretrain", "batch_size", batch_size, 256);
    let mut state = TrainingState::new(seed, AutoencoderSpec::default())?;
    training::run_pretrain(&mut state, &x_train, Some(&x_val), &cfg)?;

    std::fs::create_dir_all(out)?;
    let ckpt = out.join("pretrain.ckpt.json");
    let last_val = state.history.last().and_then(|r| r.val_rec);
    save_checkpoint(&ckpt, &mut state, last_val)?;
    let hist = out.join("history.jsonl");
    write_history(&hist, &state.history)?;
    write_manifest(out, "pretrain", &serde_json::to_string(&cfg)?, Some(seed), &[ckpt, hist])
}

fn load_cir_scaler(path: &Path) -> Result<ScalerParams> {
    // accept either fit scope; training contracts are enforced upstream
    ScalerParams::load(path, FitScope::SourcePlusTarget)
        .or_else(|_| ScalerParams::load(path, FitScope::SourceTrainOnly))
}

fn cmd_align(
    cf: &ConfigFile,
    checkpoint: &Path,
    data: Option<PathBuf>,
    target_data: &Path,
    splits: &Path,
    scaler: &Path,
    out: &Path,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    no_adversarial: bool,
) -> Result<()> {
    let data = resolve_data(data)?;
    let set = dataset::load_dataset(&data)?;
    let tgt = dataset::load_dataset(target_data)?;
    let sp = load_splits(splits)?;
    let cir_scaler = load_cir_scaler(scaler)?;
    let (x_src, _) = tensors(&select(&set, &sp.train), &cir_scaler)?;
    let all_tgt: Vec<&CirSample> = tgt.samples.iter().collect();
    let (x_tgt, _) = tensors(&all_tgt, &cir_scaler)?;

    let mut state = load_checkpoint(checkpoint)?;
    let mut cfg =
        PhaseConfig::align_default().with_epochs(cf.usize_or("align", "epochs", epochs, 40));
    cfg.batch_size = cf.usize_or("align", "batch_size", batch_size, 256);
    if no_adversarial {
        cfg.lambda = crate::training::ScheduleSpec::constant(0.0, cfg.epochs);
    }
    let outcome = training::run_align(&mut state, &x_src, &x_tgt, &cfg)?;

    std::fs::create_dir_all(out)?;
    let ckpt = out.join("align.ckpt.json");
    save_checkpoint(&ckpt, &mut state, Some(outcome.final_auc))?;
    let hist = out.join("history.jsonl");
    write_history(&hist, &state.history)?;
    write_manifest(out, "align", &serde_json::to_string(&cfg)?, Some(state.seed), &[ckpt, hist])
}

fn cmd_finetune(
    cf: &ConfigFile,
    checkpoint: &Path,
    target_data: &Path,
    scaler: &Path,
    out: &Path,
    labeled: usize,
    seed: u64,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    no_adversarial: bool,
) -> Result<()> {
    let tgt = dataset::load_dataset(target_data)?;
    let cir_scaler = load_cir_scaler(scaler)?;
    let (labeled_idx, rest_idx) = dataset::stratified_holdout(&tgt, labeled, seed)?;
    let (x_lab, y_lab) = tensors(&select(&tgt, &labeled_idx), &cir_scaler)?;
    let (x_hold, y_hold) = tensors(&select(&tgt, &rest_idx), &cir_scaler)?;

    let mut state = load_checkpoint(checkpoint)?;
    let mut cfg = PhaseConfig::finetune_default()
        .with_epochs(cf.usize_or("finetune", "epochs", epochs, 200));
    cfg.batch_size = cf.usize_or("finetune", "batch_size", batch_size, 256);
    if no_adversarial {
        cfg.lambda = crate::training::ScheduleSpec::constant(0.0, cfg.epochs);
    }
    let outcome = training::run_finetune(&mut state, &x_lab, &y_lab, &x_hold, &y_hold, &cfg)?;

    std::fs::create_dir_all(out)?;
    let ckpt = out.join("finetune.ckpt.json");
    save_checkpoint(&ckpt, &mut state, Some(outcome.best_holdout_err))?;
    let hist = out.join("history.jsonl");
    write_history(&hist, &state.history)?;
    write_manifest(out, "finetune", &serde_json::to_string(&cfg)?, Some(seed), &[ckpt, hist])
}

fn cmd_eval(
    checkpoint: &Path,
    data: Option<PathBuf>,
    splits: Option<PathBuf>,
    split_name: &str,
    scaler: &Path,
    out: &Path,
) -> Result<()> {
    let data = resolve_data(data)?;
    let set = dataset::load_dataset(&data)?;
    let cir_scaler = load_cir_scaler(scaler)?;
    let rows: Vec<&CirSample> = match &splits {
        None => set.samples.iter().collect(),
        Some(p) => {
            let sp = load_splits(p)?;
            let idx = match split_name {
                "train" => &sp.train,
                "val" => &sp.val,
                "test" => &sp.test,
                other => {
                    return Err(JamlocError::Invalid(format!("unknown split `{other}`")))
                }
            };
            select(&set, idx)
        }
    };
    let (x, y) = tensors(&rows, &cir_scaler)?;
    let start = std::time::Instant::now();
    let mut state = load_checkpoint(checkpoint)?;
    let preds = training::predict_coords(&mut state.model, &x);
    let mut report = analysis::localization_metrics(&preds, &y)?;
    report.wall_time_min = start.elapsed().as_secs_f64() / 60.0;
    let report_path = out.join("metrics.json");
    write_json(&report_path, &report)?;
    write_manifest(out, "eval", split_name, Some(state.seed), &[report_path])?;
    println!(
        "mean {:.2} cm | med {:.2} cm | p90 {:.2} cm | f<=30cm {:.3}",
        report.mean_err, report.med_err, report.p90_err, report.frac_within_30cm
    );
    Ok(())
}

fn cmd_diagnose(
    data: Option<PathBuf>,
    target_data: &Path,
    scaler: &Path,
    out: &Path,
) -> Result<()> {
    let data = resolve_data(data)?;
    let src = dataset::load_dataset(&data)?;
    let tgt = dataset::load_dataset(target_data)?;
    let cir_scaler = load_cir_scaler(scaler)?;
    let src_rows: Vec<&CirSample> = src.samples.iter().collect();
    let tgt_rows: Vec<&CirSample> = tgt.samples.iter().collect();
    let src_feat = apply_scaler(&cir_scaler, cir_feature_matrix(&src_rows)?.view())?;
    let tgt_feat = apply_scaler(&cir_scaler, cir_feature_matrix(&tgt_rows)?.view())?;
    let report = analysis::per_tap_emd(&src_feat, &tgt_feat)?;

    std::fs::create_dir_all(out)?;
    let json_path = out.join("emd_report.json");
    write_json(&json_path, &report)?;
    let mut csv = String::from("tap,emd,dmean,flagged\n");
    for (i, (e, d)) in report.emd.iter().zip(&report.dmean).enumerate() {
        let flag = report.flagged.contains(&i);
        csv.push_str(&format!("{i},{e},{d},{flag}\n"));
    }
    let csv_path = out.join("emd_per_tap.csv");
    std::fs::write(&csv_path, csv)?;
    let svg_path = out.join("emd_per_tap.svg");
    write_svg_series(
        &svg_path,
        &[("EMD", &report.emd), ("|dmean|", &report.dmean)],
        "Per-tap distribution shift (normalized features)",
    )?;
    write_manifest(out, "diagnose", "per_tap_emd", None, &[json_path, csv_path, svg_path])
}

fn cmd_importance(data: Option<PathBuf>, out: &Path) -> Result<()> {
    let data = resolve_data(data)?;
    let set = dataset::load_dataset(&data)?;
    let rows: Vec<&CirSample> = set.samples.iter().collect();
    let diag = diagnostics_matrix(&rows);
    let groups: Vec<usize> = rows.iter().map(|s| s.position_id as usize).collect();
    // importance w.r.t. radial distance from the room center (a scalar target
    // correlated with both coordinates) plus per-position grouping for eta^2
    let target: Vec<f64> = rows
        .iter()
        .map(|s| ((s.x_cm - 150.0).powi(2) + (s.y_cm - 250.0).powi(2)).sqrt())
        .collect();
    let mut mi_scores = BTreeMap::new();
    let mut eta_scores = BTreeMap::new();
    for (j, name) in dataset::DIAGNOSTIC_NAMES.iter().enumerate() {
        let col: Vec<f64> = diag.column(j).to_vec();
        mi_scores.insert(name.to_string(), analysis::mutual_info(&col, &target, 16)?);
        eta_scores.insert(name.to_string(), analysis::eta_squared(&col, &groups)?);
    }
    let mut tables = BTreeMap::new();
    tables.insert("mutual_info".to_string(), mi_scores.clone());
    tables.insert("eta_squared".to_string(), eta_scores.clone());
    let ranks = analysis::rank_aggregate(&tables)?;

    #[derive(Serialize)]
    struct ImportanceReport {
        mutual_info: BTreeMap<String, f64>,
        eta_squared: BTreeMap<String, f64>,
        mean_rank: Vec<(String, f64)>,
    }
    let report = ImportanceReport {
        mutual_info: mi_scores,
        eta_squared: eta_scores,
        mean_rank: ranks,
    };
    std::fs::create_dir_all(out)?;
    let json_path = out.join("importance.json");
    write_json(&json_path, &report)?;
    let rank_vals: Vec<f64> = report.mean_rank.iter().map(|(_, r)| *r).collect();
    let svg_path = out.join("importance.svg");
    write_svg_series(&svg_path, &[("mean rank", &rank_vals)], "Feature mean ranks (ascending)")?;
    write_manifest(out, "importance", "mi+eta+rank", None, &[json_path, svg_path])
}

fn cmd_probe(
    checkpoint: &Path,
    data: Option<PathBuf>,
    scaler: &Path,
    out: &Path,
    zones: usize,
    folds: usize,
    seed: u64,
) -> Result<()> {
    let data = resolve_data(data)?;
    let set = dataset::load_dataset(&data)?;
    let cir_scaler = load_cir_scaler(scaler)?;
    let rows: Vec<&CirSample> = set.samples.iter().collect();
    let (x, coords) = tensors(&rows, &cir_scaler)?;
    let mut state = load_checkpoint(checkpoint)?;
    let (emb, _) = state.model.ae.encode(&x, false, None);
    let result = analysis::zone_probe(&emb, &coords, zones, folds, seed)?;
    let json_path = out.join("zone_probe.json");
    write_json(&json_path, &result)?;
    write_manifest(out, "probe", &format!("k={zones},folds={folds}"), Some(seed), &[json_path])?;
    println!("zone probe: auc {:.4} accuracy {:.4}", result.roc_auc_ovr, result.accuracy);
    Ok(())
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

/// Dispatch a parsed CLI invocation.
pub fn run(cli: Cli) -> Result<()> {
    let cf = ConfigFile::load(cli.config.as_deref())?;
    match cli.command {
        Cmd::Synth {
            seed,
            out,
            domain,
            nx,
            ny,
            rounds,
            reflection_scale,
            clutter_taps,
            diag_shift,
        } => cmd_synth(
            &cf, seed, &out, &domain, nx, ny, rounds, reflection_scale, clutter_taps, diag_shift,
        ),
        Cmd::Split { data, out, seed, ratios } => cmd_split(data, &out, seed, &ratios),
        Cmd::Preprocess { data, target_data, splits, out } => {
            cmd_preprocess(data, target_data, &splits, &out)
        }
        Cmd::Baseline { data, splits, out, model, task, k, epochs, seed } => {
            cmd_baseline(&cf, data, &splits, &out, &model, &task, k, epochs, seed)
        }
        Cmd::Pretrain { data, splits, scaler, out, seed, epochs, batch_size } => {
            cmd_pretrain(&cf, data, &splits, &scaler, &out, seed, epochs, batch_size)
        }
        Cmd::Align {
            checkpoint,
            data,
            target_data,
            splits,
            scaler,
            out,
            epochs,
            batch_size,
            no_adversarial,
        } => cmd_align(
            &cf, &checkpoint, data, &target_data, &splits, &scaler, &out, epochs, batch_size,
            no_adversarial,
        ),
        Cmd::Finetune {
            checkpoint,
            target_data,
            scaler,
            out,
            labeled,
            seed,
            epochs,
            batch_size,
            no_adversarial,
        } => cmd_finetune(
            &cf, &checkpoint, &target_data, &scaler, &out, labeled, seed, epochs, batch_size,
            no_adversarial,
        ),
        Cmd::Eval { checkpoint, data, splits, split, scaler, out } => {
            cmd_eval(&checkpoint, data, splits, &split, &scaler, &out)
        }
        Cmd::Diagnose { data, target_data, scaler, out } => {
            cmd_diagnose(data, &target_data, &scaler, &out)
        }
        Cmd::Importance { data, out } => cmd_importance(data, &out),
        Cmd::Probe { checkpoint, data, scaler, out, zones, folds, seed } => {
            cmd_probe(&checkpoint, data, &scaler, &out, zones, folds, seed)
        }
    }
}

/// Exit-code mapping: validation problems are 1, runtime failures 2.
pub fn exit_code(err: &JamlocError) -> i32 {
    match err {
        JamlocError::Config(_)
        | JamlocError::Invalid(_)
        | JamlocError::Format(_)
        | JamlocError::MalformedRow { .. } => 1,
        _ => 2,
    }
}
