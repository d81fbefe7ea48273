//! Command implementations. Each command computes all of its outputs first
//! and writes them at the end, so a failure leaves no partial artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::info;
use mssvdd::datamodel::{feature_csv_string, label_csv_string, read_feature_csv, synth_multimodal};
use mssvdd::eval::{
    grid_search, nested_cv, report_csv, run_cv, strategy_columns, summary_table, CvOptions,
    EvalReport, GridSearchResult, GridSpec,
};
use mssvdd::subspace::{predict, train};
use mssvdd::{KernelKind, MultiModalDataset, Prediction, SubspaceModel, TrainConfig};

use crate::args::{
    CvArgs, ExperimentArgs, GridsearchArgs, ModelArgs, PredictArgs, ReportArgs, SynthArgs,
    TrainArgs,
};
use crate::config::{load_train_config, ExperimentConfig};
use crate::error::{io, json, CliError, Result};
use crate::model_file::{digest_files, ModelFile, Provenance};

/// Writes every output through a temporary sibling and a rename, so each
/// target either has its complete new content or is untouched.
pub fn write_outputs(outputs: &[(PathBuf, Vec<u8>)]) -> Result<()> {
    for (path, bytes) in outputs {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        }
        let mut tmp = path.clone().into_os_string();
        tmp.push(".partial");
        let tmp = PathBuf::from(tmp);
        std::fs::write(&tmp, bytes).map_err(|e| io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| io(path, e))?;
        info!("wrote {}", path.display());
    }
    Ok(())
}

pub fn apply_model_args(mut model: TrainConfig, args: &ModelArgs) -> Result<TrainConfig> {
    if let Some(p) = &args.model_config {
        model = load_train_config(p)?;
    }
    if let Some(v) = args.method {
        model.method = v;
    }
    if let Some(d) = args.d {
        model.d = d;
        model.kernel.kappa = 1.0 / d as f64;
    }
    if let Some(v) = args.eta {
        model.eta = v;
    }
    if let Some(v) = args.beta {
        model.beta = v;
    }
    if let Some(v) = args.c_penalty {
        model.c_penalty = v;
    }
    if let Some(v) = args.nu {
        model.nu = v;
    }
    if let Some(v) = args.max_iter {
        model.max_iter = v;
    }
    if let Some(v) = args.update {
        model.update_strategy = v;
    }
    if let Some(v) = args.regularizer {
        model.regularizer = v;
    }
    if let Some(v) = args.decision {
        model.decision_strategy = v;
    }
    if let Some(v) = args.kernelized {
        model.kernelized = v;
    }
    if let Some(v) = args.kernel {
        model.kernel.kind = v;
    }
    if let Some(v) = args.sigma {
        model.kernel.sigma = v;
    }
    if let Some(v) = args.gamma {
        model.kernel.gamma = v;
    }
    if let Some(v) = args.kappa {
        model.kernel.kappa = v;
    }
    if let Some(v) = args.theta {
        model.kernel.theta = v;
    }
    if let Some(v) = args.concat {
        model.concat_modalities = v;
    }
    Ok(model)
}

/// The config file (if any) with every command-line override applied.
pub fn resolve_experiment(args: &ExperimentArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if !args.data.is_empty() {
        cfg.data = args.data.clone();
    }
    if let Some(p) = &args.labels {
        cfg.labels = Some(p.clone());
    }
    if let Some(v) = args.target_label {
        cfg.target_label = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.folds {
        cfg.folds = v;
    }
    if let Some(v) = args.inner_folds {
        cfg.inner_folds = v;
    }
    if let Some(v) = args.normalize {
        cfg.normalize = v;
    }
    if let Some(v) = args.selection {
        cfg.selection = v;
    }
    cfg.model = apply_model_args(cfg.model, &args.model)?;
    cfg.validate()?;
    Ok(cfg)
}

fn load_grid(path: &Path) -> Result<GridSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| io(path, e))?;
    serde_json::from_str(&text).map_err(|e| json(path, e))
}

fn to_json<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let (mut s, mut seed) = match &args.config {
        Some(p) => {
            let cfg = ExperimentConfig::load(p)?;
            (cfg.synth, cfg.seed)
        }
        None => (Default::default(), 0),
    };
    if let Some(v) = args.n_target {
        s.n_target = v;
    }
    if let Some(v) = args.n_outlier {
        s.n_outlier = v;
    }
    if let Some(v) = &args.dims {
        s.dims = v.clone();
    }
    if let Some(v) = args.separation {
        s.separation = v;
    }
    if let Some(v) = args.seed {
        seed = v;
    }
    let data = synth_multimodal(s.n_target, s.n_outlier, &s.dims, s.separation, seed)?;
    let mut outputs: Vec<(PathBuf, Vec<u8>)> = data
        .modalities()
        .iter()
        .enumerate()
        .map(|(v, m)| {
            (
                args.out.join(format!("modality_{}.csv", v + 1)),
                feature_csv_string(m).into_bytes(),
            )
        })
        .collect();
    let labels = data.require_labels()?;
    outputs.push((
        args.out.join("labels.csv"),
        label_csv_string(labels).into_bytes(),
    ));
    write_outputs(&outputs)
}

/// Trains on the configured dataset and returns the model file contents.
pub fn train_model_file(cfg: &ExperimentConfig) -> Result<(SubspaceModel, ModelFile)> {
    let data = cfg.dataset()?;
    let model = train(&data, &cfg.model)?;
    if let Some(w) = &model.trace.warning {
        log::warn!("training stopped early: {w}");
    }
    let inputs: Vec<&PathBuf> = cfg.data.iter().chain(cfg.labels.as_ref()).collect();
    let provenance = Provenance::new(cfg.seed, digest_files(&inputs)?);
    let file = ModelFile::from_model(&model, provenance);
    Ok((model, file))
}

pub fn train_cmd(args: &TrainArgs) -> Result<()> {
    let cfg = resolve_experiment(&args.experiment)?;
    let (_, file) = train_model_file(&cfg)?;
    write_outputs(&[(args.out.clone(), file.to_json().into_bytes())])
}

/// Loads one feature file per modality for prediction. Returns `None` when
/// every file is empty.
fn load_prediction_inputs(
    model: &SubspaceModel,
    paths: &[PathBuf],
) -> Result<Option<MultiModalDataset>> {
    let expected = model.input_dims.len();
    if paths.len() != expected {
        let offending = paths
            .get(expected)
            .or(paths.last())
            .expect("clap requires one file");
        return Err(CliError::Input(format!(
            "model expects {expected} modality files, got {} (offending file: {})",
            paths.len(),
            offending.display()
        )));
    }
    let mut mats = Vec::with_capacity(paths.len());
    for (v, p) in paths.iter().enumerate() {
        let m = read_feature_csv(p)?;
        if let Some(m) = &m {
            if m.dim() != model.input_dims[v] {
                return Err(CliError::Input(format!(
                    "{}: modality {} has {} features, the model was trained on {}",
                    p.display(),
                    v + 1,
                    m.dim(),
                    model.input_dims[v]
                )));
            }
        }
        mats.push((p, m));
    }
    if mats.iter().all(|(_, m)| m.is_none()) {
        return Ok(None);
    }
    let n = mats
        .iter()
        .find_map(|(_, m)| m.as_ref().map(|m| m.n_samples()))
        .unwrap_or(0);
    let mut modalities = Vec::with_capacity(mats.len());
    for (p, m) in mats {
        let found = m.as_ref().map_or(0, |m| m.n_samples());
        if found != n {
            return Err(CliError::Input(format!(
                "{}: {found} samples, expected {n} like the other modality files",
                p.display()
            )));
        }
        modalities.push(m.expect("non-empty"));
    }
    Ok(Some(MultiModalDataset::new(modalities, None)?))
}

/// Prediction CSV: fused label, per-modality labels and scores, threshold.
/// Floats use the shortest form that parses back to the same bits.
pub fn prediction_csv(n_outputs: usize, prediction: Option<&Prediction>) -> String {
    let mut out = String::from("sample,fused");
    for v in 1..=n_outputs {
        let _ = write!(out, ",label_m{v}");
    }
    for v in 1..=n_outputs {
        let _ = write!(out, ",score_m{v}");
    }
    out.push_str(",threshold\n");
    if let Some(p) = prediction {
        for i in 0..p.len() {
            let _ = write!(out, "{},{}", i, p.fused[i].code());
            for m in &p.per_modality {
                let _ = write!(out, ",{}", m[i].code());
            }
            for s in &p.scores {
                let _ = write!(out, ",{}", s[i]);
            }
            let _ = writeln!(out, ",{}", p.threshold);
        }
    }
    out
}

pub fn predict_csv(model: &SubspaceModel, paths: &[PathBuf]) -> Result<String> {
    let n_outputs = model.config.effective_modalities(model.input_dims.len());
    let prediction = match load_prediction_inputs(model, paths)? {
        Some(data) => Some(predict(model, &data)?),
        None => None,
    };
    Ok(prediction_csv(n_outputs, prediction.as_ref()))
}

pub fn predict_cmd(args: &PredictArgs) -> Result<()> {
    let model = ModelFile::load_model(&args.model)?;
    let csv = predict_csv(&model, &args.data)?;
    write_outputs(&[(args.out.clone(), csv.into_bytes())])
}

/// Runs the configured cross-validation; with a grid, hyperparameters are
/// selected per the configured selection mode.
pub fn cv_report(cfg: &ExperimentConfig, grid: Option<&GridSpec>) -> Result<EvalReport> {
    let data = cfg.dataset()?;
    let opts = CvOptions {
        k: cfg.folds,
        seed: cfg.seed,
        normalize: cfg.normalize,
    };
    Ok(match grid {
        None => run_cv(&data, &cfg.model, &opts)?,
        Some(g) => nested_cv(&data, &cfg.model, g, &opts, cfg.inner_folds, cfg.selection)?,
    })
}

pub fn cv_cmd(args: &CvArgs) -> Result<()> {
    let cfg = resolve_experiment(&args.experiment)?;
    let grid = match (&args.grid, args.search) {
        (Some(p), _) => Some(load_grid(p)?),
        (None, true) => Some(cfg.grid_for(cfg.data.len())),
        (None, false) => None,
    };
    let report = cv_report(&cfg, grid.as_ref())?;
    let mut outputs = vec![(args.out_csv.clone(), report_csv(&report).into_bytes())];
    if let Some(p) = &args.out_json {
        outputs.push((p.clone(), to_json(&report)));
    }
    write_outputs(&outputs)?;
    print!("{}", summary_table(std::slice::from_ref(&report)));
    Ok(())
}

const GRID_TABLE_HEADER: &str =
    "cell,d,c,nu,eta,beta,sigma,os,r,ds,mean_gm,max_orthonormality_error,error";

/// One line per evaluated cell, in grid order.
pub fn grid_table_csv(result: &GridSearchResult, n_modalities: usize) -> String {
    let mut out = String::from(GRID_TABLE_HEADER);
    out.push('\n');
    for cell in &result.table {
        let c = &cell.config;
        let (os, r) = strategy_columns(c, n_modalities);
        let sigma = if c.kernelized && c.kernel.kind != KernelKind::Linear {
            format!("{}", c.kernel.sigma)
        } else {
            String::new()
        };
        let gm = cell.mean_gm.map(|g| format!("{g:.6}")).unwrap_or_default();
        let error = cell
            .error
            .as_deref()
            .unwrap_or("")
            .replace([',', '\n'], ";");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{:.3e},{}",
            cell.index,
            c.d,
            c.c_penalty,
            c.nu,
            c.eta,
            c.beta,
            sigma,
            os,
            r,
            c.decision_strategy.name(),
            gm,
            cell.max_orthonormality_error,
            error
        );
    }
    out
}

pub fn gridsearch_result(
    cfg: &ExperimentConfig,
    grid: &GridSpec,
) -> Result<(GridSearchResult, usize)> {
    let data = cfg.dataset()?;
    let opts = CvOptions {
        k: cfg.inner_folds,
        seed: cfg.seed,
        normalize: cfg.normalize,
    };
    Ok((
        grid_search(&data, &cfg.model, grid, &opts)?,
        data.n_modalities(),
    ))
}

pub fn gridsearch_cmd(args: &GridsearchArgs) -> Result<()> {
    let cfg = resolve_experiment(&args.experiment)?;
    let grid = match &args.grid {
        Some(p) => load_grid(p)?,
        None => cfg.grid_for(cfg.data.len()),
    };
    let (result, v) = gridsearch_result(&cfg, &grid)?;
    write_outputs(&[
        (args.out_config.clone(), to_json(&result.best)),
        (
            args.out_table.clone(),
            grid_table_csv(&result, v).into_bytes(),
        ),
    ])?;
    println!(
        "best mean GM {:.4} over {} cells ({} failed)",
        result.best_score,
        result.table.len(),
        result.failed()
    );
    Ok(())
}

pub fn report_cmd(args: &ReportArgs) -> Result<()> {
    let reports = args
        .inputs
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(|e| io(p, e))?;
            serde_json::from_str::<EvalReport>(&text).map_err(|e| json(p, e))
        })
        .collect::<Result<Vec<_>>>()?;
    let table = summary_table(&reports);
    match &args.out {
        Some(p) => write_outputs(&[(p.clone(), table.into_bytes())]),
        None => {
            print!("{table}");
            Ok(())
        }
    }
}
