use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, ConfusionMatrix, MetricSet};
use crate::datamodel::{stratified_folds, FeatureMatrix, FoldPlan, Label, MultiModalDataset};
use crate::error::{Error, Result};
use crate::subspace::{predict, train, DecisionStrategy, Prediction, TrainConfig};

/// Cross-validation settings shared by plain and nested runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub k: usize,
    pub seed: u64,
    /// Z-score every feature with statistics of the training targets.
    pub normalize: bool,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            k: 5,
            seed: 0,
            normalize: false,
        }
    }
}

/// Per-feature z-scoring fitted on one dataset and applied to others.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    means: Vec<DVector<f64>>,
    scales: Vec<DVector<f64>>,
}

impl Standardizer {
    pub fn fit(data: &MultiModalDataset) -> Self {
        let mut means = Vec::new();
        let mut scales = Vec::new();
        for m in data.modalities() {
            let v = m.values();
            let mean = v.column_mean();
            let n = v.ncols() as f64;
            let scale = DVector::from_fn(v.nrows(), |i, _| {
                let var = v.row(i).iter().map(|x| (x - mean[i]).powi(2)).sum::<f64>() / n;
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            });
            means.push(mean);
            scales.push(scale);
        }
        Standardizer { means, scales }
    }

    pub fn apply(&self, data: &MultiModalDataset) -> Result<MultiModalDataset> {
        let modalities = data
            .modalities()
            .iter()
            .zip(self.means.iter().zip(&self.scales))
            .map(|(m, (mean, scale))| {
                let v = m.values();
                FeatureMatrix::new(DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| {
                    (v[(i, j)] - mean[i]) / scale[i]
                }))
            })
            .collect::<Result<Vec<_>>>()?;
        MultiModalDataset::with_ids(
            modalities,
            data.labels().map(<[Label]>::to_vec),
            data.sample_ids().to_vec(),
        )
    }
}

/// Test-fold outputs for one trained model.
#[derive(Debug, Clone)]
pub(crate) struct FoldOutcome {
    pub truth: Vec<Label>,
    pub prediction: Prediction,
    pub max_orthonormality_error: f64,
    pub warning: Option<String>,
}

/// Trains on the targets of `train_idx` and predicts `test_idx`.
pub(crate) fn fit_and_predict(
    data: &MultiModalDataset,
    config: &TrainConfig,
    train_idx: &[usize],
    test_idx: &[usize],
    normalize: bool,
) -> Result<FoldOutcome> {
    let target_idx = data.target_indices(train_idx)?;
    if target_idx.is_empty() {
        return Err(Error::InvalidData(
            "training fold has no target samples".into(),
        ));
    }
    let mut train_ds = data.select(&target_idx)?;
    let mut test_ds = data.select(test_idx)?;
    if normalize {
        let z = Standardizer::fit(&train_ds);
        train_ds = z.apply(&train_ds)?;
        test_ds = z.apply(&test_ds)?;
    }
    let model = train(&train_ds, config)?;
    let prediction = predict(&model, &test_ds)?;
    Ok(FoldOutcome {
        truth: test_ds.require_labels()?.to_vec(),
        prediction,
        max_orthonormality_error: model.trace.max_orthonormality_error(),
        warning: model.trace.warning.clone(),
    })
}

/// Outcomes for every fold of `plan`, in fold order.
pub(crate) fn fold_outcomes(
    data: &MultiModalDataset,
    config: &TrainConfig,
    plan: &FoldPlan,
    normalize: bool,
    parallel: bool,
) -> Result<Vec<FoldOutcome>> {
    let run = |f: usize| {
        fit_and_predict(
            data,
            config,
            &plan.train_indices(f),
            &plan.test_indices(f),
            normalize,
        )
    };
    if parallel {
        (0..plan.k).into_par_iter().map(run).collect()
    } else {
        (0..plan.k).map(run).collect()
    }
}

/// What the inner grid search did inside one outer fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub cells_evaluated: usize,
    pub cells_failed: usize,
    pub best_inner_gm: f64,
    pub max_orthonormality_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub config: TrainConfig,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricSet,
    pub max_orthonormality_error: f64,
    pub warning: Option<String>,
    pub selection: Option<SelectionSummary>,
}

/// Per-fold and aggregate results of one cross-validation run.
///
/// `mean` averages the per-fold metrics; `pooled` sums the confusion
/// matrices over all folds. The two generally differ and both are kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub name: String,
    pub n_modalities: usize,
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<FoldResult>,
    pub mean: MetricSet,
    pub pooled: ConfusionMatrix,
    pub pooled_metrics: MetricSet,
}

impl EvalReport {
    pub(crate) fn assemble(
        name: String,
        n_modalities: usize,
        plan: &FoldPlan,
        folds: Vec<FoldResult>,
    ) -> Result<Self> {
        let mut pooled = ConfusionMatrix::default();
        for f in &folds {
            pooled.add(&f.confusion);
        }
        let per_fold: Vec<MetricSet> = folds.iter().map(|f| f.metrics).collect();
        Ok(EvalReport {
            name,
            n_modalities,
            k: plan.k,
            seed: plan.seed,
            mean: MetricSet::mean(&per_fold),
            pooled_metrics: compute_metrics(&pooled)?,
            pooled,
            folds,
        })
    }

    pub fn max_orthonormality_error(&self) -> f64 {
        self.folds
            .iter()
            .map(|f| {
                let inner = f
                    .selection
                    .as_ref()
                    .map_or(0.0, |s| s.max_orthonormality_error);
                f.max_orthonormality_error.max(inner)
            })
            .fold(0.0, f64::max)
    }
}

pub(crate) fn score_outcome(
    outcome: &FoldOutcome,
    strategy: DecisionStrategy,
) -> Result<(ConfusionMatrix, MetricSet)> {
    let predicted = outcome.prediction.fused_with(strategy)?;
    let cm = ConfusionMatrix::from_labels(&outcome.truth, &predicted)?;
    let m = compute_metrics(&cm)?;
    Ok((cm, m))
}

/// Stratified k-fold evaluation of one configuration.
///
/// Each fold trains on the target-class samples of the remaining folds and
/// scores predictions on all of its own samples, both classes included.
pub fn run_cv(
    data: &MultiModalDataset,
    config: &TrainConfig,
    opts: &CvOptions,
) -> Result<EvalReport> {
    let plan = stratified_folds(data.require_labels()?, opts.k, opts.seed)?;
    run_cv_with_plan(data, config, &plan, opts.normalize)
}

/// Cross-validation over an explicit fold assignment.
pub fn run_cv_with_plan(
    data: &MultiModalDataset,
    config: &TrainConfig,
    plan: &FoldPlan,
    normalize: bool,
) -> Result<EvalReport> {
    data.require_labels()?;
    if plan.assignment.len() != data.n_samples() {
        return Err(Error::DimensionMismatch {
            expected: data.n_samples(),
            found: plan.assignment.len(),
        });
    }
    config.validate(data.n_modalities())?;
    let outcomes = fold_outcomes(data, config, plan, normalize, true)?;
    let folds = outcomes
        .iter()
        .enumerate()
        .map(|(fold, o)| {
            let (confusion, metrics) = score_outcome(o, config.decision_strategy)?;
            Ok(FoldResult {
                fold,
                config: config.clone(),
                confusion,
                metrics,
                max_orthonormality_error: o.max_orthonormality_error,
                warning: o.warning.clone(),
                selection: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    EvalReport::assemble(
        super::report::model_name(config, data.n_modalities()),
        data.n_modalities(),
        plan,
        folds,
    )
}
