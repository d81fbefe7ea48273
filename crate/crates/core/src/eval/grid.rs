use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cv::{
    fold_outcomes, score_outcome, CvOptions, EvalReport, FoldResult, SelectionSummary,
};
use crate::datamodel::{stratified_folds, MultiModalDataset};
use crate::error::{Error, Result};
use crate::kernel::KernelKind;
use crate::subspace::{DecisionStrategy, Method, Regularizer, TrainConfig, UpdateStrategy};

/// Hyperparameter axes. Axes that do not affect a configuration (for
/// example `beta` with a zero regularizer, or `sigma` for a linear model)
/// collapse to their first value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub sigma: Vec<f64>,
    pub eta: Vec<f64>,
    pub beta: Vec<f64>,
    pub c: Vec<f64>,
    /// One-class SVM only.
    pub nu: Vec<f64>,
    pub d: Vec<usize>,
    pub update: Vec<UpdateStrategy>,
    pub regularizer: Vec<Regularizer>,
    pub decision: Vec<DecisionStrategy>,
    /// Tie the sigmoid slope to each cell's subspace dimension, `kappa = 1/d`.
    pub kappa_inverse_d: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            sigma: vec![1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3],
            eta: vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0],
            beta: vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3, 1e4],
            c: vec![0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
            nu: vec![0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
            d: vec![1, 2, 3, 4, 5],
            update: UpdateStrategy::ALL.to_vec(),
            regularizer: Regularizer::MULTI_MODAL.to_vec(),
            decision: DecisionStrategy::ALL.to_vec(),
            kappa_inverse_d: true,
        }
    }
}

impl GridSpec {
    /// Default axes for single-modality subspace models.
    pub fn uni_modal() -> Self {
        GridSpec {
            update: vec![UpdateStrategy::SdMinus, UpdateStrategy::SdPlus],
            regularizer: Regularizer::UNI_MODAL.to_vec(),
            decision: vec![DecisionStrategy::Ds1],
            ..Default::default()
        }
    }

    /// The one cell matching `config`.
    pub fn single(config: &TrainConfig) -> Self {
        GridSpec {
            sigma: vec![config.kernel.sigma],
            eta: vec![config.eta],
            beta: vec![config.beta],
            c: vec![config.c_penalty],
            nu: vec![config.nu],
            d: vec![config.d],
            update: vec![config.update_strategy],
            regularizer: vec![config.regularizer],
            decision: vec![config.decision_strategy],
            kappa_inverse_d: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let empty = [
            ("sigma", self.sigma.is_empty()),
            ("eta", self.eta.is_empty()),
            ("beta", self.beta.is_empty()),
            ("c", self.c.is_empty()),
            ("nu", self.nu.is_empty()),
            ("d", self.d.is_empty()),
            ("update", self.update.is_empty()),
            ("regularizer", self.regularizer.is_empty()),
            ("decision", self.decision.is_empty()),
        ];
        match empty.iter().find(|(_, e)| *e) {
            Some((name, _)) => Err(Error::InvalidParameter(format!(
                "grid axis {name} is empty"
            ))),
            None => Ok(()),
        }
    }

    /// Training configurations in grid order, decision strategy unset.
    pub fn training_cells(&self, base: &TrainConfig) -> Vec<TrainConfig> {
        fn axis<T: Copy>(values: &[T], relevant: bool) -> Vec<T> {
            if relevant {
                values.to_vec()
            } else {
                values[..1].to_vec()
            }
        }
        let subspace = base.method == Method::Subspace;
        let nonlinear = base.kernelized && base.kernel.kind != KernelKind::Linear;
        let mut cells = Vec::new();
        for &update in &axis(&self.update, subspace) {
            for &regularizer in &axis(&self.regularizer, subspace) {
                for &d in &axis(&self.d, subspace) {
                    for &c in &axis(&self.c, base.method != Method::OcSvm) {
                        for &nu in &axis(&self.nu, base.method == Method::OcSvm) {
                            for &eta in &axis(&self.eta, subspace) {
                                for &beta in &axis(&self.beta, subspace && !regularizer.is_zero()) {
                                    for &sigma in &axis(&self.sigma, nonlinear) {
                                        let mut cfg = base.clone();
                                        if subspace {
                                            cfg.update_strategy = update;
                                            cfg.regularizer = regularizer;
                                            cfg.d = d;
                                            cfg.eta = eta;
                                            cfg.beta = beta;
                                        }
                                        cfg.c_penalty = c;
                                        cfg.nu = nu;
                                        if nonlinear {
                                            cfg.kernel.sigma = sigma;
                                        }
                                        if self.kappa_inverse_d {
                                            cfg.kernel.kappa = 1.0 / cfg.d as f64;
                                        }
                                        cells.push(cfg);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        cells
    }

    /// Decision strategies worth scoring for a model seeing `v` modalities.
    fn decisions_for(&self, v: usize) -> Vec<DecisionStrategy> {
        let valid: Vec<DecisionStrategy> = self
            .decision
            .iter()
            .copied()
            .filter(|s| s.min_modalities() <= v)
            .collect();
        if v == 1 {
            // every strategy reduces to the single modality's label
            valid.into_iter().take(1).collect()
        } else {
            valid
        }
    }
}

/// One scored row of the grid table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellScore {
    pub index: usize,
    pub config: TrainConfig,
    /// Mean geometric mean over the inner folds; `None` when the cell failed.
    pub mean_gm: Option<f64>,
    pub error: Option<String>,
    pub max_orthonormality_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best: TrainConfig,
    pub best_score: f64,
    pub table: Vec<CellScore>,
}

impl GridSearchResult {
    pub fn max_orthonormality_error(&self) -> f64 {
        self.table
            .iter()
            .map(|c| c.max_orthonormality_error)
            .fold(0.0, f64::max)
    }

    pub fn failed(&self) -> usize {
        self.table.iter().filter(|c| c.mean_gm.is_none()).count()
    }
}

/// Higher score first, then smaller `d`, `C`, `eta`, then grid order.
fn rank(a: &CellScore, b: &CellScore) -> Ordering {
    let sa = a.mean_gm.unwrap_or(f64::NEG_INFINITY);
    let sb = b.mean_gm.unwrap_or(f64::NEG_INFINITY);
    sb.total_cmp(&sa)
        .then(a.config.d.cmp(&b.config.d))
        .then(a.config.c_penalty.total_cmp(&b.config.c_penalty))
        .then(a.config.eta.total_cmp(&b.config.eta))
        .then(a.index.cmp(&b.index))
}

fn score_cell(
    data: &MultiModalDataset,
    cell: &TrainConfig,
    decisions: &[DecisionStrategy],
    plan: &crate::datamodel::FoldPlan,
    normalize: bool,
) -> Vec<(TrainConfig, Result<f64>, f64)> {
    let with_ds = |ds: DecisionStrategy| {
        let mut c = cell.clone();
        c.decision_strategy = ds;
        c
    };
    let fail = |e: &Error| {
        decisions
            .iter()
            .map(|&ds| {
                (
                    with_ds(ds),
                    Err(Error::InvalidParameter(e.to_string())),
                    0.0,
                )
            })
            .collect::<Vec<_>>()
    };
    let mut probe = cell.clone();
    probe.decision_strategy = decisions[0];
    if let Err(e) = probe.validate(data.n_modalities()) {
        return fail(&e);
    }
    let outcomes = match fold_outcomes(data, cell, plan, normalize, false) {
        Ok(o) => o,
        Err(e) => return fail(&e),
    };
    let orth = outcomes
        .iter()
        .map(|o| o.max_orthonormality_error)
        .fold(0.0, f64::max);
    decisions
        .iter()
        .map(|&ds| {
            let score = outcomes
                .iter()
                .map(|o| score_outcome(o, ds).map(|(_, m)| m.gm))
                .collect::<Result<Vec<_>>>()
                .map(|gms| gms.iter().sum::<f64>() / gms.len() as f64);
            (with_ds(ds), score, orth)
        })
        .collect()
}

/// Exhaustive search maximizing the mean inner-fold geometric mean.
pub fn grid_search(
    data: &MultiModalDataset,
    base: &TrainConfig,
    grid: &GridSpec,
    inner: &CvOptions,
) -> Result<GridSearchResult> {
    grid.validate()?;
    let labels = data.require_labels()?;
    let plan = stratified_folds(labels, inner.k, inner.seed)?;
    let decisions = grid.decisions_for(base.effective_modalities(data.n_modalities()));
    if decisions.is_empty() {
        return Err(Error::InvalidParameter(
            "no decision strategy in the grid is valid for this modality count".into(),
        ));
    }
    let cells = grid.training_cells(base);
    let scored: Vec<Vec<(TrainConfig, Result<f64>, f64)>> = cells
        .par_iter()
        .map(|cell| score_cell(data, cell, &decisions, &plan, inner.normalize))
        .collect();

    let table: Vec<CellScore> = scored
        .into_iter()
        .flatten()
        .enumerate()
        .map(|(index, (config, score, orth))| {
            let (mean_gm, error) = match score {
                Ok(s) => (Some(s), None),
                Err(e) => (None, Some(e.to_string())),
            };
            CellScore {
                index,
                config,
                mean_gm,
                error,
                max_orthonormality_error: orth,
            }
        })
        .collect();

    let best = table
        .iter()
        .filter(|c| c.mean_gm.is_some())
        .min_by(|a, b| rank(a, b))
        .ok_or_else(|| Error::AllCellsFailed {
            cells: table.len(),
            first: table
                .iter()
                .find_map(|c| c.error.clone())
                .unwrap_or_else(|| "empty grid".into()),
        })?;
    Ok(GridSearchResult {
        best: best.config.clone(),
        best_score: best.mean_gm.unwrap_or(0.0),
        table,
    })
}

/// Where hyperparameters are selected relative to the outer folds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMode {
    /// A separate inner search on each outer training portion.
    #[default]
    Nested,
    /// One search over the whole dataset, then plain cross-validation.
    Global,
}

fn inner_seed(seed: u64, fold: usize) -> u64 {
    seed ^ (fold as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Outer cross-validation with grid-searched hyperparameters.
pub fn nested_cv(
    data: &MultiModalDataset,
    base: &TrainConfig,
    grid: &GridSpec,
    outer: &CvOptions,
    inner_k: usize,
    mode: SelectionMode,
) -> Result<EvalReport> {
    let labels = data.require_labels()?;
    let plan = stratified_folds(labels, outer.k, outer.seed)?;
    let name = super::report::model_name(base, data.n_modalities());

    let global = match mode {
        SelectionMode::Global => {
            let inner = CvOptions {
                k: inner_k,
                seed: inner_seed(outer.seed, 0),
                normalize: outer.normalize,
            };
            Some(grid_search(data, base, grid, &inner)?)
        }
        SelectionMode::Nested => None,
    };

    let folds = (0..plan.k)
        .into_par_iter()
        .map(|fold| {
            let train_idx = plan.train_indices(fold);
            let test_idx = plan.test_indices(fold);
            let search = match &global {
                Some(g) => g.clone(),
                None => {
                    let outer_train = data.select(&train_idx)?;
                    let inner = CvOptions {
                        k: inner_k,
                        seed: inner_seed(outer.seed, fold),
                        normalize: outer.normalize,
                    };
                    grid_search(&outer_train, base, grid, &inner)?
                }
            };
            let outcome = super::cv::fit_and_predict(
                data,
                &search.best,
                &train_idx,
                &test_idx,
                outer.normalize,
            )?;
            let (confusion, metrics) = score_outcome(&outcome, search.best.decision_strategy)?;
            Ok(FoldResult {
                fold,
                config: search.best.clone(),
                confusion,
                metrics,
                max_orthonormality_error: outcome.max_orthonormality_error,
                warning: outcome.warning,
                selection: Some(SelectionSummary {
                    cells_evaluated: search.table.len(),
                    cells_failed: search.failed(),
                    best_inner_gm: search.best_score,
                    max_orthonormality_error: search.max_orthonormality_error(),
                }),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    EvalReport::assemble(name, data.n_modalities(), &plan, folds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(index: usize, gm: Option<f64>, d: usize, c: f64, eta: f64) -> CellScore {
        CellScore {
            index,
            config: TrainConfig {
                d,
                c_penalty: c,
                eta,
                ..Default::default()
            },
            mean_gm: gm,
            error: None,
            max_orthonormality_error: 0.0,
        }
    }

    fn winner(cells: &[CellScore]) -> usize {
        cells.iter().min_by(|a, b| rank(a, b)).unwrap().index
    }

    #[test]
    fn tie_breaking_order() {
        assert_eq!(
            winner(&[
                cell(0, Some(0.5), 1, 0.1, 0.1),
                cell(1, Some(0.6), 5, 0.6, 1.0)
            ]),
            1
        );
        assert_eq!(
            winner(&[
                cell(0, Some(0.5), 3, 0.1, 0.1),
                cell(1, Some(0.5), 2, 0.6, 1.0)
            ]),
            1
        );
        assert_eq!(
            winner(&[
                cell(0, Some(0.5), 2, 0.2, 0.1),
                cell(1, Some(0.5), 2, 0.1, 1.0)
            ]),
            1
        );
        assert_eq!(
            winner(&[
                cell(0, Some(0.5), 2, 0.1, 0.1),
                cell(1, Some(0.5), 2, 0.1, 0.01)
            ]),
            1
        );
        assert_eq!(
            winner(&[
                cell(0, Some(0.5), 2, 0.1, 0.1),
                cell(1, Some(0.5), 2, 0.1, 0.1)
            ]),
            0
        );
        assert_eq!(
            winner(&[cell(0, None, 1, 0.1, 0.1), cell(1, Some(0.0), 2, 0.1, 0.1)]),
            1
        );
    }

    #[test]
    fn default_axes() {
        let g = GridSpec::default();
        assert_eq!(g.sigma, vec![1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3]);
        assert_eq!(g.eta, vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0]);
        assert_eq!(g.beta.len(), 9);
        assert_eq!(g.beta[0], 1e-4);
        assert_eq!(g.beta[8], 1e4);
        assert_eq!(g.c, vec![0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        assert_eq!(g.d, vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn irrelevant_axes_collapse() {
        let g = GridSpec::default();
        let svdd = TrainConfig {
            method: Method::Svdd,
            ..Default::default()
        };
        // linear SVDD: only C varies
        assert_eq!(g.training_cells(&svdd).len(), g.c.len());
        let sub = TrainConfig {
            regularizer: Regularizer::Omega0,
            ..Default::default()
        };
        let one_reg = GridSpec {
            regularizer: vec![Regularizer::Omega0],
            ..GridSpec::default()
        };
        // omega0 ignores beta, linear ignores sigma
        assert_eq!(
            one_reg.training_cells(&sub).len(),
            g.update.len() * g.d.len() * g.c.len() * g.eta.len()
        );
        let cells = g.training_cells(&TrainConfig {
            kernelized: true,
            ..Default::default()
        });
        assert!(cells.iter().all(|c| c.kernel.kappa == 1.0 / c.d as f64));
    }
}
