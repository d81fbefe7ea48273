use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::gradient::{lagrangian_gradient, PooledLayout};
use super::regularizer::Regularizer;
use super::{pca_init, project, update_projection, ProjectionMatrix, UpdateStrategy};
use crate::datamodel::{Label, MultiModalDataset};
use crate::error::{Error, Result};
use crate::kernel::{npt_embed_test, npt_fit, KernelParams, NptState, DEFAULT_EIG_REL_TOL};
use crate::svdd::{ocsvm_solve, svdd_solve, DataDescription, OcSvmModel, DEFAULT_KKT_TOL};

/// Which one-class model to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Learned per-modality projections into a shared subspace, then a
    /// hypersphere over the pooled projections.
    Subspace,
    /// Hypersphere on the full feature space.
    Svdd,
    /// One-class SVM hyperplane on the full feature space.
    OcSvm,
}

/// How per-modality labels combine into the final label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecisionStrategy {
    /// Target only if every modality says target.
    Ds1,
    /// Target if any modality says target.
    Ds2,
    /// First modality decides.
    Ds3,
    /// Second modality decides.
    Ds4,
}

impl DecisionStrategy {
    pub const ALL: [DecisionStrategy; 4] = [
        DecisionStrategy::Ds1,
        DecisionStrategy::Ds2,
        DecisionStrategy::Ds3,
        DecisionStrategy::Ds4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DecisionStrategy::Ds1 => "ds1",
            DecisionStrategy::Ds2 => "ds2",
            DecisionStrategy::Ds3 => "ds3",
            DecisionStrategy::Ds4 => "ds4",
        }
    }

    pub fn min_modalities(self) -> usize {
        match self {
            DecisionStrategy::Ds4 => 2,
            _ => 1,
        }
    }
}

/// Combines per-modality labels of one sample.
pub fn fuse(strategy: DecisionStrategy, labels: &[Label]) -> Result<Label> {
    if labels.len() < strategy.min_modalities() || labels.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "{} needs at least {} modalities, got {}",
            strategy.name(),
            strategy.min_modalities().max(1),
            labels.len()
        )));
    }
    Ok(match strategy {
        DecisionStrategy::Ds1 => Label::from_bool(labels.iter().all(|l| l.is_target())),
        DecisionStrategy::Ds2 => Label::from_bool(labels.iter().any(|l| l.is_target())),
        DecisionStrategy::Ds3 => labels[0],
        DecisionStrategy::Ds4 => labels[1],
    })
}

/// Unspecified fields take their defaults when deserialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub method: Method,
    /// Shared subspace dimensionality.
    pub d: usize,
    pub eta: f64,
    pub beta: f64,
    pub c_penalty: f64,
    /// Only used by the one-class SVM.
    pub nu: f64,
    pub max_iter: usize,
    pub update_strategy: UpdateStrategy,
    pub regularizer: Regularizer,
    /// Embed each modality with the kernel before anything else.
    pub kernelized: bool,
    pub kernel: KernelParams,
    pub decision_strategy: DecisionStrategy,
    /// Stack all modalities into one before training (early fusion).
    pub concat_modalities: bool,
    pub eig_rel_tol: f64,
    pub kkt_tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let d = 2;
        TrainConfig {
            method: Method::Subspace,
            d,
            eta: 0.01,
            beta: 0.01,
            c_penalty: 0.1,
            nu: 0.1,
            max_iter: 20,
            update_strategy: UpdateStrategy::SdMinus,
            regularizer: Regularizer::Omega0,
            kernelized: false,
            kernel: KernelParams {
                kappa: 1.0 / d as f64,
                ..KernelParams::default()
            },
            decision_strategy: DecisionStrategy::Ds1,
            concat_modalities: false,
            eig_rel_tol: DEFAULT_EIG_REL_TOL,
            kkt_tol: DEFAULT_KKT_TOL,
        }
    }
}

impl TrainConfig {
    /// Sets `kappa = 1 / d` for the sigmoid term.
    pub fn with_inverse_d_kappa(mut self) -> Self {
        self.kernel.kappa = 1.0 / self.d as f64;
        self
    }

    /// Modality count seen by the model after optional concatenation.
    pub fn effective_modalities(&self, data_modalities: usize) -> usize {
        if self.concat_modalities || self.method != Method::Subspace {
            1
        } else {
            data_modalities
        }
    }

    pub fn validate(&self, data_modalities: usize) -> Result<()> {
        let v = self.effective_modalities(data_modalities);
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.c_penalty > 0.0) || !self.c_penalty.is_finite() {
            return bad(format!("C = {} must be positive", self.c_penalty));
        }
        if !(self.kkt_tol > 0.0) {
            return bad(format!("kkt_tol = {} must be positive", self.kkt_tol));
        }
        if !(self.eig_rel_tol >= 0.0) {
            return bad(format!("eig_rel_tol = {} must be >= 0", self.eig_rel_tol));
        }
        if self.kernelized {
            self.kernel.validate()?;
        }
        if self.decision_strategy.min_modalities() > v {
            return bad(format!(
                "decision strategy {} needs {} modalities, model sees {v}",
                self.decision_strategy.name(),
                self.decision_strategy.min_modalities()
            ));
        }
        match self.method {
            Method::OcSvm => {
                if !(self.nu > 0.0 && self.nu <= 1.0) {
                    return bad(format!("nu = {} must lie in (0, 1]", self.nu));
                }
            }
            Method::Svdd => {}
            Method::Subspace => {
                if self.d == 0 {
                    return bad("d must be at least 1".into());
                }
                if !(self.eta >= 0.0) || !self.eta.is_finite() {
                    return bad(format!("eta = {} must be >= 0", self.eta));
                }
                if !(self.beta >= 0.0) || !self.beta.is_finite() {
                    return bad(format!("beta = {} must be >= 0", self.beta));
                }
                if self.max_iter == 0 {
                    return bad("max_iter must be at least 1".into());
                }
                if self.update_strategy.is_asymmetric() && v != 2 {
                    return bad(format!(
                        "asymmetric update {} needs exactly 2 modalities, model sees {v}",
                        self.update_strategy.symbol()
                    ));
                }
                // the zero terms are identical, either is accepted anywhere
                if self.regularizer.is_zero() {
                    return Ok(());
                }
                if v >= 2 && !self.regularizer.is_multi_modal() {
                    return bad(format!(
                        "regularizer {} is uni-modal but the model sees {v} modalities",
                        self.regularizer.symbol()
                    ));
                }
                if v == 1 && !self.regularizer.is_uni_modal() {
                    return bad(format!(
                        "regularizer {} is multi-modal but the model sees one modality",
                        self.regularizer.symbol()
                    ));
                }
            }
        }
        Ok(())
    }
}

/// The fitted decision boundary.
#[derive(Debug, Clone, PartialEq)]
pub enum Boundary {
    Hypersphere(DataDescription),
    Hyperplane(OcSvmModel),
}

impl Boundary {
    /// Score compared against [`Boundary::threshold`]; lower is more
    /// target-like. Squared distance for a hypersphere, negated decision
    /// value for a hyperplane.
    pub fn score(&self, y: nalgebra::DVectorView<f64>) -> Result<f64> {
        match self {
            Boundary::Hypersphere(d) => d.distance_sq(y),
            Boundary::Hyperplane(m) => Ok(-m.decision(y)?),
        }
    }

    pub fn threshold(&self) -> f64 {
        match self {
            Boundary::Hypersphere(d) => d.radius_sq,
            Boundary::Hyperplane(_) => 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Boundary::Hypersphere(d) => d.dim(),
            Boundary::Hyperplane(m) => m.dim(),
        }
    }
}

/// Per-run diagnostics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainTrace {
    pub iterations: usize,
    /// `max_v max|Q_v Q_v^T - I|` after each completed iteration.
    pub orthonormality_errors: Vec<f64>,
    /// Set when the loop stopped early on a degenerate step.
    pub warning: Option<String>,
}

impl TrainTrace {
    pub fn max_orthonormality_error(&self) -> f64 {
        self.orthonormality_errors
            .iter()
            .copied()
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceModel {
    pub config: TrainConfig,
    /// Per-modality feature dimensions of the data the model was trained on,
    /// before any concatenation.
    pub input_dims: Vec<usize>,
    pub npt_states: Option<Vec<NptState>>,
    pub projections: Vec<ProjectionMatrix>,
    pub boundary: Boundary,
    /// Number of training samples per modality.
    pub n_train: usize,
    pub trace: TrainTrace,
}

impl SubspaceModel {
    pub fn n_modalities(&self) -> usize {
        self.projections.len()
    }

    pub fn layout(&self) -> PooledLayout {
        PooledLayout::new(self.n_train, self.n_modalities())
    }
}

/// Per-sample outputs of [`predict`].
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Labels under the model's configured decision strategy.
    pub fused: Vec<Label>,
    /// `per_modality[v][i]`.
    pub per_modality: Vec<Vec<Label>>,
    /// `scores[v][i]`, squared distances for a hypersphere.
    pub scores: Vec<Vec<f64>>,
    pub threshold: f64,
}

impl Prediction {
    pub fn len(&self) -> usize {
        self.fused.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fused.is_empty()
    }

    /// Fused labels under another strategy.
    pub fn fused_with(&self, strategy: DecisionStrategy) -> Result<Vec<Label>> {
        let n = self.per_modality.first().map_or(0, Vec::len);
        (0..n)
            .map(|i| {
                let labels: Vec<Label> = self.per_modality.iter().map(|m| m[i]).collect();
                fuse(strategy, &labels)
            })
            .collect()
    }
}

fn prepare(data: &MultiModalDataset, config: &TrainConfig) -> Result<MultiModalDataset> {
    if config.effective_modalities(data.n_modalities()) == 1 && data.n_modalities() > 1 {
        data.concatenated()
    } else {
        Ok(data.clone())
    }
}

fn pool(projections: &[ProjectionMatrix], inputs: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
    let d = projections[0].out_dim();
    let n = inputs[0].ncols();
    let mut pooled = DMatrix::zeros(d, n * inputs.len());
    for (v, (q, f)) in projections.iter().zip(inputs).enumerate() {
        pooled.columns_mut(v * n, n).copy_from(&project(q, f)?);
    }
    Ok(pooled)
}

fn orth_error(projections: &[ProjectionMatrix]) -> f64 {
    projections
        .iter()
        .map(ProjectionMatrix::orthonormality_error)
        .fold(0.0, f64::max)
}

/// Fits a model on the target-class samples of `data`. Without labels every
/// sample is taken as a target.
///
/// For the subspace method this alternates between solving the hypersphere
/// on the pooled projections and a gradient step on every projection,
/// starting from PCA. Kernelized models first replace each modality by its
/// kernel embedding.
pub fn train(data: &MultiModalDataset, config: &TrainConfig) -> Result<SubspaceModel> {
    config.validate(data.n_modalities())?;
    let input_dims = data.dims();
    let targets = match data.labels() {
        Some(_) => {
            let idx = data.target_indices(&(0..data.n_samples()).collect::<Vec<_>>())?;
            if idx.is_empty() {
                return Err(Error::InvalidData(
                    "no target-class samples to train on".into(),
                ));
            }
            data.select(&idx)?
        }
        None => data.clone(),
    };
    let prepared = prepare(&targets, config)?;

    let (inputs, npt_states) = if config.kernelized {
        let states = prepared
            .modalities()
            .iter()
            .map(|m| npt_fit(m, &config.kernel, config.eig_rel_tol))
            .collect::<Result<Vec<_>>>()?;
        let inputs = states.iter().map(|s| s.embedded.clone()).collect();
        (inputs, Some(states))
    } else {
        let inputs = prepared
            .modalities()
            .iter()
            .map(|m| m.values().clone())
            .collect::<Vec<_>>();
        (inputs, None)
    };
    let n_train = prepared.n_samples();

    let (projections, boundary, trace) = match config.method {
        Method::Svdd | Method::OcSvm => {
            let q = ProjectionMatrix::identity(inputs[0].nrows());
            let y = inputs[0].clone();
            let boundary = if config.method == Method::Svdd {
                Boundary::Hypersphere(svdd_solve(&y, config.c_penalty, config.kkt_tol)?)
            } else {
                Boundary::Hyperplane(ocsvm_solve(&y, config.nu, config.kkt_tol)?)
            };
            (vec![q], boundary, TrainTrace::default())
        }
        Method::Subspace => {
            let (projections, trace) = fit_projections(&inputs, config)?;
            let pooled = pool(&projections, &inputs)?;
            let desc = svdd_solve(&pooled, config.c_penalty, config.kkt_tol)?;
            (projections, Boundary::Hypersphere(desc), trace)
        }
    };

    Ok(SubspaceModel {
        config: config.clone(),
        input_dims,
        npt_states,
        projections,
        boundary,
        n_train,
        trace,
    })
}

fn fit_projections(
    inputs: &[DMatrix<f64>],
    config: &TrainConfig,
) -> Result<(Vec<ProjectionMatrix>, TrainTrace)> {
    let mut projections = inputs
        .iter()
        .map(|f| pca_init(f, config.d))
        .collect::<Result<Vec<_>>>()?;
    let mut trace = TrainTrace::default();

    for t in 0..config.max_iter {
        let pooled = pool(&projections, inputs)?;
        let desc = match svdd_solve(&pooled, config.c_penalty, config.kkt_tol) {
            Ok(d) => d,
            // nothing to fall back to before the first solve
            Err(e) if t == 0 => return Err(e),
            Err(e) => {
                trace.warning = Some(format!(
                    "iteration {}: hypersphere solve failed: {e}",
                    t + 1
                ));
                break;
            }
        };
        let mut next = projections.clone();
        let mut failure = None;
        for v in 0..inputs.len() {
            let grad = lagrangian_gradient(
                v,
                &next,
                inputs,
                &desc.alphas,
                config.beta,
                config.regularizer,
                config.c_penalty,
            )?;
            if grad.iter().any(|g| !g.is_finite()) {
                failure = Some(format!(
                    "iteration {}: non-finite gradient for modality {}",
                    t + 1,
                    v + 1
                ));
                break;
            }
            match update_projection(
                &next[v],
                &grad,
                config.eta,
                config.update_strategy.direction(v),
            ) {
                Ok(q) => next[v] = q,
                Err(e) => {
                    failure = Some(format!(
                        "iteration {}: modality {} update failed: {e}",
                        t + 1,
                        v + 1
                    ));
                    break;
                }
            }
        }
        if let Some(msg) = failure {
            warn!("{msg}; keeping the last valid projections");
            trace.warning = Some(msg);
            break;
        }
        projections = next;
        trace.iterations = t + 1;
        trace.orthonormality_errors.push(orth_error(&projections));
    }
    Ok((projections, trace))
}

/// Classifies every sample of `data` per modality and fuses the labels.
pub fn predict(model: &SubspaceModel, data: &MultiModalDataset) -> Result<Prediction> {
    if data.n_modalities() != model.input_dims.len() {
        return Err(Error::InvalidData(format!(
            "model expects {} modalities, data has {}",
            model.input_dims.len(),
            data.n_modalities()
        )));
    }
    for (v, (&want, have)) in model.input_dims.iter().zip(data.dims()).enumerate() {
        if want != have {
            return Err(Error::InvalidData(format!(
                "modality {} has {have} features, model expects {want}",
                v + 1
            )));
        }
    }
    let prepared = prepare(data, &model.config)?;
    let n = prepared.n_samples();
    let mut per_modality = Vec::with_capacity(model.n_modalities());
    let mut scores = Vec::with_capacity(model.n_modalities());
    let threshold = model.boundary.threshold();
    for (v, q) in model.projections.iter().enumerate() {
        let raw = prepared.modality(v).values();
        let input = match &model.npt_states {
            Some(states) => npt_embed_test(&states[v], raw)?,
            None => raw.clone(),
        };
        let y = project(q, &input)?;
        let s = (0..n)
            .map(|i| model.boundary.score(y.column(i)))
            .collect::<Result<Vec<_>>>()?;
        per_modality.push(
            s.iter()
                .map(|&x| Label::from_bool(x <= threshold))
                .collect(),
        );
        scores.push(s);
    }
    let mut pred = Prediction {
        fused: Vec::new(),
        per_modality,
        scores,
        threshold,
    };
    pred.fused = pred.fused_with(model.config.decision_strategy)?;
    Ok(pred)
}

/// Pooled training projections `[Q_1 F_1 | ... | Q_V F_V]` for a model's own
/// training inputs. Useful for checking the description against its data.
pub fn pooled_training_points(model: &SubspaceModel) -> Option<DMatrix<f64>> {
    match &model.boundary {
        Boundary::Hypersphere(d) => Some(d.train_points.clone()),
        Boundary::Hyperplane(m) => Some(m.train_points.clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::synth_multimodal;

    #[test]
    fn fusion_truth_table() {
        use Label::{NonTarget as N, Target as T};
        let cases = [
            ([T, T], [T, T, T, T]),
            ([T, N], [N, T, T, N]),
            ([N, T], [N, T, N, T]),
            ([N, N], [N, N, N, N]),
        ];
        for (labels, expected) in cases {
            for (s, e) in DecisionStrategy::ALL.iter().zip(expected) {
                assert_eq!(fuse(*s, &labels).unwrap(), e, "{s:?} on {labels:?}");
            }
        }
    }

    #[test]
    fn single_modality_fusion_coincides() {
        for l in [Label::Target, Label::NonTarget] {
            for s in [
                DecisionStrategy::Ds1,
                DecisionStrategy::Ds2,
                DecisionStrategy::Ds3,
            ] {
                assert_eq!(fuse(s, &[l]).unwrap(), l);
            }
            assert!(fuse(DecisionStrategy::Ds4, &[l]).is_err());
        }
    }

    #[test]
    fn asymmetric_needs_two_modalities() {
        let cfg = TrainConfig {
            update_strategy: UpdateStrategy::AdMinusPlus,
            regularizer: Regularizer::Omega1,
            ..TrainConfig::default()
        };
        assert!(cfg.validate(2).is_ok());
        assert!(cfg.validate(3).is_err());
    }

    #[test]
    fn regularizer_family_matches_modalities() {
        let multi = TrainConfig {
            regularizer: Regularizer::Omega4,
            ..TrainConfig::default()
        };
        assert!(multi.validate(2).is_ok());
        assert!(multi.validate(1).is_err());
        for zero in [Regularizer::Omega0, Regularizer::Psi0] {
            let cfg = TrainConfig {
                regularizer: zero,
                ..TrainConfig::default()
            };
            assert!(cfg.validate(1).is_ok() && cfg.validate(2).is_ok());
        }
        let uni = TrainConfig {
            regularizer: Regularizer::Psi2,
            ..TrainConfig::default()
        };
        assert!(uni.validate(1).is_ok());
        assert!(uni.validate(2).is_err());
    }

    #[test]
    fn no_learning_matches_pca_svdd() {
        let ds = synth_multimodal(30, 10, &[4, 3], 4.0, 2).unwrap();
        let cfg = TrainConfig {
            eta: 0.0,
            max_iter: 1,
            c_penalty: 0.2,
            ..TrainConfig::default()
        };
        let model = train(&ds, &cfg).unwrap();
        let targets = ds.select(&(0..30).collect::<Vec<_>>()).unwrap();
        let inputs: Vec<DMatrix<f64>> = targets
            .modalities()
            .iter()
            .map(|m| m.values().clone())
            .collect();
        let qs: Vec<ProjectionMatrix> = inputs.iter().map(|f| pca_init(f, 2).unwrap()).collect();
        assert_eq!(model.projections, qs);
        let pooled = pool(&qs, &inputs).unwrap();
        let desc = svdd_solve(&pooled, 0.2, DEFAULT_KKT_TOL).unwrap();
        assert_eq!(model.boundary, Boundary::Hypersphere(desc));
    }

    #[test]
    fn pooled_input_shape() {
        let ds = synth_multimodal(12, 4, &[5, 3], 2.0, 9).unwrap();
        let model = train(&ds, &TrainConfig::default()).unwrap();
        let pts = pooled_training_points(&model).unwrap();
        assert_eq!(pts.shape(), (2, 24));
        assert_eq!(model.layout().range(1), 12..24);
    }

    #[test]
    fn predict_checks_modalities() {
        let ds = synth_multimodal(12, 4, &[3, 3], 2.0, 9).unwrap();
        let model = train(&ds, &TrainConfig::default()).unwrap();
        let other = synth_multimodal(4, 4, &[3], 2.0, 9).unwrap();
        assert!(predict(&model, &other).is_err());
        let wrong_dim = synth_multimodal(4, 4, &[3, 4], 2.0, 9).unwrap();
        assert!(predict(&model, &wrong_dim).is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let ds = synth_multimodal(20, 5, &[4, 4], 3.0, 1).unwrap();
        let cfg = TrainConfig {
            kernelized: true,
            regularizer: Regularizer::Omega4,
            beta: 0.1,
            update_strategy: UpdateStrategy::AdMinusPlus,
            ..TrainConfig::default()
        };
        let a = train(&ds, &cfg).unwrap();
        let b = train(&ds, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
