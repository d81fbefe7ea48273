//! Kernel evaluation, kernel centering and the non-linear projection trick.
//!
//! The projection trick turns a kernel into an explicit finite embedding: the
//! centered training kernel `K^ = U A U^T` is factored, and each training
//! sample is represented by a column of `A^{1/2} U^T`. Inner products between
//! these columns reproduce `K^` on the retained spectrum, so a linear method
//! run on the embedding is the corresponding kernel method.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::datamodel::FeatureMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_EIG_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Gaussian,
    Composite,
}

/// `k(x, y) = gamma * exp(-|x - y|^2 / (2 sigma^2)) + (1 - gamma) * tanh(kappa x.y + theta)`
/// for the composite kernel. The Gaussian kind uses only the first term at
/// full weight, the linear kind is the plain inner product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelParams {
    pub kind: KernelKind,
    pub gamma: f64,
    pub sigma: f64,
    pub kappa: f64,
    pub theta: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        KernelParams {
            kind: KernelKind::Composite,
            gamma: 0.5,
            sigma: 1.0,
            kappa: 1.0,
            theta: 0.0,
        }
    }
}

impl KernelParams {
    pub fn linear() -> Self {
        KernelParams {
            kind: KernelKind::Linear,
            ..Default::default()
        }
    }

    pub fn gaussian(sigma: f64) -> Self {
        KernelParams {
            kind: KernelKind::Gaussian,
            gamma: 1.0,
            sigma,
            ..Default::default()
        }
    }

    pub fn composite(gamma: f64, sigma: f64, kappa: f64, theta: f64) -> Self {
        KernelParams {
            kind: KernelKind::Composite,
            gamma,
            sigma,
            kappa,
            theta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == KernelKind::Linear {
            return Ok(());
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidParameter(format!(
                "kernel gamma {} outside [0, 1]",
                self.gamma
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "kernel sigma {} must be positive",
                self.sigma
            )));
        }
        if !self.kappa.is_finite() || !self.theta.is_finite() {
            return Err(Error::InvalidParameter(
                "kernel kappa/theta must be finite".into(),
            ));
        }
        Ok(())
    }

    fn eval(&self, x: nalgebra::DVectorView<f64>, y: nalgebra::DVectorView<f64>) -> f64 {
        match self.kind {
            KernelKind::Linear => x.dot(&y),
            KernelKind::Gaussian => self.gaussian_term(x, y),
            KernelKind::Composite => {
                self.gamma * self.gaussian_term(x, y)
                    + (1.0 - self.gamma) * (self.kappa * x.dot(&y) + self.theta).tanh()
            }
        }
    }

    fn gaussian_term(&self, x: nalgebra::DVectorView<f64>, y: nalgebra::DVectorView<f64>) -> f64 {
        let sq: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        (-sq / (2.0 * self.sigma * self.sigma)).exp()
    }
}

/// `N x N` kernel matrix over the columns of `f`, exactly symmetric.
pub fn kernel_matrix(f: &DMatrix<f64>, params: &KernelParams) -> DMatrix<f64> {
    let n = f.ncols();
    let mut k = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let v = params.eval(f.column(i), f.column(j));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// `N x M` kernel between training columns and test columns.
pub fn cross_kernel(
    train: &DMatrix<f64>,
    test: &DMatrix<f64>,
    params: &KernelParams,
) -> DMatrix<f64> {
    DMatrix::from_fn(train.ncols(), test.ncols(), |i, j| {
        params.eval(train.column(i), test.column(j))
    })
}

/// Double centering `(I - 11^T/N) K (I - 11^T/N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredKernel {
    pub centered: DMatrix<f64>,
    /// Column means of the raw kernel.
    pub row_means: DVector<f64>,
    pub grand_mean: f64,
}

pub fn center_kernel(k: &DMatrix<f64>) -> CenteredKernel {
    let n = k.nrows();
    let row_means = DVector::from_fn(n, |j, _| k.column(j).mean());
    let grand_mean = row_means.mean();
    let centered = DMatrix::from_fn(n, n, |i, j| {
        k[(i, j)] - row_means[i] - row_means[j] + grand_mean
    });
    CenteredKernel {
        centered,
        row_means,
        grand_mean,
    }
}

/// Everything needed to embed training and unseen points in the kernel space.
#[derive(Debug, Clone, PartialEq)]
pub struct NptState {
    pub params: KernelParams,
    pub train_data: FeatureMatrix,
    pub train_kernel: DMatrix<f64>,
    pub row_means: DVector<f64>,
    pub grand_mean: f64,
    /// `N x r`, columns are the retained eigenvectors.
    pub eigvecs: DMatrix<f64>,
    /// Retained eigenvalues, strictly positive and descending.
    pub eigvals: DVector<f64>,
    /// `r x N` training embedding.
    pub embedded: DMatrix<f64>,
    /// Sum of the absolute values of the discarded negative eigenvalues.
    pub dropped_negative_mass: f64,
}

impl NptState {
    pub fn rank(&self) -> usize {
        self.eigvals.len()
    }

    /// Rebuilds a state from its persisted parts. The training kernel and the
    /// embedding are recomputed deterministically.
    pub fn from_parts(
        params: KernelParams,
        train_data: FeatureMatrix,
        row_means: DVector<f64>,
        grand_mean: f64,
        eigvals: DVector<f64>,
        eigvecs: DMatrix<f64>,
        dropped_negative_mass: f64,
    ) -> Result<Self> {
        let n = train_data.n_samples();
        if eigvecs.nrows() != n || row_means.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: eigvecs.nrows(),
            });
        }
        if eigvecs.ncols() != eigvals.len() {
            return Err(Error::DimensionMismatch {
                expected: eigvals.len(),
                found: eigvecs.ncols(),
            });
        }
        let train_kernel = kernel_matrix(train_data.values(), &params);
        let embedded = embedding(&eigvals, &eigvecs);
        Ok(NptState {
            params,
            train_data,
            train_kernel,
            row_means,
            grand_mean,
            eigvecs,
            eigvals,
            embedded,
            dropped_negative_mass,
        })
    }
}

fn embedding(eigvals: &DVector<f64>, eigvecs: &DMatrix<f64>) -> DMatrix<f64> {
    let mut phi = eigvecs.transpose();
    for (r, lambda) in eigvals.iter().enumerate() {
        phi.row_mut(r).scale_mut(lambda.sqrt());
    }
    phi
}

/// Factors the centered kernel of `f` and embeds the training samples.
///
/// Eigenvalues at or below `eig_rel_tol * lambda_max` are dropped, and so is
/// every negative eigenvalue the sigmoid term can introduce. Eigenvalues
/// below the rounding level of the raw kernel, `N * eps * max|K|`, are
/// dropped as well.
pub fn npt_fit(f: &FeatureMatrix, params: &KernelParams, eig_rel_tol: f64) -> Result<NptState> {
    params.validate()?;
    if f.n_samples() < 2 {
        return Err(Error::InvalidData(
            "kernel embedding needs at least two samples".into(),
        ));
    }
    let k = kernel_matrix(f.values(), params);
    let c = center_kernel(&k);
    let eig = SymmetricEigen::new(c.centered.clone());
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue("kernel eigenvalues".into()));
    }

    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lambda_max = eig.eigenvalues[order[0]];
    if lambda_max <= 0.0 {
        return Err(Error::DegenerateKernel);
    }
    // Centering a nearly constant kernel (very wide Gaussian) leaves
    // eigenvalues at the rounding level of the raw entries; those directions
    // are noise and would be amplified by `A^{-1/2}` when embedding test
    // points, so the cutoff never drops below that level.
    let n = f.n_samples();
    let noise = n as f64 * f64::EPSILON * k.amax();
    let cutoff = (eig_rel_tol * lambda_max).max(noise);
    if lambda_max <= noise {
        return Err(Error::DegenerateKernel);
    }
    let kept: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| eig.eigenvalues[i] > cutoff && eig.eigenvalues[i] > 0.0)
        .collect();
    let dropped_negative_mass = eig
        .eigenvalues
        .iter()
        .filter(|&&v| v < 0.0)
        .map(|v| v.abs())
        .sum();

    let mut eigvecs = DMatrix::zeros(n, kept.len());
    for (c_out, &i) in kept.iter().enumerate() {
        let mut col = eig.eigenvectors.column(i).clone_owned();
        canonical_sign(col.as_mut_slice());
        eigvecs.set_column(c_out, &col);
    }
    let eigvals = DVector::from_iterator(kept.len(), kept.iter().map(|&i| eig.eigenvalues[i]));
    let embedded = embedding(&eigvals, &eigvecs);

    Ok(NptState {
        params: *params,
        train_data: f.clone(),
        train_kernel: k,
        row_means: c.row_means,
        grand_mean: c.grand_mean,
        eigvecs,
        eigvals,
        embedded,
        dropped_negative_mass,
    })
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
pub(crate) fn canonical_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Embeds unseen columns: `A^{-1/2} U^T k^_x` with `k^_x` the test kernel
/// vector centered against the training statistics.
pub fn npt_embed_test(state: &NptState, f_test: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let train = state.train_data.values();
    if f_test.nrows() != train.nrows() {
        return Err(Error::DimensionMismatch {
            expected: train.nrows(),
            found: f_test.nrows(),
        });
    }
    let m = f_test.ncols();
    if m == 0 {
        return Ok(DMatrix::zeros(state.rank(), 0));
    }
    let mut kx = cross_kernel(train, f_test, &state.params);
    let n = train.ncols();
    for j in 0..m {
        let col_mean = kx.column(j).mean();
        for i in 0..n {
            kx[(i, j)] += state.grand_mean - state.row_means[i] - col_mean;
        }
    }
    let mut phi = state.eigvecs.tr_mul(&kx);
    for (r, lambda) in state.eigvals.iter().enumerate() {
        phi.row_mut(r).scale_mut(1.0 / lambda.sqrt());
    }
    Ok(phi)
}
