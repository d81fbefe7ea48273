use nalgebra::{DMatrix, DVector};

use super::regularizer::{regularizer_gradient, Regularizer};
use super::ProjectionMatrix;
use crate::error::{Error, Result};

/// Column layout of the pooled training set: modality-major, so sample `i`
/// of modality `v` sits at column `v * n + i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PooledLayout {
    pub n: usize,
    pub modalities: usize,
}

impl PooledLayout {
    pub fn new(n: usize, modalities: usize) -> Self {
        PooledLayout { n, modalities }
    }

    pub fn len(&self) -> usize {
        self.n * self.modalities
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn offset(&self, v: usize) -> usize {
        v * self.n
    }

    pub fn range(&self, v: usize) -> std::ops::Range<usize> {
        self.offset(v)..self.offset(v) + self.n
    }
}

/// Multipliers of modality `v`.
pub fn pooled_alphas(alphas: &DVector<f64>, layout: &PooledLayout, v: usize) -> DVector<f64> {
    alphas.rows(layout.offset(v), layout.n).clone_owned()
}

fn check_shapes(
    projections: &[ProjectionMatrix],
    data: &[DMatrix<f64>],
    alphas: &DVector<f64>,
) -> Result<PooledLayout> {
    if projections.len() != data.len() || data.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "{} projections for {} modalities",
            projections.len(),
            data.len()
        )));
    }
    let layout = PooledLayout::new(data[0].ncols(), data.len());
    if alphas.len() != layout.len() {
        return Err(Error::DimensionMismatch {
            expected: layout.len(),
            found: alphas.len(),
        });
    }
    for (q, f) in projections.iter().zip(data) {
        if q.in_dim() != f.nrows() || f.ncols() != layout.n {
            return Err(Error::DimensionMismatch {
                expected: q.in_dim(),
                found: f.nrows(),
            });
        }
    }
    Ok(layout)
}

/// `sum_v F_v alpha_v` projected: the (unnormalized) center `a`.
fn weighted_center(
    projections: &[ProjectionMatrix],
    data: &[DMatrix<f64>],
    alphas: &DVector<f64>,
    layout: &PooledLayout,
) -> DVector<f64> {
    let d = projections[0].out_dim();
    let mut a = DVector::zeros(d);
    for (v, (q, f)) in projections.iter().zip(data).enumerate() {
        a += q.matrix() * (f * pooled_alphas(alphas, layout, v));
    }
    a
}

/// Lagrangian at fixed multipliers:
/// `sum_{v,i} a_vi |y_vi|^2 - |sum_{v,i} a_vi y_vi|^2` with `y_vi = Q_v f_vi`.
pub fn lagrangian_value(
    projections: &[ProjectionMatrix],
    data: &[DMatrix<f64>],
    alphas: &DVector<f64>,
) -> Result<f64> {
    let layout = check_shapes(projections, data, alphas)?;
    let mut first = 0.0;
    for (v, (q, f)) in projections.iter().zip(data).enumerate() {
        let y = q.matrix() * f;
        for (i, col) in y.column_iter().enumerate() {
            first += alphas[layout.offset(v) + i] * col.norm_squared();
        }
    }
    let a = weighted_center(projections, data, alphas, &layout);
    Ok(first - a.norm_squared())
}

/// Gradient of the Lagrangian plus `beta * omega` with respect to `Q_v`:
///
/// `2 Q_v F_v diag(a_v) F_v^T - 2 (sum_n Q_n F_n a_n)(F_v a_v)^T + beta * d(omega)`
#[allow(clippy::too_many_arguments)]
pub fn lagrangian_gradient(
    v: usize,
    projections: &[ProjectionMatrix],
    data: &[DMatrix<f64>],
    alphas: &DVector<f64>,
    beta: f64,
    regularizer: Regularizer,
    c_penalty: f64,
) -> Result<DMatrix<f64>> {
    let layout = check_shapes(projections, data, alphas)?;
    if v >= data.len() {
        return Err(Error::InvalidParameter(format!(
            "modality index {v} out of range"
        )));
    }
    let q = projections[v].matrix();
    let f = &data[v];
    let av = pooled_alphas(alphas, &layout, v);

    let mut fw = f.clone();
    for (j, mut c) in fw.column_iter_mut().enumerate() {
        c *= av[j];
    }
    let own = q * fw * f.transpose();
    let a = weighted_center(projections, data, alphas, &layout);
    let fa = f * &av;
    let mut grad = (own - a * fa.transpose()) * 2.0;
    if beta != 0.0 && !regularizer.is_zero() {
        grad += regularizer_gradient(
            regularizer,
            v,
            projections,
            data,
            alphas.as_slice(),
            c_penalty,
        ) * beta;
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subspace::orthonormalize;

    #[test]
    fn single_support_cancels() {
        let f = DMatrix::from_fn(3, 4, |i, j| (i as f64 + 1.0) * (j as f64 - 1.5));
        let q = orthonormalize(&DMatrix::from_row_slice(
            2,
            3,
            &[1.0, 0.5, 0.0, 0.0, 1.0, 0.2],
        ))
        .unwrap();
        let mut alphas = DVector::zeros(4);
        alphas[0] = 1.0;
        let g = lagrangian_gradient(0, &[q], &[f], &alphas, 0.0, Regularizer::Psi1, 1.0).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn beta_zero_ignores_regularizer() {
        let f1 = DMatrix::from_fn(3, 5, |i, j| ((i * 5 + j * 3) % 7) as f64 - 3.0);
        let f2 = DMatrix::from_fn(2, 5, |i, j| ((i * 2 + j) % 4) as f64 * 0.5);
        let q1 = orthonormalize(&DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 0.5])).unwrap();
        let q2 = orthonormalize(&DMatrix::from_row_slice(1, 2, &[0.3, 1.0])).unwrap();
        let alphas = DVector::from_fn(10, |i, _| (i + 1) as f64 / 55.0);
        let qs = [q1, q2];
        let data = [f1, f2];
        let base =
            lagrangian_gradient(1, &qs, &data, &alphas, 0.0, Regularizer::Omega0, 0.5).unwrap();
        for reg in Regularizer::MULTI_MODAL {
            let g = lagrangian_gradient(1, &qs, &data, &alphas, 0.0, reg, 0.5).unwrap();
            assert_eq!(g, base);
        }
    }

    #[test]
    fn alpha_length_checked() {
        let f = DMatrix::zeros(2, 3);
        let q = ProjectionMatrix::identity(2);
        let alphas = DVector::zeros(4);
        assert!(matches!(
            lagrangian_gradient(0, &[q], &[f], &alphas, 0.0, Regularizer::Psi0, 1.0),
            Err(Error::DimensionMismatch {
                expected: 3,
                found: 4
            })
        ));
    }
}
