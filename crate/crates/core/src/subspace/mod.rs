//! Subspace learning: projection matrices, their initialization and updates,
//! the Lagrangian gradient, and the alternating training loop.

mod gradient;
mod model;
mod regularizer;

pub use gradient::{lagrangian_gradient, lagrangian_value, pooled_alphas, PooledLayout};
pub use model::{
    fuse, pooled_training_points, predict, train, Boundary, DecisionStrategy, Method, Prediction,
    SubspaceModel, TrainConfig, TrainTrace,
};
pub use regularizer::{regularizer_gradient, regularizer_value, Regularizer};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::canonical_sign;

/// `d x D` projection with orthonormal rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix(DMatrix<f64>);

impl ProjectionMatrix {
    /// Wraps a matrix without re-orthonormalizing it. Used when restoring a
    /// persisted model; rows are expected to be orthonormal already.
    pub fn from_matrix_unchecked(q: DMatrix<f64>) -> Self {
        ProjectionMatrix(q)
    }

    pub fn identity(dim: usize) -> Self {
        ProjectionMatrix(DMatrix::identity(dim, dim))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// Target dimensionality `d`.
    pub fn out_dim(&self) -> usize {
        self.0.nrows()
    }

    /// Input dimensionality `D`.
    pub fn in_dim(&self) -> usize {
        self.0.ncols()
    }

    /// `max |Q Q^T - I|` over all entries.
    pub fn orthonormality_error(&self) -> f64 {
        let g = &self.0 * self.0.transpose();
        let d = g.nrows();
        let mut worst = 0.0_f64;
        for i in 0..d {
            for j in 0..d {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }
}

/// Gradient step direction for one modality.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Descent,
    Ascent,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Descent => -1.0,
            Direction::Ascent => 1.0,
        }
    }
}

/// How step directions are assigned to modalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UpdateStrategy {
    /// Descent on every modality.
    #[serde(rename = "sd-")]
    SdMinus,
    /// Ascent on every modality.
    #[serde(rename = "sd+")]
    SdPlus,
    /// Descent on the first modality, ascent on the second.
    #[serde(rename = "ad-+")]
    AdMinusPlus,
    /// Ascent on the first modality, descent on the second.
    #[serde(rename = "ad+-")]
    AdPlusMinus,
}

impl UpdateStrategy {
    pub const ALL: [UpdateStrategy; 4] = [
        UpdateStrategy::SdMinus,
        UpdateStrategy::SdPlus,
        UpdateStrategy::AdMinusPlus,
        UpdateStrategy::AdPlusMinus,
    ];

    pub fn is_asymmetric(self) -> bool {
        matches!(
            self,
            UpdateStrategy::AdMinusPlus | UpdateStrategy::AdPlusMinus
        )
    }

    /// Direction for modality `v` (zero-based).
    pub fn direction(self, v: usize) -> Direction {
        match (self, v) {
            (UpdateStrategy::SdMinus, _) => Direction::Descent,
            (UpdateStrategy::SdPlus, _) => Direction::Ascent,
            (UpdateStrategy::AdMinusPlus, 0) | (UpdateStrategy::AdPlusMinus, 1) => {
                Direction::Descent
            }
            _ => Direction::Ascent,
        }
    }

    /// Short operator notation: `--`, `++`, `-+`, `+-`.
    pub fn symbol(self) -> &'static str {
        match self {
            UpdateStrategy::SdMinus => "--",
            UpdateStrategy::SdPlus => "++",
            UpdateStrategy::AdMinusPlus => "-+",
            UpdateStrategy::AdPlusMinus => "+-",
        }
    }
}

/// Top-`d` principal directions of the columns of `f`, one per row.
///
/// Rows follow descending variance; each row's largest-magnitude entry is
/// made positive.
pub fn pca_init(f: &DMatrix<f64>, d: usize) -> Result<ProjectionMatrix> {
    let (dim, n) = f.shape();
    if d == 0 || d > dim.min(n) {
        return Err(Error::InvalidParameter(format!(
            "subspace dimension {d} must be in [1, min(D={dim}, N={n})]"
        )));
    }
    let mean = f.column_mean();
    let mut centered = f.clone();
    for mut c in centered.column_iter_mut() {
        c -= &mean;
    }
    let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
    let cov = (&centered * centered.transpose()) / denom;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut q = DMatrix::zeros(d, dim);
    for (r, &i) in order.iter().take(d).enumerate() {
        let mut row: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        canonical_sign(&mut row);
        for (c, v) in row.into_iter().enumerate() {
            q[(r, c)] = v;
        }
    }
    Ok(ProjectionMatrix(q))
}

/// `Y = Q F`.
pub fn project(q: &ProjectionMatrix, f: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if q.in_dim() != f.nrows() {
        return Err(Error::DimensionMismatch {
            expected: q.in_dim(),
            found: f.nrows(),
        });
    }
    Ok(&q.0 * f)
}

/// Orthonormalizes the rows of `q_raw` through a QR factorization of its
/// transpose. The triangular factor is taken with a positive diagonal, so
/// rows that are already orthonormal are returned unchanged.
pub fn orthonormalize(q_raw: &DMatrix<f64>) -> Result<ProjectionMatrix> {
    let (d, dim) = q_raw.shape();
    if d == 0 || d > dim {
        return Err(Error::InvalidParameter(format!(
            "cannot orthonormalize {d} rows in dimension {dim}"
        )));
    }
    if q_raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue(
            "projection before orthonormalization".into(),
        ));
    }
    let qr = q_raw.transpose().qr();
    let r = qr.r();
    let mut qf = qr.q();
    let scale = (0..d).map(|k| r[(k, k)].abs()).fold(0.0, f64::max);
    for k in 0..d {
        let pivot = r[(k, k)];
        if pivot.abs() <= 1e-12 * scale.max(1.0) {
            return Err(Error::RankDeficient { pivot: pivot.abs() });
        }
        if pivot < 0.0 {
            qf.column_mut(k).neg_mut();
        }
    }
    Ok(ProjectionMatrix(qf.transpose()))
}

/// One gradient step `Q +/- eta * grad` followed by orthonormalization.
/// A zero step returns `q` untouched.
pub fn update_projection(
    q: &ProjectionMatrix,
    grad: &DMatrix<f64>,
    eta: f64,
    direction: Direction,
) -> Result<ProjectionMatrix> {
    if grad.shape() != q.0.shape() {
        return Err(Error::DimensionMismatch {
            expected: q.0.len(),
            found: grad.len(),
        });
    }
    if eta == 0.0 {
        return Ok(q.clone());
    }
    let raw = &q.0 + grad * (direction.sign() * eta);
    orthonormalize(&raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn pca_recovers_line_direction() {
        let dir = [0.6, 0.8];
        let f = DMatrix::from_fn(2, 9, |i, j| dir[i] * (j as f64 - 3.0));
        let q = pca_init(&f, 1).unwrap();
        assert_abs_diff_eq!(q.matrix()[(0, 0)], 0.6, epsilon = 1e-8);
        assert_abs_diff_eq!(q.matrix()[(0, 1)], 0.8, epsilon = 1e-8);
    }

    #[test]
    fn pca_full_basis_is_orthogonal() {
        let f = DMatrix::from_fn(3, 8, |i, j| {
            ((i * 3 + j * 7) % 5) as f64 + 0.1 * (i * j) as f64
        });
        let q = pca_init(&f, 3).unwrap();
        assert!(q.orthonormality_error() < 1e-12);
        let qtq = q.matrix().transpose() * q.matrix();
        assert_abs_diff_eq!(qtq, DMatrix::identity(3, 3), epsilon = 1e-12);
    }

    #[test]
    fn pca_rejects_large_d() {
        let f = DMatrix::zeros(3, 2);
        assert!(pca_init(&f, 3).is_err());
        assert!(pca_init(&f, 0).is_err());
    }

    #[test]
    fn project_by_hand() {
        let q = ProjectionMatrix::from_matrix_unchecked(DMatrix::from_row_slice(
            2,
            3,
            &[1.0, 0.0, 2.0, 0.0, -1.0, 1.0],
        ));
        let f = DMatrix::from_row_slice(3, 4, &[1., 2., 3., 4., 5., 6., 7., 8., 9., 10., 11., 12.]);
        let y = project(&q, &f).unwrap();
        let expected = DMatrix::from_row_slice(2, 4, &[19., 22., 25., 28., 4., 4., 4., 4.]);
        assert_eq!(y, expected);
        assert_eq!(
            project(&q, &DMatrix::zeros(3, 2)).unwrap(),
            DMatrix::zeros(2, 2)
        );
        assert!(project(&q, &DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn project_identity() {
        let f = DMatrix::from_fn(3, 4, |i, j| (i + 2 * j) as f64);
        assert_eq!(project(&ProjectionMatrix::identity(3), &f).unwrap(), f);
    }

    #[test]
    fn orthonormalize_axis_rows() {
        let q = orthonormalize(&DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0])).unwrap();
        assert_abs_diff_eq!(q.matrix().clone(), DMatrix::identity(2, 2), epsilon = 1e-15);
    }

    #[test]
    fn orthonormalize_fixed_point() {
        let f = DMatrix::from_fn(4, 10, |i, j| {
            ((i * 7 + j * 3) % 9) as f64 - 4.0 + 0.01 * j as f64
        });
        let q = pca_init(&f, 2).unwrap();
        let again = orthonormalize(q.matrix()).unwrap();
        assert_abs_diff_eq!(again.matrix().clone(), q.matrix().clone(), epsilon = 1e-12);
    }

    #[test]
    fn orthonormalize_rank_deficient() {
        let raw = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        assert!(matches!(
            orthonormalize(&raw),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn zero_step_keeps_projection() {
        let q = orthonormalize(&DMatrix::from_row_slice(1, 2, &[1.0, 1.0])).unwrap();
        let g = DMatrix::from_row_slice(1, 2, &[5.0, -3.0]);
        assert_eq!(
            update_projection(&q, &g, 0.0, Direction::Descent).unwrap(),
            q
        );
    }

    #[test]
    fn descent_equals_ascent_on_negated_gradient() {
        let q = orthonormalize(&DMatrix::from_row_slice(
            2,
            3,
            &[1.0, 0.2, 0.0, 0.0, 1.0, 0.3],
        ))
        .unwrap();
        let g = DMatrix::from_row_slice(2, 3, &[0.5, -0.1, 0.3, 0.2, 0.0, -0.4]);
        let a = update_projection(&q, &g, 0.1, Direction::Descent).unwrap();
        let b = update_projection(&q, &(-&g), 0.1, Direction::Ascent).unwrap();
        assert_eq!(a, b);
        assert!(a.orthonormality_error() < 1e-12);
    }

    #[test]
    fn asymmetric_directions() {
        assert_eq!(UpdateStrategy::AdMinusPlus.direction(0), Direction::Descent);
        assert_eq!(UpdateStrategy::AdMinusPlus.direction(1), Direction::Ascent);
        assert_eq!(UpdateStrategy::AdPlusMinus.direction(0), Direction::Ascent);
        assert_eq!(UpdateStrategy::AdPlusMinus.direction(1), Direction::Descent);
        for v in 0..3 {
            assert_eq!(UpdateStrategy::SdMinus.direction(v), Direction::Descent);
            assert_eq!(UpdateStrategy::SdPlus.direction(v), Direction::Ascent);
        }
    }
}
