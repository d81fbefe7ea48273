//! Covariance-style regularizers on the projected training data.
//!
//! Multi-modal terms (`omega*`) weight each pooled sample by `lambda`:
//!
//! * own-modality, `omega1..3`: `sum_v tr(Q_v F_v L_v F_v^T Q_v^T)`
//! * cross-modality, `omega4..6`: `tr(S S^T)` with `S = sum_v Q_v F_v L_v`
//!
//! where `L_v = diag(lambda_v)` and `lambda` is all ones (1, 4), the
//! support-vector indicator (2, 5) or `alpha` itself (3, 6).
//!
//! Single-modality terms (`psi*`) are `|Q F lambda|^2` with `lambda` zero,
//! all ones, `alpha` on boundary support vectors, or `alpha` on all support
//! vectors.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::gradient::PooledLayout;
use super::ProjectionMatrix;
use crate::svdd::ALPHA_TOL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularizer {
    Omega0,
    Omega1,
    Omega2,
    Omega3,
    Omega4,
    Omega5,
    Omega6,
    Psi0,
    Psi1,
    Psi2,
    Psi3,
}

enum Weights {
    Ones,
    SupportIndicator,
    Alpha,
    BoundaryAlpha,
}

enum Shape {
    Zero,
    Own(Weights),
    Cross(Weights),
    Sum(Weights),
}

impl Regularizer {
    pub const MULTI_MODAL: [Regularizer; 7] = [
        Regularizer::Omega0,
        Regularizer::Omega1,
        Regularizer::Omega2,
        Regularizer::Omega3,
        Regularizer::Omega4,
        Regularizer::Omega5,
        Regularizer::Omega6,
    ];
    pub const UNI_MODAL: [Regularizer; 4] = [
        Regularizer::Psi0,
        Regularizer::Psi1,
        Regularizer::Psi2,
        Regularizer::Psi3,
    ];

    pub fn is_multi_modal(self) -> bool {
        !self.is_uni_modal()
    }

    pub fn is_uni_modal(self) -> bool {
        matches!(
            self,
            Regularizer::Psi0 | Regularizer::Psi1 | Regularizer::Psi2 | Regularizer::Psi3
        )
    }

    /// True when the term vanishes and `beta` has no effect.
    pub fn is_zero(self) -> bool {
        matches!(self, Regularizer::Omega0 | Regularizer::Psi0)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Regularizer::Omega0 => "w0",
            Regularizer::Omega1 => "w1",
            Regularizer::Omega2 => "w2",
            Regularizer::Omega3 => "w3",
            Regularizer::Omega4 => "w4",
            Regularizer::Omega5 => "w5",
            Regularizer::Omega6 => "w6",
            Regularizer::Psi0 => "psi0",
            Regularizer::Psi1 => "psi1",
            Regularizer::Psi2 => "psi2",
            Regularizer::Psi3 => "psi3",
        }
    }

    fn shape(self) -> Shape {
        use Regularizer::*;
        match self {
            Omega0 | Psi0 => Shape::Zero,
            Omega1 => Shape::Own(Weights::Ones),
            Omega2 => Shape::Own(Weights::SupportIndicator),
            Omega3 => Shape::Own(Weights::Alpha),
            Omega4 => Shape::Cross(Weights::Ones),
            Omega5 => Shape::Cross(Weights::SupportIndicator),
            Omega6 => Shape::Cross(Weights::Alpha),
            Psi1 => Shape::Sum(Weights::Ones),
            Psi2 => Shape::Sum(Weights::BoundaryAlpha),
            Psi3 => Shape::Sum(Weights::Alpha),
        }
    }
}

fn weights(w: &Weights, alphas: &[f64], c_penalty: f64) -> DVector<f64> {
    DVector::from_iterator(
        alphas.len(),
        alphas.iter().map(|&a| match w {
            Weights::Ones => 1.0,
            Weights::SupportIndicator => {
                if a > ALPHA_TOL {
                    1.0
                } else {
                    0.0
                }
            }
            Weights::Alpha => {
                if a > ALPHA_TOL {
                    a
                } else {
                    0.0
                }
            }
            Weights::BoundaryAlpha => {
                if a > ALPHA_TOL && a < c_penalty - ALPHA_TOL {
                    a
                } else {
                    0.0
                }
            }
        }),
    )
}

/// `F_v diag(lambda_v)`.
fn weighted(f: &DMatrix<f64>, lambda: &DVector<f64>) -> DMatrix<f64> {
    let mut out = f.clone();
    for (j, mut c) in out.column_iter_mut().enumerate() {
        c *= lambda[j];
    }
    out
}

fn cross_sum(
    projections: &[ProjectionMatrix],
    data: &[DMatrix<f64>],
    lambda: &DVector<f64>,
    layout: &PooledLayout,
) -> DMatrix<f64> {
    let d = projections[0].out_dim();
    let mut s = DMatrix::zeros(d, layout.n);
    for (v, (q, f)) in projections.iter().zip(data).enumerate() {
        let lv = lambda.rows(layout.offset(v), layout.n).clone_owned();
        s += q.matrix() * weighted(f, &lv);
    }
    s
}

/// Value of the regularization term at fixed multipliers.
pub fn regularizer_value(
    reg: Regularizer,
    projections: &[ProjectionMatrix],
    data: &[DMatrix<f64>],
    alphas: &[f64],
    c_penalty: f64,
) -> f64 {
    let layout = PooledLayout::new(data[0].ncols(), data.len());
    match reg.shape() {
        Shape::Zero => 0.0,
        Shape::Own(w) => {
            let lambda = weights(&w, alphas, c_penalty);
            projections
                .iter()
                .zip(data)
                .enumerate()
                .map(|(v, (q, f))| {
                    let lv = lambda.rows(layout.offset(v), layout.n).clone_owned();
                    let y = q.matrix() * f;
                    let yw = q.matrix() * weighted(f, &lv);
                    y.dot(&yw)
                })
                .sum()
        }
        Shape::Cross(w) => {
            let lambda = weights(&w, alphas, c_penalty);
            cross_sum(projections, data, &lambda, &layout).norm_squared()
        }
        Shape::Sum(w) => {
            let lambda = weights(&w, alphas, c_penalty);
            projections
                .iter()
                .zip(data)
                .enumerate()
                .map(|(v, (q, f))| {
                    let lv = lambda.rows(layout.offset(v), layout.n).clone_owned();
                    (q.matrix() * (f * lv)).norm_squared()
                })
                .sum()
        }
    }
}

/// Gradient of the regularization term with respect to `Q_v`.
pub fn regularizer_gradient(
    reg: Regularizer,
    v: usize,
    projections: &[ProjectionMatrix],
    data: &[DMatrix<f64>],
    alphas: &[f64],
    c_penalty: f64,
) -> DMatrix<f64> {
    let layout = PooledLayout::new(data[0].ncols(), data.len());
    let q = projections[v].matrix();
    let f = &data[v];
    match reg.shape() {
        Shape::Zero => DMatrix::zeros(q.nrows(), q.ncols()),
        Shape::Own(w) => {
            let lambda = weights(&w, alphas, c_penalty);
            let lv = lambda.rows(layout.offset(v), layout.n).clone_owned();
            (q * weighted(f, &lv) * f.transpose()) * 2.0
        }
        Shape::Cross(w) => {
            let lambda = weights(&w, alphas, c_penalty);
            let lv = lambda.rows(layout.offset(v), layout.n).clone_owned();
            let s = cross_sum(projections, data, &lambda, &layout);
            (s * weighted(f, &lv).transpose()) * 2.0
        }
        Shape::Sum(w) => {
            let lambda = weights(&w, alphas, c_penalty);
            let lv = lambda.rows(layout.offset(v), layout.n).clone_owned();
            let fl = f * lv;
            (q * &fl * fl.transpose()) * 2.0
        }
    }
}
