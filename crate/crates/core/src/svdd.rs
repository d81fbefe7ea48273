//! Hypersphere data description (SVDD) and the one-class SVM baseline.
//!
//! Both duals are quadratic programs over the capped simplex
//! `{0 <= alpha <= U, sum(alpha) = 1}` with a linear Gram matrix; any
//! non-linearity is applied upstream by the kernel embedding. They share one
//! pairwise solver that moves mass between two multipliers at a time, so the
//! equality constraint holds throughout.

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Multipliers above this count as support vectors.
pub const ALPHA_TOL: f64 = 1e-8;
pub const DEFAULT_KKT_TOL: f64 = 1e-6;
const MAX_SWEEPS: usize = 10_000;
const TAU: f64 = 1e-12;

/// Outcome of the capped-simplex QP `min 1/2 a^T Q a + p^T a`.
#[derive(Debug, Clone)]
pub struct QpSolution {
    pub alphas: DVector<f64>,
    /// Largest KKT violation at exit, `max_{a>0} g - min_{a<U} g`.
    pub kkt_violation: f64,
    pub updates: usize,
    pub converged: bool,
}

/// Gradient of `1/2 a^T Q a + p^T a`.
fn gradient(q: &DMatrix<f64>, p: &DVector<f64>, alphas: &DVector<f64>) -> DVector<f64> {
    q * alphas + p
}

/// `max_{a_j > 0} g_j - min_{a_i < U} g_i`, zero when either set is empty.
pub fn kkt_violation(g: &DVector<f64>, alphas: &DVector<f64>, upper: f64) -> f64 {
    let mut min_up = f64::INFINITY;
    let mut max_low = f64::NEG_INFINITY;
    for (t, &a) in alphas.iter().enumerate() {
        if a < upper {
            min_up = min_up.min(g[t]);
        }
        if a > 0.0 {
            max_low = max_low.max(g[t]);
        }
    }
    if min_up.is_finite() && max_low.is_finite() {
        (max_low - min_up).max(0.0)
    } else {
        0.0
    }
}

/// Pairwise solver for `min 1/2 a^T Q a + p^T a` over `0 <= a <= upper`,
/// `sum(a) = 1`. Working pairs follow second-order selection.
pub fn solve_capped_simplex_qp(
    q: &DMatrix<f64>,
    p: &DVector<f64>,
    upper: f64,
    kkt_tol: f64,
) -> QpSolution {
    let m = p.len();
    let mut alphas = DVector::zeros(m);
    let mut remaining: f64 = 1.0;
    for t in 0..m {
        if remaining <= 0.0 {
            break;
        }
        let a = remaining.min(upper);
        alphas[t] = a;
        remaining -= a;
    }
    if m == 1 {
        return QpSolution {
            alphas: DVector::from_element(1, 1.0),
            kkt_violation: 0.0,
            updates: 0,
            converged: true,
        };
    }

    let mut g = gradient(q, p, &alphas);
    let max_updates = MAX_SWEEPS * m;
    let mut updates = 0;
    let mut converged = false;
    while updates < max_updates {
        // i: the multiplier to increase, lowest gradient among a_i < U
        let mut i = usize::MAX;
        let mut g_min = f64::INFINITY;
        for t in 0..m {
            if alphas[t] < upper && g[t] < g_min {
                g_min = g[t];
                i = t;
            }
        }
        let mut g_max = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut best_gain = f64::NEG_INFINITY;
        for t in 0..m {
            if alphas[t] > 0.0 {
                g_max = g_max.max(g[t]);
                let diff = g[t] - g_min;
                if i != usize::MAX && t != i && diff > 0.0 {
                    let curv = (q[(i, i)] + q[(t, t)] - 2.0 * q[(i, t)]).max(TAU);
                    let gain = diff * diff / curv;
                    if gain > best_gain {
                        best_gain = gain;
                        j = t;
                    }
                }
            }
        }
        if i == usize::MAX || j == usize::MAX || g_max - g_min <= kkt_tol {
            // confirm against a fresh gradient before stopping
            g = gradient(q, p, &alphas);
            if kkt_violation(&g, &alphas, upper) <= kkt_tol {
                converged = true;
                break;
            }
            updates += 1;
            continue;
        }

        let curv = (q[(i, i)] + q[(j, j)] - 2.0 * q[(i, j)]).max(TAU);
        let mut step = (g[j] - g[i]) / curv;
        let room_i = upper - alphas[i];
        let room_j = alphas[j];
        let (ai, aj);
        if step >= room_i && room_i <= room_j {
            step = room_i;
            ai = upper;
            aj = if room_i == room_j {
                0.0
            } else {
                alphas[j] - step
            };
        } else if step >= room_j {
            step = room_j;
            ai = alphas[i] + step;
            aj = 0.0;
        } else {
            ai = alphas[i] + step;
            aj = alphas[j] - step;
        }
        alphas[i] = ai;
        alphas[j] = aj;
        for t in 0..m {
            g[t] += step * (q[(t, i)] - q[(t, j)]);
        }
        updates += 1;
    }
    let g = gradient(q, p, &alphas);
    let viol = kkt_violation(&g, &alphas, upper);
    if !converged {
        warn!("capped-simplex QP stopped after {updates} updates, KKT violation {viol:e}");
    }
    QpSolution {
        alphas,
        kkt_violation: viol,
        updates,
        converged,
    }
}

/// `G = Y^T Y` for points stored as columns.
pub fn gram(points: &DMatrix<f64>) -> DMatrix<f64> {
    points.tr_mul(points)
}

/// SVDD dual value `sum_i a_i G_ii - a^T G a`.
pub fn svdd_dual_objective(g: &DMatrix<f64>, alphas: &DVector<f64>) -> f64 {
    let lin: f64 = alphas.iter().enumerate().map(|(i, a)| a * g[(i, i)]).sum();
    lin - alphas.dot(&(g * alphas))
}

/// A solved hypersphere description.
#[derive(Debug, Clone, PartialEq)]
pub struct DataDescription {
    pub alphas: DVector<f64>,
    pub c_penalty: f64,
    pub radius_sq: f64,
    /// Indices with `alpha > ALPHA_TOL`.
    pub support: Vec<usize>,
    /// Support vectors strictly inside the box, lying on the sphere.
    pub boundary: Vec<usize>,
    /// `d x M` points the description was fit on.
    pub train_points: DMatrix<f64>,
    pub center: DVector<f64>,
    pub kkt_violation: f64,
    pub converged: bool,
}

impl DataDescription {
    /// Rebuilds a description from persisted multipliers; the center and the
    /// support sets are recomputed, the radius is taken as given.
    pub fn from_parts(
        train_points: DMatrix<f64>,
        alphas: DVector<f64>,
        c_penalty: f64,
        radius_sq: f64,
    ) -> Result<Self> {
        if train_points.ncols() != alphas.len() {
            return Err(Error::DimensionMismatch {
                expected: train_points.ncols(),
                found: alphas.len(),
            });
        }
        let (support, boundary) = support_sets(&alphas, c_penalty);
        let center = &train_points * &alphas;
        Ok(DataDescription {
            alphas,
            c_penalty,
            radius_sq,
            support,
            boundary,
            train_points,
            center,
            kkt_violation: 0.0,
            converged: true,
        })
    }

    pub fn dim(&self) -> usize {
        self.train_points.nrows()
    }

    /// Squared distance from `y` to the center.
    pub fn distance_sq(&self, y: nalgebra::DVectorView<f64>) -> Result<f64> {
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: y.len(),
            });
        }
        Ok(y.iter()
            .zip(self.center.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum())
    }

    /// Target iff the point lies inside or on the sphere.
    pub fn contains(&self, y: nalgebra::DVectorView<f64>) -> Result<bool> {
        Ok(self.distance_sq(y)? <= self.radius_sq)
    }

    pub fn dual_objective(&self) -> f64 {
        svdd_dual_objective(&gram(&self.train_points), &self.alphas)
    }
}

fn support_sets(alphas: &DVector<f64>, upper: f64) -> (Vec<usize>, Vec<usize>) {
    let support: Vec<usize> = (0..alphas.len())
        .filter(|&i| alphas[i] > ALPHA_TOL)
        .collect();
    let boundary = support
        .iter()
        .copied()
        .filter(|&i| alphas[i] < upper - ALPHA_TOL)
        .collect();
    (support, boundary)
}

fn check_feasible(bound: f64, m: usize) -> bool {
    bound * m as f64 >= 1.0 - 1e-12
}

/// Solves the SVDD dual on the columns of `points` with penalty `C`.
///
/// The squared radius is the mean squared distance of the boundary support
/// vectors, or the largest support-vector distance when every support vector
/// sits at the cap.
pub fn svdd_solve(points: &DMatrix<f64>, c_penalty: f64, kkt_tol: f64) -> Result<DataDescription> {
    let m = points.ncols();
    if m == 0 {
        return Err(Error::InvalidData("SVDD needs at least one point".into()));
    }
    if !(kkt_tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "kkt_tol {kkt_tol} must be positive"
        )));
    }
    if !(c_penalty > 0.0) || !check_feasible(c_penalty, m) {
        return Err(Error::InfeasiblePenalty {
            c: c_penalty,
            m,
            product: c_penalty * m as f64,
        });
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue("SVDD input points".into()));
    }
    let g = gram(points);
    let q = &g * 2.0;
    let p = -g.diagonal();
    let sol = solve_capped_simplex_qp(&q, &p, c_penalty, kkt_tol);

    let mut desc = DataDescription::from_parts(points.clone(), sol.alphas, c_penalty, 0.0)?;
    desc.kkt_violation = sol.kkt_violation;
    desc.converged = sol.converged;
    let dist = |i: usize| desc.distance_sq(points.column(i)).unwrap_or(f64::NAN);
    desc.radius_sq = if desc.boundary.is_empty() {
        desc.support.iter().map(|&i| dist(i)).fold(0.0, f64::max)
    } else {
        desc.boundary.iter().map(|&i| dist(i)).sum::<f64>() / desc.boundary.len() as f64
    };
    Ok(desc)
}

/// One-class SVM hyperplane `w.y = rho` with `w = sum_j alpha_j y_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct OcSvmModel {
    pub alphas: DVector<f64>,
    pub nu: f64,
    pub rho: f64,
    pub train_points: DMatrix<f64>,
    pub weight: DVector<f64>,
    pub kkt_violation: f64,
}

impl OcSvmModel {
    pub fn from_parts(
        train_points: DMatrix<f64>,
        alphas: DVector<f64>,
        nu: f64,
        rho: f64,
    ) -> Result<Self> {
        if train_points.ncols() != alphas.len() {
            return Err(Error::DimensionMismatch {
                expected: train_points.ncols(),
                found: alphas.len(),
            });
        }
        let weight = &train_points * &alphas;
        Ok(OcSvmModel {
            alphas,
            nu,
            rho,
            train_points,
            weight,
            kkt_violation: 0.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.train_points.nrows()
    }

    /// `sum_j alpha_j y_j.y - rho`; non-negative means target.
    pub fn decision(&self, y: nalgebra::DVectorView<f64>) -> Result<f64> {
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: y.len(),
            });
        }
        Ok(self.weight.dot(&y) - self.rho)
    }
}

/// Solves `min 1/2 a^T G a` over `0 <= a <= 1/(nu M)`, `sum(a) = 1`.
pub fn ocsvm_solve(points: &DMatrix<f64>, nu: f64, kkt_tol: f64) -> Result<OcSvmModel> {
    let m = points.ncols();
    if m == 0 {
        return Err(Error::InvalidData("OC-SVM needs at least one point".into()));
    }
    if !(nu > 0.0 && nu <= 1.0) || !check_feasible(nu, m) {
        return Err(Error::InfeasibleNu {
            nu,
            m,
            product: nu * m as f64,
        });
    }
    if !(kkt_tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "kkt_tol {kkt_tol} must be positive"
        )));
    }
    let upper = 1.0 / (nu * m as f64);
    let g = gram(points);
    let p = DVector::zeros(m);
    let sol = solve_capped_simplex_qp(&g, &p, upper, kkt_tol);
    let ga = &g * &sol.alphas;

    let (support, boundary) = support_sets(&sol.alphas, upper);
    let rho = if !boundary.is_empty() {
        boundary.iter().map(|&i| ga[i]).sum::<f64>() / boundary.len() as f64
    } else {
        // rho lies between the capped multipliers' outputs and the free ones'
        let lo = support
            .iter()
            .map(|&i| ga[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let hi = (0..m)
            .filter(|&i| sol.alphas[i] <= ALPHA_TOL)
            .map(|i| ga[i])
            .fold(f64::INFINITY, f64::min);
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (true, false) => lo,
            (false, true) => hi,
            (false, false) => 0.0,
        }
    };
    let mut model = OcSvmModel::from_parts(points.clone(), sol.alphas, nu, rho)?;
    model.kkt_violation = sol.kkt_violation;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_point_is_its_own_center() {
        let p = DMatrix::from_column_slice(2, 1, &[3.0, -1.0]);
        let d = svdd_solve(&p, 1.0, DEFAULT_KKT_TOL).unwrap();
        assert_eq!(d.alphas.as_slice(), &[1.0]);
        assert_eq!(d.radius_sq, 0.0);
    }

    #[test]
    fn symmetric_pair() {
        let p = DMatrix::from_column_slice(1, 2, &[-1.0, 1.0]);
        let d = svdd_solve(&p, 1.0, DEFAULT_KKT_TOL).unwrap();
        assert_abs_diff_eq!(d.alphas[0], 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(d.alphas[1], 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(d.center[0], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(d.radius_sq, 1.0, epsilon = 1e-9);
        let far = DVector::from_element(1, 3.0);
        assert_abs_diff_eq!(d.distance_sq(far.as_view()).unwrap(), 9.0, epsilon = 1e-8);
        assert!(!d.contains(far.as_view()).unwrap());
        assert_abs_diff_eq!(d.distance_sq(d.center.as_view()).unwrap(), 0.0);
    }

    #[test]
    fn infeasible_penalty() {
        let p = DMatrix::from_column_slice(1, 3, &[0.0, 1.0, 2.0]);
        assert!(matches!(
            svdd_solve(&p, 0.3, DEFAULT_KKT_TOL),
            Err(Error::InfeasiblePenalty { .. })
        ));
        // C = 1/M exactly is feasible
        assert!(svdd_solve(&p, 1.0 / 3.0, DEFAULT_KKT_TOL).is_ok());
    }

    #[test]
    fn dimension_mismatch() {
        let p = DMatrix::from_column_slice(1, 2, &[-1.0, 1.0]);
        let d = svdd_solve(&p, 1.0, DEFAULT_KKT_TOL).unwrap();
        let y = DVector::from_element(2, 0.0);
        assert!(d.distance_sq(y.as_view()).is_err());
    }

    #[test]
    fn constraints_hold() {
        let p = DMatrix::from_fn(2, 9, |i, j| ((i * 17 + j * 5) % 11) as f64 / 3.0);
        let d = svdd_solve(&p, 0.2, DEFAULT_KKT_TOL).unwrap();
        assert!(d.alphas.iter().all(|&a| (0.0..=0.2).contains(&a)));
        assert_abs_diff_eq!(d.alphas.sum(), 1.0, epsilon = 1e-8);
        assert!(d.kkt_violation <= DEFAULT_KKT_TOL);
        for &b in &d.boundary {
            let dist = d.distance_sq(p.column(b)).unwrap();
            assert_abs_diff_eq!(dist, d.radius_sq, epsilon = 1e-6);
        }
        for i in 0..9 {
            if d.alphas[i] < 0.2 - ALPHA_TOL {
                assert!(d.distance_sq(p.column(i)).unwrap() <= d.radius_sq + 1e-6);
            }
        }
    }

    #[test]
    fn ocsvm_degenerate_and_symmetric() {
        let one = DMatrix::from_column_slice(2, 1, &[1.0, 2.0]);
        let m = ocsvm_solve(&one, 1.0, DEFAULT_KKT_TOL).unwrap();
        assert_eq!(m.alphas.as_slice(), &[1.0]);
        assert_abs_diff_eq!(m.decision(one.column(0)).unwrap(), 0.0, epsilon = 1e-12);

        let two = DMatrix::from_column_slice(2, 2, &[1.0, 1.0, 1.0, -1.0]);
        let m = ocsvm_solve(&two, 1.0, DEFAULT_KKT_TOL).unwrap();
        assert_abs_diff_eq!(m.alphas[0], 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(m.alphas[1], 0.5, epsilon = 1e-9);
    }

    #[test]
    fn ocsvm_infeasible_nu() {
        let p = DMatrix::from_column_slice(1, 3, &[0.0, 1.0, 2.0]);
        assert!(matches!(
            ocsvm_solve(&p, 0.2, DEFAULT_KKT_TOL),
            Err(Error::InfeasibleNu { .. })
        ));
        assert!(ocsvm_solve(&p, 1.5, DEFAULT_KKT_TOL).is_err());
    }

    #[test]
    fn duplicate_points_converge() {
        let p = DMatrix::from_column_slice(1, 4, &[1.0, 1.0, 1.0, 2.0]);
        let d = svdd_solve(&p, 0.5, DEFAULT_KKT_TOL).unwrap();
        assert!(d.converged);
    }
}
