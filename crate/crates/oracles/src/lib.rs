//! Slow reference computations that the test suites compare the library
//! against. Nothing here calls into `mssvdd`; every quantity is rebuilt from
//! its definition with plain loops so that a shared bug cannot hide.

use nalgebra::DMatrix;

/// Best point of the hypersphere dual
///
/// `max  sum_i a_i G_ii - sum_ij a_i a_j G_ij`
/// `s.t. sum_i a_i = 1,  0 <= a_i <= c`
///
/// over the lattice `a_i = k_i * step`, found by exhaustive enumeration.
/// Returns `None` when no lattice point is feasible.
pub fn svdd_simplex_grid(gram: &DMatrix<f64>, c: f64, step: f64) -> Option<(f64, Vec<f64>)> {
    let m = gram.nrows();
    assert_eq!(m, gram.ncols(), "gram matrix must be square");
    assert!(m >= 1);
    let units = (1.0 / step).round() as usize;
    let cap = ((c / step) + 1e-9).floor().min(units as f64) as usize;
    let mut search = Search {
        g: gram,
        m,
        step,
        cap,
        counts: vec![0; m],
        // partial[k][j] = sum_{i < k} a_i G_ij
        partial: vec![vec![0.0; m]; m + 1],
        best: f64::NEG_INFINITY,
        best_counts: None,
    };
    search.descend(0, units, 0.0, 0.0);
    let counts = search.best_counts?;
    Some((
        search.best,
        counts.iter().map(|&k| k as f64 * step).collect(),
    ))
}

struct Search<'a> {
    g: &'a DMatrix<f64>,
    m: usize,
    step: f64,
    cap: usize,
    counts: Vec<usize>,
    partial: Vec<Vec<f64>>,
    best: f64,
    best_counts: Option<Vec<usize>>,
}

impl Search<'_> {
    /// `linear` and `quad` hold the objective pieces of the coordinates
    /// fixed so far; `remaining` lattice units are still to be placed.
    fn descend(&mut self, k: usize, remaining: usize, linear: f64, quad: f64) {
        let left = self.m - k;
        if remaining > self.cap * left {
            return;
        }
        let gkk = self.g[(k, k)];
        let sk = self.partial[k][k];
        if left == 1 {
            let a = remaining as f64 * self.step;
            let value = linear + a * gkk - (quad + 2.0 * a * sk + a * a * gkk);
            if value > self.best {
                self.best = value;
                self.counts[k] = remaining;
                self.best_counts = Some(self.counts.clone());
            }
            return;
        }
        for units in 0..=remaining.min(self.cap) {
            let a = units as f64 * self.step;
            self.counts[k] = units;
            // only the coordinates still to be placed need the running sums
            for j in k + 1..self.m {
                self.partial[k + 1][j] = self.partial[k][j] + a * self.g[(k, j)];
            }
            let lin = linear + a * gkk;
            let q = quad + 2.0 * a * sk + a * a * gkk;
            self.descend(k + 1, remaining - units, lin, q);
        }
        self.counts[k] = 0;
    }
}

/// `G_ij = <x_i, x_j>` for the columns of `points`.
pub fn gram(points: &DMatrix<f64>) -> DMatrix<f64> {
    let n = points.ncols();
    DMatrix::from_fn(n, n, |i, j| {
        (0..points.nrows())
            .map(|r| points[(r, i)] * points[(r, j)])
            .sum()
    })
}

/// Dual objective `sum_i a_i G_ii - a^T G a`.
pub fn svdd_objective(gram: &DMatrix<f64>, alphas: &[f64]) -> f64 {
    let n = alphas.len();
    let mut value = 0.0;
    for i in 0..n {
        value += alphas[i] * gram[(i, i)];
        for j in 0..n {
            value -= alphas[i] * alphas[j] * gram[(i, j)];
        }
    }
    value
}

/// Largest violation of the first-order optimality conditions of the
/// hypersphere dual at a feasible `alphas`: the gap between the best
/// gradient entry that can still grow and the worst one that can shrink.
/// Membership tests are exact, matching a solver that stores bounds exactly.
pub fn svdd_kkt_gap(gram: &DMatrix<f64>, alphas: &[f64], c: f64) -> f64 {
    let n = alphas.len();
    let grad: Vec<f64> = (0..n)
        .map(|i| gram[(i, i)] - 2.0 * (0..n).map(|j| gram[(i, j)] * alphas[j]).sum::<f64>())
        .collect();
    let can_grow = (0..n).filter(|&i| alphas[i] < c).map(|i| grad[i]);
    let can_shrink = (0..n).filter(|&i| alphas[i] > 0.0).map(|i| grad[i]);
    let up = can_grow.fold(f64::NEG_INFINITY, f64::max);
    let down = can_shrink.fold(f64::INFINITY, f64::min);
    if up == f64::NEG_INFINITY || down == f64::INFINITY {
        0.0
    } else {
        (up - down).max(0.0)
    }
}

/// How a regularizer combines the projected samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegForm {
    /// No term.
    None,
    /// `sum_v sum_i w_vi |Q_v f_vi|^2`
    Own,
    /// `sum_i |sum_v w_vi Q_v f_vi|^2`
    Cross,
    /// `|sum_i w_i Q f_i|^2`, single modality.
    Sum,
}

/// Per-sample weights of a regularizer, from the pooled multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegWeights {
    Ones,
    /// 1 on samples with a positive multiplier.
    Support,
    /// The multiplier itself on samples with a positive multiplier.
    Alpha,
    /// The multiplier on samples strictly between the bounds.
    BoundaryAlpha,
}

/// Threshold above which a multiplier counts as positive.
pub const SUPPORT_TOL: f64 = 1e-8;

pub fn reg_weights(kind: RegWeights, alphas: &[f64], c: f64) -> Vec<f64> {
    alphas
        .iter()
        .map(|&a| {
            let support = a > SUPPORT_TOL;
            match kind {
                RegWeights::Ones => 1.0,
                RegWeights::Support => f64::from(u8::from(support)),
                RegWeights::Alpha => {
                    if support {
                        a
                    } else {
                        0.0
                    }
                }
                RegWeights::BoundaryAlpha => {
                    if support && a < c - SUPPORT_TOL {
                        a
                    } else {
                        0.0
                    }
                }
            }
        })
        .collect()
}

/// `Q f_i` for column `i` of `f`.
fn project_column(q: &DMatrix<f64>, f: &DMatrix<f64>, i: usize) -> Vec<f64> {
    (0..q.nrows())
        .map(|r| (0..q.ncols()).map(|c| q[(r, c)] * f[(c, i)]).sum())
        .collect()
}

fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Hypersphere Lagrangian at fixed multipliers, with the pooled sample of
/// modality `v`, column `i` at position `v * n + i`:
///
/// `sum_{v,i} a_vi |Q_v f_vi|^2 - |sum_{v,i} a_vi Q_v f_vi|^2`
pub fn lagrangian(qs: &[DMatrix<f64>], fs: &[DMatrix<f64>], alphas: &[f64]) -> f64 {
    let n = fs[0].ncols();
    let d = qs[0].nrows();
    let mut first = 0.0;
    let mut center = vec![0.0; d];
    for (v, (q, f)) in qs.iter().zip(fs).enumerate() {
        for i in 0..n {
            let a = alphas[v * n + i];
            let y = project_column(q, f, i);
            first += a * norm_sq(&y);
            for r in 0..d {
                center[r] += a * y[r];
            }
        }
    }
    first - norm_sq(&center)
}

pub fn regularizer(
    form: RegForm,
    weights: &[f64],
    qs: &[DMatrix<f64>],
    fs: &[DMatrix<f64>],
) -> f64 {
    let n = fs[0].ncols();
    let d = qs[0].nrows();
    match form {
        RegForm::None => 0.0,
        RegForm::Own => {
            let mut total = 0.0;
            for (v, (q, f)) in qs.iter().zip(fs).enumerate() {
                for i in 0..n {
                    total += weights[v * n + i] * norm_sq(&project_column(q, f, i));
                }
            }
            total
        }
        RegForm::Cross => {
            let mut total = 0.0;
            for i in 0..n {
                let mut s = vec![0.0; d];
                for (v, (q, f)) in qs.iter().zip(fs).enumerate() {
                    let y = project_column(q, f, i);
                    for r in 0..d {
                        s[r] += weights[v * n + i] * y[r];
                    }
                }
                total += norm_sq(&s);
            }
            total
        }
        RegForm::Sum => {
            assert_eq!(qs.len(), 1, "sum form is single-modality");
            let mut s = vec![0.0; d];
            for (i, w) in weights.iter().enumerate().take(n) {
                let y = project_column(&qs[0], &fs[0], i);
                for r in 0..d {
                    s[r] += w * y[r];
                }
            }
            norm_sq(&s)
        }
    }
}

/// Central differences of `f` at `x`, entry by entry.
pub fn central_difference(
    f: impl Fn(&DMatrix<f64>) -> f64,
    x: &DMatrix<f64>,
    h: f64,
) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    let mut probe = x.clone();
    for r in 0..x.nrows() {
        for c in 0..x.ncols() {
            let orig = probe[(r, c)];
            probe[(r, c)] = orig + h;
            let plus = f(&probe);
            probe[(r, c)] = orig - h;
            let minus = f(&probe);
            probe[(r, c)] = orig;
            out[(r, c)] = (plus - minus) / (2.0 * h);
        }
    }
    out
}

/// `gamma exp(-|x-y|^2 / (2 sigma^2)) + (1-gamma) tanh(kappa x.y + theta)`
/// between the columns of `a` and `b`.
pub fn composite_kernel(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    gamma: f64,
    sigma: f64,
    kappa: f64,
    theta: f64,
) -> DMatrix<f64> {
    DMatrix::from_fn(a.ncols(), b.ncols(), |i, j| {
        let mut dist = 0.0;
        let mut dot = 0.0;
        for r in 0..a.nrows() {
            dist += (a[(r, i)] - b[(r, j)]).powi(2);
            dot += a[(r, i)] * b[(r, j)];
        }
        gamma * (-dist / (2.0 * sigma * sigma)).exp() + (1.0 - gamma) * (kappa * dot + theta).tanh()
    })
}

/// `(I - 1/N) K (I - 1/N)` by explicit row, column and grand means.
pub fn double_center(k: &DMatrix<f64>) -> DMatrix<f64> {
    let n = k.nrows();
    let nf = n as f64;
    let row: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| k[(i, j)]).sum::<f64>() / nf)
        .collect();
    let col: Vec<f64> = (0..n)
        .map(|j| (0..n).map(|i| k[(i, j)]).sum::<f64>() / nf)
        .collect();
    let grand = row.iter().sum::<f64>() / nf;
    DMatrix::from_fn(n, n, |i, j| k[(i, j)] - row[i] - col[j] + grand)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_finds_pair_midpoint() {
        // points -1 and +1 on a line: optimum a = (1/2, 1/2), value 1
        let g = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        let (value, a) = svdd_simplex_grid(&g, 1.0, 0.01).unwrap();
        assert!((value - 1.0).abs() < 1e-12);
        assert!((a[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn grid_respects_cap() {
        let g = DMatrix::identity(3, 3);
        assert!(svdd_simplex_grid(&g, 0.3, 0.01).is_none());
        let (_, a) = svdd_simplex_grid(&g, 0.34, 0.01).unwrap();
        assert!(a.iter().all(|&x| x <= 0.34 + 1e-12));
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn centered_rows_vanish() {
        let k = DMatrix::from_fn(4, 4, |i, j| ((i * 3 + j * 5) % 7) as f64);
        let kc = double_center(&k);
        for i in 0..4 {
            assert!(kc.row(i).sum().abs() < 1e-12);
            assert!(kc.column(i).sum().abs() < 1e-12);
        }
    }

    #[test]
    fn difference_of_quadratic_is_exact() {
        let x = DMatrix::from_row_slice(1, 2, &[0.3, -0.7]);
        let g = central_difference(|m| m[(0, 0)] * m[(0, 0)] + 3.0 * m[(0, 1)], &x, 1e-5);
        assert!((g[(0, 0)] - 0.6).abs() < 1e-8);
        assert!((g[(0, 1)] - 3.0).abs() < 1e-8);
    }
}
