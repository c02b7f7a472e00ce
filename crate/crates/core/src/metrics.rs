//! Separation-quality metrics.

use crate::error::{Error, Result};
use crate::matrix::{dot, norm2, DenseMatrix};

/// Largest condition number accepted before inverting the reference matrix.
pub const MAX_CONDITION: f64 = 1e12;

/// Exhaustive matching is used up to this many columns.
pub const EXHAUSTIVE_MATCH_LIMIT: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricBundle {
    pub comon_index: f64,
    /// Cosine between truth source `i` and its matched estimate.
    pub per_source_cosine: Vec<f64>,
    /// `column_assignment[i]` is the estimated column matched to truth column `i`.
    pub column_assignment: Vec<usize>,
}

fn l2_normalized_columns(a: &DenseMatrix) -> Result<DenseMatrix> {
    let cols: Vec<Vec<f64>> = a
        .columns()
        .into_iter()
        .map(|c| {
            let n = norm2(&c);
            if n > 0.0 {
                Ok(c.iter().map(|v| v / n).collect())
            } else {
                Err(Error::ZeroVector)
            }
        })
        .collect::<Result<_>>()?;
    DenseMatrix::from_columns(&cols)
}

/// Comon's index between a reference `a` and an estimate `abar`, both
/// square. Columns are scaled to unit ℓ2 norm first; with `D = A⁻¹Ā` the
/// result is
/// `Σ_i|Σ_j|d_ij|-1|² + Σ_j|Σ_i|d_ij|-1|² + Σ_i|Σ_j d_ij²-1| + Σ_j|Σ_i d_ij²-1|`.
///
/// It vanishes exactly when `Ā` is a scaled permutation of `A`. It is not
/// symmetric in its arguments.
pub fn comon_index(a: &DenseMatrix, abar: &DenseMatrix) -> Result<f64> {
    let n = a.rows();
    if a.cols() != n || abar.rows() != n || abar.cols() != n {
        return Err(Error::mismatch(format!(
            "comon index needs two square matrices of one size, got {}x{} and {}x{}",
            a.rows(),
            a.cols(),
            abar.rows(),
            abar.cols()
        )));
    }
    let an = l2_normalized_columns(a)?.to_nalgebra();
    let bn = l2_normalized_columns(abar)?.to_nalgebra();
    let sv = an.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Singular { condition });
    }
    let inv = an.try_inverse().ok_or(Error::Singular { condition })?;
    let d = inv * bn;

    let mut total = 0.0;
    for i in 0..n {
        let abs_sum: f64 = (0..n).map(|j| d[(i, j)].abs()).sum();
        let sq_sum: f64 = (0..n).map(|j| d[(i, j)] * d[(i, j)]).sum();
        total += (abs_sum - 1.0).powi(2) + (sq_sum - 1.0).abs();
    }
    for j in 0..n {
        let abs_sum: f64 = (0..n).map(|i| d[(i, j)].abs()).sum();
        let sq_sum: f64 = (0..n).map(|i| d[(i, j)] * d[(i, j)]).sum();
        total += (abs_sum - 1.0).powi(2) + (sq_sum - 1.0).abs();
    }
    Ok(total)
}

pub fn cosine_similarity(s1: &[f64], s2: &[f64]) -> Result<f64> {
    if s1.len() != s2.len() {
        return Err(Error::mismatch(format!("cosine of vectors of length {} and {}", s1.len(), s2.len())));
    }
    let n1 = norm2(s1);
    let n2 = norm2(s2);
    if n1 == 0.0 || n2 == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot(s1, s2) / (n1 * n2)).clamp(-1.0, 1.0))
}

/// Assignment of estimated columns to truth columns maximizing the summed
/// cosine. Exhaustive up to [`EXHAUSTIVE_MATCH_LIMIT`] columns, greedy on
/// the largest remaining cosine beyond.
pub fn match_columns(a_true: &DenseMatrix, a_hat: &DenseMatrix) -> Result<Vec<usize>> {
    if a_true.rows() != a_hat.rows() || a_true.cols() != a_hat.cols() {
        return Err(Error::mismatch(format!(
            "cannot match {}x{} against {}x{}",
            a_true.rows(),
            a_true.cols(),
            a_hat.rows(),
            a_hat.cols()
        )));
    }
    let truth = a_true.columns();
    let est = a_hat.columns();
    let n = truth.len();
    let mut cos = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            cos[i][j] = cosine_similarity(&truth[i], &est[j])?;
        }
    }
    if n <= EXHAUSTIVE_MATCH_LIMIT {
        Ok(best_permutation(&cos))
    } else {
        Ok(greedy_assignment(&cos))
    }
}

fn best_permutation(cos: &[Vec<f64>]) -> Vec<usize> {
    let n = cos.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_score = f64::NEG_INFINITY;
    // Heap's algorithm; the first permutation reaching the maximum wins.
    let mut c = vec![0usize; n];
    let score = |p: &[usize]| -> f64 { p.iter().enumerate().map(|(i, &j)| cos[i][j]).sum() };
    let s = score(&perm);
    if s > best_score {
        best_score = s;
        best.clone_from(&perm);
    }
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            let s = score(&perm);
            if s > best_score + 1e-15 {
                best_score = s;
                best.clone_from(&perm);
            }
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}

fn greedy_assignment(cos: &[Vec<f64>]) -> Vec<usize> {
    let n = cos.len();
    let mut out = vec![usize::MAX; n];
    let mut used = vec![false; n];
    for _ in 0..n {
        let mut pick = (0, 0, f64::NEG_INFINITY);
        for (i, row) in cos.iter().enumerate() {
            if out[i] != usize::MAX {
                continue;
            }
            for (j, &v) in row.iter().enumerate() {
                if !used[j] && v > pick.2 {
                    pick = (i, j, v);
                }
            }
        }
        out[pick.0] = pick.1;
        used[pick.1] = true;
    }
    out
}

/// Comon index plus per-source cosines of `s_hat` rows against `s_true`
/// rows, after matching the columns of `a_hat` to `a_true`.
pub fn evaluate(
    a_true: &DenseMatrix,
    a_hat: &DenseMatrix,
    s_true: &[Vec<f64>],
    s_hat: &[Vec<f64>],
) -> Result<MetricBundle> {
    let n = a_true.cols();
    if s_true.len() != n || s_hat.len() != n {
        return Err(Error::mismatch(format!(
            "{n} mixing columns but {} true and {} estimated sources",
            s_true.len(),
            s_hat.len()
        )));
    }
    let comon = comon_index(a_true, a_hat)?;
    let assignment = match_columns(a_true, a_hat)?;
    let per_source_cosine = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| cosine_similarity(&s_true[i], &s_hat[j]))
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricBundle { comon_index: comon, per_source_cosine, column_assignment: assignment })
}
