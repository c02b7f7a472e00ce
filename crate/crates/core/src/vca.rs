//! Mixing-matrix estimation by convex-cone vertex identification.
//!
//! Columns of `X = AS` are nonnegative combinations of the columns of `A`.
//! When every source owns a sample where the others vanish, those samples
//! are the edges of the cone that encloses the data. Each column is scored by
//! how badly it is represented as a nonnegative combination of the others
//! (an NNLS residual); the `n` highest-scoring, mutually separated columns are
//! taken as the estimate of `A`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{dot, norm2, DenseMatrix};
use crate::nnls::{self, DEFAULT_TOL};
use crate::signal::{self, Spectrum};

/// `m` mixtures sampled at `p` points; column `j` is a point in `m`-space.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    m: usize,
    p: usize,
    data: Vec<f64>,
    dx: f64,
    origin: f64,
}

impl DataMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>, dx: f64, origin: f64) -> Result<Self> {
        let m = rows.len();
        if m == 0 {
            return Err(Error::mismatch("data matrix needs at least one row"));
        }
        let p = rows[0].len();
        if let Some(bad) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::mismatch(format!("row {bad} has {} samples, expected {p}", rows[bad].len())));
        }
        // Validates the grid and the sample count.
        Spectrum::new(rows[0].clone(), dx, origin)?;
        let data = rows.concat();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("data matrix contains non-finite entries"));
        }
        Ok(Self { m, p, data, dx, origin })
    }

    pub fn from_spectra(spectra: &[Spectrum]) -> Result<Self> {
        let first = spectra.first().ok_or_else(|| Error::mismatch("no spectra given"))?;
        for (i, s) in spectra.iter().enumerate() {
            if s.len() != first.len() || s.dx() != first.dx() || s.origin() != first.origin() {
                return Err(Error::mismatch(format!("spectrum {i} is on a different grid")));
            }
        }
        Self::from_rows(spectra.iter().map(|s| s.values().to_vec()).collect(), first.dx(), first.origin())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.p + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.m).map(|i| self.get(i, j)).collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.m).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn to_spectra(&self) -> Vec<Spectrum> {
        (0..self.m)
            .map(|i| Spectrum::new(self.row(i).to_vec(), self.dx, self.origin).expect("validated grid"))
            .collect()
    }

    pub fn as_matrix(&self) -> DenseMatrix {
        DenseMatrix::new(self.m, self.p, self.data.clone()).expect("validated shape")
    }

    pub fn first_negative(&self) -> Option<(usize, usize)> {
        self.data.iter().position(|&v| v < 0.0).map(|idx| (idx / self.p, idx % self.p))
    }

    /// Sharpens every row with weight `k`. Returns the sharpened matrix and
    /// the number of samples clamped at zero.
    pub fn sharpened(&self, k: f64, clamp_negative: bool) -> Result<(DataMatrix, usize)> {
        if !(k >= 0.0 && k.is_finite()) {
            return Err(Error::domain(format!("sharpening weight must be nonnegative, got {k}")));
        }
        let mut data = self.data.clone();
        let clamped: usize = data
            .par_chunks_mut(self.p)
            .map(|row| signal::sharpen_in_place(row, self.dx, k, clamp_negative))
            .sum();
        Ok((DataMatrix { data, ..self.clone() }, clamped))
    }
}

/// Columns surviving the norm filter, scaled to unit ℓ1 norm.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedColumns {
    m: usize,
    columns: Vec<Vec<f64>>,
    kept_indices: Vec<usize>,
}

impl NormalizedColumns {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn kept_indices(&self) -> &[usize] {
        &self.kept_indices
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnScores {
    pub kept_indices: Vec<usize>,
    pub scores: Vec<f64>,
}

/// Estimated (or reference) mixing matrix with unit ℓ1 columns.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    matrix: DenseMatrix,
    column_indices: Option<Vec<usize>>,
}

impl MixingMatrix {
    /// Builds from nonnegative columns, rescaling each to unit ℓ1 norm.
    pub fn from_columns(columns: &[Vec<f64>], column_indices: Option<Vec<usize>>) -> Result<Self> {
        if let Some(idx) = &column_indices {
            if idx.len() != columns.len() {
                return Err(Error::mismatch("one provenance index per column is required"));
            }
        }
        let mut scaled = Vec::with_capacity(columns.len());
        for (j, c) in columns.iter().enumerate() {
            if c.iter().any(|&v| v < 0.0) {
                return Err(Error::domain(format!("mixing column {j} has negative entries")));
            }
            let s: f64 = c.iter().sum();
            if !(s > 0.0) {
                return Err(Error::domain(format!("mixing column {j} is zero")));
            }
            scaled.push(c.iter().map(|v| v / s).collect::<Vec<_>>());
        }
        Ok(Self { matrix: DenseMatrix::from_columns(&scaled)?, column_indices })
    }

    pub fn from_matrix(matrix: &DenseMatrix) -> Result<Self> {
        Self::from_columns(&matrix.columns(), None)
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn m(&self) -> usize {
        self.matrix.rows()
    }

    pub fn n(&self) -> usize {
        self.matrix.cols()
    }

    pub fn column_indices(&self) -> Option<&[usize]> {
        self.column_indices.as_deref()
    }

    /// True when the columns are independent to a singular value ratio of 1e-8.
    pub fn is_full_column_rank(&self) -> bool {
        self.n() <= self.m() && self.matrix.inverse_condition() > 1e-8
    }
}

/// Drops columns whose ℓ1 norm is at most `drop_tol` times the largest
/// column norm and scales the rest to unit ℓ1 norm.
pub fn normalize_columns(x: &DataMatrix, drop_tol: f64) -> Result<NormalizedColumns> {
    if !(0.0..1.0).contains(&drop_tol) {
        return Err(Error::domain(format!("drop tolerance must lie in [0, 1), got {drop_tol}")));
    }
    let norms: Vec<f64> = (0..x.p()).map(|j| (0..x.m()).map(|i| x.get(i, j).abs()).sum()).collect();
    let largest = norms.iter().copied().fold(0.0, f64::max);
    let cutoff = drop_tol * largest;
    let mut columns = Vec::new();
    let mut kept_indices = Vec::new();
    for (j, &nrm) in norms.iter().enumerate() {
        if nrm > cutoff && nrm > 0.0 {
            columns.push(x.column(j).iter().map(|v| v / nrm).collect());
            kept_indices.push(j);
        }
    }
    if columns.is_empty() {
        return Err(Error::EmptyData);
    }
    Ok(NormalizedColumns { m: x.m(), columns, kept_indices })
}

/// Scores every kept column by `½‖Σ_{j≠k} λ_j x_j - x_k‖²` minimized over
/// `λ >= 0`. Interior columns score zero; cone edges score positive.
pub fn score_columns(xn: &NormalizedColumns) -> Result<ColumnScores> {
    score_with_exclusion(xn, None)
}

/// Like [`score_columns`], but column `k` is also kept out of its own
/// dictionary's near-duplicates: any column within ℓ1 distance `tol` of it.
///
/// Plain scoring gives every member of a group of identical columns a zero
/// score, since each explains the others. Data with a stand-alone peak
/// produce exactly such groups at the cone edges.
pub fn score_columns_distinct(xn: &NormalizedColumns, tol: f64) -> Result<ColumnScores> {
    if !(tol >= 0.0) {
        return Err(Error::domain(format!("duplicate tolerance must be nonnegative, got {tol}")));
    }
    score_with_exclusion(xn, Some(tol))
}

fn score_with_exclusion(xn: &NormalizedColumns, duplicate_tol: Option<f64>) -> Result<ColumnScores> {
    let p = xn.len();
    if p < 3 {
        return Err(Error::mismatch(format!("scoring needs at least 3 columns, got {p}")));
    }
    let scores = (0..p)
        .into_par_iter()
        .map(|k| {
            let target = &xn.columns[k];
            let dictionary: Vec<&[f64]> = xn
                .columns
                .iter()
                .enumerate()
                .filter(|&(j, c)| {
                    j != k && duplicate_tol.is_none_or(|tol| l1_distance(c, target) > tol)
                })
                .map(|(_, c)| c.as_slice())
                .collect();
            let sol = nnls::solve_columns(&dictionary, target, DEFAULT_TOL).map_err(|e| Error::Scoring {
                column: xn.kept_indices[k],
                source: Box::new(e),
            })?;
            Ok(0.5 * sol.residual_norm * sol.residual_norm)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ColumnScores { kept_indices: xn.kept_indices.clone(), scores })
}

fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn angle_deg(a: &[f64], b: &[f64]) -> f64 {
    let c = dot(a, b) / (norm2(a) * norm2(b));
    c.clamp(-1.0, 1.0).acos().to_degrees()
}

/// Greedy selection in descending score order (ties to the lower column
/// index), skipping candidates within `min_angle_deg` of a chosen column.
pub fn select_vertices(
    xn: &NormalizedColumns,
    scores: &ColumnScores,
    n: usize,
    min_angle_deg: f64,
) -> Result<MixingMatrix> {
    if n < 2 {
        return Err(Error::domain(format!("at least two sources are required, got {n}")));
    }
    if !(0.0..90.0).contains(&min_angle_deg) {
        return Err(Error::domain(format!("minimum angle must lie in [0, 90), got {min_angle_deg}")));
    }
    if scores.scores.len() != xn.len() || scores.kept_indices != xn.kept_indices {
        return Err(Error::mismatch("scores do not belong to these columns"));
    }
    if xn.len() <= n {
        return Err(Error::Selection { found: xn.len(), needed: n + 1 });
    }
    let mut order: Vec<usize> = (0..xn.len()).collect();
    order.sort_by(|&a, &b| scores.scores[b].total_cmp(&scores.scores[a]).then(a.cmp(&b)));

    let mut chosen: Vec<usize> = Vec::with_capacity(n);
    for pos in order {
        let cand = &xn.columns[pos];
        if chosen.iter().all(|&c| angle_deg(cand, &xn.columns[c]) >= min_angle_deg) {
            chosen.push(pos);
            if chosen.len() == n {
                break;
            }
        }
    }
    if chosen.len() < n {
        return Err(Error::Selection { found: chosen.len(), needed: n });
    }
    let cols: Vec<Vec<f64>> = chosen.iter().map(|&c| xn.columns[c].clone()).collect();
    let idx = chosen.iter().map(|&c| xn.kept_indices[c]).collect();
    MixingMatrix::from_columns(&cols, Some(idx))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateOptions {
    pub drop_tol: f64,
    pub min_angle_deg: f64,
    /// ℓ1 radius for near-duplicate exclusion while scoring; `None` scores
    /// against every other column.
    pub duplicate_tol: Option<f64>,
    /// Sharpening weight applied to every row first (the sharpened variant).
    pub sharpen: Option<f64>,
    pub clamp_negative: bool,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            drop_tol: 1e-6,
            min_angle_deg: 2.0,
            duplicate_tol: Some(1e-9),
            sharpen: None,
            clamp_negative: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MixingEstimate {
    pub mixing: MixingMatrix,
    pub scores: ColumnScores,
    /// Samples clamped at zero by the sharpening step.
    pub clamped: usize,
}

/// Normalize, score and select: the full cone estimator, optionally on
/// sharpened rows.
pub fn estimate_mixing(x: &DataMatrix, n: usize, opts: &EstimateOptions) -> Result<MixingEstimate> {
    if n < 2 {
        return Err(Error::domain(format!("at least two sources are required, got {n}")));
    }
    if x.m() < 2 {
        return Err(Error::mismatch(format!("need at least two mixtures, got {}", x.m())));
    }
    if x.p() <= x.m() {
        return Err(Error::mismatch(format!("need more samples than mixtures, got {}x{}", x.m(), x.p())));
    }
    let (work, clamped) = match opts.sharpen {
        Some(k) => x.sharpened(k, opts.clamp_negative)?,
        None => (x.clone(), 0),
    };
    if let Some((row, column)) = work.first_negative() {
        return Err(Error::NegativeData { row, column });
    }
    let xn = normalize_columns(&work, opts.drop_tol)?;
    let scores = match opts.duplicate_tol {
        Some(tol) => score_columns_distinct(&xn, tol)?,
        None => score_columns(&xn)?,
    };
    let mixing = select_vertices(&xn, &scores, n, opts.min_angle_deg)?;
    Ok(MixingEstimate { mixing, scores, clamped })
}
