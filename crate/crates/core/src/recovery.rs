//! Source reconstruction from the mixtures and an estimated mixing matrix.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::metrics::{self, MetricBundle};
use crate::nnls::{self, DEFAULT_TOL};
use crate::signal::Spectrum;
use crate::vca::{estimate_mixing, ColumnScores, DataMatrix, EstimateOptions, MixingMatrix};

/// Smallest accepted singular value ratio on the NNLS path.
pub const RANK_TOL: f64 = 1e-8;

/// `μ = DEFAULT_MU_SCALE · ‖Aᵀb‖∞` when no explicit ℓ1 weight is given.
pub const DEFAULT_MU_SCALE: f64 = 1e-6;

const L1_MAX_ITER: usize = 20_000;
const L1_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RecoveryMode {
    /// NNLS when there are at least as many mixtures as sources, ℓ1 otherwise.
    #[default]
    Auto,
    Nnls,
    L1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Cone estimate on the raw mixtures.
    Nn,
    /// Cone estimate on sharpened mixtures.
    Nnp,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Nn => "NN",
            Method::Nnp => "NNP",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SeparationReport {
    pub estimated_a: MixingMatrix,
    pub estimated_s: Vec<Spectrum>,
    pub scores: ColumnScores,
    pub method: Method,
    /// Sharpening weight; 0 for the raw method.
    pub weight_k: f64,
    pub clamped: usize,
    pub metrics: Option<MetricBundle>,
}

/// Solves one nonnegative problem per column of `x` and stacks the
/// solutions as rows. `mu` only matters on the ℓ1 path.
pub fn recover_sources(
    x: &DataMatrix,
    a: &MixingMatrix,
    mode: RecoveryMode,
    mu: Option<f64>,
) -> Result<Vec<Spectrum>> {
    let (m, n) = (a.m(), a.n());
    if x.m() != m {
        return Err(Error::mismatch(format!("mixing matrix has {m} rows but there are {} mixtures", x.m())));
    }
    if let Some(mu) = mu {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::domain(format!("mu must be positive, got {mu}")));
        }
    }
    let use_nnls = match mode {
        RecoveryMode::Auto => m >= n,
        RecoveryMode::Nnls => true,
        RecoveryMode::L1 => false,
    };
    if use_nnls && !a.is_full_column_rank() {
        let ratio = if n > m { 0.0 } else { a.matrix().inverse_condition() };
        return Err(Error::RankDeficient { ratio });
    }
    let columns = a.matrix().columns();
    let refs: Vec<&[f64]> = columns.iter().map(Vec::as_slice).collect();

    let solved: Vec<Vec<f64>> = (0..x.p())
        .into_par_iter()
        .map(|j| {
            let b = x.column(j);
            if use_nnls {
                Ok(nnls::solve_columns(&refs, &b, DEFAULT_TOL)?.x)
            } else {
                let scale = a.matrix().tmatvec(&b)?.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
                if scale == 0.0 {
                    return Ok(vec![0.0; n]);
                }
                let weight = mu.unwrap_or(DEFAULT_MU_SCALE * scale);
                nnls::bregman_l1(a.matrix(), &b, weight, L1_MAX_ITER, L1_TOL)
            }
        })
        .collect::<Result<_>>()?;

    (0..n)
        .map(|i| Spectrum::new(solved.iter().map(|col| col[i].max(0.0)).collect(), x.dx(), x.origin()))
        .collect()
}

/// `Â⁺X`. Diagnostic only: rows may contain negative values.
pub fn pseudo_inverse_sources(x: &DataMatrix, a: &MixingMatrix) -> Result<DenseMatrix> {
    if x.m() != a.m() {
        return Err(Error::mismatch(format!("mixing matrix has {} rows but there are {} mixtures", a.m(), x.m())));
    }
    let pinv = a
        .matrix()
        .to_nalgebra()
        .pseudo_inverse(f64::EPSILON * a.m().max(a.n()) as f64)
        .map_err(|e| Error::domain(e.to_string()))?;
    DenseMatrix::from_nalgebra(&pinv)?.matmul(&x.as_matrix())
}

/// Ground truth used to score a separation.
#[derive(Debug, Clone, Copy)]
pub struct Truth<'a> {
    pub mixing: &'a DenseMatrix,
    pub sources: &'a [Spectrum],
}

/// Estimates the mixing matrix (on sharpened rows when `weight_k` is
/// given), recovers the sources from the original mixtures and, with a
/// truth, scores the result.
pub fn separate(
    x: &DataMatrix,
    n: usize,
    weight_k: Option<f64>,
    opts: &EstimateOptions,
    mode: RecoveryMode,
    truth: Option<Truth<'_>>,
) -> Result<SeparationReport> {
    let opts = EstimateOptions { sharpen: weight_k, ..opts.clone() };
    let est = estimate_mixing(x, n, &opts)?;
    let sources = recover_sources(x, &est.mixing, mode, None)?;
    let metrics = match truth {
        Some(t) => {
            let s_true: Vec<Vec<f64>> = t.sources.iter().map(|s| s.values().to_vec()).collect();
            let s_hat: Vec<Vec<f64>> = sources.iter().map(|s| s.values().to_vec()).collect();
            Some(metrics::evaluate(t.mixing, est.mixing.matrix(), &s_true, &s_hat)?)
        }
        None => None,
    };
    Ok(SeparationReport {
        estimated_a: est.mixing,
        estimated_s: sources,
        scores: est.scores,
        method: if weight_k.is_some() { Method::Nnp } else { Method::Nn },
        weight_k: weight_k.unwrap_or(0.0),
        clamped: est.clamped,
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn data(a: &DenseMatrix, s: &DenseMatrix) -> DataMatrix {
        let x = a.matmul(s).unwrap();
        DataMatrix::from_rows((0..x.rows()).map(|i| x.row(i).to_vec()).collect(), 0.5, 0.0).unwrap()
    }

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DenseMatrix {
        DenseMatrix::new(r, c, (0..r * c).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn exact_system_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = MixingMatrix::from_columns(&[vec![0.6, 0.4], vec![0.3, 0.7]], None).unwrap();
        let s = random(&mut rng, 2, 50);
        let x = data(a.matrix(), &s);
        let got = recover_sources(&x, &a, RecoveryMode::Auto, None).unwrap();
        for i in 0..2 {
            for (u, v) in got[i].values().iter().zip(s.row(i)) {
                assert!((u - v).abs() <= 1e-8);
            }
        }
        assert_eq!(got[0].dx(), 0.5);
    }

    #[test]
    fn duplicated_column_is_rank_deficient() {
        let a = MixingMatrix::from_columns(&[vec![0.5, 0.5], vec![1.0, 1.0]], None).unwrap();
        let x = DataMatrix::from_rows(vec![vec![1.0; 4], vec![1.0; 4]], 1.0, 0.0).unwrap();
        assert!(matches!(
            recover_sources(&x, &a, RecoveryMode::Nnls, None),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn reconstruction_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = MixingMatrix::from_matrix(&random(&mut rng, 4, 3)).unwrap();
        let s = random(&mut rng, 3, 80);
        let x = data(a.matrix(), &s);
        let got = recover_sources(&x, &a, RecoveryMode::Auto, None).unwrap();
        let shat = DenseMatrix::from_rows(&got.iter().map(|g| g.values().to_vec()).collect::<Vec<_>>()).unwrap();
        let rebuilt = a.matrix().matmul(&shat).unwrap();
        let xm = x.as_matrix();
        let diff: f64 =
            xm.as_slice().iter().zip(rebuilt.as_slice()).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
        assert!(diff / xm.frobenius_norm() <= 1e-8);
    }

    #[test]
    fn outputs_are_nonnegative_on_inconsistent_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let a = MixingMatrix::from_matrix(&random(&mut rng, 3, 2)).unwrap();
        let x = DataMatrix::from_rows((0..3).map(|_| (0..40).map(|_| rng.random_range(0.0..1.0)).collect()).collect(), 1.0, 0.0)
            .unwrap();
        for mode in [RecoveryMode::Nnls, RecoveryMode::L1] {
            let got = recover_sources(&x, &a, mode, None).unwrap();
            assert!(got.iter().all(Spectrum::is_nonnegative));
        }
        let raw = pseudo_inverse_sources(&x, &a).unwrap();
        assert_eq!((raw.rows(), raw.cols()), (2, 40));
    }

    #[test]
    fn permuting_mixing_columns_permutes_sources() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let a = random(&mut rng, 3, 3);
        let s = random(&mut rng, 3, 30);
        let x = data(&a, &s);
        let base = recover_sources(&x, &MixingMatrix::from_matrix(&a).unwrap(), RecoveryMode::Auto, None).unwrap();
        let perm = [2, 0, 1];
        let ap = MixingMatrix::from_matrix(&a.permute_columns(&perm).unwrap()).unwrap();
        let other = recover_sources(&x, &ap, RecoveryMode::Auto, None).unwrap();
        for (j, &p) in perm.iter().enumerate() {
            for (u, v) in other[j].values().iter().zip(base[p].values()) {
                assert!((u - v).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn underdetermined_uses_sparse_path() {
        // Two mixtures, three sources; each column uses a single source.
        let a = MixingMatrix::from_columns(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]], None).unwrap();
        let mut s = DenseMatrix::zeros(3, 9);
        for j in 0..9 {
            s.set(j % 3, j, 1.0 + j as f64 * 0.1);
        }
        let x = data(a.matrix(), &s);
        let got = recover_sources(&x, &a, RecoveryMode::Auto, None).unwrap();
        let shat = DenseMatrix::from_rows(&got.iter().map(|g| g.values().to_vec()).collect::<Vec<_>>()).unwrap();
        let rebuilt = a.matrix().matmul(&shat).unwrap();
        let xm = x.as_matrix();
        for (u, v) in xm.as_slice().iter().zip(rebuilt.as_slice()) {
            assert!((u - v).abs() <= 1e-3);
        }
        assert!(matches!(recover_sources(&x, &a, RecoveryMode::Nnls, None), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn separate_reports_method() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let a = random(&mut rng, 2, 2);
        let mut s = random(&mut rng, 2, 40);
        for r in 0..2 {
            s.set(r, 3, if r == 0 { 1.0 } else { 0.0 });
            s.set(r, 7, if r == 1 { 1.0 } else { 0.0 });
        }
        let x = data(&a, &s);
        let sources: Vec<Spectrum> = (0..2).map(|i| Spectrum::new(s.row(i).to_vec(), 0.5, 0.0).unwrap()).collect();
        let truth = Truth { mixing: &a, sources: &sources };
        let rep = separate(&x, 2, None, &EstimateOptions::default(), RecoveryMode::Auto, Some(truth)).unwrap();
        assert_eq!(rep.method, Method::Nn);
        assert_eq!(rep.weight_k, 0.0);
        let m = rep.metrics.unwrap();
        assert!(m.comon_index <= 1e-8);
        assert!(m.per_source_cosine.iter().all(|&c| c >= 1.0 - 1e-8));
    }
}
