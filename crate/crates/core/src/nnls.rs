//! Nonnegative least squares (active set) and nonnegative ℓ1-regularized
//! least squares (linearized Bregman / shrinkage iteration).

use crate::error::{Error, Result};
pub use crate::matrix::DenseMatrix;
use crate::matrix::{dot, lstsq_columns, norm2};

/// Default gradient tolerance, relative to `‖Aᵀb‖∞`.
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct NnlsSolution {
    pub x: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Minimizes `½‖Ax - b‖²` subject to `x >= 0`.
///
/// `tol` is relative: a coordinate may enter the free set only while its
/// negative gradient exceeds `tol · ‖Aᵀb‖∞`.
pub fn nnls_solve(a: &DenseMatrix, b: &[f64], tol: f64) -> Result<NnlsSolution> {
    if b.len() != a.rows() {
        return Err(Error::mismatch(format!("nnls: A has {} rows, b has {}", a.rows(), b.len())));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::domain(format!("nnls tolerance must be positive, got {tol}")));
    }
    let columns = a.columns();
    let refs: Vec<&[f64]> = columns.iter().map(Vec::as_slice).collect();
    solve_columns(&refs, b, tol)
}

/// Lawson-Hanson active set iteration over a set of column slices.
pub(crate) fn solve_columns(cols: &[&[f64]], b: &[f64], rel_tol: f64) -> Result<NnlsSolution> {
    let n = cols.len();
    let mut x = vec![0.0; n];
    let scale = cols.iter().map(|c| dot(c, b).abs()).fold(0.0, f64::max);
    if n == 0 || scale == 0.0 {
        return Ok(NnlsSolution { x, residual_norm: norm2(b), iterations: 0 });
    }
    let tol = rel_tol * scale;
    let max_outer = 10 * n;
    let max_inner = 3 * n;

    let mut free = vec![false; n];
    let mut blocked = vec![false; n];
    let mut set: Vec<usize> = Vec::new();
    let mut residual = b.to_vec();
    let mut outer = 0;

    loop {
        // Most positive component of -∇ = Aᵀ(b - Ax); ties go to the lowest index.
        let mut pick = None;
        let mut best = tol;
        for j in 0..n {
            if free[j] || blocked[j] {
                continue;
            }
            let w = dot(cols[j], &residual);
            if w > best {
                best = w;
                pick = Some(j);
            }
        }
        let Some(entering) = pick else { break };
        outer += 1;
        if outer > max_outer {
            return Err(Error::IterationLimit(max_outer));
        }
        free[entering] = true;
        set.push(entering);

        let mut inner = 0;
        let mut accepted = true;
        loop {
            let sub: Vec<&[f64]> = set.iter().map(|&i| cols[i]).collect();
            let z = lstsq_columns(&sub, b);
            if z.iter().all(|&v| v > 0.0) {
                for (&i, &zi) in set.iter().zip(&z) {
                    x[i] = zi;
                }
                break;
            }
            if inner == 0 && *z.last().unwrap() <= 0.0 {
                // The entering column cannot carry weight numerically; skip it
                // until some other coordinate moves.
                set.pop();
                free[entering] = false;
                blocked[entering] = true;
                accepted = false;
                break;
            }
            inner += 1;
            if inner > max_inner {
                return Err(Error::IterationLimit(max_inner));
            }
            let mut alpha = f64::INFINITY;
            let mut leaving = set[0];
            for (&i, &zi) in set.iter().zip(&z) {
                if zi <= 0.0 {
                    let t = x[i] / (x[i] - zi);
                    if t < alpha {
                        alpha = t;
                        leaving = i;
                    }
                }
            }
            for (&i, &zi) in set.iter().zip(&z) {
                x[i] += alpha * (zi - x[i]);
            }
            x[leaving] = 0.0;
            set.retain(|&i| {
                if x[i] <= 0.0 {
                    x[i] = 0.0;
                    free[i] = false;
                    false
                } else {
                    true
                }
            });
        }

        if accepted {
            blocked.iter_mut().for_each(|b| *b = false);
        }
        residual.copy_from_slice(b);
        for &i in &set {
            for (r, &c) in residual.iter_mut().zip(cols[i]) {
                *r -= x[i] * c;
            }
        }
    }

    Ok(NnlsSolution { residual_norm: norm2(&residual), x, iterations: outer })
}

/// Iterates and objective values of a shrinkage run.
#[derive(Debug, Clone)]
pub struct L1Trace {
    pub x: Vec<f64>,
    /// `½‖Ax - b‖² + μ‖x‖₁` after every iteration.
    pub objective: Vec<f64>,
    pub iterations: usize,
}

/// Approximate minimizer of `½‖Ax - b‖² + μ‖x‖₁` over `x >= 0`.
pub fn bregman_l1(a: &DenseMatrix, b: &[f64], mu: f64, max_iter: usize, tol: f64) -> Result<Vec<f64>> {
    Ok(bregman_l1_trace(a, b, mu, max_iter, tol)?.x)
}

/// Same iteration as [`bregman_l1`], keeping the objective history.
///
/// Each step linearizes the data term around the current iterate,
/// `v = u + δ Aᵀ(b - Au)`, then applies the shrinkage and the projection onto
/// the nonnegative orthant, `u = max(v - δμ, 0)`, with `δ = 1/‖A‖₂²`. The run
/// stops once an iteration moves `u` by at most `tol · ‖u‖∞` in every
/// coordinate. The residual alone is a poor signal on wide systems, where it
/// settles long before the iterate stops drifting along the null space.
pub fn bregman_l1_trace(a: &DenseMatrix, b: &[f64], mu: f64, max_iter: usize, tol: f64) -> Result<L1Trace> {
    if b.len() != a.rows() {
        return Err(Error::mismatch(format!("bregman: A has {} rows, b has {}", a.rows(), b.len())));
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::domain(format!("mu must be positive, got {mu}")));
    }
    let lipschitz = spectral_norm_sq(a);
    if lipschitz == 0.0 {
        return Err(Error::domain("bregman: A is the zero matrix"));
    }
    let step = 1.0 / lipschitz;
    let objective_of = |u: &[f64], r: f64| 0.5 * r * r + mu * u.iter().sum::<f64>();

    let mut u = vec![0.0; a.cols()];
    let mut res = residual(a, &u, b)?;
    let mut objective = Vec::new();
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        let g = a.tmatvec(&res)?;
        let mut moved = 0.0f64;
        let mut size = 0.0f64;
        for (ui, gi) in u.iter_mut().zip(&g) {
            let next = (*ui + step * gi - step * mu).max(0.0);
            moved = moved.max((next - *ui).abs());
            size = size.max(next);
            *ui = next;
        }
        res = residual(a, &u, b)?;
        objective.push(objective_of(&u, norm2(&res)));
        if moved <= tol * size {
            break;
        }
    }
    Ok(L1Trace { x: u, objective, iterations })
}

fn residual(a: &DenseMatrix, u: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let au = a.matvec(u)?;
    Ok(b.iter().zip(au).map(|(bi, ai)| bi - ai).collect())
}

/// Largest eigenvalue of `AᵀA` by power iteration.
pub(crate) fn spectral_norm_sq(a: &DenseMatrix) -> f64 {
    let n = a.cols();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * (i % 7) as f64).collect();
    let mut lambda = 0.0;
    for _ in 0..2000 {
        let nv = norm2(&v);
        if nv == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        // matvec/tmatvec cannot fail: v has a.cols() entries.
        let av = a.matvec(&v).unwrap();
        let next = a.tmatvec(&av).unwrap();
        let est = dot(&v, &next);
        v = next;
        if (est - lambda).abs() <= 1e-14 * est {
            return est;
        }
        lambda = est;
    }
    lambda
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Projected gradient with step `1/‖A‖_F²`, run until the iterate stops
    /// moving or 10⁶ iterations. Test oracle only.
    fn projected_gradient(a: &DenseMatrix, b: &[f64]) -> Vec<f64> {
        let step = 1.0 / a.frobenius_norm().powi(2);
        let mut x = vec![0.0; a.cols()];
        for _ in 0..1_000_000 {
            let ax = a.matvec(&x).unwrap();
            let r: Vec<f64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
            let g = a.tmatvec(&r).unwrap();
            let mut moved = 0.0f64;
            for (xi, gi) in x.iter_mut().zip(&g) {
                let nx = (*xi - step * gi).max(0.0);
                moved = moved.max((nx - *xi).abs());
                *xi = nx;
            }
            if moved < 1e-17 {
                break;
            }
        }
        x
    }

    fn random_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DenseMatrix {
        DenseMatrix::new(m, n, (0..m * n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn kkt_violation(a: &DenseMatrix, b: &[f64], x: &[f64]) -> f64 {
        let ax = a.matvec(x).unwrap();
        let r: Vec<f64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
        let g = a.tmatvec(&r).unwrap();
        x.iter()
            .zip(&g)
            .map(|(&xi, &gi)| if xi > 0.0 { gi.abs() } else { (-gi).max(0.0) })
            .fold(0.0, f64::max)
    }

    #[test]
    fn identity_systems() {
        let id = DenseMatrix::identity(2);
        let s = nnls_solve(&id, &[1.0, 2.0], DEFAULT_TOL).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-14 && (s.x[1] - 2.0).abs() < 1e-14, "{:?}", s.x);
        assert!(s.residual_norm < 1e-14);
        let s = nnls_solve(&id, &[1.0, -2.0], DEFAULT_TOL).unwrap();
        assert_eq!(s.x, vec![1.0, 0.0]);
        assert!((s.residual_norm - 2.0).abs() < 1e-15);
    }

    #[test]
    fn input_validation() {
        let id = DenseMatrix::identity(2);
        assert!(matches!(nnls_solve(&id, &[1.0], DEFAULT_TOL), Err(Error::DimensionMismatch(_))));
        assert!(nnls_solve(&id, &[1.0, 1.0], 0.0).is_err());
        assert!(bregman_l1(&id, &[1.0], 1.0, 10, 1e-9).is_err());
        assert!(bregman_l1(&id, &[1.0, 1.0], 0.0, 10, 1e-9).is_err());
        assert!(bregman_l1(&DenseMatrix::zeros(2, 2), &[1.0, 1.0], 1.0, 10, 1e-9).is_err());
    }

    #[test]
    fn zero_column_stays_at_zero() {
        let a = DenseMatrix::from_columns(&[vec![1.0, 0.0, 1.0], vec![0.0; 3], vec![0.0, 1.0, 1.0]]).unwrap();
        let s = nnls_solve(&a, &[1.0, 2.0, 3.0], DEFAULT_TOL).unwrap();
        assert_eq!(s.x[1], 0.0);
        assert!((s.x[0] - 1.0).abs() < 1e-12 && (s.x[2] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn random_six_by_three_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(6_3);
        let a = random_matrix(&mut rng, 6, 3);
        let b: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s = nnls_solve(&a, &b, DEFAULT_TOL).unwrap();
        let oracle = projected_gradient(&a, &b);
        for (x, o) in s.x.iter().zip(&oracle) {
            assert!((x - o).abs() <= 1e-6, "{:?} vs {:?}", s.x, oracle);
        }
    }

    #[test]
    fn kkt_and_projection_bound_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let n = rng.random_range(1..=6);
            let m = rng.random_range(n..=8);
            let a = random_matrix(&mut rng, m, n);
            let b: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
            let s = nnls_solve(&a, &b, DEFAULT_TOL).unwrap();
            assert!(s.x.iter().all(|&v| v >= 0.0));
            assert!(kkt_violation(&a, &b, &s.x) <= 1e-8);

            let cols = a.columns();
            let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
            let ls = lstsq_columns(&refs, &b);
            let clipped: Vec<f64> = ls.iter().map(|v| v.max(0.0)).collect();
            let ax = a.matvec(&clipped).unwrap();
            let clipped_res = norm2(&ax.iter().zip(&b).map(|(p, q)| p - q).collect::<Vec<_>>());
            assert!(s.residual_norm <= clipped_res + 1e-12);
        }
    }

    #[test]
    fn deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let a = random_matrix(&mut rng, 7, 5);
        let b: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
        assert_eq!(nnls_solve(&a, &b, DEFAULT_TOL).unwrap(), nnls_solve(&a, &b, DEFAULT_TOL).unwrap());
    }

    #[test]
    fn wide_dictionary_with_duplicates() {
        // Many collinear columns, as in cone scoring.
        let mut cols = Vec::new();
        for i in 0..40 {
            let t = (i % 10) as f64 / 9.0;
            cols.push(vec![t, 1.0 - t, 0.5]);
        }
        let a = DenseMatrix::from_columns(&cols).unwrap();
        let s = nnls_solve(&a, &[0.3, 0.7, 0.5], DEFAULT_TOL).unwrap();
        assert!(s.residual_norm < 1e-10);
        let s = nnls_solve(&a, &[1.0, 0.0, 0.0], DEFAULT_TOL).unwrap();
        assert!(kkt_violation(&a, &[1.0, 0.0, 0.0], &s.x) < 1e-8);
    }

    #[test]
    fn shrinkage_on_identity() {
        let x = bregman_l1(&DenseMatrix::identity(2), &[3.0, 0.5], 1.0, 1000, 1e-12).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-9 && x[1] == 0.0, "{x:?}");
        let z = bregman_l1(&DenseMatrix::identity(3), &[0.0; 3], 1.0, 1000, 1e-12).unwrap();
        assert_eq!(z, vec![0.0; 3]);
    }

    /// Vertices of `{u >= 0 : Au = b}` for a 3-row `A`: every 3-column basis
    /// with a nonnegative solution. Returns the vertex of least `Σu` with its
    /// support, after checking that no other vertex ties with it.
    fn least_l1_vertex(a: &DenseMatrix, b: &[f64]) -> (Vec<usize>, Vec<f64>) {
        let n = a.cols();
        let mut best: Option<(f64, Vec<usize>, Vec<f64>)> = None;
        let mut runner_up = f64::INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let sub = DenseMatrix::from_columns(&[a.column(i), a.column(j), a.column(k)]).unwrap();
                    let Some(inv) = sub.to_nalgebra().try_inverse() else { continue };
                    let z = inv * nalgebra::DVector::from_column_slice(b);
                    if z.iter().any(|&v| v < -1e-12) {
                        continue;
                    }
                    let support: Vec<usize> =
                        [i, j, k].into_iter().zip(z.iter()).filter(|(_, &v)| v > 1e-12).map(|(c, _)| c).collect();
                    let cost: f64 = z.iter().sum();
                    if best.as_ref().is_some_and(|(_, s, _)| *s == support) {
                        continue;
                    }
                    match &best {
                        Some((c, _, _)) if cost >= *c => runner_up = runner_up.min(cost),
                        _ => {
                            if let Some((c, _, _)) = &best {
                                runner_up = runner_up.min(*c);
                            }
                            let mut x = vec![0.0; n];
                            for (&c, &v) in [i, j, k].iter().zip(z.iter()) {
                                x[c] = v.max(0.0);
                            }
                            best = Some((cost, support, x));
                        }
                    }
                }
            }
        }
        let (cost, support, x) = best.unwrap();
        assert!(runner_up > cost + 1e-6, "least-l1 vertex is not unique");
        (support, x)
    }

    /// `max_{j∉S} a_jᵀ A_S (A_SᵀA_S)⁻¹ 1`.
    fn dual_certificate(a: &DenseMatrix, support: &[usize]) -> f64 {
        let sub = DenseMatrix::from_columns(&support.iter().map(|&c| a.column(c)).collect::<Vec<_>>()).unwrap();
        let s = sub.to_nalgebra();
        let gram = s.transpose() * &s;
        let dir = &s * gram.try_inverse().unwrap() * nalgebra::DVector::from_element(support.len(), 1.0);
        (0..a.cols())
            .filter(|c| !support.contains(c))
            .map(|c| dot(&a.column(c), dir.as_slice()))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn sparse_recovery_matches_support_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(2026);
        let a = random_matrix(&mut rng, 3, 6);
        let mut truth = vec![0.0; 6];
        truth[1] = 0.8;
        truth[4] = 1.3;
        let b = a.matvec(&truth).unwrap();

        // Every 2-column support, NNLS on that support.
        let mut exact = Vec::new();
        for i in 0..6 {
            for j in i + 1..6 {
                let sub = DenseMatrix::from_columns(&[a.column(i), a.column(j)]).unwrap();
                let s = nnls_solve(&sub, &b, DEFAULT_TOL).unwrap();
                if s.residual_norm < 1e-10 && s.x.iter().all(|&v| v > 0.0) {
                    exact.push((vec![i, j], s.x));
                }
            }
        }
        assert_eq!(exact.len(), 1);
        let (support, vals) = &exact[0];
        // Small μ drives the solution toward the least-ℓ1 nonnegative
        // solution, so the sparse one must be that vertex.
        let (lp_support, _) = least_l1_vertex(&a, &b);
        assert_eq!(&lp_support, support);
        // The penalized problem keeps that support for small μ only if
        // no outside column correlates with the support's dual certificate.
        assert!(dual_certificate(&a, support) < 1.0 - 1e-3);

        let x = bregman_l1(&a, &b, 1e-4, 2_000_000, 1e-15).unwrap();
        let found: Vec<usize> = (0..6).filter(|&k| x[k] > 0.0).collect();
        assert_eq!(&found, support, "{x:?}");
        assert!((x[support[0]] - vals[0]).abs() < 1e-3 && (x[support[1]] - vals[1]).abs() < 1e-3, "{x:?}");
    }

    #[test]
    fn objective_non_increasing_after_burn_in() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_matrix(&mut rng, 5, 8);
        let b: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..1.0)).collect();
        let trace = bregman_l1_trace(&a, &b, 0.01, 5000, 0.0).unwrap();
        let start = trace.objective.len() / 10;
        for w in trace.objective[start..].windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-15, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn small_mu_approaches_nnls() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let a = random_matrix(&mut rng, 8, 4);
            let b: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let nn = nnls_solve(&a, &b, DEFAULT_TOL).unwrap();
            let atb = a.tmatvec(&b).unwrap().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let x = bregman_l1(&a, &b, 1e-6 * atb, 1_000_000, 1e-15).unwrap();
            let gap = x.iter().zip(&nn.x).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            assert!(gap <= 1e-3, "gap {gap}");
        }
    }

    #[test]
    fn power_iteration_estimates_spectral_norm() {
        let a = DenseMatrix::from_rows(&[vec![3.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!((spectral_norm_sq(&a) - 9.0).abs() < 1e-9);
    }
}
