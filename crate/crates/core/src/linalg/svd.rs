//! Truncated singular value decomposition.
//!
//! Two routes share one contract. Small problems (`min(m, n) ≤ 64`) take the
//! full eigendecomposition of the smaller Gram matrix with cyclic Jacobi.
//! Larger problems use block subspace iteration with re-orthonormalization
//! and a Rayleigh–Ritz step each sweep; the block carries a few extra
//! columns so the convergence rate is governed by `σ_{b+1}/σ_k`.
//!
//! Singular values are always recomputed as `‖A v_i‖` rather than taken from
//! the Gram eigenvalues, which keeps the small ones accurate.

use crate::error::{Error, Result};
use crate::rng::{entry_uniform, tags};

use super::matrix::{dot, DenseMatrix};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10_000;
/// Largest `min(m, n)` handled by the Gram/Jacobi route under [`SvdMethod::Auto`].
pub const GRAM_CUTOFF: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvdMethod {
    /// Gram/Jacobi up to [`GRAM_CUTOFF`], subspace iteration above.
    Auto,
    Subspace,
    Gram,
}

#[derive(Debug, Clone, Copy)]
pub struct SvdOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub method: SvdMethod,
    /// Seed of the starting subspace.
    pub seed: u64,
}

impl Default for SvdOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            method: SvdMethod::Auto,
            seed: 0,
        }
    }
}

/// Rank-`k` factorization `U diag(σ) Vᵀ`.
#[derive(Debug, Clone)]
pub struct RankKApprox {
    pub k: usize,
    /// `m × k`, orthonormal columns.
    pub left_vectors: DenseMatrix,
    /// Descending, non-negative.
    pub singular_values: Vec<f64>,
    /// `n × k`, orthonormal columns.
    pub right_vectors: DenseMatrix,
    /// Subspace sweeps performed; zero for the Gram route.
    pub iterations: usize,
}

impl RankKApprox {
    /// `U diag(σ) Vᵀ` as a dense `m × n` matrix.
    pub fn materialize(&self) -> DenseMatrix {
        let m = self.left_vectors.rows();
        let n = self.right_vectors.rows();
        let mut out = DenseMatrix::zeros(m, n);
        for i in 0..m {
            let u = self.left_vectors.row(i);
            let row = out.row_mut(i);
            for j in 0..n {
                let v = self.right_vectors.row(j);
                let mut acc = 0.0;
                for l in 0..self.k {
                    acc += u[l] * self.singular_values[l] * v[l];
                }
                row[j] = acc;
            }
        }
        out
    }

    fn transposed(self) -> Self {
        Self {
            k: self.k,
            left_vectors: self.right_vectors,
            singular_values: self.singular_values,
            right_vectors: self.left_vectors,
            iterations: self.iterations,
        }
    }
}

/// Best rank-`k` approximation of `a` with the default method and seed.
pub fn truncated_svd(a: &DenseMatrix, k: usize, tol: f64, max_iter: usize) -> Result<RankKApprox> {
    truncated_svd_with(
        a,
        k,
        &SvdOptions {
            tol,
            max_iter,
            ..SvdOptions::default()
        },
    )
}

pub fn truncated_svd_with(a: &DenseMatrix, k: usize, opts: &SvdOptions) -> Result<RankKApprox> {
    let (m, n) = a.shape();
    let small = m.min(n);
    if k == 0 || k > small {
        return Err(Error::Dimension(format!(
            "rank {k} outside 1..={small} for a {m}x{n} matrix"
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {}", opts.tol)));
    }
    let use_gram = match opts.method {
        SvdMethod::Gram => true,
        SvdMethod::Subspace => false,
        SvdMethod::Auto => small <= GRAM_CUTOFF,
    };
    // Work with the orientation whose right side is the smaller dimension.
    if m < n {
        let at = a.transpose();
        let res = if use_gram {
            gram_svd(&at, k)
        } else {
            subspace_svd(&at, k, opts)?
        };
        return Ok(res.transposed());
    }
    Ok(if use_gram {
        gram_svd(a, k)
    } else {
        subspace_svd(a, k, opts)?
    })
}

/// Largest singular value.
pub fn spectral_norm(a: &DenseMatrix, tol: f64) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::Empty("spectral norm of an empty matrix".into()));
    }
    let res = truncated_svd_with(
        a,
        1,
        &SvdOptions {
            tol,
            ..SvdOptions::default()
        },
    )?;
    Ok(res.singular_values[0])
}

/// Singular values at or below this fraction of `σ₁` are treated as zero.
fn rank_floor(a: &DenseMatrix, sigma_max: f64) -> f64 {
    sigma_max * f64::EPSILON.sqrt() * (a.rows().max(a.cols()) as f64)
}

/// Gram route for `m ≥ n`: eigendecompose `AᵀA`, then lift.
fn gram_svd(a: &DenseMatrix, k: usize) -> RankKApprox {
    let gram = a.tr_matmul(a).expect("square Gram");
    let (_, vecs) = symmetric_eigen(&gram);
    let v = vecs.leading_columns(k);
    finish_factorization(a, v, 0)
}

/// Given orthonormal right vectors `v` (`n × k`), derive `σ` and `U`, sort, and
/// complete `U` where a singular value vanishes.
fn finish_factorization(a: &DenseMatrix, v: DenseMatrix, iterations: usize) -> RankKApprox {
    let k = v.cols();
    let av = a.matmul(&v).expect("conforming");
    let mut order: Vec<(f64, usize)> = (0..k)
        .map(|j| {
            let col = av.column(j);
            (dot(&col, &col).sqrt(), j)
        })
        .collect();
    order.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));

    let sigma_max = order.first().map_or(0.0, |o| o.0);
    let floor = rank_floor(a, sigma_max);
    let m = a.rows();
    let n = v.rows();
    let mut left = DenseMatrix::zeros(m, k);
    let mut right = DenseMatrix::zeros(n, k);
    let mut sigmas = Vec::with_capacity(k);
    let mut left_cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    for (slot, &(s, j)) in order.iter().enumerate() {
        right.set_column(slot, &v.column(j));
        let u = if s > floor && s > 0.0 {
            let mut u: Vec<f64> = av.column(j).iter().map(|x| x / s).collect();
            if !orthonormalize_against(&mut u, &left_cols) {
                u = complement_vector(m, &left_cols);
            }
            sigmas.push(s);
            u
        } else {
            sigmas.push(if s > 0.0 { s } else { 0.0 });
            complement_vector(m, &left_cols)
        };
        left.set_column(slot, &u);
        left_cols.push(u);
    }
    RankKApprox {
        k,
        left_vectors: left,
        singular_values: sigmas,
        right_vectors: right,
        iterations,
    }
}

fn subspace_svd(a: &DenseMatrix, k: usize, opts: &SvdOptions) -> Result<RankKApprox> {
    let (_, n) = a.shape();
    let block = (2 * k + 8).min(n);
    let seed = crate::rng::mix(&[opts.seed, tags::SVD_INIT]);

    let mut q = DenseMatrix::zeros(n, block);
    for i in 0..n {
        for j in 0..block {
            q[(i, j)] = 2.0 * entry_uniform(seed, i as u64, j as u64) - 1.0;
        }
    }
    orthonormalize_columns(&mut q);

    let mut residual = f64::INFINITY;
    for iter in 1..=opts.max_iter {
        let b = a.matmul(&q)?;
        let w = a.tr_matmul(&b)?;
        let h = q.tr_matmul(&w)?;
        let (evals, s) = symmetric_eigen(&h);

        let sigma_max = evals.first().copied().unwrap_or(0.0).max(0.0).sqrt();
        if sigma_max == 0.0 {
            let v = q.matmul(&s)?.leading_columns(k);
            return Ok(finish_factorization(a, v, iter));
        }
        let floor = rank_floor(a, sigma_max);

        // Residual ‖Aᵀu_i − σ_i v_i‖ for the leading k Ritz pairs, u_i = A v_i / σ_i.
        let ws = w.matmul(&s)?;
        let qs = q.matmul(&s)?;
        residual = 0.0f64;
        for i in 0..k {
            let sigma = evals[i].max(0.0).sqrt();
            if sigma <= floor {
                continue;
            }
            let mut r2 = 0.0;
            for row in 0..n {
                let d = ws[(row, i)] / sigma - sigma * qs[(row, i)];
                r2 += d * d;
            }
            residual = residual.max(r2.sqrt() / sigma_max);
        }
        if residual <= opts.tol {
            return Ok(finish_factorization(a, qs.leading_columns(k), iter));
        }

        q = ws;
        orthonormalize_columns(&mut q);
    }
    Err(Error::Convergence {
        iterations: opts.max_iter,
        residual,
        tol: opts.tol,
    })
}

/// Modified Gram–Schmidt (two passes) over the columns of `q`.
/// Columns that collapse are replaced by vectors from the orthogonal complement.
fn orthonormalize_columns(q: &mut DenseMatrix) {
    let (rows, cols) = q.shape();
    let mut done: Vec<Vec<f64>> = Vec::with_capacity(cols);
    for j in 0..cols {
        let mut c = q.column(j);
        if !orthonormalize_against(&mut c, &done) {
            c = complement_vector(rows, &done);
        }
        q.set_column(j, &c);
        done.push(c);
    }
}

/// Projects `v` off the orthonormal `basis` twice and normalizes it.
/// Returns false if nothing meaningful is left.
fn orthonormalize_against(v: &mut [f64], basis: &[Vec<f64>]) -> bool {
    let start = dot(v, v).sqrt();
    if start == 0.0 {
        return false;
    }
    for _ in 0..2 {
        for b in basis {
            let c = dot(v, b);
            for (x, y) in v.iter_mut().zip(b) {
                *x -= c * y;
            }
        }
    }
    let norm = dot(v, v).sqrt();
    if norm <= start * 1e-10 {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    true
}

/// A unit vector orthogonal to `basis`, taken from the standard basis.
fn complement_vector(dim: usize, basis: &[Vec<f64>]) -> Vec<f64> {
    for e in 0..dim {
        let mut v = vec![0.0; dim];
        v[e] = 1.0;
        if orthonormalize_against(&mut v, basis) {
            return v;
        }
    }
    // basis already spans the space; only reachable when k > dim.
    vec![0.0; dim]
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// columns.
pub fn symmetric_eigen(a: &DenseMatrix) -> (Vec<f64>, DenseMatrix) {
    let n = a.rows();
    debug_assert_eq!(n, a.cols());
    let mut m = a.clone();
    let mut v = DenseMatrix::identity(n);
    let total: f64 = m.as_slice().iter().map(|x| x * x).sum();
    let target = total * f64::EPSILON * f64::EPSILON;

    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m[(p, q)] * m[(p, q)];
            }
        }
        if off <= target || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..n {
                    let mrp = m[(r, p)];
                    let mrq = m[(r, q)];
                    m[(r, p)] = c * mrp - s * mrq;
                    m[(r, q)] = s * mrp + c * mrq;
                }
                for r in 0..n {
                    let mpr = m[(p, r)];
                    let mqr = m[(q, r)];
                    m[(p, r)] = c * mpr - s * mqr;
                    m[(q, r)] = s * mpr + c * mqr;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for r in 0..n {
                    let vrp = v[(r, p)];
                    let vrq = v[(r, q)];
                    v[(r, p)] = c * vrp - s * vrq;
                    v[(r, q)] = s * vrp + c * vrq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (slot, &i) in order.iter().enumerate() {
        vectors.set_column(slot, &v.column(i));
    }
    (values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_orthonormal(q: &DenseMatrix) {
        let g = q.tr_matmul(q).unwrap();
        assert!(g.max_abs_diff(&DenseMatrix::identity(q.cols())) < 1e-8, "{g:?}");
    }

    fn both_methods() -> [SvdOptions; 2] {
        [
            SvdOptions { method: SvdMethod::Gram, ..SvdOptions::default() },
            SvdOptions { method: SvdMethod::Subspace, ..SvdOptions::default() },
        ]
    }

    #[test]
    fn diagonal_rank_one() {
        let a = DenseMatrix::from_diagonal(&[3.0, 1.0]);
        for opts in both_methods() {
            let r = truncated_svd_with(&a, 1, &opts).unwrap();
            assert!((r.singular_values[0] - 3.0).abs() < 1e-12);
            let a1 = r.materialize();
            assert!(a1.max_abs_diff(&DenseMatrix::from_diagonal(&[3.0, 0.0])) < 1e-8);
        }
    }

    #[test]
    fn exact_outer_product() {
        let u = [1.0, -2.0, 0.5, 3.0];
        let v = [2.0, 0.0, 1.0];
        let rows: Vec<Vec<f64>> = u.iter().map(|x| v.iter().map(|y| x * y).collect()).collect();
        let a = DenseMatrix::from_rows(&rows).unwrap();
        for opts in both_methods() {
            let r = truncated_svd_with(&a, 1, &opts).unwrap();
            assert!(r.materialize().max_abs_diff(&a) < 1e-8);
            check_orthonormal(&r.left_vectors);
            check_orthonormal(&r.right_vectors);
        }
    }

    #[test]
    fn golden_ratio_matrix() {
        // AᵀA = [[2,1],[1,1]] has eigenvalues (3 ± √5)/2.
        let expected = ((3.0 + 5f64.sqrt()) / 2.0).sqrt();
        let a = DenseMatrix::from_rows(&[[1.0, 1.0], [1.0, 0.0]]).unwrap();
        for opts in both_methods() {
            let r = truncated_svd_with(&a, 1, &opts).unwrap();
            assert!((r.singular_values[0] - expected).abs() < 1e-10);
        }
        assert!((spectral_norm(&a, 1e-10).unwrap() - 1.618_033_988_749_895).abs() < 1e-9);
    }

    #[test]
    fn spectral_norm_examples() {
        assert!((spectral_norm(&DenseMatrix::from_diagonal(&[3.0, 1.0]), 1e-10).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(spectral_norm(&DenseMatrix::zeros(3, 4), 1e-10).unwrap(), 0.0);
        assert!(spectral_norm(&DenseMatrix::zeros(0, 0), 1e-10).is_err());
    }

    #[test]
    fn rank_out_of_range() {
        let a = DenseMatrix::zeros(3, 2);
        assert!(matches!(truncated_svd(&a, 0, 1e-8, 10), Err(Error::Dimension(_))));
        assert!(matches!(truncated_svd(&a, 3, 1e-8, 10), Err(Error::Dimension(_))));
        assert!(truncated_svd(&a, 1, 0.0, 10).is_err());
    }

    #[test]
    fn zero_matrix_has_orthonormal_factors() {
        let a = DenseMatrix::zeros(5, 3);
        for opts in both_methods() {
            let r = truncated_svd_with(&a, 2, &opts).unwrap();
            assert_eq!(r.singular_values, vec![0.0, 0.0]);
            check_orthonormal(&r.left_vectors);
            check_orthonormal(&r.right_vectors);
        }
    }

    #[test]
    fn rank_deficient_completion() {
        // Rank 1, asking for 3.
        let a = DenseMatrix::from_rows(&[[1.0, 1.0, 1.0], [2.0, 2.0, 2.0], [0.0, 0.0, 0.0], [1.0, 1.0, 1.0]]).unwrap();
        for opts in both_methods() {
            let r = truncated_svd_with(&a, 3, &opts).unwrap();
            check_orthonormal(&r.left_vectors);
            check_orthonormal(&r.right_vectors);
            assert!(r.materialize().max_abs_diff(&a) < 1e-8);
            assert!(r.singular_values[1] < 1e-6);
        }
    }

    #[test]
    fn convergence_failure_is_reported() {
        // A near-degenerate gap with a single allowed sweep cannot converge.
        let mut rows = Vec::new();
        for i in 0..80 {
            let mut r = vec![0.0; 70];
            r[i % 70] = 1.0 + (i as f64) * 1e-3;
            rows.push(r);
        }
        let a = DenseMatrix::from_rows(&rows).unwrap();
        let opts = SvdOptions { max_iter: 1, method: SvdMethod::Subspace, ..SvdOptions::default() };
        assert!(matches!(truncated_svd_with(&a, 3, &opts), Err(Error::Convergence { .. })));
    }

    #[test]
    fn jacobi_reconstructs_symmetric_input() {
        let a = DenseMatrix::from_rows(&[[4.0, 1.0, -2.0], [1.0, 2.0, 0.0], [-2.0, 0.0, 3.0]]).unwrap();
        let (vals, vecs) = symmetric_eigen(&a);
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        let recon = vecs
            .matmul(&DenseMatrix::from_diagonal(&vals))
            .unwrap()
            .matmul(&vecs.transpose())
            .unwrap();
        assert!(recon.max_abs_diff(&a) < 1e-12);
    }
}
