//! Independent reference implementations used only by tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use specluster::DenseMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> DenseMatrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    DenseMatrix::new(rows, cols, data).unwrap()
}

/// All singular values, descending, by one-sided (Hestenes) Jacobi
/// orthogonalization of the columns of `a` (or of `aᵀ` when wide).
pub fn jacobi_singular_values(a: &DenseMatrix) -> Vec<f64> {
    let a = if a.rows() < a.cols() { a.transpose() } else { a.clone() };
    let (m, n) = a.shape();
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    for _sweep in 0..200 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = cols[p].iter().map(|x| x * x).sum();
                let beta: f64 = cols[q].iter().map(|x| x * x).sum();
                let gamma: f64 = cols[p].iter().zip(&cols[q]).map(|(x, y)| x * y).sum();
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let x = cols[p][i];
                    let y = cols[q][i];
                    cols[p][i] = c * x - s * y;
                    cols[q][i] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = cols.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Minimum k-means objective over every label vector in `[k]^m`.
pub fn brute_force_kmeans(points: &DenseMatrix, k: usize) -> f64 {
    let m = points.rows();
    let n = points.cols();
    let mut labels = vec![0usize; m];
    let mut best = f64::INFINITY;
    loop {
        let mut sums = vec![vec![0.0; n]; k];
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(points.row(i)) {
                *s += v;
            }
        }
        let mut obj = 0.0;
        for (i, &l) in labels.iter().enumerate() {
            for (j, v) in points.row(i).iter().enumerate() {
                let d = v - sums[l][j] / counts[l] as f64;
                obj += d * d;
            }
        }
        best = best.min(obj);
        // Next label vector in base k.
        let mut pos = 0;
        loop {
            if pos == m {
                return best;
            }
            labels[pos] += 1;
            if labels[pos] < k {
                break;
            }
            labels[pos] = 0;
            pos += 1;
        }
    }
}

pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// Minimum of `Σ_r cost(r, π(r))` over all permutations.
pub fn brute_force_assignment(cost: &DenseMatrix) -> f64 {
    permutations(cost.rows())
        .iter()
        .map(|p| p.iter().enumerate().map(|(r, &s)| cost[(r, s)]).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

/// Exhaustive accuracy under the best relabeling.
pub fn brute_force_accuracy(predicted: &[usize], truth: &[usize], k: usize) -> f64 {
    permutations(k)
        .iter()
        .map(|p| predicted.iter().zip(truth).filter(|(&pr, &t)| p[t] == pr).count())
        .max()
        .unwrap() as f64
        / truth.len() as f64
}
