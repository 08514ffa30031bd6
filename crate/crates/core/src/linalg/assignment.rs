//! Minimum-cost perfect matching on square cost matrices.

use crate::error::{Error, Result};

use super::matrix::{squared_distance, DenseMatrix};

/// Hungarian method (shortest augmenting paths with potentials), `O(k³)`.
///
/// Returns `assignment` with `assignment[row] = col`. Among optimal solutions
/// the result is a deterministic function of the costs.
pub fn hungarian(costs: &DenseMatrix) -> Result<Vec<usize>> {
    let n = costs.rows();
    if costs.cols() != n {
        return Err(Error::Dimension(format!(
            "assignment needs a square cost matrix, got {}x{}",
            costs.rows(),
            costs.cols()
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }

    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    // p[col] = row matched to col (1-based, 0 = free)
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = costs[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    Ok(assignment)
}

/// Squared Euclidean distances between the rows of `a` and the rows of `b`.
pub fn squared_distance_matrix(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols() != b.cols() {
        return Err(Error::Dimension(format!(
            "row dimension {} vs {}",
            a.cols(),
            b.cols()
        )));
    }
    let mut out = DenseMatrix::zeros(a.rows(), b.rows());
    for i in 0..a.rows() {
        for j in 0..b.rows() {
            out[(i, j)] = squared_distance(a.row(i), b.row(j));
        }
    }
    Ok(out)
}

/// Permutation `π` minimizing `Σ_r ‖first_r − second_{π(r)}‖²`.
pub fn match_rows(first: &DenseMatrix, second: &DenseMatrix) -> Result<Vec<usize>> {
    if first.shape() != second.shape() {
        return Err(Error::Dimension(format!(
            "center sets of shape {:?} and {:?}",
            first.shape(),
            second.shape()
        )));
    }
    hungarian(&squared_distance_matrix(first, second)?)
}

/// Total squared distance of a matching.
pub fn matching_cost(first: &DenseMatrix, second: &DenseMatrix, perm: &[usize]) -> f64 {
    perm.iter()
        .enumerate()
        .map(|(r, &s)| squared_distance(first.row(r), second.row(s)))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_integer_instance() {
        let costs = DenseMatrix::from_rows(&[[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]]).unwrap();
        let a = hungarian(&costs).unwrap();
        let total: f64 = a.iter().enumerate().map(|(i, &j)| costs[(i, j)]).sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn identity_and_swap() {
        let c = DenseMatrix::from_rows(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        assert_eq!(match_rows(&c, &c).unwrap(), vec![0, 1]);
        let swapped = c.select_rows(&[1, 0]);
        assert_eq!(match_rows(&c, &swapped).unwrap(), vec![1, 0]);
    }

    #[test]
    fn shape_mismatch() {
        let a = DenseMatrix::zeros(2, 3);
        let b = DenseMatrix::zeros(2, 4);
        assert!(match_rows(&a, &b).is_err());
        assert!(hungarian(&DenseMatrix::zeros(2, 3)).is_err());
        assert!(hungarian(&DenseMatrix::zeros(0, 0)).unwrap().is_empty());
    }
}
