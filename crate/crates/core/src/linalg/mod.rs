//! Dense linear-algebra kernels: matrices, truncated SVD, norms, and optimal
//! matching of center sets.

mod assignment;
mod matrix;
mod svd;

pub use assignment::{hungarian, match_rows, matching_cost, squared_distance_matrix};
pub use matrix::DenseMatrix;
pub use svd::{
    spectral_norm, symmetric_eigen, truncated_svd, truncated_svd_with, RankKApprox, SvdMethod,
    SvdOptions, DEFAULT_MAX_ITER, DEFAULT_TOL, GRAM_CUTOFF,
};

pub(crate) use matrix::{dot, squared_distance};

use crate::error::Result;
use crate::pipeline::CenterSet;

/// `√(Σ entries²)`.
pub fn frobenius_norm(a: &DenseMatrix) -> f64 {
    a.frobenius_norm()
}

/// Optimal one-to-one correspondence between two center sets.
///
/// Returns `π` with `π[r]` the index in `second` matched to center `r` of
/// `first`, minimizing the summed squared distances.
pub fn match_center_sets(first: &CenterSet, second: &CenterSet) -> Result<Vec<usize>> {
    match_rows(first.centers(), second.centers())
}
