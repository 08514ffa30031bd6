//! Instance builders shared by the benchmarks.

use specluster::models::{self, BsbmParams};
use specluster::BinaryDataset;

/// Balanced two-sided B-SBM instance with disjoint right clusters.
pub fn bsbm_instance(m: usize, n: usize, k: usize, p: f64, q: f64, seed: u64) -> BinaryDataset {
    let params = BsbmParams::balanced(m, n, k, p, q).expect("valid benchmark parameters");
    models::sample_bsbm(&params, seed).expect("integral cluster sizes")
}
