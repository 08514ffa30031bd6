//! The two data models: general Bernoulli-product mixtures and the
//! bipartite stochastic block model, with exact-count samplers.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{squared_distance, DenseMatrix};
use crate::rng::{self, entry_uniform, tags};

/// Mixture of `k` product-Bernoulli distributions over `{0,1}^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MixtureRecord", into = "MixtureRecord")]
pub struct MixtureModel {
    means: DenseMatrix,
    weights: Vec<f64>,
    sigma_sq: f64,
}

#[derive(Serialize, Deserialize)]
struct MixtureRecord {
    #[serde(default)]
    k: Option<usize>,
    #[serde(default)]
    n: Option<usize>,
    means: Vec<Vec<f64>>,
    weights: Vec<f64>,
    #[serde(default)]
    sigma_sq: Option<f64>,
}

impl TryFrom<MixtureRecord> for MixtureModel {
    type Error = Error;

    fn try_from(rec: MixtureRecord) -> Result<Self> {
        let means = DenseMatrix::from_rows(&rec.means)?;
        if rec.k.is_some_and(|k| k != means.rows()) || rec.n.is_some_and(|n| n != means.cols()) {
            return Err(Error::Dimension(format!(
                "declared k/n do not match a {}x{} mean matrix",
                means.rows(),
                means.cols()
            )));
        }
        MixtureModel::new(means, rec.weights, rec.sigma_sq)
    }
}

impl From<MixtureModel> for MixtureRecord {
    fn from(m: MixtureModel) -> Self {
        MixtureRecord {
            k: Some(m.k()),
            n: Some(m.n()),
            means: m.means.row_iter().map(<[f64]>::to_vec).collect(),
            weights: m.weights,
            sigma_sq: Some(m.sigma_sq),
        }
    }
}

impl MixtureModel {
    /// Validates the means and weights. `sigma_sq` defaults to the largest
    /// mean entry and must otherwise dominate every entry.
    pub fn new(means: DenseMatrix, weights: Vec<f64>, sigma_sq: Option<f64>) -> Result<Self> {
        let k = means.rows();
        if k == 0 || means.cols() == 0 {
            return Err(Error::Empty("mixture needs at least one component and one coordinate".into()));
        }
        if weights.len() != k {
            return Err(Error::Dimension(format!("{} weights for {k} components", weights.len())));
        }
        if let Some(v) = means.as_slice().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParameter(format!("mean entry {v} outside [0, 1]")));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidParameter("mixing weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("mixing weights sum to {total}, not 1")));
        }
        let max_mean = means.as_slice().iter().copied().fold(0.0, f64::max);
        let sigma_sq = sigma_sq.unwrap_or(max_mean);
        if !sigma_sq.is_finite() || sigma_sq < max_mean {
            return Err(Error::InvalidParameter(format!(
                "sigma_sq = {sigma_sq} must bound every mean entry (max {max_mean})"
            )));
        }
        Ok(Self { means, weights, sigma_sq })
    }

    /// Mixture with means in `{high, low}`: component `r` has `high` on the
    /// coordinates assigned to it and `low` elsewhere.
    pub fn block(
        high: f64,
        low: f64,
        right_assignment: &[usize],
        weights: Vec<f64>,
        sigma_sq: Option<f64>,
    ) -> Result<Self> {
        let k = weights.len();
        let n = right_assignment.len();
        let mut means = DenseMatrix::zeros(k, n);
        for r in 0..k {
            for (j, &s) in right_assignment.iter().enumerate() {
                means[(r, j)] = if s == r { high } else { low };
            }
        }
        Self::new(means, weights, sigma_sq)
    }

    pub fn k(&self) -> usize {
        self.means.rows()
    }

    pub fn n(&self) -> usize {
        self.means.cols()
    }

    pub fn means(&self) -> &DenseMatrix {
        &self.means
    }

    pub fn mean(&self, r: usize) -> &[f64] {
        self.means.row(r)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sigma_sq(&self) -> f64 {
        self.sigma_sq
    }

    pub fn w_min(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Exact per-component row counts `w_r · m`.
    pub fn cluster_sizes(&self, m: usize) -> Result<Vec<usize>> {
        let mut sizes = Vec::with_capacity(self.k());
        for (r, &w) in self.weights.iter().enumerate() {
            let exact = w * m as f64;
            let rounded = exact.round();
            if (exact - rounded).abs() > 1e-9 * (m as f64).max(1.0) {
                return Err(Error::InvalidParameter(format!(
                    "component {r} would contribute w·m = {exact} rows; cluster sizes must be integral"
                )));
            }
            sizes.push(rounded as usize);
        }
        let total: usize = sizes.iter().sum();
        if total != m {
            return Err(Error::InvalidParameter(format!("cluster sizes sum to {total}, not {m}")));
        }
        Ok(sizes)
    }
}

/// Minimum Euclidean distance between two mean vectors.
pub fn separation(model: &MixtureModel) -> Result<f64> {
    let k = model.k();
    if k < 2 {
        return Err(Error::InvalidParameter("separation needs k >= 2".into()));
    }
    let mut best = f64::INFINITY;
    for r in 0..k {
        for s in r + 1..k {
            best = best.min(squared_distance(model.mean(r), model.mean(s)));
        }
    }
    Ok(best.sqrt())
}

/// Parameters of a bipartite stochastic block model instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BsbmRecord")]
pub struct BsbmParams {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub p: f64,
    pub q: f64,
    pub left_sizes: Vec<usize>,
    pub right_assignment: Vec<usize>,
}

#[derive(Deserialize)]
struct BsbmRecord {
    m: usize,
    n: usize,
    k: usize,
    p: f64,
    q: f64,
    #[serde(default)]
    left_sizes: Option<Vec<usize>>,
    #[serde(default)]
    right_assignment: Option<Vec<usize>>,
}

impl TryFrom<BsbmRecord> for BsbmParams {
    type Error = Error;

    fn try_from(r: BsbmRecord) -> Result<Self> {
        let left_sizes = r.left_sizes.unwrap_or_else(|| balanced_sizes(r.m, r.k));
        let right_assignment = r
            .right_assignment
            .unwrap_or_else(|| contiguous_assignment(r.n, r.k));
        BsbmParams::new(r.m, r.n, r.k, r.p, r.q, left_sizes, right_assignment)
    }
}

/// `total` split into `parts` sizes differing by at most one, larger first.
pub fn balanced_sizes(total: usize, parts: usize) -> Vec<usize> {
    if parts == 0 {
        return Vec::new();
    }
    let base = total / parts;
    let extra = total % parts;
    (0..parts).map(|r| base + usize::from(r < extra)).collect()
}

/// Coordinates `0..n` assigned to `k` contiguous, balanced blocks.
pub fn contiguous_assignment(n: usize, k: usize) -> Vec<usize> {
    balanced_sizes(n, k)
        .into_iter()
        .enumerate()
        .flat_map(|(r, size)| std::iter::repeat_n(r, size))
        .collect()
}

impl BsbmParams {
    pub fn new(
        m: usize,
        n: usize,
        k: usize,
        p: f64,
        q: f64,
        left_sizes: Vec<usize>,
        right_assignment: Vec<usize>,
    ) -> Result<Self> {
        let params = Self { m, n, k, p, q, left_sizes, right_assignment };
        params.validate()?;
        Ok(params)
    }

    /// Balanced left clusters and contiguous balanced right clusters.
    pub fn balanced(m: usize, n: usize, k: usize, p: f64, q: f64) -> Result<Self> {
        Self::new(m, n, k, p, q, balanced_sizes(m, k), contiguous_assignment(n, k))
    }

    pub fn validate(&self) -> Result<()> {
        let in_range = |x: f64| (0.0..=0.5).contains(&x);
        if !in_range(self.p) || !in_range(self.q) {
            return Err(Error::InvalidParameter(format!(
                "p = {} and q = {} must lie in [0, 0.5]",
                self.p, self.q
            )));
        }
        if self.p == self.q {
            return Err(Error::InvalidParameter("p and q must differ".into()));
        }
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if self.left_sizes.len() != self.k || self.left_sizes.contains(&0) {
            return Err(Error::InvalidParameter(format!(
                "left_sizes must hold {} positive counts",
                self.k
            )));
        }
        if self.left_sizes.iter().sum::<usize>() != self.m {
            return Err(Error::InvalidParameter(format!("left_sizes must sum to m = {}", self.m)));
        }
        if self.right_assignment.len() != self.n {
            return Err(Error::Dimension(format!(
                "right_assignment has {} entries, n = {}",
                self.right_assignment.len(),
                self.n
            )));
        }
        let mut seen = vec![false; self.k];
        for &s in &self.right_assignment {
            if s >= self.k {
                return Err(Error::InvalidParameter(format!("right cluster {s} >= k = {}", self.k)));
            }
            seen[s] = true;
        }
        if let Some(r) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidParameter(format!("right cluster {r} is empty")));
        }
        Ok(())
    }

    /// `2 · max{p(1−p), q(1−q)}`.
    pub fn sigma_sq(&self) -> f64 {
        2.0 * (self.p * (1.0 - self.p)).max(self.q * (1.0 - self.q))
    }

    pub fn w_min(&self) -> f64 {
        *self.left_sizes.iter().min().expect("k >= 1") as f64 / self.m as f64
    }

    pub fn to_mixture(&self) -> Result<MixtureModel> {
        bsbm_to_mixture(self)
    }
}

/// Mean vectors in `{p, q}^n`, weights `|U_r| / m`, and the B-SBM variance proxy.
pub fn bsbm_to_mixture(params: &BsbmParams) -> Result<MixtureModel> {
    params.validate()?;
    let weights = params
        .left_sizes
        .iter()
        .map(|&s| s as f64 / params.m as f64)
        .collect();
    MixtureModel::block(
        params.p,
        params.q,
        &params.right_assignment,
        weights,
        Some(params.sigma_sq()),
    )
}

/// `min_{r≠s} |V_r △ V_s|`.
pub fn delta_v(params: &BsbmParams) -> Result<usize> {
    if params.k < 2 {
        return Err(Error::InvalidParameter("delta_v needs k >= 2".into()));
    }
    let mut best = usize::MAX;
    for r in 0..params.k {
        for s in r + 1..params.k {
            let diff = params
                .right_assignment
                .iter()
                .filter(|&&c| (c == r) != (c == s))
                .count();
            best = best.min(diff);
        }
    }
    Ok(best)
}

/// Symmetric-difference count for explicit (possibly overlapping) right sets.
pub fn delta_v_of_sets(sets: &[Vec<usize>]) -> Result<usize> {
    use std::collections::BTreeSet;
    if sets.len() < 2 {
        return Err(Error::InvalidParameter("delta_v needs k >= 2".into()));
    }
    let sets: Vec<BTreeSet<usize>> = sets.iter().map(|s| s.iter().copied().collect()).collect();
    let mut best = usize::MAX;
    for r in 0..sets.len() {
        for s in r + 1..sets.len() {
            best = best.min(sets[r].symmetric_difference(&sets[s]).count());
        }
    }
    Ok(best)
}

/// A 0/1 sample matrix with optional generation metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryDataset {
    matrix: DenseMatrix,
    truth: Option<Vec<usize>>,
    model: Option<MixtureModel>,
    bsbm: Option<BsbmParams>,
    seed: Option<u64>,
}

impl BinaryDataset {
    /// Wraps a matrix, checking entries are exactly 0 or 1.
    pub fn new(matrix: DenseMatrix) -> Result<Self> {
        if let Some(v) = matrix.as_slice().iter().find(|v| **v != 0.0 && **v != 1.0) {
            return Err(Error::InvalidParameter(format!("entry {v} is not 0 or 1")));
        }
        Ok(Self { matrix, truth: None, model: None, bsbm: None, seed: None })
    }

    pub fn with_truth(mut self, truth: Vec<usize>) -> Result<Self> {
        if truth.len() != self.matrix.rows() {
            return Err(Error::Dimension(format!(
                "{} labels for {} rows",
                truth.len(),
                self.matrix.rows()
            )));
        }
        if let Some(model) = &self.model {
            check_labels(&truth, model.k())?;
        }
        self.truth = Some(truth);
        Ok(self)
    }

    pub fn with_model(mut self, model: MixtureModel) -> Result<Self> {
        if model.n() != self.matrix.cols() {
            return Err(Error::Dimension(format!(
                "model dimension {} vs {} columns",
                model.n(),
                self.matrix.cols()
            )));
        }
        if let Some(truth) = &self.truth {
            check_labels(truth, model.k())?;
        }
        self.model = Some(model);
        Ok(self)
    }

    pub fn with_bsbm(mut self, params: BsbmParams) -> Self {
        self.bsbm = Some(params);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn truth(&self) -> Option<&[usize]> {
        self.truth.as_deref()
    }

    pub fn model(&self) -> Option<&MixtureModel> {
        self.model.as_ref()
    }

    pub fn bsbm(&self) -> Option<&BsbmParams> {
        self.bsbm.as_ref()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    /// `E[A]` for this dataset's row placement.
    pub fn expected_matrix(&self) -> Result<DenseMatrix> {
        let model = self
            .model
            .as_ref()
            .ok_or_else(|| Error::MissingMetadata("dataset has no generating model".into()))?;
        let truth = self
            .truth
            .as_deref()
            .ok_or_else(|| Error::MissingMetadata("dataset has no ground-truth labels".into()))?;
        expected_for_labels(model, truth)
    }
}

fn check_labels(labels: &[usize], k: usize) -> Result<()> {
    match labels.iter().find(|&&l| l >= k) {
        Some(l) => Err(Error::InvalidParameter(format!("label {l} >= k = {k}"))),
        None => Ok(()),
    }
}

/// Seeded placement of `w_r · m` rows per component.
pub fn row_labels(model: &MixtureModel, m: usize, seed: u64) -> Result<Vec<usize>> {
    let sizes = model.cluster_sizes(m)?;
    let mut labels: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(r, &s)| std::iter::repeat_n(r, s))
        .collect();
    labels.shuffle(&mut rng::stream(seed, tags::ROW_ORDER));
    Ok(labels)
}

/// Draws `m` rows with exact per-component counts in a seeded order.
///
/// Entry `(i, j)` is `1` iff `entry_uniform(stream, i, j) < μ_{C(i), j}`, so
/// the matrix is a pure function of `(model, m, seed)`.
pub fn sample(model: &MixtureModel, m: usize, seed: u64) -> Result<BinaryDataset> {
    let labels = row_labels(model, m, seed)?;
    let n = model.n();
    let entry_seed = rng::mix(&[seed, tags::ENTRIES]);
    let mut data = vec![0.0; m * n];
    for (i, &r) in labels.iter().enumerate() {
        let mean = model.mean(r);
        let row = &mut data[i * n..(i + 1) * n];
        for (j, (x, &mu)) in row.iter_mut().zip(mean).enumerate() {
            if entry_uniform(entry_seed, i as u64, j as u64) < mu {
                *x = 1.0;
            }
        }
    }
    let matrix = DenseMatrix::new(m, n, data)?;
    Ok(BinaryDataset { matrix, truth: None, model: None, bsbm: None, seed: None }
        .with_seed(seed)
        .with_model(model.clone())?
        .with_truth(labels)?)
}

/// B-SBM instance: mixture conversion plus sampling, with the parameters attached.
pub fn sample_bsbm(params: &BsbmParams, seed: u64) -> Result<BinaryDataset> {
    let model = bsbm_to_mixture(params)?;
    Ok(sample(&model, params.m, seed)?.with_bsbm(params.clone()))
}

/// `E[A]` for the row placement a paired `sample(model, m, seed)` produces.
pub fn expected_matrix(model: &MixtureModel, m: usize, seed: u64) -> Result<DenseMatrix> {
    expected_for_labels(model, &row_labels(model, m, seed)?)
}

/// Rows `μ_{labels(i)}`.
pub fn expected_for_labels(model: &MixtureModel, labels: &[usize]) -> Result<DenseMatrix> {
    check_labels(labels, model.k())?;
    Ok(model.means().select_rows(labels))
}

/// One fresh row from component `r`; `index` selects an independent draw.
pub fn sample_row(model: &MixtureModel, r: usize, seed: u64, index: u64) -> Vec<f64> {
    let stream = rng::mix(&[seed, tags::FRESH_SAMPLES]);
    model
        .mean(r)
        .iter()
        .enumerate()
        .map(|(j, &mu)| f64::from(entry_uniform(stream, index, j as u64) < mu))
        .collect()
}
