//! The two-phase algorithm: find centers on one half, assign the other
//! half to its nearest center, then swap halves and reconcile labels.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kmeans::{self, KMeansResult};
use crate::linalg::{self, squared_distance, DenseMatrix, RankKApprox, SvdOptions};
use crate::rng::{self, tags};

/// Estimated centers `μ̂_r` and the sizes of the clusters they average.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterSet {
    centers: DenseMatrix,
    cluster_sizes: Vec<usize>,
}

impl CenterSet {
    pub fn new(centers: DenseMatrix, cluster_sizes: Vec<usize>) -> Result<Self> {
        if cluster_sizes.len() != centers.rows() {
            return Err(Error::Dimension(format!(
                "{} cluster sizes for {} centers",
                cluster_sizes.len(),
                centers.rows()
            )));
        }
        Ok(Self { centers, cluster_sizes })
    }

    /// Centers with unknown sizes (recorded as zero).
    pub fn from_centers(centers: DenseMatrix) -> Self {
        let k = centers.rows();
        Self { centers, cluster_sizes: vec![0; k] }
    }

    pub fn k(&self) -> usize {
        self.centers.rows()
    }

    pub fn dim(&self) -> usize {
        self.centers.cols()
    }

    pub fn centers(&self) -> &DenseMatrix {
        &self.centers
    }

    pub fn center(&self, r: usize) -> &[f64] {
        self.centers.row(r)
    }

    pub fn cluster_sizes(&self) -> &[usize] {
        &self.cluster_sizes
    }

    /// The same centers reordered so that new center `r` is old center `order[r]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            centers: self.centers.select_rows(order),
            cluster_sizes: order.iter().map(|&i| self.cluster_sizes[i]).collect(),
        }
    }
}

/// A cluster index per row. Serializes as a bare JSON array.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Labeling {
    labels: Vec<usize>,
}

impl Labeling {
    pub fn new(labels: Vec<usize>) -> Self {
        Self { labels }
    }

    /// Checks every label is below `k`.
    pub fn with_k(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(l) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::InvalidParameter(format!("label {l} >= k = {k}")));
        }
        Ok(Self { labels })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.labels
    }
}

impl From<Vec<usize>> for Labeling {
    fn from(labels: Vec<usize>) -> Self {
        Self { labels }
    }
}

/// Solver knobs shared by every stage.
#[derive(Debug, Clone, Copy)]
pub struct PipelineOptions {
    pub svd: SvdOptions,
    pub kmeans_restarts: usize,
    pub kmeans_max_iter: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            svd: SvdOptions::default(),
            kmeans_restarts: kmeans::DEFAULT_RESTARTS,
            kmeans_max_iter: kmeans::DEFAULT_MAX_ITER,
        }
    }
}

/// Everything center finding computes, for diagnostics.
#[derive(Debug, Clone)]
pub struct CentersOutput {
    pub centers: CenterSet,
    /// `Û`: the k-means clustering of the rows of `A_k`.
    pub kmeans: KMeansResult,
    pub approx: RankKApprox,
}

pub fn find_centers(a: &DenseMatrix, k: usize, seed: u64) -> Result<CenterSet> {
    Ok(find_centers_with(a, k, seed, &PipelineOptions::default())?.centers)
}

/// Rank-`k` SVD, k-means on the rows of `A_k`, then per-cluster averages of
/// the original rows of `a`.
///
/// k-means runs on the rows of `U_k Σ_k`; since `V_k` has orthonormal
/// columns, pairwise distances are those between rows of `A_k`. When `k`
/// exceeds the number of columns, `A_k = A` and the SVD rank is capped.
pub fn find_centers_with(
    a: &DenseMatrix,
    k: usize,
    seed: u64,
    opts: &PipelineOptions,
) -> Result<CentersOutput> {
    let m = a.rows();
    if k == 0 || k > m {
        return Err(Error::InvalidParameter(format!("k = {k} must lie in 1..={m}")));
    }
    let svd_opts = SvdOptions {
        seed: rng::mix(&[seed, tags::SVD_INIT]),
        ..opts.svd
    };
    let approx = linalg::truncated_svd_with(a, k.min(a.cols()), &svd_opts)?;
    let mut embedded = approx.left_vectors.clone();
    for i in 0..m {
        for (x, s) in embedded.row_mut(i).iter_mut().zip(&approx.singular_values) {
            *x *= s;
        }
    }
    let km = kmeans::kmeans(&embedded, k, opts.kmeans_restarts, opts.kmeans_max_iter, seed)?;

    let n = a.cols();
    let mut sums = DenseMatrix::zeros(k, n);
    let mut sizes = vec![0usize; k];
    for (i, &c) in km.labels.iter().enumerate() {
        sizes[c] += 1;
        for (s, &v) in sums.row_mut(c).iter_mut().zip(a.row(i)) {
            *s += v;
        }
    }
    for (c, &size) in sizes.iter().enumerate() {
        let inv = 1.0 / size as f64;
        sums.row_mut(c).iter_mut().for_each(|s| *s *= inv);
    }
    Ok(CentersOutput {
        centers: CenterSet::new(sums, sizes)?,
        kmeans: km,
        approx,
    })
}

/// Label each row by its nearest center, ties toward the lowest index.
pub fn assign(a: &DenseMatrix, centers: &CenterSet) -> Result<Labeling> {
    if a.cols() != centers.dim() {
        return Err(Error::Dimension(format!(
            "rows have {} coordinates, centers {}",
            a.cols(),
            centers.dim()
        )));
    }
    Ok(Labeling::new(
        a.row_iter().map(|r| kmeans::nearest(r, centers.centers())).collect(),
    ))
}

/// Full clustering output with the intermediate state of both halves.
#[derive(Debug, Clone)]
pub struct ClusterOutput {
    /// Labels for all rows, in the indexing of the first half's centers.
    pub labeling: Labeling,
    pub first_half: Vec<usize>,
    pub second_half: Vec<usize>,
    pub centers_first: CenterSet,
    pub centers_second: CenterSet,
    /// `matching[r]` is the second-half center matched to first-half center `r`.
    pub matching: Vec<usize>,
    /// Some first-half center is closer to an unmatched second-half center
    /// than to its match.
    pub ambiguous_matching: bool,
    /// A k-means run saw fewer than `k` distinct rows.
    pub kmeans_degenerate: bool,
}

pub fn cluster(a: &DenseMatrix, k: usize, seed: u64) -> Result<Labeling> {
    Ok(cluster_with(a, k, seed, &PipelineOptions::default())?.labeling)
}

/// Seeded split into halves of sizes `⌈m/2⌉` and `⌊m/2⌋`.
pub fn split_halves(m: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng::stream(seed, tags::SPLIT));
    let second = order.split_off(m.div_ceil(2));
    (order, second)
}

pub fn cluster_with(
    a: &DenseMatrix,
    k: usize,
    seed: u64,
    opts: &PipelineOptions,
) -> Result<ClusterOutput> {
    let m = a.rows();
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if m < 2 * k {
        return Err(Error::InvalidParameter(format!(
            "clustering {m} rows into {k} clusters needs m >= 2k"
        )));
    }
    let (first_half, second_half) = split_halves(m, seed);
    let a1 = a.select_rows(&first_half);
    let a2 = a.select_rows(&second_half);

    let seed1 = rng::mix(&[seed, tags::CENTERS_FIRST]);
    let seed2 = rng::mix(&[seed, tags::CENTERS_SECOND]);
    let (left, right) = rayon::join(
        || -> Result<(CentersOutput, Labeling)> {
            let out = find_centers_with(&a1, k, seed1, opts)?;
            let labels = assign(&a2, &out.centers)?;
            Ok((out, labels))
        },
        || -> Result<(CentersOutput, Labeling)> {
            let out = find_centers_with(&a2, k, seed2, opts)?;
            let labels = assign(&a1, &out.centers)?;
            Ok((out, labels))
        },
    );
    let (out1, labels_second) = left?;
    let (out2, labels_first) = right?;

    let matching = linalg::match_center_sets(&out1.centers, &out2.centers)?;
    let mut to_first = vec![0usize; k];
    for (r, &s) in matching.iter().enumerate() {
        to_first[s] = r;
    }

    let mut merged = vec![0usize; m];
    for (&row, &l) in second_half.iter().zip(labels_second.labels()) {
        merged[row] = l;
    }
    for (&row, &l) in first_half.iter().zip(labels_first.labels()) {
        merged[row] = to_first[l];
    }

    let ambiguous_matching = (0..k).any(|r| {
        let c = out1.centers.center(r);
        let matched = squared_distance(c, out2.centers.center(matching[r]));
        (0..k)
            .filter(|&s| s != matching[r])
            .any(|s| squared_distance(c, out2.centers.center(s)) < matched)
    });

    Ok(ClusterOutput {
        labeling: Labeling::new(merged),
        first_half,
        second_half,
        kmeans_degenerate: out1.kmeans.degenerate || out2.kmeans.degenerate,
        centers_first: out1.centers,
        centers_second: out2.centers,
        matching,
        ambiguous_matching,
    })
}
