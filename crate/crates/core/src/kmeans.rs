//! Lloyd's algorithm with k-means++ seeding and independent restarts.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{squared_distance, DenseMatrix};
use crate::rng::{self, tags};

pub const DEFAULT_RESTARTS: usize = 10;
pub const DEFAULT_MAX_ITER: usize = 300;

#[derive(Debug, Clone)]
pub struct KMeansResult {
    /// Cluster index of every input row, in `0..k`.
    pub labels: Vec<usize>,
    /// `k × n`, each row the mean of its members.
    pub centroids: DenseMatrix,
    /// Sum of squared distances from rows to their centroids.
    pub objective: f64,
    /// Lloyd iterations of the winning restart.
    pub iterations: usize,
    /// Set when the input had fewer than `k` distinct rows and surplus
    /// centers were placed on duplicates.
    pub degenerate: bool,
    /// Objective after each Lloyd iteration, one trace per restart.
    pub restart_traces: Vec<Vec<f64>>,
}

/// Best of `restarts` k-means++ initialized Lloyd runs.
///
/// Restart `r` draws from its own stream derived from `(seed, r)`, so the
/// result does not depend on the order restarts are evaluated in.
pub fn kmeans(
    rows: &DenseMatrix,
    k: usize,
    restarts: usize,
    max_iter: usize,
    seed: u64,
) -> Result<KMeansResult> {
    let m = rows.rows();
    if m == 0 {
        return Err(Error::Empty("k-means on zero rows".into()));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if k > m {
        return Err(Error::InvalidParameter(format!(
            "k = {k} exceeds the number of rows ({m})"
        )));
    }
    if restarts == 0 {
        return Err(Error::InvalidParameter("restarts must be at least 1".into()));
    }
    let max_iter = max_iter.max(1);
    let restart_seed = rng::mix(&[seed, tags::KMEANS_RESTART]);

    let mut best: Option<Run> = None;
    let mut traces = Vec::with_capacity(restarts);
    let mut degenerate = false;
    for r in 0..restarts {
        let run = lloyd_run(rows, k, max_iter, rng::stream(restart_seed, r as u64));
        degenerate |= run.degenerate;
        traces.push(run.trace.clone());
        let better = best.as_ref().is_none_or(|b| run.objective < b.objective);
        if better {
            best = Some(run);
        }
    }
    let best = best.expect("at least one restart");
    Ok(KMeansResult {
        labels: best.labels,
        centroids: best.centroids,
        objective: best.objective,
        iterations: best.iterations,
        degenerate,
        restart_traces: traces,
    })
}

/// `Σ_i ‖row_i − centroid_{label(i)}‖²`.
pub fn objective(rows: &DenseMatrix, labels: &[usize], centroids: &DenseMatrix) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &c)| squared_distance(rows.row(i), centroids.row(c)))
        .sum()
}

/// Index of the nearest center, ties toward the lowest index.
pub(crate) fn nearest(point: &[f64], centers: &DenseMatrix) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for c in 0..centers.rows() {
        let d = squared_distance(point, centers.row(c));
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

struct Run {
    labels: Vec<usize>,
    centroids: DenseMatrix,
    objective: f64,
    iterations: usize,
    degenerate: bool,
    trace: Vec<f64>,
}

fn lloyd_run<R: Rng>(rows: &DenseMatrix, k: usize, max_iter: usize, mut rng: R) -> Run {
    let (init, degenerate) = plus_plus_init(rows, k, &mut rng);
    let mut labels = assign_all(rows, &init);
    let mut trace = Vec::new();
    let mut iterations = 0;
    loop {
        let before_repair = labels.clone();
        let centroids = update_with_repair(rows, k, &mut labels);
        let obj = objective(rows, &labels, &centroids);
        trace.push(obj);
        iterations += 1;
        let next = assign_all(rows, &centroids);
        if next == labels || next == before_repair || iterations >= max_iter {
            return Run {
                labels,
                centroids,
                objective: obj,
                iterations,
                degenerate,
                trace,
            };
        }
        labels = next;
    }
}

/// k-means++ seeding. Returns the initial centers and whether surplus
/// centers had to be placed on already-covered rows.
fn plus_plus_init<R: Rng>(rows: &DenseMatrix, k: usize, rng: &mut R) -> (DenseMatrix, bool) {
    let m = rows.rows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..m));
    let mut d2: Vec<f64> = (0..m)
        .map(|i| squared_distance(rows.row(i), rows.row(chosen[0])))
        .collect();
    let mut degenerate = false;
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                if d <= 0.0 {
                    continue;
                }
                acc += d;
                pick = Some(i);
                if acc > target {
                    break;
                }
            }
            pick.expect("positive mass")
        } else {
            degenerate = true;
            (0..m).find(|i| !chosen.contains(i)).expect("k <= m")
        };
        chosen.push(pick);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(squared_distance(rows.row(i), rows.row(pick)));
        }
    }
    (rows.select_rows(&chosen), degenerate)
}

fn assign_all(rows: &DenseMatrix, centers: &DenseMatrix) -> Vec<usize> {
    rows.row_iter().map(|r| nearest(r, centers)).collect()
}

fn centroids_of(rows: &DenseMatrix, k: usize, labels: &[usize]) -> (DenseMatrix, Vec<usize>) {
    let n = rows.cols();
    let mut sums = DenseMatrix::zeros(k, n);
    let mut counts = vec![0usize; k];
    for (i, &c) in labels.iter().enumerate() {
        counts[c] += 1;
        for (s, &v) in sums.row_mut(c).iter_mut().zip(rows.row(i)) {
            *s += v;
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            let inv = 1.0 / counts[c] as f64;
            sums.row_mut(c).iter_mut().for_each(|s| *s *= inv);
        }
    }
    (sums, counts)
}

/// Mean step. Each empty cluster takes the point farthest from its current
/// centroid (among clusters with more than one member) as a singleton.
fn update_with_repair(rows: &DenseMatrix, k: usize, labels: &mut [usize]) -> DenseMatrix {
    let (mut centroids, mut counts) = centroids_of(rows, k, labels);
    while let Some(empty) = counts.iter().position(|&c| c == 0) {
        let mut far = None;
        let mut far_d = -1.0;
        for (i, &c) in labels.iter().enumerate() {
            if counts[c] < 2 {
                continue;
            }
            let d = squared_distance(rows.row(i), centroids.row(c));
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        let i = far.expect("k <= m leaves a donor cluster");
        labels[i] = empty;
        let (c, n) = centroids_of(rows, k, labels);
        centroids = c;
        counts = n;
    }
    centroids
}
