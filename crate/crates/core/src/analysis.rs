//! Condition reports, recovery scoring, and bound diagnostics.
//!
//! Conditions stated up to hidden polylog factors are reported as raw
//! quantities and ratios. [`ConditionReport::heuristics`] turns them into
//! booleans only under an explicit slack constant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, dot, DenseMatrix};
use crate::models::{self, BinaryDataset, BsbmParams, MixtureModel};
use crate::pipeline::{CenterSet, Labeling};

/// Every quantity entering the exact-recovery conditions for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    /// `‖A − E[A]‖²`
    pub spectral_noise_sq: f64,
    /// `0.01 · w_min · m · Δμ² / (50k)`
    pub spectral_threshold: f64,
    /// `m · σ²`
    pub m_sigma_sq: f64,
    pub delta_mu: f64,
    /// `√(σ² / w_min)`
    pub sigma_over_wmin_sqrt: f64,
    /// `(p − q)² / σ²`
    pub bsbm_lhs: Option<f64>,
    /// `k(m + n) / (w_min · m · ΔV)`
    pub bsbm_rhs_shape: Option<f64>,
    /// `‖A − E[A]‖² / (σ²(m + n))`
    pub talagrand_ratio: Option<f64>,
}

/// Advisory verdicts; every constant hidden by `≳`/`Ω̃` is replaced by `slack`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicChecks {
    pub slack: f64,
    /// Explicit-constant condition, not heuristic.
    pub spectral_condition: bool,
    pub heuristic_m_sigma_sq: bool,
    pub heuristic_separation: bool,
    pub heuristic_bsbm: Option<bool>,
}

impl ConditionReport {
    /// `‖A − E[A]‖² / threshold`; at most 1 inside the regime.
    pub fn spectral_ratio(&self) -> f64 {
        self.spectral_noise_sq / self.spectral_threshold
    }

    /// `bsbm_lhs / bsbm_rhs_shape`.
    pub fn bsbm_ratio(&self) -> Option<f64> {
        Some(self.bsbm_lhs? / self.bsbm_rhs_shape?)
    }

    pub fn heuristics(&self, slack: f64) -> HeuristicChecks {
        HeuristicChecks {
            slack,
            spectral_condition: self.spectral_noise_sq <= self.spectral_threshold,
            heuristic_m_sigma_sq: self.m_sigma_sq >= slack,
            heuristic_separation: self.delta_mu >= slack * self.sigma_over_wmin_sqrt,
            heuristic_bsbm: self.bsbm_ratio().map(|r| r >= slack),
        }
    }
}

/// Evaluates [`ConditionReport`] for `dataset` under `model`.
pub fn condition_report(
    dataset: &BinaryDataset,
    model: &MixtureModel,
    bsbm: Option<&BsbmParams>,
    k: usize,
) -> Result<ConditionReport> {
    if k != model.k() {
        return Err(Error::Dimension(format!("k = {k} but the model has {} components", model.k())));
    }
    let truth = dataset
        .truth()
        .ok_or_else(|| Error::MissingMetadata("condition report needs ground-truth labels".into()))?;
    let a = dataset.matrix();
    if a.cols() != model.n() {
        return Err(Error::Dimension(format!("{} columns vs model dimension {}", a.cols(), model.n())));
    }
    let sigma_sq = model.sigma_sq();
    if !(sigma_sq > 0.0) {
        return Err(Error::InvalidParameter("sigma_sq must be positive for a condition report".into()));
    }
    let expected = models::expected_for_labels(model, truth)?;
    let noise = a.sub(&expected)?;
    let noise_norm = linalg::spectral_norm(&noise, linalg::DEFAULT_TOL)?;
    let spectral_noise_sq = noise_norm * noise_norm;

    let (m, n) = a.shape();
    let mf = m as f64;
    let w_min = model.w_min();
    let delta_mu = models::separation(model)?;

    let (bsbm_lhs, bsbm_rhs_shape) = match bsbm {
        Some(p) => {
            let dv = models::delta_v(p)? as f64;
            let s2 = p.sigma_sq();
            let lhs = (p.p - p.q).powi(2) / s2;
            let rhs = (k * (m + n)) as f64 / (p.w_min() * mf * dv);
            (Some(lhs), Some(rhs))
        }
        None => (None, None),
    };

    Ok(ConditionReport {
        spectral_noise_sq,
        spectral_threshold: 0.01 * w_min * mf * delta_mu * delta_mu / (50.0 * k as f64),
        m_sigma_sq: mf * sigma_sq,
        delta_mu,
        sigma_over_wmin_sqrt: (sigma_sq / w_min).sqrt(),
        bsbm_lhs,
        bsbm_rhs_shape,
        talagrand_ratio: Some(spectral_noise_sq / (sigma_sq * (m + n) as f64)),
    })
}

/// Agreement between a predicted labeling and the truth, up to relabeling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryScore {
    pub exact: bool,
    pub accuracy: f64,
    /// `confusion[r][s]`: rows with true label `r` predicted as `s`.
    pub confusion: Vec<Vec<usize>>,
    /// `permutation[r]`: predicted label matched to true label `r`.
    pub permutation: Vec<usize>,
}

pub fn confusion_matrix(predicted: &[usize], truth: &[usize], k: usize) -> Result<Vec<Vec<usize>>> {
    if predicted.len() != truth.len() {
        return Err(Error::Dimension(format!(
            "{} predicted labels vs {} true labels",
            predicted.len(),
            truth.len()
        )));
    }
    let mut conf = vec![vec![0usize; k]; k];
    for (&p, &t) in predicted.iter().zip(truth) {
        if p >= k || t >= k {
            return Err(Error::InvalidParameter(format!("label pair ({t}, {p}) outside 0..{k}")));
        }
        conf[t][p] += 1;
    }
    Ok(conf)
}

/// Permutation maximizing the matched diagonal mass of `conf`.
fn best_matching(conf: &[Vec<usize>]) -> Result<Vec<usize>> {
    let k = conf.len();
    let max = conf.iter().flatten().copied().max().unwrap_or(0);
    let mut cost = DenseMatrix::zeros(k, k);
    for r in 0..k {
        for s in 0..k {
            cost[(r, s)] = (max - conf[r][s]) as f64;
        }
    }
    linalg::hungarian(&cost)
}

pub fn score(predicted: &Labeling, truth: &Labeling, k: usize) -> Result<RecoveryScore> {
    let confusion = confusion_matrix(predicted.labels(), truth.labels(), k)?;
    let permutation = best_matching(&confusion)?;
    let matched: usize = permutation.iter().enumerate().map(|(r, &s)| confusion[r][s]).sum();
    let total = truth.len();
    Ok(RecoveryScore {
        exact: matched == total,
        accuracy: if total == 0 { 1.0 } else { matched as f64 / total as f64 },
        confusion,
        permutation,
    })
}

/// Per-cluster center errors against the bound
/// `‖μ̂_r − μ_r‖ ≤ 7√(k/(w_min m))‖A − E[A]‖ ≤ 0.1Δμ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterErrorReport {
    /// `errors[r] = ‖μ̂_{π(r)} − μ_r‖`.
    pub errors: Vec<f64>,
    /// `permutation[r]`: estimated center matched to true mean `r`.
    pub permutation: Vec<usize>,
    /// `7√(k/(w_min m))‖A − E[A]‖`
    pub bound: f64,
    /// `0.1Δμ`
    pub tenth_separation: f64,
    /// Every error is at most `bound`.
    pub within_bound: bool,
    /// Every error is at most `0.1Δμ`.
    pub within_tenth_separation: bool,
    /// `bound ≤ 0.1Δμ`: the spectral bound alone already implies closeness.
    pub bound_in_regime: bool,
    /// `within_bound && within_tenth_separation`.
    pub holds: bool,
}

pub fn center_error_check(
    centers: &CenterSet,
    model: &MixtureModel,
    noise_norm: f64,
    m: usize,
    k: usize,
) -> Result<CenterErrorReport> {
    if centers.k() != k || model.k() != k {
        return Err(Error::Dimension(format!(
            "k = {k}, centers {}, model {}",
            centers.k(),
            model.k()
        )));
    }
    let permutation = linalg::match_rows(model.means(), centers.centers())?;
    let errors: Vec<f64> = permutation
        .iter()
        .enumerate()
        .map(|(r, &s)| linalg::squared_distance(model.mean(r), centers.center(s)).sqrt())
        .collect();
    let bound = 7.0 * (k as f64 / (model.w_min() * m as f64)).sqrt() * noise_norm;
    let tenth_separation = 0.1 * models::separation(model)?;
    let within_bound = errors.iter().all(|&e| e <= bound);
    let within_tenth_separation = errors.iter().all(|&e| e <= tenth_separation);
    Ok(CenterErrorReport {
        errors,
        permutation,
        bound,
        tenth_separation,
        within_bound,
        within_tenth_separation,
        bound_in_regime: bound <= tenth_separation,
        holds: within_bound && within_tenth_separation,
    })
}

/// `|Û_{π(r)} ∩ U_r| / |U_r|` under the overlap-maximizing matching `π`.
pub fn overlap_check(clusters: &[usize], truth: &[usize], k: usize) -> Result<Vec<f64>> {
    let conf = confusion_matrix(clusters, truth, k)?;
    let perm = best_matching(&conf)?;
    Ok(perm
        .iter()
        .enumerate()
        .map(|(r, &s)| {
            let size: usize = conf[r].iter().sum();
            if size == 0 {
                1.0
            } else {
                conf[r][s] as f64 / size as f64
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnSumReport {
    pub max_column_sum: f64,
    /// `max_column_sum / (m σ²)`
    pub ratio: f64,
}

pub fn column_sum_check(a: &DenseMatrix, sigma_sq: f64, m: usize) -> ColumnSumReport {
    let mut sums = vec![0.0; a.cols()];
    for row in a.row_iter() {
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    let max_column_sum = sums.into_iter().fold(0.0, f64::max);
    let scale = m as f64 * sigma_sq;
    ColumnSumReport {
        max_column_sum,
        ratio: if scale > 0.0 { max_column_sum / scale } else { 0.0 },
    }
}

/// Terms of the nearest-center decomposition for one competitor `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    pub s: usize,
    /// `‖μ̂_r − μ̂_s‖²`
    pub gap_sq: f64,
    /// `|⟨μ_r − μ̂_r, μ̂_r − μ̂_s⟩|`
    pub center_term: f64,
    /// `|⟨a − μ_r, μ̂_r − μ̂_s⟩|`
    pub sample_term: f64,
    /// `μ̂_r = μ̂_s`; neither quarter bound can hold.
    pub degenerate: bool,
}

impl Margin {
    pub fn center_bound_holds(&self) -> bool {
        self.center_term < 0.25 * self.gap_sq
    }

    pub fn sample_bound_holds(&self) -> bool {
        self.sample_term < 0.25 * self.gap_sq
    }
}

/// Decomposition terms for sample `a` drawn from component `r` with mean
/// `true_mean`, against every other center.
pub fn assignment_margins(
    a: &[f64],
    r: usize,
    centers: &CenterSet,
    true_mean: &[f64],
) -> Result<Vec<Margin>> {
    let n = centers.dim();
    if a.len() != n || true_mean.len() != n {
        return Err(Error::Dimension(format!(
            "sample {} and mean {} vs center dimension {n}",
            a.len(),
            true_mean.len()
        )));
    }
    if r >= centers.k() {
        return Err(Error::InvalidParameter(format!("label {r} >= k = {}", centers.k())));
    }
    let mu_hat_r = centers.center(r);
    let center_err: Vec<f64> = true_mean.iter().zip(mu_hat_r).map(|(x, y)| x - y).collect();
    let sample_dev: Vec<f64> = a.iter().zip(true_mean).map(|(x, y)| x - y).collect();
    Ok((0..centers.k())
        .filter(|&s| s != r)
        .map(|s| {
            let gap: Vec<f64> = mu_hat_r.iter().zip(centers.center(s)).map(|(x, y)| x - y).collect();
            let gap_sq = dot(&gap, &gap);
            Margin {
                s,
                gap_sq,
                center_term: dot(&center_err, &gap).abs(),
                sample_term: dot(&sample_dev, &gap).abs(),
                degenerate: gap_sq == 0.0,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lab(v: &[usize]) -> Labeling {
        Labeling::new(v.to_vec())
    }

    #[test]
    fn score_examples() {
        let t = lab(&[0, 0, 1, 1]);
        let s = score(&t, &t, 2).unwrap();
        assert!(s.exact);
        assert_eq!(s.accuracy, 1.0);
        let swapped = score(&lab(&[1, 1, 0, 0]), &t, 2).unwrap();
        assert!(swapped.exact);
        assert_eq!(swapped.permutation, vec![1, 0]);
        let off = score(&lab(&[0, 1, 1, 1]), &t, 2).unwrap();
        assert!(!off.exact);
        assert_eq!(off.accuracy, 0.75);
        assert!(score(&lab(&[0]), &t, 2).is_err());
    }

    #[test]
    fn overlap_examples() {
        let truth: Vec<usize> = (0..20).map(|i| i / 10).collect();
        assert_eq!(overlap_check(&truth, &truth, 2).unwrap(), vec![1.0, 1.0]);
        let mut moved = truth.clone();
        moved[3] = 1;
        let f = overlap_check(&moved, &truth, 2).unwrap();
        assert!((f[0] - 0.9).abs() < 1e-15);
        assert_eq!(f[1], 1.0);
    }

    #[test]
    fn column_sums() {
        let z = DenseMatrix::zeros(4, 3);
        assert_eq!(column_sum_check(&z, 0.5, 4).max_column_sum, 0.0);
        let ones = DenseMatrix::from_rows(&[[1.0, 0.0], [1.0, 0.0], [1.0, 1.0]]).unwrap();
        let r = column_sum_check(&ones, 1.0, 3);
        assert_eq!(r.max_column_sum, 3.0);
        assert_eq!(r.ratio, 1.0);
    }

    #[test]
    fn margins_at_the_true_center() {
        let centers = CenterSet::from_centers(DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap());
        let m = assignment_margins(&[1.0, 0.0], 0, &centers, &[1.0, 0.0]).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].s, 1);
        assert_eq!(m[0].gap_sq, 2.0);
        assert_eq!(m[0].center_term, 0.0);
        assert_eq!(m[0].sample_term, 0.0);
        assert!(m[0].center_bound_holds() && m[0].sample_bound_holds());
    }

    #[test]
    fn margins_flag_coincident_centers() {
        let centers = CenterSet::from_centers(DenseMatrix::from_rows(&[[0.5, 0.5], [0.5, 0.5]]).unwrap());
        let m = assignment_margins(&[1.0, 0.0], 0, &centers, &[0.5, 0.5]).unwrap();
        assert!(m[0].degenerate);
        assert_eq!(m[0].gap_sq, 0.0);
        assert!(!m[0].center_bound_holds());
        assert!(assignment_margins(&[1.0], 0, &centers, &[0.5, 0.5]).is_err());
    }

    fn two_means() -> MixtureModel {
        MixtureModel::new(
            DenseMatrix::from_rows(&[[0.4, 0.4, 0.1, 0.1], [0.1, 0.1, 0.4, 0.4]]).unwrap(),
            vec![0.5, 0.5],
            None,
        )
        .unwrap()
    }

    #[test]
    fn center_error_exact_means() {
        let model = two_means();
        let centers = CenterSet::from_centers(model.means().select_rows(&[1, 0]));
        let r = center_error_check(&centers, &model, 0.0, 100, 2).unwrap();
        assert_eq!(r.errors, vec![0.0, 0.0]);
        assert_eq!(r.permutation, vec![1, 0]);
        assert!(r.holds);
    }

    #[test]
    fn center_error_constructed_violation() {
        let model = two_means();
        let dmu = models::separation(&model).unwrap();
        // Shift both centers by 0.2Δμ along the first coordinate.
        let mut shifted = model.means().clone();
        for r in 0..2 {
            shifted[(r, 0)] += 0.2 * dmu;
        }
        let centers = CenterSet::from_centers(shifted);
        let r = center_error_check(&centers, &model, 100.0, 100, 2).unwrap();
        assert!(r.errors.iter().all(|e| (e - 0.2 * dmu).abs() < 1e-12));
        assert!(r.within_bound);
        assert!(!r.within_tenth_separation);
        assert!(!r.holds);
        assert!(center_error_check(&centers, &model, 1.0, 100, 3).is_err());
    }

    #[test]
    fn report_on_noiseless_data() {
        let model = MixtureModel::new(
            DenseMatrix::from_rows(&[[1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 1.0]]).unwrap(),
            vec![0.5, 0.5],
            None,
        )
        .unwrap();
        let ds = models::sample(&model, 6, 2).unwrap();
        let rep = condition_report(&ds, &model, None, 2).unwrap();
        assert_eq!(rep.spectral_noise_sq, 0.0);
        assert_eq!(rep.delta_mu, 2.0);
        assert!(rep.bsbm_lhs.is_none());
        assert!(rep.heuristics(1.0).spectral_condition);
        assert!(condition_report(&BinaryDataset::new(ds.matrix().clone()).unwrap(), &model, None, 2).is_err());
    }

    #[test]
    fn report_keys_are_flat_snake_case() {
        let rep = ConditionReport {
            spectral_noise_sq: 1.0,
            spectral_threshold: 2.0,
            m_sigma_sq: 3.0,
            delta_mu: 4.0,
            sigma_over_wmin_sqrt: 5.0,
            bsbm_lhs: None,
            bsbm_rhs_shape: Some(6.0),
            talagrand_ratio: Some(7.0),
        };
        let v = serde_json::to_value(&rep).unwrap();
        let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        keys.sort();
        assert_eq!(
            keys,
            [
                "bsbm_lhs",
                "bsbm_rhs_shape",
                "delta_mu",
                "m_sigma_sq",
                "sigma_over_wmin_sqrt",
                "spectral_noise_sq",
                "spectral_threshold",
                "talagrand_ratio"
            ]
        );
        let s = serde_json::to_value(score(&lab(&[0, 1]), &lab(&[0, 1]), 2).unwrap()).unwrap();
        let mut keys: Vec<&str> = s.as_object().unwrap().keys().map(String::as_str).collect();
        keys.sort();
        assert_eq!(keys, ["accuracy", "confusion", "exact", "permutation"]);
    }
}
