//! Separability metrics between ID and OOD novelty scores, plus
//! aggregation over repeated runs.
//!
//! OOD is the positive class by default: a detector is good when OOD
//! samples receive higher scores. AUROC uses the Mann-Whitney convention
//! (half credit for ties); FPR@95 picks the threshold from the positive
//! side's score quantile.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// ID and OOD score vectors for one evaluation cell.
#[derive(Debug, Clone)]
pub struct ScorePair {
    pub id_scores: Vec<f64>,
    pub ood_scores: Vec<f64>,
}

impl ScorePair {
    pub fn new(id_scores: Vec<f64>, ood_scores: Vec<f64>) -> Result<Self> {
        if id_scores.is_empty() || ood_scores.is_empty() {
            return Err(Error::invalid("score pair must have both sides nonempty"));
        }
        if !id_scores.iter().chain(ood_scores.iter()).all(|v| v.is_finite()) {
            return Err(Error::invalid("scores must be finite"));
        }
        Ok(ScorePair {
            id_scores,
            ood_scores,
        })
    }
}

/// Which side counts as the positive class for FPR@TPR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PositiveSide {
    Ood,
    Id,
}

/// AUROC by rank statistics in O((n+m) log(n+m)): the probability that a
/// random OOD score exceeds a random ID score, ties counted half.
pub fn auroc(pair: &ScorePair) -> Result<f64> {
    let n = pair.id_scores.len();
    let m = pair.ood_scores.len();
    if n == 0 || m == 0 {
        return Err(Error::invalid("auroc: empty side"));
    }
    // pool and sort; ranks are 1-based with ties sharing the average rank
    let mut pooled: Vec<(f64, bool)> = pair
        .id_scores
        .iter()
        .map(|&s| (s, false))
        .chain(pair.ood_scores.iter().map(|&s| (s, true)))
        .collect();
    pooled.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let mut rank_sum_ood = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j + 1 < pooled.len() && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        // items i..=j share ranks i+1..=j+1; average rank:
        let avg_rank = (i + 1 + j + 1) as f64 / 2.0;
        for item in &pooled[i..=j] {
            if item.1 {
                rank_sum_ood += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_ood - (m * (m + 1)) as f64 / 2.0;
    Ok(u / (n as f64 * m as f64))
}

/// FPR at the threshold where the positive side reaches `tpr_target`.
///
/// With OOD positive: lambda is the largest threshold such that the
/// fraction of OOD scores >= lambda is at least the target; the result is
/// the fraction of ID scores >= lambda. The ID-positive variant mirrors
/// this with ID samples flagged below the threshold.
pub fn fpr_at_tpr(pair: &ScorePair, tpr_target: f64, positive: PositiveSide) -> Result<f64> {
    if pair.id_scores.is_empty() || pair.ood_scores.is_empty() {
        return Err(Error::invalid("fpr_at_tpr: empty side"));
    }
    if !(tpr_target > 0.0 && tpr_target < 1.0) {
        return Err(Error::invalid(format!(
            "tpr target must lie in (0,1), got {tpr_target}"
        )));
    }
    match positive {
        PositiveSide::Ood => {
            let m = pair.ood_scores.len();
            let k = (tpr_target * m as f64).ceil() as usize;
            let k = k.clamp(1, m);
            // k-th largest OOD score
            let mut sorted = pair.ood_scores.clone();
            sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let lambda = sorted[k - 1];
            let fp = pair.id_scores.iter().filter(|&&s| s >= lambda).count();
            Ok(fp as f64 / pair.id_scores.len() as f64)
        }
        PositiveSide::Id => {
            // ID is flagged when score <= lambda; lambda from the ID quantile
            let n = pair.id_scores.len();
            let k = (tpr_target * n as f64).ceil() as usize;
            let k = k.clamp(1, n);
            let mut sorted = pair.id_scores.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let lambda = sorted[k - 1];
            let fp = pair.ood_scores.iter().filter(|&&s| s <= lambda).count();
            Ok(fp as f64 / pair.ood_scores.len() as f64)
        }
    }
}

/// Convenience wrapper with the 0.95 target and OOD positive.
pub fn fpr_at_95(pair: &ScorePair) -> Result<f64> {
    fpr_at_tpr(pair, 0.95, PositiveSide::Ood)
}

/// Mean and population standard deviation over repeated runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl MetricSummary {
    /// Render on the paper-style 0-100 scale with one decimal, e.g. "96.5±0.2".
    pub fn cell(&self) -> String {
        format!("{:.1}±{:.1}", self.mean * 100.0, self.std * 100.0)
    }
}

pub fn summarize(metric: &str, repeats: &[f64]) -> Result<MetricSummary> {
    if repeats.is_empty() {
        return Err(Error::invalid("summarize: empty repeat list"));
    }
    let n = repeats.len() as f64;
    let mean = repeats.iter().sum::<f64>() / n;
    let var = repeats.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok(MetricSummary {
        metric: metric.to_string(),
        mean,
        std: var.sqrt(),
        count: repeats.len(),
    })
}

/// Brute-force AUROC by pair counting, O(n*m). Kept public so test suites
/// can cross-check the rank-based implementation against it.
pub fn auroc_brute_force(pair: &ScorePair) -> f64 {
    let mut credit = 0.0;
    for &o in &pair.ood_scores {
        for &i in &pair.id_scores {
            if o > i {
                credit += 1.0;
            } else if o == i {
                credit += 0.5;
            }
        }
    }
    credit / (pair.id_scores.len() * pair.ood_scores.len()) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{rng_from_seed, uniform_vec};
    use rand::Rng;

    fn pair(id: &[f64], ood: &[f64]) -> ScorePair {
        ScorePair::new(id.to_vec(), ood.to_vec()).unwrap()
    }

    #[test]
    fn auroc_perfect_separation() {
        let p = pair(&[1.0, 2.0, 3.0], &[10.0, 11.0]);
        assert_eq!(auroc(&p).unwrap(), 1.0);
    }

    #[test]
    fn auroc_identical_multisets_is_half() {
        let p = pair(&[0.3, 0.7, 0.7], &[0.3, 0.7, 0.7]);
        assert!((auroc(&p).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn auroc_hand_counted_cross_pairs() {
        // brute force over all 6 cross pairs: (0.25 beats 0.1, 0.2; loses to 0.3)
        // (0.4 beats all three) -> 5/6
        let p = pair(&[0.1, 0.2, 0.3], &[0.25, 0.4]);
        assert!((auroc(&p).unwrap() - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn auroc_matches_brute_force_with_ties() {
        let mut rng = rng_from_seed(11);
        for _ in 0..200 {
            let n = rng.gen_range(1..40);
            let m = rng.gen_range(1..40);
            // draw from a small grid so ties are common
            let id: Vec<f64> = (0..n).map(|_| rng.gen_range(0..8) as f64 / 4.0).collect();
            let ood: Vec<f64> = (0..m).map(|_| rng.gen_range(0..8) as f64 / 4.0).collect();
            let p = pair(&id, &ood);
            assert!((auroc(&p).unwrap() - auroc_brute_force(&p)).abs() < 1e-12);
        }
    }

    #[test]
    fn auroc_antisymmetry() {
        let mut rng = rng_from_seed(5);
        let id = uniform_vec(&mut rng, 50, -1.0, 1.0);
        let ood = uniform_vec(&mut rng, 30, -1.0, 1.0);
        let p = pair(&id, &ood);
        let swapped = pair(&ood, &id);
        assert!((auroc(&p).unwrap() + auroc(&swapped).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn auroc_invariant_under_monotone_transform() {
        let mut rng = rng_from_seed(9);
        let id = uniform_vec(&mut rng, 40, -2.0, 2.0);
        let ood = uniform_vec(&mut rng, 25, -2.0, 2.0);
        let p = pair(&id, &ood);
        let t = pair(
            &id.iter().map(|v| v.exp()).collect::<Vec<_>>(),
            &ood.iter().map(|v| v.exp()).collect::<Vec<_>>(),
        );
        assert_eq!(auroc(&p).unwrap(), auroc(&t).unwrap());
        assert_eq!(fpr_at_95(&p).unwrap(), fpr_at_95(&t).unwrap());
    }

    #[test]
    fn fpr_order_statistics_by_hand() {
        // ID all 0, OOD = 1..=100: lambda = 6 (95th largest), FPR = 0
        let id = vec![0.0; 10];
        let ood: Vec<f64> = (1..=100).map(|v| v as f64).collect();
        let p = pair(&id, &ood);
        // verify lambda by recomputing the fraction above 6
        assert!(ood.iter().filter(|&&s| s >= 6.0).count() as f64 / 100.0 >= 0.95);
        assert_eq!(fpr_at_95(&p).unwrap(), 0.0);
    }

    #[test]
    fn fpr_zero_when_ood_separated() {
        let p = pair(&[0.0, 0.1, 0.2], &[5.0, 6.0, 7.0]);
        assert_eq!(fpr_at_95(&p).unwrap(), 0.0);
    }

    #[test]
    fn fpr_non_increasing_in_target() {
        let mut rng = rng_from_seed(21);
        let id = uniform_vec(&mut rng, 300, 0.0, 1.0);
        let ood = uniform_vec(&mut rng, 300, 0.2, 1.2);
        let p = pair(&id, &ood);
        let mut prev = f64::INFINITY;
        for t in [0.99, 0.95, 0.9, 0.5, 0.1] {
            let f = fpr_at_tpr(&p, t, PositiveSide::Ood).unwrap();
            assert!(f <= prev + 1e-15, "target {t}: {f} > {prev}");
            prev = f;
        }
    }

    #[test]
    fn fpr_id_positive_convention() {
        // ID separated below OOD: flagging ID below lambda never catches OOD
        let p = pair(&[0.0, 0.1, 0.2], &[5.0, 6.0, 7.0]);
        assert_eq!(fpr_at_tpr(&p, 0.95, PositiveSide::Id).unwrap(), 0.0);
    }

    #[test]
    fn summarize_constant_and_degenerate() {
        let s = summarize("auroc", &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!((s.mean, s.std, s.count), (1.0, 0.0, 3));
        let s = summarize("auroc", &[0.5]).unwrap();
        assert_eq!((s.std, s.count), (0.0, 1));
    }

    #[test]
    fn summarize_population_std() {
        let s = summarize("fpr", &[0.0, 2.0]).unwrap();
        assert_eq!(s.mean, 1.0);
        assert_eq!(s.std, 1.0);
    }

    #[test]
    fn cell_formatting_matches_table_style() {
        let s = MetricSummary {
            metric: "auroc".into(),
            mean: 0.965,
            std: 0.002,
            count: 5,
        };
        assert_eq!(s.cell(), "96.5±0.2");
        let s2 = MetricSummary {
            metric: "auroc".into(),
            mean: 0.500,
            std: 0.004,
            count: 5,
        };
        assert_eq!(s2.cell(), "50.0±0.4");
    }

    #[test]
    fn empty_sides_are_rejected() {
        assert!(ScorePair::new(vec![], vec![1.0]).is_err());
        assert!(ScorePair::new(vec![1.0], vec![]).is_err());
        assert!(summarize("x", &[]).is_err());
    }
}
