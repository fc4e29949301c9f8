//! ROC construction, trapezoidal AUC, and TPR at a fixed threshold.

use std::io::Write;

use crate::error::{Error, Result};

/// ROC curve: `(FPR, TPR)` points ordered from `(0, 0)` to `(1, 1)`, plus the
/// thresholds that generated them. The first point corresponds to a sentinel
/// threshold above every score; each following point lowers the threshold to
/// the next unique score (prediction rule: `score >= threshold`).
#[derive(Clone, Debug)]
pub struct RocCurve {
    pub points: Vec<(f64, f64)>,
    pub thresholds: Vec<f64>,
}

fn check_scores_labels(scores: &[f64], labels: &[usize]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Metric(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Metric(
            "ROC/AUC need both classes present".into(),
        ));
    }
    Ok((positives, negatives))
}

/// Builds the ROC curve from class-1 scores and `{0,1}` labels.
pub fn roc_curve(scores: &[f64], labels: &[usize]) -> Result<RocCurve> {
    let (positives, negatives) = check_scores_labels(scores, labels)?;

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());

    let sentinel = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1.0;
    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = vec![sentinel];

    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        // absorb the whole tie block before emitting a point
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / negatives as f64, tp as f64 / positives as f64));
        thresholds.push(threshold);
    }
    debug_assert_eq!(points.last(), Some(&(1.0, 1.0)));
    Ok(RocCurve { points, thresholds })
}

impl RocCurve {
    /// Writes the curve as CSV `threshold,fpr,tpr`.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "threshold,fpr,tpr")?;
        for (t, (fpr, tpr)) in self.thresholds.iter().zip(&self.points) {
            writeln!(w, "{t},{fpr},{tpr}")?;
        }
        Ok(())
    }
}

/// Area under the ROC curve by the trapezoidal rule over FPR.
pub fn auc(curve: &RocCurve) -> f64 {
    let mut area = 0.0;
    for pair in curve.points.windows(2) {
        let (x0, y0) = pair[0];
        let (x1, y1) = pair[1];
        area += (x1 - x0) * (y0 + y1) / 2.0;
    }
    area
}

/// Convenience: ROC then AUC in one call.
pub fn auc_from_scores(scores: &[f64], labels: &[usize]) -> Result<f64> {
    Ok(auc(&roc_curve(scores, labels)?))
}

/// Fraction of positives with `score >= threshold`.
pub fn tpr_at_threshold(scores: &[f64], labels: &[usize], threshold: f64) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Metric(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    if positives == 0 {
        return Err(Error::Metric("TPR needs at least one positive".into()));
    }
    let hits = scores
        .iter()
        .zip(labels)
        .filter(|&(&s, &l)| l == 1 && s >= threshold)
        .count();
    Ok(hits as f64 / positives as f64)
}

/// Default operating point: 0.5 on the class-1 probability.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent pairwise oracle: P(score_pos > score_neg) + 0.5 * ties.
    fn mann_whitney(scores: &[f64], labels: &[usize]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &si) in scores.iter().enumerate() {
            if labels[i] != 1 {
                continue;
            }
            for (j, &sj) in scores.iter().enumerate() {
                if labels[j] != 0 {
                    continue;
                }
                pairs += 1.0;
                if si > sj {
                    wins += 1.0;
                } else if si == sj {
                    wins += 0.5;
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn perfect_separation_hits_origin_corner() {
        let scores = [0.9, 0.8, 0.2, 0.1];
        let labels = [1, 1, 0, 0];
        let curve = roc_curve(&scores, &labels).unwrap();
        assert!(curve.points.contains(&(0.0, 1.0)));
        assert_eq!(auc(&curve), 1.0);
    }

    #[test]
    fn constant_scores_are_the_diagonal() {
        let scores = [0.5, 0.5, 0.5, 0.5];
        let labels = [1, 0, 1, 0];
        let curve = roc_curve(&scores, &labels).unwrap();
        assert_eq!(curve.points, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(auc(&curve), 0.5);
    }

    #[test]
    fn known_instance_matches_threshold_enumeration() {
        let scores = [0.1, 0.4, 0.35, 0.8];
        let labels = [0, 0, 1, 1];
        let curve = roc_curve(&scores, &labels).unwrap();
        // thresholds: sentinel, 0.8, 0.4, 0.35, 0.1 (descending unique)
        let expected = vec![
            (0.0, 0.0),
            (0.0, 0.5),  // >= 0.8
            (0.5, 0.5),  // >= 0.4
            (0.5, 1.0),  // >= 0.35
            (1.0, 1.0),  // >= 0.1
        ];
        assert_eq!(curve.points, expected);
        assert!((auc(&curve) - mann_whitney(&scores, &labels)).abs() < 1e-12);
    }

    #[test]
    fn single_class_is_undefined() {
        assert!(roc_curve(&[0.5, 0.6], &[1, 1]).is_err());
        assert!(tpr_at_threshold(&[0.5], &[0], 0.5).is_err());
    }

    #[test]
    fn curve_is_monotonic() {
        let mut rng_state = 123456789u64;
        let mut next = move || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (rng_state >> 33) as f64 / (1u64 << 31) as f64
        };
        for _ in 0..20 {
            let n = 50;
            let scores: Vec<f64> = (0..n).map(|_| next()).collect();
            let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
            let curve = roc_curve(&scores, &labels).unwrap();
            for pair in curve.points.windows(2) {
                assert!(pair[1].0 >= pair[0].0);
                assert!(pair[1].1 >= pair[0].1);
            }
            assert_eq!(curve.points[0], (0.0, 0.0));
            assert_eq!(*curve.points.last().unwrap(), (1.0, 1.0));
        }
    }

    #[test]
    fn tpr_boundary_uses_greater_or_equal() {
        let scores = [0.5, 0.49];
        let labels = [1, 1, 0];
        // add one negative so the metric is well-posed elsewhere
        let scores_full = [scores[0], scores[1], 0.2];
        assert_eq!(tpr_at_threshold(&scores_full, &labels, 0.5).unwrap(), 0.5);
    }

    #[test]
    fn tpr_extremes() {
        let labels = [1, 1, 0];
        assert_eq!(tpr_at_threshold(&[0.9, 0.9, 0.1], &labels, 0.5).unwrap(), 1.0);
        assert_eq!(tpr_at_threshold(&[0.1, 0.1, 0.9], &labels, 0.5).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn auc_equals_mann_whitney(
            scores in proptest::collection::vec(0.0f64..1.0, 4..60),
            flips in proptest::collection::vec(any::<bool>(), 4..60),
        ) {
            let n = scores.len().min(flips.len());
            let scores = &scores[..n];
            let labels: Vec<usize> = flips[..n].iter().map(|&b| b as usize).collect();
            prop_assume!(labels.iter().any(|&l| l == 1) && labels.iter().any(|&l| l == 0));
            let a = auc_from_scores(scores, &labels).unwrap();
            prop_assert!((a - mann_whitney(scores, &labels)).abs() < 1e-9);
        }

        #[test]
        fn auc_invariant_under_monotone_transform(
            scores in proptest::collection::vec(0.0f64..1.0, 4..40),
            flips in proptest::collection::vec(any::<bool>(), 4..40),
        ) {
            let n = scores.len().min(flips.len());
            let scores = &scores[..n];
            let labels: Vec<usize> = flips[..n].iter().map(|&b| b as usize).collect();
            prop_assume!(labels.iter().any(|&l| l == 1) && labels.iter().any(|&l| l == 0));
            let a = auc_from_scores(scores, &labels).unwrap();
            // strictly monotone transform: x -> sigmoid(3x + 1)
            let transformed: Vec<f64> = scores.iter().map(|&s| 1.0 / (1.0 + (-(3.0 * s + 1.0)).exp())).collect();
            let b = auc_from_scores(&transformed, &labels).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn label_swap_mirrors_auc(
            scores in proptest::collection::vec(0.0f64..1.0, 4..40),
            flips in proptest::collection::vec(any::<bool>(), 4..40),
        ) {
            let n = scores.len().min(flips.len());
            let scores = &scores[..n];
            let labels: Vec<usize> = flips[..n].iter().map(|&b| b as usize).collect();
            prop_assume!(labels.iter().any(|&l| l == 1) && labels.iter().any(|&l| l == 0));
            let a = auc_from_scores(scores, &labels).unwrap();
            let swapped: Vec<usize> = labels.iter().map(|&l| 1 - l).collect();
            let b = auc_from_scores(scores, &swapped).unwrap();
            prop_assert!((a - (1.0 - b)).abs() < 1e-9);
        }
    }
}
