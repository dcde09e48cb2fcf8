//! ROC curves, SOC points, F1 and threshold selection.

use serde::{Deserialize, Serialize};

use super::merge::ThresholdSet;
use super::scores::{argmax_rows, soft_confusion, SoftAnd};
use super::EvalSet;
use crate::error::{Error, Result};

/// Offset of the final "detect nothing" threshold above 1.
pub const ROC_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub category: usize,
    pub positives: usize,
    pub negatives: usize,
    /// Ordered by increasing threshold.
    pub points: Vec<RocPoint>,
}

/// One-vs-rest ROC curve of category `i`. Positives are examples whose
/// target argmax is `i`; an example is detected at `theta` when its
/// predicted probability for `i` is at least `theta`.
pub fn roc_curve(set: &EvalSet, i: usize) -> Result<RocCurve> {
    if i >= set.k() {
        return Err(Error::Shape(format!("category {i} out of range for {} categories", set.k())));
    }
    let truth = argmax_rows(set.targets());
    let mut scored: Vec<(f64, bool)> = (0..set.n()).map(|n| (set.prediction(n)[i], truth[n] == i)).collect();
    let positives = scored.iter().filter(|s| s.1).count();
    let negatives = scored.len() - positives;
    if positives == 0 {
        return Err(Error::UndefinedCurve { category: i, side: "positive" });
    }
    if negatives == 0 {
        return Err(Error::UndefinedCurve { category: i, side: "negative" });
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut thresholds: Vec<f64> = scored.iter().map(|s| s.0).collect();
    thresholds.push(0.0);
    thresholds.push(1.0 + ROC_EPSILON);
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();

    // walk thresholds from high to low, counting scores at or above each
    let (p, q) = (positives as f64, negatives as f64);
    let (mut tp, mut fp, mut next) = (0usize, 0usize, 0usize);
    let mut points = Vec::with_capacity(thresholds.len());
    for theta in thresholds {
        while next < scored.len() && scored[next].0 >= theta {
            if scored[next].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            next += 1;
        }
        points.push(RocPoint {
            threshold: theta,
            fpr: fp as f64 / q,
            tpr: tp as f64 / p,
        });
    }
    points.reverse();
    Ok(RocCurve {
        category: i,
        positives,
        negatives,
        points,
    })
}

/// Trapezoidal area under the curve.
pub fn auc(curve: &RocCurve) -> f64 {
    curve
        .points
        .windows(2)
        .map(|w| (w[0].fpr - w[1].fpr) * (w[0].tpr + w[1].tpr) / 2.0)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SocPoint {
    pub mode: SoftAnd,
    pub fpr: f64,
    pub tpr: f64,
}

/// Soft TPR/FPR of category `i` from the strong, product and weak soft
/// confusion matrices, in that order.
pub fn soc_points(set: &EvalSet, i: usize) -> Result<[SocPoint; 3]> {
    if i >= set.k() {
        return Err(Error::Shape(format!("category {i} out of range for {} categories", set.k())));
    }
    let mut out = Vec::with_capacity(3);
    for mode in SoftAnd::ALL {
        let m = soft_confusion(set, mode);
        let row: f64 = m[i].iter().sum();
        let (mut fp, mut neg) = (0.0, 0.0);
        for (k, r) in m.iter().enumerate() {
            if k != i {
                fp += r[i];
                neg += r.iter().sum::<f64>();
            }
        }
        if row <= 0.0 {
            return Err(Error::UndefinedPoint(format!("{mode:?} soft confusion row {i} is empty")));
        }
        if neg <= 0.0 {
            return Err(Error::UndefinedPoint(format!("{mode:?} soft confusion has no mass outside row {i}")));
        }
        out.push(SocPoint {
            mode,
            fpr: fp / neg,
            tpr: m[i][i] / row,
        });
    }
    Ok([out[0], out[1], out[2]])
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Points `(fpr, tpr)` of constant F1 for a problem with the given numbers
/// (or masses) of positives and negatives.
pub fn f1_isometric(f1: f64, positives: f64, negatives: f64, samples: usize) -> Vec<(f64, f64)> {
    assert!(f1 > 0.0 && f1 <= 1.0 && samples >= 2);
    let start = f1 / (2.0 - f1);
    (0..samples)
        .filter_map(|s| {
            let tpr = start + (1.0 - start) * s as f64 / (samples - 1) as f64;
            let fpr = positives * (tpr * (2.0 / f1 - 1.0) - 1.0) / negatives;
            (fpr <= 1.0).then_some((fpr.max(0.0), tpr))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    F1,
    Accuracy,
}

impl Criterion {
    fn score(self, tp: f64, fp: f64, positives: f64, negatives: f64) -> f64 {
        match self {
            Criterion::Accuracy => (tp + negatives - fp) / (positives + negatives),
            Criterion::F1 => {
                if tp == 0.0 {
                    0.0
                } else {
                    2.0 * tp / (2.0 * tp + fp + (positives - tp))
                }
            }
        }
    }
}

/// Best threshold of one curve under `criterion`, ties to the larger
/// threshold. Returns `(threshold, score)`.
pub(crate) fn best_threshold(curve: &RocCurve, criterion: Criterion) -> (f64, f64) {
    let (p, q) = (curve.positives as f64, curve.negatives as f64);
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for pt in &curve.points {
        let s = criterion.score((pt.tpr * p).round(), (pt.fpr * q).round(), p, q);
        if s >= best.1 {
            best = (pt.threshold, s);
        }
    }
    best
}

/// Per-category thresholds maximizing `criterion` over each ROC curve.
pub fn optimal_thresholds(set: &EvalSet, criterion: Criterion) -> Result<ThresholdSet> {
    let mut thresholds = Vec::with_capacity(set.k());
    for i in 0..set.k() {
        thresholds.push(best_threshold(&roc_curve(set, i)?, criterion).0);
    }
    ThresholdSet::new(thresholds, format!("{criterion:?}-maximizing").to_lowercase())
}

#[cfg(test)]
mod tests {
    use super::super::testing::random_set;
    use super::*;
    use ndarray::{arr2, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn binary(scores: &[f64], labels: &[bool]) -> EvalSet {
        let t = Array2::from_shape_fn((scores.len(), 2), |(n, j)| if (j == 0) == labels[n] { 1.0 } else { 0.0 });
        let p = Array2::from_shape_fn((scores.len(), 2), |(n, j)| if j == 0 { scores[n] } else { 1.0 - scores[n] });
        EvalSet::new(t, p).unwrap()
    }

    #[test]
    fn perfect_ranking_has_unit_area() {
        let s = binary(&[0.9, 0.8, 0.7, 0.3, 0.2], &[true, true, true, false, false]);
        assert!((auc(&roc_curve(&s, 0).unwrap()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tied_scores_give_the_diagonal() {
        let s = binary(&[0.5; 4], &[true, false, true, false]);
        let c = roc_curve(&s, 0).unwrap();
        let pts: Vec<(f64, f64, f64)> = c.points.iter().map(|p| (p.threshold, p.fpr, p.tpr)).collect();
        assert_eq!(pts, vec![(0.0, 1.0, 1.0), (0.5, 1.0, 1.0), (1.0 + ROC_EPSILON, 0.0, 0.0)]);
        assert!((auc(&c) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn missing_side_is_named() {
        let s = binary(&[0.2, 0.4], &[true, true]);
        assert!(matches!(roc_curve(&s, 0), Err(Error::UndefinedCurve { side: "negative", .. })));
        assert!(matches!(roc_curve(&s, 1), Err(Error::UndefinedCurve { side: "positive", .. })));
    }

    #[test]
    fn curve_matches_threshold_counting() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = random_set(&mut rng, 300, 5);
        let truth = argmax_rows(s.targets());
        for i in 0..5 {
            let c = roc_curve(&s, i).unwrap();
            for w in c.points.windows(2) {
                assert!(w[0].threshold < w[1].threshold);
                assert!(w[0].fpr >= w[1].fpr && w[0].tpr >= w[1].tpr);
            }
            for pt in &c.points {
                let mut counts = [0.0; 4];
                for n in 0..s.n() {
                    let hit = s.prediction(n)[i] >= pt.threshold;
                    let pos = truth[n] == i;
                    counts[(pos as usize) * 2 + hit as usize] += 1.0;
                }
                assert!((pt.tpr - counts[3] / (counts[2] + counts[3])).abs() < 1e-12);
                assert!((pt.fpr - counts[1] / (counts[0] + counts[1])).abs() < 1e-12);
            }
            let a = auc(&c);
            assert!((0.0..=1.0).contains(&a));
        }
    }

    #[test]
    fn soc_perfect_agreement() {
        let t = arr2(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        let s = EvalSet::new(t.clone(), t).unwrap();
        for pt in soc_points(&s, 1).unwrap() {
            assert_eq!((pt.fpr, pt.tpr), (0.0, 1.0));
        }
    }

    #[test]
    fn soc_hand_computed() {
        // two examples over two categories
        let t = arr2(&[[0.7, 0.3], [0.2, 0.8]]);
        let p = arr2(&[[0.6, 0.4], [0.5, 0.5]]);
        let s = EvalSet::new(t, p).unwrap();
        let [strong, product, weak] = soc_points(&s, 0).unwrap();
        // strong: M00 = 0.3 + 0 = 0.3, M01 = 0.1 + 0 = 0.1, M10 = 0 + 0.3 = 0.3, M11 = 0 + 0.3 = 0.3
        assert!((strong.tpr - 0.3 / 0.4).abs() < 1e-12 && (strong.fpr - 0.3 / 0.6).abs() < 1e-12);
        // product: M00 = 0.42 + 0.1, M01 = 0.28 + 0.1, M10 = 0.18 + 0.4, M11 = 0.12 + 0.4
        assert!((product.tpr - 0.52 / 0.9).abs() < 1e-12 && (product.fpr - 0.58 / 1.1).abs() < 1e-12);
        // weak: M00 = 0.6 + 0.2, M01 = 0.4 + 0.2, M10 = 0.3 + 0.5, M11 = 0.3 + 0.5
        assert!((weak.tpr - 0.8 / 1.4).abs() < 1e-12 && (weak.fpr - 0.8 / 1.6).abs() < 1e-12);
        // row masses differ between modes, so soft TPR need not follow the
        // t-norm order: here strong (0.75) exceeds product (0.58)
        assert!(strong.tpr > product.tpr);
    }

    #[test]
    fn soc_true_positive_mass_is_ordered() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = random_set(&mut rng, 100, 7);
        let [a, b, c] = SoftAnd::ALL.map(|m| soft_confusion(&s, m));
        for i in 0..7 {
            assert!(a[i][i] <= b[i][i] + 1e-12 && b[i][i] <= c[i][i] + 1e-12);
            // product rows carry exactly the target mass
            let target: f64 = (0..s.n()).map(|n| s.target(n)[i]).sum();
            assert!((b[i].iter().sum::<f64>() - target).abs() < 1e-9);
            // strong rows can be empty when no example has t_i + p_j > 1
            let Ok([sa, sb, sc]) = soc_points(&s, i) else { continue };
            assert_eq!((sa.mode, sb.mode, sc.mode), (SoftAnd::Strong, SoftAnd::Product, SoftAnd::Weak));
        }
    }

    #[test]
    fn f1_values() {
        assert!((f1_score(0.3, 0.3) - 0.3).abs() < 1e-15);
        assert!((f1_score(1.0, 0.5) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(f1_score(0.0, 0.0), 0.0);
        for (fpr, tpr) in f1_isometric(0.8, 40.0, 60.0, 50) {
            let (tp, fp) = (tpr * 40.0, fpr * 60.0);
            let f1 = f1_score(tp / (tp + fp), tpr);
            assert!(fpr == 0.0 || (f1 - 0.8).abs() < 1e-9);
        }
    }

    #[test]
    fn separable_scores_pick_the_top_of_the_gap() {
        let s = binary(&[0.9, 0.8, 0.35, 0.3], &[true, true, false, false]);
        for c in [Criterion::F1, Criterion::Accuracy] {
            assert_eq!(optimal_thresholds(&s, c).unwrap().thresholds[0], 0.8);
        }
    }

    #[test]
    fn thresholds_match_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = 120;
        // scores on a 1e-3 lattice so the 1e-4 grid resolves every gap
        let mut pool: Vec<u32> = (1..1000).collect();
        for i in (1..pool.len()).rev() {
            pool.swap(i, rng.gen_range(0..=i));
        }
        let scores: Vec<f64> = pool[..n].iter().map(|&v| v as f64 / 1000.0).collect();
        let labels: Vec<bool> = scores.iter().map(|&s| rng.gen::<f64>() < s).collect();
        let s = binary(&scores, &labels);
        let p = labels.iter().filter(|&&l| l).count() as f64;
        let q = n as f64 - p;
        for criterion in [Criterion::F1, Criterion::Accuracy] {
            let chosen = optimal_thresholds(&s, criterion).unwrap().thresholds[0];
            let mut best = (f64::NEG_INFINITY, 0.0);
            for g in 0..=10_001 {
                let theta = g as f64 * 1e-4;
                let tp = scores.iter().zip(&labels).filter(|(&v, &l)| l && v >= theta).count() as f64;
                let fp = scores.iter().zip(&labels).filter(|(&v, &l)| !l && v >= theta).count() as f64;
                let m = criterion.score(tp, fp, p, q);
                if m >= best.0 {
                    best = (m, theta);
                }
            }
            // the grid's best theta lies just below the chosen candidate
            let expected = scores
                .iter()
                .copied()
                .filter(|&v| v >= best.1 - 1e-12)
                .fold(1.0 + ROC_EPSILON, f64::min);
            assert_eq!(chosen, expected, "{criterion:?}");
        }
    }
}
