use crate::labels::{LabelVector, NUM_CLASSES};

/// Predictions are clamped to this value before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

/// Brain errors count double.
pub const DEFAULT_CLASS_WEIGHTS: [f64; NUM_CLASSES] = [2.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];

/// `-sum_i w_i t_i log p_i`.
pub fn weighted_cross_entropy(pred: &LabelVector, target: &LabelVector, weights: &[f64; NUM_CLASSES]) -> f64 {
    let p = pred.as_array();
    let t = target.as_array();
    -(0..NUM_CLASSES)
        .filter(|&i| weights[i] * t[i] != 0.0)
        .map(|i| weights[i] * t[i] * p[i].max(PROB_FLOOR).ln())
        .sum::<f64>()
}
