//! Accuracy, cross entropy and hard/soft confusion matrices.

use serde::{Deserialize, Serialize};

use super::EvalSet;
use crate::error::{Error, Result};
use crate::labels::argmax;
use crate::network::PROB_FLOOR;

/// Argmax of each row, ties to the lowest index.
pub fn argmax_rows(m: &ndarray::Array2<f64>) -> Vec<usize> {
    m.rows().into_iter().map(|r| argmax(r.as_slice().expect("contiguous"))).collect()
}

/// Recall per category; `None` for categories with no target examples.
pub fn per_class_recall(set: &EvalSet) -> Vec<Option<f64>> {
    let counts = confusion_counts(set);
    counts
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let total: f64 = row.iter().sum();
            (total > 0.0).then(|| row[i] / total)
        })
        .collect()
}

/// Mean within-category recall over the categories present in the targets.
pub fn balanced_accuracy(set: &EvalSet) -> Result<f64> {
    let recalls = per_class_recall(set);
    let missing: Vec<usize> = recalls.iter().enumerate().filter(|(_, r)| r.is_none()).map(|(i, _)| i).collect();
    if !missing.is_empty() {
        log::warn!("categories {missing:?} have no target examples and are left out of balanced accuracy");
    }
    let present: Vec<f64> = recalls.into_iter().flatten().collect();
    if present.is_empty() {
        return Err(Error::EmptyInput("no categories with target examples".into()));
    }
    Ok(present.iter().sum::<f64>() / present.len() as f64)
}

/// Mean over examples of `-sum_i t_i ln p_i`, with `p` clamped at 1e-12.
pub fn cross_entropy(set: &EvalSet) -> f64 {
    let mut total = 0.0;
    for n in 0..set.n() {
        for (t, p) in set.target(n).iter().zip(set.prediction(n).iter()) {
            if *t != 0.0 {
                total -= t * p.max(PROB_FLOOR).ln();
            }
        }
    }
    total / set.n() as f64
}

/// Counts of (target argmax, prediction argmax).
pub fn confusion_counts(set: &EvalSet) -> Vec<Vec<f64>> {
    let k = set.k();
    let mut m = vec![vec![0.0; k]; k];
    for (t, p) in argmax_rows(set.targets()).into_iter().zip(argmax_rows(set.predictions())) {
        m[t][p] += 1.0;
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub matrix: Vec<Vec<f64>>,
    /// Rows without any target example (left all-zero when normalized).
    pub empty_rows: Vec<usize>,
}

pub fn confusion_matrix(set: &EvalSet, normalized: bool) -> Confusion {
    let mut matrix = confusion_counts(set);
    let mut empty_rows = Vec::new();
    for (i, row) in matrix.iter_mut().enumerate() {
        let total: f64 = row.iter().sum();
        if total == 0.0 {
            empty_rows.push(i);
        } else if normalized {
            row.iter_mut().for_each(|v| *v /= total);
        }
    }
    Confusion { matrix, empty_rows }
}

/// Soft AND (t-norm) used to compare probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SoftAnd {
    /// `max(0, x + y - 1)`: the least overlap the two masses can have.
    Strong,
    /// `x * y`: independent placement.
    Product,
    /// `min(x, y)`: the most overlap.
    Weak,
}

impl SoftAnd {
    pub const ALL: [SoftAnd; 3] = [SoftAnd::Strong, SoftAnd::Product, SoftAnd::Weak];
}

pub fn soft_and(x: f64, y: f64, mode: SoftAnd) -> f64 {
    match mode {
        SoftAnd::Strong => (x + y - 1.0).max(0.0),
        SoftAnd::Product => x * y,
        SoftAnd::Weak => x.min(y),
    }
}

/// `M[i][j] = sum_n soft_and(t_i, p_j)`.
pub fn soft_confusion(set: &EvalSet, mode: SoftAnd) -> Vec<Vec<f64>> {
    let k = set.k();
    let mut m = vec![vec![0.0; k]; k];
    for n in 0..set.n() {
        let t = set.target(n);
        let p = set.prediction(n);
        for i in 0..k {
            for j in 0..k {
                m[i][j] += soft_and(t[i], p[j], mode);
            }
        }
    }
    m
}
