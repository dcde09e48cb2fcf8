//! Category merging and threshold-based multi-label detection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{Category, LabelVector, NUM_CLASSES};

/// Per-category thresholds maximizing training-set accuracy.
pub const TRAINING_ACCURACY_THRESHOLDS: [f64; NUM_CLASSES] = [0.44, 0.18, 0.13, 0.33, 0.04, 0.13, 0.15];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MergeScheme {
    /// No merging.
    Seven,
    /// Brain, Muscle, Eye, Heart, Other (line noise, channel noise and other).
    Five,
    /// Brain, Other (everything else).
    Two,
}

impl MergeScheme {
    pub fn from_count(k: usize) -> Option<Self> {
        match k {
            7 => Some(MergeScheme::Seven),
            5 => Some(MergeScheme::Five),
            2 => Some(MergeScheme::Two),
            _ => None,
        }
    }

    pub fn n_classes(self) -> usize {
        self.groups().len()
    }

    /// Source category indices feeding each merged category.
    pub fn groups(self) -> Vec<Vec<usize>> {
        match self {
            MergeScheme::Seven => (0..NUM_CLASSES).map(|i| vec![i]).collect(),
            MergeScheme::Five => vec![vec![0], vec![1], vec![2], vec![3], vec![4, 5, 6]],
            MergeScheme::Two => vec![vec![0], (1..NUM_CLASSES).collect()],
        }
    }

    pub fn class_names(self) -> Vec<&'static str> {
        match self {
            MergeScheme::Seven => Category::ALL.iter().map(|c| c.name()).collect(),
            MergeScheme::Five => vec!["Brain", "Muscle", "Eye", "Heart", "Other"],
            MergeScheme::Two => vec!["Brain", "Other"],
        }
    }
}

/// Sums the entries of each group.
pub fn merge_groups(label: &[f64], groups: &[Vec<usize>]) -> Vec<f64> {
    groups.iter().map(|g| g.iter().map(|&i| label[i]).sum()).collect()
}

pub fn merge_classes(label: &LabelVector, scheme: MergeScheme) -> Vec<f64> {
    merge_groups(label.as_array(), &scheme.groups())
}

/// Detection thresholds, one per category, with a note on where they came
/// from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSet {
    pub thresholds: Vec<f64>,
    #[serde(default)]
    pub provenance: String,
}

impl ThresholdSet {
    pub fn new(thresholds: Vec<f64>, provenance: impl Into<String>) -> Result<Self> {
        // the upper end allows the "detect nothing" threshold just above 1
        if thresholds.iter().any(|t| !(t.is_finite() && *t >= 0.0 && *t <= 1.0 + 1e-6)) {
            return Err(Error::InvalidConfig("thresholds must lie in [0, 1]".into()));
        }
        Ok(ThresholdSet {
            thresholds,
            provenance: provenance.into(),
        })
    }

    pub fn training_accuracy() -> Self {
        ThresholdSet {
            thresholds: TRAINING_ACCURACY_THRESHOLDS.to_vec(),
            provenance: "training set, accuracy-maximizing".into(),
        }
    }
}

/// Indices whose probability matches or exceeds their threshold.
pub fn detect_multilabel_indices(label: &[f64], thresholds: &ThresholdSet) -> Result<Vec<usize>> {
    if label.len() != thresholds.thresholds.len() {
        return Err(Error::Shape(format!(
            "{} probabilities but {} thresholds",
            label.len(),
            thresholds.thresholds.len()
        )));
    }
    Ok(label
        .iter()
        .zip(&thresholds.thresholds)
        .enumerate()
        .filter(|(_, (p, t))| p >= t)
        .map(|(i, _)| i)
        .collect())
}

pub fn detect_multilabel(label: &LabelVector, thresholds: &ThresholdSet) -> Result<Vec<Category>> {
    Ok(detect_multilabel_indices(label.as_array(), thresholds)?
        .into_iter()
        .filter_map(Category::from_index)
        .collect())
}
