//! Evaluation metrics for compositional labels.
//!
//! Everything works on an [`EvalSet`] of `N` target/prediction pairs over
//! `K` categories, so merged 5- and 2-class views use the same code as the
//! full 7-class labels.

mod merge;
mod report;
mod roc;
mod scores;

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::labels::{LabelVector, LABEL_SUM_TOLERANCE};

pub use merge::{detect_multilabel, detect_multilabel_indices, merge_classes, merge_groups, MergeScheme, ThresholdSet, TRAINING_ACCURACY_THRESHOLDS};
pub use report::{evaluate, render_svg, EvalReport, RocReport, SocReport, CROSS_ENTROPY_CONVENTION};
pub use roc::{auc, f1_isometric, f1_score, optimal_thresholds, roc_curve, soc_points, Criterion, RocCurve, RocPoint, SocPoint, ROC_EPSILON};
pub use scores::{
    argmax_rows, balanced_accuracy, confusion_counts, confusion_matrix, cross_entropy, per_class_recall, soft_and,
    soft_confusion, Confusion, SoftAnd,
};

/// Target and predicted probability vectors, one row per example.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSet {
    targets: Array2<f64>,
    predictions: Array2<f64>,
}

impl EvalSet {
    pub fn new(targets: Array2<f64>, predictions: Array2<f64>) -> Result<Self> {
        if targets.dim() != predictions.dim() {
            return Err(Error::Shape(format!(
                "targets {:?} and predictions {:?} differ in shape",
                targets.dim(),
                predictions.dim()
            )));
        }
        if targets.nrows() == 0 {
            return Err(Error::EmptyInput("no evaluation pairs".into()));
        }
        if targets.ncols() < 2 {
            return Err(Error::Shape("need at least 2 categories".into()));
        }
        for (what, m) in [("target", &targets), ("prediction", &predictions)] {
            for (n, row) in m.rows().into_iter().enumerate() {
                if row.iter().any(|&v| !(v.is_finite() && v >= 0.0)) || (row.sum() - 1.0).abs() > LABEL_SUM_TOLERANCE {
                    return Err(Error::InvalidLabel(format!("{what} row {n} is not a probability vector")));
                }
            }
        }
        Ok(EvalSet { targets, predictions })
    }

    pub fn from_labels(targets: &[LabelVector], predictions: &[LabelVector]) -> Result<Self> {
        if targets.len() != predictions.len() {
            return Err(Error::Shape(format!(
                "{} targets but {} predictions",
                targets.len(),
                predictions.len()
            )));
        }
        let to_array = |ls: &[LabelVector]| {
            Array2::from_shape_vec(
                (ls.len(), crate::NUM_CLASSES),
                ls.iter().flat_map(|l| l.as_array().iter().copied()).collect(),
            )
            .expect("sized")
        };
        Self::new(to_array(targets), to_array(predictions))
    }

    pub fn n(&self) -> usize {
        self.targets.nrows()
    }

    pub fn k(&self) -> usize {
        self.targets.ncols()
    }

    pub fn targets(&self) -> &Array2<f64> {
        &self.targets
    }

    pub fn predictions(&self) -> &Array2<f64> {
        &self.predictions
    }

    pub fn target(&self, n: usize) -> ArrayView1<'_, f64> {
        self.targets.row(n)
    }

    pub fn prediction(&self, n: usize) -> ArrayView1<'_, f64> {
        self.predictions.row(n)
    }

    /// Both sides merged into the coarser category set.
    pub fn merged(&self, scheme: MergeScheme) -> Result<EvalSet> {
        if self.k() != crate::NUM_CLASSES {
            return Err(Error::Shape(format!("merging needs 7 categories, have {}", self.k())));
        }
        let groups = scheme.groups();
        let m = |a: &Array2<f64>| {
            let rows: Vec<f64> = a
                .rows()
                .into_iter()
                .flat_map(|r| merge_groups(r.as_slice().expect("contiguous"), &groups))
                .collect();
            Array2::from_shape_vec((a.nrows(), groups.len()), rows).expect("sized")
        };
        EvalSet::new(m(&self.targets), m(&self.predictions))
    }
}
