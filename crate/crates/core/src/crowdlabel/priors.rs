//! Dirichlet priors on labeler confusion matrices and on the class mix.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::votes::{VoteSet, NUM_RESPONSES};
use crate::error::{Error, Result};
use crate::labels::NUM_CLASSES;

pub type ConfusionMatrix = [[f64; NUM_RESPONSES]; NUM_CLASSES];

/// Pseudo-counts for one labeler: rows are true categories, columns the
/// eight responses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelerPrior {
    confusion_prior: ConfusionMatrix,
}

impl LabelerPrior {
    pub fn new(confusion_prior: ConfusionMatrix) -> Result<Self> {
        if confusion_prior.iter().flatten().any(|&v| !(v.is_finite() && v > 0.0)) {
            return Err(Error::InvalidPrior("confusion pseudo-counts must be finite and positive".into()));
        }
        Ok(LabelerPrior { confusion_prior })
    }

    /// `diagonal` where the response names the row's category, `off`
    /// everywhere else (including the "?" column).
    pub fn from_diagonal(diagonal: f64, off: f64) -> Result<Self> {
        let mut m = [[off; NUM_RESPONSES]; NUM_CLASSES];
        for (k, row) in m.iter_mut().enumerate() {
            row[k] = diagonal;
        }
        Self::new(m)
    }

    pub fn matrix(&self) -> &ConfusionMatrix {
        &self.confusion_prior
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorMode {
    TrainingExperts,
    TrainingUnknown,
    TestExperts,
}

pub fn default_priors(mode: PriorMode) -> LabelerPrior {
    let (diagonal, off) = match mode {
        PriorMode::TrainingExperts => (50.01, 0.01),
        PriorMode::TrainingUnknown => (1.25, 0.25),
        PriorMode::TestExperts => (5.0, 0.01),
    };
    LabelerPrior::from_diagonal(diagonal, off).expect("positive constants")
}

/// Class prior for the training set: empirical class frequencies over 100.
pub const TRAINING_CLASS_PRIOR: [f64; NUM_CLASSES] = [0.002973, 0.001766, 0.00079, 0.00015, 0.000573, 0.00073, 0.003022];

/// Class prior for the expert-labeled test set.
pub const TEST_CLASS_PRIOR: [f64; NUM_CLASSES] = [0.002263, 0.001537, 0.001753, 0.000155, 0.00063, 0.001839, 0.001822];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassPrior {
    alpha: [f64; NUM_CLASSES],
}

impl ClassPrior {
    pub fn new(alpha: [f64; NUM_CLASSES]) -> Result<Self> {
        if alpha.iter().any(|&a| !(a.is_finite() && a > 0.0)) {
            return Err(Error::InvalidPrior("class prior entries must be finite and positive".into()));
        }
        Ok(ClassPrior { alpha })
    }

    pub fn training() -> Self {
        ClassPrior { alpha: TRAINING_CLASS_PRIOR }
    }

    pub fn test() -> Self {
        ClassPrior { alpha: TEST_CLASS_PRIOR }
    }

    pub fn alpha(&self) -> &[f64; NUM_CLASSES] {
        &self.alpha
    }
}

/// Which labeled set the priors are for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dataset {
    Training,
    Test,
}

impl Dataset {
    pub fn class_prior(self) -> ClassPrior {
        match self {
            Dataset::Training => ClassPrior::training(),
            Dataset::Test => ClassPrior::test(),
        }
    }

    pub fn expert_mode(self) -> PriorMode {
        match self {
            Dataset::Training => PriorMode::TrainingExperts,
            Dataset::Test => PriorMode::TestExperts,
        }
    }
}

/// Experts get the dataset's expert prior, everyone else the unknown-labeler
/// prior.
pub fn assign_priors(votes: &VoteSet, dataset: Dataset) -> BTreeMap<String, LabelerPrior> {
    let expert = default_priors(dataset.expert_mode());
    let unknown = default_priors(PriorMode::TrainingUnknown);
    votes
        .labelers()
        .into_iter()
        .map(|l| {
            let p = if votes.is_expert(&l) { expert } else { unknown };
            (l, p)
        })
        .collect()
}
