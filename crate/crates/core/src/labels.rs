//! The seven-category component taxonomy and compositional label vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_CLASSES: usize = 7;

/// Tolerance on the sum of a label vector.
pub const LABEL_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Brain,
    Muscle,
    Eye,
    Heart,
    LineNoise,
    ChannelNoise,
    Other,
}

impl Category {
    pub const ALL: [Category; NUM_CLASSES] = [
        Category::Brain,
        Category::Muscle,
        Category::Eye,
        Category::Heart,
        Category::LineNoise,
        Category::ChannelNoise,
        Category::Other,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Category> {
        Self::ALL.get(i).copied()
    }

    /// Display name, e.g. "Line Noise".
    pub fn name(self) -> &'static str {
        match self {
            Category::Brain => "Brain",
            Category::Muscle => "Muscle",
            Category::Eye => "Eye",
            Category::Heart => "Heart",
            Category::LineNoise => "Line Noise",
            Category::ChannelNoise => "Channel Noise",
            Category::Other => "Other",
        }
    }

    /// Column name used in CSV files, e.g. "line_noise".
    pub fn column(self) -> &'static str {
        match self {
            Category::Brain => "brain",
            Category::Muscle => "muscle",
            Category::Eye => "eye",
            Category::Heart => "heart",
            Category::LineNoise => "line_noise",
            Category::ChannelNoise => "channel_noise",
            Category::Other => "other",
        }
    }

    pub fn from_column(s: &str) -> Option<Category> {
        Self::ALL.iter().copied().find(|c| c.column() == s)
    }
}

impl std::fmt::Display for Category {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Index of the largest element; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Compositional label: seven non-negative probabilities summing to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; NUM_CLASSES]", into = "[f64; NUM_CLASSES]")]
pub struct LabelVector([f64; NUM_CLASSES]);

impl LabelVector {
    pub fn new(p: [f64; NUM_CLASSES]) -> Result<Self> {
        if let Some(v) = p.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidLabel(format!("element {v} is negative or non-finite")));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > LABEL_SUM_TOLERANCE {
            return Err(Error::InvalidLabel(format!("elements sum to {sum}, expected 1")));
        }
        Ok(LabelVector(p))
    }

    /// Scales a non-negative vector with positive mass to sum to one.
    pub fn normalized(p: [f64; NUM_CLASSES]) -> Result<Self> {
        let sum: f64 = p.iter().sum();
        if !(sum > 0.0) || p.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidLabel(format!("cannot normalise {p:?}")));
        }
        Ok(LabelVector(p.map(|v| v / sum)))
    }

    pub fn one_hot(category: Category) -> Self {
        let mut p = [0.0; NUM_CLASSES];
        p[category.index()] = 1.0;
        LabelVector(p)
    }

    pub fn uniform() -> Self {
        LabelVector([1.0 / NUM_CLASSES as f64; NUM_CLASSES])
    }

    pub fn as_array(&self) -> &[f64; NUM_CLASSES] {
        &self.0
    }

    pub fn get(&self, category: Category) -> f64 {
        self.0[category.index()]
    }

    pub fn argmax(&self) -> Category {
        Category::ALL[argmax(&self.0)]
    }
}

impl TryFrom<[f64; NUM_CLASSES]> for LabelVector {
    type Error = Error;

    fn try_from(p: [f64; NUM_CLASSES]) -> Result<Self> {
        LabelVector::new(p)
    }
}

impl From<LabelVector> for [f64; NUM_CLASSES] {
    fn from(l: LabelVector) -> Self {
        l.0
    }
}
