//! Votes, multi-selection expansion and labeler filtering.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{Category, NUM_CLASSES};

/// Seven categories plus "?".
pub const NUM_RESPONSES: usize = NUM_CLASSES + 1;

/// Column index of the "?" response.
pub const UNSURE: usize = NUM_CLASSES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Response {
    Category(Category),
    Unsure,
}

impl Response {
    pub const ALL: [Response; NUM_RESPONSES] = [
        Response::Category(Category::Brain),
        Response::Category(Category::Muscle),
        Response::Category(Category::Eye),
        Response::Category(Category::Heart),
        Response::Category(Category::LineNoise),
        Response::Category(Category::ChannelNoise),
        Response::Category(Category::Other),
        Response::Unsure,
    ];

    pub fn index(self) -> usize {
        match self {
            Response::Category(c) => c.index(),
            Response::Unsure => UNSURE,
        }
    }

    pub fn from_index(i: usize) -> Option<Response> {
        Self::ALL.get(i).copied()
    }

    pub fn column(self) -> &'static str {
        match self {
            Response::Category(c) => c.column(),
            Response::Unsure => "question_mark",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vote {
    pub labeler_id: String,
    pub component_id: String,
    pub response: Response,
    /// In `(0, 1]`.
    pub weight: f64,
}

impl Vote {
    pub fn new(labeler_id: impl Into<String>, component_id: impl Into<String>, response: Response, weight: f64) -> Result<Self> {
        if !(weight > 0.0 && weight <= 1.0) {
            return Err(Error::MalformedSubmission(format!("vote weight {weight} outside (0, 1]")));
        }
        Ok(Vote {
            labeler_id: labeler_id.into(),
            component_id: component_id.into(),
            response,
            weight,
        })
    }
}

/// One labeler's answer for one component, possibly selecting several
/// responses.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSubmission {
    pub labeler_id: String,
    pub component_id: String,
    pub selections: Vec<Response>,
    pub is_expert: bool,
}

/// Expanded votes together with the component roster and expert flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VoteSet {
    pub votes: Vec<Vote>,
    /// Components to label, in output order. Components without votes get
    /// the class prior as their label.
    pub components: Vec<String>,
    pub experts: BTreeSet<String>,
}

impl VoteSet {
    /// Builds a set whose roster is the components in order of first vote.
    pub fn from_votes(votes: Vec<Vote>, experts: BTreeSet<String>) -> Self {
        let mut seen = HashSet::new();
        let components = votes
            .iter()
            .filter(|v| seen.insert(v.component_id.clone()))
            .map(|v| v.component_id.clone())
            .collect();
        VoteSet {
            votes,
            components,
            experts,
        }
    }

    /// Appends roster entries that are not already present.
    pub fn with_components<I: IntoIterator<Item = String>>(mut self, extra: I) -> Self {
        let mut seen: HashSet<String> = self.components.iter().cloned().collect();
        for c in extra {
            if seen.insert(c.clone()) {
                self.components.push(c);
            }
        }
        self
    }

    pub fn is_empty(&self) -> bool {
        self.votes.is_empty()
    }

    /// Distinct labelers in sorted order.
    pub fn labelers(&self) -> Vec<String> {
        self.votes
            .iter()
            .map(|v| v.labeler_id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn is_expert(&self, labeler: &str) -> bool {
        self.experts.contains(labeler)
    }
}

/// Splits each submission selecting `k` responses into `k` votes of weight
/// `1/k`.
pub fn expand_submissions(submissions: &[RawSubmission]) -> Result<VoteSet> {
    let mut votes = Vec::new();
    let mut experts = BTreeSet::new();
    for s in submissions {
        if s.labeler_id.is_empty() || s.component_id.is_empty() {
            return Err(Error::MalformedSubmission("empty labeler or component id".into()));
        }
        if s.selections.is_empty() {
            return Err(Error::MalformedSubmission(format!(
                "labeler {} selected nothing for component {}",
                s.labeler_id, s.component_id
            )));
        }
        let distinct: BTreeSet<Response> = s.selections.iter().copied().collect();
        if distinct.len() != s.selections.len() {
            return Err(Error::MalformedSubmission(format!(
                "labeler {} selected a response twice for component {}",
                s.labeler_id, s.component_id
            )));
        }
        let weight = 1.0 / s.selections.len() as f64;
        for &r in &s.selections {
            votes.push(Vote::new(s.labeler_id.clone(), s.component_id.clone(), r, weight)?);
        }
        if s.is_expert {
            experts.insert(s.labeler_id.clone());
        }
    }
    Ok(VoteSet::from_votes(votes, experts))
}

/// Default minimum number of distinct labeled components per labeler.
pub const MIN_VOTES: usize = 10;

/// Drops every vote from labelers who labeled fewer than `min_votes`
/// distinct components. The roster is kept.
pub fn filter_labelers(votes: &VoteSet, min_votes: usize) -> VoteSet {
    let mut per_labeler: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for v in &votes.votes {
        per_labeler.entry(&v.labeler_id).or_default().insert(&v.component_id);
    }
    let keep: HashSet<&str> = per_labeler
        .iter()
        .filter(|(_, c)| c.len() >= min_votes)
        .map(|(l, _)| *l)
        .collect();
    VoteSet {
        votes: votes
            .votes
            .iter()
            .filter(|v| keep.contains(v.labeler_id.as_str()))
            .cloned()
            .collect(),
        components: votes.components.clone(),
        experts: votes
            .experts
            .iter()
            .filter(|e| keep.contains(e.as_str()))
            .cloned()
            .collect(),
    }
}
