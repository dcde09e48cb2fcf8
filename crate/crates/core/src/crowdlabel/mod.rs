//! Crowd label aggregation.
//!
//! Redundant, possibly conflicting votes are combined into compositional
//! labels by collapsed Gibbs sampling of a latent true category per vote,
//! with Dirichlet priors on the class mix and on each labeler's confusion
//! matrix (rows: true category, columns: the seven categories plus "?").

mod gibbs;
mod priors;
mod votes;

pub use gibbs::{cllda_fit, CrowdResult, Diagnostics, GibbsConfig};
pub use priors::{
    assign_priors, default_priors, ClassPrior, ConfusionMatrix, Dataset, LabelerPrior, PriorMode, TEST_CLASS_PRIOR,
    TRAINING_CLASS_PRIOR,
};
pub use votes::{
    expand_submissions, filter_labelers, RawSubmission, Response, Vote, VoteSet, MIN_VOTES, NUM_RESPONSES, UNSURE,
};
