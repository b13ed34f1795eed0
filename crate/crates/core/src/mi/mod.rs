//! Modification indices: candidate enumeration, one-at-a-time one-sided
//! score tests, Bonferroni control and respecification suggestions.

mod candidates;
mod compute;
mod report;

pub use candidates::{
    constraint_for, effect_label, enumerate_model_candidates, enumerate_model_candidates_with,
    enumerate_qmatrix_candidates, enumerate_qmatrix_candidates_with, Candidate, CandidateKind,
};
pub use compute::{compute_mis, model_candidates, qmatrix_candidates, ModificationIndex};
pub use report::{apply_multiplicity, MIReport, SuggestedAction, SuggestedChange};
