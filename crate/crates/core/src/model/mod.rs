//! Structural vocabulary of the LCDM: attribute sets, mastery profiles,
//! Q-matrices, per-item effect masks and item response functions.

mod attrset;
mod item;
mod profile;
mod qmatrix;
mod spec;

pub use attrset::{canonical_subsets, full_set, AttrSet, MAX_ATTRIBUTES};
pub use item::{
    all_effects, check_monotonicity, design_vector, full_mask, item_response_prob, log_logistic,
    logistic, logit, ItemParameterSet, MONOTONICITY_TOL,
};
pub use profile::{profile_space, AttributeProfile};
pub use qmatrix::QMatrix;
pub use spec::{structural_terms, ModelSpec, Template};

use serde::{Deserialize, Serialize};

/// Identifies one item effect: the item and the attribute set of the effect
/// (empty for the intercept).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EffectIndex {
    pub item: usize,
    pub set: AttrSet,
}

impl EffectIndex {
    pub fn new(item: usize, set: AttrSet) -> Self {
        EffectIndex { item, set }
    }

    /// 0 for the intercept, 1 for a main effect, 2 for a two-way interaction...
    pub fn level(&self) -> usize {
        self.set.len()
    }
}
