//! Synthetic examinees and responses for the 30-item, 3-attribute design,
//! and Monte Carlo Type I error and power studies of the indices.

mod generate;
mod study;

pub use generate::{
    build_item_params, derive_seed, gen_attribute_profiles, gen_responses, rng_from_seed,
    splitmix64, SplitRule,
};
pub use study::{
    generating_parameters, replication_seed, run_power_dina_study, run_power_q_study, run_study,
    run_type1_dina_study, run_type1_q_study, EffectSize, Replication, SimDesign, Study, StudyResult,
    StudyRow, EXCLUSION_FLAG,
};
