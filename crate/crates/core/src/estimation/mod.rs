//! Marginal maximum-likelihood estimation of the LCDM mixture by EM,
//! posterior classification and nested-model likelihood-ratio tests.

mod data;
mod fit;
mod likelihood;
mod mstep;
mod params;
mod structural;

pub use data::ResponseMatrix;
pub use fit::{classify, fit, fit_from, lr_test, FitConfig, FitResult, LrTest};
pub use likelihood::{class_log_likelihoods, e_step, log_likelihood, Posterior};
pub use mstep::{
    expected_counts, m_step_item, m_step_structural, ExpectedCounts, ItemCounts, ItemMStep,
    NEWTON_GRAD_TOL, NEWTON_MAX_ITER, NU_FLOOR, PARAM_BOUND,
};
pub use params::{parameter_ids, ParamId, ParameterSet};
pub use structural::StructuralParameterSet;
