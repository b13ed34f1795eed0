//! Analytic log-likelihood gradients, empirical observed information,
//! partitioned inversion and one-sided score statistics.

mod gradient;
mod info;
mod onesided;

pub use gradient::{item_gradient, structural_gradient, GradientContext, GradientResult, ScoreVector};
pub use info::{
    cross_products, empirical_info, info_block_22, Block22, EmpiricalInfo, ReducedInfo,
    MAX_CONDITION, RIDGE_SCALE, SCHUR_FLOOR, SCHUR_RELATIVE_FLOOR,
};
pub(crate) use info::block_from_reduced;
pub use onesided::{
    chi_squared_pvalue, mixture_critical_value, mixture_pvalue, one_sided_score, score_statistic,
    Constraint, OneSidedScoreResult,
};
