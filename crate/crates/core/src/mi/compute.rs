use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::candidates::{
    enumerate_model_candidates_with, enumerate_qmatrix_candidates_with, Candidate,
};
use crate::error::Result;
use crate::estimation::{parameter_ids, FitResult, ResponseMatrix};
use crate::model::EffectIndex;
use crate::score::{
    block_from_reduced, cross_products, empirical_info, one_sided_score, GradientContext,
    ReducedInfo,
};

/// One-sided score test of a single candidate against the fitted model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModificationIndex {
    pub candidate: Candidate,
    pub label: String,
    /// Raw candidate score `s₂`.
    pub s2: f64,
    /// Effective inverse information `I²²`, absent when unavailable.
    pub i22: Option<f64>,
    pub t_s: f64,
    pub p_value: f64,
    pub boundary_case: bool,
    pub significant_raw: bool,
    pub significant_adjusted: bool,
    /// Reason the index could not be computed.
    pub unavailable: Option<String>,
    pub warnings: Vec<String>,
}

impl ModificationIndex {
    pub fn is_available(&self) -> bool {
        self.unavailable.is_none()
    }
}

fn fitted_main(fit: &FitResult) -> impl Fn(EffectIndex) -> Option<f64> + '_ {
    move |e: EffectIndex| {
        let item = &fit.params.items[e.item];
        item.is_active(e.set).then(|| item.value(e.set))
    }
}

/// Q-matrix candidates for a fitted model, with interaction constraints
/// taken from its estimates.
pub fn qmatrix_candidates(fit: &FitResult, max_order: usize) -> Vec<Candidate> {
    enumerate_qmatrix_candidates_with(&fit.spec, max_order, fitted_main(fit))
}

/// Model candidates for a fitted model, with interaction constraints taken
/// from its estimates.
pub fn model_candidates(fit: &FitResult, max_order: usize) -> Vec<Candidate> {
    enumerate_model_candidates_with(&fit.spec, max_order, fitted_main(fit))
}

/// Modification index for each candidate, computed one at a time: the
/// information is formed from the gradients of every free parameter of the
/// fitted model plus that single candidate at zero. The nuisance block is
/// factorized once and shared. Output order follows `candidates`.
pub fn compute_mis(
    fit: &FitResult,
    candidates: &[Candidate],
    data: &ResponseMatrix,
) -> Result<Vec<ModificationIndex>> {
    let spec = &fit.spec;
    let ctx = GradientContext::from_posterior(&fit.params, data, fit.posteriors.clone());
    let base = ctx.score_vector(&parameter_ids(spec))?;
    let mut common = Vec::new();
    if !fit.converged {
        common.push("fit did not converge; indices assume a maximum-likelihood estimate".into());
    }
    let reduced = ReducedInfo::new(empirical_info(&base.per_examinee).matrix);

    candidates
        .par_iter()
        .map(|cand| {
            let label = cand.label(spec.q());
            let mut warnings = common.clone();
            let g2 = ctx.item_contributions(cand.effect)?;
            let s2: f64 = g2.iter().sum();
            let raw: f64 = g2.iter().map(|g| g * g).sum();
            let unavailable = |reason: String, warnings: Vec<String>| ModificationIndex {
                candidate: cand.clone(),
                label: label.clone(),
                s2,
                i22: None,
                t_s: 0.0,
                p_value: 1.0,
                boundary_case: false,
                significant_raw: false,
                significant_adjusted: false,
                unavailable: Some(reason),
                warnings,
            };

            let i22 = if fit.params.items[cand.item()].is_active(cand.effect.set) {
                // Its gradient duplicates a nuisance column, so the partitioned
                // block is singular; the score itself vanishes at the MLE.
                warnings.push("candidate is already a free parameter of the model".into());
                if raw <= 0.0 {
                    return Ok(unavailable("zero candidate information".into(), warnings));
                }
                1.0 / raw
            } else {
                let reduced = match &reduced {
                    Ok(r) => r,
                    Err(e) => return Ok(unavailable(e.to_string(), warnings)),
                };
                let i12 = DMatrix::from_vec(base.ids.len(), 1, cross_products(&base.per_examinee, &g2));
                let block = block_from_reduced(reduced, &i12, &DMatrix::from_element(1, 1, raw));
                warnings.extend(block.warnings);
                match block.inverse {
                    Some(inv) => inv[(0, 0)],
                    None => {
                        return Ok(unavailable(
                            "candidate information is singular given the model".into(),
                            warnings,
                        ))
                    }
                }
            };
            let r = one_sided_score(s2, i22, cand.constraint)?;
            Ok(ModificationIndex {
                candidate: cand.clone(),
                label,
                s2,
                i22: Some(i22),
                t_s: r.t_s,
                p_value: r.p_value,
                boundary_case: r.boundary_case,
                significant_raw: false,
                significant_adjusted: false,
                unavailable: None,
                warnings,
            })
        })
        .collect()
}
