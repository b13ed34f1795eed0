use ndarray::Array2;

use crate::error::{DcmError, Result};
use crate::estimation::{e_step, ParamId, ParameterSet, ResponseMatrix};
use crate::model::{AttrSet, EffectIndex, ModelSpec};

/// Per-examinee score contributions and their total for one parameter.
#[derive(Clone, Debug)]
pub struct GradientResult {
    pub per_examinee: Vec<f64>,
    pub total: f64,
}

/// Score vector over a list of parameters: totals plus the examinee-by-
/// parameter matrix of contributions.
#[derive(Clone, Debug)]
pub struct ScoreVector {
    pub ids: Vec<ParamId>,
    pub entries: Vec<f64>,
    pub per_examinee: Array2<f64>,
}

/// Everything needed to evaluate log-likelihood derivatives at one
/// parameter point: posteriors, response probabilities and class weights.
///
/// Item derivatives use `Σ_c P(c|y_e) · h_S(α_c) · (y_ei − π_ic)`, the
/// posterior form of the ratio `Σ_c ν_c h (y − π) L_ec / Σ_c ν_c L_ec`.
/// Structural derivatives use `Σ_c P(c|y_e) x_cS − Σ_c ν_c x_cS`, obtained
/// from `ν_c = μ_c / Σ μ`.
pub struct GradientContext<'a> {
    data: &'a ResponseMatrix,
    posterior: Array2<f64>,
    probs: Vec<Vec<f64>>,
    nu: Vec<f64>,
}

impl<'a> GradientContext<'a> {
    pub fn new(spec: &ModelSpec, params: &ParameterSet, data: &'a ResponseMatrix) -> Result<Self> {
        let post = e_step(spec, params, data)?;
        Ok(Self::from_posterior(params, data, post.probs))
    }

    pub fn from_posterior(
        params: &ParameterSet,
        data: &'a ResponseMatrix,
        posterior: Array2<f64>,
    ) -> Self {
        GradientContext {
            data,
            posterior,
            probs: params.prob_table(),
            nu: params.structural.nu().to_vec(),
        }
    }

    pub fn examinees(&self) -> usize {
        self.data.examinees()
    }

    /// Contributions for an item effect. The effect need not be active: a
    /// candidate effect is evaluated at value zero with `h_S = Π_{a∈S} α_a`.
    pub fn item_contributions(&self, target: EffectIndex) -> Result<Vec<f64>> {
        let classes = self.nu.len();
        let item = target.item;
        let pi = &self.probs[item];
        let members: Vec<usize> = (0..classes)
            .filter(|&c| target.set.is_subset_of(AttrSet::from_bits(c as u32)))
            .collect();
        let mut out = Vec::with_capacity(self.examinees());
        for e in 0..self.examinees() {
            let y = self.data.values()[[e, item]] as f64;
            let row = self.posterior.row(e);
            let g: f64 = members.iter().map(|&c| row[c] * (y - pi[c])).sum();
            if !g.is_finite() {
                return Err(DcmError::numerical(e, "non-finite item score contribution"));
            }
            out.push(g);
        }
        Ok(out)
    }

    pub fn structural_contributions(&self, target: AttrSet) -> Result<Vec<f64>> {
        let classes = self.nu.len();
        let members: Vec<usize> = (0..classes)
            .filter(|&c| target.is_subset_of(AttrSet::from_bits(c as u32)))
            .collect();
        let prior: f64 = members.iter().map(|&c| self.nu[c]).sum();
        let mut out = Vec::with_capacity(self.examinees());
        for e in 0..self.examinees() {
            let row = self.posterior.row(e);
            let g = members.iter().map(|&c| row[c]).sum::<f64>() - prior;
            if !g.is_finite() {
                return Err(DcmError::numerical(e, "non-finite structural score contribution"));
            }
            out.push(g);
        }
        Ok(out)
    }

    pub fn contributions(&self, id: ParamId) -> Result<Vec<f64>> {
        match id {
            ParamId::Item(e) => self.item_contributions(e),
            ParamId::Structural(s) => self.structural_contributions(s),
        }
    }

    /// Score vector over `ids`, totals summed in examinee order.
    pub fn score_vector(&self, ids: &[ParamId]) -> Result<ScoreVector> {
        let mut per_examinee = Array2::<f64>::zeros((self.examinees(), ids.len()));
        let mut entries = Vec::with_capacity(ids.len());
        for (k, &id) in ids.iter().enumerate() {
            let g = self.contributions(id)?;
            entries.push(g.iter().sum());
            per_examinee
                .column_mut(k)
                .iter_mut()
                .zip(&g)
                .for_each(|(d, s)| *d = *s);
        }
        Ok(ScoreVector {
            ids: ids.to_vec(),
            entries,
            per_examinee,
        })
    }
}

/// Log-likelihood derivative for one item effect, per examinee and total.
pub fn item_gradient(
    spec: &ModelSpec,
    params: &ParameterSet,
    data: &ResponseMatrix,
    target: EffectIndex,
) -> Result<GradientResult> {
    let ctx = GradientContext::new(spec, params, data)?;
    let per_examinee = ctx.item_contributions(target)?;
    let total = per_examinee.iter().sum();
    Ok(GradientResult {
        per_examinee,
        total,
    })
}

/// Log-likelihood derivative for one log-linear structural term.
pub fn structural_gradient(
    spec: &ModelSpec,
    params: &ParameterSet,
    data: &ResponseMatrix,
    target: AttrSet,
) -> Result<GradientResult> {
    let ctx = GradientContext::new(spec, params, data)?;
    let per_examinee = ctx.structural_contributions(target)?;
    let total = per_examinee.iter().sum();
    Ok(GradientResult {
        per_examinee,
        total,
    })
}
