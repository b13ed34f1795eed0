use std::fmt;

use super::data::ResponseMatrix;
use super::structural::StructuralParameterSet;
use crate::error::{DcmError, Result};
use crate::model::{AttrSet, EffectIndex, ItemParameterSet, ModelSpec};

/// Identifies one free parameter in the canonical vectorization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParamId {
    Item(EffectIndex),
    Structural(AttrSet),
}

impl fmt::Display for ParamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamId::Item(e) => write!(f, "lambda[{}]({})", e.item + 1, e.set.label()),
            ParamId::Structural(s) => write!(f, "gamma({})", s.label()),
        }
    }
}

/// Canonical free-parameter order: item effects (item-major, canonical
/// effect order, intercept first) followed by the structural terms.
pub fn parameter_ids(spec: &ModelSpec) -> Vec<ParamId> {
    let mut out = Vec::with_capacity(spec.free_parameter_count());
    for i in 0..spec.items() {
        out.extend(
            spec.mask(i)
                .iter()
                .map(|&s| ParamId::Item(EffectIndex::new(i, s))),
        );
    }
    out.extend(spec.structural_terms().into_iter().map(ParamId::Structural));
    out
}

/// All item and structural coefficients of a fitted or generating model.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterSet {
    pub items: Vec<ItemParameterSet>,
    pub structural: StructuralParameterSet,
}

impl ParameterSet {
    /// All-zero item parameters and uniform class proportions.
    pub fn zeros(spec: &ModelSpec) -> Self {
        let a = spec.attributes();
        ParameterSet {
            items: (0..spec.items())
                .map(|i| ItemParameterSet::new(a, spec.mask(i)))
                .collect(),
            structural: StructuralParameterSet::uniform(a, spec.structural_order()),
        }
    }

    /// Default starting values: intercept at the logit of the item's
    /// proportion correct (clamped to [0.05, 0.95]), main effects 1.0,
    /// interactions 0.0, all γ 0.
    pub fn starting_values(spec: &ModelSpec, data: &ResponseMatrix) -> Self {
        let mut out = Self::zeros(spec);
        let means = data.item_means();
        for (i, item) in out.items.iter_mut().enumerate() {
            let p = means[i].clamp(0.05, 0.95);
            let values = item.values_mut();
            values[0] = (p / (1.0 - p)).ln();
            for &s in spec.mask(i) {
                if s.len() == 1 {
                    values[s.index()] = 1.0;
                }
            }
        }
        out
    }

    pub fn vectorize(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .items
            .iter()
            .flat_map(|it| it.active_values())
            .collect();
        v.extend_from_slice(self.structural.gammas());
        v
    }

    pub fn from_vector(spec: &ModelSpec, v: &[f64]) -> Result<Self> {
        let mut out = Self::zeros(spec);
        if v.len() != spec.free_parameter_count() {
            return Err(DcmError::config(format!(
                "parameter vector has length {}, expected {}",
                v.len(),
                spec.free_parameter_count()
            )));
        }
        out.assign(v);
        Ok(out)
    }

    /// Overwrites all free parameters from a vector in canonical order.
    pub(crate) fn assign(&mut self, v: &[f64]) {
        let mut k = 0;
        for item in &mut self.items {
            let idx: Vec<usize> = item.active_indices().collect();
            let values = item.values_mut();
            for j in idx {
                values[j] = v[k];
                k += 1;
            }
        }
        self.structural.set_gammas(&v[k..]);
    }

    /// Value of a parameter, zero for effects outside the active mask.
    pub fn value(&self, id: ParamId) -> f64 {
        match id {
            ParamId::Item(e) => self.items[e.item].value(e.set),
            ParamId::Structural(s) => self.structural.gamma(s).unwrap_or(0.0),
        }
    }

    /// Copy re-expressed under `spec`, which must include every active effect
    /// of `self` (e.g. a spec with one additional freed effect). New effects
    /// start at zero.
    pub fn embed(&self, spec: &ModelSpec) -> Result<ParameterSet> {
        let mut out = Self::zeros(spec);
        for (i, item) in self.items.iter().enumerate() {
            for &s in item.active() {
                out.items[i].set_value(s, item.value(s))?;
            }
        }
        let gammas: Vec<f64> = spec
            .structural_terms()
            .iter()
            .map(|&t| self.structural.gamma(t).unwrap_or(0.0))
            .collect();
        out.structural.set_gammas(&gammas);
        Ok(out)
    }

    /// Class-by-item response probability table, `probs[i][c] = π_ic`.
    pub fn prob_table(&self) -> Vec<Vec<f64>> {
        let classes = self.structural.nu().len();
        self.items
            .iter()
            .map(|it| {
                (0..classes)
                    .map(|c| it.prob(AttrSet::from_bits(c as u32)))
                    .collect()
            })
            .collect()
    }
}
