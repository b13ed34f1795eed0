use serde::{Deserialize, Serialize};

use super::attrset::{canonical_subsets, AttrSet};
use super::item::full_mask;
use super::qmatrix::QMatrix;
use crate::error::{DcmError, Result};

/// Per-item parameterization template.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    /// Every effect over the measured attributes.
    LcdmFull,
    /// Intercept plus the single highest-order interaction.
    Dina,
    /// Intercept plus main effects.
    MainEffectsOnly,
    Custom,
}

impl Template {
    pub fn mask_for(self, q_row: AttrSet) -> Vec<AttrSet> {
        match self {
            Template::LcdmFull | Template::Custom => full_mask(q_row),
            Template::Dina => vec![AttrSet::EMPTY, q_row],
            Template::MainEffectsOnly => std::iter::once(AttrSet::EMPTY)
                .chain(q_row.iter().map(AttrSet::singleton))
                .collect(),
        }
    }
}

/// Q-matrix plus per-item active-effect masks and the structural-model order.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    q: QMatrix,
    masks: Vec<Vec<AttrSet>>,
    template: Template,
    structural_order: usize,
}

impl ModelSpec {
    pub fn new(q: QMatrix, template: Template, structural_order: usize) -> Result<Self> {
        let masks = (0..q.items())
            .map(|i| template.mask_for(q.row(i)))
            .collect();
        Self::build(q, masks, template, structural_order)
    }

    /// Saturated structural model.
    pub fn saturated(q: QMatrix, template: Template) -> Result<Self> {
        let order = q.attributes();
        Self::new(q, template, order)
    }

    /// Custom per-item masks. The intercept is implied; every effect must lie
    /// within the item's measured attributes.
    pub fn custom(q: QMatrix, masks: Vec<Vec<AttrSet>>, structural_order: usize) -> Result<Self> {
        Self::build(q, masks, Template::Custom, structural_order)
    }

    fn build(
        q: QMatrix,
        masks: Vec<Vec<AttrSet>>,
        template: Template,
        structural_order: usize,
    ) -> Result<Self> {
        if structural_order == 0 || structural_order > q.attributes() {
            return Err(DcmError::config(format!(
                "structural order {structural_order} outside 1..={}",
                q.attributes()
            )));
        }
        if masks.len() != q.items() {
            return Err(DcmError::config("one mask per item required"));
        }
        let mut canon = Vec::with_capacity(masks.len());
        for (i, mask) in masks.into_iter().enumerate() {
            let row = q.row(i);
            if let Some(bad) = mask.iter().find(|s| !s.is_subset_of(row)) {
                return Err(DcmError::config(format!(
                    "effect {} for item '{}' is not within its measured attributes",
                    bad.label(),
                    q.item_ids()[i]
                )));
            }
            let mut m = mask;
            m.push(AttrSet::EMPTY);
            m.sort_by(AttrSet::canonical_cmp);
            m.dedup();
            canon.push(m);
        }
        Ok(ModelSpec {
            q,
            masks: canon,
            template,
            structural_order,
        })
    }

    pub fn q(&self) -> &QMatrix {
        &self.q
    }

    pub fn items(&self) -> usize {
        self.q.items()
    }

    pub fn attributes(&self) -> usize {
        self.q.attributes()
    }

    pub fn classes(&self) -> usize {
        self.q.classes()
    }

    pub fn template(&self) -> Template {
        self.template
    }

    pub fn structural_order(&self) -> usize {
        self.structural_order
    }

    /// Active effects of `item` in canonical order, intercept first.
    pub fn mask(&self, item: usize) -> &[AttrSet] {
        &self.masks[item]
    }

    pub fn masks(&self) -> &[Vec<AttrSet>] {
        &self.masks
    }

    /// Log-linear structural terms: nonempty subsets up to the structural
    /// order, canonical order.
    pub fn structural_terms(&self) -> Vec<AttrSet> {
        structural_terms(self.attributes(), self.structural_order)
    }

    pub fn is_saturated(&self) -> bool {
        self.structural_order == self.attributes()
    }

    /// Number of free parameters (item effects plus structural terms).
    pub fn free_parameter_count(&self) -> usize {
        self.masks.iter().map(Vec::len).sum::<usize>() + self.structural_terms().len()
    }

    /// Copy with a different mask for one item. The template becomes custom
    /// unless the new mask matches what the template would produce.
    pub fn with_item_mask(&self, item: usize, mask: Vec<AttrSet>) -> Result<ModelSpec> {
        let mut masks = self.masks.clone();
        masks[item] = mask;
        let mut out = Self::build(self.q.clone(), masks, Template::Custom, self.structural_order)?;
        if self.template != Template::Custom
            && (0..out.items()).all(|i| out.masks[i] == self.template.mask_for(out.q.row(i)))
        {
            out.template = self.template;
        }
        Ok(out)
    }

    /// Copy in which `effect` becomes a free parameter of `item`, extending
    /// the item's Q-matrix row when the effect involves unmeasured attributes.
    pub fn with_effect_freed(&self, item: usize, effect: AttrSet) -> Result<ModelSpec> {
        let q = self.q.with_row_extended(item, effect);
        let mut masks = self.masks.clone();
        masks[item].push(effect);
        let mut out = Self::build(q, masks, Template::Custom, self.structural_order)?;
        if out.masks == self.masks && out.q == self.q {
            out.template = self.template;
        }
        Ok(out)
    }
}

pub fn structural_terms(attributes: usize, order: usize) -> Vec<AttrSet> {
    canonical_subsets(attributes)
        .into_iter()
        .filter(|s| !s.is_empty() && s.len() <= order)
        .collect()
}
