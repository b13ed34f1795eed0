use serde::{Deserialize, Serialize};

use crate::model::{AttrSet, EffectIndex, ModelSpec, QMatrix, Template};
use crate::score::Constraint;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateKind {
    /// Effect involving an attribute the item does not currently measure.
    Qmatrix,
    /// Effect over measured attributes that the item's mask leaves out.
    Model,
}

/// A parameter proposed for addition to the fitted model, tested at zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub kind: CandidateKind,
    pub effect: EffectIndex,
    pub constraint: Constraint,
    /// Main effects whose fitted values define `k`, as (attribute set,
    /// estimate); `None` estimate means the main effect is not in the model.
    pub k_source: Vec<(AttrSet, Option<f64>)>,
}

impl Candidate {
    pub fn item(&self) -> usize {
        self.effect.item
    }

    pub fn level(&self) -> usize {
        self.effect.level()
    }

    /// Label in the `lambda_{item,level,(attributes)}` layout, e.g.
    /// `lambda_4,2,(1,2)`.
    pub fn label(&self, q: &QMatrix) -> String {
        effect_label(q, self.effect)
    }
}

pub fn effect_label(q: &QMatrix, effect: EffectIndex) -> String {
    let attrs: Vec<String> = effect.set.iter().map(|a| (a + 1).to_string()).collect();
    format!(
        "lambda_{},{},({})",
        q.item_ids()[effect.item],
        effect.level(),
        attrs.join(",")
    )
}

/// Order constraint for a candidate given the main effects currently in the
/// reduced model. Main effects are positive; an interaction must exceed
/// minus the smallest main effect it involves. A missing main effect
/// contributes zero, as does a negative fitted one, since `k` cannot be
/// negative.
pub fn constraint_for(
    effect: EffectIndex,
    main_value: impl Fn(EffectIndex) -> Option<f64>,
) -> (Constraint, Vec<(AttrSet, Option<f64>)>) {
    if effect.set.len() <= 1 {
        return (Constraint::Positive, Vec::new());
    }
    let source: Vec<(AttrSet, Option<f64>)> = effect
        .set
        .iter()
        .map(|a| {
            let s = AttrSet::singleton(a);
            (s, main_value(EffectIndex::new(effect.item, s)))
        })
        .collect();
    let k = source
        .iter()
        .map(|(_, v)| v.unwrap_or(0.0))
        .fold(f64::INFINITY, f64::min)
        .max(0.0);
    let constraint = if k == 0.0 {
        Constraint::Positive
    } else {
        Constraint::GreaterThanMinusK { k }
    };
    (constraint, source)
}

/// Q-matrix candidates: for every zero entry `q_ia`, the main effect of `a`
/// followed by the interactions of `a` with subsets of the item's measured
/// attributes, up to `max_order`. Items ascending, then unmeasured attributes
/// ascending.
///
/// Constraints are computed from `main_value`, which reports the fitted value
/// of a main effect if it is in the reduced model.
pub fn enumerate_qmatrix_candidates_with(
    spec: &ModelSpec,
    max_order: usize,
    main_value: impl Fn(EffectIndex) -> Option<f64>,
) -> Vec<Candidate> {
    let mut out = Vec::new();
    let a_count = spec.attributes();
    for i in 0..spec.items() {
        let measured = spec.q().row(i);
        for a in 0..a_count {
            if measured.contains(a) {
                continue;
            }
            for base in measured.subsets() {
                if base.len() + 1 > max_order {
                    continue;
                }
                let effect = EffectIndex::new(i, base.with(a));
                let (constraint, k_source) = constraint_for(effect, &main_value);
                out.push(Candidate {
                    kind: CandidateKind::Qmatrix,
                    effect,
                    constraint,
                    k_source,
                });
            }
        }
    }
    out
}

/// Model candidates: effects over measured attributes that are outside the
/// item's active mask, up to `max_order`, in canonical order. Empty for the
/// full LCDM.
pub fn enumerate_model_candidates_with(
    spec: &ModelSpec,
    max_order: usize,
    main_value: impl Fn(EffectIndex) -> Option<f64>,
) -> Vec<Candidate> {
    let mut out = Vec::new();
    if spec.template() == Template::LcdmFull {
        return out;
    }
    for i in 0..spec.items() {
        let mask = spec.mask(i);
        for s in spec.q().row(i).subsets() {
            if s.is_empty() || s.len() > max_order || mask.contains(&s) {
                continue;
            }
            let effect = EffectIndex::new(i, s);
            let (constraint, k_source) = constraint_for(effect, &main_value);
            out.push(Candidate {
                kind: CandidateKind::Model,
                effect,
                constraint,
                k_source,
            });
        }
    }
    out
}

/// Q-matrix candidates with constraints evaluated as if every main effect in
/// the mask were fitted at zero (structure only).
pub fn enumerate_qmatrix_candidates(spec: &ModelSpec, max_order: usize) -> Vec<Candidate> {
    enumerate_qmatrix_candidates_with(spec, max_order, |_| None)
}

/// Model candidates with structure-only constraints; see
/// [`enumerate_qmatrix_candidates`].
pub fn enumerate_model_candidates(spec: &ModelSpec, max_order: usize) -> Vec<Candidate> {
    enumerate_model_candidates_with(spec, max_order, |_| None)
}
