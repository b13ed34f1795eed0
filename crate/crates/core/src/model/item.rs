use super::attrset::{AttrSet, canonical_subsets};
use super::profile::AttributeProfile;
use crate::error::{DcmError, Result};

/// Tolerance for probability comparisons in [`check_monotonicity`].
pub const MONOTONICITY_TOL: f64 = 1e-10;

/// Numerically safe logistic function.
#[inline]
pub fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `ln(logistic(eta))` without forming the probability.
#[inline]
pub fn log_logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        -(-eta).exp().ln_1p()
    } else {
        eta - eta.exp().ln_1p()
    }
}

/// LCDM coefficients for one item.
///
/// Values are stored densely, indexed by the effect's attribute bitmask, so
/// every possible effect (active or not) has a slot. Slots outside the
/// active mask always hold exactly zero. The intercept lives at index 0 and
/// is always active.
#[derive(Clone, Debug, PartialEq)]
pub struct ItemParameterSet {
    values: Vec<f64>,
    active: Vec<AttrSet>,
}

impl ItemParameterSet {
    /// Zero-valued parameters over the given active effects. The intercept is
    /// added if absent; the mask is put in canonical order.
    pub fn new(attributes: usize, active: &[AttrSet]) -> Self {
        let mut mask: Vec<AttrSet> = active.to_vec();
        if !mask.contains(&AttrSet::EMPTY) {
            mask.push(AttrSet::EMPTY);
        }
        mask.sort_by(AttrSet::canonical_cmp);
        mask.dedup();
        ItemParameterSet {
            values: vec![0.0; 1 << attributes],
            active: mask,
        }
    }

    /// Parameters over the full LCDM mask for `q_row`, with the given values
    /// listed in canonical order (intercept first).
    pub fn with_values(attributes: usize, active: &[AttrSet], values: &[f64]) -> Result<Self> {
        let mut out = Self::new(attributes, active);
        if values.len() != out.active.len() {
            return Err(DcmError::config(format!(
                "expected {} item parameters, got {}",
                out.active.len(),
                values.len()
            )));
        }
        for (k, &v) in values.iter().enumerate() {
            let s = out.active[k];
            out.values[s.index()] = v;
        }
        Ok(out)
    }

    pub fn attributes(&self) -> usize {
        self.values.len().trailing_zeros() as usize
    }

    /// Active effects in canonical order, intercept first.
    pub fn active(&self) -> &[AttrSet] {
        &self.active
    }

    pub fn is_active(&self, effect: AttrSet) -> bool {
        self.active.contains(&effect)
    }

    pub fn value(&self, effect: AttrSet) -> f64 {
        self.values[effect.index()]
    }

    pub fn intercept(&self) -> f64 {
        self.values[0]
    }

    pub fn set_value(&mut self, effect: AttrSet, v: f64) -> Result<()> {
        if !self.is_active(effect) {
            return Err(DcmError::config(format!(
                "effect {} is outside the active mask",
                effect.label()
            )));
        }
        self.values[effect.index()] = v;
        Ok(())
    }

    /// Active values in canonical order.
    pub fn active_values(&self) -> Vec<f64> {
        self.active.iter().map(|s| self.values[s.index()]).collect()
    }

    /// Linear predictor for the class with mastery set `class`.
    #[inline]
    pub fn eta(&self, class: AttrSet) -> f64 {
        self.active
            .iter()
            .filter(|s| s.is_subset_of(class))
            .map(|s| self.values[s.index()])
            .sum()
    }

    #[inline]
    pub fn prob(&self, class: AttrSet) -> f64 {
        logistic(self.eta(class))
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub(crate) fn active_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.active.iter().map(|s| s.index())
    }
}

/// Design vector `h(α_c, q_i)`: one entry per non-intercept effect in `mask`
/// (canonical order), equal to the product of `α_a · q_a` over the effect's
/// attributes.
pub fn design_vector(profile: &AttributeProfile, q_row: &[u8], mask: &[AttrSet]) -> Vec<f64> {
    assert_eq!(
        q_row.len(),
        profile.attributes(),
        "Q-row length must equal the attribute count"
    );
    let mut effects: Vec<AttrSet> = mask.iter().copied().filter(|s| !s.is_empty()).collect();
    effects.sort_by(AttrSet::canonical_cmp);
    effects
        .iter()
        .map(|s| {
            s.iter()
                .map(|a| (profile.mastered(a) as u8 * q_row[a]) as f64)
                .product()
        })
        .collect()
}

/// `π_ic = logistic(λ_0 + λᵀ h(α_c, q_i))`.
pub fn item_response_prob(params: &ItemParameterSet, profile: &AttributeProfile, q_row: &[u8]) -> f64 {
    let effects: Vec<AttrSet> = params
        .active()
        .iter()
        .copied()
        .filter(|s| !s.is_empty())
        .collect();
    let h = design_vector(profile, q_row, &effects);
    let eta = params.intercept()
        + effects
            .iter()
            .zip(&h)
            .map(|(s, x)| params.value(*s) * x)
            .sum::<f64>();
    logistic(eta)
}

/// Every ordered pair of profiles `(α, α′)` with `α ≤ α′` elementwise whose
/// response probabilities decrease by more than [`MONOTONICITY_TOL`].
///
/// Profiles are enumerated over the item's measured attributes only (the
/// unmeasured bits are zero), since unmeasured attributes cannot change the
/// item's response probability.
pub fn check_monotonicity(
    params: &ItemParameterSet,
    q_row: AttrSet,
) -> Vec<(AttributeProfile, AttributeProfile)> {
    let attributes = params.attributes();
    let subs = q_row.subsets();
    let mut out = Vec::new();
    for &lo in &subs {
        let p_lo = params.prob(lo);
        for &hi in &subs {
            if hi == lo || !lo.is_subset_of(hi) {
                continue;
            }
            if p_lo > params.prob(hi) + MONOTONICITY_TOL {
                out.push((
                    AttributeProfile::new(lo.index(), attributes),
                    AttributeProfile::new(hi.index(), attributes),
                ));
            }
        }
    }
    out
}

/// All effects over the attributes of `q_row` (the full LCDM mask).
pub fn full_mask(q_row: AttrSet) -> Vec<AttrSet> {
    q_row.subsets()
}

/// Every effect available over `attributes` attributes, canonical order.
pub fn all_effects(attributes: usize) -> Vec<AttrSet> {
    canonical_subsets(attributes)
}
