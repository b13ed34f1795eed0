use crate::model::{structural_terms, AttrSet};

/// Log-linear structural model for the class proportions.
///
/// `log μ_c = Σ_S γ_S · [S ⊆ α_c]` over the nonempty terms `S` up to the
/// structural order, with `μ` of the all-zero class fixed at 1, and
/// `ν_c = μ_c / Σ μ`.
#[derive(Clone, Debug, PartialEq)]
pub struct StructuralParameterSet {
    attributes: usize,
    terms: Vec<AttrSet>,
    gammas: Vec<f64>,
    nu: Vec<f64>,
}

impl StructuralParameterSet {
    /// All γ = 0 (uniform class proportions).
    pub fn uniform(attributes: usize, order: usize) -> Self {
        let terms = structural_terms(attributes, order);
        let gammas = vec![0.0; terms.len()];
        Self::from_gammas(attributes, terms, gammas)
    }

    pub fn from_gammas(attributes: usize, terms: Vec<AttrSet>, gammas: Vec<f64>) -> Self {
        assert_eq!(terms.len(), gammas.len());
        let mut out = StructuralParameterSet {
            attributes,
            terms,
            gammas,
            nu: Vec::new(),
        };
        out.refresh_nu();
        out
    }

    pub(crate) fn set_gammas(&mut self, gammas: &[f64]) {
        self.gammas.copy_from_slice(gammas);
        self.refresh_nu();
    }

    fn refresh_nu(&mut self) {
        let classes = 1usize << self.attributes;
        let log_mu: Vec<f64> = (0..classes)
            .map(|c| self.log_mu(AttrSet::from_bits(c as u32)))
            .collect();
        let max = log_mu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut nu: Vec<f64> = log_mu.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = nu.iter().sum();
        nu.iter_mut().for_each(|v| *v /= total);
        self.nu = nu;
    }

    pub fn log_mu(&self, class: AttrSet) -> f64 {
        self.terms
            .iter()
            .zip(&self.gammas)
            .filter(|(s, _)| s.is_subset_of(class))
            .map(|(_, g)| g)
            .sum()
    }

    pub fn attributes(&self) -> usize {
        self.attributes
    }

    pub fn order(&self) -> usize {
        self.terms.iter().map(|s| s.len()).max().unwrap_or(0)
    }

    pub fn terms(&self) -> &[AttrSet] {
        &self.terms
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn gamma(&self, term: AttrSet) -> Option<f64> {
        self.terms
            .iter()
            .position(|&s| s == term)
            .map(|k| self.gammas[k])
    }

    /// Class proportions, indexed by class.
    pub fn nu(&self) -> &[f64] {
        &self.nu
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_proportions() {
        let s = StructuralParameterSet::uniform(3, 3);
        assert_eq!(s.terms().len(), 7);
        for &v in s.nu() {
            assert!((v - 0.125).abs() < 1e-15);
        }
    }

    #[test]
    fn proportions_sum_to_one_and_are_positive() {
        let terms = structural_terms(3, 2);
        let gammas = vec![1.0, -2.0, 0.5, 3.0, -1.0, 0.2];
        let s = StructuralParameterSet::from_gammas(3, terms, gammas);
        assert!((s.nu().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(s.nu().iter().all(|&v| v > 0.0));
        // class 0b011 picks up γ1 + γ2 + γ12
        let ratio = (s.nu()[3] / s.nu()[0]).ln();
        assert!((ratio - (1.0 - 2.0 + 3.0)).abs() < 1e-12);
    }
}
