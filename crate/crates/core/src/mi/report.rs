use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::candidates::CandidateKind;
use super::compute::ModificationIndex;
use crate::error::{DcmError, Result};
use crate::model::{AttrSet, ModelSpec};
use crate::score::mixture_critical_value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuggestedAction {
    /// Set `q_ia = 1` and add the main effect.
    FlipQEntry,
    /// Free an effect of attributes the item already measures.
    AddEffect,
    /// Significant interaction whose main effects are neither in the model
    /// nor significant; left for the analyst to judge.
    HierarchyNote,
}

/// One proposed single-parameter change. Suggestions are alternatives ranked
/// by their index, to be applied one per refit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuggestedChange {
    pub rank: usize,
    pub label: String,
    pub item_id: String,
    pub effect: AttrSet,
    pub action: SuggestedAction,
    pub t_s: f64,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MIReport {
    pub indices: Vec<ModificationIndex>,
    pub alpha: f64,
    pub m: usize,
    pub adjusted_alpha: f64,
    pub critical_raw: f64,
    pub critical_adjusted: f64,
    pub suggested_changes: Vec<SuggestedChange>,
}

/// Flags each index at `alpha` and at the Bonferroni level `alpha / m`, where
/// `m` is the number of available indices unless overridden, and derives the
/// suggested changes.
pub fn apply_multiplicity(
    spec: &ModelSpec,
    mut indices: Vec<ModificationIndex>,
    alpha: f64,
    m_override: Option<usize>,
) -> Result<MIReport> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(DcmError::config(format!("alpha {alpha} must lie in (0, 0.5)")));
    }
    let m = m_override.unwrap_or_else(|| indices.iter().filter(|i| i.is_available()).count());
    if m == 0 {
        return Ok(MIReport {
            indices: Vec::new(),
            alpha,
            m,
            adjusted_alpha: alpha,
            critical_raw: mixture_critical_value(alpha),
            critical_adjusted: mixture_critical_value(alpha),
            suggested_changes: Vec::new(),
        });
    }
    let adjusted_alpha = alpha / m as f64;
    for mi in &mut indices {
        let ok = mi.is_available() && mi.t_s > 0.0;
        mi.significant_raw = ok && mi.p_value < alpha;
        mi.significant_adjusted = ok && mi.p_value < adjusted_alpha;
    }
    let suggested_changes = suggestions(spec, &indices);
    Ok(MIReport {
        indices,
        alpha,
        m,
        adjusted_alpha,
        critical_raw: mixture_critical_value(alpha),
        critical_adjusted: mixture_critical_value(adjusted_alpha),
        suggested_changes,
    })
}

fn suggestions(spec: &ModelSpec, indices: &[ModificationIndex]) -> Vec<SuggestedChange> {
    let mut sig: Vec<&ModificationIndex> = indices.iter().filter(|m| m.significant_adjusted).collect();
    sig.sort_by(|a, b| b.t_s.total_cmp(&a.t_s));
    let main_supported = |item: usize, attr: usize| {
        let s = AttrSet::singleton(attr);
        spec.mask(item).contains(&s)
            || indices.iter().any(|m| {
                m.significant_adjusted && m.candidate.item() == item && m.candidate.effect.set == s
            })
    };
    sig.iter()
        .enumerate()
        .map(|(rank, mi)| {
            let c = &mi.candidate;
            let item = c.item();
            let attrs: Vec<String> = c.effect.set.iter().map(|a| (a + 1).to_string()).collect();
            let (action, note) = if c.level() == 1 {
                match c.kind {
                    CandidateKind::Qmatrix => (
                        SuggestedAction::FlipQEntry,
                        format!("item also measures attribute {}", attrs[0]),
                    ),
                    CandidateKind::Model => (
                        SuggestedAction::AddEffect,
                        format!("add main effect of attribute {}", attrs[0]),
                    ),
                }
            } else {
                let missing: Vec<String> = c
                    .effect
                    .set
                    .iter()
                    .filter(|&a| !main_supported(item, a))
                    .map(|a| (a + 1).to_string())
                    .collect();
                if missing.is_empty() {
                    (
                        SuggestedAction::AddEffect,
                        format!(
                            "add interaction of attributes {} after its main effects",
                            attrs.join(",")
                        ),
                    )
                } else {
                    (
                        SuggestedAction::HierarchyNote,
                        format!(
                            "interaction significant without main effect(s) of attribute(s) {}; \
                             decide whether to keep the hierarchy principle",
                            missing.join(",")
                        ),
                    )
                }
            };
            SuggestedChange {
                rank: rank + 1,
                label: mi.label.clone(),
                item_id: spec.q().item_ids()[item].clone(),
                effect: c.effect.set,
                action,
                t_s: mi.t_s,
                note,
            }
        })
        .collect()
}

impl MIReport {
    /// Fixed-width table: parameter label, index to two decimals and stars
    /// (`*` significant at alpha, `**` at the adjusted level).
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Modification indices");
        let _ = writeln!(
            out,
            "alpha = {}, tests m = {}, adjusted alpha = {:.4e}",
            self.alpha, self.m, self.adjusted_alpha
        );
        let _ = writeln!(
            out,
            "* p < {} (MI > {:.2}); ** p < {}/{} (MI > {:.2})",
            self.alpha, self.critical_raw, self.alpha, self.m, self.critical_adjusted
        );
        let width = self
            .indices
            .iter()
            .map(|m| m.label.len())
            .max()
            .unwrap_or(0)
            .max("Parameter".len());
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<width$}  {:>10}", "Parameter", "MI");
        for mi in &self.indices {
            let value = if mi.is_available() {
                let stars = if mi.significant_adjusted {
                    "**"
                } else if mi.significant_raw {
                    "*"
                } else {
                    ""
                };
                format!("{:.2}{stars:<2}", mi.t_s)
            } else {
                "n/a  ".to_string()
            };
            let _ = writeln!(out, "{:<width$}  {:>10}", mi.label, value);
        }
        if !self.suggested_changes.is_empty() {
            let _ = writeln!(out);
            let _ = writeln!(out, "Suggested changes (apply one, then refit):");
            for s in &self.suggested_changes {
                let _ = writeln!(out, "{:>3}. {:<width$}  {:.2}  {}", s.rank, s.label, s.t_s, s.note);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mi::{enumerate_qmatrix_candidates, Candidate};
    use crate::model::{QMatrix, Template};

    fn index(c: Candidate, label: &str, t_s: f64, p: f64) -> ModificationIndex {
        ModificationIndex {
            candidate: c,
            label: label.into(),
            s2: 1.0,
            i22: Some(1.0),
            t_s,
            p_value: p,
            boundary_case: t_s == 0.0,
            significant_raw: false,
            significant_adjusted: false,
            unavailable: None,
            warnings: Vec::new(),
        }
    }

    fn setup() -> (ModelSpec, Vec<Candidate>) {
        let q = QMatrix::from_entries(vec![vec![1, 0], vec![0, 1]]).unwrap();
        let spec = ModelSpec::saturated(q, Template::LcdmFull).unwrap();
        let c = enumerate_qmatrix_candidates(&spec, 2);
        (spec, c)
    }

    #[test]
    fn thresholds_for_148_tests() {
        let (spec, c) = setup();
        let r = apply_multiplicity(&spec, vec![index(c[0].clone(), "a", 1.0, 0.2)], 0.05, Some(148)).unwrap();
        assert!((r.critical_adjusted - 11.55).abs() < 0.01);
        assert!(r.to_table().contains("(MI > 11.55)"));
    }

    #[test]
    fn single_test_threshold_is_raw() {
        let (spec, c) = setup();
        let r = apply_multiplicity(&spec, vec![index(c[0].clone(), "a", 1.0, 0.2)], 0.05, None).unwrap();
        assert_eq!(r.m, 1);
        assert_eq!(r.critical_adjusted, mixture_critical_value(0.05));
    }

    #[test]
    fn empty_report_when_nothing_available() {
        let (spec, _) = setup();
        let r = apply_multiplicity(&spec, Vec::new(), 0.05, None).unwrap();
        assert_eq!(r.m, 0);
        assert!(r.indices.is_empty());
    }

    #[test]
    fn flags_and_hierarchy() {
        let (spec, c) = setup();
        // item1: main on attr 2 not significant, interaction significant
        let v = vec![
            index(c[0].clone(), "m", 0.0, 1.0),
            index(c[1].clone(), "x", 20.0, 1e-6),
            index(c[2].clone(), "m2", 15.0, 5e-5),
            index(c[3].clone(), "x2", 3.0, 0.04),
        ];
        let r = apply_multiplicity(&spec, v, 0.05, None).unwrap();
        let flags: Vec<_> = r
            .indices
            .iter()
            .map(|m| (m.significant_raw, m.significant_adjusted))
            .collect();
        assert_eq!(flags, vec![(false, false), (true, true), (true, true), (true, false)]);
        assert_eq!(r.suggested_changes.len(), 2);
        assert_eq!(r.suggested_changes[0].action, SuggestedAction::HierarchyNote);
        assert_eq!(r.suggested_changes[1].action, SuggestedAction::FlipQEntry);
        let table = r.to_table();
        assert!(table.contains("0.00"));
        assert!(table.contains("20.00**"));
        assert!(table.contains("3.00*"));
    }

    #[test]
    fn rejects_bad_alpha() {
        let (spec, _) = setup();
        assert!(apply_multiplicity(&spec, Vec::new(), 0.5, None).is_err());
    }
}
