use nalgebra::{DMatrix, DVector};

use super::data::ResponseMatrix;
use super::likelihood::Posterior;
use super::structural::StructuralParameterSet;
use crate::error::{DcmError, Result};
use crate::model::{log_logistic, logistic, structural_terms, AttrSet, ItemParameterSet, ModelSpec};

/// Bound on |λ| and |γ|; keeps probabilities away from exactly 0 or 1.
pub const PARAM_BOUND: f64 = 15.0;
pub const NEWTON_GRAD_TOL: f64 = 1e-8;
pub const NEWTON_MAX_ITER: usize = 50;
/// Floor on saturated-model class proportions.
pub const NU_FLOOR: f64 = 1e-10;

/// Expected correct/incorrect counts per class for one item.
#[derive(Clone, Debug, PartialEq)]
pub struct ItemCounts {
    pub correct: Vec<f64>,
    pub incorrect: Vec<f64>,
}

/// Expected complete-data sufficient statistics from an E-step.
#[derive(Clone, Debug)]
pub struct ExpectedCounts {
    pub class_totals: Vec<f64>,
    pub items: Vec<ItemCounts>,
}

pub fn expected_counts(post: &Posterior, data: &ResponseMatrix) -> ExpectedCounts {
    let classes = post.probs.ncols();
    let items = data.items();
    let mut totals = vec![0.0; classes];
    let mut correct = vec![vec![0.0; classes]; items];
    for e in 0..data.examinees() {
        let row = post.probs.row(e);
        let row = row.as_slice().expect("posterior rows are contiguous");
        totals.iter_mut().zip(row).for_each(|(t, p)| *t += p);
        for (i, &y) in data.row(e).iter().enumerate() {
            if y == 1 {
                correct[i].iter_mut().zip(row).for_each(|(t, p)| *t += p);
            }
        }
    }
    let items = correct
        .into_iter()
        .map(|corr| {
            let incorrect = totals
                .iter()
                .zip(&corr)
                .map(|(t, c)| (t - c).max(0.0))
                .collect();
            ItemCounts {
                correct: corr,
                incorrect,
            }
        })
        .collect();
    ExpectedCounts {
        class_totals: totals,
        items,
    }
}

pub(crate) struct NewtonOutcome {
    pub theta: Vec<f64>,
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub clamped: bool,
    pub gradient_fallback: bool,
}

/// Damped Newton ascent with step halving and box clamping at
/// [`PARAM_BOUND`]. `eval` returns objective, gradient and Hessian.
pub(crate) fn newton_maximize<F>(start: &[f64], eval: F) -> NewtonOutcome
where
    F: Fn(&[f64]) -> (f64, DVector<f64>, DMatrix<f64>),
{
    let clamp = |v: f64| v.clamp(-PARAM_BOUND, PARAM_BOUND);
    let mut theta: Vec<f64> = start.iter().map(|&v| clamp(v)).collect();
    let (mut f, mut g, mut h) = eval(&theta);
    let mut trace = vec![f];
    let mut converged = false;
    let mut gradient_fallback = false;
    for _ in 0..NEWTON_MAX_ITER {
        if g.amax() < NEWTON_GRAD_TOL {
            converged = true;
            break;
        }
        let neg_h = -&h;
        let dir = match neg_h.clone().cholesky() {
            Some(ch) => ch.solve(&g),
            None => {
                gradient_fallback = true;
                let scale = neg_h.diagonal().amax().max(1.0);
                &g / scale
            }
        };
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand: Vec<f64> = theta
                .iter()
                .zip(dir.iter())
                .map(|(t, d)| clamp(t + step * d))
                .collect();
            let (fc, gc, hc) = eval(&cand);
            if fc.is_finite() && fc >= f {
                accepted = Some((cand, fc, gc, hc));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((cand, fc, gc, hc)) => {
                let moved = cand != theta;
                theta = cand;
                f = fc;
                g = gc;
                h = hc;
                trace.push(f);
                if !moved {
                    break;
                }
            }
            None => break,
        }
    }
    if !converged && g.amax() < NEWTON_GRAD_TOL {
        converged = true;
    }
    let clamped = theta.iter().any(|v| v.abs() >= PARAM_BOUND);
    NewtonOutcome {
        theta,
        objective_trace: trace,
        converged,
        clamped,
        gradient_fallback,
    }
}

/// Result of one item M-step.
#[derive(Clone, Debug)]
pub struct ItemMStep {
    pub params: ItemParameterSet,
    /// Objective after every accepted inner iteration (nondecreasing).
    pub objective_trace: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Maximizes `Σ_c [n_c1 ln π_c + n_c0 ln(1 − π_c)]` over the item's active
/// effects by damped Newton iterations.
pub fn m_step_item(
    spec: &ModelSpec,
    item: usize,
    start: &ItemParameterSet,
    counts: &ItemCounts,
) -> Result<ItemMStep> {
    let classes = spec.classes();
    if counts.correct.len() != classes || counts.incorrect.len() != classes {
        return Err(DcmError::config("item counts do not cover every class"));
    }
    if counts
        .correct
        .iter()
        .chain(&counts.incorrect)
        .any(|&w| w < 0.0 || !w.is_finite())
    {
        return Err(DcmError::config("item counts must be finite and nonnegative"));
    }
    if counts.correct.iter().chain(&counts.incorrect).all(|&w| w == 0.0) {
        return Err(DcmError::config("item counts carry no weight"));
    }
    let mask = spec.mask(item);
    let row = spec.q().row(item);
    // classes sharing the same measured-attribute pattern have identical π
    let patterns = row.subsets();
    let mut n1 = vec![0.0; patterns.len()];
    let mut n0 = vec![0.0; patterns.len()];
    for c in 0..classes {
        let pat = AttrSet::from_bits(c as u32 & row.bits());
        let k = patterns.iter().position(|&p| p == pat).expect("subset of row");
        n1[k] += counts.correct[c];
        n0[k] += counts.incorrect[c];
    }
    let design: Vec<Vec<f64>> = patterns
        .iter()
        .map(|&p| mask.iter().map(|s| s.is_subset_of(p) as u8 as f64).collect())
        .collect();
    let k = mask.len();
    let eval = |theta: &[f64]| {
        let mut f = 0.0;
        let mut g = DVector::zeros(k);
        let mut h = DMatrix::zeros(k, k);
        for (x, (&a, &b)) in design.iter().zip(n1.iter().zip(&n0)) {
            let eta: f64 = x.iter().zip(theta).map(|(x, t)| x * t).sum();
            f += a * log_logistic(eta) + b * log_logistic(-eta);
            let p = logistic(eta);
            let r = a - (a + b) * p;
            let w = (a + b) * p * (1.0 - p);
            for j in 0..k {
                if x[j] == 0.0 {
                    continue;
                }
                g[j] += r;
                for l in 0..k {
                    if x[l] != 0.0 {
                        h[(j, l)] -= w;
                    }
                }
            }
        }
        (f, g, h)
    };
    let outcome = newton_maximize(&start.active_values(), eval);
    let id = &spec.q().item_ids()[item];
    let mut warnings = Vec::new();
    if outcome.clamped {
        warnings.push(format!("item '{id}': parameter clamped at ±{PARAM_BOUND}"));
    }
    if outcome.gradient_fallback {
        warnings.push(format!(
            "item '{id}': singular M-step Hessian, fell back to gradient steps"
        ));
    }
    let params = ItemParameterSet::with_values(spec.attributes(), mask, &outcome.theta)?;
    Ok(ItemMStep {
        params,
        objective_trace: outcome.objective_trace,
        warnings,
    })
}

/// Structural M-step: closed form for the saturated model, Newton
/// iterations on the log-linear model otherwise.
pub fn m_step_structural(
    class_counts: &[f64],
    attributes: usize,
    structural_order: usize,
) -> Result<(StructuralParameterSet, Vec<String>)> {
    m_step_structural_from(class_counts, attributes, structural_order, None)
}

/// As [`m_step_structural`], warm-starting the Newton iterations of the
/// non-saturated model at `start`.
pub(crate) fn m_step_structural_from(
    class_counts: &[f64],
    attributes: usize,
    structural_order: usize,
    start: Option<&[f64]>,
) -> Result<(StructuralParameterSet, Vec<String>)> {
    let classes = 1usize << attributes;
    if class_counts.len() != classes {
        return Err(DcmError::config("class counts do not cover every class"));
    }
    if class_counts.iter().any(|&w| w < 0.0 || !w.is_finite()) {
        return Err(DcmError::config("class counts must be finite and nonnegative"));
    }
    let total: f64 = class_counts.iter().sum();
    if total <= 0.0 {
        return Err(DcmError::config("class counts sum to zero"));
    }
    let terms = structural_terms(attributes, structural_order);
    let mut warnings = Vec::new();
    let mut start_owned: Option<Vec<f64>> = None;
    if structural_order == attributes {
        let mut nu: Vec<f64> = class_counts.iter().map(|n| n / total).collect();
        if nu.iter().any(|&v| v < NU_FLOOR) {
            warnings.push(format!(
                "empty latent class: proportions floored at {NU_FLOOR:e} and renormalized"
            ));
            nu.iter_mut().for_each(|v| *v = v.max(NU_FLOOR));
            let s: f64 = nu.iter().sum();
            nu.iter_mut().for_each(|v| *v /= s);
        }
        let log_ratio: Vec<f64> = nu.iter().map(|v| (v / nu[0]).ln()).collect();
        let gammas: Vec<f64> = terms
            .iter()
            .map(|&s| {
                // Möbius inversion of log(ν_S / ν_0) = Σ_{T ⊆ S} γ_T
                s.subsets()
                    .into_iter()
                    .map(|t| {
                        let sign = if (s.len() - t.len()) % 2 == 0 { 1.0 } else { -1.0 };
                        sign * log_ratio[t.index()]
                    })
                    .sum()
            })
            .collect();
        if gammas.iter().all(|g: &f64| g.abs() <= PARAM_BOUND) {
            return Ok((
                StructuralParameterSet::from_gammas(attributes, terms, gammas),
                warnings,
            ));
        }
        // Clamping single coordinates of the closed form can lower the
        // objective; solve the box-constrained problem instead.
        if start.is_none() {
            start_owned = Some(gammas.iter().map(|g| g.clamp(-PARAM_BOUND, PARAM_BOUND)).collect());
        }
    }

    let k = terms.len();
    let design: Vec<Vec<f64>> = (0..classes)
        .map(|c| {
            let cls = AttrSet::from_bits(c as u32);
            terms.iter().map(|s| s.is_subset_of(cls) as u8 as f64).collect()
        })
        .collect();
    let eval = |theta: &[f64]| {
        let s = StructuralParameterSet::from_gammas(attributes, terms.clone(), theta.to_vec());
        let nu = s.nu();
        let f: f64 = class_counts
            .iter()
            .zip(nu)
            .filter(|(n, _)| **n > 0.0)
            .map(|(n, v)| n * v.ln())
            .sum();
        let mut m = DVector::zeros(k);
        let mut sxx = DMatrix::zeros(k, k);
        let mut obs = DVector::zeros(k);
        for c in 0..classes {
            let x = DVector::from_column_slice(&design[c]);
            m += nu[c] * &x;
            sxx += nu[c] * &x * x.transpose();
            obs += class_counts[c] * &x;
        }
        let g = obs - total * &m;
        let h = -total * (sxx - &m * m.transpose());
        (f, g, h)
    };
    let start = match (start, start_owned) {
        (Some(s), _) => s.to_vec(),
        (None, Some(s)) => s,
        (None, None) => vec![0.0; k],
    };
    let outcome = newton_maximize(&start, eval);
    if outcome.clamped {
        warnings.push(format!("structural parameter clamped at ±{PARAM_BOUND}"));
    }
    if outcome.gradient_fallback {
        warnings.push("singular structural M-step Hessian, fell back to gradient steps".into());
    }
    if !outcome.converged && !outcome.clamped {
        warnings.push("structural M-step did not reach gradient tolerance".into());
    }
    Ok((
        StructuralParameterSet::from_gammas(attributes, terms, outcome.theta),
        warnings,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{logit, QMatrix, Template};

    fn single_attribute_spec() -> ModelSpec {
        let q = QMatrix::from_entries(vec![vec![1, 0], vec![0, 1]]).unwrap();
        ModelSpec::saturated(q, Template::LcdmFull).unwrap()
    }

    #[test]
    fn weighted_proportions_closed_form() {
        let spec = single_attribute_spec();
        // classes 0b00, 0b01, 0b10, 0b11; item 0 measures attribute 1
        let counts = ItemCounts {
            correct: vec![20.0, 80.0, 10.0, 40.0],
            incorrect: vec![80.0, 20.0, 40.0, 10.0],
        };
        let start = ItemParameterSet::new(2, spec.mask(0));
        let out = m_step_item(&spec, 0, &start, &counts).unwrap();
        let l0 = logit(0.2);
        assert!((out.params.intercept() - l0).abs() < 1e-9);
        assert!((out.params.value(AttrSet::singleton(0)) - (logit(0.8) - l0)).abs() < 1e-9);
        for w in out.objective_trace.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn zero_weight_class_imposes_nothing() {
        let spec = single_attribute_spec();
        let base = ItemCounts {
            correct: vec![20.0, 80.0, 0.0, 0.0],
            incorrect: vec![80.0, 20.0, 0.0, 0.0],
        };
        let start = ItemParameterSet::new(2, spec.mask(0));
        let a = m_step_item(&spec, 0, &start, &base).unwrap();
        assert!((a.params.intercept() - logit(0.2)).abs() < 1e-9);
        assert!((a.params.value(AttrSet::singleton(0)) - (logit(0.8) - logit(0.2))).abs() < 1e-9);
    }

    #[test]
    fn degenerate_item_is_clamped_with_warning() {
        let spec = single_attribute_spec();
        let counts = ItemCounts {
            correct: vec![0.0; 4],
            incorrect: vec![10.0; 4],
        };
        let start = ItemParameterSet::new(2, spec.mask(0));
        let out = m_step_item(&spec, 0, &start, &counts).unwrap();
        assert!(out.params.intercept() >= -PARAM_BOUND);
        assert!(!out.warnings.is_empty());
    }

    #[test]
    fn rejects_negative_weights() {
        let spec = single_attribute_spec();
        let counts = ItemCounts {
            correct: vec![-1.0, 0.0, 0.0, 0.0],
            incorrect: vec![1.0; 4],
        };
        let start = ItemParameterSet::new(2, spec.mask(0));
        assert!(m_step_item(&spec, 0, &start, &counts).is_err());
    }

    #[test]
    fn saturated_symmetric_counts() {
        let (s, w) = m_step_structural(&[25.0; 4], 2, 2).unwrap();
        assert!(w.is_empty());
        assert!(s.gammas().iter().all(|g| g.abs() < 1e-15));
        assert!(s.nu().iter().all(|v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn saturated_log_contrasts() {
        let (s, _) = m_step_structural(&[40.0, 20.0, 20.0, 20.0], 2, 2).unwrap();
        let g = s.gammas();
        assert!((g[0] - (20.0f64 / 40.0).ln()).abs() < 1e-12);
        assert!((g[1] - (20.0f64 / 40.0).ln()).abs() < 1e-12);
        assert!((g[2] - (20.0f64 * 40.0 / (20.0 * 20.0)).ln()).abs() < 1e-12);
        for (v, n) in s.nu().iter().zip([0.4, 0.2, 0.2, 0.2]) {
            assert!((v - n).abs() < 1e-15);
        }
    }

    #[test]
    fn saturated_matches_normalized_counts() {
        let counts = [3.0, 11.5, 7.25, 0.5, 9.0, 2.0, 4.0, 13.0];
        let total: f64 = counts.iter().sum();
        let (s, _) = m_step_structural(&counts, 3, 3).unwrap();
        for (v, n) in s.nu().iter().zip(counts) {
            assert!((v - n / total).abs() < 1e-15);
        }
    }

    #[test]
    fn order_one_reproduces_independence_table() {
        // independence oracle: product of marginals 0.3 / 0.6 over 1000
        let p = [0.3, 0.6];
        let counts: Vec<f64> = (0..4)
            .map(|c| {
                let a = if c & 1 == 1 { p[0] } else { 1.0 - p[0] };
                let b = if c & 2 == 2 { p[1] } else { 1.0 - p[1] };
                1000.0 * a * b
            })
            .collect();
        let (s, _) = m_step_structural(&counts, 2, 1).unwrap();
        for (v, n) in s.nu().iter().zip(&counts) {
            assert!((v - n / 1000.0).abs() < 1e-10);
        }
    }

    #[test]
    fn empty_class_is_floored() {
        let (s, w) = m_step_structural(&[10.0, 0.0, 5.0, 5.0], 2, 2).unwrap();
        assert!(!w.is_empty());
        assert!(s.nu().iter().all(|&v| v > 0.0));
        assert!((s.nu().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
