use ndarray::Array2;

use super::data::ResponseMatrix;
use super::params::ParameterSet;
use crate::error::{DcmError, Result};
use crate::model::{log_logistic, AttrSet, ModelSpec};

/// Per-item, per-class `ln π` and `ln(1 − π)`, flattened item-major.
pub(crate) struct LogProbTable {
    classes: usize,
    correct: Vec<f64>,
    incorrect: Vec<f64>,
}

impl LogProbTable {
    pub(crate) fn new(params: &ParameterSet) -> Self {
        let classes = params.structural.nu().len();
        let items = params.items.len();
        let mut correct = Vec::with_capacity(items * classes);
        let mut incorrect = Vec::with_capacity(items * classes);
        for item in &params.items {
            for c in 0..classes {
                let eta = item.eta(AttrSet::from_bits(c as u32));
                correct.push(log_logistic(eta));
                incorrect.push(log_logistic(-eta));
            }
        }
        LogProbTable {
            classes,
            correct,
            incorrect,
        }
    }

    /// `ln Π_i π^y (1−π)^(1−y)` for every class, written into `out`.
    #[inline]
    pub(crate) fn accumulate(&self, responses: impl Iterator<Item = u8>, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let c = self.classes;
        for (i, y) in responses.enumerate() {
            let row = if y == 1 {
                &self.correct[i * c..(i + 1) * c]
            } else {
                &self.incorrect[i * c..(i + 1) * c]
            };
            for (o, r) in out.iter_mut().zip(row) {
                *o += r;
            }
        }
    }
}

/// Posterior class membership for every examinee at a parameter point.
#[derive(Clone, Debug)]
pub struct Posterior {
    /// `P(c | y_e)`, examinees by classes.
    pub probs: Array2<f64>,
    /// `ln f(y_e)` per examinee.
    pub log_marginal: Vec<f64>,
    /// `Σ_e ln f(y_e)`, summed in examinee order.
    pub loglik: f64,
}

/// Marginal log-likelihood, accumulated in log space per class and combined
/// across classes with log-sum-exp.
pub fn log_likelihood(spec: &ModelSpec, params: &ParameterSet, data: &ResponseMatrix) -> Result<f64> {
    check_shapes(spec, params, data)?;
    let table = LogProbTable::new(params);
    let log_nu: Vec<f64> = params.structural.nu().iter().map(|v| v.ln()).collect();
    let mut buf = vec![0.0; log_nu.len()];
    let mut total = 0.0;
    for e in 0..data.examinees() {
        table.accumulate(data.row(e).iter().copied(), &mut buf);
        buf.iter_mut().zip(&log_nu).for_each(|(b, l)| *b += l);
        let lf = log_sum_exp(&buf);
        if !lf.is_finite() {
            return Err(DcmError::numerical(e, "non-finite marginal log-likelihood"));
        }
        total += lf;
    }
    Ok(total)
}

/// Posterior class probabilities `P(c|y_e) ∝ ν_c Π_i π^y (1−π)^(1−y)`.
pub fn e_step(spec: &ModelSpec, params: &ParameterSet, data: &ResponseMatrix) -> Result<Posterior> {
    check_shapes(spec, params, data)?;
    let table = LogProbTable::new(params);
    let log_nu: Vec<f64> = params.structural.nu().iter().map(|v| v.ln()).collect();
    let classes = log_nu.len();
    let examinees = data.examinees();
    let mut probs = Array2::<f64>::zeros((examinees, classes));
    let mut log_marginal = Vec::with_capacity(examinees);
    let mut buf = vec![0.0; classes];
    let mut total = 0.0;
    for e in 0..examinees {
        table.accumulate(data.row(e).iter().copied(), &mut buf);
        buf.iter_mut().zip(&log_nu).for_each(|(b, l)| *b += l);
        let lf = log_sum_exp(&buf);
        if !lf.is_finite() {
            return Err(DcmError::numerical(e, "posterior row has zero total likelihood"));
        }
        let mut row = probs.row_mut(e);
        let mut s = 0.0;
        for (p, b) in row.iter_mut().zip(&buf) {
            *p = (b - lf).exp();
            s += *p;
        }
        row.iter_mut().for_each(|p| *p /= s);
        log_marginal.push(lf);
        total += lf;
    }
    Ok(Posterior {
        probs,
        log_marginal,
        loglik: total,
    })
}

/// `ln L_ec` (without the class weight), examinees by classes.
pub fn class_log_likelihoods(params: &ParameterSet, data: &ResponseMatrix) -> Array2<f64> {
    let table = LogProbTable::new(params);
    let classes = params.structural.nu().len();
    let mut out = Array2::<f64>::zeros((data.examinees(), classes));
    let mut buf = vec![0.0; classes];
    for e in 0..data.examinees() {
        table.accumulate(data.row(e).iter().copied(), &mut buf);
        out.row_mut(e)
            .iter_mut()
            .zip(&buf)
            .for_each(|(o, b)| *o = *b);
    }
    out
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn check_shapes(spec: &ModelSpec, params: &ParameterSet, data: &ResponseMatrix) -> Result<()> {
    if data.items() != spec.items() || params.items.len() != spec.items() {
        return Err(DcmError::config(format!(
            "shape mismatch: spec has {} items, parameters {}, data {}",
            spec.items(),
            params.items.len(),
            data.items()
        )));
    }
    if params.structural.nu().len() != spec.classes() {
        return Err(DcmError::config("structural parameters do not match the attribute count"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{logit, ItemParameterSet, QMatrix, Template};
    use ndarray::array;

    fn one_item(p0: f64, p1: f64) -> (ModelSpec, ParameterSet) {
        let q = QMatrix::from_entries(vec![vec![1]]).unwrap();
        let spec = ModelSpec::saturated(q, Template::LcdmFull).unwrap();
        let mut params = ParameterSet::zeros(&spec);
        params.items[0] =
            ItemParameterSet::with_values(1, spec.mask(0), &[logit(p0), logit(p1) - logit(p0)])
                .unwrap();
        (spec, params)
    }

    #[test]
    fn indistinguishable_classes() {
        let (spec, params) = one_item(0.5, 0.5);
        let data = ResponseMatrix::from_array(array![[1u8]]).unwrap();
        let ll = log_likelihood(&spec, &params, &data).unwrap();
        assert!((ll - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn two_class_hand_enumeration() {
        let (spec, params) = one_item(0.2, 0.8);
        let data = ResponseMatrix::from_array(array![[1u8]]).unwrap();
        let ll = log_likelihood(&spec, &params, &data).unwrap();
        assert!((ll - (0.5 * 0.2 + 0.5 * 0.8f64).ln()).abs() < 1e-14);
    }

    #[test]
    fn identical_items_leave_prior() {
        let (spec, mut params) = one_item(0.3, 0.3);
        params.structural.set_gammas(&[0.7]);
        let data = ResponseMatrix::from_array(array![[1u8], [0u8]]).unwrap();
        let post = e_step(&spec, &params, &data).unwrap();
        for e in 0..2 {
            for c in 0..2 {
                assert!((post.probs[[e, c]] - params.structural.nu()[c]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn dominant_class_takes_all_posterior_mass() {
        let (spec, mut params) = one_item(0.3, 0.6);
        params.structural.set_gammas(&[-40.0]);
        let data = ResponseMatrix::from_array(array![[1u8], [0u8]]).unwrap();
        let post = e_step(&spec, &params, &data).unwrap();
        for e in 0..2 {
            assert!((post.probs[[e, 0]] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let (spec, params) = one_item(0.2, 0.8);
        let data = ResponseMatrix::from_array(array![[1u8, 0u8]]).unwrap();
        assert!(log_likelihood(&spec, &params, &data).is_err());
    }
}
