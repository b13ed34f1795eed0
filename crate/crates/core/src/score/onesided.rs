use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{DcmError, Result};

/// Order constraint on a candidate parameter under the alternative.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Constraint {
    /// `β > 0` (main effects, and interactions with no fitted main effect).
    Positive,
    /// `β > −k`, with `k` the smallest relevant fitted main effect.
    GreaterThanMinusK { k: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneSidedScoreResult {
    pub t_s: f64,
    pub s2: f64,
    pub i22: f64,
    pub p_value: f64,
    pub boundary_case: bool,
}

/// Two-sided score statistic `s₂ᵀ I²² s₂`, with `I²²` the inverse-
/// information block computed from the empirical (sample) information.
pub fn score_statistic(s2: &DVector<f64>, i22: &DMatrix<f64>) -> f64 {
    assert_eq!(s2.len(), i22.nrows(), "dimension mismatch");
    (s2.transpose() * i22 * s2)[(0, 0)].max(0.0)
}

/// One-sided score statistic for a scalar candidate.
///
/// The one-step estimate of the candidate is `b̂ = I²² s₂`. If it lies inside
/// the alternative region the statistic equals the two-sided statistic;
/// otherwise the squared standardized distance from `b̂` to the boundary is
/// subtracted. For the positive constraint this truncates to exactly zero.
pub fn one_sided_score(s2: f64, i22_effective: f64, constraint: Constraint) -> Result<OneSidedScoreResult> {
    if i22_effective.is_nan() || i22_effective <= 0.0 || !s2.is_finite() {
        return Err(DcmError::config(format!(
            "invalid score inputs s2={s2}, i22={i22_effective}"
        )));
    }
    let k = match constraint {
        Constraint::Positive => 0.0,
        Constraint::GreaterThanMinusK { k } => {
            if k < 0.0 || !k.is_finite() {
                return Err(DcmError::config(format!(
                    "constraint bound k={k} must be nonnegative"
                )));
            }
            k
        }
    };
    let two_sided = s2 * s2 * i22_effective;
    let estimate = i22_effective * s2;
    let (t_s, boundary_case) = if estimate > -k {
        (two_sided, false)
    } else if k == 0.0 {
        (0.0, true)
    } else {
        let dist = (estimate + k).powi(2) / i22_effective;
        let t = two_sided - dist;
        if t <= 0.0 {
            (0.0, true)
        } else {
            (t, false)
        }
    };
    Ok(OneSidedScoreResult {
        t_s,
        s2,
        i22: i22_effective,
        p_value: mixture_pvalue(t_s),
        boundary_case,
    })
}

/// Upper-tail p-value under the 50:50 mixture of χ²(0) and χ²(1).
pub fn mixture_pvalue(t: f64) -> f64 {
    if t <= 0.0 {
        1.0
    } else {
        // P(χ²(1) ≥ t) = erfc(√(t/2))
        0.5 * erfc((t / 2.0).sqrt())
    }
}

/// Critical value `c` with `½ P(χ²(1) > c) = α`; zero for `α ≥ ½`, where the
/// continuous component's whole mass is needed.
pub fn mixture_critical_value(alpha: f64) -> f64 {
    assert!(alpha > 0.0, "alpha must be positive");
    if alpha >= 0.5 {
        return 0.0;
    }
    let target = 2.0 * alpha;
    let mut z = erfc_inv(target);
    for _ in 0..3 {
        let f = erfc(z) - target;
        let df = -2.0 / std::f64::consts::PI.sqrt() * (-z * z).exp();
        z -= f / df;
    }
    2.0 * z * z
}

/// Upper-tail p-value of χ²(df).
pub fn chi_squared_pvalue(statistic: f64, df: usize) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    if statistic <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(df as f64)
        .expect("df is positive")
        .sf(statistic)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negative_score_under_positive_constraint() {
        let r = one_sided_score(-3.2, 0.01, Constraint::Positive).unwrap();
        assert_eq!(r.t_s, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert!(r.boundary_case);
    }

    #[test]
    fn positive_score_gives_two_sided_statistic() {
        let r = one_sided_score(3.2, 0.5, Constraint::Positive).unwrap();
        assert_eq!(r.t_s, 3.2 * 3.2 * 0.5);
        assert!(!r.boundary_case);
    }

    #[test]
    fn zero_k_collapses_to_positive() {
        for s2 in [-2.0, -0.1, 0.3, 4.0] {
            let a = one_sided_score(s2, 0.2, Constraint::Positive).unwrap();
            let b = one_sided_score(s2, 0.2, Constraint::GreaterThanMinusK { k: 0.0 }).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn greater_than_minus_k_branches() {
        // b̂ = 0.5 * -1 = -0.5 > -1: untruncated
        let r = one_sided_score(-1.0, 0.5, Constraint::GreaterThanMinusK { k: 1.0 }).unwrap();
        assert!((r.t_s - 0.5).abs() < 1e-15);
        // b̂ = 0.5 * -6 = -3 < -1: subtract (b̂ + k)² / i22 = 8 from 18
        let r = one_sided_score(-6.0, 0.5, Constraint::GreaterThanMinusK { k: 1.0 }).unwrap();
        assert!((r.t_s - 10.0).abs() < 1e-12);
    }

    #[test]
    fn negative_k_is_a_contract_violation() {
        assert!(one_sided_score(1.0, 1.0, Constraint::GreaterThanMinusK { k: -0.5 }).is_err());
    }

    #[test]
    fn score_statistic_cases() {
        let i22 = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        assert_eq!(score_statistic(&DVector::zeros(2), &i22), 0.0);
        let s = DVector::from_vec(vec![1.5]);
        let m = DMatrix::from_element(1, 1, 0.4);
        assert!((score_statistic(&s, &m) - 1.5 * 1.5 * 0.4).abs() < 1e-15);
    }

    #[test]
    fn mixture_pvalues() {
        assert_eq!(mixture_pvalue(0.0), 1.0);
        assert!((mixture_pvalue(11.55) / (0.05 / 148.0) - 1.0).abs() < 0.01);
        assert!((mixture_pvalue(8.36) / (0.05 / 26.0) - 1.0).abs() < 0.01);
    }

    #[test]
    fn critical_values() {
        // χ²(1) upper 0.10 quantile
        assert!((mixture_critical_value(0.05) - 2.705_543_454_095_404).abs() < 1e-6);
        assert!((mixture_critical_value(0.05 / 148.0) - 11.55).abs() < 0.01);
        assert!((mixture_critical_value(0.05 / 26.0) - 8.36).abs() < 0.01);
        assert_eq!(mixture_critical_value(0.5), 0.0);
        assert!(mixture_critical_value(0.4999999) < 1e-10);
    }

    #[test]
    fn round_trip() {
        let mut t = 0.5;
        while t <= 30.0 {
            let back = mixture_critical_value(mixture_pvalue(t));
            assert!((back - t).abs() < 1e-5, "t={t} back={back}");
            t += 0.25;
        }
    }

    #[test]
    fn chi_squared_reference() {
        assert!((chi_squared_pvalue(3.841_458_820_694_124, 1) - 0.05).abs() < 1e-9);
        assert_eq!(chi_squared_pvalue(0.0, 3), 1.0);
    }
}
