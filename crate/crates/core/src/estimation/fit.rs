use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::ResponseMatrix;
use super::likelihood::{e_step, log_likelihood};
use super::mstep::{expected_counts, m_step_item, m_step_structural_from, PARAM_BOUND};
use super::params::{parameter_ids, ParameterSet};
use crate::error::{DcmError, Result};
use crate::model::{check_monotonicity, AttributeProfile, ModelSpec};
use crate::score::{chi_squared_pvalue, empirical_info, GradientContext};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub max_iterations: usize,
    /// Stop when |Δℓ| falls below this...
    pub abs_tol: f64,
    /// ...or below this fraction of |ℓ|.
    pub rel_tol: f64,
    /// Random restarts with uniform(−0.5, 0.5) jitter on the starting values.
    pub restarts: usize,
    pub seed: u64,
    /// Finish with scoring steps on the empirical information until the
    /// score is numerically zero.
    pub polish: bool,
    pub polish_tol: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_iterations: 2000,
            abs_tol: 1e-7,
            rel_tol: 1e-9,
            restarts: 0,
            seed: 0,
            polish: true,
            polish_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub spec: ModelSpec,
    pub params: ParameterSet,
    pub loglik: f64,
    pub loglik_trace: Vec<f64>,
    /// `P(c | y_e)`, examinees by classes.
    pub posteriors: Array2<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn free_parameters(&self) -> usize {
        self.spec.free_parameter_count()
    }

    pub fn aic(&self) -> f64 {
        -2.0 * self.loglik + 2.0 * self.free_parameters() as f64
    }

    pub fn bic(&self) -> f64 {
        let e = self.posteriors.nrows() as f64;
        -2.0 * self.loglik + self.free_parameters() as f64 * e.ln()
    }

    pub fn examinees(&self) -> usize {
        self.posteriors.nrows()
    }
}

/// Marginal maximum likelihood by EM.
pub fn fit(spec: &ModelSpec, data: &ResponseMatrix, config: &FitConfig) -> Result<FitResult> {
    let start = ParameterSet::starting_values(spec, data);
    fit_from(spec, data, config, start)
}

/// EM from explicit starting values (plus any configured restarts).
pub fn fit_from(
    spec: &ModelSpec,
    data: &ResponseMatrix,
    config: &FitConfig,
    start: ParameterSet,
) -> Result<FitResult> {
    data.check_against(spec.q())?;
    if data.examinees() == 0 {
        return Err(DcmError::config("no examinees"));
    }
    let mut warnings = Vec::new();
    for (i, m) in data.item_means().iter().enumerate() {
        if *m == 0.0 || *m == 1.0 {
            warnings.push(format!(
                "item '{}' has no response variation; its intercept will be clamped",
                spec.q().item_ids()[i]
            ));
        }
    }
    let mut best = run_em(spec, data, config, start.clone())?;
    if config.restarts > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let base = start.vectorize();
        for _ in 0..config.restarts {
            let jittered: Vec<f64> = base
                .iter()
                .map(|v| v + rng.random_range(-0.5..0.5))
                .collect();
            let candidate = run_em(spec, data, config, ParameterSet::from_vector(spec, &jittered)?)?;
            if candidate.loglik > best.loglik {
                best = candidate;
            }
        }
    }
    for (i, item) in best.params.items.iter().enumerate() {
        let bad = check_monotonicity(item, spec.q().row(i));
        if !bad.is_empty() {
            best.warnings.push(format!(
                "item '{}': {} monotonicity violation(s)",
                spec.q().item_ids()[i],
                bad.len()
            ));
        }
    }
    warnings.append(&mut best.warnings);
    best.warnings = warnings;
    Ok(best)
}

fn run_em(
    spec: &ModelSpec,
    data: &ResponseMatrix,
    config: &FitConfig,
    mut params: ParameterSet,
) -> Result<FitResult> {
    let mut trace = Vec::new();
    let mut warnings: Vec<String> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut post = e_step(spec, &params, data)?;
    trace.push(post.loglik);
    while iterations < config.max_iterations {
        iterations += 1;
        let counts = expected_counts(&post, data);
        for i in 0..spec.items() {
            let step = m_step_item(spec, i, &params.items[i], &counts.items[i])?;
            params.items[i] = step.params;
            push_unique(&mut warnings, step.warnings);
        }
        let (structural, w) = m_step_structural_from(
            &counts.class_totals,
            spec.attributes(),
            spec.structural_order(),
            Some(params.structural.gammas()),
        )?;
        params.structural = structural;
        push_unique(&mut warnings, w);

        let prev = post.loglik;
        post = e_step(spec, &params, data)?;
        trace.push(post.loglik);
        let delta = (post.loglik - prev).abs();
        if delta < config.abs_tol || delta < config.rel_tol * post.loglik.abs() {
            converged = true;
            break;
        }
    }
    if config.polish && converged {
        if let Some((p, ll)) = polish(spec, data, &params, post.loglik, config.polish_tol, &mut trace)? {
            params = p;
            post = e_step(spec, &params, data)?;
            debug_assert!((post.loglik - ll).abs() < 1e-6);
        }
    }
    Ok(FitResult {
        spec: spec.clone(),
        params,
        loglik: post.loglik,
        loglik_trace: trace,
        posteriors: post.probs,
        converged,
        iterations,
        warnings,
    })
}

/// Scoring iterations `β ← β + (Σ g gᵀ)⁻¹ Σ g` with step halving, accepting
/// only steps that do not lower ℓ.
fn polish(
    spec: &ModelSpec,
    data: &ResponseMatrix,
    start: &ParameterSet,
    start_ll: f64,
    tol: f64,
    trace: &mut Vec<f64>,
) -> Result<Option<(ParameterSet, f64)>> {
    let ids = parameter_ids(spec);
    let mut params = start.clone();
    let mut ll = start_ll;
    let mut moved = false;
    for _ in 0..30 {
        let ctx = GradientContext::new(spec, &params, data)?;
        let score = ctx.score_vector(&ids)?;
        let g = DVector::from_vec(score.entries);
        if g.amax() < tol {
            break;
        }
        let mut info: DMatrix<f64> = empirical_info(&score.per_examinee).matrix;
        let p = info.nrows();
        let ridge = 1e-10 * info.trace() / p as f64;
        for j in 0..p {
            info[(j, j)] += ridge;
        }
        let Some(chol) = info.cholesky() else { break };
        let dir = chol.solve(&g);
        let base = params.vectorize();
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..20 {
            let cand: Vec<f64> = base
                .iter()
                .zip(dir.iter())
                .map(|(b, d)| (b + step * d).clamp(-PARAM_BOUND, PARAM_BOUND))
                .collect();
            let cp = ParameterSet::from_vector(spec, &cand)?;
            let cl = log_likelihood(spec, &cp, data)?;
            if cl >= ll {
                accepted = Some((cp, cl));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((cp, cl)) => {
                params = cp;
                ll = cl;
                trace.push(ll);
                moved = true;
            }
            None => break,
        }
    }
    Ok(moved.then_some((params, ll)))
}

fn push_unique(into: &mut Vec<String>, from: Vec<String>) {
    for w in from {
        if !into.contains(&w) {
            into.push(w);
        }
    }
}

/// Posterior-mode class for each examinee; ties go to the lowest class index.
pub fn classify(fit: &FitResult) -> Vec<AttributeProfile> {
    let a = fit.spec.attributes();
    fit.posteriors
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (c, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = c;
                }
            }
            AttributeProfile::new(best, a)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrTest {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub warning: Option<String>,
}

/// Likelihood-ratio test of a reduced model nested in a full model.
pub fn lr_test(full: &FitResult, reduced: &FitResult, df: usize) -> Result<LrTest> {
    if df == 0 {
        return Err(DcmError::config("likelihood-ratio df must be at least 1"));
    }
    let raw = 2.0 * (full.loglik - reduced.loglik);
    let warning = if raw < -1e-6 {
        Some(format!(
            "negative likelihood-ratio statistic {raw:.3e}; the full-model optimization likely failed"
        ))
    } else {
        None
    };
    let statistic = raw.max(0.0);
    Ok(LrTest {
        statistic,
        df,
        p_value: chi_squared_pvalue(statistic, df),
        warning,
    })
}
