//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::Instant;

use common::{brute_loglik, central_difference, naive_info, random_instance};
use dcmmi::estimation::{fit, log_likelihood, parameter_ids, FitConfig, ParameterSet};
use dcmmi::mi::{enumerate_model_candidates, enumerate_qmatrix_candidates};
use dcmmi::model::{ModelSpec, QMatrix, Template};
use dcmmi::score::{empirical_info, mixture_critical_value, GradientContext};
use dcmmi::sim::{
    run_power_dina_study, run_power_q_study, run_type1_dina_study, run_type1_q_study, EffectSize,
    SimDesign, Study, StudyResult,
};

const SEED: u64 = 1;

type Outcome = (bool, String);

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

fn rate(result: &StudyResult, parameter: &str, examinees: usize, alpha: f64) -> f64 {
    result
        .row(parameter, examinees, alpha)
        .unwrap_or_else(|| panic!("no row for {parameter} at E={examinees}, alpha={alpha}"))
        .rate
}

fn thresholds() -> Outcome {
    let a = mixture_critical_value(0.05 / 148.0);
    let b = mixture_critical_value(0.05 / 26.0);
    (
        within(a, 11.55, 0.01) && within(b, 8.36, 0.01),
        format!("c(.05/148) = {a:.4}, c(.05/26) = {b:.4}"),
    )
}

fn type1_q(full: &StudyResult) -> Outcome {
    let r = full.truncated(300);
    let main = rate(&r, "lambda_1,1,(2)", 2500, 0.05);
    let fw = rate(&r, "familywise", 2500, 0.05);
    (
        within(main, 0.055, 0.035) && within(fw, 0.107, 0.05) && !r.flagged,
        format!("lambda_1,1,(2) rate {main:.3} (target .055 +/- .035), familywise {fw:.3} (target .107 +/- .05)"),
    )
}

fn power_q() -> Outcome {
    let alphas = Study::PowerQ.default_alphas();
    let small = SimDesign::new(EffectSize::Smaller, 500, 200, SEED);
    let s = run_power_q_study(&small, &alphas, &[500]).unwrap();
    let small_rate = rate(&s, "lambda_4,1,(2)", 500, 0.0005);
    let large = SimDesign::new(EffectSize::Large, 500, 100, SEED);
    let l = run_power_q_study(&large, &alphas, &[500]).unwrap();
    let large_rates: Vec<f64> = alphas.iter().map(|&a| rate(&l, "lambda_4,1,(2)", 500, a)).collect();
    (
        within(small_rate, 0.858, 0.08) && large_rates.iter().all(|&r| r >= 0.99),
        format!("smaller: {small_rate:.3} at .0005 (target .858 +/- .08); large: {large_rates:?} (target >= .99)"),
    )
}

fn type1_dina() -> Outcome {
    let d = SimDesign::new(EffectSize::Large, 2500, 300, SEED);
    let r = run_type1_dina_study(&d, &Study::Type1Dina.default_alphas()).unwrap();
    let v = rate(&r, "lambda_4,1,(1)", 2500, 0.05);
    (
        within(v, 0.048, 0.035),
        format!("lambda_4,1,(1) rate {v:.3} (target .048 +/- .035)"),
    )
}

fn power_dina() -> Outcome {
    let alphas = Study::PowerDina.default_alphas();
    let small = SimDesign::new(EffectSize::Smaller, 500, 200, SEED);
    let s = run_power_dina_study(&small, &alphas, &[500]).unwrap();
    let small_rate = rate(&s, "lambda_4,1,(1)", 500, 0.05);
    let large = SimDesign::new(EffectSize::Large, 1000, 100, SEED);
    let l = run_power_dina_study(&large, &alphas, &[1000]).unwrap();
    let large_rate = rate(&l, "lambda_4,1,(1)", 1000, 0.0017);
    (
        within(small_rate, 0.342, 0.12) && large_rate >= 0.90,
        format!("smaller: {small_rate:.3} at .05 (target .342 +/- .12); large: {large_rate:.3} at .0017 (target >= .90)"),
    )
}

fn gradient_oracle() -> Outcome {
    let mut worst_fd = 0.0f64;
    let mut worst_info = 0.0f64;
    for seed in 0..100 {
        let inst = random_instance(seed);
        let ids = parameter_ids(&inst.spec);
        let x = inst.params.vectorize();
        let score = GradientContext::new(&inst.spec, &inst.params, &inst.data)
            .unwrap()
            .score_vector(&ids)
            .unwrap();
        for k in 0..ids.len() {
            let fd = central_difference(&x, k, 1e-5, |v| {
                let p = ParameterSet::from_vector(&inst.spec, v).unwrap();
                brute_loglik(&inst.spec, &p, &inst.data)
            });
            let gap = (score.entries[k] - fd).abs() / score.entries[k].abs().max(1.0);
            worst_fd = worst_fd.max(gap);
        }
        let info = empirical_info(&score.per_examinee);
        for (j, row) in naive_info(&score.per_examinee).iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                worst_info = worst_info.max((info.matrix[(j, k)] - v).abs());
            }
        }
    }
    (
        worst_fd < 1e-5 && worst_info < 1e-10,
        format!("max relative FD gap {worst_fd:.2e}, max information gap {worst_info:.2e}"),
    )
}

fn likelihood_oracle() -> Outcome {
    let mut worst = 0.0f64;
    let mut decreases = 0;
    let mut fits = 0;
    for seed in 0..100 {
        let inst = random_instance(seed);
        let ll = log_likelihood(&inst.spec, &inst.params, &inst.data).unwrap();
        worst = worst.max((ll - brute_loglik(&inst.spec, &inst.params, &inst.data)).abs());
        let f = fit(&inst.spec, &inst.data, &FitConfig::default()).unwrap();
        fits += 1;
        decreases += f.loglik_trace.windows(2).filter(|w| w[1] < w[0] - 1e-8).count();
    }
    (
        worst < 1e-9 && decreases == 0,
        format!("max |loglik - enumeration| {worst:.2e}; {decreases} trace decreases over {fits} fits"),
    )
}

fn boundary_mass(full: &StudyResult) -> Outcome {
    let k = full.parameters.iter().position(|p| p == "lambda_1,1,(2)").unwrap();
    let z = full.zero_fraction(k, 2500);
    (
        within(z, 0.5, 0.07),
        format!("fraction of T_S = 0 for lambda_1,1,(2) over {} replications: {z:.3}", full.design.replications),
    )
}

fn combinatorics() -> Outcome {
    let q = QMatrix::from_entries(vec![vec![1, 0], vec![0, 1], vec![1, 1]]).unwrap();
    let spec = ModelSpec::saturated(q, Template::LcdmFull).unwrap();
    let two = enumerate_qmatrix_candidates(&spec, 2).iter().filter(|c| c.item() == 0).count();

    let q = QMatrix::from_entries(vec![
        vec![1, 1, 0, 0],
        vec![0, 0, 1, 0],
        vec![0, 0, 0, 1],
        vec![1, 0, 1, 1],
    ])
    .unwrap();
    let spec = ModelSpec::saturated(q, Template::LcdmFull).unwrap();
    let eight = enumerate_qmatrix_candidates(&spec, 3).iter().filter(|c| c.item() == 0).count();

    let q = SimDesign::new(EffectSize::Large, 1, 1, 0).q_matrix().unwrap();
    let spec = ModelSpec::saturated(q.clone(), Template::LcdmFull).unwrap();
    let all = enumerate_qmatrix_candidates(&spec, 2).len();
    let dina = ModelSpec::saturated(q, Template::Dina).unwrap();
    let mains = enumerate_model_candidates(&dina, 2).len();
    (
        (two, eight, all, mains) == (2, 8, 105, 30),
        format!("counts {two}, {eight}, {all}, {mains} (expected 2, 8, 105, 30)"),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::TempDir::new().unwrap();
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_dcmmi"))
            .args([
                "--threads", threads, "-q", "simulate", "--study", "power-dina", "--effect", "smaller",
                "--examinees", "300", "--reps", "8", "--seed", "2024", "--out",
            ])
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out).unwrap()
    };
    let a = run("a.csv", "1");
    let b = run("b.csv", "1");
    let c = run("c.csv", "4");
    (
        a == b && a == c,
        format!("{} bytes; repeat identical: {}; --threads 4 identical: {}", a.len(), a == b, a == c),
    )
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let (pass, detail) = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(r) => r,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} {n:>2} {name}: {detail} [{:.0}s]",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    };

    let mut type1_full = None;
    let mut type1 = || {
        let d = SimDesign::new(EffectSize::Large, 2500, 500, SEED);
        run_type1_q_study(&d, &Study::Type1Q.default_alphas()).unwrap()
    };

    report(1, "mixture thresholds", &mut thresholds);
    report(2, "type I error, Q-matrix indices", &mut || {
        let r = type1_full.get_or_insert_with(&mut type1);
        type1_q(r)
    });
    report(3, "power, Q-matrix indices", &mut power_q);
    report(4, "type I error, DINA indices", &mut type1_dina);
    report(5, "power, DINA indices", &mut power_dina);
    report(6, "gradient oracle", &mut gradient_oracle);
    report(7, "likelihood oracle", &mut likelihood_oracle);
    report(8, "boundary mass", &mut || {
        let r = type1_full.get_or_insert_with(&mut type1);
        boundary_mass(r)
    });
    report(9, "candidate combinatorics", &mut combinatorics);
    report(10, "determinism", &mut determinism);

    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
