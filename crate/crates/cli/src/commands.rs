use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use dcmmi::estimation::{classify, fit, FitConfig, ResponseMatrix};
use dcmmi::io::{
    read_mask_json, read_qmatrix_csv, read_responses_csv, write_classification_csv, FitDocument,
};
use dcmmi::mi::{apply_multiplicity, compute_mis, model_candidates, qmatrix_candidates, MIReport};
use dcmmi::model::{ModelSpec, Template};
use dcmmi::sim::{run_study, EffectSize, SimDesign, Study};
use dcmmi::DcmError;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::args::{
    CandidatesArg, ClassifyArgs, Cli, Command, EffectArg, FitArgs, MiArgs, ModelArg, SimulateArgs,
    StudyArg,
};

pub const USAGE: u8 = 2;
pub const FORMAT: u8 = 3;
pub const NUMERICAL: u8 = 4;

pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl From<DcmError> for Failure {
    fn from(e: DcmError) -> Self {
        let code = match e {
            DcmError::Config(_) => USAGE,
            DcmError::Format(_) | DcmError::Io(_) | DcmError::Csv(_) | DcmError::Json(_) => FORMAT,
            DcmError::Numerical { .. } | DcmError::Linalg(_) => NUMERICAL,
        };
        Failure {
            code,
            error: e.into(),
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        code: USAGE,
        error: anyhow!(msg.into()),
    }
}

fn file_error(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: FORMAT,
        error: anyhow::Error::new(e).context(format!("cannot access {}", path.display())),
    }
}

type Outcome = Result<(), Failure>;

struct Input {
    bytes: Vec<u8>,
    digest: String,
}

fn read_input(path: &Path) -> Result<Input, Failure> {
    let bytes = fs::read(path).map_err(|e| file_error(path, e))?;
    let digest = hex::encode(Sha256::digest(&bytes));
    Ok(Input { bytes, digest })
}

fn write_output(path: &Path, bytes: &[u8]) -> Outcome {
    fs::write(path, bytes).map_err(|e| file_error(path, e))
}

/// Provenance hash of a run: the command, its semantic flags and the
/// digests of its input files. Thread count, verbosity and output paths are
/// excluded so that equivalent runs share a hash.
fn config_hash(value: serde_json::Value) -> String {
    let canonical = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config": value,
    });
    hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
}

struct Log {
    verbose: u8,
    quiet: bool,
}

impl Log {
    fn info(&self, msg: impl AsRef<str>) {
        if self.verbose > 0 {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn warn(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("warning: {}", msg.as_ref());
        }
    }
}

pub fn run(cli: &Cli) -> Outcome {
    let log = Log {
        verbose: cli.verbose,
        quiet: cli.quiet,
    };
    match &cli.command {
        Command::Fit(a) => run_fit(a, &log),
        Command::Mi(a) => run_mi(a, &log),
        Command::Classify(a) => run_classify(a, &log),
        Command::Simulate(a) => run_simulate(a, &log),
    }
}

fn run_fit(a: &FitArgs, log: &Log) -> Outcome {
    match (a.model, &a.mask) {
        (ModelArg::Custom, None) => return Err(usage("--model custom requires --mask")),
        (m, Some(_)) if m != ModelArg::Custom => {
            return Err(usage("--mask is only valid with --model custom"))
        }
        _ => {}
    }
    if a.structural_order == Some(0) {
        return Err(usage("--structural-order must be at least 1"));
    }
    let q_in = read_input(&a.qmatrix)?;
    let r_in = read_input(&a.responses)?;
    let mask_in = a.mask.as_deref().map(read_input).transpose()?;
    let q = read_qmatrix_csv(q_in.bytes.as_slice())?;
    let data = read_responses_csv(r_in.bytes.as_slice(), &q)?;
    let order = a.structural_order.unwrap_or(q.attributes());
    let spec = match a.model {
        ModelArg::Lcdm => ModelSpec::new(q, Template::LcdmFull, order)?,
        ModelArg::Dina => ModelSpec::new(q, Template::Dina, order)?,
        ModelArg::Mains => ModelSpec::new(q, Template::MainEffectsOnly, order)?,
        ModelArg::Custom => {
            let bytes = &mask_in.as_ref().expect("checked above").bytes;
            let masks = read_mask_json(bytes.as_slice(), &q)?;
            ModelSpec::custom(q, masks, order)?
        }
    };
    let hash = config_hash(json!({
        "command": "fit",
        "model": format!("{:?}", a.model).to_lowercase(),
        "structural_order": order,
        "qmatrix_sha256": q_in.digest,
        "responses_sha256": r_in.digest,
        "mask_sha256": mask_in.as_ref().map(|m| m.digest.clone()),
    }));
    log.info(format!(
        "fitting {} examinees, {} items, {} attributes, {} free parameters",
        data.examinees(),
        spec.items(),
        spec.attributes(),
        spec.free_parameter_count()
    ));
    let result = fit(&spec, &data, &FitConfig::default())?;
    for w in &result.warnings {
        log.warn(w);
    }
    if !result.converged {
        log.warn(format!("EM did not converge in {} iterations", result.iterations));
    }
    log.info(format!(
        "loglik {:.6} after {} iterations",
        result.loglik, result.iterations
    ));
    let mut doc = FitDocument::from_fit(&result);
    doc.config_hash = Some(hash);
    let mut buf = Vec::new();
    doc.write(&mut buf)?;
    buf.push(b'\n');
    write_output(&a.out, &buf)
}

/// Loads a fit file and the matching responses, checking that the stored
/// log-likelihood is reproduced.
fn load_fit(fit_path: &Path, responses: &Path, log: &Log) -> Result<(dcmmi::estimation::FitResult, ResponseMatrix, String, String), Failure> {
    let f_in = read_input(fit_path)?;
    let r_in = read_input(responses)?;
    let doc = FitDocument::read(f_in.bytes.as_slice())?;
    let data = read_responses_csv(r_in.bytes.as_slice(), &doc.q_matrix)?;
    let fitted = doc.to_fit(&data)?;
    let tol = 1e-9 * doc.loglik.abs().max(1.0);
    if (fitted.loglik - doc.loglik).abs() > tol {
        log.warn(format!(
            "stored log-likelihood {} differs from the recomputed {}; the responses may not be the fitted data",
            doc.loglik, fitted.loglik
        ));
    }
    Ok((fitted, data, f_in.digest, r_in.digest))
}

#[derive(Serialize)]
struct MiDocument<'a> {
    config_hash: &'a str,
    loglik: f64,
    warnings: Vec<String>,
    #[serde(flatten)]
    report: &'a MIReport,
}

fn run_mi(a: &MiArgs, log: &Log) -> Outcome {
    if a.max_order == 0 {
        return Err(usage("--max-order must be at least 1"));
    }
    if !(a.alpha > 0.0 && a.alpha < 0.5) {
        return Err(usage("--alpha must lie in (0, 0.5)"));
    }
    if a.m_override == Some(0) {
        return Err(usage("--m-override must be at least 1"));
    }
    let (fitted, data, fit_digest, resp_digest) = load_fit(&a.fit, &a.responses, log)?;
    let hash = config_hash(json!({
        "command": "mi",
        "candidates": format!("{:?}", a.candidates).to_lowercase(),
        "max_order": a.max_order,
        "alpha": a.alpha,
        "m_override": a.m_override,
        "fit_sha256": fit_digest,
        "responses_sha256": resp_digest,
    }));
    let mut candidates = Vec::new();
    if matches!(a.candidates, CandidatesArg::Qmatrix | CandidatesArg::Both) {
        candidates.extend(qmatrix_candidates(&fitted, a.max_order));
    }
    if matches!(a.candidates, CandidatesArg::Model | CandidatesArg::Both) {
        candidates.extend(model_candidates(&fitted, a.max_order));
    }
    log.info(format!("computing {} modification indices", candidates.len()));
    let mis = compute_mis(&fitted, &candidates, &data)?;
    let mut warnings: Vec<String> = Vec::new();
    for m in &mis {
        if let Some(reason) = &m.unavailable {
            warnings.push(format!("{}: unavailable ({reason})", m.label));
        }
        for w in &m.warnings {
            let w = format!("{}: {w}", m.label);
            if !warnings.contains(&w) {
                warnings.push(w);
            }
        }
    }
    for w in &warnings {
        log.warn(w);
    }
    let report = apply_multiplicity(&fitted.spec, mis, a.alpha, a.m_override)?;
    let doc = MiDocument {
        config_hash: &hash,
        loglik: fitted.loglik,
        warnings,
        report: &report,
    };
    let mut json_bytes = serde_json::to_vec_pretty(&doc).map_err(DcmError::from)?;
    json_bytes.push(b'\n');
    write_output(&a.out, &json_bytes)?;
    let table = format!("# config_hash={hash}\n{}", report.to_table());
    write_output(&a.table, table.as_bytes())
}

fn run_classify(a: &ClassifyArgs, log: &Log) -> Outcome {
    let (fitted, data, fit_digest, resp_digest) = load_fit(&a.fit, &a.responses, log)?;
    let hash = config_hash(json!({
        "command": "classify",
        "fit_sha256": fit_digest,
        "responses_sha256": resp_digest,
    }));
    let profiles = classify(&fitted);
    let mut buf = Vec::new();
    writeln!(buf, "# config_hash={hash}").map_err(DcmError::from)?;
    write_classification_csv(&fitted, &data, &profiles, &mut buf)?;
    write_output(&a.out, &buf)
}

fn manifest_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "study".into());
    out.with_file_name(format!("{stem}.manifest.json"))
}

fn run_simulate(a: &SimulateArgs, log: &Log) -> Outcome {
    if a.examinees == 0 || a.reps == 0 {
        return Err(usage("--examinees and --reps must be positive"));
    }
    let study = match a.study {
        StudyArg::Type1Q => Study::Type1Q,
        StudyArg::PowerQ => Study::PowerQ,
        StudyArg::Type1Dina => Study::Type1Dina,
        StudyArg::PowerDina => Study::PowerDina,
    };
    let effect = match a.effect {
        EffectArg::Large => EffectSize::Large,
        EffectArg::Smaller => EffectSize::Smaller,
    };
    let design = SimDesign::new(effect, a.examinees, a.reps, a.seed);
    let alphas = study.default_alphas();
    let hash = config_hash(json!({
        "command": "simulate",
        "design": design,
        "study": study,
        "alphas": alphas,
    }));
    log.info(format!(
        "{study}: {} replications of {} examinees ({effect} effect)",
        a.reps, a.examinees
    ));
    let result = run_study(study, &design, &alphas, &[a.examinees])?;
    if result.flagged {
        log.warn("more than 2% of replications did not converge");
    }
    let mut csv_bytes = Vec::new();
    result.write_csv(&mut csv_bytes, Some(&format!("config_hash={hash}")))?;
    write_output(&a.out, &csv_bytes)?;

    let excluded = result.replications.iter().filter(|r| !r.converged).count();
    let manifest = json!({
        "config_hash": hash,
        "software": {
            "name": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
        },
        "study": study,
        "design": design,
        "alphas": alphas,
        "parameters": result.parameters,
        "rng": "ChaCha8, replication seed = splitmix64 chain of (seed, examinees, replication)",
        "replication_seeds": result.replications.iter().map(|r| r.seed).collect::<Vec<_>>(),
        "excluded": excluded,
        "flagged": result.flagged,
        "output": a.out.file_name().map(|s| s.to_string_lossy().into_owned()),
    });
    let mut m_bytes = serde_json::to_vec_pretty(&manifest).expect("manifest is plain JSON");
    m_bytes.push(b'\n');
    write_output(&manifest_path(&a.out), &m_bytes)
}
