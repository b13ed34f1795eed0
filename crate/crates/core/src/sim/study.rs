use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generate::{build_item_params, derive_seed, draw_profiles, draw_responses, rng_from_seed, SplitRule};
use crate::error::{DcmError, Result};
use crate::estimation::{fit, FitConfig, ParameterSet, StructuralParameterSet};
use crate::mi::{compute_mis, constraint_for, Candidate, CandidateKind};
use crate::model::{AttrSet, EffectIndex, ItemParameterSet, ModelSpec, QMatrix, Template};
use crate::score::mixture_critical_value;

/// Q-matrix row patterns of the generating test, cycled over the items.
const Q_PATTERN: [[u8; 3]; 6] = [
    [1, 0, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 1, 0],
    [1, 0, 1],
    [0, 1, 1],
];

/// Item 4 (index 3) measures attributes 1 and 2; item 1 measures attribute 1.
const ITEM1: usize = 0;
const ITEM4: usize = 3;

/// Share of non-converged replications above which a study is flagged.
pub const EXCLUSION_FLAG: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectSize {
    Large,
    Smaller,
}

impl EffectSize {
    pub fn p_master(self) -> f64 {
        match self {
            EffectSize::Large => 0.92,
            EffectSize::Smaller => 0.62,
        }
    }
}

impl fmt::Display for EffectSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EffectSize::Large => "large",
            EffectSize::Smaller => "smaller",
        })
    }
}

impl FromStr for EffectSize {
    type Err = DcmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "large" => Ok(EffectSize::Large),
            "smaller" => Ok(EffectSize::Smaller),
            _ => Err(DcmError::config(format!("unknown effect size '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Study {
    Type1Q,
    PowerQ,
    Type1Dina,
    PowerDina,
}

impl Study {
    pub fn default_alphas(self) -> Vec<f64> {
        match self {
            Study::Type1Q | Study::Type1Dina => vec![0.1, 0.05, 0.025, 0.01, 0.005],
            Study::PowerQ => vec![0.05, 0.025, 0.0005],
            Study::PowerDina => vec![0.05, 0.025, 0.0017],
        }
    }
}

impl fmt::Display for Study {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Study::Type1Q => "type1-q",
            Study::PowerQ => "power-q",
            Study::Type1Dina => "type1-dina",
            Study::PowerDina => "power-dina",
        })
    }
}

impl FromStr for Study {
    type Err = DcmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "type1-q" => Ok(Study::Type1Q),
            "power-q" => Ok(Study::PowerQ),
            "type1-dina" => Ok(Study::Type1Dina),
            "power-dina" => Ok(Study::PowerDina),
            _ => Err(DcmError::config(format!("unknown study '{s}'"))),
        }
    }
}

/// Generating design: 30 items over 3 attributes with the six one- and
/// two-attribute Q patterns repeated five times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimDesign {
    pub items: usize,
    pub attributes: usize,
    pub tetrachoric_rho: f64,
    pub p_nonmaster: f64,
    pub p_master: f64,
    pub effect_size: EffectSize,
    pub split: SplitRule,
    pub examinees: usize,
    pub replications: usize,
    pub seed: u64,
}

impl SimDesign {
    pub fn new(effect_size: EffectSize, examinees: usize, replications: usize, seed: u64) -> Self {
        SimDesign {
            items: 30,
            attributes: 3,
            tetrachoric_rho: 0.455,
            p_nonmaster: 0.18,
            p_master: effect_size.p_master(),
            effect_size,
            split: SplitRule::EqualThirds,
            examinees,
            replications,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.attributes != 3 || self.items == 0 || !self.items.is_multiple_of(Q_PATTERN.len()) {
            return Err(DcmError::config(
                "the generating design needs 3 attributes and a multiple of 6 items",
            ));
        }
        if self.examinees == 0 || self.replications == 0 {
            return Err(DcmError::config("examinees and replications must be positive"));
        }
        if !(0.0 < self.p_nonmaster && self.p_nonmaster < self.p_master && self.p_master < 1.0) {
            return Err(DcmError::config("need 0 < p_nonmaster < p_master < 1"));
        }
        Ok(())
    }

    pub fn q_matrix(&self) -> Result<QMatrix> {
        let rows = (0..self.items)
            .map(|i| Q_PATTERN[i % Q_PATTERN.len()].to_vec())
            .collect();
        QMatrix::from_entries(rows)
    }

    /// Full-LCDM and DINA generating parameters for every item.
    pub fn item_params(&self) -> Result<(Vec<ItemParameterSet>, Vec<ItemParameterSet>)> {
        let q = self.q_matrix()?;
        let mut full = Vec::with_capacity(self.items);
        let mut dina = Vec::with_capacity(self.items);
        for i in 0..self.items {
            let (f, d) = build_item_params(q.row(i), self.attributes, self.p_nonmaster, self.p_master, self.split)?;
            full.push(f);
            dina.push(d);
        }
        Ok((full, dina))
    }
}

/// What one study generates, fits and tests.
struct StudySetup {
    gen_q: QMatrix,
    gen_items: Vec<ItemParameterSet>,
    fit_spec: ModelSpec,
    targets: Vec<EffectIndex>,
    kind: CandidateKind,
}

fn setup(study: Study, design: &SimDesign) -> Result<StudySetup> {
    design.validate()?;
    let q = design.q_matrix()?;
    let (full, dina) = design.item_params()?;
    let pair = AttrSet::from_attributes([0, 1]);
    Ok(match study {
        Study::Type1Q => StudySetup {
            fit_spec: ModelSpec::saturated(q.clone(), Template::LcdmFull)?,
            gen_q: q,
            gen_items: full,
            targets: vec![
                EffectIndex::new(ITEM1, AttrSet::singleton(1)),
                EffectIndex::new(ITEM1, pair),
            ],
            kind: CandidateKind::Qmatrix,
        },
        Study::PowerQ => {
            let mut rows: Vec<Vec<u8>> = (0..q.items()).map(|i| q.row_bits(i)).collect();
            rows[ITEM4] = vec![1, 0, 0];
            let fit_q = QMatrix::new(rows, q.item_ids().to_vec(), q.attribute_ids().to_vec())?;
            StudySetup {
                fit_spec: ModelSpec::saturated(fit_q, Template::LcdmFull)?,
                gen_q: q,
                gen_items: full,
                targets: vec![
                    EffectIndex::new(ITEM4, AttrSet::singleton(1)),
                    EffectIndex::new(ITEM4, pair),
                ],
                kind: CandidateKind::Qmatrix,
            }
        }
        Study::Type1Dina => StudySetup {
            fit_spec: ModelSpec::saturated(q.clone(), Template::Dina)?,
            gen_q: q,
            gen_items: dina,
            targets: vec![
                EffectIndex::new(ITEM4, AttrSet::singleton(0)),
                EffectIndex::new(ITEM4, AttrSet::singleton(1)),
            ],
            kind: CandidateKind::Model,
        },
        Study::PowerDina => {
            let lcdm = ModelSpec::saturated(q.clone(), Template::LcdmFull)?;
            let spec = lcdm.with_item_mask(ITEM4, Template::Dina.mask_for(pair))?;
            StudySetup {
                fit_spec: spec,
                gen_q: q,
                gen_items: full,
                targets: vec![
                    EffectIndex::new(ITEM4, AttrSet::singleton(0)),
                    EffectIndex::new(ITEM4, AttrSet::singleton(1)),
                ],
                kind: CandidateKind::Model,
            }
        }
    })
}

/// Outcome of one replication: one-sided statistics for each target
/// candidate, or `None` when the fit did not converge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub index: usize,
    pub seed: u64,
    pub examinees: usize,
    pub converged: bool,
    pub t_s: Vec<f64>,
}

/// One row of a study table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub study: String,
    pub effect_size: String,
    pub parameter: String,
    pub examinees: usize,
    pub alpha: f64,
    pub rejections: usize,
    pub replications: usize,
    pub rate: f64,
    pub mc_se: f64,
    pub excluded: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub study: Study,
    pub design: SimDesign,
    pub alphas: Vec<f64>,
    /// Labels of the tested parameters, in the order of `Replication::t_s`.
    pub parameters: Vec<String>,
    pub rows: Vec<StudyRow>,
    pub replications: Vec<Replication>,
    pub flagged: bool,
}

impl StudyResult {
    pub fn row(&self, parameter: &str, examinees: usize, alpha: f64) -> Option<&StudyRow> {
        self.rows
            .iter()
            .find(|r| r.parameter == parameter && r.examinees == examinees && r.alpha == alpha)
    }

    /// Fraction of converged replications at `examinees` whose statistic for
    /// parameter `k` is exactly zero.
    pub fn zero_fraction(&self, k: usize, examinees: usize) -> f64 {
        let kept: Vec<&Replication> = self
            .replications
            .iter()
            .filter(|r| r.converged && r.examinees == examinees)
            .collect();
        kept.iter().filter(|r| r.t_s[k] == 0.0).count() as f64 / kept.len().max(1) as f64
    }

    /// Result restricted to the first `n` replications of each sample size.
    pub fn truncated(&self, n: usize) -> StudyResult {
        let replications: Vec<Replication> = self
            .replications
            .iter()
            .filter(|r| r.index < n)
            .cloned()
            .collect();
        let sizes = sample_sizes_of(&replications);
        let rows = tabulate(self.study, &self.design, &self.parameters, &self.alphas, &sizes, &replications);
        let mut design = self.design.clone();
        design.replications = n.min(self.design.replications);
        StudyResult {
            flagged: is_flagged(&rows),
            study: self.study,
            design,
            alphas: self.alphas.clone(),
            parameters: self.parameters.clone(),
            rows,
            replications,
        }
    }

    /// Writes the study table as CSV, optionally preceded by a `#` comment
    /// line.
    pub fn write_csv<W: Write>(&self, out: W, comment: Option<&str>) -> Result<()> {
        let mut out = out;
        if let Some(c) = comment {
            writeln!(out, "# {c}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn sample_sizes_of(reps: &[Replication]) -> Vec<usize> {
    let mut sizes: Vec<usize> = Vec::new();
    for r in reps {
        if !sizes.contains(&r.examinees) {
            sizes.push(r.examinees);
        }
    }
    sizes
}

fn is_flagged(rows: &[StudyRow]) -> bool {
    rows.iter().any(|r| {
        let total = r.replications + r.excluded;
        total > 0 && r.excluded as f64 > EXCLUSION_FLAG * total as f64
    })
}

fn tabulate(
    study: Study,
    design: &SimDesign,
    parameters: &[String],
    alphas: &[f64],
    sizes: &[usize],
    reps: &[Replication],
) -> Vec<StudyRow> {
    let mut rows = Vec::new();
    let crits: Vec<f64> = alphas.iter().map(|&a| mixture_critical_value(a)).collect();
    for &e in sizes {
        let at_e: Vec<&Replication> = reps.iter().filter(|r| r.examinees == e).collect();
        let kept: Vec<&Replication> = at_e.iter().copied().filter(|r| r.converged).collect();
        let excluded = at_e.len() - kept.len();
        let n = kept.len();
        let mut push = |parameter: String, alpha: f64, rejections: usize| {
            let rate = if n > 0 { rejections as f64 / n as f64 } else { 0.0 };
            rows.push(StudyRow {
                study: study.to_string(),
                effect_size: design.effect_size.to_string(),
                parameter,
                examinees: e,
                alpha,
                rejections,
                replications: n,
                rate,
                mc_se: if n > 0 { (rate * (1.0 - rate) / n as f64).sqrt() } else { 0.0 },
                excluded,
            });
        };
        for (k, label) in parameters.iter().enumerate() {
            for (&alpha, &c) in alphas.iter().zip(&crits) {
                let rej = kept.iter().filter(|r| r.t_s[k] > c).count();
                push(label.clone(), alpha, rej);
            }
        }
        if parameters.len() > 1 {
            for (&alpha, &c) in alphas.iter().zip(&crits) {
                let rej = kept.iter().filter(|r| r.t_s.iter().any(|&t| t > c)).count();
                push("familywise".into(), alpha, rej);
            }
        }
    }
    rows
}

/// Seed of replication `r` at sample size `examinees`.
pub fn replication_seed(seed: u64, examinees: usize, r: usize) -> u64 {
    derive_seed(seed, &[examinees as u64, r as u64])
}

fn run_replication(
    setup: &StudySetup,
    design: &SimDesign,
    examinees: usize,
    r: usize,
    fit_config: &FitConfig,
) -> Result<Replication> {
    let seed = replication_seed(design.seed, examinees, r);
    let mut rng = rng_from_seed(seed);
    let profiles = draw_profiles(&mut rng, examinees, design.attributes, design.tetrachoric_rho)?;
    let data = draw_responses(&mut rng, &profiles, &setup.gen_items, &setup.gen_q)?;
    let fitted = fit(&setup.fit_spec, &data, fit_config)?;
    if !fitted.converged {
        return Ok(Replication {
            index: r,
            seed,
            examinees,
            converged: false,
            t_s: Vec::new(),
        });
    }
    let candidates: Vec<Candidate> = setup
        .targets
        .iter()
        .map(|&effect| {
            let (constraint, k_source) = constraint_for(effect, |e| {
                let it = &fitted.params.items[e.item];
                it.is_active(e.set).then(|| it.value(e.set))
            });
            Candidate {
                kind: setup.kind,
                effect,
                constraint,
                k_source,
            }
        })
        .collect();
    let mis = compute_mis(&fitted, &candidates, &data)?;
    Ok(Replication {
        index: r,
        seed,
        examinees,
        converged: true,
        t_s: mis.iter().map(|m| m.t_s).collect(),
    })
}

/// Runs `design.replications` replications at each sample size, in parallel
/// on the current rayon pool. Results are independent of the thread count.
pub fn run_study(
    study: Study,
    design: &SimDesign,
    alphas: &[f64],
    sample_sizes: &[usize],
) -> Result<StudyResult> {
    let setup = setup(study, design)?;
    if alphas.iter().any(|&a| !(a > 0.0 && a < 0.5)) {
        return Err(DcmError::config("alphas must lie in (0, 0.5)"));
    }
    let parameters: Vec<String> = setup
        .targets
        .iter()
        .map(|&e| crate::mi::effect_label(&numbered(&setup.gen_q), e))
        .collect();
    let fit_config = FitConfig::default();
    let work: Vec<(usize, usize)> = sample_sizes
        .iter()
        .flat_map(|&e| (0..design.replications).map(move |r| (e, r)))
        .collect();
    let replications: Vec<Replication> = work
        .par_iter()
        .map(|&(e, r)| run_replication(&setup, design, e, r, &fit_config))
        .collect::<Result<_>>()?;
    let rows = tabulate(study, design, &parameters, alphas, sample_sizes, &replications);
    Ok(StudyResult {
        flagged: is_flagged(&rows),
        study,
        design: design.clone(),
        alphas: alphas.to_vec(),
        parameters,
        rows,
        replications,
    })
}

/// Q-matrix with item ids "1", "2", ... for labels like `lambda_4,1,(2)`.
fn numbered(q: &QMatrix) -> QMatrix {
    QMatrix::new(
        (0..q.items()).map(|i| q.row_bits(i)).collect(),
        (1..=q.items()).map(|i| i.to_string()).collect(),
        q.attribute_ids().to_vec(),
    )
    .expect("valid Q-matrix")
}

/// Type I error of the Q-matrix indices for adding attribute 2 to item 1
/// under a correctly specified full LCDM.
pub fn run_type1_q_study(design: &SimDesign, alphas: &[f64]) -> Result<StudyResult> {
    run_study(Study::Type1Q, design, alphas, &[design.examinees])
}

/// Power of the Q-matrix indices for item 4, generated as measuring
/// attributes 1 and 2 but estimated as measuring attribute 1 only.
pub fn run_power_q_study(design: &SimDesign, alphas: &[f64], sample_sizes: &[usize]) -> Result<StudyResult> {
    run_study(Study::PowerQ, design, alphas, sample_sizes)
}

/// Type I error of the DINA model indices for item 4's main effects with
/// DINA generating and estimated.
pub fn run_type1_dina_study(design: &SimDesign, alphas: &[f64]) -> Result<StudyResult> {
    run_study(Study::Type1Dina, design, alphas, &[design.examinees])
}

/// Power of the DINA model indices for item 4's omitted main effects when
/// the data follow the full LCDM.
pub fn run_power_dina_study(design: &SimDesign, alphas: &[f64], sample_sizes: &[usize]) -> Result<StudyResult> {
    run_study(Study::PowerDina, design, alphas, sample_sizes)
}

/// Generating parameters of a study as a [`ParameterSet`] under the
/// generating Q-matrix, with the class proportions implied by the
/// thresholded equicorrelated normal left unspecified (uniform).
pub fn generating_parameters(study: Study, design: &SimDesign) -> Result<(ModelSpec, ParameterSet)> {
    let s = setup(study, design)?;
    let template = match study {
        Study::Type1Dina => Template::Dina,
        _ => Template::LcdmFull,
    };
    let spec = ModelSpec::saturated(s.gen_q, template)?;
    let params = ParameterSet {
        items: s.gen_items,
        structural: StructuralParameterSet::uniform(spec.attributes(), spec.structural_order()),
    };
    Ok((spec, params))
}
