//! File formats: Q-matrix and response CSVs, custom mask JSON, fitted-model
//! JSON and classification CSV.

use std::io::{Read, Write};

use indexmap::IndexMap;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{DcmError, Result};
use crate::estimation::{e_step, FitResult, ParameterSet, ResponseMatrix, StructuralParameterSet};
use crate::model::{AttrSet, AttributeProfile, ItemParameterSet, ModelSpec, QMatrix, Template};

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input)
}

fn binary_cell(cell: &str, what: impl Fn() -> String) -> Result<u8> {
    match cell {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(DcmError::format(format!("{}: value '{other}' is not 0/1", what()))),
    }
}

/// Q-matrix CSV: header row of attribute ids (first cell is a label for the
/// item column), then one row per item starting with its id.
pub fn read_qmatrix_csv<R: Read>(input: R) -> Result<QMatrix> {
    let mut rows = reader(input).into_records();
    let header = rows
        .next()
        .ok_or_else(|| DcmError::format("Q-matrix file is empty"))??;
    if header.len() < 2 {
        return Err(DcmError::format("Q-matrix header needs an item column and at least one attribute"));
    }
    let attribute_ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut item_ids = Vec::new();
    let mut entries = Vec::new();
    for (line, rec) in rows.enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(DcmError::format(format!(
                "Q-matrix line {} has {} cells, expected {}",
                line + 2,
                rec.len(),
                header.len()
            )));
        }
        let id = rec[0].to_string();
        let row = rec
            .iter()
            .skip(1)
            .enumerate()
            .map(|(a, cell)| {
                binary_cell(cell, || format!("Q-matrix item '{id}', attribute '{}'", attribute_ids[a]))
            })
            .collect::<Result<Vec<u8>>>()?;
        item_ids.push(id);
        entries.push(row);
    }
    QMatrix::new(entries, item_ids, attribute_ids)
}

pub fn write_qmatrix_csv<W: Write>(q: &QMatrix, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["item".to_string()];
    header.extend(q.attribute_ids().iter().cloned());
    w.write_record(&header)?;
    for i in 0..q.items() {
        let mut rec = vec![q.item_ids()[i].clone()];
        rec.extend(q.row_bits(i).iter().map(|b| b.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Response CSV: header row of item ids, one row per examinee with 0/1
/// cells. A leading column whose header is not an item id of `q` holds
/// examinee ids. Columns are reordered to the Q-matrix item order.
pub fn read_responses_csv<R: Read>(input: R, q: &QMatrix) -> Result<ResponseMatrix> {
    let mut rows = reader(input).into_records();
    let header = rows
        .next()
        .ok_or_else(|| DcmError::format("response file is empty"))??;
    let has_ids = header.get(0).is_some_and(|h| q.item_index(h).is_none());
    let skip = usize::from(has_ids);
    let item_ids: Vec<String> = header.iter().skip(skip).map(str::to_string).collect();
    for id in &item_ids {
        if q.item_index(id).is_none() {
            return Err(DcmError::format(format!(
                "response column '{id}' is not an item of the Q-matrix"
            )));
        }
    }
    let mut values = Vec::new();
    let mut examinee_ids = Vec::new();
    for (line, rec) in rows.enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(DcmError::format(format!(
                "response line {} has {} cells, expected {}",
                line + 2,
                rec.len(),
                header.len()
            )));
        }
        let id = if has_ids {
            rec[0].to_string()
        } else {
            format!("e{}", line + 1)
        };
        for (k, cell) in rec.iter().skip(skip).enumerate() {
            if cell.is_empty() {
                return Err(DcmError::format(format!(
                    "missing response for examinee '{id}' on item '{}'",
                    item_ids[k]
                )));
            }
            values.push(binary_cell(cell, || {
                format!("examinee '{id}', item '{}'", item_ids[k])
            })?);
        }
        examinee_ids.push(id);
    }
    let e = examinee_ids.len();
    if e == 0 {
        return Err(DcmError::format("response file has no examinees"));
    }
    let values = Array2::from_shape_vec((e, item_ids.len()), values)
        .map_err(|err| DcmError::format(err.to_string()))?;
    ResponseMatrix::new(values, examinee_ids, item_ids)?.aligned_to(q)
}

pub fn write_responses_csv<W: Write>(data: &ResponseMatrix, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["examinee".to_string()];
    header.extend(data.item_ids().iter().cloned());
    w.write_record(&header)?;
    for e in 0..data.examinees() {
        let mut rec = vec![data.examinee_ids()[e].clone()];
        rec.extend(data.row(e).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Custom masks: a JSON object from item id to a list of effect labels
/// (`"1"`, `"1x2"`, ...). The intercept is always included; items not
/// listed keep an intercept-only mask.
pub fn read_mask_json<R: Read>(input: R, q: &QMatrix) -> Result<Vec<Vec<AttrSet>>> {
    let map: IndexMap<String, Vec<String>> = serde_json::from_reader(input)
        .map_err(|e| DcmError::format(format!("mask file: {e}")))?;
    let mut masks = vec![vec![AttrSet::EMPTY]; q.items()];
    for (id, labels) in map {
        let i = q
            .item_index(&id)
            .ok_or_else(|| DcmError::format(format!("mask names unknown item '{id}'")))?;
        for l in labels {
            let effect = AttrSet::parse_label(&l, q.attributes())?;
            if !effect.is_subset_of(q.row(i)) {
                return Err(DcmError::format(format!(
                    "mask for item '{id}' names effect {l} outside its Q-matrix row"
                )));
            }
            if !masks[i].contains(&effect) {
                masks[i].push(effect);
            }
        }
    }
    Ok(masks)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub converged: bool,
    pub iterations: usize,
    pub loglik_trace: Vec<f64>,
}

/// Serialized fitted model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    pub q_matrix: QMatrix,
    pub template: Template,
    pub structural_order: usize,
    /// Active effects per item id, intercept included.
    pub masks: IndexMap<String, Vec<AttrSet>>,
    /// Item parameters keyed by item id, then effect label.
    pub items: IndexMap<String, IndexMap<String, f64>>,
    /// Structural `γ` keyed by effect label.
    pub structural: IndexMap<String, f64>,
    /// Class proportions in class-index order.
    pub class_proportions: Vec<f64>,
    pub loglik: f64,
    pub free_parameters: usize,
    pub examinees: usize,
    pub aic: f64,
    pub bic: f64,
    pub convergence: Convergence,
    pub warnings: Vec<String>,
}

impl FitDocument {
    pub fn from_fit(fit: &FitResult) -> Self {
        let q = fit.spec.q();
        let masks = (0..q.items())
            .map(|i| (q.item_ids()[i].clone(), fit.spec.mask(i).to_vec()))
            .collect();
        let items = fit
            .params
            .items
            .iter()
            .enumerate()
            .map(|(i, it)| {
                let effects = it.active().iter().map(|s| (s.label(), it.value(*s))).collect();
                (q.item_ids()[i].clone(), effects)
            })
            .collect();
        let st = &fit.params.structural;
        let structural = st
            .terms()
            .iter()
            .zip(st.gammas())
            .map(|(t, g)| (t.label(), *g))
            .collect();
        FitDocument {
            config_hash: None,
            q_matrix: q.clone(),
            template: fit.spec.template(),
            structural_order: fit.spec.structural_order(),
            masks,
            items,
            structural,
            class_proportions: st.nu().to_vec(),
            loglik: fit.loglik,
            free_parameters: fit.free_parameters(),
            examinees: fit.examinees(),
            aic: fit.aic(),
            bic: fit.bic(),
            convergence: Convergence {
                converged: fit.converged,
                iterations: fit.iterations,
                loglik_trace: fit.loglik_trace.clone(),
            },
            warnings: fit.warnings.clone(),
        }
    }

    pub fn spec(&self) -> Result<ModelSpec> {
        let q = &self.q_matrix;
        let mut masks = Vec::with_capacity(q.items());
        for id in q.item_ids() {
            let m = self
                .masks
                .get(id)
                .ok_or_else(|| DcmError::format(format!("fit file has no mask for item '{id}'")))?;
            masks.push(m.clone());
        }
        let spec = ModelSpec::custom(q.clone(), masks, self.structural_order)
            .map_err(|e| DcmError::format(e.to_string()))?;
        if self.template != Template::Custom {
            let t = ModelSpec::new(q.clone(), self.template, self.structural_order)?;
            if t.masks() == spec.masks() {
                return Ok(t);
            }
        }
        Ok(spec)
    }

    pub fn params(&self, spec: &ModelSpec) -> Result<ParameterSet> {
        let q = spec.q();
        let a = spec.attributes();
        let mut items = Vec::with_capacity(q.items());
        for (i, id) in q.item_ids().iter().enumerate() {
            let effects = self
                .items
                .get(id)
                .ok_or_else(|| DcmError::format(format!("fit file has no parameters for item '{id}'")))?;
            let mut it = ItemParameterSet::new(a, spec.mask(i));
            for (label, v) in effects {
                let s = AttrSet::parse_label(label, a)?;
                if !spec.mask(i).contains(&s) {
                    return Err(DcmError::format(format!(
                        "parameter '{label}' of item '{id}' is outside its mask"
                    )));
                }
                it.set_value(s, *v)?;
            }
            items.push(it);
        }
        let terms = spec.structural_terms();
        let gammas = terms
            .iter()
            .map(|t| {
                self.structural.get(&t.label()).copied().ok_or_else(|| {
                    DcmError::format(format!("fit file has no structural term '{}'", t.label()))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(ParameterSet {
            items,
            structural: StructuralParameterSet::from_gammas(a, terms, gammas),
        })
    }

    /// Rebuilds the fit against its data, recomputing posteriors and the
    /// log-likelihood from the stored parameters.
    pub fn to_fit(&self, data: &ResponseMatrix) -> Result<FitResult> {
        let spec = self.spec()?;
        let params = self.params(&spec)?;
        let data = data.aligned_to(spec.q())?;
        let post = e_step(&spec, &params, &data)?;
        Ok(FitResult {
            spec,
            params,
            loglik: post.loglik,
            loglik_trace: self.convergence.loglik_trace.clone(),
            posteriors: post.probs,
            converged: self.convergence.converged,
            iterations: self.convergence.iterations,
            warnings: self.warnings.clone(),
        })
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    pub fn read<R: Read>(input: R) -> Result<Self> {
        serde_json::from_reader(input).map_err(|e| DcmError::format(format!("fit file: {e}")))
    }
}

/// Classification CSV: examinee id, class index, one 0/1 column per
/// attribute, then the posterior of every class (`p_<bits>`, attribute 1
/// first).
pub fn write_classification_csv<W: Write>(
    fit: &FitResult,
    data: &ResponseMatrix,
    profiles: &[AttributeProfile],
    out: W,
) -> Result<()> {
    let q = fit.spec.q();
    let a = q.attributes();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["examinee".to_string(), "class".to_string()];
    header.extend(q.attribute_ids().iter().cloned());
    for c in 0..q.classes() {
        let bits: String = AttributeProfile::new(c, a)
            .bits()
            .iter()
            .map(|b| char::from(b'0' + b))
            .collect();
        header.push(format!("p_{bits}"));
    }
    w.write_record(&header)?;
    for (e, p) in profiles.iter().enumerate() {
        let mut rec = vec![data.examinee_ids()[e].clone(), p.class_index().to_string()];
        rec.extend(p.bits().iter().map(|b| b.to_string()));
        rec.extend(fit.posteriors.row(e).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
