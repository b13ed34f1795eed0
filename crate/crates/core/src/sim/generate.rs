use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{DcmError, Result};
use crate::estimation::ResponseMatrix;
use crate::model::{logit, AttrSet, AttributeProfile, ItemParameterSet, QMatrix, Template};

/// SplitMix64 finalizer, used to derive independent stream seeds.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed derived from a parent seed and a sequence of stream keys.
pub fn derive_seed(seed: u64, keys: &[u64]) -> u64 {
    keys.iter().fold(splitmix64(seed), |acc, &k| splitmix64(acc ^ k))
}

/// The generator every simulation stream uses.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draws `E` mastery profiles by thresholding equicorrelated standard
/// normals at zero, so each attribute has prevalence one half and the
/// tetrachoric correlation between any two attributes is `rho`.
pub fn gen_attribute_profiles(
    examinees: usize,
    attributes: usize,
    rho: f64,
    seed: u64,
) -> Result<Vec<AttributeProfile>> {
    let mut rng = rng_from_seed(seed);
    draw_profiles(&mut rng, examinees, attributes, rho)
}

pub(crate) fn draw_profiles<R: Rng>(
    rng: &mut R,
    examinees: usize,
    attributes: usize,
    rho: f64,
) -> Result<Vec<AttributeProfile>> {
    crate::model::profile_space(attributes)?;
    let lower = if attributes > 1 {
        -1.0 / (attributes as f64 - 1.0)
    } else {
        -1.0
    };
    if !(rho > lower && rho < 1.0) {
        return Err(DcmError::config(format!(
            "rho {rho} outside the valid equicorrelation range ({lower}, 1)"
        )));
    }
    let corr = DMatrix::from_fn(attributes, attributes, |i, j| if i == j { 1.0 } else { rho });
    let chol = corr
        .cholesky()
        .ok_or_else(|| DcmError::config(format!("rho {rho} gives a singular correlation matrix")))?;
    let l = chol.l();
    let mut out = Vec::with_capacity(examinees);
    for _ in 0..examinees {
        let z = DVector::from_fn(attributes, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = &l * z;
        let class = x
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .fold(0usize, |acc, (a, _)| acc | 1 << a);
        out.push(AttributeProfile::new(class, attributes));
    }
    Ok(out)
}

/// How the total log-odds effect of a two-attribute item is divided among
/// its main effects and interaction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum SplitRule {
    /// Every main effect and the interaction get `T / 3`.
    EqualThirds,
    /// Each main gets `main_share · T`, the interaction gets the remainder.
    MainShare { main_share: f64 },
}

impl SplitRule {
    fn main_fraction(self) -> f64 {
        match self {
            SplitRule::EqualThirds => 1.0 / 3.0,
            SplitRule::MainShare { main_share } => main_share,
        }
    }
}

/// Generating parameters for one item: intercept `logit(p_nonmaster)` and a
/// total effect `T = logit(p_master) − logit(p_nonmaster)` reached by
/// examinees mastering every measured attribute. Returns the full LCDM
/// version (effect split by `split`) and the DINA counterpart (the whole of
/// `T` on the highest-order interaction).
pub fn build_item_params(
    q_row: AttrSet,
    attributes: usize,
    p_nonmaster: f64,
    p_master: f64,
    split: SplitRule,
) -> Result<(ItemParameterSet, ItemParameterSet)> {
    if !(0.0 < p_nonmaster && p_nonmaster < p_master && p_master < 1.0) {
        return Err(DcmError::config(format!(
            "need 0 < p_nonmaster ({p_nonmaster}) < p_master ({p_master}) < 1"
        )));
    }
    let m = q_row.len();
    if m == 0 || m > 2 {
        return Err(DcmError::config(format!(
            "generating items measure one or two attributes, got {m}"
        )));
    }
    let intercept = logit(p_nonmaster);
    let total = logit(p_master) - intercept;

    let full_mask = Template::LcdmFull.mask_for(q_row);
    let mut full = ItemParameterSet::new(attributes, &full_mask);
    full.set_value(AttrSet::EMPTY, intercept)?;
    if m == 1 {
        full.set_value(q_row, total)?;
    } else {
        let main = split.main_fraction() * total;
        for a in q_row.iter() {
            full.set_value(AttrSet::singleton(a), main)?;
        }
        full.set_value(q_row, total - 2.0 * main)?;
    }

    let dina_mask = Template::Dina.mask_for(q_row);
    let mut dina = ItemParameterSet::new(attributes, &dina_mask);
    dina.set_value(AttrSet::EMPTY, intercept)?;
    dina.set_value(q_row, total)?;
    Ok((full, dina))
}

/// Independent Bernoulli responses with success probability `π_ic`.
pub fn gen_responses(
    profiles: &[AttributeProfile],
    items: &[ItemParameterSet],
    q: &QMatrix,
    seed: u64,
) -> Result<ResponseMatrix> {
    let mut rng = rng_from_seed(seed);
    draw_responses(&mut rng, profiles, items, q)
}

pub(crate) fn draw_responses<R: Rng>(
    rng: &mut R,
    profiles: &[AttributeProfile],
    items: &[ItemParameterSet],
    q: &QMatrix,
) -> Result<ResponseMatrix> {
    if items.len() != q.items() {
        return Err(DcmError::config(format!(
            "{} item parameter sets for a {}-item Q-matrix",
            items.len(),
            q.items()
        )));
    }
    let classes = q.classes();
    let probs: Vec<Vec<f64>> = items
        .iter()
        .map(|it| (0..classes).map(|c| it.prob(AttrSet::from_bits(c as u32))).collect())
        .collect();
    let mut values = Array2::<u8>::zeros((profiles.len(), items.len()));
    for (e, p) in profiles.iter().enumerate() {
        if p.attributes() != q.attributes() {
            return Err(DcmError::config("profile and Q-matrix attribute counts differ"));
        }
        let c = p.class_index();
        for (i, pi) in probs.iter().enumerate() {
            values[[e, i]] = u8::from(rng.random::<f64>() < pi[c]);
        }
    }
    ResponseMatrix::new(
        values,
        (1..=profiles.len()).map(|e| format!("e{e}")).collect(),
        q.item_ids().to_vec(),
    )
}
