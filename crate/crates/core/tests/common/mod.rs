//! Independent reference implementations used by the integration and
//! acceptance tests. Nothing here calls the library's likelihood,
//! probability or gradient code.
#![allow(dead_code)]

use dcmmi::estimation::{ParameterSet, ResponseMatrix, StructuralParameterSet};
use dcmmi::model::{AttrSet, ItemParameterSet, ModelSpec, QMatrix, Template};
use dcmmi::sim::rng_from_seed;
use ndarray::Array2;
use rand::Rng;

pub struct Instance {
    pub spec: ModelSpec,
    pub params: ParameterSet,
    pub data: ResponseMatrix,
}

/// Random small model and data set: A ≤ 3, I ≤ 10, E ≤ 50, random Q, mask
/// template, structural order and parameters.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = rng_from_seed(seed);
    let a = rng.random_range(1..=3usize);
    let items = rng.random_range(a.max(2)..=10usize);
    let examinees = rng.random_range(5..=50usize);
    let q = loop {
        let rows: Vec<Vec<u8>> = (0..items)
            .map(|_| loop {
                let r: Vec<u8> = (0..a).map(|_| u8::from(rng.random::<bool>())).collect();
                if r.contains(&1) {
                    break r;
                }
            })
            .collect();
        if let Ok(q) = QMatrix::from_entries(rows) {
            break q;
        }
    };
    let template = match rng.random_range(0..3) {
        0 => Template::LcdmFull,
        1 => Template::Dina,
        _ => Template::MainEffectsOnly,
    };
    let order = rng.random_range(1..=a);
    let spec = ModelSpec::new(q, template, order).unwrap();
    let items_p = (0..spec.items())
        .map(|i| {
            let mask = spec.mask(i);
            let values: Vec<f64> = mask.iter().map(|_| rng.random_range(-2.0..2.0)).collect();
            let mut it = ItemParameterSet::new(a, mask);
            for (s, v) in mask.iter().zip(values) {
                it.set_value(*s, v).unwrap();
            }
            it
        })
        .collect();
    let terms = spec.structural_terms();
    let gammas = terms.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
    let params = ParameterSet {
        items: items_p,
        structural: StructuralParameterSet::from_gammas(a, terms, gammas),
    };
    let values = Array2::from_shape_fn((examinees, spec.items()), |_| u8::from(rng.random::<bool>()));
    let data = ResponseMatrix::from_array(values).unwrap();
    Instance { spec, params, data }
}

/// `ν_c ∝ exp(Σ_S γ_S Π_{a∈S} α_ca)`, computed directly.
pub fn brute_nu(params: &ParameterSet, attributes: usize) -> Vec<f64> {
    let st = &params.structural;
    let mu: Vec<f64> = (0..1usize << attributes)
        .map(|c| {
            let s: f64 = st
                .terms()
                .iter()
                .zip(st.gammas())
                .filter(|(t, _)| (t.bits() as usize) & c == t.bits() as usize)
                .map(|(_, g)| g)
                .sum();
            s.exp()
        })
        .collect();
    let total: f64 = mu.iter().sum();
    mu.iter().map(|m| m / total).collect()
}

/// `π_ic` from the logistic of the summed active effects present in class c.
pub fn brute_pi(item: &ItemParameterSet, class: usize) -> f64 {
    let eta: f64 = item
        .active()
        .iter()
        .filter(|s| (s.bits() as usize) & class == s.bits() as usize)
        .map(|s| item.value(*s))
        .sum();
    1.0 / (1.0 + (-eta).exp())
}

/// Log-likelihood by direct enumeration of all classes in plain arithmetic.
pub fn brute_loglik(spec: &ModelSpec, params: &ParameterSet, data: &ResponseMatrix) -> f64 {
    let a = spec.attributes();
    let nu = brute_nu(params, a);
    let mut ll = 0.0;
    for e in 0..data.examinees() {
        let mut f = 0.0;
        for (c, nu_c) in nu.iter().enumerate() {
            let mut l = 1.0;
            for (i, it) in params.items.iter().enumerate() {
                let p = brute_pi(it, c);
                l *= if data.values()[[e, i]] == 1 { p } else { 1.0 - p };
            }
            f += nu_c * l;
        }
        ll += f.ln();
    }
    ll
}

/// Posterior class probabilities by direct enumeration.
pub fn brute_posterior(spec: &ModelSpec, params: &ParameterSet, data: &ResponseMatrix) -> Array2<f64> {
    let a = spec.attributes();
    let nu = brute_nu(params, a);
    let mut out = Array2::zeros((data.examinees(), nu.len()));
    for e in 0..data.examinees() {
        for (c, nu_c) in nu.iter().enumerate() {
            let mut l = 1.0;
            for (i, it) in params.items.iter().enumerate() {
                let p = brute_pi(it, c);
                l *= if data.values()[[e, i]] == 1 { p } else { 1.0 - p };
            }
            out[[e, c]] = nu_c * l;
        }
        let total: f64 = out.row(e).sum();
        out.row_mut(e).mapv_inplace(|v| v / total);
    }
    out
}

/// Central finite difference of `f` in coordinate `k` of `x`.
pub fn central_difference(x: &[f64], k: usize, h: f64, f: impl Fn(&[f64]) -> f64) -> f64 {
    let mut up = x.to_vec();
    let mut down = x.to_vec();
    up[k] += h;
    down[k] -= h;
    (f(&up) - f(&down)) / (2.0 * h)
}

/// `Σ_e g_e g_eᵀ` entry by entry.
pub fn naive_info(g: &Array2<f64>) -> Vec<Vec<f64>> {
    let p = g.ncols();
    let mut out = vec![vec![0.0; p]; p];
    for (j, row) in out.iter_mut().enumerate() {
        for (k, cell) in row.iter_mut().enumerate() {
            for e in 0..g.nrows() {
                *cell += g[[e, j]] * g[[e, k]];
            }
        }
    }
    out
}

/// Attribute set of every class containing `s`.
pub fn classes_containing(s: AttrSet, attributes: usize) -> Vec<usize> {
    (0..1usize << attributes)
        .filter(|c| c & s.bits() as usize == s.bits() as usize)
        .collect()
}

/// Bivariate standard normal CDF `Φ₂(h, k; ρ)` via Plackett's identity
/// `∂Φ₂/∂ρ = φ₂(h, k; ρ)`, integrated from ρ = 0 by Simpson's rule.
pub fn bivariate_normal_cdf(h: f64, k: f64, rho: f64) -> f64 {
    let phi = |x: f64| 0.5 * erfc_approx(-x / std::f64::consts::SQRT_2);
    let density = |r: f64| {
        let det = 1.0 - r * r;
        (-(h * h - 2.0 * r * h * k + k * k) / (2.0 * det)).exp()
            / (2.0 * std::f64::consts::PI * det.sqrt())
    };
    let n = 2000;
    let step = rho / n as f64;
    let mut sum = density(0.0) + density(rho);
    for j in 1..n {
        let w = if j % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * density(j as f64 * step);
    }
    phi(h) * phi(k) + sum * step / 3.0
}

/// Complementary error function (Numerical Recipes `erfcc`, relative error
/// below 1.2e-7), kept local so the oracle does not share library code.
pub fn erfc_approx(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let r = t * (-z * z - 1.265_512_23
        + t * (1.000_023_68
            + t * (0.374_091_96
                + t * (0.096_784_18
                    + t * (-0.186_288_06
                        + t * (0.278_868_07
                            + t * (-1.135_203_98
                                + t * (1.488_515_87 + t * (-0.822_152_23 + t * 0.170_872_77)))))))))
        .exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}

/// Inverse standard normal CDF by bisection on the local `Φ`.
pub fn normal_quantile(p: f64) -> f64 {
    let phi = |x: f64| 0.5 * erfc_approx(-x / std::f64::consts::SQRT_2);
    let (mut lo, mut hi) = (-10.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Tetrachoric correlation of a 2×2 table `[[n00, n01], [n10, n11]]`:
/// thresholds at the observed marginal quantiles, then bisection on ρ so
/// that the bivariate normal reproduces the observed `P(both zero)`.
pub fn tetrachoric(table: [[f64; 2]; 2]) -> f64 {
    let n: f64 = table.iter().flatten().sum();
    let h = normal_quantile((table[0][0] + table[0][1]) / n);
    let k = normal_quantile((table[0][0] + table[1][0]) / n);
    let target = table[0][0] / n;
    let (mut lo, mut hi) = (-0.999, 0.999);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if bivariate_normal_cdf(h, k, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
