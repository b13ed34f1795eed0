use nalgebra::{Cholesky, DMatrix, Dyn, SymmetricEigen};
use ndarray::Array2;

use crate::error::{DcmError, Result};

/// Condition number above which the nuisance block is ridge-regularized.
pub const MAX_CONDITION: f64 = 1e12;
/// Ridge size relative to the mean diagonal of the nuisance block.
pub const RIDGE_SCALE: f64 = 1e-8;
/// Absolute floor on the Schur complement below which an index is unavailable.
pub const SCHUR_FLOOR: f64 = 1e-12;
/// Relative floor: a candidate whose residual information is below this
/// fraction of its raw information is treated as collinear with the model.
pub const SCHUR_RELATIVE_FLOOR: f64 = 1e-8;

/// Empirical observed information `Σ_e g_e g_eᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalInfo {
    pub matrix: DMatrix<f64>,
}

/// Outer-product accumulation over examinees, in examinee order.
pub fn empirical_info(per_examinee: &Array2<f64>) -> EmpiricalInfo {
    let p = per_examinee.ncols();
    let mut m = DMatrix::<f64>::zeros(p, p);
    for row in per_examinee.rows() {
        for j in 0..p {
            let gj = row[j];
            if gj == 0.0 {
                continue;
            }
            for k in j..p {
                m[(j, k)] += gj * row[k];
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            m[(j, k)] = m[(k, j)];
        }
    }
    EmpiricalInfo { matrix: m }
}

/// Cross products between the columns of `a` and the vector `b`, in
/// examinee order.
pub fn cross_products(a: &Array2<f64>, b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.ncols()];
    for (row, &g) in a.rows().into_iter().zip(b) {
        if g == 0.0 {
            continue;
        }
        out.iter_mut().zip(row.iter()).for_each(|(o, r)| *o += r * g);
    }
    out
}

/// Factorized nuisance-parameter block `I₁₁`, reused across candidates.
pub struct ReducedInfo {
    chol: Cholesky<f64, Dyn>,
    ridge: Option<f64>,
}

impl ReducedInfo {
    pub fn new(i11: DMatrix<f64>) -> Result<Self> {
        let p = i11.nrows();
        if p == 0 {
            return Err(DcmError::Linalg("empty nuisance block".into()));
        }
        let eig = SymmetricEigen::new(i11.clone());
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        let ridge = if min <= 0.0 || max / min > MAX_CONDITION {
            Some(RIDGE_SCALE * i11.trace() / p as f64)
        } else {
            None
        };
        let mut m = i11;
        if let Some(r) = ridge {
            for j in 0..p {
                m[(j, j)] += r;
            }
        }
        let chol = m
            .cholesky()
            .ok_or_else(|| DcmError::Linalg("nuisance information block is not positive definite".into()))?;
        Ok(ReducedInfo { chol, ridge })
    }

    pub fn ridge(&self) -> Option<f64> {
        self.ridge
    }

    /// `I₂₂ − I₁₂ᵀ I₁₁⁻¹ I₁₂`.
    pub fn schur(&self, i12: &DMatrix<f64>, i22: &DMatrix<f64>) -> DMatrix<f64> {
        let solved = self.chol.solve(i12);
        let s = i22 - i12.transpose() * solved;
        (&s + s.transpose()) * 0.5
    }
}

/// Effective inverse block `I²² = (I₂₂ − I₁₂ᵀ I₁₁⁻¹ I₁₂)⁻¹`.
#[derive(Clone, Debug)]
pub struct Block22 {
    /// `None` when the Schur complement is numerically singular.
    pub inverse: Option<DMatrix<f64>>,
    pub schur: DMatrix<f64>,
    pub ridge: Option<f64>,
    pub warnings: Vec<String>,
}

/// Partitioned inverse for the trailing `q` rows of `info`.
pub fn info_block_22(info: &EmpiricalInfo, q: usize) -> Result<Block22> {
    let n = info.matrix.nrows();
    if q == 0 || q >= n {
        return Err(DcmError::config(format!(
            "candidate count {q} must be in 1..{n}"
        )));
    }
    let p = n - q;
    let m = &info.matrix;
    let reduced = ReducedInfo::new(m.view((0, 0), (p, p)).into_owned())?;
    let i12 = m.view((0, p), (p, q)).into_owned();
    let i22 = m.view((p, p), (q, q)).into_owned();
    Ok(block_from_reduced(&reduced, &i12, &i22))
}

pub(crate) fn block_from_reduced(
    reduced: &ReducedInfo,
    i12: &DMatrix<f64>,
    i22: &DMatrix<f64>,
) -> Block22 {
    let q = i22.nrows();
    let schur = reduced.schur(i12, i22);
    let mut warnings = Vec::new();
    if let Some(r) = reduced.ridge() {
        warnings.push(format!(
            "ill-conditioned nuisance information, ridge {r:.3e} added"
        ));
    }
    let floor = SCHUR_FLOOR.max(SCHUR_RELATIVE_FLOOR * i22.trace() / q as f64);
    let min_eig = if q == 1 {
        schur[(0, 0)]
    } else {
        SymmetricEigen::new(schur.clone()).eigenvalues.min()
    };
    let inverse = if min_eig <= floor {
        warnings.push("candidate information is singular given the model parameters".into());
        None
    } else {
        schur.clone().try_inverse()
    };
    Block22 {
        inverse,
        schur,
        ridge: reduced.ridge(),
        warnings,
    }
}
