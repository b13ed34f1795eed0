use ndarray::{Array2, ArrayView1};

use crate::error::{DcmError, Result};
use crate::model::QMatrix;

/// Complete dichotomous response data, examinees by items.
#[derive(Clone, Debug, PartialEq)]
pub struct ResponseMatrix {
    values: Array2<u8>,
    examinee_ids: Vec<String>,
    item_ids: Vec<String>,
}

impl ResponseMatrix {
    pub fn new(values: Array2<u8>, examinee_ids: Vec<String>, item_ids: Vec<String>) -> Result<Self> {
        let (e, i) = values.dim();
        if examinee_ids.len() != e {
            return Err(DcmError::format(format!(
                "{e} response rows but {} examinee ids",
                examinee_ids.len()
            )));
        }
        if item_ids.len() != i {
            return Err(DcmError::format(format!(
                "{i} response columns but {} item ids",
                item_ids.len()
            )));
        }
        if let Some(((row, col), v)) = values.indexed_iter().find(|(_, &v)| v > 1) {
            return Err(DcmError::format(format!(
                "response {v} for examinee '{}' on item '{}' is not 0/1",
                examinee_ids[row], item_ids[col]
            )));
        }
        Ok(ResponseMatrix {
            values,
            examinee_ids,
            item_ids,
        })
    }

    /// Responses with default ids (`e1..`, `item1..`).
    pub fn from_array(values: Array2<u8>) -> Result<Self> {
        let (e, i) = values.dim();
        Self::new(
            values,
            (1..=e).map(|k| format!("e{k}")).collect(),
            (1..=i).map(|k| format!("item{k}")).collect(),
        )
    }

    pub fn examinees(&self) -> usize {
        self.values.nrows()
    }

    pub fn items(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<u8> {
        &self.values
    }

    pub fn row(&self, examinee: usize) -> ArrayView1<'_, u8> {
        self.values.row(examinee)
    }

    pub fn examinee_ids(&self) -> &[String] {
        &self.examinee_ids
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    /// Proportion correct per item.
    pub fn item_means(&self) -> Vec<f64> {
        let e = self.examinees().max(1) as f64;
        self.values
            .columns()
            .into_iter()
            .map(|c| c.iter().map(|&v| v as f64).sum::<f64>() / e)
            .collect()
    }

    /// Checks the column count and item ids against a Q-matrix.
    pub fn check_against(&self, q: &QMatrix) -> Result<()> {
        if self.items() != q.items() {
            return Err(DcmError::format(format!(
                "response data has {} items but the Q-matrix has {}",
                self.items(),
                q.items()
            )));
        }
        Ok(())
    }

    /// Reorders columns to match the Q-matrix item ids.
    pub fn aligned_to(&self, q: &QMatrix) -> Result<ResponseMatrix> {
        self.check_against(q)?;
        let mut order = Vec::with_capacity(q.items());
        for id in q.item_ids() {
            let col = self.item_ids.iter().position(|x| x == id).ok_or_else(|| {
                DcmError::format(format!("item '{id}' from the Q-matrix is missing in the responses"))
            })?;
            order.push(col);
        }
        let values = Array2::from_shape_fn((self.examinees(), q.items()), |(e, i)| {
            self.values[[e, order[i]]]
        });
        ResponseMatrix::new(values, self.examinee_ids.clone(), q.item_ids().to_vec())
    }
}
