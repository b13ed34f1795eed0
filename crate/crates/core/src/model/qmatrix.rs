use serde::{Deserialize, Serialize};

use super::attrset::AttrSet;
use super::profile::check_attribute_count;
use crate::error::{DcmError, Result};

/// Binary item-by-attribute loading pattern.
///
/// Rows are stored as attribute bitmasks. Construction enforces that every
/// item measures at least one attribute and every attribute is measured by
/// at least one item.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QMatrixRepr", into = "QMatrixRepr")]
pub struct QMatrix {
    rows: Vec<AttrSet>,
    item_ids: Vec<String>,
    attribute_ids: Vec<String>,
}

impl QMatrix {
    pub fn new(
        entries: Vec<Vec<u8>>,
        item_ids: Vec<String>,
        attribute_ids: Vec<String>,
    ) -> Result<Self> {
        let attributes = attribute_ids.len();
        check_attribute_count(attributes)?;
        if entries.len() != item_ids.len() {
            return Err(DcmError::format(format!(
                "Q-matrix has {} rows but {} item ids",
                entries.len(),
                item_ids.len()
            )));
        }
        if entries.is_empty() {
            return Err(DcmError::format("Q-matrix has no items"));
        }
        let mut rows = Vec::with_capacity(entries.len());
        for (row, id) in entries.iter().zip(&item_ids) {
            if row.len() != attributes {
                return Err(DcmError::format(format!(
                    "Q-matrix row for item '{id}' has {} entries, expected {attributes}",
                    row.len()
                )));
            }
            let mut set = AttrSet::EMPTY;
            for (a, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 => set = set.with(a),
                    other => {
                        return Err(DcmError::format(format!(
                            "Q-matrix entry {other} for item '{id}' is not 0/1"
                        )))
                    }
                }
            }
            rows.push(set);
        }
        Self::from_rows(rows, item_ids, attribute_ids)
    }

    pub fn from_rows(
        rows: Vec<AttrSet>,
        item_ids: Vec<String>,
        attribute_ids: Vec<String>,
    ) -> Result<Self> {
        let attributes = attribute_ids.len();
        check_attribute_count(attributes)?;
        if rows.len() != item_ids.len() {
            return Err(DcmError::format("Q-matrix row count does not match item ids"));
        }
        let full = super::attrset::full_set(attributes);
        for (row, id) in rows.iter().zip(&item_ids) {
            if row.is_empty() {
                return Err(DcmError::format(format!(
                    "item '{id}' measures no attribute (Q-matrix row of zeros)"
                )));
            }
            if !row.is_subset_of(full) {
                return Err(DcmError::format(format!(
                    "item '{id}' references attributes beyond {attributes}"
                )));
            }
        }
        for (a, id) in attribute_ids.iter().enumerate() {
            if !rows.iter().any(|r| r.contains(a)) {
                return Err(DcmError::format(format!(
                    "attribute '{id}' is measured by no item (Q-matrix column of zeros)"
                )));
            }
        }
        Ok(QMatrix {
            rows,
            item_ids,
            attribute_ids,
        })
    }

    /// Q-matrix with default labels `item1..`, `attr1..`.
    pub fn from_entries(entries: Vec<Vec<u8>>) -> Result<Self> {
        let items = entries.len();
        let attributes = entries.first().map_or(0, Vec::len);
        Self::new(
            entries,
            (1..=items).map(|i| format!("item{i}")).collect(),
            (1..=attributes).map(|a| format!("attr{a}")).collect(),
        )
    }

    pub fn items(&self) -> usize {
        self.rows.len()
    }

    pub fn attributes(&self) -> usize {
        self.attribute_ids.len()
    }

    pub fn classes(&self) -> usize {
        1 << self.attributes()
    }

    pub fn row(&self, item: usize) -> AttrSet {
        self.rows[item]
    }

    pub fn row_bits(&self, item: usize) -> Vec<u8> {
        (0..self.attributes())
            .map(|a| self.rows[item].contains(a) as u8)
            .collect()
    }

    pub fn entry(&self, item: usize, attribute: usize) -> u8 {
        self.rows[item].contains(attribute) as u8
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn attribute_ids(&self) -> &[String] {
        &self.attribute_ids
    }

    pub fn item_index(&self, id: &str) -> Option<usize> {
        self.item_ids.iter().position(|x| x == id)
    }

    /// Copy with `extra` attributes added to one item's row.
    pub fn with_row_extended(&self, item: usize, extra: AttrSet) -> QMatrix {
        let mut out = self.clone();
        out.rows[item] = out.rows[item].union(extra);
        out
    }
}

#[derive(Serialize, Deserialize)]
struct QMatrixRepr {
    item_ids: Vec<String>,
    attribute_ids: Vec<String>,
    entries: Vec<Vec<u8>>,
}

impl From<QMatrix> for QMatrixRepr {
    fn from(q: QMatrix) -> Self {
        QMatrixRepr {
            entries: (0..q.items()).map(|i| q.row_bits(i)).collect(),
            item_ids: q.item_ids,
            attribute_ids: q.attribute_ids,
        }
    }
}

impl TryFrom<QMatrixRepr> for QMatrix {
    type Error = DcmError;

    fn try_from(r: QMatrixRepr) -> Result<Self> {
        QMatrix::new(r.entries, r.item_ids, r.attribute_ids)
    }
}
