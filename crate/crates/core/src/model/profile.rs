use serde::{Deserialize, Serialize};

use super::attrset::{AttrSet, MAX_ATTRIBUTES};
use crate::error::{DcmError, Result};

/// One of the `2^A` attribute mastery profiles.
///
/// `class_index` is the binary encoding of the mastery bits with attribute 1
/// as the least significant bit, so profile 5 over four attributes is
/// `(1, 0, 1, 0)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AttributeProfile {
    class_index: usize,
    attributes: usize,
}

impl AttributeProfile {
    pub fn new(class_index: usize, attributes: usize) -> Self {
        debug_assert!(class_index < 1 << attributes);
        AttributeProfile {
            class_index,
            attributes,
        }
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        let mut index = 0usize;
        for (a, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => index |= 1 << a,
                other => {
                    return Err(DcmError::format(format!(
                        "profile bit {other} at attribute {} is not 0/1",
                        a + 1
                    )))
                }
            }
        }
        Ok(AttributeProfile::new(index, bits.len()))
    }

    pub fn class_index(&self) -> usize {
        self.class_index
    }

    pub fn attributes(&self) -> usize {
        self.attributes
    }

    pub fn mastered(&self, attribute: usize) -> bool {
        self.class_index >> attribute & 1 == 1
    }

    pub fn bits(&self) -> Vec<u8> {
        (0..self.attributes)
            .map(|a| self.mastered(a) as u8)
            .collect()
    }

    pub fn as_set(&self) -> AttrSet {
        AttrSet::from_bits(self.class_index as u32)
    }
}

pub(crate) fn check_attribute_count(attributes: usize) -> Result<()> {
    if attributes == 0 || attributes > MAX_ATTRIBUTES {
        return Err(DcmError::config(format!(
            "attribute count {attributes} outside supported range 1..={MAX_ATTRIBUTES}"
        )));
    }
    Ok(())
}

/// All `2^A` profiles in ascending class-index order.
pub fn profile_space(attributes: usize) -> Result<Vec<AttributeProfile>> {
    check_attribute_count(attributes)?;
    Ok((0..1usize << attributes)
        .map(|c| AttributeProfile::new(c, attributes))
        .collect())
}
