use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{DcmError, Result};

/// Largest supported attribute count. The full LCDM carries `2^A - 1`
/// effects per item, so anything beyond this is rejected outright.
pub const MAX_ATTRIBUTES: usize = 16;

/// A set of attributes stored as a bitmask; bit `a` is attribute `a`
/// (0-based internally, 1-based in every external label).
///
/// The empty set stands for the intercept when used as an effect index.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct AttrSet(u32);

impl AttrSet {
    pub const EMPTY: AttrSet = AttrSet(0);

    pub const fn from_bits(bits: u32) -> Self {
        AttrSet(bits)
    }

    pub fn singleton(attribute: usize) -> Self {
        AttrSet(1 << attribute)
    }

    pub fn from_attributes<I: IntoIterator<Item = usize>>(attrs: I) -> Self {
        AttrSet(attrs.into_iter().fold(0u32, |acc, a| acc | (1 << a)))
    }

    pub const fn bits(self) -> u32 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, attribute: usize) -> bool {
        self.0 >> attribute & 1 == 1
    }

    pub fn is_subset_of(self, other: AttrSet) -> bool {
        self.0 & other.0 == self.0
    }

    pub fn union(self, other: AttrSet) -> AttrSet {
        AttrSet(self.0 | other.0)
    }

    pub fn difference(self, other: AttrSet) -> AttrSet {
        AttrSet(self.0 & !other.0)
    }

    pub fn with(self, attribute: usize) -> AttrSet {
        AttrSet(self.0 | (1 << attribute))
    }

    /// Attributes in ascending order (0-based).
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..32).filter(move |a| bits >> a & 1 == 1)
    }

    /// Canonical effect label: ascending 1-based attributes joined by `x`.
    /// The intercept is labelled `"intercept"`.
    pub fn label(self) -> String {
        if self.is_empty() {
            return "intercept".to_string();
        }
        self.iter()
            .map(|a| (a + 1).to_string())
            .collect::<Vec<_>>()
            .join("x")
    }

    pub fn parse_label(label: &str, attributes: usize) -> Result<AttrSet> {
        let label = label.trim();
        if label == "intercept" || label == "0" {
            return Ok(AttrSet::EMPTY);
        }
        let mut set = AttrSet::EMPTY;
        let mut last = 0usize;
        for part in label.split('x') {
            let attr: usize = part
                .trim()
                .parse()
                .map_err(|_| DcmError::format(format!("bad effect label '{label}'")))?;
            if attr == 0 || attr > attributes {
                return Err(DcmError::format(format!(
                    "effect label '{label}' references attribute {attr} outside 1..={attributes}"
                )));
            }
            if attr <= last {
                return Err(DcmError::format(format!(
                    "effect label '{label}' must list attributes in strictly ascending order"
                )));
            }
            last = attr;
            set = set.with(attr - 1);
        }
        Ok(set)
    }

    /// Order used for every effect listing: by size, then lexicographic on
    /// the ascending attribute lists.
    pub fn canonical_cmp(&self, other: &AttrSet) -> Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.iter().cmp(other.iter()))
    }

    /// Every subset of `self` (including the empty set) in canonical order.
    pub fn subsets(self) -> Vec<AttrSet> {
        let mut out = Vec::with_capacity(1 << self.len());
        let mut sub = self.0;
        loop {
            out.push(AttrSet(sub));
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & self.0;
        }
        out.sort_by(AttrSet::canonical_cmp);
        out
    }
}

impl fmt::Debug for AttrSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AttrSet({})", self.label())
    }
}

impl fmt::Display for AttrSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// The full attribute set over `attributes` attributes.
pub fn full_set(attributes: usize) -> AttrSet {
    AttrSet((1u32 << attributes) - 1)
}

/// All subsets of `{1..A}` in canonical order, intercept first.
pub fn canonical_subsets(attributes: usize) -> Vec<AttrSet> {
    full_set(attributes).subsets()
}

impl Serialize for AttrSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for AttrSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        AttrSet::parse_label(&s, MAX_ATTRIBUTES).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_order_for_three_attributes() {
        let labels: Vec<String> = canonical_subsets(3).iter().map(|s| s.label()).collect();
        assert_eq!(
            labels,
            ["intercept", "1", "2", "3", "1x2", "1x3", "2x3", "1x2x3"]
        );
    }

    #[test]
    fn non_intercept_count_is_two_pow_a_minus_one() {
        for a in 1..=8 {
            assert_eq!(canonical_subsets(a).len() - 1, (1 << a) - 1);
        }
    }

    #[test]
    fn label_round_trip() {
        for set in canonical_subsets(5) {
            assert_eq!(AttrSet::parse_label(&set.label(), 5).unwrap(), set);
        }
        assert!(AttrSet::parse_label("2x1", 3).is_err());
        assert!(AttrSet::parse_label("4", 3).is_err());
        assert!(AttrSet::parse_label("1xy", 3).is_err());
    }
}
