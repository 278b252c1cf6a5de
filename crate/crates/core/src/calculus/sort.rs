use std::collections::{BTreeMap, BTreeSet};

use super::{CalcError, FiniteMapping, Result};
use crate::value::{TypeTag, Value};

/// The sort `H_T(I)`: every mapping from a finite label set `I` into a finite target `T`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SortSpec {
    index: Vec<String>,
    target: Vec<Value>,
}

impl SortSpec {
    /// Labels are sorted and deduplicated; target order is kept (duplicates dropped).
    pub fn new<I, S>(index: I, target: Vec<Value>) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let index: BTreeSet<String> = index.into_iter().map(Into::into).collect();
        let mut seen = BTreeSet::new();
        let target = target.into_iter().filter(|v| seen.insert(v.clone())).collect();
        SortSpec { index: index.into_iter().collect(), target }
    }

    pub fn from_type<I, S>(index: I, target: &TypeTag) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let values = target.static_extent().ok_or_else(|| CalcError::InfiniteDomain(target.to_string()))?;
        Ok(SortSpec::new(index, values))
    }

    pub fn index(&self) -> &[String] {
        &self.index
    }

    pub fn target(&self) -> &[Value] {
        &self.target
    }

    /// `|T|^|I|`, or `None` on overflow.
    pub fn cardinality(&self) -> Option<u128> {
        (self.target.len() as u128).checked_pow(self.index.len() as u32)
    }

    /// All mappings in lexicographic order: labels ascending, each label's value in
    /// target order, the last label varying fastest.
    pub fn enumerate(&self) -> Vec<FiniteMapping<String, Value>> {
        let n = self.index.len();
        if n > 0 && self.target.is_empty() {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut digits = vec![0usize; n];
        loop {
            let table: BTreeMap<String, Value> =
                self.index.iter().zip(&digits).map(|(label, &d)| (label.clone(), self.target[d].clone())).collect();
            out.push(FiniteMapping::new(table));
            // odometer increment, rightmost fastest
            let mut pos = n;
            loop {
                if pos == 0 {
                    return out;
                }
                pos -= 1;
                digits[pos] += 1;
                if digits[pos] < self.target.len() {
                    break;
                }
                digits[pos] = 0;
            }
        }
    }
}
