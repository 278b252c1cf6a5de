use std::collections::BTreeMap;
use std::fmt::Debug;

use super::{CalcError, Result};

/// A finite mapping `A -> B`, an element of `B^A`. Applying it to a point is the
/// evaluation `||<f, x>|| = f(x)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FiniteMapping<K: Ord, V> {
    table: BTreeMap<K, V>,
}

impl<K: Ord + Debug, V> FiniteMapping<K, V> {
    pub fn new(table: BTreeMap<K, V>) -> Self {
        FiniteMapping { table }
    }

    pub fn apply(&self, x: &K) -> Result<&V> {
        self.table.get(x).ok_or_else(|| CalcError::OutOfDomain(format!("{x:?}")))
    }

    pub fn definition_area(&self) -> impl Iterator<Item = &K> {
        self.table.keys()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&K, &V)> {
        self.table.iter()
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl<K: Ord + Clone + Debug> FiniteMapping<K, K> {
    pub fn identity(area: impl IntoIterator<Item = K>) -> Self {
        FiniteMapping::new(area.into_iter().map(|k| (k.clone(), k)).collect())
    }
}

impl<K: Ord, V> FromIterator<(K, V)> for FiniteMapping<K, V> {
    fn from_iter<T: IntoIterator<Item = (K, V)>>(iter: T) -> Self {
        FiniteMapping { table: iter.into_iter().collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_and_out_of_domain() {
        let f: FiniteMapping<&str, i32> = [("a", 1), ("b", 2)].into_iter().collect();
        assert_eq!(f.apply(&"a"), Ok(&1));
        assert!(matches!(f.apply(&"c"), Err(CalcError::OutOfDomain(_))));
    }

    #[test]
    fn identity_maps_each_point_to_itself() {
        let id = FiniteMapping::identity(["x", "y", "z"]);
        for p in ["x", "y", "z"] {
            assert_eq!(id.apply(&p), Ok(&p));
        }
    }

    #[test]
    fn three_point_table_matches_direct_read() {
        let raw = [("p", 10), ("q", 20), ("r", 30)];
        let f: FiniteMapping<_, _> = raw.into_iter().collect();
        for (k, v) in raw {
            assert_eq!(*f.apply(&k).unwrap(), v);
        }
    }
}
