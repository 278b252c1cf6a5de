use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{CoordinateSpace, ProfileError, Result, Scalar};

/// A value still indexed by unapplied coordinates. The table is total over the cross
/// product of the free coordinates' values; with no free coordinates it holds one scalar.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GeneralizedValue {
    free: Vec<String>,
    table: BTreeMap<Vec<String>, Scalar>,
}

impl GeneralizedValue {
    pub fn scalar(value: impl Into<Scalar>) -> Self {
        GeneralizedValue { free: Vec::new(), table: BTreeMap::from([(Vec::new(), value.into())]) }
    }

    pub fn free(&self) -> &[String] {
        &self.free
    }

    pub fn table(&self) -> &BTreeMap<Vec<String>, Scalar> {
        &self.table
    }

    /// Number of coordinates not yet applied.
    pub fn generalization_level(&self) -> usize {
        self.free.len()
    }

    pub fn as_scalar(&self) -> Option<&Scalar> {
        if self.free.is_empty() {
            self.table.get(&Vec::new())
        } else {
            None
        }
    }

    pub fn lookup(&self, tuple: &[String]) -> Option<&Scalar> {
        self.table.get(tuple)
    }
}

impl CoordinateSpace {
    /// Validates and builds a generalized value over `free`.
    pub fn generalized(
        &self,
        free: Vec<String>,
        entries: impl IntoIterator<Item = (Vec<String>, Scalar)>,
    ) -> Result<GeneralizedValue> {
        let distinct: BTreeSet<_> = free.iter().collect();
        if distinct.len() != free.len() {
            return Err(ProfileError::IncompleteTable(free));
        }
        let expected: BTreeSet<Vec<String>> = self.tuples(&free)?.into_iter().collect();
        let mut table = BTreeMap::new();
        for (tuple, value) in entries {
            if tuple.len() != free.len() {
                return Err(ProfileError::IncompleteTable(free));
            }
            for (c, v) in free.iter().zip(&tuple) {
                self.check(c, v)?;
            }
            if table.insert(tuple, value).is_some() {
                return Err(ProfileError::IncompleteTable(free));
            }
        }
        if table.len() != expected.len() {
            return Err(ProfileError::IncompleteTable(free));
        }
        Ok(GeneralizedValue { free, table })
    }

    /// `||gv||(coord = value)`. Identity when `coord` is not free.
    pub fn apply(&self, gv: &GeneralizedValue, coord: &str, value: &str) -> Result<GeneralizedValue> {
        self.check(coord, value)?;
        let Some(i) = gv.free.iter().position(|c| c == coord) else {
            return Ok(gv.clone());
        };
        let mut free = gv.free.clone();
        free.remove(i);
        let table = gv
            .table
            .iter()
            .filter(|(t, _)| t[i] == value)
            .map(|(t, s)| {
                let mut t = t.clone();
                t.remove(i);
                (t, s.clone())
            })
            .collect();
        Ok(GeneralizedValue { free, table })
    }

    /// Applies assignments left to right.
    pub fn apply_all<'a>(
        &self,
        gv: &GeneralizedValue,
        assignments: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<GeneralizedValue> {
        assignments.into_iter().try_fold(gv.clone(), |acc, (c, v)| self.apply(&acc, c, v))
    }

    /// True iff every value of `coord` yields the same restricted table.
    pub fn is_fixpoint(&self, gv: &GeneralizedValue, coord: &str) -> Result<bool> {
        let values = &self.get(coord)?.values;
        if !gv.free.iter().any(|c| c == coord) {
            return Ok(true);
        }
        let first = self.apply(gv, coord, &values[0])?;
        for v in &values[1..] {
            if self.apply(gv, coord, v)? != first {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// The `coord`-independent restriction, when `gv` is a fixpoint along `coord`.
    pub fn collapse(&self, gv: &GeneralizedValue, coord: &str) -> Result<Option<GeneralizedValue>> {
        if !self.is_fixpoint(gv, coord)? {
            return Ok(None);
        }
        let first = self.get(coord)?.values[0].clone();
        self.apply(gv, coord, &first).map(Some)
    }
}

/// `over (c1, c2) { (a, b): 1, ... }`. Single-coordinate keys print bare, the nullary
/// table prints as `{ v }`.
impl fmt::Display for GeneralizedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "over ({}) {{ ", self.free.join(", "))?;
        if self.free.is_empty() {
            if let Some(s) = self.as_scalar() {
                write!(f, "{s}")?;
            }
        } else {
            let parts: Vec<String> = self
                .table
                .iter()
                .map(|(t, s)| if t.len() == 1 { format!("{}: {s}", t[0]) } else { format!("({}): {s}", t.join(", ")) })
                .collect();
            f.write_str(&parts.join(", "))?;
        }
        f.write_str(" }")
    }
}

#[cfg(test)]
mod tests {
    use super::super::Coordinate;
    use super::*;

    fn space() -> CoordinateSpace {
        let mut s = CoordinateSpace::new();
        s.declare(Coordinate::new("s", &["higraph", "mmedia"])).unwrap();
        s.declare(Coordinate::new("p", &["registered", "unregistered", "corporate"])).unwrap();
        s
    }

    fn z(s: &CoordinateSpace) -> GeneralizedValue {
        s.generalized(
            vec!["s".into()],
            [(vec!["higraph".into()], Scalar::Int(7)), (vec!["mmedia".into()], Scalar::Int(4))],
        )
        .unwrap()
    }

    #[test]
    fn applying_s_selects_the_component() {
        let sp = space();
        let zv = z(&sp);
        assert_eq!(zv.generalization_level(), 1);
        let zh = sp.apply(&zv, "s", "higraph").unwrap();
        assert_eq!(zh.as_scalar(), Some(&Scalar::Int(7)));
        assert_eq!(zh.generalization_level(), 0);
        // second assignment does not narrow further
        assert_eq!(sp.apply(&zh, "p", "registered").unwrap(), zh);
        assert!(sp.is_fixpoint(&zh, "p").unwrap());
    }

    #[test]
    fn scalar_is_fixed_along_every_coordinate() {
        let sp = space();
        let q = GeneralizedValue::scalar(3);
        assert!(sp.is_fixpoint(&q, "s").unwrap());
        assert_eq!(sp.apply(&q, "s", "higraph").unwrap(), sp.apply(&q, "s", "mmedia").unwrap());
    }

    #[test]
    fn varying_along_p_is_not_a_fixpoint() {
        let sp = space();
        let g = sp
            .generalized(
                vec!["p".into()],
                [
                    (vec!["registered".into()], Scalar::Int(1)),
                    (vec!["unregistered".into()], Scalar::Int(2)),
                    (vec!["corporate".into()], Scalar::Int(1)),
                ],
            )
            .unwrap();
        assert!(!sp.is_fixpoint(&g, "p").unwrap());
        assert_eq!(sp.collapse(&g, "p").unwrap(), None);
    }

    #[test]
    fn table_must_be_total() {
        let sp = space();
        let r = sp.generalized(vec!["s".into()], [(vec!["higraph".into()], Scalar::Int(1))]);
        assert!(matches!(r, Err(ProfileError::IncompleteTable(_))));
        let r = sp.generalized(vec!["s".into()], [(vec!["nope".into()], Scalar::Int(1))]);
        assert!(matches!(r, Err(ProfileError::ValueOutOfRange { .. })));
    }

    #[test]
    fn apply_errors() {
        let sp = space();
        let zv = z(&sp);
        assert!(matches!(sp.apply(&zv, "q", "x"), Err(ProfileError::UnknownCoordinate(_))));
        assert!(matches!(sp.apply(&zv, "s", "x"), Err(ProfileError::ValueOutOfRange { .. })));
        assert!(matches!(sp.is_fixpoint(&zv, "q"), Err(ProfileError::UnknownCoordinate(_))));
    }

    #[test]
    fn display_forms() {
        let sp = space();
        assert_eq!(z(&sp).to_string(), "over (s) { higraph: 7, mmedia: 4 }");
        assert_eq!(GeneralizedValue::scalar(2).to_string(), "over () { 2 }");
    }
}
