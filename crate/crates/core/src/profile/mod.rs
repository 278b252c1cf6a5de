//! Curried, assignment-indexed evaluation.
//!
//! A [`GeneralizedValue`] is a table indexed by still-unapplied assignment coordinates.
//! Applying a coordinate value narrows the table and lowers the generalization level;
//! applying a coordinate the value does not depend on is the identity. The same
//! coordinates also index user sets ([`Functional`]) and the request cost model.

mod cost;
mod functional;
mod generalized;

pub use cost::{CostModel, Stage};
pub use functional::{Functional, Segmentation, UserProfile};
pub use generalized::GeneralizedValue;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::value::quote;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProfileError {
    #[error("unknown coordinate `{0}`")]
    UnknownCoordinate(String),
    #[error("value `{value}` is not in coordinate `{coordinate}`")]
    ValueOutOfRange { coordinate: String, value: String },
    #[error("coordinate `{0}` is already declared")]
    DuplicateCoordinate(String),
    #[error("bad coordinate `{name}`: {reason}")]
    BadCoordinate { name: String, reason: String },
    #[error("table is not total over {0:?}")]
    IncompleteTable(Vec<String>),
    #[error("cost of stage {stage} is still generalized over {free:?}")]
    UnresolvedCost { stage: usize, free: Vec<String> },
    #[error("cost of stage {0} is not an integer")]
    NonNumericCost(usize),
    #[error("bad cost model: {0}")]
    BadCostModel(String),
    #[error("unknown cost model `{0}`")]
    UnknownCostModel(String),
    #[error("user `{user}` has no value for `{coordinate}`")]
    MissingCoordinate { user: String, coordinate: String },
    #[error("`{0}` is already defined")]
    DuplicateName(String),
}

pub type Result<T, E = ProfileError> = std::result::Result<T, E>;

/// A scalar table entry. Compared exactly.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scalar {
    Int(i64),
    Text(String),
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Int(i) => write!(f, "{i}"),
            Scalar::Text(s) => f.write_str(&quote(s)),
        }
    }
}

impl From<i64> for Scalar {
    fn from(v: i64) -> Self {
        Scalar::Int(v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coordinate {
    pub name: String,
    pub values: Vec<String>,
}

impl Coordinate {
    pub fn new(name: &str, values: &[&str]) -> Self {
        Coordinate { name: name.into(), values: values.iter().map(|v| v.to_string()).collect() }
    }

    pub fn contains(&self, value: &str) -> bool {
        self.values.iter().any(|v| v == value)
    }

    /// Position of `value` in declaration order.
    pub fn rank(&self, value: &str) -> Option<usize> {
        self.values.iter().position(|v| v == value)
    }
}

impl fmt::Display for Coordinate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "coordinate {} {{ {} }}", self.name, self.values.join(", "))
    }
}

/// The declared assignment coordinates.
#[derive(Debug, Clone, Default)]
pub struct CoordinateSpace {
    coords: BTreeMap<String, Coordinate>,
    order: Vec<String>,
}

impl CoordinateSpace {
    pub fn new() -> Self {
        CoordinateSpace::default()
    }

    pub fn declare(&mut self, coord: Coordinate) -> Result<()> {
        if self.coords.contains_key(&coord.name) {
            return Err(ProfileError::DuplicateCoordinate(coord.name));
        }
        let distinct: BTreeSet<_> = coord.values.iter().collect();
        if coord.values.is_empty() || distinct.len() != coord.values.len() {
            return Err(ProfileError::BadCoordinate {
                name: coord.name,
                reason: "values must be nonempty and duplicate-free".into(),
            });
        }
        self.order.push(coord.name.clone());
        self.coords.insert(coord.name.clone(), coord);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Coordinate> {
        self.coords.get(name).ok_or_else(|| ProfileError::UnknownCoordinate(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.coords.contains_key(name)
    }

    /// Coordinates in declaration order.
    pub fn iter(&self) -> impl Iterator<Item = &Coordinate> {
        self.order.iter().map(|n| &self.coords[n])
    }

    pub fn check(&self, coordinate: &str, value: &str) -> Result<()> {
        if self.get(coordinate)?.contains(value) {
            Ok(())
        } else {
            Err(ProfileError::ValueOutOfRange { coordinate: coordinate.into(), value: value.into() })
        }
    }

    /// Every tuple over `coords`, lexicographic in declaration order of each coordinate's values.
    pub fn tuples(&self, coords: &[String]) -> Result<Vec<Vec<String>>> {
        let mut out: Vec<Vec<String>> = vec![Vec::new()];
        for c in coords {
            let values = &self.get(c)?.values;
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    values.iter().map(move |v| {
                        let mut t = prefix.clone();
                        t.push(v.clone());
                        t
                    })
                })
                .collect();
        }
        Ok(out)
    }
}
