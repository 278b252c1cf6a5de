use std::collections::{BTreeMap, BTreeSet};

use super::{CoordinateSpace, ProfileError, Result};

/// Coordinate values of one user.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserProfile {
    pub user: String,
    pub values: BTreeMap<String, String>,
}

impl UserProfile {
    pub fn new(user: &str) -> Self {
        UserProfile { user: user.into(), values: BTreeMap::new() }
    }

    pub fn with(mut self, coord: &str, value: &str) -> Self {
        self.values.insert(coord.into(), value.into());
        self
    }

    pub fn get(&self, coord: &str) -> Option<&str> {
        self.values.get(coord).map(String::as_str)
    }

    pub fn validate(&self, space: &CoordinateSpace) -> Result<()> {
        self.values.iter().try_for_each(|(c, v)| space.check(c, v))
    }
}

/// A user set generalized over `coords`; applying assignments narrows the base set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Functional {
    pub name: String,
    pub coords: Vec<String>,
    pub base: BTreeSet<String>,
}

impl Functional {
    pub fn new(name: &str, coords: &[&str], base: impl IntoIterator<Item = String>) -> Self {
        Functional {
            name: name.into(),
            coords: coords.iter().map(|c| c.to_string()).collect(),
            base: base.into_iter().collect(),
        }
    }

    pub fn validate(&self, space: &CoordinateSpace) -> Result<()> {
        self.coords.iter().try_for_each(|c| space.get(c).map(|_| ()))
    }

    /// Users of the base set whose profile matches every assignment. Assignments to
    /// coordinates outside `coords` are rejected.
    pub fn evaluate(
        &self,
        space: &CoordinateSpace,
        profiles: &BTreeMap<String, UserProfile>,
        assignments: &[(String, String)],
    ) -> Result<BTreeSet<String>> {
        for (c, v) in assignments {
            if !self.coords.contains(c) {
                return Err(ProfileError::UnknownCoordinate(c.clone()));
            }
            space.check(c, v)?;
        }
        Ok(self
            .base
            .iter()
            .filter(|u| assignments.iter().all(|(c, v)| profiles.get(*u).and_then(|p| p.get(c)) == Some(v.as_str())))
            .cloned()
            .collect())
    }
}

/// Users grouped by their tuple of coordinate values.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Segmentation {
    pub coords: Vec<String>,
    pub cells: BTreeMap<Vec<String>, BTreeSet<String>>,
}

impl Segmentation {
    /// Number of nonempty cells.
    pub fn degree(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_of(&self, user: &str) -> Option<&Vec<String>> {
        self.cells.iter().find(|(_, us)| us.contains(user)).map(|(k, _)| k)
    }
}

impl CoordinateSpace {
    pub fn segment_users<'a>(
        &self,
        users: impl IntoIterator<Item = &'a UserProfile>,
        coords: &[String],
    ) -> Result<Segmentation> {
        for c in coords {
            self.get(c)?;
        }
        let mut cells: BTreeMap<Vec<String>, BTreeSet<String>> = BTreeMap::new();
        for u in users {
            let key = coords
                .iter()
                .map(|c| {
                    u.get(c)
                        .map(str::to_string)
                        .ok_or_else(|| ProfileError::MissingCoordinate { user: u.user.clone(), coordinate: c.clone() })
                })
                .collect::<Result<Vec<_>>>()?;
            cells.entry(key).or_default().insert(u.user.clone());
        }
        Ok(Segmentation { coords: coords.to_vec(), cells })
    }
}

#[cfg(test)]
mod tests {
    use super::super::Coordinate;
    use super::*;

    fn space() -> CoordinateSpace {
        let mut s = CoordinateSpace::new();
        s.declare(Coordinate::new("s", &["higraph", "mmedia"])).unwrap();
        s.declare(Coordinate::new("p", &["unregistered", "registered", "corporate"])).unwrap();
        s
    }

    fn profiles() -> BTreeMap<String, UserProfile> {
        [
            UserProfile::new("ann").with("s", "higraph").with("p", "registered"),
            UserProfile::new("bob").with("s", "mmedia").with("p", "registered"),
            UserProfile::new("cy").with("s", "higraph").with("p", "corporate"),
        ]
        .into_iter()
        .map(|p| (p.user.clone(), p))
        .collect()
    }

    #[test]
    fn functional_narrows_by_assignment() {
        let sp = space();
        let ps = profiles();
        let f = Functional::new("f", &["s", "p"], ps.keys().cloned());
        let all = f.evaluate(&sp, &ps, &[]).unwrap();
        assert_eq!(all.len(), 3);
        let hi = f.evaluate(&sp, &ps, &[("s".into(), "higraph".into())]).unwrap();
        assert_eq!(hi, BTreeSet::from(["ann".to_string(), "cy".to_string()]));
        let one = f.evaluate(&sp, &ps, &[("s".into(), "higraph".into()), ("p".into(), "corporate".into())]).unwrap();
        assert_eq!(one, BTreeSet::from(["cy".to_string()]));
        let g = Functional::new("g", &["s"], ps.keys().cloned());
        assert!(matches!(
            g.evaluate(&sp, &ps, &[("p".into(), "corporate".into())]),
            Err(ProfileError::UnknownCoordinate(_))
        ));
    }

    #[test]
    fn segmentation_counts_nonempty_cells() {
        let sp = space();
        let ps = profiles();
        let seg = sp.segment_users(ps.values(), &["s".into(), "p".into()]).unwrap();
        assert_eq!(seg.degree(), 3);
        let seg = sp.segment_users(ps.values(), &["s".into()]).unwrap();
        assert_eq!(seg.degree(), 2);
        assert_eq!(seg.cell_of("cy"), Some(&vec!["higraph".to_string()]));
        let seg = sp.segment_users(ps.values(), &[]).unwrap();
        assert_eq!(seg.degree(), 1);
        let lone = UserProfile::new("z");
        assert!(matches!(sp.segment_users([&lone], &["s".into()]), Err(ProfileError::MissingCoordinate { .. })));
    }
}
