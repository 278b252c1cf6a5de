//! Level-indexed metadata. A level-`j+1` meta object is a predicate character over the
//! level-`j` universe, defined by comprehension; its extension is cached with the
//! revision it was computed at and recomputed once any lower level has been written.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::calculus::{self, CalcError, Domain, Formula, Universe};
use crate::repository::Repository;
use crate::value::{ObjectRef, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TowerError {
    #[error("level {0} does not exist")]
    UnknownLevel(u32),
    #[error("level {requested} exceeds the configured maximum {max}")]
    LevelLimit { requested: u32, max: u32 },
    #[error("meta object `{name}` declared at level {declared} but its domain is level {domain}")]
    LevelMismatch { name: String, declared: u32, domain: u32 },
    #[error("name `{0}` is already in use")]
    NameClash(String),
    #[error("unknown object {0}")]
    UnknownObject(ObjectRef),
    #[error("bad domain `{0}` for a meta object")]
    BadDomain(String),
    #[error("defining formula of `{name}` refers to level {level} or above")]
    SelfReference { name: String, level: u32 },
    #[error(transparent)]
    Calc(#[from] CalcError),
}

pub type Result<T, E = TowerError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DescriptorKey {
    Dimensions,
    Integrity,
    Access,
    Display,
}

impl DescriptorKey {
    pub const ALL: [DescriptorKey; 4] =
        [DescriptorKey::Dimensions, DescriptorKey::Integrity, DescriptorKey::Access, DescriptorKey::Display];

    pub fn as_str(self) -> &'static str {
        match self {
            DescriptorKey::Dimensions => "dimensions",
            DescriptorKey::Integrity => "integrity",
            DescriptorKey::Access => "access",
            DescriptorKey::Display => "display",
        }
    }
}

impl FromStr for DescriptorKey {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "dimensions" => Ok(DescriptorKey::Dimensions),
            "integrity" | "integrity-constraints" => Ok(DescriptorKey::Integrity),
            "access" | "access-rights" => Ok(DescriptorKey::Access),
            "display" | "display-hints" => Ok(DescriptorKey::Display),
            other => Err(format!("unknown descriptor `{other}`")),
        }
    }
}

impl fmt::Display for DescriptorKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub type Descriptors = BTreeMap<DescriptorKey, String>;

/// Request to build a meta object: `{ var : domain | defining }` plus descriptors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetaSpec {
    pub name: String,
    pub domain: Domain,
    pub var: String,
    pub defining: Formula,
    pub descriptors: Descriptors,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetaObject {
    pub id: u64,
    pub name: String,
    pub level: u32,
    pub domain: Domain,
    pub var: String,
    pub defining: Formula,
    pub descriptors: Descriptors,
    /// Sorted level-`level-1` object refs.
    pub extension: Vec<ObjectRef>,
    pub computed_at: u64,
}

impl MetaObject {
    pub fn object_ref(&self) -> ObjectRef {
        ObjectRef::meta(self.level, self.id)
    }
}

#[derive(Debug, Clone)]
pub struct Tower {
    max_level: u32,
    metas: BTreeMap<u64, MetaObject>,
    names: BTreeMap<String, u64>,
    next_id: u64,
}

impl Tower {
    pub const DEFAULT_MAX_LEVEL: u32 = 3;

    pub fn new(max_level: u32) -> Self {
        Tower { max_level, metas: BTreeMap::new(), names: BTreeMap::new(), next_id: 0 }
    }

    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    pub fn level_exists(&self, j: u32) -> bool {
        j == 0 || self.metas.values().any(|m| m.level == j)
    }

    /// Highest populated level (0 when there is no metadata).
    pub fn top_level(&self) -> u32 {
        self.metas.values().map(|m| m.level).max().unwrap_or(0)
    }

    pub fn get(&self, id: u64) -> Option<&MetaObject> {
        self.metas.get(&id)
    }

    pub fn by_name(&self, name: &str) -> Option<&MetaObject> {
        self.names.get(name).map(|id| &self.metas[id])
    }

    pub fn at_level(&self, j: u32) -> impl Iterator<Item = &MetaObject> {
        self.metas.values().filter(move |m| m.level == j)
    }

    pub fn iter(&self) -> impl Iterator<Item = &MetaObject> {
        self.metas.values()
    }

    pub fn len(&self) -> usize {
        self.metas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.metas.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryOp {
    Comprehend,
    Individualize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryResult {
    Set(Vec<Value>),
    One(Value),
}

/// What `describe` reports for an object.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Description {
    /// Level-0 object: the level-1 meta objects whose extension contains it.
    Data(Vec<(String, Descriptors)>),
    /// Meta object: its own descriptors.
    Meta(Descriptors),
}

impl Repository {
    /// Builds a level-`j+1` meta object over the level-`j` domain named in `spec`.
    pub fn lift(&mut self, spec: MetaSpec) -> Result<ObjectRef> {
        let j = match &spec.domain {
            Domain::Named(n) if self.store.has_concept(n) => 0,
            Domain::Named(n) => return Err(TowerError::BadDomain(n.clone())),
            Domain::Level(j) => *j,
        };
        if !self.tower.level_exists(j) {
            return Err(TowerError::UnknownLevel(j));
        }
        let level = j + 1;
        if level > self.tower.max_level {
            return Err(TowerError::LevelLimit { requested: level, max: self.tower.max_level });
        }
        if self.tower.names.contains_key(&spec.name)
            || self.store.has_concept(&spec.name)
            || self.network.constant(&spec.name).is_some()
        {
            return Err(TowerError::NameClash(spec.name));
        }
        let upward_domain = spec.defining.domains().iter().any(|d| matches!(d, Domain::Level(k) if *k > j));
        let upward_name =
            spec.defining.names().iter().any(|n| n == &spec.name || self.tower.by_name(n).is_some_and(|m| m.level > j));
        if upward_domain || upward_name {
            return Err(TowerError::SelfReference { name: spec.name, level });
        }

        // Compute first so a failing formula leaves the tower untouched.
        let mut meta = MetaObject {
            id: self.tower.next_id + 1,
            name: spec.name,
            level,
            domain: spec.domain,
            var: spec.var,
            defining: spec.defining,
            descriptors: spec.descriptors,
            extension: Vec::new(),
            computed_at: 0,
        };
        let extension = self.snapshot().compute_extension(&meta)?;
        meta.extension = extension;
        meta.computed_at = self.touch(level);
        self.tower.next_id = meta.id;
        let r = meta.object_ref();
        self.tower.names.insert(meta.name.clone(), meta.id);
        self.tower.metas.insert(meta.id, meta);
        Ok(r)
    }

    /// Recomputes stale extensions at levels `<= up_to`, lowest level first.
    fn refresh_extensions(&mut self, up_to: u32) -> Result<()> {
        for level in 1..=up_to.min(self.tower.top_level()) {
            let stamp = self.stamp_below(level);
            let stale: Vec<u64> = self.tower.at_level(level).filter(|m| m.computed_at < stamp).map(|m| m.id).collect();
            for id in stale {
                let ext = self.snapshot().compute_extension(&self.tower.metas[&id])?;
                let now = self.revision();
                let meta = self.tower.metas.get_mut(&id).expect("stale id exists");
                meta.extension = ext;
                meta.computed_at = now;
            }
        }
        Ok(())
    }

    pub fn meta(&self, r: ObjectRef) -> Result<&MetaObject> {
        self.tower.get(r.id).filter(|m| m.level == r.level && r.level > 0).ok_or(TowerError::UnknownObject(r))
    }

    /// Current extension, recomputed if any lower level changed since it was cached.
    pub fn extension_of(&mut self, r: ObjectRef) -> Result<Vec<ObjectRef>> {
        let level = self.meta(r)?.level;
        self.refresh_extensions(level)?;
        Ok(self.tower.metas[&r.id].extension.clone())
    }

    /// Comprehension or individualization with the level-`j` universe as domain.
    pub fn uniform_query(&self, op: QueryOp, phi: &Formula, var: &str, level: u32) -> Result<QueryResult> {
        if !self.tower.level_exists(level) {
            return Err(TowerError::UnknownLevel(level));
        }
        let domain = Domain::Level(level);
        let snap = self.snapshot();
        Ok(match op {
            QueryOp::Comprehend => QueryResult::Set(calculus::comprehend(&snap, phi, var, &domain)?),
            QueryOp::Individualize => QueryResult::One(calculus::individualize(&snap, phi, var, &domain)?),
        })
    }

    pub fn describe(&mut self, r: ObjectRef) -> Result<Description> {
        if r.is_data() {
            let exists = r.oid().is_some_and(|o| self.store.individual(o).is_ok());
            if !exists {
                return Err(TowerError::UnknownObject(r));
            }
            self.refresh_extensions(1)?;
            let out = self
                .tower
                .at_level(1)
                .filter(|m| m.extension.binary_search(&r).is_ok())
                .map(|m| (m.name.clone(), m.descriptors.clone()))
                .collect();
            return Ok(Description::Data(out));
        }
        Ok(Description::Meta(self.meta(r)?.descriptors.clone()))
    }

    /// Whether a cached extension is current with respect to lower-level writes.
    pub fn is_fresh(&self, r: ObjectRef) -> Result<bool> {
        let m = self.meta(r)?;
        Ok(m.computed_at >= self.stamp_below(m.level))
    }

    /// Number of level-`j` objects.
    pub fn universe_size(&self, j: u32) -> usize {
        let snap = self.snapshot();
        snap.elements(&Domain::Level(j)).map(|v| v.len()).unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{CmpOp, Concept, Term};
    use crate::value::{Oid, TypeTag};

    fn repo(grades: &[i64]) -> Repository {
        let mut r = Repository::new("hr");
        r.define_concept(Concept::new("Employee").key("name", TypeTag::Text).attr("grade", TypeTag::Integer)).unwrap();
        for (i, g) in grades.iter().enumerate() {
            let oid = r
                .assert_individual("Employee", BTreeMap::from([("name".into(), Value::text(format!("e{i}")))]))
                .unwrap();
            r.transition_state(oid, "hire", BTreeMap::from([("grade".into(), Value::Int(*g))])).unwrap();
        }
        r
    }

    fn spec(name: &str, domain: Domain, defining: Formula) -> MetaSpec {
        MetaSpec { name: name.into(), domain, var: "x".into(), defining, descriptors: Descriptors::new() }
    }

    fn high() -> Formula {
        Formula::cmp(CmpOp::Le, Term::lit(10i64), Term::name("grade"))
    }

    #[test]
    fn lift_true_covers_universe() {
        let mut r = repo(&[1, 2, 3]);
        let m = r.lift(spec("All", Domain::Level(0), Formula::True)).unwrap();
        assert_eq!(m.level, 1);
        assert_eq!(r.extension_of(m).unwrap().len(), 3);
    }

    #[test]
    fn levels_increment() {
        let mut r = repo(&[1]);
        let m1 = r.lift(spec("A", Domain::Level(0), Formula::True)).unwrap();
        let m2 = r.lift(spec("B", Domain::Level(1), Formula::True)).unwrap();
        assert_eq!((m1.level, m2.level), (1, 2));
        assert_eq!(r.extension_of(m2).unwrap(), vec![m1]);
        assert_eq!(r.lift(spec("C", Domain::Level(5), Formula::True)), Err(TowerError::UnknownLevel(5)));
    }

    #[test]
    fn level_cap() {
        let mut r = Repository::with_max_level("x", 1);
        r.lift(spec("A", Domain::Level(0), Formula::True)).unwrap();
        assert_eq!(
            r.lift(spec("B", Domain::Level(1), Formula::True)),
            Err(TowerError::LevelLimit { requested: 2, max: 1 })
        );
    }

    #[test]
    fn name_clash_and_self_reference() {
        let mut r = repo(&[1]);
        r.lift(spec("A", Domain::Level(0), Formula::True)).unwrap();
        assert_eq!(r.lift(spec("A", Domain::Level(0), Formula::True)), Err(TowerError::NameClash("A".into())));
        assert!(matches!(r.lift(spec("Employee", Domain::Level(0), Formula::True)), Err(TowerError::NameClash(_))));
        let selfref = Formula::Member { set: Term::name("Z"), element: Term::name("x") };
        assert!(matches!(r.lift(spec("Z", Domain::Level(0), selfref)), Err(TowerError::SelfReference { .. })));
        let up = Formula::exists("y", Domain::Level(1), Formula::True);
        assert!(matches!(r.lift(spec("U", Domain::Level(0), up)), Err(TowerError::SelfReference { .. })));
    }

    #[test]
    fn extension_follows_state_transitions() {
        let mut r = repo(&[12, 5, 11]);
        let m = r.lift(spec("High", Domain::Named("Employee".into()), high())).unwrap();
        let before = r.extension_of(m).unwrap();
        assert_eq!(before.len(), 2);
        r.transition_state(Oid(2), "promote", BTreeMap::from([("grade".into(), Value::Int(15))])).unwrap();
        assert!(!r.is_fresh(m).unwrap());
        let after = r.extension_of(m).unwrap();
        assert!(r.is_fresh(m).unwrap());
        let diff: Vec<_> = after.iter().filter(|x| !before.contains(x)).collect();
        assert_eq!(diff, vec![&ObjectRef::data(Oid(2))]);
    }

    #[test]
    fn empty_universe_has_empty_extension() {
        let mut r = repo(&[]);
        let m = r.lift(spec("All", Domain::Level(0), Formula::True)).unwrap();
        assert!(r.extension_of(m).unwrap().is_empty());
    }

    #[test]
    fn uniform_query_at_level_one() {
        let mut r = repo(&[1, 20]);
        r.lift(spec("A", Domain::Level(0), Formula::True)).unwrap();
        r.lift(spec("B", Domain::Level(0), high())).unwrap();
        match r.uniform_query(QueryOp::Comprehend, &Formula::True, "x", 1).unwrap() {
            QueryResult::Set(s) => assert_eq!(s.len(), 2),
            other => panic!("{other:?}"),
        }
        let by_name = Formula::cmp(CmpOp::Eq, Term::attr("x", "name"), Term::lit("B"));
        let one = r.uniform_query(QueryOp::Individualize, &by_name, "x", 1).unwrap();
        assert_eq!(one, QueryResult::One(Value::Obj(r.tower().by_name("B").unwrap().object_ref())));
        assert_eq!(r.uniform_query(QueryOp::Comprehend, &Formula::True, "x", 3), Err(TowerError::UnknownLevel(3)));
    }

    #[test]
    fn describe_data_and_meta() {
        let mut r = repo(&[12, 1]);
        let mut d = Descriptors::new();
        d.insert(DescriptorKey::Access, "managers".into());
        let high_spec = MetaSpec { descriptors: d.clone(), ..spec("High", Domain::Level(0), high()) };
        let h = r.lift(high_spec).unwrap();
        r.lift(spec("All", Domain::Level(0), Formula::True)).unwrap();
        let first = r.describe(ObjectRef::data(Oid(1))).unwrap();
        assert_eq!(first, Description::Data(vec![("High".into(), d.clone()), ("All".into(), Descriptors::new())]));
        let Description::Data(second) = r.describe(ObjectRef::data(Oid(2))).unwrap() else { panic!() };
        assert_eq!(second.len(), 1);
        assert_eq!(r.describe(h).unwrap(), Description::Meta(d));
        assert!(r.describe(ObjectRef::data(Oid(99))).is_err());
    }

    #[test]
    fn data_object_outside_every_extension() {
        let mut r = repo(&[1]);
        assert_eq!(r.describe(ObjectRef::data(Oid(1))).unwrap(), Description::Data(vec![]));
    }

    #[test]
    fn meta_attributes_are_queryable() {
        let mut r = repo(&[12, 1, 13]);
        r.lift(spec("High", Domain::Level(0), high())).unwrap();
        r.lift(spec("All", Domain::Level(0), Formula::True)).unwrap();
        let big = Formula::cmp(CmpOp::Lt, Term::lit(2i64), Term::attr("x", "size"));
        let QueryResult::Set(hits) = r.uniform_query(QueryOp::Comprehend, &big, "x", 1).unwrap() else { panic!() };
        assert_eq!(hits.len(), 1);
    }
}
