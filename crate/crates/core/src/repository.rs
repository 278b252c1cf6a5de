//! A repository bundles one level-0 store, its frame network and its metadata tower,
//! and tracks mutation stamps so cached meta extensions can detect staleness.

use std::collections::{BTreeMap, BTreeSet};

use crate::calculus::{self, CalcError, Concept, Domain, Formula, Store, Term, Universe, VersionPins};
use crate::frames::{Ack, Frame, FrameError, FrameNetwork};
use crate::tower::{MetaObject, Tower};
use crate::value::{ObjectRef, Oid, Value};

#[derive(Debug, Clone)]
pub struct Repository {
    name: String,
    pub(crate) store: Store,
    pub(crate) network: FrameNetwork,
    pub(crate) tower: Tower,
    critical: BTreeSet<String>,
    revision: u64,
    /// `level_stamps[j]` is the revision of the latest write that changed level `j`.
    level_stamps: Vec<u64>,
}

impl Repository {
    pub fn new(name: &str) -> Self {
        Repository::with_max_level(name, Tower::DEFAULT_MAX_LEVEL)
    }

    pub fn with_max_level(name: &str, max_level: u32) -> Self {
        Repository {
            name: name.to_string(),
            store: Store::new(),
            network: FrameNetwork::new(),
            tower: Tower::new(max_level),
            critical: BTreeSet::new(),
            revision: 0,
            level_stamps: vec![0],
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn network(&self) -> &FrameNetwork {
        &self.network
    }

    pub fn tower(&self) -> &Tower {
        &self.tower
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    /// Marks a write at `level` and returns the new revision.
    pub(crate) fn touch(&mut self, level: u32) -> u64 {
        self.revision += 1;
        let level = level as usize;
        if self.level_stamps.len() <= level {
            self.level_stamps.resize(level + 1, 0);
        }
        self.level_stamps[level] = self.revision;
        self.revision
    }

    /// Latest write stamp among levels strictly below `level`.
    pub(crate) fn stamp_below(&self, level: u32) -> u64 {
        self.level_stamps.iter().take(level as usize).copied().max().unwrap_or(0)
    }

    pub fn mark_critical(&mut self, name: &str) {
        self.critical.insert(name.to_string());
    }

    pub fn is_critical(&self, name: &str) -> bool {
        self.critical.contains(name)
    }

    pub fn critical(&self) -> &BTreeSet<String> {
        &self.critical
    }

    pub fn snapshot(&self) -> Snapshot<'_> {
        Snapshot { repo: self, pins: None }
    }

    pub fn pinned<'a>(&'a self, pins: &'a VersionPins) -> Snapshot<'a> {
        Snapshot { repo: self, pins: Some(pins) }
    }

    // ---- level-0 writes ----

    pub fn define_concept(&mut self, spec: Concept) -> Result<(), CalcError> {
        if self.tower.by_name(&spec.name).is_some() || self.network.constant(&spec.name).is_some() {
            return Err(CalcError::BadSpec(format!("`{}` is already a name in this repository", spec.name)));
        }
        self.store.define_concept(spec)?;
        self.touch(0);
        Ok(())
    }

    pub fn assert_individual(&mut self, concept: &str, identity: BTreeMap<String, Value>) -> Result<Oid, CalcError> {
        let oid = self.store.assert_individual(concept, identity)?.oid;
        self.touch(0);
        Ok(oid)
    }

    pub fn transition_state(
        &mut self,
        oid: Oid,
        cause: &str,
        updates: BTreeMap<String, Value>,
    ) -> Result<u32, CalcError> {
        let version = self.store.transition_state(oid, cause, updates)?.version;
        self.touch(0);
        Ok(version)
    }

    /// Resolves a value-position term of a statement (literal, constant or individual).
    pub fn resolve_value(&self, term: &Term) -> Result<Value, FrameError> {
        self.network.resolve_ground(term, &self.store)
    }

    pub fn resolve_individual(&self, term: &Term) -> Result<Oid, FrameError> {
        self.resolve_value(term)?
            .as_obj()
            .and_then(|r| r.oid())
            .ok_or_else(|| FrameError::UnresolvedTerm(term.to_string()))
    }

    pub fn declare_predicate(&mut self, name: &str) -> Result<(), FrameError> {
        self.network.declare_predicate(name)?;
        self.touch(0);
        Ok(())
    }

    pub fn declare_constant(&mut self, name: &str, value: &Term) -> Result<(), FrameError> {
        let v = self.resolve_value(value)?;
        self.network.declare_constant(name, v)?;
        self.touch(0);
        Ok(())
    }

    pub fn assert_frame(&mut self, frame: &Frame) -> Result<Ack, FrameError> {
        let ack = self.network.assert_frame(frame, &self.store)?;
        if ack.changed {
            self.touch(0);
        }
        Ok(ack)
    }

    pub fn retract_frame(&mut self, frame: &Frame) -> Result<Ack, FrameError> {
        let ack = self.network.retract_frame(frame, &self.store)?;
        if ack.changed {
            self.touch(0);
        }
        Ok(ack)
    }

    pub fn eval_frame(&self, frame: &Frame) -> Result<bool, FrameError> {
        self.network.eval_frame(frame, &self.store)
    }

    pub fn query(&self, pattern: &Frame) -> Result<Vec<crate::frames::Binding>, FrameError> {
        self.network.query(pattern, &self.store)
    }

    // ---- evaluation ----

    pub fn comprehend(&self, phi: &Formula, var: &str, domain: &Domain) -> Result<Vec<Value>, CalcError> {
        calculus::comprehend(&self.snapshot(), phi, var, domain)
    }

    pub fn comprehend_pinned(
        &self,
        phi: &Formula,
        var: &str,
        domain: &Domain,
        pins: &VersionPins,
    ) -> Result<Vec<Value>, CalcError> {
        calculus::comprehend(&self.pinned(pins), phi, var, domain)
    }

    pub fn individualize(&self, phi: &Formula, var: &str, domain: &Domain) -> Result<Value, CalcError> {
        calculus::individualize(&self.snapshot(), phi, var, domain)
    }

    /// Canonical text for a value: individuals render as `Concept["key"]`.
    pub fn display_value(&self, v: &Value) -> String {
        match v {
            Value::Obj(r) if r.is_data() => self.store.describe_oid(Oid(r.id)),
            Value::Obj(r) => self.tower.get(r.id).map(|m| m.name.clone()).unwrap_or_else(|| r.to_string()),
            Value::Text(s) => s.clone(),
            other => other.to_string(),
        }
    }

    /// Concept of a level-0 object.
    pub fn concept_of(&self, r: ObjectRef) -> Option<&str> {
        r.oid().and_then(|oid| self.store.individual(oid).ok()).map(|i| i.concept.as_str())
    }
}

/// An evaluation interpretation: the repository as of now, optionally with state pins.
#[derive(Clone, Copy)]
pub struct Snapshot<'a> {
    repo: &'a Repository,
    pins: Option<&'a VersionPins>,
}

impl<'a> Snapshot<'a> {
    /// Current extension of a meta object, using the cache when it is fresh.
    pub(crate) fn extension(&self, meta: &MetaObject) -> Result<Vec<ObjectRef>, CalcError> {
        if self.pins.is_none() && meta.computed_at >= self.repo.stamp_below(meta.level) {
            return Ok(meta.extension.clone());
        }
        self.compute_extension(meta)
    }

    pub(crate) fn compute_extension(&self, meta: &MetaObject) -> Result<Vec<ObjectRef>, CalcError> {
        let hits = calculus::comprehend(self, &meta.defining, &meta.var, &meta.domain)?;
        Ok(hits.iter().filter_map(Value::as_obj).collect())
    }

    fn contains(&self, meta: &MetaObject, element: ObjectRef) -> Result<bool, CalcError> {
        if self.pins.is_none() && meta.computed_at >= self.repo.stamp_below(meta.level) {
            return Ok(meta.extension.binary_search(&element).is_ok());
        }
        Ok(self.compute_extension(meta)?.contains(&element))
    }

    fn meta(&self, r: ObjectRef) -> Result<&'a MetaObject, CalcError> {
        self.repo.tower.get(r.id).filter(|m| m.level == r.level).ok_or_else(|| CalcError::NotAnObject(r.to_string()))
    }
}

impl Universe for Snapshot<'_> {
    fn elements(&self, domain: &Domain) -> Result<Vec<Value>, CalcError> {
        let store = &self.repo.store;
        match domain {
            Domain::Named(n) if store.has_concept(n) => {
                Ok(store.extent(n)?.iter().map(|&o| Value::Obj(ObjectRef::data(o))).collect())
            }
            Domain::Named(n) => match store.enum_values(n) {
                Some(vals) => Ok(vals.iter().map(Value::text).collect()),
                None => Err(CalcError::UnknownDomain(n.clone())),
            },
            Domain::Level(0) => Ok(store.individuals().map(|i| Value::Obj(ObjectRef::data(i.oid))).collect()),
            Domain::Level(j) => {
                if !self.repo.tower.level_exists(*j) {
                    return Err(CalcError::UnknownDomain(domain.to_string()));
                }
                Ok(self.repo.tower.at_level(*j).map(|m| Value::Obj(m.object_ref())).collect())
            }
        }
    }

    fn attribute(&self, object: &Value, attribute: &str) -> Result<Option<Value>, CalcError> {
        let r = object.as_obj().ok_or_else(|| CalcError::NotAnObject(object.to_string()))?;
        if r.is_data() {
            return Ok(self.repo.store.attribute_value(Oid(r.id), attribute, self.pins)?.cloned());
        }
        let meta = self.meta(r)?;
        match attribute {
            "name" => Ok(Some(Value::text(&meta.name))),
            "level" => Ok(Some(Value::Int(meta.level as i64))),
            "size" => Ok(Some(Value::Int(self.extension(meta)?.len() as i64))),
            other => match other.parse::<crate::tower::DescriptorKey>() {
                Ok(key) => Ok(meta.descriptors.get(&key).map(Value::text)),
                Err(_) => Err(CalcError::UnknownAttribute { object: meta.name.clone(), attribute: other.into() }),
            },
        }
    }

    fn frame(&self, predicate: &str, subject: &Value, object: &Value) -> Result<bool, CalcError> {
        self.repo
            .network
            .holds(predicate, subject, object)
            .map_err(|_| CalcError::UnknownPredicate(predicate.to_string()))
    }

    fn member(&self, set: &Value, element: &Value) -> Result<bool, CalcError> {
        let r = set.as_obj().filter(|r| !r.is_data()).ok_or_else(|| CalcError::NotAnObject(set.to_string()))?;
        let meta = self.meta(r)?;
        match element.as_obj() {
            Some(e) => self.contains(meta, e),
            None => Ok(false),
        }
    }

    fn name(&self, name: &str) -> Option<Value> {
        self.repo
            .network
            .constant(name)
            .cloned()
            .or_else(|| self.repo.tower.by_name(name).map(|m| Value::Obj(m.object_ref())))
    }

    fn individual(&self, concept: &str, key: &[Value]) -> Result<Value, CalcError> {
        self.repo.store.lookup(concept, key).map(|o| Value::Obj(ObjectRef::data(o)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::CmpOp;
    use crate::value::TypeTag;

    fn hr() -> Repository {
        let mut r = Repository::new("hr");
        r.define_concept(
            Concept::new("Employee")
                .key("name", TypeTag::Text)
                .attr("dept", TypeTag::Text)
                .attr("grade", TypeTag::Integer),
        )
        .unwrap();
        for (n, d, g) in [("ivanov", "IT", 12), ("petrov", "HR", 7), ("sidorov", "IT", 9)] {
            let oid = r.assert_individual("Employee", BTreeMap::from([("name".into(), Value::text(n))])).unwrap();
            r.transition_state(
                oid,
                "hire",
                BTreeMap::from([("dept".into(), Value::text(d)), ("grade".into(), Value::Int(g))]),
            )
            .unwrap();
        }
        r.declare_predicate("worksIn").unwrap();
        r.declare_constant("HQ", &Term::lit("HQ")).unwrap();
        r
    }

    #[test]
    fn comprehension_over_concept_extent() {
        let r = hr();
        let phi = Formula::cmp(CmpOp::Eq, Term::name("dept"), Term::lit("IT"));
        let hits = r.comprehend(&phi, "x", &Domain::Named("Employee".into())).unwrap();
        let names: Vec<String> = hits.iter().map(|v| r.display_value(v)).collect();
        assert_eq!(names, vec![r#"Employee["ivanov"]"#, r#"Employee["sidorov"]"#]);
    }

    #[test]
    fn unknown_domain() {
        let r = hr();
        assert_eq!(
            r.comprehend(&Formula::True, "x", &Domain::Named("Nope".into())),
            Err(CalcError::UnknownDomain("Nope".into()))
        );
        assert!(r.comprehend(&Formula::True, "x", &Domain::Level(1)).is_err());
    }

    #[test]
    fn frames_inside_formulas_match_eval_frame() {
        let mut r = hr();
        let f =
            Frame::new("worksIn", Term::Individual("Employee".into(), vec![Value::text("ivanov")]), Term::name("HQ"));
        r.assert_frame(&f).unwrap();
        let phi = Formula::frame("worksIn", Term::name("x"), Term::name("HQ"));
        let hits = r.comprehend(&phi, "x", &Domain::Level(0)).unwrap();
        assert_eq!(hits.len(), 1);
        assert!(r.eval_frame(&f).unwrap());
    }

    #[test]
    fn version_pins_change_the_interpretation() {
        let r = hr();
        let phi = Formula::cmp(CmpOp::Le, Term::lit(9i64), Term::attr("x", "grade"));
        let d = Domain::Named("Employee".into());
        assert_eq!(r.comprehend(&phi, "x", &d).unwrap().len(), 2);
        let pins = VersionPins::from([(Oid(1), 1), (Oid(3), 1)]);
        assert!(r.comprehend_pinned(&phi, "x", &d, &pins).unwrap().is_empty());
    }

    #[test]
    fn individualize_by_identity() {
        let r = hr();
        let phi = Formula::cmp(CmpOp::Eq, Term::attr("x", "name"), Term::lit("petrov"));
        let v = r.individualize(&phi, "x", &Domain::Named("Employee".into())).unwrap();
        assert_eq!(r.display_value(&v), r#"Employee["petrov"]"#);
    }
}
