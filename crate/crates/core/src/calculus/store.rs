use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use super::{CalcError, Result, SortSpec};
use crate::value::{ObjectRef, Oid, TypeTag, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attribute {
    pub name: String,
    pub range: TypeTag,
}

/// A named collection of attribute functions over one definition area, the concept's
/// extent. Each attribute keeps its own value range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Concept {
    pub name: String,
    pub attributes: Vec<Attribute>,
    /// Identifying attribute names, in attribute declaration order.
    pub identifying: Vec<String>,
}

impl Concept {
    pub fn new(name: impl Into<String>) -> Self {
        Concept { name: name.into(), attributes: Vec::new(), identifying: Vec::new() }
    }

    pub fn attr(mut self, name: &str, range: TypeTag) -> Self {
        self.attributes.push(Attribute { name: name.into(), range });
        self
    }

    pub fn key(mut self, name: &str, range: TypeTag) -> Self {
        self.identifying.push(name.into());
        self.attr(name, range)
    }

    pub fn attribute(&self, name: &str) -> Option<&Attribute> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn is_identifying(&self, name: &str) -> bool {
        self.identifying.iter().any(|k| k == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Individual {
    pub oid: Oid,
    pub concept: String,
    pub identity: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct State {
    pub owner: Oid,
    pub version: u32,
    /// Attribute values, identifying ones included. Unset attributes are absent.
    pub values: BTreeMap<String, Value>,
    pub cause: String,
}

/// Per-individual version pins; unpinned individuals evaluate at their latest state.
pub type VersionPins = BTreeMap<Oid, u32>;

/// Level-0 universe: concepts, their extents and every state ever recorded.
#[derive(Debug, Clone, Default)]
pub struct Store {
    concepts: BTreeMap<String, Concept>,
    concept_order: Vec<String>,
    enums: BTreeMap<String, Vec<String>>,
    individuals: BTreeMap<Oid, Individual>,
    identities: HashMap<(String, Vec<Value>), Oid>,
    extents: BTreeMap<String, Vec<Oid>>,
    histories: BTreeMap<Oid, Vec<State>>,
    next_oid: u64,
}

impl Store {
    pub fn new() -> Self {
        Store::default()
    }

    pub fn define_concept(&mut self, spec: Concept) -> Result<&Concept> {
        if self.concepts.contains_key(&spec.name) {
            return Err(CalcError::DuplicateConcept(spec.name));
        }
        if self.enums.contains_key(&spec.name) {
            return Err(CalcError::BadSpec(format!("`{}` already names an enum", spec.name)));
        }
        let mut seen = BTreeSet::new();
        for a in &spec.attributes {
            if !seen.insert(a.name.as_str()) {
                return Err(CalcError::BadSpec(format!("duplicate attribute `{}`", a.name)));
            }
        }
        if spec.identifying.is_empty() {
            return Err(CalcError::BadSpec(format!("`{}` has no identifying attribute", spec.name)));
        }
        let mut keys = BTreeSet::new();
        for k in &spec.identifying {
            if !seen.contains(k.as_str()) {
                return Err(CalcError::BadSpec(format!("identifying `{k}` is not an attribute")));
            }
            if !keys.insert(k.as_str()) {
                return Err(CalcError::BadSpec(format!("identifying `{k}` listed twice")));
            }
        }
        let mut new_enums = BTreeMap::new();
        for a in &spec.attributes {
            match &a.range {
                TypeTag::Enum { name, values } => {
                    let distinct: BTreeSet<_> = values.iter().collect();
                    if values.is_empty() || distinct.len() != values.len() {
                        return Err(CalcError::BadSpec(format!("enum `{name}` must be nonempty and duplicate-free")));
                    }
                    if name == &spec.name || self.concepts.contains_key(name) {
                        return Err(CalcError::BadSpec(format!("enum `{name}` clashes with a concept")));
                    }
                    let known = self.enums.get(name).or_else(|| new_enums.get(name));
                    match known {
                        Some(existing) if existing != values => {
                            return Err(CalcError::BadSpec(format!("enum `{name}` redefined with different values")))
                        }
                        Some(_) => {}
                        None => {
                            new_enums.insert(name.clone(), values.clone());
                        }
                    }
                }
                TypeTag::ConceptRef(c) if c != &spec.name && !self.concepts.contains_key(c) => {
                    return Err(CalcError::BadSpec(format!("unresolved concept reference `{c}`")));
                }
                _ => {}
            }
        }
        // Keep identifying in declaration order so positional keys are stable.
        let mut spec = spec;
        let ident: BTreeSet<String> = spec.identifying.drain(..).collect();
        spec.identifying = spec.attributes.iter().filter(|a| ident.contains(&a.name)).map(|a| a.name.clone()).collect();

        self.enums.extend(new_enums);
        let name = spec.name.clone();
        self.extents.insert(name.clone(), Vec::new());
        self.concept_order.push(name.clone());
        Ok(self.concepts.entry(name).or_insert(spec))
    }

    pub fn concept(&self, name: &str) -> Result<&Concept> {
        self.concepts.get(name).ok_or_else(|| CalcError::UnknownConcept(name.to_string()))
    }

    /// Concepts in definition order.
    pub fn concepts(&self) -> impl Iterator<Item = &Concept> {
        self.concept_order.iter().map(|n| &self.concepts[n])
    }

    pub fn enum_values(&self, name: &str) -> Option<&[String]> {
        self.enums.get(name).map(Vec::as_slice)
    }

    pub fn has_concept(&self, name: &str) -> bool {
        self.concepts.contains_key(name)
    }

    pub fn check_value(&self, attribute: &str, range: &TypeTag, value: &Value) -> Result<()> {
        let ok = match (range, value) {
            (TypeTag::Boolean, Value::Bool(_)) => true,
            (TypeTag::Integer, Value::Int(_)) => true,
            (TypeTag::Text, Value::Text(_)) => true,
            (TypeTag::Enum { values, .. }, Value::Text(s)) => values.iter().any(|v| v == s),
            (TypeTag::ConceptRef(c), Value::Obj(r)) => {
                r.oid().and_then(|oid| self.individuals.get(&oid)).is_some_and(|ind| &ind.concept == c)
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(CalcError::TypeMismatch {
                attribute: attribute.to_string(),
                expected: range.to_string(),
                got: value.to_string(),
            })
        }
    }

    pub fn assert_individual(&mut self, concept: &str, identity: BTreeMap<String, Value>) -> Result<&Individual> {
        let spec = self.concept(concept)?;
        let expected = spec.identifying.clone();
        if identity.len() != expected.len() || !expected.iter().all(|k| identity.contains_key(k)) {
            return Err(CalcError::IncompleteIdentity { concept: concept.to_string(), expected });
        }
        for k in &expected {
            let range = &spec.attribute(k).expect("identifying attribute exists").range;
            self.check_value(k, range, &identity[k])?;
        }
        let key: Vec<Value> = expected.iter().map(|k| identity[k].clone()).collect();
        let index_key = (concept.to_string(), key);
        if self.identities.contains_key(&index_key) {
            return Err(CalcError::DuplicateIdentity {
                concept: concept.to_string(),
                identity: render_key(&index_key.1),
            });
        }
        self.next_oid += 1;
        let oid = Oid(self.next_oid);
        self.identities.insert(index_key, oid);
        self.extents.get_mut(concept).expect("extent exists").push(oid);
        self.histories
            .insert(oid, vec![State { owner: oid, version: 1, values: identity.clone(), cause: "assert".into() }]);
        self.individuals.insert(oid, Individual { oid, concept: concept.to_string(), identity });
        Ok(&self.individuals[&oid])
    }

    pub fn transition_state(&mut self, oid: Oid, cause: &str, updates: BTreeMap<String, Value>) -> Result<&State> {
        let ind = self.individual(oid)?;
        let spec = &self.concepts[&ind.concept];
        for (name, value) in &updates {
            let attr = spec.attribute(name).ok_or_else(|| CalcError::UnknownAttribute {
                object: format!("{}#{}", spec.name, oid),
                attribute: name.clone(),
            })?;
            if spec.is_identifying(name) {
                return Err(CalcError::IdentityMutation(name.clone()));
            }
            self.check_value(name, &attr.range, value)?;
        }
        let history = self.histories.get_mut(&oid).expect("history exists");
        let last = history.last().expect("nonempty history");
        let mut values = last.values.clone();
        values.extend(updates);
        let next = State { owner: oid, version: last.version + 1, values, cause: cause.to_string() };
        history.push(next);
        Ok(history.last().expect("just pushed"))
    }

    pub fn individual(&self, oid: Oid) -> Result<&Individual> {
        self.individuals.get(&oid).ok_or_else(|| CalcError::UnknownIndividual(oid.to_string()))
    }

    /// Looks an individual up by its identifying values, in identifying-attribute order.
    pub fn lookup(&self, concept: &str, key: &[Value]) -> Result<Oid> {
        self.concept(concept)?;
        self.identities
            .get(&(concept.to_string(), key.to_vec()))
            .copied()
            .ok_or_else(|| CalcError::UnknownIndividual(format!("{concept}[{}]", render_key(key))))
    }

    pub fn extent(&self, concept: &str) -> Result<&[Oid]> {
        self.extents.get(concept).map(Vec::as_slice).ok_or_else(|| CalcError::UnknownConcept(concept.to_string()))
    }

    /// All individuals, oid ascending.
    pub fn individuals(&self) -> impl Iterator<Item = &Individual> {
        self.individuals.values()
    }

    pub fn len(&self) -> usize {
        self.individuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.individuals.is_empty()
    }

    pub fn history(&self, oid: Oid) -> Result<&[State]> {
        self.histories.get(&oid).map(Vec::as_slice).ok_or_else(|| CalcError::UnknownIndividual(oid.to_string()))
    }

    pub fn latest(&self, oid: Oid) -> Result<&State> {
        Ok(self.history(oid)?.last().expect("nonempty history"))
    }

    pub fn state_at(&self, oid: Oid, pins: Option<&VersionPins>) -> Result<&State> {
        let history = self.history(oid)?;
        match pins.and_then(|p| p.get(&oid)) {
            None => Ok(history.last().expect("nonempty history")),
            Some(&v) => {
                history.get((v as usize).wrapping_sub(1)).ok_or(CalcError::UnknownVersion { oid: oid.0, version: v })
            }
        }
    }

    /// Value of `attribute` for `oid` under the pins, `None` when unset.
    pub fn attribute_value(&self, oid: Oid, attribute: &str, pins: Option<&VersionPins>) -> Result<Option<&Value>> {
        let ind = self.individual(oid)?;
        if self.concepts[&ind.concept].attribute(attribute).is_none() {
            return Err(CalcError::UnknownAttribute {
                object: self.describe_oid(oid),
                attribute: attribute.to_string(),
            });
        }
        Ok(self.state_at(oid, pins)?.values.get(attribute))
    }

    pub fn state_count(&self) -> usize {
        self.histories.values().map(Vec::len).sum()
    }

    /// Human-readable `Concept["key"]` rendering of an individual.
    pub fn describe_oid(&self, oid: Oid) -> String {
        match self.individuals.get(&oid) {
            Some(ind) => {
                let spec = &self.concepts[&ind.concept];
                let key: Vec<Value> = spec.identifying.iter().map(|k| ind.identity[k].clone()).collect();
                format!("{}[{}]", ind.concept, render_key(&key))
            }
            None => format!("@0:{}", oid.0),
        }
    }

    /// Builds a sort specification, resolving concept references against current extents.
    pub fn sort_spec<I, S>(&self, index: I, target: &TypeTag) -> Result<SortSpec>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        match target {
            TypeTag::ConceptRef(c) => {
                let values = self.extent(c)?.iter().map(|&o| Value::Obj(ObjectRef::data(o))).collect();
                Ok(SortSpec::new(index, values))
            }
            other => SortSpec::from_type(index, other),
        }
    }
}

fn render_key(key: &[Value]) -> String {
    key.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

impl fmt::Display for Concept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "concept {} {{ ", self.name)?;
        for (i, a) in self.attributes.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{}: {}", a.name, a.range)?;
            if self.is_identifying(&a.name) {
                f.write_str(" key")?;
            }
        }
        f.write_str(" }")
    }
}
