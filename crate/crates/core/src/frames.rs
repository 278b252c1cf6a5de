//! Semantic-network language `L = <R, C>`: dyadic predicates, constants, ground frame
//! facts under a closed-world interpretation, pattern queries and stored scenarios.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::calculus::{Formula, Store, Term};
use crate::value::{ObjectRef, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("{kind} `{name}` is already declared")]
    DuplicateName { kind: &'static str, name: String },
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("unresolved term `{0}`")]
    UnresolvedTerm(String),
    #[error("bad scenario `{name}`: {reason}")]
    BadScenario { name: String, reason: String },
}

pub type Result<T, E = FrameError> = std::result::Result<T, E>;

/// `R(subject, object)`; ground when neither term is a variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Frame {
    pub predicate: String,
    pub subject: Term,
    pub object: Term,
}

impl Frame {
    pub fn new(predicate: &str, subject: Term, object: Term) -> Self {
        Frame { predicate: predicate.to_string(), subject, object }
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}, {})", self.predicate, self.subject, self.object)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Language {
    pub predicates: BTreeSet<String>,
    pub constants: BTreeSet<String>,
}

/// The index `i` of `||.||_i`: pair sets for predicates and values for constants.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Interpretation {
    pub pairs: BTreeMap<String, BTreeSet<(Value, Value)>>,
    pub constants: BTreeMap<String, Value>,
}

impl Interpretation {
    pub fn holds(&self, predicate: &str, subject: &Value, object: &Value) -> Option<bool> {
        self.pairs.get(predicate).map(|set| set.contains(&(subject.clone(), object.clone())))
    }
}

/// Outcome of an assert or retract. `warning` is set when a retraction found nothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ack {
    pub changed: bool,
    pub warning: bool,
}

pub type Binding = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    AssertFrame(Frame),
    TransitionState { target: Term, cause: String, updates: Vec<(String, Term)> },
    RenderView(String),
    Deny(String),
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::AssertFrame(fr) => {
                write!(f, "assert-frame({}, {}, {})", fr.predicate, fr.subject, fr.object)
            }
            Action::TransitionState { target, cause, updates } => {
                write!(f, "transition-state({target}, {}", Value::text(cause))?;
                for (k, v) in updates {
                    write!(f, ", {k} = {v}")?;
                }
                f.write_str(")")
            }
            Action::RenderView(v) => write!(f, "render-view({})", Value::text(v)),
            Action::Deny(r) => write!(f, "deny({})", Value::text(r)),
        }
    }
}

/// A guarded script. The network stores and validates scenarios; the access gate runs them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub name: String,
    pub guard: Formula,
    pub steps: Vec<Action>,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "scenario {} when {} do ", self.name, self.guard)?;
        let steps: Vec<String> = self.steps.iter().map(ToString::to_string).collect();
        f.write_str(&steps.join(", "))
    }
}

#[derive(Debug, Clone, Default)]
pub struct FrameNetwork {
    language: Language,
    interp: Interpretation,
    scenarios: BTreeMap<String, Scenario>,
}

impl FrameNetwork {
    pub fn new() -> Self {
        FrameNetwork::default()
    }

    pub fn language(&self) -> &Language {
        &self.language
    }

    pub fn interpretation(&self) -> &Interpretation {
        &self.interp
    }

    pub fn declare_predicate(&mut self, name: &str) -> Result<()> {
        if !self.language.predicates.insert(name.to_string()) {
            return Err(FrameError::DuplicateName { kind: "predicate", name: name.to_string() });
        }
        self.interp.pairs.insert(name.to_string(), BTreeSet::new());
        Ok(())
    }

    pub fn declare_constant(&mut self, name: &str, value: Value) -> Result<()> {
        if !self.language.constants.insert(name.to_string()) {
            return Err(FrameError::DuplicateName { kind: "constant", name: name.to_string() });
        }
        self.interp.constants.insert(name.to_string(), value);
        Ok(())
    }

    pub fn constant(&self, name: &str) -> Option<&Value> {
        self.interp.constants.get(name)
    }

    pub fn has_predicate(&self, name: &str) -> bool {
        self.language.predicates.contains(name)
    }

    /// Resolves a ground term: a literal, a declared constant or an individual reference.
    pub fn resolve_ground(&self, term: &Term, store: &Store) -> Result<Value> {
        match term {
            Term::Lit(v) => Ok(v.clone()),
            Term::Name(n) => self.constant(n).cloned().ok_or_else(|| FrameError::UnresolvedTerm(n.clone())),
            Term::Individual(c, key) => store
                .lookup(c, key)
                .map(|oid| Value::Obj(ObjectRef::data(oid)))
                .map_err(|_| FrameError::UnresolvedTerm(term.to_string())),
            Term::Attr(..) => Err(FrameError::UnresolvedTerm(term.to_string())),
        }
    }

    fn check_predicate(&self, predicate: &str) -> Result<()> {
        if self.has_predicate(predicate) {
            Ok(())
        } else {
            Err(FrameError::UnknownPredicate(predicate.to_string()))
        }
    }

    /// Resolves a ground frame to its value pair.
    pub fn ground(&self, frame: &Frame, store: &Store) -> Result<(Value, Value)> {
        self.check_predicate(&frame.predicate)?;
        Ok((self.resolve_ground(&frame.subject, store)?, self.resolve_ground(&frame.object, store)?))
    }

    pub fn assert_values(&mut self, predicate: &str, subject: Value, object: Value) -> Result<Ack> {
        self.check_predicate(predicate)?;
        let set = self.interp.pairs.get_mut(predicate).expect("declared predicate has a set");
        let changed = set.insert((subject, object));
        Ok(Ack { changed, warning: false })
    }

    pub fn retract_values(&mut self, predicate: &str, subject: &Value, object: &Value) -> Result<Ack> {
        self.check_predicate(predicate)?;
        let set = self.interp.pairs.get_mut(predicate).expect("declared predicate has a set");
        let changed = set.remove(&(subject.clone(), object.clone()));
        Ok(Ack { changed, warning: !changed })
    }

    pub fn assert_frame(&mut self, frame: &Frame, store: &Store) -> Result<Ack> {
        let (s, o) = self.ground(frame, store)?;
        self.assert_values(&frame.predicate, s, o)
    }

    pub fn retract_frame(&mut self, frame: &Frame, store: &Store) -> Result<Ack> {
        let (s, o) = self.ground(frame, store)?;
        self.retract_values(&frame.predicate, &s, &o)
    }

    /// Closed-world truth of a ground frame.
    pub fn eval_frame(&self, frame: &Frame, store: &Store) -> Result<bool> {
        self.check_predicate(&frame.predicate)?;
        // A term naming nothing cannot occur in any asserted pair.
        let (s, o) = match (self.resolve_ground(&frame.subject, store), self.resolve_ground(&frame.object, store)) {
            (Ok(s), Ok(o)) => (s, o),
            _ => return Ok(false),
        };
        self.holds(&frame.predicate, &s, &o)
    }

    pub fn holds(&self, predicate: &str, subject: &Value, object: &Value) -> Result<bool> {
        self.interp.holds(predicate, subject, object).ok_or_else(|| FrameError::UnknownPredicate(predicate.to_string()))
    }

    /// All bindings of the pattern's variables that make it true, in canonical order.
    /// A bare name that is not a declared constant is a variable.
    pub fn query(&self, pattern: &Frame, store: &Store) -> Result<Vec<Binding>> {
        self.check_predicate(&pattern.predicate)?;
        enum Slot {
            Fixed(Value),
            Var(String),
        }
        let slot = |t: &Term| -> Result<Slot> {
            match t {
                Term::Name(n) if self.constant(n).is_none() => Ok(Slot::Var(n.clone())),
                other => self.resolve_ground(other, store).map(Slot::Fixed),
            }
        };
        let (subject, object) = (slot(&pattern.subject)?, slot(&pattern.object)?);
        let mut out = Vec::new();
        for (s, o) in &self.interp.pairs[&pattern.predicate] {
            let mut b = Binding::new();
            let mut ok = true;
            for (slot, v) in [(&subject, s), (&object, o)] {
                match slot {
                    Slot::Fixed(f) => ok &= f == v,
                    Slot::Var(name) => match b.get(name) {
                        Some(prev) => ok &= prev == v,
                        None => {
                            b.insert(name.clone(), v.clone());
                        }
                    },
                }
            }
            if ok {
                out.push(b);
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }

    /// Number of asserted pairs across all predicates.
    pub fn fact_count(&self) -> usize {
        self.interp.pairs.values().map(BTreeSet::len).sum()
    }

    /// Whether any pair of `predicate` mentions an individual satisfying `is_member`.
    pub fn predicate_touches(&self, predicate: &str, is_member: impl Fn(ObjectRef) -> bool) -> bool {
        self.interp
            .pairs
            .get(predicate)
            .is_some_and(|set| set.iter().any(|(s, o)| [s, o].iter().any(|v| v.as_obj().is_some_and(&is_member))))
    }

    pub fn add_scenario(&mut self, scenario: Scenario) -> Result<()> {
        if self.scenarios.contains_key(&scenario.name) {
            return Err(FrameError::DuplicateName { kind: "scenario", name: scenario.name });
        }
        if scenario.steps.is_empty() {
            return Err(FrameError::BadScenario { name: scenario.name, reason: "no steps".into() });
        }
        for step in &scenario.steps {
            if let Action::AssertFrame(fr) = step {
                self.check_predicate(&fr.predicate)?;
            }
            if let Action::TransitionState { target, .. } = step {
                if !matches!(target, Term::Individual(..) | Term::Name(_)) {
                    return Err(FrameError::BadScenario {
                        name: scenario.name,
                        reason: format!("`{target}` does not name an individual"),
                    });
                }
            }
        }
        self.scenarios.insert(scenario.name.clone(), scenario);
        Ok(())
    }

    pub fn scenario(&self, name: &str) -> Option<&Scenario> {
        self.scenarios.get(name)
    }

    pub fn scenarios(&self) -> impl Iterator<Item = &Scenario> {
        self.scenarios.values()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net() -> (FrameNetwork, Store) {
        let mut n = FrameNetwork::new();
        n.declare_predicate("worksIn").unwrap();
        n.declare_constant("HQ", Value::text("HQ")).unwrap();
        (n, Store::new())
    }

    fn works(s: &str, o: Term) -> Frame {
        Frame::new("worksIn", Term::lit(s), o)
    }

    #[test]
    fn declarations_are_unique_per_kind() {
        let (mut n, _) = net();
        assert!(matches!(n.declare_predicate("worksIn"), Err(FrameError::DuplicateName { .. })));
        assert!(matches!(n.declare_constant("HQ", Value::Int(1)), Err(FrameError::DuplicateName { .. })));
        n.declare_constant("worksIn", Value::Int(1)).unwrap();
    }

    #[test]
    fn assert_is_idempotent_and_retract_restores() {
        let (mut n, s) = net();
        let f = works("ivanov", Term::name("HQ"));
        assert!(!n.eval_frame(&f, &s).unwrap());
        assert!(n.assert_frame(&f, &s).unwrap().changed);
        assert!(!n.assert_frame(&f, &s).unwrap().changed);
        assert_eq!(n.interpretation().pairs["worksIn"].len(), 1);
        assert!(n.eval_frame(&f, &s).unwrap());
        let ack = n.retract_frame(&f, &s).unwrap();
        assert!(ack.changed && !ack.warning);
        assert!(!n.eval_frame(&f, &s).unwrap());
        let ack = n.retract_frame(&f, &s).unwrap();
        assert!(!ack.changed && ack.warning);
    }

    #[test]
    fn unknown_predicate_and_unresolved_terms() {
        let (mut n, s) = net();
        let bad = Frame::new("likes", Term::lit("a"), Term::lit("b"));
        assert_eq!(n.assert_frame(&bad, &s), Err(FrameError::UnknownPredicate("likes".into())));
        let unresolved = works("a", Term::name("Nowhere"));
        assert!(matches!(n.assert_frame(&unresolved, &s), Err(FrameError::UnresolvedTerm(_))));
    }

    #[test]
    fn query_binds_variables() {
        let (mut n, s) = net();
        for who in ["a", "b", "c"] {
            n.assert_frame(&works(who, Term::name("HQ")), &s).unwrap();
        }
        n.assert_frame(&works("d", Term::lit("Branch")), &s).unwrap();
        let pat = Frame::new("worksIn", Term::name("x"), Term::name("HQ"));
        let res = n.query(&pat, &s).unwrap();
        assert_eq!(res.len(), 3);
        assert_eq!(res[0]["x"], Value::text("a"));
        let ground = works("a", Term::name("HQ"));
        assert_eq!(n.query(&ground, &s).unwrap(), vec![Binding::new()]);
        let absent = works("zz", Term::name("HQ"));
        assert!(n.query(&absent, &s).unwrap().is_empty());
    }

    #[test]
    fn repeated_variable_must_agree() {
        let (mut n, s) = net();
        n.assert_values("worksIn", Value::text("a"), Value::text("a")).unwrap();
        n.assert_values("worksIn", Value::text("a"), Value::text("b")).unwrap();
        let pat = Frame::new("worksIn", Term::name("x"), Term::name("x"));
        assert_eq!(n.query(&pat, &s).unwrap().len(), 1);
    }

    #[test]
    fn empty_predicate_query() {
        let (n, s) = net();
        let pat = Frame::new("worksIn", Term::name("x"), Term::name("y"));
        assert!(n.query(&pat, &s).unwrap().is_empty());
    }

    #[test]
    fn scenario_validation() {
        let (mut n, _) = net();
        let empty = Scenario { name: "s".into(), guard: Formula::True, steps: vec![] };
        assert!(matches!(n.add_scenario(empty), Err(FrameError::BadScenario { .. })));
        let ok = Scenario { name: "s".into(), guard: Formula::True, steps: vec![Action::RenderView("v".into())] };
        n.add_scenario(ok.clone()).unwrap();
        assert!(matches!(n.add_scenario(ok), Err(FrameError::DuplicateName { .. })));
    }
}
