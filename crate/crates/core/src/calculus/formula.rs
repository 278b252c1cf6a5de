//! Formula AST and its evaluator.
//!
//! Formulas are evaluated against a [`Universe`], which answers the few questions the
//! evaluator needs: the elements of a named finite domain, attribute values, frame facts,
//! membership in a meta object's extension and name resolution. The same evaluator is
//! used at every level of the metadata tower.

use std::collections::BTreeSet;
use std::fmt;

use super::{CalcError, Result};
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Lit(Value),
    /// A variable, a declared constant, a meta-object name, or (inside a comprehension)
    /// an attribute of the subject. Resolved in that order.
    Name(String),
    /// `var.attr`
    Attr(String, String),
    /// `Concept["key", ...]`, identifying values in declaration order.
    Individual(String, Vec<Value>),
}

impl Term {
    pub fn name(n: &str) -> Self {
        Term::Name(n.to_string())
    }

    pub fn attr(var: &str, attr: &str) -> Self {
        Term::Attr(var.to_string(), attr.to_string())
    }

    pub fn lit(v: impl Into<Value>) -> Self {
        Term::Lit(v.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
}

/// A named finite quantifier domain.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Domain {
    /// A concept extent or an enum type.
    Named(String),
    /// The whole universe of a tower level.
    Level(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Frame {
        predicate: String,
        subject: Term,
        object: Term,
    },
    /// `element in set`: application of a meta predicate character to an object.
    Member {
        set: Term,
        element: Term,
    },
    Compare {
        op: CmpOp,
        lhs: Term,
        rhs: Term,
    },
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Exists {
        var: String,
        domain: Domain,
        body: Box<Formula>,
    },
    Forall {
        var: String,
        domain: Domain,
        body: Box<Formula>,
    },
}

impl Formula {
    pub fn frame(predicate: &str, subject: Term, object: Term) -> Self {
        Formula::Frame { predicate: predicate.to_string(), subject, object }
    }

    pub fn cmp(op: CmpOp, lhs: Term, rhs: Term) -> Self {
        Formula::Compare { op, lhs, rhs }
    }

    pub fn and(self, other: Formula) -> Self {
        Formula::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: Formula) -> Self {
        Formula::Or(Box::new(self), Box::new(other))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Self {
        Formula::Not(Box::new(self))
    }

    pub fn exists(var: &str, domain: Domain, body: Formula) -> Self {
        Formula::Exists { var: var.to_string(), domain, body: Box::new(body) }
    }

    pub fn forall(var: &str, domain: Domain, body: Formula) -> Self {
        Formula::Forall { var: var.to_string(), domain, body: Box::new(body) }
    }

    /// Frame predicates used anywhere in the formula.
    pub fn predicates(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.walk(&mut |f| {
            if let Formula::Frame { predicate, .. } = f {
                out.insert(predicate.clone());
            }
        });
        out
    }

    /// Quantifier domains used anywhere in the formula.
    pub fn domains(&self) -> BTreeSet<Domain> {
        let mut out = BTreeSet::new();
        self.walk(&mut |f| {
            if let Formula::Exists { domain, .. } | Formula::Forall { domain, .. } = f {
                out.insert(domain.clone());
            }
        });
        out
    }

    /// Concepts named by `Concept[...]` terms.
    pub fn referenced_concepts(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.walk(&mut |f| {
            for t in f.terms() {
                if let Term::Individual(c, _) = t {
                    out.insert(c.clone());
                }
            }
        });
        out
    }

    /// Bare names used as terms (variables, constants, meta names, subject attributes).
    pub fn names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.walk(&mut |f| {
            for t in f.terms() {
                match t {
                    Term::Name(n) | Term::Attr(n, _) => {
                        out.insert(n.clone());
                    }
                    _ => {}
                }
            }
        });
        out
    }

    pub fn uses_membership(&self) -> bool {
        let mut found = false;
        self.walk(&mut |f| found |= matches!(f, Formula::Member { .. }));
        found
    }

    fn terms(&self) -> Vec<&Term> {
        match self {
            Formula::Frame { subject, object, .. } => vec![subject, object],
            Formula::Member { set, element } => vec![set, element],
            Formula::Compare { lhs, rhs, .. } => vec![lhs, rhs],
            _ => Vec::new(),
        }
    }

    fn walk(&self, visit: &mut dyn FnMut(&Formula)) {
        visit(self);
        match self {
            Formula::Not(f) => f.walk(visit),
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.walk(visit);
                b.walk(visit);
            }
            Formula::Exists { body, .. } | Formula::Forall { body, .. } => body.walk(visit),
            _ => {}
        }
    }
}

/// What the evaluator needs from a repository snapshot.
pub trait Universe {
    /// Elements of a finite domain in canonical order.
    fn elements(&self, domain: &Domain) -> Result<Vec<Value>>;
    /// `Ok(None)` when the attribute exists but is unset.
    fn attribute(&self, object: &Value, attribute: &str) -> Result<Option<Value>>;
    fn frame(&self, predicate: &str, subject: &Value, object: &Value) -> Result<bool>;
    fn member(&self, set: &Value, element: &Value) -> Result<bool>;
    /// Declared constants and meta-object names.
    fn name(&self, name: &str) -> Option<Value>;
    fn individual(&self, concept: &str, key: &[Value]) -> Result<Value>;
}

/// Variable bindings plus the comprehension subject used for bare attribute names.
#[derive(Debug, Clone, Default)]
pub struct Env {
    vars: Vec<(String, Value)>,
    subject: Option<Value>,
}

impl Env {
    pub fn new() -> Self {
        Env::default()
    }

    pub fn with_subject(var: &str, value: Value) -> Self {
        Env { vars: vec![(var.to_string(), value.clone())], subject: Some(value) }
    }

    pub fn bind(&mut self, var: &str, value: Value) {
        self.vars.push((var.to_string(), value));
    }

    /// Innermost binding of `var`.
    pub fn get(&self, var: &str) -> Option<&Value> {
        self.vars.iter().rev().find(|(n, _)| n == var).map(|(_, v)| v)
    }
}

fn resolve<U: Universe + ?Sized>(term: &Term, u: &U, env: &Env) -> Result<Option<Value>> {
    match term {
        Term::Lit(v) => Ok(Some(v.clone())),
        Term::Name(n) => {
            if let Some(v) = env.get(n) {
                return Ok(Some(v.clone()));
            }
            if let Some(v) = u.name(n) {
                return Ok(Some(v));
            }
            match &env.subject {
                Some(s) => match u.attribute(s, n) {
                    Ok(v) => Ok(v),
                    Err(CalcError::UnknownAttribute { .. } | CalcError::NotAnObject(_)) => {
                        Err(CalcError::UnboundVariable(n.clone()))
                    }
                    Err(e) => Err(e),
                },
                None => Err(CalcError::UnboundVariable(n.clone())),
            }
        }
        Term::Attr(var, attr) => {
            let base =
                env.get(var).cloned().or_else(|| u.name(var)).ok_or_else(|| CalcError::UnboundVariable(var.clone()))?;
            u.attribute(&base, attr)
        }
        Term::Individual(c, key) => u.individual(c, key).map(Some),
    }
}

fn compare(op: CmpOp, a: &Value, b: &Value) -> bool {
    use Value::*;
    let ordered = matches!((a, b), (Int(_), Int(_)) | (Text(_), Text(_)) | (Bool(_), Bool(_)));
    match op {
        CmpOp::Eq => a == b,
        CmpOp::Ne => a != b,
        CmpOp::Lt => ordered && a < b,
        CmpOp::Le => ordered && a <= b,
    }
}

/// Closed-world evaluation. Comparisons, frames and memberships involving an unset
/// attribute are false.
pub fn eval<U: Universe + ?Sized>(f: &Formula, u: &U, env: &mut Env) -> Result<bool> {
    Ok(match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Frame { predicate, subject, object } => match (resolve(subject, u, env)?, resolve(object, u, env)?) {
            (Some(s), Some(o)) => u.frame(predicate, &s, &o)?,
            _ => false,
        },
        Formula::Member { set, element } => match (resolve(set, u, env)?, resolve(element, u, env)?) {
            (Some(s), Some(e)) => u.member(&s, &e)?,
            _ => false,
        },
        Formula::Compare { op, lhs, rhs } => match (resolve(lhs, u, env)?, resolve(rhs, u, env)?) {
            (Some(a), Some(b)) => compare(*op, &a, &b),
            _ => false,
        },
        Formula::Not(g) => !eval(g, u, env)?,
        Formula::And(a, b) => eval(a, u, env)? && eval(b, u, env)?,
        Formula::Or(a, b) => eval(a, u, env)? || eval(b, u, env)?,
        Formula::Exists { var, domain, body } => {
            let mut found = false;
            for d in u.elements(domain)? {
                env.bind(var, d);
                let r = eval(body, u, env);
                env.vars.pop();
                if r? {
                    found = true;
                    break;
                }
            }
            found
        }
        Formula::Forall { var, domain, body } => {
            let mut all = true;
            for d in u.elements(domain)? {
                env.bind(var, d);
                let r = eval(body, u, env);
                env.vars.pop();
                if !r? {
                    all = false;
                    break;
                }
            }
            all
        }
    })
}

/// `{ var : domain | phi }`, in the domain's canonical order.
pub fn comprehend<U: Universe + ?Sized>(u: &U, phi: &Formula, var: &str, domain: &Domain) -> Result<Vec<Value>> {
    let mut out = Vec::new();
    for d in u.elements(domain)? {
        let mut env = Env::with_subject(var, d.clone());
        if eval(phi, u, &mut env)? {
            out.push(d);
        }
    }
    Ok(out)
}

/// The unique element of `domain` satisfying `phi`.
pub fn individualize<U: Universe + ?Sized>(u: &U, phi: &Formula, var: &str, domain: &Domain) -> Result<Value> {
    let mut hits = comprehend(u, phi, var, domain)?;
    match hits.len() {
        0 => Err(CalcError::NoWitness),
        1 => Ok(hits.pop().expect("one element")),
        n => Err(CalcError::Ambiguous(n)),
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Lit(v) => write!(f, "{v}"),
            Term::Name(n) => f.write_str(n),
            Term::Attr(v, a) => write!(f, "{v}.{a}"),
            Term::Individual(c, key) => {
                let parts: Vec<String> = key.iter().map(ToString::to_string).collect();
                write!(f, "{c}[{}]", parts.join(", "))
            }
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
        })
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Named(n) => f.write_str(n),
            Domain::Level(j) => write!(f, "level {j}"),
        }
    }
}

/// Canonical DSL text. Compound subformulas are always parenthesized, so the output
/// parses back to the same tree.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => f.write_str("true"),
            Formula::False => f.write_str("false"),
            Formula::Frame { predicate, subject, object } => write!(f, "{predicate}({subject}, {object})"),
            Formula::Member { set, element } => write!(f, "{element} in {set}"),
            Formula::Compare { op, lhs, rhs } => write!(f, "{lhs} {op} {rhs}"),
            Formula::Not(g) => write!(f, "not {g}"),
            Formula::And(a, b) => write!(f, "({a} and {b})"),
            Formula::Or(a, b) => write!(f, "({a} or {b})"),
            Formula::Exists { var, domain, body } => write!(f, "(exists {var} in {domain}: {body})"),
            Formula::Forall { var, domain, body } => write!(f, "(forall {var} in {domain}: {body})"),
        }
    }
}
