//! Shared test support: seeded random universes, a test-local formula AST with a
//! brute-force evaluator, and random generalized values with reference tables.
//!
//! The oracles here never call the library's evaluator. Formulas are handed to the
//! library as model-language text, so the parser is exercised on every case too.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use metaportal_core::profile::{Coordinate, CoordinateSpace, GeneralizedValue, Scalar};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures").join(name)
}

// ---- random universes ----

pub const TEXTS: [&str; 3] = ["x", "y", "z"];

#[derive(Debug, Clone)]
pub struct Obj {
    pub concept: usize,
    pub key: i64,
    pub a: Option<i64>,
    pub b: Option<String>,
}

/// A level-0 universe: concepts `C0..`, each with `k: int key; a: int; b: text`, and
/// predicates `P0..` over pairs of individuals. Object `i` gets oid `i + 1`.
#[derive(Debug, Clone)]
pub struct Universe {
    pub concepts: usize,
    pub predicates: usize,
    pub objs: Vec<Obj>,
    pub facts: BTreeSet<(usize, usize, usize)>,
}

impl Universe {
    pub fn random(r: &mut impl Rng) -> Self {
        let concepts = r.gen_range(1..=3);
        let predicates = r.gen_range(0..=4);
        let total = r.gen_range(0..=64);
        let mut objs = Vec::new();
        let mut next_key = vec![0i64; concepts];
        for _ in 0..total {
            let c = r.gen_range(0..concepts);
            let key = next_key[c];
            next_key[c] += 1;
            let a = r.gen_bool(0.85).then(|| r.gen_range(0..6));
            let b = r.gen_bool(0.85).then(|| TEXTS[r.gen_range(0..3)].to_string());
            objs.push(Obj { concept: c, key, a, b });
        }
        let mut facts = BTreeSet::new();
        if !objs.is_empty() {
            for p in 0..predicates {
                for _ in 0..r.gen_range(0..=objs.len() * 2) {
                    facts.insert((p, r.gen_range(0..objs.len()), r.gen_range(0..objs.len())));
                }
            }
        }
        Universe { concepts, predicates, objs, facts }
    }

    fn ind(&self, i: usize) -> String {
        format!("C{}[{}]", self.objs[i].concept, self.objs[i].key)
    }

    /// The universe as a model program in repository `repo`.
    pub fn to_dsl(&self, repo: &str) -> String {
        let mut out = format!("repository {repo}\n");
        for c in 0..self.concepts {
            out += &format!("concept C{c} {{ k: int key; a: int; b: text }}\n");
        }
        for p in 0..self.predicates {
            out += &format!("predicate P{p}\n");
        }
        for (i, o) in self.objs.iter().enumerate() {
            out += &format!("individual C{} {{ k = {} }}\n", o.concept, o.key);
            let mut sets = Vec::new();
            if let Some(a) = o.a {
                sets.push(format!("a = {a}"));
            }
            if let Some(b) = &o.b {
                sets.push(format!("b = \"{b}\""));
            }
            if !sets.is_empty() {
                out += &format!("state {} cause \"seed\" {{ {} }}\n", self.ind(i), sets.join("; "));
            }
        }
        for (p, s, o) in &self.facts {
            out += &format!("fact P{p}({}, {})\n", self.ind(*s), self.ind(*o));
        }
        out
    }

    pub fn members(&self, concept: usize) -> Vec<usize> {
        (0..self.objs.len()).filter(|&i| self.objs[i].concept == concept).collect()
    }
}

// ---- oracle formulas ----

#[derive(Debug, Clone, PartialEq)]
pub enum OTerm {
    A(String),
    B(String),
    Int(i64),
    Text(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Rel {
    const ALL: [Rel; 6] = [Rel::Eq, Rel::Ne, Rel::Lt, Rel::Le, Rel::Gt, Rel::Ge];

    fn sym(self) -> &'static str {
        match self {
            Rel::Eq => "=",
            Rel::Ne => "!=",
            Rel::Lt => "<",
            Rel::Le => "<=",
            Rel::Gt => ">",
            Rel::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OF {
    True,
    False,
    Cmp(Rel, OTerm, OTerm),
    Pred(usize, String, String),
    Not(Box<OF>),
    And(Box<OF>, Box<OF>),
    Or(Box<OF>, Box<OF>),
    Exists(String, usize, Box<OF>),
    Forall(String, usize, Box<OF>),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum OVal {
    I(i64),
    S(String),
}

impl OF {
    /// A random formula whose free variables are among `scope`.
    pub fn random(r: &mut impl Rng, u: &Universe, scope: &mut Vec<String>, depth: u32) -> OF {
        let leaf = depth == 0 || r.gen_bool(0.3);
        if leaf {
            return match r.gen_range(0..10) {
                0 => OF::True,
                1 => OF::False,
                2 | 3 if u.predicates > 0 => {
                    let s = scope.choose(r).expect("scope is never empty").clone();
                    let o = scope.choose(r).expect("scope is never empty").clone();
                    OF::Pred(r.gen_range(0..u.predicates), s, o)
                }
                _ => {
                    let lhs = random_term(r, scope, true);
                    let rhs = random_term(r, scope, false);
                    OF::Cmp(*Rel::ALL.choose(r).expect("nonempty"), lhs, rhs)
                }
            };
        }
        match r.gen_range(0..5) {
            0 => OF::Not(Box::new(OF::random(r, u, scope, depth - 1))),
            1 => OF::And(Box::new(OF::random(r, u, scope, depth - 1)), Box::new(OF::random(r, u, scope, depth - 1))),
            2 => OF::Or(Box::new(OF::random(r, u, scope, depth - 1)), Box::new(OF::random(r, u, scope, depth - 1))),
            q => {
                let var = format!("y{}", scope.len());
                let c = r.gen_range(0..u.concepts);
                scope.push(var.clone());
                let body = Box::new(OF::random(r, u, scope, depth - 1));
                scope.pop();
                if q == 3 {
                    OF::Exists(var, c, body)
                } else {
                    OF::Forall(var, c, body)
                }
            }
        }
    }

    /// Model-language text, fully parenthesized.
    pub fn to_dsl(&self) -> String {
        match self {
            OF::True => "true".into(),
            OF::False => "false".into(),
            OF::Cmp(rel, a, b) => format!("{} {} {}", term_dsl(a), rel.sym(), term_dsl(b)),
            OF::Pred(p, s, o) => format!("P{p}({s}, {o})"),
            OF::Not(f) => format!("not ({})", f.to_dsl()),
            OF::And(a, b) => format!("({}) and ({})", a.to_dsl(), b.to_dsl()),
            OF::Or(a, b) => format!("({}) or ({})", a.to_dsl(), b.to_dsl()),
            OF::Exists(v, c, f) => format!("exists {v} in C{c}: ({})", f.to_dsl()),
            OF::Forall(v, c, f) => format!("forall {v} in C{c}: ({})", f.to_dsl()),
        }
    }

    /// Brute-force truth value. Unset attributes make atoms false.
    pub fn holds(&self, u: &Universe, env: &mut Vec<(String, usize)>) -> bool {
        match self {
            OF::True => true,
            OF::False => false,
            OF::Cmp(rel, a, b) => match (term_val(a, u, env), term_val(b, u, env)) {
                (Some(x), Some(y)) => {
                    let same = matches!((&x, &y), (OVal::I(_), OVal::I(_)) | (OVal::S(_), OVal::S(_)));
                    match rel {
                        Rel::Eq => x == y,
                        Rel::Ne => x != y,
                        Rel::Lt => same && x < y,
                        Rel::Le => same && x <= y,
                        Rel::Gt => same && x > y,
                        Rel::Ge => same && x >= y,
                    }
                }
                _ => false,
            },
            OF::Pred(p, s, o) => u.facts.contains(&(*p, lookup(env, s), lookup(env, o))),
            OF::Not(f) => !f.holds(u, env),
            OF::And(a, b) => a.holds(u, env) && b.holds(u, env),
            OF::Or(a, b) => a.holds(u, env) || b.holds(u, env),
            OF::Exists(v, c, f) => u.members(*c).into_iter().any(|i| {
                env.push((v.clone(), i));
                let t = f.holds(u, env);
                env.pop();
                t
            }),
            OF::Forall(v, c, f) => u.members(*c).into_iter().all(|i| {
                env.push((v.clone(), i));
                let t = f.holds(u, env);
                env.pop();
                t
            }),
        }
    }

    /// Indices of the members of `concept` satisfying the formula with `x` bound.
    pub fn filter(&self, u: &Universe, concept: usize) -> Vec<usize> {
        u.members(concept).into_iter().filter(|&i| self.holds(u, &mut vec![("x".to_string(), i)])).collect()
    }
}

fn random_term(r: &mut impl Rng, scope: &[String], attr_only: bool) -> OTerm {
    let v = scope.choose(r).expect("scope is never empty").clone();
    match r.gen_range(0..if attr_only { 2 } else { 4 }) {
        0 => OTerm::A(v),
        1 => OTerm::B(v),
        2 => OTerm::Int(r.gen_range(0..6)),
        _ => OTerm::Text(TEXTS[r.gen_range(0..3)].into()),
    }
}

fn term_dsl(t: &OTerm) -> String {
    match t {
        OTerm::A(v) => format!("{v}.a"),
        OTerm::B(v) => format!("{v}.b"),
        OTerm::Int(i) => i.to_string(),
        OTerm::Text(s) => format!("\"{s}\""),
    }
}

fn lookup(env: &[(String, usize)], var: &str) -> usize {
    env.iter().rev().find(|(n, _)| n == var).map(|(_, i)| *i).expect("bound variable")
}

fn term_val(t: &OTerm, u: &Universe, env: &[(String, usize)]) -> Option<OVal> {
    match t {
        OTerm::A(v) => u.objs[lookup(env, v)].a.map(OVal::I),
        OTerm::B(v) => u.objs[lookup(env, v)].b.clone().map(OVal::S),
        OTerm::Int(i) => Some(OVal::I(*i)),
        OTerm::Text(s) => Some(OVal::S(s.clone())),
    }
}

// ---- generalized values ----

/// A random generalized value plus its reference table keyed by full assignment.
pub struct RandomGv {
    pub space: CoordinateSpace,
    pub gv: GeneralizedValue,
    pub reference: BTreeMap<BTreeMap<String, String>, i64>,
}

pub fn random_space(r: &mut impl Rng) -> CoordinateSpace {
    let mut space = CoordinateSpace::new();
    for c in 0..r.gen_range(1..=4) {
        let n = r.gen_range(1..=3);
        let values: Vec<String> = (0..n).map(|v| format!("v{v}")).collect();
        let refs: Vec<&str> = values.iter().map(String::as_str).collect();
        space.declare(Coordinate::new(&format!("c{c}"), &refs)).expect("fresh coordinate");
    }
    space
}

/// Every assignment of values to `coords`, as maps.
pub fn assignments(space: &CoordinateSpace, coords: &[String]) -> Vec<BTreeMap<String, String>> {
    let mut out = vec![BTreeMap::new()];
    for c in coords {
        let values = &space.get(c).expect("declared").values;
        out = out
            .into_iter()
            .flat_map(|m| {
                values.iter().map(move |v| {
                    let mut m = m.clone();
                    m.insert(c.clone(), v.clone());
                    m
                })
            })
            .collect();
    }
    out
}

impl RandomGv {
    /// Sometimes the table ignores one free coordinate, so fixpoints occur.
    pub fn random(r: &mut impl Rng) -> Self {
        let space = random_space(r);
        let mut names: Vec<String> = space.iter().map(|c| c.name.clone()).collect();
        names.shuffle(r);
        let free: Vec<String> = names.into_iter().filter(|_| r.gen_bool(0.7)).collect();
        let ignored = (!free.is_empty() && r.gen_bool(0.3)).then(|| free[r.gen_range(0..free.len())].clone());
        let mut reference = BTreeMap::new();
        let mut base: BTreeMap<BTreeMap<String, String>, i64> = BTreeMap::new();
        for a in assignments(&space, &free) {
            let mut key = a.clone();
            if let Some(c) = &ignored {
                key.remove(c);
            }
            let v = *base.entry(key).or_insert_with(|| r.gen_range(0..5));
            reference.insert(a, v);
        }
        let entries = reference.iter().map(|(a, v)| {
            let tuple: Vec<String> = free.iter().map(|c| a[c].clone()).collect();
            (tuple, Scalar::Int(*v))
        });
        let gv = space.generalized(free.clone(), entries).expect("total table");
        RandomGv { space, gv, reference }
    }

    /// Brute force: does the value ignore `coord`?
    pub fn ignores(&self, coord: &str) -> bool {
        let mut seen: BTreeMap<BTreeMap<String, String>, i64> = BTreeMap::new();
        for (a, v) in &self.reference {
            let mut rest = a.clone();
            rest.remove(coord);
            if *seen.entry(rest).or_insert(*v) != *v {
                return false;
            }
        }
        true
    }
}
