use std::collections::BTreeMap;

use crate::access::{EventType, Kind, Op, RepoScope, Role};
use crate::calculus::{CmpOp, Concept, Domain, Formula, Term};
use crate::frames::{Action, Frame, Scenario};
use crate::profile::{Coordinate, Scalar};
use crate::publish::{Column, Layout, Projection, UpdatePolicy, ViewDefinition};
use crate::tower::DescriptorKey;
use crate::value::{TypeTag, Value};

use super::ast::{BindGuard, Statement, TableSpec};
use super::lexer::{lex, Tok, Token};
use super::DslError;

/// A parsed statement with the position it started at.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Located {
    pub statement: Statement,
    pub line: usize,
    pub col: usize,
}

pub fn parse_program(src: &str) -> Result<Vec<Located>, DslError> {
    let mut p = Parser::new(src)?;
    let mut out = Vec::new();
    while !p.at_eof() {
        if p.eat_sym(";") {
            continue;
        }
        let (line, col) = p.pos();
        let statement = p.statement()?;
        out.push(Located { statement, line, col });
    }
    Ok(out)
}

/// Parses exactly one statement (an optional trailing `;` is allowed).
pub fn parse_statement(src: &str) -> Result<Statement, DslError> {
    let mut p = Parser::new(src)?;
    let s = p.statement()?;
    p.eat_sym(";");
    p.expect_eof()?;
    Ok(s)
}

pub fn parse_formula(src: &str) -> Result<Formula, DslError> {
    let mut p = Parser::new(src)?;
    let f = p.formula()?;
    p.expect_eof()?;
    Ok(f)
}

pub fn parse_term(src: &str) -> Result<Term, DslError> {
    let mut p = Parser::new(src)?;
    let t = p.term()?;
    p.expect_eof()?;
    Ok(t)
}

struct Parser {
    toks: Vec<Token>,
    i: usize,
}

const CMP: &[&str] = &["=", "!=", "<", "<=", ">", ">="];

impl Parser {
    fn new(src: &str) -> Result<Self, DslError> {
        Ok(Parser { toks: lex(src)?, i: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.i].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.i + k).min(self.toks.len() - 1)].tok
    }

    fn pos(&self) -> (usize, usize) {
        (self.toks[self.i].line, self.toks[self.i].col)
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].tok.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, DslError> {
        let (line, col) = self.pos();
        Err(DslError { line, col, message: msg.into() })
    }

    fn unexpected<T>(&self, wanted: &str) -> Result<T, DslError> {
        self.err(format!("expected {wanted}, found {}", self.peek().describe()))
    }

    fn expect_eof(&self) -> Result<(), DslError> {
        if self.at_eof() {
            Ok(())
        } else {
            self.unexpected("end of input")
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(t) if *t == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn sym(&mut self, s: &str) -> Result<(), DslError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.unexpected(&format!("`{s}`"))
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(t) if t == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn kw(&mut self, kw: &str) -> Result<(), DslError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.unexpected(&format!("`{kw}`"))
        }
    }

    fn ident(&mut self) -> Result<String, DslError> {
        match self.peek() {
            Tok::Ident(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => self.unexpected("identifier"),
        }
    }

    fn string(&mut self) -> Result<String, DslError> {
        match self.peek() {
            Tok::Str(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => self.unexpected("string"),
        }
    }

    fn int(&mut self) -> Result<i64, DslError> {
        match self.peek() {
            Tok::Int(n) => {
                let n = *n;
                self.bump();
                Ok(n)
            }
            _ => self.unexpected("integer"),
        }
    }

    fn uint(&mut self) -> Result<u64, DslError> {
        let n = self.int()?;
        u64::try_from(n).or_else(|_| self.err("expected a non-negative integer"))
    }

    /// Identifier or string.
    fn name(&mut self) -> Result<String, DslError> {
        match self.peek() {
            Tok::Str(_) => self.string(),
            _ => self.ident(),
        }
    }

    fn keyword<T: std::str::FromStr>(&mut self, what: &str) -> Result<T, DslError> {
        let (line, col) = self.pos();
        let s = self.ident()?;
        s.parse().map_err(|_| DslError { line, col, message: format!("unknown {what} `{s}`") })
    }

    /// Optional separator between block items.
    fn sep(&mut self) -> bool {
        self.eat_sym(";") || self.eat_sym(",")
    }

    /// `{ item (sep item)* [sep] }`
    fn block<T>(&mut self, mut item: impl FnMut(&mut Self) -> Result<T, DslError>) -> Result<Vec<T>, DslError> {
        self.sym("{")?;
        let mut out = Vec::new();
        while !self.eat_sym("}") {
            out.push(item(self)?);
            if !self.sep() && !self.is_sym("}") {
                return self.unexpected("`;` or `}`");
            }
        }
        Ok(out)
    }

    fn comma_list<T>(&mut self, mut item: impl FnMut(&mut Self) -> Result<T, DslError>) -> Result<Vec<T>, DslError> {
        let mut out = vec![item(self)?];
        while self.eat_sym(",") {
            out.push(item(self)?);
        }
        Ok(out)
    }

    /// `( a, b )`, possibly empty.
    fn paren_idents(&mut self) -> Result<Vec<String>, DslError> {
        self.sym("(")?;
        if self.eat_sym(")") {
            return Ok(Vec::new());
        }
        let out = self.comma_list(Self::ident)?;
        self.sym(")")?;
        Ok(out)
    }

    // ---- terms and formulas ----

    fn literal(&mut self) -> Result<Value, DslError> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Value::Int(n))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Value::Text(s))
            }
            Tok::Obj(r) => {
                self.bump();
                Ok(Value::Obj(r))
            }
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.bump();
                Ok(Value::Bool(s == "true"))
            }
            _ => self.unexpected("literal"),
        }
    }

    fn term(&mut self) -> Result<Term, DslError> {
        match self.peek().clone() {
            Tok::Ident(s) if s != "true" && s != "false" => {
                self.bump();
                if self.eat_sym(".") {
                    let attr = self.ident()?;
                    Ok(Term::Attr(s, attr))
                } else if self.eat_sym("[") {
                    let key = if self.is_sym("]") { Vec::new() } else { self.comma_list(Self::literal)? };
                    self.sym("]")?;
                    Ok(Term::Individual(s, key))
                } else {
                    Ok(Term::Name(s))
                }
            }
            _ => self.literal().map(Term::Lit),
        }
    }

    pub(crate) fn formula(&mut self) -> Result<Formula, DslError> {
        let mut f = self.conjunction()?;
        while self.eat_kw("or") {
            f = f.or(self.conjunction()?);
        }
        Ok(f)
    }

    fn conjunction(&mut self) -> Result<Formula, DslError> {
        let mut f = self.unary()?;
        while self.eat_kw("and") {
            f = f.and(self.unary()?);
        }
        Ok(f)
    }

    fn domain(&mut self) -> Result<Domain, DslError> {
        if self.is_kw("level") && matches!(self.peek_at(1), Tok::Int(_)) {
            self.bump();
            let j = self.uint()?;
            let j = u32::try_from(j).or_else(|_| self.err("level out of range"))?;
            Ok(Domain::Level(j))
        } else {
            Ok(Domain::Named(self.ident()?))
        }
    }

    fn unary(&mut self) -> Result<Formula, DslError> {
        if self.eat_kw("not") {
            return Ok(self.unary()?.not());
        }
        for q in ["exists", "forall"] {
            if self.is_kw(q)
                && matches!(self.peek_at(1), Tok::Ident(_))
                && matches!(self.peek_at(2), Tok::Ident(s) if s == "in")
            {
                self.bump();
                let var = self.ident()?;
                self.kw("in")?;
                let domain = self.domain()?;
                self.sym(":")?;
                let body = self.formula()?;
                return Ok(if q == "exists" {
                    Formula::exists(&var, domain, body)
                } else {
                    Formula::forall(&var, domain, body)
                });
            }
        }
        self.atom()
    }

    fn cmp_op(&self) -> Option<&'static str> {
        match self.peek() {
            Tok::Sym(s) if CMP.contains(s) => Some(s),
            _ => None,
        }
    }

    fn atom(&mut self) -> Result<Formula, DslError> {
        if self.eat_sym("(") {
            let f = self.formula()?;
            self.sym(")")?;
            return Ok(f);
        }
        if let Tok::Ident(s) = self.peek().clone() {
            let next_is_cmp = matches!(self.peek_at(1), Tok::Sym(t) if CMP.contains(t));
            if (s == "true" || s == "false") && !next_is_cmp {
                self.bump();
                return Ok(if s == "true" { Formula::True } else { Formula::False });
            }
            if matches!(self.peek_at(1), Tok::Sym("(")) {
                self.bump();
                self.bump();
                let first = self.term()?;
                if self.eat_sym(",") {
                    let second = self.term()?;
                    self.sym(")")?;
                    return Ok(Formula::frame(&s, first, second));
                }
                self.sym(")")?;
                return Ok(Formula::Member { set: Term::Name(s), element: first });
            }
        }
        let lhs = self.term()?;
        if let Some(op) = self.cmp_op() {
            self.bump();
            let rhs = self.term()?;
            return Ok(match op {
                "=" => Formula::cmp(CmpOp::Eq, lhs, rhs),
                "!=" => Formula::cmp(CmpOp::Ne, lhs, rhs),
                "<" => Formula::cmp(CmpOp::Lt, lhs, rhs),
                "<=" => Formula::cmp(CmpOp::Le, lhs, rhs),
                ">" => Formula::cmp(CmpOp::Lt, rhs, lhs),
                _ => Formula::cmp(CmpOp::Le, rhs, lhs),
            });
        }
        if self.eat_kw("in") {
            let set = self.term()?;
            return Ok(Formula::Member { set, element: lhs });
        }
        self.unexpected("comparison or `in`")
    }

    fn frame(&mut self) -> Result<Frame, DslError> {
        let p = self.ident()?;
        self.sym("(")?;
        let s = self.term()?;
        self.sym(",")?;
        let o = self.term()?;
        self.sym(")")?;
        Ok(Frame::new(&p, s, o))
    }

    fn assignment(&mut self) -> Result<(String, Term), DslError> {
        let k = self.ident()?;
        self.sym("=")?;
        Ok((k, self.term()?))
    }

    // ---- statements ----

    fn statement(&mut self) -> Result<Statement, DslError> {
        let (line, col) = self.pos();
        let head = match self.peek() {
            Tok::Ident(s) => s.clone(),
            _ => return self.unexpected("statement"),
        };
        self.bump();
        let s = match head.as_str() {
            "repository" => Statement::Repository(self.ident()?),
            "critical" => Statement::Critical(self.comma_list(Self::ident)?),
            "concept" => Statement::Concept(self.concept()?),
            "individual" => {
                let concept = self.ident()?;
                let identity = self.block(Self::assignment)?;
                Statement::Individual { concept, identity }
            }
            "state" => {
                let target = self.term()?;
                self.kw("cause")?;
                let cause = self.string()?;
                let updates = self.block(Self::assignment)?;
                Statement::State { target, cause, updates }
            }
            "predicate" => Statement::Predicate(self.ident()?),
            "constant" => {
                let name = self.ident()?;
                self.sym("=")?;
                Statement::Constant { name, value: self.term()? }
            }
            "fact" => Statement::Fact(self.frame()?),
            "retract" => Statement::Retract(self.frame()?),
            "meta" => self.meta()?,
            "view" => Statement::View(self.view()?),
            "scenario" => Statement::Scenario(self.scenario()?),
            "coordinate" => {
                let name = self.ident()?;
                let values = self.block(Self::ident)?;
                Statement::Coordinate(Coordinate { name, values })
            }
            "generalized" => {
                let name = self.ident()?;
                Statement::Generalized { name, table: self.table()? }
            }
            "cost" => self.cost_model()?,
            "profile" => {
                self.kw("user")?;
                let user = self.name()?;
                let values = self.block(|p| {
                    let k = p.ident()?;
                    p.sym("=")?;
                    Ok((k, p.ident()?))
                })?;
                Statement::Profile { user, values }
            }
            "role" => {
                self.kw("for")?;
                let user = self.name()?;
                self.sym("=")?;
                Statement::RoleFor { user, role: self.keyword("role")? }
            }
            "grant" | "revoke" => {
                let role: Role = self.keyword("role")?;
                let op: Op = self.keyword("operation")?;
                let kind: Kind = self.keyword("kind")?;
                let repo = if self.eat_sym("*") { RepoScope::Any } else { RepoScope::Named(self.name()?) };
                Statement::Grant { revoke: head == "revoke", role, op, kind, repo }
            }
            "bind" => self.bind()?,
            "functional" => {
                let name = self.ident()?;
                self.kw("over")?;
                let coords = self.paren_idents()?;
                let users = if self.eat_kw("users") { self.comma_list(Self::name)? } else { Vec::new() };
                Statement::Functional { name, coords, users }
            }
            "tick" => Statement::Tick,
            "refresh" => Statement::Refresh(self.ident()?),
            other => return Err(DslError { line, col, message: format!("unknown statement `{other}`") }),
        };
        Ok(s)
    }

    fn type_tag(&mut self) -> Result<TypeTag, DslError> {
        let (line, col) = self.pos();
        let t = self.ident()?;
        Ok(match t.as_str() {
            "bool" => TypeTag::Boolean,
            "int" => TypeTag::Integer,
            "text" => TypeTag::Text,
            "enum" => {
                let name = self.ident()?;
                let values = self.block(Self::ident)?;
                TypeTag::Enum { name, values }
            }
            "ref" => TypeTag::ConceptRef(self.ident()?),
            other => return Err(DslError { line, col, message: format!("unknown type `{other}`") }),
        })
    }

    fn concept(&mut self) -> Result<Concept, DslError> {
        let mut c = Concept::new(self.ident()?);
        let attrs = self.block(|p| {
            let name = p.ident()?;
            p.sym(":")?;
            let range = p.type_tag()?;
            Ok((name, range, p.eat_kw("key")))
        })?;
        for (name, range, key) in attrs {
            c = if key { c.key(&name, range) } else { c.attr(&name, range) };
        }
        Ok(c)
    }

    fn meta(&mut self) -> Result<Statement, DslError> {
        let name = self.ident()?;
        self.kw("level")?;
        let level = self.uint()?;
        let level = u32::try_from(level).or_else(|_| self.err("level out of range"))?;
        self.kw("over")?;
        let domain = self.domain()?;
        let var = if self.eat_kw("as") { self.ident()? } else { "x".into() };
        self.kw("where")?;
        let formula = self.formula()?;
        let descriptors = if self.is_sym("{") {
            self.block(|p| {
                let (line, col) = p.pos();
                let k = p.ident()?;
                let key: DescriptorKey =
                    k.parse().map_err(|_| DslError { line, col, message: format!("unknown descriptor `{k}`") })?;
                p.sym("=")?;
                Ok((key, p.string()?))
            })?
        } else {
            Vec::new()
        };
        Ok(Statement::Meta { name, level, domain, var, formula, descriptors })
    }

    fn view(&mut self) -> Result<ViewDefinition, DslError> {
        let name = self.ident()?;
        self.kw("over")?;
        let over = self.ident()?;
        let var = if self.eat_kw("as") { self.ident()? } else { "x".into() };
        let formula = if self.eat_kw("where") { self.formula()? } else { Formula::True };
        let mut def = ViewDefinition::new(&name, "", &over, formula);
        def.var = var;
        self.sym("{")?;
        let mut selected = false;
        while !self.eat_sym("}") {
            let (line, col) = self.pos();
            let item = self.ident()?;
            match item.as_str() {
                "select" => {
                    def.columns.extend(self.comma_list(Self::column)?);
                    selected = true;
                }
                "layout" => {
                    let device = self.ident()?;
                    let layout = self.layout()?;
                    def.layouts.insert(device, layout);
                    self.sep();
                    continue;
                }
                "mode" => {
                    def.policy = match self.ident()?.as_str() {
                        "automatic" => UpdatePolicy::Automatic,
                        "manual" => UpdatePolicy::Manual,
                        "periodic" => UpdatePolicy::Periodic(self.uint()?),
                        other => return self.err(format!("unknown mode `{other}`")),
                    }
                }
                "audience" => def.audience = Some(self.ident()?),
                other => return Err(DslError { line, col, message: format!("unknown view clause `{other}`") }),
            }
            if !self.sep() && !self.is_sym("}") {
                return self.unexpected("`;` or `}`");
            }
        }
        if !selected {
            return self.err(format!("view `{name}` has no select clause"));
        }
        Ok(def)
    }

    fn column(&mut self) -> Result<Column, DslError> {
        let first = self.ident()?;
        let (projection, default_label) = match first.as_str() {
            "count" => (Projection::Count, "count".to_string()),
            "distinct" => {
                let a = self.ident()?;
                (Projection::Distinct(a.clone()), a)
            }
            _ => (Projection::Attr(first.clone()), first),
        };
        let label = if self.eat_kw("as") { self.ident()? } else { default_label };
        let media = self.eat_kw("media");
        Ok(Column { label, projection, media })
    }

    fn layout(&mut self) -> Result<Layout, DslError> {
        let mut layout = Layout::default();
        self.sym("{")?;
        while !self.eat_sym("}") {
            let (line, col) = self.pos();
            match self.ident()?.as_str() {
                "order" => layout.order = self.comma_list(Self::ident)?,
                "rows" => layout.rows = Some(self.uint()? as usize),
                "media" => {
                    layout.media = match self.ident()?.as_str() {
                        "on" => true,
                        "off" => false,
                        other => return self.err(format!("expected `on` or `off`, found `{other}`")),
                    }
                }
                other => return Err(DslError { line, col, message: format!("unknown layout clause `{other}`") }),
            }
            if !self.sep() && !self.is_sym("}") {
                return self.unexpected("`;` or `}`");
            }
        }
        Ok(layout)
    }

    fn scenario(&mut self) -> Result<Scenario, DslError> {
        let name = self.ident()?;
        self.kw("when")?;
        let guard = self.formula()?;
        self.kw("do")?;
        let steps = self.comma_list(Self::action)?;
        Ok(Scenario { name, guard, steps })
    }

    fn action(&mut self) -> Result<Action, DslError> {
        let (line, col) = self.pos();
        let verb = self.ident()?;
        self.sym("(")?;
        let a = match verb.as_str() {
            "assert-frame" => {
                let p = self.ident()?;
                self.sym(",")?;
                let s = self.term()?;
                self.sym(",")?;
                let o = self.term()?;
                Action::AssertFrame(Frame::new(&p, s, o))
            }
            "transition-state" => {
                let target = self.term()?;
                self.sym(",")?;
                let cause = self.string()?;
                let mut updates = Vec::new();
                while self.eat_sym(",") {
                    updates.push(self.assignment()?);
                }
                Action::TransitionState { target, cause, updates }
            }
            "render-view" => Action::RenderView(self.name()?),
            "deny" => Action::Deny(self.name()?),
            other => return Err(DslError { line, col, message: format!("unknown action `{other}`") }),
        };
        self.sym(")")?;
        Ok(a)
    }

    fn scalar(&mut self) -> Result<Scalar, DslError> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Scalar::Int(n))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Scalar::Text(s))
            }
            _ => self.unexpected("number or string"),
        }
    }

    /// `over (c, ...) { key: scalar, ... }`
    fn table(&mut self) -> Result<TableSpec, DslError> {
        self.kw("over")?;
        let free = self.paren_idents()?;
        let arity = free.len();
        let entries = self.block(|p| {
            let key = match arity {
                0 => Vec::new(),
                1 => vec![p.ident()?],
                _ => p.paren_idents()?,
            };
            if arity > 0 {
                p.sym(":")?;
            }
            Ok((key, p.scalar()?))
        })?;
        Ok(TableSpec { free, entries })
    }

    fn cost_model(&mut self) -> Result<Statement, DslError> {
        self.kw("model")?;
        let name = self.ident()?;
        self.sym("{")?;
        let (mut request, mut response, mut stages) = (None, None, Vec::new());
        while !self.eat_sym("}") {
            let (line, col) = self.pos();
            match self.ident()?.as_str() {
                "r" => request = Some(self.table()?),
                "z" => response = Some(self.table()?),
                "stage" => {
                    let l = self.int()?;
                    self.kw("q")?;
                    stages.push((l, self.table()?));
                }
                other => return Err(DslError { line, col, message: format!("unknown cost clause `{other}`") }),
            }
            if !self.sep() && !self.is_sym("}") {
                return self.unexpected("`;` or `}`");
            }
        }
        let zero = || TableSpec::scalar(Scalar::Int(0));
        Ok(Statement::CostModel {
            name,
            request: request.unwrap_or_else(zero),
            response: response.unwrap_or_else(zero),
            stages,
        })
    }

    fn bind(&mut self) -> Result<Statement, DslError> {
        self.kw("on")?;
        let event: EventType = self.keyword("event")?;
        let mut guards = Vec::new();
        if self.eat_kw("when") {
            loop {
                if self.eat_kw("role") {
                    guards.push(BindGuard::Role(self.keyword("role")?));
                } else {
                    let c = self.ident()?;
                    self.sym("=")?;
                    guards.push(BindGuard::Coordinate(c, self.ident()?));
                }
                if !self.eat_kw("and") {
                    break;
                }
            }
        }
        self.kw("run")?;
        Ok(Statement::Bind { event, guards, scenario: self.ident()? })
    }
}

/// Descriptors as a map, last assignment winning.
pub fn descriptor_map(items: &[(DescriptorKey, String)]) -> BTreeMap<DescriptorKey, String> {
    items.iter().cloned().collect()
}
