use std::fmt;

use crate::access::{EventType, Kind, Op, RepoScope, Role};
use crate::calculus::{Concept, Domain, Formula, Term};
use crate::frames::{Frame, Scenario};
use crate::profile::{Coordinate, Scalar};
use crate::publish::ViewDefinition;
use crate::tower::DescriptorKey;
use crate::value::quote;

/// An unvalidated coordinate-indexed table, as written.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableSpec {
    pub free: Vec<String>,
    pub entries: Vec<(Vec<String>, Scalar)>,
}

impl TableSpec {
    pub fn scalar(v: Scalar) -> Self {
        TableSpec { free: Vec::new(), entries: vec![(Vec::new(), v)] }
    }
}

impl fmt::Display for TableSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "over ({}) {{ ", self.free.join(", "))?;
        let parts: Vec<String> = self
            .entries
            .iter()
            .map(|(k, v)| match k.len() {
                0 => v.to_string(),
                1 => format!("{}: {v}", k[0]),
                _ => format!("({}): {v}", k.join(", ")),
            })
            .collect();
        f.write_str(&parts.join(", "))?;
        f.write_str(" }")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BindGuard {
    Role(Role),
    Coordinate(String, String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Statement {
    Repository(String),
    Critical(Vec<String>),
    Concept(Concept),
    Individual {
        concept: String,
        identity: Vec<(String, Term)>,
    },
    State {
        target: Term,
        cause: String,
        updates: Vec<(String, Term)>,
    },
    Predicate(String),
    Constant {
        name: String,
        value: Term,
    },
    Fact(Frame),
    Retract(Frame),
    Meta {
        name: String,
        level: u32,
        domain: Domain,
        var: String,
        formula: Formula,
        descriptors: Vec<(DescriptorKey, String)>,
    },
    /// The definition's repository is filled in when the statement is applied.
    View(ViewDefinition),
    Scenario(Scenario),
    Coordinate(Coordinate),
    Generalized {
        name: String,
        table: TableSpec,
    },
    CostModel {
        name: String,
        request: TableSpec,
        response: TableSpec,
        stages: Vec<(i64, TableSpec)>,
    },
    Profile {
        user: String,
        values: Vec<(String, String)>,
    },
    RoleFor {
        user: String,
        role: Role,
    },
    Grant {
        revoke: bool,
        role: Role,
        op: Op,
        kind: Kind,
        repo: RepoScope,
    },
    Bind {
        event: EventType,
        guards: Vec<BindGuard>,
        scenario: String,
    },
    Functional {
        name: String,
        coords: Vec<String>,
        users: Vec<String>,
    },
    Tick,
    Refresh(String),
}

/// Broad category of a statement, used as the log record type and for authorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatementKind {
    /// Level-0 content: individuals, states, facts.
    Data,
    /// Schema and metadata: concepts, predicates, meta objects, views, scenarios.
    Schema,
    /// Users, roles, grants, bindings, coordinates and repository context.
    Admin,
    /// Ticks and manual refreshes.
    Clock,
}

impl StatementKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StatementKind::Data => "data",
            StatementKind::Schema => "schema",
            StatementKind::Admin => "admin",
            StatementKind::Clock => "clock",
        }
    }
}

impl fmt::Display for StatementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for StatementKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "data" => Ok(StatementKind::Data),
            "schema" => Ok(StatementKind::Schema),
            "admin" => Ok(StatementKind::Admin),
            "clock" => Ok(StatementKind::Clock),
            other => Err(format!("unknown record type `{other}`")),
        }
    }
}

impl Statement {
    pub fn kind(&self) -> StatementKind {
        use Statement::*;
        match self {
            Individual { .. } | State { .. } | Fact(_) | Retract(_) => StatementKind::Data,
            Critical(_)
            | Concept(_)
            | Predicate(_)
            | Constant { .. }
            | Meta { .. }
            | View(_)
            | Scenario(_)
            | Generalized { .. }
            | CostModel { .. }
            | Functional { .. } => StatementKind::Schema,
            Repository(_) | Coordinate(_) | Profile { .. } | RoleFor { .. } | Grant { .. } | Bind { .. } => {
                StatementKind::Admin
            }
            Tick | Refresh(_) => StatementKind::Clock,
        }
    }
}

fn assignments(items: &[(String, Term)]) -> String {
    items.iter().map(|(k, v)| format!("{k} = {v}")).collect::<Vec<_>>().join("; ")
}

/// Canonical single-line form; parses back to an equal statement.
impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statement::Repository(n) => write!(f, "repository {n}"),
            Statement::Critical(names) => write!(f, "critical {}", names.join(", ")),
            Statement::Concept(c) => write!(f, "{c}"),
            Statement::Individual { concept, identity } => {
                write!(f, "individual {concept} {{ {} }}", assignments(identity))
            }
            Statement::State { target, cause, updates } => {
                write!(f, "state {target} cause {} {{ {} }}", quote(cause), assignments(updates))
            }
            Statement::Predicate(p) => write!(f, "predicate {p}"),
            Statement::Constant { name, value } => write!(f, "constant {name} = {value}"),
            Statement::Fact(fr) => write!(f, "fact {fr}"),
            Statement::Retract(fr) => write!(f, "retract {fr}"),
            Statement::Meta { name, level, domain, var, formula, descriptors } => {
                write!(f, "meta {name} level {level} over {domain} as {var} where {formula}")?;
                if !descriptors.is_empty() {
                    let ds: Vec<String> = descriptors.iter().map(|(k, v)| format!("{k} = {}", quote(v))).collect();
                    write!(f, " {{ {} }}", ds.join("; "))?;
                }
                Ok(())
            }
            Statement::View(v) => write!(f, "{v}"),
            Statement::Scenario(s) => write!(f, "{s}"),
            Statement::Coordinate(c) => write!(f, "{c}"),
            Statement::Generalized { name, table } => write!(f, "generalized {name} {table}"),
            Statement::CostModel { name, request, response, stages } => {
                write!(f, "cost model {name} {{ r {request}; z {response};")?;
                for (l, q) in stages {
                    write!(f, " stage {l} q {q};")?;
                }
                f.write_str(" }")
            }
            Statement::Profile { user, values } => {
                let vs: Vec<String> = values.iter().map(|(k, v)| format!("{k} = {v}")).collect();
                write!(f, "profile user {} {{ {} }}", quote(user), vs.join("; "))
            }
            Statement::RoleFor { user, role } => write!(f, "role for {} = {role}", quote(user)),
            Statement::Grant { revoke, role, op, kind, repo } => {
                write!(f, "{} {role} {op} {kind} {repo}", if *revoke { "revoke" } else { "grant" })
            }
            Statement::Bind { event, guards, scenario } => {
                write!(f, "bind on {event}")?;
                for (i, g) in guards.iter().enumerate() {
                    f.write_str(if i == 0 { " when " } else { " and " })?;
                    match g {
                        BindGuard::Role(r) => write!(f, "role {r}")?,
                        BindGuard::Coordinate(c, v) => write!(f, "{c} = {v}")?,
                    }
                }
                write!(f, " run {scenario}")
            }
            Statement::Functional { name, coords, users } => {
                write!(f, "functional {name} over ({})", coords.join(", "))?;
                if !users.is_empty() {
                    let us: Vec<String> = users.iter().map(|u| quote(u)).collect();
                    write!(f, " users {}", us.join(", "))?;
                }
                Ok(())
            }
            Statement::Tick => f.write_str("tick"),
            Statement::Refresh(v) => write!(f, "refresh {v}"),
        }
    }
}
