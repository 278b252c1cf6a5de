//! The single-writer state machine behind the CLI and the line protocol.
//!
//! Every successful statement is appended to the log before its change events reach
//! the publisher, so replaying the log from empty reproduces repositories, profiles,
//! grants and materialized views. Sessions are not logged; statements executed by
//! scripts are logged like any other statement.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::access::{
    AccessError, AccessGate, Decision, DenyReason, EventType, Kind, Op, Role, ScriptBinding, SYSTEM_SESSION,
};
use crate::calculus::{self, CalcError, Domain, Env, Term};
use crate::dsl::{self, BindGuard, DslError, Statement, StatementKind, TableSpec};
use crate::frames::{Action, Frame, FrameError};
use crate::log::{LogError, LogRecord, LogWriter};
use crate::profile::{CoordinateSpace, CostModel, Functional, GeneralizedValue, ProfileError, Stage, UserProfile};
use crate::publish::{ChangeEvent, ChangeOp, ChangeSubject, PublishError, Publisher, RenderedView, Repositories};
use crate::repository::Repository;
use crate::tower::{MetaSpec, Tower, TowerError};
use crate::value::{ObjectRef, Value};

pub const DEFAULT_REPOSITORY: &str = "main";

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Calc(#[from] CalcError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Tower(#[from] TowerError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Access(#[from] AccessError),
    #[error(transparent)]
    Publish(#[from] PublishError),
    #[error(transparent)]
    Dsl(#[from] DslError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("{file}:{line}:{col}: {message}")]
    Load { file: String, line: usize, col: usize, message: String },
    #[error("unknown repository `{0}`")]
    UnknownRepository(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("session {0} is closed")]
    SessionClosed(u64),
    #[error("denied: {0}")]
    Denied(String),
}

pub type Result<T, E = EngineError> = std::result::Result<T, E>;

/// Result of applying one statement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Applied {
    pub position: u64,
    /// Views re-rendered by this statement (change propagation, ticks or refreshes).
    pub rerendered: Vec<String>,
}

/// One step a script actually performed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutedAction {
    pub scenario: String,
    pub step: usize,
    pub action: Action,
    /// Rendered body for `render-view` steps.
    pub body: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpenedSession {
    pub id: u64,
    pub actions: Vec<ExecutedAction>,
    /// Set when a login script stopped early; the session stays open.
    pub script_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Stats {
    pub repositories: usize,
    pub concepts: usize,
    pub individuals: usize,
    pub states: usize,
    pub facts: usize,
    pub meta_objects: usize,
    pub views: usize,
    pub profiles: usize,
    pub open_sessions: usize,
    pub log_records: u64,
    pub change_position: u64,
    pub ticks: u64,
    pub rerenders: usize,
}

impl std::fmt::Display for Stats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "repositories={} concepts={} individuals={} states={} facts={} meta={} views={} profiles={} sessions={} log={} changes={} ticks={} rerenders={}",
            self.repositories,
            self.concepts,
            self.individuals,
            self.states,
            self.facts,
            self.meta_objects,
            self.views,
            self.profiles,
            self.open_sessions,
            self.log_records,
            self.change_position,
            self.ticks,
            self.rerenders
        )
    }
}

#[derive(Debug)]
pub struct Engine {
    repos: Repositories,
    current: String,
    max_level: u32,
    space: CoordinateSpace,
    profiles: BTreeMap<String, UserProfile>,
    generalized: BTreeMap<String, GeneralizedValue>,
    cost_models: BTreeMap<String, CostModel>,
    functionals: BTreeMap<String, Functional>,
    gate: AccessGate,
    publisher: Publisher,
    records: Vec<LogRecord>,
    sink: Option<LogWriter>,
    changes: u64,
}

impl Default for Engine {
    fn default() -> Self {
        Engine::new()
    }
}

impl Engine {
    pub fn new() -> Self {
        Engine::with_max_level(Tower::DEFAULT_MAX_LEVEL)
    }

    pub fn with_max_level(max_level: u32) -> Self {
        let mut repos = Repositories::new();
        repos.insert(DEFAULT_REPOSITORY.into(), Repository::with_max_level(DEFAULT_REPOSITORY, max_level));
        Engine {
            repos,
            current: DEFAULT_REPOSITORY.into(),
            max_level,
            space: CoordinateSpace::new(),
            profiles: BTreeMap::new(),
            generalized: BTreeMap::new(),
            cost_models: BTreeMap::new(),
            functionals: BTreeMap::new(),
            gate: AccessGate::new(),
            publisher: Publisher::new(),
            records: Vec::new(),
            sink: None,
            changes: 0,
        }
    }

    // ---- accessors ----

    pub fn repositories(&self) -> &Repositories {
        &self.repos
    }

    pub fn repository(&self, name: &str) -> Result<&Repository> {
        self.repos.get(name).ok_or_else(|| EngineError::UnknownRepository(name.into()))
    }

    pub fn current_repository(&self) -> &str {
        &self.current
    }

    pub fn space(&self) -> &CoordinateSpace {
        &self.space
    }

    pub fn profiles(&self) -> &BTreeMap<String, UserProfile> {
        &self.profiles
    }

    pub fn profile(&self, user: &str) -> Option<&UserProfile> {
        self.profiles.get(user)
    }

    pub fn generalized(&self, name: &str) -> Option<&GeneralizedValue> {
        self.generalized.get(name)
    }

    pub fn cost_model(&self, name: &str) -> Option<&CostModel> {
        self.cost_models.get(name)
    }

    pub fn functional(&self, name: &str) -> Option<&Functional> {
        self.functionals.get(name)
    }

    pub fn gate(&self) -> &AccessGate {
        &self.gate
    }

    pub fn publisher(&self) -> &Publisher {
        &self.publisher
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    pub fn position(&self) -> u64 {
        self.records.len() as u64
    }

    // ---- log plumbing ----

    /// Mirrors every future record to `path` (appending).
    pub fn attach_log(&mut self, path: &Path) -> Result<()> {
        self.sink = Some(LogWriter::append_to(path)?);
        Ok(())
    }

    pub fn flush_log(&mut self) -> Result<()> {
        if let Some(s) = &mut self.sink {
            s.flush()?;
        }
        Ok(())
    }

    /// Rebuilds state from records, which must be contiguous from position 1.
    pub fn replay(records: &[LogRecord], max_level: u32) -> Result<Self> {
        let mut e = Engine::with_max_level(max_level);
        for (i, r) in records.iter().enumerate() {
            let expected = i as u64 + 1;
            let corrupt = |reason: String| LogError::CorruptLog { position: expected, reason };
            if r.position != expected {
                return Err(corrupt(format!("found position {}", r.position)).into());
            }
            e.apply_in(&r.repository, r.statement.clone()).map_err(|err| corrupt(err.to_string()))?;
        }
        Ok(e)
    }

    /// Replays `path` if it exists, then keeps appending to it.
    pub fn open_log(path: &Path, max_level: u32) -> Result<Self> {
        let records = crate::log::read_log(path)?;
        let mut e = Engine::replay(&records, max_level)?;
        e.attach_log(path)?;
        Ok(e)
    }

    // ---- model loading ----

    pub fn load_str(&mut self, src: &str, file: &str) -> Result<Vec<Applied>> {
        let load_err = |line, col, message: String| EngineError::Load { file: file.into(), line, col, message };
        let program = dsl::parse_program(src).map_err(|e| load_err(e.line, e.col, e.message))?;
        program
            .into_iter()
            .map(|l| self.apply(l.statement).map_err(|e| load_err(l.line, l.col, e.to_string())))
            .collect()
    }

    pub fn load_file(&mut self, path: &Path) -> Result<Vec<Applied>> {
        let file = path.display().to_string();
        let src = std::fs::read_to_string(path).map_err(|e| EngineError::Load {
            file: file.clone(),
            line: 0,
            col: 0,
            message: e.to_string(),
        })?;
        self.load_str(&src, &file)
    }

    /// Applies a program given as text in the current repository context.
    pub fn exec(&mut self, src: &str) -> Result<Vec<Applied>> {
        self.load_str(src, "<input>")
    }

    // ---- statements ----

    pub fn apply(&mut self, stmt: Statement) -> Result<Applied> {
        let repo = self.current.clone();
        self.apply_in(&repo, stmt)
    }

    /// Applies `stmt` in repository `repo`, logs it and propagates its changes.
    pub fn apply_in(&mut self, repo: &str, stmt: Statement) -> Result<Applied> {
        let (repo, changes, mut rerendered) = self.execute(repo, &stmt)?;
        let record = LogRecord { position: self.position() + 1, repository: repo.clone(), statement: stmt };
        if let Some(sink) = &mut self.sink {
            sink.append(&record)?;
        }
        let position = record.position;
        self.records.push(record);
        for (subject, op) in changes {
            self.changes += 1;
            let event = ChangeEvent::new(self.changes, &self.repos[&repo], subject, op);
            rerendered.extend(self.publisher.on_change(&event, &self.repos)?);
        }
        Ok(Applied { position, rerendered })
    }

    fn repo_mut(&mut self, name: &str) -> Result<&mut Repository> {
        self.repos.get_mut(name).ok_or_else(|| EngineError::UnknownRepository(name.into()))
    }

    fn resolve_all(repo: &Repository, items: &[(String, Term)]) -> Result<BTreeMap<String, Value>> {
        items.iter().map(|(k, t)| Ok((k.clone(), repo.resolve_value(t)?))).collect()
    }

    fn table(&self, t: &TableSpec) -> Result<GeneralizedValue> {
        Ok(self.space.generalized(t.free.clone(), t.entries.iter().cloned())?)
    }

    fn concepts_of(repo: &Repository, values: [&Value; 2]) -> Vec<String> {
        values.iter().filter_map(|v| v.as_obj()).filter_map(|r| repo.concept_of(r).map(String::from)).collect()
    }

    /// Performs the state change. Returns the record's repository and the change subjects.
    #[allow(clippy::type_complexity)]
    fn execute(
        &mut self,
        repo_name: &str,
        stmt: &Statement,
    ) -> Result<(String, Vec<(ChangeSubject, ChangeOp)>, Vec<String>)> {
        if let Statement::Repository(name) = stmt {
            if !self.repos.contains_key(name) {
                self.repos.insert(name.clone(), Repository::with_max_level(name, self.max_level));
            }
            self.current = name.clone();
            return Ok((name.clone(), Vec::new(), Vec::new()));
        }
        let rn = repo_name.to_string();
        let mut changes = Vec::new();
        let mut rerendered = Vec::new();
        match stmt {
            Statement::Repository(_) => unreachable!("handled above"),
            Statement::Critical(names) => {
                let repo = self.repo_mut(&rn)?;
                for n in names {
                    repo.mark_critical(n);
                }
            }
            Statement::Concept(c) => {
                self.repo_mut(&rn)?.define_concept(c.clone())?;
                changes.push((ChangeSubject::Concept { concept: c.name.clone(), object: None }, ChangeOp::Define));
            }
            Statement::Individual { concept, identity } => {
                let repo = self.repo_mut(&rn)?;
                let values = Self::resolve_all(repo, identity)?;
                let oid = repo.assert_individual(concept, values)?;
                changes.push((
                    ChangeSubject::Concept { concept: concept.clone(), object: Some(ObjectRef::data(oid)) },
                    ChangeOp::Assert,
                ));
            }
            Statement::State { target, cause, updates } => {
                let repo = self.repo_mut(&rn)?;
                let oid = repo.resolve_individual(target)?;
                let values = Self::resolve_all(repo, updates)?;
                repo.transition_state(oid, cause, values)?;
                let r = ObjectRef::data(oid);
                let concept = repo.concept_of(r).unwrap_or_default().to_string();
                changes.push((ChangeSubject::Concept { concept, object: Some(r) }, ChangeOp::Transition));
            }
            Statement::Predicate(p) => self.repo_mut(&rn)?.declare_predicate(p)?,
            Statement::Constant { name, value } => {
                let repo = self.repo_mut(&rn)?;
                if repo.tower().by_name(name).is_some() || repo.store().has_concept(name) {
                    return Err(FrameError::DuplicateName { kind: "name", name: name.clone() }.into());
                }
                repo.declare_constant(name, value)?;
            }
            Statement::Fact(frame) | Statement::Retract(frame) => {
                let repo = self.repo_mut(&rn)?;
                let assert = matches!(stmt, Statement::Fact(_));
                let ack = if assert { repo.assert_frame(frame)? } else { repo.retract_frame(frame)? };
                if ack.changed {
                    let s = repo.resolve_value(&frame.subject)?;
                    let o = repo.resolve_value(&frame.object)?;
                    let concepts = Self::concepts_of(repo, [&s, &o]);
                    let op = if assert { ChangeOp::AssertFrame } else { ChangeOp::RetractFrame };
                    changes.push((ChangeSubject::Frame { predicate: frame.predicate.clone(), concepts }, op));
                }
            }
            Statement::Meta { name, level, domain, var, formula, descriptors } => {
                let repo = self.repo_mut(&rn)?;
                let domain_level = match domain {
                    Domain::Named(_) => 0,
                    Domain::Level(j) => *j,
                };
                if *level != domain_level + 1 {
                    return Err(TowerError::LevelMismatch {
                        name: name.clone(),
                        declared: *level,
                        domain: domain_level,
                    }
                    .into());
                }
                let r = repo.lift(MetaSpec {
                    name: name.clone(),
                    domain: domain.clone(),
                    var: var.clone(),
                    defining: formula.clone(),
                    descriptors: dsl::descriptor_map(descriptors),
                })?;
                changes.push((ChangeSubject::Meta { name: name.clone(), level: r.level }, ChangeOp::Lift));
            }
            Statement::View(def) => {
                let mut def = def.clone();
                def.repository = rn.clone();
                self.publisher.register(def, &self.repos, &self.space)?;
            }
            Statement::Scenario(s) => {
                let repo = self.repo_mut(&rn)?;
                if let Some(bad) = s.guard.predicates().into_iter().find(|p| !repo.network().has_predicate(p)) {
                    return Err(FrameError::UnknownPredicate(bad).into());
                }
                repo.network.add_scenario(s.clone())?;
            }
            Statement::Coordinate(c) => self.space.declare(c.clone())?,
            Statement::Generalized { name, table } => {
                if self.generalized.contains_key(name) {
                    return Err(ProfileError::DuplicateName(name.clone()).into());
                }
                let gv = self.table(table)?;
                self.generalized.insert(name.clone(), gv);
            }
            Statement::CostModel { name, request, response, stages } => {
                if self.cost_models.contains_key(name) {
                    return Err(ProfileError::DuplicateName(name.clone()).into());
                }
                let stages = stages
                    .iter()
                    .map(|(l, q)| Ok(Stage { duration: *l, overhead: self.table(q)? }))
                    .collect::<Result<Vec<_>>>()?;
                let model = CostModel::new(name, self.table(request)?, self.table(response)?, stages)?;
                self.cost_models.insert(name.clone(), model);
            }
            Statement::Profile { user, values } => {
                let mut p = UserProfile::new(user);
                for (c, v) in values {
                    self.space.check(c, v)?;
                    p = p.with(c, v);
                }
                self.profiles.insert(user.clone(), p);
            }
            Statement::RoleFor { user, role } => self.gate.assign_role(user, *role),
            Statement::Grant { revoke, role, op, kind, repo } => {
                let g = crate::access::Grant { repo: repo.clone(), kind: *kind, op: *op };
                if *revoke {
                    self.gate.revoke(*role, g)
                } else {
                    self.gate.grant(*role, g)
                }
            }
            Statement::Bind { event, guards, scenario } => {
                if self.repository(&rn)?.network().scenario(scenario).is_none() {
                    return Err(EngineError::UnknownScenario(scenario.clone()));
                }
                let mut binding = ScriptBinding {
                    event: *event,
                    role: None,
                    coords: Vec::new(),
                    repository: rn.clone(),
                    scenario: scenario.clone(),
                };
                for g in guards {
                    match g {
                        BindGuard::Role(r) => binding.role = Some(*r),
                        BindGuard::Coordinate(c, v) => {
                            self.space.check(c, v)?;
                            binding.coords.push((c.clone(), v.clone()));
                        }
                    }
                }
                self.gate.bind(binding);
            }
            Statement::Functional { name, coords, users } => {
                if self.functionals.contains_key(name) {
                    return Err(ProfileError::DuplicateName(name.clone()).into());
                }
                let base: Vec<String> =
                    if users.is_empty() { self.profiles.keys().cloned().collect() } else { users.clone() };
                let coords: Vec<&str> = coords.iter().map(String::as_str).collect();
                let f = Functional::new(name, &coords, base);
                f.validate(&self.space)?;
                self.functionals.insert(name.clone(), f);
            }
            Statement::Tick => rerendered = self.publisher.tick(&self.repos)?,
            Statement::Refresh(v) => {
                self.publisher.refresh(v, &self.repos)?;
                rerendered.push(v.clone());
            }
        }
        Ok((rn, changes, rerendered))
    }

    // ---- sessions ----

    /// Opens a session and runs login-bound scripts. A failing script leaves the session open.
    pub fn open_session(&mut self, user: &str) -> Result<OpenedSession> {
        let profile = self.profiles.get(user).cloned();
        let id = self.gate.open_session(user, profile.as_ref(), self.position())?;
        let (actions, script_error) = match self.dispatch_event(EventType::Login, id, "") {
            Ok(a) => (a, None),
            Err(e) => (Vec::new(), Some(e.to_string())),
        };
        Ok(OpenedSession { id, actions, script_error })
    }

    pub fn close_session(&mut self, id: u64) -> Result<()> {
        let at = self.position();
        Ok(self.gate.close_session(id, at)?)
    }

    pub fn authorize(&self, id: u64, repo: &str, kind: Kind, op: Op) -> Result<Decision> {
        Ok(self.gate.authorize(id, repo, kind, op)?)
    }

    /// Renders a view for an open session, checking the repository read grant first.
    pub fn render(&self, view: &str, session: u64) -> Result<RenderedView> {
        let s = self.gate.session(session)?;
        let def = self.publisher.view(view)?;
        match s.authorize(&def.repository, Kind::Data, Op::Read) {
            Decision::Allow => Ok(self.publisher.render(view, &s.profile, &self.space)?),
            Decision::Deny(DenyReason::ClosedSession) => Err(EngineError::SessionClosed(session)),
            Decision::Deny(r) => Err(EngineError::Denied(r.to_string())),
        }
    }

    /// Renders a view for a user's stored profile, without a session or grant check.
    pub fn render_for_user(&self, view: &str, user: &str) -> Result<RenderedView> {
        let profile = self.profiles.get(user).cloned().unwrap_or_else(|| UserProfile::new(user));
        Ok(self.publisher.render(view, &profile, &self.space)?)
    }

    /// Views the session may render, in registration order.
    pub fn visible_views(&self, session: u64) -> Result<Vec<String>> {
        let names: Vec<String> = self.publisher.views().map(|v| v.name.clone()).collect();
        Ok(names.into_iter().filter(|v| self.render(v, session).is_ok()).collect())
    }

    /// Runs every binding for `event` that matches the session, in binding order.
    pub fn dispatch_event(&mut self, event: EventType, session: u64, payload: &str) -> Result<Vec<ExecutedAction>> {
        let s = self.gate.session(session)?.clone();
        if !s.is_open() {
            return Err(EngineError::SessionClosed(session));
        }
        let mut done = Vec::new();
        for b in self.gate.matching(event, session)? {
            let repo = self.repository(&b.repository)?;
            let scenario = repo
                .network()
                .scenario(&b.scenario)
                .cloned()
                .ok_or_else(|| EngineError::UnknownScenario(b.scenario.clone()))?;
            let mut env = Env::new();
            env.bind("user", Value::text(&s.user));
            env.bind("role", Value::text(s.role.as_str()));
            env.bind("payload", Value::text(payload));
            for (c, v) in &s.profile.values {
                env.bind(c, Value::text(v));
            }
            let fired = calculus::eval(&scenario.guard, &repo.snapshot(), &mut env.clone())
                .map_err(|e| AccessError::ScriptFailure { step: 0, reason: e.to_string() })?;
            if !fired {
                continue;
            }
            for (k, step) in scenario.steps.iter().enumerate() {
                let step_no = k + 1;
                let fail = |reason: String| AccessError::ScriptFailure { step: step_no, reason };
                let action = ground_action(step, &env);
                let body = match &action {
                    Action::AssertFrame(_) | Action::TransitionState { .. } => {
                        if let Decision::Deny(r) = s.authorize(&b.repository, Kind::Data, Op::Write) {
                            return Err(fail(r.to_string()).into());
                        }
                        let stmt = match &action {
                            Action::AssertFrame(f) => Statement::Fact(f.clone()),
                            Action::TransitionState { target, cause, updates } => Statement::State {
                                target: target.clone(),
                                cause: cause.clone(),
                                updates: updates.clone(),
                            },
                            _ => unreachable!(),
                        };
                        self.apply_in(&b.repository, stmt).map_err(|e| fail(e.to_string()))?;
                        None
                    }
                    Action::RenderView(v) => {
                        let r = self.render(v, session).map_err(|e| fail(e.to_string()))?;
                        Some(r.body)
                    }
                    Action::Deny(reason) => {
                        done.push(ExecutedAction {
                            scenario: scenario.name.clone(),
                            step: step_no,
                            action: action.clone(),
                            body: None,
                        });
                        return Err(fail(format!("denied by script: {reason}")).into());
                    }
                };
                done.push(ExecutedAction { scenario: scenario.name.clone(), step: step_no, action, body });
            }
        }
        Ok(done)
    }

    /// Timer events run under the system session.
    pub fn timer(&mut self, payload: &str) -> Result<Vec<ExecutedAction>> {
        self.dispatch_event(EventType::Timer, SYSTEM_SESSION, payload)
    }

    // ---- profile evaluation ----

    pub fn estimate_request_cost(&self, model: &str, user: &str) -> Result<i64> {
        let m = self.cost_models.get(model).ok_or_else(|| ProfileError::UnknownCostModel(model.into()))?;
        let p = self.profiles.get(user).cloned().unwrap_or_else(|| UserProfile::new(user));
        Ok(self.space.estimate_request_cost(m, &p)?)
    }

    // ---- inspection ----

    /// Every view rendered for every profile, keyed `view/user`; failures keep their message.
    pub fn snapshot_bodies(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        for v in self.publisher.views() {
            for (user, p) in &self.profiles {
                let body = match self.publisher.render(&v.name, p, &self.space) {
                    Ok(r) => r.body,
                    Err(e) => format!("error: {e}"),
                };
                out.insert(format!("{}/{user}", v.name), body);
            }
        }
        out
    }

    pub fn stats(&self) -> Stats {
        let mut s = Stats {
            repositories: self.repos.len(),
            views: self.publisher.views().count(),
            profiles: self.profiles.len(),
            open_sessions: self.gate.sessions().filter(|s| s.is_open() && s.id != SYSTEM_SESSION).count(),
            log_records: self.position(),
            change_position: self.changes,
            ticks: self.publisher.ticks(),
            rerenders: self.publisher.trace().len(),
            ..Stats::default()
        };
        for r in self.repos.values() {
            s.concepts += r.store().concepts().count();
            s.individuals += r.store().len();
            s.states += r.store().state_count();
            s.facts += r.network().fact_count();
            s.meta_objects += r.tower().len();
        }
        s
    }

    /// Authorization needed to run a statement through a session.
    pub fn authorize_statement(&self, session: u64, repo: &str, stmt: &Statement) -> Result<()> {
        let s = self.gate.session(session)?;
        let decision = match stmt.kind() {
            StatementKind::Data => s.authorize(repo, Kind::Data, Op::Write),
            StatementKind::Schema | StatementKind::Clock => s.authorize(repo, Kind::Metadata, Op::Write),
            StatementKind::Admin if !s.is_open() => Decision::Deny(DenyReason::ClosedSession),
            StatementKind::Admin if s.role == Role::Administrator => Decision::Allow,
            StatementKind::Admin => Decision::Deny(DenyReason::NoGrant),
        };
        match decision {
            Decision::Allow => Ok(()),
            Decision::Deny(DenyReason::ClosedSession) => Err(EngineError::SessionClosed(session)),
            Decision::Deny(r) => Err(EngineError::Denied(r.to_string())),
        }
    }
}

/// Substitutes bound script variables (`user`, `payload`, coordinates) into an action.
fn ground_action(action: &Action, env: &Env) -> Action {
    let g = |t: &Term| match t {
        Term::Name(n) => env.get(n).map_or_else(|| t.clone(), |v| Term::Lit(v.clone())),
        other => other.clone(),
    };
    match action {
        Action::AssertFrame(f) => Action::AssertFrame(Frame::new(&f.predicate, g(&f.subject), g(&f.object))),
        Action::TransitionState { target, cause, updates } => Action::TransitionState {
            target: g(target),
            cause: cause.clone(),
            updates: updates.iter().map(|(k, v)| (k.clone(), g(v))).collect(),
        },
        other => other.clone(),
    }
}
