//! Materialized, profile-dependent views and their update policies.
//!
//! Each view keeps its last materialized rows and the change position they reflect.
//! Rendering only formats those rows for a profile, so a manual or periodic view
//! keeps showing its last materialization until it is refreshed.

mod view;

pub use view::{Column, Layout, Projection, UpdatePolicy, ViewDefinition, DEFAULT_LAYOUT, DEVICE, REGISTRATION};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::calculus::{CalcError, Domain};
use crate::profile::{CoordinateSpace, UserProfile};
use crate::repository::Repository;
use crate::value::ObjectRef;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PublishError {
    #[error("bad definition of view `{view}`: {reason}")]
    BadDefinition { view: String, reason: String },
    #[error("view `{0}` already exists")]
    DuplicateView(String),
    #[error("unknown view `{0}`")]
    UnknownView(String),
    #[error("unknown repository `{0}`")]
    UnknownRepository(String),
    #[error("denied: {0}")]
    Denied(String),
    #[error("change event out of order: expected position {expected}, got {got}")]
    OutOfOrderEvent { expected: u64, got: u64 },
    #[error(transparent)]
    Calc(#[from] CalcError),
}

pub type Result<T, E = PublishError> = std::result::Result<T, E>;

pub type Repositories = BTreeMap<String, Repository>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChangeOp {
    Define,
    Assert,
    Transition,
    AssertFrame,
    RetractFrame,
    Lift,
}

impl fmt::Display for ChangeOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChangeOp::Define => "define",
            ChangeOp::Assert => "assert",
            ChangeOp::Transition => "transition",
            ChangeOp::AssertFrame => "assert-frame",
            ChangeOp::RetractFrame => "retract-frame",
            ChangeOp::Lift => "lift",
        })
    }
}

/// What a change touched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChangeSubject {
    Concept {
        concept: String,
        object: Option<ObjectRef>,
    },
    /// A frame, with the concepts of its individual arguments.
    Frame {
        predicate: String,
        concepts: Vec<String>,
    },
    Meta {
        name: String,
        level: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChangeEvent {
    pub position: u64,
    pub repository: String,
    pub subject: ChangeSubject,
    pub op: ChangeOp,
    pub critical: bool,
}

impl ChangeEvent {
    /// Builds an event and derives its criticality from the repository's critical set.
    pub fn new(position: u64, repo: &Repository, subject: ChangeSubject, op: ChangeOp) -> Self {
        let critical = match &subject {
            ChangeSubject::Concept { concept, .. } => repo.is_critical(concept),
            ChangeSubject::Frame { predicate, concepts } => {
                repo.is_critical(predicate) || concepts.iter().any(|c| repo.is_critical(c))
            }
            ChangeSubject::Meta { name, .. } => repo.is_critical(name),
        };
        ChangeEvent { position, repository: repo.name().to_string(), subject, op, critical }
    }
}

/// Why a view was re-rendered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cause {
    Register,
    Event(u64),
    Tick(u64),
    Manual,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rerender {
    pub view: String,
    pub cause: Cause,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedView {
    pub view: String,
    pub device: String,
    pub profile: BTreeMap<String, String>,
    pub position: u64,
    pub body: String,
}

/// Static over-approximation of what a view's source reads.
#[derive(Debug, Clone, Default)]
struct Dependencies {
    concepts: BTreeSet<String>,
    predicates: BTreeSet<String>,
    metadata: bool,
}

impl Dependencies {
    fn of(def: &ViewDefinition) -> Self {
        let f = &def.formula;
        let mut concepts = f.referenced_concepts();
        concepts.insert(def.over.clone());
        for d in f.domains() {
            if let Domain::Named(n) = d {
                concepts.insert(n);
            }
        }
        let metadata = f.uses_membership() || f.domains().iter().any(|d| matches!(d, Domain::Level(_)));
        Dependencies { concepts, predicates: f.predicates(), metadata }
    }

    fn hit(&self, event: &ChangeEvent, repo: &Repository) -> bool {
        if self.metadata {
            return true;
        }
        match &event.subject {
            ChangeSubject::Concept { concept, .. } => {
                self.concepts.contains(concept)
                    || self
                        .predicates
                        .iter()
                        .any(|p| repo.network().predicate_touches(p, |r| repo.concept_of(r) == Some(concept.as_str())))
            }
            ChangeSubject::Frame { predicate, .. } => self.predicates.contains(predicate),
            ChangeSubject::Meta { .. } => false,
        }
    }
}

#[derive(Debug, Clone)]
struct RegisteredView {
    def: ViewDefinition,
    deps: Dependencies,
    rows: Vec<Vec<String>>,
    position: u64,
}

#[derive(Debug, Clone, Default)]
pub struct Publisher {
    views: BTreeMap<String, RegisteredView>,
    order: Vec<String>,
    position: u64,
    ticks: u64,
    trace: Vec<Rerender>,
}

impl Publisher {
    pub fn new() -> Self {
        Publisher::default()
    }

    /// Position of the last change event consumed.
    pub fn position(&self) -> u64 {
        self.position
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    /// Every re-render performed, in order.
    pub fn trace(&self) -> &[Rerender] {
        &self.trace
    }

    pub fn view(&self, name: &str) -> Result<&ViewDefinition> {
        self.views.get(name).map(|v| &v.def).ok_or_else(|| PublishError::UnknownView(name.into()))
    }

    /// Views in registration order.
    pub fn views(&self) -> impl Iterator<Item = &ViewDefinition> {
        self.order.iter().map(|n| &self.views[n].def)
    }

    pub fn rows(&self, name: &str) -> Result<&[Vec<String>]> {
        self.views.get(name).map(|v| v.rows.as_slice()).ok_or_else(|| PublishError::UnknownView(name.into()))
    }

    pub fn register(&mut self, def: ViewDefinition, repos: &Repositories, space: &CoordinateSpace) -> Result<()> {
        if self.views.contains_key(&def.name) {
            return Err(PublishError::DuplicateView(def.name));
        }
        let repo = repos.get(&def.repository).ok_or_else(|| PublishError::UnknownRepository(def.repository.clone()))?;
        def.validate(repo, space)?;
        let rows = def.materialize(repo)?;
        let name = def.name.clone();
        let deps = Dependencies::of(&def);
        self.views.insert(name.clone(), RegisteredView { def, deps, rows, position: self.position });
        self.order.push(name.clone());
        self.trace.push(Rerender { view: name, cause: Cause::Register });
        Ok(())
    }

    fn rerender(&mut self, name: &str, repos: &Repositories, cause: Cause) -> Result<()> {
        let v = self.views.get_mut(name).ok_or_else(|| PublishError::UnknownView(name.into()))?;
        let repo =
            repos.get(&v.def.repository).ok_or_else(|| PublishError::UnknownRepository(v.def.repository.clone()))?;
        v.rows = v.def.materialize(repo)?;
        v.position = self.position;
        self.trace.push(Rerender { view: name.into(), cause });
        Ok(())
    }

    /// Automatic views whose source depends on a critical event, in registration order.
    pub fn dependents(&self, event: &ChangeEvent, repos: &Repositories) -> Vec<String> {
        if !event.critical {
            return Vec::new();
        }
        let Some(repo) = repos.get(&event.repository) else { return Vec::new() };
        self.order
            .iter()
            .filter(|n| {
                let v = &self.views[*n];
                v.def.policy == UpdatePolicy::Automatic
                    && v.def.repository == event.repository
                    && v.deps.hit(event, repo)
            })
            .cloned()
            .collect()
    }

    /// Consumes the next change event and re-renders each dependent automatic view once.
    pub fn on_change(&mut self, event: &ChangeEvent, repos: &Repositories) -> Result<Vec<String>> {
        if event.position != self.position + 1 {
            return Err(PublishError::OutOfOrderEvent { expected: self.position + 1, got: event.position });
        }
        self.position = event.position;
        let hit = self.dependents(event, repos);
        for name in &hit {
            self.rerender(name, repos, Cause::Event(event.position))?;
        }
        Ok(hit)
    }

    /// Advances the logical clock; periodic views fire at multiples of their interval.
    pub fn tick(&mut self, repos: &Repositories) -> Result<Vec<String>> {
        self.ticks += 1;
        let now = self.ticks;
        let due: Vec<String> = self
            .order
            .iter()
            .filter(|n| matches!(self.views[*n].def.policy, UpdatePolicy::Periodic(k) if now.is_multiple_of(k)))
            .cloned()
            .collect();
        for name in &due {
            self.rerender(name, repos, Cause::Tick(now))?;
        }
        Ok(due)
    }

    pub fn refresh(&mut self, name: &str, repos: &Repositories) -> Result<()> {
        self.rerender(name, repos, Cause::Manual)
    }

    /// Formats the materialized rows for `profile`. Audience tiers are enforced here;
    /// repository grants are the caller's concern.
    pub fn render(&self, name: &str, profile: &UserProfile, space: &CoordinateSpace) -> Result<RenderedView> {
        let v = self.views.get(name).ok_or_else(|| PublishError::UnknownView(name.into()))?;
        if !v.def.visible_to(profile, space) {
            return Err(PublishError::Denied(format!(
                "view `{name}` requires {REGISTRATION}={}",
                v.def.audience.as_deref().unwrap_or_default()
            )));
        }
        let device = ViewDefinition::device_of(profile, space);
        let coords: Vec<String> = profile.values.iter().map(|(k, val)| format!("{k}={val}")).collect();
        let mut body = format!(
            "view: {}\nsource: {}@{}\ndevice: {}\nprofile: {}\n",
            name,
            v.def.repository,
            v.position,
            device,
            coords.join(" ")
        );
        body.push_str(&v.def.expand(&device, &v.rows));
        Ok(RenderedView { view: name.into(), device, profile: profile.values.clone(), position: v.position, body })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{CmpOp, Concept, Formula, Term};
    use crate::frames::Frame;
    use crate::profile::Coordinate;
    use crate::value::{TypeTag, Value};

    fn setup() -> (Repositories, CoordinateSpace) {
        let mut r = Repository::new("hr");
        r.define_concept(Concept::new("Vacancy").key("title", TypeTag::Text).attr("dept", TypeTag::Text)).unwrap();
        r.define_concept(Concept::new("Dept").key("name", TypeTag::Text)).unwrap();
        for (t, d) in [("dev", "IT"), ("qa", "IT"), ("clerk", "HR")] {
            let mut id = BTreeMap::from([("title".into(), Value::text(t))]);
            let o = r.assert_individual("Vacancy", std::mem::take(&mut id)).unwrap();
            r.transition_state(o, "open", BTreeMap::from([("dept".into(), Value::text(d))])).unwrap();
        }
        r.mark_critical("Vacancy");
        let mut space = CoordinateSpace::new();
        space.declare(Coordinate::new("e", &["desktop", "mobile"])).unwrap();
        space.declare(Coordinate::new("p", &["unregistered", "registered", "corporate"])).unwrap();
        (BTreeMap::from([("hr".to_string(), r)]), space)
    }

    fn vacancies() -> ViewDefinition {
        ViewDefinition::new("vacancies", "hr", "Vacancy", Formula::True)
            .select(Column::attr("title"))
            .select(Column::attr("dept"))
            .layout("desktop", Layout::default())
            .layout("mobile", Layout { order: vec!["title".into()], rows: Some(2), media: false })
    }

    fn event(repos: &Repositories, pos: u64, concept: &str) -> ChangeEvent {
        ChangeEvent::new(
            pos,
            &repos["hr"],
            ChangeSubject::Concept { concept: concept.into(), object: None },
            ChangeOp::Assert,
        )
    }

    #[test]
    fn devices_share_rows_but_not_layout() {
        let (repos, space) = setup();
        let mut p = Publisher::new();
        p.register(vacancies(), &repos, &space).unwrap();
        let d = p.render("vacancies", &UserProfile::new("a").with("e", "desktop"), &space).unwrap();
        let m = p.render("vacancies", &UserProfile::new("a").with("e", "mobile"), &space).unwrap();
        assert!(d.body.contains("row: dev | IT\n"));
        assert!(d.body.contains("total: 3 shown: 3\n"));
        assert!(m.body.contains("row: dev\n"));
        assert!(m.body.contains("total: 3 shown: 2\n"));
        assert!(m.body.contains("media: off\n"));
    }

    #[test]
    fn bad_definitions() {
        let (repos, space) = setup();
        let mut p = Publisher::new();
        let missing = vacancies().select(Column::attr("salary"));
        assert!(matches!(p.register(missing, &repos, &space), Err(PublishError::BadDefinition { .. })));
        let partial = ViewDefinition::new("v", "hr", "Vacancy", Formula::True)
            .select(Column::attr("title"))
            .layout("desktop", Layout::default());
        assert!(matches!(p.register(partial, &repos, &space), Err(PublishError::BadDefinition { .. })));
        p.register(vacancies(), &repos, &space).unwrap();
        assert!(matches!(p.register(vacancies(), &repos, &space), Err(PublishError::DuplicateView(_))));
    }

    #[test]
    fn critical_events_reach_dependent_automatic_views_once() {
        let (repos, space) = setup();
        let mut p = Publisher::new();
        p.register(vacancies(), &repos, &space).unwrap();
        let by_dept = ViewDefinition::new(
            "it",
            "hr",
            "Vacancy",
            Formula::cmp(CmpOp::Eq, Term::attr("x", "dept"), Term::lit("IT")),
        )
        .select(Column::attr("title"));
        p.register(by_dept, &repos, &space).unwrap();
        let depts = ViewDefinition::new("depts", "hr", "Dept", Formula::True).select(Column::attr("name"));
        p.register(depts, &repos, &space).unwrap();
        assert_eq!(p.on_change(&event(&repos, 1, "Vacancy"), &repos).unwrap(), vec!["vacancies", "it"]);
        assert!(p.on_change(&event(&repos, 2, "Dept"), &repos).unwrap().is_empty());
        assert!(matches!(p.on_change(&event(&repos, 4, "Vacancy"), &repos), Err(PublishError::OutOfOrderEvent { .. })));
    }

    #[test]
    fn frame_predicates_count_as_dependencies() {
        let (mut repos, space) = setup();
        let r = repos.get_mut("hr").unwrap();
        r.declare_predicate("urgent").unwrap();
        let dev = Term::Individual("Vacancy".into(), vec![Value::text("dev")]);
        r.assert_frame(&Frame::new("urgent", dev.clone(), Term::lit(true))).unwrap();
        let mut p = Publisher::new();
        let def = ViewDefinition::new(
            "urgent",
            "hr",
            "Dept",
            Formula::exists(
                "v",
                Domain::Named("Vacancy".into()),
                Formula::frame("urgent", Term::name("v"), Term::lit(true)),
            ),
        )
        .select(Column::attr("name"));
        p.register(def, &repos, &space).unwrap();
        let e = ChangeEvent::new(
            1,
            &repos["hr"],
            ChangeSubject::Frame { predicate: "urgent".into(), concepts: vec!["Vacancy".into()] },
            ChangeOp::AssertFrame,
        );
        assert!(e.critical);
        assert_eq!(p.on_change(&e, &repos).unwrap(), vec!["urgent"]);
    }

    #[test]
    fn periodic_views_fire_on_multiples() {
        let (repos, space) = setup();
        let mut p = Publisher::new();
        p.register(vacancies().policy(UpdatePolicy::Periodic(3)), &repos, &space).unwrap();
        let fired: Vec<u64> = (1..=6u64).filter(|_| !p.tick(&repos).unwrap().is_empty()).collect();
        assert_eq!(fired, vec![3, 6]);
    }

    #[test]
    fn audience_gates_rendering() {
        let (repos, space) = setup();
        let mut p = Publisher::new();
        p.register(vacancies().audience("corporate"), &repos, &space).unwrap();
        let guest = UserProfile::new("g").with("p", "unregistered");
        let corp = UserProfile::new("c").with("p", "corporate");
        assert!(matches!(p.render("vacancies", &guest, &space), Err(PublishError::Denied(_))));
        assert!(p.render("vacancies", &corp, &space).is_ok());
        assert!(matches!(p.render("nope", &corp, &space), Err(PublishError::UnknownView(_))));
    }

    #[test]
    fn summary_columns_count_matches() {
        let (repos, space) = setup();
        let mut p = Publisher::new();
        let def = ViewDefinition::new("profile", "hr", "Vacancy", Formula::True)
            .select(Column { label: "vacancies".into(), projection: Projection::Count, media: false })
            .select(Column { label: "depts".into(), projection: Projection::Distinct("dept".into()), media: false });
        p.register(def, &repos, &space).unwrap();
        assert_eq!(p.rows("profile").unwrap(), &[vec!["3".to_string(), "2".to_string()]]);
    }
}
