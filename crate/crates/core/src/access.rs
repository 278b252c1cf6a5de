//! Session-scoped role authorization and event bindings.
//!
//! Sessions copy the role matrix when they open, so later grant changes only affect
//! new sessions. Session 0 is the always-open system session used for timer events.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::profile::UserProfile;

/// Repository the web-designer role fully controls.
pub const INTERFACE_ELEMENTS: &str = "interface-elements";
/// Repository the content-manager role fully controls.
pub const CONTENT: &str = "content";

pub const SYSTEM_SESSION: u64 = 0;
pub const SYSTEM_USER: &str = "system";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AccessError {
    #[error("unknown user `{0}`")]
    UnknownUser(String),
    #[error("unknown session {0}")]
    UnknownSession(u64),
    #[error("session {0} is already closed")]
    AlreadyClosed(u64),
    #[error("the system session cannot be closed")]
    SystemSession,
    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },
    #[error("script step {step} failed: {reason}")]
    ScriptFailure { step: usize, reason: String },
}

pub type Result<T, E = AccessError> = std::result::Result<T, E>;

macro_rules! keyword_enum {
    ($(#[$m:meta])* $name:ident, $kind:literal { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = AccessError;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(AccessError::UnknownName { kind: $kind, name: s.to_string() }),
                }
            }
        }
    };
}

keyword_enum!(Role, "role" {
    Administrator => "administrator",
    Manager => "manager",
    Ordinary => "ordinary",
    WebDesigner => "web-designer",
    ContentManager => "content-manager",
});

keyword_enum!(Kind, "kind" { Data => "data", Metadata => "metadata" });

keyword_enum!(Op, "operation" { Read => "read", Write => "write" });

keyword_enum!(
    /// Events scripts can be bound to.
    EventType, "event" {
        Login => "login",
        DataChange => "data-change",
        ViewRequest => "view-request",
        Timer => "timer",
    }
);

impl Role {
    /// Specializations build on the ordinary role's explicit grants.
    pub fn extends_ordinary(self) -> bool {
        matches!(self, Role::Ordinary | Role::WebDesigner | Role::ContentManager)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RepoScope {
    Any,
    Named(String),
}

impl RepoScope {
    fn covers(&self, repo: &str) -> bool {
        match self {
            RepoScope::Any => true,
            RepoScope::Named(n) => n == repo,
        }
    }
}

impl fmt::Display for RepoScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RepoScope::Any => f.write_str("*"),
            RepoScope::Named(n) => f.write_str(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Grant {
    pub repo: RepoScope,
    pub kind: Kind,
    pub op: Op,
}

impl Grant {
    fn covers(&self, repo: &str, kind: Kind, op: Op) -> bool {
        self.kind == kind && self.op == op && self.repo.covers(repo)
    }
}

/// Baseline role decisions plus explicit grants and revocations. Revocations win.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RoleMatrix {
    grants: BTreeMap<Role, BTreeSet<Grant>>,
    revokes: BTreeMap<Role, BTreeSet<Grant>>,
}

impl RoleMatrix {
    pub fn grant(&mut self, role: Role, grant: Grant) {
        if let Some(r) = self.revokes.get_mut(&role) {
            r.remove(&grant);
        }
        self.grants.entry(role).or_default().insert(grant);
    }

    pub fn revoke(&mut self, role: Role, grant: Grant) {
        if let Some(g) = self.grants.get_mut(&role) {
            g.remove(&grant);
        }
        self.revokes.entry(role).or_default().insert(grant);
    }

    pub fn baseline(role: Role, repo: &str, kind: Kind, op: Op) -> bool {
        match role {
            Role::Administrator => true,
            Role::Manager => kind == Kind::Data || op == Op::Read,
            Role::Ordinary => false,
            Role::WebDesigner => repo == INTERFACE_ELEMENTS,
            Role::ContentManager => repo == CONTENT,
        }
    }

    fn explicit(&self, role: Role) -> impl Iterator<Item = &Grant> {
        let own = self.grants.get(&role).into_iter().flatten();
        let inherited = (role != Role::Ordinary && role.extends_ordinary())
            .then(|| self.grants.get(&Role::Ordinary))
            .flatten()
            .into_iter()
            .flatten();
        own.chain(inherited)
    }

    pub fn allows(&self, role: Role, repo: &str, kind: Kind, op: Op) -> bool {
        if self.revokes.get(&role).is_some_and(|r| r.iter().any(|g| g.covers(repo, kind, op))) {
            return false;
        }
        Self::baseline(role, repo, kind, op) || self.explicit(role).any(|g| g.covers(repo, kind, op))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DenyReason {
    ClosedSession,
    NoGrant,
}

impl fmt::Display for DenyReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DenyReason::ClosedSession => "closed-session",
            DenyReason::NoGrant => "no-grant",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Allow,
    Deny(DenyReason),
}

impl Decision {
    pub fn is_allow(self) -> bool {
        self == Decision::Allow
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decision::Allow => f.write_str("allow"),
            Decision::Deny(r) => write!(f, "deny reason={r}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Session {
    pub id: u64,
    pub user: String,
    pub role: Role,
    pub profile: UserProfile,
    matrix: Arc<RoleMatrix>,
    pub opened_at: u64,
    pub closed_at: Option<u64>,
}

impl Session {
    pub fn is_open(&self) -> bool {
        self.closed_at.is_none()
    }

    pub fn authorize(&self, repo: &str, kind: Kind, op: Op) -> Decision {
        if !self.is_open() {
            Decision::Deny(DenyReason::ClosedSession)
        } else if self.matrix.allows(self.role, repo, kind, op) {
            Decision::Allow
        } else {
            Decision::Deny(DenyReason::NoGrant)
        }
    }
}

/// Runs `scenario` (in `repository`) when `event` fires for a session matching the guards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptBinding {
    pub event: EventType,
    pub role: Option<Role>,
    pub coords: Vec<(String, String)>,
    pub repository: String,
    pub scenario: String,
}

impl ScriptBinding {
    pub fn matches(&self, event: EventType, session: &Session) -> bool {
        self.event == event
            && self.role.is_none_or(|r| r == session.role)
            && self.coords.iter().all(|(c, v)| session.profile.get(c) == Some(v.as_str()))
    }
}

#[derive(Debug, Clone)]
pub struct AccessGate {
    matrix: Arc<RoleMatrix>,
    roles: BTreeMap<String, Role>,
    sessions: BTreeMap<u64, Session>,
    next_session: u64,
    bindings: Vec<ScriptBinding>,
}

impl Default for AccessGate {
    fn default() -> Self {
        AccessGate::new()
    }
}

impl AccessGate {
    pub fn new() -> Self {
        let matrix = Arc::new(RoleMatrix::default());
        let system = Session {
            id: SYSTEM_SESSION,
            user: SYSTEM_USER.into(),
            role: Role::Administrator,
            profile: UserProfile::new(SYSTEM_USER),
            matrix: matrix.clone(),
            opened_at: 0,
            closed_at: None,
        };
        AccessGate {
            matrix,
            roles: BTreeMap::new(),
            sessions: BTreeMap::from([(SYSTEM_SESSION, system)]),
            next_session: 1,
            bindings: Vec::new(),
        }
    }

    pub fn matrix(&self) -> &RoleMatrix {
        &self.matrix
    }

    pub fn grant(&mut self, role: Role, grant: Grant) {
        Arc::make_mut(&mut self.matrix).grant(role, grant);
    }

    pub fn revoke(&mut self, role: Role, grant: Grant) {
        Arc::make_mut(&mut self.matrix).revoke(role, grant);
    }

    pub fn assign_role(&mut self, user: &str, role: Role) {
        self.roles.insert(user.into(), role);
    }

    pub fn role_of(&self, user: &str) -> Option<Role> {
        self.roles.get(user).copied()
    }

    pub fn has_user(&self, user: &str) -> bool {
        self.roles.contains_key(user)
    }

    pub fn bind(&mut self, binding: ScriptBinding) {
        self.bindings.push(binding);
    }

    pub fn bindings(&self) -> &[ScriptBinding] {
        &self.bindings
    }

    /// Opens a session for `user`. A user with a profile but no role is ordinary;
    /// a user with neither is unknown.
    pub fn open_session(&mut self, user: &str, profile: Option<&UserProfile>, at: u64) -> Result<u64> {
        let role = match (self.roles.get(user), profile) {
            (Some(r), _) => *r,
            (None, Some(_)) => Role::Ordinary,
            (None, None) => return Err(AccessError::UnknownUser(user.into())),
        };
        let id = self.next_session;
        self.next_session += 1;
        self.sessions.insert(
            id,
            Session {
                id,
                user: user.into(),
                role,
                profile: profile.cloned().unwrap_or_else(|| UserProfile::new(user)),
                matrix: self.matrix.clone(),
                opened_at: at,
                closed_at: None,
            },
        );
        Ok(id)
    }

    pub fn close_session(&mut self, id: u64, at: u64) -> Result<()> {
        if id == SYSTEM_SESSION {
            return Err(AccessError::SystemSession);
        }
        let s = self.sessions.get_mut(&id).ok_or(AccessError::UnknownSession(id))?;
        if s.closed_at.is_some() {
            return Err(AccessError::AlreadyClosed(id));
        }
        s.closed_at = Some(at);
        Ok(())
    }

    pub fn session(&self, id: u64) -> Result<&Session> {
        self.sessions.get(&id).ok_or(AccessError::UnknownSession(id))
    }

    pub fn sessions(&self) -> impl Iterator<Item = &Session> {
        self.sessions.values()
    }

    pub fn authorize(&self, id: u64, repo: &str, kind: Kind, op: Op) -> Result<Decision> {
        Ok(self.session(id)?.authorize(repo, kind, op))
    }

    /// Bindings that fire for `event` on session `id`, in binding order.
    pub fn matching(&self, event: EventType, id: u64) -> Result<Vec<ScriptBinding>> {
        let s = self.session(id)?;
        Ok(self.bindings.iter().filter(|b| b.matches(event, s)).cloned().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gate() -> AccessGate {
        let mut g = AccessGate::new();
        g.assign_role("root", Role::Administrator);
        g.assign_role("ivanov", Role::Manager);
        g.assign_role("petrov", Role::Ordinary);
        g.assign_role("web", Role::WebDesigner);
        g.grant(Role::Ordinary, Grant { repo: RepoScope::Named("hr".into()), kind: Kind::Data, op: Op::Read });
        g
    }

    #[test]
    fn baseline_rows() {
        let mut g = gate();
        let a = g.open_session("root", None, 1).unwrap();
        let m = g.open_session("ivanov", None, 2).unwrap();
        let o = g.open_session("petrov", None, 3).unwrap();
        let w = g.open_session("web", None, 4).unwrap();
        assert!(g.authorize(a, "x", Kind::Metadata, Op::Write).unwrap().is_allow());
        assert!(g.authorize(m, "x", Kind::Data, Op::Write).unwrap().is_allow());
        assert_eq!(g.authorize(m, "x", Kind::Metadata, Op::Write).unwrap(), Decision::Deny(DenyReason::NoGrant));
        assert!(g.authorize(o, "hr", Kind::Data, Op::Read).unwrap().is_allow());
        assert!(!g.authorize(o, "other", Kind::Data, Op::Read).unwrap().is_allow());
        assert_eq!(g.authorize(o, "hr", Kind::Metadata, Op::Read).unwrap(), Decision::Deny(DenyReason::NoGrant));
        assert!(g.authorize(w, INTERFACE_ELEMENTS, Kind::Data, Op::Write).unwrap().is_allow());
        assert!(g.authorize(w, "hr", Kind::Data, Op::Read).unwrap().is_allow());
        assert!(!g.authorize(w, "hr", Kind::Data, Op::Write).unwrap().is_allow());
    }

    #[test]
    fn closing_denies_and_isolates() {
        let mut g = gate();
        let s1 = g.open_session("ivanov", None, 1).unwrap();
        let s2 = g.open_session("ivanov", None, 2).unwrap();
        assert_ne!(s1, s2);
        g.close_session(s1, 3).unwrap();
        assert_eq!(g.authorize(s1, "hr", Kind::Data, Op::Read).unwrap(), Decision::Deny(DenyReason::ClosedSession));
        assert!(g.authorize(s2, "hr", Kind::Data, Op::Read).unwrap().is_allow());
        assert_eq!(g.close_session(s1, 4), Err(AccessError::AlreadyClosed(s1)));
        assert_eq!(g.close_session(99, 4), Err(AccessError::UnknownSession(99)));
        assert_eq!(g.close_session(SYSTEM_SESSION, 4), Err(AccessError::SystemSession));
        assert!(matches!(g.authorize(99, "hr", Kind::Data, Op::Read), Err(AccessError::UnknownSession(99))));
    }

    #[test]
    fn unknown_user_and_default_role() {
        let mut g = gate();
        assert_eq!(g.open_session("nobody", None, 1), Err(AccessError::UnknownUser("nobody".into())));
        let p = UserProfile::new("guest");
        let s = g.open_session("guest", Some(&p), 1).unwrap();
        assert_eq!(g.session(s).unwrap().role, Role::Ordinary);
    }

    #[test]
    fn sessions_keep_the_matrix_they_opened_with() {
        let mut g = gate();
        let before = g.open_session("petrov", None, 1).unwrap();
        g.revoke(Role::Ordinary, Grant { repo: RepoScope::Named("hr".into()), kind: Kind::Data, op: Op::Read });
        let after = g.open_session("petrov", None, 2).unwrap();
        assert!(g.authorize(before, "hr", Kind::Data, Op::Read).unwrap().is_allow());
        assert!(!g.authorize(after, "hr", Kind::Data, Op::Read).unwrap().is_allow());
    }

    #[test]
    fn revocation_overrides_baseline() {
        let mut m = RoleMatrix::default();
        m.revoke(Role::Manager, Grant { repo: RepoScope::Any, kind: Kind::Data, op: Op::Write });
        assert!(!m.allows(Role::Manager, "hr", Kind::Data, Op::Write));
        assert!(m.allows(Role::Manager, "hr", Kind::Data, Op::Read));
    }

    #[test]
    fn bindings_filter_by_role_and_coordinates() {
        let mut g = gate();
        let b = ScriptBinding {
            event: EventType::Login,
            role: None,
            coords: vec![("p".into(), "corporate".into())],
            repository: "hr".into(),
            scenario: "welcome".into(),
        };
        g.bind(b.clone());
        let corp = UserProfile::new("petrov").with("p", "corporate");
        let s = g.open_session("petrov", Some(&corp), 1).unwrap();
        assert_eq!(g.matching(EventType::Login, s).unwrap(), vec![b]);
        assert!(g.matching(EventType::Timer, s).unwrap().is_empty());
        let plain = UserProfile::new("petrov").with("p", "registered");
        let s2 = g.open_session("petrov", Some(&plain), 2).unwrap();
        assert!(g.matching(EventType::Login, s2).unwrap().is_empty());
    }

    #[test]
    fn keywords_round_trip() {
        for r in Role::ALL {
            assert_eq!(r.as_str().parse::<Role>().unwrap(), *r);
        }
        assert_eq!("data-change".parse::<EventType>().unwrap(), EventType::DataChange);
        assert!("boss".parse::<Role>().is_err());
    }
}
