use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::calculus::{Domain, Formula};
use crate::profile::{CoordinateSpace, UserProfile};
use crate::repository::Repository;
use crate::value::Value;

use super::{PublishError, Result};

/// Coordinate holding the device type.
pub const DEVICE: &str = "e";
/// Coordinate holding the registration status.
pub const REGISTRATION: &str = "p";
/// Layout used when the device coordinate is undeclared or has no specific layout.
pub const DEFAULT_LAYOUT: &str = "default";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Projection {
    Attr(String),
    /// Number of matching individuals.
    Count,
    /// Number of distinct set values of an attribute among the matches.
    Distinct(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub label: String,
    pub projection: Projection,
    /// Dropped by layouts that exclude multimedia.
    pub media: bool,
}

impl Column {
    pub fn attr(name: &str) -> Self {
        Column { label: name.into(), projection: Projection::Attr(name.into()), media: false }
    }

    fn is_aggregate(&self) -> bool {
        !matches!(self.projection, Projection::Attr(_))
    }
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.projection {
            Projection::Attr(a) => f.write_str(a)?,
            Projection::Count => f.write_str("count")?,
            Projection::Distinct(a) => write!(f, "distinct {a}")?,
        }
        let default_label = match &self.projection {
            Projection::Attr(a) => a.as_str(),
            Projection::Count => "count",
            Projection::Distinct(a) => a.as_str(),
        };
        if self.label != default_label || matches!(self.projection, Projection::Distinct(_)) {
            write!(f, " as {}", self.label)?;
        }
        if self.media {
            f.write_str(" media")?;
        }
        Ok(())
    }
}

/// Per-device presentation: which columns in which order, a row cap, multimedia on/off.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub order: Vec<String>,
    pub rows: Option<usize>,
    pub media: bool,
}

impl Default for Layout {
    fn default() -> Self {
        Layout { order: Vec::new(), rows: None, media: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdatePolicy {
    Automatic,
    Periodic(u64),
    Manual,
}

impl fmt::Display for UpdatePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UpdatePolicy::Automatic => f.write_str("automatic"),
            UpdatePolicy::Periodic(n) => write!(f, "periodic {n}"),
            UpdatePolicy::Manual => f.write_str("manual"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewDefinition {
    pub name: String,
    pub repository: String,
    pub over: String,
    pub var: String,
    pub formula: Formula,
    pub columns: Vec<Column>,
    pub layouts: BTreeMap<String, Layout>,
    pub policy: UpdatePolicy,
    /// Minimum registration status, by position in the registration coordinate.
    pub audience: Option<String>,
}

impl ViewDefinition {
    pub fn new(name: &str, repository: &str, over: &str, formula: Formula) -> Self {
        ViewDefinition {
            name: name.into(),
            repository: repository.into(),
            over: over.into(),
            var: "x".into(),
            formula,
            columns: Vec::new(),
            layouts: BTreeMap::new(),
            policy: UpdatePolicy::Automatic,
            audience: None,
        }
    }

    pub fn select(mut self, column: Column) -> Self {
        self.columns.push(column);
        self
    }

    pub fn layout(mut self, device: &str, layout: Layout) -> Self {
        self.layouts.insert(device.into(), layout);
        self
    }

    pub fn policy(mut self, policy: UpdatePolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn audience(mut self, tier: &str) -> Self {
        self.audience = Some(tier.into());
        self
    }

    pub fn is_summary(&self) -> bool {
        self.columns.iter().any(Column::is_aggregate)
    }

    fn bad(&self, reason: impl Into<String>) -> PublishError {
        PublishError::BadDefinition { view: self.name.clone(), reason: reason.into() }
    }

    pub(crate) fn validate(&self, repo: &Repository, space: &CoordinateSpace) -> Result<()> {
        let concept = repo.store().concept(&self.over).map_err(|e| self.bad(e.to_string()))?;
        if self.columns.is_empty() {
            return Err(self.bad("no columns selected"));
        }
        let mut labels = BTreeSet::new();
        for c in &self.columns {
            if let Projection::Attr(a) | Projection::Distinct(a) = &c.projection {
                if concept.attribute(a).is_none() {
                    return Err(self.bad(format!("`{}` has no attribute `{a}`", self.over)));
                }
            }
            if !labels.insert(c.label.as_str()) {
                return Err(self.bad(format!("duplicate column `{}`", c.label)));
            }
        }
        if self.columns.iter().any(Column::is_aggregate) && !self.columns.iter().all(Column::is_aggregate) {
            return Err(self.bad("aggregate and per-row columns cannot be mixed"));
        }
        for (device, layout) in &self.layouts {
            if let Some(bad) = layout.order.iter().find(|l| !labels.contains(l.as_str())) {
                return Err(self.bad(format!("layout `{device}` orders unknown column `{bad}`")));
            }
            if layout.rows == Some(0) {
                return Err(self.bad(format!("layout `{device}` shows no rows")));
            }
        }
        match space.get(DEVICE) {
            Ok(coord) if !self.layouts.is_empty() && !self.layouts.contains_key(DEFAULT_LAYOUT) => {
                if let Some(v) = coord.values.iter().find(|v| !self.layouts.contains_key(*v)) {
                    return Err(self.bad(format!("no layout for device `{v}`")));
                }
                if let Some(k) = self.layouts.keys().find(|k| !coord.contains(k)) {
                    return Err(self.bad(format!("`{k}` is not a device")));
                }
            }
            Err(_) if !self.layouts.is_empty() && !self.layouts.contains_key(DEFAULT_LAYOUT) => {
                return Err(self.bad("device coordinate undeclared and no default layout"));
            }
            _ => {}
        }
        if let UpdatePolicy::Periodic(0) = self.policy {
            return Err(self.bad("periodic interval must be at least 1"));
        }
        if let Some(a) = &self.audience {
            space.check(REGISTRATION, a).map_err(|e| self.bad(e.to_string()))?;
        }
        let domain = Domain::Named(self.over.clone());
        repo.comprehend(&self.formula, &self.var, &domain).map_err(|e| self.bad(e.to_string()))?;
        Ok(())
    }

    /// Current result rows: one row per match, or a single summary row for aggregates.
    pub(crate) fn materialize(&self, repo: &Repository) -> Result<Vec<Vec<String>>> {
        let domain = Domain::Named(self.over.clone());
        let hits = repo.comprehend(&self.formula, &self.var, &domain)?;
        let snap = repo.snapshot();
        let get =
            |v: &Value, a: &str| -> Result<Option<Value>> { Ok(crate::calculus::Universe::attribute(&snap, v, a)?) };
        if self.is_summary() {
            let mut row = Vec::new();
            for c in &self.columns {
                let n = match &c.projection {
                    Projection::Count => hits.len(),
                    Projection::Distinct(a) => {
                        let mut seen = BTreeSet::new();
                        for h in &hits {
                            if let Some(v) = get(h, a)? {
                                seen.insert(v);
                            }
                        }
                        seen.len()
                    }
                    Projection::Attr(_) => unreachable!("validated: no mixed projections"),
                };
                row.push(n.to_string());
            }
            return Ok(vec![row]);
        }
        hits.iter()
            .map(|h| {
                self.columns
                    .iter()
                    .map(|c| match &c.projection {
                        Projection::Attr(a) => {
                            Ok(get(h, a)?.map_or("-".to_string(), |v| cell(&repo.display_value(&v))))
                        }
                        _ => unreachable!("validated: no mixed projections"),
                    })
                    .collect()
            })
            .collect()
    }

    /// Layout for `device`, falling back to the default layout, then to all columns.
    pub fn layout_for(&self, device: &str) -> Layout {
        self.layouts.get(device).or_else(|| self.layouts.get(DEFAULT_LAYOUT)).cloned().unwrap_or_default()
    }

    /// Expands materialized rows through the device layout.
    pub fn expand(&self, device: &str, rows: &[Vec<String>]) -> String {
        let layout = self.layout_for(device);
        let picked: Vec<usize> = if layout.order.is_empty() {
            (0..self.columns.len()).collect()
        } else {
            layout.order.iter().filter_map(|l| self.columns.iter().position(|c| &c.label == l)).collect()
        };
        let picked: Vec<usize> = picked.into_iter().filter(|&i| layout.media || !self.columns[i].media).collect();
        let shown = layout.rows.map_or(rows.len(), |n| n.min(rows.len()));
        let mut out = String::new();
        out.push_str(&format!("media: {}\n", if layout.media { "on" } else { "off" }));
        let labels: Vec<&str> = picked.iter().map(|&i| self.columns[i].label.as_str()).collect();
        out.push_str(&format!("columns: {}\n", labels.join(" | ")));
        for row in &rows[..shown] {
            let cells: Vec<&str> = picked.iter().map(|&i| row[i].as_str()).collect();
            out.push_str(&format!("row: {}\n", cells.join(" | ")));
        }
        out.push_str(&format!("total: {} shown: {}\n", rows.len(), shown));
        out
    }

    /// Device coordinate value used for `profile`.
    pub fn device_of(profile: &UserProfile, space: &CoordinateSpace) -> String {
        match (profile.get(DEVICE), space.get(DEVICE)) {
            (Some(d), _) => d.to_string(),
            (None, Ok(coord)) => coord.values[0].clone(),
            (None, Err(_)) => DEFAULT_LAYOUT.to_string(),
        }
    }

    /// Audience check against the registration tiers.
    pub fn visible_to(&self, profile: &UserProfile, space: &CoordinateSpace) -> bool {
        let Some(tier) = &self.audience else { return true };
        let Ok(coord) = space.get(REGISTRATION) else { return false };
        let need = coord.rank(tier).unwrap_or(usize::MAX);
        profile.get(REGISTRATION).and_then(|p| coord.rank(p)).is_some_and(|have| have >= need)
    }
}

fn cell(s: &str) -> String {
    s.replace('\\', "\\\\").replace('\n', "\\n").replace('\r', "\\r")
}

impl fmt::Display for ViewDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "view {} over {} as {} where {} {{ select ", self.name, self.over, self.var, self.formula)?;
        let cols: Vec<String> = self.columns.iter().map(|c| c.to_string()).collect();
        f.write_str(&cols.join(", "))?;
        f.write_str(";")?;
        for (device, l) in &self.layouts {
            write!(f, " layout {device} {{")?;
            if !l.order.is_empty() {
                write!(f, " order {};", l.order.join(", "))?;
            }
            if let Some(n) = l.rows {
                write!(f, " rows {n};")?;
            }
            write!(f, " media {}; }}", if l.media { "on" } else { "off" })?;
        }
        write!(f, " mode {};", self.policy)?;
        if let Some(a) = &self.audience {
            write!(f, " audience {a};")?;
        }
        f.write_str(" }")
    }
}
