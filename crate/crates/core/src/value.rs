//! Scalar values, type tags and object references shared by every level.

use std::fmt;

/// Surrogate key of a level-0 individual. Assigned from a monotone counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Oid(pub u64);

impl fmt::Display for Oid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Reference to an object anywhere in the metadata tower.
///
/// Level 0 ids are individual oids; ids at level `j >= 1` are meta-object ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObjectRef {
    pub level: u32,
    pub id: u64,
}

impl ObjectRef {
    pub fn data(oid: Oid) -> Self {
        ObjectRef { level: 0, id: oid.0 }
    }

    pub fn meta(level: u32, id: u64) -> Self {
        ObjectRef { level, id }
    }

    pub fn is_data(&self) -> bool {
        self.level == 0
    }

    pub fn oid(&self) -> Option<Oid> {
        self.is_data().then_some(Oid(self.id))
    }
}

impl fmt::Display for ObjectRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "@{}:{}", self.level, self.id)
    }
}

/// A first-order value. Enum members are carried as `Text`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Text(String),
    Obj(ObjectRef),
}

impl Value {
    pub fn text(s: impl Into<String>) -> Self {
        Value::Text(s.into())
    }

    pub fn as_obj(&self) -> Option<ObjectRef> {
        match self {
            Value::Obj(r) => Some(*r),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

/// Writes `s` as a double-quoted literal with `\\`, `\"`, `\n`, `\t` and `\r` escaped.
pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Literal form, re-readable by the DSL parser.
impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Text(s) => f.write_str(&quote(s)),
            Value::Obj(r) => write!(f, "{r}"),
        }
    }
}

/// The type symbol of an attribute range or a sort target.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TypeTag {
    Boolean,
    Integer,
    Text,
    Enum { name: String, values: Vec<String> },
    ConceptRef(String),
}

impl TypeTag {
    /// Finite extent of the type when it is known without a repository.
    ///
    /// Concept references are finite but need the current extent, so they return `None`
    /// here; see `Store::sort_spec`.
    pub fn static_extent(&self) -> Option<Vec<Value>> {
        match self {
            TypeTag::Boolean => Some(vec![Value::Bool(false), Value::Bool(true)]),
            TypeTag::Enum { values, .. } => values.iter().map(|v| Some(Value::text(v))).collect(),
            TypeTag::Integer | TypeTag::Text | TypeTag::ConceptRef(_) => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        !matches!(self, TypeTag::Integer | TypeTag::Text)
    }
}

impl fmt::Display for TypeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeTag::Boolean => f.write_str("bool"),
            TypeTag::Integer => f.write_str("int"),
            TypeTag::Text => f.write_str("text"),
            TypeTag::Enum { name, values } => write!(f, "enum {name} {{ {} }}", values.join(", ")),
            TypeTag::ConceptRef(c) => write!(f, "ref {c}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quote_escapes_control_characters() {
        assert_eq!(quote("a\"b\\c\nd\te"), r#""a\"b\\c\nd\te""#);
    }

    #[test]
    fn static_extents() {
        assert_eq!(TypeTag::Boolean.static_extent().unwrap().len(), 2);
        assert!(TypeTag::Integer.static_extent().is_none());
        let e = TypeTag::Enum { name: "G".into(), values: vec!["a".into(), "b".into()] };
        assert_eq!(e.static_extent().unwrap(), vec![Value::text("a"), Value::text("b")]);
    }
}
