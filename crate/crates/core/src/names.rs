//! Message names, recursion variables and binder hints.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Serialize, Serializer};

/// A message name such as `tempReq`. Names start with a lowercase letter.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Name(String);

impl Name {
    pub fn new(text: impl Into<String>) -> Self {
        let text = text.into();
        debug_assert!(is_name(&text), "not a name: {text:?}");
        Name(text)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Name {
    fn from(s: &str) -> Self {
        Name::new(s)
    }
}

impl Serialize for Name {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

/// A recursion variable such as `X`. Variables start with an uppercase letter.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RecVar(String);

impl RecVar {
    pub fn new(text: impl Into<String>) -> Self {
        RecVar(text.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RecVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for RecVar {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl From<&str> for RecVar {
    fn from(s: &str) -> Self {
        RecVar::new(s)
    }
}

/// The source name of a `rec` binder.
///
/// Bound variables are de Bruijn indices, so the binder name carries no
/// meaning: every hint compares equal and hashes to nothing. Deriving
/// `Eq`/`Hash`/`Ord` on a term type that stores a `Binder` therefore yields
/// alpha-equivalence.
#[derive(Clone, Debug)]
pub struct Binder(pub RecVar);

impl Binder {
    pub fn name(&self) -> &RecVar {
        &self.0
    }
}

impl PartialEq for Binder {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for Binder {}

impl Hash for Binder {
    fn hash<H: Hasher>(&self, _: &mut H) {}
}

impl PartialOrd for Binder {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Binder {
    fn cmp(&self, _: &Self) -> Ordering {
        Ordering::Equal
    }
}

/// A variable occurrence in a term: either bound by an enclosing `rec`
/// (de Bruijn index, 0 = innermost) or free.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    Bound(usize),
    Free(RecVar),
}

pub(crate) fn is_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && s != "rec"
}

/// Picks display names for nested binders so that no binder shadows another
/// binder or a free variable in scope.
pub(crate) struct NameScope {
    stack: Vec<String>,
    reserved: Vec<String>,
}

impl NameScope {
    pub(crate) fn new(reserved: Vec<String>) -> Self {
        NameScope {
            stack: Vec::new(),
            reserved,
        }
    }

    fn taken(&self, candidate: &str) -> bool {
        self.stack.iter().any(|s| s == candidate) || self.reserved.iter().any(|s| s == candidate)
    }

    pub(crate) fn push(&mut self, hint: &RecVar) -> String {
        const FALLBACK: [&str; 4] = ["X", "Y", "Z", "W"];
        let mut candidates: Vec<String> = Vec::new();
        if !hint.as_str().is_empty() && hint.as_str().chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            candidates.push(hint.as_str().to_string());
        }
        candidates.extend(FALLBACK.iter().map(|s| s.to_string()));
        let chosen = candidates
            .into_iter()
            .find(|c| !self.taken(c))
            .unwrap_or_else(|| {
                (1..)
                    .map(|i| format!("X{i}"))
                    .find(|c| !self.taken(c))
                    .expect("unbounded supply of names")
            });
        self.stack.push(chosen.clone());
        chosen
    }

    pub(crate) fn pop(&mut self) {
        self.stack.pop();
    }

    /// Display name of the binder referenced by de Bruijn `index`.
    pub(crate) fn lookup(&self, index: usize) -> &str {
        &self.stack[self.stack.len() - 1 - index]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binder_hints_are_ignored_by_equality() {
        assert_eq!(Binder("X".into()), Binder("Y".into()));
    }

    #[test]
    fn name_syntax() {
        assert!(is_name("tempReq"));
        assert!(!is_name("Temp"));
        assert!(!is_name("rec"));
        assert!(!is_name("_a"));
    }

    #[test]
    fn scope_avoids_shadowing() {
        let mut scope = NameScope::new(vec![]);
        assert_eq!(scope.push(&"X".into()), "X");
        assert_eq!(scope.push(&"X".into()), "Y");
        assert_eq!(scope.lookup(1), "X");
        scope.pop();
        assert_eq!(scope.push(&"X".into()), "Y");
    }
}
