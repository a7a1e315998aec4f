//! Well-formedness violations shared by contracts and orchestrators.

use std::fmt;

use serde::Serialize;

use crate::names::{Name, RecVar};
use crate::orchestrators::OrchAction;

/// Position of a subterm: the child index taken at each step from the root.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct TermPath(pub Vec<usize>);

impl TermPath {
    pub fn child(&self, i: usize) -> TermPath {
        let mut steps = self.0.clone();
        steps.push(i);
        TermPath(steps)
    }
}

impl fmt::Display for TermPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("/");
        }
        for step in &self.0 {
            write!(f, "/{step}")?;
        }
        Ok(())
    }
}

impl Serialize for TermPath {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViolationKind {
    FreeVariable { var: RecVar },
    DuplicateBranchName { name: Name },
    /// A `rec` whose body is a variable (or reaches one without a guard).
    UnguardedRecursion { var: RecVar },
    ConsecutiveRec { var: RecVar },
    /// A choice mixing client-side and server-side input actions.
    MixedDirections,
    /// A choice branch headed by an output (buffer-draining) action.
    ChoiceHeadedByOAction { action: OrchAction },
    /// A choice branch that is not an action prefix.
    NonPrefixBranch,
}

impl ViolationKind {
    /// Violations that make the labelled transition system itself
    /// ill-defined, as opposed to breaking the session discipline on choices.
    pub fn is_structural(&self) -> bool {
        matches!(
            self,
            ViolationKind::FreeVariable { .. }
                | ViolationKind::UnguardedRecursion { .. }
                | ViolationKind::NonPrefixBranch
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Violation {
    #[serde(flatten)]
    pub kind: ViolationKind,
    pub path: TermPath,
}

impl Violation {
    pub(crate) fn new(kind: ViolationKind, path: &TermPath) -> Self {
        Violation {
            kind,
            path: path.clone(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ViolationKind::FreeVariable { var } => write!(f, "free variable {var}")?,
            ViolationKind::DuplicateBranchName { name } => {
                write!(f, "duplicate branch name {name}")?
            }
            ViolationKind::UnguardedRecursion { var } => write!(f, "unguarded recursion on {var}")?,
            ViolationKind::ConsecutiveRec { var } => {
                write!(f, "consecutive rec binders at {var}")?
            }
            ViolationKind::MixedDirections => {
                f.write_str("choice mixes client-side and server-side inputs")?
            }
            ViolationKind::ChoiceHeadedByOAction { action } => {
                write!(f, "choice branch headed by output action {action}")?
            }
            ViolationKind::NonPrefixBranch => f.write_str("choice branch is not an action prefix")?,
        }
        write!(f, " at {}", self.path)
    }
}
