//! Session contracts: the client and server side of a session.
//!
//! Terms are stored locally nameless: variables bound by an enclosing `rec`
//! are de Bruijn indices and the binder keeps its source name only as a
//! display hint. Choices keep their branches sorted. Together this makes the
//! derived `Eq`/`Hash` coincide with equality modulo alpha-renaming and
//! branch order.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::Serialize;

use crate::error::Result;
use crate::lts::StateGraph;
use crate::names::{Binder, Name, RecVar, Var};
use crate::violation::{TermPath, Violation, ViolationKind};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SessionContract {
    Success,
    /// `a1.S1 + ... + an.Sn`
    External(Vec<(Name, SessionContract)>),
    /// `!a1.S1 (+) ... (+) !an.Sn`; a single branch is an output prefix.
    Internal(Vec<(Name, SessionContract)>),
    Var(Var),
    Rec(Binder, Box<SessionContract>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Input,
    Output,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ContractAction {
    pub name: Name,
    pub polarity: Polarity,
}

impl ContractAction {
    pub fn input(name: impl Into<Name>) -> Self {
        ContractAction {
            name: name.into(),
            polarity: Polarity::Input,
        }
    }

    pub fn output(name: impl Into<Name>) -> Self {
        ContractAction {
            name: name.into(),
            polarity: Polarity::Output,
        }
    }
}

impl fmt::Display for ContractAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.polarity {
            Polarity::Input => write!(f, "{}", self.name),
            Polarity::Output => write!(f, "!{}", self.name),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ContractLabel {
    Tau,
    Act(ContractAction),
}

impl fmt::Display for ContractLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContractLabel::Tau => f.write_str("tau"),
            ContractLabel::Act(a) => a.fmt(f),
        }
    }
}

/// Reachable states of a contract, each in head-unfolded form.
pub type ContractGraph = StateGraph<SessionContract, ContractLabel>;

impl SessionContract {
    pub fn external<N: Into<Name>>(branches: impl IntoIterator<Item = (N, SessionContract)>) -> Self {
        let mut branches: Vec<_> = branches.into_iter().map(|(n, c)| (n.into(), c)).collect();
        assert!(!branches.is_empty(), "external choice needs a branch");
        branches.sort();
        SessionContract::External(branches)
    }

    pub fn internal<N: Into<Name>>(branches: impl IntoIterator<Item = (N, SessionContract)>) -> Self {
        let mut branches: Vec<_> = branches.into_iter().map(|(n, c)| (n.into(), c)).collect();
        assert!(!branches.is_empty(), "internal choice needs a branch");
        branches.sort();
        SessionContract::Internal(branches)
    }

    /// Input prefix `a.cont`.
    pub fn input(name: impl Into<Name>, cont: SessionContract) -> Self {
        SessionContract::External(vec![(name.into(), cont)])
    }

    /// Output prefix `!a.cont`.
    pub fn output(name: impl Into<Name>, cont: SessionContract) -> Self {
        SessionContract::Internal(vec![(name.into(), cont)])
    }

    /// A free occurrence of `var`; becomes bound once wrapped by [`Self::rec`].
    pub fn var(var: impl Into<RecVar>) -> Self {
        SessionContract::Var(Var::Free(var.into()))
    }

    /// `rec var . body`, binding the free occurrences of `var` in `body`.
    pub fn rec(var: impl Into<RecVar>, body: SessionContract) -> Self {
        let var = var.into();
        let body = body.abstract_free(&var, 0);
        SessionContract::Rec(Binder(var), Box::new(body))
    }

    /// Re-sorts every choice. Idempotent.
    pub fn canon(&self) -> Self {
        match self {
            SessionContract::Success | SessionContract::Var(_) => self.clone(),
            SessionContract::External(bs) => {
                SessionContract::external(bs.iter().map(|(n, c)| (n.clone(), c.canon())))
            }
            SessionContract::Internal(bs) => {
                SessionContract::internal(bs.iter().map(|(n, c)| (n.clone(), c.canon())))
            }
            SessionContract::Rec(b, body) => SessionContract::Rec(b.clone(), Box::new(body.canon())),
        }
    }

    pub fn is_success(&self) -> bool {
        matches!(self, SessionContract::Success)
    }

    pub fn free_vars(&self) -> BTreeSet<RecVar> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut out);
        out
    }

    fn collect_free(&self, out: &mut BTreeSet<RecVar>) {
        match self {
            SessionContract::Success | SessionContract::Var(Var::Bound(_)) => {}
            SessionContract::Var(Var::Free(x)) => {
                out.insert(x.clone());
            }
            SessionContract::External(bs) | SessionContract::Internal(bs) => {
                bs.iter().for_each(|(_, c)| c.collect_free(out))
            }
            SessionContract::Rec(_, body) => body.collect_free(out),
        }
    }

    /// True when no variable escapes its binder. Dangling de Bruijn indices
    /// count as open.
    pub fn is_closed(&self) -> bool {
        fn go(t: &SessionContract, depth: usize) -> bool {
            match t {
                SessionContract::Success => true,
                SessionContract::Var(Var::Bound(i)) => *i < depth,
                SessionContract::Var(Var::Free(_)) => false,
                SessionContract::External(bs) | SessionContract::Internal(bs) => {
                    bs.iter().all(|(_, c)| go(c, depth))
                }
                SessionContract::Rec(_, body) => go(body, depth + 1),
            }
        }
        go(self, 0)
    }

    /// Number of syntax nodes: each branch prefix, each `1`, variable and
    /// `rec` counts one, and a choice of two or more branches counts one more.
    pub fn size(&self) -> usize {
        match self {
            SessionContract::Success | SessionContract::Var(_) => 1,
            SessionContract::External(bs) | SessionContract::Internal(bs) => {
                let inner: usize = bs.iter().map(|(_, c)| 1 + c.size()).sum();
                inner + usize::from(bs.len() > 1)
            }
            SessionContract::Rec(_, body) => 1 + body.size(),
        }
    }

    /// Every message name occurring in the term.
    pub fn names(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        fn go(t: &SessionContract, out: &mut BTreeSet<Name>) {
            match t {
                SessionContract::Success | SessionContract::Var(_) => {}
                SessionContract::External(bs) | SessionContract::Internal(bs) => {
                    for (n, c) in bs {
                        out.insert(n.clone());
                        go(c, out);
                    }
                }
                SessionContract::Rec(_, body) => go(body, out),
            }
        }
        go(self, &mut out);
        out
    }

    pub fn well_formed(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut binders = Vec::new();
        self.check(&TermPath::default(), &mut binders, &mut out);
        out
    }

    fn check(&self, path: &TermPath, binders: &mut Vec<RecVar>, out: &mut Vec<Violation>) {
        match self {
            SessionContract::Success => {}
            SessionContract::Var(Var::Free(x)) => {
                out.push(Violation::new(ViolationKind::FreeVariable { var: x.clone() }, path))
            }
            SessionContract::Var(Var::Bound(i)) => {
                if *i >= binders.len() {
                    out.push(Violation::new(
                        ViolationKind::FreeVariable {
                            var: RecVar::new(format!("#{i}")),
                        },
                        path,
                    ))
                }
            }
            SessionContract::External(bs) | SessionContract::Internal(bs) => {
                let mut seen = HashSet::new();
                let mut reported = HashSet::new();
                for (n, _) in bs {
                    if !seen.insert(n) && reported.insert(n) {
                        out.push(Violation::new(
                            ViolationKind::DuplicateBranchName { name: n.clone() },
                            path,
                        ));
                    }
                }
                for (i, (_, c)) in bs.iter().enumerate() {
                    c.check(&path.child(i), binders, out);
                }
            }
            SessionContract::Rec(b, body) => {
                match body.as_ref() {
                    SessionContract::Var(_) => out.push(Violation::new(
                        ViolationKind::UnguardedRecursion { var: b.0.clone() },
                        path,
                    )),
                    SessionContract::Rec(..) => out.push(Violation::new(
                        ViolationKind::ConsecutiveRec { var: b.0.clone() },
                        path,
                    )),
                    _ => {}
                }
                binders.push(b.0.clone());
                body.check(&path.child(0), binders, out);
                binders.pop();
            }
        }
    }

    /// Head unfolding: `rec X . S` becomes `S[X := rec X . S]` until the head
    /// is no longer a `rec`. Only meaningful on closed, guarded terms.
    pub fn unfold(&self) -> SessionContract {
        // A guarded term needs one step per leading binder; an unguarded one
        // would cycle forever, so it is returned still headed by `rec`.
        let mut leading = 0;
        let mut t = self;
        while let SessionContract::Rec(_, body) = t {
            leading += 1;
            t = body;
        }
        let mut term = self.clone();
        for _ in 0..leading {
            let SessionContract::Rec(_, body) = &term else { break };
            term = body.substitute(0, &term);
        }
        term
    }

    /// Replaces the bound variable at `depth` by the closed term `with`.
    pub(crate) fn substitute(&self, depth: usize, with: &SessionContract) -> SessionContract {
        match self {
            SessionContract::Var(Var::Bound(i)) if *i == depth => with.clone(),
            SessionContract::Success | SessionContract::Var(_) => self.clone(),
            SessionContract::External(bs) => SessionContract::External(
                bs.iter()
                    .map(|(n, c)| (n.clone(), c.substitute(depth, with)))
                    .collect(),
            ),
            SessionContract::Internal(bs) => SessionContract::Internal(
                bs.iter()
                    .map(|(n, c)| (n.clone(), c.substitute(depth, with)))
                    .collect(),
            ),
            SessionContract::Rec(b, body) => {
                SessionContract::Rec(b.clone(), Box::new(body.substitute(depth + 1, with)))
            }
        }
    }

    fn abstract_free(&self, var: &RecVar, depth: usize) -> SessionContract {
        match self {
            SessionContract::Var(Var::Free(x)) if x == var => SessionContract::Var(Var::Bound(depth)),
            SessionContract::Success | SessionContract::Var(_) => self.clone(),
            // indices order differently from names, so re-sort
            SessionContract::External(bs) => {
                SessionContract::external(bs.iter().map(|(n, c)| (n.clone(), c.abstract_free(var, depth))))
            }
            SessionContract::Internal(bs) => {
                SessionContract::internal(bs.iter().map(|(n, c)| (n.clone(), c.abstract_free(var, depth))))
            }
            SessionContract::Rec(b, body) => {
                SessionContract::Rec(b.clone(), Box::new(body.abstract_free(var, depth + 1)))
            }
        }
    }

    /// One-step transitions of the (head-unfolded) term. Targets are returned
    /// as written, not unfolded.
    ///
    /// An internal choice of two or more branches commits by `tau` to one of
    /// its output prefixes; a single output prefix fires its output directly
    /// and never takes a `tau` step.
    pub fn transitions(&self) -> Vec<(ContractLabel, SessionContract)> {
        match self.unfold() {
            SessionContract::External(bs) => bs
                .into_iter()
                .map(|(n, c)| (ContractLabel::Act(ContractAction::input(n)), c))
                .collect(),
            SessionContract::Internal(bs) if bs.len() == 1 => {
                let (n, c) = bs.into_iter().next().unwrap();
                vec![(ContractLabel::Act(ContractAction::output(n)), c)]
            }
            SessionContract::Internal(bs) => bs
                .into_iter()
                .map(|(n, c)| (ContractLabel::Tau, SessionContract::output(n, c)))
                .collect(),
            SessionContract::Success | SessionContract::Var(_) | SessionContract::Rec(..) => vec![],
        }
    }

    /// The finite graph of states reachable by transitions, each state
    /// identified by its head-unfolded form.
    pub fn state_graph(&self, cap: usize) -> Result<ContractGraph> {
        StateGraph::explore(self.unfold(), cap, "contract state space", |s| {
            s.transitions()
                .into_iter()
                .map(|(l, t)| (l, t.unfold()))
                .collect()
        })
    }

    /// Every state reachable from the term, head-unfolded.
    pub fn reachable_subterms(&self) -> BTreeSet<SessionContract> {
        self.state_graph(usize::MAX)
            .expect("uncapped exploration")
            .states()
            .iter()
            .cloned()
            .collect()
    }
}

impl fmt::Display for SessionContract {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::parser::render_contract(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_contract, parse_contract_raw};

    fn c(src: &str) -> SessionContract {
        parse_contract(src).unwrap()
    }

    #[test]
    fn success_is_well_formed() {
        assert!(c("1").well_formed().is_empty());
    }

    #[test]
    fn duplicate_branch_names_are_reported() {
        let t = parse_contract_raw("a.1 + a.b.1").unwrap();
        let v = t.well_formed();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::DuplicateBranchName { name: "a".into() });
    }

    #[test]
    fn unguarded_recursion_is_reported() {
        let t = parse_contract_raw("rec X . X").unwrap();
        assert_eq!(
            t.well_formed()[0].kind,
            ViolationKind::UnguardedRecursion { var: "X".into() }
        );
    }

    #[test]
    fn consecutive_rec_and_free_vars_are_reported() {
        let t = parse_contract_raw("rec X . rec Y . a.X").unwrap();
        assert!(matches!(t.well_formed()[0].kind, ViolationKind::ConsecutiveRec { .. }));
        let t = parse_contract_raw("a.Y").unwrap();
        assert_eq!(t.well_formed()[0].kind, ViolationKind::FreeVariable { var: "Y".into() });
        assert_eq!(t.well_formed()[0].path.to_string(), "/0");
    }

    #[test]
    fn unfold_substitutes_once_per_head_rec() {
        let t = c("rec X . a.X");
        assert_eq!(t.unfold(), SessionContract::input("a", t.clone()));
        assert_eq!(c("a.1").unfold(), c("a.1"));
        let t = c("rec X . !a.X (+) !b.X");
        assert_eq!(
            t.unfold(),
            SessionContract::internal([("a", t.clone()), ("b", t.clone())])
        );
    }

    #[test]
    fn transitions_follow_the_three_rules() {
        let t = c("a.1 + b.c.1");
        assert_eq!(
            t.transitions(),
            vec![
                (ContractLabel::Act(ContractAction::input("a")), c("1")),
                (ContractLabel::Act(ContractAction::input("b")), c("c.1")),
            ]
        );
        assert_eq!(
            c("!a.1 (+) !b.1").transitions(),
            vec![(ContractLabel::Tau, c("!a")), (ContractLabel::Tau, c("!b"))]
        );
        assert_eq!(
            c("!a.1").transitions(),
            vec![(ContractLabel::Act(ContractAction::output("a")), c("1"))]
        );
        assert!(c("1").transitions().is_empty());
    }

    #[test]
    fn reachable_subterms_are_finite() {
        assert_eq!(c("1").reachable_subterms().len(), 1);
        let t = c("rec X . a.X");
        let states = t.reachable_subterms();
        assert_eq!(states.len(), 1);
        assert!(states.contains(&t.unfold()));
    }

    #[test]
    fn alpha_equivalent_terms_are_equal() {
        assert_eq!(c("rec X . a.X"), c("rec Y . a.Y"));
        assert_eq!(c("a + b"), c("b + a"));
        assert_ne!(c("rec X . a.rec Y . b.X"), c("rec X . a.rec Y . b.Y"));
    }

    #[test]
    fn closedness_tracks_dangling_indices() {
        assert!(c("rec X . a.X").is_closed());
        assert!(!parse_contract_raw("a.X").unwrap().is_closed());
        let SessionContract::Rec(_, body) = c("rec X . a.X") else { unreachable!() };
        assert!(!body.is_closed());
    }
}
