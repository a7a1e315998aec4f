//! Orchestration actions, orchestrator terms and their transition system.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::Result;
use crate::flow::FlowGraph;
use crate::lts::StateGraph;
use crate::names::{Binder, Name, RecVar, Var};
use crate::violation::{TermPath, Violation, ViolationKind};

/// The six mediation actions. The first component of the concrete syntax
/// `<l,r>` faces the client, the second the server.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OrchAction {
    /// `<a,!a>`: take `a` from the client and hand it to the server at once.
    SyncL(Name),
    /// `<!a,a>`: take `a` from the server and hand it to the client at once.
    SyncR(Name),
    /// `<a,_>`: take `a` from the client into the buffer.
    InC(Name),
    /// `<_,a>`: take `a` from the server into the buffer.
    InS(Name),
    /// `<!a,_>`: deliver a buffered `a` to the client.
    OutC(Name),
    /// `<_,!a>`: deliver a buffered `a` to the server.
    OutS(Name),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Category {
    /// Client-side inputs.
    IotaL,
    /// Server-side inputs.
    IotaR,
    /// Buffer-draining outputs.
    O,
}

impl OrchAction {
    pub fn name(&self) -> &Name {
        match self {
            OrchAction::SyncL(n)
            | OrchAction::SyncR(n)
            | OrchAction::InC(n)
            | OrchAction::InS(n)
            | OrchAction::OutC(n)
            | OrchAction::OutS(n) => n,
        }
    }

    pub fn category(&self) -> Category {
        match self {
            OrchAction::SyncL(_) | OrchAction::InC(_) => Category::IotaL,
            OrchAction::SyncR(_) | OrchAction::InS(_) => Category::IotaR,
            OrchAction::OutC(_) | OrchAction::OutS(_) => Category::O,
        }
    }

    /// Change of the (client-to-server, server-to-client) buffer counters of
    /// `name` caused by this action.
    pub fn weight(&self, name: &Name) -> (i64, i64) {
        if self.name() != name {
            return (0, 0);
        }
        self.own_weight()
    }

    /// Change of the counters of this action's own name.
    pub fn own_weight(&self) -> (i64, i64) {
        match self {
            OrchAction::InC(_) => (1, 0),
            OrchAction::OutS(_) => (-1, 0),
            OrchAction::InS(_) => (0, 1),
            OrchAction::OutC(_) => (0, -1),
            OrchAction::SyncL(_) | OrchAction::SyncR(_) => (0, 0),
        }
    }
}

impl fmt::Display for OrchAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OrchAction::SyncL(a) => write!(f, "<{a},!{a}>"),
            OrchAction::SyncR(a) => write!(f, "<!{a},{a}>"),
            OrchAction::InC(a) => write!(f, "<{a},_>"),
            OrchAction::InS(a) => write!(f, "<_,{a}>"),
            OrchAction::OutC(a) => write!(f, "<!{a},_>"),
            OrchAction::OutS(a) => write!(f, "<_,!{a}>"),
        }
    }
}

impl Serialize for OrchAction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Orchestrator {
    Stop,
    Prefix(OrchAction, Box<Orchestrator>),
    /// Two or more branches, flattened and sorted.
    Choice(Vec<Orchestrator>),
    Var(Var),
    Rec(Binder, Box<Orchestrator>),
}

/// A finite action sequence, or the infinite sequence `prefix . cycle^w`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActionSequence {
    Finite { actions: Vec<OrchAction> },
    Lasso { prefix: Vec<OrchAction>, cycle: Vec<OrchAction> },
}

impl ActionSequence {
    pub fn finite(actions: Vec<OrchAction>) -> Self {
        ActionSequence::Finite { actions }
    }

    /// Normalized so that equal infinite sequences compare equal: the cycle
    /// is its own shortest period and the prefix is as short as possible.
    pub fn lasso(mut prefix: Vec<OrchAction>, mut cycle: Vec<OrchAction>) -> Self {
        assert!(!cycle.is_empty(), "a lasso needs a nonempty cycle");
        let n = cycle.len();
        if let Some(p) = (1..n).find(|p| n % p == 0 && (0..n).all(|i| cycle[i] == cycle[i % p])) {
            cycle.truncate(p);
        }
        while prefix.last().is_some_and(|a| a == cycle.last().unwrap()) {
            prefix.pop();
            cycle.rotate_right(1);
        }
        ActionSequence::Lasso { prefix, cycle }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, ActionSequence::Finite { .. })
    }

    /// The first `len` actions of the sequence (all of it if finite and shorter).
    pub fn take(&self, len: usize) -> Vec<OrchAction> {
        match self {
            ActionSequence::Finite { actions } => actions.iter().take(len).cloned().collect(),
            ActionSequence::Lasso { prefix, cycle } => prefix
                .iter()
                .chain(cycle.iter().cycle())
                .take(len)
                .cloned()
                .collect(),
        }
    }
}

fn join(actions: &[OrchAction]) -> String {
    if actions.is_empty() {
        return "λ".into();
    }
    actions.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(" ")
}

impl fmt::Display for ActionSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionSequence::Finite { actions } => f.write_str(&join(actions)),
            ActionSequence::Lasso { prefix, cycle } => {
                write!(f, "{} ({})^w", join(prefix), join(cycle))
            }
        }
    }
}

/// Reachable states of an orchestrator, each head-unfolded.
pub type TermGraph = StateGraph<Orchestrator, OrchAction>;

impl Orchestrator {
    pub fn prefix(action: OrchAction, cont: Orchestrator) -> Self {
        Orchestrator::Prefix(action, Box::new(cont))
    }

    /// `f1 \/ ... \/ fn`, flattened and sorted. A single branch is returned
    /// as is.
    pub fn choice(branches: impl IntoIterator<Item = Orchestrator>) -> Self {
        let mut flat = Vec::new();
        for b in branches {
            match b {
                Orchestrator::Choice(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        assert!(!flat.is_empty(), "choice needs a branch");
        if flat.len() == 1 {
            return flat.pop().unwrap();
        }
        flat.sort();
        Orchestrator::Choice(flat)
    }

    pub fn var(var: impl Into<RecVar>) -> Self {
        Orchestrator::Var(Var::Free(var.into()))
    }

    /// `rec var . body`, binding the free occurrences of `var` in `body`.
    pub fn rec(var: impl Into<RecVar>, body: Orchestrator) -> Self {
        let var = var.into();
        Self::rec_with_hint(&var, var.clone(), body)
    }

    /// Binds `var` in `body` but displays the binder as `hint`.
    pub(crate) fn rec_with_hint(var: &RecVar, hint: RecVar, body: Orchestrator) -> Self {
        Orchestrator::Rec(Binder(hint), Box::new(body.abstract_free(var, 0)))
    }

    pub fn canon(&self) -> Self {
        match self {
            Orchestrator::Stop | Orchestrator::Var(_) => self.clone(),
            Orchestrator::Prefix(a, c) => Orchestrator::prefix(a.clone(), c.canon()),
            Orchestrator::Choice(bs) => Orchestrator::choice(bs.iter().map(Orchestrator::canon)),
            Orchestrator::Rec(b, body) => Orchestrator::Rec(b.clone(), Box::new(body.canon())),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Orchestrator::Stop | Orchestrator::Var(_) => 1,
            Orchestrator::Prefix(_, c) => 1 + c.size(),
            Orchestrator::Choice(bs) => 1 + bs.iter().map(Orchestrator::size).sum::<usize>(),
            Orchestrator::Rec(_, body) => 1 + body.size(),
        }
    }

    pub fn names(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.visit_actions(&mut |a| {
            out.insert(a.name().clone());
        });
        out
    }

    pub(crate) fn visit_actions(&self, f: &mut impl FnMut(&OrchAction)) {
        match self {
            Orchestrator::Stop | Orchestrator::Var(_) => {}
            Orchestrator::Prefix(a, c) => {
                f(a);
                c.visit_actions(f);
            }
            Orchestrator::Choice(bs) => bs.iter().for_each(|b| b.visit_actions(f)),
            Orchestrator::Rec(_, body) => body.visit_actions(f),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<RecVar> {
        fn go(t: &Orchestrator, out: &mut BTreeSet<RecVar>) {
            match t {
                Orchestrator::Stop | Orchestrator::Var(Var::Bound(_)) => {}
                Orchestrator::Var(Var::Free(x)) => {
                    out.insert(x.clone());
                }
                Orchestrator::Prefix(_, c) => go(c, out),
                Orchestrator::Choice(bs) => bs.iter().for_each(|b| go(b, out)),
                Orchestrator::Rec(_, body) => go(body, out),
            }
        }
        let mut out = BTreeSet::new();
        go(self, &mut out);
        out
    }

    pub fn has_free(&self, var: &RecVar) -> bool {
        match self {
            Orchestrator::Stop | Orchestrator::Var(Var::Bound(_)) => false,
            Orchestrator::Var(Var::Free(x)) => x == var,
            Orchestrator::Prefix(_, c) => c.has_free(var),
            Orchestrator::Choice(bs) => bs.iter().any(|b| b.has_free(var)),
            Orchestrator::Rec(_, body) => body.has_free(var),
        }
    }

    pub fn is_closed(&self) -> bool {
        fn go(t: &Orchestrator, depth: usize) -> bool {
            match t {
                Orchestrator::Stop => true,
                Orchestrator::Var(Var::Bound(i)) => *i < depth,
                Orchestrator::Var(Var::Free(_)) => false,
                Orchestrator::Prefix(_, c) => go(c, depth),
                Orchestrator::Choice(bs) => bs.iter().all(|b| go(b, depth)),
                Orchestrator::Rec(_, body) => go(body, depth + 1),
            }
        }
        go(self, 0)
    }

    /// The subterm at `path`, with the child numbering used by violations.
    pub fn at(&self, path: &TermPath) -> Option<&Orchestrator> {
        let mut t = self;
        for &i in &path.0 {
            t = match t {
                Orchestrator::Prefix(_, c) | Orchestrator::Rec(_, c) if i == 0 => c,
                Orchestrator::Choice(bs) => bs.get(i)?,
                _ => return None,
            };
        }
        Some(t)
    }

    /// Contractivity, closedness and direction-homogeneous prefix choices.
    pub fn well_formed(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut binders = Vec::new();
        self.check(&TermPath::default(), &mut binders, &mut out);
        out
    }

    fn check(&self, path: &TermPath, binders: &mut Vec<RecVar>, out: &mut Vec<Violation>) {
        match self {
            Orchestrator::Stop => {}
            Orchestrator::Var(Var::Free(x)) => {
                out.push(Violation::new(ViolationKind::FreeVariable { var: x.clone() }, path))
            }
            Orchestrator::Var(Var::Bound(i)) => {
                if *i >= binders.len() {
                    out.push(Violation::new(
                        ViolationKind::FreeVariable {
                            var: RecVar::new(format!("#{i}")),
                        },
                        path,
                    ))
                }
            }
            Orchestrator::Prefix(_, c) => c.check(&path.child(0), binders, out),
            Orchestrator::Choice(bs) => {
                let mut categories = HashSet::new();
                for (i, b) in bs.iter().enumerate() {
                    match b {
                        Orchestrator::Prefix(a, _) => {
                            if a.category() == Category::O {
                                out.push(Violation::new(
                                    ViolationKind::ChoiceHeadedByOAction { action: a.clone() },
                                    &path.child(i),
                                ));
                            } else {
                                categories.insert(a.category());
                            }
                        }
                        _ => out.push(Violation::new(ViolationKind::NonPrefixBranch, &path.child(i))),
                    }
                }
                if categories.len() > 1 {
                    out.push(Violation::new(ViolationKind::MixedDirections, path));
                }
                for (i, b) in bs.iter().enumerate() {
                    b.check(&path.child(i), binders, out);
                }
            }
            Orchestrator::Rec(b, body) => {
                if let Orchestrator::Var(_) = body.as_ref() {
                    out.push(Violation::new(
                        ViolationKind::UnguardedRecursion { var: b.0.clone() },
                        path,
                    ));
                }
                binders.push(b.0.clone());
                body.check(&path.child(0), binders, out);
                binders.pop();
            }
        }
    }

    /// Head unfolding; see [`crate::SessionContract::unfold`].
    pub fn unfold(&self) -> Orchestrator {
        let mut leading = 0;
        let mut t = self;
        while let Orchestrator::Rec(_, body) = t {
            leading += 1;
            t = body;
        }
        let mut term = self.clone();
        for _ in 0..leading {
            let Orchestrator::Rec(_, body) = &term else { break };
            term = body.substitute(0, &term);
        }
        term
    }

    pub(crate) fn substitute(&self, depth: usize, with: &Orchestrator) -> Orchestrator {
        match self {
            Orchestrator::Var(Var::Bound(i)) if *i == depth => with.clone(),
            Orchestrator::Stop | Orchestrator::Var(_) => self.clone(),
            Orchestrator::Prefix(a, c) => Orchestrator::prefix(a.clone(), c.substitute(depth, with)),
            Orchestrator::Choice(bs) => {
                Orchestrator::Choice(bs.iter().map(|b| b.substitute(depth, with)).collect())
            }
            Orchestrator::Rec(b, body) => {
                Orchestrator::Rec(b.clone(), Box::new(body.substitute(depth + 1, with)))
            }
        }
    }

    fn abstract_free(&self, var: &RecVar, depth: usize) -> Orchestrator {
        match self {
            Orchestrator::Var(Var::Free(x)) if x == var => Orchestrator::Var(Var::Bound(depth)),
            Orchestrator::Stop | Orchestrator::Var(_) => self.clone(),
            Orchestrator::Prefix(a, c) => Orchestrator::prefix(a.clone(), c.abstract_free(var, depth)),
            Orchestrator::Choice(bs) => {
                // indices order differently from names, so re-sort
                Orchestrator::choice(bs.iter().map(|b| b.abstract_free(var, depth)))
            }
            Orchestrator::Rec(b, body) => {
                Orchestrator::Rec(b.clone(), Box::new(body.abstract_free(var, depth + 1)))
            }
        }
    }

    /// One-step transitions; targets are returned as written.
    pub fn transitions(&self) -> Vec<(OrchAction, Orchestrator)> {
        match self.unfold() {
            Orchestrator::Prefix(a, c) => vec![(a, *c)],
            Orchestrator::Choice(bs) => bs.iter().flat_map(Orchestrator::transitions).collect(),
            Orchestrator::Stop | Orchestrator::Var(_) | Orchestrator::Rec(..) => vec![],
        }
    }

    pub fn term_graph(&self, cap: usize) -> Result<TermGraph> {
        StateGraph::explore(self.unfold(), cap, "orchestrator state space", |s| {
            s.transitions()
                .into_iter()
                .map(|(a, t)| (a, t.unfold()))
                .collect()
        })
    }

    /// Every trace of length at most `depth`, as finite sequences.
    pub fn traces_bounded(&self, depth: usize) -> BTreeSet<Vec<OrchAction>> {
        let mut out = BTreeSet::new();
        let mut frontier = vec![(Vec::new(), self.unfold())];
        while let Some((trace, state)) = frontier.pop() {
            if trace.len() < depth {
                for (a, next) in state.transitions() {
                    let mut longer = trace.clone();
                    longer.push(a);
                    frontier.push((longer, next.unfold()));
                }
            }
            out.insert(trace);
        }
        out
    }

    /// A finite family of maximal traces that witnesses every property of
    /// the full set that depends only on finite paths and simple cycles;
    /// see [`FlowGraph::maximal_lassos`].
    pub fn maximal_lassos(&self, cap: usize) -> Result<BTreeSet<ActionSequence>> {
        let graph = self.term_graph(cap)?;
        Ok(FlowGraph::from_term_graph(&graph).maximal_lassos())
    }
}

impl fmt::Display for Orchestrator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::parser::render_orchestrator(self))
    }
}
