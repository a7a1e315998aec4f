//! Respectfulness of orchestrators.
//!
//! The weighted syntax tree of an orchestrator records, on every edge, how
//! the buffer changes: the left weight tracks the client-to-server counter
//! and the right weight the server-to-client one. Labels are path sums from
//! the root. A variable leaf closes a loop back to its binder.
//!
//! Soundness is decided on the tree and is exact. The literal tree
//! conditions for client respect and for server inputs miss some loops, so
//! the default checks run the exact graph analysis of [`crate::flow`] on the
//! orchestrator's state graph; the literal versions stay available.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::buffers::Side;
use crate::flow::{FlowGraph, FlowViolation};
use crate::names::{Name, Var};
use crate::orchestrators::{OrchAction, Orchestrator};
use crate::violation::TermPath;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Stop,
    /// A variable leaf and the index of its `rec` node.
    Var { binder: usize },
    /// A prefix; its single child edge carries the action's weight.
    Action(OrchAction),
    Choice,
    Rec,
}

#[derive(Clone, Debug)]
pub struct TreeNode {
    pub kind: NodeKind,
    pub parent: Option<usize>,
    /// Weight (left, right) of the edge from the parent.
    pub weight: (i64, i64),
    pub path: TermPath,
    pub children: Vec<usize>,
}

/// Nodes are stored in preorder, so parents precede their children.
#[derive(Clone, Debug)]
pub struct WeightedTree {
    pub nodes: Vec<TreeNode>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Labelling {
    pub left: Vec<i64>,
    pub right: Vec<i64>,
}

impl Labelling {
    fn side(&self, side: Side) -> &[i64] {
        match side {
            Side::Cs => &self.left,
            Side::Sc => &self.right,
        }
    }
}

fn build_tree(f: &Orchestrator, weight: &dyn Fn(&OrchAction) -> (i64, i64)) -> WeightedTree {
    fn go(
        t: &Orchestrator,
        parent: Option<usize>,
        w: (i64, i64),
        path: TermPath,
        binders: &mut Vec<usize>,
        weight: &dyn Fn(&OrchAction) -> (i64, i64),
        nodes: &mut Vec<TreeNode>,
    ) -> usize {
        let id = nodes.len();
        let kind = match t {
            Orchestrator::Stop => NodeKind::Stop,
            Orchestrator::Var(Var::Bound(i)) => NodeKind::Var {
                binder: binders[binders.len() - 1 - i],
            },
            Orchestrator::Var(Var::Free(x)) => panic!("open orchestrator: free variable {x}"),
            Orchestrator::Prefix(a, _) => NodeKind::Action(a.clone()),
            Orchestrator::Choice(_) => NodeKind::Choice,
            Orchestrator::Rec(..) => NodeKind::Rec,
        };
        nodes.push(TreeNode {
            kind,
            parent,
            weight: w,
            path: path.clone(),
            children: Vec::new(),
        });
        let children: Vec<usize> = match t {
            Orchestrator::Stop | Orchestrator::Var(_) => Vec::new(),
            Orchestrator::Prefix(a, c) => vec![go(c, Some(id), weight(a), path.child(0), binders, weight, nodes)],
            Orchestrator::Choice(bs) => bs
                .iter()
                .enumerate()
                .map(|(i, b)| go(b, Some(id), (0, 0), path.child(i), binders, weight, nodes))
                .collect(),
            Orchestrator::Rec(_, body) => {
                binders.push(id);
                let c = go(body, Some(id), (0, 0), path.child(0), binders, weight, nodes);
                binders.pop();
                vec![c]
            }
        };
        nodes[id].children = children;
        id
    }
    let mut nodes = Vec::new();
    go(f, None, (0, 0), TermPath::default(), &mut Vec::new(), weight, &mut nodes);
    WeightedTree { nodes }
}

/// The tree of `f` weighted by the buffer of `name`.
pub fn buffer_aware_tree(f: &Orchestrator, name: &Name) -> WeightedTree {
    build_tree(f, &|m| m.weight(name))
}

/// The tree of `f` weighted by the buffer changes summed over all names.
pub fn star_tree(f: &Orchestrator) -> WeightedTree {
    build_tree(f, &OrchAction::own_weight)
}

/// Path sums from the root.
pub fn label(t: &WeightedTree) -> Labelling {
    let mut left = vec![0; t.nodes.len()];
    let mut right = vec![0; t.nodes.len()];
    for (i, n) in t.nodes.iter().enumerate() {
        if let Some(p) = n.parent {
            left[i] = left[p] + n.weight.0;
            right[i] = right[p] + n.weight.1;
        }
    }
    Labelling { left, right }
}

impl WeightedTree {
    /// Variable leaves with their binders.
    fn loops(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.nodes.iter().enumerate().filter_map(|(i, n)| match n.kind {
            NodeKind::Var { binder } => Some((i, binder)),
            _ => None,
        })
    }

    /// Weights of the edges from `binder` down to its descendant `leaf`.
    fn loop_weights(&self, leaf: usize, binder: usize) -> Vec<(i64, i64)> {
        let mut out = Vec::new();
        let mut x = leaf;
        while x != binder {
            out.push(self.nodes[x].weight);
            x = self.nodes[x].parent.expect("a binder is an ancestor of its variables");
        }
        out
    }

    fn reaches_stop(&self, id: usize) -> bool {
        let n = &self.nodes[id];
        n.kind == NodeKind::Stop || n.children.iter().any(|&c| self.reaches_stop(c))
    }

    fn path(&self, id: usize) -> TermPath {
        self.nodes[id].path.clone()
    }
}

/// A failed tree condition, located by term paths.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeViolation {
    /// A counter label below zero.
    NegativeLabel { name: Name, side: Side, path: TermPath, value: i64 },
    /// Each turn of the loop from the binder to the variable lowers a counter.
    DrainingLoop { name: Name, side: Side, binder: TermPath, var: TermPath, net: i64 },
    /// A `1` reached with client messages still buffered.
    StopLabel { name: Name, path: TermPath, value: i64 },
    /// A loop that can exit to `1` but changes the client counter.
    LoopMismatch { name: Name, binder: TermPath, var: TermPath, binder_label: i64, var_label: i64 },
    /// A loop that never exits, never touches the client counter, and is
    /// entered with client messages pending.
    PendingLoop { name: Name, binder: TermPath, var: TermPath, pending: i64 },
    /// A loop taking the name from the client without delivering it.
    UnbalancedLoop { name: Name, binder: TermPath, var: TermPath },
    /// A loop receiving from the server with nothing delivered to the client.
    ServerInputLoop { binder: TermPath, var: TermPath },
}

impl fmt::Display for TreeViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeViolation::NegativeLabel { name, side, path, value } => {
                write!(f, "{side}_{name} is {value} at {path}")
            }
            TreeViolation::DrainingLoop { name, side, binder, var, net } => {
                write!(f, "loop {binder} -> {var} changes {side}_{name} by {net} per turn")
            }
            TreeViolation::StopLabel { name, path, value } => {
                write!(f, "{value} client message(s) {name} pending at 1 ({path})")
            }
            TreeViolation::LoopMismatch { name, binder, var, binder_label, var_label } => write!(
                f,
                "loop {binder} -> {var} can exit but moves cs_{name} from {binder_label} to {var_label}"
            ),
            TreeViolation::PendingLoop { name, binder, var, pending } => {
                write!(f, "loop {binder} -> {var} never delivers the {pending} pending {name}")
            }
            TreeViolation::UnbalancedLoop { name, binder, var } => {
                write!(f, "loop {binder} -> {var} takes {name} from the client but never delivers it")
            }
            TreeViolation::ServerInputLoop { binder, var } => {
                write!(f, "loop {binder} -> {var} receives from the server and delivers nothing to the client")
            }
        }
    }
}

/// Evidence that an orchestrator is not respectful.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum RespectEvidence {
    Tree(TreeViolation),
    Flow(FlowViolation),
}

impl fmt::Display for RespectEvidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RespectEvidence::Tree(v) => v.fmt(f),
            RespectEvidence::Flow(v) => v.fmt(f),
        }
    }
}

fn flow_graph(f: &Orchestrator) -> FlowGraph {
    let g = f.term_graph(usize::MAX).expect("uncapped exploration");
    FlowGraph::from_term_graph(&g)
}

/// No counter of `name` ever goes negative: no negative label, and no loop
/// with a negative net effect. This is exact: every run is a tree path in
/// which each return to a binder adds that loop's net effect.
pub fn check_sound(f: &Orchestrator, name: &Name) -> Result<(), TreeViolation> {
    let t = buffer_aware_tree(f, name);
    let l = label(&t);
    for side in [Side::Cs, Side::Sc] {
        if let Some(i) = (0..t.nodes.len()).find(|&i| l.side(side)[i] < 0) {
            return Err(TreeViolation::NegativeLabel {
                name: name.clone(),
                side,
                path: t.path(i),
                value: l.side(side)[i],
            });
        }
    }
    for (x, b) in t.loops() {
        for side in [Side::Cs, Side::Sc] {
            let net = l.side(side)[x] - l.side(side)[b];
            if net < 0 {
                return Err(TreeViolation::DrainingLoop {
                    name: name.clone(),
                    side,
                    binder: t.path(b),
                    var: t.path(x),
                    net,
                });
            }
        }
    }
    Ok(())
}

/// Client messages of `name` are never stranded and never taken forever
/// without delivery, decided exactly on the state graph of `f`.
pub fn check_client_respectful(f: &Orchestrator, name: &Name) -> Result<(), FlowViolation> {
    flow_graph(f).check_client_respectful(name)
}

/// The tree conditions for client respect, as literally stated: every `1`
/// is reached with no pending client message; a loop that can exit to `1`
/// returns with the counter it started with; a loop that cannot exit and
/// never touches the counter is entered with nothing pending; and every
/// loop that takes the name from the client also delivers it.
///
/// Sufficient on simple terms but not exact: it inspects each loop on its
/// own and so misses, for instance, a net gain spread over nested loops.
pub fn check_client_respectful_literal(f: &Orchestrator, name: &Name) -> Result<(), TreeViolation> {
    let t = buffer_aware_tree(f, name);
    let l = label(&t);
    for (i, n) in t.nodes.iter().enumerate() {
        if n.kind == NodeKind::Stop && l.left[i] != 0 {
            return Err(TreeViolation::StopLabel {
                name: name.clone(),
                path: t.path(i),
                value: l.left[i],
            });
        }
    }
    for (x, b) in t.loops() {
        let (h, k) = (l.left[b], l.left[x]);
        let weights = t.loop_weights(x, b);
        if t.reaches_stop(b) {
            if h != k {
                return Err(TreeViolation::LoopMismatch {
                    name: name.clone(),
                    binder: t.path(b),
                    var: t.path(x),
                    binder_label: h,
                    var_label: k,
                });
            }
        } else if weights.iter().all(|w| w.0 == 0) && h != 0 {
            return Err(TreeViolation::PendingLoop {
                name: name.clone(),
                binder: t.path(b),
                var: t.path(x),
                pending: h,
            });
        }
        if weights.iter().any(|w| w.0 > 0) && !weights.iter().any(|w| w.0 < 0) {
            return Err(TreeViolation::UnbalancedLoop {
                name: name.clone(),
                binder: t.path(b),
                var: t.path(x),
            });
        }
    }
    Ok(())
}

/// No run ends in an endless stream of server inputs, decided exactly on
/// the state graph.
pub fn check_non_def_server_inputted(f: &Orchestrator) -> Result<(), FlowViolation> {
    flow_graph(f).check_non_def_server_inputted()
}

/// The literal tree condition: every loop with a server input also
/// delivers something to the client. Stricter than necessary, since a loop
/// such as `<_,a>.<!a,a>` is rejected although a synchronous action is not
/// a server input.
pub fn check_non_def_server_inputted_literal(f: &Orchestrator) -> Result<(), TreeViolation> {
    let t = star_tree(f);
    for (x, b) in t.loops() {
        let weights = t.loop_weights(x, b);
        if weights.iter().any(|w| w.1 > 0) && !weights.iter().any(|w| w.1 < 0) {
            return Err(TreeViolation::ServerInputLoop {
                binder: t.path(b),
                var: t.path(x),
            });
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RespectMode {
    /// Tree soundness plus the exact graph checks.
    #[default]
    Exact,
    /// The tree conditions exactly as stated.
    Literal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct NameVerdict {
    pub sound: bool,
    pub client_respectful: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RespectVerdict {
    pub respectful: bool,
    pub per_name: BTreeMap<Name, NameVerdict>,
    pub server_inputted_ok: bool,
    pub evidence: Vec<RespectEvidence>,
}

pub fn is_respectful(f: &Orchestrator) -> RespectVerdict {
    is_respectful_in(f, RespectMode::Exact)
}

/// Names absent from `f` have all-zero trees and pass trivially, so only
/// the names of `f` are checked.
pub fn is_respectful_in(f: &Orchestrator, mode: RespectMode) -> RespectVerdict {
    assert!(f.is_closed(), "respectfulness needs a closed orchestrator");
    let mut evidence = Vec::new();
    let mut per_name = BTreeMap::new();
    let graph = (mode == RespectMode::Exact).then(|| flow_graph(f));
    for name in f.names() {
        let sound = match check_sound(f, &name) {
            Ok(()) => true,
            Err(v) => {
                evidence.push(RespectEvidence::Tree(v));
                false
            }
        };
        let client = match &graph {
            Some(g) => g.check_client_respectful(&name).map_err(RespectEvidence::Flow),
            None => check_client_respectful_literal(f, &name).map_err(RespectEvidence::Tree),
        };
        let client_respectful = match client {
            Ok(()) => true,
            Err(e) => {
                evidence.push(e);
                false
            }
        };
        per_name.insert(name, NameVerdict { sound, client_respectful });
    }
    let server = match &graph {
        Some(g) => g.check_non_def_server_inputted().map_err(RespectEvidence::Flow),
        None => check_non_def_server_inputted_literal(f).map_err(RespectEvidence::Tree),
    };
    let server_inputted_ok = match server {
        Ok(()) => true,
        Err(e) => {
            evidence.push(e);
            false
        }
    };
    let respectful = server_inputted_ok && per_name.values().all(|v| v.sound && v.client_respectful);
    RespectVerdict {
        respectful,
        per_name,
        server_inputted_ok,
        evidence,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_orchestrator_raw;

    fn o(s: &str) -> Orchestrator {
        parse_orchestrator_raw(s).unwrap()
    }

    fn n(s: &str) -> Name {
        Name::from(s)
    }

    fn edge_weights(t: &WeightedTree) -> Vec<(i64, i64)> {
        t.nodes.iter().skip(1).map(|x| x.weight).filter(|w| *w != (0, 0)).collect()
    }

    #[test]
    fn tree_weights() {
        assert_eq!(edge_weights(&buffer_aware_tree(&o("<a,_>"), &n("a"))), vec![(1, 0)]);
        assert_eq!(edge_weights(&buffer_aware_tree(&o("<b,_>"), &n("a"))), vec![]);
        assert_eq!(edge_weights(&buffer_aware_tree(&o("<_,!a>"), &n("a"))), vec![(-1, 0)]);
        assert_eq!(edge_weights(&star_tree(&o("<a,_>.<b,_>"))), vec![(1, 0), (1, 0)]);
        assert_eq!(edge_weights(&star_tree(&o("<a,!a>"))), vec![]);
        assert_eq!(edge_weights(&star_tree(&o("<_,b>.<_,c>"))), vec![(0, 1), (0, 1)]);
    }

    #[test]
    fn labels_are_path_sums() {
        let t = buffer_aware_tree(&o("<a,_>.<_,!a>"), &n("a"));
        assert_eq!(label(&t).left, vec![0, 1, 0]);
        let t = buffer_aware_tree(&o("1"), &n("a"));
        assert_eq!(label(&t), Labelling { left: vec![0], right: vec![0] });
    }

    #[test]
    fn soundness() {
        let e = check_sound(&o("<a,_>.<_,!b>.<_,!a>"), &n("b")).unwrap_err();
        assert!(matches!(e, TreeViolation::NegativeLabel { side: Side::Cs, value: -1, .. }));
        assert!(check_sound(&o("rec X.<a,_>.<_,!a>.X"), &n("a")).is_ok());
        assert!(check_sound(&o("1"), &n("a")).is_ok());
        let e = check_sound(&o(r"<a,_>.<a,_>.rec X.(<b,!b>.<_,!a>.X \/ <c,!c>)"), &n("a")).unwrap_err();
        assert!(matches!(e, TreeViolation::DrainingLoop { net: -1, .. }), "{e}");
    }

    #[test]
    fn client_respect() {
        for (src, name) in [
            ("<a,!a>.<b,_>", "b"),
            (r"<c,!c>.rec X.(<!a,a> \/ <c,_>.<b,!b>.X)", "c"),
            ("<a,_>.rec X.<a,!a>.X", "a"),
        ] {
            assert!(check_client_respectful(&o(src), &n(name)).is_err(), "{src}");
            assert!(check_client_respectful_literal(&o(src), &n(name)).is_err(), "{src}");
        }
        assert!(check_client_respectful(&o("rec X.<a,_>.<_,!a>.X"), &n("a")).is_ok());
        assert!(check_client_respectful_literal(&o("rec X.<a,_>.<_,!a>.X"), &n("a")).is_ok());
    }

    #[test]
    fn literal_client_check_misses_nested_gain() {
        // A turn of the first loop stores one more `a` than it delivers,
        // and the second loop, which never exits, is labelled 0 in the tree.
        let f = o(r"rec Y.(<a,_>.<a,_>.<_,!a>.Y \/ <b,!b>.rec Z.<c,!c>.Z)");
        assert!(check_client_respectful_literal(&f, &n("a")).is_ok());
        assert!(check_client_respectful(&f, &n("a")).is_err());
    }

    #[test]
    fn server_inputs() {
        let f = o(r"<c,!c>.rec X.(<!a,a> \/ <_,b>.<_,c>.X)");
        assert!(check_non_def_server_inputted(&f).is_err());
        assert!(check_non_def_server_inputted_literal(&f).is_err());
        assert!(check_non_def_server_inputted(&o("rec X.<_,a>.<!a,_>.X")).is_ok());
        let sync = o("rec X.<_,a>.<!a,a>.X");
        assert!(check_non_def_server_inputted(&sync).is_ok());
        assert!(check_non_def_server_inputted_literal(&sync).is_err());
    }

    #[test]
    fn verdicts() {
        let fake = is_respectful(&o("<a,!a>.<b,_>"));
        assert!(!fake.respectful);
        assert!(!fake.per_name[&n("b")].client_respectful);
        assert!(fake.per_name[&n("a")].client_respectful);
        assert!(is_respectful(&o("1")).respectful);
        let mediator = o(
            r"rec X.<tR,!tR>.<hR,!hR>.(<!t,t>.<!h,h>.<_,w>.X \/ <_,h>.<!t,t>.<!h,_>.<_,w>.X)",
        );
        let v = is_respectful(&mediator);
        assert!(v.respectful, "{:?}", v.evidence);
    }
}
