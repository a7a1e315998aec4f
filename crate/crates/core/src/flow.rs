//! Exact respectfulness analysis on finite labelled graphs.
//!
//! A [`FlowGraph`] is either the state graph of an orchestrator or the
//! reachable graph of an orchestrated system (where `None` labels are
//! internal steps of the client or server). Maximal runs are the paths that
//! end in a terminal node together with all infinite paths. Each clause of
//! respectfulness is reduced to a question about paths and cycles:
//!
//! * soundness: no prefix sum of a counter is negative (shortest paths with
//!   negative-cycle detection);
//! * client respect, finite part: every path to a terminal node, or to a
//!   node on a cycle that never touches the client-to-server flow of the
//!   name, carries a zero client-to-server sum;
//! * client respect, infinite part: no cycle feeds the name from the client
//!   without ever delivering it;
//! * no cycle consists of server inputs alone.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use serde::Serialize;

use crate::buffers::Side;
use crate::names::Name;
use crate::orchestrators::{ActionSequence, OrchAction, TermGraph};

pub type FlowLabel = Option<OrchAction>;

#[derive(Clone, Debug)]
pub struct FlowGraph {
    succ: Vec<Vec<(FlowLabel, usize)>>,
    terminal: Vec<bool>,
    root: usize,
}

/// A counterexample to one clause of respectfulness. Sequences list the
/// orchestration actions only; internal steps are dropped.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FlowViolation {
    /// Some prefix takes a counter below zero. A lasso means the cycle
    /// drains the counter.
    Unsound { name: Name, side: Side, sequence: ActionSequence },
    /// A maximal run leaves `pending` client messages for good.
    StrandedMessages { name: Name, pending: i64, sequence: ActionSequence },
    /// A run keeps taking `name` from the client and never delivers it.
    DefinitelyClientInput { name: Name, sequence: ActionSequence },
    /// A run eventually does nothing but take inputs from the server.
    DefinitelyServerInputted { sequence: ActionSequence },
}

impl FlowViolation {
    pub fn name(&self) -> Option<&Name> {
        match self {
            FlowViolation::Unsound { name, .. }
            | FlowViolation::StrandedMessages { name, .. }
            | FlowViolation::DefinitelyClientInput { name, .. } => Some(name),
            FlowViolation::DefinitelyServerInputted { .. } => None,
        }
    }

    pub fn sequence(&self) -> &ActionSequence {
        match self {
            FlowViolation::Unsound { sequence, .. }
            | FlowViolation::StrandedMessages { sequence, .. }
            | FlowViolation::DefinitelyClientInput { sequence, .. }
            | FlowViolation::DefinitelyServerInputted { sequence } => sequence,
        }
    }
}

impl fmt::Display for FlowViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlowViolation::Unsound { name, side, sequence } => {
                write!(f, "unsound: {side}_{name} goes negative along {sequence}")
            }
            FlowViolation::StrandedMessages { name, pending, sequence } => {
                write!(f, "client messages stranded: {pending} x {name} never delivered after {sequence}")
            }
            FlowViolation::DefinitelyClientInput { name, sequence } => {
                write!(f, "{name} is taken from the client forever without delivery along {sequence}")
            }
            FlowViolation::DefinitelyServerInputted { sequence } => {
                write!(f, "eventually only server inputs along {sequence}")
            }
        }
    }
}

/// A path as the edges taken: (source node, index into its successors).
type Path = Vec<(usize, usize)>;

struct Components {
    id: Vec<usize>,
    cyclic: Vec<bool>,
}

fn weight(label: &FlowLabel, name: &Name, side: Side) -> i64 {
    label.as_ref().map_or(0, |m| side.pick(m.weight(name)))
}

fn is_in_c(label: &FlowLabel, name: &Name) -> bool {
    matches!(label, Some(OrchAction::InC(n)) if n == name)
}

fn is_out_s(label: &FlowLabel, name: &Name) -> bool {
    matches!(label, Some(OrchAction::OutS(n)) if n == name)
}

impl FlowGraph {
    /// `succ[u]` lists the labelled edges out of `u`; every node must be
    /// reachable from `root`.
    pub fn new(succ: Vec<Vec<(FlowLabel, usize)>>, terminal: Vec<bool>, root: usize) -> Self {
        assert_eq!(succ.len(), terminal.len());
        FlowGraph { succ, terminal, root }
    }

    pub fn from_term_graph(g: &TermGraph) -> Self {
        let succ = (0..g.len())
            .map(|u| g.edges(u).iter().map(|(a, v)| (Some(a.clone()), *v)).collect())
            .collect();
        let terminal = (0..g.len()).map(|u| g.is_terminal(u)).collect();
        FlowGraph::new(succ, terminal, g.root())
    }

    pub fn len(&self) -> usize {
        self.succ.len()
    }

    pub fn is_empty(&self) -> bool {
        self.succ.is_empty()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn edges(&self, u: usize) -> &[(FlowLabel, usize)] {
        &self.succ[u]
    }

    pub fn is_terminal(&self, u: usize) -> bool {
        self.terminal[u]
    }

    /// Names occurring on some edge.
    pub fn names(&self) -> BTreeSet<Name> {
        self.succ
            .iter()
            .flatten()
            .filter_map(|(l, _)| l.as_ref().map(|m| m.name().clone()))
            .collect()
    }

    fn labels(&self, path: &[(usize, usize)]) -> Vec<OrchAction> {
        path.iter().filter_map(|&(u, i)| self.succ[u][i].0.clone()).collect()
    }

    fn target(&self, (u, i): (usize, usize)) -> usize {
        self.succ[u][i].1
    }

    fn components(&self, keep: impl Fn(&FlowLabel) -> bool) -> Components {
        let mut g: DiGraph<(), ()> = DiGraph::with_capacity(self.len(), 0);
        for _ in 0..self.len() {
            g.add_node(());
        }
        let mut self_loop = vec![false; self.len()];
        for (u, edges) in self.succ.iter().enumerate() {
            for (l, v) in edges {
                if keep(l) {
                    g.add_edge(NodeIndex::new(u), NodeIndex::new(*v), ());
                    if u == *v {
                        self_loop[u] = true;
                    }
                }
            }
        }
        let sccs = tarjan_scc(&g);
        let mut id = vec![0; self.len()];
        let mut cyclic = vec![false; sccs.len()];
        for (c, members) in sccs.iter().enumerate() {
            cyclic[c] = members.len() > 1 || self_loop[members[0].index()];
            for n in members {
                id[n.index()] = c;
            }
        }
        Components { id, cyclic }
    }

    /// Shortest path (by edge count) from `from` to a node satisfying
    /// `goal`, using only edges accepted by `edge_ok`.
    fn bfs(
        &self,
        from: usize,
        goal: impl Fn(usize) -> bool,
        edge_ok: impl Fn(usize, &FlowLabel, usize) -> bool,
    ) -> Option<Path> {
        if goal(from) {
            return Some(Vec::new());
        }
        let mut pred: HashMap<usize, (usize, usize)> = HashMap::new();
        let mut seen = HashSet::from([from]);
        let mut queue = VecDeque::from([from]);
        while let Some(u) = queue.pop_front() {
            for (i, (l, v)) in self.succ[u].iter().enumerate() {
                if !edge_ok(u, l, *v) || !seen.insert(*v) {
                    continue;
                }
                pred.insert(*v, (u, i));
                if goal(*v) {
                    let mut path = Vec::new();
                    let mut x = *v;
                    while x != from {
                        let e = pred[&x];
                        path.push(e);
                        x = e.0;
                    }
                    path.reverse();
                    return Some(path);
                }
                queue.push_back(*v);
            }
        }
        None
    }

    fn path_to(&self, target: usize) -> Path {
        self.bfs(self.root, |x| x == target, |_, _, _| true)
            .expect("every node is reachable from the root")
    }

    /// A cycle that starts with edge `(u, i)` and returns to `u` inside the
    /// component of `u`, using only edges accepted by `keep`.
    fn cycle_through(&self, edge: (usize, usize), comps: &Components, keep: impl Fn(&FlowLabel) -> bool) -> Path {
        let (u, _) = edge;
        let c = comps.id[u];
        let v = self.target(edge);
        let back = self
            .bfs(v, |x| x == u, |a, l, b| keep(l) && comps.id[a] == c && comps.id[b] == c)
            .expect("edge lies inside a strongly connected component");
        let mut cycle = vec![edge];
        cycle.extend(back);
        cycle
    }

    fn lasso(&self, prefix: &[(usize, usize)], cycle: &[(usize, usize)]) -> ActionSequence {
        ActionSequence::lasso(self.labels(prefix), self.labels(cycle))
    }

    /// Both counters of `name` stay nonnegative on every path from the root.
    pub fn check_sound(&self, name: &Name) -> Result<(), FlowViolation> {
        for side in [Side::Cs, Side::Sc] {
            self.check_sound_side(name, side)?;
        }
        Ok(())
    }

    fn check_sound_side(&self, name: &Name, side: Side) -> Result<(), FlowViolation> {
        // Label-correcting shortest paths. Distances only decrease and any
        // negative one is reported at once, so without a violation every
        // distance stays in 0..=len and the loop terminates; a reachable
        // negative cycle drives some distance below zero.
        let n = self.len();
        let mut dist: Vec<Option<i64>> = vec![None; n];
        let mut pred: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut queued = vec![false; n];
        dist[self.root] = Some(0);
        let mut queue = VecDeque::from([self.root]);
        queued[self.root] = true;
        while let Some(u) = queue.pop_front() {
            queued[u] = false;
            let du = dist[u].expect("queued nodes have a distance");
            for (i, (l, v)) in self.succ[u].iter().enumerate() {
                let nd = du + weight(l, name, side);
                if dist[*v].is_some_and(|d| d <= nd) {
                    continue;
                }
                dist[*v] = Some(nd);
                pred[*v] = Some((u, i));
                if nd < 0 {
                    return Err(self.unsound_evidence(name, side, *v, &pred));
                }
                if !queued[*v] {
                    queued[*v] = true;
                    queue.push_back(*v);
                }
            }
        }
        Ok(())
    }

    fn unsound_evidence(&self, name: &Name, side: Side, from: usize, pred: &[Option<(usize, usize)>]) -> FlowViolation {
        // Walk the predecessor chain back. A repeated node closes a cycle of
        // the predecessor graph, which is necessarily negative.
        let mut chain: Vec<(usize, usize)> = Vec::new();
        let mut position: HashMap<usize, usize> = HashMap::new();
        let mut x = from;
        loop {
            if let Some(&at) = position.get(&x) {
                let mut cycle: Path = chain[at..].to_vec();
                cycle.reverse();
                let prefix = self.path_to(cycle[0].0);
                debug_assert!(cycle.iter().map(|&(u, i)| weight(&self.succ[u][i].0, name, side)).sum::<i64>() < 0);
                return FlowViolation::Unsound {
                    name: name.clone(),
                    side,
                    sequence: self.lasso(&prefix, &cycle),
                };
            }
            position.insert(x, chain.len());
            match pred[x] {
                Some(e) => {
                    chain.push(e);
                    x = e.0;
                }
                None => break,
            }
        }
        chain.reverse();
        let mut sum = 0;
        for (k, &(u, i)) in chain.iter().enumerate() {
            sum += weight(&self.succ[u][i].0, name, side);
            if sum < 0 {
                return FlowViolation::Unsound {
                    name: name.clone(),
                    side,
                    sequence: ActionSequence::finite(self.labels(&chain[..=k])),
                };
            }
        }
        unreachable!("a predecessor path to a negative distance has a negative prefix")
    }

    /// Client messages of `name` are never stranded and never fed forever
    /// without delivery.
    pub fn check_client_respectful(&self, name: &Name) -> Result<(), FlowViolation> {
        // Infinite runs with infinitely many inputs of `name` from the client
        // but finitely many deliveries: a cycle avoiding deliveries that
        // contains an input.
        let no_out = |l: &FlowLabel| !is_out_s(l, name);
        let comps = self.components(no_out);
        for u in 0..self.len() {
            for (i, (l, v)) in self.succ[u].iter().enumerate() {
                if is_in_c(l, name) && comps.id[u] == comps.id[*v] {
                    let cycle = self.cycle_through((u, i), &comps, no_out);
                    return Err(FlowViolation::DefinitelyClientInput {
                        name: name.clone(),
                        sequence: self.lasso(&self.path_to(u), &cycle),
                    });
                }
            }
        }

        // Runs whose client-to-server flow of `name` stops: they end in a
        // terminal node or circle forever on a neutral cycle.
        let neutral = |l: &FlowLabel| !is_in_c(l, name) && !is_out_s(l, name);
        let ncomps = self.components(neutral);
        let settles: Vec<bool> = (0..self.len())
            .map(|u| self.terminal[u] || ncomps.cyclic[ncomps.id[u]])
            .collect();

        let mut rev: Vec<Vec<usize>> = vec![Vec::new(); self.len()];
        for (u, edges) in self.succ.iter().enumerate() {
            for (_, v) in edges {
                rev[*v].push(u);
            }
        }
        let mut relevant = settles.clone();
        let mut queue: VecDeque<usize> = (0..self.len()).filter(|&u| settles[u]).collect();
        while let Some(v) = queue.pop_front() {
            for &u in &rev[v] {
                if !relevant[u] {
                    relevant[u] = true;
                    queue.push_back(u);
                }
            }
        }
        if !relevant[self.root] {
            return Ok(());
        }

        // Every path between relevant nodes extends to a settling run, so
        // all of them must agree on the pending count: it is a potential.
        let cs = |l: &FlowLabel| weight(l, name, Side::Cs);
        let mut pot: Vec<Option<i64>> = vec![None; self.len()];
        let mut tree: Vec<Option<(usize, usize)>> = vec![None; self.len()];
        pot[self.root] = Some(0);
        let mut queue = VecDeque::from([self.root]);
        let tree_path = |tree: &[Option<(usize, usize)>], mut x: usize| {
            let mut p = Vec::new();
            while let Some(e) = tree[x] {
                p.push(e);
                x = e.0;
            }
            p.reverse();
            p
        };
        while let Some(u) = queue.pop_front() {
            let pu = pot[u].unwrap();
            if settles[u] && pu != 0 {
                return Err(self.stranded(name, tree_path(&tree, u), &settles, &ncomps, &relevant));
            }
            for (i, (l, v)) in self.succ[u].iter().enumerate() {
                if !relevant[*v] {
                    continue;
                }
                let want = pu + cs(l);
                match pot[*v] {
                    None => {
                        pot[*v] = Some(want);
                        tree[*v] = Some((u, i));
                        queue.push_back(*v);
                    }
                    Some(pv) if pv != want => {
                        let via_tree = tree_path(&tree, *v);
                        let mut via_edge = tree_path(&tree, u);
                        via_edge.push((u, i));
                        let ext = self
                            .bfs(*v, |x| settles[x], |_, _, b| relevant[b])
                            .expect("relevant nodes reach a settling node");
                        let ext_sum: i64 = ext.iter().map(|&(a, k)| cs(&self.succ[a][k].0)).sum();
                        let chosen = if pv + ext_sum != 0 { via_tree } else { via_edge };
                        return Err(self.stranded(name, chosen, &settles, &ncomps, &relevant));
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(())
    }

    /// Evidence for a path (from the root) whose settling extension leaves
    /// client messages of `name` pending.
    fn stranded(&self, name: &Name, mut path: Path, settles: &[bool], ncomps: &Components, relevant: &[bool]) -> FlowViolation {
        let end = path.last().map_or(self.root, |&e| self.target(e));
        let ext = self
            .bfs(end, |x| settles[x], |_, _, b| relevant[b])
            .expect("relevant nodes reach a settling node");
        path.extend(ext);
        let t = path.last().map_or(self.root, |&e| self.target(e));
        let pending: i64 = path.iter().map(|&(u, i)| weight(&self.succ[u][i].0, name, Side::Cs)).sum();
        debug_assert_ne!(pending, 0);
        let sequence = if self.terminal[t] {
            ActionSequence::finite(self.labels(&path))
        } else {
            let neutral = |l: &FlowLabel| !is_in_c(l, name) && !is_out_s(l, name);
            let c = ncomps.id[t];
            let i = self.succ[t]
                .iter()
                .position(|(l, v)| neutral(l) && ncomps.id[*v] == c)
                .expect("a node on a neutral cycle has a neutral edge inside its component");
            let cycle = self.cycle_through((t, i), ncomps, neutral);
            self.lasso(&path, &cycle)
        };
        FlowViolation::StrandedMessages {
            name: name.clone(),
            pending,
            sequence,
        }
    }

    /// No run ends in an endless stream of server inputs.
    pub fn check_non_def_server_inputted(&self) -> Result<(), FlowViolation> {
        let keep = |l: &FlowLabel| matches!(l, None | Some(OrchAction::InS(_)));
        let comps = self.components(keep);
        let mut has_input = vec![false; comps.cyclic.len()];
        for u in 0..self.len() {
            for (i, (l, v)) in self.succ[u].iter().enumerate() {
                if matches!(l, Some(OrchAction::InS(_))) && comps.id[u] == comps.id[*v] {
                    has_input[comps.id[u]] = true;
                    let cycle = self.cycle_through((u, i), &comps, keep);
                    return Err(FlowViolation::DefinitelyServerInputted {
                        sequence: self.lasso(&self.path_to(u), &cycle),
                    });
                }
            }
        }
        assert!(
            comps.cyclic.iter().zip(&has_input).all(|(c, h)| !c || *h),
            "cycle of internal steps only"
        );
        Ok(())
    }

    /// Every violated clause, at most one piece of evidence per clause and
    /// name. Empty when all maximal runs are respectful.
    pub fn analyze(&self) -> Vec<FlowViolation> {
        let mut out = Vec::new();
        for name in self.names() {
            for side in [Side::Cs, Side::Sc] {
                if let Err(v) = self.check_sound_side(&name, side) {
                    out.push(v);
                }
            }
            if let Err(v) = self.check_client_respectful(&name) {
                out.push(v);
            }
        }
        if let Err(v) = self.check_non_def_server_inputted() {
            out.push(v);
        }
        out
    }

    /// A finite family of maximal runs, as action sequences, from which
    /// every respectfulness verdict can be read off sequence by sequence.
    ///
    /// Members are `P.C.Q` ending in a terminal node, and lassos `(P.C.Q, D)`,
    /// where `P` is a simple path from the root to some node `u`, `C` is
    /// empty or a simple cycle at `u`, `Q` is a simple path from `u` to `v`
    /// and `D` is a simple cycle at `v`. Simple paths with simple end cycles
    /// alone would miss a pending count that only a detour around a second
    /// cycle exposes; the optional pivot cycle `C` covers that case.
    ///
    /// The family grows exponentially with the graph; it is meant as an
    /// independent oracle on small graphs.
    pub fn maximal_lassos(&self) -> BTreeSet<ActionSequence> {
        let paths_from: Vec<Vec<(usize, Vec<OrchAction>)>> =
            (0..self.len()).map(|u| self.simple_paths(u)).collect();
        let cycles_at: Vec<Vec<Vec<OrchAction>>> = (0..self.len()).map(|u| self.simple_cycles(u)).collect();
        let mut out = BTreeSet::new();
        for (u, p) in &paths_from[self.root] {
            let pivots = std::iter::once(Vec::new()).chain(cycles_at[*u].iter().cloned());
            for c in pivots {
                for (v, q) in &paths_from[*u] {
                    let mut pre = p.clone();
                    pre.extend(c.iter().cloned());
                    pre.extend(q.iter().cloned());
                    if self.terminal[*v] {
                        out.insert(ActionSequence::finite(pre.clone()));
                    }
                    for d in &cycles_at[*v] {
                        if !d.is_empty() {
                            out.insert(ActionSequence::lasso(pre.clone(), d.clone()));
                        }
                    }
                }
            }
        }
        out
    }

    /// All simple paths from `u`, with their endpoints, the empty one included.
    fn simple_paths(&self, u: usize) -> Vec<(usize, Vec<OrchAction>)> {
        fn go(g: &FlowGraph, u: usize, on: &mut Vec<bool>, acc: &mut Vec<OrchAction>, out: &mut Vec<(usize, Vec<OrchAction>)>) {
            out.push((u, acc.clone()));
            for (l, v) in &g.succ[u] {
                if on[*v] {
                    continue;
                }
                on[*v] = true;
                let pushed = l.is_some();
                if let Some(m) = l {
                    acc.push(m.clone());
                }
                go(g, *v, on, acc, out);
                if pushed {
                    acc.pop();
                }
                on[*v] = false;
            }
        }
        let mut on = vec![false; self.len()];
        on[u] = true;
        let mut out = Vec::new();
        go(self, u, &mut on, &mut Vec::new(), &mut out);
        out
    }

    /// Action sequences of the simple cycles through `u`, starting at `u`.
    fn simple_cycles(&self, u: usize) -> Vec<Vec<OrchAction>> {
        fn go(g: &FlowGraph, start: usize, x: usize, on: &mut Vec<bool>, acc: &mut Vec<OrchAction>, out: &mut Vec<Vec<OrchAction>>) {
            for (l, v) in &g.succ[x] {
                let pushed = l.is_some();
                if let Some(m) = l {
                    acc.push(m.clone());
                }
                if *v == start {
                    out.push(acc.clone());
                } else if !on[*v] {
                    on[*v] = true;
                    go(g, start, *v, on, acc, out);
                    on[*v] = false;
                }
                if pushed {
                    acc.pop();
                }
            }
        }
        let mut on = vec![false; self.len()];
        on[u] = true;
        let mut out = Vec::new();
        go(self, u, u, &mut on, &mut Vec::new(), &mut out);
        out
    }

    /// Per-name summary used by reports: which names fail which clause.
    pub fn failing_names(violations: &[FlowViolation]) -> BTreeMap<Name, Vec<&'static str>> {
        let mut out: BTreeMap<Name, Vec<&'static str>> = BTreeMap::new();
        for v in violations {
            let clause = match v {
                FlowViolation::Unsound { .. } => "sound",
                FlowViolation::StrandedMessages { .. } | FlowViolation::DefinitelyClientInput { .. } => {
                    "client_respectful"
                }
                FlowViolation::DefinitelyServerInputted { .. } => continue,
            };
            if let Some(n) = v.name() {
                out.entry(n.clone()).or_default().push(clause);
            }
        }
        out
    }
}
