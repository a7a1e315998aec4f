//! Orchestrated systems: a client and a server run under an orchestrator.
//!
//! The rules never look at the buffer. Delivering a message that was never
//! stored is a legal step here and shows up later as an unsound trace.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::fmt::Write as _;

use serde_json::{json, Value};

use crate::contracts::{ContractGraph, ContractLabel, Polarity, SessionContract};
use crate::error::{Error, Result};
use crate::flow::{FlowGraph, FlowLabel};
use crate::lts::{StateGraph, StateId};
use crate::orchestrators::{OrchAction, Orchestrator, TermGraph};
use crate::Limits;

/// A client, an orchestrator and a server, each head-unfolded.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SystemConfig {
    pub client: SessionContract,
    pub orch: Orchestrator,
    pub server: SessionContract,
}

impl SystemConfig {
    pub fn new(client: &SessionContract, orch: &Orchestrator, server: &SessionContract) -> Self {
        SystemConfig {
            client: client.unfold(),
            orch: orch.unfold(),
            server: server.unfold(),
        }
    }
}

impl fmt::Display for SystemConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} || {} || {}", self.client, self.orch, self.server)
    }
}

fn offers<C: Clone>(edges: &[(ContractLabel, C)], polarity: Polarity, name: &crate::Name) -> Vec<C> {
    edges
        .iter()
        .filter_map(|(l, t)| match l {
            ContractLabel::Act(a) if a.polarity == polarity && &a.name == name => Some(t.clone()),
            _ => None,
        })
        .collect()
}

/// The system rules over any representation of component states.
fn combine<C: Clone, F: Clone>(
    (client, orch, server): (&C, &F, &C),
    client_edges: &[(ContractLabel, C)],
    orch_edges: &[(OrchAction, F)],
    server_edges: &[(ContractLabel, C)],
) -> Vec<(FlowLabel, (C, F, C))> {
    use Polarity::{Input, Output};
    let mut out = Vec::new();
    for (l, c) in client_edges {
        if *l == ContractLabel::Tau {
            out.push((None, (c.clone(), orch.clone(), server.clone())));
        }
    }
    for (l, s) in server_edges {
        if *l == ContractLabel::Tau {
            out.push((None, (client.clone(), orch.clone(), s.clone())));
        }
    }
    for (m, g) in orch_edges {
        let name = m.name();
        let (client_side, server_side) = match m {
            OrchAction::SyncL(_) => (Some(Output), Some(Input)),
            OrchAction::SyncR(_) => (Some(Input), Some(Output)),
            OrchAction::InC(_) => (Some(Output), None),
            OrchAction::OutC(_) => (Some(Input), None),
            OrchAction::InS(_) => (None, Some(Output)),
            OrchAction::OutS(_) => (None, Some(Input)),
        };
        let cs = match client_side {
            Some(p) => offers(client_edges, p, name),
            None => vec![client.clone()],
        };
        let ss = match server_side {
            Some(p) => offers(server_edges, p, name),
            None => vec![server.clone()],
        };
        for c in &cs {
            for s in &ss {
                out.push((Some(m.clone()), (c.clone(), g.clone(), s.clone())));
            }
        }
    }
    out
}

/// One step of the orchestrated system. Targets are head-unfolded.
pub fn system_step(c: &SystemConfig) -> Vec<(FlowLabel, SystemConfig)> {
    let unfold_c = |v: Vec<(ContractLabel, SessionContract)>| -> Vec<_> {
        v.into_iter().map(|(l, t)| (l, t.unfold())).collect()
    };
    let client = unfold_c(c.client.transitions());
    let server = unfold_c(c.server.transitions());
    let orch: Vec<_> = c.orch.transitions().into_iter().map(|(a, t)| (a, t.unfold())).collect();
    combine((&c.client, &c.orch, &c.server), &client, &orch, &server)
        .into_iter()
        .map(|(l, (client, orch, server))| (l, SystemConfig { client, orch, server }))
        .collect()
}

/// The reachable configurations of a system, with components interned in
/// their own state graphs.
#[derive(Clone, Debug)]
pub struct ProductGraph {
    client: ContractGraph,
    orch: TermGraph,
    server: ContractGraph,
    graph: StateGraph<(StateId, StateId, StateId), FlowLabel>,
}

impl ProductGraph {
    pub fn build(client: &SessionContract, orch: &Orchestrator, server: &SessionContract, node_cap: usize) -> Result<Self> {
        let cg = client.state_graph(node_cap)?;
        let og = orch.term_graph(node_cap)?;
        let sg = server.state_graph(node_cap)?;
        let graph = StateGraph::explore((0, 0, 0), node_cap, "product graph", |&(c, o, s)| {
            combine((&c, &o, &s), cg.edges(c), og.edges(o), sg.edges(s))
        })?;
        let pg = ProductGraph {
            client: cg,
            orch: og,
            server: sg,
            graph,
        };
        Ok(pg)
    }

    pub fn len(&self) -> usize {
        self.graph.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graph.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }

    pub fn root(&self) -> StateId {
        self.graph.root()
    }

    pub fn edges(&self, id: StateId) -> &[(FlowLabel, StateId)] {
        self.graph.edges(id)
    }

    pub fn config(&self, id: StateId) -> SystemConfig {
        let &(c, o, s) = self.graph.state(id);
        SystemConfig {
            client: self.client.state(c).clone(),
            orch: self.orch.state(o).clone(),
            server: self.server.state(s).clone(),
        }
    }

    pub fn client_is_success(&self, id: StateId) -> bool {
        self.client.state(self.graph.state(id).0).is_success()
    }

    /// Configurations with no step at all.
    pub fn stuck(&self) -> impl Iterator<Item = StateId> + '_ {
        self.graph.terminals()
    }

    pub fn is_stuck(&self, id: StateId) -> bool {
        self.graph.is_terminal(id)
    }

    /// The graph seen as runs of orchestration actions; stuck nodes end
    /// the finite maximal runs.
    pub fn flow(&self) -> FlowGraph {
        let succ = (0..self.len()).map(|u| self.edges(u).to_vec()).collect();
        let terminal = (0..self.len()).map(|u| self.is_stuck(u)).collect();
        FlowGraph::new(succ, terminal, self.root())
    }

    /// Labels of a shortest path from the root to `target`.
    pub fn path_to(&self, target: StateId) -> Vec<FlowLabel> {
        let mut pred: Vec<Option<(StateId, usize)>> = vec![None; self.len()];
        let mut seen = vec![false; self.len()];
        seen[self.root()] = true;
        let mut queue = VecDeque::from([self.root()]);
        while let Some(u) = queue.pop_front() {
            if u == target {
                break;
            }
            for (i, (_, v)) in self.edges(u).iter().enumerate() {
                if !seen[*v] {
                    seen[*v] = true;
                    pred[*v] = Some((u, i));
                    queue.push_back(*v);
                }
            }
        }
        let mut labels = Vec::new();
        let mut x = target;
        while let Some((u, i)) = pred[x] {
            labels.push(self.edges(u)[i].0.clone());
            x = u;
        }
        labels.reverse();
        labels
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph system {\n  node [shape=box];\n");
        for u in 0..self.len() {
            let shape = if self.is_stuck(u) { ", peripheries=2" } else { "" };
            let label = self.config(u).to_string().replace('\\', "\\\\").replace('"', "\\\"");
            let _ = writeln!(out, "  n{u} [label=\"{label}\"{shape}];");
        }
        for u in 0..self.len() {
            for (l, v) in self.edges(u) {
                let _ = writeln!(out, "  n{u} -> n{v} [label=\"{}\"];", label_text(l));
            }
        }
        out.push_str("}\n");
        out
    }

    pub fn to_json(&self) -> Value {
        let nodes: Vec<Value> = (0..self.len())
            .map(|u| {
                let c = self.config(u);
                json!({
                    "id": u,
                    "client": c.client.to_string(),
                    "orch": c.orch.to_string(),
                    "server": c.server.to_string(),
                    "stuck": self.is_stuck(u),
                })
            })
            .collect();
        let edges: Vec<Value> = (0..self.len())
            .flat_map(|u| {
                self.edges(u)
                    .iter()
                    .map(move |(l, v)| json!({"src": u, "label": label_text(l), "dst": v}))
            })
            .collect();
        json!({"root": self.root(), "nodes": nodes, "edges": edges})
    }
}

pub fn label_text(l: &FlowLabel) -> String {
    l.as_ref().map_or_else(|| "tau".to_string(), |m| m.to_string())
}

/// Strictness: every finite trace of the orchestrator can be realized by
/// the system, with internal steps interleaved. On failure returns a
/// shortest unrealizable trace.
pub fn is_strict(
    client: &SessionContract,
    orch: &Orchestrator,
    server: &SessionContract,
    limits: &Limits,
) -> Result<Option<Vec<OrchAction>>> {
    let pg = ProductGraph::build(client, orch, server, limits.node_cap)?;
    strict_on(&pg, limits)
}

pub(crate) fn strict_on(pg: &ProductGraph, limits: &Limits) -> Result<Option<Vec<OrchAction>>> {
    let tau_close = |seed: BTreeSet<StateId>| -> Vec<StateId> {
        let mut set = seed;
        let mut stack: Vec<StateId> = set.iter().copied().collect();
        while let Some(u) = stack.pop() {
            for (l, v) in pg.edges(u) {
                if l.is_none() && set.insert(*v) {
                    stack.push(*v);
                }
            }
        }
        set.into_iter().collect()
    };
    let og = &pg.orch;
    type Key = (Vec<StateId>, Vec<StateId>);
    let start: Key = (vec![og.root()], tau_close(BTreeSet::from([pg.root()])));
    let mut pred: HashMap<Key, Option<(Key, OrchAction)>> = HashMap::from([(start.clone(), None)]);
    let mut queue = VecDeque::from([start]);
    while let Some(key) = queue.pop_front() {
        let (orch_states, sys_states) = &key;
        let actions: BTreeSet<&OrchAction> = orch_states.iter().flat_map(|&d| og.edges(d).iter().map(|(a, _)| a)).collect();
        for a in actions {
            let next_orch: BTreeSet<StateId> = orch_states
                .iter()
                .flat_map(|&d| og.edges(d).iter().filter(|(b, _)| b == a).map(|(_, t)| *t))
                .collect();
            let next_sys: BTreeSet<StateId> = sys_states
                .iter()
                .flat_map(|&u| pg.edges(u).iter().filter(|(l, _)| l.as_ref() == Some(a)).map(|(_, v)| *v))
                .collect();
            if next_sys.is_empty() {
                let mut trace = vec![a.clone()];
                let mut k = &key;
                while let Some(Some((prev, b))) = pred.get(k) {
                    trace.push(b.clone());
                    k = prev;
                }
                trace.reverse();
                return Ok(Some(trace));
            }
            let next: Key = (next_orch.into_iter().collect(), tau_close(next_sys));
            if pred.contains_key(&next) {
                continue;
            }
            if pred.len() >= limits.det_cap {
                return Err(Error::ResourceLimit {
                    what: "strictness subset construction",
                    cap: limits.det_cap,
                });
            }
            pred.insert(next.clone(), Some((key.clone(), a.clone())));
            queue.push_back(next);
        }
    }
    Ok(None)
}

/// Outcome of the disrespectful compliance check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DsOutcome {
    Holds,
    /// The orchestrator can perform `trace` but the system cannot.
    NotStrict { trace: Vec<OrchAction> },
    /// The system gets stuck with the client unsatisfied.
    StuckClient { path: Vec<FlowLabel>, config: SystemConfig },
}

impl DsOutcome {
    pub fn holds(&self) -> bool {
        *self == DsOutcome::Holds
    }
}

impl fmt::Display for DsOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DsOutcome::Holds => f.write_str("holds"),
            DsOutcome::NotStrict { trace } => {
                let t: Vec<String> = trace.iter().map(|a| a.to_string()).collect();
                write!(f, "not strict: the system cannot perform {}", t.join(" "))
            }
            DsOutcome::StuckClient { path, config } => {
                let t: Vec<String> = path.iter().map(label_text).collect();
                write!(f, "stuck at {config} after {}", if t.is_empty() { "λ".into() } else { t.join(" ") })
            }
        }
    }
}

/// The orchestrator is strict and every stuck configuration has a
/// satisfied client.
pub fn check_ds(client: &SessionContract, orch: &Orchestrator, server: &SessionContract, limits: &Limits) -> Result<DsOutcome> {
    let pg = ProductGraph::build(client, orch, server, limits.node_cap)?;
    ds_on(&pg, limits)
}

pub(crate) fn ds_on(pg: &ProductGraph, limits: &Limits) -> Result<DsOutcome> {
    if let Some(trace) = strict_on(pg, limits)? {
        return Ok(DsOutcome::NotStrict { trace });
    }
    Ok(stuck_client(pg).unwrap_or(DsOutcome::Holds))
}

/// A shortest path to a stuck configuration whose client is not `1`.
/// Ids follow breadth-first discovery, so the first bad id is the nearest.
pub(crate) fn stuck_client(pg: &ProductGraph) -> Option<DsOutcome> {
    let bad = (0..pg.len()).find(|&u| pg.is_stuck(u) && !pg.client_is_success(u))?;
    Some(DsOutcome::StuckClient {
        path: pg.path_to(bad),
        config: pg.config(bad),
    })
}
