//! Finite state spaces of regular terms.

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};

pub type StateId = usize;

/// The reachable part of a labelled transition system, with states interned
/// by value. State `0` is the root.
#[derive(Clone, Debug)]
pub struct StateGraph<S, L> {
    states: Vec<S>,
    index: HashMap<S, StateId>,
    edges: Vec<Vec<(L, StateId)>>,
}

impl<S: Clone + Eq + Hash, L> StateGraph<S, L> {
    /// Breadth-first closure of `root` under `successors`. States must already
    /// be in the normal form used for identity.
    pub fn explore<F>(root: S, cap: usize, what: &'static str, mut successors: F) -> Result<Self>
    where
        F: FnMut(&S) -> Vec<(L, S)>,
    {
        let mut graph = StateGraph {
            states: vec![root.clone()],
            index: HashMap::from([(root, 0)]),
            edges: Vec::new(),
        };
        let mut next = 0;
        while next < graph.states.len() {
            let succ = successors(&graph.states[next]);
            let mut out = Vec::with_capacity(succ.len());
            for (label, target) in succ {
                let id = match graph.index.get(&target) {
                    Some(&id) => id,
                    None => {
                        if graph.states.len() >= cap {
                            return Err(Error::ResourceLimit { what, cap });
                        }
                        let id = graph.states.len();
                        graph.states.push(target.clone());
                        graph.index.insert(target, id);
                        id
                    }
                };
                out.push((label, id));
            }
            graph.edges.push(out);
            next += 1;
        }
        Ok(graph)
    }

    pub fn id_of(&self, state: &S) -> Option<StateId> {
        self.index.get(state).copied()
    }
}

impl<S, L> StateGraph<S, L> {
    pub fn root(&self) -> StateId {
        0
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, id: StateId) -> &S {
        &self.states[id]
    }

    pub fn states(&self) -> &[S] {
        &self.states
    }

    pub fn edges(&self, id: StateId) -> &[(L, StateId)] {
        &self.edges[id]
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    /// States without outgoing transitions.
    pub fn terminals(&self) -> impl Iterator<Item = StateId> + '_ {
        (0..self.states.len()).filter(|&id| self.edges[id].is_empty())
    }

    pub fn is_terminal(&self, id: StateId) -> bool {
        self.edges[id].is_empty()
    }
}
