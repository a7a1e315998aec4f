//! Orchestrator synthesis and the inference system it follows.
//!
//! [`synth`] returns the whole finite family of orchestrators derivable for
//! a client/server pair. The family is kept as a DAG of alternatives; its
//! members are ordered by size and produced on demand by unranking, and
//! [`Family::count`] is exact.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::rc::Rc;

use num_bigint::BigUint;
use serde::Serialize;

use crate::contracts::SessionContract;
use crate::error::{Error, Result};
use crate::names::{Name, RecVar, Var};
use crate::orchestrators::{OrchAction, Orchestrator};
use crate::respectfulness::is_respectful;
use crate::system::is_strict;
use crate::Limits;

/// The rules of the inference system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Rule {
    /// `1` for a satisfied client.
    Ax,
    /// A variable bound to exactly this pair.
    Hyp,
    /// Deliver one of the client's inputs.
    SumL,
    /// Deliver one of the server's inputs.
    SumR,
    /// Both sides choose internally; take every server output.
    OOA,
    /// Both sides choose internally; take every client output.
    OOB,
    /// Client chooses, server waits: store or forward each client output.
    OSum,
    /// Client waits, server chooses: store or forward each server output.
    SumO,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

enum Shape {
    Success,
    External(Vec<(Name, SessionContract)>),
    Internal(Vec<(Name, SessionContract)>),
}

fn shape(c: &SessionContract) -> Shape {
    match c.unfold() {
        SessionContract::Success => Shape::Success,
        SessionContract::External(bs) => Shape::External(bs),
        SessionContract::Internal(bs) => Shape::Internal(bs),
        other => panic!("not a closed contract: {other}"),
    }
}

fn lookup<'a>(branches: &'a [(Name, SessionContract)], name: &Name) -> Option<&'a SessionContract> {
    branches.iter().find(|(n, _)| n == name).map(|(_, c)| c)
}

/// Subsets of `names`, largest first, then in lexicographic order.
fn subsets_desc(names: &[Name]) -> Vec<Vec<Name>> {
    let mut out: Vec<Vec<Name>> = (0u64..1 << names.len())
        .map(|mask| {
            names
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, n)| n.clone())
                .collect()
        })
        .collect();
    out.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    out
}

pub type FamilyId = usize;

#[derive(Clone, Debug)]
pub struct Alternative {
    pub rule: Rule,
    pub branches: Vec<(OrchAction, FamilyId)>,
}

#[derive(Clone, Debug)]
pub enum FamilyNode {
    Empty,
    /// `1` or a variable.
    Leaf(Orchestrator),
    /// `rec var . (branches of one alternative)`, collapsed to the body when
    /// `var` does not occur in it.
    Rec { var: usize, alternatives: Vec<Alternative> },
}

/// Member counts indexed by weight. The weight of a member counts its
/// prefixes, choices and leaves; binders are not counted, so a weight does
/// not depend on which variables end up bound.
type Table = Vec<BigUint>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SynthStats {
    /// Distinct client/server pairs visited.
    pub pairs: usize,
    /// Upper bound on `pairs`: reachable client states times server states.
    pub pair_bound: usize,
    /// Memoized (assumptions, pair) entries.
    pub memo_entries: usize,
    pub family_nodes: usize,
}

/// The finite family of synthesized orchestrators.
#[derive(Clone, Debug)]
pub struct Family {
    nodes: Vec<FamilyNode>,
    root: FamilyId,
    var_names: Vec<RecVar>,
    tables: Vec<Table>,
    alt_tables: Vec<Vec<Vec<Table>>>,
    stats: SynthStats,
}

type Plan = (Rule, Vec<(OrchAction, usize)>);

struct Synth {
    pairs: HashMap<(SessionContract, SessionContract), usize>,
    pair_terms: Vec<(SessionContract, SessionContract)>,
    /// Alternatives of each pair over pair ids, computed on first visit.
    plans: Vec<Option<Rc<[Plan]>>>,
    var_names: Vec<RecVar>,
    env_vars: HashMap<usize, RecVar>,
    nodes: Vec<FamilyNode>,
    memo: HashMap<(Vec<usize>, usize), FamilyId>,
    stop: Option<FamilyId>,
    leaves: HashMap<usize, FamilyId>,
}

impl Synth {
    fn intern(&mut self, client: &SessionContract, server: &SessionContract) -> usize {
        let key = (client.unfold(), server.unfold());
        if let Some(&id) = self.pairs.get(&key) {
            return id;
        }
        let id = self.pair_terms.len();
        self.pair_terms.push(key.clone());
        self.plans.push(None);
        self.pairs.insert(key, id);
        let name = self.env_vars.get(&id).cloned().unwrap_or_else(|| RecVar::new(format!("%{id}")));
        self.var_names.push(name);
        id
    }

    fn push(&mut self, node: FamilyNode) -> FamilyId {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    fn plans(&mut self, pair: usize) -> Rc<[Plan]> {
        if let Some(p) = &self.plans[pair] {
            return p.clone();
        }
        let (client, server) = self.pair_terms[pair].clone();
        let mut plans: Vec<(Rule, Vec<(OrchAction, SessionContract, SessionContract)>)> = Vec::new();
        match (shape(&client), shape(&server)) {
            (Shape::External(is), Shape::External(js)) => {
                for (a, c) in &is {
                    plans.push((Rule::SumL, vec![(OrchAction::OutC(a.clone()), c.clone(), server.clone())]));
                }
                for (b, s) in &js {
                    plans.push((Rule::SumR, vec![(OrchAction::OutS(b.clone()), client.clone(), s.clone())]));
                }
            }
            (Shape::Internal(is), Shape::Internal(js)) => {
                plans.push((
                    Rule::OOB,
                    is.iter().map(|(a, c)| (OrchAction::InC(a.clone()), c.clone(), server.clone())).collect(),
                ));
                plans.push((
                    Rule::OOA,
                    js.iter().map(|(b, s)| (OrchAction::InS(b.clone()), client.clone(), s.clone())).collect(),
                ));
            }
            (Shape::Internal(is), Shape::External(js)) => {
                let common: Vec<Name> = is.iter().map(|(a, _)| a.clone()).filter(|a| lookup(&js, a).is_some()).collect();
                for k in subsets_desc(&common) {
                    let branches = is
                        .iter()
                        .map(|(a, c)| match k.contains(a) {
                            true => (OrchAction::SyncL(a.clone()), c.clone(), lookup(&js, a).unwrap().clone()),
                            false => (OrchAction::InC(a.clone()), c.clone(), server.clone()),
                        })
                        .collect();
                    plans.push((Rule::OSum, branches));
                }
                for (b, s) in &js {
                    plans.push((Rule::SumR, vec![(OrchAction::OutS(b.clone()), client.clone(), s.clone())]));
                }
            }
            (Shape::External(is), Shape::Internal(js)) => {
                let common: Vec<Name> = js.iter().map(|(b, _)| b.clone()).filter(|b| lookup(&is, b).is_some()).collect();
                for k in subsets_desc(&common) {
                    let branches = js
                        .iter()
                        .map(|(b, s)| match k.contains(b) {
                            true => (OrchAction::SyncR(b.clone()), lookup(&is, b).unwrap().clone(), s.clone()),
                            false => (OrchAction::InS(b.clone()), client.clone(), s.clone()),
                        })
                        .collect();
                    plans.push((Rule::SumO, branches));
                }
                for (a, c) in &is {
                    plans.push((Rule::SumL, vec![(OrchAction::OutC(a.clone()), c.clone(), server.clone())]));
                }
            }
            _ => {}
        }
        let plans: Rc<[Plan]> = plans
            .into_iter()
            .map(|(rule, bs)| (rule, bs.into_iter().map(|(a, c, s)| (a, self.intern(&c, &s))).collect()))
            .collect();
        self.plans[pair] = Some(plans.clone());
        plans
    }

    fn run(&mut self, gamma: &[usize], pair: usize) -> FamilyId {
        if gamma.contains(&pair) {
            if let Some(&id) = self.leaves.get(&pair) {
                return id;
            }
            let id = self.push(FamilyNode::Leaf(Orchestrator::var(self.var_names[pair].clone())));
            self.leaves.insert(pair, id);
            return id;
        }
        if self.pair_terms[pair].0.is_success() {
            if let Some(id) = self.stop {
                return id;
            }
            let id = self.push(FamilyNode::Leaf(Orchestrator::Stop));
            self.stop = Some(id);
            return id;
        }
        let key = (gamma.to_vec(), pair);
        if let Some(&id) = self.memo.get(&key) {
            return id;
        }
        let mut inner: Vec<usize> = gamma.to_vec();
        inner.push(pair);
        inner.sort_unstable();

        let mut alternatives = Vec::new();
        'plans: for (rule, plan) in self.plans(pair).iter() {
            let mut branches = Vec::with_capacity(plan.len());
            for (action, p) in plan {
                let child = self.run(&inner, *p);
                if matches!(self.nodes[child], FamilyNode::Empty) {
                    continue 'plans;
                }
                branches.push((action.clone(), child));
            }
            alternatives.push(Alternative { rule: *rule, branches });
        }
        let node = if alternatives.is_empty() {
            FamilyNode::Empty
        } else {
            FamilyNode::Rec { var: pair, alternatives }
        };
        let id = self.push(node);
        self.memo.insert(key, id);
        id
    }
}

/// Assumptions: variables bound to client/server pairs.
pub type Env = BTreeMap<RecVar, (SessionContract, SessionContract)>;

/// The family of orchestrators synthesized for `client` and `server` with
/// no assumptions.
pub fn synth(client: &SessionContract, server: &SessionContract) -> Family {
    synth_in(&Env::new(), client, server).expect("the empty environment is injective")
}

/// Synthesis under assumptions; members may mention the variables of `env`.
pub fn synth_in(env: &Env, client: &SessionContract, server: &SessionContract) -> Result<Family> {
    let mut s = Synth {
        pairs: HashMap::new(),
        pair_terms: Vec::new(),
        plans: Vec::new(),
        var_names: Vec::new(),
        env_vars: HashMap::new(),
        nodes: Vec::new(),
        memo: HashMap::new(),
        stop: None,
        leaves: HashMap::new(),
    };
    let mut gamma = Vec::new();
    for (x, (c, d)) in env {
        let id = s.pair_terms.len();
        s.env_vars.insert(id, x.clone());
        if s.intern(c, d) != id {
            return Err(Error::IllFormedJudgment(format!("two variables are bound to the pair {c} / {d}")));
        }
        gamma.push(id);
    }
    let root_pair = s.intern(client, server);
    let root = s.run(&gamma, root_pair);
    let pair_bound = client.reachable_subterms().len() * server.reachable_subterms().len();
    let stats = SynthStats {
        pairs: s.pair_terms.len() - env.len(),
        pair_bound,
        memo_entries: s.memo.len(),
        family_nodes: s.nodes.len(),
    };
    Ok(Family::new(s.nodes, root, s.var_names, stats))
}

fn convolve(x: &Table, y: &Table, shift: usize) -> Table {
    if x.is_empty() || y.is_empty() {
        return Table::new();
    }
    let mut out = vec![BigUint::default(); x.len() + y.len() - 1 + shift];
    for (i, a) in x.iter().enumerate().filter(|(_, a)| **a != BigUint::default()) {
        for (j, b) in y.iter().enumerate() {
            out[i + j + shift] += a * b;
        }
    }
    out
}

fn add_shifted(acc: &mut Table, x: &Table, shift: usize) {
    if acc.len() < x.len() + shift {
        acc.resize(x.len() + shift, BigUint::default());
    }
    for (i, n) in x.iter().enumerate() {
        acc[i + shift] += n;
    }
}

impl Family {
    fn new(nodes: Vec<FamilyNode>, root: FamilyId, var_names: Vec<RecVar>, stats: SynthStats) -> Self {
        // Children are created before their parents, so one forward pass
        // fills every table.
        let mut tables: Vec<Table> = Vec::with_capacity(nodes.len());
        let mut alt_tables = Vec::with_capacity(nodes.len());
        for node in &nodes {
            let (table, alts) = match node {
                FamilyNode::Empty => (Table::new(), Vec::new()),
                FamilyNode::Leaf(_) => (vec![BigUint::default(), BigUint::from(1u8)], Vec::new()),
                FamilyNode::Rec { alternatives, .. } => {
                    let mut table = Table::new();
                    let mut alts = Vec::new();
                    for alt in alternatives {
                        let suffix = Self::suffix_tables(alt, &tables);
                        add_shifted(&mut table, &suffix[0], usize::from(alt.branches.len() >= 2));
                        alts.push(suffix);
                    }
                    (table, alts)
                }
            };
            tables.push(table);
            alt_tables.push(alts);
        }
        Family {
            nodes,
            root,
            var_names,
            tables,
            alt_tables,
            stats,
        }
    }

    /// `out[i]` counts the ways to fill branches `i..`; each branch weighs
    /// one for its prefix plus its continuation.
    fn suffix_tables(alt: &Alternative, tables: &[Table]) -> Vec<Table> {
        let m = alt.branches.len();
        let mut out = vec![Table::new(); m + 1];
        out[m] = vec![BigUint::from(1u8)];
        for i in (0..m).rev() {
            out[i] = convolve(&tables[alt.branches[i].1], &out[i + 1], 1);
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.tables[self.root].is_empty()
    }

    /// Exact number of members.
    pub fn count(&self) -> BigUint {
        self.tables[self.root].iter().sum()
    }

    pub fn stats(&self) -> &SynthStats {
        &self.stats
    }

    pub fn nodes(&self) -> &[FamilyNode] {
        &self.nodes
    }

    pub fn root(&self) -> FamilyId {
        self.root
    }

    /// Members in order: lighter first, ties in a fixed order.
    pub fn iter(&self) -> impl Iterator<Item = Orchestrator> + '_ {
        self.tables[self.root].iter().enumerate().flat_map(move |(weight, n)| {
            let mut i = BigUint::default();
            let n = n.clone();
            std::iter::from_fn(move || {
                if i >= n {
                    return None;
                }
                let t = self.unrank(self.root, weight, i.clone());
                i += 1u8;
                Some(t)
            })
        })
    }

    /// At most `max` members, lightest first.
    pub fn enumerate(&self, max: usize) -> Vec<Orchestrator> {
        self.iter().take(max).collect()
    }

    fn unrank(&self, id: FamilyId, weight: usize, mut index: BigUint) -> Orchestrator {
        match &self.nodes[id] {
            FamilyNode::Empty => unreachable!("empty nodes have no members"),
            FamilyNode::Leaf(t) => t.clone(),
            FamilyNode::Rec { var, alternatives } => {
                for (alt, suffix) in alternatives.iter().zip(&self.alt_tables[id]) {
                    let Some(w) = weight.checked_sub(usize::from(alt.branches.len() >= 2)) else { continue };
                    let Some(n) = suffix[0].get(w) else { continue };
                    if index >= *n {
                        index -= n;
                        continue;
                    }
                    let branches = self.unrank_branches(alt, suffix, 0, w, index);
                    let body = Orchestrator::choice(branches);
                    let x = &self.var_names[*var];
                    return match body.has_free(x) {
                        true => Orchestrator::rec_with_hint(x, RecVar::new("X"), body),
                        false => body,
                    };
                }
                unreachable!("index within the table count")
            }
        }
    }

    fn unrank_branches(&self, alt: &Alternative, suffix: &[Table], i: usize, weight: usize, mut index: BigUint) -> Vec<Orchestrator> {
        if i == alt.branches.len() {
            return Vec::new();
        }
        let (action, child) = &alt.branches[i];
        let rest = &suffix[i + 1];
        for (cw, cn) in self.tables[*child].iter().enumerate() {
            let Some(rw) = weight.checked_sub(1 + cw) else { break };
            let Some(rn) = rest.get(rw) else { continue };
            let n = cn * rn;
            if index >= n {
                index -= n;
                continue;
            }
            let (q, r) = (&index / rn, &index % rn);
            let head = self.unrank(*child, cw, q);
            let mut out = vec![Orchestrator::prefix(action.clone(), head)];
            out.extend(self.unrank_branches(alt, suffix, i + 1, rw, r));
            return out;
        }
        unreachable!("index within the suffix count")
    }
}

/// A judgment `env |- orch : client -| server`.
#[derive(Clone, Debug)]
pub struct Judgment {
    pub env: Env,
    pub orch: Orchestrator,
    pub client: SessionContract,
    pub server: SessionContract,
}

/// Outcome of [`verify_judgment`]: whether a derivation exists, and the
/// rules it uses in preorder (the attempted prefix if it fails).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Derivation {
    pub derivable: bool,
    pub rules: Vec<Rule>,
}

struct Verifier {
    fresh: usize,
    rules: Vec<Rule>,
}

fn branch_list(body: &Orchestrator) -> Option<Vec<(&OrchAction, &Orchestrator)>> {
    match body {
        Orchestrator::Prefix(a, c) => Some(vec![(a, c.as_ref())]),
        Orchestrator::Choice(bs) => bs
            .iter()
            .map(|b| match b {
                Orchestrator::Prefix(a, c) => Some((a, c.as_ref())),
                _ => None,
            })
            .collect(),
        _ => None,
    }
}

/// The names of `branches` are exactly the names of `expected`, each once.
fn covers(branches: &[(&OrchAction, &Orchestrator)], expected: &[(Name, SessionContract)]) -> bool {
    let names: Vec<&Name> = branches.iter().map(|(a, _)| a.name()).collect();
    let distinct: BTreeSet<&Name> = names.iter().copied().collect();
    distinct.len() == names.len() && names.len() == expected.len() && names.iter().all(|n| lookup(expected, n).is_some())
}

impl Verifier {
    fn derive(&mut self, env: &[(RecVar, (SessionContract, SessionContract))], f: &Orchestrator, client: &SessionContract, server: &SessionContract) -> bool {
        let pair = (client.unfold(), server.unfold());
        match f {
            Orchestrator::Var(Var::Free(x)) => {
                self.rules.push(Rule::Hyp);
                return env.iter().any(|(y, p)| y == x && *p == pair);
            }
            Orchestrator::Var(Var::Bound(_)) => return false,
            Orchestrator::Stop => {
                self.rules.push(Rule::Ax);
                return pair.0.is_success();
            }
            _ => {}
        }
        // Every other rule concludes with `rec x . body`; a term without a
        // binder is read as one whose variable does not occur.
        if env.iter().any(|(_, p)| *p == pair) {
            return false;
        }
        let x = RecVar::new(format!("%v{}", self.fresh));
        self.fresh += 1;
        let body = match f {
            Orchestrator::Rec(_, body) => body.substitute(0, &Orchestrator::var(x.clone())),
            other => other.clone(),
        };
        let mut inner = env.to_vec();
        inner.push((x, pair.clone()));
        let Some(branches) = branch_list(&body) else { return false };
        let (client, server) = pair;
        let (cs, ss) = (shape(&client), shape(&server));
        let all = |p: fn(&OrchAction) -> bool| branches.iter().all(|(a, _)| p(a));
        match branches[0].0 {
            OrchAction::OutC(a) if branches.len() == 1 => {
                self.rules.push(Rule::SumL);
                let Shape::External(is) = cs else { return false };
                let Some(c) = lookup(&is, a) else { return false };
                self.derive(&inner, branches[0].1, c, &server)
            }
            OrchAction::OutS(b) if branches.len() == 1 => {
                self.rules.push(Rule::SumR);
                let Shape::External(js) = ss else { return false };
                let Some(s) = lookup(&js, b) else { return false };
                self.derive(&inner, branches[0].1, &client, s)
            }
            OrchAction::InS(_) if all(|a| matches!(a, OrchAction::InS(_))) && matches!((&cs, &ss), (Shape::Internal(_), Shape::Internal(_))) => {
                self.rules.push(Rule::OOA);
                let Shape::Internal(js) = ss else { unreachable!() };
                covers(&branches, &js)
                    && branches.iter().all(|(a, g)| self.derive(&inner, g, &client, lookup(&js, a.name()).unwrap()))
            }
            OrchAction::InC(_) if all(|a| matches!(a, OrchAction::InC(_))) && matches!((&cs, &ss), (Shape::Internal(_), Shape::Internal(_))) => {
                self.rules.push(Rule::OOB);
                let Shape::Internal(is) = cs else { unreachable!() };
                covers(&branches, &is)
                    && branches.iter().all(|(a, g)| self.derive(&inner, g, lookup(&is, a.name()).unwrap(), &server))
            }
            OrchAction::InC(_) | OrchAction::SyncL(_) if all(|a| matches!(a, OrchAction::InC(_) | OrchAction::SyncL(_))) => {
                self.rules.push(Rule::OSum);
                let (Shape::Internal(is), Shape::External(js)) = (cs, ss) else { return false };
                covers(&branches, &is)
                    && branches.iter().all(|(a, g)| {
                        let c = lookup(&is, a.name()).unwrap();
                        match a {
                            OrchAction::SyncL(k) => match lookup(&js, k) {
                                Some(s) => self.derive(&inner, g, c, s),
                                None => false,
                            },
                            _ => self.derive(&inner, g, c, &server),
                        }
                    })
            }
            OrchAction::InS(_) | OrchAction::SyncR(_) if all(|a| matches!(a, OrchAction::InS(_) | OrchAction::SyncR(_))) => {
                self.rules.push(Rule::SumO);
                let (Shape::External(is), Shape::Internal(js)) = (cs, ss) else { return false };
                covers(&branches, &js)
                    && branches.iter().all(|(a, g)| {
                        let s = lookup(&js, a.name()).unwrap();
                        match a {
                            OrchAction::SyncR(k) => match lookup(&is, k) {
                                Some(c) => self.derive(&inner, g, c, s),
                                None => false,
                            },
                            _ => self.derive(&inner, g, &client, s),
                        }
                    })
            }
            _ => false,
        }
    }
}

/// Decides derivability in the inference system. The rule is determined by
/// the shape of the orchestrator and of the pair, so the search is
/// syntax-directed.
pub fn verify_judgment(j: &Judgment) -> Result<Derivation> {
    let mut seen = HashMap::new();
    for (x, (c, s)) in &j.env {
        if let Some(y) = seen.insert((c.unfold(), s.unfold()), x) {
            return Err(Error::IllFormedJudgment(format!("{x} and {y} are bound to the same pair")));
        }
    }
    if let Some(x) = j.orch.free_vars().into_iter().find(|x| !j.env.contains_key(x)) {
        return Err(Error::IllFormedJudgment(format!("variable {x} is not bound by the assumptions")));
    }
    let env: Vec<_> = j.env.iter().map(|(x, (c, s))| (x.clone(), (c.unfold(), s.unfold()))).collect();
    let mut v = Verifier { fresh: 0, rules: Vec::new() };
    let derivable = v.derive(&env, &j.orch, &j.client, &j.server);
    Ok(Derivation { derivable, rules: v.rules })
}

/// Result of searching a family for a strict and respectful member.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WitnessSearch {
    Found { witness: Orchestrator, examined: usize },
    /// Every member was examined and none qualifies.
    Exhausted { examined: usize },
    /// The cap was reached before the family was exhausted.
    InconclusiveByCap { examined: usize },
}

/// The first member of the synthesized family, in enumeration order, that
/// is respectful and strict for the pair.
pub fn find_witness(client: &SessionContract, server: &SessionContract, limits: &Limits) -> Result<WitnessSearch> {
    find_witness_in(&synth(client, server), client, server, limits)
}

pub fn find_witness_in(family: &Family, client: &SessionContract, server: &SessionContract, limits: &Limits) -> Result<WitnessSearch> {
    let mut examined = 0;
    for f in family.iter() {
        if examined == limits.enum_cap {
            return Ok(WitnessSearch::InconclusiveByCap { examined });
        }
        examined += 1;
        if is_respectful(&f).respectful && is_strict(client, &f, server, limits)?.is_none() {
            return Ok(WitnessSearch::Found { witness: f, examined });
        }
    }
    Ok(WitnessSearch::Exhausted { examined })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_contract, parse_orchestrator, parse_orchestrator_raw};

    fn c(s: &str) -> SessionContract {
        parse_contract(s).unwrap()
    }

    fn o(s: &str) -> Orchestrator {
        parse_orchestrator(s).unwrap()
    }

    fn weight(f: &Orchestrator) -> usize {
        match f {
            Orchestrator::Prefix(_, g) => 1 + weight(g),
            Orchestrator::Choice(bs) => 1 + bs.iter().map(weight).sum::<usize>(),
            Orchestrator::Rec(_, g) => weight(g),
            _ => 1,
        }
    }

    fn members(client: &str, server: &str) -> Vec<Orchestrator> {
        synth(&c(client), &c(server)).enumerate(usize::MAX)
    }

    #[test]
    fn success_client() {
        assert_eq!(members("1", "a.!b"), vec![Orchestrator::Stop]);
        assert_eq!(synth(&c("1"), &c("a")).count(), BigUint::from(1u8));
    }

    #[test]
    fn single_buffering_candidate() {
        assert_eq!(members("!a", "b"), vec![o("<a,_>")]);
    }

    #[test]
    fn loop_pair_family() {
        let got: BTreeSet<_> = members("rec X.!a.X", "rec X.a.X").into_iter().collect();
        let want: BTreeSet<_> = ["rec X.<a,!a>.X", "rec X.<a,_>.X", "rec X.<_,!a>.X"].map(o).into();
        assert_eq!(got, want);
    }

    #[test]
    fn count_matches_enumeration_and_members_are_distinct() {
        for (client, server) in [
            ("rec X.!a.!c.X", "rec X.c.X"),
            ("!a.!b", "a.c.d"),
            ("rec X.!a.X (+) !b", "rec X.a.X + b"),
            ("rec X.!tempReq.!humReq.temperature.humidity.X", "rec X.tempReq.humReq.(!temperature.!humidity.!wind.X (+) !humidity.!temperature.!wind.X)"),
        ] {
            let fam = synth(&c(client), &c(server));
            let all = fam.enumerate(5000);
            if all.len() < 5000 {
                assert_eq!(BigUint::from(all.len()), fam.count(), "{client} / {server}");
            }
            let distinct: BTreeSet<_> = all.iter().collect();
            assert_eq!(distinct.len(), all.len());
            assert!(all.windows(2).all(|w| weight(&w[0]) <= weight(&w[1])));
            assert!(all.iter().all(Orchestrator::is_closed));
            assert!(fam.stats().pairs <= fam.stats().pair_bound);
        }
    }

    #[test]
    fn derivations() {
        let judge = |f: &str, client: &str, server: &str| {
            verify_judgment(&Judgment {
                env: Env::new(),
                orch: o(f),
                client: c(client),
                server: c(server),
            })
            .unwrap()
        };
        assert_eq!(judge("1", "1", "a"), Derivation { derivable: true, rules: vec![Rule::Ax] });
        let d = judge("rec X.<a,!a>.X", "rec X.!a.X", "rec X.a.X");
        assert_eq!(d, Derivation { derivable: true, rules: vec![Rule::OSum, Rule::Hyp] });
        let d = judge("<a,!a>.<b,_>", "!a.!b", "a.c.d");
        assert_eq!(d, Derivation { derivable: true, rules: vec![Rule::OSum, Rule::OSum, Rule::Ax] });
        assert!(!judge("<a,_>.<_,!a>.rec X.<a,!a>.X", "rec X.!a.X", "rec X.a.X").derivable);
        assert!(!judge("<b,_>", "!a", "b").derivable);
    }

    #[test]
    fn ill_formed_judgments() {
        let j = Judgment {
            env: Env::new(),
            orch: Orchestrator::var("X"),
            client: c("1"),
            server: c("1"),
        };
        assert!(matches!(verify_judgment(&j), Err(Error::IllFormedJudgment(_))));
        let env = Env::from([("X".into(), (c("a"), c("1"))), ("Y".into(), (c("a"), c("1")))]);
        let j = Judgment { env, orch: o("1"), client: c("1"), server: c("1") };
        assert!(matches!(verify_judgment(&j), Err(Error::IllFormedJudgment(_))));
    }

    #[test]
    fn assumptions_reach_members() {
        let env = Env::from([("Z".into(), (c("rec X.!a.X"), c("rec X.a.X")))]);
        let fam = synth_in(&env, &c("!b.rec X.!a.X"), &c("b.rec X.a.X")).unwrap();
        let open = parse_orchestrator_raw("<b,!b>.Z").unwrap();
        assert!(fam.enumerate(100).contains(&open));
        let d = verify_judgment(&Judgment { env, orch: open, client: c("!b.rec X.!a.X"), server: c("b.rec X.a.X") }).unwrap();
        assert_eq!(d.rules, vec![Rule::OSum, Rule::Hyp]);
        assert!(d.derivable);
    }

    #[test]
    fn witnesses() {
        let lim = Limits::default();
        let r = find_witness(&c("!a"), &c("b"), &lim).unwrap();
        assert_eq!(r, WitnessSearch::Exhausted { examined: 1 });
        let r = find_witness(&c("rec X.!a.!c.X"), &c("rec X.c.X"), &lim).unwrap();
        assert!(matches!(r, WitnessSearch::Exhausted { .. }));
        let r = find_witness(&c("rec X.a.X"), &c("rec X.!b.!a.X"), &lim).unwrap();
        assert!(matches!(r, WitnessSearch::Found { .. }));
    }
}
