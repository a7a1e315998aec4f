//! Generators and oracles shared by the integration suites.
#![allow(dead_code)]

use orchestral::names::{Binder, Var};
use orchestral::{classify, Name, OrchAction, Orchestrator, RecVar, SessionContract};
use rand::seq::SliceRandom;
use rand::Rng;

pub const NAMES: [&str; 3] = ["a", "b", "c"];

fn binder(depth: usize) -> Binder {
    Binder(RecVar::new(["X", "Y", "Z", "W", "V", "U"][depth % 6]))
}

/// Splits `total` into `parts` positive amounts at random.
fn split<R: Rng>(rng: &mut R, total: usize, parts: usize) -> Vec<usize> {
    let mut out = vec![1; parts];
    for _ in parts..total {
        let i = rng.random_range(0..parts);
        out[i] += 1;
    }
    out
}

/// A closed, well-formed contract with at most `budget` syntax nodes.
pub fn contract<R: Rng>(rng: &mut R, budget: usize) -> SessionContract {
    contract_in(rng, budget, 0, false)
}

fn contract_in<R: Rng>(rng: &mut R, budget: usize, depth: usize, under_rec: bool) -> SessionContract {
    let leaf = |rng: &mut R| {
        if depth > 0 && !under_rec && rng.random_bool(0.5) {
            SessionContract::Var(Var::Bound(rng.random_range(0..depth)))
        } else {
            SessionContract::Success
        }
    };
    if !under_rec && (budget < 2 || rng.random_bool(0.15)) {
        return leaf(rng);
    }
    if budget >= 3 && !under_rec && rng.random_bool(0.3) {
        let body = contract_in(rng, budget - 1, depth + 1, true);
        return SessionContract::Rec(binder(depth), Box::new(body));
    }
    // k branches need 2k nodes, plus one for the choice when k > 1.
    let max_k = (1..=3).filter(|&k| 2 * k + usize::from(k > 1) <= budget).max().unwrap_or(1);
    let k = rng.random_range(1..=max_k);
    let inner = budget - usize::from(k > 1);
    let total = rng.random_range(2 * k..=inner);
    let sizes = split(rng, total - k, k);
    let mut names = NAMES.to_vec();
    names.shuffle(rng);
    let branches: Vec<(Name, SessionContract)> = names
        .iter()
        .zip(sizes)
        .map(|(n, s)| (Name::new(*n), contract_in(rng, s, depth, false)))
        .collect();
    match rng.random_bool(0.5) {
        true => SessionContract::external(branches),
        false => SessionContract::internal(branches),
    }
}

const KINDS: [fn(Name) -> OrchAction; 6] = [
    OrchAction::SyncL,
    OrchAction::SyncR,
    OrchAction::InC,
    OrchAction::InS,
    OrchAction::OutC,
    OrchAction::OutS,
];
const LEFT: [fn(Name) -> OrchAction; 2] = [OrchAction::SyncL, OrchAction::InC];
const RIGHT: [fn(Name) -> OrchAction; 2] = [OrchAction::SyncR, OrchAction::InS];

/// A closed, well-formed orchestrator with at most `budget` syntax nodes,
/// over the first `names` message names.
pub fn orchestrator<R: Rng>(rng: &mut R, budget: usize, names: usize) -> Orchestrator {
    orch_in(rng, budget.max(1), names, 0, false)
}

fn orch_in<R: Rng>(rng: &mut R, budget: usize, names: usize, depth: usize, under_rec: bool) -> Orchestrator {
    let name = |rng: &mut R| Name::new(NAMES[rng.random_range(0..names)]);
    if budget == 1 || rng.random_bool(0.1) {
        if depth > 0 && !under_rec && rng.random_bool(0.6) {
            return Orchestrator::Var(Var::Bound(rng.random_range(0..depth)));
        }
        if !under_rec || budget == 1 {
            return Orchestrator::Stop;
        }
    }
    if budget >= 3 && rng.random_bool(0.25) {
        let body = orch_in(rng, budget - 1, names, depth + 1, true);
        if !matches!(body, Orchestrator::Var(_)) {
            return Orchestrator::Rec(binder(depth), Box::new(body));
        }
    }
    if budget >= 5 && rng.random_bool(0.35) {
        let k = rng.random_range(2..=((budget - 1) / 2).min(3));
        let class = if rng.random_bool(0.5) { LEFT } else { RIGHT };
        // each branch is a prefix plus a continuation of at least one node
        let sizes = split(rng, budget - 1 - k, k);
        let branches = sizes.into_iter().map(|s| {
            let a = class[rng.random_range(0..2)](name(rng));
            Orchestrator::prefix(a, orch_in(rng, s, names, depth, false))
        });
        return Orchestrator::choice(branches.collect::<Vec<_>>());
    }
    let a = KINDS[rng.random_range(0..6)](name(rng));
    Orchestrator::prefix(a, orch_in(rng, budget - 1, names, depth, false))
}

/// Number of orchestrators of exactly `n` syntax nodes over `names` names,
/// computed by a counting recurrence independent of [`each_orchestrator`].
pub fn count_orchestrators(n: usize, names: u128) -> u128 {
    Counter { names, memo: Default::default() }.terms(n, 0, 0)
}

struct Counter {
    names: u128,
    memo: std::collections::HashMap<(usize, usize, usize), u128>,
}

fn multichoose(kinds: u128, t: usize) -> u128 {
    // C(kinds + t - 1, t)
    let mut r: u128 = 1;
    for i in 0..t as u128 {
        r = r * (kinds + i) / (i + 1);
    }
    r
}

impl Counter {
    /// Terms of size `n` with `v` binders in scope, the innermost `u` of
    /// which may not occur yet (no guard since their `rec`).
    fn terms(&mut self, n: usize, v: usize, u: usize) -> u128 {
        if n == 0 {
            return 0;
        }
        if let Some(&c) = self.memo.get(&(n, v, u)) {
            return c;
        }
        let mut c = 0;
        if n == 1 {
            c += 1 + (v - u) as u128;
        }
        c += 6 * self.names * self.terms(n - 1, v, 0);
        c += 2 * self.choices(n - 1, v);
        if n >= 2 {
            let bodies = self.terms(n - 1, v + 1, u + 1);
            // a body that is just a variable is unguarded
            c += bodies - if n == 2 { (v - u) as u128 } else { 0 };
        }
        self.memo.insert((n, v, u), c);
        c
    }

    /// Multisets of at least two branches from one direction class, with
    /// sizes summing to `n`.
    fn choices(&mut self, n: usize, v: usize) -> u128 {
        // f[k][s]: multisets of k branches with total size s
        let mut f = vec![vec![0u128; n + 1]; n + 1];
        f[0][0] = 1;
        for m in 2..=n {
            let kinds = 2 * self.names * self.terms(m - 1, v, 0);
            if kinds == 0 {
                continue;
            }
            let mut g = vec![vec![0u128; n + 1]; n + 1];
            for k in 0..=n {
                for s in 0..=n {
                    if f[k][s] == 0 {
                        continue;
                    }
                    let mut t = 0;
                    while k + t <= n && s + t * m <= n {
                        g[k + t][s + t * m] += f[k][s] * multichoose(kinds, t);
                        t += 1;
                    }
                }
            }
            f = g;
        }
        (2..=n).map(|k| f[k][n]).sum()
    }
}

/// Calls `out` on every closed, well-formed orchestrator of exactly `n`
/// syntax nodes over the first `names` names. Choices are multisets: each
/// is produced once, with its branches in sorted order.
pub fn each_orchestrator(n: usize, names: usize, out: &mut dyn FnMut(Orchestrator)) {
    each(n, names, 0, 0, out)
}

fn each(n: usize, names: usize, v: usize, u: usize, out: &mut dyn FnMut(Orchestrator)) {
    if n == 0 {
        return;
    }
    if n == 1 {
        out(Orchestrator::Stop);
        for i in u..v {
            out(Orchestrator::Var(Var::Bound(i)));
        }
    }
    for kind in KINDS {
        for name in &NAMES[..names] {
            each(n - 1, names, v, 0, &mut |c| out(Orchestrator::prefix(kind(Name::new(*name)), c)));
        }
    }
    for class in [LEFT, RIGHT] {
        let mut acc = Vec::new();
        branches(n - 1, names, v, &class, &mut acc, out);
    }
    if n >= 2 {
        each(n - 1, names, v + 1, u + 1, &mut |body| {
            if !matches!(body, Orchestrator::Var(_)) {
                out(Orchestrator::Rec(binder(v), Box::new(body)))
            }
        });
    }
}

fn branches(
    rest: usize,
    names: usize,
    v: usize,
    class: &[fn(Name) -> OrchAction; 2],
    acc: &mut Vec<Orchestrator>,
    out: &mut dyn FnMut(Orchestrator),
) {
    if rest == 0 {
        if acc.len() >= 2 {
            out(Orchestrator::Choice(acc.clone()));
        }
        return;
    }
    for m in 2..=rest {
        for kind in class {
            for name in &NAMES[..names] {
                each(m - 1, names, v, 0, &mut |c| {
                    acc.push(Orchestrator::prefix(kind(Name::new(*name)), c));
                    if acc.len() < 2 || acc[acc.len() - 2] <= acc[acc.len() - 1] {
                        branches(rest - m, names, v, class, acc, out);
                    }
                    acc.pop();
                });
            }
        }
    }
}

/// Respectfulness read off a finite family of maximal runs, one sequence
/// at a time.
pub fn oracle_respectful(f: &Orchestrator) -> bool {
    f.maximal_lassos(1_000_000)
        .expect("small term graph")
        .iter()
        .all(|s| classify(s).respectful)
}
