//! Per-name message counters kept by an orchestrator, and the classification
//! of action sequences as sound, client-respectful and server-input free.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::names::Name;
use crate::orchestrators::{ActionSequence, OrchAction};

/// Which of the two counters of a name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// Messages received from the client, awaiting the server.
    Cs,
    /// Messages received from the server, awaiting the client.
    Sc,
}

impl Side {
    pub fn pick(self, (cs, sc): (i64, i64)) -> i64 {
        match self {
            Side::Cs => cs,
            Side::Sc => sc,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Cs => "cs",
            Side::Sc => "sc",
        })
    }
}

/// Unbounded signed counters per name. Only nonzero entries are stored, so
/// structural equality is buffer equality.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Buffer {
    counts: BTreeMap<Name, (i64, i64)>,
}

fn add(x: i64, d: i64) -> i64 {
    x.checked_add(d).expect("buffer counter overflow")
}

impl Buffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, name: &Name) -> (i64, i64) {
        self.counts.get(name).copied().unwrap_or((0, 0))
    }

    pub fn cs(&self, name: &Name) -> i64 {
        self.get(name).0
    }

    pub fn sc(&self, name: &Name) -> i64 {
        self.get(name).1
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn nonzero(&self) -> impl Iterator<Item = (&Name, (i64, i64))> {
        self.counts.iter().map(|(n, v)| (n, *v))
    }

    pub fn set(&mut self, name: Name, value: (i64, i64)) {
        if value == (0, 0) {
            self.counts.remove(&name);
        } else {
            self.counts.insert(name, value);
        }
    }

    /// The buffer after one action. Synchronous actions leave it unchanged.
    pub fn apply(&self, action: &OrchAction) -> Buffer {
        let mut next = self.clone();
        let (dl, dr) = action.own_weight();
        if (dl, dr) != (0, 0) {
            let (cs, sc) = next.get(action.name());
            next.set(action.name().clone(), (add(cs, dl), add(sc, dr)));
        }
        next
    }
}

impl fmt::Display for Buffer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.counts.is_empty() {
            return f.write_str("{}");
        }
        let parts: Vec<String> = self
            .counts
            .iter()
            .map(|(n, (cs, sc))| format!("{n}: cs={cs} sc={sc}"))
            .collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

impl Serialize for Buffer {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Entry {
            cs: i64,
            sc: i64,
        }
        let mut map = s.serialize_map(Some(self.counts.len()))?;
        for (n, (cs, sc)) in &self.counts {
            map.serialize_entry(n, &Entry { cs: *cs, sc: *sc })?;
        }
        map.end()
    }
}

pub fn apply_action(b: &Buffer, m: &OrchAction) -> Buffer {
    b.apply(m)
}

/// Folds [`apply_action`] over `seq`, also returning the least value each
/// counter takes over all prefixes (the start included). Names that never
/// occur have minima `(0, 0)` and are omitted.
pub fn run_sequence(b: &Buffer, seq: &[OrchAction]) -> (Buffer, BTreeMap<Name, (i64, i64)>) {
    let mut minima: BTreeMap<Name, (i64, i64)> = BTreeMap::new();
    let mut cur = b.clone();
    for (n, v) in b.nonzero() {
        minima.insert(n.clone(), (v.0.min(0), v.1.min(0)));
    }
    for m in seq {
        cur = cur.apply(m);
        let (cs, sc) = cur.get(m.name());
        let entry = minima.entry(m.name().clone()).or_insert((0, 0));
        entry.0 = entry.0.min(cs);
        entry.1 = entry.1.min(sc);
    }
    minima.retain(|_, v| *v != (0, 0));
    (cur, minima)
}

fn in_left_flow(m: &OrchAction, a: &Name) -> bool {
    matches!(m, OrchAction::InC(n) | OrchAction::OutS(n) if n == a)
}

/// Keeps only the client-to-server flow `<a,_>`, `<_,!a>` of name `a`. A
/// lasso whose cycle loses every action becomes finite.
pub fn left_restrict(seq: &ActionSequence, a: &Name) -> ActionSequence {
    let keep = |xs: &[OrchAction]| -> Vec<OrchAction> {
        xs.iter().filter(|m| in_left_flow(m, a)).cloned().collect()
    };
    match seq {
        ActionSequence::Finite { actions } => ActionSequence::finite(keep(actions)),
        ActionSequence::Lasso { prefix, cycle } => {
            let cycle = keep(cycle);
            if cycle.is_empty() {
                ActionSequence::finite(keep(prefix))
            } else {
                ActionSequence::lasso(keep(prefix), cycle)
            }
        }
    }
}

/// Why a sequence fails one of the respectfulness clauses.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SequenceWitness {
    /// The counter goes negative after `position` actions.
    Negative { name: Name, side: Side, position: usize, value: i64 },
    /// Each turn of the cycle lowers the counter.
    DrainingCycle { name: Name, side: Side, net: i64 },
    /// Client messages left undelivered for good.
    Stranded { name: Name, pending: i64 },
    /// Eventually the client-to-server flow of `name` is inputs only.
    DefinitelyClientInput { name: Name },
    /// Eventually every action is a server input.
    ServerInputted,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SequenceVerdict {
    pub sound: bool,
    pub client_respectful: bool,
    pub non_def_server_inputted: bool,
    pub respectful: bool,
    pub witnesses: Vec<SequenceWitness>,
}

fn first_negative(seq: &[OrchAction], witnesses: &mut Vec<SequenceWitness>) {
    let mut reported = BTreeSet::new();
    let mut cur = Buffer::new();
    for (i, m) in seq.iter().enumerate() {
        cur = cur.apply(m);
        let v = cur.get(m.name());
        for side in [Side::Cs, Side::Sc] {
            let value = side.pick(v);
            if value < 0 && reported.insert((m.name().clone(), side)) {
                witnesses.push(SequenceWitness::Negative {
                    name: m.name().clone(),
                    side,
                    position: i + 1,
                    value,
                });
            }
        }
    }
}

fn nets(seq: &[OrchAction]) -> BTreeMap<Name, (i64, i64)> {
    let mut out: BTreeMap<Name, (i64, i64)> = BTreeMap::new();
    for m in seq {
        let (l, r) = m.own_weight();
        let e = out.entry(m.name().clone()).or_insert((0, 0));
        e.0 += l;
        e.1 += r;
    }
    out
}

/// Classifies a finite or eventually periodic sequence.
pub fn classify(seq: &ActionSequence) -> SequenceVerdict {
    let mut witnesses = Vec::new();
    let (sound, client_respectful, non_def_server_inputted);
    match seq {
        ActionSequence::Finite { actions } => {
            first_negative(actions, &mut witnesses);
            sound = witnesses.is_empty();
            let (end, _) = run_sequence(&Buffer::new(), actions);
            let mut ok = true;
            for (n, (cs, _)) in end.nonzero() {
                if cs != 0 {
                    ok = false;
                    witnesses.push(SequenceWitness::Stranded {
                        name: n.clone(),
                        pending: cs,
                    });
                }
            }
            client_respectful = ok;
            non_def_server_inputted = true;
        }
        ActionSequence::Lasso { prefix, cycle } => {
            let once: Vec<OrchAction> = prefix.iter().chain(cycle).cloned().collect();
            first_negative(&once, &mut witnesses);
            let cycle_nets = nets(cycle);
            for (n, (l, r)) in &cycle_nets {
                for (side, net) in [(Side::Cs, *l), (Side::Sc, *r)] {
                    if net < 0 {
                        witnesses.push(SequenceWitness::DrainingCycle {
                            name: n.clone(),
                            side,
                            net,
                        });
                    }
                }
            }
            sound = witnesses.is_empty();

            let (end, _) = run_sequence(&Buffer::new(), &once);
            let names: BTreeSet<&Name> = once.iter().map(OrchAction::name).collect();
            let mut ok = true;
            for n in names {
                let has_in = cycle.iter().any(|m| matches!(m, OrchAction::InC(x) if x == n));
                let has_out = cycle.iter().any(|m| matches!(m, OrchAction::OutS(x) if x == n));
                if !has_in && !has_out {
                    if end.cs(n) != 0 {
                        ok = false;
                        witnesses.push(SequenceWitness::Stranded {
                            name: n.clone(),
                            pending: end.cs(n),
                        });
                    }
                } else if !has_out {
                    ok = false;
                    witnesses.push(SequenceWitness::DefinitelyClientInput { name: n.clone() });
                }
            }
            client_respectful = ok;

            non_def_server_inputted = !cycle.iter().all(|m| matches!(m, OrchAction::InS(_)));
            if !non_def_server_inputted {
                witnesses.push(SequenceWitness::ServerInputted);
            }
        }
    }
    SequenceVerdict {
        sound,
        client_respectful,
        non_def_server_inputted,
        respectful: sound && client_respectful && non_def_server_inputted,
        witnesses,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(s: &str) -> Name {
        Name::from(s)
    }

    #[test]
    fn apply_follows_the_flow_direction() {
        let e = Buffer::new();
        assert_eq!(e.apply(&OrchAction::SyncL(a("a"))), e);
        let one = e.apply(&OrchAction::InC(a("a")));
        assert_eq!(one.get(&a("a")), (1, 0));
        assert_eq!(one.apply(&OrchAction::OutS(a("a"))), e);
        let s = e.apply(&OrchAction::InS(a("w")));
        assert_eq!(s.get(&a("w")), (0, 1));
        assert_eq!(s.apply(&OrchAction::OutC(a("w"))), e);
    }

    #[test]
    fn run_records_minima() {
        let (end, min) = run_sequence(
            &Buffer::new(),
            &[OrchAction::InC(a("a")), OrchAction::OutS(a("b")), OrchAction::OutS(a("a"))],
        );
        assert_eq!(end.get(&a("a")), (0, 0));
        assert_eq!(end.get(&a("b")), (-1, 0));
        assert_eq!(min.get(&a("b")), Some(&(-1, 0)));
        assert_eq!(min.get(&a("a")), None);

        let (end, min) = run_sequence(
            &Buffer::new(),
            &[OrchAction::InC(a("a")), OrchAction::InC(a("b")), OrchAction::OutS(a("a"))],
        );
        assert_eq!(end.get(&a("b")), (1, 0));
        assert!(end.nonzero().count() == 1 && min.is_empty());

        let (end, min) = run_sequence(&Buffer::new(), &[]);
        assert!(end.is_empty() && min.is_empty());
    }

    #[test]
    fn restriction() {
        let s = ActionSequence::finite(vec![OrchAction::SyncL(a("a")), OrchAction::InC(a("b"))]);
        assert_eq!(left_restrict(&s, &a("a")), ActionSequence::finite(vec![]));
        assert_eq!(left_restrict(&s, &a("b")), ActionSequence::finite(vec![OrchAction::InC(a("b"))]));
        let l = ActionSequence::lasso(vec![OrchAction::InC(a("a"))], vec![OrchAction::SyncL(a("a"))]);
        assert_eq!(left_restrict(&l, &a("a")), ActionSequence::finite(vec![OrchAction::InC(a("a"))]));
    }

    #[test]
    fn classification_examples() {
        let v = classify(&ActionSequence::finite(vec![
            OrchAction::InC(a("a")),
            OrchAction::OutS(a("b")),
            OrchAction::OutS(a("a")),
        ]));
        assert!(!v.sound && !v.respectful);

        let v = classify(&ActionSequence::lasso(
            vec![OrchAction::SyncL(a("c"))],
            vec![OrchAction::InS(a("b")), OrchAction::InS(a("c"))],
        ));
        assert!(v.sound && v.client_respectful && !v.non_def_server_inputted);

        let v = classify(&ActionSequence::lasso(
            vec![OrchAction::SyncL(a("c"))],
            vec![OrchAction::InC(a("c")), OrchAction::SyncL(a("b"))],
        ));
        assert!(v.sound && !v.client_respectful);
        assert!(v.witnesses.contains(&SequenceWitness::DefinitelyClientInput { name: a("c") }));
    }

    #[test]
    fn frozen_counter_must_be_empty() {
        let v = classify(&ActionSequence::lasso(
            vec![OrchAction::InC(a("a"))],
            vec![OrchAction::SyncL(a("a"))],
        ));
        assert!(!v.client_respectful);
        assert_eq!(v.witnesses, vec![SequenceWitness::Stranded { name: a("a"), pending: 1 }]);
    }

    #[test]
    fn buffer_json_lists_nonzero_entries() {
        let b = Buffer::new().apply(&OrchAction::InC(a("a")));
        assert_eq!(serde_json::to_string(&b).unwrap(), r#"{"a":{"cs":1,"sc":0}}"#);
    }
}
