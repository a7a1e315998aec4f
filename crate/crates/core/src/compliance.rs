//! Top-level compliance decisions for triples and for pairs.

use std::fmt;
use std::time::Instant;

use serde::{Serialize, Serializer};

use crate::contracts::SessionContract;
use crate::error::Result;
use crate::flow::FlowViolation;
use crate::orchestrators::{OrchAction, Orchestrator};
use crate::respectfulness::is_respectful;
use crate::synthesis::{find_witness_in, synth, WitnessSearch};
use crate::system::{label_text, stuck_client, strict_on, DsOutcome, ProductGraph};
use crate::Limits;

/// Disrespectful (`ds`) or full compliance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Ds,
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    InconclusiveByCap,
}

impl Verdict {
    /// 0 holds, 1 fails, 2 inconclusive.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Holds => 0,
            Verdict::Fails => 1,
            Verdict::InconclusiveByCap => 2,
        }
    }
}

/// Why a query fails.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Evidence {
    /// The system stops with the client unsatisfied.
    StuckClient { path: Vec<String>, config: String },
    /// The orchestrator can take these steps but the system cannot.
    NotStrict { trace: Vec<OrchAction> },
    /// A run of the system is not respectful.
    Disrespectful { violation: FlowViolation },
    /// Synthesis found no candidate at all.
    EmptyFamily,
    /// Every candidate was examined and none is strict and respectful.
    NoRespectfulCandidate { examined: usize },
}

impl fmt::Display for Evidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Evidence::StuckClient { path, config } => {
                let p = if path.is_empty() { "λ".to_string() } else { path.join(" ") };
                write!(f, "stuck at {config} after {p}")
            }
            Evidence::NotStrict { trace } => {
                let t: Vec<String> = trace.iter().map(|a| a.to_string()).collect();
                write!(f, "not strict: the system cannot perform {}", t.join(" "))
            }
            Evidence::Disrespectful { violation } => write!(f, "{violation}"),
            Evidence::EmptyFamily => f.write_str("no orchestrator can be synthesized"),
            Evidence::NoRespectfulCandidate { examined } => {
                write!(f, "none of the {examined} synthesized orchestrators is strict and respectful")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Stats {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub product_nodes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub product_edges: Option<usize>,
    /// Exact family size, as a decimal string since it can be huge.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family_size: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub examined: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synth_pairs: Option<usize>,
    pub elapsed_ms: f64,
}

fn display<S: Serializer>(o: &Option<Orchestrator>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match o {
        Some(t) => s.collect_str(t),
        None => s.serialize_none(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComplianceReport {
    pub mode: Mode,
    pub verdict: Verdict,
    #[serde(serialize_with = "display", skip_serializing_if = "Option::is_none")]
    pub witness: Option<Orchestrator>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evidence: Option<Evidence>,
    pub stats: Stats,
}

impl ComplianceReport {
    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }
}

impl fmt::Display for ComplianceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mode = match self.mode {
            Mode::Ds => "ds",
            Mode::Full => "full",
        };
        let verdict = match self.verdict {
            Verdict::Holds => "holds",
            Verdict::Fails => "fails",
            Verdict::InconclusiveByCap => "inconclusive (cap reached)",
        };
        writeln!(f, "mode: {mode}")?;
        writeln!(f, "verdict: {verdict}")?;
        if let Some(w) = &self.witness {
            writeln!(f, "witness: {w}")?;
        }
        if let Some(e) = &self.evidence {
            writeln!(f, "evidence: {e}")?;
        }
        let s = &self.stats;
        if let (Some(n), Some(e)) = (s.product_nodes, s.product_edges) {
            writeln!(f, "product graph: {n} nodes, {e} edges")?;
        }
        if let Some(n) = &s.family_size {
            writeln!(f, "family size: {n}")?;
        }
        if let Some(n) = s.examined {
            writeln!(f, "candidates examined: {n}")?;
        }
        Ok(())
    }
}

fn elapsed(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn ds_evidence(outcome: DsOutcome) -> Option<Evidence> {
    match outcome {
        DsOutcome::Holds => None,
        DsOutcome::NotStrict { trace } => Some(Evidence::NotStrict { trace }),
        DsOutcome::StuckClient { path, config } => Some(Evidence::StuckClient {
            path: path.iter().map(label_text).collect(),
            config: config.to_string(),
        }),
    }
}

fn triple_report(mode: Mode, evidence: Option<Evidence>, pg: &ProductGraph, start: Instant) -> ComplianceReport {
    ComplianceReport {
        mode,
        verdict: if evidence.is_none() { Verdict::Holds } else { Verdict::Fails },
        witness: None,
        evidence,
        stats: Stats {
            product_nodes: Some(pg.len()),
            product_edges: Some(pg.edge_count()),
            elapsed_ms: elapsed(start),
            ..Stats::default()
        },
    }
}

fn full_on(pg: &ProductGraph) -> Option<Evidence> {
    if let Some(outcome) = stuck_client(pg) {
        return ds_evidence(outcome);
    }
    pg.flow().analyze().into_iter().next().map(|violation| Evidence::Disrespectful { violation })
}

/// Full compliance of a triple: every stuck configuration has a satisfied
/// client and every run of the system is respectful. Strictness of `orch`
/// is not required; branches that never fire are irrelevant.
pub fn check_full(client: &SessionContract, orch: &Orchestrator, server: &SessionContract, limits: &Limits) -> Result<ComplianceReport> {
    let start = Instant::now();
    let pg = ProductGraph::build(client, orch, server, limits.node_cap)?;
    Ok(triple_report(Mode::Full, full_on(&pg), &pg, start))
}

/// Disrespectful compliance of a triple, as a report.
pub fn check_ds_report(client: &SessionContract, orch: &Orchestrator, server: &SessionContract, limits: &Limits) -> Result<ComplianceReport> {
    let start = Instant::now();
    let pg = ProductGraph::build(client, orch, server, limits.node_cap)?;
    let evidence = match strict_on(&pg, limits)? {
        Some(trace) => Some(Evidence::NotStrict { trace }),
        None => stuck_client(&pg).and_then(ds_evidence),
    };
    Ok(triple_report(Mode::Ds, evidence, &pg, start))
}

pub fn check_triple(client: &SessionContract, orch: &Orchestrator, server: &SessionContract, mode: Mode, limits: &Limits) -> Result<ComplianceReport> {
    match mode {
        Mode::Ds => check_ds_report(client, orch, server, limits),
        Mode::Full => check_full(client, orch, server, limits),
    }
}

/// Whether some orchestrator makes `client` compliant with `server`.
///
/// In `ds` mode any synthesized orchestrator will do. In `full` mode the
/// witness must also be strict and respectful, and the family is searched
/// up to `limits.enum_cap` members.
pub fn decide_pair(client: &SessionContract, server: &SessionContract, mode: Mode, limits: &Limits) -> Result<ComplianceReport> {
    let start = Instant::now();
    let family = synth(client, server);
    let mut stats = Stats {
        family_size: Some(family.count().to_string()),
        synth_pairs: Some(family.stats().pairs),
        ..Stats::default()
    };
    let (verdict, witness, evidence) = match mode {
        Mode::Ds => match family.iter().next() {
            Some(w) => (Verdict::Holds, Some(w), None),
            None => (Verdict::Fails, None, Some(Evidence::EmptyFamily)),
        },
        Mode::Full => match find_witness_in(&family, client, server, limits)? {
            WitnessSearch::Found { witness, examined } => {
                stats.examined = Some(examined);
                (Verdict::Holds, Some(witness), None)
            }
            WitnessSearch::Exhausted { examined } => {
                stats.examined = Some(examined);
                let evidence = match examined {
                    0 => Evidence::EmptyFamily,
                    _ => Evidence::NoRespectfulCandidate { examined },
                };
                (Verdict::Fails, None, Some(evidence))
            }
            WitnessSearch::InconclusiveByCap { examined } => {
                stats.examined = Some(examined);
                (Verdict::InconclusiveByCap, None, None)
            }
        },
    };
    stats.elapsed_ms = elapsed(start);
    Ok(ComplianceReport { mode, verdict, witness, evidence, stats })
}

/// Both sides of the equivalence between full compliance and disrespectful
/// compliance with a respectful orchestrator. The sides are only expected
/// to agree when the orchestrator is strict.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Prop1Report {
    pub strict: bool,
    pub full: bool,
    pub ds: bool,
    pub respectful: bool,
    /// `full` and `strict`.
    pub left: bool,
    /// `ds` and `respectful`.
    pub right: bool,
}

impl Prop1Report {
    pub fn applicable(&self) -> bool {
        self.strict
    }

    pub fn agree(&self) -> bool {
        self.left == self.right
    }
}

impl fmt::Display for Prop1Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "strict: {}, full: {}, ds: {}, respectful: {}; left {} right {}",
            self.strict, self.full, self.ds, self.respectful, self.left, self.right
        )?;
        match (self.applicable(), self.agree()) {
            (false, _) => f.write_str(" (not strict, not applicable)"),
            (true, true) => f.write_str(" (agree)"),
            (true, false) => f.write_str(" (DISAGREE)"),
        }
    }
}

pub fn cross_check_prop1(client: &SessionContract, orch: &Orchestrator, server: &SessionContract, limits: &Limits) -> Result<Prop1Report> {
    let pg = ProductGraph::build(client, orch, server, limits.node_cap)?;
    let strict = strict_on(&pg, limits)?.is_none();
    let full = full_on(&pg).is_none();
    let ds = strict && stuck_client(&pg).is_none();
    let respectful = is_respectful(orch).respectful;
    Ok(Prop1Report {
        strict,
        full,
        ds,
        respectful,
        left: full && strict,
        right: ds && respectful,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_contract, parse_orchestrator_raw};

    fn c(s: &str) -> SessionContract {
        parse_contract(s).unwrap()
    }

    fn o(s: &str) -> Orchestrator {
        parse_orchestrator_raw(s).unwrap()
    }

    fn lim() -> Limits {
        Limits::default()
    }

    #[test]
    fn fake_compliance() {
        let (r, f, s) = (c("!a.!b"), o("<a,!a>.<b,_>"), c("a.c.d"));
        assert!(check_ds_report(&r, &f, &s, &lim()).unwrap().holds());
        let full = check_full(&r, &f, &s, &lim()).unwrap();
        assert_eq!(full.verdict, Verdict::Fails);
        let Some(Evidence::Disrespectful { violation: FlowViolation::StrandedMessages { name, pending, .. } }) = full.evidence else {
            panic!("{full}")
        };
        assert_eq!((name.as_str(), pending), ("b", 1));
        let p = cross_check_prop1(&r, &f, &s, &lim()).unwrap();
        assert!(p.strict && !p.left && !p.right);
    }

    #[test]
    fn unrealized_branch_is_harmless() {
        let (r, f, s) = (c("!a"), o("<a,!a>.1 \\/ <_,!b>.1"), c("a"));
        assert!(check_full(&r, &f, &s, &lim()).unwrap().holds());
        let p = cross_check_prop1(&r, &f, &s, &lim()).unwrap();
        assert!(!p.strict && !p.respectful && !p.applicable());
    }

    #[test]
    fn loop_pair() {
        let (r, s) = (c("rec X.!a.X"), c("rec X.a.X"));
        let p = cross_check_prop1(&r, &o("rec X.<a,!a>.X"), &s, &lim()).unwrap();
        assert!(p.left && p.right);
        assert!(decide_pair(&r, &s, Mode::Full, &lim()).unwrap().holds());
    }

    #[test]
    fn pair_decisions() {
        let (r, s) = (c("rec X.!a.!c.X"), c("rec X.c.X"));
        assert!(decide_pair(&r, &s, Mode::Ds, &lim()).unwrap().holds());
        let full = decide_pair(&r, &s, Mode::Full, &lim()).unwrap();
        assert_eq!(full.verdict, Verdict::Fails);
        assert_eq!(full.evidence, Some(Evidence::NoRespectfulCandidate { examined: 4 }));
        let r = decide_pair(&c("!a"), &c("b"), Mode::Ds, &lim()).unwrap();
        assert!(r.holds());
        let r = decide_pair(&c("a"), &c("1"), Mode::Ds, &lim()).unwrap();
        assert_eq!((r.verdict, r.evidence), (Verdict::Fails, Some(Evidence::EmptyFamily)));
    }

    #[test]
    fn capped_search_is_inconclusive() {
        let tight = Limits { enum_cap: 1, ..lim() };
        let r = decide_pair(&c("rec X.!a.!c.X"), &c("rec X.c.X"), Mode::Full, &tight).unwrap();
        assert_eq!(r.verdict, Verdict::InconclusiveByCap);
        assert_eq!(r.verdict.exit_code(), 2);
    }

    #[test]
    fn report_json() {
        let r = decide_pair(&c("rec X.!a.X"), &c("rec X.a.X"), Mode::Ds, &lim()).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["mode"], "ds");
        assert_eq!(v["verdict"], "holds");
        assert!(v["witness"].is_string());
    }
}
