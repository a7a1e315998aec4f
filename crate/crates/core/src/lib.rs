//! Orchestrated compliance for session contracts.
//!
//! Clients and servers are session contracts; an orchestrator mediates
//! between them through a per-name bidirectional buffer. The crate parses
//! and renders terms, builds the finite state graphs of contracts,
//! orchestrators and orchestrated systems, synthesizes candidate
//! orchestrators for a client/server pair, and decides respectfulness and
//! the two compliance relations.

pub mod buffers;
pub mod compliance;
pub mod contracts;
pub mod error;
pub mod flow;
mod lts;
pub mod names;
pub mod orchestrators;
pub mod parser;
pub mod respectfulness;
pub mod synthesis;
pub mod system;
pub mod violation;

pub use buffers::{classify, left_restrict, run_sequence, Buffer, SequenceVerdict, Side};
pub use compliance::{check_ds_report, check_full, check_triple, cross_check_prop1, decide_pair, ComplianceReport, Evidence, Mode, Prop1Report, Verdict};
pub use contracts::{ContractAction, ContractLabel, Polarity, SessionContract};
pub use error::{Error, Result};
pub use flow::{FlowGraph, FlowViolation};
pub use lts::{StateGraph, StateId};
pub use names::{Name, RecVar};
pub use orchestrators::{ActionSequence, Category, OrchAction, Orchestrator, TermGraph};
pub use parser::{
    parse_contract, parse_contract_raw, parse_orchestrator, parse_orchestrator_raw, render_contract,
    render_orchestrator, ParseError, SourceSpan,
};
pub use respectfulness::{is_respectful, RespectEvidence, RespectMode, RespectVerdict, TreeViolation};
pub use synthesis::{find_witness, synth, synth_in, verify_judgment, Env, Family, Judgment, Rule, WitnessSearch};
pub use system::{check_ds, is_strict, system_step, DsOutcome, ProductGraph, SystemConfig};
pub use violation::{TermPath, Violation, ViolationKind};

/// Resource bounds shared by the decision procedures. Exceeding one is
/// reported as [`Error::ResourceLimit`], never as a verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    /// Maximum number of states in any explored graph.
    pub node_cap: usize,
    /// Maximum number of synthesized candidates examined.
    pub enum_cap: usize,
    /// Maximum number of subset states in the strictness check.
    pub det_cap: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            node_cap: 1_000_000,
            enum_cap: 100_000,
            det_cap: 1_000_000,
        }
    }
}
