//! `orchestral`: check, synthesize and simulate orchestrated client/server
//! systems from the command line.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use orchestral::buffers::apply_action;
use orchestral::system::label_text;
use orchestral::{
    check_triple, cross_check_prop1, decide_pair, is_respectful, is_strict, parse_contract, parse_orchestrator_raw, synth,
    system_step, Buffer, ComplianceReport, Limits, Mode, Orchestrator, SessionContract, SystemConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "orchestral", version, about = "Orchestrated compliance for session contracts")]
struct Cli {
    #[command(flatten)]
    cfg: RunConfig,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunConfig {
    /// Output format.
    #[arg(long, global = true, env = "ORCHESTRAL_FORMAT", default_value = "text")]
    format: Format,
    /// Largest state space explored before giving up.
    #[arg(long, global = true, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1..))]
    node_cap: u64,
    /// Most synthesized candidates examined in a search.
    #[arg(long, global = true, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
    enum_cap: u64,
}

impl RunConfig {
    fn limits(&self) -> Limits {
        Limits {
            node_cap: self.node_cap as usize,
            enum_cap: self.enum_cap as usize,
            ..Limits::default()
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Ds,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Auto,
    Contract,
    Orchestrator,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a contract or orchestrator and print its canonical form.
    Parse {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "auto")]
        kind: Kind,
    },
    /// Decide compliance of a triple, or of a pair when no orchestrator is given.
    Check {
        client: PathBuf,
        server: PathBuf,
        #[arg(long)]
        orch: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "full")]
        mode: ModeArg,
        /// Also compare full compliance with disrespectful compliance plus respectfulness.
        #[arg(long, requires = "orch")]
        prop1: bool,
    },
    /// List the orchestrators synthesized for a pair.
    Synthesize {
        client: PathBuf,
        server: PathBuf,
        #[arg(long, default_value_t = 10)]
        max: usize,
        /// Keep only strict and respectful orchestrators.
        #[arg(long)]
        respectful_only: bool,
    },
    /// Random walk over the system's transitions.
    Simulate {
        client: PathBuf,
        server: PathBuf,
        orch: PathBuf,
        #[arg(long, default_value_t = 20)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// A failure that ends the run with exit code 2.
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type Outcome = Result<ExitCode, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn contract(path: &Path) -> Result<SessionContract, Failure> {
    parse_contract(&read(path)?).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

/// Orchestrators may break the choice discipline (the paper's own examples
/// do); that is reported but only structural problems are fatal.
fn orchestrator(path: &Path) -> Result<Orchestrator, Failure> {
    let t = parse_orchestrator_raw(&read(path)?).map_err(|e| Failure(format!("{}: {e}", path.display())))?;
    for v in t.well_formed() {
        if v.kind.is_structural() {
            return Err(Failure(format!("{}: not well formed: {v}", path.display())));
        }
        eprintln!("warning: {}: {v}", path.display());
    }
    Ok(t)
}

fn emit(format: Format, text: &str, value: &impl Serialize) {
    match format {
        Format::Text => print!("{text}"),
        Format::Json => println!("{}", serde_json::to_string_pretty(value).expect("serializable output")),
    }
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn cmd_parse(cfg: &RunConfig, file: &Path, kind: Kind) -> Outcome {
    let src = read(file)?;
    let kind = match kind {
        Kind::Auto if src.contains('<') => Kind::Orchestrator,
        Kind::Auto => Kind::Contract,
        k => k,
    };
    let (text, value) = match kind {
        Kind::Orchestrator => {
            let t = orchestrator(file)?;
            let v = is_respectful(&t);
            let mut text = format!("orchestrator: {t}\nrespectful: {}\n", v.respectful);
            for e in &v.evidence {
                text += &format!("  {e}\n");
            }
            (text, json!({"kind": "orchestrator", "term": t.to_string(), "respectful": v}))
        }
        _ => {
            let t = contract(file)?;
            (format!("contract: {t}\n"), json!({"kind": "contract", "term": t.to_string()}))
        }
    };
    emit(cfg.format, &text, &value);
    Ok(ExitCode::SUCCESS)
}

fn cmd_check(cfg: &RunConfig, client: &Path, server: &Path, orch: Option<&Path>, mode: ModeArg, prop1: bool) -> Outcome {
    let (c, s) = (contract(client)?, contract(server)?);
    let mode = match mode {
        ModeArg::Ds => Mode::Ds,
        ModeArg::Full => Mode::Full,
    };
    let limits = cfg.limits();
    let report: ComplianceReport = match orch {
        Some(p) => check_triple(&c, &orchestrator(p)?, &s, mode, &limits)?,
        None => decide_pair(&c, &s, mode, &limits)?,
    };
    let mut text = report.to_string();
    let mut value = serde_json::to_value(&report)?;
    if prop1 {
        let f = orchestrator(orch.expect("required by clap"))?;
        let p = cross_check_prop1(&c, &f, &s, &limits)?;
        text += &format!("prop1: {p}\n");
        value["prop1"] = json!({"applicable": p.applicable(), "agree": p.agree(), "sides": p});
    }
    emit(cfg.format, &text, &value);
    Ok(code(report.verdict.exit_code()))
}

fn cmd_synthesize(cfg: &RunConfig, client: &Path, server: &Path, max: usize, respectful_only: bool) -> Outcome {
    let (c, s) = (contract(client)?, contract(server)?);
    let limits = cfg.limits();
    let family = synth(&c, &s);
    let mut members = Vec::new();
    let mut examined = 0;
    let mut capped = false;
    for f in family.iter() {
        if members.len() == max {
            break;
        }
        if respectful_only {
            if examined == limits.enum_cap {
                capped = true;
                break;
            }
            examined += 1;
            if !is_respectful(&f).respectful || is_strict(&c, &f, &s, &limits)?.is_some() {
                continue;
            }
        }
        members.push(f);
    }
    let count = family.count().to_string();
    let mut text = format!("family size: {count}\n");
    if respectful_only {
        text += &format!("strict and respectful among the first {examined}: {}\n", members.len());
    }
    for m in &members {
        text += &format!("{m}\n");
    }
    if capped {
        text += "search stopped at the enumeration cap\n";
    }
    let value = json!({
        "count": count,
        "respectful_only": respectful_only,
        "members": members.iter().map(|m| m.to_string()).collect::<Vec<_>>(),
        "examined": respectful_only.then_some(examined),
        "capped": capped,
    });
    emit(cfg.format, &text, &value);
    Ok(match (members.is_empty(), capped) {
        (false, _) => ExitCode::SUCCESS,
        (true, false) => code(1),
        (true, true) => code(2),
    })
}

fn cmd_simulate(cfg: &RunConfig, client: &Path, server: &Path, orch: &Path, steps: usize, seed: u64) -> Outcome {
    let (c, s, f) = (contract(client)?, contract(server)?, orchestrator(orch)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut config = SystemConfig::new(&c, &f, &s);
    let mut buffer = Buffer::new();
    let mut text = format!("start: {c} || {f} || {s}\n");
    let mut trace: Vec<Value> = Vec::new();
    let mut status = "step_limit";
    for i in 1..=steps {
        let mut next = system_step(&config);
        if next.is_empty() {
            break;
        }
        let (label, target) = next.swap_remove(rng.random_range(0..next.len()));
        if let Some(a) = &label {
            buffer = apply_action(&buffer, a);
        }
        text += &format!("{i:>4}  {:<28} {buffer}\n", label_text(&label));
        trace.push(json!({"label": label_text(&label), "buffer": buffer, "config": target.to_string()}));
        config = target;
    }
    if system_step(&config).is_empty() {
        status = match config.client.is_success() {
            true => "stuck_client_satisfied",
            false => "stuck_client_unsatisfied",
        };
    }
    let pending: Vec<String> = buffer.nonzero().filter(|(_, (cs, _))| *cs != 0).map(|(n, (cs, _))| format!("cs_{n} = {cs}")).collect();
    text += &format!("end: {config}\nstatus: {}\nbuffer: {buffer}\n", status.replace('_', " "));
    if !pending.is_empty() {
        text += &format!("pending client messages: {}\n", pending.join(", "));
    }
    let value = json!({"seed": seed, "steps": trace, "status": status, "buffer": buffer});
    emit(cfg.format, &text, &value);
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = &cli.cfg;
    let outcome = match &cli.command {
        Command::Parse { file, kind } => cmd_parse(cfg, file, *kind),
        Command::Check { client, server, orch, mode, prop1 } => cmd_check(cfg, client, server, orch.as_deref(), *mode, *prop1),
        Command::Synthesize { client, server, max, respectful_only } => cmd_synthesize(cfg, client, server, *max, *respectful_only),
        Command::Simulate { client, server, orch, steps, seed } => cmd_simulate(cfg, client, server, orch, *steps, *seed),
    };
    outcome.unwrap_or_else(|Failure(msg)| {
        eprintln!("error: {msg}");
        code(2)
    })
}
