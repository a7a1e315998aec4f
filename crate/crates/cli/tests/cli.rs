use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_orchestral"))
        .current_dir(root().join("corpus"))
        .env_remove("ORCHESTRAL_FORMAT")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json_of(args: &[&str], schema: &str) -> (i32, Value) {
    let mut full = vec!["--format", "json"];
    full.extend_from_slice(args);
    let o = run(&full);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(&o)));
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(root().join("schema").join(schema)).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).expect("valid schema");
    let errors: Vec<String> = validator.iter_errors(&v).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}\n{v:#}");
    (o.status.code().unwrap(), v)
}

#[test]
fn check_intro_triple() {
    let o = run(&["check", "mdps.sc", "weather.sc", "--orch", "f.orc", "--mode", "full"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("verdict: holds"));
}

#[test]
fn check_fake_triple() {
    let o = run(&["check", "client_ab.sc", "server_acd.sc", "--orch", "fake.orc", "--mode", "full"]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("verdict: fails"));
    assert!(out.contains("<a,!a> <b,_>"), "{out}");
    let o = run(&["check", "client_ab.sc", "server_acd.sc", "--orch", "fake.orc", "--mode", "ds"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn check_reports_validate() {
    let (code, v) = json_of(&["check", "client_ab.sc", "server_acd.sc", "--orch", "fake.orc", "--prop1"], "report.schema.json");
    assert_eq!(code, 1);
    assert_eq!(v["evidence"]["violation"]["name"], "b");
    assert_eq!(v["evidence"]["violation"]["pending"], 1);
    assert_eq!(v["prop1"]["agree"], true);
    let (code, v) = json_of(&["check", "mdps.sc", "weather.sc"], "report.schema.json");
    assert_eq!(code, 0);
    assert!(v["witness"].is_string());
    let (code, v) = json_of(&["check", "loop_out_ac.sc", "loop_in_c.sc"], "report.schema.json");
    assert_eq!(code, 1);
    assert_eq!(v["evidence"]["kind"], "no_respectful_candidate");
    let (code, v) = json_of(&["check", "loop_out_ac.sc", "loop_in_c.sc", "--mode", "ds"], "report.schema.json");
    assert_eq!((code, &v["verdict"]), (0, &Value::from("holds")));
    let (code, v) = json_of(&["check", "loop_out_ac.sc", "loop_in_c.sc", "--enum-cap", "1"], "report.schema.json");
    assert_eq!((code, &v["verdict"]), (2, &Value::from("inconclusive_by_cap")));
}

#[test]
fn synthesize_listings() {
    let o = run(&["synthesize", "loop_out_a.sc", "loop_in_a.sc", "--max", "5"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).lines().any(|l| l == "rec X . <a,!a>.X"));
    let (code, v) = json_of(&["synthesize", "one.sc", "anything.sc"], "synthesize.schema.json");
    assert_eq!(code, 0);
    assert_eq!(v["members"], serde_json::json!(["1"]));
    assert_eq!(v["count"], "1");
    let (code, v) = json_of(&["synthesize", "out_a.sc", "in_b.sc", "--respectful-only"], "synthesize.schema.json");
    assert_eq!(code, 1);
    assert_eq!(v["members"], serde_json::json!([]));
}

#[test]
fn simulate_is_reproducible() {
    let args = ["simulate", "mdps.sc", "weather.sc", "f.orc", "--steps", "12", "--seed", "7"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let (_, v) = json_of(&args, "simulate.schema.json");
    let steps = v["steps"].as_array().unwrap();
    assert_eq!(steps.len(), 12);
    for s in steps {
        for (_, counts) in s["buffer"].as_object().unwrap() {
            assert!(counts["cs"].as_i64().unwrap() >= 0 && counts["sc"].as_i64().unwrap() >= 0);
        }
    }
}

#[test]
fn simulate_stuck_systems() {
    let (_, v) = json_of(&["simulate", "one.sc", "one.sc", "one.sc", "--steps", "5"], "simulate.schema.json");
    assert_eq!(v["steps"], serde_json::json!([]));
    assert_eq!(v["status"], "stuck_client_satisfied");
    let (_, v) = json_of(&["simulate", "client_ab.sc", "server_acd.sc", "fake.orc", "--steps", "10"], "simulate.schema.json");
    assert_eq!(v["steps"].as_array().unwrap().len(), 2);
    assert_eq!(v["buffer"]["b"]["cs"], 1);
    let o = run(&["simulate", "client_ab.sc", "server_acd.sc", "fake.orc", "--steps", "10"]);
    assert!(stdout(&o).contains("cs_b = 1"));
}

#[test]
fn parse_outputs_validate() {
    let (code, v) = json_of(&["parse", "remark_g.orc"], "parse.schema.json");
    assert_eq!(code, 0);
    assert_eq!(v["respectful"]["respectful"], false);
    let (_, v) = json_of(&["parse", "weather.sc"], "parse.schema.json");
    assert_eq!(v["kind"], "contract");
}

#[test]
fn format_from_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_orchestral"))
        .current_dir(root().join("corpus"))
        .env("ORCHESTRAL_FORMAT", "json")
        .args(["parse", "one.sc"])
        .output()
        .unwrap();
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["term"], "1");
}

#[test]
fn errors_exit_with_two() {
    let dir = std::env::temp_dir().join(format!("orchestral-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.sc");
    std::fs::write(&bad, "a . (").unwrap();
    let o = run(&["parse", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
    let o = run(&["check", "missing.sc", "one.sc"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["check", "one.sc", "one.sc", "--node-cap", "0"]);
    assert_eq!(o.status.code(), Some(2));
    let unbound = dir.join("free.orc");
    std::fs::write(&unbound, "<a,!a>.X").unwrap();
    let o = run(&["check", "out_a.sc", "in_a.sc", "--orch", unbound.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unrealized_branch_warns_but_checks() {
    let o = run(&["check", "out_a.sc", "in_a.sc", "--orch", "unrealized_branch.orc", "--prop1"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    assert!(stdout(&o).contains("not applicable"));
}
