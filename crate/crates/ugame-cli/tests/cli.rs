//! End-to-end tests of the `ugame` binary: document parsing, result
//! documents, exit codes, and output determinism.

use std::path::PathBuf;
use std::process::Command;

use serde_json::Value as Json;
use tempfile::TempDir;

use ugame::num::{parse_rational, rat, ratio};

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_ugame"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().expect("exit code"),
        String::from_utf8(out.stdout).expect("utf8 stdout"),
        String::from_utf8(out.stderr).expect("utf8 stderr"),
    )
}

fn write_doc(dir: &TempDir, name: &str, content: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, content).expect("write document");
    path
}

/// The running 4-player example: percapita utility, core the segment
/// (a, 6-a, 3, 3) with a in [1, 6], prenucleolus (3, 3, 3, 3).
const EXAMPLE: &str = r#"{
  "schema": 1,
  "players": 4,
  "coalitions": [
    {"members": [3], "value": 3},
    {"members": [0, 1], "value": 6},
    {"members": [2, 3], "value": 6},
    {"members": [0, 3], "value": 4},
    {"members": [1, 2, 3], "value": 6},
    {"members": [0, 1, 2], "value": 9},
    {"members": [0, 1, 2, 3], "value": 12}
  ],
  "utility": {"kind": "percapita"}
}"#;

fn parse(stdout: &str) -> Json {
    serde_json::from_str(stdout).expect("valid result document")
}

fn str_array(doc: &Json, pointer: &str) -> Vec<String> {
    doc.pointer(pointer)
        .unwrap_or_else(|| panic!("missing {pointer}"))
        .as_array()
        .expect("array")
        .iter()
        .map(|v| v.as_str().expect("string").to_string())
        .collect()
}

#[test]
fn prenucleolus_trace_reproduces_the_worked_example() {
    let dir = TempDir::new().unwrap();
    let file = write_doc(&dir, "g.json", EXAMPLE);
    let (code, stdout, _) = run(&["prenucleolus", file.to_str().unwrap(), "--trace"]);
    assert_eq!(code, 0);
    let doc = parse(&stdout);
    assert_eq!(str_array(&doc, "/point"), ["3", "3", "3", "3"]);
    assert_eq!(str_array(&doc, "/levels"), ["0", "-1"]);
    assert_eq!(doc.pointer("/is_singleton"), Some(&Json::Bool(true)));
    assert_eq!(doc.pointer("/approximate"), Some(&Json::Bool(false)));

    let trace = doc.pointer("/trace").unwrap().as_array().unwrap();
    assert_eq!(trace.len(), 2);
    let members = |round: &Json| -> Vec<Json> {
        round
            .pointer("/coalitions")
            .unwrap()
            .as_array()
            .unwrap()
            .iter()
            .map(|c| c.pointer("/members").unwrap().clone())
            .collect()
    };
    assert_eq!(trace[0].pointer("/level").unwrap(), &Json::from("0"));
    assert_eq!(
        members(&trace[0]),
        [
            serde_json::json!([2]),
            serde_json::json!([3]),
            serde_json::json!([0, 1]),
            serde_json::json!([2, 3]),
            serde_json::json!([0, 1, 2]),
            serde_json::json!([0, 1, 3]),
        ]
    );
    assert_eq!(trace[1].pointer("/level").unwrap(), &Json::from("-1"));
    assert_eq!(members(&trace[1]).len(), 8);
}

#[test]
fn membership_verdicts_and_witness_round_trip() {
    let dir = TempDir::new().unwrap();
    let file = write_doc(&dir, "g.json", EXAMPLE);
    let path = file.to_str().unwrap();

    let (code, _, _) = run(&["core", path, "--point", "3,3,3,3"]);
    assert_eq!(code, 0);
    let (code, stdout, _) = run(&["core", path, "--point", "12,0,0,0"]);
    assert_eq!(code, 2);
    let doc = parse(&stdout);
    assert_eq!(doc.pointer("/member"), Some(&Json::Bool(false)));
    assert!(!doc.pointer("/violations").unwrap().as_array().unwrap().is_empty());

    // The emptiness witness, fed back as a point, is a member.
    let (code, stdout, _) = run(&["core", path]);
    assert_eq!(code, 0);
    let doc = parse(&stdout);
    let witness = str_array(&doc, "/status/witness").join(",");
    let (code, _, _) = run(&["core", path, "--point", &witness]);
    assert_eq!(code, 0);
}

#[test]
fn essential_lists_match_the_known_families() {
    let dir = TempDir::new().unwrap();
    let file = write_doc(&dir, "g.json", EXAMPLE);
    let path = file.to_str().unwrap();

    let (code, stdout, _) = run(&["essential", path, "--classical"]);
    assert_eq!(code, 0);
    let doc = parse(&stdout);
    assert_eq!(doc.pointer("/count"), Some(&serde_json::json!(8)));
    let expected: Json = serde_json::json!([
        [0], [1], [2], [3], [0, 1], [0, 3], [2, 3], [0, 1, 2]
    ]);
    assert_eq!(doc.pointer("/coalitions"), Some(&expected));

    let (code, stdout, _) = run(&["essential", path, "--u"]);
    assert_eq!(code, 0);
    let doc = parse(&stdout);
    assert_eq!(doc.pointer("/count"), Some(&serde_json::json!(13)));
    // Everything but {0,1,3} is u-essential under percapita.
    let coalitions = doc.pointer("/coalitions").unwrap().as_array().unwrap();
    assert!(!coalitions.contains(&serde_json::json!([0, 1, 3])));
}

#[test]
fn essential_restriction_matches_the_full_solve() {
    let dir = TempDir::new().unwrap();
    let file = write_doc(&dir, "g.json", EXAMPLE);
    let (code, stdout, _) = run(&[
        "prenucleolus",
        file.to_str().unwrap(),
        "--restrict-to-essential",
        "--verify-kohlberg",
    ]);
    assert_eq!(code, 0);
    let doc = parse(&stdout);
    assert_eq!(doc.pointer("/matches_full_solve"), Some(&Json::Bool(true)));
    assert_eq!(doc.pointer("/essential/count"), Some(&serde_json::json!(13)));
    assert_eq!(str_array(&doc, "/point"), ["3", "3", "3", "3"]);
    assert_eq!(doc.pointer("/kohlberg/satisfied"), Some(&Json::Bool(true)));
}

#[test]
fn unbalanced_family_exits_three_with_uncovered_players() {
    let dir = TempDir::new().unwrap();
    let file = write_doc(
        &dir,
        "u.json",
        r#"{"schema": 1, "players": 2, "mode": "restricted",
            "coalitions": [{"members": [0], "value": 1},
                           {"members": [0, 1], "value": 2}]}"#,
    );
    let (code, stdout, _) = run(&["prenucleolus", file.to_str().unwrap()]);
    assert_eq!(code, 3);
    let doc = parse(&stdout);
    assert_eq!(
        doc.pointer("/certificate/uncovered_players"),
        Some(&serde_json::json!([1]))
    );
}

#[test]
fn input_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    let bad_rational = write_doc(
        &dir,
        "bad.json",
        r#"{"schema": 1, "players": 2, "coalitions": [{"members": [0], "value": "1/0"}]}"#,
    );
    let (code, _, stderr) = run(&["core", bad_rational.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(stderr.contains("malformed rational"));

    let bad_schema = write_doc(&dir, "schema.json", r#"{"schema": 7, "players": 2}"#);
    let (code, _, _) = run(&["core", bad_schema.to_str().unwrap()]);
    assert_eq!(code, 1);

    let (code, _, _) = run(&["core", "/does/not/exist.json"]);
    assert_eq!(code, 1);

    // Usage errors (here: neither --classical nor --u) are input errors.
    let ok = write_doc(&dir, "ok.json", EXAMPLE);
    let (code, _, _) = run(&["essential", ok.to_str().unwrap()]);
    assert_eq!(code, 1);

    let (code, _, _) = run(&["core", ok.to_str().unwrap(), "--utility", "nonsense"]);
    assert_eq!(code, 1);
}

#[test]
fn named_players_resolve_in_documents_and_flags() {
    let dir = TempDir::new().unwrap();
    let file = write_doc(
        &dir,
        "named.json",
        r#"{"schema": 1, "players": ["ann", "bob"],
            "coalitions": [{"members": ["ann"], "value": 1},
                           {"members": ["ann", "bob"], "value": 4}]}"#,
    );
    let path = file.to_str().unwrap();
    let (code, stdout, _) = run(&["prenucleolus", path]);
    assert_eq!(code, 0);
    let doc = parse(&stdout);
    assert_eq!(str_array(&doc, "/point"), ["5/2", "3/2"]);
    assert_eq!(str_array(&doc, "/players"), ["ann", "bob"]);

    // {ann} gets zero weight in the only candidate system, so the
    // two-coalition collection is not balanced.
    let (code, stdout, _) = run(&["balanced", path, "--collection", "ann;ann,bob"]);
    assert_eq!(code, 2);
    let doc = parse(&stdout);
    assert_eq!(
        doc.pointer("/verdict/zero_weight_coalitions"),
        Some(&serde_json::json!([[0]]))
    );
}

#[test]
fn utility_override_changes_the_solution() {
    let dir = TempDir::new().unwrap();
    let file = write_doc(&dir, "g.json", EXAMPLE);
    let (code, stdout, _) = run(&[
        "prenucleolus",
        file.to_str().unwrap(),
        "--utility",
        "identity",
    ]);
    assert_eq!(code, 0);
    let doc = parse(&stdout);
    assert_eq!(str_array(&doc, "/point"), ["7/2", "5/2", "3", "3"]);
    assert_eq!(doc.pointer("/utility"), Some(&Json::from("identity")));
}

#[test]
fn general_utility_levels_are_marked_approximate() {
    let dir = TempDir::new().unwrap();
    let file = write_doc(&dir, "g.json", EXAMPLE);
    let (code, stdout, _) = run(&[
        "prenucleolus",
        file.to_str().unwrap(),
        "--utility",
        "arctan",
        "--tolerance",
        "1e-9",
    ]);
    assert_eq!(code, 0);
    let doc = parse(&stdout);
    assert_eq!(doc.pointer("/approximate"), Some(&Json::Bool(true)));
    // Same transform for every coalition preserves the excess order, so
    // the point agrees with the identity solution to bisection accuracy.
    let point: Vec<f64> = str_array(&doc, "/point")
        .iter()
        .map(|s| {
            let r = parse_rational(s).unwrap();
            ugame::num::to_f64(&r)
        })
        .collect();
    for (got, want) in point.iter().zip([3.5, 2.5, 3.0, 3.0]) {
        assert!((got - want).abs() < 1e-6, "point {point:?}");
    }
}

#[test]
fn kohlberg_command_accepts_and_rejects() {
    let dir = TempDir::new().unwrap();
    let file = write_doc(&dir, "g.json", EXAMPLE);
    let path = file.to_str().unwrap();
    let (code, stdout, _) = run(&["kohlberg", path, "--point", "3,3,3,3"]);
    assert_eq!(code, 0);
    let doc = parse(&stdout);
    assert_eq!(doc.pointer("/satisfied"), Some(&Json::Bool(true)));

    let (code, stdout, _) = run(&["kohlberg", path, "--point", "4,2,3,3"]);
    assert_eq!(code, 2);
    let doc = parse(&stdout);
    assert_eq!(doc.pointer("/satisfied"), Some(&Json::Bool(false)));
    let levels = doc.pointer("/levels").unwrap().as_array().unwrap();
    let last = levels.last().unwrap();
    assert_eq!(last.pointer("/level"), Some(&Json::from("-2/3")));
    assert_eq!(
        last.pointer("/verdict/balanced"),
        Some(&Json::Bool(false))
    );
}

#[test]
fn assignment_documents_build_markets() {
    let dir = TempDir::new().unwrap();
    let market = write_doc(
        &dir,
        "m.json",
        r#"{"schema": 1,
            "assignment": {"buyers": 2, "sellers": 2, "profits": [[3, 0], [0, 4]]}}"#,
    );
    let (code, stdout, _) = run(&[
        "assignment",
        market.to_str().unwrap(),
        "--verify-structure",
    ]);
    assert_eq!(code, 0);
    let doc = parse(&stdout);
    assert_eq!(doc.pointer("/grand_value"), Some(&Json::from("7")));
    assert_eq!(doc.pointer("/structure/conforming"), Some(&Json::Bool(true)));

    let tiny = write_doc(
        &dir,
        "tiny.json",
        r#"{"schema": 1, "assignment": {"buyers": 1, "sellers": 1, "profits": [[5]]}}"#,
    );
    let (code, stdout, _) = run(&["assignment", tiny.to_str().unwrap()]);
    assert_eq!(code, 0);
    let doc = parse(&stdout);
    assert_eq!(doc.pointer("/grand_value"), Some(&Json::from("5")));
    assert_eq!(
        doc.pointer("/matching"),
        Some(&serde_json::json!([{"buyer": 0, "seller": 0}]))
    );
}

#[test]
fn rank_reports_the_incidence_span() {
    let dir = TempDir::new().unwrap();
    let file = write_doc(&dir, "g.json", EXAMPLE);
    let (code, stdout, _) = run(&["rank", file.to_str().unwrap()]);
    assert_eq!(code, 0);
    let doc = parse(&stdout);
    assert_eq!(doc.pointer("/rank"), Some(&serde_json::json!(4)));
    assert_eq!(doc.pointer("/full_rank"), Some(&Json::Bool(true)));
}

#[test]
fn output_is_deterministic_and_rationals_round_trip() {
    let dir = TempDir::new().unwrap();
    let file = write_doc(&dir, "g.json", EXAMPLE);
    let args = ["prenucleolus", file.to_str().unwrap(), "--trace"];
    let (_, first, _) = run(&args);
    let (_, second, _) = run(&args);
    assert_eq!(first, second, "same input must give identical bytes");

    let doc = parse(&first);
    for s in str_array(&doc, "/point") {
        assert_eq!(parse_rational(&s).unwrap(), rat(3));
    }
    // A non-integer rational survives the document format unchanged.
    let named = write_doc(
        &dir,
        "frac.json",
        r#"{"schema": 1, "players": 2,
            "coalitions": [{"members": [0], "value": "1/3"},
                           {"members": [0, 1], "value": "7/3"}]}"#,
    );
    let (_, stdout, _) = run(&["prenucleolus", named.to_str().unwrap()]);
    let doc = parse(&stdout);
    let point = str_array(&doc, "/point");
    let a = parse_rational(&point[0]).unwrap();
    let b = parse_rational(&point[1]).unwrap();
    assert_eq!(&a + &b, ratio(7, 3));
    // Equal split of the surplus 2 over v({0}) = 1/3: (4/3, 1).
    assert_eq!(a, ratio(4, 3));
}
