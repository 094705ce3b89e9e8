//! Command line behaviour, driven in-process and through the built binary.
//! Golden files live in `tests/golden`; set `IDG_BLESS=1` to rewrite them.

use std::path::{Path, PathBuf};
use std::process::Command;

use idg_core::cli::run;
use idg_core::io::load;
use idg_core::{fixtures, validate};

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn idg(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("idg").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn golden(name: &str, actual: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    if std::env::var_os("IDG_BLESS").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected =
        std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "golden {name} differs");
}

#[test]
fn solve_report_golden_risk_averse() {
    let (code, out, err) = idg(&["solve", &fixture("betpass_risk_averse.idg.json")]);
    assert_eq!(code, 0, "{err}");
    golden("betpass_risk_averse.solve.txt", &out);
}

#[test]
fn solve_report_golden_wildcatter() {
    let (code, out, err) = idg(&["solve", &fixture("wildcatter.idg.json")]);
    assert_eq!(code, 0, "{err}");
    assert!(out.starts_with("optimal value: 22.5\n"));
    golden("wildcatter.solve.txt", &out);
}

#[test]
fn solve_output_is_deterministic() {
    let a = idg(&["solve", &fixture("two_stage.idg.json")]);
    let b = idg(&["solve", &fixture("two_stage.idg.json")]);
    assert_eq!(a, b);
    assert_eq!(a.0, 0);
}

#[test]
fn json_report() {
    let (code, out, _) = idg(&["--format", "json", "solve", &fixture("betpass.idg.json")]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["optimal_value"], 10.0);
    assert_eq!(v["policies"][0]["rows"][0]["choice"], "bet");
}

#[test]
fn precision_flag() {
    let (_, out, _) = idg(&[
        "solve",
        "--precision",
        "3",
        &fixture("betpass_risk_averse.idg.json"),
    ]);
    assert!(out.starts_with("optimal value: 4.72\n"), "{out}");
    let (code, _, _) = idg(&["solve", "--precision", "0", &fixture("betpass.idg.json")]);
    assert_eq!(code, 2);
}

#[test]
fn voi_command() {
    let (code, out, _) = idg(&[
        "voi",
        &fixture("betpass.idg.json"),
        "--from",
        "C",
        "--to",
        "D",
    ]);
    assert_eq!(code, 0);
    assert_eq!(out, "value of information: 30\n");
    let (code, _, err) = idg(&[
        "voi",
        &fixture("betpass.idg.json"),
        "--from",
        "C",
        "--to",
        "V",
    ]);
    assert_eq!(code, 1);
    assert!(err.contains("not a decision"), "{err}");
}

#[test]
fn stats_and_lottery() {
    let (code, out, _) = idg(&["stats", &fixture("wildcatter.idg.json")]);
    assert_eq!(code, 0);
    let rows: Vec<Vec<&str>> = out
        .lines()
        .map(|l| l.split_whitespace().collect())
        .collect();
    assert!(
        rows.contains(&vec!["Test", "22.5", "22.5", "87.4571"]),
        "{out}"
    );
    let (code, _, err) = idg(&[
        "stats",
        &fixture("wildcatter.idg.json"),
        "--decision",
        "drill",
    ]);
    assert_eq!(code, 1);
    assert!(err.contains("not the first decision"), "{err}");

    let (code, out, _) = idg(&[
        "--format",
        "json",
        "lottery",
        &fixture("wildcatter.idg.json"),
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["statistics"]["certain_equivalent"], 22.5);
    assert_eq!(v["atoms"].as_array().unwrap().len(), 4);
}

#[test]
fn reverse_writes_valid_diagram() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("reversed.idg.json");
    let out_str = out_path.to_str().unwrap();
    let (code, _, err) = idg(&[
        "reverse",
        &fixture("oil_seismic.idg.json"),
        "oil",
        "seismic",
        "--out",
        out_str,
    ]);
    assert_eq!(code, 0, "{err}");
    let d = load(&std::fs::read(&out_path).unwrap()).unwrap();
    assert!(validate(&d).is_valid());
    assert!(d.has_arc(&"seismic".into(), &"oil".into()));

    let (code, _, err) = idg(&[
        "reverse",
        &fixture("oil_seismic.idg.json"),
        "seismic",
        "oil",
    ]);
    assert_eq!(code, 1);
    assert!(err.contains("no arc"), "{err}");
}

#[test]
fn reverse_with_alternate_path_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("chain.idg.json");
    std::fs::write(
        &src,
        idg_core::io::save(&fixtures::chance_chain_with_shortcut()),
    )
    .unwrap();
    let (code, _, err) = idg(&["reverse", src.to_str().unwrap(), "a", "c"]);
    assert_eq!(code, 1);
    assert!(err.contains("alternate path a->c exists"), "{err}");
}

#[test]
fn remove_picks_the_reduction() {
    let (code, out, err) = idg(&["remove", &fixture("betpass.idg.json"), "C"]);
    assert_eq!(code, 0, "{err}");
    let d = load(out.as_bytes()).unwrap();
    assert!(!d.contains(&"C".into()));
    let (code, out, _) = idg(&["remove", &fixture("betpass.idg.json"), "D"]);
    assert_eq!(code, 1, "{out}");
}

#[test]
fn validate_lists_violations() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.idg.json");
    let mut doc: serde_json::Value =
        serde_json::from_slice(&std::fs::read(fixture("betpass.idg.json")).unwrap()).unwrap();
    doc["nodes"][0]["table"] = serde_json::json!([[0.5, 0.6]]);
    std::fs::write(&path, serde_json::to_vec(&doc).unwrap()).unwrap();
    let (code, out, _) = idg(&["validate", path.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(out.contains("ROW_NOT_NORMALIZED"), "{out}");
    assert!(out.contains("row 0 sums to 1.1"), "{out}");

    let (code, out, _) = idg(&["validate", &fixture("wildcatter.idg.json")]);
    assert_eq!((code, out.as_str()), (0, "valid\n"));
}

#[test]
fn renormalize_flag() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("near.idg.json");
    let mut doc: serde_json::Value =
        serde_json::from_slice(&std::fs::read(fixture("betpass.idg.json")).unwrap()).unwrap();
    doc["nodes"][0]["table"] = serde_json::json!([[0.4, 0.6000005]]);
    std::fs::write(&path, serde_json::to_vec(&doc).unwrap()).unwrap();
    let p = path.to_str().unwrap();
    assert_eq!(idg(&["solve", p]).0, 1);
    let (code, out, _) = idg(&["solve", "--renormalize", p]);
    assert_eq!(code, 0);
    assert!(out.starts_with("optimal value: 9.99997\n"), "{out}");
}

#[test]
fn gen_is_seeded() {
    let a = idg(&["gen", "--seed", "7"]);
    let b = idg(&["gen", "--seed", "7"]);
    assert_eq!(a, b);
    let d = load(a.1.as_bytes()).unwrap();
    assert!(validate(&d).is_valid());
    let (_, out, _) = idg(&["gen", "--seed", "7", "--chance-only"]);
    assert_eq!(load(out.as_bytes()).unwrap().decisions().count(), 0);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(idg(&[]).0, 2);
    assert_eq!(idg(&["frobnicate"]).0, 2);
    assert_eq!(idg(&["--format", "yaml", "solve", "x"]).0, 2);
    let (code, out, _) = idg(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("solve"));
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_idg");
    let ok = Command::new(bin)
        .args(["solve", &fixture("betpass.idg.json")])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).starts_with("optimal value: 10"));
    let missing = Command::new(bin)
        .args(["solve", "/nonexistent.idg.json"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(1));
    let usage = Command::new(bin).arg("--nope").output().unwrap();
    assert_eq!(usage.status.code(), Some(2));
}
