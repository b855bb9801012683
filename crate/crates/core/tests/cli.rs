use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(file: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data").join(file)
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clinfed"))
        .arg("--data-dir")
        .arg(dir)
        .args(args)
        .env_remove("CLINFED_DATA_DIR")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path(p: PathBuf) -> String {
    p.to_string_lossy().into_owned()
}

/// A data directory with the sample registry, ontology and X-ray records.
fn seeded() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["metadata", "define", &path(data("registry.json"))]);
    ok(dir.path(), &["ontology", "load", &path(data("anatomy.ont"))]);
    ok(dir.path(), &["data", "ingest-csv", &path(data("xray.csv")), "--mapping", &path(data("xray_mapping.json"))]);
    dir
}

fn table_keys(text: &str) -> BTreeSet<(String, String)> {
    text.lines()
        .skip(1)
        .filter_map(|l| {
            let mut cells = l.split_whitespace();
            Some((cells.next()?.to_string(), cells.next()?.to_string()))
        })
        .collect()
}

fn jsonl_keys(text: &str) -> BTreeSet<(String, String)> {
    text.lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .filter(|v| v.get("pseudonym").is_some())
        .map(|v| (v["pseudonym"].as_str().unwrap().to_string(), v["event_id"].as_str().unwrap().to_string()))
        .collect()
}

#[test]
fn table_and_jsonl_agree() {
    let dir = seeded();
    let q = r#"FIND events WHERE concept = "hec:Jaw""#;
    let table = table_keys(&ok(dir.path(), &["query", "run", q]));
    let jsonl = jsonl_keys(&ok(dir.path(), &["--format", "jsonl", "query", "run", q]));
    assert_eq!(table.len(), 3);
    assert_eq!(table, jsonl);
    let literal = jsonl_keys(&ok(dir.path(), &["--format", "jsonl", "query", "run", "--no-enhance", q]));
    assert_eq!(literal.len(), 2);
    assert!(literal.is_subset(&jsonl));
}

#[test]
fn exit_codes() {
    let dir = seeded();
    let syntax = run(dir.path(), &["query", "run", "FIND events WHERE"]);
    assert_eq!(syntax.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&syntax.stderr).starts_with("error[SyntaxError]: 1:"));

    let stale = run(dir.path(), &["query", "run", "FIND events WHERE Nope = 1"]);
    assert_eq!(stale.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&stale.stderr).starts_with("error[StaleMetadata]"));

    let unknown = run(dir.path(), &["query", "run", r#"FIND events WHERE concept = "hec:Nothing""#]);
    assert_eq!(unknown.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&unknown.stderr).starts_with("error[UnknownConcept]"));

    assert_eq!(run(dir.path(), &["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["data", "view"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn an_empty_data_dir_has_no_metadata() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ok(dir.path(), &["--format", "jsonl", "query", "run", "--no-enhance", "FIND events"]), "");
    let out = run(dir.path(), &["query", "run", "--no-enhance", "FIND events WHERE SysLVol > 1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[StaleMetadata]"));
}

#[test]
fn ingest_view_and_ontology_commands() {
    let dir = seeded();
    let csv = run(dir.path(), &["data", "ingest-csv", &path(data("cardiac.csv")), "--mapping", &path(data("cardiac_mapping.json"))]);
    assert_eq!(csv.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&csv.stdout).contains("3 rows stored, 1 rejected"));
    let view = ok(dir.path(), &["data", "view", "P1", "--level", "organ"]);
    assert!(view.contains("CardiacMRI") && view.contains("XRayImaging"));

    let listing = ok(dir.path(), &["metadata", "list"]);
    assert!(listing.contains("SysLVol"));
    let fragment = ok(dir.path(), &["ontology", "fragment", "hec:Jaw", "--depth", "1"]);
    assert!(fragment.contains("hec:Tooth") && !fragment.contains("hec:Molar"));
    let found = ok(dir.path(), &["ontology", "map-discover", &path(data("dental_local.ont"))]);
    assert!(found.contains("site:LowerJaw") && found.contains("hec:Jaw"));
    let sim = ok(dir.path(), &["ontology", "sim", "hec:Molar", "hec:Tooth", "--counts", &path(data("annotation_counts.json"))]);
    assert!(sim.chars().any(|c| c.is_ascii_digit()));
}

#[test]
fn federation_demo_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["--format", "jsonl", "fed", "demo", "--write", &path(dir.path().join("fed"))]);
    assert_eq!(jsonl_keys(&out).len(), 3);
    let config = path(dir.path().join("fed/federation.json"));
    let again = ok(dir.path(), &["--format", "jsonl", "--federation", &config, "--ontology", &path(dir.path().join("fed/global.ont")), "fed", "query", clinfed::federation::demo::JAW_QUERY]);
    assert_eq!(jsonl_keys(&again), jsonl_keys(&out));
    let partial = ok(dir.path(), &["fed", "demo", "--fail", "node-b"]);
    assert!(partial.contains("partial"));
}
