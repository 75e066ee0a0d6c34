use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn codhy(fixture_dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_codhy"))
        .args(args)
        .env("CODHY_FIXTURE_DIR", fixture_dir)
        .env("RUST_LOG", "error")
        .env_remove("CODHY_CACHE_DIR")
        .env_remove("CODHY_LLM_BASE_URL")
        .env_remove("CODHY_SYNERGY_TABLE")
        .output()
        .unwrap()
}

const USE_CASE_A: [&str; 13] = [
    "run", "--biomarker", "EGFR", "--cancer", "Breast Invasive Carcinoma", "--abstracts", "50", "--hypotheses", "4",
    "--provider", "mock", "--seed", "42",
];

#[test]
fn run_writes_a_report_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nested/report.json");
    let mut args = USE_CASE_A.to_vec();
    args.extend(["--out", out.to_str().unwrap()]);
    let res = codhy(&fixtures(), &args);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let report = codhy_core::pipeline::RunReport::from_json(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(report.hypotheses.len(), 4);
    let text = String::from_utf8(res.stdout).unwrap();
    assert!(text.contains("H1 - Afatinib + Palbociclib"), "{text}");
}

#[test]
fn bad_arguments_exit_two() {
    let mut args = USE_CASE_A.to_vec();
    args[8] = "0";
    let res = codhy(&fixtures(), &args);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("n_hypotheses"));

    let mut args = USE_CASE_A.to_vec();
    args.extend(["--variant", "sideways"]);
    assert_eq!(codhy(&fixtures(), &args).status.code(), Some(2));
    assert_eq!(codhy(&fixtures(), &["run", "--biomarker", "EGFR"]).status.code(), Some(2));
    assert_eq!(codhy(&fixtures(), &["eval", "--variants", "full,bogus", "--out", "x"]).status.code(), Some(2));
}

#[test]
fn pipeline_failures_exit_three() {
    // curated files present but empty, and no literature
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("adapters")).unwrap();
    for id in ["drug_targets", "pathways"] {
        std::fs::write(dir.path().join("adapters").join(format!("{id}.jsonl")), "").unwrap();
    }
    let res = codhy(dir.path(), &USE_CASE_A);
    assert_eq!(res.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&res.stderr).contains("empty evidence"));

    let missing = dir.path().join("missing");
    assert_eq!(codhy(&missing, &USE_CASE_A).status.code(), Some(3));
}

#[test]
fn eval_writes_logs_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let scenarios = dir.path().join("scenarios.tsv");
    std::fs::write(&scenarios, "EGFR\tBreast Invasive Carcinoma\nKRAS\tPancreatic Adenocarcinoma\n").unwrap();
    let out = dir.path().join("metrics");
    let res = codhy(
        &fixtures(),
        &[
            "eval",
            "--scenarios",
            scenarios.to_str().unwrap(),
            "--variants",
            "full,llm_only",
            "--out",
            out.to_str().unwrap(),
        ],
    );
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(std::fs::read_dir(out.join("runs")).unwrap().count(), 4);
    let rows: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 2);

    let replayed = codhy(&fixtures(), &["replay", out.to_str().unwrap()]);
    assert_eq!(replayed.status.code(), Some(0));
    assert_eq!(replayed.stdout, res.stdout);
}

#[test]
fn cache_clear_removes_persisted_graphs() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let mut args = vec!["--cache-dir", cache.to_str().unwrap()];
    args.extend(USE_CASE_A);
    assert_eq!(codhy(&fixtures(), &args).status.code(), Some(0));
    assert!(std::fs::read_dir(&cache).unwrap().count() >= 2);

    let res = codhy(&fixtures(), &["cache", "clear", "--cache-dir", cache.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0));
    assert_eq!(String::from_utf8(res.stdout).unwrap().trim(), "removed 2 cache files");
    assert_eq!(std::fs::read_dir(&cache).unwrap().count(), 0);
    assert_eq!(codhy(&fixtures(), &["cache", "clear"]).status.code(), Some(2));
}
