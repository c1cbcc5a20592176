use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn pages(file: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/corpus/pages")
        .join(file)
}

fn metaspec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_metaspec"))
        .args(args)
        .output()
        .unwrap()
}

fn run(args: &[&str]) -> (i32, String) {
    let o = metaspec(args);
    (
        o.status.code().unwrap(),
        String::from_utf8(o.stdout).unwrap(),
    )
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn check_bad_pages_reports_m2_failure() {
    let (code, out) = run(&[
        "check",
        s(&pages("pages_bad.mc")),
        "--spec",
        s(&pages("pages.meta")),
    ]);
    assert_eq!(code, 1);
    assert!(out.contains("FAIL M2 in page_alloc"), "{out}");
    assert!(out.contains("witness page=1"));
}

#[test]
fn check_fixed_pages_passes() {
    let (code, out) = run(&[
        "check",
        s(&pages("pages_fixed.mc")),
        "--spec",
        s(&pages("pages.meta")),
        "--driver",
        "main",
    ]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("0 failure(s)"));
}

#[test]
fn missing_file_is_an_input_error() {
    assert_eq!(run(&["check", "nonexistent.mc"]).0, 2);
}

#[test]
fn unknown_driver_is_an_input_error() {
    let (code, _) = run(&["check", s(&pages("pages_fixed.mc")), "--driver", "nope"]);
    assert_eq!(code, 2);
}

#[test]
fn runtime_error_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("oob.mc");
    std::fs::write(&p, "int a[2]; void main() { int k; k = 5; a[k] = 1; }").unwrap();
    assert_eq!(run(&["check", s(&p)]).0, 3);
}

#[test]
fn ill_formed_spec_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("x.mc");
    std::fs::write(&p, "int g; void main() { g = 1; }").unwrap();
    let m = dir.path().join("x.meta");
    std::fs::write(
        &m,
        "/*@ meta X: \\forall function f; \\strong_invariant(f), nothere == 0; */",
    )
    .unwrap();
    assert_eq!(run(&["check", s(&p), "--spec", s(&m)]).0, 2);
    assert_eq!(run(&["lint", s(&p), "--spec", s(&m)]).0, 2);
}

#[test]
fn sidecar_name_clash_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let block = "/*@ meta X: \\forall function f; \\weak_invariant(f), g == 0; */";
    let p = dir.path().join("x.mc");
    std::fs::write(&p, format!("int g;\n{block}\nvoid main() {{ }}")).unwrap();
    let m = dir.path().join("x.meta");
    std::fs::write(&m, block).unwrap();
    let o = metaspec(&["check", s(&p), "--spec", s(&m)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("duplicate"));
    assert_eq!(run(&["check", s(&p)]).0, 0);
}

#[test]
fn transform_writes_default_output_next_to_input() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("pages.mc");
    std::fs::copy(pages("pages_fixed.mc"), &p).unwrap();
    let (code, _) = run(&["transform", s(&p), "--spec", s(&pages("pages.meta"))]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(dir.path().join("pages.annot.mc")).unwrap();
    assert!(text.contains("/*@ requires M1:"));
    assert!(text.contains("assert M2: before_write:"));
}

#[test]
fn transform_output_matches_m1_golden() {
    let dir = tempfile::tempdir().unwrap();
    let meta = dir.path().join("m1.meta");
    let all = std::fs::read_to_string(pages("pages.meta")).unwrap();
    let start = all.find("meta M1").unwrap();
    let end = all.find("meta M2").unwrap();
    std::fs::write(&meta, format!("/*@ {} */", &all[start..end])).unwrap();
    let out = dir.path().join("out.mc");
    let (code, _) = run(&[
        "transform",
        s(&pages("pages_fixed.mc")),
        "--spec",
        s(&meta),
        "-o",
        s(&out),
    ]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&out).unwrap();
    let golden = std::fs::read_to_string(pages("m1_page_alloc.golden.mc")).unwrap();
    let squash = |t: &str| t.split_whitespace().collect::<String>();
    assert!(squash(&text).contains(&squash(&golden)));
}

#[test]
fn transform_to_stdout_and_dump_normalized() {
    let (code, out) = run(&[
        "transform",
        s(&pages("pages_fixed.mc")),
        "-o",
        "-",
        "--dump-normalized",
    ]);
    assert_eq!(code, 0);
    assert_eq!(out.matches("struct Page* page_alloc()").count(), 2);
}

#[test]
fn json_report_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let j = dir.path().join("r.json");
    let (code, _) = run(&[
        "check",
        s(&pages("pages_bad.mc")),
        "--spec",
        s(&pages("pages.meta")),
        "--json",
        s(&j),
    ]);
    assert_eq!(code, 1);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&j).unwrap()).unwrap();
    let fails: Vec<&serde_json::Value> = v["verdicts"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|x| x["verdict"] == "fail")
        .collect();
    assert_eq!(fails[0]["meta"], "M2");
    assert_eq!(fails[0]["witness"]["page"], 1);
}

#[test]
fn oracle_and_diff() {
    let (prog, spec) = (pages("pages_bad.mc"), pages("pages.meta"));
    assert_eq!(run(&["oracle", s(&prog), "--spec", s(&spec)]).0, 1);
    let (code, out) = run(&["diff", s(&prog), "--spec", s(&spec)]);
    assert_eq!(code, 0);
    assert!(out.starts_with("equivalent"));
}

#[test]
fn lint_flags_idle_metas() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("x.mc");
    std::fs::write(
        &p,
        "int g;\n/*@ meta A: \\forall function f; \\writing(f), \\separated(\\written, &g);\n meta B: \\forall function f; \\weak_invariant(f), g == 0; */\nvoid main() { int k; k = 1; }",
    )
    .unwrap();
    let (code, out) = run(&["lint", s(&p)]);
    assert_eq!(code, 0);
    assert!(out.contains("`A` generates no annotation"), "{out}");
    assert!(!out.contains("`B`"), "{out}");
}

#[test]
fn corpus_runs_bundled_and_empty() {
    let (code, out) = run(&["corpus"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("4 case(s), 0 mismatch(es)"));
    assert!(out.contains("transform"));
    let dir = tempfile::tempdir().unwrap();
    let (code, out) = run(&["corpus", s(dir.path())]);
    assert_eq!(code, 0);
    assert!(out.contains("0 case(s)"));
}
