use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

use coversumm::io::{self, read_dataset};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_coversumm"));
    c.env_remove("COVERSUMM_SEED");
    c
}

fn ok(mut c: Command) -> Output {
    let out = c.output().unwrap();
    assert!(out.status.success(), "{:?}\n{}", c, String::from_utf8_lossy(&out.stderr));
    out
}

fn gen(dir: &Path, name: &str, extra: &[&str]) -> String {
    let path = dir.join(name).display().to_string();
    let mut c = bin();
    c.args(["gen", "--out", &path]).args(extra);
    ok(c);
    path
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn gen_is_deterministic() {
    let d = TempDir::new().unwrap();
    let args = ["--kind", "uniform", "--n", "300", "--dim", "7", "--seed", "7"];
    let a = gen(d.path(), "a.bin", &args);
    let b = gen(d.path(), "b.bin", &args);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let data = read_dataset(Path::new(&a)).unwrap();
    assert_eq!((data.points.len(), data.dim), (300, 7));

    let lda = gen(d.path(), "l.jsonl", &["--kind", "lda", "--n", "40"]);
    let data = read_dataset(Path::new(&lda)).unwrap();
    assert_eq!(data.dim, 100);
    for p in &data.points {
        assert!((p.vec.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn seed_falls_back_to_environment() {
    let d = TempDir::new().unwrap();
    let args = ["--kind", "adversarial", "--n", "50", "--dim", "3"];
    let a = gen(d.path(), "a.bin", &[&args[..], &["--seed", "11"]].concat());
    let b = d.path().join("b.bin").display().to_string();
    let mut c = bin();
    c.env("COVERSUMM_SEED", "11").args(["gen", "--out", &b]).args(args);
    ok(c);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn run_writes_consistent_outputs() {
    let d = TempDir::new().unwrap();
    let data = gen(d.path(), "u.bin", &["--kind", "uniform", "--n", "800", "--dim", "5", "--seed", "7"]);
    let out = d.path().join("run");
    let mut c = bin();
    c.args(["run", "--data", &data, "--k", "6", "--out", out.to_str().unwrap()]);
    ok(c);

    let csv = fs::read_to_string(out.join("steps.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 800);
    let m = manifest(&out);
    let total_ns: u64 = rows.iter().map(|r| r[1].parse::<u64>().unwrap()).sum();
    let searches: u64 = rows.iter().map(|r| r[2].parse::<u64>().unwrap()).sum();
    let changed = rows.iter().filter(|r| r[7] == "1").count() as u64;
    assert_eq!(m["steps"], 800);
    assert_eq!(m["total_ns"].as_u64(), Some(total_ns));
    assert_eq!(m["reservoir_searches"].as_u64(), Some(searches));
    assert_eq!(rows.last().unwrap()[3].parse::<u64>().unwrap(), searches);
    assert_eq!(m["changed_steps"].as_u64(), Some(changed));
    assert_eq!(m["config"]["engine"]["k"], 6);
    assert_eq!(m["config"]["engine"]["c_max"], 48);
    assert_eq!(m["dataset_sha256"].as_str().unwrap(), read_dataset(Path::new(&data)).unwrap().sha256);

    let lines = io::read_summaries_jsonl(&out.join("summaries.jsonl")).unwrap();
    assert_eq!(lines.len(), 800);
    assert_eq!(lines[799].ids.len(), 6);

    let mut c = bin();
    c.args(["verify", "--data", &data, "--k", "6", "--summaries", out.join("summaries.jsonl").to_str().unwrap()]);
    ok(c);
}

#[test]
fn config_file_and_flag_precedence() {
    let d = TempDir::new().unwrap();
    let data = gen(d.path(), "u.bin", &["--kind", "uniform", "--n", "100", "--dim", "3"]);
    let cfg = d.path().join("cfg.toml");
    fs::write(&cfg, "k = 4\nalpha = 0.5\nseed = 99\n").unwrap();
    let out = d.path().join("o");
    let mut c = bin();
    c.args(["run", "--data", &data, "--config", cfg.to_str().unwrap(), "--alpha", "0.25"])
        .args(["--out", out.to_str().unwrap()]);
    ok(c);
    let m = manifest(&out);
    assert_eq!(m["config"]["engine"]["k"], 4);
    assert_eq!(m["config"]["engine"]["alpha"], 0.25);
    assert_eq!(m["seed"], 99);

    fs::write(&cfg, "kay = 4\n").unwrap();
    let mut c = bin();
    c.args(["run", "--data", &data, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!c.output().unwrap().status.success());
}

#[test]
fn verify_reports_and_exit_codes() {
    let d = TempDir::new().unwrap();
    let data = gen(d.path(), "u.bin", &["--kind", "uniform", "--n", "400", "--dim", "4", "--seed", "3"]);
    let mut c = bin();
    c.args(["verify", "--data", &data, "--algorithm", "coversumm-knn-range"]);
    let report: Value = serde_json::from_slice(&ok(c).stdout).unwrap();
    assert_eq!(report["accuracy_pct"], 100.0);

    let mut c = bin();
    c.args(["verify", "--data", &data, "--algorithm", "random", "--p", "0.01"]);
    let report: Value = serde_json::from_slice(&ok(c).stdout).unwrap();
    assert!(report["accuracy_pct"].as_f64().unwrap() < 100.0);

    let out = d.path().join("o");
    let mut c = bin();
    c.args(["run", "--data", &data, "--out", out.to_str().unwrap()]);
    ok(c);
    let path = out.join("summaries.jsonl");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut v: Value = serde_json::from_str(&lines[41]).unwrap();
    v["ids"].as_array_mut().unwrap().swap(0, 1);
    lines[41] = v.to_string();
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    let mut c = bin();
    c.args(["verify", "--data", &data, "--summaries", path.to_str().unwrap()]);
    let res = c.output().unwrap();
    assert!(!res.status.success());
    let report: Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(report["first_mismatch_step"], 42);
}

#[test]
fn bench_writes_table() {
    let d = TempDir::new().unwrap();
    let data = gen(d.path(), "u.jsonl", &["--kind", "multimodal", "--n", "300", "--dim", "4"]);
    let csv = d.path().join("b.csv");
    let mut c = bin();
    c.args(["bench", "--data", &data, "--algorithms", "brute,coversumm,decay", "--repeats", "2"])
        .args(["--out", csv.to_str().unwrap()]);
    let out = ok(c);
    assert!(String::from_utf8_lossy(&out.stdout).contains("coversumm-lazy"));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().nth(1).unwrap().starts_with("brute,true,2,"));
}

#[test]
fn parallel_entities() {
    let d = TempDir::new().unwrap();
    let a = gen(d.path(), "a.bin", &["--kind", "uniform", "--n", "200", "--dim", "3", "--seed", "1"]);
    let b = gen(d.path(), "b.bin", &["--kind", "uniform", "--n", "250", "--dim", "3", "--seed", "2"]);
    let out = d.path().join("o");
    let mut c = bin();
    c.args(["run", "--data", &a, &b, "--parallel-entities", "2", "--out", out.to_str().unwrap()]);
    ok(c);
    assert_eq!(manifest(&out.join("a"))["steps"], 200);
    assert_eq!(manifest(&out.join("b"))["steps"], 250);
}

#[test]
fn bad_input_fails_cleanly() {
    let d = TempDir::new().unwrap();
    let junk = d.path().join("junk.bin");
    fs::write(&junk, b"CVSM\x01garbage").unwrap();
    let mut c = bin();
    c.args(["run", "--data", junk.to_str().unwrap(), "--out", d.path().join("o").to_str().unwrap()]);
    let res = c.output().unwrap();
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).starts_with("error:"));
}
