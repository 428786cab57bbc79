use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"{
  "synthetic": {
    "die_width": 200.0, "die_height": 200.0, "source_count": 800, "mean_current": 0.3,
    "hotspots": [{"rect": {"x0": 20.0, "y0": 120.0, "x1": 60.0, "y1": 160.0}, "density_ratio": 4.0}],
    "net_count": 1500,
    "congested": [{"rect": {"x0": 80.0, "y0": 60.0, "x1": 160.0, "y1": 140.0}, "density_ratio": 8.0, "aspect": 4.0}],
    "pad_pitch": 80.0, "pad_offset": 40.0
  }
}"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pdnsynth"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Work {
    dir: tempfile::TempDir,
}

impl Work {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("small.json"), SMALL).unwrap();
        Self { dir }
    }

    fn p(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn gen(&self, out: &str) -> PathBuf {
        let o = run(&[
            "gen",
            "--config",
            s(&self.p("small.json")),
            "--seed",
            "7",
            "--out",
            s(&self.p(out)),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        self.p(out).join("design.json")
    }
}

#[test]
fn gen_is_deterministic() {
    let w = Work::new();
    let a = fs::read(w.gen("a")).unwrap();
    let b = fs::read(w.gen("b")).unwrap();
    assert_eq!(a, b);
    let o = run(&[
        "gen",
        "--config",
        s(&w.p("small.json")),
        "--seed",
        "8",
        "--out",
        s(&w.p("c")),
    ]);
    assert!(o.status.success());
    assert_ne!(a, fs::read(w.p("c/design.json")).unwrap());
}

#[test]
fn synthesize_then_verify_passes() {
    let w = Work::new();
    let design = w.gen("g");
    let o = run(&["synthesize", "--design", s(&design), "--out", s(&w.p("s"))]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "pdn_base.json",
        "pdn_final.json",
        "ir_base.csv",
        "ir_final.csv",
        "congestion.csv",
        "windows.csv",
        "plan.json",
        "iterations.jsonl",
        "manifest.json",
        "report.csv",
        "report.txt",
        "ir_histogram.csv",
        "heatmap_ir.svg",
        "heatmap_congestion.svg",
    ] {
        assert!(w.p("s").join(f).is_file(), "missing {f}");
    }
    let o = run(&["verify", "--design", s(&design), "--pdn", s(&w.p("s/pdn_final.json"))]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS"));
}

#[test]
fn verify_reports_violations_with_exit_one() {
    let w = Work::new();
    let design = w.gen("g");
    let o = run(&["analyze", "--design", s(&design), "--out", s(&w.p("a"))]);
    assert!(o.status.success());
    let mut doc: serde_json::Value = serde_json::from_slice(&fs::read(&design).unwrap()).unwrap();
    doc["technology"]["ir_limit_mv"] = serde_json::json!(20.0);
    let tight = w.p("tight.json");
    fs::write(&tight, serde_json::to_vec(&doc).unwrap()).unwrap();
    let o = run(&["verify", "--design", s(&tight), "--pdn", s(&w.p("a/pdn_base.json"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn report_of_baseline_against_itself_is_all_zero() {
    let w = Work::new();
    let design = w.gen("g");
    assert!(run(&["analyze", "--design", s(&design), "--out", s(&w.p("a"))])
        .status
        .success());
    let m = w.p("a/manifest.json");
    let o = run(&["report", "--base", s(&m), "--modified", s(&m), "--out", s(&w.p("r"))]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(w.p("r/report.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert!(rows.len() >= 10);
    assert!(rows.iter().all(|r| r.ends_with(",0.00%")), "{csv}");
}

#[test]
fn replay_reproduces_artifacts() {
    let w = Work::new();
    let design = w.gen("g");
    assert!(run(&[
        "synthesize",
        "--design",
        s(&design),
        "--out",
        s(&w.p("s")),
        "--alpha",
        "0.6"
    ])
    .status
    .success());
    let o = run(&[
        "replay",
        "--manifest",
        s(&w.p("s/manifest.json")),
        "--out",
        s(&w.p("s2")),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(w.p("s2/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["synthesis"]["alpha"], serde_json::json!(0.6));
    for entry in fs::read_dir(w.p("s")).unwrap() {
        let name = entry.unwrap().file_name();
        if name == "manifest.json" {
            continue;
        }
        assert_eq!(
            fs::read(w.p("s").join(&name)).unwrap(),
            fs::read(w.p("s2").join(&name)).unwrap(),
            "{name:?}"
        );
    }
}

#[test]
fn input_errors_exit_two_with_prefix() {
    let w = Work::new();
    let o = run(&["analyze", "--design", s(&w.p("missing.json")), "--out", s(&w.p("x"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error[io]:"));

    fs::write(w.p("bad.json"), "{\"schema_version\": 99}").unwrap();
    let o = run(&["analyze", "--design", s(&w.p("bad.json")), "--out", s(&w.p("x"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error["));

    let o = run(&[
        "synthesize",
        "--alpha",
        "-1",
        "--design",
        s(&w.p("bad.json")),
        "--out",
        s(&w.p("x")),
    ]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error[usage]:"));
}

#[test]
fn dirty_baseline_is_an_input_error() {
    let w = Work::new();
    let design = w.gen("g");
    let mut doc: serde_json::Value = serde_json::from_slice(&fs::read(&design).unwrap()).unwrap();
    doc["technology"]["ir_limit_mv"] = serde_json::json!(20.0);
    fs::write(w.p("tight.json"), serde_json::to_vec(&doc).unwrap()).unwrap();
    let o = run(&["synthesize", "--design", s(&w.p("tight.json")), "--out", s(&w.p("s"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error[precondition]:"));
}
