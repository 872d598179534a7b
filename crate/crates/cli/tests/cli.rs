use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn logicx(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_logicx"))
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) -> String {
    let o = logicx(out, args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn separable_fixture_gives_one_literal_pair() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ok(
        out,
        &[
            "synth",
            "--n-graphs",
            "100",
            "--motifs",
            "H",
            "--rule",
            "H",
            "--oracle-noise",
            "0.1",
        ],
    );
    ok(out, &["extract", "--depth", "1"]);
    let rules = json(&out.join("rules.json"));
    let text: Vec<&str> = rules["payload"]["text"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert_eq!(text.len(), 2);
    let pred = text[1].strip_suffix(" ⇒ class 1").unwrap();
    assert!(pred.starts_with('p') && !pred.contains(' '));
    assert_eq!(text[0], format!("¬{pred} ⇒ class 0"));
}

#[test]
fn full_pipeline_is_deterministic_and_timed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ok(
        out,
        &[
            "--seed",
            "3",
            "synth",
            "--n-graphs",
            "200",
            "--oracle-noise",
            "0.2",
        ],
    );
    ok(out, &["--seed", "3", "extract"]);
    ok(out, &["--seed", "3", "ground"]);
    ok(out, &["--seed", "3", "infer"]);
    let table = ok(out, &["--seed", "3", "evaluate"]);
    assert!(table.contains("Fid_D (%)"));
    assert!(table.contains("time (s)"));
    let first = fs::read(out.join("report.json")).unwrap();
    ok(out, &["--seed", "3", "evaluate"]);
    assert_eq!(first, fs::read(out.join("report.json")).unwrap());

    let manifest = json(&out.join("manifest.json"));
    let runs = manifest["runs"].as_array().unwrap();
    let commands: Vec<&str> = runs
        .iter()
        .map(|r| r["command"].as_str().unwrap())
        .collect();
    assert_eq!(
        commands,
        ["synth", "extract", "ground", "infer", "evaluate", "evaluate"]
    );
    let extract = &runs[1];
    let stages: Vec<&str> = extract["timings"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t["stage"].as_str().unwrap())
        .collect();
    assert_eq!(stages, ["predicates", "rules"]);
    assert!(runs[2]["timings"][0]["seconds"].as_f64().unwrap() >= 0.0);

    for name in [
        "rules.json",
        "predicates.json",
        "grounding.json",
        "report.json",
        "inference.json",
    ] {
        let a = json(&out.join(name));
        assert_eq!(a["schema_version"], 1, "{name}");
        assert_eq!(a["seed"], 3, "{name}");
        assert!(a["command"].is_string(), "{name}");
    }
}

#[test]
fn results_do_not_depend_on_jobs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, jobs) in [(a.path(), "1"), (b.path(), "4")] {
        ok(
            dir,
            &[
                "--jobs",
                jobs,
                "synth",
                "--n-graphs",
                "80",
                "--oracle-noise",
                "0.2",
            ],
        );
        ok(dir, &["--jobs", jobs, "extract"]);
        ok(dir, &["--jobs", jobs, "ground"]);
    }
    for name in ["rules.json", "predicates.json", "grounding.json"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn errors_are_structured_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = logicx(dir.path(), &["extract", "--dataset", "missing.jsonl"]);
    assert!(!o.status.success());
    let err: Value = serde_json::from_str(String::from_utf8_lossy(&o.stderr).trim()).unwrap();
    assert_eq!(err["error"]["kind"], "io");
    assert!(err["error"]["message"]
        .as_str()
        .unwrap()
        .contains("missing.jsonl"));

    let o = logicx(dir.path(), &["synth", "--rule", "H&X"]);
    assert!(!o.status.success());
    let err: Value = serde_json::from_str(String::from_utf8_lossy(&o.stderr).trim()).unwrap();
    assert_eq!(err["error"]["kind"], "config");
}

#[test]
fn artifact_kind_is_checked() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ok(out, &["synth", "--n-graphs", "60", "--oracle-noise", "0.2"]);
    ok(out, &["extract"]);
    let o = logicx(
        out,
        &[
            "ground",
            "--predicates",
            out.join("rules.json").to_str().unwrap(),
        ],
    );
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("expected \\\"predicates\\\""));
}

#[test]
fn ingest_train_and_export_dot() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let src = out.join("raw.jsonl");
    let mut lines = String::new();
    for i in 0..12 {
        let (n, edges, y) = if i % 2 == 0 {
            (3, "[[0,1],[1,2],[2,0]]", 1)
        } else {
            (3, "[[0,1],[1,2]]", 0)
        };
        lines.push_str(&format!(
            "{{\"id\":\"g{i}\",\"num_nodes\":{n},\"edges\":{edges},\"x\":[[1,0],[0,1],[1,0]],\"y\":{y}}}\n"
        ));
    }
    fs::write(&src, lines).unwrap();
    let msg = ok(
        out,
        &[
            "ingest",
            "--dataset",
            src.to_str().unwrap(),
            "--symbols",
            "C,O",
        ],
    );
    assert!(msg.starts_with("12 graphs, 2 classes"));
    let summary = json(&out.join("dataset.json"));
    assert_eq!(summary["payload"]["symbols"], serde_json::json!(["C", "O"]));

    ok(
        out,
        &[
            "train-ref-gnn",
            "-L",
            "1",
            "--hidden",
            "4",
            "--epochs",
            "200",
            "--lr",
            "0.5",
        ],
    );
    assert!(out.join("model.json").exists());
    let emb = fs::read_to_string(out.join("embeddings.jsonl")).unwrap();
    assert!(emb.lines().next().unwrap().contains("\"L\":1"));

    ok(out, &["extract", "--emb-min-leaf", "1"]);
    ok(out, &["ground"]);
    let msg = ok(out, &["export-dot"]);
    assert!(msg.contains("DOT files"));
    let dots: Vec<_> = fs::read_dir(out.join("dot")).unwrap().collect();
    assert!(!dots.is_empty());
    for d in dots {
        let text = fs::read_to_string(d.unwrap().path()).unwrap();
        assert!(text.starts_with("graph \""));
    }
}
