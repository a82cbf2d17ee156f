use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kgda_core::kg::export_kg;
use kgda_core::synth::{generate, SynthConfig};
use serde_json::{json, Value};
use tempfile::TempDir;

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let world = generate(&SynthConfig {
            sentences: 400,
            triples: 30,
            planted_triples: 10,
            ..SynthConfig::default()
        })
        .unwrap();
        export_kg(&world.kg, &dir.path().join("kg")).unwrap();
        let docs: Vec<String> = world
            .sentences
            .iter()
            .map(|s| json!({"doc_id": s.id, "text": s.text}).to_string())
            .collect();
        fs::write(dir.path().join("corpus.jsonl"), docs.join("\n")).unwrap();
        Fixture { dir }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn inputs(&self) -> Vec<String> {
        vec![
            "--corpus".into(),
            self.path("corpus.jsonl").display().to_string(),
            "--kg-entities".into(),
            self.path("kg/entities.tsv").display().to_string(),
            "--kg-triples".into(),
            self.path("kg/triples.tsv").display().to_string(),
        ]
    }
}

fn kgda(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kgda"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn summary(out: &Output) -> Value {
    let stdout = String::from_utf8_lossy(&out.stdout);
    let line = stdout.lines().last().unwrap_or_else(|| {
        panic!(
            "no summary line; stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        )
    });
    serde_json::from_str(line).unwrap()
}

fn run(fx: &Fixture, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run".to_string()];
    args.extend(fx.inputs());
    args.extend([
        "--out".into(),
        out.display().to_string(),
        "--seed".into(),
        "4".into(),
    ]);
    args.extend(extra.iter().map(|s| s.to_string()));
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    kgda(&refs)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn full_workflow() {
    let fx = Fixture::new();
    let out = fx.path("run1");
    let r = run(&fx, &out, &["--threads", "2"]);
    assert_eq!(
        r.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );
    let line = summary(&r);
    assert_eq!(line["command"], "run");
    assert_eq!(line["status"], "ok");
    assert!(out.join("kg_out/entities.tsv").exists());
    assert!(out.join("kg_out/triples.tsv").exists());
    assert!(line["kg_triples"].as_u64().unwrap() > 0);

    let r = kgda(&["report", "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(0));
    assert_eq!(summary(&r)["summary"]["kg_triples"], line["kg_triples"]);

    let (ent, tri) = (fx.path("kg/entities.tsv"), fx.path("kg/triples.tsv"));
    let r = kgda(&[
        "eval",
        "--out",
        s(&out),
        "--kg-entities",
        s(&ent),
        "--kg-triples",
        s(&tri),
    ]);
    assert_eq!(
        r.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );
    let f1 = summary(&r)["ner"]["f1"].as_f64().unwrap();
    assert_eq!(Some(f1), line["ner_f1"].as_f64());

    for (format, to) in [
        ("tsv", "export_tsv"),
        ("json", "graph.json"),
        ("dot", "graph.dot"),
    ] {
        let to = fx.path(to);
        let r = kgda(&[
            "export",
            "--out",
            s(&out),
            "--format",
            format,
            "--to",
            s(&to),
        ]);
        assert_eq!(r.status.code(), Some(0), "{format}");
        assert_eq!(summary(&r)["triples"], line["kg_triples"]);
    }
    assert_eq!(
        fs::read(fx.path("export_tsv/triples.tsv")).unwrap(),
        fs::read(out.join("kg_out/triples.tsv")).unwrap()
    );
    assert!(fs::read_to_string(fx.path("graph.dot"))
        .unwrap()
        .starts_with("digraph kg {"));

    let csv = fx.path("sample.csv");
    let r = kgda(&[
        "sample-manual",
        "--out",
        s(&out),
        "--k",
        "3",
        "--to",
        s(&csv),
    ]);
    assert_eq!(r.status.code(), Some(0));
    let text = fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert!(!rows.is_empty());
    // judge every row correct
    let judged: Vec<String> = std::iter::once(text.lines().next().unwrap().to_string())
        .chain(rows.iter().map(|r| format!("{}correct", r)))
        .collect();
    fs::write(&csv, judged.join("\n")).unwrap();
    let r = kgda(&["eval", "--manual", s(&csv), "--out", s(&out)]);
    assert_eq!(
        r.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );
    for (_, v) in summary(&r)["manual"]["per_category"].as_object().unwrap() {
        if v["judged"].as_u64().unwrap() > 0 {
            assert_eq!(v["precision"], 1.0);
        }
    }
}

#[test]
fn runs_are_deterministic_and_ingest_round_trips() {
    let fx = Fixture::new();
    let (a, b) = (fx.path("a"), fx.path("b"));
    assert_eq!(run(&fx, &a, &["--threads", "1"]).status.code(), Some(0));

    let sent = fx.path("ingested");
    let r = kgda(&[
        "ingest",
        "--corpus",
        s(&fx.path("corpus.jsonl")),
        "--out",
        s(&sent),
    ]);
    assert_eq!(r.status.code(), Some(0));
    let mut args: Vec<String> = ["run", "--sentences"].map(String::from).to_vec();
    args.push(sent.join("sentences.jsonl").display().to_string());
    args.extend(fx.inputs().into_iter().skip(2));
    args.extend(["--out", s(&b), "--seed", "4"].map(String::from));
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let r = kgda(&refs);
    assert_eq!(
        r.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );

    for f in [
        "kg_out/entities.tsv",
        "kg_out/triples.tsv",
        "reports/summary.json",
    ] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn partition_matches_the_run_layout() {
    let fx = Fixture::new();
    let (a, b) = (fx.path("a"), fx.path("b"));
    let mut args = vec!["partition".to_string()];
    args.extend(fx.inputs().into_iter().take(2));
    args.extend(["--out", s(&a), "--seed", "4"].map(String::from));
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let r = kgda(&refs);
    assert_eq!(r.status.code(), Some(0));
    assert_eq!(summary(&r)["partitions"].as_array().unwrap().len(), 6);
    assert_eq!(run(&fx, &b, &[]).status.code(), Some(0));
    for i in 1..=6 {
        let f = format!("partitions/part_{i}.jsonl");
        assert_eq!(fs::read(a.join(&f)).unwrap(), fs::read(b.join(&f)).unwrap());
    }
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let r = kgda(&["run", "--no-such-flag"]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("Usage"));
}

#[test]
fn bad_flag_values_are_usage_errors() {
    let fx = Fixture::new();
    let out = fx.path("x");
    for extra in [
        ["--backend", "gpu"],
        ["--ablation", "sideways"],
        ["--threads", "0"],
    ] {
        let r = run(&fx, &out, &extra);
        assert_eq!(r.status.code(), Some(1), "{extra:?}");
        assert_eq!(summary(&r)["status"], "error");
    }
}

#[test]
fn missing_kg_file_is_a_data_error() {
    let fx = Fixture::new();
    fs::remove_file(fx.path("kg/triples.tsv")).unwrap();
    let r = run(&fx, &fx.path("x"), &[]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("triples.tsv"));
    assert_eq!(summary(&r)["exit_code"], 2);
}

#[test]
fn invalid_configuration_is_a_data_error() {
    let fx = Fixture::new();
    let r = run(&fx, &fx.path("x"), &["--partitions", "1"]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn dry_run_writes_nothing_and_flags_beat_config() {
    let fx = Fixture::new();
    let cfg = fx.path("cfg.json");
    fs::write(&cfg, r#"{"partitions": 4, "seed": 9, "ratio_n": 0.25}"#).unwrap();
    let out = fx.path("dry");
    let r = run(
        &fx,
        &out,
        &["--dry-run", "--config", s(&cfg), "--partitions", "3"],
    );
    assert_eq!(
        r.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );
    assert!(!out.exists());
    let plan = &summary(&r)["plan"];
    assert_eq!(plan["config"]["partitions"], 3);
    // --seed 4 is passed by the helper and overrides the file's 9
    assert_eq!(plan["config"]["seed"], 4);
    assert_eq!(plan["config"]["ratio_n"], 0.25);
    assert_eq!(plan["partition_sizes"].as_array().unwrap().len(), 3);
    assert_eq!(plan["training_order"], json!([1, 2]));
}

#[test]
fn unknown_config_key_is_rejected() {
    let fx = Fixture::new();
    let cfg = fx.path("cfg.json");
    fs::write(&cfg, r#"{"partitons": 4}"#).unwrap();
    let r = run(&fx, &fx.path("x"), &["--config", s(&cfg)]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn interrupted_run_resumes() {
    let fx = Fixture::new();
    let (a, b) = (fx.path("a"), fx.path("b"));
    assert_eq!(run(&fx, &a, &[]).status.code(), Some(0));
    let r = run(&fx, &b, &["--stop-after", "2"]);
    assert_eq!(r.status.code(), Some(3));
    let r = run(&fx, &b, &["--resume"]);
    assert_eq!(
        r.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );
    assert_eq!(
        fs::read(a.join("kg_out/triples.tsv")).unwrap(),
        fs::read(b.join("kg_out/triples.tsv")).unwrap()
    );
}
