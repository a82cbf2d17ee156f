use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use kgda_core::corpus::{
    partition as split, preprocess, read_raw_corpus, read_sentences, write_sentences, Sentence,
    SubCorpus,
};
use kgda_core::discovery::{CandidateEntity, CandidateTriple};
use kgda_core::eval::{
    eval_ner_heldout, eval_re_heldout, import_manual, sample_for_manual, EvalReport,
};
use kgda_core::kg::{export_kg, load_kg, KnowledgeGraph};
use kgda_core::models::{load_ner, load_re, Backend};
use kgda_core::pipeline::{
    has_checkpoint, run_sentences, Ablation, RunConfig, RunDir, RunOptions, RunSummary,
};
use kgda_core::util::{read_jsonl, write_atomic, write_json_pretty};
use kgda_core::Error;
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use crate::{
    CliError, CliResult, Common, EvalArgs, ExportArgs, ExportFormat, IngestArgs, KgPaths,
    ReportArgs, RunArgs, SampleArgs,
};

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingInput(path.to_path_buf()),
        _ => Error::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })?;
    serde_json::from_slice(&bytes).map_err(|e| {
        CliError::Core(Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            msg: e.to_string(),
        })
    })
}

/// Configuration file (or `fallback` when none is given), then flags.
fn base_config(common: &Common, fallback: Option<&Path>) -> CliResult<RunConfig> {
    let mut cfg = match (&common.config, fallback) {
        (Some(p), _) => read_json(p)?,
        (None, Some(p)) if p.exists() => read_json(p)?,
        _ => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run_config(a: &RunArgs) -> CliResult<RunConfig> {
    let mut cfg = base_config(&a.common, None)?;
    if let Some(b) = &a.backend {
        cfg.backend = b.parse::<Backend>().map_err(|e| usage(e.to_string()))?;
    }
    if let Some(x) = &a.ablation {
        cfg.ablation = x.parse::<Ablation>().map_err(|e| usage(e.to_string()))?;
    }
    if let Some(n) = a.partitions {
        cfg.partitions = n;
    }
    if a.heldout.is_some() {
        cfg.heldout = a.heldout;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn kg_paths(kg: &KgPaths) -> CliResult<(&Path, &Path)> {
    match (&kg.kg_entities, &kg.kg_triples) {
        (Some(e), Some(t)) => Ok((e, t)),
        _ => Err(usage("--kg-entities and --kg-triples are required")),
    }
}

fn load_graph(kg: &KgPaths) -> CliResult<KnowledgeGraph> {
    let (e, t) = kg_paths(kg)?;
    let (kg, report) = load_kg(e, t)?;
    if report.duplicate_triples > 0 {
        log::info!("{} duplicate KG triples ignored", report.duplicate_triples);
    }
    Ok(kg)
}

fn load_sentences(a: &RunArgs, cfg: &RunConfig) -> CliResult<Vec<Sentence>> {
    match (&a.corpus, &a.sentences) {
        (Some(c), _) => {
            let raw = read_raw_corpus(c)?;
            if raw.skipped > 0 {
                log::warn!(
                    "{}: {} undecodable documents skipped",
                    c.display(),
                    raw.skipped
                );
            }
            Ok(preprocess(raw.iter(), &cfg.preprocess))
        }
        (None, Some(s)) => Ok(read_sentences(s)?),
        (None, None) => Err(usage("one of --corpus or --sentences is required")),
    }
}

fn sizes(parts: &[SubCorpus]) -> Vec<usize> {
    parts.iter().map(SubCorpus::len).collect()
}

pub fn ingest(a: &IngestArgs) -> CliResult<Value> {
    let cfg = base_config(&a.common, None)?;
    let raw = read_raw_corpus(&a.corpus)?;
    let sentences = preprocess(raw.iter(), &cfg.preprocess);
    let mut out = json!({
        "documents": raw.docs.len(),
        "skipped_documents": raw.skipped,
        "sentences": sentences.len(),
    });
    if a.kg.kg_entities.is_some() || a.kg.kg_triples.is_some() {
        let kg = load_graph(&a.kg)?;
        out["kg_entities"] = json!(kg.entity_count());
        out["kg_triples"] = json!(kg.triple_count());
    }
    let path = a.out.join("sentences.jsonl");
    if !a.common.dry_run {
        write_sentences(&path, &sentences)?;
    }
    out["output"] = json!(path);
    Ok(out)
}

pub fn partition(a: &RunArgs) -> CliResult<Value> {
    let cfg = run_config(a)?;
    let sentences = load_sentences(a, &cfg)?;
    let parts = split(&sentences, cfg.partitions, cfg.seed)?;
    let dir = RunDir::new(&a.out);
    if !a.common.dry_run {
        for p in &parts {
            write_sentences(&dir.partition(p.index), &p.sentences)?;
        }
    }
    Ok(json!({
        "sentences": sentences.len(),
        "partitions": sizes(&parts),
        "heldout": cfg.heldout_index(),
        "output": dir.root.join("partitions"),
    }))
}

pub fn run(a: &RunArgs) -> CliResult<Value> {
    let cfg = run_config(a)?;
    let kg = load_graph(&a.kg)?;
    let sentences = load_sentences(a, &cfg)?;
    let dir = RunDir::new(&a.out);

    if a.common.dry_run {
        let parts = split(&sentences, cfg.partitions, cfg.seed)?;
        let heldout = cfg.heldout_index();
        let order: Vec<usize> = parts
            .iter()
            .map(|p| p.index)
            .filter(|&i| i != heldout)
            .collect();
        return Ok(json!({
            "plan": {
                "config": cfg,
                "kg_entities": kg.entity_count(),
                "kg_triples": kg.triple_count(),
                "sentences": sentences.len(),
                "partition_sizes": sizes(&parts),
                "heldout": heldout,
                "training_order": order,
                "resume_from_checkpoint": a.resume && has_checkpoint(&dir.checkpoint()),
                "out": dir.root,
            }
        }));
    }

    let opts = RunOptions {
        resume: a.resume,
        stop_after: a.stop_after,
    };
    let outcome = run_sentences(&cfg, &kg, &sentences, &dir.root, opts)?;
    let s = &outcome.summary;
    Ok(json!({
        "out": dir.root,
        "iterations": s.iterations.len(),
        "overlap_triples": s.overlap_triples,
        "e_conf": s.e_conf,
        "t_conf": s.t_conf,
        "new_relation_triples": s.new_relation_triples,
        "new_entity_triples": s.new_entity_triples,
        "kg_entities": s.kg_entities,
        "kg_triples": s.kg_triples,
        "ner_f1": outcome.eval_ner.as_ref().map(|r| r.f1),
        "re_f1": outcome.eval_re.as_ref().map(|r| r.f1),
    }))
}

fn run_dir(out: &Option<PathBuf>) -> CliResult<RunDir> {
    out.as_ref()
        .map(RunDir::new)
        .ok_or_else(|| usage("--out <run directory> is required"))
}

/// The directory holding a run's final models.
fn final_models(dir: &RunDir) -> CliResult<PathBuf> {
    let summary = dir.reports().join("summary.json");
    if summary.exists() {
        let s: RunSummary = read_json(&summary)?;
        return Ok(dir.root.join(s.final_models));
    }
    // an interrupted run: take the latest iteration that saved models
    let mut best = None;
    if let Ok(entries) = fs::read_dir(dir.root.join("models")) {
        for e in entries.flatten() {
            let name = e.file_name().to_string_lossy().into_owned();
            if let Some(i) = name
                .strip_prefix("iter_")
                .and_then(|n| n.parse::<usize>().ok())
            {
                if e.path().join("ner.model").exists() && best.as_ref().is_none_or(|(b, _)| i > *b)
                {
                    best = Some((i, e.path()));
                }
            }
        }
    }
    best.map(|(_, p)| p)
        .ok_or_else(|| CliError::Core(Error::MissingInput(dir.root.join("models"))))
}

fn scores(r: &EvalReport) -> Value {
    json!({"precision": r.precision, "recall": r.recall, "f1": r.f1, "support": r.support})
}

pub fn eval(a: &EvalArgs) -> CliResult<Value> {
    if let Some(manual) = &a.manual {
        let report = import_manual(manual)?;
        if let (Some(out), false) = (&a.out, a.common.dry_run) {
            write_json_pretty(&RunDir::new(out).reports().join("manual.json"), &report)?;
        }
        return Ok(json!({"manual": report}));
    }

    let dir = run_dir(&a.out)?;
    let mut cfg = base_config(&a.common, Some(&dir.config()))?;
    if let Some(b) = &a.backend {
        cfg.backend = b.parse::<Backend>().map_err(|e| usage(e.to_string()))?;
    }
    let kg = load_graph(&a.kg)?;
    let index = cfg.heldout_index();
    let heldout = SubCorpus {
        index,
        sentences: read_sentences(&dir.partition(index))?,
    };
    let models = final_models(&dir)?;
    let ner = load_ner(&cfg.backend, &models.join("ner.model"), &cfg.models)?;
    let re = load_re(&cfg.backend, &models.join("re.model"), &cfg.models)?;
    if a.common.dry_run {
        return Ok(
            json!({"plan": {"heldout": index, "sentences": heldout.len(), "models": models}}),
        );
    }
    let n = eval_ner_heldout(ner.as_ref(), &heldout, &kg)?;
    let negatives = cfg.eval_include_negatives.then(|| cfg.distant());
    let r = eval_re_heldout(re.as_ref(), &heldout, &kg, negatives.as_ref())?;
    write_json_pretty(&dir.reports().join("eval_ner.json"), &n)?;
    write_json_pretty(&dir.reports().join("eval_re.json"), &r)?;
    Ok(json!({"heldout": index, "ner": scores(&n), "re": scores(&r)}))
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn to_dot(kg: &KnowledgeGraph) -> String {
    let mut s = String::from("digraph kg {\n");
    for e in kg.entities() {
        let label = format!(
            "{}\\n({})",
            e.canonical.replace('\\', "\\\\").replace('"', "\\\""),
            e.etype
        );
        let style = if e.provenance.as_str() == "discovered" {
            ", style=dashed"
        } else {
            ""
        };
        let _ = writeln!(s, "  {} [label=\"{label}\"{style}];", quote(e.id.as_str()));
    }
    for t in kg.triples() {
        let _ = writeln!(
            s,
            "  {} -> {} [label={}];",
            quote(t.head.as_str()),
            quote(t.tail.as_str()),
            quote(t.rel.as_str())
        );
    }
    s.push_str("}\n");
    s
}

pub fn export(a: &ExportArgs) -> CliResult<Value> {
    let kg_dir = RunDir::new(&a.out).kg_out();
    let (kg, _) = load_kg(&kg_dir.join("entities.tsv"), &kg_dir.join("triples.tsv"))?;
    if !a.common.dry_run {
        match a.format {
            ExportFormat::Tsv => export_kg(&kg, &a.to)?,
            ExportFormat::Json => {
                let entities: Vec<_> = kg.entities().collect();
                write_json_pretty(
                    &a.to,
                    &json!({"entities": entities, "triples": kg.triples()}),
                )?;
            }
            ExportFormat::Dot => write_atomic(&a.to, to_dot(&kg).as_bytes())?,
        }
    }
    Ok(json!({"entities": kg.entity_count(), "triples": kg.triple_count(), "output": a.to}))
}

pub fn sample_manual(a: &SampleArgs) -> CliResult<Value> {
    let dir = RunDir::new(&a.out);
    let cfg = base_config(&a.common, Some(&dir.config()))?;
    let e_conf: Vec<CandidateEntity> = read_jsonl(&dir.reports().join("e_conf.jsonl"))?;
    let t_conf: Vec<CandidateTriple> = read_jsonl(&dir.reports().join("t_conf.jsonl"))?;
    let kg_dir = dir.kg_out();
    let (kg, _) = load_kg(&kg_dir.join("entities.tsv"), &kg_dir.join("triples.tsv"))?;
    let to =
        a.to.clone()
            .unwrap_or_else(|| dir.reports().join("manual_sample.csv"));
    if a.common.dry_run {
        return Ok(
            json!({"plan": {"e_conf": e_conf.len(), "t_conf": t_conf.len(), "k": a.k, "output": to}}),
        );
    }
    let summary = sample_for_manual(&e_conf, &t_conf, &kg, a.k, cfg.seed, &to)?;
    Ok(json!({"rows": summary.rows, "short": summary.short, "output": to}))
}

pub fn report(a: &ReportArgs) -> CliResult<Value> {
    let dir = RunDir::new(&a.out);
    let summary: RunSummary = read_json(&dir.reports().join("summary.json"))?;
    let mut out = json!({"summary": summary});
    for (key, file) in [
        ("ner", "eval_ner.json"),
        ("re", "eval_re.json"),
        ("manual", "manual.json"),
    ] {
        let p = dir.reports().join(file);
        if p.exists() {
            let v: Value = read_json(&p)?;
            out[key] = match key {
                "manual" => v,
                _ => {
                    json!({"precision": v["precision"], "recall": v["recall"], "f1": v["f1"], "support": v["support"]})
                }
            };
        }
    }
    Ok(out)
}
