use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::discovery::{CandidateEntity, CandidateTriple, TripleCategory};
use crate::kg::{EntityRef, KnowledgeGraph};
use crate::util::{create_output, open_input, rng_for};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ManualCategory {
    #[serde(rename = "E_conf")]
    Entity,
    #[serde(rename = "T_R")]
    NewRelation,
    #[serde(rename = "T_E")]
    NewEntity,
}

impl ManualCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            ManualCategory::Entity => "E_conf",
            ManualCategory::NewRelation => "T_R",
            ManualCategory::NewEntity => "T_E",
        }
    }
}

impl fmt::Display for ManualCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManualRow {
    pub category: ManualCategory,
    pub payload: String,
    /// `correct`, `incorrect`, or empty while unjudged.
    pub verdict: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub rows: BTreeMap<ManualCategory, usize>,
    /// Categories holding fewer than `k` items; all of them were taken.
    pub short: Vec<ManualCategory>,
}

fn render_ref(r: &EntityRef, kg: &KnowledgeGraph) -> String {
    match r {
        EntityRef::Known(id) => match kg.entity(id.as_str()) {
            Some(rec) => format!("{} [{}] ({})", rec.canonical, id, rec.etype),
            None => id.to_string(),
        },
        EntityRef::Candidate { surface, etype } => format!("{surface} ({etype})"),
    }
}

fn triple_payload(t: &CandidateTriple, kg: &KnowledgeGraph) -> String {
    format!(
        "{} | {} | {}",
        render_ref(&t.head, kg),
        t.rel,
        render_ref(&t.tail, kg)
    )
}

fn pick<T>(items: &[T], k: usize, seed: u64, label: &str) -> Vec<usize> {
    if k >= items.len() {
        return (0..items.len()).collect();
    }
    let mut idx = sample(&mut rng_for(seed, label), items.len(), k).into_vec();
    idx.sort_unstable();
    idx
}

/// Writes a CSV with up to `k` uniformly sampled items per category and an
/// empty verdict column. Nothing at all is written when there are no rows.
pub fn sample_for_manual(
    e_conf: &[CandidateEntity],
    t_conf: &[CandidateTriple],
    kg: &KnowledgeGraph,
    k: usize,
    seed: u64,
    path: &Path,
) -> Result<SampleSummary> {
    let mut rows = Vec::new();
    let mut summary = SampleSummary::default();
    let mut note = |cat: ManualCategory, available: usize, taken: usize| {
        summary.rows.insert(cat, taken);
        if available < k {
            log::warn!("{cat}: only {available} items available, taking all");
            summary.short.push(cat);
        }
    };

    let idx = pick(e_conf, k, seed, "manual:E_conf");
    note(ManualCategory::Entity, e_conf.len(), idx.len());
    rows.extend(idx.into_iter().map(|i| ManualRow {
        category: ManualCategory::Entity,
        payload: format!("{} ({})", e_conf[i].surface, e_conf[i].etype),
        verdict: String::new(),
    }));

    for (cat, tc) in [
        (ManualCategory::NewRelation, TripleCategory::NewRelation),
        (ManualCategory::NewEntity, TripleCategory::NewEntity),
    ] {
        let items: Vec<&CandidateTriple> = t_conf.iter().filter(|t| t.category == tc).collect();
        let idx = pick(&items, k, seed, &format!("manual:{cat}"));
        note(cat, items.len(), idx.len());
        rows.extend(idx.into_iter().map(|i| ManualRow {
            category: cat,
            payload: triple_payload(items[i], kg),
            verdict: String::new(),
        }));
    }

    let mut w = csv::Writer::from_writer(create_output(path)?);
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryPrecision {
    pub correct: usize,
    pub judged: usize,
    pub precision: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ManualReport {
    pub per_category: BTreeMap<ManualCategory, CategoryPrecision>,
    /// 1-based data rows left without a verdict; excluded from precision.
    pub unjudged_rows: Vec<usize>,
}

/// Reads a judged sample and computes precision per category.
pub fn import_manual(path: &Path) -> Result<ManualReport> {
    let mut reader = csv::Reader::from_reader(open_input(path)?);
    let mut report = ManualReport::default();
    let mut rows = 0usize;
    for (i, rec) in reader.deserialize::<ManualRow>().enumerate() {
        let row = rec?;
        rows += 1;
        let entry = report.per_category.entry(row.category).or_default();
        match row.verdict.trim().to_lowercase().as_str() {
            "" => report.unjudged_rows.push(i + 1),
            "correct" => {
                entry.correct += 1;
                entry.judged += 1;
            }
            "incorrect" => entry.judged += 1,
            other => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    // header is line 1
                    line: i + 2,
                    msg: format!("verdict must be correct, incorrect or empty, got {other:?}"),
                });
            }
        }
    }
    if rows > 0 && report.unjudged_rows.len() == rows {
        return Err(Error::InvalidInput(format!(
            "{}: no row has a verdict (rows {:?})",
            path.display(),
            report.unjudged_rows
        )));
    }
    if rows == 0 {
        return Err(Error::InvalidInput(format!(
            "{}: no rows to import",
            path.display()
        )));
    }
    if !report.unjudged_rows.is_empty() {
        log::warn!("{} unjudged rows excluded", report.unjudged_rows.len());
    }
    for c in report.per_category.values_mut() {
        c.precision = if c.judged == 0 {
            0.0
        } else {
            c.correct as f64 / c.judged as f64
        };
    }
    Ok(report)
}
