//! TSV storage.
//!
//! `entities.tsv`: `id \t type \t canonical \t surface1|surface2|...` with an
//! optional fifth `provenance` column (`source` or `discovered`).
//! `triples.tsv`: `head_id \t relation \t tail_id`. No headers, UTF-8.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::{EntityId, EntityRecord, EntityType, KnowledgeGraph, Provenance, Triple};
use crate::util::{create_output, open_input};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub duplicate_triples: usize,
}

pub fn load_kg(entities_path: &Path, triples_path: &Path) -> Result<(KnowledgeGraph, LoadReport)> {
    let mut kg = KnowledgeGraph::new();
    let mut report = LoadReport::default();

    for_each_line(entities_path, |line_no, line| {
        let rec = parse_entity(line).map_err(|msg| parse_err(entities_path, line_no, msg))?;
        kg.add_entity(rec)
            .map_err(|e| parse_err(entities_path, line_no, e.to_string()))
    })?;

    for_each_line(triples_path, |line_no, line| {
        let fields: Vec<&str> = line.split('\t').collect();
        let [head, rel, tail] = fields[..] else {
            return Err(parse_err(
                triples_path,
                line_no,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        };
        let triple = Triple::new(head.trim(), rel.trim(), tail.trim());
        match kg.add_triple(triple) {
            Ok(true) => Ok(()),
            Ok(false) => {
                report.duplicate_triples += 1;
                Ok(())
            }
            Err(e) => Err(parse_err(triples_path, line_no, e.to_string())),
        }
    })?;

    if report.duplicate_triples > 0 {
        log::warn!(
            "{}: {} duplicate triples ignored",
            triples_path.display(),
            report.duplicate_triples
        );
    }
    Ok((kg, report))
}

fn for_each_line(path: &Path, mut f: impl FnMut(usize, &str) -> Result<()>) -> Result<()> {
    let reader = BufReader::new(open_input(path)?);
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| match e.kind() {
            std::io::ErrorKind::InvalidData => parse_err(path, i + 1, "invalid UTF-8".into()),
            _ => Error::io(path, e),
        })?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        f(i + 1, line)?;
    }
    Ok(())
}

fn parse_err(path: &Path, line: usize, msg: String) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    }
}

fn parse_entity(line: &str) -> std::result::Result<EntityRecord, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 4 && fields.len() != 5 {
        return Err(format!(
            "expected 4 or 5 tab-separated fields, found {}",
            fields.len()
        ));
    }
    let id = fields[0].trim();
    let etype = fields[1].trim();
    if id.is_empty() {
        return Err("empty entity id".into());
    }
    if etype.is_empty() {
        return Err("empty entity type".into());
    }
    let surfaces: Vec<String> = fields[3].split('|').map(|s| s.trim().to_string()).collect();
    if surfaces.iter().any(String::is_empty) {
        return Err("empty surface form".into());
    }
    let provenance = match fields.get(4).map(|s| s.trim()) {
        None | Some("source") => Provenance::Source,
        Some("discovered") => Provenance::Discovered,
        Some(other) => return Err(format!("unknown provenance {other:?}")),
    };
    Ok(EntityRecord {
        id: EntityId::new(id),
        canonical: fields[2].trim().to_string(),
        surfaces: surfaces.into_iter().collect(),
        etype: EntityType::new(etype),
        provenance,
    })
}

/// Writes `entities.tsv` (with provenance column) and `triples.tsv` into `dir`.
/// Output order is sorted, so equal graphs produce identical bytes.
pub fn export_kg(kg: &KnowledgeGraph, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let ent_path = dir.join("entities.tsv");
    let mut w = create_output(&ent_path)?;
    for e in kg.entities() {
        let surfaces: Vec<&str> = e.surfaces.iter().map(String::as_str).collect();
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}",
            e.id,
            e.etype,
            e.canonical,
            surfaces.join("|"),
            e.provenance.as_str()
        )
        .map_err(|err| Error::io(&ent_path, err))?;
    }
    w.flush().map_err(|err| Error::io(&ent_path, err))?;

    let tri_path = dir.join("triples.tsv");
    let mut w = create_output(&tri_path)?;
    for t in kg.triples() {
        writeln!(w, "{}\t{}\t{}", t.head, t.rel, t.tail)
            .map_err(|err| Error::io(&tri_path, err))?;
    }
    w.flush().map_err(|err| Error::io(&tri_path, err))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    const ENTITIES: &str = "C1\tchemical or drug\tAspirin\taspirin|ASA\n\
                            C2\tsign, symptom or finding\tHeadache\theadache\n\
                            C3\tdisease or syndrome\tFever\tfever\n";
    const TRIPLES: &str = "C1\tmay_treat\tC2\nC1\tmay_treat\tC3\n";

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn empty_files() {
        let d = tempfile::tempdir().unwrap();
        let (kg, rep) = load_kg(&write(d.path(), "e", ""), &write(d.path(), "t", "")).unwrap();
        assert_eq!((kg.entity_count(), kg.triple_count()), (0, 0));
        assert_eq!(rep.duplicate_triples, 0);
    }

    #[test]
    fn fixture_counts() {
        let d = tempfile::tempdir().unwrap();
        let (kg, _) = load_kg(
            &write(d.path(), "e", ENTITIES),
            &write(d.path(), "t", TRIPLES),
        )
        .unwrap();
        assert_eq!(kg.entity_count(), ENTITIES.lines().count());
        assert_eq!(kg.triple_count(), TRIPLES.lines().count());
        assert_eq!(kg.pair_count(), 2);
    }

    #[test]
    fn self_loop_is_an_error() {
        let d = tempfile::tempdir().unwrap();
        let err = load_kg(
            &write(d.path(), "e", ENTITIES),
            &write(d.path(), "t", "C1\tmay_treat\tC1\n"),
        )
        .unwrap_err();
        assert!(err.to_string().contains("self-loop"), "{err}");
        assert!(err.to_string().contains(":1:"), "{err}");
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let d = tempfile::tempdir().unwrap();
        let body = format!("{ENTITIES}C4\tanatomy\n");
        let err = load_kg(&write(d.path(), "e", &body), &write(d.path(), "t", "")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");
    }

    #[test]
    fn unknown_id_and_duplicates() {
        let d = tempfile::tempdir().unwrap();
        let e = write(d.path(), "e", ENTITIES);
        let err = load_kg(&e, &write(d.path(), "t", "C1\tmay_treat\tC9\n")).unwrap_err();
        assert!(err.to_string().contains("unknown entity C9"), "{err}");

        let dup = format!("{TRIPLES}C1\tmay_treat\tC2\n");
        let (kg, rep) = load_kg(&e, &write(d.path(), "t2", &dup)).unwrap();
        assert_eq!(kg.triple_count(), 2);
        assert_eq!(rep.duplicate_triples, 1);
    }

    #[test]
    fn missing_file() {
        let d = tempfile::tempdir().unwrap();
        let err = load_kg(&d.path().join("nope"), &d.path().join("nope2")).unwrap_err();
        assert!(matches!(err, Error::MissingInput(_)));
    }

    #[test]
    fn round_trip_with_provenance() {
        let d = tempfile::tempdir().unwrap();
        let (mut kg, _) = load_kg(
            &write(d.path(), "e", ENTITIES),
            &write(d.path(), "t", TRIPLES),
        )
        .unwrap();
        kg.add_entity(EntityRecord {
            id: EntityId::discovered("immune evasion"),
            canonical: "immune evasion".into(),
            surfaces: BTreeSet::from(["immune evasion".to_string()]),
            etype: EntityType::new("physiology"),
            provenance: Provenance::Discovered,
        })
        .unwrap();
        kg.add_triple(Triple::new("new:immune evasion", "found_in", "C3"))
            .unwrap();

        let out = d.path().join("out");
        export_kg(&kg, &out).unwrap();
        let ents = fs::read_to_string(out.join("entities.tsv")).unwrap();
        assert!(ents.contains(
            "new:immune evasion\tphysiology\timmune evasion\timmune evasion\tdiscovered\n"
        ));
        assert!(ents.contains("C1\tchemical or drug\tAspirin\tASA|aspirin\tsource\n"));

        let (back, _) = load_kg(&out.join("entities.tsv"), &out.join("triples.tsv")).unwrap();
        assert_eq!(back.entity_count(), kg.entity_count());
        assert_eq!(back.triples(), kg.triples());
        assert_eq!(back.pair_count(), kg.pair_count());
        for e in kg.entities() {
            assert_eq!(back.entity(e.id.as_str()), Some(e));
            for s in &e.surfaces {
                assert_eq!(back.lookup_surface(s), kg.lookup_surface(s));
            }
        }
    }

    #[test]
    fn export_to_unwritable_location_fails() {
        let d = tempfile::tempdir().unwrap();
        let blocker = write(d.path(), "file", "x");
        // a regular file where a directory is expected
        let err = export_kg(&KnowledgeGraph::new(), &blocker.join("sub")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
