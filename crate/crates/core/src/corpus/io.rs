use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Deserialize;

use super::Sentence;
use crate::util::{open_input, read_jsonl, write_jsonl};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct RawDoc {
    pub doc_id: String,
    pub text: String,
}

#[derive(Debug, Default)]
pub struct RawCorpus {
    pub docs: Vec<RawDoc>,
    /// Lines that were not valid UTF-8 or not a `{"doc_id","text"}` object.
    pub skipped: usize,
}

impl RawCorpus {
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.docs
            .iter()
            .map(|d| (d.doc_id.as_str(), d.text.as_str()))
    }
}

/// Reads a JSON-lines corpus. Undecodable documents are skipped and counted.
pub fn read_raw_corpus(path: &Path) -> Result<RawCorpus> {
    let mut reader = BufReader::new(open_input(path)?);
    let mut corpus = RawCorpus::default();
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        let n = reader
            .read_until(b'\n', &mut buf)
            .map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let Ok(line) = std::str::from_utf8(&buf) else {
            log::warn!(
                "{}:{line_no}: invalid UTF-8, document skipped",
                path.display()
            );
            corpus.skipped += 1;
            continue;
        };
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RawDoc>(line) {
            Ok(doc) => corpus.docs.push(doc),
            Err(e) => {
                log::warn!("{}:{line_no}: {e}, document skipped", path.display());
                corpus.skipped += 1;
            }
        }
    }
    Ok(corpus)
}

pub fn write_sentences(path: &Path, sentences: &[Sentence]) -> Result<()> {
    write_jsonl(path, sentences)
}

pub fn read_sentences(path: &Path) -> Result<Vec<Sentence>> {
    read_jsonl(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn invalid_utf8_is_skipped_and_counted() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(b"{\"doc_id\":\"a\",\"text\":\"Hello there.\"}\n")
            .unwrap();
        f.write_all(b"{\"doc_id\":\"b\",\"text\":\"bad \xff\xfe\"}\n")
            .unwrap();
        f.write_all(b"not json\n").unwrap();
        let c = read_raw_corpus(f.path()).unwrap();
        assert_eq!(c.docs.len(), 1);
        assert_eq!(c.skipped, 2);
    }

    #[test]
    fn sentence_jsonl_shape() {
        let s = Sentence::new("d:0", "a b").unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(
            json,
            r#"{"id":"d:0","text":"a b","tokens":[["a",0,1],["b",2,3]]}"#
        );
    }
}
