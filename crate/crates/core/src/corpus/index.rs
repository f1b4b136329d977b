use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{tokenize, DocLookup, Document};
use crate::error::{Error, Result};

/// First line of every persisted index file.
pub const INDEX_MAGIC: &str = "GCQR-IDX-1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

/// Immutable inverted index over a corpus. Terms are kept in a `BTreeMap` so
/// the persisted form is byte-stable.
#[derive(Debug, Clone)]
pub struct CorpusIndex {
    postings: BTreeMap<String, Vec<Posting>>,
    doc_lengths: Vec<u32>,
    avg_doc_length: f64,
    doc_table: Vec<Document>,
    positions: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    doc_count: usize,
    avg_doc_length: f64,
    term_count: usize,
}

#[derive(Serialize, Deserialize)]
struct DocRecord {
    doc_id: String,
    text: String,
    length: u32,
}

#[derive(Serialize, Deserialize)]
struct TermRecord {
    term: String,
    postings: Vec<(u32, u32)>,
}

impl CorpusIndex {
    pub fn build(docs: Vec<Document>) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut doc_lengths = Vec::with_capacity(docs.len());
        for (pos, doc) in docs.iter().enumerate() {
            let tokens = tokenize(&doc.text);
            doc_lengths.push(tokens.len() as u32);
            let mut counts: BTreeMap<String, u32> = BTreeMap::new();
            for token in tokens {
                *counts.entry(token).or_default() += 1;
            }
            for (term, tf) in counts {
                postings.entry(term).or_default().push(Posting {
                    doc: pos as u32,
                    tf,
                });
            }
        }
        Self::assemble(postings, doc_lengths, docs)
    }

    fn assemble(
        postings: BTreeMap<String, Vec<Posting>>,
        doc_lengths: Vec<u32>,
        doc_table: Vec<Document>,
    ) -> Result<Self> {
        let mut positions = HashMap::with_capacity(doc_table.len());
        for (pos, doc) in doc_table.iter().enumerate() {
            if positions.insert(doc.doc_id.clone(), pos).is_some() {
                return Err(Error::DuplicateDocId {
                    id: doc.doc_id.clone(),
                    line: pos + 1,
                });
            }
        }
        let total: u64 = doc_lengths.iter().map(|&l| l as u64).sum();
        let avg_doc_length = total as f64 / doc_lengths.len() as f64;
        Ok(Self {
            postings,
            doc_lengths,
            avg_doc_length,
            doc_table,
            positions,
        })
    }

    pub fn doc_count(&self) -> usize {
        self.doc_table.len()
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn doc_length(&self, pos: usize) -> u32 {
        self.doc_lengths[pos]
    }

    pub fn doc_lengths(&self) -> &[u32] {
        &self.doc_lengths
    }

    pub fn doc_at(&self, pos: usize) -> &Document {
        &self.doc_table[pos]
    }

    pub fn documents(&self) -> &[Document] {
        &self.doc_table
    }

    pub fn position(&self, doc_id: &str) -> Option<usize> {
        self.positions.get(doc_id).copied()
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, &[Posting])> {
        self.postings
            .iter()
            .map(|(t, p)| (t.as_str(), p.as_slice()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.write_to(&mut out).map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_to(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "{INDEX_MAGIC}")?;
        let header = Header {
            doc_count: self.doc_count(),
            avg_doc_length: self.avg_doc_length,
            term_count: self.postings.len(),
        };
        writeln!(out, "{}", serde_json::to_string(&header)?)?;
        for (doc, &length) in self.doc_table.iter().zip(&self.doc_lengths) {
            let rec = DocRecord {
                doc_id: doc.doc_id.clone(),
                text: doc.text.clone(),
                length,
            };
            writeln!(out, "{}", serde_json::to_string(&rec)?)?;
        }
        for (term, postings) in &self.postings {
            let rec = TermRecord {
                term: term.clone(),
                postings: postings.iter().map(|p| (p.doc, p.tf)).collect(),
            };
            writeln!(out, "{}", serde_json::to_string(&rec)?)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let bad = |message: String| Error::IndexFormat {
            path: path.to_path_buf(),
            message,
        };
        let mut lines = BufReader::new(file).lines();
        let mut next_line = |what: &str| -> Result<String> {
            match lines.next() {
                Some(line) => line.map_err(|e| Error::io(path, e)),
                None => Err(bad(format!("truncated before {what}"))),
            }
        };

        let magic = next_line("magic header")?;
        if magic != INDEX_MAGIC {
            return Err(bad(format!(
                "expected magic {INDEX_MAGIC:?}, found {magic:?}"
            )));
        }
        let header: Header =
            serde_json::from_str(&next_line("header")?).map_err(|e| bad(format!("header: {e}")))?;

        let mut doc_table = Vec::with_capacity(header.doc_count);
        let mut doc_lengths = Vec::with_capacity(header.doc_count);
        for _ in 0..header.doc_count {
            let rec: DocRecord = serde_json::from_str(&next_line("document record")?)
                .map_err(|e| bad(format!("document record: {e}")))?;
            doc_lengths.push(rec.length);
            doc_table.push(Document::new(rec.doc_id, rec.text));
        }

        let mut postings = BTreeMap::new();
        let mut tf_sums = vec![0u64; header.doc_count];
        for _ in 0..header.term_count {
            let rec: TermRecord = serde_json::from_str(&next_line("term record")?)
                .map_err(|e| bad(format!("term record: {e}")))?;
            let mut list = Vec::with_capacity(rec.postings.len());
            for (doc, tf) in rec.postings {
                if doc as usize >= header.doc_count {
                    return Err(bad(format!(
                        "term {:?} references document {doc} of {}",
                        rec.term, header.doc_count
                    )));
                }
                tf_sums[doc as usize] += tf as u64;
                list.push(Posting { doc, tf });
            }
            postings.insert(rec.term, list);
        }
        for (pos, (&sum, &len)) in tf_sums.iter().zip(&doc_lengths).enumerate() {
            if sum != len as u64 {
                return Err(bad(format!(
                    "document {pos} has length {len} but postings sum to {sum}"
                )));
            }
        }
        if doc_table.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let index = Self::assemble(postings, doc_lengths, doc_table)?;
        if (index.avg_doc_length - header.avg_doc_length).abs() > 1e-9 {
            return Err(bad(
                "stored avg_doc_length disagrees with document lengths".into()
            ));
        }
        Ok(index)
    }
}

impl DocLookup for CorpusIndex {
    fn document(&self, doc_id: &str) -> Option<&Document> {
        self.position(doc_id).map(|pos| &self.doc_table[pos])
    }
}
