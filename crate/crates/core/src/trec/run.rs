use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::guided::ScoredDoc;

/// One line of a TREC run file: `qid Q0 docid rank score tag`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunEntry {
    pub qid: String,
    pub doc_id: String,
    pub rank: u32,
    pub score: f64,
    pub tag: String,
}

/// Run entries for one ranked list, ranks starting at 1.
pub fn run_entries(qid: &str, ranked: &[ScoredDoc], tag: &str) -> Vec<RunEntry> {
    ranked
        .iter()
        .enumerate()
        .map(|(i, d)| RunEntry {
            qid: qid.to_string(),
            doc_id: d.doc_id.clone(),
            rank: i as u32 + 1,
            score: d.score,
            tag: tag.to_string(),
        })
        .collect()
}

/// Entries grouped per query, each group ordered by rank.
pub fn group_by_query(run: &[RunEntry]) -> BTreeMap<&str, Vec<&RunEntry>> {
    let mut groups: BTreeMap<&str, Vec<&RunEntry>> = BTreeMap::new();
    for entry in run {
        groups.entry(entry.qid.as_str()).or_default().push(entry);
    }
    for group in groups.values_mut() {
        group.sort_by_key(|e| e.rank);
    }
    groups
}

/// Per query: ranks are `1..=m`, doc_ids unique, scores non-increasing.
pub fn validate_run(run: &[RunEntry]) -> Result<()> {
    for (qid, group) in group_by_query(run) {
        let mut seen = HashSet::new();
        for (i, entry) in group.iter().enumerate() {
            if entry.rank as usize != i + 1 {
                return Err(Error::InvalidInput(format!(
                    "query {qid}: ranks are not contiguous from 1 (found {} at position {})",
                    entry.rank,
                    i + 1
                )));
            }
            if !seen.insert(entry.doc_id.as_str()) {
                return Err(Error::InvalidInput(format!(
                    "query {qid}: doc {} appears twice",
                    entry.doc_id
                )));
            }
            if i > 0 && group[i - 1].score < entry.score {
                return Err(Error::InvalidInput(format!(
                    "query {qid}: score increases at rank {}",
                    entry.rank
                )));
            }
        }
    }
    Ok(())
}

/// Scores are written in Rust's shortest round-trip form, so parsing the
/// output reproduces every field bit for bit.
pub fn write_run(out: &mut impl Write, run: &[RunEntry]) -> std::io::Result<()> {
    for e in run {
        writeln!(
            out,
            "{} Q0 {} {} {} {}",
            e.qid, e.doc_id, e.rank, e.score, e.tag
        )?;
    }
    Ok(())
}

pub fn save_run(path: &Path, run: &[RunEntry]) -> Result<()> {
    validate_run(run)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_run(&mut out, run).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn parse_run(path: &Path) -> Result<Vec<RunEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_run_str(&text, path)
}

pub fn parse_run_str(text: &str, path: &Path) -> Result<Vec<RunEntry>> {
    let mut run = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [qid, _q0, doc_id, rank, score, tag] = fields[..] else {
            return Err(err(format!("expected 6 fields, found {}", fields.len())));
        };
        let rank: u32 = rank
            .parse()
            .ok()
            .filter(|&r| r >= 1)
            .ok_or_else(|| err(format!("rank {rank:?} is not a positive integer")))?;
        let score: f64 = score
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite())
            .ok_or_else(|| err(format!("score {score:?} is not a finite number")))?;
        run.push(RunEntry {
            qid: qid.to_string(),
            doc_id: doc_id.to_string(),
            rank,
            score,
            tag: tag.to_string(),
        });
    }
    Ok(run)
}
