//! Edit-distance diverse selection of verified candidates and assembly of the
//! multi-reference parallel dataset.

use std::collections::BTreeMap;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::Candidate;
use crate::corpus::{Dataset, Lang, ParallelExample, Program, Records};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    /// Maximum references added per example.
    pub k: usize,
    /// Compare whitespace-normalized text instead of raw text.
    pub normalize_ws: bool,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig { k: 5, normalize_ws: true }
    }
}

/// Unit-cost edit distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() || b.is_empty() {
        return a.len().max(b.len());
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Collapses runs of spaces and tabs to one space and strips trailing spaces
/// on every line.
pub fn normalize_ws(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for (i, line) in text.split('\n').enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let mut blank = false;
        for c in line.trim_end_matches([' ', '\t', '\r']).chars() {
            if c == ' ' || c == '\t' {
                if !blank {
                    out.push(' ');
                }
                blank = true;
            } else {
                out.push(c);
                blank = false;
            }
        }
    }
    out
}

/// Greedy farthest-point selection: each step adds the candidate whose minimum
/// distance to the anchors and the already selected candidates is largest.
/// Ties go to the higher score, then the lexicographically smaller text.
/// Candidates at distance 0 are never added.
pub fn select_diverse(correct: &[Candidate], anchors: &[String], cfg: &SelectionConfig) -> Vec<Candidate> {
    let key = |t: &str| if cfg.normalize_ws { normalize_ws(t) } else { t.to_string() };
    let keys: Vec<String> = correct.iter().map(|c| key(&c.text)).collect();
    let anchor_keys: Vec<String> = anchors.iter().map(|a| key(a)).collect();
    let mut min_d: Vec<usize> =
        keys.par_iter().map(|k| anchor_keys.iter().map(|a| levenshtein(k, a)).min().unwrap_or(usize::MAX)).collect();
    let mut taken = vec![false; correct.len()];
    let mut out = Vec::new();
    while out.len() < cfg.k {
        let best = (0..correct.len()).filter(|&i| !taken[i] && min_d[i] > 0).max_by(|&i, &j| {
            min_d[i]
                .cmp(&min_d[j])
                .then(correct[i].score.total_cmp(&correct[j].score))
                .then_with(|| correct[j].text.cmp(&correct[i].text))
        });
        let Some(b) = best else { break };
        taken[b] = true;
        out.push(correct[b].clone());
        let chosen = &keys[b];
        let updated: Vec<usize> = (0..correct.len())
            .into_par_iter()
            .map(|i| if taken[i] { min_d[i] } else { min_d[i].min(levenshtein(&keys[i], chosen)) })
            .collect();
        min_d = updated;
    }
    out
}

/// One persisted selection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub example_id: String,
    pub candidate_rank: usize,
    pub lang: Lang,
    pub text: String,
}

#[derive(Debug, Error)]
pub enum RefSelectError {
    #[error("dataset is not parallel")]
    NotParallel,
    #[error("selection for unknown example `{0}`")]
    UnknownExample(String),
    #[error("example `{example}`: selected {found} reference but existing references are {expected}")]
    LangMismatch { example: String, expected: Lang, found: Lang },
    #[error("example `{0}`: selected candidate duplicates an existing reference")]
    DuplicateRef(String),
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub fn group_selections(sels: Vec<Selection>) -> BTreeMap<String, Vec<Selection>> {
    let mut map: BTreeMap<String, Vec<Selection>> = BTreeMap::new();
    for s in sels {
        map.entry(s.example_id.clone()).or_default().push(s);
    }
    map
}

/// Appends each example's selections to its references; examples without
/// selections pass through unchanged.
pub fn augment_parallel(
    ds: &Dataset,
    selections: &BTreeMap<String, Vec<Selection>>,
) -> Result<Dataset, RefSelectError> {
    let records = ds.parallel_records().ok_or(RefSelectError::NotParallel)?;
    let index: BTreeMap<&str, usize> = records.iter().enumerate().map(|(i, r)| (r.id(), i)).collect();
    if let Some(unknown) = selections.keys().find(|k| !index.contains_key(k.as_str())) {
        return Err(RefSelectError::UnknownExample(unknown.clone()));
    }
    let mut out: Vec<ParallelExample> = records.to_vec();
    for (id, sels) in selections {
        let ex = &mut out[index[id.as_str()]];
        let expected = ex.ref_lang().unwrap_or(sels.first().map_or(Lang::Java, |s| s.lang));
        for s in sels {
            if s.lang != expected {
                return Err(RefSelectError::LangMismatch { example: id.clone(), expected, found: s.lang });
            }
            if ex.refs.iter().any(|r| r.code == s.text) {
                return Err(RefSelectError::DuplicateRef(id.clone()));
            }
            let mut p = Program::new(format!("{}:gen{}", ex.src.id, s.candidate_rank), s.lang, s.text.clone())
                .with_tag("generated");
            p.problem_id = ex.src.problem_id.clone();
            ex.refs.push(p);
        }
    }
    Ok(Dataset { name: ds.name.clone(), records: Records::Parallel(out) })
}

pub fn write_selections(sels: &[Selection], path: &Path) -> Result<(), RefSelectError> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for s in sels {
        serde_json::to_writer(&mut w, s).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_selections(path: &Path) -> Result<Vec<Selection>, RefSelectError> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| RefSelectError::Malformed { line: i + 1, msg: e.to_string() })
        })
        .collect()
}
