//! Comparable-corpus builders: natural, generated, KNN-retrieved and random pairs.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::{CandidateSource, GenerationRequest};
use crate::corpus::{ComparableExample, Dataset, Lang, Origin, Program};
use crate::tokenize::code_tokens;

/// Version tag of the generation prompt layout produced by [`generation_prompt`].
pub const PROMPT_TEMPLATE: &str = "gen-v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairingConfig {
    /// Programs kept per language per problem.
    pub max_per_problem: usize,
    pub knn_k: usize,
    pub seed: u64,
}

impl Default for PairingConfig {
    fn default() -> Self {
        PairingConfig { max_per_problem: 3, knn_k: 1, seed: 0 }
    }
}

impl PairingConfig {
    pub fn validate(&self) -> Result<(), CompError> {
        if self.max_per_problem == 0 {
            return Err(CompError::Config("max_per_problem must be positive".into()));
        }
        if self.knn_k == 0 {
            return Err(CompError::Config("knn_k must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub program_id: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum CompError {
    #[error("invalid pairing config: {0}")]
    Config(String),
    #[error("dataset `{0}` is not monolingual")]
    NotMonolingual(String),
    #[error("dataset `{dataset}` mixes languages ({a} and {b})")]
    MixedLanguages { dataset: String, a: Lang, b: Lang },
    #[error("source and target datasets are both {0}")]
    SameLanguage(Lang),
    #[error("program `{0}` has no problem_id")]
    MissingProblemId(String),
    #[error("program `{0}` has no docstring")]
    MissingDocstring(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("target corpus is empty")]
    EmptyTarget,
    #[error("program `{0}` has no code tokens")]
    NoTokens(String),
    #[error("no vector for program `{0}`")]
    MissingVector(String),
    #[error("vector dimension mismatch: expected {expected}, `{id}` has {found}")]
    DimensionMismatch { id: String, expected: usize, found: usize },
    #[error("vector for `{0}` has zero norm")]
    ZeroNorm(String),
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

fn programs(ds: &Dataset) -> Result<&[Program], CompError> {
    ds.programs().ok_or_else(|| CompError::NotMonolingual(ds.name.clone()))
}

fn single_lang(ds: &Dataset) -> Result<Option<Lang>, CompError> {
    let ps = programs(ds)?;
    let Some(first) = ps.first() else { return Ok(None) };
    match ps.iter().find(|p| p.lang != first.lang) {
        Some(p) => Err(CompError::MixedLanguages { dataset: ds.name.clone(), a: first.lang, b: p.lang }),
        None => Ok(Some(first.lang)),
    }
}

fn check_sides(src: &Dataset, tgt: &Dataset) -> Result<(), CompError> {
    if let (Some(a), Some(b)) = (single_lang(src)?, single_lang(tgt)?) {
        if a == b {
            return Err(CompError::SameLanguage(a));
        }
    }
    Ok(())
}

fn pair(src: &Program, tgt: &Program, origin: Origin) -> ComparableExample {
    ComparableExample { src: src.clone(), tgt: tgt.clone(), origin }
}

/// Problem ids in first-appearance order, and the programs of each.
type ProblemGroups<'a> = (Vec<&'a str>, HashMap<&'a str, Vec<&'a Program>>);

fn group_by_problem(ps: &[Program]) -> Result<ProblemGroups<'_>, CompError> {
    let mut order = Vec::new();
    let mut groups: HashMap<&str, Vec<&Program>> = HashMap::new();
    for p in ps {
        let pid = p.problem_id.as_deref().ok_or_else(|| CompError::MissingProblemId(p.id.clone()))?;
        groups
            .entry(pid)
            .or_insert_with(|| {
                order.push(pid);
                Vec::new()
            })
            .push(p);
    }
    Ok((order, groups))
}

/// Capped Cartesian product of programs sharing a problem id, in source order.
pub fn build_natural(mono_src: &Dataset, mono_tgt: &Dataset, cfg: &PairingConfig) -> Result<Dataset, CompError> {
    cfg.validate()?;
    check_sides(mono_src, mono_tgt)?;
    let (order, src_groups) = group_by_problem(programs(mono_src)?)?;
    let (_, tgt_groups) = group_by_problem(programs(mono_tgt)?)?;
    let m = cfg.max_per_problem;
    let mut out = Vec::new();
    for pid in order {
        let Some(tgts) = tgt_groups.get(pid) else { continue };
        for s in src_groups[pid].iter().take(m) {
            for t in tgts.iter().take(m) {
                out.push(pair(s, t, Origin::Natural));
            }
        }
    }
    Ok(Dataset::comparable("natural", out))
}

/// Prompt layout `gen-v1`: a header line, the docstring, then optionally the
/// source program, each under a tagged delimiter; ends with the open target tag.
pub fn generation_prompt(p: &Program, tgt_lang: Lang, include_source: bool) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "### {PROMPT_TEMPLATE} target={}", tgt_lang.as_str());
    let _ = writeln!(s, "<doc>\n{}\n</doc>", p.docstring.as_deref().unwrap_or("").trim_end());
    if include_source {
        let _ = writeln!(s, "<source lang=\"{}\">\n{}\n</source>", p.lang.as_str(), p.code.trim_end());
    }
    let _ = writeln!(s, "<target lang=\"{}\">", tgt_lang.as_str());
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub program_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    pub tgt_lang: Lang,
    pub include_source_in_prompt: bool,
    pub n_candidates: usize,
    pub max_tokens: usize,
    pub workers: usize,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig {
            tgt_lang: Lang::Java,
            include_source_in_prompt: true,
            n_candidates: 5,
            max_tokens: 512,
            workers: 4,
        }
    }
}

/// Pairs each documented program with the best-scoring generation in
/// `cfg.tgt_lang`. Failed programs are skipped and reported.
pub fn build_generated(
    mono: &Dataset,
    client: &dyn CandidateSource,
    cfg: &GenerateConfig,
) -> Result<(Dataset, Vec<SkipRecord>), CompError> {
    let ps = programs(mono)?;
    if cfg.n_candidates == 0 {
        return Err(CompError::Config("n_candidates must be positive".into()));
    }
    if let Some(p) = ps.iter().find(|p| p.docstring.as_deref().is_none_or(|d| d.trim().is_empty())) {
        return Err(CompError::MissingDocstring(p.id.clone()));
    }
    if let Some(lang) = single_lang(mono)? {
        if lang == cfg.tgt_lang {
            return Err(CompError::SameLanguage(lang));
        }
    }
    let generate = |p: &Program| -> Result<ComparableExample, String> {
        let mut req = GenerationRequest::beam(
            generation_prompt(p, cfg.tgt_lang, cfg.include_source_in_prompt),
            cfg.tgt_lang,
            cfg.n_candidates,
            format!("{}:generated", p.id),
        );
        req.max_tokens = cfg.max_tokens;
        let cands = client.request_candidates(&req).map_err(|e| e.to_string())?;
        let best =
            cands
                .iter()
                .filter(|c| !c.text.trim().is_empty())
                .reduce(|best, c| if c.score > best.score { c } else { best });
        let Some(best) = best else {
            return Err(if cands.is_empty() { "no candidates" } else { "empty candidate text" }.into());
        };
        let mut tgt = Program::new(format!("{}:gen", p.id), cfg.tgt_lang, best.text.clone()).with_tag("generated");
        tgt.docstring = p.docstring.clone();
        tgt.problem_id = p.problem_id.clone();
        Ok(pair(p, &tgt, Origin::Generated))
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| CompError::Config(e.to_string()))?;
    let results: Vec<Result<ComparableExample, String>> = pool.install(|| ps.par_iter().map(generate).collect());
    let mut out = Vec::new();
    let mut skips = Vec::new();
    for (p, r) in ps.iter().zip(results) {
        match r {
            Ok(ex) => out.push(ex),
            Err(reason) => {
                log::warn!("skipping `{}`: {reason}", p.id);
                skips.push(SkipRecord { program_id: p.id.clone(), reason });
            }
        }
    }
    Ok((Dataset::comparable("generated", out), skips))
}

/// TF-IDF over [`code_tokens`]: raw term counts times smoothed idf
/// `ln((1 + N) / (1 + df)) + 1`, vocabulary in sorted order.
pub fn embed_tfidf(programs: &[Program]) -> Result<Vec<EmbeddingVector>, CompError> {
    if programs.is_empty() {
        return Err(CompError::EmptyCorpus);
    }
    let mut docs = Vec::with_capacity(programs.len());
    for p in programs {
        let mut tf: BTreeMap<String, f64> = BTreeMap::new();
        for t in code_tokens(&p.code) {
            *tf.entry(t).or_default() += 1.0;
        }
        if tf.is_empty() {
            return Err(CompError::NoTokens(p.id.clone()));
        }
        docs.push(tf);
    }
    let mut df: BTreeMap<&str, f64> = BTreeMap::new();
    for doc in &docs {
        for t in doc.keys() {
            *df.entry(t.as_str()).or_default() += 1.0;
        }
    }
    let n = docs.len() as f64;
    let index: HashMap<&str, usize> = df.keys().enumerate().map(|(i, t)| (*t, i)).collect();
    let idf: Vec<f64> = df.values().map(|d| ((1.0 + n) / (1.0 + d)).ln() + 1.0).collect();
    Ok(programs
        .iter()
        .zip(&docs)
        .map(|(p, doc)| {
            let mut values = vec![0.0; idf.len()];
            for (t, count) in doc {
                let i = index[t.as_str()];
                values[i] = count * idf[i];
            }
            EmbeddingVector { program_id: p.id.clone(), values }
        })
        .collect())
}

fn unit(v: &EmbeddingVector) -> Result<Vec<f64>, CompError> {
    let norm = v.values.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(CompError::ZeroNorm(v.program_id.clone()));
    }
    Ok(v.values.iter().map(|x| x / norm).collect())
}

/// Cosine similarity of two vectors (each L2-normalized first).
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, CompError> {
    if a.values.len() != b.values.len() {
        return Err(CompError::DimensionMismatch {
            id: b.program_id.clone(),
            expected: a.values.len(),
            found: b.values.len(),
        });
    }
    let (ua, ub) = (unit(a)?, unit(b)?);
    Ok(ua.iter().zip(&ub).map(|(x, y)| x * y).sum())
}

fn lookup(ps: &[Program], vecs: &[EmbeddingVector], dim: &mut Option<usize>) -> Result<Vec<Vec<f64>>, CompError> {
    let by_id: HashMap<&str, &EmbeddingVector> = vecs.iter().map(|v| (v.program_id.as_str(), v)).collect();
    ps.iter()
        .map(|p| {
            let v = by_id.get(p.id.as_str()).ok_or_else(|| CompError::MissingVector(p.id.clone()))?;
            let expected = *dim.get_or_insert(v.values.len());
            if v.values.len() != expected {
                return Err(CompError::DimensionMismatch { id: p.id.clone(), expected, found: v.values.len() });
            }
            unit(v)
        })
        .collect()
}

/// Pairs each source program with its `knn_k` most similar targets; ties go
/// to the smaller target id.
pub fn build_knn(
    mono_src: &Dataset,
    mono_tgt: &Dataset,
    src_vecs: &[EmbeddingVector],
    tgt_vecs: &[EmbeddingVector],
    cfg: &PairingConfig,
) -> Result<Dataset, CompError> {
    cfg.validate()?;
    check_sides(mono_src, mono_tgt)?;
    let (sp, tp) = (programs(mono_src)?, programs(mono_tgt)?);
    let mut dim = None;
    let su = lookup(sp, src_vecs, &mut dim)?;
    let tu = lookup(tp, tgt_vecs, &mut dim)?;
    let mut out = Vec::new();
    for (s, sv) in sp.iter().zip(&su) {
        let mut scored: Vec<(f64, usize)> =
            tu.iter().enumerate().map(|(j, tv)| (sv.iter().zip(tv).map(|(x, y)| x * y).sum(), j)).collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| tp[a.1].id.cmp(&tp[b.1].id)));
        for &(_, j) in scored.iter().take(cfg.knn_k) {
            out.push(pair(s, &tp[j], Origin::Knn));
        }
    }
    Ok(Dataset::comparable("knn", out))
}

/// Pairs each source program with a target drawn uniformly (with replacement).
pub fn build_random(mono_src: &Dataset, mono_tgt: &Dataset, cfg: &PairingConfig) -> Result<Dataset, CompError> {
    check_sides(mono_src, mono_tgt)?;
    let (sp, tp) = (programs(mono_src)?, programs(mono_tgt)?);
    if tp.is_empty() {
        return Err(CompError::EmptyTarget);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let out = sp.iter().map(|s| pair(s, &tp[rng.gen_range(0..tp.len())], Origin::Random)).collect();
    Ok(Dataset::comparable("random", out))
}

#[derive(Serialize, Deserialize)]
struct VectorRecord {
    program_id: String,
    dim: usize,
    values: Vec<f64>,
}

pub fn write_vectors(vecs: &[EmbeddingVector], path: &Path) -> Result<(), CompError> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for v in vecs {
        let rec = VectorRecord { program_id: v.program_id.clone(), dim: v.values.len(), values: v.values.clone() };
        serde_json::to_writer(&mut w, &rec).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_vectors(path: &Path) -> Result<Vec<EmbeddingVector>, CompError> {
    let r = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |msg: String| CompError::Malformed { line: i + 1, msg };
        let rec: VectorRecord = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        if rec.values.len() != rec.dim {
            return Err(malformed(format!("dim {} but {} values", rec.dim, rec.values.len())));
        }
        out.push(EmbeddingVector { program_id: rec.program_id, values: rec.values });
    }
    Ok(out)
}

pub fn write_skip_report(skips: &[SkipRecord], path: &Path) -> Result<(), CompError> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for s in skips {
        serde_json::to_writer(&mut w, s).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_skip_report(path: &Path) -> Result<Vec<SkipRecord>, CompError> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| CompError::Malformed { line: i + 1, msg: e.to_string() }))
        .collect()
}
