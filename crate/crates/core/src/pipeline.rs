//! Pipeline configuration and the stage commands behind the `transaug` binary.
//!
//! Each command reads and writes line-delimited files under `out_dir`:
//!
//! | command      | writes                                                        |
//! |--------------|---------------------------------------------------------------|
//! | build-comp   | `comparable.<origin>.jsonl`, `skips.<origin>.jsonl`           |
//! | gen-refs     | `candidates.jsonl`, `candidates.jsonl.progress`               |
//! | make-tests   | `suites.jsonl`, `test_reports.jsonl`                          |
//! | judge-select | `verdicts.jsonl`, `selections.jsonl`, `augmented.jsonl`       |
//! | eval         | `eval_report.json`, `eval_summary.txt`                        |

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::OpenOptions;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::{Candidate, CandidateSource, ClientConfig, Decode, GenerationRequest, HttpClient, RetryPolicy};
use crate::compcorp::{self, GenerateConfig, PairingConfig};
use crate::corpus::{self, Dataset, DatasetKind, Lang, Origin, ParallelExample};
use crate::metrics::{self, Bucket, EvalReport, JudgedExample};
use crate::refselect::{self, Selection, SelectionConfig};
use crate::sandbox::{FilterReport, Sandbox, SandboxConfig, TestSuite, Verdict};
use crate::signature::extract_signature;
use crate::testgen::{gen_inputs, GenRanges};

pub const CONFIG_ENV: &str = "TRANSAUG_CONFIG";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataPaths {
    /// Monolingual source-language programs (build-comp).
    pub mono_src: Option<PathBuf>,
    /// Monolingual target-language programs (build-comp).
    pub mono_tgt: Option<PathBuf>,
    /// Parallel examples (gen-refs, make-tests, judge-select, eval).
    pub parallel: Option<PathBuf>,
    /// Precomputed embeddings; TF-IDF is fitted when absent.
    pub src_vectors: Option<PathBuf>,
    pub tgt_vectors: Option<PathBuf>,
}

/// Model endpoint block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationSection {
    pub endpoint: String,
    pub auth_token_env: Option<String>,
    pub max_in_flight: usize,
    pub retry: RetryPolicy,
    pub n_candidates: usize,
    pub max_tokens: usize,
    /// Beam search with width `n_candidates` when unset.
    pub decode: Option<Decode>,
    pub include_source_in_prompt: bool,
}

impl Default for GenerationSection {
    fn default() -> Self {
        let client = ClientConfig::default();
        GenerationSection {
            endpoint: client.endpoint,
            auth_token_env: None,
            max_in_flight: client.max_in_flight,
            retry: client.retry,
            n_candidates: 5,
            max_tokens: 512,
            decode: None,
            include_source_in_prompt: true,
        }
    }
}

impl GenerationSection {
    pub fn client_config(&self) -> ClientConfig {
        ClientConfig {
            endpoint: self.endpoint.clone(),
            auth_token_env: self.auth_token_env.clone(),
            max_in_flight: self.max_in_flight,
            retry: self.retry.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub k_values: Vec<usize>,
    /// Candidates considered by the unique-correct histogram.
    pub hist_n: usize,
    pub buckets: Option<Vec<Bucket>>,
    pub syntax: bool,
    /// Defaults to `out_dir/candidates.jsonl`.
    pub candidates: Option<PathBuf>,
    /// Precomputed verdicts; candidates are judged against `out_dir/suites.jsonl` when unset.
    pub verdicts: Option<PathBuf>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            k_values: vec![1, 5, 10],
            hist_n: 20,
            buckets: None,
            syntax: true,
            candidates: None,
            verdicts: None,
        }
    }
}

/// One declarative file drives every command. Section seeds are replaced by
/// the global `seed`, and `sandbox.workers` by the global `workers`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub workers: usize,
    pub src_lang: Lang,
    pub tgt_lang: Lang,
    pub out_dir: PathBuf,
    pub data: DataPaths,
    pub pairing: PairingConfig,
    pub generation: GenerationSection,
    pub testgen: GenRanges,
    pub selection: SelectionConfig,
    pub sandbox: SandboxConfig,
    pub eval: EvalConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            src_lang: Lang::Python,
            tgt_lang: Lang::Java,
            out_dir: PathBuf::from("out"),
            data: DataPaths::default(),
            pairing: PairingConfig::default(),
            generation: GenerationSection::default(),
            testgen: GenRanges::default(),
            selection: SelectionConfig::default(),
            sandbox: SandboxConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Validation(vec![format!("config: {e}")]))
    }

    /// Parses a config file; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Validation(vec![format!("{}: {e}", path.display())]))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.out_dir);
        let d = &mut self.data;
        for p in [&mut d.mono_src, &mut d.mono_tgt, &mut d.parallel, &mut d.src_vectors, &mut d.tgt_vectors]
            .into_iter()
            .flatten()
        {
            resolve(base, p);
        }
        for p in [&mut self.eval.candidates, &mut self.eval.verdicts].into_iter().flatten() {
            resolve(base, p);
        }
    }

    fn effective_pairing(&self) -> PairingConfig {
        PairingConfig { seed: self.seed, ..self.pairing.clone() }
    }

    fn effective_sandbox(&self) -> SandboxConfig {
        SandboxConfig { workers: self.workers.max(1), ..self.sandbox.clone() }
    }

    pub fn out(&self, file: &str) -> PathBuf {
        self.out_dir.join(file)
    }

    /// Every problem with the configuration for `cmd`, before any work starts.
    pub fn validate_for(&self, cmd: &Command) -> Vec<String> {
        let mut errs = Vec::new();
        if self.src_lang == self.tgt_lang {
            errs.push(format!("src_lang and tgt_lang are both {}", self.src_lang));
        }
        if self.workers == 0 {
            errs.push("workers must be at least 1".into());
        }
        let mut need = |what: &str, p: &Option<PathBuf>| match p {
            None => errs.push(format!("data.{what} is not set")),
            Some(p) if !p.exists() => errs.push(format!("data.{what}: {} does not exist", p.display())),
            Some(_) => {}
        };
        match cmd {
            Command::Stats { .. } => {}
            Command::BuildComp { origin, .. } => {
                need("mono_src", &self.data.mono_src);
                if *origin != Origin::Generated {
                    need("mono_tgt", &self.data.mono_tgt);
                }
                if *origin == Origin::Knn {
                    for (what, p) in [("src_vectors", &self.data.src_vectors), ("tgt_vectors", &self.data.tgt_vectors)]
                    {
                        if p.is_some() {
                            need(what, p);
                        }
                    }
                }
            }
            Command::GenRefs | Command::MakeTests | Command::JudgeSelect | Command::Eval => {
                need("parallel", &self.data.parallel);
            }
        }
        if let Err(e) = self.pairing.validate() {
            errs.push(e.to_string());
        }
        if let Err(e) = self.testgen.validate() {
            errs.push(e.to_string());
        }
        if self.selection.k == 0 {
            errs.push("selection.k must be at least 1".into());
        }
        if self.generation.n_candidates == 0 {
            errs.push("generation.n_candidates must be at least 1".into());
        }
        if self.eval.k_values.is_empty() || self.eval.k_values.contains(&0) {
            errs.push("eval.k_values must be non-empty and positive".into());
        }
        if let Some(b) = &self.eval.buckets {
            if let Err(e) = metrics::validate_buckets(b) {
                errs.push(e.to_string());
            }
        }
        if let Some(p) = &self.eval.verdicts {
            if matches!(cmd, Command::Eval) && !p.exists() {
                errs.push(format!("eval.verdicts: {} does not exist", p.display()));
            }
        }
        errs
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Stats {
        input: PathBuf,
        kind: DatasetKind,
    },
    /// `reverse` swaps the source and target corpora.
    BuildComp {
        origin: Origin,
        reverse: bool,
    },
    GenRefs,
    MakeTests,
    JudgeSelect,
    Eval,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Stats { .. } => "stats",
            Command::BuildComp { .. } => "build-comp",
            Command::GenRefs => "gen-refs",
            Command::MakeTests => "make-tests",
            Command::JudgeSelect => "judge-select",
            Command::Eval => "eval",
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
    #[error("{0}")]
    Runtime(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Validation(_) => 1,
            PipelineError::Runtime(_) => 2,
        }
    }
}

fn rt(e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Runtime(e.to_string())
}

/// What a finished command reports. `partial` means some inputs were skipped.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Outcome {
    pub lines: Vec<String>,
    pub partial: bool,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.partial {
            3
        } else {
            0
        }
    }
}

// ------------------------------------------------------------ record files

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub example_id: String,
    pub lang: Lang,
    pub request_id: String,
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRecord {
    pub example_id: String,
    pub suite: TestSuite,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestReportRecord {
    pub example_id: String,
    pub usable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<FilterReport>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub example_id: String,
    pub verdicts: Vec<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub command: String,
    pub completed: usize,
    pub total: usize,
    pub complete: bool,
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| rt(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| rt(format!("{}:{}: {e}", path.display(), i + 1))))
        .collect()
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), PipelineError> {
    let io = |e: std::io::Error| rt(format!("{}: {e}", path.display()));
    let mut w = BufWriter::new(std::fs::File::create(path).map_err(io)?);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(rt)?;
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let text = serde_json::to_string_pretty(value).map_err(rt)? + "\n";
    std::fs::write(path, text).map_err(|e| rt(format!("{}: {e}", path.display())))
}

fn load(path: &Option<PathBuf>, kind: DatasetKind) -> Result<Dataset, PipelineError> {
    let path = path.as_ref().expect("validated");
    corpus::load_dataset(path, kind).map_err(|e| rt(format!("{}: {e}", path.display())))
}

fn parallel_examples(cfg: &PipelineConfig) -> Result<Vec<ParallelExample>, PipelineError> {
    let ds = load(&cfg.data.parallel, DatasetKind::Parallel)?;
    let recs = ds.parallel_records().expect("parallel kind").to_vec();
    let bad: Vec<String> = recs
        .iter()
        .filter(|e| e.src.lang != cfg.src_lang || e.ref_lang() != Some(cfg.tgt_lang))
        .map(|e| format!("example `{}` is not {} -> {}", e.id(), cfg.src_lang, cfg.tgt_lang))
        .collect();
    if bad.is_empty() {
        Ok(recs)
    } else {
        Err(PipelineError::Validation(bad))
    }
}

/// Prompt layout `translate-v1` used by gen-refs.
pub fn translation_prompt(src: &corpus::Program, tgt_lang: Lang) -> String {
    format!(
        "### translate-v1 source={} target={}\n<source lang=\"{}\">\n{}\n</source>\n<target lang=\"{}\">\n",
        src.lang,
        tgt_lang,
        src.lang,
        src.code.trim_end(),
        tgt_lang
    )
}

/// Per-example input seed: the global seed mixed with an FNV-1a hash of the id.
pub fn example_seed(seed: u64, example_id: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in example_id.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

// ------------------------------------------------------------ commands

/// Validates, then either prints the plan (`dry_run`) or runs `cmd`.
pub fn run(cmd: &Command, cfg: &PipelineConfig, dry_run: bool) -> Result<Outcome, PipelineError> {
    run_with_source(cmd, cfg, dry_run, None)
}

/// As [`run`], with an injected candidate source instead of the HTTP client.
pub fn run_with_source(
    cmd: &Command,
    cfg: &PipelineConfig,
    dry_run: bool,
    source: Option<&dyn CandidateSource>,
) -> Result<Outcome, PipelineError> {
    if let Command::Stats { input, kind } = cmd {
        return if dry_run {
            Ok(Outcome { lines: vec![format!("stats: read {} as {}", input.display(), kind.as_str())], partial: false })
        } else {
            cmd_stats(input, *kind)
        };
    }
    let errs = cfg.validate_for(cmd);
    if !errs.is_empty() {
        return Err(PipelineError::Validation(errs));
    }
    if dry_run {
        return Ok(Outcome { lines: plan(cmd, cfg), partial: false });
    }
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| rt(format!("{}: {e}", cfg.out_dir.display())))?;
    let http;
    let source = match source {
        Some(s) => s,
        None => {
            http = HttpClient::new(&cfg.generation.client_config());
            &http
        }
    };
    match cmd {
        Command::Stats { .. } => unreachable!("handled above"),
        Command::BuildComp { origin, reverse } => cmd_build_comp(cfg, *origin, *reverse, source),
        Command::GenRefs => cmd_gen_refs(cfg, source),
        Command::MakeTests => cmd_make_tests(cfg),
        Command::JudgeSelect => cmd_judge_select(cfg),
        Command::Eval => cmd_eval(cfg),
    }
}

/// Human-readable execution plan; touches nothing.
pub fn plan(cmd: &Command, cfg: &PipelineConfig) -> Vec<String> {
    let p = |x: &Option<PathBuf>| x.as_ref().map_or("-".into(), |p| p.display().to_string());
    let o = |f: &str| cfg.out(f).display().to_string();
    let mut lines = vec![format!(
        "{}: {} -> {}, seed {}, {} worker(s)",
        cmd.name(),
        cfg.src_lang,
        cfg.tgt_lang,
        cfg.seed,
        cfg.workers
    )];
    match cmd {
        Command::Stats { .. } => {}
        Command::BuildComp { origin, reverse } => {
            let (a, b) = if *reverse {
                (&cfg.data.mono_tgt, &cfg.data.mono_src)
            } else {
                (&cfg.data.mono_src, &cfg.data.mono_tgt)
            };
            lines.push(format!("read {} and {}", p(a), p(b)));
            if *origin == Origin::Generated {
                lines.push(format!(
                    "request {} candidate(s) per program from {}",
                    cfg.generation.n_candidates, cfg.generation.endpoint
                ));
            }
            let stem = comp_stem(*origin, *reverse);
            lines.push(format!(
                "write {} and {}",
                o(&format!("comparable.{stem}.jsonl")),
                o(&format!("skips.{stem}.jsonl"))
            ));
        }
        Command::GenRefs => {
            lines.push(format!("read {}", p(&cfg.data.parallel)));
            lines.push(format!(
                "request {} candidate(s) per example from {}",
                cfg.generation.n_candidates, cfg.generation.endpoint
            ));
            lines.push(format!("append to {} (resumable)", o("candidates.jsonl")));
        }
        Command::MakeTests => {
            lines.push(format!("read {}", p(&cfg.data.parallel)));
            lines.push(format!(
                "generate {} input(s) per example and run them in {}",
                cfg.testgen.n_inputs, cfg.src_lang
            ));
            lines.push(format!("write {} and {}", o("suites.jsonl"), o("test_reports.jsonl")));
        }
        Command::JudgeSelect => {
            lines.push(format!("read {}, {}, {}", p(&cfg.data.parallel), o("candidates.jsonl"), o("suites.jsonl")));
            lines
                .push(format!("judge candidates in {} and select up to {} per example", cfg.tgt_lang, cfg.selection.k));
            lines.push(format!("write {}, {}, {}", o("verdicts.jsonl"), o("selections.jsonl"), o("augmented.jsonl")));
        }
        Command::Eval => {
            lines.push(format!("read {} and {}", p(&cfg.data.parallel), eval_candidates_path(cfg).display()));
            lines.push(format!("CA@k for k in {:?}", cfg.eval.k_values));
            lines.push(format!("write {} and {}", o("eval_report.json"), o("eval_summary.txt")));
        }
    }
    lines
}

fn cmd_stats(input: &Path, kind: DatasetKind) -> Result<Outcome, PipelineError> {
    let loaded = corpus::load_dataset_lenient(input, kind).map_err(rt)?;
    let report = corpus::corpus_stats(&loaded.dataset);
    let mut lines: Vec<String> = report.to_string().lines().map(String::from).collect();
    for e in &loaded.errors {
        lines.push(format!("error: {e}"));
    }
    Ok(Outcome { lines, partial: !loaded.errors.is_empty() })
}

fn comp_stem(origin: Origin, reverse: bool) -> String {
    if reverse {
        format!("{}.rev", origin.as_str())
    } else {
        origin.as_str().to_string()
    }
}

fn cmd_build_comp(
    cfg: &PipelineConfig,
    origin: Origin,
    reverse: bool,
    source: &dyn CandidateSource,
) -> Result<Outcome, PipelineError> {
    let (src_path, tgt_path) =
        if reverse { (&cfg.data.mono_tgt, &cfg.data.mono_src) } else { (&cfg.data.mono_src, &cfg.data.mono_tgt) };
    let tgt_lang = if reverse { cfg.src_lang } else { cfg.tgt_lang };
    let src = load(src_path, DatasetKind::Monolingual)?;
    let pairing = cfg.effective_pairing();
    let mut skips = Vec::new();
    let ds = match origin {
        Origin::Natural => compcorp::build_natural(&src, &load(tgt_path, DatasetKind::Monolingual)?, &pairing),
        Origin::Random => compcorp::build_random(&src, &load(tgt_path, DatasetKind::Monolingual)?, &pairing),
        Origin::Knn => {
            let tgt = load(tgt_path, DatasetKind::Monolingual)?;
            let (sv, tv) = knn_vectors(cfg, &src, &tgt, reverse)?;
            compcorp::build_knn(&src, &tgt, &sv, &tv, &pairing)
        }
        Origin::Generated => {
            let gen = GenerateConfig {
                tgt_lang,
                include_source_in_prompt: cfg.generation.include_source_in_prompt,
                n_candidates: cfg.generation.n_candidates,
                max_tokens: cfg.generation.max_tokens,
                workers: cfg.workers,
            };
            compcorp::build_generated(&src, source, &gen).map(|(ds, s)| {
                skips = s;
                ds
            })
        }
    }
    .map_err(rt)?;
    let stem = comp_stem(origin, reverse);
    corpus::write_dataset(&ds, &cfg.out(&format!("comparable.{stem}.jsonl"))).map_err(rt)?;
    compcorp::write_skip_report(&skips, &cfg.out(&format!("skips.{stem}.jsonl"))).map_err(rt)?;
    let stats = corpus::corpus_stats(&ds);
    let mut lines = vec![format!("{} pair(s), {} skipped", ds.len(), skips.len())];
    lines.extend(stats.by_origin.iter().map(|(k, v)| format!("  {k}: {v}")));
    Ok(Outcome { lines, partial: !skips.is_empty() })
}

fn knn_vectors(
    cfg: &PipelineConfig,
    src: &Dataset,
    tgt: &Dataset,
    reverse: bool,
) -> Result<(Vec<compcorp::EmbeddingVector>, Vec<compcorp::EmbeddingVector>), PipelineError> {
    let (sp, tp) = if reverse {
        (&cfg.data.tgt_vectors, &cfg.data.src_vectors)
    } else {
        (&cfg.data.src_vectors, &cfg.data.tgt_vectors)
    };
    if let (Some(a), Some(b)) = (sp, tp) {
        return Ok((compcorp::read_vectors(a).map_err(rt)?, compcorp::read_vectors(b).map_err(rt)?));
    }
    // One vocabulary for both sides keeps the dimensions aligned.
    let mut all = src.programs().expect("mono").to_vec();
    all.extend_from_slice(tgt.programs().expect("mono"));
    let mut vecs = compcorp::embed_tfidf(&all).map_err(rt)?;
    let tv = vecs.split_off(src.len());
    Ok((vecs, tv))
}

/// Reads complete candidate lines, truncating a torn trailing line.
fn resume_candidates(path: &Path) -> Result<Vec<CandidateSet>, PipelineError> {
    let Ok(text) = std::fs::read_to_string(path) else { return Ok(Vec::new()) };
    let mut good = Vec::new();
    let mut good_len = 0;
    for chunk in text.split_inclusive('\n') {
        if !chunk.ends_with('\n') {
            break;
        }
        match serde_json::from_str::<CandidateSet>(chunk) {
            Ok(set) => {
                good.push(set);
                good_len += chunk.len();
            }
            Err(_) => break,
        }
    }
    if good_len < text.len() {
        log::warn!("{}: dropping {} torn byte(s)", path.display(), text.len() - good_len);
        let f = OpenOptions::new().write(true).open(path).map_err(rt)?;
        f.set_len(good_len as u64).map_err(rt)?;
    }
    Ok(good)
}

fn cmd_gen_refs(cfg: &PipelineConfig, source: &dyn CandidateSource) -> Result<Outcome, PipelineError> {
    let examples = parallel_examples(cfg)?;
    let path = cfg.out("candidates.jsonl");
    let progress_path = cfg.out("candidates.jsonl.progress");
    let done: HashSet<String> = resume_candidates(&path)?.into_iter().map(|s| s.example_id).collect();
    let todo: Vec<&ParallelExample> = examples.iter().filter(|e| !done.contains(e.id())).collect();
    let mut file = OpenOptions::new().create(true).append(true).open(&path).map_err(rt)?;
    let mut completed = done.len();
    let write_progress = |completed: usize, complete: bool| {
        write_json(&progress_path, &Progress { command: "gen-refs".into(), completed, total: examples.len(), complete })
    };
    let decode = cfg.generation.decode.unwrap_or(Decode::Beam { width: cfg.generation.n_candidates });
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers.max(1)).build().map_err(rt)?;
    for chunk in todo.chunks(cfg.workers.max(1)) {
        let results: Vec<Result<CandidateSet, String>> = pool.install(|| {
            use rayon::prelude::*;
            chunk
                .par_iter()
                .map(|ex| {
                    let req = GenerationRequest {
                        prompt: translation_prompt(&ex.src, cfg.tgt_lang),
                        target_lang: cfg.tgt_lang,
                        n: cfg.generation.n_candidates,
                        max_tokens: cfg.generation.max_tokens,
                        decode,
                        request_id: format!("{}:gen-refs", ex.id()),
                    };
                    source
                        .request_candidates(&req)
                        .map(|candidates| CandidateSet {
                            example_id: ex.id().to_string(),
                            lang: cfg.tgt_lang,
                            request_id: req.request_id.clone(),
                            candidates,
                        })
                        .map_err(|e| format!("example `{}`: {e}", ex.id()))
                })
                .collect()
        });
        for r in results {
            match r {
                Ok(set) => {
                    let line = serde_json::to_string(&set).map_err(rt)? + "\n";
                    file.write_all(line.as_bytes()).map_err(rt)?;
                    completed += 1;
                }
                Err(msg) => {
                    file.flush().map_err(rt)?;
                    write_progress(completed, false)?;
                    return Err(rt(format!("{msg}; {completed}/{} done, re-run to resume", examples.len())));
                }
            }
        }
        file.flush().map_err(rt)?;
        write_progress(completed, false)?;
    }
    write_progress(completed, true)?;
    Ok(Outcome {
        lines: vec![format!(
            "{} example(s) requested, {} already done, {} total",
            todo.len(),
            done.len(),
            examples.len()
        )],
        partial: false,
    })
}

fn cmd_make_tests(cfg: &PipelineConfig) -> Result<Outcome, PipelineError> {
    let examples = parallel_examples(cfg)?;
    let sandbox = Sandbox::new(cfg.effective_sandbox()).map_err(rt)?;
    sandbox.probe(cfg.src_lang).map_err(rt)?;
    let build = |ex: &ParallelExample| -> Result<(Option<SuiteRecord>, TestReportRecord), PipelineError> {
        let id = ex.id().to_string();
        let sig = match extract_signature(&ex.src) {
            Ok(s) => s,
            Err(e) => {
                return Ok((
                    None,
                    TestReportRecord { example_id: id, usable: false, reason: Some(e.to_string()), report: None },
                ))
            }
        };
        let ranges = GenRanges { seed: example_seed(cfg.seed, &id), ..cfg.testgen.clone() };
        let inputs = gen_inputs(&sig, &ranges);
        let (suite, report) = sandbox.build_test_suite(&ex.src, &sig, &inputs).map_err(rt)?;
        let usable = suite.is_usable();
        Ok((
            usable.then(|| SuiteRecord { example_id: id.clone(), suite }),
            TestReportRecord { example_id: id, usable, reason: report.reason.clone(), report: Some(report) },
        ))
    };
    let results: Result<Vec<_>, PipelineError> = sandbox.install(|| {
        use rayon::prelude::*;
        examples.par_iter().map(build).collect()
    });
    let (suites, reports): (Vec<_>, Vec<_>) = results?.into_iter().unzip();
    let suites: Vec<SuiteRecord> = suites.into_iter().flatten().collect();
    write_jsonl(&cfg.out("suites.jsonl"), &suites)?;
    write_jsonl(&cfg.out("test_reports.jsonl"), &reports)?;
    let mut lines = vec![format!("{} of {} example(s) testable", suites.len(), examples.len())];
    for r in reports.iter().filter(|r| !r.usable) {
        lines.push(format!("untestable {}: {}", r.example_id, r.reason.as_deref().unwrap_or("unknown")));
    }
    Ok(Outcome { partial: suites.len() < examples.len(), lines })
}

fn load_suites(cfg: &PipelineConfig) -> Result<HashMap<String, TestSuite>, PipelineError> {
    Ok(read_jsonl::<SuiteRecord>(&cfg.out("suites.jsonl"))?.into_iter().map(|r| (r.example_id, r.suite)).collect())
}

fn load_candidates(path: &Path) -> Result<HashMap<String, Vec<Candidate>>, PipelineError> {
    Ok(read_jsonl::<CandidateSet>(path)?
        .into_iter()
        .map(|s| {
            let mut c = s.candidates;
            c.sort_by_key(|c| c.rank);
            (s.example_id, c)
        })
        .collect())
}

fn cmd_judge_select(cfg: &PipelineConfig) -> Result<Outcome, PipelineError> {
    let examples = parallel_examples(cfg)?;
    let candidates = load_candidates(&cfg.out("candidates.jsonl"))?;
    let suites = load_suites(cfg)?;
    let sandbox = Sandbox::new(cfg.effective_sandbox()).map_err(rt)?;
    sandbox.probe(cfg.tgt_lang).map_err(rt)?;
    let mut verdicts = Vec::new();
    let mut selections = Vec::new();
    let mut lines = Vec::new();
    let mut partial = false;
    for ex in &examples {
        let id = ex.id();
        let Some(suite) = suites.get(id) else {
            log::info!("{id}: no test suite, passing through");
            lines.push(format!("{id}: no suite, unchanged"));
            partial = true;
            continue;
        };
        let cands = candidates.get(id).map(Vec::as_slice).unwrap_or(&[]);
        let (correct, vs) = sandbox.filter_candidates(cands, cfg.tgt_lang, suite).map_err(rt)?;
        let anchors: Vec<String> = ex.refs.iter().map(|r| r.code.clone()).collect();
        let picked = refselect::select_diverse(&correct, &anchors, &cfg.selection);
        lines.push(format!("{id}: candidates {} correct {} selected {}", cands.len(), correct.len(), picked.len()));
        selections.extend(picked.into_iter().map(|c| Selection {
            example_id: id.to_string(),
            candidate_rank: c.rank,
            lang: cfg.tgt_lang,
            text: c.text,
        }));
        verdicts.push(VerdictRecord { example_id: id.to_string(), verdicts: vs });
    }
    let ds = Dataset::parallel(dataset_stem(&cfg.data.parallel), examples);
    let augmented = refselect::augment_parallel(&ds, &refselect::group_selections(selections.clone())).map_err(rt)?;
    write_jsonl(&cfg.out("verdicts.jsonl"), &verdicts)?;
    refselect::write_selections(&selections, &cfg.out("selections.jsonl")).map_err(rt)?;
    corpus::write_dataset(&augmented, &cfg.out("augmented.jsonl")).map_err(rt)?;
    Ok(Outcome { lines, partial })
}

fn dataset_stem(p: &Option<PathBuf>) -> String {
    p.as_ref().and_then(|p| p.file_stem()).map_or("parallel".into(), |s| s.to_string_lossy().into_owned())
}

fn eval_candidates_path(cfg: &PipelineConfig) -> PathBuf {
    cfg.eval.candidates.clone().unwrap_or_else(|| cfg.out("candidates.jsonl"))
}

fn cmd_eval(cfg: &PipelineConfig) -> Result<Outcome, PipelineError> {
    let examples = parallel_examples(cfg)?;
    let candidates = load_candidates(&eval_candidates_path(cfg))?;
    let sandbox = Sandbox::new(cfg.effective_sandbox()).map_err(rt)?;

    let judged: BTreeMap<String, Vec<bool>> = match &cfg.eval.verdicts {
        Some(path) => read_jsonl::<VerdictRecord>(path)?
            .into_iter()
            .map(|mut r| {
                r.verdicts.sort_by_key(|v| v.candidate_rank);
                (r.example_id, r.verdicts.iter().map(|v| v.passed).collect())
            })
            .collect(),
        None => {
            let suites = load_suites(cfg)?;
            sandbox.probe(cfg.tgt_lang).map_err(rt)?;
            let mut out = BTreeMap::new();
            for ex in &examples {
                let Some(suite) = suites.get(ex.id()) else { continue };
                let cands = candidates.get(ex.id()).map(Vec::as_slice).unwrap_or(&[]);
                let (_, vs) = sandbox.filter_candidates(cands, cfg.tgt_lang, suite).map_err(rt)?;
                out.insert(ex.id().to_string(), vs.iter().map(|v| v.passed).collect());
            }
            out
        }
    };
    // Examples in dataset order; untestable ones (no verdicts) are left out of CA@k.
    let judged_examples: Vec<JudgedExample> = examples
        .iter()
        .filter_map(|ex| {
            judged.get(ex.id()).map(|v| JudgedExample { example_id: ex.id().to_string(), verdicts: v.clone() })
        })
        .collect();
    let mut ca_at = BTreeMap::new();
    if !judged_examples.is_empty() {
        for &k in &cfg.eval.k_values {
            ca_at.insert(k, metrics::ca_at_k(&judged_examples, k).map_err(rt)?);
        }
    }

    let mut top1 = Vec::new();
    let mut refs = Vec::new();
    let mut first_refs = Vec::new();
    for ex in &examples {
        let text = candidates.get(ex.id()).and_then(|c| c.first()).map_or(String::new(), |c| c.text.clone());
        top1.push(text);
        refs.push(ex.refs.iter().map(|r| r.code.clone()).collect::<Vec<_>>());
        first_refs.push(ex.refs[0].code.clone());
    }
    let n = examples.len();
    let bleu = if n > 0 { Some(metrics::bleu(&top1, &refs).map_err(rt)?) } else { None };
    let syntax_accuracy = if cfg.eval.syntax && n > 0 {
        sandbox.probe(cfg.tgt_lang).map_err(rt)?;
        let outs: Vec<(String, Lang)> = top1.iter().map(|t| (t.clone(), cfg.tgt_lang)).collect();
        Some(metrics::syntax_accuracy(&outs, &sandbox).map_err(rt)?)
    } else {
        None
    };
    let construct_prf = metrics::construct_match(&top1, &first_refs, &vec![cfg.tgt_lang; n]).map_err(rt)?;
    let buckets = cfg.eval.buckets.clone().unwrap_or_else(metrics::default_buckets);
    let unique_histogram =
        metrics::unique_correct_histogram(&judged_examples, cfg.eval.hist_n, &buckets).map_err(rt)?;
    let report = EvalReport {
        lang_pair: format!("{}->{}", cfg.src_lang, cfg.tgt_lang),
        n_examples: n,
        ca_at,
        bleu,
        syntax_accuracy,
        construct_prf,
        unique_histogram,
    };
    write_json(&cfg.out("eval_report.json"), &report)?;
    let summary = report.summary_text();
    std::fs::write(cfg.out("eval_summary.txt"), &summary).map_err(rt)?;
    Ok(Outcome { lines: summary.lines().map(String::from).collect(), partial: judged_examples.len() < n })
}
