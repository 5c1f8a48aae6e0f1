//! Programs, cross-language pairs and line-delimited datasets.
//!
//! Every dataset file holds one JSON record per line. Monolingual files hold
//! bare [`Program`] records, comparable files hold [`ComparableExample`]
//! records and parallel files hold [`ParallelExample`] records. The schema is
//! documented in `schema/records.md`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lang {
    Java,
    Python,
    Cpp,
}

impl Lang {
    pub const ALL: [Lang; 3] = [Lang::Java, Lang::Python, Lang::Cpp];

    pub fn as_str(self) -> &'static str {
        match self {
            Lang::Java => "java",
            Lang::Python => "python",
            Lang::Cpp => "cpp",
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Lang::Java => "java",
            Lang::Python => "py",
            Lang::Cpp => "cpp",
        }
    }
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Lang {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "java" => Ok(Lang::Java),
            "python" | "py" => Ok(Lang::Python),
            "cpp" | "c++" => Ok(Lang::Cpp),
            other => Err(format!("unsupported language `{other}`")),
        }
    }
}

/// One source-code unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Program {
    pub id: String,
    pub lang: Lang,
    pub code: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub docstring: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_tag: Option<String>,
}

impl Program {
    pub fn new(id: impl Into<String>, lang: Lang, code: impl Into<String>) -> Self {
        Program { id: id.into(), lang, code: code.into(), docstring: None, problem_id: None, source_tag: None }
    }

    pub fn with_problem(mut self, problem_id: impl Into<String>) -> Self {
        self.problem_id = Some(problem_id.into());
        self
    }

    pub fn with_docstring(mut self, doc: impl Into<String>) -> Self {
        self.docstring = Some(doc.into());
        self
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.source_tag = Some(tag.into());
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("program id is empty".into());
        }
        if self.code.trim().is_empty() {
            return Err(format!("program `{}` has empty code", self.id));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Natural,
    Generated,
    Knn,
    Random,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Natural => "natural",
            Origin::Generated => "generated",
            Origin::Knn => "knn",
            Origin::Random => "random",
        }
    }
}

impl FromStr for Origin {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "natural" => Ok(Origin::Natural),
            "generated" => Ok(Origin::Generated),
            "knn" => Ok(Origin::Knn),
            "random" => Ok(Origin::Random),
            other => Err(format!("unknown origin `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparableExample {
    pub src: Program,
    pub tgt: Program,
    pub origin: Origin,
}

impl ComparableExample {
    pub fn validate(&self) -> Result<(), String> {
        self.src.validate()?;
        self.tgt.validate()?;
        if self.src.lang == self.tgt.lang {
            return Err(format!(
                "src and tgt share language {} (`{}` / `{}`)",
                self.src.lang, self.src.id, self.tgt.id
            ));
        }
        Ok(())
    }

    pub fn key(&self) -> String {
        format!("{}|{}", self.src.id, self.tgt.id)
    }
}

/// A source program with one or more reference translations. `refs[0]` is the
/// original ground truth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParallelExample {
    pub src: Program,
    pub refs: Vec<Program>,
}

impl ParallelExample {
    pub fn id(&self) -> &str {
        &self.src.id
    }

    pub fn ref_lang(&self) -> Option<Lang> {
        self.refs.first().map(|r| r.lang)
    }

    pub fn validate(&self) -> Result<(), String> {
        self.src.validate()?;
        let Some(first) = self.refs.first() else {
            return Err(format!("example `{}` has no references", self.src.id));
        };
        let mut seen = HashSet::new();
        for r in &self.refs {
            r.validate()?;
            if r.lang != first.lang {
                return Err(format!(
                    "example `{}` mixes reference languages {} and {}",
                    self.src.id, first.lang, r.lang
                ));
            }
            if !seen.insert(r.code.as_str()) {
                return Err(format!("example `{}` has duplicate reference `{}`", self.src.id, r.id));
            }
        }
        if first.lang == self.src.lang {
            return Err(format!("example `{}` references share the source language {}", self.src.id, first.lang));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Comparable,
    Parallel,
    Monolingual,
}

impl DatasetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetKind::Comparable => "comparable",
            DatasetKind::Parallel => "parallel",
            DatasetKind::Monolingual => "monolingual",
        }
    }
}

impl FromStr for DatasetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "comparable" => Ok(DatasetKind::Comparable),
            "parallel" => Ok(DatasetKind::Parallel),
            "monolingual" | "mono" => Ok(DatasetKind::Monolingual),
            other => Err(format!("unknown dataset kind `{other}`")),
        }
    }
}

/// Records of a dataset; the variant fixes the dataset kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Records {
    Comparable(Vec<ComparableExample>),
    Parallel(Vec<ParallelExample>),
    Monolingual(Vec<Program>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub name: String,
    pub records: Records,
}

impl Dataset {
    pub fn empty(name: impl Into<String>, kind: DatasetKind) -> Self {
        let records = match kind {
            DatasetKind::Comparable => Records::Comparable(Vec::new()),
            DatasetKind::Parallel => Records::Parallel(Vec::new()),
            DatasetKind::Monolingual => Records::Monolingual(Vec::new()),
        };
        Dataset { name: name.into(), records }
    }

    pub fn comparable(name: impl Into<String>, records: Vec<ComparableExample>) -> Self {
        Dataset { name: name.into(), records: Records::Comparable(records) }
    }

    pub fn parallel(name: impl Into<String>, records: Vec<ParallelExample>) -> Self {
        Dataset { name: name.into(), records: Records::Parallel(records) }
    }

    pub fn monolingual(name: impl Into<String>, records: Vec<Program>) -> Self {
        Dataset { name: name.into(), records: Records::Monolingual(records) }
    }

    pub fn kind(&self) -> DatasetKind {
        match self.records {
            Records::Comparable(_) => DatasetKind::Comparable,
            Records::Parallel(_) => DatasetKind::Parallel,
            Records::Monolingual(_) => DatasetKind::Monolingual,
        }
    }

    pub fn len(&self) -> usize {
        match &self.records {
            Records::Comparable(r) => r.len(),
            Records::Parallel(r) => r.len(),
            Records::Monolingual(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn programs(&self) -> Option<&[Program]> {
        match &self.records {
            Records::Monolingual(r) => Some(r),
            _ => None,
        }
    }

    pub fn comparable_records(&self) -> Option<&[ComparableExample]> {
        match &self.records {
            Records::Comparable(r) => Some(r),
            _ => None,
        }
    }

    pub fn parallel_records(&self) -> Option<&[ParallelExample]> {
        match &self.records {
            Records::Parallel(r) => Some(r),
            _ => None,
        }
    }

    /// Checks every record invariant plus id uniqueness.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut ids = HashSet::new();
        for i in 0..self.len() {
            let (key, res) = self.record_check(i);
            res.map_err(|msg| CorpusError::Invariant { line: i + 1, msg })?;
            if !ids.insert(key.clone()) {
                return Err(CorpusError::DuplicateId { line: i + 1, id: key });
            }
        }
        Ok(())
    }

    fn record_check(&self, i: usize) -> (String, Result<(), String>) {
        match &self.records {
            Records::Comparable(r) => (r[i].key(), r[i].validate()),
            Records::Parallel(r) => (r[i].id().to_string(), r[i].validate()),
            Records::Monolingual(r) => (r[i].id.clone(), r[i].validate()),
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: duplicate id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: {msg}")]
    Invariant { line: usize, msg: String },
}

impl CorpusError {
    pub fn line(&self) -> Option<usize> {
        match self {
            CorpusError::Io { .. } => None,
            CorpusError::Malformed { line, .. }
            | CorpusError::DuplicateId { line, .. }
            | CorpusError::Invariant { line, .. } => Some(*line),
        }
    }
}

// Wire forms allow a missing id so that external dumps can be ingested.
#[derive(Deserialize)]
struct RawProgram {
    #[serde(default)]
    id: Option<String>,
    lang: Lang,
    code: String,
    #[serde(default)]
    docstring: Option<String>,
    #[serde(default)]
    problem_id: Option<String>,
    #[serde(default)]
    source_tag: Option<String>,
}

impl RawProgram {
    fn into_program(self, fallback_id: impl FnOnce() -> String) -> Program {
        Program {
            id: self.id.unwrap_or_else(fallback_id),
            lang: self.lang,
            code: self.code,
            docstring: self.docstring,
            problem_id: self.problem_id,
            source_tag: self.source_tag,
        }
    }
}

#[derive(Deserialize)]
struct RawComparable {
    src: RawProgram,
    tgt: RawProgram,
    origin: Origin,
}

#[derive(Deserialize)]
struct RawParallel {
    src: RawProgram,
    refs: Vec<RawProgram>,
}

/// Outcome of a lenient load: every non-blank line ends up either as a record
/// or as an error.
#[derive(Debug)]
pub struct LoadOutcome {
    pub dataset: Dataset,
    pub errors: Vec<CorpusError>,
    pub lines: usize,
}

fn dataset_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "dataset".to_string())
}

fn parse_line(
    kind: DatasetKind,
    name: &str,
    line_no: usize,
    line: &str,
) -> Result<(String, ParsedRecord), CorpusError> {
    let synth = |suffix: &str| format!("{name}:{line_no}{suffix}");
    let malformed = |e: serde_json::Error| CorpusError::Malformed { line: line_no, msg: e.to_string() };
    let invariant = |msg: String| CorpusError::Invariant { line: line_no, msg };
    match kind {
        DatasetKind::Monolingual => {
            let raw: RawProgram = serde_json::from_str(line).map_err(malformed)?;
            let p = raw.into_program(|| synth(""));
            p.validate().map_err(invariant)?;
            Ok((p.id.clone(), ParsedRecord::Program(p)))
        }
        DatasetKind::Comparable => {
            let raw: RawComparable = serde_json::from_str(line).map_err(malformed)?;
            let ex = ComparableExample {
                src: raw.src.into_program(|| synth(":src")),
                tgt: raw.tgt.into_program(|| synth(":tgt")),
                origin: raw.origin,
            };
            ex.validate().map_err(invariant)?;
            Ok((ex.key(), ParsedRecord::Comparable(ex)))
        }
        DatasetKind::Parallel => {
            let raw: RawParallel = serde_json::from_str(line).map_err(malformed)?;
            let src = raw.src.into_program(|| synth(""));
            let refs =
                raw.refs.into_iter().enumerate().map(|(i, r)| r.into_program(|| synth(&format!(":ref{i}")))).collect();
            let ex = ParallelExample { src, refs };
            ex.validate().map_err(invariant)?;
            Ok((ex.id().to_string(), ParsedRecord::Parallel(ex)))
        }
    }
}

enum ParsedRecord {
    Program(Program),
    Comparable(ComparableExample),
    Parallel(ParallelExample),
}

/// Loads a dataset, collecting per-line errors instead of stopping at the first.
pub fn load_dataset_lenient(path: &Path, kind: DatasetKind) -> Result<LoadOutcome, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
    let name = dataset_name(path);
    Ok(parse_dataset_text(&text, &name, kind))
}

pub fn parse_dataset_text(text: &str, name: &str, kind: DatasetKind) -> LoadOutcome {
    let mut dataset = Dataset::empty(name, kind);
    let mut errors = Vec::new();
    let mut seen = HashSet::new();
    let mut lines = 0;
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        lines += 1;
        let line_no = idx + 1;
        match parse_line(kind, name, line_no, line) {
            Ok((key, rec)) => {
                if !seen.insert(key.clone()) {
                    errors.push(CorpusError::DuplicateId { line: line_no, id: key });
                    continue;
                }
                match (&mut dataset.records, rec) {
                    (Records::Monolingual(v), ParsedRecord::Program(p)) => v.push(p),
                    (Records::Comparable(v), ParsedRecord::Comparable(c)) => v.push(c),
                    (Records::Parallel(v), ParsedRecord::Parallel(p)) => v.push(p),
                    _ => unreachable!("record kind follows dataset kind"),
                }
            }
            Err(e) => errors.push(e),
        }
    }
    LoadOutcome { dataset, errors, lines }
}

/// Loads a dataset; the first bad line aborts the load with its line number.
pub fn load_dataset(path: &Path, kind: DatasetKind) -> Result<Dataset, CorpusError> {
    let mut outcome = load_dataset_lenient(path, kind)?;
    if outcome.errors.is_empty() {
        Ok(outcome.dataset)
    } else {
        Err(outcome.errors.remove(0))
    }
}

/// Serializes a dataset to one JSON line per record.
pub fn dataset_to_string(ds: &Dataset) -> String {
    let mut out = String::new();
    let mut push = |s: serde_json::Result<String>| {
        out.push_str(&s.expect("records always serialize"));
        out.push('\n');
    };
    match &ds.records {
        Records::Comparable(r) => r.iter().for_each(|x| push(serde_json::to_string(x))),
        Records::Parallel(r) => r.iter().for_each(|x| push(serde_json::to_string(x))),
        Records::Monolingual(r) => r.iter().for_each(|x| push(serde_json::to_string(x))),
    }
    out
}

pub fn write_dataset(ds: &Dataset, path: &Path) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io { path: path.to_path_buf(), source };
    let file = fs::File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    w.write_all(dataset_to_string(ds).as_bytes()).and_then(|_| w.flush()).map_err(io_err)
}

/// Per-dataset histograms. Every map sums to `total`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsReport {
    pub name: String,
    pub kind: String,
    pub total: usize,
    /// `src->tgt` for pairs, the language name for monolingual data.
    pub by_lang_pair: BTreeMap<String, usize>,
    /// Origin tag for comparable data, the dataset kind otherwise.
    pub by_origin: BTreeMap<String, usize>,
    /// Keyed by problem id (of the source side); `<none>` when absent.
    pub by_problem: BTreeMap<String, usize>,
}

const NO_PROBLEM: &str = "<none>";

pub fn corpus_stats(ds: &Dataset) -> StatsReport {
    let mut report = StatsReport {
        name: ds.name.clone(),
        kind: ds.kind().as_str().to_string(),
        total: ds.len(),
        ..Default::default()
    };
    let mut bump = |pair: String, origin: &str, problem: Option<&String>| {
        *report.by_lang_pair.entry(pair).or_default() += 1;
        *report.by_origin.entry(origin.to_string()).or_default() += 1;
        let problem = problem.map(String::as_str).unwrap_or(NO_PROBLEM);
        *report.by_problem.entry(problem.to_string()).or_default() += 1;
    };
    match &ds.records {
        Records::Comparable(r) => {
            for ex in r {
                bump(format!("{}->{}", ex.src.lang, ex.tgt.lang), ex.origin.as_str(), ex.src.problem_id.as_ref());
            }
        }
        Records::Parallel(r) => {
            for ex in r {
                let tgt = ex.ref_lang().map(Lang::as_str).unwrap_or("?");
                bump(format!("{}->{}", ex.src.lang, tgt), "parallel", ex.src.problem_id.as_ref());
            }
        }
        Records::Monolingual(r) => {
            for p in r {
                bump(p.lang.to_string(), "monolingual", p.problem_id.as_ref());
            }
        }
    }
    report
}

impl fmt::Display for StatsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "dataset {} ({}): {} records", self.name, self.kind, self.total)?;
        for (title, map) in [("language pairs", &self.by_lang_pair), ("origins", &self.by_origin)] {
            writeln!(f, "{title}:")?;
            for (k, v) in map {
                writeln!(f, "  {k}: {v}")?;
            }
        }
        writeln!(f, "problems: {} groups", self.by_problem.len())
    }
}
