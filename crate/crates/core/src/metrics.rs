//! Evaluation metrics: CA@k, corpus BLEU, syntax accuracy, construct match,
//! unique-correct histograms and Welch's t-test.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::corpus::Lang;
use crate::lexer::lex;
use crate::sandbox::{Sandbox, SandboxError};
use crate::tokenize::code_tokens;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no examples")]
    Empty,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("example {0} has no references")]
    NoReferences(usize),
    #[error("sample of size {0} is too small (need at least 2)")]
    SampleTooSmall(usize),
    #[error("non-finite value in sample")]
    NonFinite,
    #[error("invalid buckets: {0}")]
    Buckets(String),
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
}

/// Pass/fail verdicts of one example's candidates, best-scored first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgedExample {
    pub example_id: String,
    pub verdicts: Vec<bool>,
}

/// Fraction of examples with a passing candidate among the first `k`.
pub fn ca_at_k(examples: &[JudgedExample], k: usize) -> Result<f64, MetricsError> {
    if examples.is_empty() {
        return Err(MetricsError::Empty);
    }
    if k == 0 {
        return Err(MetricsError::ZeroK);
    }
    let hits = examples.iter().filter(|e| e.verdicts.iter().take(k).any(|v| *v)).count();
    Ok(hits as f64 / examples.len() as f64)
}

const MAX_ORDER: usize = 4;

fn ngram_counts(toks: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut m = HashMap::new();
    for w in toks.windows(n) {
        *m.entry(w).or_default() += 1;
    }
    m
}

/// Corpus BLEU (0..100) over [`code_tokens`], orders 1 to 4.
///
/// A zero precision at order n is replaced by `1 / (2 * cand_ngrams_n)`; orders
/// with no candidate n-grams at all are left out of the geometric mean. The
/// brevity penalty uses the reference length closest to each candidate
/// (shorter on ties).
pub fn bleu(candidates: &[String], references: &[Vec<String>]) -> Result<f64, MetricsError> {
    if candidates.len() != references.len() {
        return Err(MetricsError::LengthMismatch(candidates.len(), references.len()));
    }
    let mut matches = [0usize; MAX_ORDER];
    let mut totals = [0usize; MAX_ORDER];
    let (mut c_len, mut r_len) = (0usize, 0usize);
    for (i, (cand, refs)) in candidates.iter().zip(references).enumerate() {
        if refs.is_empty() {
            return Err(MetricsError::NoReferences(i));
        }
        let c = code_tokens(cand);
        let rs: Vec<Vec<String>> = refs.iter().map(|r| code_tokens(r)).collect();
        c_len += c.len();
        r_len += rs.iter().map(|r| r.len()).min_by_key(|&l| (l.abs_diff(c.len()), l)).expect("non-empty refs");
        for n in 1..=MAX_ORDER {
            let cc = ngram_counts(&c, n);
            let ref_counts: Vec<_> = rs.iter().map(|r| ngram_counts(r, n)).collect();
            for (g, count) in &cc {
                let max_ref = ref_counts.iter().map(|m| m.get(g).copied().unwrap_or(0)).max().unwrap_or(0);
                matches[n - 1] += (*count).min(max_ref);
            }
            totals[n - 1] += c.len().saturating_sub(n - 1);
        }
    }
    if c_len == 0 {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    let mut orders = 0;
    for n in 0..MAX_ORDER {
        if totals[n] == 0 {
            continue;
        }
        let p = if matches[n] == 0 { 1.0 / (2.0 * totals[n] as f64) } else { matches[n] as f64 / totals[n] as f64 };
        log_sum += p.ln();
        orders += 1;
    }
    let bp = if c_len > r_len { 1.0 } else { (1.0 - r_len as f64 / c_len as f64).exp() };
    Ok(100.0 * bp * (log_sum / orders as f64).exp())
}

/// Fraction of outputs that pass the sandbox's compile-only or parse-only check.
pub fn syntax_accuracy(outputs: &[(String, Lang)], sandbox: &Sandbox) -> Result<f64, MetricsError> {
    if outputs.is_empty() {
        return Err(MetricsError::Empty);
    }
    let oks: Result<Vec<bool>, SandboxError> =
        sandbox.install(|| outputs.par_iter().map(|(code, lang)| sandbox.syntax_ok(code, *lang)).collect());
    let ok = oks?.into_iter().filter(|b| *b).count();
    Ok(ok as f64 / outputs.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Construct {
    #[serde(rename = "LOOP")]
    Loop,
    #[serde(rename = "IF")]
    If,
    #[serde(rename = "ELSE_IF")]
    ElseIf,
}

impl Construct {
    pub const ALL: [Construct; 3] = [Construct::Loop, Construct::If, Construct::ElseIf];

    pub fn as_str(self) -> &'static str {
        match self {
            Construct::Loop => "LOOP",
            Construct::If => "IF",
            Construct::ElseIf => "ELSE_IF",
        }
    }
}

impl fmt::Display for Construct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Keyword scan outside strings and comments.
pub fn detect_constructs(code: &str, lang: Lang) -> BTreeSet<Construct> {
    let toks = lex(code, lang);
    let mut out = BTreeSet::new();
    for (i, t) in toks.iter().enumerate() {
        if t.is("for") || t.is("while") {
            out.insert(Construct::Loop);
        } else if t.is("if") {
            out.insert(Construct::If);
        }
        let else_if = match lang {
            Lang::Python => t.is("elif"),
            Lang::Java | Lang::Cpp => t.is("else") && toks.get(i + 1).is_some_and(|n| n.is("if")),
        };
        if else_if {
            out.insert(Construct::ElseIf);
        }
    }
    out
}

/// Precision, recall and F1 in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let p = ratio(tp, tp + fp);
        let r = ratio(tp, tp + fn_);
        let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        Prf { precision: 100.0 * p, recall: 100.0 * r, f1: 100.0 * f1 }
    }
}

/// Per-construct agreement between outputs (prediction) and references (truth).
pub fn construct_match(
    outputs: &[String],
    references: &[String],
    langs: &[Lang],
) -> Result<BTreeMap<Construct, Prf>, MetricsError> {
    if outputs.len() != references.len() {
        return Err(MetricsError::LengthMismatch(outputs.len(), references.len()));
    }
    if outputs.len() != langs.len() {
        return Err(MetricsError::LengthMismatch(outputs.len(), langs.len()));
    }
    let mut counts: BTreeMap<Construct, (usize, usize, usize)> =
        Construct::ALL.iter().map(|c| (*c, (0, 0, 0))).collect();
    for ((out, reference), lang) in outputs.iter().zip(references).zip(langs) {
        let pred = detect_constructs(out, *lang);
        let truth = detect_constructs(reference, *lang);
        for c in Construct::ALL {
            let e = counts.get_mut(&c).expect("all constructs present");
            match (pred.contains(&c), truth.contains(&c)) {
                (true, true) => e.0 += 1,
                (true, false) => e.1 += 1,
                (false, true) => e.2 += 1,
                (false, false) => {}
            }
        }
    }
    Ok(counts.into_iter().map(|(c, (tp, fp, fn_))| (c, Prf::from_counts(tp, fp, fn_))).collect())
}

/// Inclusive count range; `hi = None` is open-ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bucket {
    pub lo: usize,
    pub hi: Option<usize>,
}

impl Bucket {
    pub fn label(&self) -> String {
        match self.hi {
            None => format!(">={}", self.lo),
            Some(hi) if hi == self.lo => self.lo.to_string(),
            Some(hi) => format!("{}-{}", self.lo, hi),
        }
    }

    fn contains(&self, x: usize) -> bool {
        x >= self.lo && self.hi.is_none_or(|hi| x <= hi)
    }
}

pub fn default_buckets() -> Vec<Bucket> {
    let b = |lo, hi| Bucket { lo, hi };
    vec![b(0, Some(0)), b(1, Some(5)), b(6, Some(10)), b(11, Some(15)), b(16, None)]
}

/// Buckets must tile `[0, inf)` without gaps or overlaps.
pub fn validate_buckets(buckets: &[Bucket]) -> Result<(), MetricsError> {
    let bad = |m: &str| Err(MetricsError::Buckets(m.into()));
    let mut next = 0;
    for (i, b) in buckets.iter().enumerate() {
        if b.lo != next {
            return bad("buckets must start at 0 and be contiguous");
        }
        match b.hi {
            Some(hi) if hi < b.lo => return bad("bucket hi < lo"),
            Some(hi) => next = hi + 1,
            None if i + 1 == buckets.len() => return Ok(()),
            None => return bad("only the last bucket may be open-ended"),
        }
    }
    bad("last bucket must be open-ended")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bucket: String,
    pub count: usize,
}

/// Buckets each example by its number of passing candidates among the first `n`.
pub fn unique_correct_histogram(
    examples: &[JudgedExample],
    n: usize,
    buckets: &[Bucket],
) -> Result<Vec<HistogramBin>, MetricsError> {
    validate_buckets(buckets)?;
    let mut counts = vec![0usize; buckets.len()];
    for e in examples {
        let correct = e.verdicts.iter().take(n).filter(|v| **v).count();
        let slot = buckets.iter().position(|b| b.contains(correct)).expect("buckets tile [0, inf)");
        counts[slot] += 1;
    }
    Ok(buckets.iter().zip(counts).map(|(b, count)| HistogramBin { bucket: b.label(), count }).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    /// Two-tailed.
    pub p: f64,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Welch's two-sample t-test with Welch-Satterthwaite degrees of freedom.
/// Two constant samples give `t = 0, p = 1` when their means agree and
/// `p = 0` otherwise.
pub fn t_test(a: &[f64], b: &[f64]) -> Result<TTest, MetricsError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(MetricsError::SampleTooSmall(s.len()));
        }
        if s.iter().any(|x| !x.is_finite()) {
            return Err(MetricsError::NonFinite);
        }
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    let diff = ma - mb;
    if se2 == 0.0 {
        let df = na + nb - 2.0;
        return Ok(if diff == 0.0 {
            TTest { t: 0.0, df, p: 1.0 }
        } else {
            TTest { t: diff.signum() * f64::INFINITY, df, p: 0.0 }
        });
    }
    let t = diff / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(TTest { t, df, p })
}

/// Everything `eval` reports for one language pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub lang_pair: String,
    pub n_examples: usize,
    pub ca_at: BTreeMap<usize, f64>,
    pub bleu: Option<f64>,
    pub syntax_accuracy: Option<f64>,
    pub construct_prf: BTreeMap<Construct, Prf>,
    pub unique_histogram: Vec<HistogramBin>,
}

impl EvalReport {
    /// Flat text: a `BLEU | CA@1` table row, then the remaining figures.
    pub fn summary_text(&self) -> String {
        let opt = |x: Option<f64>, scale: f64| x.map_or("-".to_string(), |v| format!("{:.2}", v * scale));
        let ca1 = self.ca_at.get(&1).copied();
        let mut s = String::new();
        let _ = writeln!(s, "pair | BLEU | CA@1");
        let _ = writeln!(s, "{} | {} | {}", self.lang_pair, opt(self.bleu, 1.0), opt(ca1, 100.0));
        let _ = writeln!(s, "examples: {}", self.n_examples);
        for (k, v) in &self.ca_at {
            let _ = writeln!(s, "CA@{k}: {:.2}", v * 100.0);
        }
        let _ = writeln!(s, "syntax accuracy: {}", opt(self.syntax_accuracy, 100.0));
        for (c, prf) in &self.construct_prf {
            let _ = writeln!(s, "{c}: P {:.1} R {:.1} F1 {:.1}", prf.precision, prf.recall, prf.f1);
        }
        let bins: Vec<String> = self.unique_histogram.iter().map(|b| format!("{}:{}", b.bucket, b.count)).collect();
        let _ = writeln!(s, "unique correct: {}", bins.join(" "));
        s
    }
}
