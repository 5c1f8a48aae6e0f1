//! Acceptance criteria. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; exits non-zero on any failure.

use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use transaug::client::Candidate;
use transaug::compcorp::{build_knn, EmbeddingVector, PairingConfig};
use transaug::lexer::{lex, TokKind};
use transaug::metrics::{bleu, ca_at_k, construct_match, detect_constructs, t_test, Construct, JudgedExample};
use transaug::pipeline::{self, read_jsonl, write_jsonl, CandidateSet, Command, PipelineConfig, VerdictRecord};
use transaug::refselect::levenshtein;
use transaug::sandbox::{Sandbox, SandboxConfig};
use transaug::signature::extract_signature;
use transaug::testgen::{gen_inputs, GenRanges, TestInput, Value};
use transaug::{Dataset, Lang, Origin, ParallelExample, Program};

type Check = fn() -> Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn main() {
    let criteria: [(&str, Check); 10] = [
        ("1 judge oracle", judge_oracle),
        ("2 fifty-candidate replay", fifty_candidate_replay),
        ("3 ca@k", ca_at_k_brute_force),
        ("4 edit distance", edit_distance),
        ("5 bleu", bleu_oracle),
        ("6 knn", knn_brute_force),
        ("7 canonical values", canonical_values),
        ("8 construct detection", construct_detection),
        ("9 determinism", determinism),
        ("10 welch t-test", welch_t_test),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS  {name} ({secs:.1}s): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name} ({secs:.1}s): {why}");
            }
        }
    }
    let _ = panic::take_hook();
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn java_available() -> bool {
    Sandbox::new(SandboxConfig::default()).is_ok_and(|s| s.probe(Lang::Java).is_ok())
}

fn cand(text: impl Into<String>, rank: usize) -> Candidate {
    Candidate { text: text.into(), score: -(rank as f64), rank }
}

fn pipeline_config(dir: &Path, src: Lang, tgt: Lang) -> PipelineConfig {
    let mut cfg =
        PipelineConfig { src_lang: src, tgt_lang: tgt, out_dir: dir.join("out"), seed: 17, ..Default::default() };
    cfg.data.parallel = Some(dir.join("parallel.jsonl"));
    cfg
}

fn run(cmd: &Command, cfg: &PipelineConfig) -> Result<pipeline::Outcome, String> {
    pipeline::run(cmd, cfg, false).map_err(|e| format!("{}: {e}", cmd.name()))
}

// ---------------------------------------------------------------------------
// 1. Judge oracle

#[derive(Deserialize)]
struct Fixture {
    #[serde(rename = "fn")]
    fns: Vec<FnFixture>,
}

#[derive(Deserialize)]
struct FnFixture {
    name: String,
    source: String,
    python: String,
    cpp: String,
    java: String,
    mutants: Option<Vec<(String, String)>>,
    mutants_python: Option<Vec<(String, String)>>,
    mutants_cpp: Option<Vec<(String, String)>>,
    mutants_java: Option<Vec<(String, String)>>,
}

impl FnFixture {
    fn code(&self, lang: Lang) -> &str {
        match lang {
            Lang::Python => &self.python,
            Lang::Cpp => &self.cpp,
            Lang::Java => &self.java,
        }
    }

    fn mutants(&self, lang: Lang) -> &[(String, String)] {
        let own = match lang {
            Lang::Python => &self.mutants_python,
            Lang::Cpp => &self.mutants_cpp,
            Lang::Java => &self.mutants_java,
        };
        own.as_ref().or(self.mutants.as_ref()).map(Vec::as_slice).unwrap_or(&[])
    }
}

fn rename_idents(code: &str, lang: Lang, renames: &BTreeMap<String, String>) -> String {
    let mut out = String::new();
    let mut last = 0;
    for t in lex(code, lang) {
        if t.kind == TokKind::Ident {
            if let Some(new) = renames.get(t.text) {
                out.push_str(&code[last..t.start]);
                out.push_str(new);
                last = t.start + t.text.len();
            }
        }
    }
    out.push_str(&code[last..]);
    out
}

fn rewrite_params(code: &str, lang: Lang) -> String {
    let sig = extract_signature(&Program::new("x", lang, code)).expect("fixture signature");
    let renames = sig.params.iter().map(|p| (p.name.clone(), format!("{}_in", p.name))).collect();
    rename_idents(code, lang, &renames)
}

fn rewrite_layout(code: &str, lang: Lang) -> String {
    let (header, trailer) = match lang {
        Lang::Python => ("# translated by hand", "  # step"),
        _ => ("/* translated by hand */", " // step"),
    };
    let mut out = format!("{header}\n");
    for line in code.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let indent = line.len() - line.trim_start().len();
        let width = if lang == Lang::Python { indent / 2 } else { indent * 2 };
        out.push_str(&" ".repeat(width));
        out.push_str(line.trim_start());
        out.push_str(trailer);
        out.push_str("\n\n");
    }
    out
}

fn rewrite_name_and_helper(code: &str, lang: Lang) -> String {
    let sig = extract_signature(&Program::new("x", lang, code)).expect("fixture signature");
    let renames = BTreeMap::from([(sig.function_name.clone(), format!("{}_alt", sig.function_name))]);
    let helper = match lang {
        Lang::Python => "\n\ndef unused_helper(z):\n    return z * 2\n",
        Lang::Cpp => "\nstatic int unused_helper(int z) {\n    return z * 2;\n}\n",
        Lang::Java => "\nstatic int unusedHelper(int z) {\n    return z * 2;\n}\n",
    };
    rename_idents(code, lang, &renames) + helper
}

/// Six labelled candidates (3 rewrites, 3 mutants) in a seeded order.
fn labelled_candidates(f: &FnFixture, lang: Lang, rng: &mut ChaCha8Rng) -> Vec<(String, bool)> {
    let code = f.code(lang);
    let mut out = vec![
        (rewrite_params(code, lang), true),
        (rewrite_layout(code, lang), true),
        (rewrite_name_and_helper(code, lang), true),
    ];
    for (find, replace) in f.mutants(lang) {
        assert!(code.contains(find.as_str()), "{}: mutant `{find}` does not apply", f.name);
        out.push((code.replace(find.as_str(), replace), false));
    }
    assert_eq!(out.len(), 6, "{}: expected 3 mutants", f.name);
    out.shuffle(rng);
    out
}

/// Runs make-tests + judge-select for one translation direction and returns
/// (agreements, disagreements as text).
fn judge_direction(fns: &[&FnFixture], src: Lang, tgt: Lang) -> Result<(usize, Vec<String>), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = pipeline_config(dir.path(), src, tgt);
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut examples = Vec::new();
    let mut sets = Vec::new();
    let mut labels = BTreeMap::new();
    for f in fns {
        examples.push(ParallelExample {
            src: Program::new(f.name.as_str(), src, f.code(src)),
            refs: vec![Program::new(format!("{}:ref", f.name), tgt, f.code(tgt))],
        });
        let labelled = labelled_candidates(f, tgt, &mut rng);
        labels.insert(f.name.clone(), labelled.iter().map(|(_, ok)| *ok).collect::<Vec<_>>());
        sets.push(CandidateSet {
            example_id: f.name.clone(),
            lang: tgt,
            request_id: format!("{}:gen-refs", f.name),
            candidates: labelled.into_iter().enumerate().map(|(i, (t, _))| cand(t, i)).collect(),
        });
    }
    transaug::corpus::write_dataset(&Dataset::parallel("parallel", examples), &dir.path().join("parallel.jsonl"))
        .map_err(|e| e.to_string())?;
    write_jsonl(&cfg.out("candidates.jsonl"), &sets).map_err(|e| e.to_string())?;
    let made = run(&Command::MakeTests, &cfg)?;
    ensure!(!made.partial, "make-tests left unusable suites: {:?}", made.lines);
    run(&Command::JudgeSelect, &cfg)?;
    let records: Vec<VerdictRecord> = read_jsonl(&cfg.out("verdicts.jsonl")).map_err(|e| e.to_string())?;
    ensure!(records.len() == fns.len(), "verdicts for {} of {} examples", records.len(), fns.len());
    let mut agree = 0;
    let mut wrong = Vec::new();
    for r in records {
        let want = &labels[&r.example_id];
        for v in r.verdicts {
            if v.passed == want[v.candidate_rank] {
                agree += 1;
            } else {
                wrong.push(format!("{}#{} ({src}->{tgt}) passed={}", r.example_id, v.candidate_rank, v.passed));
            }
        }
    }
    Ok((agree, wrong))
}

fn judge_oracle() -> Result<String, String> {
    let fixture: Fixture = toml::from_str(
        &std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/judge_oracle.toml"))
            .map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    ensure!(fixture.fns.len() == 30, "fixture has {} functions", fixture.fns.len());
    // Java sources and candidates fall back to C++ when javac is missing.
    let other = if java_available() { Lang::Java } else { Lang::Cpp };
    let start = Instant::now();
    let (py_src, other_src): (Vec<&FnFixture>, Vec<&FnFixture>) = fixture.fns.iter().partition(|f| f.source == "python");
    let (a1, w1) = judge_direction(&py_src, Lang::Python, other)?;
    let (a2, w2) = judge_direction(&other_src, other, Lang::Python)?;
    let elapsed = start.elapsed();
    let wrong: Vec<String> = w1.into_iter().chain(w2).collect();
    ensure!(wrong.is_empty(), "{} disagreements: {}", wrong.len(), wrong.join(", "));
    ensure!(a1 + a2 == 180, "judged {} candidates", a1 + a2);
    ensure!(elapsed < Duration::from_secs(180), "took {:.0}s", elapsed.as_secs_f64());
    Ok(format!("180/180 candidates agree with labels, python<->{other}, {:.0}s", elapsed.as_secs_f64()))
}

// ---------------------------------------------------------------------------
// 2. Fifty candidates, 23 correct, k = 4

fn dp_levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

fn squash_ws(text: &str) -> String {
    text.lines()
        .map(|l| {
            let mut s = String::new();
            for c in l.chars() {
                let space = c == ' ' || c == '\t';
                if !(space && s.ends_with(' ')) {
                    s.push(if space { ' ' } else { c });
                }
            }
            s.trim_end().to_string()
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn fifty_candidate_replay() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = pipeline_config(dir.path(), Lang::Cpp, Lang::Python);
    cfg.selection.k = 4;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| e.to_string())?;
    let source = "int f(int a) {\n    return a * 3 + 1;\n}\n";
    let reference = "def f(a: int) -> int:\n    return a * 3 + 1\n";
    let mut texts: Vec<(String, bool)> = (0..23)
        .map(|i| {
            let mut body = String::from("def f(a: int) -> int:\n    t = a * 3\n");
            body.push_str(&"    t = t + 0\n".repeat(i % 5));
            body.push_str(&"    # keep\n".repeat(i / 5));
            body.push_str("    return t + 1\n");
            (body, true)
        })
        .chain((0..27).map(|j| (format!("def f(a: int) -> int:\n    return a * 3 + {}\n", j + 2), false)))
        .collect();
    texts.shuffle(&mut ChaCha8Rng::seed_from_u64(23));
    let example = ParallelExample {
        src: Program::new("f", Lang::Cpp, source),
        refs: vec![Program::new("f:ref", Lang::Python, reference)],
    };
    transaug::corpus::write_dataset(&Dataset::parallel("parallel", vec![example]), &dir.path().join("parallel.jsonl"))
        .map_err(|e| e.to_string())?;
    let set = CandidateSet {
        example_id: "f".into(),
        lang: Lang::Python,
        request_id: "f:gen-refs".into(),
        candidates: texts.iter().enumerate().map(|(i, (t, _))| cand(t.clone(), i)).collect(),
    };
    write_jsonl(&cfg.out("candidates.jsonl"), &[set]).map_err(|e| e.to_string())?;
    run(&Command::MakeTests, &cfg)?;
    let outcome = run(&Command::JudgeSelect, &cfg)?;
    ensure!(outcome.lines == ["f: candidates 50 correct 23 selected 4"], "summary {:?}", outcome.lines);
    let sels = transaug::refselect::read_selections(&cfg.out("selections.jsonl")).map_err(|e| e.to_string())?;
    ensure!(sels.len() == 4, "{} selections", sels.len());

    // Each pick must maximise the minimum distance to the reference and the earlier picks.
    let correct: Vec<usize> = (0..texts.len()).filter(|&i| texts[i].1).collect();
    let mut anchors = vec![squash_ws(reference)];
    let mut taken = Vec::new();
    let mut picked_mins = Vec::new();
    for s in &sels {
        ensure!(texts[s.candidate_rank].1, "selected incorrect candidate {}", s.candidate_rank);
        let min_to = |i: usize| anchors.iter().map(|a| dp_levenshtein(&squash_ws(&texts[i].0), a)).min().unwrap();
        let best = correct.iter().filter(|i| !taken.contains(*i)).map(|&i| min_to(i)).max().unwrap();
        let got = min_to(s.candidate_rank);
        ensure!(got == best, "pick {} has min distance {got}, brute force max is {best}", s.candidate_rank);
        picked_mins.push(got);
        taken.push(s.candidate_rank);
        anchors.push(squash_ws(&texts[s.candidate_rank].0));
    }
    Ok(format!("23 correct of 50, 4 selected, greedy min distances {picked_mins:?}"))
}

// ---------------------------------------------------------------------------
// 3. CA@k

fn ca_at_k_brute_force() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for m in 0..1000 {
        let n = rng.gen_range(1..=25);
        let p: f64 = rng.gen();
        let examples: Vec<JudgedExample> = (0..n)
            .map(|i| JudgedExample {
                example_id: format!("e{i}"),
                verdicts: (0..rng.gen_range(0..=20)).map(|_| rng.gen_bool(p)).collect(),
            })
            .collect();
        let mut prev = 0.0;
        for k in [1, 5, 10, 20] {
            let mut hits = 0;
            for e in &examples {
                let mut found = false;
                for i in 0..k.min(e.verdicts.len()) {
                    if e.verdicts[i] {
                        found = true;
                        break;
                    }
                }
                hits += usize::from(found);
            }
            let got = ca_at_k(&examples, k).map_err(|e| e.to_string())?;
            ensure!(got == hits as f64 / n as f64, "matrix {m}, k={k}: {got} vs {hits}/{n}");
            ensure!(got >= prev, "matrix {m}: not monotone at k={k}");
            prev = got;
        }
    }
    Ok("1000 matrices exact for k in {1,5,10,20}, monotone".into())
}

// ---------------------------------------------------------------------------
// 4. Edit distance

fn random_unicode(rng: &mut ChaCha8Rng) -> String {
    const POOLS: &[&str] = &["ab", "abcxyz", "aé€𝄞", "日本語中文", "αβγδ", "😀😃🙂", "a\u{301}e\u{300}", "  \t\n"];
    let narrow = rng.gen_bool(0.5);
    let pool: Vec<char> =
        if narrow { POOLS[rng.gen_range(0..POOLS.len())].chars().collect() } else { POOLS.concat().chars().collect() };
    let len = rng.gen_range(0..=40);
    (0..len).map(|_| pool[rng.gen_range(0..pool.len())]).collect()
}

fn edit_distance() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for i in 0..500 {
        let a = random_unicode(&mut rng);
        let b = random_unicode(&mut rng);
        let c = random_unicode(&mut rng);
        let d = levenshtein(&a, &b);
        ensure!(d == dp_levenshtein(&a, &b), "pair {i}: {d} vs oracle {}", dp_levenshtein(&a, &b));
        ensure!(levenshtein(&a, &a) == 0, "pair {i}: d(a,a) != 0");
        ensure!((d == 0) == (a == b), "pair {i}: identity of indiscernibles");
        ensure!(d == levenshtein(&b, &a), "pair {i}: not symmetric");
        ensure!(d <= levenshtein(&a, &c) + levenshtein(&c, &b), "pair {i}: triangle inequality");
    }
    Ok("500 Unicode pairs match the DP oracle; identity, symmetry, triangle hold".into())
}

// ---------------------------------------------------------------------------
// 5. BLEU

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn bleu_oracle() -> Result<String, String> {
    // Worked by hand, cross-checked with an independent script:
    // A: p = 5/6, 3/5, 2/4, 1/3 and BP = 1, so 100 * (1/12)^(1/4).
    // B: p = 8/9, 5/7, 4/5, 3/3 over two segments, BP = 1.
    // C: clipped unigrams 3/5, bigrams 1/4, floors 1/6 and 1/4.
    let cases: [(Vec<String>, Vec<Vec<String>>, f64); 3] = [
        (strings(&["a b c d e f"]), vec![strings(&["a b c d x f"])], 53.7284965911771),
        (
            strings(&["x = a + b ;", "return y ;"]),
            vec![strings(&["x = a + b + c ;", "y = a + b ;"]), strings(&["return x ;"])],
            84.42136252749054,
        ),
        (
            strings(&["the the the the cat"]),
            vec![strings(&["the cat sat on the mat", "a cat on the mat"])],
            28.117066259517454,
        ),
    ];
    let mut got = Vec::new();
    for (i, (c, r, want)) in cases.iter().enumerate() {
        let b = bleu(c, r).map_err(|e| e.to_string())?;
        ensure!((b - want).abs() < 1e-6, "corpus {i}: {b} vs {want}");
        got.push(format!("{b:.6}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    const TOKS: &[&str] =
        &["int", "x", "y", "=", "+", "(", ")", "{", "}", ";", "return", "42", "for", "if", "\n", "foo_bar", "3.5"];
    for i in 0..50 {
        let len = rng.gen_range(1..=60);
        let prog: Vec<&str> = (0..len).map(|_| TOKS[rng.gen_range(0..TOKS.len() - 1)]).collect();
        let x = prog.join(" ");
        let b = bleu(std::slice::from_ref(&x), &[vec![x.clone()]]).map_err(|e| e.to_string())?;
        ensure!(b == 100.0, "program {i}: bleu(x,[x]) = {b}");
    }
    Ok(format!("mini-corpora {} within 1e-6; bleu(x,[x]) = 100 for 50 programs", got.join(", ")))
}

// ---------------------------------------------------------------------------
// 6. KNN

fn primitive_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<i64> {
    loop {
        let v: Vec<i64> = (0..dim).map(|_| rng.gen_range(0..4)).collect();
        let g = v.iter().fold(0i64, |g, &x| gcd(g, x));
        if g > 0 {
            return v.into_iter().map(|x| x / g).collect();
        }
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn dot(a: &[i64], b: &[i64]) -> i128 {
    a.iter().zip(b).map(|(x, y)| (*x as i128) * (*y as i128)).sum()
}

/// Exact cosine ordering for non-negative integer vectors: compares
/// dot1/|t1| with dot2/|t2| by cross-multiplying squares.
fn exact_order(q: &[i64], t1: &[i64], t2: &[i64]) -> std::cmp::Ordering {
    let (d1, d2) = (dot(q, t1), dot(q, t2));
    (d2 * d2 * dot(t1, t1)).cmp(&(d1 * d1 * dot(t2, t2)))
}

fn corpus_of(ids: &[String], lang: Lang) -> Dataset {
    Dataset::monolingual("c", ids.iter().map(|id| Program::new(id.as_str(), lang, "x")).collect())
}

fn embed(ids: &[String], vecs: &[Vec<i64>]) -> Vec<EmbeddingVector> {
    ids.iter()
        .zip(vecs)
        .map(|(id, v)| EmbeddingVector { program_id: id.clone(), values: v.iter().map(|x| *x as f64).collect() })
        .collect()
}

fn knn_brute_force() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut ties = 0;
    for trial in 0..40 {
        let dim = rng.gen_range(2..=6);
        let n_src = rng.gen_range(1..=40);
        let n_tgt = rng.gen_range(1..=200);
        let k = rng.gen_range(1..=5);
        let protos: Vec<Vec<i64>> = (0..rng.gen_range(1..=30)).map(|_| primitive_vector(&mut rng, dim)).collect();
        let draw = |rng: &mut ChaCha8Rng| protos[rng.gen_range(0..protos.len())].clone();
        let src_v: Vec<Vec<i64>> = (0..n_src).map(|_| draw(&mut rng)).collect();
        let tgt_v: Vec<Vec<i64>> = (0..n_tgt).map(|_| draw(&mut rng)).collect();
        let src_ids: Vec<String> = (0..n_src).map(|i| format!("s{i:03}")).collect();
        let mut tgt_ids: Vec<String> = (0..n_tgt).map(|i| format!("t{i:03}")).collect();
        tgt_ids.shuffle(&mut rng);
        let got = build_knn(
            &corpus_of(&src_ids, Lang::Python),
            &corpus_of(&tgt_ids, Lang::Cpp),
            &embed(&src_ids, &src_v),
            &embed(&tgt_ids, &tgt_v),
            &PairingConfig { knn_k: k, ..Default::default() },
        )
        .map_err(|e| e.to_string())?;
        let got: Vec<(String, String)> = got
            .comparable_records()
            .unwrap()
            .iter()
            .map(|e| {
                assert_eq!(e.origin, Origin::Knn);
                (e.src.id.clone(), e.tgt.id.clone())
            })
            .collect();
        let mut want = Vec::new();
        for (s, q) in src_ids.iter().zip(&src_v) {
            let mut order: Vec<usize> = (0..n_tgt).collect();
            order.sort_by(|&a, &b| exact_order(q, &tgt_v[a], &tgt_v[b]).then_with(|| tgt_ids[a].cmp(&tgt_ids[b])));
            ties += order.windows(2).filter(|w| exact_order(q, &tgt_v[w[0]], &tgt_v[w[1]]).is_eq()).count();
            want.extend(order.iter().take(k).map(|&j| (s.clone(), tgt_ids[j].clone())));
        }
        ensure!(got == want, "trial {trial}: knn differs from brute force");

        // Self-retrieval: every source vector is also planted in the target side.
        let mut planted_ids = tgt_ids.clone();
        let mut planted_v = tgt_v.clone();
        for (s, v) in src_ids.iter().zip(&src_v) {
            planted_ids.push(format!("copy-{s}"));
            planted_v.push(v.clone());
        }
        let got = build_knn(
            &corpus_of(&src_ids, Lang::Python),
            &corpus_of(&planted_ids, Lang::Cpp),
            &embed(&src_ids, &src_v),
            &embed(&planted_ids, &planted_v),
            &PairingConfig { knn_k: 1, ..Default::default() },
        )
        .map_err(|e| e.to_string())?;
        for (e, v) in got.comparable_records().unwrap().iter().zip(&src_v) {
            let j = planted_ids.iter().position(|id| *id == e.tgt.id).unwrap();
            ensure!(planted_v[j] == *v, "trial {trial}: {} did not retrieve its duplicate", e.src.id);
        }
    }
    Ok(format!(
        "40 corpora up to 200 targets agree with an exact scan ({ties} tied neighbours); duplicates self-retrieve"
    ))
}

// ---------------------------------------------------------------------------
// 7. Canonical values across harness printers

struct TypeCase {
    python: &'static str,
    cpp: &'static str,
    java: &'static str,
}

const TYPES: &[TypeCase] = &[
    TypeCase { python: "int", cpp: "long long", java: "long" },
    TypeCase { python: "float", cpp: "double", java: "double" },
    TypeCase { python: "bool", cpp: "bool", java: "boolean" },
    TypeCase { python: "str", cpp: "string", java: "String" },
    TypeCase { python: "List[int]", cpp: "vector<long long>", java: "long[]" },
    TypeCase { python: "List[float]", cpp: "vector<double>", java: "double[]" },
    TypeCase { python: "List[str]", cpp: "vector<string>", java: "String[]" },
    TypeCase { python: "List[bool]", cpp: "vector<bool>", java: "boolean[]" },
    TypeCase { python: "List[List[int]]", cpp: "vector<vector<long long>>", java: "long[][]" },
];

fn identity(t: &TypeCase, lang: Lang) -> String {
    match lang {
        Lang::Python => format!("def ident(v: {0}) -> {0}:\n    return v\n", t.python),
        Lang::Cpp => format!("{0} ident({0} v) {{\n    return v;\n}}\n", t.cpp),
        Lang::Java => format!("static {0} ident({0} v) {{\n    return v;\n}}\n", t.java),
    }
}

fn canonical_values() -> Result<String, String> {
    let sandbox = Sandbox::new(SandboxConfig::default()).map_err(|e| e.to_string())?;
    let mut langs = vec![Lang::Python, Lang::Cpp];
    if java_available() {
        langs.push(Lang::Java);
    }
    let edge_floats = [1e-5, 0.1 + 0.2, 1e21, -0.0, 123456.5, 1234567.0, 2.5e-7, 0.000123456789, 99999.95, -1e300];
    let mut total = 0;
    for (ti, t) in TYPES.iter().enumerate() {
        let sig = extract_signature(&Program::new("p", Lang::Python, identity(t, Lang::Python)))
            .map_err(|e| e.to_string())?;
        let mut inputs = gen_inputs(&sig, &GenRanges { seed: 70 + ti as u64, list_len: (0, 4), ..Default::default() });
        if t.python == "float" {
            inputs.extend(edge_floats.iter().map(|x| TestInput { args: vec![Value::Float(*x)] }));
        }
        total += inputs.len();
        for &lang in &langs {
            let code = identity(t, lang);
            let lang_sig = extract_signature(&Program::new("p", lang, code.as_str())).map_err(|e| e.to_string())?;
            let results = sandbox
                .run_cases(&code, lang, &lang_sig, &inputs, None)
                .map_err(|e| e.to_string())?
                .map_err(|e| format!("{lang} {}: {}", t.python, String::from_utf8_lossy(&e.stderr)))?;
            for (input, r) in inputs.iter().zip(results) {
                let want = format!("{}\n", input.args[0].canonical());
                ensure!(
                    r.stdout == want.as_bytes(),
                    "{lang} {}: printed {:?}, canonical {:?}",
                    t.python,
                    String::from_utf8_lossy(&r.stdout),
                    want
                );
            }
        }
    }
    ensure!(total == 100, "rendered {total} values");
    let names: Vec<String> = langs.iter().map(|l| l.to_string()).collect();
    Ok(format!("100 values byte-identical via {}", names.join(", ")))
}

// ---------------------------------------------------------------------------
// 8. Construct detection

type Snippet<'a> = (&'a str, &'a [Construct]);

const L: Construct = Construct::Loop;
const I: Construct = Construct::If;
const E: Construct = Construct::ElseIf;

fn construct_detection() -> Result<String, String> {
    let python: [(&str, &[Construct]); 20] = [
        ("for i in range(3):\n    pass\n", &[L]),
        ("while x:\n    x -= 1\n", &[L]),
        ("if a:\n    b()\n", &[I]),
        ("if a:\n    b()\nelif c:\n    d()\n", &[I, E]),
        ("if a:\n    b()\nelse:\n    if c:\n        d()\n", &[I]),
        ("s = 'for while if elif'\n", &[]),
        ("# for x in y: if z elif w\nx = 1\n", &[]),
        ("doc = \"\"\"\nwhile True:\n    if x: pass\n\"\"\"\n", &[]),
        ("ys = [x for x in xs]\n", &[L]),
        ("y = a if b else c\n", &[I]),
        ("format = 1\niffy = 2\nwhile_ = 3\n", &[]),
        ("def f():\n    return 0\n", &[]),
        ("for a in b:\n    if a:\n        break\n", &[L, I]),
        ("if a:\n    pass\nelif b:\n    pass\nelif c:\n    pass\n", &[I, E]),
        ("x = 'elif' # elif\n", &[]),
        ("while a:\n    for b in c:\n        pass\n", &[L]),
        ("print(f'{x} for {y}')\n", &[]),
        ("elifant = 1\nforx = 2\n", &[]),
        ("try:\n    x()\nexcept E:\n    pass\n", &[]),
        ("if a: x = 1\nelif b: x = 2\nfor _ in c: pass\n", &[L, I, E]),
    ];
    let java: [(&str, &[Construct]); 20] = [
        ("for (int i = 0; i < n; i++) {}", &[L]),
        ("while (x > 0) x--;", &[L]),
        ("do { x--; } while (x > 0);", &[L]),
        ("if (a) b();", &[I]),
        ("if (a) b(); else if (c) d();", &[I, E]),
        ("if (a) b();\nelse\n    if (c) d();", &[I, E]),
        ("if (a) b(); else /* note */ if (c) d();", &[I, E]),
        ("if (a) b(); else // note\n if (c) d();", &[I, E]),
        ("if (a) b(); else { if (c) d(); }", &[I]),
        ("String s = \"for while if else if\";", &[]),
        ("// for (;;) if (x) else if (y)\nint x = 1;", &[]),
        ("/* while (true) { if (a) {} } */ int y = 2;", &[]),
        ("char c = 'i'; int iff = 1; int forward = 2;", &[]),
        ("for (int x : xs) { if (x > 0) return x; }", &[L, I]),
        ("int r = a > b ? a : b;", &[]),
        ("switch (x) { case 1: break; default: break; }", &[]),
        ("String t = \"\\\"if\\\" for\";", &[]),
        ("xs.forEach(x -> System.out.println(x));", &[]),
        ("elseif(a); elseIf(b);", &[]),
        ("while (a) { if (b) c(); else if (d) e(); }", &[L, I, E]),
    ];
    let cpp: [(&str, &[Construct]); 20] = [
        ("for (int i = 0; i < n; ++i) {}", &[L]),
        ("while (n--) {}", &[L]),
        ("do { n--; } while (n);", &[L]),
        ("if (a) return 1;", &[I]),
        ("if (a) x = 1; else if (b) x = 2;", &[I, E]),
        ("if (a) x = 1;\nelse\n\tif (b) x = 2;", &[I, E]),
        ("if (a) x = 1; else /* c */ if (b) x = 2;", &[I, E]),
        ("if (a) x = 1; else { if (b) x = 2; }", &[I]),
        ("#if DEBUG\nint x = 1;\n#endif", &[]),
        ("#define LOOP for (;;)\nint y;", &[]),
        ("const char* s = \"while (1) if (x)\";", &[]),
        ("// else if (x) for (;;)\nint z;", &[]),
        ("/* if (a) {} else if (b) {} */ int w;", &[]),
        ("auto s = R\"(for if while)\";", &[]),
        ("for (auto& x : v) if (x) ++c;", &[L, I]),
        ("int m = a > b ? a : b;", &[]),
        ("char c = 'f'; int iffy = 0; int format = 1;", &[]),
        ("switch (x) { case 1: break; }", &[]),
        ("std::for_each(v.begin(), v.end(), f);", &[]),
        ("while (a) { if (b) c(); else if (d) e(); }", &[L, I, E]),
    ];
    let mut checked = 0;
    let all: [(Lang, &[Snippet]); 3] = [(Lang::Python, &python), (Lang::Java, &java), (Lang::Cpp, &cpp)];
    for (lang, cases) in all {
        for (i, (code, want)) in cases.iter().enumerate() {
            let got: Vec<Construct> = detect_constructs(code, lang).into_iter().collect();
            ensure!(got == *want, "{lang} snippet {i} {code:?}: got {got:?}, want {want:?}");
            checked += 1;
        }
    }

    // A model that never emits control flow scores zero on ELSE_IF.
    let refs = strings(&[
        "if (a) x = 1; else if (b) x = 2;",
        "if (a) return 1; else if (b) return 2; return 0;",
        "for (int i = 0; i < n; i++) if (i) s += i; else if (j) s -= i;",
    ]);
    let outputs = strings(&["x = a ? 1 : 2;", "return a ? 1 : 2;", "s = n;"]);
    let prf = construct_match(&outputs, &refs, &[Lang::Java; 3]).map_err(|e| e.to_string())?;
    let e = prf[&Construct::ElseIf];
    ensure!((e.precision, e.recall, e.f1) == (0.0, 0.0, 0.0), "ELSE_IF row {e:?}");
    Ok(format!("{checked} snippets exact; never-predicting model gives ELSE_IF P/R/F1 0.0/0.0/0.0"))
}

// ---------------------------------------------------------------------------
// 9. Determinism

const TOY: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/toy");

fn toy_config(out: &Path) -> Result<PipelineConfig, String> {
    let mut cfg = PipelineConfig::load(&Path::new(TOY).join("config.toml")).map_err(|e| e.to_string())?;
    cfg.out_dir = out.to_path_buf();
    Ok(cfg)
}

fn determinism() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let read = |p: &Path| std::fs::read(p).map_err(|e| format!("{}: {e}", p.display()));

    let mut random_runs = Vec::new();
    for run_dir in ["r1", "r2"] {
        let cfg = toy_config(&dir.path().join(run_dir))?;
        run(&Command::BuildComp { origin: Origin::Random, reverse: false }, &cfg)?;
        random_runs.push(read(&cfg.out("comparable.random.jsonl"))?);
    }
    ensure!(random_runs[0] == random_runs[1], "build-comp random differs across runs");

    let sig =
        extract_signature(&Program::new("p", Lang::Python, "def f(a: List[str], b: float) -> int:\n    return 0\n"))
            .map_err(|e| e.to_string())?;
    let ranges = GenRanges { seed: 99, n_inputs: 50, ..Default::default() };
    let (x, y) = (gen_inputs(&sig, &ranges), gen_inputs(&sig, &ranges));
    ensure!(serde_json::to_vec(&x).unwrap() == serde_json::to_vec(&y).unwrap(), "gen_inputs differs across calls");

    let mut evals = Vec::new();
    for run_dir in ["e1", "e2"] {
        let cfg = toy_config(&dir.path().join(run_dir))?;
        run(&Command::MakeTests, &cfg)?;
        let parallel =
            transaug::corpus::load_dataset(cfg.data.parallel.as_ref().unwrap(), transaug::DatasetKind::Parallel)
                .map_err(|e| e.to_string())?;
        let sets: Vec<CandidateSet> = parallel
            .parallel_records()
            .unwrap()
            .iter()
            .map(|ex| CandidateSet {
                example_id: ex.id().to_string(),
                lang: Lang::Cpp,
                request_id: format!("{}:gen-refs", ex.id()),
                candidates: vec![cand(format!("// v\n{}", ex.refs[0].code), 0), cand(ex.refs[0].code.clone(), 1)],
            })
            .collect();
        write_jsonl(&cfg.out("candidates.jsonl"), &sets).map_err(|e| e.to_string())?;
        run(&Command::Eval, &cfg)?;
        evals.push((read(&cfg.out("eval_report.json"))?, read(&cfg.out("eval_summary.txt"))?));
    }
    ensure!(evals[0] == evals[1], "eval output differs across runs");

    let src = Program::new("s", Lang::Python, "def f(a: int, b: int) -> int:\n    return a * b - a\n");
    let sig = extract_signature(&src).map_err(|e| e.to_string())?;
    let inputs = gen_inputs(&sig, &GenRanges { seed: 9, ..Default::default() });
    let texts = [
        "int f(int a, int b) { return a * b - a; }",
        "int f(int a, int b) { return a * (b - 1); }",
        "int f(int a, int b) { return a * b; }",
        "int f(int a, int b) { return a * b - a }",
        "int f(int a, int b) { return b * a - a; }",
        "int f(int a, int b) { return a * b - b; }",
    ];
    let cands: Vec<Candidate> = texts.iter().enumerate().map(|(i, t)| cand(*t, i)).collect();
    let mut results = Vec::new();
    for workers in [1, 4] {
        let sb = Sandbox::new(SandboxConfig { workers, ..Default::default() }).map_err(|e| e.to_string())?;
        let (suite, _) = sb.build_test_suite(&src, &sig, &inputs).map_err(|e| e.to_string())?;
        let (_, verdicts) = sb.filter_candidates(&cands, Lang::Cpp, &suite).map_err(|e| e.to_string())?;
        results.push(verdicts);
    }
    ensure!(results[0] == results[1], "sequential and parallel verdicts differ");
    Ok("build-comp random, gen_inputs and eval bit-identical; 1 vs 4 workers judge identically".into())
}

// ---------------------------------------------------------------------------
// 10. Welch's t-test

fn welch_t_test() -> Result<String, String> {
    // Equal sizes and variances give df = 2, where the two-tailed p-value has
    // the closed form 1 - |t| / sqrt(2 + t^2).
    let r = t_test(&[1.0, 3.0], &[4.0, 6.0]).map_err(|e| e.to_string())?;
    let t = -3.0 / 2f64.sqrt();
    let p = 1.0 - t.abs() / (2.0 + t * t).sqrt();
    ensure!(
        (r.t - t).abs() < 1e-4 && (r.df - 2.0).abs() < 1e-4 && (r.p - p).abs() < 1e-4,
        "closed form: {r:?} vs t={t} p={p}"
    );

    // Unequal sizes and variances; values frozen from scipy.stats.ttest_ind(equal_var=False).
    let r2 = t_test(&[12.1, 14.3, 11.8, 13.0, 15.2, 12.7], &[10.2, 9.9, 11.5, 10.8]).map_err(|e| e.to_string())?;
    ensure!(
        (r2.t - 4.015220672313815).abs() < 1e-4
            && (r2.df - 7.822018129502784).abs() < 1e-4
            && (r2.p - 0.004049677783594887).abs() < 1e-4,
        "frozen case: {r2:?}"
    );

    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let a: Vec<f64> = (0..20).map(|_| 60.0 + rng.gen_range(-3.0..3.0)).collect();
    let b: Vec<f64> = (0..20).map(|_| 66.0 + rng.gen_range(-3.0..3.0)).collect();
    let r3 = t_test(&b, &a).map_err(|e| e.to_string())?;
    ensure!(r3.p < 0.01, "separated samples p = {}", r3.p);
    Ok(format!("closed form p={:.6}, frozen p={:.6}, separated p={:.2e}", r.p, r2.p, r3.p))
}
