//! Compile and run programs under a wall-clock timeout, build
//! execution-verified test suites and judge candidate translations.
//!
//! Each run gets its own temporary directory and process group; a timeout
//! kills the whole group. No other isolation is applied: callers that run
//! untrusted code should wrap the configured toolchain commands in their own
//! container or jail.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::Candidate;
use crate::corpus::{Lang, Program};
use crate::signature::{extract_call_signature, Signature};
use crate::testgen::{emit_multi_harness, emit_shell, HarnessSource, TestInput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecStatus {
    Ok,
    CompileError,
    RuntimeError,
    Timeout,
}

impl ExecStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ExecStatus::Ok => "ok",
            ExecStatus::CompileError => "compile_error",
            ExecStatus::RuntimeError => "runtime_error",
            ExecStatus::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecResult {
    pub status: ExecStatus,
    pub stdout: Vec<u8>,
    pub stderr: Vec<u8>,
    pub duration_ms: u64,
}

/// Command templates for one language. Placeholders: `{src}` source file,
/// `{dir}` work directory, `{bin}` compiled binary, `{main}` Java main class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LangToolchain {
    #[serde(default)]
    pub compile: Option<Vec<String>>,
    pub run: Vec<String>,
    /// Compile-only check used for syntax accuracy.
    pub check: Vec<String>,
}

fn argv(parts: &[&str]) -> Vec<String> {
    parts.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Toolchains {
    pub python: LangToolchain,
    pub java: LangToolchain,
    pub cpp: LangToolchain,
}

impl Default for Toolchains {
    fn default() -> Self {
        Toolchains {
            python: LangToolchain {
                compile: Some(argv(&["python3", "-m", "py_compile", "{src}"])),
                run: argv(&["python3", "{src}"]),
                check: argv(&["python3", "-m", "py_compile", "{src}"]),
            },
            java: LangToolchain {
                compile: Some(argv(&["javac", "-nowarn", "-d", "{dir}", "{src}"])),
                run: argv(&["java", "-cp", "{dir}", "{main}"]),
                check: argv(&["javac", "-nowarn", "-d", "{dir}", "{src}"]),
            },
            cpp: LangToolchain {
                compile: Some(argv(&["g++", "-std=c++17", "-O1", "-o", "{bin}", "{src}"])),
                run: argv(&["{bin}"]),
                check: argv(&["g++", "-std=c++17", "-fsyntax-only", "{src}"]),
            },
        }
    }
}

impl Toolchains {
    pub fn get(&self, lang: Lang) -> &LangToolchain {
        match lang {
            Lang::Python => &self.python,
            Lang::Java => &self.java,
            Lang::Cpp => &self.cpp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SandboxConfig {
    pub toolchains: Toolchains,
    /// Per-case run timeout.
    pub timeout_ms: u64,
    pub compile_timeout_ms: u64,
    /// Captured bytes per stream; the rest is drained and dropped.
    pub output_cap: usize,
    pub workers: usize,
    pub fail_fast: bool,
}

impl Default for SandboxConfig {
    fn default() -> Self {
        SandboxConfig {
            toolchains: Toolchains::default(),
            timeout_ms: 10_000,
            compile_timeout_ms: 60_000,
            output_cap: 1 << 20,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            fail_fast: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum SandboxError {
    #[error("toolchain for {lang} is missing: `{program}` not found")]
    ToolchainMissing { lang: Lang, program: String },
    #[error("sandbox i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("worker pool: {0}")]
    Pool(String),
}

// ------------------------------------------------------------ raw process

struct RawRun {
    exit_ok: bool,
    timed_out: bool,
    stdout: Vec<u8>,
    stderr: Vec<u8>,
    duration_ms: u64,
}

fn drain<R: Read + Send + 'static>(mut r: R, cap: usize) -> thread::JoinHandle<Vec<u8>> {
    thread::spawn(move || {
        let mut kept = Vec::new();
        let mut buf = [0u8; 8192];
        loop {
            match r.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    let room = cap.saturating_sub(kept.len());
                    kept.extend_from_slice(&buf[..n.min(room)]);
                }
            }
        }
        kept
    })
}

fn kill_group(pid: u32) {
    // SAFETY: plain syscall on a process group id we created.
    unsafe {
        libc::kill(-(pid as i32), libc::SIGKILL);
    }
}

fn spawn_and_wait(cmd: &[String], cwd: &Path, timeout: Duration, cap: usize) -> std::io::Result<RawRun> {
    let (program, args) = cmd.split_first().expect("non-empty command");
    let start = Instant::now();
    let mut child = Command::new(program)
        .args(args)
        .current_dir(cwd)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .env("PYTHONDONTWRITEBYTECODE", "1")
        .env("PYTHONHASHSEED", "0")
        .process_group(0)
        .spawn()?;
    let pid = child.id();
    let out = drain(child.stdout.take().expect("piped"), cap);
    let err = drain(child.stderr.take().expect("piped"), cap);
    let mut sleep = Duration::from_micros(200);
    let (status, timed_out) = loop {
        if let Some(status) = child.try_wait()? {
            break (Some(status), false);
        }
        if start.elapsed() >= timeout {
            kill_group(pid);
            let _ = child.wait();
            break (None, true);
        }
        thread::sleep(sleep);
        sleep = (sleep * 2).min(Duration::from_millis(5));
    };
    // Stray grandchildren would keep the pipes open.
    kill_group(pid);
    let stdout = out.join().unwrap_or_default();
    let stderr = err.join().unwrap_or_default();
    Ok(RawRun {
        exit_ok: status.is_some_and(|s| s.success()),
        timed_out,
        stdout,
        stderr,
        duration_ms: start.elapsed().as_millis() as u64,
    })
}

fn substitute(template: &[String], vars: &[(&str, &str)]) -> Vec<String> {
    template
        .iter()
        .map(|part| vars.iter().fold(part.clone(), |acc, (k, v)| acc.replace(&format!("{{{k}}}"), v)))
        .collect()
}

fn find_in_path(program: &str) -> bool {
    if program.contains('/') {
        return Path::new(program).exists();
    }
    std::env::var_os("PATH")
        .map(|paths| std::env::split_paths(&paths).any(|dir| dir.join(program).is_file()))
        .unwrap_or(false)
}

// ------------------------------------------------------------ suites

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub input: TestInput,
    /// Canonical stdout of the source program, one trailing newline removed.
    pub expected: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSuite {
    pub source_id: String,
    pub sig: Signature,
    pub cases: Vec<TestCase>,
}

impl TestSuite {
    pub fn is_usable(&self) -> bool {
        !self.cases.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub source_id: String,
    pub total_inputs: usize,
    pub kept: usize,
    /// Dropped inputs keyed by the status that dropped them.
    pub dropped: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub usable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseOutcome {
    Match,
    Mismatch,
    Error,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub candidate_rank: usize,
    pub passed: bool,
    pub per_case: Vec<CaseOutcome>,
}

impl Verdict {
    fn from_cases(candidate_rank: usize, per_case: Vec<CaseOutcome>) -> Self {
        let passed = !per_case.is_empty() && per_case.iter().all(|c| *c == CaseOutcome::Match);
        Verdict { candidate_rank, passed, per_case }
    }
}

/// Strips exactly one trailing newline (`\n` or `\r\n`).
pub fn normalize_output(bytes: &[u8]) -> &[u8] {
    bytes.strip_suffix(b"\r\n").or_else(|| bytes.strip_suffix(b"\n")).unwrap_or(bytes)
}

/// Compiled multi-case harness living in its own temp directory.
struct Prepared {
    dir: tempfile::TempDir,
    src: PathBuf,
    main: Option<String>,
}

enum Compiled {
    Ready(Prepared),
    Failed(ExecResult),
}

pub struct Sandbox {
    cfg: SandboxConfig,
    pool: rayon::ThreadPool,
}

impl Sandbox {
    pub fn new(cfg: SandboxConfig) -> Result<Self, SandboxError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers.max(1))
            .build()
            .map_err(|e| SandboxError::Pool(e.to_string()))?;
        Ok(Sandbox { cfg, pool })
    }

    pub fn config(&self) -> &SandboxConfig {
        &self.cfg
    }

    /// Confirms the binaries behind `lang`'s commands exist.
    pub fn probe(&self, lang: Lang) -> Result<(), SandboxError> {
        let tc = self.cfg.toolchains.get(lang);
        let cmds = tc.compile.iter().chain([&tc.run, &tc.check]);
        for cmd in cmds {
            let Some(program) = cmd.first() else { continue };
            if program.contains('{') {
                continue;
            }
            if !find_in_path(program) {
                return Err(SandboxError::ToolchainMissing { lang, program: program.clone() });
            }
        }
        Ok(())
    }

    fn exec(&self, lang: Lang, cmd: &[String], cwd: &Path, timeout_ms: u64) -> Result<RawRun, SandboxError> {
        spawn_and_wait(cmd, cwd, Duration::from_millis(timeout_ms), self.cfg.output_cap).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                SandboxError::ToolchainMissing { lang, program: cmd[0].clone() }
            } else {
                SandboxError::Io(e)
            }
        })
    }

    fn vars<'a>(p: &'a Prepared, bin: &'a str, src: &'a str, dir: &'a str) -> [(&'a str, &'a str); 4] {
        [("src", src), ("dir", dir), ("bin", bin), ("main", p.main.as_deref().unwrap_or(""))]
    }

    fn prepare(&self, lang: Lang, h: &HarnessSource, compile: Option<&[String]>) -> Result<Compiled, SandboxError> {
        let dir = tempfile::Builder::new().prefix("transaug-").tempdir()?;
        let src = dir.path().join(&h.file_name);
        std::fs::write(&src, &h.text)?;
        let prepared = Prepared { dir, src, main: h.main_class.clone() };
        if let Some(template) = compile {
            let (bin, srcs, dirs) = path_strings(&prepared);
            let cmd = substitute(template, &Self::vars(&prepared, &bin, &srcs, &dirs));
            let raw = self.exec(lang, &cmd, prepared.dir.path(), self.cfg.compile_timeout_ms)?;
            if raw.timed_out || !raw.exit_ok {
                return Ok(Compiled::Failed(ExecResult {
                    status: if raw.timed_out { ExecStatus::Timeout } else { ExecStatus::CompileError },
                    stdout: raw.stdout,
                    stderr: raw.stderr,
                    duration_ms: raw.duration_ms,
                }));
            }
        }
        Ok(Compiled::Ready(prepared))
    }

    fn run_prepared(&self, lang: Lang, p: &Prepared, extra: Option<usize>) -> Result<ExecResult, SandboxError> {
        let (bin, srcs, dirs) = path_strings(p);
        let mut cmd = substitute(&self.cfg.toolchains.get(lang).run, &Self::vars(p, &bin, &srcs, &dirs));
        if let Some(case) = extra {
            cmd.push(case.to_string());
        }
        let raw = self.exec(lang, &cmd, p.dir.path(), self.cfg.timeout_ms)?;
        let status = if raw.timed_out {
            ExecStatus::Timeout
        } else if raw.exit_ok {
            ExecStatus::Ok
        } else {
            ExecStatus::RuntimeError
        };
        Ok(ExecResult { status, stdout: raw.stdout, stderr: raw.stderr, duration_ms: raw.duration_ms })
    }

    /// Compiles (java/cpp/python byte-compile) then runs a complete program.
    pub fn run_program(&self, src_text: &str, lang: Lang) -> Result<ExecResult, SandboxError> {
        let file_name = match lang {
            Lang::Java => format!("{}.java", java_public_class(src_text).unwrap_or_else(|| "Main".into())),
            _ => format!("main.{}", lang.extension()),
        };
        let main = match lang {
            Lang::Java => Some(java_main_class(src_text).unwrap_or_else(|| "Main".into())),
            _ => None,
        };
        let h = HarnessSource { text: src_text.to_string(), file_name, main_class: main };
        match self.prepare(lang, &h, self.cfg.toolchains.get(lang).compile.as_deref())? {
            Compiled::Failed(r) => Ok(r),
            Compiled::Ready(p) => self.run_prepared(lang, &p, None),
        }
    }

    /// Runs `code`'s entry function once per input, each in its own process.
    /// `Err(result)` carries a failed compile.
    pub fn run_cases(
        &self,
        code: &str,
        lang: Lang,
        sig: &Signature,
        inputs: &[TestInput],
        fail_fast_on: Option<&[String]>,
    ) -> Result<Result<Vec<ExecResult>, ExecResult>, SandboxError> {
        let harness = match emit_multi_harness(code, lang, sig, inputs) {
            Ok(h) => h,
            Err(e) => {
                return Ok(Err(ExecResult {
                    status: ExecStatus::CompileError,
                    stdout: Vec::new(),
                    stderr: e.to_string().into_bytes(),
                    duration_ms: 0,
                }))
            }
        };
        let prepared = match self.prepare(lang, &harness, self.cfg.toolchains.get(lang).compile.as_deref())? {
            Compiled::Failed(r) => return Ok(Err(r)),
            Compiled::Ready(p) => p,
        };
        match fail_fast_on {
            Some(expected) => {
                let mut out = Vec::new();
                for (i, want) in expected.iter().enumerate().take(inputs.len()) {
                    let r = self.run_prepared(lang, &prepared, Some(i))?;
                    let ok = r.status == ExecStatus::Ok && normalize_output(&r.stdout) == want.as_bytes();
                    out.push(r);
                    if !ok {
                        break;
                    }
                }
                Ok(Ok(out))
            }
            None => {
                let results: Result<Vec<_>, _> = self.pool.install(|| {
                    (0..inputs.len()).into_par_iter().map(|i| self.run_prepared(lang, &prepared, Some(i))).collect()
                });
                Ok(Ok(results?))
            }
        }
    }

    /// Runs the source on every input and keeps the inputs that execute cleanly.
    pub fn build_test_suite(
        &self,
        p: &Program,
        sig: &Signature,
        inputs: &[TestInput],
    ) -> Result<(TestSuite, FilterReport), SandboxError> {
        let mut report = FilterReport { source_id: p.id.clone(), total_inputs: inputs.len(), ..Default::default() };
        let mut suite = TestSuite { source_id: p.id.clone(), sig: sig.clone(), cases: Vec::new() };
        match self.run_cases(&p.code, p.lang, sig, inputs, None)? {
            Err(failed) => {
                report.dropped.insert(failed.status.as_str().to_string(), inputs.len());
                report.reason = Some(failed.status.as_str().to_string());
            }
            Ok(results) => {
                for (input, r) in inputs.iter().zip(results) {
                    if r.status == ExecStatus::Ok {
                        suite.cases.push(TestCase {
                            input: input.clone(),
                            expected: String::from_utf8_lossy(normalize_output(&r.stdout)).into_owned(),
                        });
                    } else {
                        *report.dropped.entry(r.status.as_str().to_string()).or_default() += 1;
                    }
                }
                if suite.cases.is_empty() {
                    report.reason = Some("no surviving inputs".into());
                }
            }
        }
        report.kept = suite.cases.len();
        report.usable = suite.is_usable();
        Ok((suite, report))
    }

    /// Judges one candidate against every case of `suite`.
    pub fn judge_candidate(
        &self,
        candidate_rank: usize,
        cand_text: &str,
        cand_lang: Lang,
        suite: &TestSuite,
    ) -> Result<Verdict, SandboxError> {
        let n = suite.cases.len();
        let all = |o: CaseOutcome| Verdict::from_cases(candidate_rank, vec![o; n]);
        let sig = match extract_call_signature(cand_text, cand_lang, &suite.sig) {
            Ok(s) => s,
            Err(_) => return Ok(all(CaseOutcome::Error)),
        };
        let inputs: Vec<TestInput> = suite.cases.iter().map(|c| c.input.clone()).collect();
        let expected: Vec<String> = suite.cases.iter().map(|c| c.expected.clone()).collect();
        let fail_fast = self.cfg.fail_fast.then_some(expected.as_slice());
        let results = match self.run_cases(cand_text, cand_lang, &sig, &inputs, fail_fast)? {
            Err(failed) if failed.status == ExecStatus::Timeout => return Ok(all(CaseOutcome::Timeout)),
            Err(_) => return Ok(all(CaseOutcome::Error)),
            Ok(r) => r,
        };
        let per_case = results
            .iter()
            .zip(&suite.cases)
            .map(|(r, case)| match r.status {
                ExecStatus::Ok if normalize_output(&r.stdout) == case.expected.as_bytes() => CaseOutcome::Match,
                ExecStatus::Ok => CaseOutcome::Mismatch,
                ExecStatus::Timeout => CaseOutcome::Timeout,
                ExecStatus::CompileError | ExecStatus::RuntimeError => CaseOutcome::Error,
            })
            .collect();
        Ok(Verdict::from_cases(candidate_rank, per_case))
    }

    /// Judges candidates (distinct texts in parallel); returns the passing ones
    /// in their original order plus one verdict per candidate.
    pub fn filter_candidates(
        &self,
        cands: &[Candidate],
        cand_lang: Lang,
        suite: &TestSuite,
    ) -> Result<(Vec<Candidate>, Vec<Verdict>), SandboxError> {
        let mut unique: Vec<&str> = Vec::new();
        let mut slot: HashMap<&str, usize> = HashMap::new();
        for c in cands {
            slot.entry(c.text.as_str()).or_insert_with(|| {
                unique.push(c.text.as_str());
                unique.len() - 1
            });
        }
        let judged: Result<Vec<Verdict>, SandboxError> = self
            .pool
            .install(|| unique.par_iter().map(|text| self.judge_candidate(0, text, cand_lang, suite)).collect());
        let judged = judged?;
        let verdicts: Vec<Verdict> =
            cands.iter().map(|c| Verdict { candidate_rank: c.rank, ..judged[slot[c.text.as_str()]].clone() }).collect();
        let correct = cands.iter().zip(&verdicts).filter(|(_, v)| v.passed).map(|(c, _)| c.clone()).collect();
        Ok((correct, verdicts))
    }

    /// Compile-only (or parse-only) check of a bare program text.
    pub fn syntax_ok(&self, code: &str, lang: Lang) -> Result<bool, SandboxError> {
        if code.trim().is_empty() {
            return Ok(false);
        }
        let shell = emit_shell(code, lang);
        let check = self.cfg.toolchains.get(lang).check.clone();
        Ok(matches!(self.prepare(lang, &shell, Some(&check))?, Compiled::Ready(_)))
    }

    /// Runs `f` on the sandbox's worker pool.
    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }
}

fn path_strings(p: &Prepared) -> (String, String, String) {
    let dir = p.dir.path();
    (
        dir.join("prog").to_string_lossy().into_owned(),
        p.src.to_string_lossy().into_owned(),
        dir.to_string_lossy().into_owned(),
    )
}

fn java_public_class(code: &str) -> Option<String> {
    let toks = crate::lexer::lex(code, Lang::Java);
    toks.windows(3).find(|w| w[0].is("public") && w[1].is("class")).map(|w| w[2].text.to_string())
}

fn java_main_class(code: &str) -> Option<String> {
    // Class whose body declares `main`; the first public class otherwise.
    let toks = crate::lexer::lex(code, Lang::Java);
    let mut current = None;
    for (i, t) in toks.iter().enumerate() {
        if t.is("class") {
            current = toks.get(i + 1).map(|n| n.text.to_string());
        }
        if t.is("main") && toks.get(i + 1).is_some_and(|n| n.is("(")) {
            return current;
        }
    }
    java_public_class(code)
}
