//! Build a test suite from a Python source and judge C++ candidates against it.
//! Needs python3 and g++ on PATH.
//!
//! cargo run --example judge_candidates

use transaug::client::Candidate;
use transaug::sandbox::{Sandbox, SandboxConfig};
use transaug::signature::extract_signature;
use transaug::testgen::{gen_inputs, GenRanges};
use transaug::{Lang, Program};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sandbox = Sandbox::new(SandboxConfig::default())?;
    let src = Program::new("clamp", Lang::Python, "def clamp(a: int) -> int:\n    if a < 0:\n        return 0\n    elif a > 50:\n        return 50\n    return a\n");
    let sig = extract_signature(&src)?;
    let inputs = gen_inputs(&sig, &GenRanges { seed: 3, ..Default::default() });
    let (suite, report) = sandbox.build_test_suite(&src, &sig, &inputs)?;
    println!("suite: {} of {} inputs kept, usable={}", report.kept, report.total_inputs, report.usable);

    let texts = [
        "int clamp(int a) { return a < 0 ? 0 : (a > 50 ? 50 : a); }",
        "int clamp(int a) { return a < 0 ? 0 : a; }",
        "int clamp(int a) { return max(0, min(a, 50)) }",
        "int clamp(int a) {\n    if (a < 0) return 0;\n    if (a > 50) return 50;\n    return a;\n}",
    ];
    let cands: Vec<Candidate> = texts
        .iter()
        .enumerate()
        .map(|(rank, t)| Candidate { text: t.to_string(), score: -(rank as f64), rank })
        .collect();
    let (correct, verdicts) = sandbox.filter_candidates(&cands, Lang::Cpp, &suite)?;
    for v in &verdicts {
        println!("candidate {}: passed={} {:?}", v.candidate_rank, v.passed, v.per_case);
    }
    println!("correct ranks: {:?}", correct.iter().map(|c| c.rank).collect::<Vec<_>>());
    Ok(())
}
