//! Build natural and random comparable corpora from two monolingual corpora.
//!
//! cargo run --example build_comparable

use transaug::compcorp::{build_natural, build_random, PairingConfig};
use transaug::{Dataset, Lang, Program};

fn corpus(lang: Lang, rows: &[(&str, &str, &str)]) -> Dataset {
    let progs = rows.iter().map(|(id, problem, code)| Program::new(*id, lang, *code).with_problem(*problem)).collect();
    Dataset::monolingual(lang.as_str(), progs)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let py = corpus(
        Lang::Python,
        &[
            ("py-a", "sum", "def f(xs):\n    return sum(xs)\n"),
            ("py-b", "sum", "def f(xs):\n    t = 0\n    for x in xs:\n        t += x\n    return t\n"),
            ("py-c", "max", "def f(xs):\n    return max(xs)\n"),
        ],
    );
    let cpp = corpus(
        Lang::Cpp,
        &[
            ("cc-a", "sum", "int f(vector<int> xs) { return accumulate(xs.begin(), xs.end(), 0); }\n"),
            ("cc-b", "max", "int f(vector<int> xs) { return *max_element(xs.begin(), xs.end()); }\n"),
            ("cc-c", "sort", "void f(vector<int>& xs) { sort(xs.begin(), xs.end()); }\n"),
        ],
    );
    let cfg = PairingConfig { max_per_problem: 2, ..Default::default() };

    let natural = build_natural(&py, &cpp, &cfg)?;
    println!("natural pairs: {}", natural.len());
    for ex in natural.comparable_records().unwrap_or_default() {
        println!("  {} -> {}", ex.src.id, ex.tgt.id);
    }

    let random = build_random(&py, &cpp, &PairingConfig { seed: 7, ..cfg })?;
    println!("random pairs (seed 7):");
    for ex in random.comparable_records().unwrap_or_default() {
        println!("  {} -> {}", ex.src.id, ex.tgt.id);
    }
    Ok(())
}
