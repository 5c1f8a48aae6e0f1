//! Embed programs with TF-IDF and pair each source with its nearest target.
//!
//! cargo run --example tfidf_knn

use transaug::compcorp::{build_knn, cosine, embed_tfidf, PairingConfig};
use transaug::{Dataset, Lang, Program};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let src = vec![
        Program::new(
            "py-fib",
            Lang::Python,
            "def fib(n):\n    a, b = 0, 1\n    for _ in range(n):\n        a, b = b, a + b\n    return a\n",
        ),
        Program::new("py-rev", Lang::Python, "def rev(s):\n    return s[::-1]\n"),
    ];
    let tgt = vec![
        Program::new("cc-rev", Lang::Cpp, "string rev(string s) { reverse(s.begin(), s.end()); return s; }\n"),
        Program::new("cc-fib", Lang::Cpp, "long fib(int n) { long a = 0, b = 1; for (int i = 0; i < n; i++) { long t = a + b; a = b; b = t; } return a; }\n"),
    ];

    // Fit one vocabulary over both sides so the vectors share a dimension.
    let all: Vec<Program> = src.iter().chain(&tgt).cloned().collect();
    let vecs = embed_tfidf(&all)?;
    let (src_vecs, tgt_vecs) = vecs.split_at(src.len());
    println!("vocabulary size: {}", vecs[0].values.len());
    for s in src_vecs {
        for t in tgt_vecs {
            println!("  cos({}, {}) = {:.3}", s.program_id, t.program_id, cosine(s, t)?);
        }
    }

    let pairs = build_knn(
        &Dataset::monolingual("src", src),
        &Dataset::monolingual("tgt", tgt),
        src_vecs,
        tgt_vecs,
        &PairingConfig { knn_k: 1, ..Default::default() },
    )?;
    for ex in pairs.comparable_records().unwrap_or_default() {
        println!("nearest: {} -> {}", ex.src.id, ex.tgt.id);
    }
    Ok(())
}
