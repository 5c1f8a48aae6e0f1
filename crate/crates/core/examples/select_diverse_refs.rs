//! Pick the most mutually distinct correct candidates and add them as extra
//! references to a parallel example.
//!
//! cargo run --example select_diverse_refs

use std::collections::BTreeMap;

use transaug::client::Candidate;
use transaug::refselect::{augment_parallel, levenshtein, select_diverse, Selection, SelectionConfig};
use transaug::{Dataset, Lang, ParallelExample, Program};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let reference = "int sq(int a) { return a * a; }";
    let correct: Vec<Candidate> = [
        "int sq(int a) { return a * a; }",
        "int sq(int a) { return a*a; }",
        "int sq(int x) {\n    int r = x * x;\n    return r;\n}",
        "int sq(int a) { return (int) pow(a, 2); }",
    ]
    .iter()
    .enumerate()
    .map(|(rank, t)| Candidate { text: t.to_string(), score: -(rank as f64), rank })
    .collect();

    for c in &correct {
        println!("rank {} distance to reference: {}", c.rank, levenshtein(&c.text, reference));
    }
    let chosen = select_diverse(&correct, &[reference.to_string()], &SelectionConfig { k: 2, ..Default::default() });
    println!("selected ranks: {:?}", chosen.iter().map(|c| c.rank).collect::<Vec<_>>());

    let ds = Dataset::parallel(
        "demo",
        vec![ParallelExample {
            src: Program::new("sq", Lang::Python, "def sq(a: int) -> int:\n    return a * a\n"),
            refs: vec![Program::new("sq:ref0", Lang::Cpp, reference)],
        }],
    );
    let sels: Vec<Selection> = chosen
        .iter()
        .map(|c| Selection { example_id: "sq".into(), candidate_rank: c.rank, lang: Lang::Cpp, text: c.text.clone() })
        .collect();
    let augmented = augment_parallel(&ds, &BTreeMap::from([("sq".to_string(), sels)]))?;
    for r in &augmented.parallel_records().unwrap_or_default()[0].refs {
        println!("ref {}:\n{}", r.id, r.code);
    }
    Ok(())
}
