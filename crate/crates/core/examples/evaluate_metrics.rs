//! Compute CA@k, corpus BLEU, construct match and the unique-correct histogram
//! on a small hand-made result set.
//!
//! cargo run --example evaluate_metrics

use transaug::metrics::{
    bleu, ca_at_k, construct_match, default_buckets, detect_constructs, unique_correct_histogram, JudgedExample,
};
use transaug::Lang;

fn judged(id: &str, passed: &[bool]) -> JudgedExample {
    JudgedExample { example_id: id.into(), verdicts: passed.to_vec() }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let examples = vec![
        judged("a", &[true, false, true]),
        judged("b", &[false, false, true]),
        judged("c", &[false, false, false]),
    ];
    for k in [1, 2, 3] {
        println!("CA@{k} = {:.3}", ca_at_k(&examples, k)?);
    }

    let outputs = vec![
        "for (int i = 0; i < n; i++) { if (a[i] > m) m = a[i]; }".to_string(),
        "if (x > 0) return 1; else if (x < 0) return -1; return 0;".to_string(),
    ];
    let refs = vec![
        vec!["for (int i = 0; i < n; i++) { m = max(m, a[i]); }".to_string()],
        vec!["if (x > 0) return 1; else if (x < 0) return -1; else return 0;".to_string()],
    ];
    println!("BLEU = {:.2}", bleu(&outputs, &refs)?);

    for o in &outputs {
        println!("constructs: {:?}", detect_constructs(o, Lang::Cpp));
    }
    let first_refs: Vec<String> = refs.iter().map(|r| r[0].clone()).collect();
    for (c, prf) in construct_match(&outputs, &first_refs, &[Lang::Cpp, Lang::Cpp])? {
        println!("{:?}: P={:.1} R={:.1} F1={:.1}", c, prf.precision, prf.recall, prf.f1);
    }

    for bin in unique_correct_histogram(&examples, 3, &default_buckets())? {
        println!("{}: {}", bin.bucket, bin.count);
    }
    Ok(())
}
