//! Generate seeded inputs for a signature and print the harness programs that
//! would run them in each language.
//!
//! cargo run --example harness_and_inputs

use transaug::signature::extract_signature;
use transaug::testgen::{emit_harness, gen_inputs, GenRanges};
use transaug::{Lang, Program};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = Program::new("scale", Lang::Python, "from typing import List\n\ndef scale(xs: List[int], k: float) -> List[float]:\n    return [x * k for x in xs]\n");
    let sig = extract_signature(&p)?;
    let ranges = GenRanges { n_inputs: 3, list_len: (0, 4), seed: 11, ..Default::default() };
    let inputs = gen_inputs(&sig, &ranges);
    for (i, input) in inputs.iter().enumerate() {
        let args: Vec<String> = input.args.iter().map(|v| v.canonical()).collect();
        println!("input {i}: ({})", args.join("; "));
    }

    println!("--- python harness for input 0 ---");
    println!("{}", emit_harness(&p, &sig, &inputs, 0)?);

    let cpp = Program::new(
        "scale",
        Lang::Cpp,
        "vector<double> scale(vector<int> xs, double k) { vector<double> r; for (int x : xs) r.push_back(x * k); return r; }\n",
    );
    println!("--- c++ harness for input 1 ---");
    println!("{}", emit_harness(&cpp, &extract_signature(&cpp)?, &inputs, 1)?);
    Ok(())
}
