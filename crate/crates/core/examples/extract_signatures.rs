//! Extract typed entry-point signatures from Python, Java and C++ functions.
//!
//! cargo run --example extract_signatures

use transaug::signature::extract_from_code;
use transaug::Lang;

fn main() {
    let samples = [
        (Lang::Python, "from typing import List\n\ndef count(xs: List[int], s: str) -> int:\n    return len(xs) + len(s)\n"),
        (Lang::Java, "class Solution {\n    static double mean(int[] xs) { return 0.0; }\n}\n"),
        (Lang::Cpp, "#include <vector>\nusing namespace std;\nbool any_neg(vector<long long> xs) { for (auto x : xs) if (x < 0) return true; return false; }\n"),
        (Lang::Python, "def untyped(a):\n    return a\n"),
    ];
    for (lang, code) in samples {
        match extract_from_code(code, lang) {
            Ok(sig) => {
                let params: Vec<String> = sig.params.iter().map(|p| format!("{}: {:?}", p.name, p.tag)).collect();
                println!("{lang}: {}({}) returns={}", sig.function_name, params.join(", "), sig.return_present);
            }
            Err(e) => println!("{lang}: error: {e}"),
        }
    }
}
