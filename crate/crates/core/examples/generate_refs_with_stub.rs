//! Request candidates from a local stub model service over HTTP and build a
//! generated comparable corpus from them.
//!
//! cargo run --example generate_refs_with_stub

use transaug::client::stub::{StubReply, StubServer};
use transaug::client::{CandidateSource, ClientConfig, GenerationRequest, HttpClient};
use transaug::compcorp::{build_generated, generation_prompt, GenerateConfig};
use transaug::{Dataset, Lang, Program};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let server = StubServer::start(|req| {
        let body = req.parsed().expect("valid request");
        if body.request_id.starts_with("broken") {
            return StubReply::raw(400, "prompt rejected");
        }
        StubReply::ok(&[
            ("int add(int a, int b) { return a - b; }", -2.5),
            ("int add(int a, int b) { return a + b; }", -0.4),
        ])
    })?;
    let client = HttpClient::new(&ClientConfig { endpoint: server.endpoint(), ..Default::default() });

    let p = Program::new("add", Lang::Python, "def add(a, b):\n    return a + b\n").with_docstring("Add two integers.");
    println!("{}", generation_prompt(&p, Lang::Cpp, true));

    let req = GenerationRequest::beam(generation_prompt(&p, Lang::Cpp, true), Lang::Cpp, 2, "add:demo");
    for c in client.request_candidates(&req)? {
        println!("rank {} score {:.2}: {}", c.rank, c.score, c.text);
    }

    let mono = Dataset::monolingual(
        "python",
        vec![p, Program::new("broken", Lang::Python, "def g(:\n").with_docstring("Broken.")],
    );
    let cfg = GenerateConfig { tgt_lang: Lang::Cpp, n_candidates: 2, ..Default::default() };
    let (ds, skips) = build_generated(&mono, &client, &cfg)?;
    println!("generated pairs: {}, skipped: {:?}", ds.len(), skips);
    println!("requests served: {}", server.hits());
    Ok(())
}
