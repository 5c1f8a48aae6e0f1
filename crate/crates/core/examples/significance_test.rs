//! Welch's t-test between per-example scores of two systems.
//!
//! cargo run --example significance_test

use transaug::metrics::t_test;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let baseline = [61.2, 58.9, 63.4, 60.1, 59.7, 62.0, 60.8, 61.5];
    let augmented = [64.0, 65.3, 63.1, 66.2, 64.8, 65.9, 63.7, 64.4];
    let r = t_test(&augmented, &baseline)?;
    println!("t = {:.4}, df = {:.2}, p = {:.2e}", r.t, r.df, r.p);
    println!("significant at 0.01: {}", r.p < 0.01);
    Ok(())
}
