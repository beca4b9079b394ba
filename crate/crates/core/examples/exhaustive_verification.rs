// Enumerates every model sequence and ML action grid on the shipped tiny
// fixtures, then shows the counterexamples found when projection is off.

use std::path::Path;

use acmdp::harness::verify;

pub fn run() -> anyhow::Result<()> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let ok = verify(&root.join("fixtures"))?;
    for c in &ok.checks {
        let s = &c.safety;
        println!(
            "{:<10} λ={:<4} b={:<4} {:>4} leaves, {} violations, min slack {:.4}",
            s.fixture, s.lambda, s.b, s.leaves, s.violations, s.min_slack
        );
    }
    println!("shipped fixtures pass: {}", ok.passed());

    let bad = verify(&root.join("tests/faulty"))?;
    for c in bad.failures() {
        for ce in &c.safety.counterexamples {
            println!("{}: {ce}", c.safety.fixture);
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run()
}
