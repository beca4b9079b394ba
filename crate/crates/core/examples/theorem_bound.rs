// Both sides of the regret bound, enumerated exactly on every fixture.

use std::path::Path;
use std::sync::Arc;

use acmdp::model::CompetitiveSpec;
use acmdp::oracle::{load_fixtures, theorem_check};

pub fn run() -> anyhow::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    println!(
        "{:<10} {:>5} {:>5} {:>8} {:>8} {:>10} {:>6}",
        "fixture", "λ", "b", "gap", "bound", "proj bound", "grid"
    );
    for t in load_fixtures(&dir)? {
        let t = Arc::new(t);
        for s in &t.specs {
            let r = theorem_check(&t, CompetitiveSpec::new(s[0], s[1])?)?;
            println!(
                "{:<10} {:>5} {:>5} {:>8.4} {:>8.4} {:>10.4} {:>6}",
                r.fixture, r.lambda, r.b, r.gap, r.bound, r.projection_bound, r.grid_limited
            );
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run()
}
