// Synthetic exogenous traces and how many episodes' worth of windows they hold.

use acmdp::envs::{augment, synth_trace, SynthKind};
use acmdp::harness::trace_info;

pub fn run() -> anyhow::Result<()> {
    for kind in [SynthKind::Constant, SynthKind::Sinusoidal, SynthKind::Spiky] {
        let t = synth_trace(kind, 24 * 30, 3, 1.0);
        let i = trace_info(&t, 24, 24)?;
        println!(
            "{:<10} len {:>4}  range [{:.3}, {:.3}]  mean {:.3}  daily windows {}",
            i.name, i.len, i.min, i.max, i.mean, i.windows
        );
    }
    let t = synth_trace(SynthKind::Sinusoidal, 24 * 7, 0, 1.0);
    let windows = augment(&t.windows(24, 24)?, 4, 0.1, 9);
    println!("a week of days, jittered 4 ways: {} windows", windows.len());
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run()
}
