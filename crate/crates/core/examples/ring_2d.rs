//! Trains on the eight-mode ring and reports distance and mode coverage.
//!
//! Usage: `cargo run --release --example ring_2d [LOSS] [ITERATIONS]`

use lrgan::synth::sample;
use lrgan::trainer::{mode_coverage, sliced_wasserstein, train, TrainConfig};

fn main() -> lrgan::Result<()> {
    let mut args = std::env::args().skip(1);
    let loss = args.next().unwrap_or_else(|| "MSE".into());
    let mut cfg = TrainConfig::ring_2d(&loss, 0)?;
    if let Some(n) = args.next() {
        cfg.total_generator_iters = n
            .parse()
            .map_err(|_| lrgan::Error::Config(format!("bad iteration count `{n}`")))?;
    }
    let target = cfg.target.density().cloned().expect("ring target");
    let outcome = train(&cfg)?;
    // Large draws: on a ring this sharp, small samples put a high floor under
    // the 2-Wasserstein estimate.
    let n = 65_536;
    let fake = outcome.generator.net.predict(&sample(&cfg.origin, n, 4)?)?;
    let real = sample(&target, n, 1)?;
    let origin = sample(&cfg.origin, n, 2)?;
    println!(
        "SWD to target: generated {:.3}, origin {:.3}",
        sliced_wasserstein(&fake, &real, 256, 3)?,
        sliced_wasserstein(&origin, &real, 256, 3)?
    );
    let centres: Vec<Vec<f64>> = target.ring_centres().iter().map(|c| c.to_vec()).collect();
    for (i, share) in mode_coverage(&fake, &centres)?.iter().enumerate() {
        println!(
            "mode {i}: {:>5.1}% {}",
            100.0 * share,
            "#".repeat((share * 100.0) as usize)
        );
    }
    Ok(())
}
