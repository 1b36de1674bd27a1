//! Sampling, densities and exact log ratios for the synthetic distributions.

use lrgan::synth::{pdf, sample, true_log_ratio, DensitySpec};
use lrgan::trainer::{column_moments, mode_coverage};

fn main() -> lrgan::Result<()> {
    let shift = DensitySpec::gaussian_1d(4.0, 1.0);
    let origin = DensitySpec::gaussian_1d(0.0, 1.0);
    let x = sample(&shift, 10_000, 1)?;
    println!("N(4, 1) sample moments: {:?}", column_moments(&x));
    for p in [0.0, 2.0, 4.0] {
        println!(
            "  log r = log(h/f) at {p}: {:+.3}",
            true_log_ratio(&shift, &origin, &[p])?
        );
    }

    let ring = DensitySpec::ring(8, 2.0, 0.02);
    let y = sample(&ring, 8_000, 2)?;
    let centres: Vec<Vec<f64>> = ring.ring_centres().iter().map(|c| c.to_vec()).collect();
    let cover = mode_coverage(&y, &centres)?;
    println!(
        "{ring}: mode shares {:?}",
        cover.iter().map(|c| format!("{c:.3}")).collect::<Vec<_>>()
    );
    println!(
        "  density at a centre {:.1}, at the origin {:.1e}",
        pdf(&ring, &centres[0])?,
        pdf(&ring, &[0.0, 0.0])?
    );

    let parsed: DensitySpec = "uniform(lo=[0, -1], hi=[1, 1])".parse()?;
    println!(
        "{parsed}: moments {:?}",
        column_moments(&sample(&parsed, 10_000, 3)?)
    );
    Ok(())
}
