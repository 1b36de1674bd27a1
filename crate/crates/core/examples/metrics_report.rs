//! Short training run whose metrics are written, parsed back and plotted.
//!
//! Usage: `cargo run --release --example metrics_report [OUT_DIR]`

use std::path::PathBuf;

use lrgan::cli::write_plots;
use lrgan::trainer::{format_metrics, parse_metrics, train, TrainConfig};

fn main() -> lrgan::Result<()> {
    let dir = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "lrgan-out/metrics-report".into()),
    );
    std::fs::create_dir_all(&dir).map_err(|e| lrgan::Error::Config(e.to_string()))?;
    let mut cfg = TrainConfig::shift_1d("CrossEntropy", 4)?;
    cfg.total_generator_iters = 2000;
    cfg.eval_every = 50;
    let outcome = train(&cfg)?;

    let text = format_metrics(&outcome.metrics);
    let path = dir.join("metrics.csv");
    std::fs::write(&path, &text).map_err(|e| lrgan::Error::Config(e.to_string()))?;
    assert_eq!(parse_metrics(&text)?, outcome.metrics);
    println!("{} records in {}", outcome.metrics.len(), path.display());
    for p in write_plots(&outcome.metrics, &dir)? {
        println!("plot {}", p.display());
    }
    Ok(())
}
