//! Synthetic origin/target densities with exact samplers and pdfs, the
//! analytic likelihood-ratio oracle, and sample-file ingestion.

mod density;
mod io;
mod rng;

pub use density::{pdf, sample, sample_from, true_log_ratio, DensitySpec};
pub use io::{format_samples, load_samples, parse_samples, write_samples};
pub use rng::SampleStream;
