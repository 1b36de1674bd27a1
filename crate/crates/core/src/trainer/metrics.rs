use std::fmt::Write as _;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss_family::{ratio_from_discriminator, LossPair};
use crate::nn::DenseNet;
use crate::synth::SampleStream;

/// Mean and population standard deviation of ratio estimates on the real
/// and the generated batch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioStats {
    pub real_mean: f64,
    pub real_std: f64,
    pub gen_mean: f64,
    pub gen_std: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Ratio estimates `ω⁻¹(D(x))` for discriminator outputs.
pub fn ratio_estimates(loss: &LossPair, outputs: &Array2<f64>) -> Result<Vec<f64>> {
    outputs
        .iter()
        .map(|d| ratio_from_discriminator(loss, *d))
        .collect()
}

pub(crate) fn ratio_stats_from_outputs(
    loss: &LossPair,
    real_out: &Array2<f64>,
    fake_out: &Array2<f64>,
) -> Result<RatioStats> {
    let (real_mean, real_std) = mean_std(&ratio_estimates(loss, real_out)?);
    let (gen_mean, gen_std) = mean_std(&ratio_estimates(loss, fake_out)?);
    Ok(RatioStats {
        real_mean,
        real_std,
        gen_mean,
        gen_std,
    })
}

/// Ratio statistics of the discriminator on a real and a generated batch.
pub fn likelihood_ratio_metric(
    loss: &LossPair,
    disc: &DenseNet,
    real: &Array2<f64>,
    fake: &Array2<f64>,
) -> Result<RatioStats> {
    if !loss.ratio_invertible() {
        return Err(Error::RatioNotRecoverable(loss.name().to_string()));
    }
    ratio_stats_from_outputs(loss, &disc.predict(real)?, &disc.predict(fake)?)
}

/// Kernel width of [`mmd_rbf`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bandwidth {
    Fixed(f64),
    /// Median pairwise distance of the pooled sample.
    Median,
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn median_distance(x: &Array2<f64>, y: &Array2<f64>) -> f64 {
    let rows: Vec<_> = x.rows().into_iter().chain(y.rows()).collect();
    let mut d = Vec::with_capacity(rows.len() * (rows.len() - 1) / 2);
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            d.push(sq_dist(rows[i], rows[j]));
        }
    }
    let mid = d.len() / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    m.sqrt()
}

/// Unbiased MMD² with the Gaussian kernel `exp(-‖a-b‖²/(2σ²))`.
pub fn mmd_rbf(x: &Array2<f64>, y: &Array2<f64>, bandwidth: Bandwidth) -> Result<f64> {
    if x.nrows() < 2 || y.nrows() < 2 {
        return Err(Error::InvalidArgument(
            "MMD needs at least 2 samples per set".into(),
        ));
    }
    if x.ncols() != y.ncols() {
        return Err(Error::Shape("sample sets differ in dimension".into()));
    }
    let sigma = match bandwidth {
        Bandwidth::Fixed(s) => s,
        Bandwidth::Median => median_distance(x, y),
    };
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "degenerate kernel bandwidth {sigma}"
        )));
    }
    let gamma = 1.0 / (2.0 * sigma * sigma);
    let k = |a: ArrayView1<f64>, b: ArrayView1<f64>| (-gamma * sq_dist(a, b)).exp();
    let within = |s: &Array2<f64>| {
        let m = s.nrows();
        let mut total = 0.0;
        for i in 0..m {
            for j in i + 1..m {
                total += k(s.row(i), s.row(j));
            }
        }
        2.0 * total / (m * (m - 1)) as f64
    };
    let mut cross = 0.0;
    for a in x.rows() {
        for b in y.rows() {
            cross += k(a, b);
        }
    }
    cross /= (x.nrows() * y.nrows()) as f64;
    Ok(within(x) + within(y) - 2.0 * cross)
}

/// 2-Wasserstein distance between two 1D empirical distributions. Unequal
/// sizes are handled by integrating the squared quantile difference over
/// the merged breakpoints.
pub fn wasserstein_1d(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (m, n) = (a.len(), b.len());
    if m == n {
        let s: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
        return (s / m as f64).sqrt();
    }
    let (mut i, mut j) = (0, 0);
    let mut t = 0.0;
    let mut total = 0.0;
    while i < m && j < n {
        let next_a = (i + 1) as f64 / m as f64;
        let next_b = (j + 1) as f64 / n as f64;
        let next = next_a.min(next_b);
        total += (next - t) * (a[i] - b[j]).powi(2);
        t = next;
        if next_a <= next {
            i += 1;
        }
        if next_b <= next {
            j += 1;
        }
    }
    total.sqrt()
}

/// Mean 1D 2-Wasserstein distance over seeded random unit directions.
pub fn sliced_wasserstein(
    x: &Array2<f64>,
    y: &Array2<f64>,
    n_projections: usize,
    seed: u64,
) -> Result<f64> {
    if x.ncols() != y.ncols() {
        return Err(Error::Shape("sample sets differ in dimension".into()));
    }
    if n_projections == 0 || x.nrows() == 0 || y.nrows() == 0 {
        return Err(Error::InvalidArgument(
            "need samples and at least one projection".into(),
        ));
    }
    let d = x.ncols();
    let mut stream = SampleStream::new(seed);
    let mut total = 0.0;
    for _ in 0..n_projections {
        let mut theta: Vec<f64> = (0..d).map(|_| stream.normal()).collect();
        let norm = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
        theta.iter_mut().for_each(|v| *v /= norm);
        let dir = ndarray::ArrayView1::from(&theta);
        let mut pa = x.dot(&dir).to_vec();
        let mut pb = y.dot(&dir).to_vec();
        total += wasserstein_1d(&mut pa, &mut pb);
    }
    Ok(total / n_projections as f64)
}

/// One evaluation row of a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub iteration: usize,
    /// Mean φ on real plus mean ψ on generated, without the penalty.
    pub disc_objective: f64,
    pub gen_objective: f64,
    pub penalty: f64,
    /// Ratio statistics on fresh evaluation batches.
    pub lr: Option<RatioStats>,
    /// Ratio statistics on the last critic batch.
    pub lr_train: Option<RatioStats>,
    pub mmd: f64,
    pub swd: f64,
}

/// Column order of the metrics file.
pub const METRIC_COLUMNS: [&str; 14] = [
    "iteration",
    "disc_objective",
    "gen_objective",
    "penalty",
    "lr_real_mean",
    "lr_real_std",
    "lr_gen_mean",
    "lr_gen_std",
    "lr_train_real_mean",
    "lr_train_real_std",
    "lr_train_gen_mean",
    "lr_train_gen_std",
    "mmd",
    "swd",
];

fn stats_fields(s: &Option<RatioStats>) -> [String; 4] {
    match s {
        Some(s) => [s.real_mean, s.real_std, s.gen_mean, s.gen_std].map(|v| v.to_string()),
        None => Default::default(),
    }
}

/// Mean of `lr_real_mean` over records in the last tenth of a run of
/// `total_iters` generator iterations; `None` without ratio records there.
pub fn final_window_lr(records: &[MetricRecord], total_iters: usize) -> Option<f64> {
    let start = total_iters - total_iters / 10;
    let tail: Vec<f64> = records
        .iter()
        .filter(|r| r.iteration > start)
        .filter_map(|r| r.lr.map(|s| s.real_mean))
        .collect();
    (!tail.is_empty()).then(|| tail.iter().sum::<f64>() / tail.len() as f64)
}

/// Fraction of rows whose nearest centre (Euclidean) is each centre.
pub fn mode_coverage(samples: &Array2<f64>, centres: &[Vec<f64>]) -> Result<Vec<f64>> {
    if samples.nrows() == 0 || centres.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if centres.iter().any(|c| c.len() != samples.ncols()) {
        return Err(Error::Shape(format!(
            "centres must have {} coordinates",
            samples.ncols()
        )));
    }
    let mut counts = vec![0usize; centres.len()];
    for row in samples.rows() {
        let dist = |c: &Vec<f64>| row.iter().zip(c).map(|(x, m)| (x - m).powi(2)).sum::<f64>();
        let best = (0..centres.len())
            .min_by(|&a, &b| dist(&centres[a]).total_cmp(&dist(&centres[b])))
            .unwrap_or(0);
        counts[best] += 1;
    }
    let n = samples.nrows() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / n).collect())
}

/// Comma-separated metrics with a header; absent ratio fields are empty.
pub fn format_metrics(records: &[MetricRecord]) -> String {
    let mut out = METRIC_COLUMNS.join(",");
    out.push('\n');
    for r in records {
        let lr = stats_fields(&r.lr);
        let lt = stats_fields(&r.lr_train);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.iteration,
            r.disc_objective,
            r.gen_objective,
            r.penalty,
            lr.join(","),
            lt.join(","),
            r.mmd,
            r.swd
        );
    }
    out
}

pub fn parse_metrics(text: &str) -> Result<Vec<MetricRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == METRIC_COLUMNS.join(",") => {}
        _ => {
            return Err(Error::Config(
                "metrics file lacks the expected header".into(),
            ))
        }
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != METRIC_COLUMNS.len() {
            return Err(Error::RaggedRow {
                line: idx + 1,
                expected: METRIC_COLUMNS.len(),
                found: fields.len(),
            });
        }
        let num = |k: usize| -> Result<f64> {
            fields[k]
                .trim()
                .parse()
                .map_err(|_| Error::NonNumericField {
                    line: idx + 1,
                    field: fields[k].to_string(),
                })
        };
        let stats = |k: usize| -> Result<Option<RatioStats>> {
            if fields[k].trim().is_empty() {
                return Ok(None);
            }
            Ok(Some(RatioStats {
                real_mean: num(k)?,
                real_std: num(k + 1)?,
                gen_mean: num(k + 2)?,
                gen_std: num(k + 3)?,
            }))
        };
        out.push(MetricRecord {
            iteration: num(0)? as usize,
            disc_objective: num(1)?,
            gen_objective: num(2)?,
            penalty: num(3)?,
            lr: stats(4)?,
            lr_train: stats(8)?,
            mmd: num(12)?,
            swd: num(13)?,
        });
    }
    Ok(out)
}
