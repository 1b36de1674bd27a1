//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.
//!
//! The training criteria run the full default schedules and take several
//! minutes each on one core.

use std::time::{Duration, Instant};

use lrgan::ideal_solver::{
    minmax_value, solve_minmax_grid, DiscreteDensity, RatioField, SolverOptions,
};
use lrgan::loss_family::{
    catalogue, catalogue_lookup, invertible_names, ratio_from_discriminator, LossPair, Squashing,
};
use lrgan::nn::gradcheck::{fd_input_gradient, fd_param_gradient, max_relative_error, FD_STEP};
use lrgan::nn::{
    backward, flatten, forward, init_net, input_grad_norm_and_hvp, input_gradients, Activation,
    DenseNet, NetSpec, PenaltyMode, PenaltyVariant,
};
use lrgan::synth::{sample, DensitySpec, SampleStream};
use lrgan::trainer::{
    column_moments, final_window_lr, format_metrics, mode_coverage, sliced_wasserstein, train,
    TrainConfig, TrainOutcome,
};
use lrgan::verify::{
    check_derivatives, inner_argmax, outer_minimizer, InnerMax, Tolerances, DEFAULT_R_GRID,
};
use lrgan::Error;
use ndarray::Array2;

struct Verdict {
    passed: bool,
    detail: String,
}

impl Verdict {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

fn loss(name: &str) -> LossPair {
    catalogue_lookup(name).unwrap().loss
}

fn minmax_target(l: &LossPair) -> f64 {
    let a = l.anchor();
    l.phi(a) + l.psi(a)
}

fn timed(limit: Option<Duration>, check: impl FnOnce() -> Verdict) -> Verdict {
    let start = Instant::now();
    let mut v = check();
    let took = start.elapsed();
    v.detail = format!("{} [{:.2?}]", v.detail, took);
    if let Some(limit) = limit {
        if took >= limit {
            v.passed = false;
            v.detail = format!("{} exceeds {:?}", v.detail, limit);
        }
    }
    v
}

fn recipe_consistency() -> Verdict {
    let tol = Tolerances::default();
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    let entries = catalogue();
    for e in entries {
        let report = check_derivatives(&e.loss, 100, &tol);
        for c in report.checks.iter().filter(|c| c.name.contains("_fd_")) {
            worst = worst.max(c.abs_error);
            if !c.passed {
                failures.push(format!("{} {}", e.loss.name(), c.name));
            }
        }
        if report.skipped.is_some() {
            failures.push(format!("{} skipped", e.loss.name()));
        }
    }
    Verdict::new(
        failures.is_empty() && entries.len() == 13,
        format!(
            "{} losses, worst relative error {worst:.2e}; failures {failures:?}",
            entries.len()
        ),
    )
}

fn inner_maximizer() -> Verdict {
    let mut worst: f64 = 0.0;
    let names = invertible_names();
    for name in &names {
        let l = loss(name);
        for r in DEFAULT_R_GRID {
            let err = match inner_argmax(&l, r) {
                Ok(InnerMax::Attained { d, .. }) => (d - l.omega().forward(r)).abs(),
                _ => f64::INFINITY,
            };
            worst = worst.max(err);
        }
    }
    Verdict::new(
        worst <= 1e-4 && names.len() == 11,
        format!(
            "{} losses × 5 ratios, worst |argmax − ω(r)| = {worst:.2e}",
            names.len()
        ),
    )
}

fn outer_minimizer_check() -> Verdict {
    let (mut worst_r, mut worst_v): (f64, f64) = (0.0, 0.0);
    for name in invertible_names() {
        let l = loss(name);
        match outer_minimizer(&l) {
            Ok((r, v)) => {
                worst_r = worst_r.max((r - 1.0).abs());
                worst_v = worst_v.max((v - l.phi(l.anchor())).abs());
            }
            Err(_) => worst_r = f64::INFINITY,
        }
    }
    Verdict::new(
        worst_r <= 1e-3 && worst_v <= 1e-6,
        format!("worst |r* − 1| = {worst_r:.2e}, worst |min − φ(ω(1))| = {worst_v:.2e}"),
    )
}

fn minmax_value_check() -> Verdict {
    let mut worst: f64 = 0.0;
    for name in invertible_names() {
        let l = loss(name);
        let observed = match inner_argmax(&l, 1.0) {
            Ok(InnerMax::Attained { value, .. }) => value,
            _ => f64::NAN,
        };
        let err = (observed - minmax_target(&l)).abs();
        worst = if err.is_nan() {
            f64::INFINITY
        } else {
            worst.max(err)
        };
    }
    let ce = minmax_target(&loss("CrossEntropy"));
    let ce_err = (ce + 2.0 * 2f64.ln()).abs();
    Verdict::new(
        worst <= 1e-6 && ce_err <= 1e-6,
        format!("worst value error {worst:.2e}; CrossEntropy value {ce:.6}"),
    )
}

fn ideal_solver() -> Verdict {
    let f = DiscreteDensity::uniform(64).unwrap();
    let opts = SolverOptions::default();
    let (mut worst_linf, mut worst_value): (f64, f64) = (0.0, 0.0);
    let mut errors = Vec::new();
    for name in invertible_names() {
        let l = loss(name);
        for seed in 0..20 {
            let r0 = RatioField::random_feasible(&f, seed).unwrap();
            match solve_minmax_grid(&l, &f, &r0, &opts) {
                Ok((r, _)) => {
                    worst_linf = worst_linf.max(r.linf_to_one());
                    let v = minmax_value(&l, &r, &f).unwrap();
                    worst_value = worst_value.max((v - minmax_target(&l)).abs());
                }
                Err(e) => errors.push(format!("{name}/{seed}: {e}")),
            }
        }
    }
    Verdict::new(
        errors.is_empty() && worst_linf <= 1e-3 && worst_value <= 1e-6,
        format!("11 losses × 20 starts, worst L∞ {worst_linf:.2e}, worst value error {worst_value:.2e}; errors {errors:?}"),
    )
}

fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut s = SampleStream::new(seed);
    Array2::from_shape_fn((rows, cols), |_| s.normal())
}

fn random_net(spec: &NetSpec, seed: u64) -> DenseNet {
    let mut net = init_net(spec).unwrap();
    let mut s = SampleStream::new(seed ^ 0x5eed);
    for l in &mut net.layers {
        l.bias.iter_mut().for_each(|b| *b = 0.3 * s.normal());
    }
    net
}

fn gradient_exactness() -> Verdict {
    let activations = [
        Activation::SmoothLeaky { slope: 0.2 },
        Activation::Tanh,
        Activation::Rectifier { slope: 0.2 },
    ];
    let squashings = [
        Squashing::Identity,
        Squashing::Softplus,
        Squashing::Logistic,
        Squashing::Tanh,
    ];
    let (mut worst_backprop, mut worst_penalty): (f64, f64) = (0.0, 0.0);
    let mut seed = 1000;
    for act in activations {
        for sq in squashings {
            for widths in [vec![1, 16, 16, 1], vec![2, 8, 8, 1], vec![3, 7, 2]] {
                seed += 1;
                let spec = NetSpec::new(widths.clone(), act, sq, seed);
                let net = random_net(&spec, seed);
                let x = random_matrix(8, widths[0], seed + 1);
                let c = random_matrix(8, *widths.last().unwrap(), seed + 2);
                let (_, cache) = forward(&net, &x).unwrap();
                let (g, gx) = backward(&net, &cache, &c).unwrap();
                let fd = fd_param_gradient(&net, &x, &c, FD_STEP).unwrap();
                worst_backprop = worst_backprop.max(max_relative_error(&flatten(&g), &fd, 1e-6));
                let fdx = fd_input_gradient(&net, &x, &c, FD_STEP).unwrap();
                worst_backprop = worst_backprop.max(max_relative_error(
                    gx.as_slice().unwrap(),
                    fdx.as_slice().unwrap(),
                    1e-6,
                ));
            }
            if !act.is_smooth() {
                continue;
            }
            for variant in [
                PenaltyVariant::Max,
                PenaltyVariant::Mean,
                PenaltyVariant::MeanTwoSided,
            ] {
                seed += 1;
                let spec = NetSpec::new(vec![2, 8, 8, 1], act, sq, seed);
                let mut net = random_net(&spec, seed);
                let mut x = random_matrix(6, 2, seed + 3);
                // Rescaling keeps activations fixed while enlarging ∇ₓD, so the
                // one-sided penalty is active without saturating the output.
                while input_gradients(&net, &x)
                    .unwrap()
                    .rows()
                    .into_iter()
                    .all(|r| r.dot(&r).sqrt() < 1.5)
                {
                    net.layers[0].weight.mapv_inplace(|w| 2.0 * w);
                    x.mapv_inplace(|v| 0.5 * v);
                }
                let exact =
                    input_grad_norm_and_hvp(&net, &x, variant, 10.0, PenaltyMode::Exact).unwrap();
                let fd = input_grad_norm_and_hvp(
                    &net,
                    &x,
                    variant,
                    10.0,
                    PenaltyMode::FiniteDifference { step: 1e-5 },
                )
                .unwrap();
                worst_penalty = worst_penalty.max(max_relative_error(
                    &flatten(&exact.grads),
                    &flatten(&fd.grads),
                    1e-6,
                ));
            }
        }
    }
    Verdict::new(
        worst_backprop <= 1e-4 && worst_penalty <= 1e-3,
        format!(
            "backward vs FD {worst_backprop:.2e}, exact vs FD penalty gradient {worst_penalty:.2e}"
        ),
    )
}

const SHIFT_LOSSES: [&str; 11] = [
    "MSE",
    "CrossEntropy",
    "B2",
    "Exponential",
    "A1a",
    "A1b",
    "A2",
    "A3",
    "B1a",
    "B1b",
    "C2",
];

fn shift_run(name: &str) -> Result<(TrainConfig, TrainOutcome), Error> {
    let cfg = TrainConfig::shift_1d(name, 0)?;
    let outcome = train(&cfg)?;
    Ok((cfg, outcome))
}

fn shift_training(mse: &mut Option<TrainOutcome>) -> Verdict {
    let mut lines = Vec::new();
    let mut all = true;
    for name in SHIFT_LOSSES {
        let start = Instant::now();
        match shift_run(name) {
            Ok((cfg, o)) => {
                let (mean, std) = column_moments(o.final_samples().unwrap())[0];
                let lr = final_window_lr(&o.metrics, cfg.total_generator_iters).unwrap_or(f64::NAN);
                let ok = (3.5..=4.5).contains(&mean)
                    && (0.7..=1.3).contains(&std)
                    && (0.7..=1.3).contains(&lr);
                all &= ok;
                lines.push(format!(
                    "{name}: mean {mean:.3} std {std:.3} lr {lr:.3} {} ({:.0?})",
                    if ok { "ok" } else { "out of range" },
                    start.elapsed()
                ));
                if name == "MSE" {
                    *mse = Some(o);
                }
            }
            Err(e) => {
                all = false;
                lines.push(format!("{name}: {e}"));
            }
        }
    }
    Verdict::new(all, lines.join("; "))
}

/// Samples per side for the ring distances. The 2-Wasserstein estimate
/// between two 2048-point draws of the ring itself is about 0.23, above the
/// bound being tested; at this size the floor is about 0.08.
const RING_EVAL: usize = 65_536;

fn ring_training() -> Verdict {
    let target = DensitySpec::ring(8, 2.0, 0.02);
    let centres: Vec<Vec<f64>> = target.ring_centres().iter().map(|c| c.to_vec()).collect();
    let mut lines = Vec::new();
    let mut all = true;
    for name in ["MSE", "A1a", "CrossEntropy"] {
        let cfg = TrainConfig::ring_2d(name, 0).unwrap();
        match train(&cfg) {
            Ok(o) => {
                let z = sample(&cfg.origin, RING_EVAL, 7000).unwrap();
                let fake = o.generator.net.predict(&z).unwrap();
                let real = sample(&target, RING_EVAL, 7001).unwrap();
                let origin = sample(&cfg.origin, RING_EVAL, 7002).unwrap();
                let swd = sliced_wasserstein(&fake, &real, 256, 7003).unwrap();
                let base = sliced_wasserstein(&origin, &real, 256, 7003).unwrap();
                let cover = mode_coverage(&fake, &centres).unwrap();
                let covered = cover.iter().filter(|&&c| c >= 0.02).count();
                let ok = swd <= 0.3 * base && covered >= 7;
                all &= ok;
                lines.push(format!(
                    "{name}: swd {swd:.3} vs origin {base:.3}, {covered}/8 modes {}",
                    if ok { "ok" } else { "out of range" }
                ));
            }
            Err(e) => {
                all = false;
                lines.push(format!("{name}: {e}"));
            }
        }
    }
    Verdict::new(all, lines.join("; "))
}

fn non_invertible() -> Verdict {
    let mut lines = Vec::new();
    let mut all = true;
    for name in ["Hinge", "Wasserstein"] {
        let l = loss(name);
        let refused = matches!(
            ratio_from_discriminator(&l, 0.3),
            Err(Error::RatioNotRecoverable(_))
        );
        match shift_run(name) {
            Ok((_, o)) => {
                let no_ratio = !o.metrics.is_empty()
                    && o.metrics
                        .iter()
                        .all(|m| m.lr.is_none() && m.lr_train.is_none());
                all &= refused && no_ratio;
                lines.push(format!(
                    "{name}: {} records without ratio {no_ratio}, inversion refused {refused}",
                    o.metrics.len()
                ));
            }
            Err(e) => {
                all = false;
                lines.push(format!("{name}: {e}"));
            }
        }
    }
    Verdict::new(all, lines.join("; "))
}

fn determinism(first: Option<TrainOutcome>) -> Verdict {
    let first = match first {
        Some(o) => o,
        None => match shift_run("MSE") {
            Ok((_, o)) => o,
            Err(e) => return Verdict::new(false, e.to_string()),
        },
    };
    let second = match shift_run("MSE") {
        Ok((_, o)) => o,
        Err(e) => return Verdict::new(false, e.to_string()),
    };
    let metrics = format_metrics(&first.metrics) == format_metrics(&second.metrics);
    let generator = first.generator.to_json().unwrap() == second.generator.to_json().unwrap();
    let discriminator =
        first.discriminator.to_json().unwrap() == second.discriminator.to_json().unwrap();
    Verdict::new(
        metrics && generator && discriminator,
        format!("metrics identical {metrics}, generator checkpoint identical {generator}, discriminator checkpoint identical {discriminator}"),
    )
}

/// Criteria to run: numbers given on the command line, else all of them.
fn selected() -> Vec<usize> {
    let picked: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    if picked.is_empty() {
        (1..=10).collect()
    } else {
        picked
    }
}

fn main() {
    let mut mse = None;
    let mut failed = 0;
    let picked = selected();
    for n in picked.iter().copied() {
        let (name, v) = match n {
            1 => (
                "recipe consistency",
                timed(Some(Duration::from_secs(1)), recipe_consistency),
            ),
            2 => (
                "inner maximizer",
                timed(Some(Duration::from_secs(5)), inner_maximizer),
            ),
            3 => ("outer minimizer", timed(None, outer_minimizer_check)),
            4 => ("min-max value", timed(None, minmax_value_check)),
            5 => (
                "ideal grid solver",
                timed(Some(Duration::from_secs(30)), ideal_solver),
            ),
            6 => ("gradient exactness", timed(None, gradient_exactness)),
            7 => (
                "1D shift training",
                timed(None, || shift_training(&mut mse)),
            ),
            8 => ("2D ring training", timed(None, ring_training)),
            9 => ("non-invertible losses", timed(None, non_invertible)),
            10 => ("determinism", timed(None, || determinism(mse.take()))),
            _ => continue,
        };
        println!(
            "criterion {n:>2} {name}: {} {}",
            if v.passed { "PASS" } else { "FAIL" },
            v.detail
        );
        failed += usize::from(!v.passed);
    }
    println!("acceptance: {} run, {failed} failed", picked.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
