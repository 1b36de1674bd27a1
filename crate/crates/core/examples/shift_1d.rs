//! Trains a generator onto N(4, 1) from N(0, 1) and follows the likelihood
//! ratio read off the discriminator.
//!
//! Usage: `cargo run --release --example shift_1d [LOSS] [ITERATIONS]`

use lrgan::trainer::{column_moments, final_window_lr, train_with, TrainConfig};

fn main() -> lrgan::Result<()> {
    let mut args = std::env::args().skip(1);
    let loss = args.next().unwrap_or_else(|| "MSE".into());
    let mut cfg = TrainConfig::shift_1d(&loss, 0)?;
    if let Some(n) = args.next() {
        cfg.total_generator_iters = n
            .parse()
            .map_err(|_| lrgan::Error::Config(format!("bad iteration count `{n}`")))?;
    }
    let every = (cfg.total_generator_iters / 10).max(cfg.eval_every);
    let outcome = train_with(&cfg, &cfg.loss_pair()?, None, &mut |m| {
        if m.iteration % every == 0 {
            let lr = m.lr.map_or("-".into(), |s| {
                format!("{:.3} ± {:.3}", s.real_mean, s.real_std)
            });
            println!(
                "iter {:>6}  ratio on real data {lr:<16}  SWD {:.3}",
                m.iteration, m.swd
            );
        }
    })?;
    let (mean, std) = column_moments(outcome.final_samples().expect("final snapshot"))[0];
    println!("{loss}: generated mean {mean:.3}, std {std:.3}");
    if let Some(lr) = final_window_lr(&outcome.metrics, cfg.total_generator_iters) {
        println!("mean ratio over the last tenth: {lr:.4}");
    }
    Ok(())
}
