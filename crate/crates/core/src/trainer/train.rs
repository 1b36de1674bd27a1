use ndarray::{s, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::metrics::{
    mmd_rbf, ratio_stats_from_outputs, sliced_wasserstein, Bandwidth, MetricRecord,
};
use crate::error::{Error, Result};
use crate::loss_family::LossPair;
use crate::nn::{
    add_scaled, backward, forward, init_net, input_grad_norm_and_hvp, AdamState, Dense, DenseNet,
    ParamGrads, PenaltyMode, PenaltyVariant,
};
use crate::synth::SampleStream;

// Labels of the independent random streams of a run.
const DATA_STREAM: u64 = 1;
const INTERPOLATION_STREAM: u64 = 2;
const EVAL_STREAM: u64 = 3;
const PROJECTION_STREAM: u64 = 4;

/// Parameters and optimizer state of one net at a generator iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub iteration: usize,
    pub net: DenseNet,
    pub optimizer: AdamState,
}

impl Checkpoint {
    /// Pretty JSON; identical state gives identical bytes.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(text)?;
        c.net.validate()?;
        Ok(c)
    }
}

/// Generated evaluation samples and both checkpoints at one generator iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub iteration: usize,
    pub samples: Array2<f64>,
    pub generator: Checkpoint,
    pub discriminator: Checkpoint,
}

/// Final (or last good) state of a training run.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub generator: Checkpoint,
    pub discriminator: Checkpoint,
    pub metrics: Vec<MetricRecord>,
    pub snapshots: Vec<Snapshot>,
    pub disc_steps: usize,
    pub gen_steps: usize,
}

impl TrainOutcome {
    pub fn final_samples(&self) -> Option<&Array2<f64>> {
        self.snapshots.last().map(|s| &s.samples)
    }
}

/// Penalty value and parameter gradient at uniform interpolates of the
/// paired rows of `real` and `fake`.
pub fn gradient_penalty(
    disc: &DenseNet,
    real: &Array2<f64>,
    fake: &Array2<f64>,
    variant: PenaltyVariant,
    lambda: f64,
    mode: PenaltyMode,
    stream: &mut SampleStream,
) -> Result<(f64, ParamGrads)> {
    if real.dim() != fake.dim() {
        return Err(Error::Shape(
            "real and generated batches differ in shape".into(),
        ));
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument("lambda must be >= 0".into()));
    }
    if lambda == 0.0 {
        return Ok((0.0, disc.layers.iter().map(Dense::zeros_like).collect()));
    }
    let mut mixed = real.clone();
    for (mut row, fake_row) in mixed.rows_mut().into_iter().zip(fake.rows()) {
        let u = stream.uniform();
        row.zip_mut_with(&fake_row, |x, y| *x = u * *x + (1.0 - u) * y);
    }
    let out = input_grad_norm_and_hvp(disc, &mixed, variant, lambda, mode)?;
    Ok((out.value, out.grads))
}

/// Discriminator outputs clamped into the interior of the loss range.
fn clamped(loss: &LossPair, out: &Array2<f64>) -> Array2<f64> {
    out.mapv(|d| loss.range().clamp_interior(d))
}

fn mean_of(v: &Array2<f64>, f: impl Fn(f64) -> f64) -> f64 {
    v.iter().map(|x| f(*x)).sum::<f64>() / v.len() as f64
}

struct RunState {
    gen: DenseNet,
    disc: DenseNet,
    gen_opt: AdamState,
    disc_opt: AdamState,
}

impl RunState {
    fn checkpoints(&self, iteration: usize) -> (Checkpoint, Checkpoint) {
        (
            Checkpoint {
                iteration,
                net: self.gen.clone(),
                optimizer: self.gen_opt.clone(),
            },
            Checkpoint {
                iteration,
                net: self.disc.clone(),
                optimizer: self.disc_opt.clone(),
            },
        )
    }
}

/// Trains with the catalogue loss named in the config.
pub fn train(config: &TrainConfig) -> Result<TrainOutcome> {
    let loss = config.loss_pair()?;
    train_with(config, &loss, None, &mut |_| {})
}

/// Trains with an explicit loss pair, an optional starting generator, and a
/// callback receiving every metric record as it is produced.
pub fn train_with(
    config: &TrainConfig,
    loss: &LossPair,
    initial_generator: Option<DenseNet>,
    on_record: &mut dyn FnMut(&MetricRecord),
) -> Result<TrainOutcome> {
    config.validate_for(loss)?;
    let gen = match initial_generator {
        Some(g) => {
            if g.spec.widths != config.generator.widths {
                return Err(Error::Shape(
                    "initial generator does not match the generator spec".into(),
                ));
            }
            g.validate()?;
            g
        }
        None => init_net(&config.generator)?,
    };
    let disc = init_net(&config.discriminator)?;
    let adam = |net: &DenseNet| {
        AdamState::new(
            net,
            config.learning_rate,
            config.beta1,
            config.beta2,
            config.adam_eps,
        )
    };
    let mut st = RunState {
        gen_opt: adam(&gen),
        disc_opt: adam(&disc),
        gen,
        disc,
    };
    let mut data = SampleStream::derived(config.seed, DATA_STREAM);
    let mut interp = SampleStream::derived(config.seed, INTERPOLATION_STREAM);
    let mut eval = SampleStream::derived(config.seed, EVAL_STREAM);
    let projection_seed = SampleStream::derived(config.seed, PROJECTION_STREAM)
        .uniform()
        .to_bits();

    let n = config.batch_size;
    let inv_n = 1.0 / n as f64;
    let mut metrics = Vec::new();
    let mut snapshots = Vec::new();
    let (mut disc_steps, mut gen_steps) = (0, 0);
    let mut last_good = {
        let (g, d) = st.checkpoints(0);
        (g, d, 0usize)
    };

    let abort = |iteration: usize,
                 reason: String,
                 last_good: &(Checkpoint, Checkpoint, usize),
                 metrics: &[MetricRecord],
                 snapshots: &[Snapshot],
                 disc_steps: usize,
                 gen_steps: usize| {
        let kept = last_good.2;
        Error::TrainingAborted {
            iteration,
            reason,
            last_good: Box::new(TrainOutcome {
                generator: last_good.0.clone(),
                discriminator: last_good.1.clone(),
                metrics: metrics
                    .iter()
                    .filter(|m| m.iteration <= kept)
                    .cloned()
                    .collect(),
                snapshots: snapshots
                    .iter()
                    .filter(|s| s.iteration <= kept)
                    .cloned()
                    .collect(),
                disc_steps,
                gen_steps,
            }),
        }
    };

    for it in 1..=config.total_generator_iters {
        let mut disc_objective = 0.0;
        let mut penalty = 0.0;
        let mut train_outputs = None;
        for _ in 0..config.critic_iters {
            let real = config.target.draw(n, &mut data)?;
            let z = crate::synth::sample_from(&config.origin, n, &mut data)?;
            let fake = st.gen.predict(&z)?;
            let (real_out, real_cache) = forward(&st.disc, &real)?;
            let (fake_out, fake_cache) = forward(&st.disc, &fake)?;
            let real_c = clamped(loss, &real_out);
            let fake_c = clamped(loss, &fake_out);
            disc_objective = mean_of(&real_c, |d| loss.phi(d)) + mean_of(&fake_c, |d| loss.psi(d));
            // descent direction on the negated objective
            let g_real = real_c.mapv(|d| -inv_n * loss.phi_prime(d));
            let g_fake = fake_c.mapv(|d| -inv_n * loss.psi_prime(d));
            let (mut grads, _) = backward(&st.disc, &real_cache, &g_real)?;
            let (grads_fake, _) = backward(&st.disc, &fake_cache, &g_fake)?;
            add_scaled(&mut grads, &grads_fake, 1.0);
            if config.lambda > 0.0 {
                let (p, pg) = gradient_penalty(
                    &st.disc,
                    &real,
                    &fake,
                    config.penalty,
                    config.lambda,
                    config.penalty_mode,
                    &mut interp,
                )?;
                penalty = p;
                add_scaled(&mut grads, &pg, 1.0);
            }
            if !disc_objective.is_finite() || !penalty.is_finite() {
                return Err(abort(
                    it,
                    format!(
                        "non-finite discriminator objective {disc_objective} (penalty {penalty})"
                    ),
                    &last_good,
                    &metrics,
                    &snapshots,
                    disc_steps,
                    gen_steps,
                ));
            }
            if let Err(e) = st.disc_opt.step(&mut st.disc, &grads) {
                return Err(abort(
                    it,
                    format!("discriminator update: {e}"),
                    &last_good,
                    &metrics,
                    &snapshots,
                    disc_steps,
                    gen_steps,
                ));
            }
            disc_steps += 1;
            train_outputs = Some((real_out, fake_out));
        }

        let z = crate::synth::sample_from(&config.origin, n, &mut data)?;
        let (fake, gen_cache) = forward(&st.gen, &z)?;
        let (fake_out, disc_cache) = forward(&st.disc, &fake)?;
        let fake_c = clamped(loss, &fake_out);
        let gen_objective = mean_of(&fake_c, |d| loss.psi(d));
        let g_out = fake_c.mapv(|d| inv_n * loss.psi_prime(d));
        let (_, g_fake) = backward(&st.disc, &disc_cache, &g_out)?;
        let (gen_grads, _) = backward(&st.gen, &gen_cache, &g_fake)?;
        if !gen_objective.is_finite() {
            return Err(abort(
                it,
                format!("non-finite generator objective {gen_objective}"),
                &last_good,
                &metrics,
                &snapshots,
                disc_steps,
                gen_steps,
            ));
        }
        if let Err(e) = st.gen_opt.step(&mut st.gen, &gen_grads) {
            return Err(abort(
                it,
                format!("generator update: {e}"),
                &last_good,
                &metrics,
                &snapshots,
                disc_steps,
                gen_steps,
            ));
        }
        gen_steps += 1;

        let last = it == config.total_generator_iters;
        if it % config.eval_every == 0 || last {
            let real = config.target.draw(config.eval_batch, &mut eval)?;
            let z = crate::synth::sample_from(&config.origin, config.eval_batch, &mut eval)?;
            let fake = st.gen.predict(&z)?;
            let (lr, lr_train) = if loss.ratio_invertible() {
                let (tr, tf) = train_outputs.as_ref().expect("critic ran");
                (
                    Some(ratio_stats_from_outputs(
                        loss,
                        &st.disc.predict(&real)?,
                        &st.disc.predict(&fake)?,
                    )?),
                    Some(ratio_stats_from_outputs(loss, tr, tf)?),
                )
            } else {
                (None, None)
            };
            let m = config.mmd_samples.min(config.eval_batch);
            let mmd = mmd_rbf(
                &real.slice(s![..m, ..]).to_owned(),
                &fake.slice(s![..m, ..]).to_owned(),
                Bandwidth::Median,
            )
            .unwrap_or(f64::NAN);
            let swd = sliced_wasserstein(&real, &fake, config.swd_projections, projection_seed)?;
            let record = MetricRecord {
                iteration: it,
                disc_objective,
                gen_objective,
                penalty,
                lr,
                lr_train,
                mmd,
                swd,
            };
            on_record(&record);
            metrics.push(record);
            let (g, d) = st.checkpoints(it);
            if last || (config.snapshot_every > 0 && it % config.snapshot_every == 0) {
                snapshots.push(Snapshot {
                    iteration: it,
                    samples: fake,
                    generator: g.clone(),
                    discriminator: d.clone(),
                });
            }
            last_good = (g, d, it);
        }
    }
    let (generator, discriminator) = st.checkpoints(config.total_generator_iters);
    Ok(TrainOutcome {
        generator,
        discriminator,
        metrics,
        snapshots,
        disc_steps,
        gen_steps,
    })
}

/// Fits a generator to the identity map on origin samples by least squares,
/// giving a starting point with `G(z) ≈ z`.
pub fn fit_identity(
    spec: &crate::nn::NetSpec,
    origin: &crate::synth::DensitySpec,
    steps: usize,
    seed: u64,
) -> Result<DenseNet> {
    if spec.input_dim() != spec.output_dim() {
        return Err(Error::Shape(
            "identity fit needs equal input and output widths".into(),
        ));
    }
    let mut net = init_net(spec)?;
    let mut opt = AdamState::new(&net, 1e-2, 0.9, 0.999, 1e-8);
    let mut stream = SampleStream::derived(seed, DATA_STREAM);
    let n = 256;
    for _ in 0..steps {
        let z = crate::synth::sample_from(origin, n, &mut stream)?;
        let (out, cache) = forward(&net, &z)?;
        let g = (&out - &z) * (2.0 / n as f64);
        let (grads, _) = backward(&net, &cache, &g)?;
        opt.step(&mut net, &grads)?;
    }
    Ok(net)
}

/// Mean and population standard deviation of each column.
pub fn column_moments(x: &Array2<f64>) -> Vec<(f64, f64)> {
    x.axis_iter(Axis(1))
        .map(|c| {
            let m = c.mean().unwrap_or(f64::NAN);
            let v = c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / c.len() as f64;
            (m, v.sqrt())
        })
        .collect()
}
