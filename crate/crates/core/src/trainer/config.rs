use std::path::PathBuf;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::loss_family::{catalogue_lookup, output_squashing_for, LossPair, Squashing};
use crate::nn::{Activation, NetSpec, PenaltyMode, PenaltyVariant};
use crate::synth::{load_samples, sample_from, DensitySpec, SampleStream};

/// Where real samples come from.
#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Density(DensitySpec),
    /// Fixed sample set; batches are drawn from its rows with replacement.
    Samples {
        path: PathBuf,
        data: Array2<f64>,
    },
}

impl DataSource {
    pub fn from_file(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let data = load_samples(&path)?;
        Ok(DataSource::Samples { path, data })
    }

    pub fn dim(&self) -> usize {
        match self {
            DataSource::Density(d) => d.dim(),
            DataSource::Samples { data, .. } => data.ncols(),
        }
    }

    pub fn draw(&self, n: usize, stream: &mut SampleStream) -> Result<Array2<f64>> {
        match self {
            DataSource::Density(d) => sample_from(d, n, stream),
            DataSource::Samples { data, .. } => {
                if data.nrows() == 0 {
                    return Err(Error::EmptyDataset);
                }
                let rows: Vec<usize> = (0..n).map(|_| stream.below(data.nrows())).collect();
                Ok(data.select(ndarray::Axis(0), &rows))
            }
        }
    }

    pub fn density(&self) -> Option<&DensitySpec> {
        match self {
            DataSource::Density(d) => Some(d),
            DataSource::Samples { .. } => None,
        }
    }
}

/// Everything that determines a training run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub loss: String,
    pub lambda: f64,
    pub penalty: PenaltyVariant,
    pub penalty_mode: PenaltyMode,
    pub critic_iters: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub total_generator_iters: usize,
    pub eval_every: usize,
    pub eval_batch: usize,
    /// Rows of each evaluation batch used for the MMD estimate.
    pub mmd_samples: usize,
    pub swd_projections: usize,
    /// Samples and checkpoints are kept at evaluation iterations divisible by
    /// this; 0 keeps only the final ones.
    pub snapshot_every: usize,
    pub generator: NetSpec,
    pub discriminator: NetSpec,
    pub target: DataSource,
    pub origin: DensitySpec,
    pub seed: u64,
}

pub const DEFAULT_HIDDEN: [usize; 2] = [64, 64];

impl TrainConfig {
    /// Defaults around a target and origin: widths `[d, 64, 64, ·]`, tanh
    /// generator with identity output, smooth-leaky discriminator squashed
    /// into the loss range.
    pub fn new(loss: &str, target: DataSource, origin: DensitySpec, seed: u64) -> Result<Self> {
        let entry = catalogue_lookup(loss)?;
        let (dx, dz) = (target.dim(), origin.dim());
        let squash = output_squashing_for(entry.loss.range())?;
        let widths = |a: usize, b: usize| {
            let mut w = vec![a];
            w.extend(DEFAULT_HIDDEN);
            w.push(b);
            w
        };
        Ok(Self {
            loss: entry.loss.name().to_string(),
            lambda: 10.0,
            penalty: PenaltyVariant::Max,
            penalty_mode: PenaltyMode::Exact,
            critic_iters: 5,
            batch_size: 64,
            learning_rate: 1e-4,
            beta1: 0.5,
            beta2: 0.9,
            adam_eps: 1e-8,
            total_generator_iters: 20_000,
            eval_every: 100,
            eval_batch: 2048,
            mmd_samples: 512,
            swd_projections: 64,
            snapshot_every: 0,
            generator: NetSpec::new(
                widths(dz, dx),
                Activation::Tanh,
                Squashing::Identity,
                seed.wrapping_add(1),
            ),
            discriminator: NetSpec::new(
                widths(dx, 1),
                Activation::default(),
                squash,
                seed.wrapping_add(2),
            ),
            target,
            origin,
            seed,
        })
    }

    /// `f = N(4, 1)`, `h = N(0, 1)`.
    pub fn shift_1d(loss: &str, seed: u64) -> Result<Self> {
        Self::new(
            loss,
            DataSource::Density(DensitySpec::gaussian_1d(4.0, 1.0)),
            DensitySpec::gaussian_1d(0.0, 1.0),
            seed,
        )
    }

    /// `f = ring(8, 2, 0.02)`, `h = N(0, I₂)`.
    pub fn ring_2d(loss: &str, seed: u64) -> Result<Self> {
        Self::new(
            loss,
            DataSource::Density(DensitySpec::ring(8, 2.0, 0.02)),
            DensitySpec::standard_normal(2),
            seed,
        )
    }

    pub fn loss_pair(&self) -> Result<LossPair> {
        Ok(catalogue_lookup(&self.loss)?.loss)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.critic_iters < 1 {
            return bad("critic_iters must be >= 1");
        }
        if self.batch_size < 2 {
            return bad("batch_size must be >= 2");
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return bad("lambda must be a finite value >= 0");
        }
        if self.total_generator_iters < 1 {
            return bad("total_generator_iters must be >= 1");
        }
        if self.eval_every < 1 {
            return bad("eval_every must be >= 1");
        }
        if self.eval_batch < 2 || self.mmd_samples < 2 {
            return bad("eval_batch and mmd_samples must be >= 2");
        }
        if self.swd_projections < 1 {
            return bad("swd_projections must be >= 1");
        }
        if !(self.learning_rate > 0.0)
            || !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
        {
            return bad("need learning_rate > 0 and betas in [0, 1)");
        }
        self.generator.validate()?;
        self.discriminator.validate()?;
        if self.generator.input_dim() != self.origin.dim() {
            return bad("generator input width differs from the origin dimension");
        }
        if self.generator.output_dim() != self.target.dim() {
            return bad("generator output width differs from the target dimension");
        }
        if self.discriminator.input_dim() != self.target.dim()
            || self.discriminator.output_dim() != 1
        {
            return bad("discriminator must map the target dimension to one output");
        }
        self.origin.validate()?;
        if let DataSource::Density(d) = &self.target {
            d.validate()?;
        }
        if self.lambda > 0.0
            && self.penalty_mode == PenaltyMode::Exact
            && !self.discriminator.hidden.is_smooth()
        {
            return Err(Error::RectifierInExactMode);
        }
        Ok(())
    }

    /// Validation that also requires the discriminator squashing to match the loss range.
    pub fn validate_for(&self, loss: &LossPair) -> Result<()> {
        self.validate()?;
        let want = output_squashing_for(loss.range())?;
        if self.discriminator.output != want {
            return Err(Error::Config(format!(
                "loss `{}` needs discriminator output `{}`, config has `{}`",
                loss.name(),
                want.name(),
                self.discriminator.output.name()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        for name in ["MSE", "CrossEntropy", "Hinge", "Wasserstein", "A2"] {
            let c = TrainConfig::shift_1d(name, 0).unwrap();
            c.validate_for(&c.loss_pair().unwrap()).unwrap();
            let r = TrainConfig::ring_2d(name, 0).unwrap();
            r.validate().unwrap();
        }
        assert_eq!(
            TrainConfig::shift_1d("crossentropy", 0)
                .unwrap()
                .discriminator
                .output,
            Squashing::Logistic
        );
    }

    #[test]
    fn invariants_enforced() {
        let mut c = TrainConfig::shift_1d("MSE", 0).unwrap();
        c.critic_iters = 0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::shift_1d("MSE", 0).unwrap();
        c.batch_size = 1;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::shift_1d("MSE", 0).unwrap();
        c.lambda = -1.0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::shift_1d("MSE", 0).unwrap();
        c.discriminator.hidden = Activation::Rectifier { slope: 0.2 };
        assert!(matches!(c.validate(), Err(Error::RectifierInExactMode)));
        c.lambda = 0.0;
        assert!(c.validate().is_ok());
        assert!(TrainConfig::shift_1d("nope", 0).is_err());
    }
}
