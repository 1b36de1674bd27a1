use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::activation::{Activation, Nonlinearity};
use crate::error::{Error, Result};
use crate::loss_family::Squashing;
use crate::synth::SampleStream;

/// Architecture of a dense feed-forward net.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetSpec {
    /// Input width, hidden widths, output width.
    pub widths: Vec<usize>,
    pub hidden: Activation,
    pub output: Squashing,
    pub seed: u64,
}

impl NetSpec {
    pub fn new(widths: Vec<usize>, hidden: Activation, output: Squashing, seed: u64) -> Self {
        Self {
            widths,
            hidden,
            output,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 3 {
            return Err(Error::InvalidArgument(
                "a net needs input, at least one hidden and an output width".into(),
            ));
        }
        if self.widths.contains(&0) {
            return Err(Error::InvalidArgument("layer widths must be >= 1".into()));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.widths.len() - 1
    }
}

/// Weight (`out × in`) and bias of one affine layer. Also used for gradients
/// and optimizer moments, which share the parameter shapes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(out: usize, inp: usize) -> Self {
        Self {
            weight: Array2::zeros((out, inp)),
            bias: Array1::zeros(out),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.weight.nrows(), self.weight.ncols())
    }

    pub fn is_finite(&self) -> bool {
        self.weight
            .iter()
            .chain(self.bias.iter())
            .all(|v| v.is_finite())
    }

    pub fn len(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Gradients of a scalar with respect to every layer's parameters.
pub type ParamGrads = Vec<Dense>;

/// `a += scale·b`, layer by layer.
pub fn add_scaled(a: &mut [Dense], b: &[Dense], scale: f64) {
    for (x, y) in a.iter_mut().zip(b) {
        x.weight.scaled_add(scale, &y.weight);
        x.bias.scaled_add(scale, &y.bias);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseNet {
    pub spec: NetSpec,
    pub layers: Vec<Dense>,
}

/// Weights `N(0, 1/fan_in)`, biases zero, drawn layer by layer in row-major
/// order from a stream seeded by `spec.seed`.
pub fn init_net(spec: &NetSpec) -> Result<DenseNet> {
    spec.validate()?;
    let mut rng = SampleStream::new(spec.seed);
    let layers = spec
        .widths
        .windows(2)
        .map(|w| {
            let (inp, out) = (w[0], w[1]);
            let scale = (1.0 / inp as f64).sqrt();
            let mut layer = Dense::zeros(out, inp);
            layer
                .weight
                .iter_mut()
                .for_each(|v| *v = scale * rng.normal());
            layer
        })
        .collect();
    Ok(DenseNet {
        spec: spec.clone(),
        layers,
    })
}

/// Activations kept by [`forward`] for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// Input to each layer; `inputs[0]` is the batch.
    pub inputs: Vec<Array2<f64>>,
    /// Pre-activation of each layer.
    pub pre: Vec<Array2<f64>>,
    /// Nonlinearity derivative at each pre-activation.
    pub slopes: Vec<Array2<f64>>,
}

impl DenseNet {
    pub fn from_layers(spec: NetSpec, layers: Vec<Dense>) -> Result<Self> {
        let net = Self { spec, layers };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.layers.len() != self.spec.n_layers() {
            return Err(Error::Shape(format!(
                "{} layers for {} widths",
                self.layers.len(),
                self.spec.widths.len()
            )));
        }
        for (l, (layer, w)) in self
            .layers
            .iter()
            .zip(self.spec.widths.windows(2))
            .enumerate()
        {
            if layer.weight.dim() != (w[1], w[0]) || layer.bias.len() != w[1] {
                return Err(Error::Shape(format!(
                    "layer {l}: weight {:?}, bias {}, expected {}x{}",
                    layer.weight.dim(),
                    layer.bias.len(),
                    w[1],
                    w[0]
                )));
            }
            if !layer.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "layer {l} has non-finite parameters"
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn nonlinearity(&self, layer: usize) -> Nonlinearity {
        if layer + 1 == self.layers.len() {
            Nonlinearity::Output(self.spec.output)
        } else {
            Nonlinearity::Hidden(self.spec.hidden)
        }
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Dense::len).sum()
    }

    /// Parameters flattened layer by layer, weight (row-major) then bias.
    pub fn params_flat(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::Shape(format!(
                "{} values for {} parameters",
                flat.len(),
                self.n_params()
            )));
        }
        let mut it = flat.iter();
        for layer in &mut self.layers {
            for v in layer.weight.iter_mut().chain(layer.bias.iter_mut()) {
                *v = *it.next().unwrap();
            }
        }
        Ok(())
    }

    /// Forward pass without a cache.
    pub fn predict(&self, batch: &Array2<f64>) -> Result<Array2<f64>> {
        check_input(self, batch)?;
        let mut h = batch.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let act = self.nonlinearity(l);
            h = h.dot(&layer.weight.t()) + &layer.bias;
            h.mapv_inplace(|v| act.apply(v));
        }
        Ok(h)
    }
}

/// Flattens gradients in the order of [`DenseNet::params_flat`].
pub fn flatten(layers: &[Dense]) -> Vec<f64> {
    layers
        .iter()
        .flat_map(|l| l.weight.iter().chain(l.bias.iter()).copied())
        .collect()
}

fn check_input(net: &DenseNet, batch: &Array2<f64>) -> Result<()> {
    if batch.ncols() != net.spec.input_dim() {
        return Err(Error::Shape(format!(
            "batch has {} columns, net expects {}",
            batch.ncols(),
            net.spec.input_dim()
        )));
    }
    Ok(())
}

/// Runs the batch (`n × d_in`, one sample per row) through the net.
pub fn forward(net: &DenseNet, batch: &Array2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
    check_input(net, batch)?;
    let mut inputs = Vec::with_capacity(net.layers.len());
    let mut pre = Vec::with_capacity(net.layers.len());
    let mut slopes = Vec::with_capacity(net.layers.len());
    let mut h = batch.clone();
    for (l, layer) in net.layers.iter().enumerate() {
        let a = h.dot(&layer.weight.t()) + &layer.bias;
        let act = net.nonlinearity(l);
        let mut next = Array2::zeros(a.raw_dim());
        let mut slope = Array2::zeros(a.raw_dim());
        ndarray::Zip::from(&mut next)
            .and(&mut slope)
            .and(&a)
            .for_each(|y, dy, &x| (*y, *dy) = act.apply_with_derivative(x));
        inputs.push(h);
        pre.push(a);
        slopes.push(slope);
        h = next;
    }
    Ok((
        h,
        ForwardCache {
            inputs,
            pre,
            slopes,
        },
    ))
}

/// Reverse-mode pass for a scalar whose gradient with respect to the outputs
/// is `output_grads`. Returns parameter gradients and `∂/∂batch`.
pub fn backward(
    net: &DenseNet,
    cache: &ForwardCache,
    output_grads: &Array2<f64>,
) -> Result<(ParamGrads, Array2<f64>)> {
    let n = cache.inputs.first().map_or(0, |x| x.nrows());
    if cache.pre.len() != net.layers.len()
        || cache.slopes.len() != net.layers.len()
        || output_grads.dim() != (n, net.spec.output_dim())
        || cache
            .pre
            .iter()
            .zip(&net.layers)
            .any(|(a, layer)| a.ncols() != layer.weight.nrows())
    {
        return Err(Error::Shape("stale cache or output gradient shape".into()));
    }
    let mut grads: ParamGrads = net.layers.iter().map(Dense::zeros_like).collect();
    let mut g = output_grads.clone();
    for l in (0..net.layers.len()).rev() {
        let delta = &cache.slopes[l] * &g;
        grads[l].weight = delta.t().dot(&cache.inputs[l]);
        grads[l].bias = delta.sum_axis(Axis(0));
        g = delta.dot(&net.layers[l].weight);
    }
    Ok((grads, g))
}
