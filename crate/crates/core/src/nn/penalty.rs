//! Gradient penalty on the discriminator's input gradient.
//!
//! The exact parameter gradient is obtained by pushing the tangent
//! `u = ∂P/∂(∇ₓD)` forward through the net alongside the activations and then
//! running reverse mode over both chains.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::net::{add_scaled, backward, forward, Dense, DenseNet, ParamGrads};
use crate::error::{Error, Result};

/// How per-sample input-gradient norms are combined.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyVariant {
    /// `λ·(maxᵢ (‖vᵢ‖ - 1)₊)²`
    Max,
    /// `λ·meanᵢ (‖vᵢ‖ - 1)₊²`
    Mean,
    /// `λ·meanᵢ (‖vᵢ‖ - 1)²`
    MeanTwoSided,
}

impl fmt::Display for PenaltyVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PenaltyVariant::Max => "max",
            PenaltyVariant::Mean => "mean",
            PenaltyVariant::MeanTwoSided => "mean-two-sided",
        })
    }
}

impl FromStr for PenaltyVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "max" => Ok(PenaltyVariant::Max),
            "mean" => Ok(PenaltyVariant::Mean),
            "mean-two-sided" => Ok(PenaltyVariant::MeanTwoSided),
            other => Err(Error::Config(format!(
                "unknown penalty `{other}` (expected max, mean, mean-two-sided or off)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PenaltyMode {
    /// Forward-over-reverse pass; needs twice-differentiable activations.
    Exact,
    /// Central differences of the penalty value over every parameter.
    FiniteDifference { step: f64 },
}

#[derive(Clone, Debug)]
pub struct PenaltyOutput {
    /// `‖∇ₓD(xᵢ)‖` per sample.
    pub norms: Vec<f64>,
    pub value: f64,
    pub grads: ParamGrads,
}

/// `∇ₓD` for every row of the batch.
pub fn input_gradients(net: &DenseNet, x: &Array2<f64>) -> Result<Array2<f64>> {
    if net.spec.output_dim() != 1 {
        return Err(Error::Shape("penalty needs a scalar-output net".into()));
    }
    let (_, cache) = forward(net, x)?;
    Ok(backward(net, &cache, &Array2::ones((x.nrows(), 1)))?.1)
}

fn norms_of(v: &Array2<f64>) -> Vec<f64> {
    v.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect()
}

/// Penalty value and `∂P/∂vᵢ` for every sample.
fn penalty_and_seed(
    v: &Array2<f64>,
    variant: PenaltyVariant,
    lambda: f64,
) -> (f64, Array2<f64>, Vec<f64>) {
    let norms = norms_of(v);
    let n = norms.len() as f64;
    let mut seed = Array2::zeros(v.raw_dim());
    let direction = |i: usize| -> Array1<f64> {
        if norms[i] > 0.0 {
            v.row(i).to_owned() / norms[i]
        } else {
            Array1::zeros(v.ncols())
        }
    };
    let value = match variant {
        PenaltyVariant::Max => {
            // first index attaining the maximum excess
            let mut best = (0usize, f64::NEG_INFINITY);
            for (i, nrm) in norms.iter().enumerate() {
                if nrm - 1.0 > best.1 {
                    best = (i, nrm - 1.0);
                }
            }
            let excess = best.1.max(0.0);
            if excess > 0.0 {
                seed.row_mut(best.0)
                    .assign(&(direction(best.0) * (2.0 * lambda * excess)));
            }
            lambda * excess * excess
        }
        PenaltyVariant::Mean | PenaltyVariant::MeanTwoSided => {
            let mut total = 0.0;
            for (i, nrm) in norms.iter().enumerate() {
                let e = match variant {
                    PenaltyVariant::Mean => (nrm - 1.0).max(0.0),
                    _ => nrm - 1.0,
                };
                total += e * e;
                if e != 0.0 {
                    seed.row_mut(i)
                        .assign(&(direction(i) * (2.0 * lambda * e / n)));
                }
            }
            lambda * total / n
        }
    };
    (value, seed, norms)
}

/// Value of the penalty alone.
pub fn penalty_value(
    net: &DenseNet,
    x: &Array2<f64>,
    variant: PenaltyVariant,
    lambda: f64,
) -> Result<f64> {
    Ok(penalty_and_seed(&input_gradients(net, x)?, variant, lambda).0)
}

/// Per-sample input-gradient norms and the parameter gradient of the penalty.
pub fn input_grad_norm_and_hvp(
    net: &DenseNet,
    x: &Array2<f64>,
    variant: PenaltyVariant,
    lambda: f64,
    mode: PenaltyMode,
) -> Result<PenaltyOutput> {
    match mode {
        PenaltyMode::Exact => exact(net, x, variant, lambda),
        PenaltyMode::FiniteDifference { step } => finite_difference(net, x, variant, lambda, step),
    }
}

fn exact(
    net: &DenseNet,
    x: &Array2<f64>,
    variant: PenaltyVariant,
    lambda: f64,
) -> Result<PenaltyOutput> {
    if !net.spec.hidden.is_smooth() {
        return Err(Error::RectifierInExactMode);
    }
    let v = input_gradients(net, x)?;
    let (value, seed, norms) = penalty_and_seed(&v, variant, lambda);
    let mut grads: ParamGrads = net.layers.iter().map(Dense::zeros_like).collect();
    if seed.iter().all(|s| *s == 0.0) {
        return Ok(PenaltyOutput {
            norms,
            value,
            grads,
        });
    }

    // Rows with a zero seed carry a zero tangent and contribute nothing, so
    // only the active rows go through the second-order pass.
    let active: Vec<usize> = (0..x.nrows())
        .filter(|&i| seed.row(i).iter().any(|s| *s != 0.0))
        .collect();

    // Forward: primal h and tangent ḣ along the seed directions.
    let layers = net.layers.len();
    let mut hs = Vec::with_capacity(layers + 1);
    let mut dots = Vec::with_capacity(layers + 1);
    let mut pres = Vec::with_capacity(layers);
    let mut pre_dots = Vec::with_capacity(layers);
    hs.push(x.select(Axis(0), &active));
    dots.push(seed.select(Axis(0), &active));
    for (l, layer) in net.layers.iter().enumerate() {
        let act = net.nonlinearity(l);
        let a = hs[l].dot(&layer.weight.t()) + &layer.bias;
        let a_dot = dots[l].dot(&layer.weight.t());
        let h = a.mapv(|t| act.apply(t));
        let h_dot = a.mapv(|t| act.derivative(t)) * &a_dot;
        pres.push(a);
        pre_dots.push(a_dot);
        hs.push(h);
        dots.push(h_dot);
    }

    // Reverse over both chains for the scalar Σᵢ ḣ_L[i].
    let n = active.len();
    let mut adj_dot = Array2::<f64>::ones((n, 1));
    let mut adj = Array2::<f64>::zeros((n, 1));
    for l in (0..layers).rev() {
        let act = net.nonlinearity(l);
        let d1 = pres[l].mapv(|t| act.derivative(t));
        let d2 = pres[l].mapv(|t| act.second_derivative(t));
        let adj_a_dot = &adj_dot * &d1;
        let adj_a = &adj_dot * &d2 * &pre_dots[l] + &adj * &d1;
        let w = &net.layers[l].weight;
        grads[l].weight = adj_a_dot.t().dot(&dots[l]) + adj_a.t().dot(&hs[l]);
        grads[l].bias = adj_a.sum_axis(Axis(0));
        adj_dot = adj_a_dot.dot(w);
        adj = adj_a.dot(w);
    }
    Ok(PenaltyOutput {
        norms,
        value,
        grads,
    })
}

fn finite_difference(
    net: &DenseNet,
    x: &Array2<f64>,
    variant: PenaltyVariant,
    lambda: f64,
    step: f64,
) -> Result<PenaltyOutput> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(
            "finite-difference step must be positive".into(),
        ));
    }
    let v = input_gradients(net, x)?;
    let (value, _, norms) = penalty_and_seed(&v, variant, lambda);
    let base = net.params_flat();
    let mut probe = net.clone();
    let mut flat = Vec::with_capacity(base.len());
    for k in 0..base.len() {
        let mut p = base.clone();
        p[k] = base[k] + step;
        probe.set_params_flat(&p)?;
        let up = penalty_value(&probe, x, variant, lambda)?;
        p[k] = base[k] - step;
        probe.set_params_flat(&p)?;
        let down = penalty_value(&probe, x, variant, lambda)?;
        flat.push((up - down) / (2.0 * step));
    }
    let mut shaped = net.clone();
    shaped.set_params_flat(&flat)?;
    let mut grads: ParamGrads = net.layers.iter().map(Dense::zeros_like).collect();
    add_scaled(&mut grads, &shaped.layers, 1.0);
    Ok(PenaltyOutput {
        norms,
        value,
        grads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss_family::Squashing;
    use crate::nn::{flatten, init_net, Activation, NetSpec};
    use ndarray::array;

    fn linear_net(w: [f64; 2], b: f64) -> DenseNet {
        // slope 1 makes the hidden unit linear
        let spec = NetSpec::new(
            vec![2, 1, 1],
            Activation::SmoothLeaky { slope: 1.0 },
            Squashing::Identity,
            0,
        );
        DenseNet::from_layers(
            spec,
            vec![
                Dense {
                    weight: array![[w[0], w[1]]],
                    bias: array![b],
                },
                Dense {
                    weight: array![[1.0]],
                    bias: array![0.0],
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn linear_net_norm_is_weight_norm() {
        let net = linear_net([3.0, 4.0], 0.5);
        let x = array![[0.1, 0.2], [-3.0, 7.0], [0.0, 0.0]];
        let out = input_grad_norm_and_hvp(&net, &x, PenaltyVariant::Max, 10.0, PenaltyMode::Exact)
            .unwrap();
        assert!(out.norms.iter().all(|n| (n - 5.0).abs() < 1e-14));
        assert!((out.value - 160.0).abs() < 1e-10);
    }

    #[test]
    fn zero_net_has_zero_penalty() {
        let mut net = linear_net([0.0, 0.0], 0.0);
        net.set_params_flat(&vec![0.0; net.n_params()]).unwrap();
        let x = array![[1.0, 2.0]];
        let out = input_grad_norm_and_hvp(&net, &x, PenaltyVariant::Max, 10.0, PenaltyMode::Exact)
            .unwrap();
        assert_eq!(out.norms, vec![0.0]);
        assert_eq!(out.value, 0.0);
        assert!(flatten(&out.grads).iter().all(|g| *g == 0.0));
    }

    #[test]
    fn rectifier_refused_in_exact_mode() {
        let spec = NetSpec::new(
            vec![2, 4, 1],
            Activation::Rectifier { slope: 0.2 },
            Squashing::Identity,
            1,
        );
        let net = init_net(&spec).unwrap();
        let err = input_grad_norm_and_hvp(
            &net,
            &array![[0.0, 1.0]],
            PenaltyVariant::Max,
            1.0,
            PenaltyMode::Exact,
        )
        .unwrap_err();
        assert!(matches!(err, Error::RectifierInExactMode));
        assert!(input_grad_norm_and_hvp(
            &net,
            &array![[0.0, 1.0]],
            PenaltyVariant::Max,
            1.0,
            PenaltyMode::FiniteDifference { step: 1e-5 }
        )
        .is_ok());
    }

    #[test]
    fn variants_parse() {
        for v in [
            PenaltyVariant::Max,
            PenaltyVariant::Mean,
            PenaltyVariant::MeanTwoSided,
        ] {
            assert_eq!(v.to_string().parse::<PenaltyVariant>().unwrap(), v);
        }
    }
}
