//! Backpropagation and the exact gradient-penalty gradient against central
//! finite differences.

use lrgan::loss_family::Squashing;
use lrgan::nn::gradcheck::{fd_param_gradient, max_relative_error, FD_STEP};
use lrgan::nn::{
    backward, flatten, forward, init_net, input_grad_norm_and_hvp, Activation, NetSpec,
    PenaltyMode, PenaltyVariant,
};
use lrgan::synth::SampleStream;
use ndarray::Array2;

fn main() -> lrgan::Result<()> {
    let mut s = SampleStream::new(3);
    let x = Array2::from_shape_fn((16, 2), |_| 2.0 * s.normal());
    let c = Array2::from_shape_fn((16, 1), |_| s.normal());
    for act in [
        Activation::default(),
        Activation::Tanh,
        Activation::Rectifier { slope: 0.2 },
    ] {
        let net = init_net(&NetSpec::new(
            vec![2, 32, 32, 1],
            act,
            Squashing::Logistic,
            11,
        ))?;
        let (_, cache) = forward(&net, &x)?;
        let (grads, _) = backward(&net, &cache, &c)?;
        let fd = fd_param_gradient(&net, &x, &c, FD_STEP)?;
        println!(
            "{:<18} {} params, backward vs FD max relative error {:.2e}",
            act.to_string(),
            net.n_params(),
            max_relative_error(&flatten(&grads), &fd, 1e-6)
        );
    }

    let mut net = init_net(&NetSpec::new(
        vec![2, 32, 32, 1],
        Activation::default(),
        Squashing::Identity,
        5,
    ))?;
    // a steeper first layer pushes input-gradient norms past one
    net.layers[0].weight.mapv_inplace(|w| 3.0 * w);
    for variant in [
        PenaltyVariant::Max,
        PenaltyVariant::Mean,
        PenaltyVariant::MeanTwoSided,
    ] {
        let exact = input_grad_norm_and_hvp(&net, &x, variant, 10.0, PenaltyMode::Exact)?;
        let fd = input_grad_norm_and_hvp(
            &net,
            &x,
            variant,
            10.0,
            PenaltyMode::FiniteDifference { step: 1e-5 },
        )?;
        println!(
            "penalty {:<15} value {:.5}  exact vs FD gradient {:.2e}",
            variant.to_string(),
            exact.value,
            max_relative_error(&flatten(&exact.grads), &flatten(&fd.grads), 1e-6)
        );
    }
    Ok(())
}
