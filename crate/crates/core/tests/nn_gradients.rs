use lrgan::loss_family::Squashing;
use lrgan::nn::gradcheck::{fd_input_gradient, fd_param_gradient, max_relative_error, FD_STEP};
use lrgan::nn::{
    backward, flatten, forward, init_net, input_grad_norm_and_hvp, Activation, DenseNet, NetSpec,
    PenaltyMode, PenaltyVariant,
};
use lrgan::synth::SampleStream;
use ndarray::Array2;

const ACTIVATIONS: [Activation; 3] = [
    Activation::SmoothLeaky { slope: 0.2 },
    Activation::Tanh,
    Activation::Rectifier { slope: 0.2 },
];
const SQUASHINGS: [Squashing; 4] = [
    Squashing::Identity,
    Squashing::Softplus,
    Squashing::Logistic,
    Squashing::Tanh,
];

fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut s = SampleStream::new(seed);
    Array2::from_shape_fn((rows, cols), |_| s.normal())
}

fn perturbed_net(spec: &NetSpec, seed: u64) -> DenseNet {
    // nonzero biases so every code path is exercised
    let mut net = init_net(spec).unwrap();
    let mut s = SampleStream::new(seed ^ 0xabc);
    for l in &mut net.layers {
        l.bias.iter_mut().for_each(|b| *b = 0.3 * s.normal());
    }
    net
}

#[test]
fn backward_matches_finite_differences_for_every_combination() {
    let mut seed = 0;
    for act in ACTIVATIONS {
        for sq in SQUASHINGS {
            for widths in [vec![2, 8, 1], vec![3, 6, 5, 2]] {
                seed += 1;
                let spec = NetSpec::new(widths.clone(), act, sq, seed);
                let net = perturbed_net(&spec, seed);
                let x = random_matrix(5, widths[0], seed + 100);
                let c = random_matrix(5, *widths.last().unwrap(), seed + 200);
                let (_, cache) = forward(&net, &x).unwrap();
                let (g, gx) = backward(&net, &cache, &c).unwrap();
                let fd = fd_param_gradient(&net, &x, &c, FD_STEP).unwrap();
                let err = max_relative_error(&flatten(&g), &fd, 1e-6);
                assert!(err <= 1e-4, "{act} {sq:?} {widths:?}: params {err}");
                let fdx = fd_input_gradient(&net, &x, &c, FD_STEP).unwrap();
                let err = max_relative_error(gx.as_slice().unwrap(), fdx.as_slice().unwrap(), 1e-6);
                assert!(err <= 1e-4, "{act} {sq:?} {widths:?}: inputs {err}");
            }
        }
    }
}

#[test]
fn forward_is_bit_reproducible() {
    let spec = NetSpec::new(
        vec![2, 64, 64, 1],
        Activation::default(),
        Squashing::Logistic,
        9,
    );
    let x = random_matrix(64, 2, 1);
    let a = init_net(&spec).unwrap();
    let b = init_net(&spec).unwrap();
    let (ya, ca) = forward(&a, &x).unwrap();
    let (yb, cb) = forward(&b, &x).unwrap();
    assert_eq!(ya, yb);
    let ones = Array2::ones((64, 1));
    assert_eq!(
        backward(&a, &ca, &ones).unwrap(),
        backward(&b, &cb, &ones).unwrap()
    );
}

#[test]
fn exact_penalty_gradient_matches_fallback() {
    let mut seed = 50;
    for act in [Activation::SmoothLeaky { slope: 0.2 }, Activation::Tanh] {
        for sq in SQUASHINGS {
            for variant in [
                PenaltyVariant::Max,
                PenaltyVariant::Mean,
                PenaltyVariant::MeanTwoSided,
            ] {
                seed += 1;
                let spec = NetSpec::new(vec![2, 8, 1], act, sq, seed);
                let mut net = perturbed_net(&spec, seed);
                // Scaling the first layer up and the inputs down by the same factor
                // leaves every activation unchanged and multiplies ∇ₓD, so the
                // one-sided terms can be made active without saturating.
                let mut x = random_matrix(6, 2, seed + 7);
                while lrgan::nn::input_gradients(&net, &x)
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
                assert_eq!(exact.norms, fd.norms);
                let (a, b) = (flatten(&exact.grads), flatten(&fd.grads));
                assert!(
                    a.iter().any(|g| *g != 0.0),
                    "{act} {sq:?} {variant}: inactive penalty"
                );
                let err = max_relative_error(&a, &b, 1e-6);
                assert!(err <= 1e-3, "{act} {sq:?} {variant}: {err}");
            }
        }
    }
}
