use lrgan::ideal_solver::{
    discretize, minmax_value, project_feasible, solve_minmax_grid, DiscreteDensity, RatioField,
    SolverOptions, Window,
};
use lrgan::loss_family::{catalogue_lookup, invertible_names, LossPair};
use lrgan::synth::DensitySpec;
use proptest::prelude::*;

fn loss(name: &str) -> LossPair {
    catalogue_lookup(name).unwrap().loss
}

fn minmax_target(l: &LossPair) -> f64 {
    let a = l.anchor();
    l.phi(a) + l.psi(a)
}

/// Stationarity of the concentrated problem: ψ̃(ω(rᵢ)) = μ where rᵢ > 0 and
/// ≥ μ where rᵢ = 0. Bisection on μ gives an answer independent of the
/// gradient iteration.
fn kkt_oracle(l: &LossPair, f: &DiscreteDensity) -> Vec<f64> {
    let shift = l.psi(l.anchor());
    let g = |r: f64| l.psi(l.range().clamp_interior(l.omega().forward(r))) - shift;
    let invert = |mu: f64| {
        let (mut lo, mut hi) = (1e-12, 1e6);
        if g(lo) >= mu {
            return 0.0;
        }
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if g(mid) < mu {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let total = |mu: f64| -> f64 { f.mass.iter().map(|m| m * invert(mu)).sum() };
    let (mut a, mut b) = (g(1e-9) - 1.0, g(1e5));
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if total(mid) < 1.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let mu = 0.5 * (a + b);
    f.mass.iter().map(|_| invert(mu)).collect()
}

#[test]
fn mse_matches_kkt_oracle() {
    let f = DiscreteDensity::uniform(64).unwrap();
    let l = loss("MSE");
    let r0 = RatioField::random_feasible(&f, 7).unwrap();
    let (r, _) = solve_minmax_grid(&l, &f, &r0, &SolverOptions::default()).unwrap();
    let oracle = kkt_oracle(&l, &f);
    for (a, b) in r.values.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        assert!((a - 1.0).abs() < 1e-3);
    }
}

#[test]
fn every_invertible_loss_converges_from_random_starts() {
    let uniform = DiscreteDensity::uniform(64).unwrap();
    let gauss = discretize(
        &DensitySpec::gaussian_1d(0.0, 1.0),
        64,
        Window::Interval(-5.0, 5.0),
    )
    .unwrap();
    for name in invertible_names() {
        let l = loss(name);
        let target = minmax_target(&l);
        for f in [&uniform, &gauss] {
            for seed in 0..20 {
                let r0 = RatioField::random_feasible(f, seed).unwrap();
                let (r, trace) = solve_minmax_grid(&l, f, &r0, &SolverOptions::default()).unwrap();
                let linf = r.linf_to_one();
                assert!(
                    linf <= 1e-3,
                    "{name} seed {seed}: L∞ = {linf}, iters {}",
                    trace.len()
                );
                r.validate(f).unwrap();
                let v = minmax_value(&l, &r, f).unwrap();
                assert!((v - target).abs() <= 1e-6, "{name}: {v} vs {target}");
                for w in trace[10.min(trace.len())..].windows(2) {
                    assert!(
                        w[1].objective <= w[0].objective + 1e-9,
                        "{name}: objective rose"
                    );
                }
            }
        }
    }
}

#[test]
fn cross_entropy_skewed_gaussian() {
    let f = discretize(
        &DensitySpec::gaussian_1d(0.0, 1.0),
        64,
        Window::Interval(-5.0, 5.0),
    )
    .unwrap();
    let l = loss("CrossEntropy");
    let raw: Vec<f64> = (0..64).map(|i| if i < 32 { 2.0 } else { 1.0 }).collect();
    let r0 = RatioField::normalized(raw, &f).unwrap();
    let (r, trace) = solve_minmax_grid(&l, &f, &r0, &SolverOptions::default()).unwrap();
    assert!(r.linf_to_one() <= 1e-3);
    let last = trace.last().unwrap().objective;
    assert!((last - l.phi(l.anchor())).abs() < 1e-6);
}

#[test]
fn mixture_mass_splits_evenly() {
    let spec: DensitySpec =
        "mixture(0.5: gaussian(mean=[-2], cov=[[1]]); 0.5: gaussian(mean=[2], cov=[[1]]))"
            .parse()
            .unwrap();
    let d = discretize(&spec, 128, Window::Interval(-8.0, 8.0)).unwrap();
    let left: f64 = d
        .support
        .iter()
        .zip(&d.mass)
        .filter(|(p, _)| p[0] < 0.0)
        .map(|(_, m)| m)
        .sum();
    assert!((left - 0.5).abs() < 1e-6);
}

#[test]
fn two_dimensional_grid() {
    let spec = DensitySpec::ring(8, 2.0, 0.5);
    let d = discretize(&spec, 24, Window::Box([-4.0, -4.0], [4.0, 4.0])).unwrap();
    assert_eq!(d.len(), 576);
    let r0 = RatioField::random_feasible(&d, 3).unwrap();
    let (r, _) = solve_minmax_grid(&loss("A3"), &d, &r0, &SolverOptions::default()).unwrap();
    assert!(r.linf_to_one() <= 1e-3);
}

#[test]
fn huge_step_without_backtracking_diverges() {
    let f = DiscreteDensity::uniform(8).unwrap();
    let r0 = RatioField::random_feasible(&f, 1).unwrap();
    let opts = SolverOptions {
        step: 1e6,
        max_halvings: 0,
        ..SolverOptions::default()
    };
    match solve_minmax_grid(&loss("MSE"), &f, &r0, &opts) {
        Err(lrgan::Error::Diverged { trace, .. }) => assert!(!trace.is_empty()),
        other => panic!("expected divergence, got {other:?}"),
    }
}

proptest! {
    #[test]
    fn projection_is_feasible_and_idempotent(
        v in prop::collection::vec(-5.0f64..5.0, 2..40),
        w in prop::collection::vec(0.01f64..1.0, 40),
    ) {
        let n = v.len();
        let s: f64 = w[..n].iter().sum();
        let mass: Vec<f64> = w[..n].iter().map(|x| x / s).collect();
        let p = project_feasible(&v, &mass);
        prop_assert!(p.iter().all(|x| *x >= 0.0));
        let c: f64 = p.iter().zip(&mass).map(|(a, b)| a * b).sum();
        prop_assert!((c - 1.0).abs() < 1e-10);
        let q = project_feasible(&p, &mass);
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn projection_beats_random_feasible_points(
        v in prop::collection::vec(-3.0f64..3.0, 5),
        u in prop::collection::vec(0.0f64..1.0, 5),
    ) {
        let mass = vec![0.2; 5];
        let p = project_feasible(&v, &mass);
        let s: f64 = u.iter().map(|x| x * 0.2).sum();
        prop_assume!(s > 1e-6);
        let other: Vec<f64> = u.iter().map(|x| x / s).collect();
        let dist = |a: &[f64]| a.iter().zip(&v).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
        prop_assert!(dist(&p) <= dist(&other) + 1e-9);
    }
}
