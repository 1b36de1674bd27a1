//! Central finite-difference oracles for the analytic passes.

use ndarray::Array2;

use super::net::DenseNet;
use crate::error::Result;

/// Step used by the gradient checks.
pub const FD_STEP: f64 = 1e-5;

/// `Σ weights ⊙ net(x)`, the scalar the checks differentiate.
pub fn weighted_output(net: &DenseNet, x: &Array2<f64>, weights: &Array2<f64>) -> Result<f64> {
    Ok((net.predict(x)? * weights).sum())
}

/// Finite-difference gradient of [`weighted_output`] over the flat parameters.
pub fn fd_param_gradient(
    net: &DenseNet,
    x: &Array2<f64>,
    weights: &Array2<f64>,
    step: f64,
) -> Result<Vec<f64>> {
    let base = net.params_flat();
    let mut probe = net.clone();
    let mut out = Vec::with_capacity(base.len());
    for k in 0..base.len() {
        let mut p = base.clone();
        p[k] = base[k] + step;
        probe.set_params_flat(&p)?;
        let up = weighted_output(&probe, x, weights)?;
        p[k] = base[k] - step;
        probe.set_params_flat(&p)?;
        let down = weighted_output(&probe, x, weights)?;
        out.push((up - down) / (2.0 * step));
    }
    Ok(out)
}

/// Finite-difference gradient of [`weighted_output`] over the batch entries.
pub fn fd_input_gradient(
    net: &DenseNet,
    x: &Array2<f64>,
    weights: &Array2<f64>,
    step: f64,
) -> Result<Array2<f64>> {
    let mut out = Array2::zeros(x.raw_dim());
    let mut probe = x.clone();
    for ((i, j), g) in out.indexed_iter_mut() {
        probe[[i, j]] = x[[i, j]] + step;
        let up = weighted_output(net, &probe, weights)?;
        probe[[i, j]] = x[[i, j]] - step;
        let down = weighted_output(net, &probe, weights)?;
        probe[[i, j]] = x[[i, j]];
        *g = (up - down) / (2.0 * step);
    }
    Ok(out)
}

/// `maxₖ |aₖ - bₖ| / max(|aₖ|, |bₖ|, floor)`.
pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}
