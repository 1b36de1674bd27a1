use serde::{Deserialize, Serialize};

use super::net::{Dense, DenseNet};
use crate::error::{Error, Result};

/// Bias-corrected Adam moments for one net.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub first: Vec<Dense>,
    pub second: Vec<Dense>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub lr: f64,
}

impl AdamState {
    pub fn new(net: &DenseNet, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        let zeros: Vec<Dense> = net.layers.iter().map(Dense::zeros_like).collect();
        Self {
            first: zeros.clone(),
            second: zeros,
            step: 0,
            beta1,
            beta2,
            eps,
            lr,
        }
    }

    /// Moves the parameters against `grads` (a descent step). Nothing is
    /// modified when any gradient is non-finite.
    pub fn step(&mut self, net: &mut DenseNet, grads: &[Dense]) -> Result<()> {
        if grads.len() != net.layers.len() || self.first.len() != net.layers.len() {
            return Err(Error::Shape(
                "gradient and parameter layer counts differ".into(),
            ));
        }
        for (l, (g, p)) in grads.iter().zip(&net.layers).enumerate() {
            if g.weight.dim() != p.weight.dim() || g.bias.len() != p.bias.len() {
                return Err(Error::Shape(format!(
                    "gradient shape mismatch in layer {l}"
                )));
            }
            if !g.is_finite() {
                return Err(Error::NonFiniteGradient { layer: l });
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps, lr) = (self.beta1, self.beta2, self.eps, self.lr);
        for ((p, g), (m, v)) in net
            .layers
            .iter_mut()
            .zip(grads)
            .zip(self.first.iter_mut().zip(self.second.iter_mut()))
        {
            let params = p.weight.iter_mut().chain(p.bias.iter_mut());
            let gs = g.weight.iter().chain(g.bias.iter());
            let ms = m.weight.iter_mut().chain(m.bias.iter_mut());
            let vs = v.weight.iter_mut().chain(v.bias.iter_mut());
            for (((p, g), m), v) in params.zip(gs).zip(ms).zip(vs) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Free-function form of [`AdamState::step`].
pub fn adam_step(state: &mut AdamState, net: &mut DenseNet, grads: &[Dense]) -> Result<()> {
    state.step(net, grads)
}
