use std::fmt;
use std::sync::Arc;

use super::range::RangeInterval;
use crate::error::{Error, Result};

/// Shared scalar function used for transforms, weights and loss derivatives.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Relative tolerance for `inverse(forward(r)) == r` on the probe grid.
pub const INVERSE_ROUND_TRIP_TOL: f64 = 1e-9;

/// Probe grid for transform checks: `0` followed by `10^k`, `k` in
/// 241 evenly spaced steps over `[-6, 6]`.
pub fn probe_grid() -> Vec<f64> {
    let mut grid = Vec::with_capacity(242);
    grid.push(0.0);
    grid.extend((0..241).map(|i| 10f64.powf(-6.0 + 0.05 * i as f64)));
    grid
}

/// A transform ω of the likelihood ratio; its optimum is what the
/// discriminator ends up estimating.
#[derive(Clone)]
pub struct OmegaTransform {
    forward: ScalarFn,
    inverse: Option<ScalarFn>,
    range: RangeInterval,
    invertible: bool,
    description: String,
}

impl fmt::Debug for OmegaTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OmegaTransform")
            .field("description", &self.description)
            .field("range", &self.range)
            .field("invertible", &self.invertible)
            .finish()
    }
}

impl OmegaTransform {
    /// Builds a strictly increasing transform, probing monotonicity and, when
    /// an inverse is supplied, the round trip on [`probe_grid`].
    ///
    /// Pairs of probe points that have both saturated onto a finite range end
    /// are exempt: floating point cannot keep them apart.
    pub fn new(
        forward: ScalarFn,
        inverse: Option<ScalarFn>,
        range: RangeInterval,
        description: impl Into<String>,
    ) -> Result<Self> {
        let description = description.into();
        let grid = probe_grid();
        let values: Vec<f64> = grid.iter().map(|&r| forward(r)).collect();
        let saturated = |z: f64| {
            (range.lower.is_finite() && z == range.lower)
                || (range.upper.is_finite() && z == range.upper)
        };
        for (i, w) in values.windows(2).enumerate() {
            if w[0].is_nan() || w[1].is_nan() {
                return Err(Error::NotMonotone(format!(
                    "{description}: NaN near r = {}",
                    grid[i + 1]
                )));
            }
            if !(w[0] < w[1]) && !(w[0] == w[1] && saturated(w[0])) {
                return Err(Error::NotMonotone(format!(
                    "{description}: ω({}) = {} is not below ω({}) = {}",
                    grid[i],
                    w[0],
                    grid[i + 1],
                    w[1]
                )));
            }
        }
        if !range.contains(forward(1.0)) {
            return Err(Error::InvalidArgument(format!(
                "{description}: ω(1) = {} lies outside {range}",
                forward(1.0)
            )));
        }
        if let Some(inv) = &inverse {
            for (&r, &z) in grid.iter().zip(&values).skip(1) {
                if saturated(z) || range.clamp_interior(z) != z {
                    continue;
                }
                let back = inv(z);
                if ((back - r) / r).abs() > INVERSE_ROUND_TRIP_TOL {
                    return Err(Error::InvalidArgument(format!(
                        "{description}: inverse(ω({r})) = {back}"
                    )));
                }
            }
        }
        let invertible = inverse.is_some();
        Ok(Self {
            forward,
            inverse,
            range,
            invertible,
            description,
        })
    }

    /// `ω(r) = r^α`, range `[0, ∞)`.
    pub fn power(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "power transform needs α > 0, got {alpha}"
            )));
        }
        Self::new(
            Arc::new(move |r: f64| r.powf(alpha)),
            Some(Arc::new(move |z: f64| z.powf(1.0 / alpha))),
            RangeInterval::NON_NEGATIVE,
            format!("r^{alpha}"),
        )
    }

    /// `ω(r) = log(r) / α`, range `ℝ`.
    pub fn log_ratio(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "log transform needs α > 0, got {alpha}"
            )));
        }
        let desc = if alpha == 1.0 {
            "log r".to_string()
        } else {
            format!("log(r)/{alpha}")
        };
        Self::new(
            Arc::new(move |r: f64| r.ln() / alpha),
            Some(Arc::new(move |z: f64| (alpha * z).exp())),
            RangeInterval::REAL,
            desc,
        )
    }

    /// `ω(r) = r / (1 + r)`, range `[0, 1]`.
    pub fn posterior() -> Result<Self> {
        Self::new(
            Arc::new(|r: f64| if r.is_infinite() { 1.0 } else { r / (1.0 + r) }),
            Some(Arc::new(|z: f64| z / (1.0 - z))),
            RangeInterval::UNIT,
            "r/(1+r)",
        )
    }

    /// `ω(r) = (r^c - 1)/(r^c + 1) = tanh(c·log(r)/2)`, range `[-1, 1]`.
    pub fn monotone(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "monotone transform needs c > 0, got {c}"
            )));
        }
        Self::new(
            Arc::new(move |r: f64| {
                if r == 0.0 {
                    -1.0
                } else {
                    (0.5 * c * r.ln()).tanh()
                }
            }),
            Some(Arc::new(move |z: f64| {
                ((1.0 + z) / (1.0 - z)).powf(1.0 / c)
            })),
            RangeInterval::SYMMETRIC_UNIT,
            format!("(r^{c}-1)/(r^{c}+1)"),
        )
    }

    /// `ω(r) = sign(log r)·|log r|^{1/c}`, range `ℝ`.
    pub fn signed_log_power(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "signed log-power transform needs c > 0, got {c}"
            )));
        }
        Self::new(
            Arc::new(move |r: f64| {
                let l = r.ln();
                l.signum() * l.abs().powf(1.0 / c)
            }),
            Some(Arc::new(move |z: f64| (z.signum() * z.abs().powf(c)).exp())),
            RangeInterval::REAL,
            format!("sign(log r)|log r|^(1/{c})"),
        )
    }

    /// The non-invertible limit `ω(r) = sign(log r)`, with `ω(1) = 0`.
    pub fn sign_log() -> Self {
        Self {
            forward: Arc::new(|r: f64| if r == 1.0 { 0.0 } else { r.ln().signum() }),
            inverse: None,
            range: RangeInterval::REAL,
            invertible: false,
            description: "sign(log r)".to_string(),
        }
    }

    pub fn forward(&self, r: f64) -> f64 {
        (self.forward)(r)
    }

    pub fn inverse(&self, z: f64) -> Option<f64> {
        self.inverse.as_ref().map(|inv| inv(z))
    }

    pub(crate) fn inverse_fn(&self) -> Option<&ScalarFn> {
        self.inverse.as_ref()
    }

    pub fn range(&self) -> &RangeInterval {
        &self.range
    }

    pub fn invertible(&self) -> bool {
        self.invertible
    }

    pub fn description(&self) -> &str {
        &self.description
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalogue_transforms_pass_probes() {
        OmegaTransform::power(1.0).unwrap();
        OmegaTransform::power(0.5).unwrap();
        OmegaTransform::log_ratio(1.0).unwrap();
        OmegaTransform::posterior().unwrap();
        OmegaTransform::monotone(1.0).unwrap();
        OmegaTransform::monotone(100.0).unwrap();
        OmegaTransform::signed_log_power(3.0).unwrap();
    }

    #[test]
    fn decreasing_transform_rejected() {
        let err = OmegaTransform::new(Arc::new(|r: f64| -r), None, RangeInterval::REAL, "-r")
            .unwrap_err();
        assert!(matches!(err, Error::NotMonotone(_)));
    }

    #[test]
    fn flat_transform_rejected() {
        let err = OmegaTransform::new(
            Arc::new(|r: f64| r.min(2.0)),
            None,
            RangeInterval::NON_NEGATIVE,
            "min(r,2)",
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotMonotone(_)));
    }

    #[test]
    fn wrong_inverse_rejected() {
        let err = OmegaTransform::new(
            Arc::new(|r: f64| r),
            Some(Arc::new(|z: f64| 2.0 * z)),
            RangeInterval::NON_NEGATIVE,
            "r",
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn monotone_values() {
        let w = OmegaTransform::monotone(2.0).unwrap();
        assert_eq!(w.forward(1.0), 0.0);
        assert!((w.forward(3.0) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn sign_limit_is_not_invertible() {
        let w = OmegaTransform::sign_log();
        assert!(!w.invertible());
        assert_eq!(w.forward(1.0), 0.0);
        assert_eq!(w.forward(0.3), -1.0);
        assert_eq!(w.forward(3.0), 1.0);
        assert!(w.inverse(0.5).is_none());
    }
}
