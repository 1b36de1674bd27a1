use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss_family::Squashing;

/// Hidden-layer nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    /// `slope·x + (1 - slope)·softplus(x)`: leaky-ReLU shaped but smooth.
    SmoothLeaky {
        slope: f64,
    },
    Tanh,
    /// `max(x, slope·x)`; its second derivative vanishes almost everywhere.
    Rectifier {
        slope: f64,
    },
}

pub const DEFAULT_SLOPE: f64 = 0.2;

impl Default for Activation {
    fn default() -> Self {
        Activation::SmoothLeaky {
            slope: DEFAULT_SLOPE,
        }
    }
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::SmoothLeaky { slope } => {
                slope * x + (1.0 - slope) * Squashing::Softplus.apply(x)
            }
            Activation::Tanh => x.tanh(),
            Activation::Rectifier { slope } => {
                if x > 0.0 {
                    x
                } else {
                    slope * x
                }
            }
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::SmoothLeaky { slope } => {
                slope + (1.0 - slope) * Squashing::Softplus.derivative(x)
            }
            Activation::Tanh => Squashing::Tanh.derivative(x),
            Activation::Rectifier { slope } => {
                if x > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
        }
    }

    pub fn second_derivative(self, x: f64) -> f64 {
        match self {
            Activation::SmoothLeaky { slope } => {
                (1.0 - slope) * Squashing::Softplus.second_derivative(x)
            }
            Activation::Tanh => Squashing::Tanh.second_derivative(x),
            Activation::Rectifier { .. } => 0.0,
        }
    }

    /// Value and first derivative, sharing one exponential.
    pub fn apply_with_derivative(self, x: f64) -> (f64, f64) {
        match self {
            Activation::SmoothLeaky { slope } => {
                let e = (-x.abs()).exp();
                let softplus = x.max(0.0) + e.ln_1p();
                let logistic = if x >= 0.0 {
                    1.0 / (1.0 + e)
                } else {
                    e / (1.0 + e)
                };
                (
                    slope * x + (1.0 - slope) * softplus,
                    slope + (1.0 - slope) * logistic,
                )
            }
            Activation::Tanh => {
                let t = x.tanh();
                (t, 1.0 - t * t)
            }
            Activation::Rectifier { .. } => (self.apply(x), self.derivative(x)),
        }
    }

    pub fn is_smooth(self) -> bool {
        !matches!(self, Activation::Rectifier { .. })
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::SmoothLeaky { slope } => write!(f, "smooth-leaky({slope})"),
            Activation::Tanh => write!(f, "tanh"),
            Activation::Rectifier { slope } => write!(f, "rectifier({slope})"),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    /// `smooth-leaky`, `smooth-leaky(0.1)`, `tanh`, `rectifier`, `rectifier(0.2)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.split_once('(') {
            Some((n, rest)) => {
                let inner = rest
                    .strip_suffix(')')
                    .ok_or_else(|| Error::Config(format!("unclosed parenthesis in `{s}`")))?;
                let v: f64 = inner
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad slope in `{s}`")))?;
                (n.trim(), Some(v))
            }
            None => (s, None),
        };
        match name {
            "smooth-leaky" => Ok(Activation::SmoothLeaky {
                slope: arg.unwrap_or(DEFAULT_SLOPE),
            }),
            "tanh" if arg.is_none() => Ok(Activation::Tanh),
            "rectifier" | "relu" => Ok(Activation::Rectifier {
                slope: arg.unwrap_or(0.0),
            }),
            _ => Err(Error::Config(format!(
                "unknown activation `{s}` (expected smooth-leaky, tanh or rectifier)"
            ))),
        }
    }
}

/// Parses the squashing names used in configs.
pub fn parse_squashing(s: &str) -> Result<Squashing> {
    match s.trim() {
        "identity" => Ok(Squashing::Identity),
        "softplus" => Ok(Squashing::Softplus),
        "logistic" => Ok(Squashing::Logistic),
        "tanh" => Ok(Squashing::Tanh),
        other => Err(Error::Config(format!(
            "unknown squashing `{other}` (expected identity, softplus, logistic or tanh)"
        ))),
    }
}

/// Per-layer nonlinearity: hidden activation or output squashing.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Nonlinearity {
    Hidden(Activation),
    Output(Squashing),
}

impl Nonlinearity {
    pub(crate) fn apply(self, x: f64) -> f64 {
        match self {
            Nonlinearity::Hidden(a) => a.apply(x),
            Nonlinearity::Output(s) => s.apply(x),
        }
    }

    pub(crate) fn apply_with_derivative(self, x: f64) -> (f64, f64) {
        match self {
            Nonlinearity::Hidden(a) => a.apply_with_derivative(x),
            Nonlinearity::Output(s) => (s.apply(x), s.derivative(x)),
        }
    }

    pub(crate) fn derivative(self, x: f64) -> f64 {
        match self {
            Nonlinearity::Hidden(a) => a.derivative(x),
            Nonlinearity::Output(s) => s.derivative(x),
        }
    }

    pub(crate) fn second_derivative(self, x: f64) -> f64 {
        match self {
            Nonlinearity::Hidden(a) => a.second_derivative(x),
            Nonlinearity::Output(s) => s.second_derivative(x),
        }
    }
}
