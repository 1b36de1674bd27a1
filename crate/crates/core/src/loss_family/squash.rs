use serde::{Deserialize, Serialize};

use super::range::{CanonicalRange, RangeInterval};
use crate::error::{Error, Result};

/// Output nonlinearity applied to a network's last layer.
///
/// Carries first and second derivatives so the exact gradient-penalty pass
/// can differentiate through it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Squashing {
    Identity,
    Softplus,
    Logistic,
    Tanh,
}

fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl Squashing {
    pub fn apply(self, t: f64) -> f64 {
        match self {
            Squashing::Identity => t,
            Squashing::Softplus => {
                if t > 0.0 {
                    t + (-t).exp().ln_1p()
                } else {
                    t.exp().ln_1p()
                }
            }
            Squashing::Logistic => logistic(t),
            Squashing::Tanh => t.tanh(),
        }
    }

    pub fn derivative(self, t: f64) -> f64 {
        match self {
            Squashing::Identity => 1.0,
            Squashing::Softplus => logistic(t),
            Squashing::Logistic => {
                let s = logistic(t);
                s * (1.0 - s)
            }
            Squashing::Tanh => {
                let th = t.tanh();
                1.0 - th * th
            }
        }
    }

    pub fn second_derivative(self, t: f64) -> f64 {
        match self {
            Squashing::Identity => 0.0,
            Squashing::Softplus => {
                let s = logistic(t);
                s * (1.0 - s)
            }
            Squashing::Logistic => {
                let s = logistic(t);
                s * (1.0 - s) * (1.0 - 2.0 * s)
            }
            Squashing::Tanh => {
                let th = t.tanh();
                -2.0 * th * (1.0 - th * th)
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Squashing::Identity => "identity",
            Squashing::Softplus => "softplus",
            Squashing::Logistic => "logistic",
            Squashing::Tanh => "tanh",
        }
    }
}

/// Final-layer nonlinearity that keeps a discriminator inside `range`.
pub fn output_squashing_for(range: &RangeInterval) -> Result<Squashing> {
    match range.canonical() {
        Some(CanonicalRange::NonNegative) => Ok(Squashing::Softplus),
        Some(CanonicalRange::Unit) => Ok(Squashing::Logistic),
        Some(CanonicalRange::Real) => Ok(Squashing::Identity),
        Some(CanonicalRange::SymmetricUnit) => Ok(Squashing::Tanh),
        None => Err(Error::NonCanonicalRange(range.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL: [RangeInterval; 4] = [
        RangeInterval::NON_NEGATIVE,
        RangeInterval::UNIT,
        RangeInterval::REAL,
        RangeInterval::SYMMETRIC_UNIT,
    ];

    #[test]
    fn identity_for_real_line() {
        let s = output_squashing_for(&RangeInterval::REAL).unwrap();
        assert_eq!(s, Squashing::Identity);
        for t in [-3.0, 0.0, 7.5] {
            assert_eq!(s.apply(t), t);
            assert_eq!(s.derivative(t), 1.0);
        }
    }

    #[test]
    fn logistic_midpoint() {
        let s = output_squashing_for(&RangeInterval::UNIT).unwrap();
        assert_eq!(s.apply(0.0), 0.5);
    }

    #[test]
    fn softplus_stays_positive() {
        let s = output_squashing_for(&RangeInterval::NON_NEGATIVE).unwrap();
        let lo = s.apply(-10.0);
        assert!(lo > 0.0 && lo < 1e-4);
        assert!(RangeInterval::NON_NEGATIVE.contains(lo));
        assert!(RangeInterval::NON_NEGATIVE.contains(s.apply(10.0)));
    }

    #[test]
    fn non_canonical_rejected() {
        let r = RangeInterval::new(0.0, 3.0, false, false).unwrap();
        assert!(matches!(
            output_squashing_for(&r),
            Err(Error::NonCanonicalRange(_))
        ));
    }

    #[test]
    fn containment_over_preactivation_window() {
        for range in ALL {
            let s = output_squashing_for(&range).unwrap();
            for i in 0..=2000 {
                let t = -50.0 + 0.05 * i as f64;
                assert!(range.contains(s.apply(t)), "{range} {t}");
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for s in [
            Squashing::Identity,
            Squashing::Softplus,
            Squashing::Logistic,
            Squashing::Tanh,
        ] {
            for t in [-4.0, -0.7, 0.0, 0.3, 2.5] {
                let h = 1e-5;
                let d1 = (s.apply(t + h) - s.apply(t - h)) / (2.0 * h);
                let d2 = (s.derivative(t + h) - s.derivative(t - h)) / (2.0 * h);
                assert!((d1 - s.derivative(t)).abs() < 1e-8, "{s:?}");
                assert!((d2 - s.second_derivative(t)).abs() < 1e-8, "{s:?}");
            }
        }
    }
}
