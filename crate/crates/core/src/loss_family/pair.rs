use std::fmt;
use std::sync::Arc;

use super::integrate::adaptive_simpson;
use super::omega::{probe_grid, OmegaTransform, ScalarFn};
use super::range::RangeInterval;
use crate::error::{Error, Result};

/// Absolute tolerance of the integrated φ/ψ surrogates.
pub const SURROGATE_TOL: f64 = 1e-8;

/// A (φ, ψ) loss pair, carried mainly through its derivatives.
///
/// Derivatives follow `φ'(z) = -ω⁻¹(z)·ρ(z)`, `ψ'(z) = ρ(z)` for invertible
/// transforms. Closed forms are optional; when absent, values of φ and ψ are
/// obtained by integrating the derivatives from ω(1), so the surrogate ψ
/// already vanishes there.
#[derive(Clone)]
pub struct LossPair {
    name: String,
    phi_prime: ScalarFn,
    psi_prime: ScalarFn,
    phi: Option<ScalarFn>,
    psi: Option<ScalarFn>,
    omega: OmegaTransform,
    rho: Option<ScalarFn>,
    range: RangeInterval,
    ratio_invertible: bool,
    reflected: bool,
}

impl fmt::Debug for LossPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LossPair")
            .field("name", &self.name)
            .field("omega", &self.omega)
            .field("range", &self.range)
            .field("closed_forms", &self.has_closed_forms())
            .field("ratio_invertible", &self.ratio_invertible)
            .finish()
    }
}

/// Builds the pair `φ' = -ω⁻¹·ρ`, `ψ' = ρ` from a transform and a positive weight.
///
/// The weight is probed at the images `ω(r)` of the transform probe grid
/// (interior points only) and must be strictly positive there.
pub fn make_loss_pair(omega: OmegaTransform, rho: ScalarFn) -> Result<LossPair> {
    let inverse = omega
        .inverse_fn()
        .cloned()
        .ok_or_else(|| Error::NotMonotone(format!("{} has no inverse", omega.description())))?;
    let range = *omega.range();
    for r in probe_grid() {
        let z = omega.forward(r);
        if range.clamp_interior(z) != z || !z.is_finite() {
            continue;
        }
        let w = rho(z);
        if !(w > 0.0) {
            return Err(Error::NonPositiveWeight(format!("ρ({z}) = {w}")));
        }
    }
    let rho_phi = rho.clone();
    let phi_prime: ScalarFn = Arc::new(move |z| -inverse(z) * rho_phi(z));
    Ok(LossPair {
        name: format!("custom[{}]", omega.description()),
        phi_prime,
        psi_prime: rho.clone(),
        phi: None,
        psi: None,
        range,
        ratio_invertible: true,
        omega,
        rho: Some(rho),
        reflected: false,
    })
}

/// Loss built on the smooth sign approximation `ω(r) = (r^c - 1)/(r^c + 1)`.
pub fn make_monotone_loss(c: f64, rho: ScalarFn) -> Result<LossPair> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "monotone loss needs finite c > 0, got {c}"
        )));
    }
    let omega = OmegaTransform::monotone(c)?;
    Ok(make_loss_pair(omega, rho)?.with_name(format!("monotone(c={c})")))
}

/// Likelihood-ratio estimate `ω⁻¹(d)` for a discriminator output `d`.
pub fn ratio_from_discriminator(loss: &LossPair, d: f64) -> Result<f64> {
    if !loss.ratio_invertible {
        return Err(Error::RatioNotRecoverable(loss.name.clone()));
    }
    let z = loss.range.clamp_interior(d);
    loss.omega
        .inverse(z)
        .ok_or_else(|| Error::RatioNotRecoverable(loss.name.clone()))
}

impl LossPair {
    /// Assembles a pair from explicit parts; used by the catalogue and the
    /// limiting constructions.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        name: &str,
        phi_prime: ScalarFn,
        psi_prime: ScalarFn,
        phi: Option<ScalarFn>,
        psi: Option<ScalarFn>,
        omega: OmegaTransform,
        rho: Option<ScalarFn>,
        reflected: bool,
    ) -> Self {
        let range = *omega.range();
        let ratio_invertible = omega.invertible();
        Self {
            name: name.to_string(),
            phi_prime,
            psi_prime,
            phi,
            psi,
            omega,
            rho,
            range,
            ratio_invertible,
            reflected,
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Attaches hand-entered closed forms for φ and ψ.
    pub fn with_closed_forms(mut self, phi: ScalarFn, psi: ScalarFn) -> Self {
        self.phi = Some(phi);
        self.psi = Some(psi);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn omega(&self) -> &OmegaTransform {
        &self.omega
    }

    pub fn range(&self) -> &RangeInterval {
        &self.range
    }

    pub fn ratio_invertible(&self) -> bool {
        self.ratio_invertible
    }

    /// True when the pair comes from a limit of transforms rather than an
    /// invertible ω.
    pub fn is_limit(&self) -> bool {
        !self.omega.invertible()
    }

    /// True for the orientation `D -> -D` of the Wasserstein entry, where ψ
    /// decreases instead of increasing.
    pub fn reflected(&self) -> bool {
        self.reflected
    }

    pub fn has_closed_forms(&self) -> bool {
        self.phi.is_some() && self.psi.is_some()
    }

    pub fn phi_prime(&self, z: f64) -> f64 {
        (self.phi_prime)(z)
    }

    pub fn psi_prime(&self, z: f64) -> f64 {
        (self.psi_prime)(z)
    }

    pub fn rho(&self, z: f64) -> Option<f64> {
        self.rho.as_ref().map(|r| r(z))
    }

    /// `ω(1)`, the discriminator value at the ideal solution.
    pub fn anchor(&self) -> f64 {
        self.omega.forward(1.0)
    }

    /// φ(z): closed form when present, otherwise `∫_{ω(1)}^z φ'`.
    pub fn phi(&self, z: f64) -> f64 {
        match &self.phi {
            Some(f) => f(z),
            None => self.integrate(&*self.phi_prime, z),
        }
    }

    /// ψ(z): closed form when present, otherwise `∫_{ω(1)}^z ψ'`.
    pub fn psi(&self, z: f64) -> f64 {
        match &self.psi {
            Some(f) => f(z),
            None => self.integrate(&*self.psi_prime, z),
        }
    }

    fn integrate(&self, deriv: &(dyn Fn(f64) -> f64 + Send + Sync), z: f64) -> f64 {
        let a = self.range.clamp_interior(self.anchor());
        let b = self.range.clamp_interior(z);
        adaptive_simpson(&|x| deriv(x), a, b, SURROGATE_TOL)
    }

    /// Copy whose ψ is shifted so that `ψ(ω(1)) = 0`; derivatives are unchanged.
    pub fn normalize_psi(&self) -> LossPair {
        let mut out = self.clone();
        if let Some(psi) = &self.psi {
            let shift = psi(self.anchor());
            let psi = psi.clone();
            out.psi = Some(Arc::new(move |z| psi(z) - shift));
        }
        out
    }

    /// Interior sample points of J_ω: images of `r` log-spaced over
    /// `[1e-3, 1e3]` for invertible pairs, evenly spaced over `[-3, 3]`
    /// for limiting ones.
    pub fn interior_points(&self, n: usize) -> Vec<f64> {
        let n = n.max(2);
        if self.ratio_invertible {
            (0..n)
                .map(|i| {
                    let r = 10f64.powf(-3.0 + 6.0 * i as f64 / (n - 1) as f64);
                    self.range.clamp_interior(self.omega.forward(r))
                })
                .collect()
        } else {
            (0..n)
                .map(|i| -3.0 + 6.0 * i as f64 / (n - 1) as f64)
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_pair() -> LossPair {
        make_loss_pair(OmegaTransform::power(1.0).unwrap(), Arc::new(|_| 1.0)).unwrap()
    }

    #[test]
    fn identity_transform_unit_weight() {
        let p = identity_pair();
        for z in [0.0, 0.5, 2.0, 10.0] {
            assert_eq!(p.phi_prime(z), -z);
            assert_eq!(p.psi_prime(z), 1.0);
        }
        assert_eq!(p.phi_prime(0.0), 0.0);
        assert!(!p.has_closed_forms());
        assert!(p.ratio_invertible());
    }

    #[test]
    fn log_transform_exponential_weight() {
        let p = make_loss_pair(
            OmegaTransform::log_ratio(1.0).unwrap(),
            Arc::new(|z: f64| (-z).exp()),
        )
        .unwrap();
        for z in [-3.0, -0.5, 0.0, 1.7, 4.0] {
            assert!((p.phi_prime(z) + 1.0).abs() < 1e-12);
            assert!((p.psi_prime(z) - (-z).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn nonpositive_weight_rejected() {
        let err = make_loss_pair(
            OmegaTransform::power(1.0).unwrap(),
            Arc::new(|z: f64| z - 1.0),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonPositiveWeight(_)));
    }

    #[test]
    fn limit_transform_rejected() {
        let err = make_loss_pair(OmegaTransform::sign_log(), Arc::new(|_| 1.0)).unwrap_err();
        assert!(matches!(err, Error::NotMonotone(_)));
    }

    #[test]
    fn monotone_loss_values() {
        let p = make_monotone_loss(1.0, Arc::new(|_| 1.0)).unwrap();
        assert_eq!(p.anchor(), 0.0);
        assert!((p.phi_prime(0.5) + 3.0).abs() < 1e-12);
        let p2 = make_monotone_loss(2.0, Arc::new(|_| 1.0)).unwrap();
        assert!((p2.omega().forward(3.0) - 0.8).abs() < 1e-15);
        assert!(make_monotone_loss(0.0, Arc::new(|_| 1.0)).is_err());
        assert!(make_monotone_loss(-1.0, Arc::new(|_| 1.0)).is_err());
    }

    #[test]
    fn surrogate_psi_vanishes_at_anchor() {
        let p = identity_pair().normalize_psi();
        assert_eq!(p.psi(1.0), 0.0);
        // ψ(z) = z - 1 and φ(z) = -(z² - 1)/2 relative to the anchor.
        assert!((p.psi(3.0) - 2.0).abs() < 1e-9);
        assert!((p.phi(3.0) + 4.0).abs() < 1e-9);
    }

    #[test]
    fn ratio_for_custom_pair() {
        let p = identity_pair();
        assert!((ratio_from_discriminator(&p, 2.5).unwrap() - 2.5).abs() < 1e-15);
    }
}
