//! Loss pairs built from a ratio transform ω and a positive weight ρ.
//!
//! Every pair satisfies `φ'(z) = -ω⁻¹(z)·ρ(z)` and `ψ'(z) = ρ(z)`; the
//! adversarial problem built from it has its inner optimum at `D = ω(r)` and
//! its outer optimum at `r ≡ 1`.

mod catalogue;
mod integrate;
mod omega;
mod pair;
mod range;
mod squash;

pub use catalogue::{
    catalogue, catalogue_lookup, invertible_names, CatalogueEntry, Subclass, CATALOGUE_NAMES,
};
pub use integrate::adaptive_simpson;
pub use omega::{probe_grid, OmegaTransform, ScalarFn, INVERSE_ROUND_TRIP_TOL};
pub use pair::{
    make_loss_pair, make_monotone_loss, ratio_from_discriminator, LossPair, SURROGATE_TOL,
};
pub use range::{CanonicalRange, RangeInterval, BOUNDARY_EPS};
pub use squash::{output_squashing_for, Squashing};
