//! Lists the catalogue and builds a custom pair from a transform and a weight.

use std::sync::Arc;

use lrgan::loss_family::{catalogue, make_loss_pair, ratio_from_discriminator, OmegaTransform};

fn main() -> lrgan::Result<()> {
    for e in catalogue() {
        let l = &e.loss;
        let d = l.anchor();
        println!(
            "{:<12} subclass {}  ω(1) = {:>8.4}  φ(ω(1)) + ψ(ω(1)) = {:>9.5}  J = {}",
            l.name(),
            e.subclass,
            d,
            l.phi(d) + l.psi(d),
            l.range()
        );
    }

    // ω(r) = √r with ρ(z) = 1/(1+z): φ and ψ come from integrating the recipe.
    let custom = make_loss_pair(
        OmegaTransform::power(0.5)?,
        Arc::new(|z: f64| 1.0 / (1.0 + z)),
    )?;
    println!("\n{}", custom.name());
    for z in [0.25, 1.0, 4.0] {
        println!(
            "  z = {z:<5} φ = {:>9.5}  ψ = {:>9.5}  φ' = {:>9.5}  ψ' = {:>8.5}  ratio = {:.4}",
            custom.phi(z),
            custom.psi(z),
            custom.phi_prime(z),
            custom.psi_prime(z),
            ratio_from_discriminator(&custom, z)?
        );
    }
    Ok(())
}
