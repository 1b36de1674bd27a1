use std::fmt;
use std::sync::{Arc, OnceLock};

use super::omega::{OmegaTransform, ScalarFn};
use super::pair::{make_loss_pair, LossPair};
use crate::error::{Error, Result};

/// Names of the catalogue entries, in table order.
pub const CATALOGUE_NAMES: [&str; 13] = [
    "A1a",
    "A1b",
    "A2",
    "A3",
    "MSE",
    "B1a",
    "B1b",
    "Exponential",
    "B2",
    "CrossEntropy",
    "C2",
    "Hinge",
    "Wasserstein",
];

/// Transform family a catalogue entry belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Subclass {
    /// `ω(r) = r^α`
    A,
    /// `ω(r) = log(r)/α`
    B,
    /// `ω(r) = r/(1+r)`
    C,
    /// limits of `sign(log r)`
    D,
}

impl fmt::Display for Subclass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Subclass::A => "A",
            Subclass::B => "B",
            Subclass::C => "C",
            Subclass::D => "D",
        };
        f.write_str(s)
    }
}

/// One audited catalogue row.
#[derive(Clone, Debug)]
pub struct CatalogueEntry {
    pub loss: LossPair,
    pub subclass: Subclass,
    /// `φ | ψ | J_ω` as tabulated.
    pub table_row: String,
    pub phi_text: String,
    pub psi_text: String,
    pub rho_text: String,
    /// The (ω, ρ) pair the entry comes from and any correction applied.
    pub derivation_note: String,
}

fn f(func: impl Fn(f64) -> f64 + Send + Sync + 'static) -> ScalarFn {
    Arc::new(func)
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

struct Row {
    name: &'static str,
    subclass: Subclass,
    omega: OmegaTransform,
    rho: ScalarFn,
    phi: ScalarFn,
    psi: ScalarFn,
    texts: [&'static str; 4],
    note: &'static str,
}

fn build(row: Row) -> CatalogueEntry {
    let loss = make_loss_pair(row.omega, row.rho)
        .expect("catalogue transforms and weights are valid")
        .with_name(row.name)
        .with_closed_forms(row.phi, row.psi);
    let [phi_text, psi_text, rho_text, range_text] = row.texts;
    CatalogueEntry {
        table_row: format!("{phi_text} | {psi_text} | {range_text}"),
        phi_text: phi_text.into(),
        psi_text: psi_text.into(),
        rho_text: rho_text.into(),
        derivation_note: row.note.into(),
        subclass: row.subclass,
        loss,
    }
}

fn build_all() -> Vec<CatalogueEntry> {
    let pow1 = || OmegaTransform::power(1.0).unwrap();
    let log1 = || OmegaTransform::log_ratio(1.0).unwrap();
    let post = || OmegaTransform::posterior().unwrap();
    let mut out =
        vec![
        build(Row {
            name: "A1a",
            subclass: Subclass::A,
            omega: pow1(),
            rho: f(|z| 1.0 / z),
            phi: f(|z| -z),
            psi: f(|z| z.ln()),
            texts: ["-z", "log z", "1/z", "[0,inf)"],
            note: "ω = r (α = 1), ρ = z^-1 (β = -1); ratio r = D",
        }),
        build(Row {
            name: "A1b",
            subclass: Subclass::A,
            omega: pow1(),
            rho: f(|z| 1.0 / (z * z)),
            phi: f(|z| -z.ln()),
            psi: f(|z| -1.0 / z),
            texts: ["-log z", "-1/z", "1/z^2", "[0,inf)"],
            note: "ω = r (α = 1), ρ = z^-2 (β = -1 - 1/α); ratio r = D",
        }),
        build(Row {
            name: "A2",
            subclass: Subclass::A,
            omega: OmegaTransform::power(0.5).unwrap(),
            rho: f(|z| 1.0 / (z * z)),
            phi: f(|z| -(1.0 + z)),
            psi: f(|z| -(1.0 + 1.0 / z)),
            texts: ["-(1+z)", "-(1+1/z)", "1/z^2", "[0,inf)"],
            note: "corrected: the tabulated φ, ψ satisfy the recipe only for ω = r^(1/2), ρ = z^-2 \
                   (not α = 1, ρ = 1/(1+z)); ratio r = D^2",
        }),
        build(Row {
            name: "A3",
            subclass: Subclass::A,
            omega: pow1(),
            rho: f(|z| 1.0 / (z * (1.0 + z))),
            phi: f(|z| -z.ln_1p()),
            psi: f(|z| -(1.0 / z).ln_1p()),
            texts: ["-log(1+z)", "-log(1+1/z)", "1/(z(1+z))", "[0,inf)"],
            note: "ω = r (α = 1), ρ = 1/((1+z)z); ratio r = D",
        }),
        build(Row {
            name: "MSE",
            subclass: Subclass::A,
            omega: pow1(),
            rho: f(|_| 1.0),
            phi: f(|z| -0.5 * z * z),
            psi: f(|z| z),
            texts: ["-z^2/2", "z", "1", "[0,inf)"],
            note: "ω = r (α = 1), ρ = 1 (β = 0); ratio r = D",
        }),
        build(Row {
            name: "B1a",
            subclass: Subclass::B,
            omega: log1(),
            rho: f(|_| 1.0),
            phi: f(|z| -z.exp()),
            psi: f(|z| z),
            texts: ["-e^z", "z", "1", "R"],
            note: "corrected: ψ = e^z as tabulated violates the recipe for every α; shipped as the \
                   β = 0 case ω = log r, ρ = 1, φ = -e^z, ψ = z; ratio r = e^D",
        }),
        build(Row {
            name: "B1b",
            subclass: Subclass::B,
            omega: log1(),
            rho: f(|z| (-z).exp()),
            phi: f(|z| -z),
            psi: f(|z| -(-z).exp()),
            texts: ["-z", "-e^-z", "e^-z", "R"],
            note: "ω = log r (α = 1), ρ = e^-z (β = α); ratio r = e^D",
        }),
        build(Row {
            name: "Exponential",
            subclass: Subclass::B,
            omega: log1(),
            rho: f(|z| 0.5 * (-0.5 * z).exp()),
            phi: f(|z| -(0.5 * z).exp()),
            psi: f(|z| -(-0.5 * z).exp()),
            texts: ["-e^(z/2)", "-e^(-z/2)", "e^(-z/2)/2", "R"],
            note: "ω = log r (α = 1), β = 0.5; tabulated forms are the B1 formulas scaled by 0.5, \
                   i.e. ρ = 0.5·e^(-z/2); ratio r = e^D",
        }),
        build(Row {
            name: "B2",
            subclass: Subclass::B,
            omega: log1(),
            rho: f(|z| logistic(-z)),
            phi: f(|z| -softplus(z)),
            psi: f(|z| -softplus(-z)),
            texts: ["-log(1+e^z)", "-log(1+e^-z)", "1/(1+e^z)", "R"],
            note: "ω = log r (α = 1), ρ = 1/(1+e^z); ratio r = e^D",
        }),
        build(Row {
            name: "CrossEntropy",
            subclass: Subclass::C,
            omega: post(),
            rho: f(|z| 1.0 / z),
            phi: f(|z| (-z).ln_1p()),
            psi: f(|z| z.ln()),
            texts: ["log(1-z)", "log z", "1/z", "[0,1]"],
            note: "ω = r/(1+r), ρ = 1/z (C1); ratio r = D/(1-D)",
        }),
        build(Row {
            name: "C2",
            subclass: Subclass::C,
            omega: post(),
            rho: f(|_| 1.0),
            phi: f(|z| z + (-z).ln_1p()),
            psi: f(|z| z),
            texts: ["z+log(1-z)", "z", "1", "[0,1]"],
            note: "ω = r/(1+r), ρ = (1-z)^α with α = 0; ratio r = D/(1-D)",
        }),
    ];
    out.push(hinge());
    out.push(wasserstein());
    out
}

fn hinge() -> CatalogueEntry {
    // Kinks at z = ∓1 take the derivative of the active side for φ and of
    // the flat side for ψ: φ'(-1) = -1, ψ'(1) = 0.
    let loss = LossPair::from_parts(
        "Hinge",
        f(|z| if z >= -1.0 { -1.0 } else { 0.0 }),
        f(|z| if z < 1.0 { 1.0 } else { 0.0 }),
        Some(f(|z| -(1.0 + z).max(0.0))),
        Some(f(|z| -(1.0 - z).max(0.0))),
        OmegaTransform::sign_log(),
        None,
        false,
    );
    CatalogueEntry {
        table_row: "-(1+z)_+ | -(1-z)_+ | R".into(),
        phi_text: "-(1+z)_+".into(),
        psi_text: "-(1-z)_+".into(),
        rho_text: "limit".into(),
        derivation_note: "limit c -> inf of ω = sign(log r)|log r|^(1/c) with \
                          ρ = e^(-|z|^(1/c)) + 1{z < -1}; ratio not recoverable"
            .into(),
        subclass: Subclass::D,
        loss,
    }
}

fn wasserstein() -> CatalogueEntry {
    let loss = LossPair::from_parts(
        "Wasserstein",
        f(|_| 1.0),
        f(|_| -1.0),
        Some(f(|z| z)),
        Some(f(|z| -z)),
        OmegaTransform::sign_log(),
        None,
        true,
    );
    CatalogueEntry {
        table_row: "z | -z | R".into(),
        phi_text: "z".into(),
        psi_text: "-z".into(),
        rho_text: "limit".into(),
        derivation_note: "limit c -> inf of ω = tanh(c log(r)/2) with φ = -ψ; shipped in the \
                          orientation φ = z, ψ = -z, which is the ψ = z, φ = -z pair under D -> -D; \
                          ratio not recoverable"
            .into(),
        subclass: Subclass::D,
        loss,
    }
}

/// All thirteen audited entries, in table order.
pub fn catalogue() -> &'static [CatalogueEntry] {
    static CATALOGUE: OnceLock<Vec<CatalogueEntry>> = OnceLock::new();
    CATALOGUE.get_or_init(build_all)
}

fn normalize_name(name: &str) -> String {
    name.chars()
        .filter(|c| !matches!(c, ' ' | '-' | '_'))
        .flat_map(char::to_lowercase)
        .collect()
}

/// Case-insensitive lookup (spaces, dashes and underscores are ignored).
pub fn catalogue_lookup(name: &str) -> Result<CatalogueEntry> {
    let key = normalize_name(name);
    catalogue()
        .iter()
        .find(|e| normalize_name(e.loss.name()) == key)
        .cloned()
        .ok_or_else(|| Error::UnknownLoss {
            name: name.to_string(),
            valid: CATALOGUE_NAMES.join(", "),
        })
}

/// Names of the catalogue entries whose likelihood ratio is recoverable.
pub fn invertible_names() -> Vec<&'static str> {
    CATALOGUE_NAMES
        .iter()
        .copied()
        .filter(|n| !matches!(*n, "Hinge" | "Wasserstein"))
        .collect()
}
