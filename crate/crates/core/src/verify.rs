//! Numerical certification of the inner maximizer `D = ω(r)`, the outer
//! minimizer `r = 1`, the min-max values and the derivative consistency of a
//! loss pair.
//!
//! The search routines only evaluate φ and ψ, never the recipe derivatives,
//! so they stay independent of what [`check_derivatives`] audits.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss_family::{output_squashing_for, LossPair, RangeInterval};

/// Grid points of the coarse inner scan.
pub const INNER_GRID: usize = 1024;
/// Pre-squash probe window for unbounded ranges.
pub const UNBOUNDED_WINDOW: f64 = 30.0;
/// Width at which golden-section refinement stops.
pub const GOLDEN_WIDTH: f64 = 1e-8;
/// Points of the log-spaced outer grid over `[1e-3, 1e3]`.
pub const OUTER_GRID: usize = 601;

/// Tolerances used by the checks; all configurable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// `|inner_argmax(r) - ω(r)|`
    pub argmax: f64,
    /// `|r* - 1|` for the refined outer minimizer
    pub minimizer: f64,
    /// min-max values
    pub value: f64,
    /// relative finite-difference agreement of φ', ψ'
    pub derivative: f64,
    /// relative agreement of `d/dr` of the concentrated objective with ψ̃(ω(r))
    pub concentrated_slope: f64,
    /// recipe identity `φ' + ω⁻¹·ψ' = 0`, relative
    pub recipe: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            argmax: 1e-4,
            minimizer: 1e-3,
            value: 1e-6,
            derivative: 1e-5,
            concentrated_slope: 1e-5,
            recipe: 1e-9,
        }
    }
}

/// Outcome of the inner maximization over J_ω.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InnerMax {
    Attained {
        d: f64,
        value: f64,
    },
    /// The objective keeps increasing towards an infinite end of J_ω.
    AtInfinity {
        direction: f64,
    },
}

impl InnerMax {
    pub fn location(&self) -> Option<f64> {
        match *self {
            InnerMax::Attained { d, .. } => Some(d),
            InnerMax::AtInfinity { .. } => None,
        }
    }
}

/// Parameterization of J_ω used by the scan.
struct SearchWindow {
    range: RangeInterval,
    lo: f64,
    hi: f64,
    map: Box<dyn Fn(f64) -> f64>,
}

impl SearchWindow {
    fn for_range(range: &RangeInterval) -> Result<Self> {
        let range = *range;
        if range.is_bounded() {
            let lo = range.clamp_interior(range.lower);
            let hi = range.clamp_interior(range.upper);
            Ok(Self {
                range,
                lo,
                hi,
                map: Box::new(|t| t),
            })
        } else {
            let squash = output_squashing_for(&range)?;
            Ok(Self {
                range,
                lo: -UNBOUNDED_WINDOW,
                hi: UNBOUNDED_WINDOW,
                map: Box::new(move |t| range.clamp_interior(squash.apply(t))),
            })
        }
    }

    fn point(&self, t: f64) -> f64 {
        (self.map)(t)
    }
}

fn golden_section(obj: &dyn Fn(f64) -> f64, win: &SearchWindow, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = obj(win.point(c));
    let mut fd = obj(win.point(d));
    for _ in 0..400 {
        if (win.point(b) - win.point(a)).abs() < GOLDEN_WIDTH || (b - a).abs() < 1e-14 {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = obj(win.point(c));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = obj(win.point(d));
        }
    }
    0.5 * (a + b)
}

/// Maximizer of `D ↦ φ(D) + r·ψ(D)` over J_ω by grid scan plus golden-section
/// refinement.
pub fn inner_argmax(loss: &LossPair, r: f64) -> Result<InnerMax> {
    if !(r >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ratio must be >= 0, got {r}"
        )));
    }
    let win = SearchWindow::for_range(loss.range())?;
    let obj = |d: f64| loss.phi(d) + r * loss.psi(d);
    let n = INNER_GRID;
    let ts: Vec<f64> = (0..n)
        .map(|i| win.lo + (win.hi - win.lo) * i as f64 / (n - 1) as f64)
        .collect();
    let vals: Vec<f64> = ts.iter().map(|&t| obj(win.point(t))).collect();
    let mut best = 0;
    for (i, v) in vals.iter().enumerate() {
        if *v > vals[best] || vals[best].is_nan() {
            best = i;
        }
    }
    if best == n - 1 && win.range.upper.is_infinite() && vals[n - 1] > vals[n - 2] {
        return Ok(InnerMax::AtInfinity {
            direction: f64::INFINITY,
        });
    }
    if best == 0 && win.range.lower.is_infinite() && vals[0] > vals[1] {
        return Ok(InnerMax::AtInfinity {
            direction: f64::NEG_INFINITY,
        });
    }
    let a = ts[best.saturating_sub(1)];
    let b = ts[(best + 1).min(n - 1)];
    let t = golden_section(&obj, &win, a, b);
    let d = win.point(t);
    Ok(InnerMax::Attained { d, value: obj(d) })
}

/// `φ(ω(r)) + r·ψ̃(ω(r))` with `ψ̃(z) = ψ(z) - ψ(ω(1))`.
pub fn concentrated_objective(loss: &LossPair, r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ratio must be >= 0, got {r}"
        )));
    }
    if !loss.ratio_invertible() {
        return Err(Error::RatioNotRecoverable(loss.name().to_string()));
    }
    let z = loss.range().clamp_interior(loss.omega().forward(r));
    let shift = loss.psi(loss.anchor());
    Ok(loss.phi(z) + r * (loss.psi(z) - shift))
}

/// `ψ̃(ω(r))`, the slope of the concentrated objective.
fn normalized_psi_at_ratio(loss: &LossPair, r: f64) -> f64 {
    let z = loss.range().clamp_interior(loss.omega().forward(r));
    loss.psi(z) - loss.psi(loss.anchor())
}

/// Minimizer of the concentrated objective over the log-spaced outer grid,
/// refined by a quadratic through the best point and its neighbours (in
/// `log10 r`). Returns `(r*, objective at r*)`.
pub fn outer_minimizer(loss: &LossPair) -> Result<(f64, f64)> {
    let n = OUTER_GRID;
    let step = 6.0 / (n - 1) as f64;
    let us: Vec<f64> = (0..n).map(|i| -3.0 + step * i as f64).collect();
    let vals = us
        .iter()
        .map(|&u| concentrated_objective(loss, 10f64.powf(u)))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, v) in vals.iter().enumerate() {
        if *v < vals[best] {
            best = i;
        }
    }
    let mut u_star = us[best];
    if best > 0 && best + 1 < n {
        let (fm, f0, fp) = (vals[best - 1], vals[best], vals[best + 1]);
        let curvature = fp - 2.0 * f0 + fm;
        if curvature > 0.0 {
            u_star -= step * (fp - fm) / (2.0 * curvature);
        }
    }
    let r_star = 10f64.powf(u_star);
    Ok((r_star, concentrated_objective(loss, r_star)?))
}

/// One numerical check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub probe: Option<f64>,
    pub expected: f64,
    pub observed: f64,
    pub abs_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn absolute(
        name: impl Into<String>,
        probe: Option<f64>,
        expected: f64,
        observed: f64,
        tol: f64,
    ) -> Self {
        let abs_error = (observed - expected).abs();
        Self {
            name: name.into(),
            probe,
            expected,
            observed,
            abs_error,
            tolerance: tol,
            passed: abs_error <= tol,
        }
    }

    /// Passes when `|observed - expected| <= tol · max(|expected|, floor)`;
    /// the reported tolerance is the resulting absolute bound.
    fn relative(
        name: impl Into<String>,
        probe: Option<f64>,
        expected: f64,
        observed: f64,
        tol: f64,
        floor: f64,
    ) -> Self {
        let bound = tol * expected.abs().max(floor);
        Self::absolute(name, probe, expected, observed, bound)
    }
}

/// Checks for one loss; `passed` holds iff every check is within tolerance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub loss_name: String,
    pub suite: String,
    pub checks: Vec<Check>,
    pub skipped: Option<String>,
    pub passed: bool,
}

impl VerificationReport {
    fn new(loss: &LossPair, suite: &str, checks: Vec<Check>) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        Self {
            loss_name: loss.name().to_string(),
            suite: suite.to_string(),
            checks,
            skipped: None,
            passed,
        }
    }

    fn skipped(loss: &LossPair, suite: &str, reason: impl Into<String>) -> Self {
        Self {
            loss_name: loss.name().to_string(),
            suite: suite.to_string(),
            checks: Vec::new(),
            skipped: Some(reason.into()),
            passed: true,
        }
    }

    /// Plain-text table, one line per check.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(reason) = &self.skipped {
            let _ = writeln!(
                out,
                "{:<14} {:<12} SKIPPED: {reason}",
                self.loss_name, self.suite
            );
            return out;
        }
        for c in &self.checks {
            let probe = c
                .probe
                .map(|p| format!("{p:.6e}"))
                .unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "{:<14} {:<12} {:<24} {:>13} {:>15.8e} {:>15.8e} {:>10.3e} {:>9.2e} {}",
                self.loss_name,
                self.suite,
                c.name,
                probe,
                c.expected,
                c.observed,
                c.abs_error,
                c.tolerance,
                if c.passed { "PASS" } else { "FAIL" }
            );
        }
        out
    }

    /// JSON lines, one record per check (a single record for skipped suites).
    pub fn to_json_lines(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Line<'a> {
            loss: &'a str,
            suite: &'a str,
            #[serde(flatten)]
            check: Option<&'a Check>,
            skipped: Option<&'a str>,
        }
        let mut out = String::new();
        if self.skipped.is_some() {
            out.push_str(&serde_json::to_string(&Line {
                loss: &self.loss_name,
                suite: &self.suite,
                check: None,
                skipped: self.skipped.as_deref(),
            })?);
            out.push('\n');
        }
        for c in &self.checks {
            out.push_str(&serde_json::to_string(&Line {
                loss: &self.loss_name,
                suite: &self.suite,
                check: Some(c),
                skipped: None,
            })?);
            out.push('\n');
        }
        Ok(out)
    }
}

pub const SKIP_NOT_INVERTIBLE: &str =
    "ratio not recoverable: the likelihood ratio cannot be found in terms of the discriminator";

/// Inner maximizer at every `r` in `r_grid`, the outer minimizer at `r = 1`,
/// the minimum value `φ(ω(1))`, the slope identity `d/dr = ψ̃(ω(r))` on
/// `[0.2, 5]`, and strict increase of `ψ̃(ω(r))`.
pub fn check_theorem1(loss: &LossPair, r_grid: &[f64], tol: &Tolerances) -> VerificationReport {
    const SUITE: &str = "optimality";
    if !loss.ratio_invertible() {
        return VerificationReport::skipped(loss, SUITE, SKIP_NOT_INVERTIBLE);
    }
    let mut checks = Vec::new();
    for &r in r_grid {
        let expected = loss.omega().forward(r);
        let observed = match inner_argmax(loss, r) {
            Ok(InnerMax::Attained { d, .. }) => d,
            Ok(InnerMax::AtInfinity { direction }) => direction,
            Err(_) => f64::NAN,
        };
        let mut c = Check::absolute("inner_argmax", Some(r), expected, observed, tol.argmax);
        c.passed &= observed.is_finite();
        checks.push(c);
    }
    let phi_anchor = loss.phi(loss.anchor());
    match outer_minimizer(loss) {
        Ok((r_star, value)) => {
            checks.push(Check::absolute(
                "outer_minimizer",
                None,
                1.0,
                r_star,
                tol.minimizer,
            ));
            checks.push(Check::absolute(
                "min_value",
                Some(r_star),
                phi_anchor,
                value,
                tol.value,
            ));
        }
        Err(e) => checks.push(Check {
            name: format!("outer_minimizer: {e}"),
            probe: None,
            expected: 1.0,
            observed: f64::NAN,
            abs_error: f64::NAN,
            tolerance: tol.minimizer,
            passed: false,
        }),
    }
    for i in 0..=8 {
        let r = 0.2 * 25f64.powf(i as f64 / 8.0);
        let h = 1e-5 * r;
        let slope = match (
            concentrated_objective(loss, r + h),
            concentrated_objective(loss, r - h),
        ) {
            (Ok(p), Ok(m)) => (p - m) / (2.0 * h),
            _ => f64::NAN,
        };
        let expected = normalized_psi_at_ratio(loss, r);
        checks.push(Check::relative(
            "concentrated_slope",
            Some(r),
            expected,
            slope,
            tol.concentrated_slope,
            1.0,
        ));
    }
    let grid: Vec<f64> = (0..OUTER_GRID)
        .map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / (OUTER_GRID - 1) as f64))
        .collect();
    let psis: Vec<f64> = grid
        .iter()
        .map(|&r| normalized_psi_at_ratio(loss, r))
        .collect();
    let violations = psis.windows(2).filter(|w| !(w[0] < w[1])).count();
    checks.push(Check::absolute(
        "normalized_psi_increasing",
        None,
        0.0,
        violations as f64,
        0.0,
    ));
    VerificationReport::new(loss, SUITE, checks)
}

/// The unnormalized min-max value: the numerical maximum of `φ(D) + ψ(D)`
/// equals `φ(ω(1)) + ψ(ω(1))`. For invertible pairs the normalized chain's
/// value `φ(ω(1))` is checked as well.
pub fn check_corollary_value(loss: &LossPair, tol: &Tolerances) -> VerificationReport {
    let anchor = loss.anchor();
    let expected = loss.phi(anchor) + loss.psi(anchor);
    let mut checks = Vec::new();
    let observed = match inner_argmax(loss, 1.0) {
        Ok(InnerMax::Attained { value, .. }) => value,
        Ok(InnerMax::AtInfinity { direction }) => direction,
        Err(_) => f64::NAN,
    };
    checks.push(Check::absolute(
        "minmax_value",
        Some(1.0),
        expected,
        observed,
        tol.value,
    ));
    if loss.ratio_invertible() {
        let normalized = concentrated_objective(loss, 1.0).unwrap_or(f64::NAN);
        checks.push(Check::absolute(
            "normalized_value",
            Some(1.0),
            loss.phi(anchor),
            normalized,
            tol.value,
        ));
    }
    VerificationReport::new(loss, "value", checks)
}

/// Distance from a kink inside which limiting pairs are not probed.
pub const KINK_EXCLUSION: f64 = 1e-3;

/// Central finite differences of the closed forms against φ', ψ' at
/// `n_points` interior samples, plus the recipe identity for invertible pairs.
pub fn check_derivatives(loss: &LossPair, n_points: usize, tol: &Tolerances) -> VerificationReport {
    const SUITE: &str = "derivatives";
    if !loss.has_closed_forms() {
        return VerificationReport::skipped(loss, SUITE, "no closed forms to differentiate");
    }
    let mut points = loss.interior_points(n_points);
    if loss.is_limit() {
        points.retain(|z| (z - 1.0).abs() > KINK_EXCLUSION && (z + 1.0).abs() > KINK_EXCLUSION);
    }
    let mut worst_phi = (0.0, None, 0.0, 0.0);
    let mut worst_psi = (0.0, None, 0.0, 0.0);
    let mut worst_recipe = (0.0, None, 0.0);
    for &z in &points {
        let h = 1e-6 * z.abs().max(1.0);
        let fd_phi = (loss.phi(z + h) - loss.phi(z - h)) / (2.0 * h);
        let fd_psi = (loss.psi(z + h) - loss.psi(z - h)) / (2.0 * h);
        let (a_phi, a_psi) = (loss.phi_prime(z), loss.psi_prime(z));
        let e_phi = (fd_phi - a_phi).abs() / a_phi.abs().max(1e-8);
        let e_psi = (fd_psi - a_psi).abs() / a_psi.abs().max(1e-8);
        if !(e_phi <= worst_phi.0) {
            worst_phi = (e_phi, Some(z), a_phi, fd_phi);
        }
        if !(e_psi <= worst_psi.0) {
            worst_psi = (e_psi, Some(z), a_psi, fd_psi);
        }
        if let Some(inv) = loss.omega().inverse(z) {
            let scale = a_phi.abs().max((inv * a_psi).abs()).max(1e-300);
            let e = (a_phi + inv * a_psi).abs() / scale;
            if !(e <= worst_recipe.0) {
                worst_recipe = (e, Some(z), a_phi + inv * a_psi);
            }
        }
    }
    let mut checks = vec![
        Check {
            name: "phi_prime_fd_max_rel".into(),
            probe: worst_phi.1,
            expected: worst_phi.2,
            observed: worst_phi.3,
            abs_error: worst_phi.0,
            tolerance: tol.derivative,
            passed: worst_phi.0 <= tol.derivative,
        },
        Check {
            name: "psi_prime_fd_max_rel".into(),
            probe: worst_psi.1,
            expected: worst_psi.2,
            observed: worst_psi.3,
            abs_error: worst_psi.0,
            tolerance: tol.derivative,
            passed: worst_psi.0 <= tol.derivative,
        },
    ];
    if loss.ratio_invertible() {
        checks.push(Check {
            name: "recipe_identity_max_rel".into(),
            probe: worst_recipe.1,
            expected: 0.0,
            observed: worst_recipe.2,
            abs_error: worst_recipe.0,
            tolerance: tol.recipe,
            passed: worst_recipe.0 <= tol.recipe,
        });
    }
    VerificationReport::new(loss, SUITE, checks)
}

/// Ratio probes used for the inner maximizer checks.
pub const DEFAULT_R_GRID: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 10.0];

/// Runs all three suites for one loss.
pub fn verify_loss(loss: &LossPair, tol: &Tolerances) -> Vec<VerificationReport> {
    vec![
        check_theorem1(loss, &DEFAULT_R_GRID, tol),
        check_corollary_value(loss, tol),
        check_derivatives(loss, 100, tol),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss_family::catalogue_lookup;

    fn loss(name: &str) -> LossPair {
        catalogue_lookup(name).unwrap().loss
    }

    #[test]
    fn mse_argmax_is_ratio() {
        let d = inner_argmax(&loss("MSE"), 2.0).unwrap().location().unwrap();
        assert!((d - 2.0).abs() < 1e-6);
    }

    #[test]
    fn cross_entropy_argmax_at_half() {
        let d = inner_argmax(&loss("CrossEntropy"), 1.0)
            .unwrap()
            .location()
            .unwrap();
        assert!((d - 0.5).abs() < 1e-6);
    }

    #[test]
    fn wasserstein_diverges_upwards() {
        let out = inner_argmax(&loss("Wasserstein"), 0.5).unwrap();
        assert_eq!(
            out,
            InnerMax::AtInfinity {
                direction: f64::INFINITY
            }
        );
        let out = inner_argmax(&loss("Wasserstein"), 2.0).unwrap();
        assert_eq!(
            out,
            InnerMax::AtInfinity {
                direction: f64::NEG_INFINITY
            }
        );
    }

    #[test]
    fn concentrated_values() {
        assert!((concentrated_objective(&loss("MSE"), 1.0).unwrap() + 0.5).abs() < 1e-15);
        let ce = concentrated_objective(&loss("CrossEntropy"), 1.0).unwrap();
        assert!((ce - 0.5f64.ln()).abs() < 1e-12);
        assert!(concentrated_objective(&loss("MSE"), -1.0).is_err());
        for name in crate::loss_family::invertible_names() {
            let l = loss(name);
            let v = concentrated_objective(&l, 1.0).unwrap();
            assert_eq!(v, l.phi(l.anchor()), "{name}");
        }
    }

    #[test]
    fn optimality_checks_pass_for_mse() {
        let rep = check_theorem1(&loss("MSE"), &DEFAULT_R_GRID, &Tolerances::default());
        assert!(rep.passed, "{}", rep.to_text());
    }

    #[test]
    fn optimality_checks_skip_hinge() {
        let rep = check_theorem1(&loss("Hinge"), &DEFAULT_R_GRID, &Tolerances::default());
        assert!(rep
            .skipped
            .as_deref()
            .unwrap()
            .contains("ratio not recoverable"));
        assert!(rep.checks.is_empty());
    }

    #[test]
    fn optimality_checks_single_ratio() {
        let rep = check_theorem1(&loss("CrossEntropy"), &[1.0], &Tolerances::default());
        assert!(rep.passed, "{}", rep.to_text());
        let argmax = &rep.checks[0];
        assert!((argmax.observed - 0.5).abs() < 1e-4);
        let value = rep.checks.iter().find(|c| c.name == "min_value").unwrap();
        assert!((value.observed - 0.5f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn minmax_values_match_anchor() {
        let tol = Tolerances::default();
        for (name, expected) in [
            ("MSE", 0.5),
            ("CrossEntropy", -2.0 * 2f64.ln()),
            ("B1b", -1.0),
        ] {
            let rep = check_corollary_value(&loss(name), &tol);
            assert!(rep.passed, "{}", rep.to_text());
            assert!((rep.checks[0].expected - expected).abs() < 1e-12, "{name}");
        }
    }

    #[test]
    fn derivative_checks() {
        let tol = Tolerances::default();
        for name in ["MSE", "A3", "Hinge"] {
            let rep = check_derivatives(&loss(name), 100, &tol);
            assert!(rep.passed, "{}", rep.to_text());
        }
        let a3 = loss("A3");
        for z in [0.1, 1.0, 7.0] {
            assert!((a3.psi_prime(z) - 1.0 / (z * (1.0 + z))).abs() < 1e-15);
        }
    }

    #[test]
    fn broken_closed_form_is_caught() {
        let bad = loss("MSE").with_closed_forms(
            std::sync::Arc::new(|z: f64| -0.5 * z * z),
            std::sync::Arc::new(|z: f64| 2.0 * z),
        );
        let rep = check_derivatives(&bad, 50, &Tolerances::default());
        assert!(!rep.passed);
    }

    #[test]
    fn report_serializations() {
        let rep = check_corollary_value(&loss("MSE"), &Tolerances::default());
        let text = rep.to_text();
        assert!(text.contains("minmax_value") && text.contains("PASS"));
        let json = rep.to_json_lines().unwrap();
        assert_eq!(json.lines().count(), rep.checks.len());
        let first: serde_json::Value = serde_json::from_str(json.lines().next().unwrap()).unwrap();
        assert_eq!(first["loss"], "MSE");
        assert_eq!(first["passed"], true);
    }
}
