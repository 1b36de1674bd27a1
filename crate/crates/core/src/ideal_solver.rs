//! The ideal min-max problem on a discretized support.
//!
//! With the inner maximization solved exactly (`D = ω(r)`), what remains is
//! the convex problem `min Σ fᵢ [φ(ω(rᵢ)) + rᵢ ψ̃(ω(rᵢ))]` over ratio fields
//! with `r ≥ 0` and `Σ rᵢ fᵢ = 1`. It is solved by projected gradient descent
//! in the f-weighted inner product, where the gradient at point `i` is
//! `ψ̃(ω(rᵢ))` and the projection is a constant shift followed by clipping.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss_family::LossPair;
use crate::synth::{DensitySpec, SampleStream};

/// Probability masses on a regular 1D or 2D grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteDensity {
    pub support: Vec<Vec<f64>>,
    pub mass: Vec<f64>,
    /// Set when less than 99% of the continuous mass fell inside the window.
    pub warning: Option<String>,
}

impl DiscreteDensity {
    pub fn new(support: Vec<Vec<f64>>, mass: Vec<f64>) -> Result<Self> {
        let d = Self {
            support,
            mass,
            warning: None,
        };
        d.validate()?;
        Ok(d)
    }

    /// `n` equal masses on `0, 1, …, n-1`.
    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(
            (0..n).map(|i| vec![i as f64]).collect(),
            vec![1.0 / n as f64; n],
        )
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.mass.is_empty() || self.mass.len() != self.support.len() {
            return Err(Error::Shape(
                "support and mass lengths differ or are empty".into(),
            ));
        }
        if self.mass.iter().any(|m| !(*m >= 0.0)) {
            return Err(Error::InvalidArgument("masses must be >= 0".into()));
        }
        let total: f64 = self.mass.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "masses sum to {total}, not 1"
            )));
        }
        let mut pts = self.support.clone();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        if pts.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(
                "support points must be distinct".into(),
            ));
        }
        Ok(())
    }
}

/// Discretization window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Window {
    Interval(f64, f64),
    Box([f64; 2], [f64; 2]),
}

/// Evaluates the density at cell centres of a regular grid (`n_points` per
/// axis), multiplies by the cell volume and renormalizes.
pub fn discretize(spec: &DensitySpec, n_points: usize, window: Window) -> Result<DiscreteDensity> {
    if n_points < 2 {
        return Err(Error::InvalidArgument("need at least 2 grid points".into()));
    }
    spec.validate()?;
    let axis = |lo: f64, hi: f64| -> Result<(Vec<f64>, f64)> {
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidArgument(format!("empty window [{lo}, {hi}]")));
        }
        let h = (hi - lo) / n_points as f64;
        Ok((
            (0..n_points).map(|i| lo + (i as f64 + 0.5) * h).collect(),
            h,
        ))
    };
    let (support, cell): (Vec<Vec<f64>>, f64) = match window {
        Window::Interval(lo, hi) => {
            if spec.dim() != 1 {
                return Err(Error::Shape("interval window needs a 1D density".into()));
            }
            let (xs, h) = axis(lo, hi)?;
            (xs.into_iter().map(|x| vec![x]).collect(), h)
        }
        Window::Box(lo, hi) => {
            if spec.dim() != 2 {
                return Err(Error::Shape("box window needs a 2D density".into()));
            }
            let (xs, hx) = axis(lo[0], hi[0])?;
            let (ys, hy) = axis(lo[1], hi[1])?;
            let pts = xs
                .iter()
                .flat_map(|&x| ys.iter().map(move |&y| vec![x, y]))
                .collect();
            (pts, hx * hy)
        }
    };
    let raw: Vec<f64> = support.iter().map(|p| spec.pdf(p) * cell).collect();
    let inside: f64 = raw.iter().sum();
    if inside < 0.5 {
        return Err(Error::InsufficientMass(inside));
    }
    let warning = (inside < 0.99)
        .then(|| format!("only {inside:.4} of the density mass lies inside the window"));
    let mass = raw.iter().map(|m| m / inside).collect();
    let mut d = DiscreteDensity {
        support,
        mass,
        warning,
    };
    // renormalization can leave the sum one ulp-scale off 1
    let total: f64 = d.mass.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        d.mass.iter_mut().for_each(|m| *m /= total);
    }
    Ok(d)
}

/// Likelihood-ratio values aligned with a [`DiscreteDensity`].
#[derive(Clone, Debug, PartialEq)]
pub struct RatioField {
    pub values: Vec<f64>,
}

/// Allowed `|Σ rᵢ fᵢ - 1|`.
pub const CONSTRAINT_TOL: f64 = 1e-8;

impl RatioField {
    pub fn ones(n: usize) -> Self {
        Self {
            values: vec![1.0; n],
        }
    }

    pub fn constraint_residual(&self, f: &DiscreteDensity) -> f64 {
        self.values
            .iter()
            .zip(&f.mass)
            .map(|(r, m)| r * m)
            .sum::<f64>()
            - 1.0
    }

    pub fn validate(&self, f: &DiscreteDensity) -> Result<()> {
        if self.values.len() != f.len() {
            return Err(Error::Shape(format!(
                "ratio field has {} values, support has {}",
                self.values.len(),
                f.len()
            )));
        }
        if self.values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "ratio values must be finite and >= 0".into(),
            ));
        }
        let res = self.constraint_residual(f);
        if res.abs() > CONSTRAINT_TOL {
            return Err(Error::InvalidArgument(format!(
                "Σ r f - 1 = {res:e} violates the likelihood-ratio constraint"
            )));
        }
        Ok(())
    }

    /// Rescales arbitrary nonnegative weights onto the constraint.
    pub fn normalized(values: Vec<f64>, f: &DiscreteDensity) -> Result<Self> {
        let s: f64 = values.iter().zip(&f.mass).map(|(r, m)| r * m).sum();
        if !(s > 0.0) {
            return Err(Error::InvalidArgument(
                "weights have no mass under f".into(),
            ));
        }
        let field = Self {
            values: values.into_iter().map(|v| v / s).collect(),
        };
        field.validate(f)?;
        Ok(field)
    }

    /// `|N(0,1)|` draws normalized onto the constraint.
    pub fn random_feasible(f: &DiscreteDensity, seed: u64) -> Result<Self> {
        let mut s = SampleStream::new(seed);
        Self::normalized((0..f.len()).map(|_| s.normal().abs()).collect(), f)
    }

    pub fn linf_to_one(&self) -> f64 {
        self.values
            .iter()
            .map(|v| (v - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Projection onto `{r ≥ 0, Σ rᵢ fᵢ = 1}` in the f-weighted norm:
/// `rᵢ = max(0, vᵢ + λ)` with λ solving the constraint exactly.
pub fn project_feasible(v: &[f64], mass: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[b].partial_cmp(&v[a]).unwrap_or(std::cmp::Ordering::Equal));
    // activate points in decreasing order of v until the shift is consistent
    let (mut wsum, mut wv) = (0.0, 0.0);
    let mut lambda = 0.0;
    for (k, &i) in order.iter().enumerate() {
        if mass[i] == 0.0 {
            continue;
        }
        wsum += mass[i];
        wv += mass[i] * v[i];
        lambda = (1.0 - wv) / wsum;
        let next_inactive = order[k + 1..]
            .iter()
            .find(|&&j| mass[j] > 0.0)
            .is_none_or(|&j| v[j] + lambda <= 0.0);
        if v[i] + lambda > 0.0 && next_inactive {
            break;
        }
    }
    v.iter().map(|x| (x + lambda).max(0.0)).collect()
}

/// One logged solver step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub objective: f64,
    pub linf_to_one: f64,
    pub constraint_residual: f64,
}

pub type SolveTrace = Vec<TraceRecord>;

/// Solver knobs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Step on the f-weighted gradient. For uniform `f` this is the same as a
    /// Euclidean step of `step / max fᵢ` on the gradient `fᵢ ψ̃(ω(rᵢ))`.
    pub step: f64,
    pub max_iters: usize,
    /// Stop when `max |r - r_prev| < tol`.
    pub tol: f64,
    pub backtrack_factor: f64,
    pub max_halvings: usize,
    /// Objective increases without a new best value that count as divergence.
    pub divergence_patience: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            step: 0.1,
            max_iters: 20_000,
            tol: 1e-10,
            backtrack_factor: 0.5,
            max_halvings: 30,
            divergence_patience: 50,
        }
    }
}

/// Ratio argument of ω kept strictly positive so log-type transforms stay finite.
const MIN_RATIO: f64 = 1e-12;

fn pointwise(loss: &LossPair, shift: f64, r: f64) -> (f64, f64) {
    let z = loss
        .range()
        .clamp_interior(loss.omega().forward(r.max(MIN_RATIO)));
    let psi_t = loss.psi(z) - shift;
    (loss.phi(z) + r * psi_t, psi_t)
}

fn normalized_objective(loss: &LossPair, shift: f64, r: &[f64], f: &DiscreteDensity) -> f64 {
    r.iter()
        .zip(&f.mass)
        .map(|(&ri, &fi)| fi * pointwise(loss, shift, ri).0)
        .sum()
}

/// `Σ fᵢ [φ(ω(rᵢ)) + rᵢ ψ(ω(rᵢ))]` with the raw ψ.
pub fn minmax_value(loss: &LossPair, r: &RatioField, f: &DiscreteDensity) -> Result<f64> {
    if r.values.len() != f.len() {
        return Err(Error::Shape(
            "ratio field and density differ in length".into(),
        ));
    }
    if !loss.ratio_invertible() {
        return Err(Error::RequiresInvertible(loss.name().to_string()));
    }
    Ok(normalized_objective(loss, 0.0, &r.values, f))
}

/// Projected gradient descent on the concentrated objective.
pub fn solve_minmax_grid(
    loss: &LossPair,
    f: &DiscreteDensity,
    r_init: &RatioField,
    opts: &SolverOptions,
) -> Result<(RatioField, SolveTrace)> {
    if !loss.ratio_invertible() {
        return Err(Error::RequiresInvertible(loss.name().to_string()));
    }
    if !(opts.step > 0.0) {
        return Err(Error::InvalidArgument("step must be positive".into()));
    }
    f.validate()?;
    r_init.validate(f)?;
    let shift = loss.psi(loss.anchor());
    let mut r = r_init.values.clone();
    let mut objective = normalized_objective(loss, shift, &r, f);
    let record = |it: usize, r: &[f64], obj: f64| {
        let field = RatioField { values: r.to_vec() };
        TraceRecord {
            iteration: it,
            objective: obj,
            linf_to_one: field.linf_to_one(),
            constraint_residual: field.constraint_residual(f),
        }
    };
    let mut trace = vec![record(0, &r, objective)];
    let mut best = objective;
    let mut rising = 0;
    for it in 1..=opts.max_iters {
        let grad: Vec<f64> = r.iter().map(|&ri| pointwise(loss, shift, ri).1).collect();
        if grad.iter().all(|g| *g == 0.0) {
            break;
        }
        let mut step = opts.step;
        let mut candidate = Vec::new();
        let mut cand_obj = f64::INFINITY;
        let mut descended = false;
        for _ in 0..=opts.max_halvings {
            let moved: Vec<f64> = r.iter().zip(&grad).map(|(ri, g)| ri - step * g).collect();
            candidate = project_feasible(&moved, &f.mass);
            cand_obj = normalized_objective(loss, shift, &candidate, f);
            if cand_obj <= objective + 1e-12 * objective.abs().max(1.0) {
                descended = true;
                break;
            }
            step *= opts.backtrack_factor;
        }
        // increases are counted until a new best value appears, so an iterate
        // bouncing between two states is caught as well
        if cand_obj < best - 1e-12 * best.abs().max(1.0) {
            rising = 0;
        } else if !descended {
            rising += 1;
        }
        best = best.min(cand_obj);
        let delta = candidate
            .iter()
            .zip(&r)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        r = candidate;
        objective = cand_obj;
        trace.push(record(it, &r, objective));
        if !objective.is_finite() || rising >= opts.divergence_patience {
            return Err(Error::Diverged {
                iterations: it,
                trace,
            });
        }
        if delta < opts.tol {
            break;
        }
    }
    Ok((RatioField { values: r }, trace))
}

/// `iteration,objective,linf_to_one,constraint_residual` rows with a header.
pub fn trace_to_csv(trace: &[TraceRecord]) -> String {
    let mut out = String::from("iteration,objective,linf_to_one,constraint_residual\n");
    for t in trace {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            t.iteration, t.objective, t.linf_to_one, t.constraint_residual
        );
    }
    out
}

/// `x[,y],f_mass,r` rows with a header.
pub fn field_to_csv(f: &DiscreteDensity, r: &RatioField) -> String {
    let dim = f.support.first().map_or(1, Vec::len);
    let mut out = String::from(if dim == 2 {
        "x,y,f_mass,r\n"
    } else {
        "x,f_mass,r\n"
    });
    for ((p, m), v) in f.support.iter().zip(&f.mass).zip(&r.values) {
        let coords: Vec<String> = p.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(out, "{},{m},{v}", coords.join(","));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss_family::catalogue_lookup;

    fn loss(name: &str) -> LossPair {
        catalogue_lookup(name).unwrap().loss
    }

    #[test]
    fn ones_are_a_fixed_point() {
        let f = discretize(
            &DensitySpec::gaussian_1d(0.0, 1.0),
            32,
            Window::Interval(-5.0, 5.0),
        )
        .unwrap();
        let (r, trace) = solve_minmax_grid(
            &loss("A3"),
            &f,
            &RatioField::ones(32),
            &SolverOptions::default(),
        )
        .unwrap();
        assert_eq!(r, RatioField::ones(32));
        assert_eq!(trace.len(), 1);
        assert_eq!(trace[0].iteration, 0);
    }

    #[test]
    fn minmax_value_at_ones() {
        let f = DiscreteDensity::uniform(10).unwrap();
        let ones = RatioField::ones(10);
        assert!((minmax_value(&loss("MSE"), &ones, &f).unwrap() - 0.5).abs() < 1e-15);
        let ce = minmax_value(&loss("CrossEntropy"), &ones, &f).unwrap();
        assert!((ce + 2.0 * 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn non_invertible_rejected() {
        let f = DiscreteDensity::uniform(4).unwrap();
        let err = solve_minmax_grid(
            &loss("Wasserstein"),
            &f,
            &RatioField::ones(4),
            &SolverOptions::default(),
        )
        .unwrap_err();
        assert!(err
            .to_string()
            .contains("ideal solver requires invertible ω"));
    }

    #[test]
    fn projection_hits_constraint() {
        let mass = vec![0.1, 0.2, 0.3, 0.4];
        let p = project_feasible(&[-5.0, 0.3, 2.0, 1.0], &mass);
        let s: f64 = p.iter().zip(&mass).map(|(a, b)| a * b).sum();
        assert!((s - 1.0).abs() < 1e-15);
        assert!(p.iter().all(|v| *v >= 0.0));
        assert_eq!(p[0], 0.0);
        // already feasible points are untouched
        let q = project_feasible(&[1.0; 4], &mass);
        assert!(q.iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn infeasible_init_rejected() {
        let f = DiscreteDensity::uniform(4).unwrap();
        let bad = RatioField {
            values: vec![2.0; 4],
        };
        assert!(solve_minmax_grid(&loss("MSE"), &f, &bad, &SolverOptions::default()).is_err());
    }

    #[test]
    fn discretize_examples() {
        let g = discretize(
            &DensitySpec::gaussian_1d(0.0, 1.0),
            64,
            Window::Interval(-5.0, 5.0),
        )
        .unwrap();
        assert!((g.mass.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..32 {
            assert!((g.mass[i] - g.mass[63 - i]).abs() < 1e-12);
        }
        let u = discretize(
            &DensitySpec::uniform(vec![0.0], vec![1.0]),
            10,
            Window::Interval(0.0, 1.0),
        )
        .unwrap();
        assert!(u.mass.iter().all(|m| (m - 0.1).abs() < 1e-15));
        assert!(u.warning.is_none());
    }

    #[test]
    fn discretize_mass_warnings() {
        let spec = DensitySpec::gaussian_1d(0.0, 1.0);
        let warn = discretize(&spec, 32, Window::Interval(-2.0, 2.0)).unwrap();
        assert!(warn.warning.is_some());
        assert!(matches!(
            discretize(&spec, 32, Window::Interval(3.0, 9.0)),
            Err(Error::InsufficientMass(_))
        ));
        assert!(discretize(&spec, 1, Window::Interval(-1.0, 1.0)).is_err());
    }

    #[test]
    fn exports_have_headers() {
        let f = DiscreteDensity::uniform(3).unwrap();
        let r = RatioField::ones(3);
        let csv = field_to_csv(&f, &r);
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("x,f_mass,r"));
        let t = trace_to_csv(&[TraceRecord {
            iteration: 0,
            objective: 0.5,
            linf_to_one: 0.0,
            constraint_residual: 0.0,
        }]);
        assert_eq!(t.lines().nth(1).unwrap(), "0,0.5,0,0");
    }
}
