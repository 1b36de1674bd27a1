use std::f64::consts::{PI, TAU};
use std::fmt;

use ndarray::Array2;

use super::rng::SampleStream;
use crate::error::{Error, Result};

/// Origin or target density on ℝ or ℝ².
#[derive(Clone, Debug, PartialEq)]
pub enum DensitySpec {
    Gaussian {
        mean: Vec<f64>,
        cov: Vec<Vec<f64>>,
    },
    Mixture {
        components: Vec<(f64, DensitySpec)>,
    },
    /// Equal-weight mixture of `k` isotropic Gaussians centred at angles
    /// `2πj/k` on a circle of the given radius.
    Ring {
        k: usize,
        radius: f64,
        sigma: f64,
    },
    Uniform {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
}

impl DensitySpec {
    pub fn gaussian_1d(mean: f64, var: f64) -> Self {
        DensitySpec::Gaussian {
            mean: vec![mean],
            cov: vec![vec![var]],
        }
    }

    pub fn standard_normal(dim: usize) -> Self {
        let cov = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        DensitySpec::Gaussian {
            mean: vec![0.0; dim],
            cov,
        }
    }

    pub fn ring(k: usize, radius: f64, sigma: f64) -> Self {
        DensitySpec::Ring { k, radius, sigma }
    }

    pub fn uniform(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        DensitySpec::Uniform { lo, hi }
    }

    pub fn dim(&self) -> usize {
        match self {
            DensitySpec::Gaussian { mean, .. } => mean.len(),
            DensitySpec::Mixture { components } => components.first().map_or(0, |c| c.1.dim()),
            DensitySpec::Ring { .. } => 2,
            DensitySpec::Uniform { lo, .. } => lo.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        let dim = self.dim();
        if dim != 1 && dim != 2 {
            return bad(format!("dimension must be 1 or 2, got {dim}"));
        }
        match self {
            DensitySpec::Gaussian { mean, cov } => {
                if cov.len() != dim || cov.iter().any(|row| row.len() != dim) {
                    return bad("covariance shape does not match mean".into());
                }
                if mean
                    .iter()
                    .chain(cov.iter().flatten())
                    .any(|v| !v.is_finite())
                {
                    return bad("non-finite Gaussian parameter".into());
                }
                if dim == 2 && cov[0][1] != cov[1][0] {
                    return bad("covariance must be symmetric".into());
                }
                if cholesky(cov).is_none() {
                    return bad("covariance must be positive definite".into());
                }
            }
            DensitySpec::Mixture { components } => {
                if components.is_empty() {
                    return bad("mixture needs at least one component".into());
                }
                let mut total = 0.0;
                for (w, c) in components {
                    if !(*w > 0.0) {
                        return bad(format!("mixture weight {w} must be positive"));
                    }
                    if c.dim() != dim {
                        return bad("mixture components differ in dimension".into());
                    }
                    c.validate()?;
                    total += w;
                }
                if (total - 1.0).abs() > 1e-9 {
                    return bad(format!("mixture weights sum to {total}, not 1"));
                }
            }
            DensitySpec::Ring { k, radius, sigma } => {
                if *k == 0 {
                    return bad("ring needs at least one mode".into());
                }
                if !(*sigma > 0.0) || !sigma.is_finite() {
                    return bad(format!("ring sigma {sigma} must be positive"));
                }
                if !(*radius >= 0.0) || !radius.is_finite() {
                    return bad(format!("ring radius {radius} must be >= 0"));
                }
            }
            DensitySpec::Uniform { lo, hi } => {
                if lo.len() != hi.len() {
                    return bad("uniform bounds differ in dimension".into());
                }
                if lo
                    .iter()
                    .zip(hi)
                    .any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite())
                {
                    return bad("uniform box needs finite lo < hi".into());
                }
            }
        }
        Ok(())
    }

    /// Centres of the ring modes (empty for other variants).
    pub fn ring_centres(&self) -> Vec<[f64; 2]> {
        match self {
            DensitySpec::Ring { k, radius, .. } => (0..*k)
                .map(|j| {
                    let a = TAU * j as f64 / *k as f64;
                    [radius * a.cos(), radius * a.sin()]
                })
                .collect(),
            _ => Vec::new(),
        }
    }

    pub(crate) fn draw(&self, s: &mut SampleStream, out: &mut [f64]) {
        match self {
            DensitySpec::Gaussian { mean, cov } => {
                let l = cholesky(cov).expect("validated covariance");
                let z: Vec<f64> = (0..mean.len()).map(|_| s.normal()).collect();
                for i in 0..mean.len() {
                    out[i] = mean[i] + (0..=i).map(|j| l[i][j] * z[j]).sum::<f64>();
                }
            }
            DensitySpec::Mixture { components } => {
                let u = s.uniform();
                let mut acc = 0.0;
                let mut pick = components.len() - 1;
                for (i, (w, _)) in components.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        pick = i;
                        break;
                    }
                }
                components[pick].1.draw(s, out);
            }
            DensitySpec::Ring { k, radius, sigma } => {
                let j = s.below(*k);
                let a = TAU * j as f64 / *k as f64;
                out[0] = radius * a.cos() + sigma * s.normal();
                out[1] = radius * a.sin() + sigma * s.normal();
            }
            DensitySpec::Uniform { lo, hi } => {
                for i in 0..lo.len() {
                    out[i] = lo[i] + (hi[i] - lo[i]) * s.uniform();
                }
            }
        }
    }

    /// Natural log of the density at `x`.
    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        match self {
            DensitySpec::Gaussian { mean, cov } => gaussian_log_pdf(mean, cov, x),
            DensitySpec::Mixture { components } => {
                log_sum_exp(components.iter().map(|(w, c)| w.ln() + c.log_pdf(x)))
            }
            DensitySpec::Ring { k, sigma, .. } => {
                let var = sigma * sigma;
                let norm = -(TAU * var).ln() - (*k as f64).ln();
                log_sum_exp(self.ring_centres().iter().map(|c| {
                    let d2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
                    norm - 0.5 * d2 / var
                }))
            }
            DensitySpec::Uniform { lo, hi } => {
                let inside = x
                    .iter()
                    .zip(lo.iter().zip(hi))
                    .all(|(v, (a, b))| *v >= *a && *v <= *b);
                if inside {
                    -lo.iter().zip(hi).map(|(a, b)| (b - a).ln()).sum::<f64>()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        self.log_pdf(x).exp()
    }
}

fn log_sum_exp(terms: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = terms.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// Lower Cholesky factor of a 1×1 or 2×2 SPD matrix.
fn cholesky(cov: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    match cov.len() {
        1 => (cov[0][0] > 0.0).then(|| vec![vec![cov[0][0].sqrt()]]),
        2 => {
            let a = cov[0][0];
            if !(a > 0.0) {
                return None;
            }
            let l00 = a.sqrt();
            let l10 = cov[1][0] / l00;
            let rem = cov[1][1] - l10 * l10;
            (rem > 0.0).then(|| vec![vec![l00, 0.0], vec![l10, rem.sqrt()]])
        }
        _ => None,
    }
}

fn gaussian_log_pdf(mean: &[f64], cov: &[Vec<f64>], x: &[f64]) -> f64 {
    match mean.len() {
        1 => {
            let var = cov[0][0];
            let d = x[0] - mean[0];
            -0.5 * (2.0 * PI * var).ln() - 0.5 * d * d / var
        }
        _ => {
            let (a, b, c) = (cov[0][0], cov[0][1], cov[1][1]);
            let det = a * c - b * b;
            let (d0, d1) = (x[0] - mean[0], x[1] - mean[1]);
            let quad = (c * d0 * d0 - 2.0 * b * d0 * d1 + a * d1 * d1) / det;
            -(TAU).ln() - 0.5 * det.ln() - 0.5 * quad
        }
    }
}

/// `n` i.i.d. draws as an `n × d` matrix; deterministic per seed.
pub fn sample(spec: &DensitySpec, n: usize, seed: u64) -> Result<Array2<f64>> {
    let mut stream = SampleStream::new(seed);
    sample_from(spec, n, &mut stream)
}

/// Like [`sample`], continuing an existing stream.
pub fn sample_from(spec: &DensitySpec, n: usize, stream: &mut SampleStream) -> Result<Array2<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be >= 1".into()));
    }
    spec.validate()?;
    let d = spec.dim();
    let mut out = Array2::zeros((n, d));
    for mut row in out.rows_mut() {
        spec.draw(stream, row.as_slice_mut().expect("standard layout"));
    }
    Ok(out)
}

/// Exact density value.
pub fn pdf(spec: &DensitySpec, x: &[f64]) -> Result<f64> {
    if x.len() != spec.dim() {
        return Err(Error::Shape(format!(
            "point has dimension {}, density has {}",
            x.len(),
            spec.dim()
        )));
    }
    Ok(spec.pdf(x))
}

/// `log g(x) - log f(x)`; `-∞` when only `g` vanishes.
pub fn true_log_ratio(f_spec: &DensitySpec, g_spec: &DensitySpec, x: &[f64]) -> Result<f64> {
    if x.len() != f_spec.dim() || x.len() != g_spec.dim() {
        return Err(Error::Shape(
            "point and densities differ in dimension".into(),
        ));
    }
    let lf = f_spec.log_pdf(x);
    if lf == f64::NEG_INFINITY {
        return Err(Error::UndefinedRatio);
    }
    Ok(g_spec.log_pdf(x) - lf)
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
    format!("[{}]", parts.join(","))
}

impl fmt::Display for DensitySpec {
    /// The config grammar, e.g. `gaussian(mean=[0], cov=[[1]])`,
    /// `mixture(0.5: gaussian(...); 0.5: gaussian(...))`,
    /// `ring(k=8, radius=2, sigma=0.02)`, `uniform(lo=[0,0], hi=[1,1])`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DensitySpec::Gaussian { mean, cov } => {
                let rows: Vec<String> = cov.iter().map(|r| fmt_vec(r)).collect();
                write!(
                    f,
                    "gaussian(mean={}, cov=[{}])",
                    fmt_vec(mean),
                    rows.join(",")
                )
            }
            DensitySpec::Mixture { components } => {
                let parts: Vec<String> = components
                    .iter()
                    .map(|(w, c)| format!("{w}: {c}"))
                    .collect();
                write!(f, "mixture({})", parts.join("; "))
            }
            DensitySpec::Ring { k, radius, sigma } => {
                write!(f, "ring(k={k}, radius={radius}, sigma={sigma})")
            }
            DensitySpec::Uniform { lo, hi } => {
                write!(f, "uniform(lo={}, hi={})", fmt_vec(lo), fmt_vec(hi))
            }
        }
    }
}

impl std::str::FromStr for DensitySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut p = Parser {
            src: s.as_bytes(),
            pos: 0,
        };
        let spec = p.spec()?;
        p.ws();
        if p.pos != p.src.len() {
            return Err(p.error("trailing input"));
        }
        spec.validate()?;
        Ok(spec)
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, what: &str) -> Error {
        Error::Config(format!(
            "density spec: {what} at column {} of `{}`",
            self.pos + 1,
            String::from_utf8_lossy(self.src)
        ))
    }

    fn ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> Result<()> {
        self.ws();
        if self.src.get(self.pos) == Some(&c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected `{}`", c as char)))
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.ws();
        self.src.get(self.pos).copied()
    }

    fn ident(&mut self) -> Result<String> {
        self.ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected a name"));
        }
        Ok(String::from_utf8_lossy(&self.src[start..self.pos]).to_lowercase())
    }

    fn number(&mut self) -> Result<f64> {
        self.ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && matches!(
                self.src[self.pos],
                b'0'..=b'9' | b'.' | b'-' | b'+' | b'e' | b'E' | b'i' | b'n' | b'f'
            )
        {
            self.pos += 1;
        }
        let text = String::from_utf8_lossy(&self.src[start..self.pos]).to_string();
        text.parse::<f64>().map_err(|_| {
            self.pos = start;
            self.error("expected a number")
        })
    }

    fn vector(&mut self) -> Result<Vec<f64>> {
        self.eat(b'[')?;
        let mut out = Vec::new();
        if self.peek() == Some(b']') {
            self.pos += 1;
            return Ok(out);
        }
        loop {
            out.push(self.number()?);
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b']') => {
                    self.pos += 1;
                    return Ok(out);
                }
                _ => return Err(self.error("expected `,` or `]`")),
            }
        }
    }

    fn matrix(&mut self) -> Result<Vec<Vec<f64>>> {
        self.eat(b'[')?;
        let mut out = Vec::new();
        loop {
            out.push(self.vector()?);
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b']') => {
                    self.pos += 1;
                    return Ok(out);
                }
                _ => return Err(self.error("expected `,` or `]`")),
            }
        }
    }

    fn key(&mut self, expected: &str) -> Result<()> {
        let k = self.ident()?;
        if k != expected {
            return Err(self.error(&format!("expected `{expected}=`")));
        }
        self.eat(b'=')
    }

    fn spec(&mut self) -> Result<DensitySpec> {
        let kind = self.ident()?;
        self.eat(b'(')?;
        let spec = match kind.as_str() {
            "gaussian" | "normal" => {
                self.key("mean")?;
                let mean = self.vector()?;
                self.eat(b',')?;
                self.key("cov")?;
                let cov = self.matrix()?;
                DensitySpec::Gaussian { mean, cov }
            }
            "mixture" => {
                let mut components = Vec::new();
                loop {
                    let w = self.number()?;
                    self.eat(b':')?;
                    components.push((w, self.spec()?));
                    if self.peek() == Some(b';') {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                DensitySpec::Mixture { components }
            }
            "ring" => {
                self.key("k")?;
                let k = self.number()?;
                if k < 1.0 || k.fract() != 0.0 {
                    return Err(self.error("k must be a positive integer"));
                }
                self.eat(b',')?;
                self.key("radius")?;
                let radius = self.number()?;
                self.eat(b',')?;
                self.key("sigma")?;
                let sigma = self.number()?;
                DensitySpec::Ring {
                    k: k as usize,
                    radius,
                    sigma,
                }
            }
            "uniform" => {
                self.key("lo")?;
                let lo = self.vector()?;
                self.eat(b',')?;
                self.key("hi")?;
                let hi = self.vector()?;
                DensitySpec::Uniform { lo, hi }
            }
            other => return Err(self.error(&format!("unknown density `{other}`"))),
        };
        self.eat(b')')?;
        Ok(spec)
    }
}
