//! Plain-text configuration: `key = value` lines grouped under `[section]`
//! headers, `#` comments, blank lines ignored.
//!
//! Training configs use the sections `[train]`, `[data]`, `[generator]` and
//! `[discriminator]`; grid solves use `[solve]`. `data.target` and
//! `data.origin` take density specs such as `gaussian(mean=[4], cov=[[1]])`;
//! the target may also be `file(path/to/samples.csv)`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::ideal_solver::{SolverOptions, Window};
use crate::loss_family::catalogue_lookup;
use crate::nn::{parse_squashing, Activation, NetSpec, PenaltyMode, PenaltyVariant};
use crate::synth::DensitySpec;
use crate::trainer::{DataSource, TrainConfig};

/// Parsed `section -> key -> value` entries.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigDoc {
    pub entries: BTreeMap<String, BTreeMap<String, String>>,
}

impl ConfigDoc {
    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = ConfigDoc::default();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| {
                    Error::Config(format!("line {}: unclosed section header", i + 1))
                })?;
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            if section.is_empty() {
                return Err(Error::Config(format!(
                    "line {}: key outside any [section]",
                    i + 1
                )));
            }
            let key = k.trim().to_string();
            let slot = doc.entries.entry(section.clone()).or_default();
            if slot.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!(
                    "line {}: duplicate key {section}.{key}",
                    i + 1
                )));
            }
        }
        Ok(doc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Applies a `section.key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (path, value) = assignment.split_once('=').ok_or_else(|| {
            Error::Config(format!("override `{assignment}` is not section.key=value"))
        })?;
        let (section, key) = path
            .trim()
            .split_once('.')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` lacks a section")))?;
        self.entries
            .entry(section.to_string())
            .or_default()
            .insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.entries.get(section)?.get(key).map(String::as_str)
    }
}

/// Collects every problem with a document instead of stopping at the first.
struct Reader<'a> {
    doc: &'a ConfigDoc,
    used: Vec<(String, String)>,
    errors: Vec<String>,
}

impl<'a> Reader<'a> {
    fn new(doc: &'a ConfigDoc) -> Self {
        Self {
            doc,
            used: Vec::new(),
            errors: Vec::new(),
        }
    }

    fn raw(&mut self, section: &str, key: &str) -> Option<&'a str> {
        self.used.push((section.to_string(), key.to_string()));
        self.doc.get(section, key)
    }

    fn required(&mut self, section: &str, key: &str) -> Option<&'a str> {
        let v = self.raw(section, key);
        if v.is_none() {
            self.errors
                .push(format!("missing required key {section}.{key}"));
        }
        v
    }

    fn parsed<T>(
        &mut self,
        section: &str,
        key: &str,
        parse: impl FnOnce(&str) -> std::result::Result<T, String>,
    ) -> Option<T> {
        let v = self.raw(section, key)?;
        match parse(v) {
            Ok(t) => Some(t),
            Err(e) => {
                self.errors.push(format!("{section}.{key} = {v}: {e}"));
                None
            }
        }
    }

    fn num<T: std::str::FromStr>(&mut self, section: &str, key: &str, slot: &mut T) {
        if let Some(v) = self.parsed(section, key, |s| {
            s.parse::<T>().map_err(|_| "not a valid number".to_string())
        }) {
            *slot = v;
        }
    }

    fn finish(mut self, sections: &[&str]) -> std::result::Result<(), Vec<String>> {
        for (section, keys) in &self.doc.entries {
            if !sections.contains(&section.as_str()) {
                self.errors.push(format!("unknown section [{section}]"));
                continue;
            }
            for key in keys.keys() {
                if !self.used.iter().any(|(s, k)| s == section && k == key) {
                    self.errors.push(format!("unknown key {section}.{key}"));
                }
            }
        }
        if self.errors.is_empty() {
            Ok(())
        } else {
            Err(self.errors)
        }
    }
}

fn parse_widths(s: &str) -> std::result::Result<Vec<usize>, String> {
    let inner = s
        .trim()
        .strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .ok_or("expected a list like [1, 64, 64, 1]")?;
    inner
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| format!("bad width `{}`", t.trim()))
        })
        .collect()
}

fn fmt_widths(w: &[usize]) -> String {
    let parts: Vec<String> = w.iter().map(|v| v.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

fn parse_target(s: &str, base: &Path) -> std::result::Result<DataSource, String> {
    if let Some(rest) = s.trim().strip_prefix("file(") {
        let p = rest.strip_suffix(')').ok_or("unclosed file(...)")?.trim();
        let path = if Path::new(p).is_absolute() {
            PathBuf::from(p)
        } else {
            base.join(p)
        };
        return DataSource::from_file(path).map_err(|e| e.to_string());
    }
    s.parse::<DensitySpec>()
        .map(DataSource::Density)
        .map_err(|e| e.to_string())
}

fn parse_penalty_mode(s: &str) -> std::result::Result<PenaltyMode, String> {
    let s = s.trim();
    if s == "exact" {
        return Ok(PenaltyMode::Exact);
    }
    if s == "finite-difference" {
        return Ok(PenaltyMode::FiniteDifference { step: 1e-5 });
    }
    if let Some(rest) = s.strip_prefix("finite-difference(") {
        let step = rest
            .strip_suffix(')')
            .and_then(|t| t.trim().parse::<f64>().ok())
            .ok_or("expected finite-difference(step)")?;
        return Ok(PenaltyMode::FiniteDifference { step });
    }
    Err("expected exact or finite-difference(step)".into())
}

fn read_net(r: &mut Reader, section: &str, spec: &mut NetSpec) {
    if let Some(w) = r.parsed(section, "widths", parse_widths) {
        spec.widths = w;
    }
    if let Some(a) = r.parsed(section, "hidden", |s| {
        s.parse::<Activation>().map_err(|e| e.to_string())
    }) {
        spec.hidden = a;
    }
    if let Some(o) = r.parsed(section, "output", |s| {
        parse_squashing(s).map_err(|e| e.to_string())
    }) {
        spec.output = o;
    }
    r.num(section, "seed", &mut spec.seed);
}

/// Builds a training config; defaults follow [`TrainConfig::new`]. Relative
/// sample-file paths resolve against `base`. Every problem is reported.
pub fn train_config_from_doc(
    doc: &ConfigDoc,
    base: &Path,
) -> std::result::Result<TrainConfig, Vec<String>> {
    let mut r = Reader::new(doc);
    let loss = r.required("train", "loss");
    let target = r
        .required("data", "target")
        .and_then(|v| match parse_target(v, base) {
            Ok(t) => Some(t),
            Err(e) => {
                r.errors.push(format!("data.target = {v}: {e}"));
                None
            }
        });
    let origin = r.parsed("data", "origin", |s| {
        s.parse::<DensitySpec>().map_err(|e| e.to_string())
    });
    if origin.is_none() && doc.get("data", "origin").is_none() {
        r.errors.push("missing required key data.origin".into());
    }
    let mut seed = 0u64;
    r.num("train", "seed", &mut seed);
    let mut cfg = match (loss, target, origin) {
        (Some(l), Some(t), Some(o)) => match TrainConfig::new(l, t, o, seed) {
            Ok(c) => Some(c),
            Err(e) => {
                r.errors.push(format!("train.loss = {l}: {e}"));
                None
            }
        },
        _ => None,
    };
    // a scratch config still validates the remaining keys when the core ones failed
    let mut scratch = TrainConfig::shift_1d("MSE", seed).expect("built-in preset");
    let c = cfg.as_mut().unwrap_or(&mut scratch);
    r.num("train", "lambda", &mut c.lambda);
    if let Some(p) = r.parsed("train", "penalty", |s| {
        s.parse::<PenaltyVariant>().map_err(|e| e.to_string())
    }) {
        c.penalty = p;
    }
    if let Some(m) = r.parsed("train", "penalty_mode", parse_penalty_mode) {
        c.penalty_mode = m;
    }
    r.num("train", "critic_iters", &mut c.critic_iters);
    r.num("train", "batch_size", &mut c.batch_size);
    r.num("train", "learning_rate", &mut c.learning_rate);
    r.num("train", "beta1", &mut c.beta1);
    r.num("train", "beta2", &mut c.beta2);
    r.num("train", "adam_eps", &mut c.adam_eps);
    r.num(
        "train",
        "total_generator_iters",
        &mut c.total_generator_iters,
    );
    r.num("train", "eval_every", &mut c.eval_every);
    r.num("train", "eval_batch", &mut c.eval_batch);
    r.num("train", "mmd_samples", &mut c.mmd_samples);
    r.num("train", "swd_projections", &mut c.swd_projections);
    r.num("train", "snapshot_every", &mut c.snapshot_every);
    read_net(&mut r, "generator", &mut c.generator);
    read_net(&mut r, "discriminator", &mut c.discriminator);
    let result = r.finish(&["train", "data", "generator", "discriminator"]);
    let mut errors = result.err().unwrap_or_default();
    let Some(cfg) = cfg else {
        return Err(errors);
    };
    if errors.is_empty() {
        let checked = catalogue_lookup(&cfg.loss).and_then(|e| cfg.validate_for(&e.loss));
        if let Err(e) = checked {
            errors.push(e.to_string());
        }
    }
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(errors)
    }
}

/// Writes every setting of a training config; parsing the text back gives
/// the same config.
pub fn train_config_to_text(c: &TrainConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "[train]");
    let _ = writeln!(out, "loss = {}", c.loss);
    let _ = writeln!(out, "seed = {}", c.seed);
    let _ = writeln!(out, "lambda = {}", c.lambda);
    let _ = writeln!(out, "penalty = {}", c.penalty);
    let mode = match c.penalty_mode {
        PenaltyMode::Exact => "exact".to_string(),
        PenaltyMode::FiniteDifference { step } => format!("finite-difference({step})"),
    };
    let _ = writeln!(out, "penalty_mode = {mode}");
    let _ = writeln!(out, "critic_iters = {}", c.critic_iters);
    let _ = writeln!(out, "batch_size = {}", c.batch_size);
    let _ = writeln!(out, "learning_rate = {}", c.learning_rate);
    let _ = writeln!(out, "beta1 = {}", c.beta1);
    let _ = writeln!(out, "beta2 = {}", c.beta2);
    let _ = writeln!(out, "adam_eps = {}", c.adam_eps);
    let _ = writeln!(out, "total_generator_iters = {}", c.total_generator_iters);
    let _ = writeln!(out, "eval_every = {}", c.eval_every);
    let _ = writeln!(out, "eval_batch = {}", c.eval_batch);
    let _ = writeln!(out, "mmd_samples = {}", c.mmd_samples);
    let _ = writeln!(out, "swd_projections = {}", c.swd_projections);
    let _ = writeln!(out, "snapshot_every = {}", c.snapshot_every);
    let _ = writeln!(out, "\n[data]");
    match &c.target {
        DataSource::Density(d) => {
            let _ = writeln!(out, "target = {d}");
        }
        DataSource::Samples { path, .. } => {
            let _ = writeln!(out, "target = file({})", path.display());
        }
    }
    let _ = writeln!(out, "origin = {}", c.origin);
    for (name, spec) in [
        ("generator", &c.generator),
        ("discriminator", &c.discriminator),
    ] {
        let _ = writeln!(out, "\n[{name}]");
        let _ = writeln!(out, "widths = {}", fmt_widths(&spec.widths));
        let _ = writeln!(out, "hidden = {}", spec.hidden);
        let _ = writeln!(out, "output = {}", spec.output.name());
        let _ = writeln!(out, "seed = {}", spec.seed);
    }
    out
}

/// How the grid solver is started.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitKind {
    Ones,
    Random(u64),
}

/// Settings of one `solve-grid` run.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveConfig {
    pub loss: String,
    /// `None` means equal masses on `n_points` points.
    pub density: Option<DensitySpec>,
    pub n_points: usize,
    pub window: Window,
    pub init: InitKind,
    pub options: SolverOptions,
}

impl SolveConfig {
    /// Uniform masses on 64 points, random start from seed 0.
    pub fn uniform64(loss: &str) -> Self {
        Self {
            loss: loss.to_string(),
            density: None,
            n_points: 64,
            window: Window::Interval(0.0, 1.0),
            init: InitKind::Random(0),
            options: SolverOptions::default(),
        }
    }
}

fn parse_window(s: &str) -> std::result::Result<Window, String> {
    let nums: Vec<f64> = s
        .trim()
        .trim_start_matches('[')
        .trim_end_matches(']')
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad number `{}`", t.trim()))
        })
        .collect::<std::result::Result<_, _>>()?;
    match nums[..] {
        [lo, hi] => Ok(Window::Interval(lo, hi)),
        [x0, y0, x1, y1] => Ok(Window::Box([x0, y0], [x1, y1])),
        _ => Err("expected [lo, hi] or [x_lo, y_lo, x_hi, y_hi]".into()),
    }
}

fn parse_init(s: &str) -> std::result::Result<InitKind, String> {
    match s.trim() {
        "ones" => Ok(InitKind::Ones),
        "random" => Ok(InitKind::Random(0)),
        other => other
            .strip_prefix("random(")
            .and_then(|t| t.strip_suffix(')'))
            .and_then(|t| t.trim().parse().ok())
            .map(InitKind::Random)
            .ok_or_else(|| "expected ones, random or random(seed)".into()),
    }
}

/// Reads the `[solve]` section.
pub fn solve_config_from_doc(doc: &ConfigDoc) -> std::result::Result<SolveConfig, Vec<String>> {
    let mut r = Reader::new(doc);
    let loss = r.required("solve", "loss").unwrap_or("MSE").to_string();
    let mut c = SolveConfig::uniform64(&loss);
    if let Some(d) = r.parsed("solve", "density", |s| {
        if s.trim() == "uniform-grid" {
            Ok(None)
        } else {
            s.parse::<DensitySpec>()
                .map(Some)
                .map_err(|e| e.to_string())
        }
    }) {
        c.density = d;
    }
    r.num("solve", "n_points", &mut c.n_points);
    if let Some(w) = r.parsed("solve", "window", parse_window) {
        c.window = w;
    }
    if let Some(i) = r.parsed("solve", "init", parse_init) {
        c.init = i;
    }
    r.num("solve", "step", &mut c.options.step);
    r.num("solve", "max_iters", &mut c.options.max_iters);
    r.num("solve", "tol", &mut c.options.tol);
    let mut errors = r.finish(&["solve"]).err().unwrap_or_default();
    if let Err(e) = catalogue_lookup(&c.loss) {
        errors.push(e.to_string());
    }
    if errors.is_empty() {
        Ok(c)
    } else {
        Err(errors)
    }
}

pub fn solve_config_to_text(c: &SolveConfig) -> String {
    let mut out = String::from("[solve]\n");
    let _ = writeln!(out, "loss = {}", c.loss);
    match &c.density {
        Some(d) => {
            let _ = writeln!(out, "density = {d}");
        }
        None => {
            let _ = writeln!(out, "density = uniform-grid");
        }
    }
    let _ = writeln!(out, "n_points = {}", c.n_points);
    let window = match c.window {
        Window::Interval(a, b) => format!("[{a}, {b}]"),
        Window::Box(lo, hi) => format!("[{}, {}, {}, {}]", lo[0], lo[1], hi[0], hi[1]),
    };
    let _ = writeln!(out, "window = {window}");
    let init = match c.init {
        InitKind::Ones => "ones".to_string(),
        InitKind::Random(s) => format!("random({s})"),
    };
    let _ = writeln!(out, "init = {init}");
    let _ = writeln!(out, "step = {}", c.options.step);
    let _ = writeln!(out, "max_iters = {}", c.options.max_iters);
    let _ = writeln!(out, "tol = {}", c.options.tol);
    out
}

/// Named training presets: `shift1d-<loss>`, `ring2d-<loss>`, and
/// `lambda-sweep` (the 1D MSE task at λ ∈ {0.01, 0.1, 1, 10}).
/// `shift1d-all` and `ring2d-all` expand to every catalogue loss.
pub fn train_preset(name: &str) -> Result<Vec<(String, TrainConfig)>> {
    let all = |make: fn(&str, u64) -> Result<TrainConfig>,
               prefix: &str|
     -> Result<Vec<(String, TrainConfig)>> {
        crate::loss_family::CATALOGUE_NAMES
            .iter()
            .map(|l| Ok((format!("{prefix}-{}", l.to_lowercase()), make(l, 0)?)))
            .collect()
    };
    match name {
        "lambda-sweep" => [0.01, 0.1, 1.0, 10.0]
            .iter()
            .map(|&lambda| {
                let mut c = TrainConfig::shift_1d("MSE", 0)?;
                c.lambda = lambda;
                Ok((format!("lambda-{lambda}"), c))
            })
            .collect(),
        "shift1d-all" => all(TrainConfig::shift_1d, "shift1d"),
        "ring2d-all" => all(TrainConfig::ring_2d, "ring2d"),
        _ => {
            if let Some(loss) = name.strip_prefix("shift1d-") {
                Ok(vec![(name.to_string(), TrainConfig::shift_1d(loss, 0)?)])
            } else if let Some(loss) = name.strip_prefix("ring2d-") {
                Ok(vec![(name.to_string(), TrainConfig::ring_2d(loss, 0)?)])
            } else {
                Err(Error::Config(format!(
                    "unknown preset `{name}` (expected shift1d-<loss>, ring2d-<loss>, shift1d-all, ring2d-all or lambda-sweep)"
                )))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echo_round_trips() {
        for name in ["shift1d-mse", "ring2d-crossentropy", "shift1d-hinge"] {
            for (_, mut c) in train_preset(name).unwrap() {
                c.penalty_mode = PenaltyMode::FiniteDifference { step: 2.5e-6 };
                c.learning_rate = 3.3e-5;
                let text = train_config_to_text(&c);
                let back = train_config_from_doc(&ConfigDoc::parse(&text).unwrap(), Path::new("."))
                    .unwrap();
                assert_eq!(back, c);
                assert_eq!(train_config_to_text(&back), text);
            }
        }
        let s = SolveConfig::uniform64("A3");
        let back =
            solve_config_from_doc(&ConfigDoc::parse(&solve_config_to_text(&s)).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn missing_target_is_named() {
        let doc = ConfigDoc::parse(
            "[train]\nloss = MSE\n[data]\norigin = gaussian(mean=[0], cov=[[1]])\n",
        )
        .unwrap();
        let errs = train_config_from_doc(&doc, Path::new(".")).unwrap_err();
        assert_eq!(errs, vec!["missing required key data.target".to_string()]);
    }

    #[test]
    fn all_problems_listed() {
        let text = "[train]\nloss = MSE\nlambda = much\nbogus = 1\n[data]\ntarget = gaussian(mean=[4], cov=[[1]])\norigin = gaussian(mean=[0], cov=[[1]])\n[generator]\nwidths = [1, 8]\n";
        let errs =
            train_config_from_doc(&ConfigDoc::parse(text).unwrap(), Path::new(".")).unwrap_err();
        assert!(errs.iter().any(|e| e.contains("train.lambda")));
        assert!(errs.iter().any(|e| e.contains("unknown key train.bogus")));
        assert_eq!(errs.len(), 2);
    }

    #[test]
    fn overrides_and_syntax_errors() {
        let mut doc = ConfigDoc::default();
        doc.set("train.lambda=0.1").unwrap();
        assert_eq!(doc.get("train", "lambda"), Some("0.1"));
        assert!(doc.set("lambda=0.1").is_err());
        assert!(ConfigDoc::parse("loss = MSE").is_err());
        assert!(ConfigDoc::parse("[train]\nloss MSE").is_err());
        assert!(ConfigDoc::parse("[train]\na = 1\na = 2").is_err());
    }

    #[test]
    fn lambda_sweep_has_four_runs() {
        let runs = train_preset("lambda-sweep").unwrap();
        let lambdas: Vec<f64> = runs.iter().map(|(_, c)| c.lambda).collect();
        assert_eq!(lambdas, vec![0.01, 0.1, 1.0, 10.0]);
        assert!(train_preset("nope").is_err());
    }
}
