//! The `lrgan` command line.
//!
//! Exit status: 0 on success, 1 when a check or run fails, 2 for usage and
//! configuration errors. Outputs go under `--out`, else `$LRGAN_OUT`, else
//! `./lrgan-out`; each run directory is written as `<dir>.incomplete` and
//! renamed once complete.

pub mod config;
pub mod svg;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use crate::error::Error;
use crate::ideal_solver::{
    discretize, field_to_csv, minmax_value, solve_minmax_grid, trace_to_csv, DiscreteDensity,
    RatioField,
};
use crate::loss_family::{catalogue, catalogue_lookup, invertible_names, CATALOGUE_NAMES};
use crate::synth::format_samples;
use crate::trainer::{
    column_moments, format_metrics, parse_metrics, train_with, MetricRecord, TrainConfig,
    TrainOutcome,
};
use crate::verify::{verify_loss, Tolerances};
use config::{
    solve_config_from_doc, solve_config_to_text, train_config_from_doc, train_config_to_text,
    train_preset, ConfigDoc, InitKind, SolveConfig,
};
use svg::{emit_svg_lineplot, PlotSpec, Series};

/// Writes a line to stdout, ignoring a closed pipe.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout().lock(), $($t)*);
    }};
}

macro_rules! say_raw {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = write!(std::io::stdout().lock(), $($t)*);
    }};
}

/// Environment variable naming the output root.
pub const OUT_ENV: &str = "LRGAN_OUT";

#[derive(Debug, Parser)]
#[command(
    name = "lrgan",
    version,
    about = "Likelihood-ratio GAN losses: catalogue, verification, ideal solves and toy training"
)]
pub struct Cli {
    /// Output root (overrides $LRGAN_OUT).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the loss catalogue.
    Losses {
        /// Row filter such as subclass=B or invertible=false (repeatable).
        #[arg(long = "filter", value_name = "KEY=VALUE")]
        filters: Vec<String>,
    },
    /// Check the inner maximizer, outer minimizer, min-max value and derivative recipe.
    Verify {
        /// Every catalogue loss.
        #[arg(long)]
        all: bool,
        /// A loss name (repeatable).
        #[arg(long = "loss")]
        losses: Vec<String>,
        #[arg(long)]
        argmax_tol: Option<f64>,
        #[arg(long)]
        minimizer_tol: Option<f64>,
        #[arg(long)]
        value_tol: Option<f64>,
        #[arg(long)]
        derivative_tol: Option<f64>,
    },
    /// Solve the ideal min-max problem on a grid.
    SolveGrid {
        /// Config file with a [solve] section.
        #[arg(long)]
        config: Option<PathBuf>,
        /// The 64-point uniform solve for every invertible loss.
        #[arg(long)]
        all: bool,
        #[arg(long)]
        loss: Option<String>,
        /// Density spec, or `uniform-grid` for equal masses.
        #[arg(long)]
        density: Option<String>,
        #[arg(long)]
        points: Option<usize>,
        /// `[lo, hi]` or `[x_lo, y_lo, x_hi, y_hi]`.
        #[arg(long)]
        window: Option<String>,
        /// `ones`, `random` or `random(seed)`.
        #[arg(long)]
        init: Option<String>,
        /// `solve.key=value` override (repeatable).
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        sets: Vec<String>,
        /// Print the resolved config and exit.
        #[arg(long)]
        echo_config: bool,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Train a generator/discriminator pair.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// shift1d-<loss>, ring2d-<loss>, shift1d-all, ring2d-all or lambda-sweep.
        #[arg(long)]
        preset: Option<String>,
        /// `section.key=value` override (repeatable).
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        sets: Vec<String>,
        /// Print the resolved config(s) and exit.
        #[arg(long)]
        echo_config: bool,
        /// Concurrent runs for multi-run presets.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Run directory name (single runs).
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        quiet: bool,
    },
    /// Re-render plots from a metrics file.
    Report {
        metrics: PathBuf,
        /// Directory for the plots (defaults to the metrics file's directory).
        #[arg(long)]
        plots_dir: Option<PathBuf>,
    },
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::UnknownLoss { .. }
            | Error::Config(_)
            | Error::RequiresInvertible(_)
            | Error::NonCanonicalRange(_)
            | Error::RectifierInExactMode => CliError::Usage(e.to_string()),
            other => CliError::Failed(other.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses arguments, runs the command and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            match &e {
                CliError::Usage(m) => eprintln!("error: {m}"),
                CliError::Failed(m) => eprintln!("failed: {m}"),
            }
            e.exit_code()
        }
    }
}

fn output_root(cli: &Cli) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("lrgan-out"))
}

/// Runs the parsed command; `Ok` carries the exit status.
pub fn execute(cli: &Cli) -> CliResult<i32> {
    let root = output_root(cli);
    match &cli.command {
        Command::Losses { filters } => cmd_losses(filters),
        Command::Verify {
            all,
            losses,
            argmax_tol,
            minimizer_tol,
            value_tol,
            derivative_tol,
        } => {
            let mut tol = Tolerances::default();
            for (slot, v) in [
                (&mut tol.argmax, argmax_tol),
                (&mut tol.minimizer, minimizer_tol),
                (&mut tol.value, value_tol),
                (&mut tol.derivative, derivative_tol),
            ] {
                if let Some(v) = v {
                    *slot = *v;
                }
            }
            cmd_verify(*all, losses, &tol, &root)
        }
        Command::SolveGrid {
            config,
            all,
            loss,
            density,
            points,
            window,
            init,
            sets,
            echo_config,
            jobs,
        } => {
            let mut flag_sets = sets.clone();
            for (key, v) in [
                ("loss", loss.clone()),
                ("density", density.clone()),
                ("n_points", points.map(|p| p.to_string())),
                ("window", window.clone()),
                ("init", init.clone()),
            ] {
                if let Some(v) = v {
                    flag_sets.push(format!("solve.{key}={v}"));
                }
            }
            let configs = solve_configs(config.as_deref(), *all, &flag_sets)?;
            if *echo_config {
                for c in &configs {
                    say_raw!("{}", solve_config_to_text(c));
                }
                return Ok(0);
            }
            cmd_solve_grid(&configs, &root, *jobs)
        }
        Command::Train {
            config,
            preset,
            sets,
            echo_config,
            jobs,
            name,
            quiet,
        } => {
            let runs = train_configs(config.as_deref(), preset.as_deref(), sets, name.as_deref())?;
            if *echo_config {
                for (_, c) in &runs {
                    say_raw!("{}", train_config_to_text(c));
                }
                return Ok(0);
            }
            cmd_train(&runs, &root, *jobs, *quiet)
        }
        Command::Report { metrics, plots_dir } => {
            let text = std::fs::read_to_string(metrics)
                .map_err(|e| CliError::from(Error::io(metrics, e)))?;
            let records = parse_metrics(&text).map_err(|e| CliError::Usage(e.to_string()))?;
            let dir = plots_dir
                .clone()
                .unwrap_or_else(|| metrics.parent().map(Path::to_path_buf).unwrap_or_default());
            std::fs::create_dir_all(&dir).map_err(|e| CliError::from(Error::io(&dir, e)))?;
            for p in write_plots(&records, &dir)? {
                say!("{}", p.display());
            }
            Ok(0)
        }
    }
}

fn cmd_losses(filters: &[String]) -> CliResult<i32> {
    let mut rows: Vec<_> = catalogue().iter().collect();
    for f in filters {
        let (k, v) = f
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("filter `{f}` is not KEY=VALUE")))?;
        let v = v.trim();
        match k.trim() {
            "subclass" => rows.retain(|e| e.subclass.to_string().eq_ignore_ascii_case(v)),
            "invertible" => {
                let want: bool = v.parse().map_err(|_| {
                    CliError::Usage(format!("invertible filter takes true/false, got `{v}`"))
                })?;
                rows.retain(|e| e.loss.ratio_invertible() == want);
            }
            "name" => rows.retain(|e| e.loss.name().eq_ignore_ascii_case(v)),
            other => {
                return Err(CliError::Usage(format!(
                    "unknown filter key `{other}` (subclass, invertible, name)"
                )))
            }
        }
    }
    say!(
        "{:<12} {:<3} {:<22} {:<22} {:<14} {:<9} {:<26} {:<10}",
        "name",
        "sub",
        "phi",
        "psi",
        "rho",
        "J",
        "omega",
        "invertible"
    );
    for e in rows {
        say!(
            "{:<12} {:<3} {:<22} {:<22} {:<14} {:<9} {:<26} {:<10}",
            e.loss.name(),
            e.subclass.to_string(),
            e.phi_text,
            e.psi_text,
            e.rho_text,
            e.loss.range().to_string(),
            e.loss.omega().description(),
            e.loss.ratio_invertible()
        );
        say!("{:<16}note: {}", "", e.derivation_note);
    }
    Ok(0)
}

/// Writes into `<dir>.incomplete` and renames it to `dir` when `fill` succeeds.
/// On failure the partial directory keeps its `.incomplete` suffix.
fn staged<T>(dir: &Path, fill: impl FnOnce(&Path) -> CliResult<T>) -> CliResult<T> {
    let tmp = PathBuf::from(format!("{}.incomplete", dir.display()));
    let io = |p: &Path, e| CliError::from(Error::io(p, e));
    if tmp.exists() {
        std::fs::remove_dir_all(&tmp).map_err(|e| io(&tmp, e))?;
    }
    std::fs::create_dir_all(&tmp).map_err(|e| io(&tmp, e))?;
    let out = fill(&tmp)?;
    if dir.exists() {
        std::fs::remove_dir_all(dir).map_err(|e| io(dir, e))?;
    }
    std::fs::rename(&tmp, dir).map_err(|e| io(dir, e))?;
    Ok(out)
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::from(Error::io(path, e)))
}

fn cmd_verify(all: bool, names: &[String], tol: &Tolerances, root: &Path) -> CliResult<i32> {
    let selected: Vec<String> = if all {
        CATALOGUE_NAMES.iter().map(|s| s.to_string()).collect()
    } else if names.is_empty() {
        return Err(CliError::Usage(
            "choose --all or at least one --loss NAME".into(),
        ));
    } else {
        names.to_vec()
    };
    let entries = selected
        .iter()
        .map(|n| catalogue_lookup(n))
        .collect::<Result<Vec<_>, _>>()?;
    let mut text = String::new();
    let mut json = String::new();
    let mut all_passed = true;
    for e in &entries {
        for report in verify_loss(&e.loss, tol) {
            text.push_str(&report.to_text());
            json.push_str(&report.to_json_lines()?);
            all_passed &= report.passed;
            let status = match (&report.skipped, report.passed) {
                (Some(_), _) => "SKIPPED",
                (None, true) => "PASS",
                (None, false) => "FAIL",
            };
            say!("{:<12} {:<12} {status}", report.loss_name, report.suite);
        }
    }
    let dir = root.join("verify");
    staged(&dir, |tmp| {
        write(&tmp.join("report.txt"), &text)?;
        write(&tmp.join("report.jsonl"), &json)
    })?;
    say!("reports in {}", dir.display());
    Ok(if all_passed { 0 } else { 1 })
}

fn usage_list(errors: Vec<String>) -> CliError {
    CliError::Usage(format!("invalid configuration:\n  {}", errors.join("\n  ")))
}

fn solve_configs(path: Option<&Path>, all: bool, sets: &[String]) -> CliResult<Vec<SolveConfig>> {
    let docs: Vec<ConfigDoc> = if all {
        invertible_names()
            .into_iter()
            .map(|l| ConfigDoc::parse(&solve_config_to_text(&SolveConfig::uniform64(l))))
            .collect::<Result<_, _>>()?
    } else {
        vec![match path {
            Some(p) => ConfigDoc::load(p)?,
            None => ConfigDoc::default(),
        }]
    };
    docs.into_iter()
        .map(|mut doc| {
            for s in sets {
                doc.set(s)?;
            }
            solve_config_from_doc(&doc).map_err(usage_list)
        })
        .collect()
}

fn solve_one(c: &SolveConfig, root: &Path) -> CliResult<String> {
    let loss = catalogue_lookup(&c.loss)?.loss;
    if !loss.ratio_invertible() {
        return Err(Error::RequiresInvertible(loss.name().to_string()).into());
    }
    let f = match &c.density {
        None => DiscreteDensity::uniform(c.n_points)?,
        Some(spec) => discretize(spec, c.n_points, c.window)?,
    };
    let mut note = String::new();
    if let Some(w) = &f.warning {
        note = format!(" (warning: {w})");
    }
    let r0 = match c.init {
        InitKind::Ones => RatioField::ones(f.len()),
        InitKind::Random(seed) => RatioField::random_feasible(&f, seed)?,
    };
    let dir = root.join("solve-grid").join(loss.name().to_lowercase());
    staged(&dir, |tmp| {
        write(&tmp.join("config.txt"), &solve_config_to_text(c))?;
        match solve_minmax_grid(&loss, &f, &r0, &c.options) {
            Ok((r, trace)) => {
                write(&tmp.join("trace.csv"), &trace_to_csv(&trace))?;
                write(&tmp.join("field.csv"), &field_to_csv(&f, &r))?;
                let value = minmax_value(&loss, &r, &f)?;
                Ok(format!(
                    "{:<12} iterations {:>6}  L∞(r-1) = {:.3e}  surrogate objective = {:.9}  min-max value = {:.9}{note}",
                    loss.name(),
                    trace.last().map_or(0, |t| t.iteration),
                    r.linf_to_one(),
                    trace.last().map_or(f64::NAN, |t| t.objective),
                    value
                ))
            }
            Err(Error::Diverged { iterations, trace }) => {
                write(&tmp.join("trace.csv"), &trace_to_csv(&trace))?;
                Err(CliError::Failed(format!(
                    "{}: solver diverged after {iterations} iterations; trace in {}",
                    loss.name(),
                    tmp.display()
                )))
            }
            Err(e) => Err(e.into()),
        }
    })
}

fn pool(jobs: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Failed(e.to_string()))
}

fn cmd_solve_grid(configs: &[SolveConfig], root: &Path, jobs: usize) -> CliResult<i32> {
    let results: Vec<CliResult<String>> =
        pool(jobs)?.install(|| configs.par_iter().map(|c| solve_one(c, root)).collect());
    finish(results)
}

/// Prints successes and reports the worst failure.
fn finish(results: Vec<CliResult<String>>) -> CliResult<i32> {
    let mut worst: Option<CliError> = None;
    for r in results {
        match r {
            Ok(line) => say!("{line}"),
            Err(e) => {
                match &e {
                    CliError::Usage(m) => eprintln!("error: {m}"),
                    CliError::Failed(m) => eprintln!("failed: {m}"),
                }
                if worst.as_ref().is_none_or(|w| e.exit_code() > w.exit_code()) {
                    worst = Some(e);
                }
            }
        }
    }
    Ok(worst.map_or(0, |e| e.exit_code()))
}

fn train_configs(
    path: Option<&Path>,
    preset: Option<&str>,
    sets: &[String],
    name: Option<&str>,
) -> CliResult<Vec<(String, TrainConfig)>> {
    let (base, docs): (PathBuf, Vec<(String, ConfigDoc)>) = match (path, preset) {
        (Some(_), Some(_)) => {
            return Err(CliError::Usage("use either --config or --preset".into()))
        }
        (None, None) => {
            return Err(CliError::Usage(
                "train needs --config FILE or --preset NAME".into(),
            ))
        }
        (Some(p), None) => {
            let stem = p
                .file_stem()
                .map_or("run".into(), |s| s.to_string_lossy().to_string());
            let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
            (base, vec![(stem, ConfigDoc::load(p)?)])
        }
        (None, Some(name)) => {
            let docs = train_preset(name)?
                .into_iter()
                .map(|(n, c)| Ok((n, ConfigDoc::parse(&train_config_to_text(&c))?)))
                .collect::<Result<_, Error>>()?;
            (PathBuf::from("."), docs)
        }
    };
    if name.is_some() && docs.len() > 1 {
        return Err(CliError::Usage("--name applies to single runs only".into()));
    }
    docs.into_iter()
        .map(|(n, mut doc)| {
            for s in sets {
                doc.set(s)?;
            }
            let cfg = train_config_from_doc(&doc, &base).map_err(usage_list)?;
            Ok((name.map_or(n, str::to_string), cfg))
        })
        .collect()
}

fn samples_csv(o: &TrainOutcome, tmp: &Path) -> CliResult<()> {
    let ckpt = tmp.join("checkpoints");
    std::fs::create_dir_all(&ckpt).map_err(|e| CliError::from(Error::io(&ckpt, e)))?;
    for s in &o.snapshots {
        write(
            &tmp.join(format!("samples_{}.csv", s.iteration)),
            &format_samples(&s.samples),
        )?;
        write(
            &ckpt.join(format!("generator_{}.json", s.iteration)),
            &s.generator.to_json()?,
        )?;
        write(
            &ckpt.join(format!("discriminator_{}.json", s.iteration)),
            &s.discriminator.to_json()?,
        )?;
    }
    if let Some(s) = o.final_samples() {
        write(&tmp.join("samples_final.csv"), &format_samples(s))?;
    }
    write(&tmp.join("generator.json"), &o.generator.to_json()?)?;
    write(&tmp.join("discriminator.json"), &o.discriminator.to_json()?)?;
    write(&tmp.join("metrics.csv"), &format_metrics(&o.metrics))?;
    if !o.metrics.is_empty() {
        write_plots(&o.metrics, tmp)?;
    }
    Ok(())
}

fn train_one(name: &str, cfg: &TrainConfig, root: &Path, quiet: bool) -> CliResult<String> {
    let loss = cfg.loss_pair()?;
    let dir = root.join("train").join(name);
    staged(&dir, |tmp| {
        write(&tmp.join("config.txt"), &train_config_to_text(cfg))?;
        let mut progress = |m: &MetricRecord| {
            if !quiet {
                let lr =
                    m.lr.map_or("-".to_string(), |s| format!("{:.4}", s.real_mean));
                say!(
                    "[{name}] iter {:>6}  disc {:>10.5}  gen {:>10.5}  penalty {:.3e}  lr_real {lr}  swd {:.4}",
                    m.iteration, m.disc_objective, m.gen_objective, m.penalty, m.swd
                );
            }
        };
        match train_with(cfg, &loss, None, &mut progress) {
            Ok(o) => {
                samples_csv(&o, tmp)?;
                let moments = o.final_samples().map(column_moments).unwrap_or_default();
                let parts: Vec<String> = moments
                    .iter()
                    .map(|(m, s)| format!("{m:.4}±{s:.4}"))
                    .collect();
                Ok(format!("{name}: done, final samples {}", parts.join(" ")))
            }
            Err(Error::TrainingAborted {
                iteration,
                reason,
                last_good,
            }) => {
                samples_csv(&last_good, tmp)?;
                Err(CliError::Failed(format!(
                    "{name}: aborted at iteration {iteration} ({reason}); last good state in {}",
                    tmp.display()
                )))
            }
            Err(e) => Err(e.into()),
        }
    })
}

fn cmd_train(
    runs: &[(String, TrainConfig)],
    root: &Path,
    jobs: usize,
    quiet: bool,
) -> CliResult<i32> {
    let results: Vec<CliResult<String>> = pool(jobs)?.install(|| {
        runs.par_iter()
            .map(|(n, c)| train_one(n, c, root, quiet))
            .collect()
    });
    finish(results)
}

/// Writes `ratio.svg` (when ratio columns exist), `objectives.svg` and
/// `distances.svg` into `dir`.
pub fn write_plots(records: &[MetricRecord], dir: &Path) -> crate::error::Result<Vec<PathBuf>> {
    let x = |r: &MetricRecord| r.iteration as f64;
    let series = |name: &str, f: &dyn Fn(&MetricRecord) -> Option<f64>| {
        Series::new(
            name,
            records
                .iter()
                .filter_map(|r| f(r).map(|y| (x(r), y)))
                .collect(),
        )
    };
    let plot = |title: &str, y: &str, reference_y| PlotSpec {
        title: title.into(),
        x_label: "generator iteration".into(),
        y_label: y.into(),
        reference_y,
    };
    let mut written = Vec::new();
    if records.iter().any(|r| r.lr.is_some()) {
        let p = dir.join("ratio.svg");
        emit_svg_lineplot(
            &[
                series("lr_real_mean", &|r| r.lr.map(|s| s.real_mean)),
                series("lr_gen_mean", &|r| r.lr.map(|s| s.gen_mean)),
                series("lr_train_real_mean", &|r| r.lr_train.map(|s| s.real_mean)),
            ],
            &plot("Estimated likelihood ratio", "mean r", Some(1.0)),
            &p,
        )?;
        written.push(p);
    }
    let p = dir.join("objectives.svg");
    emit_svg_lineplot(
        &[
            series("disc_objective", &|r| Some(r.disc_objective)),
            series("gen_objective", &|r| Some(r.gen_objective)),
            series("penalty", &|r| Some(r.penalty)),
        ],
        &plot("Objectives", "value", None),
        &p,
    )?;
    written.push(p);
    let p = dir.join("distances.svg");
    emit_svg_lineplot(
        &[
            series("mmd", &|r| Some(r.mmd)),
            series("swd", &|r| Some(r.swd)),
        ],
        &plot("Distance to target", "value", None),
        &p,
    )?;
    written.push(p);
    Ok(written)
}
