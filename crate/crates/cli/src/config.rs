//! Experiment configuration: a flat TOML file overlaid by command-line flags.
//!
//! Every resolved value remembers where it came from so validation errors can
//! point at `file:line` or at the offending flag.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use serde::Deserialize;
use thermaldrift::sampler::{build_grid_ensemble, Ensemble, Model};
use toml::Spanned;

use crate::error::{CliError, CliResult};

/// Largest N the desk-scale step constant allows at the top of a sweep.
pub const DESK_MAX_STEPS: f64 = 5e4;
/// `ε₀^{−2/3}` for `ε₀ = 10⁻⁶`.
pub const PAPER_SCALE_FACTOR: f64 = 1e4;
pub const MAX_SITES: usize = thermaldrift::pauli::DEFAULT_DENSE_LIMIT;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Sample,
    Scaling,
    Marginal,
    Tradeoff,
    Levelstats,
    VerifyCircuit,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Sample,
        Experiment::Scaling,
        Experiment::Marginal,
        Experiment::Tradeoff,
        Experiment::Levelstats,
        Experiment::VerifyCircuit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Sample => "sample",
            Experiment::Scaling => "scaling",
            Experiment::Marginal => "marginal",
            Experiment::Tradeoff => "tradeoff",
            Experiment::Levelstats => "levelstats",
            Experiment::VerifyCircuit => "verify-circuit",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown experiment {s:?}"))
    }
}

/// Flags shared by every subcommand. Anything set here overrides the file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// heisenberg or tfim.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    /// Common coupling bound h_j.
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub beta_min: Option<f64>,
    #[arg(long)]
    pub beta_max: Option<f64>,
    #[arg(long)]
    pub beta_points: Option<usize>,
    /// Step exponent, N = round(C β^k). Repeatable.
    #[arg(long)]
    pub k: Vec<f64>,
    /// C in N = round(C β^k).
    #[arg(long)]
    pub step_constant: Option<f64>,
    /// Fixed step count, bypassing C and k.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub mc_count: Option<usize>,
    /// Index of the histogrammed coefficient in the marginal experiment.
    #[arg(long)]
    pub axis: Option<usize>,
    /// Inverse temperature of the initial Heisenberg states in levelstats.
    #[arg(long)]
    pub initial_beta: Option<f64>,
    /// Random cases per system size in verify-circuit.
    #[arg(long)]
    pub cases: Option<usize>,
    /// Use C = λ²·10⁴ unless a step constant is given. Slow.
    #[arg(long)]
    pub paper_scale: bool,
    /// Include density matrices in sample records.
    #[arg(long)]
    pub dump_states: bool,
    /// Worker threads; defaults to THERMALDRIFT_THREADS, then all cores.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    experiment: Option<Spanned<String>>,
    model: Option<Spanned<String>>,
    rows: Option<Spanned<i64>>,
    cols: Option<Spanned<i64>>,
    h: Option<Spanned<f64>>,
    beta: Option<Spanned<f64>>,
    beta_min: Option<Spanned<f64>>,
    beta_max: Option<Spanned<f64>>,
    beta_points: Option<Spanned<i64>>,
    k: Option<Spanned<OneOrMany>>,
    step_constant: Option<Spanned<f64>>,
    steps: Option<Spanned<i64>>,
    runs: Option<Spanned<i64>>,
    mc_count: Option<Spanned<i64>>,
    seed: Option<Spanned<i64>>,
    out: Option<Spanned<String>>,
    dump_states: Option<Spanned<bool>>,
    paper_scale: Option<Spanned<bool>>,
    axis: Option<Spanned<i64>>,
    initial_beta: Option<Spanned<f64>>,
    theta_offset: Option<Spanned<f64>>,
    cases: Option<Spanned<i64>>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    fn into_vec(self) -> Vec<f64> {
        match self {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Origin {
    Default,
    File { path: String, line: usize },
    Flag(&'static str),
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Default => f.write_str("default"),
            Origin::File { path, line } => write!(f, "{path}:{line}"),
            Origin::Flag(name) => write!(f, "--{name}"),
        }
    }
}

#[derive(Debug, Clone)]
struct Setting<T> {
    value: T,
    origin: Origin,
}

impl<T> Setting<T> {
    fn fail<R>(&self, msg: impl fmt::Display) -> CliResult<R> {
        Err(CliError::Validation(format!("{}: {msg}", self.origin)))
    }
}

struct Source<'a> {
    path: String,
    text: &'a str,
}

impl Source<'_> {
    fn line_of(&self, offset: usize) -> usize {
        self.text[..offset.min(self.text.len())].matches('\n').count() + 1
    }

    fn origin<T>(&self, s: &Spanned<T>) -> Origin {
        Origin::File {
            path: self.path.clone(),
            line: self.line_of(s.span().start),
        }
    }
}

/// Picks the flag if present, else the file value, else the default.
fn pick<T, U>(
    flag: Option<T>,
    name: &'static str,
    file: Option<Spanned<U>>,
    src: Option<&Source<'_>>,
    convert: impl FnOnce(U, &Origin) -> CliResult<T>,
    default: T,
) -> CliResult<Setting<T>> {
    if let Some(value) = flag {
        return Ok(Setting {
            value,
            origin: Origin::Flag(name),
        });
    }
    match (file, src) {
        (Some(s), Some(src)) => {
            let origin = src.origin(&s);
            let value = convert(s.into_inner(), &origin)?;
            Ok(Setting { value, origin })
        }
        _ => Ok(Setting {
            value: default,
            origin: Origin::Default,
        }),
    }
}

fn same<T>(v: T, _: &Origin) -> CliResult<T> {
    Ok(v)
}

fn count(v: i64, origin: &Origin) -> CliResult<usize> {
    usize::try_from(v).map_err(|_| CliError::Validation(format!("{origin}: expected a nonnegative integer, got {v}")))
}

fn seed(v: i64, origin: &Origin) -> CliResult<u64> {
    u64::try_from(v).map_err(|_| CliError::Validation(format!("{origin}: seed must be nonnegative, got {v}")))
}

fn option<T, U>(
    flag: Option<T>,
    name: &'static str,
    file: Option<Spanned<U>>,
    src: Option<&Source<'_>>,
    convert: impl FnOnce(U, &Origin) -> CliResult<T>,
) -> CliResult<Option<Setting<T>>> {
    let present = flag.is_some() || (file.is_some() && src.is_some());
    let s = pick(flag.map(Some), name, file, src, |u, o| convert(u, o).map(Some), None)?;
    Ok(present.then(|| Setting {
        value: s.value.expect("present"),
        origin: s.origin,
    }))
}

/// Fully resolved experiment settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub experiment: Experiment,
    pub model: Model,
    pub rows: usize,
    pub cols: usize,
    pub h: f64,
    pub betas: Vec<f64>,
    pub ks: Vec<f64>,
    /// `None` derives C from the ensemble (desk or paper scale).
    pub step_constant: Option<f64>,
    pub steps: Option<usize>,
    pub runs: usize,
    pub mc_count: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub dump_states: bool,
    pub paper_scale: bool,
    pub axis: usize,
    pub initial_beta: f64,
    pub theta_offset: f64,
    pub cases: usize,
}

struct Defaults {
    model: Model,
    rows: usize,
    cols: usize,
    betas: Vec<f64>,
    ks: Vec<f64>,
    runs: usize,
    mc_count: usize,
    axis: usize,
}

fn defaults(e: Experiment) -> Defaults {
    let base = Defaults {
        model: Model::Heisenberg,
        rows: 2,
        cols: 2,
        betas: vec![1.0],
        ks: vec![2.0],
        runs: 5,
        mc_count: 10_000,
        axis: 1,
    };
    match e {
        Experiment::Sample | Experiment::VerifyCircuit => base,
        Experiment::Scaling => Defaults {
            cols: 3,
            betas: linspace(1.0, 6.0, 6),
            ks: vec![1.5, 2.0, 2.5],
            runs: 30,
            ..base
        },
        Experiment::Marginal => Defaults {
            betas: vec![2.0],
            runs: 10_000,
            ..base
        },
        Experiment::Tradeoff => Defaults {
            betas: vec![3.0],
            ks: vec![1.0, 1.5, 2.0, 2.5, 3.0],
            runs: 30,
            ..base
        },
        Experiment::Levelstats => Defaults {
            model: Model::Tfim,
            cols: 3,
            betas: vec![2.0],
            runs: 20,
            ..base
        },
    }
}

pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

impl Settings {
    /// Defaults for `experiment` with no file and no flags.
    pub fn defaults(experiment: Experiment) -> Self {
        Self::resolve(experiment, &Overrides::default()).expect("defaults are valid")
    }

    /// Reads `flags.config` if given and overlays the flags.
    pub fn resolve(experiment: Experiment, flags: &Overrides) -> CliResult<Self> {
        match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                Self::resolve_text(experiment, Some((path, &text)), flags)
            }
            None => Self::resolve_text(experiment, None, flags),
        }
    }

    pub fn resolve_text(experiment: Experiment, file: Option<(&Path, &str)>, flags: &Overrides) -> CliResult<Self> {
        let src = file.map(|(path, text)| Source {
            path: path.display().to_string(),
            text,
        });
        let cfg: FileConfig = match &src {
            Some(src) => toml::from_str(src.text).map_err(|e| {
                let line = e.span().map(|s| src.line_of(s.start)).unwrap_or(1);
                CliError::Validation(format!("{}:{line}: {}", src.path, e.message().trim_end()))
            })?,
            None => FileConfig::default(),
        };
        let src = src.as_ref();

        if let (Some(e), Some(src)) = (&cfg.experiment, src) {
            if e.get_ref() != experiment.name() {
                return Err(CliError::Validation(format!(
                    "{}: experiment {:?} does not match subcommand {experiment}",
                    src.origin(e),
                    e.get_ref()
                )));
            }
        }

        let d = defaults(experiment);
        let model = pick(
            flags.model.clone(),
            "model",
            cfg.model,
            src,
            same,
            d.model.to_string(),
        )?;
        let model_value = model.value.parse::<Model>().or_else(|e| model.fail(e))?;
        let rows = pick(flags.rows, "rows", cfg.rows, src, count, d.rows)?;
        let cols = pick(flags.cols, "cols", cfg.cols, src, count, d.cols)?;
        let h = pick(flags.h, "h", cfg.h, src, same, 1.0)?;
        let k = pick(
            (!flags.k.is_empty()).then(|| flags.k.clone()),
            "k",
            cfg.k,
            src,
            |v, _| Ok(v.into_vec()),
            d.ks,
        )?;
        let step_constant = option(flags.step_constant, "step-constant", cfg.step_constant, src, same)?;
        let steps = option(flags.steps, "steps", cfg.steps, src, count)?;
        let runs = pick(flags.runs, "runs", cfg.runs, src, count, d.runs)?;
        let mc_count = pick(flags.mc_count, "mc-count", cfg.mc_count, src, count, d.mc_count)?;
        let seed = pick(flags.seed, "seed", cfg.seed, src, seed, 0)?;
        let out = pick(
            flags.out.clone(),
            "out",
            cfg.out,
            src,
            |s, _| Ok(PathBuf::from(s)),
            PathBuf::from(format!("out/{experiment}")),
        )?;
        let dump_states = pick(
            flags.dump_states.then_some(true),
            "dump-states",
            cfg.dump_states,
            src,
            same,
            false,
        )?;
        let paper_scale = pick(
            flags.paper_scale.then_some(true),
            "paper-scale",
            cfg.paper_scale,
            src,
            same,
            false,
        )?;
        let axis = pick(flags.axis, "axis", cfg.axis, src, count, d.axis)?;
        let initial_beta = pick(flags.initial_beta, "initial-beta", cfg.initial_beta, src, same, 1.0)?;
        let theta_offset = pick(None, "theta-offset", cfg.theta_offset, src, same, 0.0)?;
        let cases = pick(flags.cases, "cases", cfg.cases, src, count, 20)?;

        let beta = option(flags.beta, "beta", cfg.beta, src, same)?;
        let beta_min = option(flags.beta_min, "beta-min", cfg.beta_min, src, same)?;
        let beta_max = option(flags.beta_max, "beta-max", cfg.beta_max, src, same)?;
        let beta_points = option(flags.beta_points, "beta-points", cfg.beta_points, src, count)?;
        let betas = resolve_betas(beta, beta_min, beta_max, beta_points, d.betas)?;

        positive_count(&rows, "rows")?;
        positive_count(&cols, "cols")?;
        if rows.value * cols.value > MAX_SITES {
            return rows.fail(format!(
                "a {}x{} grid exceeds the dense limit of {MAX_SITES} sites",
                rows.value, cols.value
            ));
        }
        positive_real(&h, "h")?;
        if k.value.is_empty() {
            return k.fail("at least one exponent k is required");
        }
        if let Some(bad) = k.value.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return k.fail(format!("exponent k must be nonnegative and finite, got {bad}"));
        }
        if let Some(c) = &step_constant {
            positive_real(c, "step-constant")?;
        }
        if let Some(s) = &steps {
            positive_count(s, "steps")?;
        }
        positive_count(&runs, "runs")?;
        positive_count(&mc_count, "mc-count")?;
        positive_count(&cases, "cases")?;
        positive_real(&initial_beta, "initial-beta")?;
        if !theta_offset.value.is_finite() {
            return theta_offset.fail("theta-offset must be finite");
        }
        if experiment == Experiment::Scaling && betas.len() < 2 {
            return Err(CliError::Validation(
                "scaling: at least two beta values are needed to fit slopes".into(),
            ));
        }
        let ensemble = build_grid_ensemble(model_value, rows.value, cols.value, h.value)
            .or_else(|e| rows.fail(e))?;
        if axis.value >= ensemble.len() {
            return axis.fail(format!("axis {} out of range for {} terms", axis.value, ensemble.len()));
        }

        Ok(Settings {
            experiment,
            model: model_value,
            rows: rows.value,
            cols: cols.value,
            h: h.value,
            betas,
            ks: k.value,
            step_constant: step_constant.map(|s| s.value),
            steps: steps.map(|s| s.value),
            runs: runs.value,
            mc_count: mc_count.value,
            seed: seed.value,
            out: out.value,
            dump_states: dump_states.value,
            paper_scale: paper_scale.value,
            axis: axis.value,
            initial_beta: initial_beta.value,
            theta_offset: theta_offset.value,
            cases: cases.value,
        })
    }

    pub fn ensemble(&self) -> CliResult<Ensemble> {
        build_grid_ensemble(self.model, self.rows, self.cols, self.h)
            .map_err(|e| CliError::Validation(e.to_string()))
    }

    /// C for this sweep. Desk scale keeps `N ≤ 5·10⁴` at the largest `(β, k)`.
    pub fn resolved_step_constant(&self, lambda: f64) -> f64 {
        if let Some(c) = self.step_constant {
            return c;
        }
        if self.paper_scale {
            return lambda * lambda * PAPER_SCALE_FACTOR;
        }
        let beta_max = self.betas.iter().copied().fold(0.0, f64::max);
        let k_max = self.ks.iter().copied().fold(0.0, f64::max);
        (lambda * lambda).min(DESK_MAX_STEPS / beta_max.powf(k_max).max(1.0))
    }

    /// `N = max(1, round(C β^k))`, or the fixed step count if one is set.
    pub fn steps_for(&self, lambda: f64, beta: f64, k: f64) -> usize {
        match self.steps {
            Some(n) => n,
            None => ((self.resolved_step_constant(lambda) * beta.powf(k)).round() as usize).max(1),
        }
    }
}

fn positive_count(s: &Setting<usize>, name: &str) -> CliResult<()> {
    if s.value == 0 {
        return s.fail(format!("{name} must be at least 1"));
    }
    Ok(())
}

fn positive_real(s: &Setting<f64>, name: &str) -> CliResult<()> {
    if !(s.value.is_finite() && s.value > 0.0) {
        return s.fail(format!("{name} must be positive and finite, got {}", s.value));
    }
    Ok(())
}

fn resolve_betas(
    beta: Option<Setting<f64>>,
    min: Option<Setting<f64>>,
    max: Option<Setting<f64>>,
    points: Option<Setting<usize>>,
    default: Vec<f64>,
) -> CliResult<Vec<f64>> {
    let range_given = min.is_some() || max.is_some() || points.is_some();
    if let Some(b) = beta {
        if range_given {
            return b.fail("give either beta or a beta range, not both");
        }
        positive_real(&b, "beta")?;
        return Ok(vec![b.value]);
    }
    if !range_given {
        return Ok(default);
    }
    let lo = min.unwrap_or(Setting {
        value: default[0],
        origin: Origin::Default,
    });
    let hi = max.unwrap_or(Setting {
        value: *default.last().expect("nonempty defaults"),
        origin: Origin::Default,
    });
    let n = points.unwrap_or(Setting {
        value: default.len(),
        origin: Origin::Default,
    });
    positive_real(&lo, "beta-min")?;
    positive_real(&hi, "beta-max")?;
    positive_count(&n, "beta-points")?;
    if hi.value < lo.value {
        return hi.fail(format!("beta-max {} is below beta-min {}", hi.value, lo.value));
    }
    if n.value > 1 && hi.value == lo.value {
        return hi.fail("a multi-point beta range needs beta-max above beta-min");
    }
    Ok(linspace(lo.value, hi.value, n.value))
}
