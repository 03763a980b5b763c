//! Command-line surface and its resolution into an [`ExperimentSpec`].

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use dslt::chaos::H_CRITICAL;
use dslt::fbm_sim::ModelConfig;
use dslt::regularity::Variable;

use crate::config::Knobs;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "dslt", version, about = "Mollified self-intersection local time derivatives of fBm")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Flat key = value file; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<std::path::PathBuf>,

    /// Output file (written atomically); stdout when absent.
    #[arg(long, global = true)]
    pub output: Option<String>,

    /// json or csv (simulate also accepts bin).
    #[arg(long, global = true)]
    pub format: Option<String>,

    /// Worker threads; falls back to DSLT_THREADS, then to all cores.
    #[arg(long, global = true)]
    pub threads: Option<String>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long = "H")]
    pub hurst: Option<String>,
    #[arg(long)]
    pub d: Option<String>,
    /// Multi-index, comma separated; defaults to the first unit vector.
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long)]
    pub t: Option<String>,
    #[arg(long)]
    pub eps: Option<String>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub n_paths: Option<String>,
    #[arg(long)]
    pub n_steps: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample fBm paths.
    #[command(allow_negative_numbers = true)]
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sample: SampleArgs,
    },
    /// Monte Carlo moment of the mollified functional.
    #[command(allow_negative_numbers = true)]
    Estimate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sample: SampleArgs,
        /// Evaluation point, comma separated.
        #[arg(long, allow_hyphen_values = true)]
        y: Option<String>,
        #[arg(long)]
        order: Option<String>,
        #[arg(long)]
        antithetic: Option<String>,
    },
    /// Second moment by quadrature over the time simplex.
    #[command(allow_negative_numbers = true)]
    SecondMoment {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        eta: Option<String>,
        #[arg(long)]
        rel_tol: Option<String>,
    },
    /// Variance ladder and normality check at H = 2/3, d = 1, k = 1.
    #[command(allow_negative_numbers = true)]
    Clt {
        #[arg(long)]
        t: Option<String>,
        #[arg(long)]
        eps_ladder: Option<String>,
        #[command(flatten)]
        sample: SampleArgs,
        #[arg(long)]
        rel_tol: Option<String>,
        /// Per-path CSV; defaults to `<output>.paths.csv` when --output is set.
        #[arg(long)]
        paths_csv: Option<String>,
    },
    /// Empirical Hölder exponent in space or time.
    #[command(allow_negative_numbers = true)]
    Holder {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sample: SampleArgs,
        #[arg(long)]
        variable: Option<String>,
        #[arg(long)]
        lags: Option<String>,
        #[arg(long)]
        order: Option<String>,
    },
    /// Random checks of the Gaussian bound expressions.
    #[command(allow_negative_numbers = true)]
    BoundsCheck {
        #[arg(long)]
        t: Option<String>,
        #[arg(long)]
        n_draws: Option<String>,
        #[arg(long)]
        hurst_list: Option<String>,
        #[arg(long)]
        max_m: Option<String>,
        #[arg(long)]
        seed: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Bin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubcommandKind {
    Simulate,
    Estimate,
    SecondMoment,
    Clt,
    Holder,
    BoundsCheck,
}

/// Fully resolved run description, echoed into every output.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSpec {
    pub subcommand: SubcommandKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cfg: Option<ModelConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_ladder: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub antithetic: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variable: Option<Variable>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lags: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_draws: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hurst_list: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_m: Option<u32>,
    pub seed: u64,
    pub format: Format,
    pub output: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paths_csv: Option<String>,
}

impl ExperimentSpec {
    fn empty(subcommand: SubcommandKind, seed: u64, format: Format, output: Option<String>) -> Self {
        ExperimentSpec {
            subcommand,
            cfg: None,
            t: None,
            eta: None,
            rel_tol: None,
            n_paths: None,
            n_steps: None,
            eps_ladder: None,
            y: None,
            order: None,
            antithetic: None,
            variable: None,
            lags: None,
            n_draws: None,
            hurst_list: None,
            max_m: None,
            seed,
            format,
            output,
            paths_csv: None,
        }
    }
}

pub const DEFAULT_HURST_LIST: [f64; 4] = [0.25, 0.5, H_CRITICAL, 0.75];
pub const DEFAULT_SPACE_LAGS: [f64; 4] = [0.005, 0.01, 0.02, 0.04];
pub const DEFAULT_TIME_LAG_STEPS: [usize; 5] = [4, 8, 16, 32, 64];

fn model_knobs(k: &mut Knobs, m: &ModelArgs) {
    k.set("H", &m.hurst);
    k.set("d", &m.d);
    k.set("k", &m.k);
    k.set("t", &m.t);
    k.set("eps", &m.eps);
}

fn sample_knobs(k: &mut Knobs, s: &SampleArgs) {
    k.set("n-paths", &s.n_paths);
    k.set("n-steps", &s.n_steps);
    k.set("seed", &s.seed);
}

fn model(k: &Knobs, eps_default: f64) -> Result<ModelConfig, CliError> {
    let hurst = k.get_or("H", 0.5)?;
    let d: Option<usize> = k.get("d")?;
    let multi = match k.list::<u32>("k")? {
        Some(v) => v,
        None => {
            let mut v = vec![0; d.unwrap_or(1).max(1)];
            v[0] = 1;
            v
        }
    };
    let cfg = ModelConfig {
        hurst,
        dim: d.unwrap_or(multi.len()),
        k: multi,
        t: k.get_or("t", 1.0)?,
        epsilon: k.get_or("eps", eps_default)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn positive<T: PartialOrd + Default + std::fmt::Display>(key: &'static str, v: T) -> Result<T, CliError> {
    if v > T::default() {
        Ok(v)
    } else {
        Err(CliError::validation(key, format!("must be positive, got {v}")))
    }
}

fn rel_tol(k: &Knobs, default: f64) -> Result<f64, CliError> {
    let r: f64 = k.get_or("rel-tol", default)?;
    if r > 0.0 && r < 1.0 {
        Ok(r)
    } else {
        Err(CliError::validation("rel-tol", format!("must lie in (0, 1), got {r}")))
    }
}

fn format(k: &Knobs, default: Format, allow_bin: bool) -> Result<Format, CliError> {
    match k.string("format").as_deref() {
        None => Ok(default),
        Some("json") => Ok(Format::Json),
        Some("csv") => Ok(Format::Csv),
        Some("bin") if allow_bin => Ok(Format::Bin),
        Some(other) => Err(CliError::validation("format", format!("unsupported format {other:?}"))),
    }
}

/// Thread count from the knobs or `DSLT_THREADS`; `None` means rayon's default.
pub fn threads(k: &Knobs) -> Result<Option<usize>, CliError> {
    let n = match k.get::<usize>("threads")? {
        Some(n) => Some(n),
        None => match std::env::var("DSLT_THREADS") {
            Ok(s) if !s.trim().is_empty() => Some(
                s.trim()
                    .parse::<usize>()
                    .map_err(|e| CliError::validation("DSLT_THREADS", format!("cannot parse {s:?}: {e}")))?,
            ),
            _ => None,
        },
    };
    n.map(|n| positive("threads", n)).transpose()
}

/// Layers the command line over `file` and applies defaults.
pub fn resolve(cli: &Cli, file: std::collections::BTreeMap<String, String>) -> Result<(ExperimentSpec, Knobs), CliError> {
    let mut k = Knobs::new(file);
    k.set("output", &cli.output);
    k.set("format", &cli.format);
    k.set("threads", &cli.threads);
    let output = k.string("output");

    let spec = match &cli.command {
        Command::Simulate { model: m, sample } => {
            model_knobs(&mut k, m);
            sample_knobs(&mut k, sample);
            let fmt = format(&k, Format::Csv, true)?;
            if fmt == Format::Bin && output.is_none() {
                return Err(CliError::validation("output", "binary output needs a file"));
            }
            let mut s = ExperimentSpec::empty(SubcommandKind::Simulate, k.get_or("seed", 0)?, fmt, output);
            s.cfg = Some(model(&k, 1e-2)?);
            s.n_paths = Some(positive("n-paths", k.get_or("n-paths", 10)?)?);
            s.n_steps = Some(positive("n-steps", k.get_or("n-steps", 1024)?)?);
            s
        }
        Command::Estimate { model: m, sample, y, order, antithetic } => {
            model_knobs(&mut k, m);
            sample_knobs(&mut k, sample);
            k.set("y", y);
            k.set("order", order);
            k.set("antithetic", antithetic);
            let mut s =
                ExperimentSpec::empty(SubcommandKind::Estimate, k.get_or("seed", 0)?, format(&k, Format::Json, false)?, output);
            let cfg = model(&k, 1e-2)?;
            s.y = Some(k.list("y")?.unwrap_or_else(|| vec![0.0; cfg.dim]));
            s.cfg = Some(cfg);
            s.order = Some(k.get_or("order", 2)?);
            s.antithetic = Some(k.get_or("antithetic", true)?);
            s.n_paths = Some(positive("n-paths", k.get_or("n-paths", 1000)?)?);
            s.n_steps = Some(positive("n-steps", k.get_or("n-steps", 1024)?)?);
            s
        }
        Command::SecondMoment { model: m, eta, rel_tol: r } => {
            model_knobs(&mut k, m);
            k.set("eta", eta);
            k.set("rel-tol", r);
            let mut s = ExperimentSpec::empty(
                SubcommandKind::SecondMoment,
                k.get_or("seed", 0)?,
                format(&k, Format::Json, false)?,
                output,
            );
            let cfg = model(&k, 1e-2)?;
            let eta: f64 = k.get_or("eta", cfg.epsilon)?;
            s.eta = Some(positive("eta", eta)?);
            s.cfg = Some(cfg);
            s.rel_tol = Some(rel_tol(&k, 1e-4)?);
            s
        }
        Command::Clt { t, eps_ladder, sample, rel_tol: r, paths_csv } => {
            k.set("t", t);
            k.set("eps-ladder", eps_ladder);
            sample_knobs(&mut k, sample);
            k.set("rel-tol", r);
            k.set("paths-csv", paths_csv);
            let mut s = ExperimentSpec::empty(SubcommandKind::Clt, k.get_or("seed", 0)?, format(&k, Format::Json, false)?, output);
            let ladder: Vec<f64> = k.list("eps-ladder")?.unwrap_or_else(|| vec![1e-2, 1e-3]);
            let horizon: f64 = k.get_or("t", 1.0)?;
            let smallest = ladder.iter().copied().fold(f64::INFINITY, f64::min);
            let cfg = ModelConfig { hurst: H_CRITICAL, dim: 1, k: vec![1], t: horizon, epsilon: smallest };
            cfg.validate()?;
            s.cfg = Some(cfg);
            s.eps_ladder = Some(ladder);
            s.n_paths = Some(positive("n-paths", k.get_or("n-paths", 2000)?)?);
            s.n_steps = Some(positive("n-steps", k.get_or("n-steps", 2048)?)?);
            s.rel_tol = Some(rel_tol(&k, 1e-6)?);
            s.paths_csv = k.string("paths-csv").or_else(|| {
                s.output.as_ref().map(|o| crate::output::sibling(o.as_ref(), "paths.csv").display().to_string())
            });
            s
        }
        Command::Holder { model: m, sample, variable, lags, order } => {
            model_knobs(&mut k, m);
            sample_knobs(&mut k, sample);
            k.set("variable", variable);
            k.set("lags", lags);
            k.set("order", order);
            let mut s =
                ExperimentSpec::empty(SubcommandKind::Holder, k.get_or("seed", 0)?, format(&k, Format::Json, false)?, output);
            let cfg = model(&k, 1e-3)?;
            let var = match k.string("variable").as_deref() {
                None | Some("time") => Variable::Time,
                Some("space") => Variable::Space,
                Some(other) => return Err(CliError::validation("variable", format!("expected space or time, got {other:?}"))),
            };
            let n_steps = positive("n-steps", k.get_or("n-steps", 1024)?)?;
            let lags = match k.list("lags")? {
                Some(l) => l,
                None if var == Variable::Time => {
                    DEFAULT_TIME_LAG_STEPS.iter().map(|&m| m as f64 * cfg.t / n_steps as f64).collect()
                }
                None => DEFAULT_SPACE_LAGS.to_vec(),
            };
            s.cfg = Some(cfg);
            s.variable = Some(var);
            s.lags = Some(lags);
            s.order = Some(k.get_or("order", 2)?);
            s.n_paths = Some(positive("n-paths", k.get_or("n-paths", 400)?)?);
            s.n_steps = Some(n_steps);
            s
        }
        Command::BoundsCheck { t, n_draws, hurst_list, max_m, seed } => {
            k.set("t", t);
            k.set("n-draws", n_draws);
            k.set("hurst-list", hurst_list);
            k.set("max-m", max_m);
            k.set("seed", seed);
            let mut s = ExperimentSpec::empty(
                SubcommandKind::BoundsCheck,
                k.get_or("seed", 0)?,
                format(&k, Format::Csv, false)?,
                output,
            );
            s.t = Some(positive("t", k.get_or("t", 1.0)?)?);
            s.n_draws = Some(positive("n-draws", k.get_or("n-draws", 1000)?)?);
            s.hurst_list = Some(k.list("hurst-list")?.unwrap_or_else(|| DEFAULT_HURST_LIST.to_vec()));
            s.max_m = Some(k.get_or("max-m", 5)?);
            s
        }
    };
    Ok((spec, k))
}
