//! Pathwise evaluation of the mollified functional
//! `α̂^{(k)}_{t,ε}(y) = (-1)^{|k|} ∫_{0<r<s<t} f_ε^{(k)}(B_s - B_r - y) dr ds`
//! and Monte Carlo moments over simulated paths.
//!
//! The double integral uses trapezoidal weights on the triangulated simplex.
//! Diagonal nodes are never evaluated; their trapezoid mass is moved onto the
//! neighbouring off-diagonal nodes, which keeps the rule exact for constants.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DsltError, Result};
use crate::fbm_sim::{FgnSampler, ModelConfig, PathRef, SamplerMethod};
use crate::kernels::MollifiedKernel;
use crate::stats;

/// Kernel evaluations are skipped once `|x|²/2ε` exceeds this.
pub const KERNEL_CUTOFF: f64 = 60.0;

/// Highest supported moment order.
pub const MAX_ORDER: u32 = 6;

/// Monte Carlo mean with its standard error and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl McEstimate {
    /// Summary of i.i.d. samples.
    pub fn from_samples(xs: &[f64], seed: u64) -> Self {
        let n = xs.len();
        let mean = stats::mean(xs);
        let variance = stats::variance(xs);
        McEstimate { mean, variance, std_error: (variance / n as f64).sqrt(), n_samples: n, seed }
    }
}

/// One realisation of the functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsltSample {
    pub value: f64,
    pub cfg: ModelConfig,
    pub y: Vec<f64>,
    pub n_steps: usize,
}

/// Trapezoid weight, in units of `dt²`, of node `(j, l)` (`j < l`) for the
/// simplex ending at node `last`.
pub fn simplex_weight(j: usize, l: usize, last: usize) -> f64 {
    debug_assert!(j < l && l <= last);
    let below = (l >= j + 2) as u32;
    let squares = if l < last {
        (if j >= 1 { 3 } else { 1 }) + below
    } else {
        (j >= 1) as u32 + below
    };
    let mut w = squares as f64 / 4.0;
    if l == j + 1 {
        let fold = |m: usize| if m == 0 || m == last { 1.0 / 6.0 } else { 7.0 / 24.0 };
        w += 1.0 / 6.0 + fold(j) + fold(l);
    }
    w
}

fn sign_of(order: u32) -> f64 {
    if order % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn check_y(y: &[f64], dim: usize) -> Result<()> {
    if y.len() != dim {
        return Err(DsltError::domain("y", format!("expected {dim} coordinates, got {}", y.len())));
    }
    Ok(())
}

/// Row sums `Σ_j w f(B_l - B_j - y)` for every row `l`, with the weights of an
/// interior row and of a final row.
fn row_sums(path: PathRef<'_>, kernel: &MollifiedKernel, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = path.n_steps();
    let mut interior = vec![0.0; n + 1];
    let mut last = vec![0.0; n + 1];
    for l in 1..=n {
        let bl = path.node(l);
        let (mut acc_i, mut acc_l) = (0.0, 0.0);
        for j in 0..l {
            let bj = path.node(j);
            let f = kernel.eval_truncated(|i| bl[i] - bj[i] - y[i], KERNEL_CUTOFF);
            if f != 0.0 {
                acc_i += simplex_weight(j, l, n + 1) * f;
                acc_l += simplex_weight(j, l, l) * f;
            }
        }
        interior[l] = acc_i;
        last[l] = acc_l;
    }
    (interior, last)
}

/// The functional on one path, which must cover exactly `[0, cfg.t]`.
pub fn dslt_pathwise(path: PathRef<'_>, cfg: &ModelConfig, y: &[f64]) -> Result<DsltSample> {
    cfg.validate()?;
    check_grid(path, cfg)?;
    check_y(y, cfg.dim)?;
    let kernel = MollifiedKernel::new(cfg.epsilon, cfg.k.clone())?;
    let value = dslt_value(path, &kernel, y);
    Ok(DsltSample { value, cfg: cfg.clone(), y: y.to_vec(), n_steps: path.n_steps() })
}

fn check_grid(path: PathRef<'_>, cfg: &ModelConfig) -> Result<()> {
    if path.dim != cfg.dim {
        return Err(DsltError::GridMismatch(format!("path has dimension {}, model has {}", path.dim, cfg.dim)));
    }
    let h = path.horizon();
    if (h - cfg.t).abs() > 1e-9 * cfg.t {
        return Err(DsltError::GridMismatch(format!("path covers [0, {h}], model horizon is {}", cfg.t)));
    }
    Ok(())
}

fn dslt_value(path: PathRef<'_>, kernel: &MollifiedKernel, y: &[f64]) -> f64 {
    let n = path.n_steps();
    let (interior, last) = row_sums(path, kernel, y);
    let total = stats::pairwise_sum(&interior[1..n]) + last[n];
    sign_of(kernel.k.iter().sum()) * total * path.dt * path.dt
}

/// The functional at every grid horizon `t_L = L dt`, `L = 0..=n_steps`, from a
/// single pass over the path. Entry `L` only depends on nodes `0..=L`.
pub fn dslt_horizons(path: PathRef<'_>, kernel: &MollifiedKernel, y: &[f64]) -> Result<Vec<f64>> {
    if path.dim != kernel.dim() {
        return Err(DsltError::GridMismatch(format!("path has dimension {}, kernel has {}", path.dim, kernel.dim())));
    }
    check_y(y, path.dim)?;
    let n = path.n_steps();
    let (interior, last) = row_sums(path, kernel, y);
    let scale = sign_of(kernel.k.iter().sum()) * path.dt * path.dt;
    let mut out = vec![0.0; n + 1];
    let mut prefix = 0.0;
    for l in 1..=n {
        out[l] = (prefix + last[l]) * scale;
        prefix += interior[l];
    }
    Ok(out)
}

/// Options for [`mc_moment_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    /// Pair every path with its negation.
    pub antithetic: bool,
    /// Also evaluate on the same paths coarsened to `n_steps / 2`.
    pub coarse: bool,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions { antithetic: true, coarse: false }
    }
}

/// Functional values of one simulated path, its negation, and their coarse
/// grid counterparts (`NaN` where not computed).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathValues {
    pub path_id: u64,
    pub value: f64,
    pub mirror: f64,
    pub coarse: f64,
    pub coarse_mirror: f64,
}

/// Functional values for paths `0..n_paths` of the run seeded with `seed`.
///
/// The negated path is handled through `α(-B, y) = (-1)^{|k|} α(B, -y)`, which
/// is exact in floating point; at `y = 0` no second evaluation is needed.
pub fn path_values(
    cfg: &ModelConfig,
    y: &[f64],
    n_paths: usize,
    n_steps: usize,
    seed: u64,
    opts: McOptions,
) -> Result<Vec<PathValues>> {
    cfg.validate()?;
    check_y(y, cfg.dim)?;
    if n_paths == 0 {
        return Err(DsltError::domain("n_paths", "need at least one path"));
    }
    if opts.coarse && (n_steps % 2 != 0 || n_steps < 4) {
        return Err(DsltError::domain("n_steps", "coarsening needs an even grid of at least 4 steps"));
    }
    let sampler = FgnSampler::new(cfg.hurst, n_steps, cfg.t / n_steps as f64, SamplerMethod::Auto)?;
    let kernel = MollifiedKernel::new(cfg.epsilon, cfg.k.clone())?;
    let dim = cfg.dim;
    let sign = sign_of(cfg.order());
    let y_neg: Vec<f64> = y.iter().map(|v| -v).collect();
    let centred = y.iter().all(|&v| v == 0.0);
    let both = |p: PathRef<'_>| {
        let v = dslt_value(p, &kernel, y);
        if !opts.antithetic {
            (v, f64::NAN)
        } else if centred {
            (v, sign * v)
        } else {
            (v, sign * dslt_value(p, &kernel, &y_neg))
        }
    };
    let out = (0..n_paths as u64)
        .into_par_iter()
        .map_init(
            || vec![0.0; (n_steps + 1) * dim],
            |buf, id| {
                sampler.fill_path(dim, seed, id, buf);
                let path = PathRef::new(buf, dim, sampler.dt());
                let (value, mirror) = both(path);
                let (coarse, coarse_mirror) = if opts.coarse {
                    let thin: Vec<f64> = buf.chunks(dim).step_by(2).flatten().copied().collect();
                    both(PathRef::new(&thin, dim, 2.0 * sampler.dt()))
                } else {
                    (f64::NAN, f64::NAN)
                };
                PathValues { path_id: id, value, mirror, coarse, coarse_mirror }
            },
        )
        .collect();
    Ok(out)
}

/// Per-sample `n`-th powers: pair averages when antithetic.
fn moment_samples(vals: &[PathValues], order: u32, antithetic: bool, coarse: bool) -> Vec<f64> {
    let n = order as i32;
    vals.iter()
        .map(|v| {
            let (a, b) = if coarse { (v.coarse, v.coarse_mirror) } else { (v.value, v.mirror) };
            if antithetic {
                (a.powi(n) + b.powi(n)) / 2.0
            } else {
                a.powi(n)
            }
        })
        .collect()
}

/// Moment estimate together with the coarse-grid discretization check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McMoment {
    pub order: u32,
    pub estimate: McEstimate,
    /// Same paths at half the resolution, when requested.
    pub coarse: Option<McEstimate>,
    /// `|fine - coarse|`, the discretization tolerance used in comparisons.
    pub discretization_tol: Option<f64>,
}

fn check_order(order: u32) -> Result<()> {
    if order == 0 || order > MAX_ORDER {
        return Err(DsltError::domain("order", format!("moment order must be in 1..={MAX_ORDER}, got {order}")));
    }
    Ok(())
}

/// Moment summary from already computed path values.
pub fn moment_from_values(vals: &[PathValues], order: u32, seed: u64, antithetic: bool) -> Result<McMoment> {
    check_order(order)?;
    let estimate = McEstimate::from_samples(&moment_samples(vals, order, antithetic, false), seed);
    let coarse = if vals.first().is_some_and(|v| !v.coarse.is_nan()) {
        Some(McEstimate::from_samples(&moment_samples(vals, order, antithetic, true), seed))
    } else {
        None
    };
    let discretization_tol = coarse.as_ref().map(|c| (estimate.mean - c.mean).abs());
    Ok(McMoment { order, estimate, coarse, discretization_tol })
}

/// `E[α̂^n]` by Monte Carlo with antithetic pairing.
pub fn mc_moment(
    cfg: &ModelConfig,
    y: &[f64],
    order: u32,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<McEstimate> {
    Ok(mc_moment_with(cfg, y, order, n_paths, n_steps, seed, McOptions::default())?.estimate)
}

pub fn mc_moment_with(
    cfg: &ModelConfig,
    y: &[f64],
    order: u32,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
    opts: McOptions,
) -> Result<McMoment> {
    check_order(order)?;
    let vals = path_values(cfg, y, n_paths, n_steps, seed, opts)?;
    moment_from_values(&vals, order, seed, opts.antithetic)
}
