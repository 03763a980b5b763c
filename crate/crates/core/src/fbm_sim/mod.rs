//! Exact simulation of d-dimensional fractional Brownian motion on a uniform
//! grid, the model configuration shared by every experiment, and the
//! local-nondeterminism diagnostics.

mod io;
mod sampler;

pub use io::{read_paths, write_paths, write_paths_csv, PATH_FILE_MAGIC, PATH_FILE_VERSION};
pub use sampler::{FgnSampler, SamplerMethod, EIGEN_CLIP_TOL};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DsltError, Result};

/// Full statement of one problem instance: Hurst index, dimension,
/// derivative multi-index, time horizon and mollification parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hurst: f64,
    pub dim: usize,
    pub k: Vec<u32>,
    pub t: f64,
    pub epsilon: f64,
}

impl ModelConfig {
    pub fn new(hurst: f64, k: Vec<u32>, t: f64, epsilon: f64) -> Result<Self> {
        let cfg = ModelConfig { hurst, dim: k.len(), k, t, epsilon };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check_hurst(self.hurst)?;
        if self.dim == 0 {
            return Err(DsltError::domain("d", "dimension must be at least 1"));
        }
        if self.k.len() != self.dim {
            return Err(DsltError::domain(
                "k",
                format!("multi-index has {} entries but d = {}", self.k.len(), self.dim),
            ));
        }
        if !(self.t > 0.0) || !self.t.is_finite() {
            return Err(DsltError::domain("t", format!("horizon must be positive, got {}", self.t)));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(DsltError::domain(
                "epsilon",
                format!("mollification must be positive, got {}", self.epsilon),
            ));
        }
        Ok(())
    }

    /// |k|, the total derivative order.
    pub fn order(&self) -> u32 {
        self.k.iter().sum()
    }

    /// Number of odd entries of k.
    pub fn odd_count(&self) -> u32 {
        self.k.iter().filter(|&&ki| ki % 2 == 1).count() as u32
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        ModelConfig { epsilon, ..self.clone() }
    }

    pub fn with_horizon(&self, t: f64) -> Self {
        ModelConfig { t, ..self.clone() }
    }
}

pub(crate) fn check_hurst(h: f64) -> Result<()> {
    if h > 0.0 && h < 1.0 {
        Ok(())
    } else {
        Err(DsltError::domain("H", format!("Hurst index must lie in (0,1), got {h}")))
    }
}

/// Covariance of fBm, `E[B_s B_t] = (t^{2H} + s^{2H} - |t-s|^{2H}) / 2`.
pub fn fbm_covariance(s: f64, t: f64, hurst: f64) -> Result<f64> {
    check_hurst(hurst)?;
    if !(s >= 0.0) || !(t >= 0.0) {
        return Err(DsltError::domain("time", format!("times must be nonnegative, got ({s}, {t})")));
    }
    Ok(cov_unchecked(s, t, hurst))
}

#[inline]
pub(crate) fn cov_unchecked(s: f64, t: f64, hurst: f64) -> f64 {
    let p = 2.0 * hurst;
    0.5 * (t.powf(p) + s.powf(p) - (t - s).abs().powf(p))
}

/// A batch of simulated paths, stored row-major as `path × node × coordinate`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch {
    pub hurst: f64,
    pub dim: usize,
    pub n_paths: usize,
    pub n_steps: usize,
    pub dt: f64,
    pub seed: u64,
    pub values: Vec<f64>,
}

impl PathBatch {
    pub fn path(&self, p: usize) -> PathRef<'_> {
        let len = (self.n_steps + 1) * self.dim;
        PathRef::new(&self.values[p * len..(p + 1) * len], self.dim, self.dt)
    }

    pub fn value(&self, p: usize, node: usize, coord: usize) -> f64 {
        self.values[(p * (self.n_steps + 1) + node) * self.dim + coord]
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.n_steps as f64
    }
}

/// Borrowed view of one path: `(n_steps + 1) × dim` values, node-major.
#[derive(Debug, Clone, Copy)]
pub struct PathRef<'a> {
    pub values: &'a [f64],
    pub dim: usize,
    pub dt: f64,
}

impl<'a> PathRef<'a> {
    pub fn new(values: &'a [f64], dim: usize, dt: f64) -> Self {
        assert!(dim > 0 && values.len() % dim == 0 && values.len() >= 2 * dim);
        PathRef { values, dim, dt }
    }

    pub fn n_steps(&self) -> usize {
        self.values.len() / self.dim - 1
    }

    pub fn node(&self, j: usize) -> &'a [f64] {
        &self.values[j * self.dim..(j + 1) * self.dim]
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.n_steps() as f64
    }
}

/// Deterministic RNG for path `index` of a run seeded with `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Exact-in-law fBm samples on the grid `{j t / n_steps}`.
pub fn sample_paths(cfg: &ModelConfig, n_steps: usize, n_paths: usize, seed: u64) -> Result<PathBatch> {
    sample_paths_with(cfg, n_steps, n_paths, seed, SamplerMethod::Auto)
}

pub fn sample_paths_with(
    cfg: &ModelConfig,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
    method: SamplerMethod,
) -> Result<PathBatch> {
    cfg.validate()?;
    if n_paths == 0 {
        return Err(DsltError::domain("n_paths", "need at least one path"));
    }
    let sampler = FgnSampler::new(cfg.hurst, n_steps, cfg.t / n_steps as f64, method)?;
    let len = (n_steps + 1) * cfg.dim;
    let mut values = vec![0.0; n_paths * len];
    values
        .par_chunks_mut(len)
        .enumerate()
        .for_each(|(p, chunk)| sampler.fill_path(cfg.dim, seed, p as u64, chunk));
    Ok(PathBatch {
        hurst: cfg.hurst,
        dim: cfg.dim,
        n_paths,
        n_steps,
        dt: sampler.dt(),
        seed,
        values,
    })
}

/// Empirical two-sided local-nondeterminism bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NondeterminismReport {
    pub n: usize,
    pub hurst: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub n_trials: usize,
}

/// Ratio `Var(Σ x_i ΔB_i) / Σ x_i² (s_i - s_{i-1})^{2H}` over random partitions
/// of (0, 1] and random coefficients, with the variance computed exactly from
/// the covariance function.
pub fn nondeterminism_ratios(hurst: f64, n: usize, n_trials: usize, seed: u64) -> Result<NondeterminismReport> {
    check_hurst(hurst)?;
    if n == 0 || n_trials == 0 {
        return Err(DsltError::domain("n", "need n >= 1 and n_trials >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Uniform::new(0.0, 1.0).expect("valid range");
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    let mut times = vec![0.0; n + 1];
    let mut x = vec![0.0; n];
    for _ in 0..n_trials {
        for s in times[1..].iter_mut() {
            *s = 1.0 - unit.sample(&mut rng); // (0, 1]
        }
        times[1..].sort_by(f64::total_cmp);
        for xi in x.iter_mut() {
            *xi = StandardNormal.sample(&mut rng);
        }
        let mut var = 0.0;
        let mut reference = 0.0;
        for i in 1..=n {
            for j in 1..=n {
                let c = cov_unchecked(times[i], times[j], hurst)
                    - cov_unchecked(times[i], times[j - 1], hurst)
                    - cov_unchecked(times[i - 1], times[j], hurst)
                    + cov_unchecked(times[i - 1], times[j - 1], hurst);
                var += x[i - 1] * x[j - 1] * c;
            }
            reference += x[i - 1] * x[i - 1] * (times[i] - times[i - 1]).powf(2.0 * hurst);
        }
        if reference > 0.0 {
            let r = var / reference;
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    Ok(NondeterminismReport { n, hurst, ratio_min: lo, ratio_max: hi, n_trials })
}
