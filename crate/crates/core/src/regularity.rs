//! Empirical Hölder exponents of the mollified functional in the space
//! variable `y` and the horizon `t`, from log-log fits of increment moments.
//!
//! All fits are at a fixed, finite `ε`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DsltError, Result};
use crate::estimator::dslt_horizons;
use crate::fbm_sim::{FgnSampler, ModelConfig, PathRef, SamplerMethod};
use crate::kernels::MollifiedKernel;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variable {
    Space,
    Time,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    pub variable: Variable,
    pub lags: Vec<f64>,
    pub moment_order: u32,
    pub moments: Vec<f64>,
    /// Fitted exponent of `E[Δ^n]^{1/n}` against the lag.
    pub slope: f64,
    pub r_squared: f64,
}

/// Least-squares fit of `log moment = n·slope·log lag + c`.
pub fn fit_power_law(variable: Variable, lags: &[f64], moments: &[f64], order: u32) -> Result<HolderFit> {
    if lags.len() != moments.len() || lags.len() < 2 {
        return Err(DsltError::FitDegenerate("need at least two (lag, moment) pairs".into()));
    }
    if lags.windows(2).any(|w| !(w[1] > w[0])) || !(lags[0] > 0.0) {
        return Err(DsltError::FitDegenerate("lags must be positive and strictly increasing".into()));
    }
    if let Some(m) = moments.iter().find(|&&m| !(m > f64::MIN_POSITIVE) || !m.is_finite()) {
        return Err(DsltError::FitDegenerate(format!("moment {m:e} is not positive")));
    }
    let x: Vec<f64> = lags.iter().map(|l| l.ln()).collect();
    let y: Vec<f64> = moments.iter().map(|m| m.ln()).collect();
    let (raw, _, r_squared) = stats::linear_fit(&x, &y);
    Ok(HolderFit {
        variable,
        lags: lags.to_vec(),
        moment_order: order,
        moments: moments.to_vec(),
        slope: raw / order as f64,
        r_squared,
    })
}

/// Functional differences on shared paths, row-major `path × lag`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementSamples {
    pub variable: Variable,
    pub lags: Vec<f64>,
    pub n_paths: usize,
    pub values: Vec<f64>,
}

impl IncrementSamples {
    pub fn lag_column(&self, i: usize) -> Vec<f64> {
        let n = self.lags.len();
        (0..self.n_paths).map(|p| self.values[p * n + i]).collect()
    }
}

/// Monte Carlo moments of order `order` (even) per lag and their power-law fit.
pub fn holder_fit(samples: &IncrementSamples, order: u32) -> Result<HolderFit> {
    if order == 0 || order % 2 == 1 {
        return Err(DsltError::domain("order", format!("moment order must be even and positive, got {order}")));
    }
    if samples.lags.len() < 4 {
        return Err(DsltError::domain("lags", "need at least four lags"));
    }
    if samples.n_paths < 100 {
        return Err(DsltError::domain("n_paths", "need at least 100 paths"));
    }
    let moments: Vec<f64> = (0..samples.lags.len())
        .map(|i| {
            let pow: Vec<f64> = samples.lag_column(i).iter().map(|d| d.powi(order as i32)).collect();
            stats::mean(&pow)
        })
        .collect();
    fit_power_law(samples.variable, &samples.lags, &moments, order)
}

/// Differences `α̂(y₀ + h e₁) - α̂(y₀)` (space, `y₀ = 0`) or `α̂_{t+h} - α̂_t`
/// (time) for every lag `h`, each row computed on one simulated path.
///
/// Time lags must be multiples of the grid step `cfg.t / n_steps`; the path is
/// simulated on `[0, t + max lag]` with that step.
pub fn increment_samples(
    cfg: &ModelConfig,
    variable: Variable,
    lags: &[f64],
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<IncrementSamples> {
    cfg.validate()?;
    if lags.is_empty() || lags.iter().any(|&h| !(h >= 0.0) || !h.is_finite()) {
        return Err(DsltError::domain("lags", "lags must be nonnegative"));
    }
    if n_paths == 0 {
        return Err(DsltError::domain("n_paths", "need at least one path"));
    }
    let dt = cfg.t / n_steps as f64;
    let kernel = MollifiedKernel::new(cfg.epsilon, cfg.k.clone())?;
    let dim = cfg.dim;
    let n_lags = lags.len();
    let rows: Vec<Vec<f64>> = match variable {
        Variable::Time => {
            let steps: Vec<usize> = lags
                .iter()
                .map(|&h| {
                    let m = (h / dt).round();
                    if (m * dt - h).abs() > 1e-9 * cfg.t {
                        Err(DsltError::domain("lags", format!("time lag {h} is not a multiple of dt = {dt}")))
                    } else {
                        Ok(m as usize)
                    }
                })
                .collect::<Result<_>>()?;
            let total = n_steps + steps.iter().copied().max().unwrap_or(0);
            let sampler = FgnSampler::new(cfg.hurst, total, dt, SamplerMethod::Auto)?;
            let origin = vec![0.0; dim];
            (0..n_paths as u64)
                .into_par_iter()
                .map_init(
                    || vec![0.0; (total + 1) * dim],
                    |buf, id| {
                        sampler.fill_path(dim, seed, id, buf);
                        let a = dslt_horizons(PathRef::new(buf, dim, dt), &kernel, &origin)
                            .expect("dimensions checked above");
                        steps.iter().map(|&m| a[n_steps + m] - a[n_steps]).collect()
                    },
                )
                .collect()
        }
        Variable::Space => {
            let sampler = FgnSampler::new(cfg.hurst, n_steps, dt, SamplerMethod::Auto)?;
            let points: Vec<Vec<f64>> = std::iter::once(0.0)
                .chain(lags.iter().copied())
                .map(|h| {
                    let mut y = vec![0.0; dim];
                    y[0] = h;
                    y
                })
                .collect();
            (0..n_paths as u64)
                .into_par_iter()
                .map_init(
                    || vec![0.0; (n_steps + 1) * dim],
                    |buf, id| {
                        sampler.fill_path(dim, seed, id, buf);
                        let path = PathRef::new(buf, dim, dt);
                        let at = |y: &[f64]| dslt_horizons(path, &kernel, y).expect("dimensions checked")[n_steps];
                        let base = at(&points[0]);
                        points[1..].iter().map(|y| at(y) - base).collect()
                    },
                )
                .collect()
        }
    };
    let mut values = Vec::with_capacity(n_paths * n_lags);
    for r in rows {
        values.extend(r);
    }
    Ok(IncrementSamples { variable, lags: lags.to_vec(), n_paths, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_power_law_is_exact() {
        let lags = [0.01, 0.02, 0.05, 0.1, 0.2];
        for n in [2u32, 4, 6] {
            let moments: Vec<f64> = lags.iter().map(|h: &f64| 3.7 * h.powf(0.4 * n as f64)).collect();
            let fit = fit_power_law(Variable::Time, &lags, &moments, n).unwrap();
            assert!((fit.slope - 0.4).abs() < 1e-10, "{fit:?}");
            assert!((fit.r_squared - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_fits_are_rejected() {
        let lags = [0.1, 0.2, 0.3, 0.4];
        assert!(matches!(
            fit_power_law(Variable::Space, &lags, &[1.0, 0.0, 1.0, 1.0], 2),
            Err(DsltError::FitDegenerate(_))
        ));
        assert!(fit_power_law(Variable::Space, &[0.2, 0.1], &[1.0, 2.0], 2).is_err());
    }

    #[test]
    fn zero_lag_gives_zero_difference() {
        let cfg = ModelConfig::new(0.3, vec![1], 1.0, 0.01).unwrap();
        for var in [Variable::Space, Variable::Time] {
            let s = increment_samples(&cfg, var, &[0.0, 1.0 / 32.0], 5, 64, 3).unwrap();
            assert!(s.lag_column(0).iter().all(|&v| v == 0.0));
            assert!(s.lag_column(1).iter().any(|&v| v != 0.0));
        }
    }

    #[test]
    fn even_moments_are_positive_and_odd_orders_rejected() {
        let cfg = ModelConfig::new(0.3, vec![1], 1.0, 0.01).unwrap();
        let lags: Vec<f64> = [1.0, 2.0, 4.0, 8.0].iter().map(|m| m / 64.0).collect();
        let s = increment_samples(&cfg, Variable::Time, &lags, 100, 64, 1).unwrap();
        let fit = holder_fit(&s, 2).unwrap();
        assert!(fit.moments.iter().all(|&m| m > 0.0));
        assert!(holder_fit(&s, 3).is_err());
        assert!(increment_samples(&cfg, Variable::Time, &[0.01], 10, 64, 1).is_err());
    }

    #[test]
    fn time_increments_ignore_path_beyond_lag() {
        let cfg = ModelConfig::new(0.3, vec![1], 1.5, 0.01).unwrap();
        let batch = crate::fbm_sim::sample_paths(&cfg, 96, 1, 9).unwrap();
        let kernel = MollifiedKernel::new(0.01, vec![1]).unwrap();
        let full = dslt_horizons(batch.path(0), &kernel, &[0.0]).unwrap();
        let cut = PathRef::new(&batch.values[..73], 1, batch.dt);
        let part = dslt_horizons(cut, &kernel, &[0.0]).unwrap();
        assert_eq!(full[72] - full[64], part[72] - part[64]);
    }
}
