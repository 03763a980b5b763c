//! Chaos kernels of `α̂'_{t,ε}(0)` for `d = 1`, `k = 1`, the first-chaos
//! variance, the limiting variance `σ²` at `H = 2/3`, and the Monte Carlo
//! experiment for the normalised functional `α̂'_{t,ε}(0) / log(1/ε)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{DsltError, Result};
use crate::estimator::{moment_from_values, path_values, McOptions, PathValues};
use crate::fbm_sim::{check_hurst, ModelConfig};
use crate::gaussian_moments::{GapCoords, RegionCase};
use crate::quadrature::{integrate_gap_simplex, Adaptive, SimplexOptions};
use crate::second_moment::{second_moment_quadrature, QuadResult};
use crate::stats;

/// The critical Hurst index of the central limit theorem.
pub const H_CRITICAL: f64 = 2.0 / 3.0;

/// `β_q = 1 / (2^{q-1/2} (q-1)! √π)`.
pub fn beta_q(q: u32) -> Result<f64> {
    if q == 0 {
        return Err(DsltError::domain("q", "chaos index must be at least 1"));
    }
    let fact: f64 = (1..q).map(|i| i as f64).product();
    Ok(1.0 / (2f64.powf(q as f64 - 0.5) * fact * PI.sqrt()))
}

/// `μ(x, u₁, u₂) = E[B_{u₁} (B_{x+u₂} - B_x)]`.
pub fn mu_chaos(x: f64, u1: f64, u2: f64, hurst: f64) -> Result<f64> {
    check_hurst(hurst)?;
    if !(x >= 0.0) || !(u1 >= 0.0) || !(u2 >= 0.0) {
        return Err(DsltError::domain("u", format!("arguments must be nonnegative, got ({x}, {u1}, {u2})")));
    }
    let p = 2.0 * hurst;
    let pw = |v: f64| v.abs().powf(p);
    Ok(0.5 * (pw(x + u2) - pw(x + u2 - u1) - pw(x) + pw(x - u1)))
}

#[inline]
fn g_q_raw(q: u32, eps: f64, lambda: f64, rho: f64, mu: f64) -> f64 {
    let e = -0.5 - q as f64;
    (eps + lambda).powf(e) * (eps + rho).powf(e) * mu.powi(2 * q as i32 - 1)
}

/// `G^{(q)}_{ε,x}(u₁, u₂) = (ε + u₁^{2H})^{-1/2-q} (ε + u₂^{2H})^{-1/2-q} μ(x, u₁, u₂)^{2q-1}`.
pub fn g_q(q: u32, eps: f64, x: f64, u1: f64, u2: f64, hurst: f64) -> Result<f64> {
    if q == 0 {
        return Err(DsltError::domain("q", "chaos index must be at least 1"));
    }
    if !(eps > 0.0) {
        return Err(DsltError::domain("epsilon", format!("must be positive, got {eps}")));
    }
    let mu = mu_chaos(x, u1, u2, hurst)?;
    let p = 2.0 * hurst;
    Ok(g_q_raw(q, eps, u1.powf(p), u2.powf(p), mu))
}

/// First-chaos variance, region by region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosVariance {
    pub epsilon: f64,
    pub regions: Vec<QuadResult>,
    pub total: QuadResult,
}

/// `E[|I₁(f_{1,ε})|²] = β₁² ∫_{D²} G^{(1)}`, over the same region decomposition
/// as the full second moment.
pub fn first_chaos_variance(eps: f64, t: f64, hurst: f64, rel_tol: f64) -> Result<ChaosVariance> {
    check_hurst(hurst)?;
    if !(eps > 0.0) {
        return Err(DsltError::domain("epsilon", format!("must be positive, got {eps}")));
    }
    if !(t >= 0.0) {
        return Err(DsltError::domain("t", format!("horizon must be nonnegative, got {t}")));
    }
    let b1 = beta_q(1)?;
    let region = |case: RegionCase, opts: &SimplexOptions| {
        integrate_gap_simplex(
            |a, b, c| {
                let w = t - a - b - c;
                if w <= 0.0 {
                    return 0.0;
                }
                let tr = GapCoords { case, a, b, c }.triple(hurst);
                w * b1 * b1 * g_q_raw(1, eps, tr.lambda, tr.rho, tr.mu)
            },
            t,
            opts,
        )
    };
    let scale: f64 = RegionCase::ALL.iter().map(|&c| region(c, &SimplexOptions::pilot()).abs_integral).sum();
    let opts = SimplexOptions { rel_tol, ..SimplexOptions::default() }.with_scale(scale);
    let mut regions = Vec::new();
    for case in RegionCase::ALL {
        regions.push(QuadResult::from_integral(&region(case, &opts), case.into()));
    }
    let total = QuadResult::total_of(&regions);
    if t > 0.0 && total.abs_error_estimate > rel_tol * total.value.abs() {
        return Err(DsltError::NonConvergence {
            value: total.value,
            error: total.abs_error_estimate,
            evals: total.n_evals,
        });
    }
    Ok(ChaosVariance { epsilon: eps, regions, total })
}

/// `B(2, 1/3)` through `B(2, z) = 1 / (z (z + 1))`.
pub const BETA_2_THIRD: f64 = 9.0 / 4.0;

/// `σ²(t) = t^{4/3} B(2, 1/3) / (8π)`.
pub fn sigma_squared(t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(DsltError::domain("t", format!("horizon must be positive, got {t}")));
    }
    Ok(t.powf(4.0 / 3.0) * BETA_2_THIRD / (8.0 * PI))
}

/// `σ²(t)` with the Beta function evaluated through log-gamma.
pub fn sigma_squared_log_gamma(t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(DsltError::domain("t", format!("horizon must be positive, got {t}")));
    }
    let beta = (ln_gamma(2.0) + ln_gamma(1.0 / 3.0) - ln_gamma(2.0 + 1.0 / 3.0)).exp();
    Ok(t.powf(4.0 / 3.0) * beta / (8.0 * PI))
}

/// `(∫_0^M a (1 + a^{4/3})^{-3/2} da)² / ((4/3) log M)²`, which tends to `9/16`.
///
/// With `M = ε^{-3/4}` the denominator is `(log 1/ε)²`.
pub fn limit_integral_check(m: f64) -> Result<f64> {
    if !(m > 1.0) || !m.is_finite() {
        return Err(DsltError::domain("M", format!("must be a finite value above 1, got {m}")));
    }
    let q = Adaptive { rel_tol: 1e-13, abs_tol: 0.0, max_intervals: 2000 };
    let f = |a: f64| a * (1.0 + a.powf(4.0 / 3.0)).powf(-1.5);
    let head = q.integrate(f, 0.0, 1.0).value;
    // a = e^s on [1, M]
    let tail = q.integrate(|s| f(s.exp()) * s.exp(), 0.0, m.ln()).value;
    let i = head + tail;
    let norm = 4.0 / 3.0 * m.ln();
    Ok(i * i / (norm * norm))
}

/// Monte Carlo diagnostics of `α̂'_{t,ε}(0) / log(1/ε)` at one `ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltSample {
    pub epsilon: f64,
    /// Mean over antithetic pairs.
    pub mc_mean: f64,
    /// `E[Z²]` over antithetic pairs and its standard error.
    pub mc_variance: f64,
    pub mc_variance_se: f64,
    /// `|E[Z²]_fine - E[Z²]_coarse|` on the same paths at half resolution.
    pub discretization_tol: f64,
    /// Quadrature value of `M(ε, ε) / log(1/ε)²`.
    pub quad_variance: f64,
    /// Normality diagnostics of the `n_paths` independent (unmirrored) values.
    pub skewness: f64,
    pub kurtosis_excess: f64,
    pub ks_statistic: f64,
    /// KS critical value at the 1% level for `n_paths` samples.
    pub ks_critical: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub t: f64,
    pub eps_ladder: Vec<f64>,
    /// `M(ε, ε) / log(1/ε)²` by quadrature.
    pub variance_ratios: Vec<f64>,
    /// First-chaos variance over `log(1/ε)²`.
    pub first_chaos_ratios: Vec<f64>,
    pub sigma_sq_target: f64,
    /// Diagnostics at the smallest `ε` of the ladder.
    pub mc_variance: f64,
    pub mc_skewness: f64,
    pub mc_kurtosis_excess: f64,
    pub ks_statistic: f64,
    pub samples: Vec<CltSample>,
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
}

/// Normalised values `Z = α̂' / log(1/ε)` of one path and its mirror.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalisedValue {
    pub path_id: u64,
    pub epsilon: f64,
    pub value: f64,
    pub mirror: f64,
}

/// Runs the experiment at `H = 2/3`, `d = 1`, `k = 1`; also returns the
/// per-path normalised statistics.
pub fn clt_experiment_with_paths(
    t: f64,
    eps_ladder: &[f64],
    n_paths: usize,
    n_steps: usize,
    seed: u64,
    rel_tol: f64,
) -> Result<(CltReport, Vec<NormalisedValue>)> {
    if eps_ladder.is_empty() {
        return Err(DsltError::domain("eps_ladder", "need at least one value"));
    }
    if eps_ladder.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
        return Err(DsltError::domain("eps_ladder", "values must lie in (0, 1) so that log(1/ε) > 0"));
    }
    if n_paths < 2 {
        return Err(DsltError::domain("n_paths", "need at least two paths"));
    }
    let base = ModelConfig::new(H_CRITICAL, vec![1], t, eps_ladder[0])?;
    let opts = McOptions { antithetic: true, coarse: true };
    let mut variance_ratios = Vec::new();
    let mut first_chaos_ratios = Vec::new();
    let mut samples = Vec::new();
    let mut per_path = Vec::new();
    for &eps in eps_ladder {
        let cfg = base.with_epsilon(eps);
        let log2 = (1.0 / eps).ln().powi(2);
        let quad = second_moment_quadrature(&cfg, eps, rel_tol)?.total.value / log2;
        variance_ratios.push(quad);
        first_chaos_ratios.push(first_chaos_variance(eps, t, H_CRITICAL, rel_tol)?.total.value / log2);

        let inv_log = 1.0 / (1.0 / eps).ln();
        let vals: Vec<PathValues> = path_values(&cfg, &[0.0], n_paths, n_steps, seed, opts)?
            .into_iter()
            .map(|v| PathValues {
                value: v.value * inv_log,
                mirror: v.mirror * inv_log,
                coarse: v.coarse * inv_log,
                coarse_mirror: v.coarse_mirror * inv_log,
                ..v
            })
            .collect();
        let first = moment_from_values(&vals, 1, seed, true)?;
        let second = moment_from_values(&vals, 2, seed, true)?;
        let plain: Vec<f64> = vals.iter().map(|v| v.value).collect();
        let (skewness, kurtosis_excess) = stats::skew_kurtosis(&plain);
        samples.push(CltSample {
            epsilon: eps,
            mc_mean: first.estimate.mean,
            mc_variance: second.estimate.mean,
            mc_variance_se: second.estimate.std_error,
            discretization_tol: second.discretization_tol.unwrap_or(0.0),
            quad_variance: quad,
            skewness,
            kurtosis_excess,
            ks_statistic: stats::ks_fitted_normal(&plain),
            ks_critical: stats::ks_coefficient(0.01) / (n_paths as f64).sqrt(),
        });
        per_path.extend(vals.iter().map(|v| NormalisedValue {
            path_id: v.path_id,
            epsilon: eps,
            value: v.value,
            mirror: v.mirror,
        }));
    }
    let last = samples.last().expect("ladder is not empty").clone();
    let report = CltReport {
        t,
        eps_ladder: eps_ladder.to_vec(),
        variance_ratios,
        first_chaos_ratios,
        sigma_sq_target: sigma_squared(t)?,
        mc_variance: last.mc_variance,
        mc_skewness: last.skewness,
        mc_kurtosis_excess: last.kurtosis_excess,
        ks_statistic: last.ks_statistic,
        samples,
        n_paths,
        n_steps,
        seed,
    };
    Ok((report, per_path))
}

pub fn clt_experiment(t: f64, eps_ladder: &[f64], n_paths: usize, n_steps: usize, seed: u64) -> Result<CltReport> {
    Ok(clt_experiment_with_paths(t, eps_ladder, n_paths, n_steps, seed, 1e-6)?.0)
}
