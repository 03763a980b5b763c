//! `E[α̂^{(k)}_{t,ε}(0) α̂^{(k)}_{t,η}(0)]` by exact Gaussian integration in
//! the Fourier variables and adaptive quadrature over time configurations,
//! plus the existence-regime gate and L² Cauchy diagnostics.
//!
//! With `r < r'` fixed by symmetry, the time domain splits into the three
//! interleavings of [`RegionCase`]. In gap coordinates the base time `r` only
//! enters through the range `0 < r < t - a - b - c`, so each region reduces
//! to a three-dimensional integral with weight `(t - a - b - c)`.

use std::f64::consts::PI;
use std::sync::Arc;

use rand_distr::{Distribution, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DsltError, Result};
use crate::estimator::McEstimate;
use crate::fbm_sim::{path_rng, ModelConfig};
use crate::gaussian_moments::{
    cov_triple, isserlis_coefficients, mixed_moment_with, pair_integral_exact, CovTriple, GapCoords, RegionCase,
};
use crate::quadrature::{integrate_gap_simplex, Integral, SimplexOptions};

/// Part of the time domain a quadrature value refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    D1,
    D2,
    D3,
    Total,
}

impl From<RegionCase> for Region {
    fn from(c: RegionCase) -> Self {
        match c {
            RegionCase::D1 => Region::D1,
            RegionCase::D2 => Region::D2,
            RegionCase::D3 => Region::D3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub n_evals: u64,
    pub region: Region,
}

impl QuadResult {
    pub(crate) fn from_integral(r: &Integral, region: Region) -> Self {
        QuadResult { value: r.value, abs_error_estimate: r.error, n_evals: r.evals, region }
    }

    /// `2 (D1 + D2 + D3)`, the factor 2 accounting for `r ↔ r'`.
    pub fn total_of(parts: &[QuadResult]) -> Self {
        QuadResult {
            value: 2.0 * parts.iter().map(|p| p.value).sum::<f64>(),
            abs_error_estimate: 2.0 * parts.iter().map(|p| p.abs_error_estimate).sum::<f64>(),
            n_evals: parts.iter().map(|p| p.n_evals).sum(),
            region: Region::Total,
        }
    }
}

/// Existence of the limit in L² and in every Lᵖ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeVerdict {
    pub l2_exists: bool,
    pub lp_exists: bool,
    pub l2_threshold: f64,
    pub lp_threshold: f64,
}

/// `H < min(2/(2|k|+d), 1/(|k|+d-#), 1/d)` for L², `H (|k|+d) < 1` for Lᵖ.
pub fn existence_regime(hurst: f64, k: &[u32], d: usize) -> RegimeVerdict {
    let order: u32 = k.iter().sum();
    let odd = k.iter().filter(|&&ki| ki % 2 == 1).count() as f64;
    let (kf, df) = (order as f64, d as f64);
    let l2_threshold = (2.0 / (2.0 * kf + df)).min(1.0 / (kf + df - odd)).min(1.0 / df);
    let lp_threshold = 1.0 / (kf + df);
    RegimeVerdict {
        l2_exists: hurst < l2_threshold,
        lp_exists: hurst < lp_threshold,
        l2_threshold,
        lp_threshold,
    }
}

/// Product over coordinates of `E[f_ε^{(k_i)}(X_i) f_η^{(k_i)}(Y_i)]`, as a
/// function of the increment covariance triple.
#[derive(Debug, Clone)]
pub struct MomentIntegrand {
    pub epsilon: f64,
    pub eta: f64,
    orders: Vec<(u32, i32, Arc<Vec<f64>>)>,
}

impl MomentIntegrand {
    pub fn new(k: &[u32], epsilon: f64, eta: f64) -> Self {
        let mut distinct: Vec<u32> = k.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        let orders = distinct
            .into_iter()
            .map(|m| (m, k.iter().filter(|&&ki| ki == m).count() as i32, isserlis_coefficients(m, m)))
            .collect();
        MomentIntegrand { epsilon, eta, orders }
    }

    fn one_sided(&self, tr: &CovTriple, e1: f64, e2: f64) -> f64 {
        let l = tr.lambda + e1;
        let r = tr.rho + e2;
        let det = l * r - tr.mu * tr.mu;
        if !(det > 0.0) {
            return 0.0;
        }
        // E[f^{(m)}(X) f^{(m)}(Y)] = (2π)^{-1} det^{-1/2} E[U^m V^m] with
        // Var U = r/det, Var V = l/det, Cov(U, V) = +μ/det.
        let base = 1.0 / (2.0 * PI * det.sqrt());
        let (vx, vy, cov) = (r / det, l / det, tr.mu / det);
        let mut out = 1.0;
        for (m, mult, coeffs) in &self.orders {
            out *= (base * mixed_moment_with(coeffs, *m, *m, vx, vy, cov)).powi(*mult);
        }
        out
    }

    /// Value at a configuration whose first increment carries `ε` and second `η`,
    /// averaged with the swapped assignment (the `r ↔ r'` image).
    #[inline]
    pub fn eval(&self, tr: &CovTriple) -> f64 {
        if self.epsilon == self.eta {
            self.one_sided(tr, self.epsilon, self.eta)
        } else {
            0.5 * (self.one_sided(tr, self.epsilon, self.eta) + self.one_sided(tr, self.eta, self.epsilon))
        }
    }
}

/// Per-region values and their total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondMoment {
    pub epsilon: f64,
    pub eta: f64,
    pub regions: Vec<QuadResult>,
    pub total: QuadResult,
    pub regime: RegimeVerdict,
}

impl SecondMoment {
    pub fn region(&self, case: RegionCase) -> &QuadResult {
        &self.regions[case as usize]
    }
}

/// One region integral `∫ (t - a - b - c) F(a, b, c)` over the gap simplex.
pub fn region_integral(cfg: &ModelConfig, eta: f64, case: RegionCase, opts: &SimplexOptions) -> Integral {
    let integrand = MomentIntegrand::new(&cfg.k, cfg.epsilon, eta);
    let (h, t) = (cfg.hurst, cfg.t);
    integrate_gap_simplex(
        |a, b, c| {
            let w = t - a - b - c;
            if w <= 0.0 {
                return 0.0;
            }
            let tr = GapCoords { case, a, b, c }.triple(h);
            w * integrand.eval(&tr)
        },
        t,
        opts,
    )
}

/// `M(ε, η)` with `ε = cfg.epsilon`, computed region by region.
pub fn second_moment_quadrature(cfg: &ModelConfig, eta: f64, rel_tol: f64) -> Result<SecondMoment> {
    second_moment_with(cfg, eta, &SimplexOptions { rel_tol, ..SimplexOptions::default() })
}

pub fn second_moment_with(cfg: &ModelConfig, eta: f64, opts: &SimplexOptions) -> Result<SecondMoment> {
    cfg.validate()?;
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(DsltError::domain("eta", format!("mollification must be positive, got {eta}")));
    }
    if !(opts.rel_tol > 0.0) {
        return Err(DsltError::domain("rel_tol", "tolerance must be positive"));
    }
    let regime = existence_regime(cfg.hurst, &cfg.k, cfg.dim);
    let scale: f64 = RegionCase::ALL
        .iter()
        .map(|&c| region_integral(cfg, eta, c, &SimplexOptions::pilot()).abs_integral)
        .sum();
    let opts = &opts.with_scale(scale);
    let mut regions = Vec::with_capacity(3);
    let mut evals = 0;
    for case in RegionCase::ALL {
        let r = region_integral(cfg, eta, case, opts);
        evals += r.evals;
        regions.push(QuadResult::from_integral(&r, case.into()));
    }
    let total = QuadResult::total_of(&regions);
    if evals > opts.max_evals || total.abs_error_estimate > opts.rel_tol * total.value.abs() {
        return Err(DsltError::NonConvergence { value: total.value, error: total.abs_error_estimate, evals });
    }
    Ok(SecondMoment { epsilon: cfg.epsilon, eta, regions, total, regime })
}

/// Crude Monte Carlo over `[0, t]⁴` of `E[f_ε^{(k)}(B_s - B_r) f_η^{(k)}(B_{s'} - B_{r'})]`,
/// evaluated through [`cov_triple`] and [`pair_integral_exact`] on the full
/// domain rather than the symmetrised gap reduction.
pub fn second_moment_mc(cfg: &ModelConfig, eta: f64, n_points: usize, seed: u64) -> Result<McEstimate> {
    cfg.validate()?;
    const CHUNK: usize = 1 << 16;
    let (t, h, eps) = (cfg.t, cfg.hurst, cfg.epsilon);
    let unif = Uniform::new(0.0, t).expect("horizon is positive");
    let norm = (2.0 * PI).powi(-2 * cfg.dim as i32);
    let one_sided = |tr: &CovTriple, e1: f64, e2: f64| -> f64 {
        let mut v = norm;
        for &m in &cfg.k {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            v *= sign * pair_integral_exact(m, tr.lambda + e1, tr.rho + e2, tr.mu).unwrap_or(0.0);
        }
        v
    };
    let n_chunks = n_points.div_ceil(CHUNK);
    // (count, mean, M2) per chunk, merged in chunk order
    let parts: Vec<(f64, f64, f64)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = path_rng(seed, c as u64);
            let n = CHUNK.min(n_points - c * CHUNK);
            let (mut mean, mut m2) = (0.0, 0.0);
            for i in 0..n {
                let (r, s, rp, sp) =
                    (unif.sample(&mut rng), unif.sample(&mut rng), unif.sample(&mut rng), unif.sample(&mut rng));
                let x = if r < s && rp < sp {
                    let tr = cov_triple(r, s, rp, sp, h).expect("ordered times");
                    t.powi(4) * one_sided(&tr, eps, eta)
                } else {
                    0.0
                };
                let delta = x - mean;
                mean += delta / (i + 1) as f64;
                m2 += delta * (x - mean);
            }
            (n as f64, mean, m2)
        })
        .collect();
    let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
    for (nb, mb, m2b) in parts {
        let tot = n + nb;
        let delta = mb - mean;
        mean += delta * nb / tot;
        m2 += m2b + delta * delta * n * nb / tot;
        n = tot;
    }
    let variance = if n > 1.0 { m2 / (n - 1.0) } else { 0.0 };
    Ok(McEstimate { mean, variance, std_error: (variance / n).sqrt(), n_samples: n as usize, seed })
}

/// One step of the ε ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauchyRow {
    pub eps_from: f64,
    pub eps_to: f64,
    /// `E[(α̂_{ε_i} - α̂_{ε_{i+1}})²]`.
    pub increment: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauchyTable {
    pub eps_ladder: Vec<f64>,
    /// `M(ε_i, ε_i)` along the ladder.
    pub diagonal: Vec<QuadResult>,
    pub rows: Vec<CauchyRow>,
    /// `M(ε_{i+1}, ε_{i+1}) / M(ε_i, ε_i)`.
    pub growth_ratios: Vec<f64>,
    /// Aitken extrapolation of the growth ratios (needs four ladder values).
    /// Inside the L² regime the ratios tend to 1; outside they settle at a
    /// constant above 1 because `M` grows like a negative power of `ε`.
    pub extrapolated_growth: Option<f64>,
    /// All growth ratios exceed 1 and the extrapolated ratio exceeds
    /// [`DIVERGENCE_GROWTH`].
    pub diverging: bool,
    pub regime: RegimeVerdict,
}

/// Extrapolated growth ratio above which the ladder is flagged as diverging.
pub const DIVERGENCE_GROWTH: f64 = 1.05;

/// Aitken Δ² limit of the last three terms.
fn aitken_limit(xs: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 3 {
        return None;
    }
    let (x0, x1, x2) = (xs[n - 3], xs[n - 2], xs[n - 1]);
    let d2 = x2 - 2.0 * x1 + x0;
    if d2 == 0.0 {
        return Some(x2);
    }
    Some(x2 - (x2 - x1) * (x2 - x1) / d2)
}

pub fn cauchy_diagnostic(cfg: &ModelConfig, eps_ladder: &[f64], rel_tol: f64) -> Result<CauchyTable> {
    if eps_ladder.len() < 2 {
        return Err(DsltError::domain("eps_ladder", "need at least two values"));
    }
    if eps_ladder.windows(2).any(|w| !(w[1] < w[0])) || eps_ladder.iter().any(|e| !(*e > 0.0)) {
        return Err(DsltError::domain("eps_ladder", "values must be positive and strictly decreasing"));
    }
    let diagonal = eps_ladder
        .iter()
        .map(|&e| Ok(second_moment_quadrature(&cfg.with_epsilon(e), e, rel_tol)?.total))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (i, w) in eps_ladder.windows(2).enumerate() {
        let cross = second_moment_quadrature(&cfg.with_epsilon(w[0]), w[1], rel_tol)?.total;
        rows.push(CauchyRow {
            eps_from: w[0],
            eps_to: w[1],
            increment: diagonal[i].value + diagonal[i + 1].value - 2.0 * cross.value,
            error: diagonal[i].abs_error_estimate
                + diagonal[i + 1].abs_error_estimate
                + 2.0 * cross.abs_error_estimate,
        });
    }
    let growth_ratios: Vec<f64> = diagonal.windows(2).map(|w| w[1].value / w[0].value).collect();
    let extrapolated_growth = aitken_limit(&growth_ratios);
    let diverging =
        growth_ratios.iter().all(|&g| g > 1.0) && extrapolated_growth.is_some_and(|g| g > DIVERGENCE_GROWTH);
    Ok(CauchyTable {
        eps_ladder: eps_ladder.to_vec(),
        diagonal,
        rows,
        growth_ratios,
        extrapolated_growth,
        diverging,
        regime: existence_regime(cfg.hurst, &cfg.k, cfg.dim),
    })
}
