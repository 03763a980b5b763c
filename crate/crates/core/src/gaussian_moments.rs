//! Exact bivariate Gaussian integrals, the increment covariance triple
//! `(λ, ρ, μ)`, and the bound expressions these quantities are compared with.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock, RwLock};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DsltError, Result};
use crate::fbm_sim::{check_hurst, path_rng};

/// Variances and covariance of two fBm increments `B_s - B_r`, `B_{s'} - B_{r'}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovTriple {
    pub lambda: f64,
    pub rho: f64,
    pub mu: f64,
}

impl CovTriple {
    /// `λρ - μ²`.
    pub fn det(&self) -> f64 {
        self.lambda * self.rho - self.mu * self.mu
    }
}

/// The three interleavings of `r < s` and `r' < s'` (with `r < r'`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionCase {
    /// `r < r' < s < s'`, gaps `a = r' - r`, `b = s - r'`, `c = s' - s`.
    D1,
    /// `r < r' < s' < s`, gaps `a = r' - r`, `b = s' - r'`, `c = s - s'`.
    D2,
    /// `r < s < r' < s'`, gaps `a = s - r`, `b = r' - s`, `c = s' - r'`.
    D3,
}

impl RegionCase {
    pub const ALL: [RegionCase; 3] = [RegionCase::D1, RegionCase::D2, RegionCase::D3];

    pub fn name(&self) -> &'static str {
        match self {
            RegionCase::D1 => "D1",
            RegionCase::D2 => "D2",
            RegionCase::D3 => "D3",
        }
    }
}

/// Consecutive gaps of an ordered configuration `(r, r', s, s')`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapCoords {
    pub case: RegionCase,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl GapCoords {
    pub fn new(case: RegionCase, a: f64, b: f64, c: f64) -> Result<Self> {
        if [a, b, c].iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
            return Err(DsltError::domain("gaps", format!("gaps must be nonnegative, got ({a}, {b}, {c})")));
        }
        Ok(GapCoords { case, a, b, c })
    }

    /// Times `(r, s, r', s')` of the configuration starting at `r = origin`.
    pub fn times(&self, origin: f64) -> (f64, f64, f64, f64) {
        let (a, b, c) = (self.a, self.b, self.c);
        let r = origin;
        match self.case {
            RegionCase::D1 => (r, r + a + b, r + a, r + a + b + c),
            RegionCase::D2 => (r, r + a + b + c, r + a, r + a + b),
            RegionCase::D3 => (r, r + a, r + a + b, r + a + b + c),
        }
    }

    /// `(λ, ρ, μ)` directly in gap coordinates.
    #[inline]
    pub fn triple(&self, hurst: f64) -> CovTriple {
        let p = 2.0 * hurst;
        let pw = |x: f64| x.powf(p);
        let (a, b, c) = (self.a, self.b, self.c);
        match self.case {
            RegionCase::D1 => CovTriple {
                lambda: pw(a + b),
                rho: pw(b + c),
                mu: 0.5 * (pw(a + b + c) + pw(b) - pw(a) - pw(c)),
            },
            RegionCase::D2 => CovTriple {
                lambda: pw(a + b + c),
                rho: pw(b),
                mu: 0.5 * (pw(a + b) + pw(b + c) - pw(a) - pw(c)),
            },
            RegionCase::D3 => CovTriple { lambda: pw(a), rho: pw(c), mu: 0.5 * second_difference(b, a, c, p) },
        }
    }
}

/// `(x + h)^p - x^p` without cancellation for `h ≪ x`.
#[inline]
fn forward_difference(x: f64, h: f64, p: f64) -> f64 {
    if x == 0.0 {
        h.powf(p)
    } else {
        x.powf(p) * (p * (h / x).ln_1p()).exp_m1()
    }
}

/// `(b+a+c)^p - (b+a)^p - (b+c)^p + b^p`, differencing first along the shorter
/// gap so that the rounding error stays relative to the larger one.
#[inline]
fn second_difference(b: f64, a: f64, c: f64, p: f64) -> f64 {
    let (short, long) = if a <= c { (a, c) } else { (c, a) };
    forward_difference(b + long, short, p) - forward_difference(b, short, p)
}

/// `(λ, ρ, μ)` for the increments over `[r, s]` and `[rp, sp]`.
pub fn cov_triple(r: f64, s: f64, rp: f64, sp: f64, hurst: f64) -> Result<CovTriple> {
    check_hurst(hurst)?;
    if !(r < s) || !(rp < sp) {
        return Err(DsltError::domain("times", format!("need r < s and r' < s', got ({r}, {s}, {rp}, {sp})")));
    }
    let p = 2.0 * hurst;
    let pw = |x: f64| x.abs().powf(p);
    Ok(CovTriple {
        lambda: pw(s - r),
        rho: pw(sp - rp),
        mu: 0.5 * (pw(sp - r) + pw(s - rp) - pw(sp - s) - pw(r - rp)),
    })
}

type CoeffTable = RwLock<HashMap<(u32, u32), Arc<Vec<f64>>>>;

fn coeff_table() -> &'static CoeffTable {
    static TABLE: OnceLock<CoeffTable> = OnceLock::new();
    TABLE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Wick-pairing coefficients of `E[X^m Y^n]`.
///
/// Entry `j` multiplies `vx^{(m-j)/2} vy^{(n-j)/2} cov^j`, the contribution of
/// pairings with exactly `j` cross pairs. Built by the Isserlis recursion
/// `E[X^m Y^n] = (m-1) vx E[X^{m-2} Y^n] + n cov E[X^{m-1} Y^{n-1}]` and memoized.
pub fn isserlis_coefficients(m: u32, n: u32) -> Arc<Vec<f64>> {
    if let Some(c) = coeff_table().read().expect("coefficient table poisoned").get(&(m, n)) {
        return Arc::clone(c);
    }
    let mut coeffs = vec![0.0; m.min(n) as usize + 1];
    if m == 0 {
        if n % 2 == 0 {
            coeffs[0] = double_factorial(n as i64 - 1);
        }
    } else {
        if m >= 2 {
            for (j, v) in isserlis_coefficients(m - 2, n).iter().enumerate() {
                coeffs[j] += (m - 1) as f64 * v;
            }
        }
        if n >= 1 {
            for (j, v) in isserlis_coefficients(m - 1, n - 1).iter().enumerate() {
                coeffs[j + 1] += n as f64 * v;
            }
        }
    }
    let coeffs = Arc::new(coeffs);
    coeff_table()
        .write()
        .expect("coefficient table poisoned")
        .entry((m, n))
        .or_insert_with(|| Arc::clone(&coeffs));
    coeffs
}

fn double_factorial(k: i64) -> f64 {
    let mut out = 1.0;
    let mut i = k;
    while i > 1 {
        out *= i as f64;
        i -= 2;
    }
    out
}

/// `E[X^m Y^n]` for a centred Gaussian pair with the given coefficient table
/// (from [`isserlis_coefficients`]`(m, n)`).
#[inline]
pub fn mixed_moment_with(coeffs: &[f64], m: u32, n: u32, var_x: f64, var_y: f64, cov: f64) -> f64 {
    let mut total = 0.0;
    for (j, &c) in coeffs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let j32 = j as u32;
        total += c
            * var_x.powi(((m - j32) / 2) as i32)
            * var_y.powi(((n - j32) / 2) as i32)
            * cov.powi(j as i32);
    }
    total
}

/// `E[X^m Y^n]` for a centred Gaussian pair.
pub fn gaussian_mixed_moment(m: u32, n: u32, var_x: f64, var_y: f64, cov: f64) -> f64 {
    mixed_moment_with(&isserlis_coefficients(m, n), m, n, var_x, var_y, cov)
}

fn check_det(lam: f64, rho: f64, mu: f64) -> Result<f64> {
    let det = lam * rho - mu * mu;
    if lam > 0.0 && rho > 0.0 && det > 0.0 {
        Ok(det)
    } else {
        Err(DsltError::Degenerate { det })
    }
}

/// `∫∫ x^m y^n exp(-(λx² + ρy² + 2μxy)/2) dx dy`.
pub fn pair_integral_mixed(m: u32, n: u32, lam: f64, rho: f64, mu: f64) -> Result<f64> {
    let det = check_det(lam, rho, mu)?;
    Ok(2.0 * PI / det.sqrt() * gaussian_mixed_moment(m, n, rho / det, lam / det, -mu / det))
}

/// `∫∫ x^m y^m exp(-(λx² + ρy² + 2μxy)/2) dx dy`, exactly.
pub fn pair_integral_exact(m: u32, lam: f64, rho: f64, mu: f64) -> Result<f64> {
    pair_integral_mixed(m, m, lam, rho, mu)
}

/// Upper-bound expression for `|pair_integral_exact|` with unit constant.
///
/// Large-correlation branch (`μ²/(λρ-μ²) >= 1`): `|μ|^m / det^{m+1/2}`.
/// Otherwise `|μ| / det^{m/2+1}` for odd `m` and `det^{-(m+1)/2}` for even `m`.
pub fn lemma_bound(m: u32, lam: f64, rho: f64, mu: f64) -> Result<f64> {
    let det = check_det(lam, rho, mu)?;
    let mf = m as f64;
    Ok(if mu * mu / det >= 1.0 {
        mu.abs().powi(m as i32) / det.powf(mf + 0.5)
    } else if m % 2 == 1 {
        mu.abs() / det.powf(mf / 2.0 + 1.0)
    } else {
        det.powf(-(mf + 1.0) / 2.0)
    })
}

/// Lower-bound expression for `λρ - μ²` on each region, with unit constant.
pub fn region_lower_bound(gaps: &GapCoords, hurst: f64) -> f64 {
    let p = 2.0 * hurst;
    let pw = |x: f64| x.powf(p);
    let (a, b, c) = (gaps.a, gaps.b, gaps.c);
    match gaps.case {
        RegionCase::D1 => pw(a + b) * pw(c) + pw(a) * pw(b + c),
        RegionCase::D2 => pw(b) * (pw(a) + pw(c)),
        RegionCase::D3 => pw(a * c),
    }
}

/// One draw of the pair-integral bound check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaBoundSample {
    pub m: u32,
    pub lambda: f64,
    pub rho: f64,
    pub mu: f64,
    pub exact: f64,
    pub bound: f64,
    pub ratio: f64,
}

/// `|pair_integral_exact| / lemma_bound` at `n` draws with `m <= max_m` and
/// `(λ, ρ, μ)` uniform in `[0.1, 10]³`, rejecting `λρ - μ² <= 0.01`.
pub fn sample_lemma_bounds(n: usize, max_m: u32, seed: u64) -> Result<Vec<LemmaBoundSample>> {
    let mut rng = path_rng(seed, 0);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let m = rng.random_range(0..=max_m);
        let (lambda, rho, mu) =
            (rng.random_range(0.1..=10.0), rng.random_range(0.1..=10.0), rng.random_range(0.1..=10.0));
        if lambda * rho - mu * mu <= 0.01 {
            continue;
        }
        let exact = pair_integral_exact(m, lambda, rho, mu)?;
        let bound = lemma_bound(m, lambda, rho, mu)?;
        out.push(LemmaBoundSample { m, lambda, rho, mu, exact, bound, ratio: exact.abs() / bound });
    }
    Ok(out)
}

/// One draw of the region bound check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionBoundSample {
    pub hurst: f64,
    pub gaps: GapCoords,
    /// `λρ - μ²` from the gap formulas.
    pub exact: f64,
    pub bound: f64,
    pub ratio: f64,
}

/// `(λρ - μ²) / region_lower_bound` at `n` gap triples uniform in `(0, t]³`.
pub fn sample_region_bounds(case: RegionCase, hurst: f64, t: f64, n: usize, seed: u64) -> Result<Vec<RegionBoundSample>> {
    check_hurst(hurst)?;
    if !(t > 0.0) || !t.is_finite() {
        return Err(DsltError::domain("t", format!("horizon must be positive, got {t}")));
    }
    let stream = RegionCase::ALL.iter().position(|c| *c == case).unwrap_or(0) as u64;
    let mut rng = path_rng(seed, stream);
    let mut draw = || t * (1.0 - rng.random::<f64>());
    (0..n)
        .map(|_| {
            let gaps = GapCoords::new(case, draw(), draw(), draw())?;
            let exact = gaps.triple(hurst).det();
            let bound = region_lower_bound(&gaps, hurst);
            Ok(RegionBoundSample { hurst, gaps, exact, bound, ratio: exact / bound })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm_sim::fbm_covariance;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn binom(n: u32, k: u32) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    /// Pairing count `C(m,j) C(n,j) j! (m-j-1)!! (n-j-1)!!`.
    fn pairing_count(m: u32, n: u32, j: u32) -> f64 {
        if (m - j) % 2 == 1 || (n - j) % 2 == 1 {
            return 0.0;
        }
        let jf: f64 = (1..=j).map(|i| i as f64).product();
        binom(m, j) * binom(n, j) * jf * double_factorial(m as i64 - j as i64 - 1)
            * double_factorial(n as i64 - j as i64 - 1)
    }

    #[test]
    fn recursion_matches_pairing_counts() {
        for m in 0..=8 {
            for n in 0..=8 {
                let c = isserlis_coefficients(m, n);
                for j in 0..=m.min(n) {
                    assert_eq!(c[j as usize], pairing_count(m, n, j), "m={m} n={n} j={j}");
                }
            }
        }
    }

    #[test]
    fn mixed_moment_special_cases() {
        // E[X^4] = 3 v^2, E[X^2 Y^2] = vx vy + 2 c^2
        assert_eq!(gaussian_mixed_moment(4, 0, 2.0, 9.0, 0.5), 12.0);
        assert!((gaussian_mixed_moment(2, 2, 2.0, 3.0, 0.5) - 6.5).abs() < 1e-14);
        assert_eq!(gaussian_mixed_moment(3, 0, 2.0, 1.0, 0.1), 0.0);
    }

    #[test]
    fn pair_integral_examples() {
        let tau = 2.0 * PI;
        assert!((pair_integral_exact(0, 1.0, 1.0, 0.0).unwrap() - tau).abs() < 1e-14);
        assert!((pair_integral_exact(2, 1.0, 1.0, 0.0).unwrap() - tau).abs() < 1e-14);
        let v = pair_integral_exact(1, 2.0, 2.0, 1.0).unwrap();
        assert!((v + tau / 3f64.powf(1.5)).abs() < 1e-14);
        assert!((v + 1.209_200).abs() < 1e-6);
        assert!(matches!(pair_integral_exact(1, 1.0, 1.0, 1.0), Err(DsltError::Degenerate { .. })));
        assert!(pair_integral_exact(1, -1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn lemma_bound_examples() {
        assert!((lemma_bound(2, 2.0, 3.0, 0.0).unwrap() - 6f64.powf(-1.5)).abs() < 1e-15);
        assert_eq!(lemma_bound(3, 2.0, 3.0, 0.0).unwrap(), 0.0);
        let b = lemma_bound(1, 2.0, 2.0, 1.0).unwrap();
        assert!((b - 3f64.powf(-1.5)).abs() < 1e-15);
        let exact = pair_integral_exact(1, 2.0, 2.0, 1.0).unwrap();
        assert!((exact.abs() / (2.0 * PI * b) - 1.0).abs() < 1e-12);
        // branch boundary mu^2 = det uses the large-correlation form
        let (lam, rho, mu) = (2.0, 1.0, 1.0);
        assert_eq!(lemma_bound(3, lam, rho, mu).unwrap(), 1.0);
    }

    #[test]
    fn cov_triple_examples() {
        let t = cov_triple(0.0, 1.0, 2.0, 3.0, 0.5).unwrap();
        assert!((t.lambda - 1.0).abs() < 1e-15 && (t.rho - 1.0).abs() < 1e-15 && t.mu.abs() < 1e-15);
        let t = cov_triple(0.0, 2.0, 1.0, 3.0, 0.5).unwrap();
        assert!((t.lambda - 2.0).abs() < 1e-14 && (t.rho - 2.0).abs() < 1e-14 && (t.mu - 1.0).abs() < 1e-14);
        let t = cov_triple(0.0, 1.0, 2.0, 3.0, 2.0 / 3.0).unwrap();
        let expect = 0.5 * (3f64.powf(4.0 / 3.0) + 1.0 - 2.0 * 2f64.powf(4.0 / 3.0));
        assert!((t.mu - expect).abs() < 1e-14);
        assert!((t.mu - 0.143_532_256).abs() < 1e-9);
        assert!(cov_triple(1.0, 0.0, 2.0, 3.0, 0.5).is_err());
    }

    #[test]
    fn region_bound_examples() {
        let g = GapCoords::new(RegionCase::D3, 1.0, 0.4, 1.0).unwrap();
        assert_eq!(region_lower_bound(&g, 0.37), 1.0);
        let g = GapCoords::new(RegionCase::D2, 0.3, 0.0, 0.5).unwrap();
        assert_eq!(region_lower_bound(&g, 0.6), 0.0);
        let g = GapCoords::new(RegionCase::D1, 1.0, 1.0, 1.0).unwrap();
        assert!((region_lower_bound(&g, 0.5) - 4.0).abs() < 1e-14);
        let (r, s, rp, sp) = g.times(0.0);
        assert_eq!((r, rp, s, sp), (0.0, 1.0, 2.0, 3.0));
        let tr = cov_triple(r, s, rp, sp, 0.5).unwrap();
        assert!((tr.det() - 3.0).abs() < 1e-14);
        assert!(GapCoords::new(RegionCase::D1, -1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn gap_triples_agree_with_time_triples_and_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..1000 {
            let h = rng.random_range(0.05..0.95);
            let case = RegionCase::ALL[rng.random_range(0..3)];
            let g = GapCoords::new(case, rng.random(), rng.random(), rng.random()).unwrap();
            let origin = rng.random::<f64>();
            let (r, s, rp, sp) = g.times(origin);
            let via_times = cov_triple(r, s, rp, sp, h).unwrap();
            let via_gaps = g.triple(h);
            let cov = |x: f64, y: f64| fbm_covariance(x, y, h).unwrap();
            let wick = cov(s, sp) - cov(s, rp) - cov(r, sp) + cov(r, rp);
            assert!((via_times.mu - wick).abs() < 1e-12);
            assert!((via_gaps.mu - via_times.mu).abs() < 1e-12);
            assert!((via_gaps.lambda - via_times.lambda).abs() < 1e-12);
            assert!((via_gaps.rho - via_times.rho).abs() < 1e-12);
        }
    }
}
