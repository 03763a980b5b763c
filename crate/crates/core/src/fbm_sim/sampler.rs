use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{check_hurst, path_rng};
use crate::error::{DsltError, Result};

/// Embedding eigenvalues above `-EIGEN_CLIP_TOL` are clipped to zero; anything
/// more negative triggers the Cholesky fallback.
pub const EIGEN_CLIP_TOL: f64 = 1e-10;

/// Negative Cholesky pivots down to this size are treated as round-off.
const PIVOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerMethod {
    /// Circulant embedding, falling back to Cholesky if the embedding is not
    /// nonnegative definite.
    Auto,
    Circulant,
    Cholesky,
}

enum Factor {
    /// `sqrt(eigenvalue / 2N)` of the circulant embedding, plus the FFT plan.
    Circulant { scaled_sqrt: Vec<f64>, eigen: Vec<f64>, fft: Arc<dyn Fft<f64>> },
    /// Dense lower-triangular factor, row-major `n × n`.
    Cholesky { lower: Vec<f64> },
}

/// Generator of fractional Gaussian noise (fBm increments) on a uniform grid.
pub struct FgnSampler {
    hurst: f64,
    n: usize,
    dt: f64,
    scale: f64,
    factor: Factor,
}

/// Unit-step autocovariance of fractional Gaussian noise.
fn fgn_autocov(k: usize, hurst: f64) -> f64 {
    let p = 2.0 * hurst;
    let k = k as f64;
    0.5 * ((k + 1.0).powf(p) - 2.0 * k.powf(p) + (k - 1.0).abs().powf(p))
}

impl FgnSampler {
    pub fn new(hurst: f64, n_steps: usize, dt: f64, method: SamplerMethod) -> Result<Self> {
        check_hurst(hurst)?;
        if n_steps < 2 {
            return Err(DsltError::domain("n_steps", format!("need at least 2 steps, got {n_steps}")));
        }
        if !(dt > 0.0) {
            return Err(DsltError::domain("dt", "grid spacing must be positive"));
        }
        let factor = match method {
            SamplerMethod::Cholesky => Self::cholesky(hurst, n_steps)?,
            SamplerMethod::Circulant => Self::circulant(hurst, n_steps).ok_or_else(|| {
                DsltError::NotPositiveDefinite { index: 0, pivot: f64::NAN }
            })?,
            SamplerMethod::Auto => match Self::circulant(hurst, n_steps) {
                Some(f) => f,
                None => Self::cholesky(hurst, n_steps)?,
            },
        };
        Ok(FgnSampler { hurst, n: n_steps, dt, scale: dt.powf(hurst), factor })
    }

    fn circulant(hurst: f64, n: usize) -> Option<Factor> {
        let m = 2 * n;
        let mut row: Vec<Complex64> = (0..m)
            .map(|j| {
                let lag = if j <= n { j } else { m - j };
                Complex64::new(fgn_autocov(lag, hurst), 0.0)
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(m);
        fft.process(&mut row);
        let mut eigen = Vec::with_capacity(m);
        for z in &row {
            if z.re < -EIGEN_CLIP_TOL {
                return None;
            }
            eigen.push(z.re.max(0.0));
        }
        let scaled_sqrt = eigen.iter().map(|&l| (l / m as f64).sqrt()).collect();
        Some(Factor::Circulant { scaled_sqrt, eigen, fft })
    }

    fn cholesky(hurst: f64, n: usize) -> Result<Factor> {
        let gamma: Vec<f64> = (0..n).map(|k| fgn_autocov(k, hurst)).collect();
        let mut lower = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = gamma[i - j];
                for p in 0..j {
                    sum -= lower[i * n + p] * lower[j * n + p];
                }
                if i == j {
                    if sum < -PIVOT_TOL {
                        return Err(DsltError::NotPositiveDefinite { index: i, pivot: sum });
                    }
                    lower[i * n + i] = sum.max(0.0).sqrt();
                } else {
                    let d = lower[j * n + j];
                    lower[i * n + j] = if d > 0.0 { sum / d } else { 0.0 };
                }
            }
        }
        Ok(Factor::Cholesky { lower })
    }

    pub fn method(&self) -> SamplerMethod {
        match self.factor {
            Factor::Circulant { .. } => SamplerMethod::Circulant,
            Factor::Cholesky { .. } => SamplerMethod::Cholesky,
        }
    }

    pub fn n_steps(&self) -> usize {
        self.n
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    /// Smallest (unclipped-at-zero) embedding eigenvalue, if circulant.
    pub fn min_eigenvalue(&self) -> Option<f64> {
        match &self.factor {
            Factor::Circulant { eigen, .. } => eigen.iter().copied().reduce(f64::min),
            Factor::Cholesky { .. } => None,
        }
    }

    /// Draws `n_steps` increments into `out`.
    pub fn sample_increments<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.n);
        match &self.factor {
            Factor::Circulant { scaled_sqrt, fft, .. } => {
                let mut w: Vec<Complex64> = scaled_sqrt
                    .iter()
                    .map(|&s| {
                        let a: f64 = rng.sample(StandardNormal);
                        let b: f64 = rng.sample(StandardNormal);
                        Complex64::new(s * a, s * b)
                    })
                    .collect();
                fft.process(&mut w);
                for (o, z) in out.iter_mut().zip(&w) {
                    *o = self.scale * z.re;
                }
            }
            Factor::Cholesky { lower } => {
                let n = self.n;
                let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                for (i, o) in out.iter_mut().enumerate() {
                    let row = &lower[i * n..i * n + i + 1];
                    *o = self.scale * row.iter().zip(&z).map(|(l, z)| l * z).sum::<f64>();
                }
            }
        }
    }

    /// Fills one d-dimensional path (node-major) from substream `(seed, index)`.
    /// Coordinates draw from the stream in coordinate-major order.
    pub fn fill_path(&self, dim: usize, seed: u64, index: u64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), (self.n + 1) * dim);
        let mut rng = path_rng(seed, index);
        let mut inc = vec![0.0; self.n];
        for c in 0..dim {
            self.sample_increments(&mut rng, &mut inc);
            out[c] = 0.0;
            let mut acc = 0.0;
            for (j, dx) in inc.iter().enumerate() {
                acc += dx;
                out[(j + 1) * dim + c] = acc;
            }
        }
    }

    /// Covariance matrix of the increments implied by the factorisation
    /// (row-major `n × n`), reconstructed from the factor itself.
    pub fn implied_increment_covariance(&self) -> Vec<f64> {
        let n = self.n;
        let s2 = self.scale * self.scale;
        let mut cov = vec![0.0; n * n];
        match &self.factor {
            Factor::Circulant { eigen, .. } => {
                // c_k = (1/m) Σ_j λ_j cos(2π jk/m)
                let m = eigen.len();
                let mut spec: Vec<Complex64> = eigen.iter().map(|&l| Complex64::new(l, 0.0)).collect();
                FftPlanner::new().plan_fft_inverse(m).process(&mut spec);
                let auto: Vec<f64> = spec.iter().map(|z| z.re / m as f64).collect();
                for i in 0..n {
                    for j in 0..n {
                        cov[i * n + j] = s2 * auto[i.abs_diff(j)];
                    }
                }
            }
            Factor::Cholesky { lower } => {
                for i in 0..n {
                    for j in 0..=i {
                        let v: f64 = (0..=j).map(|p| lower[i * n + p] * lower[j * n + p]).sum();
                        cov[i * n + j] = s2 * v;
                        cov[j * n + i] = s2 * v;
                    }
                }
            }
        }
        cov
    }

    /// Covariance of the path values `B(t_1..t_n)` implied by the factor.
    pub fn implied_path_covariance(&self) -> Vec<f64> {
        let n = self.n;
        let inc = self.implied_increment_covariance();
        // prefix sums in both directions
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut v = inc[i * n + j];
                if i > 0 {
                    v += out[(i - 1) * n + j];
                }
                if j > 0 {
                    v += out[i * n + j - 1];
                }
                if i > 0 && j > 0 {
                    v -= out[(i - 1) * n + j - 1];
                }
                out[i * n + j] = v;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm_sim::fbm_covariance;

    fn max_path_cov_error(s: &FgnSampler) -> f64 {
        let n = s.n_steps();
        let implied = s.implied_path_covariance();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                let ti = (i + 1) as f64 * s.dt();
                let tj = (j + 1) as f64 * s.dt();
                let exact = fbm_covariance(ti, tj, s.hurst()).unwrap();
                worst = worst.max((implied[i * n + j] - exact).abs());
            }
        }
        worst
    }

    #[test]
    fn circulant_reproduces_covariance() {
        for h in [0.1, 0.3, 0.5, 2.0 / 3.0, 0.9] {
            let s = FgnSampler::new(h, 64, 1.0 / 64.0, SamplerMethod::Auto).unwrap();
            assert_eq!(s.method(), SamplerMethod::Circulant);
            assert!(max_path_cov_error(&s) < 1e-10, "H = {h}");
        }
    }

    #[test]
    fn cholesky_reproduces_covariance() {
        for h in [0.2, 0.75] {
            let s = FgnSampler::new(h, 40, 0.05, SamplerMethod::Cholesky).unwrap();
            assert!(max_path_cov_error(&s) < 1e-10, "H = {h}");
        }
    }

    #[test]
    fn cholesky_and_circulant_agree_on_covariance() {
        let a = FgnSampler::new(0.35, 16, 0.1, SamplerMethod::Circulant).unwrap();
        let b = FgnSampler::new(0.35, 16, 0.1, SamplerMethod::Cholesky).unwrap();
        let (ca, cb) = (a.implied_increment_covariance(), b.implied_increment_covariance());
        assert!(ca.iter().zip(&cb).all(|(x, y)| (x - y).abs() < 1e-12));
    }

    #[test]
    fn rejects_short_grid() {
        assert!(FgnSampler::new(0.5, 1, 1.0, SamplerMethod::Auto).is_err());
    }
}
