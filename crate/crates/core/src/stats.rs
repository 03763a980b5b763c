//! Summation and sample-statistics helpers shared by the Monte Carlo code.

use statrs::distribution::{ContinuousCDF, Normal};

const LEAF: usize = 64;

/// Neumaier-compensated sum of a short slice.
fn compensated_sum(xs: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Fixed-shape pairwise reduction with compensated leaves.
///
/// The tree depends only on `xs.len()`, so the result is identical for any
/// thread count that produced `xs` in the same order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= LEAF {
        compensated_sum(xs)
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    pairwise_sum(&sq) / (n - 1) as f64
}

/// Sample skewness and excess kurtosis (moment estimators).
pub fn skew_kurtosis(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = mean(xs);
    let c2: Vec<f64> = xs.iter().map(|x| (x - m).powi(2)).collect();
    let c3: Vec<f64> = xs.iter().map(|x| (x - m).powi(3)).collect();
    let c4: Vec<f64> = xs.iter().map(|x| (x - m).powi(4)).collect();
    let m2 = pairwise_sum(&c2) / n;
    let m3 = pairwise_sum(&c3) / n;
    let m4 = pairwise_sum(&c4) / n;
    if m2 <= 0.0 {
        return (0.0, 0.0);
    }
    (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

/// Asymptotic Kolmogorov critical coefficient c(alpha) = sqrt(-ln(alpha/2)/2).
pub fn ks_coefficient(alpha: f64) -> f64 {
    (-0.5 * (alpha / 2.0).ln()).sqrt()
}

/// One-sample Kolmogorov–Smirnov distance to a continuous CDF.
pub fn ks_one_sample(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0_f64, |d, (i, &x)| {
        let f = cdf(x);
        let hi = (i + 1) as f64 / n - f;
        let lo = f - i as f64 / n;
        d.max(hi).max(lo)
    })
}

/// KS distance between a sample and the normal law with the sample's own mean and variance.
pub fn ks_fitted_normal(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let sd = variance(xs).sqrt();
    if !(sd > 0.0) {
        return 1.0;
    }
    let normal = Normal::new(m, sd).expect("positive standard deviation");
    ks_one_sample(xs, |x| normal.cdf(x))
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0_f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Least-squares line through `(x, y)`; returns `(slope, intercept, r_squared)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) } else { 1.0 };
    (slope, intercept, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_sum_is_compensated() {
        let mut xs = vec![1.0e16];
        xs.extend(std::iter::repeat(1.0).take(60));
        xs.push(-1.0e16);
        assert_eq!(pairwise_sum(&xs), 60.0);
    }

    #[test]
    fn ks_coefficient_at_one_percent() {
        assert!((ks_coefficient(0.01) - 1.6276).abs() < 1e-4);
    }

    #[test]
    fn two_sample_identical_is_zero() {
        let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        let b: Vec<f64> = (0..100).map(|i| i as f64 + 1000.0).collect();
        assert_eq!(ks_two_sample(&a, &b), 1.0);
    }

    #[test]
    fn linear_fit_recovers_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
        let (s, c, r2) = linear_fit(&x, &y);
        assert!((s - 2.5).abs() < 1e-14 && (c + 1.0).abs() < 1e-14 && (r2 - 1.0).abs() < 1e-14);
    }
}
