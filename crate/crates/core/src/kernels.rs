//! Gaussian mollifier `f_ε` of the Dirac delta and its partial derivatives.
//!
//! The derivatives use the Hermite closed form
//! `∂^k f_ε(x) = f_ε(x) ∏_i (-1)^{k_i} ε^{-k_i/2} He_{k_i}(x_i / √ε)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{DsltError, Result};

/// Probabilists' Hermite polynomial `He_m(x)` by the three-term recurrence.
pub fn hermite_he(m: u32, x: f64) -> f64 {
    match m {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut prev, mut cur) = (1.0, x);
            for j in 1..m {
                let next = x * cur - j as f64 * prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(DsltError::domain("epsilon", format!("must be positive, got {epsilon}")))
    }
}

/// `(2πε)^{-d/2} exp(-|x|² / 2ε)`.
pub fn heat_kernel(x: &[f64], epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    let r2: f64 = x.iter().map(|v| v * v).sum();
    Ok((2.0 * PI * epsilon).powf(-(x.len() as f64) / 2.0) * (-r2 / (2.0 * epsilon)).exp())
}

/// `∂^k f_ε(x)` for a multi-index `k` with one entry per coordinate of `x`.
pub fn kernel_derivative(x: &[f64], epsilon: f64, k: &[u32]) -> Result<f64> {
    if x.len() != k.len() {
        return Err(DsltError::domain("k", "multi-index length must match the point dimension"));
    }
    Ok(MollifiedKernel::new(epsilon, k.to_vec())?.eval(x))
}

/// Precomputed `f_ε^{(k)}` for repeated evaluation inside Monte Carlo loops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MollifiedKernel {
    pub epsilon: f64,
    pub k: Vec<u32>,
    norm: f64,
    inv_sqrt_eps: f64,
}

impl MollifiedKernel {
    pub fn new(epsilon: f64, k: Vec<u32>) -> Result<Self> {
        check_epsilon(epsilon)?;
        if k.is_empty() {
            return Err(DsltError::domain("d", "dimension must be at least 1"));
        }
        let order: u32 = k.iter().sum();
        let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
        let d = k.len() as f64;
        let norm = sign * (2.0 * PI * epsilon).powf(-d / 2.0) * epsilon.powf(-(order as f64) / 2.0);
        Ok(MollifiedKernel { epsilon, k, norm, inv_sqrt_eps: epsilon.sqrt().recip() })
    }

    pub fn dim(&self) -> usize {
        self.k.len()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.eval_with(|i| x[i])
    }

    /// Evaluates at the point whose i-th coordinate is `coord(i)`.
    #[inline]
    pub fn eval_with(&self, coord: impl Fn(usize) -> f64) -> f64 {
        let mut r2 = 0.0;
        let mut poly = 1.0;
        for (i, &ki) in self.k.iter().enumerate() {
            let xi = coord(i);
            r2 += xi * xi;
            if ki > 0 {
                poly *= hermite_he(ki, xi * self.inv_sqrt_eps);
            }
        }
        self.norm * poly * (-r2 / (2.0 * self.epsilon)).exp()
    }

    /// Same as [`eval_with`](Self::eval_with) but returns 0 once the Gaussian
    /// factor drops below `exp(-cutoff)`.
    #[inline]
    pub fn eval_truncated(&self, coord: impl Fn(usize) -> f64, cutoff: f64) -> f64 {
        let mut r2 = 0.0;
        for i in 0..self.k.len() {
            let xi = coord(i);
            r2 += xi * xi;
        }
        let e = r2 / (2.0 * self.epsilon);
        if e > cutoff {
            return 0.0;
        }
        let mut poly = 1.0;
        for (i, &ki) in self.k.iter().enumerate() {
            if ki > 0 {
                poly *= hermite_he(ki, coord(i) * self.inv_sqrt_eps);
            }
        }
        self.norm * poly * (-e).exp()
    }
}
