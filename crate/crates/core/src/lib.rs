//! Monte Carlo and quadrature tools for mollified derivatives of the
//! self-intersection local time of fractional Brownian motion.

pub mod chaos;
pub mod error;
pub mod estimator;
pub mod fbm_sim;
pub mod gaussian_moments;
pub mod kernels;
pub mod quadrature;
pub mod regularity;
pub mod second_moment;
pub mod stats;

pub use error::{DsltError, Result};
