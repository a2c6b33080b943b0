//! High-resolution corner detection built on second-order Gaussian
//! directional derivative (SOGDD) filter banks.
//!
//! The pipeline stages are:
//!
//! 1. **image** – grayscale image container, PGM I/O, replicate padding,
//!    affine warps and photometric degradations.
//! 2. **filterbank** – discretized Gaussian / SOGDD kernels and the
//!    K-orientation response stack.
//! 3. **models** – analytic END-type and L-type corner models, their
//!    closed-form SOGDD angular profiles, a quadrature oracle, and the
//!    scale-admissibility analysis.
//! 4. **detector** – SODDC autocorrelation matrices, the eigenvalue corner
//!    measure, non-maximum suppression and thresholding.
//! 5. **eval** – ground-truth matching, average repeatability under
//!    transform suites, and homography-based mean matching accuracy.

pub mod detector;
pub mod error;
pub mod eval;
pub mod filterbank;
pub mod image;
pub mod linalg;
pub mod models;

pub use error::{Error, Result};

/// Formats a value with 9 significant digits so CSV/stdout output is
/// byte-stable across runs and platforms.
pub fn fmt_g9(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    format!("{:.8e}", v)
}
