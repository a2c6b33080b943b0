//! Discretized Gaussian and SOGDD kernels and the K-orientation response
//! stack.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{pad_replicate, GrayImage};

/// Support radius for a given scale: `ceil(4*sigma) + 1`.
///
/// 4 sigma captures >= 99.99% of the Gaussian mass; the extra tap covers the
/// polynomial factor's slower tail decay.
pub fn kernel_radius(sigma: f64) -> usize {
    (4.0 * sigma).ceil() as usize + 1
}

/// A square `(2r+1) x (2r+1)` tap grid sampled from a continuous filter.
#[derive(Debug, Clone)]
pub struct Kernel2D {
    radius: usize,
    sigma: f64,
    /// Orientation in radians; `None` for the plain Gaussian.
    theta: Option<f64>,
    taps: Vec<f64>,
}

impl Kernel2D {
    #[inline]
    pub fn radius(&self) -> usize {
        self.radius
    }

    #[inline]
    pub fn size(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn theta(&self) -> Option<f64> {
        self.theta
    }

    /// Tap at integer offset `(dx, dy)` from the center.
    #[inline]
    pub fn tap(&self, dx: isize, dy: isize) -> f64 {
        let r = self.radius as isize;
        self.taps[((dy + r) * (2 * r + 1) + (dx + r)) as usize]
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn sum(&self) -> f64 {
        self.taps.iter().sum()
    }
}

/// Samples the isotropic Gaussian at integer offsets and normalizes the taps
/// to sum to 1.
pub fn gaussian_kernel(sigma: f64, radius: usize) -> Result<Kernel2D> {
    if sigma <= 0.0 {
        return Err(Error::InvalidParameter("sigma must be positive".into()));
    }
    if radius < 1 {
        return Err(Error::InvalidParameter("radius must be at least 1".into()));
    }
    let size = 2 * radius + 1;
    let mut taps = Vec::with_capacity(size * size);
    let s2 = sigma * sigma;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * s2);
    for dy in -(radius as isize)..=radius as isize {
        for dx in -(radius as isize)..=radius as isize {
            let r2 = (dx * dx + dy * dy) as f64;
            taps.push(norm * (-r2 / (2.0 * s2)).exp());
        }
    }
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    Ok(Kernel2D {
        radius,
        sigma,
        theta: None,
        taps,
    })
}

/// Samples the second-order Gaussian directional derivative filter at integer
/// offsets, then subtracts the tap mean so the taps sum to exactly zero.
///
/// The continuous filter integrates to zero; without the correction the
/// truncation leaks DC into the corner measure.
pub fn sogdd_kernel(sigma: f64, theta: f64, radius: usize) -> Result<Kernel2D> {
    if sigma <= 0.0 {
        return Err(Error::InvalidParameter("sigma must be positive".into()));
    }
    let size = 2 * radius + 1;
    let mut taps = Vec::with_capacity(size * size);
    let s2 = sigma * sigma;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * s2);
    let (st, ct) = theta.sin_cos();
    for dy in -(radius as isize)..=radius as isize {
        for dx in -(radius as isize)..=radius as isize {
            let x = dx as f64;
            let y = dy as f64;
            let u = x * ct + y * st;
            let g = norm * (-(x * x + y * y) / (2.0 * s2)).exp();
            taps.push((u * u / s2 - 1.0) / s2 * g);
        }
    }
    let mean: f64 = taps.iter().sum::<f64>() / taps.len() as f64;
    for t in &mut taps {
        *t -= mean;
    }
    Ok(Kernel2D {
        radius,
        sigma,
        theta: Some(theta),
        taps,
    })
}

/// K SOGDD kernels at orientations `theta_k = (k-1) pi / K` sharing one scale
/// and radius.
#[derive(Debug, Clone)]
pub struct FilterBank {
    sigma: f64,
    kernels: Vec<Kernel2D>,
}

impl FilterBank {
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn orientation_count(&self) -> usize {
        self.kernels.len()
    }

    pub fn radius(&self) -> usize {
        self.kernels[0].radius()
    }

    pub fn kernels(&self) -> &[Kernel2D] {
        &self.kernels
    }
}

pub fn build_bank(sigma: f64, orientations: usize) -> Result<FilterBank> {
    if orientations < 2 {
        return Err(Error::InvalidParameter(
            "at least 2 filter orientations required".into(),
        ));
    }
    let radius = kernel_radius(sigma);
    let kernels = (0..orientations)
        .map(|k| {
            let theta = k as f64 * std::f64::consts::PI / orientations as f64;
            sogdd_kernel(sigma, theta, radius)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FilterBank { sigma, kernels })
}

/// Per-pixel vector of K SOGDD responses; layout is pixel-major so the K
/// values of one pixel are contiguous.
#[derive(Debug, Clone)]
pub struct ResponseStack {
    width: usize,
    height: usize,
    orientations: usize,
    abs: bool,
    data: Vec<f64>,
}

impl ResponseStack {
    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn orientations(&self) -> usize {
        self.orientations
    }

    pub fn is_abs(&self) -> bool {
        self.abs
    }

    /// Builds a stack from raw per-pixel response vectors (pixel-major
    /// layout). Intended for synthetic fixtures.
    pub fn from_values(
        width: usize,
        height: usize,
        orientations: usize,
        abs: bool,
        data: Vec<f64>,
    ) -> Result<Self> {
        if data.len() != width * height * orientations {
            return Err(Error::InvalidParameter(
                "response data length does not match dimensions".into(),
            ));
        }
        Ok(ResponseStack {
            width,
            height,
            orientations,
            abs,
            data,
        })
    }

    /// The length-K response vector at a pixel.
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> &[f64] {
        let base = (y * self.width + x) * self.orientations;
        &self.data[base..base + self.orientations]
    }
}

/// Convolves the image with every kernel of the bank (direct spatial
/// convolution with replicate padding).
///
/// The per-pixel accumulation order over taps is fixed row-major, so the
/// output is bit-identical for any rayon thread count.
pub fn convolve_bank(img: &GrayImage, bank: &FilterBank, take_abs: bool) -> ResponseStack {
    let r = bank.radius();
    let k = bank.orientation_count();
    let w = img.width();
    let h = img.height();
    let padded = pad_replicate(img, r);
    let pw = padded.width();
    let pdata = padded.data();
    let size = 2 * r + 1;

    let mut data = vec![0.0f64; w * h * k];
    data.par_chunks_mut(w * k).enumerate().for_each(|(y, row)| {
        for x in 0..w {
            for (ki, kernel) in bank.kernels().iter().enumerate() {
                let taps = kernel.taps();
                let mut acc = 0.0;
                // l(n) = sum_m I(n - m) psi(m); padded coords shift by +r
                let mut ti = 0;
                for my in 0..size {
                    let sy = y + 2 * r - my;
                    let row_base = sy * pw;
                    for mx in 0..size {
                        let sx = x + 2 * r - mx;
                        acc += pdata[row_base + sx] * taps[ti];
                        ti += 1;
                    }
                }
                row[x * k + ki] = if take_abs { acc.abs() } else { acc };
            }
        }
    });

    ResponseStack {
        width: w,
        height: h,
        orientations: k,
        abs: take_abs,
        data,
    }
}
