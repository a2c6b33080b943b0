//! Analytic END-type and L-type high-resolution corner models.
//!
//! Each model is a piecewise-constant gray field with value `T1` above a
//! polyline boundary and `T2` below. The angular SOGDD profile of a model
//! point is
//!
//! ```text
//! Psi(theta) = integral f(x,y) psi_{sigma,theta}(-x,-y) dx dy
//! ```
//!
//! evaluated with the model point at the origin. Two independent routes are
//! provided:
//!
//! * [`psi_closed_form`] — exact analytic value. The filter is a second
//!   directional derivative, so the integral over the T1 region reduces by
//!   the divergence theorem to line integrals of the first directional
//!   derivative along the region's boundary rays, each of which has an
//!   elementary erfc closed form.
//! * [`psi_quadrature`] — numeric oracle: the inner y-integral against the
//!   Gaussian is reduced to truncated moments, and the outer x-integral is
//!   done by adaptive Simpson per smooth piece.

use statrs::function::erf::erfc;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Which corner model family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Two adjacent corners joined by a short edge of length `d`.
    End,
    /// A single L-shaped corner with aperture angle `alpha`.
    L,
}

/// Parameters of a piecewise-constant corner model.
///
/// `beta` is unused for the L-type model. The two corners sit at `u = 0` and
/// `u = d` on the baseline; the edge midpoint is at `u = d/2`.
#[derive(Debug, Clone, Copy)]
pub struct CornerModelParams {
    pub kind: ModelKind,
    pub t1: f64,
    pub t2: f64,
    pub alpha: f64,
    pub beta: f64,
    pub d: f64,
}

impl CornerModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < PI / 2.0) {
            return Err(Error::InvalidParameter(
                "alpha must lie strictly inside (0, pi/2)".into(),
            ));
        }
        if self.kind == ModelKind::End && !(self.beta > 0.0 && self.beta < PI / 2.0) {
            return Err(Error::InvalidParameter(
                "beta must lie strictly inside (0, pi/2)".into(),
            ));
        }
        if !(self.d > 0.0) {
            return Err(Error::InvalidParameter("d must be positive".into()));
        }
        if !(self.t1.is_finite() && self.t2.is_finite()) {
            return Err(Error::InvalidParameter("gray levels must be finite".into()));
        }
        Ok(())
    }

    fn contrast(&self) -> f64 {
        self.t1 - self.t2
    }
}

/// The model point a profile is evaluated at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelPoint {
    /// The corner at `u = 0`.
    Corner,
    /// The edge midpoint at `u = d/2`.
    EdgeMid,
}

/// Gray value of the continuous model at `(x, y)` in the corner-at-origin
/// frame with y pointing up. Boundary points take `T1` (the region tests use
/// `>=` comparisons).
pub fn model_field(p: &CornerModelParams, x: f64, y: f64) -> f64 {
    let in_t1 = match p.kind {
        ModelKind::End => {
            (x < 0.0 && y >= (PI / 2.0 - p.alpha).tan() * x)
                || (x >= 0.0 && x < p.d && y >= 0.0)
                || (x >= p.d && y >= (PI / 2.0 + p.beta).tan() * (x - p.d))
        }
        ModelKind::L => (x < 0.0 && y >= (PI / 2.0 - p.alpha).tan() * x) || (x >= 0.0 && y >= 0.0),
    };
    if in_t1 {
        p.t1
    } else {
        p.t2
    }
}

/// Rasterizes the model onto a canvas with the corner at `origin`
/// (pixel coordinates, y pointing down).
pub fn render_model(
    p: &CornerModelParams,
    width: usize,
    height: usize,
    origin: (usize, usize),
) -> Result<GrayImage> {
    p.validate()?;
    let (ox, oy) = origin;
    if ox >= width || oy >= height || ox as f64 + p.d >= width as f64 {
        return Err(Error::InvalidParameter(
            "origin places the model outside the canvas".into(),
        ));
    }
    GrayImage::from_fn(width, height, |px, py| {
        let x = px as f64 - ox as f64;
        let y = oy as f64 - py as f64;
        model_field(p, x, y)
    })
}

// ---------------------------------------------------------------------------
// Closed form
// ---------------------------------------------------------------------------

/// Line integral of the first directional derivative of the Gaussian along a
/// ray from apex `p` in direction `phi` (unit speed), as needed by the
/// divergence-theorem reduction.
fn ray_integral(px: f64, py: f64, phi: f64, sigma: f64, theta: f64) -> f64 {
    let (sp, cp) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    let s2 = sigma * sigma;
    let mu = px * cp + py * sp; // p . w
    let perp = -px * sp + py * cp; // p . w_perp
    let pv = px * ct + py * st; // p . v
    let wv = cp * ct + sp * st; // w . v
    let pref = -1.0 / (2.0 * PI * s2 * s2) * (-(perp * perp) / (2.0 * s2)).exp();
    let a = (pv - mu * wv) * sigma * (PI / 2.0).sqrt() * erfc(mu / (sigma * std::f64::consts::SQRT_2));
    let b = wv * s2 * (-(mu * mu) / (2.0 * s2)).exp();
    pref * (a + b)
}

/// Integral of the SOGDD filter over the wedge with apex `(px, py)` swept
/// counterclockwise from direction `phi1` to `phi2` (opening < pi).
fn wedge_integral(px: f64, py: f64, phi1: f64, phi2: f64, sigma: f64, theta: f64) -> f64 {
    let (st, ct) = theta.sin_cos();
    let (s1, c1) = phi1.sin_cos();
    let (s2, c2) = phi2.sin_cos();
    // outward normals: ray 1 rotated -90 deg, ray 2 rotated +90 deg
    let vn1 = ct * s1 - st * c1;
    let vn2 = -ct * s2 + st * c2;
    ray_integral(px, py, phi1, sigma, theta) * vn1 + ray_integral(px, py, phi2, sigma, theta) * vn2
}

/// Exact angular SOGDD profile value of the selected model point.
///
/// The T1 region decomposes into the upper half plane (which integrates to
/// zero against the even, zero-mean filter) plus one wedge per model corner;
/// each wedge has the elementary closed form of [`wedge_integral`].
pub fn psi_closed_form(
    p: &CornerModelParams,
    at: ModelPoint,
    sigma: f64,
    theta: f64,
) -> Result<f64> {
    p.validate()?;
    if sigma <= 0.0 {
        return Err(Error::InvalidParameter("sigma must be positive".into()));
    }
    // apex of the alpha wedge, in the frame centered on the evaluated point
    let (ax, bx) = match at {
        ModelPoint::Corner => (0.0, p.d),
        ModelPoint::EdgeMid => (-p.d / 2.0, p.d / 2.0),
    };
    let alpha_wedge = wedge_integral(ax, 0.0, PI, 1.5 * PI - p.alpha, sigma, theta);
    let total = match p.kind {
        ModelKind::L => alpha_wedge,
        ModelKind::End => {
            alpha_wedge + wedge_integral(bx, 0.0, p.beta - PI / 2.0, 0.0, sigma, theta)
        }
    };
    Ok(p.contrast() * total)
}

// ---------------------------------------------------------------------------
// Quadrature oracle
// ---------------------------------------------------------------------------

/// Inner integral of the SOGDD filter over `y in [y0, inf)` at fixed `x`,
/// via truncated Gaussian moments.
fn inner_column(x: f64, y0: f64, sigma: f64, theta: f64) -> f64 {
    let (st, ct) = theta.sin_cos();
    let s2 = sigma * sigma;
    let m0 = sigma * (PI / 2.0).sqrt() * erfc(y0 / (sigma * std::f64::consts::SQRT_2));
    let e0 = (-(y0 * y0) / (2.0 * s2)).exp();
    let m1 = s2 * e0;
    let m2 = s2 * y0 * e0 + s2 * m0;
    let gx = (-(x * x) / (2.0 * s2)).exp() / (2.0 * PI * s2);
    let a = (x * ct) * (x * ct) / s2 - 1.0;
    let b = 2.0 * x * ct * st / s2;
    let c = st * st / s2;
    gx / s2 * (a * m0 + b * m1 + c * m2)
}

fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_simpson(
    f: &impl Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, fa, m, fm, flm);
    let right = simpson(m, fm, b, fb, frm);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adaptive_simpson(f, a, fa, m, fm, flm, left, tol * 0.5, depth - 1)
            + adaptive_simpson(f, m, fm, b, fb, frm, right, tol * 0.5, depth - 1)
    }
}

fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    // seed with a fixed 16-panel split so narrow features (width ~ sigma on
    // an ~8 sigma span) cannot be missed by the first Simpson estimate
    const PANELS: usize = 16;
    let h = (b - a) / PANELS as f64;
    let mut total = 0.0;
    for i in 0..PANELS {
        let pa = a + i as f64 * h;
        let pb = pa + h;
        let fa = f(pa);
        let fb = f(pb);
        let m = 0.5 * (pa + pb);
        let fm = f(m);
        let whole = simpson(pa, fa, pb, fb, fm);
        total += adaptive_simpson(&f, pa, fa, pb, fb, fm, whole, tol / PANELS as f64, 24);
    }
    total
}

/// Numeric oracle for [`psi_closed_form`], independent of the wedge algebra.
///
/// Absolute error target: `1e-6 * |T1 - T2|`.
pub fn psi_quadrature(
    p: &CornerModelParams,
    at: ModelPoint,
    sigma: f64,
    theta: f64,
) -> Result<f64> {
    p.validate()?;
    if sigma <= 0.0 {
        return Err(Error::InvalidParameter("sigma must be positive".into()));
    }
    let ext = 8.0 * sigma;
    let cot_a = 1.0 / p.alpha.tan();
    let tol = 2.5e-7;
    // lower-boundary pieces of the T1 region in the evaluated point's frame
    let (left_apex, right_apex) = match at {
        ModelPoint::Corner => (0.0, p.d),
        ModelPoint::EdgeMid => (-p.d / 2.0, p.d / 2.0),
    };
    let mut total = 0.0;
    total += integrate(
        |x| inner_column(x, cot_a * (x - left_apex), sigma, theta),
        left_apex - ext,
        left_apex,
        tol,
    );
    match p.kind {
        ModelKind::L => {
            total += integrate(
                |x| inner_column(x, 0.0, sigma, theta),
                left_apex,
                ext.max(left_apex),
                tol,
            );
        }
        ModelKind::End => {
            let cot_b = 1.0 / p.beta.tan();
            total += integrate(
                |x| inner_column(x, 0.0, sigma, theta),
                left_apex,
                right_apex,
                tol,
            );
            total += integrate(
                |x| inner_column(x, -cot_b * (x - right_apex), sigma, theta),
                right_apex,
                right_apex + ext,
                tol,
            );
        }
    }
    Ok(p.contrast() * total)
}

// ---------------------------------------------------------------------------
// Energy and scale admissibility
// ---------------------------------------------------------------------------

/// Integral of the squared profile over a full angular period, computed from
/// 256 uniform samples on `[0, pi)` and doubled (the profile has period pi).
pub fn integrate_squared_profile(f: impl Fn(f64) -> f64) -> f64 {
    const N: usize = 256;
    let h = PI / N as f64;
    let sum: f64 = (0..N).map(|j| f(j as f64 * h).powi(2)).sum();
    2.0 * sum * h
}

/// Directional-derivative energy of a model point (closed-form route).
pub fn energy(p: &CornerModelParams, at: ModelPoint, sigma: f64) -> Result<f64> {
    p.validate()?;
    if sigma <= 0.0 {
        return Err(Error::InvalidParameter("sigma must be positive".into()));
    }
    Ok(integrate_squared_profile(|theta| {
        psi_closed_form(p, at, sigma, theta).expect("validated params")
    }))
}

/// Least-squares quadratic fit `a s^2 + b s + c`.
#[derive(Debug, Clone, Copy)]
pub struct QuadraticFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// RMS residual of the fit.
    pub residual: f64,
}

impl QuadraticFit {
    pub fn roots(&self) -> Option<(f64, f64)> {
        let disc = self.b * self.b - 4.0 * self.a * self.c;
        if disc < 0.0 || self.a == 0.0 {
            return None;
        }
        let s = disc.sqrt();
        let r1 = (-self.b - s) / (2.0 * self.a);
        let r2 = (-self.b + s) / (2.0 * self.a);
        Some((r1.min(r2), r1.max(r2)))
    }
}

/// Result of sweeping the corner-vs-edge energy difference over a scale grid.
#[derive(Debug, Clone)]
pub struct ScaleAdmissibility {
    pub params: CornerModelParams,
    pub sigmas: Vec<f64>,
    /// `E(sigma) = energy(corner) - energy(edge)` at each grid point.
    pub energy_diff: Vec<f64>,
    /// Refined endpoints of the first `E > 0` run; `None` means the run
    /// reaches the corresponding grid boundary.
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    /// Quadratic fit to `sigma^4 * E(sigma)` (the polynomial envelope with
    /// the filter's 1/sigma^4 energy scaling removed), for documentation.
    pub fit: QuadraticFit,
    pub diagnostic: Option<String>,
}

fn bisect_zero(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, positive_at_lo: bool) -> f64 {
    // invariant: sign change between lo and hi
    for _ in 0..64 {
        if hi - lo <= 1e-4 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == positive_at_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Sweeps `E(sigma)` over a uniform grid and locates the admissible interval
/// where the corner's energy exceeds the edge midpoint's.
pub fn admissible_interval(
    p: &CornerModelParams,
    sigma_min: f64,
    sigma_max: f64,
    step: f64,
) -> Result<ScaleAdmissibility> {
    p.validate()?;
    if !(sigma_min > 0.0 && sigma_max > sigma_min && step > 0.0) {
        return Err(Error::InvalidParameter("bad sigma grid".into()));
    }
    if sigma_min > 0.5 || sigma_max < 3.0 || step > 0.01 + 1e-12 {
        return Err(Error::InvalidParameter(
            "sigma grid must cover at least (0.5, 3.0) with step <= 0.01".into(),
        ));
    }
    let n = ((sigma_max - sigma_min) / step).round() as usize + 1;
    let sigmas: Vec<f64> = (0..n).map(|i| sigma_min + i as f64 * step).collect();
    let ediff = |s: f64| {
        energy(p, ModelPoint::Corner, s).expect("validated") - energy(p, ModelPoint::EdgeMid, s).expect("validated")
    };
    let energy_diff: Vec<f64> = sigmas.iter().map(|&s| ediff(s)).collect();

    // first E > 0 run
    let first_pos = energy_diff.iter().position(|&e| e > 0.0);
    let (lower, upper, diagnostic) = match first_pos {
        None => (
            None,
            None,
            Some("no admissible scale in grid: E(sigma) <= 0 everywhere".to_string()),
        ),
        Some(i0) => {
            let lower = if i0 == 0 {
                None // positive already at the grid start
            } else {
                Some(bisect_zero(ediff, sigmas[i0 - 1], sigmas[i0], false))
            };
            let end = energy_diff[i0..].iter().position(|&e| e <= 0.0);
            let upper = end.map(|off| {
                let j = i0 + off;
                bisect_zero(ediff, sigmas[j - 1], sigmas[j], true)
            });
            let diagnostic = match (lower, upper) {
                (None, None) => Some("E(sigma) > 0 across the whole grid".to_string()),
                (None, Some(_)) => Some("E(sigma) > 0 from the grid start".to_string()),
                _ => None,
            };
            (lower, upper, diagnostic)
        }
    };

    // quadratic fit to sigma^4 * E(sigma)
    let ys: Vec<f64> = sigmas
        .iter()
        .zip(&energy_diff)
        .map(|(&s, &e)| s.powi(4) * e)
        .collect();
    let fit = fit_quadratic(&sigmas, &ys);

    Ok(ScaleAdmissibility {
        params: *p,
        sigmas,
        energy_diff,
        lower,
        upper,
        fit,
        diagnostic,
    })
}

fn fit_quadratic(xs: &[f64], ys: &[f64]) -> QuadraticFit {
    // normal equations for [x^2, x, 1]
    let mut m = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    for (&x, &y) in xs.iter().zip(ys) {
        let basis = [x * x, x, 1.0];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += basis[i] * basis[j];
            }
            rhs[i] += basis[i] * y;
        }
    }
    // Gaussian elimination with partial pivoting
    let mut aug = [[0.0f64; 4]; 3];
    for i in 0..3 {
        aug[i][..3].copy_from_slice(&m[i]);
        aug[i][3] = rhs[i];
    }
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&a, &b| aug[a][col].abs().partial_cmp(&aug[b][col].abs()).unwrap())
            .unwrap();
        aug.swap(col, piv);
        for row in (col + 1)..3 {
            let f = aug[row][col] / aug[col][col];
            for k in col..4 {
                aug[row][k] -= f * aug[col][k];
            }
        }
    }
    let mut coef = [0.0f64; 3];
    for i in (0..3).rev() {
        let mut v = aug[i][3];
        for j in (i + 1)..3 {
            v -= aug[i][j] * coef[j];
        }
        coef[i] = v / aug[i][i];
    }
    let residual = (xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| (coef[0] * x * x + coef[1] * x + coef[2] - y).powi(2))
        .sum::<f64>()
        / xs.len() as f64)
        .sqrt();
    QuadraticFit {
        a: coef[0],
        b: coef[1],
        c: coef[2],
        residual,
    }
}

/// One entry of an `(alpha, beta)` admissibility sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepEntry {
    pub alpha: f64,
    /// `None` for L-type models.
    pub beta: Option<f64>,
    /// The refined scale where `E` transitions from positive to negative,
    /// when the grid contains such a crossing.
    pub admissible_root: Option<f64>,
}

/// Default angle grid for the admissibility sweep.
pub const SWEEP_ANGLES: [f64; 6] = [
    PI / 12.0,
    PI / 8.0,
    PI / 6.0,
    PI / 4.0,
    PI / 3.0,
    5.0 * PI / 12.0,
];

/// Sweeps the admissibility analysis over an angle grid and reports the
/// per-combination positive-to-negative crossing of `E(sigma)`.
pub fn admissibility_sweep(
    kind: ModelKind,
    d: f64,
    angles: &[f64],
    sigma_max: f64,
) -> Result<Vec<SweepEntry>> {
    let mut out = Vec::new();
    match kind {
        ModelKind::End => {
            for &alpha in angles {
                for &beta in angles {
                    let p = CornerModelParams {
                        kind,
                        t1: 50.0,
                        t2: 100.0,
                        alpha,
                        beta,
                        d,
                    };
                    let adm = admissible_interval(&p, 0.5, sigma_max, 0.01)?;
                    out.push(SweepEntry {
                        alpha,
                        beta: Some(beta),
                        admissible_root: adm.upper,
                    });
                }
            }
        }
        ModelKind::L => {
            for &alpha in angles {
                let p = CornerModelParams {
                    kind,
                    t1: 50.0,
                    t2: 100.0,
                    alpha,
                    beta: PI / 4.0,
                    d,
                };
                let adm = admissible_interval(&p, 0.5, sigma_max, 0.01)?;
                out.push(SweepEntry {
                    alpha,
                    beta: None,
                    admissible_root: adm.upper,
                });
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Paired profiles
// ---------------------------------------------------------------------------

/// Angular profile of one model point on a uniform theta grid over
/// `[0, 2 pi)`, carrying both computation routes.
#[derive(Debug, Clone)]
pub struct SogddProfile {
    pub thetas: Vec<f64>,
    pub closed: Vec<f64>,
    pub quadrature: Vec<f64>,
}

impl SogddProfile {
    /// Max deviation between the two routes, relative to
    /// `max(1, |quadrature|)` pointwise.
    pub fn max_relative_deviation(&self) -> f64 {
        self.closed
            .iter()
            .zip(&self.quadrature)
            .map(|(&c, &q)| (c - q).abs() / q.abs().max(1.0))
            .fold(0.0, f64::max)
    }
}

fn profile(p: &CornerModelParams, at: ModelPoint, sigma: f64, samples: usize) -> Result<SogddProfile> {
    let thetas: Vec<f64> = (0..samples)
        .map(|j| j as f64 * 2.0 * PI / samples as f64)
        .collect();
    let closed = thetas
        .iter()
        .map(|&t| psi_closed_form(p, at, sigma, t))
        .collect::<Result<Vec<_>>>()?;
    let quadrature = thetas
        .iter()
        .map(|&t| psi_quadrature(p, at, sigma, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(SogddProfile {
        thetas,
        closed,
        quadrature,
    })
}

/// Paired corner/edge profiles for plot emission and verification.
pub fn model_profiles(
    p: &CornerModelParams,
    sigma: f64,
    samples: usize,
) -> Result<(SogddProfile, SogddProfile)> {
    let corner = profile(p, ModelPoint::Corner, sigma, samples)?;
    let edge = profile(p, ModelPoint::EdgeMid, sigma, samples)?;
    Ok((corner, edge))
}
