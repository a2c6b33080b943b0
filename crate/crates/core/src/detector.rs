//! Discrete detection pipeline: SODDC matrix, eigenvalue corner measure,
//! non-maximum suppression and thresholding.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filterbank::{build_bank, convolve_bank, kernel_radius, ResponseStack};
use crate::fmt_g9;
use crate::image::GrayImage;
use crate::linalg::{sym_det_ldlt, sym_eigenvalues};

/// Machine-epsilon regularizer in the corner measure denominator.
pub const VARSIGMA: f64 = 2.22e-16;

/// Detector parameters.
///
/// `block` is the full SODDC accumulation window side `p + 1` (odd, default
/// 7). `margin` defaults to `kernel radius + block/2`, excluding every pixel
/// whose responses or window touch padded data.
#[derive(Debug, Clone, Copy)]
pub struct DetectorConfig {
    /// Squared filter scale; the noise-suppression constraint requires > 1.
    pub sigma2: f64,
    pub orientations: usize,
    pub block: usize,
    pub threshold: f64,
    pub nms_radius: usize,
    pub margin: Option<usize>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            sigma2: 1.2,
            orientations: 8,
            block: 7,
            threshold: 1e9,
            nms_radius: 1,
            margin: None,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 1.0) {
            return Err(Error::InvalidParameter(
                "sigma^2 must exceed 1 (noise-suppression constraint)".into(),
            ));
        }
        if self.orientations < 2 {
            return Err(Error::InvalidParameter(
                "at least 2 orientations required".into(),
            ));
        }
        if self.block < 3 || self.block % 2 == 0 {
            return Err(Error::InvalidParameter(
                "block side must be odd and >= 3".into(),
            ));
        }
        if !(self.threshold >= 0.0) {
            return Err(Error::InvalidParameter("threshold must be >= 0".into()));
        }
        if self.nms_radius == 0 {
            return Err(Error::InvalidParameter(
                "nms radius must be >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    /// Effective border margin in pixels.
    pub fn effective_margin(&self) -> usize {
        self.margin
            .unwrap_or_else(|| kernel_radius(self.sigma()) + self.block / 2)
    }
}

/// K x K autocorrelation matrix of response vectors over a window.
#[derive(Debug, Clone)]
pub struct SoddcMatrix {
    k: usize,
    data: Vec<f64>,
}

impl SoddcMatrix {
    pub fn order(&self) -> usize {
        self.k
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.data[a * self.k + b]
    }

    pub fn trace(&self) -> f64 {
        (0..self.k).map(|i| self.data[i * self.k + i]).sum()
    }

    pub fn from_raw(k: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != k * k {
            return Err(Error::InvalidParameter("matrix size mismatch".into()));
        }
        let m = SoddcMatrix { k, data };
        m.check_symmetry()?;
        Ok(m)
    }

    fn check_symmetry(&self) -> Result<()> {
        let scale = self
            .data
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        for a in 0..self.k {
            for b in (a + 1)..self.k {
                if (self.get(a, b) - self.get(b, a)).abs() > 1e-9 * scale {
                    return Err(Error::InvalidParameter(
                        "corner measure requires a symmetric matrix".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Accumulates the SODDC matrix over the `(p+1) x (q+1)` window centered at
/// `center`, in fixed row-major window order.
pub fn soddc_matrix(
    stack: &ResponseStack,
    center: (usize, usize),
    p: usize,
    q: usize,
) -> Result<SoddcMatrix> {
    if !stack.is_abs() {
        return Err(Error::InvalidParameter(
            "SODDC accumulation requires absolute-valued responses".into(),
        ));
    }
    if p % 2 != 0 || q % 2 != 0 || p < 2 || q < 2 {
        return Err(Error::InvalidParameter(
            "window extents p, q must be even and >= 2".into(),
        ));
    }
    let (cx, cy) = center;
    let (hx, hy) = (p / 2, q / 2);
    if cx < hx || cy < hy || cx + hx >= stack.width() || cy + hy >= stack.height() {
        return Err(Error::InvalidParameter(
            "SODDC window out of response range".into(),
        ));
    }
    let k = stack.orientations();
    let mut data = vec![0.0f64; k * k];
    for wy in (cy - hy)..=(cy + hy) {
        for wx in (cx - hx)..=(cx + hx) {
            let v = stack.at(wx, wy);
            for a in 0..k {
                let va = v[a];
                for b in a..k {
                    data[a * k + b] += va * v[b];
                }
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            data[a * k + b] = data[b * k + a];
        }
    }
    Ok(SoddcMatrix { k, data })
}

fn measure_from_eigenvalues(lambda: &mut [f64], trace: f64, varsigma: f64) -> Result<f64> {
    let floor = -1e-6 * trace.abs();
    for l in lambda.iter_mut() {
        if *l < floor {
            return Err(Error::Verification(format!(
                "eigenvalue {l} below PSD tolerance for trace {trace}"
            )));
        }
        if *l < 0.0 {
            *l = 0.0;
        }
    }
    let product: f64 = lambda.iter().product();
    Ok(product / (trace + varsigma))
}

/// Corner measure: product of the matrix's eigenvalues over their sum plus
/// the regularizer.
pub fn corner_measure(m: &SoddcMatrix, varsigma: f64) -> Result<f64> {
    m.check_symmetry()?;
    let mut lambda = sym_eigenvalues(m.k, &m.data);
    measure_from_eigenvalues(&mut lambda, m.trace(), varsigma)
}

/// Determinant/trace fast path for the corner measure; agrees with
/// [`corner_measure`] within 1e-9 relative on valid matrices.
pub fn corner_measure_fast(m: &SoddcMatrix, varsigma: f64) -> Result<f64> {
    m.check_symmetry()?;
    let det = sym_det_ldlt(m.k, &m.data).max(0.0);
    Ok(det / (m.trace() + varsigma))
}

/// An accepted corner with its measure value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corner {
    pub x: usize,
    pub y: usize,
    pub score: f64,
}

/// Detections sorted by descending score, ties broken row-major.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CornerList {
    pub corners: Vec<Corner>,
}

impl CornerList {
    pub fn len(&self) -> usize {
        self.corners.len()
    }

    pub fn is_empty(&self) -> bool {
        self.corners.is_empty()
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        self.corners
            .iter()
            .map(|c| (c.x as f64, c.y as f64))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,score\n");
        for c in &self.corners {
            s.push_str(&format!("{},{},{}\n", c.x, c.y, fmt_g9(c.score)));
        }
        s
    }
}

/// Corner-measure value at every pixel of the margin-excluded region
/// (zero elsewhere). Row-parallel; per-pixel accumulation order is fixed, so
/// the map is identical for any thread count.
pub fn measure_map(img: &GrayImage, cfg: &DetectorConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let margin = cfg.effective_margin();
    let (w, h) = (img.width(), img.height());
    if w <= 2 * margin + 1 || h <= 2 * margin + 1 {
        return Err(Error::InvalidParameter(format!(
            "image {w}x{h} too small for margin {margin}"
        )));
    }
    let bank = build_bank(cfg.sigma(), cfg.orientations)?;
    // the kernels are DC-free analytically; anchoring the image at its
    // minimum makes intensity-offset invariance hold exactly in floating
    // point too, instead of only up to rounding of the leaked DC term
    let lo = img.data().iter().cloned().fold(f64::INFINITY, f64::min);
    let anchored = GrayImage::from_fn(w, h, |x, y| img.get(x, y) - lo)?;
    let stack = convolve_bank(&anchored, &bank, true);
    let p = cfg.block - 1;

    let mut map = vec![0.0f64; w * h];
    map.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        if y < margin || y >= h - margin {
            return;
        }
        for (x, out) in row.iter_mut().enumerate().take(w - margin).skip(margin) {
            let m = soddc_matrix(&stack, (x, y), p, p).expect("window inside margin");
            *out = corner_measure(&m, VARSIGMA).expect("PSD by construction");
        }
    });
    Ok(map)
}

/// Strict-maximum NMS over the measure map followed by thresholding; plateau
/// ties keep only the row-major-first pixel.
fn extract_corners(
    map: &[f64],
    w: usize,
    h: usize,
    margin: usize,
    nms: usize,
    threshold: f64,
) -> CornerList {
    let mut corners = Vec::new();
    for y in margin..(h - margin) {
        for x in margin..(w - margin) {
            let v = map[y * w + x];
            if !(v > threshold) {
                continue;
            }
            let mut is_max = true;
            'scan: for ny in y.saturating_sub(nms)..=(y + nms).min(h - 1) {
                for nx in x.saturating_sub(nms)..=(x + nms).min(w - 1) {
                    if nx == x && ny == y {
                        continue;
                    }
                    let nv = map[ny * w + nx];
                    if nv > v || (nv == v && ny * w + nx < y * w + x) {
                        is_max = false;
                        break 'scan;
                    }
                }
            }
            if is_max {
                corners.push(Corner { x, y, score: v });
            }
        }
    }
    corners.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then_with(|| (a.y, a.x).cmp(&(b.y, b.x)))
    });
    CornerList { corners }
}

/// Full pipeline: filter bank, absolute responses, per-pixel measure, NMS,
/// threshold.
pub fn detect(img: &GrayImage, cfg: &DetectorConfig) -> Result<CornerList> {
    let map = measure_map(img, cfg)?;
    Ok(extract_corners(
        &map,
        img.width(),
        img.height(),
        cfg.effective_margin(),
        cfg.nms_radius,
        cfg.threshold,
    ))
}
