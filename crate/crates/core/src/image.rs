//! Grayscale image container, PGM I/O, padding, geometric transforms and
//! photometric degradations.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// A 2-D grid of real-valued luminance samples, stored row-major.
///
/// Values are nominally in `[0, 255]` for 8-bit sources but are not clamped;
/// intermediate stages (noise, warps, filter responses) may leave the range.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(
                "image dimensions must be at least 1x1".into(),
            ));
        }
        if data.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "data length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite pixel value".into()));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Bilinear sample at a real-valued position; out-of-range positions
    /// take the nearest edge value.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let xc = x.clamp(0.0, (self.width - 1) as f64);
        let yc = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = xc.floor() as usize;
        let y0 = yc.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = xc - x0 as f64;
        let fy = yc - y0 as f64;
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bot = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bot * fy
    }
}

/// What a geometric transform represents, carried for suite bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformKind {
    Rotation,
    IsoScale,
    AnisoScale,
    Shear,
    Identity,
}

/// A 2-D affine transform `p -> M p + t`.
#[derive(Debug, Clone, Copy)]
pub struct AffineTransform {
    pub m: [[f64; 2]; 2],
    pub t: [f64; 2],
    pub kind: TransformKind,
}

impl AffineTransform {
    pub fn new(m: [[f64; 2]; 2], t: [f64; 2], kind: TransformKind) -> Result<Self> {
        let a = Self { m, t, kind };
        if a.det().abs() <= 1e-12 {
            return Err(Error::InvalidParameter(
                "affine transform is not invertible".into(),
            ));
        }
        Ok(a)
    }

    pub fn identity() -> Self {
        Self {
            m: [[1.0, 0.0], [0.0, 1.0]],
            t: [0.0, 0.0],
            kind: TransformKind::Identity,
        }
    }

    pub fn rotation(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            m: [[c, -s], [s, c]],
            t: [0.0, 0.0],
            kind: TransformKind::Rotation,
        }
    }

    pub fn iso_scale(s: f64) -> Result<Self> {
        Self::new([[s, 0.0], [0.0, s]], [0.0, 0.0], TransformKind::IsoScale)
    }

    pub fn aniso_scale(sx: f64, sy: f64) -> Result<Self> {
        Self::new([[sx, 0.0], [0.0, sy]], [0.0, 0.0], TransformKind::AnisoScale)
    }

    /// Shear along x with factor `c`.
    pub fn shear(c: f64) -> Self {
        Self {
            m: [[1.0, c], [0.0, 1.0]],
            t: [0.0, 0.0],
            kind: TransformKind::Shear,
        }
    }

    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    #[inline]
    pub fn apply(&self, p: (f64, f64)) -> (f64, f64) {
        (
            self.m[0][0] * p.0 + self.m[0][1] * p.1 + self.t[0],
            self.m[1][0] * p.0 + self.m[1][1] * p.1 + self.t[1],
        )
    }

    pub fn inverse(&self) -> Result<Self> {
        let d = self.det();
        if d.abs() <= 1e-12 {
            return Err(Error::InvalidParameter(
                "affine transform is not invertible".into(),
            ));
        }
        let m = [
            [self.m[1][1] / d, -self.m[0][1] / d],
            [-self.m[1][0] / d, self.m[0][0] / d],
        ];
        let t = [
            -(m[0][0] * self.t[0] + m[0][1] * self.t[1]),
            -(m[1][0] * self.t[0] + m[1][1] * self.t[1]),
        ];
        Ok(Self {
            m,
            t,
            kind: self.kind,
        })
    }
}

/// A 3x3 projective transform, normalized so `h[2][2] == 1`.
#[derive(Debug, Clone, Copy)]
pub struct Homography {
    pub h: [[f64; 3]; 3],
}

impl Homography {
    pub fn new(mut h: [[f64; 3]; 3]) -> Result<Self> {
        let det = det3(&h);
        if det.abs() <= 1e-12 {
            return Err(Error::InvalidParameter(
                "homography is not invertible".into(),
            ));
        }
        let w = h[2][2];
        if w.abs() <= 1e-12 {
            return Err(Error::InvalidParameter(
                "homography has vanishing h[2][2]".into(),
            ));
        }
        for row in h.iter_mut() {
            for v in row.iter_mut() {
                *v /= w;
            }
        }
        Ok(Self { h })
    }

    pub fn identity() -> Self {
        Self {
            h: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn from_affine(a: &AffineTransform) -> Self {
        Self {
            h: [
                [a.m[0][0], a.m[0][1], a.t[0]],
                [a.m[1][0], a.m[1][1], a.t[1]],
                [0.0, 0.0, 1.0],
            ],
        }
    }

    /// Projects a Euclidean point; fails when the projected point is at
    /// infinity.
    pub fn project(&self, p: (f64, f64)) -> Result<(f64, f64)> {
        let u = self.h[0][0] * p.0 + self.h[0][1] * p.1 + self.h[0][2];
        let v = self.h[1][0] * p.0 + self.h[1][1] * p.1 + self.h[1][2];
        let w = self.h[2][0] * p.0 + self.h[2][1] * p.1 + self.h[2][2];
        if w.abs() <= 1e-12 {
            return Err(Error::InvalidParameter(
                "homography projects point to infinity".into(),
            ));
        }
        Ok((u / w, v / w))
    }
}

fn det3(h: &[[f64; 3]; 3]) -> f64 {
    h[0][0] * (h[1][1] * h[2][2] - h[1][2] * h[2][1])
        - h[0][1] * (h[1][0] * h[2][2] - h[1][2] * h[2][0])
        + h[0][2] * (h[1][0] * h[2][1] - h[1][1] * h[2][0])
}

// ---------------------------------------------------------------------------
// PGM I/O
// ---------------------------------------------------------------------------

/// Loads a binary (P5) or ASCII (P2) portable graymap with maxval <= 65535.
pub fn load_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let bytes = fs::read(path)?;
    decode_pgm(&bytes)
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.len() < 2 {
        return Err(Error::Format("empty or truncated PGM".into()));
    }
    let magic = &bytes[..2];
    let binary = match magic {
        b"P5" => true,
        b"P2" => false,
        _ => return Err(Error::Format("not a P2/P5 portable graymap".into())),
    };
    let mut pos = 2;
    let width = read_header_int(bytes, &mut pos)?;
    let height = read_header_int(bytes, &mut pos)?;
    let maxval = read_header_int(bytes, &mut pos)?;
    if width == 0 || height == 0 {
        return Err(Error::Format("zero image dimension in header".into()));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("unsupported maxval {}", maxval)));
    }
    let n = width * height;
    let mut data = Vec::with_capacity(n);
    if binary {
        // exactly one whitespace byte after maxval
        pos += 1;
        let wide = maxval > 255;
        let needed = n * if wide { 2 } else { 1 };
        if bytes.len() < pos + needed {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::UnexpectedEof,
                "truncated PGM payload",
            )));
        }
        if wide {
            for i in 0..n {
                let hi = bytes[pos + 2 * i] as u64;
                let lo = bytes[pos + 2 * i + 1] as u64;
                data.push((hi << 8 | lo) as f64);
            }
        } else {
            for i in 0..n {
                data.push(bytes[pos + i] as f64);
            }
        }
    } else {
        for _ in 0..n {
            let v = read_header_int(bytes, &mut pos).map_err(|_| {
                Error::Io(std::io::Error::new(
                    std::io::ErrorKind::UnexpectedEof,
                    "truncated PGM payload",
                ))
            })?;
            data.push(v as f64);
        }
    }
    if data.iter().any(|&v| v > 65535.0) {
        return Err(Error::Format("sample exceeds 16-bit range".into()));
    }
    GrayImage::new(width, height, data)
}

fn read_header_int(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    // skip whitespace and '#' comments
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
        *pos += 1;
    }
    if *pos == start {
        return Err(Error::Format("expected integer in PGM header".into()));
    }
    let s = std::str::from_utf8(&bytes[start..*pos]).unwrap();
    s.parse::<usize>()
        .map_err(|_| Error::Format("integer overflow in PGM header".into()))
}

/// Writes a binary P5 graymap; values are clamped and rounded to `[0, 255]`.
pub fn save_pgm(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let mut out = Vec::with_capacity(32 + img.width() * img.height());
    out.extend_from_slice(format!("P5\n{} {}\n255\n", img.width(), img.height()).as_bytes());
    for &v in img.data() {
        out.push(v.round().clamp(0.0, 255.0) as u8);
    }
    fs::write(path, out)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Padding, warping, degradations
// ---------------------------------------------------------------------------

/// Pads by `margin` pixels on every side, replicating the nearest edge pixel.
pub fn pad_replicate(img: &GrayImage, margin: usize) -> GrayImage {
    if margin == 0 {
        return img.clone();
    }
    let w = img.width() + 2 * margin;
    let h = img.height() + 2 * margin;
    GrayImage::from_fn(w, h, |x, y| {
        let sx = x.saturating_sub(margin).min(img.width() - 1);
        let sy = y.saturating_sub(margin).min(img.height() - 1);
        img.get(sx, sy)
    })
    .expect("padded dimensions are nonzero")
}

/// Warps by inverse mapping with bilinear interpolation.
///
/// The output canvas is the axis-aligned bounding box of the transformed
/// input pixel corners, and the returned transform is the exact forward map
/// from input pixel coordinates to output pixel coordinates (including the
/// induced re-centering translation), so ground-truth points can be mapped
/// consistently.
pub fn warp(img: &GrayImage, t: &AffineTransform) -> Result<(GrayImage, AffineTransform)> {
    if t.det().abs() <= 1e-12 {
        return Err(Error::InvalidParameter(
            "affine transform is not invertible".into(),
        ));
    }
    let w = img.width() as f64;
    let h = img.height() as f64;
    let corners = [
        (0.0, 0.0),
        (w - 1.0, 0.0),
        (0.0, h - 1.0),
        (w - 1.0, h - 1.0),
    ];
    let mut xmin = f64::INFINITY;
    let mut ymin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for &c in &corners {
        let (x, y) = t.apply(c);
        xmin = xmin.min(x);
        ymin = ymin.min(y);
        xmax = xmax.max(x);
        ymax = ymax.max(y);
    }
    let x0 = xmin.floor();
    let y0 = ymin.floor();
    let out_w = (xmax.ceil() - x0) as usize + 1;
    let out_h = (ymax.ceil() - y0) as usize + 1;
    let fwd = AffineTransform {
        m: t.m,
        t: [t.t[0] - x0, t.t[1] - y0],
        kind: t.kind,
    };
    let inv = fwd.inverse()?;
    let out = GrayImage::from_fn(out_w, out_h, |x, y| {
        let (sx, sy) = inv.apply((x as f64, y as f64));
        img.sample_bilinear(sx, sy)
    })?;
    Ok((out, fwd))
}

/// Adds i.i.d. zero-mean Gaussian noise from a seeded generator.
/// Deterministic for a fixed seed regardless of thread count.
pub fn add_gaussian_noise(img: &GrayImage, stddev: f64, seed: u64) -> Result<GrayImage> {
    if stddev < 0.0 {
        return Err(Error::InvalidParameter(
            "noise stddev must be nonnegative".into(),
        ));
    }
    if stddev == 0.0 {
        return Ok(img.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, stddev)
        .map_err(|e| Error::InvalidParameter(format!("bad noise distribution: {e}")))?;
    let data = img
        .data()
        .iter()
        .map(|&v| v + normal.sample(&mut rng))
        .collect();
    GrayImage::new(img.width(), img.height(), data)
}

/// An injected lossy codec; the numeric core never embeds one.
pub trait ImageCodec: Sync {
    fn encode_jpeg(&self, img: &GrayImage, quality: u8) -> Result<Vec<u8>>;
    fn decode_gray(&self, bytes: &[u8]) -> Result<GrayImage>;
}

/// Encode-then-decode through the supplied codec.
pub fn jpeg_roundtrip(
    img: &GrayImage,
    quality: u8,
    codec: Option<&dyn ImageCodec>,
) -> Result<GrayImage> {
    if !(1..=100).contains(&quality) {
        return Err(Error::InvalidParameter(
            "JPEG quality must be in 1..=100".into(),
        ));
    }
    let codec = codec.ok_or_else(|| Error::Capability("no JPEG codec injected".into()))?;
    let bytes = codec.encode_jpeg(img, quality)?;
    let out = codec.decode_gray(&bytes)?;
    if out.width() != img.width() || out.height() != img.height() {
        return Err(Error::Format("codec changed image dimensions".into()));
    }
    Ok(out)
}
