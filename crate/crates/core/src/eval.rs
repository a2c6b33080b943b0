//! Quantitative protocols: ground-truth matching and localization error,
//! average repeatability under geometric/photometric transform suites, and
//! homography-based mean matching accuracy.

use rayon::prelude::*;

use crate::detector::{detect, CornerList, DetectorConfig};
use crate::error::{Error, Result};
use crate::fmt_g9;
use crate::image::{
    add_gaussian_noise, jpeg_roundtrip, warp, AffineTransform, GrayImage, Homography, ImageCodec,
};

/// Reference corner coordinates for a specific image.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    points: Vec<(f64, f64)>,
}

impl GroundTruth {
    pub fn new(points: Vec<(f64, f64)>, width: usize, height: usize) -> Result<Self> {
        for &(x, y) in &points {
            if !(x >= 0.0 && y >= 0.0 && x < width as f64 && y < height as f64) {
                return Err(Error::InvalidParameter(format!(
                    "ground-truth point ({x}, {y}) outside {width}x{height} image"
                )));
            }
        }
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                if points[i] == points[j] {
                    return Err(Error::InvalidParameter(
                        "duplicate ground-truth point".into(),
                    ));
                }
            }
        }
        Ok(GroundTruth { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Greedy one-to-one matching by ascending distance; only pairs within
/// `max_dist` are considered. Ties broken by index order for determinism.
fn greedy_match(
    a: &[(f64, f64)],
    b: &[(f64, f64)],
    max_dist: f64,
) -> Vec<(usize, usize, f64)> {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (i, pa) in a.iter().enumerate() {
        for (j, pb) in b.iter().enumerate() {
            let d = ((pa.0 - pb.0).powi(2) + (pa.1 - pb.1).powi(2)).sqrt();
            if d <= max_dist {
                candidates.push((d, i, j));
            }
        }
    }
    candidates.sort_by(|x, y| {
        x.0.partial_cmp(&y.0)
            .unwrap()
            .then_with(|| (x.1, x.2).cmp(&(y.1, y.2)))
    });
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut out = Vec::new();
    for (d, i, j) in candidates {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            out.push((i, j, d));
        }
    }
    out
}

/// Outcome of matching detections against ground truth.
#[derive(Debug, Clone)]
pub struct MatchReport {
    /// `(detected index, ground-truth index, distance)` per matched pair.
    pub matched: Vec<(usize, usize, f64)>,
    pub missed: usize,
    pub false_count: usize,
    /// RMS distance over matched pairs; 0 when nothing matched (see flag).
    pub localization_error: f64,
    /// Set when no pair matched, making the localization error undefined.
    pub no_match_flag: bool,
}

impl MatchReport {
    pub fn to_csv(&self) -> String {
        format!(
            "missed,false,Le\n{},{},{}\n",
            self.missed,
            self.false_count,
            fmt_g9(self.localization_error)
        )
    }
}

/// Matches detections to ground truth within `delta` pixels and computes the
/// RMS localization error over the matched pairs.
pub fn match_to_gt(detected: &CornerList, gt: &GroundTruth, delta: f64) -> Result<MatchReport> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter("delta must be positive".into()));
    }
    if gt.is_empty() {
        return Err(Error::InvalidParameter(
            "ground truth is empty; evaluation is meaningless".into(),
        ));
    }
    let det_pts = detected.points();
    let matched = greedy_match(&det_pts, gt.points(), delta);
    let missed = gt.len() - matched.len();
    let false_count = det_pts.len() - matched.len();
    let (localization_error, no_match_flag) = if matched.is_empty() {
        (0.0, true)
    } else {
        let sq: f64 = matched.iter().map(|&(_, _, d)| d * d).sum();
        ((sq / matched.len() as f64).sqrt(), false)
    };
    Ok(MatchReport {
        matched,
        missed,
        false_count,
        localization_error,
        no_match_flag,
    })
}

/// Forward geometric map used to generate a deformed image.
#[derive(Debug, Clone)]
pub enum ForwardMap {
    Affine(AffineTransform),
    Homography(Homography),
}

impl ForwardMap {
    pub fn apply(&self, p: (f64, f64)) -> Result<(f64, f64)> {
        match self {
            ForwardMap::Affine(a) => Ok(a.apply(p)),
            ForwardMap::Homography(h) => h.project(p),
        }
    }
}

/// Repeatability statistics for one transform instance.
#[derive(Debug, Clone)]
pub struct RepeatStats {
    /// Detections in the base image.
    pub lb: usize,
    /// Detections in the deformed image.
    pub ld: usize,
    /// Matched pairs after forward-mapping the base detections.
    pub lr: usize,
    pub r_avg: f64,
    pub diagnostic: Option<String>,
}

/// Average repeatability: forward-maps the base detections and matches them
/// one-to-one against the deformed-image detections within `dist` pixels.
pub fn average_repeatability(
    ref_corners: &[(f64, f64)],
    warped_corners: &[(f64, f64)],
    fwd: &ForwardMap,
    dist: f64,
) -> RepeatStats {
    let lb = ref_corners.len();
    let ld = warped_corners.len();
    if lb == 0 || ld == 0 {
        return RepeatStats {
            lb,
            ld,
            lr: 0,
            r_avg: 0.0,
            diagnostic: Some("no detections in one of the images".into()),
        };
    }
    let mapped: Vec<(f64, f64)> = ref_corners
        .iter()
        .map(|&p| fwd.apply(p).unwrap_or((f64::INFINITY, f64::INFINITY)))
        .collect();
    let lr = greedy_match(&mapped, warped_corners, dist).len();
    // (Lr/2)(1/Lb + 1/Ld), written over a common denominator so the textbook
    // cases (and the identity case) come out exact in floating point
    let r_avg = lr as f64 * (lb + ld) as f64 / (2.0 * lb as f64 * ld as f64);
    RepeatStats {
        lb,
        ld,
        lr,
        r_avg,
        diagnostic: None,
    }
}

/// Transform suite identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuiteId {
    Rotation,
    IsoScale,
    AnisoScale,
    Shear,
    Jpeg,
    Noise,
}

impl SuiteId {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rotation" => Ok(SuiteId::Rotation),
            "iso-scale" => Ok(SuiteId::IsoScale),
            "aniso-scale" => Ok(SuiteId::AnisoScale),
            "shear" => Ok(SuiteId::Shear),
            "jpeg" => Ok(SuiteId::Jpeg),
            "noise" => Ok(SuiteId::Noise),
            other => Err(Error::InvalidParameter(format!(
                "unknown suite '{other}' (expected rotation, iso-scale, aniso-scale, shear, jpeg, noise)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SuiteId::Rotation => "rotation",
            SuiteId::IsoScale => "iso-scale",
            SuiteId::AnisoScale => "aniso-scale",
            SuiteId::Shear => "shear",
            SuiteId::Jpeg => "jpeg",
            SuiteId::Noise => "noise",
        }
    }
}

/// One transform instance of a suite.
#[derive(Debug, Clone)]
enum Deformation {
    Geometric(AffineTransform),
    Jpeg { quality: u8 },
    Noise { stddev: f64, seed: u64 },
}

/// One row of a repeatability report.
#[derive(Debug, Clone)]
pub struct RepeatRow {
    pub param: String,
    pub stats: RepeatStats,
    pub skipped: Option<String>,
}

/// Repeatability results over a whole suite.
#[derive(Debug, Clone)]
pub struct RepeatabilityReport {
    pub suite: SuiteId,
    pub rows: Vec<RepeatRow>,
    /// Mean R_avg over rows that were not skipped.
    pub mean: f64,
}

impl RepeatabilityReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("suite,param,Lb,Ld,Lr,Ravg\n");
        for row in &self.rows {
            if let Some(reason) = &row.skipped {
                s.push_str(&format!(
                    "{},{},skipped,skipped,skipped,{}\n",
                    self.suite.name(),
                    row.param,
                    reason
                ));
            } else {
                s.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    self.suite.name(),
                    row.param,
                    row.stats.lb,
                    row.stats.ld,
                    row.stats.lr,
                    fmt_g9(row.stats.r_avg)
                ));
            }
        }
        s
    }
}

fn suite_instances(suite: SuiteId, seed: u64) -> Vec<(String, Deformation)> {
    let mut out = Vec::new();
    match suite {
        SuiteId::Rotation => {
            // 18 nonzero angles spanning [-pi/2, pi/2]
            for i in (-9i32..=9).filter(|&i| i != 0) {
                let a = i as f64 * std::f64::consts::PI / 18.0;
                out.push((
                    format!("{i}pi/18"),
                    Deformation::Geometric(AffineTransform::rotation(a)),
                ));
            }
        }
        SuiteId::IsoScale => {
            for i in 5..=20 {
                if i == 10 {
                    continue;
                }
                let s = i as f64 / 10.0;
                out.push((
                    format!("{s:.1}"),
                    Deformation::Geometric(AffineTransform::iso_scale(s).unwrap()),
                ));
            }
        }
        SuiteId::AnisoScale => {
            for ix in 7..=15 {
                for iy in 5..=18 {
                    let sx = ix as f64 / 10.0;
                    let sy = iy as f64 / 10.0;
                    out.push((
                        format!("{sx:.1}x{sy:.1}"),
                        Deformation::Geometric(AffineTransform::aniso_scale(sx, sy).unwrap()),
                    ));
                }
            }
        }
        SuiteId::Shear => {
            for i in (-10i32..=10).filter(|&i| i != 0) {
                let c = i as f64 / 10.0;
                out.push((
                    format!("{c:.1}"),
                    Deformation::Geometric(AffineTransform::shear(c)),
                ));
            }
        }
        SuiteId::Jpeg => {
            for q in (5..=100).step_by(5) {
                out.push((format!("{q}"), Deformation::Jpeg { quality: q as u8 }));
            }
        }
        SuiteId::Noise => {
            for s in 1..=15 {
                out.push((
                    format!("{s}"),
                    Deformation::Noise {
                        stddev: s as f64,
                        seed: seed.wrapping_add(s as u64),
                    },
                ));
            }
        }
    }
    out
}

/// Runs one transform suite: deform, re-detect, match, one row per instance.
///
/// JPEG rows are skipped with a flag when no codec is injected; geometric
/// rows whose deformed canvas is too small for the detector are likewise
/// skipped rather than failing the whole suite.
pub fn run_transform_suite(
    img: &GrayImage,
    cfg: &DetectorConfig,
    suite: SuiteId,
    seed: u64,
    codec: Option<&dyn ImageCodec>,
) -> Result<RepeatabilityReport> {
    cfg.validate()?;
    let base = detect(img, cfg)?;
    let base_pts = base.points();
    let instances = suite_instances(suite, seed);

    let rows: Vec<RepeatRow> = instances
        .par_iter()
        .map(|(param, deformation)| {
            let (deformed, fwd) = match deformation {
                Deformation::Geometric(t) => match warp(img, t) {
                    Ok((im, adj)) => (im, ForwardMap::Affine(adj)),
                    Err(e) => {
                        return RepeatRow {
                            param: param.clone(),
                            stats: empty_stats(),
                            skipped: Some(format!("warp failed: {e}")),
                        }
                    }
                },
                Deformation::Jpeg { quality } => match jpeg_roundtrip(img, *quality, codec) {
                    Ok(im) => (im, ForwardMap::Affine(AffineTransform::identity())),
                    Err(e) => {
                        return RepeatRow {
                            param: param.clone(),
                            stats: empty_stats(),
                            skipped: Some(format!("{e}")),
                        }
                    }
                },
                Deformation::Noise { stddev, seed } => {
                    match add_gaussian_noise(img, *stddev, *seed) {
                        Ok(im) => (im, ForwardMap::Affine(AffineTransform::identity())),
                        Err(e) => {
                            return RepeatRow {
                                param: param.clone(),
                                stats: empty_stats(),
                                skipped: Some(format!("{e}")),
                            }
                        }
                    }
                }
            };
            match detect(&deformed, cfg) {
                Ok(warped) => {
                    let stats =
                        average_repeatability(&base_pts, &warped.points(), &fwd, 4.0);
                    RepeatRow {
                        param: param.clone(),
                        stats,
                        skipped: None,
                    }
                }
                Err(e) => RepeatRow {
                    param: param.clone(),
                    stats: empty_stats(),
                    skipped: Some(format!("detection failed: {e}")),
                },
            }
        })
        .collect();

    let live: Vec<&RepeatRow> = rows.iter().filter(|r| r.skipped.is_none()).collect();
    let mean = if live.is_empty() {
        0.0
    } else {
        live.iter().map(|r| r.stats.r_avg).sum::<f64>() / live.len() as f64
    };
    Ok(RepeatabilityReport { suite, rows, mean })
}

fn empty_stats() -> RepeatStats {
    RepeatStats {
        lb: 0,
        ld: 0,
        lr: 0,
        r_avg: 0.0,
        diagnostic: None,
    }
}

/// Projects a point through a homography (Euclidean normalization).
pub fn homography_project(pt: (f64, f64), h: &Homography) -> Result<(f64, f64)> {
    h.project(pt)
}

/// Matching accuracy at one reprojection threshold.
#[derive(Debug, Clone)]
pub struct MmaRow {
    pub p_th: usize,
    pub n_possible: usize,
    pub n_match: usize,
    pub mma: f64,
}

/// Mean matching accuracy over a threshold range.
#[derive(Debug, Clone)]
pub struct MmaReport {
    pub rows: Vec<MmaRow>,
    /// Set when the candidate pair set was empty (accuracy undefined).
    pub empty_flag: bool,
}

impl MmaReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("Pth,Npossible,Nmatch,MMA\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{}\n",
                r.p_th,
                r.n_possible,
                r.n_match,
                fmt_g9(r.mma)
            ));
        }
        s
    }
}

/// Scores candidate match pairs against the true homography: a pair counts
/// as correct at threshold `P_th` when the reprojection distance of its
/// first point falls strictly below `P_th` pixels.
pub fn mma(
    pairs: &[((f64, f64), (f64, f64))],
    h: &Homography,
    p_th_range: std::ops::RangeInclusive<usize>,
) -> Result<MmaReport> {
    let errors: Vec<f64> = pairs
        .iter()
        .map(|&(a, b)| {
            h.project(a)
                .map(|p| ((p.0 - b.0).powi(2) + (p.1 - b.1).powi(2)).sqrt())
                .unwrap_or(f64::INFINITY)
        })
        .collect();
    let n_possible = pairs.len();
    let rows = p_th_range
        .map(|p_th| {
            let n_match = errors.iter().filter(|&&e| e < p_th as f64).count();
            let mma = if n_possible == 0 {
                0.0
            } else {
                n_match as f64 / n_possible as f64
            };
            MmaRow {
                p_th,
                n_possible,
                n_match,
                mma,
            }
        })
        .collect();
    Ok(MmaReport {
        rows,
        empty_flag: n_possible == 0,
    })
}

/// Mean/variance-normalized square patch descriptor.
///
/// Plumbing for the MMA protocol only — deliberately simple, not a learned
/// descriptor, so accuracy numbers are not comparable to learned-descriptor
/// descriptor benchmarks.
pub fn patch_descriptor(
    img: &GrayImage,
    center: (f64, f64),
    radius: usize,
) -> Option<Vec<f64>> {
    let (cx, cy) = (center.0.round() as i64, center.1.round() as i64);
    let r = radius as i64;
    if cx < r
        || cy < r
        || cx + r >= img.width() as i64
        || cy + r >= img.height() as i64
    {
        return None;
    }
    let side = 2 * radius + 1;
    let mut patch = Vec::with_capacity(side * side);
    for dy in -r..=r {
        for dx in -r..=r {
            patch.push(img.get((cx + dx) as usize, (cy + dy) as usize));
        }
    }
    let n = patch.len() as f64;
    let mean = patch.iter().sum::<f64>() / n;
    let var = patch.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-12);
    for v in patch.iter_mut() {
        *v = (*v - mean) / std;
    }
    Some(patch)
}

/// Mutual-nearest-neighbor pairing of two corner sets under SSD of their
/// normalized patch descriptors. Returns `(point_a, point_b)` pairs.
pub fn mutual_nearest_pairs(
    img_a: &GrayImage,
    corners_a: &[(f64, f64)],
    img_b: &GrayImage,
    corners_b: &[(f64, f64)],
) -> Vec<((f64, f64), (f64, f64))> {
    const RADIUS: usize = 5; // 11x11 patches
    let desc_a: Vec<(usize, Vec<f64>)> = corners_a
        .iter()
        .enumerate()
        .filter_map(|(i, &p)| patch_descriptor(img_a, p, RADIUS).map(|d| (i, d)))
        .collect();
    let desc_b: Vec<(usize, Vec<f64>)> = corners_b
        .iter()
        .enumerate()
        .filter_map(|(i, &p)| patch_descriptor(img_b, p, RADIUS).map(|d| (i, d)))
        .collect();
    if desc_a.is_empty() || desc_b.is_empty() {
        return Vec::new();
    }
    let ssd = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
    };
    let nn_ab: Vec<usize> = desc_a
        .iter()
        .map(|(_, da)| {
            desc_b
                .iter()
                .enumerate()
                .min_by(|(_, (_, x)), (_, (_, y))| {
                    ssd(da, x).partial_cmp(&ssd(da, y)).unwrap()
                })
                .map(|(j, _)| j)
                .unwrap()
        })
        .collect();
    let nn_ba: Vec<usize> = desc_b
        .iter()
        .map(|(_, db)| {
            desc_a
                .iter()
                .enumerate()
                .min_by(|(_, (_, x)), (_, (_, y))| {
                    ssd(db, x).partial_cmp(&ssd(db, y)).unwrap()
                })
                .map(|(i, _)| i)
                .unwrap()
        })
        .collect();
    let mut pairs = Vec::new();
    for (ia, &jb) in nn_ab.iter().enumerate() {
        if nn_ba[jb] == ia {
            pairs.push((corners_a[desc_a[ia].0], corners_b[desc_b[jb].0]));
        }
    }
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::{Corner, CornerList};

    fn list(pts: &[(usize, usize)]) -> CornerList {
        CornerList {
            corners: pts
                .iter()
                .map(|&(x, y)| Corner { x, y, score: 1.0 })
                .collect(),
        }
    }

    #[test]
    fn identity_match() {
        let gt = GroundTruth::new(vec![(5.0, 5.0), (20.0, 30.0)], 64, 64).unwrap();
        let r = match_to_gt(&list(&[(5, 5), (20, 30)]), &gt, 2.0).unwrap();
        assert_eq!(r.missed, 0);
        assert_eq!(r.false_count, 0);
        assert_eq!(r.localization_error, 0.0);
        assert!(!r.no_match_flag);
    }

    #[test]
    fn uniform_offset_error() {
        let gt = GroundTruth::new(vec![(5.0, 5.0), (20.0, 30.0), (40.0, 10.0)], 64, 64).unwrap();
        let r = match_to_gt(&list(&[(6, 5), (21, 30), (41, 10)]), &gt, 2.0).unwrap();
        assert_eq!(r.missed, 0);
        assert_eq!(r.false_count, 0);
        assert_eq!(r.localization_error, 1.0);
    }

    #[test]
    fn far_detection_is_false_and_missed() {
        let gt = GroundTruth::new(vec![(0.0, 0.0)], 64, 64).unwrap();
        let r = match_to_gt(&list(&[(0, 3)]), &gt, 2.0).unwrap();
        assert_eq!(r.missed, 1);
        assert_eq!(r.false_count, 1);
        assert_eq!(r.localization_error, 0.0);
        assert!(r.no_match_flag);
    }

    #[test]
    fn empty_gt_rejected() {
        let gt = GroundTruth {
            points: Vec::new(),
        };
        assert!(match_to_gt(&list(&[(1, 1)]), &gt, 2.0).is_err());
    }

    #[test]
    fn gt_validation() {
        assert!(GroundTruth::new(vec![(99.0, 0.0)], 64, 64).is_err());
        assert!(GroundTruth::new(vec![(1.0, 1.0), (1.0, 1.0)], 64, 64).is_err());
    }

    #[test]
    fn greedy_matching_is_one_to_one_and_maximal() {
        // one detection between two GT points: exactly one match
        let gt = GroundTruth::new(vec![(10.0, 10.0), (11.0, 10.0)], 64, 64).unwrap();
        let r = match_to_gt(&list(&[(10, 10)]), &gt, 2.0).unwrap();
        assert_eq!(r.matched.len(), 1);
        assert_eq!(r.missed, 1);
        assert_eq!(r.false_count, 0);
        // nearest pair wins
        assert_eq!(r.matched[0].1, 0);
    }

    #[test]
    fn repeatability_identity() {
        let pts = vec![(5.0, 5.0), (9.0, 20.0), (30.0, 30.0)];
        let s = average_repeatability(
            &pts,
            &pts,
            &ForwardMap::Affine(AffineTransform::identity()),
            4.0,
        );
        assert_eq!(s.r_avg, 1.0);
        assert_eq!((s.lb, s.ld, s.lr), (3, 3, 3));
    }

    #[test]
    fn repeatability_arithmetic_case() {
        // Lb = 10, Ld = 20, Lr = 10 -> (10/2)(1/10 + 1/20) = 0.75
        let base: Vec<(f64, f64)> = (0..10).map(|i| (10.0 * i as f64, 0.0)).collect();
        let mut deformed = base.clone();
        deformed.extend((0..10).map(|i| (10.0 * i as f64, 500.0)));
        let s = average_repeatability(
            &base,
            &deformed,
            &ForwardMap::Affine(AffineTransform::identity()),
            4.0,
        );
        assert_eq!((s.lb, s.ld, s.lr), (10, 20, 10));
        assert_eq!(s.r_avg, 0.75);
    }

    #[test]
    fn repeatability_degenerate() {
        let s = average_repeatability(
            &[(1.0, 1.0)],
            &[],
            &ForwardMap::Affine(AffineTransform::identity()),
            4.0,
        );
        assert_eq!(s.r_avg, 0.0);
        assert!(s.diagnostic.is_some());
    }

    #[test]
    fn suite_row_counts() {
        assert_eq!(suite_instances(SuiteId::Rotation, 0).len(), 18);
        assert_eq!(suite_instances(SuiteId::IsoScale, 0).len(), 15);
        assert_eq!(suite_instances(SuiteId::AnisoScale, 0).len(), 9 * 14);
        assert_eq!(suite_instances(SuiteId::Shear, 0).len(), 20);
        assert_eq!(suite_instances(SuiteId::Jpeg, 0).len(), 20);
        assert_eq!(suite_instances(SuiteId::Noise, 0).len(), 15);
    }

    #[test]
    fn suite_id_parse() {
        assert_eq!(SuiteId::parse("rotation").unwrap(), SuiteId::Rotation);
        assert!(SuiteId::parse("bogus").is_err());
    }

    #[test]
    fn rotation_suite_shape_and_jpeg_skip() {
        let img = GrayImage::from_fn(72, 72, |x, y| {
            if (24..48).contains(&x) && (24..48).contains(&y) {
                200.0
            } else {
                50.0
            }
        })
        .unwrap();
        let cfg = DetectorConfig::default();
        let rep = run_transform_suite(&img, &cfg, SuiteId::Rotation, 7, None).unwrap();
        assert_eq!(rep.rows.len(), 18);

        let jp = run_transform_suite(&img, &cfg, SuiteId::Jpeg, 7, None).unwrap();
        assert_eq!(jp.rows.len(), 20);
        assert!(jp.rows.iter().all(|r| r.skipped.is_some()));
        assert_eq!(jp.mean, 0.0);
    }

    #[test]
    fn noise_suite_deterministic() {
        let img = GrayImage::from_fn(64, 64, |x, y| {
            if (20..44).contains(&x) && (20..44).contains(&y) {
                180.0
            } else {
                60.0
            }
        })
        .unwrap();
        let cfg = DetectorConfig::default();
        let a = run_transform_suite(&img, &cfg, SuiteId::Noise, 42, None).unwrap();
        let b = run_transform_suite(&img, &cfg, SuiteId::Noise, 42, None).unwrap();
        assert_eq!(a.rows.len(), 15);
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn homography_projection_cases() {
        let h = Homography::identity();
        assert_eq!(homography_project((3.0, 4.0), &h).unwrap(), (3.0, 4.0));

        let t = Homography::new([[1.0, 0.0, 2.0], [0.0, 1.0, -1.0], [0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(homography_project((3.0, 4.0), &t).unwrap(), (5.0, 3.0));

        let half =
            Homography::new([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]]).unwrap();
        // stored normalized to h33 = 1, so build the scaling differently
        let (x, y) = homography_project((3.0, 4.0), &half).unwrap();
        assert!((x - 1.5).abs() < 1e-12 && (y - 2.0).abs() < 1e-12);
    }

    #[test]
    fn mma_exact_and_half() {
        let h = Homography::identity();
        let exact: Vec<_> = (0..10)
            .map(|i| ((i as f64, 0.0), (i as f64, 0.0)))
            .collect();
        let rep = mma(&exact, &h, 1..=10).unwrap();
        assert!(rep.rows.iter().all(|r| r.mma == 1.0));

        let mixed: Vec<_> = (0..10)
            .map(|i| {
                let off = if i < 5 { 0.0 } else { 100.0 };
                ((i as f64, 0.0), (i as f64 + off, 0.0))
            })
            .collect();
        let rep = mma(&mixed, &h, 1..=10).unwrap();
        assert!(rep.rows.iter().all(|r| r.mma == 0.5));
    }

    #[test]
    fn mma_monotone_and_empty() {
        let h = Homography::identity();
        let pairs: Vec<_> = (0..20)
            .map(|i| ((0.0, 0.0), (i as f64 * 0.7, 0.0)))
            .collect();
        let rep = mma(&pairs, &h, 1..=10).unwrap();
        for w in rep.rows.windows(2) {
            assert!(w[1].n_match >= w[0].n_match);
        }
        let empty = mma(&[], &h, 1..=10).unwrap();
        assert!(empty.empty_flag);
        assert!(empty.rows.iter().all(|r| r.mma == 0.0));
    }

    #[test]
    fn descriptor_pairs_recover_identity() {
        let img = GrayImage::from_fn(64, 64, |x, y| {
            ((x * 7 + y * 13) % 97) as f64
        })
        .unwrap();
        let pts = vec![(10.0, 10.0), (30.0, 20.0), (50.0, 40.0)];
        let pairs = mutual_nearest_pairs(&img, &pts, &img, &pts);
        assert_eq!(pairs.len(), 3);
        for (a, b) in pairs {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn descriptor_border_returns_none() {
        let img = GrayImage::constant(32, 32, 1.0).unwrap();
        assert!(patch_descriptor(&img, (2.0, 16.0), 5).is_none());
        assert!(patch_descriptor(&img, (16.0, 16.0), 5).is_some());
    }
}
