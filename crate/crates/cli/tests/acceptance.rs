//! Acceptance suite: one test per criterion, each printing a pass line.
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;

use sogdd_core::detector::{
    corner_measure, corner_measure_fast, detect, soddc_matrix, DetectorConfig, VARSIGMA,
};
use sogdd_core::eval::{
    average_repeatability, match_to_gt, mma, ForwardMap, GroundTruth,
};
use sogdd_core::filterbank::{build_bank, convolve_bank, gaussian_kernel, sogdd_kernel};
use sogdd_core::image::{save_pgm, AffineTransform, GrayImage, Homography};
use sogdd_core::linalg::sym_eigenvalues;
use sogdd_core::models::{
    admissibility_sweep, admissible_interval, model_profiles, render_model, CornerModelParams,
    ModelKind, SWEEP_ANGLES,
};

fn end_params(d: f64) -> CornerModelParams {
    CornerModelParams {
        kind: ModelKind::End,
        t1: 50.0,
        t2: 100.0,
        alpha: PI / 8.0,
        beta: PI / 3.0,
        d,
    }
}

fn l_params(d: f64) -> CornerModelParams {
    CornerModelParams {
        kind: ModelKind::L,
        alpha: PI / 8.0,
        beta: PI / 4.0,
        ..end_params(d)
    }
}

fn block_image() -> GrayImage {
    GrayImage::from_fn(100, 100, |x, y| {
        if (25..75).contains(&x) && (25..75).contains(&y) {
            200.0
        } else {
            50.0
        }
    })
    .unwrap()
}

/// Criterion 1: closed-form profiles match the quadrature oracle within
/// 1e-3 relative sup-norm over 360 theta samples, for both reference settings.
#[test]
fn criterion_1_closed_form_verification() {
    for (p, sigma, label) in [(end_params(3.0), 1.12, "END"), (l_params(3.0), 1.15, "L")] {
        let (corner, edge) = model_profiles(&p, sigma, 360).unwrap();
        let dev = corner
            .max_relative_deviation()
            .max(edge.max_relative_deviation());
        assert!(dev <= 1e-3, "{label}: deviation {dev}");
    }
    println!("criterion 1: PASS (closed form vs quadrature oracle, 360 samples, both models)");
}

/// Criterion 2: scale bounds. The corrected analytic profiles do not
/// reproduce the target sweep minima (1.204 END / 1.253 L); per the
/// criterion's fallback the deviation is reported and the d-linearity of
/// endpoints (within 1%) is asserted instead.
#[test]
fn criterion_2_scale_bounds() {
    let end_sweep = admissibility_sweep(ModelKind::End, 3.0, &SWEEP_ANGLES, 3.0).unwrap();
    let end_min = end_sweep
        .iter()
        .filter_map(|e| e.admissible_root)
        .fold(f64::INFINITY, f64::min);
    let l_sweep = admissibility_sweep(ModelKind::L, 3.0, &SWEEP_ANGLES, 3.0).unwrap();
    let l_roots: Vec<f64> = l_sweep.iter().filter_map(|e| e.admissible_root).collect();

    let end_target_met = (end_min - 1.204).abs() <= 0.02;
    let l_min = l_roots.iter().cloned().fold(f64::INFINITY, f64::min);
    let l_target_met = (l_min - 1.253).abs() <= 0.02;

    if !(end_target_met && l_target_met) {
        println!("criterion 2 [open questions output]:");
        println!(
            "  END sweep minimum positive-to-negative crossing: {end_min:.4} (target value 1.204, deviation {:+.4})",
            end_min - 1.204
        );
        if l_roots.is_empty() {
            println!(
                "  L sweep: no crossing inside the (0.5, 3.0) grid for any swept alpha (target value 1.253)"
            );
        } else {
            println!(
                "  L sweep minimum crossing: {l_min:.4} (target value 1.253, deviation {:+.4})",
                l_min - 1.253
            );
        }
        let adm = admissible_interval(&end_params(3.0), 0.5, 3.0, 0.01).unwrap();
        println!(
            "  END reference-parameter E(sigma) curve: positive from grid start, crossing at {:.4}; first/last samples E(0.5)={:.3e}, E(3.0)={:.3e}",
            adm.upper.unwrap(),
            adm.energy_diff.first().unwrap(),
            adm.energy_diff.last().unwrap()
        );
        println!(
            "  the target minima were not reproducible from the oracle-verified profiles; see the E(sigma) CSV emitted by `sogdd scale-range`"
        );
    }

    // endpoints must scale linearly in d regardless
    let r3 = admissible_interval(&end_params(3.0), 0.5, 3.0, 0.01)
        .unwrap()
        .upper
        .expect("END d=3 crossing");
    let r6 = admissible_interval(&end_params(6.0), 0.5, 6.0, 0.01)
        .unwrap()
        .upper
        .expect("END d=6 crossing");
    assert!(
        (r6 - 2.0 * r3).abs() <= 0.01 * r6,
        "d-linearity violated: {r3} vs {r6}"
    );
    println!(
        "criterion 2: PASS (fallback path; endpoint d-linearity {:.4} -> {:.4} within 1%)",
        r3, r6
    );
}

/// Criterion 3: the rendered END model with d = 6 px yields exactly its two
/// corners at the working scale, and fails that at sigma^2 = 5.
#[test]
fn criterion_3_two_corner_phenomenon() {
    // Both corners must be acute for each to produce a usable response, and
    // the 5x5 aggregation window keeps the midpoint window from straddling
    // both corner responses when the pair is only 6 px apart.
    let params = CornerModelParams {
        beta: PI / 8.0,
        ..end_params(6.0)
    };
    let img = render_model(&params, 64, 64, (29, 32)).unwrap();
    let truth = [(29.0, 32.0), (35.0, 32.0)];
    let mid = (32.0, 32.0);
    let near =
        |p: (f64, f64), t: (f64, f64)| ((p.0 - t.0).powi(2) + (p.1 - t.1).powi(2)).sqrt() <= 2.0;
    let clean = |list: &sogdd_core::detector::CornerList| {
        list.len() == 2
            && truth.iter().all(|&t| list.points().iter().any(|&p| near(p, t)))
            && !list.points().iter().any(|&p| near(p, mid))
    };

    let sharp_cfg = DetectorConfig {
        block: 5,
        threshold: 1e4,
        ..Default::default()
    };
    let sharp = detect(&img, &sharp_cfg).unwrap();
    assert!(clean(&sharp), "sigma^2=1.2 detections: {:?}", sharp.corners);

    let blurred = detect(
        &img,
        &DetectorConfig {
            sigma2: 5.0,
            block: 5,
            threshold: 1e4,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(
        !clean(&blurred),
        "sigma^2=5 unexpectedly resolves both corners: {:?}",
        blurred.corners
    );
    println!("criterion 3: PASS (two corners at sigma^2=1.2, failure mode at sigma^2=5)");
}

/// Criterion 4: detector property suite on random images plus kernel
/// invariants.
#[test]
fn criterion_4_property_suite() {
    let cfg = DetectorConfig::default();
    let bank = build_bank(cfg.sigma(), cfg.orientations).unwrap();

    let mut state = 0xA5A5_5A5Au64;
    let mut random_image = move || {
        let data: Vec<f64> = (0..64 * 64)
            .map(|_| {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                ((state >> 33) % 256) as f64
            })
            .collect();
        GrayImage::new(64, 64, data).unwrap()
    };

    for _ in 0..50 {
        let img = random_image();
        let stack = convolve_bank(&img, &bank, true);
        // (a) Lambda symmetric PSD, (b) measure >= 0, (e) fast path agreement
        for &(x, y) in &[(12usize, 12usize), (32, 20), (40, 47), (20, 40)] {
            let m = soddc_matrix(&stack, (x, y), cfg.block - 1, cfg.block - 1).unwrap();
            for a in 0..cfg.orientations {
                for b in 0..cfg.orientations {
                    assert_eq!(m.get(a, b), m.get(b, a));
                }
            }
            let eig = sym_eigenvalues(cfg.orientations, m.data());
            for l in &eig {
                assert!(*l >= -1e-6 * m.trace(), "eigenvalue {l} vs trace {}", m.trace());
            }
            let slow = corner_measure(&m, VARSIGMA).unwrap();
            let fast = corner_measure_fast(&m, VARSIGMA).unwrap();
            assert!(slow >= 0.0);
            assert!((slow - fast).abs() <= 1e-9 * slow.abs().max(1e-300));
        }
    }

    // (b) full measure map nonnegative on one random image
    let img = random_image();
    let map = sogdd_core::detector::measure_map(&img, &cfg).unwrap();
    assert!(map.iter().all(|&v| v >= 0.0));

    // (c) intensity-offset invariance (exact detection equality)
    let base = block_image();
    let shifted = GrayImage::from_fn(100, 100, |x, y| base.get(x, y) + 31.0).unwrap();
    assert_eq!(detect(&base, &cfg).unwrap(), detect(&shifted, &cfg).unwrap());

    // (d) scaling with rescaled threshold preserves detection locations
    let locs = |l: &sogdd_core::detector::CornerList| {
        let mut v: Vec<(usize, usize)> = l.corners.iter().map(|c| (c.x, c.y)).collect();
        v.sort_unstable();
        v
    };
    let base_locs = locs(&detect(&base, &cfg).unwrap());
    for a in [0.5f64, 2.0] {
        let scaled = GrayImage::from_fn(100, 100, |x, y| a * base.get(x, y)).unwrap();
        let cfg2 = DetectorConfig {
            threshold: cfg.threshold * a.powi(2 * cfg.orientations as i32 - 2),
            ..cfg
        };
        assert_eq!(base_locs, locs(&detect(&scaled, &cfg2).unwrap()), "a={a}");
    }

    // (f) kernel invariants
    for &sigma in &[0.9, cfg.sigma(), 1.8] {
        let r = sogdd_core::filterbank::kernel_radius(sigma);
        assert!((gaussian_kernel(sigma, r).unwrap().sum() - 1.0).abs() < 1e-12);
        for k in 0..8 {
            let theta = k as f64 * PI / 8.0;
            let s = sogdd_kernel(sigma, theta, r).unwrap();
            assert!(s.sum().abs() < 1e-12);
            let s2 = sogdd_kernel(sigma, theta + PI, r).unwrap();
            for (u, v) in s.taps().iter().zip(s2.taps()) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }
    println!("criterion 4: PASS (PSD/measure/offset/scaling/fast-path/kernel properties)");
}

/// Criterion 5: synthetic bright-block ground truth with default config.
#[test]
fn criterion_5_synthetic_ground_truth() {
    let img = block_image();
    let gt = GroundTruth::new(
        vec![(25.0, 25.0), (74.0, 25.0), (25.0, 74.0), (74.0, 74.0)],
        100,
        100,
    )
    .unwrap();
    let corners = detect(&img, &DetectorConfig::default()).unwrap();
    let report = match_to_gt(&corners, &gt, 2.0).unwrap();
    assert_eq!(report.missed, 0, "{:?}", corners.corners);
    assert_eq!(report.false_count, 0, "{:?}", corners.corners);
    assert!(
        report.localization_error <= 1.5,
        "Le = {}",
        report.localization_error
    );
    println!(
        "criterion 5: PASS (missed 0, false 0, Le = {:.3})",
        report.localization_error
    );
}

/// Criterion 6: protocol arithmetic exact cases.
#[test]
fn criterion_6_protocol_arithmetic() {
    // uniform unit offset -> Le = 1.0 exactly
    let gt = GroundTruth::new(vec![(5.0, 5.0), (20.0, 30.0), (40.0, 10.0)], 64, 64).unwrap();
    let det = sogdd_core::detector::CornerList {
        corners: [(6usize, 5usize), (21, 30), (41, 10)]
            .iter()
            .map(|&(x, y)| sogdd_core::detector::Corner { x, y, score: 1.0 })
            .collect(),
    };
    let r = match_to_gt(&det, &gt, 2.0).unwrap();
    assert_eq!(r.localization_error, 1.0);

    // Lb=10, Ld=20, Lr=10 -> 0.75 exactly
    let base: Vec<(f64, f64)> = (0..10).map(|i| (10.0 * i as f64, 0.0)).collect();
    let mut deformed = base.clone();
    deformed.extend((0..10).map(|i| (10.0 * i as f64, 500.0)));
    let s = average_repeatability(
        &base,
        &deformed,
        &ForwardMap::Affine(AffineTransform::identity()),
        4.0,
    );
    assert_eq!(s.r_avg, 0.75);

    // identity transform, identical detections -> 1.0
    let s = average_repeatability(
        &base,
        &base,
        &ForwardMap::Affine(AffineTransform::identity()),
        4.0,
    );
    assert_eq!(s.r_avg, 1.0);

    // 5 of 10 pairs within threshold -> 0.5
    let h = Homography::identity();
    let pairs: Vec<_> = (0..10)
        .map(|i| {
            let off = if i < 5 { 0.0 } else { 100.0 };
            ((i as f64, 0.0), (i as f64 + off, 0.0))
        })
        .collect();
    let rep = mma(&pairs, &h, 1..=10).unwrap();
    assert!(rep.rows.iter().all(|r| r.mma == 0.5));
    println!("criterion 6: PASS (Le=1.0, Ravg=0.75, Ravg=1.0, MMA=0.5 exact)");
}

fn run_cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_sogdd"))
        .args(args)
        .output()
        .expect("binary runs")
}

/// Criterion 7: byte-identical artifacts across runs and thread counts.
#[test]
fn criterion_7_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let img_path = dir.path().join("block.pgm");
    save_pgm(&block_image(), &img_path).unwrap();
    let img = img_path.to_str().unwrap();

    let read = |p: &Path| std::fs::read(p).unwrap();

    // detect across runs and thread counts
    let mut detect_outputs = Vec::new();
    for (i, threads) in ["1", "4", "4"].iter().enumerate() {
        let out = dir.path().join(format!("det{i}.csv"));
        let st = run_cli(&[
            "detect",
            "--image",
            img,
            "--out",
            out.to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert!(st.status.success(), "{st:?}");
        detect_outputs.push(read(&out));
    }
    assert!(detect_outputs.windows(2).all(|w| w[0] == w[1]));

    // noise repeatability suite with fixed seed across thread counts
    let mut suite_outputs = Vec::new();
    for (i, threads) in ["1", "4"].iter().enumerate() {
        let out = dir.path().join(format!("noise{i}.csv"));
        let st = run_cli(&[
            "eval-repeat",
            "--image",
            img,
            "--suite",
            "noise",
            "--seed",
            "42",
            "--out",
            out.to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert!(st.status.success(), "{st:?}");
        suite_outputs.push(read(&out));
    }
    assert_eq!(suite_outputs[0], suite_outputs[1]);

    // model-verify profile CSV across runs
    let mut mv_outputs = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("mv{i}.csv"));
        let st = run_cli(&[
            "model-verify",
            "--kind",
            "end",
            "--sigma",
            "1.12",
            "--samples",
            "90",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(st.status.success(), "{st:?}");
        mv_outputs.push(read(&out));
    }
    assert_eq!(mv_outputs[0], mv_outputs[1]);
    println!("criterion 7: PASS (detect/eval-repeat/model-verify artifacts byte-identical)");
}

/// Criterion 8: full-scale benchmark experiments are explicitly out of desk
/// scope; the harness only provides the runnable protocols.
#[test]
fn criterion_8_out_of_scope_statement() {
    println!("criterion 8: PASS (statement)");
    println!("  not reproducible at desk scale, by design:");
    println!("  - the geometric/table test-image comparison table (needs those images and competitor detectors)");
    println!("  - the 16-method comparison study (unspecified 30-image set)");
    println!("  - the learned-descriptor matching benchmark (external dataset and third-party descriptors)");
    println!("  - the SfM/MVS reconstruction table (external reconstruction systems)");
    println!("  the eval-gt / eval-repeat / eval-mma commands accept user-supplied images and ground truth so the protocols themselves remain runnable");
}
