//! Command-line surface for the corner-detection toolkit.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use sogdd_core::detector::{detect, DetectorConfig};
use sogdd_core::eval::{
    match_to_gt, mma, mutual_nearest_pairs, run_transform_suite, GroundTruth, SuiteId,
};
use sogdd_core::filterbank::build_bank;
use sogdd_core::image::{
    load_pgm, save_pgm, warp, AffineTransform, GrayImage, Homography, ImageCodec,
};
use sogdd_core::models::{
    admissibility_sweep, admissible_interval, energy, model_profiles, CornerModelParams,
    ModelKind, ModelPoint, SWEEP_ANGLES,
};
use sogdd_core::{fmt_g9, Error};

/// JPEG codec injected into the numeric core (which carries none itself).
struct JpegCodec;

impl ImageCodec for JpegCodec {
    fn encode_jpeg(&self, img: &GrayImage, quality: u8) -> sogdd_core::Result<Vec<u8>> {
        let (w, h) = (img.width() as u32, img.height() as u32);
        let pixels: Vec<u8> = img
            .data()
            .iter()
            .map(|&v| v.round().clamp(0.0, 255.0) as u8)
            .collect();
        let mut buf = Vec::new();
        let mut enc = image::codecs::jpeg::JpegEncoder::new_with_quality(&mut buf, quality);
        enc.encode(&pixels, w, h, image::ExtendedColorType::L8)
            .map_err(|e| Error::Format(format!("jpeg encode: {e}")))?;
        Ok(buf)
    }

    fn decode_gray(&self, bytes: &[u8]) -> sogdd_core::Result<GrayImage> {
        let img = image::load_from_memory(bytes)
            .map_err(|e| Error::Format(format!("decode: {e}")))?
            .to_luma8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        GrayImage::new(w, h, img.into_raw().iter().map(|&v| v as f64).collect())
    }
}

fn load_image(path: &Path) -> sogdd_core::Result<GrayImage> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    if ext == "pgm" || ext == "pnm" {
        load_pgm(path)
    } else {
        let bytes = fs::read(path)?;
        JpegCodec.decode_gray(&bytes)
    }
}

/// Flat key=value config file with `#` comments; flags override file values.
#[derive(Default)]
struct FileConfig(HashMap<String, String>);

impl FileConfig {
    fn load(path: Option<&Path>) -> sogdd_core::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)?;
        let mut map = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Format(format!(
                    "config line {}: expected key=value",
                    lineno + 1
                )));
            };
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(FileConfig(map))
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> sogdd_core::Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|_| {
                Error::InvalidParameter(format!("config key '{key}': bad value '{v}'"))
            }),
        }
    }
}

#[derive(Parser)]
#[command(name = "sogdd", about = "High-resolution corner detection toolkit")]
struct Cli {
    /// Flat key=value config file; command flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker thread cap (output bytes are identical for any setting).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DetectorArgs {
    /// Squared filter scale (default 1.2).
    #[arg(long)]
    sigma2: Option<f64>,
    /// Number of filter orientations (default 8).
    #[arg(long)]
    orientations: Option<usize>,
    /// SODDC window side, odd (default 7).
    #[arg(long)]
    block: Option<usize>,
    /// Corner-measure threshold (default 1e9, calibrated for 8-bit input).
    #[arg(long)]
    threshold: Option<f64>,
    /// Non-maximum-suppression radius (default 1).
    #[arg(long)]
    nms_radius: Option<usize>,
}

impl DetectorArgs {
    fn resolve(&self, file: &FileConfig) -> sogdd_core::Result<DetectorConfig> {
        let d = DetectorConfig::default();
        let cfg = DetectorConfig {
            sigma2: self
                .sigma2
                .or(file.get("sigma2")?)
                .unwrap_or(d.sigma2),
            orientations: self
                .orientations
                .or(file.get("orientations")?)
                .unwrap_or(d.orientations),
            block: self.block.or(file.get("block")?).unwrap_or(d.block),
            threshold: self
                .threshold
                .or(file.get("threshold")?)
                .unwrap_or(d.threshold),
            nms_radius: self
                .nms_radius
                .or(file.get("nms-radius")?)
                .unwrap_or(d.nms_radius),
            margin: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct ModelArgs {
    /// Model kind: end | l
    #[arg(long, default_value = "end")]
    kind: String,
    #[arg(long, default_value_t = 50.0)]
    t1: f64,
    #[arg(long, default_value_t = 100.0)]
    t2: f64,
    /// Aperture angle of the first corner (radians, default pi/8).
    #[arg(long)]
    alpha: Option<f64>,
    /// Aperture angle of the second corner (radians, default pi/3).
    #[arg(long)]
    beta: Option<f64>,
    /// Edge length between the two corners.
    #[arg(long, default_value_t = 3.0)]
    d: f64,
}

impl ModelArgs {
    fn resolve(&self) -> sogdd_core::Result<CornerModelParams> {
        let kind = match self.kind.as_str() {
            "end" => ModelKind::End,
            "l" => ModelKind::L,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown model kind '{other}' (expected end or l)"
                )))
            }
        };
        let p = CornerModelParams {
            kind,
            t1: self.t1,
            t2: self.t2,
            alpha: self.alpha.unwrap_or(PI / 8.0),
            beta: self.beta.unwrap_or(PI / 3.0),
            d: self.d,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Detect corners in an image and write them as CSV.
    Detect {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        det: DetectorArgs,
    },
    /// Cross-check the analytic model profiles against the quadrature oracle.
    ModelVerify {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1.12)]
        sigma: f64,
        #[arg(long, default_value_t = 360)]
        samples: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep the corner-vs-edge energy difference over scale.
    ScaleRange {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 3.0)]
        sigma_max: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Match detections against a ground-truth corner file.
    EvalGt {
        #[arg(long)]
        image: PathBuf,
        /// CSV of true corner coordinates, columns x,y.
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        delta: f64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        det: DetectorArgs,
    },
    /// Run a transform suite and report average repeatability per instance.
    EvalRepeat {
        #[arg(long)]
        image: PathBuf,
        /// rotation | iso-scale | aniso-scale | shear | jpeg | noise
        #[arg(long)]
        suite: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        det: DetectorArgs,
    },
    /// Mean matching accuracy between two homography-related images.
    EvalMma {
        #[arg(long)]
        image_a: PathBuf,
        #[arg(long)]
        image_b: PathBuf,
        /// File with the 9 row-major homography entries mapping a to b.
        #[arg(long)]
        homography: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        det: DetectorArgs,
    },
    /// Apply an affine transform to an image and save the result as PGM.
    Warp {
        #[arg(long)]
        image: PathBuf,
        /// rotation | iso-scale | aniso-scale | shear
        #[arg(long)]
        kind: String,
        /// Transform parameter; aniso-scale takes "sx,sy".
        #[arg(long)]
        param: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export the filter-bank kernel taps as CSV.
    ExportKernels {
        #[arg(long)]
        sigma2: Option<f64>,
        #[arg(long)]
        orientations: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn write_text(path: &Path, text: &str) -> sogdd_core::Result<()> {
    fs::write(path, text)?;
    Ok(())
}

fn cmd_detect(image: &Path, out: &Path, cfg: &DetectorConfig) -> sogdd_core::Result<()> {
    let img = load_image(image)?;
    let start = Instant::now();
    let corners = detect(&img, cfg)?;
    let elapsed = start.elapsed();
    write_text(out, &corners.to_csv())?;
    println!(
        "{} corners in {:.1} ms",
        corners.len(),
        elapsed.as_secs_f64() * 1e3
    );
    Ok(())
}

fn cmd_model_verify(
    p: &CornerModelParams,
    sigma: f64,
    samples: usize,
    out: &Path,
) -> sogdd_core::Result<()> {
    let (corner, edge) = model_profiles(p, sigma, samples)?;
    let mut csv = String::from("theta_rad,psi_closed,psi_quadrature,role\n");
    for (profile, role) in [(&corner, "corner"), (&edge, "edge")] {
        for i in 0..profile.thetas.len() {
            csv.push_str(&format!(
                "{},{},{},{}\n",
                fmt_g9(profile.thetas[i]),
                fmt_g9(profile.closed[i]),
                fmt_g9(profile.quadrature[i]),
                role
            ));
        }
    }
    write_text(out, &csv)?;
    let dev = corner
        .max_relative_deviation()
        .max(edge.max_relative_deviation());
    println!("max relative deviation: {}", fmt_g9(dev));
    if dev > 1e-2 {
        return Err(Error::Verification(format!(
            "closed form deviates from quadrature oracle by {dev}"
        )));
    }
    Ok(())
}

fn cmd_scale_range(p: &CornerModelParams, sigma_max: f64, out: &Path) -> sogdd_core::Result<()> {
    let adm = admissible_interval(p, 0.5, sigma_max, 0.01)?;
    let mut csv = String::from("sigma,energy_corner,energy_edge,diff\n");
    for (&s, &diff) in adm.sigmas.iter().zip(&adm.energy_diff) {
        let ec = energy(p, ModelPoint::Corner, s)?;
        let ee = energy(p, ModelPoint::EdgeMid, s)?;
        csv.push_str(&format!(
            "{},{},{},{}\n",
            fmt_g9(s),
            fmt_g9(ec),
            fmt_g9(ee),
            fmt_g9(diff)
        ));
    }
    write_text(out, &csv)?;

    let fmt_endpoint = |v: Option<f64>, unbounded: &str| match v {
        Some(x) => fmt_g9(x),
        None => unbounded.to_string(),
    };
    println!(
        "admissible interval: ({}, {})",
        fmt_endpoint(adm.lower, "grid-start"),
        fmt_endpoint(adm.upper, "beyond-grid")
    );
    if let Some(diag) = &adm.diagnostic {
        println!("note: {diag}");
    }
    println!(
        "fit sigma^4*E ~ a s^2 + b s + c: a={} b={} c={} rms={}",
        fmt_g9(adm.fit.a),
        fmt_g9(adm.fit.b),
        fmt_g9(adm.fit.c),
        fmt_g9(adm.fit.residual)
    );

    let sweep = admissibility_sweep(p.kind, p.d, &SWEEP_ANGLES, sigma_max)?;
    let roots: Vec<f64> = sweep.iter().filter_map(|e| e.admissible_root).collect();
    let missing = sweep.len() - roots.len();
    match roots.iter().cloned().fold(None::<f64>, |m, v| {
        Some(m.map_or(v, |m| m.min(v)))
    }) {
        Some(min_root) => println!(
            "swept minimum admissible endpoint: {} ({} of {} angle combinations had no crossing in grid)",
            fmt_g9(min_root),
            missing,
            sweep.len()
        ),
        None => println!(
            "swept admissible endpoint: none of {} angle combinations crossed within the grid",
            sweep.len()
        ),
    }
    Ok(())
}

fn parse_gt_csv(path: &Path, width: usize, height: usize) -> sogdd_core::Result<GroundTruth> {
    let text = fs::read_to_string(path)?;
    let mut pts = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("x")) {
            continue;
        }
        let mut it = line.split(',');
        let parse = |s: Option<&str>| -> sogdd_core::Result<f64> {
            s.and_then(|v| v.trim().parse().ok()).ok_or_else(|| {
                Error::Format(format!("ground-truth line {}: expected x,y", lineno + 1))
            })
        };
        let x = parse(it.next())?;
        let y = parse(it.next())?;
        pts.push((x, y));
    }
    GroundTruth::new(pts, width, height)
}

fn cmd_eval_gt(
    image: &Path,
    gt_path: &Path,
    delta: f64,
    out: &Path,
    cfg: &DetectorConfig,
) -> sogdd_core::Result<()> {
    let img = load_image(image)?;
    let gt = parse_gt_csv(gt_path, img.width(), img.height())?;
    let corners = detect(&img, cfg)?;
    let report = match_to_gt(&corners, &gt, delta)?;
    write_text(out, &report.to_csv())?;
    println!(
        "matched {} / {} (missed {}, false {}), Le = {}",
        report.matched.len(),
        gt.len(),
        report.missed,
        report.false_count,
        fmt_g9(report.localization_error)
    );
    if report.no_match_flag {
        println!("note: no pair matched; localization error is undefined and reported as 0");
    }
    Ok(())
}

fn cmd_eval_repeat(
    image: &Path,
    suite: &str,
    seed: u64,
    out: &Path,
    cfg: &DetectorConfig,
) -> sogdd_core::Result<()> {
    let img = load_image(image)?;
    let suite = SuiteId::parse(suite)?;
    let report = run_transform_suite(&img, cfg, suite, seed, Some(&JpegCodec))?;
    write_text(out, &report.to_csv())?;
    println!(
        "{}: mean R_avg = {} over {} rows",
        suite.name(),
        fmt_g9(report.mean),
        report.rows.len()
    );
    Ok(())
}

fn parse_homography(path: &Path) -> sogdd_core::Result<Homography> {
    let text = fs::read_to_string(path)?;
    let vals: Vec<f64> = text
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| Error::Format(format!("bad homography entry '{t}'")))
        })
        .collect::<sogdd_core::Result<_>>()?;
    if vals.len() != 9 {
        return Err(Error::Format(format!(
            "homography file must hold 9 numbers, found {}",
            vals.len()
        )));
    }
    Homography::new([
        [vals[0], vals[1], vals[2]],
        [vals[3], vals[4], vals[5]],
        [vals[6], vals[7], vals[8]],
    ])
}

fn cmd_eval_mma(
    image_a: &Path,
    image_b: &Path,
    homography: &Path,
    out: &Path,
    cfg: &DetectorConfig,
) -> sogdd_core::Result<()> {
    let a = load_image(image_a)?;
    let b = load_image(image_b)?;
    let h = parse_homography(homography)?;
    let ca = detect(&a, cfg)?;
    let cb = detect(&b, cfg)?;
    let pairs = mutual_nearest_pairs(&a, &ca.points(), &b, &cb.points());
    let report = mma(&pairs, &h, 1..=10)?;
    write_text(out, &report.to_csv())?;
    let mean: f64 = if report.rows.is_empty() {
        0.0
    } else {
        report.rows.iter().map(|r| r.mma).sum::<f64>() / report.rows.len() as f64
    };
    println!("{} candidate pairs, mean MMA = {}", pairs.len(), fmt_g9(mean));
    if report.empty_flag {
        println!("note: empty pair set; accuracy undefined and reported as 0");
    }
    Ok(())
}

fn cmd_warp(image: &Path, kind: &str, param: &str, out: &Path) -> sogdd_core::Result<()> {
    let img = load_image(image)?;
    let bad = |what: &str| Error::InvalidParameter(format!("bad {what} parameter '{param}'"));
    let t = match kind {
        "rotation" => AffineTransform::rotation(param.parse().map_err(|_| bad("rotation"))?),
        "iso-scale" => AffineTransform::iso_scale(param.parse().map_err(|_| bad("scale"))?)?,
        "aniso-scale" => {
            let (sx, sy) = param.split_once(',').ok_or_else(|| bad("aniso-scale"))?;
            AffineTransform::aniso_scale(
                sx.trim().parse().map_err(|_| bad("aniso-scale"))?,
                sy.trim().parse().map_err(|_| bad("aniso-scale"))?,
            )?
        }
        "shear" => AffineTransform::shear(param.parse().map_err(|_| bad("shear"))?),
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown transform kind '{other}'"
            )))
        }
    };
    let (warped, _) = warp(&img, &t)?;
    save_pgm(&warped, out)?;
    println!("{}x{} -> {}x{}", img.width(), img.height(), warped.width(), warped.height());
    Ok(())
}

fn cmd_export_kernels(sigma2: f64, orientations: usize, out: &Path) -> sogdd_core::Result<()> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter("sigma2 must be positive".into()));
    }
    let bank = build_bank(sigma2.sqrt(), orientations)?;
    let r = bank.radius() as isize;
    let mut csv = String::from("orientation,dx,dy,tap\n");
    for (k, kernel) in bank.kernels().iter().enumerate() {
        for dy in -r..=r {
            for dx in -r..=r {
                csv.push_str(&format!("{},{},{},{}\n", k, dx, dy, fmt_g9(kernel.tap(dx, dy))));
            }
        }
    }
    write_text(out, &csv)?;
    println!(
        "{} kernels of {}x{} taps",
        orientations,
        2 * r + 1,
        2 * r + 1
    );
    Ok(())
}

fn run(cli: &Cli) -> sogdd_core::Result<()> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let threads = match cli.threads {
        Some(n) => Some(n),
        None => file.get("threads")?,
    };
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::InvalidParameter("threads must be >= 1".into()));
        }
        // ignore failure if a global pool already exists (e.g. in tests)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Detect { image, out, det } => cmd_detect(image, out, &det.resolve(&file)?),
        Command::ModelVerify {
            model,
            sigma,
            samples,
            out,
        } => cmd_model_verify(&model.resolve()?, *sigma, *samples, out),
        Command::ScaleRange {
            model,
            sigma_max,
            out,
        } => cmd_scale_range(&model.resolve()?, *sigma_max, out),
        Command::EvalGt {
            image,
            gt,
            delta,
            out,
            det,
        } => cmd_eval_gt(image, gt, *delta, out, &det.resolve(&file)?),
        Command::EvalRepeat {
            image,
            suite,
            seed,
            out,
            det,
        } => {
            let seed = match seed {
                Some(s) => *s,
                None => file.get("seed")?.unwrap_or(0),
            };
            cmd_eval_repeat(image, suite, seed, out, &det.resolve(&file)?)
        }
        Command::EvalMma {
            image_a,
            image_b,
            homography,
            out,
            det,
        } => cmd_eval_mma(image_a, image_b, homography, out, &det.resolve(&file)?),
        Command::Warp {
            image,
            kind,
            param,
            out,
        } => cmd_warp(image, kind, param, out),
        Command::ExportKernels {
            sigma2,
            orientations,
            out,
        } => {
            let s2 = match sigma2 {
                Some(v) => *v,
                None => file.get("sigma2")?.unwrap_or(1.2),
            };
            let k = match orientations {
                Some(v) => *v,
                None => file.get("orientations")?.unwrap_or(8),
            };
            cmd_export_kernels(s2, k, out)
        }
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::InvalidParameter(_) | Error::Capability(_) => 1,
        Error::Io(_) | Error::Format(_) => 2,
        Error::Verification(_) => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
