//! Command-line front end. Exit codes: 0 success, 2 input error, 3 pipeline
//! error, 4 I/O error.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use crate::baselines::{self, stress, FormBuilder, LoopZhangForms, StressConfig, NEGLIGIBLE_DISTORTION};
use crate::distortion::{distortion_of_w, moment_matrices, operand_matrices};
use crate::error::{Error, PipelineError};
use crate::geometry::StereoRig;
use crate::json::{self, from_rows, Calibration, HomographyFile, QuarticDump, RectificationFile};
use crate::quartic::{quartic_coefficients, solve_quartic};
use crate::rectify::{assemble, RectifiedPair};
use crate::samples::default_intrinsics;
use crate::synth;
use crate::warp::pnm::{read_pnm, write_pnm, PnmError};
use crate::warp::warp_image;

#[derive(Debug, Parser)]
#[command(name = "stereo-rectify", version, about = "Minimal-distortion rectification of calibrated stereo rigs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Which {
    #[value(name = "1")]
    First,
    #[value(name = "2")]
    Second,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the rectifying homographies of a calibration file.
    Rectify {
        calib: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Include quartic intermediates, coefficients and roots in the output.
        #[arg(long)]
        dump_quartic: bool,
    },
    /// Print the distortion of a homography pair or of a horizon intercept.
    Evaluate {
        calib: PathBuf,
        #[arg(
            long,
            conflicts_with = "homographies",
            required_unless_present = "homographies",
            allow_negative_numbers = true
        )]
        y1: Option<f64>,
        #[arg(long)]
        homographies: Option<PathBuf>,
    },
    /// Warp a PGM/PPM image with H1 or H2 of a homography file.
    Warp {
        image: PathBuf,
        homographies: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "1")]
        which: Which,
    },
    /// Compare against the baselines on random rigs.
    Stress {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: PathBuf,
        /// Samples of the scan oracle per trial (0 disables it).
        #[arg(long, default_value_t = 20_001)]
        scan_samples: usize,
        /// Omit wall-clock timings, making the report reproducible.
        #[arg(long)]
        no_timings: bool,
    },
    /// Render a synthetic checkerboard stereo pair with its calibration.
    Synth {
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Build and rectify a rig of the degenerate family.
    Degenerate {
        #[arg(long, allow_negative_numbers = true)]
        a: f64,
        #[arg(long, allow_negative_numbers = true)]
        theta: f64,
        #[arg(short, long)]
        out: PathBuf,
    },
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Pipeline(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Pipeline(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Pipeline(m) | CliError::Io(m) => m,
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError::Pipeline(format!("pipeline failed at {e}"))
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| io_error(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_error(path, e))
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn load_rig(path: &Path) -> Result<StereoRig, CliError> {
    let calib: Calibration = parse_json(path)?;
    calib.to_rig().map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Six significant digits; zero and float-noise values print as `0.000000`.
pub fn format_distortion(v: f64) -> String {
    if v.abs() <= NEGLIGIBLE_DISTORTION {
        return "0.000000".into();
    }
    let exponent = v.abs().log10().floor() as i32;
    if (-5..6).contains(&exponent) {
        format!("{v:.*}", (5 - exponent) as usize)
    } else {
        format!("{v:.5e}")
    }
}

fn pipeline(e: Error) -> CliError {
    CliError::Pipeline(e.to_string())
}

fn rectification_file(
    rig: &StereoRig,
    pair: &RectifiedPair,
    dump_quartic: bool,
) -> Result<RectificationFile, CliError> {
    let mut file = RectificationFile::new(pair);
    if dump_quartic {
        let ops = operand_matrices(rig).map_err(pipeline)?;
        let problem = quartic_coefficients(&ops).map_err(pipeline)?;
        let roots = solve_quartic(&problem).map_err(pipeline)?;
        file.quartic = Some(QuarticDump::new(&problem, &roots));
    }
    Ok(file)
}

fn cmd_rectify(calib: &Path, out: &Path, dump_quartic: bool) -> Result<(), CliError> {
    let rig = load_rig(calib)?;
    let pair = assemble(&rig)?;
    let file = rectification_file(&rig, &pair, dump_quartic)?;
    write_text(out, &json::to_string(&file))?;
    println!("distortion: {}", format_distortion(pair.distortion));
    println!("y1: {:.16e}", pair.y1_star);
    Ok(())
}

/// `h / h[2][2]`, failing with [`Error::NonNormalisable`] for a zero last element.
fn normalised(h: &Matrix3<f64>) -> Result<Matrix3<f64>, Error> {
    let last = h[(2, 2)];
    if !(last.abs() > 1e-12 * h.norm()) || !h.iter().all(|v| v.is_finite()) {
        return Err(Error::NonNormalisable);
    }
    Ok(h / last)
}

/// Distortion of a homography pair on the images of `rig`.
pub fn homography_distortion(rig: &StereoRig, h1: &Matrix3<f64>, h2: &Matrix3<f64>) -> Result<f64, Error> {
    let (h1, h2) = (normalised(h1)?, normalised(h2)?);
    let m1 = moment_matrices(rig.cam1.width(), rig.cam1.height())?;
    let m2 = moment_matrices(rig.cam2.width(), rig.cam2.height())?;
    let row = |h: &Matrix3<f64>| h.row(2).transpose();
    distortion_of_w(&row(&h1), &row(&h2), &m1, &m2)
}

fn cmd_evaluate(calib: &Path, y1: Option<f64>, homographies: Option<&Path>) -> Result<(), CliError> {
    let rig = load_rig(calib)?;
    let value = match (y1, homographies) {
        (Some(y), _) => operand_matrices(&rig).and_then(|ops| ops.distortion_of_y(y)).map_err(pipeline)?,
        (None, Some(path)) => {
            let h: HomographyFile = parse_json(path)?;
            homography_distortion(&rig, &from_rows(&h.h1), &from_rows(&h.h2)).map_err(pipeline)?
        }
        (None, None) => return Err(CliError::Input("one of --y1 or --homographies is required".into())),
    };
    println!("distortion: {}", format_distortion(value));
    println!("value: {value:.16e}");
    Ok(())
}

fn pnm_error(path: &Path, e: PnmError) -> CliError {
    match e {
        PnmError::Io(io) => io_error(path, io),
        other => CliError::Input(format!("{}: {other}", path.display())),
    }
}

fn cmd_warp(image: &Path, homographies: &Path, out: &Path, which: Which) -> Result<(), CliError> {
    let img = read_pnm(image).map_err(|e| pnm_error(image, e))?;
    let h: HomographyFile = parse_json(homographies)?;
    let m = from_rows(if which == Which::First { &h.h1 } else { &h.h2 });
    let [w, ht] = h.output_size.unwrap_or([img.width(), img.height()]);
    let warped = warp_image(&img, &m, w, ht).map_err(pipeline)?;
    write_pnm(&warped, out).map_err(|e| pnm_error(out, e))
}

fn cmd_stress(trials: u64, seed: u64, out: &Path, scan_samples: usize, no_timings: bool) -> Result<(), CliError> {
    if scan_samples != 0 && scan_samples < baselines::MIN_SCAN_SAMPLES {
        return Err(CliError::Input(format!("--scan-samples must be 0 or at least {}", baselines::MIN_SCAN_SAMPLES)));
    }
    let config = StressConfig { scan_samples, timings: !no_timings, ..StressConfig::default() };
    let report = stress(trials, seed, &config);
    write_text(out, &json::to_string(&report))?;
    println!("trials: {}", report.trials);
    println!("direct successes: {}", report.direct_successes);
    println!("baseline failures ({}): {}", report.pd_probe_builder, report.baseline_failures);
    if let Some(r) = &report.distortion_ratios {
        println!("fusiello/direct distortion: min {:.6} median {:.6} max {:.6}", r.min, r.median, r.max);
    }
    if let Some(t) = &report.timings {
        println!("mean ms: direct {:.4} fusiello {:.4} scan {:.4}", t.direct_ms, t.fusiello_ms, t.scan_ms);
    }
    Ok(())
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

fn cmd_synth(out: &Path, seed: u64) -> Result<(), CliError> {
    let scene = synth::generate(seed).map_err(pipeline)?;
    create_dir(out)?;
    write_text(&out.join("calib.json"), &json::to_string(&Calibration::from_rig(&scene.rig)))?;
    for (name, img) in [("left.ppm", &scene.left), ("right.ppm", &scene.right)] {
        let path = out.join(name);
        write_pnm(img, &path).map_err(|e| pnm_error(&path, e))?;
    }
    write_text(&out.join("correspondences.csv"), &synth::correspondences_csv(&scene.correspondences))?;
    println!("wrote {} correspondences to {}", scene.correspondences.len(), out.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct DegenerateReport {
    a: f64,
    theta: f64,
    rectified_form_residual: f64,
    max_row_gap: f64,
    distortion: f64,
    pd_probe_builder: &'static str,
    positive_definite: bool,
}

/// Largest rectified row difference over a fixed grid of scene points in
/// front of both cameras.
pub fn max_row_gap(rig: &StereoRig, pair: &RectifiedPair) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        for j in 0..10 {
            let x =
                Vector3::new(-2.0 + 0.4 * f64::from(i), -1.5 + 0.3 * f64::from(j), 4.0 + 0.5 * f64::from((i + j) % 7));
            let (Ok(p1), Ok(p2)) = (rig.cam1.project(&x), rig.cam2.project(&x)) else { continue };
            if !(p1.in_front && p2.in_front) {
                continue;
            }
            let (Some(a), Some(b)) = (p1.point.to_pixel(), p2.point.to_pixel()) else { continue };
            if let (Some(r1), Some(r2)) = (pair.map_point(0, a.0, a.1), pair.map_point(1, b.0, b.1)) {
                worst = worst.max((r1.1 - r2.1).abs());
            }
        }
    }
    worst
}

fn cmd_degenerate(a: f64, theta: f64, out: &Path) -> Result<(), CliError> {
    if !(a.is_finite() && theta.is_finite() && theta.abs() < std::f64::consts::FRAC_PI_2) {
        return Err(CliError::Input("need finite a and |theta| < pi/2".into()));
    }
    let rig = baselines::degenerate_rig(a, theta, &default_intrinsics()).map_err(|e| CliError::Input(e.to_string()))?;
    let pair = assemble(&rig)?;
    let report = DegenerateReport {
        a,
        theta,
        rectified_form_residual: pair.rectified_form_residual(&rig).map_err(pipeline)?,
        max_row_gap: max_row_gap(&rig, &pair),
        distortion: pair.distortion,
        pd_probe_builder: LoopZhangForms.label(),
        positive_definite: baselines::pd_probe(&rig),
    };
    create_dir(out)?;
    write_text(&out.join("calib.json"), &json::to_string(&Calibration::from_rig(&rig)))?;
    write_text(&out.join("rectified.json"), &json::to_string(&RectificationFile::new(&pair)))?;
    write_text(&out.join("report.json"), &json::to_string(&report))?;
    println!("distortion: {}", format_distortion(pair.distortion));
    println!("rectified-form residual: {:e}", report.rectified_form_residual);
    println!("max row gap: {:e} px", report.max_row_gap);
    println!("positive-definite ({}): {}", report.pd_probe_builder, report.positive_definite);
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Rectify { calib, out, dump_quartic } => cmd_rectify(&calib, &out, dump_quartic),
        Command::Evaluate { calib, y1, homographies } => cmd_evaluate(&calib, y1, homographies.as_deref()),
        Command::Warp { image, homographies, out, which } => cmd_warp(&image, &homographies, &out, which),
        Command::Stress { trials, seed, out, scan_samples, no_timings } => {
            cmd_stress(trials, seed, &out, scan_samples, no_timings)
        }
        Command::Synth { out, seed } => cmd_synth(&out, seed),
        Command::Degenerate { a, theta, out } => cmd_degenerate(a, theta, &out),
    }
}
