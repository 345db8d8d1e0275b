//! `chartrec`: generate synthetic line charts, extract their data through
//! the detection → canonicalization → calibration pipeline, and score it.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use chartrec::augment::AugmentConfig;
use chartrec::detect::{CornerMode, NoiseModel};
use chartrec::metric::Tolerance;
use chartrec::pipeline::{self, DatasetInfo, Detector};
use chartrec::synthgen::DomainProfile;

#[derive(Parser)]
#[command(name = "chartrec", version, about = "Synthetic line-chart data extraction benchmark")]
struct Cli {
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a dataset of charts with ground truth.
    Gen(GenArgs),
    /// Run a detector and the extraction pipeline over a dataset.
    Extract(ExtractArgs),
    /// Score predictions against ground truth.
    Eval(EvalArgs),
    /// Draw detections, corners and reprojected points onto each image.
    Overlay(OverlayArgs),
    /// Sweep augmentation stages and detector noise; write a CSV table.
    Ablate(AblateArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    count: u64,
    #[arg(long, default_value = "general")]
    profile: DomainProfile,
    /// Augmentation config (TOML or JSON). Without it the full default chain runs.
    #[arg(long, conflicts_with = "no_augment")]
    augment_config: Option<PathBuf>,
    /// Write clean charts only.
    #[arg(long)]
    no_augment: bool,
    /// Dataset directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum DetectorKind {
    Oracle,
    Noisy,
    Imported,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "oracle")]
    detector: DetectorKind,
    /// Noise model for the noisy detector (TOML or JSON); defaults to the reference model.
    #[arg(long)]
    noise_config: Option<PathBuf>,
    /// Directory of `NNNNN.json` detection sets for the imported detector.
    #[arg(long, required_if_eq("detector", "imported"))]
    detections: Option<PathBuf>,
    #[arg(long, default_value = "keypoint")]
    corner_mode: CornerMode,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    out: PathBuf,
    /// `5%` for relative error, `abs:5` for absolute error in data units.
    /// Defaults to the profile's rule.
    #[arg(long, value_parser = parse_tolerance)]
    tolerance: Option<Tolerance>,
    /// Comma-separated magnitudes in the tolerance's units, e.g. `1,2,5,10,20`.
    #[arg(long, value_delimiter = ',')]
    sweep: Vec<String>,
}

#[derive(Args)]
struct OverlayArgs {
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    count: u64,
    #[arg(long, default_value = "general")]
    profile: DomainProfile,
    #[arg(long, default_value = "keypoint")]
    corner_mode: CornerMode,
    #[arg(long, value_parser = parse_tolerance)]
    tolerance: Option<Tolerance>,
    /// CSV output path.
    #[arg(long)]
    out: PathBuf,
}

fn parse_tolerance(s: &str) -> Result<Tolerance, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    let tol = if let Some(p) = s.strip_suffix('%') {
        Tolerance::relative(num(p)? / 100.0)
    } else if let Some(a) = s.strip_prefix("abs:") {
        Tolerance::absolute(num(a)?)
    } else {
        return Err(format!("{s:?}: expected a percentage like 5% or an absolute bound like abs:5"));
    };
    if tol.magnitude > 0.0 && tol.magnitude.is_finite() {
        Ok(tol)
    } else {
        Err(format!("{s:?}: tolerance must be positive"))
    }
}

/// Sweep entries share the base tolerance's kind; relative ones are percentages.
fn sweep_magnitudes(entries: &[String], base: &Tolerance) -> Result<Vec<f64>> {
    entries
        .iter()
        .map(|e| {
            let v: f64 = e.trim().trim_end_matches('%').parse().with_context(|| format!("sweep entry {e:?}"))?;
            Ok(if base.kind == chartrec::metric::ToleranceKind::Relative { v / 100.0 } else { v })
        })
        .collect()
}

fn tolerance_for(root: &Path, explicit: Option<Tolerance>) -> Result<Tolerance> {
    match explicit {
        Some(t) => Ok(t),
        None => {
            let (info, _) = pipeline::read_manifest(root)?;
            Ok(pipeline::default_tolerance(info.profile))
        }
    }
}

fn gen(a: GenArgs) -> Result<()> {
    let augment = if a.no_augment {
        None
    } else if let Some(p) = &a.augment_config {
        Some(AugmentConfig::from_path(p)?)
    } else {
        Some(AugmentConfig::default())
    };
    let info = DatasetInfo { seed: a.seed, count: a.count, profile: a.profile, augment };
    let entries = pipeline::write_dataset(&a.out, &info).context("gen")?;
    println!("wrote {} charts to {}", entries.len(), a.out.display());
    Ok(())
}

fn extract(a: ExtractArgs) -> Result<()> {
    let detector = match a.detector {
        DetectorKind::Oracle => Detector::Oracle,
        DetectorKind::Noisy => Detector::Noisy {
            noise: match &a.noise_config {
                Some(p) => NoiseModel::from_path(p)?,
                None => NoiseModel::reference(),
            },
        },
        DetectorKind::Imported => Detector::Imported { dir: a.detections.context("--detections is required")? },
    };
    let records = pipeline::extract_dataset(&a.out, &detector, a.corner_mode).context("extract")?;
    let failed: Vec<_> = records
        .iter()
        .filter_map(|r| match r {
            pipeline::PredictionRecord::Error { index, stage, message, .. } => Some((index, stage, message)),
            _ => None,
        })
        .collect();
    for (index, stage, message) in &failed {
        eprintln!("image {index}: {stage:?} failed: {message}");
    }
    println!("extracted {} images ({} failed)", records.len(), failed.len());
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let tol = tolerance_for(&a.out, a.tolerance)?;
    let sweep = sweep_magnitudes(&a.sweep, &tol)?;
    let report = pipeline::evaluate_dataset(&a.out, &tol, &sweep).context("eval")?;
    print!("{}", pipeline::format_table(&report));
    Ok(())
}

fn ablate(a: AblateArgs) -> Result<()> {
    let tol = a.tolerance.unwrap_or_else(|| pipeline::default_tolerance(a.profile));
    let rows = pipeline::run_ablation(a.seed, a.count, a.profile, a.corner_mode, &tol).context("ablate")?;
    let csv = pipeline::ablation_csv(&rows);
    pipeline::write_atomic(&a.out, csv.as_bytes())?;
    print!("{csv}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global()?;
    }
    match cli.command {
        Command::Gen(a) => gen(a),
        Command::Extract(a) => extract(a),
        Command::Eval(a) => eval(a),
        Command::Overlay(a) => {
            let n = pipeline::overlay_dataset(&a.out).context("overlay")?;
            println!("wrote {n} overlays");
            Ok(())
        }
        Command::Ablate(a) => ablate(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
