//! Command-line interface: scene synthesis, detection lifting, KITTI
//! evaluation, loss and gradient auditing, and template inspection.
//!
//! Exit codes: 0 success, 1 failed check, 2 bad input or config, 3 IO
//! error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::camera::{CameraError, CameraIntrinsics};
use crate::evalkit::{evaluate, EvalConfig, EvalError};
use crate::kitti::{
    frame_file_name, list_frame_files, parse_calib, parse_label_file, read_jsonl, write_label_file,
    KeypointAnnotation, KittiError, KittiLabel,
};
use crate::lifting::{assemble_pose_auto, Detection2D, LiftError};
use crate::losses::{reprojection_kink_margin, reprojection_loss, PoseParams, ReprojectionTargets};
use crate::synth::{
    generate_frames, read_manifest, write_scene_dump, Manifest, SceneConfig, SynthError,
};
use crate::templates::{TemplateError, TemplateSet};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_BAD_INPUT: u8 = 2;
pub const EXIT_IO: u8 = 3;

/// A command failure carrying the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn check(message: impl Into<String>) -> Self {
        Self { code: EXIT_CHECK_FAILED, message: message.into() }
    }
    fn input(message: impl Into<String>) -> Self {
        Self { code: EXIT_BAD_INPUT, message: message.into() }
    }
    fn io(message: impl Into<String>) -> Self {
        Self { code: EXIT_IO, message: message.into() }
    }
}

impl From<KittiError> for CliError {
    fn from(e: KittiError) -> Self {
        match e {
            KittiError::Io(_) => CliError::io(e.to_string()),
            _ => CliError::input(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Io(_) => CliError::io(e.to_string()),
            SynthError::Kitti(k) => k.into(),
            _ => CliError::input(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Kitti(k) => k.into(),
            _ => CliError::input(e.to_string()),
        }
    }
}

impl From<CameraError> for CliError {
    fn from(e: CameraError) -> Self {
        CliError::input(e.to_string())
    }
}

fn template_error(e: TemplateError) -> CliError {
    match e {
        TemplateError::Io(_) => CliError::io(e.to_string()),
        TemplateError::Json(_)
        | TemplateError::Empty
        | TemplateError::NonDenseClassIds(_)
        | TemplateError::WrongTemplateCount(_)
        | TemplateError::MissingKeypoint { .. }
        | TemplateError::UnknownKeypoint { .. } => CliError::input(e.to_string()),
        _ => CliError::check(e.to_string()),
    }
}

#[derive(Parser)]
#[command(name = "monolift", version, about = "Keypoint-based monocular 3D detection toolkit")]
pub struct Cli {
    /// Worker threads; 0 uses every core. Results do not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a synthetic scene dump with ground truth and detections.
    Synth(SynthArgs),
    /// Lift 2D detections to 3D poses and write KITTI label files.
    Lift(LiftArgs),
    /// Evaluate detection label files against ground truth.
    Eval(EvalArgs),
    /// Audit the reprojection loss and its gradients on a scene dump.
    Losscheck(LosscheckArgs),
    /// Validate or display keypoint template files.
    Templates {
        #[command(subcommand)]
        command: TemplatesCommand,
    },
}

#[derive(Args)]
pub struct SynthArgs {
    /// Run configuration JSON; omitted means built-in defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for the dump.
    #[arg(long)]
    pub out: PathBuf,
    /// Template JSON file; omitted means the built-in set.
    #[arg(long)]
    pub templates: Option<PathBuf>,
}

#[derive(Args)]
pub struct LiftArgs {
    /// Directory of per-frame detection files (%06d.jsonl).
    #[arg(long)]
    pub dets: PathBuf,
    /// KITTI calibration file providing P2.
    #[arg(long)]
    pub calib: PathBuf,
    /// Image size as WIDTHxHEIGHT pixels.
    #[arg(long, default_value = "1242x375")]
    pub image_size: String,
    /// Template JSON file; omitted means the built-in set.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    /// Output directory for KITTI label files.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Ground-truth label directory (%06d.txt).
    #[arg(long)]
    pub gt: PathBuf,
    /// Detection label directory (%06d.txt with scores).
    #[arg(long)]
    pub det: PathBuf,
    /// Optional calibration file to validate alongside the labels.
    #[arg(long)]
    pub calib: Option<PathBuf>,
    /// Evaluation configuration JSON; omitted means the KITTI defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for file formats (csv, json, svg).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Report formats to produce.
    #[arg(long, value_delimiter = ',', default_value = "table")]
    pub format: Vec<ReportFormat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Table,
    Csv,
    Json,
    Svg,
}

#[derive(Args)]
pub struct LosscheckArgs {
    /// Scene dump directory as written by synth.
    #[arg(long)]
    pub dump: PathBuf,
    /// Restrict the audit to one frame index.
    #[arg(long)]
    pub frame: Option<u32>,
    /// Template JSON file; omitted means the built-in set.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    /// Fail when the ground-truth loss exceeds this. Omitted means report
    /// only: label files quantize poses to six decimals, so the loss floor
    /// of an intact dump sits near 1e-8 rather than zero.
    #[arg(long)]
    pub tol_loss: Option<f64>,
    /// Largest admissible relative gradient error.
    #[arg(long, default_value_t = 1e-4)]
    pub tol_grad: f64,
}

#[derive(Subcommand)]
pub enum TemplatesCommand {
    /// Parse a template file and check its geometric invariants.
    Validate { file: PathBuf },
    /// Print a template summary, or one class in full.
    Show {
        /// Template JSON file; omitted means the built-in set.
        file: Option<PathBuf>,
        #[arg(long)]
        class: Option<usize>,
    },
}

/// Camera block of the run configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    pub f: f64,
    pub px: f64,
    pub py: f64,
    pub width: f64,
    pub height: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self { f: 721.5377, px: 609.5593, py: 172.854, width: 1242.0, height: 375.0 }
    }
}

impl CameraConfig {
    pub fn intrinsics(&self) -> Result<CameraIntrinsics, CameraError> {
        CameraIntrinsics::new(self.f, self.px, self.py, self.width, self.height)
    }
}

/// Top-level synth run configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scene: SceneConfig,
    pub n_frames: u32,
    pub camera: CameraConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { scene: SceneConfig::default(), n_frames: 1, camera: CameraConfig::default() }
    }
}

fn is_broken_pipe(payload: &(dyn std::any::Any + Send)) -> bool {
    payload
        .downcast_ref::<String>()
        .map(String::as_str)
        .or_else(|| payload.downcast_ref::<&str>().copied())
        .is_some_and(|s| s.contains("Broken pipe"))
}

/// Parses arguments, sets up the thread pool, and runs one command.
///
/// A closed standard output (the reader of a shell pipe exiting early) ends
/// the run quietly with success instead of a print panic.
pub fn run_from_args() -> ExitCode {
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_BAD_INPUT);
        }
    };
    let default_hook = std::panic::take_hook();
    std::panic::set_hook(Box::new(move |info| {
        if !is_broken_pipe(info.payload()) {
            default_hook(info);
        }
    }));
    let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
        pool.install(|| run_command(&cli.command))
    }));
    match outcome {
        Ok(Ok(())) => ExitCode::from(EXIT_OK),
        Ok(Err(e)) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
        Err(payload) if is_broken_pipe(payload.as_ref()) => ExitCode::from(EXIT_OK),
        Err(payload) => std::panic::resume_unwind(payload),
    }
}

pub fn run_command(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Synth(args) => cmd_synth(args),
        Command::Lift(args) => cmd_lift(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Losscheck(args) => cmd_losscheck(args),
        Command::Templates { command } => match command {
            TemplatesCommand::Validate { file } => cmd_templates_validate(file),
            TemplatesCommand::Show { file, class } => cmd_templates_show(file.as_deref(), *class),
        },
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))
}

fn load_templates(path: Option<&Path>) -> Result<TemplateSet, CliError> {
    match path {
        Some(p) => TemplateSet::load(p).map_err(template_error),
        None => Ok(TemplateSet::builtin()),
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::input(format!("{what}: {e}")))
}

fn cmd_synth(args: &SynthArgs) -> Result<(), CliError> {
    let cfg: RunConfig = match &args.config {
        Some(path) => parse_json(&read_text(path)?, "run config")?,
        None => RunConfig::default(),
    };
    cfg.scene.validate().map_err(CliError::from)?;
    let intr = cfg.camera.intrinsics()?;
    let templates = load_templates(args.templates.as_deref())?;
    let frames = generate_frames(&cfg.scene, &intr, &templates, cfg.n_frames)?;
    let manifest = Manifest::new(cfg.scene.seed, intr, &frames);
    write_scene_dump(&args.out, &frames, &manifest)?;
    println!(
        "wrote {} frames with {} instances to {}",
        manifest.counts.frames,
        manifest.counts.instances,
        args.out.display()
    );
    Ok(())
}

fn parse_image_size(s: &str) -> Result<(f64, f64), CliError> {
    let err = || CliError::input(format!("image size must look like 1242x375, got {s:?}"));
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(err)?;
    let w: f64 = w.trim().parse().map_err(|_| err())?;
    let h: f64 = h.trim().parse().map_err(|_| err())?;
    if !(w > 0.0 && h > 0.0) {
        return Err(err());
    }
    Ok((w, h))
}

fn cmd_lift(args: &LiftArgs) -> Result<(), CliError> {
    let (width, height) = parse_image_size(&args.image_size)?;
    let calib = parse_calib(&read_text(&args.calib)?)?;
    let intr = calib.intrinsics(width, height)?;
    let templates = load_templates(args.templates.as_deref())?;
    let frames = list_frame_files(&args.dets, "jsonl")?;
    if frames.is_empty() {
        return Err(CliError::input(format!(
            "no %06d.jsonl detection files in {}",
            args.dets.display()
        )));
    }
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::io(format!("cannot create {}: {e}", args.out.display())))?;

    let mut lifted = 0usize;
    let mut skipped = 0usize;
    for (frame, path) in &frames {
        let dets: Vec<Detection2D> = read_jsonl(path)?;
        let mut labels = Vec::new();
        for (i, det) in dets.iter().enumerate() {
            det.validate().map_err(|e| {
                CliError::input(format!("frame {frame:06} detection {i}: {e}"))
            })?;
            match assemble_pose_auto(&intr, det, &templates) {
                Ok(pose) => labels.push(KittiLabel::from_pose(&pose, det.box2d, "Car")),
                Err(LiftError::NoVisiblePair | LiftError::DegeneratePair { .. }) => skipped += 1,
                Err(e) => {
                    return Err(CliError::input(format!("frame {frame:06} detection {i}: {e}")))
                }
            }
        }
        lifted += labels.len();
        let out_path = args.out.join(frame_file_name(*frame, "txt"));
        std::fs::write(&out_path, write_label_file(&labels))
            .map_err(|e| CliError::io(format!("cannot write {}: {e}", out_path.display())))?;
    }
    if skipped > 0 {
        eprintln!("skipped {skipped} detections without a usable keypoint pair");
    }
    println!("lifted {lifted} detections across {} frames into {}", frames.len(), args.out.display());
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let cfg: EvalConfig = match &args.config {
        Some(path) => parse_json(&read_text(path)?, "eval config")?,
        None => EvalConfig::default(),
    };
    let needs_out = args.format.iter().any(|f| *f != ReportFormat::Table);
    if needs_out && args.out.is_none() {
        return Err(CliError::input("--out is required for csv, json, or svg output"));
    }
    let report = evaluate(&args.gt, &args.det, args.calib.as_deref(), &cfg)?;
    for format in &args.format {
        match format {
            ReportFormat::Table => print!("{}", report.table()),
            ReportFormat::Csv => write_report(args.out.as_deref(), "report.csv", report.to_csv())?,
            ReportFormat::Json => {
                write_report(args.out.as_deref(), "report.json", report.to_json())?
            }
            ReportFormat::Svg => {
                write_report(args.out.as_deref(), "pr_curves.svg", report.pr_svg())?
            }
        }
    }
    Ok(())
}

fn write_report(out: Option<&Path>, name: &str, content: String) -> Result<(), CliError> {
    let dir = out.expect("checked above");
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, content)
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

const PARAM_NAMES: [&str; 7] = ["c_x", "c_y", "c_z", "yaw", "w", "h", "l"];

fn cmd_losscheck(args: &LosscheckArgs) -> Result<(), CliError> {
    let manifest = read_manifest(&args.dump.join("manifest.json"))?;
    let intr = manifest.camera;
    let templates = load_templates(args.templates.as_deref())?;
    let gt_frames = list_frame_files(&args.dump.join("gt"), "txt")?;
    let frames: Vec<(u32, PathBuf)> = match args.frame {
        Some(f) => gt_frames.into_iter().filter(|(id, _)| *id == f).collect(),
        None => gt_frames,
    };
    if frames.is_empty() {
        return Err(CliError::input("no matching ground-truth frames in the dump"));
    }

    let mut n_instances = 0usize;
    let mut worst_loss = 0.0f64;
    // (relative error, frame, instance, parameter index)
    let mut worst_grad = (0.0f64, 0u32, 0usize, 0usize);
    for (frame, gt_path) in &frames {
        let labels = parse_label_file(&read_text(gt_path)?)?;
        let anns: Vec<KeypointAnnotation> =
            read_jsonl(&args.dump.join("kp").join(frame_file_name(*frame, "jsonl")))?;
        if labels.len() != anns.len() {
            return Err(CliError::input(format!(
                "frame {frame:06}: {} labels but {} keypoint annotations",
                labels.len(),
                anns.len()
            )));
        }
        for (i, (label, ann)) in labels.iter().zip(&anns).enumerate() {
            let tpl = templates.for_class(ann.class_id).ok_or_else(|| {
                CliError::input(format!(
                    "frame {frame:06} instance {i}: class {} has no template",
                    ann.class_id
                ))
            })?;
            let pixels = ann.to_pixels();
            let gt = ReprojectionTargets {
                keypoints: pixels.map(|(px, _)| px),
                visible: pixels.map(|(_, vis)| vis),
                box2d: label.bbox,
            };
            let params =
                PoseParams { center: label.center(), yaw: label.rotation_y, dims: label.dims };
            let at_gt = reprojection_loss(&intr, tpl, &params, &gt).map_err(|e| {
                CliError::input(format!("frame {frame:06} instance {i}: {e}"))
            })?;
            worst_loss = worst_loss.max(at_gt.value);
            let (rel, param) = gradient_audit(&intr, tpl, &params, &gt).map_err(|mut e| {
                e.message = format!("frame {frame:06} instance {i}: {}", e.message);
                e
            })?;
            if rel > worst_grad.0 {
                worst_grad = (rel, *frame, i, param);
            }
            n_instances += 1;
        }
    }

    let loss_ok = args.tol_loss.map_or(true, |tol| worst_loss <= tol);
    let grad_ok = worst_grad.0 <= args.tol_grad;
    match args.tol_loss {
        Some(tol) => println!(
            "loss at ground truth: max {:.3e} over {} instances (tolerance {:.0e}) .. {}",
            worst_loss,
            n_instances,
            tol,
            if loss_ok { "ok" } else { "FAILED" }
        ),
        None => println!(
            "loss at ground truth: max {:.3e} over {} instances",
            worst_loss, n_instances
        ),
    }
    println!(
        "gradient audit: worst rel {:.3e} at frame {:06} instance {} param {} (tolerance {:.0e}) .. {}",
        worst_grad.0,
        worst_grad.1,
        worst_grad.2,
        PARAM_NAMES[worst_grad.3],
        args.tol_grad,
        if grad_ok { "ok" } else { "FAILED" }
    );
    if loss_ok && grad_ok {
        Ok(())
    } else {
        Err(CliError::check("loss audit failed"))
    }
}

/// Compares analytic and central-difference gradients at a perturbed,
/// kink-free pose near the ground truth. Returns the worst relative error
/// and the parameter it occurred on.
fn gradient_audit(
    intr: &CameraIntrinsics,
    tpl: &crate::templates::KeypointTemplate,
    params: &PoseParams,
    gt: &ReprojectionTargets,
) -> Result<(f64, usize), CliError> {
    const DIRECTION: [f64; 7] = [0.12, -0.08, 0.15, 0.06, 0.05, -0.04, 0.07];
    const MIN_MARGIN: f64 = 5e-3;

    let base = params.as_array();
    let mut probe = None;
    for k in 0..20 {
        let scale = 1.17f64.powi(k);
        let mut p = base;
        for (pj, dj) in p.iter_mut().zip(&DIRECTION) {
            *pj += scale * dj;
        }
        let candidate = PoseParams::from_array(p);
        match reprojection_kink_margin(intr, tpl, &candidate, gt) {
            Ok(margin) if margin >= MIN_MARGIN => {
                probe = Some(candidate);
                break;
            }
            _ => {}
        }
    }
    let probe =
        probe.ok_or_else(|| CliError::check("no kink-free probe point near this instance"))?;

    let analytic = reprojection_loss(intr, tpl, &probe, gt)
        .map_err(|e| CliError::input(e.to_string()))?;
    let p0 = probe.as_array();
    let mut worst = (0.0f64, 0usize);
    for j in 0..7 {
        let h = 1e-6 * p0[j].abs().max(1.0);
        let mut lo = p0;
        let mut hi = p0;
        lo[j] -= h;
        hi[j] += h;
        let f_lo = reprojection_loss(intr, tpl, &PoseParams::from_array(lo), gt)
            .map_err(|e| CliError::input(e.to_string()))?
            .value;
        let f_hi = reprojection_loss(intr, tpl, &PoseParams::from_array(hi), gt)
            .map_err(|e| CliError::input(e.to_string()))?
            .value;
        let fd = (f_hi - f_lo) / (2.0 * h);
        let rel = (fd - analytic.grad[j]).abs() / analytic.grad[j].abs().max(fd.abs()).max(1.0);
        if rel > worst.0 {
            worst = (rel, j);
        }
    }
    Ok(worst)
}

fn cmd_templates_validate(file: &Path) -> Result<(), CliError> {
    let text = read_text(file)?;
    let set = TemplateSet::from_json_str(&text).map_err(template_error)?;
    println!("{}: {} classes, all invariants hold", file.display(), set.len());
    Ok(())
}

fn cmd_templates_show(file: Option<&Path>, class: Option<usize>) -> Result<(), CliError> {
    let set = load_templates(file)?;
    match class {
        None => {
            println!("{} classes", set.len());
            println!(
                "{:<4}{:<10}{:>8}{:>8}{:>8}{:>9}{:>9}{:>9}{:>9}",
                "id", "name", "w", "h", "l", "r_fl", "r_fr", "r_rl", "r_rr"
            );
            for t in set.iter() {
                let r: Vec<String> = crate::templates::DepthPair::ALL
                    .iter()
                    .map(|p| format!("{:>9.3}", t.pair_height_ratio(*p)))
                    .collect();
                println!(
                    "{:<4}{:<10}{:>8.3}{:>8.3}{:>8.3}{}",
                    t.class_id,
                    t.class_name,
                    t.mean_dims.w,
                    t.mean_dims.h,
                    t.mean_dims.l,
                    r.join("")
                );
            }
        }
        Some(id) => {
            let t = set
                .for_class(id)
                .ok_or_else(|| CliError::input(format!("no class {id} in this template set")))?;
            println!(
                "class {} ({}), mean dims w {:.3} h {:.3} l {:.3}",
                t.class_id, t.class_name, t.mean_dims.w, t.mean_dims.h, t.mean_dims.l
            );
            println!("{:<22}{:>9}{:>9}{:>9}", "keypoint", "x", "y", "z");
            for kp in crate::templates::KeypointId::ALL {
                let [x, y, z] = t.keypoint(kp);
                println!("{:<22}{:>9.4}{:>9.4}{:>9.4}", kp.name(), x, y, z);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn image_size_parsing() {
        assert_eq!(parse_image_size("1242x375").unwrap(), (1242.0, 375.0));
        assert_eq!(parse_image_size("1280X720").unwrap(), (1280.0, 720.0));
        assert!(parse_image_size("1242").is_err());
        assert!(parse_image_size("0x375").is_err());
        assert!(parse_image_size("ax375").is_err());
    }

    #[test]
    fn run_config_defaults_and_unknown_fields() {
        let cfg: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
        let cfg: RunConfig =
            serde_json::from_str(r#"{"n_frames": 3, "scene": {"seed": 7}}"#).unwrap();
        assert_eq!(cfg.n_frames, 3);
        assert_eq!(cfg.scene.seed, 7);
        assert_eq!(cfg.scene.n_instances, SceneConfig::default().n_instances);
        assert!(serde_json::from_str::<RunConfig>(r#"{"frames": 3}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"camera": {"fx": 700}}"#).is_err());
    }

    #[test]
    fn cli_parses_subcommands() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
        let cli = Cli::parse_from(["monolift", "--threads", "2", "synth", "--out", "/tmp/x"]);
        assert_eq!(cli.threads, 2);
        assert!(matches!(cli.command, Command::Synth(_)));
        let cli = Cli::parse_from([
            "monolift",
            "eval",
            "--gt",
            "a",
            "--det",
            "b",
            "--format",
            "table,csv",
        ]);
        match cli.command {
            Command::Eval(args) => {
                assert_eq!(args.format, vec![ReportFormat::Table, ReportFormat::Csv]);
            }
            _ => panic!("expected eval"),
        }
    }

    #[test]
    fn template_errors_map_to_exit_codes() {
        let io = TemplateError::Io(std::io::Error::new(std::io::ErrorKind::NotFound, "x"));
        assert_eq!(template_error(io).code, EXIT_IO);
        let parse = TemplateError::WrongTemplateCount(4);
        assert_eq!(template_error(parse).code, EXIT_BAD_INPUT);
        let invariant = TemplateError::NonPositiveDims {
            class: 0,
            dims: crate::templates::Dims::new(-1.0, 1.0, 1.0),
        };
        assert_eq!(template_error(invariant).code, EXIT_CHECK_FAILED);
    }
}
