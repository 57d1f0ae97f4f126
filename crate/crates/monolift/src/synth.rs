//! Deterministic synthetic scene generation.
//!
//! Places cars on a ground plane inside the camera frustum, projects their
//! template keypoints, and emits both ground truth and the matching
//! network-style detections. With zero noise the detections lift back to
//! the exact ground-truth poses, which is what makes the rest of the crate
//! testable without a trained network.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angles::wrap_to_pi;
use crate::camera::{CameraError, CameraIntrinsics, Pixel, Point3};
use crate::geometry3d::{iou3d, Box3D, Rect};
use crate::kitti::{
    frame_file_name, jsonl_to_string, write_calib, write_label_file, KeypointAnnotation,
    KittiError, KittiLabel,
};
use crate::lifting::{bin_index, Detection2D, ImageKeypoint, Pose3D, ORIENT_BINS};
use crate::templates::{model_to_camera, DepthPair, Dims, TemplateSet};

/// Name of the generator's random number stream, recorded in manifests so
/// dumps can be reproduced.
pub const RNG_NAME: &str = "chacha8";

/// Attempts per instance before placement gives up.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 1000;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scene config: {0}")]
    InvalidConfig(String),
    #[error("could not place instance {instance} after {MAX_PLACEMENT_ATTEMPTS} attempts")]
    FrustumExhausted { instance: usize },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Kitti(#[from] KittiError),
    #[error(transparent)]
    Camera(#[from] CameraError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YawMode {
    /// Yaw drawn uniformly from [-pi, pi).
    Uniform,
    /// Yaw solved so the local orientation at the lifted keypoint lands
    /// exactly on an orientation-bin median.
    BinAligned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisibilityMode {
    /// Every keypoint and box corner must project inside the image.
    AllVisible,
    /// Keypoints may fall off the image or behind nearer instances.
    Occlusion,
}

/// Generator parameters for one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub seed: u64,
    pub n_instances: usize,
    /// Depth range [z_min, z_max], meters.
    pub z_range: [f64; 2],
    pub yaw_mode: YawMode,
    /// Log-normal sigma for per-axis dimension jitter.
    pub dim_jitter_sigma: f64,
    /// Gaussian sigma added to detection keypoints, pixels.
    pub keypoint_noise_px: f64,
    pub visibility_mode: VisibilityMode,
    /// Height of the ground plane below the camera, meters.
    pub ground_y: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            n_instances: 8,
            z_range: [8.0, 40.0],
            yaw_mode: YawMode::Uniform,
            dim_jitter_sigma: 0.05,
            keypoint_noise_px: 0.0,
            visibility_mode: VisibilityMode::AllVisible,
            ground_y: 1.65,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |reason: String| Err(SynthError::InvalidConfig(reason));
        let [z0, z1] = self.z_range;
        if !(z0 > 0.0 && z1 > z0) {
            return bad(format!("z_range must satisfy 0 < z_min < z_max, got [{z0}, {z1}]"));
        }
        if !(self.dim_jitter_sigma >= 0.0) {
            return bad(format!("dim_jitter_sigma must be >= 0, got {}", self.dim_jitter_sigma));
        }
        if !(self.keypoint_noise_px >= 0.0) {
            return bad(format!("keypoint_noise_px must be >= 0, got {}", self.keypoint_noise_px));
        }
        if !self.ground_y.is_finite() {
            return bad(format!("ground_y must be finite, got {}", self.ground_y));
        }
        Ok(())
    }
}

/// One generated object: ground truth plus the detection built from it.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticInstance {
    pub gt: Pose3D,
    pub label: KittiLabel,
    pub det: Detection2D,
    /// Exact projected keypoints with their visibility, before noise.
    pub gt_keypoints: [(Pixel, bool); 14],
}

struct Placed {
    class_id: usize,
    dims: Dims,
    center: Point3,
    yaw: f64,
    score: f64,
    kp_px: [Pixel; 14],
    kp_3d: [Point3; 14],
    hull: Rect,
    box3d: Box3D,
}

fn project_instance(
    intr: &CameraIntrinsics,
    tpl_kps: &[[f64; 3]; 14],
    center: Point3,
    yaw: f64,
    dims: Dims,
) -> Option<([Pixel; 14], [Point3; 14])> {
    let mut px = [Pixel::new(0.0, 0.0); 14];
    let mut p3 = [Point3::new(0.0, 0.0, 0.0); 14];
    for (i, canon) in tpl_kps.iter().enumerate() {
        let p = model_to_camera(*canon, center, yaw, dims);
        px[i] = intr.project(p).ok()?;
        p3[i] = p;
    }
    Some((px, p3))
}

/// Largest projected pair by pixel span among the pairs the mask allows,
/// with the same tie-break as detection-side pair selection.
fn select_pair_from_pixels(kp_px: &[Pixel; 14], allowed: &[bool; 14]) -> Option<DepthPair> {
    let mut best: Option<(DepthPair, f64)> = None;
    for pair in DepthPair::ALL {
        if !(allowed[pair.top().code()] && allowed[pair.bottom().code()]) {
            continue;
        }
        let span = (kp_px[pair.top().code()].v - kp_px[pair.bottom().code()].v).abs();
        if best.map_or(true, |(_, s)| span > s) {
            best = Some((pair, span));
        }
    }
    best.map(|(pair, _)| pair)
}

fn corner_hull(intr: &CameraIntrinsics, b: &Box3D) -> Option<Rect> {
    let mut xmin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for corner in b.corners() {
        let px = intr.project(corner).ok()?;
        xmin = xmin.min(px.u);
        xmax = xmax.max(px.u);
        ymin = ymin.min(px.v);
        ymax = ymax.max(px.v);
    }
    let hull = Rect::new(xmin, ymin, xmax, ymax);
    hull.is_well_ordered().then_some(hull)
}

/// Generates one frame of instances.
///
/// Output is a pure function of the arguments: the config seeds a ChaCha8
/// stream and every draw happens in a fixed order.
pub fn generate_scene(
    cfg: &SceneConfig,
    intr: &CameraIntrinsics,
    templates: &TemplateSet,
) -> Result<Vec<SyntheticInstance>, SynthError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut placed: Vec<Placed> = Vec::with_capacity(cfg.n_instances);

    for instance in 0..cfg.n_instances {
        let mut done = false;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let class_id = rng.gen_range(0..templates.len());
            let tpl = templates.for_class(class_id).unwrap();
            let jitter = |rng: &mut ChaCha8Rng, mean: f64, sigma: f64| {
                let n: f64 = rng.sample(StandardNormal);
                mean * (sigma * n).exp()
            };
            let dims = Dims::new(
                jitter(&mut rng, tpl.mean_dims.w, cfg.dim_jitter_sigma),
                jitter(&mut rng, tpl.mean_dims.h, cfg.dim_jitter_sigma),
                jitter(&mut rng, tpl.mean_dims.l, cfg.dim_jitter_sigma),
            );
            let z = rng.gen_range(cfg.z_range[0]..cfg.z_range[1]);
            let u = rng.gen_range(0.05 * intr.image_w..0.95 * intr.image_w);
            let center = Point3::new(z * (u - intr.px) / intr.f, cfg.ground_y - dims.h / 2.0, z);
            let yaw = match cfg.yaw_mode {
                YawMode::Uniform => rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
                YawMode::BinAligned => {
                    let bin = rng.gen_range(0..ORIENT_BINS);
                    let start = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
                    match solve_bin_aligned_yaw(intr, &tpl.keypoints, center, dims, bin, start) {
                        Some(yaw) => yaw,
                        None => continue,
                    }
                }
            };
            let score = rng.gen_range(0.5..1.0);

            let Some((kp_px, kp_3d)) = project_instance(intr, &tpl.keypoints, center, yaw, dims)
            else {
                continue;
            };
            let Ok(box3d) = Box3D::new(center, yaw, dims) else { continue };
            let Some(hull) = corner_hull(intr, &box3d) else { continue };
            let on_image_ok = match cfg.visibility_mode {
                VisibilityMode::AllVisible => {
                    kp_px.iter().all(|px| intr.contains(*px))
                        && box3d
                            .corners()
                            .iter()
                            .all(|c| intr.project(*c).map_or(false, |px| intr.contains(px)))
                }
                VisibilityMode::Occlusion => {
                    let image = Rect::new(0.0, 0.0, intr.image_w, intr.image_h);
                    hull.intersection(&image).map_or(false, |c| c.is_well_ordered())
                }
            };
            if !on_image_ok {
                continue;
            }
            // Instances never interpenetrate; occlusion comes from depth
            // ordering of disjoint boxes.
            if placed.iter().any(|p| iou3d(&p.box3d, &box3d) > 0.0) {
                continue;
            }
            placed.push(Placed { class_id, dims, center, yaw, score, kp_px, kp_3d, hull, box3d });
            done = true;
            break;
        }
        if !done {
            return Err(SynthError::FrustumExhausted { instance });
        }
    }

    let image = Rect::new(0.0, 0.0, intr.image_w, intr.image_h);
    let mut out = Vec::with_capacity(placed.len());
    for (i, p) in placed.iter().enumerate() {
        let mut on_image = [false; 14];
        let mut covered = [false; 14];
        for k in 0..14 {
            on_image[k] = intr.contains(p.kp_px[k]);
            if cfg.visibility_mode == VisibilityMode::Occlusion {
                covered[k] = placed.iter().enumerate().any(|(j, q)| {
                    j != i
                        && q.center.z < p.center.z
                        && q.hull.contains(p.kp_px[k].u, p.kp_px[k].v)
                });
            }
        }
        let mut visible = [false; 14];
        for k in 0..14 {
            visible[k] = on_image[k] && !covered[k];
        }

        let clipped = p.hull.intersection(&image).unwrap_or(Rect::new(0.0, 0.0, 0.0, 0.0));
        let truncated = (1.0 - clipped.area() / p.hull.area()).clamp(0.0, 1.0);
        let n_on = on_image.iter().filter(|v| **v).count();
        let n_cov = (0..14).filter(|&k| on_image[k] && covered[k]).count();
        let occluded = if n_cov == 0 {
            0
        } else if 2 * n_cov <= n_on {
            1
        } else {
            2
        };

        // The true local angle at the keypoint that lifting will pick.
        let pair = select_pair_from_pixels(&p.kp_px, &visible)
            .unwrap_or(DepthPair::FrontLeft);
        let ray_kp = p.kp_3d[pair.bottom().code()];
        let theta_loc = wrap_to_pi(p.yaw - ray_kp.x.atan2(ray_kp.z));
        let mut orient_bins = [0.0; ORIENT_BINS];
        orient_bins[bin_index(theta_loc)] = 1.0;

        let tpl = templates.for_class(p.class_id).unwrap();
        let mut keypoints = [ImageKeypoint::new(0.0, 0.0, false); 14];
        let mut gt_keypoints = [(Pixel::new(0.0, 0.0), false); 14];
        for k in 0..14 {
            let nu: f64 = rng.sample(StandardNormal);
            let nv: f64 = rng.sample(StandardNormal);
            keypoints[k] = ImageKeypoint::new(
                p.kp_px[k].u + cfg.keypoint_noise_px * nu,
                p.kp_px[k].v + cfg.keypoint_noise_px * nv,
                visible[k],
            );
            gt_keypoints[k] = (p.kp_px[k], visible[k]);
        }
        let mut class_probs = [0.0; 5];
        class_probs[p.class_id] = 1.0;
        let det = Detection2D {
            box2d: clipped,
            keypoints,
            orient_bins,
            dim_offsets: [
                (p.dims.w / tpl.mean_dims.w).ln(),
                (p.dims.h / tpl.mean_dims.h).ln(),
                (p.dims.l / tpl.mean_dims.l).ln(),
            ],
            class_probs,
            score: p.score,
        };

        let yaw = wrap_to_pi(p.yaw);
        let gt = Pose3D { center: p.center, yaw, dims: p.dims, class_id: p.class_id, score: 1.0 };
        let label = KittiLabel {
            object_type: "Car".into(),
            truncated,
            occluded,
            alpha: wrap_to_pi(yaw - p.center.x.atan2(p.center.z)),
            bbox: clipped,
            dims: p.dims,
            location: [p.center.x, p.center.y + p.dims.h / 2.0, p.center.z],
            rotation_y: yaw,
            score: None,
        };
        out.push(SyntheticInstance { gt, label, det, gt_keypoints });
    }
    Ok(out)
}

/// Iterates `yaw = median + ray(yaw)` to a fixed point so the local angle
/// at the selected pair's bottom keypoint is exactly a bin median.
fn solve_bin_aligned_yaw(
    intr: &CameraIntrinsics,
    tpl_kps: &[[f64; 3]; 14],
    center: Point3,
    dims: Dims,
    bin: usize,
    start: f64,
) -> Option<f64> {
    let median = wrap_to_pi(crate::lifting::bin_median(bin));
    let mut yaw = start;
    for _ in 0..200 {
        let (kp_px, kp_3d) = project_instance(intr, tpl_kps, center, yaw, dims)?;
        let pair = select_pair_from_pixels(&kp_px, &[true; 14])?;
        let kp = kp_3d[pair.bottom().code()];
        let next = wrap_to_pi(median + kp.x.atan2(kp.z));
        if crate::angles::angular_difference(next, yaw) < 1e-13 {
            return Some(next);
        }
        yaw = next;
    }
    None
}

/// Adds keypoint noise and visibility dropout with its own seed.
///
/// Per keypoint, in code order, the generator draws two normals for the
/// pixel offsets and one uniform for the dropout test.
pub fn degrade(det: &Detection2D, noise_px: f64, drop_prob: f64, seed: u64) -> Detection2D {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = det.clone();
    for kp in out.keypoints.iter_mut() {
        let nu: f64 = rng.sample(StandardNormal);
        let nv: f64 = rng.sample(StandardNormal);
        kp.u += noise_px * nu;
        kp.v += noise_px * nv;
        let drop: f64 = rng.gen_range(0.0..1.0);
        kp.visible = kp.visible && drop >= drop_prob;
    }
    out
}

/// Per-frame seed derived from the dump seed, one splitmix64 step per
/// frame index.
pub fn frame_seed(seed: u64, frame: u32) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(frame as u64 + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generates several frames, each from its own derived seed. Frames are
/// independent, so the result is identical for any parallelism degree.
pub fn generate_frames(
    cfg: &SceneConfig,
    intr: &CameraIntrinsics,
    templates: &TemplateSet,
    n_frames: u32,
) -> Result<Vec<Vec<SyntheticInstance>>, SynthError> {
    use rayon::prelude::*;
    (0..n_frames)
        .into_par_iter()
        .map(|frame| {
            let frame_cfg = SceneConfig { seed: frame_seed(cfg.seed, frame), ..*cfg };
            generate_scene(&frame_cfg, intr, templates)
        })
        .collect()
}

/// Dump metadata, stored as `manifest.json` next to the frame files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub rng_name: String,
    pub spec_version: String,
    pub counts: ManifestCounts,
    pub camera: CameraIntrinsics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestCounts {
    pub frames: u32,
    pub instances: usize,
}

impl Manifest {
    pub fn new(seed: u64, intr: CameraIntrinsics, frames: &[Vec<SyntheticInstance>]) -> Self {
        Self {
            seed,
            rng_name: RNG_NAME.into(),
            spec_version: env!("CARGO_PKG_VERSION").into(),
            counts: ManifestCounts {
                frames: frames.len() as u32,
                instances: frames.iter().map(Vec::len).sum(),
            },
            camera: intr,
        }
    }
}

/// Writes the scene dump layout: `calib.txt`, `gt/%06d.txt`,
/// `kp/%06d.jsonl`, `det/%06d.jsonl`, and `manifest.json`.
pub fn write_scene_dump(
    out_dir: &std::path::Path,
    frames: &[Vec<SyntheticInstance>],
    manifest: &Manifest,
) -> Result<(), SynthError> {
    let gt_dir = out_dir.join("gt");
    let kp_dir = out_dir.join("kp");
    let det_dir = out_dir.join("det");
    for dir in [out_dir, &gt_dir, &kp_dir, &det_dir] {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(out_dir.join("calib.txt"), write_calib(&manifest.camera))?;
    std::fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_string_pretty(manifest).expect("manifest serializes") + "\n",
    )?;
    for (f, instances) in frames.iter().enumerate() {
        let frame = f as u32;
        let labels: Vec<KittiLabel> = instances.iter().map(|inst| inst.label.clone()).collect();
        std::fs::write(gt_dir.join(frame_file_name(frame, "txt")), write_label_file(&labels))?;
        let anns: Vec<KeypointAnnotation> = instances
            .iter()
            .map(|inst| KeypointAnnotation::from_pixels(frame, inst.gt.class_id, &inst.gt_keypoints))
            .collect();
        std::fs::write(kp_dir.join(frame_file_name(frame, "jsonl")), jsonl_to_string(&anns))?;
        let dets: Vec<Detection2D> = instances.iter().map(|inst| inst.det.clone()).collect();
        std::fs::write(det_dir.join(frame_file_name(frame, "jsonl")), jsonl_to_string(&dets))?;
    }
    Ok(())
}

pub fn read_manifest(path: &std::path::Path) -> Result<Manifest, SynthError> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| {
        SynthError::InvalidConfig(format!("manifest {} does not parse: {e}", path.display()))
    })
}
