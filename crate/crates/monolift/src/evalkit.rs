//! KITTI-protocol evaluation: difficulty buckets, greedy matching by 3D
//! IoU, interpolated average precision, and size/orientation error tables.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angles::angular_difference;
use crate::geometry3d::{iou3d, Box3D, GeometryError};
use crate::kitti::{list_frame_files, parse_calib, parse_label_file, KittiError, KittiLabel};
use crate::templates::Dims;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no ground truth in this bucket, AP is undefined")]
    EmptyGroundTruth,
    #[error("no matched pairs, errors are undefined")]
    NoMatches,
    #[error("frame {0:06} has detections but no ground truth file")]
    MissingFrame(u32),
    #[error("frame {0:06} has a detection without a score")]
    MissingScore(u32),
    #[error("invalid eval config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Kitti(#[from] KittiError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Ground-truth difficulty filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DifficultyBucket {
    pub name: String,
    pub min_box_height_px: f64,
    pub max_occlusion: i32,
    pub max_truncation: f64,
}

/// The standard KITTI buckets: easy, moderate, hard.
pub fn standard_buckets() -> Vec<DifficultyBucket> {
    let bucket = |name: &str, h: f64, occ: i32, trunc: f64| DifficultyBucket {
        name: name.into(),
        min_box_height_px: h,
        max_occlusion: occ,
        max_truncation: trunc,
    };
    vec![
        bucket("easy", 40.0, 0, 0.15),
        bucket("moderate", 25.0, 1, 0.30),
        bucket("hard", 25.0, 2, 0.50),
    ]
}

/// True when the ground-truth label clears the bucket's thresholds.
/// Labels with sentinel (negative) occlusion fail every bucket.
pub fn bucket_filter(gt: &KittiLabel, bucket: &DifficultyBucket) -> bool {
    gt.box_height() >= bucket.min_box_height_px
        && (0..=bucket.max_occlusion).contains(&gt.occluded)
        && gt.truncated >= 0.0
        && gt.truncated <= bucket.max_truncation
}

/// What happened to one detection during matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetOutcome {
    /// Claimed the ground truth with this index.
    Tp(usize),
    /// Overlapped only out-of-bucket ground truth; dropped from scoring.
    Ignored,
    Fp,
}

/// Matching of one frame. Vectors are indexed like the inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatch {
    pub det_outcomes: Vec<DetOutcome>,
    pub gt_matched: Vec<bool>,
}

/// Descending-score order, stable for equal scores.
fn score_order(dets: &[(Box3D, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].1.partial_cmp(&dets[a].1).unwrap().then(a.cmp(&b)));
    order
}

fn match_core(
    iou_valid: &[Vec<f64>],
    iou_ignored: &[Vec<f64>],
    det_order: &[usize],
    n_dets: usize,
    iou_thr: f64,
) -> FrameMatch {
    let n_gt = iou_valid.len();
    let mut gt_matched = vec![false; n_gt];
    let mut det_outcomes = vec![DetOutcome::Fp; n_dets];
    for &d in det_order {
        let mut best: Option<(usize, f64)> = None;
        for g in 0..n_gt {
            if gt_matched[g] {
                continue;
            }
            let iou = iou_valid[g][d];
            if best.map_or(true, |(_, b)| iou > b) {
                best = Some((g, iou));
            }
        }
        if let Some((g, iou)) = best {
            if iou >= iou_thr {
                gt_matched[g] = true;
                det_outcomes[d] = DetOutcome::Tp(g);
                continue;
            }
        }
        let absorbed = iou_ignored.iter().any(|row| row[d] >= iou_thr);
        det_outcomes[d] = if absorbed { DetOutcome::Ignored } else { DetOutcome::Fp };
    }
    FrameMatch { det_outcomes, gt_matched }
}

/// Greedy matching: detections in descending score order each claim the
/// unmatched ground truth with the highest 3D IoU at or above the
/// threshold.
pub fn match_greedy(gts: &[Box3D], dets: &[(Box3D, f64)], iou_thr: f64) -> FrameMatch {
    let iou_valid: Vec<Vec<f64>> = gts
        .iter()
        .map(|g| dets.iter().map(|(d, _)| iou3d(g, d)).collect())
        .collect();
    match_core(&iou_valid, &[], &score_order(dets), dets.len(), iou_thr)
}

/// [`match_greedy`] with an extra pool of ignored ground truth. A
/// detection overlapping only ignored ground truth is neither a true nor a
/// false positive.
pub fn match_with_ignored(
    valid_gts: &[Box3D],
    ignored_gts: &[Box3D],
    dets: &[(Box3D, f64)],
    iou_thr: f64,
) -> FrameMatch {
    let iou_valid: Vec<Vec<f64>> = valid_gts
        .iter()
        .map(|g| dets.iter().map(|(d, _)| iou3d(g, d)).collect())
        .collect();
    let iou_ignored: Vec<Vec<f64>> = ignored_gts
        .iter()
        .map(|g| dets.iter().map(|(d, _)| iou3d(g, d)).collect())
        .collect();
    match_core(&iou_valid, &iou_ignored, &score_order(dets), dets.len(), iou_thr)
}

/// One scored detection flagged as true or false positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredFlag {
    pub score: f64,
    pub tp: bool,
}

/// Which recall grid average precision interpolates over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApPoints {
    /// Recalls 0.0, 0.1, ..., 1.0.
    Eleven,
    /// Recalls 1/40, 2/40, ..., 1.0.
    Forty,
}

impl ApPoints {
    pub fn method_name(self) -> &'static str {
        match self {
            ApPoints::Eleven => "ap11",
            ApPoints::Forty => "ap40",
        }
    }

    fn recalls(self) -> Vec<f64> {
        match self {
            ApPoints::Eleven => (0..=10).map(|i| i as f64 / 10.0).collect(),
            ApPoints::Forty => (1..=40).map(|i| i as f64 / 40.0).collect(),
        }
    }
}

/// The raw precision-recall staircase: one (recall, precision) point per
/// score-ranked detection prefix.
pub fn pr_curve(flags: &[ScoredFlag], n_gt: usize) -> Vec<(f64, f64)> {
    let mut sorted = flags.to_vec();
    sorted.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap());
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut out = Vec::with_capacity(sorted.len());
    for f in &sorted {
        if f.tp {
            tp += 1;
        } else {
            fp += 1;
        }
        out.push((tp as f64 / n_gt as f64, tp as f64 / (tp + fp) as f64));
    }
    out
}

/// Interpolated average precision in percent: the mean over the recall
/// grid of the maximum precision at or beyond each recall level.
pub fn average_precision(
    flags: &[ScoredFlag],
    n_gt: usize,
    points: ApPoints,
) -> Result<f64, EvalError> {
    if n_gt == 0 {
        return Err(EvalError::EmptyGroundTruth);
    }
    let curve = pr_curve(flags, n_gt);
    let recalls = points.recalls();
    let mut total = 0.0;
    for r in &recalls {
        let p = curve
            .iter()
            .filter(|(rec, _)| rec >= r)
            .map(|(_, prec)| *prec)
            .fold(0.0f64, f64::max);
        total += p;
    }
    Ok(100.0 * total / recalls.len() as f64)
}

/// One matched ground-truth/detection pair, reduced to the fields the
/// error tables need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedPose {
    pub gt_dims: Dims,
    pub gt_yaw: f64,
    pub det_dims: Dims,
    pub det_yaw: f64,
}

/// Mean absolute errors over matched pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeOrientationMae {
    pub height: f64,
    pub width: f64,
    pub length: f64,
    /// Wrapped absolute yaw difference, radians in [0, pi].
    pub orientation: f64,
}

pub fn size_orientation_errors(pairs: &[MatchedPose]) -> Result<SizeOrientationMae, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::NoMatches);
    }
    let n = pairs.len() as f64;
    let mut mae = SizeOrientationMae { height: 0.0, width: 0.0, length: 0.0, orientation: 0.0 };
    for p in pairs {
        mae.height += (p.gt_dims.h - p.det_dims.h).abs();
        mae.width += (p.gt_dims.w - p.det_dims.w).abs();
        mae.length += (p.gt_dims.l - p.det_dims.l).abs();
        mae.orientation += angular_difference(p.gt_yaw, p.det_yaw);
    }
    mae.height /= n;
    mae.width /= n;
    mae.length /= n;
    mae.orientation /= n;
    Ok(mae)
}

/// Evaluation settings. Defaults follow the usual KITTI car protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub iou_thresholds: Vec<f64>,
    pub buckets: Vec<DifficultyBucket>,
    pub classes: Vec<String>,
    pub ap_points: ApPoints,
    /// Also report 40-point AP rows alongside the main method.
    pub also_r40: bool,
    /// Bucket and threshold the error table is computed from.
    pub mae_bucket: String,
    pub mae_iou: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_thresholds: vec![0.5, 0.7],
            buckets: standard_buckets(),
            classes: vec!["Car".into()],
            ap_points: ApPoints::Eleven,
            also_r40: false,
            mae_bucket: "hard".into(),
            mae_iou: 0.5,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.iou_thresholds.is_empty() {
            return Err(EvalError::InvalidConfig("iou_thresholds must not be empty".into()));
        }
        if self.buckets.is_empty() {
            return Err(EvalError::InvalidConfig("buckets must not be empty".into()));
        }
        if !self.buckets.iter().any(|b| b.name == self.mae_bucket) {
            return Err(EvalError::InvalidConfig(format!(
                "mae_bucket {:?} is not one of the configured buckets",
                self.mae_bucket
            )));
        }
        if !self.iou_thresholds.contains(&self.mae_iou) {
            return Err(EvalError::InvalidConfig(format!(
                "mae_iou {} is not one of the configured thresholds",
                self.mae_iou
            )));
        }
        Ok(())
    }
}

/// One AP cell of the report. `ap` is absent when the bucket holds no
/// ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApEntry {
    pub bucket: String,
    pub iou: f64,
    pub method: String,
    pub n_gt: usize,
    pub ap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurveEntry {
    pub bucket: String,
    pub iou: f64,
    /// (recall, precision) staircase samples.
    pub samples: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub frames: usize,
    pub entries: Vec<ApEntry>,
    pub mae: Option<SizeOrientationMae>,
    pub mae_matches: usize,
    pub curves: Vec<PrCurveEntry>,
}

struct FrameData {
    frame: u32,
    /// Class-matching labels with their boxes.
    gt: Vec<(KittiLabel, Box3D)>,
    dets: Vec<(KittiLabel, Box3D, f64)>,
    /// IoU of every class gt against every detection.
    iou_gt_det: Vec<Vec<f64>>,
    /// IoU of every out-of-class label against every detection.
    iou_foreign_det: Vec<Vec<f64>>,
}

fn load_frame(
    frame: u32,
    gt_path: &Path,
    det_path: Option<&Path>,
    cfg: &EvalConfig,
) -> Result<FrameData, EvalError> {
    let gt_labels = parse_label_file(&std::fs::read_to_string(gt_path).map_err(KittiError::Io)?)?;
    let det_labels = match det_path {
        Some(p) => parse_label_file(&std::fs::read_to_string(p).map_err(KittiError::Io)?)?,
        None => Vec::new(),
    };

    let mut gt = Vec::new();
    let mut foreign = Vec::new();
    for label in gt_labels {
        // Labels without a usable 3D box (DontCare rows) cannot be matched
        // in 3D and are skipped.
        let Ok(b) = label.box3d() else { continue };
        if cfg.classes.contains(&label.object_type) {
            gt.push((label, b));
        } else {
            foreign.push(b);
        }
    }
    let mut dets = Vec::new();
    for label in det_labels {
        if !cfg.classes.contains(&label.object_type) {
            continue;
        }
        let score = label.score.ok_or(EvalError::MissingScore(frame))?;
        let b = label.box3d()?;
        dets.push((label, b, score));
    }
    let iou_gt_det: Vec<Vec<f64>> = gt
        .iter()
        .map(|(_, g)| dets.iter().map(|(_, d, _)| iou3d(g, d)).collect())
        .collect();
    let iou_foreign_det: Vec<Vec<f64>> = foreign
        .iter()
        .map(|g| dets.iter().map(|(_, d, _)| iou3d(g, d)).collect())
        .collect();
    Ok(FrameData { frame, gt, dets, iou_gt_det, iou_foreign_det })
}

/// Runs the full evaluation over aligned per-frame label files.
///
/// The ground-truth directory defines the frame set; a detection file may
/// be absent (zero detections), but a detection frame without ground truth
/// is an error. The calibration file, when given, is parsed and validated.
pub fn evaluate(
    gt_dir: &Path,
    det_dir: &Path,
    calib: Option<&Path>,
    cfg: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    use rayon::prelude::*;

    cfg.validate()?;
    if let Some(path) = calib {
        parse_calib(&std::fs::read_to_string(path).map_err(KittiError::Io)?)?;
    }

    let gt_frames = list_frame_files(gt_dir, "txt")?;
    let det_frames = list_frame_files(det_dir, "txt")?;
    let gt_ids: std::collections::BTreeSet<u32> = gt_frames.iter().map(|(f, _)| *f).collect();
    if let Some((frame, _)) = det_frames.iter().find(|(f, _)| !gt_ids.contains(f)) {
        return Err(EvalError::MissingFrame(*frame));
    }
    let det_by_id: std::collections::BTreeMap<u32, &Path> =
        det_frames.iter().map(|(f, p)| (*f, p.as_path())).collect();

    let frames: Vec<FrameData> = gt_frames
        .par_iter()
        .map(|(frame, gt_path)| load_frame(*frame, gt_path, det_by_id.get(frame).copied(), cfg))
        .collect::<Result<_, _>>()?;

    let mut entries = Vec::new();
    let mut curves = Vec::new();
    let mut mae_pairs: Vec<MatchedPose> = Vec::new();
    let mut mae_matches = 0usize;

    let mut methods = vec![cfg.ap_points];
    if cfg.also_r40 && cfg.ap_points != ApPoints::Forty {
        methods.push(ApPoints::Forty);
    }

    for bucket in &cfg.buckets {
        for &thr in &cfg.iou_thresholds {
            let mut n_gt = 0usize;
            // (score, frame, det index, tp) tuples for deterministic
            // global ordering.
            let mut flags: Vec<(f64, u32, usize, bool)> = Vec::new();
            let mut pairs: Vec<MatchedPose> = Vec::new();
            for fd in &frames {
                let valid: Vec<bool> =
                    fd.gt.iter().map(|(label, _)| bucket_filter(label, bucket)).collect();
                n_gt += valid.iter().filter(|v| **v).count();
                let matched = match_frame_masked(fd, &valid, thr);
                for (d, outcome) in matched.det_outcomes.iter().enumerate() {
                    match outcome {
                        DetOutcome::Tp(g) => {
                            flags.push((fd.dets[d].2, fd.frame, d, true));
                            pairs.push(MatchedPose {
                                gt_dims: fd.gt[*g].0.dims,
                                gt_yaw: fd.gt[*g].0.rotation_y,
                                det_dims: fd.dets[d].0.dims,
                                det_yaw: fd.dets[d].0.rotation_y,
                            });
                        }
                        DetOutcome::Fp => flags.push((fd.dets[d].2, fd.frame, d, false)),
                        DetOutcome::Ignored => {}
                    }
                }
            }
            flags.sort_by(|a, b| {
                b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
            });
            let scored: Vec<ScoredFlag> =
                flags.iter().map(|(score, _, _, tp)| ScoredFlag { score: *score, tp: *tp }).collect();
            for &method in &methods {
                let ap = match average_precision(&scored, n_gt, method) {
                    Ok(ap) => Some(ap),
                    Err(EvalError::EmptyGroundTruth) => None,
                    Err(e) => return Err(e),
                };
                entries.push(ApEntry {
                    bucket: bucket.name.clone(),
                    iou: thr,
                    method: method.method_name().into(),
                    n_gt,
                    ap,
                });
            }
            if n_gt > 0 {
                curves.push(PrCurveEntry {
                    bucket: bucket.name.clone(),
                    iou: thr,
                    samples: pr_curve(&scored, n_gt),
                });
            }
            if bucket.name == cfg.mae_bucket && thr == cfg.mae_iou {
                mae_matches = pairs.len();
                mae_pairs = pairs;
            }
        }
    }

    let mae = size_orientation_errors(&mae_pairs).ok();
    Ok(EvalReport { frames: frames.len(), entries, mae, mae_matches, curves })
}

/// Per-frame matching with a validity mask over the frame's class gts;
/// invalid rows join the foreign labels in the ignored pool.
fn match_frame_masked(fd: &FrameData, valid: &[bool], thr: f64) -> FrameMatch {
    let n_dets = fd.dets.len();
    let mut iou_valid = Vec::new();
    let mut iou_ignored: Vec<Vec<f64>> = fd.iou_foreign_det.clone();
    let mut valid_rows = Vec::new();
    for (g, row) in fd.iou_gt_det.iter().enumerate() {
        if valid[g] {
            iou_valid.push(row.clone());
            valid_rows.push(g);
        } else {
            iou_ignored.push(row.clone());
        }
    }
    let det_boxes: Vec<(Box3D, f64)> = fd.dets.iter().map(|(_, b, s)| (*b, *s)).collect();
    let mut m = match_core(&iou_valid, &iou_ignored, &score_order(&det_boxes), n_dets, thr);
    // Remap masked gt indices back to frame gt indices.
    for outcome in m.det_outcomes.iter_mut() {
        if let DetOutcome::Tp(g) = outcome {
            *g = valid_rows[*g];
        }
    }
    let mut gt_matched = vec![false; fd.gt.len()];
    for outcome in &m.det_outcomes {
        if let DetOutcome::Tp(g) = outcome {
            gt_matched[*g] = true;
        }
    }
    m.gt_matched = gt_matched;
    m
}

impl EvalReport {
    /// One CSV row per bucket, threshold, and method.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bucket,iou,method,n_gt,ap\n");
        for e in &self.entries {
            let ap = e.ap.map(|a| format!("{a:.4}")).unwrap_or_default();
            out.push_str(&format!("{},{:.2},{},{},{}\n", e.bucket, e.iou, e.method, e.n_gt, ap));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Human-readable summary table.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let mut methods: Vec<&str> = Vec::new();
        for e in &self.entries {
            if !methods.contains(&e.method.as_str()) {
                methods.push(e.method.as_str());
            }
        }
        let thresholds: Vec<f64> = {
            let mut t: Vec<f64> = self.entries.iter().map(|e| e.iou).collect();
            t.sort_by(|a, b| a.partial_cmp(b).unwrap());
            t.dedup();
            t
        };
        for method in methods {
            out.push_str(&format!("AP3D percent ({method}), {} frames\n", self.frames));
            let mut header = format!("{:<12}{:>8}", "bucket", "n_gt");
            for thr in &thresholds {
                header.push_str(&format!("{:>12}", format!("IoU {thr:.2}")));
            }
            out.push_str(&header);
            out.push('\n');
            let mut buckets: Vec<&str> = Vec::new();
            for e in self.entries.iter().filter(|e| e.method == method) {
                if !buckets.contains(&e.bucket.as_str()) {
                    buckets.push(e.bucket.as_str());
                }
            }
            for bucket in buckets {
                let n_gt = self
                    .entries
                    .iter()
                    .find(|e| e.method == method && e.bucket == bucket)
                    .map_or(0, |e| e.n_gt);
                let mut row = format!("{bucket:<12}{n_gt:>8}");
                for thr in &thresholds {
                    let cell = self
                        .entries
                        .iter()
                        .find(|e| e.method == method && e.bucket == bucket && e.iou == *thr)
                        .and_then(|e| e.ap);
                    row.push_str(&match cell {
                        Some(ap) => format!("{ap:>12.2}"),
                        None => format!("{:>12}", "-"),
                    });
                }
                out.push_str(&row);
                out.push('\n');
            }
        }
        match &self.mae {
            Some(m) => out.push_str(&format!(
                "MAE over {} matches: h {:.3} m, w {:.3} m, l {:.3} m, orientation {:.3} rad\n",
                self.mae_matches, m.height, m.width, m.length, m.orientation
            )),
            None => out.push_str("MAE: no matched pairs\n"),
        }
        out
    }

    /// Precision-recall curves as a standalone SVG document.
    pub fn pr_svg(&self) -> String {
        const W: f64 = 640.0;
        const H: f64 = 480.0;
        const M: f64 = 50.0;
        let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
        let x = |r: f64| M + r * (W - 2.0 * M);
        let y = |p: f64| H - M - p * (H - 2.0 * M);
        let mut s = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
             <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
             <rect x=\"{M}\" y=\"{M}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>\n\
             <text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">recall</text>\n\
             <text x=\"14\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">precision</text>\n",
            W - 2.0 * M,
            H - 2.0 * M,
            W / 2.0,
            H - 12.0,
            H / 2.0,
            H / 2.0,
        );
        for (i, curve) in self.curves.iter().enumerate() {
            let color = colors[i % colors.len()];
            let mut points = format!("{},{}", x(0.0), y(1.0));
            let mut last_p = 1.0;
            for (r, p) in &curve.samples {
                points.push_str(&format!(" {},{}", x(*r), y(last_p)));
                points.push_str(&format!(" {},{}", x(*r), y(*p)));
                last_p = *p;
            }
            s.push_str(&format!(
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{points}\"/>\n"
            ));
            s.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">{} IoU {:.2}</text>\n",
                M + 8.0,
                M + 16.0 + 15.0 * i as f64,
                curve.bucket,
                curve.iou
            ));
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::Point3;
    use crate::geometry3d::Rect;
    use crate::kitti::{frame_file_name, write_label_file};
    use proptest::prelude::*;

    fn car_box(x: f64, z: f64, yaw: f64) -> Box3D {
        Box3D::new(Point3::new(x, 0.8, z), yaw, Dims::new(1.8, 1.5, 4.5)).unwrap()
    }

    fn gt_label(x: f64, z: f64, yaw: f64, height_px: f64, occ: i32, trunc: f64) -> KittiLabel {
        KittiLabel {
            object_type: "Car".into(),
            truncated: trunc,
            occluded: occ,
            alpha: 0.0,
            bbox: Rect::new(100.0, 100.0, 160.0, 100.0 + height_px),
            dims: Dims::new(1.8, 1.5, 4.5),
            location: [x, 0.8 + 0.75, z],
            rotation_y: yaw,
            score: None,
        }
    }

    fn det_label(mut label: KittiLabel, score: f64) -> KittiLabel {
        label.score = Some(score);
        label
    }

    #[test]
    fn bucket_filter_examples() {
        let buckets = standard_buckets();
        let easy_gt = gt_label(0.0, 10.0, 0.0, 45.0, 0, 0.1);
        assert!(bucket_filter(&easy_gt, &buckets[0]));
        assert!(bucket_filter(&easy_gt, &buckets[1]));
        assert!(bucket_filter(&easy_gt, &buckets[2]));

        let moderate_gt = gt_label(0.0, 10.0, 0.0, 30.0, 1, 0.2);
        assert!(!bucket_filter(&moderate_gt, &buckets[0]));
        assert!(bucket_filter(&moderate_gt, &buckets[1]));
        assert!(bucket_filter(&moderate_gt, &buckets[2]));

        let tiny_gt = gt_label(0.0, 10.0, 0.0, 20.0, 0, 0.0);
        assert!(buckets.iter().all(|b| !bucket_filter(&tiny_gt, b)));

        let sentinel = gt_label(0.0, 10.0, 0.0, 45.0, -1, 0.0);
        assert!(buckets.iter().all(|b| !bucket_filter(&sentinel, b)));
    }

    #[test]
    fn greedy_matching_examples() {
        let gts = vec![car_box(0.0, 10.0, 0.1), car_box(6.0, 20.0, -0.4)];
        let dets: Vec<(Box3D, f64)> = gts.iter().map(|b| (*b, 0.9)).collect();
        let m = match_greedy(&gts, &dets, 0.7);
        assert_eq!(m.det_outcomes, vec![DetOutcome::Tp(0), DetOutcome::Tp(1)]);
        assert!(m.gt_matched.iter().all(|v| *v));

        let m = match_greedy(&gts, &[], 0.7);
        assert!(m.det_outcomes.is_empty());
        assert!(m.gt_matched.iter().all(|v| !v));

        // Two detections on one gt: the higher score wins, the other is a
        // false positive.
        let one_gt = vec![car_box(0.0, 10.0, 0.1)];
        let dets = vec![(car_box(0.0, 10.0, 0.1), 0.6), (car_box(0.0, 10.0, 0.1), 0.9)];
        let m = match_greedy(&one_gt, &dets, 0.7);
        assert_eq!(m.det_outcomes, vec![DetOutcome::Fp, DetOutcome::Tp(0)]);
    }

    #[test]
    fn ignored_ground_truth_absorbs_detections() {
        let valid = vec![car_box(0.0, 10.0, 0.0)];
        let ignored = vec![car_box(8.0, 30.0, 0.0)];
        let dets = vec![
            (car_box(0.0, 10.0, 0.0), 0.9),
            (car_box(8.0, 30.0, 0.0), 0.8),
            (car_box(-8.0, 50.0, 0.0), 0.7),
        ];
        let m = match_with_ignored(&valid, &ignored, &dets, 0.5);
        assert_eq!(
            m.det_outcomes,
            vec![DetOutcome::Tp(0), DetOutcome::Ignored, DetOutcome::Fp]
        );
    }

    #[test]
    fn average_precision_examples() {
        let perfect: Vec<ScoredFlag> =
            (0..5).map(|i| ScoredFlag { score: 0.9 - 0.1 * i as f64, tp: true }).collect();
        assert_eq!(average_precision(&perfect, 5, ApPoints::Eleven).unwrap(), 100.0);
        assert_eq!(average_precision(&perfect, 5, ApPoints::Forty).unwrap(), 100.0);

        let misses: Vec<ScoredFlag> =
            (0..5).map(|i| ScoredFlag { score: 0.9 - 0.1 * i as f64, tp: false }).collect();
        assert_eq!(average_precision(&misses, 5, ApPoints::Eleven).unwrap(), 0.0);
        assert_eq!(average_precision(&[], 3, ApPoints::Eleven).unwrap(), 0.0);

        // One gt, a true positive ranked first and a false positive below:
        // precision is 1 at every achieved recall.
        let flags = vec![ScoredFlag { score: 0.9, tp: true }, ScoredFlag { score: 0.5, tp: false }];
        assert_eq!(average_precision(&flags, 1, ApPoints::Eleven).unwrap(), 100.0);

        assert!(matches!(
            average_precision(&flags, 0, ApPoints::Eleven),
            Err(EvalError::EmptyGroundTruth)
        ));
    }

    #[test]
    fn average_precision_interpolates_correctly() {
        // 2 gts, one found: recall tops out at 0.5 with precision 1.
        let flags = vec![ScoredFlag { score: 0.9, tp: true }];
        let ap = average_precision(&flags, 2, ApPoints::Eleven).unwrap();
        // Levels 0.0 .. 0.5 see precision 1; levels 0.6 .. 1.0 see none.
        assert!((ap - 100.0 * 6.0 / 11.0).abs() < 1e-9);
    }

    #[test]
    fn size_orientation_error_examples() {
        let base = MatchedPose {
            gt_dims: Dims::new(1.8, 1.5, 4.5),
            gt_yaw: 0.3,
            det_dims: Dims::new(1.8, 1.5, 4.5),
            det_yaw: 0.3,
        };
        let mae = size_orientation_errors(&[base]).unwrap();
        assert_eq!((mae.height, mae.width, mae.length, mae.orientation), (0.0, 0.0, 0.0, 0.0));

        let mut wrapped = base;
        wrapped.det_yaw = base.gt_yaw + std::f64::consts::TAU - 0.1;
        let mae = size_orientation_errors(&[wrapped]).unwrap();
        assert!((mae.orientation - 0.1).abs() < 1e-12);

        let mut tall = base;
        tall.det_dims = Dims::new(1.8, 1.5 + 0.101, 4.5);
        let mae = size_orientation_errors(&[tall]).unwrap();
        assert!((mae.height - 0.101).abs() < 1e-12);

        assert!(matches!(size_orientation_errors(&[]), Err(EvalError::NoMatches)));
    }

    fn write_frames(dir: &Path, sub: &str, frames: &[Vec<KittiLabel>]) {
        let d = dir.join(sub);
        std::fs::create_dir_all(&d).unwrap();
        for (f, labels) in frames.iter().enumerate() {
            std::fs::write(d.join(frame_file_name(f as u32, "txt")), write_label_file(labels))
                .unwrap();
        }
    }

    fn two_frame_gt() -> Vec<Vec<KittiLabel>> {
        vec![
            vec![
                gt_label(0.0, 10.0, 0.2, 60.0, 0, 0.0),
                gt_label(6.0, 24.0, -0.7, 32.0, 1, 0.1),
            ],
            vec![gt_label(-4.0, 15.0, 1.1, 48.0, 0, 0.05)],
        ]
    }

    #[test]
    fn evaluate_perfect_and_shifted() {
        let dir = tempfile::tempdir().unwrap();
        let gt = two_frame_gt();
        write_frames(dir.path(), "gt", &gt);
        let dets: Vec<Vec<KittiLabel>> = gt
            .iter()
            .map(|frame| frame.iter().map(|l| det_label(l.clone(), 0.9)).collect())
            .collect();
        write_frames(dir.path(), "det", &dets);

        let cfg = EvalConfig::default();
        let report =
            evaluate(&dir.path().join("gt"), &dir.path().join("det"), None, &cfg).unwrap();
        assert_eq!(report.frames, 2);
        for e in &report.entries {
            assert!(e.n_gt > 0);
            assert_eq!(e.ap, Some(100.0), "bucket {} iou {}", e.bucket, e.iou);
        }
        let mae = report.mae.unwrap();
        assert_eq!(mae.height, 0.0);
        assert_eq!(mae.orientation, 0.0);

        // Push every detection 10 m deeper: nothing overlaps any more.
        let far: Vec<Vec<KittiLabel>> = dets
            .iter()
            .map(|frame| {
                frame
                    .iter()
                    .map(|l| {
                        let mut l = l.clone();
                        l.location[2] += 10.0;
                        l
                    })
                    .collect()
            })
            .collect();
        write_frames(dir.path(), "det_far", &far);
        let report =
            evaluate(&dir.path().join("gt"), &dir.path().join("det_far"), None, &cfg).unwrap();
        for e in &report.entries {
            assert_eq!(e.ap, Some(0.0), "bucket {} iou {}", e.bucket, e.iou);
        }
    }

    #[test]
    fn evaluate_handles_missing_and_extra_files() {
        let dir = tempfile::tempdir().unwrap();
        let gt = two_frame_gt();
        write_frames(dir.path(), "gt", &gt);
        // Only frame 0 has detections; frame 1's file is absent.
        let dets = vec![gt[0].iter().map(|l| det_label(l.clone(), 0.8)).collect()];
        write_frames(dir.path(), "det", &dets);
        let report =
            evaluate(&dir.path().join("gt"), &dir.path().join("det"), None, &EvalConfig::default())
                .unwrap();
        let hard = report
            .entries
            .iter()
            .find(|e| e.bucket == "hard" && e.iou == 0.5)
            .unwrap();
        assert_eq!(hard.n_gt, 3);
        let ap = hard.ap.unwrap();
        assert!(ap < 100.0 && ap > 0.0);

        // A detection frame with no gt counterpart is an error.
        std::fs::write(
            dir.path().join("det").join(frame_file_name(9, "txt")),
            write_label_file(&[det_label(gt_label(0.0, 10.0, 0.0, 50.0, 0, 0.0), 0.9)]),
        )
        .unwrap();
        let err =
            evaluate(&dir.path().join("gt"), &dir.path().join("det"), None, &EvalConfig::default())
                .unwrap_err();
        assert!(matches!(err, EvalError::MissingFrame(9)), "got {err}");
    }

    #[test]
    fn evaluate_rejects_scoreless_detections_and_bad_config() {
        let dir = tempfile::tempdir().unwrap();
        let gt = two_frame_gt();
        write_frames(dir.path(), "gt", &gt);
        write_frames(dir.path(), "det", &gt);
        let err =
            evaluate(&dir.path().join("gt"), &dir.path().join("det"), None, &EvalConfig::default())
                .unwrap_err();
        assert!(matches!(err, EvalError::MissingScore(_)), "got {err}");

        let cfg = EvalConfig { mae_bucket: "extreme".into(), ..EvalConfig::default() };
        let err = evaluate(&dir.path().join("gt"), &dir.path().join("det"), None, &cfg).unwrap_err();
        assert!(matches!(err, EvalError::InvalidConfig(_)));
    }

    #[test]
    fn foreign_types_absorb_but_do_not_score() {
        let dir = tempfile::tempdir().unwrap();
        let mut van = gt_label(6.0, 20.0, 0.0, 50.0, 0, 0.0);
        van.object_type = "Van".into();
        let gt = vec![vec![gt_label(0.0, 10.0, 0.0, 50.0, 0, 0.0), van.clone()]];
        write_frames(dir.path(), "gt", &gt);
        // One det per object, including one on the van.
        let dets = vec![vec![
            det_label(gt[0][0].clone(), 0.9),
            det_label({ let mut v = van; v.object_type = "Car".into(); v }, 0.8),
        ]];
        write_frames(dir.path(), "det", &dets);
        let report =
            evaluate(&dir.path().join("gt"), &dir.path().join("det"), None, &EvalConfig::default())
                .unwrap();
        for e in &report.entries {
            assert_eq!(e.n_gt, 1);
            assert_eq!(e.ap, Some(100.0), "van det must be ignored, not a false positive");
        }
    }

    #[test]
    fn report_writers_produce_consistent_formats() {
        let dir = tempfile::tempdir().unwrap();
        let gt = two_frame_gt();
        write_frames(dir.path(), "gt", &gt);
        let dets: Vec<Vec<KittiLabel>> = gt
            .iter()
            .map(|frame| frame.iter().map(|l| det_label(l.clone(), 0.9)).collect())
            .collect();
        write_frames(dir.path(), "det", &dets);
        let cfg = EvalConfig { also_r40: true, ..EvalConfig::default() };
        let report =
            evaluate(&dir.path().join("gt"), &dir.path().join("det"), None, &cfg).unwrap();

        let csv = report.to_csv();
        // Header plus 3 buckets x 2 thresholds x 2 methods.
        assert_eq!(csv.lines().count(), 1 + 12);
        assert!(csv.starts_with("bucket,iou,method,n_gt,ap\n"));
        assert!(csv.contains("easy,0.50,ap11,"));
        assert!(csv.contains(",ap40,"));

        let parsed: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(parsed["frames"], 2);
        assert!(parsed["entries"].as_array().unwrap().len() == 12);

        let svg = report.pr_svg();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("polyline"));

        let table = report.table();
        assert!(table.contains("easy") && table.contains("IoU 0.50"));
    }

    proptest! {
        /// Raising the IoU threshold never raises AP; appending an extra
        /// true positive never lowers it.
        #[test]
        fn ap_monotonicity(
            seed in 0u64..500,
            n_gt in 1usize..6,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
            let gts: Vec<Box3D> = (0..n_gt)
                .map(|i| car_box(7.0 * i as f64, 10.0 + 9.0 * i as f64, rng.gen_range(-1.0..1.0)))
                .collect();
            let dets: Vec<(Box3D, f64)> = gts
                .iter()
                .map(|b| {
                    let jitter = rng.gen_range(-1.2..1.2);
                    let shifted = Box3D::new(
                        Point3::new(b.center.x + jitter, b.center.y, b.center.z),
                        b.yaw,
                        b.dims,
                    )
                    .unwrap();
                    (shifted, rng.gen_range(0.1..1.0))
                })
                .collect();
            let flags_at = |thr: f64| {
                let m = match_greedy(&gts, &dets, thr);
                let mut flags: Vec<ScoredFlag> = dets
                    .iter()
                    .zip(&m.det_outcomes)
                    .filter(|(_, o)| **o != DetOutcome::Ignored)
                    .map(|((_, s), o)| ScoredFlag { score: *s, tp: matches!(o, DetOutcome::Tp(_)) })
                    .collect();
                flags.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap());
                flags
            };
            let ap_lo = average_precision(&flags_at(0.5), n_gt, ApPoints::Eleven).unwrap();
            let ap_hi = average_precision(&flags_at(0.7), n_gt, ApPoints::Eleven).unwrap();
            prop_assert!(ap_hi <= ap_lo + 1e-9);

            // One more gt, detected perfectly with top score.
            let mut gts2 = gts.clone();
            gts2.push(car_box(-40.0, 70.0, 0.0));
            let mut dets2 = dets.clone();
            dets2.push((car_box(-40.0, 70.0, 0.0), 2.0));
            let m = match_greedy(&gts2, &dets2, 0.5);
            let mut flags2: Vec<ScoredFlag> = dets2
                .iter()
                .zip(&m.det_outcomes)
                .map(|((_, s), o)| ScoredFlag { score: *s, tp: matches!(o, DetOutcome::Tp(_)) })
                .collect();
            flags2.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap());
            let ap_plus = average_precision(&flags2, n_gt + 1, ApPoints::Eleven).unwrap();
            prop_assert!(ap_plus >= ap_lo - 1e-9);
        }
    }
}
