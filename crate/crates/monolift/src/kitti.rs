//! Readers and writers for the KITTI on-disk formats.
//!
//! Covers object label files, calibration files, detection result files,
//! and the JSON-lines keypoint annotation format. Labels store the box
//! location as the bottom-center of the box; the rest of the crate works
//! with the geometric center, and the conversion happens here and nowhere
//! else.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angles::wrap_to_pi;
use crate::camera::{CameraError, CameraIntrinsics, Pixel, Point3};
use crate::geometry3d::{Box3D, GeometryError, Rect};
use crate::lifting::Pose3D;
use crate::templates::Dims;

#[derive(Debug, Error)]
pub enum KittiError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("calibration is missing the {0} matrix")]
    MissingMatrix(String),
    #[error("calibration matrix {key}: {reason}")]
    MalformedMatrix { key: String, reason: String },
    #[error("line {line}: {source}")]
    MalformedJsonLine { line: usize, source: serde_json::Error },
    #[error("keypoint {index} is marked visible but lies outside the image")]
    KeypointOutOfImage { index: usize },
    #[error(transparent)]
    Camera(#[from] CameraError),
}

/// One object row of a KITTI label or result file.
///
/// Field order on disk: type, truncated, occluded, alpha, bbox (4 values),
/// h, w, l, x, y, z, rotation_y, and an optional score. `location` is the
/// bottom-center of the 3D box in camera coordinates. Result files
/// conventionally carry -1 in the truncated and occluded slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KittiLabel {
    pub object_type: String,
    pub truncated: f64,
    pub occluded: i32,
    pub alpha: f64,
    pub bbox: Rect,
    /// Metric dimensions; the file stores them in h, w, l order.
    pub dims: Dims,
    /// Bottom-center of the box (x, y, z), meters.
    pub location: [f64; 3],
    pub rotation_y: f64,
    pub score: Option<f64>,
}

impl KittiLabel {
    /// Converts a pose to a label row. The stored location drops from the
    /// geometric center to the bottom face, and alpha is derived from the
    /// yaw and the viewing ray of the center.
    pub fn from_pose(pose: &Pose3D, box2d: Rect, object_type: &str) -> Self {
        let c = pose.center;
        Self {
            object_type: object_type.to_string(),
            truncated: -1.0,
            occluded: -1,
            alpha: wrap_to_pi(pose.yaw - c.x.atan2(c.z)),
            bbox: box2d,
            dims: pose.dims,
            location: [c.x, c.y + pose.dims.h / 2.0, c.z],
            rotation_y: pose.yaw,
            score: Some(pose.score),
        }
    }

    /// Geometric box center, meters.
    pub fn center(&self) -> Point3 {
        let [x, y, z] = self.location;
        Point3::new(x, y - self.dims.h / 2.0, z)
    }

    /// The label's yaw-rotated 3D box.
    pub fn box3d(&self) -> Result<Box3D, GeometryError> {
        Box3D::new(self.center(), self.rotation_y, self.dims)
    }

    /// Pixel height of the 2D box.
    pub fn box_height(&self) -> f64 {
        self.bbox.height()
    }
}

fn parse_field<T: std::str::FromStr>(
    fields: &[&str],
    idx: usize,
    name: &str,
    line: usize,
) -> Result<T, KittiError> {
    fields[idx].parse().map_err(|_| KittiError::MalformedLine {
        line,
        reason: format!("field {name} is not a valid number: {:?}", fields[idx]),
    })
}

fn parse_label_line(text: &str, line: usize) -> Result<KittiLabel, KittiError> {
    let fields: Vec<&str> = text.split_whitespace().collect();
    if fields.len() != 15 && fields.len() != 16 {
        return Err(KittiError::MalformedLine {
            line,
            reason: format!("expected 15 or 16 fields, found {}", fields.len()),
        });
    }
    let object_type = fields[0].to_string();
    let truncated: f64 = parse_field(&fields, 1, "truncated", line)?;
    let occluded_raw: f64 = parse_field(&fields, 2, "occluded", line)?;
    let alpha: f64 = parse_field(&fields, 3, "alpha", line)?;
    let bbox = Rect::new(
        parse_field(&fields, 4, "bbox.xmin", line)?,
        parse_field(&fields, 5, "bbox.ymin", line)?,
        parse_field(&fields, 6, "bbox.xmax", line)?,
        parse_field(&fields, 7, "bbox.ymax", line)?,
    );
    let h: f64 = parse_field(&fields, 8, "h", line)?;
    let w: f64 = parse_field(&fields, 9, "w", line)?;
    let l: f64 = parse_field(&fields, 10, "l", line)?;
    let location = [
        parse_field(&fields, 11, "x", line)?,
        parse_field(&fields, 12, "y", line)?,
        parse_field(&fields, 13, "z", line)?,
    ];
    let rotation_y: f64 = parse_field(&fields, 14, "rotation_y", line)?;
    let score = if fields.len() == 16 {
        Some(parse_field(&fields, 15, "score", line)?)
    } else {
        None
    };

    let malformed = |reason: String| Err(KittiError::MalformedLine { line, reason });
    for (name, v) in [("truncated", truncated), ("alpha", alpha), ("rotation_y", rotation_y)] {
        if !v.is_finite() {
            return malformed(format!("field {name} must be finite, got {v}"));
        }
    }
    // Result files use -1 as a not-provided sentinel for truncation and
    // occlusion; otherwise truncation is a fraction.
    if truncated != -1.0 && !(0.0..=1.0).contains(&truncated) {
        return malformed(format!("truncated must lie in [0, 1] or be -1, got {truncated}"));
    }
    if occluded_raw.fract() != 0.0 || !(-1.0..=3.0).contains(&occluded_raw) {
        return malformed(format!("occluded must be an integer in -1..=3, got {occluded_raw}"));
    }
    if !bbox.is_well_ordered() {
        return malformed(format!(
            "bbox must satisfy xmin < xmax and ymin < ymax, got ({}, {}, {}, {})",
            bbox.xmin, bbox.ymin, bbox.xmax, bbox.ymax
        ));
    }
    // DontCare rows carry -1 dimensions; every other type needs real ones.
    if object_type != "DontCare" && !(h >= 0.0 && w >= 0.0 && l >= 0.0) {
        return malformed(format!("dimensions must be non-negative, got h={h} w={w} l={l}"));
    }

    Ok(KittiLabel {
        object_type,
        truncated,
        occluded: occluded_raw as i32,
        alpha,
        bbox,
        dims: Dims::new(w, h, l),
        location,
        rotation_y,
        score,
    })
}

/// Parses a KITTI label or result file. Blank lines are skipped; line
/// numbers in errors are 1-based.
pub fn parse_label_file(text: &str) -> Result<Vec<KittiLabel>, KittiError> {
    let mut labels = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        labels.push(parse_label_line(line, i + 1)?);
    }
    Ok(labels)
}

/// Formats one label row. Floats are printed with 6 decimals (truncation
/// with 2, occlusion as an integer) so a write-parse round trip agrees to
/// 1e-6.
pub fn format_label(label: &KittiLabel) -> String {
    let mut s = String::new();
    let b = &label.bbox;
    let [x, y, z] = label.location;
    write!(
        s,
        "{} {:.2} {} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6}",
        label.object_type,
        label.truncated,
        label.occluded,
        label.alpha,
        b.xmin,
        b.ymin,
        b.xmax,
        b.ymax,
        label.dims.h,
        label.dims.w,
        label.dims.l,
        x,
        y,
        z,
        label.rotation_y,
    )
    .unwrap();
    if let Some(score) = label.score {
        write!(s, " {score:.6}").unwrap();
    }
    s
}

/// Serializes labels to file content, one row per line.
pub fn write_label_file(labels: &[KittiLabel]) -> String {
    let mut out = String::new();
    for label in labels {
        out.push_str(&format_label(label));
        out.push('\n');
    }
    out
}

/// A parsed calibration file: the P2 projection matrix plus every other
/// key the file carried.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibFile {
    pub p2: [[f64; 4]; 3],
    pub raw: BTreeMap<String, Vec<f64>>,
}

/// Parses the devkit key-value calibration format ("P2: v0 v1 ...").
pub fn parse_calib(text: &str) -> Result<CalibFile, KittiError> {
    let mut raw = BTreeMap::new();
    for line in text.lines() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let Some((key, rest)) = line.split_once(':') else { continue };
        let key = key.trim().to_string();
        let mut values = Vec::new();
        for tok in rest.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| KittiError::MalformedMatrix {
                key: key.clone(),
                reason: format!("value {tok:?} is not a number"),
            })?;
            values.push(v);
        }
        raw.insert(key, values);
    }
    let p2_values = raw.get("P2").ok_or_else(|| KittiError::MissingMatrix("P2".into()))?;
    if p2_values.len() != 12 {
        return Err(KittiError::MalformedMatrix {
            key: "P2".into(),
            reason: format!("expected 12 values, found {}", p2_values.len()),
        });
    }
    let mut p2 = [[0.0; 4]; 3];
    for r in 0..3 {
        for c in 0..4 {
            p2[r][c] = p2_values[r * 4 + c];
        }
    }
    if !(p2[0][0] > 0.0) {
        return Err(KittiError::MalformedMatrix {
            key: "P2".into(),
            reason: format!("focal length must be positive, got {}", p2[0][0]),
        });
    }
    if (p2[1][1] - p2[0][0]).abs() > 0.01 * p2[0][0] {
        return Err(KittiError::MalformedMatrix {
            key: "P2".into(),
            reason: format!(
                "focal lengths differ by more than 1%: fx={} fy={}",
                p2[0][0], p2[1][1]
            ),
        });
    }
    Ok(CalibFile { p2, raw })
}

impl CalibFile {
    /// Pinhole intrinsics read off P2. The image size is not stored in
    /// calibration files and must be supplied by the caller.
    pub fn intrinsics(&self, image_w: f64, image_h: f64) -> Result<CameraIntrinsics, CameraError> {
        CameraIntrinsics::new(self.p2[0][0], self.p2[0][2], self.p2[1][2], image_w, image_h)
    }

    /// The camera translation hidden in P2's fourth column, expressed so
    /// that projecting `p + translation` through [`CalibFile::intrinsics`]
    /// reproduces the full homogeneous P2 projection.
    pub fn translation(&self) -> Point3 {
        let f = self.p2[0][0];
        Point3::new(
            (self.p2[0][3] - self.p2[0][2] * self.p2[2][3]) / f,
            (self.p2[1][3] - self.p2[1][2] * self.p2[2][3]) / f,
            self.p2[2][3],
        )
    }

    /// Projects through the full 3x4 matrix, for cross-checking.
    pub fn project_homogeneous(&self, p: Point3) -> Pixel {
        let row = |r: [f64; 4]| r[0] * p.x + r[1] * p.y + r[2] * p.z + r[3];
        let w = row(self.p2[2]);
        Pixel::new(row(self.p2[0]) / w, row(self.p2[1]) / w)
    }
}

/// Renders a calibration file for a plain centered camera: P0..P3 all
/// equal to K[I|0], identity rectification, zero lidar extrinsics.
pub fn write_calib(intr: &CameraIntrinsics) -> String {
    let k = format!(
        "{:.6} 0.000000 {:.6} 0.000000 0.000000 {:.6} {:.6} 0.000000 0.000000 0.000000 1.000000 0.000000",
        intr.f, intr.px, intr.f, intr.py
    );
    let mut out = String::new();
    for key in ["P0", "P1", "P2", "P3"] {
        let _ = writeln!(out, "{key}: {k}");
    }
    let _ = writeln!(
        out,
        "R0_rect: 1.000000 0.000000 0.000000 0.000000 1.000000 0.000000 0.000000 0.000000 1.000000"
    );
    let _ = writeln!(
        out,
        "Tr_velo_to_cam: 0.000000 0.000000 0.000000 0.000000 0.000000 0.000000 0.000000 0.000000 0.000000 0.000000 0.000000 0.000000"
    );
    out
}

/// One instance of ground-truth 2D keypoints, stored as a JSON line.
///
/// Each keypoint triplet is `[u, v, vis]` with `vis` 0 or 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeypointAnnotation {
    pub frame: u32,
    pub class_id: usize,
    pub keypoints: [[f64; 3]; 14],
}

impl KeypointAnnotation {
    pub fn from_pixels(frame: u32, class_id: usize, kps: &[(Pixel, bool); 14]) -> Self {
        let mut keypoints = [[0.0; 3]; 14];
        for (slot, (px, vis)) in keypoints.iter_mut().zip(kps) {
            *slot = [px.u, px.v, if *vis { 1.0 } else { 0.0 }];
        }
        Self { frame, class_id, keypoints }
    }

    pub fn to_pixels(&self) -> [(Pixel, bool); 14] {
        let mut out = [(Pixel::new(0.0, 0.0), false); 14];
        for (slot, kp) in out.iter_mut().zip(&self.keypoints) {
            *slot = (Pixel::new(kp[0], kp[1]), kp[2] != 0.0);
        }
        out
    }

    /// Checks that every visible keypoint lies inside the image.
    pub fn validate(&self, intr: &CameraIntrinsics) -> Result<(), KittiError> {
        for (index, kp) in self.keypoints.iter().enumerate() {
            if kp[2] != 0.0 && !intr.contains(Pixel::new(kp[0], kp[1])) {
                return Err(KittiError::KeypointOutOfImage { index });
            }
        }
        Ok(())
    }
}

/// Parses JSON-lines content; line numbers in errors are 1-based.
pub fn parse_jsonl_str<T: DeserializeOwned>(text: &str) -> Result<Vec<T>, KittiError> {
    let mut items = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        items.push(
            serde_json::from_str(line)
                .map_err(|source| KittiError::MalformedJsonLine { line: i + 1, source })?,
        );
    }
    Ok(items)
}

/// Serializes items as JSON lines.
pub fn jsonl_to_string<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("jsonl types serialize"));
        out.push('\n');
    }
    out
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, KittiError> {
    parse_jsonl_str(&std::fs::read_to_string(path)?)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), KittiError> {
    Ok(std::fs::write(path, jsonl_to_string(items))?)
}

/// Canonical per-frame file name, zero-padded to six digits.
pub fn frame_file_name(frame: u32, ext: &str) -> String {
    format!("{frame:06}.{ext}")
}

/// Lists the frame-numbered files with the given extension, sorted by
/// frame id. Files whose stem is not a frame number are ignored.
pub fn list_frame_files(dir: &Path, ext: &str) -> Result<Vec<(u32, PathBuf)>, KittiError> {
    let mut frames = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some(ext) {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else { continue };
        if stem.len() == 6 && stem.bytes().all(|b| b.is_ascii_digit()) {
            frames.push((stem.parse().unwrap(), path));
        }
    }
    frames.sort_by_key(|(frame, _)| *frame);
    Ok(frames)
}
