//! Lifts 2D detections to 3D poses.
//!
//! The pipeline runs in five steps: decode metric dimensions from log-space
//! offsets, estimate depth from the pixel span of a windshield keypoint
//! pair, back-project that pair's bottom keypoint, decode the local
//! orientation from the 72-bin distribution and compose it with the viewing
//! ray, then walk from the lifted keypoint to the box center using the
//! template's signed offset ratios.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angles::wrap_to_pi;
use crate::camera::{CameraError, CameraIntrinsics, Pixel, Point3};
use crate::geometry3d::{Box3D, GeometryError, Rect};
use crate::templates::{model_to_camera, DepthPair, Dims, KeypointId, KeypointTemplate, TemplateSet};

/// Number of local-orientation bins.
pub const ORIENT_BINS: usize = 72;

/// Number of object classes.
pub const NUM_CLASSES: usize = 5;

/// Angular width of one orientation bin, radians (5 degrees).
pub const BIN_WIDTH: f64 = std::f64::consts::TAU / ORIENT_BINS as f64;

/// Pixel spans below this are too ill-conditioned for depth estimation.
pub const MIN_PIXEL_SPAN: f64 = 1e-6;

/// Resultant lengths below this mean the bin distribution carries no
/// direction (for example a uniform distribution).
pub const MIN_RESULTANT: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum LiftError {
    #[error("no windshield keypoint pair is fully visible")]
    NoVisiblePair,
    #[error("best visible pair spans {span} px, below the {MIN_PIXEL_SPAN} px minimum")]
    DegeneratePair { span: f64 },
    #[error("orientation bins have no net direction (resultant below {MIN_RESULTANT})")]
    DegenerateDistribution,
    #[error("assembled center lies behind the camera (z = {z})")]
    CenterBehindCamera { z: f64 },
    #[error("class {class_id} has no template (set holds {n_classes})")]
    ClassOutOfRange { class_id: usize, n_classes: usize },
    #[error("invalid detection: {reason}")]
    InvalidDetection { reason: String },
    #[error(transparent)]
    Camera(#[from] CameraError),
}

/// Median angle of orientation bin `i`, radians in (0, 2pi).
///
/// Bin `i` covers `[i, i + 1) * 5` degrees, so its median sits at
/// `(i + 0.5) * 5` degrees.
pub fn bin_median(i: usize) -> f64 {
    (i as f64 + 0.5) * BIN_WIDTH
}

/// Index of the bin containing the angle (taken modulo a full turn).
pub fn bin_index(theta: f64) -> usize {
    let t = theta.rem_euclid(std::f64::consts::TAU);
    ((t / BIN_WIDTH) as usize).min(ORIENT_BINS - 1)
}

/// One predicted keypoint in image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageKeypoint {
    pub u: f64,
    pub v: f64,
    pub visible: bool,
}

impl ImageKeypoint {
    pub fn new(u: f64, v: f64, visible: bool) -> Self {
        Self { u, v, visible }
    }

    pub fn pixel(&self) -> Pixel {
        Pixel::new(self.u, self.v)
    }
}

/// Everything the network predicts for one object in one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection2D {
    /// Axis-aligned 2D box, pixels.
    pub box2d: Rect,
    /// The 14 keypoints, indexed by keypoint code.
    pub keypoints: [ImageKeypoint; 14],
    /// Probability mass over the 72 local-orientation bins.
    #[serde(with = "serde_big_array::BigArray")]
    pub orient_bins: [f64; ORIENT_BINS],
    /// Log-space dimension offsets (dw, dh, dl) relative to the class mean.
    pub dim_offsets: [f64; 3],
    /// Probability mass over the 5 classes.
    pub class_probs: [f64; NUM_CLASSES],
    /// Detection confidence in [0, 1].
    pub score: f64,
}

impl Detection2D {
    /// A valid detection with every keypoint hidden: class 0, all
    /// orientation mass in bin 0, zero dimension offsets. A convenient
    /// starting point for building detections by hand.
    pub fn hidden(box2d: Rect) -> Self {
        let mut orient_bins = [0.0; ORIENT_BINS];
        orient_bins[0] = 1.0;
        let mut class_probs = [0.0; NUM_CLASSES];
        class_probs[0] = 1.0;
        Self {
            box2d,
            keypoints: [ImageKeypoint::new(0.0, 0.0, false); 14],
            orient_bins,
            dim_offsets: [0.0; 3],
            class_probs,
            score: 0.5,
        }
    }

    pub fn keypoint(&self, id: KeypointId) -> ImageKeypoint {
        self.keypoints[id.code()]
    }

    /// True when both keypoints of the pair are marked visible.
    pub fn pair_visible(&self, pair: DepthPair) -> bool {
        self.keypoint(pair.top()).visible && self.keypoint(pair.bottom()).visible
    }

    /// Index of the most probable class. Ties keep the lowest index.
    pub fn argmax_class(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.class_probs.iter().enumerate() {
            if p > self.class_probs[best] {
                best = i;
            }
        }
        best
    }

    /// Checks the value-level invariants that the field types cannot.
    pub fn validate(&self) -> Result<(), LiftError> {
        let fail = |reason: String| Err(LiftError::InvalidDetection { reason });
        if !(self.box2d.xmin < self.box2d.xmax && self.box2d.ymin < self.box2d.ymax) {
            return fail(format!(
                "box2d must satisfy xmin < xmax and ymin < ymax, got ({}, {}, {}, {})",
                self.box2d.xmin, self.box2d.ymin, self.box2d.xmax, self.box2d.ymax
            ));
        }
        for (i, kp) in self.keypoints.iter().enumerate() {
            if !(kp.u.is_finite() && kp.v.is_finite()) {
                return fail(format!("keypoint {i} has non-finite coordinates"));
            }
        }
        check_distribution(&self.orient_bins, "orient_bins")?;
        check_distribution(&self.class_probs, "class_probs")?;
        for (i, &d) in self.dim_offsets.iter().enumerate() {
            if !d.is_finite() {
                return fail(format!("dim_offsets[{i}] is not finite"));
            }
        }
        if !(0.0..=1.0).contains(&self.score) {
            return fail(format!("score must lie in [0, 1], got {}", self.score));
        }
        Ok(())
    }
}

fn check_distribution(probs: &[f64], what: &str) -> Result<(), LiftError> {
    let mut sum = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        if !p.is_finite() || p < 0.0 {
            return Err(LiftError::InvalidDetection {
                reason: format!("{what}[{i}] must be a finite non-negative probability, got {p}"),
            });
        }
        sum += p;
    }
    if (sum - 1.0).abs() > 1e-6 {
        return Err(LiftError::InvalidDetection {
            reason: format!("{what} must sum to 1 within 1e-6, got {sum}"),
        });
    }
    Ok(())
}

/// A recovered 3D pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose3D {
    /// Geometric box center in camera coordinates, meters.
    pub center: Point3,
    /// Yaw about the vertical axis, radians in [-pi, pi).
    pub yaw: f64,
    /// Metric dimensions, meters.
    pub dims: Dims,
    /// Object class, 0..4.
    pub class_id: usize,
    /// Confidence inherited from the detection.
    pub score: f64,
}

impl Pose3D {
    pub fn to_box3d(&self) -> Result<Box3D, GeometryError> {
        Box3D::new(self.center, self.yaw, self.dims)
    }
}

/// Applies the log-space offsets to the template's mean dimensions.
pub fn decode_dims(det: &Detection2D, tpl: &KeypointTemplate) -> Dims {
    let [dw, dh, dl] = det.dim_offsets;
    let mu = tpl.mean_dims;
    Dims::new(mu.w * dw.exp(), mu.h * dh.exp(), mu.l * dl.exp())
}

/// Picks the visible windshield pair with the largest pixel span.
///
/// Ties keep the earliest pair in [`DepthPair::ALL`] order. Returns the
/// pair and its span.
pub fn select_depth_pair(det: &Detection2D) -> Result<(DepthPair, f64), LiftError> {
    let mut best: Option<(DepthPair, f64)> = None;
    for pair in DepthPair::ALL {
        if !det.pair_visible(pair) {
            continue;
        }
        let span = (det.keypoint(pair.top()).v - det.keypoint(pair.bottom()).v).abs();
        if best.map_or(true, |(_, s)| span > s) {
            best = Some((pair, span));
        }
    }
    let (pair, span) = best.ok_or(LiftError::NoVisiblePair)?;
    if span < MIN_PIXEL_SPAN {
        return Err(LiftError::DegeneratePair { span });
    }
    Ok((pair, span))
}

/// Depth of the keypoint plane from a windshield pair's pixel span.
///
/// With `r_cad` the pair's height fraction and `h` the metric object
/// height, the pair spans `r_cad * h` meters vertically; a pinhole camera
/// images that at `f * r_cad * h / z` pixels, so `z = f * r_cad * h / span`.
/// Returns the depth and the pair it came from.
pub fn instance_depth(
    intr: &CameraIntrinsics,
    det: &Detection2D,
    tpl: &KeypointTemplate,
    h_meters: f64,
) -> Result<(f64, DepthPair), LiftError> {
    let (pair, span) = select_depth_pair(det)?;
    let r_cad = tpl.pair_height_ratio(pair);
    let z = intr.f * r_cad * h_meters / span;
    Ok((z, pair))
}

/// Back-projects the pair's bottom keypoint pixel to depth `z`.
pub fn lift_keypoint(
    intr: &CameraIntrinsics,
    det: &Detection2D,
    pair: DepthPair,
    z: f64,
) -> Result<Point3, LiftError> {
    let kp = det.keypoint(pair.bottom());
    Ok(intr.backproject(kp.pixel(), z)?)
}

/// Circular weighted mean of `(weight, angle)` pairs, radians in [-pi, pi).
///
/// Averaging on the circle instead of the line keeps the estimate
/// continuous across the 0/2pi seam; for mass concentrated well inside a
/// half circle it agrees with the arithmetic mean.
pub fn circular_weighted_mean(
    weighted_angles: impl IntoIterator<Item = (f64, f64)>,
) -> Result<f64, LiftError> {
    let (mut s, mut c) = (0.0, 0.0);
    for (w, a) in weighted_angles {
        s += w * a.sin();
        c += w * a.cos();
    }
    if s.hypot(c) < MIN_RESULTANT {
        return Err(LiftError::DegenerateDistribution);
    }
    Ok(wrap_to_pi(s.atan2(c)))
}

/// Decodes the local orientation as the circular weighted mean of the bin
/// medians.
pub fn decode_local_orientation(orient_bins: &[f64]) -> Result<f64, LiftError> {
    if orient_bins.len() != ORIENT_BINS {
        return Err(LiftError::InvalidDetection {
            reason: format!("expected {ORIENT_BINS} orientation bins, got {}", orient_bins.len()),
        });
    }
    circular_weighted_mean(orient_bins.iter().enumerate().map(|(i, &p)| (p, bin_median(i))))
}

/// Composes the local orientation with the viewing-ray angle of the lifted
/// keypoint to get the global yaw, radians in [-pi, pi).
pub fn global_orientation(theta_loc: f64, kp3d: Point3) -> f64 {
    wrap_to_pi(theta_loc + kp3d.x.atan2(kp3d.z))
}

/// Runs the full lifting pipeline against one class template.
///
/// The caller picks the template; it should match `det.argmax_class()`.
/// The detection is assumed valid (see [`Detection2D::validate`]).
pub fn assemble_pose(
    intr: &CameraIntrinsics,
    det: &Detection2D,
    tpl: &KeypointTemplate,
) -> Result<Pose3D, LiftError> {
    let dims = decode_dims(det, tpl);
    let (z, pair) = instance_depth(intr, det, tpl, dims.h)?;
    let kp3d = lift_keypoint(intr, det, pair, z)?;
    let theta_loc = decode_local_orientation(&det.orient_bins)?;
    let yaw = global_orientation(theta_loc, kp3d);
    // The offset ratios point center -> keypoint; negate them to walk back
    // from the lifted keypoint to the center.
    let (r_w, r_h, r_l) = tpl.center_offset_ratios(pair.bottom());
    let center = model_to_camera([-r_l, -r_h, -r_w], kp3d, yaw, dims);
    if center.z <= 0.0 {
        return Err(LiftError::CenterBehindCamera { z: center.z });
    }
    Ok(Pose3D { center, yaw, dims, class_id: det.argmax_class(), score: det.score })
}

/// [`assemble_pose`] with the template chosen by the detection's argmax
/// class.
pub fn assemble_pose_auto(
    intr: &CameraIntrinsics,
    det: &Detection2D,
    set: &TemplateSet,
) -> Result<Pose3D, LiftError> {
    let class_id = det.argmax_class();
    let tpl = set
        .for_class(class_id)
        .ok_or(LiftError::ClassOutOfRange { class_id, n_classes: set.len() })?;
    assemble_pose(intr, det, tpl)
}

/// Lifts a batch of detections in parallel.
///
/// Results are positionally aligned with the input and identical for any
/// thread count.
pub fn lift_batch(
    intr: &CameraIntrinsics,
    dets: &[Detection2D],
    set: &TemplateSet,
) -> Vec<Result<Pose3D, LiftError>> {
    use rayon::prelude::*;
    dets.par_iter().map(|det| assemble_pose_auto(intr, det, set)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angles::angular_difference;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_4, PI, TAU};

    fn intr700() -> CameraIntrinsics {
        CameraIntrinsics::new(700.0, 640.0, 360.0, 1280.0, 720.0).unwrap()
    }

    fn blank_detection() -> Detection2D {
        Detection2D {
            box2d: Rect::new(0.0, 0.0, 100.0, 100.0),
            keypoints: [ImageKeypoint::new(0.0, 0.0, false); 14],
            orient_bins: one_hot_bins(0),
            dim_offsets: [0.0; 3],
            class_probs: [1.0, 0.0, 0.0, 0.0, 0.0],
            score: 0.9,
        }
    }

    fn one_hot_bins(idx: usize) -> [f64; ORIENT_BINS] {
        let mut bins = [0.0; ORIENT_BINS];
        bins[idx] = 1.0;
        bins
    }

    fn set_pair(det: &mut Detection2D, pair: DepthPair, u: f64, v_top: f64, v_bottom: f64) {
        det.keypoints[pair.top().code()] = ImageKeypoint::new(u, v_top, true);
        det.keypoints[pair.bottom().code()] = ImageKeypoint::new(u, v_bottom, true);
    }

    /// Sedan template with the front windshield pair moved to span exactly
    /// a quarter of the model height.
    fn quarter_span_template() -> KeypointTemplate {
        let mut tpl = TemplateSet::builtin().for_class(1).unwrap().clone();
        for (id, y) in [
            (KeypointId::WindshieldFrontTl, -0.125),
            (KeypointId::WindshieldFrontTr, -0.125),
            (KeypointId::WindshieldFrontBl, 0.125),
            (KeypointId::WindshieldFrontBr, 0.125),
        ] {
            tpl.keypoints[id.code()][1] = y;
        }
        tpl
    }

    #[test]
    fn bin_grid_is_consistent() {
        assert_eq!(bin_median(0), PI / 72.0);
        assert!((bin_median(0).to_degrees() - 2.5).abs() < 1e-12);
        assert!((bin_median(71).to_degrees() - 357.5).abs() < 1e-12);
        for i in 0..ORIENT_BINS {
            let m = bin_median(i);
            assert!(m > 0.0 && m < TAU);
            assert_eq!(bin_index(m), i);
        }
        assert_eq!(bin_index(0.0), 0);
        assert_eq!(bin_index(TAU - 1e-12), 71);
        assert_eq!(bin_index(-0.01), 71);
    }

    #[test]
    fn decode_dims_applies_log_offsets() {
        let mut tpl = TemplateSet::builtin().for_class(0).unwrap().clone();
        tpl.mean_dims = Dims::new(1.8, 1.5, 4.2);
        let mut det = blank_detection();
        let d = decode_dims(&det, &tpl);
        assert_eq!((d.w, d.h, d.l), (1.8, 1.5, 4.2));

        det.dim_offsets = [2.0f64.ln(), 0.0, 0.0];
        let d = decode_dims(&det, &tpl);
        assert!((d.w - 3.6).abs() < 1e-12);

        let target = Dims::new(1.61, 1.72, 4.93);
        det.dim_offsets = [
            (target.w / tpl.mean_dims.w).ln(),
            (target.h / tpl.mean_dims.h).ln(),
            (target.l / tpl.mean_dims.l).ln(),
        ];
        let d = decode_dims(&det, &tpl);
        assert!((d.w - target.w).abs() < 1e-12);
        assert!((d.h - target.h).abs() < 1e-12);
        assert!((d.l - target.l).abs() < 1e-12);
    }

    #[test]
    fn depth_worked_example_is_exact() {
        let tpl = quarter_span_template();
        assert_eq!(tpl.pair_height_ratio(DepthPair::FrontLeft), 0.25);
        let mut det = blank_detection();
        set_pair(&mut det, DepthPair::FrontLeft, 300.0, 100.0, 128.0);
        let (z, pair) = instance_depth(&intr700(), &det, &tpl, 1.6).unwrap();
        assert_eq!(pair, DepthPair::FrontLeft);
        assert_eq!(z, 10.0);
    }

    #[test]
    fn pair_selection_prefers_largest_span_then_order() {
        let mut det = blank_detection();
        set_pair(&mut det, DepthPair::FrontLeft, 300.0, 100.0, 120.0);
        set_pair(&mut det, DepthPair::FrontRight, 330.0, 100.0, 125.0);
        set_pair(&mut det, DepthPair::RearLeft, 360.0, 100.0, 131.0);
        set_pair(&mut det, DepthPair::RearRight, 390.0, 100.0, 126.0);
        let (pair, span) = select_depth_pair(&det).unwrap();
        assert_eq!(pair, DepthPair::RearLeft);
        assert_eq!(span, 31.0);

        // An exact tie keeps the earliest pair in DepthPair::ALL order.
        let mut det = blank_detection();
        set_pair(&mut det, DepthPair::FrontRight, 330.0, 100.0, 125.0);
        set_pair(&mut det, DepthPair::RearRight, 390.0, 100.0, 125.0);
        let (pair, _) = select_depth_pair(&det).unwrap();
        assert_eq!(pair, DepthPair::FrontRight);
    }

    #[test]
    fn pair_selection_error_paths() {
        let det = blank_detection();
        assert!(matches!(select_depth_pair(&det), Err(LiftError::NoVisiblePair)));

        // A pair with only one visible keypoint does not count.
        let mut det = blank_detection();
        det.keypoints[KeypointId::WindshieldFrontTl.code()] = ImageKeypoint::new(300.0, 90.0, true);
        det.keypoints[KeypointId::WindshieldRearBl.code()] = ImageKeypoint::new(310.0, 120.0, true);
        assert!(matches!(select_depth_pair(&det), Err(LiftError::NoVisiblePair)));

        let mut det = blank_detection();
        set_pair(&mut det, DepthPair::FrontLeft, 300.0, 100.0, 100.0);
        assert!(matches!(select_depth_pair(&det), Err(LiftError::DegeneratePair { span }) if span == 0.0));
    }

    #[test]
    fn lift_keypoint_centered_pixel() {
        let intr = intr700();
        let mut det = blank_detection();
        set_pair(&mut det, DepthPair::FrontLeft, intr.px, intr.py - 20.0, intr.py);
        let p = lift_keypoint(&intr, &det, DepthPair::FrontLeft, 10.0).unwrap();
        assert_eq!((p.x, p.y, p.z), (0.0, 0.0, 10.0));
        assert!(matches!(
            lift_keypoint(&intr, &det, DepthPair::FrontLeft, -1.0),
            Err(LiftError::Camera(CameraError::NonPositiveDepth(_)))
        ));
    }

    #[test]
    fn decode_orientation_one_hot_and_wraparound() {
        let theta = decode_local_orientation(&one_hot_bins(0)).unwrap();
        assert!((theta - 0.04363323129985824).abs() < 1e-12);

        // Equal mass on the two bins straddling zero cancels to zero.
        let mut bins = [0.0; ORIENT_BINS];
        bins[71] = 0.5;
        bins[0] = 0.5;
        let theta = decode_local_orientation(&bins).unwrap();
        assert!(theta.abs() < 1e-12, "got {theta}");

        // Bin medians above half a turn come back wrapped into [-pi, pi).
        let theta = decode_local_orientation(&one_hot_bins(71)).unwrap();
        assert!((theta - (bin_median(71) - TAU)).abs() < 1e-12);
        assert!(theta < 0.0);
    }

    #[test]
    fn decode_orientation_degenerate_and_length_checks() {
        let uniform = [1.0 / ORIENT_BINS as f64; ORIENT_BINS];
        assert!(matches!(
            decode_local_orientation(&uniform),
            Err(LiftError::DegenerateDistribution)
        ));
        assert!(matches!(
            decode_local_orientation(&[0.5, 0.5]),
            Err(LiftError::InvalidDetection { .. })
        ));
    }

    #[test]
    fn circular_mean_matches_frozen_value() {
        // Two nearby angles: the circular mean sits within 0.005 degrees of
        // the arithmetic mean 12.5.
        let mean = circular_weighted_mean([
            (0.75, 10.0f64.to_radians()),
            (0.25, 20.0f64.to_radians()),
        ])
        .unwrap();
        assert!((mean.to_degrees() - 12.495231278463402).abs() < 1e-9);
        assert!((mean.to_degrees() - 12.5).abs() < 0.05);
    }

    #[test]
    fn global_orientation_examples() {
        let theta_loc = 0.0436;
        assert_eq!(global_orientation(theta_loc, Point3::new(0.0, 0.5, 12.0)), theta_loc);
        let theta = global_orientation(theta_loc, Point3::new(7.0, 0.5, 7.0));
        assert!((theta - (theta_loc + FRAC_PI_4)).abs() < 1e-15);
        // Composition wraps into [-pi, pi).
        let theta = global_orientation(3.0, Point3::new(7.0, 0.5, 7.0));
        assert!((-PI..PI).contains(&theta));
        assert!((theta - (3.0 + FRAC_PI_4 - TAU)).abs() < 1e-12);
    }

    /// Projects ground truth into a detection with the given visibility.
    fn detection_from_gt(
        intr: &CameraIntrinsics,
        tpl: &KeypointTemplate,
        center: Point3,
        yaw: f64,
        dims: Dims,
        visible: &[bool; 14],
        bin_idx: usize,
    ) -> Detection2D {
        let mut det = blank_detection();
        let mut class_probs = [0.0; NUM_CLASSES];
        class_probs[tpl.class_id] = 1.0;
        det.class_probs = class_probs;
        det.orient_bins = one_hot_bins(bin_idx);
        det.dim_offsets = [
            (dims.w / tpl.mean_dims.w).ln(),
            (dims.h / tpl.mean_dims.h).ln(),
            (dims.l / tpl.mean_dims.l).ln(),
        ];
        for id in KeypointId::ALL {
            let p = model_to_camera(tpl.keypoint(id), center, yaw, dims);
            let px = intr.project(p).unwrap();
            det.keypoints[id.code()] = ImageKeypoint::new(px.u, px.v, visible[id.code()]);
        }
        det
    }

    /// Solves for a yaw whose local angle at the lifted keypoint lands
    /// exactly on the requested bin median.
    fn bin_aligned_yaw(
        intr: &CameraIntrinsics,
        tpl: &KeypointTemplate,
        center: Point3,
        dims: Dims,
        visible: &[bool; 14],
        bin_idx: usize,
        start: f64,
    ) -> f64 {
        let median = wrap_to_pi(bin_median(bin_idx));
        let mut yaw = start;
        for _ in 0..200 {
            let det = detection_from_gt(intr, tpl, center, yaw, dims, visible, bin_idx);
            let (pair, _) = select_depth_pair(&det).unwrap();
            let kp = model_to_camera(tpl.keypoint(pair.bottom()), center, yaw, dims);
            let next = wrap_to_pi(median + kp.x.atan2(kp.z));
            if angular_difference(next, yaw) < 1e-13 {
                return next;
            }
            yaw = next;
        }
        panic!("bin alignment did not converge");
    }

    #[test]
    fn assemble_pose_recovers_noise_free_ground_truth() {
        let intr = intr700();
        let set = TemplateSet::builtin();
        let all = [true; 14];
        let cases = [
            (0, Point3::new(1.2, 1.0, 14.0), 7usize, 0.3),
            (2, Point3::new(-3.5, 1.3, 22.0), 40, -2.0),
            (4, Point3::new(0.4, 1.1, 9.0), 63, 2.4),
        ];
        for (class_id, center, bin_idx, start) in cases {
            let tpl = set.for_class(class_id).unwrap();
            let dims = Dims::new(
                tpl.mean_dims.w * 0.05f64.exp(),
                tpl.mean_dims.h * (-0.03f64).exp(),
                tpl.mean_dims.l * 0.08f64.exp(),
            );
            let yaw = bin_aligned_yaw(&intr, tpl, center, dims, &all, bin_idx, start);
            let det = detection_from_gt(&intr, tpl, center, yaw, dims, &all, bin_idx);
            let pose = assemble_pose(&intr, &det, tpl).unwrap();
            assert!((pose.center - center).norm() < 1e-9, "center off for class {class_id}");
            assert!(angular_difference(pose.yaw, yaw) < 1e-9, "yaw off for class {class_id}");
            assert_eq!(pose.dims, dims);
            assert_eq!(pose.class_id, class_id);
            assert_eq!(pose.score, det.score);
            assert_eq!(
                assemble_pose_auto(&intr, &det, &set).unwrap().center,
                pose.center
            );
        }
    }

    #[test]
    fn assemble_pose_works_from_rear_pair_only() {
        let intr = intr700();
        let set = TemplateSet::builtin();
        let tpl = set.for_class(1).unwrap();
        let dims = tpl.mean_dims;
        let center = Point3::new(2.0, 1.2, 16.0);
        // Only the rear windshield pair survives truncation.
        let mut visible = [false; 14];
        for id in [
            KeypointId::WindshieldRearTl,
            KeypointId::WindshieldRearBl,
            KeypointId::WindshieldRearTr,
            KeypointId::WindshieldRearBr,
        ] {
            visible[id.code()] = true;
        }
        let yaw = bin_aligned_yaw(&intr, tpl, center, dims, &visible, 12, 0.5);
        let det = detection_from_gt(&intr, tpl, center, yaw, dims, &visible, 12);
        let (pair, _) = select_depth_pair(&det).unwrap();
        assert!(matches!(pair, DepthPair::RearLeft | DepthPair::RearRight));
        let pose = assemble_pose(&intr, &det, tpl).unwrap();
        assert!((pose.center - center).norm() < 1e-9);
        assert!(angular_difference(pose.yaw, yaw) < 1e-9);
    }

    #[test]
    fn assemble_pose_rejects_center_behind_camera() {
        let intr = intr700();
        let set = TemplateSet::builtin();
        let tpl = set.for_class(1).unwrap();
        // A huge pixel span forces a tiny depth; with the local orientation
        // pointing the length axis back toward the camera, the center lands
        // behind the image plane.
        let mut det = blank_detection();
        let span = intr.f * tpl.pair_height_ratio(DepthPair::FrontLeft) * tpl.mean_dims.h / 0.3;
        set_pair(&mut det, DepthPair::FrontLeft, intr.px, 100.0, 100.0 + span);
        det.orient_bins = one_hot_bins(bin_index(270.0f64.to_radians()));
        det.class_probs = [0.0, 1.0, 0.0, 0.0, 0.0];
        let err = assemble_pose(&intr, &det, tpl).unwrap_err();
        assert!(matches!(err, LiftError::CenterBehindCamera { z } if z <= 0.0), "got {err}");
    }

    #[test]
    fn assemble_pose_auto_rejects_missing_class() {
        let intr = intr700();
        let builtin = TemplateSet::builtin();
        let three: Vec<_> = builtin.iter().take(3).cloned().collect();
        let set = TemplateSet::new(three).unwrap();
        let mut det = blank_detection();
        set_pair(&mut det, DepthPair::FrontLeft, 300.0, 100.0, 128.0);
        det.class_probs = [0.0, 0.0, 0.0, 0.0, 1.0];
        let err = assemble_pose_auto(&intr, &det, &set).unwrap_err();
        assert!(
            matches!(err, LiftError::ClassOutOfRange { class_id: 4, n_classes: 3 }),
            "got {err}"
        );
    }

    #[test]
    fn validate_rejects_malformed_detections() {
        let good = {
            let mut det = blank_detection();
            set_pair(&mut det, DepthPair::FrontLeft, 300.0, 100.0, 128.0);
            det
        };
        good.validate().unwrap();

        let mut det = good.clone();
        det.box2d = Rect::new(10.0, 10.0, 10.0, 40.0);
        assert!(det.validate().is_err());

        let mut det = good.clone();
        det.orient_bins[3] = -0.1;
        assert!(det.validate().is_err());

        let mut det = good.clone();
        det.orient_bins[0] += 0.5;
        assert!(det.validate().is_err());

        let mut det = good.clone();
        det.class_probs = [0.3, 0.3, 0.3, 0.3, 0.3];
        assert!(det.validate().is_err());

        let mut det = good.clone();
        det.keypoints[2].u = f64::NAN;
        assert!(det.validate().is_err());

        let mut det = good.clone();
        det.score = 1.5;
        assert!(det.validate().is_err());

        let mut det = good;
        det.dim_offsets[1] = f64::INFINITY;
        assert!(det.validate().is_err());
    }

    #[test]
    fn lift_batch_matches_sequential_order() {
        let intr = intr700();
        let set = TemplateSet::builtin();
        let all = [true; 14];
        let mut dets = Vec::new();
        for i in 0..24 {
            let class_id = i % NUM_CLASSES;
            let tpl = set.for_class(class_id).unwrap();
            let center = Point3::new(-4.0 + 0.4 * i as f64, 1.1, 12.0 + i as f64);
            let yaw = bin_aligned_yaw(&intr, tpl, center, tpl.mean_dims, &all, (i * 5) % 72, 0.1);
            dets.push(detection_from_gt(&intr, tpl, center, yaw, tpl.mean_dims, &all, (i * 5) % 72));
        }
        let batch = lift_batch(&intr, &dets, &set);
        for (det, out) in dets.iter().zip(&batch) {
            let solo = assemble_pose_auto(&intr, det, &set).unwrap();
            let out = out.as_ref().unwrap();
            assert_eq!(out.center, solo.center);
            assert_eq!(out.yaw, solo.yaw);
        }
    }

    proptest! {
        /// Scaling the pixel span by a power of two scales depth by its
        /// exact inverse; arbitrary factors agree to relative 1e-12.
        #[test]
        fn depth_scales_inversely_with_span(
            span in 5.0f64..200.0,
            lambda in 0.1f64..10.0,
            pow2 in -3i32..4,
        ) {
            let tpl = quarter_span_template();
            let intr = intr700();
            // Anchoring the top keypoint at v = 0 keeps the measured span
            // bitwise equal to the scaled value.
            let mut det = blank_detection();
            set_pair(&mut det, DepthPair::FrontLeft, 300.0, 0.0, span);
            let (z, _) = instance_depth(&intr, &det, &tpl, 1.6).unwrap();

            let factor = 2.0f64.powi(pow2);
            let mut det2 = det.clone();
            set_pair(&mut det2, DepthPair::FrontLeft, 300.0, 0.0, span * factor);
            let (z2, _) = instance_depth(&intr, &det2, &tpl, 1.6).unwrap();
            prop_assert_eq!(z2, z / factor);

            let mut det3 = det;
            set_pair(&mut det3, DepthPair::FrontLeft, 300.0, 0.0, span * lambda);
            let (z3, _) = instance_depth(&intr, &det3, &tpl, 1.6).unwrap();
            prop_assert!((z3 - z / lambda).abs() <= 1e-12 * z.abs().max(1.0));
        }

        /// Scaling all class probabilities by a positive constant never
        /// changes the argmax.
        #[test]
        fn argmax_class_scale_invariant(
            probs in proptest::array::uniform5(0.0f64..1.0),
            scale in 0.01f64..100.0,
        ) {
            let mut det = blank_detection();
            det.class_probs = probs;
            let before = det.argmax_class();
            for p in det.class_probs.iter_mut() {
                *p *= scale;
            }
            prop_assert_eq!(det.argmax_class(), before);
        }

        /// The decoded angle of a one-hot distribution is the bin median.
        #[test]
        fn one_hot_decodes_to_median(idx in 0usize..72) {
            let theta = decode_local_orientation(&one_hot_bins(idx)).unwrap();
            let expect = wrap_to_pi(bin_median(idx));
            prop_assert!(angular_difference(theta, expect) < 1e-12);
        }
    }
}
