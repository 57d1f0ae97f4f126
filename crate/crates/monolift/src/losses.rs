//! Training losses: keypoint coordinate + visibility, dimension offsets,
//! MultiBin orientation, and the geometric reprojection loss with its
//! analytic gradient.
//!
//! The reprojection loss differentiates through the full chain
//! model frame -> camera frame -> image plane with respect to the seven
//! pose parameters (c_x, c_y, c_z, yaw, w, h, l); gradients always appear
//! in that order.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{CameraIntrinsics, Pixel, Point3};
use crate::geometry3d::{corner_canonical, Rect};
use crate::templates::{model_to_camera, Dims, KeypointId, KeypointTemplate};

/// Probabilities are floored here before any logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("keypoint {index}: visibility pair {pair:?} is not a probability distribution")]
    InvalidProbability { index: usize, pair: [f64; 2] },
    #[error("transformed point {what} is behind the camera (z = {z})")]
    BehindCamera { what: ModelPointRef, z: f64 },
}

/// Identifies which transformed model point an error refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelPointRef {
    Keypoint(KeypointId),
    Corner(usize),
}

impl std::fmt::Display for ModelPointRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelPointRef::Keypoint(id) => write!(f, "keypoint {id}"),
            ModelPointRef::Corner(j) => write!(f, "corner {j}"),
        }
    }
}

/// Ground-truth keypoint regression targets in a normalized RoI frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeypointTarget {
    /// Normalized (x, y) per keypoint, in [0, 1]^2 for visible keypoints.
    pub coords: [[f64; 2]; 14],
    pub visible: [bool; 14],
}

/// Network-style keypoint predictions: coordinates plus a two-class
/// visibility distribution per keypoint, ordered [p_hidden, p_visible].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeypointPrediction {
    pub coords: [[f64; 2]; 14],
    pub vis: [[f64; 2]; 14],
}

/// Breakdown of the keypoint head loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeypointLoss {
    pub coord: f64,
    pub vis: f64,
    pub total: f64,
}

/// The seven pose parameters the reprojection loss differentiates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseParams {
    pub center: Point3,
    pub yaw: f64,
    pub dims: Dims,
}

impl PoseParams {
    pub fn as_array(&self) -> [f64; 7] {
        [
            self.center.x,
            self.center.y,
            self.center.z,
            self.yaw,
            self.dims.w,
            self.dims.h,
            self.dims.l,
        ]
    }

    pub fn from_array(a: [f64; 7]) -> Self {
        Self {
            center: Point3::new(a[0], a[1], a[2]),
            yaw: a[3],
            dims: Dims::new(a[4], a[5], a[6]),
        }
    }
}

/// Image-plane ground truth the reprojection loss compares against.
#[derive(Debug, Clone, PartialEq)]
pub struct ReprojectionTargets {
    /// Pixel coordinates per keypoint; only visible entries enter the loss.
    pub keypoints: [Pixel; 14],
    pub visible: [bool; 14],
    pub box2d: Rect,
}

/// A loss value together with its gradient in the order
/// (c_x, c_y, c_z, yaw, w, h, l).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub grad: [f64; 7],
}

/// Huber-style smooth L1: quadratic inside the unit interval, linear
/// outside, continuously differentiable at the seam.
pub fn smooth_l1(x: f64) -> f64 {
    let a = x.abs();
    if a < 1.0 {
        0.5 * x * x
    } else {
        a - 0.5
    }
}

pub fn smooth_l1_deriv(x: f64) -> f64 {
    if x.abs() < 1.0 {
        x
    } else {
        x.signum()
    }
}

/// Keypoint head loss: masked smooth L1 on coordinates plus two-class
/// cross-entropy on visibility. Coordinate terms only accrue for
/// ground-truth-visible keypoints; the visibility term covers all 14.
pub fn keypoint_loss(
    gt: &KeypointTarget,
    pred: &KeypointPrediction,
) -> Result<KeypointLoss, LossError> {
    for (k, pair) in pred.vis.iter().enumerate() {
        let in_range = pair.iter().all(|p| (0.0..=1.0).contains(p));
        if !in_range || (pair[0] + pair[1] - 1.0).abs() > 1e-6 {
            return Err(LossError::InvalidProbability { index: k, pair: *pair });
        }
    }
    let mut coord = 0.0;
    let mut vis = 0.0;
    for k in 0..14 {
        if gt.visible[k] {
            coord += smooth_l1(pred.coords[k][0] - gt.coords[k][0]);
            coord += smooth_l1(pred.coords[k][1] - gt.coords[k][1]);
        }
        let p_true = pred.vis[k][usize::from(gt.visible[k])];
        vis -= p_true.max(PROB_FLOOR).ln();
    }
    Ok(KeypointLoss { coord, vis, total: coord + vis })
}

/// Dimension head loss in log space: smooth L1 between ground-truth and
/// predicted offsets t_d = ln(d / mean_d), summed over (w, h, l).
pub fn dim_loss(gt_dims: Dims, pred_offsets: [f64; 3], tpl: &KeypointTemplate) -> f64 {
    let m = tpl.mean_dims;
    let gt_t = [(gt_dims.w / m.w).ln(), (gt_dims.h / m.h).ln(), (gt_dims.l / m.l).ln()];
    (0..3).map(|i| smooth_l1(gt_t[i] - pred_offsets[i])).sum()
}

/// MultiBin orientation classification loss: negative log probability of
/// the ground-truth bin, floored at `PROB_FLOOR`.
pub fn orientation_loss(gt_bin: usize, pred_bins: &[f64]) -> f64 {
    assert!(
        gt_bin < pred_bins.len(),
        "gt_bin {gt_bin} out of range for {} bins",
        pred_bins.len()
    );
    -pred_bins[gt_bin].max(PROB_FLOOR).ln()
}

/// One projected model point with du/d(param), dv/d(param).
struct ProjectedJet {
    px: Pixel,
    du: [f64; 7],
    dv: [f64; 7],
}

fn project_jet(
    intr: &CameraIntrinsics,
    params: &PoseParams,
    canon: [f64; 3],
    what: ModelPointRef,
) -> Result<ProjectedJet, LossError> {
    let p = model_to_camera(canon, params.center, params.yaw, params.dims);
    let px = intr.project(p).map_err(|_| LossError::BehindCamera { what, z: p.z })?;
    let (s, c) = params.yaw.sin_cos();
    let [xm, ym, zm] = canon;
    let lx = params.dims.l * xm;
    let wz = params.dims.w * zm;
    // dP/d(param) for param order (c_x, c_y, c_z, yaw, w, h, l).
    let dp = [
        Point3::new(1.0, 0.0, 0.0),
        Point3::new(0.0, 1.0, 0.0),
        Point3::new(0.0, 0.0, 1.0),
        Point3::new(-s * lx + c * wz, 0.0, -c * lx - s * wz),
        Point3::new(s * zm, 0.0, c * zm),
        Point3::new(0.0, ym, 0.0),
        Point3::new(c * xm, 0.0, -s * xm),
    ];
    let inv_z = 1.0 / p.z;
    let fu = intr.f * inv_z;
    let gx = -intr.f * p.x * inv_z * inv_z;
    let gy = -intr.f * p.y * inv_z * inv_z;
    let mut du = [0.0; 7];
    let mut dv = [0.0; 7];
    for j in 0..7 {
        du[j] = fu * dp[j].x + gx * dp[j].z;
        dv[j] = fu * dp[j].y + gy * dp[j].z;
    }
    Ok(ProjectedJet { px, du, dv })
}

/// Geometric reprojection loss: smooth L1 between projected template
/// keypoints and ground-truth-visible 2D keypoints, plus smooth L1 between
/// the projected box corners' axis-aligned hull and the ground-truth 2D
/// box. Returns the value and the analytic 7-gradient.
///
/// Every transformed keypoint and corner must land in front of the camera;
/// at hull ties the first corner in the fixed bit ordering takes the
/// gradient.
pub fn reprojection_loss(
    intr: &CameraIntrinsics,
    tpl: &KeypointTemplate,
    params: &PoseParams,
    gt: &ReprojectionTargets,
) -> Result<LossValue, LossError> {
    let mut value = 0.0;
    let mut grad = [0.0f64; 7];
    for id in KeypointId::ALL {
        let jet = project_jet(intr, params, tpl.keypoint(id), ModelPointRef::Keypoint(id))?;
        if !gt.visible[id.code()] {
            continue;
        }
        let target = gt.keypoints[id.code()];
        let eu = jet.px.u - target.u;
        let ev = jet.px.v - target.v;
        value += smooth_l1(eu) + smooth_l1(ev);
        let su = smooth_l1_deriv(eu);
        let sv = smooth_l1_deriv(ev);
        for j in 0..7 {
            grad[j] += su * jet.du[j] + sv * jet.dv[j];
        }
    }

    let corners = project_corners(intr, params)?;
    let hull = corner_hull(&corners);
    let targets = [gt.box2d.xmin, gt.box2d.ymin, gt.box2d.xmax, gt.box2d.ymax];
    for (side, &(coord, corner)) in hull.iter().enumerate() {
        let e = coord - targets[side];
        value += smooth_l1(e);
        let d = smooth_l1_deriv(e);
        let jet = &corners[corner];
        // Sides 0 and 2 are u extremes, 1 and 3 are v extremes.
        let dd = if side % 2 == 0 { &jet.du } else { &jet.dv };
        for j in 0..7 {
            grad[j] += d * dd[j];
        }
    }
    Ok(LossValue { value, grad })
}

fn project_corners(
    intr: &CameraIntrinsics,
    params: &PoseParams,
) -> Result<Vec<ProjectedJet>, LossError> {
    (0..8)
        .map(|j| project_jet(intr, params, corner_canonical(j), ModelPointRef::Corner(j)))
        .collect()
}

/// The axis-aligned hull of the projected corners as
/// [(xmin, corner), (ymin, corner), (xmax, corner), (ymax, corner)];
/// strict comparisons keep the first extreme corner under ties.
fn corner_hull(corners: &[ProjectedJet]) -> [(f64, usize); 4] {
    let mut hull = [
        (f64::INFINITY, 0usize),
        (f64::INFINITY, 0usize),
        (f64::NEG_INFINITY, 0usize),
        (f64::NEG_INFINITY, 0usize),
    ];
    for (j, jet) in corners.iter().enumerate() {
        if jet.px.u < hull[0].0 {
            hull[0] = (jet.px.u, j);
        }
        if jet.px.v < hull[1].0 {
            hull[1] = (jet.px.v, j);
        }
        if jet.px.u > hull[2].0 {
            hull[2] = (jet.px.u, j);
        }
        if jet.px.v > hull[3].0 {
            hull[3] = (jet.px.v, j);
        }
    }
    hull
}

/// Distance of the reprojection loss configuration from its nearest
/// non-differentiable point: the gap of every smooth-L1 argument to the
/// |x| = 1 seam and the runner-up margin of every hull extreme. Useful for
/// picking finite-difference probe points; values above ~1e-3 are safe.
pub fn reprojection_kink_margin(
    intr: &CameraIntrinsics,
    tpl: &KeypointTemplate,
    params: &PoseParams,
    gt: &ReprojectionTargets,
) -> Result<f64, LossError> {
    let seam = |e: f64| (e.abs() - 1.0).abs();
    let mut margin = f64::INFINITY;
    for id in KeypointId::ALL {
        let jet = project_jet(intr, params, tpl.keypoint(id), ModelPointRef::Keypoint(id))?;
        if gt.visible[id.code()] {
            margin = margin.min(seam(jet.px.u - gt.keypoints[id.code()].u));
            margin = margin.min(seam(jet.px.v - gt.keypoints[id.code()].v));
        }
    }
    let corners = project_corners(intr, params)?;
    let hull = corner_hull(&corners);
    let targets = [gt.box2d.xmin, gt.box2d.ymin, gt.box2d.xmax, gt.box2d.ymax];
    for (side, &(coord, corner)) in hull.iter().enumerate() {
        margin = margin.min(seam(coord - targets[side]));
        // Margin between the extreme corner and the runner-up. The height
        // twin of a u extreme shares its x and z, so its u coordinate and
        // gradient are identical and the tie cannot produce a kink; it is
        // excluded from the runner-up scan.
        let mut runner = f64::INFINITY;
        for (j, jet) in corners.iter().enumerate() {
            if j == corner || (side % 2 == 0 && j == (corner ^ 2)) {
                continue;
            }
            let c = if side % 2 == 0 { jet.px.u } else { jet.px.v };
            runner = runner.min((c - coord).abs());
        }
        margin = margin.min(runner);
    }
    Ok(margin)
}

/// Equal-weight combination of the training heads, as used when a single
/// scalar objective is requested.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingLosses {
    pub keypoint: KeypointLoss,
    pub dims: f64,
    pub orientation: f64,
    pub reprojection: f64,
}

impl TrainingLosses {
    pub fn total(&self) -> f64 {
        self.keypoint.total + self.dims + self.orientation + self.reprojection
    }
}
